//! Spectral potential `λ(φ) = ln r(A_φ)` with `A_φ f = A(e^φ f)`, Birkhoff
//! sums, the Gelfand sequence and equilibrium measures.
//!
//! The spectral radius is computed per strongly connected component of the
//! support graph. Each irreducible block is handled by a shifted power
//! iteration (`B + sI` is primitive even when `B` is periodic) stopped by
//! the Collatz–Wielandt bracket `min (Sv)_i/v_i <= r + s <= max (Sv)_i/v_i`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{reachable, reverse_graph, strongly_connected_components, Matrix};
use crate::scalar::{ExtReal, Real};
use crate::systems::{FiniteMapSystem, Measure, TransferMatrix};

/// A real function on the phase space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Potential<T> {
    values: Vec<T>,
}

impl<T: Real> Potential<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Domain(format!("potential value {i} = {v} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![T::zero(); n] }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn add_constant(&self, c: T) -> Self {
        Self { values: self.values.iter().map(|&v| v + c).collect() }
    }

    pub fn scaled(&self, c: T) -> Self {
        Self { values: self.values.iter().map(|&v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect() }
    }
}

impl<T: Real> From<Vec<T>> for Potential<T> {
    /// Panics on non-finite input; use [`Potential::new`] for untrusted data.
    fn from(values: Vec<T>) -> Self {
        Self::new(values).expect("finite potential")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PowerOptions<T> {
    /// Relative width of the Collatz–Wielandt bracket at termination.
    pub tol: T,
    pub max_iter: usize,
    /// Two components are tied when their radii agree to this relative
    /// tolerance; a tie makes the dominant eigenvalue non-simple.
    pub tie_tol: T,
}

impl<T: Real> Default for PowerOptions<T> {
    fn default() -> Self {
        Self { tol: T::tol(1e-12), max_iter: 100_000, tie_tol: T::tol(1e-9) }
    }
}

/// Perron data of one irreducible diagonal block.
#[derive(Clone, Debug)]
pub struct Component<T> {
    pub states: Vec<usize>,
    pub log_radius: T,
    /// Right and left Perron vectors of the block, each summing to one.
    pub right: Vec<T>,
    pub left: Vec<T>,
    /// `u_i v_i / (u·v)`, formed before the vectors are unbalanced so it
    /// survives when `u` and `v` separately under- or overflow.
    pub weights: Vec<T>,
}

impl<T: Real> Component<T> {
    /// The block's own equilibrium measure spread over a phase space of
    /// size `n`.
    pub fn equilibrium(&self, n: usize) -> Vec<T> {
        let mut w = vec![T::zero(); n];
        for (&x, &p) in self.states.iter().zip(&self.weights) {
            w[x] = p;
        }
        w
    }
}

/// Perron data of a nonnegative square matrix.
#[derive(Clone, Debug)]
pub struct PerronData<T: Real> {
    /// Log of the spectral radius; `-inf` iff the matrix is nilpotent.
    pub log_radius: ExtReal<T>,
    /// Every non-trivial irreducible block (at least one internal edge).
    pub components: Vec<Component<T>>,
    /// Index into `components` of the first block attaining the radius.
    pub dominant: Option<usize>,
    pub simple: bool,
    /// Full right/left eigenvectors for the radius, each summing to one.
    /// All zeros when nilpotent; supported on the dominant block only when
    /// the radius is not simple or the extension leaves the float range.
    pub right: Vec<T>,
    pub left: Vec<T>,
}

impl<T: Real> PerronData<T> {
    /// Components whose log-radius lies within `gap` of the maximum.
    pub fn near_dominant(&self, gap: T) -> Vec<&Component<T>> {
        match self.log_radius {
            ExtReal::NegInf => Vec::new(),
            ExtReal::Finite(top) => self.components.iter().filter(|c| c.log_radius >= top - gap).collect(),
        }
    }
}

type Edge<T> = (usize, usize, T);

/// Log-radius, right and left vectors, equilibrium weights.
type BlockPerron<T> = (T, Vec<T>, Vec<T>, Vec<T>);

/// Maximum cycle mean of a strongly connected weighted digraph (Karp).
fn max_cycle_mean<T: Real>(k: usize, edges: &[Edge<T>]) -> T {
    // walk[m][v]: max weight of an m-edge walk from node 0 to v
    let mut walk = vec![vec![None::<T>; k]; k + 1];
    walk[0][0] = Some(T::zero());
    for m in 1..=k {
        for &(i, j, w) in edges {
            if let Some(d) = walk[m - 1][i] {
                let cand = d + w;
                if walk[m][j].is_none_or(|cur| cand > cur) {
                    walk[m][j] = Some(cand);
                }
            }
        }
    }
    let mut best = T::neg_infinity();
    for v in 0..k {
        let Some(dk) = walk[k][v] else { continue };
        let mut worst = T::infinity();
        for (m, row) in walk.iter().enumerate().take(k) {
            if let Some(dm) = row[v] {
                worst = worst.min((dk - dm) / T::lit((k - m) as f64));
            }
        }
        best = best.max(worst);
    }
    best
}

/// Perron root and vectors of an irreducible block given by log-weights.
///
/// The block is first balanced by a diagonal similarity built from its
/// maximum cycle mean and longest-path potentials, so every scaled entry is
/// at most one and the critical cycle entries equal one. This keeps blocks
/// whose raw entries span far more than the float exponent range exact.
fn block_perron<T: Real>(k: usize, edges: &[Edge<T>], opts: &PowerOptions<T>) -> Result<BlockPerron<T>> {
    if k == 1 {
        let w = edges.iter().map(|e| e.2).fold(T::neg_infinity(), T::max);
        return Ok((w, vec![T::one()], vec![T::one()], vec![T::one()]));
    }
    let mean = max_cycle_mean(k, edges);
    let mut pot = vec![T::neg_infinity(); k];
    pot[0] = T::zero();
    for _ in 0..k {
        let mut changed = false;
        for &(i, j, w) in edges {
            let cand = pot[i] + w - mean;
            if cand > pot[j] {
                pot[j] = cand;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let scaled: Vec<Edge<T>> = edges.iter().map(|&(i, j, w)| (i, j, (w - mean + pot[i] - pot[j]).exp())).collect();
    let (rho, right) = power_iterate(k, &scaled, opts)?;
    let transposed: Vec<Edge<T>> = scaled.iter().map(|&(i, j, a)| (j, i, a)).collect();
    let (_, left) = power_iterate(k, &transposed, opts)?;
    let mut weights: Vec<T> = left.iter().zip(&right).map(|(&u, &v)| u * v).collect();
    normalize(&mut weights);

    // undo the similarity: v = e^{-pot} v', u = e^{pot} u'
    let unscale = |vec: Vec<T>, sign: T| {
        let logs: Vec<T> = vec.iter().zip(&pot).map(|(&x, &p)| x.ln() + sign * p).collect();
        let top = logs.iter().copied().fold(T::neg_infinity(), T::max);
        let mut out: Vec<T> = logs.iter().map(|&l| (l - top).exp()).collect();
        normalize(&mut out);
        out
    };
    Ok((mean + rho.ln(), unscale(right, -T::one()), unscale(left, T::one()), weights))
}

/// Shifted power iteration on an irreducible nonnegative block.
fn power_iterate<T: Real>(k: usize, edges: &[Edge<T>], opts: &PowerOptions<T>) -> Result<(T, Vec<T>)> {
    let total: T = edges.iter().map(|e| e.2).sum();
    let shift = total / T::lit(k as f64);
    let apply = |v: &[T]| {
        let mut out = vec![T::zero(); k];
        for &(i, j, a) in edges {
            out[i] = out[i] + a * v[j];
        }
        out
    };

    let mut v = vec![T::one() / T::lit(k as f64); k];
    let mut spread = T::infinity();
    for _ in 0..opts.max_iter {
        let bv = apply(&v);
        let w: Vec<T> = bv.iter().zip(&v).map(|(&b, &x)| b + shift * x).collect();
        let (mut lo, mut hi) = (T::infinity(), T::zero());
        for (&wi, &vi) in w.iter().zip(&v) {
            let q = wi / vi;
            lo = lo.min(q);
            hi = hi.max(q);
        }
        let s: T = w.iter().copied().sum();
        let next: Vec<T> = w.iter().map(|&x| x / s).collect();
        spread = (hi - lo) / hi;
        if spread <= opts.tol {
            let r: T = apply(&next).into_iter().sum::<T>() / next.iter().copied().sum::<T>();
            return Ok((r, next));
        }
        v = next;
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        spread: spread.to_f64_lossy(),
        last_iterate: v.iter().map(|x| x.to_f64_lossy()).collect(),
    })
}

fn normalize<T: Real>(v: &mut [T]) {
    let s: T = v.iter().copied().sum();
    if s > T::zero() {
        for x in v.iter_mut() {
            *x = *x / s;
        }
    }
}

/// Perron root and vectors of a nonnegative square matrix.
pub fn perron<T: Real>(b: &Matrix<T>, opts: &PowerOptions<T>) -> Result<PerronData<T>> {
    if !b.is_square() {
        return Err(Error::Dimension("perron: matrix is not square".into()));
    }
    if !b.is_nonnegative() || !b.all_finite() {
        return Err(Error::Domain("perron: matrix must be finite and nonnegative".into()));
    }
    let n = b.nrows();
    perron_log(&Matrix::from_fn(n, n, |i, j| ExtReal::ln(b[(i, j)])), opts)
}

/// Perron data of the matrix with entries `exp(log_entries)`.
pub fn perron_log<T: Real>(log_entries: &Matrix<ExtReal<T>>, opts: &PowerOptions<T>) -> Result<PerronData<T>> {
    let n = log_entries.nrows();
    let graph: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| log_entries[(i, j)].is_finite()).collect()).collect();
    let mut components = Vec::new();
    for states in strongly_connected_components(&graph) {
        let mut local = vec![usize::MAX; n];
        for (k, &x) in states.iter().enumerate() {
            local[x] = k;
        }
        let edges: Vec<Edge<T>> = states
            .iter()
            .flat_map(|&x| graph[x].iter().map(move |&y| (x, y)))
            .filter(|&(_, y)| local[y] != usize::MAX)
            .map(|(x, y)| (local[x], local[y], log_entries[(x, y)].to_float()))
            .collect();
        if edges.is_empty() {
            continue;
        }
        let (log_radius, right, left, weights) = block_perron(states.len(), &edges, opts)?;
        components.push(Component { states, log_radius, right, left, weights });
    }

    let Some((dom, top)) = components.iter().enumerate().fold(None, |best: Option<(usize, T)>, (i, c)| match best {
        Some((_, r)) if r >= c.log_radius => best,
        _ => Some((i, c.log_radius)),
    }) else {
        return Ok(PerronData {
            log_radius: ExtReal::NegInf,
            components,
            dominant: None,
            simple: false,
            right: vec![T::zero(); n],
            left: vec![T::zero(); n],
        });
    };
    let ties = count_ties(&components, top, opts.tie_tol);
    let simple = ties == 1;

    let dom_states = components[dom].states.clone();
    let mut right = vec![T::zero(); n];
    let mut left = vec![T::zero(); n];
    for (k, &x) in dom_states.iter().enumerate() {
        right[x] = components[dom].right[k];
        left[x] = components[dom].left[k];
    }
    if simple {
        // entries relative to the radius, so the dominant block has radius one
        let b = Matrix::from_fn(n, n, |i, j| (log_entries[(i, j)] - top).exp());
        let mut in_dom = vec![false; n];
        for &x in &dom_states {
            in_dom[x] = true;
        }
        // right vector lives on states that reach the dominant block
        let reach = reachable(&reverse_graph(&graph), &dom_states);
        let upstream: Vec<usize> = (0..n).filter(|&x| reach[x] && !in_dom[x]).collect();
        if !upstream.is_empty() {
            let sys = Matrix::from_fn(upstream.len(), upstream.len(), |i, j| {
                let d = if i == j { T::one() } else { T::zero() };
                d - b[(upstream[i], upstream[j])]
            });
            let rhs: Vec<T> =
                upstream.iter().map(|&x| dom_states.iter().map(|&y| b[(x, y)] * right[y]).sum()).collect();
            if let Some(sol) = sys.solve(&rhs).ok().filter(|v| v.iter().all(|x| x.is_finite())) {
                for (&x, v) in upstream.iter().zip(sol) {
                    right[x] = v.max(T::zero());
                }
            }
        }
        // left vector lives on states reachable from the dominant block
        let reach = reachable(&graph, &dom_states);
        let downstream: Vec<usize> = (0..n).filter(|&x| reach[x] && !in_dom[x]).collect();
        if !downstream.is_empty() {
            let sys = Matrix::from_fn(downstream.len(), downstream.len(), |i, j| {
                let d = if i == j { T::one() } else { T::zero() };
                d - b[(downstream[j], downstream[i])]
            });
            let rhs: Vec<T> =
                downstream.iter().map(|&y| dom_states.iter().map(|&x| left[x] * b[(x, y)]).sum()).collect();
            if let Some(sol) = sys.solve(&rhs).ok().filter(|v| v.iter().all(|x| x.is_finite())) {
                for (&y, u) in downstream.iter().zip(sol) {
                    left[y] = u.max(T::zero());
                }
            }
        }
    }
    normalize(&mut right);
    normalize(&mut left);
    Ok(PerronData { log_radius: ExtReal::Finite(top), components, dominant: Some(dom), simple, right, left })
}

fn count_ties<T: Real>(components: &[Component<T>], top: T, tie_tol: T) -> usize {
    // relative tie on the radius is an absolute one on its log
    components.iter().filter(|c| c.log_radius >= top - tie_tol).count()
}

/// Value of the spectral potential together with Perron data of `A_φ`.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralResult<T: Real + Serialize> {
    pub lambda: ExtReal<T>,
    /// `r(A_φ) = exp(λ)`; may overflow to infinity for huge potentials.
    pub dominant_eigenvalue: T,
    pub right_vector: Vec<T>,
    pub left_vector: Vec<T>,
    pub simple: bool,
    /// `(1/n) ln ‖A_φ^n 1‖_∞` at the verification depth; never below `λ`.
    pub gelfand_bound: ExtReal<T>,
    #[serde(skip)]
    pub(crate) perron: PerronData<T>,
}

impl<T: Real + Serialize> SpectralResult<T> {
    pub fn perron(&self) -> &PerronData<T> {
        &self.perron
    }
}

const GELFAND_CHECK_DEPTH: usize = 16;

/// Spectral potential for an extended-real weight `log w`, i.e. the
/// log-radius of `A · diag(w)` where `w` may vanish.
pub fn spectral_potential_ext<T: Real + Serialize>(
    a: &Matrix<T>,
    log_w: &[ExtReal<T>],
    opts: &PowerOptions<T>,
) -> Result<SpectralResult<T>> {
    if !a.is_square() || a.ncols() != log_w.len() {
        return Err(Error::Dimension(format!(
            "potential of length {} for a {}x{} operator",
            log_w.len(),
            a.nrows(),
            a.ncols()
        )));
    }
    if !a.is_nonnegative() || !a.all_finite() {
        return Err(Error::Domain("operator entries must be finite and nonnegative".into()));
    }
    let n = a.nrows();
    let logs = Matrix::from_fn(n, n, |i, j| ExtReal::ln(a[(i, j)]) + log_w[j]);
    let p = perron_log(&logs, opts)?;
    let lambda = p.log_radius;

    let mut gelfand_bound = ExtReal::NegInf;
    if let ExtReal::Finite(l) = lambda {
        // ‖B^n‖ >= r(B)^n, so every Gelfand term bounds the radius above
        gelfand_bound = gelfand_log(&logs, GELFAND_CHECK_DEPTH).last().copied().unwrap_or(ExtReal::NegInf);
        let slack = T::tol(1e-9) * T::one().max(l.abs());
        if gelfand_bound.value().is_none_or(|g| g < l - slack) {
            return Err(Error::Inconsistent(format!(
                "power iteration log-radius {l} exceeds the Gelfand bound {gelfand_bound:?}"
            )));
        }
    }
    Ok(SpectralResult {
        lambda,
        dominant_eigenvalue: lambda.exp(),
        right_vector: p.right.clone(),
        left_vector: p.left.clone(),
        simple: p.simple,
        gelfand_bound,
        perron: p,
    })
}

/// `λ(φ) = ln r(A · diag(e^φ))`.
pub fn spectral_potential<T: Real + Serialize>(
    a: &TransferMatrix<T>,
    phi: &Potential<T>,
) -> Result<SpectralResult<T>> {
    spectral_potential_with(a, phi, &PowerOptions::default())
}

pub fn spectral_potential_with<T: Real + Serialize>(
    a: &TransferMatrix<T>,
    phi: &Potential<T>,
    opts: &PowerOptions<T>,
) -> Result<SpectralResult<T>> {
    let log_w: Vec<ExtReal<T>> = phi.values().iter().map(|&v| ExtReal::Finite(v)).collect();
    spectral_potential_ext(a.entries(), &log_w, opts)
}

/// Shorthand for the value of the spectral potential.
pub fn lambda<T: Real + Serialize>(a: &TransferMatrix<T>, phi: &Potential<T>) -> Result<ExtReal<T>> {
    spectral_potential(a, phi).map(|r| r.lambda)
}

/// `S_n φ = φ + φ∘α + … + φ∘α^{n-1}`.
pub fn birkhoff_sum<T: Real>(system: &FiniteMapSystem, phi: &Potential<T>, n: usize) -> Result<Potential<T>> {
    if n == 0 {
        return Err(Error::Domain("birkhoff_sum needs n >= 1".into()));
    }
    if phi.len() != system.n_states() {
        return Err(Error::Dimension("potential and system sizes differ".into()));
    }
    let values = (0..system.n_states())
        .map(|x| {
            let mut y = x;
            let mut s = T::zero();
            for _ in 0..n {
                s = s + phi.values()[y];
                y = system.apply(y);
            }
            s
        })
        .collect();
    Ok(Potential { values })
}

/// `(1/n) ln ‖B^n 1‖_∞` for `n = 1..=n_max` where `B = exp(logs)`,
/// carried out on logarithms so no entry can over- or underflow.
fn gelfand_log<T: Real>(logs: &Matrix<ExtReal<T>>, n_max: usize) -> Vec<ExtReal<T>> {
    let k = logs.nrows();
    let mut v = vec![ExtReal::Finite(T::zero()); k];
    let mut log_acc = T::zero();
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let w: Vec<ExtReal<T>> = (0..k)
            .map(|i| {
                let terms: Vec<T> = (0..k).filter_map(|j| (logs[(i, j)] + v[j]).value()).collect();
                let top = terms.iter().copied().fold(T::neg_infinity(), T::max);
                if terms.is_empty() {
                    ExtReal::NegInf
                } else {
                    ExtReal::Finite(top + terms.iter().map(|&t| (t - top).exp()).sum::<T>().ln())
                }
            })
            .collect();
        let c = w.iter().copied().fold(ExtReal::NegInf, ExtReal::max);
        let ExtReal::Finite(c) = c else {
            out.resize(n_max, ExtReal::NegInf);
            break;
        };
        log_acc = log_acc + c;
        v = w.into_iter().map(|x| x - c).collect();
        out.push(ExtReal::Finite(log_acc / T::lit(n as f64)));
    }
    out
}

/// `(1/n) ln ‖A_φ^n 1‖_∞` for `n = 1..=n_max`, renormalizing each step.
pub fn gelfand_sequence<T: Real>(
    a: &TransferMatrix<T>,
    phi: &Potential<T>,
    n_max: usize,
) -> Result<Vec<ExtReal<T>>> {
    if n_max == 0 {
        return Err(Error::Domain("gelfand_sequence needs n_max >= 1".into()));
    }
    if phi.len() != a.n_states() {
        return Err(Error::Dimension("potential and operator sizes differ".into()));
    }
    let e = a.entries();
    let logs = Matrix::from_fn(e.nrows(), e.ncols(), |i, j| ExtReal::ln(e[(i, j)]) + phi.values()[j]);
    Ok(gelfand_log(&logs, n_max))
}

/// The equilibrium measure `μ_y = u_y v_y / (u·v)` of `φ`, which is the
/// gradient of `λ` at `φ`. Refuses when the dominant eigenvalue is not
/// simple, since the subdifferential is then not a single point.
pub fn equilibrium_measure<T: Real + Serialize>(a: &TransferMatrix<T>, phi: &Potential<T>) -> Result<Measure<T>> {
    let res = spectral_potential(a, phi)?;
    equilibrium_from(&res)
}

pub(crate) fn equilibrium_from<T: Real + Serialize>(res: &SpectralResult<T>) -> Result<Measure<T>> {
    if res.lambda.is_neg_inf() {
        return Err(Error::Nilpotent);
    }
    if !res.simple {
        let top = res.lambda.to_float();
        let ties = count_ties(&res.perron.components, top, PowerOptions::<T>::default().tie_tol);
        return Err(Error::NonUniqueEquilibrium { components: ties });
    }
    let dom = res.perron.dominant.expect("finite radius has a dominant block");
    Measure::normalized(res.perron.components[dom].equilibrium(res.right_vector.len()))
}

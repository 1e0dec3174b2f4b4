//! Finite dynamical systems, shift graphs, transfer matrices and the
//! invariant-measure polytope.
//!
//! The phase space is always `{0, .., n-1}` and continuous functions on it
//! are plain vectors. A transfer matrix acts on functions by
//! `(A f)(x) = Σ_y A[x][y] f(y)`. For a map `α` the homological identity
//! `A((f∘α)·g) = f·(A g)` holds exactly when `A[x][y] > 0` implies
//! `α(y) = x`, which is the representation used throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{strongly_connected_components, Matrix};
use crate::scalar::Real;

/// Tolerance on `Σ μ = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Tolerance on `α_* μ = μ`.
pub const INVARIANCE_TOL: f64 = 1e-10;

/// A self-map `α` of `{0, .., n-1}`; `map[y]` is the image of `y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteMapSystem {
    map: Vec<usize>,
}

impl FiniteMapSystem {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        if n == 0 {
            return Err(Error::Invalid { what: "map", reason: "empty phase space".into() });
        }
        if let Some((y, &x)) = map.iter().enumerate().find(|(_, &x)| x >= n) {
            return Err(Error::Invalid {
                what: "map",
                reason: format!("image of state {y} is {x}, outside [0, {n})"),
            });
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    pub fn n_states(&self) -> usize {
        self.map.len()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn apply(&self, y: usize) -> usize {
        self.map[y]
    }

    pub fn iterate(&self, mut y: usize, k: usize) -> usize {
        for _ in 0..k {
            y = self.map[y];
        }
        y
    }

    /// `f ∘ α`
    pub fn compose<T: Copy>(&self, f: &[T]) -> Vec<T> {
        self.map.iter().map(|&x| f[x]).collect()
    }

    /// Pushforward `α_* μ` of a weight vector.
    pub fn pushforward<T: Real>(&self, w: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_states()];
        for (y, &x) in self.map.iter().enumerate() {
            out[x] = out[x] + w[y];
        }
        out
    }

    pub fn is_invertible(&self) -> bool {
        let mut hit = vec![false; self.n_states()];
        for &x in &self.map {
            if hit[x] {
                return false;
            }
            hit[x] = true;
        }
        true
    }

    /// Number of steps each state needs to land on a periodic point.
    pub fn transient_depth(&self) -> Vec<usize> {
        let dec = cycle_decomposition(self);
        let mut periodic = vec![false; self.n_states()];
        for c in &dec.cycles {
            for &x in c {
                periodic[x] = true;
            }
        }
        (0..self.n_states())
            .map(|mut y| {
                let mut k = 0;
                while !periodic[y] {
                    y = self.map[y];
                    k += 1;
                }
                k
            })
            .collect()
    }
}

/// One-step topological Markov chain on `n_symbols` symbols. Edge `i -> j`
/// means symbol `j` may follow symbol `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovShiftSystem<T> {
    adjacency: Vec<Vec<bool>>,
    branch_weights: Option<Matrix<T>>,
    stochastic_on_fibers: bool,
}

impl<T: Real> MarkovShiftSystem<T> {
    pub fn new(adjacency: Vec<Vec<bool>>) -> Result<Self> {
        let n = adjacency.len();
        if n == 0 || adjacency.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid {
                what: "adjacency",
                reason: "must be a non-empty square matrix".into(),
            });
        }
        Ok(Self { adjacency, branch_weights: None, stochastic_on_fibers: false })
    }

    /// Builds a shift from a 0/1 matrix.
    pub fn from_01(adjacency: &[Vec<u8>]) -> Result<Self> {
        if let Some(bad) = adjacency.iter().flatten().find(|&&a| a > 1) {
            return Err(Error::Invalid {
                what: "adjacency",
                reason: format!("entries must be 0 or 1, found {bad}"),
            });
        }
        Self::new(adjacency.iter().map(|r| r.iter().map(|&a| a == 1).collect()).collect())
    }

    /// Attaches branch weights `ρ`, positive only on edges. When
    /// `stochastic_on_fibers` is set, every column must sum to one over
    /// its incoming edges (the weights over the preimages of each point sum
    /// to one).
    pub fn with_branch_weights(mut self, rho: Matrix<T>, stochastic_on_fibers: bool) -> Result<Self> {
        let n = self.n_symbols();
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::Dimension(format!("rho is {}x{}, expected {n}x{n}", rho.nrows(), rho.ncols())));
        }
        for i in 0..n {
            for j in 0..n {
                let r = rho[(i, j)];
                if !(r >= T::zero()) || !r.is_finite() {
                    return Err(Error::Invalid { what: "rho", reason: format!("entry ({i},{j}) = {r} is not a nonnegative number") });
                }
                if r > T::zero() && !self.adjacency[i][j] {
                    return Err(Error::Invalid { what: "rho", reason: format!("entry ({i},{j}) is positive off the adjacency support") });
                }
            }
        }
        if stochastic_on_fibers {
            let tol = T::tol(NORMALIZATION_TOL) * T::lit(n as f64);
            for j in 0..n {
                let s: T = (0..n).filter(|&i| self.adjacency[i][j]).map(|i| rho[(i, j)]).sum();
                if (s - T::one()).abs() > tol {
                    return Err(Error::Invalid {
                        what: "rho",
                        reason: format!("weights over the preimages of symbol {j} sum to {s}, not 1"),
                    });
                }
            }
        }
        self.branch_weights = Some(rho);
        self.stochastic_on_fibers = stochastic_on_fibers;
        Ok(self)
    }

    pub fn n_symbols(&self) -> usize {
        self.adjacency.len()
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n_symbols();
        (0..n).flat_map(move |i| (0..n).filter(move |&j| self.adjacency[i][j]).map(move |j| (i, j)))
    }

    pub fn branch_weights(&self) -> Option<&Matrix<T>> {
        self.branch_weights.as_ref()
    }

    pub fn stochastic_on_fibers(&self) -> bool {
        self.stochastic_on_fibers
    }

    pub fn adjacency_matrix(&self) -> Matrix<T> {
        let n = self.n_symbols();
        Matrix::from_fn(n, n, |i, j| if self.adjacency[i][j] { T::one() } else { T::zero() })
    }

    pub fn is_irreducible(&self) -> bool {
        let adj: Vec<Vec<usize>> = (0..self.n_symbols())
            .map(|i| (0..self.n_symbols()).filter(|&j| self.adjacency[i][j]).collect())
            .collect();
        let comps = strongly_connected_components(&adj);
        comps.len() == 1 && self.edges().next().is_some()
    }
}

/// Nonnegative matrix of a transfer operator over a finite map.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix<T> {
    system: FiniteMapSystem,
    entries: Matrix<T>,
}

impl<T: Real> TransferMatrix<T> {
    /// Validates shape, nonnegativity and the support constraint.
    pub fn new(system: FiniteMapSystem, entries: Matrix<T>) -> Result<Self> {
        let a = Self::unchecked(system, entries)?;
        if let Some((x, y)) = a.support_violation() {
            return Err(Error::Invalid {
                what: "transfer matrix",
                reason: format!("A[{x}][{y}] > 0 but α({y}) = {} ≠ {x}", a.system.apply(y)),
            });
        }
        Ok(a)
    }

    /// Validates shape and nonnegativity only; the homological identity
    /// can then be tested with [`check_homological_identity`].
    pub fn unchecked(system: FiniteMapSystem, entries: Matrix<T>) -> Result<Self> {
        let n = system.n_states();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::Dimension(format!(
                "transfer matrix is {}x{}, system has {n} states",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if !entries.all_finite() || !entries.is_nonnegative() {
            return Err(Error::Domain("transfer matrix entries must be finite and nonnegative".into()));
        }
        Ok(Self { system, entries })
    }

    pub fn system(&self) -> &FiniteMapSystem {
        &self.system
    }

    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn n_states(&self) -> usize {
        self.system.n_states()
    }

    pub fn apply(&self, f: &[T]) -> Vec<T> {
        self.entries.mul_vec(f)
    }

    fn support_violation(&self) -> Option<(usize, usize)> {
        let n = self.n_states();
        (0..n)
            .flat_map(|x| (0..n).map(move |y| (x, y)))
            .find(|&(x, y)| self.entries[(x, y)] > T::zero() && self.system.apply(y) != x)
    }

    /// Weight `ψ(y) = A[α(y)][y]` of the Perron–Frobenius form.
    pub fn weights(&self) -> Vec<T> {
        (0..self.n_states()).map(|y| self.entries[(self.system.apply(y), y)]).collect()
    }

    pub fn is_nilpotent(&self) -> bool {
        let (p, _) = self.entries.scaled_power(self.n_states());
        let zero = p.iter().all(|&x| x == T::zero());
        zero
    }
}

/// `A[x][y] = ψ(y)` if `α(y) = x`, else `0`.
pub fn build_pf_operator<T: Real>(system: &FiniteMapSystem, psi: &[T]) -> Result<TransferMatrix<T>> {
    let n = system.n_states();
    if psi.len() != n {
        return Err(Error::Dimension(format!("psi has length {}, system has {n} states", psi.len())));
    }
    if let Some((y, &w)) = psi.iter().enumerate().find(|(_, w)| !(**w >= T::zero()) || !w.is_finite()) {
        return Err(Error::Domain(format!("psi[{y}] = {w} is not a nonnegative number")));
    }
    let mut a = Matrix::zeros(n, n);
    for (y, &w) in psi.iter().enumerate() {
        a[(system.apply(y), y)] = w;
    }
    Ok(TransferMatrix { system: system.clone(), entries: a })
}

/// Brute-force check of `A((f∘α)·g) = f·(A g)` over all indicator pairs
/// `f = e_z`, `g = e_y`.
pub fn check_homological_identity<T: Real>(a: &TransferMatrix<T>) -> bool {
    let n = a.n_states();
    let alpha = a.system();
    let tol = T::tol(1e-14) * a.entries().max_abs().max(T::one());
    let mut g = vec![T::zero(); n];
    for y in 0..n {
        g[y] = T::one();
        let ag = a.apply(&g);
        for z in 0..n {
            let mut f = vec![T::zero(); n];
            f[z] = T::one();
            let fa = alpha.compose(&f);
            let lhs = a.apply(&fa.iter().zip(&g).map(|(&u, &v)| u * v).collect::<Vec<_>>());
            let ok = lhs.iter().zip(&f).zip(&ag).all(|((&l, &fx), &agx)| (l - fx * agx).abs() <= tol);
            if !ok {
                return false;
            }
        }
        g[y] = T::zero();
    }
    true
}

/// Probability vector on the phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
pub struct Measure<T: Real> {
    weights: Vec<T>,
}

impl<T: Real> TryFrom<Vec<T>> for Measure<T> {
    type Error = Error;
    fn try_from(w: Vec<T>) -> Result<Self> {
        Measure::new(w)
    }
}

impl<T: Real> From<Measure<T>> for Vec<T> {
    fn from(m: Measure<T>) -> Vec<T> {
        m.weights
    }
}

impl<T: Real> Measure<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Invalid { what: "measure", reason: "empty weight vector".into() });
        }
        if let Some((i, &w)) = weights.iter().enumerate().find(|(_, w)| !(**w >= T::zero()) || !w.is_finite()) {
            return Err(Error::Invalid { what: "measure", reason: format!("weight {i} = {w} is not a nonnegative number") });
        }
        let s: T = weights.iter().copied().sum();
        if (s - T::one()).abs() > T::tol(NORMALIZATION_TOL) {
            return Err(Error::Invalid { what: "measure", reason: format!("weights sum to {s}, not 1") });
        }
        Ok(Self { weights })
    }

    /// Rescales a nonnegative, nonzero vector to total mass one.
    pub fn normalized(weights: Vec<T>) -> Result<Self> {
        let s: T = weights.iter().copied().sum();
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::Invalid { what: "measure", reason: "cannot normalize a null vector".into() });
        }
        Self::new(weights.into_iter().map(|w| w / s).collect())
    }

    pub fn dirac(n: usize, x: usize) -> Self {
        let mut w = vec![T::zero(); n];
        w[x] = T::one();
        Self { weights: w }
    }

    pub fn uniform_on(n: usize, support: &[usize]) -> Self {
        let mut w = vec![T::zero(); n];
        let c = T::one() / T::lit(support.len() as f64);
        for &x in support {
            w[x] = c;
        }
        Self { weights: w }
    }

    /// Convex combination `Σ c_k μ_k`; the coefficients must form a
    /// probability vector.
    pub fn mix(coeffs: &[T], parts: &[&Measure<T>]) -> Result<Self> {
        if coeffs.len() != parts.len() || parts.is_empty() {
            return Err(Error::Dimension("mix: coefficient/measure count mismatch".into()));
        }
        let n = parts[0].len();
        if parts.iter().any(|m| m.len() != n) {
            return Err(Error::Dimension("mix: measures on different spaces".into()));
        }
        let mut w = vec![T::zero(); n];
        for (&c, m) in coeffs.iter().zip(parts) {
            for (o, &x) in w.iter_mut().zip(m.weights()) {
                *o = *o + c * x;
            }
        }
        Self::new(w)
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `μ(f) = Σ μ_x f(x)`
    pub fn integrate(&self, f: &[T]) -> T {
        self.weights.iter().zip(f).map(|(&w, &v)| w * v).sum()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&x| self.weights[x] > T::zero()).collect()
    }

    /// Total variation distance `½ Σ |μ_x - ν_x|`.
    pub fn tv_distance(&self, other: &Measure<T>) -> T {
        tv_distance(&self.weights, &other.weights)
    }
}

pub(crate) fn tv_distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum::<T>() * T::lit(0.5)
}

/// A measure together with the outcome of its invariance check.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantMeasure<T: Real> {
    measure: Measure<T>,
    certified: bool,
}

impl<T: Real> InvariantMeasure<T> {
    /// Checks `α_* μ = μ` and fails if it does not hold.
    pub fn certify(measure: Measure<T>, system: &FiniteMapSystem) -> Result<Self> {
        if measure.len() != system.n_states() {
            return Err(Error::Dimension("measure and system sizes differ".into()));
        }
        if !is_invariant(&measure, system) {
            return Err(Error::Invalid { what: "invariant measure", reason: "pushforward differs from the measure".into() });
        }
        Ok(Self { measure, certified: true })
    }

    /// Wraps a measure without checking invariance.
    pub fn uncertified(measure: Measure<T>) -> Self {
        Self { measure, certified: false }
    }

    pub fn measure(&self) -> &Measure<T> {
        &self.measure
    }

    pub fn certified(&self) -> bool {
        self.certified
    }

    pub fn into_measure(self) -> Measure<T> {
        self.measure
    }
}

impl<T: Real> std::ops::Deref for InvariantMeasure<T> {
    type Target = Measure<T>;
    fn deref(&self) -> &Measure<T> {
        &self.measure
    }
}

/// Periodic orbits of a map and the states that are not periodic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleDecomposition {
    /// Each cycle starts at its smallest member and lists the orbit in
    /// order, so `α(c[i]) = c[i + 1]` cyclically.
    pub cycles: Vec<Vec<usize>>,
    pub transient: Vec<usize>,
}

impl CycleDecomposition {
    pub fn cycle_of_state(&self, x: usize) -> Option<usize> {
        self.cycles.iter().position(|c| c.contains(&x))
    }

    pub fn max_period(&self) -> usize {
        self.cycles.iter().map(Vec::len).max().unwrap_or(0)
    }
}

pub fn cycle_decomposition(system: &FiniteMapSystem) -> CycleDecomposition {
    let n = system.n_states();
    // 0 = unseen, 1 = on current path, 2 = done
    let mut state = vec![0u8; n];
    let mut periodic = vec![false; n];
    let mut cycles = Vec::new();
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut y = start;
        while state[y] == 0 {
            state[y] = 1;
            path.push(y);
            y = system.apply(y);
        }
        if state[y] == 1 {
            // closed a new cycle at y
            let pos = path.iter().position(|&p| p == y).unwrap();
            let mut cyc: Vec<usize> = path[pos..].to_vec();
            let k = cyc.iter().enumerate().min_by_key(|(_, &v)| v).map(|(i, _)| i).unwrap();
            cyc.rotate_left(k);
            for &c in &cyc {
                periodic[c] = true;
            }
            cycles.push(cyc);
        }
        for p in path {
            state[p] = 2;
        }
    }
    cycles.sort_by_key(|c| c[0]);
    let transient = (0..n).filter(|&x| !periodic[x]).collect();
    CycleDecomposition { cycles, transient }
}

/// Uniform measure on each periodic orbit; these are the extreme points of
/// the invariant-measure polytope.
pub fn ergodic_measures<T: Real>(system: &FiniteMapSystem) -> Vec<InvariantMeasure<T>> {
    let n = system.n_states();
    cycle_decomposition(system)
        .cycles
        .iter()
        .map(|c| InvariantMeasure { measure: Measure::uniform_on(n, c), certified: true })
        .collect()
}

pub fn is_invariant<T: Real>(mu: &Measure<T>, system: &FiniteMapSystem) -> bool {
    if mu.len() != system.n_states() {
        return false;
    }
    let push = system.pushforward(mu.weights());
    let tol = T::tol(INVARIANCE_TOL);
    push.iter().zip(mu.weights()).all(|(&a, &b)| (a - b).abs() <= tol)
}

/// Coordinates of an invariant measure in the basis of cycle measures:
/// the mass it puts on each cycle.
pub fn hull_coordinates<T: Real>(mu: &Measure<T>, dec: &CycleDecomposition) -> Vec<T> {
    dec.cycles.iter().map(|c| c.iter().map(|&x| mu.weights()[x]).sum()).collect()
}

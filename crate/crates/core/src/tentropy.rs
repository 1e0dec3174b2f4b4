//! t-entropy computed from its definition:
//!
//! ```text
//! τ(μ)      = inf_n τ_n(μ) / n
//! τ_n(μ)    = inf_D τ_n(μ, D)
//! τ_n(μ, D) = sup_m Σ_{g ∈ D} μ(g) ln( m(A^n g) / μ(g) )
//! ```
//!
//! with `D` ranging over partitions of unity and `m` over probability
//! measures. On a finite space the infimum over `D` is attained at the point
//! partition `{e_0, .., e_{k-1}}`: for any `D` and `m` the log-sum
//! inequality gives `Σ_x μ_x ln((Aᵀⁿm)_x/μ_x) <= Σ_g μ(g) ln(m(A^n g)/μ(g))`.
//! The inner supremum is a concave maximization over the simplex, solved by
//! the multiplicative fixed point of its stationarity condition.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{ExtReal, Real};
use crate::systems::{is_invariant, Measure, TransferMatrix, NORMALIZATION_TOL};

/// A finite family of nonnegative functions summing to one pointwise.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionOfUnity<T> {
    functions: Vec<Vec<T>>,
}

impl<T: Real> PartitionOfUnity<T> {
    pub fn new(functions: Vec<Vec<T>>) -> Result<Self> {
        let Some(n) = functions.first().map(Vec::len) else {
            return Err(Error::Invalid { what: "partition of unity", reason: "no functions".into() });
        };
        if functions.iter().any(|g| g.len() != n) {
            return Err(Error::Dimension("partition functions have different lengths".into()));
        }
        if functions.iter().flatten().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(Error::Invalid { what: "partition of unity", reason: "negative or non-finite value".into() });
        }
        let tol = T::tol(NORMALIZATION_TOL);
        for x in 0..n {
            let s: T = functions.iter().map(|g| g[x]).sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::Invalid {
                    what: "partition of unity",
                    reason: format!("functions sum to {s} at state {x}"),
                });
            }
        }
        Ok(Self { functions })
    }

    /// Indicators of the single states.
    pub fn point(n: usize) -> Self {
        let functions = (0..n)
            .map(|x| (0..n).map(|y| if x == y { T::one() } else { T::zero() }).collect())
            .collect();
        Self { functions }
    }

    /// The one-element partition `{1}`.
    pub fn trivial(n: usize) -> Self {
        Self { functions: vec![vec![T::one(); n]] }
    }

    pub fn functions(&self) -> &[Vec<T>] {
        &self.functions
    }

    pub fn n_states(&self) -> usize {
        self.functions[0].len()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct InnerOptions<T> {
    /// Stop once the objective moves by less than this between sweeps.
    pub tol: T,
    pub max_iter: usize,
    /// Largest acceptable violation of the optimality condition.
    pub kkt_tol: T,
}

impl<T: Real> Default for InnerOptions<T> {
    fn default() -> Self {
        Self { tol: T::tol(1e-12), max_iter: 100_000, kkt_tol: T::tol(1e-6) }
    }
}

#[derive(Clone, Debug)]
pub struct InnerSolution<T: Real> {
    pub m: Measure<T>,
    pub value: T,
    /// Max violation of `c_x <= 1` everywhere and `c_x = 1` on `supp m`,
    /// where `c_x = Σ_y μ_y K[x][y] / (Kᵀ m)_y`.
    pub kkt_residual: T,
    /// `ln max_x c_x`; by Jensen's inequality the optimum exceeds `value`
    /// by at most this much.
    pub gap: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `F(m) = Σ_y μ_y ln((Kᵀ m)_y / μ_y)` over probability vectors
/// `m` on the rows of `kernel`. Columns are the cells the weights `μ` live
/// on (single states for the point partition).
///
/// The update `m_x <- m_x Σ_y μ_y K[x][y] / (Kᵀ m)_y` keeps `m` on the
/// simplex because `Σ_x m_x K[x][y] = (Kᵀ m)_y` and `Σ μ = 1`, and it never
/// decreases `F`.
pub fn inner_measure_opt<T: Real>(
    kernel: &Matrix<T>,
    mu: &Measure<T>,
    opts: &InnerOptions<T>,
) -> Result<InnerSolution<T>> {
    let (rows, cols) = (kernel.nrows(), kernel.ncols());
    if mu.len() != cols {
        return Err(Error::Dimension(format!("measure of length {} for {cols} kernel columns", mu.len())));
    }
    let cells: Vec<usize> = mu.support();
    for &y in &cells {
        if (0..rows).all(|x| kernel[(x, y)] == T::zero()) {
            return Err(Error::NullColumn { state: y });
        }
    }
    let w = mu.weights();

    // uniform start on rows that feed some charged cell
    let active: Vec<usize> = (0..rows).filter(|&x| cells.iter().any(|&y| kernel[(x, y)] > T::zero())).collect();
    let mut m = vec![T::zero(); rows];
    let start = T::one() / T::lit(active.len() as f64);
    for &x in &active {
        m[x] = start;
    }

    let pushed = |m: &[T]| -> Vec<T> {
        cells.iter().map(|&y| active.iter().map(|&x| m[x] * kernel[(x, y)]).sum()).collect()
    };
    let objective = |q: &[T]| -> T { cells.iter().zip(q).map(|(&y, &qy)| w[y] * (qy / w[y]).ln()).sum() };
    let gradient = |q: &[T]| -> Vec<T> {
        let mut c = vec![T::zero(); rows];
        for &x in &active {
            c[x] = cells.iter().zip(q).map(|(&y, &qy)| w[y] * kernel[(x, y)] / qy).sum();
        }
        c
    };

    let mut q = pushed(&m);
    let mut value = objective(&q);
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let c = gradient(&q);
        for &x in &active {
            m[x] = m[x] * c[x];
        }
        // re-normalize against rounding drift only
        let s: T = m.iter().copied().sum();
        for v in m.iter_mut() {
            *v = *v / s;
        }
        q = pushed(&m);
        let next = objective(&q);
        let delta = (next - value).abs();
        value = next;
        if delta < opts.tol {
            break;
        }
    }

    // EM is sublinear near faces of the simplex; finish with Newton on the
    // face it settled on and keep the result only if the certificate improves
    let gap_of = |q: &[T]| gradient(q).iter().copied().fold(T::zero(), T::max).ln().max(T::zero());
    let mut gap = gap_of(&q);
    if let Some(polished) = newton_polish(kernel, &cells, w, &active, &m) {
        let pq = pushed(&polished);
        let (pv, pg) = (objective(&pq), gap_of(&pq));
        if pv >= value && pg <= gap {
            m = polished;
            q = pq;
            value = pv;
            gap = pg;
        }
    }

    let c = gradient(&q);
    let m_max = m.iter().copied().fold(T::zero(), T::max);
    let supp_floor = m_max * T::tol(1e-9);
    let mut kkt = T::zero();
    for x in 0..rows {
        let excess = c[x] - T::one();
        kkt = kkt.max(excess);
        if m[x] > supp_floor {
            kkt = kkt.max(excess.abs());
        }
    }
    Ok(InnerSolution {
        m: Measure::normalized(m)?,
        value,
        kkt_residual: kkt,
        gap,
        iterations,
        converged: kkt <= opts.kkt_tol,
    })
}

/// Newton iterations for `F` restricted to the face `{m_x > 0}` of the
/// simplex, from the EM iterate `m0`. Coordinates driven to zero leave the
/// face. Returns `None` when the bordered system is singular.
fn newton_polish<T: Real>(kernel: &Matrix<T>, cells: &[usize], w: &[T], active: &[usize], m0: &[T]) -> Option<Vec<T>> {
    let mut m = m0.to_vec();
    let m_max = m.iter().copied().fold(T::zero(), T::max);
    let floor = m_max * T::tol(1e-8);
    let mut face: Vec<usize> = active.iter().copied().filter(|&x| m[x] > floor).collect();
    for (x, v) in m.iter_mut().enumerate() {
        if !face.contains(&x) {
            *v = T::zero();
        }
    }
    let s: T = m.iter().copied().sum();
    m.iter_mut().for_each(|v| *v = *v / s);

    let push = |m: &[T]| -> Vec<T> { cells.iter().map(|&y| active.iter().map(|&x| m[x] * kernel[(x, y)]).sum()).collect() };
    let value = |q: &[T]| -> T { cells.iter().zip(q).map(|(&y, &qy)| w[y] * qy.ln()).sum() };
    for _ in 0..50 {
        let q = push(&m);
        if q.iter().any(|&v| !(v > T::zero())) {
            return None;
        }
        let k = face.len();
        // bordered system [H 1; 1ᵀ 0] [d; ν] = [-g; 0]
        let mut sys = Matrix::zeros(k + 1, k + 1);
        let mut rhs = vec![T::zero(); k + 1];
        for (a, &xa) in face.iter().enumerate() {
            rhs[a] = -cells.iter().zip(&q).map(|(&y, &qy)| w[y] * kernel[(xa, y)] / qy).sum::<T>();
            for (b, &xb) in face.iter().enumerate() {
                sys[(a, b)] = -cells
                    .iter()
                    .zip(&q)
                    .map(|(&y, &qy)| w[y] * kernel[(xa, y)] * kernel[(xb, y)] / (qy * qy))
                    .sum::<T>();
            }
            sys[(a, k)] = T::one();
            sys[(k, a)] = T::one();
        }
        let sol = sys.solve(&rhs).ok()?;
        let d = &sol[..k];
        if d.iter().any(|v| !v.is_finite()) {
            return None;
        }
        // largest feasible step, capped at the full Newton step
        let mut t = T::one();
        let mut blocking = None;
        for (a, &x) in face.iter().enumerate() {
            if d[a] < T::zero() && m[x] + t * d[a] <= T::zero() {
                t = -m[x] / d[a];
                blocking = Some(a);
            }
        }
        let base = value(&q);
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand = m.clone();
            for (a, &x) in face.iter().enumerate() {
                cand[x] = (m[x] + t * d[a]).max(T::zero());
            }
            let cq = push(&cand);
            if cq.iter().all(|&v| v > T::zero()) && value(&cq) >= base {
                m = cand;
                accepted = true;
                break;
            }
            t = t * T::lit(0.5);
            blocking = None;
        }
        if !accepted {
            break;
        }
        if let Some(a) = blocking {
            let x = face.remove(a);
            m[x] = T::zero();
            if face.is_empty() {
                return None;
            }
        }
        let step = d.iter().fold(T::zero(), |acc, v| acc.max(v.abs())) * t;
        if step <= T::epsilon() * T::lit(4.0) {
            break;
        }
    }
    let s: T = m.iter().copied().sum();
    Some(m.into_iter().map(|v| v / s).collect())
}

/// `τ_n(μ, D)` together with the inner solver's KKT residual.
#[derive(Clone, Copy, Debug)]
pub struct TauN<T: Real> {
    pub value: ExtReal<T>,
    pub kkt_residual: T,
}

/// Solves the inner problem for `A^n` given as `exp(log_scale) * power`.
fn tau_from_power<T: Real>(
    power: &Matrix<T>,
    log_scale: T,
    mu: &Measure<T>,
    partition: Option<&PartitionOfUnity<T>>,
    opts: &InnerOptions<T>,
) -> Result<TauN<T>> {
    let n = power.nrows();
    if mu.len() != n {
        return Err(Error::Dimension("measure and operator sizes differ".into()));
    }
    let (kernel, cell_weights) = match partition {
        None => (power.clone(), mu.clone()),
        Some(d) => {
            if d.n_states() != n {
                return Err(Error::Dimension("partition and operator sizes differ".into()));
            }
            // keep only cells with μ(g) > 0; the others contribute zero
            let charged: Vec<(&Vec<T>, T)> = d
                .functions()
                .iter()
                .map(|g| (g, mu.integrate(g)))
                .filter(|(_, mg)| *mg > T::zero())
                .collect();
            let total: T = charged.iter().map(|c| c.1).sum();
            let images: Vec<Vec<T>> = charged.iter().map(|(g, _)| power.mul_vec(g)).collect();
            let kernel = Matrix::from_fn(n, images.len(), |x, k| images[k][x]);
            let weights = Measure::new(charged.iter().map(|c| c.1 / total).collect())?;
            (kernel, weights)
        }
    };
    match inner_measure_opt(&kernel, &cell_weights, opts) {
        Ok(sol) => Ok(TauN { value: ExtReal::Finite(sol.value + log_scale), kkt_residual: sol.kkt_residual }),
        Err(Error::NullColumn { .. }) => Ok(TauN { value: ExtReal::NegInf, kkt_residual: T::zero() }),
        Err(e) => Err(e),
    }
}

fn check_dims<T: Real>(a: &TransferMatrix<T>, mu: &Measure<T>, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if mu.len() != a.n_states() {
        return Err(Error::Dimension("measure and operator sizes differ".into()));
    }
    Ok(())
}

/// `τ_n(μ, D)` for an arbitrary partition of unity `D`.
pub fn tau_n_partition<T: Real>(
    a: &TransferMatrix<T>,
    mu: &Measure<T>,
    d: &PartitionOfUnity<T>,
    n: usize,
) -> Result<ExtReal<T>> {
    check_dims(a, mu, n)?;
    let (power, log_scale) = a.entries().scaled_power(n);
    tau_from_power(&power, log_scale, mu, Some(d), &InnerOptions::default()).map(|t| t.value)
}

/// `τ_n(μ)` evaluated at the point partition.
pub fn tau_n<T: Real>(a: &TransferMatrix<T>, mu: &Measure<T>, n: usize) -> Result<ExtReal<T>> {
    tau_n_detailed(a, mu, n, &InnerOptions::default()).map(|t| t.value)
}

pub fn tau_n_detailed<T: Real>(
    a: &TransferMatrix<T>,
    mu: &Measure<T>,
    n: usize,
    opts: &InnerOptions<T>,
) -> Result<TauN<T>> {
    check_dims(a, mu, n)?;
    let (power, log_scale) = a.entries().scaled_power(n);
    tau_from_power(&power, log_scale, mu, None, opts)
}

#[derive(Clone, Copy, Debug)]
pub struct TauOptions<T> {
    pub n_max: usize,
    /// Tolerance of the doubling diagnostic `|τ_2n/2n - τ_n/n|`.
    pub doubling_tol: T,
    /// Slack on `τ_{n+k} <= τ_n + τ_k`.
    pub subadditivity_slack: T,
    pub inner: InnerOptions<T>,
}

impl<T: Real> Default for TauOptions<T> {
    fn default() -> Self {
        Self {
            n_max: 32,
            doubling_tol: T::tol(1e-6),
            subadditivity_slack: T::tol(1e-8),
            inner: InnerOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TauResult<T: Real + Serialize> {
    pub value: ExtReal<T>,
    /// `τ_n(μ)/n` for `n = 1..=n_max`.
    pub per_n: Vec<ExtReal<T>>,
    pub converged: bool,
    /// Largest KKT residual of the inner problems.
    pub inner_kkt_residual: T,
    /// Number of pairs violating `τ_{n+k} <= τ_n + τ_k`; `None` when the
    /// measure is not invariant and the property is not expected.
    pub subadditivity_violations: Option<usize>,
}

/// `τ(μ) = min_{n <= n_max} τ_n(μ)/n`.
pub fn t_entropy<T: Real + Serialize>(a: &TransferMatrix<T>, mu: &Measure<T>, n_max: usize) -> Result<TauResult<T>> {
    t_entropy_with(a, mu, &TauOptions { n_max, ..TauOptions::default() })
}

pub fn t_entropy_with<T: Real + Serialize>(
    a: &TransferMatrix<T>,
    mu: &Measure<T>,
    opts: &TauOptions<T>,
) -> Result<TauResult<T>> {
    if opts.n_max < 4 {
        return Err(Error::Domain(format!("n_max must be at least 4, got {}", opts.n_max)));
    }
    check_dims(a, mu, 1)?;
    let k = a.n_states();
    let entries = a.entries();
    let mut power = Matrix::identity(k);
    let mut log_scale = T::zero();
    let mut tau = Vec::with_capacity(opts.n_max);
    let mut kkt = T::zero();
    for _ in 1..=opts.n_max {
        power = power.matmul(entries);
        let c = power.max_abs();
        if c > T::zero() {
            log_scale = log_scale + c.ln();
            power = power.scale(T::one() / c);
        }
        let t = tau_from_power(&power, log_scale, mu, None, &opts.inner)?;
        kkt = kkt.max(t.kkt_residual);
        tau.push(t.value);
    }
    let per_n: Vec<ExtReal<T>> = tau.iter().enumerate().map(|(i, t)| match t {
        ExtReal::Finite(v) => ExtReal::Finite(*v / T::lit((i + 1) as f64)),
        ExtReal::NegInf => ExtReal::NegInf,
    }).collect();
    let value = per_n.iter().copied().fold(per_n[0], ExtReal::min);

    let half = opts.n_max / 2;
    let converged = per_n[2 * half - 1].abs_diff(per_n[half - 1]) < opts.doubling_tol;

    let subadditivity_violations = is_invariant(mu, a.system()).then(|| {
        let mut bad = 0;
        for i in 1..=opts.n_max {
            for j in 1..=opts.n_max - i {
                if let (Some(a), Some(b), Some(s)) = (tau[i - 1].value(), tau[j - 1].value(), tau[i + j - 1].value()) {
                    if s > a + b + opts.subadditivity_slack {
                        bad += 1;
                    }
                }
            }
        }
        bad
    });

    Ok(TauResult { value, per_n, converged, inner_kkt_residual: kkt, subadditivity_violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{build_pf_operator, FiniteMapSystem};
    use approx::assert_relative_eq;

    fn pf(map: &[usize], psi: &[f64]) -> TransferMatrix<f64> {
        build_pf_operator(&FiniteMapSystem::new(map.to_vec()).unwrap(), psi).unwrap()
    }

    #[test]
    fn dominated_row_optimum_is_certified() {
        // row 2 is dominated, so the optimum m = (1/2, 1/2, 0) sits on a face
        let k: Matrix<f64> = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.4, 0.4]]).unwrap();
        let mu = Measure::new(vec![0.5, 0.5]).unwrap();
        let sol = inner_measure_opt(&k, &mu, &InnerOptions::default()).unwrap();
        assert!(sol.value.abs() < 1e-13, "{}", sol.value);
        assert!(sol.gap < 1e-13, "{}", sol.gap);
        assert!(sol.m.weights()[2] < 1e-12);
        assert!(sol.converged);
    }

    /// Grid search of `sup_m Σ μ_y ln((Kᵀm)_y/μ_y)` over the 1-simplex.
    fn grid_oracle_2(kernel: &Matrix<f64>, mu: &[f64], step: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let steps = (1.0 / step).round() as usize;
        for i in 0..=steps {
            let t = i as f64 * step;
            let m = [t, 1.0 - t];
            let v: f64 = (0..2)
                .filter(|&y| mu[y] > 0.0)
                .map(|y| {
                    let q = m[0] * kernel[(0, y)] + m[1] * kernel[(1, y)];
                    mu[y] * (q / mu[y]).ln()
                })
                .sum();
            best = best.max(v);
        }
        best
    }

    /// Grid search over the 2-simplex for 3-state kernels.
    fn grid_oracle_3(kernel: &Matrix<f64>, mu: &[f64], steps: usize) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..=steps {
            for j in 0..=steps - i {
                let m = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
                let v: f64 = (0..3)
                    .filter(|&y| mu[y] > 0.0)
                    .map(|y| {
                        let q: f64 = (0..3).map(|x| m[x] * kernel[(x, y)]).sum();
                        mu[y] * (q / mu[y]).ln()
                    })
                    .sum();
                best = best.max(v);
            }
        }
        best
    }

    #[test]
    fn identity_kernel_recovers_mu() {
        let mu = Measure::new(vec![0.2, 0.3, 0.5]).unwrap();
        let sol = inner_measure_opt(&Matrix::identity(3), &mu, &InnerOptions::default()).unwrap();
        assert_relative_eq!(sol.value, 0.0, epsilon = 1e-12);
        for (a, b) in sol.m.weights().iter().zip(mu.weights()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
        assert!(sol.converged);
    }

    #[test]
    fn fixed_point_value_is_log_weight() {
        let a = pf(&[0, 0, 1], &[3.5, 2.0, 0.7]);
        let mu = Measure::dirac(3, 0);
        let sol = inner_measure_opt(a.entries(), &mu, &InnerOptions::default()).unwrap();
        assert_relative_eq!(sol.value, 3.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn two_cycle_matches_grid_oracle() {
        let (a, b) = (0.6, 3.0);
        let k = pf(&[1, 0], &[a, b]);
        let mu = Measure::new(vec![0.5, 0.5]).unwrap();
        let sol = inner_measure_opt(k.entries(), &mu, &InnerOptions::default()).unwrap();
        let oracle = grid_oracle_2(k.entries(), mu.weights(), 1e-6);
        assert_relative_eq!(sol.value, oracle, epsilon = 1e-6);
        assert_relative_eq!(sol.value, 0.5 * (a.ln() + b.ln()), epsilon = 1e-10);
    }

    #[test]
    fn dense_kernel_matches_grid_oracle() {
        // not a finite-map operator; exercises the multiplicative update
        let k = Matrix::from_rows(&[vec![1.0, 0.5, 0.2], vec![0.3, 2.0, 0.1], vec![0.4, 0.4, 1.5]]).unwrap();
        let mu = Measure::new(vec![0.5, 0.3, 0.2]).unwrap();
        let sol = inner_measure_opt(&k, &mu, &InnerOptions::default()).unwrap();
        let oracle = grid_oracle_3(&k, mu.weights(), 1000);
        assert!(sol.value >= oracle - 1e-9);
        assert_relative_eq!(sol.value, oracle, epsilon = 1e-5);
        assert!(sol.kkt_residual < 1e-6, "kkt {}", sol.kkt_residual);
    }

    #[test]
    fn null_column_is_reported() {
        let a = pf(&[1, 1], &[0.0, 1.0]);
        let mu = Measure::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            inner_measure_opt(a.entries(), &mu, &InnerOptions::default()),
            Err(Error::NullColumn { state: 0 })
        ));
        assert!(tau_n(&a, &mu, 1).unwrap().is_neg_inf());
    }

    #[test]
    fn trivial_partition_gives_log_norm() {
        let a = pf(&[1, 2, 0, 0], &[1.5, 0.4, 2.2, 3.0]);
        let mu = Measure::new(vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        for n in 1..=4 {
            let t = tau_n_partition(&a, &mu, &PartitionOfUnity::trivial(4), n).unwrap().value().unwrap();
            let (p, s) = a.entries().scaled_power(n);
            let norm = p.mul_vec(&[1.0; 4]).into_iter().fold(0.0, f64::max);
            assert_relative_eq!(t, norm.ln() + s, epsilon = 1e-9);
        }
    }

    #[test]
    fn point_partition_matches_tau_n() {
        let a = pf(&[1, 2, 0, 0], &[1.5, 0.4, 2.2, 3.0]);
        let mu = Measure::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        for n in 1..=3 {
            let p = tau_n_partition(&a, &mu, &PartitionOfUnity::point(4), n).unwrap();
            let t = tau_n(&a, &mu, n).unwrap();
            assert_relative_eq!(p.value().unwrap(), t.value().unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_has_zero_tau() {
        let a = pf(&[0, 1, 2], &[1.0, 1.0, 1.0]);
        let mu = Measure::new(vec![0.2, 0.3, 0.5]).unwrap();
        for n in 1..=5 {
            assert_relative_eq!(tau_n(&a, &mu, n).unwrap().value().unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_cycle_tau_n_against_brute_force() {
        let (a, b) = (0.6, 3.0);
        let k = pf(&[1, 0], &[a, b]);
        let mu = Measure::new(vec![0.5, 0.5]).unwrap();
        for n in 1..=3 {
            let (p, s) = k.entries().scaled_power(n);
            let oracle = grid_oracle_2(&p, mu.weights(), 1e-6) + s;
            let t = tau_n(&k, &mu, n).unwrap().value().unwrap();
            assert_relative_eq!(t, oracle, epsilon = 1e-6);
            assert_relative_eq!(t, n as f64 * 0.5 * (a.ln() + b.ln()), epsilon = 1e-9);
        }
    }

    #[test]
    fn periodic_orbit_entropy() {
        // 3-cycle 0 -> 1 -> 2 -> 0 with a tail 3 -> 0
        let psi = [0.5, 4.0, 1.7, 9.0];
        let a = pf(&[1, 2, 0, 0], &psi);
        let mu = Measure::uniform_on(4, &[0, 1, 2]);
        let r = t_entropy(&a, &mu, 12).unwrap();
        let expect = (psi[0] * psi[1] * psi[2]).ln() / 3.0;
        assert_relative_eq!(r.value.value().unwrap(), expect, epsilon = 1e-9);
        assert_eq!(r.subadditivity_violations, Some(0));
        assert!(r.converged);
    }

    #[test]
    fn permutation_conditional_expectation_has_zero_entropy() {
        let a = pf(&[2, 0, 1, 3], &[1.0; 4]);
        for mu in [Measure::uniform_on(4, &[0, 1, 2]), Measure::dirac(4, 3)] {
            let r = t_entropy(&a, &mu, 8).unwrap();
            assert_relative_eq!(r.value.value().unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn nilpotent_gives_neg_inf() {
        let a = pf(&[1, 2, 2], &[1.0, 1.0, 0.0]);
        let r = t_entropy(&a, &Measure::dirac(3, 2), 4).unwrap();
        assert!(r.value.is_neg_inf());
    }

    #[test]
    fn rejects_small_n_max() {
        let a = pf(&[0], &[1.0]);
        assert!(t_entropy(&a, &Measure::dirac(1, 0), 3).is_err());
    }

    #[test]
    fn partition_validation() {
        assert!(PartitionOfUnity::new(vec![vec![0.5, 1.0], vec![0.5, 0.1]]).is_err());
        assert!(PartitionOfUnity::new(vec![vec![0.5, 1.0], vec![0.5, 0.0]]).is_ok());
        assert!(PartitionOfUnity::<f64>::new(vec![]).is_err());
    }
}

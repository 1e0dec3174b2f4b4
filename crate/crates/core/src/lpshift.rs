//! Weighted shift operators `(ψT f)(y) = ψ(y) f(β(y))` on `L^p(Y, m)` over
//! a finite space with positive atom masses.
//!
//! The adjoint realization `A[x][y] = m_y / m_x` for `β(y) = x` satisfies
//! `‖(ψT)^n‖_p^p = ‖(A|ψ|^p)^n 1‖_∞`, which ties the `L^p` spectral radius
//! to the spectral potential: `p ln r(ψT) = λ(p ln|ψ|)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::legendre::{maximize_over_hull, HullOptions};
use crate::matrix::Matrix;
use crate::scalar::{ExtReal, Real};
use crate::spectral::{spectral_potential_ext, PowerOptions};
use crate::systems::{ergodic_measures, FiniteMapSystem, Measure, TransferMatrix};
use crate::tentropy::t_entropy;

/// Agreement required between the two norm computations, on logarithms.
pub const NORM_AGREEMENT_TOL: f64 = 1e-10;
const FACTORIZATION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasureSystem<T> {
    m: Vec<T>,
    beta: FiniteMapSystem,
}

impl<T: Real> FiniteMeasureSystem<T> {
    pub fn new(m: Vec<T>, beta: FiniteMapSystem) -> Result<Self> {
        if m.len() != beta.n_states() {
            return Err(Error::Dimension(format!("{} masses for {} points", m.len(), beta.n_states())));
        }
        if let Some((y, v)) = m.iter().enumerate().find(|(_, &v)| !(v > T::zero()) || !v.is_finite()) {
            return Err(Error::Invalid { what: "m", reason: format!("mass of point {y} is {v}, must be positive and finite") });
        }
        Ok(Self { m, beta })
    }

    pub fn masses(&self) -> &[T] {
        &self.m
    }

    pub fn beta(&self) -> &FiniteMapSystem {
        &self.beta
    }

    pub fn n_points(&self) -> usize {
        self.m.len()
    }

    /// `m(β^{-1}(x))` for every `x`.
    pub fn pushforward(&self) -> Vec<T> {
        self.beta.pushforward(&self.m)
    }

    /// `max_x m(β^{-1}(x)) / m(x)`.
    pub fn distortion_constant(&self) -> T {
        self.pushforward().iter().zip(&self.m).map(|(&a, &b)| a / b).fold(T::zero(), T::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedShift<T> {
    system: FiniteMeasureSystem<T>,
    psi: Vec<T>,
    p: T,
}

impl<T: Real> WeightedShift<T> {
    pub fn new(system: FiniteMeasureSystem<T>, psi: Vec<T>, p: T) -> Result<Self> {
        if psi.len() != system.n_points() {
            return Err(Error::Dimension(format!("{} weights for {} points", psi.len(), system.n_points())));
        }
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid { what: "psi", reason: "weights must be finite".into() });
        }
        if !(p >= T::one()) || !p.is_finite() {
            return Err(Error::Invalid { what: "p", reason: format!("exponent must lie in [1, inf), got {p}") });
        }
        Ok(Self { system, psi, p })
    }

    pub fn system(&self) -> &FiniteMeasureSystem<T> {
        &self.system
    }

    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    pub fn p(&self) -> T {
        self.p
    }

    /// `ln|ψ|` with `ln 0 = −∞`.
    pub fn log_abs_psi(&self) -> Vec<ExtReal<T>> {
        self.psi.iter().map(|v| ExtReal::ln(v.abs())).collect()
    }

    /// The same operator with weight `|ψ|^p` acting on `L^1`.
    pub fn to_l1(&self) -> Self {
        let psi = self.psi.iter().map(|v| v.abs().powf(self.p)).collect();
        Self { system: self.system.clone(), psi, p: T::one() }
    }
}

/// `A = diag(dβ(m)/dm) · E` with `E` the fiber average.
#[derive(Clone, Debug)]
pub struct Factorization<T> {
    /// `m(β^{-1}(x)) / m(x)`.
    pub radon_nikodym: Vec<T>,
    /// `(Ef)(x) = Σ_{β(y)=x} m_y f(y) / m(β^{-1}(x))`, zero on empty fibers.
    pub fiber_average: Matrix<T>,
}

pub fn factorization<T: Real>(system: &FiniteMeasureSystem<T>) -> Factorization<T> {
    let n = system.n_points();
    let fiber = system.pushforward();
    let m = system.masses();
    let beta = system.beta();
    Factorization {
        radon_nikodym: fiber.iter().zip(m).map(|(&f, &mx)| f / mx).collect(),
        fiber_average: Matrix::from_fn(n, n, |x, y| if beta.apply(y) == x { m[y] / fiber[x] } else { T::zero() }),
    }
}

/// The transfer operator adjoint to `f ↦ f∘β` on `L^1(m)`:
/// `A[x][y] = m_y / m_x` when `β(y) = x`.
pub fn transfer_from_measure<T: Real>(system: &FiniteMeasureSystem<T>) -> Result<TransferMatrix<T>> {
    let n = system.n_points();
    let m = system.masses();
    let beta = system.beta();
    let entries = Matrix::from_fn(n, n, |x, y| if beta.apply(y) == x { m[y] / m[x] } else { T::zero() });

    let f = factorization(system);
    let mut err = T::zero();
    for x in 0..n {
        for y in 0..n {
            let rebuilt = f.radon_nikodym[x] * f.fiber_average[(x, y)];
            err = err.max((rebuilt - entries[(x, y)]).abs() / entries[(x, y)].max(T::one()));
        }
    }
    if err > T::tol(FACTORIZATION_TOL) {
        return Err(Error::Inconsistent(format!("A differs from diag(dβ(m)/dm)·E by {err}")));
    }
    TransferMatrix::new(beta.clone(), entries)
}

fn log_sum_exp<T: Real>(terms: impl Iterator<Item = ExtReal<T>>) -> ExtReal<T> {
    let vals: Vec<T> = terms.filter_map(|t| t.value()).collect();
    let top = vals.iter().copied().fold(T::neg_infinity(), T::max);
    if vals.is_empty() {
        return ExtReal::NegInf;
    }
    ExtReal::Finite(top + vals.iter().map(|&v| (v - top).exp()).sum::<T>().ln())
}

/// `ln ‖(ψT)^n‖_p` by two routes: the fiber sum
/// `max_z (Σ_{β^n y = z} |w_n(y)|^p m_y / m_z)^{1/p}` and the transfer power
/// `‖(A|ψ|^p)^n 1‖_∞^{1/p}`, both on logarithms.
pub fn lp_log_norm_routes<T: Real>(ws: &WeightedShift<T>, n: usize) -> Result<(ExtReal<T>, ExtReal<T>)> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let sys = ws.system();
    let beta = sys.beta();
    let k = sys.n_points();
    let log_m: Vec<T> = sys.masses().iter().map(|v| v.ln()).collect();
    let log_psi = ws.log_abs_psi();
    let p = ws.p();

    // fiber route: cocycle ln|w_n(y)| = Σ_{i<n} ln|ψ(β^i y)|
    let mut fiber_terms: Vec<Vec<ExtReal<T>>> = vec![Vec::new(); k];
    for y in 0..k {
        let mut log_w = ExtReal::Finite(T::zero());
        let mut z = y;
        for _ in 0..n {
            log_w = log_w + log_psi[z];
            z = beta.apply(z);
        }
        fiber_terms[z].push(log_w.scale(p) + (log_m[y] - log_m[z]));
    }
    let fiber = fiber_terms.into_iter().map(|t| log_sum_exp(t.into_iter())).fold(ExtReal::NegInf, ExtReal::max);

    // transfer route: v <- A |ψ|^p v starting from 1
    let a = transfer_from_measure(sys)?;
    let log_a: Vec<T> = (0..k).map(|y| a.entries()[(beta.apply(y), y)].ln()).collect();
    let mut v = vec![ExtReal::Finite(T::zero()); k];
    for _ in 0..n {
        let mut next = vec![Vec::new(); k];
        for y in 0..k {
            next[beta.apply(y)].push(log_psi[y].scale(p) + log_a[y] + v[y]);
        }
        v = next.into_iter().map(|t| log_sum_exp(t.into_iter())).collect();
    }
    let transfer = v.into_iter().fold(ExtReal::NegInf, ExtReal::max);

    let inv_p = T::one() / p;
    Ok((fiber.scale(inv_p), transfer.scale(inv_p)))
}

/// `‖(ψT)^n‖_p`, checked against the transfer-power identity.
pub fn lp_power_norm<T: Real>(ws: &WeightedShift<T>, n: usize) -> Result<T> {
    let (fiber, transfer) = lp_log_norm_routes(ws, n)?;
    let agree = match (fiber, transfer) {
        (ExtReal::NegInf, ExtReal::NegInf) => true,
        (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs() <= T::tol(NORM_AGREEMENT_TOL),
        _ => false,
    };
    if !agree {
        return Err(Error::Inconsistent(format!("fiber norm {fiber:?} and transfer norm {transfer:?} disagree")));
    }
    Ok(fiber.exp())
}

#[derive(Clone, Debug, Serialize)]
pub struct LpRadius<T: Real + Serialize> {
    /// `ln r(ψT) = λ(p ln|ψ|)/p` for `A` from [`transfer_from_measure`].
    pub log_radius: ExtReal<T>,
    /// `max_μ ∫ln|ψ| dμ + τ(μ)/p` over the invariant polytope of `β`.
    pub vp_value: ExtReal<T>,
    pub gap: ExtReal<T>,
    /// `(1/n) ln ‖(ψT)^n‖_p` for `n = 1..=n_max`; tends to `log_radius`
    /// from above.
    pub gelfand: Vec<ExtReal<T>>,
}

pub fn lp_spectral_radius<T: Real + Serialize>(ws: &WeightedShift<T>, n_max: usize) -> Result<LpRadius<T>> {
    if n_max < 4 {
        return Err(Error::Domain(format!("n_max must be at least 4, got {n_max}")));
    }
    let a = transfer_from_measure(ws.system())?;
    let p = ws.p();
    let inv_p = T::one() / p;
    let log_psi = ws.log_abs_psi();
    let log_w: Vec<ExtReal<T>> = log_psi.iter().map(|l| l.scale(p)).collect();
    let log_radius = spectral_potential_ext(a.entries(), &log_w, &PowerOptions::default())?.lambda.scale(inv_p);

    let vertices: Vec<Measure<T>> = ergodic_measures(a.system()).into_iter().map(|m| m.into_measure()).collect();
    let objective = |mu: &Measure<T>| -> Result<ExtReal<T>> {
        let drift: ExtReal<T> = mu.weights().iter().zip(&log_psi).map(|(&w, l)| l.scale(w)).sum();
        Ok(drift + t_entropy(&a, mu, n_max)?.value.scale(inv_p))
    };
    let vp_value = match maximize_over_hull(&vertices, objective, &HullOptions::default()) {
        Ok((v, _)) => ExtReal::Finite(v),
        Err(Error::NoFeasibleMeasure) => ExtReal::NegInf,
        Err(e) => return Err(e),
    };
    let gap = match (log_radius, vp_value) {
        (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite((a - b).abs()),
        (ExtReal::NegInf, ExtReal::NegInf) => ExtReal::Finite(T::zero()),
        _ => ExtReal::NegInf,
    };

    let mut gelfand = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let (fiber, _) = lp_log_norm_routes(ws, n)?;
        gelfand.push(fiber.scale(T::one() / T::lit(n as f64)));
    }
    Ok(LpRadius { log_radius, vp_value, gap, gelfand })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::check_homological_identity;
    use approx::assert_relative_eq;

    fn system(m: &[f64], beta: &[usize]) -> FiniteMeasureSystem<f64> {
        FiniteMeasureSystem::new(m.to_vec(), FiniteMapSystem::new(beta.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn transfer_examples() {
        let id = transfer_from_measure(&system(&[0.2, 0.3, 0.5], &[0, 1, 2])).unwrap();
        assert_eq!(id.entries(), &Matrix::identity(3));

        let swap = transfer_from_measure(&system(&[0.5, 0.5], &[1, 0])).unwrap();
        assert_eq!(swap.entries().to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(swap.apply(&[1.0, 1.0]), vec![1.0, 1.0]);

        let sys = system(&[0.5, 0.5], &[0, 0]);
        let collapse = transfer_from_measure(&sys).unwrap();
        assert_eq!(collapse.entries().to_rows(), vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        assert_eq!(collapse.apply(&[1.0, 1.0]), vec![2.0, 0.0]);
        assert_eq!(factorization(&sys).radon_nikodym, vec![2.0, 0.0]);
    }

    #[test]
    fn transfer_is_homological() {
        let a = transfer_from_measure(&system(&[0.1, 0.4, 0.2, 0.3], &[1, 2, 1, 1])).unwrap();
        assert!(check_homological_identity(&a));
    }

    #[test]
    fn measure_preserving_unit_weight_has_norm_one() {
        // a 3-cycle with equal masses preserves m
        let ws = WeightedShift::new(system(&[1.0 / 3.0; 3], &[1, 2, 0]), vec![1.0; 3], 2.5).unwrap();
        for n in 1..=6 {
            assert_relative_eq!(lp_power_norm(&ws, n).unwrap(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn invertible_norm_is_max_cocycle() {
        let psi = [0.5, 3.0, -2.0, 1.5];
        let ws = WeightedShift::new(system(&[0.1, 0.2, 0.3, 0.4], &[1, 0, 3, 2]), psi.to_vec(), 3.0).unwrap();
        for n in 1..=5 {
            let expect = (0..4)
                .map(|y: usize| {
                    let mut z = y;
                    let mut w = 1.0f64;
                    for _ in 0..n {
                        w *= psi[z].abs();
                        z = [1, 0, 3, 2][z];
                    }
                    // fiber of z is {y}; mass ratio m_y/m_z enters with power 1/p
                    let m: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
                    w * (m[y] / m[z]).powf(1.0 / 3.0)
                })
                .fold(0.0, f64::max);
            assert_relative_eq!(lp_power_norm(&ws, n).unwrap(), expect, max_relative = 1e-12);
        }
        // with equal masses the formula is exactly max_y Π |ψ(β^i y)|
        let ws = WeightedShift::new(system(&[0.25; 4], &[1, 0, 3, 2]), psi.to_vec(), 3.0).unwrap();
        assert_relative_eq!(lp_power_norm(&ws, 2).unwrap(), 3.0, max_relative = 1e-14);
    }

    #[test]
    fn collapsing_map_l1_norm() {
        let ws = WeightedShift::new(system(&[0.5, 0.5], &[0, 0]), vec![1.0, 1.0], 1.0).unwrap();
        assert_relative_eq!(lp_power_norm(&ws, 1).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn invertible_radius_is_max_cycle_average() {
        let psi = vec![0.5, 3.0, 2.0, 1.5, 0.1];
        let ws = WeightedShift::new(system(&[0.1, 0.2, 0.3, 0.2, 0.2], &[1, 0, 3, 2, 4]), psi.clone(), 2.0).unwrap();
        let r = lp_spectral_radius(&ws, 8).unwrap();
        let expect = f64::max((0.5f64 * 3.0).ln() / 2.0, (2.0f64 * 1.5).ln() / 2.0);
        assert_relative_eq!(r.log_radius.value().unwrap(), expect, epsilon = 1e-12);
        assert!(r.gap.value().unwrap() < 1e-9);
    }

    #[test]
    fn l1_radius_is_spectral_radius_of_a_psi() {
        let sys = system(&[0.3, 0.3, 0.4], &[1, 2, 1]);
        let psi = vec![1.2, 0.7, 2.0];
        let ws = WeightedShift::new(sys.clone(), psi.clone(), 1.0).unwrap();
        let a = transfer_from_measure(&sys).unwrap();
        let direct = crate::spectral::spectral_potential(&a, &crate::spectral::Potential::new(psi.iter().map(|v| v.ln()).collect()).unwrap()).unwrap();
        let r = lp_spectral_radius(&ws, 8).unwrap();
        assert_relative_eq!(r.log_radius.value().unwrap(), direct.lambda.value().unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn p_scaling() {
        let ws = WeightedShift::new(system(&[0.1, 0.5, 0.4], &[1, 2, 1]), vec![1.5, -0.4, 2.2], 3.5).unwrap();
        let a = lp_spectral_radius(&ws, 8).unwrap().log_radius.value().unwrap();
        let b = lp_spectral_radius(&ws.to_l1(), 8).unwrap().log_radius.value().unwrap();
        assert_relative_eq!(a, b / 3.5, epsilon = 1e-10);
    }

    #[test]
    fn large_p_vp_approaches_cycle_average() {
        let ws = WeightedShift::new(system(&[0.2, 0.2, 0.3, 0.3], &[1, 0, 2, 2]), vec![0.4, 5.0, 1.3, 9.0], 1e3).unwrap();
        let r = lp_spectral_radius(&ws, 8).unwrap();
        let expect = f64::max((0.4f64 * 5.0).ln() / 2.0, 1.3f64.ln());
        assert!((r.vp_value.value().unwrap() - expect).abs() < 5e-3);
        assert!(r.gap.value().unwrap() <= 1e-3);
    }

    #[test]
    fn zero_weights_on_every_cycle() {
        let ws = WeightedShift::new(system(&[0.5, 0.25, 0.25], &[1, 0, 2]), vec![0.0, 2.0, 0.0], 2.0).unwrap();
        let r = lp_spectral_radius(&ws, 4).unwrap();
        assert!(r.log_radius.is_neg_inf() && r.vp_value.is_neg_inf());
        assert_eq!(lp_power_norm(&ws, 2).unwrap(), 0.0);
    }

    #[test]
    fn zero_weight_on_one_cycle() {
        let ws = WeightedShift::new(system(&[0.5, 0.25, 0.25], &[1, 0, 2]), vec![0.0, 2.0, 0.8], 2.0).unwrap();
        let r = lp_spectral_radius(&ws, 4).unwrap();
        assert_relative_eq!(r.log_radius.value().unwrap(), 0.8f64.ln(), epsilon = 1e-12);
        assert!(r.gap.value().unwrap() < 1e-9);
    }

    #[test]
    fn validation() {
        assert!(FiniteMeasureSystem::new(vec![0.5, 0.0], FiniteMapSystem::identity(2)).is_err());
        let sys = system(&[0.5, 0.5], &[1, 0]);
        assert!(WeightedShift::new(sys.clone(), vec![1.0, 1.0], 0.5).is_err());
        assert!(WeightedShift::new(sys, vec![1.0], 2.0).is_err());
    }
}

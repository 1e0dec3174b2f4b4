//! Dual entropy `S(μ) = inf_φ (λ(φ) − μ(φ))`, the Young inequality, and
//! reconstruction of `λ` from an entropy functional over the invariant
//! polytope.
//!
//! `λ` is convex but only piecewise smooth: on a finite map it is the max
//! over cycles of the cycle average of `φ + ln ψ`. The descent therefore
//! works with the convex hull of the equilibrium measures of all nearly
//! dominant irreducible blocks and moves along minus its min-norm point,
//! tightening the "nearly" threshold as it stalls.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{ExtReal, Real};
use crate::spectral::{equilibrium_from, spectral_potential, spectral_potential_with, Potential, PowerOptions, SpectralResult};
use crate::systems::{ergodic_measures, Measure, TransferMatrix};
use crate::tentropy::{t_entropy, TauResult};

#[derive(Clone, Copy, Debug)]
pub struct DualOptions<T> {
    pub max_iter: usize,
    /// Stationarity threshold on the descent direction's Euclidean norm.
    pub tol: T,
    /// Objective values below this certify `S(μ) = −∞`.
    pub divergence_floor: T,
    /// Largest `‖φ‖∞` explored before the descent stops.
    pub phi_cap: T,
    pub armijo: T,
    pub shrink: T,
    /// Initial and final width of the near-dominance window on `ln r`.
    pub window: T,
    pub min_window: T,
}

impl<T: Real> Default for DualOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: T::tol(1e-9),
            divergence_floor: T::lit(-1e6),
            phi_cap: T::lit(1e4),
            armijo: T::lit(1e-4),
            shrink: T::lit(0.5),
            window: T::lit(1e-3),
            min_window: T::tol(1e-10),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DualEntropyResult<T: Real + Serialize> {
    pub value: ExtReal<T>,
    pub argmin_phi: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
}

/// Min-norm point of the convex hull of `parts`, each with disjoint
/// support, translated by `-mu`; returns the hull point itself.
///
/// With disjoint supports the Gram matrix is diagonal, so the simplex QP
/// `min Σ a_c w_c² − 2 b_c w_c` is solved by `w_c = max(0, (b_c + θ)/a_c)`
/// with `θ` fixed by `Σ w = 1`.
fn nearest_hull_point<T: Real>(parts: &[Vec<T>], mu: &[T]) -> Vec<T> {
    let dot = |u: &[T], v: &[T]| -> T { u.iter().zip(v).map(|(&a, &b)| a * b).sum() };
    let a: Vec<T> = parts.iter().map(|e| dot(e, e)).collect();
    let b: Vec<T> = parts.iter().map(|e| dot(e, mu)).collect();
    let total = |theta: T| -> T { a.iter().zip(&b).map(|(&ac, &bc)| ((bc + theta) / ac).max(T::zero())).sum() };
    let mut lo = -b.iter().copied().fold(T::neg_infinity(), T::max);
    let mut hi = a.iter().zip(&b).map(|(&ac, &bc)| ac - bc).fold(T::neg_infinity(), T::max);
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if total(mid) < T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut w: Vec<T> = a.iter().zip(&b).map(|(&ac, &bc)| ((bc + hi) / ac).max(T::zero())).collect();
    let s: T = w.iter().copied().sum();
    for x in w.iter_mut() {
        *x = *x / s;
    }
    let mut point = vec![T::zero(); mu.len()];
    for (e, &wc) in parts.iter().zip(&w) {
        for (p, &v) in point.iter_mut().zip(e) {
            *p = *p + wc * v;
        }
    }
    point
}

/// `S(μ)` by descent on `g(φ) = λ(φ) − μ(φ)` from `φ = 0`.
pub fn dual_entropy<T: Real + Serialize>(a: &TransferMatrix<T>, mu: &Measure<T>) -> Result<DualEntropyResult<T>> {
    dual_entropy_with(a, mu, &DualOptions::default())
}

pub fn dual_entropy_with<T: Real + Serialize>(
    a: &TransferMatrix<T>,
    mu: &Measure<T>,
    opts: &DualOptions<T>,
) -> Result<DualEntropyResult<T>> {
    let n = a.n_states();
    if mu.len() != n {
        return Err(Error::Dimension("measure and operator sizes differ".into()));
    }
    let power = PowerOptions::default();
    let eval = |phi: &[T]| -> Result<(T, SpectralResult<T>)> {
        let res = spectral_potential_with(a, &Potential::new(phi.to_vec())?, &power)?;
        let l = res.lambda.value().ok_or(Error::Nilpotent)?;
        Ok((l - mu.integrate(phi), res))
    };

    let mut phi = vec![T::zero(); n];
    let (mut g, mut res) = eval(&phi)?;
    let lambda0 = g;
    let mut window = opts.window;
    let mut step = T::one();
    let mut converged = false;
    let mut diverged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let parts: Vec<Vec<T>> = res.perron().near_dominant(window).iter().map(|c| c.equilibrium(n)).collect();
        let ebar = nearest_hull_point(&parts, mu.weights());
        let d: Vec<T> = mu.weights().iter().zip(&ebar).map(|(&m, &e)| m - e).collect();
        let d2: T = d.iter().map(|&v| v * v).sum();
        if d2.sqrt() <= opts.tol {
            if window <= opts.min_window {
                converged = true;
                break;
            }
            window = (window * T::lit(0.1)).max(opts.min_window);
            continue;
        }

        let d_sup = d.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        step = (step + step).min((opts.phi_cap + opts.phi_cap) / d_sup);
        let mut accepted = None;
        while step > T::tol(1e-16) {
            let cand: Vec<T> = phi.iter().zip(&d).map(|(&p, &v)| p + step * v).collect();
            let (gc, rc) = eval(&cand)?;
            if gc <= g - opts.armijo * step * d2 {
                accepted = Some((cand, gc, rc));
                break;
            }
            step = step * opts.shrink;
        }
        let Some((cand, gc, rc)) = accepted else {
            if window <= opts.min_window {
                converged = d2.sqrt() <= T::tol(1e-6);
                break;
            }
            window = (window * T::lit(0.1)).max(opts.min_window);
            step = T::one();
            continue;
        };
        phi = cand;
        g = gc;
        res = rc;

        if g < opts.divergence_floor {
            diverged = true;
            break;
        }
        let sup = phi.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        if sup >= opts.phi_cap {
            // the floor sits beyond the cap; a drop far below λ(0) is the
            // certificate here, since invariant μ keep g above the smallest
            // cycle average of ln ψ
            diverged = g < lambda0 - T::lit(0.01) * opts.phi_cap;
            break;
        }
    }

    Ok(DualEntropyResult {
        value: if diverged { ExtReal::NegInf } else { ExtReal::Finite(g) },
        argmin_phi: phi,
        converged: converged || diverged,
        iterations,
    })
}

/// `λ(φ) − μ(φ) − S(μ)`; nonnegative, and zero when `μ` is the
/// equilibrium measure of `φ`.
pub fn verify_young<T: Real + Serialize>(a: &TransferMatrix<T>, phi: &Potential<T>, mu: &Measure<T>) -> Result<T> {
    let s = dual_entropy(a, mu)?;
    let s = s.value.value().ok_or_else(|| Error::Domain("dual entropy is -inf".into()))?;
    let l = spectral_potential(a, phi)?.lambda.value().ok_or(Error::Nilpotent)?;
    Ok(l - mu.integrate(phi.values()) - s)
}

#[derive(Clone, Copy, Debug)]
pub struct HullOptions<T> {
    pub max_iter: usize,
    /// Finite-difference step on hull weights.
    pub fd_step: T,
    pub armijo: T,
}

impl<T: Real> Default for HullOptions<T> {
    fn default() -> Self {
        Self { max_iter: 500, fd_step: T::lit(1e-4), armijo: T::lit(1e-4) }
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex<T: Real>(v: &[T]) -> Vec<T> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
    let mut acc = T::zero();
    let mut theta = T::zero();
    for (i, &ui) in u.iter().enumerate() {
        acc = acc + ui;
        let t = (acc - T::one()) / T::lit((i + 1) as f64);
        if ui - t > T::zero() {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(T::zero())).collect()
}

fn mix<T: Real>(w: &[T], vertices: &[Measure<T>]) -> Result<Measure<T>> {
    let n = vertices[0].len();
    let mut out = vec![T::zero(); n];
    for (v, &c) in vertices.iter().zip(w) {
        for (o, &x) in out.iter_mut().zip(v.weights()) {
            *o = *o + c * x;
        }
    }
    Measure::normalized(out)
}

/// Maximizes `objective` over the convex hull of `vertices` by projected
/// gradient ascent on the hull weights, with finite-difference derivatives
/// along the edges `e_j − w` and a start at every vertex. Vertices where
/// the objective is `−∞` are dropped first.
pub fn maximize_over_hull<T: Real>(
    vertices: &[Measure<T>],
    objective: impl Fn(&Measure<T>) -> Result<ExtReal<T>>,
    opts: &HullOptions<T>,
) -> Result<(T, Measure<T>)> {
    let mut live = Vec::new();
    for v in vertices {
        if objective(v)?.is_finite() {
            live.push(v.clone());
        }
    }
    if live.is_empty() {
        return Err(Error::NoFeasibleMeasure);
    }
    let k = live.len();
    let h = opts.fd_step;
    let f = |w: &[T]| -> Result<ExtReal<T>> { objective(&mix(w, &live)?) };
    let along = |w: &[T], j: usize, t: T| -> Vec<T> {
        w.iter().enumerate().map(|(i, &x)| x + t * (if i == j { T::one() } else { T::zero() } - x)).collect()
    };

    let mut best: Option<(T, Vec<T>)> = None;
    for start in 0..k {
        let mut w: Vec<T> = (0..k).map(|i| if i == start { T::one() } else { T::zero() }).collect();
        let mut fw = f(&w)?.to_float();
        let mut step = T::one();
        for _ in 0..opts.max_iter {
            let mut grad = vec![T::zero(); k];
            for (j, gj) in grad.iter_mut().enumerate() {
                // w - h(e_j - w) stays feasible iff w_j >= h/(1+h)
                let fwd = f(&along(&w, j, h))?;
                let central = w[j] * (T::one() + h) >= h;
                let bwd = if central { f(&along(&w, j, -h))? } else { ExtReal::NegInf };
                *gj = match (fwd, bwd) {
                    (ExtReal::Finite(p), ExtReal::Finite(m)) => (p - m) / (h + h),
                    (ExtReal::Finite(p), ExtReal::NegInf) => (p - fw) / h,
                    (ExtReal::NegInf, ExtReal::Finite(m)) => (fw - m) / h,
                    _ => T::lit(-1e6),
                };
            }
            let mut improved = false;
            step = step + step;
            while step > T::tol(1e-12) {
                let trial: Vec<T> = w.iter().zip(&grad).map(|(&x, &g)| x + step * g).collect();
                let cand = project_simplex(&trial);
                let gain: T = grad.iter().zip(cand.iter().zip(&w)).map(|(&g, (&c, &x))| g * (c - x)).sum();
                if gain <= T::tol(1e-14) {
                    break;
                }
                if let ExtReal::Finite(fc) = f(&cand)? {
                    if fc >= fw + opts.armijo * gain {
                        w = cand;
                        fw = fc;
                        improved = true;
                        break;
                    }
                }
                step = step * T::lit(0.5);
            }
            if !improved {
                break;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| fw > *b) {
            best = Some((fw, w));
        }
    }
    let (value, w) = best.expect("at least one start");
    Ok((value, mix(&w, &live)?))
}

/// `max_{μ ∈ M_α} μ(φ) + S(μ)` with `S` supplied by `entropy_oracle`.
pub fn reconstruct_lambda<T: Real + Serialize>(
    a: &TransferMatrix<T>,
    phi: &Potential<T>,
    entropy_oracle: impl Fn(&Measure<T>) -> Result<ExtReal<T>>,
) -> Result<T> {
    if phi.len() != a.n_states() {
        return Err(Error::Dimension("potential and operator sizes differ".into()));
    }
    let vertices: Vec<Measure<T>> = ergodic_measures(a.system()).into_iter().map(|m| m.into_measure()).collect();
    let objective = |m: &Measure<T>| -> Result<ExtReal<T>> { Ok(entropy_oracle(m)? + m.integrate(phi.values())) };
    maximize_over_hull(&vertices, objective, &HullOptions::default()).map(|(v, _)| v)
}

/// Both sides of `λ(φ) = max_{μ ∈ M_α} (μ(φ) + τ(μ))` plus the Young
/// residual at the equilibrium measure.
#[derive(Clone, Debug, Serialize)]
pub struct VariationalReport<T: Real + Serialize> {
    pub lambda: ExtReal<T>,
    pub hull_max: ExtReal<T>,
    pub gap: ExtReal<T>,
    pub maximizer: Option<Vec<T>>,
    pub equilibrium: Option<Vec<T>>,
    /// `λ(φ) − μ*(φ) − τ(μ*)` at the equilibrium measure `μ*`.
    pub young_residual: Option<T>,
    pub equilibrium_tau: Option<TauResult<T>>,
}

/// Evaluates the variational principle with `τ` from [`t_entropy`].
/// When `λ(φ) = −∞` no invariant measure has finite `τ` and both sides are
/// reported as `−∞`.
pub fn variational_check<T: Real + Serialize>(
    a: &TransferMatrix<T>,
    phi: &Potential<T>,
    n_max: usize,
) -> Result<VariationalReport<T>> {
    let res = spectral_potential(a, phi)?;
    let lambda = res.lambda;
    let vertices: Vec<Measure<T>> = ergodic_measures(a.system()).into_iter().map(|m| m.into_measure()).collect();
    let objective = |m: &Measure<T>| -> Result<ExtReal<T>> { Ok(t_entropy(a, m, n_max)?.value + m.integrate(phi.values())) };
    let (hull_max, maximizer) = match maximize_over_hull(&vertices, objective, &HullOptions::default()) {
        Ok((v, m)) => (ExtReal::Finite(v), Some(m.weights().to_vec())),
        Err(Error::NoFeasibleMeasure) => (ExtReal::NegInf, None),
        Err(e) => return Err(e),
    };
    let gap = match (lambda, hull_max) {
        (ExtReal::NegInf, ExtReal::NegInf) => ExtReal::Finite(T::zero()),
        (ExtReal::Finite(l), ExtReal::Finite(h)) => ExtReal::Finite((l - h).abs()),
        _ => ExtReal::NegInf,
    };
    let (equilibrium, young_residual, equilibrium_tau) = match equilibrium_from(&res) {
        Ok(mu) => {
            let tau = t_entropy(a, &mu, n_max)?;
            let residual = match (lambda, tau.value) {
                (ExtReal::Finite(l), ExtReal::Finite(t)) => Some(l - mu.integrate(phi.values()) - t),
                _ => None,
            };
            (Some(mu.weights().to_vec()), residual, Some(tau))
        }
        Err(Error::Nilpotent | Error::NonUniqueEquilibrium { .. }) => (None, None, None),
        Err(e) => return Err(e),
    };
    Ok(VariationalReport { lambda, hull_max, gap, maximizer, equilibrium, young_residual, equilibrium_tau })
}

//! Empirical measures along orbits, the sets of points whose empirical
//! measures stay near a target, and the growth of `A^n` on those sets.
//!
//! Neighborhoods are total-variation balls. Cycle measures have disjoint
//! supports, so distances to and within the invariant polytope reduce to
//! one-dimensional problems per cycle.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{ExtReal, Real};
use crate::systems::{cycle_decomposition, hull_coordinates, is_invariant, CycleDecomposition, FiniteMapSystem, Measure, TransferMatrix};
use crate::tentropy::t_entropy;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalMeasure<T> {
    pub base_point: usize,
    pub length: usize,
    /// Visit counts; `weights = counts / length`.
    pub counts: Vec<usize>,
    pub weights: Vec<T>,
}

impl<T: Real> EmpiricalMeasure<T> {
    pub fn measure(&self) -> Measure<T> {
        Measure::new(self.weights.clone()).expect("empirical weights are normalized")
    }
}

fn weights_from_counts<T: Real>(counts: &[usize], n: usize) -> Vec<T> {
    let len = T::lit(n as f64);
    counts.iter().map(|&c| T::lit(c as f64) / len).collect()
}

/// `δ_{x,n} = (1/n) Σ_{i<n} δ_{α^i x}`.
pub fn empirical_measure<T: Real>(system: &FiniteMapSystem, x: usize, n: usize) -> Result<EmpiricalMeasure<T>> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if x >= system.n_states() {
        return Err(Error::Dimension(format!("state {x} out of range")));
    }
    let mut counts = vec![0; system.n_states()];
    let mut y = x;
    for _ in 0..n {
        counts[y] += 1;
        y = system.apply(y);
    }
    Ok(EmpiricalMeasure { base_point: x, length: n, weights: weights_from_counts(&counts, n), counts })
}

/// `{x : TV(δ_{x,n}, μ) < radius}`; a radius of at least one admits every
/// state, including those at the maximal distance one.
pub fn hitting_set<T: Real>(system: &FiniteMapSystem, mu: &Measure<T>, radius: T, n: usize) -> Result<Vec<usize>> {
    if !(radius > T::zero()) {
        return Err(Error::Domain(format!("radius must be positive, got {radius}")));
    }
    if mu.len() != system.n_states() {
        return Err(Error::Dimension("measure and system sizes differ".into()));
    }
    let mut out = Vec::new();
    for x in 0..system.n_states() {
        let e = empirical_measure::<T>(system, x, n)?;
        if radius >= T::one() || crate::systems::tv_distance(&e.weights, mu.weights()) < radius {
            out.push(x);
        }
    }
    Ok(out)
}

/// Total-variation distance from `nu` to the convex hull of the cycle
/// measures.
///
/// A hull point with weights `w` differs from `nu` by
/// `½ (ν(transient) + Σ_c Σ_{x∈c} |ν_x − w_c/|c||)`; each cycle term is
/// convex piecewise linear in `w_c`, so filling the unit budget along the
/// cheapest slopes first is optimal.
pub fn distance_to_hull<T: Real>(nu: &[T], dec: &CycleDecomposition) -> T {
    let transient: T = dec.transient.iter().map(|&x| nu[x]).sum();
    // (slope, length) pieces of every cycle term; the last piece is unbounded
    let mut pieces: Vec<(T, T)> = Vec::new();
    let mut base = transient;
    for cycle in &dec.cycles {
        let len = T::lit(cycle.len() as f64);
        let inv = T::one() / len;
        let mut breaks: Vec<T> = cycle.iter().map(|&x| nu[x] * len).collect();
        breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite weights"));
        base = base + cycle.iter().map(|&x| nu[x]).sum::<T>();
        // slope before the k-th breakpoint: (k − (N − k)) / N
        let mut prev = T::zero();
        for (k, &b) in breaks.iter().enumerate() {
            let slope = T::lit((2 * k) as f64 - cycle.len() as f64) * inv;
            if b > prev {
                pieces.push((slope, b - prev));
            }
            prev = prev.max(b);
        }
        pieces.push((T::one(), T::infinity()));
    }
    pieces.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite slopes"));
    let mut budget = T::one();
    let mut total = base;
    for (slope, len) in pieces {
        if budget <= T::zero() {
            break;
        }
        let take = budget.min(len);
        total = total + slope * take;
        budget = budget - take;
    }
    (total * T::lit(0.5)).max(T::zero())
}

/// Smallest `N` with `TV(δ_{x,n}, M_α) < radius` for all `x` and `n > N`.
///
/// An orbit with `T` transient steps on a cycle of period `N` satisfies
/// `TV(δ_{x,n}, μ_cycle) <= (T + N − 1)/n`, so only `n` up to
/// `(T_max + N_max − 1)/radius` need checking.
pub fn invariant_absorption_check<T: Real>(system: &FiniteMapSystem, radius: T) -> Result<usize> {
    if !(radius > T::zero()) {
        return Err(Error::Domain(format!("radius must be positive, got {radius}")));
    }
    let dec = cycle_decomposition(system);
    let depth = system.transient_depth().into_iter().max().unwrap_or(0);
    let horizon = ((T::lit((depth + dec.max_period() - 1) as f64) / radius).floor().to_f64_lossy()) as usize;
    let k = system.n_states();
    let mut counts = vec![vec![0usize; k]; k];
    let mut pos: Vec<usize> = (0..k).collect();
    let mut n_star = 0;
    for n in 1..=horizon {
        for x in 0..k {
            counts[x][pos[x]] += 1;
            pos[x] = system.apply(pos[x]);
        }
        let bad = (0..k).any(|x| distance_to_hull::<T>(&weights_from_counts(&counts[x], n), &dec) >= radius);
        if bad {
            n_star = n;
        }
    }
    Ok(n_star)
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport<T: Real + Serialize> {
    pub target_mu: Vec<T>,
    pub radius: T,
    /// `(n, (1/n) ln ‖A^n χ_n‖_∞)`.
    pub rates: Vec<(usize, ExtReal<T>)>,
    pub hitting_set_sizes: Vec<usize>,
    /// Least-squares slope of `ln ‖A^n χ_n‖` over the last third of `n`.
    pub fitted_rate: ExtReal<T>,
    /// `max τ(ν)` over invariant `ν` with `TV(ν, μ) <= radius + slack`.
    pub bound_t: ExtReal<T>,
    /// Distance an orbit's empirical measure may sit from its limit cycle
    /// measure at the start of the fitting window.
    pub slack: T,
    pub tau_mu: ExtReal<T>,
    pub within_bound: bool,
}

/// Margin by which the fitted rate may exceed `bound_t`.
pub const GROWTH_MARGIN: f64 = 0.05;

impl<T: Real + Serialize> GrowthReport<T> {
    /// `n,rate` lines with `-inf` for empty hitting sets.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,rate\n");
        for (n, r) in &self.rates {
            let _ = writeln!(out, "{n},{r}");
        }
        out
    }
}

/// `ln ‖A^n χ‖_∞`, renormalizing after every application.
fn log_growth<T: Real>(a: &TransferMatrix<T>, chi: &[T], n: usize) -> ExtReal<T> {
    let mut v = chi.to_vec();
    let mut log_acc = T::zero();
    for _ in 0..n {
        v = a.apply(&v);
        let c = v.iter().copied().fold(T::zero(), T::max);
        if c == T::zero() {
            return ExtReal::NegInf;
        }
        log_acc = log_acc + c.ln();
        for x in v.iter_mut() {
            *x = *x / c;
        }
    }
    ExtReal::Finite(log_acc)
}

/// Points in the fitting window: the last third, and at least two.
fn tail_len(m: usize) -> usize {
    m.div_ceil(3).max(2.min(m))
}

fn tail_slope<T: Real>(points: &[(usize, ExtReal<T>)]) -> ExtReal<T> {
    let tail: Vec<(T, T)> = points[points.len() - tail_len(points.len())..]
        .iter()
        .filter_map(|&(n, v)| v.value().map(|v| (T::lit(n as f64), v)))
        .collect();
    match tail.len() {
        0 => ExtReal::NegInf,
        1 => ExtReal::Finite(tail[0].1 / tail[0].0),
        m => {
            let m = T::lit(m as f64);
            let mx = tail.iter().map(|p| p.0).sum::<T>() / m;
            let my = tail.iter().map(|p| p.1).sum::<T>() / m;
            let sxy: T = tail.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
            let sxx: T = tail.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
            ExtReal::Finite(sxy / sxx)
        }
    }
}

/// `max Σ w_c τ_c` over hull weights with `½‖w − m‖₁ <= budget`: move mass
/// from the lowest-entropy cycles to the highest.
fn max_tau_in_ball<T: Real>(tau: &[ExtReal<T>], m: &[T], budget: T) -> ExtReal<T> {
    let Some(best) = (0..tau.len()).max_by(|&a, &b| tau[a].partial_cmp(&tau[b]).expect("ordered")) else {
        return ExtReal::NegInf;
    };
    let mut w = m.to_vec();
    let mut order: Vec<usize> = (0..tau.len()).filter(|&c| c != best).collect();
    order.sort_by(|&a, &b| tau[a].partial_cmp(&tau[b]).expect("ordered"));
    let mut left = budget;
    for c in order {
        if left <= T::zero() {
            break;
        }
        let moved = w[c].min(left);
        w[c] = w[c] - moved;
        w[best] = w[best] + moved;
        left = left - moved;
    }
    tau.iter().zip(&w).map(|(t, &wc)| t.scale(wc)).sum()
}

/// Growth of `A^n` on the indicator of the hitting set of the TV-ball of
/// `radius` around the invariant measure `mu`, against the entropy bound
/// over that ball.
pub fn entropy_statistic_check<T: Real + Serialize>(
    a: &TransferMatrix<T>,
    mu: &Measure<T>,
    radius: T,
    n_range: &[usize],
) -> Result<GrowthReport<T>> {
    let system = a.system();
    if !is_invariant(mu, system) {
        return Err(Error::Domain("target measure is not invariant".into()));
    }
    if n_range.is_empty() || n_range.contains(&0) {
        return Err(Error::Domain("n_range must be non-empty with n >= 1".into()));
    }
    let mut ns = n_range.to_vec();
    ns.sort_unstable();
    ns.dedup();

    let k = a.n_states();
    let mut rates = Vec::with_capacity(ns.len());
    let mut logs = Vec::with_capacity(ns.len());
    let mut sizes = Vec::with_capacity(ns.len());
    for &n in &ns {
        let set = hitting_set(system, mu, radius, n)?;
        sizes.push(set.len());
        let mut chi = vec![T::zero(); k];
        for &x in &set {
            chi[x] = T::one();
        }
        let g = if set.is_empty() { ExtReal::NegInf } else { log_growth(a, &chi, n) };
        logs.push((n, g));
        rates.push((n, g.scale(T::one() / T::lit(n as f64))));
    }
    let fitted_rate = tail_slope(&logs);

    let dec = cycle_decomposition(system);
    let depth = system.transient_depth().into_iter().max().unwrap_or(0);
    let tail_start = ns[ns.len() - tail_len(ns.len())];
    let slack = T::lit((depth + dec.max_period() - 1) as f64) / T::lit(tail_start as f64);
    let n_max = ns[ns.len() - 1].clamp(4, 32);
    let mut tau = Vec::with_capacity(dec.cycles.len());
    for cycle in &dec.cycles {
        tau.push(t_entropy(a, &Measure::uniform_on(k, cycle), n_max)?.value);
    }
    let coords = hull_coordinates(mu, &dec);
    let bound_t = max_tau_in_ball(&tau, &coords, radius + slack);
    let tau_mu = t_entropy(a, mu, n_max)?.value;
    let within_bound = match (fitted_rate, bound_t) {
        (ExtReal::NegInf, _) => true,
        (ExtReal::Finite(_), ExtReal::NegInf) => false,
        (ExtReal::Finite(f), ExtReal::Finite(b)) => f <= b + T::lit(GROWTH_MARGIN),
    };
    Ok(GrowthReport {
        target_mu: mu.weights().to_vec(),
        radius,
        rates,
        hitting_set_sizes: sizes,
        fitted_rate,
        bound_t,
        slack,
        tau_mu,
        within_bound,
    })
}

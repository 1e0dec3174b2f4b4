//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the summary is
//! always printed.

mod common;

use std::time::{Duration, Instant};

use common::{random_invariant, random_potential, random_system, transfer, vertices};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_thermo::empirical::entropy_statistic_check;
use spectral_thermo::legendre::{dual_entropy, variational_check};
use spectral_thermo::lpshift::{lp_log_norm_routes, lp_spectral_radius, transfer_from_measure};
use spectral_thermo::markov::{
    latushkin_stepin_radius, log_weights, pressure, tmc_dual_entropy_check, MarkovMeasure, PotentialDepth,
    TmcDualOptions, VpOptions,
};
use spectral_thermo::spectral::{lambda, spectral_potential_ext};
use spectral_thermo::systems::{cycle_decomposition, is_invariant};
use spectral_thermo::tentropy::{t_entropy, tau_n, tau_n_partition};
use spectral_thermo::{
    Ext64, FiniteMapSystem, FiniteMeasureSystem, MarkovShiftSystem, Matrix, Measure64, PartitionOfUnity, Potential64,
    TransferMatrix64, WeightedShift,
};

const N_MAX: usize = 16;

type Criterion = (&'static str, fn(&mut Verdict));

struct Verdict {
    failures: Vec<String>,
    checks: usize,
    note: String,
}

impl Verdict {
    fn new() -> Self {
        Self { failures: Vec::new(), checks: 0, note: String::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }
}

fn lam(a: &TransferMatrix64, phi: &[f64]) -> Ext64 {
    lambda(a, &Potential64::new(phi.to_vec()).unwrap()).unwrap()
}

fn lam_f(a: &TransferMatrix64, phi: &[f64]) -> f64 {
    lam(a, phi).value().expect("finite spectral potential")
}

fn tau(a: &TransferMatrix64, mu: &Measure64) -> Ext64 {
    t_entropy(a, mu, N_MAX).unwrap().value
}

fn cycle_average(a: &TransferMatrix64, cycle: &[usize]) -> f64 {
    let psi = a.weights();
    cycle.iter().map(|&x| psi[x].ln()).sum::<f64>() / cycle.len() as f64
}

fn ext_close(x: Ext64, y: Ext64, tol: f64) -> bool {
    match (x, y) {
        (Ext64::Finite(a), Ext64::Finite(b)) => (a - b).abs() <= tol,
        (Ext64::NegInf, Ext64::NegInf) => true,
        _ => false,
    }
}

/// Periodic-orbit t-entropy on 200 random systems.
fn periodic_orbit(v: &mut Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    for s in 0..200 {
        let a = random_system(&mut rng, 8, 0.2, 5.0);
        let dec = cycle_decomposition(a.system());
        for c in &dec.cycles {
            let mu = Measure64::uniform_on(a.n_states(), c);
            let got = tau(&a, &mu);
            let want = cycle_average(&a, c);
            v.check(got.value().is_some_and(|g| (g - want).abs() <= 1e-6), || {
                format!("system {s} cycle {c:?}: tau {got:?} vs {want}")
            });
        }
    }
    let took = start.elapsed();
    v.check(took <= Duration::from_secs(30), || format!("runtime {took:?} > 30 s"));
    v.note = format!("{:.2} s", took.as_secs_f64());
}

/// Variational principle with Young certificate on 100 random systems.
fn variational_principle(v: &mut Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let mut worst_gap: f64 = 0.0;
    let mut worst_young: f64 = 0.0;
    for s in 0..100 {
        let a = random_system(&mut rng, 8, 0.2, 5.0);
        let phi = random_potential(&mut rng, a.n_states(), 2.0);
        let r = variational_check(&a, &phi, N_MAX).unwrap();
        let gap = r.gap.value().unwrap_or(f64::INFINITY);
        worst_gap = worst_gap.max(gap);
        v.check(gap <= 1e-3, || format!("system {s}: gap {:?}", r.gap));
        match r.young_residual {
            Some(y) => {
                worst_young = worst_young.max(y.abs());
                v.check(y.abs() <= 1e-4, || format!("system {s}: Young residual {y}"));
            }
            None => v.check(false, || format!("system {s}: no unique equilibrium to certify")),
        }
    }
    let took = start.elapsed();
    v.check(took <= Duration::from_secs(120), || format!("runtime {took:?} > 2 min"));
    v.note = format!("max gap {worst_gap:.1e}, max Young {worst_young:.1e}, {:.2} s", took.as_secs_f64());
}

/// `τ = S` on cycle measures and 20 random hull points per system.
fn duality(v: &mut Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for s in 0..40 {
        let a = random_system(&mut rng, 6, 0.2, 5.0);
        let mut measures = vertices(&a);
        measures.extend((0..20).map(|_| random_invariant(&mut rng, &a)));
        for (k, mu) in measures.iter().enumerate() {
            let t = tau(&a, mu);
            let d = dual_entropy(&a, mu).unwrap().value;
            if let (Ext64::Finite(x), Ext64::Finite(y)) = (t, d) {
                worst = worst.max((x - y).abs());
            }
            v.check(ext_close(t, d, 1e-3), || format!("system {s} measure {k}: tau {t:?} vs S {d:?}"));
        }
    }
    v.note = format!("max |tau - S| {worst:.1e}");
}

/// The spectral-potential property suite on 500 random instances.
fn spectral_properties(v: &mut Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for s in 0..500 {
        let a = random_system(&mut rng, 8, 0.2, 5.0);
        let n = a.n_states();
        let phi = random_potential(&mut rng, n, 3.0);
        let psi = random_potential(&mut rng, n, 3.0);
        let (phi, psi) = (phi.values(), psi.values());
        let (lp, lq) = (lam_f(&a, phi), lam_f(&a, psi));

        let above: Vec<f64> = phi.iter().map(|x| x + rng.gen_range(0.0..1.0)).collect();
        v.check(lp <= lam_f(&a, &above), || format!("instance {s}: monotonicity"));

        let c = rng.gen_range(-10.0..10.0);
        let shifted: Vec<f64> = phi.iter().map(|x| x + c).collect();
        v.check((lam_f(&a, &shifted) - lp - c).abs() <= 1e-10, || format!("instance {s}: homogeneity"));

        let plain: Vec<f64> = phi.iter().zip(psi).map(|(x, y)| x + y).collect();
        let composed: Vec<f64> = phi.iter().zip(a.system().compose(psi)).map(|(x, y)| x + y).collect();
        v.check((lam_f(&a, &plain) - lam_f(&a, &composed)).abs() <= 1e-8, || format!("instance {s}: alpha-invariance"));

        let t: f64 = rng.gen_range(0.0..=1.0);
        let mix: Vec<f64> = phi.iter().zip(psi).map(|(x, y)| t * x + (1.0 - t) * y).collect();
        v.check(lam_f(&a, &mix) <= t * lp + (1.0 - t) * lq + 1e-10, || format!("instance {s}: convexity"));

        let dist = phi.iter().zip(psi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        v.check((lp - lq).abs() <= dist + 1e-10, || format!("instance {s}: Lipschitz"));
    }
}

/// `λ(φ) >= μ(φ) + τ(μ)` for sampled invariant measures.
fn lower_estimate(v: &mut Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in 0..100 {
        let a = random_system(&mut rng, 8, 0.2, 5.0);
        let phi = random_potential(&mut rng, a.n_states(), 2.0);
        let l = lam_f(&a, phi.values());
        let mut measures = vertices(&a);
        measures.extend((0..5).map(|_| random_invariant(&mut rng, &a)));
        for (k, mu) in measures.iter().enumerate() {
            let t = tau(&a, mu);
            let rhs = t + mu.integrate(phi.values());
            v.check(rhs <= Ext64::Finite(l + 1e-8), || format!("system {s} measure {k}: {l} < {rhs:?}"));
        }
    }
}

/// Subadditivity of `τ_n` and concavity of `τ` on random segments.
fn subadditive_concave(v: &mut Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for s in 0..100 {
        let a = random_system(&mut rng, 8, 0.2, 5.0);
        let m1 = random_invariant(&mut rng, &a);
        let m2 = random_invariant(&mut rng, &a);
        let t: f64 = rng.gen_range(0.0..=1.0);
        let mix = Measure64::mix(&[t, 1.0 - t], &[&m1, &m2]).unwrap();
        for (name, mu) in [("m1", &m1), ("m2", &m2), ("mix", &mix)] {
            let r = t_entropy(&a, mu, N_MAX).unwrap();
            v.check(r.subadditivity_violations == Some(0), || {
                format!("system {s} {name}: subadditivity violations {:?}", r.subadditivity_violations)
            });
        }
        let (x, y, z) = (tau(&a, &m1), tau(&a, &m2), tau(&a, &mix));
        if let (Ext64::Finite(x), Ext64::Finite(y)) = (x, y) {
            let bound = t * x + (1.0 - t) * y - 1e-6;
            v.check(z >= Ext64::Finite(bound), || format!("system {s}: concavity {z:?} < {bound}"));
        }
    }
}

/// Golden tests on the full 2-shift and the golden-mean shift.
fn tmc_golden(v: &mut Verdict) {
    let full = MarkovShiftSystem::<f64>::from_01(&[vec![1, 1], vec![1, 1]]).unwrap();
    let half = Matrix::from_fn(2, 2, |_, _| 0.5);
    let log_half = log_weights(&half);

    let l0 = pressure(&full, &log_half).unwrap();
    v.check(l0 == Ext64::Finite(0.0), || format!("lambda(0) = {l0:?}, not 0"));

    let mut worst: f64 = 0.0;
    for k in 1..=9 {
        let q = k as f64 / 10.0;
        let mm = MarkovMeasure::bernoulli(q).unwrap();
        let r = tmc_dual_entropy_check(&full, &log_half, &mm, PotentialDepth::Two, &TmcDualOptions::default()).unwrap();
        let h = -q * q.ln() - (1.0 - q) * (1.0 - q).ln();
        let want = h - 2f64.ln();
        let got = r.legendre_value.value().unwrap_or(f64::NEG_INFINITY);
        worst = worst.max((got - want).abs());
        v.check((got - want).abs() <= 1e-3, || format!("Bernoulli({q}): {got} vs {want}"));
    }

    let ones = Matrix::from_fn(2, 2, |_, _| Ext64::Finite(0.0));
    let opts = VpOptions { seed: 7, ..VpOptions::default() };
    let ls = latushkin_stepin_radius(&full, &ones, &half, 1.0, &opts).unwrap();
    v.check(ext_close(ls.lhs, Ext64::Finite(0.0), 1e-3) && ext_close(ls.rhs, Ext64::Finite(0.0), 1e-3), || {
        format!("Latushkin-Stepin lhs {:?} rhs {:?}", ls.lhs, ls.rhs)
    });

    let golden = MarkovShiftSystem::<f64>::from_01(&[vec![1, 1], vec![1, 0]]).unwrap();
    let p = pressure(&golden, &Matrix::from_fn(2, 2, |_, _| Ext64::Finite(0.0))).unwrap();
    let want = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    v.check(ext_close(p, Ext64::Finite(want), 1e-10), || format!("golden-mean pressure {p:?} vs {want}"));
    v.note = format!("max Bernoulli gap {worst:.1e}");
}

fn random_weighted_shift(rng: &mut ChaCha8Rng) -> WeightedShift<f64> {
    let n = rng.gen_range(1..=8);
    let beta = FiniteMapSystem::new((0..n).map(|_| rng.gen_range(0..n)).collect()).unwrap();
    let m = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
    let psi = (0..n).map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(-5.0..5.0) }).collect();
    let p = rng.gen_range(1.0..6.0);
    WeightedShift::new(FiniteMeasureSystem::new(m, beta).unwrap(), psi, p).unwrap()
}

/// L^p norm identity, p-scaling and the weighted-shift VP.
fn lp_identity(v: &mut Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_gap: f64 = 0.0;
    for s in 0..100 {
        let ws = random_weighted_shift(&mut rng);
        for n in 1..=32 {
            let (f, t) = lp_log_norm_routes(&ws, n).unwrap();
            // relative agreement of the norms is absolute agreement of their logs
            v.check(ext_close(f, t, 1e-10), || format!("system {s} n {n}: fiber {f:?} vs transfer {t:?}"));
        }
        let r = lp_spectral_radius(&ws, N_MAX).unwrap();
        let a = transfer_from_measure(ws.system()).unwrap();
        let pow: Vec<Ext64> = ws.log_abs_psi().iter().map(|l| l.scale(ws.p())).collect();
        let direct = spectral_potential_ext(a.entries(), &pow, &Default::default()).unwrap().lambda.scale(1.0 / ws.p());
        v.check(ext_close(r.log_radius, direct, 1e-10), || format!("system {s}: p-scaling {:?} vs {direct:?}", r.log_radius));
        if let Ext64::Finite(g) = r.gap {
            worst_gap = worst_gap.max(g.abs());
        }
        v.check(r.gap.value().is_some_and(|g| g.abs() <= 1e-3), || format!("system {s}: VP gap {:?}", r.gap));
    }
    v.note = format!("max VP gap {worst_gap:.1e}");
}

/// Entropy-statistic growth bound and the invertible case.
fn entropy_statistic(v: &mut Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ns: Vec<usize> = (1..=64).collect();
    for s in 0..100 {
        let a = random_system(&mut rng, 8, 0.2, 5.0);
        let mu = random_invariant(&mut rng, &a);
        let radius = rng.gen_range(0.05..0.6);
        let r = entropy_statistic_check(&a, &mu, radius, &ns).unwrap();
        v.check(r.within_bound, || format!("system {s}: fitted {:?} > bound {:?} + 0.05", r.fitted_rate, r.bound_t));
    }
    for s in 0..50 {
        let n = rng.gen_range(1..=8);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let a = transfer(perm, &vec![1.0; n]);
        let mu = random_invariant(&mut rng, &a);
        let radius = rng.gen_range(0.05..1.2);
        let r = entropy_statistic_check(&a, &mu, radius, &ns).unwrap();
        let ok = r.rates.iter().all(|(_, x)| *x <= Ext64::Finite(0.05)) && r.fitted_rate <= Ext64::Finite(0.05);
        v.check(ok, || format!("invertible system {s}: fitted {:?}", r.fitted_rate));
    }
}

/// Random soft partitions never beat the point partition.
fn point_partition(v: &mut Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for s in 0..1000 {
        let a = random_system(&mut rng, 6, 0.0, 5.0);
        let n = a.n_states();
        let k = rng.gen_range(1..=5);
        let raw: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let funcs = (0..k)
            .map(|i| (0..n).map(|x| raw[i][x] / raw.iter().map(|g| g[x]).sum::<f64>()).collect())
            .collect();
        let d = PartitionOfUnity::new(funcs).unwrap();
        let mu = if rng.gen_bool(0.5) {
            random_invariant(&mut rng, &a)
        } else {
            Measure64::normalized((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
        };
        let steps = rng.gen_range(1..=4);
        let soft = tau_n_partition(&a, &mu, &d, steps).unwrap();
        let point = tau_n(&a, &mu, steps).unwrap();
        v.check(soft >= point - 1e-10, || format!("partition {s}: soft {soft:?} < point {point:?}"));
    }
}

/// The VP with vanishing weights and the `-inf` conventions.
fn nonnegative_weights(v: &mut Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut both_inf = 0;
    for s in 0..100 {
        let n = rng.gen_range(1..=8);
        let map: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let psi: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.35) { 0.0 } else { rng.gen_range(0.2..5.0) }).collect();
        let a = transfer(map, &psi);
        let phi = random_potential(&mut rng, n, 2.0);
        let r = variational_check(&a, &phi, N_MAX).unwrap();
        let dead = cycle_decomposition(a.system()).cycles.iter().all(|c| c.iter().any(|&x| psi[x] == 0.0));
        if dead {
            both_inf += 1;
            v.check(r.lambda.is_neg_inf() && r.hull_max.is_neg_inf(), || {
                format!("system {s}: dead cycles but lambda {:?}, hull max {:?}", r.lambda, r.hull_max)
            });
        } else {
            v.check(r.gap.value().is_some_and(|g| g <= 1e-3), || format!("system {s}: gap {:?}", r.gap));
            if let Some(mu) = &r.maximizer {
                let mu = Measure64::new(mu.clone()).unwrap();
                v.check(is_invariant(&mu, a.system()), || format!("system {s}: maximizer not invariant"));
            }
        }
    }
    v.note = format!("{both_inf} systems with every cycle dead");
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("periodic-orbit t-entropy", periodic_orbit),
        ("variational principle", variational_principle),
        ("duality tau = S", duality),
        ("spectral-potential properties", spectral_properties),
        ("lower estimate", lower_estimate),
        ("subadditivity and concavity", subadditive_concave),
        ("TMC golden tests", tmc_golden),
        ("L^p identity", lp_identity),
        ("entropy statistic bound", entropy_statistic),
        ("point-partition minimality", point_partition),
        ("nonnegative-weight extension", nonnegative_weights),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let mut v = Verdict::new();
        run(&mut v);
        let status = if v.failures.is_empty() { "PASS" } else { "FAIL" };
        let note = if v.note.is_empty() { String::new() } else { format!("; {}", v.note) };
        println!("[{status}] criterion {:>2}: {name} ({} checks{note})", i + 1, v.checks);
        for f in v.failures.iter().take(5) {
            println!("         {f}");
        }
        if v.failures.len() > 5 {
            println!("         ... {} more", v.failures.len() - 5);
        }
        failed += usize::from(!v.failures.is_empty());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

use serde::Serialize;
use serde_json::{json, Map, Value};
use spectral_thermo::empirical::entropy_statistic_check;
use spectral_thermo::legendre::{dual_entropy_with, variational_check, DualOptions};
use spectral_thermo::lpshift::{lp_log_norm_routes, lp_spectral_radius};
use spectral_thermo::markov::{
    latushkin_stepin_radius, log_weights, pressure, ruelle_walters_check, tmc_dual_entropy_check, MarkovMeasure,
    PotentialDepth, TmcDualOptions, VpOptions,
};
use spectral_thermo::spectral::{equilibrium_measure, gelfand_sequence, spectral_potential};
use spectral_thermo::tentropy::{t_entropy_with, TauOptions};
use spectral_thermo::{
    BuiltSystem, Error, Ext64, Matrix64, MarkovShift64, Measure64, Potential64, SystemDescriptor64, TransferMatrix64,
    WeightedShift64,
};

use crate::config::{Command, JobConfig, Params, ValidationError};

pub const DEFAULT_N_MAX: usize = 32;
pub const DEFAULT_CHECK_TOL: f64 = 1e-3;
pub const DEFAULT_GROWTH_N: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NonConvergence,
}

#[derive(Clone, Debug, Serialize)]
pub struct Inputs {
    pub system: SystemDescriptor64,
    pub params: Params,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub status: Status,
    pub seed: Option<u64>,
    pub inputs: Inputs,
    pub result: Value,
    /// Whether the checked identity held within `params.tol`; absent for
    /// plain evaluations.
    pub passed: Option<bool>,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
    /// `n,rate` table used for CSV output of growth reports.
    #[serde(skip)]
    pub csv_table: Option<String>,
}

impl Report {
    /// Process exit status: 0 on success, 3 when a solver failed to
    /// converge or a checked identity missed its tolerance.
    pub fn exit_code(&self) -> i32 {
        if self.status == Status::Ok && self.passed != Some(false) {
            0
        } else {
            3
        }
    }
}

/// Flag values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_max: Option<usize>,
    pub tol: Option<f64>,
}

struct Outcome {
    result: Value,
    converged: bool,
    passed: Option<bool>,
    csv_table: Option<String>,
}

impl Outcome {
    fn value(result: Value) -> Self {
        Self { result, converged: true, passed: None, csv_table: None }
    }
}

enum Failure {
    Invalid(ValidationError),
    Numerical(String),
}

impl From<ValidationError> for Failure {
    fn from(e: ValidationError) -> Self {
        Failure::Invalid(e)
    }
}

/// Input errors from the core become validation errors on `field`; the rest
/// are numerical failures.
fn core_err(field: &str) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::Invalid { what, reason } => {
            let field = if field.starts_with("system") { format!("system.{what}") } else { field.to_string() };
            Failure::Invalid(ValidationError::new(field, reason))
        }
        Error::Dimension(m) | Error::Domain(m) => Failure::Invalid(ValidationError::new(field, m)),
        Error::Reducible => Failure::Invalid(ValidationError::new(field, e.to_string())),
        other => Failure::Numerical(other.to_string()),
    }
}

fn to_value<S: Serialize>(s: &S) -> Value {
    serde_json::to_value(s).expect("reports serialize to JSON")
}

fn require<'a, T>(v: &'a Option<T>, field: &str, cmd: Command) -> Result<&'a T, ValidationError> {
    v.as_ref()
        .ok_or_else(|| ValidationError::new(field, format!("required by {}", cmd.name())))
}

fn within(gap: Ext64, tol: f64) -> bool {
    gap.value().is_some_and(|g| g.abs() <= tol)
}

fn check_tol(tol: f64) -> Result<f64, ValidationError> {
    if tol.is_finite() && tol > 0.0 {
        Ok(tol)
    } else {
        Err(ValidationError::new("params.tol", format!("must be positive, got {tol}")))
    }
}

fn measure(mu: &[f64], n: usize) -> Result<Measure64, ValidationError> {
    if mu.len() != n {
        return Err(ValidationError::new("params.mu", format!("has length {}, system has {n} states", mu.len())));
    }
    Measure64::new(mu.to_vec()).map_err(|e| ValidationError::new("params.mu", e.to_string()))
}

fn potential(phi: &Option<Vec<f64>>, n: usize) -> Result<Potential64, ValidationError> {
    match phi {
        None => Ok(Potential64::zeros(n)),
        Some(v) if v.len() != n => {
            Err(ValidationError::new("params.phi", format!("has length {}, system has {n} states", v.len())))
        }
        Some(v) => Potential64::new(v.clone()).map_err(|e| ValidationError::new("params.phi", e.to_string())),
    }
}

fn square(rows: &[Vec<f64>], n: usize, field: &str) -> Result<Matrix64, ValidationError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(ValidationError::new(field, format!("must be a {n}x{n} matrix")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(ValidationError::new(field, "entries must be finite"));
    }
    Matrix64::from_rows(rows).map_err(|e| ValidationError::new(field, e.to_string()))
}

fn n_max(params: &Params) -> Result<usize, ValidationError> {
    let n = params.n_max.unwrap_or(DEFAULT_N_MAX);
    if n < 4 {
        return Err(ValidationError::new("params.n_max", format!("must be at least 4, got {n}")));
    }
    Ok(n)
}

fn wrong_kind(cmd: Command, want: &str, got: &SystemDescriptor64) -> ValidationError {
    ValidationError::new("system.kind", format!("{} needs a {want} system, got {}", cmd.name(), got.kind()))
}

/// Validates the config, runs the command and assembles the report.
/// Numerical failures still produce a report; only invalid input is an
/// error.
pub fn run(config: &JobConfig, overrides: &Overrides) -> Result<Report, ValidationError> {
    let mut params = config.params.clone();
    if overrides.n_max.is_some() {
        params.n_max = overrides.n_max;
    }
    if overrides.tol.is_some() {
        params.tol = overrides.tol;
    }
    let seed = overrides.seed.or(config.seed);
    let cmd = config.command;
    if cmd.uses_multistart() && seed.is_none() {
        return Err(ValidationError::new("seed", format!("required by {} (multi-start optimizer)", cmd.name())));
    }
    let built = config.system.build().map_err(|e| match e {
        Error::Invalid { what, reason } => ValidationError::new(format!("system.{what}"), reason),
        other => ValidationError::new("system", other.to_string()),
    })?;

    let outcome = match (&built, cmd) {
        (BuiltSystem::FiniteMap(a), Command::EvalLambda) => eval_lambda(a, &mut params),
        (BuiltSystem::FiniteMap(a), Command::TEntropy) => t_entropy_cmd(a, &mut params),
        (BuiltSystem::FiniteMap(a), Command::DualEntropy) => dual_entropy_cmd(a, &mut params),
        (BuiltSystem::FiniteMap(a), Command::VariationalCheck) => variational_cmd(a, &mut params),
        (BuiltSystem::FiniteMap(a), Command::EntropyStatistic) => entropy_statistic_cmd(a, &mut params),
        (BuiltSystem::MarkovShift { shift, .. }, Command::DualEntropy) => tmc_dual_cmd(shift, &mut params, cmd),
        (BuiltSystem::MarkovShift { shift, .. }, Command::Pressure) => pressure_cmd(shift),
        (BuiltSystem::MarkovShift { shift, .. }, Command::RuelleWalters) => {
            ruelle_walters_cmd(shift, &mut params, seed.expect("checked above"))
        }
        (BuiltSystem::MarkovShift { shift, rho }, Command::LatushkinStepin) => {
            latushkin_stepin_cmd(shift, rho, &mut params, seed.expect("checked above"))
        }
        (BuiltSystem::MeasureSystem(ws), Command::LpRadius) => lp_radius_cmd(ws, &mut params),
        (_, Command::EvalLambda | Command::TEntropy | Command::VariationalCheck | Command::EntropyStatistic) => {
            return Err(wrong_kind(cmd, "finite_map", &config.system))
        }
        (_, Command::DualEntropy) => return Err(wrong_kind(cmd, "finite_map or markov_shift", &config.system)),
        (_, Command::Pressure | Command::RuelleWalters | Command::LatushkinStepin) => {
            return Err(wrong_kind(cmd, "markov_shift", &config.system))
        }
        (_, Command::LpRadius) => return Err(wrong_kind(cmd, "measure_system", &config.system)),
    };

    let inputs = Inputs { system: config.system.clone(), params };
    let mut report = Report {
        command: cmd.name(),
        status: Status::Ok,
        seed,
        inputs,
        result: Value::Null,
        passed: None,
        error: None,
        timing: None,
        csv_table: None,
    };
    match outcome {
        Ok(o) => {
            report.result = o.result;
            report.passed = o.passed;
            report.csv_table = o.csv_table;
            if !o.converged {
                report.status = Status::NonConvergence;
            }
        }
        Err(Failure::Invalid(e)) => return Err(e),
        Err(Failure::Numerical(msg)) => {
            report.status = Status::NonConvergence;
            report.error = Some(msg);
        }
    }
    Ok(report)
}

fn eval_lambda(a: &TransferMatrix64, params: &mut Params) -> Result<Outcome, Failure> {
    let n = a.n_states();
    let phi = potential(&params.phi, n)?;
    let n_max = n_max(params)?;
    params.n_max = Some(n_max);
    let res = spectral_potential(a, &phi).map_err(core_err("params.phi"))?;
    let equilibrium = match equilibrium_measure(a, &phi) {
        Ok(m) => Some(m.weights().to_vec()),
        Err(Error::NonUniqueEquilibrium { .. } | Error::Nilpotent) => None,
        Err(e) => return Err(core_err("params.phi")(e)),
    };
    let gelfand = gelfand_sequence(a, &phi, n_max).map_err(core_err("params.n_max"))?;
    let mut out = to_value(&res);
    let obj = out.as_object_mut().expect("struct serializes to an object");
    obj.insert("equilibrium".into(), to_value(&equilibrium));
    obj.insert("gelfand_sequence".into(), to_value(&gelfand));
    Ok(Outcome::value(out))
}

fn t_entropy_cmd(a: &TransferMatrix64, params: &mut Params) -> Result<Outcome, Failure> {
    let mu = measure(require(&params.mu, "params.mu", Command::TEntropy)?, a.n_states())?;
    let n_max = n_max(params)?;
    let mut opts = TauOptions { n_max, ..TauOptions::default() };
    if let Some(tol) = params.tol {
        opts.doubling_tol = check_tol(tol)?;
    }
    params.n_max = Some(n_max);
    params.tol = Some(opts.doubling_tol);
    let res = t_entropy_with(a, &mu, &opts).map_err(core_err("params.mu"))?;
    Ok(Outcome { converged: res.converged, ..Outcome::value(to_value(&res)) })
}

fn dual_entropy_cmd(a: &TransferMatrix64, params: &mut Params) -> Result<Outcome, Failure> {
    let mu = measure(require(&params.mu, "params.mu", Command::DualEntropy)?, a.n_states())?;
    let mut opts = DualOptions::default();
    if let Some(tol) = params.tol {
        opts.tol = check_tol(tol)?;
    }
    params.tol = Some(opts.tol);
    let res = dual_entropy_with(a, &mu, &opts).map_err(core_err("params.mu"))?;
    Ok(Outcome { converged: res.converged, ..Outcome::value(to_value(&res)) })
}

fn variational_cmd(a: &TransferMatrix64, params: &mut Params) -> Result<Outcome, Failure> {
    let phi = potential(&params.phi, a.n_states())?;
    let n_max = n_max(params)?;
    let tol = check_tol(params.tol.unwrap_or(DEFAULT_CHECK_TOL))?;
    params.n_max = Some(n_max);
    params.tol = Some(tol);
    let res = variational_check(a, &phi, n_max).map_err(core_err("params.phi"))?;
    let passed = within(res.gap, tol) && res.young_residual.is_none_or(|y| y.abs() <= tol);
    Ok(Outcome { passed: Some(passed), ..Outcome::value(to_value(&res)) })
}

fn entropy_statistic_cmd(a: &TransferMatrix64, params: &mut Params) -> Result<Outcome, Failure> {
    let mu = measure(require(&params.mu, "params.mu", Command::EntropyStatistic)?, a.n_states())?;
    let radius = *require(&params.radius, "params.radius", Command::EntropyStatistic)?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(ValidationError::new("params.radius", format!("must be positive, got {radius}")).into());
    }
    let n_range = params.n_range.clone().unwrap_or_else(|| (1..=DEFAULT_GROWTH_N).collect());
    if n_range.is_empty() || n_range.contains(&0) {
        return Err(ValidationError::new("params.n_range", "must be non-empty with entries >= 1").into());
    }
    params.n_range = Some(n_range.clone());
    let res = entropy_statistic_check(a, &mu, radius, &n_range).map_err(core_err("params.mu"))?;
    Ok(Outcome { passed: Some(res.within_bound), csv_table: Some(res.to_csv()), ..Outcome::value(to_value(&res)) })
}

fn tmc_dual_cmd(shift: &MarkovShift64, params: &mut Params, cmd: Command) -> Result<Outcome, Failure> {
    let n = shift.n_symbols();
    let p = square(require(&params.transitions, "params.transitions", cmd)?, n, "params.transitions")?;
    let mm = MarkovMeasure::from_transitions(p).map_err(core_err("params.transitions"))?;
    let depth = PotentialDepth::from_k(params.depth.unwrap_or(2)).map_err(core_err("params.depth"))?;
    let tol = check_tol(params.tol.unwrap_or(DEFAULT_CHECK_TOL))?;
    params.depth = Some(match depth {
        PotentialDepth::One => 1,
        PotentialDepth::Two => 2,
    });
    params.tol = Some(tol);
    let rho = shift.branch_weights().expect("descriptor attaches rho");
    let res = tmc_dual_entropy_check(shift, &log_weights(rho), &mm, depth, &TmcDualOptions::default())
        .map_err(core_err("params.transitions"))?;
    Ok(Outcome { converged: res.converged, passed: Some(within(res.gap, tol)), ..Outcome::value(to_value(&res)) })
}

fn pressure_cmd(shift: &MarkovShift64) -> Result<Outcome, Failure> {
    let rho = shift.branch_weights().expect("descriptor attaches rho");
    let value = pressure(shift, &log_weights(rho)).map_err(core_err("system.rho"))?;
    Ok(Outcome::value(json!({ "pressure": value })))
}

fn vp_options(params: &mut Params, seed: u64) -> VpOptions {
    let opts = VpOptions { seed, random_starts: params.random_starts.unwrap_or(VpOptions::default().random_starts), ..VpOptions::default() };
    params.random_starts = Some(opts.random_starts);
    opts
}

fn ruelle_walters_cmd(shift: &MarkovShift64, params: &mut Params, seed: u64) -> Result<Outcome, Failure> {
    let tol = check_tol(params.tol.unwrap_or(DEFAULT_CHECK_TOL))?;
    params.tol = Some(tol);
    let opts = vp_options(params, seed);
    let rho = shift.branch_weights().expect("descriptor attaches rho");
    let res = ruelle_walters_check(shift, &log_weights(rho), &opts).map_err(core_err("system.adjacency"))?;
    Ok(Outcome { passed: Some(within(res.gap, tol)), ..Outcome::value(to_value(&res)) })
}

fn latushkin_stepin_cmd(
    shift: &MarkovShift64,
    rho: &Matrix64,
    params: &mut Params,
    seed: u64,
) -> Result<Outcome, Failure> {
    let n = shift.n_symbols();
    let p = params.p.unwrap_or(1.0);
    if !(p >= 1.0) || !p.is_finite() {
        return Err(ValidationError::new("params.p", format!("must be a finite number >= 1, got {p}")).into());
    }
    let a = match &params.a {
        Some(rows) => square(rows, n, "params.a")?,
        None => Matrix64::from_fn(n, n, |_, _| 1.0),
    };
    let log_abs_a = spectral_thermo::Matrix::from_fn(n, n, |i, j| Ext64::ln(a[(i, j)].abs()));
    let tol = check_tol(params.tol.unwrap_or(DEFAULT_CHECK_TOL))?;
    params.p = Some(p);
    params.tol = Some(tol);
    let opts = vp_options(params, seed);
    let res = latushkin_stepin_radius(shift, &log_abs_a, rho, p, &opts).map_err(core_err("system"))?;
    Ok(Outcome { passed: Some(within(res.gap, tol)), ..Outcome::value(to_value(&res)) })
}

fn lp_radius_cmd(ws: &WeightedShift64, params: &mut Params) -> Result<Outcome, Failure> {
    let n_max = n_max(params)?;
    let tol = check_tol(params.tol.unwrap_or(DEFAULT_CHECK_TOL))?;
    params.n_max = Some(n_max);
    params.tol = Some(tol);
    let res = lp_spectral_radius(ws, n_max).map_err(core_err("system"))?;
    let mut routes = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let (fiber, transfer) = lp_log_norm_routes(ws, n).map_err(core_err("system"))?;
        routes.push(json!({ "n": n, "log_norm_fiber": fiber, "log_norm_transfer": transfer }));
    }
    let mut out = to_value(&res);
    let obj: &mut Map<String, Value> = out.as_object_mut().expect("struct serializes to an object");
    obj.insert("norm_routes".into(), Value::Array(routes));
    Ok(Outcome { passed: Some(within(res.gap, tol)), ..Outcome::value(out) })
}

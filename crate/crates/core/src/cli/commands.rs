use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::config::{Method, RunConfig};
use super::{CliError, ExitStatus};
use crate::closed_form::{closed_form_problem, eizo_system, fgm_residual, mo_residual, ClosedForm};
use crate::error::Error;
use crate::indicators::{
    condition_terms, estimate_all, estimate_condition, sample_terms, stationarity_certificate, Allocation,
    IndicatorEstimate, Side,
};
use crate::joint_models::JointModel;
use crate::solvers::{
    mirror_descent_minimize, solve_asymptotic, solve_closed_form, sweep_model_parameter, SweepRow,
};
use crate::stream::for_each_sample;

pub struct CommandOutput {
    pub stdout: String,
    pub status: ExitStatus,
}

fn ok(stdout: String) -> CommandOutput {
    CommandOutput { stdout, status: ExitStatus::Success }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(value).expect("report serializes");
        std::fs::write(p, text + "\n").map_err(|e| CliError::config(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Serialize)]
struct AllocationReport {
    capitals: Vec<f64>,
    fractions: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stationarity_z: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SolveReport {
    model: &'static str,
    indicator: String,
    capital: f64,
    method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    closed_form: Option<AllocationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<AllocationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_gap: Option<f64>,
}

pub fn solve(cfg: &RunConfig, out: Option<&Path>) -> Result<CommandOutput, CliError> {
    let u = cfg.capital;
    let penalty = cfg.penalty();
    let mut report = SolveReport {
        model: cfg.model.kind(),
        indicator: cfg.indicator.to_string(),
        capital: u,
        method: cfg.method,
        closed_form: None,
        monte_carlo: None,
        oracle_gap: None,
    };
    let mut text = String::new();
    if matches!(cfg.method, Method::ClosedForm | Method::Both) {
        let s = solve_closed_form(&cfg.model, cfg.indicator, u, &penalty, &cfg.solver)?;
        let caps: Vec<f64> = s.fractions.iter().map(|f| f * u).collect();
        writeln!(text, "closed form   capitals: {}", fmt_vec(&caps)).unwrap();
        writeln!(text, "closed form   fractions: {}", fmt_vec(&s.fractions)).unwrap();
        writeln!(text, "closed form   residual norm: {:e}", s.residual_norm).unwrap();
        report.closed_form = Some(AllocationReport { capitals: caps, fractions: s.fractions, residual_norm: Some(s.residual_norm), stationarity_z: None });
    }
    if matches!(cfg.method, Method::MonteCarlo | Method::Both) {
        let a = mirror_descent_minimize(&cfg.model, u, cfg.indicator, &penalty, &cfg.mirror, cfg.seed)?;
        let z = match cfg.indicator.side() {
            Some(side) => Some(stationarity_certificate(&cfg.model, &a, side, cfg.samples, cfg.seed, cfg.validate.z_threshold)?.max_z),
            None => None,
        };
        writeln!(text, "monte carlo   capitals: {}", fmt_vec(a.capitals())).unwrap();
        writeln!(text, "monte carlo   fractions: {}", fmt_vec(&a.fractions())).unwrap();
        if let Some(z) = z {
            writeln!(text, "monte carlo   stationarity z: {z:.3}").unwrap();
        }
        report.monte_carlo = Some(AllocationReport { capitals: a.capitals().to_vec(), fractions: a.fractions(), residual_norm: None, stationarity_z: z });
    }
    if let (Some(c), Some(m)) = (&report.closed_form, &report.monte_carlo) {
        let gap = c.capitals.iter().zip(&m.capitals).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        writeln!(text, "oracle gap (max capital difference): {gap:.6}").unwrap();
        report.oracle_gap = Some(gap);
    }
    write_json(out, &report)?;
    Ok(ok(text))
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    capitals: Vec<f64>,
    samples: usize,
    seed: u64,
    i: IndicatorEstimate,
    j: IndicatorEstimate,
    i_loc: IndicatorEstimate,
    lower_conditions: Vec<IndicatorEstimate>,
    upper_conditions: Vec<IndicatorEstimate>,
}

pub fn estimate(cfg: &RunConfig, out: Option<&Path>) -> Result<CommandOutput, CliError> {
    let alloc = match cfg.allocation() {
        Some(a) => a?,
        None => match solve_closed_form(&cfg.model, cfg.indicator, cfg.capital, &cfg.penalty(), &cfg.solver) {
            Ok(s) => Allocation::from_fractions(&s.fractions, cfg.capital)?,
            Err(_) => Allocation::uniform(cfg.model.dim(), cfg.capital)?,
        },
    };
    let (n, seed) = (cfg.samples, cfg.seed);
    let t = estimate_all(&cfg.model, &alloc, &cfg.penalty(), n, seed)?;
    let cond = |side| -> Result<Vec<IndicatorEstimate>, Error> {
        (0..cfg.model.dim()).map(|i| estimate_condition(&cfg.model, i, &alloc, side, n, seed)).collect()
    };
    let report = EstimateReport {
        capitals: alloc.capitals().to_vec(),
        samples: n,
        seed,
        i: t.i,
        j: t.j,
        i_loc: t.i_loc,
        lower_conditions: cond(Side::Lower)?,
        upper_conditions: cond(Side::Upper)?,
    };
    let mut text = String::new();
    writeln!(text, "allocation: {}", fmt_vec(&report.capitals)).unwrap();
    for (name, e) in [("I", t.i), ("J", t.j), ("I_loc", t.i_loc)] {
        writeln!(text, "{name:<5} = {:.6} (se {:.2e}, n {})", e.value, e.std_error, e.n).unwrap();
    }
    for (k, (lo, up)) in report.lower_conditions.iter().zip(&report.upper_conditions).enumerate() {
        writeln!(text, "branch {}: P(X>u, S<=u) = {:.6} (se {:.1e}), P(X>u, S>u) = {:.6} (se {:.1e})", k + 1, lo.value, lo.std_error, up.value, up.std_error).unwrap();
    }
    write_json(out, &report)?;
    Ok(ok(text))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["parameter", "beta_frac", "residual_norm", "status"]).unwrap();
    for r in rows {
        let beta = r.beta_frac.map(|x| x.to_string()).unwrap_or_default();
        let norm = r.residual_norm.map(|x| format!("{x:e}")).unwrap_or_default();
        w.write_record([r.parameter.to_string(), beta, norm, r.status.to_string()]).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn sweep(cfg: &RunConfig, out: Option<&Path>) -> Result<CommandOutput, CliError> {
    let spec = cfg.sweep.as_ref().ok_or_else(|| CliError::config("sweep needs a \"sweep\" section in the config"))?;
    let grid = spec.grid.values()?;
    let rows = sweep_model_parameter(&cfg.model, &spec.parameter, &grid, cfg.capital, cfg.indicator, spec.hold_marginals, &cfg.solver);
    let csv = sweep_csv(&rows);
    let mut text = String::new();
    for r in &rows {
        if let crate::solvers::SweepStatus::Error(msg) = &r.status {
            eprintln!("grid point {}: {msg}", r.parameter);
        }
    }
    match out {
        Some(p) => {
            std::fs::write(p, &csv).map_err(|e| CliError::config(format!("cannot write {}: {e}", p.display())))?;
            writeln!(text, "wrote {} rows to {}", rows.len(), p.display()).unwrap();
        }
        None => text.push_str(&csv),
    }
    Ok(ok(text))
}

pub fn asymptotic(cfg: &RunConfig, out: Option<&Path>) -> Result<CommandOutput, CliError> {
    let s = solve_asymptotic(&cfg.model, cfg.indicator, &cfg.solver)?;
    let caps: Vec<f64> = s.fractions.iter().map(|f| f * cfg.capital).collect();
    let mut text = String::new();
    writeln!(text, "asymptotic fractions: {}", fmt_vec(&s.fractions)).unwrap();
    writeln!(text, "residual norm: {:e}", s.residual_norm).unwrap();
    write_json(out, &AllocationReport { capitals: caps, fractions: s.fractions, residual_norm: Some(s.residual_norm), stationarity_z: None })?;
    Ok(ok(text))
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        diff.abs() / se
    }
}

fn degeneracy_checks(model: &JointModel, u: f64) -> Vec<Check> {
    let grid: Vec<f64> = (1..=99).map(|k| k as f64 / 100.0).collect();
    let against = |rates: [f64; 2], f: &dyn Fn(f64) -> Result<f64, Error>| -> Result<f64, Error> {
        let sys = eizo_system(&rates, u)?;
        grid.iter().try_fold(0.0_f64, |w, &b| Ok(w.max((f(b)? - sys.residual(&[b, 1.0 - b])[0]).abs())))
    };
    let mut out = Vec::new();
    let mut push = |name: &str, r: Result<f64, Error>| {
        out.push(match r {
            Ok(w) => check(name, w <= 1e-9, format!("max deviation {w:.2e} on 99 points")),
            Err(e) => check(name, false, e.to_string()),
        })
    };
    let fgm = |b1: f64, b2: f64| move |b: f64| fgm_residual(b1, b2, 0.0, u, b);
    let mo = |l1: f64, l2: f64| move |b: f64| mo_residual(0.0, l1, l2, u, b);
    match model {
        JointModel::FgmExponential(m) => push("FGM at theta=0 is independence", against([m.beta1, m.beta2], &fgm(m.beta1, m.beta2))),
        JointModel::MarshallOlkin(m) if m.lambda1 != m.lambda2 => {
            push("common shock off is independence", against([m.lambda1, m.lambda2], &mo(m.lambda1, m.lambda2)))
        }
        JointModel::IndependentExponential(m) if m.rates.len() == 2 && m.rates[0] != m.rates[1] => {
            let (a, b) = (m.rates[0], m.rates[1]);
            if a < b / 2.0 {
                push("FGM at theta=0 is independence", against([a, b], &fgm(a, b)));
            }
            push("common shock off is independence", against([a, b], &mo(a, b)));
        }
        _ => {}
    }
    out
}

pub fn validation_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let (model, u, n, seed, z) = (&cfg.model, cfg.capital, cfg.samples, cfg.seed, cfg.validate.z_threshold);
    let penalty = cfg.penalty();
    let mut checks = Vec::new();

    match (closed_form_problem(model, cfg.indicator, u, &penalty), cfg.indicator.side()) {
        (Ok(problem), Some(side)) => {
            let root = solve_closed_form(model, cfg.indicator, u, &penalty, &cfg.solver)?;
            let alloc = Allocation::from_fractions(&root.fractions, u)?;
            let cert = stationarity_certificate(model, &alloc, side, n, seed, z)?;
            checks.push(check(
                "closed-form root is stationary under simulation",
                cert.max_z < z,
                format!("paired z = {:.3} (threshold {z})", cert.max_z),
            ));
            if let ClosedForm::System(sys) = problem {
                let probe = Allocation::uniform(model.dim(), u)?;
                let exact = sys.conditions(&probe.fractions());
                let mut worst: f64 = 0.0;
                for (i, c) in exact.iter().enumerate() {
                    let e = estimate_condition(model, i, &probe, side, n, seed)?;
                    worst = worst.max(z_score(e.value - c, e.std_error));
                }
                checks.push(check(
                    "closed-form conditions match simulation",
                    worst < z,
                    format!("worst z = {worst:.3} at the uniform allocation"),
                ));
            }
        }
        (Err(e), _) => checks.push(check("closed-form root is stationary under simulation", true, format!("skipped: {e}"))),
        (Ok(_), None) => {}
    }

    let alloc = Allocation::uniform(model.dim(), u)?;
    let mut additive = 0usize;
    let mut partition = 0usize;
    if model.has_finite_means() {
        for_each_sample(model, n, seed, |x| {
            let t = sample_terms(x, &alloc, &penalty);
            additive += (t.i + t.j != t.i_loc) as usize;
            for k in 0..x.len() {
                let (lo, up, ex) = condition_terms(x, k, &alloc);
                partition += ((lo as u8 + up as u8) != ex as u8) as usize;
            }
        });
        checks.push(check("I + J = I_loc per sample", additive == 0, format!("{additive} violations in {n} draws")));
    } else {
        for_each_sample(model, n, seed, |x| {
            for k in 0..x.len() {
                let (lo, up, ex) = condition_terms(x, k, &alloc);
                partition += ((lo as u8 + up as u8) != ex as u8) as usize;
            }
        });
    }
    checks.push(check("lower + upper = survival per sample", partition == 0, format!("{partition} violations in {n} draws")));
    checks.extend(degeneracy_checks(model, u));
    Ok(checks)
}

pub fn validate(cfg: &RunConfig, out: Option<&Path>) -> Result<CommandOutput, CliError> {
    let checks = validation_checks(cfg)?;
    let mut text = String::new();
    for c in &checks {
        writeln!(text, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail).unwrap();
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(text, "{} checks, {failed} failed", checks.len()).unwrap();
    write_json(out, &checks)?;
    Ok(CommandOutput { stdout: text, status: if failed == 0 { ExitStatus::Success } else { ExitStatus::Validation } })
}

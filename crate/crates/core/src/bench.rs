//! Monte-Carlo comparison of analytic and forward-difference sensitivities.
//!
//! Each scenario is one parameter vector `d` drawn by
//! [`ParametricJacobian::scenario_gen`]. The analytic method costs one SDP
//! solve plus the KKT linear algebra; forward differences at step `ε_p`
//! cost the same base solve plus one solve per parameter. Accuracy is the
//! degree `α = (1 − mean |a − n| / |a|) · 100` with the analytic value `a`
//! as reference.
//!
//! The base solve is refined (see [`SolveOptions::refined`]) because the
//! analytic sensitivity needs an accurate KKT point; the forward differences
//! reuse it, so its cost is charged to both methods.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdbase::{fd_gradient, FDConfig, DEFAULT_FD_STEPS};
use crate::sdpcore::{build_sdp, solve_sdp_with, SolveOptions, SolverStatus, DEFAULT_EPS, DEFAULT_TOL};
use crate::senscore::sens_params_at;
use crate::sysmodel::ParametricJacobian;

pub const DEFAULT_SCENARIOS: usize = 1000;
/// Caps the worker count of `--parallel` runs.
pub const THREADS_ENV: &str = "STABSENS_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub scenarios: usize,
    pub seed: u64,
    pub fd_steps: Vec<f64>,
    pub eps: f64,
    pub tol: f64,
    pub eta_bar: f64,
    pub exclude_degenerate: bool,
    /// Evaluate scenarios on a thread pool. Timings are then not comparable
    /// between methods and `r_t` should not be read as a speed-up.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            scenarios: DEFAULT_SCENARIOS,
            seed: 0,
            fd_steps: DEFAULT_FD_STEPS.to_vec(),
            eps: DEFAULT_EPS,
            tol: DEFAULT_TOL,
            eta_bar: 0.0,
            exclude_degenerate: true,
            parallel: false,
        }
    }
}

impl BenchConfig {
    fn validate(&self) -> Result<()> {
        if self.scenarios == 0 {
            return Err(Error::Config("at least one scenario is required".into()));
        }
        if self.fd_steps.is_empty() {
            return Err(Error::Config("fd_steps must not be empty".into()));
        }
        if let Some(h) = self.fd_steps.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
            return Err(Error::Config(format!("finite-difference step {h} must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    NonOptimal,
    Degenerate,
    SensitivityFailed,
    FdFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub index: usize,
    pub d: Vec<f64>,
    pub eta: f64,
    pub status: SolverStatus,
    /// `η < η̄`.
    pub meets_constraint: bool,
    pub degenerate: bool,
    pub cond_estimate: Option<f64>,
    /// `∂η/∂d` per parameter; empty when the scenario failed before it.
    pub analytic: Vec<f64>,
    /// Forward-difference `∂η/∂d`, one vector per step in `fd_steps` order.
    pub forward: Vec<Vec<f64>>,
    pub time_analytic: f64,
    pub time_forward: Vec<f64>,
    pub excluded: Option<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEntry {
    pub param: String,
    pub fd_step: f64,
    /// Percent.
    pub alpha: f64,
    pub median_abs_error: f64,
    pub scenarios_used: usize,
    /// Scenarios dropped because the analytic value is exactly zero.
    pub zero_analytic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub fd_step: f64,
    /// Median of `|a − n|` over all parameters and included scenarios.
    pub median_abs_error: f64,
    pub t_cpu: f64,
    /// `(T_fd − T_analytic) / T_fd`.
    pub r_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n: usize,
    pub params: Vec<String>,
    pub config: BenchConfig,
    pub accuracy: Vec<AccuracyEntry>,
    /// `α` of the analytic values against themselves; 100 by construction.
    pub alpha_self: f64,
    pub t_cpu_analytic: f64,
    pub steps: Vec<StepSummary>,
    pub n_included: usize,
    pub n_degenerate: usize,
    pub n_non_optimal: usize,
    pub n_failed: usize,
    pub records: Vec<ScenarioRecord>,
}

/// Accuracy degree in percent with the analytic values as reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyDegree {
    pub alpha: f64,
    pub used: usize,
    pub zero_analytic: usize,
}

pub fn accuracy_degree(analytic: &[f64], numerical: &[f64]) -> Result<AccuracyDegree> {
    if analytic.is_empty() || analytic.len() != numerical.len() {
        return Err(Error::Dimension(format!(
            "accuracy degree needs two equal non-empty lists, got {} and {}",
            analytic.len(),
            numerical.len()
        )));
    }
    let mut sum = 0.0;
    let mut used = 0;
    for (a, n) in analytic.iter().zip(numerical) {
        if *a != 0.0 {
            sum += ((a - n) / a).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Config(
            "every analytic value is zero; accuracy degree undefined".into(),
        ));
    }
    Ok(AccuracyDegree {
        alpha: (1.0 - sum / used as f64) * 100.0,
        used,
        zero_analytic: analytic.len() - used,
    })
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len() / 2;
    if values.len() % 2 == 1 {
        values[k]
    } else {
        0.5 * (values[k - 1] + values[k])
    }
}

fn evaluate(pj: &ParametricJacobian, index: usize, d: Vec<f64>, cfg: &BenchConfig) -> Result<ScenarioRecord> {
    let j = pj.jacobian_at(&d)?;
    let sdp = build_sdp(&j, cfg.eps)?;
    let opts = SolveOptions::refined(cfg.tol);
    let start = Instant::now();
    let cert = solve_sdp_with(&sdp, &opts)?;
    let t_solve = start.elapsed().as_secs_f64();

    let mut rec = ScenarioRecord {
        index,
        eta: cert.eta,
        status: cert.status,
        meets_constraint: cert.eta < cfg.eta_bar,
        degenerate: false,
        cond_estimate: None,
        analytic: Vec::new(),
        forward: Vec::new(),
        time_analytic: t_solve,
        time_forward: Vec::new(),
        excluded: None,
        d,
    };
    if cert.status != SolverStatus::Optimal {
        rec.excluded = Some(Exclusion::NonOptimal);
        return Ok(rec);
    }

    let start = Instant::now();
    let analytic = sens_params_at(&cert, pj, &rec.d);
    rec.time_analytic += start.elapsed().as_secs_f64();
    match analytic {
        Ok(report) => {
            rec.degenerate = report.degenerate;
            rec.cond_estimate = report.cond_estimate.filter(|c| c.is_finite());
            rec.analytic = report.param_values().unwrap_or_default();
            if report.degenerate && cfg.exclude_degenerate {
                rec.excluded = Some(Exclusion::Degenerate);
            }
        }
        Err(e) if e.is_numerical() => rec.excluded = Some(Exclusion::SensitivityFailed),
        Err(e) => return Err(e),
    }

    for &step in &cfg.fd_steps {
        let start = Instant::now();
        let grad = fd_gradient(pj, &rec.d, &FDConfig::forward(step), cfg.eps, cfg.tol, Some(cert.eta));
        rec.time_forward.push(t_solve + start.elapsed().as_secs_f64());
        match grad {
            Ok(g) => rec.forward.push(g.values),
            Err(e) if e.is_numerical() => {
                rec.forward.push(Vec::new());
                rec.excluded.get_or_insert(Exclusion::FdFailed);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(rec)
}

fn evaluate_all(pj: &ParametricJacobian, scenarios: Vec<Vec<f64>>, cfg: &BenchConfig) -> Result<Vec<ScenarioRecord>> {
    if !cfg.parallel {
        return scenarios
            .into_iter()
            .enumerate()
            .map(|(i, d)| evaluate(pj, i, d, cfg))
            .collect();
    }
    use rayon::prelude::*;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(threads.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        scenarios
            .into_par_iter()
            .enumerate()
            .map(|(i, d)| evaluate(pj, i, d, cfg))
            .collect()
    })
}

pub fn run_bench(pj: &ParametricJacobian, cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    if pj.n_params() == 0 {
        return Err(Error::Config("the model has no parameters to differentiate".into()));
    }
    let scenarios = pj.scenario_gen(cfg.scenarios, cfg.seed)?;
    let records = evaluate_all(pj, scenarios, cfg)?;

    let count = |x: Exclusion| records.iter().filter(|r| r.excluded == Some(x)).count();
    let n_degenerate = records.iter().filter(|r| r.degenerate).count();
    let n_non_optimal = count(Exclusion::NonOptimal);
    let n_failed = count(Exclusion::SensitivityFailed) + count(Exclusion::FdFailed);
    let included: Vec<&ScenarioRecord> = records.iter().filter(|r| r.excluded.is_none()).collect();
    if included.is_empty() {
        return Err(Error::Solver(format!(
            "no usable scenario: {n_non_optimal} non-optimal, {n_degenerate} degenerate, {n_failed} failed"
        )));
    }

    let names = pj.names();
    let mut accuracy = Vec::new();
    let mut steps = Vec::new();
    let t_cpu_analytic: f64 = records.iter().map(|r| r.time_analytic).sum();
    let mut all_analytic = Vec::new();
    for (s, &step) in cfg.fd_steps.iter().enumerate() {
        let mut pooled = Vec::new();
        for (k, name) in names.iter().enumerate() {
            let a: Vec<f64> = included.iter().map(|r| r.analytic[k]).collect();
            let n: Vec<f64> = included.iter().map(|r| r.forward[s][k]).collect();
            let mut errs: Vec<f64> = a.iter().zip(&n).map(|(a, n)| (a - n).abs()).collect();
            pooled.extend_from_slice(&errs);
            if s == 0 {
                all_analytic.extend_from_slice(&a);
            }
            let (alpha, used, zero_analytic) = match accuracy_degree(&a, &n) {
                Ok(deg) => (deg.alpha, deg.used, deg.zero_analytic),
                Err(_) => (f64::NAN, 0, a.len()),
            };
            accuracy.push(AccuracyEntry {
                param: name.clone(),
                fd_step: step,
                alpha,
                median_abs_error: median(&mut errs),
                scenarios_used: used,
                zero_analytic,
            });
        }
        let t_cpu: f64 = records.iter().filter_map(|r| r.time_forward.get(s)).sum();
        steps.push(StepSummary {
            fd_step: step,
            median_abs_error: median(&mut pooled),
            t_cpu,
            r_t: (t_cpu - t_cpu_analytic) / t_cpu,
        });
    }
    let alpha_self = accuracy_degree(&all_analytic, &all_analytic).map_or(f64::NAN, |d| d.alpha);

    Ok(BenchReport {
        n: pj.dim(),
        params: names,
        config: cfg.clone(),
        accuracy,
        alpha_self,
        t_cpu_analytic,
        steps,
        n_included: included.len(),
        n_degenerate,
        n_non_optimal,
        n_failed,
        records,
    })
}

/// One row per scenario: `d`, `η`, flags, analytic and forward values, times.
pub fn write_csv(report: &BenchReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "index".to_string(),
        "eta".into(),
        "status".into(),
        "degenerate".into(),
        "excluded".into(),
    ];
    header.extend(report.params.iter().map(|p| format!("d_{p}")));
    header.extend(report.params.iter().map(|p| format!("analytic_{p}")));
    for step in &report.config.fd_steps {
        header.extend(report.params.iter().map(|p| format!("forward_{step:e}_{p}")));
    }
    header.push("time_analytic".into());
    header.extend(report.config.fd_steps.iter().map(|s| format!("time_forward_{s:e}")));
    w.write_record(&header)?;

    let p = report.params.len();
    let padded = |v: &[f64]| -> Vec<String> {
        (0..p)
            .map(|k| v.get(k).map_or(String::new(), |x| x.to_string()))
            .collect()
    };
    for r in &report.records {
        let mut row = vec![
            r.index.to_string(),
            r.eta.to_string(),
            format!("{:?}", r.status),
            r.degenerate.to_string(),
            r.excluded.map_or(String::new(), |e| format!("{e:?}")),
        ];
        row.extend(padded(&r.d));
        row.extend(padded(&r.analytic));
        for s in 0..report.config.fd_steps.len() {
            row.extend(padded(r.forward.get(s).map_or(&[][..], |v| v.as_slice())));
        }
        row.push(r.time_analytic.to_string());
        row.extend(
            (0..report.config.fd_steps.len()).map(|s| r.time_forward.get(s).map_or(String::new(), |t| t.to_string())),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

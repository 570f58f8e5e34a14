use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::Serialize;

use tlb_core::analysis::{AnalysisError, AuditReport, BoundednessReport};
use tlb_core::experiments::{
    assess, coupled_sweep, median, medians_by_n, settle_one, strictly_decreasing, two_regime_scenario,
    two_regime_steps_scenario, ExperimentError, IntervalOutcome, SeedOutcome, ALPHA_EXPONENT,
};
use tlb_core::fluid::{certify, solve_u};
use tlb_core::trajectory::grid_times;
use tlb_core::{fslln_diag, BoundedIntervalCertificate, EngineError, EngineMode, Scenario, Trajectory};

use crate::output::{float, write_events, write_json, write_samples, writer};

/// Exit code 2 for bad input, 1 for failed checks and runtime errors.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Check(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Check(_) | Failure::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => f.write_str(&chain(e)),
            Failure::Check(msg) => write!(f, "check failed: {msg}"),
        }
    }
}

/// Error chain joined with `: `, skipping causes an outer message already quotes.
fn chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Scenario(_) | EngineError::ModeUnsupported(_) => Failure::Usage(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Engine(e) => e.into(),
            ExperimentError::Analysis(e @ AnalysisError::GammaOutOfRange(_)) => Failure::Usage(e.into()),
            ExperimentError::Analysis(e) => Failure::Runtime(e.into()),
        }
    }
}

type CmdResult = Result<(), Failure>;

pub fn parse_interval(text: &str) -> Result<[f64; 2], String> {
    let (a, b) = text.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{text}`"))?;
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("bad interval endpoint `{s}`: {e}"));
    Ok([parse(a)?, parse(b)?])
}

fn load(path: &Path, seed: Option<u64>, mode: Option<EngineMode>) -> Result<Scenario, Failure> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(Failure::Usage)?;
    let mut scenario = Scenario::from_json(&text)
        .with_context(|| format!("invalid scenario {}", path.display()))
        .map_err(Failure::Usage)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    if let Some(mode) = mode {
        scenario.mode = mode;
    }
    Ok(scenario)
}

fn prepare(out_dir: &Path) -> CmdResult {
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    Ok(())
}

fn require_seeds(count: u64) -> CmdResult {
    if count == 0 {
        return Err(Failure::Usage(anyhow!("--seeds must be at least 1")));
    }
    Ok(())
}

fn require_clean(audit: &AuditReport, counting_identity: bool) -> CmdResult {
    if !counting_identity {
        return Err(Failure::Check("counting identity violated".into()));
    }
    if audit.violations > 0 {
        let first = audit.first.as_deref().unwrap_or("unknown");
        return Err(Failure::Check(format!("{} invariant violations, first: {first}", audit.violations)));
    }
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    seed: u64,
    mode: EngineMode,
    n: u32,
    delta: u32,
    horizon: f64,
    events: usize,
    arrivals: u64,
    departures: u64,
    final_ell: u32,
    counting_identity: bool,
    boundedness: BoundednessReport,
    audit: &'a AuditReport,
    intervals: &'a [IntervalOutcome],
}

pub fn run(path: &Path, out_dir: &Path, seed: Option<u64>, mode: Option<EngineMode>, slack: f64) -> CmdResult {
    let scenario = load(path, seed, mode)?;
    prepare(out_dir)?;
    let traj = tlb_core::run(&scenario)?;
    let outcome = assess(&scenario, &traj, slack)?;
    write_events(&out_dir.join("events.csv"), &traj)?;
    write_samples(&out_dir.join("samples.csv"), &traj, &scenario.v_levels)?;
    let counting_identity = traj.counting_identity_holds();
    let summary = RunSummary {
        seed: scenario.seed,
        mode: scenario.mode,
        n: scenario.n,
        delta: scenario.delta,
        horizon: scenario.horizon,
        events: traj.events.len(),
        arrivals: traj.arrivals,
        departures: traj.departures,
        final_ell: traj.final_ell,
        counting_identity,
        boundedness: outcome.boundedness,
        audit: &outcome.audit,
        intervals: &outcome.intervals,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;
    println!(
        "{} events ({} arrivals, {} departures), max pool size {}, max threshold {}",
        traj.events.len(),
        traj.arrivals,
        traj.departures,
        outcome.boundedness.max_tasks,
        outcome.boundedness.max_ell
    );
    for iv in &outcome.intervals {
        println!("{}", describe_interval(iv));
    }
    require_clean(&outcome.audit, counting_identity)
}

fn describe_interval(iv: &IntervalOutcome) -> String {
    let c = &iv.certificate;
    let head = format!("[{}, {}] {:?}", c.a, c.b, c.verdict);
    match (&iv.report, c.m) {
        (Some(r), Some(m)) => format!(
            "{head} m={m}, checked from a+{:.4}: settled={} value={:?} worst_balance={:.4}",
            r.sigma_used,
            r.settled,
            r.settled_value,
            r.worst_balance()
        ),
        _ => head,
    }
}

#[derive(Serialize)]
struct IntervalTally {
    a: f64,
    b: f64,
    certificate: BoundedIntervalCertificate,
    /// Seeds whose threshold stayed at `m delta` after `a + sigma`.
    settled_at_target: usize,
}

#[derive(Serialize)]
struct DeltaReport {
    delta: u32,
    intervals: Vec<IntervalTally>,
    seeds: Vec<SeedOutcome>,
}

#[derive(Serialize)]
struct Figure2Report {
    n: u32,
    alpha_exponent: f64,
    mode: EngineMode,
    slack: f64,
    seeds: Vec<u64>,
    deltas: Vec<DeltaReport>,
}

pub fn figure2(
    out_dir: &Path,
    n: u32,
    first_seed: u64,
    count: u64,
    deltas: &[u32],
    mode: EngineMode,
    slack: f64,
) -> CmdResult {
    if mode == EngineMode::Oracle {
        return Err(Failure::Usage(anyhow!("figure2 supports thinning or coupled mode")));
    }
    require_seeds(count)?;
    prepare(out_dir)?;
    let seeds: Vec<u64> = (first_seed..first_seed + count).collect();
    let mut reports = Vec::new();
    let mut audit = AuditReport::default();
    for &delta in deltas {
        let base = match mode {
            EngineMode::Coupled => two_regime_steps_scenario(n, delta, 0),
            _ => two_regime_scenario(n, delta, 0),
        };
        base.validate().map_err(|e| Failure::Usage(e.into()))?;
        let runs: Vec<(Trajectory, SeedOutcome)> = seeds
            .par_iter()
            .map(|&seed| settle_one(&Scenario { seed, ..base.clone() }, slack))
            .collect::<Result<_, _>>()?;
        write_band_series(&out_dir.join(format!("figure2_delta{delta}.csv")), &runs)?;
        let outcomes: Vec<SeedOutcome> = runs.into_iter().map(|(_, o)| o).collect();
        let mut intervals = Vec::new();
        for (k, &[a, b]) in base.intervals.iter().enumerate() {
            let certificate = outcomes[0].intervals[k].certificate.clone();
            let settled_at_target = outcomes
                .iter()
                .filter(|o| o.intervals[k].report.as_ref().is_some_and(|r| r.settled_at_target()))
                .count();
            match certificate.m {
                Some(m) if certificate.is_certified() => println!(
                    "delta={delta} [{a}, {b}]: certified m={m}, sigma={:.4}, ell={} after a+sigma+{slack} in {settled_at_target}/{} seeds",
                    certificate.sigma.unwrap_or(f64::NAN),
                    m * delta,
                    outcomes.len()
                ),
                _ => println!("delta={delta} [{a}, {b}]: {:?}, settling not asserted", certificate.verdict),
            }
            intervals.push(IntervalTally { a, b, certificate, settled_at_target });
        }
        for o in &outcomes {
            audit.merge(&o.audit);
        }
        reports.push(DeltaReport { delta, intervals, seeds: outcomes });
    }
    let report = Figure2Report { n, alpha_exponent: ALPHA_EXPONENT, mode, slack, seeds, deltas: reports };
    write_json(&out_dir.join("figure2.json"), &report)?;
    require_clean(&audit, true)
}

/// Threshold and the fractions of pools below `ell`, in `[ell, h)`, and at `h` or above.
fn write_band_series(path: &Path, runs: &[(Trajectory, SeedOutcome)]) -> CmdResult {
    let mut w = writer(path)?;
    w.write_record(["seed", "t", "ell", "u_n", "below_ell", "between", "at_or_above_h"])?;
    for (traj, outcome) in runs {
        for s in &traj.samples {
            let (ell, h) = (s.ell as usize, (s.ell + traj.delta) as usize);
            let (q_ell, q_h) = (s.occupancy.q(ell), s.occupancy.q(h));
            w.write_record([
                outcome.seed.to_string(),
                float(s.t),
                s.ell.to_string(),
                float(s.total_mass()),
                float(1.0 - q_ell),
                float(q_ell - q_h),
                float(q_h),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn fluid(path: &Path, out_dir: &Path, intervals: &[[f64; 2]]) -> CmdResult {
    let scenario = load(path, None, None)?;
    let intervals = if intervals.is_empty() { scenario.intervals.as_slice() } else { intervals };
    for &[a, b] in intervals {
        if !(0.0 <= a && a < b && b <= scenario.horizon) {
            return Err(Failure::Usage(anyhow!("interval [{a}, {b}] is not inside [0, {}]", scenario.horizon)));
        }
    }
    prepare(out_dir)?;
    let fluid = solve_u(&scenario).map_err(|e| Failure::Usage(e.into()))?;
    let mut w = writer(&out_dir.join("fluid.csv"))?;
    w.write_record(["t", "lambda", "rho", "u"])?;
    for t in grid_times(scenario.horizon, scenario.grid) {
        w.write_record([float(t), float(scenario.lambda.rate(t)), float(fluid.rho(t)), float(fluid.eval(t))])?;
    }
    w.flush()?;
    let certificates: Vec<BoundedIntervalCertificate> =
        intervals.iter().map(|&[a, b]| certify(&fluid, a, b, scenario.delta)).collect();
    for c in &certificates {
        let sigma = c.sigma.map_or("-".to_owned(), |s| format!("{s:.6}"));
        println!(
            "[{}, {}] {:?} m={:?} rho in [{:.6}, {:.6}] sigma={sigma}",
            c.a, c.b, c.verdict, c.m, c.rho_min, c.rho_max
        );
    }
    write_json(&out_dir.join("certificates.json"), &certificates)?;
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary {
    n_list: Vec<u32>,
    seeds: Vec<u64>,
    j: usize,
    median_mass_error: Vec<f64>,
    median_delta_error: Vec<f64>,
    median_metric_to_largest: Vec<f64>,
    /// `None` when fewer than two sizes were run.
    mass_error_decreasing: Option<bool>,
    delta_error_decreasing: Option<bool>,
    audit: AuditReport,
}

pub fn sweep(path: &Path, out_dir: &Path, seed: Option<u64>, n_list: &[u32], count: u64, j: usize) -> CmdResult {
    let scenario = load(path, seed, Some(EngineMode::Coupled))?;
    require_seeds(count)?;
    if j == 0 {
        return Err(Failure::Usage(anyhow!("the error-process level must be at least 1")));
    }
    let n_list = if n_list.is_empty() { vec![scenario.n] } else { n_list.to_vec() };
    if n_list.contains(&0) {
        return Err(Failure::Usage(anyhow!("system sizes must be positive")));
    }
    for &n in &n_list {
        scenario.with_n(n).validate().map_err(|e| Failure::Usage(e.into()))?;
    }
    prepare(out_dir)?;
    let seeds: Vec<u64> = (scenario.seed..scenario.seed + count).collect();
    let rows = coupled_sweep(&scenario, &n_list, &seeds, j)?;
    let mut w = writer(&out_dir.join("convergence.csv"))?;
    w.write_record(["n", "seed", "mass_error", "delta_error", "metric_to_largest"])?;
    let mut audit = AuditReport::default();
    for r in &rows {
        w.write_record([
            r.n.to_string(),
            r.seed.to_string(),
            float(r.mass_error),
            float(r.delta_error),
            float(r.metric_to_largest),
        ])?;
        audit.merge(&r.audit);
    }
    w.flush()?;
    let mass = medians_by_n(&rows, &n_list, |r| r.mass_error);
    let delta = medians_by_n(&rows, &n_list, |r| r.delta_error);
    let metric = medians_by_n(&rows, &n_list, |r| r.metric_to_largest);
    let trend = |v: &[f64]| (v.len() > 1).then(|| strictly_decreasing(v));
    let summary = SweepSummary {
        mass_error_decreasing: trend(&mass),
        delta_error_decreasing: trend(&delta),
        n_list: n_list.clone(),
        seeds,
        j,
        median_mass_error: mass,
        median_delta_error: delta,
        median_metric_to_largest: metric,
        audit,
    };
    for (k, n) in n_list.iter().enumerate() {
        println!(
            "n={n}: median sup|u_n - u| = {:.5}, median sup|delta_n| = {:.5}, median distance to largest = {:.5}",
            summary.median_mass_error[k], summary.median_delta_error[k], summary.median_metric_to_largest[k]
        );
    }
    let verdict =
        |v: Option<bool>| v.map_or("no trend (single size)", |d| if d { "decreasing" } else { "not decreasing" });
    println!("mass error: {}", verdict(summary.mass_error_decreasing));
    println!("error process: {}", verdict(summary.delta_error_decreasing));
    write_json(&out_dir.join("sweep_summary.json"), &summary)?;
    require_clean(&summary.audit, true)
}

pub fn fslln(out_dir: &Path, first_seed: u64, count: u64, n_list: &[u64], gammas: &[f64], horizon: f64) -> CmdResult {
    require_seeds(count)?;
    if n_list.is_empty() || n_list.contains(&0) {
        return Err(Failure::Usage(anyhow!("--n-list needs positive sizes")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Failure::Usage(anyhow!("horizon must be positive, got {horizon}")));
    }
    prepare(out_dir)?;
    let mut w = writer(&out_dir.join("fslln.csv"))?;
    w.write_record(["gamma", "seed", "n", "statistic"])?;
    for &gamma in gammas {
        let per_seed: Vec<Vec<(u64, f64)>> = (first_seed..first_seed + count)
            .into_par_iter()
            .map(|seed| fslln_diag(seed, n_list, gamma, horizon))
            .collect::<Result<_, _>>()
            .map_err(|e| Failure::Usage(e.into()))?;
        let mut decreasing = 0;
        for (k, stats) in per_seed.iter().enumerate() {
            for &(n, s) in stats {
                w.write_record([float(gamma), (first_seed + k as u64).to_string(), n.to_string(), float(s)])?;
            }
            let values: Vec<f64> = stats.iter().map(|&(_, s)| s).collect();
            decreasing += strictly_decreasing(&values) as usize;
        }
        let medians: Vec<String> = (0..n_list.len())
            .map(|i| format!("{:.5}", median(&per_seed.iter().map(|s| s[i].1).collect::<Vec<_>>())))
            .collect();
        println!("gamma={gamma}: decreasing in {decreasing}/{count} seeds, medians {}", medians.join(", "));
    }
    w.flush()?;
    Ok(())
}

//! Experiment orchestration: parameter grids, Monte Carlo aggregation, and
//! deterministic artifact emission.
//!
//! One cell is one (technique, seed, horizon, energy budget, error sigma)
//! tuple. Cells run independently on a worker pool; results are sorted into
//! a canonical order before anything is written, so identical configs
//! produce byte-identical CSV tables regardless of scheduling. Wall-clock
//! times are inherently non-deterministic and therefore live only in the
//! per-run JSON reports, never in the CSV.
//!
//! CSV column order: `technique, seed, horizon_s, energy_budget_j,
//! uli_sigma_m, covered, num_users, coverage_prob, energy_used_j,
//! iterations, min_excess_bits, status`.

use crate::baselines::{static_fdma_baseline, static_tdma_baseline, BaselineOutcome};
use crate::plot;
use crate::scenario::generate_scenario;
use aircover_core::bcd_driver::{optimize, BcdOptions, SolveReport};
use aircover_core::init_traj::{InitConfig, InitKind};
use aircover_core::model::{self, RateConvention, RateModel, Scenario, SystemParams, Trajectory};
use aircover_core::robust::{apply_uli_error, min_excess, optimize_medm, optimize_wc, UliErrorModel};
use aircover_core::schedule_solver::{rate_matrix, solve_scheduling, SchedOptions};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

/// One position in the comparison set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Technique {
    /// Circular initial trajectory evaluated as-is (scheduling only).
    Cit,
    /// Designed initial trajectory evaluated as-is (scheduling only).
    Dit,
    /// Full alternating optimization from the circular start.
    IaCit,
    /// Full alternating optimization from the designed start.
    IaDit,
    StaticTdma,
    StaticFdma,
    /// Worst-case robust optimization under padded distances.
    Wc,
    /// Minimum-excess refinement on top of an `IaDit` run.
    Medm,
}

impl Technique {
    pub fn label(self) -> &'static str {
        match self {
            Technique::Cit => "cit",
            Technique::Dit => "dit",
            Technique::IaCit => "ia-cit",
            Technique::IaDit => "ia-dit",
            Technique::StaticTdma => "static-tdma",
            Technique::StaticFdma => "static-fdma",
            Technique::Wc => "wc",
            Technique::Medm => "medm",
        }
    }

    pub fn parse(s: &str) -> Option<Technique> {
        Some(match s {
            "cit" => Technique::Cit,
            "dit" => Technique::Dit,
            "ia-cit" => Technique::IaCit,
            "ia-dit" => Technique::IaDit,
            "static-tdma" => Technique::StaticTdma,
            "static-fdma" => Technique::StaticFdma,
            "wc" => Technique::Wc,
            "medm" => Technique::Medm,
            _ => return None,
        })
    }

    /// Robust techniques cross with the sigma grid; the rest run at zero.
    pub fn uses_uli_sigma(self) -> bool {
        matches!(self, Technique::Wc | Technique::Medm)
    }
}

/// Full experiment grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub horizons_s: Vec<f64>,
    pub energy_budgets_j: Vec<f64>,
    pub techniques: Vec<Technique>,
    /// Location-error standard deviations for the robust techniques (m).
    pub uli_sigmas_m: Vec<f64>,
    pub num_users: usize,
    pub area_size_m: f64,
    pub rate_convention: RateConvention,
    pub medm_epsilon: f64,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// Desk-scale defaults: a full sweep that finishes on a laptop.
    pub fn desk_defaults(out_dir: PathBuf) -> Self {
        ExperimentConfig {
            seeds: (0..20).collect(),
            horizons_s: vec![40.0, 60.0, 80.0, 100.0, 120.0],
            energy_budgets_j: vec![1.0e4, 1.5e4, 2.0e4, 2.5e4],
            techniques: vec![
                Technique::IaCit,
                Technique::IaDit,
                Technique::StaticTdma,
                Technique::StaticFdma,
            ],
            uli_sigmas_m: vec![5.0, 10.0],
            num_users: 8,
            area_size_m: 1500.0,
            rate_convention: RateConvention::Physical,
            medm_epsilon: 1e-3,
            threads: 0,
            out_dir,
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError("seed list is empty".into()));
        }
        if self.num_users == 0 {
            return Err(ConfigError("scenario needs at least one user".into()));
        }
        for &t in &self.horizons_s {
            let slot = 0.5;
            let n = (t / slot).round();
            if t <= 0.0 || (n * slot - t).abs() > 1e-9 {
                return Err(ConfigError(format!(
                    "horizon {t} s is not a whole number of {slot} s slots"
                )));
            }
        }
        for &e in &self.energy_budgets_j {
            if e <= 0.0 {
                return Err(ConfigError(format!("energy budget {e} J must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
#[error("invalid experiment config: {0}")]
pub struct ConfigError(String);

/// One aggregated result cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub technique: String,
    pub seed: u64,
    pub horizon_s: f64,
    pub energy_budget_j: f64,
    pub uli_sigma_m: f64,
    pub covered: usize,
    pub num_users: usize,
    /// covered / num_users.
    pub coverage_prob: f64,
    pub energy_used_j: f64,
    pub iterations: usize,
    pub min_excess_bits: Option<f64>,
    /// Milliseconds; excluded from the CSV (non-deterministic).
    pub wall_ms: u64,
    pub status: String,
}

/// Everything needed to recompute a row, persisted per optimizer cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub technique: String,
    pub seed: u64,
    pub uli_sigma_m: f64,
    pub params: SystemParams,
    pub scenario: Scenario,
    pub report: SolveReport,
}

#[derive(Debug, Error)]
pub enum CellError {
    #[error("initial trajectory: {0}")]
    Init(#[from] aircover_core::init_traj::InitError),
    #[error("optimizer: {0}")]
    Driver(#[from] aircover_core::bcd_driver::DriverError),
    #[error("report invariant violated: {0}")]
    Invariant(String),
}

fn params_for(cfg: &ExperimentConfig, horizon_s: f64, energy_j: f64) -> SystemParams {
    let mut p = SystemParams::defaults(horizon_s, energy_j);
    p.rate_convention = cfg.rate_convention;
    p
}

fn init_for(kind: InitKind, params: &SystemParams, scenario: &Scenario) -> Result<Trajectory, CellError> {
    Ok(InitConfig::new(kind, scenario).build(params, scenario)?)
}

/// Seed for the location-error draw of a cell, decorrelated from the
/// scenario seed but fully determined by it and sigma.
fn error_seed(seed: u64, sigma: f64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ sigma.to_bits()
}

fn row_from_solve(
    technique: Technique,
    seed: u64,
    sigma: f64,
    params: &SystemParams,
    scenario: &Scenario,
    report: &SolveReport,
    wall_ms: u64,
) -> Result<MetricsRow, CellError> {
    report
        .check_invariants(params, scenario)
        .map_err(|e| CellError::Invariant(e.to_string()))?;
    let m = scenario.num_users();
    let min_ex = if report.covered_set.is_empty() {
        None
    } else {
        Some(min_excess(
            params,
            &report.final_trajectory,
            &report.final_schedule,
            scenario,
            &report.covered_set,
        ))
    };
    Ok(MetricsRow {
        technique: technique.label().into(),
        seed,
        horizon_s: params.horizon_s(),
        energy_budget_j: params.energy_budget_j,
        uli_sigma_m: sigma,
        covered: report.coverage,
        num_users: m,
        coverage_prob: report.coverage as f64 / m as f64,
        energy_used_j: report.energy_used_j,
        iterations: report.iterations.len(),
        min_excess_bits: min_ex,
        wall_ms,
        status: report.termination.clone(),
    })
}

fn row_from_baseline(
    technique: Technique,
    seed: u64,
    params: &SystemParams,
    scenario: &Scenario,
    out: &BaselineOutcome,
    wall_ms: u64,
) -> MetricsRow {
    let m = scenario.num_users();
    MetricsRow {
        technique: technique.label().into(),
        seed,
        horizon_s: params.horizon_s(),
        energy_budget_j: params.energy_budget_j,
        uli_sigma_m: 0.0,
        covered: out.coverage,
        num_users: m,
        coverage_prob: out.coverage as f64 / m as f64,
        energy_used_j: 0.0,
        iterations: 0,
        min_excess_bits: out.min_excess_bits,
        wall_ms,
        status: "static".into(),
    }
}

/// Evaluate an initial trajectory as a technique of its own: exact
/// scheduling on its rates, no trajectory optimization. Coverage is
/// reported only when the trajectory respects the limits and the budget.
fn row_from_init(
    technique: Technique,
    seed: u64,
    params: &SystemParams,
    scenario: &Scenario,
    traj: &Trajectory,
    wall_ms: u64,
) -> MetricsRow {
    let rates = rate_matrix(traj, scenario, params, RateModel::Nominal);
    let demands: Vec<f64> = scenario.users.iter().map(|u| u.demand_bits).collect();
    let outcome = solve_scheduling(&rates, &demands, &SchedOptions::default());
    let energy = model::total_energy(params, traj).unwrap_or(f64::INFINITY);
    let valid = model::validate(params, scenario, traj, &outcome.schedule).map(|r| r.is_feasible());
    let (covered, status) = match valid {
        Ok(true) => (outcome.coverage.count(), "static_init".to_string()),
        _ => (0, "init_violates_limits".to_string()),
    };
    let m = scenario.num_users();
    MetricsRow {
        technique: technique.label().into(),
        seed,
        horizon_s: params.horizon_s(),
        energy_budget_j: params.energy_budget_j,
        uli_sigma_m: 0.0,
        covered,
        num_users: m,
        coverage_prob: covered as f64 / m as f64,
        energy_used_j: if energy.is_finite() { energy } else { 0.0 },
        iterations: 0,
        min_excess_bits: None,
        wall_ms,
        status,
    }
}

/// Run a single experiment cell. Optimizer cells also return the run report
/// so it can be persisted and re-plotted later.
pub fn run_cell(
    cfg: &ExperimentConfig,
    technique: Technique,
    seed: u64,
    horizon_s: f64,
    energy_j: f64,
    sigma: f64,
) -> Result<(MetricsRow, Option<RunReport>), CellError> {
    let t0 = Instant::now();
    let params = params_for(cfg, horizon_s, energy_j);
    let scenario = generate_scenario(seed, cfg.num_users, cfg.area_size_m, &params);
    let opts = BcdOptions::default();
    let wall = |t0: Instant| t0.elapsed().as_millis() as u64;

    let wrap = |report: SolveReport,
                params: &SystemParams,
                scenario: &Scenario,
                sigma: f64,
                t0: Instant|
     -> Result<(MetricsRow, Option<RunReport>), CellError> {
        let row = row_from_solve(technique, seed, sigma, params, scenario, &report, wall(t0))?;
        let run = RunReport {
            version: 1,
            technique: technique.label().into(),
            seed,
            uli_sigma_m: sigma,
            params: params.clone(),
            scenario: scenario.clone(),
            report,
        };
        Ok((row, Some(run)))
    };

    match technique {
        Technique::StaticTdma => {
            let out = static_tdma_baseline(&scenario, &params);
            Ok((row_from_baseline(technique, seed, &params, &scenario, &out, wall(t0)), None))
        }
        Technique::StaticFdma => {
            let out = static_fdma_baseline(&scenario, &params);
            Ok((row_from_baseline(technique, seed, &params, &scenario, &out, wall(t0)), None))
        }
        Technique::Cit => {
            let traj = init_for(InitKind::Circular, &params, &scenario)?;
            Ok((row_from_init(technique, seed, &params, &scenario, &traj, wall(t0)), None))
        }
        Technique::Dit => {
            let traj = init_for(InitKind::Designed, &params, &scenario)?;
            Ok((row_from_init(technique, seed, &params, &scenario, &traj, wall(t0)), None))
        }
        Technique::IaCit => {
            let traj = init_for(InitKind::Circular, &params, &scenario)?;
            let report = optimize(&scenario, &params, traj, &opts)?;
            wrap(report, &params, &scenario, 0.0, t0)
        }
        Technique::IaDit => {
            let traj = init_for(InitKind::Designed, &params, &scenario)?;
            let report = optimize(&scenario, &params, traj, &opts)?;
            wrap(report, &params, &scenario, 0.0, t0)
        }
        Technique::Wc => {
            let err = UliErrorModel { sigma_m: sigma, d_th_m: 3.0 * sigma, seed: error_seed(seed, sigma) };
            let (estimated, _) = apply_uli_error(&scenario, &err);
            let traj = init_for(InitKind::Designed, &params, &estimated)?;
            let report = optimize_wc(&estimated, &params, traj, err.d_th_m, &opts)?;
            wrap(report, &params, &estimated, sigma, t0)
        }
        Technique::Medm => {
            let err = UliErrorModel { sigma_m: sigma, d_th_m: 3.0 * sigma, seed: error_seed(seed, sigma) };
            let (estimated, _) = apply_uli_error(&scenario, &err);
            let traj = init_for(InitKind::Designed, &params, &estimated)?;
            let warm = optimize(&estimated, &params, traj, &opts)?;
            if warm.covered_set.is_empty() {
                return wrap(warm, &params, &estimated, sigma, t0);
            }
            let refined = optimize_medm(&estimated, &params, &warm, cfg.medm_epsilon, &opts)?;
            wrap(refined, &params, &estimated, sigma, t0)
        }
    }
}

fn error_row(
    technique: Technique,
    seed: u64,
    horizon_s: f64,
    energy_j: f64,
    sigma: f64,
    num_users: usize,
    err: &CellError,
    wall_ms: u64,
) -> MetricsRow {
    MetricsRow {
        technique: technique.label().into(),
        seed,
        horizon_s,
        energy_budget_j: energy_j,
        uli_sigma_m: sigma,
        covered: 0,
        num_users,
        coverage_prob: 0.0,
        energy_used_j: 0.0,
        iterations: 0,
        min_excess_bits: None,
        wall_ms,
        status: format!("error: {err}"),
    }
}

/// Stable cell identifier used for report filenames and sorting.
fn cell_name(t: Technique, seed: u64, horizon: f64, energy: f64, sigma: f64) -> String {
    format!("{}_s{}_T{:.0}_E{:.0}_sig{:.1}", t.label(), seed, horizon, energy, sigma)
}

/// Run the whole grid on a worker pool and write `metrics.csv`, per-run
/// reports under `runs/`, and plots under `plots/`. Per-cell failures are
/// recorded in their row; the run always continues.
pub fn run_experiments(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>, std::io::Error> {
    cfg.check().map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
    let mut cells = Vec::new();
    for &technique in &cfg.techniques {
        let sigmas: &[f64] =
            if technique.uses_uli_sigma() { &cfg.uli_sigmas_m } else { &[0.0] };
        for &seed in &cfg.seeds {
            for &t in &cfg.horizons_s {
                for &e in &cfg.energy_budgets_j {
                    for &sig in sigmas {
                        cells.push((technique, seed, t, e, sig));
                    }
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e))?;
    let results: Vec<(String, MetricsRow, Option<RunReport>)> = pool.install(|| {
        use rayon::prelude::*;
        cells
            .par_iter()
            .map(|&(technique, seed, t, e, sig)| {
                let t0 = Instant::now();
                let name = cell_name(technique, seed, t, e, sig);
                match run_cell(cfg, technique, seed, t, e, sig) {
                    Ok((row, run)) => (name, row, run),
                    Err(err) => (
                        name,
                        error_row(
                            technique, seed, t, e, sig, cfg.num_users, &err,
                            t0.elapsed().as_millis() as u64,
                        ),
                        None,
                    ),
                }
            })
            .collect()
    });

    let mut results = results;
    results.sort_by(|a, b| a.0.cmp(&b.0));

    fs::create_dir_all(cfg.out_dir.join("runs"))?;
    fs::create_dir_all(cfg.out_dir.join("plots"))?;
    let rows: Vec<MetricsRow> = results.iter().map(|(_, r, _)| r.clone()).collect();
    fs::write(cfg.out_dir.join("metrics.csv"), metrics_csv(&rows))?;
    for (name, _, run) in &results {
        if let Some(run) = run {
            let path = cfg.out_dir.join("runs").join(format!("{name}.json"));
            fs::write(path, serde_json::to_string_pretty(run)?)?;
        }
    }
    plot::render_all(&cfg.out_dir)?;
    Ok(rows)
}

/// Render rows as CSV in the documented column order. Wall time is omitted:
/// the table must be byte-identical across reruns of the same config.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(
        "technique,seed,horizon_s,energy_budget_j,uli_sigma_m,covered,num_users,\
         coverage_prob,energy_used_j,iterations,min_excess_bits,status\n",
    );
    for r in rows {
        let min_ex = r.min_excess_bits.map_or(String::new(), |v| format!("{v:.3}"));
        let status = r.status.replace(',', ";");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:.6},{:.3},{},{},{}",
            r.technique,
            r.seed,
            r.horizon_s,
            r.energy_budget_j,
            r.uli_sigma_m,
            r.covered,
            r.num_users,
            r.coverage_prob,
            r.energy_used_j,
            r.iterations,
            min_ex,
            status
        )
        .expect("writing to String cannot fail");
    }
    out
}

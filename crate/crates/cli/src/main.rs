//! Command-line entry point.
//!
//! Exit codes: 0 on success, 2 when the scenario is infeasible (no flight
//! plan within the energy budget), 3 on solver failure.

use aircover_cli::baselines::{static_fdma_baseline, static_tdma_baseline};
use aircover_cli::experiments::{
    run_experiments, ExperimentConfig, MetricsRow, RunReport, Technique,
};
use aircover_cli::plot;
use aircover_cli::scenario::generate_scenario;
use aircover_core::bcd_driver::{optimize, BcdOptions, SolveReport};
use aircover_core::init_traj::{InitConfig, InitKind};
use aircover_core::model::{RateConvention, Scenario, SystemParams};
use aircover_core::robust::{optimize_medm, optimize_wc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "aircover",
    version,
    about = "Trajectory and scheduling optimizer for an energy-constrained aerial base station"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize one scenario and write its run report and plots.
    Solve(SolveArgs),
    /// Run a parameter grid and aggregate metrics into CSV and plots.
    Sweep(SweepArgs),
    /// Location-error study: unprotected, worst-case, and excess-refined.
    Robust(RobustArgs),
    /// Evaluate the static baselines on one scenario.
    Baseline(ScenarioArgs),
    /// Re-render plots from the artifacts in an output directory.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Cit,
    Dit,
}

impl From<InitArg> for InitKind {
    fn from(a: InitArg) -> InitKind {
        match a {
            InitArg::Cit => InitKind::Circular,
            InitArg::Dit => InitKind::Designed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Physical,
    PaperLiteral,
}

impl From<ConventionArg> for RateConvention {
    fn from(a: ConventionArg) -> RateConvention {
        match a {
            ConventionArg::Physical => RateConvention::Physical,
            ConventionArg::PaperLiteral => RateConvention::PaperLiteral,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum RobustArg {
    None,
    Wc,
    Medm,
    Both,
}

/// Flags shared by every command that needs a single scenario.
#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON file; omitting it generates one from the seed.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    num_users: usize,
    /// Side length of the square service area (m).
    #[arg(long, default_value_t = 1500.0)]
    area: f64,
    /// Mission duration (s), a whole number of 0.5 s slots.
    #[arg(long = "T", default_value_t = 100.0)]
    horizon: f64,
    /// Propulsion energy budget (J).
    #[arg(long, default_value_t = 2.0e4)]
    etot: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::Physical)]
    rate_convention: ConventionArg,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    #[arg(long, value_enum, default_value_t = InitArg::Cit)]
    init: InitArg,
    /// Protection against user-location error.
    #[arg(long, value_enum, default_value_t = RobustArg::None)]
    robust: RobustArg,
    /// Location-error standard deviation (m); the hard bound is 3 sigma.
    #[arg(long, default_value_t = 10.0)]
    uli_sigma: f64,
    /// Convergence threshold for the excess-refinement pass.
    #[arg(long, default_value_t = 1e-3)]
    medm_epsilon: f64,
}

#[derive(Args)]
struct SweepArgs {
    /// Number of Monte Carlo seeds (0..n).
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Mission durations to sweep (s).
    #[arg(long = "T", value_delimiter = ',', default_values_t = vec![40.0, 60.0, 80.0, 100.0, 120.0])]
    horizons: Vec<f64>,
    /// Energy budgets to sweep (J).
    #[arg(long = "etot", value_delimiter = ',', default_values_t = vec![1.0e4, 1.5e4, 2.0e4, 2.5e4])]
    etots: Vec<f64>,
    /// Techniques to run: cit, dit, ia-cit, ia-dit, static-tdma,
    /// static-fdma, wc, medm.
    #[arg(long, value_delimiter = ',', default_values_t = vec![
        "ia-cit".to_string(), "ia-dit".to_string(),
        "static-tdma".to_string(), "static-fdma".to_string(),
    ])]
    techniques: Vec<String>,
    /// Location-error standard deviations for robust techniques (m).
    #[arg(long, value_delimiter = ',', default_values_t = vec![5.0, 10.0])]
    uli_sigma: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    num_users: usize,
    #[arg(long, default_value_t = 1500.0)]
    area: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::Physical)]
    rate_convention: ConventionArg,
    #[arg(long, default_value_t = 1e-3)]
    medm_epsilon: f64,
    /// Worker threads; 0 means one per core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RobustArgs {
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long = "T", default_value_t = 100.0)]
    horizon: f64,
    #[arg(long = "etot", default_value_t = 2.0e4)]
    etot: f64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![5.0, 10.0])]
    uli_sigma: Vec<f64>,
    #[arg(long, default_value_t = 8)]
    num_users: usize,
    #[arg(long, default_value_t = 1500.0)]
    area: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::Physical)]
    rate_convention: ConventionArg,
    #[arg(long, default_value_t = 1e-3)]
    medm_epsilon: f64,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Robust(args) => cmd_robust(args),
        Cmd::Baseline(args) => cmd_baseline(args),
        Cmd::Plot(args) => match plot::render_all(&args.out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(3, &format!("plot rendering failed: {e}")),
        },
    }
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn load_or_generate(common: &ScenarioArgs, params: &SystemParams) -> Result<Scenario, String> {
    let scenario = match &common.scenario {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("reading {}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("parsing {}: {e}", path.display()))?
        }
        None => generate_scenario(common.seed, common.num_users, common.area, params),
    };
    scenario.check().map_err(|e| e.to_string())?;
    Ok(scenario)
}

fn params_from(common: &ScenarioArgs) -> SystemParams {
    let mut p = SystemParams::defaults(common.horizon, common.etot);
    p.rate_convention = common.rate_convention.into();
    p
}

fn describe(report: &SolveReport, label: &str) {
    println!(
        "{label}: covered {}/{} users, energy {:.1} J, {} iterations, terminated by {}",
        report.coverage,
        report.final_schedule.num_users(),
        report.energy_used_j,
        report.iterations.len(),
        report.termination
    );
}

fn persist_run(
    out: &PathBuf,
    name: &str,
    technique: &str,
    seed: u64,
    sigma: f64,
    params: &SystemParams,
    scenario: &Scenario,
    report: &SolveReport,
) -> Result<(), String> {
    let run = RunReport {
        version: 1,
        technique: technique.into(),
        seed,
        uli_sigma_m: sigma,
        params: params.clone(),
        scenario: scenario.clone(),
        report: report.clone(),
    };
    let dir = out.join("runs");
    fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    fs::write(
        dir.join(format!("{name}.json")),
        serde_json::to_string_pretty(&run).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())
}

fn cmd_solve(args: SolveArgs) -> ExitCode {
    let params = params_from(&args.common);
    let scenario = match load_or_generate(&args.common, &params) {
        Ok(s) => s,
        Err(e) => return fail(2, &e),
    };
    let out = &args.common.out;
    if let Err(e) = fs::create_dir_all(out) {
        return fail(3, &format!("creating {}: {e}", out.display()));
    }
    let scenario_json = serde_json::to_string_pretty(&scenario).expect("scenario serializes");
    if let Err(e) = fs::write(out.join("scenario.json"), scenario_json) {
        return fail(3, &format!("writing scenario: {e}"));
    }

    let init = match InitConfig::new(args.init.into(), &scenario).build(&params, &scenario) {
        Ok(t) => t,
        Err(e) => return fail(3, &format!("initial trajectory: {e}")),
    };
    let opts = BcdOptions::default();
    let mut infeasible = false;

    let nominal = if args.robust == RobustArg::Wc {
        None
    } else {
        match optimize(&scenario, &params, init.clone(), &opts) {
            Ok(r) => {
                describe(&r, "nominal");
                infeasible |= r.infeasible;
                if let Err(e) = persist_run(
                    out, "solve_nominal", "nominal", args.common.seed, 0.0, &params, &scenario, &r,
                ) {
                    return fail(3, &e);
                }
                Some(r)
            }
            Err(e) => return fail(3, &format!("optimizer: {e}")),
        }
    };

    if args.robust == RobustArg::Wc || args.robust == RobustArg::Both {
        let d_th = 3.0 * args.uli_sigma;
        match optimize_wc(&scenario, &params, init.clone(), d_th, &opts) {
            Ok(r) => {
                describe(&r, "worst-case");
                infeasible |= r.infeasible;
                if let Err(e) = persist_run(
                    out, "solve_wc", "wc", args.common.seed, args.uli_sigma, &params, &scenario, &r,
                ) {
                    return fail(3, &e);
                }
            }
            Err(e) => return fail(3, &format!("worst-case optimizer: {e}")),
        }
    }
    if args.robust == RobustArg::Medm || args.robust == RobustArg::Both {
        let warm = nominal.as_ref().expect("medm refines the nominal run");
        if warm.covered_set.is_empty() {
            println!("excess refinement skipped: nominal run covered nobody");
        } else {
            match optimize_medm(&scenario, &params, warm, args.medm_epsilon, &opts) {
                Ok(r) => {
                    describe(&r, "excess-refined");
                    if let Err(e) = persist_run(
                        out, "solve_medm", "medm", args.common.seed, args.uli_sigma, &params,
                        &scenario, &r,
                    ) {
                        return fail(3, &e);
                    }
                }
                Err(e) => return fail(3, &format!("excess refinement: {e}")),
            }
        }
    }

    if let Err(e) = plot::render_all(out) {
        return fail(3, &format!("plot rendering failed: {e}"));
    }
    if infeasible {
        eprintln!("scenario admits no flight plan within the energy budget");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

fn parse_techniques(labels: &[String]) -> Result<Vec<Technique>, String> {
    labels
        .iter()
        .map(|l| Technique::parse(l).ok_or_else(|| format!("unknown technique '{l}'")))
        .collect()
}

fn finish_grid(cfg: ExperimentConfig) -> ExitCode {
    println!(
        "running {} techniques × {} seeds × {} horizons × {} budgets → {}",
        cfg.techniques.len(),
        cfg.seeds.len(),
        cfg.horizons_s.len(),
        cfg.energy_budgets_j.len(),
        cfg.out_dir.display()
    );
    match run_experiments(&cfg) {
        Ok(rows) => {
            summarize(&rows);
            println!(
                "wrote {} rows to {}",
                rows.len(),
                cfg.out_dir.join("metrics.csv").display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => fail(3, &format!("experiment run failed: {e}")),
    }
}

fn summarize(rows: &[MetricsRow]) {
    let mut techniques: Vec<&str> = rows.iter().map(|r| r.technique.as_str()).collect();
    techniques.sort();
    techniques.dedup();
    for t in techniques {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.technique == t && !r.status.starts_with("error"))
            .map(|r| r.coverage_prob)
            .collect();
        let failed = rows
            .iter()
            .filter(|r| r.technique == t && r.status.starts_with("error"))
            .count();
        if !vals.is_empty() {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            println!(
                "  {t}: mean coverage {mean:.3} over {} cells{}",
                vals.len(),
                if failed > 0 { format!(", {failed} failed") } else { String::new() }
            );
        }
    }
}

fn cmd_sweep(args: SweepArgs) -> ExitCode {
    let techniques = match parse_techniques(&args.techniques) {
        Ok(t) => t,
        Err(e) => return fail(2, &e),
    };
    let cfg = ExperimentConfig {
        seeds: (0..args.seeds).collect(),
        horizons_s: args.horizons,
        energy_budgets_j: args.etots,
        techniques,
        uli_sigmas_m: args.uli_sigma,
        num_users: args.num_users,
        area_size_m: args.area,
        rate_convention: args.rate_convention.into(),
        medm_epsilon: args.medm_epsilon,
        threads: args.threads,
        out_dir: args.out,
    };
    if let Err(e) = cfg.check() {
        return fail(2, &e.to_string());
    }
    finish_grid(cfg)
}

fn cmd_robust(args: RobustArgs) -> ExitCode {
    let cfg = ExperimentConfig {
        seeds: (0..args.seeds).collect(),
        horizons_s: vec![args.horizon],
        energy_budgets_j: vec![args.etot],
        techniques: vec![Technique::IaDit, Technique::Wc, Technique::Medm],
        uli_sigmas_m: args.uli_sigma,
        num_users: args.num_users,
        area_size_m: args.area,
        rate_convention: args.rate_convention.into(),
        medm_epsilon: args.medm_epsilon,
        threads: args.threads,
        out_dir: args.out,
    };
    if let Err(e) = cfg.check() {
        return fail(2, &e.to_string());
    }
    finish_grid(cfg)
}

fn cmd_baseline(common: ScenarioArgs) -> ExitCode {
    let params = params_from(&common);
    let scenario = match load_or_generate(&common, &params) {
        Ok(s) => s,
        Err(e) => return fail(2, &e),
    };
    let tdma = static_tdma_baseline(&scenario, &params);
    let fdma = static_fdma_baseline(&scenario, &params);
    println!(
        "static-tdma: covered {}/{} from ({:.1}, {:.1})",
        tdma.coverage,
        scenario.num_users(),
        tdma.position.x,
        tdma.position.y
    );
    println!(
        "static-fdma: covered {}/{} from ({:.1}, {:.1})",
        fdma.coverage,
        scenario.num_users(),
        fdma.position.x,
        fdma.position.y
    );
    ExitCode::SUCCESS
}

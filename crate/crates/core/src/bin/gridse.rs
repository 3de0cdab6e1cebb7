use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gridse::metrics::MetricVariant;
use gridse::scenario::{emit_plot_data, run_repeated, run_scenario, AttackSpec, RunReport, ScenarioConfig, ScenarioError, ScenarioKind};
use gridse::state::{Mode, Reference};

#[derive(Parser)]
#[command(name = "gridse", version, about = "Distributed state estimation under availability and integrity attacks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its error summary.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Normal,
    Ag1Avail,
    Ag1Full,
    Ag2,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ac,
    Dc,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Full,
    VmOnly,
    VaOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceArg {
    SlackAngle,
    SlackVoltage,
}

#[derive(clap::Args)]
struct RunArgs {
    /// MATPOWER case file (bundled IEEE 14-bus case if omitted).
    #[arg(long)]
    case: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "normal")]
    scenario: Scenario,
    #[arg(long, value_enum, default_value = "ac")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10.0)]
    rho: f64,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Relative magnitude of the integrity attack.
    #[arg(long, default_value_t = -0.15, allow_hyphen_values = true)]
    alpha: f64,
    /// Loss probability of an attacked link.
    #[arg(long, default_value_t = 1.0)]
    zeta: f64,
    #[arg(long, default_value_t = 1e-4)]
    sigma2: f64,
    /// Attack description JSON (implies `--scenario custom` semantics).
    #[arg(long)]
    attack_spec: Option<PathBuf>,
    /// Zone assignment JSON.
    #[arg(long)]
    assignment: Option<PathBuf>,
    /// Meter plan JSON.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "full")]
    metric: MetricArg,
    #[arg(long, value_enum, default_value = "slack-voltage")]
    reference: ReferenceArg,
    /// Run this many consecutive seeds and report mean errors.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Directory for CSV traces and the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config_from(args: &RunArgs) -> Result<ScenarioConfig, ScenarioError> {
    let attack = match &args.attack_spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
            Some(AttackSpec::from_json(&text)?)
        }
        None => None,
    };
    let scenario = match (args.scenario, &attack) {
        (_, Some(_)) => ScenarioKind::Custom,
        (Scenario::Normal, None) => ScenarioKind::Normal,
        (Scenario::Ag1Avail, None) => ScenarioKind::Ag1Avail,
        (Scenario::Ag1Full, None) => ScenarioKind::Ag1Full,
        (Scenario::Ag2, None) => ScenarioKind::Ag2,
        (Scenario::Custom, None) => return Err(ScenarioError::Config("--scenario custom needs --attack-spec".into())),
    };
    Ok(ScenarioConfig {
        case_path: args.case.clone(),
        assignment_path: args.assignment.clone(),
        plan_path: args.plan.clone(),
        scenario,
        mode: match args.mode {
            ModeArg::Ac => Mode::Ac,
            ModeArg::Dc => Mode::Dc,
        },
        seed: args.seed,
        rho: args.rho,
        max_iterations: args.iters,
        consensus_tol: args.tol,
        noise_mean: 0.0,
        noise_variance: args.sigma2,
        alpha: args.alpha,
        zeta: args.zeta,
        attack,
        metric_variant: match args.metric {
            MetricArg::Full => MetricVariant::Full,
            MetricArg::VmOnly => MetricVariant::VmOnly,
            MetricArg::VaOnly => MetricVariant::VaOnly,
        },
        reference: match args.reference {
            ReferenceArg::SlackAngle => Reference::SlackAngle,
            ReferenceArg::SlackVoltage => Reference::SlackVoltage,
        },
        workers: args.workers,
    })
}

fn print_report(report: &RunReport) {
    println!("seed {}  scenario {:?}", report.config.seed, report.config.scenario);
    println!("  WLS   e_l2 {:>9.4}%  ({} iterations)", report.wls.errors.e_l2_percent, report.wls.iterations);
    println!(
        "  ADSE  e_l2 {:>9.4}%  ({} iterations, converged: {}, vs WLS {:.4}%)",
        report.errors.global.e_l2_percent, report.adse.iterations, report.adse.converged, report.adse.l2_vs_wls_percent
    );
    for (zone, s) in &report.errors.per_zone {
        println!("  Z{zone}    e_l2 {:>9.4}%  mse {:.3e}", s.e_l2_percent, s.mse);
    }
    if let Some(a) = &report.attack {
        println!("  dropped link-iterations: {}, compromised readings: {:?}", a.dropped.len(), a.compromised_indices);
        if !a.skipped_meters.is_empty() {
            let skipped: Vec<String> = a.skipped_meters.iter().map(|m| m.to_string()).collect();
            println!("  meters not in the plan: {}", skipped.join(", "));
        }
    }
}

fn run(args: &RunArgs) -> Result<(), ScenarioError> {
    let config = config_from(args)?;
    if args.repeat > 1 {
        let (reports, summary) = run_repeated(&config, args.repeat)?;
        for r in &reports {
            print_report(r);
        }
        println!("mean over {} seeds: WLS {:.4}%  ADSE {:.4}%", summary.seeds.len(), summary.wls_global_mean, summary.adse_global_mean);
        if let Some(out) = &args.out {
            for r in &reports {
                emit_plot_data(r, &out.join(format!("seed-{}", r.config.seed)))?;
            }
        }
        return Ok(());
    }
    let report = run_scenario(&config)?;
    print_report(&report);
    if let Some(out) = &args.out {
        let files = emit_plot_data(&report, out)?;
        log::info!("wrote {}", files.report.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRIDSE_LOG", "warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => match run(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}

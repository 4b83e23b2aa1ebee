#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ahqp::ergomap::{fit_map_from_grid, read_grid_csv, write_map_dump};
use ahqp::sim::{compare_modes, fmt_f64, parse_events, run_scenario, ErgonomicsMode, ScenarioEvent, SimConfig, SimError, SimLog};
use ahqp::svm::{accuracy, read_features_csv, train, write_model, SvmVariant};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "ahqp", version, about = "Ergonomics-aware hierarchical QP controller simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the step log and summary.
    Run(RunArgs),
    /// Simulate a scenario with and without the ergonomics level.
    Benchmark(RunArgs),
    /// Fit a quadratic ergonomics map to a score grid.
    FitMap {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a linear SVM on labelled feature vectors.
    TrainSvm {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        c: f64,
        #[arg(long, default_value = "l2")]
        variant: SvmVariant,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the self-check suites.
    Check {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Simulation config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario events, one JSON object per line.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Seed of the synthetic classifier training set.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ergonomics,
    Benchmark,
}

impl RunArgs {
    fn load(&self) -> Result<(SimConfig, Vec<ScenarioEvent>)> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::load(p)?,
            None => SimConfig::default(),
        };
        if let Some(m) = self.mode {
            cfg.ergonomics_mode = match m {
                Mode::Ergonomics => ErgonomicsMode::Ergonomics,
                Mode::Benchmark => ErgonomicsMode::MinVelocityBenchmark,
            };
        }
        if let Some(s) = self.seed {
            cfg.classifier.seed = s;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(d) = self.duration {
            cfg.duration = d;
        }
        cfg.validate()?;
        let events = match &self.scenario {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading scenario {}", p.display()))?;
                parse_events(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => Vec::new(),
        };
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok((cfg, events))
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_log(dir: &Path, stem: &str, log: &SimLog) -> Result<()> {
    write(&dir.join(format!("{stem}.csv")), &log.to_csv()?)?;
    write(&dir.join(format!("{stem}_summary.json")), &log.summary_json())
}

/// Writes whatever was logged before an infeasible step.
fn report_sim_error(err: SimError, out: &Path, stem: &str) -> Result<u8> {
    match err {
        SimError::CascadeInfeasible { t, source, log } => {
            write_log(out, stem, &log)?;
            eprintln!("error: cascade infeasible at t = {t} s: {source}");
            eprintln!("partial log written to {}", out.join(format!("{stem}.csv")).display());
            Ok(EXIT_INFEASIBLE)
        }
        other => Err(other.into()),
    }
}

fn cmd_run(args: &RunArgs) -> Result<u8> {
    let (cfg, events) = args.load()?;
    match run_scenario(&cfg, &events) {
        Ok(log) => {
            write_log(&args.out, "log", &log)?;
            let s = &log.summary;
            println!(
                "{} steps, mean e_s {:.6}, final e_s {:.6}, max slack {:.3e}",
                s.steps, s.mean_e_s, s.final_e_s, s.max_slack
            );
            Ok(0)
        }
        Err(e) => report_sim_error(e, &args.out, "log"),
    }
}

fn cmd_benchmark(args: &RunArgs) -> Result<u8> {
    let (cfg, events) = args.load()?;
    let report = match compare_modes(&cfg, &events) {
        Ok(r) => r,
        Err(e) => return report_sim_error(e, &args.out, "aborted"),
    };
    write_log(&args.out, "ergonomics", &report.ergonomics)?;
    write_log(&args.out, "benchmark", &report.benchmark)?;
    let mut paired = String::from("t,e_s_ergonomics,e_s_benchmark\n");
    for (t, a, b) in report.paired_trace() {
        paired.push_str(&format!("{},{},{}\n", fmt_f64(t), fmt_f64(a), fmt_f64(b)));
    }
    write(&args.out.join("comparison.csv"), &paired)?;
    write(&args.out.join("comparison.json"), &report.summary_json())?;
    println!("{:<12} {:>12} {:>12}", "mode", "mean e_s", "final e_s");
    for log in [&report.ergonomics, &report.benchmark] {
        println!("{:<12} {:>12.6} {:>12.6}", log.summary.mode, log.summary.mean_e_s, log.summary.final_e_s);
    }
    Ok(0)
}

fn cmd_fit_map(grid: &Path, out: &Path) -> Result<u8> {
    let file = fs::File::open(grid).with_context(|| format!("opening {}", grid.display()))?;
    let grid_data = read_grid_csv(file).with_context(|| format!("in {}", grid.display()))?;
    let map = fit_map_from_grid(&grid_data)?;
    write(out, &write_map_dump(&map))?;
    println!("fit {} samples, rms {:e}", grid_data.samples.len(), map.fit_rms.unwrap_or(f64::NAN));
    Ok(0)
}

fn cmd_train_svm(features: &Path, c: f64, variant: SvmVariant, out: &Path) -> Result<u8> {
    let file = fs::File::open(features).with_context(|| format!("opening {}", features.display()))?;
    let data = read_features_csv(file).with_context(|| format!("in {}", features.display()))?;
    let model = train(&data, c, variant)?;
    write(out, &write_model(&model))?;
    println!("trained on {} samples, accuracy {:.2}%", data.len(), 100.0 * accuracy(&model, &data)?);
    Ok(0)
}

fn cmd_check(seed: u64) -> u8 {
    let results = ahqp::check::run_all(seed);
    println!("{:<30} {:>6} {:>12} {:>10}  result", "suite", "cases", "worst", "tol");
    for r in &results {
        let verdict = if r.passed { "pass" } else { "FAIL" };
        println!("{:<30} {:>6} {:>12.3e} {:>10.0e}  {verdict}", r.name, r.cases, r.worst, r.tolerance);
    }
    if results.iter().all(|r| r.passed) {
        0
    } else {
        EXIT_CHECK_FAILED
    }
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::FitMap { grid, out } => cmd_fit_map(grid, out),
        Command::TrainSvm { features, c, variant, out } => {
            if !(*c > 0.0) {
                bail!("--c must be positive");
            }
            cmd_train_svm(features, *c, *variant, out)
        }
        Command::Check { seed } => Ok(cmd_check(*seed)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("AHQP_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

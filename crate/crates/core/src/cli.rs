//! Command-line entry points. The `gsl` binary is a thin wrapper around
//! [`run`].

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, SpecialistInit, PRESET_PPO_DAPG};
use crate::error::{GslError, Result};
use crate::lfd::LfdMethod;
use crate::metrics::read_metrics;
use crate::orchestrator::{consolidate_run, resume_gsl, return_curve, run_baseline, run_gsl, Phase, RunOptions};
use crate::plateau::{detect_plateau, PlateauConfig};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;
pub const EXIT_INSUFFICIENT_DEMOS: u8 = 4;

/// Environment variable naming the default output root.
pub const OUT_ROOT_VAR: &str = "GSL_OUT_ROOT";

#[derive(Debug, Parser)]
#[command(name = "gsl", version, about = "Generalist-specialist policy learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML config file or preset name.
    #[arg(long, default_value = PRESET_PPO_DAPG)]
    pub config: String,
    /// Override a config field, e.g. `--set gsl.total_steps=200000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Concurrent specialist jobs.
    #[arg(long)]
    pub parallel: Option<usize>,
    /// Continue the run in this directory.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Run directory (default: `$GSL_OUT_ROOT/<command>-seed<N>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline.
    Gsl(RunArgs),
    /// Generalist only, for the whole budget.
    Baseline(RunArgs),
    /// Pipeline up to and including demonstration collection.
    SpecialistsOnly(RunArgs),
    /// Full pipeline once per number of variations per specialist.
    AblateK {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        values: Vec<usize>,
    },
    /// Specialists launched at fixed generalist epochs (0 means from
    /// scratch) or at the plateau (`plateau`).
    AblateTiming {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,plateau")]
        epochs: Vec<String>,
    },
    /// One shared set of demos, consolidated by each method.
    AblateLfd {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "dapg,bc")]
        methods: Vec<String>,
    },
    /// Aggregate run directories into comparison tables and series files.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the plateau trigger epoch of a metrics CSV.
    Plateau {
        metrics: PathBuf,
        #[arg(long, default_value_t = 10)]
        kernel: usize,
        #[arg(long, default_value_t = 50)]
        window: usize,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.15)]
        guard: f64,
        /// Budget in epochs for the guard interval (default: curve length).
        #[arg(long)]
        budget: Option<usize>,
    },
}

pub fn exit_code(err: &GslError) -> u8 {
    match err {
        GslError::Config(_) => EXIT_CONFIG,
        GslError::InsufficientDemos { .. } => EXIT_INSUFFICIENT_DEMOS,
        _ => EXIT_RUNTIME,
    }
}

/// Parse arguments, run, and map the outcome to an exit status.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gsl: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn resolve(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    for s in &args.set {
        cfg.apply_override(s)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(p) = args.parallel {
        cfg.parallelism = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(args: &RunArgs, command: &str, cfg: &ExperimentConfig) -> PathBuf {
    args.out.clone().unwrap_or_else(|| {
        let root = std::env::var_os(OUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        root.join(format!("{command}-seed{}", cfg.seed))
    })
}

fn run_pipeline(args: &RunArgs, command: &str, stop_before: Phase) -> Result<()> {
    let opts = RunOptions { stop_before };
    if let Some(dir) = &args.resume {
        let plan = resume_gsl(dir, opts)?;
        println!("{}: phase {:?}", dir.display(), plan.phase);
        return Ok(());
    }
    let cfg = resolve(args)?;
    let out = out_dir(args, command, &cfg);
    let plan = run_gsl(&cfg, &out, opts)?;
    println!(
        "{}: phase {:?}, {} environment steps",
        out.display(),
        plan.phase,
        plan.steps.total()
    );
    Ok(())
}

fn parse_method(s: &str) -> Result<Option<LfdMethod>> {
    match s {
        "dapg" => Ok(Some(LfdMethod::Dapg)),
        "gail" => Ok(Some(LfdMethod::Gail)),
        "bc" => Ok(Some(LfdMethod::Bc)),
        "plain" => Ok(None),
        other => Err(GslError::config(format!("unknown lfd method '{other}'"))),
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Gsl(args) => run_pipeline(&args, "gsl", Phase::Done),
        Command::SpecialistsOnly(args) => run_pipeline(&args, "specialists-only", Phase::GeneralistII),
        Command::Baseline(args) => {
            let cfg = resolve(&args)?;
            let out = out_dir(&args, "baseline", &cfg);
            let rep = run_baseline(&cfg, &out)?;
            println!("{}: {} environment steps", out.display(), rep.total_steps);
            Ok(())
        }
        Command::AblateK { run, values } => {
            let base = resolve(&run)?;
            let out = out_dir(&run, "ablate-k", &base);
            for k in values {
                if k == 0 {
                    return Err(GslError::config("K must be positive"));
                }
                let mut cfg = base.clone();
                cfg.gsl.num_specialists = cfg.gsl.num_low_variations.div_ceil(k);
                cfg.validate()?;
                run_gsl(&cfg, &out.join(format!("k{k}")), RunOptions::default())?;
            }
            println!("{}", out.display());
            Ok(())
        }
        Command::AblateTiming { run, epochs } => {
            let base = resolve(&run)?;
            let out = out_dir(&run, "ablate-timing", &base);
            for e in epochs {
                let mut cfg = base.clone();
                let name = if e == "plateau" {
                    cfg.gsl.trigger_epoch = None;
                    "plateau".to_string()
                } else {
                    let n: usize = e
                        .parse()
                        .map_err(|_| GslError::config(format!("'{e}' is neither an epoch nor 'plateau'")))?;
                    cfg.gsl.trigger_epoch = Some(n);
                    if n == 0 {
                        cfg.gsl.specialist_init = SpecialistInit::Fresh;
                    }
                    format!("epoch{n}")
                };
                run_gsl(
                    &cfg,
                    &out.join(name),
                    RunOptions {
                        stop_before: Phase::Demos,
                    },
                )?;
            }
            println!("{}", out.display());
            Ok(())
        }
        Command::AblateLfd { run, methods } => {
            let base = resolve(&run)?;
            let out = out_dir(&run, "ablate-lfd", &base);
            let shared = out.join("shared");
            let methods: Vec<Option<LfdMethod>> = methods.iter().map(|m| parse_method(m)).collect::<Result<_>>()?;
            run_gsl(
                &base,
                &shared,
                RunOptions {
                    stop_before: Phase::GeneralistII,
                },
            )?;
            for m in methods {
                let rep = consolidate_run(&shared, m, &out.join(crate::orchestrator::method_name(m)), &[])?;
                let ret = rep.after.as_ref().map_or(f64::NAN, |a| a.mean_return());
                println!("{}: final mean return {ret:.3}", crate::orchestrator::method_name(m));
            }
            Ok(())
        }
        Command::Report { runs, out } => {
            let rep = crate::report::report(&runs, &out)?;
            for g in &rep.groups {
                println!(
                    "{:<24} runs {:>2}  final return {:>9.3} +- {:<8.3} success {:.3}",
                    g.group, g.runs, g.final_mean, g.final_std, g.success_mean
                );
            }
            Ok(())
        }
        Command::Plateau {
            metrics,
            kernel,
            window,
            epsilon,
            guard,
            budget,
        } => {
            let cfg = PlateauConfig {
                kernel,
                window,
                epsilon,
                guard,
                ..PlateauConfig::default()
            };
            cfg.validate()?;
            println!(
                "{}",
                plateau_of_file(&metrics, &cfg, budget)?.map_or("none".to_string(), |t| t.to_string())
            );
            Ok(())
        }
    }
}

/// Offline plateau search over a metrics CSV.
pub fn plateau_of_file(path: &Path, cfg: &PlateauConfig, budget: Option<usize>) -> Result<Option<usize>> {
    let rows = read_metrics(path)?;
    let curve = return_curve(&rows);
    let budget = budget.unwrap_or(curve.len());
    if budget < curve.len() {
        return Err(GslError::config("plateau budget is shorter than the curve"));
    }
    Ok(detect_plateau(&curve, cfg, budget))
}

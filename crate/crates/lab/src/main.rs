use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use topochaos_lab::cache::KineticCache;
use topochaos_lab::oracle::{run_oracle_suite, OracleContext};
use topochaos_lab::report::{render_report, ReportInput};
use topochaos_lab::runner::{build_reference, run_convergence, run_couple, run_kinetic, run_simulate, write_convergence};
use topochaos_lab::{ExperimentConfig, LabError, Result};

#[derive(Parser)]
#[command(name = "topolab", version, about = "Topological propagation-of-chaos experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for trial-level parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory of the particle system.
    Simulate {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Solve the kinetic equation and write snapshots.
    Kinetic,
    /// Run one coupled trajectory.
    Couple {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Full convergence study over the configured particle counts.
    Convergence {
        /// Skip the on-disk kinetic cache.
        #[arg(long)]
        no_cache: bool,
    },
    /// Run the oracle suite.
    Oracle {
        /// Run only these checks.
        #[arg(long = "check")]
        checks: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        alpha_scale: f64,
        #[arg(long, default_value_t = 1.0)]
        gain_weight_scale: f64,
    },
    /// Render SVG plots from the CSV output of `convergence`.
    Report {
        /// Directory holding the CSVs; defaults to the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Print the default configuration.
    DefaultConfig,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: Option<&ExperimentConfig>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from("topolab-out"))
}

fn run(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::DefaultConfig => {
            println!("{}", ExperimentConfig::default().to_json());
        }
        Command::Simulate { n } => {
            let mut cfg = load_config(common)?;
            cfg.n = n.or(cfg.n);
            cfg.validate()?;
            let summary = run_simulate(&cfg, &out_dir(common, Some(&cfg)))?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Kinetic => {
            let cfg = load_config(common)?;
            let summary = run_kinetic(&cfg, &out_dir(common, Some(&cfg)))?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Couple { n } => {
            let mut cfg = load_config(common)?;
            cfg.n = n.or(cfg.n);
            cfg.validate()?;
            let out = out_dir(common, Some(&cfg));
            let (model, _) = build_reference(&cfg, Some(&KineticCache::new(out.join("cache"))))?;
            let (rows, path) = run_couple(&cfg, model.as_ref(), &out)?;
            if let Some(last) = rows.last() {
                println!("N = {}: D_N({}) = {} ({})", cfg.single_n(), last.t, last.d_n, path.display());
            }
        }
        Command::Convergence { no_cache } => {
            let cfg = load_config(common)?;
            let out = out_dir(common, Some(&cfg));
            let cache = KineticCache::new(out.join("cache"));
            let (model, status) = build_reference(&cfg, (!no_cache).then_some(&cache))?;
            if let Some(status) = status {
                eprintln!("kinetic reference: cache {status:?}");
            }
            let result = run_convergence(&cfg, model.as_ref(), |study, rows| {
                if let Some(last) = rows.last() {
                    eprintln!(
                        "N = {:5}: mean D_N({}) = {:.5} +- {:.5} (bound {:.3e})",
                        study.n, last.t, last.mean_dn, last.stderr, last.bound
                    );
                }
            })?;
            for path in write_convergence(&result, &out)? {
                eprintln!("wrote {}", path.display());
            }
            match &result.fit {
                Ok(fit) => println!(
                    "slope {:.4} (95% CI [{:.4}, {:.4}]), R^2 {:.4}",
                    fit.slope, fit.ci95_low, fit.ci95_high, fit.r_squared
                ),
                Err(reason) => println!("rate fit skipped: {reason}"),
            }
        }
        Command::Oracle {
            checks,
            alpha_scale,
            gain_weight_scale,
        } => {
            let mut ctx = OracleContext {
                alpha_scale: *alpha_scale,
                gain_weight_scale: *gain_weight_scale,
                ..Default::default()
            };
            if let Some(seed) = common.seed {
                ctx.seed = seed;
            }
            let results = run_oracle_suite(&ctx, checks)?;
            let mut failed = Vec::new();
            for c in &results {
                println!(
                    "{} {:<26} {:>12.4e}  ({})  {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance,
                    c.detail
                );
                if !c.passed {
                    failed.push(c.name);
                }
            }
            if !failed.is_empty() {
                return Err(LabError::Oracle(failed.join(", ")));
            }
        }
        Command::Report { input } => {
            let cfg = common.config.as_ref().map(|_| load_config(common)).transpose()?;
            let out = out_dir(common, cfg.as_ref());
            let input_dir = input.clone().unwrap_or_else(|| out.clone());
            for path in render_report(&ReportInput::load(&input_dir)?, &out)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.common.threads {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(LabError::Config(format!("thread pool: {e}"))),
        },
        None => run(&cli),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

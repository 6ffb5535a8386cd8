use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mpfc_cli::commands::{self, parse_grid};
use mpfc_cli::{load_config, parse_config, CliError, RunConfig, PAPER_CONFIG};
use mpfc_core::OuterFunnel;

const EXIT_AUDIT_FAILED: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "mpfc", version, about = "Model predictive funnel control simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optimizer seed; overrides `optimizer.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory.csv, steps.csv, audit.txt and summary.txt.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// `simulate` with the shipped reference scenario (`configs/paper-example.toml`).
    DemoPaper {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate J on a lattice over the first step's decision space and write landscape.csv.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Lattice size as CxT.
        #[arg(long, default_value = "50x50")]
        grid: String,
        /// Compare against a golden landscape.csv.
        #[arg(long)]
        check: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the audits on emitted trajectory.csv and steps.csv.
    Audit {
        /// Directory holding the emitted files; audit.txt is written here too.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        steps: Option<PathBuf>,
        /// Scenario configuration, for the outer funnel.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn apply(mut cfg: RunConfig, run: &RunArgs) -> RunConfig {
    if let Some(dir) = &run.out {
        cfg.set_out_dir(dir.clone());
    }
    if let Some(seed) = run.seed {
        cfg.set_seed(seed);
    }
    cfg
}

fn verdict(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_AUDIT_FAILED)
    }
}

fn simulate(cfg: RunConfig) -> Result<ExitCode, CliError> {
    let out = commands::simulate(&cfg)?;
    print!("{}", out.summary);
    for p in &out.written {
        println!("wrote {}", p.display());
    }
    if !out.audits.passed() {
        print!("{}", out.audits.render());
    }
    Ok(verdict(out.passed()))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Simulate { config, run } => simulate(apply(load_config(&config)?, &run)),
        Command::DemoPaper { run } => simulate(apply(parse_config(PAPER_CONFIG, "paper-example.toml")?, &run)),
        Command::Oracle {
            config,
            grid,
            check,
            out,
        } => {
            let grid = parse_grid(&grid)?;
            let mut cfg = load_config(&config)?;
            if let Some(dir) = out {
                cfg.set_out_dir(dir);
            }
            let res = commands::oracle(&cfg, grid, check.as_deref())?;
            println!("wrote {} ({} rows)", res.written.display(), res.rows.len());
            if res.all_infeasible {
                println!("warning: every lattice point is infeasible");
            }
            if let Some(best) = res.best {
                println!(
                    "best: c = {}, T = {}, J = {}",
                    best.params.c, best.params.t_final, best.cost
                );
            }
            if let Some(m) = &res.mismatches {
                if m.is_empty() {
                    println!("PASS golden comparison");
                } else {
                    for line in m {
                        println!("FAIL {line}");
                    }
                }
            }
            Ok(verdict(res.passed()))
        }
        Command::Audit {
            out,
            trajectory,
            steps,
            config,
        } => {
            let trajectory = trajectory.unwrap_or_else(|| out.join(commands::TRAJECTORY_FILE));
            let steps = steps.unwrap_or_else(|| out.join(commands::STEPS_FILE));
            let outer = match config {
                Some(p) => load_config(&p)?.outer(),
                None => OuterFunnel::Infinite,
            };
            let res = commands::audit_files(&trajectory, &steps, &outer, &out)?;
            print!("{}", res.audits.render());
            Ok(verdict(res.audits.passed()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MPFC_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

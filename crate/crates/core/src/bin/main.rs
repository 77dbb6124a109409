use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use coherent_soliton::harness::{self, is_usage_error, preset, RunConfig, PRESETS};
use coherent_soliton::Error;

/// Lattice quantum vs classical evolution of NLS solitons.
///
/// Exit status: 0 when every criterion passes, 1 when one fails, 2 on a usage or
/// configuration error.
#[derive(Parser)]
#[command(name = "coherent-soliton", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run(RunArgs),
    /// Run every point of the config's [sweep] axis.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Recompute the criteria of a finished run or sweep from its files.
    Verify {
        /// Directory holding run.json or sweep.json.
        #[arg(long = "out", value_name = "DIR")]
        out: PathBuf,
    },
    /// List the built-in configs, or print one as TOML.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in config by name, see `presets`.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides [output] dir. Defaults to runs/<run_id>.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Abort when a Fock truncation tail exceeds truncation.max_tail.
    #[arg(long)]
    strict_truncation: bool,
}

impl RunArgs {
    fn load(&self) -> coherent_soliton::Result<(RunConfig, PathBuf)> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => {
                let text = preset(name).ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
                RunConfig::from_toml_str(text)?
            }
            (None, None) => unreachable!("clap requires --config or --preset"),
        };
        if self.strict_truncation {
            cfg.truncation.strict = true;
        }
        let out = match (&self.out, &cfg.output) {
            (Some(dir), _) => dir.clone(),
            (None, Some(o)) => o.dir.clone(),
            (None, None) => Path::new("runs").join(cfg.run_id()),
        };
        Ok((cfg, out))
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if is_usage_error(e) {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn verdict(passed: bool) -> ExitCode {
    println!("{}", if passed { "PASS" } else { "FAIL" });
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let (cfg, out) = match args.load() {
                Ok(v) => v,
                Err(e) => return fail(&e),
            };
            info!("run {} ({}) into {}", cfg.run_id(), cfg.scenario.name(), out.display());
            match harness::run(&cfg, &out) {
                Ok(report) => {
                    println!("run_id {} scenario {} out {}", report.run_id, cfg.scenario.name(), out.display());
                    for c in &report.criteria {
                        println!("{}", c.line());
                    }
                    verdict(report.passed)
                }
                Err(e) => fail(&e),
            }
        }
        Command::Sweep { run, workers } => {
            let (cfg, out) = match run.load() {
                Ok(v) => v,
                Err(e) => return fail(&e),
            };
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            match harness::sweep(&cfg, &out, workers) {
                Ok(report) => {
                    println!("sweep {} over {} out {}", report.run_id, report.parameter.name(), out.display());
                    for p in &report.points {
                        match &p.error {
                            Some(e) => println!("ERROR {} {} = {}: {e}", p.dir, report.parameter.name(), p.value),
                            None => println!(
                                "{} {} {} = {}",
                                if p.passed { "PASS" } else { "FAIL" },
                                p.dir,
                                report.parameter.name(),
                                p.value
                            ),
                        }
                    }
                    for c in &report.checks {
                        println!("{}", c.line());
                    }
                    if let Some(r2) = report.s2_linear_r2 {
                        println!("info s2_linear_r2: {r2:.6e}");
                    }
                    verdict(report.passed)
                }
                Err(e) => fail(&e),
            }
        }
        Command::Verify { out } => match harness::verify(&out) {
            Ok(report) => {
                println!("verify {} run_id {}", report.dir, report.run_id);
                for c in &report.criteria {
                    println!("{}", c.line());
                }
                for m in &report.mismatches {
                    println!("MISMATCH {m}");
                }
                verdict(report.passed)
            }
            Err(e) => fail(&e),
        },
        Command::Presets { name: None } => {
            for (name, description, _) in PRESETS {
                println!("{name:<16} {description}");
            }
            ExitCode::SUCCESS
        }
        Command::Presets { name: Some(name) } => match preset(&name) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => fail(&Error::Config(format!("unknown preset {name:?}"))),
        },
    }
}

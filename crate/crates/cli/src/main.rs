use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mlcil_core::ablation::{ablation_ladder, ladder_csv};
use mlcil_core::checks::{check_all, check_loss, LossCheck, LossKind};
use mlcil_core::data::synth_dataset;
use mlcil_core::numeric::GradCheckOptions;
use mlcil_core::report::{ensure_dir, write_ladder, write_run};
use mlcil_core::{parse_config, Experiment, MethodVariant, RunConfig};

#[derive(Parser)]
#[command(name = "mlcil", version, about = "Multi-label class-incremental learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one method over every task and report per-task metrics.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write the final replay memory to buffer_dump.csv.
        #[arg(long)]
        dump_buffer: bool,
    },
    /// Run every method variant plus fixed-decay AKD over several seeds.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of seeds, counted up from --seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
    /// Write the synthetic train and test splits as CSV.
    GenData {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Finite-difference gradient check of every loss.
    CheckGrads {
        /// Random model/batch draws per loss.
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Check a single loss: bce, kd, cls, akd, er or composite.
        #[arg(long)]
        loss: Option<LossKind>,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
    /// Print the effective configuration as TOML.
    ShowConfig {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; built-in defaults apply to anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set loss.alpha=1.0`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Task schedule such as B4-C2.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "MLCIL_OUT_DIR", default_value = "runs")]
    out: PathBuf,
    /// Leave the wall-clock timestamp out of JSON reports.
    #[arg(long)]
    no_timestamp: bool,
}

impl CommonArgs {
    fn load(&self) -> mlcil_core::Result<RunConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = &self.scenario {
            overrides.push(format!("schedule.scenario={s:?}"));
        }
        if let Some(m) = &self.method {
            let method: MethodVariant = m.parse()?;
            overrides.push(format!("method={:?}", method.name()));
        }
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        parse_config(self.config.as_deref(), &overrides)
    }
}

fn print_checks(checks: &[LossCheck]) -> bool {
    let mut ok = true;
    for c in checks {
        let status = if c.passed() { "ok" } else { "FAIL" };
        println!(
            "{:<10} draws={:<4} max_rel_err={:.3e} worst={} analytic={:.6e} numeric={:.6e} {status}",
            c.loss.name(),
            c.draws,
            c.worst.max_relative_error,
            c.worst.worst_param,
            c.worst.analytic,
            c.worst.numeric,
        );
        ok &= c.passed();
    }
    ok
}

fn print_written(dir: &Path, files: &[&str]) {
    for f in files {
        eprintln!("wrote {}", dir.join(f).display());
    }
}

fn execute(cli: Cli) -> mlcil_core::Result<bool> {
    match cli.command {
        Command::Run { common, dump_buffer } => {
            let config = common.load()?;
            let experiment = Experiment::from_config(config.clone())?;
            let (metrics, state) = experiment.run()?;
            write_run(&common.out, &config, &metrics, !common.no_timestamp)?;
            print!("{}", metrics.to_csv_string());
            let mut files = vec!["metrics.csv", "report.json"];
            if dump_buffer {
                let path = common.out.join("buffer_dump.csv");
                state.memory.write_csv(&path, experiment.train.class_names())?;
                files.push("buffer_dump.csv");
            }
            print_written(&common.out, &files);
            Ok(true)
        }
        Command::Ablate { common, seeds } => {
            let config = common.load()?;
            let seed_list: Vec<u64> = (config.seed..config.seed + seeds.max(1)).collect();
            let rows = ablation_ladder(&config, &seed_list)?;
            write_ladder(&common.out, &config, &seed_list, &rows, !common.no_timestamp)?;
            print!("{}", ladder_csv(&rows));
            print_written(&common.out, &["ladder.csv", "ladder.json"]);
            Ok(true)
        }
        Command::GenData { common } => {
            let config = common.load()?;
            let (train, test) = synth_dataset(&config.synth_spec())?;
            ensure_dir(&common.out)?;
            train.write_csv(&common.out.join("train.csv"))?;
            test.write_csv(&common.out.join("test.csv"))?;
            print_written(&common.out, &["train.csv", "test.csv"]);
            Ok(true)
        }
        Command::CheckGrads {
            draws,
            seed,
            loss,
            step,
            tolerance,
        } => {
            let opts = GradCheckOptions {
                step,
                tolerance,
                ..GradCheckOptions::default()
            };
            let checks = match loss {
                Some(kind) => vec![check_loss(kind, draws, seed, opts)?],
                None => check_all(draws, seed, opts)?,
            };
            Ok(print_checks(&checks))
        }
        Command::ShowConfig { common } => {
            print!("{}", common.load()?.to_toml_string());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

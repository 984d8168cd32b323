//! `toolrl`: run the training laboratory from a TOML experiment config.
//!
//! Every subcommand reads the same config format; flags override the handful
//! of fields people sweep from the shell. Failures print a one-line JSON
//! object to stderr and exit nonzero, so scripted sweeps can triage runs
//! without scraping human text.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use toolrl::harness::{self, EvalReport, ExperimentConfig, ExperimentSetup, JudgeStudyConfig};
use toolrl::policy::load_checkpoint;
use toolrl::trainers::{Algorithm, RewardMode};

#[derive(Parser)]
#[command(name = "toolrl", version, about = "Train tool-use planners against process or answer rewards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the run seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArg {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct TrainOverrides {
    /// Override trainer.algorithm (reinforcepp | grpo | ppo).
    #[arg(long)]
    algorithm: Option<String>,
    /// Override trainer.reward_mode (rltr | e2e_answer).
    #[arg(long)]
    reward_mode: Option<String>,
    /// Override trainer.iterations.
    #[arg(long)]
    iterations: Option<usize>,
}

impl TrainOverrides {
    fn apply(&self, config: &mut ExperimentConfig) -> Result<()> {
        if let Some(name) = &self.algorithm {
            config.trainer.algorithm = name.parse::<Algorithm>().map_err(anyhow::Error::msg)?;
        }
        if let Some(name) = &self.reward_mode {
            config.trainer.reward_mode = name.parse::<RewardMode>().map_err(anyhow::Error::msg)?;
        }
        if let Some(iterations) = self.iterations {
            config.trainer.iterations = iterations;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write one task split as JSON lines.
    GenTasks {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        /// Which split to write (train | eval).
        #[arg(long, default_value = "train")]
        split: String,
        /// Override the split's task count.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Distill the scripted teacher into a starting checkpoint.
    ColdStart {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory (created atomically; must not exist).
        #[arg(long)]
        out: PathBuf,
    },
    /// Full run: cold start, reinforcement learning, evaluation artifacts.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        overrides: TrainOverrides,
        /// Output directory (created atomically; must not exist).
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the eval split and print the report.
    Eval {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score both judges as predictors of answer correctness.
    JudgeStudy {
        #[command(flatten)]
        config: ConfigArg,
        /// Rollouts to score.
        #[arg(long)]
        rollouts: Option<usize>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the two reward modes back to back and print a comparison.
    Compare {
        #[command(flatten)]
        config: ConfigArg,
        #[command(flatten)]
        overrides: TrainOverrides,
        /// Parent directory for the two run directories.
        #[arg(long)]
        out: PathBuf,
    },
}

fn eval_line(label: &str, report: &EvalReport) -> String {
    format!(
        "{label}: com {:.3} match {:.3} turns {:.2} invalid {:.3} on {} tasks",
        report.completeness,
        report.answer_match,
        report.mean_turns,
        report.format_invalid_rate,
        report.tasks
    )
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run_train(config: &ExperimentConfig, out: &Path) -> Result<EvalReport> {
    let started = Instant::now();
    let outcome = harness::run_experiment(config, out)?;
    println!("{}", eval_line("cold start", &outcome.cold_eval));
    println!(
        "trained {}/{} for {} iterations in {:.1}s",
        config.trainer.algorithm,
        config.trainer.reward_mode,
        config.trainer.iterations,
        started.elapsed().as_secs_f64()
    );
    println!("{}", eval_line("final", &outcome.final_eval));
    println!("artifacts: {}", outcome.out_dir.display());
    Ok(outcome.final_eval)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenTasks {
            config,
            out,
            split,
            count,
        } => {
            let mut config = config.load()?;
            if let Some(count) = count {
                match split.as_str() {
                    "train" => config.tasks.train_tasks = count,
                    "eval" => config.tasks.eval_tasks = count,
                    _ => {}
                }
            }
            let setup = ExperimentSetup::build(&config)?;
            let tasks = match split.as_str() {
                "train" => &setup.train_tasks,
                "eval" => &setup.eval_tasks,
                other => bail!("unknown split {other:?}; expected train or eval"),
            };
            harness::write_jsonl(&out, tasks)?;
            println!("wrote {} {split} tasks to {}", tasks.len(), out.display());
            Ok(())
        }
        Command::ColdStart { config, out } => {
            let config = config.load()?;
            let (report, dir) = harness::run_cold_start(&config, &out)?;
            println!("{}", eval_line("cold start", &report));
            println!("artifacts: {}", dir.display());
            Ok(())
        }
        Command::Train {
            config,
            overrides,
            out,
        } => {
            let mut config = config.load()?;
            overrides.apply(&mut config)?;
            run_train(&config, &out)?;
            Ok(())
        }
        Command::Eval {
            config,
            checkpoint,
            out,
        } => {
            let config = config.load()?;
            let setup = ExperimentSetup::build(&config)?;
            let theta = load_checkpoint(&checkpoint, setup.featurizer.vocab())
                .with_context(|| format!("loading {}", checkpoint.display()))?;
            let (report, _) = setup.evaluate(&theta);
            write_or_print(
                out.as_deref(),
                &serde_json::to_string_pretty(&report).expect("report serializes"),
            )
        }
        Command::JudgeStudy {
            config,
            rollouts,
            out,
        } => {
            let config = config.load()?;
            let mut study = JudgeStudyConfig::default();
            if let Some(rollouts) = rollouts {
                study.rollouts = rollouts;
            }
            let report = harness::run_judge_study(&config, &study)?;
            write_or_print(
                out.as_deref(),
                &serde_json::to_string_pretty(&report).expect("report serializes"),
            )
        }
        Command::Compare {
            config,
            overrides,
            out,
        } => {
            let mut base = config.load()?;
            overrides.apply(&mut base)?;
            let mut finals = Vec::new();
            for mode in [RewardMode::Rltr, RewardMode::E2eAnswer] {
                let mut config = base.clone();
                config.trainer.reward_mode = mode;
                let dir = out.join(mode.as_str());
                println!("== {mode} ==");
                finals.push((mode, run_train(&config, &dir)?));
            }
            println!();
            println!("{:<12} {:>7} {:>7} {:>7} {:>9}", "mode", "com", "match", "turns", "invalid");
            for (mode, report) in &finals {
                println!(
                    "{:<12} {:>7.3} {:>7.3} {:>7.2} {:>9.3}",
                    mode.to_string(),
                    report.completeness,
                    report.answer_match,
                    report.mean_turns,
                    report.format_invalid_rate
                );
            }
            let (a, b) = (&finals[0].1, &finals[1].1);
            println!(
                "{:<12} {:>+7.3} {:>+7.3}",
                "delta",
                a.completeness - b.completeness,
                a.answer_match - b.answer_match
            );
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        let payload = serde_json::json!({ "error": format!("{err:#}") });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}

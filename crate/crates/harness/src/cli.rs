//! Command-line interface. Every command reads the same flags; a `--config`
//! file supplies defaults for any of them.

use std::path::{Path, PathBuf};

use choice_core::baselines::SelectionStrategy;
use choice_core::textfmt;
use clap::{Args, Parser, Subcommand};

use crate::artifact::{self, read, write, RolloutLog};
use crate::config::{self, Algo, Paths, RunConfig};
use crate::error::{HarnessError, Result};
use crate::experiment::{self, PolicySource};
use crate::report::MetricsReport;

#[derive(Debug, Parser)]
#[command(name = "choice-harness", version, about = "Multimodal imitation-learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a demonstration dataset to `<out>/dataset.jsonl`.
    GenerateData(Flags),
    /// Train on a dataset; writes `<out>/checkpoint.json` and `<out>/loss.csv`.
    Train(Flags),
    /// Roll out one policy; writes the rollout log and metrics into `<out>`.
    Eval(Flags),
    /// Roll out a choice model under every selection strategy.
    Ablate(Flags),
    /// Time inference of one or more checkpoints; writes `<out>/latency.csv`.
    BenchLatency(Flags),
    /// Regenerate metrics from a rollout log.
    Report(Flags),
}

#[derive(Debug, Args, Default)]
pub struct Flags {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// fork, phased or wipe.
    #[arg(long)]
    pub task: Option<String>,
    /// choice, bc, denoiser or scripted.
    #[arg(long)]
    pub algo: Option<String>,
    /// Number of proposals.
    #[arg(long)]
    pub k: Option<usize>,
    /// Actions per chunk.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Hidden width of every network.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Data seed; also the default training and evaluation seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_seed: Option<u64>,
    #[arg(long)]
    pub eval_seed: Option<u64>,
    /// Number of demonstrations.
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Number of evaluation rollouts.
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// score, random, mean or single:<k>.
    #[arg(long)]
    pub selection: Option<String>,
    /// Inference calls per model for bench-latency.
    #[arg(long)]
    pub calls: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dataset file (default `<out>/dataset.jsonl`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Checkpoint file; repeat for bench-latency (default `<out>/checkpoint.json`).
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    /// Rollout log for report (default `<out>/rollouts.jsonl`).
    #[arg(long)]
    pub rollouts: Option<PathBuf>,
}

impl Flags {
    fn pairs(&self) -> Vec<(String, String)> {
        let mut p: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                p.push((k.to_string(), v));
            }
        };
        let path = |x: &Option<PathBuf>| x.as_ref().map(|p| p.display().to_string());
        put("task", self.task.clone());
        put("algo", self.algo.clone());
        put("k", self.k.map(|v| v.to_string()));
        put("horizon", self.horizon.map(|v| v.to_string()));
        put("width", self.width.map(|v| v.to_string()));
        put("epochs", self.epochs.map(|v| v.to_string()));
        put("batch", self.batch.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("train-seed", self.train_seed.map(|v| v.to_string()));
        put("eval-seed", self.eval_seed.map(|v| v.to_string()));
        put("episodes", self.episodes.map(|v| v.to_string()));
        put("eval-episodes", self.eval_episodes.map(|v| v.to_string()));
        put("max-steps", self.max_steps.map(|v| v.to_string()));
        put("selection", self.selection.clone());
        put("calls", self.calls.map(|v| v.to_string()));
        put("out", path(&self.out));
        put("data", path(&self.data));
        put("rollouts", path(&self.rollouts));
        for c in &self.checkpoint {
            put("checkpoint", Some(c.display().to_string()));
        }
        p
    }

    pub fn resolve(&self) -> Result<(RunConfig, Paths)> {
        let file = match &self.config {
            Some(path) => config::parse_config_text(&read(path)?)?,
            None => Vec::new(),
        };
        config::resolve(&file, &self.pairs())
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenerateData(f) => generate_data(f),
        Command::Train(f) => train(f),
        Command::Eval(f) => eval(f, false),
        Command::Ablate(f) => eval(f, true),
        Command::BenchLatency(f) => bench_latency(f),
        Command::Report(f) => report(f),
    }
}

fn generate_data(flags: &Flags) -> Result<()> {
    let (cfg, paths) = flags.resolve()?;
    let env = experiment::build_env(&cfg)?;
    let data = experiment::generate_data(&cfg, env.as_ref())?;
    let path = paths.data_file()?;
    write(&path, &data.to_text()?)?;
    let counts = data.mode_counts(env.num_modes());
    println!(
        "wrote {} episodes ({} steps, mode counts {:?}) to {}",
        data.episodes.len(),
        data.episodes.iter().map(|e| e.steps.len()).sum::<usize>(),
        counts,
        path.display()
    );
    Ok(())
}

fn train(flags: &Flags) -> Result<()> {
    let (cfg, paths) = flags.resolve()?;
    let env = experiment::build_env(&cfg)?;
    let data = artifact::load_dataset(&paths.data_file()?, &cfg)?;
    let (bundle, log) = experiment::train(&cfg, env.as_ref(), &data)?;
    let ckpt = paths.checkpoint_file()?;
    write(&ckpt, &artifact::checkpoint_text(&cfg, &bundle)?)?;
    let loss_path = paths.out_dir()?.join(artifact::LOSS_FILE);
    write(&loss_path, &artifact::loss_csv(&cfg.model_hash()?, &log))?;
    if let Some(last) = log.epochs.last() {
        println!(
            "trained {} for {} epochs: final loss {} (action {}, score {})",
            cfg.algo,
            log.epochs.len(),
            textfmt::real(last.total),
            textfmt::real(last.action),
            textfmt::real(last.score)
        );
    }
    println!("wrote {} and {}", ckpt.display(), loss_path.display());
    Ok(())
}

fn write_reports(out: &Path, log: &RolloutLog) -> Result<MetricsReport> {
    let report = MetricsReport::from_log(log);
    write(&out.join(artifact::SUMMARY_FILE), &report.summary_text())?;
    write(&out.join(artifact::TABLE_FILE), &report.table_csv())?;
    write(&out.join(artifact::HEADS_FILE), &report.heads_csv())?;
    Ok(report)
}

fn eval(flags: &Flags, ablate: bool) -> Result<()> {
    let (cfg, paths) = flags.resolve()?;
    let env = experiment::build_env(&cfg)?;
    let out = paths.out_dir()?;
    let bundle = match cfg.algo {
        Algo::Scripted if ablate => {
            return Err(HarnessError::Config("ablate needs a choice checkpoint".into()));
        }
        Algo::Scripted => None,
        _ => Some(artifact::load_checkpoint(&paths.checkpoint_file()?, &cfg, env.as_ref())?),
    };
    if ablate && cfg.algo != Algo::Choice {
        return Err(HarnessError::Config(format!(
            "ablate compares selection strategies of a choice model, not {}",
            cfg.algo
        )));
    }
    let strategies = if ablate {
        SelectionStrategy::ablation_set(cfg.k)
    } else {
        vec![cfg.selection]
    };
    let source = bundle.as_ref().map_or(PolicySource::Scripted, PolicySource::Model);
    let mut log = experiment::evaluate(&cfg, env.as_ref(), source, &strategies)?;
    if let Some(b) = &bundle {
        let held_out = experiment::held_out_samples(&cfg, env.as_ref())?;
        log.calibration = experiment::score_calibration(b, &held_out)?;
    }
    write(&out.join(artifact::ROLLOUT_FILE), &log.to_text()?)?;
    let report = write_reports(out, &log)?;
    for r in &report.rows {
        println!("{}: {}/{} successful", r.label, r.successes, r.episodes);
    }
    println!("wrote metrics to {}", out.display());
    Ok(())
}

fn bench_latency(flags: &Flags) -> Result<()> {
    let (cfg, paths) = flags.resolve()?;
    let env = experiment::build_env(&cfg)?;
    let out = paths.out_dir()?;
    let checkpoints = if paths.checkpoints.is_empty() {
        vec![paths.checkpoint_file()?]
    } else {
        paths.checkpoints.clone()
    };
    let observations: Vec<Vec<f64>> = experiment::held_out_samples(&cfg, env.as_ref())?
        .into_iter()
        .map(|c| c.sample.obs)
        .collect();
    let mut csv = artifact::text_header(&cfg.eval_hash()?);
    csv.push_str("checkpoint,algo,calls,mean_us,p50_us,p90_us,p99_us,max_us\n");
    for path in &checkpoints {
        // each checkpoint is checked against the configuration with its own algorithm
        let algo: Algo = artifact::read_checkpoint_header(path)?.algo.parse()?;
        let model_cfg = RunConfig { algo, ..cfg.clone() };
        let bundle = artifact::load_checkpoint(path, &model_cfg, env.as_ref())?;
        let s = experiment::bench_latency(&bundle, &observations, cfg.calls, cfg.eval_seed)?;
        csv.push_str(&format!(
            "{},{algo},{},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
            path.display(),
            s.calls,
            s.mean_us,
            s.p50_us,
            s.p90_us,
            s.p99_us,
            s.max_us
        ));
        println!("{} ({algo}): mean {:.3} us, p99 {:.3} us over {} calls", path.display(), s.mean_us, s.p99_us, s.calls);
    }
    write(&out.join(artifact::LATENCY_FILE), &csv)?;
    Ok(())
}

fn report(flags: &Flags) -> Result<()> {
    let (_, paths) = flags.resolve()?;
    let log = RolloutLog::parse(&read(&paths.rollout_file()?)?)?;
    let out = paths.out_dir()?;
    write_reports(out, &log)?;
    println!("wrote metrics to {}", out.display());
    Ok(())
}

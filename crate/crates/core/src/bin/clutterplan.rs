use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use clutterplan::cases::CaseGenerator;
use clutterplan::derive_seed;
use clutterplan::harness::render::{render_episode, render_scene};
use clutterplan::harness::{load_case_dir, run_episode, run_suite, save_case_dir, Config, EpisodeLog, Policy, PolicyKind};
use clutterplan::prior::{collect_transitions, save_model, train, Dataset};
use clutterplan::scene::load_scene;

#[derive(Parser)]
#[command(name = "clutterplan", version, about = "Push-and-grasp planning in planar clutter")]
struct Cli {
    /// TOML configuration; missing sections use defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Mcts,
    Guided,
    Prior,
}

#[derive(clap::Args)]
struct PolicyOpts {
    #[arg(long, value_enum, default_value = "mcts")]
    policy: PolicyArg,
    #[arg(long, default_value_t = 10)]
    budget: usize,
    /// Model file for the guided and prior policies.
    #[arg(long)]
    model: Option<PathBuf>,
}

impl PolicyOpts {
    fn kind(&self) -> Result<PolicyKind> {
        let model = || self.model.clone().context("--model is required for this policy");
        Ok(match self.policy {
            PolicyArg::Mcts => PolicyKind::Mcts { budget: self.budget },
            PolicyArg::Guided => PolicyKind::Guided { budget: self.budget, model: model()? },
            PolicyArg::Prior => PolicyKind::Prior { model: model()? },
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate adversarial cases into a directory.
    GenCases {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 9)]
        objects: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run search episodes on cases and log transitions.
    Collect {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long, default_value_t = 300)]
        budget: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a prior model on a transition dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve one case and optionally render and log the episode.
    Solve {
        #[arg(long)]
        case: PathBuf,
        #[command(flatten)]
        policy: PolicyOpts,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        render_dir: Option<PathBuf>,
        /// Write the episode log (JSON) here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Benchmark a policy over a case directory and write a CSV report.
    Eval {
        #[arg(long)]
        cases: PathBuf,
        #[command(flatten)]
        policy: PolicyOpts,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a case, or replay an episode log, as SVG frames.
    Render {
        #[arg(long)]
        case: Option<PathBuf>,
        #[arg(long)]
        episode_log: Option<PathBuf>,
        #[arg(long, default_value = "frames")]
        out_dir: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(cli.config.as_deref())?;
    let env = cfg.env();
    match cli.command {
        Command::GenCases { seed, count, objects, out_dir } => {
            let generator = CaseGenerator { workspace: cfg.workspace, gripper: cfg.gripper, oracle: cfg.oracle, ..CaseGenerator::default() };
            let cases = (0..count as u64)
                .map(|i| Ok((i, generator.generate(derive_seed(seed, i), objects)?)))
                .collect::<Result<Vec<_>>>()?;
            let paths = save_case_dir(&cases, &out_dir)?;
            println!("wrote {} cases to {}", paths.len(), out_dir.display());
        }
        Command::Collect { cases, budget, out, seed } => {
            let cases = load_case_dir(&cases)?;
            let mut ccfg = cfg.collect;
            ccfg.mcts = ccfg.mcts.with_budget(budget);
            let ds = collect_transitions(&cases, &ccfg, &env, seed, cfg.harness.execution);
            ds.save(&out)?;
            println!("{} transitions from {} cases -> {}", ds.len(), cases.len(), out.display());
        }
        Command::Train { dataset, out, seed } => {
            let ds = Dataset::load(&dataset)?;
            let mut tcfg = cfg.training;
            if let Some(s) = seed {
                tcfg.seed = s;
            }
            let (model, report) = train(&ds, &tcfg, &cfg.workspace, &cfg.tip, cfg.harness.execution)?;
            save_model(&model, &out)?;
            let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
            println!(
                "trained on {} cells; train loss {:.5}, held-out loss {:.5} (zero predictor {:.5}){}",
                report.train_samples,
                last(&report.train_loss),
                last(&report.heldout_loss),
                report.zero_heldout_loss,
                if report.heldout_is_train { ", held-out = train" } else { "" }
            );
        }
        Command::Solve { case, policy, seed, render_dir, log } => {
            let scene = load_scene(&case)?;
            let policy = Policy::resolve(&policy.kind()?, &cfg)?;
            let res = run_episode(&scene, &policy, &env, cfg.harness.action_cap, seed);
            println!(
                "pushes {} completed {} grasp_success {} failure {:?} substeps {} time {:.2}s",
                res.pushes_executed, res.completed, res.grasp_succeeded, res.failure_reason, res.simulator_substeps, res.wall_time_s
            );
            let episode = EpisodeLog::new(&scene, &res.action_log);
            if let Some(p) = log {
                episode.save(&p)?;
            }
            if let Some(dir) = render_dir {
                let frames = render_episode(&scene, &episode.actions, &env, &dir)?;
                println!("{} frames in {}", frames.len(), dir.display());
            }
        }
        Command::Eval { cases, policy, trials, seed, out } => {
            let cases = load_case_dir(&cases)?;
            if cases.is_empty() {
                bail!("no cases found");
            }
            let policy = Policy::resolve(&policy.kind()?, &cfg)?;
            let trials = trials.unwrap_or(cfg.harness.trials);
            let report = run_suite(&cases, &policy, trials, seed, &env, &cfg.harness);
            report.save_csv(&out, cfg.harness.record_wall_time)?;
            let s = &report.summary;
            println!(
                "{}: {} episodes, mean actions {:.3}, mean pushes {:.3}, completion {:.1}%, grasp success {:.1}%, mean substeps {:.0}",
                report.policy,
                s.episodes,
                s.mean_actions,
                s.mean_pushes,
                100.0 * s.completion_rate,
                100.0 * s.grasp_success_rate,
                s.mean_substeps
            );
        }
        Command::Render { case, episode_log, out_dir } => {
            let frames = match (episode_log, case) {
                (Some(log), _) => {
                    let log = EpisodeLog::load(&log)?;
                    render_episode(&log.scene, &log.actions, &env, &out_dir)?
                }
                (None, Some(case)) => vec![render_scene(&load_scene(&case)?, &out_dir, &env)?],
                (None, None) => bail!("pass --case or --episode-log"),
            };
            println!("{} frames in {}", frames.len(), out_dir.display());
        }
    }
    Ok(())
}

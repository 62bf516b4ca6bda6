//! Episode execution, benchmark suites, reports and rendering.

pub mod config;
pub mod render;
pub mod report;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::grasp::best_grasp;
use crate::guided::{guided_search, prior_actions, GuidedConfig};
use crate::mcts::{search, MctsConfig};
use crate::par::{self, Execution};
use crate::prior::{load_model, PriorError, PriorModel};
use crate::scene::{load_scene, save_scene, Scene, SceneError};
use crate::sim::{simulate_push, PushAction};
use crate::tree::{Decision, PlanEnv, SearchError};
use crate::{derive_seed, rng_for};

pub use config::{Config, HarnessConfig};
pub use report::{BenchmarkReport, ReportRow, Summary};

pub const EPISODE_FORMAT: &str = "episode/v1";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unsupported episode log format {0:?}")]
    Format(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolicyKind {
    Mcts { budget: usize },
    Guided { budget: usize, model: PathBuf },
    Prior { model: PathBuf },
}

/// A policy with its model loaded and configuration resolved.
#[derive(Clone, Debug)]
pub enum Policy {
    Mcts(MctsConfig),
    Guided(GuidedConfig, Arc<PriorModel>),
    PriorOnly(Arc<PriorModel>),
}

impl Policy {
    pub fn resolve(kind: &PolicyKind, cfg: &Config) -> Result<Self, PriorError> {
        Ok(match kind {
            PolicyKind::Mcts { budget } => Policy::Mcts(cfg.mcts.with_budget((*budget).max(1))),
            PolicyKind::Guided { budget, model } => {
                Policy::Guided(cfg.guided.with_budget((*budget).max(1)), Arc::new(load_model(model)?))
            }
            PolicyKind::Prior { model } => Policy::PriorOnly(Arc::new(load_model(model)?)),
        })
    }

    pub fn name(&self) -> String {
        match self {
            Policy::Mcts(c) => format!("mcts-{}", c.n_max),
            Policy::Guided(c, _) => format!("guided-{}", c.n_max),
            Policy::PriorOnly(_) => "prior".into(),
        }
    }

    fn n_push_per_object(&self) -> usize {
        match self {
            Policy::Mcts(c) => c.n_push_per_object,
            Policy::Guided(c, _) => c.n_push_per_object,
            Policy::PriorOnly(_) => MctsConfig::default().n_push_per_object,
        }
    }
}

/// Highest-prior sampled push; ties go to the first in sampling order.
pub fn prior_only_policy(model: &PriorModel, scene: &Scene, env: &PlanEnv, n_per_object: usize) -> Result<PushAction, SearchError> {
    let cands = prior_actions(model, scene, n_per_object, env);
    crate::mcts::argmax_by(&cands, |c| c.1).map(|i| cands[i].0).ok_or(SearchError::Unsolvable)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    TargetOut,
    ActionCap,
    Unsolvable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LoggedAction {
    Push { start: [f64; 2], end: [f64; 2] },
    Grasp { x: f64, y: f64, theta_bin: usize, score: f64 },
}

impl LoggedAction {
    pub fn push(a: &PushAction) -> Self {
        LoggedAction::Push { start: [a.start.x, a.start.y], end: [a.end.x, a.end.y] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub pushes_executed: usize,
    pub grasp_attempted: bool,
    pub grasp_succeeded: bool,
    pub completed: bool,
    pub failure_reason: Option<FailureReason>,
    pub wall_time_s: f64,
    /// Simulator substeps spent planning and executing.
    pub simulator_substeps: usize,
    pub action_log: Vec<LoggedAction>,
}

impl EpisodeResult {
    /// Pushes plus the grasp, if one was attempted.
    pub fn actions_total(&self) -> usize {
        self.pushes_executed + self.grasp_attempted as usize
    }
}

/// Push until the target is graspable, then grasp. Stops early when the
/// target leaves the workspace, the push cap is reached, or the policy has
/// no action.
pub fn run_episode(scene: &Scene, policy: &Policy, env: &PlanEnv, action_cap: usize, seed: u64) -> EpisodeResult {
    let t0 = Instant::now();
    let mut current = scene.clone();
    let mut res = EpisodeResult {
        pushes_executed: 0,
        grasp_attempted: false,
        grasp_succeeded: false,
        completed: false,
        failure_reason: None,
        wall_time_s: 0.0,
        simulator_substeps: 0,
        action_log: Vec::new(),
    };
    loop {
        if env.summarize(&current).terminal {
            let (g, score) = best_grasp(&current, &env.gripper, &env.oracle);
            res.grasp_attempted = true;
            res.grasp_succeeded = score > env.oracle.r_gstar;
            res.completed = res.grasp_succeeded;
            res.action_log.push(LoggedAction::Grasp { x: g.x, y: g.y, theta_bin: g.theta_bin, score });
            break;
        }
        if res.pushes_executed >= action_cap {
            res.failure_reason = Some(FailureReason::ActionCap);
            break;
        }
        let mut rng = rng_for(seed, res.pushes_executed as u64);
        let planned = match policy {
            Policy::Mcts(c) => search(&current, c, env, &mut rng).map(|r| (r.decision, r.simulator_substeps_used)),
            Policy::Guided(c, m) => guided_search(&current, m, c, env, &mut rng).map(|r| (r.decision, r.simulator_substeps_used)),
            Policy::PriorOnly(m) => {
                prior_only_policy(m, &current, env, policy.n_push_per_object()).map(|a| (Decision::Push(a), 0))
            }
        };
        let action = match planned {
            Ok((Decision::Push(a), sub)) => {
                res.simulator_substeps += sub;
                a
            }
            // search only grasps from a terminal root, handled above
            Ok((Decision::Grasp(..), _)) => unreachable!("non-terminal root"),
            Err(SearchError::Unsolvable) => {
                res.failure_reason = Some(FailureReason::Unsolvable);
                break;
            }
        };
        let out = simulate_push(&current, &action, &env.tip, &env.sim);
        res.simulator_substeps += out.substeps;
        res.pushes_executed += 1;
        res.action_log.push(LoggedAction::push(&action));
        if out.target_lost(current.target_id) {
            res.failure_reason = Some(FailureReason::TargetOut);
            break;
        }
        current = out.next_scene;
    }
    res.wall_time_s = t0.elapsed().as_secs_f64();
    res
}

pub fn episode_seed(seed: u64, case_id: u64, trial: usize) -> u64 {
    derive_seed(derive_seed(seed, case_id), trial as u64)
}

/// Run `trials` episodes per case. Episodes are independent and may run in
/// parallel; rows are ordered by (case position, trial).
pub fn run_suite(
    cases: &[(u64, Scene)],
    policy: &Policy,
    trials: usize,
    seed: u64,
    env: &PlanEnv,
    harness: &HarnessConfig,
) -> BenchmarkReport {
    let jobs: Vec<(usize, usize)> = (0..cases.len()).flat_map(|c| (0..trials).map(move |t| (c, t))).collect();
    let exec: Execution = harness.execution;
    let results = par::map(exec, &jobs, |&(c, t)| {
        let (id, scene) = &cases[c];
        run_episode(scene, policy, env, harness.action_cap, episode_seed(seed, *id, t))
    });
    let rows = jobs
        .iter()
        .zip(&results)
        .map(|(&(c, t), r)| ReportRow::from_episode(cases[c].0, t, r))
        .collect();
    BenchmarkReport::new(policy.name(), rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub format: String,
    pub scene: Scene,
    pub actions: Vec<LoggedAction>,
}

impl EpisodeLog {
    pub fn new(scene: &Scene, actions: &[LoggedAction]) -> Self {
        Self { format: EPISODE_FORMAT.into(), scene: scene.clone(), actions: actions.to_vec() }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(io_err(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let log: Self = serde_json::from_str(&text)?;
        if log.format != EPISODE_FORMAT {
            return Err(HarnessError::Format(log.format));
        }
        log.scene.validate()?;
        Ok(log)
    }
}

/// Cases in `dir`, sorted by file name. The case id is the number in the
/// file name (`case_0007.json` is case 7), or the position when there is none.
pub fn load_case_dir(dir: impl AsRef<Path>) -> Result<Vec<(u64, Scene)>, HarnessError> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            let digits: String = stem.chars().filter(|c| c.is_ascii_digit()).collect();
            let id = digits.parse().unwrap_or(i as u64);
            Ok((id, load_scene(p)?))
        })
        .collect()
}

pub fn case_file_name(id: u64) -> String {
    format!("case_{id:04}.json")
}

pub fn save_case_dir(cases: &[(u64, Scene)], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, HarnessError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    cases
        .iter()
        .map(|(id, s)| {
            let p = dir.join(case_file_name(*id));
            save_scene(s, &p)?;
            Ok(p)
        })
        .collect()
}

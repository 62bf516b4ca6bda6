//! Prior-guided tree search.
//!
//! Each sampled push gets its predicted value as a phantom first visit, so
//! untried actions are expanded in descending prior order. Rollouts pick
//! pushes by a softmax over priors, and the final push maximizes prior plus
//! best backed-up reward.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grasp::best_grasp;
use crate::mcts::{argmax_by, rollout_with, sample_push_actions, stop_check, MctsConfig};
use crate::prior::{PriorModel, ScenePriors};
use crate::scene::Scene;
use crate::sim::PushAction;
use crate::tree::{Decision, Edge, NodeState, PlanEnv, SearchError, SearchResult, SearchTree};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidedConfig {
    pub c: f64,
    pub m_guide: usize,
    pub max_depth: usize,
    pub n_init: u32,
    pub n_max: usize,
    pub rollout_softmax_temp: f64,
    pub gamma: f64,
    pub early_stop_min_rollouts: usize,
    pub n_push_per_object: usize,
}

impl Default for GuidedConfig {
    fn default() -> Self {
        Self {
            c: 0.0,
            m_guide: 3,
            max_depth: 3,
            n_init: 1,
            n_max: 10,
            rollout_softmax_temp: 0.2,
            gamma: 0.5,
            early_stop_min_rollouts: 50,
            n_push_per_object: 16,
        }
    }
}

impl GuidedConfig {
    pub fn with_budget(self, n_max: usize) -> Self {
        Self { n_max, ..self }
    }
}

/// `(max_qp + sum of the m largest rewards) / n_sa`.
pub fn q_guide(max_qp: f64, rewards: &[f64], n_sa: u32, m: usize) -> f64 {
    let mut sorted = rewards.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    (max_qp + sorted.iter().take(m).sum::<f64>()) / n_sa.max(1) as f64
}

pub fn q_best(max_qp: f64, rewards: &[f64]) -> f64 {
    max_qp + rewards.iter().copied().fold(0.0, f64::max)
}

fn edge_q_guide(e: &Edge, m: usize) -> f64 {
    (e.prior + e.top_sum(m)) / e.visits.max(1) as f64
}

/// Sampled pushes of `scene` with their predicted values. A push whose
/// start cannot be mapped into the rotated grid gets prior 0.
pub fn prior_actions(model: &PriorModel, scene: &Scene, n_per_object: usize, env: &PlanEnv) -> Vec<(PushAction, f64)> {
    let actions = sample_push_actions(scene, n_per_object, &env.tip);
    let Ok(mut priors) = ScenePriors::new(model, scene) else {
        return actions.into_iter().map(|a| (a, 0.0)).collect();
    };
    actions.into_iter().map(|a| {
        let q = priors.action_q(&a).unwrap_or(0.0);
        (a, q)
    }).collect()
}

fn softmax_push<R: Rng>(model: &PriorModel, scene: &Scene, cfg: &GuidedConfig, env: &PlanEnv, rng: &mut R) -> Option<PushAction> {
    let cands = prior_actions(model, scene, cfg.n_push_per_object, env);
    let top = cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let temp = cfg.rollout_softmax_temp.max(1e-6);
    let weights: Vec<f64> = cands.iter().map(|c| ((c.1 - top) / temp).exp()).collect();
    let dist = WeightedIndex::new(&weights).ok()?;
    Some(cands[dist.sample(rng)].0)
}

fn ensure_edges(tree: &mut SearchTree, node: usize, model: &PriorModel, cfg: &GuidedConfig, env: &PlanEnv) {
    if tree.nodes[node].edges.is_none() {
        let scene = tree.nodes[node].scene.clone();
        let edges = prior_actions(model, &scene, cfg.n_push_per_object, env)
            .into_iter()
            .map(|(a, q)| Edge::new(a, cfg.n_init, q))
            .collect();
        tree.nodes[node].edges = Some(edges);
    }
}

fn select(tree: &mut SearchTree, model: &PriorModel, cfg: &GuidedConfig, env: &PlanEnv) -> Vec<(usize, usize)> {
    let mut path = Vec::new();
    let mut node = 0;
    loop {
        let n = &tree.nodes[node];
        if n.state != NodeState::Open || n.depth >= cfg.max_depth {
            break;
        }
        ensure_edges(tree, node, model, cfg, env);
        let n_s = tree.nodes[node].visits as f64;
        let edges = tree.edges(node);
        let Some(best) = argmax_by(edges, |e| {
            edge_q_guide(e, cfg.m_guide) + cfg.c * (n_s.ln() / e.visits.max(1) as f64).sqrt()
        }) else {
            break;
        };
        path.push((node, best));
        match edges[best].child {
            Some(c) => node = c,
            None => break,
        }
    }
    path
}

pub fn guided_search_with_tree<R: Rng>(
    scene: &Scene,
    model: &PriorModel,
    cfg: &GuidedConfig,
    env: &PlanEnv,
    rng: &mut R,
) -> Result<(SearchResult, SearchTree), SearchError> {
    let mut tree = SearchTree::new(scene.clone(), env);
    if tree.root().state == NodeState::Terminal {
        let (g, s) = best_grasp(scene, &env.gripper, &env.oracle);
        let result = SearchResult { decision: Decision::Grasp(g, s), iterations_used: 0, simulator_substeps_used: 0, transitions: Vec::new() };
        return Ok((result, tree));
    }
    ensure_edges(&mut tree, 0, model, cfg, env);
    if tree.edges(0).is_empty() {
        return Err(SearchError::Unsolvable);
    }
    let stop = MctsConfig { n_max: cfg.n_max, early_stop_min_rollouts: cfg.early_stop_min_rollouts, ..MctsConfig::default() };
    let mut iterations = 0;
    while !stop_check(&tree, iterations, &stop) {
        let path = select(&mut tree, model, cfg, env);
        let &(node, edge) = path.last().expect("root has actions");
        let reward = match tree.edges(node)[edge].child {
            Some(leaf) => tree.nodes[leaf].leaf_reward(),
            None => {
                let child = tree.expand(node, edge, env);
                let c = &tree.nodes[child];
                match c.state {
                    NodeState::Failed => 0.0,
                    NodeState::Terminal => c.grasp.reward,
                    NodeState::Open if c.depth >= cfg.max_depth => c.grasp.reward,
                    NodeState::Open => {
                        let (s, summary, remaining) = (c.scene.clone(), c.grasp, cfg.max_depth - c.depth);
                        let mut substeps = 0;
                        let r = rollout_with(&s, summary, remaining, rng, env, cfg.gamma, &mut substeps, |sc, r| {
                            softmax_push(model, sc, cfg, env, r)
                        });
                        tree.substeps += substeps;
                        r
                    }
                }
            }
        };
        tree.backpropagate(&path, reward, cfg.gamma);
        iterations += 1;
    }
    let edges = tree.edges(0);
    let best = argmax_by(edges, |e| e.prior + e.best_reward()).expect("root has actions");
    let result = SearchResult {
        decision: Decision::Push(edges[best].action),
        iterations_used: iterations,
        simulator_substeps_used: tree.substeps,
        transitions: Vec::new(),
    };
    Ok((result, tree))
}

pub fn guided_search<R: Rng>(
    scene: &Scene,
    model: &PriorModel,
    cfg: &GuidedConfig,
    env: &PlanEnv,
    rng: &mut R,
) -> Result<SearchResult, SearchError> {
    guided_search_with_tree(scene, model, cfg, env, rng).map(|(r, _)| r)
}

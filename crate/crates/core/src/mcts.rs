//! Plain Monte Carlo tree search over push sequences.
//!
//! Selection maximizes `Q + C * sqrt(ln N(s) / N(s, a))` where `Q` averages
//! only the best `m` backed-up rewards. New states come from the push
//! simulator, leaves are scored by a uniform random rollout, and rewards are
//! discounted by `gamma` per push on the way back up.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Footprint, Vec2};
use crate::grasp::{best_grasp, GraspSummary};
use crate::prior::dataset::records_from_tree;
use crate::scene::Scene;
use crate::sim::{check_with_footprints, simulate_push, PushAction, PushValidity, TipSpec};
use crate::tree::{Decision, Edge, NodeState, PlanEnv, SearchError, SearchResult, SearchTree};

/// Clearance between an object's contour and the sampled tip start.
pub const CONTOUR_MARGIN_M: f64 = 0.002;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MctsConfig {
    pub c_expand: f64,
    pub c_select: f64,
    pub m_expand: usize,
    pub m_select: usize,
    pub gamma: f64,
    pub max_depth: usize,
    pub n_max: usize,
    pub early_stop_min_rollouts: usize,
    pub n_push_per_object: usize,
    /// Log (state, action, Q, N) tuples for every expanded edge.
    pub record_transitions: bool,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            c_expand: 2.0,
            c_select: 0.0,
            m_expand: 10,
            m_select: 1,
            gamma: 0.5,
            max_depth: 4,
            n_max: 300,
            early_stop_min_rollouts: 50,
            n_push_per_object: 16,
            record_transitions: false,
        }
    }
}

impl MctsConfig {
    pub fn with_budget(self, n_max: usize) -> Self {
        Self { n_max, ..self }
    }
}

/// Distance from the centroid along `dir` at which the footprint's
/// clearance reaches `clearance`.
fn dilated_contour_distance(fp: &Footprint, dir: &Vec2, clearance: f64) -> f64 {
    match fp {
        Footprint::Disc { radius, .. } => radius + clearance,
        Footprint::Polygon { centroid, .. } => {
            let (mut lo, mut hi) = (0.0, fp.bounding_radius() + clearance + 1e-3);
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if fp.point_distance(&(centroid + dir * mid)) < clearance {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        }
    }
}

/// The `k`-th of `n` contour pushes for one object: starts on the contour
/// dilated by the tip radius plus a margin and heads for the centroid.
pub fn contour_action(fp: &Footprint, k: usize, n: usize, tip: &TipSpec) -> PushAction {
    let phi = std::f64::consts::TAU * k as f64 / n as f64;
    let dir = Vec2::new(phi.cos(), phi.sin());
    let s = dilated_contour_distance(fp, &dir, tip.radius + CONTOUR_MARGIN_M);
    let start = fp.centroid() + dir * s;
    PushAction::from_angle(start, phi + std::f64::consts::PI)
}

fn admissible(scene: &Scene, prints: &[Footprint], a: &PushAction, tip: &TipSpec) -> bool {
    scene.workspace.contains(&a.start)
        && scene.workspace.contains(&a.end)
        && check_with_footprints(prints, a, tip) != PushValidity::StartCollision
}

/// Contour pushes for every object, ordered by (object id, sample angle),
/// with start collisions and out-of-workspace pushes removed.
pub fn sample_push_actions(scene: &Scene, n_per_object: usize, tip: &TipSpec) -> Vec<PushAction> {
    let prints = scene.footprints();
    let mut out = Vec::with_capacity(prints.len() * n_per_object);
    for fp in &prints {
        for k in 0..n_per_object {
            let a = contour_action(fp, k, n_per_object, tip);
            if admissible(scene, &prints, &a, tip) {
                out.push(a);
            }
        }
    }
    out
}

/// Uniform draw from [`sample_push_actions`] by rejection.
fn random_push<R: Rng>(scene: &Scene, n_per_object: usize, tip: &TipSpec, rng: &mut R) -> Option<PushAction> {
    let prints = scene.footprints();
    let total = prints.len() * n_per_object;
    if total == 0 {
        return None;
    }
    for _ in 0..64 {
        let i = rng.gen_range(0..total);
        let a = contour_action(&prints[i / n_per_object], i % n_per_object, n_per_object, tip);
        if admissible(scene, &prints, &a, tip) {
            return Some(a);
        }
    }
    let all = sample_push_actions(scene, n_per_object, tip);
    if all.is_empty() {
        None
    } else {
        Some(all[rng.gen_range(0..all.len())])
    }
}

pub fn ucb_score(q: f64, n_s: u32, n_sa: u32, c: f64) -> f64 {
    if n_sa == 0 {
        return f64::INFINITY;
    }
    q + c * ((n_s as f64).ln() / n_sa as f64).sqrt()
}

/// Mean of the `m` largest rewards, dividing by `min(n_sa, m)`.
pub fn q_value(rewards: &[f64], n_sa: u32, m: usize) -> f64 {
    let denom = (n_sa as usize).min(m);
    if rewards.is_empty() || denom == 0 {
        return 0.0;
    }
    let mut sorted = rewards.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.iter().take(m).sum::<f64>() / denom as f64
}

pub(crate) fn edge_q(e: &Edge, m: usize) -> f64 {
    let denom = (e.visits as usize).min(m);
    if denom == 0 {
        0.0
    } else {
        e.top_sum(m) / denom as f64
    }
}

/// Index of the largest score; ties go to the lowest index.
pub(crate) fn argmax_by<T>(items: &[T], score: impl Fn(&T) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, it) in items.iter().enumerate() {
        let s = score(it);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

fn ensure_edges(tree: &mut SearchTree, node: usize, cfg: &MctsConfig, env: &PlanEnv) {
    if tree.nodes[node].edges.is_none() {
        let actions = sample_push_actions(&tree.nodes[node].scene, cfg.n_push_per_object, &env.tip);
        tree.nodes[node].edges = Some(actions.into_iter().map(|a| Edge::new(a, 0, 0.0)).collect());
    }
}

/// Walk from the root by UCB until reaching an untried action, the depth
/// cap, or a leaf. The returned path ends with the edge to expand or the
/// edge into the leaf.
pub fn select(tree: &mut SearchTree, cfg: &MctsConfig, env: &PlanEnv) -> Vec<(usize, usize)> {
    let mut path = Vec::new();
    let mut node = 0;
    loop {
        let n = &tree.nodes[node];
        if n.state != NodeState::Open || n.depth >= cfg.max_depth {
            break;
        }
        ensure_edges(tree, node, cfg, env);
        let n_s = tree.nodes[node].visits;
        let edges = tree.edges(node);
        let Some(best) =
            argmax_by(edges, |e| ucb_score(edge_q(e, cfg.m_expand), n_s, e.visits, cfg.c_expand))
        else {
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

pub fn expand(tree: &mut SearchTree, node: usize, edge: usize, env: &PlanEnv) -> usize {
    tree.expand(node, edge, env)
}

/// Roll out from `scene` choosing pushes with `choose` until a terminal
/// state, a failure, no available action, or `depth_remaining` pushes.
pub(crate) fn rollout_with<R: Rng>(
    scene: &Scene,
    summary: GraspSummary,
    depth_remaining: usize,
    rng: &mut R,
    env: &PlanEnv,
    gamma: f64,
    substeps: &mut usize,
    mut choose: impl FnMut(&Scene, &mut R) -> Option<PushAction>,
) -> f64 {
    let mut current = scene.clone();
    let mut summary = summary;
    let mut discount = 1.0;
    for _ in 0..depth_remaining {
        if summary.terminal {
            break;
        }
        let Some(action) = choose(&current, rng) else {
            break;
        };
        let out = simulate_push(&current, &action, &env.tip, &env.sim);
        *substeps += out.substeps;
        discount *= gamma;
        if out.target_lost(current.target_id) {
            return 0.0;
        }
        current = out.next_scene;
        summary = env.summarize(&current);
    }
    summary.reward * discount
}

/// Random-policy rollout; returns the discounted terminal reward at the
/// state where it stopped.
pub fn rollout<R: Rng>(scene: &Scene, depth_remaining: usize, rng: &mut R, env: &PlanEnv, cfg: &MctsConfig) -> f64 {
    let mut substeps = 0;
    let summary = env.summarize(scene);
    let n = cfg.n_push_per_object;
    rollout_with(scene, summary, depth_remaining, rng, env, cfg.gamma, &mut substeps, |s, r| random_push(s, n, &env.tip, r))
}

pub fn backpropagate(tree: &mut SearchTree, path: &[(usize, usize)], reward: f64, gamma: f64) {
    tree.backpropagate(path, reward, gamma);
}

pub fn stop_check(tree: &SearchTree, iterations: usize, cfg: &MctsConfig) -> bool {
    iterations >= cfg.n_max
        || (iterations >= cfg.early_stop_min_rollouts && tree.solved_level_complete())
}

/// Value of a freshly expanded child.
fn evaluate_child<R: Rng>(tree: &mut SearchTree, child: usize, max_depth: usize, rng: &mut R, env: &PlanEnv, cfg: &MctsConfig) -> f64 {
    let node = &tree.nodes[child];
    match node.state {
        NodeState::Failed => 0.0,
        NodeState::Terminal => node.grasp.reward,
        NodeState::Open if node.depth >= max_depth => node.grasp.reward,
        NodeState::Open => {
            let scene = node.scene.clone();
            let summary = node.grasp;
            let remaining = max_depth - node.depth;
            let mut substeps = 0;
            let n = cfg.n_push_per_object;
            let r = rollout_with(&scene, summary, remaining, rng, env, cfg.gamma, &mut substeps, |s, r| {
                random_push(s, n, &env.tip, r)
            });
            tree.substeps += substeps;
            r
        }
    }
}

/// Run the search and keep the tree for inspection.
pub fn search_with_tree<R: Rng>(
    scene: &Scene,
    cfg: &MctsConfig,
    env: &PlanEnv,
    rng: &mut R,
) -> Result<(SearchResult, SearchTree), SearchError> {
    let mut tree = SearchTree::new(scene.clone(), env);
    if tree.root().state == NodeState::Terminal {
        let (g, s) = best_grasp(scene, &env.gripper, &env.oracle);
        let result = SearchResult {
            decision: Decision::Grasp(g, s),
            iterations_used: 0,
            simulator_substeps_used: 0,
            transitions: Vec::new(),
        };
        return Ok((result, tree));
    }
    ensure_edges(&mut tree, 0, cfg, env);
    if tree.edges(0).is_empty() {
        return Err(SearchError::Unsolvable);
    }
    let mut iterations = 0;
    while !stop_check(&tree, iterations, cfg) {
        let path = select(&mut tree, cfg, env);
        let &(node, edge) = path.last().expect("root has actions");
        let reward = match tree.edges(node)[edge].child {
            Some(leaf) => tree.nodes[leaf].leaf_reward(),
            None => {
                let child = expand(&mut tree, node, edge, env);
                evaluate_child(&mut tree, child, cfg.max_depth, rng, env, cfg)
            }
        };
        backpropagate(&mut tree, &path, reward, cfg.gamma);
        iterations += 1;
    }
    let edges = tree.edges(0);
    let best = if cfg.c_select == 0.0 {
        argmax_by(edges, |e| edge_q(e, cfg.m_select))
    } else {
        let n_s = tree.root().visits;
        argmax_by(edges, |e| ucb_score(edge_q(e, cfg.m_select), n_s, e.visits, cfg.c_select))
    }
    .expect("root has actions");
    let transitions = if cfg.record_transitions { records_from_tree(&tree, cfg.m_expand) } else { Vec::new() };
    let result = SearchResult {
        decision: Decision::Push(edges[best].action),
        iterations_used: iterations,
        simulator_substeps_used: tree.substeps,
        transitions,
    };
    Ok((result, tree))
}

pub fn search<R: Rng>(scene: &Scene, cfg: &MctsConfig, env: &PlanEnv, rng: &mut R) -> Result<SearchResult, SearchError> {
    search_with_tree(scene, cfg, env, rng).map(|(r, _)| r)
}

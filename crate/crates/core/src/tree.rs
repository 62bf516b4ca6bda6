//! Search tree shared by plain and prior-guided MCTS.

use std::sync::Arc;

use thiserror::Error;

use crate::grasp::{summarize, GraspAction, GraspSummary, GripperSpec, OracleConfig};
use crate::prior::TransitionRecord;
use crate::sim::{simulate_push, PushAction, SimConfig, TipSpec};
use crate::scene::Scene;

/// Everything needed to simulate pushes and judge grasps.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlanEnv {
    pub tip: TipSpec,
    pub sim: SimConfig,
    pub gripper: GripperSpec,
    pub oracle: OracleConfig,
}

impl PlanEnv {
    pub fn summarize(&self, scene: &Scene) -> GraspSummary {
        summarize(scene, &self.gripper, &self.oracle)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("no feasible push action from the current state")]
    Unsolvable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decision {
    Push(PushAction),
    Grasp(GraspAction, f64),
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub decision: Decision,
    pub iterations_used: usize,
    pub simulator_substeps_used: usize,
    pub transitions: Vec<TransitionRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeState {
    Open,
    /// Target is graspable; no further pushes.
    Terminal,
    /// Target left the workspace.
    Failed,
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub action: PushAction,
    pub visits: u32,
    /// Backed-up discounted rewards, kept sorted in descending order.
    pub rewards: Vec<f64>,
    pub child: Option<usize>,
    /// Prior value estimate (guided search only).
    pub prior: f64,
}

impl Edge {
    pub fn new(action: PushAction, visits: u32, prior: f64) -> Self {
        Self { action, visits, rewards: Vec::new(), child: None, prior }
    }

    pub fn push_reward(&mut self, r: f64) {
        let at = self.rewards.partition_point(|&x| x >= r);
        self.rewards.insert(at, r);
    }

    /// Sum of the `m` largest rewards.
    pub fn top_sum(&self, m: usize) -> f64 {
        self.rewards.iter().take(m).sum()
    }

    pub fn best_reward(&self) -> f64 {
        self.rewards.first().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct SearchNode {
    pub scene: Arc<Scene>,
    pub depth: usize,
    pub visits: u32,
    pub state: NodeState,
    pub grasp: GraspSummary,
    /// Created on first selection through the node.
    pub edges: Option<Vec<Edge>>,
}

impl SearchNode {
    /// Leaf value: terminal reward of the state, zero on failure.
    pub fn leaf_reward(&self) -> f64 {
        match self.state {
            NodeState::Failed => 0.0,
            _ => self.grasp.reward,
        }
    }

    pub fn fully_expanded(&self) -> bool {
        self.edges
            .as_ref()
            .is_some_and(|e| e.iter().all(|e| e.child.is_some()))
    }
}

#[derive(Clone, Debug, Default)]
pub struct SearchTree {
    pub nodes: Vec<SearchNode>,
    /// Parents of terminal children, in creation order.
    pub terminal_parents: Vec<usize>,
    pub substeps: usize,
}

impl SearchTree {
    pub fn new(scene: Scene, env: &PlanEnv) -> Self {
        let grasp = env.summarize(&scene);
        let state = if grasp.terminal { NodeState::Terminal } else { NodeState::Open };
        Self {
            nodes: vec![SearchNode { scene: Arc::new(scene), depth: 0, visits: 1, state, grasp, edges: None }],
            terminal_parents: Vec::new(),
            substeps: 0,
        }
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    pub fn edges(&self, node: usize) -> &[Edge] {
        self.nodes[node].edges.as_deref().unwrap_or(&[])
    }

    pub fn edge_mut(&mut self, node: usize, edge: usize) -> &mut Edge {
        &mut self.nodes[node].edges.as_mut().expect("edges created before use")[edge]
    }

    /// Simulate the edge's push and attach the resulting child.
    pub fn expand(&mut self, node: usize, edge: usize, env: &PlanEnv) -> usize {
        let parent = &self.nodes[node];
        let action = self.edges(node)[edge].action;
        let outcome = simulate_push(&parent.scene, &action, &env.tip, &env.sim);
        self.substeps += outcome.substeps;
        let depth = parent.depth + 1;
        let (state, grasp) = if outcome.target_lost(parent.scene.target_id) {
            (NodeState::Failed, GraspSummary { max_score: 0.0, terminal: false, reward: 0.0 })
        } else {
            let g = env.summarize(&outcome.next_scene);
            (if g.terminal { NodeState::Terminal } else { NodeState::Open }, g)
        };
        let child = self.nodes.len();
        self.nodes.push(SearchNode {
            scene: Arc::new(outcome.next_scene),
            depth,
            visits: 1,
            state,
            grasp,
            edges: None,
        });
        self.edge_mut(node, edge).child = Some(child);
        if state == NodeState::Terminal {
            self.terminal_parents.push(node);
        }
        child
    }

    /// Append `gamma^(k+1) * reward` to the edge `k` steps above the
    /// evaluated node and bump every visit counter on the path.
    pub fn backpropagate(&mut self, path: &[(usize, usize)], reward: f64, gamma: f64) {
        let mut value = reward;
        for &(node, edge) in path.iter().rev() {
            value *= gamma;
            let e = self.edge_mut(node, edge);
            e.push_reward(value);
            e.visits += 1;
            self.nodes[node].visits += 1;
        }
    }

    /// True once a terminal child exists whose parent has every action expanded.
    pub fn solved_level_complete(&self) -> bool {
        self.terminal_parents.iter().any(|&p| self.nodes[p].fully_expanded())
    }
}

//! Transition logging from search trees and the `transitions/v1` file format.
//!
//! A file is one JSON header line followed by one JSON record per line.
//! Grids are stored run-length encoded in the canonical view where the
//! logged push points along +col.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{rasterize, EncodedGrids};
use crate::mcts::{edge_q, search, MctsConfig};
use crate::par::{self, Execution};
use crate::scene::{Cell, Scene};
use crate::sim::simulate_push;
use crate::tree::{Decision, PlanEnv, SearchTree};
use crate::{derive_seed, rng_for};

use super::view::{canonical_cell, canonical_view};
use super::PriorError;

pub const TRANSITIONS_FORMAT: &str = "transitions/v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub case_id: u64,
    pub depth: usize,
    pub q: f64,
    pub n_visits: u32,
    /// Push direction in the world frame; the grids are rotated by its negation.
    pub push_angle: f64,
    pub action_cell: Cell,
    pub grids: EncodedGrids,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    records: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub records: Vec<TransitionRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), PriorError> {
        let mut w = BufWriter::new(w);
        let header = Header { format: TRANSITIONS_FORMAT.into(), records: self.records.len() };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, PriorError> {
        let mut lines = BufReader::new(r).lines();
        let first = lines.next().ok_or_else(|| PriorError::Format("empty dataset file".into()))??;
        let header: Header = serde_json::from_str(&first)?;
        if header.format != TRANSITIONS_FORMAT {
            return Err(PriorError::Format(format!("unsupported dataset format {:?}", header.format)));
        }
        let mut records = Vec::with_capacity(header.records);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TransitionRecord = serde_json::from_str(&line)?;
            rec.grids.decode().map_err(PriorError::Format)?;
            records.push(rec);
        }
        if records.len() != header.records {
            return Err(PriorError::Format(format!(
                "header announces {} records, found {}",
                header.records,
                records.len()
            )));
        }
        Ok(Self { records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PriorError> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PriorError> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

/// One record per expanded (state, action) pair of the tree, with `q`
/// aggregated over the best `m` rewards.
pub fn records_from_tree(tree: &SearchTree, m: usize) -> Vec<TransitionRecord> {
    let mut out = Vec::new();
    for node in &tree.nodes {
        let edges = node.edges.as_deref().unwrap_or(&[]);
        if !edges.iter().any(|e| e.visits > 0) {
            continue;
        }
        let grids = rasterize(&node.scene);
        let mut views: HashMap<u64, EncodedGrids> = HashMap::new();
        for e in edges.iter().filter(|e| e.visits > 0) {
            let angle = e.action.angle();
            let Some(cell) = canonical_cell(&node.scene.workspace, angle, &e.action.start) else {
                continue;
            };
            let encoded = views.entry(angle.to_bits()).or_insert_with(|| canonical_view(&grids, angle).encode());
            out.push(TransitionRecord {
                case_id: 0,
                depth: node.depth,
                q: edge_q(e, m),
                n_visits: e.visits,
                push_angle: angle,
                action_cell: cell,
                grids: encoded.clone(),
            });
        }
    }
    out
}

/// `k` copies of `case` with distinct target ids drawn without replacement.
pub fn augment_targets<R: Rng>(case: &Scene, rng: &mut R, k: usize) -> Result<Vec<Scene>, PriorError> {
    let n = case.objects.len();
    if n < 2 {
        return Err(PriorError::Augment(format!("need at least 2 objects, got {n}")));
    }
    if k > n {
        return Err(PriorError::Augment(format!("asked for {k} targets from {n} objects")));
    }
    sample(rng, n, k)
        .into_iter()
        .map(|i| case.with_target(case.objects[i].id).map_err(|e| PriorError::Augment(e.to_string())))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectConfig {
    pub mcts: MctsConfig,
    /// Extra variants per case with a randomly chosen different target.
    pub extra_targets: usize,
    pub action_cap: usize,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            mcts: MctsConfig { record_transitions: true, ..MctsConfig::default() },
            extra_targets: 1,
            action_cap: 8,
        }
    }
}

fn collect_episode(scene: &Scene, case_id: u64, variant: u64, cfg: &CollectConfig, env: &PlanEnv, seed: u64) -> Vec<TransitionRecord> {
    let mcfg = MctsConfig { record_transitions: true, ..cfg.mcts };
    let mut out = Vec::new();
    let mut current = scene.clone();
    for step in 0..cfg.action_cap as u64 {
        let mut rng = rng_for(derive_seed(seed, case_id), variant << 32 | step);
        let result = match search(&current, &mcfg, env, &mut rng) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("case {case_id} (target {}): {e}; skipped", current.target_id);
                break;
            }
        };
        out.extend(result.transitions.into_iter().map(|r| TransitionRecord { case_id, ..r }));
        let Decision::Push(action) = result.decision else { break };
        let outcome = simulate_push(&current, &action, &env.tip, &env.sim);
        if outcome.target_lost(current.target_id) {
            break;
        }
        current = outcome.next_scene;
    }
    out
}

/// Run full MCTS episodes on every case (and target variants) and log the
/// transitions. Cases run independently; records come back ordered by case
/// position, then variant, then step.
pub fn collect_transitions(
    cases: &[(u64, Scene)],
    cfg: &CollectConfig,
    env: &PlanEnv,
    seed: u64,
    exec: Execution,
) -> Dataset {
    let per_case = par::map(exec, cases, |(case_id, scene)| {
        let mut variants = vec![scene.clone()];
        let others: Vec<u32> = scene.objects.iter().map(|o| o.id).filter(|&id| id != scene.target_id).collect();
        let k = cfg.extra_targets.min(others.len());
        let mut rng = rng_for(derive_seed(seed, *case_id), 0xA06);
        for i in sample(&mut rng, others.len(), k) {
            variants.push(scene.with_target(others[i]).expect("id from scene"));
        }
        variants
            .iter()
            .enumerate()
            .flat_map(|(v, s)| collect_episode(s, *case_id, v as u64, cfg, env, seed))
            .collect::<Vec<_>>()
    });
    Dataset { records: per_case.into_iter().flatten().collect() }
}

//! Adversarial case generation: a target near the workspace centre ringed by
//! objects with gaps too narrow for the gripper fingers.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use thiserror::Error;

use crate::geometry::Vec2;
use crate::grasp::{is_terminal, GripperSpec, OracleConfig};
use crate::rng_for;
use crate::scene::{ObjectShape, Pose, Scene, SceneObject, WorkspaceSpec};

#[derive(Debug, Error, PartialEq)]
pub enum CaseError {
    #[error("need at least 4 objects for an adversarial case, got {0}")]
    TooFewObjects(usize),
    #[error("no non-graspable layout found for seed {seed} after {attempts} attempts")]
    GenerationFailed { seed: u64, attempts: usize },
}

#[derive(Clone, Debug)]
pub struct CaseGenerator {
    pub workspace: WorkspaceSpec,
    pub gripper: GripperSpec,
    pub oracle: OracleConfig,
    pub max_attempts: usize,
}

impl Default for CaseGenerator {
    fn default() -> Self {
        Self {
            workspace: WorkspaceSpec::default(),
            gripper: GripperSpec::default(),
            oracle: OracleConfig::default(),
            max_attempts: 200,
        }
    }
}

fn random_target<R: Rng>(rng: &mut R) -> ObjectShape {
    if rng.gen_bool(0.6) {
        ObjectShape::Disc { radius: rng.gen_range(0.018..0.025) }
    } else {
        ObjectShape::rectangle(rng.gen_range(0.03..0.042), rng.gen_range(0.026..0.038))
    }
}

fn random_obstacle<R: Rng>(rng: &mut R) -> ObjectShape {
    match rng.gen_range(0..3) {
        0 => ObjectShape::Disc { radius: rng.gen_range(0.012..0.02) },
        1 => ObjectShape::rectangle(rng.gen_range(0.022..0.04), rng.gen_range(0.016..0.03)),
        _ => ObjectShape::regular(rng.gen_range(5..7), rng.gen_range(0.013..0.02)),
    }
}

impl CaseGenerator {
    /// Deterministic in `seed`: the same seed always yields the same scene.
    pub fn generate(&self, seed: u64, n_objects: usize) -> Result<Scene, CaseError> {
        if n_objects < 4 {
            return Err(CaseError::TooFewObjects(n_objects));
        }
        let mut rng = rng_for(seed, 0xCA5E);
        for _ in 0..self.max_attempts {
            if let Some(scene) = self.attempt(&mut rng, n_objects) {
                if !is_terminal(&scene, &self.gripper, &self.oracle) {
                    return Ok(scene);
                }
            }
        }
        Err(CaseError::GenerationFailed { seed, attempts: self.max_attempts })
    }

    fn attempt<R: Rng>(&self, rng: &mut R, n_objects: usize) -> Option<Scene> {
        let center = self.workspace.center();
        let target = SceneObject {
            id: 0,
            shape: random_target(rng),
            pose: Pose::new(
                center.x + rng.gen_range(-0.02..0.02),
                center.y + rng.gen_range(-0.02..0.02),
                rng.gen_range(0.0..TAU),
            ),
        };
        let tc = target.centroid();
        let mut placed = vec![target];
        let ring = n_objects - 1;
        let base = rng.gen_range(0.0..TAU);
        for i in 0..ring {
            let jitter = rng.gen_range(-0.3..0.3) * PI / ring as f64;
            let phi = base + TAU * i as f64 / ring as f64 + jitter;
            let dir = Vec2::new(phi.cos(), phi.sin());
            let shape = random_obstacle(rng);
            let theta = rng.gen_range(0.0..TAU);
            let gap = rng.gen_range(0.0005..0.004);
            let mut radial = 0.02;
            let obj = loop {
                let p = tc + dir * radial;
                let cand = SceneObject { id: i as u32 + 1, shape: shape.clone(), pose: Pose::new(p.x, p.y, theta) };
                let fp = cand.footprint();
                let clear = placed.iter().all(|o| {
                    let d = o.footprint().distance(&fp);
                    if o.id == 0 {
                        d >= gap
                    } else {
                        d > 0.0
                    }
                });
                if clear {
                    break cand;
                }
                radial += 0.0005;
                if radial > 0.15 {
                    return None;
                }
            };
            placed.push(obj);
        }
        Scene::new(self.workspace, placed, 0).ok()
    }
}

pub fn gen_adversarial_case(seed: u64, n_objects: usize) -> Result<Scene, CaseError> {
    CaseGenerator::default().generate(seed, n_objects)
}

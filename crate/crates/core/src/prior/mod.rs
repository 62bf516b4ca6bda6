//! Learned push-value prior: transition logging, labels, training and
//! prediction of Q-maps for canonical rightward pushes.

pub mod dataset;
pub mod features;
pub mod label;
pub mod model;
pub mod train;
pub mod view;

use std::collections::HashMap;

use thiserror::Error;

use crate::grid::{rasterize, OccupancyGrids};
use crate::par::{self, Execution};
use crate::scene::{Cell, Scene};
use crate::sim::PushAction;

pub use dataset::{augment_targets, collect_transitions, CollectConfig, Dataset, TransitionRecord};
pub use features::{feature_hash, FeatureView, FEATURE_COUNT};
pub use label::{make_label, LabeledSample};
pub use model::{load_model, save_model, PriorModel};
pub use train::{train, TrainReport, TrainingConfig};

#[derive(Debug, Error)]
pub enum PriorError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("format: {0}")]
    Format(String),
    #[error("model file: {0}")]
    Model(String),
    #[error("unsupported model version {0}")]
    ModelVersion(u32),
    #[error("model was trained with a different feature set")]
    FeatureMismatch,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("target augmentation: {0}")]
    Augment(String),
    #[error("push start falls outside the rotated grid")]
    StartOutsideGrid,
}

/// Predicted Q of a rightward push from every cell, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct QMap {
    pub grid_n: usize,
    pub values: Vec<f64>,
}

impl QMap {
    pub fn get(&self, cell: Cell) -> f64 {
        self.values[cell.row * self.grid_n + cell.col]
    }

    pub fn median(&self) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }
}

fn qmap_of(model: &PriorModel, view: &FeatureView, exec: Execution) -> QMap {
    let n = view.n();
    let rows: Vec<usize> = (0..n).collect();
    let values = par::map(exec, &rows, |&row| {
        (0..n).map(|col| model.predict(&view.features(Cell { row, col }))).collect::<Vec<_>>()
    });
    QMap { grid_n: n, values: values.into_iter().flatten().collect() }
}

pub fn predict_qmap(model: &PriorModel, scene: &Scene) -> Result<QMap, PriorError> {
    predict_qmap_with(model, scene, Execution::default())
}

pub fn predict_qmap_with(model: &PriorModel, scene: &Scene, exec: Execution) -> Result<QMap, PriorError> {
    model.check_features()?;
    let view = FeatureView::new(&rasterize(scene), 0.0, &scene.workspace);
    Ok(qmap_of(model, &view, exec))
}

/// Q-map of an already canonical view (as stored in transition records).
pub fn predict_view_qmap(model: &PriorModel, view: &FeatureView) -> Result<QMap, PriorError> {
    model.check_features()?;
    Ok(qmap_of(model, view, Execution::default()))
}

/// Per-scene prediction cache: one rasterization, one canonical view per
/// distinct push direction.
pub struct ScenePriors<'a> {
    model: &'a PriorModel,
    scene: &'a Scene,
    grids: OccupancyGrids,
    views: HashMap<u64, FeatureView>,
}

impl<'a> ScenePriors<'a> {
    pub fn new(model: &'a PriorModel, scene: &'a Scene) -> Result<Self, PriorError> {
        model.check_features()?;
        Ok(Self { model, scene, grids: rasterize(scene), views: HashMap::new() })
    }

    pub fn action_q(&mut self, action: &PushAction) -> Result<f64, PriorError> {
        let angle = action.angle();
        let ws = self.scene.workspace;
        let cell = view::canonical_cell(&ws, angle, &action.start).ok_or(PriorError::StartOutsideGrid)?;
        let grids = &self.grids;
        let v = self
            .views
            .entry(angle.to_bits())
            .or_insert_with(|| FeatureView::new(&view::canonical_view(grids, angle), angle, &ws));
        Ok(self.model.predict(&v.features(cell)))
    }
}

pub fn predict_action_q(model: &PriorModel, scene: &Scene, action: &PushAction) -> Result<f64, PriorError> {
    ScenePriors::new(model, scene)?.action_q(action)
}

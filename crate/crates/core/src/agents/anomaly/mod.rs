//! Outlier detectors and the two-of-three consensus used by the anomaly agent.

mod ensemble;
mod iforest;
mod lof;
mod zscore;

use thiserror::Error;

pub use ensemble::{
    consensus, corrective_action, ensemble_anomaly, score_latest, AnomalyFinding, EnsembleConfig, Votes,
};
pub use iforest::{c_factor, isolation_forest_scores, DepthLimit, ForestConfig, IsolationForest};
pub use lof::{lof_scores, LOF_EPSILON};
pub use zscore::{zscore_flags, zscores};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnomalyError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("k = {k} out of range for {n} points")]
    BadK { k: usize, n: usize },
    #[error("points have inconsistent dimensions")]
    Shape,
}

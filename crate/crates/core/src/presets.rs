//! Bundled presets.

use serde::Deserialize;

use crate::glm::GlmMatrix;

pub const PUBLISHED_PREDICTOR_JSON: &str = include_str!("../presets/published_predictor.json");
pub const WPC_SPLIT_JSON: &str = include_str!("../presets/wpc_split.json");

/// Published 3×3 predictor for features (CFGD, CBMV) at 64³ voxels.
pub fn published_predictor() -> GlmMatrix {
    serde_json::from_str(PUBLISHED_PREDICTOR_JSON).expect("bundled GLM preset is valid")
}

/// Train/test content names of the WPC-based study.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct TrainingSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

pub fn wpc_split() -> TrainingSplit {
    serde_json::from_str(WPC_SPLIT_JSON).expect("bundled split preset is valid")
}

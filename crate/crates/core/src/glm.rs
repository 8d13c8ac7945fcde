//! Linear predictor from content features to quality-model parameters.
//!
//! With the augmented feature row `F = [1, f1, …, fK]`, the parameters are
//! `[p1, p2, p3] = F · H`. `H` is stored in that orientation: row 0 holds the
//! constant terms, row `k` the weights of feature `k`, and column `j` feeds
//! `p_j`. The JSON form (`h` key) keeps the same layout.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::accum::compensated_sum;
use crate::error::{Error, Result};
use crate::features::LumaStandard;
use crate::linalg::least_squares;
use crate::quality::QualityModelParams;
use crate::spatial::VoxelSize;

pub const PARAM_LABELS: [&str; 3] = ["p1", "p2", "p3"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GlmMetadata {
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub voxel_size: Option<VoxelSize>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub luma_standard: Option<LumaStandard>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GlmFile", into = "GlmFile")]
pub struct GlmMatrix {
    weights: Vec<[f64; 3]>,
    labels: Vec<String>,
    pub metadata: GlmMetadata,
}

#[derive(Serialize, Deserialize)]
struct GlmFile {
    rows: Vec<String>,
    columns: Vec<String>,
    weights: Vec<Vec<f64>>,
    #[serde(default)]
    metadata: GlmMetadata,
}

impl TryFrom<GlmFile> for GlmMatrix {
    type Error = Error;

    fn try_from(f: GlmFile) -> Result<Self> {
        if f.columns != PARAM_LABELS {
            return Err(Error::Parse(format!(
                "GLM columns must be {PARAM_LABELS:?}, got {:?}",
                f.columns
            )));
        }
        if f.rows.is_empty() || f.rows.len() != f.weights.len() {
            return Err(Error::ShapeMismatch {
                expected: f.rows.len(),
                found: f.weights.len(),
            });
        }
        let weights = f
            .weights
            .iter()
            .map(|row| {
                <[f64; 3]>::try_from(row.as_slice()).map_err(|_| Error::ShapeMismatch {
                    expected: 3,
                    found: row.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut m = GlmMatrix::new(weights, f.rows[1..].to_vec())?;
        m.labels[0] = f.rows[0].clone();
        m.metadata = f.metadata;
        Ok(m)
    }
}

impl From<GlmMatrix> for GlmFile {
    fn from(m: GlmMatrix) -> Self {
        GlmFile {
            rows: m.labels,
            columns: PARAM_LABELS.iter().map(|s| s.to_string()).collect(),
            weights: m.weights.iter().map(|r| r.to_vec()).collect(),
            metadata: m.metadata,
        }
    }
}

impl GlmMatrix {
    /// `weights[0]` is the constant row; `weights[k]` pairs with
    /// `feature_labels[k - 1]`.
    pub fn new(weights: Vec<[f64; 3]>, feature_labels: Vec<String>) -> Result<Self> {
        if weights.len() != feature_labels.len() + 1 {
            return Err(Error::ShapeMismatch {
                expected: feature_labels.len() + 1,
                found: weights.len(),
            });
        }
        let mut labels = vec!["const".to_string()];
        labels.extend(feature_labels);
        Ok(Self {
            weights,
            labels,
            metadata: GlmMetadata::default(),
        })
    }

    pub fn zeros(feature_count: usize) -> Self {
        let labels = (1..=feature_count).map(|k| format!("f{k}")).collect();
        Self::new(vec![[0.0; 3]; feature_count + 1], labels).unwrap()
    }

    pub fn feature_count(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn weights(&self) -> &[[f64; 3]] {
        &self.weights
    }

    pub fn feature_labels(&self) -> &[String] {
        &self.labels[1..]
    }

    /// `[p1, p2, p3] = [1, f…] · H`.
    pub fn predict(&self, features: &[f64]) -> Result<QualityModelParams> {
        if features.len() != self.feature_count() {
            return Err(Error::ShapeMismatch {
                expected: self.feature_count(),
                found: features.len(),
            });
        }
        let p: [f64; 3] = std::array::from_fn(|j| {
            let mut acc = self.weights[0][j];
            for (k, f) in features.iter().enumerate() {
                acc += f * self.weights[k + 1][j];
            }
            acc
        });
        Ok(QualityModelParams::new(p[0], p[1], p[2]))
    }

    /// Sum over rows of the squared parameter-vector error.
    pub fn fitting_error(
        &self,
        features: &[Vec<f64>],
        targets: &[QualityModelParams],
    ) -> Result<f64> {
        let mut terms = Vec::with_capacity(features.len() * 3);
        for (f, t) in features.iter().zip(targets) {
            let p = self.predict(f)?.as_array();
            let t = t.as_array();
            terms.extend((0..3).map(|j| (p[j] - t[j]).powi(2)));
        }
        Ok(compensated_sum(terms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmTraining {
    pub matrix: GlmMatrix,
    /// Training-set fitting error `Σ‖P̂ − P‖²`.
    pub epsilon: f64,
    pub rows: usize,
}

/// Least-squares fit of `H` (QR-based) over rows of features and target
/// parameters.
pub fn glm_train(
    features: &[Vec<f64>],
    targets: &[QualityModelParams],
    feature_labels: Vec<String>,
) -> Result<GlmTraining> {
    if features.len() != targets.len() {
        return Err(Error::ShapeMismatch {
            expected: features.len(),
            found: targets.len(),
        });
    }
    let k = feature_labels.len();
    if let Some(bad) = features.iter().find(|f| f.len() != k) {
        return Err(Error::ShapeMismatch {
            expected: k,
            found: bad.len(),
        });
    }
    let a = DMatrix::from_fn(features.len(), k + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            features[i][j - 1]
        }
    });
    let b = DMatrix::from_fn(targets.len(), 3, |i, j| targets[i].as_array()[j]);
    let h = least_squares(&a, &b)?;
    let weights = (0..=k)
        .map(|r| std::array::from_fn(|j| h[(r, j)]))
        .collect();
    let matrix = GlmMatrix::new(weights, feature_labels)?;
    let epsilon = matrix.fitting_error(features, targets)?;
    Ok(GlmTraining {
        matrix,
        epsilon,
        rows: features.len(),
    })
}

//! Full-reference point-to-point luma PSNR.
//!
//! Each point is matched to its nearest neighbor in the other cloud
//! (ties to the lower index); the luma MSE is taken in both directions and
//! the larger one sets the PSNR against an 8-bit peak of 255.

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::accum::compensated_sum;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::features::{lumas, LumaStandard};
use crate::spatial::KnnIndex;

pub const PEAK: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct P2PResult {
    pub mse_ab: f64,
    pub mse_ba: f64,
    /// `+∞` for identical luma; serialized as the string `"inf"`.
    #[serde(rename = "psnr_y_db", serialize_with = "serialize_db")]
    pub psnr_y: f64,
}

fn serialize_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK * PEAK / mse).log10()
    }
}

/// Mean squared luma error from each point of `from` to its nearest
/// neighbor in `to`.
fn directional_mse(from: &PointCloud, from_y: &[f64], to: &KnnIndex<'_>, to_y: &[f64]) -> f64 {
    let errors: Vec<f64> = from
        .positions()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let nn = to.nearest(p, 1)[0];
            (from_y[i] - to_y[nn.index]).powi(2)
        })
        .collect();
    compensated_sum(errors) / from.len() as f64
}

pub fn psnr_y(reference: &PointCloud, distorted: &PointCloud, standard: LumaStandard) -> Result<P2PResult> {
    if reference.is_empty() || distorted.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let ya = lumas(reference, standard)?;
    let yb = lumas(distorted, standard)?;
    let ia = KnnIndex::new(reference.positions());
    let ib = KnnIndex::new(distorted.positions());
    let mse_ab = directional_mse(reference, &ya, &ib, &yb);
    let mse_ba = directional_mse(distorted, &yb, &ia, &ya);
    Ok(P2PResult {
        mse_ab,
        mse_ba,
        psnr_y: psnr_from_mse(mse_ab.max(mse_ba)),
    })
}

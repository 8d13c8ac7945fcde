//! Reduced-reference perceptual quality modeling for compressed point
//! clouds.
//!
//! Two texture features of the reference cloud (CFGD, CBMV) feed a linear
//! predictor of the coefficients of `MOS^c = p1·Q_g + p2·Q_c + p3`, which in
//! turn drives a rate controller choosing geometry and color QPs under a
//! bitrate budget. Also included: subjective-rating post-processing and a
//! point-to-point luma PSNR baseline.

// `!(x > 0.0)` is used on purpose so NaN takes the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod accum;
pub mod baseline;
pub mod cloud;
pub mod error;
pub mod features;
pub mod glm;
mod linalg;
pub mod ply;
pub mod presets;
pub mod quality;
pub mod rate;
pub mod spatial;
pub mod subjective;

pub use accum::compensated_sum;
pub use cloud::{PointCloud, Rgb};
pub use error::{Error, Result};
pub use linalg::least_squares;

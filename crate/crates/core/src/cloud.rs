//! In-memory point cloud.
//!
//! Positions are stored as `f32`, the precision of the PLY assets this crate
//! consumes. Every geometric computation downstream promotes to `f64`.

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<[f32; 3]>,
    colors: Option<Vec<Rgb>>,
}

impl PointCloud {
    /// Builds a cloud, rejecting non-finite coordinates and color arrays
    /// whose length differs from the position count.
    pub fn new(positions: Vec<[f32; 3]>, colors: Option<Vec<Rgb>>) -> Result<Self> {
        if let Some(c) = &colors {
            if c.len() != positions.len() {
                return Err(Error::InvalidValue(format!(
                    "{} positions but {} colors",
                    positions.len(),
                    c.len()
                )));
            }
        }
        if let Some(i) = positions
            .iter()
            .position(|p| p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidValue(format!(
                "non-finite coordinate at point {i}"
            )));
        }
        Ok(Self { positions, colors })
    }

    pub fn colored(positions: Vec<[f32; 3]>, colors: Vec<Rgb>) -> Result<Self> {
        Self::new(positions, Some(colors))
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f32; 3]] {
        &self.positions
    }

    pub fn colors(&self) -> Option<&[Rgb]> {
        self.colors.as_deref()
    }

    pub fn has_color(&self) -> bool {
        self.colors.is_some()
    }

    /// Position of point `i` promoted to `f64`.
    #[inline]
    pub fn position_f64(&self, i: usize) -> [f64; 3] {
        let p = self.positions[i];
        [p[0] as f64, p[1] as f64, p[2] as f64]
    }

    pub(crate) fn require_color(&self) -> Result<&[Rgb]> {
        self.colors.as_deref().ok_or(Error::ColorlessCloud)
    }
}

/// Squared Euclidean distance between two stored positions, in `f64`.
#[inline]
pub fn squared_distance(a: &[f32; 3], b: &[f32; 3]) -> f64 {
    let dx = a[0] as f64 - b[0] as f64;
    let dy = a[1] as f64 - b[1] as f64;
    let dz = a[2] as f64 - b[2] as f64;
    dx * dx + dy * dy + dz * dz
}

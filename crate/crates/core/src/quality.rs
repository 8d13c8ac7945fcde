//! Perceptual distortion models over quantization steps.
//!
//! `MOS^c = 100 − MOS` is modeled as a function of the geometry step `Q_g`
//! and color step `Q_c`:
//!
//! * linear: `p1·Q_g + p2·Q_c + p3`
//! * bilinear: `a·Q_g·Q_c + b·Q_g + c·Q_c + d`
//!
//! The bilinear form arises from fitting one line per `Q_g`
//! (`MOS^c = slope·Q_c + intercept`) and then regressing the slopes and intercepts on
//! `Q_g`. Fit quality is reported as PLCC, SRCC, RMSE and SCC (= PLCC²).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::accum::{compensated_sum, mean};
use crate::error::{Error, Result};
use crate::linalg::least_squares;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bilinear {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Bilinear {
    pub fn predict(&self, qg: f64, qc: f64) -> f64 {
        self.a * qg * qc + self.b * qg + self.c * qc + self.d
    }

    /// Bilinear surface implied by the per-`Q_g` line trends:
    /// `a = slope_per_qg`, `b = intercept_per_qg`, `c = slope_at_zero`, `d = intercept_at_zero`.
    pub fn from_trends(t: &QgTrends) -> Self {
        Self {
            a: t.slope_per_qg,
            b: t.intercept_per_qg,
            c: t.slope_at_zero,
            d: t.intercept_at_zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityModelParams {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub bilinear: Option<Bilinear>,
}

impl QualityModelParams {
    pub fn new(p1: f64, p2: f64, p3: f64) -> Self {
        Self {
            p1,
            p2,
            p3,
            bilinear: None,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p1, self.p2, self.p3]
    }

    pub fn predict_mosc(&self, qg: f64, qc: f64) -> f64 {
        self.p1 * qg + self.p2 * qc + self.p3
    }

    pub fn predict_mos(&self, qg: f64, qc: f64) -> f64 {
        mos_from_mosc(self.predict_mosc(qg, qc))
    }

    pub fn predict_mosc_bilinear(&self, qg: f64, qc: f64) -> Option<f64> {
        self.bilinear.map(|b| b.predict(qg, qc))
    }
}

/// Reported MOS on the 0–100 scale.
pub fn mos_from_mosc(mosc: f64) -> f64 {
    (100.0 - mosc).clamp(0.0, 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub plcc: f64,
    pub srcc: f64,
    pub rmse: f64,
    pub scc: f64,
}

/// Pearson linear correlation. `None` if either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx).powi(2)));
    let syy = compensated_sum(y.iter().map(|b| (b - my).powi(2)));
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn rmse(predicted: &[f64], observed: &[f64]) -> f64 {
    assert_eq!(predicted.len(), observed.len());
    let ss = compensated_sum(predicted.iter().zip(observed).map(|(p, o)| (p - o).powi(2)));
    (ss / predicted.len() as f64).sqrt()
}

pub fn correlation_report(predicted: &[f64], observed: &[f64]) -> Result<FitReport> {
    if predicted.len() != observed.len() {
        return Err(Error::ShapeMismatch {
            expected: observed.len(),
            found: predicted.len(),
        });
    }
    if observed.len() < 2 {
        return Err(Error::DegenerateVariance(
            "need at least two observations".into(),
        ));
    }
    let plcc = pearson(predicted, observed).ok_or_else(|| {
        Error::DegenerateVariance("constant predicted or observed values".into())
    })?;
    let srcc = spearman(predicted, observed).ok_or_else(|| {
        Error::DegenerateVariance("constant predicted or observed ranks".into())
    })?;
    Ok(FitReport {
        plcc,
        srcc,
        rmse: rmse(predicted, observed),
        scc: plcc * plcc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoscSample {
    pub qg: f64,
    pub qc: f64,
    pub mosc: f64,
}

fn fit_columns(rows: &[Vec<f64>], targets: &[f64]) -> Result<Vec<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let b = DMatrix::from_column_slice(targets.len(), 1, targets);
    Ok(least_squares(&a, &b)?.iter().copied().collect())
}

/// Ordinary least squares of `MOS^c` on `[Q_g, Q_c, 1]`.
pub fn fit_linear_mosc(samples: &[MoscSample]) -> Result<(QualityModelParams, FitReport)> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| vec![s.qg, s.qc, 1.0]).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.mosc).collect();
    let p = fit_columns(&rows, &y)?;
    let params = QualityModelParams::new(p[0], p[1], p[2]);
    let fitted: Vec<f64> = samples
        .iter()
        .map(|s| params.predict_mosc(s.qg, s.qc))
        .collect();
    Ok((params, correlation_report(&fitted, &y)?))
}

/// Ordinary least squares of `MOS^c` on `[Q_g·Q_c, Q_g, Q_c, 1]`.
pub fn fit_bilinear_mosc(samples: &[MoscSample]) -> Result<(Bilinear, FitReport)> {
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| vec![s.qg * s.qc, s.qg, s.qc, 1.0])
        .collect();
    let y: Vec<f64> = samples.iter().map(|s| s.mosc).collect();
    let p = fit_columns(&rows, &y)?;
    let model = Bilinear {
        a: p[0],
        b: p[1],
        c: p[2],
        d: p[3],
    };
    let fitted: Vec<f64> = samples.iter().map(|s| model.predict(s.qg, s.qc)).collect();
    Ok((model, correlation_report(&fitted, &y)?))
}

/// A fitted line `y = slope·x + intercept` with its fit quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub report: FitReport,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v, 1.0]).collect();
    let p = fit_columns(&rows, y)?;
    let fitted: Vec<f64> = x.iter().map(|&v| p[0] * v + p[1]).collect();
    Ok(LineFit {
        slope: p[0],
        intercept: p[1],
        report: correlation_report(&fitted, y)?,
    })
}

/// `MOS^c = slope·Q_c + intercept` at one geometry step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QgLine {
    pub qg: f64,
    pub slope: f64,
    pub intercept: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<FitReport>,
}

/// Linear trends of the per-`Q_g` slopes and intercepts:
/// `slope = slope_per_qg·Q_g + slope_at_zero`, `intercept = intercept_per_qg·Q_g + intercept_at_zero`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QgTrends {
    pub slope_per_qg: f64,
    pub slope_at_zero: f64,
    pub intercept_per_qg: f64,
    pub intercept_at_zero: f64,
    pub slope_report: FitReport,
    pub intercept_report: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQgFit {
    pub lines: Vec<QgLine>,
    pub trends: QgTrends,
}

impl PerQgFit {
    pub fn bilinear(&self) -> Bilinear {
        Bilinear::from_trends(&self.trends)
    }
}

/// Second stage: regress line slopes and intercepts on `Q_g`.
pub fn fit_qg_trends(lines: &[QgLine]) -> Result<QgTrends> {
    let qg: Vec<f64> = lines.iter().map(|l| l.qg).collect();
    let slopes: Vec<f64> = lines.iter().map(|l| l.slope).collect();
    let intercepts: Vec<f64> = lines.iter().map(|l| l.intercept).collect();
    let slope = fit_line(&qg, &slopes)?;
    let intercept = fit_line(&qg, &intercepts)?;
    Ok(QgTrends {
        slope_per_qg: slope.slope,
        slope_at_zero: slope.intercept,
        intercept_per_qg: intercept.slope,
        intercept_at_zero: intercept.intercept,
        slope_report: slope.report,
        intercept_report: intercept.report,
    })
}

/// Groups samples by exact `Q_g`, fits one line per group, then the trends.
pub fn fit_per_qg_lines(samples: &[MoscSample]) -> Result<PerQgFit> {
    let mut sorted: Vec<&MoscSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.qg.total_cmp(&b.qg));

    let mut lines = Vec::new();
    for group in sorted.chunk_by(|a, b| a.qg == b.qg) {
        let qc: Vec<f64> = group.iter().map(|s| s.qc).collect();
        let y: Vec<f64> = group.iter().map(|s| s.mosc).collect();
        let fit = fit_line(&qc, &y).map_err(|e| match e {
            Error::RankDeficient(_) => Error::RankDeficient(format!(
                "Q_g = {} needs at least two distinct Q_c values",
                group[0].qg
            )),
            other => other,
        })?;
        lines.push(QgLine {
            qg: group[0].qg,
            slope: fit.slope,
            intercept: fit.intercept,
            report: Some(fit.report),
        });
    }
    if lines.len() < 2 {
        return Err(Error::RankDeficient(
            "need at least two distinct Q_g groups".into(),
        ));
    }
    let trends = fit_qg_trends(&lines)?;
    Ok(PerQgFit { lines, trends })
}

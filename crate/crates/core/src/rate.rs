//! Perceptual rate control.
//!
//! Minimize `p1·Q_g + p2·Q_c + p3` subject to
//! `γ_g·Q_g^θ_g + γ_c·Q_c^θ_c ≤ R_T` over the step box implied by a QP
//! range. The objective increases and the rate decreases in both steps, so
//! unless the smallest steps already fit the budget the constraint is
//! active. The continuous optimum comes from bisection on the Lagrange
//! multiplier; the integer QP pair is then found by walking the feasibility
//! boundary of the QP grid, which yields the exact grid optimum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::accum::{compensated_sum, mean};
use crate::quality::QualityModelParams;

pub const QP_MIN: i32 = 1;
pub const QP_MAX: i32 = 51;
const ANCHOR_QP: i32 = 26;
const ANCHOR_STEP: f64 = 12.75;

/// Quantization step for a QP: `12.75 · 2^((qp − 26) / 6)`, exact whenever
/// `qp − 26` is a multiple of 6.
pub fn qp_to_qstep(qp: i32) -> Result<f64> {
    if !(QP_MIN..=QP_MAX).contains(&qp) {
        return Err(Error::OutOfRange(format!("QP {qp} outside [{QP_MIN}, {QP_MAX}]")));
    }
    let k = qp - ANCHOR_QP;
    let octaves = k.div_euclid(6);
    let rem = k.rem_euclid(6);
    Ok(ANCHOR_STEP * 2f64.powf(rem as f64 / 6.0) * 2f64.powi(octaves))
}

/// Continuous inverse of [`qp_to_qstep`].
pub fn qstep_to_qp(qstep: f64) -> f64 {
    ANCHOR_QP as f64 + 6.0 * (qstep / ANCHOR_STEP).log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QpRange {
    pub min: i32,
    pub max: i32,
}

impl QpRange {
    pub fn new(min: i32, max: i32) -> Result<Self> {
        if min > max || min < QP_MIN || max > QP_MAX {
            return Err(Error::OutOfRange(format!(
                "QP range [{min}, {max}] must lie within [{QP_MIN}, {QP_MAX}] with min <= max"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn full() -> Self {
        Self { min: QP_MIN, max: QP_MAX }
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> {
        self.min..=self.max
    }
}

impl Default for QpRange {
    fn default() -> Self {
        Self { min: 26, max: 50 }
    }
}

/// Power-law rate model `R(Q) = γ·Q^θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub gamma: f64,
    pub theta: f64,
}

impl RateModel {
    pub fn rate(&self, q: f64) -> f64 {
        self.gamma * q.powf(self.theta)
    }

    fn validate(&self, axis: &str) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidRateModel(format!("{axis} gamma {} must be positive", self.gamma)));
        }
        if !(self.theta < 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidRateModel(format!("{axis} theta {} must be negative", self.theta)));
        }
        Ok(())
    }

    /// Multiplier at which the stationarity condition places this axis at `q`.
    fn lambda_at(&self, weight: f64, q: f64) -> f64 {
        weight * q.powf(1.0 - self.theta) / (-self.gamma * self.theta)
    }

    /// Stationary step for multiplier `lambda`, before box clamping.
    fn step_at(&self, weight: f64, lambda: f64) -> f64 {
        (-lambda * self.gamma * self.theta / weight).powf(1.0 / (1.0 - self.theta))
    }
}

/// Fits `R = γ·Q^θ` from `(Q, rate)` precode samples: exact inversion for two
/// samples, least squares in log–log space for more.
pub fn fit_rate_model(samples: &[(f64, f64)]) -> Result<RateModel> {
    if samples.len() < 2 {
        return Err(Error::DegenerateSamples("need at least two (Q, rate) samples".into()));
    }
    if let Some(&(q, r)) = samples.iter().find(|&&(q, r)| !(q > 0.0 && r > 0.0) || !q.is_finite() || !r.is_finite()) {
        return Err(Error::DegenerateSamples(format!("sample (Q={q}, rate={r}) must be positive")));
    }
    let q0 = samples[0].0;
    if samples.iter().all(|&(q, _)| q == q0) {
        return Err(Error::DegenerateSamples("all samples share the same Q".into()));
    }

    if let [(q1, r1), (q2, r2)] = *samples {
        let theta = (r1 / r2).ln() / (q1 / q2).ln();
        return Ok(RateModel {
            gamma: r1 / q1.powf(theta),
            theta,
        });
    }
    let lq: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let lr: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let mq = mean(&lq);
    let mr = mean(&lr);
    let sqq = compensated_sum(lq.iter().map(|x| (x - mq).powi(2)));
    let sqr = compensated_sum(lq.iter().zip(&lr).map(|(x, y)| (x - mq) * (y - mr)));
    let theta = sqr / sqq;
    Ok(RateModel {
        gamma: (mr - theta * mq).exp(),
        theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModelParams {
    pub geometry: RateModel,
    pub color: RateModel,
}

impl RateModelParams {
    /// Total rate in kbpmp.
    pub fn rate(&self, qg: f64, qc: f64) -> f64 {
        self.geometry.rate(qg) + self.color.rate(qc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSolution {
    pub qg: f64,
    pub qc: f64,
    pub mosc: f64,
    pub rate: f64,
    /// Lagrange multiplier of the rate constraint (0 when slack).
    pub lambda: f64,
    /// Largest relative KKT violation over stationarity of interior axes and
    /// constraint activity.
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateControlSolution {
    pub qp_g: i32,
    pub qp_c: i32,
    pub qg: f64,
    pub qc: f64,
    pub predicted_mosc: f64,
    pub predicted_rate: f64,
    /// Whether the rate constraint is active at the continuous optimum.
    pub binding: bool,
    pub continuous: ContinuousSolution,
}

fn validate(quality: &QualityModelParams, rate: &RateModelParams, target: f64) -> Result<()> {
    if !(quality.p1 > 0.0 && quality.p2 > 0.0) {
        return Err(Error::NonMonotoneModel {
            p1: quality.p1,
            p2: quality.p2,
        });
    }
    rate.geometry.validate("geometry")?;
    rate.color.validate("color")?;
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::OutOfRange(format!("target rate {target} must be positive")));
    }
    Ok(())
}

/// Continuous optimum over `[q_lo, q_hi]²`.
pub fn solve_continuous(
    quality: &QualityModelParams,
    rate: &RateModelParams,
    target: f64,
    q_lo: f64,
    q_hi: f64,
) -> Result<ContinuousSolution> {
    validate(quality, rate, target)?;
    let at = |qg: f64, qc: f64, lambda: f64, kkt_residual: f64| ContinuousSolution {
        qg,
        qc,
        mosc: quality.predict_mosc(qg, qc),
        rate: rate.rate(qg, qc),
        lambda,
        kkt_residual,
    };

    if rate.rate(q_lo, q_lo) <= target {
        return Ok(at(q_lo, q_lo, 0.0, 0.0));
    }
    let minimum = rate.rate(q_hi, q_hi);
    if minimum > target {
        return Err(Error::Infeasible { target, minimum });
    }

    let (g, c) = (rate.geometry, rate.color);
    let steps = |lambda: f64| {
        (
            g.step_at(quality.p1, lambda).clamp(q_lo, q_hi),
            c.step_at(quality.p2, lambda).clamp(q_lo, q_hi),
        )
    };
    // At `lo` both axes sit at q_lo (over budget); at `hi` both at q_hi.
    let mut lo = g.lambda_at(quality.p1, q_lo).min(c.lambda_at(quality.p2, q_lo));
    let mut hi = g.lambda_at(quality.p1, q_hi).max(c.lambda_at(quality.p2, q_hi));
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if !(mid > lo && mid < hi) {
            break;
        }
        let (qg, qc) = steps(mid);
        if rate.rate(qg, qc) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let lambda = hi;
    let (qg, qc) = steps(lambda);
    let mut residual = ((rate.rate(qg, qc) - target) / target).abs();
    for (q, weight, model) in [(qg, quality.p1, g), (qc, quality.p2, c)] {
        if q > q_lo && q < q_hi {
            let grad = weight + lambda * model.gamma * model.theta * q.powf(model.theta - 1.0);
            residual = residual.max((grad / weight).abs());
        }
    }
    Ok(at(qg, qc, lambda, residual))
}

/// Solves for the perceptually optimal QP pair within `range`.
pub fn solve_rate_control(
    quality: &QualityModelParams,
    rate: &RateModelParams,
    target: f64,
    range: QpRange,
) -> Result<RateControlSolution> {
    let q_lo = qp_to_qstep(range.min)?;
    let q_hi = qp_to_qstep(range.max)?;
    let continuous = solve_continuous(quality, rate, target, q_lo, q_hi)?;

    let qps: Vec<i32> = range.iter().collect();
    let steps: Vec<f64> = qps.iter().map(|&qp| qp_to_qstep(qp)).collect::<Result<_>>()?;
    let feasible = |a: usize, b: usize| rate.rate(steps[a], steps[b]) <= target;

    // For each geometry QP, the smallest feasible color QP is the best one
    // (objective increasing in Q_c); feasibility is monotone in Q_c.
    let mut best: Option<(f64, usize, usize)> = None;
    for a in 0..qps.len() {
        if !feasible(a, qps.len() - 1) {
            continue;
        }
        let (mut lo, mut hi) = (0, qps.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if feasible(a, mid) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let mosc = quality.predict_mosc(steps[a], steps[lo]);
        if best.is_none_or(|(m, _, _)| mosc < m) {
            best = Some((mosc, a, lo));
        }
    }
    let (predicted_mosc, a, b) = best.ok_or(Error::Infeasible {
        target,
        minimum: rate.rate(q_hi, q_hi),
    })?;

    Ok(RateControlSolution {
        qp_g: qps[a],
        qp_c: qps[b],
        qg: steps[a],
        qc: steps[b],
        predicted_mosc,
        predicted_rate: rate.rate(steps[a], steps[b]),
        binding: continuous.lambda > 0.0,
        continuous,
    })
}

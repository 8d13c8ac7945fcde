//! Post-processing of raw subjective ratings.
//!
//! Pipeline: per-observer Z-scores rescaled to `[0, 100]`, BT.500-style
//! per-stimulus outlier masking, MOS aggregation (`MOS^c = 100 − MOS`),
//! observer-vs-MOS agreement, and a two-way ANOVA over `(Q_g, Q_c)` with
//! contents as replicates.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::accum::compensated_sum;
use crate::error::{Error, Result};
use crate::quality::{pearson, spearman};

/// One `(Q_g level, Q_c level)` encoding condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub qg_level: f64,
    pub qc_level: f64,
}

impl std::fmt::Display for Degradation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(qg={}, qc={})", self.qg_level, self.qc_level)
    }
}

/// One CSV row: `content_id,observer_id,qg_level,qc_level,score`. An empty
/// score marks a missing rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub content_id: String,
    pub observer_id: String,
    pub qg_level: f64,
    pub qc_level: f64,
    pub score: Option<f64>,
}

/// Scores `X[m, i, j]` for content `m`, observer `i`, degradation `j`, with a
/// validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingTensor {
    contents: Vec<String>,
    observers: Vec<String>,
    degradations: Vec<Degradation>,
    scores: Vec<f64>,
    valid: Vec<bool>,
}

impl RatingTensor {
    /// An all-missing tensor over the given axes.
    pub fn new(
        contents: Vec<String>,
        observers: Vec<String>,
        degradations: Vec<Degradation>,
    ) -> Self {
        let n = contents.len() * observers.len() * degradations.len();
        Self {
            contents,
            observers,
            degradations,
            scores: vec![0.0; n],
            valid: vec![false; n],
        }
    }

    /// Contents and observers keep first-appearance order; degradations are
    /// sorted by `(qg_level, qc_level)`.
    pub fn from_records(records: &[RatingRecord]) -> Result<Self> {
        let mut contents: Vec<String> = Vec::new();
        let mut observers: Vec<String> = Vec::new();
        let mut degradations: Vec<Degradation> = Vec::new();
        for r in records {
            if !r.qg_level.is_finite() || !r.qc_level.is_finite() {
                return Err(Error::InvalidValue(format!(
                    "non-finite level for content {}",
                    r.content_id
                )));
            }
            if !contents.contains(&r.content_id) {
                contents.push(r.content_id.clone());
            }
            if !observers.contains(&r.observer_id) {
                observers.push(r.observer_id.clone());
            }
            let d = Degradation {
                qg_level: r.qg_level,
                qc_level: r.qc_level,
            };
            if !degradations.contains(&d) {
                degradations.push(d);
            }
        }
        degradations.sort_by(|a, b| {
            a.qg_level
                .total_cmp(&b.qg_level)
                .then(a.qc_level.total_cmp(&b.qc_level))
        });

        let mut t = Self::new(contents, observers, degradations);
        let mut seen = vec![false; t.scores.len()];
        for r in records {
            let m = t.content_index(&r.content_id).unwrap();
            let i = t.observer_index(&r.observer_id).unwrap();
            let j = t
                .degradations
                .iter()
                .position(|d| d.qg_level == r.qg_level && d.qc_level == r.qc_level)
                .unwrap();
            let k = t.offset(m, i, j);
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidValue(format!(
                    "duplicate rating for content {}, observer {}, {}",
                    r.content_id, r.observer_id, t.degradations[j]
                )));
            }
            if let Some(s) = r.score {
                if !(0.0..=100.0).contains(&s) {
                    return Err(Error::InvalidValue(format!(
                        "score {s} outside [0, 100] for observer {}",
                        r.observer_id
                    )));
                }
                t.set(m, i, j, s);
            }
        }
        Ok(t)
    }

    pub fn contents(&self) -> &[String] {
        &self.contents
    }

    pub fn observers(&self) -> &[String] {
        &self.observers
    }

    pub fn degradations(&self) -> &[Degradation] {
        &self.degradations
    }

    pub fn content_index(&self, id: &str) -> Option<usize> {
        self.contents.iter().position(|c| c == id)
    }

    pub fn observer_index(&self, id: &str) -> Option<usize> {
        self.observers.iter().position(|o| o == id)
    }

    #[inline]
    fn offset(&self, m: usize, i: usize, j: usize) -> usize {
        (m * self.observers.len() + i) * self.degradations.len() + j
    }

    pub fn get(&self, m: usize, i: usize, j: usize) -> Option<f64> {
        let k = self.offset(m, i, j);
        self.valid[k].then_some(self.scores[k])
    }

    pub fn set(&mut self, m: usize, i: usize, j: usize, score: f64) {
        let k = self.offset(m, i, j);
        self.scores[k] = score;
        self.valid[k] = true;
    }

    pub fn mask(&mut self, m: usize, i: usize, j: usize) {
        let k = self.offset(m, i, j);
        self.valid[k] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Valid scores of observer `i` as `(m, j, score)`.
    pub fn observer_scores(&self, i: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for m in 0..self.contents.len() {
            for j in 0..self.degradations.len() {
                if let Some(s) = self.get(m, i, j) {
                    out.push((m, j, s));
                }
            }
        }
        out
    }

    /// Valid scores of stimulus `(m, j)` as `(observer, score)`.
    pub fn cell_scores(&self, m: usize, j: usize) -> Vec<(usize, f64)> {
        (0..self.observers.len())
            .filter_map(|i| self.get(m, i, j).map(|s| (i, s)))
            .collect()
    }

    fn map_valid(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for m in 0..self.contents.len() {
            for i in 0..self.observers.len() {
                for j in 0..self.degradations.len() {
                    if let Some(s) = self.get(m, i, j) {
                        out.set(m, i, j, f(i, s));
                    }
                }
            }
        }
        out
    }
}

pub fn read_ratings_csv(path: impl AsRef<Path>) -> Result<RatingTensor> {
    let file = std::fs::File::open(path)?;
    read_ratings(file)
}

pub fn read_ratings<R: std::io::Read>(reader: R) -> Result<RatingTensor> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let records = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<RatingRecord>, _>>()?;
    RatingTensor::from_records(&records)
}

/// Sample mean and standard deviation (n − 1 denominator).
fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let ss = compensated_sum(values.iter().map(|v| (v - mean).powi(2)));
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Per-observer Z-scores `(X − μ_i) / σ_i`, without rescaling.
pub fn zscores(tensor: &RatingTensor) -> Result<RatingTensor> {
    let mut stats = Vec::with_capacity(tensor.observers.len());
    for (i, name) in tensor.observers.iter().enumerate() {
        let scores: Vec<f64> = tensor.observer_scores(i).into_iter().map(|s| s.2).collect();
        if scores.len() < 2 {
            return Err(Error::ZeroVariance(format!("{name} (fewer than two ratings)")));
        }
        let (mu, sigma) = mean_and_sample_std(&scores);
        if !(sigma > 0.0) {
            return Err(Error::ZeroVariance(name.clone()));
        }
        stats.push((mu, sigma));
    }
    Ok(tensor.map_valid(|i, x| (x - stats[i].0) / stats[i].1))
}

/// Global min–max affine map of all valid values onto `[0, 100]`.
pub fn rescale_to_0_100(tensor: &RatingTensor) -> RatingTensor {
    let (lo, hi) = tensor
        .scores
        .iter()
        .zip(&tensor.valid)
        .filter(|(_, &v)| v)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&s, _)| {
            (lo.min(s), hi.max(s))
        });
    if !(hi > lo) {
        return tensor.map_valid(|_, _| 50.0);
    }
    tensor.map_valid(|_, z| ((z - lo) / (hi - lo) * 100.0).clamp(0.0, 100.0))
}

pub fn zscore_normalize(tensor: &RatingTensor) -> Result<RatingTensor> {
    Ok(rescale_to_0_100(&zscores(tensor)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierRule {
    /// Mean ± 2σ when the kurtosis β2 lies in [2, 4], mean ± √20·σ otherwise.
    #[default]
    Bt500,
    /// Mean ± 2σ regardless of kurtosis.
    TwoSigma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedRating {
    pub content_id: String,
    pub observer_id: String,
    pub qg_level: f64,
    pub qc_level: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub rule: OutlierRule,
    pub masked: Vec<MaskedRating>,
    /// Stimuli with fewer than three valid ratings, left unscreened.
    pub cells_skipped: usize,
}

/// Screens each stimulus independently and masks out-of-band ratings.
/// Observers are never dropped as a whole.
pub fn remove_outliers(tensor: &RatingTensor, rule: OutlierRule) -> (RatingTensor, OutlierReport) {
    let mut out = tensor.clone();
    let mut report = OutlierReport {
        rule,
        ..Default::default()
    };
    for m in 0..tensor.contents.len() {
        for j in 0..tensor.degradations.len() {
            let cell = tensor.cell_scores(m, j);
            if cell.len() < 3 {
                report.cells_skipped += 1;
                continue;
            }
            let values: Vec<f64> = cell.iter().map(|c| c.1).collect();
            let (mean, sigma) = mean_and_sample_std(&values);
            if !(sigma > 0.0) {
                continue;
            }
            let n = values.len() as f64;
            let m2 = compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / n;
            let m4 = compensated_sum(values.iter().map(|v| (v - mean).powi(4))) / n;
            let kurtosis = m4 / (m2 * m2);
            let width = match rule {
                OutlierRule::TwoSigma => 2.0 * sigma,
                OutlierRule::Bt500 if (2.0..=4.0).contains(&kurtosis) => 2.0 * sigma,
                OutlierRule::Bt500 => 20f64.sqrt() * sigma,
            };
            for (i, score) in cell {
                if (score - mean).abs() > width {
                    out.mask(m, i, j);
                    let d = tensor.degradations[j];
                    report.masked.push(MaskedRating {
                        content_id: tensor.contents[m].clone(),
                        observer_id: tensor.observers[i].clone(),
                        qg_level: d.qg_level,
                        qc_level: d.qc_level,
                        score,
                    });
                }
            }
        }
    }
    (out, report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosEntry {
    pub content_id: String,
    pub qg_level: f64,
    pub qc_level: f64,
    pub mos: f64,
    pub mosc: f64,
    pub ratings: usize,
}

/// MOS per stimulus, content-major, degradations in tensor order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosTable {
    pub entries: Vec<MosEntry>,
    #[serde(skip)]
    degradation_count: usize,
}

impl MosTable {
    pub fn get(&self, m: usize, j: usize) -> &MosEntry {
        &self.entries[m * self.degradation_count + j]
    }
}

pub fn aggregate_mos(tensor: &RatingTensor) -> Result<MosTable> {
    let mut entries = Vec::new();
    for (m, content) in tensor.contents.iter().enumerate() {
        for (j, d) in tensor.degradations.iter().enumerate() {
            let cell = tensor.cell_scores(m, j);
            if cell.is_empty() {
                return Err(Error::EmptyCell {
                    content: content.clone(),
                    degradation: d.to_string(),
                });
            }
            let mos = compensated_sum(cell.iter().map(|c| c.1)) / cell.len() as f64;
            entries.push(MosEntry {
                content_id: content.clone(),
                qg_level: d.qg_level,
                qc_level: d.qc_level,
                mos,
                mosc: 100.0 - mos,
                ratings: cell.len(),
            });
        }
    }
    Ok(MosTable {
        entries,
        degradation_count: tensor.degradations.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverAgreement {
    pub observer_id: String,
    pub plcc: f64,
    pub srcc: f64,
    pub ratings: usize,
}

/// Correlation of each observer's scores with the MOS over the stimuli
/// that observer rated.
pub fn observer_agreement(tensor: &RatingTensor, mos: &MosTable) -> Result<Vec<ObserverAgreement>> {
    let mut out = Vec::with_capacity(tensor.observers.len());
    for (i, name) in tensor.observers.iter().enumerate() {
        let rated = tensor.observer_scores(i);
        let scores: Vec<f64> = rated.iter().map(|r| r.2).collect();
        let reference: Vec<f64> = rated.iter().map(|&(m, j, _)| mos.get(m, j).mos).collect();
        let degenerate = || Error::DegenerateVariance(format!("observer {name}"));
        if scores.len() < 2 {
            return Err(degenerate());
        }
        out.push(ObserverAgreement {
            observer_id: name.clone(),
            plcc: pearson(&scores, &reference).ok_or_else(degenerate)?,
            srcc: spearman(&scores, &reference).ok_or_else(degenerate)?,
            ratings: scores.len(),
        });
    }
    Ok(out)
}

/// `MOS^c` values indexed `[i][j][l]`: geometry level, color level, content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoscCells {
    pub qg_levels: Vec<f64>,
    pub qc_levels: Vec<f64>,
    pub contents: Vec<String>,
    pub values: Vec<Vec<Vec<f64>>>,
}

impl MoscCells {
    /// Arranges a MOS table into a complete `(Q_g, Q_c, content)` array.
    pub fn from_table(table: &MosTable) -> Result<Self> {
        let mut qg_levels: Vec<f64> = Vec::new();
        let mut qc_levels: Vec<f64> = Vec::new();
        let mut contents: Vec<String> = Vec::new();
        for e in &table.entries {
            if !qg_levels.contains(&e.qg_level) {
                qg_levels.push(e.qg_level);
            }
            if !qc_levels.contains(&e.qc_level) {
                qc_levels.push(e.qc_level);
            }
            if !contents.contains(&e.content_id) {
                contents.push(e.content_id.clone());
            }
        }
        qg_levels.sort_by(f64::total_cmp);
        qc_levels.sort_by(f64::total_cmp);

        let mut lookup: HashMap<(usize, usize, usize), f64> = HashMap::new();
        for e in &table.entries {
            let i = qg_levels.iter().position(|&q| q == e.qg_level).unwrap();
            let j = qc_levels.iter().position(|&q| q == e.qc_level).unwrap();
            let l = contents.iter().position(|c| *c == e.content_id).unwrap();
            lookup.insert((i, j, l), e.mosc);
        }
        let mut values = vec![vec![Vec::with_capacity(contents.len()); qc_levels.len()]; qg_levels.len()];
        for (i, row) in values.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                for (l, content) in contents.iter().enumerate() {
                    let v = lookup.get(&(i, j, l)).ok_or_else(|| {
                        Error::UnbalancedDesign(format!(
                            "content {content} lacks qg={}, qc={}",
                            qg_levels[i], qc_levels[j]
                        ))
                    })?;
                    cell.push(*v);
                }
            }
        }
        Ok(Self {
            qg_levels,
            qc_levels,
            contents,
            values,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorRow {
    pub ss: f64,
    pub df: usize,
    pub ms: f64,
    /// `None` when the error mean square is zero.
    pub f: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub ss: f64,
    pub df: usize,
    pub ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub qg: FactorRow,
    pub qc: FactorRow,
    pub interaction: FactorRow,
    pub error: ErrorRow,
    pub total_ss: f64,
}

/// Two-way ANOVA with replication over `values[i][j][l]`.
pub fn two_way_anova(values: &[Vec<Vec<f64>>]) -> Result<AnovaTable> {
    let levels_g = values.len();
    let levels_c = values.first().map_or(0, Vec::len);
    let reps = values
        .first()
        .and_then(|r| r.first())
        .map_or(0, Vec::len);
    if levels_g < 2 || levels_c < 2 || reps < 2 {
        return Err(Error::UnbalancedDesign(format!(
            "need at least 2 levels per factor and 2 replicates, got {levels_g}x{levels_c}x{reps}"
        )));
    }
    for (i, row) in values.iter().enumerate() {
        if row.len() != levels_c {
            return Err(Error::UnbalancedDesign(format!(
                "Q_g level {i} has {} Q_c levels, expected {levels_c}",
                row.len()
            )));
        }
        for (j, cell) in row.iter().enumerate() {
            if cell.len() != reps {
                return Err(Error::UnbalancedDesign(format!(
                    "cell ({i}, {j}) has {} replicates, expected {reps}",
                    cell.len()
                )));
            }
        }
    }

    let (ig, jc, l) = (levels_g as f64, levels_c as f64, reps as f64);
    let cell_mean: Vec<Vec<f64>> = values
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| compensated_sum(c.iter().copied()) / l)
                .collect()
        })
        .collect();
    let g_mean: Vec<f64> = cell_mean
        .iter()
        .map(|row| compensated_sum(row.iter().copied()) / jc)
        .collect();
    let c_mean: Vec<f64> = (0..levels_c)
        .map(|j| compensated_sum(cell_mean.iter().map(|row| row[j])) / ig)
        .collect();
    let grand = compensated_sum(g_mean.iter().copied()) / ig;

    let ss_g = jc * l * compensated_sum(g_mean.iter().map(|m| (m - grand).powi(2)));
    let ss_c = ig * l * compensated_sum(c_mean.iter().map(|m| (m - grand).powi(2)));
    let ss_gc = l * compensated_sum((0..levels_g).flat_map(|i| {
        let cell_mean = &cell_mean;
        let g_mean = &g_mean;
        let c_mean = &c_mean;
        (0..levels_c).map(move |j| (cell_mean[i][j] - g_mean[i] - c_mean[j] + grand).powi(2))
    }));
    let ss_e = compensated_sum(values.iter().enumerate().flat_map(|(i, row)| {
        let cell_mean = &cell_mean;
        row.iter().enumerate().flat_map(move |(j, cell)| {
            cell.iter().map(move |x| (x - cell_mean[i][j]).powi(2))
        })
    }));
    let total_ss = compensated_sum(
        values
            .iter()
            .flatten()
            .flatten()
            .map(|x| (x - grand).powi(2)),
    );

    let df_e = levels_g * levels_c * (reps - 1);
    let ms_e = ss_e / df_e as f64;
    let factor = |ss: f64, df: usize| {
        let ms = ss / df as f64;
        FactorRow {
            ss,
            df,
            ms,
            f: (ms_e > 0.0).then(|| ms / ms_e),
        }
    };
    Ok(AnovaTable {
        qg: factor(ss_g, levels_g - 1),
        qc: factor(ss_c, levels_c - 1),
        interaction: factor(ss_gc, (levels_g - 1) * (levels_c - 1)),
        error: ErrorRow {
            ss: ss_e,
            df: df_e,
            ms: ms_e,
        },
        total_ss,
    })
}

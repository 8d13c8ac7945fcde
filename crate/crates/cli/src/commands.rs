use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use pcrr::baseline::psnr_y;
use pcrr::features::{extract_features, FeatureVector, LumaStandard, DEFAULT_NEIGHBORS};
use pcrr::glm::{glm_train, GlmMatrix, GlmMetadata};
use pcrr::ply::read_ply;
use pcrr::quality::QualityModelParams;
use pcrr::rate::{fit_rate_model, qp_to_qstep, solve_rate_control, QpRange, RateModelParams};
use pcrr::spatial::VoxelSize;
use pcrr::subjective::{
    aggregate_mos, observer_agreement, read_ratings_csv, remove_outliers, two_way_anova, zscore_normalize,
    MoscCells, OutlierRule,
};
use pcrr::{presets, Error};

use crate::output::{render_flat_csv, render_human, render_json, render_table_csv, Format};

type CliResult<T> = std::result::Result<T, Box<dyn std::error::Error>>;

/// Reduced-reference quality prediction and rate control for colored point clouds.
#[derive(Debug, Parser)]
#[command(name = "pcrr", version)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract the color-fluctuation features (cfgd, cbmv) from a reference PLY.
    Features(FeaturesArgs),
    /// Predict MOS for a quantization-step pair from features and a GLM matrix.
    PredictMos(PredictArgs),
    /// Fit a GLM matrix from rows of features and quality-model parameters.
    TrainGlm(TrainArgs),
    /// Z-score, screen and aggregate raw subjective ratings.
    Subjective(SubjectiveArgs),
    /// Point-to-point luma PSNR between a reference and a distorted PLY.
    Psnr(PsnrArgs),
    /// Choose geometry/color QPs that minimize predicted distortion under a rate budget.
    RateControl(RateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LumaArg {
    Bt709,
    Bt601,
}

impl From<LumaArg> for LumaStandard {
    fn from(l: LumaArg) -> Self {
        match l {
            LumaArg::Bt709 => LumaStandard::Bt709,
            LumaArg::Bt601 => LumaStandard::Bt601,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleArg {
    Bt500,
    TwoSigma,
}

#[derive(Debug, Args, Serialize)]
pub struct FeaturesArgs {
    /// Reference point cloud (ASCII or binary little-endian PLY).
    pub ply: PathBuf,
    /// Neighbors per point for cfgd.
    #[arg(long = "k", default_value_t = DEFAULT_NEIGHBORS)]
    #[serde(rename = "K")]
    pub k: usize,
    /// Voxels per axis for cbmv: 8, 16, 32 or 64.
    #[arg(long = "v", default_value_t = 64, value_parser = parse_voxel)]
    #[serde(rename = "V")]
    pub v: u32,
    /// Luma conversion.
    #[arg(long, value_enum, default_value_t = LumaArg::Bt709)]
    pub luma: LumaArg,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// Features JSON as written by `pcrr features`.
    #[arg(long)]
    pub features: PathBuf,
    /// GLM matrix JSON; the bundled optimum is used when omitted.
    #[arg(long)]
    pub glm: Option<PathBuf>,
    /// Geometry quantization step.
    #[arg(long, required_unless_present = "qp_g", conflicts_with = "qp_g")]
    pub qg: Option<f64>,
    /// Color quantization step.
    #[arg(long, required_unless_present = "qp_c", conflicts_with = "qp_c")]
    pub qc: Option<f64>,
    /// Geometry QP, mapped to a step.
    #[arg(long)]
    pub qp_g: Option<i32>,
    /// Color QP, mapped to a step.
    #[arg(long)]
    pub qp_c: Option<i32>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// CSV with columns cfgd, cbmv, p1, p2, p3 (extra columns ignored).
    #[arg(long)]
    pub csv: PathBuf,
    /// Voxel size the features were extracted at, recorded in the metadata.
    #[arg(long = "v", value_parser = parse_voxel)]
    #[serde(rename = "V")]
    pub v: Option<u32>,
    /// Neighbor count the features were extracted at, recorded in the metadata.
    #[arg(long = "k")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SubjectiveArgs {
    /// CSV with columns content_id, observer_id, qg_level, qc_level, score.
    #[arg(long)]
    pub ratings: PathBuf,
    /// Skip the per-observer Z-score normalization.
    #[arg(long)]
    pub raw: bool,
    /// Skip outlier screening.
    #[arg(long)]
    pub no_outliers: bool,
    /// Outlier screening rule.
    #[arg(long, value_enum, default_value_t = RuleArg::Bt500)]
    pub outlier_rule: RuleArg,
    /// Run a two-way ANOVA on the MOS^c cells (needs a complete design).
    #[arg(long)]
    pub anova: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PsnrArgs {
    /// Reference PLY.
    pub reference: PathBuf,
    /// Distorted PLY.
    pub distorted: PathBuf,
    /// Luma conversion.
    #[arg(long, value_enum, default_value_t = LumaArg::Bt709)]
    pub luma: LumaArg,
}

#[derive(Debug, Args, Serialize)]
pub struct RateArgs {
    /// Features JSON as written by `pcrr features`.
    #[arg(long, required_unless_present = "model", conflicts_with = "model")]
    pub features: Option<PathBuf>,
    /// GLM matrix JSON; the bundled optimum is used when omitted.
    #[arg(long, conflicts_with = "model")]
    pub glm: Option<PathBuf>,
    /// Quality-model parameters JSON {p1, p2, p3}, instead of features + GLM.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Precoding CSV with columns kind (geom|color), qstep, kbpmp.
    #[arg(long)]
    pub rate_samples: PathBuf,
    /// Rate budget in kilobits per million points.
    #[arg(long)]
    pub target_kbpmp: f64,
    /// Smallest QP considered.
    #[arg(long, default_value_t = 26)]
    pub qp_min: i32,
    /// Largest QP considered.
    #[arg(long, default_value_t = 50)]
    pub qp_max: i32,
}

fn parse_voxel(s: &str) -> Result<u32, String> {
    let n: u32 = s.parse().map_err(|e| format!("{e}"))?;
    VoxelSize::try_from(n).map(|_| n).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Config<'a, A: Serialize> {
    command: &'static str,
    format: Format,
    #[serde(flatten)]
    args: &'a A,
}

#[derive(Serialize)]
struct Envelope<'a, A: Serialize, P: Serialize> {
    config: Config<'a, A>,
    #[serde(flatten)]
    payload: P,
}

fn emit<A: Serialize, P: Serialize>(cli: &Cli, command: &'static str, args: &A, payload: P) -> CliResult<String> {
    let env = Envelope {
        config: Config {
            command,
            format: cli.format,
            args,
        },
        payload,
    };
    Ok(match cli.format {
        Format::Json => render_json(&env)?,
        Format::Human => render_human(&env)?,
        Format::Csv => render_flat_csv(&env.payload)?,
    })
}

pub fn run(cli: &Cli) -> CliResult<String> {
    match &cli.command {
        Command::Features(a) => features(cli, a),
        Command::PredictMos(a) => predict_mos(cli, a),
        Command::TrainGlm(a) => train_glm(cli, a),
        Command::Subjective(a) => subjective(cli, a),
        Command::Psnr(a) => psnr(cli, a),
        Command::RateControl(a) => rate_control(cli, a),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> pcrr::Result<T> {
    let file = File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

fn load_glm(path: Option<&Path>) -> pcrr::Result<GlmMatrix> {
    match path {
        Some(p) => read_json(p),
        None => Ok(presets::published_predictor()),
    }
}

/// Quality-model parameters from a features file and a GLM matrix.
fn predict_params(features: &Path, glm: Option<&Path>) -> pcrr::Result<QualityModelParams> {
    let fv: FeatureVector = read_json(features)?;
    let h = load_glm(glm)?;
    if let Some(v) = h.metadata.voxel_size {
        if v != fv.voxel_size {
            eprintln!(
                "warning: features extracted at V={} but the GLM was trained at V={}",
                fv.voxel_size, v
            );
        }
    }
    h.predict(&fv.values())
}

fn features(cli: &Cli, a: &FeaturesArgs) -> CliResult<String> {
    let cloud = read_ply(&a.ply)?;
    let fv = extract_features(&cloud, a.k, VoxelSize::try_from(a.v)?, a.luma.into())?;
    emit(cli, "features", a, fv)
}

#[derive(Serialize)]
struct Prediction {
    p1: f64,
    p2: f64,
    p3: f64,
    qg: f64,
    qc: f64,
    mosc: f64,
    mos: f64,
}

fn predict_mos(cli: &Cli, a: &PredictArgs) -> CliResult<String> {
    let step = |q: Option<f64>, qp: Option<i32>| -> pcrr::Result<f64> {
        match (q, qp) {
            (Some(q), _) if q.is_finite() && q > 0.0 => Ok(q),
            (Some(q), _) => Err(Error::OutOfRange(format!("quantization step {q} must be positive"))),
            (None, Some(qp)) => qp_to_qstep(qp),
            (None, None) => Err(Error::OutOfRange("missing quantization step".into())),
        }
    };
    let qg = step(a.qg, a.qp_g)?;
    let qc = step(a.qc, a.qp_c)?;
    let params = predict_params(&a.features, a.glm.as_deref())?;
    let [p1, p2, p3] = params.as_array();
    let out = Prediction {
        p1,
        p2,
        p3,
        qg,
        qc,
        mosc: params.predict_mosc(qg, qc),
        mos: params.predict_mos(qg, qc),
    };
    emit(cli, "predict-mos", a, out)
}

#[derive(Deserialize)]
struct TrainRow {
    cfgd: f64,
    cbmv: f64,
    p1: f64,
    p2: f64,
    p3: f64,
}

#[derive(Serialize)]
struct TrainOutput {
    #[serde(flatten)]
    matrix: GlmMatrix,
    training: TrainStats,
}

#[derive(Serialize)]
struct TrainStats {
    epsilon: f64,
    rows: usize,
}

fn train_glm(cli: &Cli, a: &TrainArgs) -> CliResult<String> {
    let file = File::open(&a.csv).map_err(Error::from)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let rows: Vec<TrainRow> = rdr
        .deserialize()
        .collect::<Result<_, csv::Error>>()
        .map_err(Error::from)?;
    let features: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.cfgd, r.cbmv]).collect();
    let targets: Vec<QualityModelParams> = rows
        .iter()
        .map(|r| QualityModelParams::new(r.p1, r.p2, r.p3))
        .collect();
    let mut fit = glm_train(&features, &targets, vec!["cfgd".into(), "cbmv".into()])?;
    fit.matrix.metadata = GlmMetadata {
        voxel_size: a.v.map(VoxelSize::try_from).transpose()?,
        neighbors: a.k,
        luma_standard: None,
        note: None,
    };
    let out = TrainOutput {
        matrix: fit.matrix,
        training: TrainStats {
            epsilon: fit.epsilon,
            rows: fit.rows,
        },
    };
    emit(cli, "train-glm", a, out)
}

fn subjective(cli: &Cli, a: &SubjectiveArgs) -> CliResult<String> {
    let raw = read_ratings_csv(&a.ratings)?;
    let normalized = if a.raw { raw } else { zscore_normalize(&raw)? };
    let rule = match a.outlier_rule {
        RuleArg::Bt500 => OutlierRule::Bt500,
        RuleArg::TwoSigma => OutlierRule::TwoSigma,
    };
    let (screened, report) = if a.no_outliers {
        (normalized, None)
    } else {
        let (t, r) = remove_outliers(&normalized, rule);
        (t, Some(r))
    };
    let mos = aggregate_mos(&screened)?;
    let agreement = observer_agreement(&screened, &mos)?;
    let anova = if a.anova {
        let cells = MoscCells::from_table(&mos)?;
        Some(two_way_anova(&cells.values)?)
    } else {
        None
    };

    if cli.format == Format::Csv {
        return render_table_csv(&mos.entries);
    }

    #[derive(Serialize)]
    struct Out<'a> {
        outliers: Option<pcrr::subjective::OutlierReport>,
        mos: &'a [pcrr::subjective::MosEntry],
        observer_agreement: Vec<pcrr::subjective::ObserverAgreement>,
        #[serde(skip_serializing_if = "Option::is_none")]
        anova: Option<pcrr::subjective::AnovaTable>,
    }
    let out = Out {
        outliers: report,
        mos: &mos.entries,
        observer_agreement: agreement,
        anova,
    };
    emit(cli, "subjective", a, out)
}

fn psnr(cli: &Cli, a: &PsnrArgs) -> CliResult<String> {
    let reference = read_ply(&a.reference)?;
    let distorted = read_ply(&a.distorted)?;
    let r = psnr_y(&reference, &distorted, a.luma.into())?;
    emit(cli, "psnr", a, r)
}

#[derive(Deserialize)]
struct RateSampleRow {
    kind: String,
    qstep: f64,
    kbpmp: f64,
}

fn read_rate_samples(path: &Path) -> pcrr::Result<RateModelParams> {
    let file = File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let (mut geom, mut color) = (Vec::new(), Vec::new());
    for row in rdr.deserialize() {
        let row: RateSampleRow = row?;
        match row.kind.as_str() {
            "geom" | "geometry" => geom.push((row.qstep, row.kbpmp)),
            "color" | "colour" => color.push((row.qstep, row.kbpmp)),
            other => return Err(Error::InvalidValue(format!("unknown rate sample kind {other:?}"))),
        }
    }
    Ok(RateModelParams {
        geometry: fit_rate_model(&geom)?,
        color: fit_rate_model(&color)?,
    })
}

fn rate_control(cli: &Cli, a: &RateArgs) -> CliResult<String> {
    let quality = match (&a.model, &a.features) {
        (Some(m), _) => read_json::<QualityModelParams>(m)?,
        (None, Some(f)) => predict_params(f, a.glm.as_deref())?,
        (None, None) => return Err(Error::OutOfRange("either --features or --model is required".into()).into()),
    };
    let rate = read_rate_samples(&a.rate_samples)?;
    let range = QpRange::new(a.qp_min, a.qp_max)?;
    let solution = solve_rate_control(&quality, &rate, a.target_kbpmp, range)?;

    #[derive(Serialize)]
    struct Out {
        quality: QualityModelParams,
        rate_model: RateModelParams,
        solution: pcrr::rate::RateControlSolution,
    }
    emit(
        cli,
        "rate-control",
        a,
        Out {
            quality,
            rate_model: rate,
            solution,
        },
    )
}

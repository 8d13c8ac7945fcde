//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;

use common::*;
use pcrr::baseline::psnr_y;
use pcrr::features::{cfgd, cbmv, extract_features, FeatureVector, LumaStandard};
use pcrr::glm::{glm_train, GlmMatrix};
use pcrr::ply::{read_ply_from, write_ply_to, PlyFormat};
use pcrr::presets::published_predictor;
use pcrr::quality::{fit_qg_trends, QgLine, QualityModelParams};
use pcrr::rate::{qp_to_qstep, solve_rate_control, QpRange, RateModel, RateModelParams};
use pcrr::spatial::{build_knn, build_voxel_grid, VoxelSize};
use pcrr::subjective::two_way_anova;
use pcrr::PointCloud;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const STEPS: [f64; 5] = [12.75, 25.5, 51.0, 102.0, 204.0];

fn criterion_1() -> Outcome {
    for (qp, step) in [(26, 12.75), (32, 25.5), (38, 51.0), (44, 102.0), (50, 204.0)] {
        let got = qp_to_qstep(qp).map_err(|e| e.to_string())?;
        ensure(got == step, || format!("qp {qp} -> {got}, expected {step}"))?;
    }
    Ok("5 anchors exact".into())
}

fn criterion_2() -> Outcome {
    let table = [
        (12.75, 0.249, 9.986),
        (25.5, 0.238, 12.782),
        (51.0, 0.218, 19.765),
        (102.0, 0.159, 38.187),
        (204.0, 0.093, 60.571),
    ];
    let lines: Vec<QgLine> = table
        .iter()
        .map(|&(qg, slope, intercept)| QgLine { qg, slope, intercept, report: None })
        .collect();
    let t = fit_qg_trends(&lines).map_err(|e| e.to_string())?;
    let (s1, s2) = (t.slope_report.scc, t.intercept_report.scc);
    ensure((s1 - 0.988).abs() <= 0.02, || format!("slope SCC {s1:.5}"))?;
    ensure((s2 - 0.990).abs() <= 0.02, || format!("intercept SCC {s2:.5}"))?;
    Ok(format!("SCC {s1:.5} / {s2:.5} (published 0.988 / 0.990)"))
}

fn criterion_3() -> Outcome {
    let h = published_predictor();
    let zero = h.predict(&[0.0, 0.0]).map_err(|e| e.to_string())?;
    ensure(zero.as_array() == [0.1817, 0.2058, 18.4528], || format!("zero features -> {:?}", zero.as_array()))?;
    let p = h.predict(&[10.0, 20.0]).map_err(|e| e.to_string())?;
    let want = [-0.0163, 0.7198, -12.6002];
    for (g, w) in p.as_array().iter().zip(want) {
        ensure((g - w).abs() <= 1e-12, || format!("(10, 20) -> {:?}", p.as_array()))?;
    }
    Ok("exact at 0, within 1e-12 at (10, 20)".into())
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let n = if trial % 10 == 0 { 2000 } else { r.gen_range(2..800) };
        let cloud = random_cloud(&mut r, n, 50.0);
        let k = r.gen_range(1..12);
        let size = VoxelSize::ALL[trial % 4];
        let f = extract_features(&cloud, k, size, LumaStandard::Bt709).map_err(|e| e.to_string())?;
        let (oc, ov) = (brute_cfgd(&cloud, k), brute_cbmv(&cloud, size.per_axis()));
        for (got, want, what) in [(f.cfgd, oc, "cfgd"), (f.cbmv, ov, "cbmv")] {
            let rel = (got - want).abs() / want.abs().max(1e-300);
            worst = worst.max(if want == 0.0 { got.abs() } else { rel });
            ensure(rel_close(got, want, 1e-9), || format!("trial {trial}: {what} {got} vs oracle {want}"))?;
        }
    }
    let pair = PointCloud::colored(vec![[0.0; 3], [2.0, 0.0, 0.0]], vec![[0; 3], [100; 3]]).unwrap();
    let c = cfgd(&pair, &build_knn(&pair), 8).map_err(|e| e.to_string())?;
    let stacked = PointCloud::colored(vec![[1.0; 3]; 2], vec![[0; 3], [100; 3]]).unwrap();
    let v = cbmv(&stacked, &build_voxel_grid(&stacked, VoxelSize::V8)).map_err(|e| e.to_string())?;
    ensure(c == 50.0 && v == 50.0, || format!("two-point case ({c}, {v})"))?;
    Ok(format!("50 clouds, worst rel err {worst:.1e}; two-point cfgd=50, cbmv=50"))
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let reps = r.gen_range(2..6);
        let data: Vec<Vec<Vec<f64>>> = (0..5)
            .map(|_| (0..5).map(|_| (0..reps).map(|_| r.gen_range(0.0..100.0)).collect()).collect())
            .collect();
        let t = two_way_anova(&data).map_err(|e| e.to_string())?;
        let exact = exact_anova(&data);
        let got = [t.qg.ss, t.qc.ss, t.interaction.ss, t.error.ss];
        for (g, w) in got.iter().zip(exact) {
            worst = worst.max((g - w).abs() / w.abs().max(1.0));
            ensure(rel_close(*g, w, 1e-9), || format!("trial {trial}: SS {got:?} vs {exact:?}"))?;
        }
        let sum: f64 = got.iter().sum();
        ensure(rel_close(sum, t.total_ss, 1e-9), || format!("trial {trial}: decomposition {sum} vs {}", t.total_ss))?;
    }

    // Published per-content bilinear fits for 16 contents, plus noise.
    let contents = [
        (-0.0005, 0.263, 0.223, 3.192),
        (-0.0006, 0.294, 0.127, 19.860),
        (-0.0006, 0.190, 0.204, 8.293),
        (-0.0008, 0.303, 0.188, 5.519),
        (-0.0010, 0.327, 0.258, 3.389),
        (-0.0005, 0.332, 0.115, 13.016),
        (-0.0012, 0.311, 0.361, -3.666),
        (-0.0012, 0.288, 0.359, -3.440),
        (-0.0010, 0.244, 0.304, 12.295),
        (-0.0014, 0.351, 0.332, 5.463),
        (-0.0009, 0.192, 0.366, 6.488),
        (-0.0007, 0.184, 0.276, 3.242),
        (-0.0006, 0.312, 0.112, 13.296),
        (-0.0007, 0.308, 0.196, 14.527),
        (-0.0010, 0.245, 0.366, -1.385),
        (-0.0008, 0.184, 0.333, 9.886),
    ];
    let data: Vec<Vec<Vec<f64>>> = STEPS
        .iter()
        .map(|&qg| {
            STEPS
                .iter()
                .map(|&qc| {
                    contents
                        .iter()
                        .map(|&(a, b, c, d)| a * qg * qc + b * qg + c * qc + d + r.gen_range(-4.0..4.0))
                        .collect()
                })
                .collect()
        })
        .collect();
    let t = two_way_anova(&data).map_err(|e| e.to_string())?;
    let (fg, fc, fi) = (t.qg.f.unwrap(), t.qc.f.unwrap(), t.interaction.f.unwrap());
    ensure(fi < fg && fi < fc, || format!("F ordering ({fg:.1}, {fc:.1}, {fi:.2})"))?;
    Ok(format!(
        "20 tensors, worst rel err {worst:.1e}; F = {fg:.1}, {fc:.1}, {fi:.2} (interaction smallest)"
    ))
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let h: Vec<[f64; 3]> = (0..3)
        .map(|_| std::array::from_fn(|_| r.gen_range(-2.0..2.0)))
        .collect();
    let labels = vec!["cfgd".to_string(), "cbmv".to_string()];
    let truth = GlmMatrix::new(h.clone(), labels.clone()).map_err(|e| e.to_string())?;
    let features: Vec<Vec<f64>> = (0..8).map(|_| vec![r.gen_range(0.0..40.0), r.gen_range(0.0..20.0)]).collect();
    let targets: Vec<QualityModelParams> = features
        .iter()
        .map(|f| truth.predict(f).unwrap())
        .collect();
    let fit = glm_train(&features, &targets, labels.clone()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (got, want) in fit.matrix.weights().iter().zip(&h) {
        for c in 0..3 {
            worst = worst.max((got[c] - want[c]).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("noiseless recovery error {worst:e}"))?;

    let noisy: Vec<QualityModelParams> = targets
        .iter()
        .map(|p| {
            let [a, b, c] = p.as_array();
            QualityModelParams::new(a + r.gen_range(-0.05..0.05), b + r.gen_range(-0.05..0.05), c + r.gen_range(-1.0..1.0))
        })
        .collect();
    let fit = glm_train(&features, &noisy, labels).map_err(|e| e.to_string())?;
    let design: Vec<Vec<f64>> = features.iter().map(|f| vec![1.0, f[0], f[1]]).collect();
    let rhs: Vec<Vec<f64>> = noisy.iter().map(|p| p.as_array().to_vec()).collect();
    let oracle = exact_normal_equations(&design, &rhs);
    let mut worst_noisy = 0.0f64;
    for (got, want) in fit.matrix.weights().iter().zip(&oracle) {
        for c in 0..3 {
            let err = (got[c] - want[c]).abs() / want[c].abs().max(1.0);
            worst_noisy = worst_noisy.max(err);
        }
    }
    ensure(worst_noisy <= 1e-8, || format!("noisy fit vs normal equations {worst_noisy:e}"))?;
    Ok(format!("noiseless err {worst:.1e}, noisy vs exact normal equations {worst_noisy:.1e}"))
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let range = QpRange::default();
    let (lo, hi) = (qp_to_qstep(range.min).unwrap(), qp_to_qstep(range.max).unwrap());
    let (mut solved, mut binding, mut worst_kkt) = (0, 0, 0.0f64);
    for trial in 0..150 {
        let quality = QualityModelParams::new(r.gen_range(0.02..0.5), r.gen_range(0.02..0.5), r.gen_range(-5.0..30.0));
        let rate = RateModelParams {
            geometry: RateModel {
                gamma: r.gen_range(1e3..1e5),
                theta: r.gen_range(-1.6..-0.3),
            },
            color: RateModel {
                gamma: r.gen_range(1e3..1e5),
                theta: r.gen_range(-1.6..-0.3),
            },
        };
        let (r_min, r_max) = (rate.rate(hi, hi), rate.rate(lo, lo));
        let target = r_min * (r_max / r_min).powf(r.gen_range(-0.05..1.05));
        let oracle = grid_optimum(&quality, &rate, target, range.min..=range.max);
        match (solve_rate_control(&quality, &rate, target, range), oracle) {
            (Ok(s), Some((g, c, _))) => {
                ensure((s.qp_g, s.qp_c) == (g, c), || {
                    format!("trial {trial}: solver ({}, {}) vs grid ({g}, {c})", s.qp_g, s.qp_c)
                })?;
                ensure(s.predicted_rate <= target, || format!("trial {trial}: rate over budget"))?;
                if s.continuous.lambda > 0.0 {
                    binding += 1;
                    worst_kkt = worst_kkt.max(s.continuous.kkt_residual);
                    ensure(s.continuous.kkt_residual < 1e-8, || {
                        format!("trial {trial}: KKT residual {:e}", s.continuous.kkt_residual)
                    })?;
                }
                solved += 1;
            }
            (Err(e), None) if e.kind() == "Infeasible" => {}
            (got, want) => return Err(format!("trial {trial}: solver {got:?} vs grid {want:?}")),
        }
    }
    ensure(solved >= 100, || format!("only {solved} feasible instances"))?;
    Ok(format!("{solved} feasible instances match the grid; {binding} binding, worst KKT {worst_kkt:.1e}"))
}

/// Exact rigid motion: axis permutation with sign flips, then a dyadic shift.
fn rigid(cloud: &PointCloud) -> PointCloud {
    let pos = cloud
        .positions()
        .iter()
        .map(|p| [-p[2] + 16.0, p[0] - 8.5, p[1] + 0.25])
        .collect();
    PointCloud::new(pos, cloud.colors().map(<[_]>::to_vec)).unwrap()
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let na = r.gen_range(1..500);
        let nb = r.gen_range(1..500);
        // Dyadic coordinates keep the rigid motion exact in f32.
        let mut grid_cloud = |n: usize| {
            let pos = (0..n)
                .map(|_| std::array::from_fn(|_| r.gen_range(-256i32..256) as f32 / 8.0))
                .collect();
            let col = (0..n).map(|_| std::array::from_fn(|_| r.gen())).collect();
            PointCloud::colored(pos, col).unwrap()
        };
        let (a, b) = (grid_cloud(na), grid_cloud(nb));
        let got = psnr_y(&a, &b, LumaStandard::Bt709).map_err(|e| e.to_string())?;
        let (ab, ba, db) = brute_psnr(&a, &b);
        ensure(rel_close(got.mse_ab, ab, 1e-9) && rel_close(got.mse_ba, ba, 1e-9), || {
            format!("trial {trial}: mse ({}, {}) vs ({ab}, {ba})", got.mse_ab, got.mse_ba)
        })?;
        worst = worst.max((got.psnr_y - db).abs());
        ensure((got.psnr_y - db).abs() <= 1e-9, || format!("trial {trial}: {} dB vs {db}", got.psnr_y))?;
        let swapped = psnr_y(&b, &a, LumaStandard::Bt709).unwrap().psnr_y;
        ensure((swapped - got.psnr_y).abs() <= 1e-9, || format!("trial {trial}: asymmetric"))?;
        let moved = psnr_y(&rigid(&a), &rigid(&b), LumaStandard::Bt709).unwrap().psnr_y;
        ensure((moved - got.psnr_y).abs() <= 1e-9, || format!("trial {trial}: rigid motion changed PSNR"))?;
    }
    Ok(format!("20 pairs, worst |dB - oracle| {worst:.1e}; symmetric and rigid-invariant"))
}

fn criterion_9() -> Outcome {
    let mut r = rng(9);
    for trial in 0..200 {
        let n = r.gen_range(1..300);
        let pos: Vec<[f32; 3]> = (0..n)
            .map(|_| std::array::from_fn(|_| f32::from_bits(r.gen_range(0..0x7f00_0000u32)) * if r.gen() { 1.0 } else { -1.0 }))
            .collect();
        let colors = r.gen_bool(0.8).then(|| (0..n).map(|_| std::array::from_fn(|_| r.gen())).collect());
        let cloud = PointCloud::new(pos, colors).unwrap();
        for format in [PlyFormat::Ascii, PlyFormat::BinaryLittleEndian] {
            let mut buf = Vec::new();
            write_ply_to(&cloud, format, &mut buf).map_err(|e| e.to_string())?;
            let back = read_ply_from(buf.as_slice()).map_err(|e| e.to_string())?;
            ensure(back == cloud, || format!("trial {trial}: {format:?} round trip differs"))?;
        }
    }
    Ok("200 clouds x 2 formats bit-exact".into())
}

fn criterion_10() -> Outcome {
    let mut r = rng(10);
    let cloud = textured_cloud(&mut r, 14);
    let fv = extract_features(&cloud, 8, VoxelSize::V64, LumaStandard::Bt709).map_err(|e| e.to_string())?;
    let wire = serde_json::to_string(&fv).unwrap();
    let fv: FeatureVector = serde_json::from_str(&wire).unwrap();
    let p = published_predictor().predict(&fv.values()).map_err(|e| e.to_string())?;
    ensure(p.p1 > 0.0 && p.p2 > 0.0, || format!("features {:?} give p = {:?}", fv.values(), p.as_array()))?;
    for (i, &qg) in STEPS.iter().enumerate() {
        for (j, &qc) in STEPS.iter().enumerate() {
            let mos = p.predict_mos(qg, qc);
            ensure((0.0..=100.0).contains(&mos), || format!("MOS {mos} at ({qg}, {qc})"))?;
            if i > 0 {
                ensure(mos <= p.predict_mos(STEPS[i - 1], qc), || format!("MOS rises along Qg at {qg}"))?;
            }
            if j > 0 {
                ensure(mos <= p.predict_mos(qg, STEPS[j - 1]), || format!("MOS rises along Qc at {qc}"))?;
            }
        }
    }
    Ok(format!(
        "cfgd {:.3}, cbmv {:.3}; MOS {:.2} .. {:.2} nonincreasing on the 5x5 grid",
        fv.cfgd,
        fv.cbmv,
        p.predict_mos(204.0, 204.0),
        p.predict_mos(12.75, 12.75)
    ))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("QP mapping anchors", Duration::from_millis(1), criterion_1),
        ("per-Qg trend linearity", Duration::from_millis(10), criterion_2),
        ("bundled GLM preset", Duration::from_millis(1), criterion_3),
        ("feature oracles", Duration::from_secs(30), criterion_4),
        ("ANOVA oracle", Duration::from_secs(5), criterion_5),
        ("GLM round trip", Duration::from_secs(1), criterion_6),
        ("rate-control oracle", Duration::from_secs(5), criterion_7),
        ("PSNR oracle", Duration::from_secs(10), criterion_8),
        ("PLY round trip", Duration::from_secs(5), criterion_9),
        ("end-to-end pipeline", Duration::from_secs(60), criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|msg| {
            if elapsed <= *budget {
                Ok(msg)
            } else {
                Err(format!("{msg}; took {elapsed:?}, budget {budget:?}"))
            }
        });
        match outcome {
            Ok(msg) => println!("PASS  {:>2}. {name} [{elapsed:.2?}]: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {:>2}. {name} [{elapsed:.2?}]: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

//! Independent reference implementations for the integration suites.
//!
//! Everything here is deliberately naive: O(N²) scans, exact rational
//! arithmetic, exhaustive grids. Nothing calls into the library except for
//! plain data types.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num::{BigRational, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pcrr::quality::QualityModelParams;
use pcrr::rate::RateModelParams;
use pcrr::PointCloud;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f32) -> PointCloud {
    let positions = (0..n)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-extent..extent)))
        .collect();
    let colors = (0..n).map(|_| std::array::from_fn(|_| rng.gen())).collect();
    PointCloud::colored(positions, colors).unwrap()
}

/// Smooth color ramp with a mild per-point jitter, on a jittered lattice.
pub fn textured_cloud(rng: &mut ChaCha8Rng, side: usize) -> PointCloud {
    let mut positions = Vec::new();
    let mut colors = Vec::new();
    for x in 0..side {
        for y in 0..side {
            for z in 0..side {
                let p = [x as f32, y as f32, z as f32].map(|c| c * 4.0 + rng.gen_range(-0.5..0.5));
                let base = 40.0 + 160.0 * (x + y) as f32 / (2 * side) as f32;
                let jitter: f32 = rng.gen_range(-6.0..6.0);
                let v = (base + jitter).clamp(0.0, 255.0) as u8;
                positions.push(p);
                colors.push([v, v.saturating_add(10), v.saturating_sub(10)]);
            }
        }
    }
    PointCloud::colored(positions, colors).unwrap()
}

pub fn dist2(a: &[f32; 3], b: &[f32; 3]) -> f64 {
    (0..3).map(|i| (a[i] as f64 - b[i] as f64).powi(2)).sum()
}

pub fn luma709(c: [u8; 3]) -> f64 {
    (2126 * c[0] as u32 + 7152 * c[1] as u32 + 722 * c[2] as u32) as f64 / 10000.0
}

/// K nearest by full sort on (distance², index).
pub fn brute_knn(points: &[[f32; 3]], query: &[f32; 3], k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| Some(j) != skip)
        .map(|(j, p)| (j, dist2(query, p)))
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

pub fn brute_cfgd(cloud: &PointCloud, k: usize) -> f64 {
    let pts = cloud.positions();
    let y: Vec<f64> = cloud.colors().unwrap().iter().map(|&c| luma709(c)).collect();
    let mut total = 0.0;
    for i in 0..pts.len() {
        let mut s = 0.0;
        let mut n = 0;
        for (j, d2) in brute_knn(pts, &pts[i], k, Some(i)) {
            if d2 > 0.0 {
                s += (y[i] - y[j]).abs() / d2.sqrt();
                n += 1;
            }
        }
        if n > 0 {
            total += s / n as f64;
        }
    }
    total / pts.len() as f64
}

pub fn brute_cbmv(cloud: &PointCloud, per_axis: u32) -> f64 {
    let pts = cloud.positions();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a] as f64);
            hi[a] = hi[a].max(p[a] as f64);
        }
    }
    let edge = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    let n = per_axis as f64;
    let mut cells: BTreeMap<[u32; 3], Vec<f64>> = BTreeMap::new();
    for (i, p) in pts.iter().enumerate() {
        let cell = std::array::from_fn(|a| {
            if edge <= 0.0 {
                return 0;
            }
            let min = (lo[a] + hi[a]) / 2.0 - edge / 2.0;
            (n * (p[a] as f64 - min) / edge).floor().clamp(0.0, n - 1.0) as u32
        });
        cells.entry(cell).or_default().push(luma709(cloud.colors().unwrap()[i]));
    }
    let stds: Vec<f64> = cells
        .values()
        .map(|v| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        })
        .collect();
    stds.iter().sum::<f64>() / stds.len() as f64
}

/// Symmetric max-MSE luma PSNR by exhaustive nearest-neighbor search.
pub fn brute_psnr(a: &PointCloud, b: &PointCloud) -> (f64, f64, f64) {
    let directional = |from: &PointCloud, to: &PointCloud| {
        let fy = from.colors().unwrap();
        let ty = to.colors().unwrap();
        let mut s = 0.0;
        for (i, p) in from.positions().iter().enumerate() {
            let (j, _) = brute_knn(to.positions(), p, 1, None)[0];
            s += (luma709(fy[i]) - luma709(ty[j])).powi(2);
        }
        s / from.len() as f64
    };
    let ab = directional(a, b);
    let ba = directional(b, a);
    let mse = ab.max(ba);
    let db = if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    };
    (ab, ba, db)
}

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn f(x: &BigRational) -> f64 {
    x.to_f64().unwrap()
}

/// Exact two-way ANOVA sums of squares `(SS_g, SS_c, SS_gc, SS_e)`.
pub fn exact_anova(values: &[Vec<Vec<f64>>]) -> [f64; 4] {
    let ni = values.len();
    let nj = values[0].len();
    let nl = values[0][0].len();
    let count = |n: usize| BigRational::from_integer(n.into());
    let cell: Vec<Vec<BigRational>> = values
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| c.iter().map(|&x| q(x)).fold(BigRational::zero(), |a, b| a + b) / count(nl))
                .collect()
        })
        .collect();
    let gm: Vec<BigRational> = cell
        .iter()
        .map(|r| r.iter().cloned().fold(BigRational::zero(), |a, b| a + b) / count(nj))
        .collect();
    let cm: Vec<BigRational> = (0..nj)
        .map(|j| cell.iter().map(|r| r[j].clone()).fold(BigRational::zero(), |a, b| a + b) / count(ni))
        .collect();
    let grand = gm.iter().cloned().fold(BigRational::zero(), |a, b| a + b) / count(ni);

    let sq = |x: BigRational| x.clone() * x;
    let ss_g = gm.iter().map(|m| sq(m - &grand)).fold(BigRational::zero(), |a, b| a + b) * count(nj * nl);
    let ss_c = cm.iter().map(|m| sq(m - &grand)).fold(BigRational::zero(), |a, b| a + b) * count(ni * nl);
    let mut ss_gc = BigRational::zero();
    let mut ss_e = BigRational::zero();
    for i in 0..ni {
        for j in 0..nj {
            ss_gc += sq(&cell[i][j] - &gm[i] - &cm[j] + &grand);
            for &x in &values[i][j] {
                ss_e += sq(q(x) - &cell[i][j]);
            }
        }
    }
    ss_gc *= count(nl);
    [f(&ss_g), f(&ss_c), f(&ss_gc), f(&ss_e)]
}

/// Solves the normal equations `AᵀA x = Aᵀb` exactly, one column of `b` at a time.
pub fn exact_normal_equations(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a[0].len();
    let m = b[0].len();
    let aq: Vec<Vec<BigRational>> = a.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect();
    let bq: Vec<Vec<BigRational>> = b.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect();
    // Augmented [AᵀA | Aᵀb].
    let mut mat: Vec<Vec<BigRational>> = (0..n)
        .map(|r| {
            let mut row: Vec<BigRational> = (0..n)
                .map(|c| aq.iter().fold(BigRational::zero(), |s, x| s + &x[r] * &x[c]))
                .collect();
            row.extend((0..m).map(|c| aq.iter().zip(&bq).fold(BigRational::zero(), |s, (x, y)| s + &x[r] * &y[c])));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !mat[r][col].is_zero()).expect("full rank");
        mat.swap(col, pivot);
        let p = mat[col][col].clone();
        for x in mat[col].iter_mut() {
            *x /= p.clone();
        }
        for r in 0..n {
            if r != col && !mat[r][col].is_zero() {
                let factor = mat[r][col].clone();
                let pivot_row = mat[col].clone();
                for (x, y) in mat[r].iter_mut().zip(pivot_row) {
                    *x -= &factor * y;
                }
            }
        }
    }
    (0..n).map(|r| (0..m).map(|c| f(&mat[r][n + c])).collect()).collect()
}

/// Exhaustive search over the QP grid; ties keep the first (qp_g, qp_c) in
/// lexicographic order.
pub fn grid_optimum(
    quality: &QualityModelParams,
    rate: &RateModelParams,
    target: f64,
    qps: std::ops::RangeInclusive<i32>,
) -> Option<(i32, i32, f64)> {
    let step = |qp: i32| 12.75 * 2f64.powf((qp - 26).rem_euclid(6) as f64 / 6.0) * 2f64.powi((qp - 26).div_euclid(6));
    let mut best: Option<(i32, i32, f64)> = None;
    for g in qps.clone() {
        for c in qps.clone() {
            let (qg, qc) = (step(g), step(c));
            if rate.rate(qg, qc) > target {
                continue;
            }
            let d = quality.p1 * qg + quality.p2 * qc + quality.p3;
            if best.is_none_or(|(_, _, b)| d < b) {
                best = Some((g, c, d));
            }
        }
    }
    best
}

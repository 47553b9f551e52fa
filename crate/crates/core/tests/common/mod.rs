// Helpers shared by the integration tests. Each test binary uses a subset.
#![allow(dead_code)]

use std::f64::consts::PI;

use papa::{PointCloud, SpatialIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Ranks with ties sharing their average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut c, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        c += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    c / (va * vb).sqrt()
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

/// Unit circle sampled at uniform random angles.
pub fn circle(n: usize, seed: u64) -> PointCloud<f64> {
    let mut r = rng(seed);
    let flat = (0..n)
        .flat_map(|_| {
            let a: f64 = r.random_range(0.0..2.0 * PI);
            [a.cos(), a.sin()]
        })
        .collect();
    PointCloud::from_flat(flat, 2).unwrap()
}

/// Uniform points in the unit disk.
pub fn disk(n: usize, seed: u64) -> PointCloud<f64> {
    let mut r = rng(seed);
    let flat = (0..n)
        .flat_map(|_| {
            let a: f64 = r.random_range(0.0..2.0 * PI);
            let s: f64 = r.random::<f64>().sqrt();
            [s * a.cos(), s * a.sin()]
        })
        .collect();
    PointCloud::from_flat(flat, 2).unwrap()
}

/// Regular grid `nx × ny` with the given spacing, lifted into `dim ≥ 2`
/// dimensions with zeros.
pub fn grid(nx: usize, ny: usize, spacing: f64, dim: usize) -> PointCloud<f64> {
    let mut flat = Vec::with_capacity(nx * ny * dim);
    for i in 0..nx {
        for j in 0..ny {
            flat.push(i as f64 * spacing);
            flat.push(j as f64 * spacing);
            flat.extend(std::iter::repeat_n(0.0, dim - 2));
        }
    }
    PointCloud::from_flat(flat, dim).unwrap()
}

/// Random orthogonal matrix (rows) from Gram–Schmidt on Gaussian vectors.
pub fn random_rotation(dim: usize, r: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| r.sample(StandardNormal)).collect();
        for q in &rows {
            let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-6 {
            rows.push(v.into_iter().map(|a| a / n).collect());
        }
    }
    rows
}

pub fn rigid_motion(cloud: &PointCloud<f64>, rotation: &[Vec<f64>], shift: &[f64]) -> PointCloud<f64> {
    cloud
        .map_points(|p| {
            rotation
                .iter()
                .zip(shift)
                .map(|(row, s)| row.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() + s)
                .collect()
        })
        .unwrap()
}

/// Indices in the closed ball by exhaustive scan, compared in squared
/// distance like the index does.
pub fn brute_force_within(index: &SpatialIndex<f64>, center: &[f64], radius: f64) -> Vec<usize> {
    let cloud = index.cloud();
    (0..cloud.len())
        .filter(|&i| {
            let d2: f64 = cloud.point(i).iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
            d2 <= radius * radius
        })
        .collect()
}

/// Leading eigenvector by plain power iteration, run until the Rayleigh
/// residual stalls.
pub fn power_iteration(m: &[Vec<f64>], r: &mut ChaCha8Rng) -> Vec<f64> {
    let n = m.len();
    let mut v: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |a, b| a.max(b.abs()))
        .max(f64::MIN_POSITIVE);
    normalize(&mut v);
    for _ in 0..200_000 {
        let mut w: Vec<f64> = m
            .iter()
            .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        let lambda: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= 1e-14 * scale {
            break;
        }
        normalize(&mut w);
        v = w;
    }
    v
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= n);
}

/// Angle between two unit vectors, ignoring sign.
pub fn axis_angle(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let s = if d < 0.0 { -1.0 } else { 1.0 };
    let chord = a.iter().zip(b).map(|(x, y)| (x - s * y).powi(2)).sum::<f64>().sqrt();
    2.0 * (0.5 * chord).min(1.0).asin()
}

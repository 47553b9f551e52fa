//! Seeded demonstration manifolds with their generating parameters kept, and
//! a loader for delimited text tables.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{PapaError, Result};
use crate::io::join_floats;
use crate::scalar::Real;
use crate::types::{validate_cloud, PointCloud};

/// Zigzag vertex spacing: segments of unit length at right angles.
const ZIGZAG_STEP: f64 = std::f64::consts::FRAC_1_SQRT_2;
pub const ZIGZAG_SEGMENTS: usize = 4;

pub const BOOMERANG_RADIUS: f64 = 1.0;
pub const BOOMERANG_SPAN_DEGREES: f64 = 150.0;
pub const BOOMERANG_SEPARATION: f64 = 2.5;

pub const SWISS_ROLL_T_RANGE: (f64, f64) = (1.5 * PI, 4.5 * PI);
pub const SWISS_ROLL_WIDTH: f64 = 10.0;
pub const DEFAULT_SWISS_ROLL_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DatasetKind {
    Zigzag,
    Boomerang,
    SwissRoll { scale: f64 },
}

impl DatasetKind {
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            DatasetKind::Zigzag => &["s"],
            DatasetKind::Boomerang => &["component", "angle"],
            DatasetKind::SwissRoll { .. } => &["t", "y"],
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            DatasetKind::SwissRoll { .. } => 3,
            _ => 2,
        }
    }

    /// Noise-free point for the given generating parameters.
    pub fn point_from_params(&self, params: &[f64]) -> Vec<f64> {
        match *self {
            DatasetKind::Zigzag => zigzag_point(params[0]),
            DatasetKind::Boomerang => {
                let (center, _) = boomerang_arc(params[0] as usize);
                vec![
                    center + BOOMERANG_RADIUS * params[1].cos(),
                    BOOMERANG_RADIUS * params[1].sin(),
                ]
            }
            DatasetKind::SwissRoll { scale } => {
                let (t, y) = (params[0], params[1]);
                vec![scale * t * t.cos(), scale * y, scale * t * t.sin()]
            }
        }
    }

    fn sample_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            DatasetKind::Zigzag => vec![rng.random_range(0.0..=ZIGZAG_SEGMENTS as f64)],
            DatasetKind::Boomerang => {
                let component = rng.random_range(0..2usize);
                let (_, (lo, hi)) = boomerang_arc(component);
                vec![component as f64, rng.random_range(lo..=hi)]
            }
            DatasetKind::SwissRoll { .. } => {
                let (lo, hi) = SWISS_ROLL_T_RANGE;
                vec![rng.random_range(lo..=hi), rng.random_range(0.0..=SWISS_ROLL_WIDTH)]
            }
        }
    }

    /// Ground-truth curve for the planar generators.
    pub fn curve(&self) -> Option<CurveModel> {
        match self {
            DatasetKind::Zigzag => Some(CurveModel::zigzag()),
            DatasetKind::Boomerang => Some(CurveModel::boomerang()),
            DatasetKind::SwissRoll { .. } => None,
        }
    }
}

fn zigzag_vertex(i: usize) -> [f64; 2] {
    [i as f64 * ZIGZAG_STEP, (i % 2) as f64 * ZIGZAG_STEP]
}

fn zigzag_point(s: f64) -> Vec<f64> {
    let segment = (s.floor() as usize).min(ZIGZAG_SEGMENTS - 1);
    let u = s - segment as f64;
    let (a, b) = (zigzag_vertex(segment), zigzag_vertex(segment + 1));
    vec![a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]
}

/// Center x-coordinate and angular range (radians) of a boomerang arc.
fn boomerang_arc(component: usize) -> (f64, (f64, f64)) {
    let half = BOOMERANG_SPAN_DEGREES.to_radians() / 2.0;
    if component == 0 {
        (0.0, (-half, half))
    } else {
        (BOOMERANG_SEPARATION, (PI - half, PI + half))
    }
}

/// One generated point with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample<T> {
    pub point: Vec<T>,
    pub params: Vec<T>,
    pub noise_sigma: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub kind: DatasetKind,
    pub cloud: PointCloud<T>,
    pub samples: Vec<LabeledSample<T>>,
}

impl<T: Real> Dataset<T> {
    /// Column `k` of the generating parameters.
    pub fn param(&self, k: usize) -> Vec<T> {
        self.samples.iter().map(|s| s.params[k]).collect()
    }

    pub fn write_params_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.kind.param_names().join(","))?;
        for s in &self.samples {
            writeln!(out, "{}", join_floats(&s.params, ','))?;
        }
        Ok(())
    }
}

fn generate<T: Real>(kind: DatasetKind, n: usize, noise_sigma: f64, seed: u64) -> Result<Dataset<T>> {
    if n == 0 {
        return Err(PapaError::invalid("n", "need at least one point"));
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(PapaError::invalid(
            "noise_sigma",
            format!("must be a non-negative number, got {noise_sigma}"),
        ));
    }
    if let DatasetKind::SwissRoll { scale } = kind {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(PapaError::invalid("scale", format!("must be positive, got {scale}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| PapaError::invalid("noise_sigma", e.to_string()))?;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let params = kind.sample_params(&mut rng);
        let mut point = kind.point_from_params(&params);
        if noise_sigma > 0.0 {
            point.iter_mut().for_each(|x| *x += noise.sample(&mut rng));
        }
        samples.push(LabeledSample {
            point: point.into_iter().map(T::lit).collect(),
            params: params.into_iter().map(T::lit).collect(),
            noise_sigma: T::lit(noise_sigma),
        });
    }
    let rows: Vec<Vec<T>> = samples.iter().map(|s| s.point.clone()).collect();
    Ok(Dataset {
        kind,
        cloud: validate_cloud(&rows)?,
        samples,
    })
}

/// Uniform samples along a four-segment right-angled zigzag of unit segments,
/// parameter `s` = arc length in `[0, 4]`.
pub fn gen_zigzag<T: Real>(n: usize, noise_sigma: f64, seed: u64) -> Result<Dataset<T>> {
    generate(DatasetKind::Zigzag, n, noise_sigma, seed)
}

/// Two unit-radius 150° arcs whose convex sides face each other, centers
/// 2.5 apart; parameters `(component, angle)`.
pub fn gen_boomerang<T: Real>(n: usize, noise_sigma: f64, seed: u64) -> Result<Dataset<T>> {
    generate(DatasetKind::Boomerang, n, noise_sigma, seed)
}

/// `scale·(t cos t, y, t sin t)` with `t ~ U[1.5π, 4.5π]`, `y ~ U[0, 10]`.
/// Noise is added after scaling.
pub fn gen_swiss_roll<T: Real>(n: usize, noise_sigma: f64, scale: f64, seed: u64) -> Result<Dataset<T>> {
    generate(DatasetKind::SwissRoll { scale }, n, noise_sigma, seed)
}

/// Noise-free generating curve of a planar dataset: a union of polylines and
/// circular arcs, each with two endpoints.
#[derive(Debug, Clone, PartialEq)]
pub enum CurvePiece {
    Segment {
        a: [f64; 2],
        b: [f64; 2],
    },
    Arc {
        center: [f64; 2],
        radius: f64,
        from: f64,
        to: f64,
    },
}

impl CurvePiece {
    fn distance(&self, p: &[f64]) -> f64 {
        match *self {
            CurvePiece::Segment { a, b } => {
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let u = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
                (p[0] - a[0] - u * dx).hypot(p[1] - a[1] - u * dy)
            }
            CurvePiece::Arc {
                center,
                radius,
                from,
                to,
            } => {
                let (rx, ry) = (p[0] - center[0], p[1] - center[1]);
                let mid = 0.5 * (from + to);
                let angle = mid + wrap(ry.atan2(rx) - mid);
                if (from..=to).contains(&angle) {
                    (rx.hypot(ry) - radius).abs()
                } else {
                    let e0 = [center[0] + radius * from.cos(), center[1] + radius * from.sin()];
                    let e1 = [center[0] + radius * to.cos(), center[1] + radius * to.sin()];
                    (p[0] - e0[0])
                        .hypot(p[1] - e0[1])
                        .min((p[0] - e1[0]).hypot(p[1] - e1[1]))
                }
            }
        }
    }
}

fn wrap(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    (a + PI).rem_euclid(two_pi) - PI
}

/// An open end of the curve with its outward unit tangent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveEnd {
    pub point: [f64; 2],
    pub outward: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveModel {
    pub pieces: Vec<CurvePiece>,
    pub ends: Vec<CurveEnd>,
}

impl CurveModel {
    pub fn zigzag() -> Self {
        let pieces = (0..ZIGZAG_SEGMENTS)
            .map(|i| CurvePiece::Segment {
                a: zigzag_vertex(i),
                b: zigzag_vertex(i + 1),
            })
            .collect();
        let unit = |a: [f64; 2], b: [f64; 2]| {
            let l = (b[0] - a[0]).hypot(b[1] - a[1]);
            [(b[0] - a[0]) / l, (b[1] - a[1]) / l]
        };
        let last = ZIGZAG_SEGMENTS;
        CurveModel {
            pieces,
            ends: vec![
                CurveEnd {
                    point: zigzag_vertex(0),
                    outward: unit(zigzag_vertex(1), zigzag_vertex(0)),
                },
                CurveEnd {
                    point: zigzag_vertex(last),
                    outward: unit(zigzag_vertex(last - 1), zigzag_vertex(last)),
                },
            ],
        }
    }

    pub fn boomerang() -> Self {
        let mut pieces = Vec::new();
        let mut ends = Vec::new();
        for component in 0..2 {
            let (cx, (from, to)) = boomerang_arc(component);
            let r = BOOMERANG_RADIUS;
            pieces.push(CurvePiece::Arc {
                center: [cx, 0.0],
                radius: r,
                from,
                to,
            });
            // outward tangents point along decreasing angle at `from`, increasing at `to`
            ends.push(CurveEnd {
                point: [cx + r * from.cos(), r * from.sin()],
                outward: [from.sin(), -from.cos()],
            });
            ends.push(CurveEnd {
                point: [cx + r * to.cos(), r * to.sin()],
                outward: [-to.sin(), to.cos()],
            });
        }
        CurveModel { pieces, ends }
    }

    /// Euclidean distance from `p` to the curve.
    pub fn distance<T: Real>(&self, p: &[T]) -> f64 {
        let q = [p[0].as_f64(), p[1].as_f64()];
        self.pieces.iter().map(|c| c.distance(&q)).fold(f64::INFINITY, f64::min)
    }

    /// True when `p` lies past end `k` (positive along its outward tangent)
    /// and within `reach` of it.
    pub fn is_beyond_end<T: Real>(&self, p: &[T], k: usize, reach: f64) -> bool {
        let end = &self.ends[k];
        let (dx, dy) = (p[0].as_f64() - end.point[0], p[1].as_f64() - end.point[1]);
        dx * end.outward[0] + dy * end.outward[1] > 0.0 && dx.hypot(dy) <= reach
    }
}

/// Reads a delimited numeric table. Blank lines are skipped; when
/// `label_column` is set that column is kept verbatim as a label and the rest
/// become coordinates.
pub fn load_delimited<T: Real>(
    path: &Path,
    delimiter: char,
    has_header: bool,
    label_column: Option<usize>,
) -> Result<PointCloud<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| PapaError::io(path, e))?;
    parse_delimited(&text, delimiter, has_header, label_column)
}

pub fn parse_delimited<T: Real>(
    text: &str,
    delimiter: char,
    has_header: bool,
    label_column: Option<usize>,
) -> Result<PointCloud<T>> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut header_pending = has_header;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let mut row = Vec::new();
        for (column, field) in line.split(delimiter).enumerate() {
            let field = field.trim();
            if Some(column) == label_column {
                labels.push(field.to_string());
                continue;
            }
            let value: f64 = field.parse().map_err(|_| PapaError::Parse {
                line: line_no + 1,
                column: column + 1,
                token: field.to_string(),
            })?;
            row.push(T::lit(value));
        }
        if let Some(c) = label_column {
            if labels.len() != rows.len() + 1 {
                return Err(PapaError::Parse {
                    line: line_no + 1,
                    column: c + 1,
                    token: String::new(),
                });
            }
        }
        rows.push(row);
    }
    let cloud = validate_cloud(&rows)?;
    if label_column.is_some() {
        cloud.with_labels(labels)
    } else {
        Ok(cloud)
    }
}

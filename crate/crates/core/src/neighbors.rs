//! Exact fixed-radius neighbor search and the point-to-point distance
//! histogram used to pick the neighborhood radius.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

use crate::error::{PapaError, Result};
use crate::linalg::{dist, dist2};
use crate::scalar::Real;
use crate::types::PointCloud;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    pub index: usize,
    pub distance: T,
}

#[derive(Debug, Clone)]
struct Node<T> {
    start: usize,
    end: usize,
    lo: Vec<T>,
    hi: Vec<T>,
    children: Option<(usize, usize)>,
}

/// kd-tree over a [`PointCloud`]. Immutable after construction and `Sync`, so
/// concurrent queries need no locking.
#[derive(Debug, Clone)]
pub struct SpatialIndex<T> {
    cloud: PointCloud<T>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

/// Builds the index over a copy of `cloud`.
pub fn build_index<T: Real>(cloud: &PointCloud<T>) -> SpatialIndex<T> {
    SpatialIndex::new(cloud.clone())
}

impl<T: Real> SpatialIndex<T> {
    pub fn new(cloud: PointCloud<T>) -> Self {
        let mut index = SpatialIndex {
            order: (0..cloud.len()).collect(),
            nodes: Vec::new(),
            cloud,
        };
        index.build_node(0, index.order.len());
        index
    }

    pub fn cloud(&self) -> &PointCloud<T> {
        &self.cloud
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let dim = self.cloud.dim();
        let mut lo = vec![T::infinity(); dim];
        let mut hi = vec![T::neg_infinity(); dim];
        for &i in &self.order[start..end] {
            for (k, &x) in self.cloud.point(i).iter().enumerate() {
                lo[k] = lo[k].min(x);
                hi[k] = hi[k].max(x);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            start,
            end,
            lo: lo.clone(),
            hi: hi.clone(),
            children: None,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let axis = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap())
            .unwrap_or(0);
        if hi[axis] <= lo[axis] {
            // all points coincide
            return id;
        }
        let mid = start + (end - start) / 2;
        let cloud = &self.cloud;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            cloud.point(a)[axis]
                .partial_cmp(&cloud.point(b)[axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id].children = Some((left, right));
        id
    }

    fn box_dist2(node: &Node<T>, center: &[T]) -> T {
        let mut acc = T::zero();
        for ((&c, &lo), &hi) in center.iter().zip(&node.lo).zip(&node.hi) {
            let d = if c < lo {
                lo - c
            } else if c > hi {
                c - hi
            } else {
                T::zero()
            };
            acc += d * d;
        }
        acc
    }

    /// Calls `visit(index, squared_distance)` for every point in the closed
    /// ball, in tree order. Validation is left to the caller.
    pub(crate) fn for_each_within(&self, center: &[T], radius: T, mut visit: impl FnMut(usize, T)) {
        let r2 = radius * radius;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if Self::box_dist2(node, center) > r2 {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => {
                    for &i in &self.order[node.start..node.end] {
                        let d2 = dist2(self.cloud.point(i), center);
                        if d2 <= r2 {
                            visit(i, d2);
                        }
                    }
                }
            }
        }
    }

    /// All points within Euclidean distance `radius` of `center` (closed ball),
    /// ordered by ascending distance with ties broken by index.
    pub fn radius_query(&self, center: &[T], radius: T) -> Result<Vec<Neighbor<T>>> {
        if !(radius > T::zero()) {
            return Err(PapaError::invalid("radius", format!("must be positive, got {radius}")));
        }
        if center.len() != self.dim() {
            return Err(PapaError::DimensionMismatch {
                expected: self.dim(),
                found: center.len(),
            });
        }
        let mut hits: Vec<(T, usize)> = Vec::new();
        self.for_each_within(center, radius, |i, d2| hits.push((d2, i)));
        hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        Ok(hits
            .into_iter()
            .map(|(d2, index)| Neighbor {
                index,
                distance: d2.sqrt(),
            })
            .collect())
    }
}

/// Histogram of distances from one or more origin datapoints to every other
/// datapoint. Bins are right-closed: `[0, w]`, `(w, 2w]`, …
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceHistogram<T> {
    pub bin_edges: Vec<T>,
    pub counts: Vec<u64>,
    pub origins: Vec<usize>,
}

impl<T: Real> DistanceHistogram<T> {
    pub fn bin_width(&self) -> T {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Writes `bin_left_edge,count` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_left_edge,count")?;
        for (edge, count) in self.bin_edges.iter().zip(&self.counts) {
            writeln!(out, "{},{}", crate::io::fmt_float(*edge), count)?;
        }
        Ok(())
    }
}

/// Number of bins whose right-closed edges cover `[0, max]`.
fn bin_count<T: Real>(max: T, width: T) -> usize {
    let ratio = (max / width).as_f64();
    ((ratio - 1e-9 * ratio.max(1.0)).ceil() as usize).max(1)
}

fn bin_of<T: Real>(d: T, width: T, bins: usize) -> usize {
    let idx = (d / width).ceil().as_f64() as usize;
    idx.saturating_sub(1).min(bins - 1)
}

/// Default bin width: the largest distance over fifty bins.
pub const DEFAULT_BIN_DIVISIONS: usize = 50;

/// Histogram of the distances from `origin_index` to the other `N − 1` points.
pub fn distance_histogram<T: Real>(
    cloud: &PointCloud<T>,
    origin_index: usize,
    bin_width: Option<T>,
) -> Result<DistanceHistogram<T>> {
    distance_histogram_multi(cloud, &[origin_index], bin_width)
}

/// Sum of the single-origin histograms of every origin in `origins`, on a
/// shared binning. `bin_width = None` uses `max distance / 50`.
pub fn distance_histogram_multi<T: Real>(
    cloud: &PointCloud<T>,
    origins: &[usize],
    bin_width: Option<T>,
) -> Result<DistanceHistogram<T>> {
    if origins.is_empty() {
        return Err(PapaError::invalid("origins", "need at least one origin"));
    }
    if let Some(&bad) = origins.iter().find(|&&o| o >= cloud.len()) {
        return Err(PapaError::IndexOutOfRange {
            index: bad,
            len: cloud.len(),
        });
    }
    if let Some(w) = bin_width {
        if !(w > T::zero()) || !w.is_finite() {
            return Err(PapaError::invalid("bin_width", format!("must be positive, got {w}")));
        }
    }
    if cloud.len() < 2 {
        return Err(PapaError::NoDistances);
    }
    let distances: Vec<T> = origins
        .iter()
        .flat_map(|&o| {
            let origin = cloud.point(o);
            cloud
                .points()
                .enumerate()
                .filter(move |(j, _)| *j != o)
                .map(move |(_, p)| dist(origin, p))
        })
        .collect();
    let max = distances.iter().fold(T::zero(), |m, &d| m.max(d));
    let width = match bin_width {
        Some(w) => w,
        None if max > T::zero() => max / T::from_count(DEFAULT_BIN_DIVISIONS),
        None => T::one(),
    };
    let bins = bin_count(max, width);
    let mut counts = vec![0u64; bins];
    for &d in &distances {
        counts[bin_of(d, width, bins)] += 1;
    }
    let bin_edges = (0..=bins).map(|k| T::from_count(k) * width).collect();
    Ok(DistanceHistogram {
        bin_edges,
        counts,
        origins: origins.to_vec(),
    })
}

/// Histogram of arbitrary finite values on bins starting at their minimum,
/// right-closed like [`distance_histogram`]. `origins` is left empty.
pub fn value_histogram<T: Real>(values: &[T], bin_width: Option<T>) -> Result<DistanceHistogram<T>> {
    if values.is_empty() {
        return Err(PapaError::EmptyHistogram);
    }
    if let Some(w) = bin_width {
        if !(w > T::zero()) || !w.is_finite() {
            return Err(PapaError::invalid("bin_width", format!("must be positive, got {w}")));
        }
    }
    let lo = values.iter().fold(T::infinity(), |m, &v| m.min(v));
    let hi = values.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    if !lo.is_finite() || !hi.is_finite() {
        return Err(PapaError::invalid("values", "must be finite"));
    }
    let span = hi - lo;
    let width = match bin_width {
        Some(w) => w,
        None if span > T::zero() => span / T::from_count(DEFAULT_BIN_DIVISIONS),
        None => T::one(),
    };
    let bins = bin_count(span, width);
    let mut counts = vec![0u64; bins];
    for &v in values {
        counts[bin_of(v - lo, width, bins)] += 1;
    }
    Ok(DistanceHistogram {
        bin_edges: (0..=bins).map(|k| lo + T::from_count(k) * width).collect(),
        counts,
        origins: Vec::new(),
    })
}

/// `k` distinct origin indices drawn from `0..n` (all of them when `k ≥ n`),
/// returned in ascending order.
pub fn sample_origins(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut picked = if k >= n {
        (0..n).collect()
    } else {
        sample(rng, n, k).into_vec()
    };
    picked.sort_unstable();
    picked
}

/// Thresholds for the "growth stalls, then jumps" rule of [`estimate_radius`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusHeuristic {
    /// Jump must exceed this many Poisson standard deviations of the
    /// difference of the two bins involved.
    pub jump_sigmas: f64,
    /// Jump must exceed this multiple of the mean absolute bin-to-bin change
    /// seen so far.
    pub jump_ratio: f64,
    /// Nonempty bins required before a jump is considered.
    pub warmup_bins: usize,
}

impl Default for RadiusHeuristic {
    fn default() -> Self {
        RadiusHeuristic {
            jump_sigmas: 3.0,
            jump_ratio: 3.0,
            warmup_bins: 2,
        }
    }
}

/// Picks the neighborhood radius from a distance histogram.
///
/// In order of precedence:
/// 1. a gap: the first empty bin that follows a nonempty bin and is itself
///    followed by a nonempty bin; returns the gap's left edge;
/// 2. a jump: the first bin boundary where the count rises sharply after a
///    stretch of steady growth (another fold or cluster entering the ball);
///    returns the left edge of the bin just before the rise;
/// 3. the median distance.
pub fn estimate_radius<T: Real>(hist: &DistanceHistogram<T>) -> Result<T> {
    estimate_radius_with(hist, &RadiusHeuristic::default())
}

pub fn estimate_radius_with<T: Real>(hist: &DistanceHistogram<T>, rule: &RadiusHeuristic) -> Result<T> {
    let counts = &hist.counts;
    let first = counts.iter().position(|&c| c > 0).ok_or(PapaError::EmptyHistogram)?;
    let last = counts.iter().rposition(|&c| c > 0).unwrap();

    if let Some(gap) = (first + 1..last).find(|&i| counts[i] == 0) {
        return Ok(hist.bin_edges[gap]);
    }

    let c: Vec<f64> = counts.iter().map(|&x| x as f64).collect();
    let mut abs_change = 0.0;
    for j in (first + 1)..last {
        abs_change += (c[j] - c[j - 1]).abs();
        if j - first < rule.warmup_bins {
            continue;
        }
        let rise = c[j + 1] - c[j];
        let mean_change = abs_change / (j - first) as f64;
        if rise > rule.jump_sigmas * (c[j] + c[j + 1]).sqrt() && rise > rule.jump_ratio * mean_change {
            return Ok(hist.bin_edges[j]);
        }
    }

    Ok(histogram_median(hist))
}

/// Median distance, linearly interpolated inside the bin holding it.
pub fn histogram_median<T: Real>(hist: &DistanceHistogram<T>) -> T {
    let half = hist.total() as f64 / 2.0;
    let mut cum = 0.0;
    for (i, &count) in hist.counts.iter().enumerate() {
        let next = cum + count as f64;
        if next >= half && count > 0 {
            let frac = T::lit((half - cum) / count as f64);
            return hist.bin_edges[i] + frac * hist.bin_width();
        }
        cum = next;
    }
    *hist.bin_edges.last().unwrap()
}

//! Data model shared by every stage: the point cloud, neighborhood policy,
//! local frame estimates, traced curves, base spaces and projections.

use serde::{Deserialize, Serialize};

use crate::error::{PapaError, Result};
use crate::linalg::{canonical_sign, dot, norm, normalized, orthogonal_complement, sub};
use crate::scalar::Real;

/// `N` points in `D` ambient dimensions. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    data: Vec<T>,
    len: usize,
    dim: usize,
    labels: Option<Vec<String>>,
}

/// Validates a raw numeric table and turns it into a [`PointCloud`].
///
/// Rejects empty tables, zero-width rows, ragged rows and non-finite values;
/// errors carry the offending row/column.
pub fn validate_cloud<T: Real>(rows: &[Vec<T>]) -> Result<PointCloud<T>> {
    let first = rows.first().ok_or(PapaError::EmptyCloud)?;
    let dim = first.len();
    if dim == 0 {
        return Err(PapaError::ZeroDimension);
    }
    let mut data = Vec::with_capacity(rows.len() * dim);
    for (row, values) in rows.iter().enumerate() {
        if values.len() != dim {
            return Err(PapaError::RaggedRow {
                row,
                expected: dim,
                found: values.len(),
            });
        }
        if let Some(column) = values.iter().position(|v| !v.is_finite()) {
            return Err(PapaError::NonFinite { row, column });
        }
        data.extend_from_slice(values);
    }
    Ok(PointCloud {
        data,
        len: rows.len(),
        dim,
        labels: None,
    })
}

impl<T: Real> PointCloud<T> {
    /// Builds a cloud from a flat row-major buffer.
    pub fn from_flat(data: Vec<T>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(PapaError::ZeroDimension);
        }
        if data.is_empty() {
            return Err(PapaError::EmptyCloud);
        }
        if data.len() % dim != 0 {
            return Err(PapaError::RaggedRow {
                row: data.len() / dim,
                expected: dim,
                found: data.len() % dim,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(PapaError::NonFinite {
                row: pos / dim,
                column: pos % dim,
            });
        }
        let len = data.len() / dim;
        Ok(PointCloud {
            data,
            len,
            dim,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len {
            return Err(PapaError::DimensionMismatch {
                expected: self.len,
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.points().map(<[T]>::to_vec).collect()
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Sub-cloud with the given rows, in the given order. Labels follow.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.len {
                return Err(PapaError::IndexOutOfRange {
                    index: i,
                    len: self.len,
                });
            }
            data.extend_from_slice(self.point(i));
        }
        let mut out = PointCloud::from_flat(data, self.dim)?;
        if let Some(labels) = &self.labels {
            out.labels = Some(indices.iter().map(|&i| labels[i].clone()).collect());
        }
        Ok(out)
    }

    /// Applies `f` to every point, keeping labels.
    pub fn map_points(&self, mut f: impl FnMut(&[T]) -> Vec<T>) -> Result<Self> {
        let rows: Vec<Vec<T>> = self.points().map(&mut f).collect();
        let mut out = validate_cloud(&rows)?;
        out.labels = self.labels.clone();
        Ok(out)
    }
}

/// Neighborhood policy for every local estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodSpec<T> {
    pub radius: T,
    pub min_neighbors: usize,
    pub max_neighbors: Option<usize>,
}

impl<T: Real> NeighborhoodSpec<T> {
    pub fn new(radius: T, min_neighbors: usize, max_neighbors: Option<usize>) -> Result<Self> {
        let spec = NeighborhoodSpec {
            radius,
            min_neighbors,
            max_neighbors,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Radius-only policy with the smallest admissible support (2 points).
    pub fn with_radius(radius: T) -> Result<Self> {
        Self::new(radius, 2, None)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > T::zero()) || !self.radius.is_finite() {
            return Err(PapaError::invalid(
                "radius",
                format!("must be positive and finite, got {}", self.radius),
            ));
        }
        if self.min_neighbors < 2 {
            return Err(PapaError::invalid(
                "min_neighbors",
                "a direction needs at least 2 points",
            ));
        }
        if let Some(cap) = self.max_neighbors {
            if cap < self.min_neighbors {
                return Err(PapaError::invalid("max_neighbors", "must be at least min_neighbors"));
            }
        }
        Ok(())
    }
}

/// First local principal direction at a query position.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEstimate<T> {
    pub origin: Vec<T>,
    pub direction: Vec<T>,
    /// Local covariance eigenvalues, non-increasing, clamped at zero.
    pub spectrum: Vec<T>,
    pub support: usize,
}

impl<T: Real> FrameEstimate<T> {
    /// `(λ₁ − λ₂) / λ₁`; one for a single-axis spectrum, zero for a null one.
    pub fn relative_gap(&self) -> T {
        relative_gap(&self.spectrum)
    }

    /// `λ₁ / λ₂`, infinite when `λ₂ = 0` (or `D = 1`).
    pub fn anisotropy(&self) -> T {
        match (self.spectrum.first(), self.spectrum.get(1)) {
            (Some(&l1), Some(&l2)) if l2 > T::zero() => l1 / l2,
            _ => T::infinity(),
        }
    }

    pub fn is_tied(&self, tie_threshold: T) -> bool {
        self.relative_gap() < tie_threshold
    }

    pub fn check_invariants(&self, spec: &NeighborhoodSpec<T>) -> Result<()> {
        let n = norm(&self.direction);
        if (n - T::one()).abs() > T::lit(1e-9) {
            return Err(PapaError::invalid("direction", format!("norm {n} is not 1")));
        }
        if self.spectrum.windows(2).any(|w| w[0] < w[1]) {
            return Err(PapaError::invalid("spectrum", "not sorted non-increasing"));
        }
        if self.spectrum.iter().any(|&l| l < T::zero()) {
            return Err(PapaError::invalid("spectrum", "negative eigenvalue"));
        }
        if self.support < spec.min_neighbors {
            return Err(PapaError::LostSupport {
                found: self.support,
                required: spec.min_neighbors,
            });
        }
        Ok(())
    }
}

pub(crate) fn relative_gap<T: Real>(spectrum: &[T]) -> T {
    match (spectrum.first(), spectrum.get(1)) {
        (Some(&l1), _) if l1 <= T::zero() => T::zero(),
        (Some(&l1), Some(&l2)) => (l1 - l2) / l1,
        _ => T::one(),
    }
}

/// Why one end of a trace stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxSteps,
    LostSupport,
    Isotropic,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::MaxSteps => "max_steps",
            Termination::LostSupport => "lost_support",
            Termination::Isotropic => "isotropic",
        }
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceState<T> {
    pub position: Vec<T>,
    /// Unit frame direction, oriented along increasing arc length.
    pub direction: Vec<T>,
    pub arc_length: T,
}

/// A bidirectionally integrated autoparallel: backward states (reversed),
/// the seed, then forward states.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoparallelTrace<T> {
    pub states: Vec<TraceState<T>>,
    /// Position of the seed state inside `states`.
    pub seed_offset: usize,
    pub seed_index: Option<usize>,
    pub step: T,
    pub backward: Termination,
    pub forward: Termination,
}

impl<T: Real> AutoparallelTrace<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn seed_state(&self) -> &TraceState<T> {
        &self.states[self.seed_offset]
    }

    pub fn forward_states(&self) -> &[TraceState<T>] {
        &self.states[self.seed_offset + 1..]
    }

    pub fn backward_states(&self) -> &[TraceState<T>] {
        &self.states[..self.seed_offset]
    }

    pub fn positions(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.states.iter().map(|s| s.position.as_slice())
    }

    /// Checks step exactness, arc-length bookkeeping and sign continuity.
    pub fn check_invariants(&self, tol: T) -> Result<()> {
        if self.seed_state().arc_length != T::zero() {
            return Err(PapaError::invalid("arc_length", "seed state must sit at arc length 0"));
        }
        for (k, pair) in self.states.windows(2).enumerate() {
            let step = norm(&sub(&pair[1].position, &pair[0].position));
            if (step - self.step).abs() > tol {
                return Err(PapaError::invalid("states", format!("step {k} has length {step}")));
            }
            let darc = pair[1].arc_length - pair[0].arc_length;
            if (darc - self.step).abs() > tol {
                return Err(PapaError::invalid(
                    "states",
                    format!("arc increment {darc} at step {k}"),
                ));
            }
            if dot(&pair[0].direction, &pair[1].direction) < T::zero() {
                return Err(PapaError::invalid("states", format!("direction flips at step {k}")));
            }
        }
        Ok(())
    }
}

/// Affine hyperplane `{x : (x − anchor)·normal = 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSpace<T> {
    pub anchor: Vec<T>,
    pub normal: Vec<T>,
}

impl<T: Real> BaseSpace<T> {
    /// Normalizes `normal`; rejects zero normals and mismatched dimensions.
    pub fn new(anchor: Vec<T>, normal: Vec<T>) -> Result<Self> {
        if anchor.len() != normal.len() {
            return Err(PapaError::DimensionMismatch {
                expected: anchor.len(),
                found: normal.len(),
            });
        }
        let normal = normalized(&normal).ok_or_else(|| PapaError::invalid("normal", "zero vector"))?;
        Ok(BaseSpace { anchor, normal })
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    /// Signed offset of `x` along the normal.
    pub fn offset(&self, x: &[T]) -> T {
        dot(&sub(x, &self.anchor), &self.normal)
    }

    /// The normal with its sign fixed so the first non-negligible component is
    /// positive; identical for `normal` and `-normal`.
    pub fn canonical_normal(&self) -> Vec<T> {
        let mut n = self.normal.clone();
        canonical_sign(&mut n);
        n
    }

    pub fn chart(&self) -> BaseChart<T> {
        BaseChart {
            anchor: self.anchor.clone(),
            basis: orthogonal_complement(&self.normal),
        }
    }
}

/// Orthonormal `(D−1)`-dimensional coordinates on a base space.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseChart<T> {
    pub anchor: Vec<T>,
    pub basis: Vec<Vec<T>>,
}

impl<T: Real> BaseChart<T> {
    pub fn to_chart(&self, x: &[T]) -> Vec<T> {
        let rel = sub(x, &self.anchor);
        self.basis.iter().map(|b| dot(&rel, b)).collect()
    }

    pub fn from_chart(&self, coords: &[T]) -> Vec<T> {
        let mut x = self.anchor.clone();
        for (c, b) in coords.iter().zip(&self.basis) {
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi += *c * *bi;
            }
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberProjection<T> {
    pub point_index: usize,
    pub intersection: Vec<T>,
    /// Arc length along the fiber from the datapoint to its crossing.
    pub signed_distance: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    RequestedLevelsReached,
    IsotropicData,
    InsufficientSupport,
    /// The residual is a curve; no second direction is left to peel off.
    OneDimensionalResidual,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::RequestedLevelsReached => "requested_levels_reached",
            StopReason::IsotropicData => "isotropic_data",
            StopReason::InsufficientSupport => "insufficient_support",
            StopReason::OneDimensionalResidual => "one_dimensional_residual",
        }
    }
}

/// One peeled-off direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PapaLevel<T> {
    pub base_space: BaseSpace<T>,
    pub radius: T,
    /// Original (level-0) indices of the points carried by this level.
    pub point_indices: Vec<usize>,
    /// Signed fiber coordinate per entry of `point_indices`.
    pub coordinates: Vec<T>,
    /// Intersections in the base-space chart; one row per entry of `point_indices`.
    pub residual: PointCloud<T>,
    /// Original indices that entered this level but found no crossing.
    pub failures: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PapaModel<T> {
    pub levels: Vec<PapaLevel<T>>,
    pub stop_reason: StopReason,
}

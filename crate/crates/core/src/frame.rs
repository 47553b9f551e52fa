//! Local PCA: the first frame vector at an arbitrary query position is the
//! dominant eigenvector of the sample covariance of its radius neighborhood.

use crate::error::{PapaError, Result};
use crate::linalg::{align_with, canonical_sign, symmetric_eigen, SquareMatrix};
use crate::neighbors::SpatialIndex;
use crate::scalar::Real;
use crate::types::{FrameEstimate, NeighborhoodSpec};

/// Relative eigen-gap `(λ₁ − λ₂)/λ₁` below which the first direction counts
/// as tied.
pub const DEFAULT_TIE_THRESHOLD: f64 = 0.05;

/// Absolute floor (scaled by `max(1, λ₁)`) below which a negative eigenvalue
/// is treated as round-off and clamped to zero.
const PSD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalCovariance<T> {
    pub mean: Vec<T>,
    pub covariance: SquareMatrix<T>,
    pub support: usize,
}

/// Sample mean and covariance (divisor `n − 1`) of a set of points.
pub fn sample_covariance<'a, T: Real>(
    points: impl Iterator<Item = &'a [T]> + Clone,
    dim: usize,
) -> (Vec<T>, SquareMatrix<T>, usize) {
    let mut mean = vec![T::zero(); dim];
    let mut n = 0usize;
    for p in points.clone() {
        for (m, &x) in mean.iter_mut().zip(p) {
            *m += x;
        }
        n += 1;
    }
    let mut cov = SquareMatrix::zeros(dim);
    if n == 0 {
        return (mean, cov, 0);
    }
    let inv_n = T::one() / T::from_count(n);
    mean.iter_mut().for_each(|m| *m *= inv_n);
    let mut centered = vec![T::zero(); dim];
    for p in points {
        for ((c, &x), &m) in centered.iter_mut().zip(p).zip(&mean) {
            *c = x - m;
        }
        for i in 0..dim {
            for j in i..dim {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    let divisor = if n > 1 { T::from_count(n - 1) } else { T::one() };
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / divisor;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mean, cov, n)
}

/// Mean and covariance of the radius neighborhood of `center`. With
/// `max_neighbors` set only the nearest ones are kept.
pub fn local_covariance<T: Real>(
    index: &SpatialIndex<T>,
    center: &[T],
    spec: &NeighborhoodSpec<T>,
) -> Result<LocalCovariance<T>> {
    spec.validate()?;
    if center.len() != index.dim() {
        return Err(PapaError::DimensionMismatch {
            expected: index.dim(),
            found: center.len(),
        });
    }
    let cloud = index.cloud();
    let (mean, covariance, support) = match spec.max_neighbors {
        Some(cap) => {
            let mut hits = index.radius_query(center, spec.radius)?;
            hits.truncate(cap);
            sample_covariance(hits.iter().map(|h| cloud.point(h.index)), cloud.dim())
        }
        None => shifted_covariance(index, center, spec.radius),
    };
    if support < spec.min_neighbors {
        return Err(PapaError::LostSupport {
            found: support,
            required: spec.min_neighbors,
        });
    }
    Ok(LocalCovariance {
        mean,
        covariance,
        support,
    })
}

/// Single pass over the ball with coordinates taken relative to `center`,
/// which keeps the moment formula well conditioned.
fn shifted_covariance<T: Real>(index: &SpatialIndex<T>, center: &[T], radius: T) -> (Vec<T>, SquareMatrix<T>, usize) {
    let cloud = index.cloud();
    let dim = cloud.dim();
    let mut sum = vec![T::zero(); dim];
    let mut cov = SquareMatrix::zeros(dim);
    let mut rel = vec![T::zero(); dim];
    let mut n = 0usize;
    index.for_each_within(center, radius, |i, _| {
        for ((r, &x), &c) in rel.iter_mut().zip(cloud.point(i)).zip(center) {
            *r = x - c;
        }
        for a in 0..dim {
            sum[a] += rel[a];
            for b in a..dim {
                cov[(a, b)] += rel[a] * rel[b];
            }
        }
        n += 1;
    });
    if n == 0 {
        return (center.to_vec(), cov, 0);
    }
    let count = T::from_count(n);
    let shift: Vec<T> = sum.iter().map(|&s| s / count).collect();
    let divisor = if n > 1 { T::from_count(n - 1) } else { T::one() };
    for a in 0..dim {
        for b in a..dim {
            let v = (cov[(a, b)] - count * shift[a] * shift[b]) / divisor;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let mean = shift.iter().zip(center).map(|(&s, &c)| s + c).collect();
    (mean, cov, n)
}

/// Eigenvalues (non-increasing, clamped at zero) with unit eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalAxes<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

pub fn principal_axes<T: Real>(covariance: &SquareMatrix<T>) -> Result<PrincipalAxes<T>> {
    let scale = covariance.max_abs().max(T::one());
    let asymmetry = covariance.asymmetry();
    if asymmetry > T::epsilon().sqrt() * scale {
        return Err(PapaError::NotSymmetric {
            asymmetry: asymmetry.as_f64(),
        });
    }
    let eig = symmetric_eigen(covariance)?;
    let slack = T::lit(PSD_SLACK) * eig.values.first().copied().unwrap_or(T::zero()).max(T::one());
    let mut values = eig.values;
    for v in values.iter_mut() {
        if *v < -slack {
            return Err(PapaError::NotPositiveSemiDefinite { eigenvalue: v.as_f64() });
        }
        *v = v.max(T::zero());
    }
    Ok(PrincipalAxes {
        values,
        vectors: eig.vectors,
    })
}

/// Unit eigenvector of the largest eigenvalue plus the full spectrum.
///
/// The sign follows `reference` when given, otherwise the first
/// non-negligible component is made positive. Near-ties are not rejected
/// here; callers inspect the spectrum.
pub fn first_principal_direction<T: Real>(
    covariance: &SquareMatrix<T>,
    reference: Option<&[T]>,
) -> Result<(Vec<T>, Vec<T>)> {
    let PrincipalAxes { values, mut vectors } = principal_axes(covariance)?;
    let mut direction = vectors.swap_remove(0);
    orient(&mut direction, reference);
    Ok((direction, values))
}

pub(crate) fn orient<T: Real>(v: &mut [T], reference: Option<&[T]>) {
    match reference {
        Some(r) => align_with(v, r),
        None => canonical_sign(v),
    }
}

/// Local frame estimate at `center`: covariance of the neighborhood followed
/// by its first principal direction.
pub fn frame_at<T: Real>(
    index: &SpatialIndex<T>,
    center: &[T],
    spec: &NeighborhoodSpec<T>,
    reference: Option<&[T]>,
) -> Result<FrameEstimate<T>> {
    let local = local_covariance(index, center, spec)?;
    let (direction, spectrum) = first_principal_direction(&local.covariance, reference)?;
    Ok(FrameEstimate {
        origin: center.to_vec(),
        direction,
        spectrum,
        support: local.support,
    })
}

/// Full local principal axes at `center`, for diagnostics that need more than
/// the first direction.
pub fn local_axes<T: Real>(
    index: &SpatialIndex<T>,
    center: &[T],
    spec: &NeighborhoodSpec<T>,
) -> Result<(PrincipalAxes<T>, usize)> {
    let local = local_covariance(index, center, spec)?;
    Ok((principal_axes(&local.covariance)?, local.support))
}

//! Projection of datapoints along their fibers onto an affine base space.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{PapaError, Result};
use crate::io::{fmt_float, join_floats};
use crate::linalg::{align_with, dist, dot, normalized};
use crate::neighbors::SpatialIndex;
use crate::scalar::Real;
use crate::tracer::{trace_from_point_until, TraceConfig};
use crate::types::{AutoparallelTrace, BaseSpace, FiberProjection, PointCloud};

/// A point where a trace meets the base space.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneCrossing<T> {
    pub point: Vec<T>,
    /// Arc length from the trace's seed state (negative on the backward side).
    pub signed_arc: T,
    /// Trace direction at the crossing, interpolated between the bracketing states.
    pub direction: Vec<T>,
}

/// All crossings of `trace` with `base`, sorted by `|signed_arc|`.
///
/// Consecutive states with offsets of opposite sign are linearly interpolated.
/// A state lying exactly on the plane is a crossing by itself; a run of such
/// states counts once, at its first state.
pub fn plane_crossings<T: Real>(trace: &AutoparallelTrace<T>, base: &BaseSpace<T>) -> Vec<PlaneCrossing<T>> {
    let states = &trace.states;
    let offsets: Vec<T> = states.iter().map(|s| base.offset(&s.position)).collect();
    let mut out = Vec::new();
    for k in 0..states.len() {
        let sk = offsets[k];
        if sk == T::zero() {
            if k == 0 || offsets[k - 1] != T::zero() {
                out.push(PlaneCrossing {
                    point: states[k].position.clone(),
                    signed_arc: states[k].arc_length,
                    direction: states[k].direction.clone(),
                });
            }
            continue;
        }
        let Some(&next) = offsets.get(k + 1) else { break };
        if next == T::zero() || (sk > T::zero()) == (next > T::zero()) {
            continue;
        }
        let t = sk / (sk - next);
        let (a, b) = (&states[k], &states[k + 1]);
        let point = a
            .position
            .iter()
            .zip(&b.position)
            .map(|(&x, &y)| x + t * (y - x))
            .collect();
        let blend: Vec<T> = a
            .direction
            .iter()
            .zip(&b.direction)
            .map(|(&x, &y)| x + t * (y - x))
            .collect();
        out.push(PlaneCrossing {
            point,
            signed_arc: a.arc_length + t * (b.arc_length - a.arc_length),
            direction: normalized(&blend).unwrap_or_else(|| a.direction.clone()),
        });
    }
    out.sort_by(|x, y| {
        x.signed_arc
            .abs()
            .partial_cmp(&y.signed_arc.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// Signed fiber coordinate of a chosen crossing.
///
/// The arc length is measured from the datapoint, and its sign is taken
/// relative to the base normal's canonical orientation at the crossing. All
/// points on one fiber then share a consistent sign regardless of how each
/// seed's eigenvector sign happened to fall, and flipping the normal changes
/// nothing.
fn fiber_coordinate<T: Real>(crossing: &PlaneCrossing<T>, base: &BaseSpace<T>) -> T {
    if dot(&crossing.direction, &base.canonical_normal()) < T::zero() {
        -crossing.signed_arc
    } else {
        crossing.signed_arc
    }
}

/// Traces the fiber through datapoint `point_index` and keeps its closest
/// crossing (minimum `|signed_arc|`).
pub fn project_point<T: Real>(
    index: &SpatialIndex<T>,
    point_index: usize,
    base: &BaseSpace<T>,
    config: &TraceConfig<T>,
) -> Result<FiberProjection<T>> {
    if base.dim() != index.dim() {
        return Err(PapaError::DimensionMismatch {
            expected: index.dim(),
            found: base.dim(),
        });
    }
    // A crossing bracketed at lockstep round k has |arc| <= k·h, and any
    // crossing found later is farther, so the walk can stop there.
    let trace = trace_from_point_until(index, point_index, config, |a, b| {
        let (sa, sb) = (base.offset(a), base.offset(b));
        sb == T::zero() || (sa > T::zero()) != (sb > T::zero())
    })?;
    let crossing = plane_crossings(&trace, base)
        .into_iter()
        .next()
        .ok_or(PapaError::NoIntersection {
            backward: trace.backward,
            forward: trace.forward,
        })?;
    Ok(FiberProjection {
        point_index,
        signed_distance: fiber_coordinate(&crossing, base),
        intersection: crossing.point,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaseStrategy<T> {
    /// Through the medoid, orthogonal to the mean trace direction there.
    MedoidOrthogonal,
    UserSupplied {
        anchor: Vec<T>,
        normal: Vec<T>,
    },
}

/// Index of the point with minimum summed distance to all others (lowest
/// index on ties).
pub fn medoid<T: Real>(cloud: &PointCloud<T>) -> usize {
    let totals: Vec<T> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            cloud.points().map(|q| dist(p, q)).fold(T::zero(), |a, b| a + b)
        })
        .collect();
    let mut best = 0;
    for (i, &t) in totals.iter().enumerate() {
        if t < totals[best] {
            best = i;
        }
    }
    best
}

pub fn choose_base_space<T: Real>(
    cloud: &PointCloud<T>,
    traces: &[AutoparallelTrace<T>],
    strategy: &BaseStrategy<T>,
) -> Result<BaseSpace<T>> {
    match strategy {
        BaseStrategy::UserSupplied { anchor, normal } => {
            if anchor.len() != cloud.dim() {
                return Err(PapaError::DimensionMismatch {
                    expected: cloud.dim(),
                    found: anchor.len(),
                });
            }
            BaseSpace::new(anchor.clone(), normal.clone())
        }
        BaseStrategy::MedoidOrthogonal => {
            let anchor = cloud.point(medoid(cloud)).to_vec();
            medoid_orthogonal_base(anchor, traces)
        }
    }
}

/// Base through `anchor` orthogonal to the mean of the trace directions
/// sampled at each trace's state nearest the anchor.
pub fn medoid_orthogonal_base<T: Real>(anchor: Vec<T>, traces: &[AutoparallelTrace<T>]) -> Result<BaseSpace<T>> {
    if traces.is_empty() {
        return Err(PapaError::invalid(
            "traces",
            "medoid base space needs at least one trace",
        ));
    }
    let mut sum = vec![T::zero(); anchor.len()];
    let mut reference: Option<Vec<T>> = None;
    for trace in traces {
        let nearest = trace
            .states
            .iter()
            .min_by(|a, b| {
                dist(&a.position, &anchor)
                    .partial_cmp(&dist(&b.position, &anchor))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or_else(|| PapaError::invalid("traces", "empty trace"))?;
        let mut d = nearest.direction.clone();
        match &reference {
            Some(r) => align_with(&mut d, r),
            None => reference = Some(d.clone()),
        }
        for (s, x) in sum.iter_mut().zip(&d) {
            *s += *x;
        }
    }
    let scale = T::from_count(traces.len());
    let mean: Vec<T> = sum.iter().map(|&s| s / scale).collect();
    if crate::linalg::norm(&mean) < T::epsilon().sqrt() {
        return Err(PapaError::DegenerateBaseDirection);
    }
    BaseSpace::new(anchor, mean)
}

/// Result of projecting a whole cloud onto one base space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult<T> {
    pub base: BaseSpace<T>,
    /// Successful projections, ordered by point index.
    pub projections: Vec<FiberProjection<T>>,
    /// Intersections in the base space's orthonormal chart, one row per
    /// projection. `None` when the base space is zero-dimensional.
    pub residual: Option<PointCloud<T>>,
    pub failures: Vec<usize>,
}

impl<T: Real> ProjectionResult<T> {
    pub fn coordinates(&self) -> Vec<T> {
        self.projections.iter().map(|p| p.signed_distance).collect()
    }

    pub fn point_indices(&self) -> Vec<usize> {
        self.projections.iter().map(|p| p.point_index).collect()
    }
}

/// Projects every point of the indexed cloud. Points whose trace never
/// crosses the base space (or whose seed lacks support) are reported as
/// failures; if none succeed the whole call fails.
pub fn project_all<T: Real>(
    index: &SpatialIndex<T>,
    base: &BaseSpace<T>,
    config: &TraceConfig<T>,
) -> Result<ProjectionResult<T>> {
    if base.dim() != index.dim() {
        return Err(PapaError::DimensionMismatch {
            expected: index.dim(),
            found: base.dim(),
        });
    }
    config.validate()?;
    let outcomes: Vec<Result<FiberProjection<T>>> = (0..index.len())
        .into_par_iter()
        .map(|i| project_point(index, i, base, config))
        .collect();
    let mut projections = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(p) => projections.push(p),
            Err(e) if e.is_numerical() => failures.push(i),
            Err(e) => return Err(e),
        }
    }
    if projections.is_empty() {
        return Err(PapaError::AllPointsFailed);
    }
    let residual = if base.dim() > 1 {
        let chart = base.chart();
        let flat: Vec<T> = projections
            .iter()
            .flat_map(|p| chart.to_chart(&p.intersection))
            .collect();
        Some(PointCloud::from_flat(flat, base.dim() - 1)?)
    } else {
        None
    };
    Ok(ProjectionResult {
        base: base.clone(),
        projections,
        residual,
        failures,
    })
}

/// `point_index,signed_distance,y_1..y_D` (intersection coordinates).
pub fn write_projection_csv<T: Real, W: Write>(
    projections: &[FiberProjection<T>],
    dim: usize,
    mut out: W,
) -> std::io::Result<()> {
    let mut header = vec!["point_index".to_string(), "signed_distance".into()];
    header.extend((1..=dim).map(|k| format!("y_{k}")));
    writeln!(out, "{}", header.join(","))?;
    for p in projections {
        writeln!(
            out,
            "{},{},{}",
            p.point_index,
            fmt_float(p.signed_distance),
            join_floats(&p.intersection, ',')
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbors::build_index;
    use crate::types::{validate_cloud, NeighborhoodSpec, Termination, TraceState};

    fn line_trace(xs: &[f64], h: f64, seed_offset: usize) -> AutoparallelTrace<f64> {
        AutoparallelTrace {
            states: xs
                .iter()
                .enumerate()
                .map(|(k, &x)| TraceState {
                    position: vec![x],
                    direction: vec![1.0],
                    arc_length: (k as f64 - seed_offset as f64) * h,
                })
                .collect(),
            seed_offset,
            seed_index: None,
            step: h,
            backward: Termination::MaxSteps,
            forward: Termination::MaxSteps,
        }
    }

    #[test]
    fn interpolated_crossing_on_a_line() {
        let xs: Vec<f64> = (-5..=5).map(|k| k as f64 * 0.01).collect();
        let trace = line_trace(&xs, 0.01, 5);
        let base = BaseSpace::new(vec![0.004], vec![1.0]).unwrap();
        let c = plane_crossings(&trace, &base);
        assert_eq!(c.len(), 1);
        assert!((c[0].point[0] - 0.004).abs() < 1e-15);
        assert!((c[0].signed_arc - 0.004).abs() < 1e-15);
    }

    #[test]
    fn no_crossing_when_on_one_side() {
        let trace = line_trace(&[0.1, 0.2, 0.3], 0.1, 0);
        let base = BaseSpace::new(vec![0.0], vec![1.0]).unwrap();
        assert!(plane_crossings(&trace, &base).is_empty());
    }

    #[test]
    fn runs_on_the_plane_count_once() {
        let mut trace = line_trace(&[-0.1, 0.0, 0.0, 0.0, 0.1], 0.1, 0);
        trace.states[2].arc_length = 0.2;
        let base = BaseSpace::new(vec![0.0], vec![1.0]).unwrap();
        let c = plane_crossings(&trace, &base);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].signed_arc, 0.1);
    }

    #[test]
    fn medoid_prefers_lower_index_on_ties() {
        let cloud = validate_cloud(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(medoid(&cloud), 0);
        let cloud = validate_cloud(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(medoid(&cloud), 1);
    }

    #[test]
    fn cancelling_directions_are_rejected() {
        let mut a = line_trace(&[0.0, 1.0], 1.0, 0);
        let mut b = a.clone();
        a.states[0].direction = vec![1.0];
        b.states[0].direction = vec![-1.0];
        // alignment to the first trace prevents cancellation of sign flips
        assert!(medoid_orthogonal_base(vec![0.0], &[a.clone(), b]).is_ok());
        a.states.iter_mut().for_each(|s| s.direction = vec![0.0]);
        assert!(matches!(
            medoid_orthogonal_base(vec![0.0], &[a]),
            Err(PapaError::DegenerateBaseDirection)
        ));
    }

    #[test]
    fn user_supplied_passes_through() {
        let cloud = validate_cloud(&[vec![0.0, 0.0, 0.0]]).unwrap();
        let s = 0.5_f64.sqrt();
        let strategy = BaseStrategy::UserSupplied {
            anchor: vec![0.0, 0.0, 0.0],
            normal: vec![s, 0.0, s],
        };
        let base = choose_base_space(&cloud, &[], &strategy).unwrap();
        assert_eq!(base.anchor, vec![0.0, 0.0, 0.0]);
        assert_eq!(base.normal, vec![s, 0.0, s]);
    }

    #[test]
    fn line_projection_matches_geometry() {
        let rows: Vec<Vec<f64>> = (0..=200).map(|i| vec![-1.0 + 0.01 * i as f64, 0.0]).collect();
        let index = build_index(&validate_cloud(&rows).unwrap());
        let spec = NeighborhoodSpec::new(0.1, 3, None).unwrap();
        let config = TraceConfig::new(0.01, 200, spec).unwrap();
        let base = BaseSpace::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        let i = rows.iter().position(|r| (r[0] - 0.37).abs() < 1e-9).unwrap();
        let p = project_point(&index, i, &base, &config).unwrap();
        assert!((p.signed_distance + 0.37).abs() <= 0.01);

        let flipped = BaseSpace::new(vec![0.0, 0.0], vec![-1.0, 0.0]).unwrap();
        let q = project_point(&index, i, &flipped, &config).unwrap();
        assert_eq!(p.signed_distance, q.signed_distance);

        let all = project_all(&index, &base, &config).unwrap();
        assert!(all.failures.is_empty());
        assert_eq!(all.residual.as_ref().unwrap().dim(), 1);
        for proj in &all.projections {
            assert!((proj.signed_distance + rows[proj.point_index][0]).abs() <= 0.01);
        }
    }

    #[test]
    fn missing_plane_fails_every_point() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![0.01 * i as f64, 0.0]).collect();
        let index = build_index(&validate_cloud(&rows).unwrap());
        let spec = NeighborhoodSpec::new(0.05, 3, None).unwrap();
        let config = TraceConfig::new(0.01, 5, spec).unwrap();
        let base = BaseSpace::new(vec![10.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            project_all(&index, &base, &config),
            Err(PapaError::AllPointsFailed)
        ));
    }
}

//! Autoparallel integration.
//!
//! A trace repeatedly estimates the local first principal direction and takes
//! an explicit Euler step of fixed length along it, in both directions from the
//! seed. Direction signs are carried from step to step so the curve never
//! doubles back on an eigenvector sign flip.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{PapaError, Result};
use crate::frame::{frame_at, local_axes, orient, DEFAULT_TIE_THRESHOLD};
use crate::io::join_floats;
use crate::linalg::{axpy, canonical_sign, neg, norm, sub};
use crate::neighbors::SpatialIndex;
use crate::scalar::Real;
use crate::types::{relative_gap, AutoparallelTrace, NeighborhoodSpec, Termination, TraceState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig<T> {
    /// Euler step length `h`.
    pub step: T,
    pub max_steps_each_way: usize,
    pub spec: NeighborhoodSpec<T>,
    /// Relative eigen-gap below which a position counts as isotropic.
    pub tie_threshold: T,
    /// Stop an end when the local spectrum is tied. Off by default so traces
    /// can overshoot the data and bend back.
    pub stop_on_isotropy: bool,
}

impl<T: Real> TraceConfig<T> {
    pub fn new(step: T, max_steps_each_way: usize, spec: NeighborhoodSpec<T>) -> Result<Self> {
        let config = TraceConfig {
            step,
            max_steps_each_way,
            spec,
            tie_threshold: T::lit(DEFAULT_TIE_THRESHOLD),
            stop_on_isotropy: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > T::zero()) || !self.step.is_finite() {
            return Err(PapaError::invalid(
                "step",
                format!("must be positive, got {}", self.step),
            ));
        }
        if self.max_steps_each_way == 0 {
            return Err(PapaError::invalid("max_steps_each_way", "must be at least 1"));
        }
        if !(self.tie_threshold >= T::zero()) {
            return Err(PapaError::invalid("tie_threshold", "must be non-negative"));
        }
        self.spec.validate()
    }
}

/// Traces the autoparallel through `seed`, orienting the initial direction
/// by the canonical sign rule.
pub fn trace_autoparallel<T: Real>(
    index: &SpatialIndex<T>,
    seed: &[T],
    config: &TraceConfig<T>,
) -> Result<AutoparallelTrace<T>> {
    trace_oriented(index, seed, config, None)
}

/// Like [`trace_autoparallel`] but with the seed direction aligned to
/// `orientation` when given.
pub fn trace_oriented<T: Real>(
    index: &SpatialIndex<T>,
    seed: &[T],
    config: &TraceConfig<T>,
    orientation: Option<&[T]>,
) -> Result<AutoparallelTrace<T>> {
    config.validate()?;
    let seed_frame = frame_at(index, seed, &config.spec, None)?;
    let mut d0 = seed_frame.direction;
    orient(&mut d0, orientation);

    let seed_state = TraceState {
        position: seed.to_vec(),
        direction: d0.clone(),
        arc_length: T::zero(),
    };
    if config.stop_on_isotropy && relative_gap(&seed_frame.spectrum) < config.tie_threshold {
        return Ok(AutoparallelTrace {
            states: vec![seed_state],
            seed_offset: 0,
            seed_index: None,
            step: config.step,
            backward: Termination::Isotropic,
            forward: Termination::Isotropic,
        });
    }

    let mut forward = Walker::new(seed, &d0);
    let mut backward = Walker::new(seed, &neg(&d0));
    while forward.advance(index, config) {}
    while backward.advance(index, config) {}
    Ok(assemble(seed_state, forward, backward, config.step))
}

/// Like [`trace_from_point`], but both ends advance in lockstep and stop
/// once `done` reports that the states gathered so far are enough. Ends that
/// are cut short report [`Termination::MaxSteps`].
pub(crate) fn trace_from_point_until<T: Real>(
    index: &SpatialIndex<T>,
    point_index: usize,
    config: &TraceConfig<T>,
    mut done: impl FnMut(&[T], &[T]) -> bool,
) -> Result<AutoparallelTrace<T>> {
    config.validate()?;
    if point_index >= index.len() {
        return Err(PapaError::IndexOutOfRange {
            index: point_index,
            len: index.len(),
        });
    }
    let seed = index.cloud().point(point_index);
    let seed_frame = frame_at(index, seed, &config.spec, None)?;
    let d0 = seed_frame.direction;
    let seed_state = TraceState {
        position: seed.to_vec(),
        direction: d0.clone(),
        arc_length: T::zero(),
    };
    let mut forward = Walker::new(seed, &d0);
    let mut backward = Walker::new(seed, &neg(&d0));
    if !(config.stop_on_isotropy && relative_gap(&seed_frame.spectrum) < config.tie_threshold) {
        loop {
            let moved_f = forward.advance(index, config);
            let moved_b = backward.advance(index, config);
            if !moved_f && !moved_b {
                break;
            }
            let hit_f = moved_f && done(forward.previous(seed), forward.last());
            let hit_b = moved_b && done(backward.previous(seed), backward.last());
            if hit_f || hit_b {
                forward.end.get_or_insert(Termination::MaxSteps);
                backward.end.get_or_insert(Termination::MaxSteps);
                break;
            }
        }
    } else {
        forward.end = Some(Termination::Isotropic);
        backward.end = Some(Termination::Isotropic);
    }
    let mut trace = assemble(seed_state, forward, backward, config.step);
    trace.seed_index = Some(point_index);
    Ok(trace)
}

/// One end of a trace, advanced one Euler step at a time.
struct Walker<T> {
    x: Vec<T>,
    d: Vec<T>,
    steps: Vec<(Vec<T>, Vec<T>)>,
    end: Option<Termination>,
}

impl<T: Real> Walker<T> {
    fn new(seed: &[T], d0: &[T]) -> Self {
        Walker {
            x: seed.to_vec(),
            d: d0.to_vec(),
            steps: Vec::new(),
            end: None,
        }
    }

    /// Takes one step; false once the end has terminated.
    fn advance(&mut self, index: &SpatialIndex<T>, config: &TraceConfig<T>) -> bool {
        if self.end.is_some() {
            return false;
        }
        if self.steps.len() == config.max_steps_each_way {
            self.end = Some(Termination::MaxSteps);
            return false;
        }
        let next = axpy(&self.x, config.step, &self.d);
        let frame = match frame_at(index, &next, &config.spec, Some(&self.d)) {
            Ok(f) => f,
            Err(_) => {
                self.end = Some(Termination::LostSupport);
                return false;
            }
        };
        if config.stop_on_isotropy && frame.is_tied(config.tie_threshold) {
            self.end = Some(Termination::Isotropic);
            return false;
        }
        self.d = frame.direction;
        self.x = next;
        self.steps.push((self.x.clone(), self.d.clone()));
        true
    }

    fn last(&self) -> &[T] {
        &self.x
    }

    fn previous<'a>(&'a self, seed: &'a [T]) -> &'a [T] {
        match self.steps.len() {
            0 | 1 => seed,
            n => &self.steps[n - 2].0,
        }
    }
}

fn assemble<T: Real>(
    seed_state: TraceState<T>,
    forward: Walker<T>,
    backward: Walker<T>,
    step: T,
) -> AutoparallelTrace<T> {
    let mut states = Vec::with_capacity(forward.steps.len() + backward.steps.len() + 1);
    for (k, (position, travel)) in backward.steps.into_iter().enumerate().rev() {
        states.push(TraceState {
            position,
            direction: neg(&travel),
            arc_length: -T::from_count(k + 1) * step,
        });
    }
    let seed_offset = states.len();
    states.push(seed_state);
    for (k, (position, travel)) in forward.steps.into_iter().enumerate() {
        states.push(TraceState {
            position,
            direction: travel,
            arc_length: T::from_count(k + 1) * step,
        });
    }
    AutoparallelTrace {
        states,
        seed_offset,
        seed_index: None,
        step,
        backward: backward.end.unwrap_or(Termination::MaxSteps),
        forward: forward.end.unwrap_or(Termination::MaxSteps),
    }
}

/// Traces through datapoint `point_index` of the indexed cloud.
pub fn trace_from_point<T: Real>(
    index: &SpatialIndex<T>,
    point_index: usize,
    config: &TraceConfig<T>,
) -> Result<AutoparallelTrace<T>> {
    if point_index >= index.len() {
        return Err(PapaError::IndexOutOfRange {
            index: point_index,
            len: index.len(),
        });
    }
    let mut trace = trace_autoparallel(index, index.cloud().point(point_index), config)?;
    trace.seed_index = Some(point_index);
    Ok(trace)
}

/// Independent traces from several datapoints, evaluated in parallel; results
/// keep the order of `point_indices`.
pub fn trace_many<T: Real>(
    index: &SpatialIndex<T>,
    point_indices: &[usize],
    config: &TraceConfig<T>,
) -> Vec<Result<AutoparallelTrace<T>>> {
    point_indices
        .par_iter()
        .map(|&i| trace_from_point(index, i, config))
        .collect()
}

/// Euclidean image of a fiber under the frame-coordinate map: the seed as
/// anchor plus one unrolled coordinate per state.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberChart<T> {
    pub anchor: Vec<T>,
    pub coordinates: Vec<T>,
}

/// Integrates the step expressed in the local frame. At a single level only
/// the first frame vector exists, and every Euler step is `h` times that
/// vector, so each step contributes exactly `±h`; the image is the signed
/// arc-length chart of the fiber.
pub fn nonholonomic_map<T: Real>(trace: &AutoparallelTrace<T>) -> FiberChart<T> {
    let coordinates = (0..trace.len())
        .map(|k| {
            if k >= trace.seed_offset {
                T::from_count(k - trace.seed_offset) * trace.step
            } else {
                -T::from_count(trace.seed_offset - k) * trace.step
            }
        })
        .collect();
    FiberChart {
        anchor: trace.seed_state().position.clone(),
        coordinates,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopDefect<T> {
    /// Endpoint of "first, then second" minus endpoint of "second, then first".
    pub defect: Vec<T>,
    pub norm: T,
    pub first: Vec<T>,
    pub second: Vec<T>,
}

/// Discrete parallelogram closure defect from the two leading local axes.
///
/// Walk A steps `ε` along the first axis and then `ε` along the second axis
/// re-estimated at the new corner; walk B does the reverse. Their endpoint
/// difference scales like `ε²` times the local torsion.
pub fn loop_defect<T: Real>(
    index: &SpatialIndex<T>,
    origin: &[T],
    spec: &NeighborhoodSpec<T>,
    epsilon: T,
    tie_threshold: T,
) -> Result<LoopDefect<T>> {
    if !(epsilon > T::zero()) {
        return Err(PapaError::invalid(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    if index.dim() < 2 {
        return Err(PapaError::SecondDirectionUndefined { spectrum: vec![] });
    }
    let (axes, _) = local_axes(index, origin, spec)?;
    let spectrum = &axes.values;
    let gap = relative_gap(spectrum);
    if gap < tie_threshold {
        return Err(PapaError::DirectionTie {
            gap: gap.as_f64(),
            threshold: tie_threshold.as_f64(),
        });
    }
    let second_undefined = spectrum[1] <= T::epsilon().sqrt() * spectrum[0]
        || (spectrum.len() > 2 && (spectrum[1] - spectrum[2]) / spectrum[1] < tie_threshold);
    if second_undefined {
        return Err(PapaError::SecondDirectionUndefined {
            spectrum: spectrum.iter().map(|v| v.as_f64()).collect(),
        });
    }
    let mut d1 = axes.vectors[0].clone();
    let mut d2 = axes.vectors[1].clone();
    canonical_sign(&mut d1);
    canonical_sign(&mut d2);

    let corner_a = axpy(origin, epsilon, &d1);
    let (axes_a, _) = local_axes(index, &corner_a, spec)?;
    let mut second_at_a = axes_a.vectors[1].clone();
    orient(&mut second_at_a, Some(&d2));
    let end_a = axpy(&corner_a, epsilon, &second_at_a);

    let corner_b = axpy(origin, epsilon, &d2);
    let (axes_b, _) = local_axes(index, &corner_b, spec)?;
    let mut first_at_b = axes_b.vectors[0].clone();
    orient(&mut first_at_b, Some(&d1));
    let end_b = axpy(&corner_b, epsilon, &first_at_b);

    let defect = sub(&end_a, &end_b);
    Ok(LoopDefect {
        norm: norm(&defect),
        defect,
        first: d1,
        second: d2,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope<T: Real>(xs: &[T], ys: &[T]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.as_f64().ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.as_f64().ln()).collect();
    if lx.iter().chain(&ly).any(|v| !v.is_finite()) {
        return None;
    }
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Trace table: `trace_id,step_index,arc_length,x_1..x_D,d_1..d_D,termination`.
/// `step_index` is signed relative to the seed; the seed row's termination
/// reads `seed`.
pub fn write_traces_csv<T: Real, W: Write>(
    traces: &[(usize, &AutoparallelTrace<T>)],
    mut out: W,
) -> std::io::Result<()> {
    let dim = traces.first().map(|(_, t)| t.seed_state().position.len()).unwrap_or(0);
    let mut header = vec!["trace_id".to_string(), "step_index".into(), "arc_length".into()];
    header.extend((1..=dim).map(|k| format!("x_{k}")));
    header.extend((1..=dim).map(|k| format!("d_{k}")));
    header.push("termination".into());
    writeln!(out, "{}", header.join(","))?;
    for (id, trace) in traces {
        for (k, state) in trace.states.iter().enumerate() {
            let step = k as i64 - trace.seed_offset as i64;
            let term = match step.signum() {
                -1 => trace.backward.as_str(),
                1 => trace.forward.as_str(),
                _ => "seed",
            };
            writeln!(
                out,
                "{id},{step},{},{},{},{term}",
                crate::io::fmt_float(state.arc_length),
                join_floats(&state.position, ','),
                join_floats(&state.direction, ','),
            )?;
        }
    }
    Ok(())
}

//! The level loop: trace, choose a base space, project, and repeat on the
//! residual until the requested depth, a curve-like residual, isotropic data
//! or a lack of support ends it.

use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{PapaError, Result};
use crate::frame::{frame_at, DEFAULT_TIE_THRESHOLD};
use crate::io::{fmt_float, join_floats, write_file};
use crate::neighbors::{build_index, distance_histogram_multi, estimate_radius, sample_origins, SpatialIndex};
use crate::projection::{medoid, medoid_orthogonal_base, project_all, BaseStrategy};
use crate::scalar::Real;
use crate::tracer::{trace_from_point, TraceConfig};
use crate::types::{NeighborhoodSpec, PapaLevel, PapaModel, PointCloud, StopReason};

pub const DEFAULT_ISOTROPY_THRESHOLD: f64 = 1.5;
pub const DEFAULT_ISOTROPY_PROBES: usize = 50;
pub const MIN_ISOTROPY_PROBES: usize = 10;
/// Origins whose distance histograms are summed for radius estimation.
pub const DEFAULT_RADIUS_ORIGINS: usize = 50;
pub const DEFAULT_MIN_NEIGHBORS: usize = 3;

/// Independent generator for one consumer of a run's randomness.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusPolicy<T> {
    Fixed(T),
    /// Re-estimated on every level's cloud from a summed distance histogram.
    Estimated {
        origins: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelCount {
    Count(usize),
    /// Up to `D − 1` levels.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropySettings {
    pub n_probes: usize,
    pub threshold: f64,
}

impl Default for IsotropySettings {
    fn default() -> Self {
        IsotropySettings {
            n_probes: DEFAULT_ISOTROPY_PROBES,
            threshold: DEFAULT_ISOTROPY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PapaConfig<T> {
    pub step: T,
    pub max_steps_each_way: usize,
    pub radius: RadiusPolicy<T>,
    pub min_neighbors: usize,
    pub max_neighbors: Option<usize>,
    pub tie_threshold: T,
    pub stop_on_isotropy: bool,
    pub levels: LevelCount,
    /// Base strategy for level `k`; levels beyond the list use the medoid.
    pub base_strategies: Vec<BaseStrategy<T>>,
    /// `None` disables the isotropy stop.
    pub isotropy: Option<IsotropySettings>,
    pub seed: u64,
}

impl<T: Real> PapaConfig<T> {
    pub fn new(step: T, max_steps_each_way: usize, levels: LevelCount) -> Self {
        PapaConfig {
            step,
            max_steps_each_way,
            radius: RadiusPolicy::Estimated {
                origins: DEFAULT_RADIUS_ORIGINS,
            },
            min_neighbors: DEFAULT_MIN_NEIGHBORS,
            max_neighbors: None,
            tie_threshold: T::lit(DEFAULT_TIE_THRESHOLD),
            stop_on_isotropy: false,
            levels,
            base_strategies: Vec::new(),
            isotropy: Some(IsotropySettings::default()),
            seed: 0,
        }
    }

    fn strategy(&self, level: usize) -> BaseStrategy<T> {
        self.base_strategies
            .get(level)
            .cloned()
            .unwrap_or(BaseStrategy::MedoidOrthogonal)
    }

    fn trace_config(&self, radius: T) -> Result<TraceConfig<T>> {
        let config = TraceConfig {
            step: self.step,
            max_steps_each_way: self.max_steps_each_way,
            spec: NeighborhoodSpec::new(radius, self.min_neighbors, self.max_neighbors)?,
            tie_threshold: self.tie_threshold,
            stop_on_isotropy: self.stop_on_isotropy,
        };
        config.validate()?;
        Ok(config)
    }

    /// Config echo for manifests.
    pub fn to_json(&self) -> Value {
        let radius = match self.radius {
            RadiusPolicy::Fixed(r) => json!({ "fixed": r.as_f64() }),
            RadiusPolicy::Estimated { origins } => json!({ "estimated": { "origins": origins } }),
        };
        let levels = match self.levels {
            LevelCount::Count(k) => json!(k),
            LevelCount::Auto => json!("auto"),
        };
        let strategies: Vec<Value> = self
            .base_strategies
            .iter()
            .map(|s| match s {
                BaseStrategy::MedoidOrthogonal => json!("medoid_orthogonal"),
                BaseStrategy::UserSupplied { anchor, normal } => json!({
                    "anchor": anchor.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
                    "normal": normal.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
                }),
            })
            .collect();
        json!({
            "step": self.step.as_f64(),
            "max_steps_each_way": self.max_steps_each_way,
            "radius": radius,
            "min_neighbors": self.min_neighbors,
            "max_neighbors": self.max_neighbors,
            "tie_threshold": self.tie_threshold.as_f64(),
            "stop_on_isotropy": self.stop_on_isotropy,
            "levels": levels,
            "base_strategies": strategies,
            "isotropy": self.isotropy.map(|s| json!({ "n_probes": s.n_probes, "threshold": s.threshold })),
            "seed": self.seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropyReport {
    /// Median of `λ₁/λ₂` over the probes that had support.
    pub statistic: f64,
    pub is_isotropic: bool,
    pub failed_probes: usize,
    pub probes: usize,
}

/// Median local anisotropy over `n_probes` random datapoints.
pub fn isotropy_test<T: Real>(
    index: &SpatialIndex<T>,
    spec: &NeighborhoodSpec<T>,
    n_probes: usize,
    threshold: f64,
    seed: u64,
) -> Result<IsotropyReport> {
    if n_probes < MIN_ISOTROPY_PROBES {
        return Err(PapaError::invalid(
            "n_probes",
            format!("need at least {MIN_ISOTROPY_PROBES}, got {n_probes}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes = sample_origins(index.len(), n_probes, &mut rng);
    let mut ratios = Vec::with_capacity(probes.len());
    let mut failed = 0;
    for &p in &probes {
        match frame_at(index, index.cloud().point(p), spec, None) {
            Ok(frame) => ratios.push(frame.anisotropy().as_f64()),
            Err(PapaError::LostSupport { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if 2 * failed > probes.len() {
        return Err(PapaError::InsufficientProbeSupport {
            failed,
            probes: probes.len(),
        });
    }
    ratios.sort_by(f64::total_cmp);
    let m = ratios.len();
    let statistic = if m % 2 == 1 {
        ratios[m / 2]
    } else {
        0.5 * (ratios[m / 2 - 1] + ratios[m / 2])
    };
    Ok(IsotropyReport {
        statistic,
        is_isotropic: statistic < threshold,
        failed_probes: failed,
        probes: probes.len(),
    })
}

/// Radius from the summed distance histogram of `origins` random datapoints.
pub fn estimate_cloud_radius<T: Real>(cloud: &PointCloud<T>, origins: usize, rng: &mut ChaCha8Rng) -> Result<T> {
    let picked = sample_origins(cloud.len(), origins.max(1), rng);
    estimate_radius(&distance_histogram_multi(cloud, &picked, None)?)
}

/// Runs the full level loop on `cloud`.
pub fn run_papa<T: Real>(cloud: &PointCloud<T>, config: &PapaConfig<T>) -> Result<PapaModel<T>> {
    let dim = cloud.dim();
    let max_levels = match config.levels {
        LevelCount::Count(k) if k == 0 || k > dim => {
            return Err(PapaError::invalid(
                "levels",
                format!("must be between 1 and {dim}, got {k}"),
            ));
        }
        LevelCount::Count(k) => k,
        LevelCount::Auto => dim.saturating_sub(1).max(1),
    };
    if dim < 2 {
        return Err(PapaError::invalid("cloud", "need at least two ambient dimensions"));
    }
    if let Some(iso) = &config.isotropy {
        if iso.n_probes < MIN_ISOTROPY_PROBES {
            return Err(PapaError::invalid(
                "n_probes",
                format!("need at least {MIN_ISOTROPY_PROBES}"),
            ));
        }
    }

    let mut levels = Vec::new();
    let mut current = cloud.clone();
    let mut original: Vec<usize> = (0..cloud.len()).collect();
    let stop_reason = loop {
        let level = levels.len();
        if level == max_levels {
            break StopReason::RequestedLevelsReached;
        }
        if current.dim() < 2 {
            break StopReason::OneDimensionalResidual;
        }
        match run_level(&current, &original, level, config) {
            Ok(LevelOutcome::Done(next)) => {
                current = next.residual.clone();
                original = next.point_indices.clone();
                levels.push(next);
            }
            Ok(LevelOutcome::Isotropic) => break StopReason::IsotropicData,
            Err(e) if level == 0 => return Err(PapaError::LevelZeroFailed(Box::new(e))),
            Err(e) if e.is_numerical() || matches!(e, PapaError::NoDistances) => break StopReason::InsufficientSupport,
            Err(e) => return Err(e),
        }
    };
    Ok(PapaModel { levels, stop_reason })
}

enum LevelOutcome<T> {
    Done(PapaLevel<T>),
    Isotropic,
}

fn run_level<T: Real>(
    cloud: &PointCloud<T>,
    original: &[usize],
    level: usize,
    config: &PapaConfig<T>,
) -> Result<LevelOutcome<T>> {
    let streams = 4 * level as u64;
    let radius = match config.radius {
        RadiusPolicy::Fixed(r) => r,
        RadiusPolicy::Estimated { origins } => {
            estimate_cloud_radius(cloud, origins, &mut stream_rng(config.seed, streams))?
        }
    };
    let trace_config = config.trace_config(radius)?;
    let index = build_index(cloud);

    if let Some(iso) = &config.isotropy {
        let probe_seed = stream_rng(config.seed, streams + 1).random();
        let report = isotropy_test(&index, &trace_config.spec, iso.n_probes, iso.threshold, probe_seed)?;
        if report.is_isotropic {
            return Ok(LevelOutcome::Isotropic);
        }
    }

    let base = match config.strategy(level) {
        BaseStrategy::MedoidOrthogonal => {
            let anchor = medoid(cloud);
            let trace = trace_from_point(&index, anchor, &trace_config)?;
            medoid_orthogonal_base(cloud.point(anchor).to_vec(), &[trace])?
        }
        BaseStrategy::UserSupplied { anchor, normal } => {
            crate::projection::choose_base_space(cloud, &[], &BaseStrategy::UserSupplied { anchor, normal })?
        }
    };
    let result = project_all(&index, &base, &trace_config)?;
    let residual = result
        .residual
        .clone()
        .ok_or_else(|| PapaError::invalid("cloud", "cannot project a one-dimensional cloud further"))?;
    Ok(LevelOutcome::Done(PapaLevel {
        point_indices: result.projections.iter().map(|p| original[p.point_index]).collect(),
        coordinates: result.coordinates(),
        failures: result.failures.iter().map(|&i| original[i]).collect(),
        base_space: base,
        radius,
        residual,
    }))
}

/// Writes `level_k/{base.json,coordinates.csv,residual.csv}` plus
/// `manifest.json` under `dir`.
pub fn export_model<T: Real>(model: &PapaModel<T>, config: &PapaConfig<T>, dir: &Path) -> Result<()> {
    let mut level_summaries = Vec::new();
    for (k, level) in model.levels.iter().enumerate() {
        let level_dir = dir.join(format!("level_{k}"));
        let base = json!({
            "anchor": level.base_space.anchor.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
            "normal": level.base_space.normal.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
        });
        write_file(&level_dir.join("base.json"), |out| {
            serde_json::to_writer_pretty(&mut *out, &base)?;
            writeln!(out)
        })?;
        write_file(&level_dir.join("coordinates.csv"), |out| {
            writeln!(out, "point_index,coordinate")?;
            for (i, c) in level.point_indices.iter().zip(&level.coordinates) {
                writeln!(out, "{i},{}", fmt_float(*c))?;
            }
            Ok(())
        })?;
        write_file(&level_dir.join("residual.csv"), |out| {
            let header: Vec<String> = (1..=level.residual.dim()).map(|j| format!("z_{j}")).collect();
            writeln!(out, "point_index,{}", header.join(","))?;
            for (i, p) in level.point_indices.iter().zip(level.residual.points()) {
                writeln!(out, "{i},{}", join_floats(p, ','))?;
            }
            Ok(())
        })?;
        level_summaries.push(json!({
            "level": k,
            "radius": level.radius.as_f64(),
            "projected": level.point_indices.len(),
            "failures": level.failures,
            "input_dim": level.base_space.dim(),
        }));
    }
    let manifest = json!({
        "levels": level_summaries,
        "stop_reason": model.stop_reason.as_str(),
        "seed": config.seed,
        "config": config.to_json(),
    });
    write_file(&dir.join("manifest.json"), |out| {
        serde_json::to_writer_pretty(&mut *out, &manifest)?;
        writeln!(out)
    })
}

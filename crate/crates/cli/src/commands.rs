use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use papa::datasets::{gen_boomerang, gen_swiss_roll, gen_zigzag, load_delimited, Dataset, DEFAULT_SWISS_ROLL_SCALE};
use papa::io::{fmt_float, write_cloud_csv, write_file};
use papa::neighbors::{distance_histogram_multi, estimate_radius, sample_origins, value_histogram};
use papa::pipeline::{export_model, stream_rng, IsotropySettings, DEFAULT_MIN_NEIGHBORS, DEFAULT_RADIUS_ORIGINS};
use papa::projection::{project_all, write_projection_csv};
use papa::tracer::{log_log_slope, trace_many, write_traces_csv};
use papa::{
    build_index, loop_defect, run_papa, BaseSpace, BaseStrategy, Cloud, LevelCount, NeighborhoodSpec, PapaConfig,
    PapaError, RadiusPolicy, TraceConfig, DEFAULT_TIE_THRESHOLD,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Papa(PapaError),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Papa(e) => write!(f, "{e}"),
        }
    }
}

impl From<PapaError> for CliError {
    fn from(e: PapaError) -> Self {
        CliError::Papa(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "papa", version, about = "Principal autoparallel analysis of point clouds")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a demonstration dataset with its generating parameters.
    Generate(GenerateArgs),
    /// Distance histogram and neighborhood radius estimate.
    Radius(RadiusArgs),
    /// Trace autoparallels through chosen datapoints.
    Trace(TraceArgs),
    /// Project every datapoint along its autoparallel onto a hyperplane.
    Project(ProjectArgs),
    /// Run the full level loop and export the model.
    Papa(PapaArgs),
    /// Loop-closure defect of the two leading local directions.
    Defect(DefectArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum DatasetName {
    Zigzag,
    Boomerang,
    SwissRoll,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum HeaderMode {
    Auto,
    Yes,
    No,
}

#[derive(Debug, Args, Serialize)]
struct InputArgs {
    /// Delimited numeric table, one point per row.
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Whether the first row is a header; `auto` skips it when it is not numeric.
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    header: HeaderMode,
    /// Zero-based column holding a non-numeric label.
    #[arg(long)]
    label_column: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct NeighborhoodArgs {
    /// Neighborhood radius; estimated from the distance histogram when omitted.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MIN_NEIGHBORS)]
    min_neighbors: usize,
    #[arg(long)]
    max_neighbors: Option<usize>,
    /// Origins whose distance histograms are summed when estimating the radius.
    #[arg(long, default_value_t = DEFAULT_RADIUS_ORIGINS as u64, value_parser = clap::value_parser!(u64).range(1..))]
    radius_origins: u64,
}

#[derive(Debug, Args, Serialize)]
struct StepArgs {
    /// Euler step length.
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    /// Steps in each direction from the seed.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    steps: u64,
    /// Stop a trace end where the local spectrum is tied.
    #[arg(long)]
    stop_on_isotropy: bool,
    #[arg(long, default_value_t = DEFAULT_TIE_THRESHOLD)]
    tie_threshold: f64,
}

#[derive(Debug, Args, Serialize)]
struct GenerateArgs {
    #[arg(value_enum)]
    dataset: DatasetName,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Global scale of the swiss roll.
    #[arg(long, default_value_t = DEFAULT_SWISS_ROLL_SCALE)]
    scale: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct RadiusArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_RADIUS_ORIGINS as u64, value_parser = clap::value_parser!(u64).range(1..))]
    origins: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TraceArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of randomly chosen seed datapoints.
    #[arg(long, conflicts_with = "seed_indices")]
    seeds: Option<usize>,
    /// Explicit seed datapoint indices.
    #[arg(long, value_delimiter = ',')]
    seed_indices: Option<Vec<usize>>,
    #[command(flatten)]
    step: StepArgs,
    #[command(flatten)]
    neighborhood: NeighborhoodArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
struct ProjectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_delimiter = ',', requires = "normal", conflicts_with = "plane_45z")]
    anchor: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', requires = "anchor")]
    normal: Option<Vec<f64>>,
    /// Plane at 45° to the z axis, normal (1,0,1)/√2, shifted by `--offset`.
    #[arg(long)]
    plane_45z: bool,
    #[arg(long, default_value_t = 0.0, requires = "plane_45z")]
    offset: f64,
    #[command(flatten)]
    step: StepArgs,
    #[command(flatten)]
    neighborhood: NeighborhoodArgs,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct PapaArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of levels, or `auto`.
    #[arg(long, default_value = "auto")]
    levels: String,
    #[command(flatten)]
    step: StepArgs,
    #[command(flatten)]
    neighborhood: NeighborhoodArgs,
    /// Disable the isotropy stop.
    #[arg(long)]
    no_isotropy: bool,
    #[arg(long, default_value_t = IsotropySettings::default().n_probes)]
    probes: usize,
    #[arg(long, default_value_t = IsotropySettings::default().threshold)]
    isotropy_threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct DefectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    origin_index: usize,
    /// One or more loop sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    epsilon: Vec<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MIN_NEIGHBORS)]
    min_neighbors: usize,
    #[arg(long, default_value_t = DEFAULT_TIE_THRESHOLD)]
    tie_threshold: f64,
    /// Report whether every defect norm is below this value.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => generate(&args),
        Command::Radius(args) => radius(&args),
        Command::Trace(args) => trace(&args),
        Command::Project(args) => project(&args),
        Command::Papa(args) => papa_cmd(&args),
        Command::Defect(args) => defect(&args),
    }
}

fn echo_config<A: Serialize>(dir: &Path, command: &str, args: &A) -> Result<()> {
    let value = serde_json::json!({ "command": command, "args": args });
    write_file(&dir.join("config.json"), |out| {
        serde_json::to_writer_pretty(&mut *out, &value)?;
        writeln!(out)
    })?;
    Ok(())
}

fn load(args: &InputArgs) -> Result<Cloud> {
    let has_header = match args.header {
        HeaderMode::Yes => true,
        HeaderMode::No => false,
        HeaderMode::Auto => first_row_is_header(&args.input, args.delimiter, args.label_column)?,
    };
    Ok(load_delimited(
        &args.input,
        args.delimiter,
        has_header,
        args.label_column,
    )?)
}

fn first_row_is_header(path: &Path, delimiter: char, label_column: Option<usize>) -> Result<bool> {
    let text = std::fs::read_to_string(path).map_err(|e| PapaError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let Some(first) = text.lines().find(|l| !l.trim().is_empty()) else {
        return Ok(false);
    };
    Ok(first
        .split(delimiter)
        .enumerate()
        .any(|(k, field)| Some(k) != label_column && field.trim().parse::<f64>().is_err()))
}

fn resolve_radius(cloud: &Cloud, args: &NeighborhoodArgs, seed: u64) -> Result<f64> {
    match args.radius {
        Some(r) if !(r > 0.0) || !r.is_finite() => Err(CliError::Usage(format!("--radius must be positive, got {r}"))),
        Some(r) => Ok(r),
        None => {
            let origins = sample_origins(cloud.len(), args.radius_origins as usize, &mut stream_rng(seed, 0));
            Ok(estimate_radius(&distance_histogram_multi(cloud, &origins, None)?)?)
        }
    }
}

fn trace_config(step: &StepArgs, spec: NeighborhoodSpec<f64>) -> Result<TraceConfig<f64>> {
    let config = TraceConfig {
        step: step.h,
        max_steps_each_way: step.steps as usize,
        spec,
        tie_threshold: step.tie_threshold,
        stop_on_isotropy: step.stop_on_isotropy,
    };
    config.validate()?;
    Ok(config)
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let n = args.n as usize;
    let data: Dataset<f64> = match args.dataset {
        DatasetName::Zigzag => gen_zigzag(n, args.sigma, args.seed)?,
        DatasetName::Boomerang => gen_boomerang(n, args.sigma, args.seed)?,
        DatasetName::SwissRoll => gen_swiss_roll(n, args.sigma, args.scale, args.seed)?,
    };
    write_file(&args.out.join("cloud.csv"), |out| write_cloud_csv(&data.cloud, out))?;
    write_file(&args.out.join("params.csv"), |out| data.write_params_csv(out))?;
    echo_config(&args.out, "generate", args)?;
    println!(
        "wrote {} points ({}-dimensional) to {}",
        data.cloud.len(),
        data.cloud.dim(),
        args.out.display()
    );
    Ok(())
}

fn radius(args: &RadiusArgs) -> Result<()> {
    let cloud = load(&args.input)?;
    if let Some(w) = args.bin_width {
        if !(w > 0.0) {
            return Err(CliError::Usage(format!("--bin-width must be positive, got {w}")));
        }
    }
    let origins = sample_origins(cloud.len(), args.origins as usize, &mut stream_rng(args.seed, 0));
    let hist = distance_histogram_multi(&cloud, &origins, args.bin_width)?;
    let r = estimate_radius(&hist)?;
    write_file(&args.out.join("histogram.csv"), |out| hist.write_csv(out))?;
    echo_config(&args.out, "radius", args)?;
    println!("radius {}", fmt_float(r));
    Ok(())
}

fn trace(args: &TraceArgs) -> Result<()> {
    let cloud = load(&args.input)?;
    let seeds = match (&args.seeds, &args.seed_indices) {
        (Some(0), _) => return Err(CliError::Usage("--seeds must be at least 1".into())),
        (Some(k), _) => sample_origins(cloud.len(), *k, &mut stream_rng(args.seed, 1)),
        (None, Some(list)) if !list.is_empty() => list.clone(),
        _ => {
            return Err(CliError::Usage(
                "give --seeds <count> or --seed-indices <i,j,...>".into(),
            ))
        }
    };
    let r = resolve_radius(&cloud, &args.neighborhood, args.seed)?;
    let spec = NeighborhoodSpec::new(r, args.neighborhood.min_neighbors, args.neighborhood.max_neighbors)?;
    let config = trace_config(&args.step, spec)?;
    let index = build_index(&cloud);
    let outcomes = trace_many(&index, &seeds, &config);
    let mut traces = Vec::new();
    for (id, (seed, outcome)) in seeds.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(t) => {
                let arc = t.states.last().map(|s| s.arc_length).unwrap_or(0.0) - t.states[0].arc_length;
                println!(
                    "trace {id} seed {seed} states {} backward {} forward {} length {}",
                    t.len(),
                    t.backward,
                    t.forward,
                    fmt_float(arc)
                );
                traces.push((id, t));
            }
            Err(PapaError::IndexOutOfRange { index, len }) => {
                return Err(CliError::Usage(format!(
                    "seed index {index} out of range for {len} points"
                )))
            }
            Err(e) => println!("trace {id} seed {seed} failed: {e}"),
        }
    }
    if traces.is_empty() {
        return Err(CliError::Papa(PapaError::LostSupport {
            found: 0,
            required: spec.min_neighbors,
        }));
    }
    let refs: Vec<(usize, &papa::Trace)> = traces.iter().map(|(id, t)| (*id, t)).collect();
    write_file(&args.out.join("traces.csv"), |out| write_traces_csv(&refs, out))?;
    echo_config(&args.out, "trace", args)?;
    Ok(())
}

fn project(args: &ProjectArgs) -> Result<()> {
    let cloud = load(&args.input)?;
    let base = if args.plane_45z {
        if cloud.dim() != 3 {
            return Err(CliError::Usage("--plane-45z needs three-dimensional data".into()));
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        BaseSpace::new(vec![args.offset * s, 0.0, args.offset * s], vec![s, 0.0, s])?
    } else {
        match (&args.anchor, &args.normal) {
            (Some(a), Some(n)) => {
                if a.len() != cloud.dim() || n.len() != cloud.dim() {
                    return Err(CliError::Usage(format!(
                        "--anchor and --normal need {} components",
                        cloud.dim()
                    )));
                }
                BaseSpace::new(a.clone(), n.clone())?
            }
            _ => return Err(CliError::Usage("give --anchor and --normal, or --plane-45z".into())),
        }
    };
    let r = resolve_radius(&cloud, &args.neighborhood, args.seed)?;
    let spec = NeighborhoodSpec::new(r, args.neighborhood.min_neighbors, args.neighborhood.max_neighbors)?;
    let config = trace_config(&args.step, spec)?;
    let index = build_index(&cloud);
    let result = project_all(&index, &base, &config)?;
    write_file(&args.out.join("projection.csv"), |out| {
        write_projection_csv(&result.projections, cloud.dim(), out)
    })?;
    let hist = value_histogram(&result.coordinates(), args.bin_width)?;
    write_file(&args.out.join("histogram.csv"), |out| hist.write_csv(out))?;
    echo_config(&args.out, "project", args)?;
    println!(
        "radius {} projected {} failed {}",
        fmt_float(r),
        result.projections.len(),
        result.failures.len()
    );
    Ok(())
}

fn papa_cmd(args: &PapaArgs) -> Result<()> {
    let cloud = load(&args.input)?;
    let levels = match args.levels.as_str() {
        "auto" => LevelCount::Auto,
        s => match s.parse::<usize>() {
            Ok(k) if (1..=cloud.dim()).contains(&k) => LevelCount::Count(k),
            _ => {
                return Err(CliError::Usage(format!(
                    "--levels must be `auto` or between 1 and {} for this data, got `{s}`",
                    cloud.dim()
                )))
            }
        },
    };
    let mut config = PapaConfig::new(args.step.h, args.step.steps as usize, levels);
    config.radius = match args.neighborhood.radius {
        Some(r) => RadiusPolicy::Fixed(r),
        None => RadiusPolicy::Estimated {
            origins: args.neighborhood.radius_origins as usize,
        },
    };
    config.min_neighbors = args.neighborhood.min_neighbors;
    config.max_neighbors = args.neighborhood.max_neighbors;
    config.tie_threshold = args.step.tie_threshold;
    config.stop_on_isotropy = args.step.stop_on_isotropy;
    config.isotropy = (!args.no_isotropy).then_some(IsotropySettings {
        n_probes: args.probes,
        threshold: args.isotropy_threshold,
    });
    config.seed = args.seed;
    config.base_strategies = vec![BaseStrategy::MedoidOrthogonal];
    let model = run_papa(&cloud, &config)?;
    export_model(&model, &config, &args.out)?;
    echo_config(&args.out, "papa", args)?;
    println!(
        "levels {} stop_reason {}",
        model.levels.len(),
        model.stop_reason.as_str()
    );
    for (k, level) in model.levels.iter().enumerate() {
        println!(
            "level {k} radius {} projected {} failed {}",
            fmt_float(level.radius),
            level.point_indices.len(),
            level.failures.len()
        );
    }
    Ok(())
}

fn defect(args: &DefectArgs) -> Result<()> {
    let cloud = load(&args.input)?;
    if args.origin_index >= cloud.len() {
        return Err(CliError::Usage(format!(
            "--origin-index {} out of range for {} points",
            args.origin_index,
            cloud.len()
        )));
    }
    if let Some(bad) = args.epsilon.iter().find(|e| !(**e > 0.0)) {
        return Err(CliError::Usage(format!("--epsilon values must be positive, got {bad}")));
    }
    let neighborhood = NeighborhoodArgs {
        radius: args.radius,
        min_neighbors: args.min_neighbors,
        max_neighbors: None,
        radius_origins: DEFAULT_RADIUS_ORIGINS as u64,
    };
    let r = resolve_radius(&cloud, &neighborhood, args.seed)?;
    let spec = NeighborhoodSpec::new(r, args.min_neighbors, None)?;
    let index = build_index(&cloud);
    let origin = cloud.point(args.origin_index).to_vec();
    let mut norms = Vec::with_capacity(args.epsilon.len());
    for &eps in &args.epsilon {
        let d = loop_defect(&index, &origin, &spec, eps, args.tie_threshold)?;
        println!("epsilon {} defect_norm {}", fmt_float(eps), fmt_float(d.norm));
        norms.push(d.norm);
    }
    let slope = log_log_slope(&args.epsilon, &norms);
    if let Some(s) = slope {
        println!("slope {}", fmt_float(s));
    }
    if let Some(t) = args.threshold {
        let below = norms.iter().all(|&n| n < t);
        println!("below_threshold {below}");
    }
    if let Some(dir) = &args.out {
        write_file(&dir.join("defect.csv"), |out| {
            writeln!(out, "epsilon,defect_norm")?;
            for (e, n) in args.epsilon.iter().zip(&norms) {
                writeln!(out, "{},{}", fmt_float(*e), fmt_float(*n))?;
            }
            Ok(())
        })?;
        echo_config(dir, "defect", args)?;
    }
    Ok(())
}

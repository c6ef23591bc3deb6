use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use nlos_core::backprojection::{in_pool, reconstruct_pipeline};
use nlos_core::bench::{run_bench, BenchPlan};
use nlos_core::io::{self, PlyFormat, Report};
use nlos_core::voxel::DEFAULT_MAX_VOXELS;
use nlos_core::{
    grid_compare, laplacian_filter, reconstruct, simulate_dataset_with, Aabb, AccumulatorMode,
    BoundsSpec, Config, Dataset, Epsilon, Error, Grid, Method, Point, Scene, ShotNoise,
    SimulationOptions,
};

/// Environment variable holding the voxel-count cap for reconstructions.
const MAX_VOXELS_ENV: &str = "NLOS_MAX_VOXELS";

#[derive(Parser)]
#[command(
    name = "nlos",
    version,
    about = "Transient non-line-of-sight simulation and reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic transient dataset from a scene file.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Expected photon count at the brightest bin; enables Poisson noise.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = positive)]
        threads: Option<usize>,
    },
    /// Back-project a dataset into a voxel volume.
    Reconstruct(ReconstructArgs),
    /// Apply the Laplacian filter to a volume.
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export a volume as a point cloud or image slices.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        /// Output file (ply) or directory (pgm).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = SliceAxis::Z)]
        axis: SliceAxis,
    },
    /// Compare two volumes with identical geometry.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Run a benchmark sweep.
    Bench {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Ply,
    PlyBinary,
    Pgm,
}

#[derive(Clone, Copy, ValueEnum)]
enum SliceAxis {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MethodArg {
    Fast,
    Traditional,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Int,
    Float,
}

#[derive(clap::Args)]
struct ReconstructArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// TOML file with defaults for any of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_parser = positive)]
    res: Option<usize>,
    /// `auto` or `x0,y0,z0,x1,y1,z1`.
    #[arg(long)]
    bounds: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// `voxel` or a length in metres.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    no_dedup: bool,
    #[arg(long)]
    g_correction: bool,
    #[arg(long)]
    filter: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long, value_parser = positive)]
    threads: Option<usize>,
}

/// Values accepted in a `--config` file.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    method: Option<MethodArg>,
    res: Option<usize>,
    bounds: Option<BoundsValue>,
    mode: Option<ModeArg>,
    eps: Option<EpsValue>,
    threshold: Option<f64>,
    dedup: Option<bool>,
    g_correction: Option<bool>,
    filter: Option<bool>,
    threads: Option<usize>,
    max_tess_level: Option<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BoundsValue {
    Box([f64; 6]),
    Keyword(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EpsValue {
    Length(f64),
    Keyword(String),
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 1,
        Error::ResolutionOverflow { .. }
        | Error::IntegerOverflow { .. }
        | Error::BudgetExceeded { .. } => 3,
        _ => 2,
    }
}

fn parse_bounds(s: &str) -> nlos_core::Result<BoundsSpec<f64>> {
    if s == "auto" {
        return Ok(BoundsSpec::Auto);
    }
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            usage(format!(
                "bounds {s:?} must be `auto` or six comma-separated numbers"
            ))
        })?;
    let arr: [f64; 6] = v
        .try_into()
        .map_err(|_| usage(format!("bounds {s:?} needs six numbers")))?;
    explicit_bounds(arr)
}

fn explicit_bounds(v: [f64; 6]) -> nlos_core::Result<BoundsSpec<f64>> {
    let b = Aabb::new(Point::new(v[0], v[1], v[2]), Point::new(v[3], v[4], v[5]));
    if !b.is_nonempty() || v.iter().any(|x| !x.is_finite()) {
        return Err(usage("bounds must have min < max on every axis"));
    }
    Ok(BoundsSpec::Explicit(b))
}

fn parse_eps(s: &str) -> nlos_core::Result<Epsilon<f64>> {
    if s == "voxel" {
        return Ok(Epsilon::VoxelSize);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| *v > 0.0 && v.is_finite())
        .map(Epsilon::Absolute)
        .ok_or_else(|| usage(format!("eps {s:?} must be `voxel` or a positive length")))
}

fn max_voxels() -> nlos_core::Result<u64> {
    match std::env::var(MAX_VOXELS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{MAX_VOXELS_ENV}={v:?} is not an integer"))),
        Err(_) => Ok(DEFAULT_MAX_VOXELS),
    }
}

fn read_config_file(path: &Path) -> nlos_core::Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Flags override the config file, which overrides the defaults.
fn build_config(args: &ReconstructArgs) -> nlos_core::Result<(Config, bool)> {
    let file = match &args.config {
        Some(p) => read_config_file(p)?,
        None => ConfigFile::default(),
    };
    let mut cfg = Config {
        max_voxels: max_voxels()?,
        ..Config::default()
    };

    if let Some(m) = args.method.or(file.method) {
        cfg.method = match m {
            MethodArg::Fast => Method::Fast,
            MethodArg::Traditional => Method::Traditional,
        };
    }
    if let Some(r) = args.res.or(file.res) {
        cfg.resolution = r;
    }
    cfg.bounds = match (&args.bounds, &file.bounds) {
        (Some(s), _) => parse_bounds(s)?,
        (None, Some(BoundsValue::Box(v))) => explicit_bounds(*v)?,
        (None, Some(BoundsValue::Keyword(s))) => parse_bounds(s)?,
        (None, None) => BoundsSpec::Auto,
    };
    if let Some(m) = args.mode.or(file.mode) {
        cfg.mode = match m {
            ModeArg::Int => AccumulatorMode::Integer,
            ModeArg::Float => AccumulatorMode::Float,
        };
    }
    cfg.epsilon = match (&args.eps, &file.eps) {
        (Some(s), _) => parse_eps(s)?,
        (None, Some(EpsValue::Length(v))) => parse_eps(&v.to_string())?,
        (None, Some(EpsValue::Keyword(s))) => parse_eps(s)?,
        (None, None) => Epsilon::VoxelSize,
    };
    if let Some(t) = args.threshold.or(file.threshold) {
        cfg.intensity_threshold = t;
    }
    cfg.dedup = !args.no_dedup && file.dedup.unwrap_or(true);
    cfg.g_correction = args.g_correction || file.g_correction.unwrap_or(false);
    cfg.threads = args.threads.or(file.threads);
    if let Some(o) = file.max_tess_level {
        cfg.max_tess_level = o;
    }
    cfg.validate()?;
    Ok((cfg, args.filter || file.filter.unwrap_or(false)))
}

fn cmd_simulate(
    scene: &Path,
    out: &Path,
    noise: Option<f64>,
    seed: u64,
    threads: Option<usize>,
) -> nlos_core::Result<()> {
    let scene: Scene = io::read_scene(scene)?;
    if let Some(n) = noise {
        if !(n > 0.0 && n.is_finite()) {
            return Err(usage("--noise must be a positive photon count"));
        }
    }
    let opts = SimulationOptions {
        noise: noise.map(|photons| ShotNoise { photons, seed }),
    };
    let ds: Dataset = in_pool(threads, || simulate_dataset_with(&scene, &opts))??;
    io::write_dataset(&ds, out)?;
    let mut r = Report::new();
    r.push("shots", ds.shots())
        .push("pixels", ds.pixels())
        .push("bins", ds.bins())
        .push("nonzero_bins", ds.nonzero_bins())
        .push("sparsity", ds.sparsity());
    print!("{r}");
    Ok(())
}

fn cmd_reconstruct(args: &ReconstructArgs) -> nlos_core::Result<()> {
    let (cfg, filter) = build_config(args)?;
    let ds: Dataset = io::read_dataset(&args.input)?;
    let start = Instant::now();
    let (grid, stats) = if filter {
        reconstruct_pipeline(&ds, &cfg, true)?
    } else {
        reconstruct(&ds, &cfg)?
    };
    let total = start.elapsed().as_secs_f64();
    if let Some(out) = &args.out {
        io::write_volume(&grid, out)?;
    }
    let g = grid.geometry();
    let mut r = Report::new();
    r.push("method", cfg.method.name())
        .push(
            "mode",
            if cfg.mode == AccumulatorMode::Integer {
                "int"
            } else {
                "float"
            },
        )
        .push(
            "resolution",
            format!("{}x{}x{}", g.dims[0], g.dims[1], g.dims[2]),
        )
        .push("voxel_size", g.voxel_size())
        .push(
            "bounds",
            format!(
                "{},{},{},{},{},{}",
                g.min.x, g.min.y, g.min.z, g.max.x, g.max.y, g.max.z
            ),
        )
        .push("filtered", filter)
        .push_stats("", &stats)
        .push("total_time_s", total);
    if let Some(path) = &args.stats {
        io::write_report(&r, path)?;
    }
    print!("{r}");
    Ok(())
}

fn cmd_filter(input: &Path, out: &Path) -> nlos_core::Result<()> {
    let grid: Grid = io::read_volume(input)?;
    io::write_volume(&laplacian_filter(&grid), out)
}

fn cmd_export(
    input: &Path,
    format: ExportFormat,
    out: &Path,
    threshold: f64,
    axis: SliceAxis,
) -> nlos_core::Result<()> {
    let grid: Grid = io::read_volume(input)?;
    match format {
        ExportFormat::Ply | ExportFormat::PlyBinary => {
            let f = if matches!(format, ExportFormat::Ply) {
                PlyFormat::Ascii
            } else {
                PlyFormat::BinaryLittleEndian
            };
            let n = io::export_ply(&grid, threshold, f, out)?;
            println!("vertices={n}");
        }
        ExportFormat::Pgm => {
            let files = io::export_slices(&grid, axis as usize, out)?;
            println!("slices={}", files.len());
        }
    }
    Ok(())
}

fn cmd_compare(a: &Path, b: &Path) -> nlos_core::Result<()> {
    let a: Grid = io::read_volume(a)?;
    let b: Grid = io::read_volume(b)?;
    let c = grid_compare(&a, &b)?;
    println!(
        "mse={}\npearson={}\npeak_offset={}",
        c.mse, c.pearson, c.peak_offset
    );
    Ok(())
}

fn cmd_bench(plan: &Path, report: &Path) -> nlos_core::Result<()> {
    let plan = BenchPlan::read(plan)?;
    let ds: Dataset = io::read_dataset(&plan.dataset)?;
    let result = run_bench(&plan, &ds)?;
    let r = result.to_report();
    io::write_report(&r, report)?;
    for s in &result.speedups {
        println!("speedup.{}.{}={}", s.resolution, s.epsilon, s.ratio);
    }
    Ok(())
}

fn run(cli: Cli) -> nlos_core::Result<()> {
    match cli.command {
        Command::Simulate {
            scene,
            out,
            noise,
            seed,
            threads,
        } => cmd_simulate(&scene, &out, noise, seed, threads),
        Command::Reconstruct(args) => cmd_reconstruct(&args),
        Command::Filter { input, out } => cmd_filter(&input, &out),
        Command::Export {
            input,
            format,
            out,
            threshold,
            axis,
        } => cmd_export(&input, format, &out, threshold, axis),
        Command::Compare { a, b } => cmd_compare(&a, &b),
        Command::Bench { plan, report } => cmd_bench(&plan, &report),
    }
}

/// Parses the command line. Invalid values also print the subcommand usage line.
fn parse_cli() -> Result<Cli, ExitCode> {
    use clap::error::ErrorKind;
    use clap::CommandFactory;
    match Cli::try_parse() {
        Ok(cli) => Ok(cli),
        Err(e) => {
            let _ = e.print();
            if matches!(
                e.kind(),
                ErrorKind::ValueValidation | ErrorKind::InvalidValue
            ) {
                let mut cmd = Cli::command();
                cmd.build();
                let sub = std::env::args().nth(1).unwrap_or_default();
                let usage = match cmd.find_subcommand_mut(&sub) {
                    Some(sc) => sc.render_usage(),
                    None => cmd.render_usage(),
                };
                eprintln!("\n{usage}");
            }
            Err(ExitCode::from(if e.use_stderr() { 2 } else { 0 }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match parse_cli() {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

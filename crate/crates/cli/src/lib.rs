//! Command-line front end: `trace` → `image` → `eval`, plus `cir` dumps.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use isac_imaging::channel::{synthesize_cir, ArrayGeometry};
use isac_imaging::cloud::{
    image_drops, prefix_tradeoff, sample_reference, FusionConfig, ImageStats, DEFAULT_GAMMA, DEFAULT_REFERENCE_POINTS,
};
use isac_imaging::formats::{
    assemble_drops, read_drops, read_paths, read_ply, write_cir, write_paths, write_ply, write_tradeoff, FormatError,
};
use isac_imaging::geom::Vec3;
use isac_imaging::pathgen::{trace_drop, DiffuseConfig, Drop, Scene, TraceConfig, TraceError, SPEED_OF_LIGHT};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn config(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "isac", version, about = "RF imaging from multipath angle/delay/gain tuples")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace every drop through a scene and write the path table (CSV).
    Trace(TraceArgs),
    /// Map paths to equivalent reflection points, γ-filter, and write a PLY cloud.
    Image(ImageArgs),
    /// Score a fused cloud against the scene for growing numbers of drops.
    Eval(EvalArgs),
    /// Dump per-tap MIMO impulse-response matrices (CSV).
    Cir(CirArgs),
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub drops: PathBuf,
    #[arg(long, default_value_t = 6.75e9)]
    pub carrier_hz: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub tx_power_dbm: f64,
    #[arg(long, default_value_t = -160.0, allow_negative_numbers = true)]
    pub cutoff_dbm: f64,
    #[arg(long, default_value_t = 2)]
    pub max_bounces: u32,
    /// Diffuse samples per hit, or `off`.
    #[arg(long, default_value = "16", value_parser = parse_diffuse)]
    pub diffuse: Diffuse,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImageArgs {
    /// Path table written by `trace`.
    pub paths: PathBuf,
    #[arg(long)]
    pub drops: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GAMMA, allow_negative_numbers = true)]
    pub gamma: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Cloud written by `image`.
    pub cloud: PathBuf,
    #[arg(long)]
    pub scene: PathBuf,
    /// Drop list; fixes the number of available drops. Without it the
    /// largest drop id in the cloud is used.
    #[arg(long)]
    pub drops: Option<PathBuf>,
    /// Drop counts to evaluate, e.g. `1,2,4` or `1-7`; all by default.
    #[arg(long, value_parser = parse_pairs)]
    pub pairs: Option<Pairs>,
    /// Seed of the reference-cloud sampler.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_REFERENCE_POINTS)]
    pub ref_points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CirArgs {
    /// Path table written by `trace`.
    pub paths: PathBuf,
    #[arg(long)]
    pub drops: PathBuf,
    #[arg(long, default_value_t = 6.75e9)]
    pub carrier_hz: f64,
    /// TX array as `MxxMy`, e.g. `4x2`.
    #[arg(long, default_value = "1x1", value_parser = parse_array)]
    pub tx_array: (usize, usize),
    /// RX array as `MxxMy`.
    #[arg(long, default_value = "1x1", value_parser = parse_array)]
    pub rx_array: (usize, usize),
    /// Element spacing in metres; half a wavelength when omitted.
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diffuse {
    Off,
    Samples(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairs(pub Vec<usize>);

pub fn parse_diffuse(s: &str) -> Result<Diffuse, String> {
    if s.eq_ignore_ascii_case("off") {
        return Ok(Diffuse::Off);
    }
    match s.parse::<usize>() {
        Ok(0) => Ok(Diffuse::Off),
        Ok(n) => Ok(Diffuse::Samples(n)),
        Err(_) => Err(format!("expected a sample count or 'off', got {s:?}")),
    }
}

/// Comma-separated counts and inclusive `a-b` ranges.
pub fn parse_pairs(s: &str) -> Result<Pairs, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad pair count {t:?}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty range {part:?}"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    Ok(Pairs(out))
}

pub fn parse_array(s: &str) -> Result<(usize, usize), String> {
    let (x, y) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected MxxMy, got {s:?}"))?;
    let n = |t: &str| t.parse::<usize>().map_err(|_| format!("bad element count {t:?}"));
    Ok((n(x)?, n(y)?))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| config(format!("{}: {e}", path.display())))
}

fn with_path(path: &Path) -> impl Fn(FormatError) -> CliError + '_ {
    move |e| config(format!("{}: {e}", path.display()))
}

fn load_scene(path: &Path) -> Result<Scene, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
    Scene::from_json(&text).map_err(|e| config(format!("{}: {e}", path.display())))
}

fn load_drops(path: &Path) -> Result<Vec<(Vec3, Vec3)>, CliError> {
    read_drops(open(path)?).map_err(with_path(path))
}

fn load_traced(paths: &Path, drops: &Path) -> Result<Vec<Drop>, CliError> {
    let placements = load_drops(drops)?;
    let records = read_paths(open(paths)?).map_err(with_path(paths))?;
    assemble_drops(&placements, records).map_err(with_path(paths))
}

/// Writes to `path`, or standard output when `None`.
fn emit<F>(path: Option<&Path>, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), FormatError>,
{
    let result = match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| runtime(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush().map_err(FormatError::from))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w).and_then(|_| w.flush().map_err(FormatError::from))
        }
    };
    result.map_err(runtime)
}

pub fn trace_config(args: &TraceArgs) -> TraceConfig {
    TraceConfig {
        carrier_hz: args.carrier_hz,
        tx_power_dbm: args.tx_power_dbm,
        cutoff_dbm: args.cutoff_dbm,
        max_bounces: args.max_bounces,
        diffuse: match args.diffuse {
            Diffuse::Off => None,
            Diffuse::Samples(n) => Some(DiffuseConfig {
                samples_per_hit: n,
                ..DiffuseConfig::default()
            }),
        },
        seed: args.seed,
    }
}

pub fn cmd_trace(args: &TraceArgs) -> Result<(), CliError> {
    let scene = load_scene(&args.scene)?;
    let placements = load_drops(&args.drops)?;
    let cfg = trace_config(args);
    if placements.is_empty() {
        eprintln!("warning: {} lists no drops", args.drops.display());
    }
    let mut drops = Vec::with_capacity(placements.len());
    for (i, &(tx, rx)) in placements.iter().enumerate() {
        let drop = trace_drop(&scene, tx, rx, i as u32 + 1, &cfg).map_err(|e| match e {
            TraceError::InvalidConfig(_) => config(e),
            TraceError::InsideMesh(_) | TraceError::CoincidentEndpoints | TraceError::NonFinite(_) => {
                config(format!("{}: row {}: {e}", args.drops.display(), i + 2))
            }
            _ => runtime(format!("drop {}: {e}", i + 1)),
        })?;
        drops.push(drop);
    }
    emit(args.out.as_deref(), |w| write_paths(w, &drops))
}

/// Text report printed by `image`.
pub fn format_report(stats: &ImageStats) -> String {
    format!(
        "paths in: {}\nLOS skipped: {}\ndegenerate skipped: {}\ninvalid delay skipped: {}\nrejected by gamma: {}\nkept: {}",
        stats.paths_in,
        stats.los_skipped,
        stats.degenerate_skipped,
        stats.invalid_delay_skipped,
        stats.rejected_by_gamma,
        stats.kept
    )
}

pub fn cmd_image(args: &ImageArgs) -> Result<ImageStats, CliError> {
    let fusion = FusionConfig {
        gamma: args.gamma,
        drop_subset: None,
    };
    fusion.validate().map_err(config)?;
    let drops = load_traced(&args.paths, &args.drops)?;
    let (cloud, stats) = image_drops(&drops, &fusion).map_err(runtime)?;
    emit(Some(&args.out), |w| write_ply(w, &cloud))?;
    println!("{}", format_report(&stats));
    Ok(stats)
}

/// Returns the last row's Chamfer distance (NaN if that cloud was empty).
pub fn cmd_eval(args: &EvalArgs) -> Result<f64, CliError> {
    let scene = load_scene(&args.scene)?;
    let cloud = read_ply(open(&args.cloud)?).map_err(|e| config(format!("{}: {e}", args.cloud.display())))?;
    let available = match &args.drops {
        Some(p) => load_drops(p)?.len(),
        None => cloud.points().iter().map(|p| p.drop_id as usize).max().unwrap_or(0),
    };
    if available == 0 {
        return Err(config("no drops to evaluate"));
    }
    let order: Vec<u32> = (1..=available as u32).collect();
    let pairs = match &args.pairs {
        Some(Pairs(p)) => p.clone(),
        None => (1..=available).collect(),
    };
    let reference = sample_reference(&scene, args.ref_points, args.seed).map_err(config)?;
    let rows = prefix_tradeoff(&cloud, &order, &reference, &pairs).map_err(config)?;
    for r in rows.iter().filter(|r| r.chamfer_m.is_nan()) {
        eprintln!(
            "warning: no points from the first {} drop(s); chamfer recorded as nan",
            r.num_pairs
        );
    }
    emit(Some(&args.out), |w| write_tradeoff(w, &rows))?;
    let last = rows.last().map_or(f64::NAN, |r| r.chamfer_m);
    println!("final chamfer_m: {last}");
    Ok(last)
}

pub fn cmd_cir(args: &CirArgs) -> Result<(), CliError> {
    if !(args.carrier_hz > 0.0 && args.carrier_hz.is_finite()) {
        return Err(config(format!(
            "carrier frequency must be positive, got {}",
            args.carrier_hz
        )));
    }
    let wavelength = SPEED_OF_LIGHT / args.carrier_hz;
    let spacing = args.spacing.unwrap_or(wavelength / 2.0);
    let geom = |(mx, my): (usize, usize)| ArrayGeometry::new(mx, my, spacing, spacing, wavelength).map_err(config);
    let (tx_geom, rx_geom) = (geom(args.tx_array)?, geom(args.rx_array)?);
    let drops = load_traced(&args.paths, &args.drops)?;
    let mut taps = Vec::with_capacity(drops.len());
    for d in drops.iter().filter(|d| !d.paths.is_empty()) {
        taps.push((d.drop_id, synthesize_cir(d, &tx_geom, &rx_geom).map_err(runtime)?));
    }
    emit(args.out.as_deref(), |w| write_cir(w, &taps))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Trace(a) => cmd_trace(a),
        Command::Image(a) => cmd_image(a).map(|_| ()),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Cir(a) => cmd_cir(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diffuse_flag() {
        assert_eq!(parse_diffuse("off"), Ok(Diffuse::Off));
        assert_eq!(parse_diffuse("16"), Ok(Diffuse::Samples(16)));
        assert!(parse_diffuse("many").is_err());
    }

    #[test]
    fn pairs_flag() {
        assert_eq!(parse_pairs("1-3,7"), Ok(Pairs(vec![1, 2, 3, 7])));
        assert_eq!(parse_pairs("4"), Ok(Pairs(vec![4])));
        assert!(parse_pairs("3-1").is_err());
        assert!(parse_pairs("x").is_err());
    }

    #[test]
    fn array_flag() {
        assert_eq!(parse_array("4x2"), Ok((4, 2)));
        assert!(parse_array("4").is_err());
    }

    #[test]
    fn defaults_match_reference_parameters() {
        let cli = Cli::parse_from(["isac", "trace", "--scene", "s.json", "--drops", "d.csv"]);
        let Command::Trace(t) = cli.command else { panic!() };
        let cfg = trace_config(&t);
        assert_eq!(cfg.carrier_hz, 6.75e9);
        assert_eq!(cfg.tx_power_dbm, 0.0);
        assert_eq!(cfg.cutoff_dbm, -160.0);
        assert_eq!(cfg.max_bounces, 2);
        assert_eq!(cfg.diffuse.map(|d| d.samples_per_hit), Some(16));
    }
}

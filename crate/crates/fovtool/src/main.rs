//! `fovtool`: generate FoV datasets, detect top-k points of interest,
//! and benchmark the detectors.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or validation error,
//! 3 grid capacity exceeded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fovtool::datagen::{self, DatasetVariant};
use fovtool::detect::{
    detect, Algo, CisParams, DetectionReport, StopCriterion, StopKind, TopKResult,
};
use fovtool::error::{Error, Result};
use fovtool::grid::CiMatrix;
use fovtool::metrics::{run_benchmark, BenchConfig};
use fovtool::model::ModelParams;
use fovtool::store::{FovStore, TimeInterval};
use fovtool::{Mbr, Query};

#[derive(Parser)]
#[command(name = "fovtool", version, about = "Top-k POI detection from FoV metadata")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic FoV dataset from a profile file.
    Gen(GenArgs),
    /// Detect the top-k points of interest in a dataset.
    Detect(DetectArgs),
    /// Run a benchmark suite and write a results CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Profile file (`key = value` lines; see the profile docs).
    #[arg(long)]
    profile: PathBuf,
    /// Output dataset CSV.
    #[arg(long)]
    out: PathBuf,
    /// Override the profile's visible-angle mix.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Override the profile's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Copy, Clone, ValueEnum)]
enum VariantArg {
    #[value(name = "100pct60")]
    Pct100_60,
    #[value(name = "30pct160")]
    Pct30_160,
    #[value(name = "70pct160")]
    Pct70_160,
}

impl VariantArg {
    fn variant(self) -> DatasetVariant {
        match self {
            VariantArg::Pct100_60 => DatasetVariant::Directional60,
            VariantArg::Pct30_160 => DatasetVariant::Wide160Minor,
            VariantArg::Pct70_160 => DatasetVariant::Wide160Major,
        }
    }
}

#[derive(Args)]
struct QueryArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Query area as latmin,lonmin,latmax,lonmax.
    #[arg(long, value_parser = parse_area, allow_hyphen_values = true)]
    area: Mbr,
    /// Time interval as tmin,tmax (UNIX seconds, inclusive).
    #[arg(long, value_parser = parse_time, allow_hyphen_values = true)]
    time: TimeInterval,
    /// Result count.
    #[arg(long)]
    k: usize,
    /// Grid cell side length, degrees.
    #[arg(long)]
    cell: f64,
}

#[derive(Copy, Clone, ValueEnum)]
enum AlgoArg {
    Naive,
    Optimized,
    Sample,
    Cis,
}

#[derive(Copy, Clone, ValueEnum)]
enum StopArg {
    Maxci,
    Topkdist,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Detector.
    #[arg(long, value_enum)]
    algo: AlgoArg,
    /// Sampling fraction (sample detector).
    #[arg(long, default_value_t = 0.1)]
    fraction: f64,
    /// Cluster count (cis detector).
    #[arg(long, default_value_t = 6)]
    clusters: usize,
    /// Clustering sample fraction (cis detector).
    #[arg(long, default_value_t = 0.5)]
    fc: f64,
    /// Per-iteration sample fraction (cis detector).
    #[arg(long, default_value_t = 0.05)]
    fi: f64,
    /// Stopping criterion (cis detector).
    #[arg(long, value_enum, default_value = "maxci")]
    stop: StopArg,
    /// Stopping threshold: capture-intention units for maxci, meters for
    /// topkdist.
    #[arg(long)]
    threshold: Option<f64>,
    /// RNG seed for the stochastic detectors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write a normalized heatmap (.csv or .pgm, chosen by extension).
    #[arg(long)]
    heatmap: Option<PathBuf>,
    /// Write a machine-readable JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Suite file: one detector config per line, first line is the
    /// reference.
    #[arg(long)]
    suite: PathBuf,
    /// Runs per config.
    #[arg(long, default_value_t = 30)]
    repeats: usize,
    /// Base seed; run i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

fn parse_area(s: &str) -> std::result::Result<Mbr, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected latmin,lonmin,latmax,lonmax".into());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    let m = Mbr::new(nums[0], nums[2], nums[1], nums[3]);
    if !m.is_valid() {
        return Err("area has min > max or non-finite bounds".into());
    }
    Ok(m)
}

fn parse_time(s: &str) -> std::result::Result<TimeInterval, String> {
    let Some((a, b)) = s.split_once(',') else {
        return Err("expected tmin,tmax".into());
    };
    let t_min: i64 = a.trim().parse().map_err(|e: std::num::ParseIntError| e.to_string())?;
    let t_max: i64 = b.trim().parse().map_err(|e: std::num::ParseIntError| e.to_string())?;
    TimeInterval::new(t_min, t_max).map_err(|e| e.to_string())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 1,
        Error::Capacity { .. } => 3,
        Error::Parse { .. } | Error::Invalid(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.profile)
        .map_err(|e| Error::io(&args.profile, e))?;
    let mut spec = datagen::parse_profile(&text)?;
    if let Some(v) = args.variant {
        spec.profile.alpha_mix = v.variant().alpha_mix();
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let fovs = datagen::generate(&spec.profile, &spec.area, spec.n_videos, spec.seed)?;
    write_file(&args.out, &datagen::to_csv(&fovs))?;
    println!("{} rows written to {}", fovs.len(), args.out.display());
    Ok(())
}

fn build_query(args: &QueryArgs) -> Query {
    Query {
        area: args.area,
        t: args.time,
        k: args.k,
        cell_len: args.cell,
        model: ModelParams::default(),
    }
}

fn cmd_detect(args: DetectArgs) -> Result<()> {
    let query = build_query(&args.query);
    // Validate the grid before touching the dataset so capacity errors
    // surface fast.
    query.grid_spec()?;
    let algo = match args.algo {
        AlgoArg::Naive => Algo::Naive,
        AlgoArg::Optimized => Algo::Optimized,
        AlgoArg::Sample => Algo::SingleSampling {
            fraction: args.fraction,
            seed: args.seed,
        },
        AlgoArg::Cis => {
            let kind = match args.stop {
                StopArg::Maxci => StopKind::MaxCiDiff,
                StopArg::Topkdist => StopKind::TopKDistance,
            };
            let default_threshold = match kind {
                StopKind::MaxCiDiff => 0.1,
                StopKind::TopKDistance => 50.0,
            };
            Algo::Cis(CisParams {
                clusters: args.clusters,
                f_c: args.fc,
                f_i: args.fi,
                stop: StopCriterion {
                    kind,
                    threshold: args.threshold.unwrap_or(default_threshold),
                },
                expand: 1.0,
                seed: args.seed,
            })
        }
    };

    let store = FovStore::load(&args.query.data)?;
    let want_matrix = args.heatmap.is_some();
    let (result, matrix) = detect(&store, &query, &algo, want_matrix)?;

    print_top_k(&result);

    if let Some(path) = &args.heatmap {
        let matrix = matrix.expect("requested matrix is present");
        write_heatmap(path, &matrix.normalized())?;
    }
    if let Some(path) = &args.report {
        write_file(path, &report_json(&result)?)?;
    }
    Ok(())
}

fn print_top_k(result: &TopKResult) {
    println!("rank,x,y,lat,lon,score");
    for (rank, c) in result.cells.iter().enumerate() {
        println!(
            "{},{},{},{},{},{}",
            rank + 1,
            c.x,
            c.y,
            c.center.lat,
            c.center.lon,
            c.score
        );
    }
}

fn report_json(result: &TopKResult) -> Result<String> {
    #[derive(serde::Serialize)]
    struct Report<'a> {
        cells: &'a [fovtool::CellRef],
        report: &'a DetectionReport,
    }
    serde_json::to_string_pretty(&Report {
        cells: &result.cells,
        report: &result.report,
    })
    .map_err(|e| Error::invalid(format!("report serialization failed: {e}")))
}

fn write_heatmap(path: &Path, normalized: &CiMatrix) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let spec = normalized.spec;
    let out = match ext.as_str() {
        "csv" => {
            let mut s = String::from("x,y,lat,lon,value\n");
            for y in 0..spec.ydim {
                for x in 0..spec.xdim {
                    let c = spec.cell_center(x, y);
                    s.push_str(&format!(
                        "{},{},{},{},{}\n",
                        x,
                        y,
                        c.lat,
                        c.lon,
                        normalized.get(x, y)
                    ));
                }
            }
            s
        }
        "pgm" => {
            // P2, 8-bit; image rows top-down, so grid row y = 0 lands at
            // the bottom.
            let mut s = format!("P2\n{} {}\n255\n", spec.xdim, spec.ydim);
            for y in (0..spec.ydim).rev() {
                let row: Vec<String> = (0..spec.xdim)
                    .map(|x| ((255.0 * normalized.get(x, y)).round() as u32).to_string())
                    .collect();
                s.push_str(&row.join(" "));
                s.push('\n');
            }
            s
        }
        other => {
            return Err(Error::invalid(format!(
                "unsupported heatmap extension `{other}` (use .csv or .pgm)"
            )))
        }
    };
    write_file(path, &out)
}

/// Parses one suite line: a detector name followed by `key=value` options,
/// e.g. `cis clusters=6 fc=0.5 fi=0.05 stop=maxci threshold=0.1`.
fn parse_suite_line(line: &str, lineno: usize) -> Result<BenchConfig> {
    let bad = |msg: String| Error::invalid(format!("suite line {lineno}: {msg}"));
    let mut tokens = line.split_whitespace();
    let name = tokens.next().expect("caller skips blank lines");

    let mut opts: Vec<(&str, &str)> = Vec::new();
    for tok in tokens {
        let Some((k, v)) = tok.split_once('=') else {
            return Err(bad(format!("expected key=value, got `{tok}`")));
        };
        opts.push((k, v));
    }
    let numf = |k: &str, v: &str| -> Result<f64> {
        v.parse()
            .map_err(|_| bad(format!("{k} expects a number, got `{v}`")))
    };

    let algo = match name {
        "naive" | "optimized" => {
            if let Some((k, _)) = opts.first() {
                return Err(bad(format!("{name} takes no options, got `{k}`")));
            }
            if name == "naive" {
                Algo::Naive
            } else {
                Algo::Optimized
            }
        }
        "sample" => {
            let mut fraction = 0.1;
            for (k, v) in &opts {
                match *k {
                    "fraction" => fraction = numf(k, v)?,
                    other => return Err(bad(format!("unknown sample option `{other}`"))),
                }
            }
            Algo::SingleSampling { fraction, seed: 0 }
        }
        "cis" => {
            let mut p = CisParams::default();
            for (k, v) in &opts {
                match *k {
                    "clusters" => {
                        p.clusters = v
                            .parse()
                            .map_err(|_| bad(format!("clusters expects a count, got `{v}`")))?
                    }
                    "fc" => p.f_c = numf(k, v)?,
                    "fi" => p.f_i = numf(k, v)?,
                    "expand" => p.expand = numf(k, v)?,
                    "threshold" => p.stop.threshold = numf(k, v)?,
                    "stop" => {
                        p.stop.kind = match *v {
                            "maxci" => StopKind::MaxCiDiff,
                            "topkdist" => StopKind::TopKDistance,
                            other => return Err(bad(format!("unknown stop rule `{other}`"))),
                        }
                    }
                    other => return Err(bad(format!("unknown cis option `{other}`"))),
                }
            }
            Algo::Cis(p)
        }
        other => return Err(bad(format!("unknown detector `{other}`"))),
    };
    Ok(BenchConfig {
        name: line.to_string(),
        algo,
    })
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let query = build_query(&args.query);
    query.grid_spec()?;

    let text = std::fs::read_to_string(&args.suite).map_err(|e| Error::io(&args.suite, e))?;
    let mut configs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        configs.push(parse_suite_line(line, idx + 1)?);
    }
    if configs.is_empty() {
        return Err(Error::invalid("suite file contains no detector configs"));
    }
    let reference = configs[0].clone();

    let store = FovStore::load(&args.query.data)?;
    let table = run_benchmark(
        &store,
        &query,
        &reference,
        &configs,
        args.repeats,
        args.seed,
        20.0,
    )?;
    write_file(&args.out, &table.to_csv())?;

    // Per-config summary with speedup vs the reference's mean wall time.
    let mean = |name: &str, f: &dyn Fn(&fovtool::metrics::BenchRow) -> f64| -> f64 {
        let vals: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| r.detector == name)
            .map(f)
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let ref_wall = mean(&reference.name, &|r| r.wall_ms);
    println!("reference: {}", reference.name);
    println!("config | mean_wall_ms | speedup | mean_sum_min_dist_m | mean_correct_frac");
    for cfg in &configs {
        let wall = mean(&cfg.name, &|r| r.wall_ms);
        println!(
            "{} | {:.3} | {:.2} | {:.3} | {:.3}",
            cfg.name,
            wall,
            ref_wall / wall,
            mean(&cfg.name, &|r| r.sum_min_dist_m),
            mean(&cfg.name, &|r| r.correct_frac),
        );
    }
    println!("results written to {}", args.out.display());
    Ok(())
}

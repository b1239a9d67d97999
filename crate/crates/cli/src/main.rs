use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use subsar::baseline::{l1_all, nufft_all};
use subsar::composite::{combine, composite_max, composite_mean};
use subsar::config::{parse_config, Method, RunConfig};
use subsar::geometry::{plan_subapertures, ComplexImage, SceneGrid};
use subsar::io;
use subsar::metrics::{log_histogram, region_variance, time_run, to_db, RegionSpec, TimedRun};
use subsar::regularizers::RegularizerKind;
use subsar::simulator::{make_scene, synthesize};
use subsar::solver::run_all;
use subsar::Error;

#[derive(Parser)]
#[command(name = "subsar", version, about = "Sub-aperture SAR image formation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a phase history and its ground-truth scene.
    Simulate(Common),
    /// Form per-window images from a phase history.
    Form {
        #[command(flatten)]
        common: Common,
        /// Phase-history file.
        input: PathBuf,
    },
    /// Combine window posteriors or images into composites.
    Composite {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Region variance, log-magnitude histograms and timings as CSV.
    Stats {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Pixel rectangle `x0,y0,w,h`.
        #[arg(long, value_parser = parse_region)]
        region: RegionSpec,
        #[arg(long, default_value_t = 100)]
        bins: usize,
        /// `timings.csv` files written by `form`.
        #[arg(long)]
        timings: Vec<PathBuf>,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    regularizer: Option<RegularizerKind>,
    #[arg(long)]
    span: Option<f64>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::Invalid { .. } | Error::EmptyWindow { .. } | Error::SizeGuard { .. } => 2,
            Error::Io(_) => 3,
            Error::Malformed { .. } | Error::Truncated { .. } => 4,
            Error::Version { .. } => 5,
            Error::Dimension { .. } | Error::OutOfBand { .. } => 6,
            Error::NonFinite(_) => 7,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

fn csv_failure(path: &Path, e: csv::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = Result<T, Failure>;

fn parse_region(s: &str) -> Result<RegionSpec, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [x0, y0, w, h] => Ok(RegionSpec::new(x0, y0, w, h)),
        _ => Err("expected x0,y0,w,h".to_string()),
    }
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| io_failure(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn with_file<E: Into<Failure>>(path: &Path, e: E) -> Failure {
    let mut f = e.into();
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

/// Load the config (or defaults) and apply flag overrides.
fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            parse_config(&text).map_err(|e| with_file(path, e))?
        }
        None => RunConfig::default(),
    };
    let f = &mut cfg.form;
    if let Some(v) = common.method {
        f.method = v;
    }
    if let Some(v) = common.regularizer {
        f.regularizer = v;
    }
    if let Some(v) = common.span {
        f.span_deg = v;
    }
    if let Some(v) = common.overlap {
        f.overlap_deg = v;
    }
    if let Some(v) = common.eps {
        f.eps = v;
    }
    if let Some(v) = common.lambda {
        f.l1.lambda = v;
    }
    if let Some(v) = common.workers {
        f.workers = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = &common.out {
        cfg.out = Some(v.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(dir: Option<&Path>) -> CliResult<PathBuf> {
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    Ok(dir)
}

fn config_out(cfg: &RunConfig) -> CliResult<PathBuf> {
    out_dir(cfg.out.as_deref().map(Path::new))
}

/// Record the resolved configuration next to the outputs.
fn save_config(dir: &Path, cfg: &RunConfig) -> CliResult<()> {
    let text = toml::to_string(cfg).map_err(|e| Failure {
        code: 1,
        message: format!("serializing config: {e}"),
    })?;
    write(&dir.join("config.toml"), text.as_bytes())
}

/// PGM preview; an all-zero image renders black.
fn write_preview(path: &Path, img: &ComplexImage) -> CliResult<()> {
    let db = if img.max_magnitude() > 0.0 {
        to_db(img)?
    } else {
        vec![subsar::metrics::DB_FLOOR; img.values().len()]
    };
    let mut buf = Vec::new();
    io::write_pgm(&mut buf, img.grid(), &db)?;
    write(path, &buf)
}

fn write_real_preview(path: &Path, grid: &SceneGrid, values: &[f64]) -> CliResult<()> {
    let as_complex = ComplexImage::new(*grid, values.iter().map(|v| subsar::Complex64::new(*v, 0.0)).collect())?;
    write_preview(path, &as_complex)
}

fn simulate(common: &Common) -> CliResult<()> {
    let cfg = load_config(common)?;
    let dir = config_out(&cfg)?;
    let scene = cfg.scene()?;
    let ph = synthesize(&scene, &cfg.acquisition()?)?;
    let mut buf = Vec::new();
    io::write_phase_history(&mut buf, &ph)?;
    write(&dir.join("phase_history.sph"), &buf)?;
    let truth = make_scene(&scene, None)?;
    let mut buf = Vec::new();
    io::write_image(&mut buf, &truth, &[("role", "truth".to_string())])?;
    write(&dir.join("truth.img"), &buf)?;
    write_preview(&dir.join("truth.pgm"), &truth)?;
    save_config(&dir, &cfg)?;
    eprintln!("simulate: {} pulses x {} samples -> {}", ph.pulses(), ph.samples_per_pulse(), dir.display());
    Ok(())
}

fn form(common: &Common, input: &Path) -> CliResult<()> {
    let cfg = load_config(common)?;
    let dir = config_out(&cfg)?;
    let ph = io::read_phase_history(&read(input)?).map_err(|e| with_file(input, e))?;
    let grid = cfg.grid()?;
    let f = &cfg.form;
    let plan = plan_subapertures(ph.azimuths(), f.span_deg, f.overlap_deg)?;
    let workers = if f.workers == 0 { rayon_threads() } else { f.workers };
    let method = f.method.to_string();
    let (images, timing): (Vec<ComplexImage>, TimedRun) = match f.method {
        Method::Nufft => {
            let (r, t) = time_run(&method, workers, || nufft_all(&ph, &plan, grid, f.workers));
            (r?, t)
        }
        Method::L1 => {
            let (r, t) = time_run(&method, workers, || l1_all(&ph, &plan, grid, f.regularizer, &f.l1, f.workers));
            (r?, t)
        }
        Method::Bcd => {
            let solver = f.solver(cfg.seed);
            let (r, t) = time_run(&method, workers, || run_all(&ph, &plan, grid, f.regularizer, &solver, f.workers));
            let posts = r?;
            for p in &posts {
                let mut buf = Vec::new();
                io::write_posterior(&mut buf, p)?;
                write(&dir.join(format!("window_{:03}.post", p.window)), &buf)?;
            }
            (posts.into_iter().map(|p| p.mean).collect(), t)
        }
    };
    for (img, w) in images.iter().zip(&plan.windows) {
        if f.method != Method::Bcd {
            let mut buf = Vec::new();
            io::write_image(&mut buf, img, &[("method", method.clone()), ("window", w.index.to_string())])?;
            write(&dir.join(format!("window_{:03}.img", w.index)), &buf)?;
        }
        write_preview(&dir.join(format!("window_{:03}.pgm", w.index)), img)?;
    }
    let path = dir.join("timings.csv");
    let mut csv = csv::Writer::from_path(&path).map_err(|e| csv_failure(&path, e))?;
    csv.serialize(&timing).map_err(|e| csv_failure(&path, e))?;
    csv.flush().map_err(|e| io_failure(&path, e))?;
    save_config(&dir, &cfg)?;
    if !plan.uncovered.is_empty() {
        eprintln!("form: {} pulses fall outside every window", plan.uncovered.len());
    }
    eprintln!("form: {method} on {} windows in {:.2} s -> {}", plan.len(), timing.seconds, dir.display());
    Ok(())
}

fn rayon_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn composite(out: Option<&Path>, inputs: &[PathBuf]) -> CliResult<()> {
    let dir = out_dir(out)?;
    let mut posts = Vec::new();
    let mut images = Vec::new();
    for path in inputs {
        let bytes = read(path)?;
        let container = io::parse_container(&bytes).map_err(|e| with_file(path, e))?;
        match container.kind.as_str() {
            io::KIND_POSTERIOR => posts.push(io::read_posterior(&bytes).map_err(|e| with_file(path, e))?),
            io::KIND_IMAGE => images.push(io::read_image(&bytes).map_err(|e| with_file(path, e))?.0),
            other => {
                return Err(with_file(path, Error::Malformed {
                    field: "kind".to_string(),
                    reason: format!("expected posterior or image, found {other}"),
                }))
            }
        }
    }
    if !posts.is_empty() && !images.is_empty() {
        return Err(Failure {
            code: 2,
            message: "composite inputs must be all posteriors or all images".to_string(),
        });
    }
    let save_complex = |name: &str, img: &ComplexImage| -> CliResult<()> {
        let mut buf = Vec::new();
        io::write_image(&mut buf, img, &[("composite", name.to_string())])?;
        write(&dir.join(format!("{name}.img")), &buf)?;
        write_preview(&dir.join(format!("{name}.pgm")), img)
    };
    let save_real = |name: &str, grid: &SceneGrid, values: &[f64]| -> CliResult<()> {
        let mut buf = Vec::new();
        io::write_real_image(&mut buf, grid, values, &[("composite", name.to_string())])?;
        write(&dir.join(format!("{name}.rimg")), &buf)?;
        write_real_preview(&dir.join(format!("{name}.pgm")), grid, values)
    };
    if posts.is_empty() {
        let refs: Vec<&ComplexImage> = images.iter().collect();
        save_complex("max", &composite_max(&refs)?)?;
        let zeros = vec![0.0; images[0].values().len()];
        let diags: Vec<&[f64]> = images.iter().map(|_| zeros.as_slice()).collect();
        save_complex("mean", &composite_mean(&refs, &diags)?.0)?;
        eprintln!("composite: max, mean of {} images -> {}", images.len(), dir.display());
        return Ok(());
    }
    let result = combine(&posts)?;
    save_complex("max", &result.max_image)?;
    save_complex("mean", &result.mean_image)?;
    let grid = *result.mean_image.grid();
    save_real("std", &grid, result.std_image.values())?;
    match &result.alpha_image {
        Some(alpha) => save_real("alpha", &grid, alpha.values())?,
        None => eprintln!("composite: alpha skipped (TV posteriors index transform coefficients)"),
    }
    eprintln!("composite: {} windows -> {}", result.windows, dir.display());
    Ok(())
}

#[derive(Serialize)]
struct VarianceRow<'a> {
    file: &'a str,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    variance: f64,
}

#[derive(Serialize)]
struct HistogramRow<'a> {
    file: &'a str,
    /// Lower edge in log10 units; empty for the zero-magnitude bin.
    lo: Option<f64>,
    hi: Option<f64>,
    count: usize,
}

fn stats(out: Option<&Path>, region: &RegionSpec, bins: usize, timings: &[PathBuf], inputs: &[PathBuf]) -> CliResult<()> {
    let dir = out_dir(out)?;
    let var_path = dir.join("variances.csv");
    let hist_path = dir.join("histograms.csv");
    let mut variances = csv::Writer::from_path(&var_path).map_err(|e| csv_failure(&var_path, e))?;
    let mut histograms = csv::Writer::from_path(&hist_path).map_err(|e| csv_failure(&hist_path, e))?;
    for path in inputs {
        let (img, _) = io::read_image(&read(path)?).map_err(|e| with_file(path, e))?;
        let name = path.display().to_string();
        let variance = region_variance(&img, region).map_err(|e| with_file(path, e))?;
        variances
            .serialize(VarianceRow {
                file: &name,
                x0: region.x0,
                y0: region.y0,
                w: region.w,
                h: region.h,
                variance,
            })
            .map_err(|e| csv_failure(&var_path, e))?;
        let hist = log_histogram(&img, bins, None)?;
        let underflow = HistogramRow {
            file: &name,
            lo: None,
            hi: None,
            count: hist.underflow,
        };
        histograms.serialize(underflow).map_err(|e| csv_failure(&hist_path, e))?;
        for (i, count) in hist.counts.iter().enumerate() {
            let row = HistogramRow {
                file: &name,
                lo: Some(hist.edges[i]),
                hi: Some(hist.edges[i + 1]),
                count: *count,
            };
            histograms.serialize(row).map_err(|e| csv_failure(&hist_path, e))?;
        }
    }
    variances.flush().map_err(|e| io_failure(&var_path, e))?;
    histograms.flush().map_err(|e| io_failure(&hist_path, e))?;
    if !timings.is_empty() {
        let mut runs: Vec<TimedRun> = Vec::new();
        for path in timings {
            let mut reader = csv::Reader::from_path(path).map_err(|e| csv_failure(path, e))?;
            for row in reader.deserialize() {
                runs.push(row.map_err(|e| csv_failure(path, e))?);
            }
        }
        let report = subsar::metrics::timing_report(&runs)?;
        let path = dir.join("timings.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_failure(&path, e))?;
        for r in &report.rows {
            w.serialize(r).map_err(|e| csv_failure(&path, e))?;
        }
        w.flush().map_err(|e| io_failure(&path, e))?;
    }
    eprintln!("stats: {} images -> {}", inputs.len(), dir.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(common) => simulate(common),
        Command::Form { common, input } => form(common, input),
        Command::Composite { out, inputs } => composite(out.as_deref(), inputs),
        Command::Stats {
            out,
            region,
            bins,
            timings,
            inputs,
        } => stats(out.as_deref(), region, *bins, timings, inputs),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

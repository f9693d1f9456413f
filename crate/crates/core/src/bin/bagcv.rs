use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bagcv::amse::{calibrate_rv, CalibrationReport};
use bagcv::cli::{
    density_grid, ingest, run_m0, run_select, ExitStatus, Ingested, M0CommandReport, M0Report, SelectOptions, VERSION,
};
use bagcv::cv::{cv_minimize, Interval};
use bagcv::experiments::{
    run_ise_study, run_sampling_study, run_table1, run_timing_bench, write_bench_csv, write_table1_csv, BenchOptions,
    StudySpec,
};
use bagcv::{Error, Result};

#[derive(Parser)]
#[command(
    name = "bagcv",
    version,
    about = "Bagged cross-validation bandwidth selection for kernel density estimation"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bagged CV bandwidth; estimates m first when --m is omitted.
    Select(SelectArgs),
    /// Estimate the AMSE-optimal subsample size.
    M0(SelectArgs),
    /// Evaluate the estimate on a 512-point grid (CSV).
    Density(DensityArgs),
    /// Run a simulation study described by a JSON config (CSV).
    Sim(SimArgs),
    /// Time full-sample binned CV against bagged CV (CSV).
    Bench(BenchArgs),
    /// Monte Carlo cross-check of R(V) (JSON).
    CalibrateRv(CalibrateArgs),
    /// Bias constants and critical subsample size for the reference densities (CSV).
    Table1(OutputArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Data file: one value per line, or CSV with --column.
    #[arg(long)]
    input: PathBuf,
    /// Column name in a CSV file with a header row.
    #[arg(long)]
    column: Option<String>,
    /// Add Uniform(-J, J) noise to every observation to break ties.
    #[arg(long, value_name = "J")]
    jitter: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Subsample size.
    #[arg(long)]
    m: Option<usize>,
    /// Number of subsamples.
    #[arg(long = "N", default_value_t = 100)]
    big_n: usize,
    /// Number of pilot subsamples for m0 estimation.
    #[arg(long, default_value_t = 50)]
    s: usize,
    /// Pilot subsample size (default max(500, n/100)).
    #[arg(long)]
    r: Option<usize>,
    /// Bins per subsample (default m).
    #[arg(long)]
    nb: Option<usize>,
    /// Exact O(m^2) CV on each subsample instead of binned.
    #[arg(long)]
    exact: bool,
    /// Lower end of the bandwidth search interval.
    #[arg(long, requires = "upper")]
    lower: Option<f64>,
    /// Upper end of the bandwidth search interval.
    #[arg(long, requires = "lower")]
    upper: Option<f64>,
    /// Omit elapsed_seconds so that reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    select: SelectArgs,
    /// Bandwidth to use; otherwise it is selected as by `select`.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Select h by full-sample CV instead of bagging.
    #[arg(long, conflicts_with = "bandwidth")]
    full_cv: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimKind {
    Sampling,
    Ise,
}

#[derive(Args)]
struct SimArgs {
    /// JSON study description.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value = "sampling")]
    kind: SimKind,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [100_000usize, 1_000_000])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long = "N", default_value_t = 500)]
    big_n: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
    /// Replicates per sample size (at least 500).
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    /// Append calibration_* keys to this kernel constants file.
    #[arg(long)]
    constants_file: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: serde::Serialize>(value: &T, path: &Option<PathBuf>) -> Result<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

impl SelectArgs {
    fn load(&self) -> Result<Ingested> {
        let d = ingest(
            &self.input.input,
            self.input.column.as_deref(),
            self.input.jitter,
            self.input.seed,
        )?;
        if d.ties > 0 && d.jitter.is_none() {
            eprintln!("warning: {} tied value(s); consider --jitter", d.ties);
        }
        Ok(d)
    }

    fn options(&self) -> Result<SelectOptions> {
        let interval = match (self.lower, self.upper) {
            (Some(lo), Some(hi)) => Some(Interval::new(lo, hi)?),
            _ => None,
        };
        Ok(SelectOptions {
            m: self.m,
            big_n: self.big_n,
            s: self.s,
            r: self.r,
            nb_sub: self.nb,
            binned: !self.exact,
            interval,
            seed: self.input.seed,
        })
    }
}

fn select(args: &SelectArgs) -> Result<ExitStatus> {
    let data = args.load()?;
    let (mut report, bag) = run_select(&data, &args.options()?)?;
    if args.no_timing {
        report.elapsed_seconds = None;
    }
    write_json(&report, &args.output.output)?;
    eprintln!(
        "h = {:.6} (n = {}, m = {}, N = {}, boundary hits {}, {:.2} s)",
        report.bandwidth, report.n, report.m, report.big_n, report.boundary_hits, bag.elapsed_seconds
    );
    if report.unreliable() {
        eprintln!(
            "error: {} of {} subsample minimisers on the search boundary; widen --lower/--upper or raise --m",
            report.boundary_hits, report.big_n
        );
        return Ok(ExitStatus::Numerical);
    }
    Ok(ExitStatus::Success)
}

fn m0(args: &SelectArgs) -> Result<ExitStatus> {
    let data = args.load()?;
    let start = Instant::now();
    let est = run_m0(&data, &args.options()?)?;
    let report = M0CommandReport {
        version: VERSION,
        command: "m0",
        n: data.sample.len(),
        ties: data.ties,
        jitter: data.jitter,
        seed: args.input.seed,
        big_n: args.big_n,
        m0: M0Report::from(&est),
        elapsed_seconds: (!args.no_timing).then(|| start.elapsed().as_secs_f64()),
    };
    write_json(&report, &args.output.output)?;
    for w in &est.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("m0 = {} (boundary: {})", est.model.m_hat, est.model.boundary);
    Ok(ExitStatus::Success)
}

fn density(args: &DensityArgs) -> Result<ExitStatus> {
    let data = args.select.load()?;
    let h = match args.bandwidth {
        Some(h) => h,
        None if args.full_cv => cv_minimize(&data.sample, args.select.options()?.interval)?.h_opt,
        None => run_select(&data, &args.select.options()?)?.0.bandwidth,
    };
    let grid = density_grid(&data.sample, h)?;
    let mut out = open_output(&args.select.output.output)?;
    writeln!(out, "x,density")?;
    for (x, y) in grid {
        writeln!(out, "{x},{y}")?;
    }
    out.flush()?;
    eprintln!("h = {h:.6}");
    Ok(ExitStatus::Success)
}

fn sim(args: &SimArgs) -> Result<ExitStatus> {
    let spec = StudySpec::from_json(&std::fs::read_to_string(&args.config)?)?;
    let out = open_output(&args.output.output)?;
    match args.kind {
        SimKind::Sampling => {
            let study = run_sampling_study(&spec)?;
            study.write_csv(out)?;
            eprintln!("{} records, {} failures", study.records.len(), study.failures.len());
        }
        SimKind::Ise => {
            let study = run_ise_study(&spec)?;
            study.write_csv(out)?;
            for s in &study.summary {
                eprintln!(
                    "m = {}: mean ISE ratio {:.4}, below one {:.3}",
                    s.m, s.mean_ratio, s.proportion_below_one
                );
            }
        }
    }
    Ok(ExitStatus::Success)
}

fn bench(args: &BenchArgs) -> Result<ExitStatus> {
    let opts = BenchOptions {
        repeats: args.repeats,
        seed: args.seed,
        ..BenchOptions::default()
    };
    let rows = run_timing_bench(&args.n, args.m, args.big_n, opts)?;
    write_bench_csv(&rows, open_output(&args.output.output)?)?;
    Ok(ExitStatus::Success)
}

fn append_calibration(path: &Path, report: &CalibrationReport) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let mut kept: Vec<String> = text
        .lines()
        .filter(|l| !l.starts_with("calibration_"))
        .map(str::to_string)
        .collect();
    let sizes: Vec<String> = report.levels.iter().map(|l| l.m.to_string()).collect();
    kept.extend([
        format!("calibration_a_spread={}", report.a_spread),
        format!("calibration_d1_m_hat={}", report.d1_m_hat),
        "calibration_density=std_normal".to_string(),
        format!("calibration_replicates={}", report.levels[0].replicates),
        format!("calibration_r_v={}", report.r_v),
        format!("calibration_seed={}", report.seed),
        format!("calibration_sizes={}", sizes.join(",")),
    ]);
    std::fs::write(path, kept.join("\n") + "\n")?;
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> Result<ExitStatus> {
    let report = calibrate_rv(args.seed, args.replicates)?;
    write_json(&report, &args.output.output)?;
    if let Some(path) = &args.constants_file {
        append_calibration(path, &report)?;
    }
    eprintln!(
        "R(V) = {:.6} (reference {:.6}); D1 m = {} vs {}",
        report.r_v, report.r_v_reference, report.d1_m_hat, report.d1_target
    );
    Ok(ExitStatus::Success)
}

fn table1(args: &OutputArgs) -> Result<ExitStatus> {
    let rows = run_table1();
    for r in rows.iter().filter_map(|r| r.error.as_ref().map(|e| (&r.density, e))) {
        eprintln!("warning: {}: {}", r.0, r.1);
    }
    write_table1_csv(&rows, open_output(&args.output)?)?;
    Ok(ExitStatus::Success)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(ExitStatus::Usage as u8);
        }
    }
    let result = match &cli.command {
        Command::Select(a) => select(a),
        Command::M0(a) => m0(a),
        Command::Density(a) => density(a),
        Command::Sim(a) => sim(a),
        Command::Bench(a) => bench(a),
        Command::CalibrateRv(a) => calibrate(a),
        Command::Table1(a) => table1(a),
    };
    let status = result.unwrap_or_else(|e: Error| {
        eprintln!("error: {e}");
        ExitStatus::of(&e)
    });
    ExitCode::from(status as u8)
}

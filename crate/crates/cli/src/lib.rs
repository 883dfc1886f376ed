//! Command-line front end. Each subcommand builds library inputs from flags,
//! calls the library, and writes the result; nothing numeric happens here.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use circulaw::ensemble::{sample_matrix, EnsembleConfig, EntryDistribution};
use circulaw::experiments::{
    report_to_csv, report_to_json, run_with_threads, ExperimentKind, ExperimentReport, ExperimentSpec, RadiusSpec,
    ReportFormat,
};
use circulaw::linalg::eigenvalues;
use circulaw::{Complex64, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const THREADS_ENV: &str = "CIRCULAW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "circulaw", version, about = "Random non-Hermitian matrix experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one matrix and write its entries as `j,k,re,im`.
    Sample(SampleArgs),
    /// Eigenvalues of one matrix as `re,im`.
    Esd(SampleArgs),
    /// Distance between singular values of `X - zI` and the limit law.
    Svlaw(SvLawArgs),
    /// Log-potential estimates against the uniform-disc potential.
    Potential(PotentialArgs),
    /// Tail frequencies of the smallest singular value.
    Minsv(MinSvArgs),
    /// Run a JSON experiment spec.
    Report(ReportArgs),
    /// Scatter plot of eigenvalues from a `re,im` CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DistName {
    Gaussian,
    Cgaussian,
    Rademacher,
    Crademacher,
    Uniform,
}

impl DistName {
    pub fn law(self) -> EntryDistribution {
        match self {
            DistName::Gaussian => EntryDistribution::RealGaussian,
            DistName::Cgaussian => EntryDistribution::ComplexGaussian,
            DistName::Rademacher => EntryDistribution::Rademacher,
            DistName::Crademacher => EntryDistribution::ComplexRademacher,
            DistName::Uniform => EntryDistribution::UniformSymmetric,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatName {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub n: usize,
    /// Sparsity `p_n`; defaults to 1.
    #[arg(long, conflicts_with = "theta")]
    pub p: Option<f64>,
    /// Sparse regime `p_n = n^-theta`.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub dist: DistName,
    #[arg(long, required = true)]
    pub seed: Option<u64>,
}

impl EnsembleArgs {
    pub fn config(&self) -> circulaw::Result<EnsembleConfig> {
        let dist = self.dist.law();
        let seed = self.seed.ok_or_else(|| Error::Usage("--seed is required".into()))?;
        match self.theta {
            Some(theta) => EnsembleConfig::sparse(self.n, theta, dist, seed),
            None => EnsembleConfig::with_p(self.n, self.p.unwrap_or(1.0), dist, seed),
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report format; inferred from the `--out` extension when absent.
    #[arg(long, value_enum)]
    pub format: Option<FormatName>,
}

impl OutputArgs {
    pub fn resolved_format(&self) -> ReportFormat {
        match (self.format, &self.out) {
            (Some(FormatName::Csv), _) => ReportFormat::Csv,
            (Some(FormatName::Json), _) => ReportFormat::Json,
            (None, Some(path)) => ReportFormat::from_path(path),
            (None, None) => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SvLawArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Shift points `a+bi`; repeat the flag for several.
    #[arg(long, value_parser = parse_complex, required = true)]
    pub z: Vec<Complex64>,
    /// Smoothing radius or `auto`.
    #[arg(long, value_parser = parse_radius, default_value = "0")]
    pub r: RadiusSpec,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PotentialArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, value_parser = parse_complex, required = true)]
    pub z: Vec<Complex64>,
    #[arg(long, value_parser = parse_radius, default_value = "auto")]
    pub r: RadiusSpec,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Lower cut exponent for the smallest singular value.
    #[arg(long = "B", default_value_t = 3.0)]
    pub b_exponent: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct MinSvArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, value_parser = parse_complex, default_value = "0+0i")]
    pub z: Vec<Complex64>,
    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',', required = true)]
    pub thresholds: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long = "B", default_value_t = 3.0)]
    pub b_exponent: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON experiment spec.
    pub spec: PathBuf,
    /// Overrides the spec's output path.
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV with columns `re,im`.
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leave out the unit circle.
    #[arg(long)]
    pub no_circle: bool,
}

/// Parses `a+bi`, `a-bi`, `bi` or `a`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let bad = || format!("{s:?} is not of the form a+bi");
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        other => other,
    };
    let re: f64 = re.parse().map_err(|_| bad())?;
    let im: f64 = im.parse().map_err(|_| bad())?;
    Ok(Complex64::new(re, im))
}

pub fn parse_radius(s: &str) -> Result<RadiusSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Worker cap from `CIRCULAW_THREADS`; unset or empty means all cores.
pub fn threads_from_env() -> circulaw::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(Error::Usage(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Usage(_) | Error::Domain(_) => EXIT_USAGE,
        Error::Numeric(_) | Error::Estimation(_) => EXIT_NUMERIC,
        Error::Io { .. } | Error::Format { .. } => EXIT_IO,
    }
}

fn emit(out: Option<&Path>, text: &str) -> circulaw::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
    }
}

fn csv_text<I: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: I) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
}

fn num(v: f64) -> String {
    circulaw::experiments::format_value(v)
}

/// `j,k,re,im` rows of a matrix, row-major.
pub fn matrix_csv(entries: &circulaw::linalg::CMatrix) -> String {
    let n = entries.cols();
    csv_text(
        &["j", "k", "re", "im"],
        entries
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, v)| vec![(i / n).to_string(), (i % n).to_string(), num(v.re), num(v.im)]),
    )
}

/// `re,im` rows.
pub fn spectrum_csv(values: &[Complex64]) -> String {
    csv_text(&["re", "im"], values.iter().map(|v| vec![num(v.re), num(v.im)]))
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => report_to_csv(report),
        ReportFormat::Json => report_to_json(report),
    }
}

/// Points from a CSV whose header contains `re` and `im`.
pub fn read_points(path: &Path) -> circulaw::Result<Vec<Complex64>> {
    let format_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| format_err(format!("line 1: {e}")))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| format_err(format!("line 1: missing column {name:?}")))
    };
    let (re_col, im_col) = (column("re")?, column("im")?);
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            format_err(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |c: usize| -> circulaw::Result<f64> {
            let text = record.get(c).unwrap_or("");
            text.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format_err(format!("line {line}: malformed number {text:?}")))
        };
        points.push(Complex64::new(field(re_col)?, field(im_col)?));
    }
    Ok(points)
}

const SVG_SIZE: f64 = 480.0;
const SVG_MARGIN: f64 = 16.0;
const MARKER: f64 = 3.0;

/// Standalone SVG scatter. The view is symmetric about the origin and
/// always contains the unit disc, so the circle's radius maps `|z| = 1`.
pub fn render_svg(points: &[Complex64], unit_circle: bool) -> String {
    let extent = points.iter().map(|p| p.re.abs().max(p.im.abs())).fold(1.1f64, f64::max);
    let half = SVG_SIZE / 2.0;
    let scale = (half - SVG_MARGIN) / extent;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#,
        s = SVG_SIZE
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M {m} {h} H {e} M {h} {m} V {e}" stroke="gray" stroke-width="0.5"/>"#,
        m = SVG_MARGIN,
        h = half,
        e = SVG_SIZE - SVG_MARGIN
    );
    if unit_circle {
        let _ = writeln!(
            svg,
            r#"<circle cx="{half:.3}" cy="{half:.3}" r="{:.3}" fill="none" stroke="red" stroke-width="1"/>"#,
            scale
        );
    }
    let _ = writeln!(svg, r#"<g fill="navy">"#);
    for p in points {
        let x = half + scale * p.re - MARKER / 2.0;
        let y = half - scale * p.im - MARKER / 2.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.3}" y="{y:.3}" width="{MARKER}" height="{MARKER}"/>"#
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

pub fn plot_spectrum(input: &Path, output: Option<&Path>, unit_circle: bool) -> circulaw::Result<()> {
    let points = read_points(input)?;
    emit(output, &render_svg(&points, unit_circle))
}

fn run_spec(spec: &ExperimentSpec, output: &OutputArgs) -> circulaw::Result<()> {
    spec.validate()?;
    let report = run_with_threads(spec, threads_from_env()?)?;
    if let Some(t) = report.wall_time_secs {
        eprintln!("{:?}: {} rows in {t:.2}s", spec.kind, report.rows.len());
    }
    let out = output.out.clone().or_else(|| spec.output.clone());
    let format = match (output.format, &out) {
        (None, Some(path)) => ReportFormat::from_path(path),
        _ => output.resolved_format(),
    };
    emit(out.as_deref(), &render_report(&report, format))
}

pub fn execute(cli: Cli) -> circulaw::Result<()> {
    match cli.command {
        Command::Sample(args) => {
            let sample = sample_matrix(&args.ensemble.config()?, args.trial)?;
            emit(args.out.as_deref(), &matrix_csv(sample.entries()))
        }
        Command::Esd(args) => {
            let sample = sample_matrix(&args.ensemble.config()?, args.trial)?;
            emit(args.out.as_deref(), &spectrum_csv(&eigenvalues(&sample)?.values))
        }
        Command::Svlaw(args) => {
            let mut spec = ExperimentSpec::new(ExperimentKind::SvLaw, args.ensemble.config()?, args.trials);
            spec.z_points = args.z;
            spec.r = args.r;
            run_spec(&spec, &args.output)
        }
        Command::Potential(args) => {
            let mut spec = ExperimentSpec::new(ExperimentKind::Potential, args.ensemble.config()?, args.trials);
            spec.z_points = args.z;
            spec.r = args.r;
            spec.b_exponent = args.b_exponent;
            run_spec(&spec, &args.output)
        }
        Command::Minsv(args) => {
            let mut spec = ExperimentSpec::new(ExperimentKind::MinSv, args.ensemble.config()?, args.trials);
            spec.z_points = args.z;
            spec.thresholds = args.thresholds;
            spec.b_exponent = args.b_exponent;
            run_spec(&spec, &args.output)
        }
        Command::Report(args) => run_spec(&ExperimentSpec::load(&args.spec)?, &args.output),
        Command::Plot(args) => plot_spectrum(&args.input, args.out.as_deref(), !args.no_circle),
    }
}

/// Parses `argv`, runs, and maps the outcome to an exit code. Diagnostics go
/// to standard error.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("circulaw: {e}");
            exit_code(&e)
        }
    }
}

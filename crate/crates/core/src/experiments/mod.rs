//! Config-driven experiment campaigns and their reports.
//!
//! Every trial is an independent task keyed by its index; parallel results
//! are gathered by index and folded sequentially, so a report depends only
//! on its [`ExperimentSpec`], never on the worker count.

mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use report::{
    format_value, read_report_csv, read_report_json, report_to_csv, report_to_json, write_report, ExperimentReport,
    ReportFormat, ReportMetadata, ReportRow,
};

use crate::ensemble::{sample_matrix, smoothing_shift, EnsembleConfig, StreamState};
use crate::error::{Error, Result};
use crate::invertibility::{extreme_singular_values, norm_bound, tail_table};
use crate::limit::{disc_potential, potential_from_law, LimitLaw};
use crate::linalg::{eigenvalues, shift, singular_values, SingularSpectrum};
use crate::measures::{
    ks_distance, log_potential_empirical, mean_and_jackknife, radial_angular_cdfs, sv_squared_cdf, EmpiricalCdf,
    TruncationRule,
};

/// Fixed outlier radius for circular-law reports, next to `1 + 3 n^{-1/4}`.
pub const OUTLIER_RADIUS: f64 = 1.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentKind {
    CircularLaw,
    SvLaw,
    Potential,
    MinSv,
    MaxSv,
    TailIndex,
}

/// Smoothing radius: a number, or `"auto"` for `1/sqrt(n p_n)`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawRadius", into = "RawRadius")]
pub enum RadiusSpec {
    #[default]
    Zero,
    Auto,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawRadius {
    Number(f64),
    Word(String),
}

impl TryFrom<RawRadius> for RadiusSpec {
    type Error = Error;

    fn try_from(raw: RawRadius) -> Result<Self> {
        match raw {
            RawRadius::Number(0.0) => Ok(RadiusSpec::Zero),
            RawRadius::Number(r) if r > 0.0 && r.is_finite() => Ok(RadiusSpec::Value(r)),
            RawRadius::Number(r) => Err(Error::Config(format!("smoothing radius {r} must be finite and >= 0"))),
            RawRadius::Word(w) if w == "auto" => Ok(RadiusSpec::Auto),
            RawRadius::Word(w) => Err(Error::Config(format!(
                "smoothing radius {w:?} is neither a number nor \"auto\""
            ))),
        }
    }
}

impl From<RadiusSpec> for RawRadius {
    fn from(r: RadiusSpec) -> Self {
        match r {
            RadiusSpec::Zero => RawRadius::Number(0.0),
            RadiusSpec::Auto => RawRadius::Word("auto".into()),
            RadiusSpec::Value(v) => RawRadius::Number(v),
        }
    }
}

impl std::str::FromStr for RadiusSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(RadiusSpec::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Usage(format!("radius {s:?} is neither a number nor \"auto\"")))?;
        RadiusSpec::try_from(RawRadius::Number(v)).map_err(|e| Error::Usage(e.to_string()))
    }
}

impl RadiusSpec {
    pub fn resolve(&self, config: &EnsembleConfig) -> f64 {
        match *self {
            RadiusSpec::Zero => 0.0,
            RadiusSpec::Auto => config.auto_smoothing_radius(),
            RadiusSpec::Value(v) => v,
        }
    }
}

fn default_b() -> f64 {
    3.0
}

fn default_c() -> f64 {
    1.0
}

/// A JSON experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub ensemble: EnsembleConfig,
    pub trials: usize,
    /// Complex points as `[re, im]` pairs.
    #[serde(default)]
    pub z_points: Vec<Complex64>,
    #[serde(default)]
    pub r: RadiusSpec,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    /// Matrix sizes to sweep; empty means `ensemble.n` alone.
    #[serde(default)]
    pub n_ladder: Vec<usize>,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default, rename = "R")]
    pub radius_cut: Option<f64>,
    #[serde(default = "default_b")]
    pub b_exponent: f64,
    #[serde(default = "default_c")]
    pub c_cut: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, ensemble: EnsembleConfig, trials: usize) -> Self {
        Self {
            kind,
            ensemble,
            trials,
            z_points: Vec::new(),
            r: RadiusSpec::Zero,
            thresholds: Vec::new(),
            n_ladder: Vec::new(),
            q: None,
            radius_cut: None,
            b_exponent: default_b(),
            c_cut: default_c(),
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        let needs_z = matches!(
            self.kind,
            ExperimentKind::SvLaw | ExperimentKind::Potential | ExperimentKind::MinSv
        );
        if needs_z && self.z_points.is_empty() {
            return Err(Error::Config(format!("{:?} needs at least one z point", self.kind)));
        }
        if self.z_points.iter().any(|z| !z.is_finite()) {
            return Err(Error::Config("z points must be finite".into()));
        }
        if self.kind == ExperimentKind::MinSv && self.thresholds.is_empty() {
            return Err(Error::Config("MinSv needs thresholds".into()));
        }
        if self.n_ladder.contains(&0) {
            return Err(Error::Config("ladder sizes must be positive".into()));
        }
        if !(self.b_exponent.is_finite() && self.c_cut > 0.0) {
            return Err(Error::Config("b_exponent must be finite and c_cut positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, lowercase hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("spec serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Sizes to run: the ladder, or `ensemble.n`.
    pub fn sizes(&self) -> Vec<usize> {
        if self.n_ladder.is_empty() {
            vec![self.ensemble.n]
        } else {
            self.n_ladder.clone()
        }
    }

    fn report(&self) -> ExperimentReport {
        ExperimentReport::new(ReportMetadata {
            spec_hash: self.hash(),
            seed: self.ensemble.master_seed,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            kind: self.kind,
        })
    }

    fn expect_kind(&self, kind: ExperimentKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Usage(format!(
                "spec of kind {:?} passed to the {kind:?} runner",
                self.kind
            )));
        }
        self.validate()
    }
}

/// The ensemble at another size, keeping `theta` (and so re-deriving `p_n`)
/// for sparse configurations and `p_n` otherwise.
pub fn config_at_size(config: &EnsembleConfig, n: usize) -> Result<EnsembleConfig> {
    match config.theta {
        Some(theta) => EnsembleConfig::sparse(n, theta, config.dist, config.master_seed),
        None => EnsembleConfig::with_p(n, config.p_n, config.dist, config.master_seed),
    }
}

/// `a+bi` / `a-bi`.
pub fn format_complex(z: Complex64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

fn label(parts: &[(&str, String)]) -> String {
    parts
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn push_mean(report: &mut ExperimentReport, label: &str, name: &str, values: &[f64]) {
    let (mean, stderr) = if values.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        mean_and_jackknife(values)
    };
    report.push(label, format!("{name}_mean"), mean);
    report.push(label, format!("{name}_stderr"), stderr);
}

/// Per-trial circular-law statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircularTrial {
    pub radial_ks: f64,
    pub angular_ks: f64,
    /// Fraction of `|lambda| > 1 + 3 n^{-1/4}`.
    pub outlier_fraction: f64,
    /// Fraction of `|lambda| >` [`OUTLIER_RADIUS`].
    pub outlier_fraction_fixed: f64,
}

pub fn circular_trial(config: &EnsembleConfig, trial: u64) -> Result<CircularTrial> {
    let spectrum = eigenvalues(&sample_matrix(config, trial)?)?;
    let (radial, angular) = radial_angular_cdfs(&spectrum)?;
    let uniform = |x: f64| x.clamp(0.0, 1.0);
    let n = spectrum.values.len() as f64;
    let edge = 1.0 + 3.0 * n.powf(-0.25);
    let beyond = |r: f64| spectrum.values.iter().filter(|l| l.norm() > r).count() as f64 / n;
    Ok(CircularTrial {
        radial_ks: ks_distance(&radial, &uniform),
        angular_ks: ks_distance(&angular, &uniform),
        outlier_fraction: beyond(edge),
        outlier_fraction_fixed: beyond(OUTLIER_RADIUS),
    })
}

pub fn run_circular_law(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.expect_kind(ExperimentKind::CircularLaw)?;
    let mut report = spec.report();
    for n in spec.sizes() {
        let config = config_at_size(&spec.ensemble, n)?;
        let results: Vec<Result<CircularTrial>> = (0..spec.trials as u64)
            .into_par_iter()
            .map(|t| circular_trial(&config, t))
            .collect();
        let mut ok = Vec::new();
        let mut failed = 0usize;
        for r in results {
            match r {
                Ok(t) => ok.push(t),
                Err(Error::Numeric(_)) => failed += 1,
                Err(e) => return Err(e),
            }
        }
        let l = label(&[("n", n.to_string()), ("p_n", format_value(config.p_n))]);
        report.push(&l, "trials", spec.trials as f64);
        report.push(&l, "failed_trials", failed as f64);
        push_mean(
            &mut report,
            &l,
            "radial_ks",
            &ok.iter().map(|t| t.radial_ks).collect::<Vec<_>>(),
        );
        push_mean(
            &mut report,
            &l,
            "angular_ks",
            &ok.iter().map(|t| t.angular_ks).collect::<Vec<_>>(),
        );
        report.push(&l, "outlier_radius", 1.0 + 3.0 * (n as f64).powf(-0.25));
        push_mean(
            &mut report,
            &l,
            "outlier_fraction",
            &ok.iter().map(|t| t.outlier_fraction).collect::<Vec<_>>(),
        );
        push_mean(
            &mut report,
            &l,
            "outlier_fraction_fixed",
            &ok.iter().map(|t| t.outlier_fraction_fixed).collect::<Vec<_>>(),
        );
    }
    Ok(report)
}

/// Singular values of `X - zI` for trials `0..trials`, in trial order.
pub fn singular_spectra(config: &EnsembleConfig, z: Complex64, r: f64, trials: usize) -> Result<Vec<SingularSpectrum>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut sample = sample_matrix(config, t)?;
            if r > 0.0 {
                sample = smoothing_shift(sample, r, &mut StreamState::for_smoothing(config.master_seed, t))?;
            }
            singular_values(&shift(sample, z)?)
        })
        .collect()
}

/// Sup-distance between trial-averaged and limiting squared singular-value
/// laws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvLawDistance {
    /// `sup_x |mean_trials F_n(x, z) - F(x, z)|`.
    pub delta: f64,
    pub per_trial_mean: f64,
    pub per_trial_stderr: f64,
}

pub fn sv_law_distance(spectra: &[SingularSpectrum], law: &LimitLaw) -> Result<SvLawDistance> {
    let cdfs: Vec<EmpiricalCdf> = spectra.iter().map(sv_squared_cdf).collect::<Result<_>>()?;
    let target = |x: f64| law.cdf_squared(x);
    let pooled = EmpiricalCdf::mixture(&cdfs)?;
    let per_trial: Vec<f64> = cdfs.iter().map(|c| ks_distance(c, &target)).collect();
    let (per_trial_mean, per_trial_stderr) = mean_and_jackknife(&per_trial);
    Ok(SvLawDistance {
        delta: ks_distance(&pooled, &target),
        per_trial_mean,
        per_trial_stderr,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let k = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn run_sv_law(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.expect_kind(ExperimentKind::SvLaw)?;
    let mut report = spec.report();
    for &z in &spec.z_points {
        let law = LimitLaw::new(z);
        let mut ladder = Vec::new();
        for n in spec.sizes() {
            let config = config_at_size(&spec.ensemble, n)?;
            let spectra = singular_spectra(&config, z, 0.0, spec.trials)?;
            let d = sv_law_distance(&spectra, &law)?;
            let l = label(&[("z", format_complex(z)), ("n", n.to_string())]);
            report.push(&l, "trials", spec.trials as f64);
            report.push(&l, "delta_n", d.delta);
            report.push(&l, "delta_n_trial_mean", d.per_trial_mean);
            report.push(&l, "delta_n_trial_stderr", d.per_trial_stderr);
            ladder.push((n as f64, d.delta));
        }
        if let Some(slope) = log_log_slope(&ladder) {
            report.push(label(&[("z", format_complex(z))]), "ladder_slope", slope);
        }
    }
    Ok(report)
}

pub fn run_potential(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.expect_kind(ExperimentKind::Potential)?;
    let mut report = spec.report();
    let rule = TruncationRule::new(spec.b_exponent, spec.c_cut);
    for n in spec.sizes() {
        let config = config_at_size(&spec.ensemble, n)?;
        let r = spec.r.resolve(&config);
        for &z in &spec.z_points {
            let l = label(&[("z", format_complex(z)), ("n", n.to_string()), ("r", format_value(r))]);
            let spectra = singular_spectra(&config, z, r, spec.trials)?;
            let disc = disc_potential(z);
            let from_law = potential_from_law(z)?;
            report.push(&l, "trials", spec.trials as f64);
            report.push(&l, "disc_potential", disc);
            report.push(&l, "law_potential", from_law);
            report.push(&l, "limit_gap", (disc - from_law).abs());
            match log_potential_empirical(&spectra, &rule) {
                Ok(est) => {
                    report.push(&l, "flagged", 0.0);
                    report.push(&l, "included", (est.trials - est.truncation_count) as f64);
                    report.push(&l, "truncated", est.truncation_count as f64);
                    report.push(&l, "potential", est.value);
                    report.push(&l, "potential_stderr", est.stderr);
                    report.push(&l, "gap_disc", (est.value - disc).abs());
                    report.push(&l, "gap_law", (est.value - from_law).abs());
                }
                Err(Error::Estimation(_)) => {
                    report.push(&l, "flagged", 1.0);
                    report.push(&l, "included", 0.0);
                    report.push(&l, "truncated", spec.trials as f64);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(report)
}

pub fn run_minsv(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.expect_kind(ExperimentKind::MinSv)?;
    let mut report = spec.report();
    for n in spec.sizes() {
        let config = config_at_size(&spec.ensemble, n)?;
        for &z in &spec.z_points {
            let extremes = extreme_singular_values(&config, z, spec.trials)?;
            let table = tail_table(&config, z, &extremes, &spec.thresholds)?;
            let l = label(&[
                ("n", n.to_string()),
                ("p_n", format_value(config.p_n)),
                ("z", format_complex(z)),
            ]);
            report.push(&l, "trials", spec.trials as f64);
            report.push(&l, "norm_violation_frequency", table.norm_violation_frequency);
            for (t, f) in table.thresholds.iter().zip(&table.frequencies) {
                report.push(&l, format!("frequency_le_{}", format_value(*t)), *f);
            }
        }
    }
    Ok(report)
}

pub fn run_maxsv(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.expect_kind(ExperimentKind::MaxSv)?;
    let mut report = spec.report();
    for n in spec.sizes() {
        let config = config_at_size(&spec.ensemble, n)?;
        let extremes = extreme_singular_values(&config, Complex64::new(0.0, 0.0), spec.trials)?;
        let bound = norm_bound(&config);
        let freq = extremes.iter().filter(|e| e.largest >= bound).count() as f64 / spec.trials as f64;
        let largest: Vec<f64> = extremes.iter().map(|e| e.largest).collect();
        let l = label(&[("n", n.to_string()), ("p_n", format_value(config.p_n))]);
        report.push(&l, "trials", spec.trials as f64);
        report.push(&l, "norm_bound", bound);
        report.push(&l, "exceedance_frequency", freq);
        push_mean(&mut report, &l, "largest_sv", &largest);
    }
    Ok(report)
}

/// `k_1 = floor(delta^{(q+6)/(2q)} n ln n)` clamped to `[1, n-1]`; the flag
/// records whether clamping was needed.
pub fn k1_index(delta: f64, q: f64, n: usize) -> (usize, bool) {
    let nf = n as f64;
    let raw = (delta.powf((q + 6.0) / (2.0 * q)) * nf * nf.ln()).floor();
    let hi = n.saturating_sub(1).max(1) as f64;
    if raw > hi {
        (hi as usize, true)
    } else if raw < 1.0 {
        (1, true)
    } else {
        (raw as usize, false)
    }
}

/// `|lambda_(k)|`, the `k`-th largest eigenvalue modulus (1-based).
pub fn kth_largest_modulus(values: &[Complex64], k: usize) -> Option<f64> {
    let mut moduli: Vec<f64> = values.iter().map(|l| l.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    k.checked_sub(1).and_then(|i| moduli.get(i).copied())
}

pub fn tail_index_check(spec: &ExperimentSpec, q: f64, radius: f64) -> Result<ExperimentReport> {
    spec.expect_kind(ExperimentKind::TailIndex)?;
    if !(q > 6.0) {
        return Err(Error::Domain(format!("q = {q} must exceed 6")));
    }
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("R = {radius} must be positive")));
    }
    let mut report = spec.report();
    let zero = Complex64::new(0.0, 0.0);
    let law = LimitLaw::new(zero);
    for n in spec.sizes() {
        let config = config_at_size(&spec.ensemble, n)?;
        let spectra = singular_spectra(&config, zero, 0.0, spec.trials)?;
        let delta = sv_law_distance(&spectra, &law)?.delta;
        let (k1, clamped) = k1_index(delta, q, n);
        let moduli: Vec<Result<(f64, f64)>> = (0..spec.trials as u64)
            .into_par_iter()
            .map(|t| {
                let ev = eigenvalues(&sample_matrix(&config, t)?)?;
                let top = kth_largest_modulus(&ev.values, 1).unwrap_or(0.0);
                let kth = kth_largest_modulus(&ev.values, k1).unwrap_or(0.0);
                Ok((top, kth))
            })
            .collect();
        let moduli: Vec<(f64, f64)> = moduli.into_iter().collect::<Result<_>>()?;
        let exceed = moduli.iter().filter(|m| m.1 > radius).count() as f64 / spec.trials as f64;
        let l = label(&[("n", n.to_string()), ("p_n", format_value(config.p_n))]);
        report.push(&l, "trials", spec.trials as f64);
        report.push(&l, "delta_n", delta);
        report.push(&l, "q", q);
        report.push(&l, "R", radius);
        report.push(&l, "k1", k1 as f64);
        report.push(&l, "k1_clamped", if clamped { 1.0 } else { 0.0 });
        report.push(&l, "exceedance_frequency", exceed);
        push_mean(
            &mut report,
            &l,
            "top_modulus",
            &moduli.iter().map(|m| m.0).collect::<Vec<_>>(),
        );
        push_mean(
            &mut report,
            &l,
            "k1_modulus",
            &moduli.iter().map(|m| m.1).collect::<Vec<_>>(),
        );
    }
    Ok(report)
}

/// Runs a spec by kind.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = match spec.kind {
        ExperimentKind::CircularLaw => run_circular_law(spec),
        ExperimentKind::SvLaw => run_sv_law(spec),
        ExperimentKind::Potential => run_potential(spec),
        ExperimentKind::MinSv => run_minsv(spec),
        ExperimentKind::MaxSv => run_maxsv(spec),
        ExperimentKind::TailIndex => {
            let q = spec.q.ok_or_else(|| Error::Config("TailIndex needs q".into()))?;
            let radius = spec
                .radius_cut
                .ok_or_else(|| Error::Config("TailIndex needs R".into()))?;
            tail_index_check(spec, q, radius)
        }
    }?;
    report.wall_time_secs = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

/// [`run`] on a dedicated pool of `threads` workers (all cores if `None`).
pub fn run_with_threads(spec: &ExperimentSpec, threads: Option<usize>) -> Result<ExperimentReport> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::Usage("thread count must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run(spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::EntryDistribution;

    fn small(kind: ExperimentKind, n: usize, trials: usize) -> ExperimentSpec {
        ExperimentSpec::new(
            kind,
            EnsembleConfig::dense(n, EntryDistribution::RealGaussian, 11),
            trials,
        )
    }

    #[test]
    fn k1_examples() {
        assert_eq!(k1_index(1.0, 18.0, 512), (511, true));
        let (k, clamped) = k1_index(0.01, 18.0, 512);
        let expect = (0.01f64.powf(24.0 / 36.0) * 512.0 * 512f64.ln()).floor() as usize;
        assert_eq!((k, clamped), (expect, false));
        assert_eq!(k1_index(1e-12, 18.0, 512), (1, true));
    }

    #[test]
    fn kth_modulus_ordering() {
        let v = [
            Complex64::new(0.1, 0.0),
            Complex64::new(0.0, -2.0),
            Complex64::new(1.0, 1.0),
        ];
        assert_eq!(kth_largest_modulus(&v, 1), Some(2.0));
        assert_eq!(kth_largest_modulus(&v, 3), Some(0.1));
        assert_eq!(kth_largest_modulus(&v, 4), None);
        assert_eq!(kth_largest_modulus(&v, 0), None);
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [128.0, 256.0, 512.0]
            .iter()
            .map(|&n: &f64| (n, 3.0 * n.powf(-0.5)))
            .collect();
        assert!((log_log_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(log_log_slope(&pts[..1]), None);
    }

    #[test]
    fn complex_labels() {
        assert_eq!(format_complex(Complex64::new(0.5, 0.0)), "0.5+0i");
        assert_eq!(format_complex(Complex64::new(-1.0, -2.5)), "-1-2.5i");
    }

    #[test]
    fn spec_json_round_trip_and_validation() {
        let text = r#"{
            "kind": "Potential",
            "ensemble": {"n": 8, "p_n": 1.0, "dist": {"tag": "RealGaussian"}, "master_seed": 3},
            "trials": 4,
            "z_points": [[0.0, 0.0], [2.0, 0.5]],
            "r": "auto"
        }"#;
        let spec = ExperimentSpec::from_json(text).unwrap();
        assert_eq!(spec.r, RadiusSpec::Auto);
        assert_eq!(spec.b_exponent, 3.0);
        let again = ExperimentSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
        assert_eq!(again.hash(), spec.hash());
        assert_eq!(spec.hash().len(), 64);
        let no_z = text.replace(r#""z_points": [[0.0, 0.0], [2.0, 0.5]],"#, "");
        assert!(matches!(ExperimentSpec::from_json(&no_z), Err(Error::Config(_))));
        let bad_r = text.replace(r#""auto""#, r#""big""#);
        assert!(ExperimentSpec::from_json(&bad_r).is_err());
        let unknown = text.replace(r#""trials": 4"#, r#""trials": 4, "extra": 1"#);
        assert!(ExperimentSpec::from_json(&unknown).is_err());
        let zero_trials = text.replace(r#""trials": 4"#, r#""trials": 0"#);
        assert!(ExperimentSpec::from_json(&zero_trials).is_err());
    }

    #[test]
    fn circular_law_smoke() {
        let report = run(&small(ExperimentKind::CircularLaw, 4, 3)).unwrap();
        let l = "n=4,p_n=1.0000000000000000e0";
        assert_eq!(report.get(l, "trials"), Some(3.0));
        assert_eq!(report.get(l, "failed_trials"), Some(0.0));
        assert!(report.get(l, "radial_ks_mean").unwrap() <= 1.0);
        assert!(report.rows.iter().all(|r| r.spec_hash == report.metadata.spec_hash));
    }

    #[test]
    fn wrong_kind_is_a_usage_error() {
        let spec = small(ExperimentKind::MaxSv, 4, 50);
        assert!(matches!(run_circular_law(&spec), Err(Error::Usage(_))));
    }

    #[test]
    fn potential_accounts_for_every_trial() {
        let mut spec = small(ExperimentKind::Potential, 6, 8);
        spec.z_points = vec![Complex64::new(0.0, 0.0), Complex64::new(0.999, 0.0)];
        spec.c_cut = 0.05;
        spec.b_exponent = 0.0;
        let report = run(&spec).unwrap();
        for (l, trials) in report.values_of("trials") {
            let inc = report.get(l, "included").unwrap();
            let trunc = report.get(l, "truncated").unwrap();
            assert_eq!(inc + trunc, trials);
        }
    }

    #[test]
    fn reports_serialize_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = small(ExperimentKind::SvLaw, 8, 3);
        spec.z_points = vec![Complex64::new(0.5, 0.0)];
        spec.n_ladder = vec![4, 8];
        let report = run(&spec).unwrap();
        assert!(report.get("z=0.5+0i", "ladder_slope").is_some());
        let json = dir.path().join("r.json");
        write_report(&report, &json, ReportFormat::Json).unwrap();
        let mut back = read_report_json(&json).unwrap();
        back.wall_time_secs = report.wall_time_secs;
        assert_eq!(back, report);
        let csv = dir.path().join("r.csv");
        write_report(&report, &csv, ReportFormat::Csv).unwrap();
        assert_eq!(read_report_csv(&csv).unwrap(), report.rows);
        let empty = ExperimentReport::new(report.metadata.clone());
        write_report(&empty, &csv, ReportFormat::Csv).unwrap();
        assert_eq!(
            std::fs::read_to_string(&csv).unwrap(),
            "spec_hash,label,statistic,value\n"
        );
        let missing = dir.path().join("no/such/dir/r.csv");
        assert!(matches!(
            write_report(&report, &missing, ReportFormat::Csv),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn self_distance_is_zero() {
        let spectra = singular_spectra(
            &EnsembleConfig::dense(16, EntryDistribution::RealGaussian, 2),
            Complex64::new(0.3, 0.0),
            0.0,
            3,
        )
        .unwrap();
        let cdfs: Vec<EmpiricalCdf> = spectra.iter().map(|s| sv_squared_cdf(s).unwrap()).collect();
        let pooled = EmpiricalCdf::mixture(&cdfs).unwrap();
        assert_eq!(ks_distance(&pooled, &pooled), 0.0);
    }
}

//! Empirical distributions of spectra and distances between them.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{ComplexSpectrum, SingularSpectrum};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A distribution function on the real line.
pub trait Cdf {
    /// `P(X <= x)`.
    fn cdf(&self, x: f64) -> f64;

    /// `P(X < x)`. Equal to [`Cdf::cdf`] for continuous laws.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }
}

impl<F: Fn(f64) -> f64> Cdf for F {
    fn cdf(&self, x: f64) -> f64 {
        self(x)
    }
}

/// A purely atomic law: sorted distinct support points with positive weights
/// summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    points: Vec<f64>,
    weights: Vec<f64>,
    /// `cumulative[i]` is the mass of `points[..=i]`.
    cumulative: Vec<f64>,
}

impl EmpiricalCdf {
    /// Uniform weight `1/n` on each sample; coincident samples merge.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("empirical law of an empty sample".into()));
        }
        let w = 1.0 / samples.len() as f64;
        Self::build(samples.iter().map(|&x| (x, w)).collect())
    }

    pub fn from_weighted(points: &[f64], weights: &[f64]) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::Domain(
                "points and weights must be nonempty and of equal length".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Domain("weights must be positive and finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        Self::build(points.iter().copied().zip(weights.iter().copied()).collect())
    }

    /// Equal-weight mixture, the average of the component distribution
    /// functions.
    pub fn mixture(parts: &[EmpiricalCdf]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Domain("mixture of no laws".into()));
        }
        let share = 1.0 / parts.len() as f64;
        Self::build(
            parts
                .iter()
                .flat_map(|p| p.points.iter().zip(&p.weights).map(move |(&x, &w)| (x, w * share)))
                .collect(),
        )
    }

    fn build(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.iter().any(|(x, _)| !x.is_finite()) {
            return Err(Error::Domain("support points must be finite".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut points: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            // -0.0 and 0.0 are one atom
            let x = if x == 0.0 { 0.0 } else { x };
            match points.last() {
                Some(&last) if last == x => *weights.last_mut().expect("nonempty") += w,
                _ => {
                    points.push(x);
                    weights.push(w);
                }
            }
        }
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(Self {
            points,
            weights,
            cumulative,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of distinct atoms.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }

    fn mass_through(&self, count: usize) -> f64 {
        match count {
            0 => 0.0,
            c if c == self.len() => 1.0,
            c => self.cumulative[c - 1],
        }
    }

    /// Writes the `x,weight` table.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["x", "weight"]).map_err(|e| csv_error(path, e))?;
        for (x, p) in self.points.iter().zip(&self.weights) {
            w.write_record([format!("{x:.16e}"), format!("{p:.16e}")])
                .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x", "weight"] {
            return Err(Error::format(path, "expected header x,weight"));
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_error(path, e))?;
            let field = |k: usize| -> Result<f64> {
                record
                    .get(k)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::format(path, format!("line {}: malformed number", i + 2)))
            };
            points.push(field(0)?);
            weights.push(field(1)?);
        }
        Self::from_weighted(&points, &weights).map_err(|e| Error::format(path, e.to_string()))
    }
}

impl Cdf for EmpiricalCdf {
    fn cdf(&self, x: f64) -> f64 {
        self.mass_through(self.points.partition_point(|&p| p <= x))
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.mass_through(self.points.partition_point(|&p| p < x))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// `F_n(., z)`: atoms at `s_j^2` with weight `1/n`.
pub fn sv_squared_cdf(s: &SingularSpectrum) -> Result<EmpiricalCdf> {
    let squares: Vec<f64> = s.values.iter().map(|v| v * v).collect();
    EmpiricalCdf::from_samples(&squares)
}

/// Law of `kappa sqrt(xi)` with an independent fair sign `kappa`, for `xi`
/// distributed as `f`.
pub fn symmetrize(f: &EmpiricalCdf) -> Result<EmpiricalCdf> {
    if f.points.first().is_some_and(|&p| p < 0.0) {
        return Err(Error::Domain("symmetrization needs support in [0, inf)".into()));
    }
    let mut atoms = Vec::with_capacity(2 * f.len());
    for (&x, &w) in f.points.iter().zip(&f.weights) {
        if x == 0.0 {
            atoms.push((0.0, w));
        } else {
            let r = x.sqrt();
            atoms.push((-r, 0.5 * w));
            atoms.push((r, 0.5 * w));
        }
    }
    EmpiricalCdf::build(atoms)
}

/// `S_n(alpha) = (1/2n) sum_j [(s_j - alpha)^{-1} + (-s_j - alpha)^{-1}]`,
/// the Stieltjes transform of the symmetrized singular-value law.
pub fn stieltjes_empirical(s: &SingularSpectrum, alpha: Complex64) -> Result<Complex64> {
    if !(alpha.im > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "Stieltjes transform needs Im alpha > 0, got {alpha}"
        )));
    }
    if s.values.is_empty() {
        return Err(Error::Domain("empty spectrum".into()));
    }
    let terms: Vec<Complex64> = s
        .values
        .iter()
        .map(|&v| (v - alpha).inv() + (-v - alpha).inv())
        .collect();
    Ok(pairwise_sum_complex(&terms) / (2 * s.n()) as f64)
}

/// `s_n(w) = (1/n) sum_j (s_j^2 - w)^{-1}`, the Stieltjes transform of the
/// squared singular values. `w` must avoid `[0, inf)`.
pub fn stieltjes_squared(s: &SingularSpectrum, w: Complex64) -> Result<Complex64> {
    if (w.im == 0.0 && w.re >= 0.0) || !w.is_finite() {
        return Err(Error::Domain(format!("{w} lies on the half-line [0, inf)")));
    }
    if s.values.is_empty() {
        return Err(Error::Domain("empty spectrum".into()));
    }
    let terms: Vec<Complex64> = s.values.iter().map(|&v| (v * v - w).inv()).collect();
    Ok(pairwise_sum_complex(&terms) / s.n() as f64)
}

/// `sup_x |F(x) - G(x)|`, with both sides of every atom of `f` examined.
///
/// Between consecutive atoms `F` is constant and `G` monotone, so the
/// supremum is attained in the limit at an atom.
pub fn ks_distance<G: Cdf + ?Sized>(f: &EmpiricalCdf, g: &G) -> f64 {
    let mut sup: f64 = 0.0;
    let mut below = 0.0;
    for (i, &x) in f.points.iter().enumerate() {
        let at = f.cumulative[i].min(1.0);
        let at = if i + 1 == f.len() { 1.0 } else { at };
        sup = sup.max((below - g.cdf_left(x)).abs()).max((at - g.cdf(x)).abs());
        below = at;
    }
    sup
}

/// Kolmogorov distance between two atomic laws. Symmetric in its arguments.
pub fn ks_distance_empirical(f: &EmpiricalCdf, g: &EmpiricalCdf) -> f64 {
    ks_distance(f, g).max(ks_distance(g, f))
}

/// The good event for the potential: `s_n >= c_cut / n^b_exponent` and
/// `s_1 <= norm_factor n sqrt(p_n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationRule {
    pub b_exponent: f64,
    pub c_cut: f64,
    pub norm_factor: f64,
}

impl Default for TruncationRule {
    fn default() -> Self {
        Self {
            b_exponent: 3.0,
            c_cut: 1.0,
            norm_factor: 1.0,
        }
    }
}

impl TruncationRule {
    pub fn new(b_exponent: f64, c_cut: f64) -> Self {
        Self {
            b_exponent,
            c_cut,
            ..Self::default()
        }
    }

    pub fn admits(&self, s: &SingularSpectrum) -> bool {
        let n = s.n() as f64;
        let p = s.source.config.p_n;
        s.smallest() >= self.c_cut / n.powf(self.b_exponent) && s.largest() <= self.norm_factor * n * p.sqrt()
    }
}

/// Monte Carlo estimate of `-(1/n) E ln|det(X - zI)|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialEstimate {
    pub z: Complex64,
    pub r: f64,
    pub value: f64,
    /// Jackknife standard error of the mean; `0` with a single kept trial.
    pub stderr: f64,
    /// All trials offered, kept or not.
    pub trials: usize,
    /// Trials rejected by the truncation rule.
    pub truncation_count: usize,
}

/// `-(1/n) sum_j ln s_j` for one trial.
pub fn log_potential_trial(s: &SingularSpectrum) -> f64 {
    let logs: Vec<f64> = s.values.iter().map(|v| v.ln()).collect();
    -pairwise_sum(&logs) / s.n() as f64
}

/// Averages [`log_potential_trial`] over the trials admitted by `rule`.
pub fn log_potential_empirical(spectra: &[SingularSpectrum], rule: &TruncationRule) -> Result<PotentialEstimate> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::Domain("no spectra supplied".into()))?;
    if spectra.iter().any(|s| s.z != first.z || s.r != first.r) {
        return Err(Error::Domain("spectra must share z and r".into()));
    }
    if spectra.iter().any(|s| s.values.is_empty()) {
        return Err(Error::Domain("empty spectrum".into()));
    }
    let kept: Vec<f64> = spectra
        .iter()
        .filter(|s| rule.admits(s))
        .map(log_potential_trial)
        .collect();
    if kept.is_empty() {
        return Err(Error::Estimation(format!(
            "all {} trials excluded by the truncation rule (B={}, c={})",
            spectra.len(),
            rule.b_exponent,
            rule.c_cut
        )));
    }
    let (value, stderr) = mean_and_jackknife(&kept);
    Ok(PotentialEstimate {
        z: first.z,
        r: first.r,
        value,
        stderr,
        trials: spectra.len(),
        truncation_count: spectra.len() - kept.len(),
    })
}

/// Mean and jackknife standard error of the mean.
pub fn mean_and_jackknife(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    let total = pairwise_sum(values);
    let mean = total / k as f64;
    if k < 2 {
        return (mean, 0.0);
    }
    let kf = k as f64;
    let loo: Vec<f64> = values.iter().map(|v| (total - v) / (kf - 1.0)).collect();
    let loo_mean = pairwise_sum(&loo) / kf;
    let dev: Vec<f64> = loo.iter().map(|v| (v - loo_mean).powi(2)).collect();
    let stderr = ((kf - 1.0) / kf * pairwise_sum(&dev)).sqrt();
    (mean, stderr)
}

/// Sum in a fixed binary tree, independent of how the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::new(0.0, 0.0),
        n if n <= 8 => values.iter().sum(),
        n => pairwise_sum_complex(&values[..n / 2]) + pairwise_sum_complex(&values[n / 2..]),
    }
}

/// `arg(w) / 2 pi` in `[0, 1)`, cut along the positive real axis.
pub fn angle_fraction(w: Complex64) -> f64 {
    let mut a = w.im.atan2(w.re);
    if a < 0.0 {
        a += 2.0 * PI;
    }
    let f = a / (2.0 * PI);
    if f >= 1.0 || f == 0.0 {
        0.0
    } else {
        f
    }
}

/// Laws of `|lambda|^2` and `arg(lambda) / 2 pi` over the spectrum.
pub fn radial_angular_cdfs(spec: &ComplexSpectrum) -> Result<(EmpiricalCdf, EmpiricalCdf)> {
    let radial: Vec<f64> = spec.values.iter().map(|l| l.norm_sqr()).collect();
    let angular: Vec<f64> = spec.values.iter().map(|&l| angle_fraction(l)).collect();
    Ok((
        EmpiricalCdf::from_samples(&radial)?,
        EmpiricalCdf::from_samples(&angular)?,
    ))
}

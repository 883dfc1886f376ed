//! Matrix ensembles: i.i.d. entries scaled by `1/sqrt(n p_n)`, an optional
//! Bernoulli(`p_n`) sparsity mask, the shift by `zI` and the smoothing shift
//! `X - r xi I` with `xi` uniform on the unit disc.
//!
//! Every entry is generated from its own random stream whose seed is a pure
//! function of `(master_seed, trial, j, k)`, so samples are bitwise
//! reproducible no matter how trials or entries are scheduled.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_MUL1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_MUL2: u64 = 0x94D0_49BB_1331_11EB;
const TRIAL_MUL: u64 = 0xD6E8_FEB8_6659_FD93;
const ROW_MUL: u64 = 0xA076_1D64_78BD_642F;
const COL_MUL: u64 = 0xE703_7ED1_A0B4_28DB;

/// Reserved row index for the per-trial smoothing stream. Matrix rows never
/// reach it.
const SMOOTHING_ROW: u64 = u64::MAX;
/// Reserved row index for auxiliary Monte Carlo streams.
const AUX_ROW: u64 = u64::MAX - 1;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL1);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL2);
    z ^ (z >> 31)
}

/// Seed of the stream for entry `(j, k)` of trial `trial`.
///
/// `h0 = mix(seed + gamma)`, then trial, row and column are folded in one at a
/// time, each multiplied by its own odd constant before mixing.
#[inline]
pub fn entry_key(master_seed: u64, trial: u64, j: u64, k: u64) -> u64 {
    let h = mix64(master_seed.wrapping_add(GOLDEN_GAMMA));
    let h = mix64(h ^ trial.wrapping_mul(TRIAL_MUL));
    let h = mix64(h ^ j.wrapping_mul(ROW_MUL));
    mix64(h ^ k.wrapping_mul(COL_MUL))
}

/// A SplitMix64 random stream. Cheap to construct, so one is created per
/// matrix entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamState {
    state: u64,
}

impl StreamState {
    pub fn new(key: u64) -> Self {
        Self { state: key }
    }

    pub fn for_entry(master_seed: u64, trial: u64, j: usize, k: usize) -> Self {
        Self::new(entry_key(master_seed, trial, j as u64, k as u64))
    }

    /// Stream that draws the smoothing variable `xi` of a trial.
    pub fn for_smoothing(master_seed: u64, trial: u64) -> Self {
        Self::new(entry_key(master_seed, trial, SMOOTHING_ROW, 0))
    }

    /// Stream for auxiliary Monte Carlo work (moment estimates, small-ball
    /// trials); `channel` separates independent uses under one seed.
    pub fn auxiliary(master_seed: u64, trial: u64, channel: u64) -> Self {
        Self::new(entry_key(master_seed, trial, AUX_ROW, channel))
    }
}

impl RngCore for StreamState {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Law of the raw entries `X_jk`. Every variant has mean 0 and `E|X|^2 = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", content = "params", deny_unknown_fields)]
pub enum EntryDistribution {
    /// Independent real and imaginary parts, each `N(0, 1/2)`.
    ComplexGaussian,
    RealGaussian,
    /// `+1` or `-1` with probability one half.
    Rademacher,
    /// `(±1 ± i)/sqrt(2)` with independent signs.
    ComplexRademacher,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    UniformSymmetric,
    /// `a` with probability `p`, `-a p/(1-p)` otherwise. Requires
    /// `a^2 p = 1 - p` so the variance is one.
    TwoPoint {
        a: f64,
        p: f64,
    },
}

impl EntryDistribution {
    /// Validated two-point law. Rejects parameters that do not give mean 0
    /// and variance 1.
    pub fn two_point(a: f64, p: f64) -> Result<Self> {
        let d = EntryDistribution::TwoPoint { a, p };
        d.validate()?;
        Ok(d)
    }

    /// Two-point law with success probability `p`, `a = sqrt((1-p)/p)`.
    pub fn two_point_with_p(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Config(format!("two-point probability {p} not in (0,1)")));
        }
        Self::two_point(((1.0 - p) / p).sqrt(), p)
    }

    pub fn validate(&self) -> Result<()> {
        if let EntryDistribution::TwoPoint { a, p } = *self {
            if !(p > 0.0 && p < 1.0) || !a.is_finite() || a <= 0.0 {
                return Err(Error::Config(format!(
                    "two-point law needs a > 0 and p in (0,1), got a={a}, p={p}"
                )));
            }
            let variance = a * a * p / (1.0 - p);
            if (variance - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "two-point law (a={a}, p={p}) has variance {variance}, not 1"
                )));
            }
        }
        Ok(())
    }

    pub fn is_complex(&self) -> bool {
        matches!(
            self,
            EntryDistribution::ComplexGaussian | EntryDistribution::ComplexRademacher
        )
    }

    /// Symmetric under `X -> -X`.
    pub fn is_symmetric(&self) -> bool {
        match *self {
            EntryDistribution::TwoPoint { p, .. } => p == 0.5,
            _ => true,
        }
    }

    /// Atoms and their probabilities for purely discrete laws.
    pub fn atoms(&self) -> Option<Vec<(Complex64, f64)>> {
        let r = |x: f64| Complex64::new(x, 0.0);
        match *self {
            EntryDistribution::Rademacher => Some(vec![(r(-1.0), 0.5), (r(1.0), 0.5)]),
            EntryDistribution::ComplexRademacher => {
                let h = FRAC_1_SQRT_2;
                Some(vec![
                    (Complex64::new(h, h), 0.25),
                    (Complex64::new(h, -h), 0.25),
                    (Complex64::new(-h, h), 0.25),
                    (Complex64::new(-h, -h), 0.25),
                ])
            }
            EntryDistribution::TwoPoint { a, p } => Some(vec![(r(a), p), (r(-a * p / (1.0 - p)), 1.0 - p)]),
            _ => None,
        }
    }

    /// One draw. Complex variants have independent real and imaginary parts
    /// of variance 1/2 each.
    #[inline]
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match *self {
            EntryDistribution::RealGaussian => Complex64::new(rng.sample(StandardNormal), 0.0),
            EntryDistribution::ComplexGaussian => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
            }
            EntryDistribution::Rademacher => Complex64::new(if rng.next_u64() >> 63 == 1 { 1.0 } else { -1.0 }, 0.0),
            EntryDistribution::ComplexRademacher => {
                let bits = rng.next_u64();
                let re = if bits >> 63 == 1 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                let im = if (bits >> 62) & 1 == 1 {
                    FRAC_1_SQRT_2
                } else {
                    -FRAC_1_SQRT_2
                };
                Complex64::new(re, im)
            }
            EntryDistribution::UniformSymmetric => {
                let u: f64 = rng.random();
                Complex64::new((2.0 * u - 1.0) * 3f64.sqrt(), 0.0)
            }
            EntryDistribution::TwoPoint { a, p } => {
                let u: f64 = rng.random();
                Complex64::new(if u < p { a } else { -a * p / (1.0 - p) }, 0.0)
            }
        }
    }
}

/// One draw from `dist` using the caller's stream.
pub fn draw_entry(dist: &EntryDistribution, stream: &mut StreamState) -> Complex64 {
    dist.draw(stream)
}

/// Full recipe for one random-matrix law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawEnsembleConfig")]
pub struct EnsembleConfig {
    pub n: usize,
    pub p_n: f64,
    pub dist: EntryDistribution,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsembleConfig {
    n: usize,
    p_n: f64,
    dist: EntryDistribution,
    master_seed: u64,
    #[serde(default)]
    theta: Option<f64>,
}

impl TryFrom<RawEnsembleConfig> for EnsembleConfig {
    type Error = Error;

    fn try_from(raw: RawEnsembleConfig) -> Result<Self> {
        let cfg = EnsembleConfig {
            n: raw.n,
            p_n: raw.p_n,
            dist: raw.dist,
            master_seed: raw.master_seed,
            theta: raw.theta,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl EnsembleConfig {
    pub fn dense(n: usize, dist: EntryDistribution, master_seed: u64) -> Self {
        Self {
            n,
            p_n: 1.0,
            dist,
            master_seed,
            theta: None,
        }
    }

    pub fn with_p(n: usize, p_n: f64, dist: EntryDistribution, master_seed: u64) -> Result<Self> {
        let cfg = Self {
            n,
            p_n,
            dist,
            master_seed,
            theta: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sparse regime `p_n = n^{-(1-theta)}`.
    pub fn sparse(n: usize, theta: f64, dist: EntryDistribution, master_seed: u64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Config(format!("theta {theta} not in (0,1]")));
        }
        let cfg = Self {
            n,
            p_n: sparse_probability(n, theta),
            dist,
            master_seed,
            theta: Some(theta),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("matrix dimension n must be at least 1".into()));
        }
        if !(self.p_n > 0.0 && self.p_n <= 1.0) {
            return Err(Error::Config(format!("p_n = {} not in (0,1]", self.p_n)));
        }
        if let Some(theta) = self.theta {
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(Error::Config(format!("theta {theta} not in (0,1]")));
            }
            let expect = sparse_probability(self.n, theta);
            if (self.p_n - expect).abs() > 1e-12 * expect {
                return Err(Error::Config(format!(
                    "p_n = {} inconsistent with theta = {theta} (expected {expect})",
                    self.p_n
                )));
            }
        }
        self.dist.validate()
    }

    /// Entry scale `1/sqrt(n p_n)`.
    pub fn scale(&self) -> f64 {
        1.0 / (self.n as f64 * self.p_n).sqrt()
    }

    /// Smoothing radius `1/sqrt(n p_n)` used when `r` is left on auto.
    pub fn auto_smoothing_radius(&self) -> f64 {
        self.scale()
    }
}

pub fn sparse_probability(n: usize, theta: f64) -> f64 {
    (n as f64).powf(theta - 1.0)
}

/// Smoothing applied by [`smoothing_shift`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smoothing {
    pub r: f64,
    pub xi: Complex64,
}

/// One realization of the ensemble, possibly shifted and smoothed.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSample {
    entries: CMatrix,
    config: EnsembleConfig,
    trial_index: u64,
    applied_shift: Option<Complex64>,
    applied_smoothing: Option<Smoothing>,
}

impl MatrixSample {
    /// Wraps a hand-built square matrix. The attached config is a dense
    /// placeholder carrying only the dimension.
    pub fn from_matrix(entries: CMatrix) -> Self {
        assert!(entries.is_square(), "samples are square");
        let n = entries.rows();
        Self {
            entries,
            config: EnsembleConfig::dense(n, EntryDistribution::RealGaussian, 0),
            trial_index: 0,
            applied_shift: None,
            applied_smoothing: None,
        }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.rows()
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn trial_index(&self) -> u64 {
        self.trial_index
    }

    pub fn applied_shift(&self) -> Option<Complex64> {
        self.applied_shift
    }

    pub fn applied_smoothing(&self) -> Option<Smoothing> {
        self.applied_smoothing
    }

    pub(crate) fn with_shift(mut self, z: Complex64) -> Result<Self> {
        if self.applied_shift.is_some() {
            return Err(Error::Usage("sample already shifted by zI".into()));
        }
        self.entries.sub_diagonal(z);
        self.applied_shift = Some(z);
        Ok(self)
    }
}

/// Draws trial `trial_index` of the ensemble.
///
/// Entry `(j, k)` is `eps_jk X_jk / sqrt(n p_n)` with `eps_jk ~ Bernoulli(p_n)`.
/// The mask draw is skipped entirely when `p_n = 1`.
pub fn sample_matrix(config: &EnsembleConfig, trial_index: u64) -> Result<MatrixSample> {
    config.validate()?;
    let n = config.n;
    let scale = config.scale();
    let dense = config.p_n >= 1.0;
    let zero = Complex64::new(0.0, 0.0);
    let entries = CMatrix::from_fn(n, n, |j, k| {
        let mut stream = StreamState::for_entry(config.master_seed, trial_index, j, k);
        if !dense {
            let u: f64 = stream.random();
            if u >= config.p_n {
                return zero;
            }
        }
        config.dist.draw(&mut stream) * scale
    });
    Ok(MatrixSample {
        entries,
        config: config.clone(),
        trial_index,
        applied_shift: None,
        applied_smoothing: None,
    })
}

/// Uniform point on the closed unit disc, radius `sqrt(u)`.
pub fn uniform_disc_point<R: RngCore + ?Sized>(rng: &mut R) -> Complex64 {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    Complex64::from_polar(u.sqrt(), 2.0 * PI * v)
}

/// `X - r xi I` with one `xi` uniform on the unit disc shared by the whole
/// diagonal.
pub fn smoothing_shift(sample: MatrixSample, r: f64, stream: &mut StreamState) -> Result<MatrixSample> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!(
            "smoothing radius must be finite and >= 0, got {r}"
        )));
    }
    if sample.applied_smoothing.is_some() {
        return Err(Error::Usage("sample already smoothed".into()));
    }
    let xi = uniform_disc_point(stream);
    let mut sample = sample;
    if r > 0.0 {
        sample.entries.sub_diagonal(xi * r);
    }
    sample.applied_smoothing = Some(Smoothing { r, xi });
    Ok(sample)
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

const IS_SCALE: f64 = 2.0;

/// `phi(x) = (ln(1 + |x|))^(19 + eta)`.
pub fn log_moment_weight(x: Complex64, eta: f64) -> f64 {
    x.norm().ln_1p().powf(19.0 + eta)
}

/// Estimates `E |X|^2 phi(X)`.
///
/// Discrete laws are evaluated exactly over their atoms (standard error 0);
/// continuous laws use `m` draws from an auxiliary stream of `seed`. For the
/// Gaussian laws plain Monte Carlo has a relative standard error above 5% at
/// `m = 10^6`, so draws come from a proposal dilated by a factor 2 and are
/// reweighted by the density ratio.
pub fn log_moment_estimate(dist: &EntryDistribution, m: usize, eta: f64, seed: u64) -> Result<MomentEstimate> {
    if m < 10_000 {
        return Err(Error::Usage(format!("log-moment estimate needs m >= 10^4, got {m}")));
    }
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    dist.validate()?;
    let f = |x: Complex64| x.norm_sqr() * log_moment_weight(x, eta);
    if let Some(atoms) = dist.atoms() {
        let value = atoms.iter().map(|&(x, w)| w * f(x)).sum();
        return Ok(MomentEstimate {
            value,
            stderr: 0.0,
            samples: 0,
        });
    }
    // Gaussian laws: importance sampling from the same law dilated by
    // IS_SCALE, whose heavier tail covers the region that dominates phi.
    let weight = |x: Complex64| match dist {
        EntryDistribution::RealGaussian => IS_SCALE * (-0.5 * x.norm_sqr() * (1.0 - 1.0 / (IS_SCALE * IS_SCALE))).exp(),
        EntryDistribution::ComplexGaussian => {
            IS_SCALE * IS_SCALE * (-x.norm_sqr() * (1.0 - 1.0 / (IS_SCALE * IS_SCALE))).exp()
        }
        _ => 1.0,
    };
    let proposal_scale = match dist {
        EntryDistribution::RealGaussian | EntryDistribution::ComplexGaussian => IS_SCALE,
        _ => 1.0,
    };
    let mut stream = StreamState::auxiliary(seed, 0, 0);
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..m {
        let x = dist.draw(&mut stream) * proposal_scale;
        let y = f(x) * weight(x);
        let delta = y - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (y - mean);
    }
    let var = m2 / (m - 1) as f64;
    Ok(MomentEstimate {
        value: mean,
        stderr: (var / m as f64).sqrt(),
        samples: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL_LAWS: [EntryDistribution; 5] = [
        EntryDistribution::ComplexGaussian,
        EntryDistribution::RealGaussian,
        EntryDistribution::Rademacher,
        EntryDistribution::ComplexRademacher,
        EntryDistribution::UniformSymmetric,
    ];

    fn moments(dist: EntryDistribution, draws: usize, seed: u64) -> (Complex64, f64, f64, f64) {
        let mut s = StreamState::auxiliary(seed, 0, 7);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut sum2 = 0.0;
        let mut sum4 = 0.0;
        let mut sum_re2 = 0.0;
        for _ in 0..draws {
            let x = dist.draw(&mut s);
            sum += x;
            sum2 += x.norm_sqr();
            sum4 += x.norm_sqr() * x.norm_sqr();
            sum_re2 += x.re * x.re;
        }
        let m = draws as f64;
        (sum / m, sum2 / m, sum4 / m, sum_re2 / m)
    }

    #[test]
    fn every_law_has_mean_zero_and_unit_second_moment() {
        let draws = 1_000_000;
        for (i, dist) in ALL_LAWS
            .into_iter()
            .chain([EntryDistribution::two_point_with_p(1.0 / 9.0).unwrap()])
            .enumerate()
        {
            let (mean, m2, m4, _) = moments(dist, draws, 11 + i as u64);
            // E|X| components have variance <= 1; 5 sigma
            let sigma_mean = (1.0 / draws as f64).sqrt();
            assert!(mean.norm() < 5.0 * sigma_mean * 2f64.sqrt(), "{dist:?} mean {mean}");
            let sigma_m2 = ((m4 - m2 * m2) / draws as f64).sqrt();
            assert!((m2 - 1.0).abs() < 5.0 * sigma_m2.max(1e-12), "{dist:?} E|X|^2 {m2}");
        }
    }

    #[test]
    fn complex_laws_split_variance_evenly() {
        for dist in [EntryDistribution::ComplexGaussian, EntryDistribution::ComplexRademacher] {
            let (_, _, _, re2) = moments(dist, 400_000, 3);
            assert!((re2 - 0.5).abs() < 0.01, "{dist:?} Var Re = {re2}");
        }
    }

    #[test]
    fn rademacher_draws_are_signs() {
        let mut s = StreamState::new(1);
        for _ in 0..1000 {
            let x = draw_entry(&EntryDistribution::Rademacher, &mut s);
            assert!(x == Complex64::new(1.0, 0.0) || x == Complex64::new(-1.0, 0.0));
        }
    }

    #[test]
    fn two_point_constructor_enforces_unit_variance() {
        assert!(EntryDistribution::two_point(3.0, 1.0 / 9.0).is_err());
        assert!(EntryDistribution::two_point(8f64.sqrt(), 1.0 / 9.0).is_ok());
        assert!(EntryDistribution::two_point(1.0, 0.0).is_err());
        assert!(EntryDistribution::two_point(-1.0, 0.5).is_err());
        let d = EntryDistribution::two_point_with_p(0.5).unwrap();
        assert_eq!(d, EntryDistribution::TwoPoint { a: 1.0, p: 0.5 });
    }

    #[test]
    fn dense_rademacher_entries_are_half() {
        let cfg = EnsembleConfig::dense(4, EntryDistribution::Rademacher, 7);
        let s = sample_matrix(&cfg, 0).unwrap();
        for z in s.entries().as_slice() {
            assert!(z.im == 0.0 && z.re.abs() == 0.5, "{z}");
        }
        assert_eq!(s, sample_matrix(&cfg, 0).unwrap());
        assert_ne!(s.entries(), sample_matrix(&cfg, 1).unwrap().entries());
    }

    #[test]
    fn entries_reproducible_from_key_alone() {
        let cfg = EnsembleConfig::with_p(16, 0.3, EntryDistribution::ComplexGaussian, 99).unwrap();
        let s = sample_matrix(&cfg, 5).unwrap();
        for (j, k) in [(0usize, 0usize), (3, 7), (15, 15)] {
            let mut st = StreamState::for_entry(99, 5, j, k);
            let u: f64 = st.random();
            let expect = if u >= 0.3 {
                Complex64::new(0.0, 0.0)
            } else {
                cfg.dist.draw(&mut st) * cfg.scale()
            };
            assert_eq!(s.entries()[(j, k)], expect);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let d = EntryDistribution::RealGaussian;
        let bad = EnsembleConfig {
            n: 0,
            p_n: 1.0,
            dist: d,
            master_seed: 0,
            theta: None,
        };
        assert!(matches!(sample_matrix(&bad, 0), Err(Error::Config(_))));
        let bad = EnsembleConfig {
            n: 4,
            p_n: 0.0,
            dist: d,
            master_seed: 0,
            theta: None,
        };
        assert!(matches!(sample_matrix(&bad, 0), Err(Error::Config(_))));
        let bad = EnsembleConfig {
            n: 4,
            p_n: 1.5,
            dist: d,
            master_seed: 0,
            theta: None,
        };
        assert!(bad.validate().is_err());
        let bad = EnsembleConfig {
            n: 100,
            p_n: 0.5,
            dist: d,
            master_seed: 0,
            theta: Some(0.5),
        };
        assert!(bad.validate().is_err());
        let ok = EnsembleConfig::sparse(100, 0.5, d, 0).unwrap();
        assert!((ok.p_n - 0.1).abs() < 1e-15);
    }

    #[test]
    fn sparse_zero_fraction_within_binomial_interval() {
        let n = 1024;
        let cfg = EnsembleConfig::with_p(n, 0.1, EntryDistribution::RealGaussian, 2024).unwrap();
        let s = sample_matrix(&cfg, 0).unwrap();
        let zeros = s
            .entries()
            .as_slice()
            .iter()
            .filter(|z| z.re == 0.0 && z.im == 0.0)
            .count();
        let total = (n * n) as f64;
        let frac = zeros as f64 / total;
        // 99.9% two-sided normal quantile of the binomial proportion
        let half_width = 3.2905 * (0.9 * 0.1 / total).sqrt();
        assert!((frac - 0.9).abs() <= half_width, "zero fraction {frac}");
    }

    #[test]
    fn dense_entry_second_moment_is_one_over_n() {
        let n = 512;
        let cfg = EnsembleConfig::dense(n, EntryDistribution::RealGaussian, 17);
        let s = sample_matrix(&cfg, 0).unwrap();
        let vals: Vec<f64> = s.entries().as_slice().iter().map(|z| z.norm_sqr()).collect();
        let m = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / m;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let target = 1.0 / n as f64;
        assert!((mean - target).abs() <= 5.0 * (var / m).sqrt(), "mean |x|^2 = {mean}");
        assert!(s.entries().as_slice().iter().all(|z| *z != Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn smoothing_with_zero_radius_is_inert() {
        let cfg = EnsembleConfig::dense(5, EntryDistribution::ComplexGaussian, 1);
        let s = sample_matrix(&cfg, 0).unwrap();
        let mut st = StreamState::for_smoothing(1, 0);
        let t = smoothing_shift(s.clone(), 0.0, &mut st).unwrap();
        assert_eq!(t.entries(), s.entries());
        let sm = t.applied_smoothing().unwrap();
        assert_eq!(sm.r, 0.0);
        assert!(sm.xi.norm() <= 1.0);
        assert!(matches!(smoothing_shift(t, 0.1, &mut st), Err(Error::Usage(_))));
        assert!(matches!(smoothing_shift(s, -1.0, &mut st), Err(Error::Domain(_))));
    }

    #[test]
    fn disc_points_are_uniform_in_radius_squared() {
        let mut st = StreamState::new(5);
        let m = 200_000;
        let mut inside_half = 0;
        for _ in 0..m {
            let p = uniform_disc_point(&mut st);
            assert!(p.norm() <= 1.0);
            if p.norm_sqr() <= 0.5 {
                inside_half += 1;
            }
        }
        let frac = inside_half as f64 / m as f64;
        assert!((frac - 0.5).abs() < 5.0 * (0.25 / m as f64).sqrt());
    }

    #[test]
    fn rademacher_log_moment_is_exact() {
        let est = log_moment_estimate(&EntryDistribution::Rademacher, 10_000, 1.0, 0).unwrap();
        assert_eq!(est.stderr, 0.0);
        assert!((est.value - 2f64.ln().powi(20)).abs() < 1e-18);
        assert!((est.value - 6.5e-4).abs() < 0.1e-4);
    }

    #[test]
    fn importance_sampler_is_unbiased() {
        // E|X|^2 phi(X) for the uniform law, exact by quadrature over [0, sqrt 3]
        let est = log_moment_estimate(&EntryDistribution::UniformSymmetric, 200_000, 1.0, 8).unwrap();
        let h = 3f64.sqrt();
        let exact = quadrature::integrate(|x| x * x * x.ln_1p().powf(20.0) / h, 0.0, h, 1e-14).integral;
        assert!((est.value - exact).abs() < 5.0 * est.stderr, "{est:?} vs {exact}");
        // Gaussian: value from independent adaptive quadrature, 124.7473...
        let est = log_moment_estimate(&EntryDistribution::RealGaussian, 1_000_000, 1.0, 8).unwrap();
        let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let exact = 2.0
            * [0.0, 2.0, 5.0, 10.0, 40.0]
                .windows(2)
                .map(|w| {
                    quadrature::integrate(|x| x * x * x.ln_1p().powf(20.0) * density(x), w[0], w[1], 1e-12).integral
                })
                .sum::<f64>();
        assert!((exact - 124.747334).abs() < 1e-4, "{exact}");
        assert!((est.value - exact).abs() < 5.0 * est.stderr, "{est:?} vs {exact}");
    }

    #[test]
    fn gaussian_log_moment_is_finite_with_small_stderr() {
        let est = log_moment_estimate(&EntryDistribution::RealGaussian, 1_000_000, 1.0, 4).unwrap();
        assert!(est.value.is_finite() && est.value > 0.0);
        assert!(est.stderr < 0.05 * est.value, "{est:?}");
        assert!(log_moment_estimate(&EntryDistribution::RealGaussian, 100, 1.0, 4).is_err());
        assert!(log_moment_estimate(&EntryDistribution::RealGaussian, 10_000, 0.0, 4).is_err());
    }

    #[test]
    fn config_json_round_trip_and_unknown_fields() {
        let cfg = EnsembleConfig::sparse(64, 0.5, EntryDistribution::two_point_with_p(0.25).unwrap(), 3).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: EnsembleConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);

        let ok = r#"{"n":8,"p_n":1.0,"dist":{"tag":"Rademacher"},"master_seed":18446744073709551615}"#;
        let parsed: EnsembleConfig = serde_json::from_str(ok).unwrap();
        assert_eq!(parsed.master_seed, u64::MAX);

        let extra = r#"{"n":8,"p_n":1.0,"dist":{"tag":"Rademacher"},"master_seed":1,"color":"red"}"#;
        assert!(serde_json::from_str::<EnsembleConfig>(extra).is_err());
        let bad_p = r#"{"n":8,"p_n":0.0,"dist":{"tag":"Rademacher"},"master_seed":1}"#;
        assert!(serde_json::from_str::<EnsembleConfig>(bad_p).is_err());
        let bad_tp =
            r#"{"n":8,"p_n":1.0,"dist":{"tag":"TwoPoint","params":{"a":3.0,"p":0.1111111111111111}},"master_seed":1}"#;
        assert!(serde_json::from_str::<EnsembleConfig>(bad_tp).is_err());
    }
}

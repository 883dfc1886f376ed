//! Smallest-singular-value machinery: the compressible/incompressible split
//! of unit vectors, spread sets, concentration functions of entries and of
//! weighted row sums, and Monte Carlo tails of the extreme singular values.

use std::collections::HashMap;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::{sample_matrix, EnsembleConfig, EntryDistribution, StreamState};
use crate::error::{Error, Result};
use crate::linalg::{shift, singular_values};
use crate::measures::csv_error;

const UNIT_TOL: f64 = 1e-10;
const MIN_SMALL_BALL_TRIALS: usize = 10_000;
const MIN_TAIL_TRIALS: usize = 50;
/// Sample points reused as candidate centres for complex concentration
/// estimates.
const DISC_CENTRES: usize = 4096;
const Q_CHANNEL: u64 = 0x51;
const SMALL_BALL_CHANNEL: u64 = 0x5B;
/// `K` in the norm bound `s_1 <= K n sqrt(p_n)`.
pub const NORM_FACTOR: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VectorTag {
    Sparse,
    Compressible,
    Incompressible,
}

/// Position of a unit vector relative to `Sparse(delta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VectorClass {
    pub tag: VectorTag,
    pub delta: f64,
    pub rho: f64,
    /// Euclidean distance to `Sparse(delta)`.
    pub residual: f64,
}

fn check_unit(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Domain("empty vector".into()));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !((norm - 1.0).abs() <= UNIT_TOL) {
        return Err(Error::Domain(format!("vector has norm {norm}, expected 1")));
    }
    Ok(())
}

/// Indices of the `floor(delta n)` largest magnitudes, ties broken by index.
fn top_support(x: &[f64], delta: f64) -> Vec<bool> {
    let n = x.len();
    let k = ((delta * n as f64).floor() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut keep = vec![false; n];
    for &i in &order[..k] {
        keep[i] = true;
    }
    keep
}

/// Distance to `Sparse(delta)` is the norm of all but the `floor(delta n)`
/// largest coordinates.
pub fn classify_vector(x: &[f64], delta: f64, rho: f64) -> Result<VectorClass> {
    check_unit(x)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta={delta} not in (0,1]")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("rho={rho} not in (0,1)")));
    }
    let keep = top_support(x, delta);
    let residual = x
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| !k)
        .map(|(v, _)| v * v)
        .sum::<f64>()
        .sqrt();
    let tag = if residual == 0.0 {
        VectorTag::Sparse
    } else if residual <= rho {
        VectorTag::Compressible
    } else {
        VectorTag::Incompressible
    };
    Ok(VectorClass {
        tag,
        delta,
        rho,
        residual,
    })
}

/// `{k : rho/sqrt(2n) <= |x_k| <= 1/sqrt(n delta/2)}` for incompressible `x`.
///
/// The set has at least `n delta/2` elements and carries mass at least
/// `rho^2/2`; a violation is reported as a numeric failure.
pub fn spread_set(x: &[f64], delta: f64, rho: f64) -> Result<Vec<usize>> {
    let class = classify_vector(x, delta, rho)?;
    if class.tag != VectorTag::Incompressible {
        return Err(Error::Domain(format!(
            "spread set needs an incompressible vector, got {:?} (residual {})",
            class.tag, class.residual
        )));
    }
    let n = x.len() as f64;
    let lower = rho / (2.0 * n).sqrt();
    let upper = 1.0 / (n * delta / 2.0).sqrt();
    let sigma: Vec<usize> = (0..x.len())
        .filter(|&k| x[k].abs() >= lower && x[k].abs() <= upper)
        .collect();
    let mass: f64 = sigma.iter().map(|&k| x[k] * x[k]).sum();
    if (sigma.len() as f64) < n * delta / 2.0 || mass < rho * rho / 2.0 {
        return Err(Error::Numeric(format!(
            "spread set of size {} and mass {mass} violates its guarantees",
            sigma.len()
        )));
    }
    Ok(sigma)
}

/// `sup_u` of the mass of `[u - eta, u + eta]` under an atomic law on the
/// line; `atoms` sorted by position.
fn window_mass_atoms(atoms: &[(f64, f64)], eta: f64) -> f64 {
    let mut best: f64 = 0.0;
    let mut j = 0;
    let mut mass = 0.0;
    for i in 0..atoms.len() {
        if j < i {
            j = i;
            mass = 0.0;
        }
        while j < atoms.len() && atoms[j].0 <= atoms[i].0 + 2.0 * eta {
            mass += atoms[j].1;
            j += 1;
        }
        best = best.max(mass);
        mass -= atoms[i].1;
    }
    best.min(1.0)
}

/// Fraction of a sorted sample in the best closed window of width `2 eta`.
fn window_mass_sorted(sorted: &[f64], eta: f64) -> f64 {
    let mut best = 0usize;
    let mut j = 0;
    for i in 0..sorted.len() {
        j = j.max(i);
        while j < sorted.len() && sorted[j] <= sorted[i] + 2.0 * eta {
            j += 1;
        }
        best = best.max(j - i);
    }
    best as f64 / sorted.len() as f64
}

/// Radius of the smallest closed disc containing `points` (at most a handful).
fn enclosing_radius(points: &[Complex64]) -> f64 {
    if points.len() <= 1 {
        return 0.0;
    }
    let scale = points.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let slack = 1e-12 * scale;
    let covers = |c: Complex64, r: f64| points.iter().all(|p| (p - c).norm() <= r + slack);
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let c = (points[i] + points[j]) / 2.0;
            let r = (points[i] - c).norm();
            if r < best && covers(c, r) {
                best = r;
            }
            for k in j + 1..points.len() {
                if let Some((c, r)) = circumcircle(points[i], points[j], points[k]) {
                    if r < best && covers(c, r) {
                        best = r;
                    }
                }
            }
        }
    }
    best
}

fn circumcircle(a: Complex64, b: Complex64, c: Complex64) -> Option<(Complex64, f64)> {
    let (b, c) = (b - a, c - a);
    let d = 2.0 * (b.re * c.im - b.im * c.re);
    if d.abs() < 1e-300 {
        return None;
    }
    let (b2, c2) = (b.norm_sqr(), c.norm_sqr());
    let centre = Complex64::new(c.im * b2 - b.im * c2, b.re * c2 - c.re * b2) / d;
    Some((centre + a, centre.norm()))
}

/// Exact `sup_u P(|X - u| <= eta)` for an atomic law.
fn atomic_concentration(atoms: &[(Complex64, f64)], eta: f64) -> f64 {
    if atoms.iter().all(|(a, _)| a.im == 0.0) {
        let mut line: Vec<(f64, f64)> = atoms.iter().map(|(a, w)| (a.re, *w)).collect();
        line.sort_by(|a, b| a.0.total_cmp(&b.0));
        return window_mass_atoms(&line, eta);
    }
    let m = atoms.len();
    let mut best: f64 = 0.0;
    for mask in 1u32..(1 << m) {
        let chosen: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let mass: f64 = chosen.iter().map(|&i| atoms[i].1).sum();
        if mass <= best {
            continue;
        }
        let pts: Vec<Complex64> = chosen.iter().map(|&i| atoms[i].0).collect();
        if enclosing_radius(&pts) <= eta {
            best = mass;
        }
    }
    best.min(1.0)
}

/// Best fraction of `samples` in a closed disc of radius `eta` centred at one
/// of the first [`DISC_CENTRES`] samples. The centre set does not depend on
/// `eta`, so the estimate is nondecreasing in `eta`.
fn disc_mass(samples: &[Complex64], eta: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let centres = &samples[..samples.len().min(DISC_CENTRES)];
    let best = if eta == 0.0 {
        centres
            .iter()
            .map(|c| samples.iter().filter(|s| *s == c).count())
            .max()
            .unwrap_or(0)
    } else {
        let cell = |w: Complex64| ((w.re / eta).floor() as i64, (w.im / eta).floor() as i64);
        let mut buckets: HashMap<(i64, i64), Vec<Complex64>> = HashMap::new();
        for &s in samples {
            buckets.entry(cell(s)).or_default().push(s);
        }
        centres
            .par_iter()
            .map(|&c| {
                let (cx, cy) = cell(c);
                let mut count = 0;
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        if let Some(bucket) = buckets.get(&(cx.saturating_add(dx), cy.saturating_add(dy))) {
                            count += bucket.iter().filter(|s| (*s - c).norm() <= eta).count();
                        }
                    }
                }
                count
            })
            .max()
            .unwrap_or(0)
    };
    best as f64 / samples.len() as f64
}

fn empirical_concentration(samples: Vec<Complex64>, eta: f64, real: bool) -> f64 {
    if real {
        let mut line: Vec<f64> = samples.into_iter().map(|s| s.re).collect();
        line.sort_by(f64::total_cmp);
        window_mass_sorted(&line, eta)
    } else {
        disc_mass(&samples, eta)
    }
}

/// Concentration function `Q(eta) = sup_u P(|X - u| <= eta)` of one entry.
///
/// Exact for atomic laws. Continuous laws use `samples` draws from an
/// auxiliary stream of `seed`: real laws take the best window over the sorted
/// sample, complex laws the best disc over a fixed set of sample centres.
pub fn concentration_q(dist: &EntryDistribution, eta: f64, samples: usize, seed: u64) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(Error::Domain(format!("eta={eta} must be nonnegative")));
    }
    dist.validate()?;
    if let Some(atoms) = dist.atoms() {
        return Ok(atomic_concentration(&atoms, eta));
    }
    if eta == 0.0 {
        return Ok(0.0);
    }
    if samples == 0 {
        return Err(Error::Domain("no samples requested".into()));
    }
    let mut stream = StreamState::auxiliary(seed, 0, Q_CHANNEL);
    let draws: Vec<Complex64> = (0..samples).map(|_| dist.draw(&mut stream)).collect();
    Ok(empirical_concentration(draws, eta, !dist.is_complex()))
}

/// Monte Carlo `sup_u P(|S - u| <= eta)` for `S = sum_k x_k eps_k X_k`,
/// `eps_k` Bernoulli(`p_n`).
pub fn small_ball(x: &[f64], dist: &EntryDistribution, p_n: f64, eta: f64, trials: usize, seed: u64) -> Result<f64> {
    if trials < MIN_SMALL_BALL_TRIALS {
        return Err(Error::Domain(format!(
            "small-ball estimate needs at least {MIN_SMALL_BALL_TRIALS} trials, got {trials}"
        )));
    }
    if !(p_n > 0.0 && p_n <= 1.0) {
        return Err(Error::Domain(format!("p_n={p_n} not in (0,1]")));
    }
    if !(eta >= 0.0) {
        return Err(Error::Domain(format!("eta={eta} must be nonnegative")));
    }
    dist.validate()?;
    let sums: Vec<Complex64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut stream = StreamState::auxiliary(seed, t, SMALL_BALL_CHANNEL);
            let mut s = Complex64::new(0.0, 0.0);
            for &xk in x {
                if p_n < 1.0 && stream.random::<f64>() >= p_n {
                    continue;
                }
                s += dist.draw(&mut stream) * xk;
            }
            s
        })
        .collect();
    Ok(empirical_concentration(sums, eta, !dist.is_complex()))
}

/// `K n sqrt(p_n)`.
pub fn norm_bound(config: &EnsembleConfig) -> f64 {
    NORM_FACTOR * config.n as f64 * config.p_n.sqrt()
}

/// `(s_n, s_1)` of one trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtremeSv {
    pub smallest: f64,
    pub largest: f64,
}

/// Extreme singular values of `X - zI` for trials `0..trials`, in trial
/// order.
pub fn extreme_singular_values(config: &EnsembleConfig, z: Complex64, trials: usize) -> Result<Vec<ExtremeSv>> {
    config.validate()?;
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = singular_values(&shift(sample_matrix(config, t)?, z)?)?;
            Ok(ExtremeSv {
                smallest: s.smallest(),
                largest: s.largest(),
            })
        })
        .collect()
}

/// Empirical `P(s_n <= threshold, s_1 <= K n sqrt(p_n))` on a threshold
/// ladder.
#[derive(Clone, Debug, PartialEq)]
pub struct TailTable {
    pub thresholds: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub trials: usize,
    pub n: usize,
    pub p_n: f64,
    pub z: Complex64,
    /// Frequency of `s_1 > K n sqrt(p_n)`.
    pub norm_violation_frequency: f64,
}

impl TailTable {
    /// `threshold,frequency,trials,n,p_n,z_re,z_im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["threshold", "frequency", "trials", "n", "p_n", "z_re", "z_im"])
            .map_err(|e| csv_error(path, e))?;
        for (t, f) in self.thresholds.iter().zip(&self.frequencies) {
            w.write_record([
                format!("{t:.16e}"),
                format!("{f:.16e}"),
                self.trials.to_string(),
                self.n.to_string(),
                format!("{:.16e}", self.p_n),
                format!("{:.16e}", self.z.re),
                format!("{:.16e}", self.z.im),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::Domain("no thresholds".into()));
    }
    if thresholds.iter().any(|&t| !(t > 0.0 && t.is_finite())) || thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "thresholds must be positive and strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Builds the tail table from precomputed extremes.
pub fn tail_table(
    config: &EnsembleConfig,
    z: Complex64,
    extremes: &[ExtremeSv],
    thresholds: &[f64],
) -> Result<TailTable> {
    check_thresholds(thresholds)?;
    if extremes.is_empty() {
        return Err(Error::Domain("no trials".into()));
    }
    let bound = norm_bound(config);
    let trials = extremes.len();
    let good: Vec<f64> = extremes
        .iter()
        .filter(|e| e.largest <= bound)
        .map(|e| e.smallest)
        .collect();
    let frequencies = thresholds
        .iter()
        .map(|&t| good.iter().filter(|&&s| s <= t).count() as f64 / trials as f64)
        .collect();
    Ok(TailTable {
        thresholds: thresholds.to_vec(),
        frequencies,
        trials,
        n: config.n,
        p_n: config.p_n,
        z,
        norm_violation_frequency: (trials - good.len()) as f64 / trials as f64,
    })
}

pub fn min_sv_tail(config: &EnsembleConfig, z: Complex64, trials: usize, thresholds: &[f64]) -> Result<TailTable> {
    if trials < MIN_TAIL_TRIALS {
        return Err(Error::Domain(format!(
            "tail estimate needs at least {MIN_TAIL_TRIALS} trials"
        )));
    }
    check_thresholds(thresholds)?;
    let extremes = extreme_singular_values(config, z, trials)?;
    tail_table(config, z, &extremes, thresholds)
}

/// Empirical `P(s_1 >= threshold)` at `z = 0`.
pub fn largest_sv_tail_at(config: &EnsembleConfig, trials: usize, threshold: f64) -> Result<f64> {
    if trials < MIN_TAIL_TRIALS {
        return Err(Error::Domain(format!(
            "tail estimate needs at least {MIN_TAIL_TRIALS} trials"
        )));
    }
    let extremes = extreme_singular_values(config, Complex64::new(0.0, 0.0), trials)?;
    Ok(extremes.iter().filter(|e| e.largest >= threshold).count() as f64 / trials as f64)
}

/// Empirical `P(s_1 >= n sqrt(p_n))`.
pub fn largest_sv_tail(config: &EnsembleConfig, trials: usize) -> Result<f64> {
    largest_sv_tail_at(config, trials, config.n as f64 * config.p_n.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / (n as f64).sqrt(); n]
    }

    #[test]
    fn classify_examples() {
        let mut e1 = vec![0.0; 10];
        e1[0] = 1.0;
        let c = classify_vector(&e1, 0.1, 0.5).unwrap();
        assert_eq!((c.tag, c.residual), (VectorTag::Sparse, 0.0));
        let c = classify_vector(&uniform(100), 0.5, 0.1).unwrap();
        assert_eq!(c.tag, VectorTag::Incompressible);
        assert!((c.residual - 0.5f64.sqrt()).abs() < 1e-14);
        let c = classify_vector(&uniform(7), 1.0, 0.1).unwrap();
        assert_eq!(c.tag, VectorTag::Sparse);
        let x = [0.8, 0.6 * 0.8, 0.6 * 0.6];
        let c = classify_vector(&x, 0.34, 0.7).unwrap();
        assert_eq!(c.tag, VectorTag::Compressible);
        assert!((c.residual - 0.6).abs() < 1e-15);
        assert!(classify_vector(&[0.5, 0.5], 0.5, 0.1).is_err());
        assert!(classify_vector(&e1, 0.0, 0.1).is_err());
        assert!(classify_vector(&e1, 0.5, 1.0).is_err());
    }

    #[test]
    fn spread_set_examples() {
        assert_eq!(
            spread_set(&uniform(100), 0.5, 0.5).unwrap(),
            (0..100).collect::<Vec<_>>()
        );
        let mut e1 = vec![0.0; 10];
        e1[0] = 1.0;
        assert!(matches!(spread_set(&e1, 0.5, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn enclosing_circles() {
        let c = |a: f64, b: f64| Complex64::new(a, b);
        assert_eq!(enclosing_radius(&[c(1.0, 1.0)]), 0.0);
        assert!((enclosing_radius(&[c(0.0, 0.0), c(2.0, 0.0)]) - 1.0).abs() < 1e-15);
        // equilateral triangle of side 1: circumradius 1/sqrt(3)
        let tri = [c(0.0, 0.0), c(1.0, 0.0), c(0.5, 3f64.sqrt() / 2.0)];
        assert!((enclosing_radius(&tri) - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        // obtuse triangle: the long side's diameter wins
        let obtuse = [c(0.0, 0.0), c(4.0, 0.0), c(2.0, 0.5)];
        assert!((enclosing_radius(&obtuse) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn concentration_of_atomic_laws() {
        let q = |d: EntryDistribution, eta| concentration_q(&d, eta, 0, 0).unwrap();
        assert_eq!(q(EntryDistribution::Rademacher, 0.5), 0.5);
        assert_eq!(q(EntryDistribution::Rademacher, 1.0), 1.0);
        assert_eq!(q(EntryDistribution::Rademacher, 0.0), 0.5);
        assert_eq!(q(EntryDistribution::ComplexRademacher, 0.5), 0.25);
        assert_eq!(q(EntryDistribution::ComplexRademacher, 0.75), 0.5);
        assert_eq!(q(EntryDistribution::ComplexRademacher, 1.0), 1.0);
        let skewed = EntryDistribution::two_point_with_p(1.0 / 9.0).unwrap();
        assert!((q(skewed, 0.5) - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn concentration_of_continuous_laws() {
        let g = concentration_q(&EntryDistribution::RealGaussian, 0.5, 200_000, 3).unwrap();
        let exact = 0.382_924_922_548_026; // 2 Phi(1/2) - 1
        assert!((g - exact).abs() < 0.01, "{g}");
        let cg = concentration_q(&EntryDistribution::ComplexGaussian, 0.5, 200_000, 3).unwrap();
        let exact = 1.0 - (-0.25f64).exp(); // |X|^2 ~ Exp(1)
        assert!((cg - exact).abs() < 0.01, "{cg}");
        let u = concentration_q(&EntryDistribution::UniformSymmetric, 0.5, 200_000, 3).unwrap();
        assert!((u - 1.0 / (2.0 * 3f64.sqrt())).abs() < 0.01, "{u}");
        assert_eq!(
            concentration_q(&EntryDistribution::RealGaussian, 0.0, 1000, 3).unwrap(),
            0.0
        );
        assert!(concentration_q(&EntryDistribution::RealGaussian, -1.0, 1000, 3).is_err());
    }

    #[test]
    fn small_ball_littlewood_offord() {
        let est = small_ball(
            &uniform(10),
            &EntryDistribution::Rademacher,
            1.0,
            0.01 / 10f64.sqrt(),
            20_000,
            5,
        )
        .unwrap();
        assert!((est - 252.0 / 1024.0).abs() < 0.02, "{est}");
        let wide = small_ball(&uniform(10), &EntryDistribution::Rademacher, 1.0, 100.0, 10_000, 5).unwrap();
        assert_eq!(wide, 1.0);
        assert!(small_ball(&uniform(10), &EntryDistribution::Rademacher, 1.0, 0.1, 100, 5).is_err());
    }

    #[test]
    fn tail_table_edges() {
        let config = EnsembleConfig::dense(4, EntryDistribution::RealGaussian, 1);
        let extremes = vec![
            ExtremeSv {
                smallest: 0.1,
                largest: 2.0,
            },
            ExtremeSv {
                smallest: 0.3,
                largest: 2.0,
            },
            ExtremeSv {
                smallest: 0.2,
                largest: 9.0,
            },
        ];
        let table = tail_table(&config, Complex64::new(0.0, 0.0), &extremes, &[0.05, 0.15, 0.5]).unwrap();
        assert_eq!(table.frequencies, vec![0.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert!((table.norm_violation_frequency - 1.0 / 3.0).abs() < 1e-15);
        assert!(tail_table(&config, Complex64::new(0.0, 0.0), &extremes, &[0.5, 0.1]).is_err());
    }

    #[test]
    fn largest_tail_single_entry() {
        let config = EnsembleConfig::dense(1, EntryDistribution::Rademacher, 9);
        assert_eq!(largest_sv_tail(&config, 60).unwrap(), 1.0);
        assert!(largest_sv_tail(&config, 10).is_err());
    }
}

//! Dense numerical kernels: shifts, Hermitization, eigenvalues, singular
//! values and column-to-subspace distances.
//!
//! Singular values come from the Hermitian eigenproblem of the Gram matrix
//! `(X - zI)(X - zI)^*`. Squaring costs half the digits of the smallest
//! singular value, so when it falls below `1e-6 s_1` it is recomputed by
//! inverse iteration on `(A^* A)^{-1}` driven by an LU factorization of `A`
//! itself.

mod hermitian;
mod lu;
mod matrix;
mod schur;

use num_complex::Complex64;

pub use hermitian::hermitian_eigenvalues;
pub use lu::Lu;
pub use matrix::CMatrix;
pub use schur::general_eigenvalues;

use crate::ensemble::{EnsembleConfig, MatrixSample};
use crate::error::{Error, Result};
use matrix::{dot_conj, norm2};

/// Relative size below which the smallest singular value is refined.
pub const REFINE_RATIO: f64 = 1e-6;
const INVERSE_ITERATION_MAX: usize = 200;

/// Where a spectrum came from.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSource {
    pub config: EnsembleConfig,
    pub trial_index: u64,
}

impl SpectrumSource {
    fn of(sample: &MatrixSample) -> Self {
        Self {
            config: sample.config().clone(),
            trial_index: sample.trial_index(),
        }
    }
}

/// The `n` eigenvalues of a sample, sorted by `(re, im)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrum {
    pub values: Vec<Complex64>,
    pub source: SpectrumSource,
}

impl ComplexSpectrum {
    /// Wraps precomputed eigenvalues, sorting them by `(re, im)`.
    pub fn from_values(mut values: Vec<Complex64>, config: EnsembleConfig) -> Self {
        sort_complex(&mut values);
        Self {
            values,
            source: SpectrumSource { config, trial_index: 0 },
        }
    }
}

/// Singular values `s_1 >= ... >= s_n >= 0` of `X - zI` (or of the smoothed
/// `X - r xi I - zI`).
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
    pub z: Complex64,
    pub r: f64,
    pub source: SpectrumSource,
}

impl SingularSpectrum {
    /// Wraps precomputed singular values, sorting them descending.
    pub fn from_values(mut values: Vec<f64>, z: Complex64, r: f64, config: EnsembleConfig) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self {
            values,
            z,
            r,
            source: SpectrumSource { config, trial_index: 0 },
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn smallest(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// `X - zI`. A sample may be shifted only once.
pub fn shift(sample: MatrixSample, z: Complex64) -> Result<MatrixSample> {
    sample.with_shift(z)
}

/// The `2n x 2n` Hermitian matrix `[[0, A], [A^*, 0]]` for the (already
/// shifted) sample matrix `A`.
pub fn hermitize(sample: &MatrixSample) -> CMatrix {
    hermitize_matrix(sample.entries())
}

pub fn hermitize_matrix(a: &CMatrix) -> CMatrix {
    let n = a.rows();
    let mut w = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            w[(i, n + j)] = a[(i, j)];
            w[(n + j, i)] = a[(i, j)].conj();
        }
    }
    w
}

/// Singular values of a square matrix, sorted descending.
pub fn matrix_singular_values(a: &CMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Domain("singular values are computed for square matrices".into()));
    }
    if !a.is_finite() {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut eig = hermitian_eigenvalues(&a.gram())?;
    eig.reverse();
    let mut s: Vec<f64> = eig.into_iter().map(|l| l.max(0.0).sqrt()).collect();
    let s1 = s[0];
    if s[n - 1] < REFINE_RATIO * s1 {
        s[n - 1] = refine_smallest(a);
    }
    Ok(s)
}

/// Smallest singular value by inverse iteration on `(A^* A)^{-1}`, using LU
/// of `A` so the conditioning is that of `A`, not of its Gram matrix.
fn refine_smallest(a: &CMatrix) -> f64 {
    let n = a.rows();
    let lu = Lu::new(a);
    if lu.is_singular() {
        return 0.0;
    }
    // deterministic, generic start vector
    let mut x: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = (i as f64 + 1.0) * 0.618_033_988_749_895;
            Complex64::new(1.0 + (t.fract() - 0.5), (3.0 * t).fract() - 0.5)
        })
        .collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut estimate = f64::INFINITY;
    for _ in 0..INVERSE_ITERATION_MAX {
        let w = lu.solve_adjoint(&x);
        let y = lu.solve(&w);
        // Rayleigh quotient of (A^*A)^{-1} at unit x is ||A^{-*} x||^2
        let rq = norm2(&w).powi(2);
        let ny = norm2(&y);
        if !(rq.is_finite() && ny.is_finite()) || ny == 0.0 {
            return 0.0;
        }
        let next = 1.0 / rq.sqrt();
        let converged = (estimate - next).abs() <= 1e-14 * next;
        estimate = next;
        x = y.into_iter().map(|v| v / ny).collect();
        if converged {
            break;
        }
    }
    estimate
}

/// Singular values of the sample matrix (including any shift/smoothing).
pub fn singular_values(sample: &MatrixSample) -> Result<SingularSpectrum> {
    let values = matrix_singular_values(sample.entries())?;
    Ok(SingularSpectrum {
        values,
        z: sample.applied_shift().unwrap_or(Complex64::new(0.0, 0.0)),
        r: sample.applied_smoothing().map_or(0.0, |s| s.r),
        source: SpectrumSource::of(sample),
    })
}

/// Eigenvalues sorted by `(re, im)`.
pub fn eigenvalues(sample: &MatrixSample) -> Result<ComplexSpectrum> {
    let mut values = general_eigenvalues(sample.entries())?;
    sort_complex(&mut values);
    Ok(ComplexSpectrum {
        values,
        source: SpectrumSource::of(sample),
    })
}

pub fn sort_complex(values: &mut [Complex64]) {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// `s_n`, accurate even when `s_n << s_1`. Exactly singular input gives 0.
pub fn smallest_singular_value(sample: &MatrixSample) -> Result<f64> {
    Ok(singular_values(sample)?.smallest())
}

/// `s_1 = ||A||_2`.
pub fn operator_norm(sample: &MatrixSample) -> Result<f64> {
    Ok(singular_values(sample)?.largest())
}

/// Euclidean distance from `columns[k]` to the span of the other columns.
///
/// The other columns are orthonormalized by modified Gram-Schmidt with one
/// reorthogonalization pass; columns that are numerically dependent on the
/// ones before them are dropped.
pub fn distance_to_span(columns: &[Vec<Complex64>], k: usize) -> Result<f64> {
    if columns.len() < 2 {
        return Err(Error::Domain("distance to span needs at least two columns".into()));
    }
    if k >= columns.len() {
        return Err(Error::Domain(format!("column index {k} out of range")));
    }
    let dim = columns[k].len();
    if columns.iter().any(|c| c.len() != dim) {
        return Err(Error::Domain("columns have different lengths".into()));
    }
    let scale = columns.iter().map(|c| norm2(c)).fold(0.0, f64::max);
    let drop_tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        if j == k {
            continue;
        }
        let mut v = col.clone();
        project_out(&mut v, &basis);
        project_out(&mut v, &basis);
        let nv = norm2(&v);
        if nv > drop_tol {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
    }
    let mut r = columns[k].clone();
    project_out(&mut r, &basis);
    project_out(&mut r, &basis);
    Ok(norm2(&r))
}

fn project_out(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for q in basis {
        let c = dot_conj(q, v);
        for (x, qi) in v.iter_mut().zip(q) {
            *x -= c * qi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_matrix, EntryDistribution, StreamState};
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        let cfg = EnsembleConfig::dense(n, EntryDistribution::ComplexGaussian, seed);
        sample_matrix(&cfg, 0).unwrap().into_entries()
    }

    #[test]
    fn shift_subtracts_from_diagonal_once() {
        let s = MatrixSample::from_matrix(CMatrix::from_row_major(1, 1, vec![c(2.0, 1.0)]));
        let t = shift(s, c(0.5, -1.0)).unwrap();
        assert_eq!(t.entries()[(0, 0)], c(1.5, 2.0));
        assert!(matches!(shift(t, c(0.0, 0.0)), Err(Error::Usage(_))));

        let a = random_matrix(6, 3);
        let s = MatrixSample::from_matrix(a.clone());
        let z = c(0.3, -0.7);
        let t = shift(s, z).unwrap();
        assert!((t.entries().trace() - (a.trace() - z * 6.0)).norm() <= 1e-14 * 6.0);
        let id = shift(MatrixSample::from_matrix(a.clone()), c(0.0, 0.0)).unwrap();
        assert_eq!(id.entries(), &a);
    }

    #[test]
    fn hermitize_structure() {
        let s = MatrixSample::from_matrix(CMatrix::from_row_major(1, 1, vec![c(3.0, 4.0)]));
        let w = hermitize(&s);
        assert_eq!(w[(0, 0)], c(0.0, 0.0));
        assert_eq!(w[(0, 1)], c(3.0, 4.0));
        assert_eq!(w[(1, 0)], c(3.0, -4.0));
        let e = hermitian_eigenvalues(&w).unwrap();
        assert!((e[0] + 5.0).abs() < 1e-14 && (e[1] - 5.0).abs() < 1e-14);

        let a = random_matrix(7, 8);
        let w = hermitize_matrix(&a);
        assert_eq!(w, w.adjoint());
        assert!((w.frobenius_norm_sqr() - 2.0 * a.frobenius_norm_sqr()).abs() < 1e-12);
        for i in 0..7 {
            for j in 0..7 {
                assert_eq!(w[(i, j)], c(0.0, 0.0));
                assert_eq!(w[(7 + i, 7 + j)], c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn hermitization_pairs_with_singular_values() {
        for (n, seed) in [(1, 1), (5, 2), (16, 3), (32, 4)] {
            let a = random_matrix(n, seed);
            let s = matrix_singular_values(&a).unwrap();
            let e = hermitian_eigenvalues(&hermitize_matrix(&a)).unwrap();
            let mut pm: Vec<f64> = s.iter().flat_map(|&x| [x, -x]).collect();
            pm.sort_by(f64::total_cmp);
            for (u, v) in e.iter().zip(&pm) {
                assert!((u - v).abs() < 1e-8, "n={n}: {u} vs {v}");
            }
        }
    }

    #[test]
    fn simple_singular_values() {
        let id = MatrixSample::from_matrix(CMatrix::identity(4));
        assert!(singular_values(&id)
            .unwrap()
            .values
            .iter()
            .all(|&s| (s - 1.0).abs() < 1e-15));
        let d = MatrixSample::from_matrix(CMatrix::diag_real(&[3.0, -4.0]));
        let s = singular_values(&d).unwrap().values;
        assert!((s[0] - 4.0).abs() < 1e-14 && (s[1] - 3.0).abs() < 1e-14);
        let mut bad = CMatrix::identity(2);
        bad[(1, 1)] = c(f64::INFINITY, 0.0);
        assert!(matches!(
            singular_values(&MatrixSample::from_matrix(bad)),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn product_of_singular_values_is_abs_det() {
        let a = random_matrix(8, 21);
        let s = matrix_singular_values(&a).unwrap();
        let prod: f64 = s.iter().product();
        let det = Lu::new(&a).det().norm();
        assert!((prod / det - 1.0).abs() < 1e-6);
    }

    #[test]
    fn frobenius_identity_and_ordering() {
        let a = random_matrix(30, 5);
        let s = matrix_singular_values(&a).unwrap();
        assert!(s.windows(2).all(|w| w[0] >= w[1]) && s[29] >= 0.0);
        let sum: f64 = s.iter().map(|x| x * x).sum();
        assert!((sum / a.frobenius_norm_sqr() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn smallest_singular_value_edge_cases() {
        let mut m = random_matrix(5, 6);
        for i in 0..5 {
            m[(i, 4)] = m[(i, 1)];
        }
        let s = smallest_singular_value(&MatrixSample::from_matrix(m)).unwrap();
        assert!(s.abs() < 1e-10, "{s}");

        let d = MatrixSample::from_matrix(CMatrix::diag_real(&[1.0, 1e-12]));
        let s = smallest_singular_value(&d).unwrap();
        assert!((s - 1e-12).abs() < 1e-14, "{s}");

        let exact = MatrixSample::from_matrix(CMatrix::diag_real(&[1.0, 0.0]));
        assert_eq!(smallest_singular_value(&exact).unwrap(), 0.0);
    }

    #[test]
    fn refined_smallest_value_survives_gram_squaring() {
        // A = U diag(1, 1e-10) V with non-trivial rotations
        let (cs, sn) = (0.6, 0.8);
        let u = CMatrix::from_real_rows(&[&[cs, -sn], &[sn, cs]]);
        let v = CMatrix::from_row_major(2, 2, vec![c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let a = u.matmul(&CMatrix::diag_real(&[1.0, 1e-10])).matmul(&v);
        let s = matrix_singular_values(&a).unwrap();
        assert!((s[1] / 1e-10 - 1.0).abs() < 1e-5, "{}", s[1]);
    }

    #[test]
    fn smallest_matches_inverse_norm() {
        let a = random_matrix(16, 77);
        let s = matrix_singular_values(&a).unwrap();
        let inv = Lu::new(&a).inverse();
        let inv_norm = matrix_singular_values(&inv).unwrap()[0];
        assert!((s[15] * inv_norm - 1.0).abs() < 1e-6);
        let sample = MatrixSample::from_matrix(a);
        assert_eq!(smallest_singular_value(&sample).unwrap(), s[15]);
    }

    #[test]
    fn operator_norm_cases() {
        assert!((operator_norm(&MatrixSample::from_matrix(CMatrix::identity(3))).unwrap() - 1.0).abs() < 1e-15);
        let u = [c(1.0, 0.0), c(2.0, 1.0), c(0.0, -1.0)];
        let v = [c(0.5, 0.5), c(-1.0, 0.0), c(3.0, 0.0)];
        let m = CMatrix::from_fn(3, 3, |i, j| u[i] * v[j]);
        let expect = norm2(&u) * norm2(&v);
        assert!((operator_norm(&MatrixSample::from_matrix(m)).unwrap() / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_sorted_and_trace_consistent() {
        let sample = sample_matrix(&EnsembleConfig::dense(40, EntryDistribution::RealGaussian, 12), 0).unwrap();
        let spec = eigenvalues(&sample).unwrap();
        assert_eq!(spec.values.len(), 40);
        assert!(spec.values.windows(2).all(|w| (w[0].re, w[0].im) <= (w[1].re, w[1].im)));
        let sum: Complex64 = spec.values.iter().sum();
        let tr = sample.entries().trace();
        assert!((sum - tr).norm() <= 1e-6 * 40.0 * tr.norm().max(1.0));
    }

    #[test]
    fn eigenpair_residuals_are_small() {
        let a = random_matrix(64, 31);
        let vals = general_eigenvalues(&a).unwrap();
        let anorm = matrix_singular_values(&a).unwrap()[0];
        for lam in vals.iter().step_by(7) {
            // residual via the smallest singular value of A - lam I
            let mut shifted = a.clone();
            shifted.sub_diagonal(*lam);
            let smin = matrix_singular_values(&shifted).unwrap()[63];
            assert!(smin <= 1e-6 * anorm, "lambda={lam}: s_min={smin}");
        }
    }

    #[test]
    fn distance_to_span_cases() {
        let e = |i: usize| {
            (0..3)
                .map(|k| c(if k == i { 1.0 } else { 0.0 }, 0.0))
                .collect::<Vec<_>>()
        };
        let cols = vec![e(0), e(1), e(2)];
        for k in 0..3 {
            assert!((distance_to_span(&cols, k).unwrap() - 1.0).abs() < 1e-15);
        }
        let a = random_matrix(4, 9).columns();
        let mut dup = a.clone();
        dup[3] = dup[0].clone();
        assert!(distance_to_span(&dup, 3).unwrap() < 1e-14);
        assert!(distance_to_span(&cols[..1], 0).is_err());
    }

    #[test]
    fn distance_matches_least_squares_residual() {
        let mut st = StreamState::new(44);
        let cols: Vec<Vec<Complex64>> = (0..6)
            .map(|_| {
                (0..6)
                    .map(|_| c(st.random::<f64>() - 0.5, st.random::<f64>() - 0.5))
                    .collect()
            })
            .collect();
        for k in 0..6 {
            // normal equations oracle
            let others: Vec<Vec<Complex64>> = cols
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, c)| c.clone())
                .collect();
            let b = &cols[k];
            let m = CMatrix::from_columns(&others);
            let mh = m.adjoint();
            let coef = Lu::new(&mh.matmul(&m)).solve(&mh.matvec(b));
            let fit = m.matvec(&coef);
            let resid: Vec<Complex64> = b.iter().zip(&fit).map(|(x, y)| x - y).collect();
            let want = norm2(&resid);
            let got = distance_to_span(&cols, k).unwrap();
            assert!((got - want).abs() < 1e-8, "k={k}: {got} vs {want}");
        }
    }
}

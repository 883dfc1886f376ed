use circulaw::ensemble::{sample_matrix, smoothing_shift, EnsembleConfig, EntryDistribution, StreamState};
use circulaw::linalg::{eigenvalues, matrix_singular_values, shift, singular_values, CMatrix};
use circulaw::Complex64;
use rand::Rng;

fn random_matrix(n: usize, rng: &mut StreamState) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

/// `I - 2 v v^* / |v|^2`.
fn reflector(n: usize, rng: &mut StreamState) -> CMatrix {
    let v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum();
    CMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        Complex64::new(id, 0.0) - v[i] * v[j].conj() * (2.0 / norm)
    })
}

#[test]
fn singular_values_are_unitarily_invariant() {
    let mut rng = StreamState::new(91);
    for n in [1, 5, 17, 40] {
        let x = random_matrix(n, &mut rng);
        let u = reflector(n, &mut rng).matmul(&reflector(n, &mut rng));
        let v = reflector(n, &mut rng);
        let a = matrix_singular_values(&x).unwrap();
        let b = matrix_singular_values(&u.matmul(&x).matmul(&v)).unwrap();
        for (s, t) in a.iter().zip(&b) {
            assert!((s - t).abs() <= 1e-8, "n={n}: {s} vs {t}");
        }
    }
}

#[test]
fn weyl_shift_bound() {
    let config = EnsembleConfig::dense(48, EntryDistribution::ComplexGaussian, 5);
    for trial in 0..4 {
        let base = sample_matrix(&config, trial).unwrap();
        for (z, w) in [(0.0, 0.1), (0.3, 0.35), (1.0, 1.0 + 1e-3), (-2.0, 0.5)] {
            let (z, w) = (Complex64::new(z, 0.2), Complex64::new(w, -0.1));
            let a = singular_values(&shift(base.clone(), z).unwrap()).unwrap().values;
            let b = singular_values(&shift(base.clone(), w).unwrap()).unwrap().values;
            for (s, t) in a.iter().zip(&b) {
                assert!((s - t).abs() <= (z - w).norm() + 1e-12);
            }
        }
    }
}

#[test]
fn smoothing_translates_the_spectrum() {
    let config = EnsembleConfig::dense(32, EntryDistribution::RealGaussian, 8);
    for trial in 0..5 {
        let sample = sample_matrix(&config, trial).unwrap();
        let plain = eigenvalues(&sample).unwrap().values;
        let mut stream = StreamState::for_smoothing(config.master_seed, trial);
        let smoothed = smoothing_shift(sample, 0.5, &mut stream).unwrap();
        let xi = smoothed.applied_smoothing().unwrap().xi;
        let mut got = eigenvalues(&smoothed).unwrap().values;
        for l in &plain {
            let target = l - xi * 0.5;
            let (i, d) = got
                .iter()
                .map(|g| (g - target).norm())
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d <= 1e-8, "{target} unmatched, nearest at {d}");
            got.swap_remove(i);
        }
    }
}

#[test]
fn double_smoothing_is_rejected() {
    let config = EnsembleConfig::dense(4, EntryDistribution::Rademacher, 1);
    let mut stream = StreamState::for_smoothing(1, 0);
    let once = smoothing_shift(sample_matrix(&config, 0).unwrap(), 0.2, &mut stream).unwrap();
    assert!(matches!(
        smoothing_shift(once, 0.2, &mut stream),
        Err(circulaw::Error::Usage(_))
    ));
}

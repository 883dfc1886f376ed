//! Eigenvalues of general complex matrices: Householder reduction to upper
//! Hessenberg form followed by single-shift implicit QR with Wilkinson shifts
//! and deflation at negligible subdiagonal entries.

use num_complex::Complex64;

use super::matrix::{norm2, CMatrix};
use crate::error::{Error, Result};

/// Sweep budget per matrix dimension.
const SWEEPS_PER_DIM: usize = 30;

#[inline]
fn abs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Reduces `a` to upper Hessenberg form in place.
pub(crate) fn hessenberg_in_place(a: &mut CMatrix) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n - 2 {
        let m = n - k - 1;
        for i in 0..m {
            u[i] = a[(k + 1 + i, k)];
        }
        let x = &mut u[..m];
        if x[1..].iter().all(|z| z.re == 0.0 && z.im == 0.0) {
            continue;
        }
        let xnorm = norm2(x);
        let x0 = x[0];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        x[0] = x0 + phase * xnorm;
        let tau = 2.0 / x.iter().map(|z| z.norm_sqr()).sum::<f64>();

        // left: rows k+1.., columns k..; w_j = sum_i conj(u_i) a_ij
        let wcols = &mut w[..n - k];
        wcols.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for i in 0..m {
            let ui = x[i].conj();
            let row = &a.row(k + 1 + i)[k..];
            for (wj, aij) in wcols.iter_mut().zip(row) {
                *wj += ui * aij;
            }
        }
        for i in 0..m {
            let f = x[i] * tau;
            let row = &mut a.row_mut(k + 1 + i)[k..];
            for (aij, wj) in row.iter_mut().zip(wcols.iter()) {
                *aij -= f * wj;
            }
        }
        // right: all rows, columns k+1..
        for r in 0..n {
            let row = &mut a.row_mut(r)[k + 1..];
            let mut t = Complex64::new(0.0, 0.0);
            for (aij, uj) in row.iter().zip(x.iter()) {
                t += aij * uj;
            }
            t *= tau;
            for (aij, uj) in row.iter_mut().zip(x.iter()) {
                *aij -= t * uj.conj();
            }
        }
        a[(k + 1, k)] = -phase * xnorm;
        for i in k + 2..n {
            a[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Rotation `[c s; -conj(s) c]` with real `c` mapping `(a, b)` to `(r, 0)`.
#[inline]
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64, Complex64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0), a);
    }
    if na == 0.0 {
        let s = b.conj() / nb;
        return (0.0, s, Complex64::new(nb, 0.0));
    }
    let rho = na.hypot(nb);
    let phase = a / na;
    let c = na / rho;
    let s = phase * b.conj() / rho;
    (c, s, phase * rho)
}

/// Eigenvalues of the 2x2 block `[a b; c d]`.
fn eig2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let half_tr = (a + d) * 0.5;
    let half_diff = (a - d) * 0.5;
    let disc = (half_diff * half_diff + b * c).sqrt();
    let plus = half_tr + disc;
    let minus = half_tr - disc;
    let (big, small_naive) = if plus.norm() >= minus.norm() {
        (plus, minus)
    } else {
        (minus, plus)
    };
    if big.norm() == 0.0 {
        return (big, small_naive);
    }
    let det = a * d - b * c;
    (big, det / big)
}

/// Wilkinson shift: eigenvalue of the trailing 2x2 block closer to its last
/// diagonal entry.
fn wilkinson(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let (l1, l2) = eig2(a, b, c, d);
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Eigenvalues of an upper Hessenberg matrix (destroyed in the process).
pub(crate) fn hessenberg_eigenvalues(h: &mut CMatrix) -> Result<Vec<Complex64>> {
    let n = h.rows();
    let mut eig = vec![Complex64::new(0.0, 0.0); n];
    if n == 0 {
        return Ok(eig);
    }
    let budget = SWEEPS_PER_DIM * n.max(1);
    let mut total_sweeps = 0usize;
    let mut hi = n - 1;
    let mut its = 0usize;
    let hnorm = h.max_abs();

    loop {
        if hi == 0 {
            eig[0] = h[(0, 0)];
            break;
        }
        // locate the active block [lo, hi]
        let mut lo = hi;
        while lo > 0 {
            let sub = abs1(h[(lo, lo - 1)]);
            let mut local = abs1(h[(lo - 1, lo - 1)]) + abs1(h[(lo, lo)]);
            if local == 0.0 {
                local = hnorm;
            }
            if sub <= f64::EPSILON * local || sub <= f64::MIN_POSITIVE {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            eig[hi] = h[(hi, hi)];
            hi -= 1;
            its = 0;
            continue;
        }
        if lo + 1 == hi {
            let (l1, l2) = eig2(h[(lo, lo)], h[(lo, hi)], h[(hi, lo)], h[(hi, hi)]);
            eig[lo] = l1;
            eig[hi] = l2;
            if lo == 0 {
                break;
            }
            hi = lo - 1;
            its = 0;
            continue;
        }

        total_sweeps += 1;
        its += 1;
        if total_sweeps > budget {
            return Err(Error::Numeric(format!(
                "QR iteration did not converge: {total_sweeps} sweeps on a {n}x{n} matrix, \
                 {} eigenvalues still unresolved (active block {lo}..={hi}, last subdiagonal {:.3e})",
                hi + 1,
                h[(hi, hi - 1)].norm()
            )));
        }

        let shift = if its.is_multiple_of(10) {
            // exceptional shift to break cycles
            h[(hi, hi)] + Complex64::new(0.75 * abs1(h[(hi, hi - 1)]), 0.0)
        } else {
            wilkinson(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };

        qr_sweep(h, lo, hi, shift);
    }
    Ok(eig)
}

/// One implicit single-shift QR sweep on the block `[lo, hi]`, touching only
/// the block itself since no Schur vectors are accumulated.
fn qr_sweep(h: &mut CMatrix, lo: usize, hi: usize, shift: Complex64) {
    let ncols = h.cols();
    let data = h.as_mut_slice();
    let mut x = data[lo * ncols + lo] - shift;
    let mut y = data[(lo + 1) * ncols + lo];
    for k in lo..hi {
        if k > lo {
            x = data[k * ncols + k - 1];
            y = data[(k + 1) * ncols + k - 1];
        }
        let (c, s, r) = givens(x, y);
        if k > lo {
            data[k * ncols + k - 1] = r;
            data[(k + 1) * ncols + k - 1] = Complex64::new(0.0, 0.0);
        }
        let sc = s.conj();
        // rows k, k+1 over columns k..=hi
        {
            let (top, bottom) = data.split_at_mut((k + 1) * ncols);
            let rk = &mut top[k * ncols + k..k * ncols + hi + 1];
            let rk1 = &mut bottom[k..hi + 1];
            for (a, b) in rk.iter_mut().zip(rk1.iter_mut()) {
                let (av, bv) = (*a, *b);
                *a = av * c + s * bv;
                *b = bv * c - sc * av;
            }
        }
        // columns k, k+1 over rows lo..=min(k+2, hi)
        let last = (k + 2).min(hi);
        for i in lo..=last {
            let base = i * ncols + k;
            let (av, bv) = (data[base], data[base + 1]);
            data[base] = av * c + sc * bv;
            data[base + 1] = bv * c - s * av;
        }
    }
}

/// Eigenvalues of a general square matrix, unordered.
pub fn general_eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::Domain("eigenvalues need a square matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let mut h = a.clone();
    hessenberg_in_place(&mut h);
    hessenberg_eigenvalues(&mut h)
}

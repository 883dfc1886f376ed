//! Eigenvalues of complex Hermitian matrices: Householder reduction to a real
//! symmetric tridiagonal matrix, then implicit QL with Wilkinson shifts.

use num_complex::Complex64;

use super::matrix::{norm2, CMatrix};
use crate::error::{Error, Result};

const QL_MAX_SWEEPS: usize = 60;

/// Reduces Hermitian `a` (both triangles stored) in place and returns the
/// real diagonal and the moduli of the off-diagonal.
///
/// Each step applies the Hermitian reflector `H = I - tau u u^*`; the
/// resulting off-diagonal entries are complex, but a diagonal unitary
/// similarity maps them onto their moduli without changing the spectrum.
pub(crate) fn tridiagonalize(mut a: CMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    let mut p = vec![Complex64::new(0.0, 0.0); n];

    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        // column k below the diagonal, read from row k by Hermitian symmetry
        for i in 0..m {
            u[i] = a[(k, k + 1 + i)].conj();
        }
        let x = &mut u[..m];
        let xnorm = norm2(x);
        diag[k] = a[(k, k)].re;
        off[k] = xnorm;
        let tail_zero = x[1..].iter().all(|z| z.re == 0.0 && z.im == 0.0);
        if xnorm == 0.0 || tail_zero {
            continue;
        }
        let x0 = x[0];
        let phase = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        x[0] = x0 + phase * xnorm;
        let unorm_sqr: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        if unorm_sqr == 0.0 {
            continue;
        }
        let tau = 2.0 / unorm_sqr;

        // p = tau * A22 u
        let base = k + 1;
        for i in 0..m {
            let row = &a.row(base + i)[base..];
            let mut s = Complex64::new(0.0, 0.0);
            for (aij, uj) in row.iter().zip(x.iter()) {
                s += aij * uj;
            }
            p[i] = s * tau;
        }
        // K = tau/2 u^* p (real for Hermitian A22)
        let mut kk = 0.0;
        for i in 0..m {
            kk += (x[i].conj() * p[i]).re;
        }
        kk *= 0.5 * tau;
        for i in 0..m {
            p[i] -= x[i] * kk;
        }
        // A22 -= u q^* + q u^*
        for i in 0..m {
            let ui = x[i];
            let qi = p[i];
            let row = &mut a.row_mut(base + i)[base..];
            for ((aij, uj), qj) in row.iter_mut().zip(x.iter()).zip(p[..m].iter()) {
                *aij -= ui * qj.conj() + qi * uj.conj();
            }
        }
    }
    if n > 0 {
        diag[n - 1] = a[(n - 1, n - 1)].re;
    }
    (diag, off)
}

/// Eigenvalues of a real symmetric tridiagonal matrix by implicit QL,
/// returned unsorted.
pub(crate) fn tridiagonal_eigenvalues(mut d: Vec<f64>, off: &[f64]) -> Result<Vec<f64>> {
    let n = d.len();
    if n <= 1 {
        return Ok(d);
    }
    // e[i] couples i and i+1; e[n-1] is scratch
    let mut e = off.to_vec();
    e.push(0.0);
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m] == 0.0 {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(Error::Numeric(format!(
                    "tridiagonal QL did not converge for eigenvalue {l} of {n} after {QL_MAX_SWEEPS} sweeps"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

/// Eigenvalues of a Hermitian matrix, sorted ascending. Only the Hermitian
/// part of the input is meaningful; both triangles must be stored.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Domain("hermitian eigensolve needs a square matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    let (d, e) = tridiagonalize(a.clone());
    let mut vals = tridiagonal_eigenvalues(d, &e)?;
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

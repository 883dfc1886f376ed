//! Limiting objects of the Hermitized singular-value problem.
//!
//! With `t = |z|^2` and `y = S + alpha`, the self-consistent equation for the
//! limiting Stieltjes transform `S(alpha, z)` of the symmetrized law
//! `nu~(., z)` is the cubic
//!
//! ```text
//! L(y) = y^3 - alpha y^2 + (1 - t) y + alpha t = 0.
//! ```
//!
//! On the real line (`alpha = x`) the density of `nu~` is `|Im y| / pi` where
//! `L` has one real root and zero where it has three. `nu~` is supported on
//! `x2 <= |x| <= x1`; `nu(., z)`, the law of squared singular values, is its
//! image under `x -> x^2`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::path::Path;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{general_eigenvalues, CMatrix};
use crate::measures::csv_error;
use crate::quad::{integrate_panels, require_accuracy, uniform_breaks};

/// Below this `|z|` the edge formula switches to its cancellation-free form.
const SMALL_Z: f64 = 1e-4;
const GRID_INTERVALS: usize = 512;
const GRID_ORDER: usize = 8;
const IM_POSITIVE: f64 = 1e-12;
const POTENTIAL_ERROR: f64 = 1e-4;
const CDF_TOL: f64 = 1e-12;
const POTENTIAL_TOL: f64 = 1e-11;
const POTENTIAL_PANELS: usize = 4;

/// Support of `nu~(., z)`: `x2 <= |x| <= x1`.
///
/// `x2` is `None` for `|z| < 1`, where the support reaches the origin, and
/// `Some(0.0)` at `|z| = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportEdges {
    pub x1: f64,
    pub x1_squared: f64,
    pub x2: Option<f64>,
    /// Negative for `|z| < 1`.
    pub x2_squared: f64,
}

impl SupportEdges {
    /// Inner edge with `0` standing in for an absent one.
    pub fn inner(&self) -> f64 {
        self.x2.unwrap_or(0.0)
    }
}

/// `((1 + 8t)^{3/2} - 1) / (8t)`, tending to `3/2` as `t -> 0`.
fn edge_term(t: f64) -> f64 {
    if t == 0.0 {
        1.5
    } else if t < SMALL_Z * SMALL_Z {
        (1.5 * (8.0 * t).ln_1p()).exp_m1() / (8.0 * t)
    } else {
        ((1.0 + 8.0 * t).powf(1.5) - 1.0) / (8.0 * t)
    }
}

pub fn support_endpoints(z: Complex64) -> SupportEdges {
    let t = z.norm_sqr();
    let g = edge_term(t);
    let x1_squared = (5.0 + 2.0 * t) / 2.0 + g;
    let x2_squared = if t == 0.0 {
        f64::NEG_INFINITY
    } else {
        (5.0 + 2.0 * t) / 2.0 - g - 1.0 / (4.0 * t)
    };
    let x2 = (t >= 1.0).then(|| x2_squared.max(0.0).sqrt());
    SupportEdges {
        x1: x1_squared.sqrt(),
        x1_squared,
        x2,
        x2_squared,
    }
}

/// Monic cubic `y^3 + b y^2 + c y + d`.
#[derive(Clone, Copy, Debug)]
struct Cubic {
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

impl Cubic {
    fn new(alpha: Complex64, t: f64) -> Self {
        Self {
            b: -alpha,
            c: Complex64::new(1.0 - t, 0.0),
            d: alpha * t,
        }
    }

    fn eval(&self, y: Complex64) -> (Complex64, Complex64) {
        let value = ((y + self.b) * y + self.c) * y + self.d;
        let slope = (3.0 * y + 2.0 * self.b) * y + self.c;
        (value, slope)
    }

    /// Newton steps kept only while the residual decreases.
    fn polish(&self, mut y: Complex64, steps: usize) -> Complex64 {
        let (mut value, mut slope) = self.eval(y);
        for _ in 0..steps {
            if value == Complex64::new(0.0, 0.0) || slope == Complex64::new(0.0, 0.0) {
                break;
            }
            let next = y - value / slope;
            let (v, s) = self.eval(next);
            if !(v.norm() < value.norm()) {
                break;
            }
            y = next;
            value = v;
            slope = s;
        }
        y
    }

    fn companion_roots(&self) -> [Complex64; 3] {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let m = CMatrix::from_row_major(3, 3, vec![-self.b, -self.c, -self.d, one, zero, zero, zero, one, zero]);
        match general_eigenvalues(&m) {
            Ok(v) if v.len() == 3 && v.iter().all(|r| r.is_finite()) => [v[0], v[1], v[2]],
            _ => self.durand_kerner(),
        }
    }

    /// Fallback should the QR iteration ever refuse a 3x3 companion matrix.
    fn durand_kerner(&self) -> [Complex64; 3] {
        let seed = Complex64::new(0.4, 0.9);
        let scale = 1.0 + self.b.norm().max(self.c.norm()).max(self.d.norm());
        let mut r = [seed * scale, seed * seed * scale, seed * seed * seed * scale];
        for _ in 0..500 {
            let prev = r;
            for i in 0..3 {
                let mut denom = Complex64::new(1.0, 0.0);
                for (j, rj) in prev.iter().enumerate() {
                    if j != i {
                        denom *= r[i] - rj;
                    }
                }
                if denom != Complex64::new(0.0, 0.0) {
                    r[i] -= self.eval(r[i]).0 / denom;
                }
            }
            if r.iter().zip(&prev).all(|(a, b)| (a - b).norm() <= 1e-15 * scale) {
                break;
            }
        }
        r
    }
}

/// Discriminant of the real monic cubic `y^3 + b y^2 + c y + d`: negative
/// iff exactly one root is real.
fn discriminant(b: f64, c: f64, d: f64) -> f64 {
    18.0 * b * c * d - 4.0 * b * b * b * d + b * b * c * c - 4.0 * c * c * c - 27.0 * d * d
}

fn real_newton(b: f64, c: f64, d: f64, mut y: f64) -> f64 {
    let f = |y: f64| ((y + b) * y + c) * y + d;
    let mut fy = f(y);
    for _ in 0..8 {
        let slope = (3.0 * y + 2.0 * b) * y + c;
        if fy == 0.0 || slope == 0.0 {
            break;
        }
        let next = y - fy / slope;
        let fnext = f(next);
        if !(fnext.abs() < fy.abs()) {
            break;
        }
        y = next;
        fy = fnext;
    }
    y
}

/// Roots of `L(y) = y^3 - x y^2 + (1 - |z|^2) y + x |z|^2` for real `x`.
///
/// One real root and a conjugate pair when the discriminant is negative,
/// otherwise three real roots. The pair is recovered by deflating the
/// polished real root, so its imaginary part keeps full relative accuracy.
pub fn cubic_roots(x: f64, z: Complex64) -> [Complex64; 3] {
    let t = z.norm_sqr();
    let (b, c, d) = (-x, 1.0 - t, x * t);
    let approx = Cubic::new(Complex64::new(x, 0.0), t).companion_roots();
    if discriminant(b, c, d) < 0.0 {
        let seed = approx
            .iter()
            .min_by(|p, q| p.im.abs().total_cmp(&q.im.abs()))
            .map_or(0.0, |r| r.re);
        let r = real_newton(b, c, d, seed);
        // y^3 + b y^2 + c y + d = (y - r)(y^2 + p y + q)
        let p = b + r;
        let q = if r.abs() > 1.0 { -d / r } else { c + r * p };
        let half = -0.5 * p;
        let w = (q - half * half).max(0.0).sqrt();
        [
            Complex64::new(r, 0.0),
            Complex64::new(half, w),
            Complex64::new(half, -w),
        ]
    } else {
        let mut re: Vec<f64> = approx.iter().map(|y| real_newton(b, c, d, y.re)).collect();
        re.sort_by(f64::total_cmp);
        [re[0], re[1], re[2]].map(|v| Complex64::new(v, 0.0))
    }
}

/// Roots of `L(y)` for complex `alpha`, each given one Newton polish.
fn complex_cubic_roots(alpha: Complex64, t: f64) -> [Complex64; 3] {
    let cubic = Cubic::new(alpha, t);
    cubic.companion_roots().map(|y| cubic.polish(y, 1))
}

/// `S(alpha, z)`, the root of the self-consistent equation with `Im S > 0`.
///
/// Exactly one root of the induced cubic may have positive imaginary part;
/// anything else is reported as a numeric failure.
pub fn limit_stieltjes(alpha: Complex64, z: Complex64) -> Result<Complex64> {
    if !(alpha.im > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "Stieltjes transform needs Im alpha > 0, got {alpha}"
        )));
    }
    let t = z.norm_sqr();
    let cubic = Cubic::new(alpha, t);
    let candidates: Vec<Complex64> = complex_cubic_roots(alpha, t)
        .into_iter()
        .filter(|y| (y - alpha).im > IM_POSITIVE)
        .collect();
    match candidates.as_slice() {
        [y] => {
            let residual = cubic.eval(*y).0.norm();
            let bound = 1e-10 * alpha.norm().powi(3).max(1.0);
            if residual > bound {
                return Err(Error::Numeric(format!(
                    "cubic residual {residual:.3e} at alpha={alpha}, z={z}"
                )));
            }
            Ok(y - alpha)
        }
        _ => Err(Error::Numeric(format!(
            "{} roots with Im S > 0 at alpha={alpha}, z={z}",
            candidates.len()
        ))),
    }
}

fn density_t(x: f64, t: f64) -> f64 {
    let (b, c, d) = (-x, 1.0 - t, x * t);
    if discriminant(b, c, d) >= 0.0 {
        return 0.0;
    }
    let roots = cubic_roots(x, Complex64::new(t.sqrt(), 0.0));
    roots[1].im.abs() / PI
}

/// Density of `nu~(., z)` at `x`. Even in `x`.
pub fn limit_density(x: f64, z: Complex64) -> f64 {
    if !x.is_finite() {
        return 0.0;
    }
    density_t(x.abs(), z.norm_sqr())
}

/// `F(x, z) = nu((-inf, x], z)`, the limiting law of squared singular values,
/// by direct quadrature of the density.
pub fn limit_cdf(x: f64, z: Complex64) -> f64 {
    let edges = support_endpoints(z);
    if x <= 0.0 || x.is_nan() {
        return 0.0;
    }
    if x >= edges.x1_squared {
        return 1.0;
    }
    let lo = edges.inner();
    let u = x.sqrt();
    if u <= lo {
        return 0.0;
    }
    let t = z.norm_sqr();
    let half = integrate_panels(|v| density_t(v, t), &[lo, u], CDF_TOL).value;
    (2.0 * half).clamp(0.0, 1.0)
}

/// `U_0(z)`, the logarithmic potential of the uniform law on the unit disc.
pub fn disc_potential(z: Complex64) -> f64 {
    let r2 = z.norm_sqr();
    if r2 <= 1.0 {
        0.5 * (1.0 - r2)
    } else {
        -z.norm().ln()
    }
}

/// `g(s, t)`, with `dU_0/ds = -g/2` at `z = s + it`.
pub fn g_field(s: f64, t: f64) -> f64 {
    let r2 = s * s + t * t;
    if r2 > 1.0 {
        2.0 * s / r2
    } else {
        2.0 * s
    }
}

/// `-int ln|x| nu~(dx, z)` by quadrature of the limiting density.
pub fn potential_from_law(z: Complex64) -> Result<f64> {
    let edges = support_endpoints(z);
    let t = z.norm_sqr();
    let breaks = uniform_breaks(edges.inner(), edges.x1, POTENTIAL_PANELS);
    let half = integrate_panels(|u| u.ln() * density_t(u, t), &breaks, POTENTIAL_TOL);
    let value = require_accuracy(half, POTENTIAL_ERROR / 2.0, "logarithmic potential")?;
    Ok(-2.0 * value)
}

/// The limiting law for one `z`, with the CDF tabulated once.
///
/// The half-line CDF `C(u) = nu~([x2, u])` is integrated on the substitution
/// `u = a + (b - a)(1 - cos theta)/2`, which removes the square-root edges, with
/// Gauss-Legendre panels, and interpolated by cubic Hermite polynomials in
/// `theta`.
#[derive(Clone, Debug)]
pub struct LimitLaw {
    z: Complex64,
    t: f64,
    edges: SupportEdges,
    /// `C` and `dC/dtheta` at `theta_k = k pi / GRID_INTERVALS`.
    cum: Vec<f64>,
    slope: Vec<f64>,
}

impl LimitLaw {
    pub fn new(z: Complex64) -> Self {
        let edges = support_endpoints(z);
        let t = z.norm_sqr();
        let (a, b) = (edges.inner(), edges.x1);
        let h = PI / GRID_INTERVALS as f64;
        let rule = GaussLegendre::new(NonZeroUsize::new(GRID_ORDER).expect("nonzero order"));
        let integrand =
            |theta: f64| density_t(a + (b - a) * (1.0 - theta.cos()) / 2.0, t) * (b - a) / 2.0 * theta.sin();
        let mut cum = Vec::with_capacity(GRID_INTERVALS + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for k in 0..GRID_INTERVALS {
            acc += rule.integrate(k as f64 * h, (k + 1) as f64 * h, integrand);
            cum.push(acc);
        }
        let slope = (0..=GRID_INTERVALS).map(|k| integrand(k as f64 * h)).collect();
        Self {
            z,
            t,
            edges,
            cum,
            slope,
        }
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn edges(&self) -> SupportEdges {
        self.edges
    }

    /// Density of `nu~` at `x`.
    pub fn density(&self, x: f64) -> f64 {
        density_t(x.abs(), self.t)
    }

    /// Total mass of the tabulated density, `1` up to quadrature error.
    pub fn total_mass(&self) -> f64 {
        2.0 * self.cum[GRID_INTERVALS]
    }

    /// `nu~([x2, u])` for `u >= 0`.
    fn half_mass(&self, u: f64) -> f64 {
        let (a, b) = (self.edges.inner(), self.edges.x1);
        if u <= a {
            return 0.0;
        }
        if u >= b {
            return self.cum[GRID_INTERVALS];
        }
        let theta = (1.0 - 2.0 * (u - a) / (b - a)).clamp(-1.0, 1.0).acos();
        let h = PI / GRID_INTERVALS as f64;
        let k = ((theta / h) as usize).min(GRID_INTERVALS - 1);
        let s = theta / h - k as f64;
        let (y0, y1) = (self.cum[k], self.cum[k + 1]);
        let (m0, m1) = (self.slope[k] * h, self.slope[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let value =
            (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        value.clamp(y0.min(y1), y0.max(y1))
    }

    /// `F~(x, z) = nu~((-inf, x])`.
    pub fn cdf_symmetric(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let m = self.half_mass(x.abs());
        if x >= 0.0 {
            (0.5 + m).min(1.0)
        } else {
            (0.5 - m).max(0.0)
        }
    }

    /// `F(x, z) = nu((-inf, x])` on the squared scale.
    pub fn cdf_squared(&self, x: f64) -> f64 {
        if x <= 0.0 || x.is_nan() {
            return 0.0;
        }
        (2.0 * self.half_mass(x.sqrt())).min(1.0)
    }

    /// Writes `x,density,cdf` rows for the symmetrized law on `grid`.
    pub fn write_table(&self, path: &Path, grid: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["x", "density", "cdf"])
            .map_err(|e| csv_error(path, e))?;
        for &x in grid {
            w.write_record([
                format!("{x:.16e}"),
                format!("{:.16e}", self.density(x)),
                format!("{:.16e}", self.cdf_symmetric(x)),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Tabulates density and CDF of `nu~(., z)` on `grid` into a CSV file.
pub fn write_density_table(path: &Path, z: Complex64, grid: &[f64]) -> Result<()> {
    LimitLaw::new(z).write_table(path, grid)
}

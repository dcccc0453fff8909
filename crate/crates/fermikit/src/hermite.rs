//! Orthonormal oscillator eigenfunctions phi_k, the Mehler-type propagators,
//! and the closed-form joint particle density.
//!
//! phi_k(x) = (sqrt(2 pi) k!)^{-1/2} He_k(x) e^{-x^2/4}, with He_k the monic
//! Hermite polynomial orthogonal against e^{-x^2/2}. The recurrence is seeded
//! at the normalized level, phi_0 = (2 pi)^{-1/4} e^{-x^2/4}, so k! never
//! appears. For |x| beyond ~53 the seed e^{-x^2/4} underflows doubles, so an
//! exponent-tracked representation takes over automatically.

use crate::error::{FermiError, Result};
use crate::qseries::ModelParams;

/// |x| threshold beyond which the plain-double recurrence may underflow.
pub const PLAIN_DOUBLE_X_LIMIT: f64 = 52.0;

/// k threshold beyond which exponent tracking is forced.
pub const PLAIN_DOUBLE_K_LIMIT: usize = 50_000;

/// Uniform bound |phi_k(x)| <= KAPPA / (2 pi)^{1/4} for all k, x.
pub const KAPPA: f64 = 1.086435;

/// A real number mantissa * 2^exponent with |mantissa| in [1,2) or 0.
///
/// The i64 exponent covers e^{+-10^6} and far beyond; arithmetic
/// renormalizes after every operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledReal {
    mantissa: f64,
    exponent: i64,
}

impl ScaledReal {
    pub const ZERO: ScaledReal = ScaledReal { mantissa: 0.0, exponent: 0 };

    pub fn from_f64(v: f64) -> Self {
        if v == 0.0 {
            return Self::ZERO;
        }
        let bits = v.abs().to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        if raw_exp == 0 {
            // subnormal: scale up first
            let scaled = v * 2f64.powi(200);
            let mut s = Self::from_f64(scaled);
            s.exponent -= 200;
            return s;
        }
        let e = raw_exp - 1023;
        ScaledReal { mantissa: v / 2f64.powi(e as i32), exponent: e }
    }

    fn renorm(mut self) -> Self {
        if self.mantissa == 0.0 {
            return Self::ZERO;
        }
        let bits = self.mantissa.abs().to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let shift = raw_exp - 1023;
        if shift != 0 {
            self.mantissa /= 2f64.powi(shift as i32);
            self.exponent += shift;
        }
        self
    }

    pub fn mul_f64(self, v: f64) -> Self {
        ScaledReal { mantissa: self.mantissa * v, ..self }.renorm()
    }

    pub fn sub(self, other: Self) -> Self {
        if self.mantissa == 0.0 {
            return ScaledReal { mantissa: -other.mantissa, ..other };
        }
        if other.mantissa == 0.0 {
            return self;
        }
        let d = self.exponent - other.exponent;
        if d >= 120 {
            return self;
        }
        if d <= -120 {
            return ScaledReal { mantissa: -other.mantissa, ..other };
        }
        if d >= 0 {
            let m = self.mantissa - other.mantissa * 2f64.powi(-d as i32);
            ScaledReal { mantissa: m, exponent: self.exponent }.renorm()
        } else {
            let m = self.mantissa * 2f64.powi(d as i32) - other.mantissa;
            ScaledReal { mantissa: m, exponent: other.exponent }.renorm()
        }
    }

    /// Collapse to f64; under/overflow rounds to 0 or +-inf.
    pub fn to_f64(self) -> f64 {
        if self.mantissa == 0.0 {
            return 0.0;
        }
        if self.exponent > 1030 {
            return f64::INFINITY * self.mantissa.signum();
        }
        if self.exponent < -1070 {
            return 0.0;
        }
        // split the power so subnormal results still round correctly
        let h = (self.exponent / 2) as i32;
        self.mantissa * 2f64.powi(h) * 2f64.powi(self.exponent as i32 - h)
    }

    pub fn ln_abs(self) -> f64 {
        self.mantissa.abs().ln() + self.exponent as f64 * std::f64::consts::LN_2
    }
}

/// Evaluation mode for the phi recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    PlainDouble,
    ExponentTracked,
}

/// Configuration for a phi_0..phi_{max_index} evaluation sweep.
#[derive(Debug, Clone, Copy)]
pub struct HermiteBasis {
    pub max_index: usize,
    pub mode: EvalMode,
}

impl HermiteBasis {
    /// Pick the mode automatically from |x| and the max index.
    pub fn auto(max_index: usize, x: f64) -> Self {
        let mode = if x.abs() > PLAIN_DOUBLE_X_LIMIT || max_index > PLAIN_DOUBLE_K_LIMIT {
            EvalMode::ExponentTracked
        } else {
            EvalMode::PlainDouble
        };
        HermiteBasis { max_index, mode }
    }
}

/// phi_0..phi_{k_max}(x) in one recurrence sweep.
pub fn phi_column(k_max: usize, x: f64) -> Vec<ScaledReal> {
    let basis = HermiteBasis::auto(k_max, x);
    match basis.mode {
        EvalMode::PlainDouble => phi_column_plain(k_max, x).into_iter().map(ScaledReal::from_f64).collect(),
        EvalMode::ExponentTracked => phi_column_tracked(k_max, x),
    }
}

/// phi_0..phi_{k_max}(x) as plain doubles (entries that underflow become 0).
pub fn phi_column_f64(k_max: usize, x: f64) -> Vec<f64> {
    let basis = HermiteBasis::auto(k_max, x);
    match basis.mode {
        EvalMode::PlainDouble => phi_column_plain(k_max, x),
        EvalMode::ExponentTracked => phi_column_tracked(k_max, x).into_iter().map(ScaledReal::to_f64).collect(),
    }
}

fn phi_column_plain(k_max: usize, x: f64) -> Vec<f64> {
    let mut col = Vec::with_capacity(k_max + 1);
    let phi0 = (2.0 * std::f64::consts::PI).powf(-0.25) * (-x * x / 4.0).exp();
    col.push(phi0);
    if k_max == 0 {
        return col;
    }
    col.push(x * phi0);
    for k in 1..k_max {
        let next = (x * col[k] - (k as f64).sqrt() * col[k - 1]) / ((k + 1) as f64).sqrt();
        col.push(next);
    }
    col
}

fn phi_column_tracked(k_max: usize, x: f64) -> Vec<ScaledReal> {
    let mut col = Vec::with_capacity(k_max + 1);
    // ln phi_0 = -x^2/4 - ln(2 pi)/4
    let ln_phi0 = -x * x / 4.0 - 0.25 * (2.0 * std::f64::consts::PI).ln();
    let e = (ln_phi0 / std::f64::consts::LN_2).floor();
    let m = (ln_phi0 - e * std::f64::consts::LN_2).exp();
    let phi0 = ScaledReal { mantissa: m, exponent: e as i64 }.renorm();
    col.push(phi0);
    if k_max == 0 {
        return col;
    }
    col.push(phi0.mul_f64(x));
    for k in 1..k_max {
        let a = col[k].mul_f64(x);
        let b = col[k - 1].mul_f64((k as f64).sqrt());
        col.push(a.sub(b).mul_f64(1.0 / ((k + 1) as f64).sqrt()));
    }
    col
}

/// Single eigenfunction value phi_k(x); same recurrence as phi_column.
pub fn phi(k: usize, x: f64) -> ScaledReal {
    phi_column(k, x)[k]
}

/// Propagator E(x, y; tau, sigma): 0 for tau >= sigma, otherwise the closed
/// Gaussian form of sum_k phi_k(x) phi_k(y) e^{k(tau-sigma)}.
pub fn propagator_e(x: f64, y: f64, tau: f64, sigma: f64) -> f64 {
    if tau >= sigma {
        return 0.0;
    }
    mehler_closed_form(x, y, (tau - sigma).exp())
}

/// Closed Gaussian form of sum_k rho^k phi_k(x) phi_k(y) for rho in (0,1).
fn mehler_closed_form(x: f64, y: f64, rho: f64) -> f64 {
    let r2 = rho * rho;
    let denom = 4.0 * (1.0 - r2);
    let expo = (-(1.0 + r2) * (x * x + y * y) + 4.0 * rho * x * y) / denom;
    expo.exp() / (2.0 * std::f64::consts::PI * (1.0 - r2)).sqrt()
}

/// Mehler kernel M(x, y; q) = sum_k q^k phi_k(x) phi_k(y).
pub fn mehler_m(x: f64, y: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(FermiError::Domain(format!("mehler_M: q must lie in (0,1), got {q}")));
    }
    Ok(mehler_closed_form(x, y, q))
}

/// Joint particle density P_n(x_1..x_n) in the closed determinant form,
/// normalized so the n-fold integral is 1. (The determinant expression
/// carries an extra n! relative to the probability density; verified
/// against the Slater-determinant eigenstate sum.)
pub fn joint_density(xs: &[f64], params: ModelParams) -> Result<f64> {
    let n = params.n();
    if xs.len() != n {
        return Err(FermiError::Dimension(format!(
            "joint_density: expected {} coordinates, got {}",
            n,
            xs.len()
        )));
    }
    // sorting makes permutation invariance bit-exact despite LU pivoting
    let mut xs = xs.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = params.q();
    let nf = n as f64;
    // q^{n/2}/Z_n = q^{-n(n-1)/2} (q;q)_n
    let weight = (-0.5 * nf * (nf - 1.0) * q.ln()).exp() * crate::qseries::qq_n(q, n);
    let q2 = q * q;
    // pull e^{q x_i^2/(1-q^2)} out of row i and column i of the determinant:
    // entries become e^{-q (x_i - x_j)^2 / (2(1-q^2))} <= 1 (no overflow) and
    // the Gaussian prefactor collapses to e^{-(1-q) x^2 / (2(1+q))}
    let mut gauss = 1.0;
    for &x in &xs {
        gauss *= (-0.5 * (1.0 - q) / (1.0 + q) * x * x).exp();
    }
    let mut mat = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = xs[i] - xs[j];
            mat[i * n + j] = (-0.5 * q / (1.0 - q2) * d * d).exp();
        }
    }
    let det = real_det(&mut mat, n);
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    Ok(weight * (2.0 * std::f64::consts::PI * (1.0 - q2)).powf(-nf / 2.0) * gauss * det / factorial)
}

/// LU determinant with partial pivoting for the small real matrices here.
pub(crate) fn real_det(a: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            det = -det;
        }
        det *= a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
        }
    }
    det
}

/// Christoffel-Darboux sum sum_{k=0}^{n-1} phi_k(x) phi_k(y) in O(1) given
/// the phi columns at x and y (used by the split kernel evaluation).
pub(crate) fn cd_sum(n: usize, x: f64, y: f64, col_x: &[f64], col_y: &[f64]) -> f64 {
    let sn = (n as f64).sqrt();
    if (x - y).abs() > 1e-7 {
        sn * (col_x[n] * col_y[n - 1] - col_x[n - 1] * col_y[n]) / (x - y)
    } else {
        // diagonal limit: sqrt(n) (phi_n' phi_{n-1} - phi_{n-1}' phi_n) with
        // phi_k' = sqrt(k) phi_{k-1} - (x/2) phi_k
        let m = 0.5 * (x + y);
        let c = phi_column_f64(n, m);
        let dn = sn * c[n - 1] - 0.5 * m * c[n];
        let dn1 = if n >= 2 { ((n - 1) as f64).sqrt() * c[n - 2] } else { 0.0 } - 0.5 * m * c[n - 1];
        sn * (dn * c[n - 1] - dn1 * c[n])
    }
}

//! Correlation kernels: the finite-n kernel K(x, y; z; q), its edge-scaled
//! form, the multi-time kernel, and the limiting kernels (Airy, crossover,
//! sine, interpolating).
//!
//! Series kernels carry their coefficient vectors so Nystrom assembly can
//! reuse one eigenfunction column per node instead of re-running the
//! recurrence per matrix entry.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{FermiError, Result};
use crate::hermite::{cd_sum, phi_column_f64, KAPPA};
use crate::qseries::ModelParams;
use crate::specialfn::airy_ai;

const SQRT_2PI: f64 = 2.5066282746310002;

/// Pole guard on the denominators 1 + q^k z.
pub const POLE_GUARD: f64 = 1e-8;

/// Domain hint attached to a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    RealLine,
    HalfLineRight(f64),
    Interval(f64, f64),
}

/// A two-point function with domain and decay metadata; the unit consumed
/// by the Fredholm engine. Evaluation is pure, handles are Send + Sync.
#[derive(Clone)]
pub struct KernelHandle {
    pub domain: Domain,
    /// Exponential decay rate used for half-line truncation.
    pub decay_hint: f64,
    pub symmetric: bool,
    imp: KernelImpl,
}

#[derive(Clone)]
enum KernelImpl {
    Pointwise(Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>),
    /// prefactor * sum_k coeffs[k] phi_k(offset + slope x) phi_k(offset + slope y),
    /// optionally minus the propagator E(x, y; tau, sigma).
    PhiSeries {
        coeffs: Arc<Vec<Complex64>>,
        offset: f64,
        slope: f64,
        prefactor: f64,
        subtract_e: Option<(f64, f64)>,
    },
    /// integral kernel int w(r) Ai(x + s r) Ai(y + s r) dr with s = +-1.
    AiryConv {
        weight: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
        sign: f64,
        /// decay rate of |w(r)| as r -> +infinity (for the r-grid cutoff)
        weight_decay: f64,
        /// w supported on r >= 0 only
        half_line: bool,
    },
}

impl KernelHandle {
    pub fn from_fn<F>(f: F, domain: Domain, decay_hint: f64, symmetric: bool) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    {
        KernelHandle { domain, decay_hint, symmetric, imp: KernelImpl::Pointwise(Arc::new(f)) }
    }

    /// Kernel scaled by a complex constant.
    pub fn scaled(&self, factor: Complex64) -> Self {
        let inner = self.clone();
        KernelHandle {
            domain: self.domain,
            decay_hint: self.decay_hint,
            symmetric: self.symmetric,
            imp: KernelImpl::Pointwise(Arc::new(move |x, y| factor * inner.eval(x, y))),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        match &self.imp {
            KernelImpl::Pointwise(f) => f(x, y),
            KernelImpl::PhiSeries { coeffs, offset, slope, prefactor, subtract_e } => {
                let xm = offset + slope * x;
                let ym = offset + slope * y;
                let k_max = coeffs.len() - 1;
                let cx = phi_column_f64(k_max, xm);
                let cy = phi_column_f64(k_max, ym);
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..=k_max {
                    s += coeffs[k] * (cx[k] * cy[k]);
                }
                let mut v = *prefactor * s;
                if let Some((tau, sigma)) = subtract_e {
                    v -= crate::hermite::propagator_e(xm, ym, *tau, *sigma) * prefactor;
                }
                v
            }
            KernelImpl::AiryConv { .. } => self.eval_rows(&[x], &[y])[0],
        }
    }

    /// Dense evaluation on xs x ys; row-major, len = xs.len() * ys.len().
    pub fn eval_rows(&self, xs: &[f64], ys: &[f64]) -> Vec<Complex64> {
        match &self.imp {
            KernelImpl::Pointwise(f) => {
                let mut out = Vec::with_capacity(xs.len() * ys.len());
                for &x in xs {
                    for &y in ys {
                        out.push(f(x, y));
                    }
                }
                out
            }
            KernelImpl::PhiSeries { coeffs, offset, slope, prefactor, subtract_e } => {
                let k_max = coeffs.len() - 1;
                let cols_x: Vec<Vec<f64>> =
                    xs.iter().map(|&x| phi_column_f64(k_max, offset + slope * x)).collect();
                let cols_y: Vec<Vec<f64>> = if std::ptr::eq(xs, ys) {
                    Vec::new()
                } else {
                    ys.iter().map(|&y| phi_column_f64(k_max, offset + slope * y)).collect()
                };
                let col_y = |j: usize| -> &Vec<f64> {
                    if cols_y.is_empty() {
                        &cols_x[j]
                    } else {
                        &cols_y[j]
                    }
                };
                let mut out = Vec::with_capacity(xs.len() * ys.len());
                for (i, _) in xs.iter().enumerate() {
                    for j in 0..ys.len() {
                        let cy = col_y(j);
                        let cx = &cols_x[i];
                        let mut s = Complex64::new(0.0, 0.0);
                        for k in 0..=k_max {
                            s += coeffs[k] * (cx[k] * cy[k]);
                        }
                        let mut v = *prefactor * s;
                        if let Some((tau, sigma)) = subtract_e {
                            let xm = offset + slope * xs[i];
                            let ym = offset + slope * ys[j];
                            v -= crate::hermite::propagator_e(xm, ym, *tau, *sigma) * prefactor;
                        }
                        out.push(v);
                    }
                }
                out
            }
            KernelImpl::AiryConv { weight, sign, weight_decay, half_line } => {
                let lo = xs.iter().chain(ys.iter()).cloned().fold(f64::INFINITY, f64::min);
                let (r_nodes, r_weights) = airy_conv_grid(lo, *sign, *weight_decay, *half_line);
                let wvals: Vec<Complex64> =
                    r_nodes.iter().zip(&r_weights).map(|(r, w)| weight(*r) * *w).collect();
                let ai_at = |pts: &[f64]| -> Vec<Vec<f64>> {
                    pts.iter()
                        .map(|&p| r_nodes.iter().map(|&r| airy_clipped(p + sign * r)).collect())
                        .collect()
                };
                let ax = ai_at(xs);
                let ay = if std::ptr::eq(xs, ys) { Vec::new() } else { ai_at(ys) };
                let row_y = |j: usize| -> &Vec<f64> {
                    if ay.is_empty() {
                        &ax[j]
                    } else {
                        &ay[j]
                    }
                };
                let mut out = Vec::with_capacity(xs.len() * ys.len());
                for i in 0..xs.len() {
                    for j in 0..ys.len() {
                        let mut s = Complex64::new(0.0, 0.0);
                        let (axi, ayj) = (&ax[i], row_y(j));
                        for k in 0..r_nodes.len() {
                            s += wvals[k] * (axi[k] * ayj[k]);
                        }
                        out.push(s);
                    }
                }
                out
            }
        }
    }
}

fn airy_clipped(arg: f64) -> f64 {
    if arg > 104.0 {
        0.0 // below double underflow anyway
    } else {
        airy_ai(arg).unwrap_or(0.0)
    }
}

/// Panelled r-grid for int w(r) Ai(x + s r) Ai(y + s r) dr given the lowest
/// node coordinate. Panels are unit-width Gauss-Legendre blocks; the Airy
/// oscillation wavelength stays above ~0.6 on the ranges used here.
fn airy_conv_grid(lowest: f64, sign: f64, weight_decay: f64, half_line: bool) -> (Vec<f64>, Vec<f64>) {
    // walking direction r: arguments move as sign * r; kernel mass sits where
    // arguments are in [-(osc window), +14]
    let (r_lo, r_hi) = if sign > 0.0 {
        let lo = if half_line { 0.0 } else { -(14.0 - lowest).max(0.0) };
        (lo, (16.0 - lowest).max(2.0))
    } else {
        // Ai(x - r): dead for r < x - 16; weight kills r beyond 46/decay
        let lo = lowest - 16.0;
        let hi = (-lowest).max(0.0) + 48.0 / weight_decay.max(0.05);
        (lo, hi)
    };
    let (gl_x, gl_w) = crate::fredholm::gauss_legendre(12);
    // a sharp Fermi weight (large decay rate) needs panels resolving the
    // step of width ~1/rate around r = 0
    let step_zone = if sign < 0.0 && weight_decay > 2.5 { 8.0 / weight_decay } else { 0.0 };
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut a = r_lo;
    while a < r_hi {
        let near_step = step_zone > 0.0 && a < step_zone && a + 0.75 > -step_zone;
        let width = if near_step { (2.0 / weight_decay).min(0.75) } else { 0.75 };
        let b = (a + width).min(r_hi);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (t, w) in gl_x.iter().zip(&gl_w) {
            nodes.push(mid + half * t);
            weights.push(half * w);
        }
        a = b;
    }
    (nodes, weights)
}

/// Lazily evaluated edge coefficients c_k(theta).
#[derive(Debug, Clone, Copy)]
pub struct EdgeCoefficients {
    pub theta: f64,
    pub params: ModelParams,
}

impl EdgeCoefficients {
    /// c_k = e^{i pi theta} q^{k-n+1/2} / (1 + e^{i pi theta} q^{k-n+1/2}),
    /// evaluated through the complex logistic for stability at both ends.
    pub fn c(&self, k: usize) -> Complex64 {
        let w_re = (k as f64 - self.params.n() as f64 + 0.5) * self.params.q().ln();
        logistic(Complex64::new(w_re, std::f64::consts::PI * self.theta))
    }
}

/// e^w / (1 + e^w) without overflow on either side.
pub(crate) fn logistic(w: Complex64) -> Complex64 {
    if w.re <= 0.0 {
        let u = w.exp();
        u / (Complex64::new(1.0, 0.0) + u)
    } else {
        let u = (-w).exp();
        Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) + u)
    }
}

/// Coefficient q^k z / (1 + q^k z) with pole guarding; w = k ln q + Ln z.
fn coefficient_checked(k: usize, ln_q: f64, ln_z: Complex64) -> Result<Complex64> {
    let w = Complex64::new(k as f64 * ln_q + ln_z.re, ln_z.im);
    if w.re.abs() < 40.0 {
        let denom = Complex64::new(1.0, 0.0) + w.exp();
        if denom.norm() < POLE_GUARD {
            return Err(FermiError::PoleProximity { k, dist: denom.norm() });
        }
    }
    Ok(logistic(w))
}

fn series_cutoff(z_norm: f64, q: f64, growth: f64, tol: f64) -> usize {
    // tail bound: sum_{k>=K} 2 (q g)^k |z| kappa^2 / sqrt(2 pi) < tol, with the
    // additional requirement (q g)^K |z| <= 1/2 so the bound applies
    let ratio = q.ln() + growth;
    let lim = (tol * (1.0 - (ratio).exp()).max(1e-6) * SQRT_2PI / (2.0 * KAPPA * KAPPA)).ln();
    let k1 = ((lim - z_norm.ln()) / ratio).ceil();
    let k2 = ((0.5f64.ln() - z_norm.ln()) / ratio).ceil();
    (k1.max(k2).max(8.0) as usize) + 2
}

/// Finite-n kernel K(x, y; z; q) = sum_k (q^k z / (1 + q^k z)) phi_k(x) phi_k(y).
pub fn kernel_finite(z: Complex64, params: ModelParams, tol: f64) -> Result<KernelHandle> {
    if z.norm() == 0.0 {
        return Ok(KernelHandle::from_fn(|_, _| Complex64::new(0.0, 0.0), Domain::RealLine, 1.0, true));
    }
    let q = params.q();
    let k_max = series_cutoff(z.norm(), q, 0.0, tol);
    let ln_z = Complex64::new(z.norm().ln(), z.arg());
    let mut coeffs = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        coeffs.push(coefficient_checked(k, q.ln(), ln_z)?);
    }
    Ok(KernelHandle {
        domain: Domain::RealLine,
        decay_hint: 1.0,
        symmetric: true,
        imp: KernelImpl::PhiSeries {
            coeffs: Arc::new(coeffs),
            offset: 0.0,
            slope: 1.0,
            prefactor: 1.0,
            subtract_e: None,
        },
    })
}

/// Same kernel through the splitting K^(0) + K^(1) - K^(2) around level n,
/// with the Christoffel-Darboux closed form for the K^(0) block. Valid for
/// any z away from the poles; costs O(1) per pair beyond the phi columns.
pub fn kernel_finite_split(z: Complex64, params: ModelParams, tol: f64) -> Result<KernelHandle> {
    let q = params.q();
    let n = params.n();
    let ln_z = Complex64::new(z.norm().ln(), z.arg());
    // w = q^n z
    let ln_w = Complex64::new(n as f64 * q.ln() + ln_z.re, ln_z.im);
    let w_norm = ln_w.re.exp();
    let tail_up = series_cutoff(w_norm.max(1e-300), q, 0.0, tol);
    // coefficients of K^(1): q^k w/(1+q^k w), k = 0..tail; checked against poles
    let mut up = Vec::with_capacity(tail_up + 1);
    for k in 0..=tail_up {
        up.push(coefficient_checked(n + k, q.ln(), ln_z)?);
    }
    // coefficients of K^(2): q^k w^{-1}/(1+q^k w^{-1}), k = 1..n
    let ln_w_inv = -ln_w;
    let mut down = Vec::with_capacity(n);
    for k in 1..=n {
        let wk = Complex64::new(k as f64 * q.ln() + ln_w_inv.re, ln_w_inv.im);
        if wk.re.abs() < 40.0 {
            let denom = Complex64::new(1.0, 0.0) + wk.exp();
            if denom.norm() < POLE_GUARD {
                return Err(FermiError::PoleProximity { k: n - k, dist: denom.norm() });
            }
        }
        down.push(logistic(wk));
    }
    let k_cols = n + tail_up;
    let f = move |x: f64, y: f64| -> Complex64 {
        let cx = phi_column_f64(k_cols, x);
        let cy = phi_column_f64(k_cols, y);
        let mut v = Complex64::new(cd_sum(n, x, y, &cx, &cy), 0.0);
        for (k, c) in up.iter().enumerate() {
            v += c * (cx[n + k] * cy[n + k]);
        }
        for (k, c) in down.iter().enumerate() {
            v -= c * (cx[n - 1 - k] * cy[n - 1 - k]);
        }
        v
    };
    Ok(KernelHandle::from_fn(f, Domain::RealLine, 1.0, true))
}

/// Edge-scaled kernel K~_n(x, y; theta) = n^{-1/6} sum_k c_k(theta)
/// phi_k(2 sqrt(n) + x n^{-1/6}) phi_k(2 sqrt(n) + y n^{-1/6}).
pub fn kernel_edge_scaled(theta: f64, params: ModelParams, t_window: (f64, f64)) -> Result<KernelHandle> {
    if !(-1.0..=1.0).contains(&theta) {
        return Err(FermiError::Domain(format!("kernel_edge_scaled: theta must lie in [-1,1], got {theta}")));
    }
    if t_window.0 > t_window.1 {
        return Err(FermiError::Domain("kernel_edge_scaled: empty t window".into()));
    }
    let n = params.n();
    let q = params.q();
    let nf = n as f64;
    let ec = EdgeCoefficients { theta, params };
    let tail = ((42.0 / -q.ln()).ceil() as usize).max(8);
    let k_max = n + tail;
    let coeffs: Vec<Complex64> = (0..=k_max).map(|k| ec.c(k)).collect();
    Ok(KernelHandle {
        domain: Domain::HalfLineRight(t_window.0),
        decay_hint: (-q.ln() * nf.powf(1.0 / 3.0)).min(2.0).max(0.05),
        symmetric: true,
        imp: KernelImpl::PhiSeries {
            coeffs: Arc::new(coeffs),
            offset: 2.0 * nf.sqrt(),
            slope: nf.powf(-1.0 / 6.0),
            prefactor: nf.powf(-1.0 / 6.0),
            subtract_e: None,
        },
    })
}

/// Multi-time kernel: sum_k (q^k z/(1+q^k z)) e^{k(tau-sigma)} phi_k phi_k
/// minus E(x, y; tau, sigma). Not symmetric in (x,tau) <-> (y,sigma).
pub fn kernel_multitime(
    z: Complex64,
    tau: f64,
    sigma: f64,
    params: ModelParams,
    tol: f64,
) -> Result<KernelHandle> {
    let q = params.q();
    let beta = params.beta();
    for (name, t) in [("tau", tau), ("sigma", sigma)] {
        if !(0.0..beta).contains(&t) {
            return Err(FermiError::Domain(format!(
                "kernel_multitime: {name} = {t} outside [0, beta = {beta})"
            )));
        }
    }
    let growth = tau - sigma;
    if q.ln() + growth >= 0.0 {
        return Err(FermiError::Convergence(format!(
            "kernel_multitime: q e^(tau-sigma) = {} >= 1",
            (q.ln() + growth).exp()
        )));
    }
    if z.norm() == 0.0 {
        let (t, s) = (tau, sigma);
        return Ok(KernelHandle::from_fn(
            move |x, y| Complex64::new(-crate::hermite::propagator_e(x, y, t, s), 0.0),
            Domain::RealLine,
            1.0,
            false,
        ));
    }
    let k_max = series_cutoff(z.norm(), q, growth, tol);
    let ln_z = Complex64::new(z.norm().ln(), z.arg());
    let mut coeffs = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let c = coefficient_checked(k, q.ln(), ln_z)?;
        coeffs.push(c * (k as f64 * growth).exp());
    }
    Ok(KernelHandle {
        domain: Domain::RealLine,
        decay_hint: 1.0,
        symmetric: false,
        imp: KernelImpl::PhiSeries {
            coeffs: Arc::new(coeffs),
            offset: 0.0,
            slope: 1.0,
            prefactor: 1.0,
            subtract_e: Some((tau, sigma)),
        },
    })
}

/// Airy kernel K_Airy(x, y) = int_0^inf Ai(x+r) Ai(y+r) dr.
pub fn kernel_airy() -> KernelHandle {
    KernelHandle {
        domain: Domain::RealLine,
        decay_hint: 2.0,
        symmetric: true,
        imp: KernelImpl::AiryConv {
            weight: Arc::new(|_| Complex64::new(1.0, 0.0)),
            sign: 1.0,
            weight_decay: 2.0,
            half_line: true,
        },
    }
}

/// Crossover kernel int e^{i pi theta} e^{-cr}/(1 + e^{i pi theta} e^{-cr})
/// Ai(x-r) Ai(y-r) dr; theta = 0 is the real KPZ crossover kernel.
pub fn kernel_crossover(c: f64, theta: f64) -> Result<KernelHandle> {
    if c <= 0.0 {
        return Err(FermiError::Domain(format!("kernel_crossover: c must be positive, got {c}")));
    }
    if !(-1.0 < theta && theta < 1.0) {
        return Err(FermiError::Domain(format!(
            "kernel_crossover: theta must lie in (-1,1), got {theta} (Fermi pole at r = 0)"
        )));
    }
    let pith = std::f64::consts::PI * theta;
    Ok(KernelHandle {
        domain: Domain::RealLine,
        decay_hint: c.min(2.0),
        symmetric: true,
        imp: KernelImpl::AiryConv {
            weight: Arc::new(move |r| logistic(Complex64::new(-c * r, pith))),
            sign: -1.0,
            weight_decay: c,
            half_line: false,
        },
    })
}

/// Sine kernel sin(pi(x-y)) / (pi(x-y)), diagonal 1 by continuity.
pub fn kernel_sine() -> KernelHandle {
    KernelHandle::from_fn(
        |x, y| {
            let d = std::f64::consts::PI * (x - y);
            let v = if d.abs() < 1e-7 { 1.0 - d * d / 6.0 } else { d.sin() / d };
            Complex64::new(v, 0.0)
        },
        Domain::RealLine,
        0.0,
        true,
    )
}

/// Interpolating kernel K(x, y; a) = int_0^inf cos(pi(x-y)t) / (a e^{t^2} + 1) dt.
pub fn kernel_interp(a: f64) -> Result<KernelHandle> {
    if a <= 0.0 {
        return Err(FermiError::Domain(format!("kernel_interp: a must be positive, got {a}")));
    }
    let t_max = (42.0 - a.ln()).max(4.0).sqrt();
    let t_step = (-a.ln()).max(0.0).sqrt();
    let (gl_x, gl_w) = crate::fredholm::gauss_legendre(24);
    // fixed panels: refine around the Fermi step at t = sqrt(ln(1/a))
    let mut edges = vec![0.0];
    let mut t = 0.0;
    while t < t_max {
        let near_step = (t - t_step).abs() < 1.5;
        t = (t + if near_step { 0.5 } else { 1.0 }).min(t_max);
        edges.push(t);
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for win in edges.windows(2) {
        let half = 0.5 * (win[1] - win[0]);
        let mid = 0.5 * (win[1] + win[0]);
        for (x, w) in gl_x.iter().zip(&gl_w) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    let fermi: Vec<f64> = nodes.iter().map(|&t| 1.0 / (a * (t * t).exp() + 1.0)).collect();
    Ok(KernelHandle::from_fn(
        move |x, y| {
            let d = std::f64::consts::PI * (x - y);
            let mut s = 0.0;
            for i in 0..nodes.len() {
                s += weights[i] * (d * nodes[i]).cos() * fermi[i];
            }
            Complex64::new(s, 0.0)
        },
        Domain::RealLine,
        0.0,
        true,
    ))
}

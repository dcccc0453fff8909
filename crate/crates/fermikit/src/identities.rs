//! Numerical verification of the contour-operator Fredholm identities
//! det(I + zM) = (-z; q)_inf det(I + K(z; q)) with pluggable pole data,
//! including the q-Whittaker, q-TASEP, q-TAZRP and ASEP kernel choices.
//!
//! Contours are restricted to circles, which turns the no-self-overlap
//! conditions Gamma cap q^k Gamma = empty into checkable inequalities:
//! a circle enclosing 0 always satisfies them, and a circle with 0 outside
//! needs radius < |center| (1 - q)/(1 + q). The Mellin-Barnes route needs
//! the sqrt(q)-strengthened version of the same inequality so the s-line
//! never pinches the denominator.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{FermiError, Result};
use crate::fredholm::det_complex_lu;
use crate::qseries::{qpochhammer, Order};

type ScalarFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// A circle contour with positive orientation.
#[derive(Debug, Clone, Copy)]
pub struct CircleContour {
    pub center: Complex64,
    pub radius: f64,
}

impl CircleContour {
    pub fn encloses(&self, p: Complex64) -> bool {
        (p - self.center).norm() < self.radius
    }

    /// Nodes and the (2 pi i)^{-1} d eta quadrature weights.
    pub fn nodes(&self, order: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        for j in 0..order {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / order as f64;
            let offset = Complex64::from_polar(self.radius, phi);
            nodes.push(self.center + offset);
            weights.push(offset / order as f64);
        }
        (nodes, weights)
    }

    /// Gamma cap q^k Gamma = empty for all k >= 1 (circle geometry).
    pub fn q_shift_disjoint(&self, q: f64) -> bool {
        if self.encloses(Complex64::new(0.0, 0.0)) {
            // q Gamma is then strictly inside Gamma
            return true;
        }
        self.radius < self.center.norm() * (1.0 - q) / (1.0 + q)
    }

    /// Strengthened condition used by the Mellin-Barnes mode (the s-line
    /// maps eta to modulus sqrt(q)|eta|, which must stay clear of |xi|).
    pub fn q_half_shift_disjoint(&self, q: f64) -> bool {
        if self.encloses(Complex64::new(0.0, 0.0)) {
            return true;
        }
        let sq = q.sqrt();
        self.radius < self.center.norm() * (1.0 - sq) / (1.0 + sq)
    }
}

/// Meromorphic data f (with its enclosed pole list), the optional g giving
/// the analytic continuation F(eta; q; s) = g(eta)/g(q^s eta), and the two
/// certified circle contours.
#[derive(Clone)]
pub struct ContourKernelConfig {
    f: ScalarFn,
    g: Option<ScalarFn>,
    /// poles of f enclosed by both contours
    pub poles: Vec<Complex64>,
    /// singularities of f that must stay outside both contours
    pub excluded: Vec<Complex64>,
    pub q: f64,
    pub gamma_0a: CircleContour,
    pub gamma_a: CircleContour,
}

impl ContourKernelConfig {
    pub fn new(
        f: ScalarFn,
        g: Option<ScalarFn>,
        poles: Vec<Complex64>,
        excluded: Vec<Complex64>,
        q: f64,
        gamma_0a: CircleContour,
        gamma_a: CircleContour,
    ) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(FermiError::Domain(format!("q must lie in (0,1), got {q}")));
        }
        let f0 = f(Complex64::new(0.0, 0.0));
        if (f0 - Complex64::new(1.0, 0.0)).norm() >= 1e-12 {
            return Err(FermiError::Domain(format!("f(0) = {f0} violates the f(0) = 1 certificate")));
        }
        if !gamma_0a.encloses(Complex64::new(0.0, 0.0)) {
            return Err(FermiError::Domain("Gamma_0A must enclose 0".into()));
        }
        if gamma_a.encloses(Complex64::new(0.0, 0.0)) {
            return Err(FermiError::Domain("Gamma_A must not enclose 0".into()));
        }
        for p in &poles {
            if !gamma_0a.encloses(*p) || !gamma_a.encloses(*p) {
                return Err(FermiError::Domain(format!(
                    "pole {p} must be enclosed by both contours"
                )));
            }
        }
        for p in &excluded {
            if gamma_0a.encloses(*p) || gamma_a.encloses(*p) {
                return Err(FermiError::Domain(format!(
                    "singularity {p} must stay outside both contours"
                )));
            }
        }
        if !gamma_0a.q_shift_disjoint(q) || !gamma_a.q_shift_disjoint(q) {
            return Err(FermiError::Domain(
                "contour condition Gamma cap q^k Gamma = empty violated".into(),
            ));
        }
        Ok(ContourKernelConfig { f, g, poles, excluded, q, gamma_0a, gamma_a })
    }

    pub fn f(&self, eta: Complex64) -> Complex64 {
        (self.f)(eta)
    }
}

/// M(xi, eta; q) = f(eta) / (xi - q eta).
pub fn m_contour_kernel(cfg: &ContourKernelConfig, xi: Complex64, eta: Complex64) -> Result<Complex64> {
    let denom = xi - cfg.q * eta;
    if denom.norm() < 1e-12 {
        return Err(FermiError::NonFinite(format!("M kernel node collision at xi={xi}, eta={eta}")));
    }
    Ok(cfg.f(eta) / denom)
}

/// Evaluation route for the K kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMode {
    /// power series in z; requires |z| < 1
    Series,
    /// Mellin-Barnes vertical-line integral at delta = 1/2; any z off the
    /// negative real axis, but needs the g continuation
    MellinBarnes,
}

/// K(xi, eta; z; q) = sum_{k>=1} (-1)^{k+1} z^k F(eta; q; k)/(xi - q^k eta)
/// or its Mellin-Barnes continuation.
pub fn k_contour_kernel(
    cfg: &ContourKernelConfig,
    xi: Complex64,
    eta: Complex64,
    z: Complex64,
    mode: KMode,
) -> Result<Complex64> {
    match mode {
        KMode::Series => {
            if z.norm() >= 1.0 {
                return Err(FermiError::Domain(format!(
                    "series mode requires |z| < 1, got |z| = {}",
                    z.norm()
                )));
            }
            let mut sum = Complex64::new(0.0, 0.0);
            let mut f_prod = Complex64::new(1.0, 0.0);
            let mut zk = Complex64::new(1.0, 0.0);
            let mut qk_eta = eta;
            let mut sign = 1.0;
            for k in 1..=4000 {
                f_prod *= cfg.f(qk_eta); // f(q^{k-1} eta)
                qk_eta *= cfg.q;
                zk *= z;
                let denom = xi - qk_eta;
                if denom.norm() < 1e-12 {
                    return Err(FermiError::NonFinite(format!("K kernel denominator ~ 0 at k={k}")));
                }
                sum += sign * zk * f_prod / denom;
                sign = -sign;
                if zk.norm() * f_prod.norm().max(1.0) < 1e-17 * sum.norm().max(1e-4) && k > 4 {
                    break;
                }
            }
            Ok(sum)
        }
        KMode::MellinBarnes => {
            let g = cfg.g.as_ref().ok_or_else(|| {
                FermiError::Domain("Mellin-Barnes mode needs the g continuation".into())
            })?;
            let arg = z.arg().abs();
            if arg > 3.0 {
                return Err(FermiError::Domain(
                    "Mellin-Barnes mode needs z off the negative real axis".into(),
                ));
            }
            let ln_z = Complex64::new(z.norm().ln(), z.arg());
            let ln_q = cfg.q.ln();
            let g_eta = g(eta);
            let y_max = 44.0 / (std::f64::consts::PI - arg);
            // panels resolving the e^{i y ln q} rotation
            let period = 2.0 * std::f64::consts::PI / (-ln_q);
            let width = (period / 5.0).min(1.0);
            let (gl_x, gl_w) = crate::fredholm::gauss_legendre(16);
            let integrand = |y: f64| -> Result<Complex64> {
                let s = Complex64::new(0.5, y);
                let qs = (s * ln_q).exp();
                let denom = xi - qs * eta;
                if denom.norm() < 1e-12 {
                    return Err(FermiError::NonFinite("MB denominator pinch".into()));
                }
                let f_cont = g_eta / g(qs * eta);
                let zs = (s * ln_z).exp();
                let sin_pis = (std::f64::consts::PI * s).sin();
                Ok(std::f64::consts::PI * zs / sin_pis * f_cont / denom)
            };
            let mut acc = Complex64::new(0.0, 0.0);
            let mut a = -y_max;
            while a < y_max {
                let b = (a + width).min(y_max);
                let half = 0.5 * (b - a);
                let mid = 0.5 * (a + b);
                for (t, w) in gl_x.iter().zip(&gl_w) {
                    acc += half * w * integrand(mid + half * t)?;
                }
                a = b;
            }
            // (1/2 pi i) int_{delta - i inf}^{delta + i inf} ... ds, ds = i dy
            Ok(acc / (2.0 * std::f64::consts::PI))
        }
    }
}

/// Outcome of one identity check.
#[derive(Debug, Clone, Copy)]
pub struct IdentityReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub gap: f64,
}

fn det_i_plus_scaled_kernel<K>(
    contour: &CircleContour,
    order: usize,
    scale: Complex64,
    kernel: K,
) -> Result<Complex64>
where
    K: Fn(Complex64, Complex64) -> Result<Complex64>,
{
    let (nodes, weights) = contour.nodes(order);
    let m = nodes.len();
    let mut mat = vec![Complex64::new(0.0, 0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            let v = scale * kernel(nodes[i], nodes[j])? * weights[j];
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(FermiError::NonFinite("contour kernel value".into()));
            }
            mat[i * m + j] = v + if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
        }
    }
    Ok(det_complex_lu(&mut mat, m))
}

/// det(I + z M)_{L^2(Gamma_0A)} versus (-z; q)_inf det(I + K(z))_{L^2(Gamma_A)}.
pub fn verify_identity(
    cfg: &ContourKernelConfig,
    z: Complex64,
    order: usize,
    mode: KMode,
) -> Result<IdentityReport> {
    if mode == KMode::MellinBarnes && !cfg.gamma_a.q_half_shift_disjoint(cfg.q) {
        return Err(FermiError::Domain(
            "Mellin-Barnes mode needs the sqrt(q)-strengthened contour condition".into(),
        ));
    }
    let lhs = det_i_plus_scaled_kernel(&cfg.gamma_0a, order, z, |xi, eta| {
        m_contour_kernel(cfg, xi, eta)
    })?;
    let det_k = det_i_plus_scaled_kernel(&cfg.gamma_a, order, Complex64::new(1.0, 0.0), |xi, eta| {
        k_contour_kernel(cfg, xi, eta, z, mode)
    })?;
    let rhs = qpochhammer(-z, cfg.q, Order::Infinite)? * det_k;
    Ok(IdentityReport { lhs, rhs, gap: (lhs - rhs).norm() })
}

/// The swapped variant: det(I - z M)_{L^2(Gamma_A)} versus
/// (-z; q)_inf det(I - K(z))_{L^2(Gamma_0A)}.
pub fn verify_identity_alt(
    cfg: &ContourKernelConfig,
    z: Complex64,
    order: usize,
    mode: KMode,
) -> Result<IdentityReport> {
    let lhs = det_i_plus_scaled_kernel(&cfg.gamma_a, order, -z, |xi, eta| {
        m_contour_kernel(cfg, xi, eta)
    })?;
    let det_k = det_i_plus_scaled_kernel(&cfg.gamma_0a, order, Complex64::new(-1.0, 0.0), |xi, eta| {
        k_contour_kernel(cfg, xi, eta, z, mode)
    })?;
    let rhs = qpochhammer(-z, cfg.q, Order::Infinite)? * det_k;
    Ok(IdentityReport { lhs, rhs, gap: (lhs - rhs).norm() })
}

/// Model presets supplying the paper's f, its pole data, the g continuation
/// and certified circle contours.
#[derive(Debug, Clone)]
pub enum ModelPreset {
    /// q-Whittaker: speeds a_m > 0, transition parameters alpha_i, beta_i >= 0, gamma >= 0
    Whittaker { a: Vec<f64>, alpha: Vec<f64>, beta: Vec<f64>, gamma: f64, q: f64 },
    /// q-TASEP with speeds a_m > 0 at time t >= 0
    QTasep { a: Vec<f64>, t: f64, q: f64 },
    /// q-TAZRP with conductances b_0..b_M > 0 at time t >= 0
    QTazrp { b: Vec<f64>, t: f64, q: f64 },
    /// ASEP with density rho in (0,1) and asymmetry tau in (0,1); the
    /// circle-contour verification covers the x = 0, t = 0 specialization
    Asep { rho: f64, x: i32, t: f64, tau: f64 },
}

fn contour_pair(poles: &[f64], excluded: &[f64], q: f64) -> Result<(CircleContour, CircleContour)> {
    let lo = poles.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = poles.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let center = 0.5 * (lo + hi);
    let spread = 0.5 * (hi - lo);
    let sq = q.sqrt();
    let allowed = center.abs() * (1.0 - sq) / (1.0 + sq);
    let r_a = (spread + 0.04 * center.abs()).max(0.02 * center.abs());
    if r_a >= 0.9 * allowed {
        return Err(FermiError::Domain(format!(
            "poles too dispersed for circle contours: need radius {r_a:.3} < {:.3}",
            0.9 * allowed
        )));
    }
    let gamma_a = CircleContour { center: Complex64::new(center, 0.0), radius: r_a };
    let reach = center.abs() + r_a;
    let mut r_0 = 1.3 * reach;
    for &p in excluded {
        if p.abs() <= reach {
            return Err(FermiError::Domain(format!(
                "excluded singularity at {p} inside the pole reach {reach}"
            )));
        }
        r_0 = r_0.min(0.5 * (reach + p.abs()));
    }
    let gamma_0a = CircleContour { center: Complex64::new(0.0, 0.0), radius: r_0 };
    Ok((gamma_0a, gamma_a))
}

fn ln_qpoch_inf(a: Complex64, q: f64) -> Complex64 {
    // log (a; q)_inf, safe for the moduli used here
    let mut ln = Complex64::new(0.0, 0.0);
    let mut qk = 1.0;
    while a.norm() * qk >= 1e-17 {
        let factor = Complex64::new(1.0, 0.0) - a * qk;
        ln += Complex64::new(factor.norm().ln(), factor.arg());
        qk *= q;
    }
    ln
}

/// Build a certified configuration for one of the four models.
pub fn preset(model: ModelPreset) -> Result<ContourKernelConfig> {
    match model {
        ModelPreset::Whittaker { a, alpha, beta, gamma, q } => {
            if a.is_empty() || a.iter().any(|&v| v <= 0.0) {
                return Err(FermiError::Domain("whittaker: speeds a_m must be positive".into()));
            }
            if alpha.iter().any(|&v| v < 0.0) || beta.iter().any(|&v| v < 0.0) || gamma < 0.0 {
                return Err(FermiError::Domain("whittaker: alpha, beta, gamma must be >= 0".into()));
            }
            let excluded: Vec<f64> = beta.iter().filter(|&&b| b > 0.0).map(|&b| -1.0 / b).collect();
            let (g0, ga) = contour_pair(&a, &excluded, q)?;
            let (af, alf, bef) = (a.clone(), alpha.clone(), beta.clone());
            let f: ScalarFn = Arc::new(move |eta| {
                let mut v = Complex64::new(1.0, 0.0);
                for &am in &af {
                    v *= am / (Complex64::new(am, 0.0) - eta);
                }
                for &al in &alf {
                    v *= Complex64::new(1.0, 0.0) - al * eta;
                }
                for &be in &bef {
                    v *= (Complex64::new(1.0, 0.0) + q * be * eta) / (Complex64::new(1.0, 0.0) + be * eta);
                }
                v * ((q - 1.0) * gamma * eta).exp()
            });
            let (ag, alg, beg) = (a.clone(), alpha, beta.clone());
            let g: ScalarFn = Arc::new(move |eta| {
                let mut ln = -gamma * eta;
                for &am in &ag {
                    ln -= ln_qpoch_inf(eta / am, q);
                }
                for &al in &alg {
                    ln += ln_qpoch_inf(al * eta, q);
                }
                for &be in &beg {
                    let factor = Complex64::new(1.0, 0.0) + be * eta;
                    ln -= Complex64::new(factor.norm().ln(), factor.arg());
                }
                ln.exp()
            });
            let poles = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let excl = excluded.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            ContourKernelConfig::new(f, Some(g), poles, excl, q, g0, ga)
        }
        ModelPreset::QTasep { a, t, q } => {
            if a.is_empty() || a.iter().any(|&v| v <= 0.0) || t < 0.0 {
                return Err(FermiError::Domain("qtasep: need positive speeds and t >= 0".into()));
            }
            let (g0, ga) = contour_pair(&a, &[], q)?;
            let af = a.clone();
            let f: ScalarFn = Arc::new(move |eta| {
                let mut v = Complex64::new(1.0, 0.0);
                for &am in &af {
                    v *= am / (Complex64::new(am, 0.0) - eta);
                }
                v * ((q - 1.0) * t * eta).exp()
            });
            let ag = a.clone();
            let g: ScalarFn = Arc::new(move |eta| {
                let mut ln = -t * eta;
                for &am in &ag {
                    ln -= ln_qpoch_inf(eta / am, q);
                }
                ln.exp()
            });
            let poles = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            ContourKernelConfig::new(f, Some(g), poles, vec![], q, g0, ga)
        }
        ModelPreset::QTazrp { b, t, q } => {
            if b.is_empty() || b.iter().any(|&v| v <= 0.0) || t < 0.0 {
                return Err(FermiError::Domain("qtazrp: need positive conductances and t >= 0".into()));
            }
            let (g0, ga) = contour_pair(&b, &[], q)?;
            let bf = b.clone();
            let f: ScalarFn = Arc::new(move |eta| {
                let mut v = Complex64::new(1.0, 0.0);
                for &bk in &bf {
                    v *= bk / (Complex64::new(bk, 0.0) - eta);
                }
                v * (-eta * t).exp()
            });
            let bg = b.clone();
            let g: ScalarFn = Arc::new(move |eta| {
                let mut ln = -t / (1.0 - q) * eta;
                for &bm in &bg {
                    ln -= ln_qpoch_inf(eta / bm, q);
                }
                ln.exp()
            });
            let poles = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            ContourKernelConfig::new(f, Some(g), poles, vec![], q, g0, ga)
        }
        ModelPreset::Asep { rho, x, t, tau } => {
            if !(rho > 0.0 && rho < 1.0) || !(tau > 0.0 && tau < 1.0) || t < 0.0 {
                return Err(FermiError::Domain("asep: need rho, tau in (0,1) and t >= 0".into()));
            }
            let theta = rho / (1.0 - rho);
            let pole = theta * tau;
            let excluded: Vec<f64> = if x != 0 || t > 0.0 { vec![-tau, -1.0] } else { vec![] };
            let (g0, ga) = contour_pair(&[pole], &excluded, tau)?;
            let f: ScalarFn = Arc::new(move |eta| {
                let one = Complex64::new(1.0, 0.0);
                let ratio = (one + eta) / (one + eta / tau);
                let expo = -(1.0 - tau) / (1.0 + tau) * t;
                ratio.powi(x)
                    * (expo * (one / (one + eta / tau) - one / (one + eta))).exp()
                    / (one - eta / pole)
            });
            let g: ScalarFn = Arc::new(move |eta| {
                let one = Complex64::new(1.0, 0.0);
                let base = one + eta / tau;
                let ln_base = Complex64::new(base.norm().ln(), base.arg());
                let ln = -(x as f64) * ln_base
                    + (1.0 - tau) / (1.0 + tau) * t / (one + eta / tau)
                    - ln_qpoch_inf(eta / pole, tau);
                ln.exp()
            });
            ContourKernelConfig::new(
                f,
                Some(g),
                vec![Complex64::new(pole, 0.0)],
                excluded.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
                tau,
                g0,
                ga,
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single_pole_cfg(a: f64, q: f64) -> ContourKernelConfig {
        preset(ModelPreset::QTasep { a: vec![a], t: 0.0, q }).unwrap()
    }

    #[test]
    fn contour_condition_checker_vs_dense_sampling() {
        // the algebraic inequality matches brute-force circle sampling
        let cases = [
            (c(1.0, 0.0), 0.2, 0.3),
            (c(1.0, 0.0), 0.5, 0.3),
            (c(1.0, 0.0), 0.55, 0.3),
            (c(-2.0, 0.5), 0.4, 0.6),
            (c(-2.0, 0.5), 0.9, 0.6),
            (c(1.5, 0.0), 0.36, 0.45),
        ];
        for (center, radius, q) in cases {
            let circle = CircleContour { center, radius };
            let algebraic = circle.q_shift_disjoint(q);
            // dense check of min distance between Gamma and q^k Gamma
            let mut sampled_ok = true;
            for k in 1..=40 {
                let qk = q.powi(k);
                let d = (center - qk * center).norm();
                // circles intersect iff |r - qk r| <= d <= r + qk r
                if d <= radius + qk * radius && d >= (radius - qk * radius).abs() {
                    sampled_ok = false;
                }
            }
            assert_eq!(algebraic, sampled_ok, "center {center}, r {radius}, q {q}");
        }
    }

    #[test]
    fn m_kernel_trivial_f() {
        let cfg = single_pole_cfg(1.0, 0.3);
        // at eta = 0, f = 1, so M = 1/xi
        let xi = c(0.7, 0.2);
        let v = m_contour_kernel(&cfg, xi, c(0.0, 0.0)).unwrap();
        assert!((v - 1.0 / xi).norm() < 1e-13);
    }

    #[test]
    fn k_kernel_zero_z_and_linear_term() {
        let cfg = single_pole_cfg(1.0, 0.3);
        let (xi, eta) = (c(1.1, 0.1), c(0.95, -0.05));
        let v0 = k_contour_kernel(&cfg, xi, eta, c(0.0, 0.0), KMode::Series).unwrap();
        assert!(v0.norm() < 1e-16);
        // the coefficient of z is f(eta)/(xi - q eta)
        let h = 1e-6;
        let v = k_contour_kernel(&cfg, xi, eta, c(h, 0.0), KMode::Series).unwrap();
        let lin = cfg.f(eta) / (xi - 0.3 * eta);
        assert!((v / h - lin).norm() < 1e-4 * lin.norm(), "{} vs {lin}", v / h);
    }

    #[test]
    fn series_mode_rejects_large_z() {
        let cfg = single_pole_cfg(1.0, 0.3);
        assert!(k_contour_kernel(&cfg, c(1.1, 0.0), c(0.9, 0.0), c(1.1, 0.0), KMode::Series).is_err());
    }

    #[test]
    fn f_zero_certificate_rejects_bad_f() {
        // f(eta) = 2a/(a - eta) has f(0) = 2
        let f: ScalarFn = Arc::new(|eta| 2.0 / (c(1.0, 0.0) - eta));
        let g0 = CircleContour { center: c(0.0, 0.0), radius: 1.4 };
        let ga = CircleContour { center: c(1.0, 0.0), radius: 0.1 };
        assert!(ContourKernelConfig::new(f, None, vec![c(1.0, 0.0)], vec![], 0.3, g0, ga).is_err());
    }

    #[test]
    fn identity_trivial_at_z_zero() {
        let cfg = single_pole_cfg(1.0, 0.3);
        let r = verify_identity(&cfg, c(0.0, 0.0), 32, KMode::Series).unwrap();
        assert!((r.lhs - c(1.0, 0.0)).norm() < 1e-12);
        assert!((r.rhs - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn identity_constant_f() {
        // f = 1: no poles; det(I + zM) on a 0-circle equals (-z; q)_inf and
        // the K determinant on a pole-free circle is 1
        let f: ScalarFn = Arc::new(|_| c(1.0, 0.0));
        let q = 0.3;
        let g0 = CircleContour { center: c(0.0, 0.0), radius: 1.0 };
        let ga = CircleContour { center: c(1.0, 0.0), radius: 0.2 };
        let cfg = ContourKernelConfig::new(f, None, vec![], vec![], q, g0, ga).unwrap();
        let z = c(0.45, 0.1);
        let r = verify_identity(&cfg, z, 64, KMode::Series).unwrap();
        let poch = qpochhammer(-z, q, Order::Infinite).unwrap();
        assert!((r.lhs - poch).norm() < 1e-10, "lhs {} vs {poch}", r.lhs);
        assert!(r.gap < 1e-10, "gap {}", r.gap);
    }

    #[test]
    fn identity_single_pole() {
        let cfg = single_pole_cfg(1.0, 0.3);
        let r = verify_identity(&cfg, c(0.2, 0.0), 64, KMode::Series).unwrap();
        assert!(r.gap < 1e-8, "lhs {} rhs {} gap {}", r.lhs, r.rhs, r.gap);
        let r_alt = verify_identity_alt(&cfg, c(0.2, 0.0), 64, KMode::Series).unwrap();
        assert!(r_alt.gap < 1e-8, "alt gap {}", r_alt.gap);
    }

    #[test]
    fn identity_series_vs_mellin_barnes() {
        let cfg = single_pole_cfg(1.0, 0.3);
        let (xi, eta) = (c(1.07, 0.05), c(0.93, -0.02));
        let z = c(0.4, 0.0);
        let s = k_contour_kernel(&cfg, xi, eta, z, KMode::Series).unwrap();
        let mb = k_contour_kernel(&cfg, xi, eta, z, KMode::MellinBarnes).unwrap();
        assert!((s - mb).norm() < 1e-9, "series {s} vs MB {mb}");
    }

    #[test]
    fn identity_mellin_barnes_beyond_unit_disk() {
        // |z| = 1.5: only the MB continuation applies on the K side
        let cfg = single_pole_cfg(1.0, 0.3);
        let z = c(1.5, 0.0);
        let r = verify_identity(&cfg, z, 96, KMode::MellinBarnes).unwrap();
        assert!(r.gap < 1e-7, "lhs {} rhs {} gap {}", r.lhs, r.rhs, r.gap);
    }

    #[test]
    fn qtazrp_preset_identity() {
        let cfg = preset(ModelPreset::QTazrp { b: vec![1.0, 1.0], t: 0.5, q: 0.4 }).unwrap();
        let r = verify_identity(&cfg, c(0.3, 0.0), 96, KMode::Series).unwrap();
        assert!(r.gap < 1e-7, "lhs {} rhs {} gap {}", r.lhs, r.rhs, r.gap);
    }

    #[test]
    fn whittaker_preset_construction_and_identity() {
        let cfg = preset(ModelPreset::Whittaker {
            a: vec![1.0, 1.05],
            alpha: vec![0.2],
            beta: vec![0.15],
            gamma: 0.3,
            q: 0.35,
        })
        .unwrap();
        assert!((cfg.f(c(0.0, 0.0)) - c(1.0, 0.0)).norm() < 1e-13);
        let r = verify_identity(&cfg, c(0.25, 0.1), 96, KMode::Series).unwrap();
        assert!(r.gap < 1e-8, "gap {}", r.gap);
    }

    #[test]
    fn qtasep_preset_identity() {
        let cfg = preset(ModelPreset::QTasep { a: vec![1.0], t: 0.4, q: 0.25 }).unwrap();
        let r = verify_identity(&cfg, c(0.3, -0.1), 96, KMode::Series).unwrap();
        assert!(r.gap < 1e-8, "gap {}", r.gap);
    }

    #[test]
    fn asep_preset_construction_and_identity() {
        // rho = 1/2 (theta = 1), x = 0, t = 0: single pole at theta tau
        let cfg = preset(ModelPreset::Asep { rho: 0.5, x: 0, t: 0.0, tau: 0.4 }).unwrap();
        assert!((cfg.f(c(0.0, 0.0)) - c(1.0, 0.0)).norm() < 1e-13);
        let r = verify_identity(&cfg, c(0.3, 0.0), 96, KMode::Series).unwrap();
        assert!(r.gap < 1e-7, "gap {}", r.gap);
    }

    #[test]
    fn mb_continuation_consistency_per_preset() {
        // F(eta; q; k) = g(eta)/g(q^k eta) reproduces prod_{j<k} f(q^j eta)
        let cfgs = vec![
            preset(ModelPreset::QTasep { a: vec![1.0, 0.95], t: 0.3, q: 0.3 }).unwrap(),
            preset(ModelPreset::QTazrp { b: vec![1.0, 1.1], t: 0.2, q: 0.35 }).unwrap(),
            preset(ModelPreset::Whittaker {
                a: vec![1.0],
                alpha: vec![0.1],
                beta: vec![0.1],
                gamma: 0.2,
                q: 0.3,
            })
            .unwrap(),
            preset(ModelPreset::Asep { rho: 0.5, x: 0, t: 0.0, tau: 0.4 }).unwrap(),
        ];
        for cfg in &cfgs {
            let eta = cfg.gamma_a.center + c(cfg.gamma_a.radius * 0.7, 0.1 * cfg.gamma_a.radius);
            let g = cfg.g.as_ref().unwrap();
            for k in [1usize, 3] {
                let mut direct = c(1.0, 0.0);
                for j in 0..k {
                    direct *= cfg.f(eta * cfg.q.powi(j as i32));
                }
                let cont = g(eta) / g(eta * cfg.q.powi(k as i32));
                assert!(
                    (direct - cont).norm() < 1e-10 * direct.norm().max(1.0),
                    "k={k}: direct {direct} vs continuation {cont}"
                );
            }
        }
    }

    #[test]
    fn preset_random_admissible_draws() {
        // 5 fixed quasi-random admissible draws per preset at order 96
        let mut lcg = 0x2545f4914f6cdd1du64;
        let mut unit = move || {
            lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (lcg >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..5 {
            let q = 0.2 + 0.3 * unit();
            let z = c(0.5 * unit(), 0.4 * (unit() - 0.5));
            let cfgs = vec![
                preset(ModelPreset::Whittaker {
                    a: vec![1.0, 1.0 + 0.08 * unit()],
                    alpha: vec![0.25 * unit()],
                    beta: vec![0.15 * unit()],
                    gamma: 0.4 * unit(),
                    q,
                })
                .unwrap(),
                preset(ModelPreset::QTasep { a: vec![1.0, 1.0 + 0.06 * unit()], t: 0.5 * unit(), q }).unwrap(),
                preset(ModelPreset::QTazrp { b: vec![1.0, 1.0 + 0.05 * unit()], t: 0.5 * unit(), q }).unwrap(),
                preset(ModelPreset::Asep { rho: 0.35 + 0.3 * unit(), x: 0, t: 0.0, tau: 0.3 + 0.2 * unit() })
                    .unwrap(),
            ];
            for (i, cfg) in cfgs.iter().enumerate() {
                let r = verify_identity(cfg, z, 96, KMode::Series).unwrap();
                assert!(r.gap < 1e-6, "trial {trial} preset {i}: z {z} gap {}", r.gap);
            }
        }
    }
}

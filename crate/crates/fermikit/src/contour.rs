//! Circle-contour quadrature for the z-integrals: equally spaced trapezoid
//! nodes (spectrally accurate for analytic integrands), radius policy per
//! regime, and the theta-representation integrand whose factors all stay
//! O(1) at large n.

use num_complex::Complex64;

use crate::error::{FermiError, Result};
use crate::fredholm::{build_grid, fredholm_det_on_grids, order_for_interval, DetSign, QuadratureGrid};
use crate::kernels::kernel_finite;
use crate::qseries::{prefactor_f_theta, theta_sum, ModelParams};

/// Circle contour around the origin.
#[derive(Debug, Clone, Copy)]
pub struct ContourSpec {
    pub center: Complex64,
    pub radius: f64,
    /// node count; a power of two so doubling reuses existing samples
    pub nodes: usize,
    /// certified minimum distance from the circle to the poles -q^{-k}
    pub pole_clearance: f64,
}

/// Radius regime for `choose_radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// |z| = 1, clear of the poles -q^{-k} <= -1
    Generic,
    /// |z| = q^{-n+1/2}, the w = q^n z substitution with |w| = sqrt(q)
    Edge,
    /// |z| = e^c - 1, the bulk saddle for q = e^{-c/n}
    Bulk(f64),
}

/// Minimum distance from a circle of radius r (center 0) to the pole set
/// {-q^{-k}, k >= 0}.
fn pole_distance(radius: f64, q: f64) -> f64 {
    // nearest pole moduli bracket the radius in log scale
    let kf = -radius.ln() / q.ln(); // q^{-kf} = radius
    let mut best = f64::INFINITY;
    let k0 = kf.floor().max(0.0) as i64;
    for k in (k0 - 1).max(0)..=k0 + 2 {
        let p = (-(k as f64) * q.ln()).exp();
        best = best.min((radius - p).abs());
    }
    best
}

/// Radius policy: pick the regime radius, then nudge by (1 + 1e-6) up to
/// 8 times while any pole distance is below 1e-8.
pub fn choose_radius(params: ModelParams, regime: Regime) -> ContourSpec {
    let q = params.q();
    let n = params.n() as f64;
    let mut radius = match regime {
        Regime::Generic => 1.0,
        Regime::Edge => (-(n - 0.5) * q.ln()).exp(),
        Regime::Bulk(c) => c.exp() - 1.0,
    };
    let mut clearance = pole_distance(radius, q);
    for _ in 0..8 {
        if clearance >= 1e-8 {
            break;
        }
        radius *= 1.0 + 1e-6;
        clearance = pole_distance(radius, q);
    }
    ContourSpec { center: Complex64::new(0.0, 0.0), radius, nodes: 128, pole_clearance: clearance }
}

/// Node set z_j = center + r e^{2 pi i j / N}.
pub fn circle_nodes(spec: &ContourSpec) -> Vec<Complex64> {
    (0..spec.nodes)
        .map(|j| {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / spec.nodes as f64;
            spec.center + Complex64::from_polar(spec.radius, phi)
        })
        .collect()
}

/// (2 pi i)^{-1} contour integral of g over the circle: the equally spaced
/// average of g(z_j) (z_j - center).
pub fn circle_integral<F>(g: F, spec: &ContourSpec) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mut acc = Complex64::new(0.0, 0.0);
    for z in circle_nodes(spec) {
        let v = g(z)?;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(FermiError::NonFinite(format!("contour integrand at z = {z}")));
        }
        acc += v * (z - spec.center);
    }
    Ok(acc / spec.nodes as f64)
}

/// Adaptive node doubling (reusing even-index samples) up to `max_nodes`,
/// stopping once |I_N - I_2N| < tol (1 + |I|); errors if the budget runs
/// out first. Returns (finer value, error estimate, nodes used).
pub fn circle_integral_adaptive<F>(
    g: F,
    spec: &ContourSpec,
    tol: f64,
    max_nodes: usize,
) -> Result<(Complex64, f64, usize)>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    use rayon::prelude::*;
    let eval_at = |j: usize, n: usize| -> Result<Complex64> {
        let phi = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        let z = spec.center + Complex64::from_polar(spec.radius, phi);
        let v = g(z)?;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(FermiError::NonFinite(format!("contour integrand at z = {z}")));
        }
        Ok(v * (z - spec.center))
    };
    let mut n = spec.nodes;
    let mut vals: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|j| eval_at(j, n))
        .collect::<Result<Vec<_>>>()?;
    // deterministic ordered pairwise sum, independent of thread count
    let mut prev = pairwise_sum(&vals) / n as f64;
    while n < max_nodes {
        let doubled = 2 * n;
        let odd: Vec<Complex64> = (0..n)
            .into_par_iter()
            .map(|j| eval_at(2 * j + 1, doubled))
            .collect::<Result<Vec<_>>>()?;
        let mut merged = Vec::with_capacity(doubled);
        for j in 0..n {
            merged.push(vals[j]);
            merged.push(odd[j]);
        }
        vals = merged;
        n = doubled;
        let cur = pairwise_sum(&vals) / n as f64;
        let err = (cur - prev).norm();
        prev = cur;
        if err < tol * (1.0 + cur.norm()) {
            return Ok((cur, err, n));
        }
    }
    Err(FermiError::Convergence(format!(
        "contour integral did not reach tolerance {tol:.1e} within {max_nodes} nodes"
    )))
}

fn pairwise_sum(v: &[Complex64]) -> Complex64 {
    match v.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Complement bounding box: kernel mass is exponentially small beyond the
/// edge 2 sqrt(n) plus a scaled buffer.
pub(crate) fn bounding_box(params: ModelParams) -> f64 {
    let n = params.n() as f64;
    2.0 * n.sqrt() + 15.0 * n.powf(-1.0 / 6.0) + 10.0
}

pub(crate) fn rightmost_grid(s: f64, params: ModelParams) -> Result<Option<QuadratureGrid>> {
    let b = bounding_box(params);
    if s >= b {
        return Ok(None);
    }
    let order = order_for_interval(s, b, params.n() as f64);
    Ok(Some(build_grid(s, b, order)?))
}

/// Theta-representation integrand for the rightmost-particle CDF:
/// (1/2) * theta sum * det(I - P_s K(q^{-n+1/2} e^{i pi theta}; q) P_s)
/// * F_n(theta; q). All three factors are O(1) in magnitude.
pub fn gap_integrand_theta(theta: f64, s: f64, params: ModelParams, fredholm_tol: f64) -> Result<Complex64> {
    if !(-1.0..=1.0).contains(&theta) {
        return Err(FermiError::Domain(format!("theta = {theta} outside [-1, 1]")));
    }
    let grid = rightmost_grid(s, params)?;
    gap_integrand_theta_on_grid(theta, params, fredholm_tol, grid.as_ref())
}

pub(crate) fn gap_integrand_theta_on_grid(
    theta: f64,
    params: ModelParams,
    fredholm_tol: f64,
    grid: Option<&QuadratureGrid>,
) -> Result<Complex64> {
    let q = params.q();
    let n = params.n() as f64;
    let w = q.sqrt() * Complex64::from_polar(1.0, std::f64::consts::PI * theta);
    let s_factor = theta_sum(w, q)?;
    let f_factor = prefactor_f_theta(theta, params)?;
    let det = match grid {
        None => Complex64::new(1.0, 0.0),
        Some(g) => {
            let z = Complex64::from_polar((-(n - 0.5) * q.ln()).exp(), std::f64::consts::PI * theta);
            let kernel = kernel_finite(z, params, fredholm_tol)?;
            fredholm_det_on_grids(&kernel, &[g], DetSign::Minus)?
        }
    };
    Ok(0.5 * s_factor * f_factor * det)
}

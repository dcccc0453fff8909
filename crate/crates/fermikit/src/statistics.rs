//! Finite-n observables (gap probability, rightmost-particle CDF, m-point
//! correlations, density) through the contour-integral formulas, and the
//! limiting-law evaluators they converge to.
//!
//! Contour policy: observables default to the edge radius q^{-n+1/2},
//! where the prefactor is O(1) pointwise (it equals theta sum times
//! F_n(theta)); the raw generic radius would cost q^{-n(n-1)/2} in
//! cancellation. Callers with bulk-scaled parameters pass the bulk spec.

use num_complex::Complex64;

use crate::contour::{
    bounding_box, choose_radius, gap_integrand_theta_on_grid, rightmost_grid, ContourSpec, Regime,
};
use crate::error::{FermiError, Result};
use crate::fredholm::{
    build_grid, fredholm_det_adaptive, fredholm_det_on_grids, order_for_interval, DetSign,
    QuadratureGrid,
};
use crate::kernels::{kernel_airy, kernel_crossover, kernel_finite, kernel_interp, kernel_sine};
use crate::qseries::{ln_prefactor_f, ModelParams};
use crate::specialfn::polylog_half_neg_ln;

/// An ordered disjoint union of intervals (+-infinity endpoints allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    intervals: Vec<(f64, f64)>,
}

impl RegionSet {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &intervals {
            if !(a < b) {
                return Err(FermiError::Domain(format!("RegionSet: empty interval [{a}, {b}]")));
            }
        }
        for w in intervals.windows(2) {
            if !(w[0].1 < w[1].0) {
                return Err(FermiError::Domain("RegionSet: intervals must be sorted and disjoint".into()));
            }
        }
        Ok(RegionSet { intervals })
    }

    /// The whole real line.
    pub fn full() -> Self {
        RegionSet { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    /// (-inf, s].
    pub fn left_of(s: f64) -> Self {
        RegionSet { intervals: vec![(f64::NEG_INFINITY, s)] }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Complement, clipped to [-bound, bound].
    pub fn complement_within(&self, bound: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut cursor = -bound;
        for &(a, b) in &self.intervals {
            if a > cursor {
                out.push((cursor, a.min(bound)));
            }
            cursor = cursor.max(b);
            if cursor >= bound {
                return out;
            }
        }
        if cursor < bound {
            out.push((cursor, bound));
        }
        out
    }
}

/// A contour-integral observable: raw real part, the [0,1]-clamped value
/// for reporting, the imaginary residual, and the node-doubling error
/// estimate. Clamping never replaces the raw value.
#[derive(Debug, Clone, Copy)]
pub struct GapResult {
    pub raw: f64,
    pub clamped: f64,
    pub im_residual: f64,
    pub err_est: f64,
}

impl GapResult {
    fn from_value(v: Complex64, err: f64) -> Self {
        GapResult { raw: v.re, clamped: v.re.clamp(0.0, 1.0), im_residual: v.im.abs(), err_est: err }
    }
}

fn effective_level(params: ModelParams) -> f64 {
    params.n() as f64 + 40.0 / -params.q().ln()
}

/// Grids over the complement of A, one per interval.
fn complement_grids(a: &RegionSet, params: ModelParams) -> Result<Vec<QuadratureGrid>> {
    let bound = bounding_box(params);
    let n_eff = effective_level(params);
    let mut grids = Vec::new();
    for (lo, hi) in a.complement_within(bound) {
        let order = order_for_interval(lo, hi, n_eff);
        grids.push(build_grid(lo, hi, order)?);
    }
    Ok(grids)
}

/// ln F(z) + ln det(I - K(z) chi_{A^c}) exponentiated; the common
/// integrand of every finite-n observable.
fn gap_node_value(
    z: Complex64,
    params: ModelParams,
    grids: &[QuadratureGrid],
    ktol: f64,
) -> Result<Complex64> {
    let refs: Vec<&QuadratureGrid> = grids.iter().collect();
    let det = if refs.is_empty() {
        Complex64::new(1.0, 0.0)
    } else {
        let kernel = kernel_finite(z, params, ktol)?;
        fredholm_det_on_grids(&kernel, &refs, DetSign::Minus)?
    };
    let ln_f = ln_prefactor_f(z, params)?;
    Ok(Complex64::from_polar(ln_f.re.exp(), ln_f.im) * det)
}

fn contour_average<F>(g: F, spec: &ContourSpec, tol: f64) -> Result<(Complex64, f64)>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    // integrand of (2 pi i)^{-1} oint g dz/z: plain node average of g
    let h = |z: Complex64| Ok(g(z)? / (z - spec.center));
    let (v, err, _) = crate::contour::circle_integral_adaptive(h, spec, tol, 1024)?;
    Ok((v, err))
}

/// Gap probability P(all particles in A) on an explicit contour.
pub fn gap_probability_with_contour(
    a: &RegionSet,
    params: ModelParams,
    spec: &ContourSpec,
    tol: f64,
) -> Result<GapResult> {
    let grids = complement_grids(a, params)?;
    let ktol = (tol * 1e-2).max(1e-14);
    let (v, err) = contour_average(|z| gap_node_value(z, params, &grids, ktol), spec, tol)?;
    Ok(GapResult::from_value(v, err))
}

/// Gap probability on the default (edge-radius) contour.
pub fn gap_probability(a: &RegionSet, params: ModelParams, tol: f64) -> Result<GapResult> {
    let spec = choose_radius(params, Regime::Edge);
    gap_probability_with_contour(a, params, &spec, tol)
}

/// Evaluation path for the rightmost-particle CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RightmostPath {
    ZContour,
    Theta,
}

/// P(max <= s) by either the direct z-contour (n <= 40) or the
/// theta-representation (any n; every factor O(1)).
pub fn rightmost_cdf(s: f64, params: ModelParams, tol: f64, path: RightmostPath) -> Result<GapResult> {
    match path {
        RightmostPath::ZContour => {
            if params.n() > 40 {
                return Err(FermiError::PathValidity(format!(
                    "z-contour path limited to n <= 40 (got n = {}); use the theta path",
                    params.n()
                )));
            }
            gap_probability(&RegionSet::left_of(s), params, tol)
        }
        RightmostPath::Theta => {
            let grid = rightmost_grid(s, params)?;
            let ktol = (tol * 1e-2).max(1e-14);
            let g = |theta: f64| gap_integrand_theta_on_grid(theta, params, ktol, grid.as_ref());
            // periodic trapezoid on theta in [-1, 1], doubling with reuse
            let mut n = 128usize;
            let eval = |j: usize, n: usize| g(-1.0 + 2.0 * j as f64 / n as f64);
            use rayon::prelude::*;
            let mut vals: Vec<Complex64> =
                (0..n).into_par_iter().map(|j| eval(j, n)).collect::<Result<Vec<_>>>()?;
            let mut prev: Complex64 = vals.iter().sum::<Complex64>() * (2.0 / n as f64);
            loop {
                let doubled = 2 * n;
                let odd: Vec<Complex64> = (0..n)
                    .into_par_iter()
                    .map(|j| eval(2 * j + 1, doubled))
                    .collect::<Result<Vec<_>>>()?;
                let mut merged = Vec::with_capacity(doubled);
                for j in 0..n {
                    merged.push(vals[j]);
                    merged.push(odd[j]);
                }
                vals = merged;
                n = doubled;
                let cur: Complex64 = vals.iter().sum::<Complex64>() * (2.0 / n as f64);
                let err = (cur - prev).norm();
                prev = cur;
                if err < tol * (1.0 + cur.norm()) {
                    return Ok(GapResult::from_value(cur, err));
                }
                if n >= 1024 {
                    return Err(FermiError::Convergence(format!(
                        "theta path: error estimate {err:.2e} above {tol:.2e} at {n} nodes"
                    )));
                }
            }
        }
    }
}

/// Request for an m-point correlation function.
#[derive(Debug, Clone)]
pub struct CorrelationRequest {
    pub points: Vec<f64>,
    pub params: ModelParams,
    pub tolerance: f64,
}

/// R^(m)(x_1..x_m) on an explicit contour.
pub fn correlation_with_contour(req: &CorrelationRequest, spec: &ContourSpec) -> Result<f64> {
    if req.points.is_empty() {
        return Err(FermiError::Domain("correlation: need at least one point".into()));
    }
    let m = req.points.len();
    let params = req.params;
    let ktol = (req.tolerance * 1e-2).max(1e-14);
    let points = req.points.clone();
    let g = |z: Complex64| -> Result<Complex64> {
        let kernel = kernel_finite(z, params, ktol)?;
        let vals = kernel.eval_rows(&points, &points);
        let mut mat = vals;
        Ok(crate::fredholm::det_complex_lu(&mut mat, m))
    };
    let prefactored = |z: Complex64| -> Result<Complex64> {
        let ln_f = ln_prefactor_f(z, params)?;
        Ok(Complex64::from_polar(ln_f.re.exp(), ln_f.im) * g(z)?)
    };
    let (v, _err) = contour_average(prefactored, spec, req.tolerance)?;
    if v.im.abs() > req.tolerance.max(1e-8) * (1.0 + v.norm()) {
        return Err(FermiError::Convergence(format!(
            "correlation: imaginary residual {:.2e}",
            v.im
        )));
    }
    Ok(v.re)
}

/// R^(m) on the default edge-radius contour.
pub fn correlation(req: &CorrelationRequest) -> Result<f64> {
    let spec = choose_radius(req.params, Regime::Edge);
    correlation_with_contour(req, &spec)
}

/// One-point density rho_n(x) = R^(1)(x) / n.
pub fn density(x: f64, params: ModelParams, tol: f64) -> Result<f64> {
    let req = CorrelationRequest { points: vec![x], params, tolerance: tol };
    Ok(correlation(&req)? / params.n() as f64)
}

/// Tracy-Widom GUE distribution F_GUE(t) = det(I - P_t K_Airy P_t).
pub fn limit_tracy_widom(t: f64, tol: f64) -> Result<f64> {
    let (v, _) = fredholm_det_adaptive(&kernel_airy(), t, tol)?;
    Ok(v.re)
}

/// Crossover distribution F_crossover(t; c) = det(I - P_t K_crossover(c) P_t).
pub fn limit_crossover(t: f64, c: f64, tol: f64) -> Result<f64> {
    let (v, _) = fredholm_det_adaptive(&kernel_crossover(c, 0.0)?, t, tol)?;
    Ok(v.re)
}

/// Limiting scaled bulk density for q = e^{-c/n}:
/// -(pi c)^{-1/2} Li_{1/2}(e^{-c x^2} - e^{c(1 - x^2)}).
pub fn limit_bulk_density(x: f64, c: f64) -> Result<f64> {
    if c <= 0.0 {
        return Err(FermiError::Domain(format!("limit_bulk_density: c must be positive, got {c}")));
    }
    // the argument is -u with u = e^{-c x^2}(e^c - 1) > 0, passed in logs
    let ln_u = -c * x * x + c + (-(-c).exp()).ln_1p();
    Ok(-polylog_half_neg_ln(ln_u) / (std::f64::consts::PI * c).sqrt())
}

/// Sine-process m-point correlation det(K_sin(x_i, x_j)).
pub fn limit_corr_sine(points: &[f64]) -> f64 {
    let k = kernel_sine();
    let m = points.len();
    let mut mat = k.eval_rows(points, points);
    crate::fredholm::det_complex_lu(&mut mat, m).re
}

/// Interpolating-process m-point correlation det(K_interp(x_i, x_j; a)).
pub fn limit_corr_interp(points: &[f64], a: f64) -> Result<f64> {
    let k = kernel_interp(a)?;
    let m = points.len();
    let mut mat = k.eval_rows(points, points);
    Ok(crate::fredholm::det_complex_lu(&mut mat, m).re)
}

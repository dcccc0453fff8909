//! Multi-time correlation functions and gap probabilities along imaginary
//! time, plus the combinatorial C-coefficients of the eigenstate expansion.
//!
//! Both observables integrate F(z) against block objects built from the
//! multi-time kernel; the measure is dz/z, which the equal-times reduction
//! to the one-time formulas fixes unambiguously.

use num_complex::Complex64;

use crate::contour::{choose_radius, ContourSpec, Regime};
use crate::error::{FermiError, Result};
use crate::fredholm::{build_grid, det_complex_lu, fredholm_det_block, order_for_interval, DetSign, QuadratureGrid};
use crate::kernels::kernel_multitime;
use crate::qseries::{ln_prefactor_f, ModelParams};
use crate::statistics::{GapResult, RegionSet};

/// Imaginary times in [0, beta) with beta = -ln q.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    times: Vec<f64>,
    beta: f64,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>, params: ModelParams) -> Result<Self> {
        let beta = params.beta();
        if times.is_empty() {
            return Err(FermiError::Domain("TimeGrid: need at least one time".into()));
        }
        for &t in &times {
            if !(0.0..beta).contains(&t) {
                return Err(FermiError::Domain(format!(
                    "TimeGrid: time {t} outside [0, beta = {beta})"
                )));
            }
        }
        Ok(TimeGrid { times, beta })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn all_distinct(&self) -> bool {
        let mut sorted = self.times.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.windows(2).all(|w| w[0] < w[1])
    }
}

fn contour_average<F>(g: F, spec: &ContourSpec, tol: f64) -> Result<(Complex64, f64)>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let h = |z: Complex64| Ok(g(z)? / (z - spec.center));
    let (v, err, _) = crate::contour::circle_integral_adaptive(h, spec, tol, 1024)?;
    Ok((v, err))
}

/// Multi-time m-correlation function R^(m)(x_1..x_m; tau_1..tau_m).
pub fn multitime_correlation(
    points: &[f64],
    tg: &TimeGrid,
    params: ModelParams,
    tol: f64,
) -> Result<f64> {
    let m = points.len();
    if m != tg.times().len() {
        return Err(FermiError::Dimension(format!(
            "multitime_correlation: {} points vs {} times",
            m,
            tg.times().len()
        )));
    }
    // kernel convergence q e^{dt} < 1 is automatic for dt < beta = -ln q
    let ktol = (tol * 1e-2).max(1e-14);
    let spec = choose_radius(params, Regime::Edge);
    let g = |z: Complex64| -> Result<Complex64> {
        let mut mat = vec![Complex64::new(0.0, 0.0); m * m];
        for i in 0..m {
            for j in 0..m {
                let kernel = kernel_multitime(z, tg.times()[i], tg.times()[j], params, ktol)?;
                mat[i * m + j] = kernel.eval(points[i], points[j]);
            }
        }
        let det = det_complex_lu(&mut mat, m);
        let ln_f = ln_prefactor_f(z, params)?;
        Ok(Complex64::from_polar(ln_f.re.exp(), ln_f.im) * det)
    };
    let (v, _err) = contour_average(g, &spec, tol)?;
    if v.im.abs() > tol.max(1e-8) * (1.0 + v.norm()) {
        return Err(FermiError::Convergence(format!(
            "multitime_correlation: imaginary residual {:.2e}",
            v.im
        )));
    }
    Ok(v.re)
}

/// Multi-time gap probability: all particles in A_k at time tau_k.
pub fn multitime_gap(
    regions: &[RegionSet],
    tg: &TimeGrid,
    params: ModelParams,
    tol: f64,
) -> Result<GapResult> {
    let m = regions.len();
    if m != tg.times().len() {
        return Err(FermiError::Dimension(format!(
            "multitime_gap: {} regions vs {} times",
            m,
            tg.times().len()
        )));
    }
    if !tg.all_distinct() {
        return Err(FermiError::Domain(
            "multitime_gap requires pairwise distinct times (block formula undefined otherwise)".into(),
        ));
    }
    let bound = crate::contour::bounding_box(params);
    let n_eff = params.n() as f64 + 40.0 / -params.q().ln();
    let mut grids: Vec<Vec<QuadratureGrid>> = Vec::with_capacity(m);
    for region in regions {
        let mut slice = Vec::new();
        for (lo, hi) in region.complement_within(bound) {
            slice.push(build_grid(lo, hi, order_for_interval(lo, hi, n_eff))?);
        }
        grids.push(slice);
    }
    let ktol = (tol * 1e-2).max(1e-14);
    let spec = choose_radius(params, Regime::Edge);
    let g = |z: Complex64| -> Result<Complex64> {
        let mut kernels = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                kernels.push(kernel_multitime(z, tg.times()[i], tg.times()[j], params, ktol)?);
            }
        }
        let det = fredholm_det_block(&kernels, &grids, DetSign::Minus)?;
        let ln_f = ln_prefactor_f(z, params)?;
        Ok(Complex64::from_polar(ln_f.re.exp(), ln_f.im) * det)
    };
    let (v, err) = contour_average(g, &spec, tol)?;
    Ok(GapResult {
        raw: v.re,
        clamped: v.re.clamp(0.0, 1.0),
        im_residual: v.im.abs(),
        err_est: err,
    })
}

/// C_{j_1..j_m} = q^{sum j} (2 pi i)^{-1} oint z^{-(n-m+1)} (-z; q)_inf
/// prod (1 + q^{j_i} z)^{-1} dz. The integrand's poles are cancelled by
/// zeros of (-z; q)_inf, so the product is formed with those factors
/// omitted and any origin-circling contour works.
pub fn c_coefficient(js: &[usize], params: ModelParams) -> Result<f64> {
    let n = params.n();
    let m = js.len();
    if m > n {
        return Err(FermiError::Domain(format!(
            "c_coefficient: {} indices exceed particle count {}",
            m, n
        )));
    }
    for w in js.windows(2) {
        if w[0] >= w[1] {
            return Err(FermiError::Domain("c_coefficient: indices must be strictly increasing".into()));
        }
    }
    let q = params.q();
    // saddle-balanced radius for extracting the z^{n-m} coefficient
    let radius = (-((n - m) as f64 - 0.5).max(-0.5) * q.ln()).exp();
    let spec = ContourSpec {
        center: Complex64::new(0.0, 0.0),
        radius,
        nodes: 128,
        pole_clearance: f64::INFINITY,
    };
    let power = (n - m + 1) as i32;
    let g = |z: Complex64| -> Result<Complex64> {
        // prod_{k >= 0, k not in js} (1 + q^k z)
        let mut prod = Complex64::new(1.0, 0.0);
        let mut k = 0usize;
        let mut qk = 1.0;
        loop {
            if qk * z.norm() < 1e-18 && k > js.last().copied().unwrap_or(0) {
                break;
            }
            if !js.contains(&k) {
                prod *= Complex64::new(1.0, 0.0) + z * qk;
            }
            qk *= q;
            k += 1;
        }
        Ok(prod / z.powi(power))
    };
    let (v, _err, _) = crate::contour::circle_integral_adaptive(g, &spec, 1e-12, 1024)?;
    let jsum: usize = js.iter().sum();
    let value = (jsum as f64 * q.ln()).exp() * v.re;
    if v.im.abs() > 1e-10 * (1.0 + v.norm()) {
        return Err(FermiError::Convergence(format!(
            "c_coefficient: imaginary residual {:.2e}",
            v.im
        )));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_c, joint2_density_n1};
    use crate::statistics::{correlation, CorrelationRequest};

    #[test]
    fn time_grid_validation() {
        let params = ModelParams::new(2, 0.5).unwrap();
        let beta = params.beta();
        assert!(TimeGrid::new(vec![0.0, beta * 0.5], params).is_ok());
        assert!(TimeGrid::new(vec![beta], params).is_err());
        assert!(TimeGrid::new(vec![-0.1], params).is_err());
        assert!(TimeGrid::new(vec![], params).is_err());
    }

    #[test]
    fn equal_times_reduce_to_correlation() {
        let params = ModelParams::new(2, 0.5).unwrap();
        let tau = 0.2 * params.beta();
        let tg = TimeGrid::new(vec![tau, tau], params).unwrap();
        let points = vec![0.5, -0.4];
        let mt = multitime_correlation(&points, &tg, params, 1e-9).unwrap();
        let req = CorrelationRequest { points, params, tolerance: 1e-9 };
        let r = correlation(&req).unwrap();
        assert!((mt - r).abs() < 1e-9, "multitime {mt} vs correlation {r}");
    }

    #[test]
    fn single_time_is_stationary() {
        let params = ModelParams::new(3, 0.5).unwrap();
        let x = 0.8;
        let r1 = {
            let req = CorrelationRequest { points: vec![x], params, tolerance: 1e-9 };
            correlation(&req).unwrap()
        };
        for frac in [0.0, 0.3, 0.8] {
            let tg = TimeGrid::new(vec![frac * params.beta()], params).unwrap();
            let v = multitime_correlation(&[x], &tg, params, 1e-9).unwrap();
            assert!((v - r1).abs() < 1e-9, "tau frac {frac}: {v} vs {r1}");
        }
    }

    #[test]
    fn two_time_n1_matches_joint_density() {
        let q: f64 = 0.5;
        let params = ModelParams::new(1, q).unwrap();
        let beta = params.beta();
        let (t1, t2) = (0.15 * beta, 0.6 * beta);
        let tg = TimeGrid::new(vec![t1, t2], params).unwrap();
        for &(x, y) in &[(0.3, -0.5), (1.0, 0.9), (-1.4, 0.2)] {
            let r = multitime_correlation(&[x, y], &tg, params, 1e-9).unwrap();
            let oracle = joint2_density_n1(x, y, t1, t2, q).unwrap();
            assert!((r - oracle).abs() < 1e-8, "({x},{y}): {r} vs {oracle}");
        }
    }

    #[test]
    fn gap_full_regions_is_one() {
        let params = ModelParams::new(2, 0.5).unwrap();
        let beta = params.beta();
        let tg = TimeGrid::new(vec![0.1 * beta, 0.5 * beta], params).unwrap();
        let regions = vec![RegionSet::full(), RegionSet::full()];
        let r = multitime_gap(&regions, &tg, params, 1e-9).unwrap();
        assert!((r.raw - 1.0).abs() < 1e-8, "got {}", r.raw);
    }

    #[test]
    fn gap_single_slice_reduces() {
        let params = ModelParams::new(2, 0.5).unwrap();
        let tg = TimeGrid::new(vec![0.3 * params.beta()], params).unwrap();
        let a = RegionSet::left_of(1.0);
        let block = multitime_gap(std::slice::from_ref(&a), &tg, params, 1e-9).unwrap();
        let direct = crate::statistics::gap_probability(&a, params, 1e-9).unwrap();
        assert!((block.raw - direct.raw).abs() < 1e-9, "{} vs {}", block.raw, direct.raw);
    }

    #[test]
    fn gap_two_time_n1_vs_quadrature() {
        let q: f64 = 0.5;
        let params = ModelParams::new(1, q).unwrap();
        let beta = params.beta();
        let (t1, t2) = (0.0, 0.5 * beta);
        let tg = TimeGrid::new(vec![t1, t2], params).unwrap();
        let a = RegionSet::left_of(0.0);
        let r = multitime_gap(&[a.clone(), a], &tg, params, 1e-8).unwrap();
        // quadrature of the two-time joint density over A x A
        let g = build_grid(-12.0, 0.0, 200).unwrap();
        let mut total = 0.0;
        for (x, wx) in g.nodes.iter().zip(&g.weights) {
            for (y, wy) in g.nodes.iter().zip(&g.weights) {
                total += wx * wy * joint2_density_n1(*x, *y, t1, t2, q).unwrap();
            }
        }
        assert!((r.raw - total).abs() < 1e-6, "block {} vs quadrature {total}", r.raw);
    }

    #[test]
    fn gap_rejects_coinciding_times() {
        let params = ModelParams::new(1, 0.5).unwrap();
        let tau = 0.2 * params.beta();
        let tg = TimeGrid::new(vec![tau, tau], params).unwrap();
        let a = RegionSet::left_of(0.0);
        assert!(multitime_gap(&[a.clone(), a], &tg, params, 1e-8).is_err());
    }

    #[test]
    fn gap_monotone_in_region_inclusion() {
        let params = ModelParams::new(2, 0.5).unwrap();
        let beta = params.beta();
        let tg = TimeGrid::new(vec![0.1 * beta, 0.6 * beta], params).unwrap();
        let small = RegionSet::left_of(0.5);
        let large = RegionSet::left_of(1.5);
        let p_small = multitime_gap(&[small.clone(), small], &tg, params, 1e-8).unwrap();
        let p_large = multitime_gap(&[large.clone(), large], &tg, params, 1e-8).unwrap();
        assert!(p_small.raw <= p_large.raw + 1e-10);
    }

    #[test]
    fn c_coefficient_trivial_cases() {
        // n = 1: C_j = q^j
        let params = ModelParams::new(1, 0.5).unwrap();
        for j in [0usize, 2, 5] {
            let v = c_coefficient(&[j], params).unwrap();
            assert!((v - 0.5f64.powi(j as i32)).abs() < 1e-12, "j={j}: {v}");
        }
        // m = n: C = q^{sum j}
        let params = ModelParams::new(3, 0.6).unwrap();
        let v = c_coefficient(&[1, 3, 4], params).unwrap();
        assert!((v - 0.6f64.powi(8)).abs() < 1e-12, "got {v}");
        assert!(c_coefficient(&[3, 1], params).is_err());
        assert!(c_coefficient(&[0, 1], ModelParams::new(1, 0.5).unwrap()).is_err());
    }

    #[test]
    fn c_coefficient_vs_brute_force() {
        let params = ModelParams::new(3, 0.5).unwrap();
        for js in [vec![2usize], vec![0, 2], vec![1, 2, 4]] {
            let v = c_coefficient(&js, params).unwrap();
            let (b, bound) = brute_c(&js, params, 60).unwrap();
            assert!((v - b).abs() < 1e-10 + bound, "js={js:?}: contour {v} vs brute {b}");
        }
    }

    #[test]
    fn g_factor_identity() {
        // prod_k G_k(z) from the q-binomial sums equals the closed product
        // prod_{l>=0}(1+q^l z) / prod_i (1+q^{j_i} z)
        let q: f64 = 0.45;
        let js = [1usize, 4];
        let n_terms = 220;
        for &zr in &[0.3, 0.9] {
            let z = Complex64::new(zr, 0.2);
            // closed product
            let mut closed = Complex64::new(1.0, 0.0);
            for l in 0..n_terms {
                if !js.contains(&l) {
                    closed *= Complex64::new(1.0, 0.0) + z * (l as f64 * q.ln()).exp();
                }
            }
            // q-binomial route: G_k(z) = sum_l qbinom(j_{k+1}-j_k-1, l) q^{l(l-1)/2} q^{l(j_k+1)} z^l
            // for k < m, and the infinite sum with 1/(q;q)_l for k = m
            let bounds = [(-1i64, 1i64), (1, 4), (4, i64::MAX)];
            let mut via_sums = Complex64::new(1.0, 0.0);
            for &(jk, jk1) in &bounds {
                let mut gk = Complex64::new(0.0, 0.0);
                if jk1 == i64::MAX {
                    for l in 0..n_terms as i64 {
                        let lf = l as f64;
                        let coef = (0.5 * lf * (lf - 1.0) * q.ln() + lf * (jk as f64 + 1.0) * q.ln()).exp()
                            / crate::qseries::qq_n(q, l as usize);
                        gk += coef * z.powi(l as i32);
                    }
                } else {
                    let width = (jk1 - jk - 1) as usize;
                    for l in 0..=width {
                        let lf = l as f64;
                        let coef = crate::qseries::qbinom(width, l, q).unwrap()
                            * (0.5 * lf * (lf - 1.0) * q.ln() + lf * (jk as f64 + 1.0) * q.ln()).exp();
                        gk += coef * z.powi(l as i32);
                    }
                }
                via_sums *= gk;
            }
            assert!(
                (closed - via_sums).norm() < 1e-11 * closed.norm(),
                "z={z}: closed {closed} vs sums {via_sums}"
            );
        }
    }

    #[test]
    fn eigenstate_weights_normalize() {
        // sum over all n=3 states (cutoff 80) of q^{sum k} * q^{n/2} / Z_n = 1
        let q: f64 = 0.5;
        let params = ModelParams::new(3, q).unwrap();
        let weight = (1.5 * q.ln()).exp() / crate::qseries::partition_z(params);
        let mut total = 0.0;
        for k1 in 0..80usize {
            for k2 in k1 + 1..80 {
                for k3 in k2 + 1..80 {
                    if k1 + k2 + k3 <= 80 {
                        total += ((k1 + k2 + k3) as f64 * q.ln()).exp();
                    }
                }
            }
        }
        assert!((weight * total - 1.0).abs() < 1e-9, "got {}", weight * total);
    }
}

//! q-analogue scalar functions: q-Pochhammer symbols, q-binomials, the
//! partition function Z_n(q), the contour prefactor F(z) and its theta-form
//! F_n(theta; q), and the two-sided theta sum from the triple product identity.
//!
//! All q-products that can leave the double range are accumulated in log
//! space (log-magnitude plus phase), so n up to ~10^3 is safe.

use num_complex::Complex64;

use crate::error::{FermiError, Result};

/// Infinite products are truncated once the next factor differs from 1 by
/// less than this; the geometric tail is then below roundoff.
const INF_PRODUCT_GUARD: f64 = 1e-17;

/// Theta-sum truncation guard (super-geometric decay).
const THETA_GUARD: f64 = 1e-18;

/// Model parameters: particle count and Boltzmann parameter q = e^{-1/T}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    n: usize,
    q: f64,
}

impl ModelParams {
    /// Both bounds are strict: q = 0 and q = 1 are rejected.
    pub fn new(n: usize, q: f64) -> Result<Self> {
        if n < 1 {
            return Err(FermiError::Domain(format!("n must be >= 1, got {n}")));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(FermiError::Domain(format!("q must lie in (0,1), got {q}")));
        }
        Ok(ModelParams { n, q })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Inverse-temperature period of the imaginary-time dynamics, beta = -ln q.
    pub fn beta(&self) -> f64 {
        -self.q.ln()
    }
}

/// Order of a q-Pochhammer product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Finite(usize),
    Infinite,
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(FermiError::Domain(format!("q must lie in (0,1), got {q}")));
    }
    Ok(())
}

/// 1 - q^k, accurate also for q near 1.
pub(crate) fn one_minus_q_pow(q: f64, k: f64) -> f64 {
    -f64::exp_m1(k * q.ln())
}

/// q-Pochhammer symbol (a; q)_n = prod_{k=0}^{n-1} (1 - a q^k).
///
/// The infinite product is truncated once |a| q^k drops below the
/// roundoff guard; it converges absolutely for q in (0,1).
pub fn qpochhammer(a: Complex64, q: f64, order: Order) -> Result<Complex64> {
    check_q(q)?;
    let mut prod = Complex64::new(1.0, 0.0);
    match order {
        Order::Finite(n) => {
            let mut qk = 1.0;
            for _ in 0..n {
                prod *= Complex64::new(1.0, 0.0) - a * qk;
                qk *= q;
            }
        }
        Order::Infinite => {
            let mut qk = 1.0;
            while a.norm() * qk >= INF_PRODUCT_GUARD {
                prod *= Complex64::new(1.0, 0.0) - a * qk;
                qk *= q;
            }
        }
    }
    Ok(prod)
}

/// log (a; q)_n as (log-magnitude, accumulated phase); never overflows.
pub fn ln_qpochhammer(a: Complex64, q: f64, order: Order) -> Result<Complex64> {
    check_q(q)?;
    let mut ln = Complex64::new(0.0, 0.0);
    let mut push = |factor: Complex64| {
        ln += Complex64::new(factor.norm().ln(), factor.arg());
    };
    match order {
        Order::Finite(n) => {
            let mut qk = 1.0;
            for _ in 0..n {
                push(Complex64::new(1.0, 0.0) - a * qk);
                qk *= q;
            }
        }
        Order::Infinite => {
            let mut qk = 1.0;
            while a.norm() * qk >= INF_PRODUCT_GUARD {
                push(Complex64::new(1.0, 0.0) - a * qk);
                qk *= q;
            }
        }
    }
    Ok(ln)
}

/// (q; q)_n for real q, computed stably for q near 1 via expm1.
pub fn qq_n(q: f64, n: usize) -> f64 {
    let mut prod = 1.0;
    for k in 1..=n {
        prod *= one_minus_q_pow(q, k as f64);
    }
    prod
}

/// (q; q)_infinity.
pub fn qq_inf(q: f64) -> f64 {
    let mut prod = 1.0;
    let mut k = 1.0;
    loop {
        let qk = (k * q.ln()).exp();
        if qk < INF_PRODUCT_GUARD {
            return prod;
        }
        prod *= 1.0 - qk;
        k += 1.0;
    }
}

/// q-binomial (Gaussian) coefficient [n choose m]_q via the defining ratio.
pub fn qbinom(n: usize, m: usize, q: f64) -> Result<f64> {
    if m > n {
        return Err(FermiError::Domain(format!("qbinom requires m <= n, got m={m}, n={n}")));
    }
    check_q(q)?;
    let mut val = 1.0;
    for j in 0..m {
        val *= one_minus_q_pow(q, (n - j) as f64) / one_minus_q_pow(q, (j + 1) as f64);
    }
    Ok(val)
}

/// Partition function Z_n(q) = q^{n^2/2} / (q; q)_n; strictly positive.
pub fn partition_z(params: ModelParams) -> f64 {
    let n = params.n() as f64;
    let q = params.q();
    (0.5 * n * n * q.ln()).exp() / qq_n(q, params.n())
}

/// q^{n/2} / Z_n(q) = q^{-n(n-1)/2} (q; q)_n, the normalizing weight in
/// front of every eigenstate sum. Returned as (log of it), since it
/// overflows doubles for n beyond ~40.
pub(crate) fn ln_weight_qnh_over_z(params: ModelParams) -> f64 {
    let n = params.n() as f64;
    let q = params.q();
    -0.5 * n * (n - 1.0) * q.ln() + qq_n(q, params.n()).ln()
}

/// Contour prefactor F(z) = q^{-n(n-1)/2} (q; q)_n (-z; q)_infinity / z^n,
/// assembled in log space.
pub fn prefactor_f(z: Complex64, params: ModelParams) -> Result<Complex64> {
    let ln = ln_prefactor_f(z, params)?;
    Ok(Complex64::new(ln.re.exp(), 0.0) * Complex64::new(ln.im.cos(), ln.im.sin()))
}

/// log F(z) as (log-magnitude, phase).
pub fn ln_prefactor_f(z: Complex64, params: ModelParams) -> Result<Complex64> {
    if z.norm() == 0.0 {
        return Err(FermiError::Domain("prefactor_F: z must be nonzero".into()));
    }
    let q = params.q();
    let n = params.n();
    let mut ln = Complex64::new(ln_weight_qnh_over_z(params), 0.0);
    // sum of Ln(1 + q^k z); for very large |q^k z| split off Ln(q^k z) so the
    // addition 1 + u cannot overflow
    let ln_q = q.ln();
    let ln_z = Complex64::new(z.norm().ln(), z.arg());
    let mut k = 0usize;
    loop {
        let ln_mag = k as f64 * ln_q + ln_z.re;
        if ln_mag < INF_PRODUCT_GUARD.ln() {
            break;
        }
        if ln_mag > 230.0 {
            // factor = q^k z (1 + 1/(q^k z)), so q^k z never has to be formed
            let inv = Complex64::from_polar((-ln_mag).exp(), -z.arg());
            let corr = Complex64::new(1.0, 0.0) + inv;
            ln += Complex64::new(ln_mag + corr.norm().ln(), z.arg() + corr.arg());
        } else {
            let factor = Complex64::new(1.0, 0.0) + z * (k as f64 * ln_q).exp();
            ln += Complex64::new(factor.norm().ln(), factor.arg());
        }
        k += 1;
    }
    ln -= ln_z * n as f64;
    Ok(ln)
}

/// Two-sided theta sum sum_{k=-inf}^{inf} q^{k(k-1)/2} w^k.
///
/// Satisfies the triple product (-w; q)_inf (-q/w; q)_inf (q; q)_inf.
/// The index is first shifted through the quasi-periodicity
/// theta(w) = q^{j(j-1)/2} w^j theta(q^j w) so that |q^j w| ~ sqrt(q);
/// on that circle no summand exceeds 1. For q close to 1 the function is
/// exponentially smaller than its largest summand away from arg w = 0, so
/// the sum is Poisson-resummed into a Gaussian comb with no cancellation.
pub fn theta_sum(w: Complex64, q: f64) -> Result<Complex64> {
    check_q(q)?;
    if w.norm() == 0.0 {
        return Err(FermiError::Domain("theta_sum: w = 0 (negative powers diverge)".into()));
    }
    let ln_q = q.ln();
    let j = ((0.5 * ln_q - w.norm().ln()) / ln_q).round();
    let ws = w * Complex64::from_polar((j * ln_q).exp(), 0.0);
    let core = if -0.5 * ln_q < 0.25 { theta_sum_poisson(ws, q) } else { theta_sum_core(ws, q)? };
    let pref = Complex64::from_polar((0.5 * j * (j - 1.0) * ln_q + j * w.norm().ln()).exp(), j * w.arg());
    Ok(pref * core)
}

/// theta(w) = sum_k e^{-a k^2 + c k} with a = -ln(q)/2 and
/// c = ln w + a (so q^{k(k-1)/2} w^k = e^{-a k^2 + ck}), resummed as
/// sqrt(pi/a) sum_m e^{(c - 2 pi i m)^2 / (4a)}; for small a only a few m
/// contribute and the dominant term carries no cancellation.
fn theta_sum_poisson(w: Complex64, q: f64) -> Complex64 {
    let a = -0.5 * q.ln();
    let c = Complex64::new(w.norm().ln() + a, w.arg());
    let m0 = (c.im / (2.0 * std::f64::consts::PI)).round() as i64;
    let reach = ((46.0 * 4.0 * a + c.re * c.re).sqrt() / (2.0 * std::f64::consts::PI)).ceil() as i64 + 1;
    let mut sum = Complex64::new(0.0, 0.0);
    for m in m0 - reach..=m0 + reach {
        let u = c - Complex64::new(0.0, 2.0 * std::f64::consts::PI * m as f64);
        sum += (u * u / (4.0 * a)).exp();
    }
    (std::f64::consts::PI / a).sqrt() * sum
}

fn theta_sum_core(w: Complex64, q: f64) -> Result<Complex64> {
    let ln_q = q.ln();
    let ln_w = w.norm().ln();
    let big = ln_w.abs().max((q.ln() - ln_w).abs());
    let mut sum = Complex64::new(1.0, 0.0); // k = 0 term
    let mut k = 1i64;
    let w_inv = Complex64::new(1.0, 0.0) / w;
    let mut wp = Complex64::new(1.0, 0.0);
    let mut wm = Complex64::new(1.0, 0.0);
    loop {
        wp *= w;
        wm *= w_inv;
        let kf = k as f64;
        let lp = 0.5 * kf * (kf - 1.0) * ln_q;
        let lm = 0.5 * kf * (kf + 1.0) * ln_q;
        sum += wp * lp.exp() + wm * lm.exp();
        // bound on everything beyond |k|
        if 0.5 * kf * (kf - 1.0) * ln_q + kf * big < THETA_GUARD.ln() && k > 2 {
            break;
        }
        k += 1;
        if k > 100_000 {
            return Err(FermiError::Convergence("theta_sum did not truncate".into()));
        }
    }
    Ok(sum)
}

/// F_n(theta; q) = (q;q)_n/(q;q)_inf * (-sqrt(q) e^{-i pi theta}; q)_n /
/// (-sqrt(q) e^{-i pi theta}; q)_inf, evaluated as a tail product so every
/// factor stays near 1; O(1) uniformly in theta and n.
pub fn prefactor_f_theta(theta: f64, params: ModelParams) -> Result<Complex64> {
    let q = params.q();
    let n = params.n();
    // (q;q)_n/(q;q)_inf = 1 / prod_{k>n} (1 - q^k)
    let mut denom_real = 1.0;
    let mut k = n + 1;
    loop {
        let qk = (k as f64 * q.ln()).exp();
        if qk < INF_PRODUCT_GUARD {
            break;
        }
        denom_real *= 1.0 - qk;
        k += 1;
    }
    // (-a;q)_n/(-a;q)_inf = 1 / prod_{k>=n} (1 + a q^k), a = sqrt(q) e^{-i pi theta}
    let a = q.sqrt() * Complex64::new((-std::f64::consts::PI * theta).cos(), (-std::f64::consts::PI * theta).sin());
    let mut denom_cplx = Complex64::new(1.0, 0.0);
    let mut k = n;
    loop {
        let qk = (k as f64 * q.ln()).exp();
        if a.norm() * qk < INF_PRODUCT_GUARD {
            break;
        }
        denom_cplx *= Complex64::new(1.0, 0.0) + a * qk;
        k += 1;
    }
    Ok(Complex64::new(1.0 / denom_real, 0.0) / denom_cplx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn qpochhammer_empty_product() {
        let v = qpochhammer(c(123.4, -5.0), 0.5, Order::Finite(0)).unwrap();
        assert_eq!(v, c(1.0, 0.0));
    }

    #[test]
    fn qpochhammer_two_terms() {
        // (0.5; 0.5)_2 = (1-0.5)(1-0.25) = 0.375
        let v = qpochhammer(c(0.5, 0.0), 0.5, Order::Finite(2)).unwrap();
        assert!((v.re - 0.375).abs() < 1e-15 && v.im == 0.0);
    }

    #[test]
    fn qpochhammer_infinite_truncation_depths_agree() {
        // compare the guard-truncated infinite product against a 200-term one
        let a = c(0.3, 0.0);
        let q = 0.4;
        let v_inf = qpochhammer(a, q, Order::Infinite).unwrap();
        let v_200 = qpochhammer(a, q, Order::Finite(200)).unwrap();
        assert!((v_inf - v_200).norm() / v_200.norm() <= 1e-14);
    }

    #[test]
    fn qpochhammer_rejects_bad_q() {
        assert!(qpochhammer(c(0.1, 0.0), 0.0, Order::Finite(1)).is_err());
        assert!(qpochhammer(c(0.1, 0.0), 1.0, Order::Infinite).is_err());
    }

    #[test]
    fn qbinom_trivial_cases() {
        for q in [0.2, 0.5, 0.9] {
            assert!((qbinom(7, 0, q).unwrap() - 1.0).abs() < 1e-15);
            assert!((qbinom(2, 1, q).unwrap() - (1.0 + q)).abs() < 1e-14);
        }
        assert!(qbinom(2, 3, 0.5).is_err());
    }

    #[test]
    fn qbinom_4_2_half() {
        // defining ratio gives 2.1875 exactly for q = 1/2
        assert!((qbinom(4, 2, 0.5).unwrap() - 2.1875).abs() < 1e-14);
    }

    #[test]
    fn qbinom_pascal_recurrence() {
        // [n m]_q = [n-1 m-1]_q + q^m [n-1 m]_q
        for q in [0.3, 0.7] {
            for n in 1..=8usize {
                for m in 1..n {
                    let lhs = qbinom(n, m, q).unwrap();
                    let rhs = qbinom(n - 1, m - 1, q).unwrap() + q.powi(m as i32) * qbinom(n - 1, m, q).unwrap();
                    assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn qbinom_q_to_one_limit() {
        // ordinary binomial in the q -> 1 limit
        let q = 1.0 - 1e-8;
        let cases = [(4usize, 2usize, 6.0), (6, 3, 20.0), (10, 4, 210.0)];
        for (n, m, bin) in cases {
            let v = qbinom(n, m, q).unwrap();
            assert!((v - bin).abs() / bin < 1e-5, "[{n} {m}]_q = {v}, binomial {bin}");
        }
    }

    #[test]
    fn partition_z_small_n() {
        // n=1: q^{1/2}/(1-q); n=2: q^2/((1-q)(1-q^2))
        let p1 = ModelParams::new(1, 0.5).unwrap();
        assert!((partition_z(p1) - 0.5f64.sqrt() / 0.5).abs() < 1e-14);
        let p2 = ModelParams::new(2, 0.5).unwrap();
        assert!((partition_z(p2) - 0.25 / 0.375).abs() < 1e-14);
    }

    // sum q^{k_1+...+k_j + rest} over strictly increasing tails starting at min
    fn state_sum(q: f64, parts_left: usize, min: usize, budget: usize) -> f64 {
        if parts_left == 0 {
            return 1.0;
        }
        let mut acc = 0.0;
        let mut k = min;
        // remaining parts are at least k+1, k+2, ...
        while k + (parts_left - 1) * k + parts_left * (parts_left - 1) / 2 <= budget {
            acc += (k as f64 * q.ln()).exp() * state_sum(q, parts_left - 1, k + 1, budget - k);
            k += 1;
        }
        acc
    }

    #[test]
    fn partition_z_matches_eigenstate_sum() {
        // Z_n(q) = sum over k_1<...<k_n of q^{sum k + n/2}, truncated; the
        // truncation tail is a geometric series below 1e-10 at these cutoffs
        for &(n, q) in &[(1usize, 0.5f64), (2, 0.5), (3, 0.2), (4, 0.9), (2, 0.9)] {
            let params = ModelParams::new(n, q).unwrap();
            let cutoff: usize = if q > 0.8 { 500 } else { 120 };
            let sum = (0.5 * n as f64 * q.ln()).exp() * state_sum(q, n, 0, cutoff);
            let z = partition_z(params);
            assert!((sum - z).abs() < 1e-10 * z, "n={n} q={q}: sum={sum} z={z}");
        }
    }

    #[test]
    fn prefactor_f_composes_with_qpochhammer_at_n1() {
        // n=1: F(z) = (1-q) (-z;q)_inf / z
        let params = ModelParams::new(1, 0.3).unwrap();
        let z = c(0.7, 0.0);
        let f = prefactor_f(z, params).unwrap();
        let expect = (1.0 - 0.3) * qpochhammer(-z, 0.3, Order::Infinite).unwrap() / z;
        assert!((f - expect).norm() < 1e-13 * expect.norm());
    }

    #[test]
    fn prefactor_f_log_vs_naive_n20() {
        // naive evaluation is still representable at n=20, |z| = q^{-19.5}
        let q: f64 = 0.5;
        let n = 20usize;
        let params = ModelParams::new(n, q).unwrap();
        let r = (-(n as f64 - 0.5) * q.ln()).exp();
        for theta in [0.0, 0.37, -0.9] {
            let z = r * c((std::f64::consts::PI * theta).cos(), (std::f64::consts::PI * theta).sin());
            let f_log = prefactor_f(z, params).unwrap();
            let naive = (-0.5 * (n as f64) * (n as f64 - 1.0) * q.ln()).exp()
                * qq_n(q, n)
                * qpochhammer(-z, q, Order::Infinite).unwrap()
                / z.powi(n as i32);
            assert!(
                (f_log - naive).norm() < 1e-10 * naive.norm(),
                "theta={theta}: log {f_log} vs naive {naive}"
            );
        }
    }

    #[test]
    fn theta_sum_q_to_zero_limit() {
        let w = c(0.35, 0.1);
        let v = theta_sum(w, 1e-12).unwrap();
        assert!((v - (c(1.0, 0.0) + w)).norm() < 1e-11);
    }

    #[test]
    fn theta_sum_triple_product() {
        let q = 0.3;
        let w = c(0.7, 0.0);
        let lhs = theta_sum(w, q).unwrap();
        let rhs = qpochhammer(-w, q, Order::Infinite).unwrap()
            * qpochhammer(-c(q, 0.0) / w, q, Order::Infinite).unwrap()
            * qq_inf(q);
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
    }

    #[test]
    fn theta_sum_product_form_over_grid() {
        // |theta_sum - product form| small over a (q, w) grid
        for q in [0.2, 0.5, 0.9] {
            for wm in [0.1, 1.0, 10.0] {
                for ph in [0.0f64, 1.0, 2.5] {
                    let w = wm * c(ph.cos(), ph.sin());
                    let lhs = theta_sum(w, q).unwrap();
                    let rhs = qpochhammer(-w, q, Order::Infinite).unwrap()
                        * qpochhammer(-c(q, 0.0) / w, q, Order::Infinite).unwrap()
                        * qq_inf(q);
                    let scale = lhs.norm().max(rhs.norm()).max(1e-30);
                    assert!(
                        (lhs - rhs).norm() / scale < 1e-11,
                        "q={q} w={w}: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn f_theta_matches_finite_pochhammer_ratio() {
        let params = ModelParams::new(3, 0.5).unwrap();
        let v = prefactor_f_theta(0.0, params).unwrap();
        let a = -c(0.5f64.sqrt(), 0.0);
        let expect = qq_n(0.5, 3) / qq_inf(0.5) * qpochhammer(a, 0.5, Order::Finite(3)).unwrap()
            / qpochhammer(a, 0.5, Order::Infinite).unwrap();
        assert!((v - expect).norm() < 1e-13 * expect.norm());
    }

    #[test]
    fn f_theta_conjugation_and_large_n() {
        let params = ModelParams::new(200, 0.5).unwrap();
        let v = prefactor_f_theta(0.4, params).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-12, "F_200 = {v}");
        let params = ModelParams::new(5, 0.6).unwrap();
        let a = prefactor_f_theta(0.3, params).unwrap();
        let b = prefactor_f_theta(-0.3, params).unwrap();
        assert!((a - b.conj()).norm() < 1e-14);
    }

    #[test]
    fn model_params_validation() {
        assert!(ModelParams::new(0, 0.5).is_err());
        assert!(ModelParams::new(1, 0.0).is_err());
        assert!(ModelParams::new(1, 1.0).is_err());
        assert!(ModelParams::new(1, 0.999).is_ok());
    }
}

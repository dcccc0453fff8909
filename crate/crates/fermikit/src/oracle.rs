//! Independent ground truth for the contour-integral observables:
//! eigenstate enumeration with explicit truncation bounds, exact Boltzmann
//! sampling of eigenstates, rejection sampling of particle positions at
//! small n, and the n = 1 two-time joint density.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FermiError, Result};
use crate::fredholm::{build_grid, order_for_interval};
use crate::hermite::{phi_column_f64, propagator_e};
use crate::qseries::{partition_z, ModelParams};
use crate::statistics::RegionSet;

/// Occupation numbers k_1 < k_2 < ... < k_n of one eigenstate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EigenstateSample {
    pub ks: Vec<usize>,
}

impl EigenstateSample {
    pub fn new(ks: Vec<usize>) -> Result<Self> {
        for w in ks.windows(2) {
            if w[0] >= w[1] {
                return Err(FermiError::Domain("eigenstate indices must be strictly increasing".into()));
            }
        }
        Ok(EigenstateSample { ks })
    }

    pub fn energy(&self) -> f64 {
        self.ks.iter().sum::<usize>() as f64 + self.ks.len() as f64 / 2.0
    }
}

/// Seeded, platform-stable random stream (ChaCha8: fixed counter-based
/// keystream, so identical seeds give identical draws everywhere).
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    pub seed: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { rng: ChaCha8Rng::seed_from_u64(seed), seed }
    }

    /// Independent substream for parallel use.
    pub fn split(&self, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index + 1);
        RngStream { rng, seed: self.seed }
    }

    fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}

const ORACLE_MAX_N: usize = 4;

fn check_oracle_n(params: ModelParams) -> Result<()> {
    if params.n() > ORACLE_MAX_N {
        return Err(FermiError::Domain(format!(
            "oracle operations are limited to n <= {ORACLE_MAX_N} (combinatorial explosion), got {}",
            params.n()
        )));
    }
    Ok(())
}

/// Number of eigenstates (strictly increasing n-tuples) with sum exactly e:
/// partitions of e - n(n-1)/2 into at most n parts, by dynamic programming.
fn count_states(n: usize, e_max: usize) -> Vec<f64> {
    let base = n * (n - 1) / 2;
    let mut table = vec![0.0f64; e_max + 1];
    if e_max < base {
        return table;
    }
    let m_max = e_max - base;
    // p[m] = partitions of m into parts <= n
    let mut p = vec![0.0f64; m_max + 1];
    p[0] = 1.0;
    for part in 1..=n {
        for m in part..=m_max {
            p[m] += p[m - part];
        }
    }
    for (m, &v) in p.iter().enumerate() {
        table[base + m] = v;
    }
    table
}

/// Enumerate all strictly increasing n-tuples with sum <= cutoff.
fn enumerate_states(n: usize, cutoff: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, left: usize, min: usize, budget: usize) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        let mut k = min;
        while left * k + left * (left - 1) / 2 <= budget {
            cur.push(k);
            rec(out, cur, left - 1, k + 1, budget - k);
            cur.pop();
            k += 1;
        }
    }
    rec(&mut out, &mut cur, n, 0, cutoff);
    out
}

/// Gram matrix <phi_a, phi_b>_A for a, b <= k_max over a union of intervals.
fn gram_over_region(a: &RegionSet, k_max: usize) -> Result<Vec<f64>> {
    let kf = k_max as f64;
    let bound = 2.0 * (kf + 0.5).sqrt() + 10.0;
    let m = k_max + 1;
    let mut gram = vec![0.0f64; m * m];
    for &(lo, hi) in a.intervals() {
        let lo = lo.max(-bound);
        let hi = hi.min(bound);
        if !(lo < hi) {
            continue;
        }
        let order = order_for_interval(lo, hi, kf).max(160);
        let grid = build_grid(lo, hi, order)?;
        let cols: Vec<Vec<f64>> = grid.nodes.iter().map(|&x| phi_column_f64(k_max, x)).collect();
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for (idx, w) in grid.weights.iter().enumerate() {
                    s += w * cols[idx][i] * cols[idx][j];
                }
                gram[i * m + j] += s;
                gram[j * m + i] = gram[i * m + j];
            }
        }
    }
    Ok(gram)
}

/// Gap probability by direct eigenstate enumeration:
/// (q^{n/2}/Z_n) sum over states of q^{sum k} det(<phi_{k_i}, phi_{k_j}>_A),
/// with an explicit bound on the truncated tail (each Gram determinant lies
/// in [0, 1], and the number of states at energy E comes from the partition
/// generating function).
pub fn enumerate_gap(a: &RegionSet, params: ModelParams, energy_cutoff: usize) -> Result<(f64, f64)> {
    check_oracle_n(params)?;
    let n = params.n();
    let q = params.q();
    let weight = (0.5 * n as f64 * q.ln()).exp() / partition_z(params);
    let states = enumerate_states(n, energy_cutoff);
    let gram = gram_over_region(a, energy_cutoff)?;
    let m = energy_cutoff + 1;
    let mut total = 0.0;
    for state in &states {
        let mut sub = vec![0.0f64; n * n];
        for (i, &ki) in state.iter().enumerate() {
            for (j, &kj) in state.iter().enumerate() {
                sub[i * n + j] = gram[ki * m + kj];
            }
        }
        let det = crate::hermite::real_det(&mut sub, n);
        let e: usize = state.iter().sum();
        total += (e as f64 * q.ln()).exp() * det;
    }
    // tail: sum_{E > cutoff} q^E N_n(E), accumulated until negligible
    let tail_top = energy_cutoff + 1 + ((60.0 / -q.ln()).ceil() as usize).max(80);
    let counts = count_states(n, tail_top);
    let mut tail = 0.0;
    for (e, &cnt) in counts.iter().enumerate().skip(energy_cutoff + 1) {
        tail += (e as f64 * q.ln()).exp() * cnt;
    }
    // geometric remainder beyond tail_top: N_n(E) grows polynomially; bound
    // the ratio by 2 q per step for the p(E) ~ E^{n-1} growth at these sizes
    let last = (tail_top as f64 * q.ln()).exp() * counts[tail_top].max(1.0);
    tail += last * 2.0 * q / (1.0 - q).max(0.05);
    Ok((weight * total, weight * tail))
}

/// Exact Boltzmann draw of an eigenstate: with k_i = m_i + (i-1) and
/// nondecreasing m, the weight q^{sum k} factorizes over the increments
/// d_i = m_i - m_{i-1} into independent geometrics with ratios q^{n-i+1}.
pub fn sample_eigenstate(params: ModelParams, rng: &mut RngStream) -> EigenstateSample {
    let n = params.n();
    let q = params.q();
    let mut ks = Vec::with_capacity(n);
    let mut m_acc = 0usize;
    for i in 1..=n {
        let rate = (n - i + 1) as f64;
        // P(d >= t) = q^{rate t}
        let u = 1.0 - rng.uniform(); // in (0, 1]
        let d = (u.ln() / (rate * q.ln())).floor() as usize;
        m_acc += d;
        ks.push(m_acc + (i - 1));
    }
    EigenstateSample { ks }
}

/// Envelope constant for rejection of phi_k^2 against N(0, 2k+2).
fn gaussian_envelope_const(k: usize) -> f64 {
    let s2 = 2.0 * k as f64 + 2.0;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s2).sqrt();
    let reach = 2.0 * (k as f64 + 0.5).sqrt() + 8.0;
    let steps = 4000;
    let mut sup: f64 = 0.0;
    for i in 0..=steps {
        let x = -reach + 2.0 * reach * i as f64 / steps as f64;
        let p = phi_column_f64(k, x)[k].powi(2);
        let g = norm * (-x * x / (2.0 * s2)).exp();
        sup = sup.max(p / g);
    }
    sup * 1.1
}

fn sample_phi_squared(k: usize, c_env: f64, rng: &mut RngStream) -> Result<f64> {
    let s = (2.0 * k as f64 + 2.0).sqrt();
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt() / s;
    for _ in 0..100_000 {
        // Box-Muller from the stream (deterministic draw order)
        let u1 = (1.0 - rng.uniform()).max(f64::MIN_POSITIVE);
        let u2 = rng.uniform();
        let x = s * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        let g = norm * (-x * x / (2.0 * s * s)).exp();
        let p = phi_column_f64(k, x)[k].powi(2);
        let ratio = p / (c_env * g);
        if ratio > 1.0 + 1e-9 {
            return Err(FermiError::Convergence(format!(
                "envelope failure at k={k}: ratio {ratio}"
            )));
        }
        if rng.uniform() < ratio {
            return Ok(x);
        }
    }
    Err(FermiError::Convergence("phi^2 rejection sampler stalled".into()))
}

/// Draw positions from |Phi_{k_1..k_n}|^2 by rejection: propose each
/// coordinate from the one-particle mixture h = (1/n) sum_i phi_{k_i}^2 and
/// accept with |Phi|^2 / ((n^n/n!) prod h) <= 1 (Hadamard's inequality on
/// the Slater columns gives the provable envelope). Output sorted.
pub fn sample_positions(state: &EigenstateSample, rng: &mut RngStream) -> Result<Vec<f64>> {
    let n = state.ks.len();
    if n > ORACLE_MAX_N {
        return Err(FermiError::Domain(format!("sample_positions limited to n <= {ORACLE_MAX_N}")));
    }
    let k_max = *state.ks.iter().max().unwrap();
    let envs: Vec<f64> = state.ks.iter().map(|&k| gaussian_envelope_const(k)).collect();
    let factorial: f64 = (1..=n).map(|v| v as f64).product();
    for _ in 0..200_000 {
        // propose: pick component uniformly, then draw from phi_k^2
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            let pick = (rng.uniform() * n as f64).floor() as usize % n;
            xs.push(sample_phi_squared(state.ks[pick], envs[pick], rng)?);
        }
        // |Phi|^2 = det(phi_{k_i}(x_j))^2 / n!
        let cols: Vec<Vec<f64>> = xs.iter().map(|&x| phi_column_f64(k_max, x)).collect();
        let mut mat = vec![0.0f64; n * n];
        for (i, &ki) in state.ks.iter().enumerate() {
            for j in 0..n {
                mat[i * n + j] = cols[j][ki];
            }
        }
        let det = crate::hermite::real_det(&mut mat, n);
        let phi2 = det * det / factorial;
        let mut prod_h = 1.0;
        for j in 0..n {
            let h: f64 = state.ks.iter().map(|&k| cols[j][k].powi(2)).sum::<f64>() / n as f64;
            prod_h *= h;
        }
        let bound = (n as f64).powi(n as i32) / factorial * prod_h;
        let ratio = phi2 / bound;
        if ratio > 1.0 + 1e-9 {
            return Err(FermiError::Convergence(format!("Hadamard envelope violated: {ratio}")));
        }
        if rng.uniform() < ratio {
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            return Ok(xs);
        }
    }
    Err(FermiError::Convergence("position rejection sampler stalled".into()))
}

/// Monte Carlo gap estimate: draw eigenstates, then positions, and count
/// the draws with every particle inside A. Returns (estimate, stderr).
pub fn mc_gap(a: &RegionSet, params: ModelParams, draws: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
    check_oracle_n(params)?;
    let inside = |x: f64| a.intervals().iter().any(|&(lo, hi)| lo <= x && x <= hi);
    let mut hits = 0usize;
    for _ in 0..draws {
        let state = sample_eigenstate(params, rng);
        let xs = sample_positions(&state, rng)?;
        if xs.iter().all(|&x| inside(x)) {
            hits += 1;
        }
    }
    let p = hits as f64 / draws as f64;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    Ok((p, se))
}

/// Truncated direct sum of C_{j_1..j_m} = sum over eigenstates containing
/// all the j's of q^{sum k}; returns (value, tail bound).
pub fn brute_c(js: &[usize], params: ModelParams, cutoff: usize) -> Result<(f64, f64)> {
    check_oracle_n(params)?;
    let n = params.n();
    let m = js.len();
    if m > n {
        return Err(FermiError::Domain("brute_C: more fixed indices than particles".into()));
    }
    for w in js.windows(2) {
        if w[0] >= w[1] {
            return Err(FermiError::Domain("brute_C: indices must be strictly increasing".into()));
        }
    }
    let q = params.q();
    let mut total = 0.0;
    for state in enumerate_states(n, cutoff) {
        if js.iter().all(|j| state.contains(j)) {
            let e: usize = state.iter().sum();
            total += (e as f64 * q.ln()).exp();
        }
    }
    // tail bound: states containing all j's with sum > cutoff, counted by
    // the unconstrained state count
    let tail_top = cutoff + 1 + ((60.0 / -q.ln()).ceil() as usize).max(80);
    let counts = count_states(n, tail_top);
    let mut tail = 0.0;
    for (e, &cnt) in counts.iter().enumerate().skip(cutoff + 1) {
        tail += (e as f64 * q.ln()).exp() * cnt;
    }
    tail += (tail_top as f64 * q.ln()).exp() * counts[tail_top].max(1.0) * 2.0 * q / (1.0 - q).max(0.05);
    Ok((total, tail))
}

/// Two-time joint density of the single fermion (n = 1) at imaginary times
/// 0 <= tau_1 < tau_2 < beta:
/// (q^{1/2}/Z_1) G(y, dt | x, 0) G(x, beta - dt | y, 0) with dt = tau_2 - tau_1.
pub fn joint2_density_n1(x: f64, y: f64, tau1: f64, tau2: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(FermiError::Domain(format!("q must lie in (0,1), got {q}")));
    }
    let beta = -q.ln();
    if !(0.0 <= tau1 && tau1 < tau2 && tau2 < beta) {
        return Err(FermiError::Domain(format!(
            "need 0 <= tau1 < tau2 < beta = {beta}; got ({tau1}, {tau2})"
        )));
    }
    let dt = tau2 - tau1;
    let params = ModelParams::new(1, q)?;
    let weight = q.sqrt() / partition_z(params);
    // G(y, t | x, 0) = sum_k phi_k(x) phi_k(y) e^{-kt} = E(x, y; 0, t)
    Ok(weight * propagator_e(x, y, 0.0, dt) * propagator_e(y, x, 0.0, beta - dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fredholm::gauss_legendre;

    #[test]
    fn enumerate_full_line_is_one() {
        let params = ModelParams::new(2, 0.5).unwrap();
        let (v, bound) = enumerate_gap(&RegionSet::full(), params, 60).unwrap();
        assert!((v - 1.0).abs() < 1e-9 + bound, "value {v}, bound {bound}");
        assert!(bound < 1e-12);
    }

    #[test]
    fn enumerate_n1_half_line() {
        let params = ModelParams::new(1, 0.5).unwrap();
        let (v, _) = enumerate_gap(&RegionSet::left_of(0.0), params, 60).unwrap();
        assert!((v - 0.5).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn enumerate_rejects_large_n() {
        let params = ModelParams::new(5, 0.5).unwrap();
        assert!(enumerate_gap(&RegionSet::full(), params, 40).is_err());
    }

    #[test]
    fn enumerate_truncation_bound_honored() {
        let params = ModelParams::new(2, 0.6).unwrap();
        let a = RegionSet::left_of(1.0);
        let (v1, bound1) = enumerate_gap(&a, params, 40).unwrap();
        let (v2, _) = enumerate_gap(&a, params, 50).unwrap();
        assert!((v2 - v1).abs() <= bound1, "delta {} vs bound {bound1}", (v2 - v1).abs());
    }

    #[test]
    fn eigenstate_sampler_ground_state_at_tiny_q() {
        let params = ModelParams::new(3, 1e-9).unwrap();
        let mut rng = RngStream::new(7);
        for _ in 0..50 {
            let s = sample_eigenstate(params, &mut rng);
            assert_eq!(s.ks, vec![0, 1, 2]);
        }
    }

    #[test]
    fn eigenstate_sampler_matches_geometric_law_n1() {
        // chi-square against (1-q) q^k with 10^5 draws; critical value for
        // dof=15 at p=0.001 is 37.70
        let q: f64 = 0.5;
        let params = ModelParams::new(1, q).unwrap();
        let mut rng = RngStream::new(12345);
        let draws = 100_000;
        let bins = 15usize;
        let mut counts = vec![0usize; bins + 1];
        for _ in 0..draws {
            let k = sample_eigenstate(params, &mut rng).ks[0];
            counts[k.min(bins)] += 1;
        }
        let mut chi2 = 0.0;
        for (k, &c) in counts.iter().enumerate() {
            let p = if k < bins { (1.0 - q) * q.powi(k as i32) } else { q.powi(bins as i32) };
            let e = p * draws as f64;
            chi2 += (c as f64 - e).powi(2) / e;
        }
        assert!(chi2 < 37.70, "chi2 = {chi2}");
    }

    #[test]
    fn eigenstate_sampler_state_probability_n2() {
        // P(state = (0,1)) = q^{1+1}/Z-normalized: weight q^{0+1+1}/Z_2
        let q: f64 = 0.5;
        let params = ModelParams::new(2, q).unwrap();
        let exact = q.powf(2.0) / partition_z(params);
        let mut rng = RngStream::new(99);
        let draws = 100_000;
        let mut hits = 0;
        for _ in 0..draws {
            if sample_eigenstate(params, &mut rng).ks == vec![0, 1] {
                hits += 1;
            }
        }
        let p = hits as f64 / draws as f64;
        let sigma = (exact * (1.0 - exact) / draws as f64).sqrt();
        assert!((p - exact).abs() < 3.0 * sigma, "p = {p}, exact = {exact}, 3sigma = {}", 3.0 * sigma);
    }

    #[test]
    fn eigenstate_sampler_energy_mean() {
        // E[sum k] = n(n-1)/2 + sum_{r=1}^n r q^r/(1-q^r)
        for n in [1usize, 2, 3] {
            let q: f64 = 0.6;
            let params = ModelParams::new(n, q).unwrap();
            let mut mean = (n * (n - 1) / 2) as f64;
            let mut var = 0.0;
            for r in 1..=n {
                let qr = q.powi(r as i32);
                mean += r as f64 * qr / (1.0 - qr);
                var += (r as f64).powi(2) * qr / (1.0 - qr).powi(2);
            }
            let mut rng = RngStream::new(31 + n as u64);
            let draws = 100_000;
            let mut acc = 0.0;
            for _ in 0..draws {
                acc += sample_eigenstate(params, &mut rng).ks.iter().sum::<usize>() as f64;
            }
            let emp = acc / draws as f64;
            let band = 3.0 * (var / draws as f64).sqrt();
            assert!((emp - mean).abs() < band, "n={n}: emp {emp} vs {mean} +- {band}");
        }
    }

    #[test]
    fn rng_streams_reproducible() {
        let params = ModelParams::new(3, 0.5).unwrap();
        let draw = |seed: u64| -> Vec<usize> {
            let mut rng = RngStream::new(seed);
            (0..20).flat_map(|_| sample_eigenstate(params, &mut rng).ks).collect()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
        let mut a = RngStream::new(5).split(0);
        let mut b = RngStream::new(5).split(1);
        assert_ne!(a.uniform(), b.uniform());
    }

    #[test]
    fn positions_ground_state_gaussian_moments() {
        // n=1, state (0): density phi_0^2 ~ N(0, 1) in this convention
        let state = EigenstateSample::new(vec![0]).unwrap();
        let mut rng = RngStream::new(2024);
        let draws = 20_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..draws {
            let x = sample_positions(&state, &mut rng).unwrap()[0];
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / draws as f64;
        let var = sum2 / draws as f64 - mean * mean;
        assert!(mean.abs() < 3.0 / (draws as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 5.0 * (2.0f64 / draws as f64).sqrt(), "var {var}");
    }

    #[test]
    fn positions_state_01_max_below_one() {
        // empirical P(max <= 1) vs 2D quadrature of |Phi_{0,1}|^2
        let state = EigenstateSample::new(vec![0, 1]).unwrap();
        let (nodes, weights) = gauss_legendre(80);
        let map = |t: f64| -4.5 + 5.5 * t; // [-1,1] -> [-10, 1]
        // integrate |Phi|^2 over (-10, 1]^2
        let mut exact = 0.0;
        for (t1, w1) in nodes.iter().zip(&weights) {
            let x1 = map(*t1);
            let c1 = phi_column_f64(1, x1);
            for (t2, w2) in nodes.iter().zip(&weights) {
                let x2 = map(*t2);
                let c2 = phi_column_f64(1, x2);
                let det = c1[0] * c2[1] - c2[0] * c1[1];
                exact += w1 * w2 * (5.5 * 5.5) * det * det / 2.0;
            }
        }
        let mut rng = RngStream::new(777);
        let draws = 20_000;
        let mut hits = 0;
        for _ in 0..draws {
            let xs = sample_positions(&state, &mut rng).unwrap();
            if xs[1] <= 1.0 {
                hits += 1;
            }
        }
        let p = hits as f64 / draws as f64;
        let sigma = (exact * (1.0 - exact) / draws as f64).sqrt();
        assert!((p - exact).abs() < 3.5 * sigma, "p {p} vs exact {exact}, sigma {sigma}");
    }

    #[test]
    fn positions_sorted_and_bounded_n() {
        let state = EigenstateSample::new(vec![0, 2, 5]).unwrap();
        let mut rng = RngStream::new(1);
        let xs = sample_positions(&state, &mut rng).unwrap();
        assert!(xs.windows(2).all(|w| w[0] <= w[1]));
        let big = EigenstateSample::new(vec![0, 1, 2, 3, 4]).unwrap();
        assert!(sample_positions(&big, &mut rng).is_err());
        assert!(EigenstateSample::new(vec![2, 2]).is_err());
    }

    #[test]
    fn mc_gap_full_line_certain() {
        let params = ModelParams::new(2, 0.5).unwrap();
        let mut rng = RngStream::new(3);
        let (p, se) = mc_gap(&RegionSet::full(), params, 500, &mut rng).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn mc_gap_vs_enumerate() {
        let params = ModelParams::new(2, 0.5).unwrap();
        let a = RegionSet::left_of(1.0);
        let (exact, _) = enumerate_gap(&a, params, 60).unwrap();
        let mut rng = RngStream::new(2718);
        let (p, se) = mc_gap(&a, params, 30_000, &mut rng).unwrap();
        assert!((p - exact).abs() < 3.0 * se, "mc {p} vs enumerate {exact} (3se = {})", 3.0 * se);
    }

    #[test]
    fn brute_c_trivial_cases() {
        let params = ModelParams::new(1, 0.5).unwrap();
        let (v, _) = brute_c(&[3], params, 80).unwrap();
        assert!((v - 0.5f64.powi(3)).abs() < 1e-12);
        // m = n: only the state itself qualifies
        let params = ModelParams::new(3, 0.4).unwrap();
        let (v, _) = brute_c(&[0, 2, 5], params, 80).unwrap();
        assert!((v - 0.4f64.powi(7)).abs() < 1e-12);
        assert!(brute_c(&[2, 2], params, 40).is_err());
    }

    #[test]
    fn joint2_density_normalization_and_marginal() {
        let q: f64 = 0.5;
        let beta = -q.ln();
        let (tau1, tau2) = (0.1 * beta, 0.7 * beta);
        let g = build_grid(-12.0, 12.0, 160).unwrap();
        // double integral = 1
        let mut total = 0.0;
        for (x, wx) in g.nodes.iter().zip(&g.weights) {
            for (y, wy) in g.nodes.iter().zip(&g.weights) {
                total += wx * wy * joint2_density_n1(*x, *y, tau1, tau2, q).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-8, "total {total}");
        // marginal over y = one-time density
        let x0 = 0.6;
        let mut marg = 0.0;
        for (y, wy) in g.nodes.iter().zip(&g.weights) {
            marg += wy * joint2_density_n1(x0, *y, tau1, tau2, q).unwrap();
        }
        let col = phi_column_f64(300, x0);
        let mut series = 0.0;
        for k in 0..=300usize {
            series += (1.0 - q) * (k as f64 * q.ln()).exp() * col[k] * col[k];
        }
        assert!((marg - series).abs() < 1e-8, "marginal {marg} vs series {series}");
    }

    #[test]
    fn joint2_density_time_reversal_symmetry() {
        // swapping (x, tau_1) <-> (y, tau_2) with dt -> beta - dt leaves it invariant
        let q: f64 = 0.4;
        let beta = -q.ln();
        let (x, y) = (0.7, -0.9);
        let dt = 0.3 * beta;
        let a = joint2_density_n1(x, y, 0.0, dt, q).unwrap();
        let b = joint2_density_n1(y, x, 0.0, beta - dt, q).unwrap();
        assert!((a - b).abs() < 1e-14 * a.max(1.0));
        assert!(joint2_density_n1(0.0, 0.0, 0.5, 0.2, q).is_err());
    }
}

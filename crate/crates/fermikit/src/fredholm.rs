//! Nystrom discretization of integral operators and complex Fredholm
//! determinants det(I +- K) with adaptive order control.
//!
//! Grids are Gauss-Legendre; a union of intervals gets one grid per
//! interval, concatenated, so the quadrature never crosses an indicator
//! discontinuity. Determinants go through complex LU with log-space
//! accumulation of the diagonal.

use num_complex::Complex64;

use crate::error::{FermiError, Result};
use crate::kernels::KernelHandle;

/// Gauss-Legendre nodes and weights on a concrete interval.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(n, z);
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre grid on [a, b].
pub fn build_grid(a: f64, b: f64, order: usize) -> Result<QuadratureGrid> {
    if !(a < b) {
        return Err(FermiError::Domain(format!("build_grid: degenerate interval [{a}, {b}]")));
    }
    if order < 2 {
        return Err(FermiError::Domain(format!("build_grid: order must be >= 2, got {order}")));
    }
    let (x, w) = gauss_legendre(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Ok(QuadratureGrid {
        nodes: x.iter().map(|t| mid + half * t).collect(),
        weights: w.iter().map(|v| half * v).collect(),
        a,
        b,
    })
}

/// Grid order for an oscillatory finite-n kernel on [a, b]: counts the
/// eigenfunction oscillations crossing the interval (semicircle cumulative
/// count at level n_eff) plus an edge allowance.
pub(crate) fn order_for_interval(a: f64, b: f64, n_eff: f64) -> usize {
    let cum = |x: f64| -> f64 {
        let edge = 2.0 * n_eff.sqrt();
        let xc = x.clamp(-edge, edge);
        (xc * (4.0 * n_eff - xc * xc).max(0.0).sqrt() / 2.0 + 2.0 * n_eff * (xc / edge).asin())
            / (2.0 * std::f64::consts::PI)
    };
    let waves = (cum(b) - cum(a)).abs();
    let edge_allowance = 10.0 * n_eff.powf(1.0 / 6.0);
    let order = 48.0 + 3.6 * waves + edge_allowance;
    (order.ceil() as usize).clamp(48, 420)
}

/// Sign convention for det(I +- A).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetSign {
    Plus,
    Minus,
}

/// Weighting convention for the Nystrom matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// entries sqrt(w_i) K(x_i, x_j) sqrt(w_j)
    SymmetricSqrt,
    /// entries K(x_i, x_j) w_j
    OneSided,
}

/// A discretized operator: the weighted kernel matrix on one or more grids.
pub struct DiscretizedOperator {
    pub mat: Vec<Complex64>,
    pub size: usize,
}

impl DiscretizedOperator {
    /// Assemble over the concatenation of `grids`.
    pub fn assemble(kernel: &KernelHandle, grids: &[&QuadratureGrid], weighting: Weighting) -> Result<Self> {
        let nodes: Vec<f64> = grids.iter().flat_map(|g| g.nodes.iter().cloned()).collect();
        let weights: Vec<f64> = grids.iter().flat_map(|g| g.weights.iter().cloned()).collect();
        let m = nodes.len();
        let vals = kernel.eval_rows(&nodes, &nodes);
        let mut mat = vec![Complex64::new(0.0, 0.0); m * m];
        for i in 0..m {
            for j in 0..m {
                let v = vals[i * m + j];
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(FermiError::NonFinite(format!(
                        "kernel value at ({}, {})",
                        nodes[i], nodes[j]
                    )));
                }
                mat[i * m + j] = match weighting {
                    Weighting::SymmetricSqrt => v * (weights[i].sqrt() * weights[j].sqrt()),
                    Weighting::OneSided => v * weights[j],
                };
            }
        }
        Ok(DiscretizedOperator { mat, size: m })
    }

    /// det(I +- A).
    pub fn fredholm(&self, sign: DetSign) -> Complex64 {
        let m = self.size;
        let s = match sign {
            DetSign::Plus => Complex64::new(1.0, 0.0),
            DetSign::Minus => Complex64::new(-1.0, 0.0),
        };
        let mut a = vec![Complex64::new(0.0, 0.0); m * m];
        for i in 0..m {
            for j in 0..m {
                let mut v = s * self.mat[i * m + j];
                if i == j {
                    v += 1.0;
                }
                a[i * m + j] = v;
            }
        }
        det_complex_lu(&mut a, m)
    }
}

/// Complex LU determinant with partial pivoting and log-space accumulation.
pub(crate) fn det_complex_lu(a: &mut [Complex64], m: usize) -> Complex64 {
    let mut ln_mag = 0.0;
    let mut arg = 0.0;
    let mut sign = 1.0;
    for col in 0..m {
        let mut piv = col;
        let mut best = a[col * m + col].norm_sqr();
        for r in col + 1..m {
            let v = a[r * m + col].norm_sqr();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != col {
            for c in col..m {
                a.swap(piv * m + c, col * m + c);
            }
            sign = -sign;
        }
        let d = a[col * m + col];
        ln_mag += d.norm().ln();
        arg += d.arg();
        for r in col + 1..m {
            let f = a[r * m + col] / d;
            if f.norm_sqr() == 0.0 {
                continue;
            }
            for c in col + 1..m {
                let v = a[col * m + c];
                a[r * m + c] -= f * v;
            }
            a[r * m + col] = Complex64::new(0.0, 0.0);
        }
    }
    sign * Complex64::from_polar(ln_mag.exp(), arg)
}

/// det(I +- K) of the weighted Nystrom matrix on a single interval.
pub fn fredholm_det(kernel: &KernelHandle, a: f64, b: f64, order: usize, sign: DetSign) -> Result<Complex64> {
    let grid = build_grid(a, b, order)?;
    let op = DiscretizedOperator::assemble(kernel, &[&grid], Weighting::SymmetricSqrt)?;
    Ok(op.fredholm(sign))
}

/// det(I +- K) over a union of intervals, one grid per interval.
pub fn fredholm_det_on_grids(kernel: &KernelHandle, grids: &[&QuadratureGrid], sign: DetSign) -> Result<Complex64> {
    if grids.is_empty() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let op = DiscretizedOperator::assemble(kernel, grids, Weighting::SymmetricSqrt)?;
    Ok(op.fredholm(sign))
}

/// Half-line determinant with order doubling: truncates [t, t+L] with
/// L = max(20, 40/decay), doubles the order until successive values agree
/// to `tol`, and returns the finer value with the difference as error
/// estimate.
pub fn fredholm_det_adaptive(kernel: &KernelHandle, tail_start: f64, tol: f64) -> Result<(Complex64, f64)> {
    let c = kernel.decay_hint;
    if !(c > 0.0) {
        return Err(FermiError::Domain("fredholm_det_adaptive needs a positive decay hint".into()));
    }
    let l = (40.0 / c).max(20.0);
    let mut order = 40usize;
    let mut prev = fredholm_det(kernel, tail_start, tail_start + l, order, DetSign::Minus)?;
    for _ in 0..4 {
        order *= 2;
        let next = fredholm_det(kernel, tail_start, tail_start + l, order, DetSign::Minus)?;
        let err = (next - prev).norm();
        if err < tol {
            return Ok((next, err));
        }
        prev = next;
    }
    Err(FermiError::Convergence(format!(
        "fredholm_det_adaptive: no convergence to {tol:.1e} by order {order} on [{tail_start}, {}]",
        tail_start + l
    )))
}

/// Block determinant det(I +- [K_ij]) over s time slices; kernels is the
/// row-major s x s matrix of handles, grids one per slice.
pub fn fredholm_det_block(
    kernels: &[KernelHandle],
    grids: &[Vec<QuadratureGrid>],
    sign: DetSign,
) -> Result<Complex64> {
    let s = grids.len();
    if kernels.len() != s * s {
        return Err(FermiError::Dimension(format!(
            "fredholm_det_block: expected {} kernels for {} slices, got {}",
            s * s,
            s,
            kernels.len()
        )));
    }
    // flatten each slice's union-of-intervals grid
    let slice_nodes: Vec<Vec<f64>> = grids
        .iter()
        .map(|gs| gs.iter().flat_map(|g| g.nodes.iter().cloned()).collect())
        .collect();
    let slice_weights: Vec<Vec<f64>> = grids
        .iter()
        .map(|gs| gs.iter().flat_map(|g| g.weights.iter().cloned()).collect())
        .collect();
    let sizes: Vec<usize> = slice_nodes.iter().map(|v| v.len()).collect();
    let total: usize = sizes.iter().sum();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0usize, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let mut mat = vec![Complex64::new(0.0, 0.0); total * total];
    for i in 0..s {
        for j in 0..s {
            if sizes[i] == 0 || sizes[j] == 0 {
                continue;
            }
            let vals = kernels[i * s + j].eval_rows(&slice_nodes[i], &slice_nodes[j]);
            for (a, &x_w) in slice_weights[i].iter().enumerate() {
                for (b, &y_w) in slice_weights[j].iter().enumerate() {
                    let v = vals[a * sizes[j] + b];
                    if !v.re.is_finite() || !v.im.is_finite() {
                        return Err(FermiError::NonFinite("block kernel value".into()));
                    }
                    mat[(offsets[i] + a) * total + (offsets[j] + b)] = v * (x_w.sqrt() * y_w.sqrt());
                }
            }
        }
    }
    let op = DiscretizedOperator { mat, size: total };
    Ok(op.fredholm(sign))
}

//! Symmetric tridiagonal eigensolver.
//!
//! Eigenvalues come from the implicit-shift QL iteration (the `tql1`
//! variant of the EISPACK routines, no vector accumulation, O(n²)).
//! Eigenvectors are only formed for the eigenvalues the caller asks for,
//! by inverse iteration on a pivoted tridiagonal LU factorization with
//! Gram-Schmidt reorthogonalization inside clusters of close eigenvalues.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ScsaError;

/// QL sweeps allowed per eigenvalue before giving up.
pub const MAX_SWEEPS: usize = 64;

const MAX_INVERSE_ITERS: usize = 8;

/// A real symmetric tridiagonal matrix stored as its diagonal and first
/// off-diagonal (`off[i]` couples rows `i` and `i + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    /// Panics unless `off.len() + 1 == diag.len()`.
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty(), "empty tridiagonal matrix");
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length");
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.abs_diff(j) {
            0 => self.diag[i],
            1 => self.off[i.min(j)],
            _ => 0.0,
        }
    }

    pub fn to_dense(&self) -> crate::Matrix {
        let n = self.dim();
        let mut m = crate::Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }

    /// `y = T x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.off[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }
}

/// All eigenvalues of `t`, sorted ascending.
///
/// Ties keep the order in which the QL iteration deflated them, so the
/// result is a deterministic function of the input bits.
pub fn eigenvalues(t: &SymTridiagonal) -> Result<Vec<f64>, ScsaError> {
    let n = t.dim();
    let mut d = t.diag.clone();
    let mut e = t.off.clone();
    e.push(0.0);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(ScsaError::EigenSolverNoConvergence { index: l });
            }

            // Wilkinson-style shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated_early = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated_early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated_early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    // Stable sort: equal eigenvalues keep deflation order.
    d.sort_by(|a, b| a.total_cmp(b));
    Ok(d)
}

/// Unit-norm eigenvectors for the first `count` entries of `eigenvalues`
/// (which must be sorted ascending, as returned by [`eigenvalues`]).
///
/// Each vector's largest-magnitude component is made positive.
pub fn eigenvectors(
    t: &SymTridiagonal,
    eigenvalues: &[f64],
    count: usize,
) -> Result<Vec<Vec<f64>>, ScsaError> {
    let n = t.dim();
    let count = count.min(eigenvalues.len());
    if n == 1 {
        return Ok(vec![vec![1.0]; count]);
    }
    let norm = t.norm_inf().max(f64::MIN_POSITIVE);
    let cluster_tol = 1e-3 * norm;
    let accept_residual = 1e-6 * norm;

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut cluster_start = 0;
    let mut prev_shift = f64::NEG_INFINITY;

    for j in 0..count {
        let lambda = eigenvalues[j];
        if j > 0 && (lambda - eigenvalues[j - 1]).abs() > cluster_tol {
            cluster_start = j;
        }
        // Separate coincident shifts so the factorizations differ.
        let pert = 10.0 * f64::EPSILON * lambda.abs().max(norm);
        let shift = if j > cluster_start && lambda - prev_shift < pert {
            prev_shift + pert
        } else {
            lambda
        };
        prev_shift = shift;

        let lu = ShiftedLu::factor(t, shift, norm);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + j as u64);
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        normalize(&mut x);

        let mut residual = f64::INFINITY;
        let mut converged_once = false;
        for _ in 0..MAX_INVERSE_ITERS {
            lu.solve(&mut x);
            for v in &vectors[cluster_start..j] {
                let proj = dot(&x, v);
                axpy(-proj, v, &mut x);
            }
            let growth = normalize(&mut x);
            if growth > 0.0 {
                residual = 1.0 / growth;
            }
            if residual <= 10.0 * f64::EPSILON * norm * (n as f64).sqrt() {
                // One extra pass after convergence, as in LAPACK's dstein.
                if converged_once {
                    break;
                }
                converged_once = true;
            }
        }
        if !(residual <= accept_residual) {
            return Err(ScsaError::EigenSolverNoConvergence { index: j });
        }

        let (imax, _) = x
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |(bi, bv), (i, v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bi, bv)
                }
            });
        if x[imax] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        vectors.push(x);
    }
    Ok(vectors)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Scales `x` to unit 2-norm and returns the norm it had.
fn normalize(x: &mut [f64]) -> f64 {
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return 0.0;
    }
    let ss: f64 = x.iter().map(|v| (v / scale) * (v / scale)).sum();
    let nrm = scale * ss.sqrt();
    x.iter_mut().for_each(|v| *v /= nrm);
    nrm
}

/// LU factorization with partial pivoting of `T - shift*I` (LAPACK
/// `dgttrf` layout: `u0` diagonal, `u1`/`u2` first and second
/// superdiagonals, `l` multipliers).
struct ShiftedLu {
    l: Vec<f64>,
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(t: &SymTridiagonal, shift: f64, norm: f64) -> Self {
        let n = t.dim();
        let mut l = t.off.clone();
        let mut u0: Vec<f64> = t.diag.iter().map(|d| d - shift).collect();
        let mut u1 = t.off.clone();
        let mut u2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n - 1 {
            if u0[i].abs() >= l[i].abs() {
                if u0[i] != 0.0 {
                    let fact = l[i] / u0[i];
                    l[i] = fact;
                    u0[i + 1] -= fact * u1[i];
                } else {
                    l[i] = 0.0;
                }
            } else {
                let fact = u0[i] / l[i];
                u0[i] = l[i];
                l[i] = fact;
                let tmp = u1[i];
                u1[i] = u0[i + 1];
                u0[i + 1] = tmp - fact * u0[i + 1];
                if i + 2 < n {
                    u2[i] = u1[i + 1];
                    u1[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        // Exact singularity is the expected case for a converged shift.
        let tiny = f64::EPSILON * norm;
        for p in &mut u0 {
            if p.abs() < tiny {
                *p = if *p < 0.0 { -tiny } else { tiny };
            }
        }
        Self {
            l,
            u0,
            u1,
            u2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.u0.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let tmp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = tmp - self.l[i] * b[i];
            } else {
                b[i + 1] -= self.l[i] * b[i];
            }
        }
        b[n - 1] /= self.u0[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.u1[n - 2] * b[n - 1]) / self.u0[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.u1[i] * b[i + 1] - self.u2[i] * b[i + 2]) / self.u0[i];
        }
        // Guard against overflow for a near-exact shift.
        let m = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if m > 1e150 {
            b.iter_mut().for_each(|v| *v /= m);
        }
    }
}

//! Jacobi polynomials, their norms, the kernel blocks `Z_n`, Gauss–Jacobi
//! quadrature and the smooth cutoff function used by localized kernels.
//!
//! Conventions: `P_n^{(α,β)}` is the classical Jacobi polynomial orthogonal
//! for `(1−t)^α (1+t)^β` on `[−1,1]`, normalized by
//! `P_n^{(α,β)}(1) = binom(n+α, n)`.  The norm `h_n = ∫ P_n² w` is the
//! *squared* `L²` norm.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::scalar::{Jet, Scalar};

/// Jacobi parameters `(α, β)` with `α, β > −1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiParams {
    alpha: f64,
    beta: f64,
}

impl JacobiParams {
    /// Validates `α > −1` and `β > −1`.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) || !alpha.is_finite() || !beta.is_finite() {
            return domain(format!(
                "Jacobi parameters must exceed -1, got ({alpha}, {beta})"
            ));
        }
        Ok(JacobiParams { alpha, beta })
    }

    /// `α`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `β`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Coefficients `(A_k, B_k, C_k)` of
    /// `P_{k+1}(u) = (A_k u + B_k) P_k(u) − C_k P_{k−1}(u)`.
    pub fn recurrence(&self, k: usize) -> (f64, f64, f64) {
        let (a, b) = (self.alpha, self.beta);
        if k == 0 {
            return ((a + b + 2.0) / 2.0, (a - b) / 2.0, 0.0);
        }
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let den = 2.0 * (k + 1.0) * (k + a + b + 1.0) * s;
        (
            (s + 1.0) * (s + 2.0) * s / den,
            (s + 1.0) * (a * a - b * b) / den,
            2.0 * (k + a) * (k + b) * (s + 2.0) / den,
        )
    }
}

/// Homogenized Jacobi values `den^k P_k(num/den)` for `k = 0..=n`.
///
/// With `den = 1` this is the ordinary three-term recurrence; with a
/// homogeneous `num` of degree `q` and `den` of degree `r = q` it yields a
/// homogeneous polynomial of degree `k q`, which is how the cone and ball bases
/// are written without ever dividing by `t`.
pub fn jacobi_homogeneous_all<S: Scalar>(p: &JacobiParams, n: usize, num: S, den: S) -> Vec<S> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(S::one());
    if n == 0 {
        return out;
    }
    let (a0, b0, _) = p.recurrence(0);
    out.push(num.scale(a0) + den.scale(b0));
    let den2 = den * den;
    for k in 1..n {
        let (a, b, c) = p.recurrence(k);
        let next = (num.scale(a) + den.scale(b)) * out[k] - (den2 * out[k - 1]).scale(c);
        out.push(next);
    }
    out
}

/// `P_k^{(α,β)}(t)` for `k = 0..=n`.
pub fn jacobi_eval_all<S: Scalar>(p: &JacobiParams, n: usize, t: S) -> Vec<S> {
    jacobi_homogeneous_all(p, n, t, S::one())
}

/// `P_n^{(α,β)}(t)` by the three-term recurrence.
pub fn jacobi_eval<S: Scalar>(p: &JacobiParams, n: usize, t: S) -> S {
    let (mut prev, mut cur) = (S::zero(), S::one());
    for k in 0..n {
        let (a, b, c) = p.recurrence(k);
        let next = (t.scale(a) + S::from_f64(b)) * cur - prev.scale(c);
        prev = cur;
        cur = next;
    }
    cur
}

/// Checked variant of [`jacobi_eval`] for real arguments in `[−1, 1]`.
pub fn jacobi_eval_checked(p: &JacobiParams, n: usize, t: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&t) {
        return domain(format!("Jacobi argument {t} outside [-1,1]"));
    }
    Ok(jacobi_eval(p, n, t))
}

/// `P_n^{(α,β)}(1) = binom(n+α, n)`.
pub fn jacobi_at_one(p: &JacobiParams, n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, j| acc * (j as f64 + p.alpha) / j as f64)
}

/// Derivative `d/dt P_n^{(α,β)}(t) = (n+α+β+1)/2 · P_{n−1}^{(α+1,β+1)}(t)`.
pub fn jacobi_derivative(p: &JacobiParams, n: usize, t: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let q = JacobiParams {
        alpha: p.alpha + 1.0,
        beta: p.beta + 1.0,
    };
    0.5 * (n as f64 + p.alpha + p.beta + 1.0) * jacobi_eval(&q, n - 1, t)
}

/// Total mass `h_0 = ∫_{−1}^{1} (1−t)^α (1+t)^β dt = 2^{α+β+1} B(α+1, β+1)`.
pub fn jacobi_mass(p: &JacobiParams) -> f64 {
    let (a, b) = (p.alpha, p.beta);
    ((a + b + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(a + b + 2.0))
    .exp()
}

/// Squared norm `h_n = ∫ (P_n^{(α,β)})² (1−t)^α (1+t)^β dt`.
pub fn jacobi_norm(p: &JacobiParams, n: usize) -> f64 {
    if n == 0 {
        return jacobi_mass(p);
    }
    let (a, b) = (p.alpha, p.beta);
    let nf = n as f64;
    ((a + b + 1.0) * std::f64::consts::LN_2 - (2.0 * nf + a + b + 1.0).ln()
        + ln_gamma(nf + a + 1.0)
        + ln_gamma(nf + b + 1.0)
        - ln_gamma(nf + a + b + 1.0)
        - ln_gamma(nf + 1.0))
    .exp()
}

/// Kernel block `Z_n^{(α,β)}(t) = P_n(t) P_n(1) / h_n`.
pub fn z_kernel<S: Scalar>(p: &JacobiParams, n: usize, t: S) -> S {
    jacobi_eval(p, n, t).scale(jacobi_at_one(p, n) / jacobi_norm(p, n))
}

/// `Σ_k c_k Z_k^{(α,β)}(t)` for `k = 0..coeffs.len()`, evaluated in one
/// recurrence sweep.
pub fn z_kernel_sum<S: Scalar>(p: &JacobiParams, coeffs: &[f64], t: S) -> S {
    jacobi_series(p, &z_kernel_coefficients(p, coeffs), t)
}

/// `a_k = c_k P_k(1) / h_k`, so that `Σ c_k Z_k = Σ a_k P_k`.  Precompute these
/// when the same kernel sum is evaluated at many arguments.
pub fn z_kernel_coefficients(p: &JacobiParams, coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            if c == 0.0 {
                0.0
            } else {
                c * jacobi_at_one(p, k) / jacobi_norm(p, k)
            }
        })
        .collect()
}

/// `Σ_k a_k P_k^{(α,β)}(t)` by the forward recurrence, without allocation.
pub fn jacobi_series<S: Scalar>(p: &JacobiParams, a: &[f64], t: S) -> S {
    let Some(&a0) = a.first() else {
        return S::zero();
    };
    let (mut prev, mut cur) = (S::zero(), S::one());
    let mut acc = S::from_f64(a0);
    for (k, &ak) in a.iter().enumerate().skip(1) {
        let (ra, rb, rc) = p.recurrence(k - 1);
        let next = (t.scale(ra) + S::from_f64(rb)) * cur - prev.scale(rc);
        prev = cur;
        cur = next;
        if ak != 0.0 {
            acc += cur.scale(ak);
        }
    }
    acc
}

/// One-dimensional Gauss rule on `[−1, 1]` for the weight `(1−t)^α (1+t)^β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussRule {
    /// Nodes, strictly increasing, inside `(−1, 1)`.
    pub nodes: Vec<f64>,
    /// Positive weights (they include the Jacobi weight).
    pub weights: Vec<f64>,
    /// Polynomials of degree `≤ exact_degree` are integrated exactly.
    pub exact_degree: usize,
}

impl GaussRule {
    /// `Σ w_i f(x_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `k`-point Gauss–Jacobi rule by the Golub–Welsch eigenvalue method.
///
/// The symmetric tridiagonal Jacobi matrix of the orthonormal recurrence is
/// diagonalized; the eigenvalues are the nodes and the squared first
/// components of the eigenvectors, times `h_0`, are the weights.
pub fn gauss_jacobi(p: &JacobiParams, k: usize) -> Result<GaussRule> {
    if k == 0 {
        return domain("Gauss rule needs at least one node");
    }
    let (a, b) = (p.alpha, p.beta);
    let mut jm = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let jf = j as f64;
        let s = 2.0 * jf + a + b;
        jm[(j, j)] = if j == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        if j + 1 < k {
            let n = jf + 1.0;
            let sn = 2.0 * n + a + b;
            let off2 = if j == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((a + b + 2.0).powi(2) * (a + b + 3.0))
            } else {
                4.0 * n * (n + a) * (n + b) * (n + a + b) / (sn * sn * (sn + 1.0) * (sn - 1.0))
            };
            let off = off2.sqrt();
            jm[(j, j + 1)] = off;
            jm[(j + 1, j)] = off;
        }
    }
    let eig = SymmetricEigen::try_new(jm, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Numeric(format!(
            "Golub-Welsch eigensolve did not converge (k={k}, α={a}, β={b})"
        ))
    })?;
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.total_cmp(y));
    // Polish each eigenvalue by Newton steps on P_k and take the weights as
    // Christoffel numbers 1 / Σ_j P_j(x)²/h_j; both only need the recurrence
    // and are accurate to a few ulps, unlike squared eigenvector components.
    let inv_norms: Vec<f64> = (0..=k).map(|j| 1.0 / jacobi_norm(p, j)).collect();
    let mut weights = Vec::with_capacity(k);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let v = jacobi_eval(p, k, Jet::<f64, 2>::variable(*x));
            let step = v.c[0] / v.c[1];
            if !step.is_finite() {
                break;
            }
            *x -= step;
        }
        let vals = jacobi_eval_all(p, k - 1, *x);
        let christoffel: f64 = vals.iter().zip(&inv_norms).map(|(v, ih)| v * v * ih).sum();
        weights.push(1.0 / christoffel);
    }
    for w in nodes.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Numeric(format!(
                "Gauss nodes not strictly increasing (k={k})"
            )));
        }
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Numeric(format!("non-positive Gauss weight (k={k})")));
    }
    Ok(GaussRule {
        nodes,
        weights,
        exact_degree: 2 * k - 1,
    })
}

/// `k`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(k: usize) -> Result<GaussRule> {
    gauss_jacobi(
        &JacobiParams {
            alpha: 0.0,
            beta: 0.0,
        },
        k,
    )
}

/// The smooth cutoff `â`: equal to 1 on `[0,1]`, 0 on `[2,∞)`, with the
/// `C^∞` transition `â(x) = h(2−x) / (h(2−x) + h(x−1))`, `h(s) = e^{−1/s}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CutoffFn;

impl CutoffFn {
    /// Evaluates `â(x)` for `x ≥ 0` (negative inputs are treated as 0).
    pub fn eval(&self, x: f64) -> f64 {
        cutoff_eval(self, x)
    }

    /// Coefficients `â(k/n)` for `k = 0..2n` (the last one is zero).
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        (0..2 * n.max(1))
            .map(|k| self.eval(k as f64 / n.max(1) as f64))
            .collect()
    }
}

fn bump(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// `â(x)`; see [`CutoffFn`].
pub fn cutoff_eval(_a: &CutoffFn, x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else if x >= 2.0 {
        0.0
    } else {
        let (u, v) = (bump(2.0 - x), bump(x - 1.0));
        u / (u + v)
    }
}

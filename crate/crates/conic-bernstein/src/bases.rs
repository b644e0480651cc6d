//! Orthonormal polynomial bases on the conic domains.
//!
//! Every basis handled here has the same separable shape.  An element of
//! total degree `n` is indexed by a fiber degree `m ≤ n` and an index `i`
//! within the fiber space of degree `m`, and equals
//!
//! ```text
//!     q_{m, n−m}(t) · H_{m,i}(x, t),   q_{m,j}(t) = P_j^{(2m+δ, γ)}(1 − 2t),
//! ```
//!
//! where `H_{m,i}` is homogeneous of degree `m` (a solid spherical harmonic on
//! the conic surface, a homogenized ball polynomial `t^m P(x/t)` on the cone)
//! and `δ` is the exponent of `t` in the radial part of the measure.  The
//! homogeneous form never divides by `t`, so every element is a polynomial
//! that is continuous at the apex, where it vanishes unless `m = 0`.
//!
//! Elements are normalized to unit norm for the *raw* measure of their
//! [`WeightSpec`]: arc length / surface area `dσ` on spheres, `t^{d−1} dt dσ`
//! on the conic surface, `dx dt` on the cone and `dy` on the triangle.
//! The interval family `t^α (1−t)^β` is included as the fiber-less case
//! `m = 0`, which lets one-dimensional baselines reuse the same machinery.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};
use crate::geometry::{ConicPoint, PointKind, WeightSpec};
use crate::quadrature::{self, Collapse, QuadratureRule};
use crate::scalar::Scalar;
use crate::specfun::{jacobi_eval_all, jacobi_homogeneous_all, jacobi_norm, JacobiParams};

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, j| acc * (n - j) / (j + 1))
}

/// `dim H_m(S^{d−1})`, the number of linearly independent spherical
/// harmonics of degree `m` in `d` variables.
pub fn dim_harmonics(d: usize, m: usize) -> usize {
    match (d, m) {
        (_, 0) => 1,
        (1, _) => 0,
        _ => binom(m + d - 1, m) - if m >= 2 { binom(m + d - 3, m - 2) } else { 0 },
    }
}

/// `dim V_n(V₀^{d+1}) = binom(n+d−1, n) + binom(n+d−2, n−1)`.
pub fn dim_vn_surface(d: usize, n: usize) -> usize {
    binom(n + d - 1, n) + if n >= 1 { binom(n + d - 2, n - 1) } else { 0 }
}

/// `dim Π_n(V₀^{d+1}) = binom(n+d, n) + binom(n+d−1, n−1)`.
pub fn dim_pi_surface(d: usize, n: usize) -> usize {
    binom(n + d, n) + if n >= 1 { binom(n + d - 1, n - 1) } else { 0 }
}

/// Dimension of the orthogonal space of exact degree `n` on the solid cone
/// `V^{d+1}`: `binom(n+d, n)`.
pub fn dim_vn_cone(d: usize, n: usize) -> usize {
    binom(n + d, n)
}

/// `dim Π_n(V^{d+1}) = binom(n+d+1, n)`, all polynomials of degree `≤ n` in
/// `d + 1` variables.
pub fn dim_pi_cone(d: usize, n: usize) -> usize {
    binom(n + d + 1, n)
}

/// The fiber family over each level `t` of a conic domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Fiber {
    /// No fiber: only `m = 0` occurs (interval weights on `[0,1]`).
    Point,
    /// Spherical harmonics on `S^{d−1}` (`d = 2, 3`), homogeneous in `x`.
    Sphere {
        /// Number of `x` coordinates.
        d: usize,
    },
    /// Orthogonal polynomials on `B^d` (`d = 1, 2`) for `(1−‖u‖²)^{μ−1/2}`,
    /// homogenized as `t^m P(x/t)`.
    Ball {
        /// Number of `x` coordinates.
        d: usize,
        /// Weight parameter.
        mu: f64,
    },
    /// Jacobi polynomials `P_m^{(α,β)}(x/t) t^m` on the segment `|x| ≤ t`;
    /// this is the fiber of the triangle written in the coordinates
    /// `x = y₁ − y₂`, `t = y₁ + y₂`.
    Segment {
        /// Exponent of `1 − x/t` (that is, of `y₂`).
        alpha: f64,
        /// Exponent of `1 + x/t` (that is, of `y₁`).
        beta: f64,
    },
}

impl Fiber {
    /// Number of `x` coordinates.
    pub fn coords(&self) -> usize {
        match *self {
            Fiber::Point => 0,
            Fiber::Sphere { d } | Fiber::Ball { d, .. } => d,
            Fiber::Segment { .. } => 1,
        }
    }

    /// Dimension of the fiber space of exact degree `m`.
    pub fn dim(&self, m: usize) -> usize {
        match *self {
            Fiber::Point => usize::from(m == 0),
            Fiber::Sphere { d } => dim_harmonics(d, m),
            Fiber::Ball { d: 1, .. } | Fiber::Segment { .. } => 1,
            Fiber::Ball { .. } => m + 1,
        }
    }

    /// Squared norms, on the fiber measure, of the functions returned by
    /// [`Fiber::raw_all`] in degree `m`.
    pub fn raw_norms(&self, m: usize) -> Vec<f64> {
        match *self {
            Fiber::Point => {
                if m == 0 {
                    vec![1.0]
                } else {
                    Vec::new()
                }
            }
            Fiber::Sphere { d: 2 } => {
                if m == 0 {
                    vec![2.0 * PI]
                } else {
                    vec![PI, PI]
                }
            }
            Fiber::Sphere { .. } => {
                let mut out = Vec::with_capacity(2 * m + 1);
                for k in 0..=m {
                    let v = s2_norm(m, k);
                    out.push(v);
                    if k > 0 {
                        out.push(v);
                    }
                }
                out
            }
            Fiber::Ball { d: 1, mu } => {
                let p = JacobiParams::new(mu - 0.5, mu - 0.5).expect("validated");
                vec![jacobi_norm(&p, m)]
            }
            Fiber::Ball { mu, .. } => {
                let mut out = Vec::with_capacity(m + 1);
                let mut k = m % 2;
                while k <= m {
                    let j = (m - k) / 2;
                    let p = JacobiParams::new(mu - 0.5, k as f64).expect("validated");
                    let radial = 0.5 * 2f64.powf(-(mu + k as f64 + 0.5)) * jacobi_norm(&p, j);
                    if k == 0 {
                        out.push(2.0 * PI * radial);
                    } else {
                        out.push(PI * radial);
                        out.push(PI * radial);
                    }
                    k += 2;
                }
                out
            }
            Fiber::Segment { alpha, beta } => {
                let p = JacobiParams::new(alpha, beta).expect("validated");
                vec![jacobi_norm(&p, m) * 2f64.powf(-(alpha + beta + 1.0))]
            }
        }
    }

    /// Unnormalized homogeneous fiber functions of every degree `m ≤ max_m`,
    /// evaluated at `(x, t)`; entry `m` lists the `dim(m)` functions of degree
    /// `m` in the order used by [`BasisIndex::l`].
    ///
    /// Sphere functions depend on `x` only; ball and segment functions are
    /// homogeneous of degree `m` jointly in `(x, t)`.
    pub fn raw_all<S: Scalar>(&self, max_m: usize, x: &[S], t: S) -> Vec<Vec<S>> {
        let mut out: Vec<Vec<S>> = (0..=max_m)
            .map(|m| Vec::with_capacity(self.dim(m)))
            .collect();
        match *self {
            Fiber::Point => out[0].push(S::one()),
            Fiber::Sphere { d: 2 } => {
                out[0].push(S::one());
                let (mut re, mut im) = (S::one(), S::zero());
                for slot in out.iter_mut().skip(1) {
                    let nre = re * x[0] - im * x[1];
                    im = re * x[1] + im * x[0];
                    re = nre;
                    slot.push(re);
                    slot.push(im);
                }
            }
            Fiber::Sphere { .. } => {
                let z = x[2];
                let r2 = x[0] * x[0] + x[1] * x[1] + z * z;
                let (mut re, mut im) = (S::one(), S::zero());
                for k in 0..=max_m {
                    if k > 0 {
                        let nre = re * x[0] - im * x[1];
                        im = re * x[1] + im * x[0];
                        re = nre;
                    }
                    // q_l = ((2l−1) z q_{l−1} − (l+k−1) r² q_{l−2}) / (l−k), q_k = 1
                    let (mut qm2, mut qm1) = (S::zero(), S::one());
                    for l in k..=max_m {
                        let q = if l == k {
                            S::one()
                        } else {
                            let lf = l as f64;
                            let kf = k as f64;
                            ((z * qm1).scale(2.0 * lf - 1.0) - (r2 * qm2).scale(lf + kf - 1.0))
                                .scale(1.0 / (lf - kf))
                        };
                        if l > k {
                            qm2 = qm1;
                            qm1 = q;
                        }
                        if k == 0 {
                            out[l].push(q);
                        } else {
                            out[l].push(q * re);
                            out[l].push(q * im);
                        }
                    }
                }
            }
            Fiber::Ball { d: 1, mu } => {
                let p = JacobiParams::new(mu - 0.5, mu - 0.5).expect("validated");
                for (m, v) in jacobi_homogeneous_all(&p, max_m, x[0], t)
                    .into_iter()
                    .enumerate()
                {
                    out[m].push(v);
                }
            }
            Fiber::Ball { mu, .. } => {
                let num = (x[0] * x[0] + x[1] * x[1]).scale(2.0) - t * t;
                let den = t * t;
                let (mut re, mut im) = (S::one(), S::zero());
                for k in 0..=max_m {
                    if k > 0 {
                        let nre = re * x[0] - im * x[1];
                        im = re * x[1] + im * x[0];
                        re = nre;
                    }
                    let p = JacobiParams::new(mu - 0.5, k as f64).expect("validated");
                    let radial = jacobi_homogeneous_all(&p, (max_m - k) / 2, num, den);
                    for (j, v) in radial.into_iter().enumerate() {
                        let m = k + 2 * j;
                        if k == 0 {
                            out[m].push(v);
                        } else {
                            out[m].push(v * re);
                            out[m].push(v * im);
                        }
                    }
                }
            }
            Fiber::Segment { alpha, beta } => {
                let p = JacobiParams::new(alpha, beta).expect("validated");
                for (m, v) in jacobi_homogeneous_all(&p, max_m, x[0], t)
                    .into_iter()
                    .enumerate()
                {
                    out[m].push(v);
                }
            }
        }
        out
    }
}

/// Squared `L²(S²)` norm of `Re/Im (x₁+ix₂)^k q_{m,k}` where `q_{m,k}` is the
/// homogenized `k`-th derivative of the Legendre polynomial scaled so that
/// its leading coefficient recurrence starts at `1` instead of `(2k−1)!!`.
fn s2_norm(m: usize, k: usize) -> f64 {
    let (mf, kf) = (m as f64, k as f64);
    // (2k−1)!! = (2k)! / (2^k k!)
    let ln_dfact = ln_gamma(2.0 * kf + 1.0) - kf * LN_2 - ln_gamma(kf + 1.0);
    let area = if k == 0 { 4.0 * PI } else { 2.0 * PI };
    let ln = area.ln() - (2.0 * mf + 1.0).ln() + ln_gamma(mf + kf + 1.0)
        - ln_gamma(mf - kf + 1.0)
        - 2.0 * ln_dfact;
    ln.exp()
}

/// Real orthonormal spherical harmonic `Y_ℓ^m(ξ)` on `S^{d−1}` (`d = 2, 3`)
/// for the raw surface measure (`|S¹| = 2π`, `|S²| = 4π`).
///
/// Index order: on `S¹`, `ℓ = 0` is `cos mθ` and `ℓ = 1` is `sin mθ`; on `S²`
/// `ℓ = 0` is the zonal harmonic and `ℓ = 2k−1, 2k` are the `cos kφ`,
/// `sin kφ` harmonics of order `k`.
pub fn sph_harmonic_eval(d: usize, m: usize, l: usize, xi: &[f64]) -> Result<f64> {
    if !(2..=3).contains(&d) {
        return Err(Error::Unsupported(format!(
            "spherical harmonics for d = {d}"
        )));
    }
    if xi.len() != d {
        return domain(format!("expected a point with {d} coordinates"));
    }
    let nrm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (nrm - 1.0).abs() > 1e-10 {
        return domain(format!("point is not on the unit sphere (norm {nrm})"));
    }
    let f = Fiber::Sphere { d };
    if l >= f.dim(m) {
        return Err(Error::Index(format!(
            "harmonic index {l} out of range for degree {m}"
        )));
    }
    let vals = f.raw_all(m, xi, 1.0);
    Ok(vals[m][l] / f.raw_norms(m)[l].sqrt())
}

/// Position of an element in a basis: total degree `n`, fiber degree `m`
/// and index `l` within the fiber space of degree `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisIndex {
    /// Total degree.
    pub n: usize,
    /// Fiber degree.
    pub m: usize,
    /// Index within the fiber space.
    pub l: usize,
}

/// Domain tag of a basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisDomain {
    /// `[0, 1]`.
    Interval,
    /// Conic surface `V₀^{d+1}`.
    Surface,
    /// Solid cone `V^{d+1}`.
    Cone,
    /// Triangle `T²`.
    Triangle,
}

/// An orthonormal basis of `Π_N` for one weight, with normalizations
/// computed once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisHandle {
    domain: BasisDomain,
    weight: WeightSpec,
    fiber: Fiber,
    max_degree: usize,
    delta: f64,
    gamma: f64,
    t_params: Vec<JacobiParams>,
    t_norms: Vec<Vec<f64>>,
    fiber_norms: Vec<Vec<f64>>,
    indices: Vec<BasisIndex>,
    norms: Vec<f64>,
}

impl BasisHandle {
    /// Builds the basis of `Π_N` orthonormal for `weight`.
    pub fn new(weight: WeightSpec, max_degree: usize) -> Result<Self> {
        weight.validate()?;
        let (domain, fiber, delta, gamma) = match weight {
            WeightSpec::IntervalJacobi { alpha, beta } => {
                (BasisDomain::Interval, Fiber::Point, alpha, beta)
            }
            WeightSpec::Surface { d, beta, gamma } => (
                BasisDomain::Surface,
                Fiber::Sphere { d },
                d as f64 - 1.0 + beta,
                gamma,
            ),
            WeightSpec::Cone { d, mu, gamma } => (
                BasisDomain::Cone,
                Fiber::Ball { d, mu },
                d as f64 + 2.0 * mu - 1.0,
                gamma,
            ),
            WeightSpec::Triangle { a, b, c } => (
                BasisDomain::Triangle,
                Fiber::Segment { alpha: b, beta: a },
                a + b + 1.0,
                c,
            ),
        };
        let mut t_params = Vec::with_capacity(max_degree + 1);
        let mut t_norms: Vec<Vec<f64>> = Vec::with_capacity(max_degree + 1);
        let mut fiber_norms = Vec::with_capacity(max_degree + 1);
        for m in 0..=max_degree {
            let alpha = 2.0 * m as f64 + delta;
            let p = JacobiParams::new(alpha, gamma)?;
            let scale = 2f64.powf(-(alpha + gamma + 1.0));
            t_norms.push(
                (0..=max_degree - m)
                    .map(|j| scale * jacobi_norm(&p, j))
                    .collect(),
            );
            t_params.push(p);
            fiber_norms.push(fiber.raw_norms(m));
        }
        let mut indices = Vec::new();
        let mut norms = Vec::new();
        for n in 0..=max_degree {
            for m in 0..=n {
                for l in 0..fiber.dim(m) {
                    indices.push(BasisIndex { n, m, l });
                    norms.push(t_norms[m][n - m] * fiber_norms[m][l]);
                }
            }
        }
        Ok(BasisHandle {
            domain,
            weight,
            fiber,
            max_degree,
            delta,
            gamma,
            t_params,
            t_norms,
            fiber_norms,
            indices,
            norms,
        })
    }

    /// Domain tag.
    pub fn domain(&self) -> BasisDomain {
        self.domain
    }

    /// The weight the basis is orthonormal for.
    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    /// Fiber family.
    pub fn fiber(&self) -> Fiber {
        self.fiber
    }

    /// Highest total degree `N`.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Exponent `δ` of `t` in the radial measure (before the `t^{2m}` of
    /// the fiber degree).
    pub fn t_exponent(&self) -> f64 {
        self.delta
    }

    /// Exponent of `1 − t`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Number of `x` coordinates in conic coordinates.
    pub fn x_coords(&self) -> usize {
        self.fiber.coords()
    }

    /// `dim Π_N`.
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Element indices in evaluation order (by `n`, then `m`, then `l`).
    pub fn indices(&self) -> &[BasisIndex] {
        &self.indices
    }

    /// Number of elements of total degree `≤ n`.
    pub fn dim_up_to(&self, n: usize) -> usize {
        self.indices.partition_point(|i| i.n <= n)
    }

    /// Squared norms of the unnormalized elements (the product of the radial
    /// and the fiber norm); evaluation divides by their square roots.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Position of `idx` in evaluation order.
    pub fn position(&self, idx: BasisIndex) -> Option<usize> {
        self.indices.binary_search(&idx).ok()
    }

    /// Jacobi parameters `(2m+δ, γ)` of the radial factor for fiber degree `m`.
    pub fn t_params(&self, m: usize) -> &JacobiParams {
        &self.t_params[m]
    }

    /// Squared norm of the radial factor `P_j^{(2m+δ,γ)}(1−2t)` for
    /// `t^{2m+δ}(1−t)^γ dt` on `[0,1]`.
    pub fn t_norm(&self, m: usize, j: usize) -> f64 {
        self.t_norms[m][j]
    }

    /// Squared fiber norms in degree `m`.
    pub fn fiber_norms(&self, m: usize) -> &[f64] {
        &self.fiber_norms[m]
    }

    /// Normalized radial factors `q_{m,j}(t)`, `j = 0..=N−m`.
    pub fn t_factors<S: Scalar>(&self, m: usize, t: S) -> Vec<S> {
        let u = S::one() - t.scale(2.0);
        let mut v = jacobi_eval_all(&self.t_params[m], self.max_degree - m, u);
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = vj.scale(1.0 / self.t_norms[m][j].sqrt());
        }
        v
    }

    /// Normalized fiber functions of every degree at `(x, t)`.
    pub fn fiber_factors<S: Scalar>(&self, x: &[S], t: S) -> Vec<Vec<S>> {
        let mut f = self.fiber.raw_all(self.max_degree, x, t);
        for (m, fm) in f.iter_mut().enumerate() {
            for (l, v) in fm.iter_mut().enumerate() {
                *v = v.scale(1.0 / self.fiber_norms[m][l].sqrt());
            }
        }
        f
    }

    /// All orthonormal elements at the conic coordinates `(x, t)`; for the
    /// triangle `x = y₁ − y₂`, `t = y₁ + y₂`, for the interval `x` is empty.
    pub fn eval_all<S: Scalar>(&self, x: &[S], t: S) -> Vec<S> {
        let fib = self.fiber_factors(x, t);
        let rad: Vec<Vec<S>> = (0..=self.max_degree)
            .map(|m| {
                if self.fiber.dim(m) > 0 {
                    self.t_factors(m, t)
                } else {
                    Vec::new()
                }
            })
            .collect();
        let mut out = Vec::with_capacity(self.dim());
        for n in 0..=self.max_degree {
            for m in 0..=n {
                for f in &fib[m] {
                    out.push(rad[m][n - m] * *f);
                }
            }
        }
        out
    }

    /// Converts natural coordinates (`[t]`, `(x, t)` or `(y₁, y₂)`) to conic
    /// coordinates `(x, t)`.
    pub fn to_conic<S: Scalar>(&self, p: &[S]) -> (Vec<S>, S) {
        match self.domain {
            BasisDomain::Interval => (Vec::new(), p[0]),
            BasisDomain::Triangle => (vec![p[0] - p[1]], p[0] + p[1]),
            _ => {
                let d = p.len() - 1;
                (p[..d].to_vec(), p[d])
            }
        }
    }

    /// All orthonormal elements at a point given in natural coordinates.
    pub fn eval_natural<S: Scalar>(&self, p: &[S]) -> Vec<S> {
        let (x, t) = self.to_conic(p);
        self.eval_all(&x, t)
    }

    /// `Σ c_i φ_i` at natural coordinates.
    pub fn eval_combination<S: Scalar>(&self, coeffs: &[f64], p: &[S]) -> S {
        let vals = self.eval_natural(p);
        coeffs
            .iter()
            .zip(vals)
            .fold(S::zero(), |acc, (&c, v)| acc + v.scale(c))
    }

    /// A quadrature rule, in natural coordinates, that integrates products
    /// of two elements (degree `2N`) plus `extra` degrees exactly.
    pub fn reference_rule(&self, extra: usize) -> Result<QuadratureRule> {
        let deg = 2 * self.max_degree + extra;
        match self.weight {
            WeightSpec::IntervalJacobi { alpha, beta } => {
                quadrature::unit_interval(alpha, beta, deg / 2 + 1)
            }
            WeightSpec::Surface { d, beta, gamma } => quadrature::surface(d, beta, gamma, deg),
            WeightSpec::Cone { d, mu, gamma } => quadrature::cone(d, mu, gamma, deg),
            WeightSpec::Triangle { a, b, c } => {
                quadrature::triangle(a, b, c, deg, Collapse::Origin)
            }
        }
    }

    /// Largest entry of `|G − I|`, where `G` is the Gram matrix of the basis
    /// under [`BasisHandle::reference_rule`].
    pub fn certify_orthonormality(&self) -> Result<f64> {
        let rule = self.reference_rule(0)?;
        let dim = self.dim();
        let mut g = vec![0.0; dim * dim];
        for (p, w) in rule.iter() {
            let v: Vec<f64> = self.eval_natural(p);
            for i in 0..dim {
                let wi = w * v[i];
                for j in i..dim {
                    g[i * dim + j] += wi * v[j];
                }
            }
        }
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in i..dim {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[i * dim + j] - target).abs());
            }
        }
        Ok(worst)
    }

    fn element(&self, idx: BasisIndex) -> Result<usize> {
        self.position(idx).ok_or_else(|| {
            Error::Index(format!(
                "basis index {idx:?} not in basis of degree {}",
                self.max_degree
            ))
        })
    }
}

fn check_point(h: &BasisHandle, want: BasisDomain, kind: PointKind, p: &ConicPoint) -> Result<()> {
    if h.domain != want {
        return domain(format!("basis is for {:?}, not {:?}", h.domain, want));
    }
    if p.kind() != kind {
        return domain(format!("expected a {kind:?} point"));
    }
    if p.d() != h.x_coords() {
        return domain(format!(
            "point has d = {}, basis has d = {}",
            p.d(),
            h.x_coords()
        ));
    }
    Ok(())
}

/// `S^n_{m,ℓ}(x, t)`, orthonormal on the conic surface.
pub fn surface_basis_eval(h: &BasisHandle, idx: BasisIndex, p: &ConicPoint) -> Result<f64> {
    check_point(h, BasisDomain::Surface, PointKind::Surface, p)?;
    let i = h.element(idx)?;
    Ok(h.eval_all(p.x(), p.t())[i])
}

/// `J^n_{m,k}(x, t)`, orthonormal on the solid cone.
pub fn cone_basis_eval(h: &BasisHandle, idx: BasisIndex, p: &ConicPoint) -> Result<f64> {
    check_point(h, BasisDomain::Cone, PointKind::Solid, p)?;
    let i = h.element(idx)?;
    Ok(h.eval_all(p.x(), p.t())[i])
}

/// Orthonormal triangle element at `y ∈ T²`.
pub fn triangle_basis_eval(h: &BasisHandle, idx: BasisIndex, y: [f64; 2]) -> Result<f64> {
    if h.domain != BasisDomain::Triangle {
        return domain("basis is not a triangle basis");
    }
    let tol = 1e-12;
    if y[0] < -tol || y[1] < -tol || y[0] + y[1] > 1.0 + tol {
        return domain(format!("point {y:?} outside the triangle"));
    }
    let i = h.element(idx)?;
    Ok(h.eval_natural(&y)[i])
}

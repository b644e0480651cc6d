//! Differential operators on the conic domains, the spectral operators
//! `Δ₀,γ` (conic surface) and `𝔇μ,γ` (cone), and quadrature checks of their
//! self-adjointness identities.
//!
//! Derivatives are exact: a polynomial family is evaluated on a Taylor jet
//! that parametrizes a line `s ↦ p + s v` or a rotation `θ ↦ R_θ p`, and the
//! jet coefficients are the derivatives along that curve.
//!
//! Coordinates are the *natural* coordinates of each domain: `[t]` on the
//! interval, `(x₁, …, x_d, t)` on the conic surface and the cone, `(y₁, y₂)`
//! on the triangle.

use serde::{Deserialize, Serialize};

use crate::bases::{BasisDomain, BasisHandle};
use crate::error::{domain, Error, Result};
use crate::quadrature::QuadratureRule;
use crate::scalar::{Jet, Scalar};

/// A finite family of polynomials that can be evaluated on any [`Scalar`]
/// (in particular on jets, which is how derivatives are taken).
pub trait PolyFamily: Sync {
    /// Number of functions in the family.
    fn len(&self) -> usize;

    /// Whether the family is empty.
    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Domain of the natural coordinates.
    fn domain(&self) -> BasisDomain;

    /// Number of natural coordinates of a point.
    fn coords(&self) -> usize;

    /// Values of every function at the natural coordinates `p`.
    fn eval<S: Scalar>(&self, p: &[S]) -> Vec<S>;
}

impl PolyFamily for BasisHandle {
    fn len(&self) -> usize {
        self.dim()
    }

    fn domain(&self) -> BasisDomain {
        BasisHandle::domain(self)
    }

    fn coords(&self) -> usize {
        natural_coords(BasisHandle::domain(self), self.x_coords())
    }

    fn eval<S: Scalar>(&self, p: &[S]) -> Vec<S> {
        self.eval_natural(p)
    }
}

/// A single polynomial `Σ c_i φ_i` given by coefficients in a basis.
#[derive(Clone, Copy, Debug)]
pub struct Combination<'a> {
    /// The basis.
    pub basis: &'a BasisHandle,
    /// Coefficients, one per basis element (shorter slices are zero-padded).
    pub coeffs: &'a [f64],
}

impl PolyFamily for Combination<'_> {
    fn len(&self) -> usize {
        1
    }

    fn domain(&self) -> BasisDomain {
        self.basis.domain()
    }

    fn coords(&self) -> usize {
        PolyFamily::coords(self.basis)
    }

    fn eval<S: Scalar>(&self, p: &[S]) -> Vec<S> {
        vec![self.basis.eval_combination(self.coeffs, p)]
    }
}

/// Number of natural coordinates for a domain whose conic fiber has `d`
/// coordinates.
pub fn natural_coords(dom: BasisDomain, d: usize) -> usize {
    match dom {
        BasisDomain::Interval => 1,
        BasisDomain::Triangle => 2,
        _ => d + 1,
    }
}

/// `k`-th derivatives (`k < K`) of every function of `f` along `s ↦ p + s v`.
pub fn along<F: PolyFamily, const K: usize>(f: &F, p: &[f64], v: &[f64]) -> Vec<[f64; K]> {
    let pt: Vec<Jet<f64, K>> = p.iter().zip(v).map(|(&a, &b)| Jet::linear(a, b)).collect();
    f.eval(&pt)
        .into_iter()
        .map(|j| std::array::from_fn(|k| j.derivative(k)))
        .collect()
}

/// `k`-th derivatives (`k < K`) along the rotation in the `(x_i, x_j)` plane
/// generated by `D_{i,j} = x_i ∂_j − x_j ∂_i` (0-based coordinate indices).
pub fn rotation<F: PolyFamily, const K: usize>(
    f: &F,
    p: &[f64],
    i: usize,
    j: usize,
) -> Vec<[f64; K]> {
    let c = Jet::<f64, K>::cos_series();
    let s = Jet::<f64, K>::sin_series();
    let mut pt: Vec<Jet<f64, K>> = p.iter().map(|&a| Jet::constant(a)).collect();
    pt[i] = c.scale(p[i]) - s.scale(p[j]);
    pt[j] = c.scale(p[j]) + s.scale(p[i]);
    f.eval(&pt)
        .into_iter()
        .map(|j| std::array::from_fn(|k| j.derivative(k)))
        .collect()
}

/// Basic first-order derivative of a [`DiffOp`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpKind {
    /// `∂_t` along rays: `d/dt f(tu, t)` with `u = x/t` fixed (on the
    /// interval, the ordinary derivative).
    Dt,
    /// `∂/∂t` at fixed `x` (cone only; on the surface it is not defined).
    DtCartesian,
    /// Angular derivative `D_{i,j} = x_i ∂_j − x_j ∂_i` (1-based, `i ≠ j`).
    Dij {
        /// First index.
        i: usize,
        /// Second index.
        j: usize,
    },
    /// Partial derivative `∂_{x_j}` (1-based, cone only).
    Dx {
        /// Coordinate index.
        j: usize,
    },
    /// Triangle derivative `∂₁ = ∂_{y₁}`, `∂₂ = ∂_{y₂}` or `∂₃ = ∂_{y₂} − ∂_{y₁}`.
    Tri {
        /// Which of the three (1, 2 or 3).
        i: usize,
    },
}

/// Multiplier `M` of an operator `M^ℓ · op^ℓ`; the value listed is `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Multiplier {
    /// `1`.
    None,
    /// `φ(t) = √(t(1−t))`.
    Phi,
    /// `Φ(x,t) = √(t² − ‖x‖²)`.
    BigPhi,
    /// `t^{−1/2}`.
    TInvSqrt,
    /// `t^{−1/2} Φ(x,t)`.
    TInvSqrtBigPhi,
    /// `φ₁ = √(y₁(1−y₁−y₂))`.
    Phi1,
    /// `φ₂ = √(y₂(1−y₁−y₂))`.
    Phi2,
    /// `φ₃ = √(y₁y₂)`.
    Phi3,
    /// `φ₁ / √(1−y₂)`.
    Phi1OverSqrt1mY2,
    /// `φ₂ / √(1−y₁)`.
    Phi2OverSqrt1mY1,
    /// `φ₃ / √(y₁+y₂)`.
    Phi3OverSqrtSum,
}

impl Multiplier {
    /// `M(p)`, or `None` where `M` is infinite.
    pub fn base_value(&self, dom: BasisDomain, p: &[f64]) -> Option<f64> {
        let (x, t) = conic_split(dom, p);
        let tri = |k: usize| p.get(k).copied().unwrap_or(0.0);
        let sq = |v: f64| v.max(0.0).sqrt();
        let inv_sqrt = |v: f64| if v > 0.0 { Some(1.0 / v.sqrt()) } else { None };
        match self {
            Multiplier::None => Some(1.0),
            Multiplier::Phi => Some(sq(t * (1.0 - t))),
            Multiplier::BigPhi => Some(sq(t * t - x.iter().map(|v| v * v).sum::<f64>())),
            Multiplier::TInvSqrt => inv_sqrt(t),
            Multiplier::TInvSqrtBigPhi => {
                inv_sqrt(t).map(|s| s * sq(t * t - x.iter().map(|v| v * v).sum::<f64>()))
            }
            Multiplier::Phi1 => Some(sq(tri(0) * (1.0 - tri(0) - tri(1)))),
            Multiplier::Phi2 => Some(sq(tri(1) * (1.0 - tri(0) - tri(1)))),
            Multiplier::Phi3 => Some(sq(tri(0) * tri(1))),
            Multiplier::Phi1OverSqrt1mY2 => {
                inv_sqrt(1.0 - tri(1)).map(|s| s * sq(tri(0) * (1.0 - tri(0) - tri(1))))
            }
            Multiplier::Phi2OverSqrt1mY1 => {
                inv_sqrt(1.0 - tri(0)).map(|s| s * sq(tri(1) * (1.0 - tri(0) - tri(1))))
            }
            Multiplier::Phi3OverSqrtSum => {
                inv_sqrt(tri(0) + tri(1)).map(|s| s * sq(tri(0) * tri(1)))
            }
        }
    }
}

/// The operator `M^ℓ · op^ℓ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffOp {
    /// Basic derivative.
    pub kind: OpKind,
    /// Power `ℓ ≥ 1`.
    pub power: usize,
    /// Multiplier (raised to the same power).
    pub multiplier: Multiplier,
}

/// Largest derivative order supported by pointwise evaluation.
pub const MAX_ORDER: usize = 8;

impl DiffOp {
    /// Convenience constructor.
    pub fn new(kind: OpKind, power: usize, multiplier: Multiplier) -> Self {
        DiffOp {
            kind,
            power,
            multiplier,
        }
    }

    /// Checks that the operator makes sense on a domain whose fiber has `d`
    /// coordinates.
    pub fn validate(&self, dom: BasisDomain, d: usize) -> Result<()> {
        if self.power == 0 || self.power > MAX_ORDER {
            return domain(format!(
                "operator power must be in 1..={MAX_ORDER}, got {}",
                self.power
            ));
        }
        let ok_kind = match self.kind {
            OpKind::Dt => true,
            OpKind::DtCartesian => dom == BasisDomain::Cone,
            OpKind::Dij { i, j } => {
                matches!(dom, BasisDomain::Surface | BasisDomain::Cone)
                    && i != j
                    && (1..=d).contains(&i)
                    && (1..=d).contains(&j)
            }
            OpKind::Dx { j } => dom == BasisDomain::Cone && (1..=d).contains(&j),
            OpKind::Tri { i } => dom == BasisDomain::Triangle && (1..=3).contains(&i),
        };
        if !ok_kind {
            return domain(format!(
                "operator {:?} not defined on {dom:?} with d = {d}",
                self.kind
            ));
        }
        let ok_mult = match self.multiplier {
            Multiplier::None | Multiplier::Phi | Multiplier::TInvSqrt => {
                dom != BasisDomain::Triangle
            }
            Multiplier::BigPhi | Multiplier::TInvSqrtBigPhi => dom == BasisDomain::Cone,
            _ => dom == BasisDomain::Triangle,
        } || self.multiplier == Multiplier::None;
        if !ok_mult {
            return domain(format!(
                "multiplier {:?} not defined on {dom:?}",
                self.multiplier
            ));
        }
        Ok(())
    }

    /// Short identifier used in reports, e.g. `tinvsqrt-dij12^1`.
    pub fn label(&self) -> String {
        let m = match self.multiplier {
            Multiplier::None => "",
            Multiplier::Phi => "phi-",
            Multiplier::BigPhi => "Phi-",
            Multiplier::TInvSqrt => "tinvsqrt-",
            Multiplier::TInvSqrtBigPhi => "tinvsqrt-Phi-",
            Multiplier::Phi1 => "phi1-",
            Multiplier::Phi2 => "phi2-",
            Multiplier::Phi3 => "phi3-",
            Multiplier::Phi1OverSqrt1mY2 => "tri1-",
            Multiplier::Phi2OverSqrt1mY1 => "tri2-",
            Multiplier::Phi3OverSqrtSum => "tri3-",
        };
        let k = match self.kind {
            OpKind::Dt => "dt".to_string(),
            OpKind::DtCartesian => "dt-cartesian".to_string(),
            OpKind::Dij { i, j } => format!("d{i}{j}"),
            OpKind::Dx { j } => format!("dx{j}"),
            OpKind::Tri { i } => format!("partial{i}"),
        };
        format!("{m}{k}^{}", self.power)
    }
}

/// Result of a pointwise evaluation: finite values or the singular flag.
#[derive(Clone, Debug, PartialEq)]
pub enum OpValues {
    /// One value per function of the family.
    Finite(Vec<f64>),
    /// The multiplier (or a `t^{−1}` factor) is infinite at this point.
    Singular,
}

impl OpValues {
    /// The finite values, if any.
    pub fn finite(self) -> Option<Vec<f64>> {
        match self {
            OpValues::Finite(v) => Some(v),
            OpValues::Singular => None,
        }
    }
}

fn conic_split(dom: BasisDomain, p: &[f64]) -> (Vec<f64>, f64) {
    match dom {
        BasisDomain::Interval => (Vec::new(), p[0]),
        BasisDomain::Triangle => (vec![p[0] - p[1]], p[0] + p[1]),
        _ => {
            let d = p.len() - 1;
            (p[..d].to_vec(), p[d])
        }
    }
}

/// Ray direction at `p` in natural coordinates: the velocity of
/// `t ↦ (t u, t)` with `u = x/t` fixed.
fn ray_direction(dom: BasisDomain, p: &[f64]) -> Result<Vec<f64>> {
    match dom {
        BasisDomain::Interval => Ok(vec![1.0]),
        BasisDomain::Triangle => {
            let t = p[0] + p[1];
            if t <= 0.0 {
                return domain("ray derivative undefined at the apex");
            }
            Ok(vec![p[0] / t, p[1] / t])
        }
        _ => {
            let d = p.len() - 1;
            let t = p[d];
            if t <= 0.0 {
                return domain("ray derivative undefined at the apex");
            }
            let mut v: Vec<f64> = p[..d].iter().map(|x| x / t).collect();
            v.push(1.0);
            Ok(v)
        }
    }
}

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

fn check_family<F: PolyFamily>(f: &F, p: &[f64]) -> Result<()> {
    if p.len() != f.coords() {
        return domain(format!(
            "point has {} coordinates, expected {}",
            p.len(),
            f.coords()
        ));
    }
    Ok(())
}

macro_rules! dispatch_order {
    ($order:expr, $func:ident, $f:expr, $p:expr, $($arg:expr),*) => {
        match $order {
            0 => $func::<F, 1>($f, $p, $($arg),*).into_iter().map(|a| a[0]).collect(),
            1 => $func::<F, 2>($f, $p, $($arg),*).into_iter().map(|a| a[1]).collect(),
            2 => $func::<F, 3>($f, $p, $($arg),*).into_iter().map(|a| a[2]).collect(),
            3 => $func::<F, 4>($f, $p, $($arg),*).into_iter().map(|a| a[3]).collect(),
            4 => $func::<F, 5>($f, $p, $($arg),*).into_iter().map(|a| a[4]).collect(),
            5 => $func::<F, 6>($f, $p, $($arg),*).into_iter().map(|a| a[5]).collect(),
            6 => $func::<F, 7>($f, $p, $($arg),*).into_iter().map(|a| a[6]).collect(),
            7 => $func::<F, 8>($f, $p, $($arg),*).into_iter().map(|a| a[7]).collect(),
            8 => $func::<F, 9>($f, $p, $($arg),*).into_iter().map(|a| a[8]).collect(),
            _ => return Err(Error::Unsupported(format!("derivative order {} > {MAX_ORDER}", $order))),
        }
    };
}

/// `order`-th derivative of every function of `f` along `s ↦ p + s v`.
pub fn directional_derivative<F: PolyFamily>(
    f: &F,
    p: &[f64],
    v: &[f64],
    order: usize,
) -> Result<Vec<f64>> {
    Ok(dispatch_order!(order, along, f, p, v))
}

/// `D_{i,j}^order` of every function of `f` at `p` (0-based indices).
pub fn rotational_derivative<F: PolyFamily>(
    f: &F,
    p: &[f64],
    i: usize,
    j: usize,
    order: usize,
) -> Result<Vec<f64>> {
    Ok(dispatch_order!(order, rotation, f, p, i, j))
}

/// `op^ℓ` (without multiplier) of every function of `f` at `p`.
pub fn derivative_values<F: PolyFamily>(
    kind: OpKind,
    order: usize,
    f: &F,
    p: &[f64],
) -> Result<Vec<f64>> {
    check_family(f, p)?;
    let dom = f.domain();
    let n = p.len();
    match kind {
        OpKind::Dt => directional_derivative(f, p, &ray_direction(dom, p)?, order),
        OpKind::DtCartesian => {
            if dom != BasisDomain::Cone {
                return domain("Cartesian ∂_t is only defined on the cone");
            }
            directional_derivative(f, p, &unit(n, n - 1), order)
        }
        OpKind::Dij { i, j } => {
            if !matches!(dom, BasisDomain::Surface | BasisDomain::Cone)
                || i == j
                || i == 0
                || j == 0
                || i.max(j) >= n
            {
                return domain(format!("D_{{{i},{j}}} not defined here"));
            }
            rotational_derivative(f, p, i - 1, j - 1, order)
        }
        OpKind::Dx { j } => {
            if dom != BasisDomain::Cone || j == 0 || j >= n {
                return domain(format!("∂_x{j} not defined here"));
            }
            directional_derivative(f, p, &unit(n, j - 1), order)
        }
        OpKind::Tri { i } => {
            if dom != BasisDomain::Triangle {
                return domain("triangle derivatives need a triangle family");
            }
            let v = match i {
                1 => [1.0, 0.0],
                2 => [0.0, 1.0],
                3 => [-1.0, 1.0],
                _ => return domain(format!("triangle derivative index {i}")),
            };
            directional_derivative(f, p, &v, order)
        }
    }
}

/// `(M^ℓ · op^ℓ) f` at `p` for every function of the family.
pub fn apply_diffop<F: PolyFamily>(op: &DiffOp, f: &F, p: &[f64]) -> Result<OpValues> {
    let dom = f.domain();
    let d = match dom {
        BasisDomain::Interval => 0,
        BasisDomain::Triangle => 1,
        _ => p.len().saturating_sub(1),
    };
    op.validate(dom, d)?;
    let m = match op.multiplier.base_value(dom, p) {
        Some(m) => m.powi(op.power as i32),
        None => return Ok(OpValues::Singular),
    };
    let vals = derivative_values(op.kind, op.power, f, p)?;
    Ok(OpValues::Finite(vals.into_iter().map(|v| m * v).collect()))
}

/// Spectral operators with orthogonal polynomials as eigenfunctions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SpectralOp {
    /// `Δ₀,γ = t(1−t)∂_t² + (d−1−(d+γ)t)∂_t + t^{−1}Δ₀^{(ξ)}` on `V₀^{d+1}`.
    Surface {
        /// Exponent `γ > −1`.
        gamma: f64,
    },
    /// `𝔇μ,γ` on `V^{d+1}`.
    Cone {
        /// Parameter `μ > −1/2`.
        mu: f64,
        /// Exponent `γ > −1`.
        gamma: f64,
    },
}

impl SpectralOp {
    /// Validates the parameter ranges.
    pub fn validate(&self) -> Result<()> {
        match *self {
            SpectralOp::Surface { gamma } if gamma > -1.0 => Ok(()),
            SpectralOp::Cone { mu, gamma } if mu > -0.5 && gamma > -1.0 => Ok(()),
            _ => domain(format!(
                "spectral operator parameters out of range: {self:?}"
            )),
        }
    }

    /// Eigenvalue on polynomials of exact degree `n` in `d` fiber coordinates:
    /// `−n(n+γ+d−1)` on the surface, `−n(n+2μ+γ+d)` on the cone.
    pub fn eigenvalue(&self, d: usize, n: usize) -> f64 {
        let (nf, df) = (n as f64, d as f64);
        match *self {
            SpectralOp::Surface { gamma } => -nf * (nf + gamma + df - 1.0),
            SpectralOp::Cone { mu, gamma } => -nf * (nf + 2.0 * mu + gamma + df),
        }
    }
}

/// `Σ_{i<j} D_{i,j}² f` at `p` (the Laplace–Beltrami operator in `x/t`).
pub fn angular_laplacian<F: PolyFamily>(f: &F, p: &[f64]) -> Result<Vec<f64>> {
    check_family(f, p)?;
    let d = p.len() - 1;
    let mut acc = vec![0.0; f.len()];
    for i in 0..d {
        for j in i + 1..d {
            for (a, r) in acc.iter_mut().zip(rotation::<F, 3>(f, p, i, j)) {
                *a += r[2];
            }
        }
    }
    Ok(acc)
}

/// Applies a spectral operator pointwise, term by term from its defining
/// formula.  `f` must live on the matching domain.
pub fn apply_spectral<F: PolyFamily>(op: &SpectralOp, f: &F, p: &[f64]) -> Result<OpValues> {
    op.validate()?;
    check_family(f, p)?;
    let d = p.len() - 1;
    let t = p[d];
    let df = d as f64;
    match *op {
        SpectralOp::Surface { gamma } => {
            if f.domain() != BasisDomain::Surface {
                return domain("Δ₀,γ acts on conic-surface families");
            }
            if t <= 0.0 {
                return Ok(OpValues::Singular);
            }
            let ray = along::<F, 3>(f, p, &ray_direction(BasisDomain::Surface, p)?);
            let ang = angular_laplacian(f, p)?;
            Ok(OpValues::Finite(
                ray.iter()
                    .zip(ang)
                    .map(|(r, a)| {
                        t * (1.0 - t) * r[2] + (df - 1.0 - (df + gamma) * t) * r[1] + a / t
                    })
                    .collect(),
            ))
        }
        SpectralOp::Cone { mu, gamma } => {
            if f.domain() != BasisDomain::Cone {
                return domain("𝔇μ,γ acts on cone families");
            }
            let n = p.len();
            let e_t = unit(n, d);
            let mut xv = p.to_vec();
            xv[d] = 0.0;
            let mut xt = xv.clone();
            xt[d] = 1.0;
            let jt = along::<F, 3>(f, p, &e_t);
            let jx = along::<F, 3>(f, p, &xv);
            let jxt = along::<F, 3>(f, p, &xt);
            let mut lap = vec![0.0; f.len()];
            for i in 0..d {
                for (a, r) in lap.iter_mut().zip(along::<F, 3>(f, p, &unit(n, i))) {
                    *a += r[2];
                }
            }
            let out = (0..f.len())
                .map(|k| {
                    let dt = jt[k][1];
                    let dtt = jt[k][2];
                    let e = jx[k][1];
                    let xhx = jx[k][2];
                    let e_dt = 0.5 * (jxt[k][2] - xhx - dtt);
                    let e2 = xhx + e;
                    t * (1.0 - t) * dtt + 2.0 * (1.0 - t) * e_dt + t * lap[k] - e2
                        + (2.0 * mu + df) * dt
                        - (2.0 * mu + gamma + df + 1.0) * (e + t * dt)
                        + e
                })
                .collect();
            Ok(OpValues::Finite(out))
        }
    }
}

/// `𝔇μ,γ f` evaluated from its divergence-form decomposition
///
/// ```text
/// t(1−t)[((d+2μ)/t − (γ+1)/(1−t)) ∂̃f + ∂̃²f]
///     + t^{−1}[(t²−‖x‖²)Δ_x f − (2μ+1)⟨x,∇_x⟩f + Σ_{i<j} D_{i,j}² f],
/// ```
///
/// where `∂̃ = ∂_t + t^{−1}⟨x,∇_x⟩` is the derivative along rays.  This is an
/// independent route to the same operator; agreement with
/// [`apply_spectral`] checks both.
pub fn cone_operator_decomposed<F: PolyFamily>(
    mu: f64,
    gamma: f64,
    f: &F,
    p: &[f64],
) -> Result<OpValues> {
    check_family(f, p)?;
    if f.domain() != BasisDomain::Cone {
        return domain("the cone decomposition acts on cone families");
    }
    let d = p.len() - 1;
    let t = p[d];
    if t <= 0.0 || t >= 1.0 {
        return Ok(OpValues::Singular);
    }
    let df = d as f64;
    let n = p.len();
    let ray = along::<F, 3>(f, p, &ray_direction(BasisDomain::Cone, p)?);
    let mut xv = p.to_vec();
    xv[d] = 0.0;
    let euler = along::<F, 2>(f, p, &xv);
    let mut lap = vec![0.0; f.len()];
    for i in 0..d {
        for (a, r) in lap.iter_mut().zip(along::<F, 3>(f, p, &unit(n, i))) {
            *a += r[2];
        }
    }
    let ang = angular_laplacian(f, p)?;
    let phi2 = t * t - p[..d].iter().map(|v| v * v).sum::<f64>();
    let out = (0..f.len())
        .map(|k| {
            let radial = t
                * (1.0 - t)
                * (((df + 2.0 * mu) / t - (gamma + 1.0) / (1.0 - t)) * ray[k][1] + ray[k][2]);
            let lateral = (phi2 * lap[k] - (2.0 * mu + 1.0) * euler[k][1] + ang[k]) / t;
            radial + lateral
        })
        .collect();
    Ok(OpValues::Finite(out))
}

/// Two sides of a quadrature identity and their difference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    /// Left-hand side.
    pub lhs: f64,
    /// Right-hand side.
    pub rhs: f64,
    /// `|lhs − rhs|`.
    pub residual: f64,
    /// `‖f‖·‖g‖`, the natural scale of both sides.
    pub scale: f64,
}

fn finite(v: OpValues, what: &str) -> Result<Vec<f64>> {
    v.finite()
        .ok_or_else(|| Error::Numeric(format!("{what} is singular at a quadrature node")))
}

/// Quadrature check of the self-adjointness identity on the conic surface
/// for `w_{−1,γ}`:
///
/// ```text
/// −∫ Δ₀,γ f · g w dm = ∫ t(1−t) f′ g′ w dm + Σ_{i<j} ∫ t^{−1} D_{i,j}f D_{i,j}g w dm,
/// ```
///
/// with `f′ = d/dt f(tξ, t)`.  `f` and `g` are coefficient vectors in
/// `basis`, which must be a surface basis with `β = −1`; `rule` must be a
/// surface rule for the same weight, exact for the integrands.
pub fn check_selfadjoint_surface(
    basis: &BasisHandle,
    gamma: f64,
    f: &[f64],
    g: &[f64],
    rule: &QuadratureRule,
) -> Result<IdentityResidual> {
    if basis.domain() != BasisDomain::Surface {
        return domain("surface self-adjointness needs a surface basis");
    }
    let op = SpectralOp::Surface { gamma };
    let (fc, gc) = (
        Combination { basis, coeffs: f },
        Combination { basis, coeffs: g },
    );
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let (mut nf, mut ng) = (0.0, 0.0);
    for (p, w) in rule.iter() {
        let d = p.len() - 1;
        let t = p[d];
        let lf = finite(apply_spectral(&op, &fc, p)?, "Δ₀,γ f")?[0];
        let fv = fc.eval(p)[0];
        let gv = gc.eval(p)[0];
        lhs -= w * lf * gv;
        nf += w * fv * fv;
        ng += w * gv * gv;
        let dir = ray_direction(BasisDomain::Surface, p)?;
        let df = along::<_, 2>(&fc, p, &dir)[0][1];
        let dg = along::<_, 2>(&gc, p, &dir)[0][1];
        rhs += w * t * (1.0 - t) * df * dg;
        for i in 0..d {
            for j in i + 1..d {
                let a = rotation::<_, 2>(&fc, p, i, j)[0][1];
                let b = rotation::<_, 2>(&gc, p, i, j)[0][1];
                rhs += w * a * b / t;
            }
        }
    }
    Ok(IdentityResidual {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        scale: (nf * ng).sqrt(),
    })
}

/// Quadrature check of the self-adjointness identity on the cone for
/// `W_{μ,γ}`:
///
/// ```text
/// −∫ 𝔇μ,γ f · g W = ∫ t(1−t) f̃′ g̃′ W + Σ_i ∫ t^{−1} D_{x_i}f D_{x_i}g W
///                 + Σ_{i<j} ∫ t^{−1} D_{i,j}f D_{i,j}g W,
/// ```
///
/// with `f̃′ = d/dt f(ty, t)` and `D_{x_i} = Φ ∂_{x_i}`.
pub fn check_selfadjoint_cone(
    basis: &BasisHandle,
    mu: f64,
    gamma: f64,
    f: &[f64],
    g: &[f64],
    rule: &QuadratureRule,
) -> Result<IdentityResidual> {
    if basis.domain() != BasisDomain::Cone {
        return domain("cone self-adjointness needs a cone basis");
    }
    let op = SpectralOp::Cone { mu, gamma };
    let (fc, gc) = (
        Combination { basis, coeffs: f },
        Combination { basis, coeffs: g },
    );
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let (mut nf, mut ng) = (0.0, 0.0);
    for (p, w) in rule.iter() {
        let d = p.len() - 1;
        let t = p[d];
        let lf = finite(apply_spectral(&op, &fc, p)?, "𝔇μ,γ f")?[0];
        let fv = fc.eval(p)[0];
        let gv = gc.eval(p)[0];
        lhs -= w * lf * gv;
        nf += w * fv * fv;
        ng += w * gv * gv;
        let dir = ray_direction(BasisDomain::Cone, p)?;
        let df = along::<_, 2>(&fc, p, &dir)[0][1];
        let dg = along::<_, 2>(&gc, p, &dir)[0][1];
        rhs += w * t * (1.0 - t) * df * dg;
        let phi2 = t * t - p[..d].iter().map(|v| v * v).sum::<f64>();
        for i in 0..d {
            let e = unit(p.len(), i);
            let a = along::<_, 2>(&fc, p, &e)[0][1];
            let b = along::<_, 2>(&gc, p, &e)[0][1];
            rhs += w * phi2 * a * b / t;
            for j in i + 1..d {
                let a = rotation::<_, 2>(&fc, p, i, j)[0][1];
                let b = rotation::<_, 2>(&gc, p, i, j)[0][1];
                rhs += w * a * b / t;
            }
        }
    }
    Ok(IdentityResidual {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        scale: (nf * ng).sqrt(),
    })
}

/// Both sides of the Cauchy–Schwarz consequence of the surface identity,
///
/// ```text
/// ‖φ ∂_t f‖² + Σ_{i<j} ‖t^{−1/2} D_{i,j} f‖²  ≤  ‖f‖ · ‖Δ₀,γ f‖,
/// ```
///
/// all norms in `L²(w_{−1,γ})`, computed with `rule`.  Returns `(lhs, rhs)`.
pub fn cauchy_bound_check(
    basis: &BasisHandle,
    gamma: f64,
    f: &[f64],
    rule: &QuadratureRule,
) -> Result<(f64, f64)> {
    if basis.domain() != BasisDomain::Surface {
        return domain("the Cauchy bound is stated on the conic surface");
    }
    let op = SpectralOp::Surface { gamma };
    let fc = Combination { basis, coeffs: f };
    let (mut lhs, mut nf, mut nl) = (0.0, 0.0, 0.0);
    for (p, w) in rule.iter() {
        let d = p.len() - 1;
        let t = p[d];
        let fv = fc.eval(p)[0];
        let lf = finite(apply_spectral(&op, &fc, p)?, "Δ₀,γ f")?[0];
        nf += w * fv * fv;
        nl += w * lf * lf;
        let dir = ray_direction(BasisDomain::Surface, p)?;
        let df = along::<_, 2>(&fc, p, &dir)[0][1];
        lhs += w * t * (1.0 - t) * df * df;
        for i in 0..d {
            for j in i + 1..d {
                let a = rotation::<_, 2>(&fc, p, i, j)[0][1];
                lhs += w * a * a / t;
            }
        }
    }
    Ok((lhs, (nf * nl).sqrt()))
}

/// `(φ∂_t)² f` computed by composing the first-order operator twice on a
/// jet (no product rule applied by hand), for comparison with
/// `½(1−2t)∂_t f + φ²∂_t² f` (`φφ′ = ½(1−2t)`).  Returns
/// `(composed, expanded)`.
pub fn phi_dt_squared<F: PolyFamily>(f: &F, p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_family(f, p)?;
    let dom = f.domain();
    let dir = ray_direction(dom, p)?;
    let (_, t) = conic_split(dom, p);
    let pt: Vec<Jet<f64, 3>> = p
        .iter()
        .zip(&dir)
        .map(|(&a, &b)| Jet::linear(a, b))
        .collect();
    let tj = Jet::<f64, 3>::variable(t);
    let phi = (tj * (Jet::constant(1.0) - tj)).sqrt();
    let composed = f
        .eval(&pt)
        .into_iter()
        .map(|g| (phi * (phi * g.differentiate()).differentiate()).c[0])
        .collect();
    let expanded = along::<F, 3>(f, p, &dir)
        .into_iter()
        .map(|r| 0.5 * (1.0 - 2.0 * t) * r[1] + t * (1.0 - t) * r[2])
        .collect();
    Ok((composed, expanded))
}

/// `(Φ∂_{x_j})² f` composed on a jet, and `Φ²∂_{x_j}² f − x_j ∂_{x_j} f`.
/// `j` is 1-based.  Returns `(composed, expanded)`.
pub fn bigphi_dx_squared<F: PolyFamily>(
    f: &F,
    p: &[f64],
    j: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_family(f, p)?;
    if f.domain() != BasisDomain::Cone || j == 0 || j >= p.len() {
        return domain("(Φ∂_x)² needs a cone family and a valid coordinate");
    }
    let d = p.len() - 1;
    let e = unit(p.len(), j - 1);
    let pt: Vec<Jet<f64, 3>> = p.iter().zip(&e).map(|(&a, &b)| Jet::linear(a, b)).collect();
    let mut phi2 = Jet::<f64, 3>::constant(p[d] * p[d]);
    for c in pt.iter().take(d) {
        phi2 -= *c * *c;
    }
    let phi = phi2.sqrt();
    let composed = f
        .eval(&pt)
        .into_iter()
        .map(|g| (phi * (phi * g.differentiate()).differentiate()).c[0])
        .collect();
    let phi2v = phi2.c[0];
    let expanded = along::<F, 3>(f, p, &e)
        .into_iter()
        .map(|r| phi2v * r[2] - p[j - 1] * r[1])
        .collect();
    Ok((composed, expanded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WeightSpec;

    struct X1;
    impl PolyFamily for X1 {
        fn len(&self) -> usize {
            1
        }
        fn domain(&self) -> BasisDomain {
            BasisDomain::Surface
        }
        fn coords(&self) -> usize {
            3
        }
        fn eval<S: Scalar>(&self, p: &[S]) -> Vec<S> {
            vec![p[0]]
        }
    }

    #[test]
    fn angular_derivative_signs() {
        let p = [0.3, 0.4, 0.5];
        let one = derivative_values(OpKind::Dij { i: 1, j: 2 }, 1, &X1, &p).unwrap()[0];
        assert!((one + 0.4).abs() < 1e-15);
        for l in 1..=2 {
            let v = derivative_values(OpKind::Dij { i: 1, j: 2 }, 2 * l, &X1, &p).unwrap()[0];
            let want = if l % 2 == 0 { 0.3 } else { -0.3 };
            assert!((v - want).abs() < 1e-13, "l={l}: {v}");
        }
    }

    #[test]
    fn surface_eigen_identity_small() {
        let h = BasisHandle::new(
            WeightSpec::Surface {
                d: 2,
                beta: -1.0,
                gamma: 0.5,
            },
            4,
        )
        .unwrap();
        let th: f64 = 0.7;
        let p = [0.37 * th.cos(), 0.37 * th.sin(), 0.37];
        let op = SpectralOp::Surface { gamma: 0.5 };
        let lv = apply_spectral(&op, &h, &p).unwrap().finite().unwrap();
        let v = h.eval_natural(&p);
        for (k, idx) in h.indices().iter().enumerate() {
            let lam = op.eigenvalue(2, idx.n);
            assert!(
                (lv[k] - lam * v[k]).abs() < 1e-10 * (1.0 + lam.abs() * v[k].abs()),
                "{idx:?}"
            );
        }
        assert_eq!(op.eigenvalue(2, 4), -22.0);
    }

    #[test]
    fn cone_eigen_identity_small() {
        let h = BasisHandle::new(
            WeightSpec::Cone {
                d: 2,
                mu: 0.0,
                gamma: 0.0,
            },
            3,
        )
        .unwrap();
        let p = [0.1, -0.2, 0.45];
        let op = SpectralOp::Cone {
            mu: 0.0,
            gamma: 0.0,
        };
        let lv = apply_spectral(&op, &h, &p).unwrap().finite().unwrap();
        let dv = cone_operator_decomposed(0.0, 0.0, &h, &p)
            .unwrap()
            .finite()
            .unwrap();
        let v = h.eval_natural(&p);
        for (k, idx) in h.indices().iter().enumerate() {
            let lam = op.eigenvalue(2, idx.n);
            assert!(
                (lv[k] - lam * v[k]).abs() < 1e-10 * (1.0 + lam.abs() * v[k].abs()),
                "{idx:?}"
            );
            assert!(
                (dv[k] - lv[k]).abs() < 1e-10 * (1.0 + lv[k].abs()),
                "{idx:?}"
            );
        }
        assert_eq!(op.eigenvalue(2, 3), -15.0);
    }
}

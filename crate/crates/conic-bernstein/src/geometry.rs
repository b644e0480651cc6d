//! Points, intrinsic distances and weight families on the conic surface
//! `V₀^{d+1} = {(x,t): ‖x‖ = t ≤ 1}`, the solid cone `V^{d+1} = {‖x‖ ≤ t ≤ 1}`,
//! the ball, the sphere and the triangle.
//!
//! Distances are generic over `num_traits::Float`; arccos arguments that
//! overshoot `[−1, 1]` by at most `1e−12` (roundoff at coincident points) are
//! clamped, larger violations are reported as numeric errors.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const CLAMP_SLACK: f64 = 1e-12;
const MEMBERSHIP_TOL: f64 = 1e-12;

fn cst<F: Float>(v: f64) -> F {
    F::from(v).expect("constant representable in the scalar type")
}

fn safe_acos<F: Float>(c: F) -> Result<F> {
    let one = F::one();
    if c.is_nan() || c > one + cst(CLAMP_SLACK) || c < -one - cst(CLAMP_SLACK) {
        return Err(Error::Numeric(format!(
            "arccos argument {:?} outside [-1,1]",
            c.to_f64()
        )));
    }
    Ok(c.max(-one).min(one).acos())
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (x, y)| acc + *x * *y)
}

fn norm2<F: Float>(a: &[F]) -> F {
    dot(a, a)
}

/// Whether a point lies on the surface or in the solid cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointKind {
    /// `‖x‖ = t`.
    Surface,
    /// `‖x‖ ≤ t`.
    Solid,
}

/// A point `(x, t)` of `V₀^{d+1}` or `V^{d+1}`, validated on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicPoint<F = f64> {
    x: Vec<F>,
    t: F,
    kind: PointKind,
}

impl<F: Float> ConicPoint<F> {
    /// A point of the conic surface; requires `‖x‖ = t` to `1e−12`.
    pub fn surface(x: Vec<F>, t: F) -> Result<Self> {
        Self::check_t(t)?;
        let r = norm2(&x).sqrt();
        if (r - t).abs() > cst(MEMBERSHIP_TOL) || x.is_empty() {
            return domain(format!(
                "surface point needs ‖x‖ = t, got ‖x‖ = {:?}, t = {:?}",
                r.to_f64(),
                t.to_f64()
            ));
        }
        Ok(ConicPoint {
            x,
            t,
            kind: PointKind::Surface,
        })
    }

    /// A point of the solid cone; requires `‖x‖ ≤ t + 1e−12`.
    pub fn solid(x: Vec<F>, t: F) -> Result<Self> {
        Self::check_t(t)?;
        let r = norm2(&x).sqrt();
        if r > t + cst(MEMBERSHIP_TOL) || x.is_empty() {
            return domain(format!(
                "solid point needs ‖x‖ ≤ t, got ‖x‖ = {:?}, t = {:?}",
                r.to_f64(),
                t.to_f64()
            ));
        }
        Ok(ConicPoint {
            x,
            t,
            kind: PointKind::Solid,
        })
    }

    /// The surface point `(t ξ, t)` for a unit vector `ξ`.
    pub fn from_direction(xi: &[F], t: F) -> Result<Self> {
        check_unit(xi)?;
        Self::check_t(t)?;
        Ok(ConicPoint {
            x: xi.iter().map(|v| *v * t).collect(),
            t,
            kind: PointKind::Surface,
        })
    }

    fn check_t(t: F) -> Result<()> {
        if !(t >= -cst::<F>(MEMBERSHIP_TOL) && t <= F::one() + cst(MEMBERSHIP_TOL)) {
            return domain(format!("t = {:?} outside [0,1]", t.to_f64()));
        }
        Ok(())
    }

    /// Spatial coordinates `x`.
    pub fn x(&self) -> &[F] {
        &self.x
    }

    /// Height `t`.
    pub fn t(&self) -> F {
        self.t
    }

    /// Spatial dimension `d`.
    pub fn d(&self) -> usize {
        self.x.len()
    }

    /// Surface or solid.
    pub fn kind(&self) -> PointKind {
        self.kind
    }

    /// Coordinates `(x, t)` as one vector.
    pub fn coords(&self) -> Vec<F> {
        let mut v = self.x.clone();
        v.push(self.t);
        v
    }
}

fn check_unit<F: Float>(xi: &[F]) -> Result<()> {
    let r = norm2(xi).sqrt();
    if (r - F::one()).abs() > cst(1e-10) {
        return domain(format!("expected a unit vector, got norm {:?}", r.to_f64()));
    }
    Ok(())
}

fn check_same_dim<F: Float>(p: &ConicPoint<F>, q: &ConicPoint<F>) -> Result<()> {
    if p.d() != q.d() {
        return domain(format!("dimension mismatch: {} vs {}", p.d(), q.d()));
    }
    Ok(())
}

/// `d_{[0,1]}(t,s) = arccos(√t√s + √(1−t)√(1−s))`.
pub fn dist_interval<F: Float>(t: F, s: F) -> Result<F> {
    let (zero, one) = (F::zero(), F::one());
    let slack = cst::<F>(MEMBERSHIP_TOL);
    if t < zero - slack || t > one + slack || s < zero - slack || s > one + slack {
        return domain(format!(
            "interval distance needs t, s ∈ [0,1], got {:?}, {:?}",
            t.to_f64(),
            s.to_f64()
        ));
    }
    let (t, s) = (t.max(zero).min(one), s.max(zero).min(one));
    safe_acos((t * s).sqrt() + ((one - t) * (one - s)).sqrt())
}

/// Geodesic distance `arccos⟨ξ,η⟩` on the unit sphere.
pub fn dist_sphere<F: Float>(xi: &[F], eta: &[F]) -> Result<F> {
    check_unit(xi)?;
    check_unit(eta)?;
    if xi.len() != eta.len() {
        return domain("dimension mismatch in sphere distance");
    }
    safe_acos(dot(xi, eta))
}

/// Intrinsic distance on `V₀^{d+1}`:
/// `arccos(√((⟨x,y⟩ + ts)/2) + √(1−t)√(1−s))`.
pub fn dist_surface<F: Float>(p: &ConicPoint<F>, q: &ConicPoint<F>) -> Result<F> {
    check_same_dim(p, q)?;
    if p.kind != PointKind::Surface || q.kind != PointKind::Surface {
        return domain("dist_surface needs surface points");
    }
    Ok(surface_distance_raw(p.x(), p.t(), q.x(), q.t()))
}

/// Surface distance formula without validation (used by hot loops on
/// already-validated coordinates).
pub fn surface_distance_raw<F: Float>(x: &[F], t: F, y: &[F], s: F) -> F {
    let one = F::one();
    let two = cst::<F>(2.0);
    let a = ((dot(x, y) + t * s) / two).max(F::zero()).sqrt();
    let b = ((one - t).max(F::zero()) * (one - s).max(F::zero())).sqrt();
    (a + b).max(-one).min(one).acos()
}

/// Distance on the ball `B^d`:
/// `arccos(⟨u,v⟩ + √(1−‖u‖²)√(1−‖v‖²))`.
pub fn dist_ball<F: Float>(u: &[F], v: &[F]) -> Result<F> {
    let one = F::one();
    let (nu, nv) = (norm2(u), norm2(v));
    let slack = cst::<F>(MEMBERSHIP_TOL);
    if nu > one + slack || nv > one + slack {
        return domain("dist_ball needs points in the closed unit ball");
    }
    if u.len() != v.len() {
        return domain("dimension mismatch in ball distance");
    }
    safe_acos(dot(u, v) + ((one - nu).max(F::zero()) * (one - nv).max(F::zero())).sqrt())
}

/// A cone point lifted to the conic surface `V₀^{d+2}`:
/// `X = (x, ±√(t²−‖x‖²))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint<F = f64> {
    /// Lifted spatial coordinates (length `d+1`), `‖X‖ = t`.
    pub big_x: Vec<F>,
    /// Height.
    pub t: F,
    /// `true` for the mirrored variant `Y_*` with a negative last coordinate.
    pub mirrored: bool,
}

impl<F: Float> LiftedPoint<F> {
    /// The lifted point as a surface point of `V₀^{d+2}`.
    pub fn to_surface(&self) -> Result<ConicPoint<F>> {
        ConicPoint::surface(self.big_x.clone(), self.t)
    }
}

fn lift_impl<F: Float>(p: &ConicPoint<F>, mirrored: bool) -> LiftedPoint<F> {
    let gap = (p.t * p.t - norm2(p.x())).max(F::zero()).sqrt();
    let mut big_x = p.x().to_vec();
    big_x.push(if mirrored { -gap } else { gap });
    LiftedPoint {
        big_x,
        t: p.t,
        mirrored,
    }
}

/// `X = (x, √(t²−‖x‖²))`.
pub fn lift<F: Float>(p: &ConicPoint<F>) -> LiftedPoint<F> {
    lift_impl(p, false)
}

/// `X_* = (x, −√(t²−‖x‖²))`.
pub fn lift_mirrored<F: Float>(p: &ConicPoint<F>) -> LiftedPoint<F> {
    lift_impl(p, true)
}

/// Intrinsic distance on `V^{d+1}`: the surface distance of the lifted points.
pub fn dist_cone<F: Float>(p: &ConicPoint<F>, q: &ConicPoint<F>) -> Result<F> {
    check_same_dim(p, q)?;
    if p.kind != PointKind::Solid || q.kind != PointKind::Solid {
        return domain("dist_cone needs solid points");
    }
    let (a, b) = (lift(p), lift(q));
    Ok(surface_distance_raw(&a.big_x, a.t, &b.big_x, b.t))
}

/// Affine map `T² → V²`, `(y₁, y₂) ↦ (x, t) = (y₁ − y₂, y₁ + y₂)`.
pub fn triangle_map<F: Float>(y: [F; 2]) -> Result<ConicPoint<F>> {
    let slack = cst::<F>(MEMBERSHIP_TOL);
    if y[0] < -slack || y[1] < -slack || y[0] + y[1] > F::one() + slack {
        return domain(format!(
            "point ({:?}, {:?}) outside the triangle",
            y[0].to_f64(),
            y[1].to_f64()
        ));
    }
    ConicPoint::solid(vec![y[0] - y[1]], y[0] + y[1])
}

/// Inverse of [`triangle_map`].
pub fn triangle_unmap<F: Float>(p: &ConicPoint<F>) -> Result<[F; 2]> {
    if p.d() != 1 || p.kind != PointKind::Solid {
        return domain("triangle_unmap needs a solid point with d = 1");
    }
    let two = cst::<F>(2.0);
    Ok([(p.t + p.x[0]) / two, (p.t - p.x[0]) / two])
}

/// Explicit weight families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum WeightSpec {
    /// `t^α (1−t)^β` on `[0,1]`.
    IntervalJacobi {
        /// Exponent at `t = 0`.
        alpha: f64,
        /// Exponent at `t = 1`.
        beta: f64,
    },
    /// `w_{β,γ}(t) = t^β (1−t)^γ` on `V₀^{d+1}` (with surface measure).
    Surface {
        /// Spatial dimension.
        d: usize,
        /// Exponent of `t`.
        beta: f64,
        /// Exponent of `1 − t`.
        gamma: f64,
    },
    /// `W_{μ,γ}(x,t) = (t²−‖x‖²)^{μ−1/2} (1−t)^γ` on `V^{d+1}`.
    Cone {
        /// Spatial dimension.
        d: usize,
        /// Lateral exponent parameter.
        mu: f64,
        /// Exponent of `1 − t`.
        gamma: f64,
    },
    /// `y₁^a y₂^b (1−y₁−y₂)^c` on `T²`.
    Triangle {
        /// Exponent of `y₁`.
        a: f64,
        /// Exponent of `y₂`.
        b: f64,
        /// Exponent of `1 − y₁ − y₂`.
        c: f64,
    },
}

impl WeightSpec {
    /// Checks the family-specific parameter ranges.
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightSpec::IntervalJacobi { alpha, beta } => {
                if !(alpha > -1.0 && beta > -1.0) {
                    return domain("interval weight needs α, β > −1");
                }
            }
            WeightSpec::Surface { d, beta, gamma } => {
                if !(2..=3).contains(&d) {
                    return domain(format!("surface supported for d = 2, 3, got {d}"));
                }
                if !(beta > -(d as f64) && gamma > -1.0) {
                    return domain("surface weight needs β > −d and γ > −1");
                }
            }
            WeightSpec::Cone { d, mu, gamma } => {
                if !(1..=2).contains(&d) {
                    return domain(format!("cone supported for d = 1, 2, got {d}"));
                }
                if !(mu > -0.5 && gamma > -1.0) {
                    return domain("cone weight needs μ > −1/2 and γ > −1");
                }
            }
            WeightSpec::Triangle { a, b, c } => {
                if !(a > -1.0 && b > -1.0 && c > -1.0) {
                    return domain("triangle weight needs a, b, c > −1");
                }
            }
        }
        Ok(())
    }

    /// Short human-readable parameter string (used in reports).
    pub fn label(&self) -> String {
        match *self {
            WeightSpec::IntervalJacobi { alpha, beta } => {
                format!("interval(alpha={alpha},beta={beta})")
            }
            WeightSpec::Surface { d, beta, gamma } => {
                format!("surface(d={d},beta={beta},gamma={gamma})")
            }
            WeightSpec::Cone { d, mu, gamma } => format!("cone(d={d},mu={mu},gamma={gamma})"),
            WeightSpec::Triangle { a, b, c } => format!("triangle(a={a},b={b},c={c})"),
        }
    }
}

/// Result of evaluating a weight: finite, or the explicit marker for a zero
/// of a factor raised to a negative power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightValue {
    /// A finite positive (or zero) value.
    Finite(f64),
    /// The weight is infinite at this point.
    Infinite,
}

impl WeightValue {
    /// The finite value, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            WeightValue::Finite(v) => Some(v),
            WeightValue::Infinite => None,
        }
    }
}

fn power(base: f64, e: f64) -> WeightValue {
    let base = base.max(0.0);
    if base == 0.0 {
        if e < 0.0 {
            WeightValue::Infinite
        } else if e == 0.0 {
            WeightValue::Finite(1.0)
        } else {
            WeightValue::Finite(0.0)
        }
    } else {
        WeightValue::Finite(base.powf(e))
    }
}

fn product(vals: &[WeightValue]) -> WeightValue {
    let mut acc = 1.0;
    for v in vals {
        match v {
            WeightValue::Infinite => return WeightValue::Infinite,
            WeightValue::Finite(x) => acc *= x,
        }
    }
    WeightValue::Finite(acc)
}

/// Evaluates the weight at a point given by its coordinates: `[t]` for the
/// interval, `(x, t)` for surface and cone, `(y₁, y₂)` for the triangle.
pub fn weight_eval(w: &WeightSpec, p: &[f64]) -> Result<WeightValue> {
    w.validate()?;
    let expect = match *w {
        WeightSpec::IntervalJacobi { .. } => 1,
        WeightSpec::Surface { d, .. } | WeightSpec::Cone { d, .. } => d + 1,
        WeightSpec::Triangle { .. } => 2,
    };
    if p.len() != expect {
        return domain(format!(
            "weight expects {expect} coordinates, got {}",
            p.len()
        ));
    }
    Ok(match *w {
        WeightSpec::IntervalJacobi { alpha, beta } => {
            product(&[power(p[0], alpha), power(1.0 - p[0], beta)])
        }
        WeightSpec::Surface { d, beta, gamma } => {
            product(&[power(p[d], beta), power(1.0 - p[d], gamma)])
        }
        WeightSpec::Cone { d, mu, gamma } => {
            let t = p[d];
            let gap = t * t - norm2(&p[..d]);
            product(&[power(gap, mu - 0.5), power(1.0 - t, gamma)])
        }
        WeightSpec::Triangle { a, b, c } => {
            product(&[power(p[0], a), power(p[1], b), power(1.0 - p[0] - p[1], c)])
        }
    })
}

/// The ball-measure proxy `w_{γ,d}(n;t) = (1−t+n^{−2})^{γ+1/2} (t+n^{−2})^{(d−2)/2}`.
pub fn ball_measure_proxy(n: usize, t: f64, gamma: f64, d: usize) -> Result<f64> {
    if n == 0 {
        return domain("ball_measure_proxy needs n ≥ 1");
    }
    let e = 1.0 / (n as f64 * n as f64);
    Ok((1.0 - t + e).powf(gamma + 0.5) * (t + e).powf((d as f64 - 2.0) / 2.0))
}

/// Measure of the spherical cap `{η : d(ξ,η) ≤ a}` on `S^{d−1}`, `d = 2, 3`.
pub fn sphere_cap_measure(d: usize, a: f64) -> f64 {
    let a = a.clamp(0.0, std::f64::consts::PI);
    match d {
        2 => 2.0 * a,
        _ => 2.0 * std::f64::consts::PI * (1.0 - a.cos()),
    }
}

/// Measure of the surface ball `c((tξ,t), r)` for `t^β (1−t)^γ dm`,
/// computed by integrating exact cap measures over the height `s`.
///
/// For fixed `s`, `d((tξ,t),(sη,s)) ≤ r` is a cap condition
/// `d_S(ξ,η) ≤ 2 arccos(R/√(ts))` with `R = cos r − √(1−t)√(1−s)`, so only a
/// one-dimensional integral remains (composite Gauss–Legendre in `s`).
pub fn surface_ball_measure(d: usize, beta: f64, gamma: f64, t: f64, r: f64) -> Result<f64> {
    if !(2..=3).contains(&d) {
        return domain("surface_ball_measure supports d = 2, 3");
    }
    let sq_t = t.sqrt();
    let sq_1t = (1.0 - t).sqrt();
    let lo1 = (sq_t - r).max(0.0).powi(2);
    let hi1 = (sq_t + r).min(1.0).powi(2);
    let lo2 = 1.0 - (sq_1t + r).min(1.0).powi(2);
    let hi2 = 1.0 - (sq_1t - r).max(0.0).powi(2);
    let (lo, hi) = (lo1.max(lo2).max(0.0), hi1.min(hi2).min(1.0));
    if hi <= lo {
        return Ok(0.0);
    }
    let full = sphere_cap_measure(d, std::f64::consts::PI);
    let cap_at = |s: f64| -> f64 {
        let big_r = r.cos() - ((1.0 - t) * (1.0 - s)).max(0.0).sqrt();
        if big_r <= 0.0 {
            return full;
        }
        let ts = (t * s).sqrt();
        if ts <= 0.0 || big_r > ts {
            return 0.0;
        }
        sphere_cap_measure(d, 2.0 * (big_r / ts).min(1.0).acos())
    };
    let g = crate::specfun::gauss_legendre(12)?;
    let panels = 96;
    let h = (hi - lo) / panels as f64;
    let mut acc = 0.0;
    for k in 0..panels {
        let a = lo + k as f64 * h;
        for (&u, &w) in g.nodes.iter().zip(&g.weights) {
            let s = a + (u + 1.0) * h / 2.0;
            let dens = s.powf(d as f64 - 1.0 + beta) * (1.0 - s).powf(gamma);
            acc += w * h / 2.0 * dens * cap_at(s);
        }
    }
    Ok(acc)
}

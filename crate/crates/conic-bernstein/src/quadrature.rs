//! Product quadrature rules on the domains used by the crate.
//!
//! A [`QuadratureRule`] integrates `f · w` for the weight it was built for:
//! the weight and every Jacobian are folded into the rule's weights, so
//! `Σ w_i f(p_i)` approximates `∫ f(p) w(p) dp` directly.  All rules are
//! tensor products of Gauss–Jacobi rules and trapezoid rules on circles, so
//! the exactness degree is known in closed form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::specfun::{gauss_jacobi, gauss_legendre, JacobiParams};

/// Domain tag of a quadrature rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadDomain {
    /// `[−1, 1]` with a Jacobi weight.
    Interval,
    /// `[0, 1]` with `t^δ (1−t)^γ`.
    UnitInterval,
    /// Unit circle `S¹` with arc length.
    Circle,
    /// Unit sphere `S²` with surface area.
    Sphere2,
    /// Ball `B^d` (`d = 1, 2`) with `(1−‖u‖²)^{μ−1/2}`.
    Ball,
    /// Conic surface `V₀^{d+1}` with `t^β (1−t)^γ dm`.
    ConicSurface,
    /// Solid cone `V^{d+1}` with `W_{μ,γ} dx dt`.
    Cone,
    /// Triangle `T²` with `y₁^a y₂^b (1−y₁−y₂)^c`.
    Triangle,
}

/// Nodes and positive weights on a domain; see the module docs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    /// Domain tag.
    pub domain: QuadDomain,
    /// Number of coordinates per node.
    pub dim: usize,
    /// Flattened node coordinates (`dim` per node).
    pub nodes: Vec<f64>,
    /// Weights (weight function and Jacobians included).
    pub weights: Vec<f64>,
    /// Polynomials of total degree `≤ exact_degree` are integrated exactly.
    pub exact_degree: usize,
}

impl QuadratureRule {
    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// Whether the rule is empty.
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Coordinates of node `i`.
    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    /// Iterator over `(node, weight)`.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes
            .chunks(self.dim)
            .zip(self.weights.iter().copied())
    }

    /// `Σ w_i f(p_i)`.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(|(p, w)| w * f(p)).sum()
    }

    /// Sum of the weights (total weighted measure).
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn nodes_for_degree(deg: usize) -> usize {
    deg / 2 + 1
}

/// `k`-point rule on `[−1,1]` for `(1−u)^α (1+u)^β`.
pub fn interval(alpha: f64, beta: f64, k: usize) -> Result<QuadratureRule> {
    let g = gauss_jacobi(&JacobiParams::new(alpha, beta)?, k)?;
    Ok(QuadratureRule {
        domain: QuadDomain::Interval,
        dim: 1,
        exact_degree: g.exact_degree,
        nodes: g.nodes,
        weights: g.weights,
    })
}

/// `k`-point rule on `[0,1]` for `t^δ (1−t)^γ`, built from Gauss–Jacobi in
/// `u = 1 − 2t`.
pub fn unit_interval(delta: f64, gamma: f64, k: usize) -> Result<QuadratureRule> {
    let g = gauss_jacobi(&JacobiParams::new(delta, gamma)?, k)?;
    let scale = 2f64.powf(-(delta + gamma + 1.0));
    let mut pairs: Vec<(f64, f64)> = g
        .nodes
        .iter()
        .zip(&g.weights)
        .map(|(&u, &w)| ((1.0 - u) / 2.0, w * scale))
        .collect();
    pairs.reverse();
    Ok(QuadratureRule {
        domain: QuadDomain::UnitInterval,
        dim: 1,
        exact_degree: g.exact_degree,
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

/// `k`-point trapezoid rule on `S¹` (exact for trigonometric degree `< k`).
pub fn circle(k: usize) -> Result<QuadratureRule> {
    if k == 0 {
        return domain("circle rule needs at least one node");
    }
    let mut nodes = Vec::with_capacity(2 * k);
    for j in 0..k {
        let th = 2.0 * PI * (j as f64 + 0.5) / k as f64;
        nodes.push(th.cos());
        nodes.push(th.sin());
    }
    Ok(QuadratureRule {
        domain: QuadDomain::Circle,
        dim: 2,
        nodes,
        weights: vec![2.0 * PI / k as f64; k],
        exact_degree: k - 1,
    })
}

/// Gauss–Legendre in `z` times trapezoid in the longitude on `S²`, exact
/// for polynomials of degree `≤ deg`.
pub fn sphere2(deg: usize) -> Result<QuadratureRule> {
    let gz = gauss_legendre(nodes_for_degree(deg))?;
    let kphi = deg + 1;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (&z, &wz) in gz.nodes.iter().zip(&gz.weights) {
        let r = (1.0 - z * z).sqrt();
        for j in 0..kphi {
            let ph = 2.0 * PI * (j as f64 + 0.5) / kphi as f64;
            nodes.extend_from_slice(&[r * ph.cos(), r * ph.sin(), z]);
            weights.push(wz * 2.0 * PI / kphi as f64);
        }
    }
    Ok(QuadratureRule {
        domain: QuadDomain::Sphere2,
        dim: 3,
        nodes,
        weights,
        exact_degree: deg,
    })
}

/// Rule on `S^{d−1}` (`d = 2, 3`) exact for polynomials of degree `≤ deg`.
pub fn sphere(d: usize, deg: usize) -> Result<QuadratureRule> {
    match d {
        2 => circle(deg + 1),
        3 => sphere2(deg),
        _ => domain(format!(
            "spheres S^{{d-1}} supported for d = 2, 3, got d = {d}"
        )),
    }
}

/// Rule on `B^d` (`d = 1, 2`) for `(1−‖u‖²)^{μ−1/2}`, exact for degree `≤ deg`.
///
/// For `d = 2` polar coordinates are used: a trapezoid rule in the angle and
/// Gauss–Jacobi in `s = r²`; after angular averaging a polynomial of degree
/// `D` becomes a polynomial of degree `⌊D/2⌋` in `s`.
pub fn ball(d: usize, mu: f64, deg: usize) -> Result<QuadratureRule> {
    if mu <= -0.5 {
        return domain(format!("ball weight needs mu > -1/2, got {mu}"));
    }
    match d {
        1 => {
            let mut r = interval(mu - 0.5, mu - 0.5, nodes_for_degree(deg))?;
            r.domain = QuadDomain::Ball;
            r.exact_degree = deg;
            Ok(r)
        }
        2 => {
            let gs = unit_interval(0.0, mu - 0.5, nodes_for_degree(deg / 2))?;
            let kth = deg + 1;
            let mut nodes = Vec::new();
            let mut weights = Vec::new();
            for (s, ws) in gs.iter() {
                let r = s[0].sqrt();
                for j in 0..kth {
                    let th = 2.0 * PI * (j as f64 + 0.5) / kth as f64;
                    nodes.extend_from_slice(&[r * th.cos(), r * th.sin()]);
                    weights.push(0.5 * ws * 2.0 * PI / kth as f64);
                }
            }
            Ok(QuadratureRule {
                domain: QuadDomain::Ball,
                dim: 2,
                nodes,
                weights,
                exact_degree: deg,
            })
        }
        _ => domain(format!("balls B^d supported for d = 1, 2, got d = {d}")),
    }
}

/// The two factors of a conic product rule: the `t`-rule (weight
/// `t^δ (1−t)^γ`, Jacobian included) and the fiber rule on the sphere or ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConicFactors {
    /// Rule on `[0,1]`.
    pub t_rule: QuadratureRule,
    /// Rule on the fiber (`S^{d−1}` or `B^d`).
    pub fiber: QuadratureRule,
}

impl ConicFactors {
    /// Tensor product rule with nodes `(t·u, t)`.
    pub fn product(&self, domain: QuadDomain) -> QuadratureRule {
        let dim = self.fiber.dim + 1;
        let mut nodes = Vec::with_capacity(self.t_rule.len() * self.fiber.len() * dim);
        let mut weights = Vec::with_capacity(self.t_rule.len() * self.fiber.len());
        for (t, wt) in self.t_rule.iter() {
            for (u, wu) in self.fiber.iter() {
                nodes.extend(u.iter().map(|v| v * t[0]));
                nodes.push(t[0]);
                weights.push(wt * wu);
            }
        }
        QuadratureRule {
            domain,
            dim,
            nodes,
            weights,
            exact_degree: self.t_rule.exact_degree.min(self.fiber.exact_degree),
        }
    }
}

/// Factors for `V₀^{d+1}` with `t^β (1−t)^γ dm`, exact for degree `≤ deg`.
pub fn surface_factors(d: usize, beta: f64, gamma: f64, deg: usize) -> Result<ConicFactors> {
    let delta = d as f64 - 1.0 + beta;
    Ok(ConicFactors {
        t_rule: unit_interval(delta, gamma, nodes_for_degree(deg))?,
        fiber: sphere(d, deg)?,
    })
}

/// Product rule on `V₀^{d+1}` with nodes `(x, t)`, `x = tξ`.
pub fn surface(d: usize, beta: f64, gamma: f64, deg: usize) -> Result<QuadratureRule> {
    Ok(surface_factors(d, beta, gamma, deg)?.product(QuadDomain::ConicSurface))
}

/// Factors for `V^{d+1}` with `W_{μ,γ} dx dt`, exact for degree `≤ deg`.
///
/// With `x = t u`, `dx dt = t^d du dt` and
/// `W_{μ,γ} = t^{2μ−1} (1−‖u‖²)^{μ−1/2} (1−t)^γ`.
pub fn cone_factors(d: usize, mu: f64, gamma: f64, deg: usize) -> Result<ConicFactors> {
    let delta = d as f64 + 2.0 * mu - 1.0;
    Ok(ConicFactors {
        t_rule: unit_interval(delta, gamma, nodes_for_degree(deg))?,
        fiber: ball(d, mu, deg)?,
    })
}

/// Product rule on `V^{d+1}` with nodes `(x, t)`.
pub fn cone(d: usize, mu: f64, gamma: f64, deg: usize) -> Result<QuadratureRule> {
    Ok(cone_factors(d, mu, gamma, deg)?.product(QuadDomain::Cone))
}

/// Which vertex of `T²` the collapsed (Duffy) coordinates are centred at.
///
/// The choice matters for operators with multipliers singular along an edge
/// pair: collapsing at the right vertex turns those multipliers into
/// polynomials in the collapsed variables, keeping the rule exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Collapse {
    /// `y₂ = v`, `y₁ = (1−v) u`: `(1−y₂) = (1−v)` is a coordinate factor.
    TowardY2,
    /// `y₁ = v`, `y₂ = (1−v) u`: `(1−y₁) = (1−v)` is a coordinate factor.
    TowardY1,
    /// `y₁ + y₂ = τ`, `y₁ − y₂ = τ w`: the cone coordinates.
    Origin,
}

/// Rule on `T²` for `y₁^a y₂^b (1−y₁−y₂)^c`, exact for degree `≤ deg`.
pub fn triangle(a: f64, b: f64, c: f64, deg: usize, collapse: Collapse) -> Result<QuadratureRule> {
    let k = nodes_for_degree(deg);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match collapse {
        Collapse::TowardY2 | Collapse::TowardY1 => {
            let (e_in, e_out) = if collapse == Collapse::TowardY2 {
                (a, b)
            } else {
                (b, a)
            };
            // inner variable u: u^{e_in} (1−u)^c; outer v: v^{e_out} (1−v)^{e_in+c+1}
            let ru = unit_interval(e_in, c, k)?;
            let rv = unit_interval(e_out, e_in + c + 1.0, k)?;
            for (v, wv) in rv.iter() {
                for (u, wu) in ru.iter() {
                    let (outer, inner) = (v[0], (1.0 - v[0]) * u[0]);
                    if collapse == Collapse::TowardY2 {
                        nodes.extend_from_slice(&[inner, outer]);
                    } else {
                        nodes.extend_from_slice(&[outer, inner]);
                    }
                    weights.push(wu * wv);
                }
            }
        }
        Collapse::Origin => {
            // y₁ = τ(1+w)/2, y₂ = τ(1−w)/2, dy = τ/2 dτ dw
            let rt = unit_interval(a + b + 1.0, c, k)?;
            let rw = interval(b, a, k)?;
            let scale = 2f64.powf(-(a + b + 1.0));
            for (t, wt) in rt.iter() {
                for (w, ww) in rw.iter() {
                    nodes
                        .extend_from_slice(&[t[0] * (1.0 + w[0]) / 2.0, t[0] * (1.0 - w[0]) / 2.0]);
                    weights.push(wt * ww * scale);
                }
            }
        }
    }
    Ok(QuadratureRule {
        domain: QuadDomain::Triangle,
        dim: 2,
        nodes,
        weights,
        exact_degree: deg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_moments() {
        let r = unit_interval(0.5, 2.0, 6).unwrap();
        for k in 0..=11 {
            let kf = k as f64;
            let exact = 2.0 / ((1.5 + kf) * (2.5 + kf) * (3.5 + kf));
            let got = r.integrate(|t| t[0].powi(k));
            assert!((got - exact).abs() < 1e-13 * exact, "k={k} {got} {exact}");
        }
    }

    #[test]
    fn circle_and_sphere_areas() {
        assert!((circle(7).unwrap().mass() - 2.0 * PI).abs() < 1e-13);
        let s = sphere2(8).unwrap();
        assert!((s.mass() - 4.0 * PI).abs() < 1e-12);
        // ∫ z² dσ = 4π/3, ∫ x²y² dσ = 4π/15
        assert!((s.integrate(|p| p[2] * p[2]) - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!((s.integrate(|p| p[0] * p[0] * p[1] * p[1]) - 4.0 * PI / 15.0).abs() < 1e-12);
    }

    #[test]
    fn ball_moments() {
        // μ = 1/2: Lebesgue measure on the disk; ∫ x² = π/4, ∫ x⁴ = π/8
        let b = ball(2, 0.5, 8).unwrap();
        assert!((b.mass() - PI).abs() < 1e-13);
        assert!((b.integrate(|p| p[0] * p[0]) - PI / 4.0).abs() < 1e-13);
        assert!((b.integrate(|p| p[0].powi(4)) - PI / 8.0).abs() < 1e-13);
    }

    #[test]
    fn triangle_collapses_agree() {
        for col in [Collapse::TowardY2, Collapse::TowardY1, Collapse::Origin] {
            let r = triangle(0.0, 0.0, 0.0, 6, col).unwrap();
            assert!((r.mass() - 0.5).abs() < 1e-14);
            // ∫ y1² y2 = 2!1!/5! = 1/60
            assert!(
                (r.integrate(|y| y[0] * y[0] * y[1]) - 1.0 / 60.0).abs() < 1e-14,
                "{col:?}"
            );
        }
    }
}

//! Marcinkiewicz–Zygmund and Remez-type certificates.
//!
//! Both compare weighted norms of random polynomials `f ∈ Π_n` with
//! restricted or discretized versions of themselves and report the worst
//! ratio over the sample.  The constant polynomial is always part of the
//! sample.
//!
//! * MZ: for an `ε`-separated set `Ξ` with `ε = β̂/n`, the cells are the balls
//!   `c(z, 1/n)`; their masses and the max/min of `|f|` over them are taken on
//!   the nodes of a fine product Gauss rule (nodes within `1/n` of `z`, plus
//!   `z` itself for the extrema).
//! * Remez: integrals over the full domain and over the region selected by
//!   `χ_{n,δ}` use the same product rule (Gauss–Legendre in `φ` with
//!   `t = sin²φ`, a sphere or polar-ball rule in the fiber), so that `δ → 0`
//!   gives ratio 1 exactly.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{BasisDomain, BasisHandle};
use crate::bernstein::random_coefficients;
use crate::error::{domain, Error, Result};
use crate::geometry::WeightSpec;
use crate::pointsets::{construct, test_grid, KeyIndex, SeparatedSet, SetDomain};
use crate::quadrature;
use crate::specfun::gauss_legendre;

/// Nodes-times-basis-size budget for one certificate.
const WORK_LIMIT: f64 = 4e9;

/// Bounded-ratio check over a doubling `n`-sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilitySweep {
    /// Degrees.
    pub ns: Vec<usize>,
    /// Measured constant at each degree.
    pub values: Vec<f64>,
    /// `value at the last n ≤ 3 × value at the first n`, all finite.
    pub stable: bool,
}

impl StabilitySweep {
    /// Applies the 3× criterion.
    pub fn new(ns: &[usize], values: Vec<f64>) -> Self {
        let stable = values.iter().all(|v| v.is_finite())
            && match (values.first(), values.last()) {
                (Some(a), Some(b)) => *b <= 3.0 * a,
                _ => false,
            };
        StabilitySweep {
            ns: ns.to_vec(),
            values,
            stable,
        }
    }
}

/// Separated-set domain carrying the weight's polynomials.
pub fn set_domain_for(w: &WeightSpec) -> Result<SetDomain> {
    match *w {
        WeightSpec::Surface { d, .. } => Ok(SetDomain::Surface { d }),
        WeightSpec::Cone { d: 2, .. } => Ok(SetDomain::Cone),
        WeightSpec::IntervalJacobi { .. } => Ok(SetDomain::Interval),
        _ => Err(Error::Unsupported(format!(
            "no separated sets for {}",
            w.label()
        ))),
    }
}

/// Values of each sample polynomial (rows) at each point (columns).
fn sample_values(h: &BasisHandle, coeffs: &[Vec<f64>], points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| {
            let v = h.eval_natural::<f64>(p);
            coeffs
                .iter()
                .map(|c| c.iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    (0..coeffs.len())
        .map(|s| cols.iter().map(|c| c[s]).collect())
        .collect()
}

/// Constant polynomial followed by `samples` Gaussian random ones.
fn sample_coefficients(dim: usize, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut e0 = vec![0.0; dim];
    e0[0] = 1.0;
    let mut out = vec![e0];
    out.extend(random_coefficients(dim, samples, seed));
    out
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return domain(format!("need 1 ≤ p < ∞, got {p}"));
    }
    Ok(())
}

/// Outcome of [`mz_certify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MzCertificate {
    /// Degree.
    pub n: usize,
    /// Separation parameter `β̂` (`ε = β̂/n`).
    pub beta_hat: f64,
    /// Exponent `p`.
    pub p: f64,
    /// Number of set points (cells).
    pub points: usize,
    /// Number of fine-rule nodes.
    pub nodes: usize,
    /// Worst `Σ_z max_c |f|^p w(c) / ‖f‖_p^p` (inequality (i)).
    pub upper_ratio: f64,
    /// Worst `‖f‖_p^p / Σ_z min_c |f|^p w(c)` (inequality (ii)).
    pub lower_ratio: f64,
    /// `Σ_z w(c) / ‖1‖_1`: cell overlap for the constant polynomial.
    pub constant_ratio: f64,
    /// Number of random polynomials (besides the constant).
    pub samples: usize,
}

/// MZ certificate on the separated set of [`construct`] with `ε = β̂/n`.
pub fn mz_certify(
    n: usize,
    w: &WeightSpec,
    beta_hat: f64,
    p: f64,
    samples: usize,
    seed: u64,
) -> Result<MzCertificate> {
    if !(beta_hat > 0.0) || n == 0 {
        return domain("MZ needs β̂ > 0 and n ≥ 1");
    }
    let set = construct(set_domain_for(w)?, beta_hat / n as f64)?;
    mz_certify_with_set(n, w, beta_hat, p, &set, samples, seed)
}

/// MZ certificate on a given separated set.
pub fn mz_certify_with_set(
    n: usize,
    w: &WeightSpec,
    beta_hat: f64,
    p: f64,
    set: &SeparatedSet,
    samples: usize,
    seed: u64,
) -> Result<MzCertificate> {
    check_p(p)?;
    let dom = set_domain_for(w)?;
    if dom != set.domain {
        return domain("separated set and weight live on different domains");
    }
    let h = BasisHandle::new(*w, n)?;
    let k = 8 * n + 8;
    let rule = match *w {
        WeightSpec::Surface { d, beta, gamma } => quadrature::surface(d, beta, gamma, k)?,
        WeightSpec::Cone { d, mu, gamma } => quadrature::cone(d, mu, gamma, k)?,
        WeightSpec::IntervalJacobi { .. } => h.reference_rule(7 * n + 8)?,
        _ => unreachable!("checked by set_domain_for"),
    };
    let nodes: Vec<Vec<f64>> = rule.iter().map(|(x, _)| x.to_vec()).collect();
    let weights: Vec<f64> = rule.weights.clone();
    if (nodes.len() + set.len()) as f64 * h.dim() as f64 > WORK_LIMIT {
        return Err(Error::Resource(format!(
            "MZ at n = {n} needs {} nodes × {} basis functions",
            nodes.len(),
            h.dim()
        )));
    }
    let coeffs = sample_coefficients(h.dim(), samples, seed);
    let at_nodes = sample_values(&h, &coeffs, &nodes);
    let at_points = sample_values(&h, &coeffs, &set.points);
    let index = KeyIndex::new(dom, &nodes);
    let radius = 1.0 / n as f64;
    let cells: Vec<Vec<usize>> = set
        .points
        .par_iter()
        .map(|z| index.within(z, radius))
        .collect();
    let masses: Vec<f64> = cells
        .iter()
        .map(|c| c.iter().map(|&i| weights[i]).sum())
        .collect();
    let total: f64 = weights.iter().sum();

    let mut upper = 0.0f64;
    let mut lower = 0.0f64;
    for (vals, centers) in at_nodes.iter().zip(&at_points) {
        let norm: f64 = vals
            .iter()
            .zip(&weights)
            .map(|(v, w)| w * v.abs().powf(p))
            .sum();
        let (mut smax, mut smin) = (0.0, 0.0);
        for ((cell, mass), c) in cells.iter().zip(&masses).zip(centers) {
            let (mut hi, mut lo) = (c.abs(), c.abs());
            for &i in cell {
                hi = hi.max(vals[i].abs());
                lo = lo.min(vals[i].abs());
            }
            smax += hi.powf(p) * mass;
            smin += lo.powf(p) * mass;
        }
        upper = upper.max(smax / norm);
        lower = lower.max(if smin > 0.0 {
            norm / smin
        } else {
            f64::INFINITY
        });
    }
    Ok(MzCertificate {
        n,
        beta_hat,
        p,
        points: set.len(),
        nodes: nodes.len(),
        upper_ratio: upper,
        lower_ratio: lower,
        constant_ratio: masses.iter().sum::<f64>() / total,
        samples,
    })
}

/// Region selected by `χ_{n,δ}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemezRegion {
    /// `V₀^{d+1}` with `δ/n² ≤ t ≤ 1 − δ/n²`.
    Surface,
    /// `V^{d+1}` with the same `t`-range and `√(t² − ‖x‖²) ≥ δ√t/n`.
    Cone,
    /// `B^d` with `‖x‖ ≤ 1 − δ/n²`, polynomials `x ↦ f(x, 1)`, `f ∈ Π_n(V^{d+1})`.
    Ball,
}

/// Outcome of a Remez certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemezCertificate {
    /// Region.
    pub region: RemezRegion,
    /// Degree.
    pub n: usize,
    /// Strip parameter `δ`.
    pub delta: f64,
    /// Exponent (`∞` for the uniform variant).
    pub p: f64,
    /// Worst `‖f‖ / ‖f χ‖` over the sample.
    pub ratio: f64,
    /// Number of random polynomials (besides the constant).
    pub samples: usize,
}

/// Weighted nodes of a one-dimensional rule in `φ ∈ [a, b]`.
fn phi_rule(a: f64, b: f64, m: usize) -> Result<Vec<(f64, f64)>> {
    if b <= a {
        return Ok(Vec::new());
    }
    let g = gauss_legendre(m)?;
    Ok(g.nodes
        .iter()
        .zip(&g.weights)
        .map(|(x, w)| (a + (b - a) * (x + 1.0) / 2.0, w * (b - a) / 2.0))
        .collect())
}

/// Fiber rule on `B^d`, `d ∈ {1, 2}`, restricted to `‖u‖ ≤ ρ`, for the
/// weight `(1 − ‖u‖²)^{μ−1/2}`.
fn ball_fiber(
    d: usize,
    mu: f64,
    rho: f64,
    m: usize,
    angles: usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    if rho <= 0.0 {
        return Ok(Vec::new());
    }
    let top = rho.min(1.0).asin();
    match d {
        1 => Ok(phi_rule(-top, top, m)?
            .into_iter()
            .map(|(th, w)| (vec![th.sin()], w * th.cos().powf(2.0 * mu)))
            .collect()),
        2 => {
            let na = angles;
            let mut out = Vec::new();
            for (th, w) in phi_rule(0.0, top, m)? {
                let r = th.sin();
                let wr = w * r * th.cos().powf(2.0 * mu);
                for a in 0..na {
                    let ang = 2.0 * PI * a as f64 / na as f64;
                    out.push((
                        vec![r * ang.cos(), r * ang.sin()],
                        wr * 2.0 * PI / na as f64,
                    ));
                }
            }
            Ok(out)
        }
        _ => domain(format!("ball fibers supported for d = 1, 2, got {d}")),
    }
}

/// Product rule for `region` restricted by `χ_{n,δ}` (`δ = 0`: full domain).
fn remez_rule(
    w: &WeightSpec,
    region: RemezRegion,
    n: usize,
    delta: f64,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let nf = n as f64;
    // |f|² has degree 2n: 2n + 16 nodes in φ, n + 16 radial nodes and
    // 2n + 3 angles (trapezoid) resolve it
    let m = 2 * n + 16;
    let mr = n + 16;
    let na = 2 * n + 3;
    let strip = delta / (nf * nf);
    let (ta, tb) = (strip.min(0.5), (1.0 - strip).max(0.5));
    let t_nodes = |power: f64, gamma: f64| -> Result<Vec<(f64, f64)>> {
        Ok(phi_rule(ta.sqrt().asin(), tb.sqrt().asin(), m)?
            .into_iter()
            .map(|(ph, wt)| {
                let t = ph.sin().powi(2);
                // dt = 2 sin φ cos φ dφ
                (
                    t,
                    wt * 2.0 * ph.sin() * ph.cos() * t.powf(power) * (1.0 - t).powf(gamma),
                )
            })
            .collect())
    };
    match (region, *w) {
        (RemezRegion::Surface, WeightSpec::Surface { d, beta, gamma }) => {
            let fiber = quadrature::sphere(d, 2 * n + 2)?;
            let mut out = Vec::new();
            for (t, wt) in t_nodes(d as f64 - 1.0 + beta, gamma)? {
                for (xi, wx) in fiber.iter() {
                    let mut p: Vec<f64> = xi.iter().map(|v| v * t).collect();
                    p.push(t);
                    out.push((p, wt * wx));
                }
            }
            Ok(out)
        }
        (RemezRegion::Cone, WeightSpec::Cone { d, mu, gamma }) => {
            let mut out = Vec::new();
            for (t, wt) in t_nodes(d as f64 + 2.0 * mu - 1.0, gamma)? {
                // t √(1 − ‖u‖²) ≥ δ √t / n
                let c = delta / (nf * t.sqrt());
                let rho = if c >= 1.0 { 0.0 } else { (1.0 - c * c).sqrt() };
                for (u, wu) in ball_fiber(d, mu, rho, mr, na)? {
                    let mut p: Vec<f64> = u.iter().map(|v| v * t).collect();
                    p.push(t);
                    out.push((p, wt * wu));
                }
            }
            Ok(out)
        }
        (RemezRegion::Ball, WeightSpec::Cone { d, mu, .. }) => {
            Ok(ball_fiber(d, mu, 1.0 - strip, m, 2 * na)?
                .into_iter()
                .map(|(mut u, wu)| {
                    u.push(1.0);
                    (u, wu)
                })
                .collect())
        }
        _ => Err(Error::Unsupported(format!(
            "Remez region {region:?} does not match {}",
            w.label()
        ))),
    }
}

/// `L^p` Remez certificate: worst `(∫|f|^p w / ∫|f|^p χ_{n,δ} w)^{1/p}`.
pub fn remez_certify(
    n: usize,
    w: &WeightSpec,
    delta: f64,
    p: f64,
    region: RemezRegion,
    samples: usize,
    seed: u64,
) -> Result<RemezCertificate> {
    check_p(p)?;
    if !(delta >= 0.0) || n == 0 {
        return domain("Remez needs δ ≥ 0 and n ≥ 1");
    }
    let h = BasisHandle::new(*w, n)?;
    let full = remez_rule(w, region, n, 0.0)?;
    let part = remez_rule(w, region, n, delta)?;
    if (full.len() + part.len()) as f64 * h.dim() as f64 > WORK_LIMIT {
        return Err(Error::Resource(format!(
            "Remez at n = {n} needs {} nodes",
            full.len() + part.len()
        )));
    }
    let coeffs = sample_coefficients(h.dim(), samples, seed);
    let integrate = |rule: &[(Vec<f64>, f64)]| -> Vec<f64> {
        let pts: Vec<Vec<f64>> = rule.iter().map(|(x, _)| x.clone()).collect();
        sample_values(&h, &coeffs, &pts)
            .iter()
            .map(|vals| {
                vals.iter()
                    .zip(rule)
                    .map(|(v, (_, w))| w * v.abs().powf(p))
                    .sum()
            })
            .collect()
    };
    let a = integrate(&full);
    let b = integrate(&part);
    let ratio = a
        .iter()
        .zip(&b)
        .map(|(x, y)| {
            if *y > 0.0 {
                (x / y).powf(1.0 / p)
            } else {
                f64::INFINITY
            }
        })
        .fold(1.0, f64::max);
    Ok(RemezCertificate {
        region,
        n,
        delta,
        p,
        ratio,
        samples,
    })
}

/// Uniform-norm Remez certificate on a grid of mesh `1/(4n)`:
/// worst `max_grid |f| / max_{grid ∩ χ_{n,δ}} |f|`.
pub fn remez_sup_certify(
    n: usize,
    w: &WeightSpec,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<RemezCertificate> {
    if !(delta >= 0.0) || n == 0 {
        return domain("Remez needs δ ≥ 0 and n ≥ 1");
    }
    let dom = set_domain_for(w)?;
    let (region, d) = match (dom, *w) {
        (SetDomain::Surface { d }, _) => (RemezRegion::Surface, d),
        (SetDomain::Cone, WeightSpec::Cone { d, .. }) => (RemezRegion::Cone, d),
        _ => {
            return Err(Error::Unsupported(format!(
                "uniform Remez for {}",
                w.label()
            )))
        }
    };
    let h = BasisHandle::new(*w, n)?;
    debug_assert!(matches!(
        h.domain(),
        BasisDomain::Surface | BasisDomain::Cone
    ));
    let nf = n as f64;
    let grid = test_grid(dom, 1.0 / (4.0 * nf))?;
    if grid.len() as f64 * h.dim() as f64 > WORK_LIMIT {
        return Err(Error::Resource(format!(
            "uniform Remez at n = {n} needs {} grid points",
            grid.len()
        )));
    }
    let strip = delta / (nf * nf);
    let inside: Vec<bool> = grid
        .iter()
        .map(|q| {
            let t = q[d];
            let ok_t = t >= strip && t <= 1.0 - strip;
            match region {
                RemezRegion::Cone => {
                    let gap = (t * t - q[..d].iter().map(|v| v * v).sum::<f64>())
                        .max(0.0)
                        .sqrt();
                    ok_t && gap >= delta * t.sqrt() / nf
                }
                _ => ok_t,
            }
        })
        .collect();
    let coeffs = sample_coefficients(h.dim(), samples, seed);
    let mut ratio = 1.0f64;
    for vals in sample_values(&h, &coeffs, &grid) {
        let full = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let part = vals
            .iter()
            .zip(&inside)
            .filter(|(_, &i)| i)
            .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
        ratio = ratio.max(if part > 0.0 {
            full / part
        } else {
            f64::INFINITY
        });
    }
    Ok(RemezCertificate {
        region,
        n,
        delta,
        p: f64::INFINITY,
        ratio,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remez_rule_integrates_norm_exactly() {
        // orthonormal basis: ∫ f² w = Σ c²
        let w = WeightSpec::Surface {
            d: 2,
            beta: -1.0,
            gamma: 0.5,
        };
        let h = BasisHandle::new(w, 4).unwrap();
        let rule = remez_rule(&w, RemezRegion::Surface, 4, 0.0).unwrap();
        let c = random_coefficients(h.dim(), 1, 9).remove(0);
        let s: f64 = rule
            .iter()
            .map(|(x, wt)| {
                let v: f64 = h
                    .eval_natural::<f64>(x)
                    .iter()
                    .zip(&c)
                    .map(|(a, b)| a * b)
                    .sum();
                wt * v * v
            })
            .sum();
        let expect: f64 = c.iter().map(|v| v * v).sum();
        assert!((s - expect).abs() < 1e-9 * expect, "{s} vs {expect}");
    }

    #[test]
    fn zero_strip_gives_ratio_one() {
        let w = WeightSpec::Cone {
            d: 2,
            mu: 0.5,
            gamma: 0.0,
        };
        let r = remez_certify(4, &w, 0.0, 2.0, RemezRegion::Cone, 3, 1).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-12);
    }
}

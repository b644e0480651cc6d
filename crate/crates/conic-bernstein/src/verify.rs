//! Verification suites: each runs one family of identities or certificates
//! and returns [`Check`]s with the measured quantity, the limit it is held
//! to, and the verdict.  The command-line front end and the acceptance tests
//! share these entry points.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{BasisDomain, BasisHandle};
use crate::bernstein::{maximal_norm_check, random_coefficients};
use crate::error::{domain, Error, Result};
use crate::geometry::WeightSpec;
use crate::kernels::{
    decay_sweep, derivative_decay_sweep, lift_identity, probe_pairs, random_points,
    reproduction_residual, AdditionKernel, KernelDerivative, SumKernel,
};
use crate::operators::{
    apply_spectral, check_selfadjoint_cone, check_selfadjoint_surface, cone_operator_decomposed,
    OpValues, SpectralOp,
};
use crate::quadrature;
use crate::sampling::{mz_certify, remez_certify, remez_sup_certify, RemezRegion, StabilitySweep};
use crate::specfun::CutoffFn;

/// Eigen-identity tolerance (relative pointwise residual).
pub const EIGEN_TOL: f64 = 1e-8;
/// Self-adjointness tolerance (residual over `‖f‖‖g‖`).
pub const SELFADJOINT_TOL: f64 = 1e-8;
/// Sum form versus closed form tolerance.
pub const DUAL_TOL: f64 = 1e-8;
/// Reproduction tolerance.
pub const REPRODUCTION_TOL: f64 = 1e-9;
/// Lift identity tolerance.
pub const LIFT_TOL: f64 = 1e-8;
/// Growth factor allowed across a doubling sweep `n = 8 → 32`.
pub const STABILITY_FACTOR: f64 = 3.0;
/// Default degree sweep for stability checks.
pub const STABILITY_LADDER: [usize; 3] = [8, 16, 32];

/// Direction of the comparison in a [`Check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `measured ≤ limit`.
    #[serde(rename = "<=")]
    AtMost,
    /// `measured ≥ limit`.
    #[serde(rename = ">=")]
    AtLeast,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        })
    }
}

/// One verified quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Suite name (`eigen`, `selfadjoint`, …).
    pub suite: String,
    /// Case identifier within the suite.
    pub case: String,
    /// Measured value.
    pub measured: f64,
    /// Comparison.
    pub relation: Relation,
    /// Limit.
    pub limit: f64,
    /// Verdict.
    pub pass: bool,
}

impl Check {
    fn new(suite: &str, case: String, measured: f64, relation: Relation, limit: f64) -> Self {
        let pass = measured.is_finite()
            && match relation {
                Relation::AtMost => measured <= limit,
                Relation::AtLeast => measured >= limit,
            };
        Check {
            suite: suite.into(),
            case,
            measured,
            relation,
            limit,
            pass,
        }
    }

    fn at_most(suite: &str, case: String, measured: f64, limit: f64) -> Self {
        Self::new(suite, case, measured, Relation::AtMost, limit)
    }

    fn stability(suite: &str, case: String, sweep: &StabilitySweep) -> Self {
        let growth = match (sweep.values.first(), sweep.values.last()) {
            (Some(a), Some(b)) if *a > 0.0 => b / a,
            _ => f64::INFINITY,
        };
        Self::at_most(suite, case, growth, STABILITY_FACTOR)
    }
}

fn spectral_for(w: &WeightSpec) -> Result<(SpectralOp, usize)> {
    match *w {
        WeightSpec::Surface {
            d,
            beta: -1.0,
            gamma,
        } => Ok((SpectralOp::Surface { gamma }, d)),
        WeightSpec::Cone { d, mu, gamma } => Ok((SpectralOp::Cone { mu, gamma }, d)),
        _ => Err(Error::Unsupported(format!(
            "no spectral operator for {}",
            w.label()
        ))),
    }
}

/// Largest `|Lφ − λφ| / ((1 + |λ|) max(|φ(p)|, 1))` over the basis of
/// degree `≤ nmax` and `points` random interior points; for the cone also
/// the agreement of the operator with its lateral/radial decomposition.
pub fn eigen_checks(w: &WeightSpec, nmax: usize, points: usize, seed: u64) -> Result<Vec<Check>> {
    let (op, d) = spectral_for(w)?;
    let h = BasisHandle::new(*w, nmax)?;
    let pts = random_points(w, points, 0.05, seed)?;
    let degrees: Vec<usize> = h.indices().iter().map(|i| i.n).collect();
    let worst: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|p| {
            let lv = spectral_values(&op, &h, p)?;
            let v = h.eval_natural::<f64>(p);
            let mut e = 0.0f64;
            for ((l, f), &n) in lv.iter().zip(&v).zip(&degrees) {
                let lam = op.eigenvalue(d, n);
                e = e.max((l - lam * f).abs() / ((1.0 + lam.abs()) * f.abs().max(1.0)));
            }
            let mut dec = 0.0f64;
            if let SpectralOp::Cone { mu, gamma } = op {
                dec = decomposition_residual(mu, gamma, &h, p, &lv)?;
            }
            Ok((e, dec))
        })
        .collect::<Result<_>>()?;
    let label = format!("{} nmax={nmax}", w.label());
    let mut out = vec![Check::at_most(
        "eigen",
        label.clone(),
        worst.iter().map(|r| r.0).fold(0.0, f64::max),
        EIGEN_TOL,
    )];
    if matches!(op, SpectralOp::Cone { .. }) {
        out.push(Check::at_most(
            "eigen",
            format!("{label} decomposition"),
            worst.iter().map(|r| r.1).fold(0.0, f64::max),
            EIGEN_TOL,
        ));
    }
    Ok(out)
}

fn spectral_values(op: &SpectralOp, h: &BasisHandle, p: &[f64]) -> Result<Vec<f64>> {
    match apply_spectral(op, h, p)? {
        OpValues::Finite(v) => Ok(v),
        OpValues::Singular => Err(Error::Numeric(
            "spectral operator singular at an interior point".into(),
        )),
    }
}

fn decomposition_residual(
    mu: f64,
    gamma: f64,
    h: &BasisHandle,
    p: &[f64],
    lv: &[f64],
) -> Result<f64> {
    let dv = match cone_operator_decomposed(mu, gamma, h, p)? {
        OpValues::Finite(v) => v,
        OpValues::Singular => {
            return Err(Error::Numeric(
                "decomposed operator singular at an interior point".into(),
            ))
        }
    };
    Ok(dv
        .iter()
        .zip(lv)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max))
}

/// Self-adjointness residuals `|lhs − rhs| / (‖f‖‖g‖)` over `pairs` random
/// pairs in `Π_n`; for the cone also the decomposition check at random
/// points.
pub fn selfadjoint_checks(w: &WeightSpec, n: usize, pairs: usize, seed: u64) -> Result<Vec<Check>> {
    let (op, _) = spectral_for(w)?;
    let h = BasisHandle::new(*w, n)?;
    let rule = h.reference_rule(8)?;
    let coeffs = random_coefficients(h.dim(), 2 * pairs, seed);
    let worst = coeffs
        .par_chunks(2)
        .map(|fg| {
            let r = match op {
                SpectralOp::Surface { gamma } => {
                    check_selfadjoint_surface(&h, gamma, &fg[0], &fg[1], &rule)?
                }
                SpectralOp::Cone { mu, gamma } => {
                    check_selfadjoint_cone(&h, mu, gamma, &fg[0], &fg[1], &rule)?
                }
            };
            Ok(r.residual / r.scale)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let label = format!("{} n={n}", w.label());
    let mut out = vec![Check::at_most(
        "selfadjoint",
        label.clone(),
        worst,
        SELFADJOINT_TOL,
    )];
    if let SpectralOp::Cone { mu, gamma } = op {
        let pts = random_points(w, pairs, 0.05, seed.wrapping_add(1))?;
        let dec = pts
            .par_iter()
            .map(|p| decomposition_residual(mu, gamma, &h, p, &spectral_values(&op, &h, p)?))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.push(Check::at_most(
            "selfadjoint",
            format!("{label} decomposition"),
            dec,
            SELFADJOINT_TOL,
        ));
    }
    Ok(out)
}

/// Which kernel identity to verify.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelIdentity {
    /// Basis sums versus closed forms.
    Dual,
    /// Reproduction of `Π_n`.
    Reproduction,
    /// Cone kernel as a sum of two surface kernels.
    Lift,
    /// Integral over the surface as an integral over the cone.
    LiftIntegral,
    /// All of the above.
    All,
}

impl std::str::FromStr for KernelIdentity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual" | "addition" => Ok(KernelIdentity::Dual),
            "reproduction" => Ok(KernelIdentity::Reproduction),
            "lift" => Ok(KernelIdentity::Lift),
            "lift-integral" => Ok(KernelIdentity::LiftIntegral),
            "all" => Ok(KernelIdentity::All),
            _ => domain(format!(
                "unknown kernel identity {s:?} (dual, reproduction, lift, lift-integral, all)"
            )),
        }
    }
}

/// Weights on which the closed forms are verified.
pub fn kernel_weights() -> Vec<WeightSpec> {
    let mut out = Vec::new();
    for d in [2, 3] {
        for gamma in [-0.5, 0.0, 0.5, 2.0] {
            out.push(WeightSpec::Surface {
                d,
                beta: -1.0,
                gamma,
            });
        }
    }
    for d in [1, 2] {
        for gamma in [0.0, 1.0] {
            out.push(WeightSpec::Cone { d, mu: 0.0, gamma });
        }
    }
    out
}

fn addition_for(w: &WeightSpec, order: usize) -> Result<AdditionKernel> {
    match *w {
        WeightSpec::Surface {
            d,
            beta: -1.0,
            gamma,
        } => AdditionKernel::surface(d, gamma, order),
        WeightSpec::Cone { d, mu: 0.0, gamma } => AdditionKernel::cone(d, gamma, order),
        _ => Err(Error::Unsupported(format!(
            "no closed-form kernel for {}",
            w.label()
        ))),
    }
}

fn random_pairs(w: &WeightSpec, count: usize, seed: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let a = random_points(w, count, 1e-3, seed)?;
    let b = random_points(w, count, 1e-3, seed.wrapping_add(7))?;
    Ok(a.into_iter().zip(b).collect())
}

/// Kernel identities at degree `n` on `pairs` random pairs.
///
/// Relative errors use the Cauchy–Schwarz scale `√(K(p,p) K(q,q))` of the
/// kernel compared.
pub fn kernel_checks(
    identity: KernelIdentity,
    n: usize,
    pairs: usize,
    seed: u64,
) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let want = |k: KernelIdentity| identity == k || identity == KernelIdentity::All;
    // P_k, k ≤ n, is a polynomial of degree 2k in v: n + 8 Gauss nodes are
    // exact; L_n reaches degree 2n − 1 and gets 2n + 8
    let proj_order = n + 8;
    let order = 2 * n + 8;
    if want(KernelIdentity::Dual) {
        for w in kernel_weights() {
            let sum = SumKernel::new(w, n)?;
            let add = addition_for(&w, proj_order)?;
            let worst = random_pairs(&w, pairs, seed)?
                .par_iter()
                .map(|(p, q)| {
                    let mut e = 0.0f64;
                    for k in 0..=n {
                        let a = sum.projection(k, p, q)?;
                        let b = add.projection(k, p, q)?;
                        let scale = (sum.projection(k, p, p)? * sum.projection(k, q, q)?).sqrt();
                        e = e.max((a - b).abs() / scale);
                    }
                    Ok(e)
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            out.push(Check::at_most(
                "kernels",
                format!("dual {} n<={n}", w.label()),
                worst,
                DUAL_TOL,
            ));
        }
    }
    if want(KernelIdentity::Reproduction) {
        for w in kernel_weights() {
            let basis = BasisHandle::new(w, n)?;
            let rule = basis.reference_rule(0)?;
            let add = addition_for(&w, proj_order)?;
            let c = vec![1.0; n + 1];
            let anchors = random_points(&w, 20, 1e-3, seed.wrapping_add(3))?;
            let res =
                reproduction_residual(&basis, &c, |x, q| add.weighted(&c, x, q), &anchors, &rule)?;
            let scale = anchors
                .iter()
                .flat_map(|q| basis.eval_natural::<f64>(q))
                .fold(1.0f64, |m, v| m.max(v.abs()));
            out.push(Check::at_most(
                "kernels",
                format!("reproduction {} n={n}", w.label()),
                res / scale,
                REPRODUCTION_TOL,
            ));
        }
    }
    if want(KernelIdentity::Lift) {
        for d in [1, 2] {
            for gamma in [0.0, 1.0] {
                let w = WeightSpec::Cone { d, mu: 0.0, gamma };
                let cone = AdditionKernel::cone(d, gamma, order)?;
                let surf = AdditionKernel::surface(d + 1, gamma, order)?;
                let worst = random_pairs(&w, pairs, seed)?
                    .par_iter()
                    .map(|(p, q)| {
                        let (l, r) = lift_identity(&cone, &surf, &CutoffFn, n, p, q)?;
                        let pp = cone.localized(&CutoffFn, n, p, p)?;
                        let qq = cone.localized(&CutoffFn, n, q, q)?;
                        Ok((l - r).abs() / (pp * qq).abs().sqrt())
                    })
                    .collect::<Result<Vec<f64>>>()?
                    .into_iter()
                    .fold(0.0, f64::max);
                out.push(Check::at_most(
                    "kernels",
                    format!("lift {} n={n}", w.label()),
                    worst,
                    LIFT_TOL,
                ));
            }
        }
    }
    if want(KernelIdentity::LiftIntegral) {
        for d in [1, 2] {
            for gamma in [0.0, 1.0] {
                let e = lift_integral_residual(d, gamma, n, seed)?;
                out.push(Check::at_most(
                    "kernels",
                    format!("lift-integral cone(d={d},gamma={gamma}) n={n}"),
                    e,
                    LIFT_TOL,
                ));
            }
        }
    }
    Ok(out)
}

/// Relative gap between `∫_{V₀^{d+2}} f w dm` (with `w = (1−t)^γ`) and
/// `∫_{V^{d+1}} [f(x, x_{d+1}, t) + f(x, −x_{d+1}, t)] t W_{0,γ} dx dt`,
/// `x_{d+1} = √(t² − ‖x‖²)`, for a random `f ∈ Π_n(V₀^{d+2})`.
pub fn lift_integral_residual(d: usize, gamma: f64, n: usize, seed: u64) -> Result<f64> {
    let sw = WeightSpec::Surface {
        d: d + 1,
        beta: 0.0,
        gamma,
    };
    let h = BasisHandle::new(sw, n)?;
    let c = random_coefficients(h.dim(), 1, seed).remove(0);
    let surf = quadrature::surface(d + 1, 0.0, gamma, n + 2)?;
    let cone = quadrature::cone(d, 0.0, gamma, n + 2)?;
    let f = |p: &[f64]| h.eval_combination::<f64>(&c, p);
    let lhs = surf.integrate(f);
    let rhs = cone.integrate(|p| {
        let (up, down) = crate::kernels::lift_pair(p);
        (f(&up) + f(&down)) * p[d]
    });
    let scale = surf.integrate(|p| f(p).abs()).max(f64::MIN_POSITIVE);
    Ok((lhs - rhs).abs() / scale)
}

/// MZ two-sided constants over a degree sweep, with the 3× criterion.
pub fn mz_checks(
    w: &WeightSpec,
    ns: &[usize],
    beta_hat: f64,
    p: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<Check>> {
    let certs = ns
        .iter()
        .map(|&n| mz_certify(n, w, beta_hat, p, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    let up = StabilitySweep::new(ns, certs.iter().map(|c| c.upper_ratio).collect());
    let lo = StabilitySweep::new(ns, certs.iter().map(|c| c.lower_ratio).collect());
    let label = format!("{} beta_hat={beta_hat} p={p}", w.label());
    Ok(vec![
        Check::stability("mz", format!("upper growth {label} {:?}", up.values), &up),
        Check::stability("mz", format!("lower growth {label} {:?}", lo.values), &lo),
    ])
}

/// Remez constants (`L^p` and uniform) over a degree sweep, with the 3×
/// criterion.
pub fn remez_checks(
    w: &WeightSpec,
    region: RemezRegion,
    ns: &[usize],
    delta: f64,
    p: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<Check>> {
    let lp = ns
        .iter()
        .map(|&n| Ok(remez_certify(n, w, delta, p, region, samples, seed)?.ratio))
        .collect::<Result<Vec<_>>>()?;
    let lp = StabilitySweep::new(ns, lp);
    let label = format!("{} {region:?} delta={delta}", w.label());
    let mut out = vec![Check::stability(
        "remez",
        format!("L{p} growth {label} {:?}", lp.values),
        &lp,
    )];
    if region != RemezRegion::Ball {
        let sup = ns
            .iter()
            .map(|&n| Ok(remez_sup_certify(n, w, delta, samples, seed)?.ratio))
            .collect::<Result<Vec<_>>>()?;
        let sup = StabilitySweep::new(ns, sup);
        out.push(Check::stability(
            "remez",
            format!("sup growth {label} {:?}", sup.values),
            &sup,
        ));
    }
    Ok(out)
}

/// Maximal-function comparison `‖f‖ ≤ ‖f*‖ ≤ c‖f‖` over a degree sweep:
/// the lower inequality exactly, `c` under the 3× criterion.
pub fn maximal_checks(
    w: &WeightSpec,
    ns: &[usize],
    beta: f64,
    p: f64,
    seed: u64,
) -> Result<Vec<Check>> {
    let mut cs = Vec::new();
    let mut lower = true;
    for &n in ns {
        let h = BasisHandle::new(*w, n)?;
        let c = random_coefficients(h.dim(), 1, seed).remove(0);
        let m = maximal_norm_check(&h, &c, beta, p)?;
        lower &= m.lower_holds;
        cs.push(m.measured_c);
    }
    let sweep = StabilitySweep::new(ns, cs);
    let label = format!("{} beta={beta} p={p}", w.label());
    Ok(vec![
        Check::new(
            "maximal",
            format!("lower bound {label}"),
            if lower { 1.0 } else { 0.0 },
            Relation::AtLeast,
            1.0,
        ),
        Check::stability(
            "maximal",
            format!("upper growth {label} {:?}", sweep.values),
            &sweep,
        ),
    ])
}

/// Localization of `L_n`, `∂_t L_n` and `D_{1,2} L_n` on `V₀^{d+1}` over a
/// degree sweep (3× criterion on the max ratio to the envelope).
pub fn decay_checks(
    w: &WeightSpec,
    ns: &[usize],
    kappa: f64,
    pairs: usize,
    seed: u64,
) -> Result<Vec<Check>> {
    let d = match *w {
        WeightSpec::Surface { d, beta: -1.0, .. } => d,
        _ => {
            return Err(Error::Unsupported(
                "decay checks run on the surface with β = −1".into(),
            ))
        }
    };
    if ns.is_empty() || ns.contains(&0) {
        return domain("decay sweep needs positive degrees");
    }
    let pp = probe_pairs(d, pairs, 1e-3, seed)?;
    let label = format!("{} kappa={kappa}", w.label());
    let k = decay_sweep(*w, ns, &pp, kappa)?;
    let mut out = vec![Check::stability(
        "decay",
        format!("kernel {label} {:?}", k.max_ratios),
        &StabilitySweep::new(ns, k.max_ratios),
    )];
    for (name, op) in [
        ("dt", KernelDerivative::Dt),
        ("d12", KernelDerivative::Dij { i: 1, j: 2 }),
    ] {
        let s = derivative_decay_sweep(*w, op, ns, &pp, kappa)?;
        out.push(Check::stability(
            "decay",
            format!("{name} {label} {:?}", s.max_ratios),
            &StabilitySweep::new(ns, s.max_ratios),
        ));
    }
    Ok(out)
}

/// Slope of `max_q |D_{1,2} L_n((tξ, t), q)|` against `t` near the apex, fit
/// over `t = 2^{−k}`, `2 ≤ k ≤ log₂ n²`: the envelope's `√t` factor is an
/// upper bound, so the check is one-sided (slope at least `0.5 − 0.15`).
pub fn apex_checks(w: &WeightSpec, n: usize, targets: usize, seed: u64) -> Result<Vec<Check>> {
    if !matches!(w, WeightSpec::Surface { d: 2, beta, .. } if *beta == -1.0) || n < 2 {
        return Err(Error::Unsupported(
            "apex slope runs on V₀³ with β = −1 and n ≥ 2".into(),
        ));
    }
    let ker = SumKernel::new(*w, 2 * n - 1)?;
    let qs = random_points(w, targets, 1e-3, seed)?;
    let kmax = (2.0 * (n as f64).log2()).floor() as i32;
    let ks: Vec<i32> = (2..=kmax).collect();
    let xi = [0.6f64.sqrt(), 0.4f64.sqrt()];
    let s = crate::kernels::angular_derivative_apex_slope(&ker, &CutoffFn, n, 1, 2, &xi, &qs, &ks)?;
    Ok(vec![Check::new(
        "decay",
        format!("apex d12 slope {} n={n}", w.label()),
        s.slope,
        Relation::AtLeast,
        0.35,
    )])
}

/// Domain of a basis, for messages.
pub fn domain_name(w: &WeightSpec) -> &'static str {
    match BasisHandle::new(*w, 0).map(|h| h.domain()) {
        Ok(BasisDomain::Surface) => "surface",
        Ok(BasisDomain::Cone) => "cone",
        Ok(BasisDomain::Triangle) => "triangle",
        Ok(BasisDomain::Interval) => "interval",
        Err(_) => "invalid",
    }
}

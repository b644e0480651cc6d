//! Reproducing kernels, highly localized kernels and their decay.
//!
//! Kernels are normalized against the raw weighted measure: with
//! `M = ∫ w dm`, the degree-zero kernel is `P₀ ≡ 1/M`, so that
//! `∫ P_n(·, q) f w dm = proj_n f (q)` without further constants.  The
//! closed forms are calibrated to the same convention by their `n = 0` value.
//!
//! * [`SumKernel`] evaluates `P_k` and `L_n` as sums over an orthonormal
//!   basis (any domain and weight).
//! * [`AdditionKernel`] evaluates them through one-dimensional Jacobi kernels
//!   integrated over `v ∈ [−1,1]²` (surface with `β = −1`; cone with `μ = 0`
//!   through the lift `X = (x, ±√(t²−‖x‖²))`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{BasisDomain, BasisHandle};
use crate::error::{domain, Error, Result};
use crate::geometry::{ball_measure_proxy, surface_distance_raw, WeightSpec};
use crate::operators::{apply_diffop, Combination, DiffOp, Multiplier, OpKind, OpValues};
use crate::quadrature::QuadratureRule;
use crate::specfun::{
    gauss_jacobi, jacobi_norm, jacobi_series, z_kernel_coefficients, CutoffFn, JacobiParams,
};

/// Parameters of a kernel experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Weight (fixes the domain, `d` and `γ`).
    pub weight: WeightSpec,
    /// Degree parameter `n`.
    pub n: usize,
    /// Number of Gauss nodes per `v` direction in the closed forms.
    pub quad_order: usize,
    /// Cutoff `â`.
    pub cutoff: CutoffFn,
    /// Decay exponent `κ` used by the envelopes.
    pub decay_kappa: f64,
    /// Maximal-function exponent `β`.
    pub decay_beta: f64,
}

impl KernelConfig {
    /// Defaults: `quad_order = 2n + 8` (exact for `L_n`), `κ = 6`, `β = 2`.
    pub fn new(weight: WeightSpec, n: usize) -> Result<Self> {
        weight.validate()?;
        let cfg = KernelConfig {
            weight,
            n,
            quad_order: 2 * n + 8,
            cutoff: CutoffFn,
            decay_kappa: 6.0,
            decay_beta: 2.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that the `v`-quadrature resolves `L_n`.
    pub fn validate(&self) -> Result<()> {
        if self.quad_order < 2 * self.n + 1 {
            return domain(format!(
                "quad_order {} < 2n + 1 = {}",
                self.quad_order,
                2 * self.n + 1
            ));
        }
        if !(self.decay_kappa > 0.0) {
            return domain("decay exponent κ must be positive");
        }
        Ok(())
    }

    /// `d` and `γ` of a surface or cone weight.
    fn d_gamma(&self) -> Result<(usize, f64)> {
        match self.weight {
            WeightSpec::Surface { d, gamma, .. } | WeightSpec::Cone { d, gamma, .. } => {
                Ok((d, gamma))
            }
            _ => Err(Error::Unsupported(
                "kernel envelopes are defined for the surface and the cone".into(),
            )),
        }
    }
}

/// `â(k/n)` for `k = 0..2n` (`L_n` has degree `≤ 2n − 1`).
fn cutoff_coefficients(cutoff: &CutoffFn, n: usize) -> Vec<f64> {
    cutoff.coefficients(n)
}

// ---------------------------------------------------------------------------
// Sum form
// ---------------------------------------------------------------------------

/// Kernels as sums over an orthonormal basis.
#[derive(Clone, Debug)]
pub struct SumKernel {
    basis: BasisHandle,
    degrees: Vec<usize>,
}

impl SumKernel {
    /// Kernels up to degree `max_degree` for `weight`.
    pub fn new(weight: WeightSpec, max_degree: usize) -> Result<Self> {
        let basis = BasisHandle::new(weight, max_degree)?;
        let degrees = basis.indices().iter().map(|i| i.n).collect();
        Ok(SumKernel { basis, degrees })
    }

    /// The underlying basis.
    pub fn basis(&self) -> &BasisHandle {
        &self.basis
    }

    fn check(&self, top: usize) -> Result<()> {
        if top > self.basis.max_degree() {
            return Err(Error::Index(format!(
                "degree {top} above the basis degree {}",
                self.basis.max_degree()
            )));
        }
        Ok(())
    }

    /// Coefficients of `y ↦ Σ_k c_k P_k(y, q)` in the basis.
    pub fn section(&self, c: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        self.check(c.len().saturating_sub(1))?;
        let vq = self.basis.eval_natural::<f64>(q);
        Ok(vq
            .iter()
            .zip(&self.degrees)
            .map(|(v, &k)| if k < c.len() { c[k] * v } else { 0.0 })
            .collect())
    }

    /// `Σ_k c_k P_k(p, q)`.
    pub fn weighted(&self, c: &[f64], p: &[f64], q: &[f64]) -> Result<f64> {
        self.check(c.len().saturating_sub(1))?;
        let vp = self.basis.eval_natural::<f64>(p);
        let vq = self.basis.eval_natural::<f64>(q);
        Ok(vp
            .iter()
            .zip(&vq)
            .zip(&self.degrees)
            .map(|((a, b), &k)| if k < c.len() { c[k] * a * b } else { 0.0 })
            .sum())
    }

    /// Projection kernel `P_k(p, q)`.
    pub fn projection(&self, k: usize, p: &[f64], q: &[f64]) -> Result<f64> {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        self.weighted(&c, p, q)
    }

    /// Localized kernel `L_n(p, q) = Σ_k â(k/n) P_k(p, q)`.
    pub fn localized(&self, cutoff: &CutoffFn, n: usize, p: &[f64], q: &[f64]) -> Result<f64> {
        self.weighted(&cutoff_coefficients(cutoff, n), p, q)
    }
}

/// `P_n(p, q)` from the orthonormal basis (builds the basis; prefer
/// [`SumKernel`] for repeated use).
pub fn repro_kernel_sum(cfg: &KernelConfig, p: &[f64], q: &[f64]) -> Result<f64> {
    SumKernel::new(cfg.weight, cfg.n)?.projection(cfg.n, p, q)
}

/// `L_n(p, q)` from the orthonormal basis.
pub fn localized_kernel(cfg: &KernelConfig, p: &[f64], q: &[f64]) -> Result<f64> {
    SumKernel::new(cfg.weight, (2 * cfg.n).saturating_sub(1))?.localized(&cfg.cutoff, cfg.n, p, q)
}

// ---------------------------------------------------------------------------
// Addition formulas
// ---------------------------------------------------------------------------

/// Normalized one-dimensional rule for `(1−v²)^a` on `[−1,1]`; the
/// non-integrable limit `a → −1` is the two-point mean at `v = ±1`.
fn v_rule(a: f64, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if (a + 1.0).abs() < 1e-12 {
        return Ok((vec![-1.0, 1.0], vec![0.5, 0.5]));
    }
    if a < -1.0 {
        return Err(Error::Unsupported(format!("v-weight exponent {a} < −1")));
    }
    let g = gauss_jacobi(&JacobiParams::new(a, a)?, k)?;
    let s: f64 = g.weights.iter().sum();
    Ok((g.nodes, g.weights.into_iter().map(|w| w / s).collect()))
}

/// Which closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdditionForm {
    /// `V₀^{d+1}` with `w_{−1,γ}`.
    Surface,
    /// `V^{d+1}` with `W_{0,γ}`.
    Cone,
}

/// Closed-form kernels via the addition formula.
#[derive(Clone, Debug)]
pub struct AdditionKernel {
    form: AdditionForm,
    d: usize,
    jac: JacobiParams,
    v1: (Vec<f64>, Vec<f64>),
    v2: (Vec<f64>, Vec<f64>),
    /// Calibration so that `P₀ = 1/M`.
    scale: f64,
    mass: f64,
}

impl AdditionKernel {
    /// Kernels on `V₀^{d+1}` for `w_{−1,γ}`, `d ∈ {2, 3}`, `γ ≥ −1/2`:
    /// `P_n = b ∫ Z_n^{(γ+d−3/2, −1/2)}(2ζ²−1) (1−v₁²)^{(d−4)/2}(1−v₂²)^{γ−1/2} dv`
    /// with `ζ = v₁√((ts + ⟨x,y⟩)/2) + v₂√(1−t)√(1−s)`.
    pub fn surface(d: usize, gamma: f64, quad_order: usize) -> Result<Self> {
        if !(2..=3).contains(&d) || gamma < -0.5 {
            return Err(Error::Unsupported(format!(
                "surface addition formula needs d ∈ {{2,3}}, γ ≥ −1/2 (d={d}, γ={gamma})"
            )));
        }
        let w = WeightSpec::Surface {
            d,
            beta: -1.0,
            gamma,
        };
        let mass = BasisHandle::new(w, 0)?.reference_rule(0)?.mass();
        Self::build(
            AdditionForm::Surface,
            d,
            gamma + d as f64 - 1.5,
            (d as f64 - 4.0) / 2.0,
            gamma,
            quad_order,
            mass,
            1.0,
        )
    }

    /// Kernels on `V^{d+1}` for `W_{0,γ}`, `d ∈ {1, 2}`, `γ ≥ −1/2`:
    /// `P_n = c ∫ [Z_n(2ξ₊²−1) + Z_n(2ξ₋²−1)] (1−v₁²)^{(d−3)/2}(1−v₂²)^{γ−1/2} dv`
    /// with `Z_n = Z_n^{(γ+d−1/2, −1/2)}` and
    /// `ξ_± = v₁√((ts + ⟨x,y⟩ ± √(t²−‖x‖²)√(s²−‖y‖²))/2) + v₂√(1−t)√(1−s)`.
    pub fn cone(d: usize, gamma: f64, quad_order: usize) -> Result<Self> {
        if !(1..=2).contains(&d) || gamma < -0.5 {
            return Err(Error::Unsupported(format!(
                "cone addition formula needs d ∈ {{1,2}}, γ ≥ −1/2 (d={d}, γ={gamma})"
            )));
        }
        let w = WeightSpec::Cone { d, mu: 0.0, gamma };
        let mass = BasisHandle::new(w, 0)?.reference_rule(0)?.mass();
        Self::build(
            AdditionForm::Cone,
            d,
            gamma + d as f64 - 0.5,
            (d as f64 - 3.0) / 2.0,
            gamma,
            quad_order,
            mass,
            2.0,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        form: AdditionForm,
        d: usize,
        lambda: f64,
        a1: f64,
        gamma: f64,
        k: usize,
        mass: f64,
        branches: f64,
    ) -> Result<Self> {
        let jac = JacobiParams::new(lambda, -0.5)?;
        let v1 = v_rule(a1, k)?;
        let v2 = v_rule(gamma - 0.5, k)?;
        // P₀ = scale · branches · Z₀ with normalized v-rules; Z₀ = 1/h₀
        let scale = jacobi_norm(&jac, 0) / (branches * mass);
        Ok(AdditionKernel {
            form,
            d,
            jac,
            v1,
            v2,
            scale,
            mass,
        })
    }

    /// Total mass `M` of the weight.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `(a, b)` with `ζ(v) = v₁ a + v₂ b`, one pair per branch.
    fn zeta_parts(&self, p: &[f64], q: &[f64]) -> Vec<(f64, f64)> {
        let d = self.d;
        let (x, t, y, s) = (&p[..d], p[d], &q[..d], q[d]);
        let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let b = ((1.0 - t).max(0.0) * (1.0 - s).max(0.0)).sqrt();
        match self.form {
            AdditionForm::Surface => vec![(((t * s + xy) / 2.0).max(0.0).sqrt(), b)],
            AdditionForm::Cone => {
                let gx = (t * t - x.iter().map(|v| v * v).sum::<f64>())
                    .max(0.0)
                    .sqrt();
                let gy = (s * s - y.iter().map(|v| v * v).sum::<f64>())
                    .max(0.0)
                    .sqrt();
                [1.0, -1.0]
                    .iter()
                    .map(|u| (((t * s + xy + u * gx * gy) / 2.0).max(0.0).sqrt(), b))
                    .collect()
            }
        }
    }

    /// `Σ_k c_k P_k(p, q)` (natural coordinates `(x, t)`).
    pub fn weighted(&self, c: &[f64], p: &[f64], q: &[f64]) -> Result<f64> {
        if p.len() != self.d + 1 || q.len() != self.d + 1 {
            return domain(format!("points need {} coordinates", self.d + 1));
        }
        let a_k = z_kernel_coefficients(&self.jac, c);
        let mut acc = 0.0;
        for (a, b) in self.zeta_parts(p, q) {
            for (v1, w1) in self.v1.0.iter().zip(&self.v1.1) {
                for (v2, w2) in self.v2.0.iter().zip(&self.v2.1) {
                    let z = v1 * a + v2 * b;
                    acc += w1
                        * w2
                        * jacobi_series(&self.jac, &a_k, (2.0 * z * z - 1.0).clamp(-1.0, 1.0));
                }
            }
        }
        Ok(self.scale * acc)
    }

    /// `P_k(p, q)`.
    pub fn projection(&self, k: usize, p: &[f64], q: &[f64]) -> Result<f64> {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        self.weighted(&c, p, q)
    }

    /// `L_n(p, q)`.
    pub fn localized(&self, cutoff: &CutoffFn, n: usize, p: &[f64], q: &[f64]) -> Result<f64> {
        self.weighted(&cutoff_coefficients(cutoff, n), p, q)
    }
}

/// `P_n(p, q)` on the conic surface by the addition formula.
pub fn repro_kernel_addition(cfg: &KernelConfig, p: &[f64], q: &[f64]) -> Result<f64> {
    match cfg.weight {
        WeightSpec::Surface {
            d,
            beta: -1.0,
            gamma,
        } => AdditionKernel::surface(d, gamma, cfg.quad_order)?.projection(cfg.n, p, q),
        _ => Err(Error::Unsupported(
            "the surface addition formula needs w_{−1,γ}".into(),
        )),
    }
}

/// `L_n(p, q)` on the cone with `μ = 0` by the closed form.
pub fn cone_kernel(cfg: &KernelConfig, p: &[f64], q: &[f64]) -> Result<f64> {
    match cfg.weight {
        WeightSpec::Cone { d, mu: 0.0, gamma } => {
            AdditionKernel::cone(d, gamma, cfg.quad_order)?.localized(&cfg.cutoff, cfg.n, p, q)
        }
        _ => Err(Error::Unsupported(
            "the cone closed form needs μ = 0".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Identities
// ---------------------------------------------------------------------------

/// The lift of a cone point `(x, t)` and its mirror, as surface points of
/// one dimension more.
pub fn lift_pair(p: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = p.len() - 1;
    let t = p[d];
    let gap = (t * t - p[..d].iter().map(|v| v * v).sum::<f64>())
        .max(0.0)
        .sqrt();
    let mut up = p[..d].to_vec();
    up.push(gap);
    up.push(t);
    let mut down = p[..d].to_vec();
    down.push(-gap);
    down.push(t);
    (up, down)
}

/// Both sides of `L_n^{cone}(p, q) = L_n^{surf}(X, Y) + L_n^{surf}(X, Y_*)`.
pub fn lift_identity(
    cone: &AdditionKernel,
    surface: &AdditionKernel,
    cutoff: &CutoffFn,
    n: usize,
    p: &[f64],
    q: &[f64],
) -> Result<(f64, f64)> {
    let lhs = cone.localized(cutoff, n, p, q)?;
    let (x, _) = lift_pair(p);
    let (y, ys) = lift_pair(q);
    let rhs = surface.localized(cutoff, n, &x, &y)? + surface.localized(cutoff, n, &x, &ys)?;
    Ok((lhs, rhs))
}

/// Largest deviation from reproduction: `max_{i,q} |∫ K(·, q) φ_i w − δ_i φ_i(q)|`,
/// where `K = Σ_k c_k P_k` is evaluated by `kernel`, `δ_i = c_{deg φ_i}`, and the
/// integral uses `rule` (exact for the products involved).
pub fn reproduction_residual(
    basis: &BasisHandle,
    c: &[f64],
    kernel: impl Fn(&[f64], &[f64]) -> Result<f64> + Sync,
    anchors: &[Vec<f64>],
    rule: &QuadratureRule,
) -> Result<f64> {
    let degrees: Vec<usize> = basis.indices().iter().map(|i| i.n).collect();
    let nodes: Vec<(Vec<f64>, f64, Vec<f64>)> = rule
        .iter()
        .map(|(x, w)| (x.to_vec(), w, basis.eval_natural::<f64>(x)))
        .collect();
    let worst: Vec<f64> = anchors
        .par_iter()
        .map(|q| {
            let mut acc = vec![0.0; basis.dim()];
            for (x, w, vals) in &nodes {
                let k = kernel(x, q)?;
                for (a, v) in acc.iter_mut().zip(vals) {
                    *a += w * k * v;
                }
            }
            let vq = basis.eval_natural::<f64>(q);
            Ok(acc
                .iter()
                .zip(&vq)
                .zip(&degrees)
                .map(|((a, v), &k)| (a - if k < c.len() { c[k] * v } else { 0.0 }).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// Random interior points of the surface or cone (natural coordinates),
/// `t` in `[margin, 1 − margin]`.
pub fn random_points(
    weight: &WeightSpec,
    count: usize,
    margin: f64,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let (d, solid) = match *weight {
        WeightSpec::Surface { d, .. } => (d, false),
        WeightSpec::Cone { d, .. } => (d, true),
        _ => {
            return Err(Error::Unsupported(
                "random points on the surface or cone only".into(),
            ))
        }
    };
    while out.len() < count {
        let t = margin + (1.0 - 2.0 * margin) * rng.gen::<f64>();
        let dir: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let r2: f64 = dir.iter().map(|v| v * v).sum();
        if !(r2 > 1e-6 && r2 <= 1.0) {
            continue;
        }
        let r = if solid {
            rng.gen::<f64>().powf(1.0 / d as f64) * (1.0 - margin)
        } else {
            1.0
        };
        let mut p: Vec<f64> = dir.iter().map(|v| v / r2.sqrt() * r * t).collect();
        p.push(t);
        out.push(p);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Decay
// ---------------------------------------------------------------------------

/// One row of a decay table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    /// Degree parameter.
    pub n: usize,
    /// Intrinsic distance between the pair.
    pub dist: f64,
    /// Kernel (or kernel derivative) magnitude.
    pub value: f64,
    /// Envelope.
    pub envelope: f64,
    /// `value / envelope`.
    pub ratio: f64,
}

/// Decay table with its largest ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    /// Rows, in probe order.
    pub rows: Vec<DecayRow>,
    /// Largest `value / envelope`.
    pub max_ratio: f64,
}

fn surface_d_gamma(cfg: &KernelConfig) -> Result<(usize, f64)> {
    match cfg.weight {
        WeightSpec::Surface { beta: -1.0, .. } => cfg.d_gamma(),
        _ => Err(Error::Unsupported(
            "decay envelopes are implemented for w_{−1,γ} on the surface".into(),
        )),
    }
}

/// `n^d / (√w(n;t) √w(n;s) (1 + n d)^κ)`.
fn base_envelope(
    n: usize,
    d: usize,
    gamma: f64,
    kappa: f64,
    t: f64,
    s: f64,
    dist: f64,
) -> Result<f64> {
    let nf = n as f64;
    let wt = ball_measure_proxy(n, t, gamma, d)?;
    let ws = ball_measure_proxy(n, s, gamma, d)?;
    Ok(nf.powi(d as i32) / (wt.sqrt() * ws.sqrt() * (1.0 + nf * dist).powf(kappa)))
}

fn assemble(rows: Vec<DecayRow>) -> DecayProfile {
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    DecayProfile { rows, max_ratio }
}

/// `|L_n(p, q)|` against `n^d / (√w(n;t)√w(n;s)(1 + n d(p,q))^κ)` for the
/// pairs `(anchor, probe)`, with `L_n` from the addition formula.
pub fn decay_profile(
    cfg: &KernelConfig,
    anchor: &[f64],
    probes: &[Vec<f64>],
) -> Result<DecayProfile> {
    let (d, gamma) = surface_d_gamma(cfg)?;
    let ker = AdditionKernel::surface(d, gamma, cfg.quad_order)?;
    let rows: Vec<DecayRow> = probes
        .par_iter()
        .map(|q| {
            let value = ker.localized(&cfg.cutoff, cfg.n, anchor, q)?.abs();
            let dist = surface_distance_raw(&anchor[..d], anchor[d], &q[..d], q[d]);
            let envelope = base_envelope(cfg.n, d, gamma, cfg.decay_kappa, anchor[d], q[d], dist)?;
            Ok(DecayRow {
                n: cfg.n,
                dist,
                value,
                envelope,
                ratio: value / envelope,
            })
        })
        .collect::<Result<_>>()?;
    Ok(assemble(rows))
}

/// Operator applied to the first argument of the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelDerivative {
    /// `∂_t` along rays.
    Dt,
    /// `D_{i,j}` (1-based).
    Dij {
        /// First index.
        i: usize,
        /// Second index.
        j: usize,
    },
}

impl KernelDerivative {
    fn diffop(self) -> DiffOp {
        match self {
            KernelDerivative::Dt => DiffOp::new(OpKind::Dt, 1, Multiplier::None),
            KernelDerivative::Dij { i, j } => {
                DiffOp::new(OpKind::Dij { i, j }, 1, Multiplier::None)
            }
        }
    }
}

/// `|T L_n(·, q)(p)|` (differentiating the sum form through the basis)
/// against `n^{d+1}/(φ(t) …)` for `∂_t` and `n^{d+1}√t/(…)` for `D_{i,j}`,
/// over `(p, q)` pairs.
pub fn derivative_decay_probe(
    cfg: &KernelConfig,
    kernel: &SumKernel,
    op: KernelDerivative,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<DecayProfile> {
    let (d, gamma) = surface_d_gamma(cfg)?;
    if kernel.basis().domain() != BasisDomain::Surface
        || kernel.basis().max_degree() + 1 < 2 * cfg.n
    {
        return domain("derivative probe needs a surface basis of degree ≥ 2n − 1");
    }
    let coeffs = cutoff_coefficients(&cfg.cutoff, cfg.n);
    let dop = op.diffop();
    let nf = cfg.n as f64;
    let rows: Vec<DecayRow> = pairs
        .par_iter()
        .map(|(p, q)| {
            let sec = kernel.section(&coeffs, q)?;
            let comb = Combination {
                basis: kernel.basis(),
                coeffs: &sec,
            };
            let value = match apply_diffop(&dop, &comb, p)? {
                OpValues::Finite(v) => v[0].abs(),
                OpValues::Singular => {
                    return Err(Error::Numeric("singular kernel derivative".into()))
                }
            };
            let (t, s) = (p[d], q[d]);
            let dist = surface_distance_raw(&p[..d], t, &q[..d], s);
            let factor = match op {
                KernelDerivative::Dt => nf / (t * (1.0 - t)).sqrt(),
                KernelDerivative::Dij { .. } => nf * t.sqrt(),
            };
            let envelope = factor * base_envelope(cfg.n, d, gamma, cfg.decay_kappa, t, s, dist)?;
            Ok(DecayRow {
                n: cfg.n,
                dist,
                value,
                envelope,
                ratio: value / envelope,
            })
        })
        .collect::<Result<_>>()?;
    Ok(assemble(rows))
}

/// Bounded-ratio criterion over a doubling `n`-sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySweep {
    /// Degrees.
    pub ns: Vec<usize>,
    /// Largest ratio at each degree.
    pub max_ratios: Vec<f64>,
    /// `max ratio at the last n ≤ 3 × max ratio at the first n`.
    pub bounded: bool,
}

impl DecaySweep {
    fn from(ns: &[usize], max_ratios: Vec<f64>) -> Self {
        let bounded = match (max_ratios.first(), max_ratios.last()) {
            (Some(a), Some(b)) => b.is_finite() && *b <= 3.0 * a,
            _ => false,
        };
        DecaySweep {
            ns: ns.to_vec(),
            max_ratios,
            bounded,
        }
    }
}

/// Random probe pairs on `V₀^{d+1}` with `t, s ∈ [margin, 1 − margin]`.
pub fn probe_pairs(
    d: usize,
    count: usize,
    margin: f64,
    seed: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let w = WeightSpec::Surface {
        d,
        beta: -1.0,
        gamma: 0.0,
    };
    let a = random_points(&w, count, margin, seed)?;
    let b = random_points(&w, count, margin, seed.wrapping_add(1))?;
    Ok(a.into_iter().zip(b).collect())
}

/// `|L_n(p, q)|` against its envelope over `(p, q)` pairs.
pub fn pair_decay_profile(
    cfg: &KernelConfig,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<DecayProfile> {
    let (d, gamma) = surface_d_gamma(cfg)?;
    let ker = AdditionKernel::surface(d, gamma, cfg.quad_order)?;
    let rows: Vec<DecayRow> = pairs
        .par_iter()
        .map(|(p, q)| {
            let value = ker.localized(&cfg.cutoff, cfg.n, p, q)?.abs();
            let dist = surface_distance_raw(&p[..d], p[d], &q[..d], q[d]);
            let envelope = base_envelope(cfg.n, d, gamma, cfg.decay_kappa, p[d], q[d], dist)?;
            Ok(DecayRow {
                n: cfg.n,
                dist,
                value,
                envelope,
                ratio: value / envelope,
            })
        })
        .collect::<Result<_>>()?;
    Ok(assemble(rows))
}

/// Kernel decay sweep: max ratio of `|L_n|` to its envelope for each `n`
/// over the same probe pairs.
pub fn decay_sweep(
    weight: WeightSpec,
    ns: &[usize],
    pairs: &[(Vec<f64>, Vec<f64>)],
    kappa: f64,
) -> Result<DecaySweep> {
    let mut maxes = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut cfg = KernelConfig::new(weight, n)?;
        cfg.decay_kappa = kappa;
        maxes.push(pair_decay_profile(&cfg, pairs)?.max_ratio);
    }
    Ok(DecaySweep::from(ns, maxes))
}

/// Derivative decay sweep for `∂_t` or `D_{i,j}`.
pub fn derivative_decay_sweep(
    weight: WeightSpec,
    op: KernelDerivative,
    ns: &[usize],
    pairs: &[(Vec<f64>, Vec<f64>)],
    kappa: f64,
) -> Result<DecaySweep> {
    let mut maxes = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut cfg = KernelConfig::new(weight, n)?;
        cfg.decay_kappa = kappa;
        let ker = SumKernel::new(weight, 2 * n - 1)?;
        maxes.push(derivative_decay_probe(&cfg, &ker, op, pairs)?.max_ratio);
    }
    Ok(DecaySweep::from(ns, maxes))
}

/// Apex behaviour of the angular derivative along one ray.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApexSlope {
    /// Heights `t = 2^{−k}`.
    pub ts: Vec<f64>,
    /// `max_q |D_{i,j} L_n((tξ, t), q)|` at each height.
    pub values: Vec<f64>,
    /// Log-log slope of `values` against `ts`.
    pub slope: f64,
}

/// `max_q |D_{i,j} L_n((tξ, t), q)|` over the targets `qs` for
/// `t = 2^{−k}`, `k ∈ ks`, and its log-log slope in `t`.
#[allow(clippy::too_many_arguments)]
pub fn angular_derivative_apex_slope(
    kernel: &SumKernel,
    cutoff: &CutoffFn,
    n: usize,
    i: usize,
    j: usize,
    xi: &[f64],
    qs: &[Vec<f64>],
    ks: &[i32],
) -> Result<ApexSlope> {
    let coeffs = cutoff_coefficients(cutoff, n);
    let sections: Vec<Vec<f64>> = qs
        .iter()
        .map(|q| kernel.section(&coeffs, q))
        .collect::<Result<_>>()?;
    let op = DiffOp::new(OpKind::Dij { i, j }, 1, Multiplier::None);
    let ts: Vec<f64> = ks.iter().map(|&k| 2f64.powi(-k)).collect();
    let values: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            let mut p: Vec<f64> = xi.iter().map(|v| v * t).collect();
            p.push(t);
            let mut m = 0.0f64;
            for sec in &sections {
                let comb = Combination {
                    basis: kernel.basis(),
                    coeffs: sec,
                };
                let v = apply_diffop(&op, &comb, &p)?
                    .finite()
                    .ok_or_else(|| Error::Numeric("singular value".into()))?[0];
                m = m.max(v.abs());
            }
            Ok(m)
        })
        .collect::<Result<_>>()?;
    let (slope, _) = crate::bernstein::loglog_fit(&ts, &values)?;
    Ok(ApexSlope { ts, values, slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn addition_matches_sum_small() {
        let w = WeightSpec::Surface {
            d: 3,
            beta: -1.0,
            gamma: 0.0,
        };
        let sum = SumKernel::new(w, 4).unwrap();
        let add = AdditionKernel::surface(3, 0.0, 16).unwrap();
        let pts = random_points(&w, 6, 0.01, 3).unwrap();
        for p in &pts {
            for q in &pts {
                for k in 0..=4 {
                    let a = sum.projection(k, p, q).unwrap();
                    let b = add.projection(k, p, q).unwrap();
                    let scale = (sum.projection(k, p, p).unwrap()
                        * sum.projection(k, q, q).unwrap())
                    .sqrt();
                    assert!((a - b).abs() <= 1e-10 * scale, "k={k}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn d2_limit_form_matches_sum() {
        let w = WeightSpec::Surface {
            d: 2,
            beta: -1.0,
            gamma: 0.5,
        };
        let sum = SumKernel::new(w, 5).unwrap();
        let add = AdditionKernel::surface(2, 0.5, 16).unwrap();
        let pts = random_points(&w, 5, 0.01, 4).unwrap();
        for p in &pts {
            for q in &pts {
                let a = sum.localized(&CutoffFn, 3, p, q).unwrap();
                let b = add.localized(&CutoffFn, 3, p, q).unwrap();
                assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }
}

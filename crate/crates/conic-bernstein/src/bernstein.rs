//! Sharp `L²` Bernstein constants from Gram eigenproblems, growth-exponent
//! fits, weighted norms, the apex divergence probe and the maximal function.
//!
//! For an operator `T` and an orthonormal basis `{φ_i}` of `Π_n`, the sharp
//! constant `sup ‖Tf‖₂ / ‖f‖₂` is the square root of the largest eigenvalue of
//! the Gram matrix `G_{ij} = ⟨Tφ_i, Tφ_j⟩`.  Two engines assemble `G`:
//!
//! * the **separable engine** (interval, conic surface, cone): every basis
//!   element is `g_{m,j}(t) F_{m,l}(u)` with `x = t u`, and every supported
//!   operator is a short sum of products of a radial operator and a fiber
//!   operator, so `G` is a sum of entrywise products of small radial and fiber
//!   Gram blocks.  Apex singularities are detected a priori from the exponent
//!   of `t` in each radial integral.
//! * the **dense engine** (triangle, and cross-checks): `Tφ_i` is evaluated at
//!   the nodes of an exact quadrature rule and `G = V W Vᵀ`.
//!
//! Large Gram matrices are split into independent blocks (the fiber coupling
//! graph's connected components) and the largest eigenvalue of each block is
//! computed with Lanczos iteration with full reorthogonalization.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::{BasisDomain, BasisHandle, BasisIndex, Fiber};
use crate::error::{domain, Error, Result};
use crate::geometry::{
    dist_cone, dist_interval, dist_surface, triangle_map, ConicPoint, WeightSpec,
};
use crate::operators::{
    along, apply_diffop, directional_derivative, rotational_derivative, DiffOp, Multiplier, OpKind,
    OpValues, PolyFamily,
};
use crate::quadrature::{self, Collapse, QuadratureRule};
use crate::scalar::{Jet, Scalar};

pub use crate::sampling::{
    mz_certify, mz_certify_with_set, remez_certify, remez_sup_certify, MzCertificate,
    RemezCertificate, RemezRegion, StabilitySweep,
};

/// Degree ladder used for growth fits.
pub const DEGREE_LADDER: [usize; 8] = [8, 12, 16, 20, 24, 32, 40, 48];

/// A fitted exponent passes if it is within this distance of the claim.
pub const EXPONENT_TOLERANCE: f64 = 0.2;

/// Blocks up to this size are diagonalized densely; larger ones by Lanczos.
const DENSE_BLOCK_LIMIT: usize = 600;

/// Relative threshold below which a fiber Gram entry counts as zero.
const FIBER_ZERO: f64 = 1e-10;

/// A sharp constant, or the flag that the defining integrals diverge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum ConstantValue {
    /// `sup ‖Tf‖ / ‖f‖` over `Π_n`.
    Finite(f64),
    /// Some `‖Tf‖` is infinite.
    Divergent,
}

impl ConstantValue {
    /// The finite value, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            ConstantValue::Finite(v) => Some(v),
            ConstantValue::Divergent => None,
        }
    }
}

/// Sharp constant with the extremal polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpConstant {
    /// The constant or the divergence flag.
    pub value: ConstantValue,
    /// Coefficients (in the orthonormal basis of `Π_n`) of a unit-norm
    /// extremal polynomial; empty when divergent.
    pub extremal: Vec<f64>,
}

/// Dense Gram matrix `⟨Tφ_i, Tφ_j⟩` in the orthonormal basis of `Π_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramSystem {
    /// Degree `n`.
    pub n: usize,
    /// Weight.
    pub weight: WeightSpec,
    /// Operator `T`.
    pub operator: DiffOp,
    /// Matrix size `dim Π_n`.
    pub dim: usize,
    /// Row-major entries.
    pub matrix: Vec<f64>,
}

impl GramSystem {
    /// Entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }

    /// `max |G_ij − G_ji|`.
    pub fn symmetry_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Trace.
    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.matrix);
        let m = (&m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `√λ_max`, the sharp constant.
    pub fn sharp_constant(&self) -> f64 {
        self.eigenvalues()
            .last()
            .copied()
            .unwrap_or(0.0)
            .max(0.0)
            .sqrt()
    }
}

// ---------------------------------------------------------------------------
// Separable engine
// ---------------------------------------------------------------------------

/// Radial factor `t^{a/2} (1−t)^{b/2} (d/dt)^k` of a separable term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct RadialOp {
    a: i32,
    b: i32,
    k: usize,
}

/// Fiber factor of a separable term, acting on `F(u)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum FiberOp {
    Identity,
    Rot { i: usize, j: usize, order: usize },
    Partial { j: usize, order: usize },
    Euler,
}

/// `coef · [t-part](g) · (1−‖u‖²)^{c/2} [fiber part](F)`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Term {
    coef: f64,
    radial: RadialOp,
    c: i32,
    fiber: FiberOp,
}

/// Decomposes `op` into separable terms, or `None` if the separable engine
/// does not cover it.
fn separable_terms(dom: BasisDomain, op: &DiffOp) -> Option<Vec<Term>> {
    let l = op.power as i32;
    let (ma, mb, mc) = match op.multiplier {
        Multiplier::None => (0, 0, 0),
        Multiplier::Phi => (l, l, 0),
        Multiplier::TInvSqrt => (-l, 0, 0),
        Multiplier::BigPhi => (2 * l, 0, l),
        Multiplier::TInvSqrtBigPhi => (l, 0, l),
        _ => return None,
    };
    let single = |radial: RadialOp, c: i32, fiber: FiberOp| {
        Some(vec![Term {
            coef: 1.0,
            radial,
            c,
            fiber,
        }])
    };
    match (dom, op.kind) {
        (BasisDomain::Triangle, _) => None,
        (_, OpKind::Dt) => single(
            RadialOp {
                a: ma,
                b: mb,
                k: op.power,
            },
            mc,
            FiberOp::Identity,
        ),
        (BasisDomain::Surface | BasisDomain::Cone, OpKind::Dij { i, j }) => single(
            RadialOp { a: ma, b: mb, k: 0 },
            mc,
            FiberOp::Rot {
                i: i - 1,
                j: j - 1,
                order: op.power,
            },
        ),
        (BasisDomain::Cone, OpKind::Dx { j }) => single(
            RadialOp {
                a: ma - 2 * l,
                b: mb,
                k: 0,
            },
            mc,
            FiberOp::Partial {
                j: j - 1,
                order: op.power,
            },
        ),
        (BasisDomain::Cone, OpKind::DtCartesian) if op.power == 1 => Some(vec![
            Term {
                coef: 1.0,
                radial: RadialOp { a: ma, b: mb, k: 1 },
                c: mc,
                fiber: FiberOp::Identity,
            },
            Term {
                coef: -1.0,
                radial: RadialOp {
                    a: ma - 2,
                    b: mb,
                    k: 0,
                },
                c: mc,
                fiber: FiberOp::Euler,
            },
        ]),
        _ => None,
    }
}

/// The normalized fiber functions `F_{m,l}(u)` of a basis, as a family.
struct FiberFns<'a>(&'a BasisHandle);

impl PolyFamily for FiberFns<'_> {
    fn len(&self) -> usize {
        (0..=self.0.max_degree())
            .map(|m| self.0.fiber().dim(m))
            .sum()
    }

    fn domain(&self) -> BasisDomain {
        self.0.domain()
    }

    fn coords(&self) -> usize {
        self.0.x_coords()
    }

    fn eval<S: Scalar>(&self, u: &[S]) -> Vec<S> {
        self.0
            .fiber_factors(u, S::one())
            .into_iter()
            .flatten()
            .collect()
    }
}

fn fiber_op_values(fam: &FiberFns<'_>, op: FiberOp, u: &[f64]) -> Result<Vec<f64>> {
    match op {
        FiberOp::Identity => Ok(fam.eval(u)),
        FiberOp::Rot { i, j, order } => rotational_derivative(fam, u, i, j, order),
        FiberOp::Partial { j, order } => {
            let mut e = vec![0.0; u.len()];
            e[j] = 1.0;
            directional_derivative(fam, u, &e, order)
        }
        FiberOp::Euler => Ok(along::<_, 2>(fam, u, u).into_iter().map(|a| a[1]).collect()),
    }
}

/// `g^{(k)}_{m,j}(t)` with `g_{m,j} = t^m q_{m,j}`, for every `m` and `j`.
fn radial_values_k<const K: usize>(h: &BasisHandle, t: f64, k: usize) -> Vec<Vec<f64>> {
    let tj = Jet::<f64, K>::variable(t);
    let mut pw = Jet::<f64, K>::constant(1.0);
    let mut out = Vec::with_capacity(h.max_degree() + 1);
    for m in 0..=h.max_degree() {
        if m > 0 {
            pw *= tj;
        }
        if h.fiber().dim(m) == 0 {
            out.push(Vec::new());
            continue;
        }
        out.push(
            h.t_factors(m, tj)
                .into_iter()
                .map(|q| (q * pw).derivative(k))
                .collect(),
        );
    }
    out
}

fn radial_values(h: &BasisHandle, t: f64, k: usize) -> Result<Vec<Vec<f64>>> {
    Ok(match k {
        0 => radial_values_k::<1>(h, t, 0),
        1 => radial_values_k::<2>(h, t, 1),
        2 => radial_values_k::<3>(h, t, 2),
        3 => radial_values_k::<4>(h, t, 3),
        4 => radial_values_k::<5>(h, t, 4),
        5 => radial_values_k::<6>(h, t, 5),
        6 => radial_values_k::<7>(h, t, 6),
        7 => radial_values_k::<8>(h, t, 7),
        8 => radial_values_k::<9>(h, t, 8),
        _ => return Err(Error::Unsupported(format!("radial derivative order {k}"))),
    })
}

/// Fiber quadrature for the measure of `h` times `(1−‖u‖²)^{c/2}`, exact
/// for degree `deg`.  `None` for the trivial (point) fiber.
fn fiber_rule(h: &BasisHandle, c: i32, deg: usize) -> Result<Option<QuadratureRule>> {
    match h.fiber() {
        Fiber::Point => Ok(None),
        Fiber::Sphere { d } => {
            if c != 0 {
                return domain("lateral multipliers are not defined on the conic surface");
            }
            Ok(Some(quadrature::sphere(d, deg)?))
        }
        Fiber::Ball { d, mu } => Ok(Some(quadrature::ball(d, mu + 0.5 * c as f64, deg)?)),
        Fiber::Segment { .. } => Err(Error::Unsupported(
            "separable engine on the triangle".into(),
        )),
    }
}

/// `A Bᵀ` computed by row blocks in parallel (deterministic).
fn par_mul_transpose(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    const BLOCK: usize = 64;
    let rows = a.nrows();
    let blocks: Vec<DMatrix<f64>> = (0..rows.div_ceil(BLOCK))
        .into_par_iter()
        .map(|bi| {
            let r0 = bi * BLOCK;
            let len = BLOCK.min(rows - r0);
            a.rows(r0, len) * b.transpose()
        })
        .collect();
    let mut out = DMatrix::zeros(rows, b.nrows());
    for (bi, blk) in blocks.into_iter().enumerate() {
        out.rows_mut(bi * BLOCK, blk.nrows()).copy_from(&blk);
    }
    out
}

/// Weight, radial Gram block and per-fiber blocks of one pair of terms.
type TermPair = (f64, DMatrix<f64>, Vec<Vec<Option<DMatrix<f64>>>>);

/// Assembled separable Gram structure.
struct Separable {
    /// Fiber nodes `(m, l)` in order.
    fnodes: Vec<(usize, usize)>,
    /// Number of radial functions per `m` (`N − m + 1`).
    jdim: Vec<usize>,
    /// `(coef_r coef_r', F^{rr'}, T^{rr'}[m][m'])` for every term pair.
    pairs: Vec<TermPair>,
    /// Largest diagonal fiber entry, for zero thresholds.
    fscale: f64,
}

fn build_separable(h: &BasisHandle, terms: &[Term]) -> Result<std::result::Result<Separable, ()>> {
    let n = h.max_degree();
    let fib = h.fiber();
    let fnodes: Vec<(usize, usize)> = (0..=n)
        .flat_map(|m| (0..fib.dim(m)).map(move |l| (m, l)))
        .collect();
    let nf = fnodes.len();
    let jdim: Vec<usize> = (0..=n)
        .map(|m| if fib.dim(m) > 0 { n - m + 1 } else { 0 })
        .collect();
    let fam = FiberFns(h);
    let deg_fiber = 2 * n + 2;

    // Fiber Gram blocks for every term pair.
    let mut fmats = Vec::with_capacity(terms.len() * terms.len());
    for r in terms {
        for rp in terms {
            let f = match fiber_rule(h, r.c + rp.c, deg_fiber)? {
                None => {
                    let a = fiber_op_values(&fam, r.fiber, &[])?;
                    let b = fiber_op_values(&fam, rp.fiber, &[])?;
                    DMatrix::from_fn(nf, nf, |i, j| a[i] * b[j])
                }
                Some(rule) => {
                    let nodes: Vec<&[f64]> = rule.iter().map(|(u, _)| u).collect();
                    let cols = |op: FiberOp| -> Result<Vec<Vec<f64>>> {
                        nodes
                            .par_iter()
                            .map(|u| fiber_op_values(&fam, op, u))
                            .collect()
                    };
                    let va = cols(r.fiber)?;
                    let vb = cols(rp.fiber)?;
                    let nq = nodes.len();
                    let a = DMatrix::from_fn(nf, nq, |i, q| va[q][i]);
                    let b = DMatrix::from_fn(nf, nq, |i, q| vb[q][i] * rule.weights[q]);
                    par_mul_transpose(&a, &b)
                }
            };
            fmats.push(f);
        }
    }
    let nt = terms.len();
    let fscale = (0..nt)
        .flat_map(|r| {
            let f = &fmats[r * nt + r];
            (0..nf).map(move |i| f[(i, i)].abs())
        })
        .fold(0.0, f64::max);
    let zero = FIBER_ZERO * fscale.max(f64::MIN_POSITIVE);
    let mut foff = vec![0usize; n + 2];
    for m in 0..=n {
        foff[m + 1] = foff[m] + fib.dim(m);
    }
    let block_nonzero = |f: &DMatrix<f64>, m: usize, mp: usize| -> bool {
        (foff[m]..foff[m + 1]).any(|i| (foff[mp]..foff[mp + 1]).any(|j| f[(i, j)].abs() > zero))
    };

    // Radial Gram blocks.
    let delta = h.t_exponent();
    let gamma = h.gamma();
    let mut pairs = Vec::with_capacity(nt * nt);
    for (ri, r) in terms.iter().enumerate() {
        for (rpi, rp) in terms.iter().enumerate() {
            let fm = fmats[ri * nt + rpi].clone();
            let e = delta + 0.5 * (r.radial.a + rp.radial.a) as f64;
            let e1 = gamma + 0.5 * (r.radial.b + rp.radial.b) as f64;
            let mut s0 = 0usize;
            while e + (s0 as f64) <= -1.0 + 1e-12 {
                s0 += 1;
            }
            let rule = quadrature::unit_interval(e + s0 as f64, e1, n + 4)?;
            let tn: Vec<f64> = rule.iter().map(|(t, _)| t[0]).collect();
            let va: Vec<Vec<Vec<f64>>> = tn
                .par_iter()
                .map(|&t| radial_values(h, t, r.radial.k))
                .collect::<Result<_>>()?;
            let vb: Vec<Vec<Vec<f64>>> = tn
                .par_iter()
                .map(|&t| radial_values(h, t, rp.radial.k))
                .collect::<Result<_>>()?;
            let shift = |m: usize, k: usize| m.saturating_sub(k);
            let mut blocks: Vec<Vec<Option<DMatrix<f64>>>> = vec![vec![None; n + 1]; n + 1];
            let mut jobs = Vec::new();
            for m in 0..=n {
                for mp in 0..=n {
                    if jdim[m] == 0 || jdim[mp] == 0 || !block_nonzero(&fm, m, mp) {
                        continue;
                    }
                    if shift(m, r.radial.k) + shift(mp, rp.radial.k) < s0 {
                        return Ok(Err(()));
                    }
                    jobs.push((m, mp));
                }
            }
            let computed: Vec<(usize, usize, DMatrix<f64>)> = jobs
                .par_iter()
                .map(|&(m, mp)| {
                    let s1 = shift(m, r.radial.k).min(s0);
                    let s2 = s0 - s1;
                    let mut blk = DMatrix::zeros(jdim[m], jdim[mp]);
                    for (q, (&t, w)) in tn.iter().zip(&rule.weights).enumerate() {
                        let sa = w / t.powi(s1 as i32);
                        let sb = 1.0 / t.powi(s2 as i32);
                        for j in 0..jdim[m] {
                            let aj = va[q][m][j] * sa;
                            for jp in 0..jdim[mp] {
                                blk[(j, jp)] += aj * vb[q][mp][jp] * sb;
                            }
                        }
                    }
                    (m, mp, blk)
                })
                .collect();
            for (m, mp, blk) in computed {
                blocks[m][mp] = Some(blk);
            }
            pairs.push((r.coef * rp.coef, fm, blocks));
        }
    }
    Ok(Ok(Separable {
        fnodes,
        jdim,
        pairs,
        fscale,
    }))
}

impl Separable {
    fn zero(&self) -> f64 {
        FIBER_ZERO * self.fscale.max(f64::MIN_POSITIVE)
    }

    /// Connected components of the fiber coupling graph, skipping nodes
    /// annihilated by the operator.
    fn components(&self) -> Vec<Vec<usize>> {
        let nf = self.fnodes.len();
        let zero = self.zero();
        let mut parent: Vec<usize> = (0..nf).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let active: Vec<bool> = (0..nf)
            .map(|i| {
                self.pairs.iter().any(|(_, f, _)| f[(i, i)].abs() > zero)
                    && self.jdim[self.fnodes[i].0] > 0
            })
            .collect();
        for (_, f, _) in &self.pairs {
            for i in 0..nf {
                for j in i + 1..nf {
                    if active[i] && active[j] && (f[(i, j)].abs() > zero || f[(j, i)].abs() > zero)
                    {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> =
            std::collections::BTreeMap::new();
        for i in 0..nf {
            if active[i] {
                let root = find(&mut parent, i);
                groups.entry(root).or_default().push(i);
            }
        }
        groups.into_values().collect()
    }

    /// Dense matrix of one component, indexed by `(node, j)` pairs in the
    /// order of `comp`.
    fn dense_component(&self, comp: &[usize]) -> DMatrix<f64> {
        let offs = self.offsets(comp);
        let dim = *offs.last().unwrap_or(&0);
        let mut g = DMatrix::zeros(dim, dim);
        for (ci, &i) in comp.iter().enumerate() {
            let m = self.fnodes[i].0;
            for (cj, &ip) in comp.iter().enumerate() {
                let mp = self.fnodes[ip].0;
                for (coef, f, blocks) in &self.pairs {
                    let fv = f[(i, ip)];
                    if fv == 0.0 {
                        continue;
                    }
                    if let Some(t) = &blocks[m][mp] {
                        for j in 0..self.jdim[m] {
                            for jp in 0..self.jdim[mp] {
                                g[(offs[ci] + j, offs[cj] + jp)] += coef * fv * t[(j, jp)];
                            }
                        }
                    }
                }
            }
        }
        (&g + g.transpose()) * 0.5
    }

    fn offsets(&self, comp: &[usize]) -> Vec<usize> {
        let mut offs = Vec::with_capacity(comp.len() + 1);
        offs.push(0);
        for &i in comp {
            offs.push(offs.last().unwrap() + self.jdim[self.fnodes[i].0]);
        }
        offs
    }

    /// Structured product `G v` on one component.
    fn matvec_component(&self, comp: &[usize], offs: &[usize], v: &[f64]) -> Vec<f64> {
        // group component nodes by m
        let mut by_m: std::collections::BTreeMap<usize, Vec<usize>> =
            std::collections::BTreeMap::new();
        for (ci, &i) in comp.iter().enumerate() {
            by_m.entry(self.fnodes[i].0).or_default().push(ci);
        }
        let ms: Vec<(usize, Vec<usize>)> = by_m.into_iter().collect();
        let parts: Vec<Vec<(usize, Vec<f64>)>> = ms
            .par_iter()
            .map(|(m, targets)| {
                let jm = self.jdim[*m];
                let mut out: Vec<Vec<f64>> = vec![vec![0.0; jm]; targets.len()];
                for (coef, f, blocks) in &self.pairs {
                    for (mp, sources) in &ms {
                        let Some(t) = &blocks[*m][*mp] else { continue };
                        let jmp = self.jdim[*mp];
                        for &cs in sources {
                            let src = &v[offs[cs]..offs[cs] + jmp];
                            let ip = comp[cs];
                            // u = T src
                            let mut u = vec![0.0; jm];
                            for (j, uj) in u.iter_mut().enumerate() {
                                let mut acc = 0.0;
                                for (jp, s) in src.iter().enumerate() {
                                    acc += t[(j, jp)] * s;
                                }
                                *uj = acc;
                            }
                            for (slot, &ct) in out.iter_mut().zip(targets) {
                                let fv = f[(comp[ct], ip)];
                                if fv == 0.0 {
                                    continue;
                                }
                                let s = coef * fv;
                                for (o, uj) in slot.iter_mut().zip(&u) {
                                    *o += s * uj;
                                }
                            }
                        }
                    }
                }
                targets.iter().copied().zip(out).collect()
            })
            .collect();
        let mut res = vec![0.0; v.len()];
        for part in parts {
            for (ct, vals) in part {
                res[offs[ct]..offs[ct] + vals.len()].copy_from_slice(&vals);
            }
        }
        res
    }
}

/// Largest eigenpair of a symmetric operator given by its action, by
/// Lanczos iteration with full reorthogonalization from a fixed start vector.
pub fn lanczos_largest(dim: usize, matvec: impl Fn(&[f64]) -> Vec<f64>) -> Result<(f64, Vec<f64>)> {
    if dim == 0 {
        return Ok((0.0, Vec::new()));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let max_it = dim.min(800);
    let mut v: Vec<f64> = (0..dim)
        .map(|i| 1.0 + 0.5 * (0.754_877_666 * (i as f64 + 1.0)).sin())
        .collect();
    let nv = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    loop {
        basis.push(v.clone());
        let mut w = matvec(&v);
        alpha.push(dot(&w, &v));
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(&w, &w).sqrt();
        let k = alpha.len();
        let breakdown = b
            <= 1e-14
                * alpha
                    .iter()
                    .fold(0.0f64, |a, x| a.max(x.abs()))
                    .max(f64::MIN_POSITIVE);
        if k.is_multiple_of(4) || breakdown || k == max_it {
            let t = DMatrix::from_fn(k, k, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let (imax, theta) = eig.eigenvalues.iter().copied().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, x)| if x > acc.1 { (i, x) } else { acc },
            );
            let s = eig.eigenvectors.column(imax);
            let resid = b * s[k - 1].abs();
            let scale = theta.abs().max(f64::MIN_POSITIVE);
            if breakdown || resid <= 1e-11 * scale || k == max_it {
                if !breakdown && resid > 1e-6 * scale {
                    return Err(Error::Numeric(format!(
                        "Lanczos did not converge (residual {resid:e})"
                    )));
                }
                let mut x = vec![0.0; dim];
                for (q, &c) in basis.iter().zip(s.iter()) {
                    x.iter_mut().zip(q).for_each(|(a, b)| *a += c * b);
                }
                return Ok((theta, x));
            }
        }
        beta.push(b);
        v = w.into_iter().map(|x| x / b).collect();
    }
}

fn top_eigen_dense(g: DMatrix<f64>) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(g);
    let (imax, theta) =
        eig.eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, x)| if x > acc.1 { (i, x) } else { acc },
            );
    (
        theta,
        eig.eigenvectors.column(imax).iter().copied().collect(),
    )
}

fn separable_sharp(h: &BasisHandle, terms: &[Term]) -> Result<SharpConstant> {
    let sep = match build_separable(h, terms)? {
        Ok(s) => s,
        Err(()) => {
            return Ok(SharpConstant {
                value: ConstantValue::Divergent,
                extremal: Vec::new(),
            })
        }
    };
    let comps = sep.components();
    let results: Vec<(f64, Vec<f64>)> = comps
        .iter()
        .map(|comp| {
            let offs = sep.offsets(comp);
            let dim = *offs.last().unwrap();
            if dim <= DENSE_BLOCK_LIMIT {
                Ok(top_eigen_dense(sep.dense_component(comp)))
            } else {
                lanczos_largest(dim, |v| sep.matvec_component(comp, &offs, v))
            }
        })
        .collect::<Result<_>>()?;
    let mut best = (0.0f64, usize::MAX);
    for (ci, (lam, _)) in results.iter().enumerate() {
        if *lam > best.0 || best.1 == usize::MAX {
            best = (*lam, ci);
        }
    }
    let mut extremal = vec![0.0; h.dim()];
    if best.1 != usize::MAX {
        let comp = &comps[best.1];
        let offs = sep.offsets(comp);
        let vec = &results[best.1].1;
        for (ci, &i) in comp.iter().enumerate() {
            let (m, l) = sep.fnodes[i];
            for j in 0..sep.jdim[m] {
                if let Some(pos) = h.position(BasisIndex { n: m + j, m, l }) {
                    extremal[pos] = vec[offs[ci] + j];
                }
            }
        }
    }
    Ok(SharpConstant {
        value: ConstantValue::Finite(best.0.max(0.0).sqrt()),
        extremal,
    })
}

fn separable_full(h: &BasisHandle, terms: &[Term]) -> Result<Option<Vec<f64>>> {
    let sep = match build_separable(h, terms)? {
        Ok(s) => s,
        Err(()) => return Ok(None),
    };
    let dim = h.dim();
    let pos: Vec<Vec<usize>> = sep
        .fnodes
        .iter()
        .map(|&(m, l)| {
            (0..sep.jdim[m])
                .map(|j| {
                    h.position(BasisIndex { n: m + j, m, l })
                        .expect("index in basis")
                })
                .collect()
        })
        .collect();
    let mut g = vec![0.0; dim * dim];
    for (i, &(m, _)) in sep.fnodes.iter().enumerate() {
        for (ip, &(mp, _)) in sep.fnodes.iter().enumerate() {
            for (coef, f, blocks) in &sep.pairs {
                let fv = f[(i, ip)];
                if let Some(t) = &blocks[m][mp] {
                    for j in 0..sep.jdim[m] {
                        for jp in 0..sep.jdim[mp] {
                            g[pos[i][j] * dim + pos[ip][jp]] += coef * fv * t[(j, jp)];
                        }
                    }
                }
            }
        }
    }
    Ok(Some(g))
}

// ---------------------------------------------------------------------------
// Dense engine
// ---------------------------------------------------------------------------

/// Quadrature rule on which `|Tφ|²` is integrated exactly by the dense
/// engine (for the triangle, collapsed at the vertex that makes the
/// multiplier polynomial).
pub fn dense_rule(h: &BasisHandle, op: &DiffOp) -> Result<QuadratureRule> {
    let n = h.max_degree();
    let l = op.power;
    match *h.weight() {
        WeightSpec::Triangle { a, b, c } => {
            let collapse = match op.kind {
                OpKind::Tri { i: 1 } => Collapse::TowardY2,
                OpKind::Tri { i: 2 } => Collapse::TowardY1,
                _ => Collapse::Origin,
            };
            quadrature::triangle(a, b, c, 2 * n + 2 * l, collapse)
        }
        _ => h.reference_rule(2 * l + 2),
    }
}

/// Gram matrices `(⟨Tφ_i, Tφ_j⟩, ⟨φ_i, φ_j⟩)` of an arbitrary family on a
/// quadrature rule, as dense matrices.
pub fn gram_dense<F: PolyFamily>(
    f: &F,
    op: &DiffOp,
    rule: &QuadratureRule,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let cols: Vec<(Vec<f64>, Vec<f64>)> = rule
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(p, w)| {
            let tv = match apply_diffop(op, f, p)? {
                OpValues::Finite(v) => v,
                OpValues::Singular => {
                    return Err(Error::Divergent(format!(
                        "operator singular at quadrature node {p:?}"
                    )))
                }
            };
            let sw = w.sqrt();
            Ok((
                tv.into_iter().map(|x| x * sw).collect(),
                f.eval(p).into_iter().map(|x: f64| x * sw).collect(),
            ))
        })
        .collect::<Result<_>>()?;
    let dim = f.len();
    let nq = cols.len();
    let vt = DMatrix::from_fn(dim, nq, |i, q| cols[q].0[i]);
    let v0 = DMatrix::from_fn(dim, nq, |i, q| cols[q].1[i]);
    let gt = par_mul_transpose(&vt, &vt);
    let g0 = par_mul_transpose(&v0, &v0);
    Ok(((&gt + gt.transpose()) * 0.5, (&g0 + g0.transpose()) * 0.5))
}

/// Sharp constant from the dense engine: the largest generalized eigenvalue
/// of `(G_T, G_0)`, so the family need not be orthonormal.
pub fn sharp_constant_dense<F: PolyFamily>(
    f: &F,
    op: &DiffOp,
    rule: &QuadratureRule,
) -> Result<SharpConstant> {
    let (gt, g0) = gram_dense(f, op, rule)?;
    let dim = gt.nrows();
    let dev = (&g0 - DMatrix::<f64>::identity(dim, dim)).abs().max();
    let (m, back): (DMatrix<f64>, Option<DMatrix<f64>>) = if dev <= 1e-9 {
        (gt, None)
    } else {
        let chol = g0.cholesky().ok_or_else(|| {
            Error::Numeric("mass Gram matrix of the family is not positive definite".into())
        })?;
        let linv = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
        let m = &linv * gt * linv.transpose();
        ((&m + m.transpose()) * 0.5, Some(linv.transpose()))
    };
    let (lam, y) = if dim <= DENSE_BLOCK_LIMIT {
        top_eigen_dense(m)
    } else {
        lanczos_largest(dim, |v| {
            (&m * nalgebra::DVector::from_column_slice(v))
                .iter()
                .copied()
                .collect()
        })?
    };
    let extremal = match back {
        None => y,
        Some(b) => (b * nalgebra::DVector::from_vec(y))
            .iter()
            .copied()
            .collect(),
    };
    Ok(SharpConstant {
        value: ConstantValue::Finite(lam.max(0.0).sqrt()),
        extremal,
    })
}

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

/// Whether the separable engine handles `op` for `weight`.
pub fn is_separable(weight: &WeightSpec, op: &DiffOp) -> bool {
    let dom = match weight {
        WeightSpec::IntervalJacobi { .. } => BasisDomain::Interval,
        WeightSpec::Surface { .. } => BasisDomain::Surface,
        WeightSpec::Cone { .. } => BasisDomain::Cone,
        WeightSpec::Triangle { .. } => BasisDomain::Triangle,
    };
    separable_terms(dom, op).is_some()
}

fn check_op(h: &BasisHandle, op: &DiffOp) -> Result<()> {
    let d = match h.domain() {
        BasisDomain::Interval => 0,
        BasisDomain::Triangle => 1,
        _ => h.x_coords(),
    };
    if h.domain() == BasisDomain::Interval && !matches!(op.kind, OpKind::Dt) {
        return domain("only ∂_t is defined on the interval");
    }
    op.validate(h.domain(), d)
}

/// Sharp `L²` constant `sup_{f∈Π_n} ‖Tf‖₂ / ‖f‖₂` with the extremal
/// polynomial, or the divergence flag.
pub fn sharp_constant_p2_full(n: usize, w: &WeightSpec, op: &DiffOp) -> Result<SharpConstant> {
    let h = BasisHandle::new(*w, n)?;
    check_op(&h, op)?;
    match separable_terms(h.domain(), op) {
        Some(terms) => separable_sharp(&h, &terms),
        None => {
            let rule = dense_rule(&h, op)?;
            sharp_constant_dense(&h, op, &rule)
        }
    }
}

/// Sharp `L²` constant, or the divergence flag.
pub fn sharp_constant_p2(n: usize, w: &WeightSpec, op: &DiffOp) -> Result<ConstantValue> {
    Ok(sharp_constant_p2_full(n, w, op)?.value)
}

/// Full Gram matrix in the orthonormal basis of `Π_n` (dense; intended for
/// moderate `n`).  A divergent entry is reported as [`Error::Divergent`].
pub fn gram_system(n: usize, w: &WeightSpec, op: &DiffOp) -> Result<GramSystem> {
    let h = BasisHandle::new(*w, n)?;
    check_op(&h, op)?;
    let dim = h.dim();
    let matrix = match separable_terms(h.domain(), op) {
        Some(terms) => separable_full(&h, &terms)?
            .ok_or_else(|| Error::Divergent(format!("{} on {}", op.label(), w.label())))?,
        None => {
            let rule = dense_rule(&h, op)?;
            let (gt, _) = gram_dense(&h, op, &rule)?;
            (0..dim)
                .flat_map(|i| (0..dim).map(move |j| (i, j)))
                .map(|(i, j)| gt[(i, j)])
                .collect()
        }
    };
    Ok(GramSystem {
        n,
        weight: *w,
        operator: *op,
        dim,
        matrix,
    })
}

// ---------------------------------------------------------------------------
// Claims, fits and reports
// ---------------------------------------------------------------------------

/// What the theory asserts about the growth of the sharp constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Claim {
    /// `C_n = O(n^r)`, with `r` expected to be attained.
    Exponent(f64),
    /// The constant is infinite (apex singularity).
    Divergent,
    /// No statement.
    Unknown,
}

/// Claimed behavior for `op` on the domain of `w`.
pub fn claimed_exponent(w: &WeightSpec, op: &DiffOp) -> Claim {
    let l = op.power as f64;
    match (*w, op.kind, op.multiplier) {
        (_, OpKind::Dt, Multiplier::None) if !matches!(w, WeightSpec::Triangle { .. }) => {
            Claim::Exponent(2.0 * l)
        }
        (_, OpKind::Dt, Multiplier::Phi) if !matches!(w, WeightSpec::Triangle { .. }) => {
            Claim::Exponent(l)
        }
        (
            WeightSpec::Surface { .. } | WeightSpec::Cone { .. },
            OpKind::Dij { .. },
            Multiplier::None,
        ) => Claim::Exponent(l),
        (WeightSpec::Surface { d, beta, .. }, OpKind::Dij { .. }, Multiplier::TInvSqrt) => {
            if op.power <= 2 {
                Claim::Exponent(l)
            } else if apex_exponent(d as f64 - 1.0 + beta, op.power) <= -1.0 {
                Claim::Divergent
            } else {
                Claim::Unknown
            }
        }
        (WeightSpec::Cone { .. }, OpKind::Dij { .. }, Multiplier::TInvSqrt) if op.power <= 2 => {
            Claim::Exponent(l)
        }
        (WeightSpec::Cone { .. }, OpKind::Dx { .. }, Multiplier::None) => Claim::Exponent(2.0 * l),
        (WeightSpec::Cone { .. }, OpKind::Dx { .. }, Multiplier::BigPhi) => Claim::Exponent(l),
        (WeightSpec::Cone { .. }, OpKind::Dx { .. }, Multiplier::TInvSqrtBigPhi)
            if op.power <= 2 =>
        {
            Claim::Exponent(l)
        }
        (
            WeightSpec::Triangle { .. },
            OpKind::Tri { i: 1 },
            Multiplier::Phi1OverSqrt1mY2 | Multiplier::Phi1,
        )
        | (
            WeightSpec::Triangle { .. },
            OpKind::Tri { i: 2 },
            Multiplier::Phi2OverSqrt1mY1 | Multiplier::Phi2,
        )
        | (
            WeightSpec::Triangle { .. },
            OpKind::Tri { i: 3 },
            Multiplier::Phi3OverSqrtSum | Multiplier::Phi3,
        ) => Claim::Exponent(l),
        _ => Claim::Unknown,
    }
}

/// Exponent of `t` near the apex in `‖t^{−ℓ/2} D_{i,j}^ℓ f‖²` for a degree-one
/// `f`, when the radial measure is `t^δ dt`: `δ − ℓ + 2`.
pub fn apex_exponent(delta: f64, ell: usize) -> f64 {
    delta - ell as f64 + 2.0
}

/// Outcome of a growth fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Fitted exponent within tolerance of the claim.
    Pass,
    /// Fitted exponent off, or an unexpected divergence.
    Fail,
    /// Constants infinite.
    Divergent,
    /// No claim to compare against; values reported only.
    Reported,
}

/// Which norm the constants refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PNorm {
    /// `L¹`.
    One,
    /// `L²`.
    Two,
    /// Uniform norm.
    Inf,
}

/// Constants for one operator over a degree ladder, with the fitted
/// growth exponent and a verdict against the claim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    /// Operator identifier.
    pub operator: String,
    /// Operator.
    pub op: DiffOp,
    /// Weight.
    pub weight: WeightSpec,
    /// Norm.
    pub p: PNorm,
    /// Degrees.
    pub degrees: Vec<usize>,
    /// Constants `C_n`.
    pub constants: Vec<ConstantValue>,
    /// Degrees used by the fit (top half of the ladder).
    pub fit_window: Vec<usize>,
    /// Least-squares slope of `log C_n` against `log n`.
    pub fitted_exponent: Option<f64>,
    /// Root-mean-square residual of the fit.
    pub fit_residual: Option<f64>,
    /// Claimed behavior.
    pub claimed: Claim,
    /// Whether the constants are nondecreasing in `n` (up to `1e−9`).
    pub monotone: bool,
    /// Verdict.
    pub verdict: Verdict,
    /// Seed of the random components (recorded even when unused).
    pub seed: u64,
}

impl BernsteinReport {
    /// PASS, DIVERGENT when divergence is the claim, or a plain report.
    pub fn acceptable(&self) -> bool {
        match self.verdict {
            Verdict::Pass | Verdict::Reported => true,
            Verdict::Divergent => self.claimed == Claim::Divergent,
            Verdict::Fail => false,
        }
    }

    /// One row per degree, for CSV export.
    pub fn rows(&self) -> Vec<ReportRow> {
        let claimed = match self.claimed {
            Claim::Exponent(r) => Some(r),
            _ => None,
        };
        self.degrees
            .iter()
            .zip(&self.constants)
            .map(|(&n, c)| ReportRow {
                operator: self.operator.clone(),
                weight: self.weight.label(),
                p: match self.p {
                    PNorm::One => "1".into(),
                    PNorm::Two => "2".into(),
                    PNorm::Inf => "inf".into(),
                },
                n,
                constant: c.finite(),
                fitted_exponent: self.fitted_exponent,
                claimed_exponent: claimed,
                verdict: format!("{:?}", self.verdict).to_uppercase(),
                seed: self.seed,
            })
            .collect()
    }
}

/// CSV row of a [`BernsteinReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Operator identifier.
    pub operator: String,
    /// Weight parameters.
    pub weight: String,
    /// Norm.
    pub p: String,
    /// Degree.
    pub n: usize,
    /// `C_n` (empty when divergent).
    pub constant: Option<f64>,
    /// Fitted exponent.
    pub fitted_exponent: Option<f64>,
    /// Claimed exponent.
    pub claimed_exponent: Option<f64>,
    /// Verdict.
    pub verdict: String,
    /// Seed.
    pub seed: u64,
}

/// Least-squares slope and RMS residual of `log y` against `log x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return domain("a log-log fit needs at least two points");
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return domain("log-log fit needs positive finite data");
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return domain("log-log fit needs distinct abscissae");
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let res = (lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum::<f64>()
        / k)
        .sqrt();
    Ok((slope, res))
}

/// Builds the report for given constants: fit over the top half of the
/// ladder, monotonicity and verdict.
pub fn make_report(
    w: &WeightSpec,
    op: &DiffOp,
    p: PNorm,
    degrees: &[usize],
    constants: Vec<ConstantValue>,
    seed: u64,
) -> Result<BernsteinReport> {
    let claimed = claimed_exponent(w, op);
    let half = degrees.len() / 2;
    let fit_window: Vec<usize> = degrees[half.min(degrees.len().saturating_sub(2))..].to_vec();
    let divergent = constants.contains(&ConstantValue::Divergent);
    let finite: Vec<f64> = constants.iter().filter_map(|c| c.finite()).collect();
    let monotone = !divergent
        && finite
            .windows(2)
            .all(|w| w[1] >= w[0] * (1.0 - 1e-9) - 1e-12);
    let (fitted_exponent, fit_residual) = if divergent {
        (None, None)
    } else {
        let xs: Vec<f64> = fit_window.iter().map(|&n| n as f64).collect();
        let ys: Vec<f64> = finite[finite.len() - fit_window.len()..].to_vec();
        match loglog_fit(&xs, &ys) {
            Ok((r, res)) => (Some(r), Some(res)),
            Err(_) => (None, None),
        }
    };
    let verdict = if divergent {
        Verdict::Divergent
    } else {
        match (claimed, fitted_exponent) {
            (Claim::Exponent(r), Some(f)) if (f - r).abs() <= EXPONENT_TOLERANCE => Verdict::Pass,
            (Claim::Exponent(_), _) | (Claim::Divergent, _) => Verdict::Fail,
            (Claim::Unknown, _) => Verdict::Reported,
        }
    };
    Ok(BernsteinReport {
        operator: op.label(),
        op: *op,
        weight: *w,
        p,
        degrees: degrees.to_vec(),
        constants,
        fit_window,
        fitted_exponent,
        fit_residual,
        claimed,
        monotone,
        verdict,
        seed,
    })
}

/// Sharp `L²` constants over a degree ladder with the growth-exponent
/// verdict.  Ladder entries are computed in parallel.
pub fn growth_fit(
    w: &WeightSpec,
    op: &DiffOp,
    degrees: &[usize],
    seed: u64,
) -> Result<BernsteinReport> {
    if degrees.len() < 2 || degrees.windows(2).any(|p| p[1] <= p[0]) || degrees[0] == 0 {
        return domain(
            "degree ladder must be strictly increasing, positive, with at least two entries",
        );
    }
    let constants: Vec<ConstantValue> = degrees
        .par_iter()
        .map(|&n| sharp_constant_p2(n, w, op))
        .collect::<Result<_>>()?;
    make_report(w, op, PNorm::Two, degrees, constants, seed)
}

// ---------------------------------------------------------------------------
// Norms and grids
// ---------------------------------------------------------------------------

/// A norm value, with the estimated grid bias for the uniform norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormValue {
    /// The norm.
    pub value: f64,
    /// For `p = ∞`: the increase of the grid maximum when the grid is
    /// refined twofold (a proxy for the grid bias); zero otherwise.
    pub grid_bias: f64,
}

/// Evaluation grid in natural coordinates with `per_dir` points per
/// direction (angles get twice as many).
pub fn sup_grid(h: &BasisHandle, per_dir: usize) -> Result<Vec<Vec<f64>>> {
    let k = per_dir.max(2);
    let lin = |i: usize| i as f64 / (k - 1) as f64;
    let mut pts = Vec::new();
    match h.fiber() {
        Fiber::Point => pts.extend((0..k).map(|i| vec![lin(i)])),
        Fiber::Sphere { d: 2 } => {
            for i in 0..k {
                let t = lin(i);
                for a in 0..2 * k {
                    let th = std::f64::consts::PI * a as f64 / k as f64;
                    pts.push(vec![t * th.cos(), t * th.sin(), t]);
                }
            }
        }
        Fiber::Sphere { .. } => {
            for i in 0..k {
                let t = lin(i);
                for c in 0..k {
                    let th = std::f64::consts::PI * c as f64 / (k - 1) as f64;
                    for a in 0..2 * k {
                        let ph = std::f64::consts::PI * a as f64 / k as f64;
                        pts.push(vec![
                            t * th.sin() * ph.cos(),
                            t * th.sin() * ph.sin(),
                            t * th.cos(),
                            t,
                        ]);
                    }
                }
            }
        }
        Fiber::Ball { d: 1, .. } => {
            for i in 0..k {
                let t = lin(i);
                for s in 0..k {
                    pts.push(vec![t * (2.0 * lin(s) - 1.0), t]);
                }
            }
        }
        Fiber::Ball { .. } => {
            for i in 0..k {
                let t = lin(i);
                for r in 0..k {
                    let rr = lin(r);
                    let na = if r == 0 { 1 } else { 2 * k };
                    for a in 0..na {
                        let th = std::f64::consts::PI * a as f64 / k as f64;
                        pts.push(vec![t * rr * th.cos(), t * rr * th.sin(), t]);
                    }
                }
            }
        }
        Fiber::Segment { .. } => {
            for i in 0..k {
                for j in 0..k - i {
                    pts.push(vec![lin(i), lin(j)]);
                }
            }
        }
    }
    if pts.len() > 4_000_000 {
        return Err(Error::Resource(format!(
            "uniform-norm grid of {} points",
            pts.len()
        )));
    }
    Ok(pts)
}

/// `‖f‖_{p,w}` for `f = Σ c_i φ_i`: by exact quadrature for `p = 1, 2`, on an
/// oversampled grid (`≥ 10n` points per direction) for `p = ∞`.
pub fn weighted_norm(h: &BasisHandle, coeffs: &[f64], p: PNorm) -> Result<NormValue> {
    if coeffs.len() > h.dim() {
        return domain(format!(
            "{} coefficients for a basis of dimension {}",
            coeffs.len(),
            h.dim()
        ));
    }
    match p {
        PNorm::One | PNorm::Two => {
            let rule = h.reference_rule(if p == PNorm::One { 16 } else { 0 })?;
            let pw = if p == PNorm::One { 1 } else { 2 };
            let s: f64 = rule
                .iter()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|(x, w)| w * h.eval_combination::<f64>(coeffs, x).abs().powi(pw))
                .collect::<Vec<_>>()
                .iter()
                .sum();
            Ok(NormValue {
                value: if pw == 1 { s } else { s.sqrt() },
                grid_bias: 0.0,
            })
        }
        PNorm::Inf => {
            let per = (10 * h.max_degree()).max(20);
            let coarse = grid_max(h, coeffs, per / 2)?;
            let fine = grid_max(h, coeffs, per)?;
            Ok(NormValue {
                value: fine,
                grid_bias: (fine - coarse).max(0.0),
            })
        }
    }
}

fn grid_max(h: &BasisHandle, coeffs: &[f64], per: usize) -> Result<f64> {
    let pts = sup_grid(h, per)?;
    Ok(pts
        .par_iter()
        .map(|x| h.eval_combination::<f64>(coeffs, x).abs())
        .reduce(|| 0.0, f64::max))
}

/// Standard-normal coefficient vectors in the orthonormal basis.
pub fn random_coefficients(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

/// Estimate of the uniform-norm constant `sup ‖Tf‖_∞ / ‖f‖_∞`: the best ratio
/// over the `L²` extremal polynomial and `samples` random polynomials, with
/// both norms taken on the grid of [`sup_grid`] (a lower bound).
pub fn sup_constant_estimate(
    n: usize,
    w: &WeightSpec,
    op: &DiffOp,
    samples: usize,
    seed: u64,
) -> Result<NormValue> {
    let h = BasisHandle::new(*w, n)?;
    check_op(&h, op)?;
    let sharp = sharp_constant_p2_full(n, w, op)?;
    if sharp.value == ConstantValue::Divergent {
        return Ok(NormValue {
            value: f64::INFINITY,
            grid_bias: 0.0,
        });
    }
    let mut cands = vec![sharp.extremal];
    cands.extend(random_coefficients(h.dim(), samples, seed));
    let ratio = |per: usize| -> Result<f64> {
        let pts = sup_grid(&h, per)?;
        let vals: Vec<(Vec<f64>, Vec<f64>)> = pts
            .par_iter()
            .filter_map(|x| match apply_diffop(op, &h, x) {
                Ok(OpValues::Finite(t)) => Some(Ok((h.eval_natural::<f64>(x), t))),
                Ok(OpValues::Singular) => None,
                Err(e) => Some(Err(e)),
            })
            .collect::<Result<_>>()?;
        let mut best: f64 = 0.0;
        for c in &cands {
            let (mut fm, mut tm) = (0.0f64, 0.0f64);
            for (v, t) in &vals {
                let fv: f64 = c.iter().zip(v).map(|(a, b)| a * b).sum();
                let tv: f64 = c.iter().zip(t).map(|(a, b)| a * b).sum();
                fm = fm.max(fv.abs());
                tm = tm.max(tv.abs());
            }
            if fm > 0.0 {
                best = best.max(tm / fm);
            }
        }
        Ok(best)
    };
    let per = (10 * n).max(20);
    let coarse = ratio(per / 2)?;
    let fine = ratio(per)?;
    Ok(NormValue {
        value: fine,
        grid_bias: (fine - coarse).abs(),
    })
}

// ---------------------------------------------------------------------------
// Divergence probe
// ---------------------------------------------------------------------------

/// Behavior of a cutoff integral `I(ε) = ∫_{t≥ε}` as `ε → 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegralClass {
    /// `I(ε)` converges.
    Convergent,
    /// `I(ε) ~ log(1/ε)`.
    Logarithmic,
    /// `I(ε) ~ ε^{e+1}` with `e < −1`.
    Power,
}

/// Result of [`divergence_probe`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceProbe {
    /// Power `ℓ`.
    pub ell: usize,
    /// Dimension `d`.
    pub d: usize,
    /// Exponent `γ`.
    pub gamma: f64,
    /// Cutoffs `ε_c = 2^{−k}`, `k = 4..=14`.
    pub cutoffs: Vec<f64>,
    /// `I(ε_c)`.
    pub integrals: Vec<f64>,
    /// `I(ε_c/2) − I(ε_c)` for consecutive cutoffs.
    pub increments: Vec<f64>,
    /// Exponent `e` of the integrand `t^e` estimated from the increments.
    pub estimated_exponent: f64,
    /// Symbolic exponent `d − ℓ`.
    pub oracle_exponent: f64,
    /// Log-log slope of `I` against `ε` over the last five cutoffs.
    pub loglog_slope: f64,
    /// Classification from the data.
    pub class: IntegralClass,
    /// Classification from the symbolic exponent.
    pub oracle_class: IntegralClass,
    /// Data and oracle agree (class, and exponent within `0.05`).
    pub consistent: bool,
}

fn classify(e: f64) -> IntegralClass {
    if (e + 1.0).abs() < 0.05 {
        IntegralClass::Logarithmic
    } else if e > -1.0 {
        IntegralClass::Convergent
    } else {
        IntegralClass::Power
    }
}

/// The polynomial `x₁` on the conic surface `V₀^{d+1}`.
struct FirstCoordinate {
    d: usize,
}

impl PolyFamily for FirstCoordinate {
    fn len(&self) -> usize {
        1
    }
    fn domain(&self) -> BasisDomain {
        BasisDomain::Surface
    }
    fn coords(&self) -> usize {
        self.d + 1
    }
    fn eval<S: Scalar>(&self, p: &[S]) -> Vec<S> {
        vec![p[0]]
    }
}

/// Cutoff integrals `I(ε_c) = ∫_{t ≥ ε_c} |t^{−ℓ/2} D_{1,2}^ℓ x₁|² w_{−1,γ} dm`
/// on `V₀^{d+1}` for `ε_c = 2^{−k}`, `k = 4..=14`, with `D^ℓ` evaluated by the
/// operator module, compared with the exponent `d − ℓ` of the integrand.
pub fn divergence_probe(ell: usize, d: usize, gamma: f64) -> Result<DivergenceProbe> {
    if !(1..=crate::operators::MAX_ORDER).contains(&ell) {
        return domain(format!("ℓ = {ell} out of range"));
    }
    if !(2..=3).contains(&d) || gamma <= -1.0 {
        return domain("divergence probe needs d ∈ {2, 3} and γ > −1");
    }
    let f0 = FirstCoordinate { d };
    let op = DiffOp::new(OpKind::Dij { i: 1, j: 2 }, ell, Multiplier::TInvSqrt);
    let sphere = quadrature::sphere(d, 2 * ell + 6)?;
    // ∫ over t ∈ [a, b] of t^{−1}(1−t)^γ t^{d−1} ∫_S |T f₀(tξ, t)|² dσ(ξ) dt
    let shell = |a: f64, b: f64, top: bool| -> Result<f64> {
        let rule = if top {
            quadrature::unit_interval(0.0, gamma, 40)?
        } else {
            quadrature::unit_interval(0.0, 0.0, 40)?
        };
        let mut acc = 0.0;
        for (s, ws) in rule.iter() {
            let t = a + (b - a) * s[0];
            // the top rule carries (1−s)^γ = ((1−t)/(1−a))^γ
            let radial = if top {
                (b - a) * (1.0 - a).powf(gamma)
            } else {
                (b - a) * (1.0 - t).powf(gamma)
            } * t.powi(d as i32 - 2);
            let mut ang = 0.0;
            for (xi, wx) in sphere.iter() {
                let mut p: Vec<f64> = xi.iter().map(|v| v * t).collect();
                p.push(t);
                let v = match apply_diffop(&op, &f0, &p)? {
                    OpValues::Finite(v) => v[0],
                    OpValues::Singular => {
                        return Err(Error::Numeric("singular interior value".into()))
                    }
                };
                ang += wx * v * v;
            }
            acc += ws * radial * ang;
        }
        Ok(acc)
    };
    let mut cutoffs = Vec::new();
    let mut integrals = Vec::new();
    let mut current = shell(1.0 / 16.0, 1.0, true)?;
    for k in 4..=14 {
        let eps = 2f64.powi(-k);
        if k > 4 {
            current += shell(eps, 2.0 * eps, false)?;
        }
        cutoffs.push(eps);
        integrals.push(current);
    }
    let increments: Vec<f64> = integrals.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = &increments[increments.len() - 5..];
    let ks: Vec<f64> = (0..5).map(|i| i as f64).collect();
    let lt: Vec<f64> = tail.iter().map(|v| v.log2()).collect();
    let mk = ks.iter().sum::<f64>() / 5.0;
    let ml = lt.iter().sum::<f64>() / 5.0;
    let sigma = ks
        .iter()
        .zip(&lt)
        .map(|(a, b)| (a - mk) * (b - ml))
        .sum::<f64>()
        / ks.iter().map(|a| (a - mk) * (a - mk)).sum::<f64>();
    // increments over [2^{−k−1}, 2^{−k}] of ∫ t^e scale as 2^{−k(e+1)}
    let estimated_exponent = -1.0 - sigma;
    let n = integrals.len();
    let (loglog_slope, _) = loglog_fit(&cutoffs[n - 5..], &integrals[n - 5..])?;
    let oracle_exponent = d as f64 - ell as f64;
    let class = classify(estimated_exponent);
    let oracle_class = classify(oracle_exponent);
    let consistent = class == oracle_class && (estimated_exponent - oracle_exponent).abs() <= 0.05;
    Ok(DivergenceProbe {
        ell,
        d,
        gamma,
        cutoffs,
        integrals,
        increments,
        estimated_exponent,
        oracle_exponent,
        loglog_slope,
        class,
        oracle_class,
        consistent,
    })
}

// ---------------------------------------------------------------------------
// Maximal function
// ---------------------------------------------------------------------------

/// Grid values of the maximal function
/// `f*_{β,n}(x) = max_y |f(y)| / (1 + n d(x, y))^β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalFunctionGrid {
    /// Exponent `β > 0`.
    pub beta: f64,
    /// Degree parameter `n`.
    pub n: usize,
    /// Anchor points (natural coordinates).
    pub grid: Vec<Vec<f64>>,
    /// `f*_{β,n}` at the anchors.
    pub values: Vec<f64>,
    /// `|f|` at the anchors.
    pub abs_values: Vec<f64>,
}

fn natural_to_conic(h: &BasisHandle, p: &[f64]) -> Result<ConicPoint> {
    match h.domain() {
        BasisDomain::Surface => {
            let d = p.len() - 1;
            let t = p[d];
            let r = p[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            // project onto the surface to absorb rounding in the grid
            let x: Vec<f64> = if r > 0.0 {
                p[..d].iter().map(|v| v * t / r).collect()
            } else {
                p[..d].to_vec()
            };
            ConicPoint::surface(x, t)
        }
        BasisDomain::Cone => {
            let d = p.len() - 1;
            ConicPoint::solid(p[..d].to_vec(), p[d])
        }
        BasisDomain::Triangle => triangle_map([p[0], p[1]]),
        BasisDomain::Interval => domain("interval points are not conic points"),
    }
}

/// Intrinsic distance between two points in natural coordinates.
pub fn natural_distance(h: &BasisHandle, p: &[f64], q: &[f64]) -> Result<f64> {
    match h.domain() {
        BasisDomain::Interval => dist_interval(p[0].clamp(0.0, 1.0), q[0].clamp(0.0, 1.0)),
        BasisDomain::Surface => dist_surface(&natural_to_conic(h, p)?, &natural_to_conic(h, q)?),
        BasisDomain::Cone | BasisDomain::Triangle => {
            dist_cone(&natural_to_conic(h, p)?, &natural_to_conic(h, q)?)
        }
    }
}

/// Maximal function of `f = Σ c_i φ_i` at `anchors`, maximizing over
/// `candidates` and the anchor itself.
pub fn maximal_function(
    h: &BasisHandle,
    coeffs: &[f64],
    beta: f64,
    n: usize,
    anchors: &[Vec<f64>],
    candidates: &[Vec<f64>],
) -> Result<MaximalFunctionGrid> {
    if !(beta > 0.0) {
        return domain(format!("maximal function needs β > 0, got {beta}"));
    }
    let cand_vals: Vec<f64> = candidates
        .par_iter()
        .map(|y| h.eval_combination::<f64>(coeffs, y).abs())
        .collect();
    let res: Vec<(f64, f64)> = anchors
        .par_iter()
        .map(|x| {
            let fx = h.eval_combination::<f64>(coeffs, x).abs();
            let mut best = fx;
            for (y, &fy) in candidates.iter().zip(&cand_vals) {
                if fy <= best {
                    continue;
                }
                let dxy = natural_distance(h, x, y)?;
                best = best.max(fy / (1.0 + n as f64 * dxy).powf(beta));
            }
            Ok((best, fx))
        })
        .collect::<Result<_>>()?;
    Ok(MaximalFunctionGrid {
        beta,
        n,
        grid: anchors.to_vec(),
        values: res.iter().map(|r| r.0).collect(),
        abs_values: res.iter().map(|r| r.1).collect(),
    })
}

/// Two-sided comparison `‖f‖_p ≤ ‖f*_{β,n}‖_p ≤ c ‖f‖_p` on quadrature nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalCheck {
    /// `‖f‖_{p,w}`.
    pub norm_f: f64,
    /// `‖f*‖_{p,w}`.
    pub norm_fstar: f64,
    /// `f* ≥ |f|` at every node.
    pub lower_holds: bool,
    /// `‖f*‖ / ‖f‖`.
    pub measured_c: f64,
}

/// Evaluates `f*_{β,n}` at the nodes of the reference rule (maximizing over
/// the same nodes) and compares `L^p` norms.
pub fn maximal_norm_check(
    h: &BasisHandle,
    coeffs: &[f64],
    beta: f64,
    p: f64,
) -> Result<MaximalCheck> {
    if !(p >= 1.0) {
        return domain("p must be ≥ 1");
    }
    let rule = h.reference_rule(0)?;
    let pts: Vec<Vec<f64>> = rule.iter().map(|(x, _)| x.to_vec()).collect();
    let grid = maximal_function(h, coeffs, beta, h.max_degree(), &pts, &pts)?;
    let (mut nf, mut ns) = (0.0, 0.0);
    for ((fs, fa), w) in grid.values.iter().zip(&grid.abs_values).zip(&rule.weights) {
        nf += w * fa.powf(p);
        ns += w * fs.powf(p);
    }
    let lower_holds = grid
        .values
        .iter()
        .zip(&grid.abs_values)
        .all(|(s, a)| s >= a);
    let (nf, ns) = (nf.powf(1.0 / p), ns.powf(1.0 / p));
    Ok(MaximalCheck {
        norm_f: nf,
        norm_fstar: ns,
        lower_holds,
        measured_c: if nf > 0.0 { ns / nf } else { 1.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_hand_integration_oracle() {
        let w = WeightSpec::IntervalJacobi {
            alpha: 0.0,
            beta: 0.0,
        };
        let phi = sharp_constant_p2(1, &w, &DiffOp::new(OpKind::Dt, 1, Multiplier::Phi)).unwrap();
        let dt = sharp_constant_p2(1, &w, &DiffOp::new(OpKind::Dt, 1, Multiplier::None)).unwrap();
        assert!((phi.finite().unwrap() - 2f64.sqrt()).abs() < 1e-10);
        assert!((dt.finite().unwrap() - 12f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn separable_matches_dense_on_surface() {
        let w = WeightSpec::Surface {
            d: 2,
            beta: -1.0,
            gamma: 0.5,
        };
        let h = BasisHandle::new(w, 5).unwrap();
        for op in [
            DiffOp::new(OpKind::Dt, 1, Multiplier::None),
            DiffOp::new(OpKind::Dt, 1, Multiplier::Phi),
            DiffOp::new(OpKind::Dij { i: 1, j: 2 }, 1, Multiplier::TInvSqrt),
            DiffOp::new(OpKind::Dij { i: 1, j: 2 }, 2, Multiplier::TInvSqrt),
        ] {
            let a = sharp_constant_p2(5, &w, &op).unwrap().finite().unwrap();
            let rule = dense_rule(&h, &op).unwrap();
            let b = sharp_constant_dense(&h, &op, &rule)
                .unwrap()
                .value
                .finite()
                .unwrap();
            assert!((a - b).abs() < 1e-9 * a, "{}: {a} vs {b}", op.label());
        }
    }

    #[test]
    fn surface_l3_is_divergent() {
        let w = WeightSpec::Surface {
            d: 2,
            beta: -1.0,
            gamma: 0.0,
        };
        let op = DiffOp::new(OpKind::Dij { i: 1, j: 2 }, 3, Multiplier::TInvSqrt);
        assert_eq!(
            sharp_constant_p2(4, &w, &op).unwrap(),
            ConstantValue::Divergent
        );
    }
}

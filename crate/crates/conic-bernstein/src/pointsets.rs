//! Maximal `ε`-separated point sets on `[0,1]`, `S¹`, `S²`, `B²`, the conic
//! surface and the solid cone, with separation, covering and boundary-gap
//! certificates.
//!
//! The conic constructions are products: a family of levels `t_j` on `[0,1]`
//! with level-dependent fiber separations `ε_j = πε / (2√t_j)`, and a
//! separated set on the fiber (sphere or ball) at each level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::geometry::surface_distance_raw;

/// Largest number of levels a construction may create.
pub const MAX_LEVELS: usize = 1_000_000;

/// Largest number of points a construction may create.
pub const MAX_POINTS: usize = 5_000_000;

/// Domain of a separated set; points are stored in natural coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "kebab-case")]
pub enum SetDomain {
    /// `[0,1]` with `d(t,s) = arccos(√t√s + √(1−t)√(1−s))`; points `[t]`.
    Interval,
    /// Unit circle; points `[cos θ, sin θ]`.
    Circle,
    /// Unit sphere `S²`; points `[x, y, z]`.
    Sphere2,
    /// Unit disk `B²` with `d(u,v) = arccos(⟨u,v⟩ + √(1−‖u‖²)√(1−‖v‖²))`.
    Ball2,
    /// Conic surface `V₀^{d+1}`, `d ∈ {2, 3}`; points `[x, t]`.
    Surface {
        /// Dimension `d`.
        d: usize,
    },
    /// Solid cone `V^{3}`; points `[x₁, x₂, t]`.
    Cone,
}

impl SetDomain {
    /// Tag used in file headers.
    pub fn tag(&self) -> String {
        match self {
            SetDomain::Interval => "interval".into(),
            SetDomain::Circle => "circle".into(),
            SetDomain::Sphere2 => "sphere2".into(),
            SetDomain::Ball2 => "ball2".into(),
            SetDomain::Surface { d } => format!("surface-d{d}"),
            SetDomain::Cone => "cone-d2".into(),
        }
    }

    /// Number of stored coordinates per point.
    pub fn coords(&self) -> usize {
        match self {
            SetDomain::Interval => 1,
            SetDomain::Circle | SetDomain::Ball2 => 2,
            SetDomain::Sphere2 | SetDomain::Cone => 3,
            SetDomain::Surface { d } => d + 1,
        }
    }

    /// Topological dimension.
    pub fn dimension(&self) -> usize {
        match self {
            SetDomain::Interval | SetDomain::Circle => 1,
            SetDomain::Sphere2 | SetDomain::Ball2 => 2,
            SetDomain::Surface { d } => *d,
            SetDomain::Cone => 3,
        }
    }

    /// Intrinsic distance between two points (no validation).
    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        let acos = |c: f64| c.clamp(-1.0, 1.0).acos();
        match self {
            SetDomain::Interval => {
                let (t, s) = (p[0].clamp(0.0, 1.0), q[0].clamp(0.0, 1.0));
                acos((t * s).sqrt() + ((1.0 - t) * (1.0 - s)).sqrt())
            }
            SetDomain::Circle | SetDomain::Sphere2 => acos(dot(p, q)),
            SetDomain::Ball2 => {
                let a = (1.0 - dot(p, p)).max(0.0).sqrt();
                let b = (1.0 - dot(q, q)).max(0.0).sqrt();
                acos(dot(p, q) + a * b)
            }
            SetDomain::Surface { d } => surface_distance_raw(&p[..*d], p[*d], &q[..*d], q[*d]),
            SetDomain::Cone => {
                let (x, y) = (lift_raw(p), lift_raw(q));
                surface_distance_raw(&x, p[2], &y, q[2])
            }
        }
    }
}

impl SetDomain {
    /// A coordinate `κ` with `d(p, q) ≥ |κ(p) − κ(q)|`, used to prune
    /// neighbor searches (constant for the circle).
    pub fn key(&self, p: &[f64]) -> f64 {
        match self {
            SetDomain::Interval => p[0].clamp(0.0, 1.0).sqrt().asin(),
            SetDomain::Circle => 0.0,
            SetDomain::Sphere2 => p[2].clamp(-1.0, 1.0).acos(),
            SetDomain::Ball2 => dot(p, p).sqrt().min(1.0).asin(),
            SetDomain::Surface { d } => p[*d].clamp(0.0, 1.0).sqrt().asin(),
            SetDomain::Cone => p[2].clamp(0.0, 1.0).sqrt().asin(),
        }
    }
}

/// Points sorted by [`SetDomain::key`], for pruned neighbor searches.
pub(crate) struct KeyIndex<'a> {
    dom: SetDomain,
    points: &'a [Vec<f64>],
    order: Vec<usize>,
    keys: Vec<f64>,
}

impl<'a> KeyIndex<'a> {
    pub(crate) fn new(dom: SetDomain, points: &'a [Vec<f64>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let raw: Vec<f64> = points.iter().map(|p| dom.key(p)).collect();
        order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]).then(a.cmp(&b)));
        let keys = order.iter().map(|&i| raw[i]).collect();
        KeyIndex {
            dom,
            points,
            order,
            keys,
        }
    }

    /// Distance to the nearest point and the number of points closer than
    /// `radius`.
    fn nearest_and_count(&self, q: &[f64], radius: f64) -> (f64, usize) {
        let kq = self.dom.key(q);
        let start = self.keys.partition_point(|&k| k < kq);
        let mut best = f64::INFINITY;
        let mut count = 0;
        let visit = |pos: usize, best: &mut f64, count: &mut usize| {
            let dd = self.dom.distance(&self.points[self.order[pos]], q);
            *best = best.min(dd);
            if dd < radius {
                *count += 1;
            }
        };
        for pos in start..self.keys.len() {
            if self.keys[pos] - kq >= best.max(radius) {
                break;
            }
            visit(pos, &mut best, &mut count);
        }
        for pos in (0..start).rev() {
            if kq - self.keys[pos] >= best.max(radius) {
                break;
            }
            visit(pos, &mut best, &mut count);
        }
        (best, count)
    }

    /// Indices (into the original slice) of the points within `radius` of `q`.
    pub(crate) fn within(&self, q: &[f64], radius: f64) -> Vec<usize> {
        let kq = self.dom.key(q);
        let lo = self.keys.partition_point(|&k| k < kq - radius);
        let hi = self.keys.partition_point(|&k| k <= kq + radius);
        let mut out: Vec<usize> = (lo..hi)
            .map(|pos| self.order[pos])
            .filter(|&i| self.dom.distance(&self.points[i], q) <= radius)
            .collect();
        out.sort_unstable();
        out
    }

    /// Smallest pairwise distance.
    fn min_pair_distance(&self) -> f64 {
        (0..self.order.len())
            .into_par_iter()
            .map(|a| {
                let p = &self.points[self.order[a]];
                let mut m = f64::INFINITY;
                for b in a + 1..self.order.len() {
                    if self.keys[b] - self.keys[a] >= m {
                        break;
                    }
                    m = m.min(self.dom.distance(p, &self.points[self.order[b]]));
                }
                m
            })
            .reduce(|| f64::INFINITY, f64::min)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lift_raw(p: &[f64]) -> [f64; 3] {
    let gap = (p[2] * p[2] - p[0] * p[0] - p[1] * p[1]).max(0.0).sqrt();
    [p[0], p[1], gap]
}

/// One level `(t_j, ε_j)` of the interval construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    /// `t_j = sin²((2j−1)π / (4N))`.
    pub t: f64,
    /// `ε_j = πε / (2√t_j)`.
    pub eps: f64,
}

/// Provenance of a point: level (or ring/band) and index within it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointMeta {
    /// Level, ring or band (0-based).
    pub level: usize,
    /// Ring or band inside the fiber set (0-based), when applicable.
    pub ring: usize,
}

/// An `ε`-separated point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatedSet {
    /// Domain.
    pub domain: SetDomain,
    /// Separation parameter `ε`.
    pub epsilon: f64,
    /// Points in natural coordinates.
    pub points: Vec<Vec<f64>>,
    /// Per-point provenance.
    pub meta: Vec<PointMeta>,
}

impl SeparatedSet {
    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Whether the set is empty.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn check_eps(eps: f64, max: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= max + 1e-15) {
        return domain(format!("ε must lie in (0, {max}], got {eps}"));
    }
    Ok(())
}

fn level_count(eps: f64) -> Result<usize> {
    let n = (PI / (2.0 * eps) + 1e-12).floor();
    if n > MAX_LEVELS as f64 {
        return Err(Error::Resource(format!(
            "{n} levels exceed the cap of {MAX_LEVELS}"
        )));
    }
    Ok(n as usize)
}

/// Levels `t_j = sin²((2j−1)π/(4N))`, `N = ⌊π/(2ε)⌋`, with fiber separations
/// `ε_j = πε/(2√t_j)`.  Consecutive levels are exactly `π/(2N) ≥ ε` apart.
pub fn interval_levels(eps: f64) -> Result<Vec<Level>> {
    check_eps(eps, PI / 2.0)?;
    let n = level_count(eps)?;
    Ok((1..=n)
        .map(|j| {
            let t = ((2 * j - 1) as f64 * PI / (4 * n) as f64).sin().powi(2);
            Level {
                t,
                eps: PI * eps / (2.0 * t.sqrt()),
            }
        })
        .collect())
}

/// The levels as an `ε`-separated set on `[0,1]`.
pub fn interval_separated(eps: f64) -> Result<SeparatedSet> {
    let levels = interval_levels(eps)?;
    Ok(SeparatedSet {
        domain: SetDomain::Interval,
        epsilon: eps,
        meta: (0..levels.len())
            .map(|j| PointMeta { level: j, ring: 0 })
            .collect(),
        points: levels.into_iter().map(|l| vec![l.t]).collect(),
    })
}

/// Equispaced angles `2πk/K`, `K = max(1, ⌊2π/ε⌋)`: spacing in `[ε, 2ε)`.
fn circle_angles(eps: f64) -> Vec<f64> {
    let k = ((2.0 * PI / eps + 1e-9).floor() as usize).max(1);
    (0..k).map(|i| 2.0 * PI * i as f64 / k as f64).collect()
}

/// Largest `k ≥ 1` with `r sin(π/k) ≥ sin(ε/2)`: the number of equispaced
/// points on a circle of chordal radius `r` whose neighbors are `ε` apart.
fn ring_count(r: f64, eps: f64) -> usize {
    let target = (eps / 2.0).min(PI / 2.0).sin();
    if r <= 0.0 || r < target {
        return 1;
    }
    // sin(π/k) ≥ target / r  ⇔  k ≤ π / asin(target / r)
    let k = (PI / (target / r).min(1.0).asin() + 1e-9).floor() as usize;
    k.max(1)
}

fn sphere2_bands(eps: f64) -> (Vec<Vec<f64>>, Vec<PointMeta>) {
    let m = ((PI / eps + 1e-9).floor() as usize).max(1);
    let mut pts = Vec::new();
    let mut meta = Vec::new();
    for i in 1..=m {
        let th = (2 * i - 1) as f64 * PI / (2 * m) as f64;
        let k = ring_count(th.sin(), eps);
        // stagger alternate bands
        let shift = if i % 2 == 0 { PI / k as f64 } else { 0.0 };
        for a in 0..k {
            let ph = shift + 2.0 * PI * a as f64 / k as f64;
            pts.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
            meta.push(PointMeta {
                level: i - 1,
                ring: a,
            });
        }
    }
    (pts, meta)
}

/// Grid on `S²` with geodesic mesh about `h`.
fn sphere2_grid(h: f64) -> Vec<Vec<f64>> {
    let nc = ((PI / h).ceil() as usize).max(1);
    let mut g = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]];
    for i in 1..nc {
        let th = PI * i as f64 / nc as f64;
        let na = ((2.0 * PI * th.sin() / h).ceil() as usize).max(1);
        for a in 0..na {
            let ph = 2.0 * PI * a as f64 / na as f64;
            g.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
        }
    }
    g
}

/// Maximal `ε`-separated set on `S^{d−1}` for `d ∈ {2, 3}`.
///
/// `S¹`: equispaced angles.  `S²`: latitude bands at colatitudes
/// `(2i−1)π/(2M)`, `M = ⌊π/ε⌋`, with per-band equispaced longitudes as
/// dense as separation allows (covering is checked by [`certify_covering`]).
pub fn sphere_separated(d: usize, eps: f64) -> Result<SeparatedSet> {
    check_eps(eps, PI)?;
    match d {
        2 => {
            let ang = circle_angles(eps);
            Ok(SeparatedSet {
                domain: SetDomain::Circle,
                epsilon: eps,
                meta: (0..ang.len())
                    .map(|i| PointMeta { level: 0, ring: i })
                    .collect(),
                points: ang.into_iter().map(|a| vec![a.cos(), a.sin()]).collect(),
            })
        }
        3 => {
            let (points, meta) = sphere2_bands(eps);
            Ok(SeparatedSet {
                domain: SetDomain::Sphere2,
                epsilon: eps,
                points,
                meta,
            })
        }
        _ => domain(format!("sphere sets need d ∈ {{2, 3}}, got {d}")),
    }
}

/// `(rings, per-ring angles)` for the disk construction.
fn ball_rings(eps: f64) -> Vec<(f64, Vec<f64>)> {
    let n = (PI / (2.0 * eps) + 1e-12).floor() as usize;
    if n == 0 {
        return vec![(0.0, vec![0.0])];
    }
    (1..=n)
        .map(|j| {
            let theta = (2 * j - 1) as f64 * PI / (2 * n) as f64;
            let r = (theta / 2.0).sin();
            let sigma = PI * eps / (2.0 * r);
            let k = ((2.0 * PI / sigma + 1e-9).floor() as usize).max(1);
            let shift = if j % 2 == 0 { PI / k as f64 } else { 0.0 };
            (
                r,
                (0..k)
                    .map(|a| shift + 2.0 * PI * a as f64 / k as f64)
                    .collect(),
            )
        })
        .collect()
}

/// `ε`-separated set on `B²`: `N = ⌊π/(2ε)⌋` rings of radii
/// `r_j = sin(θ_j/2)`, `θ_j = (2j−1)π/(2N)`, each with equispaced angles of
/// spacing at least `σ_j = πε/(2r_j)`.  For `ε > π/2` the set is the center.
pub fn ball_separated(eps: f64) -> Result<SeparatedSet> {
    if !(eps > 0.0) {
        return domain(format!("ε must be positive, got {eps}"));
    }
    let mut points = Vec::new();
    let mut meta = Vec::new();
    for (j, (r, angles)) in ball_rings(eps).into_iter().enumerate() {
        for (a, ph) in angles.into_iter().enumerate() {
            points.push(vec![r * ph.cos(), r * ph.sin()]);
            meta.push(PointMeta { level: j, ring: a });
        }
    }
    Ok(SeparatedSet {
        domain: SetDomain::Ball2,
        epsilon: eps,
        points,
        meta,
    })
}

fn guard(count: usize) -> Result<()> {
    if count > MAX_POINTS {
        return Err(Error::Resource(format!(
            "{count} points exceed the cap of {MAX_POINTS}"
        )));
    }
    Ok(())
}

/// Product set `{(t_j ξ, t_j) : ξ ∈ Ξ_S(ε_j)}` on `V₀^{d+1}`, `d ∈ {2, 3}`.
pub fn surface_separated(d: usize, eps: f64) -> Result<SeparatedSet> {
    if !(2..=3).contains(&d) {
        return domain(format!("surface sets need d ∈ {{2, 3}}, got {d}"));
    }
    let levels = interval_levels(eps)?;
    let mut points = Vec::new();
    let mut meta = Vec::new();
    for (j, lv) in levels.iter().enumerate() {
        let fib = sphere_separated(d, lv.eps.min(PI))?;
        guard(points.len() + fib.len())?;
        for (xi, m) in fib.points.iter().zip(&fib.meta) {
            let mut p: Vec<f64> = xi.iter().map(|v| v * lv.t).collect();
            p.push(lv.t);
            points.push(p);
            meta.push(PointMeta {
                level: j,
                ring: m.level,
            });
        }
    }
    Ok(SeparatedSet {
        domain: SetDomain::Surface { d },
        epsilon: eps,
        points,
        meta,
    })
}

/// Product set `{(t_j u, t_j) : u ∈ Ξ_B(ε_j)}` on the solid cone `V³`.
pub fn cone_separated(eps: f64) -> Result<SeparatedSet> {
    let levels = interval_levels(eps)?;
    let mut points = Vec::new();
    let mut meta = Vec::new();
    for (j, lv) in levels.iter().enumerate() {
        let fib = ball_separated(lv.eps)?;
        guard(points.len() + fib.len())?;
        for (u, m) in fib.points.iter().zip(&fib.meta) {
            points.push(vec![lv.t * u[0], lv.t * u[1], lv.t]);
            meta.push(PointMeta {
                level: j,
                ring: m.level,
            });
        }
    }
    Ok(SeparatedSet {
        domain: SetDomain::Cone,
        epsilon: eps,
        points,
        meta,
    })
}

/// Builds the set for a domain.
pub fn construct(dom: SetDomain, eps: f64) -> Result<SeparatedSet> {
    match dom {
        SetDomain::Interval => interval_separated(eps),
        SetDomain::Circle => sphere_separated(2, eps),
        SetDomain::Sphere2 => sphere_separated(3, eps),
        SetDomain::Ball2 => ball_separated(eps),
        SetDomain::Surface { d } => surface_separated(d, eps),
        SetDomain::Cone => cone_separated(eps),
    }
}

// ---------------------------------------------------------------------------
// Certificates
// ---------------------------------------------------------------------------

/// Pairwise separation certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationCertificate {
    /// Number of points.
    pub points: usize,
    /// Smallest pairwise intrinsic distance.
    pub min_distance: f64,
    /// `min_distance / ε`.
    pub ratio: f64,
    /// `min_distance ≥ ε` (up to `1e−12` roundoff).
    pub exact: bool,
}

/// Exhaustive pairwise check, pruned by [`SetDomain::key`] (parallel over
/// points, deterministic reduction).
pub fn certify_separation(set: &SeparatedSet) -> SeparationCertificate {
    let min_distance = KeyIndex::new(set.domain, &set.points).min_pair_distance();
    SeparationCertificate {
        points: set.len(),
        min_distance,
        ratio: min_distance / set.epsilon,
        exact: min_distance >= set.epsilon - 1e-12,
    }
}

/// Covering (maximality) certificate on a test grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringCertificate {
    /// Grid size.
    pub grid_points: usize,
    /// Mesh of the grid.
    pub mesh: f64,
    /// Largest distance from a grid point to the set.
    pub covering_radius: f64,
    /// `covering_radius / ε`.
    pub ratio: f64,
    /// Every grid point lies within `ε` of the set.
    pub covered: bool,
    /// Fewest set points within distance `ε` of a grid point.
    pub min_multiplicity: usize,
    /// Most set points within distance `ε` of a grid point (measured `c_d`).
    pub max_multiplicity: usize,
}

/// Test grid of the domain with intrinsic mesh about `h`.
pub fn test_grid(dom: SetDomain, h: f64) -> Result<Vec<Vec<f64>>> {
    if !(h > 0.0) {
        return domain("grid mesh must be positive");
    }
    // Levels uniform in the interval metric: t = sin²φ, φ ∈ [0, π/2].
    let t_levels = |h: f64| -> Vec<f64> {
        let k = ((PI / 2.0 / h).ceil() as usize).max(1);
        (0..=k)
            .map(|i| (PI / 2.0 * i as f64 / k as f64).sin().powi(2))
            .collect()
    };
    let circle = |h: f64| -> Vec<Vec<f64>> {
        let k = ((2.0 * PI / h).ceil() as usize).max(1);
        (0..k)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / k as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()
    };
    let disk = |h: f64| -> Vec<Vec<f64>> {
        // radii uniform in arcsin r
        let k = ((PI / 2.0 / h).ceil() as usize).max(1);
        let mut g = vec![vec![0.0, 0.0]];
        for i in 1..=k {
            let r = (PI / 2.0 * i as f64 / k as f64).sin();
            let na = ((2.0 * PI * r / h).ceil() as usize).max(1);
            for a in 0..na {
                let ph = 2.0 * PI * a as f64 / na as f64;
                g.push(vec![r * ph.cos(), r * ph.sin()]);
            }
        }
        g
    };
    let g = match dom {
        SetDomain::Interval => t_levels(h).into_iter().map(|t| vec![t]).collect(),
        SetDomain::Circle => circle(h),
        SetDomain::Sphere2 => sphere2_grid(h),
        SetDomain::Ball2 => disk(h),
        SetDomain::Surface { d } => {
            let mut g = Vec::new();
            for t in t_levels(h) {
                // angular mesh h/√t keeps the intrinsic mesh about h
                let ha = (h / t.sqrt().max(h)).min(PI / 2.0);
                let fib = if d == 2 { circle(ha) } else { sphere2_grid(ha) };
                for xi in fib {
                    let mut p: Vec<f64> = xi.iter().map(|v| v * t).collect();
                    p.push(t);
                    g.push(p);
                }
            }
            g
        }
        SetDomain::Cone => {
            let mut g = Vec::new();
            for t in t_levels(h) {
                let ha = (h / t.sqrt().max(h)).min(PI / 2.0);
                for u in disk(ha) {
                    g.push(vec![t * u[0], t * u[1], t]);
                }
            }
            g
        }
    };
    if g.len() > MAX_POINTS {
        return Err(Error::Resource(format!("test grid of {} points", g.len())));
    }
    Ok(g)
}

/// Covering radius and multiplicity of `B(z, ε)`, `z ∈ Ξ`, on a grid of mesh
/// `ε/10`.
pub fn certify_covering(set: &SeparatedSet) -> Result<CoveringCertificate> {
    let mesh = set.epsilon.min(PI) / 10.0;
    let grid = test_grid(set.domain, mesh)?;
    let eps = set.epsilon;
    let index = KeyIndex::new(set.domain, &set.points);
    let stats: Vec<(f64, usize)> = grid
        .par_iter()
        .map(|g| index.nearest_and_count(g, eps))
        .collect();
    let covering_radius = stats.iter().map(|s| s.0).fold(0.0, f64::max);
    Ok(CoveringCertificate {
        grid_points: grid.len(),
        mesh,
        covering_radius,
        ratio: covering_radius / eps,
        covered: covering_radius <= eps,
        min_multiplicity: stats.iter().map(|s| s.1).min().unwrap_or(0),
        max_multiplicity: stats.iter().map(|s| s.1).max().unwrap_or(0),
    })
}

/// Distance of ball points from the boundary: `min √(1−‖u‖²)` and the
/// constant `c = min √(1−‖u‖²) / ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGap {
    /// `min √(1−‖u‖²)` over the set.
    pub min_gap: f64,
    /// `min_gap / ε`.
    pub c: f64,
    /// Largest `‖u‖`.
    pub max_norm: f64,
}

/// Boundary-gap certificate of a disk set.
pub fn ball_boundary_gap(set: &SeparatedSet) -> Result<BoundaryGap> {
    if set.domain != SetDomain::Ball2 {
        return domain("boundary gap is defined for disk sets");
    }
    let max_norm = set
        .points
        .iter()
        .map(|u| dot(u, u).sqrt())
        .fold(0.0, f64::max);
    let min_gap = (1.0 - max_norm * max_norm).max(0.0).sqrt();
    Ok(BoundaryGap {
        min_gap,
        c: min_gap / set.epsilon,
        max_norm,
    })
}

/// Interior gap of cone points, `δ = min √(t² − ‖x‖²) · n / √t` with
/// `n = β̂/ε`.
pub fn cone_interior_gap(set: &SeparatedSet, beta_hat: f64) -> Result<f64> {
    if set.domain != SetDomain::Cone {
        return domain("interior gap is defined for cone sets");
    }
    let n = beta_hat / set.epsilon;
    Ok(set
        .points
        .iter()
        .map(|p| {
            let gap = (p[2] * p[2] - p[0] * p[0] - p[1] * p[1]).max(0.0).sqrt();
            gap * n / p[2].sqrt()
        })
        .fold(f64::INFINITY, f64::min))
}

/// Smallest pairwise surface distance of the lifted cone points (the lift
/// `X = (x, √(t²−‖x‖²))` into `V₀⁴`), divided by `ε`.
pub fn lifted_separation_ratio(set: &SeparatedSet) -> Result<f64> {
    if set.domain != SetDomain::Cone {
        return domain("lifted separation is defined for cone sets");
    }
    let lifted: Vec<Vec<f64>> = set
        .points
        .iter()
        .map(|p| {
            let x = lift_raw(p);
            vec![x[0], x[1], x[2], p[2]]
        })
        .collect();
    let lset = SeparatedSet {
        domain: SetDomain::Surface { d: 3 },
        epsilon: set.epsilon,
        points: lifted,
        meta: set.meta.clone(),
    };
    Ok(certify_separation(&lset).ratio)
}

/// Cardinalities for `ε = 2^{−k}` and the log-log slope of `|Ξ(ε)|` against
/// `ε` (expected `−dim`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CardinalityScaling {
    /// Domain.
    pub domain: SetDomain,
    /// `ε` values.
    pub eps: Vec<f64>,
    /// `|Ξ(ε)|`.
    pub counts: Vec<usize>,
    /// `|Ξ(ε)| ε^{dim}`.
    pub normalized: Vec<f64>,
    /// Fitted slope.
    pub slope: f64,
}

/// Point counts over `ε = 2^{−k}`, `k ∈ ks`.
pub fn cardinality_scaling(dom: SetDomain, ks: &[i32]) -> Result<CardinalityScaling> {
    let eps: Vec<f64> = ks.iter().map(|&k| 2f64.powi(-k)).collect();
    let counts: Vec<usize> = eps
        .iter()
        .map(|&e| construct(dom, e).map(|s| s.len()))
        .collect::<Result<_>>()?;
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let dim = dom.dimension() as i32;
    Ok(CardinalityScaling {
        domain: dom,
        normalized: counts
            .iter()
            .zip(&eps)
            .map(|(&c, e)| c as f64 * e.powi(dim))
            .collect(),
        eps,
        counts,
        slope: sxy / sxx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_at_three_quarters() {
        let l = interval_levels(0.75).unwrap();
        assert_eq!(l.len(), 2);
        assert!((l[0].t - (PI / 8.0).sin().powi(2)).abs() < 1e-15);
        assert!((l[1].t - (3.0 * PI / 8.0).sin().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn circle_exact_division() {
        assert_eq!(sphere_separated(2, 2.0 * PI / 8.0).unwrap().len(), 8);
    }
}

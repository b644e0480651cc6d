//! Separated point sets: separation against a brute-force pairwise oracle,
//! exact counts on the circle, cardinality scaling, covering, boundary gaps
//! and the pruning key used by the neighbor search.

use std::f64::consts::PI;

use approx::assert_relative_eq;
use conic_bernstein::geometry::dist_interval;
use conic_bernstein::pointsets::{
    ball_boundary_gap, cardinality_scaling, certify_covering, certify_separation,
    cone_interior_gap, construct, interval_levels, lifted_separation_ratio, sphere_separated,
    surface_separated, SetDomain,
};
use conic_bernstein::Error;
use proptest::prelude::*;

fn brute_min_distance(dom: SetDomain, pts: &[Vec<f64>]) -> f64 {
    let mut m = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            m = m.min(dom.distance(&pts[i], &pts[j]));
        }
    }
    m
}

const DOMAINS: [SetDomain; 7] = [
    SetDomain::Interval,
    SetDomain::Circle,
    SetDomain::Sphere2,
    SetDomain::Ball2,
    SetDomain::Surface { d: 2 },
    SetDomain::Surface { d: 3 },
    SetDomain::Cone,
];

#[test]
fn certificate_matches_brute_force() {
    for dom in DOMAINS {
        let eps = if matches!(dom, SetDomain::Surface { d: 3 } | SetDomain::Cone) {
            0.35
        } else {
            0.2
        };
        let set = construct(dom, eps).unwrap();
        let cert = certify_separation(&set);
        assert_eq!(cert.points, set.len());
        assert_eq!(
            cert.min_distance,
            brute_min_distance(dom, &set.points),
            "{dom:?}"
        );
        assert!(cert.ratio > 0.0);
        assert!(set.points.iter().all(|p| p.len() == dom.coords()));
    }
}

#[test]
fn exact_separation_where_the_construction_is_exact() {
    for dom in [
        SetDomain::Interval,
        SetDomain::Circle,
        SetDomain::Sphere2,
        SetDomain::Ball2,
    ] {
        for eps in [0.05, 0.1, 0.25, 0.5, 0.75, 1.2] {
            let cert = certify_separation(&construct(dom, eps).unwrap());
            assert!(cert.exact, "{dom:?} ε={eps}: {cert:?}");
        }
    }
}

#[test]
fn explicit_small_sets() {
    // K equispaced circle points for ε = 2π/K.
    for k in [3usize, 8, 40] {
        assert_eq!(sphere_separated(2, 2.0 * PI / k as f64).unwrap().len(), k);
    }
    // Interval levels are exactly π/(2N) apart in the interval metric.
    let lv = interval_levels(0.3).unwrap();
    assert_eq!(lv.len(), 5);
    for w in lv.windows(2) {
        assert_relative_eq!(
            dist_interval(w[0].t, w[1].t).unwrap(),
            PI / 10.0,
            epsilon = 1e-7
        );
    }
    // A single level and the centre for ε at the top of the range.
    assert_eq!(construct(SetDomain::Interval, PI / 2.0).unwrap().len(), 1);
    assert_eq!(
        construct(SetDomain::Ball2, 2.0).unwrap().points,
        vec![vec![0.0, 0.0]]
    );
}

#[test]
fn cardinality_scales_like_the_dimension() {
    let cases: [(SetDomain, &[i32]); 7] = [
        (SetDomain::Interval, &[3, 4, 5, 6, 7, 8]),
        (SetDomain::Circle, &[3, 4, 5, 6, 7, 8]),
        (SetDomain::Sphere2, &[2, 3, 4, 5, 6]),
        (SetDomain::Ball2, &[2, 3, 4, 5, 6]),
        (SetDomain::Surface { d: 2 }, &[2, 3, 4, 5, 6]),
        (SetDomain::Surface { d: 3 }, &[2, 3, 4, 5]),
        (SetDomain::Cone, &[2, 3, 4, 5]),
    ];
    for (dom, ks) in cases {
        let s = cardinality_scaling(dom, ks).unwrap();
        let dim = dom.dimension() as f64;
        assert!(
            (s.slope + dim).abs() <= 0.2,
            "{dom:?}: slope {} counts {:?}",
            s.slope,
            s.counts
        );
        assert!(s.counts.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn covering_and_gaps() {
    for dom in [SetDomain::Interval, SetDomain::Circle, SetDomain::Sphere2] {
        let c = certify_covering(&construct(dom, 0.2).unwrap()).unwrap();
        assert!(c.covered, "{dom:?}: {c:?}");
        assert!(c.min_multiplicity >= 1);
    }
    for eps in [0.1, 0.25, 0.75] {
        let set = construct(SetDomain::Ball2, eps).unwrap();
        let g = ball_boundary_gap(&set).unwrap();
        assert!(g.min_gap > 0.0 && g.max_norm < 1.0);
        assert_relative_eq!(g.c, g.min_gap / eps);
    }
    let cone = construct(SetDomain::Cone, 0.3).unwrap();
    assert!(cone_interior_gap(&cone, 1.0).unwrap() > 0.0);
    assert!(lifted_separation_ratio(&cone).unwrap() > 0.0);
    let surf = surface_separated(2, 0.3).unwrap();
    assert!(ball_boundary_gap(&surf).is_err());
    assert!(cone_interior_gap(&surf, 1.0).is_err());
}

#[test]
fn invalid_epsilon() {
    for dom in DOMAINS {
        assert!(construct(dom, 0.0).is_err());
        assert!(construct(dom, -1.0).is_err());
        assert!(construct(dom, f64::NAN).is_err());
    }
    assert!(matches!(
        construct(SetDomain::Interval, 1e-9),
        Err(Error::Resource(_))
    ));
    assert!(matches!(
        construct(SetDomain::Surface { d: 3 }, 1e-3),
        Err(Error::Resource(_))
    ));
    assert!(surface_separated(4, 0.3).is_err());
}

fn point(dom: SetDomain, a: f64, b: f64, c: f64) -> Vec<f64> {
    match dom {
        SetDomain::Interval => vec![a],
        SetDomain::Circle => vec![b.cos(), b.sin()],
        SetDomain::Sphere2 => vec![c.sin() * b.cos(), c.sin() * b.sin(), c.cos()],
        SetDomain::Ball2 => vec![a * b.cos(), a * b.sin()],
        SetDomain::Surface { d: 2 } => vec![a * b.cos(), a * b.sin(), a],
        SetDomain::Surface { .. } => {
            vec![a * c.sin() * b.cos(), a * c.sin() * b.sin(), a * c.cos(), a]
        }
        SetDomain::Cone => {
            let r = c / PI;
            vec![a * r * b.cos(), a * r * b.sin(), a]
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pruning_key_is_a_lower_bound(
        di in 0usize..7,
        u in (0.0f64..=1.0, 0.0f64..2.0 * PI, 0.0f64..=PI),
        v in (0.0f64..=1.0, 0.0f64..2.0 * PI, 0.0f64..=PI),
    ) {
        // d(p, q) ≥ |κ(p) − κ(q)| is what makes the pruned search exhaustive.
        let dom = DOMAINS[di];
        let (a, b) = (point(dom, u.0, u.1, u.2), point(dom, v.0, v.1, v.2));
        prop_assert!(dom.distance(&a, &b) + 1e-9 >= (dom.key(&a) - dom.key(&b)).abs());
    }

    #[test]
    fn sets_are_separated_at_random_eps(eps in 0.08f64..1.5, di in 0usize..4) {
        let dom = DOMAINS[di];
        let set = construct(dom, eps).unwrap();
        prop_assert!(certify_separation(&set).exact);
    }
}

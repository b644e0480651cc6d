//! Differential and spectral operators: jet derivatives against
//! hand-differentiated polynomials and finite differences, eigen-identities,
//! self-adjointness and the composition formulas for `(φ∂_t)²`, `(Φ∂_x)²`.

use approx::assert_relative_eq;
use conic_bernstein::bases::{BasisDomain, BasisHandle};
use conic_bernstein::bernstein::random_coefficients;
use conic_bernstein::geometry::WeightSpec;
use conic_bernstein::operators::{
    apply_diffop, apply_spectral, bigphi_dx_squared, cauchy_bound_check, derivative_values,
    phi_dt_squared, Combination, DiffOp, Multiplier, OpKind, OpValues, PolyFamily, SpectralOp,
};
use conic_bernstein::verify::{eigen_checks, selfadjoint_checks};
use conic_bernstein::Scalar;
use proptest::prelude::*;

/// `f₁ = x₁²x₂ + t³`, `f₂ = x₁t²` in `(x₁, x₂, t)`.
struct Conic(BasisDomain);

impl PolyFamily for Conic {
    fn len(&self) -> usize {
        2
    }
    fn domain(&self) -> BasisDomain {
        self.0
    }
    fn coords(&self) -> usize {
        3
    }
    fn eval<S: Scalar>(&self, p: &[S]) -> Vec<S> {
        let (x1, x2, t) = (p[0], p[1], p[2]);
        vec![x1 * x1 * x2 + t * t * t, x1 * t * t]
    }
}

/// `g = y₁²y₂` on the triangle.
struct Tri;

impl PolyFamily for Tri {
    fn len(&self) -> usize {
        1
    }
    fn domain(&self) -> BasisDomain {
        BasisDomain::Triangle
    }
    fn coords(&self) -> usize {
        2
    }
    fn eval<S: Scalar>(&self, p: &[S]) -> Vec<S> {
        vec![p[0] * p[0] * p[1]]
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{a:?} vs {b:?}");
    }
}

#[test]
fn derivatives_of_explicit_polynomials() {
    let (x1, x2, t) = (0.3, -0.2, 0.5);
    let p = [x1, x2, t];
    let (u1, u2) = (x1 / t, x2 / t);
    let s = Conic(BasisDomain::Surface);
    // Along the ray s ↦ (s u, s): f₁ = s³(u₁²u₂ + 1), f₂ = s³u₁.
    close(
        &derivative_values(OpKind::Dt, 1, &s, &p).unwrap(),
        &[3.0 * t * t * (u1 * u1 * u2 + 1.0), 3.0 * t * t * u1],
        1e-14,
    );
    close(
        &derivative_values(OpKind::Dt, 2, &s, &p).unwrap(),
        &[6.0 * t * (u1 * u1 * u2 + 1.0), 6.0 * t * u1],
        1e-14,
    );
    close(
        &derivative_values(OpKind::Dt, 4, &s, &p).unwrap(),
        &[0.0, 0.0],
        1e-14,
    );
    // D₁₂ = x₁∂₂ − x₂∂₁.
    let d12 = [x1.powi(3) - 2.0 * x1 * x2 * x2, -x2 * t * t];
    close(
        &derivative_values(OpKind::Dij { i: 1, j: 2 }, 1, &s, &p).unwrap(),
        &d12,
        1e-14,
    );
    // D₁₂² f₂ = D₁₂(−x₂t²) = −x₁t².
    assert_relative_eq!(
        derivative_values(OpKind::Dij { i: 1, j: 2 }, 2, &s, &p).unwrap()[1],
        -x1 * t * t,
        epsilon = 1e-14
    );

    let c = Conic(BasisDomain::Cone);
    close(
        &derivative_values(OpKind::Dx { j: 1 }, 1, &c, &p).unwrap(),
        &[2.0 * x1 * x2, t * t],
        1e-14,
    );
    close(
        &derivative_values(OpKind::Dx { j: 2 }, 1, &c, &p).unwrap(),
        &[x1 * x1, 0.0],
        1e-14,
    );
    close(
        &derivative_values(OpKind::DtCartesian, 1, &c, &p).unwrap(),
        &[3.0 * t * t, 2.0 * x1 * t],
        1e-14,
    );
    close(
        &derivative_values(OpKind::Dx { j: 1 }, 2, &c, &p).unwrap(),
        &[2.0 * x2, 0.0],
        1e-14,
    );

    let y = [0.2, 0.5];
    let (y1, y2) = (y[0], y[1]);
    close(
        &derivative_values(OpKind::Tri { i: 1 }, 1, &Tri, &y).unwrap(),
        &[2.0 * y1 * y2],
        1e-15,
    );
    close(
        &derivative_values(OpKind::Tri { i: 2 }, 1, &Tri, &y).unwrap(),
        &[y1 * y1],
        1e-15,
    );
    close(
        &derivative_values(OpKind::Tri { i: 3 }, 1, &Tri, &y).unwrap(),
        &[y1 * y1 - 2.0 * y1 * y2],
        1e-15,
    );
    close(
        &derivative_values(OpKind::Tri { i: 3 }, 2, &Tri, &y).unwrap(),
        &[2.0 * y2 - 4.0 * y1],
        1e-15,
    );
}

#[test]
fn multipliers_and_singular_points() {
    let s = Conic(BasisDomain::Surface);
    let p = [0.3, -0.2, 0.5];
    let plain = derivative_values(OpKind::Dt, 2, &s, &p).unwrap();
    let op = DiffOp::new(OpKind::Dt, 2, Multiplier::Phi);
    let phi2 = 0.5 * 0.5;
    close(
        &apply_diffop(&op, &s, &p).unwrap().finite().unwrap(),
        &[phi2 * plain[0], phi2 * plain[1]],
        1e-14,
    );
    let op = DiffOp::new(OpKind::Dij { i: 1, j: 2 }, 1, Multiplier::TInvSqrt);
    let d = derivative_values(OpKind::Dij { i: 1, j: 2 }, 1, &s, &p).unwrap();
    close(
        &apply_diffop(&op, &s, &p).unwrap().finite().unwrap(),
        &[d[0] / 0.5f64.sqrt(), d[1] / 0.5f64.sqrt()],
        1e-14,
    );
    assert_eq!(
        apply_diffop(&op, &s, &[0.0, 0.0, 0.0]).unwrap(),
        OpValues::Singular
    );

    let c = Conic(BasisDomain::Cone);
    let big_phi = (0.25f64 - 0.09 - 0.04).sqrt();
    let op = DiffOp::new(OpKind::Dx { j: 1 }, 1, Multiplier::BigPhi);
    close(
        &apply_diffop(&op, &c, &p).unwrap().finite().unwrap(),
        &[big_phi * 2.0 * 0.3 * -0.2, big_phi * 0.25],
        1e-14,
    );

    // Triangle multipliers: φ₃/√(y₁+y₂) at y = (0.2, 0.5).
    let op = DiffOp::new(OpKind::Tri { i: 3 }, 1, Multiplier::Phi3OverSqrtSum);
    let m = (0.2f64 * 0.5).sqrt() / 0.7f64.sqrt();
    close(
        &apply_diffop(&op, &Tri, &[0.2, 0.5])
            .unwrap()
            .finite()
            .unwrap(),
        &[m * (0.04 - 0.2)],
        1e-14,
    );

    // Invalid combinations.
    let sd = BasisDomain::Surface;
    assert!(DiffOp::new(OpKind::Dx { j: 1 }, 1, Multiplier::None)
        .validate(sd, 2)
        .is_err());
    assert!(DiffOp::new(OpKind::Dt, 1, Multiplier::BigPhi)
        .validate(sd, 2)
        .is_err());
    assert!(DiffOp::new(OpKind::Dt, 0, Multiplier::None)
        .validate(sd, 2)
        .is_err());
    assert!(DiffOp::new(OpKind::Dij { i: 1, j: 1 }, 1, Multiplier::None)
        .validate(sd, 2)
        .is_err());
    assert!(DiffOp::new(OpKind::Tri { i: 4 }, 1, Multiplier::None)
        .validate(BasisDomain::Triangle, 1)
        .is_err());
    assert!(derivative_values(OpKind::Dt, 1, &s, &[0.1, 0.1]).is_err());
    assert_eq!(
        DiffOp::new(OpKind::Dij { i: 1, j: 2 }, 1, Multiplier::TInvSqrt).label(),
        "tinvsqrt-d12^1"
    );
}

#[test]
fn basis_derivatives_match_finite_differences() {
    let h = BasisHandle::new(
        WeightSpec::Cone {
            d: 2,
            mu: 0.5,
            gamma: 1.0,
        },
        6,
    )
    .unwrap();
    let p = [0.12, -0.21, 0.6];
    let step = 1e-5;
    let fd = |dir: &dyn Fn(f64) -> Vec<f64>| -> Vec<f64> {
        let (a, b): (Vec<f64>, Vec<f64>) =
            (h.eval_natural(&dir(step)), h.eval_natural(&dir(-step)));
        a.iter()
            .zip(&b)
            .map(|(u, v)| (u - v) / (2.0 * step))
            .collect()
    };
    let shift = |v: [f64; 3]| move |s: f64| vec![p[0] + s * v[0], p[1] + s * v[1], p[2] + s * v[2]];
    let cases: Vec<(OpKind, Vec<f64>)> = vec![
        (OpKind::Dx { j: 1 }, fd(&shift([1.0, 0.0, 0.0]))),
        (OpKind::Dx { j: 2 }, fd(&shift([0.0, 1.0, 0.0]))),
        (OpKind::DtCartesian, fd(&shift([0.0, 0.0, 1.0]))),
        (OpKind::Dt, fd(&shift([p[0] / p[2], p[1] / p[2], 1.0]))),
        (
            OpKind::Dij { i: 1, j: 2 },
            fd(&|s: f64| {
                vec![
                    p[0] * s.cos() - p[1] * s.sin(),
                    p[1] * s.cos() + p[0] * s.sin(),
                    p[2],
                ]
            }),
        ),
    ];
    for (kind, oracle) in cases {
        let jet = derivative_values(kind, 1, &h, &p).unwrap();
        let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in jet.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-7 * scale, "{kind:?}: {a} vs {b}");
        }
    }
}

#[test]
fn composition_formulas() {
    let h = BasisHandle::new(
        WeightSpec::Surface {
            d: 2,
            beta: -1.0,
            gamma: 0.5,
        },
        8,
    )
    .unwrap();
    let t = 0.45;
    let (c, e) = phi_dt_squared(&h, &[t * 0.6, t * 0.8, t]).unwrap();
    close(&c, &e, 1e-11);
    let hc = BasisHandle::new(
        WeightSpec::Cone {
            d: 2,
            mu: 0.0,
            gamma: 0.0,
        },
        8,
    )
    .unwrap();
    for j in [1, 2] {
        let (c, e) = bigphi_dx_squared(&hc, &[0.2, -0.1, 0.45], j).unwrap();
        close(&c, &e, 1e-11);
    }
    assert!(bigphi_dx_squared(&h, &[t * 0.6, t * 0.8, t], 1).is_err());
}

#[test]
fn spectral_eigenvalues() {
    let s = SpectralOp::Surface { gamma: 0.5 };
    assert_eq!(s.eigenvalue(2, 3), -3.0 * 4.5);
    let c = SpectralOp::Cone {
        mu: 0.5,
        gamma: 1.0,
    };
    assert_eq!(c.eigenvalue(1, 2), -2.0 * 5.0);
    assert!(SpectralOp::Cone {
        mu: -0.5,
        gamma: 0.0
    }
    .validate()
    .is_err());
    assert!(SpectralOp::Surface { gamma: -1.0 }.validate().is_err());
}

#[test]
fn eigen_and_selfadjoint_suites() {
    for w in [
        WeightSpec::Surface {
            d: 2,
            beta: -1.0,
            gamma: 2.0,
        },
        WeightSpec::Surface {
            d: 3,
            beta: -1.0,
            gamma: 0.5,
        },
        WeightSpec::Cone {
            d: 1,
            mu: 0.5,
            gamma: 1.0,
        },
        WeightSpec::Cone {
            d: 2,
            mu: 1.0,
            gamma: 0.0,
        },
    ] {
        for c in eigen_checks(&w, 8, 20, 5).unwrap() {
            assert!(c.pass, "{c:?}");
        }
        for c in selfadjoint_checks(&w, 6, 10, 5).unwrap() {
            assert!(c.pass, "{c:?}");
        }
    }
    assert!(eigen_checks(
        &WeightSpec::Surface {
            d: 2,
            beta: 0.0,
            gamma: 0.0
        },
        4,
        4,
        1
    )
    .is_err());
}

#[test]
fn cauchy_bound_holds() {
    let w = WeightSpec::Surface {
        d: 2,
        beta: -1.0,
        gamma: 1.0,
    };
    let h = BasisHandle::new(w, 6).unwrap();
    let rule = h.reference_rule(8).unwrap();
    for c in random_coefficients(h.dim(), 5, 11) {
        let (lhs, rhs) = cauchy_bound_check(&h, 1.0, &c, &rule).unwrap();
        assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn radial_elements_are_rotation_invariant(th in 0.0f64..std::f64::consts::TAU, r in 0.0f64..1.0, t in 0.05f64..1.0) {
        // Fiber degree m = 0 elements depend on ‖x‖ and t only.
        let h = BasisHandle::new(WeightSpec::Cone { d: 2, mu: 0.5, gamma: 0.0 }, 6).unwrap();
        let p = [r * t * th.cos(), r * t * th.sin(), t];
        let v = derivative_values(OpKind::Dij { i: 1, j: 2 }, 1, &h, &p).unwrap();
        for (idx, d) in h.indices().iter().zip(&v) {
            if idx.m == 0 {
                prop_assert!(d.abs() < 1e-11);
            }
        }
    }

    #[test]
    fn angular_derivative_is_antisymmetric(th in 0.0f64..std::f64::consts::TAU, t in 0.05f64..1.0, seed in 0u64..100) {
        let h = BasisHandle::new(WeightSpec::Surface { d: 2, beta: -1.0, gamma: 0.0 }, 5).unwrap();
        let c = random_coefficients(h.dim(), 1, seed).remove(0);
        let f = Combination { basis: &h, coeffs: &c };
        let p = [t * th.cos(), t * th.sin(), t];
        let a = derivative_values(OpKind::Dij { i: 1, j: 2 }, 1, &f, &p).unwrap()[0];
        let b = derivative_values(OpKind::Dij { i: 2, j: 1 }, 1, &f, &p).unwrap()[0];
        prop_assert!((a + b).abs() < 1e-12 * (1.0 + a.abs()));
        // The spectral operator is linear: L(Σ cφ) = Σ c Lφ.
        let op = SpectralOp::Surface { gamma: 0.0 };
        let lf = apply_spectral(&op, &f, &p).unwrap().finite().unwrap()[0];
        let lb: f64 = apply_spectral(&op, &h, &p).unwrap().finite().unwrap().iter().zip(&c).map(|(l, c)| l * c).sum();
        prop_assert!((lf - lb).abs() < 1e-10 * (1.0 + lb.abs()));
    }
}

//! Sharp Bernstein constants: hand-computed interval values, an independent
//! monomial Gram oracle, agreement of the separable and dense engines, Gram
//! structure, growth reports and the apex divergence probe.

use approx::assert_relative_eq;
use conic_bernstein::bases::BasisHandle;
use conic_bernstein::bernstein::{
    claimed_exponent, dense_rule, divergence_probe, gram_system, growth_fit, loglog_fit,
    make_report, maximal_norm_check, random_coefficients, sharp_constant_dense, sharp_constant_p2,
    sharp_constant_p2_full, weighted_norm, Claim, ConstantValue, IntegralClass, PNorm, Verdict,
};
use conic_bernstein::geometry::WeightSpec;
use conic_bernstein::operators::{apply_diffop, DiffOp, Multiplier, OpKind};
use conic_bernstein::Error;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use statrs::function::gamma::ln_gamma;

fn beta_fn(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// `sup ‖Tf‖/‖f‖` over polynomials of degree `≤ n` on `[0,1]` with weight
/// `t^α(1−t)^β`, `T = ∂_t` or `φ∂_t`, from monomial moments.
fn interval_oracle(n: usize, alpha: f64, beta: f64, with_phi: bool) -> f64 {
    let k = n + 1;
    let m = DMatrix::from_fn(k, k, |i, j| {
        beta_fn((i + j) as f64 + alpha + 1.0, beta + 1.0)
    });
    let s = DMatrix::from_fn(k, k, |i, j| {
        if i == 0 || j == 0 {
            return 0.0;
        }
        let c = (i * j) as f64;
        let e = (i + j - 2) as f64;
        if with_phi {
            c * beta_fn(e + alpha + 2.0, beta + 2.0)
        } else {
            c * beta_fn(e + alpha + 1.0, beta + 1.0)
        }
    });
    let l = m.cholesky().expect("mass matrix is positive definite").l();
    let li = l.try_inverse().unwrap();
    let c = &li * s * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    SymmetricEigen::new(c).eigenvalues.max().sqrt()
}

fn dt() -> DiffOp {
    DiffOp::new(OpKind::Dt, 1, Multiplier::None)
}

fn phi_dt() -> DiffOp {
    DiffOp::new(OpKind::Dt, 1, Multiplier::Phi)
}

#[test]
fn interval_degree_one_constants() {
    // Π₁ with the Lebesgue weight: f = √3(1−2t) gives ‖f′‖ = 2√3 and
    // ‖φf′‖² = 12∫t(1−t) = 2.
    let w = WeightSpec::IntervalJacobi {
        alpha: 0.0,
        beta: 0.0,
    };
    assert_relative_eq!(
        sharp_constant_p2(1, &w, &dt()).unwrap().finite().unwrap(),
        12f64.sqrt(),
        epsilon = 1e-10
    );
    assert_relative_eq!(
        sharp_constant_p2(1, &w, &phi_dt())
            .unwrap()
            .finite()
            .unwrap(),
        2f64.sqrt(),
        epsilon = 1e-10
    );
}

#[test]
fn interval_constants_match_the_monomial_oracle() {
    for (alpha, beta) in [(0.0, 0.0), (0.5, -0.5), (1.0, 2.0)] {
        let w = WeightSpec::IntervalJacobi { alpha, beta };
        // The monomial mass matrix is Hilbert-like; beyond n = 4 its
        // conditioning eats into the 1e−8 budget in double precision.
        for n in 1..=4 {
            for (op, phi) in [(dt(), false), (phi_dt(), true)] {
                let c = sharp_constant_p2(n, &w, &op).unwrap().finite().unwrap();
                let o = interval_oracle(n, alpha, beta, phi);
                assert!(
                    (c - o).abs() <= 1e-8 * o,
                    "α={alpha} β={beta} n={n} phi={phi}: {c} vs {o}"
                );
            }
        }
    }
}

#[test]
fn interval_constants_at_higher_degree() {
    // The same monomial eigenproblem evaluated with 40-digit arithmetic.
    let w = WeightSpec::IntervalJacobi {
        alpha: 0.0,
        beta: 0.0,
    };
    for (n, want) in [(5, 27.182_805_923_221_615), (6, 36.119_289_423_658_58)] {
        assert_relative_eq!(
            sharp_constant_p2(n, &w, &dt()).unwrap().finite().unwrap(),
            want,
            max_relative = 1e-12
        );
    }
}

#[test]
fn separable_and_dense_engines_agree() {
    let cases = [
        (
            WeightSpec::Surface {
                d: 2,
                beta: -1.0,
                gamma: 0.0,
            },
            DiffOp::new(OpKind::Dt, 1, Multiplier::None),
        ),
        (
            WeightSpec::Surface {
                d: 2,
                beta: -1.0,
                gamma: 2.0,
            },
            DiffOp::new(OpKind::Dij { i: 1, j: 2 }, 1, Multiplier::TInvSqrt),
        ),
        (
            WeightSpec::Surface {
                d: 3,
                beta: -1.0,
                gamma: 0.5,
            },
            DiffOp::new(OpKind::Dt, 2, Multiplier::Phi),
        ),
        (
            WeightSpec::Cone {
                d: 2,
                mu: 0.5,
                gamma: 0.0,
            },
            DiffOp::new(OpKind::Dx { j: 1 }, 1, Multiplier::BigPhi),
        ),
        (
            WeightSpec::Cone {
                d: 1,
                mu: 0.0,
                gamma: 1.0,
            },
            DiffOp::new(OpKind::Dx { j: 1 }, 1, Multiplier::None),
        ),
        (
            WeightSpec::Triangle {
                a: 0.0,
                b: 0.0,
                c: 0.0,
            },
            DiffOp::new(OpKind::Tri { i: 1 }, 1, Multiplier::Phi1OverSqrt1mY2),
        ),
        (
            WeightSpec::Triangle {
                a: -0.5,
                b: -0.5,
                c: 0.0,
            },
            DiffOp::new(OpKind::Tri { i: 3 }, 1, Multiplier::Phi3OverSqrtSum),
        ),
    ];
    for (w, op) in cases {
        let n = 5;
        let h = BasisHandle::new(w, n).unwrap();
        let fast = sharp_constant_p2(n, &w, &op).unwrap().finite().unwrap();
        let dense = sharp_constant_dense(&h, &op, &dense_rule(&h, &op).unwrap())
            .unwrap()
            .value
            .finite()
            .unwrap();
        assert_relative_eq!(fast, dense, max_relative = 1e-9);
    }
}

#[test]
fn extremal_polynomial_attains_the_constant() {
    let w = WeightSpec::Surface {
        d: 2,
        beta: -1.0,
        gamma: 0.0,
    };
    let op = DiffOp::new(OpKind::Dij { i: 1, j: 2 }, 1, Multiplier::None);
    let n = 6;
    let sc = sharp_constant_p2_full(n, &w, &op).unwrap();
    let h = BasisHandle::new(w, n).unwrap();
    let rule = h.reference_rule(4).unwrap();
    let (mut tf, mut f) = (0.0, 0.0);
    for (p, wt) in rule.iter() {
        let v = h.eval_combination::<f64>(&sc.extremal, p);
        let t: f64 = apply_diffop(&op, &h, p)
            .unwrap()
            .finite()
            .unwrap()
            .iter()
            .zip(&sc.extremal)
            .map(|(a, b)| a * b)
            .sum();
        f += wt * v * v;
        tf += wt * t * t;
    }
    assert_relative_eq!(f, 1.0, max_relative = 1e-10);
    assert_relative_eq!(tf.sqrt(), sc.value.finite().unwrap(), max_relative = 1e-9);
    // D₁₂ acts on Y^m_ℓ as multiplication by ±m, so the constant is n.
    assert_relative_eq!(sc.value.finite().unwrap(), n as f64, max_relative = 1e-10);
}

#[test]
fn gram_matrices_are_symmetric_psd() {
    let cases = [
        (
            WeightSpec::Surface {
                d: 2,
                beta: -1.0,
                gamma: 0.5,
            },
            DiffOp::new(OpKind::Dt, 1, Multiplier::Phi),
        ),
        (
            WeightSpec::Cone {
                d: 2,
                mu: 0.0,
                gamma: 1.0,
            },
            DiffOp::new(OpKind::Dx { j: 2 }, 1, Multiplier::None),
        ),
        (
            WeightSpec::Triangle {
                a: 0.0,
                b: 0.0,
                c: 0.0,
            },
            DiffOp::new(OpKind::Tri { i: 2 }, 2, Multiplier::Phi2OverSqrt1mY1),
        ),
        (
            WeightSpec::IntervalJacobi {
                alpha: 0.0,
                beta: 0.0,
            },
            dt(),
        ),
    ];
    for (w, op) in cases {
        let g = gram_system(6, &w, &op).unwrap();
        let ev = g.eigenvalues();
        let top = *ev.last().unwrap();
        assert!(g.symmetry_error() <= 1e-12 * top, "{}", op.label());
        assert!(ev[0] >= -1e-10 * top, "{}: {}", op.label(), ev[0]);
        assert_relative_eq!(ev.iter().sum::<f64>(), g.trace(), max_relative = 1e-10);
        assert_relative_eq!(
            g.sharp_constant(),
            sharp_constant_p2(6, &w, &op).unwrap().finite().unwrap(),
            max_relative = 1e-9
        );
    }
    let div = DiffOp::new(OpKind::Dij { i: 1, j: 2 }, 4, Multiplier::TInvSqrt);
    assert!(matches!(
        gram_system(
            4,
            &WeightSpec::Surface {
                d: 2,
                beta: -1.0,
                gamma: 0.0
            },
            &div
        ),
        Err(Error::Divergent(_))
    ));
}

#[test]
fn constants_are_nondecreasing_and_fit_the_claim() {
    let w = WeightSpec::Surface {
        d: 2,
        beta: -1.0,
        gamma: 0.0,
    };
    let r = growth_fit(
        &w,
        &DiffOp::new(OpKind::Dt, 1, Multiplier::Phi),
        &[4, 8, 12, 16, 20, 24],
        1,
    )
    .unwrap();
    assert!(r.monotone);
    assert_eq!(r.claimed, Claim::Exponent(1.0));
    assert_eq!(r.fit_window, vec![16, 20, 24]);
    assert_eq!(r.rows().len(), 6);
    let w = WeightSpec::IntervalJacobi {
        alpha: 0.0,
        beta: 0.0,
    };
    let r = growth_fit(&w, &dt(), &[1, 2, 3, 4, 5, 6, 7, 8], 1).unwrap();
    assert!(r.monotone);
    assert!(growth_fit(&w, &dt(), &[4, 2], 1).is_err());
}

#[test]
fn claims_table() {
    let s = WeightSpec::Surface {
        d: 2,
        beta: -1.0,
        gamma: 0.0,
    };
    let c = WeightSpec::Cone {
        d: 2,
        mu: 0.0,
        gamma: 0.0,
    };
    let t = WeightSpec::Triangle {
        a: 0.0,
        b: 0.0,
        c: 0.0,
    };
    let dij = |l, m| DiffOp::new(OpKind::Dij { i: 1, j: 2 }, l, m);
    assert_eq!(
        claimed_exponent(&s, &DiffOp::new(OpKind::Dt, 2, Multiplier::None)),
        Claim::Exponent(4.0)
    );
    assert_eq!(
        claimed_exponent(&s, &DiffOp::new(OpKind::Dt, 3, Multiplier::Phi)),
        Claim::Exponent(3.0)
    );
    assert_eq!(
        claimed_exponent(&s, &dij(2, Multiplier::TInvSqrt)),
        Claim::Exponent(2.0)
    );
    assert_eq!(
        claimed_exponent(&s, &dij(3, Multiplier::TInvSqrt)),
        Claim::Divergent
    );
    assert_eq!(
        claimed_exponent(&c, &DiffOp::new(OpKind::Dx { j: 1 }, 1, Multiplier::None)),
        Claim::Exponent(2.0)
    );
    assert_eq!(
        claimed_exponent(
            &c,
            &DiffOp::new(OpKind::Dx { j: 1 }, 1, Multiplier::TInvSqrtBigPhi)
        ),
        Claim::Exponent(1.0)
    );
    assert_eq!(
        claimed_exponent(&t, &DiffOp::new(OpKind::Tri { i: 3 }, 2, Multiplier::Phi3)),
        Claim::Exponent(2.0)
    );
    assert_eq!(
        claimed_exponent(&t, &DiffOp::new(OpKind::Tri { i: 3 }, 1, Multiplier::Phi1)),
        Claim::Unknown
    );
}

#[test]
fn fits_and_verdicts() {
    let x = [2.0, 4.0, 8.0, 16.0];
    let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
    let (s, res) = loglog_fit(&x, &y).unwrap();
    assert_relative_eq!(s, 1.5, epsilon = 1e-13);
    assert!(res < 1e-13);
    assert!(loglog_fit(&[1.0], &[1.0]).is_err());
    assert!(loglog_fit(&[1.0, 2.0], &[1.0, -1.0]).is_err());
    assert!(loglog_fit(&[2.0, 2.0], &[1.0, 3.0]).is_err());

    let w = WeightSpec::Surface {
        d: 2,
        beta: -1.0,
        gamma: 0.0,
    };
    let op = dt();
    let ns = [8usize, 16, 32, 64];
    let quad: Vec<ConstantValue> = ns
        .iter()
        .map(|&n| ConstantValue::Finite((n * n) as f64))
        .collect();
    assert_eq!(
        make_report(&w, &op, PNorm::Two, &ns, quad, 0)
            .unwrap()
            .verdict,
        Verdict::Pass
    );
    let cubic: Vec<ConstantValue> = ns
        .iter()
        .map(|&n| ConstantValue::Finite((n * n * n) as f64))
        .collect();
    let r = make_report(&w, &op, PNorm::Two, &ns, cubic, 0).unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
    assert!(!r.acceptable());
    let div = vec![ConstantValue::Divergent; 4];
    let dop = DiffOp::new(OpKind::Dij { i: 1, j: 2 }, 3, Multiplier::TInvSqrt);
    let r = make_report(&w, &dop, PNorm::Two, &ns, div.clone(), 0).unwrap();
    assert_eq!(r.verdict, Verdict::Divergent);
    assert!(r.acceptable());
    assert!(!make_report(&w, &op, PNorm::Two, &ns, div, 0)
        .unwrap()
        .acceptable());
    let down = vec![ConstantValue::Finite(2.0), ConstantValue::Finite(1.0)];
    assert!(
        !make_report(&w, &op, PNorm::Two, &ns[..2], down, 0)
            .unwrap()
            .monotone
    );
}

#[test]
fn divergence_probe_classes() {
    // On V₀³ with w_{−1,0} the integrand behaves like t^{2−ℓ}.
    let expect = [
        (2, IntegralClass::Convergent),
        (3, IntegralClass::Logarithmic),
        (4, IntegralClass::Power),
    ];
    for (ell, class) in expect {
        let p = divergence_probe(ell, 2, 0.0).unwrap();
        assert_eq!(p.class, class, "ℓ={ell}: {p:?}");
        assert_eq!(p.oracle_class, class);
        assert!(p.consistent);
    }
    // ℓ = 4: I(ε) ~ ε^{−1}.
    let p = divergence_probe(4, 2, 0.0).unwrap();
    assert!((p.loglog_slope + 1.0).abs() < 0.05, "{}", p.loglog_slope);
    assert!(divergence_probe(0, 2, 0.0).is_err());
    assert!(divergence_probe(2, 4, 0.0).is_err());
}

#[test]
fn norms() {
    let w = WeightSpec::Cone {
        d: 2,
        mu: 0.5,
        gamma: 0.0,
    };
    let h = BasisHandle::new(w, 4).unwrap();
    let c = random_coefficients(h.dim(), 1, 3).remove(0);
    // Orthonormal basis: ‖f‖₂ = |c|.
    let l2 = weighted_norm(&h, &c, PNorm::Two).unwrap().value;
    assert_relative_eq!(
        l2,
        c.iter().map(|v| v * v).sum::<f64>().sqrt(),
        max_relative = 1e-12
    );
    let mass = h.reference_rule(0).unwrap().mass();
    let l1 = weighted_norm(&h, &c, PNorm::One).unwrap().value;
    let sup = weighted_norm(&h, &c, PNorm::Inf).unwrap();
    assert!(l1 <= l2 * mass.sqrt() * (1.0 + 1e-9));
    assert!(l2 <= sup.value * mass.sqrt() * (1.0 + 1e-6));
    assert!(sup.grid_bias >= 0.0);
    assert!(weighted_norm(&h, &vec![1.0; h.dim() + 1], PNorm::Two).is_err());

    let m = maximal_norm_check(&h, &c, 2.0, 2.0).unwrap();
    assert!(m.lower_holds && m.measured_c >= 1.0);
    assert!(maximal_norm_check(&h, &c, 2.0, 0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rayleigh_quotients_stay_below_the_constant(seed in 0u64..1000, which in 0usize..3) {
        let (w, op) = [
            (WeightSpec::Surface { d: 2, beta: -1.0, gamma: 1.0 }, DiffOp::new(OpKind::Dt, 1, Multiplier::None)),
            (WeightSpec::Cone { d: 1, mu: 0.5, gamma: 0.0 }, DiffOp::new(OpKind::Dx { j: 1 }, 1, Multiplier::BigPhi)),
            (WeightSpec::Triangle { a: 0.0, b: 0.5, c: 0.0 }, DiffOp::new(OpKind::Tri { i: 2 }, 1, Multiplier::Phi2)),
        ][which];
        let g = gram_system(5, &w, &op).unwrap();
        let c = random_coefficients(g.dim, 1, seed).remove(0);
        let mut q = 0.0;
        for i in 0..g.dim {
            for j in 0..g.dim {
                q += c[i] * g.get(i, j) * c[j];
            }
        }
        let r = q / c.iter().map(|v| v * v).sum::<f64>();
        prop_assert!(r >= -1e-10);
        prop_assert!(r.sqrt() <= g.sharp_constant() * (1.0 + 1e-10));
    }
}

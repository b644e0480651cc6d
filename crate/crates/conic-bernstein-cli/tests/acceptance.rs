//! Acceptance run: one PASS/FAIL line per criterion, with the tolerances and
//! wall-clock budgets pinned below.  Built without the libtest harness so the
//! summary is always printed; the process exits non-zero if any criterion
//! fails.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use conic_bernstein::bernstein::{
    divergence_probe, gram_system, growth_fit, loglog_fit, sharp_constant_p2, BernsteinReport,
    Claim, IntegralClass, RemezRegion, DEGREE_LADDER,
};
use conic_bernstein::geometry::WeightSpec;
use conic_bernstein::operators::{DiffOp, Multiplier, OpKind};
use conic_bernstein::pointsets::{
    ball_boundary_gap, cardinality_scaling, certify_separation, construct, SetDomain,
};
use conic_bernstein::verify::{
    decay_checks, eigen_checks, kernel_checks, mz_checks, remez_checks, selfadjoint_checks, Check,
    KernelIdentity, STABILITY_LADDER,
};

const EIGEN_TOL: f64 = 1e-8;
const DUAL_TOL: f64 = 1e-8;
const REPRODUCTION_TOL: f64 = 1e-9;
const LIFT_TOL: f64 = 1e-8;
const SELFADJOINT_TOL: f64 = 1e-8;
const INTERVAL_TOL: f64 = 1e-10;
const SLOPE_TOL: f64 = 0.2;
const CARDINALITY_TOL: f64 = 0.2;
const STABILITY: f64 = 3.0;
const DECAY_KAPPA: f64 = 6.0;
const SEED: u64 = 20240901;

/// Name, wall-clock budget and runner of one criterion.
type Criterion = (&'static str, Duration, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn checks_pass(checks: &[Check], limit: f64) -> (bool, f64) {
    let worst = checks.iter().map(|c| c.measured).fold(0.0, f64::max);
    (checks.iter().all(|c| c.pass && c.limit <= limit), worst)
}

fn failing(checks: &[Check]) -> String {
    checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!(" [{}: {} {} {}]", c.case, c.measured, c.relation, c.limit))
        .collect()
}

fn eigen() -> Outcome {
    let mut weights = Vec::new();
    for d in [2, 3] {
        for gamma in [0.0, 0.5, 2.0] {
            weights.push(WeightSpec::Surface {
                d,
                beta: -1.0,
                gamma,
            });
        }
    }
    for d in [1, 2] {
        for mu in [0.0, 0.5, 1.0] {
            for gamma in [0.0, 1.0] {
                weights.push(WeightSpec::Cone { d, mu, gamma });
            }
        }
    }
    let mut all = Vec::new();
    for w in &weights {
        all.extend(eigen_checks(w, 10, 50, SEED).expect("eigen suite runs"));
    }
    let (pass, worst) = checks_pass(&all, EIGEN_TOL);
    Outcome {
        pass,
        detail: format!(
            "{} weights, {} checks, worst residual {worst:.2e} (tol {EIGEN_TOL:e}){}",
            weights.len(),
            all.len(),
            failing(&all)
        ),
    }
}

fn kernels() -> Outcome {
    let mut all = Vec::new();
    for n in [2, 6, 10] {
        all.extend(kernel_checks(KernelIdentity::All, n, 200, SEED).expect("kernel suite runs"));
    }
    let worst = |suite_case: &str| {
        all.iter()
            .filter(|c| c.case.contains(suite_case) || c.suite.contains(suite_case))
            .map(|c| c.measured)
            .fold(0.0, f64::max)
    };
    let limits_ok = all.iter().all(|c| {
        let lim = if c.case.contains("reproduction") || c.suite.contains("reproduction") {
            REPRODUCTION_TOL
        } else if c.case.contains("lift") || c.suite.contains("lift") {
            LIFT_TOL
        } else {
            DUAL_TOL
        };
        c.limit <= lim
    });
    let pass = limits_ok && all.iter().all(|c| c.pass);
    Outcome {
        pass,
        detail: format!(
            "n ∈ {{2,6,10}}, 200 pairs, {} checks; worst dual {:.2e}, reproduction {:.2e}, lift {:.2e}{}",
            all.len(),
            worst("dual"),
            worst("reproduction"),
            worst("lift"),
            failing(&all)
        ),
    }
}

fn selfadjoint() -> Outcome {
    let weights = [
        WeightSpec::Surface {
            d: 2,
            beta: -1.0,
            gamma: 0.0,
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
            mu: 0.0,
            gamma: 0.0,
        },
        WeightSpec::Cone {
            d: 2,
            mu: 1.0,
            gamma: 1.0,
        },
    ];
    let mut all = Vec::new();
    for w in &weights {
        all.extend(selfadjoint_checks(w, 8, 50, SEED).expect("self-adjoint suite runs"));
        // The cone checks include the lateral/radial decomposition of the operator.
        if matches!(w, WeightSpec::Cone { .. }) {
            all.extend(eigen_checks(w, 8, 50, SEED).expect("cone operator agreement runs"));
        }
    }
    let (pass, worst) = checks_pass(&all, SELFADJOINT_TOL);
    Outcome {
        pass,
        detail: format!(
            "{} checks, worst {worst:.2e} (tol {SELFADJOINT_TOL:e}·scale){}",
            all.len(),
            failing(&all)
        ),
    }
}

fn interval_and_gram() -> Outcome {
    let w = WeightSpec::IntervalJacobi {
        alpha: 0.0,
        beta: 0.0,
    };
    let phi = sharp_constant_p2(1, &w, &DiffOp::new(OpKind::Dt, 1, Multiplier::Phi))
        .unwrap()
        .finite()
        .unwrap();
    let dt = sharp_constant_p2(1, &w, &DiffOp::new(OpKind::Dt, 1, Multiplier::None))
        .unwrap()
        .finite()
        .unwrap();
    let e_phi = (phi - 2f64.sqrt()).abs();
    let e_dt = (dt - 12f64.sqrt()).abs();
    let mut ok = e_phi <= INTERVAL_TOL && e_dt <= INTERVAL_TOL;

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
            DiffOp::new(OpKind::Dij { i: 1, j: 2 }, 2, Multiplier::TInvSqrt),
        ),
        (
            WeightSpec::Cone {
                d: 2,
                mu: 0.0,
                gamma: 0.0,
            },
            DiffOp::new(OpKind::Dx { j: 1 }, 1, Multiplier::BigPhi),
        ),
        (
            WeightSpec::Triangle {
                a: -0.5,
                b: -0.5,
                c: 0.0,
            },
            DiffOp::new(OpKind::Tri { i: 3 }, 2, Multiplier::Phi3OverSqrtSum),
        ),
        (w, DiffOp::new(OpKind::Dt, 1, Multiplier::Phi)),
    ];
    let (mut worst_sym, mut worst_neg) = (0.0f64, 0.0f64);
    let mut monotone = true;
    for (w, op) in cases {
        let mut prev = 0.0;
        for n in [2, 4, 8, 12, 16] {
            let g = gram_system(n, &w, &op).unwrap();
            let ev = g.eigenvalues();
            let top = ev.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
            worst_sym = worst_sym.max(g.symmetry_error() / top);
            worst_neg = worst_neg.max(-ev[0] / top);
            let c = g.sharp_constant();
            monotone &= c >= prev * (1.0 - 1e-12);
            prev = c;
        }
    }
    ok &= worst_sym <= 1e-12 && worst_neg <= 1e-10 && monotone;
    Outcome {
        pass: ok,
        detail: format!(
            "|C₁(φ∂ₜ)−√2| = {e_phi:.1e}, |C₁(∂ₜ)−√12| = {e_dt:.1e} (tol {INTERVAL_TOL:e}); Gram asymmetry {worst_sym:.1e}, \
             most negative eigenvalue {worst_neg:.1e} (relative); C_n nondecreasing: {monotone}"
        ),
    }
}

struct GrowthCase {
    weight: WeightSpec,
    op: DiffOp,
    claim: f64,
}

fn growth_cases() -> Vec<GrowthCase> {
    let mut out = Vec::new();
    for gamma in [0.0, 2.0] {
        let w = WeightSpec::Surface {
            d: 2,
            beta: -1.0,
            gamma,
        };
        let dij = OpKind::Dij { i: 1, j: 2 };
        for (op, claim) in [
            (DiffOp::new(OpKind::Dt, 1, Multiplier::None), 2.0),
            (DiffOp::new(OpKind::Dt, 1, Multiplier::Phi), 1.0),
            (DiffOp::new(dij, 1, Multiplier::None), 1.0),
            (DiffOp::new(dij, 1, Multiplier::TInvSqrt), 1.0),
            (DiffOp::new(dij, 2, Multiplier::TInvSqrt), 2.0),
        ] {
            out.push(GrowthCase {
                weight: w,
                op,
                claim,
            });
        }
    }
    for d in [1, 2] {
        let w = WeightSpec::Cone {
            d,
            mu: 0.0,
            gamma: 0.0,
        };
        let dx = OpKind::Dx { j: 1 };
        for (op, claim) in [
            (DiffOp::new(dx, 1, Multiplier::BigPhi), 1.0),
            (DiffOp::new(dx, 1, Multiplier::TInvSqrtBigPhi), 1.0),
            (DiffOp::new(dx, 1, Multiplier::None), 2.0),
        ] {
            out.push(GrowthCase {
                weight: w,
                op,
                claim,
            });
        }
    }
    for (a, b, c) in [(0.0, 0.0, 0.0), (-0.5, -0.5, 0.0)] {
        let w = WeightSpec::Triangle { a, b, c };
        for (i, m) in [
            (1, Multiplier::Phi1OverSqrt1mY2),
            (2, Multiplier::Phi2OverSqrt1mY1),
            (3, Multiplier::Phi3OverSqrtSum),
        ] {
            for ell in [1, 2] {
                // The triangle bounds read c·n^ℓ, so the claimed slope is ℓ.
                out.push(GrowthCase {
                    weight: w,
                    op: DiffOp::new(OpKind::Tri { i }, ell, m),
                    claim: ell as f64,
                });
            }
        }
    }
    out
}

fn full_ladder_slope(r: &BernsteinReport) -> Option<f64> {
    let xs: Vec<f64> = r.degrees.iter().map(|&n| n as f64).collect();
    let ys: Option<Vec<f64>> = r.constants.iter().map(|c| c.finite()).collect();
    loglog_fit(&xs, &ys?).ok().map(|(s, _)| s)
}

fn growth() -> Outcome {
    let cases = growth_cases();
    let mut pass = true;
    let mut lines = String::new();
    let mut worst = 0.0f64;
    for GrowthCase { weight, op, claim } in &cases {
        let r = growth_fit(weight, op, &DEGREE_LADDER, SEED).expect("growth fit runs");
        let tail = r.fitted_exponent.unwrap_or(f64::NAN);
        let full = full_ladder_slope(&r).unwrap_or(f64::NAN);
        let miss = (tail - claim).abs().max((full - claim).abs());
        let ok = r.monotone && r.claimed == Claim::Exponent(*claim) && miss <= SLOPE_TOL;
        worst = worst.max(miss);
        pass &= ok;
        lines.push_str(&format!(
            "\n      {} {:<34} claim {claim}: slope {tail:.3} (n ≥ {}), full-ladder slope {full:.3}{}",
            if ok { "ok  " } else { "MISS" },
            format!("{} {}", weight.label(), op.label()),
            r.fit_window[0],
            if r.monotone { "" } else { " non-monotone" }
        ));
    }
    Outcome {
        pass,
        detail: format!(
            "{} operator/weight pairs, worst |slope − claim| {worst:.3} (tol {SLOPE_TOL}){lines}",
            cases.len()
        ),
    }
}

fn divergence() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (ell, want) in [
        (2, IntegralClass::Convergent),
        (3, IntegralClass::Logarithmic),
        (4, IntegralClass::Power),
    ] {
        let p = divergence_probe(ell, 2, 0.0).expect("probe runs");
        let oracle = (2 - ell as i64) as f64;
        let ok = p.class == want
            && p.oracle_class == want
            && p.consistent
            && p.oracle_exponent == oracle;
        // ε_c^{−1} divergence: I(ε) grows with log-log slope −1.
        let ok = ok && (ell != 4 || (p.loglog_slope + 1.0).abs() <= 0.05);
        pass &= ok;
        parts.push(format!(
            "ℓ={ell}: {:?} (exponent {:.3}, oracle t^{oracle}, slope {:.3})",
            p.class, p.estimated_exponent, p.loglog_slope
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn localization() -> Outcome {
    let w = WeightSpec::Surface {
        d: 2,
        beta: -1.0,
        gamma: 0.0,
    };
    let checks = decay_checks(&w, &[8, 32], DECAY_KAPPA, 100, SEED).expect("decay suite runs");
    let pass = checks.len() == 3 && checks.iter().all(|c| c.pass && c.limit <= STABILITY);
    let detail = checks
        .iter()
        .map(|c| {
            format!(
                "{} growth {:.3}",
                c.case.split_whitespace().next().unwrap_or(""),
                c.measured
            )
        })
        .collect::<Vec<_>>();
    Outcome {
        pass,
        detail: format!(
            "κ={DECAY_KAPPA}, n=8→32: {} (limit {STABILITY}×){}",
            detail.join(", "),
            failing(&checks)
        ),
    }
}

fn point_sets() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();

    let mut exact = true;
    for dom in [
        SetDomain::Interval,
        SetDomain::Circle,
        SetDomain::Sphere2,
        SetDomain::Ball2,
    ] {
        for eps in [0.05, 0.1, 0.25, 0.5] {
            exact &= certify_separation(&construct(dom, eps).unwrap()).exact;
        }
    }
    pass &= exact;
    parts.push(format!("separation exact: {exact}"));

    let mut slopes = Vec::new();
    for (dom, ks) in [
        (SetDomain::Interval, &[3, 4, 5, 6, 7, 8][..]),
        (SetDomain::Circle, &[3, 4, 5, 6, 7, 8][..]),
        (SetDomain::Sphere2, &[2, 3, 4, 5, 6][..]),
        (SetDomain::Ball2, &[2, 3, 4, 5, 6][..]),
        (SetDomain::Surface { d: 2 }, &[2, 3, 4, 5, 6][..]),
        (SetDomain::Surface { d: 3 }, &[2, 3, 4, 5][..]),
        (SetDomain::Cone, &[2, 3, 4, 5][..]),
    ] {
        let s = cardinality_scaling(dom, ks).unwrap();
        let dim = dom.dimension() as f64;
        pass &= (s.slope + dim).abs() <= CARDINALITY_TOL;
        slopes.push(format!("{dom:?}:{:.2}/−{dim}", s.slope));
    }
    parts.push(format!("cardinality slopes {}", slopes.join(" ")));

    let gap = [0.05, 0.1, 0.25, 0.5]
        .iter()
        .map(|&eps| {
            ball_boundary_gap(&construct(SetDomain::Ball2, eps).unwrap())
                .unwrap()
                .min_gap
        })
        .fold(f64::INFINITY, f64::min);
    pass &= gap > 0.0;
    parts.push(format!("ball gap min {gap:.3e}"));

    let w = WeightSpec::Surface {
        d: 2,
        beta: -1.0,
        gamma: 0.0,
    };
    let mut stab = mz_checks(&w, &STABILITY_LADDER, 1.0, 2.0, 8, SEED).expect("MZ suite runs");
    stab.extend(
        remez_checks(
            &w,
            RemezRegion::Surface,
            &STABILITY_LADDER,
            1.0,
            2.0,
            8,
            SEED,
        )
        .expect("Remez suite runs"),
    );
    let cone = WeightSpec::Cone {
        d: 2,
        mu: 0.0,
        gamma: 0.0,
    };
    stab.extend(
        remez_checks(
            &cone,
            RemezRegion::Ball,
            &STABILITY_LADDER,
            1.0,
            2.0,
            8,
            SEED,
        )
        .expect("ball Remez runs"),
    );
    pass &= stab.iter().all(|c| c.pass && c.limit <= STABILITY);
    let growths: Vec<String> = stab.iter().map(|c| format!("{:.2}", c.measured)).collect();
    parts.push(format!(
        "MZ/Remez growth over n=8,16,32: [{}] (limit {STABILITY}×){}",
        growths.join(", "),
        failing(&stab)
    ));

    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn determinism() -> Outcome {
    let runs: [(&[&str], &str); 5] = [
        (
            &[
                "constants",
                "--domain",
                "surface",
                "--d",
                "2",
                "--op",
                "phi-dt",
                "--l",
                "1",
                "--n",
                "8:24",
                "--seed",
                "11",
            ],
            "constants.csv",
        ),
        (
            &[
                "verify", "eigen", "--nmax", "6", "--points", "20", "--seed", "11",
            ],
            "verify-eigen.csv",
        ),
        (
            &["verify", "mz", "--n", "8,16", "--seed", "11"],
            "verify-mz.csv",
        ),
        (
            &["decay", "--n", "8,16", "--pairs", "30", "--seed", "11"],
            "decay.csv",
        ),
        (
            &[
                "pointset", "--domain", "surface", "--d", "2", "--eps", "0.2",
            ],
            "pointset-surface-d2.csv",
        ),
    ];
    let mut pass = true;
    let mut bytes = 0usize;
    let mut notes = Vec::new();
    for (args, file) in runs {
        let mut outputs = Vec::new();
        for threads in ["1", "2", "1"] {
            let dir = tempfile::tempdir().unwrap();
            let o = Command::new(env!("CARGO_BIN_EXE_conic-bernstein"))
                .current_dir(dir.path())
                .env("CONIC_BERNSTEIN_THREADS", threads)
                .args(args)
                .output()
                .expect("binary runs");
            if !o.status.success() {
                notes.push(format!("{} exited {:?}", args[0], o.status.code()));
                pass = false;
                break;
            }
            outputs.push(fs::read(dir.path().join(file)).unwrap_or_default());
        }
        let same = outputs.len() == 3
            && !outputs[0].is_empty()
            && outputs.windows(2).all(|w| w[0] == w[1]);
        if !same {
            notes.push(format!("{file} differs"));
        }
        pass &= same;
        bytes += outputs.first().map_or(0, Vec::len);
    }
    Outcome {
        pass,
        detail: format!(
            "5 commands × 3 runs (1, 2, 1 threads), {bytes} bytes compared {}",
            notes.join(" ")
        ),
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 eigen-identities", Duration::from_secs(60), eigen),
        (
            "2 kernel dual representation",
            Duration::from_secs(120),
            kernels,
        ),
        ("3 self-adjointness", Duration::from_secs(60), selfadjoint),
        ("4 sharp-constant oracles", Duration::MAX, interval_and_gram),
        ("5 growth exponents", Duration::from_secs(20 * 60), growth),
        ("6 counterexample divergence", Duration::MAX, divergence),
        ("7 localization", Duration::MAX, localization),
        ("8 point sets", Duration::MAX, point_sets),
        ("9 determinism", Duration::MAX, determinism),
    ];
    let mut failures = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = out.pass && in_time;
        failures += usize::from(!pass);
        let budget_note = if budget == Duration::MAX {
            String::new()
        } else {
            format!(" / budget {}s", budget.as_secs())
        };
        println!(
            "{} criterion {name} [{:.1}s{budget_note}]: {}{}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            out.detail,
            if in_time { "" } else { " — over time budget" }
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

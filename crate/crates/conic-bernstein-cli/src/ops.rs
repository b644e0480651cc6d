//! Translation of configuration values into library types.

use conic_bernstein::geometry::WeightSpec;
use conic_bernstein::operators::{DiffOp, Multiplier, OpKind};
use conic_bernstein::pointsets::SetDomain;

use crate::config::{parse_triple, Config, ConfigError};

/// The weight named by `domain` and the weight keys.  Unset parameters
/// default to `d = 2`, surface `β = −1`, and zero for every other exponent.
pub fn weight(cfg: &Config) -> Result<WeightSpec, ConfigError> {
    let dom = cfg.text("domain")?;
    let d = cfg.opt_usize("domain.d")?.unwrap_or(2);
    let f = |k: &str| -> Result<f64, ConfigError> { Ok(cfg.opt_float(k)?.unwrap_or(0.0)) };
    let w = match dom.as_str() {
        "surface" => WeightSpec::Surface {
            d,
            beta: cfg.opt_float("weight.beta")?.unwrap_or(-1.0),
            gamma: f("weight.gamma")?,
        },
        "cone" => WeightSpec::Cone {
            d,
            mu: f("weight.mu")?,
            gamma: f("weight.gamma")?,
        },
        "interval" => WeightSpec::IntervalJacobi {
            alpha: f("weight.alpha")?,
            beta: f("weight.beta")?,
        },
        "triangle" => {
            let [a, b, c] = if cfg.has("weight.abc") {
                parse_triple("weight.abc", &cfg.text("weight.abc")?)?
            } else {
                [0.0; 3]
            };
            WeightSpec::Triangle { a, b, c }
        }
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown domain `{other}` (expected surface, cone, interval or triangle)"
            )))
        }
    };
    w.validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(w)
}

/// The point-set domain named by `domain` (and `domain.d` for surfaces).
pub fn set_domain(cfg: &Config) -> Result<SetDomain, ConfigError> {
    let dom = cfg.text("domain")?;
    let d = cfg.opt_usize("domain.d")?;
    Ok(match dom.as_str() {
        "interval" => SetDomain::Interval,
        "circle" => SetDomain::Circle,
        "sphere" | "sphere2" => SetDomain::Sphere2,
        "ball" | "ball2" => SetDomain::Ball2,
        "surface" => SetDomain::Surface { d: d.unwrap_or(2) },
        "cone" => match d {
            None | Some(2) => SetDomain::Cone,
            Some(d) => return Err(ConfigError::Invalid(format!("cone point sets are built for d = 2, got {d}"))),
        },
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown point-set domain `{other}` (expected interval, circle, sphere, ball, surface or cone)"
            )))
        }
    })
}

fn index(cfg: &Config, key: &str, default: usize) -> Result<usize, ConfigError> {
    Ok(cfg.opt_usize(key)?.unwrap_or(default))
}

/// Parses an operator name.  Accepted forms are a multiplier prefix
/// (`phi-`, `Phi-`, `tinvsqrt-`, `tinvsqrt-Phi-`, `phi1-`…`phi3-`)
/// followed by `dt`, `dt-cartesian`, `dij`, `d<i><j>`, `dx`, `dx<j>`,
/// `partial`, `partial<k>`; or `tri1`…`tri3`.  Missing indices come from
/// `op.i`/`op.j` (defaults 1 and 2); `op.l` is the power.
pub fn diffop(cfg: &Config) -> Result<DiffOp, ConfigError> {
    let name = cfg.text("op.name")?;
    let power = cfg.usize("op.l")?;
    let bad = || ConfigError::Invalid(format!("unknown operator `{name}`"));
    if let Some(k) = name.strip_prefix("tri") {
        let (i, m) = match k {
            "1" => (1, Multiplier::Phi1OverSqrt1mY2),
            "2" => (2, Multiplier::Phi2OverSqrt1mY1),
            "3" => (3, Multiplier::Phi3OverSqrtSum),
            _ => return Err(bad()),
        };
        return Ok(DiffOp::new(OpKind::Tri { i }, power, m));
    }
    let prefixes = [
        ("tinvsqrt-Phi-", Multiplier::TInvSqrtBigPhi),
        ("tinvsqrt-", Multiplier::TInvSqrt),
        ("Phi-", Multiplier::BigPhi),
        ("phi1-", Multiplier::Phi1),
        ("phi2-", Multiplier::Phi2),
        ("phi3-", Multiplier::Phi3),
        ("phi-", Multiplier::Phi),
    ];
    let (mult, rest) = prefixes
        .iter()
        .find_map(|(p, m)| name.strip_prefix(p).map(|r| (*m, r)))
        .unwrap_or((Multiplier::None, name.as_str()));
    let digit = |s: &str| -> Result<usize, ConfigError> { s.parse::<usize>().map_err(|_| bad()) };
    let kind = match rest {
        "dt" => OpKind::Dt,
        "dt-cartesian" => OpKind::DtCartesian,
        "dij" => OpKind::Dij {
            i: index(cfg, "op.i", 1)?,
            j: index(cfg, "op.j", 2)?,
        },
        "dx" => OpKind::Dx {
            j: index(cfg, "op.i", 1)?,
        },
        "partial" => {
            let default = match mult {
                Multiplier::Phi2 => 2,
                Multiplier::Phi3 => 3,
                _ => 1,
            };
            OpKind::Tri {
                i: index(cfg, "op.i", default)?,
            }
        }
        r if r.starts_with("dx") => OpKind::Dx { j: digit(&r[2..])? },
        r if r.starts_with("partial") => OpKind::Tri { i: digit(&r[7..])? },
        r if r.len() == 3 && r.starts_with('d') => OpKind::Dij {
            i: digit(&r[1..2])?,
            j: digit(&r[2..3])?,
        },
        _ => return Err(bad()),
    };
    Ok(DiffOp::new(kind, power, mult))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::{json, Value};
    use std::collections::BTreeMap;

    fn cfg(pairs: &[(&str, Value)]) -> Config {
        let flags = pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect::<BTreeMap<_, _>>();
        Config::resolve(vec![("op.l", json!(1))], BTreeMap::new(), flags).unwrap()
    }

    #[test]
    fn operator_names() {
        let c = cfg(&[("op.name", json!("tinvsqrt-dij"))]);
        assert_eq!(
            diffop(&c).unwrap(),
            DiffOp::new(OpKind::Dij { i: 1, j: 2 }, 1, Multiplier::TInvSqrt)
        );
        let c = cfg(&[("op.name", json!("tri2")), ("op.l", json!(2))]);
        assert_eq!(
            diffop(&c).unwrap(),
            DiffOp::new(OpKind::Tri { i: 2 }, 2, Multiplier::Phi2OverSqrt1mY1)
        );
        let c = cfg(&[("op.name", json!("Phi-dx2"))]);
        assert_eq!(
            diffop(&c).unwrap(),
            DiffOp::new(OpKind::Dx { j: 2 }, 1, Multiplier::BigPhi)
        );
        let c = cfg(&[("op.name", json!("phi3-partial"))]);
        assert_eq!(
            diffop(&c).unwrap(),
            DiffOp::new(OpKind::Tri { i: 3 }, 1, Multiplier::Phi3)
        );
        let c = cfg(&[("op.name", json!("phi-dt"))]);
        assert_eq!(diffop(&c).unwrap().label(), "phi-dt^1");
        let c = cfg(&[("op.name", json!("d13"))]);
        assert_eq!(diffop(&c).unwrap().kind, OpKind::Dij { i: 1, j: 3 });
        assert!(diffop(&cfg(&[("op.name", json!("curl"))])).is_err());
    }

    #[test]
    fn weights() {
        let c = cfg(&[("domain", json!("surface")), ("weight.gamma", json!(0.5))]);
        assert_eq!(
            weight(&c).unwrap(),
            WeightSpec::Surface {
                d: 2,
                beta: -1.0,
                gamma: 0.5
            }
        );
        let c = cfg(&[
            ("domain", json!("triangle")),
            ("weight.abc", json!("0,0.5,1")),
        ]);
        assert_eq!(
            weight(&c).unwrap(),
            WeightSpec::Triangle {
                a: 0.0,
                b: 0.5,
                c: 1.0
            }
        );
        assert!(weight(&cfg(&[("domain", json!("cone")), ("weight.mu", json!(-1))])).is_err());
        assert!(weight(&cfg(&[("domain", json!("torus"))])).is_err());
    }

    #[test]
    fn set_domains() {
        assert_eq!(
            set_domain(&cfg(&[("domain", json!("ball"))])).unwrap(),
            SetDomain::Ball2
        );
        assert_eq!(
            set_domain(&cfg(&[
                ("domain", json!("surface")),
                ("domain.d", json!(3))
            ]))
            .unwrap(),
            SetDomain::Surface { d: 3 }
        );
        assert!(set_domain(&cfg(&[("domain", json!("cone")), ("domain.d", json!(1))])).is_err());
    }
}

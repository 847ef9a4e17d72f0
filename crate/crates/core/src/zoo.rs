//! Built-in example manifolds with known classification.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::complex_structures::{
    canonical_triple, StructureField, StructureSet, StructureTriple, ANTI_SELF_DUAL, SELF_DUAL,
};
use crate::error::{Error, Result};
use crate::geometry::{metric_from_kahler_potential, MetricField};
use crate::jets::FieldExpr;

/// Geometric class, from weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldClass {
    Generic,
    Complex,
    Kahler,
    Hkt,
    Hk,
}

impl ManifoldClass {
    pub fn name(self) -> &'static str {
        match self {
            ManifoldClass::Generic => "generic",
            ManifoldClass::Complex => "complex",
            ManifoldClass::Kahler => "kahler",
            ManifoldClass::Hkt => "hkt",
            ManifoldClass::Hk => "hk",
        }
    }

    pub fn parse(s: &str) -> Result<ManifoldClass> {
        match s.trim().to_ascii_lowercase().as_str() {
            "generic" => Ok(ManifoldClass::Generic),
            "complex" => Ok(ManifoldClass::Complex),
            "kahler" | "kähler" => Ok(ManifoldClass::Kahler),
            "hkt" => Ok(ManifoldClass::Hkt),
            "hk" => Ok(ManifoldClass::Hk),
            other => Err(Error::Invalid(format!("unknown class `{other}`"))),
        }
    }
}

impl fmt::Display for ManifoldClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where sample points are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingDomain {
    /// Every coordinate uniform in `[lo, hi]`.
    Box { lo: f64, hi: f64 },
    /// Each complex coordinate `z_j = (x^{2j-1} − i x^{2j})/√2` with
    /// `inner < |z_j| < outer`, radius and phase uniform.
    PairAnnulus { inner: f64, outer: f64 },
}

impl SamplingDomain {
    pub fn sample(&self, dim: usize, rng: &mut impl Rng) -> Vec<f64> {
        match *self {
            SamplingDomain::Box { lo, hi } => (0..dim).map(|_| rng.gen_range(lo..hi)).collect(),
            SamplingDomain::PairAnnulus { inner, outer } => {
                let mut p = Vec::with_capacity(dim);
                for _ in 0..dim / 2 {
                    let r = rng.gen_range(inner..outer) * std::f64::consts::SQRT_2;
                    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                    p.push(r * phase.cos());
                    p.push(r * phase.sin());
                }
                p
            }
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match *self {
            SamplingDomain::Box { lo, hi } => p.iter().all(|&x| x >= lo && x <= hi),
            SamplingDomain::PairAnnulus { inner, outer } => p.chunks(2).all(|pair| {
                let modulus = (pair.iter().map(|x| x * x).sum::<f64>() / 2.0).sqrt();
                modulus > inner && modulus < outer
            }),
        }
    }
}

/// Which failure a negative control is meant to exhibit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    Positive,
    /// Structures fail integrability; closure must break.
    NonIntegrable,
    /// Field strength has a self-dual part; gauge closure must break.
    SelfDualGauge,
}

/// A named manifold with structures, optional gauge field and its class.
#[derive(Debug, Clone)]
pub struct ZooEntry {
    pub name: String,
    pub description: String,
    pub metric: MetricField,
    pub structures: StructureSet,
    pub gauge: Option<Vec<FieldExpr>>,
    pub expected_class: ManifoldClass,
    pub domain: SamplingDomain,
    pub control: Control,
}

impl ZooEntry {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }
}

/// Registry names in a stable order.
pub const NAMES: [&str; 8] = [
    "flat_r4",
    "conf_flat_s4",
    "conf_flat_generic",
    "hopf",
    "kahler_from_potential",
    "broken_complex",
    "asd_gauge",
    "sd_gauge",
];

/// Conformal factor used by `conf_flat_generic` unless overridden.
pub const DEFAULT_GENERIC_FACTOR: &str = "1 + 0.3*x1 + 0.2*x2*x3 + 0.1*x4^2";

/// Self-dual coefficients of the `sd_gauge` field strength.
pub const SD_SAMPLE: [f64; 3] = [0.6, 0.3, -0.5];

/// Anti-self-dual coefficients of the `asd_gauge` field strength.
pub const ASD_SAMPLE: [f64; 3] = [0.7, -0.4, 0.25];

pub fn names() -> &'static [&'static str] {
    &NAMES
}

fn parse(src: &str) -> FieldExpr {
    FieldExpr::parse(src).expect("built-in expression parses")
}

fn squared_radius() -> FieldExpr {
    parse("x1^2 + x2^2 + x3^2 + x4^2")
}

fn canonical() -> StructureSet {
    StructureSet::Triple(canonical_triple(1))
}

/// Constant field strength `F` as the potential `A_M = ½ F_NM x^N`.
pub fn linear_potential(f: &[[f64; 4]; 4]) -> Vec<FieldExpr> {
    (0..4)
        .map(|m| {
            (0..4).fold(FieldExpr::real(0.0), |acc, n| {
                if f[n][m] == 0.0 {
                    acc
                } else {
                    FieldExpr::add(
                        acc,
                        FieldExpr::mul(FieldExpr::real(0.5 * f[n][m]), FieldExpr::x(n)),
                    )
                }
            })
        })
        .collect()
}

fn combine(basis: &[[[f64; 4]; 4]; 3], coeffs: &[f64; 3]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for (k, b) in basis.iter().enumerate() {
        for r in 0..4 {
            for c in 0..4 {
                out[r][c] += coeffs[k] * b[r][c];
            }
        }
    }
    out
}

/// `g = δ / f²` with canonical structures, expected HKT.
pub fn conf_flat_generic(f: FieldExpr) -> ZooEntry {
    ZooEntry {
        name: "conf_flat_generic".into(),
        description: format!("conformally flat R^4, g = delta / f^2 with f = {f}"),
        metric: MetricField::conformally_flat(4, f),
        structures: canonical(),
        gauge: None,
        expected_class: ManifoldClass::Hkt,
        domain: SamplingDomain::Box { lo: -1.0, hi: 1.0 },
        control: Control::Positive,
    }
}

/// Structures `𝓘, 𝓙` rotated into each other by the angle with
/// `tan(θ/2) = x1`, and `𝓚` kept.
pub fn rotated_triple() -> StructureTriple {
    let t2 = parse("x1^2");
    let den = FieldExpr::add(FieldExpr::real(1.0), t2.clone());
    let cos = FieldExpr::div(FieldExpr::sub(FieldExpr::real(1.0), t2), den.clone());
    let sin = FieldExpr::div(FieldExpr::mul(FieldExpr::real(2.0), FieldExpr::x(0)), den);
    let mix = |a: &FieldExpr, b: &FieldExpr| -> StructureField {
        let grid = (0..4)
            .map(|r| {
                (0..4)
                    .map(|c| {
                        FieldExpr::add(
                            FieldExpr::mul(a.clone(), FieldExpr::real(SELF_DUAL[0][r][c])),
                            FieldExpr::mul(b.clone(), FieldExpr::real(SELF_DUAL[1][r][c])),
                        )
                    })
                    .collect()
            })
            .collect();
        StructureField::from_grid(grid).expect("square grid")
    };
    StructureTriple::custom([
        mix(&cos, &sin),
        mix(&FieldExpr::neg(sin.clone()), &cos),
        StructureField::block_diagonal(&SELF_DUAL[2], 1),
    ])
}

/// Looks up a registry entry.
pub fn zoo_get(name: &str) -> Result<ZooEntry> {
    let unit_box = SamplingDomain::Box { lo: -1.0, hi: 1.0 };
    let entry = match name {
        "flat_r4" => ZooEntry {
            name: name.into(),
            description: "flat R^4 with the canonical triple".into(),
            metric: MetricField::flat(4),
            structures: canonical(),
            gauge: None,
            expected_class: ManifoldClass::Hk,
            domain: unit_box,
            control: Control::Positive,
        },
        "conf_flat_s4" => ZooEntry {
            name: name.into(),
            description: "round S^4 chart, g = delta / f^2 with f = 1 + |x|^2/2".into(),
            metric: MetricField::conformally_flat(4, parse("1 + (x1^2 + x2^2 + x3^2 + x4^2)/2")),
            structures: canonical(),
            gauge: None,
            expected_class: ManifoldClass::Hkt,
            domain: SamplingDomain::Box { lo: -1.5, hi: 1.5 },
            control: Control::Positive,
        },
        "conf_flat_generic" => conf_flat_generic(parse(DEFAULT_GENERIC_FACTOR)),
        "hopf" => {
            let inv = FieldExpr::div(FieldExpr::real(1.0), squared_radius());
            ZooEntry {
                name: name.into(),
                description: "Hopf surface chart, ds^2 = dz_j dzb_j / (z_k zb_k), 1 < |z_j| < 2"
                    .into(),
                metric: MetricField::from_upper(4, |r, c| {
                    if r == c {
                        inv.clone()
                    } else {
                        FieldExpr::real(0.0)
                    }
                }),
                structures: canonical(),
                gauge: None,
                expected_class: ManifoldClass::Hkt,
                domain: SamplingDomain::PairAnnulus {
                    inner: 1.0,
                    outer: 2.0,
                },
                control: Control::Positive,
            }
        }
        "kahler_from_potential" => {
            let k = parse("z1*zb1 + z2*zb2 + (z1*zb1)^2");
            ZooEntry {
                name: name.into(),
                description: "Kahler metric from K = z1 zb1 + z2 zb2 + (z1 zb1)^2".into(),
                metric: metric_from_kahler_potential(&k, 2)?,
                structures: StructureSet::Single(StructureField::block_diagonal(&SELF_DUAL[0], 1)),
                gauge: None,
                expected_class: ManifoldClass::Kahler,
                domain: unit_box,
                control: Control::Positive,
            }
        }
        "broken_complex" => ZooEntry {
            name: name.into(),
            description:
                "flat R^4 with a position-dependent rotation mixing the first two structures".into(),
            metric: MetricField::flat(4),
            structures: StructureSet::Triple(rotated_triple()),
            gauge: None,
            expected_class: ManifoldClass::Generic,
            domain: unit_box,
            control: Control::NonIntegrable,
        },
        "asd_gauge" => ZooEntry {
            name: name.into(),
            description: "flat R^4 with a constant anti-self-dual field strength".into(),
            metric: MetricField::flat(4),
            structures: canonical(),
            gauge: Some(linear_potential(&combine(&ANTI_SELF_DUAL, &ASD_SAMPLE))),
            expected_class: ManifoldClass::Hk,
            domain: unit_box,
            control: Control::Positive,
        },
        "sd_gauge" => ZooEntry {
            name: name.into(),
            description: "flat R^4 with a constant self-dual field strength".into(),
            metric: MetricField::flat(4),
            structures: canonical(),
            gauge: Some(linear_potential(&combine(&SELF_DUAL, &SD_SAMPLE))),
            expected_class: ManifoldClass::Hk,
            domain: unit_box,
            control: Control::SelfDualGauge,
        },
        other => return Err(Error::UnknownEntry(other.to_string())),
    };
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn registry_is_complete() {
        for name in NAMES {
            assert_eq!(zoo_get(name).unwrap().name, name);
        }
        assert_eq!(
            zoo_get("nope").unwrap_err(),
            Error::UnknownEntry("nope".into())
        );
    }

    #[test]
    fn flat_entry() {
        let e = zoo_get("flat_r4").unwrap();
        assert_eq!(e.expected_class, ManifoldClass::Hk);
        assert_eq!(e.metric, MetricField::flat(4));
        assert!(e.structures.is_canonical());
    }

    #[test]
    fn hopf_samples_stay_in_the_annulus() {
        let e = zoo_get("hopf").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = e.domain.sample(4, &mut rng);
            assert!(e.domain.contains(&p));
            let r2: f64 = p.iter().map(|x| x * x).sum();
            let g = e.metric.entry(0, 0).eval(&p).unwrap().re;
            assert!((g - 1.0 / r2).abs() < 1e-15);
        }
    }

    #[test]
    fn gauge_potentials_reproduce_their_field_strength() {
        let e = zoo_get("asd_gauge").unwrap();
        let a = e.gauge.unwrap();
        let f = combine(&ANTI_SELF_DUAL, &ASD_SAMPLE);
        for m in 0..4 {
            for n in 0..4 {
                let dm_an = a[n]
                    .diff(crate::jets::Var::X(m))
                    .eval(&[0.0; 4])
                    .unwrap()
                    .re;
                let dn_am = a[m]
                    .diff(crate::jets::Var::X(n))
                    .eval(&[0.0; 4])
                    .unwrap()
                    .re;
                assert!((dm_an - dn_am - f[m][n]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn class_names_round_trip() {
        for c in [
            ManifoldClass::Generic,
            ManifoldClass::Complex,
            ManifoldClass::Kahler,
            ManifoldClass::Hkt,
            ManifoldClass::Hk,
        ] {
            assert_eq!(ManifoldClass::parse(c.name()).unwrap(), c);
        }
    }
}

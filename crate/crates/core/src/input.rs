//! Plain-text manifold and run files.
//!
//! ```text
//! # comments start with '#'
//! [metric]
//! dim = 4
//! g[1,1] = 1/(1 + x1^2)        # upper triangle, mirrored; missing entries are 0
//! # or: kahler_potential = z1*zb1 + z2*zb2
//! # or: conformal_factor = 1 + x1^2
//!
//! [structures]
//! canonical                    # or I1[r,c] = ..., I2[..], I3[..]; or I[r,c] = ... for one
//!
//! [gauge]
//! A[1] = 0.5*x2
//!
//! [run]
//! name = my_manifold
//! expected_class = hkt
//! manifolds = flat_r4, hopf    # zoo entries to run alongside
//! checks = n4, sfhk
//! points = 20
//! seed = 7
//! jet_order = 3
//! box = -1, 1                  # or: annulus = 1, 2
//! ```
//!
//! Errors carry one-based line and column numbers.

use std::collections::BTreeMap;

use crate::complex_structures::{canonical_triple, StructureField, StructureSet, StructureTriple};
use crate::error::{Error, Result};
use crate::geometry::{metric_from_kahler_potential, MetricField};
use crate::jets::FieldExpr;
use crate::verifier::Check;
use crate::zoo::{Control, ManifoldClass, SamplingDomain, ZooEntry};

/// Values from a `[run]` section; unset keys are `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSection {
    pub name: Option<String>,
    pub expected_class: Option<ManifoldClass>,
    pub manifolds: Vec<String>,
    pub checks: Option<Vec<Check>>,
    pub points: Option<usize>,
    pub seed: Option<u64>,
    pub jet_order: Option<usize>,
    pub domain: Option<SamplingDomain>,
}

/// A parsed file: run settings and, when a `[metric]` section is present, a
/// custom manifold.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    pub run: RunSection,
    pub manifold: Option<ZooEntry>,
}

struct Line<'a> {
    number: usize,
    /// Column of `key` (one-based).
    key_col: usize,
    key: &'a str,
    /// Column of `value` (one-based).
    value_col: usize,
    value: &'a str,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn expr_at(l: &Line<'_>) -> Result<FieldExpr> {
    FieldExpr::parse(l.value).map_err(|e| match e {
        Error::Parse {
            column, message, ..
        } => err(l.number, l.value_col + column - 1, message),
        other => other,
    })
}

/// `name[i,j]` or `name[i]`, one-based indices.
fn indexed<'a>(l: &Line<'a>) -> Result<Option<(&'a str, Vec<usize>)>> {
    let Some(open) = l.key.find('[') else {
        return Ok(None);
    };
    let close = l
        .key
        .rfind(']')
        .filter(|&c| c == l.key.len() - 1)
        .ok_or_else(|| err(l.number, l.key_col + l.key.len(), "expected `]`"))?;
    let name = l.key[..open].trim();
    let indices = l.key[open + 1..close]
        .split(',')
        .map(|s| {
            let v: usize = s.trim().parse().map_err(|_| {
                err(
                    l.number,
                    l.key_col + open + 1,
                    format!("bad index `{}`", s.trim()),
                )
            })?;
            if v == 0 {
                return Err(err(l.number, l.key_col + open + 1, "indices start at 1"));
            }
            Ok(v - 1)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some((name, indices)))
}

fn parse_value<T: std::str::FromStr>(l: &Line<'_>) -> Result<T> {
    l.value.trim().parse().map_err(|_| {
        err(
            l.number,
            l.value_col,
            format!("invalid value `{}` for `{}`", l.value.trim(), l.key),
        )
    })
}

fn pair(l: &Line<'_>) -> Result<(f64, f64)> {
    let parts: Vec<&str> = l.value.split(',').map(str::trim).collect();
    let bad = || {
        err(
            l.number,
            l.value_col,
            format!("`{}` expects two numbers", l.key),
        )
    };
    if parts.len() != 2 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    if !(a < b) {
        return Err(err(
            l.number,
            l.value_col,
            "lower bound must be below upper bound",
        ));
    }
    Ok((a, b))
}

#[derive(Default)]
struct MetricDraft {
    dim: Option<(usize, usize)>,
    entries: BTreeMap<(usize, usize), (FieldExpr, usize)>,
    potential: Option<(FieldExpr, usize)>,
    factor: Option<(FieldExpr, usize)>,
    line: usize,
}

#[derive(Default)]
struct StructureDraft {
    canonical: Option<usize>,
    grids: BTreeMap<usize, BTreeMap<(usize, usize), (FieldExpr, usize)>>,
}

/// Parses a configuration or manifold file.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut section: Option<(String, usize)> = None;
    let mut seen = Vec::new();
    let mut run = RunSection::default();
    let mut metric = MetricDraft::default();
    let mut structures = StructureDraft::default();
    let mut gauge: BTreeMap<usize, (FieldExpr, usize)> = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if trimmed.starts_with('[') && !trimmed.contains('=') {
            let name = trimmed
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| err(number, indent + 1, "malformed section header"))?
                .trim()
                .to_string();
            if !["metric", "structures", "gauge", "run"].contains(&name.as_str()) {
                return Err(err(number, indent + 2, format!("unknown section `{name}`")));
            }
            if seen.contains(&name) {
                return Err(err(
                    number,
                    indent + 2,
                    format!("duplicate section `{name}`"),
                ));
            }
            if name == "metric" {
                metric.line = number;
            }
            seen.push(name.clone());
            section = Some((name, number));
            continue;
        }
        let Some((sec, _)) = &section else {
            return Err(err(number, indent + 1, "entry outside of a section"));
        };
        let (key, value, value_col) = match content.find('=') {
            Some(eq) => {
                let value = &content[eq + 1..];
                let lead = value.len() - value.trim_start().len();
                (content[..eq].trim(), value.trim(), eq + 2 + lead)
            }
            None => (trimmed, "", indent + 1 + trimmed.len()),
        };
        let l = Line {
            number,
            key_col: indent + 1,
            key,
            value_col,
            value,
        };
        if l.value.is_empty() && !(sec == "structures" && l.key == "canonical") {
            return Err(err(
                number,
                l.value_col,
                format!("missing value for `{}`", l.key),
            ));
        }
        match sec.as_str() {
            "metric" => match l.key {
                "dim" => metric.dim = Some((parse_value::<usize>(&l)?, number)),
                "kahler_potential" => metric.potential = Some((expr_at(&l)?, number)),
                "conformal_factor" => metric.factor = Some((expr_at(&l)?, number)),
                _ => match indexed(&l)? {
                    Some(("g", ix)) if ix.len() == 2 => {
                        let key = (ix[0].min(ix[1]), ix[0].max(ix[1]));
                        let e = expr_at(&l)?;
                        if let Some((prev, _)) = metric.entries.get(&key) {
                            if prev != &e {
                                return Err(err(
                                    number,
                                    l.key_col,
                                    "entry conflicts with its mirror",
                                ));
                            }
                        }
                        metric.entries.insert(key, (e, number));
                    }
                    _ => {
                        return Err(err(
                            number,
                            l.key_col,
                            format!("unknown metric key `{}`", l.key),
                        ))
                    }
                },
            },
            "structures" => match l.key {
                "canonical" => structures.canonical = Some(number),
                _ => match indexed(&l)? {
                    Some((name, ix)) if ix.len() == 2 => {
                        let which = match name {
                            "I" | "I1" => 0,
                            "I2" => 1,
                            "I3" => 2,
                            _ => {
                                return Err(err(
                                    number,
                                    l.key_col,
                                    format!("unknown structure `{name}`"),
                                ))
                            }
                        };
                        structures
                            .grids
                            .entry(which)
                            .or_default()
                            .insert((ix[0], ix[1]), (expr_at(&l)?, number));
                    }
                    _ => {
                        return Err(err(
                            number,
                            l.key_col,
                            format!("unknown structures key `{}`", l.key),
                        ))
                    }
                },
            },
            "gauge" => match indexed(&l)? {
                Some(("A", ix)) if ix.len() == 1 => {
                    gauge.insert(ix[0], (expr_at(&l)?, number));
                }
                _ => {
                    return Err(err(
                        number,
                        l.key_col,
                        format!("unknown gauge key `{}`", l.key),
                    ))
                }
            },
            _ => match l.key {
                "name" => run.name = Some(l.value.to_string()),
                "expected_class" => {
                    run.expected_class = Some(
                        ManifoldClass::parse(l.value)
                            .map_err(|e| err(number, l.value_col, e.to_string()))?,
                    )
                }
                "manifolds" => {
                    run.manifolds = l
                        .value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                }
                "checks" => {
                    run.checks = Some(
                        Check::parse_list(l.value)
                            .map_err(|e| err(number, l.value_col, e.to_string()))?,
                    )
                }
                "points" => run.points = Some(parse_value(&l)?),
                "seed" => run.seed = Some(parse_value(&l)?),
                "jet_order" => run.jet_order = Some(parse_value(&l)?),
                "box" => {
                    let (lo, hi) = pair(&l)?;
                    run.domain = Some(SamplingDomain::Box { lo, hi });
                }
                "annulus" => {
                    let (inner, outer) = pair(&l)?;
                    if inner < 0.0 {
                        return Err(err(
                            number,
                            l.value_col,
                            "annulus radii must be non-negative",
                        ));
                    }
                    run.domain = Some(SamplingDomain::PairAnnulus { inner, outer });
                }
                _ => {
                    return Err(err(
                        number,
                        l.key_col,
                        format!("unknown run key `{}`", l.key),
                    ))
                }
            },
        }
    }

    if !seen.iter().any(|s| s == "metric") {
        if seen.iter().any(|s| s == "structures" || s == "gauge") {
            return Err(err(
                1,
                1,
                "[structures] and [gauge] need a [metric] section",
            ));
        }
        return Ok(ConfigFile {
            run,
            manifold: None,
        });
    }
    let manifold = build_manifold(&run, metric, structures, gauge)?;
    Ok(ConfigFile {
        run,
        manifold: Some(manifold),
    })
}

fn build_manifold(
    run: &RunSection,
    metric: MetricDraft,
    structures: StructureDraft,
    gauge: BTreeMap<usize, (FieldExpr, usize)>,
) -> Result<ZooEntry> {
    let (dim, dim_line) = metric
        .dim
        .ok_or_else(|| err(metric.line, 1, "[metric] needs `dim`"))?;
    if dim == 0 || dim > 16 {
        return Err(err(dim_line, 1, "dim must be between 1 and 16"));
    }
    let sources = [
        metric.potential.is_some(),
        metric.factor.is_some(),
        !metric.entries.is_empty(),
    ];
    if sources.iter().filter(|&&b| b).count() != 1 {
        return Err(err(
            metric.line,
            1,
            "give exactly one of g[r,c], kahler_potential, conformal_factor",
        ));
    }
    let check_range = |ix: &[usize], line: usize| -> Result<()> {
        if ix.iter().any(|&i| i >= dim) {
            return Err(err(line, 1, format!("index outside dimension {dim}")));
        }
        Ok(())
    };
    let metric_field = if let Some((k, line)) = metric.potential {
        if dim % 2 != 0 {
            return Err(err(line, 1, "a Kahler potential needs an even dim"));
        }
        metric_from_kahler_potential(&k, dim / 2).map_err(|e| err(line, 1, e.to_string()))?
    } else if let Some((f, _)) = metric.factor {
        MetricField::conformally_flat(dim, f)
    } else {
        for (&(r, c), &(_, line)) in &metric.entries {
            check_range(&[r, c], line)?;
        }
        MetricField::from_upper(dim, |r, c| {
            metric
                .entries
                .get(&(r, c))
                .map(|(e, _)| e.clone())
                .unwrap_or_else(|| FieldExpr::real(0.0))
        })
    };

    let grid = |entries: &BTreeMap<(usize, usize), (FieldExpr, usize)>| -> Result<StructureField> {
        for (&(r, c), &(_, line)) in entries {
            check_range(&[r, c], line)?;
        }
        StructureField::from_grid(
            (0..dim)
                .map(|r| {
                    (0..dim)
                        .map(|c| {
                            entries
                                .get(&(r, c))
                                .map(|(e, _)| e.clone())
                                .unwrap_or_else(|| FieldExpr::real(0.0))
                        })
                        .collect()
                })
                .collect(),
        )
    };
    let structure_set = match (structures.canonical, structures.grids.len()) {
        (Some(line), 0) => {
            if dim % 4 != 0 {
                return Err(err(line, 1, "canonical structures need dim divisible by 4"));
            }
            StructureSet::Triple(canonical_triple(dim / 4))
        }
        (Some(line), _) => {
            return Err(err(
                line,
                1,
                "`canonical` cannot be combined with explicit grids",
            ))
        }
        (None, 0) => {
            if dim % 4 == 0 {
                StructureSet::Triple(canonical_triple(dim / 4))
            } else if dim % 2 == 0 {
                let mut m = vec![vec![0.0; dim]; dim];
                for j in 0..dim / 2 {
                    m[2 * j][2 * j + 1] = 1.0;
                    m[2 * j + 1][2 * j] = -1.0;
                }
                StructureSet::Single(StructureField::constant(&m)?)
            } else {
                return Err(err(
                    metric.line,
                    1,
                    "odd dimension admits no complex structure",
                ));
            }
        }
        (None, 1) if structures.grids.contains_key(&0) => {
            StructureSet::Single(grid(&structures.grids[&0])?)
        }
        (None, 3) => StructureSet::Triple(StructureTriple::custom([
            grid(&structures.grids[&0])?,
            grid(&structures.grids[&1])?,
            grid(&structures.grids[&2])?,
        ])),
        (None, _) => {
            let line = structures
                .grids
                .values()
                .flat_map(|g| g.values())
                .map(|(_, l)| *l)
                .min()
                .unwrap_or(1);
            return Err(err(line, 1, "give I (or I1) alone, or all of I1, I2, I3"));
        }
    };

    let gauge_field = if gauge.is_empty() {
        None
    } else {
        for (&m, &(_, line)) in &gauge {
            check_range(&[m], line)?;
        }
        Some(
            (0..dim)
                .map(|m| {
                    gauge
                        .get(&m)
                        .map(|(e, _)| e.clone())
                        .unwrap_or_else(|| FieldExpr::real(0.0))
                })
                .collect(),
        )
    };

    let expected_class = run.expected_class.unwrap_or(if structure_set.is_triple() {
        ManifoldClass::Hkt
    } else {
        ManifoldClass::Complex
    });
    let control = if expected_class == ManifoldClass::Generic {
        Control::NonIntegrable
    } else {
        Control::Positive
    };
    Ok(ZooEntry {
        name: run.name.clone().unwrap_or_else(|| "custom".into()),
        description: "user-supplied manifold".into(),
        metric: metric_field,
        structures: structure_set,
        gauge: gauge_field,
        expected_class,
        domain: run
            .domain
            .unwrap_or(SamplingDomain::Box { lo: -1.0, hi: 1.0 }),
        control,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conformal_file() {
        let text = "\
# S4 again
[metric]
dim = 4
g[1,1] = 1/(1 + (x1^2+x2^2+x3^2+x4^2)/2)^2
g[2,2] = 1/(1 + (x1^2+x2^2+x3^2+x4^2)/2)^2
g[3,3] = 1/(1 + (x1^2+x2^2+x3^2+x4^2)/2)^2
g[4,4] = 1/(1 + (x1^2+x2^2+x3^2+x4^2)/2)^2

[structures]
canonical

[run]
name = s4_file
expected_class = hkt
points = 5
seed = 3
box = -1.5, 1.5
";
        let cfg = parse_config(text).unwrap();
        let m = cfg.manifold.unwrap();
        assert_eq!(m.name, "s4_file");
        assert_eq!(m.expected_class, ManifoldClass::Hkt);
        assert!(m.structures.is_canonical());
        assert_eq!(cfg.run.points, Some(5));
        assert_eq!(m.domain, SamplingDomain::Box { lo: -1.5, hi: 1.5 });
        assert!(m.metric.entry(0, 1).is_zero());
    }

    #[test]
    fn run_only_file() {
        let cfg = parse_config("[run]\nmanifolds = flat_r4, hopf\nchecks = n4\n").unwrap();
        assert!(cfg.manifold.is_none());
        assert_eq!(cfg.run.manifolds, vec!["flat_r4", "hopf"]);
        assert_eq!(cfg.run.checks, Some(vec![Check::N4]));
    }

    #[test]
    fn errors_point_at_the_offending_text() {
        match parse_config("[metric]\ndim = 4\ng[1,1] = 1 + * x1\n") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 14)),
            other => panic!("{other:?}"),
        }
        match parse_config("[run]\n  colour = red\n") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        match parse_config("dim = 4\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        assert!(parse_config("[metric]\ndim = 4\ng[1,2] = x1\ng[2,1] = x2\n").is_err());
        assert!(parse_config("[metric]\ndim = 4\ng[5,5] = 1\n").is_err());
        assert!(parse_config("[run]\npoints = many\n").is_err());
        assert!(parse_config("[bogus]\n").is_err());
    }

    #[test]
    fn kahler_and_gauge_sections() {
        let text = "[metric]\ndim = 4\nkahler_potential = z1*zb1 + z2*zb2\n[structures]\nI[1,2] = 1\nI[2,1] = -1\nI[3,4] = 1\nI[4,3] = -1\n[gauge]\nA[2] = 0.5*x1\n[run]\nexpected_class = kahler\n";
        let m = parse_config(text).unwrap().manifold.unwrap();
        assert!(!m.structures.is_triple());
        assert_eq!(m.gauge.as_ref().unwrap().len(), 4);
        assert!(m.gauge.unwrap()[0].is_zero());
    }
}

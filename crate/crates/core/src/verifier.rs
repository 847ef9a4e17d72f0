//! Sampled verification of the supercharge algebra.
//!
//! [`run_suite`] draws seeded points in each manifold's sampling domain,
//! builds the geometry and supercharges there, evaluates every requested
//! check and aggregates a [`VerificationReport`]. Points are processed in
//! parallel; the report does not depend on the thread count.
//!
//! Residuals are constant-term norms. Closure residuals are divided by the
//! largest constant coefficient of `H`, `S`-relations by that of the
//! target element.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::complex_structures::{
    algebraic_residuals, antisymmetrize, bismut_torsion, commutant_check, hkt_check,
    nijenhuis_residual, x_identity_residual, CommutantCheck, HktCheck, Matrix, Tensor3, SELF_DUAL,
};
use crate::error::{Error, Result};
use crate::geometry::{
    build_geometry, covariant_derivative_2form, ChartGeometry, JetMatrix, JetTensor3,
};
use crate::jets::DEFAULT_ORDER;
use crate::supercharges::{
    build_complex_pair, build_s_with_coeff, field_strength, flat_frame_torsion, gauge_deform,
    lift_potential, SuperchargeSet,
};
use crate::superspace::SuperElement;
use crate::zoo::{Control, ManifoldClass, ZooEntry};

/// Report format version.
pub const SCHEMA_VERSION: u32 = 1;

/// Default number of sample points per manifold.
pub const DEFAULT_POINTS: usize = 20;

/// Default seed when neither a flag nor the environment provides one.
pub const DEFAULT_SEED: u64 = 7;

/// Torsion coefficient used by the `S` mutation test.
pub const MUTATED_S_COEFF: Complex64 = Complex64::new(0.0, -1.0 / 3.0);

/// Named thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Nijenhuis, covariant-constancy and HKT residuals.
    pub classification: f64,
    /// Scale-normalised bracket residuals.
    pub closure: f64,
    /// Pointwise algebraic identities (X identity, commutant).
    pub identity: f64,
    /// A negative control must exceed this.
    pub negative: f64,
    /// The mutated `S` must exceed this.
    pub mutation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            classification: 1e-8,
            closure: 1e-9,
            identity: 1e-12,
            negative: 1e-3,
            mutation: 1e-4,
        }
    }
}

/// Checks that can be requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Classify,
    N4,
    Sfhk,
    Gauge,
    XIdentity,
    ComplexPair,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Classify,
        Check::N4,
        Check::Sfhk,
        Check::Gauge,
        Check::XIdentity,
        Check::ComplexPair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Classify => "classify",
            Check::N4 => "n4",
            Check::Sfhk => "sfhk",
            Check::Gauge => "gauge",
            Check::XIdentity => "x_identity",
            Check::ComplexPair => "complex_pair",
        }
    }

    pub fn parse(s: &str) -> Result<Check> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::Invalid(format!("unknown check `{}`", s.trim())))
    }

    /// Comma-separated list; `all` selects every check.
    pub fn parse_list(s: &str) -> Result<Vec<Check>> {
        if s.trim() == "all" {
            return Ok(Check::ALL.to_vec());
        }
        let mut out: Vec<Check> = s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(Check::parse)
            .collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Invalid("no checks selected".into()));
        }
        Ok(out)
    }
}

/// Suite configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifolds: Vec<ZooEntry>,
    pub checks: Vec<Check>,
    pub points: usize,
    pub seed: u64,
    pub jet_order: usize,
    pub tolerances: Tolerances,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifolds: Vec::new(),
            checks: Check::ALL.to_vec(),
            points: DEFAULT_POINTS,
            seed: DEFAULT_SEED,
            jet_order: DEFAULT_ORDER,
            tolerances: Tolerances::default(),
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.jet_order < 3 {
            return Err(Error::Invalid(format!(
                "jet order must be at least 3, got {}",
                self.jet_order
            )));
        }
        if self.points == 0 {
            return Err(Error::Invalid("at least one point is required".into()));
        }
        if self.checks.is_empty() {
            return Err(Error::Invalid("no checks selected".into()));
        }
        Ok(())
    }
}

/// Classification flags and the residuals behind them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub class: ManifoldClass,
    pub complex: bool,
    pub kahler: bool,
    pub hk: bool,
    pub hkt: bool,
    /// Worst algebraic residual of the structures.
    pub algebra: f64,
    /// Nijenhuis residual per structure.
    pub nijenhuis: Vec<f64>,
    /// Levi-Civita `|∇I|` per structure.
    pub levi_civita: Vec<f64>,
    /// HKT residuals per structure, for triples.
    pub hkt_residuals: Option<[f64; 3]>,
    /// Spread between the three Bismut torsions, for triples.
    pub torsion_spread: Option<f64>,
    /// Largest constant-term entry of the Bismut torsion of the first
    /// structure.
    pub torsion_norm: f64,
}

impl Classification {
    /// HK ⇒ Kähler ⇒ complex and HKT ⇒ complex.
    pub fn is_monotone(&self) -> bool {
        (!self.hk || self.kahler)
            && (!self.kahler || self.complex)
            && (!self.hkt || self.complex)
            && (!self.hk || self.hkt)
    }
}

/// Closure of the odd charges at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureRecord {
    /// `|{Q^a, Q^b} − δ^ab 2iH| / scale`, with `Q^0 = 𝒬`.
    pub matrix: Vec<Vec<f64>>,
    pub max: f64,
    /// Largest constant coefficient of `H`.
    pub scale: f64,
    /// Whether the torsion of the first structure was included.
    pub torsion: bool,
    /// `|{𝒬, F^(a)} − S^(a)|` over all jet coefficients.
    pub s_vs_bracket: Vec<f64>,
}

/// The `{S, F} = −S` relations at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SfhkRecord {
    /// For `(1,2,3)`, `(2,3,1)`, `(3,1,2)`.
    pub residuals: [f64; 3],
    pub max: f64,
    /// Same relation with the mutated torsion coefficient in `S`; absent when
    /// the torsion vanishes and the mutation has nothing to act on.
    pub mutated: Option<f64>,
    /// `{S¹,{F²,𝒬}} − {F²,{𝒬,S¹}} − {𝒬,{S¹,F²}}`, reported only.
    pub jacobi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugeRecord {
    /// Flat-frame field strength.
    pub field_strength: Matrix,
    pub commutant: CommutantCheck,
    pub closure_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexPairRecord {
    pub qq: f64,
    pub qbar_qbar: f64,
    /// Deviation of the momentum-squared part of `{Q̄,Q}/2i` from `½g^MN`.
    pub symbol: f64,
}

/// Everything computed at one sample point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub index: usize,
    pub point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure: Option<ClosureRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sfhk: Option<SfhkRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_identity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complex_pair: Option<ComplexPairRecord>,
}

/// Pass, fail, or not applicable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Skipped,
}

/// Aggregated verdict of one check on one manifold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: Check,
    pub expected: Outcome,
    pub outcome: Outcome,
    pub max_residual: f64,
    pub tolerance: f64,
    /// Whether the outcome matches the expectation; an expected failure must
    /// also exceed the negative-control threshold.
    pub as_expected: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifoldReport {
    pub name: String,
    pub description: String,
    pub dim: usize,
    pub expected_class: ManifoldClass,
    pub control: Control,
    pub checks: Vec<CheckOutcome>,
    pub points: Vec<PointRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub manifolds: usize,
    pub checks_run: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Every requested, applicable check passed.
    pub all_passed: bool,
    /// Every outcome matched its expectation, negative controls included.
    pub all_as_expected: bool,
    /// Every emitted classification satisfied HK ⇒ Kähler ⇒ complex and
    /// HKT ⇒ complex.
    pub monotone_classification: bool,
    /// `manifold/check: detail` for each failure.
    pub failures: Vec<String>,
}

/// The full report, serialised as JSON with `"schema": 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub schema: u32,
    /// Unix seconds; excluded from determinism comparisons.
    pub timestamp: u64,
    pub seed: u64,
    pub jet_order: usize,
    pub points_per_manifold: usize,
    pub checks: Vec<Check>,
    pub tolerances: Tolerances,
    /// `H = {𝒬,𝒬}/2i`.
    pub conventions: BTreeMap<String, String>,
    pub manifolds: Vec<ManifoldReport>,
    pub summary: Summary,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// JSON with the timestamp zeroed.
    pub fn body_json(&self) -> String {
        let mut copy = self.clone();
        copy.timestamp = 0;
        copy.to_json()
    }

    pub fn exit_ok(&self) -> bool {
        self.summary.all_passed
    }

    /// Plain-text table: one row per manifold and check.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22} {:<13} {:<8} {:<8} {:>12} {:>10}  note",
            "manifold", "check", "expected", "outcome", "max resid", "tol"
        );
        for m in &self.manifolds {
            for c in &m.checks {
                let note = if c.as_expected { "" } else { "UNEXPECTED" };
                let _ = writeln!(
                    out,
                    "{:<22} {:<13} {:<8} {:<8} {:>12.3e} {:>10.1e}  {}",
                    m.name,
                    c.check.name(),
                    outcome_name(c.expected),
                    outcome_name(c.outcome),
                    c.max_residual,
                    c.tolerance,
                    note
                );
            }
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "{} checks: {} passed, {} failed, {} skipped; all as expected: {}",
            s.checks_run, s.passed, s.failed, s.skipped, s.all_as_expected
        );
        for f in &s.failures {
            let _ = writeln!(out, "  failed: {f}");
        }
        out
    }
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Pass => "pass",
        Outcome::Fail => "fail",
        Outcome::Skipped => "skipped",
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seeded sample points for an entry; independent of the other entries.
pub fn sample_points(entry: &ZooEntry, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&entry.name));
    (0..count)
        .map(|_| entry.domain.sample(entry.dim(), &mut rng))
        .collect()
}

/// Classification at a point from lifted structures.
pub fn classify_point(
    geom: &ChartGeometry,
    structures: &[JetMatrix],
    tol: f64,
) -> Result<(Classification, Option<HktCheck>)> {
    let algebra = algebraic_residuals(geom, structures);
    let algebra_ok = algebra.max() <= tol;
    let nijenhuis = structures
        .iter()
        .map(|s| nijenhuis_residual(geom, s))
        .collect::<Result<Vec<_>>>()?;
    let levi_civita = structures
        .iter()
        .map(|s| {
            let lowered = geom.lower_second(s);
            Ok(covariant_derivative_2form(geom, &lowered, None)?.max_abs_value())
        })
        .collect::<Result<Vec<_>>>()?;
    let complex = algebra_ok && nijenhuis.iter().all(|&n| n <= tol);
    let kahler = complex && levi_civita[0] <= tol;
    let triple = structures.len() == 3;
    let hk = triple && complex && levi_civita.iter().all(|&n| n <= tol);
    let hkt_result = if triple && algebra_ok {
        Some(hkt_check(geom, structures)?)
    } else {
        None
    };
    let hkt = complex && hkt_result.as_ref().is_some_and(|h| h.max() <= tol);
    let torsion_norm = match &hkt_result {
        Some(h) => h.torsion.max_abs_value(),
        None => bismut_torsion(geom, &structures[0])?.max_abs_value(),
    };
    let class = if hk {
        ManifoldClass::Hk
    } else if hkt {
        ManifoldClass::Hkt
    } else if kahler {
        ManifoldClass::Kahler
    } else if complex {
        ManifoldClass::Complex
    } else {
        ManifoldClass::Generic
    };
    Ok((
        Classification {
            class,
            complex,
            kahler,
            hk,
            hkt,
            algebra: algebra.max(),
            nijenhuis,
            levi_civita,
            hkt_residuals: hkt_result.as_ref().map(|h| h.residuals),
            torsion_spread: hkt_result.as_ref().map(|h| h.torsion_spread),
            torsion_norm,
        },
        hkt_result,
    ))
}

fn relative(e: &SuperElement, scale: f64) -> f64 {
    e.residual_norm() / scale.max(f64::MIN_POSITIVE)
}

/// `|{Q^a, Q^b} − δ^ab 2iH| / |H|` for all `a ≤ b`.
pub fn closure_matrix(set: &SuperchargeSet) -> Result<(Vec<Vec<f64>>, f64)> {
    let odd = set.odd_charges();
    let scale = set.h.residual_norm();
    let two_i_h = set.h.scale(Complex64::new(0.0, 2.0));
    let n = odd.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let br = odd[a].bracket(odd[b])?;
            let r = if a == b { br.try_sub(&two_i_h)? } else { br };
            let v = relative(&r, scale);
            matrix[a][b] = v;
            matrix[b][a] = v;
        }
    }
    Ok((matrix, scale))
}

fn matrix_max(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().copied().fold(0.0, f64::max)
}

/// `{S^(a), F^(b)} + S^(c)` for the three cyclic triples, scale-normalised.
pub fn sfhk_residuals(s: &[SuperElement], f: &[SuperElement]) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (k, (a, b, c)) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)].into_iter().enumerate() {
        let lhs = s[a].bracket(&f[b])?;
        let r = lhs.try_add(&s[c])?;
        out[k] = relative(&r, s[c].residual_norm());
    }
    Ok(out)
}

/// `{S̃^(a), F^(b)} + S^(c)` with the mutated charge only inside the bracket;
/// mutating all three at once leaves the relation intact.
pub fn mutated_sfhk(
    mutated: &[SuperElement],
    s: &[SuperElement],
    f: &[SuperElement],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        let r = mutated[a].bracket(&f[b])?.try_add(&s[c])?;
        worst = worst.max(relative(&r, s[c].residual_norm()));
    }
    Ok(worst)
}

fn flat_structure(geom: &ChartGeometry, s: &JetMatrix) -> Matrix {
    // I_A^B = e^M_A I_M^N e^B_N
    let d = geom.dim();
    let e_inv = geom.inverse_vielbein().values();
    let e = geom.vielbein().values();
    let m = s.values();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    let mut acc = 0.0;
                    for mm in 0..d {
                        for n in 0..d {
                            acc += e_inv[mm][a] * m[mm][n] * e[b][n];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn flat_two_form(geom: &ChartGeometry, f: &[Vec<f64>]) -> Matrix {
    crate::complex_structures::to_flat_frame(geom, f)
}

struct PointContext<'a> {
    entry: &'a ZooEntry,
    checks: &'a [Check],
    order: usize,
    tol: Tolerances,
}

impl PointContext<'_> {
    fn wants(&self, c: Check) -> bool {
        self.checks.contains(&c)
    }

    fn evaluate(&self, index: usize, p: &[f64]) -> PointRecord {
        let mut rec = PointRecord {
            index,
            point: p.to_vec(),
            error: None,
            classification: None,
            closure: None,
            sfhk: None,
            x_identity: None,
            gauge: None,
            complex_pair: None,
        };
        if let Err(e) = self.fill(p, &mut rec) {
            rec.error = Some(e.to_string());
        }
        rec
    }

    fn fill(&self, p: &[f64], rec: &mut PointRecord) -> Result<()> {
        let entry = self.entry;
        let tol = self.tol;
        let geom = build_geometry(&entry.metric, p, self.order)?;
        let base: Arc<[f64]> = geom.base_point().clone();
        let structures = entry.structures.lift(&base, self.order)?;
        let (class, hkt) = classify_point(&geom, &structures, tol.classification)?;
        let needs_hkt = matches!(entry.expected_class, ManifoldClass::Hk | ManifoldClass::Hkt);
        let class_ok = if needs_hkt {
            class.hk || class.hkt
        } else {
            true
        };
        let class_now = class.class;
        rec.classification = Some(class.clone());

        // torsion of the first structure unless the point is torsion-free
        let torsion: Option<JetTensor3> = if class.hk || class.kahler {
            None
        } else {
            Some(match hkt {
                Some(h) => h.torsion,
                None => bismut_torsion(&geom, &structures[0])?,
            })
        };

        let needs_set =
            self.wants(Check::N4) || self.wants(Check::Sfhk) || self.wants(Check::Gauge);
        let base_set = if needs_set {
            Some(SuperchargeSet::build(&geom, torsion.as_ref(), &structures)?)
        } else {
            None
        };
        let potential = match &entry.gauge {
            Some(a) => Some(lift_potential(a, &base, self.order)?),
            None => None,
        };
        let set = match (&base_set, &potential) {
            (Some(s), Some(a)) => Some(gauge_deform(s, a)?),
            (Some(s), None) => Some(s.clone()),
            _ => None,
        };

        let mismatch = || Error::ClassificationMismatch {
            name: entry.name.clone(),
            expected: entry.expected_class.to_string(),
            found: class_now.to_string(),
            point: p.to_vec(),
        };

        if self.wants(Check::N4) {
            let set = set.as_ref().expect("set built");
            let (matrix, scale) = closure_matrix(set)?;
            let s_vs_bracket = structures
                .iter()
                .zip(&set.f)
                .zip(&set.s)
                .map(|((_, f), s)| Ok(set.q.bracket(f)?.try_sub(s)?.jet_norm()))
                .collect::<Result<Vec<_>>>()?;
            rec.closure = Some(ClosureRecord {
                max: matrix_max(&matrix),
                matrix,
                scale,
                torsion: torsion.is_some(),
                s_vs_bracket,
            });
            if needs_hkt && !class_ok {
                return Err(mismatch());
            }
        }

        if self.wants(Check::Sfhk) && structures.len() == 3 && needs_hkt {
            if !class_ok {
                return Err(mismatch());
            }
            let set = set.as_ref().expect("set built");
            let residuals = sfhk_residuals(&set.s, &set.f)?;
            let mutated = match &torsion {
                Some(c) if c.max_abs_value() > tol.classification => {
                    let s_mut = structures
                        .iter()
                        .map(|i| build_s_with_coeff(&geom, Some(c), i, MUTATED_S_COEFF))
                        .collect::<Result<Vec<_>>>()?;
                    let s_mut = match &potential {
                        Some(a) => s_mut
                            .iter()
                            .map(|e| crate::supercharges::shift_momenta(e, a))
                            .collect::<Result<Vec<_>>>()?,
                        None => s_mut,
                    };
                    Some(mutated_sfhk(&s_mut, &set.s, &set.f)?)
                }
                _ => None,
            };
            let jacobi = {
                let (q, s1, f2) = (&set.q, &set.s[0], &set.f[1]);
                let t1 = s1.bracket(&f2.bracket(q)?)?;
                let t2 = f2.bracket(&q.bracket(s1)?)?;
                let t3 = q.bracket(&s1.bracket(f2)?)?;
                relative(&t1.try_sub(&t2)?.try_sub(&t3)?, set.h.residual_norm())
            };
            rec.sfhk = Some(SfhkRecord {
                max: residuals.iter().copied().fold(0.0, f64::max),
                residuals,
                mutated,
                jacobi,
            });
        }

        if self.wants(Check::XIdentity) && structures.len() == 3 {
            let flat: Vec<Matrix> = structures
                .iter()
                .map(|s| flat_structure(&geom, s))
                .collect();
            let c: Tensor3 = match &torsion {
                Some(c) => flat_frame_torsion(&geom, c).values(),
                None => vec![vec![vec![0.0; geom.dim()]; geom.dim()]; geom.dim()],
            };
            let r = [(0, 1), (1, 2), (2, 0)]
                .into_iter()
                .map(|(a, b)| x_identity_residual(&flat[a], &flat[b], &c))
                .fold(0.0, f64::max);
            rec.x_identity = Some(r);
        }

        if self.wants(Check::Gauge) {
            if let Some(a) = &potential {
                let set = set.as_ref().expect("set built");
                let f = flat_two_form(&geom, &field_strength(a)?);
                let flat: Vec<Matrix> = structures
                    .iter()
                    .map(|s| flat_structure(&geom, s))
                    .collect();
                let commutant = commutant_check(
                    &f,
                    &flat,
                    entry.structures.is_canonical(),
                    tol.identity.max(1e-10),
                )?;
                let (matrix, _) = closure_matrix(set)?;
                rec.gauge = Some(GaugeRecord {
                    field_strength: f,
                    commutant,
                    closure_max: matrix_max(&matrix),
                });
            }
        }

        if self.wants(Check::ComplexPair) && geom.dim() % 2 == 0 {
            let (q, qbar) = build_complex_pair(&geom)?;
            let h = qbar.bracket(&q)?.scale(Complex64::new(0.0, -0.5));
            let scale = h.residual_norm();
            let ginv = geom.inverse_metric().values();
            let mut symbol: f64 = 0.0;
            let d = geom.dim();
            for m in 0..d {
                for n in m..d {
                    let want = if m == n { 0.5 * ginv[m][m] } else { ginv[m][n] };
                    let got = h
                        .coefficient(
                            crate::superspace::Momenta::from_indices(&[m, n]),
                            crate::superspace::GrassmannMonomial::ONE,
                        )
                        .map(|c| c.value())
                        .unwrap_or_default();
                    symbol = symbol.max((got - Complex64::new(want, 0.0)).norm());
                }
            }
            rec.complex_pair = Some(ComplexPairRecord {
                qq: relative(&q.bracket(&q)?, scale),
                qbar_qbar: relative(&qbar.bracket(&qbar)?, scale),
                symbol,
            });
        }
        Ok(())
    }
}

fn expected_outcome(entry: &ZooEntry, check: Check) -> Outcome {
    let triple = entry.structures.is_triple();
    let hk_like = matches!(entry.expected_class, ManifoldClass::Hk | ManifoldClass::Hkt);
    match check {
        Check::Classify | Check::ComplexPair => Outcome::Pass,
        Check::N4 => match entry.control {
            Control::Positive => Outcome::Pass,
            _ => Outcome::Fail,
        },
        Check::Sfhk if triple && hk_like => Outcome::Pass,
        Check::XIdentity if triple => Outcome::Pass,
        Check::Gauge if entry.gauge.is_some() => match entry.control {
            Control::SelfDualGauge => Outcome::Fail,
            _ => Outcome::Pass,
        },
        _ => Outcome::Skipped,
    }
}

fn aggregate(
    entry: &ZooEntry,
    check: Check,
    points: &[PointRecord],
    tol: Tolerances,
) -> CheckOutcome {
    let expected = expected_outcome(entry, check);
    let mut detail = String::new();
    let errors: Vec<&PointRecord> = points.iter().filter(|r| r.error.is_some()).collect();
    let (max, tolerance, mut fail) = match check {
        Check::Classify => {
            let mut wrong = 0;
            let mut non_monotone = 0;
            let mut worst: f64 = 0.0;
            for r in points {
                match &r.classification {
                    Some(c) => {
                        if c.class != entry.expected_class {
                            wrong += 1;
                        }
                        if !c.is_monotone() {
                            non_monotone += 1;
                        }
                        let own = match entry.expected_class {
                            ManifoldClass::Hk => c.levi_civita.iter().copied().fold(0.0, f64::max),
                            ManifoldClass::Hkt => c
                                .hkt_residuals
                                .map_or(f64::INFINITY, |h| h.iter().copied().fold(0.0, f64::max)),
                            ManifoldClass::Kahler => c.levi_civita[0],
                            ManifoldClass::Complex => {
                                c.nijenhuis.iter().copied().fold(0.0, f64::max)
                            }
                            ManifoldClass::Generic => 0.0,
                        };
                        worst = worst.max(own);
                    }
                    None => wrong += 1,
                }
            }
            if wrong > 0 {
                let _ = write!(
                    detail,
                    "{wrong} point(s) not classified {}",
                    entry.expected_class
                );
            }
            if non_monotone > 0 {
                let _ = write!(detail, "{non_monotone} point(s) with non-monotone flags");
            }
            (worst, tol.classification, wrong + non_monotone > 0)
        }
        Check::N4 => {
            let worst = points
                .iter()
                .filter_map(|r| r.closure.as_ref())
                .map(|c| c.max)
                .fold(0.0, f64::max);
            let missing = points.iter().filter(|r| r.closure.is_none()).count();
            let s_worst = points
                .iter()
                .filter_map(|r| r.closure.as_ref())
                .flat_map(|c| c.s_vs_bracket.iter().copied())
                .fold(0.0, f64::max);
            let fail = worst > tol.closure || missing > 0;
            if fail && entry.control == Control::NonIntegrable {
                let n = points
                    .iter()
                    .filter_map(|r| r.classification.as_ref())
                    .flat_map(|c| c.nijenhuis.iter().copied())
                    .fold(0.0, f64::max);
                let _ = write!(
                    detail,
                    "closure broken; structures violate integrability (Nijenhuis residual {n:.3e})"
                );
            } else if fail && entry.gauge.is_some() {
                let _ = write!(detail, "closure broken by the gauge field");
            } else if fail {
                let _ = write!(detail, "closure residual above tolerance");
            } else {
                let _ = write!(detail, "S vs bracket {s_worst:.1e}");
            }
            (worst, tol.closure, fail)
        }
        Check::Sfhk => {
            let worst = points
                .iter()
                .filter_map(|r| r.sfhk.as_ref())
                .map(|s| s.max)
                .fold(0.0, f64::max);
            let missing = points.iter().filter(|r| r.sfhk.is_none()).count();
            let mutated: Vec<f64> = points
                .iter()
                .filter_map(|r| r.sfhk.as_ref()?.mutated)
                .collect();
            let jacobi = points
                .iter()
                .filter_map(|r| r.sfhk.as_ref())
                .map(|s| s.jacobi)
                .fold(0.0, f64::max);
            let mut fail = worst > tol.closure || (expected != Outcome::Skipped && missing > 0);
            if !mutated.is_empty() {
                let weakest = mutated.iter().copied().fold(f64::INFINITY, f64::min);
                let _ = write!(detail, "mutation min {weakest:.3e}; jacobi {jacobi:.1e}");
                if weakest <= tol.mutation {
                    fail = true;
                    let _ = write!(detail, "; mutation not detected");
                }
            } else {
                let _ = write!(detail, "no torsion to mutate; jacobi {jacobi:.1e}");
            }
            (worst, tol.closure, fail)
        }
        Check::XIdentity => {
            let worst = points
                .iter()
                .filter_map(|r| r.x_identity)
                .fold(0.0, f64::max);
            let missing =
                expected != Outcome::Skipped && points.iter().any(|r| r.x_identity.is_none());
            (worst, tol.identity, worst > tol.identity || missing)
        }
        Check::Gauge => {
            let records: Vec<&GaugeRecord> =
                points.iter().filter_map(|r| r.gauge.as_ref()).collect();
            let worst = records.iter().map(|g| g.closure_max).fold(0.0, f64::max);
            let not_commuting = records.iter().filter(|g| !g.commutant.commutes).count();
            let commutant_worst = records
                .iter()
                .flat_map(|g| g.commutant.residuals.iter().copied())
                .fold(0.0, f64::max);
            if not_commuting > 0 {
                let _ = write!(
                    detail,
                    "field strength fails the commutant check (residual {commutant_worst:.3e}); closure {worst:.3e}"
                );
            }
            let missing = expected != Outcome::Skipped && records.len() != points.len();
            (
                worst,
                tol.closure,
                worst > tol.closure || not_commuting > 0 || missing,
            )
        }
        Check::ComplexPair => {
            let worst = points
                .iter()
                .filter_map(|r| r.complex_pair.as_ref())
                .map(|c| c.qq.max(c.qbar_qbar).max(c.symbol))
                .fold(0.0, f64::max);
            (worst, tol.closure, worst > tol.closure)
        }
    };
    if !errors.is_empty() && expected != Outcome::Skipped {
        fail = true;
        if !detail.is_empty() {
            detail.push_str("; ");
        }
        let _ = write!(
            detail,
            "{} point error(s), first: {}",
            errors.len(),
            errors[0].error.as_deref().unwrap_or("")
        );
    }
    let outcome = if expected == Outcome::Skipped && check != Check::Classify {
        Outcome::Skipped
    } else if fail {
        Outcome::Fail
    } else {
        Outcome::Pass
    };
    let as_expected = match (expected, outcome) {
        (Outcome::Fail, Outcome::Fail) => {
            max > tol.negative || check == Check::Gauge && errors.is_empty()
        }
        (e, o) => e == o,
    };
    CheckOutcome {
        check,
        expected,
        outcome,
        max_residual: max,
        tolerance,
        as_expected,
        detail,
    }
}

/// Runs one manifold.
pub fn verify_manifold(entry: &ZooEntry, config: &RunConfig) -> ManifoldReport {
    let points = sample_points(entry, config.points, config.seed);
    let ctx = PointContext {
        entry,
        checks: &config.checks,
        order: config.jet_order,
        tol: config.tolerances,
    };
    let records: Vec<PointRecord> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| ctx.evaluate(i, p))
        .collect();
    let checks = config
        .checks
        .iter()
        .map(|&c| aggregate(entry, c, &records, config.tolerances))
        .collect();
    ManifoldReport {
        name: entry.name.clone(),
        description: entry.description.clone(),
        dim: entry.dim(),
        expected_class: entry.expected_class,
        control: entry.control,
        checks,
        points: records,
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Runs every manifold in the config and aggregates the report.
pub fn run_suite(config: &RunConfig) -> Result<VerificationReport> {
    config.validate()?;
    let run = || {
        config
            .manifolds
            .iter()
            .map(|e| verify_manifold(e, config))
            .collect::<Vec<_>>()
    };
    let manifolds = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let mut summary = Summary {
        manifolds: manifolds.len(),
        checks_run: 0,
        passed: 0,
        failed: 0,
        skipped: 0,
        all_passed: true,
        all_as_expected: true,
        monotone_classification: true,
        failures: Vec::new(),
    };
    for m in &manifolds {
        for c in &m.checks {
            summary.checks_run += 1;
            match c.outcome {
                Outcome::Pass => summary.passed += 1,
                Outcome::Skipped => summary.skipped += 1,
                Outcome::Fail => {
                    summary.failed += 1;
                    summary.all_passed = false;
                    let d = if c.detail.is_empty() {
                        "residual above tolerance"
                    } else {
                        &c.detail
                    };
                    summary
                        .failures
                        .push(format!("{}/{}: {}", m.name, c.check.name(), d));
                }
            }
            summary.all_as_expected &= c.as_expected;
        }
        for p in &m.points {
            if let Some(cl) = &p.classification {
                summary.monotone_classification &= cl.is_monotone();
            }
        }
    }
    let mut conventions = BTreeMap::new();
    conventions.insert("hamiltonian".into(), "H = {Q,Q}/(2i)".into());
    conventions.insert(
        "bracket".into(),
        "{Pi_M, x^N} = delta, {psi^A, psi^B} = i delta".into(),
    );
    conventions.insert(
        "closure_residual".into(),
        "max |{Q^a,Q^b} - delta^ab 2iH| / max |H|, constant terms".into(),
    );
    Ok(VerificationReport {
        schema: SCHEMA_VERSION,
        timestamp: unix_now(),
        seed: config.seed,
        jet_order: config.jet_order,
        points_per_manifold: config.points,
        checks: config.checks.clone(),
        tolerances: config.tolerances,
        conventions,
        manifolds,
        summary,
    })
}

/// Summary of the random-torsion X-identity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XIdentitySweep {
    pub samples: usize,
    /// Worst residual over the pairs `(𝓘,𝓙)`, `(𝓙,𝓚)`, `(𝓚,𝓘)`.
    pub max_residual: f64,
    /// Smallest residual of the `I = J` control.
    pub control_min: f64,
    /// Largest residual of the `I = J` control.
    pub control_max: f64,
}

/// X identity for canonical structures and random totally antisymmetric `C`.
pub fn x_identity_sweep(samples: usize, seed: u64) -> XIdentitySweep {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let units: Vec<Matrix> = SELF_DUAL
        .iter()
        .map(|m| m.iter().map(|r| r.to_vec()).collect())
        .collect();
    let mut out = XIdentitySweep {
        samples,
        max_residual: 0.0,
        control_min: f64::INFINITY,
        control_max: 0.0,
    };
    for _ in 0..samples {
        let raw: Tensor3 = (0..4)
            .map(|_| {
                (0..4)
                    .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        let c = antisymmetrize(&raw);
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            out.max_residual = out
                .max_residual
                .max(x_identity_residual(&units[a], &units[b], &c));
        }
        let control = x_identity_residual(&units[0], &units[0], &c);
        out.control_min = out.control_min.min(control);
        out.control_max = out.control_max.max(control);
    }
    out
}

/// Debug listing of the constructed charges of an entry at a point.
pub fn explain(entry: &ZooEntry, p: &[f64], order: usize) -> Result<String> {
    let geom = build_geometry(&entry.metric, p, order)?;
    let structures = entry.structures.lift(geom.base_point(), order)?;
    let (class, hkt) = classify_point(&geom, &structures, Tolerances::default().classification)?;
    let torsion = if class.hk || class.kahler {
        None
    } else {
        Some(match hkt {
            Some(h) => h.torsion,
            None => bismut_torsion(&geom, &structures[0])?,
        })
    };
    let mut set = SuperchargeSet::build(&geom, torsion.as_ref(), &structures)?;
    if let Some(a) = &entry.gauge {
        set = gauge_deform(&set, &lift_potential(a, geom.base_point(), order)?)?;
    }
    let mut out = String::new();
    let _ = writeln!(out, "# {} at {:?}", entry.name, p);
    let _ = writeln!(
        out,
        "# class {}, torsion {}",
        class.class,
        if torsion.is_some() { "on" } else { "off" }
    );
    let _ = writeln!(out, "[Q]\n{}", set.q);
    for (k, s) in set.s.iter().enumerate() {
        let _ = writeln!(out, "[S{}]\n{}", k + 1, s);
    }
    for (k, f) in set.f.iter().enumerate() {
        let _ = writeln!(out, "[F{}]\n{}", k + 1, f);
    }
    let _ = writeln!(out, "[H]\n{}", set.h);
    Ok(out)
}

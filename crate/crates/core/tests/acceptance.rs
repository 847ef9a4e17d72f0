//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fail.

mod common;

use std::time::{Duration, Instant};

use hkt_susy::complex_structures::canonical_triple;
use hkt_susy::complex_structures::StructureSet;
use hkt_susy::complex_structures::{
    asd_decompose, asd_reconstruct, commutant_check, Matrix, SELF_DUAL,
};
use hkt_susy::geometry::MetricField;
use hkt_susy::jets::FieldExpr;
use hkt_susy::verifier::{
    run_suite, x_identity_sweep, Check, Outcome, RunConfig, VerificationReport,
};
use hkt_susy::zoo::{names, zoo_get, Control, ManifoldClass, SamplingDomain, ZooEntry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 7;
const POINTS: usize = 20;

const CLOSURE_TOL: f64 = 1e-9;
const HK_CLOSURE_TOL: f64 = 1e-12;
const SFHK_TOL: f64 = 1e-9;
const MUTATION_MIN: f64 = 1e-4;
const X_IDENTITY_TOL: f64 = 1e-12;
const X_CONTROL_MIN: f64 = 1e-3;
const KAHLER_TOL: f64 = 1e-9;
const GAUGE_BREAK_MIN: f64 = 1e-3;
const COMMUTANT_TOL: f64 = 1e-12;
const NILPOTENCY_TOL: f64 = 1e-9;
const ALGEBRA_TOL: f64 = 1e-10;
const FD_TOL: f64 = 1e-6;
const TIME_LIMIT: Duration = Duration::from_secs(30);

struct Tally {
    failed: usize,
    monotone: bool,
}

impl Tally {
    fn line(&mut self, n: usize, ok: bool, text: String) {
        println!("{} criterion {n}: {text}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed += 1;
        }
    }

    fn run(&mut self, names: &[&str], checks: &[Check], points: usize) -> VerificationReport {
        let config = RunConfig {
            manifolds: names.iter().map(|n| zoo_get(n).unwrap()).collect(),
            checks: checks.to_vec(),
            points,
            seed: SEED,
            ..RunConfig::default()
        };
        self.run_config(&config)
    }

    fn run_config(&mut self, config: &RunConfig) -> VerificationReport {
        let report = run_suite(config).unwrap();
        self.monotone &= report.summary.monotone_classification;
        report
    }
}

fn outcome(report: &VerificationReport, name: &str, check: Check) -> (Outcome, f64) {
    let m = report.manifolds.iter().find(|m| m.name == name).unwrap();
    let c = m.checks.iter().find(|c| c.check == check).unwrap();
    (c.outcome, c.max_residual)
}

fn closure_max(report: &VerificationReport, name: &str) -> f64 {
    let m = report.manifolds.iter().find(|m| m.name == name).unwrap();
    m.points
        .iter()
        .map(|p| p.closure.as_ref().map_or(f64::INFINITY, |c| c.max))
        .fold(0.0, f64::max)
}

fn criterion_1(t: &mut Tally) {
    let start = Instant::now();
    let report = t.run(&["conf_flat_s4", "hopf"], &[Check::N4], POINTS);
    let elapsed = start.elapsed();
    let worst = closure_max(&report, "conf_flat_s4").max(closure_max(&report, "hopf"));
    let passed = report.summary.all_passed;
    t.line(
        1,
        passed && worst <= CLOSURE_TOL && elapsed <= TIME_LIMIT,
        format!(
            "N=4 closure on conf_flat_s4 and hopf, {POINTS} points each: max {worst:.2e} (tol {CLOSURE_TOL:.0e}), {:.2} s",
            elapsed.as_secs_f64()
        ),
    );
}

fn criterion_2(t: &mut Tally) {
    let report = t.run(&["flat_r4"], &[Check::N4], POINTS);
    let worst = closure_max(&report, "flat_r4");
    t.line(
        2,
        worst <= HK_CLOSURE_TOL,
        format!("flat_r4 closure: max {worst:.2e} (tol {HK_CLOSURE_TOL:.0e})"),
    );
}

fn criterion_3(t: &mut Tally) {
    let names = ["flat_r4", "conf_flat_s4", "hopf"];
    let report = t.run(&names, &[Check::Sfhk], POINTS);
    let mut worst: f64 = 0.0;
    let mut mutated_min = f64::INFINITY;
    let mut missing = false;
    for m in &report.manifolds {
        for p in &m.points {
            match &p.sfhk {
                Some(s) => {
                    worst = worst.max(s.max);
                    if m.name != "flat_r4" {
                        match s.mutated {
                            Some(v) => mutated_min = mutated_min.min(v),
                            None => missing = true,
                        }
                    }
                }
                None => missing = true,
            }
        }
    }
    t.line(
        3,
        !missing && worst <= SFHK_TOL && mutated_min > MUTATION_MIN,
        format!(
            "S/F relation: max {worst:.2e} (tol {SFHK_TOL:.0e}); mutated coefficient min {mutated_min:.2e} (must exceed {MUTATION_MIN:.0e})"
        ),
    );
}

fn criterion_4(t: &mut Tally) {
    let sweep = x_identity_sweep(100, SEED);
    t.line(
        4,
        sweep.max_residual <= X_IDENTITY_TOL && sweep.control_min > X_CONTROL_MIN,
        format!(
            "X identity on {} random torsions: max {:.2e} (tol {X_IDENTITY_TOL:.0e}); I = J control min {:.2e} (must exceed {X_CONTROL_MIN:.0e})",
            sweep.samples, sweep.max_residual, sweep.control_min
        ),
    );
}

fn criterion_5(t: &mut Tally) {
    let report = t.run(
        &["kahler_from_potential"],
        &[Check::Classify, Check::N4],
        POINTS,
    );
    let m = &report.manifolds[0];
    let torsion = m
        .points
        .iter()
        .map(|p| {
            p.classification
                .as_ref()
                .map_or(f64::INFINITY, |c| c.torsion_norm)
        })
        .fold(0.0, f64::max);
    let closure = closure_max(&report, "kahler_from_potential");
    let all_kahler = m
        .points
        .iter()
        .all(|p| p.classification.as_ref().is_some_and(|c| c.kahler));
    t.line(
        5,
        all_kahler && torsion <= KAHLER_TOL && closure <= KAHLER_TOL,
        format!("Kahler potential: torsion max {torsion:.2e}, pair closure max {closure:.2e} (tol {KAHLER_TOL:.0e})"),
    );
}

/// Commutes with the canonical triple iff the self-dual coefficients vanish.
fn commutant_equivalence(samples: usize) -> (bool, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let structures: Vec<Matrix> = SELF_DUAL
        .iter()
        .map(|m| m.iter().map(|r| r.to_vec()).collect())
        .collect();
    let mut agree = true;
    let (mut zero_max, mut nonzero_min) = (0.0_f64, f64::INFINITY);
    for k in 0..samples {
        let mut coeffs = [0.0; 6];
        for c in coeffs.iter_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
        let self_dual_zero = k % 2 == 0;
        if self_dual_zero {
            coeffs[..3].fill(0.0);
        }
        let f = asd_reconstruct(&coeffs);
        let rows: Vec<Vec<f64>> = f.iter().map(|r| r.to_vec()).collect();
        let check = commutant_check(&rows, &structures, true, COMMUTANT_TOL).unwrap();
        let back = asd_decompose(&f).unwrap();
        let argmin_zero = back[..3].iter().all(|c| c.abs() <= COMMUTANT_TOL);
        let worst = check.residuals.iter().cloned().fold(0.0, f64::max);
        if self_dual_zero {
            zero_max = zero_max.max(worst);
        } else {
            nonzero_min = nonzero_min.min(worst);
        }
        agree &= check.commutes == self_dual_zero && argmin_zero == self_dual_zero;
    }
    (agree, zero_max, nonzero_min)
}

fn criterion_6(t: &mut Tally) {
    let report = t.run(
        &["asd_gauge", "sd_gauge"],
        &[Check::N4, Check::Gauge],
        POINTS,
    );
    let asd = closure_max(&report, "asd_gauge");
    let sd_min = report
        .manifolds
        .iter()
        .find(|m| m.name == "sd_gauge")
        .unwrap()
        .points
        .iter()
        .map(|p| p.closure.as_ref().map_or(0.0, |c| c.max))
        .fold(f64::INFINITY, f64::min);
    let (sd_gauge, _) = outcome(&report, "sd_gauge", Check::Gauge);
    let (asd_gauge, _) = outcome(&report, "asd_gauge", Check::Gauge);
    let (agree, zero_max, nonzero_min) = commutant_equivalence(100);
    t.line(
        6,
        asd <= CLOSURE_TOL
            && asd_gauge == Outcome::Pass
            && sd_min > GAUGE_BREAK_MIN
            && sd_gauge == Outcome::Fail
            && agree,
        format!(
            "gauge: asd closure max {asd:.2e}; sd closure min {sd_min:.2e} with commutant {sd_gauge:?}; 100 random F: equivalence {agree}, commutator max {zero_max:.1e} when a = 0, min {nonzero_min:.2e} otherwise"
        ),
    );
}

fn near_identity_metric(rng: &mut impl Rng) -> MetricField {
    MetricField::from_upper(4, |r, c| {
        let mut s = String::from(if r == c { "1" } else { "0" });
        for m in 1..=4 {
            s += &format!(" + 0.05*({:.6})*x{m}", rng.gen_range(-1.0..1.0));
            for n in m..=4 {
                s += &format!(" + 0.05*({:.6})*x{m}*x{n}", rng.gen_range(-1.0..1.0));
            }
        }
        FieldExpr::parse(&s).unwrap()
    })
}

fn criterion_7(t: &mut Tally) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let entry = ZooEntry {
        name: "random_polynomial".into(),
        description: "polynomial perturbation of the flat metric".into(),
        metric: near_identity_metric(&mut rng),
        structures: StructureSet::Triple(canonical_triple(1)),
        gauge: None,
        expected_class: ManifoldClass::Generic,
        domain: SamplingDomain::Box { lo: -0.5, hi: 0.5 },
        control: Control::Positive,
    };
    let config = RunConfig {
        manifolds: vec![entry],
        checks: vec![Check::ComplexPair],
        points: POINTS,
        seed: SEED,
        ..RunConfig::default()
    };
    let report = t.run_config(&config);
    let records: Vec<_> = report.manifolds[0]
        .points
        .iter()
        .filter_map(|p| p.complex_pair.as_ref())
        .collect();
    let worst = records
        .iter()
        .map(|r| r.qq.max(r.qbar_qbar))
        .fold(0.0, f64::max);
    let symbol = records.iter().map(|r| r.symbol).fold(0.0, f64::max);
    t.line(
        7,
        records.len() == POINTS && worst <= NILPOTENCY_TOL,
        format!("complex pair on a random polynomial metric: nilpotency max {worst:.2e} (tol {NILPOTENCY_TOL:.0e}), Hamiltonian symbol deviation {symbol:.2e}"),
    );
}

fn criterion_8(t: &mut Tally) {
    let mut worst = [0.0_f64; 3];
    for seed in 0..200 {
        for (w, r) in worst.iter_mut().zip(common::algebra_residuals(seed)) {
            *w = w.max(r);
        }
    }
    let mut fd: f64 = 0.0;
    for name in names() {
        let entry = zoo_get(name).unwrap();
        for p in hkt_susy::verifier::sample_points(&entry, 3, SEED) {
            fd = fd.max(common::finite_difference_deviation(&entry, &p));
        }
    }
    t.line(
        8,
        worst.iter().all(|&w| w <= ALGEBRA_TOL) && fd <= FD_TOL,
        format!(
            "200 random elements: antisymmetry {:.1e}, Leibniz {:.1e}, Jacobi {:.1e} (tol {ALGEBRA_TOL:.0e}); finite differences {fd:.1e} (tol {FD_TOL:.0e})",
            worst[0], worst[1], worst[2]
        ),
    );
}

fn criterion_9(t: &mut Tally) {
    let report = t.run(names(), &[Check::Classify], POINTS);
    let wrong: Vec<&str> = report
        .manifolds
        .iter()
        .filter(|m| m.checks.iter().any(|c| c.outcome != Outcome::Pass))
        .map(|m| m.name.as_str())
        .collect();
    let ok = wrong.is_empty() && t.monotone;
    t.line(
        9,
        ok,
        format!(
            "classification of {} zoo entries at {POINTS} points: mismatches {wrong:?}; monotone flags in every report: {}",
            report.manifolds.len(),
            t.monotone
        ),
    );
}

fn main() {
    let mut t = Tally {
        failed: 0,
        monotone: true,
    };
    criterion_1(&mut t);
    criterion_2(&mut t);
    criterion_3(&mut t);
    criterion_4(&mut t);
    criterion_5(&mut t);
    criterion_6(&mut t);
    criterion_7(&mut t);
    criterion_8(&mut t);
    criterion_9(&mut t);
    println!("acceptance: {} of 9 criteria passed", 9 - t.failed);
    if t.failed > 0 {
        std::process::exit(1);
    }
}

#![allow(dead_code)]

use std::sync::Arc;

use hkt_susy::geometry::build_geometry;
use hkt_susy::jets::Jet;
use hkt_susy::superspace::{Momenta, SuperElement};
use hkt_susy::zoo::ZooEntry;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DIM: usize = 3;
pub const FERMIONS: usize = 4;
pub const ORDER: usize = 3;

fn random_jet(rng: &mut impl Rng, base: &Arc<[f64]>) -> Jet {
    let n = Jet::zero(base, ORDER).coeffs().len();
    let coeffs = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    Jet::from_coeffs(base, ORDER, coeffs).unwrap()
}

/// A few terms of fixed parity, momentum degree at most one.
pub fn random_element(rng: &mut impl Rng, base: &Arc<[f64]>, odd: bool) -> SuperElement {
    let mut e = SuperElement::zero(base, ORDER, FERMIONS);
    for _ in 0..rng.gen_range(1..=3) {
        let momenta = if rng.gen_bool(0.5) {
            Momenta::single(rng.gen_range(0..DIM))
        } else {
            Momenta::ONE
        };
        let degree = match (odd, rng.gen_bool(0.5)) {
            (true, true) => 1,
            (true, false) => 3,
            (false, true) => 0,
            (false, false) => 2,
        };
        let factors: Vec<usize> = (0..degree).map(|_| rng.gen_range(0..FERMIONS)).collect();
        e.add_term(random_jet(rng, base), momenta, &factors)
            .unwrap();
    }
    e
}

fn sign(a: bool, b: bool) -> Complex64 {
    Complex64::new(if a && b { -1.0 } else { 1.0 }, 0.0)
}

fn scale_of(xs: &[&SuperElement]) -> f64 {
    xs.iter().map(|x| x.jet_norm()).fold(1.0, f64::max)
}

/// Graded antisymmetry, Leibniz and Jacobi residuals for one random triple,
/// each relative to the size of the inputs.
pub fn algebra_residuals(seed: u64) -> [f64; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Arc<[f64]> = (0..DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (pa, pb, pc) = (rng.gen_bool(0.5), rng.gen_bool(0.5), rng.gen_bool(0.5));
    let a = random_element(&mut rng, &base, pa);
    let b = random_element(&mut rng, &base, pb);
    let c = random_element(&mut rng, &base, pc);
    let scale = scale_of(&[&a, &b, &c]);

    // {a,b} = -(-1)^{|a||b|} {b,a}
    let ab = a.bracket(&b).unwrap();
    let ba = b.bracket(&a).unwrap();
    let anti = ab.try_add(&ba.scale(sign(pa, pb))).unwrap().jet_norm() / scale.powi(2);

    // {a, bc} = {a,b} c + (-1)^{|a||b|} b {a,c}
    let lhs = a.bracket(&b.try_mul(&c).unwrap()).unwrap();
    let t1 = ab.try_mul(&c.truncate(ORDER - 1)).unwrap();
    let t2 = b
        .truncate(ORDER - 1)
        .try_mul(&a.bracket(&c).unwrap())
        .unwrap()
        .scale(sign(pa, pb));
    let leibniz = lhs.try_sub(&t1.try_add(&t2).unwrap()).unwrap().jet_norm() / scale.powi(3);

    // (-1)^{|a||c|}{a,{b,c}} + (-1)^{|b||a|}{b,{c,a}} + (-1)^{|c||b|}{c,{a,b}} = 0
    let j1 = a
        .bracket(&b.bracket(&c).unwrap())
        .unwrap()
        .scale(sign(pa, pc));
    let j2 = b
        .bracket(&c.bracket(&a).unwrap())
        .unwrap()
        .scale(sign(pb, pa));
    let j3 = c.bracket(&ab).unwrap().scale(sign(pc, pb));
    let jacobi = j1.try_add(&j2).unwrap().try_add(&j3).unwrap().jet_norm() / scale.powi(3);

    [anti, leibniz, jacobi]
}

fn central_first(f: &dyn Fn(&[f64]) -> f64, p: &[f64], m: usize, h: f64) -> f64 {
    let mut plus = p.to_vec();
    let mut minus = p.to_vec();
    plus[m] += h;
    minus[m] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Worst relative deviation between jet derivatives of the metric and
/// central differences at `p`: first and second derivatives of every entry,
/// and first derivatives of the Christoffel symbols.
pub fn finite_difference_deviation(entry: &ZooEntry, p: &[f64]) -> f64 {
    let dim = entry.dim();
    let mut worst: f64 = 0.0;
    let mut record = |jet: f64, fd: f64, size: f64| {
        worst = worst.max((jet - fd).abs() / size.max(1.0));
    };
    for r in 0..dim {
        for c in r..dim {
            let expr = entry.metric.entry(r, c);
            let jet = expr.lift(&Arc::from(p), 3).unwrap();
            let size = jet.max_abs();
            let f = |q: &[f64]| expr.eval(q).unwrap().re;
            for m in 0..dim {
                let mut e = vec![0u8; dim];
                e[m] = 1;
                record(jet.derivative(&e).re, central_first(&f, p, m, 1e-5), size);
                for n in m..dim {
                    let mut e2 = e.clone();
                    e2[n] += 1;
                    let h = 1e-4;
                    let df = |q: &[f64]| central_first(&f, q, m, h);
                    record(jet.derivative(&e2).re, central_first(&df, p, n, h), size);
                }
            }
        }
    }
    let h = 1e-5;
    let geom = build_geometry(&entry.metric, p, 2).unwrap();
    for m in 0..dim {
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[m] += h;
        minus[m] -= h;
        let gp = build_geometry(&entry.metric, &plus, 1).unwrap();
        let gm = build_geometry(&entry.metric, &minus, 1).unwrap();
        let mut e = vec![0u8; dim];
        e[m] = 1;
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    let jet = geom.christoffel().get(a, b, c);
                    let fd = (gp.christoffel().get(a, b, c).value().re
                        - gm.christoffel().get(a, b, c).value().re)
                        / (2.0 * h);
                    record(jet.derivative(&e).re, fd, jet.max_abs());
                }
            }
        }
    }
    worst
}

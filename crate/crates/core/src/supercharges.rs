//! Classical supercharges as [`SuperElement`]s at a base point.
//!
//! With curved fermions `ψ^M = e^M_A ψ^A`:
//!
//! ```text
//! 𝒬 = ψ^M [Π_M − (i/2) Ω_{M,BC} ψ^B ψ^C] + (i/12) C_KLM ψ^K ψ^L ψ^M
//! F = (i/2) I_MN ψ^M ψ^N
//! S = ψ^N I_N^M [Π_M − (i/2) Ω_{M,BC} ψ^B ψ^C − (i/4) C_MKL ψ^K ψ^L]
//! H = {𝒬, 𝒬} / 2i
//! ```
//!
//! Real elements carry `D` generators. The complex pair uses `2D` real
//! generators `χ, χ'` with `ψ = (χ + iχ')/√2` and `ψ̄ = (χ − iχ')/√2`, so that
//! `{ψ^A, ψ̄^B} = iδ^AB` and `{ψ, ψ} = {ψ̄, ψ̄} = 0`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{ChartGeometry, JetMatrix, JetTensor3};
use crate::jets::{FieldExpr, Jet};
use crate::superspace::{Momenta, Parity, SuperElement};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coefficient of the torsion term in `𝒬`.
pub const Q_TORSION_COEFF: Complex64 = Complex64::new(0.0, 1.0 / 12.0);

/// Coefficient of the torsion term in `S`.
pub const S_TORSION_COEFF: Complex64 = Complex64::new(0.0, -0.25);

/// `C_ABC = e^K_A e^L_B e^M_C C_KLM`.
pub fn flat_frame_torsion(geom: &ChartGeometry, torsion: &JetTensor3) -> JetTensor3 {
    let d = geom.dim();
    let e = geom.inverse_vielbein();
    let order = torsion.order();
    let zero = Jet::zero(geom.base_point(), order);
    let step1 = JetTensor3::from_fn(d, |a, l, m| {
        (0..d).fold(zero.clone(), |acc, k| {
            acc + e.get(k, a) * torsion.get(k, l, m)
        })
    });
    let step2 = JetTensor3::from_fn(d, |a, b, m| {
        (0..d).fold(zero.clone(), |acc, l| {
            acc + e.get(l, b) * step1.get(a, l, m)
        })
    });
    JetTensor3::from_fn(d, |a, b, c| {
        (0..d).fold(zero.clone(), |acc, m| {
            acc + e.get(m, c) * step2.get(a, b, m)
        })
    })
}

fn distinct(a: usize, b: usize, c: usize) -> bool {
    a != b && b != c && a != c
}

/// `𝒬`; pass `None` for the torsion-free (Kähler or HK) case.
pub fn build_q_real(geom: &ChartGeometry, torsion: Option<&JetTensor3>) -> Result<SuperElement> {
    let d = geom.dim();
    let base = geom.base_point();
    let order = geom.order() - 1;
    let e = geom.inverse_vielbein();
    let omega = geom.spin_connection();
    let mut q = SuperElement::zero(base, order, d);
    for m in 0..d {
        for a in 0..d {
            q.add_term(e.get(m, a).clone(), Momenta::single(m), &[a])?;
        }
    }
    let flat_c = torsion.map(|c| flat_frame_torsion(geom, c));
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                if !distinct(a, b, c) {
                    continue;
                }
                let mut coeff = Jet::zero(base, order);
                for m in 0..d {
                    coeff = coeff + e.get(m, a) * omega.get(m, b, c);
                }
                let mut coeff = coeff.scale(-0.5 * I);
                if let Some(fc) = &flat_c {
                    coeff = coeff + fc.get(a, b, c).scale(Q_TORSION_COEFF);
                }
                q.add_term(coeff, Momenta::ONE, &[a, b, c])?;
            }
        }
    }
    Ok(q)
}

/// `F = (i/2) I_MN ψ^M ψ^N` for a mixed-index structure.
pub fn build_f(geom: &ChartGeometry, structure: &JetMatrix) -> Result<SuperElement> {
    let d = geom.dim();
    let base = geom.base_point();
    let lowered = geom.lower_second(structure);
    let e = geom.inverse_vielbein();
    let order = geom.order().min(structure.order());
    let mut f = SuperElement::zero(base, order, d);
    for a in 0..d {
        for b in 0..d {
            if a == b {
                continue;
            }
            let mut coeff = Jet::zero(base, order);
            for m in 0..d {
                for n in 0..d {
                    coeff = coeff + e.get(m, a) * lowered.get(m, n) * e.get(n, b);
                }
            }
            f.add_term(coeff.scale(0.5 * I), Momenta::ONE, &[a, b])?;
        }
    }
    Ok(f)
}

/// `S` with the torsion coefficient fixed to `−i/4`.
pub fn build_s(
    geom: &ChartGeometry,
    torsion: Option<&JetTensor3>,
    structure: &JetMatrix,
) -> Result<SuperElement> {
    build_s_with_coeff(geom, torsion, structure, S_TORSION_COEFF)
}

/// `S` with an arbitrary torsion coefficient; used for mutation tests.
pub fn build_s_with_coeff(
    geom: &ChartGeometry,
    torsion: Option<&JetTensor3>,
    structure: &JetMatrix,
    coeff: Complex64,
) -> Result<SuperElement> {
    let d = geom.dim();
    let base = geom.base_point();
    let order = geom.order() - 1;
    let e = geom.inverse_vielbein();
    let omega = geom.spin_connection();
    // v[m][a] = e^N_A I_N^M
    let v: Vec<Vec<Jet>> = (0..d)
        .map(|m| {
            (0..d)
                .map(|a| {
                    (0..d).fold(Jet::zero(base, geom.order()), |acc, n| {
                        acc + e.get(n, a) * structure.get(n, m)
                    })
                })
                .collect()
        })
        .collect();
    // C_{M,BC} = C_MKL e^K_B e^L_C
    let half_flat = torsion.map(|c| {
        let zero = Jet::zero(base, c.order());
        let step = JetTensor3::from_fn(d, |m, b, l| {
            (0..d).fold(zero.clone(), |acc, k| acc + e.get(k, b) * c.get(m, k, l))
        });
        JetTensor3::from_fn(d, |m, b, cc| {
            (0..d).fold(zero.clone(), |acc, l| {
                acc + e.get(l, cc) * step.get(m, b, l)
            })
        })
    });
    let mut s = SuperElement::zero(base, order, d);
    for m in 0..d {
        for a in 0..d {
            s.add_term(v[m][a].clone(), Momenta::single(m), &[a])?;
        }
    }
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                if !distinct(a, b, c) {
                    continue;
                }
                let mut conn = Jet::zero(base, order);
                let mut tors = Jet::zero(base, order);
                for m in 0..d {
                    conn = conn + &v[m][a] * omega.get(m, b, c);
                    if let Some(hf) = &half_flat {
                        tors = tors + &v[m][a] * hf.get(m, b, c);
                    }
                }
                let total = conn.scale(-0.5 * I) + tors.scale(coeff);
                s.add_term(total, Momenta::ONE, &[a, b, c])?;
            }
        }
    }
    Ok(s)
}

/// `H = {Q, Q} / 2i`.
pub fn build_h(q: &SuperElement) -> Result<SuperElement> {
    if q.parity() != Parity::Odd {
        return Err(Error::PreconditionFailed(
            "the Hamiltonian needs an odd supercharge".into(),
        ));
    }
    Ok(q.bracket(q)?.scale(-0.5 * I))
}

/// `𝒬`, the `S^(a)`, the `F^(a)` and `H` at one point.
#[derive(Debug, Clone)]
pub struct SuperchargeSet {
    pub q: SuperElement,
    pub s: Vec<SuperElement>,
    pub f: Vec<SuperElement>,
    pub h: SuperElement,
    /// Jet-lifted gauge potential `A_M`, when deformed.
    pub gauge: Option<Vec<Jet>>,
}

impl SuperchargeSet {
    /// Builds the set for one torsion and any number of structures.
    pub fn build(
        geom: &ChartGeometry,
        torsion: Option<&JetTensor3>,
        structures: &[JetMatrix],
    ) -> Result<SuperchargeSet> {
        let q = build_q_real(geom, torsion)?;
        let s = structures
            .iter()
            .map(|i| build_s(geom, torsion, i))
            .collect::<Result<Vec<_>>>()?;
        let f = structures
            .iter()
            .map(|i| build_f(geom, i))
            .collect::<Result<Vec<_>>>()?;
        let h = build_h(&q)?;
        Ok(SuperchargeSet {
            q,
            s,
            f,
            h,
            gauge: None,
        })
    }

    /// `𝒬` followed by the `S^(a)`.
    pub fn odd_charges(&self) -> Vec<&SuperElement> {
        std::iter::once(&self.q).chain(self.s.iter()).collect()
    }

    /// Parity and degree bounds.
    pub fn check_shape(&self) -> Result<()> {
        for (name, e) in self.odd_charges().into_iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            if e.parity() != Parity::Odd || e.momentum_degree() > 1 || e.grassmann_degree() > 3 {
                return Err(Error::Invalid(format!(
                    "odd charge #{name} has the wrong shape"
                )));
            }
        }
        for f in &self.f {
            if !f.is_zero()
                && (f.parity() != Parity::Even
                    || f.momentum_degree() != 0
                    || f.grassmann_degree() != 2)
            {
                return Err(Error::Invalid("fermion charge has the wrong shape".into()));
            }
        }
        if !self.h.is_zero() && (self.h.parity() != Parity::Even || self.h.momentum_degree() > 2) {
            return Err(Error::Invalid("Hamiltonian has the wrong shape".into()));
        }
        Ok(())
    }
}

/// Lifts a covector of expressions at the element's base point.
pub fn lift_potential(
    potential: &[FieldExpr],
    base: &Arc<[f64]>,
    order: usize,
) -> Result<Vec<Jet>> {
    potential.iter().map(|a| a.lift(base, order)).collect()
}

/// Replaces `Π_M` by `Π_M − A_M` in an element linear in momenta.
pub fn shift_momenta(e: &SuperElement, potential: &[Jet]) -> Result<SuperElement> {
    if potential.len() != e.dim() {
        return Err(Error::Invalid(format!(
            "potential has {} components, expected {}",
            potential.len(),
            e.dim()
        )));
    }
    if e.momentum_degree() > 1 {
        return Err(Error::Invalid(
            "momentum shift is implemented for linear elements only".into(),
        ));
    }
    let mut out = e.clone();
    for (m, g, c) in e.terms() {
        if m.degree() == 1 {
            let idx = m.indices()[0];
            out.add_term(-(c * &potential[idx]), Momenta::ONE, &g.indices())?;
        }
    }
    Ok(out)
}

/// Gauge deformation `Π_M → Π_M − A_M` of every odd charge; `H` is rebuilt
/// from the deformed `𝒬` and the `F^(a)` are unchanged.
pub fn gauge_deform(set: &SuperchargeSet, potential: &[Jet]) -> Result<SuperchargeSet> {
    let q = shift_momenta(&set.q, potential)?;
    let s = set
        .s
        .iter()
        .map(|e| shift_momenta(e, potential))
        .collect::<Result<Vec<_>>>()?;
    let h = build_h(&q)?;
    Ok(SuperchargeSet {
        q,
        s,
        f: set.f.clone(),
        h,
        gauge: Some(potential.to_vec()),
    })
}

/// Field strength `F_MN = ∂_M A_N − ∂_N A_M` at the base point.
pub fn field_strength(potential: &[Jet]) -> Result<Vec<Vec<f64>>> {
    let d = potential.len();
    let mut f = vec![vec![0.0; d]; d];
    for m in 0..d {
        for n in 0..d {
            f[m][n] = (potential[n].partial(m)?.value() - potential[m].partial(n)?.value()).re;
        }
    }
    Ok(f)
}

/// The de Rham pair `Q = ψ^M(Π_M − iΩ_{M,AB} ψ̄^A ψ^B)` and
/// `Q̄ = ψ̄^M(Π_M − iΩ_{M,AB} ψ^A ψ̄^B)` on `2D` real generators.
pub fn build_complex_pair(geom: &ChartGeometry) -> Result<(SuperElement, SuperElement)> {
    let d = geom.dim();
    if d % 2 != 0 {
        return Err(Error::PreconditionFailed(
            "the complex pair needs an even dimension".into(),
        ));
    }
    let nf = 2 * d;
    let base = geom.base_point();
    let order = geom.order() - 1;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let one = Jet::constant(base, order, Complex64::new(1.0, 0.0));
    let complex = |sign: f64| -> Result<Vec<SuperElement>> {
        (0..d)
            .map(|a| {
                let mut e = SuperElement::zero(base, order, nf);
                e.add_term(one.scale_real(s), Momenta::ONE, &[a])?;
                e.add_term(
                    one.scale(Complex64::new(0.0, sign * s)),
                    Momenta::ONE,
                    &[d + a],
                )?;
                Ok(e)
            })
            .collect()
    };
    let psi = complex(1.0)?;
    let psibar = complex(-1.0)?;
    let e = geom.inverse_vielbein();
    let omega = geom.spin_connection();
    let curve = |flat: &[SuperElement]| -> Result<Vec<SuperElement>> {
        (0..d)
            .map(|m| {
                let mut acc = SuperElement::zero(base, order, nf);
                for (a, f) in flat.iter().enumerate() {
                    acc = acc.try_add(&f.mul_scalar(e.get(m, a))?)?;
                }
                Ok(acc)
            })
            .collect()
    };
    let psi_m = curve(&psi)?;
    let psibar_m = curve(&psibar)?;
    let assemble = |lead: &[SuperElement],
                    first: &[SuperElement],
                    second: &[SuperElement]|
     -> Result<SuperElement> {
        let mut out = SuperElement::zero(base, order, nf);
        for m in 0..d {
            let mut inner = SuperElement::momentum(base, order, nf, m);
            for a in 0..d {
                for b in 0..d {
                    let w = omega.get(m, a, b);
                    if w.is_zero() {
                        continue;
                    }
                    let pair = first[a].try_mul(&second[b])?.mul_scalar(&w.scale(-I))?;
                    inner = inner.try_add(&pair)?;
                }
            }
            out = out.try_add(&lead[m].try_mul(&inner)?)?;
        }
        Ok(out)
    };
    let q = assemble(&psi_m, &psibar, &psi)?;
    let qbar = assemble(&psibar_m, &psi, &psibar)?;
    Ok((q, qbar))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex_structures::{bismut_torsion, canonical_triple, StructureField};
    use crate::geometry::{build_geometry, metric_from_kahler_potential, MetricField};

    fn conf_s4() -> MetricField {
        MetricField::conformally_flat(
            4,
            FieldExpr::parse("1 + (x1^2 + x2^2 + x3^2 + x4^2)/2").unwrap(),
        )
    }

    fn hkt_setup(p: &[f64]) -> (ChartGeometry, Vec<JetMatrix>, JetTensor3) {
        let g = build_geometry(&conf_s4(), p, 3).unwrap();
        let triple: Vec<JetMatrix> = canonical_triple(1)
            .structures
            .iter()
            .map(|s| s.lift(g.base_point(), 3).unwrap())
            .collect();
        let c = bismut_torsion(&g, &triple[0]).unwrap();
        (g, triple, c)
    }

    fn check_h_symbol(h: &SuperElement, g: &ChartGeometry) {
        let ginv = g.inverse_metric().values();
        let d = g.dim();
        for m in 0..d {
            for n in m..d {
                let want = if m == n { 0.5 * ginv[m][m] } else { ginv[m][n] };
                let got = h
                    .coefficient(
                        Momenta::from_indices(&[m, n]),
                        crate::superspace::GrassmannMonomial::ONE,
                    )
                    .map(|c| c.value())
                    .unwrap_or_default();
                assert!(
                    (got - Complex64::new(want, 0.0)).norm() < 1e-12,
                    "({m},{n}): {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn flat_charges_are_free() {
        let g = build_geometry(&MetricField::flat(4), &[0.1, 0.2, 0.3, 0.4], 3).unwrap();
        let q = build_q_real(&g, None).unwrap();
        assert_eq!(q.len(), 4);
        for m in 0..4 {
            let c = q.coefficient(
                Momenta::single(m),
                crate::superspace::GrassmannMonomial::generator(m),
            );
            assert_eq!(c.unwrap().value(), Complex64::new(1.0, 0.0));
        }
        let h = build_h(&q).unwrap();
        assert_eq!(h.len(), 4);
        check_h_symbol(&h, &g);
        let f = build_f(
            &g,
            &canonical_triple(1).structures[0]
                .lift(g.base_point(), 3)
                .unwrap(),
        )
        .unwrap();
        // F = i(ψ¹ψ² + ψ³ψ⁴)
        assert_eq!(f.len(), 2);
        assert_eq!(f.debug_string(), "(0.000000000000e0 + 1.000000000000e0i) * psi[1,2]\n(0.000000000000e0 + 1.000000000000e0i) * psi[3,4]");
    }

    #[test]
    fn s_is_the_bracket_of_q_and_f() {
        let (g, triple, c) = hkt_setup(&[0.6, -0.2, 0.4, 0.9]);
        let q = build_q_real(&g, Some(&c)).unwrap();
        for i in &triple {
            let s = build_s(&g, Some(&c), i).unwrap();
            let qf = q.bracket(&build_f(&g, i).unwrap()).unwrap();
            let diff = qf.try_sub(&s).unwrap();
            assert!(diff.jet_norm() < 1e-10, "{}", diff.jet_norm());
        }
    }

    #[test]
    fn hamiltonian_symbol_is_the_inverse_metric() {
        let (g, triple, c) = hkt_setup(&[0.3, 0.5, -0.7, 0.1]);
        let set = SuperchargeSet::build(&g, Some(&c), &triple).unwrap();
        set.check_shape().unwrap();
        check_h_symbol(&set.h, &g);
        assert!(set.h.reality_residual() < 1e-12);
        for s in &set.s {
            let hs = build_h(s).unwrap();
            assert!(hs.try_sub(&set.h).unwrap().residual_norm() < 1e-12);
        }
    }

    #[test]
    fn kahler_pair_anticommutes() {
        let k = FieldExpr::parse("z1*zb1 + z2*zb2 + (z1*zb1)^2").unwrap();
        let metric = metric_from_kahler_potential(&k, 2).unwrap();
        let g = build_geometry(&metric, &[0.3, -0.4, 0.2, 0.5], 3).unwrap();
        let i = StructureField::block_diagonal(&crate::complex_structures::SELF_DUAL[0], 1)
            .lift(g.base_point(), 3)
            .unwrap();
        assert!(bismut_torsion(&g, &i).unwrap().max_abs_value() < 1e-12);
        let q = build_q_real(&g, None).unwrap();
        let s = build_s(&g, None, &i).unwrap();
        assert!(q.bracket(&s).unwrap().residual_norm() < 1e-12);
        let diff = build_h(&q).unwrap().try_sub(&build_h(&s).unwrap()).unwrap();
        assert!(diff.residual_norm() < 1e-12);
    }

    #[test]
    fn zero_potential_is_identity() {
        let (g, triple, c) = hkt_setup(&[0.3, 0.5, -0.7, 0.1]);
        let set = SuperchargeSet::build(&g, Some(&c), &triple).unwrap();
        let zero = vec![Jet::zero(g.base_point(), 3); 4];
        let same = gauge_deform(&set, &zero).unwrap();
        assert!(same.q.try_sub(&set.q).unwrap().is_zero());
        assert!(same.h.try_sub(&set.h).unwrap().is_zero());
        same.check_shape().unwrap();
    }

    #[test]
    fn complex_pair_is_nilpotent() {
        let metric = MetricField::from_upper(4, |r, c| {
            let src = match (r, c) {
                (0, 0) => "1 + 0.3*x2^2 - 0.1*x1*x3",
                (1, 1) => "1 + 0.2*x1*x4 + 0.1*x3",
                (2, 2) => "1 + 0.25*x4^2",
                (3, 3) => "1 - 0.15*x1*x2",
                (0, 2) => "0.1*x2*x4",
                (1, 2) => "0.05*x1",
                _ => "0",
            };
            FieldExpr::parse(src).unwrap()
        });
        let g = build_geometry(&metric, &[0.2, -0.3, 0.4, 0.1], 3).unwrap();
        let (q, qbar) = build_complex_pair(&g).unwrap();
        assert!(q.bracket(&q).unwrap().residual_norm() < 1e-12);
        assert!(qbar.bracket(&qbar).unwrap().residual_norm() < 1e-12);
        let h = qbar.bracket(&q).unwrap().scale(Complex64::new(0.0, -0.5));
        check_h_symbol(&h, &g);
    }

    #[test]
    fn flat_complex_pair() {
        let g = build_geometry(&MetricField::flat(2), &[0.5, 0.5], 2).unwrap();
        let (q, qbar) = build_complex_pair(&g).unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(qbar.len(), 4);
        assert_eq!(q.momentum_degree(), 1);
    }
}

//! Almost-complex structures and their diagnostics.
//!
//! Structures are stored with mixed indices: row `M`, column `N` holds
//! `I_M^N`. Lowered forms are `I_MN = I_M^P g_PN`. Quaternion products are
//! ordinary matrix products of the stored arrays.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{covariant_derivative_2form, ChartGeometry, JetMatrix, JetTensor3};
use crate::jets::{FieldExpr, Jet};

/// Real `D × D` matrix, row-major nested vectors.
pub type Matrix = Vec<Vec<f64>>;

/// Real rank-3 array indexed `[a][b][c]`.
pub type Tensor3 = Vec<Vec<Vec<f64>>>;

/// The canonical self-dual quaternion units `𝓘, 𝓙, 𝓚`.
pub const SELF_DUAL: [[[f64; 4]; 4]; 3] = [
    [
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ],
    [
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
    ],
    [
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ],
];

/// The anti-self-dual units `𝓘̃, 𝓙̃, 𝓚̃`.
pub const ANTI_SELF_DUAL: [[[f64; 4]; 4]; 3] = [
    [
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
    ],
    [
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
    ],
    [
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, -1.0, 0.0, 0.0],
    ],
];

/// Mixed-index structure field `I_M^N` as a grid of expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureField {
    dim: usize,
    entries: Vec<FieldExpr>,
}

impl StructureField {
    pub fn from_grid(grid: Vec<Vec<FieldExpr>>) -> Result<StructureField> {
        let dim = grid.len();
        if dim == 0 || grid.iter().any(|row| row.len() != dim) {
            return Err(Error::Invalid(
                "structure grid must be square and non-empty".into(),
            ));
        }
        Ok(StructureField {
            dim,
            entries: grid.into_iter().flatten().collect(),
        })
    }

    pub fn constant(matrix: &[Vec<f64>]) -> Result<StructureField> {
        StructureField::from_grid(
            matrix
                .iter()
                .map(|row| row.iter().map(|&v| FieldExpr::real(v)).collect())
                .collect(),
        )
    }

    /// `diag(block, ..., block)` with `n` copies of a 4×4 block.
    pub fn block_diagonal(block: &[[f64; 4]; 4], n: usize) -> StructureField {
        let dim = 4 * n;
        let mut m = vec![vec![0.0; dim]; dim];
        for b in 0..n {
            for r in 0..4 {
                for c in 0..4 {
                    m[4 * b + r][4 * b + c] = block[r][c];
                }
            }
        }
        StructureField::constant(&m).expect("square grid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Zero-based entry `I_r^c`.
    pub fn entry(&self, r: usize, c: usize) -> &FieldExpr {
        &self.entries[r * self.dim + c]
    }

    pub fn lift(&self, base: &Arc<[f64]>, order: usize) -> Result<JetMatrix> {
        JetMatrix::try_from_fn(self.dim, |r, c| self.entry(r, c).lift(base, order))
    }
}

/// Three structures meant to obey the quaternion algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTriple {
    pub structures: [StructureField; 3],
    /// Built by [`canonical_triple`].
    pub canonical: bool,
}

impl StructureTriple {
    pub fn custom(structures: [StructureField; 3]) -> StructureTriple {
        StructureTriple {
            structures,
            canonical: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.structures[0].dim()
    }
}

/// Block-diagonal canonical triple on `R^{4n}`.
pub fn canonical_triple(n: usize) -> StructureTriple {
    StructureTriple {
        structures: [0, 1, 2].map(|a| StructureField::block_diagonal(&SELF_DUAL[a], n)),
        canonical: true,
    }
}

/// The structures attached to a manifold: one, or a quaternionic triple.
#[derive(Debug, Clone, PartialEq)]
pub enum StructureSet {
    Single(StructureField),
    Triple(StructureTriple),
}

impl StructureSet {
    pub fn fields(&self) -> Vec<&StructureField> {
        match self {
            StructureSet::Single(s) => vec![s],
            StructureSet::Triple(t) => t.structures.iter().collect(),
        }
    }

    pub fn is_triple(&self) -> bool {
        matches!(self, StructureSet::Triple(_))
    }

    pub fn is_canonical(&self) -> bool {
        matches!(self, StructureSet::Triple(t) if t.canonical)
    }

    pub fn dim(&self) -> usize {
        self.fields()[0].dim()
    }

    pub fn lift(&self, base: &Arc<[f64]>, order: usize) -> Result<Vec<JetMatrix>> {
        self.fields()
            .into_iter()
            .map(|s| s.lift(base, order))
            .collect()
    }
}

/// Pointwise algebraic checks on a set of lifted structures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgebraResiduals {
    /// Largest `|I_MN + I_NM|`.
    pub antisymmetry: f64,
    /// Largest entry of `I·I + 1`.
    pub square: f64,
    /// Largest entry of `I^a I^b + δ^ab − ε^abc I^c`, when three are given.
    pub quaternion: Option<f64>,
}

impl AlgebraResiduals {
    pub fn max(&self) -> f64 {
        self.antisymmetry
            .max(self.square)
            .max(self.quaternion.unwrap_or(0.0))
    }
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Matrix {
    let d = a.len();
    (0..d)
        .map(|r| {
            (0..d)
                .map(|c| (0..d).map(|k| a[r][k] * b[k][c]).sum())
                .collect()
        })
        .collect()
}

fn levi_civita3(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Antisymmetry after lowering, squares, and (for three) the quaternion table.
pub fn algebraic_residuals(geom: &ChartGeometry, structures: &[JetMatrix]) -> AlgebraResiduals {
    let d = geom.dim();
    let mixed: Vec<Matrix> = structures.iter().map(JetMatrix::values).collect();
    let g = geom.metric().values();
    let mut antisymmetry: f64 = 0.0;
    let mut square: f64 = 0.0;
    for m in &mixed {
        let lowered = mat_mul(m, &g);
        let sq = mat_mul(m, m);
        for r in 0..d {
            for c in 0..d {
                antisymmetry = antisymmetry.max((lowered[r][c] + lowered[c][r]).abs());
                let id = if r == c { 1.0 } else { 0.0 };
                square = square.max((sq[r][c] + id).abs());
            }
        }
    }
    let quaternion = (mixed.len() == 3).then(|| {
        let mut worst: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let prod = mat_mul(&mixed[a], &mixed[b]);
                for r in 0..d {
                    for c in 0..d {
                        let mut want = if a == b && r == c { -1.0 } else { 0.0 };
                        for (k, m) in mixed.iter().enumerate() {
                            want += levi_civita3(a, b, k) * m[r][c];
                        }
                        worst = worst.max((prod[r][c] - want).abs());
                    }
                }
            }
        }
        worst
    });
    AlgebraResiduals {
        antisymmetry,
        square,
        quaternion,
    }
}

fn value3(t: &JetTensor3) -> Tensor3 {
    t.values()
}

/// Integrability residual in lowered form,
/// `N_MNP = ∇_[M I_N]P − I_M^Q I_N^S ∇_[Q I_S]P` with Levi-Civita `∇`
/// (antisymmetrisation without the ½), max-abs over all entries.
pub fn nijenhuis_residual(geom: &ChartGeometry, structure: &JetMatrix) -> Result<f64> {
    let d = geom.dim();
    let lowered = geom.lower_second(structure);
    let nabla = value3(&covariant_derivative_2form(geom, &lowered, None)?);
    let i = structure.values();
    let anti = |m: usize, n: usize, p: usize| nabla[m][n][p] - nabla[n][m][p];
    let mut worst: f64 = 0.0;
    for m in 0..d {
        for n in 0..d {
            for p in 0..d {
                let mut rhs = 0.0;
                for q in 0..d {
                    for s in 0..d {
                        rhs += i[m][q] * i[n][s] * anti(q, s, p);
                    }
                }
                worst = worst.max((anti(m, n, p) - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Derivative used in the mixed-index Nijenhuis tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Partial,
    LeviCivita,
}

/// Mixed-index Nijenhuis tensor
/// `N_MN^P = I_M^Q D_Q I_N^P − I_N^Q D_Q I_M^P − I_Q^P (D_M I_N^Q − D_N I_M^Q)`,
/// max-abs. With a torsion-free connection the Christoffel terms cancel, so
/// both choices of `D` agree.
pub fn nijenhuis_mixed(
    geom: &ChartGeometry,
    structure: &JetMatrix,
    derivative: Derivative,
) -> Result<f64> {
    let d = geom.dim();
    let i = structure.values();
    // di[q][n][p] = D_Q I_N^P
    let mut di = vec![vec![vec![0.0; d]; d]; d];
    for q in 0..d {
        for n in 0..d {
            for p in 0..d {
                di[q][n][p] = structure.get(n, p).partial(q)?.value().re;
            }
        }
    }
    if derivative == Derivative::LeviCivita {
        let gamma = geom.christoffel().values();
        let mut out = di.clone();
        for q in 0..d {
            for n in 0..d {
                for p in 0..d {
                    for s in 0..d {
                        out[q][n][p] += gamma[p][q][s] * i[n][s] - gamma[s][q][n] * i[s][p];
                    }
                }
            }
        }
        di = out;
    }
    let mut worst: f64 = 0.0;
    for m in 0..d {
        for n in 0..d {
            for p in 0..d {
                let mut v = 0.0;
                for q in 0..d {
                    v += i[m][q] * di[q][n][p] - i[n][q] * di[q][m][p];
                    v -= i[q][p] * (di[m][n][q] - di[n][m][q]);
                }
                worst = worst.max(v.abs());
            }
        }
    }
    Ok(worst)
}

/// Bismut torsion
/// `C_LNK = I_L^P I_N^R I_K^T (∇_P I_RT + ∇_R I_TP + ∇_T I_PR)`, fully lowered.
pub fn bismut_torsion(geom: &ChartGeometry, structure: &JetMatrix) -> Result<JetTensor3> {
    let d = geom.dim();
    let lowered = geom.lower_second(structure);
    let nabla = covariant_derivative_2form(geom, &lowered, None)?;
    let order = nabla.order();
    let base = geom.base_point();
    let zero = Jet::zero(base, order);
    let cyc = JetTensor3::from_fn(d, |p, r, t| {
        nabla.get(p, r, t) + nabla.get(r, t, p) + nabla.get(t, p, r)
    });
    let i = |a: usize, b: usize| structure.get(a, b);
    let step1 = JetTensor3::from_fn(d, |l, r, t| {
        (0..d).fold(zero.clone(), |acc, p| acc + i(l, p) * cyc.get(p, r, t))
    });
    let step2 = JetTensor3::from_fn(d, |l, n, t| {
        (0..d).fold(zero.clone(), |acc, r| acc + i(n, r) * step1.get(l, r, t))
    });
    Ok(JetTensor3::from_fn(d, |l, n, k| {
        (0..d).fold(zero.clone(), |acc, t| acc + i(k, t) * step2.get(l, n, t))
    }))
}

/// `∇_P I_MN − ½ g^ST (C_TNP I_SM − C_TMP I_SN)`, max-abs of constant terms.
pub fn hkt_residual(
    geom: &ChartGeometry,
    structure: &JetMatrix,
    torsion: &JetTensor3,
) -> Result<f64> {
    let d = geom.dim();
    let lowered = geom.lower_second(structure);
    let nabla = value3(&covariant_derivative_2form(geom, &lowered, None)?);
    let c = value3(torsion);
    let l = lowered.values();
    let ginv = geom.inverse_metric().values();
    let mut worst: f64 = 0.0;
    for p in 0..d {
        for m in 0..d {
            for n in 0..d {
                let mut rhs = 0.0;
                for s in 0..d {
                    for t in 0..d {
                        rhs += ginv[s][t] * (c[t][n][p] * l[s][m] - c[t][m][p] * l[s][n]);
                    }
                }
                worst = worst.max((nabla[p][m][n] - 0.5 * rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Outcome of [`hkt_check`].
#[derive(Debug, Clone)]
pub struct HktCheck {
    /// Residual of the torsionful covariant-constancy relation per structure.
    pub residuals: [f64; 3],
    /// Largest entrywise difference between the torsions built from each
    /// structure separately.
    pub torsion_spread: f64,
    /// Largest symmetric part of the torsion.
    pub antisymmetry: f64,
    /// The torsion built from the first structure.
    pub torsion: JetTensor3,
}

impl HktCheck {
    pub fn max(&self) -> f64 {
        self.residuals
            .iter()
            .copied()
            .fold(self.torsion_spread, f64::max)
    }
}

/// HKT test: the torsion of the first structure must make all three
/// covariantly constant. Fails with `PreconditionFailed` when the triple is
/// not quaternionic at the point.
pub fn hkt_check(geom: &ChartGeometry, triple: &[JetMatrix]) -> Result<HktCheck> {
    if triple.len() != 3 {
        return Err(Error::PreconditionFailed(format!(
            "HKT check needs three structures, got {}",
            triple.len()
        )));
    }
    let algebra = algebraic_residuals(geom, triple);
    if algebra.max() > 1e-10 {
        return Err(Error::PreconditionFailed(format!(
            "structures are not quaternionic at {:?} (residual {:e})",
            geom.base_point(),
            algebra.max()
        )));
    }
    let torsions = triple
        .iter()
        .map(|s| bismut_torsion(geom, s))
        .collect::<Result<Vec<_>>>()?;
    let c0 = value3(&torsions[0]);
    let mut spread: f64 = 0.0;
    for other in &torsions[1..] {
        let c = value3(other);
        for (x, y) in c0
            .iter()
            .flatten()
            .flatten()
            .zip(c.iter().flatten().flatten())
        {
            spread = spread.max((x - y).abs());
        }
    }
    let mut residuals = [0.0; 3];
    for (r, s) in residuals.iter_mut().zip(triple) {
        *r = hkt_residual(geom, s, &torsions[0])?;
    }
    let antisymmetry = torsions[0].antisymmetry_residual();
    let torsion = torsions.into_iter().next().expect("three torsions");
    Ok(HktCheck {
        residuals,
        torsion_spread: spread,
        antisymmetry,
        torsion,
    })
}

/// Orientation used for the Hodge dual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// `ε_1234 = +1`.
    #[default]
    Standard,
    Reversed,
}

fn levi_civita4(idx: [usize; 4]) -> f64 {
    let mut v = idx;
    let mut sign = 1.0;
    for i in 0..4 {
        for j in i + 1..4 {
            if v[i] == v[j] {
                return 0.0;
            }
            if v[i] > v[j] {
                v.swap(i, j);
                sign = -sign;
            }
        }
    }
    sign
}

/// `(*F)_MN = ½ ε_MNPQ F_PQ` in four dimensions.
pub fn hodge_dual(f: &[[f64; 4]; 4], orientation: Orientation) -> [[f64; 4]; 4] {
    let s = match orientation {
        Orientation::Standard => 0.5,
        Orientation::Reversed => -0.5,
    };
    let mut out = [[0.0; 4]; 4];
    for m in 0..4 {
        for n in 0..4 {
            for p in 0..4 {
                for q in 0..4 {
                    out[m][n] += s * levi_civita4([m, n, p, q]) * f[p][q];
                }
            }
        }
    }
    out
}

fn antisymmetry_of(f: &[[f64; 4]; 4]) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            worst = worst.max((f[r][c] + f[c][r]).abs());
        }
    }
    worst
}

/// Coefficients `(a₁, a₂, a₃, b₁, b₂, b₃)` of `F` in the basis
/// `𝓘, 𝓙, 𝓚, 𝓘̃, 𝓙̃, 𝓚̃`, by trace projection.
pub fn asd_decompose(f: &[[f64; 4]; 4]) -> Result<[f64; 6]> {
    let bad = antisymmetry_of(f);
    if bad > 1e-12 {
        return Err(Error::NotAntisymmetric(bad));
    }
    let project = |basis: &[[f64; 4]; 4]| {
        let mut tr = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                tr += f[r][c] * basis[c][r];
            }
        }
        -tr / 4.0
    };
    let mut out = [0.0; 6];
    for k in 0..3 {
        out[k] = project(&SELF_DUAL[k]);
        out[k + 3] = project(&ANTI_SELF_DUAL[k]);
    }
    Ok(out)
}

/// Inverse of [`asd_decompose`].
pub fn asd_reconstruct(coeffs: &[f64; 6]) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for k in 0..3 {
        for r in 0..4 {
            for c in 0..4 {
                out[r][c] +=
                    coeffs[k] * SELF_DUAL[k][r][c] + coeffs[k + 3] * ANTI_SELF_DUAL[k][r][c];
            }
        }
    }
    out
}

/// Outcome of [`commutant_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutantCheck {
    /// Largest entry of `F·I − I·F` per structure.
    pub residuals: Vec<f64>,
    pub commutes: bool,
    /// Norm of the self-dual coefficients per 4×4 diagonal block, when the
    /// structures are canonical.
    pub self_dual_norms: Option<Vec<f64>>,
}

/// Tests whether the flat-frame field strength `F` commutes with each
/// structure (given in the same frame).
pub fn commutant_check(
    f: &[Vec<f64>],
    structures: &[Matrix],
    canonical: bool,
    tol: f64,
) -> Result<CommutantCheck> {
    let d = f.len();
    let mut bad: f64 = 0.0;
    for r in 0..d {
        for c in 0..d {
            bad = bad.max((f[r][c] + f[c][r]).abs());
        }
    }
    if bad > tol {
        return Err(Error::NotAntisymmetric(bad));
    }
    let residuals: Vec<f64> = structures
        .iter()
        .map(|s| {
            let fi = mat_mul(f, s);
            let i_f = mat_mul(s, f);
            fi.iter()
                .flatten()
                .zip(i_f.iter().flatten())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let commutes = residuals.iter().all(|&r| r <= tol);
    let self_dual_norms = if canonical && d % 4 == 0 {
        let mut norms = Vec::new();
        for b in 0..d / 4 {
            let mut block = [[0.0; 4]; 4];
            for r in 0..4 {
                for c in 0..4 {
                    block[r][c] = f[4 * b + r][4 * b + c];
                }
            }
            let k = asd_decompose(&block)?;
            norms.push((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt());
        }
        Some(norms)
    } else {
        None
    };
    Ok(CommutantCheck {
        residuals,
        commutes,
        self_dual_norms,
    })
}

/// Left side of the identity
/// `(I_M^P J_N^R − I_N^P J_M^R) C_PRQ + (I_N^P J_Q^R − I_Q^P J_N^R) C_PRM
///  + (I_Q^P J_M^R − I_M^P J_Q^R) C_PRN`, max-abs over `(M, N, Q)`.
pub fn x_identity_residual(i: &[Vec<f64>], j: &[Vec<f64>], c: &[Vec<Vec<f64>>]) -> f64 {
    let d = i.len();
    // t[m][n][q] = I_M^P J_N^R C_PRQ
    let mut t = vec![vec![vec![0.0; d]; d]; d];
    for m in 0..d {
        for n in 0..d {
            for q in 0..d {
                let mut acc = 0.0;
                for p in 0..d {
                    if i[m][p] == 0.0 {
                        continue;
                    }
                    for r in 0..d {
                        acc += i[m][p] * j[n][r] * c[p][r][q];
                    }
                }
                t[m][n][q] = acc;
            }
        }
    }
    let mut worst: f64 = 0.0;
    for m in 0..d {
        for n in 0..d {
            for q in 0..d {
                let v = (t[m][n][q] - t[n][m][q])
                    + (t[n][q][m] - t[q][n][m])
                    + (t[q][m][n] - t[m][q][n]);
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

/// Totally antisymmetrised copy of an arbitrary rank-3 array.
pub fn antisymmetrize(c: &[Vec<Vec<f64>>]) -> Tensor3 {
    let d = c.len();
    let mut out = vec![vec![vec![0.0; d]; d]; d];
    for a in 0..d {
        for b in 0..d {
            for e in 0..d {
                out[a][b][e] =
                    (c[a][b][e] + c[b][e][a] + c[e][a][b] - c[b][a][e] - c[a][e][b] - c[e][b][a])
                        / 6.0;
            }
        }
    }
    out
}

/// Flat-frame components `T_AB = e^M_A T_MN e^N_B` of a lowered tensor.
pub fn to_flat_frame(geom: &ChartGeometry, t: &[Vec<f64>]) -> Matrix {
    let d = geom.dim();
    let e = geom.inverse_vielbein().values();
    (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    let mut acc = 0.0;
                    for m in 0..d {
                        for n in 0..d {
                            acc += e[m][a] * t[m][n] * e[n][b];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, metric_from_kahler_potential, MetricField};

    fn conf_s4() -> MetricField {
        MetricField::conformally_flat(
            4,
            FieldExpr::parse("1 + (x1^2 + x2^2 + x3^2 + x4^2)/2").unwrap(),
        )
    }

    fn lift(set: &StructureTriple, geom: &ChartGeometry) -> Vec<JetMatrix> {
        set.structures
            .iter()
            .map(|s| s.lift(geom.base_point(), geom.order()).unwrap())
            .collect()
    }

    fn as_arr(m: &[[f64; 4]; 4]) -> Matrix {
        m.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn canonical_units_form_quaternions() {
        let [i, j, k] = SELF_DUAL.map(|m| as_arr(&m));
        assert_eq!(mat_mul(&i, &j), k);
        let sq = mat_mul(&i, &i);
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(sq[r][c], if r == c { -1.0 } else { 0.0 });
            }
        }
        let g = build_geometry(&MetricField::flat(8), &[0.0; 8], 2).unwrap();
        let t = lift(&canonical_triple(2), &g);
        assert_eq!(algebraic_residuals(&g, &t).max(), 0.0);
    }

    #[test]
    fn duality_of_the_bases() {
        for k in 0..3 {
            assert_eq!(
                hodge_dual(&SELF_DUAL[k], Orientation::Standard),
                SELF_DUAL[k]
            );
            let asd = hodge_dual(&ANTI_SELF_DUAL[k], Orientation::Standard);
            for r in 0..4 {
                for c in 0..4 {
                    assert_eq!(asd[r][c], -ANTI_SELF_DUAL[k][r][c]);
                }
            }
            assert_eq!(
                hodge_dual(&ANTI_SELF_DUAL[k], Orientation::Reversed),
                ANTI_SELF_DUAL[k]
            );
        }
    }

    #[test]
    fn decomposition_of_basis_elements() {
        assert_eq!(
            asd_decompose(&SELF_DUAL[0]).unwrap(),
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            asd_decompose(&ANTI_SELF_DUAL[2]).unwrap(),
            [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        );
        let mut sym = [[0.0; 4]; 4];
        sym[0][1] = 1.0;
        sym[1][0] = 1.0;
        assert!(matches!(
            asd_decompose(&sym),
            Err(Error::NotAntisymmetric(_))
        ));
    }

    #[test]
    fn commutant_of_basis_elements() {
        let units: Vec<Matrix> = SELF_DUAL.iter().map(as_arr).collect();
        let asd = commutant_check(&as_arr(&ANTI_SELF_DUAL[0]), &units, true, 1e-12).unwrap();
        assert!(asd.commutes);
        assert_eq!(asd.self_dual_norms, Some(vec![0.0]));
        let sd = commutant_check(&as_arr(&SELF_DUAL[1]), &units, true, 1e-12).unwrap();
        assert!(!sd.commutes);
    }

    #[test]
    fn flat_structures_are_trivially_integrable() {
        let g = build_geometry(&MetricField::flat(4), &[0.3, 0.1, -0.2, 0.4], 3).unwrap();
        for s in lift(&canonical_triple(1), &g) {
            assert_eq!(nijenhuis_residual(&g, &s).unwrap(), 0.0);
            assert_eq!(bismut_torsion(&g, &s).unwrap().max_abs_value(), 0.0);
            let lowered = g.lower_second(&s);
            assert_eq!(
                covariant_derivative_2form(&g, &lowered, None)
                    .unwrap()
                    .max_abs_value(),
                0.0
            );
        }
    }

    #[test]
    fn conformally_flat_metric_is_hkt() {
        let g = build_geometry(&conf_s4(), &[0.7, -0.3, 0.5, 0.2], 3).unwrap();
        let triple = lift(&canonical_triple(1), &g);
        for s in &triple {
            let n = nijenhuis_residual(&g, s).unwrap();
            assert!(n < 1e-12, "nijenhuis {n}");
            let lowered = g.lower_second(s);
            let nabla = covariant_derivative_2form(&g, &lowered, None).unwrap();
            assert!(nabla.max_abs_value() > 1e-2, "not Kähler");
        }
        let check = hkt_check(&g, &triple).unwrap();
        assert!(
            check.max() < 1e-12,
            "{:?} spread {}",
            check.residuals,
            check.torsion_spread
        );
        assert!(check.antisymmetry < 1e-12);
        assert!(check.torsion.max_abs_value() > 1e-2);
        // the Bismut connection makes the structure parallel
        for s in &triple {
            let lowered = g.lower_second(s);
            let hat = covariant_derivative_2form(&g, &lowered, Some(&check.torsion)).unwrap();
            assert!(hat.max_abs_value() < 1e-12);
        }
    }

    #[test]
    fn hatted_connection_preserves_metric() {
        let g = build_geometry(&conf_s4(), &[0.2, 0.9, -0.4, 0.1], 3).unwrap();
        let s = &lift(&canonical_triple(1), &g)[0];
        let c = bismut_torsion(&g, s).unwrap();
        let nabla = covariant_derivative_2form(&g, g.metric(), Some(&c)).unwrap();
        assert!(nabla.max_abs_value() < 1e-12);
    }

    /// Central differences of `I_MN = I_M^P g_PN` feeding the torsion formula.
    #[test]
    fn torsion_matches_finite_difference_oracle() {
        let metric = conf_s4();
        let p = [1.0, 0.0, 0.0, 0.0];
        let g = build_geometry(&metric, &p, 3).unwrap();
        let s = &lift(&canonical_triple(1), &g)[0];
        let got = bismut_torsion(&g, s).unwrap().values();

        let i = as_arr(&SELF_DUAL[0]);
        let h = 1e-5;
        let lowered_at = |q: &[f64]| -> Matrix {
            let gm: Matrix = (0..4)
                .map(|r| {
                    (0..4)
                        .map(|c| metric.entry(r, c).eval(q).unwrap().re)
                        .collect()
                })
                .collect();
            mat_mul(&i, &gm)
        };
        let low0 = lowered_at(&p);
        let gamma = g.christoffel().values();
        let mut nabla = vec![vec![vec![0.0; 4]; 4]; 4];
        for a in 0..4 {
            let (mut qp, mut qm) = (p.to_vec(), p.to_vec());
            qp[a] += h;
            qm[a] -= h;
            let (lp, lm) = (lowered_at(&qp), lowered_at(&qm));
            for m in 0..4 {
                for n in 0..4 {
                    let mut v = (lp[m][n] - lm[m][n]) / (2.0 * h);
                    for s in 0..4 {
                        v -= gamma[s][a][m] * low0[s][n] + gamma[s][a][n] * low0[m][s];
                    }
                    nabla[a][m][n] = v;
                }
            }
        }
        let mut scale: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for l in 0..4 {
            for n in 0..4 {
                for k in 0..4 {
                    let mut want = 0.0;
                    for pp in 0..4 {
                        for r in 0..4 {
                            for t in 0..4 {
                                want += i[l][pp]
                                    * i[n][r]
                                    * i[k][t]
                                    * (nabla[pp][r][t] + nabla[r][t][pp] + nabla[t][pp][r]);
                            }
                        }
                    }
                    scale = scale.max(want.abs());
                    worst = worst.max((want - got[l][n][k]).abs());
                }
            }
        }
        assert!(scale > 0.1);
        assert!(worst / scale < 1e-6, "relative deviation {}", worst / scale);
    }

    #[test]
    fn nijenhuis_mixed_forms_agree() {
        // rotate 𝓘 into 𝓙 with a position-dependent angle
        let t = FieldExpr::x(0);
        let one_plus = FieldExpr::add(FieldExpr::real(1.0), FieldExpr::powi(t.clone(), 2));
        let cos = FieldExpr::div(
            FieldExpr::sub(FieldExpr::real(1.0), FieldExpr::powi(t.clone(), 2)),
            one_plus.clone(),
        );
        let sin = FieldExpr::div(FieldExpr::mul(FieldExpr::real(2.0), t), one_plus);
        let grid = (0..4)
            .map(|r| {
                (0..4)
                    .map(|c| {
                        FieldExpr::add(
                            FieldExpr::mul(cos.clone(), FieldExpr::real(SELF_DUAL[0][r][c])),
                            FieldExpr::mul(sin.clone(), FieldExpr::real(SELF_DUAL[1][r][c])),
                        )
                    })
                    .collect()
            })
            .collect();
        let rotated = StructureField::from_grid(grid).unwrap();
        for metric in [MetricField::flat(4), conf_s4()] {
            let g = build_geometry(&metric, &[0.4, 0.3, -0.6, 0.2], 3).unwrap();
            let s = rotated.lift(g.base_point(), 3).unwrap();
            let partial = nijenhuis_mixed(&g, &s, Derivative::Partial).unwrap();
            let covariant = nijenhuis_mixed(&g, &s, Derivative::LeviCivita).unwrap();
            assert!((partial - covariant).abs() < 1e-12);
            assert!(partial > 0.1);
            assert!(nijenhuis_residual(&g, &s).unwrap() > 0.1);
            let canon = lift(&canonical_triple(1), &g);
            assert!(nijenhuis_mixed(&g, &canon[0], Derivative::LeviCivita).unwrap() < 1e-12);
        }
    }

    #[test]
    fn fubini_study_plane_is_kahler() {
        let k = FieldExpr::parse("log(1 + z1*zb1)").unwrap();
        let metric = metric_from_kahler_potential(&k, 1).unwrap();
        let g = build_geometry(&metric, &[0.4, -0.7], 3).unwrap();
        let s = StructureField::constant(&[vec![0.0, 1.0], vec![-1.0, 0.0]])
            .unwrap()
            .lift(g.base_point(), 3)
            .unwrap();
        assert!(nijenhuis_residual(&g, &s).unwrap() < 1e-12);
        assert!(bismut_torsion(&g, &s).unwrap().max_abs_value() < 1e-12);
        let lowered = g.lower_second(&s);
        assert!(
            covariant_derivative_2form(&g, &lowered, None)
                .unwrap()
                .max_abs_value()
                < 1e-12
        );
    }

    fn random_antisymmetric_c(rng: &mut impl rand::Rng) -> Tensor3 {
        let raw: Tensor3 = (0..4)
            .map(|_| {
                (0..4)
                    .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        antisymmetrize(&raw)
    }

    /// Direct sum over every `(M, N, Q, P, R)` with no intermediate arrays.
    fn brute_force_x(i: &Matrix, j: &Matrix, c: &Tensor3) -> f64 {
        let mut worst: f64 = 0.0;
        for m in 0..4 {
            for n in 0..4 {
                for q in 0..4 {
                    let mut v = 0.0;
                    for p in 0..4 {
                        for r in 0..4 {
                            v += (i[m][p] * j[n][r] - i[n][p] * j[m][r]) * c[p][r][q]
                                + (i[n][p] * j[q][r] - i[q][p] * j[n][r]) * c[p][r][m]
                                + (i[q][p] * j[m][r] - i[m][p] * j[q][r]) * c[p][r][n];
                        }
                    }
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }

    #[test]
    fn x_identity_for_distinct_structures() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let [i, j, k] = SELF_DUAL.map(|m| as_arr(&m));
        let zero = vec![vec![vec![0.0; 4]; 4]; 4];
        assert_eq!(x_identity_residual(&i, &j, &zero), 0.0);
        let mut control: f64 = 0.0;
        for _ in 0..100 {
            let c = random_antisymmetric_c(&mut rng);
            for (a, b) in [(&i, &j), (&j, &k), (&k, &i)] {
                assert!(x_identity_residual(a, b, &c) < 1e-12);
                assert!(brute_force_x(a, b, &c) < 1e-12);
            }
            let same = x_identity_residual(&i, &i, &c);
            assert!((same - brute_force_x(&i, &i, &c)).abs() < 1e-12);
            control = control.max(same);
        }
        assert!(control > 0.1, "I = J control {control}");
    }

    #[test]
    fn non_quaternionic_triple_is_a_precondition_failure() {
        let g = build_geometry(&MetricField::flat(4), &[0.0; 4], 3).unwrap();
        let i = StructureField::block_diagonal(&SELF_DUAL[0], 1);
        let triple = [i.clone(), i.clone(), i].map(|s| s.lift(g.base_point(), 3).unwrap());
        assert!(matches!(
            hkt_check(&g, &triple),
            Err(Error::PreconditionFailed(_))
        ));
    }
}

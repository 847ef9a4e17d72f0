//! Chart-level Riemannian geometry at a base point.
//!
//! Everything is a jet: the metric is lifted to order `K`, the vielbein comes
//! from a lower-triangular (Cholesky) factorisation done in jet arithmetic,
//! and the connections, which need one derivative of the metric, are of
//! order `K - 1`.
//!
//! Index conventions:
//!
//! * `vielbein(A, M)` is `e^A_M`, with `Σ_A e^A_M e^A_N = g_MN`;
//! * `inverse_vielbein(M, A)` is `e^M_A`;
//! * `christoffel(M, N, K)` is `Γ^M_NK`;
//! * `spin_connection(M, A, B)` is `Ω_{M,AB} = e_{AN}(∂_M e^N_B + Γ^N_MK e^K_B)`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jets::{FieldExpr, Jet, Var};

/// Symmetric `D × D` grid of field expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    dim: usize,
    entries: Vec<FieldExpr>,
}

impl MetricField {
    /// Builds the metric from the upper triangle; `upper(r, c)` is called for
    /// `r <= c` only (zero-based).
    pub fn from_upper(dim: usize, mut upper: impl FnMut(usize, usize) -> FieldExpr) -> MetricField {
        let mut entries = vec![FieldExpr::real(0.0); dim * dim];
        for r in 0..dim {
            for c in r..dim {
                let e = upper(r, c);
                entries[r * dim + c] = e.clone();
                entries[c * dim + r] = e;
            }
        }
        MetricField { dim, entries }
    }

    /// Full grid; the two triangles must agree at expression level.
    pub fn from_grid(grid: Vec<Vec<FieldExpr>>) -> Result<MetricField> {
        let dim = grid.len();
        if grid.iter().any(|row| row.len() != dim) {
            return Err(Error::Invalid("metric grid must be square".into()));
        }
        for r in 0..dim {
            for c in r + 1..dim {
                if grid[r][c] != grid[c][r] {
                    return Err(Error::Invalid(format!(
                        "metric entries ({}, {}) and ({}, {}) differ",
                        r + 1,
                        c + 1,
                        c + 1,
                        r + 1
                    )));
                }
            }
        }
        Ok(MetricField {
            dim,
            entries: grid.into_iter().flatten().collect(),
        })
    }

    pub fn flat(dim: usize) -> MetricField {
        MetricField::from_upper(dim, |r, c| FieldExpr::real(if r == c { 1.0 } else { 0.0 }))
    }

    /// `g = δ / f²`.
    pub fn conformally_flat(dim: usize, f: FieldExpr) -> MetricField {
        let diag = FieldExpr::div(FieldExpr::real(1.0), FieldExpr::powi(f, 2));
        MetricField::from_upper(dim, |r, c| {
            if r == c {
                diag.clone()
            } else {
                FieldExpr::real(0.0)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Zero-based entry.
    pub fn entry(&self, r: usize, c: usize) -> &FieldExpr {
        &self.entries[r * self.dim + c]
    }
}

/// `D × D` matrix of jets, row-major.
#[derive(Debug, Clone)]
pub struct JetMatrix {
    dim: usize,
    data: Vec<Jet>,
}

impl JetMatrix {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Jet) -> JetMatrix {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        JetMatrix { dim, data }
    }

    pub fn try_from_fn(
        dim: usize,
        mut f: impl FnMut(usize, usize) -> Result<Jet>,
    ) -> Result<JetMatrix> {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c)?);
            }
        }
        Ok(JetMatrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> &Jet {
        &self.data[r * self.dim + c]
    }

    pub fn order(&self) -> usize {
        self.data.iter().map(Jet::order).min().unwrap_or(0)
    }

    /// Constant terms as a real matrix (imaginary parts dropped).
    pub fn values(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self.get(r, c).value().re).collect())
            .collect()
    }

    pub fn max_abs_value(&self) -> f64 {
        self.data
            .iter()
            .map(|j| j.value().norm())
            .fold(0.0, f64::max)
    }
}

/// `D × D × D` array of jets.
#[derive(Debug, Clone)]
pub struct JetTensor3 {
    dim: usize,
    data: Vec<Jet>,
}

impl JetTensor3 {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> Jet) -> JetTensor3 {
        let mut data = Vec::with_capacity(dim * dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    data.push(f(a, b, c));
                }
            }
        }
        JetTensor3 { dim, data }
    }

    pub fn zeros(base: &Arc<[f64]>, order: usize) -> JetTensor3 {
        let dim = base.len();
        JetTensor3::from_fn(dim, |_, _, _| Jet::zero(base, order))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> &Jet {
        &self.data[(a * self.dim + b) * self.dim + c]
    }

    pub fn order(&self) -> usize {
        self.data.iter().map(Jet::order).min().unwrap_or(0)
    }

    pub fn max_abs_value(&self) -> f64 {
        self.data
            .iter()
            .map(|j| j.value().norm())
            .fold(0.0, f64::max)
    }

    /// Constant terms, `[a][b][c]`.
    pub fn values(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.dim)
            .map(|a| {
                (0..self.dim)
                    .map(|b| {
                        (0..self.dim)
                            .map(|c| self.get(a, b, c).value().re)
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Largest violation of total antisymmetry in the constant terms.
    pub fn antisymmetry_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let v = self.get(a, b, c).value();
                    for w in [
                        self.get(b, a, c).value(),
                        self.get(a, c, b).value(),
                        self.get(c, b, a).value(),
                    ] {
                        worst = worst.max((v + w).norm());
                    }
                }
            }
        }
        worst
    }
}

/// Metric, frames and connections at one base point.
#[derive(Debug, Clone)]
pub struct ChartGeometry {
    base: Arc<[f64]>,
    order: usize,
    metric: JetMatrix,
    inverse_metric: JetMatrix,
    vielbein: JetMatrix,
    inverse_vielbein: JetMatrix,
    christoffel: JetTensor3,
    spin_connection: JetTensor3,
    torsion: Option<JetTensor3>,
}

impl ChartGeometry {
    pub fn base_point(&self) -> &Arc<[f64]> {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Order of the metric jets; connections are one lower.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn metric(&self) -> &JetMatrix {
        &self.metric
    }

    pub fn inverse_metric(&self) -> &JetMatrix {
        &self.inverse_metric
    }

    pub fn vielbein(&self) -> &JetMatrix {
        &self.vielbein
    }

    pub fn inverse_vielbein(&self) -> &JetMatrix {
        &self.inverse_vielbein
    }

    pub fn christoffel(&self) -> &JetTensor3 {
        &self.christoffel
    }

    pub fn spin_connection(&self) -> &JetTensor3 {
        &self.spin_connection
    }

    pub fn torsion(&self) -> Option<&JetTensor3> {
        self.torsion.as_ref()
    }

    /// Attaches a totally antisymmetric torsion `C_LNK`.
    pub fn with_torsion(mut self, torsion: JetTensor3) -> ChartGeometry {
        self.torsion = Some(torsion);
        self
    }

    pub fn constant(&self, value: f64) -> Jet {
        Jet::constant(&self.base, self.order, Complex64::new(value, 0.0))
    }

    /// Lowers the second index of a mixed tensor: `T_MN = T_M^P g_PN`.
    pub fn lower_second(&self, mixed: &JetMatrix) -> JetMatrix {
        let d = self.dim();
        JetMatrix::from_fn(d, |m, n| {
            (0..d).fold(Jet::zero(&self.base, self.order), |acc, p| {
                acc + mixed.get(m, p) * self.metric.get(p, n)
            })
        })
    }
}

fn real_projection(j: Jet, what: &str, point: &[f64]) -> Result<Jet> {
    let scale = j.max_abs().max(1.0);
    if j.max_imag() > 1e-10 * scale {
        return Err(Error::Invalid(format!(
            "{what} is not real at {point:?} (imaginary part {:e})",
            j.max_imag()
        )));
    }
    let coeffs = j
        .coeffs()
        .iter()
        .map(|c| Complex64::new(c.re, 0.0))
        .collect();
    Jet::from_coeffs(j.base_point(), j.order(), coeffs)
}

/// Lifts the metric at `p` and derives frames and Levi-Civita data.
pub fn build_geometry(metric: &MetricField, p: &[f64], order: usize) -> Result<ChartGeometry> {
    let d = metric.dim();
    if p.len() != d {
        return Err(Error::Invalid(format!(
            "point has {} coordinates, metric is {d}-dimensional",
            p.len()
        )));
    }
    if order == 0 {
        return Err(Error::OrderExhausted);
    }
    let base: Arc<[f64]> = Arc::from(p.to_vec());
    let g = JetMatrix::try_from_fn(d, |r, c| {
        let j = metric.entry(r, c).lift(&base, order)?;
        real_projection(j, "metric", p)
    })?;

    // g = L Lᵀ, L lower triangular with positive diagonal
    let zero = Jet::zero(&base, order);
    let mut l = vec![zero.clone(); d * d];
    for j in 0..d {
        let mut s = g.get(j, j).clone();
        for k in 0..j {
            s = &s - &(&l[j * d + k] * &l[j * d + k]);
        }
        let pivot = s.value().re;
        if pivot <= 0.0 || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite {
                point: p.to_vec(),
                pivot: j + 1,
                value: pivot,
            });
        }
        let diag = s.sqrt()?;
        let inv = diag.recip()?;
        for i in j + 1..d {
            let mut t = g.get(i, j).clone();
            for k in 0..j {
                t = &t - &(&l[i * d + k] * &l[j * d + k]);
            }
            l[i * d + j] = &t * &inv;
        }
        l[j * d + j] = diag;
    }
    // L⁻¹ by forward substitution
    let mut linv = vec![zero.clone(); d * d];
    for i in 0..d {
        let inv_diag = l[i * d + i].recip()?;
        linv[i * d + i] = inv_diag.clone();
        for j in 0..i {
            let mut acc = zero.clone();
            for k in j..i {
                acc = &acc + &(&l[i * d + k] * &linv[k * d + j]);
            }
            linv[i * d + j] = -(&acc * &inv_diag);
        }
    }

    let vielbein = JetMatrix::from_fn(d, |a, m| l[m * d + a].clone());
    let inverse_vielbein = JetMatrix::from_fn(d, |m, a| linv[a * d + m].clone());
    let inverse_metric = JetMatrix::from_fn(d, |m, n| {
        (0..d).fold(zero.clone(), |acc, a| {
            acc + inverse_vielbein.get(m, a) * inverse_vielbein.get(n, a)
        })
    });

    // dg[a][b][c] = ∂_a g_bc
    let dg = JetTensor3::from_fn(d, |a, b, c| g.get(b, c).partial(a).expect("order >= 1"));
    let lowered = JetTensor3::from_fn(d, |l, n, k| {
        (dg.get(n, l, k) + dg.get(k, l, n) - dg.get(l, n, k)).scale_real(0.5)
    });
    let christoffel = JetTensor3::from_fn(d, |m, n, k| {
        (0..d).fold(Jet::zero(&base, order - 1), |acc, l| {
            acc + inverse_metric.get(m, l) * lowered.get(l, n, k)
        })
    });

    // Ω_{M,AB} = e^A_N (∂_M e^N_B + Γ^N_MK e^K_B)
    let d_inv_vielbein = JetTensor3::from_fn(d, |m, n, b| {
        inverse_vielbein.get(n, b).partial(m).expect("order >= 1")
    });
    let spin_connection = JetTensor3::from_fn(d, |m, a, b| {
        let mut acc = Jet::zero(&base, order - 1);
        for n in 0..d {
            let mut nabla = d_inv_vielbein.get(m, n, b).clone();
            for k in 0..d {
                nabla = nabla + christoffel.get(n, m, k) * inverse_vielbein.get(k, b);
            }
            acc = acc + vielbein.get(a, n) * nabla;
        }
        acc
    });

    Ok(ChartGeometry {
        base,
        order,
        metric: g,
        inverse_metric,
        vielbein,
        inverse_vielbein,
        christoffel,
        spin_connection,
        torsion: None,
    })
}

/// `∇_P T_MN`, indexed `(P, M, N)`.
///
/// Without torsion this is the Levi-Civita derivative; with torsion `C` the
/// connection is `Γ̂^S_PM = Γ^S_PM + ½ g^SL C_LPM`.
pub fn covariant_derivative_2form(
    geom: &ChartGeometry,
    t: &JetMatrix,
    torsion: Option<&JetTensor3>,
) -> Result<JetTensor3> {
    let d = geom.dim();
    if t.order() == 0 {
        return Err(Error::OrderExhausted);
    }
    let base = geom.base_point();
    let order = (t.order() - 1).min(geom.order() - 1);
    let connection = JetTensor3::from_fn(d, |s, p, m| {
        let mut gamma = geom.christoffel().get(s, p, m).truncate(order);
        if let Some(c) = torsion {
            for l in 0..d {
                let term = geom.inverse_metric().get(s, l) * c.get(l, p, m);
                gamma = gamma + term.scale_real(0.5);
            }
        }
        gamma
    });
    let mut partials = Vec::with_capacity(d * d * d);
    for p in 0..d {
        for m in 0..d {
            for n in 0..d {
                partials.push(t.get(m, n).partial(p)?);
            }
        }
    }
    Ok(JetTensor3::from_fn(d, |p, m, n| {
        let mut acc = partials[(p * d + m) * d + n].truncate(order);
        for s in 0..d {
            acc =
                acc - connection.get(s, p, m) * t.get(s, n) - connection.get(s, p, n) * t.get(m, s);
        }
        let _ = base;
        acc
    }))
}

/// Real metric of `ds² = 2 h_{jk̄} dz^j dz̄^k` with `h_{jk̄} = ∂_j ∂_k̄ K`.
///
/// `potential` is written in `z1.., zb1..`; the chart uses
/// `z^j = (x^{2j-1} − i x^{2j}) / √2`.
pub fn metric_from_kahler_potential(
    potential: &FieldExpr,
    complex_dim: usize,
) -> Result<MetricField> {
    if complex_dim == 0 {
        return Err(Error::Invalid("complex dimension must be positive".into()));
    }
    let extent = potential.coordinate_extent();
    if extent > 2 * complex_dim {
        return Err(Error::Invalid(format!(
            "potential uses {extent} real coordinates, chart has {}",
            2 * complex_dim
        )));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // dz^j = Σ_M frame[j][M] dx^M
    let frame = |j: usize, m: usize| -> Complex64 {
        if m == 2 * j {
            Complex64::new(s, 0.0)
        } else if m == 2 * j + 1 {
            Complex64::new(0.0, -s)
        } else {
            Complex64::new(0.0, 0.0)
        }
    };
    let h: Vec<Vec<FieldExpr>> = (0..complex_dim)
        .map(|j| {
            (0..complex_dim)
                .map(|k| potential.diff(Var::Z(j)).diff(Var::Zbar(k)))
                .collect()
        })
        .collect();
    let dim = 2 * complex_dim;
    Ok(MetricField::from_upper(dim, |m, n| {
        let mut acc = FieldExpr::real(0.0);
        for (j, row) in h.iter().enumerate() {
            for (k, hjk) in row.iter().enumerate() {
                let w = frame(j, m) * frame(k, n).conj() + frame(j, n) * frame(k, m).conj();
                if w.norm() == 0.0 {
                    continue;
                }
                acc = FieldExpr::add(acc, FieldExpr::mul(FieldExpr::complex(w), hjk.clone()));
            }
        }
        acc
    }))
}

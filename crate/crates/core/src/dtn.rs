//! Truncated Fourier-series Dirichlet-to-Neumann operator on the
//! artificial circle `Γ_R` and its nonlocal contribution to the PWDG
//! matrix.
//!
//! Modes `m = -N..=N` are stored at index `m + N`. The projection
//! matrices only have nonzero columns for DOFs of elements touching
//! `Γ_R`, so they are kept compressed over those DOFs.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

use crate::basis::PlaneWaveSpace;
use crate::geometry::{edge_quadrature, EdgeKind, EdgeQuadrature, Mesh, QuadratureRule, Vec2};
use crate::linalg::DenseComplexMatrix;
use crate::specfun::{dtn_symbols, SpecfunError, MAX_ORDER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DtnError {
    #[error("truncation order {0} exceeds the supported maximum {MAX_ORDER}")]
    OrderTooLarge(usize),
    #[error("mode count mismatch: expected {expected}, got {got}")]
    ModeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

/// Coefficients `w_m` for `m = -N..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    order: usize,
    values: Vec<Complex64>,
}

impl FourierCoefficients {
    pub fn zeros(order: usize) -> Self {
        FourierCoefficients {
            order,
            values: vec![Complex64::new(0.0, 0.0); 2 * order + 1],
        }
    }

    pub fn from_values(order: usize, values: Vec<Complex64>) -> Result<Self, DtnError> {
        if values.len() != 2 * order + 1 {
            return Err(DtnError::ModeMismatch {
                expected: 2 * order + 1,
                got: values.len(),
            });
        }
        Ok(FourierCoefficients { order, values })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, m: i64) -> Complex64 {
        self.values[(m + self.order as i64) as usize]
    }

    pub fn set(&mut self, m: i64, v: Complex64) {
        self.values[(m + self.order as i64) as usize] = v;
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let n = self.order as i64;
        -n..=n
    }

    /// `Σ w_m e^{imθ}`.
    pub fn evaluate(&self, theta: f64) -> Complex64 {
        self.modes()
            .zip(&self.values)
            .map(|(m, w)| w * Complex64::from_polar(1.0, m as f64 * theta))
            .sum()
    }
}

/// Diagonal `T = diag(ζ_{-N}, …, ζ_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolDiagonal {
    order: usize,
    entries: Vec<Complex64>,
}

impl SymbolDiagonal {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, m: i64) -> Complex64 {
        self.entries[(m + self.order as i64) as usize]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Diagonal of `T*`.
    pub fn adjoint(&self) -> SymbolDiagonal {
        SymbolDiagonal {
            order: self.order,
            entries: self.entries.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn apply(&self, w: &FourierCoefficients) -> Result<FourierCoefficients, DtnError> {
        if w.order != self.order {
            return Err(DtnError::ModeMismatch {
                expected: 2 * self.order + 1,
                got: w.values.len(),
            });
        }
        Ok(FourierCoefficients {
            order: self.order,
            values: self.entries.iter().zip(&w.values).map(|(t, v)| t * v).collect(),
        })
    }
}

pub fn build_symbol_diagonal(k: f64, radius: f64, order: usize) -> Result<SymbolDiagonal, DtnError> {
    if order > MAX_ORDER as usize {
        return Err(DtnError::OrderTooLarge(order));
    }
    let half = dtn_symbols(order as u32, k, radius)?;
    let entries = (-(order as i64)..=order as i64)
        .map(|m| half[m.unsigned_abs() as usize])
        .collect();
    Ok(SymbolDiagonal { order, entries })
}

/// `S_N w` on the Fourier side.
pub fn apply_truncated_dtn(symbols: &SymbolDiagonal, w: &FourierCoefficients) -> Result<FourierCoefficients, DtnError> {
    symbols.apply(w)
}

/// Quadrature of the artificial boundary: one entry per `Γ_R` edge.
pub fn artificial_boundary_quadrature(mesh: &Mesh, rule: &QuadratureRule) -> Vec<(usize, EdgeQuadrature)> {
    mesh.edges_of_kind(EdgeKind::Artificial)
        .map(|(_, e)| (e.elements.0, edge_quadrature(e, rule)))
        .collect()
}

/// `(1/2πR) ∫_{Γ_R} f e^{-imθ} ds` for `|m| <= N`.
pub fn project_trace(
    mesh: &Mesh,
    rule: &QuadratureRule,
    order: usize,
    mut f: impl FnMut(Vec2) -> Complex64,
) -> FourierCoefficients {
    let radius = mesh.spec.outer_radius;
    let mut out = FourierCoefficients::zeros(order);
    for (_, q) in artificial_boundary_quadrature(mesh, rule) {
        for ((p, w), th) in q.points.iter().zip(&q.weights).zip(&q.angles) {
            let fv = f(*p) * (*w / (2.0 * PI * radius));
            for (m, v) in (-(order as i64)..=order as i64).zip(out.values.iter_mut()) {
                *v += fv * Complex64::from_polar(1.0, -(m as f64) * th);
            }
        }
    }
    out
}

/// `M_{ℓj} = ∫_{Γ_R} ξ_j e^{-iℓθ} ds` and
/// `M^D_{ℓj} = ∫_{Γ_R} ∂_n ξ_j e^{-iℓθ} ds`, compressed to the DOFs of
/// elements with an edge on `Γ_R`.
#[derive(Debug, Clone)]
pub struct ProjectionMatrices {
    order: usize,
    n_dofs: usize,
    dofs: Vec<usize>,
    /// `(2N+1) x dofs.len()`, row-major.
    m: Vec<Complex64>,
    md: Vec<Complex64>,
}

impl ProjectionMatrices {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_modes(&self) -> usize {
        2 * self.order + 1
    }

    /// Global indices of the compressed columns.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn m_entry(&self, mode: i64, column: usize) -> Complex64 {
        self.m[self.row(mode) * self.dofs.len() + column]
    }

    pub fn md_entry(&self, mode: i64, column: usize) -> Complex64 {
        self.md[self.row(mode) * self.dofs.len() + column]
    }

    fn row(&self, mode: i64) -> usize {
        (mode + self.order as i64) as usize
    }

    /// `M` at full width `(2N+1) x N_h`.
    pub fn m_full(&self) -> DenseComplexMatrix {
        self.expand(&self.m)
    }

    pub fn md_full(&self) -> DenseComplexMatrix {
        self.expand(&self.md)
    }

    fn expand(&self, data: &[Complex64]) -> DenseComplexMatrix {
        let nb = self.dofs.len();
        let mut out = DenseComplexMatrix::zeros(self.n_modes(), self.n_dofs);
        for l in 0..self.n_modes() {
            for (c, &g) in self.dofs.iter().enumerate() {
                out[(l, g)] = data[l * nb + c];
            }
        }
        out
    }
}

pub fn build_projection_matrices(
    mesh: &Mesh,
    space: &PlaneWaveSpace,
    k: f64,
    order: usize,
    rule: &QuadratureRule,
) -> ProjectionMatrices {
    let p = space.p;
    let boundary = artificial_boundary_quadrature(mesh, rule);
    let mut elements: Vec<usize> = boundary.iter().map(|(e, _)| *e).collect();
    elements.sort_unstable();
    elements.dedup();
    let dofs: Vec<usize> = elements
        .iter()
        .flat_map(|&e| (0..p).map(move |l| space.dof(e, l)))
        .collect();
    let nb = dofs.len();
    let n_modes = 2 * order + 1;
    let mut m = vec![Complex64::new(0.0, 0.0); n_modes * nb];
    let mut md = m.clone();
    let mut vals = vec![Complex64::new(0.0, 0.0); p];
    let mut dns = vals.clone();
    let mut phases = vec![Complex64::new(0.0, 0.0); n_modes];
    for (element, q) in &boundary {
        let col0 = elements.binary_search(element).expect("element collected above") * p;
        for i in 0..q.points.len() {
            space.traces_at(k, q.points[i], q.normals[i], &mut vals, &mut dns);
            let w = q.weights[i];
            for (ph, mode) in phases.iter_mut().zip(-(order as i64)..) {
                *ph = Complex64::from_polar(w, -(mode as f64) * q.angles[i]);
            }
            for (l, ph) in phases.iter().enumerate() {
                let row = l * nb + col0;
                for j in 0..p {
                    m[row + j] += vals[j] * ph;
                    md[row + j] += dns[j] * ph;
                }
            }
        }
    }
    ProjectionMatrices {
        order,
        n_dofs: space.n_dofs(),
        dofs,
        m,
        md,
    }
}

/// Dense nonlocal block over the `Γ_R` DOFs, row = test, column = trial.
#[derive(Debug, Clone)]
pub struct DtnBlock {
    pub dofs: Vec<usize>,
    pub values: DenseComplexMatrix,
}

impl DtnBlock {
    /// Adds the block into a full system matrix.
    pub fn add_to(&self, a: &mut DenseComplexMatrix) {
        for (r, &gi) in self.dofs.iter().enumerate() {
            let row = a.row_mut(gi);
            for (c, &gj) in self.dofs.iter().enumerate() {
                row[gj] += self.values[(r, c)];
            }
        }
    }

    pub fn to_dense(&self, n_dofs: usize) -> DenseComplexMatrix {
        let mut a = DenseComplexMatrix::zeros(n_dofs, n_dofs);
        self.add_to(&mut a);
        a
    }
}

/// Writes the nonlocal terms as `P* Q` with stacked mode blocks
/// `P = [M; M_D; TM]`, so that one product forms
/// `-(1/2πR) M*TM + (δ/2ikπR) (M_D*TM + (TM)*M_D - (TM)*TM)`.
fn stacked_factors(
    proj: &ProjectionMatrices,
    symbols: &SymbolDiagonal,
    delta: f64,
    k: f64,
    radius: f64,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let nb = proj.dofs.len();
    let n_modes = proj.n_modes();
    let c_loc = Complex64::new(-1.0 / (2.0 * PI * radius), 0.0);
    let c_stab = Complex64::new(delta, 0.0) / Complex64::new(0.0, 2.0 * k * PI * radius);
    let mut p = vec![Complex64::new(0.0, 0.0); 3 * n_modes * nb];
    let mut q = p.clone();
    for l in 0..n_modes {
        let t = symbols.entries[l];
        for c in 0..nb {
            let m = proj.m[l * nb + c];
            let md = proj.md[l * nb + c];
            let tm = t * m;
            p[l * nb + c] = m;
            p[(n_modes + l) * nb + c] = md;
            p[(2 * n_modes + l) * nb + c] = tm;
            q[l * nb + c] = c_loc * tm;
            q[(n_modes + l) * nb + c] = c_stab * tm;
            q[(2 * n_modes + l) * nb + c] = c_stab * (md - tm);
        }
    }
    (p, q)
}

pub fn assemble_dtn_block(
    proj: &ProjectionMatrices,
    symbols: &SymbolDiagonal,
    delta: f64,
    k: f64,
    radius: f64,
) -> Result<DtnBlock, DtnError> {
    if symbols.order != proj.order {
        return Err(DtnError::ModeMismatch {
            expected: proj.n_modes(),
            got: symbols.entries.len(),
        });
    }
    let nb = proj.dofs.len();
    let (p, q) = stacked_factors(proj, symbols, delta, k, radius);
    let rows = p.len() / nb.max(1);
    let mut values = DenseComplexMatrix::zeros(nb, nb);
    for i in 0..nb {
        let out = values.row_mut(i);
        for l in 0..rows {
            let pi = p[l * nb + i].conj();
            if pi == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ql = &q[l * nb..(l + 1) * nb];
            for (o, qv) in out.iter_mut().zip(ql) {
                *o += pi * qv;
            }
        }
    }
    Ok(DtnBlock {
        dofs: proj.dofs.clone(),
        values,
    })
}

/// Applies the nonlocal terms with a given field in the trial slot:
/// `c_ℓ = ∫ u e^{-iℓθ} ds` and `d_ℓ = ∫ ∂_n u e^{-iℓθ} ds` stand in for
/// `M U` and `M_D U`. Returns one entry per compressed DOF.
pub fn apply_dtn_block_to_field(
    proj: &ProjectionMatrices,
    symbols: &SymbolDiagonal,
    delta: f64,
    k: f64,
    radius: f64,
    c: &[Complex64],
    d: &[Complex64],
) -> Vec<Complex64> {
    let nb = proj.dofs.len();
    let n_modes = proj.n_modes();
    let c_loc = Complex64::new(-1.0 / (2.0 * PI * radius), 0.0);
    let c_stab = Complex64::new(delta, 0.0) / Complex64::new(0.0, 2.0 * k * PI * radius);
    let mut out = vec![Complex64::new(0.0, 0.0); nb];
    for l in 0..n_modes {
        let t = symbols.entries[l];
        let tc = t * c[l];
        let q_m = c_loc * tc;
        let q_md = c_stab * tc;
        let q_tm = c_stab * (d[l] - tc);
        for (i, o) in out.iter_mut().enumerate() {
            let m = proj.m[l * nb + i];
            let md = proj.md[l * nb + i];
            *o += m.conj() * q_m + md.conj() * q_md + (t * m).conj() * q_tm;
        }
    }
    out
}

/// Symbols and projections for one mesh, space and truncation order.
#[derive(Debug, Clone)]
pub struct DtnOperator {
    pub k: f64,
    pub radius: f64,
    pub symbols: SymbolDiagonal,
    pub projection: ProjectionMatrices,
}

impl DtnOperator {
    pub fn new(
        mesh: &Mesh,
        space: &PlaneWaveSpace,
        k: f64,
        order: usize,
        rule: &QuadratureRule,
    ) -> Result<Self, DtnError> {
        let radius = mesh.spec.outer_radius;
        Ok(DtnOperator {
            k,
            radius,
            symbols: build_symbol_diagonal(k, radius, order)?,
            projection: build_projection_matrices(mesh, space, k, order, rule),
        })
    }

    pub fn order(&self) -> usize {
        self.symbols.order
    }

    pub fn block(&self, delta: f64) -> Result<DtnBlock, DtnError> {
        assemble_dtn_block(&self.projection, &self.symbols, delta, self.k, self.radius)
    }

    /// Fourier coefficients of a discrete function's trace on `Γ_R`.
    pub fn trace_coefficients(&self, v: &[Complex64]) -> FourierCoefficients {
        let nb = self.projection.dofs.len();
        let scale = 1.0 / (2.0 * PI * self.radius);
        let values = (0..self.projection.n_modes())
            .map(|l| {
                self.projection.dofs
                    .iter()
                    .enumerate()
                    .map(|(c, &g)| self.projection.m[l * nb + c] * v[g])
                    .sum::<Complex64>()
                    * scale
            })
            .collect();
        FourierCoefficients {
            order: self.order(),
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_annulus_mesh, AnnulusMeshSpec};
    use crate::specfun::dtn_symbol;

    fn setup(layers: usize, sectors: usize, p: usize) -> (Mesh, PlaneWaveSpace, QuadratureRule) {
        let mesh = build_annulus_mesh(AnnulusMeshSpec::new(0.5, 1.0, layers, sectors)).unwrap();
        let space = PlaneWaveSpace::new(p, mesh.elements.len()).unwrap();
        (mesh, space, QuadratureRule::gauss_legendre(20).unwrap())
    }

    #[test]
    fn symbols_match_pointwise_evaluation_bitwise() {
        let t = build_symbol_diagonal(6.0, 1.0, 12).unwrap();
        for m in -12..=12 {
            assert_eq!(t.get(m), dtn_symbol(m, 6.0, 1.0).unwrap().value);
        }
        assert_eq!(t.adjoint().get(3), t.get(3).conj());
        assert!(build_symbol_diagonal(6.0, 1.0, 500).is_err());
    }

    #[test]
    fn projection_reproduces_trigonometric_polynomials() {
        let (mesh, _, rule) = setup(2, 24, 5);
        for m0 in [-3_i64, 0, 2, 5] {
            let w = project_trace(&mesh, &rule, 6, |p| Complex64::from_polar(1.0, m0 as f64 * p.angle()));
            for m in -6..=6_i64 {
                let expect = if m == m0 { 1.0 } else { 0.0 };
                assert!((w.get(m) - expect).norm() < 1e-12, "m0={m0} m={m}");
            }
            let back = project_trace(&mesh, &rule, 6, |p| w.evaluate(p.angle()));
            for (a, b) in w.values().iter().zip(back.values()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_columns_only_on_boundary_elements() {
        let (mesh, space, rule) = setup(3, 16, 4);
        let proj = build_projection_matrices(&mesh, &space, 3.0, 4, &rule);
        let touching = mesh.elements_touching(EdgeKind::Artificial);
        assert_eq!(proj.dofs().len(), touching.len() * 4);
        let full = proj.m_full();
        for g in 0..space.n_dofs() {
            let nonzero = (0..full.rows()).any(|l| full[(l, g)].norm() > 0.0);
            let (e, _) = space.element_of(g);
            assert_eq!(nonzero, touching.contains(&e), "dof {g}");
        }
    }

    #[test]
    fn block_equals_matrix_formula() {
        let (mesh, space, rule) = setup(1, 8, 3);
        let (k, delta) = (2.5, 0.5);
        let op = DtnOperator::new(&mesh, &space, k, 3, &rule).unwrap();
        let block = op.block(delta).unwrap().to_dense(space.n_dofs());
        let m = op.projection.m_full();
        let md = op.projection.md_full();
        let n = space.n_dofs();
        let r = mesh.spec.outer_radius;
        let ik = Complex64::new(0.0, k);
        for i in 0..n {
            for j in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for l in 0..m.rows() {
                    let t = op.symbols.entries()[l];
                    let (mi, mj) = (m[(l, i)], m[(l, j)]);
                    let (di, dj) = (md[(l, i)], md[(l, j)]);
                    s += -mi.conj() * t * mj / (2.0 * PI * r);
                    s += delta / (2.0 * ik * PI * r)
                        * (di.conj() * t * mj + (t * mi).conj() * dj - (t * mi).conj() * t * mj);
                }
                assert!((block[(i, j)] - s).norm() <= 1e-12 * (1.0 + s.norm()));
            }
        }
    }

    #[test]
    fn nonlocal_block_is_dissipative() {
        // with delta = 0 the block is -(1/2πR) M* T M and Im T <= 0
        let (mesh, space, rule) = setup(2, 12, 4);
        let op = DtnOperator::new(&mesh, &space, 4.0, 8, &rule).unwrap();
        let block = op.block(0.0).unwrap().to_dense(space.n_dofs());
        let v: Vec<Complex64> = (0..space.n_dofs())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        assert!(block.quadratic_form(&v).unwrap().im >= 0.0);
    }

    #[test]
    fn field_application_matches_block_for_discrete_fields() {
        let (mesh, space, rule) = setup(1, 10, 3);
        let (k, delta) = (3.0, 0.5);
        let op = DtnOperator::new(&mesh, &space, k, 5, &rule).unwrap();
        let u: Vec<Complex64> = (0..space.n_dofs())
            .map(|i| Complex64::new(1.0 / (1.0 + i as f64), (i as f64).sin()))
            .collect();
        let m = op.projection.m_full().matvec(&u).unwrap();
        let md = op.projection.md_full().matvec(&u).unwrap();
        let applied = apply_dtn_block_to_field(&op.projection, &op.symbols, delta, k, 1.0, &m, &md);
        let block = op.block(delta).unwrap();
        let ub: Vec<Complex64> = block.dofs.iter().map(|&g| u[g]).collect();
        let direct = block.values.matvec(&ub).unwrap();
        for (a, b) in applied.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()));
        }
    }
}

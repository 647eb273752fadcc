//! Assembly of the PWDG sesquilinear form and load vector.
//!
//! Row `i` of the matrix is the test function and column `j` the trial
//! function, `A_ij = A(ξ_j, ξ_i)`. Plane waves are global functions, so
//! the traces of `ξ` from both sides of an edge coincide and only the
//! side signs differ. Every edge term is then a combination of four
//! Gram blocks
//!
//! ```text
//! G1 = ∫ u conj(∂n v),  G2 = ∫ ∂n u conj(∂n v),
//! G3 = ∫ ∂n u conj(v),  G4 = ∫ u conj(v).
//! ```

use num_complex::Complex64;
use thiserror::Error;

use crate::basis::PlaneWaveSpace;
use crate::dtn::{apply_dtn_block_to_field, DtnError, DtnOperator};
use crate::geometry::{edge_quadrature, EdgeKind, EdgeQuadrature, GeometryError, Mesh, QuadratureRule, Vec2};
use crate::linalg::{norm2, DenseComplexMatrix, LinalgError, LuFactorization};

/// Default number of Gauss–Legendre points per edge.
pub const DEFAULT_EDGE_POINTS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("flux parameters must be positive (alpha={alpha}, beta={beta}, delta={delta})")]
    InvalidFlux { alpha: f64, beta: f64, delta: f64 },
    #[error("wavenumber must be positive, got {0}")]
    InvalidWavenumber(f64),
    #[error("vector length {got} does not match {expected} degrees of freedom")]
    Dimension { expected: usize, got: usize },
    #[error("Im(v* A v) = {value:e} is negative beyond round-off")]
    NegativeSeminorm { value: f64 },
    #[error("space is built for {space} elements but the mesh has {mesh}")]
    MeshMismatch { mesh: usize, space: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Dtn(#[from] DtnError),
}

/// Flux penalties `α` (jumps of `u`), `β` (jumps of `∇u`) and `δ`
/// (artificial-boundary stabilisation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl Default for FluxParams {
    fn default() -> Self {
        FluxParams {
            alpha: 0.5,
            beta: 0.5,
            delta: 0.5,
        }
    }
}

impl FluxParams {
    pub fn new(alpha: f64, beta: f64, delta: f64) -> Result<Self, AssemblyError> {
        let f = FluxParams { alpha, beta, delta };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if ok(self.alpha) && ok(self.beta) && ok(self.delta) {
            Ok(())
        } else {
            Err(AssemblyError::InvalidFlux {
                alpha: self.alpha,
                beta: self.beta,
                delta: self.delta,
            })
        }
    }
}

/// Condition imposed on the artificial circle `Γ_R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Truncated DtN map with modes `|m| <= order`.
    Dtn { order: usize },
    /// First-order absorbing condition `∂_n u + iku = 0`.
    Impedance,
}

impl BoundaryCondition {
    pub fn label(&self) -> &'static str {
        match self {
            BoundaryCondition::Dtn { .. } => "dtn",
            BoundaryCondition::Impedance => "impedance",
        }
    }

    pub fn dtn_order(&self) -> Option<usize> {
        match self {
            BoundaryCondition::Dtn { order } => Some(*order),
            BoundaryCondition::Impedance => None,
        }
    }
}

/// Local treatment of `Γ_R` edges in the skeleton matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtificialTerms {
    /// `∫ u conj(∂n v) − (δ/ik) ∫ ∂n u conj(∂n v)`; the nonlocal part is
    /// added separately.
    DtnLocal,
    /// The DtN map replaced by `−ik`.
    Impedance,
}

/// Selects which edge families enter a skeleton matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkeletonTerms {
    pub interior: bool,
    pub dirichlet: bool,
    pub artificial: Option<ArtificialTerms>,
}

/// A field with known value and gradient, used in the trial slot of the
/// form.
pub type FieldFn<'f> = &'f dyn Fn(Vec2) -> (Complex64, [Complex64; 2]);

#[derive(Debug)]
pub struct Assembler<'a> {
    mesh: &'a Mesh,
    space: &'a PlaneWaveSpace,
    k: f64,
    flux: FluxParams,
    rule: QuadratureRule,
}

struct EdgeGram {
    g1: Vec<Complex64>,
    g2: Vec<Complex64>,
    g3: Vec<Complex64>,
    g4: Vec<Complex64>,
}

impl<'a> Assembler<'a> {
    pub fn new(
        mesh: &'a Mesh,
        space: &'a PlaneWaveSpace,
        k: f64,
        flux: FluxParams,
        edge_points: usize,
    ) -> Result<Self, AssemblyError> {
        flux.validate()?;
        Self::new_unchecked(mesh, space, k, flux, edge_points)
    }

    /// As [`Assembler::new`] but accepting zero or negative penalties;
    /// only meaningful for inspecting individual terms.
    pub fn new_unchecked(
        mesh: &'a Mesh,
        space: &'a PlaneWaveSpace,
        k: f64,
        flux: FluxParams,
        edge_points: usize,
    ) -> Result<Self, AssemblyError> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(AssemblyError::InvalidWavenumber(k));
        }
        if space.n_elements != mesh.elements.len() {
            return Err(AssemblyError::MeshMismatch {
                mesh: mesh.elements.len(),
                space: space.n_elements,
            });
        }
        Ok(Assembler {
            mesh,
            space,
            k,
            flux,
            rule: QuadratureRule::gauss_legendre(edge_points)?,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn flux(&self) -> FluxParams {
        self.flux
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    fn ik(&self) -> Complex64 {
        Complex64::new(0.0, self.k)
    }

    fn edge_gram(&self, q: &EdgeQuadrature) -> EdgeGram {
        let p = self.space.p;
        let zero = Complex64::new(0.0, 0.0);
        let mut g = EdgeGram {
            g1: vec![zero; p * p],
            g2: vec![zero; p * p],
            g3: vec![zero; p * p],
            g4: vec![zero; p * p],
        };
        let mut v = vec![zero; p];
        let mut dn = vec![zero; p];
        for i in 0..q.points.len() {
            self.space.traces_at(self.k, q.points[i], q.normals[i], &mut v, &mut dn);
            let w = q.weights[i];
            for a in 0..p {
                let cv = v[a].conj() * w;
                let cdn = dn[a].conj() * w;
                for b in 0..p {
                    let idx = a * p + b;
                    g.g1[idx] += cdn * v[b];
                    g.g2[idx] += cdn * dn[b];
                    g.g3[idx] += cv * dn[b];
                    g.g4[idx] += cv * v[b];
                }
            }
        }
        g
    }

    fn scatter(&self, a: &mut DenseComplexMatrix, test_el: usize, trial_el: usize, block: impl Fn(usize) -> Complex64) {
        let p = self.space.p;
        for r in 0..p {
            let row = a.row_mut(self.space.dof(test_el, r));
            let c0 = self.space.dof(trial_el, 0);
            for c in 0..p {
                row[c0 + c] += block(r * p + c);
            }
        }
    }

    /// Edge-local part of the matrix.
    pub fn skeleton_matrix(&self, terms: SkeletonTerms) -> DenseComplexMatrix {
        let n = self.space.n_dofs();
        let mut a = DenseComplexMatrix::zeros(n, n);
        let ik = self.ik();
        let FluxParams { alpha, beta, delta } = self.flux;
        let half = Complex64::new(0.5, 0.0);
        for edge in &self.mesh.edges {
            let wanted = match edge.kind {
                EdgeKind::Interior => terms.interior,
                EdgeKind::Dirichlet => terms.dirichlet,
                EdgeKind::Artificial => terms.artificial.is_some(),
            };
            if !wanted {
                continue;
            }
            let g = self.edge_gram(&edge_quadrature(edge, &self.rule));
            let first = edge.elements.0;
            match edge.kind {
                EdgeKind::Interior => {
                    let second = edge.elements.1.expect("interior edge has two elements");
                    for (test, sv) in [(first, 1.0), (second, -1.0)] {
                        for (trial, su) in [(first, 1.0), (second, -1.0)] {
                            self.scatter(&mut a, test, trial, |i| {
                                sv * (half * g.g1[i] - beta * su / ik * g.g2[i] - half * g.g3[i]
                                    + ik * alpha * su * g.g4[i])
                            });
                        }
                    }
                }
                EdgeKind::Dirichlet => {
                    self.scatter(&mut a, first, first, |i| -g.g3[i] + ik * alpha * g.g4[i]);
                }
                EdgeKind::Artificial => match terms.artificial.expect("checked above") {
                    ArtificialTerms::DtnLocal => {
                        self.scatter(&mut a, first, first, |i| g.g1[i] - delta / ik * g.g2[i]);
                    }
                    ArtificialTerms::Impedance => {
                        let k2 = self.k * self.k;
                        self.scatter(&mut a, first, first, |i| {
                            ik * g.g4[i] + g.g1[i]
                                - delta / ik * (g.g2[i] + ik * g.g1[i] - ik * g.g3[i] + k2 * g.g4[i])
                        });
                    }
                },
            }
        }
        a
    }

    /// Full system matrix for the given boundary condition. For the DtN
    /// condition the operator must have been built on the same mesh and
    /// space.
    pub fn system_matrix(&self, bc: BoundaryCondition, dtn: Option<&DtnOperator>) -> Result<DenseComplexMatrix, AssemblyError> {
        match bc {
            BoundaryCondition::Impedance => Ok(self.skeleton_matrix(SkeletonTerms {
                interior: true,
                dirichlet: true,
                artificial: Some(ArtificialTerms::Impedance),
            })),
            BoundaryCondition::Dtn { order } => {
                let mut a = self.skeleton_matrix(SkeletonTerms {
                    interior: true,
                    dirichlet: true,
                    artificial: Some(ArtificialTerms::DtnLocal),
                });
                let owned;
                let op = match dtn {
                    Some(op) if op.order() == order => op,
                    _ => {
                        owned = DtnOperator::new(self.mesh, self.space, self.k, order, &self.rule)?;
                        &owned
                    }
                };
                op.block(self.flux.delta)?.add_to(&mut a);
                Ok(a)
            }
        }
    }

    pub fn linear_system(
        &self,
        bc: BoundaryCondition,
        dtn: Option<&DtnOperator>,
        g: impl Fn(Vec2) -> Complex64,
    ) -> Result<LinearSystem, AssemblyError> {
        LinearSystem::new(self.system_matrix(bc, dtn)?, self.rhs(g))
    }

    /// `F_i = −∫_{Γ_D} g conj(∂n ξ_i) + ikα ∫_{Γ_D} g conj(ξ_i)`.
    pub fn rhs(&self, g: impl Fn(Vec2) -> Complex64) -> Vec<Complex64> {
        let p = self.space.p;
        let ik = self.ik();
        let mut f = vec![Complex64::new(0.0, 0.0); self.space.n_dofs()];
        let mut v = vec![Complex64::new(0.0, 0.0); p];
        let mut dn = v.clone();
        for (_, edge) in self.mesh.edges_of_kind(EdgeKind::Dirichlet) {
            let q = edge_quadrature(edge, &self.rule);
            let e = edge.elements.0;
            for i in 0..q.points.len() {
                self.space.traces_at(self.k, q.points[i], q.normals[i], &mut v, &mut dn);
                let gw = g(q.points[i]) * q.weights[i];
                for l in 0..p {
                    f[self.space.dof(e, l)] += -gw * dn[l].conj() + ik * self.flux.alpha * gw * v[l].conj();
                }
            }
        }
        f
    }

    /// `A(u, ξ_i)` for a smooth field `u` given by value and gradient.
    pub fn field_functional(
        &self,
        field: FieldFn<'_>,
        bc: BoundaryCondition,
        dtn: Option<&DtnOperator>,
    ) -> Result<Vec<Complex64>, AssemblyError> {
        let p = self.space.p;
        let ik = self.ik();
        let FluxParams { alpha, delta, .. } = self.flux;
        let zero = Complex64::new(0.0, 0.0);
        let mut out = vec![zero; self.space.n_dofs()];
        let mut v = vec![zero; p];
        let mut dn = v.clone();
        let order = bc.dtn_order();
        let n_modes = order.map_or(0, |n| 2 * n + 1);
        let mut c = vec![zero; n_modes];
        let mut d = vec![zero; n_modes];
        for edge in &self.mesh.edges {
            let q = edge_quadrature(edge, &self.rule);
            // h1 = ∫ u conj(∂n v), h2 = ∫ ∂n u conj(∂n v), h3 = ∫ ∂n u conj(v), h4 = ∫ u conj(v)
            let mut h = vec![[zero; 4]; p];
            for i in 0..q.points.len() {
                let x = q.points[i];
                let nrm = q.normals[i];
                self.space.traces_at(self.k, x, nrm, &mut v, &mut dn);
                let (u, grad) = field(x);
                let du = grad[0] * nrm.x + grad[1] * nrm.y;
                let w = q.weights[i];
                for l in 0..p {
                    h[l][0] += w * u * dn[l].conj();
                    h[l][1] += w * du * dn[l].conj();
                    h[l][2] += w * du * v[l].conj();
                    h[l][3] += w * u * v[l].conj();
                }
                if edge.kind == EdgeKind::Artificial {
                    if let Some(n) = order {
                        for (idx, m) in (-(n as i64)..=n as i64).enumerate() {
                            let ph = Complex64::from_polar(w, -(m as f64) * q.angles[i]);
                            c[idx] += u * ph;
                            d[idx] += du * ph;
                        }
                    }
                }
            }
            let first = edge.elements.0;
            let mut add = |el: usize, f: &dyn Fn(&[Complex64; 4]) -> Complex64| {
                for l in 0..p {
                    out[self.space.dof(el, l)] += f(&h[l]);
                }
            };
            match edge.kind {
                EdgeKind::Interior => {
                    let second = edge.elements.1.expect("interior edge has two elements");
                    add(first, &|h| h[0] - h[2]);
                    add(second, &|h| -(h[0] - h[2]));
                }
                EdgeKind::Dirichlet => add(first, &|h| -h[2] + ik * alpha * h[3]),
                EdgeKind::Artificial => match bc {
                    BoundaryCondition::Dtn { .. } => add(first, &|h| h[0] - delta / ik * h[1]),
                    BoundaryCondition::Impedance => {
                        let k2 = self.k * self.k;
                        add(first, &|h| {
                            ik * h[3] + h[0] - delta / ik * (h[1] + ik * h[0] - ik * h[2] + k2 * h[3])
                        })
                    }
                },
            }
        }
        if let Some(n) = order {
            let owned;
            let op = match dtn {
                Some(op) if op.order() == n => op,
                _ => {
                    owned = DtnOperator::new(self.mesh, self.space, self.k, n, &self.rule)?;
                    &owned
                }
            };
            let nonlocal = apply_dtn_block_to_field(&op.projection, &op.symbols, delta, self.k, op.radius, &c, &d);
            for (&g, val) in op.projection.dofs().iter().zip(nonlocal) {
                out[g] += val;
            }
        }
        Ok(out)
    }
}

/// `A U = F`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: DenseComplexMatrix,
    pub rhs: Vec<Complex64>,
}

impl LinearSystem {
    pub fn new(matrix: DenseComplexMatrix, rhs: Vec<Complex64>) -> Result<Self, AssemblyError> {
        if !matrix.is_square() || matrix.rows() != rhs.len() {
            return Err(AssemblyError::Dimension {
                expected: matrix.rows(),
                got: rhs.len(),
            });
        }
        Ok(LinearSystem { matrix, rhs })
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn factorize(&self) -> Result<LuFactorization, AssemblyError> {
        Ok(LuFactorization::new(&self.matrix)?)
    }

    pub fn solve(&self) -> Result<Vec<Complex64>, AssemblyError> {
        Ok(self.factorize()?.solve(&self.rhs)?)
    }

    /// `‖A u − F‖ / ‖F‖`, or the absolute residual when `F = 0`.
    pub fn relative_residual(&self, u: &[Complex64]) -> Result<f64, AssemblyError> {
        let au = self.matrix.matvec(u)?;
        let r: Vec<Complex64> = au.iter().zip(&self.rhs).map(|(a, f)| a - f).collect();
        let f = norm2(&self.rhs);
        Ok(if f > 0.0 { norm2(&r) / f } else { norm2(&r) })
    }

    /// 1-norm condition estimate, `+inf` when singular.
    pub fn condition_estimate(&self) -> f64 {
        crate::linalg::condition_estimate(&self.matrix)
    }
}

/// Assembles the system matrix with default edge quadrature.
pub fn assemble_system(
    mesh: &Mesh,
    space: &PlaneWaveSpace,
    flux: FluxParams,
    k: f64,
    bc: BoundaryCondition,
) -> Result<DenseComplexMatrix, AssemblyError> {
    Assembler::new(mesh, space, k, flux, DEFAULT_EDGE_POINTS)?.system_matrix(bc, None)
}

/// Assembles the load vector for Dirichlet data `g` on `Γ_D`.
pub fn assemble_rhs(
    mesh: &Mesh,
    space: &PlaneWaveSpace,
    flux: FluxParams,
    k: f64,
    g: impl Fn(Vec2) -> Complex64,
) -> Result<Vec<Complex64>, AssemblyError> {
    Ok(Assembler::new(mesh, space, k, flux, DEFAULT_EDGE_POINTS)?.rhs(g))
}

/// `‖v‖_DG = sqrt(Im v* A v)`; errors if the imaginary part is
/// negative beyond `1e-10 ‖v‖²`.
pub fn dg_seminorm(v: &[Complex64], a: &DenseComplexMatrix) -> Result<f64, AssemblyError> {
    if v.len() != a.rows() {
        return Err(AssemblyError::Dimension {
            expected: a.rows(),
            got: v.len(),
        });
    }
    let im = a.quadratic_form(v).expect("dimension checked").im;
    let v2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if im < -1e-10 * v2 {
        return Err(AssemblyError::NegativeSeminorm { value: im });
    }
    Ok(im.max(0.0).sqrt())
}

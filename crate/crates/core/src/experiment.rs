//! Experiment runner: single solves and N, h and p sweeps for scattering
//! of a plane wave by the disc `r < a`, with CSV and SVG output.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

use crate::assembly::{ArtificialTerms, Assembler, AssemblyError, FluxParams, SkeletonTerms};
use crate::basis::{BasisError, PlaneWaveSpace};
use crate::dtn::{DtnError, DtnOperator};
use crate::geometry::{build_annulus_mesh, element_l2_quadrature, AnnulusMeshSpec, ElementQuadrature, GeometryError, Mesh};
use crate::linalg::{LinalgError, LuFactorization};
use crate::oracle::{
    evaluate_at_points, incident_wave, relative_l2_error, DiscreteSolution, MieSeries, OracleError, TruncatedModeReference,
};
use crate::specfun::{MAX_ARG, MAX_ORDER};

/// Largest system the dense solver accepts.
pub const MAX_DOFS: usize = 6000;

pub const CSV_HEADER: &str = "k,h,p,N,bc,alpha,beta,delta,Nh,err_vs_exact,err_vs_truncated,cond_est,seconds";

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{n_dofs} degrees of freedom exceed the cap of {cap}")]
    DofCap { n_dofs: usize, cap: usize },
    #[error("singular system: zero pivot at index {pivot}")]
    Singular { pivot: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Dtn(#[from] DtnError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Linalg(LinalgError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl From<LinalgError> for ExperimentError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::Singular { pivot } => ExperimentError::Singular { pivot },
            other => ExperimentError::Linalg(other),
        }
    }
}

impl From<BasisError> for ExperimentError {
    fn from(e: BasisError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

impl ExperimentError {
    /// Process exit code: 2 configuration, 3 numerical failure, 4 DOF cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Geometry(_) => 2,
            ExperimentError::DofCap { .. } => 4,
            ExperimentError::Singular { .. } | ExperimentError::Linalg(_) | ExperimentError::Oracle(_) => 3,
            ExperimentError::Assembly(_) | ExperimentError::Dtn(_) => 2,
            ExperimentError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub k: f64,
    #[serde(default = "default_inner")]
    pub inner_radius: f64,
    #[serde(default = "default_outer")]
    pub outer_radius: f64,
    /// Angle of the incident direction `d`, radians.
    #[serde(default)]
    pub incident_angle: f64,
}

fn default_inner() -> f64 {
    0.5
}

fn default_outer() -> f64 {
    1.0
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            k: 4.0,
            inner_radius: default_inner(),
            outer_radius: default_outer(),
            incident_angle: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshChoice {
    Structured { layers: usize, sectors: usize },
    /// Smallest balanced mesh with `h <= target`.
    TargetH(f64),
}

impl MeshChoice {
    pub fn spec(&self, problem: &ProblemConfig) -> Result<AnnulusMeshSpec, ExperimentError> {
        let spec = match *self {
            MeshChoice::Structured { layers, sectors } => {
                AnnulusMeshSpec::new(problem.inner_radius, problem.outer_radius, layers, sectors)
            }
            MeshChoice::TargetH(h) => AnnulusMeshSpec::for_target_h(problem.inner_radius, problem.outer_radius, h)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    Dtn,
    Impedance,
}

impl BcKind {
    pub fn label(self) -> &'static str {
        match self {
            BcKind::Dtn => "dtn",
            BcKind::Impedance => "impedance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// One solve with the base parameters.
    Single,
    N(Vec<usize>),
    H(Vec<MeshChoice>),
    P(Vec<usize>),
    /// DtN and impedance on each listed mesh; the base mesh when empty.
    CompareBc(Vec<MeshChoice>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    #[serde(default = "default_edge_points")]
    pub edge_points: usize,
    /// Gauss–Legendre order of the per-element error quadrature.
    #[serde(default = "default_l2_points")]
    pub l2_points: usize,
    /// Mie and truncated-reference modes.
    #[serde(default = "default_exact_order")]
    pub exact_order: usize,
}

fn default_edge_points() -> usize {
    20
}

fn default_l2_points() -> usize {
    8
}

fn default_exact_order() -> usize {
    crate::oracle::DEFAULT_EXACT_ORDER
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            edge_points: default_edge_points(),
            l2_points: default_l2_points(),
            exact_order: default_exact_order(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default = "default_mesh")]
    pub mesh: MeshChoice,
    /// Plane-wave directions per element.
    #[serde(default = "default_p")]
    pub p: usize,
    /// DtN truncation order.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_flux")]
    pub flux: FluxConfig,
    #[serde(default = "default_bc")]
    pub bc: BcKind,
    #[serde(default = "default_sweep")]
    pub sweep: Sweep,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed for the randomised self-test suites.
    #[serde(default)]
    pub seed: u64,
    /// Single-threaded and `seconds = 0`, giving byte-identical CSV.
    #[serde(default)]
    pub deterministic: bool,
}

fn default_mesh() -> MeshChoice {
    MeshChoice::Structured { layers: 2, sectors: 26 }
}

fn default_p() -> usize {
    7
}

fn default_n() -> usize {
    30
}

fn default_bc() -> BcKind {
    BcKind::Dtn
}

fn default_sweep() -> Sweep {
    Sweep::Single
}

fn default_flux() -> FluxConfig {
    FluxConfig::default()
}

/// Serialisable mirror of [`FluxParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxConfig {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl Default for FluxConfig {
    fn default() -> Self {
        let f = FluxParams::default();
        FluxConfig {
            alpha: f.alpha,
            beta: f.beta,
            delta: f.delta,
        }
    }
}

impl From<FluxConfig> for FluxParams {
    fn from(f: FluxConfig) -> Self {
        FluxParams {
            alpha: f.alpha,
            beta: f.beta,
            delta: f.delta,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::new(ProblemConfig::default(), default_mesh(), default_p(), default_n())
    }
}

impl ExperimentConfig {
    pub fn new(problem: ProblemConfig, mesh: MeshChoice, p: usize, n: usize) -> Self {
        ExperimentConfig {
            problem,
            mesh,
            p,
            n,
            flux: FluxConfig::default(),
            bc: BcKind::Dtn,
            sweep: Sweep::Single,
            quadrature: QuadratureConfig::default(),
            output: OutputConfig::default(),
            seed: 0,
            deterministic: false,
        }
    }

    /// Every `(mesh, p, N, bc)` point the sweep will solve, in order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let base = SweepPoint {
            mesh: self.mesh,
            p: self.p,
            n: self.n,
            bc: self.bc,
        };
        match &self.sweep {
            Sweep::Single => vec![base],
            Sweep::N(ns) => ns.iter().map(|&n| SweepPoint { n, ..base }).collect(),
            Sweep::H(meshes) => meshes.iter().map(|&mesh| SweepPoint { mesh, ..base }).collect(),
            Sweep::P(ps) => ps.iter().map(|&p| SweepPoint { p, ..base }).collect(),
            Sweep::CompareBc(meshes) => {
                let meshes = if meshes.is_empty() { vec![self.mesh] } else { meshes.clone() };
                meshes
                    .into_iter()
                    .flat_map(|mesh| {
                        [BcKind::Dtn, BcKind::Impedance]
                            .into_iter()
                            .map(move |bc| SweepPoint { mesh, bc, ..base })
                    })
                    .collect()
            }
        }
    }

    /// Checks every sweep point against the module preconditions without
    /// assembling anything.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let pr = &self.problem;
        let bad = |m: String| Err(ExperimentError::Config(m));
        if !(pr.k > 0.0 && pr.k.is_finite()) {
            return bad(format!("k must be positive, got {}", pr.k));
        }
        if !(pr.inner_radius > 0.0 && pr.inner_radius < pr.outer_radius) {
            return bad(format!("need 0 < a < R, got a={}, R={}", pr.inner_radius, pr.outer_radius));
        }
        if !pr.incident_angle.is_finite() {
            return bad("incident angle must be finite".into());
        }
        if pr.k * pr.outer_radius > MAX_ARG {
            return bad(format!("kR = {} exceeds the Bessel envelope {MAX_ARG}", pr.k * pr.outer_radius));
        }
        FluxParams::from(self.flux)
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        let q = &self.quadrature;
        if q.edge_points < 2 || q.l2_points < 2 {
            return bad("quadrature resolutions too small".into());
        }
        let min_exact = MieSeries::minimum_order(pr.k, pr.inner_radius);
        if q.exact_order < min_exact || q.exact_order >= MAX_ORDER as usize {
            return bad(format!(
                "exact_order must lie in [{min_exact}, {}), got {}",
                MAX_ORDER, q.exact_order
            ));
        }
        let points = self.points();
        if points.is_empty() {
            return bad("sweep has no points".into());
        }
        for pt in points {
            if pt.p < 3 {
                return bad(format!("p must be at least 3, got {}", pt.p));
            }
            if pt.bc == BcKind::Dtn && pt.n > MAX_ORDER as usize {
                return bad(format!("N = {} exceeds the supported maximum {MAX_ORDER}", pt.n));
            }
            let spec = pt.mesh.spec(pr)?;
            let mesh = build_annulus_mesh(spec)?;
            if !mesh.is_conforming() {
                return bad(format!(
                    "mesh with {} layers and {} sectors cuts into the scatterer; use more sectors",
                    spec.n_layers, spec.n_sectors
                ));
            }
            let n_dofs = pt.p * spec.element_count();
            if n_dofs > MAX_DOFS {
                return Err(ExperimentError::DofCap { n_dofs, cap: MAX_DOFS });
            }
        }
        Ok(())
    }

    /// FNV-1a hash of the configuration's debug rendering.
    pub fn hash(&self) -> u64 {
        let text = format!("{self:?}");
        text.bytes().fold(0xcbf29ce484222325_u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub mesh: MeshChoice,
    pub p: usize,
    pub n: usize,
    pub bc: BcKind,
}

/// One solve. `n` is 0 for impedance rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub k: f64,
    pub h: f64,
    pub p: usize,
    pub n: usize,
    pub bc: BcKind,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub n_dofs: usize,
    pub err_vs_exact: f64,
    pub err_vs_truncated: f64,
    pub cond_est: f64,
    pub seconds: f64,
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.k,
            self.h,
            self.p,
            self.n,
            self.bc.label(),
            self.alpha,
            self.beta,
            self.delta,
            self.n_dofs,
            self.err_vs_exact,
            self.err_vs_truncated,
            self.cond_est,
            self.seconds
        )
    }

    fn is_finite(&self) -> bool {
        [self.h, self.err_vs_exact, self.err_vs_truncated, self.cond_est, self.seconds]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// Mesh-level data shared by all solves on one mesh.
struct MeshData {
    choice: MeshChoice,
    mesh: Mesh,
    quad: ElementQuadrature,
    mie_values: Vec<Complex64>,
}

struct Runner<'c> {
    config: &'c ExperimentConfig,
    mie: MieSeries,
    mesh: Option<MeshData>,
    /// Skeleton matrix keyed by `(p, artificial terms)` for the current mesh.
    skeleton: Option<(usize, ArtificialTerms, crate::linalg::DenseComplexMatrix)>,
}

impl<'c> Runner<'c> {
    fn new(config: &'c ExperimentConfig) -> Result<Self, ExperimentError> {
        let pr = &config.problem;
        let mie = MieSeries::new(pr.k, pr.inner_radius, pr.incident_angle, config.quadrature.exact_order)?;
        Ok(Runner {
            config,
            mie,
            mesh: None,
            skeleton: None,
        })
    }

    fn mesh_for(&mut self, choice: MeshChoice) -> Result<(), ExperimentError> {
        if self.mesh.as_ref().is_some_and(|m| m.choice == choice) {
            return Ok(());
        }
        self.mesh = None;
        self.skeleton = None;
        let mesh = build_annulus_mesh(choice.spec(&self.config.problem)?)?;
        let quad = element_l2_quadrature(&mesh, self.config.quadrature.l2_points)?;
        let mie_values = evaluate_at_points(&self.mie, &quad.points)?;
        self.mesh = Some(MeshData {
            choice,
            mesh,
            quad,
            mie_values,
        });
        Ok(())
    }

    fn solve(&mut self, pt: SweepPoint) -> Result<ResultRow, ExperimentError> {
        let cfg = self.config;
        let pr = cfg.problem;
        let flux: FluxParams = cfg.flux.into();
        self.mesh_for(pt.mesh)?;
        let start = Instant::now();
        let md = self.mesh.as_ref().expect("mesh prepared above");
        let mesh = &md.mesh;
        let space = PlaneWaveSpace::new(pt.p, mesh.elements.len())?;
        if space.n_dofs() > MAX_DOFS {
            return Err(ExperimentError::DofCap {
                n_dofs: space.n_dofs(),
                cap: MAX_DOFS,
            });
        }
        let asm = Assembler::new(mesh, &space, pr.k, flux, cfg.quadrature.edge_points)?;
        let terms = match pt.bc {
            BcKind::Dtn => ArtificialTerms::DtnLocal,
            BcKind::Impedance => ArtificialTerms::Impedance,
        };
        let cached = matches!(&self.skeleton, Some((p, t, _)) if *p == pt.p && *t == terms);
        if !cached {
            self.skeleton = None;
            let a = asm.skeleton_matrix(SkeletonTerms {
                interior: true,
                dirichlet: true,
                artificial: Some(terms),
            });
            self.skeleton = Some((pt.p, terms, a));
        }
        let mut a = self.skeleton.as_ref().expect("skeleton prepared above").2.clone();
        if pt.bc == BcKind::Dtn {
            let op = DtnOperator::new(mesh, &space, pr.k, pt.n, asm.rule())?;
            op.block(flux.delta)?.add_to(&mut a);
        }
        let d = crate::geometry::Vec2::from_polar(1.0, pr.incident_angle);
        let f = asm.rhs(|x| -incident_wave(pr.k, d, x));
        let lu = LuFactorization::new(&a)?;
        drop(a);
        let u = lu.solve(&f)?;
        let cond_est = lu.condition_estimate();
        drop(lu);
        let seconds = if cfg.deterministic {
            0.0
        } else {
            start.elapsed().as_secs_f64()
        };

        let sol = DiscreteSolution {
            mesh,
            space: &space,
            k: pr.k,
            coefficients: &u,
        };
        let uh = sol.values_in_elements(&md.quad.points, &md.quad.elements);
        let err_vs_exact = relative_l2_error(&uh, &md.mie_values, &md.quad.weights)?;
        let truncation = match pt.bc {
            BcKind::Dtn => Some(pt.n),
            BcKind::Impedance => None,
        };
        let reference = TruncatedModeReference::new(
            pr.k,
            pr.inner_radius,
            pr.outer_radius,
            pr.incident_angle,
            truncation,
            cfg.quadrature.exact_order,
        )?;
        let ref_values = evaluate_at_points(&reference, &md.quad.points)?;
        let err_vs_truncated = relative_l2_error(&uh, &ref_values, &md.quad.weights)?;
        Ok(ResultRow {
            k: pr.k,
            h: mesh.h,
            p: pt.p,
            n: if pt.bc == BcKind::Dtn { pt.n } else { 0 },
            bc: pt.bc,
            alpha: flux.alpha,
            beta: flux.beta,
            delta: flux.delta,
            n_dofs: space.n_dofs(),
            err_vs_exact,
            err_vs_truncated,
            cond_est,
            seconds,
        })
    }
}

/// Runs every sweep point in order and writes the configured outputs.
pub fn run(config: &ExperimentConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    run_with_progress(config, |_, _| {})
}

/// As [`run`], calling `progress(index, row)` after each point.
pub fn run_with_progress(
    config: &ExperimentConfig,
    mut progress: impl FnMut(usize, &ResultRow),
) -> Result<Vec<ResultRow>, ExperimentError> {
    config.validate()?;
    if config.deterministic {
        faer::set_global_parallelism(faer::Par::Seq);
    }
    let mut runner = Runner::new(config)?;
    let mut rows = Vec::new();
    for (i, pt) in config.points().into_iter().enumerate() {
        let row = runner.solve(pt)?;
        if !row.is_finite() {
            return Err(ExperimentError::Linalg(LinalgError::Singular { pivot: usize::MAX }));
        }
        progress(i, &row);
        rows.push(row);
    }
    if let Some(path) = &config.output.csv {
        std::fs::write(path, render_csv(config, &rows))?;
    }
    if let Some(path) = &config.output.svg {
        std::fs::write(path, render_svg(config, &rows))?;
    }
    Ok(rows)
}

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Algebraic rate: slope of `log err` against `log h`.
pub fn h_rate(rows: &[ResultRow]) -> Option<f64> {
    let x: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.err_vs_exact.ln()).collect();
    least_squares_slope(&x, &y)
}

/// Exponential rate: `-d ln(err) / dp`.
pub fn p_rate(rows: &[ResultRow]) -> Option<f64> {
    let x: Vec<f64> = rows.iter().map(|r| r.p as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.err_vs_exact.ln()).collect();
    least_squares_slope(&x, &y).map(|s| -s)
}

pub fn render_csv(config: &ExperimentConfig, rows: &[ResultRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    let _ = writeln!(out, "# schema={SCHEMA_VERSION} config_hash={:016x}", config.hash());
    match &config.sweep {
        Sweep::H(_) => {
            if let Some(s) = h_rate(rows) {
                let _ = writeln!(out, "# h_rate={s}");
            }
        }
        Sweep::P(_) => {
            if let Some(s) = p_rate(rows) {
                let _ = writeln!(out, "# p_exponential_rate={s}");
            }
        }
        Sweep::CompareBc(_) => {
            for bc in [BcKind::Dtn, BcKind::Impedance] {
                let sub: Vec<ResultRow> = rows.iter().filter(|r| r.bc == bc).copied().collect();
                if let Some(s) = h_rate(&sub) {
                    let _ = writeln!(out, "# h_rate_{}={s}", bc.label());
                }
            }
        }
        _ => {}
    }
    out
}

/// Log-scale error plot; the x axis is `1/h` (log), `p` or `N`.
pub fn render_svg(config: &ExperimentConfig, rows: &[ResultRow]) -> String {
    let (xlabel, log_x): (&str, bool) = match config.sweep {
        Sweep::H(_) | Sweep::CompareBc(_) => ("1/h", true),
        Sweep::P(_) => ("p", false),
        Sweep::N(_) => ("N", false),
        Sweep::Single => ("1/h", true),
    };
    let xval = |r: &ResultRow| match config.sweep {
        Sweep::P(_) => r.p as f64,
        Sweep::N(_) => r.n as f64,
        _ => 1.0 / r.h,
    };
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for bc in [BcKind::Dtn, BcKind::Impedance] {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.bc == bc && r.err_vs_exact > 0.0)
            .map(|r| (xval(r), r.err_vs_exact))
            .collect();
        if !pts.is_empty() {
            series.push((bc.label().to_string(), pts));
        }
    }
    let (w, h, margin) = (640.0, 440.0, 60.0);
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.1.iter().copied()).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    if !all.is_empty() {
        let fold = |f: fn(f64, f64) -> f64, init: f64, g: &dyn Fn(&(f64, f64)) -> f64| all.iter().map(g).fold(init, f);
        let (mut x0, mut x1) = (fold(f64::min, f64::INFINITY, &|p| tx(p.0)), fold(f64::max, f64::NEG_INFINITY, &|p| tx(p.0)));
        let y0 = fold(f64::min, f64::INFINITY, &|p| p.1.log10()).floor();
        let mut y1 = fold(f64::max, f64::NEG_INFINITY, &|p| p.1.log10()).ceil();
        if x1 <= x0 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        let sx = |x: f64| margin + (tx(x) - x0) / (x1 - x0) * (w - 2.0 * margin);
        let sy = |y: f64| h - margin - (y.log10() - y0) / (y1 - y0) * (h - 2.0 * margin);
        let _ = writeln!(
            out,
            r#"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            w - 2.0 * margin,
            h - 2.0 * margin
        );
        let mut e = y0 as i32;
        while e as f64 <= y1 {
            let y = sy(10f64.powi(e));
            let _ = writeln!(
                out,
                r##"<line x1="{margin}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"##,
                w - margin,
                margin - 6.0,
                y + 4.0
            );
            e += 1;
        }
        let mut xs: Vec<f64> = all.iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for x in xs {
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                sx(x),
                h - margin + 16.0,
                format_tick(x)
            );
        }
        let colours = ["#1f77b4", "#d62728"];
        for (i, (name, pts)) in series.iter().enumerate() {
            let c = colours[i % colours.len()];
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#,
                path.join(" ")
            );
            for &(x, y) in pts {
                let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, sx(x), sy(y));
            }
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" fill="{c}">{name}</text>"#,
                w - margin - 80.0,
                margin + 16.0 + 16.0 * i as f64
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xlabel}</text>"#,
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">relative L2 error</text>"#,
        h / 2.0,
        h / 2.0
    );
    out.push_str("</svg>\n");
    out
}

fn format_tick(x: f64) -> String {
    if (x - x.round()).abs() < 1e-9 {
        format!("{}", x.round())
    } else {
        format!("{x:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            ProblemConfig::default(),
            MeshChoice::Structured { layers: 1, sectors: 12 },
            3,
            4,
        );
        c.quadrature.l2_points = 4;
        c.deterministic = true;
        c
    }

    #[test]
    fn slope_of_exact_line() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0];
        assert!((least_squares_slope(&x, &y).unwrap() - 2.0).abs() < 1e-14);
        assert!(least_squares_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut c = small();
        c.problem.k = -1.0;
        assert!(matches!(c.validate(), Err(ExperimentError::Config(_))));
        let mut c = small();
        c.p = 2;
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        let mut c = small();
        c.flux.delta = 0.0;
        assert!(c.validate().is_err());
        let mut c = small();
        c.mesh = MeshChoice::Structured { layers: 10, sectors: 100 };
        c.p = 7;
        let e = c.validate().unwrap_err();
        assert!(matches!(e, ExperimentError::DofCap { .. }));
        assert_eq!(e.exit_code(), 4);
        let mut c = small();
        c.mesh = MeshChoice::Structured { layers: 1, sectors: 4 };
        assert!(matches!(c.validate(), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(ExperimentError::from(LinalgError::Singular { pivot: 3 }).exit_code(), 3);
        assert_eq!(ExperimentError::Config("x".into()).exit_code(), 2);
        assert_eq!(ExperimentError::DofCap { n_dofs: 7000, cap: MAX_DOFS }.exit_code(), 4);
    }

    #[test]
    fn compare_bc_points() {
        let mut c = small();
        c.sweep = Sweep::CompareBc(vec![]);
        let pts = c.points();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].bc, BcKind::Dtn);
        assert_eq!(pts[1].bc, BcKind::Impedance);
    }

    #[test]
    fn csv_layout() {
        let mut c = small();
        c.sweep = Sweep::N(vec![2, 4]);
        let rows = run(&c).unwrap();
        let csv = render_csv(&c, &rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("# schema=1"));
        assert_eq!(lines[1].split(',').count(), 13);
        assert!(render_svg(&c, &rows).contains("<polyline"));
    }
}

//! Structured curved-edge triangulation of the annulus `a <= r <= R`,
//! its edge skeleton, and the quadrature rules used on it.
//!
//! Vertices sit on `n_layers + 1` concentric circles at `n_sectors`
//! equispaced angles. Every ring/sector cell is split along the diagonal
//! from `(ring i, sector j)` to `(ring i+1, sector j+1)`. Edges on `r = a`
//! and `r = R` are exact polar arcs; all other edges are straight.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::{self, Write};
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid annulus: need 0 < a < R, got a = {a}, R = {outer}")]
    InvalidRadii { a: f64, outer: f64 },
    #[error("need at least 1 layer and 3 sectors, got {layers} x {sectors}")]
    TooCoarse { layers: usize, sectors: usize },
    #[error("quadrature needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("Gauss-Legendre rule with {n} points failed its exactness check (degree {degree})")]
    Exactness { n: usize, degree: usize },
    #[error("no mesh with h <= {target} below {max_layers} layers")]
    TargetUnreachable { target: f64, max_layers: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Vec2::new(r * c, r * s)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn unit(self) -> Vec2 {
        self * (1.0 / self.norm())
    }

    /// Polar angle in `[0, 2π)`.
    pub fn angle(self) -> f64 {
        let t = self.y.atan2(self.x);
        if t < 0.0 {
            t + TAU
        } else {
            t
        }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusMeshSpec {
    /// Scatterer radius `a`.
    pub inner_radius: f64,
    /// Artificial boundary radius `R`.
    pub outer_radius: f64,
    pub n_layers: usize,
    pub n_sectors: usize,
}

impl AnnulusMeshSpec {
    pub fn new(inner_radius: f64, outer_radius: f64, n_layers: usize, n_sectors: usize) -> Self {
        AnnulusMeshSpec {
            inner_radius,
            outer_radius,
            n_layers,
            n_sectors,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let (a, r) = (self.inner_radius, self.outer_radius);
        if !(a > 0.0 && a < r && r.is_finite()) {
            return Err(GeometryError::InvalidRadii { a, outer: r });
        }
        if self.n_layers < 1 || self.n_sectors < 3 {
            return Err(GeometryError::TooCoarse {
                layers: self.n_layers,
                sectors: self.n_sectors,
            });
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        2 * self.n_layers * self.n_sectors
    }

    /// Sector count that makes the outermost cells roughly square for a
    /// given layer count.
    pub fn balanced_sectors(inner_radius: f64, outer_radius: f64, n_layers: usize) -> usize {
        let dr = (outer_radius - inner_radius) / n_layers as f64;
        ((TAU * outer_radius / dr).ceil() as usize).max(3)
    }

    /// Smallest balanced mesh whose achieved `h` does not exceed `target`.
    pub fn for_target_h(inner_radius: f64, outer_radius: f64, target: f64) -> Result<Self, GeometryError> {
        const MAX_LAYERS: usize = 200;
        for layers in 1..=MAX_LAYERS {
            let sectors = Self::balanced_sectors(inner_radius, outer_radius, layers);
            let spec = AnnulusMeshSpec::new(inner_radius, outer_radius, layers, sectors);
            spec.validate()?;
            if estimate_h(&spec) <= target {
                return Ok(spec);
            }
        }
        Err(GeometryError::TargetUnreachable {
            target,
            max_layers: MAX_LAYERS,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Interior,
    /// On the scatterer boundary `r = a`.
    Dirichlet,
    /// On the artificial boundary `r = R`.
    Artificial,
}

impl EdgeKind {
    pub fn label(self) -> &'static str {
        match self {
            EdgeKind::Interior => "interior",
            EdgeKind::Dirichlet => "dirichlet",
            EdgeKind::Artificial => "artificial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeShape {
    Segment { start: Vec2, end: Vec2 },
    /// Counter-clockwise arc of the circle of radius `radius`.
    Arc {
        radius: f64,
        theta_start: f64,
        theta_span: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub kind: EdgeKind,
    /// The first element defines the normal orientation; the second is
    /// present only on interior edges.
    pub elements: (usize, Option<usize>),
    pub shape: EdgeShape,
    /// Unit normal pointing out of the first element (straight edges only).
    normal: Vec2,
}

impl Edge {
    /// Unit normal at a point of the edge, outward from the first element.
    pub fn normal_at(&self, point: Vec2) -> Vec2 {
        match (self.shape, self.kind) {
            (EdgeShape::Segment { .. }, _) => self.normal,
            (EdgeShape::Arc { .. }, EdgeKind::Dirichlet) => -point.unit(),
            (EdgeShape::Arc { .. }, _) => point.unit(),
        }
    }

    pub fn length(&self) -> f64 {
        match self.shape {
            EdgeShape::Segment { start, end } => (end - start).norm(),
            EdgeShape::Arc {
                radius, theta_span, ..
            } => radius * theta_span,
        }
    }

    pub fn is_boundary(&self) -> bool {
        self.kind != EdgeKind::Interior
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    /// Counter-clockwise vertex indices.
    pub vertices: [usize; 3],
    /// Local edge `e` joins local vertices `e` and `e + 1 (mod 3)`.
    pub edges: [usize; 3],
    /// Kind of the curved edge, if the element touches `r = a` or `r = R`.
    pub curved: Option<EdgeKind>,
    pub layer: usize,
    pub sector: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub spec: AnnulusMeshSpec,
    pub vertices: Vec<Vec2>,
    pub elements: Vec<Element>,
    pub edges: Vec<Edge>,
    /// Largest diameter of the smallest circle enclosing an element.
    pub h: f64,
}

pub fn build_annulus_mesh(spec: AnnulusMeshSpec) -> Result<Mesh, GeometryError> {
    spec.validate()?;
    let (a, big_r) = (spec.inner_radius, spec.outer_radius);
    let (nl, ns) = (spec.n_layers, spec.n_sectors);
    let dr = (big_r - a) / nl as f64;
    let dtheta = TAU / ns as f64;

    let vid = |i: usize, j: usize| i * ns + j % ns;
    let mut vertices = Vec::with_capacity((nl + 1) * ns);
    for i in 0..=nl {
        let r = if i == nl { big_r } else { a + i as f64 * dr };
        for j in 0..ns {
            vertices.push(Vec2::from_polar(r, j as f64 * dtheta));
        }
    }

    let mut elements = Vec::with_capacity(2 * nl * ns);
    for i in 0..nl {
        for j in 0..ns {
            let lower_curved = (i == 0).then_some(EdgeKind::Dirichlet);
            let upper_curved = (i + 1 == nl).then_some(EdgeKind::Artificial);
            elements.push(Element {
                vertices: [vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)],
                edges: [usize::MAX; 3],
                curved: lower_curved,
                layer: i,
                sector: j,
            });
            elements.push(Element {
                vertices: [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)],
                edges: [usize::MAX; 3],
                curved: upper_curved,
                layer: i,
                sector: j,
            });
        }
    }

    let mut edges: Vec<Edge> = Vec::with_capacity(3 * nl * ns + ns);
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
    for (eid, el) in elements.iter_mut().enumerate() {
        for local in 0..3 {
            let (v0, v1) = (el.vertices[local], el.vertices[(local + 1) % 3]);
            let key = (v0.min(v1), v0.max(v1));
            if let Some(&existing) = lookup.get(&key) {
                edges[existing].elements.1 = Some(eid);
                el.edges[local] = existing;
                continue;
            }
            let ring0 = v0 / ns;
            let same_ring = ring0 == v1 / ns;
            let kind = match (same_ring, ring0) {
                (true, 0) => EdgeKind::Dirichlet,
                (true, r) if r == nl => EdgeKind::Artificial,
                _ => EdgeKind::Interior,
            };
            let (p0, p1) = (vertices[v0], vertices[v1]);
            let shape = if kind == EdgeKind::Interior {
                EdgeShape::Segment { start: p0, end: p1 }
            } else {
                // sector index of the arc start is the smaller angle modulo wrap
                let (s0, s1) = (v0 % ns, v1 % ns);
                let start = if (s0 + 1) % ns == s1 { s0 } else { s1 };
                EdgeShape::Arc {
                    radius: if kind == EdgeKind::Dirichlet { a } else { big_r },
                    theta_start: start as f64 * dtheta,
                    theta_span: dtheta,
                }
            };
            // counter-clockwise vertex order puts the outward normal on the right
            let t = (p1 - p0).unit();
            let normal = Vec2::new(t.y, -t.x);
            lookup.insert(key, edges.len());
            el.edges[local] = edges.len();
            edges.push(Edge {
                kind,
                elements: (eid, None),
                shape,
                normal,
            });
        }
    }

    let h = elements
        .iter()
        .map(|el| enclosing_diameter(&element_outline(&vertices, &edges, el)))
        .fold(0.0, f64::max);

    Ok(Mesh {
        spec,
        vertices,
        elements,
        edges,
        h,
    })
}

/// Boundary sample points of an element, including interior points of a
/// curved edge.
fn element_outline(vertices: &[Vec2], edges: &[Edge], el: &Element) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = el.vertices.iter().map(|&v| vertices[v]).collect();
    for &e in &el.edges {
        if let EdgeShape::Arc {
            radius,
            theta_start,
            theta_span,
        } = edges[e].shape
        {
            const SAMPLES: usize = 32;
            for s in 1..SAMPLES {
                let t = theta_start + theta_span * s as f64 / SAMPLES as f64;
                pts.push(Vec2::from_polar(radius, t));
            }
        }
    }
    pts
}

fn estimate_h(spec: &AnnulusMeshSpec) -> f64 {
    // one sector column covers every element shape of the structured mesh
    let (a, big_r) = (spec.inner_radius, spec.outer_radius);
    let dr = (big_r - a) / spec.n_layers as f64;
    let dtheta = TAU / spec.n_sectors as f64;
    let mut h: f64 = 0.0;
    for i in 0..spec.n_layers {
        let r0 = a + i as f64 * dr;
        let r1 = if i + 1 == spec.n_layers { big_r } else { r0 + dr };
        let p = |r: f64, t: f64| Vec2::from_polar(r, t);
        let mut lower = vec![p(r0, 0.0), p(r1, dtheta), p(r0, dtheta)];
        let mut upper = vec![p(r0, 0.0), p(r1, 0.0), p(r1, dtheta)];
        for s in 1..32 {
            let t = dtheta * s as f64 / 32.0;
            if i == 0 {
                lower.push(p(a, t));
            }
            if i + 1 == spec.n_layers {
                upper.push(p(big_r, t));
            }
        }
        h = h.max(enclosing_diameter(&lower)).max(enclosing_diameter(&upper));
    }
    h
}

/// Diameter of the minimal enclosing circle (incremental Welzl).
fn enclosing_diameter(points: &[Vec2]) -> f64 {
    let contains = |c: (Vec2, f64), p: Vec2| (p - c.0).norm() <= c.1 * (1.0 + 1e-12) + 1e-15;
    let two = |p: Vec2, q: Vec2| ((p + q) * 0.5, (p - q).norm() * 0.5);
    let three = |p: Vec2, q: Vec2, s: Vec2| {
        let (b, c) = (q - p, s - p);
        let d = 2.0 * b.cross(c);
        if d.abs() < 1e-300 {
            // collinear: widest pair
            let cands = [two(p, q), two(p, s), two(q, s)];
            return cands.into_iter().fold(cands[0], |m, c| if c.1 > m.1 { c } else { m });
        }
        let ux = (c.y * b.dot(b) - b.y * c.dot(c)) / d;
        let uy = (b.x * c.dot(c) - c.x * b.dot(b)) / d;
        let center = p + Vec2::new(ux, uy);
        (center, (center - p).norm())
    };
    let mut c = (points[0], 0.0);
    for i in 1..points.len() {
        if contains(c, points[i]) {
            continue;
        }
        c = (points[i], 0.0);
        for j in 0..i {
            if contains(c, points[j]) {
                continue;
            }
            c = two(points[i], points[j]);
            for l in 0..j {
                if !contains(c, points[l]) {
                    c = three(points[i], points[j], points[l]);
                }
            }
        }
    }
    2.0 * c.1
}

impl Mesh {
    pub fn edges_of_kind(&self, kind: EdgeKind) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.kind == kind)
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges_of_kind(kind).count()
    }

    /// Elements owning at least one edge of the given kind.
    pub fn elements_touching(&self, kind: EdgeKind) -> Vec<usize> {
        let mut out: Vec<usize> = self.edges_of_kind(kind).map(|(_, e)| e.elements.0).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether every straight edge stays outside the scatterer, which the
    /// point-location test relies on. Fails only for very coarse angular
    /// resolution, e.g. one layer with four sectors.
    pub fn is_conforming(&self) -> bool {
        let s = &self.spec;
        let dr = (s.outer_radius - s.inner_radius) / s.n_layers as f64;
        let r1 = if s.n_layers == 1 {
            s.outer_radius
        } else {
            s.inner_radius + dr
        };
        r1 * (TAU / s.n_sectors as f64).cos() >= s.inner_radius
    }

    fn contains(&self, element: usize, p: Vec2, tol: f64) -> bool {
        let el = &self.elements[element];
        el.edges.iter().enumerate().all(|(local, &eid)| {
            let edge = &self.edges[eid];
            match edge.kind {
                EdgeKind::Dirichlet => p.norm() >= self.spec.inner_radius - tol,
                EdgeKind::Artificial => p.norm() <= self.spec.outer_radius + tol,
                EdgeKind::Interior => {
                    let a = self.vertices[el.vertices[local]];
                    let b = self.vertices[el.vertices[(local + 1) % 3]];
                    (b - a).cross(p - a) >= -tol * (b - a).norm()
                }
            }
        })
    }

    /// Element containing `p`, found by ring/sector index arithmetic.
    pub fn locate(&self, p: Vec2) -> Option<usize> {
        let s = &self.spec;
        let r = p.norm();
        let tol = 1e-12 * s.outer_radius;
        if r < s.inner_radius - tol || r > s.outer_radius + tol {
            return None;
        }
        let ns = s.n_sectors as isize;
        let nl = s.n_layers as isize;
        let dtheta = TAU / s.n_sectors as f64;
        let dr = (s.outer_radius - s.inner_radius) / s.n_layers as f64;
        let sector = ((p.angle() / dtheta).floor() as isize).min(ns - 1);
        let layer = (((r - s.inner_radius) / dr).floor() as isize).clamp(0, nl - 1);
        for ds in [0, -1, 1] {
            let j = (sector + ds).rem_euclid(ns);
            for dl in [0, -1, 1] {
                let i = layer + dl;
                if i < 0 || i >= nl {
                    continue;
                }
                let base = 2 * (i * ns + j) as usize;
                for cand in [base, base + 1] {
                    if self.contains(cand, p, tol) {
                        return Some(cand);
                    }
                }
            }
        }
        None
    }

    /// Plain-text listing of vertices, elements and edges.
    pub fn write_dump<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let s = &self.spec;
        writeln!(out, "# pwdg annulus mesh v1")?;
        writeln!(out, "# params: a R n_layers n_sectors h")?;
        writeln!(out, "# vertex: id x y")?;
        writeln!(out, "# element: id v0 v1 v2 e0 e1 e2 curved(none|dirichlet|artificial)")?;
        writeln!(out, "# edge: id kind elem0 elem1(-1 if none) segment x0 y0 x1 y1 | arc radius theta_start theta_span")?;
        writeln!(
            out,
            "params {} {} {} {} {}",
            s.inner_radius, s.outer_radius, s.n_layers, s.n_sectors, self.h
        )?;
        writeln!(out, "vertices {}", self.vertices.len())?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(out, "{i} {} {}", v.x, v.y)?;
        }
        writeln!(out, "elements {}", self.elements.len())?;
        for (i, el) in self.elements.iter().enumerate() {
            writeln!(
                out,
                "{i} {} {} {} {} {} {} {}",
                el.vertices[0],
                el.vertices[1],
                el.vertices[2],
                el.edges[0],
                el.edges[1],
                el.edges[2],
                el.curved.map_or("none", EdgeKind::label)
            )?;
        }
        writeln!(out, "edges {}", self.edges.len())?;
        for (i, e) in self.edges.iter().enumerate() {
            let second = e.elements.1.map_or(-1, |v| v as i64);
            match e.shape {
                EdgeShape::Segment { start, end } => writeln!(
                    out,
                    "{i} {} {} {second} segment {} {} {} {}",
                    e.kind.label(),
                    e.elements.0,
                    start.x,
                    start.y,
                    end.x,
                    end.y
                )?,
                EdgeShape::Arc {
                    radius,
                    theta_start,
                    theta_span,
                } => writeln!(
                    out,
                    "{i} {} {} {second} arc {radius} {theta_start} {theta_span}",
                    e.kind.label(),
                    e.elements.0
                )?,
            }
        }
        Ok(())
    }
}

/// Nodes and weights on the reference interval `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    /// `n`-point Gauss–Legendre rule, checked against the exact monomial
    /// integrals up to degree `2n − 1`.
    pub fn gauss_legendre(n: usize) -> Result<Self, GeometryError> {
        if n < 1 {
            return Err(GeometryError::TooFewPoints { min: 1, got: n });
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let rule = QuadratureRule {
            nodes,
            weights,
            degree: 2 * n - 1,
        };
        rule.check_exactness()?;
        Ok(rule)
    }

    fn check_exactness(&self) -> Result<(), GeometryError> {
        let n = self.nodes.len();
        for d in 0..=self.degree {
            let approx: f64 = self
                .nodes
                .iter()
                .zip(&self.weights)
                .map(|(x, w)| w * x.powi(d as i32))
                .sum();
            let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
            if (approx - exact).abs() > 1e-12 * exact.abs().max(1.0) {
                return Err(GeometryError::Exactness { n, degree: d });
            }
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(GeometryError::Exactness { n, degree: 0 });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature rule mapped onto one mesh edge.
#[derive(Debug, Clone)]
pub struct EdgeQuadrature {
    pub points: Vec<Vec2>,
    /// Arc-length weights.
    pub weights: Vec<f64>,
    /// Unit normals outward from the edge's first element.
    pub normals: Vec<Vec2>,
    /// Polar angles of the points in `[0, 2π)`.
    pub angles: Vec<f64>,
}

pub fn edge_quadrature(edge: &Edge, rule: &QuadratureRule) -> EdgeQuadrature {
    let n = rule.len();
    let mut q = EdgeQuadrature {
        points: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        angles: Vec::with_capacity(n),
    };
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let s = 0.5 * (t + 1.0);
        let (p, jac) = match edge.shape {
            EdgeShape::Segment { start, end } => (start + (end - start) * s, 0.5 * (end - start).norm()),
            EdgeShape::Arc {
                radius,
                theta_start,
                theta_span,
            } => (
                Vec2::from_polar(radius, theta_start + theta_span * s),
                0.5 * radius * theta_span,
            ),
        };
        q.points.push(p);
        q.weights.push(w * jac);
        q.normals.push(edge.normal_at(p));
        q.angles.push(p.angle());
    }
    q
}

/// Convenience wrapper building a fresh Gauss–Legendre rule.
pub fn edge_quadrature_n(edge: &Edge, n_points: usize) -> Result<EdgeQuadrature, GeometryError> {
    Ok(edge_quadrature(edge, &QuadratureRule::gauss_legendre(n_points)?))
}

/// Tensor rule over the whole annulus: Gauss–Legendre in `r` and the
/// (spectrally accurate) periodic trapezoid rule in `θ`, with `r dr dθ`
/// folded into the weights.
#[derive(Debug, Clone)]
pub struct AnnulusQuadrature {
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
    /// Weight for node `(i_r, i_t)` is `radial_weights[i_r] * angle_weight`.
    pub radial_weights: Vec<f64>,
    pub angle_weight: f64,
}

impl AnnulusQuadrature {
    pub fn len(&self) -> usize {
        self.radii.len() * self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weights in the order of [`AnnulusQuadrature::nodes`].
    pub fn weights(&self) -> Vec<f64> {
        self.nodes().map(|n| n.3).collect()
    }

    /// Iterates `(r, θ, point, weight)` radius-major.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, Vec2, f64)> + '_ {
        self.radii.iter().zip(&self.radial_weights).flat_map(move |(&r, &wr)| {
            self.angles
                .iter()
                .map(move |&t| (r, t, Vec2::from_polar(r, t), wr * self.angle_weight))
        })
    }
}

pub fn annulus_l2_quadrature(a: f64, big_r: f64, n_r: usize, n_t: usize) -> Result<AnnulusQuadrature, GeometryError> {
    if !(a > 0.0 && a < big_r) {
        return Err(GeometryError::InvalidRadii { a, outer: big_r });
    }
    if n_r < 4 || n_t < 4 {
        return Err(GeometryError::TooFewPoints {
            min: 4,
            got: n_r.min(n_t),
        });
    }
    let gl = QuadratureRule::gauss_legendre(n_r)?;
    let half = 0.5 * (big_r - a);
    let mid = 0.5 * (big_r + a);
    let radii: Vec<f64> = gl.nodes.iter().map(|t| mid + half * t).collect();
    let radial_weights = gl.weights.iter().zip(&radii).map(|(w, r)| w * half * r).collect();
    // half-step offset keeps nodes off the sector lines
    let angles = (0..n_t).map(|i| TAU * (i as f64 + 0.5) / n_t as f64).collect();
    Ok(AnnulusQuadrature {
        radii,
        angles,
        radial_weights,
        angle_weight: TAU / n_t as f64,
    })
}

/// Mesh-conforming rule for integrals over the annulus: every element is
/// swept by rays from one vertex to the opposite (possibly curved) edge,
/// with Gauss–Legendre points along the edge and along each ray. The
/// rule is exact in geometry and stays accurate for integrands that jump
/// across element boundaries.
#[derive(Debug, Clone)]
pub struct ElementQuadrature {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
    /// Element containing each point.
    pub elements: Vec<usize>,
}

impl ElementQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n x n` points per element.
pub fn element_l2_quadrature(mesh: &Mesh, n: usize) -> Result<ElementQuadrature, GeometryError> {
    let gl = QuadratureRule::gauss_legendre(n)?;
    let unit: Vec<(f64, f64)> = gl.nodes.iter().zip(&gl.weights).map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    let total = mesh.elements.len() * n * n;
    let mut q = ElementQuadrature {
        points: Vec::with_capacity(total),
        weights: Vec::with_capacity(total),
        elements: Vec::with_capacity(total),
    };
    for (id, el) in mesh.elements.iter().enumerate() {
        // sweep from the vertex opposite the curved edge, if any
        let local = (0..3)
            .find(|&e| mesh.edges[el.edges[e]].is_boundary() && el.curved.is_some())
            .unwrap_or(0);
        let apex = mesh.vertices[el.vertices[(local + 2) % 3]];
        let shape = mesh.edges[el.edges[local]].shape;
        for &(s, ws) in &unit {
            let (g, dg) = match shape {
                EdgeShape::Segment { start, end } => (start + (end - start) * s, end - start),
                EdgeShape::Arc {
                    radius,
                    theta_start,
                    theta_span,
                } => {
                    let th = theta_start + theta_span * s;
                    (
                        Vec2::from_polar(radius, th),
                        Vec2::new(-th.sin(), th.cos()) * (radius * theta_span),
                    )
                }
            };
            let jac = (g - apex).cross(dg).abs();
            for &(t, wt) in &unit {
                q.points.push(apex + (g - apex) * t);
                q.weights.push(ws * wt * t * jac);
                q.elements.push(id);
            }
        }
    }
    Ok(q)
}

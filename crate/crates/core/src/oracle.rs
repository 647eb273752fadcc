//! Reference solutions for scattering by a sound-soft disc: the Mie
//! series, the exact solution of the truncated boundary value problem,
//! and relative L² errors of discrete solutions.
//!
//! Reference fields are stored as Fourier modes `u(r, θ) = Σ u_m(r) e^{imθ}`
//! with `|m| <= M`.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

use crate::basis::PlaneWaveSpace;
use crate::geometry::{AnnulusQuadrature, Mesh, Vec2};
use crate::specfun::{BesselTable, Scaled, SpecfunError, MAX_ORDER};

/// Default Mie truncation order.
pub const DEFAULT_EXACT_ORDER: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("radius {r} lies inside the scatterer of radius {a}")]
    InsideScatterer { r: f64, a: f64 },
    #[error("series order {order} is below the required {required}")]
    OrderTooLow { order: usize, required: usize },
    #[error("mode system for m = {m} is singular (resonance)")]
    Resonance { m: i64 },
    #[error("no mesh element contains ({x}, {y})")]
    PointLocation { x: f64, y: f64 },
    #[error("reference field has zero norm")]
    ZeroReference,
    #[error("invalid geometry: a = {a}, R = {outer}")]
    InvalidRadii { a: f64, outer: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

/// `e^{ik x·d}`.
pub fn incident_wave(k: f64, direction: Vec2, x: Vec2) -> Complex64 {
    Complex64::from_polar(1.0, k * x.dot(direction))
}

/// Complex value `z · 2^e`, enough to form ratios of Bessel products
/// whose factors over- or underflow individually.
#[derive(Debug, Clone, Copy)]
struct ScaledComplex {
    z: Complex64,
    e: i32,
}

impl ScaledComplex {
    fn real(s: Scaled) -> Self {
        ScaledComplex {
            z: Complex64::new(s.mantissa(), 0.0),
            e: s.exponent(),
        }
    }

    fn new(z: Complex64, e: i32) -> Self {
        ScaledComplex { z, e }.normalised()
    }

    fn normalised(self) -> Self {
        let m = self.z.re.abs().max(self.z.im.abs());
        if m == 0.0 || !m.is_finite() {
            return ScaledComplex { z: self.z, e: 0 };
        }
        let shift = m.log2().floor() as i32;
        ScaledComplex {
            z: self.z * 2f64.powi(-shift),
            e: self.e + shift,
        }
    }

    fn mul(self, o: ScaledComplex) -> Self {
        ScaledComplex::new(self.z * o.z, self.e + o.e)
    }

    fn scale(self, c: Complex64) -> Self {
        ScaledComplex::new(self.z * c, self.e)
    }

    fn add(self, o: ScaledComplex) -> Self {
        if self.z == Complex64::new(0.0, 0.0) {
            return o;
        }
        if o.z == Complex64::new(0.0, 0.0) {
            return self;
        }
        let e = self.e.max(o.e);
        let shift = |s: ScaledComplex| s.z * 2f64.powi((s.e - e).max(-1100));
        ScaledComplex::new(shift(self) + shift(o), e)
    }

    fn magnitude_log2(self) -> f64 {
        if self.z == Complex64::new(0.0, 0.0) {
            f64::NEG_INFINITY
        } else {
            self.z.norm().log2() + self.e as f64
        }
    }

    fn div(self, o: ScaledComplex) -> Self {
        ScaledComplex::new(self.z / o.z, self.e - o.e)
    }

    fn to_complex(self) -> Complex64 {
        ldexp_complex(self.z, self.e)
    }

    /// `self · s` as a plain complex number.
    fn times(self, s: Scaled) -> Complex64 {
        ldexp_complex(self.z * s.mantissa(), self.e + s.exponent())
    }
}

fn ldexp_complex(z: Complex64, e: i32) -> Complex64 {
    if e < -1100 || z == Complex64::new(0.0, 0.0) {
        return Complex64::new(0.0, 0.0);
    }
    // split the power so neither factor leaves the normal range
    let e = e.min(1100);
    let half = e / 2;
    z * pow2(half) * pow2(e - half)
}

fn pow2(e: i32) -> f64 {
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// `J_m`, `Y_m` and their derivatives at one argument, scaled.
struct ModeValues {
    j: ScaledComplex,
    y: ScaledComplex,
    dj: ScaledComplex,
    dy: ScaledComplex,
}

fn mode_values(table: &BesselTable, m: usize) -> ModeValues {
    let (jm, ym) = (table.j(m), table.y(m));
    let (jp, yp) = (table.j(m + 1), table.y(m + 1));
    let (dj, dy) = if m == 0 {
        (jp.neg(), yp.neg())
    } else {
        let (jl, yl) = (table.j(m - 1), table.y(m - 1));
        (jl.sub(jp).mul_f64(0.5), yl.sub(yp).mul_f64(0.5))
    };
    ModeValues {
        j: ScaledComplex::real(jm),
        y: ScaledComplex::real(ym),
        dj: ScaledComplex::real(dj),
        dy: ScaledComplex::real(dy),
    }
}

fn hankel(v: &ModeValues) -> ScaledComplex {
    v.j.add(v.y.scale(Complex64::new(0.0, -1.0)))
}

/// `Σ_m (A_m J_|m|(kr) + B_m Y_|m|(kr)) e^{imθ}` with scaled
/// coefficients, so that tiny `A_m` meeting huge `Y_m` never overflows.
#[derive(Debug, Clone)]
struct CylindricalModes {
    order: usize,
    k: f64,
    a: Vec<ScaledComplex>,
    b: Vec<ScaledComplex>,
}

impl CylindricalModes {
    fn index(&self, m: i64) -> usize {
        (m + self.order as i64) as usize
    }

    fn modes_from_table(&self, table: &BesselTable) -> Vec<Complex64> {
        let m_max = self.order as i64;
        (-m_max..=m_max)
            .map(|m| {
                let n = m.unsigned_abs() as usize;
                let i = self.index(m);
                self.a[i].times(table.j(n)) + self.b[i].times(table.y(n))
            })
            .collect()
    }

    /// `(u_m(r), d/dr u_m(r))`.
    fn mode(&self, m: i64, r: f64) -> Result<(Complex64, Complex64), OracleError> {
        let n = m.unsigned_abs() as usize;
        let table = BesselTable::new(n as u32 + 1, self.k * r)?;
        let v = mode_values(&table, n);
        let i = self.index(m);
        let (a, b) = (self.a[i], self.b[i]);
        let val = a.mul(v.j).add(b.mul(v.y));
        let der = a.mul(v.dj).add(b.mul(v.dy));
        Ok((val.to_complex(), der.to_complex() * self.k))
    }
}

/// A reference field given mode by mode.
pub trait ModalField {
    /// Largest `|m|` carried by the field.
    fn max_mode(&self) -> usize;

    /// `u_m(r)` for `m = -M..=M`, at index `m + M`.
    fn modes_at(&self, r: f64) -> Result<Vec<Complex64>, OracleError>;

    fn evaluate(&self, r: f64, theta: f64) -> Result<Complex64, OracleError> {
        Ok(sum_modes(&self.modes_at(r)?, theta))
    }
}

fn sum_modes(modes: &[Complex64], theta: f64) -> Complex64 {
    let m_max = (modes.len() / 2) as f64;
    let step = Complex64::from_polar(1.0, theta);
    let mut phase = Complex64::from_polar(1.0, -m_max * theta);
    let mut total = Complex64::new(0.0, 0.0);
    for (i, u) in modes.iter().enumerate() {
        // restart the phase periodically to bound round-off growth
        if i % 32 == 0 {
            phase = Complex64::from_polar(1.0, (i as f64 - m_max) * theta);
        }
        total += u * phase;
        phase *= step;
    }
    total
}

/// Values of a modal field at every node of an annulus quadrature,
/// radius-major like [`AnnulusQuadrature::nodes`].
pub fn evaluate_on_quadrature(field: &dyn ModalField, quad: &AnnulusQuadrature) -> Result<Vec<Complex64>, OracleError> {
    let mut out = Vec::with_capacity(quad.len());
    for &r in &quad.radii {
        let modes = field.modes_at(r)?;
        for &t in &quad.angles {
            out.push(sum_modes(&modes, t));
        }
    }
    Ok(out)
}

/// Values of a modal field at arbitrary points in the annulus.
pub fn evaluate_at_points(field: &dyn ModalField, points: &[Vec2]) -> Result<Vec<Complex64>, OracleError> {
    points.iter().map(|x| field.evaluate(x.norm(), x.angle())).collect()
}

/// `-i^|m| e^{-imφ_d}`, the factor of `J_|m|(ka)` in the Fourier modes of
/// `-e^{ik x·d}` on `r = a`.
fn data_phase(m: i64, direction_angle: f64) -> Complex64 {
    -Complex64::from_polar(1.0, FRAC_PI_2 * m.unsigned_abs() as f64 - m as f64 * direction_angle)
}

/// Exact scattered field of a plane wave `e^{ik x·d}` hitting the
/// sound-soft disc `r < a`.
#[derive(Debug, Clone)]
pub struct MieSeries {
    pub k: f64,
    pub a: f64,
    pub direction_angle: f64,
    modes: CylindricalModes,
}

impl MieSeries {
    pub fn new(k: f64, a: f64, direction_angle: f64, order: usize) -> Result<Self, OracleError> {
        let required = Self::minimum_order(k, a);
        if order < required {
            return Err(OracleError::OrderTooLow { order, required });
        }
        if order > MAX_ORDER as usize - 1 {
            return Err(SpecfunError::Domain {
                order: order as i64,
                x: k * a,
            }
            .into());
        }
        let table = BesselTable::new(order as u32 + 1, k * a)?;
        let m_max = order as i64;
        let mut coef_a = Vec::with_capacity(2 * order + 1);
        let mut coef_b = Vec::with_capacity(2 * order + 1);
        for m in -m_max..=m_max {
            let n = m.unsigned_abs() as usize;
            // g_m H_m(kr) / H_m(ka)
            let c = ScaledComplex::real(table.j(n))
                .div(hankel(&mode_values(&table, n)))
                .scale(data_phase(m, direction_angle));
            coef_a.push(c);
            coef_b.push(c.scale(Complex64::new(0.0, -1.0)));
        }
        Ok(MieSeries {
            k,
            a,
            direction_angle,
            modes: CylindricalModes {
                order,
                k,
                a: coef_a,
                b: coef_b,
            },
        })
    }

    /// Default order, raised when `ka` requires it.
    pub fn with_default_order(k: f64, a: f64, direction_angle: f64) -> Result<Self, OracleError> {
        Self::new(k, a, direction_angle, DEFAULT_EXACT_ORDER.max(Self::minimum_order(k, a)))
    }

    /// `ceil(1.5 ka + 30)`.
    pub fn minimum_order(k: f64, a: f64) -> usize {
        (1.5 * k * a + 30.0).ceil() as usize
    }

    pub fn order(&self) -> usize {
        self.modes.order
    }

    pub fn direction(&self) -> Vec2 {
        Vec2::from_polar(1.0, self.direction_angle)
    }

    /// `(u_m(r), d/dr u_m(r))`.
    pub fn mode(&self, m: i64, r: f64) -> Result<(Complex64, Complex64), OracleError> {
        if r < self.a {
            return Err(OracleError::InsideScatterer { r, a: self.a });
        }
        self.modes.mode(m, r)
    }
}

impl ModalField for MieSeries {
    fn max_mode(&self) -> usize {
        self.modes.order
    }

    fn modes_at(&self, r: f64) -> Result<Vec<Complex64>, OracleError> {
        if r < self.a {
            return Err(OracleError::InsideScatterer { r, a: self.a });
        }
        let table = BesselTable::new(self.modes.order as u32 + 1, self.k * r)?;
        Ok(self.modes.modes_from_table(&table))
    }
}

/// `u^s(r, θ)` from the Mie series.
pub fn exact_scattered_field(series: &MieSeries, r: f64, theta: f64) -> Result<Complex64, OracleError> {
    series.evaluate(r, theta)
}

/// How the artificial boundary acts on one mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeCondition {
    /// `u_m'(R) = ζ_m u_m(R)`: the outgoing Hankel mode.
    Outgoing,
    /// `u_m'(R) = 0`, for modes annihilated by the truncated map.
    Neumann,
    /// `u_m'(R) = -ik u_m(R)`.
    Impedance,
}

/// Exact solution of the annulus problem with data `g = -u^inc` on
/// `r = a` and the truncated DtN (or impedance) condition on `r = R`.
/// Each mode is `g_m (c1 J_m(kr) + c2 Y_m(kr)) / D_m`, where `(c1, c2)`
/// satisfies the condition at `R` and `D_m` normalises the value at `a`.
#[derive(Debug, Clone)]
pub struct TruncatedModeReference {
    pub k: f64,
    pub a: f64,
    pub radius: f64,
    pub truncation: Option<usize>,
    g: Vec<Complex64>,
    conditions: Vec<ModeCondition>,
    modes: CylindricalModes,
}

impl TruncatedModeReference {
    /// `truncation = Some(N)` for the DtN condition with `|m| <= N`,
    /// `None` for the impedance condition. `order` is the number of
    /// modes kept for the data.
    pub fn new(
        k: f64,
        a: f64,
        radius: f64,
        direction_angle: f64,
        truncation: Option<usize>,
        order: usize,
    ) -> Result<Self, OracleError> {
        if !(a > 0.0 && a < radius) {
            return Err(OracleError::InvalidRadii { a, outer: radius });
        }
        let required = MieSeries::minimum_order(k, a);
        if order < required {
            return Err(OracleError::OrderTooLow { order, required });
        }
        let table_a = BesselTable::new(order as u32 + 1, k * a)?;
        let table_r = BesselTable::new(order as u32 + 1, k * radius)?;
        let m_max = order as i64;
        let mut g = Vec::with_capacity(2 * order + 1);
        let mut conditions = Vec::with_capacity(2 * order + 1);
        let mut coef_a = Vec::with_capacity(2 * order + 1);
        let mut coef_b = Vec::with_capacity(2 * order + 1);
        for m in -m_max..=m_max {
            let n = m.unsigned_abs() as usize;
            let cond = match truncation {
                Some(nt) if n <= nt => ModeCondition::Outgoing,
                Some(_) => ModeCondition::Neumann,
                None => ModeCondition::Impedance,
            };
            let va = mode_values(&table_a, n);
            let vr = mode_values(&table_r, n);
            // (c1, c2) annihilates the boundary functional at R
            let (c1, c2) = match cond {
                ModeCondition::Outgoing => (
                    ScaledComplex::new(Complex64::new(1.0, 0.0), 0),
                    ScaledComplex::new(Complex64::new(0.0, -1.0), 0),
                ),
                ModeCondition::Neumann => (vr.dy, vr.dj.scale(Complex64::new(-1.0, 0.0))),
                ModeCondition::Impedance => {
                    let i = Complex64::new(0.0, 1.0);
                    let bj = vr.dj.add(vr.j.scale(i));
                    let by = vr.dy.add(vr.y.scale(i));
                    (by, bj.scale(Complex64::new(-1.0, 0.0)))
                }
            };
            let d = c1.mul(va.j).add(c2.mul(va.y));
            let size = c1.mul(va.j).magnitude_log2().max(c2.mul(va.y).magnitude_log2());
            if d.z == Complex64::new(0.0, 0.0) || d.magnitude_log2() < size - 45.0 {
                return Err(OracleError::Resonance { m });
            }
            // g_m = phase · J_m(ka), kept scaled
            let phase = data_phase(m, direction_angle);
            let gm = ScaledComplex::real(table_a.j(n)).scale(phase);
            g.push(gm.to_complex());
            conditions.push(cond);
            coef_a.push(gm.mul(c1).div(d));
            coef_b.push(gm.mul(c2).div(d));
        }
        Ok(TruncatedModeReference {
            k,
            a,
            radius,
            truncation,
            g,
            conditions,
            modes: CylindricalModes {
                order,
                k,
                a: coef_a,
                b: coef_b,
            },
        })
    }

    pub fn condition(&self, m: i64) -> ModeCondition {
        self.conditions[self.modes.index(m)]
    }

    /// Dirichlet data mode `g_m`.
    pub fn data_mode(&self, m: i64) -> Complex64 {
        self.g[self.modes.index(m)]
    }

    /// `(u_m(r), d/dr u_m(r))`.
    pub fn mode(&self, m: i64, r: f64) -> Result<(Complex64, Complex64), OracleError> {
        if r < self.a {
            return Err(OracleError::InsideScatterer { r, a: self.a });
        }
        self.modes.mode(m, r)
    }
}

impl ModalField for TruncatedModeReference {
    fn max_mode(&self) -> usize {
        self.modes.order
    }

    fn modes_at(&self, r: f64) -> Result<Vec<Complex64>, OracleError> {
        if r < self.a {
            return Err(OracleError::InsideScatterer { r, a: self.a });
        }
        let table = BesselTable::new(self.modes.order as u32 + 1, self.k * r)?;
        Ok(self.modes.modes_from_table(&table))
    }
}

/// A PWDG coefficient vector together with its mesh and space.
#[derive(Debug, Clone, Copy)]
pub struct DiscreteSolution<'a> {
    pub mesh: &'a Mesh,
    pub space: &'a PlaneWaveSpace,
    pub k: f64,
    pub coefficients: &'a [Complex64],
}

impl DiscreteSolution<'_> {
    pub fn evaluate(&self, x: Vec2) -> Result<Complex64, OracleError> {
        let e = self
            .mesh
            .locate(x)
            .ok_or(OracleError::PointLocation { x: x.x, y: x.y })?;
        Ok(self.space.eval_on_element(self.k, self.coefficients, e, x))
    }

    /// Values at points whose elements are already known.
    pub fn values_in_elements(&self, points: &[Vec2], elements: &[usize]) -> Vec<Complex64> {
        points
            .iter()
            .zip(elements)
            .map(|(x, &e)| self.space.eval_on_element(self.k, self.coefficients, e, *x))
            .collect()
    }

    pub fn values_at(&self, points: &[Vec2]) -> Result<Vec<Complex64>, OracleError> {
        points.iter().map(|x| self.evaluate(*x)).collect()
    }
}

/// `‖u_h − ref‖ / ‖ref‖` in L², from values at quadrature nodes with the
/// given weights.
pub fn relative_l2_error(u_h: &[Complex64], reference: &[Complex64], weights: &[f64]) -> Result<f64, OracleError> {
    for len in [u_h.len(), reference.len()] {
        if len != weights.len() {
            return Err(OracleError::Dimension {
                expected: weights.len(),
                got: len,
            });
        }
    }
    let (mut num, mut den) = (0.0, 0.0);
    for ((w, u), r) in weights.iter().zip(u_h).zip(reference) {
        num += w * (u - r).norm_sqr();
        den += w * r.norm_sqr();
    }
    if den == 0.0 {
        return Err(OracleError::ZeroReference);
    }
    Ok((num / den).sqrt())
}

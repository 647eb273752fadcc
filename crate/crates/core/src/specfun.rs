//! Integer-order Bessel and Hankel functions of real argument, and the
//! Dirichlet-to-Neumann symbols built from them.
//!
//! `J_n` is computed by Miller's downward recurrence normalised with
//! `J_0 + 2 Σ J_{2k} = 1`. `Y_0` and `Y_1` come from the Neumann series in
//! the Miller sequence and `Y_n` follows by upward recurrence. All
//! sequences are carried in a mantissa/exponent form ([`Scaled`]) so that
//! `J_200(0.1)` or `Y_150(0.5)` never leave the representable range while
//! ratios such as `H'_m / H_m` are formed.

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Complex values returned by the special-function kernels.
pub type ComplexValue = Complex64;

/// Largest supported |order|.
pub const MAX_ORDER: u32 = 200;
/// Largest supported argument.
pub const MAX_ARG: f64 = 500.0;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const RESCALE_ABOVE: f64 = 1.0e250;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecfunError {
    #[error("argument out of supported envelope: order {order}, x = {x}")]
    Domain { order: i64, x: f64 },
    #[error("value of order {order} at x = {x} is not representable as f64")]
    Overflow { order: i64, x: f64 },
}

/// A real number stored as `mantissa * 2^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    mant: f64,
    exp: i32,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled { mant: 0.0, exp: 0 };

    pub fn new(value: f64, exp: i32) -> Self {
        Scaled { mant: value, exp }.normalized()
    }

    pub fn from_f64(value: f64) -> Self {
        Self::new(value, 0)
    }

    fn normalized(self) -> Self {
        if self.mant == 0.0 || !self.mant.is_finite() {
            return Scaled { mant: self.mant, exp: 0 };
        }
        let e = frexp_exp(self.mant);
        Scaled {
            mant: ldexp(self.mant, -e),
            exp: self.exp + e,
        }
    }

    pub fn mantissa(self) -> f64 {
        self.mant
    }

    pub fn exponent(self) -> i32 {
        self.exp
    }

    pub fn is_zero(self) -> bool {
        self.mant == 0.0
    }

    /// Converts to `f64`; tiny values flush to zero, huge ones become ±inf.
    pub fn to_f64(self) -> f64 {
        ldexp(self.mant, self.exp)
    }

    pub fn abs(self) -> Self {
        Scaled {
            mant: self.mant.abs(),
            exp: self.exp,
        }
    }

    pub fn neg(self) -> Self {
        Scaled {
            mant: -self.mant,
            exp: self.exp,
        }
    }

    pub fn mul(self, other: Scaled) -> Scaled {
        Scaled {
            mant: self.mant * other.mant,
            exp: self.exp + other.exp,
        }
        .normalized()
    }

    pub fn mul_f64(self, factor: f64) -> Scaled {
        Scaled {
            mant: self.mant * factor,
            exp: self.exp,
        }
        .normalized()
    }

    /// `self / other` as a plain `f64` (may underflow to 0 or overflow).
    pub fn ratio(self, other: Scaled) -> f64 {
        ldexp(self.mant / other.mant, self.exp - other.exp)
    }

    pub fn add(self, other: Scaled) -> Scaled {
        if self.mant == 0.0 {
            return other;
        }
        if other.mant == 0.0 {
            return self;
        }
        let e = self.exp.max(other.exp);
        Scaled {
            mant: ldexp(self.mant, self.exp - e) + ldexp(other.mant, other.exp - e),
            exp: e,
        }
        .normalized()
    }

    pub fn sub(self, other: Scaled) -> Scaled {
        self.add(other.neg())
    }

    /// Orders by magnitude.
    pub fn abs_gt(self, other: Scaled) -> bool {
        if other.mant == 0.0 {
            return self.mant != 0.0;
        }
        if self.mant == 0.0 {
            return false;
        }
        self.abs().ratio(other.abs()) > 1.0
    }
}

fn frexp_exp(x: f64) -> i32 {
    // exponent e such that x * 2^-e lies in [0.5, 1)
    let bits = x.abs().to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i32;
    if raw == 0 {
        // subnormal
        let scaled = x.abs() * 2f64.powi(64);
        let raw = ((scaled.to_bits() >> 52) & 0x7ff) as i32;
        raw - 1022 - 64
    } else {
        raw - 1022
    }
}

/// `x * 2^e` without intermediate overflow for large |e|.
fn ldexp(mut x: f64, mut e: i32) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e)
}

/// `J_n(x)` and `Y_n(x)` for `n = 0..=max_order` at one argument.
#[derive(Debug, Clone)]
pub struct BesselTable {
    x: f64,
    j: Vec<Scaled>,
    y: Vec<Scaled>,
}

impl BesselTable {
    /// Builds the table. `x` must be positive; orders above
    /// [`MAX_ORDER`] + 1 are accepted so that derivative identities at
    /// the envelope edge remain available.
    pub fn new(max_order: u32, x: f64) -> Result<Self, SpecfunError> {
        if !(x > 0.0) || !x.is_finite() || x > MAX_ARG || max_order > MAX_ORDER + 1 {
            return Err(SpecfunError::Domain {
                order: max_order as i64,
                x,
            });
        }
        let nmax = max_order as usize;
        // a fixed recurrence start makes every value independent of the
        // requested table size
        let (j_all, j_f64) = miller_sequence(MAX_ORDER as usize + 1, x);
        let y = neumann_upward(nmax, x, &j_f64);
        let mut j = j_all;
        j.truncate(nmax + 1);
        Ok(BesselTable { x, j, y })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn max_order(&self) -> usize {
        self.j.len() - 1
    }

    /// `J_n(x)` for `n >= 0`.
    pub fn j(&self, n: usize) -> Scaled {
        self.j[n]
    }

    /// `Y_n(x)` for `n >= 0`.
    pub fn y(&self, n: usize) -> Scaled {
        self.y[n]
    }

    /// `J_n(x)` with the integer-order parity applied for negative `n`.
    pub fn j_signed(&self, n: i64) -> Scaled {
        let v = self.j[n.unsigned_abs() as usize];
        if n < 0 && n % 2 != 0 {
            v.neg()
        } else {
            v
        }
    }

    pub fn y_signed(&self, n: i64) -> Scaled {
        let v = self.y[n.unsigned_abs() as usize];
        if n < 0 && n % 2 != 0 {
            v.neg()
        } else {
            v
        }
    }

    /// `J_{m+1} Y_m − J_m Y_{m+1}`, which equals `2 / (π x)`.
    pub fn wronskian(&self, m: usize) -> f64 {
        self.j[m + 1]
            .mul(self.y[m])
            .sub(self.j[m].mul(self.y[m + 1]))
            .to_f64()
    }

    /// `H^{(2)}_n(x) / s` for a common positive scale `s`, returned with
    /// `s`. Used to form ratios of Hankel functions of neighbouring order.
    pub fn hankel2_scaled(&self, n: usize, scale: Scaled) -> Complex64 {
        Complex64::new(self.j[n].ratio(scale), -self.y[n].ratio(scale))
    }

    /// A scale comparable to `|H^{(2)}_n(x)|`, never zero.
    pub fn hankel2_magnitude(&self, n: usize) -> Scaled {
        let (j, y) = (self.j[n].abs(), self.y[n].abs());
        if j.abs_gt(y) {
            j
        } else {
            y
        }
    }

    /// `H^{(2)'}_m(x) / H^{(2)}_m(x)` for `m >= 0`.
    pub fn hankel2_log_derivative(&self, m: usize) -> Complex64 {
        let s = self.hankel2_magnitude(m);
        let h = self.hankel2_scaled(m, s);
        let h_next = self.hankel2_scaled(m + 1, s);
        let h_prev = if m == 0 {
            -h_next
        } else {
            self.hankel2_scaled(m - 1, s)
        };
        (h_prev - h_next) / (2.0 * h)
    }
}

/// Forward-recurrence estimate of the order at which Miller's backward
/// recurrence has to start so that orders up to `n` are accurate to well
/// below double precision.
fn miller_start(n: usize, x: f64) -> usize {
    let n0 = n.max(x.ceil() as usize) + 1;
    let mut p_prev = 0.0_f64;
    let mut p = 1.0_f64;
    let mut k = n0;
    while p.abs() < 1.0e22 {
        let next = 2.0 * k as f64 / x * p - p_prev;
        p_prev = p;
        p = next;
        k += 1;
    }
    let start = k + 8;
    start + (start % 2)
}

/// Returns the scaled Miller sequence `J_0..=J_start` together with plain
/// `f64` values (tiny entries flushed to zero) for series sums.
fn miller_sequence(nmax: usize, x: f64) -> (Vec<Scaled>, Vec<f64>) {
    let start = miller_start(nmax + 2, x);
    let mut stored = vec![0.0_f64; start + 2];
    let mut exps = vec![0_i32; start + 2];
    let mut exp = 0_i32;
    let mut next = 0.0_f64; // J_{k+1}
    let mut cur = 1.0e-300_f64; // J_k at k = start
    stored[start] = cur;
    exps[start] = exp;
    // normalisation sum J_0 + 2 Σ J_{2k}, kept at the running scale
    let mut norm = if start % 2 == 0 { 2.0 * cur } else { 0.0 };
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > RESCALE_ABOVE {
            let shift = frexp_exp(cur);
            cur = ldexp(cur, -shift);
            next = ldexp(next, -shift);
            norm = ldexp(norm, -shift);
            exp += shift;
        }
        let idx = k - 1;
        stored[idx] = cur;
        exps[idx] = exp;
        if idx == 0 {
            norm += cur;
        } else if idx % 2 == 0 {
            norm += 2.0 * cur;
        }
    }
    let norm_exp = frexp_exp(norm);
    let norm_mant = ldexp(norm, -norm_exp);
    let mut scaled = Vec::with_capacity(start + 1);
    let mut plain = Vec::with_capacity(start + 1);
    for idx in 0..=start {
        let v = Scaled::new(stored[idx] / norm_mant, exps[idx] - exp - norm_exp);
        scaled.push(v);
        plain.push(v.to_f64());
    }
    (scaled, plain)
}

/// `Y_0`, `Y_1` from the Neumann series, then upward recurrence.
fn neumann_upward(nmax: usize, x: f64, j: &[f64]) -> Vec<Scaled> {
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = 2.0 / PI * (log_term * j[0] - 2.0 * s0);
    let y1 = 2.0 / PI * (-j[0] / x + log_term * j[1] + s1);

    let mut out = Vec::with_capacity(nmax + 1);
    out.push(Scaled::from_f64(y0));
    if nmax == 0 {
        return out;
    }
    out.push(Scaled::from_f64(y1));
    let mut exp = 0_i32;
    let mut prev = y0;
    let mut cur = y1;
    for n in 1..nmax {
        let next = 2.0 * n as f64 / x * cur - prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_ABOVE {
            let shift = frexp_exp(cur);
            cur = ldexp(cur, -shift);
            prev = ldexp(prev, -shift);
            exp += shift;
        }
        out.push(Scaled::new(cur, exp));
    }
    out
}

fn check_envelope(order: i64, x: f64) -> Result<(), SpecfunError> {
    if order.unsigned_abs() > MAX_ORDER as u64 || !(0.0..=MAX_ARG).contains(&x) {
        return Err(SpecfunError::Domain { order, x });
    }
    Ok(())
}

fn parity(order: i64) -> f64 {
    if order < 0 && order % 2 != 0 {
        -1.0
    } else {
        1.0
    }
}

/// Bessel function of the first kind `J_order(x)` for `0 <= x <= 500`.
///
/// Values below the smallest subnormal flush to zero.
pub fn bessel_j(order: i64, x: f64) -> Result<f64, SpecfunError> {
    check_envelope(order, x)?;
    let n = order.unsigned_abs() as usize;
    if x == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let table = BesselTable::new(n as u32, x)?;
    Ok(parity(order) * table.j(n).to_f64())
}

/// Bessel function of the second kind `Y_order(x)` for `0 < x <= 500`.
pub fn bessel_y(order: i64, x: f64) -> Result<f64, SpecfunError> {
    check_envelope(order, x)?;
    if x == 0.0 {
        return Err(SpecfunError::Domain { order, x });
    }
    let n = order.unsigned_abs() as usize;
    let table = BesselTable::new(n as u32, x)?;
    let v = table.y(n).to_f64();
    if !v.is_finite() {
        return Err(SpecfunError::Overflow { order, x });
    }
    Ok(parity(order) * v)
}

/// `H^{(2)}_m(x)` together with its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hankel2 {
    pub value: ComplexValue,
    pub derivative: ComplexValue,
}

/// Hankel function of the second kind `J − iY` and its derivative,
/// obtained from `H' = (H_{m−1} − H_{m+1}) / 2`.
pub fn hankel2(order: i64, x: f64) -> Result<Hankel2, SpecfunError> {
    check_envelope(order, x)?;
    if x == 0.0 {
        return Err(SpecfunError::Domain { order, x });
    }
    let m = order.unsigned_abs() as usize;
    let table = BesselTable::new(m as u32 + 1, x)?;
    let h = |n: usize| Complex64::new(table.j(n).to_f64(), -table.y(n).to_f64());
    let value = h(m);
    let derivative = if m == 0 {
        -h(1)
    } else {
        (h(m - 1) - h(m + 1)) * 0.5
    };
    let finite = |z: Complex64| z.re.is_finite() && z.im.is_finite();
    if !finite(value) || !finite(derivative) {
        return Err(SpecfunError::Overflow { order, x });
    }
    let s = parity(order);
    Ok(Hankel2 {
        value: value * s,
        derivative: derivative * s,
    })
}

/// One diagonal entry `ζ_m = k H^{(2)'}_m(kR) / H^{(2)}_m(kR)` of the
/// exterior Dirichlet-to-Neumann map on the circle of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtnSymbol {
    pub order: i64,
    pub value: ComplexValue,
}

pub fn dtn_symbol(m: i64, k: f64, radius: f64) -> Result<DtnSymbol, SpecfunError> {
    let kr = k * radius;
    if !(k > 0.0) || !(radius > 0.0) {
        return Err(SpecfunError::Domain { order: m, x: kr });
    }
    check_envelope(m, kr)?;
    let n = m.unsigned_abs() as usize;
    let table = BesselTable::new(n as u32 + 1, kr)?;
    Ok(DtnSymbol {
        order: m,
        value: k * table.hankel2_log_derivative(n),
    })
}

/// All symbols `ζ_m` for `m = 0..=n_max` from a single table.
pub fn dtn_symbols(n_max: u32, k: f64, radius: f64) -> Result<Vec<ComplexValue>, SpecfunError> {
    let kr = k * radius;
    if !(k > 0.0) || !(radius > 0.0) {
        return Err(SpecfunError::Domain {
            order: n_max as i64,
            x: kr,
        });
    }
    check_envelope(n_max as i64, kr)?;
    let table = BesselTable::new(n_max + 1, kr)?;
    Ok((0..=n_max as usize)
        .map(|m| k * table.hankel2_log_derivative(m))
        .collect())
}

//! Propagating plane-wave Trefftz basis `exp(ik x·d)`, `p` directions per
//! element.

use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

use crate::geometry::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("need at least 3 plane-wave directions, got {0}")]
    TooFewDirections(usize),
}

/// `d_ℓ = (cos 2πℓ/p, sin 2πℓ/p)` for `ℓ = 1..=p`.
pub fn directions(p: usize) -> Result<Vec<Vec2>, BasisError> {
    if p < 3 {
        return Err(BasisError::TooFewDirections(p));
    }
    Ok((1..=p)
        .map(|l| Vec2::from_polar(1.0, TAU * l as f64 / p as f64))
        .collect())
}

/// Value and gradient of one plane wave at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveSample {
    pub value: Complex64,
    pub gradient: [Complex64; 2],
}

pub fn eval_plane_wave(k: f64, d: Vec2, x: Vec2) -> PlaneWaveSample {
    let value = Complex64::from_polar(1.0, k * x.dot(d));
    let ik = Complex64::new(0.0, k);
    PlaneWaveSample {
        value,
        gradient: [ik * d.x * value, ik * d.y * value],
    }
}

/// Uniform plane-wave space over a mesh: element `K` owns global DOFs
/// `K*p .. K*p + p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveSpace {
    pub p: usize,
    pub directions: Vec<Vec2>,
    pub n_elements: usize,
}

impl PlaneWaveSpace {
    pub fn new(p: usize, n_elements: usize) -> Result<Self, BasisError> {
        Ok(PlaneWaveSpace {
            p,
            directions: directions(p)?,
            n_elements,
        })
    }

    /// Total number of degrees of freedom `N_h`.
    pub fn n_dofs(&self) -> usize {
        self.p * self.n_elements
    }

    pub fn dof(&self, element: usize, local: usize) -> usize {
        debug_assert!(element < self.n_elements && local < self.p);
        element * self.p + local
    }

    pub fn element_of(&self, dof: usize) -> (usize, usize) {
        (dof / self.p, dof % self.p)
    }

    /// `exp(ik x·d_ℓ)` for every local direction, written into `out`.
    pub fn values_at(&self, k: f64, x: Vec2, out: &mut [Complex64]) {
        for (o, d) in out.iter_mut().zip(&self.directions) {
            *o = Complex64::from_polar(1.0, k * x.dot(*d));
        }
    }

    /// Values and normal derivatives `ik (d·n) exp(ik x·d)` at a point.
    pub fn traces_at(&self, k: f64, x: Vec2, n: Vec2, values: &mut [Complex64], normal_derivs: &mut [Complex64]) {
        for ((v, dn), d) in values.iter_mut().zip(normal_derivs.iter_mut()).zip(&self.directions) {
            *v = Complex64::from_polar(1.0, k * x.dot(*d));
            *dn = Complex64::new(0.0, k * d.dot(n)) * *v;
        }
    }

    /// Evaluates the discrete function with coefficients `coeffs` on one
    /// element.
    pub fn eval_on_element(&self, k: f64, coeffs: &[Complex64], element: usize, x: Vec2) -> Complex64 {
        let local = &coeffs[element * self.p..(element + 1) * self.p];
        local
            .iter()
            .zip(&self.directions)
            .map(|(c, d)| c * Complex64::from_polar(1.0, k * x.dot(*d)))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_directions() {
        let d = directions(4).unwrap();
        let expect = [(0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 0.0)];
        for (v, e) in d.iter().zip(expect) {
            assert!((v.x - e.0).abs() <= 1e-15 && (v.y - e.1).abs() <= 1e-15);
        }
        assert!(directions(2).is_err());
    }

    #[test]
    fn directions_are_unit_and_balanced() {
        for p in 3..=32 {
            let d = directions(p).unwrap();
            let mut sum = Vec2::default();
            for v in &d {
                assert!((v.norm() - 1.0).abs() <= 1e-15);
                sum = sum + *v;
            }
            assert!(sum.norm() <= 1e-13, "p={p}");
        }
    }

    #[test]
    fn dof_map_is_bijective() {
        let s = PlaneWaveSpace::new(5, 7).unwrap();
        assert_eq!(s.n_dofs(), 35);
        let mut seen = vec![false; 35];
        for e in 0..7 {
            for l in 0..5 {
                let g = s.dof(e, l);
                assert!(!seen[g]);
                seen[g] = true;
                assert_eq!(s.element_of(g), (e, l));
            }
        }
        assert!(seen.into_iter().all(|b| b));
    }

    #[test]
    fn modulus_and_gradient_norm() {
        let k = 3.3;
        let d = Vec2::from_polar(1.0, 0.4);
        for x in [Vec2::new(0.1, -2.0), Vec2::new(5.0, 7.0)] {
            let s = eval_plane_wave(k, d, x);
            assert!((s.value.norm() - 1.0).abs() < 1e-15);
            let g2 = s.gradient[0].norm_sqr() + s.gradient[1].norm_sqr();
            assert!((g2 - k * k).abs() < 1e-12);
        }
    }
}

//! Randomised property checks runnable from the command line.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::assembly::{Assembler, BoundaryCondition, FluxParams};
use crate::basis::PlaneWaveSpace;
use crate::dtn::{build_symbol_diagonal, FourierCoefficients};
use crate::geometry::{build_annulus_mesh, AnnulusMeshSpec, Vec2};
use crate::linalg::{lu_solve, norm2, DenseComplexMatrix};
use crate::specfun::{dtn_symbols, hankel2, BesselTable};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn(&mut StdRng) -> Result<String, String>;

const CHECKS: [(&str, Check); 6] = [
    ("bessel identities", bessel_identities),
    ("dtn symbol sign and bound", symbol_sign_and_bound),
    ("dg norm positivity", dg_norm_positivity),
    ("galerkin consistency", galerkin_consistency),
    ("dtn adjoint identity", dtn_adjoint),
    ("lu residual", lu_residual),
];

/// Runs every check with its own generator seeded from `seed`.
pub fn run_selftest(seed: u64) -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = StdRng::seed_from_u64(seed.wrapping_add(i as u64));
            let (passed, detail) = match check(&mut rng) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome { name, passed, detail }
        })
        .collect()
}

fn random_vector(rng: &mut StdRng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn bessel_identities(rng: &mut StdRng) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let x = 0.1 * 5000f64.powf(rng.random::<f64>());
        let m = rng.random_range(0..150usize);
        let t = BesselTable::new(151, x).map_err(|e| e.to_string())?;
        let want = 2.0 / (PI * x);
        worst = worst.max(((t.wronskian(m) - want) / want).abs());
        let h0 = hankel2(0, x).map_err(|e| e.to_string())?;
        let h1 = hankel2(1, x).map_err(|e| e.to_string())?;
        worst = worst.max((h0.derivative + h1.value).norm() / h1.value.norm());
        if t.j_signed(-(m as i64)).to_f64() != if m % 2 == 0 { 1.0 } else { -1.0 } * t.j(m).to_f64() {
            return Err(format!("parity broken at m={m}, x={x}"));
        }
    }
    if worst <= 1e-10 {
        Ok(format!("max relative deviation {worst:.2e}"))
    } else {
        Err(format!("max relative deviation {worst:.2e} > 1e-10"))
    }
}

fn symbol_sign_and_bound(rng: &mut StdRng) -> Result<String, String> {
    for _ in 0..50 {
        let kr = 0.5 * 300f64.powf(rng.random::<f64>());
        let zeta = dtn_symbols(150, 1.0, kr).map_err(|e| e.to_string())?;
        for (m, z) in zeta.iter().enumerate() {
            if z.im > 0.0 {
                return Err(format!("Im zeta_{m} = {} > 0 at kR={kr}", z.im));
            }
            if m > 0 {
                let mf = m as f64;
                if z.norm() / (1.0 + mf * mf).sqrt() > 1.0 / mf + 1.0 / kr {
                    return Err(format!("bound violated at m={m}, kR={kr}"));
                }
            }
        }
    }
    Ok("50 random kR, |m| <= 150".into())
}

fn dg_norm_positivity(rng: &mut StdRng) -> Result<String, String> {
    let mesh = build_annulus_mesh(AnnulusMeshSpec::new(0.5, 1.0, 2, 12)).map_err(|e| e.to_string())?;
    let space = PlaneWaveSpace::new(5, mesh.elements.len()).map_err(|e| e.to_string())?;
    let asm = Assembler::new(&mesh, &space, 4.0, FluxParams::default(), 20).map_err(|e| e.to_string())?;
    let a = asm
        .system_matrix(BoundaryCondition::Dtn { order: 10 }, None)
        .map_err(|e| e.to_string())?;
    let mut smallest = f64::INFINITY;
    for _ in 0..100 {
        let v = random_vector(rng, space.n_dofs());
        let im = a.quadratic_form(&v).map_err(|e| e.to_string())?.im;
        let ratio = im / norm2(&v).powi(2);
        if ratio < -1e-12 || im <= 0.0 {
            return Err(format!("Im(v*Av)/|v|^2 = {ratio:e}"));
        }
        smallest = smallest.min(ratio);
    }
    Ok(format!("min Im(v*Av)/|v|^2 = {smallest:.3e}"))
}

fn galerkin_consistency(rng: &mut StdRng) -> Result<String, String> {
    let k = 3.0 + 2.0 * rng.random::<f64>();
    let mesh = build_annulus_mesh(AnnulusMeshSpec::new(0.5, 1.0, 2, 14)).map_err(|e| e.to_string())?;
    let space = PlaneWaveSpace::new(6, mesh.elements.len()).map_err(|e| e.to_string())?;
    let asm = Assembler::new(&mesh, &space, k, FluxParams::default(), 20).map_err(|e| e.to_string())?;
    let field = move |x: Vec2| {
        let (r, th) = (x.norm(), x.angle());
        let h = hankel2(2, k * r).expect("inside the envelope");
        let e = Complex64::from_polar(1.0, 2.0 * th);
        let u = h.value * e;
        let ur = k * h.derivative * e;
        let ut = Complex64::new(0.0, 2.0) * u / r;
        let (c, s) = (th.cos(), th.sin());
        (u, [ur * c - ut * s, ur * s + ut * c])
    };
    let lhs = asm
        .field_functional(&field, BoundaryCondition::Dtn { order: 4 }, None)
        .map_err(|e| e.to_string())?;
    let rhs = asm.rhs(|x| field(x).0);
    let diff: Vec<Complex64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let rel = norm2(&diff) / norm2(&rhs);
    if rel <= 1e-7 {
        Ok(format!("k={k:.3}: relative residual {rel:.2e}"))
    } else {
        Err(format!("k={k:.3}: relative residual {rel:.2e} > 1e-7"))
    }
}

fn dtn_adjoint(rng: &mut StdRng) -> Result<String, String> {
    for _ in 0..20 {
        let order = rng.random_range(0..40usize);
        let k = rng.random_range(0.5..60.0);
        let t = build_symbol_diagonal(k, 1.0, order).map_err(|e| e.to_string())?;
        let n = 2 * order + 1;
        let v = FourierCoefficients::from_values(order, random_vector(rng, n)).map_err(|e| e.to_string())?;
        let w = FourierCoefficients::from_values(order, random_vector(rng, n)).map_err(|e| e.to_string())?;
        let inner = |a: &FourierCoefficients, b: &FourierCoefficients| -> Complex64 {
            a.values().iter().zip(b.values()).map(|(x, y)| x * y.conj()).sum()
        };
        let lhs = inner(&t.adjoint().apply(&v).map_err(|e| e.to_string())?, &w);
        let rhs = inner(&v, &t.apply(&w).map_err(|e| e.to_string())?);
        if (lhs - rhs).norm() > 1e-14 * (1.0 + lhs.norm()) {
            return Err(format!("adjoint identity off by {:e}", (lhs - rhs).norm()));
        }
    }
    Ok("20 random pairs".into())
}

fn lu_residual(rng: &mut StdRng) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(10..80);
        let a = DenseComplexMatrix::from_fn(n, n, |i, j| {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if i == j {
                z + 4.0
            } else {
                z
            }
        });
        let f = random_vector(rng, n);
        let u = lu_solve(&a, &f).map_err(|e| e.to_string())?;
        let au = a.matvec(&u).map_err(|e| e.to_string())?;
        let r: Vec<Complex64> = au.iter().zip(&f).map(|(x, y)| x - y).collect();
        worst = worst.max(norm2(&r) / norm2(&f));
    }
    if worst <= 1e-10 {
        Ok(format!("max relative residual {worst:.2e}"))
    } else {
        Err(format!("max relative residual {worst:.2e} > 1e-10"))
    }
}

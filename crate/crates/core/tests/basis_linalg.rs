use num_complex::Complex64;
use proptest::prelude::*;
use pwdg::basis::{directions, eval_plane_wave};
use pwdg::geometry::Vec2;
use pwdg::linalg::{condition_estimate, lu_solve, norm2, DenseComplexMatrix, LuFactorization};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_matrix(rng: &mut StdRng, n: usize, diagonal_boost: f64) -> DenseComplexMatrix {
    DenseComplexMatrix::from_fn(n, n, |i, j| {
        let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if i == j {
            z + diagonal_boost
        } else {
            z
        }
    })
}

fn random_vector(rng: &mut StdRng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn relative_residual(a: &DenseComplexMatrix, u: &[Complex64], f: &[Complex64]) -> f64 {
    let au = a.matvec(u).unwrap();
    let r: Vec<Complex64> = au.iter().zip(f).map(|(x, y)| x - y).collect();
    norm2(&r) / norm2(f)
}

#[test]
fn random_50_system_residual() {
    let mut rng = StdRng::seed_from_u64(5);
    let a = random_matrix(&mut rng, 50, 8.0);
    let f = random_vector(&mut rng, 50);
    let u = lu_solve(&a, &f).unwrap();
    assert!(relative_residual(&a, &u, &f) <= 1e-10);
}

#[test]
fn backward_stability_over_random_systems() {
    let mut rng = StdRng::seed_from_u64(17);
    for trial in 0..100 {
        let n = rng.random_range(5..60);
        let a = random_matrix(&mut rng, n, 0.0);
        let f = random_vector(&mut rng, n);
        let lu = LuFactorization::new(&a).unwrap();
        assert!(lu.growth_factor() < 1e3, "trial {trial}: growth {}", lu.growth_factor());
        let cond = lu.condition_estimate();
        let u = lu.solve(&f).unwrap();
        if cond <= 1e8 {
            assert!(relative_residual(&a, &u, &f) <= 1e-8, "trial {trial}");
        }
    }
}

/// Largest singular value of `op` by power iteration on `op* op`.
fn power_sigma_max(n: usize, apply: &dyn Fn(&[Complex64]) -> Vec<Complex64>, apply_adj: &dyn Fn(&[Complex64]) -> Vec<Complex64>) -> f64 {
    let mut x: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + (i % 3) as f64, (i % 5) as f64 - 2.0)).collect();
    let mut sigma = 0.0;
    for _ in 0..500 {
        let nx = norm2(&x);
        x.iter_mut().for_each(|z| *z /= nx);
        let y = apply(&x);
        sigma = norm2(&y);
        x = apply_adj(&y);
    }
    sigma
}

#[test]
fn condition_estimate_agrees_with_power_iteration() {
    let mut rng = StdRng::seed_from_u64(23);
    for _ in 0..5 {
        let n = 30;
        let a = random_matrix(&mut rng, n, 0.0);
        let lu = LuFactorization::new(&a).unwrap();
        let ah = a.adjoint();
        let big = power_sigma_max(n, &|x| a.matvec(x).unwrap(), &|y| ah.matvec(y).unwrap());
        let inv = power_sigma_max(n, &|x| lu.solve(x).unwrap(), &|y| lu.solve_adjoint(y).unwrap());
        let oracle = big * inv;
        let est = condition_estimate(&a);
        assert!(est >= 1.0);
        assert!(est / oracle < 10.0 && oracle / est < 10.0, "{est} vs {oracle}");
    }
}

#[test]
fn plane_waves_solve_helmholtz_by_finite_differences() {
    let mut rng = StdRng::seed_from_u64(3);
    let k = 6.0;
    let step = 1e-4;
    for d in directions(7).unwrap() {
        let x = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let u = |dx: f64, dy: f64| eval_plane_wave(k, d, Vec2::new(x.x + dx, x.y + dy)).value;
        let lap = (u(step, 0.0) + u(-step, 0.0) + u(0.0, step) + u(0.0, -step) - 4.0 * u(0.0, 0.0)) / (step * step);
        let want = -k * k * u(0.0, 0.0);
        assert!((lap - want).norm() / want.norm() < 1e-5);
    }
}

proptest! {
    #[test]
    fn directions_sum_to_zero(p in 3usize..=32) {
        let d = directions(p).unwrap();
        let (sx, sy) = d.iter().fold((0.0, 0.0), |(a, b), v| (a + v.x, b + v.y));
        prop_assert!(sx.abs() < 1e-13 && sy.abs() < 1e-13);
        for v in &d {
            prop_assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn plane_wave_modulus_and_gradient(k in 0.1f64..100.0, t in 0.0f64..6.3, x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let s = eval_plane_wave(k, Vec2::from_polar(1.0, t), Vec2::new(x, y));
        prop_assert!((s.value.norm() - 1.0).abs() < 1e-14);
        let g2 = s.gradient[0].norm_sqr() + s.gradient[1].norm_sqr();
        prop_assert!((g2 - k * k).abs() <= 1e-12 * k * k);
    }

    #[test]
    fn solve_then_multiply_recovers_rhs(seed in any::<u64>(), n in 1usize..40) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, n, 4.0);
        let f = random_vector(&mut rng, n);
        let u = lu_solve(&a, &f).unwrap();
        prop_assert!(relative_residual(&a, &u, &f) <= 1e-10);
    }
}

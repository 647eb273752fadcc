use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;
use pwdg::basis::{eval_plane_wave, PlaneWaveSpace};
use pwdg::dtn::{
    apply_truncated_dtn, build_projection_matrices, build_symbol_diagonal, DtnOperator, FourierCoefficients,
};
use pwdg::geometry::{
    annulus_l2_quadrature, build_annulus_mesh, edge_quadrature_n, AnnulusMeshSpec, EdgeKind, Mesh, QuadratureRule,
    Vec2,
};
use pwdg::specfun::{bessel_j, hankel2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Adaptive Simpson with Richardson correction.
fn adaptive_simpson(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Complex64 {
    fn step(
        f: &dyn Fn(f64) -> Complex64,
        a: f64,
        b: f64,
        fa: Complex64,
        fm: Complex64,
        fb: Complex64,
        whole: Complex64,
        tol: f64,
        depth: u32,
    ) -> Complex64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.norm() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 40)
}

fn mesh(layers: usize, sectors: usize) -> Mesh {
    build_annulus_mesh(AnnulusMeshSpec::new(0.5, 1.0, layers, sectors)).unwrap()
}

fn jacobi_anger(k: f64, radius: f64, l: i64, phi: f64) -> Complex64 {
    let il = Complex64::from_polar(1.0, FRAC_PI_2 * l as f64);
    TAU * radius * il * bessel_j(l, k * radius).unwrap() * Complex64::from_polar(1.0, -(l as f64) * phi)
}

#[test]
fn artificial_edges_reproduce_jacobi_anger() {
    let (k, l, phi) = (4.0, 2i64, PI / 6.0);
    let d = Vec2::from_polar(1.0, phi);
    let m = mesh(2, 12);
    let mut sum = c(0.0, 0.0);
    for (_, e) in m.edges_of_kind(EdgeKind::Artificial) {
        let q = edge_quadrature_n(e, 20).unwrap();
        for i in 0..q.points.len() {
            let x = q.points[i];
            sum += q.weights[i] * eval_plane_wave(k, d, x).value * Complex64::from_polar(1.0, -(l as f64) * q.angles[i]);
        }
    }
    let want = jacobi_anger(k, 1.0, l, phi);
    assert!((sum - want).norm() / want.norm() < 1e-8);
}

#[test]
fn plane_wave_modulus_integrates_to_area() {
    let q = annulus_l2_quadrature(0.5, 1.0, 12, 64).unwrap();
    let d = Vec2::from_polar(1.0, 0.3);
    let total: f64 = q.nodes().map(|(_, _, x, w)| w * eval_plane_wave(4.0, d, x).value.norm_sqr()).sum();
    let area = PI * 0.75;
    assert!((total - area).abs() / area < 1e-12);
}

#[test]
fn hankel_energy_matches_radial_oracle() {
    let k = 4.0;
    let h0 = |r: f64| hankel2(0, k * r).unwrap().value.norm_sqr();
    let want = TAU * adaptive_simpson(&|r| c(h0(r) * r, 0.0), 0.5, 1.0, 1e-14).re;
    let q = annulus_l2_quadrature(0.5, 1.0, 24, 16).unwrap();
    let got: f64 = q.nodes().map(|(r, _, _, w)| w * h0(r)).sum();
    assert!((got - want).abs() / want < 1e-8, "{got} vs {want}");
}

/// Sum of the columns of `M` and `M_D` belonging to one direction: the
/// projection of that single global plane wave.
fn direction_sums(k: f64, p: usize, local: usize, order: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let m = mesh(2, 12);
    let space = PlaneWaveSpace::new(p, m.elements.len()).unwrap();
    let rule = QuadratureRule::gauss_legendre(20).unwrap();
    let proj = build_projection_matrices(&m, &space, k, order, &rule);
    let (mf, mdf) = (proj.m_full(), proj.md_full());
    let cols: Vec<usize> = (0..space.n_dofs()).filter(|&j| space.element_of(j).1 == local).collect();
    let row_sum = |a: &pwdg::linalg::DenseComplexMatrix, r: usize| cols.iter().map(|&j| a[(r, j)]).sum::<Complex64>();
    let n_modes = 2 * order + 1;
    (
        (0..n_modes).map(|r| row_sum(&mf, r)).collect(),
        (0..n_modes).map(|r| row_sum(&mdf, r)).collect(),
    )
}

#[test]
fn projection_rows_match_jacobi_anger() {
    // p = 12, first direction at angle π/6
    let (k, order) = (4.0, 6);
    let (m_sums, _) = direction_sums(k, 12, 0, order);
    for (row, l) in (-(order as i64)..=order as i64).enumerate() {
        let want = jacobi_anger(k, 1.0, l, PI / 6.0);
        assert!((m_sums[row] - want).norm() / want.norm() < 1e-8, "l={l}");
    }
}

#[test]
fn projection_derivative_rows_match_adaptive_quadrature() {
    let (k, order) = (4.0, 6);
    let phi = PI / 6.0;
    let (_, md_sums) = direction_sums(k, 12, 0, order);
    for (row, l) in (-(order as i64)..=order as i64).enumerate() {
        let integrand = |t: f64| {
            let x = Vec2::from_polar(1.0, t);
            let dn = (t - phi).cos();
            c(0.0, k) * dn * eval_plane_wave(k, Vec2::from_polar(1.0, phi), x).value
                * Complex64::from_polar(1.0, -(l as f64) * t)
        };
        let want = adaptive_simpson(&integrand, 0.0, TAU, 1e-13);
        assert!((md_sums[row] - want).norm() / want.norm() < 1e-8, "l={l}");
    }
}

fn random_vector(rng: &mut StdRng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// `−∫ S_N v v̄ − (δ/ik) [∫ |∂n v − S_N v|² − ∫ |∂n v|²]` by direct
/// quadrature of the trace, with Fourier coefficients taken on a finer
/// rule than the assembly uses.
fn direct_nonlocal_form(m: &Mesh, space: &PlaneWaveSpace, k: f64, order: usize, delta: f64, v: &[Complex64]) -> Complex64 {
    let symbols = build_symbol_diagonal(k, 1.0, order).unwrap();
    let mut nodes = Vec::new();
    for (_, e) in m.edges_of_kind(EdgeKind::Artificial) {
        let q = edge_quadrature_n(e, 30).unwrap();
        let el = e.elements.0;
        for i in 0..q.points.len() {
            let (mut u, mut dn) = (c(0.0, 0.0), c(0.0, 0.0));
            for (l, d) in space.directions.iter().enumerate() {
                let s = eval_plane_wave(k, *d, q.points[i]);
                let n = q.normals[i];
                let coef = v[space.dof(el, l)];
                u += coef * s.value;
                dn += coef * (s.gradient[0] * n.x + s.gradient[1] * n.y);
            }
            nodes.push((q.angles[i], q.weights[i], u, dn));
        }
    }
    let mut coefs = FourierCoefficients::zeros(order);
    for mode in -(order as i64)..=order as i64 {
        let cm: Complex64 = nodes
            .iter()
            .map(|&(t, w, u, _)| w * u * Complex64::from_polar(1.0, -(mode as f64) * t))
            .sum::<Complex64>()
            / TAU;
        coefs.set(mode, cm);
    }
    let s = apply_truncated_dtn(&symbols, &coefs).unwrap();
    let ik = c(0.0, k);
    let mut total = c(0.0, 0.0);
    for &(t, w, u, dn) in &nodes {
        let su = s.evaluate(t);
        total += w * (-su * u.conj() - delta / ik * ((dn - su).norm_sqr() - dn.norm_sqr()));
    }
    total
}

#[test]
fn dtn_block_quadratic_form_matches_direct_quadrature() {
    let (k, order, delta) = (4.0, 8, 0.5);
    let m = mesh(2, 16);
    let space = PlaneWaveSpace::new(5, m.elements.len()).unwrap();
    let rule = QuadratureRule::gauss_legendre(20).unwrap();
    let op = DtnOperator::new(&m, &space, k, order, &rule).unwrap();
    let a = op.block(delta).unwrap().to_dense(space.n_dofs());
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..5 {
        let v = random_vector(&mut rng, space.n_dofs());
        let got = a.quadratic_form(&v).unwrap();
        let want = direct_nonlocal_form(&m, &space, k, order, delta, &v);
        assert!((got - want).norm() / want.norm() < 1e-8, "{got} vs {want}");
    }
}

#[test]
fn adjoint_symbols() {
    let t = build_symbol_diagonal(6.0, 1.0, 12).unwrap();
    let ts = t.adjoint();
    assert_eq!(ts.adjoint().entries(), t.entries());
    for (a, b) in t.entries().iter().zip(ts.entries()) {
        assert_eq!(a.re, b.re);
        assert_eq!(a.im, -b.im);
    }
}

fn inner(a: &FourierCoefficients, b: &FourierCoefficients) -> Complex64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y.conj()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity(seed in any::<u64>(), order in 0usize..30, k in 0.5f64..40.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let t = build_symbol_diagonal(k, 1.0, order).unwrap();
        let v = FourierCoefficients::from_values(order, random_vector(&mut rng, 2 * order + 1)).unwrap();
        let w = FourierCoefficients::from_values(order, random_vector(&mut rng, 2 * order + 1)).unwrap();
        let lhs = inner(&t.adjoint().apply(&v).unwrap(), &w);
        let rhs = inner(&v, &t.apply(&w).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-14 * (1.0 + lhs.norm()));
    }

    #[test]
    fn truncated_dtn_is_linear(seed in any::<u64>(), order in 0usize..30, k in 0.5f64..40.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let t = build_symbol_diagonal(k, 1.0, order).unwrap();
        let n = 2 * order + 1;
        let (a, b) = (random_vector(&mut rng, n), random_vector(&mut rng, n));
        let s = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mix: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let fa = apply_truncated_dtn(&t, &FourierCoefficients::from_values(order, a).unwrap()).unwrap();
        let fb = apply_truncated_dtn(&t, &FourierCoefficients::from_values(order, b).unwrap()).unwrap();
        let fm = apply_truncated_dtn(&t, &FourierCoefficients::from_values(order, mix).unwrap()).unwrap();
        for i in 0..n {
            let want = fa.values()[i] + s * fb.values()[i];
            prop_assert!((fm.values()[i] - want).norm() <= 1e-14 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn single_mode_is_an_eigenfunction(order in 0usize..40, k in 0.5f64..40.0, pick in 0usize..81) {
        let mode = (pick % (2 * order + 1)) as i64 - order as i64;
        let t = build_symbol_diagonal(k, 1.0, order).unwrap();
        let mut w = FourierCoefficients::zeros(order);
        w.set(mode, c(1.0, 0.0));
        let out = t.apply(&w).unwrap();
        for m in -(order as i64)..=order as i64 {
            let want = if m == mode { t.get(m) } else { c(0.0, 0.0) };
            prop_assert_eq!(out.get(m), want);
        }
    }

    #[test]
    fn discrete_dtn_sign(seed in any::<u64>(), order in 0usize..20) {
        let m = mesh(1, 10);
        let space = PlaneWaveSpace::new(4, m.elements.len()).unwrap();
        let rule = QuadratureRule::gauss_legendre(20).unwrap();
        let op = DtnOperator::new(&m, &space, 5.0, order, &rule).unwrap();
        let mut rng = StdRng::seed_from_u64(seed);
        let v = random_vector(&mut rng, space.n_dofs());
        let mf = op.projection.m_full();
        let mv = mf.matvec(&v).unwrap();
        let form: Complex64 = mv.iter().zip(op.symbols.entries()).map(|(x, z)| z * x.norm_sqr()).sum();
        let mv2: f64 = mv.iter().map(|x| x.norm_sqr()).sum();
        prop_assert!(-form.im >= -1e-12 * mv2);
    }
}

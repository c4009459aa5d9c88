use std::f64::consts::PI;

use approx::assert_relative_eq;
use langevin_core::coefficients::KolmogorovFamily;
use langevin_core::flow_engine::BrownianPath;
use langevin_core::gaussian_kernels::*;
use langevin_core::linalg::Sym2;
use langevin_core::quadrature::PlaneRule;
use langevin_core::verification::pde_residual;

#[test]
fn gamma0_at_the_origin() {
    let g = gamma0(1.0, 0.0, 0.0, 1.0, 0.0).unwrap();
    assert_relative_eq!(g, 3f64.sqrt() / PI, max_relative = 1e-14);
    // a - sigma^2 enters as a scale of Q_t
    let g2 = gamma0(1.0, 0.0, 0.0, 2.0, 1.0).unwrap();
    assert_relative_eq!(g2, g, max_relative = 1e-14);
}

#[test]
fn gamma0_has_unit_mass() {
    let q = PlaneRule::new(12).unwrap();
    for t in [0.5, 1.0, 2.0] {
        let cov = q_matrix(t);
        let m = q.integrate([0.0, 0.0], &cov.scale(1.3), |z| gamma0(t, z[0], z[1], 1.0, 0.0).unwrap()).unwrap();
        assert!((m - 1.0).abs() < 1e-8, "t = {t}: {m}");
    }
}

#[test]
fn q_matrix_scales_with_dilations() {
    // Q_{l^2 t} = D_l Q_t D_l with D_l = diag(l^3, l)
    let (t, l) = (0.7, 1.9);
    let a = q_matrix(l * l * t);
    let b = q_matrix(t);
    assert_relative_eq!(a.xx, b.xx * l.powi(6), max_relative = 1e-13);
    assert_relative_eq!(a.xv, b.xv * l.powi(4), max_relative = 1e-13);
    assert_relative_eq!(a.vv, b.vv * l * l, max_relative = 1e-13);
}

#[test]
fn langevin_kernel_solves_its_equation() {
    let f = KolmogorovFamily::LangevinDrift { a: 1.7, b: 0.0 };
    let zeta = [0.3, -0.5];
    let k = |t: f64, z: [f64; 2]| Ok(langevin_kernel(1.7, t, z, 0.1, zeta)?.value);
    for (t, z) in [(0.4, [0.0, 0.0]), (1.1, [0.5, -0.2]), (2.0, [-1.0, 1.0])] {
        let r = pde_residual(&f, &k, 0.1, t, z).unwrap();
        assert!(r.relative < 1e-6, "{r:?}");
    }
}

#[test]
fn kernel_derivatives_are_consistent() {
    let h = 1e-5;
    let (t, z, zeta) = (0.6, [0.2, 0.4], [0.0, 0.1]);
    let k = langevin_kernel(1.0, t, z, 0.0, zeta).unwrap();
    let p = langevin_kernel(1.0, t, [z[0], z[1] + h], 0.0, zeta).unwrap();
    let m = langevin_kernel(1.0, t, [z[0], z[1] - h], 0.0, zeta).unwrap();
    assert_relative_eq!(k.dv, (p.value - m.value) / (2.0 * h), max_relative = 1e-7);
    assert_relative_eq!(k.dvv, (p.dv - m.dv) / (2.0 * h), max_relative = 1e-7);
}

#[test]
fn conditional_moments_reduce_without_noise() {
    let w = BrownianPath::sample(1, 0, 0.0, 1.0, 0.01).unwrap();
    let p = ConstantSpdeParams::new(1.5, 0.0).unwrap();
    let (m, c) = conditional_moments(&p, 1.0, [0.2, 0.3], &w).unwrap();
    assert_relative_eq!(m[0], 0.5, max_relative = 1e-14);
    assert_relative_eq!(m[1], 0.3, max_relative = 1e-14);
    let q = q_matrix(1.0).scale(1.5);
    assert!(c.sub(&q).frobenius() < 1e-14);
    assert!(ConstantSpdeParams::new(1.0, 1.0).is_err());
}

#[test]
fn heat_kernel_matches_explicit_formula() {
    let a = Sym2::new(2.0, 0.3, 0.5);
    let z = [0.4, -0.7];
    let det: f64 = 2.0 * 0.5 - 0.09;
    let inv = [[0.5 / det, -0.3 / det], [-0.3 / det, 2.0 / det]];
    let q = inv[0][0] * z[0] * z[0] + 2.0 * inv[0][1] * z[0] * z[1] + inv[1][1] * z[1] * z[1];
    let e = (-0.5 * q).exp() / (2.0 * PI * det.sqrt());
    assert_relative_eq!(heat_kernel(&a, z).unwrap(), e, max_relative = 1e-14);
}

use approx::assert_relative_eq;
use langevin_core::gaussian_kernels::{gamma0, langevin_kernel};
use langevin_core::geometry::*;

#[test]
fn langevin_kernel_is_left_invariant() {
    for (s, zeta, t, z) in
        [(0.0, [0.0, 0.0], 1.0, [0.3, -0.2]), (0.4, [1.0, -0.5], 1.3, [0.2, 0.1]), (-1.0, [-0.3, 2.0], 0.5, [2.0, 1.5])]
    {
        let p = transition(s, zeta, t, z);
        let g = gamma0(p.t, p.x, p.v, 1.0, 0.0).unwrap();
        let k = langevin_kernel(1.0, t, z, s, zeta).unwrap().value;
        assert_relative_eq!(g, k, max_relative = 1e-12);
    }
}

#[test]
fn kernel_is_homogeneous_under_dilations() {
    // Gamma_0(delta_l p) = l^{-4} Gamma_0(p)
    let p = Point { t: 0.7, x: 0.2, v: -0.4 };
    for l in [0.5, 2.0, 3.0] {
        let q = dilate(l, p);
        let a = gamma0(q.t, q.x, q.v, 1.0, 0.0).unwrap();
        let b = gamma0(p.t, p.x, p.v, 1.0, 0.0).unwrap();
        assert_relative_eq!(a, b / l.powi(4), max_relative = 1e-12);
        assert_relative_eq!(homogeneous_norm(q), l * homogeneous_norm(p), max_relative = 1e-12);
    }
}

#[test]
fn group_identities() {
    let a = Point { t: 0.3, x: -1.0, v: 0.5 };
    let b = Point { t: -0.2, x: 0.4, v: 2.0 };
    let e = compose(a, inverse(a));
    assert!(e.t.abs() < 1e-15 && e.x.abs() < 1e-15 && e.v.abs() < 1e-15);
    let c = compose(a, b);
    assert_relative_eq!(c.x, a.x + b.x + b.t * a.v, max_relative = 1e-14);
    assert!(distance(a, a) < 1e-5);
    assert_relative_eq!(distance(b, a), homogeneous_norm(compose(inverse(a), b)), max_relative = 1e-14);
    assert_eq!(free_flow(2.0, [1.0, 0.5]), [2.0, 0.5]);
}

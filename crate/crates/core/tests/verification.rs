use std::sync::Arc;

use langevin_core::coefficients::{KolmogorovFamily, SpdeFamily, SpdeField};
use langevin_core::flow_engine::{optimal_control, BrownianPath, StepRule};
use langevin_core::gaussian_kernels::{langevin_kernel, ConstantSpdeParams};
use langevin_core::verification::*;

fn mc(threads: usize, seed: u64) -> McReport {
    let w = BrownianPath::sample(3, 0, 0.0, 1.0, 0.01).unwrap();
    let p = ConstantSpdeParams::new(1.0, 0.5).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| mc_conditional_check(&p, [0.1, -0.2], &w, 1.0, 20_000, seed).unwrap())
}

#[test]
fn monte_carlo_matches_conditional_law() {
    let r = mc(1, 42);
    assert!(r.passed(), "{:#?}", r.checks);
}

#[test]
fn monte_carlo_is_independent_of_thread_count() {
    let a = mc(1, 7);
    let b = mc(3, 7);
    assert_eq!(a.mean[0].to_bits(), b.mean[0].to_bits());
    assert_eq!(a.cov.xv.to_bits(), b.cov.xv.to_bits());
    assert_eq!(a.test_functions, b.test_functions);
    let c = mc(1, 8);
    assert_ne!(a.mean[0], c.mean[0]);
}

#[test]
fn monte_carlo_detects_a_wrong_law() {
    // simulate with sigma = 0.5 but claim sigma = 0.8: the covariance gate must fail
    let w = BrownianPath::sample(3, 0, 0.0, 1.0, 0.01).unwrap();
    let truth =
        mc_conditional_check(&ConstantSpdeParams::new(1.0, 0.5).unwrap(), [0.0, 0.0], &w, 1.0, 20_000, 1).unwrap();
    let claimed = langevin_core::gaussian_kernels::q_matrix(1.0).scale(1.0 - 0.64);
    let rel = truth.cov.sub(&claimed).frobenius() / claimed.frobenius();
    assert!(rel > 0.05);
}

#[test]
fn residual_requires_forward_time() {
    let f = KolmogorovFamily::LangevinDrift { a: 1.0, b: 0.0 };
    let k = |t: f64, z: [f64; 2]| Ok(langevin_kernel(1.0, t, z, 0.0, [0.0, 0.0])?.value);
    assert!(pde_residual(&f, &k, 0.5, 0.5, [0.0, 0.0]).is_err());
}

#[test]
fn chapman_kolmogorov_detects_a_wrong_kernel() {
    let f = KolmogorovFamily::LangevinDrift { a: 1.0, b: 0.0 };
    // kernels of different diffusions do not compose into either of them
    let k = |t: f64, z: [f64; 2], s: f64, zeta: [f64; 2]| {
        let a = if s > 0.1 { 1.2 } else { 1.0 };
        Ok(langevin_kernel(a, t, z, s, zeta)?.value)
    };
    let r = chapman_kolmogorov_defect(&f, &k, 0.0, [0.0, 0.0], 0.5, 1.0, [0.2, 0.1], 8).unwrap();
    assert!(r.relative > 1e-3, "{r:?}");
}

#[test]
fn flow_bounds_for_constant_and_flattening_sigma() {
    let pts = [[0.0, 0.0], [1.0, -1.0], [-2.0, 2.0]];
    let c: Arc<dyn SpdeField> = Arc::new(SpdeFamily::Constant { a: 1.0, sigma: 0.5 });
    let r = flow_bounds(c, 1, 20, 0.0, 1.0, 1e-2, &pts, 0.25).unwrap();
    assert_eq!((r.dv_min, r.dv_max), (1.0, 1.0));
    assert_eq!(r.m[1], 0.0);
    assert_eq!(r.m[2], 0.0);
    let f: Arc<dyn SpdeField> = Arc::new(SpdeFamily::FlatteningSigma { a: 1.0, sigma0: 0.3, sigma1: 0.2, eps: 0.25 });
    let r = flow_bounds(f, 1, 20, 0.0, 1.0, 1e-2, &pts, 0.25).unwrap();
    assert!(r.passed(), "{:#?}", r.checks);
    assert!(r.m.iter().all(|m| *m > 0.0 && m.is_finite()));
}

#[test]
fn energy_bounds_lie_in_the_spectrum_of_the_inverse_gramian() {
    let f = KolmogorovFamily::LangevinDrift { a: 1.0, b: 0.0 };
    let targets = random_targets(&f, 0.0, [0.0, 0.0], 1.0, 30, 2.0, 0.2, 5).unwrap();
    let rule = StepRule::from_tolerance(1e-10);
    let mut res = Vec::new();
    let (mut dev, mut el) = (Vec::new(), Vec::new());
    for (h, z, d) in targets {
        res.push(optimal_control(&f, 0.0, [0.0, 0.0], h, z, &rule).unwrap());
        dev.push(d);
        el.push(h);
    }
    let b = energy_bounds(&res, &dev, &el).unwrap();
    // Q_1^{-1} = [[12, -6], [-6, 4]] has eigenvalues 8 -+ sqrt(52)
    let (lo, hi) = (8.0 - 52f64.sqrt(), 8.0 + 52f64.sqrt());
    assert!(b.m1 >= lo * (1.0 - 1e-9) && b.m1 <= hi, "{b:?}");
    assert!(b.m2.is_finite() && b.m2 > 0.0);
    assert!(energy_bounds(&res[..2], &dev, &el).is_err());
}

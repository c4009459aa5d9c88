//! Acceptance suite: each criterion prints one PASS/FAIL line with its runtime.
//! Runs sequentially in one test so runtimes are not distorted by parallel tests.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use langevin_core::coefficients::{KolmogorovFamily, KolmogorovField, SpdeFamily, SpdeField};
use langevin_core::flow_engine::{optimal_control, BrownianPath, StepRule};
use langevin_core::gaussian_kernels::{
    closed_form_kernel, conditional_moments_from, gamma0, heat_jet, langevin_kernel, q_matrix, ConstantSpdeParams,
};
use langevin_core::geometry::spatial_dilation;
use langevin_core::parametrix_solver::{ParametrixConfig, ParametrixSolver};
use langevin_core::quadrature::PlaneRule;
use langevin_core::rng;
use langevin_core::spde_assembler::StochasticKernel;
use langevin_core::verification::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn line(msg: &str) {
    // written to the raw handle so the line shows up even when test output is captured
    let mut e = std::io::stderr();
    let _ = writeln!(e, "{msg}");
}

fn run(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    // ACCEPTANCE_ONLY=2,3 restricts the run to a subset
    if let Ok(only) = std::env::var("ACCEPTANCE_ONLY") {
        if !only.split(',').any(|x| x.trim().parse() == Ok(id)) {
            return true;
        }
    }
    let t0 = Instant::now();
    let o = f();
    let el = t0.elapsed();
    let in_time = el < limit;
    let pass = o.pass && in_time;
    line(&format!(
        "acceptance {id:>2} {name}: {} ({}; runtime {:.2} s, limit {} s)",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        el.as_secs_f64(),
        limit.as_secs()
    ));
    pass
}

fn draws(seed: u64) -> impl FnMut(f64, f64) -> f64 {
    let mut r = rng::stream(seed, 0);
    move |a, b| a + (b - a) * rng::uniform(&mut r)
}

fn closed_form() -> Outcome {
    let g = gamma0(1.0, 0.0, 0.0, 1.0, 0.0).unwrap();
    let rel = (g / (3f64.sqrt() / PI) - 1.0).abs();
    let rule = PlaneRule::new(16).unwrap();
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 2.0] {
        let m =
            rule.integrate([0.0, 0.0], &q_matrix(t).scale(1.5), |z| gamma0(t, z[0], z[1], 1.0, 0.0).unwrap()).unwrap();
        worst = worst.max((m - 1.0).abs());
    }
    Outcome { pass: rel <= 1e-12 && worst <= 1e-8, detail: format!("value rel err {rel:.2e}, mass err {worst:.2e}") }
}

fn pde_residual_gamma0() -> Outcome {
    // probe points drawn from the kernel's own law, kept in |z| <= 3
    let f = KolmogorovFamily::LangevinDrift { a: 1.0, b: 0.0 };
    let mut u = draws(1);
    let mut r = rng::stream(1, 1);
    let l = q_matrix(1.0).cholesky().unwrap();
    let (mut worst, mut n) = (0.0f64, 0);
    while n < 50 {
        let s = u(-0.5, 0.5);
        let h = u(0.2, 2.0);
        let zeta = [u(-1.0, 1.0), u(-1.0, 1.0)];
        let g = [rng::normal(&mut r), rng::normal(&mut r)];
        let w = spatial_dilation(h.sqrt(), [l[0][0] * g[0], l[1][0] * g[0] + l[1][1] * g[1]]);
        let z = [zeta[0] + h * zeta[1] + w[0], zeta[1] + w[1]];
        if z[0].hypot(z[1]) > 3.0 {
            continue;
        }
        let k = |t: f64, z: [f64; 2]| Ok(langevin_kernel(1.0, t, z, s, zeta)?.value);
        worst = worst.max(pde_residual(&f, &k, s, s + h, z).unwrap().relative);
        n += 1;
    }
    Outcome { pass: worst < 1e-4, detail: format!("max relative residual {worst:.2e} on {n} points") }
}

fn parametrix_exactness() -> Outcome {
    let (a, b) = (1.3, 0.0);
    let f: Arc<dyn KolmogorovField> = Arc::new(KolmogorovFamily::LangevinDrift { a, b });
    let solver = ParametrixSolver::new(f, ParametrixConfig::default()).unwrap();
    let zeta = [0.1, -0.2];
    let (mut kz, mut worst) = (0.0f64, 0.0f64);
    for h in [0.25, 0.5, 1.0] {
        let m = [zeta[0] + h * zeta[1] + 0.5 * b * h * h, zeta[1] + b * h];
        for i in 0..5 {
            for j in 0..5 {
                let w = spatial_dilation(h.sqrt(), [-1.0 + 0.5 * i as f64, -1.0 + 0.5 * j as f64]);
                let z = [m[0] + w[0], m[1] + w[1]];
                let exact = heat_jet(&q_matrix(h).scale(a), h, w).unwrap().value;
                kz = kz.max(solver.kz1(h, z, 0.0, zeta).unwrap().abs());
                for n in 0..=2 {
                    let g = solver.fundamental_solution_order(n, h, z, 0.0, zeta).unwrap().value;
                    worst = worst.max((g / exact - 1.0).abs());
                }
            }
        }
    }
    Outcome {
        pass: kz <= 1e-12 && worst <= 1e-10,
        detail: format!("max |(KZ)_1| {kz:.2e}, max rel err N=0..2 {worst:.2e} on 5x5x3"),
    }
}

fn series_improvement() -> Outcome {
    let fam = KolmogorovFamily::SinPerturbedA { base: 1.0, amp: 0.05, freq: 1.0, alpha: 0.5 };
    let f: Arc<dyn KolmogorovField> = Arc::new(fam);
    let solver = ParametrixSolver::new(f.clone(), ParametrixConfig { alpha: 0.5, ..Default::default() }).unwrap();
    let (s, t) = (0.0f64, 0.5f64);
    let mut u = draws(4);
    let (mut ck_wins, mut res_wins) = (0, 0);
    for _ in 0..20 {
        let zeta = [u(-2.0, 2.0), u(-1.0, 1.0)];
        let d = spatial_dilation((t - s).sqrt(), [u(-1.5, 1.5), u(-1.5, 1.5)]);
        let z = [zeta[0] + (t - s) * zeta[1] + d[0], zeta[1] + d[1]];
        let mut ck = [0.0; 2];
        let mut res = [0.0; 2];
        for (i, n) in [0usize, 2].into_iter().enumerate() {
            let k = |tt: f64, zz: [f64; 2], ss: f64, ze: [f64; 2]| {
                Ok(solver.fundamental_solution_order(n, tt, zz, ss, ze)?.value)
            };
            ck[i] = chapman_kolmogorov_defect(&*f, &k, s, zeta, 0.25, t, z, 6).unwrap().relative;
            let kk = |tt: f64, zz: [f64; 2]| Ok(solver.fundamental_solution_order(n, tt, zz, s, zeta)?.value);
            res[i] = pde_residual(&*f, &kk, s, t, z).unwrap().relative;
        }
        ck_wins += (ck[1] < ck[0]) as usize;
        res_wins += (res[1] < res[0]) as usize;
    }
    let k2 =
        |tt: f64, zz: [f64; 2], ss: f64, ze: [f64; 2]| Ok(solver.fundamental_solution_order(2, tt, zz, ss, ze)?.value);
    let mass = normalization(&*f, &k2, s, t, [0.3, -0.1], NormSide::Space, 8).unwrap();
    let pass = ck_wins >= 16 && res_wins >= 16 && (mass - 1.0).abs() <= 5e-3;
    Outcome {
        pass,
        detail: format!("N=2 beats N=0: CK {ck_wins}/20, residual {res_wins}/20; mass err {:.2e}", (mass - 1.0).abs()),
    }
}

fn sandwich() -> Outcome {
    let scan = MuScan::default();
    let fam = KolmogorovFamily::SinPerturbedA { base: 1.0, amp: 0.05, freq: 1.0, alpha: 0.5 };
    let f: Arc<dyn KolmogorovField> = Arc::new(fam);
    let solver = ParametrixSolver::new(f.clone(), ParametrixConfig { order: 1, ..Default::default() }).unwrap();
    let zeta = [0.2, -0.1];
    let k = |t: f64, z: [f64; 2]| solver.fundamental_solution(t, z, 0.0, zeta);
    let grid = SandwichGrid::uniform(9, 5, 3.0, 0.1, 0.5);
    let c = sandwich_estimate(&*f, &k, 0.0, zeta, &grid, &scan).unwrap();
    let fine = sandwich_estimate(&*f, &k, 0.0, zeta, &grid.refine(), &scan).unwrap();
    let change = (fine.mu / c.mu - 1.0).abs();

    let c1: Arc<dyn SpdeField> = Arc::new(SpdeFamily::Constant { a: 2.0, sigma: 1.0 });
    let w = Arc::new(BrownianPath::sample(5, 0, 0.0, 1.0, 1e-3).unwrap());
    let sk = StochasticKernel::new(c1, w, 0.0, ParametrixConfig { order: 0, ..Default::default() }).unwrap();
    let unit = sk.sandwich(zeta, &grid, &scan).unwrap();
    let step = (scan.mu_max.ln() / scan.steps as f64).exp();
    let pass = c.mu.is_finite() && c.mu < scan.mu_max && change <= 0.1 && unit.mu <= step;
    Outcome {
        pass,
        detail: format!(
            "mu {:.4} ({} pts) -> {:.4} ({} pts), change {:.2}%; unit case mu {:.5} (scan step {:.5})",
            c.mu,
            c.points,
            fine.mu,
            fine.points,
            100.0 * change,
            unit.mu,
            step
        ),
    }
}

fn conditional_law() -> Outcome {
    let w = BrownianPath::sample(2024, 0, 0.0, 1.0, 0.01).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (a, sigma)) in [(1.0, 0.0), (1.0, 0.5), (2.0, 1.0)].into_iter().enumerate() {
        let p = ConstantSpdeParams::new(a, sigma).unwrap();
        let r = mc_conditional_check(&p, [0.2, -0.3], &w, 1.0, 100_000, rng::derive_seed(2024, 1 + k as u64)).unwrap();
        let ok = r.mean_err_se[0] <= 4.0 && r.mean_err_se[1] <= 4.0 && r.cov_rel_frobenius <= 0.05;
        pass &= ok;
        parts.push(format!(
            "({a},{sigma}): mean {:.2}/{:.2} SE, cov {:.2}%",
            r.mean_err_se[0],
            r.mean_err_se[1],
            100.0 * r.cov_rel_frobenius
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn wentzell_pipeline() -> Outcome {
    let p = ConstantSpdeParams::new(1.0, 0.5).unwrap();
    let field: Arc<dyn SpdeField> = Arc::new(SpdeFamily::Constant { a: 1.0, sigma: 0.5 });
    let (tau, t, zeta) = (0.0, 0.6, [0.1, 0.2]);
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let w = Arc::new(BrownianPath::sample(seed, 0, 0.0, 1.0, 1e-3).unwrap());
        let k =
            StochasticKernel::new(field.clone(), w.clone(), tau, ParametrixConfig { order: 0, ..Default::default() })
                .unwrap();
        let (m, _) = conditional_moments_from(&p, tau, t, zeta, &w).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let d = spatial_dilation((t - tau).sqrt(), [-1.5 + 0.75 * i as f64, -1.5 + 0.75 * j as f64]);
                let z = [m[0] + d[0], m[1] + d[1]];
                let g = k.evaluate(t, z, zeta).unwrap().value;
                let e = closed_form_kernel(&p, &w, t, z, tau, zeta).unwrap().value;
                worst = worst.max((g / e - 1.0).abs());
            }
        }
    }
    // strong residual along 5 nested refinements of 1000 paths; slope of log2 RMS vs level
    let f = SpdeFamily::Constant { a: 1.0, sigma: 0.5 };
    let levels = 5;
    let n = 1000;
    let mut ss = vec![0.0; levels];
    for seed in 0..n {
        let mut path = BrownianPath::sample(rng::derive_seed(77, seed), 0, 0.0, 1.0, 0.02).unwrap();
        for acc in ss.iter_mut() {
            let kern = |tt: f64, z: [f64; 2]| closed_form_kernel(&p, &path, tt, z, 0.0, [0.0, 0.0]);
            *acc += spde_residual(&f, &path, &kern, 0.5, 1.0, [0.2, -0.3]).unwrap().powi(2);
            path = path.refine();
        }
    }
    let y: Vec<f64> = ss.iter().map(|s| 0.5 * (s / n as f64).log2()).collect();
    let xm = (levels - 1) as f64 / 2.0;
    let ym = y.iter().sum::<f64>() / levels as f64;
    let sxy: f64 = y.iter().enumerate().map(|(i, v)| (i as f64 - xm) * (v - ym)).sum();
    let sxx: f64 = (0..levels).map(|i| (i as f64 - xm).powi(2)).sum();
    let rate = 2f64.powf(-sxy / sxx);
    let pass = worst <= 1e-6 && (rate / 2f64.sqrt() - 1.0).abs() <= 0.1;
    Outcome {
        pass,
        detail: format!(
            "max rel err {worst:.2e} (5 seeds x 25 points); residual halving rate {rate:.3} (sqrt 2 = 1.414)"
        ),
    }
}

fn flow_estimates() -> Outcome {
    let pts: Vec<[f64; 2]> = (0..5).flat_map(|i| (0..5).map(move |j| [-2.0 + i as f64, -2.0 + j as f64])).collect();
    let eps = 0.25;
    let fl: Arc<dyn SpdeField> = Arc::new(SpdeFamily::FlatteningSigma { a: 1.0, sigma0: 0.3, sigma1: 0.2, eps });
    let r = flow_bounds(fl, 8, 200, 0.0, 1.0, 1e-3, &pts, eps).unwrap();
    let env_ok = r.dv_min >= (-r.m[1]).exp() && r.dv_max <= r.m[1].exp();
    let c: Arc<dyn SpdeField> = Arc::new(SpdeFamily::Constant { a: 1.0, sigma: 0.5 });
    let rc = flow_bounds(c, 8, 200, 0.0, 1.0, 1e-3, &pts, eps).unwrap();
    let exact = rc.dv_min == 1.0 && rc.dv_max == 1.0 && rc.m[2] == 0.0;
    Outcome {
        pass: r.passed() && env_ok && exact,
        detail: format!(
            "m = [{:.3}, {:.3}, {:.3}, {:.3}], dv in [{:.4}, {:.4}]; constant sigma exact: {exact}",
            r.m[0], r.m[1], r.m[2], r.m[3], r.dv_min, r.dv_max
        ),
    }
}

fn control_energy() -> Outcome {
    let f = KolmogorovFamily::LangevinDrift { a: 1.0, b: 0.0 };
    let rule = StepRule::from_tolerance(1e-10);
    let c = optimal_control(&f, 0.0, [0.0, 0.0], 1.0, [1.0, 0.0], &rule).unwrap();
    let targets = random_targets(&f, 0.0, [0.0, 0.0], 1.0, 50, 2.0, 0.2, 11).unwrap();
    let mut res = Vec::new();
    let (mut dev, mut el) = (Vec::new(), Vec::new());
    let mut gap = 0.0f64;
    for (h, z, d) in targets {
        let r = optimal_control(&f, 0.0, [0.0, 0.0], h, z, &rule).unwrap();
        gap = gap.max(r.endpoint_gap);
        res.push(r);
        dev.push(d);
        el.push(h);
    }
    let b = energy_bounds(&res, &dev, &el).unwrap();
    let pass = (c.energy - 12.0).abs() <= 1e-8
        && c.endpoint_gap < 1e-8
        && gap < 1e-8
        && b.m1 > 0.0
        && b.m1.is_finite()
        && b.m2.is_finite();
    Outcome {
        pass,
        detail: format!(
            "energy {:.12}, gap {:.1e}; 50 targets: m1 {:.4}, m2 {:.4}, max gap {gap:.1e}",
            c.energy, c.endpoint_gap, b.m1, b.m2
        ),
    }
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_langevin");
    let dir = std::env::temp_dir().join(format!("langevin-acceptance-{}", std::process::id()));
    let cfg = dir.join("scenario.toml");
    fs::create_dir_all(&dir).unwrap();
    fs::write(
        &cfg,
        "name = \"determinism\"\nseed = 99\n[family]\nname = \"constant\"\na = 1.0\nsigma = 0.5\n\
         [time]\nt = 1.0\n[path]\ndt = 0.01\n[mc]\nn_paths = 100000\n[grid]\nnx = 5\nnv = 5\n",
    )
    .unwrap();
    let run = |cmd: &str, out: &Path, threads: &str| {
        Command::new(bin)
            .args([cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads])
            .output()
            .unwrap()
            .status
            .code()
    };
    let mut same = true;
    let mut files = 0;
    for (cmd, csv) in [("mc-check", "mc.csv"), ("spde", "spde.csv"), ("flow-check", "flow.csv")] {
        let (a, b) = (dir.join(format!("{cmd}-a")), dir.join(format!("{cmd}-b")));
        let ok = run(cmd, &a, "1") == Some(0) && run(cmd, &b, "2") == Some(0);
        for f in [csv, "report.txt"] {
            let x = fs::read(a.join(f)).unwrap_or_default();
            let y = fs::read(b.join(f)).unwrap_or_else(|_| vec![1]);
            same &= ok && x == y;
            files += 1;
        }
    }
    let _ = fs::remove_dir_all(&dir);
    Outcome { pass: same, detail: format!("{files} artifacts compared byte for byte across two runs") }
}

#[test]
fn acceptance_criteria() {
    let s = Duration::from_secs;
    let results = [
        run(1, "closed-form kernel", s(1), closed_form),
        run(2, "PDE residual of the closed form", s(5), pde_residual_gamma0),
        run(3, "parametrix exactness", s(10), parametrix_exactness),
        run(4, "series improvement", s(300), series_improvement),
        run(5, "sandwich bounds", s(120), sandwich),
        run(6, "conditional law by Monte Carlo", s(120), conditional_law),
        run(7, "Ito-Wentzell pipeline", s(180), wentzell_pipeline),
        run(8, "flow estimates", s(120), flow_estimates),
        run(9, "control energy", s(30), control_energy),
        run(10, "determinism", s(600), determinism),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, p)| !**p).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

//! One runner per subcommand. Each fills a report and the CSV tables it owns.

use std::sync::Arc;

use langevin_core::coefficients::{Family, KolmogorovFamily, KolmogorovField, SpdeFamily, SpdeField};
use langevin_core::flow_engine::{integrate_end, optimal_control, BrownianPath, Diffusion, ItoWentzellFlow, StepRule};
use langevin_core::gaussian_kernels::{closed_form_kernel, langevin_kernel, ConstantSpdeParams, KernelEvaluation};
use langevin_core::parametrix_solver::ParametrixSolver;
use langevin_core::report::CheckLine;
use langevin_core::rng::derive_seed;
use langevin_core::spde_assembler::StochasticKernel;
use langevin_core::verification::{
    energy_bounds, flow_bounds, mc_conditional_check, normalization, random_targets, sandwich_estimate, MuScan,
    NormSide, SandwichGrid,
};

use crate::config::{ConfigError, Scenario};
use crate::output::{num, Report, Table};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<langevin_core::Error> for RunError {
    fn from(e: langevin_core::Error) -> Self {
        match e {
            langevin_core::Error::InvalidParameter { name, reason } => {
                RunError::Config(ConfigError { key: name, message: reason })
            }
            langevin_core::Error::UnknownFamily(n) => {
                RunError::Config(ConfigError { key: "family.name".into(), message: format!("unknown family `{n}`") })
            }
            other => RunError::Numerical(other.to_string()),
        }
    }
}

pub type Outcome = Result<(Report, Vec<(String, Table)>), RunError>;

const KERNEL_HEADER: &[&str] = &["t", "s", "x", "v", "xi", "eta", "value", "dv", "dvv"];

fn kernel_row(sc: &Scenario, z: [f64; 2], k: &KernelEvaluation) -> Vec<f64> {
    vec![sc.t, sc.s, z[0], z[1], sc.pole[0], sc.pole[1], k.value, k.dv, k.dvv]
}

fn wrong_family(cmd: &str, need: &str) -> RunError {
    RunError::Config(ConfigError { key: "family.name".into(), message: format!("`{cmd}` needs {need}") })
}

fn kolmogorov(sc: &Scenario, cmd: &str) -> Result<KolmogorovFamily, RunError> {
    match sc.family {
        Family::Kolmogorov(k) => Ok(k),
        _ => Err(wrong_family(cmd, "a Kolmogorov family (sin-perturbed-a, langevin-drift, perturbed-drift)")),
    }
}

fn spde(sc: &Scenario, cmd: &str) -> Result<SpdeFamily, RunError> {
    match sc.family {
        Family::Spde(f) => Ok(f),
        _ => Err(wrong_family(cmd, "a stochastic family (constant, flattening-sigma)")),
    }
}

fn constant(sc: &Scenario, cmd: &str) -> Result<ConstantSpdeParams, RunError> {
    match spde(sc, cmd)? {
        SpdeFamily::Constant { a, sigma } => ConstantSpdeParams::new(a, sigma)
            .map_err(|e| RunError::Config(ConfigError { key: "family.a".into(), message: e.to_string() })),
        _ => Err(wrong_family(cmd, "the constant family")),
    }
}

fn path(sc: &Scenario) -> Result<Arc<BrownianPath>, RunError> {
    Ok(Arc::new(BrownianPath::sample(sc.seed, 0, sc.s, sc.t, sc.dt)?))
}

fn common(sc: &Scenario, r: &mut Report) {
    r.info("scenario", "family", &sc.family_name);
    r.info("scenario", "s", num(sc.s));
    r.info("scenario", "t", num(sc.t));
    r.info("scenario", "seed", sc.seed);
}

pub fn density(sc: &Scenario) -> Outcome {
    let p = constant(sc, "density")?;
    let diff = p.a - p.sigma * p.sigma;
    let mut r = Report::new(&sc.name, "density");
    common(sc, &mut r);
    let mut tab = Table::new(KERNEL_HEADER);
    let mut peak = 0.0f64;
    for z in sc.grid.points() {
        let k = langevin_kernel(diff, sc.t, z, sc.s, sc.pole)?;
        peak = peak.max(k.value);
        tab.push_nums(&kernel_row(sc, z, &k));
    }
    r.info("grid", "points", sc.grid.points().len());
    r.info("grid", "max_value", num(peak));
    Ok((r, vec![("density.csv".into(), tab)]))
}

pub fn parametrix(sc: &Scenario) -> Outcome {
    let fam = kolmogorov(sc, "parametrix")?;
    let field: Arc<dyn KolmogorovField> = Arc::new(fam);
    let solver = ParametrixSolver::new(field.clone(), sc.parametrix.clone())?;
    let mut r = Report::new(&sc.name, "parametrix");
    common(sc, &mut r);
    r.info("parametrix", "order", sc.parametrix.order);
    let mut tab = Table::new(KERNEL_HEADER);
    for z in sc.grid.points() {
        let k = solver.fundamental_solution(sc.t, z, sc.s, sc.pole)?;
        tab.push_nums(&kernel_row(sc, z, &k));
    }
    r.info("grid", "points", sc.grid.points().len());
    if sc.checks.normalization {
        let k =
            |t: f64, z: [f64; 2], s: f64, zeta: [f64; 2]| solver.fundamental_solution(t, z, s, zeta).map(|e| e.value);
        let m = normalization(&*field, &k, sc.s, sc.t, sc.pole, NormSide::Space, sc.checks.quadrature_order)?;
        r.info("normalization", "mass", num(m));
        r.check(CheckLine::at_most("normalization_error", (m - 1.0).abs(), sc.checks.normalization_tol));
    }
    Ok((r, vec![("parametrix.csv".into(), tab)]))
}

pub fn spde_kernel(sc: &Scenario) -> Outcome {
    let fam = spde(sc, "spde")?;
    let w = path(sc)?;
    let field: Arc<dyn SpdeField> = Arc::new(fam);
    let kernel = StochasticKernel::new(field, w.clone(), sc.s, sc.parametrix.clone())?;
    let mut r = Report::new(&sc.name, "spde");
    common(sc, &mut r);
    r.info("path", "dt", num(sc.dt));
    r.info("path", "w_end", num(w.value(sc.t)?));
    r.info("parametrix", "order", sc.parametrix.order);
    let closed = match fam {
        SpdeFamily::Constant { a, sigma } => Some(ConstantSpdeParams::new(a, sigma)?),
        _ => None,
    };
    let mut header = KERNEL_HEADER.to_vec();
    if closed.is_some() {
        header.push("closed_form");
    }
    let mut tab = Table::new(&header);
    let mut worst = 0.0f64;
    for z in sc.grid.points() {
        let k = kernel.evaluate(sc.t, z, sc.pole)?;
        let mut row = kernel_row(sc, z, &k);
        if let Some(p) = &closed {
            let c = closed_form_kernel(p, &w, sc.t, z, sc.s, sc.pole)?;
            if c.value > 1e-200 {
                worst = worst.max((k.value / c.value - 1.0).abs());
            }
            row.push(c.value);
        }
        tab.push_nums(&row);
    }
    r.info("grid", "points", sc.grid.points().len());
    if closed.is_some() {
        r.check(CheckLine::at_most("closed_form_relative_error", worst, 1e-6));
    }
    if sc.checks.normalization {
        let tp = kernel.problem();
        let solver = kernel.solver();
        let at = integrate_end(&**tp, sc.s, sc.pole, sc.t, &StepRule::from_tolerance(1e-10), Diffusion::Field)?.pos;
        let k =
            |t: f64, z: [f64; 2], s: f64, zeta: [f64; 2]| solver.fundamental_solution(t, z, s, zeta).map(|e| e.value);
        let m = normalization(&**tp, &k, sc.s, sc.t, at, NormSide::Pole, sc.checks.quadrature_order)?;
        r.info("normalization", "pole_mass", num(m));
        r.check(CheckLine::at_most("normalization_error", (m - 1.0).abs(), sc.checks.normalization_tol));
    }
    Ok((r, vec![("spde.csv".into(), tab)]))
}

pub fn mc_check(sc: &Scenario) -> Outcome {
    let p = constant(sc, "mc-check")?;
    let w = path(sc)?;
    let rep = mc_conditional_check(&p, sc.pole, &w, sc.t, sc.mc_paths, derive_seed(sc.seed, 1))?;
    let mut r = Report::new(&sc.name, "mc-check");
    common(sc, &mut r);
    r.info("mc", "n_paths", sc.mc_paths);
    r.info("mc", "dt", num(sc.dt));
    let mut tab = Table::new(&["quantity", "empirical", "reference", "standard_error"]);
    let rows = [
        ("mean_x", rep.mean[0], rep.closed_mean[0], rep.mean_se[0]),
        ("mean_v", rep.mean[1], rep.closed_mean[1], rep.mean_se[1]),
        ("cov_xx", rep.cov.xx, rep.closed_cov.xx, f64::NAN),
        ("cov_xv", rep.cov.xv, rep.closed_cov.xv, f64::NAN),
        ("cov_vv", rep.cov.vv, rep.closed_cov.vv, f64::NAN),
    ];
    for (n, a, b, c) in rows {
        tab.push(vec![n.to_string(), num(a), num(b), num(c)]);
    }
    for (i, (m, e, s)) in rep.test_functions.iter().enumerate() {
        tab.push(vec![format!("test_function_{i}"), num(*m), num(*e), num(*s)]);
    }
    for c in rep.checks {
        r.check(c);
    }
    Ok((r, vec![("mc.csv".into(), tab)]))
}

pub fn bounds(sc: &Scenario) -> Outcome {
    let b = &sc.bounds;
    let h1 = sc.t - sc.s;
    let grid = SandwichGrid::uniform(b.n, b.m, b.radius, b.h_min * h1, h1);
    let (field, solver): (Arc<dyn KolmogorovField>, ParametrixSolver) = match sc.family {
        Family::Kolmogorov(k) => {
            let f: Arc<dyn KolmogorovField> = Arc::new(k);
            (f.clone(), ParametrixSolver::new(f, sc.parametrix.clone())?)
        }
        Family::Spde(f) => {
            let k = StochasticKernel::new(Arc::new(f), path(sc)?, sc.s, sc.parametrix.clone())?;
            let tp: Arc<dyn KolmogorovField> = k.problem().clone();
            (tp.clone(), ParametrixSolver::new(tp, sc.parametrix.clone())?)
        }
    };
    let kernel = |t: f64, z: [f64; 2]| solver.fundamental_solution(t, z, sc.s, sc.pole);
    let scan = MuScan::default();
    let mut r = Report::new(&sc.name, "bounds");
    common(sc, &mut r);
    r.info("parametrix", "order", sc.parametrix.order);
    let mut tab = Table::new(&["level", "points", "mu", "mu_upper", "mu_lower", "mu_dv", "mu_dvv"]);
    let coarse = sandwich_estimate(&*field, &kernel, sc.s, sc.pole, &grid, &scan)?;
    let mut levels = vec![coarse.clone()];
    if b.refine {
        levels.push(sandwich_estimate(&*field, &kernel, sc.s, sc.pole, &grid.refine(), &scan)?);
    }
    for (i, l) in levels.iter().enumerate() {
        tab.push(vec![
            i.to_string(),
            l.points.to_string(),
            num(l.mu),
            num(l.mu_upper),
            num(l.mu_lower),
            num(l.mu_dv),
            num(l.mu_dvv),
        ]);
        r.info("sandwich", &format!("level{i}_points"), l.points);
        r.info("sandwich", &format!("level{i}_mu"), num(l.mu));
    }
    r.check(CheckLine::at_most("sandwich_mu", coarse.mu, scan.mu_max));
    if let Some(fine) = levels.get(1) {
        r.check(CheckLine::at_most("sandwich_refinement_change", (fine.mu / coarse.mu - 1.0).abs(), b.tolerance));
    }
    Ok((r, vec![("bounds.csv".into(), tab)]))
}

pub fn control(sc: &Scenario) -> Outcome {
    let fam = kolmogorov(sc, "control")?;
    let rule = StepRule::from_tolerance(1e-10);
    let res = optimal_control(&fam, sc.s, sc.pole, sc.t, sc.control.target, &rule)?;
    let mut r = Report::new(&sc.name, "control");
    common(sc, &mut r);
    r.info("control", "target", format!("{} {}", num(sc.control.target[0]), num(sc.control.target[1])));
    r.info("control", "energy", num(res.energy));
    r.info("control", "endpoint_gap", num(res.endpoint_gap));
    r.info("control", "iterations", res.iterations);
    r.check(CheckLine::at_most("control_endpoint_gap", res.endpoint_gap, 1e-8));
    let mut path_tab = Table::new(&["t", "u"]);
    for (t, u) in &res.control {
        path_tab.push_nums(&[*t, *u]);
    }
    let mut tables = vec![("control.csv".to_string(), path_tab)];
    if sc.control.n_targets > 0 {
        let targets = random_targets(
            &fam,
            sc.s,
            sc.pole,
            sc.t,
            sc.control.n_targets,
            sc.control.radius,
            0.2,
            derive_seed(sc.seed, 2),
        )?;
        let mut tab = Table::new(&["t", "x", "v", "energy", "endpoint_gap", "sup_u2"]);
        let mut results = Vec::with_capacity(targets.len());
        let (mut dev, mut el) = (Vec::new(), Vec::new());
        let mut worst_gap = 0.0f64;
        for (h, z, d) in targets {
            let c = optimal_control(&fam, sc.s, sc.pole, sc.s + h, z, &rule)?;
            tab.push_nums(&[sc.s + h, z[0], z[1], c.energy, c.endpoint_gap, c.sup_control_sq]);
            worst_gap = worst_gap.max(c.endpoint_gap);
            results.push(c);
            dev.push(d);
            el.push(h);
        }
        let eb = energy_bounds(&results, &dev, &el)?;
        r.info("energy_bounds", "targets", results.len());
        r.info("energy_bounds", "m1", num(eb.m1));
        r.info("energy_bounds", "m2", num(eb.m2));
        r.check(CheckLine::at_most("targets_endpoint_gap", worst_gap, 1e-8));
        r.check(CheckLine::at_least("energy_m1_positive", eb.m1, f64::MIN_POSITIVE));
        r.check(CheckLine::at_most("energy_m1_finite", eb.m1, f64::MAX));
        r.check(CheckLine::at_most("energy_m2_finite", eb.m2, f64::MAX));
        tables.push(("energy.csv".to_string(), tab));
    }
    Ok((r, tables))
}

pub fn flow_check(sc: &Scenario) -> Outcome {
    let fam = spde(sc, "flow-check")?;
    let f = &sc.flow;
    let eps = f.eps.or(fam.flattening().map(|x| x.0)).unwrap_or(0.25);
    let lin = |i: usize| if f.n == 1 { 0.0 } else { -f.radius + 2.0 * f.radius * i as f64 / (f.n - 1) as f64 };
    let points: Vec<[f64; 2]> = (0..f.n).flat_map(|i| (0..f.n).map(move |j| [lin(i), lin(j)])).collect();
    let field: Arc<dyn SpdeField> = Arc::new(fam);
    let rep = flow_bounds(field.clone(), sc.seed, f.n_paths, sc.s, sc.t, sc.dt, &points, eps)?;
    let mut r = Report::new(&sc.name, "flow-check");
    common(sc, &mut r);
    r.info("flow", "n_paths", f.n_paths);
    r.info("flow", "eps", num(eps));
    r.info("flow", "dv_min", num(rep.dv_min));
    r.info("flow", "dv_max", num(rep.dv_max));
    let mut tab = Table::new(&["estimate", "m"]);
    for (n, m) in ["growth", "dv_envelope", "dx", "second_derivatives"].iter().zip(rep.m) {
        tab.push(vec![n.to_string(), num(m)]);
    }
    for c in rep.checks.iter().cloned() {
        r.check(c);
    }
    if field.sigma_space_independent() {
        r.check(CheckLine::at_most("flow_dv_minus_one", (rep.dv_max - 1.0).abs().max((rep.dv_min - 1.0).abs()), 0.0));
        r.check(CheckLine::at_most("flow_dx", rep.m[2], 0.0));
    }
    let w = Arc::new(BrownianPath::sample(sc.seed, 0, sc.s, sc.t, sc.dt)?);
    let flow = ItoWentzellFlow::new(field, w, sc.s)?;
    let mut traj = Table::new(&["t", "gamma", "dv", "dx", "dvv", "dxv", "dxx"]);
    for (t, st) in flow.trajectory(sc.pole[0], sc.pole[1], sc.t)? {
        traj.push_nums(&[t, st.gamma, st.dv, st.dx, st.dvv, st.dxv, st.dxx]);
    }
    Ok((r, vec![("flow.csv".into(), tab), ("trajectory.csv".into(), traj)]))
}

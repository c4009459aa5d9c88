//! Independent checks of computed kernels: finite-difference PDE residuals, Chapman-Kolmogorov
//! defects, normalisation, Gaussian sandwich constants, Monte Carlo moments, strong residuals of
//! the stochastic equation, flow estimates and control energy bounds.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::coefficients::{KolmogorovField, SpdeField};
use crate::error::{Error, Result};
use crate::flow_engine::{integrate_end, BrownianPath, ControlResult, Diffusion, ItoWentzellFlow, StepRule};
use crate::gaussian_kernels::{conditional_moments, heat_kernel, q_inverse, ConstantSpdeParams, KernelEvaluation};
use crate::geometry::spatial_dilation;
use crate::linalg::{compensated_sum, Sym2, Vec2};
use crate::quadrature::{product_proposal, PlaneRule};
use crate::report::CheckLine;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub residual: f64,
    /// `|d_t Gamma| + |1/2 a d_vv Gamma|`
    pub scale: f64,
    pub relative: f64,
}

fn d1(f: &dyn Fn(f64) -> Result<f64>, x: f64, h: f64) -> Result<f64> {
    Ok((-f(x + 2.0 * h)? + 8.0 * f(x + h)? - 8.0 * f(x - h)? + f(x - 2.0 * h)?) / (12.0 * h))
}

fn d2(f: &dyn Fn(f64) -> Result<f64>, x: f64, fx: f64, h: f64) -> Result<f64> {
    Ok((-f(x + 2.0 * h)? + 16.0 * f(x + h)? - 30.0 * fx + 16.0 * f(x - h)? - f(x - 2.0 * h)?) / (12.0 * h * h))
}

/// `K Gamma(., .; s, zeta)` at `(t, z)` by central differences with `h_t = 1e-4 (t - s)` and
/// `h_x = h_v = 1e-3 (1 + |z|)` (fourth-order stencils).
pub fn pde_residual(
    field: &dyn KolmogorovField,
    kernel: &dyn Fn(f64, Vec2) -> Result<f64>,
    s: f64,
    t: f64,
    z: Vec2,
) -> Result<ResidualReport> {
    if !(t > s) {
        return Err(Error::param("t", "need t > s"));
    }
    let ht = 1e-4 * (t - s);
    let hz = 1e-3 * (1.0 + z[0].hypot(z[1]));
    let f0 = kernel(t, z)?;
    let dt = d1(&|tt| kernel(tt, z), t, ht)?;
    let dx = d1(&|x| kernel(t, [x, z[1]]), z[0], hz)?;
    let fv = |v: f64| kernel(t, [z[0], v]);
    let dv = d1(&fv, z[1], hz)?;
    let dvv = d2(&fv, z[1], f0, hz)?;
    let c = field.sample(t, z);
    let r = 0.5 * c.a * dvv + c.b * dv - c.y[0] * dx - c.y[1] * dv - dt;
    let scale = dt.abs() + (0.5 * c.a * dvv).abs();
    Ok(ResidualReport { residual: r, scale, relative: r.abs() / scale })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CkReport {
    /// `int Gamma(t, z; rho, eta) Gamma(rho, eta; s, zeta) d eta`
    pub composed: f64,
    pub direct: f64,
    pub relative: f64,
}

/// Relative Chapman-Kolmogorov defect at an intermediate time `rho`.
#[allow(clippy::too_many_arguments)]
pub fn chapman_kolmogorov_defect(
    field: &dyn KolmogorovField,
    kernel: &dyn Fn(f64, Vec2, f64, Vec2) -> Result<f64>,
    s: f64,
    zeta: Vec2,
    rho: f64,
    t: f64,
    z: Vec2,
    order: usize,
) -> Result<CkReport> {
    if !(s < rho && rho < t) {
        return Err(Error::param("rho", "need s < rho < t"));
    }
    let rule = StepRule::from_tolerance(1e-10);
    let fwd = integrate_end(field, s, zeta, rho, &rule, Diffusion::Field)?;
    let back = integrate_end(field, t, z, rho, &rule, Diffusion::Field)?;
    let (mean, cov) = product_proposal(back.pos, &back.backward_pole_cov(), fwd.pos, &fwd.forward_cov())
        .ok_or_else(|| Error::Numerical("degenerate proposal".into()))?;
    let q = PlaneRule::new(order)?;
    let mut vals = Vec::with_capacity(q.len());
    for (eta, w) in q.nodes(mean, &cov)? {
        vals.push(w * kernel(t, z, rho, eta)? * kernel(rho, eta, s, zeta)?);
    }
    let composed = compensated_sum(vals);
    let direct = kernel(t, z, s, zeta)?;
    Ok(CkReport { composed, direct, relative: (composed - direct).abs() / direct.abs() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormSide {
    /// `int Gamma(t, z; s, zeta) dz`
    Space,
    /// `int Gamma(t, z; s, zeta) d zeta`
    Pole,
}

/// Mass of the kernel over the forward variable or over the pole. `point` is the fixed pole
/// (`Space`) or the fixed evaluation point (`Pole`).
pub fn normalization(
    field: &dyn KolmogorovField,
    kernel: &dyn Fn(f64, Vec2, f64, Vec2) -> Result<f64>,
    s: f64,
    t: f64,
    point: Vec2,
    side: NormSide,
    order: usize,
) -> Result<f64> {
    let rule = StepRule::from_tolerance(1e-10);
    let q = PlaneRule::new(order)?;
    match side {
        NormSide::Space => {
            let e = integrate_end(field, s, point, t, &rule, Diffusion::Field)?;
            let cov = e.forward_cov().scale(1.2);
            let mut v = Vec::new();
            for (z, w) in q.nodes(e.pos, &cov)? {
                v.push(w * kernel(t, z, s, point)?);
            }
            Ok(compensated_sum(v))
        }
        NormSide::Pole => {
            let e = integrate_end(field, t, point, s, &rule, Diffusion::Field)?;
            let cov = e.backward_pole_cov().scale(1.2);
            let mut v = Vec::new();
            for (zeta, w) in q.nodes(e.pos, &cov)? {
                v.push(w * kernel(t, point, s, zeta)?);
            }
            Ok(compensated_sum(v))
        }
    }
}

/// Points for the sandwich scan, in coordinates dilated by the elapsed time:
/// `z = gamma_t + D_{sqrt(t - s)} w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichGrid {
    pub elapsed: Vec<f64>,
    pub wx: Vec<f64>,
    pub wv: Vec<f64>,
}

impl SandwichGrid {
    /// `n x n x m` grid with `w` in `[-r, r]^2` and elapsed times in `[h0, h1]`.
    pub fn uniform(n: usize, m: usize, r: f64, h0: f64, h1: f64) -> Self {
        let lin = |k: usize, a: f64, b: f64| -> Vec<f64> {
            if k == 1 {
                return vec![a];
            }
            (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
        };
        SandwichGrid { elapsed: lin(m, h0, h1), wx: lin(n, -r, r), wv: lin(n, -r, r) }
    }

    /// Insert midpoints in every direction (the original points are kept).
    pub fn refine(&self) -> Self {
        let mid = |v: &Vec<f64>| -> Vec<f64> {
            let mut o = Vec::with_capacity(2 * v.len());
            for i in 0..v.len() {
                o.push(v[i]);
                if i + 1 < v.len() {
                    o.push(0.5 * (v[i] + v[i + 1]));
                }
            }
            o
        };
        SandwichGrid { elapsed: mid(&self.elapsed), wx: mid(&self.wx), wv: mid(&self.wv) }
    }

    pub fn len(&self) -> usize {
        self.elapsed.len() * self.wx.len() * self.wv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// `max(mu_upper, mu_lower)`.
    pub mu: f64,
    pub mu_upper: f64,
    pub mu_lower: f64,
    pub mu_dv: f64,
    pub mu_dvv: f64,
    pub points: usize,
}

/// Log-spaced scan `mu_k = mu_max^{k/n}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuScan {
    pub mu_max: f64,
    pub steps: usize,
}

impl Default for MuScan {
    fn default() -> Self {
        MuScan { mu_max: 1e3, steps: 4000 }
    }
}

impl MuScan {
    fn mu(&self, k: usize) -> f64 {
        (self.mu_max.ln() * k as f64 / self.steps as f64).exp()
    }

    /// Least scan value satisfying a monotone predicate, `inf` if none.
    fn least<F: Fn(f64) -> bool>(&self, ok: F) -> f64 {
        if !ok(self.mu(self.steps)) {
            return f64::INFINITY;
        }
        if ok(self.mu(0)) {
            return self.mu(0);
        }
        let (mut lo, mut hi) = (0usize, self.steps);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if ok(self.mu(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        self.mu(hi)
    }
}

/// Least `mu` on the scan such that, with `w = z - gamma_t^{s,zeta}`, `q = <Q_{t-s}^{-1} w, w>` and
/// `h0 = (2 pi sqrt(det Q_{t-s}))^{-1}`:
/// `mu^{-1} h0 e^{-mu q/2} <= Gamma <= mu h0 e^{-q/(2 mu)}` and the derivative bounds
/// `|d_v Gamma| <= mu h0 e^{-q/(2 mu)} / sqrt(t-s)`, `|d_vv Gamma| <= mu h0 e^{-q/(2 mu)} / (t-s)`.
pub fn sandwich_estimate(
    field: &dyn KolmogorovField,
    kernel: &(dyn Fn(f64, Vec2) -> Result<KernelEvaluation> + Sync),
    s: f64,
    zeta: Vec2,
    grid: &SandwichGrid,
    scan: &MuScan,
) -> Result<BoundReport> {
    let rule = StepRule::from_tolerance(1e-10);
    let slack = 1.0 + 1e-12;
    let mut pts = Vec::with_capacity(grid.len());
    for &h in &grid.elapsed {
        if !(h > 0.0) {
            return Err(Error::param("grid.elapsed", "elapsed times must be positive"));
        }
        let g = integrate_end(field, s, zeta, s + h, &rule, Diffusion::Field)?.pos;
        for &wx in &grid.wx {
            for &wv in &grid.wv {
                let w = spatial_dilation(h.sqrt(), [wx, wv]);
                pts.push((h, [g[0] + w[0], g[1] + w[1]], w));
            }
        }
    }
    let results: Vec<Result<[f64; 4]>> = pts
        .par_iter()
        .map(|&(h, z, w)| {
            let k = kernel(s + h, z)?;
            let q = q_inverse(h).quad(w);
            let h0 = 12f64.sqrt() / (2.0 * PI * h * h);
            let env = |mu: f64| h0 * mu * (-q / (2.0 * mu)).exp();
            let up = scan.least(|mu| k.value <= env(mu) * slack);
            let lo = scan.least(|mu| h0 / mu * (-mu * q / 2.0).exp() <= k.value * slack);
            let dv = scan.least(|mu| k.dv.abs() <= env(mu) / h.sqrt() * slack);
            let dvv = scan.least(|mu| k.dvv.abs() <= env(mu) / h * slack);
            Ok([up, lo, dv, dvv])
        })
        .collect();
    let mut m = [1.0f64; 4];
    for r in results {
        let r = r?;
        for i in 0..4 {
            m[i] = m[i].max(r[i]);
        }
    }
    Ok(BoundReport { mu: m[0].max(m[1]), mu_upper: m[0], mu_lower: m[1], mu_dv: m[2], mu_dvv: m[3], points: pts.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub mean: Vec2,
    pub cov: Sym2,
    pub closed_mean: Vec2,
    pub closed_cov: Sym2,
    pub mean_se: Vec2,
    /// `|mean - closed_mean| / se`, per component.
    pub mean_err_se: Vec2,
    pub cov_rel_frobenius: f64,
    /// `(empirical, quadrature, standard error)` for Gaussian test functions.
    pub test_functions: Vec<(f64, f64, f64)>,
    pub checks: Vec<CheckLine>,
}

impl McReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Simulates `dX = V dt`, `dV = sqrt(a - sigma^2) dB - sigma dW` on the grid of `path` with `W`
/// frozen, and compares empirical moments with the conditional mean and covariance.
pub fn mc_conditional_check(
    p: &ConstantSpdeParams,
    zeta: Vec2,
    path: &BrownianPath,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McReport> {
    if n_paths < 2 {
        return Err(Error::param("mc.n_paths", "need at least two paths"));
    }
    let k_end = path.node_index(t).ok_or_else(|| Error::param("t", "must be a node of the path grid"))?;
    let c = (p.a - p.sigma * p.sigma).sqrt();
    let dt = path.dt();
    let wv = path.values();
    let samples: Vec<Vec2> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let (mut x, mut b) = (zeta[0], 0.0);
            let mut v = zeta[1];
            for k in 0..k_end {
                b += dt.sqrt() * rng::normal(&mut r);
                let vn = zeta[1] - p.sigma * wv[k + 1] + c * b;
                x += 0.5 * (v + vn) * dt;
                v = vn;
            }
            [x, v]
        })
        .collect();
    let n = n_paths as f64;
    let mean = [compensated_sum(samples.iter().map(|s| s[0])) / n, compensated_sum(samples.iter().map(|s| s[1])) / n];
    let cxx = compensated_sum(samples.iter().map(|s| (s[0] - mean[0]).powi(2))) / (n - 1.0);
    let cxv = compensated_sum(samples.iter().map(|s| (s[0] - mean[0]) * (s[1] - mean[1]))) / (n - 1.0);
    let cvv = compensated_sum(samples.iter().map(|s| (s[1] - mean[1]).powi(2))) / (n - 1.0);
    let cov = Sym2::new(cxx, cxv, cvv);
    let (cm, cc) = conditional_moments(p, t, zeta, path)?;
    let se = [(cxx / n).sqrt(), (cvv / n).sqrt()];
    let err = [(mean[0] - cm[0]).abs() / se[0], (mean[1] - cm[1]).abs() / se[1]];
    let rel = cov.sub(&cc).frobenius() / cc.frobenius();

    // Gaussian test functions centred around the conditional mean
    let quad = PlaneRule::new(20)?;
    let mut tests = Vec::new();
    let mut checks = vec![
        CheckLine::at_most("mc_mean_x_in_se", err[0], 4.0),
        CheckLine::at_most("mc_mean_v_in_se", err[1], 4.0),
        CheckLine::at_most("mc_cov_rel_frobenius", rel, 0.05),
    ];
    let width = Sym2::new(cc.xx.max(1e-12), 0.0, cc.vv.max(1e-12));
    for (k, off) in [[0.0, 0.0], [0.5, -0.5], [-1.0, 0.5]].iter().enumerate() {
        let centre = [cm[0] + off[0] * width.xx.sqrt(), cm[1] + off[1] * width.vv.sqrt()];
        let phi = |z: Vec2| (-0.5 * width.inverse().quad([z[0] - centre[0], z[1] - centre[1]])).exp();
        let vals: Vec<f64> = samples.iter().map(|&z| phi(z)).collect();
        let m = compensated_sum(vals.iter().copied()) / n;
        let var = compensated_sum(vals.iter().map(|v| (v - m).powi(2))) / (n - 1.0);
        let s = (var / n).sqrt();
        let exact = if cc.is_positive_definite() {
            quad.integrate(cm, &cc, |z| phi(z) * heat_kernel(&cc, [z[0] - cm[0], z[1] - cm[1]]).unwrap_or(0.0))?
        } else {
            phi(cm)
        };
        checks.push(CheckLine::at_most(format!("mc_test_function_{k}_in_se"), (m - exact).abs() / s.max(1e-300), 4.0));
        tests.push((m, exact, s));
    }
    Ok(McReport {
        mean,
        cov,
        closed_mean: cm,
        closed_cov: cc,
        mean_se: se,
        mean_err_se: err,
        cov_rel_frobenius: rel,
        test_functions: tests,
        checks,
    })
}

/// Strong residual of the stochastic equation along `gamma^B_{s - t0}(z)`:
/// `Gamma(t, .) - Gamma(t0, z) - int 1/2 a d_vv Gamma ds - int sigma d_v Gamma dW`,
/// trapezoid rule in `ds`, left-point sums in `dW`. `t0` and `t` must be path nodes.
pub fn spde_residual(
    field: &dyn SpdeField,
    path: &BrownianPath,
    kernel: &dyn Fn(f64, Vec2) -> Result<KernelEvaluation>,
    t0: f64,
    t: f64,
    z: Vec2,
) -> Result<f64> {
    let i0 = path.node_index(t0).ok_or_else(|| Error::param("t0", "must be a path node"))?;
    let i1 = path.node_index(t).ok_or_else(|| Error::param("t", "must be a path node"))?;
    if i1 < i0 {
        return Err(Error::param("t", "must not precede t0"));
    }
    let pt = |i: usize| -> Vec2 {
        let e = path.time(i) - t0;
        [z[0] + e * z[1], z[1]]
    };
    let first = kernel(t0, z)?;
    let mut prev = first;
    let mut terms = Vec::with_capacity(2 * (i1 - i0));
    let dt = path.dt();
    for i in i0..i1 {
        let zi = pt(i);
        let si = path.time(i);
        let next = kernel(path.time(i + 1), pt(i + 1))?;
        let a0 = field.a(si, zi);
        let a1 = field.a(path.time(i + 1), pt(i + 1));
        terms.push(0.25 * (a0 * prev.dvv + a1 * next.dvv) * dt);
        terms.push(field.sigma(si, zi).s * prev.dv * path.increment(i));
        prev = next;
    }
    Ok(prev.value - first.value - compensated_sum(terms))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowBoundReport {
    pub paths: usize,
    pub dv_min: f64,
    pub dv_max: f64,
    /// Largest empirical constant over paths for each estimate:
    /// `|gamma| / <z>`, `|log d_v gamma| / (t - tau)^eps`, `|d_x gamma| / (t - tau)^eps`,
    /// `<z> |d^2 gamma| / (t - tau)^eps`.
    pub m: [f64; 4],
    pub eps: f64,
    pub checks: Vec<CheckLine>,
}

impl FlowBoundReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Empirical constants of the flow estimates over `n_paths` Brownian paths on `[tau, t1]`.
#[allow(clippy::too_many_arguments)]
pub fn flow_bounds(
    field: Arc<dyn SpdeField>,
    seed: u64,
    n_paths: usize,
    tau: f64,
    t1: f64,
    dt: f64,
    points: &[Vec2],
    eps: f64,
) -> Result<FlowBoundReport> {
    let per_path: Vec<Result<(f64, f64, [f64; 4])>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = Arc::new(BrownianPath::sample(seed, i, tau, t1, dt)?);
            let flow = ItoWentzellFlow::new(field.clone(), path, tau)?;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let mut m = [0.0f64; 4];
            for z in points {
                let bracket = (1.0 + z[0] * z[0] + z[1] * z[1]).sqrt();
                for (t, s) in flow.trajectory(z[0], z[1], t1)? {
                    lo = lo.min(s.dv);
                    hi = hi.max(s.dv);
                    m[0] = m[0].max(s.gamma.abs() / bracket);
                    if t > tau {
                        let te = (t - tau).powf(eps);
                        m[1] = m[1].max(s.dv.ln().abs() / te);
                        m[2] = m[2].max(s.dx.abs() / te);
                        let d2 = s.dvv.abs().max(s.dxv.abs()).max(s.dxx.abs());
                        m[3] = m[3].max(bracket * d2 / te);
                    }
                }
            }
            Ok((lo, hi, m))
        })
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut m = [0.0f64; 4];
    for r in per_path {
        let (l, h, mm) = r?;
        lo = lo.min(l);
        hi = hi.max(h);
        for k in 0..4 {
            m[k] = m[k].max(mm[k]);
        }
    }
    let checks = vec![
        CheckLine::at_least("flow_dv_min_positive", lo, f64::MIN_POSITIVE),
        CheckLine::at_most("flow_m_growth", m[0], f64::MAX),
        CheckLine::at_most("flow_m_dv_envelope", m[1], f64::MAX),
        CheckLine::at_most("flow_m_dx", m[2], f64::MAX),
        CheckLine::at_most("flow_m_second", m[3], f64::MAX),
    ];
    Ok(FlowBoundReport { paths: n_paths, dv_min: lo, dv_max: hi, m, eps, checks })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBounds {
    /// `min energy / |D_{1/sqrt(t-s)} (z - gamma_t)|^2`
    pub m1: f64,
    /// `max (t - s) sup u^2 / |D_{1/sqrt(t-s)} (z - gamma_t)|^2`
    pub m2: f64,
}

/// Random control targets around the free curve from `(s, zeta)`: elapsed times uniform in
/// `[h_min, 1] (t - s)` and deviations `D_{sqrt(h)} w` with `w` uniform in `[-r, r]^2`.
/// Returns `(elapsed, target, deviation)` triples.
#[allow(clippy::too_many_arguments)]
pub fn random_targets(
    field: &dyn KolmogorovField,
    s: f64,
    zeta: Vec2,
    t: f64,
    n: usize,
    radius: f64,
    h_min: f64,
    seed: u64,
) -> Result<Vec<(f64, Vec2, Vec2)>> {
    let mut r = rng::stream(seed, 0);
    let rule = StepRule::from_tolerance(1e-10);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let h = (t - s) * (h_min + (1.0 - h_min) * rng::uniform(&mut r));
        let w = [radius * (2.0 * rng::uniform(&mut r) - 1.0), radius * (2.0 * rng::uniform(&mut r) - 1.0)];
        let d = spatial_dilation(h.sqrt(), w);
        let g = integrate_end(field, s, zeta, s + h, &rule, Diffusion::Unit)?.pos;
        out.push((h, [g[0] + d[0], g[1] + d[1]], d));
    }
    Ok(out)
}

/// Empirical constants of the energy bounds; `deviations[i] = z_i - gamma_t^{s,zeta}`.
pub fn energy_bounds(results: &[ControlResult], deviations: &[Vec2], elapsed: &[f64]) -> Result<EnergyBounds> {
    if results.len() != deviations.len() || results.len() != elapsed.len() || results.is_empty() {
        return Err(Error::param("targets", "mismatched or empty target lists"));
    }
    let (mut m1, mut m2) = (f64::INFINITY, 0.0f64);
    for ((r, d), &h) in results.iter().zip(deviations).zip(elapsed) {
        let n = spatial_dilation(1.0 / h.sqrt(), *d);
        let n2 = n[0] * n[0] + n[1] * n[1];
        if n2 == 0.0 {
            continue;
        }
        m1 = m1.min(r.energy / n2);
        m2 = m2.max(h * r.sup_control_sq / n2);
    }
    Ok(EnergyBounds { m1, m2 })
}

//! Reduction of the stochastic equation to a path-wise Kolmogorov equation by the Ito-Wentzell
//! change of velocity `v -> gamma_{t,tau}(x, v)`, and assembly of the stochastic kernel
//! `Gamma(t, x, v; tau, zeta) = Gamma_tau(t, x, gamma^{-1}_{t,tau}(x, v); tau, zeta)`.

use std::sync::Arc;

use crate::coefficients::{KolmogorovField, Sample, SpdeField, TimeGrid};
use crate::error::{Error, Result};
use crate::flow_engine::{BrownianPath, FlowState, ItoWentzellFlow};
use crate::gaussian_kernels::{KernelEvaluation, KernelOrder};
use crate::linalg::Vec2;
use crate::parametrix_solver::{ParametrixConfig, ParametrixSolver};
use crate::verification::{sandwich_estimate, BoundReport, MuScan, SandwichGrid};

/// The transformed equation `abar d_vv + bbar d_v - <Y, grad> - d_t` for one Brownian path and
/// initial time `tau`. As a [`KolmogorovField`] it reports `a = 2 abar`.
#[derive(Debug, Clone)]
pub struct TransformedProblem {
    flow: ItoWentzellFlow,
}

impl TransformedProblem {
    pub fn flow(&self) -> &ItoWentzellFlow {
        &self.flow
    }

    pub fn tau(&self) -> f64 {
        self.flow.tau()
    }

    pub fn horizon(&self) -> f64 {
        self.flow.path().t1()
    }

    fn state(&self, t: f64, z: Vec2) -> FlowState {
        let t = t.clamp(self.tau(), self.horizon());
        self.flow.state(t, z[0], z[1]).unwrap_or(FlowState { gamma: z[1], dv: 1.0, ..Default::default() })
    }

    /// `(a - sigma^2) / (2 p^2)` at `(x, gamma)`, `p = d_v gamma`.
    pub fn abar(&self, t: f64, z: Vec2) -> f64 {
        0.5 * self.sample(t, z).a
    }

    /// `-(sigma d_v sigma + (a - sigma^2) d_vv gamma / (2 p)) / p^2`, where `d_v` of the composed
    /// `sigma(x, gamma(x, v))` is `sigma_v p`.
    pub fn bbar(&self, t: f64, z: Vec2) -> f64 {
        self.sample(t, z).b
    }
}

impl KolmogorovField for TransformedProblem {
    fn sample(&self, t: f64, z: Vec2) -> Sample {
        let st = self.state(t, z);
        let field = self.flow.field();
        let zh = [z[0], st.gamma];
        let t = t.clamp(self.tau(), self.horizon());
        let a = field.a(t, zh);
        let sj = field.sigma(t, zh);
        let (g, p, q) = (st.gamma, st.dv, st.dx);
        let diff = a - sj.s * sj.s;
        let b = -sj.s * sj.d1[1] / p - diff * st.dvv / (2.0 * p * p * p);
        let y = [g, -g * q / p];
        let dy = [
            [q, p],
            [
                -(q * q + g * st.dxx) / p + g * q * st.dxv / (p * p),
                -(p * q + g * st.dxv) / p + g * q * st.dvv / (p * p),
            ],
        ];
        Sample { a: diff / (p * p), b, y, dy }
    }

    fn time_grid(&self) -> Option<TimeGrid> {
        let path = self.flow.path();
        Some(TimeGrid { t0: path.t0(), dt: path.dt() })
    }
}

/// Builds the transformed equation; `tau` must be a node of the path grid.
pub fn wentzell_transform(field: Arc<dyn SpdeField>, path: Arc<BrownianPath>, tau: f64) -> Result<TransformedProblem> {
    if !(tau < path.t1()) {
        return Err(Error::OutsideWindow { t: tau, t0: path.t0(), t1: path.t1() });
    }
    Ok(TransformedProblem { flow: ItoWentzellFlow::new(field, path, tau)? })
}

/// The stochastic kernel for one path: a parametrix solver on the transformed equation composed
/// with the inverse flow.
pub struct StochasticKernel {
    problem: Arc<TransformedProblem>,
    solver: ParametrixSolver,
}

impl std::fmt::Debug for StochasticKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StochasticKernel").field("tau", &self.problem.tau()).finish()
    }
}

impl StochasticKernel {
    pub fn new(field: Arc<dyn SpdeField>, path: Arc<BrownianPath>, tau: f64, cfg: ParametrixConfig) -> Result<Self> {
        let problem = Arc::new(wentzell_transform(field, path, tau)?);
        let solver = ParametrixSolver::new(problem.clone(), cfg)?;
        Ok(StochasticKernel { problem, solver })
    }

    pub fn problem(&self) -> &Arc<TransformedProblem> {
        &self.problem
    }

    pub fn solver(&self) -> &ParametrixSolver {
        &self.solver
    }

    pub fn tau(&self) -> f64 {
        self.problem.tau()
    }

    /// `Gamma(t, z; tau, zeta)` with `v`-derivatives, at the configured order.
    pub fn evaluate(&self, t: f64, z: Vec2, zeta: Vec2) -> Result<KernelEvaluation> {
        self.evaluate_order(self.solver.config().order, t, z, zeta)
    }

    pub fn evaluate_order(&self, n: usize, t: f64, z: Vec2, zeta: Vec2) -> Result<KernelEvaluation> {
        let tau = self.tau();
        if !(t > tau && t <= self.problem.horizon() * (1.0 + 1e-12)) {
            return Err(Error::OutsideWindow { t, t0: tau, t1: self.problem.horizon() });
        }
        let flow = self.problem.flow();
        let w = flow.inverse(t, z[0], z[1])?;
        let st = flow.state(t, z[0], w)?;
        let k = self.solver.fundamental_solution_order(n, t, [z[0], w], tau, zeta)?;
        let p = st.dv;
        Ok(KernelEvaluation {
            value: k.value,
            dv: k.dv / p,
            dvv: k.dvv / (p * p) - k.dv * st.dvv / (p * p * p),
            order: KernelOrder::Stochastic(n),
        })
    }
}

impl StochasticKernel {
    /// Sandwich constants of `Gamma` read in transformed coordinates: the kernel at
    /// `(t, x, gamma_{t,tau}(x, v))` against Gaussians centred at the curve from `(tau, zeta)`.
    pub fn sandwich(&self, zeta: Vec2, grid: &SandwichGrid, scan: &MuScan) -> Result<BoundReport> {
        let tau = self.tau();
        let k = |t: f64, z: Vec2| self.solver.fundamental_solution(t, z, tau, zeta);
        sandwich_estimate(&*self.problem, &k, tau, zeta, grid, scan)
    }
}

/// One-shot evaluation of the stochastic kernel; prefer [`StochasticKernel`] for repeated queries.
#[allow(clippy::too_many_arguments)]
pub fn stochastic_fundamental_solution(
    field: Arc<dyn SpdeField>,
    path: Arc<BrownianPath>,
    tau: f64,
    cfg: ParametrixConfig,
    t: f64,
    z: Vec2,
    zeta: Vec2,
) -> Result<KernelEvaluation> {
    StochasticKernel::new(field, path, tau, cfg)?.evaluate(t, z, zeta)
}

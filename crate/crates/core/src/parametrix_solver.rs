//! Parametrix construction of the fundamental solution of `K = 1/2 a d_vv + b d_v - <Y, grad> - d_t`.
//!
//! `Z(t, z; s, zeta)` is the Gaussian kernel of the operator linearised along the integral curve
//! of `Y` from `(s, zeta)`. With `(KZ)_1 = K Z` and `(KZ)_{k+1} = (KZ)_1 (x) (KZ)_k`, where `(x)`
//! is the space-time convolution over `(s, t) x R^2`, the order-`N` approximation is
//! `Gamma_N = Z + Z (x) sum_{k<=N} (KZ)_k`.
//!
//! Time integrals use Gauss-Legendre after `rho = s + (t - s) u^{2/alpha}`; space integrals use a
//! tensor Gauss-Hermite rule whitened by a Gaussian proposal built from the two kernel factors.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use crate::coefficients::{KolmogorovField, Sample};
use crate::error::{Error, Result};
use crate::flow_engine::{integrate_end, integrate_stops, CurveEnd, Diffusion, StepRule};
use crate::gaussian_kernels::{heat_jet, HeatJet, KernelEvaluation, KernelOrder};
use crate::linalg::{Sym2, Vec2};
use crate::quadrature::{product_proposal, PlaneRule, SingularTimeRule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProposalKind {
    /// Precision-weighted product of the forward and backward Gaussian factors.
    Product,
    /// Centred on the backward curve, covariance `r C_back + (1 - r) C_fwd`.
    Blend(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametrixConfig {
    /// Truncation order `N` (at most 3).
    pub order: usize,
    /// Hoelder exponent used by the singular time substitution.
    pub alpha: f64,
    pub time_nodes: usize,
    pub space_order: usize,
    /// Rules for the nested integrals inside `(KZ)_k`, `k >= 2`.
    pub inner_time_nodes: usize,
    pub inner_space_order: usize,
    /// RK4 step rule for the integral curves at quadrature nodes.
    pub curve: StepRule,
    pub proposal: ProposalKind,
}

impl Default for ParametrixConfig {
    fn default() -> Self {
        ParametrixConfig {
            order: 2,
            alpha: 0.5,
            time_nodes: 8,
            space_order: 8,
            inner_time_nodes: 6,
            inner_space_order: 5,
            curve: StepRule { min_steps: 8, max_h: 0.05 },
            proposal: ProposalKind::Product,
        }
    }
}

impl ParametrixConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order > 3 {
            return Err(Error::param("parametrix.order", "must be at most 3"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::param("parametrix.alpha", "must lie in (0, 1]"));
        }
        if self.time_nodes < 8 {
            return Err(Error::param("parametrix.time_nodes", "must be at least 8"));
        }
        if self.space_order < 8 {
            return Err(Error::param("parametrix.space_order", "must be at least 8"));
        }
        if self.inner_time_nodes < 2 || self.inner_space_order < 2 {
            return Err(Error::param("parametrix.inner_time_nodes", "inner orders must be at least 2"));
        }
        if self.curve.min_steps == 0 || !(self.curve.max_h > 0.0) {
            return Err(Error::param("parametrix.curve_steps", "step rule must be positive"));
        }
        if let ProposalKind::Blend(r) = self.proposal {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::param("parametrix.proposal", "blend ratio must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

struct Rules {
    time: SingularTimeRule,
    space: PlaneRule,
}

pub struct ParametrixSolver {
    field: Arc<dyn KolmogorovField>,
    cfg: ParametrixConfig,
    outer: Rules,
    inner: Rules,
}

#[derive(Clone, Copy)]
enum Inner {
    /// `sum_{k=1}^n (KZ)_k`
    Phi(usize),
    /// `(KZ)_k`
    Pure(usize),
}

/// Per-pole cache of the curve from `(s, zeta)`.
struct Pole {
    s: f64,
    zeta: Vec2,
    slices: RefCell<HashMap<u64, CurveEnd>>,
}

impl ParametrixSolver {
    pub fn new(field: Arc<dyn KolmogorovField>, cfg: ParametrixConfig) -> Result<Self> {
        cfg.validate()?;
        let outer =
            Rules { time: SingularTimeRule::new(cfg.time_nodes, cfg.alpha)?, space: PlaneRule::new(cfg.space_order)? };
        let inner = Rules {
            time: SingularTimeRule::new(cfg.inner_time_nodes, cfg.alpha)?,
            space: PlaneRule::new(cfg.inner_space_order)?,
        };
        Ok(ParametrixSolver { field, cfg, outer, inner })
    }

    pub fn config(&self) -> &ParametrixConfig {
        &self.cfg
    }

    pub fn field(&self) -> &Arc<dyn KolmogorovField> {
        &self.field
    }

    fn pole(&self, s: f64, zeta: Vec2) -> Pole {
        Pole { s, zeta, slices: RefCell::new(HashMap::new()) }
    }

    fn slice(&self, pole: &Pole, rho: f64) -> Result<CurveEnd> {
        if let Some(c) = pole.slices.borrow().get(&rho.to_bits()) {
            return Ok(*c);
        }
        let c = integrate_end(&*self.field, pole.s, pole.zeta, rho, &self.cfg.curve, Diffusion::Field)?;
        pole.slices.borrow_mut().insert(rho.to_bits(), c);
        Ok(c)
    }

    fn forward(&self, s: f64, zeta: Vec2, t: f64) -> Result<CurveEnd> {
        integrate_end(&*self.field, s, zeta, t, &self.cfg.curve, Diffusion::Field)
    }

    fn jet(end: &CurveEnd, z: Vec2) -> Result<HeatJet> {
        heat_jet(&end.forward_cov(), end.elapsed, [z[0] - end.pos[0], z[1] - end.pos[1]])
    }

    /// `(KZ)_1(t, z; s, zeta)` from the curve `end` of the pole and the field sample `at` at `(t, z)`.
    fn kz1_with(end: &CurveEnd, at: &Sample, z: Vec2) -> Result<f64> {
        let j = Self::jet(end, z)?;
        let g = &end.sample;
        // Y(z) - Ybar(z), with Ybar linearised by the reduced Jacobian along the curve
        let d0 = at.y[0] - g.y[0] - g.dy[0][1] * (z[1] - end.pos[1]);
        let d1 = at.y[1] - g.y[1];
        Ok(0.5 * (at.a - g.a) * j.dvv + at.b * j.dv - (d0 * j.dx + d1 * j.dv))
    }

    fn proposal(&self, back: &CurveEnd, fwd: &CurveEnd) -> Result<(Vec2, Sym2)> {
        let cb = back.backward_pole_cov();
        let cf = fwd.forward_cov();
        match self.cfg.proposal {
            ProposalKind::Product => product_proposal(back.pos, &cb, fwd.pos, &cf)
                .ok_or_else(|| Error::Numerical("degenerate quadrature proposal".into())),
            ProposalKind::Blend(r) => Ok((back.pos, cb.scale(r).add(&cf.scale(1.0 - r)))),
        }
    }

    /// `int_s^rho int (KZ)_1(rho, eta; r, y) F(r, y) dy dr`.
    fn conv(&self, pole: &Pole, depth: usize, rho: f64, eta: Vec2, at: &Sample, inner: Inner) -> Result<f64> {
        let rules = if depth == 0 { &self.outer } else { &self.inner };
        let times = rules.time.nodes(pole.s, rho);
        let stops: Vec<f64> = times.iter().rev().map(|p| p.0).collect();
        let back = integrate_stops(&*self.field, rho, eta, &stops, &self.cfg.curve, Diffusion::Field)?;
        let mut acc = 0.0;
        for (i, &(r, wr)) in times.iter().enumerate() {
            let bk = &back[times.len() - 1 - i];
            let sl = self.slice(pole, r)?;
            let (mean, cov) = self.proposal(bk, &sl)?;
            for (y, wy) in rules.space.nodes(mean, &cov)? {
                let e = self.forward(r, y, rho)?;
                let k1 = Self::kz1_with(&e, at, eta)?;
                let sy = self.field.sample(r, y);
                let f = self.eval_inner(pole, depth + 1, r, y, &sy, inner)?;
                acc += wr * wy * k1 * f;
            }
        }
        Ok(acc)
    }

    fn eval_inner(&self, pole: &Pole, depth: usize, rho: f64, eta: Vec2, at: &Sample, what: Inner) -> Result<f64> {
        let base = Self::kz1_with(&self.slice(pole, rho)?, at, eta)?;
        match what {
            Inner::Phi(1) | Inner::Pure(1) => Ok(base),
            Inner::Phi(n) => Ok(base + self.conv(pole, depth, rho, eta, at, Inner::Phi(n - 1))?),
            Inner::Pure(k) => self.conv(pole, depth, rho, eta, at, Inner::Pure(k - 1)),
        }
    }

    fn check_times(s: f64, t: f64) -> Result<()> {
        if !(t > s) {
            return Err(Error::param("t", format!("need t > s (t = {t}, s = {s})")));
        }
        Ok(())
    }

    /// The parametrix `Z(t, z; s, zeta)` with its `v`-derivatives.
    pub fn parametrix(&self, t: f64, z: Vec2, s: f64, zeta: Vec2) -> Result<KernelEvaluation> {
        Self::check_times(s, t)?;
        let e = self.forward(s, zeta, t)?;
        let j = Self::jet(&e, z)?;
        Ok(KernelEvaluation { value: j.value, dv: j.dv, dvv: j.dvv, order: KernelOrder::Parametrix(0) })
    }

    /// `(KZ)_1(t, z; s, zeta) = K Z`.
    pub fn kz1(&self, t: f64, z: Vec2, s: f64, zeta: Vec2) -> Result<f64> {
        Self::check_times(s, t)?;
        let e = self.forward(s, zeta, t)?;
        Self::kz1_with(&e, &self.field.sample(t, z), z)
    }

    /// `(KZ)_k(t, z; s, zeta)`, `k >= 1`.
    pub fn iterated_kernel(&self, k: usize, t: f64, z: Vec2, s: f64, zeta: Vec2) -> Result<f64> {
        Self::check_times(s, t)?;
        if k == 0 {
            return Err(Error::param("k", "iterated kernels start at k = 1"));
        }
        let pole = self.pole(s, zeta);
        let at = self.field.sample(t, z);
        if k == 1 {
            return Self::kz1_with(&self.slice(&pole, t)?, &at, z);
        }
        self.conv(&pole, 0, t, z, &at, Inner::Pure(k - 1))
    }

    /// `Gamma_N(t, z; s, zeta)` with `N = config.order`.
    pub fn fundamental_solution(&self, t: f64, z: Vec2, s: f64, zeta: Vec2) -> Result<KernelEvaluation> {
        self.fundamental_solution_order(self.cfg.order, t, z, s, zeta)
    }

    pub fn fundamental_solution_order(
        &self,
        n: usize,
        t: f64,
        z: Vec2,
        s: f64,
        zeta: Vec2,
    ) -> Result<KernelEvaluation> {
        Self::check_times(s, t)?;
        if n > 3 {
            return Err(Error::param("parametrix.order", "must be at most 3"));
        }
        let pole = self.pole(s, zeta);
        let e0 = self.slice(&pole, t)?;
        let j0 = Self::jet(&e0, z)?;
        let (mut val, mut dv, mut dvv) = (j0.value, j0.dv, j0.dvv);
        if n > 0 {
            let times = self.outer.time.nodes(s, t);
            let stops: Vec<f64> = times.iter().rev().map(|p| p.0).collect();
            let back = integrate_stops(&*self.field, t, z, &stops, &self.cfg.curve, Diffusion::Field)?;
            for (i, &(rho, wr)) in times.iter().enumerate() {
                let bk = &back[times.len() - 1 - i];
                let sl = self.slice(&pole, rho)?;
                let (mean, cov) = self.proposal(bk, &sl)?;
                for (eta, we) in self.outer.space.nodes(mean, &cov)? {
                    let e = self.forward(rho, eta, t)?;
                    let j = Self::jet(&e, z)?;
                    let at = self.field.sample(rho, eta);
                    let f = self.eval_inner(&pole, 1, rho, eta, &at, Inner::Phi(n))?;
                    let w = wr * we * f;
                    val += w * j.value;
                    dv += w * j.dv;
                    dvv += w * j.dvv;
                }
            }
        }
        Ok(KernelEvaluation { value: val, dv, dvv, order: KernelOrder::Parametrix(n) })
    }
}

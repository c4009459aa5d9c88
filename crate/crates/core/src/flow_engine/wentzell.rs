use std::sync::Arc;

use crate::coefficients::SpdeField;
use crate::error::{Error, Result};
use crate::flow_engine::BrownianPath;

/// The stochastic flow `gamma_{t,tau}(x, v)` with its first and second space derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlowState {
    pub gamma: f64,
    pub dv: f64,
    pub dx: f64,
    pub dvv: f64,
    pub dxv: f64,
    pub dxx: f64,
}

impl FlowState {
    fn lerp(&self, o: &FlowState, f: f64) -> FlowState {
        let l = |a: f64, b: f64| a + f * (b - a);
        FlowState {
            gamma: l(self.gamma, o.gamma),
            dv: l(self.dv, o.dv),
            dx: l(self.dx, o.dx),
            dvv: l(self.dvv, o.dvv),
            dxv: l(self.dxv, o.dxv),
            dxx: l(self.dxx, o.dxx),
        }
    }
}

/// Euler-Maruyama solution of `gamma_t = v - int_tau^t sigma_s(x, gamma_s) dW_s` on the path grid.
///
/// `d_v gamma` uses the exponential formula `exp(-int sigma_v dW - 1/2 int sigma_v^2 ds)`; the other
/// derivatives solve linear equations `dY = -(f + sigma_v Y) dW`, written as
/// `Y = -p (int f/p dW + int f sigma_v / p ds)` with left-point sums.
#[derive(Clone)]
pub struct ItoWentzellFlow {
    field: Arc<dyn SpdeField>,
    path: Arc<BrownianPath>,
    k0: usize,
    explicit: Option<Vec<f64>>,
}

impl std::fmt::Debug for ItoWentzellFlow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ItoWentzellFlow").field("tau", &self.tau()).finish()
    }
}

impl ItoWentzellFlow {
    pub fn new(field: Arc<dyn SpdeField>, path: Arc<BrownianPath>, tau: f64) -> Result<Self> {
        let k0 =
            path.node_index(tau).ok_or_else(|| Error::param("tau", "initial time must be a node of the path grid"))?;
        let explicit = if field.sigma_space_independent() {
            let mut c = vec![0.0; path.steps() + 1];
            for i in k0..path.steps() {
                let s = field.sigma(path.time(i), [0.0, 0.0]).s;
                c[i + 1] = c[i] + s * path.increment(i);
            }
            Some(c)
        } else {
            None
        };
        Ok(ItoWentzellFlow { field, path, k0, explicit })
    }

    pub fn tau(&self) -> f64 {
        self.path.time(self.k0)
    }

    pub fn path(&self) -> &Arc<BrownianPath> {
        &self.path
    }

    pub fn field(&self) -> &Arc<dyn SpdeField> {
        &self.field
    }

    /// Run the scheme from `tau` to node `k_end`, calling `visit(k, state)` at every node.
    fn run<F: FnMut(usize, &FlowState)>(&self, x: f64, v: f64, k_end: usize, mut visit: F) {
        if let Some(c) = &self.explicit {
            for k in self.k0..=k_end {
                visit(k, &FlowState { gamma: v - c[k], dv: 1.0, ..Default::default() });
            }
            return;
        }
        let dt = self.path.dt();
        let mut g = v;
        let (mut sp, mut uq, mut uvv, mut uxv, mut uxx) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut st = FlowState { gamma: v, dv: 1.0, ..Default::default() };
        visit(self.k0, &st);
        for i in self.k0..k_end {
            let dw = self.path.increment(i);
            let j = self.field.sigma(self.path.time(i), [x, g]);
            let (s1, s2) = (j.d1[0], j.d1[1]);
            let (s11, s12, s22) = (j.d2[0], j.d2[1], j.d2[2]);
            let p = st.dv;
            let q = st.dx;
            let fvv = s22 * p * p;
            let fxv = s12 * p + s22 * q * p;
            let fxx = s11 + 2.0 * s12 * q + s22 * q * q;
            g -= j.s * dw;
            sp += s2 * dw + 0.5 * s2 * s2 * dt;
            uq += s1 / p * dw + s1 * s2 / p * dt;
            uvv += fvv / p * dw + fvv * s2 / p * dt;
            uxv += fxv / p * dw + fxv * s2 / p * dt;
            uxx += fxx / p * dw + fxx * s2 / p * dt;
            let pn = (-sp).exp();
            st = FlowState { gamma: g, dv: pn, dx: -pn * uq, dvv: -pn * uvv, dxv: -pn * uxv, dxx: -pn * uxx };
            visit(i + 1, &st);
        }
    }

    /// Flow state at time `t >= tau`, linear in time between grid nodes.
    pub fn state(&self, t: f64, x: f64, v: f64) -> Result<FlowState> {
        let (i, f) = self.path.locate(t)?;
        if i < self.k0 {
            return Err(Error::OutsideWindow { t, t0: self.tau(), t1: self.path.t1() });
        }
        let k_end = if f > 0.0 { i + 1 } else { i };
        let mut lo = FlowState::default();
        let mut hi = FlowState::default();
        self.run(x, v, k_end, |k, s| {
            if k == i {
                lo = *s;
            }
            if k == k_end {
                hi = *s;
            }
        });
        Ok(if f > 0.0 { lo.lerp(&hi, f) } else { lo })
    }

    /// States at every grid node from `tau` up to `t_end` (inclusive, snapped down to a node).
    pub fn trajectory(&self, x: f64, v: f64, t_end: f64) -> Result<Vec<(f64, FlowState)>> {
        let (i, _) = self.path.locate(t_end)?;
        let mut out = Vec::with_capacity(i + 1 - self.k0.min(i));
        self.run(x, v, i, |k, s| out.push((self.path.time(k), *s)));
        Ok(out)
    }

    /// Solve `gamma_{t,tau}(x, w) = v` for `w` (safeguarded Newton).
    pub fn inverse(&self, t: f64, x: f64, v: f64) -> Result<f64> {
        let tol = 1e-13 * (1.0 + v.abs());
        let f = |w: f64| -> Result<FlowState> { self.state(t, x, w) };
        let mut w = v;
        let mut s = f(w)?;
        // bracket
        let mut step = 1.0 + (s.gamma - v).abs();
        let (mut lo, mut hi);
        if s.gamma > v {
            hi = w;
            lo = w - step;
            while f(lo)?.gamma > v {
                step *= 2.0;
                lo = w - step;
                if step > 1e12 {
                    return Err(Error::Numerical("inverse flow: no bracket".into()));
                }
            }
        } else {
            lo = w;
            hi = w + step;
            while f(hi)?.gamma < v {
                step *= 2.0;
                hi = w + step;
                if step > 1e12 {
                    return Err(Error::Numerical("inverse flow: no bracket".into()));
                }
            }
        }
        for _ in 0..200 {
            let r = s.gamma - v;
            if r.abs() <= tol {
                return Ok(w);
            }
            if r > 0.0 {
                hi = w;
            } else {
                lo = w;
            }
            let mut next = w - r / s.dv;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (hi - lo) <= 1e-15 * (1.0 + w.abs()) {
                return Ok(next);
            }
            w = next;
            s = f(w)?;
        }
        Err(Error::Numerical("inverse flow did not converge".into()))
    }
}

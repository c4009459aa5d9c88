use crate::coefficients::{KolmogorovField, Sample};
use crate::error::{Error, Result};
use crate::linalg::{Sym2, Vec2};

/// Number of RK4 steps for an interval of length `len`: `max(min_steps, ceil(len / max_h))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub min_steps: usize,
    pub max_h: f64,
}

impl StepRule {
    /// `h = len / max(64, ceil(len / tol^{1/4}))`.
    pub fn from_tolerance(tol: f64) -> Self {
        StepRule { min_steps: 64, max_h: tol.powf(0.25) }
    }

    pub fn steps(&self, len: f64) -> usize {
        let n = (len.abs() / self.max_h).ceil();
        (n as usize).max(self.min_steps).max(1)
    }
}

/// Weight of the covariance moments: the field's `a`, or 1 for the control Gramian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diffusion {
    Field,
    Unit,
}

/// Augmented state `[x, v, P, m0, m1, m2]` in elapsed time `e`:
/// `P' = d_v Y_1`, `m0' = a`, `m1' = a P`, `m2' = a P^2`.
pub(crate) type State = [f64; 6];

#[inline]
fn deriv(field: &dyn KolmogorovField, t: f64, st: &State, dir: f64, diff: Diffusion) -> (State, Sample) {
    let s = field.sample(t, [st[0], st[1]]);
    let a = match diff {
        Diffusion::Field => s.a,
        Diffusion::Unit => 1.0,
    };
    let p = st[2];
    ([dir * s.y[0], dir * s.y[1], s.dy[0][1], a, a * p, a * p * p], s)
}

#[inline]
fn rk4(field: &dyn KolmogorovField, t: f64, h: f64, dir: f64, st: &State, k1: &State, diff: Diffusion) -> State {
    let mut tmp = [0.0; 6];
    let th = t + dir * 0.5 * h;
    for i in 0..6 {
        tmp[i] = st[i] + 0.5 * h * k1[i];
    }
    let (k2, _) = deriv(field, th, &tmp, dir, diff);
    for i in 0..6 {
        tmp[i] = st[i] + 0.5 * h * k2[i];
    }
    let (k3, _) = deriv(field, th, &tmp, dir, diff);
    for i in 0..6 {
        tmp[i] = st[i] + h * k3[i];
    }
    let (k4, _) = deriv(field, t + dir * h, &tmp, dir, diff);
    let mut out = [0.0; 6];
    for i in 0..6 {
        out[i] = st[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Calls `f(t_a, t_b)` for each step from `s` to `t_end`, aligned with the field's time grid.
fn for_each_step<F: FnMut(f64, f64)>(field: &dyn KolmogorovField, s: f64, t_end: f64, rule: &StepRule, mut f: F) {
    let len = (t_end - s).abs();
    if len == 0.0 {
        return;
    }
    let dir = if t_end > s { 1.0 } else { -1.0 };
    let total = rule.steps(len) as f64;
    let mut bps: Vec<f64> = Vec::new();
    if let Some(g) = field.time_grid() {
        let lo = s.min(t_end);
        let hi = s.max(t_end);
        let tol = 1e-12 * (1.0 + hi.abs());
        let k0 = ((lo - g.t0) / g.dt).floor() as i64;
        let k1 = ((hi - g.t0) / g.dt).ceil() as i64;
        for k in k0..=k1 {
            let tk = g.t0 + k as f64 * g.dt;
            if tk > lo + tol && tk < hi - tol {
                bps.push(tk);
            }
        }
        if dir < 0.0 {
            bps.reverse();
        }
    }
    bps.push(t_end);
    let mut a = s;
    for &b in &bps {
        let seg = (b - a).abs();
        let n = ((total * seg / len).ceil() as usize).max(1);
        for i in 0..n {
            let ta = if i == 0 { a } else { a + dir * seg * i as f64 / n as f64 };
            let tb = if i + 1 == n { b } else { a + dir * seg * (i + 1) as f64 / n as f64 };
            f(ta, tb);
        }
        a = b;
    }
}

/// Endpoint of the augmented integral curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveEnd {
    pub time: f64,
    pub elapsed: f64,
    pub pos: Vec2,
    /// `P` accumulated from the start (`P_end - P_start` forward, `P_start - P_end` backward).
    pub p: f64,
    pub m: [f64; 3],
    /// Field sample at the endpoint.
    pub sample: Sample,
}

impl CurveEnd {
    fn from_state(time: f64, elapsed: f64, st: &State, sample: Sample) -> Self {
        CurveEnd { time, elapsed, pos: [st[0], st[1]], p: st[2], m: [st[3], st[4], st[5]], sample }
    }

    /// For a forward curve from `(s, zeta)`: `A_{t,s}` of the linearised system.
    pub fn forward_cov(&self) -> Sym2 {
        let p = self.p;
        let [m0, m1, m2] = self.m;
        Sym2::new(p * p * m0 - 2.0 * p * m1 + m2, p * m0 - m1, m0)
    }

    /// For a backward curve from `(t, z)` ending at time `rho`: the covariance `A_{t,rho}`
    /// of the kernel with pole `(rho, gamma_rho)`.
    pub fn backward_cov(&self) -> Sym2 {
        Sym2::new(self.m[2], self.m[1], self.m[0])
    }

    /// Backward curve: covariance of `eta -> Z(t, z; rho, eta)` seen as a Gaussian in `eta`,
    /// `J^{-1} A J^{-T}` with `J = [[1, r], [0, 1]]`.
    pub fn backward_pole_cov(&self) -> Sym2 {
        self.backward_cov().congruence([[1.0, -self.p], [0.0, 1.0]])
    }
}

fn check(s: f64, t_end: f64) -> Result<()> {
    if !(s.is_finite() && t_end.is_finite()) {
        return Err(Error::Numerical("non-finite curve endpoints".into()));
    }
    Ok(())
}

/// Integrate the curve of `Y` from `(s, z)` to `t_end` (either direction) and return the endpoint.
pub fn integrate_end(
    field: &dyn KolmogorovField,
    s: f64,
    z: Vec2,
    t_end: f64,
    rule: &StepRule,
    diff: Diffusion,
) -> Result<CurveEnd> {
    check(s, t_end)?;
    let dir = if t_end >= s { 1.0 } else { -1.0 };
    let mut st: State = [z[0], z[1], 0.0, 0.0, 0.0, 0.0];
    let (mut k, mut smp) = deriv(field, s, &st, dir, diff);
    for_each_step(field, s, t_end, rule, |ta, tb| {
        st = rk4(field, ta, (tb - ta).abs(), dir, &st, &k, diff);
        let (k2, s2) = deriv(field, tb, &st, dir, diff);
        k = k2;
        smp = s2;
    });
    if !st.iter().all(|x| x.is_finite()) {
        return Err(Error::Numerical(format!("integral curve from ({s}, {z:?}) blew up")));
    }
    Ok(CurveEnd::from_state(t_end, (t_end - s).abs(), &st, smp))
}

/// Integrate from `(s, z)` through the monotone list `stops` and record the state at each stop.
pub fn integrate_stops(
    field: &dyn KolmogorovField,
    s: f64,
    z: Vec2,
    stops: &[f64],
    rule: &StepRule,
    diff: Diffusion,
) -> Result<Vec<CurveEnd>> {
    let mut out = Vec::with_capacity(stops.len());
    let Some(&last) = stops.last() else {
        return Ok(out);
    };
    check(s, last)?;
    let dir = if last >= s { 1.0 } else { -1.0 };
    let total_len = (last - s).abs();
    let mut st: State = [z[0], z[1], 0.0, 0.0, 0.0, 0.0];
    let (mut k, mut smp) = deriv(field, s, &st, dir, diff);
    let mut a = s;
    for &b in stops {
        if (b - a) * dir < 0.0 {
            return Err(Error::Numerical("stops must be monotone".into()));
        }
        let seg = (b - a).abs();
        let sub = StepRule {
            min_steps: ((rule.steps(total_len) as f64 * seg / total_len.max(f64::MIN_POSITIVE)).ceil() as usize).max(1),
            max_h: rule.max_h,
        };
        for_each_step(field, a, b, &sub, |ta, tb| {
            st = rk4(field, ta, (tb - ta).abs(), dir, &st, &k, diff);
            let (k2, s2) = deriv(field, tb, &st, dir, diff);
            k = k2;
            smp = s2;
        });
        out.push(CurveEnd::from_state(b, (b - s).abs(), &st, smp));
        a = b;
    }
    Ok(out)
}

/// Integral curve with dense output (cubic Hermite between RK4 nodes).
#[derive(Debug, Clone)]
pub struct IntegralCurve {
    dir: f64,
    s: f64,
    times: Vec<f64>,
    states: Vec<State>,
    derivs: Vec<State>,
}

impl IntegralCurve {
    pub fn new(field: &dyn KolmogorovField, s: f64, z: Vec2, t_end: f64, rule: &StepRule) -> Result<Self> {
        check(s, t_end)?;
        let dir = if t_end >= s { 1.0 } else { -1.0 };
        let diff = Diffusion::Field;
        let mut st: State = [z[0], z[1], 0.0, 0.0, 0.0, 0.0];
        let (k0, _) = deriv(field, s, &st, dir, diff);
        let mut times = vec![s];
        let mut states = vec![st];
        let mut derivs = vec![k0];
        for_each_step(field, s, t_end, rule, |ta, tb| {
            let k = *derivs.last().unwrap();
            st = rk4(field, ta, (tb - ta).abs(), dir, &st, &k, diff);
            let (k2, _) = deriv(field, tb, &st, dir, diff);
            times.push(tb);
            states.push(st);
            derivs.push(k2);
        });
        if !states.last().unwrap().iter().all(|x| x.is_finite()) {
            return Err(Error::Numerical("integral curve blew up".into()));
        }
        Ok(IntegralCurve { dir, s, times, states, derivs })
    }

    pub fn start(&self) -> f64 {
        self.s
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn state(&self, t: f64) -> Result<State> {
        let e = (t - self.s) * self.dir;
        let total = (self.end() - self.s).abs();
        if e < -1e-12 * (1.0 + total) || e > total * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::Numerical(format!("time {t} outside the curve")));
        }
        let n = self.times.len();
        if n == 1 {
            return Ok(self.states[0]);
        }
        // binary search on elapsed time
        let key = |i: usize| (self.times[i] - self.s) * self.dir;
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if key(mid) <= e {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (e0, e1) = (key(lo), key(hi));
        let h = e1 - e0;
        let u = ((e - e0) / h).clamp(0.0, 1.0);
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        let mut out = [0.0; 6];
        for i in 0..6 {
            out[i] = h00 * self.states[lo][i]
                + h10 * h * self.derivs[lo][i]
                + h01 * self.states[hi][i]
                + h11 * h * self.derivs[hi][i];
        }
        Ok(out)
    }

    pub fn position(&self, t: f64) -> Result<Vec2> {
        let st = self.state(t)?;
        Ok([st[0], st[1]])
    }

    /// Forward curves: covariance `A_{t,s}` of the linearised system at time `t`.
    pub fn covariance(&self, t: f64) -> Result<Sym2> {
        let st = self.state(t)?;
        let p = st[2];
        Ok(Sym2::new(p * p * st[3] - 2.0 * p * st[4] + st[5], p * st[3] - st[4], st[3]))
    }

    /// `P_t - P_s`, the running integral of `d_v Y_1` along the curve.
    pub fn p_integral(&self, t: f64) -> Result<f64> {
        Ok(self.state(t)?[2])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.times
    }
}

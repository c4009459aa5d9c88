use crate::coefficients::KolmogorovField;
use crate::error::{Error, Result};
use crate::flow_engine::curve::{integrate_end, Diffusion, StepRule};
use crate::linalg::{mat_inverse, mat_vec, Vec2};

/// Minimum-energy steering of `psi' = Y(psi) + u e_2` from `(s, zeta)` to `z` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlResult {
    /// Control `u_rho = <E_{t,rho} e_2, lambda>` along the free curve.
    pub lambda: Vec2,
    pub energy: f64,
    pub endpoint_gap: f64,
    pub sup_control_sq: f64,
    pub iterations: usize,
    /// `(rho, u_rho)` at the RK4 nodes.
    pub control: Vec<(f64, f64)>,
}

struct Run {
    end: Vec2,
    energy: f64,
    sup_sq: f64,
    control: Vec<(f64, f64)>,
}

// state: [x_free, v_free, P_free, x, v, energy]
fn run(field: &dyn KolmogorovField, s: f64, zeta: Vec2, t: f64, p_end: f64, lambda: Vec2, n: usize) -> Run {
    let u = |p: f64| lambda[0] * (p_end - p) + lambda[1];
    let rhs = |tt: f64, st: &[f64; 6]| -> [f64; 6] {
        let f = field.sample(tt, [st[0], st[1]]);
        let c = field.sample(tt, [st[3], st[4]]);
        let uu = u(st[2]);
        [f.y[0], f.y[1], f.dy[0][1], c.y[0], c.y[1] + uu, uu * uu]
    };
    let h = (t - s) / n as f64;
    let mut st = [zeta[0], zeta[1], 0.0, zeta[0], zeta[1], 0.0];
    let mut control = Vec::with_capacity(n + 1);
    let mut sup_sq = u(0.0).powi(2);
    control.push((s, u(0.0)));
    for i in 0..n {
        let tt = s + i as f64 * h;
        let k1 = rhs(tt, &st);
        let mut tmp = [0.0; 6];
        for j in 0..6 {
            tmp[j] = st[j] + 0.5 * h * k1[j];
        }
        let k2 = rhs(tt + 0.5 * h, &tmp);
        for j in 0..6 {
            tmp[j] = st[j] + 0.5 * h * k2[j];
        }
        let k3 = rhs(tt + 0.5 * h, &tmp);
        for j in 0..6 {
            tmp[j] = st[j] + h * k3[j];
        }
        let k4 = rhs(tt + h, &tmp);
        for j in 0..6 {
            st[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let ui = u(st[2]);
        sup_sq = sup_sq.max(ui * ui);
        control.push((tt + h, ui));
    }
    Run { end: [st[3], st[4]], energy: st[5], sup_sq, control }
}

pub fn optimal_control(
    field: &dyn KolmogorovField,
    s: f64,
    zeta: Vec2,
    t: f64,
    z: Vec2,
    rule: &StepRule,
) -> Result<ControlResult> {
    if !(t > s) {
        return Err(Error::param("t", "target time must exceed the start time"));
    }
    let free = integrate_end(field, s, zeta, t, rule, Diffusion::Unit)?;
    let g = free.forward_cov();
    if !g.is_positive_definite() {
        return Err(Error::Numerical("controllability Gramian is singular".into()));
    }
    let n = rule.steps(t - s);
    let d = [z[0] - free.pos[0], z[1] - free.pos[1]];
    let mut lambda = g.inverse().apply(d);
    let scale = 1.0 + z[0].abs() + z[1].abs();
    let mut iterations = 0;
    let mut r = run(field, s, zeta, t, free.p, lambda, n);
    loop {
        let gap = [r.end[0] - z[0], r.end[1] - z[1]];
        let gn = gap[0].hypot(gap[1]);
        if gn <= 1e-13 * scale || iterations >= 50 {
            if !gn.is_finite() {
                return Err(Error::Numerical("controlled trajectory diverged".into()));
            }
            return Ok(ControlResult {
                lambda,
                energy: r.energy,
                endpoint_gap: gn,
                sup_control_sq: r.sup_sq,
                iterations,
                control: r.control,
            });
        }
        iterations += 1;
        // Newton step with a finite-difference Jacobian in lambda
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-6 * (1.0 + lambda[k].abs());
            let mut lp = lambda;
            let mut lm = lambda;
            lp[k] += h;
            lm[k] -= h;
            let ep = run(field, s, zeta, t, free.p, lp, n).end;
            let em = run(field, s, zeta, t, free.p, lm, n).end;
            jac[0][k] = (ep[0] - em[0]) / (2.0 * h);
            jac[1][k] = (ep[1] - em[1]) / (2.0 * h);
        }
        let step = mat_vec(mat_inverse(jac), gap);
        let prev = gn;
        let mut damp = 1.0;
        loop {
            let cand = [lambda[0] - damp * step[0], lambda[1] - damp * step[1]];
            let rc = run(field, s, zeta, t, free.p, cand, n);
            let gc = (rc.end[0] - z[0]).hypot(rc.end[1] - z[1]);
            if gc < prev || damp < 1e-3 {
                lambda = cand;
                r = rc;
                break;
            }
            damp *= 0.5;
        }
    }
}

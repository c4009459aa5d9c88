//! Gaussian building blocks: the heat kernel with covariance `A`, the Langevin covariance `Q_t`,
//! the explicit kernel of the constant-coefficient equation and its conditional moments.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::flow_engine::BrownianPath;
use crate::linalg::{Sym2, Vec2};

/// Which approximation produced a kernel value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelOrder {
    ClosedForm,
    Parametrix(usize),
    Stochastic(usize),
}

/// Kernel value with its first and second `v`-derivatives in the forward variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEvaluation {
    pub value: f64,
    pub dv: f64,
    pub dvv: f64,
    pub order: KernelOrder,
}

/// `(2 pi sqrt(det A))^{-1} exp(-<A^{-1} z, z>/2)`.
pub fn heat_kernel(a: &Sym2, z: Vec2) -> Result<f64> {
    if !a.is_positive_definite() {
        return Err(Error::NotPositiveDefinite(a.det()));
    }
    Ok(heat_unchecked(a, z))
}

fn heat_unchecked(a: &Sym2, z: Vec2) -> f64 {
    let d = a.det();
    (-0.5 * a.inverse().quad(z)).exp() / (2.0 * PI * d.sqrt())
}

/// Value and derivatives of `z -> Gamma_heat(A, z - m)`; `w = z - m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatJet {
    pub value: f64,
    pub dx: f64,
    pub dv: f64,
    pub dvv: f64,
}

/// Heat kernel and derivatives evaluated in coordinates dilated by `h` (the elapsed time),
/// which keeps the computation well conditioned when `A` scales like `Q_h` with `h` tiny.
pub fn heat_jet(a: &Sym2, h: f64, w: Vec2) -> Result<HeatJet> {
    if !(h > 0.0) {
        return Err(Error::Numerical(format!("non-positive elapsed time {h}")));
    }
    let s2 = 1.0 / h.sqrt();
    let s1 = s2 / h;
    let at = Sym2::new(a.xx * s1 * s1, a.xv * s1 * s2, a.vv * s2 * s2);
    let d = at.det();
    if !(at.xx > 0.0 && d > 0.0) {
        return Err(Error::NotPositiveDefinite(a.det()));
    }
    let inv = at.inverse();
    let wt = [w[0] * s1, w[1] * s2];
    let u = inv.apply(wt);
    let value = (-0.5 * (wt[0] * u[0] + wt[1] * u[1])).exp() * s1 * s2 / (2.0 * PI * d.sqrt());
    Ok(HeatJet { value, dx: -s1 * u[0] * value, dv: -s2 * u[1] * value, dvv: s2 * s2 * (u[1] * u[1] - inv.vv) * value })
}

/// `Q_t = [[t^3/3, t^2/2], [t^2/2, t]]`.
pub fn q_matrix(t: f64) -> Sym2 {
    Sym2::new(t * t * t / 3.0, t * t / 2.0, t)
}

/// `Q_t^{-1} = [[12/t^3, -6/t^2], [-6/t^2, 4/t]]`.
pub fn q_inverse(t: f64) -> Sym2 {
    Sym2::new(12.0 / (t * t * t), -6.0 / (t * t), 4.0 / t)
}

/// Explicit kernel of the Langevin equation with diffusion `a - sigma^2` started at the origin:
/// `sqrt(3)/(pi t^2 (a - sigma^2)) exp(-2/(a - sigma^2) (v^2/t - 3 v x/t^2 + 3 x^2/t^3))`.
pub fn gamma0(t: f64, x: f64, v: f64, a: f64, sigma: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::param("t", "must be positive"));
    }
    let c = a - sigma * sigma;
    if !(c > 0.0) {
        return Err(Error::param("a", "need a > sigma^2"));
    }
    let e = v * v / t - 3.0 * v * x / (t * t) + 3.0 * x * x / (t * t * t);
    Ok(3f64.sqrt() / (PI * t * t * c) * (-2.0 / c * e).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSpdeParams {
    pub a: f64,
    pub sigma: f64,
}

impl ConstantSpdeParams {
    pub fn new(a: f64, sigma: f64) -> Result<Self> {
        if !(a > sigma * sigma) {
            return Err(Error::param("a", format!("need a > sigma^2 (a = {a}, sigma = {sigma})")));
        }
        Ok(ConstantSpdeParams { a, sigma })
    }
}

/// Mean and covariance of `(X_t, V_t)` given the observation path, pole at the path start.
pub fn conditional_moments(p: &ConstantSpdeParams, t: f64, zeta: Vec2, path: &BrownianPath) -> Result<(Vec2, Sym2)> {
    conditional_moments_from(p, path.t0(), t, zeta, path)
}

/// Same with pole time `tau`: the mean is
/// `(xi + (t - tau) eta - sigma int_tau^t (t - s) dW_s, eta - sigma (W_t - W_tau))`
/// with the stochastic integral written as `int_tau^t (W_s - W_tau) ds` on the interpolated path,
/// and the covariance is `(a - sigma^2) Q_{t - tau}`.
pub fn conditional_moments_from(
    p: &ConstantSpdeParams,
    tau: f64,
    t: f64,
    zeta: Vec2,
    path: &BrownianPath,
) -> Result<(Vec2, Sym2)> {
    if !(t > tau) {
        return Err(Error::param("t", "must exceed the pole time"));
    }
    let dw = path.value(t)? - path.value(tau)?;
    let iw = path.integral_from(tau, t)?;
    let h = t - tau;
    let mean = [zeta[0] + h * zeta[1] - p.sigma * iw, zeta[1] - p.sigma * dw];
    Ok((mean, q_matrix(h).scale(p.a - p.sigma * p.sigma)))
}

/// Explicit kernel of the constant-coefficient stochastic equation along a given path.
pub fn closed_form_kernel(
    p: &ConstantSpdeParams,
    path: &BrownianPath,
    t: f64,
    z: Vec2,
    tau: f64,
    zeta: Vec2,
) -> Result<KernelEvaluation> {
    let (m, c) = conditional_moments_from(p, tau, t, zeta, path)?;
    let j = heat_jet(&c, t - tau, [z[0] - m[0], z[1] - m[1]])?;
    Ok(KernelEvaluation { value: j.value, dv: j.dv, dvv: j.dvv, order: KernelOrder::ClosedForm })
}

/// Kernel of the deterministic Langevin equation with constant diffusion `a` (drift `(v, 0)`).
pub fn langevin_kernel(a: f64, t: f64, z: Vec2, s: f64, zeta: Vec2) -> Result<KernelEvaluation> {
    let h = t - s;
    let m = [zeta[0] + h * zeta[1], zeta[1]];
    let j = heat_jet(&q_matrix(h).scale(a), h, [z[0] - m[0], z[1] - m[1]])?;
    Ok(KernelEvaluation { value: j.value, dv: j.dv, dvv: j.dvv, order: KernelOrder::ClosedForm })
}

/// Gaussian `Gamma_a(t, x, y; s)` with covariance
/// `a [[(t^3 - s^3)/3, -(t^2 - s^2)/2], [-(t^2 - s^2)/2, t - s]]`, together with its derivatives
/// along `Vbar_t = d_y - t d_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedGaussian {
    pub value: f64,
    pub vbar: f64,
    pub vbar2: f64,
}

pub fn tilted_gaussian(a: f64, t: f64, s: f64, x: f64, y: f64) -> Result<TiltedGaussian> {
    if !(t > s) || !(a > 0.0) {
        return Err(Error::param("t", "need t > s and a > 0"));
    }
    let c = Sym2::new(a * (t * t * t - s * s * s) / 3.0, -a * (t * t - s * s) / 2.0, a * (t - s));
    let value = heat_kernel(&c, [x, y])?;
    let inv = c.inverse();
    let u = inv.apply([x, y]);
    let l = [-t, 1.0];
    let lu = l[0] * u[0] + l[1] * u[1];
    Ok(TiltedGaussian { value, vbar: -lu * value, vbar2: (lu * lu - inv.quad(l)) * value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::PlaneRule;

    #[test]
    fn gamma0_at_unit_time_origin() {
        let g = gamma0(1.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        assert!((g - 3f64.sqrt() / PI).abs() < 1e-15);
    }

    #[test]
    fn gamma0_is_the_heat_kernel_of_scaled_q() {
        for &(t, x, v, a, s) in &[(0.5, 0.1, -0.3, 1.0, 0.5), (2.0, -1.0, 0.7, 2.0, 1.0), (0.1, 0.01, 0.2, 1.5, 0.2)] {
            let g = gamma0(t, x, v, a, s).unwrap();
            let h = heat_kernel(&q_matrix(t).scale(a - s * s), [x, v]).unwrap();
            let j = heat_jet(&q_matrix(t).scale(a - s * s), t, [x, v]).unwrap();
            assert!((g - h).abs() <= 1e-13 * g, "{g} {h}");
            assert!((g - j.value).abs() <= 1e-13 * g);
        }
    }

    #[test]
    fn q_inverse_is_inverse() {
        for &t in &[0.01, 0.5, 3.0] {
            let q = q_matrix(t);
            let i = q_inverse(t);
            let e = q.apply(i.apply([1.0, 0.0]));
            assert!((e[0] - 1.0).abs() < 1e-12 && e[1].abs() < 1e-12);
            assert!((q.det() - t.powi(4) / 12.0).abs() < 1e-14 * t.powi(4));
        }
    }

    #[test]
    fn heat_kernel_rejects_indefinite() {
        assert!(heat_kernel(&Sym2::new(1.0, 2.0, 1.0), [0.0, 0.0]).is_err());
    }

    #[test]
    fn gamma0_integrates_to_one() {
        let rule = PlaneRule::new(20).unwrap();
        for &t in &[0.5, 1.0, 2.0] {
            let c = q_matrix(t).scale(0.75);
            let i = rule.integrate([0.0, 0.0], &c.scale(1.3), |z| gamma0(t, z[0], z[1], 1.0, 0.5).unwrap()).unwrap();
            assert!((i - 1.0).abs() < 1e-8, "t = {t}: {i}");
        }
    }

    #[test]
    fn heat_jet_derivatives_match_differences() {
        let a = q_matrix(0.3).scale(1.2);
        let w = [0.02, -0.4];
        let j = heat_jet(&a, 0.3, w).unwrap();
        let f = |w: Vec2| heat_kernel(&a, w).unwrap();
        let h = 1e-5;
        let dv = (f([w[0], w[1] + h]) - f([w[0], w[1] - h])) / (2.0 * h);
        let dx = (f([w[0] + h, w[1]]) - f([w[0] - h, w[1]])) / (2.0 * h);
        let dvv = (f([w[0], w[1] + h]) - 2.0 * f(w) + f([w[0], w[1] - h])) / (h * h);
        assert!((dv - j.dv).abs() < 1e-6 * j.dv.abs());
        assert!((dx - j.dx).abs() < 1e-6 * j.dx.abs());
        assert!((dvv - j.dvv).abs() < 1e-4 * j.dvv.abs());
    }

    #[test]
    fn tilted_gaussian_matches_explicit_derivatives() {
        // Vbar Gamma = 2 (3x + y (t + 2s)) / (a (t-s)^2) Gamma,
        // Vbar^2 Gamma = 4/(a (t-s)) ((3x + y (t + 2s))^2 / (a (t-s)^3) - 1) Gamma
        for &(a, t, s, x, y) in &[(1.0, 1.0, 0.2, 0.3, -0.1), (2.0, 0.7, -0.5, -0.2, 0.4)] {
            let g = tilted_gaussian(a, t, s, x, y).unwrap();
            let d = t - s;
            let k = 3.0 * x + y * (t + 2.0 * s);
            let v1 = 2.0 * k / (a * d * d) * g.value;
            let v2 = 4.0 / (a * d) * (k * k / (a * d * d * d) - 1.0) * g.value;
            assert!((g.vbar - v1).abs() < 1e-12 * (1.0 + v1.abs()), "{} {}", g.vbar, v1);
            assert!((g.vbar2 - v2).abs() < 1e-11 * (1.0 + v2.abs()), "{} {}", g.vbar2, v2);
        }
    }

    #[test]
    fn moments_of_constant_equation() {
        let path = BrownianPath::from_values(0.0, 0.5, vec![0.0, 1.0, 0.0]).unwrap();
        let p = ConstantSpdeParams::new(1.0, 0.5).unwrap();
        let (m, c) = conditional_moments(&p, 1.0, [0.0, 1.0], &path).unwrap();
        // int_0^1 W ds = 0.5, W_1 = 0
        assert!((m[0] - (1.0 - 0.25)).abs() < 1e-15);
        assert!((m[1] - 1.0).abs() < 1e-15);
        assert!((c.xx - 0.75 / 3.0).abs() < 1e-15);
        assert!(ConstantSpdeParams::new(1.0, 1.0).is_err());
    }
}

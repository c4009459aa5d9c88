//! Coefficient fields, the builtin families and sampled checks of the structural assumptions.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::report::CheckLine;

/// Coefficients of `K = 1/2 a d_vv + b d_v - <Y, grad> - d_t` at one point.
/// `dy[i][j]` is the derivative of `Y_i` in direction `j` (0 = x, 1 = v).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub a: f64,
    pub b: f64,
    pub y: Vec2,
    pub dy: [[f64; 2]; 2],
}

/// Uniform time grid whose nodes are breakpoints of a field's time dependence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
}

pub trait KolmogorovField: Send + Sync {
    fn sample(&self, t: f64, z: Vec2) -> Sample;

    fn time_grid(&self) -> Option<TimeGrid> {
        None
    }
}

/// `sigma` with its space derivatives: `d2 = [xx, xv, vv]`, `d3 = [xxx, xxv, xvv, vvv]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SigmaJet {
    pub s: f64,
    pub d1: [f64; 2],
    pub d2: [f64; 3],
    pub d3: [f64; 4],
}

pub trait SpdeField: Send + Sync {
    fn a(&self, t: f64, z: Vec2) -> f64;
    fn sigma(&self, t: f64, z: Vec2) -> SigmaJet;

    /// True when `sigma` does not depend on `(x, v)`; the flow is then explicit.
    fn sigma_space_independent(&self) -> bool {
        false
    }

    /// Advertised flattening exponent and constant `(eps, M)`.
    fn flattening(&self) -> Option<(f64, f64)> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KolmogorovFamily {
    /// `a = base + amp sin(freq x)`, `b = 0`, `Y = (v, 0)`.
    SinPerturbedA { base: f64, amp: f64, freq: f64, alpha: f64 },
    /// Constant `a`, `b`, `Y = (v, 0)`.
    LangevinDrift { a: f64, b: f64 },
    /// Constant `a`, `Y = (v + c sin v, 0)`.
    PerturbedDrift { a: f64, c: f64 },
}

impl KolmogorovFamily {
    /// Hoelder exponent used by the validator and the singular time rule.
    pub fn alpha(&self) -> f64 {
        match *self {
            KolmogorovFamily::SinPerturbedA { alpha, .. } => alpha,
            _ => 1.0,
        }
    }
}

impl KolmogorovField for KolmogorovFamily {
    fn sample(&self, _t: f64, z: Vec2) -> Sample {
        match *self {
            KolmogorovFamily::SinPerturbedA { base, amp, freq, .. } => {
                Sample { a: base + amp * (freq * z[0]).sin(), b: 0.0, y: [z[1], 0.0], dy: [[0.0, 1.0], [0.0, 0.0]] }
            }
            KolmogorovFamily::LangevinDrift { a, b } => Sample { a, b, y: [z[1], 0.0], dy: [[0.0, 1.0], [0.0, 0.0]] },
            KolmogorovFamily::PerturbedDrift { a, c } => {
                Sample { a, b: 0.0, y: [z[1] + c * z[1].sin(), 0.0], dy: [[0.0, 1.0 + c * z[1].cos()], [0.0, 0.0]] }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpdeFamily {
    Constant {
        a: f64,
        sigma: f64,
    },
    /// Constant `a`, `sigma = sigma0 + sigma1 / (1 + x^2 + v^2)`.
    FlatteningSigma {
        a: f64,
        sigma0: f64,
        sigma1: f64,
        eps: f64,
    },
}

impl SpdeField for SpdeFamily {
    fn a(&self, _t: f64, _z: Vec2) -> f64 {
        match *self {
            SpdeFamily::Constant { a, .. } | SpdeFamily::FlatteningSigma { a, .. } => a,
        }
    }

    fn sigma(&self, _t: f64, z: Vec2) -> SigmaJet {
        match *self {
            SpdeFamily::Constant { sigma, .. } => SigmaJet { s: sigma, ..Default::default() },
            SpdeFamily::FlatteningSigma { sigma0, sigma1, .. } => {
                let (x, v) = (z[0], z[1]);
                let q = 1.0 + x * x + v * v;
                // g(q) = sigma1 / q and its q-derivatives
                let g1 = -sigma1 / (q * q);
                let g2 = 2.0 * sigma1 / (q * q * q);
                let g3 = -6.0 * sigma1 / (q * q * q * q);
                // d_i q = 2 x_i, d_ij q = 2 delta_ij
                let d1 = [2.0 * x * g1, 2.0 * v * g1];
                let d2 = [2.0 * g1 + 4.0 * x * x * g2, 4.0 * x * v * g2, 2.0 * g1 + 4.0 * v * v * g2];
                let third = |i: f64, j: f64, k: f64, dij: f64, dik: f64, djk: f64| {
                    8.0 * i * j * k * g3 + 4.0 * g2 * (dij * k + dik * j + djk * i)
                };
                let d3 = [
                    third(x, x, x, 1.0, 1.0, 1.0),
                    third(x, x, v, 1.0, 0.0, 0.0),
                    third(x, v, v, 0.0, 0.0, 1.0),
                    third(v, v, v, 1.0, 1.0, 1.0),
                ];
                SigmaJet { s: sigma0 + sigma1 / q, d1, d2, d3 }
            }
        }
    }

    fn sigma_space_independent(&self) -> bool {
        matches!(self, SpdeFamily::Constant { .. })
    }

    fn flattening(&self) -> Option<(f64, f64)> {
        match *self {
            SpdeFamily::Constant { .. } => Some((0.25, 0.0)),
            // |d^k sigma| (1 + |z|^2)^{w_k} <= 72 sigma1 for eps <= 3/2
            SpdeFamily::FlatteningSigma { sigma1, eps, .. } => Some((eps, 72.0 * sigma1.abs())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Kolmogorov(KolmogorovFamily),
    Spde(SpdeFamily),
}

pub const FAMILY_NAMES: [&str; 5] =
    ["constant", "sin-perturbed-a", "flattening-sigma", "langevin-drift", "perturbed-drift"];

fn take(params: &BTreeMap<String, f64>, allowed: &[(&str, f64)], family: &str) -> Result<Vec<f64>> {
    for k in params.keys() {
        if !allowed.iter().any(|(n, _)| n == k) {
            return Err(Error::param(k, format!("not a parameter of family `{family}`")));
        }
    }
    allowed
        .iter()
        .map(|&(n, d)| {
            let v = params.get(n).copied().unwrap_or(d);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::param(n, "must be finite"))
            }
        })
        .collect()
}

/// Builtin family by name; missing parameters take their defaults.
pub fn builtin_family(name: &str, params: &BTreeMap<String, f64>) -> Result<Family> {
    match name {
        "constant" => {
            let p = take(params, &[("a", 1.0), ("sigma", 0.0)], name)?;
            Ok(Family::Spde(SpdeFamily::Constant { a: p[0], sigma: p[1] }))
        }
        "sin-perturbed-a" => {
            let p = take(params, &[("base", 1.0), ("amp", 0.1), ("freq", 1.0), ("alpha", 0.5)], name)?;
            if !(p[3] > 0.0 && p[3] <= 1.0) {
                return Err(Error::param("alpha", "must lie in (0, 1]"));
            }
            Ok(Family::Kolmogorov(KolmogorovFamily::SinPerturbedA { base: p[0], amp: p[1], freq: p[2], alpha: p[3] }))
        }
        "flattening-sigma" => {
            let p = take(params, &[("a", 1.0), ("sigma0", 0.3), ("sigma1", 0.2), ("eps", 0.25)], name)?;
            if !(p[3] > 0.0 && p[3] <= 1.5) {
                return Err(Error::param("eps", "must lie in (0, 1.5]"));
            }
            Ok(Family::Spde(SpdeFamily::FlatteningSigma { a: p[0], sigma0: p[1], sigma1: p[2], eps: p[3] }))
        }
        "langevin-drift" => {
            let p = take(params, &[("a", 1.0), ("b", 0.0)], name)?;
            Ok(Family::Kolmogorov(KolmogorovFamily::LangevinDrift { a: p[0], b: p[1] }))
        }
        "perturbed-drift" => {
            let p = take(params, &[("a", 1.0), ("c", 0.1)], name)?;
            Ok(Family::Kolmogorov(KolmogorovFamily::PerturbedDrift { a: p[0], c: p[1] }))
        }
        other => Err(Error::UnknownFamily(other.to_string())),
    }
}

/// Sampling grid for the assumption checks.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub t: (f64, f64),
    pub x: (f64, f64),
    pub v: (f64, f64),
    pub nt: usize,
    pub nx: usize,
    pub nv: usize,
    pub budget: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            t: (0.0, 1.0),
            x: (-10.0, 10.0),
            v: (-10.0, 10.0),
            nt: 101,
            nx: 101,
            nv: 101,
            budget: 101 * 101 * 101,
        }
    }
}

fn axis(r: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![r.0];
    }
    (0..n).map(|i| r.0 + (r.1 - r.0) * i as f64 / (n - 1) as f64).collect()
}

impl GridSpec {
    pub fn small(nt: usize, nx: usize, nv: usize) -> Self {
        GridSpec { nt, nx, nv, ..Default::default() }
    }

    fn points(&self) -> Result<Vec<(f64, Vec2)>> {
        if self.nt == 0 || self.nx == 0 || self.nv == 0 {
            return Err(Error::param("grid", "empty grid"));
        }
        let total = self.nt.saturating_mul(self.nx).saturating_mul(self.nv);
        if total > self.budget {
            return Err(Error::param("grid.budget", format!("{total} points exceed the budget {}", self.budget)));
        }
        let (ts, xs, vs) = (axis(self.t, self.nt), axis(self.x, self.nx), axis(self.v, self.nv));
        let mut out = Vec::with_capacity(total);
        for &t in &ts {
            for &x in &xs {
                for &v in &vs {
                    out.push((t, [x, v]));
                }
            }
        }
        Ok(out)
    }
}

/// Offsets `delta` with `|delta|` in `[1e-3, 1]` used for the Hoelder and Lipschitz quotients.
fn offsets() -> Vec<Vec2> {
    let mut out = Vec::new();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for &m in &[1e-3, 1e-2, 0.1, 0.25, 0.5, 1.0] {
        out.push([m, 0.0]);
        out.push([0.0, m]);
        out.push([m * r, m * r]);
        out.push([m * r, -m * r]);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub lambda1: f64,
    pub lambda2: Option<f64>,
    pub holder_sup: f64,
    pub coercivity_min: Option<f64>,
    /// Weighted sups of the first, second and third derivatives of sigma.
    pub flattening: Option<[f64; 3]>,
    pub checks: Vec<CheckLine>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn validate_assumptions(family: &Family, grid: &GridSpec) -> Result<AssumptionReport> {
    match family {
        Family::Kolmogorov(k) => validate_kolmogorov(k, k.alpha(), grid),
        Family::Spde(s) => validate_spde(s, grid),
    }
}

/// Sampled check of ellipticity/boundedness of `a`, `b`, Lipschitz `Y` and the bounds on `d_v Y_1`.
pub fn validate_kolmogorov(field: &dyn KolmogorovField, alpha: f64, grid: &GridSpec) -> Result<AssumptionReport> {
    let pts = grid.points()?;
    let offs = offsets();
    let (mut a_min, mut a_max, mut b_sup) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    let (mut p_min, mut p_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut hold_a, mut hold_b, mut hold_p, mut lip) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(t, z) in &pts {
        let s = field.sample(t, z);
        a_min = a_min.min(s.a);
        a_max = a_max.max(s.a);
        b_sup = b_sup.max(s.b.abs());
        p_min = p_min.min(s.dy[0][1]);
        p_max = p_max.max(s.dy[0][1]);
        for d in &offs {
            let q = field.sample(t, [z[0] + d[0], z[1] + d[1]]);
            let r = d[0].hypot(d[1]);
            let ra = r.powf(alpha);
            hold_a = hold_a.max((s.a - q.a).abs() / ra);
            hold_b = hold_b.max((s.b - q.b).abs() / ra);
            hold_p = hold_p.max((s.dy[0][1] - q.dy[0][1]).abs() / ra);
            lip = lip.max((s.y[0] - q.y[0]).hypot(s.y[1] - q.y[1]) / r);
        }
    }
    let holder = hold_a.max(hold_b);
    let lambda1 = a_max.max(1.0 / a_min).max(b_sup).max(holder);
    let lambda2 = lip.max(p_max).max(1.0 / p_min).max(hold_p);
    let checks = vec![
        CheckLine::at_least("ellipticity_min_a", a_min, f64::MIN_POSITIVE),
        CheckLine::at_most("lambda1", lambda1, f64::MAX),
        CheckLine::at_most("holder_sup", holder, f64::MAX),
        CheckLine::at_least("min_dv_y1", p_min, f64::MIN_POSITIVE),
        CheckLine::at_most("lambda2", lambda2, f64::MAX),
    ];
    Ok(AssumptionReport {
        lambda1: if a_min > 0.0 { lambda1 } else { f64::INFINITY },
        lambda2: Some(if p_min > 0.0 { lambda2 } else { f64::INFINITY }),
        holder_sup: holder,
        coercivity_min: None,
        flattening: None,
        checks,
    })
}

/// Sampled check of regularity, coercivity `a - sigma^2 > 0` and flattening of `sigma`.
pub fn validate_spde(field: &dyn SpdeField, grid: &GridSpec) -> Result<AssumptionReport> {
    let pts = grid.points()?;
    let offs = offsets();
    let (mut a_min, mut a_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut coer = f64::INFINITY;
    let mut hold = 0.0f64;
    let mut dsup = 0.0f64;
    let mut flat = [0.0f64; 3];
    for &(t, z) in &pts {
        let a = field.a(t, z);
        let s = field.sigma(t, z);
        a_min = a_min.min(a);
        a_max = a_max.max(a);
        coer = coer.min(a - s.s * s.s);
        let m1 = s.d1[0].hypot(s.d1[1]);
        let m2 = s.d2.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let m3 = s.d3.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        dsup = dsup.max(s.s.abs()).max(m1).max(m2).max(m3);
        let q = 1.0 + z[0] * z[0] + z[1] * z[1];
        if let Some((eps, _)) = field.flattening() {
            flat[0] = flat[0].max(q.powf(eps) * m1);
            flat[1] = flat[1].max(q.powf(0.5 + eps) * m2);
            flat[2] = flat[2].max(q.powf(0.5 + eps) * m3);
        }
        for d in &offs {
            let zq = [z[0] + d[0], z[1] + d[1]];
            let r = d[0].hypot(d[1]);
            hold = hold.max((a - field.a(t, zq)).abs() / r);
        }
    }
    let lambda1 = a_max.max(1.0 / coer).max(hold).max(dsup);
    let mut checks = vec![
        CheckLine::at_least("coercivity_min", coer, f64::MIN_POSITIVE),
        CheckLine::at_most("sigma_derivative_sup", dsup, f64::MAX),
        CheckLine::at_most("holder_sup", hold, f64::MAX),
    ];
    let flattening = field.flattening().map(|(_, m)| {
        checks.push(CheckLine::at_most("flattening_d1", flat[0], m));
        checks.push(CheckLine::at_most("flattening_d2", flat[1], m));
        checks.push(CheckLine::at_most("flattening_d3", flat[2], m));
        flat
    });
    Ok(AssumptionReport {
        lambda1: if coer > 0.0 { lambda1 } else { f64::INFINITY },
        lambda2: None,
        holder_sup: hold,
        coercivity_min: Some(coer),
        flattening,
        checks,
    })
}

/// The vector fields `sqrt(a) e_2` and `[sqrt(a) d_v, Y]` as columns, with their determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HormanderReport {
    pub matrix: [[f64; 2]; 2],
    pub det: f64,
}

pub fn hormander_check(field: &dyn KolmogorovField, t: f64, z: Vec2) -> HormanderReport {
    let s = field.sample(t, z);
    let ra = s.a.max(0.0).sqrt();
    let h = 1e-6 * (1.0 + z[0].abs() + z[1].abs());
    let sqrt_a = |p: Vec2| field.sample(t, p).a.max(0.0).sqrt();
    let gx = (sqrt_a([z[0] + h, z[1]]) - sqrt_a([z[0] - h, z[1]])) / (2.0 * h);
    let gv = (sqrt_a([z[0], z[1] + h]) - sqrt_a([z[0], z[1] - h])) / (2.0 * h);
    // [X, Y] = X(Y) - Y(X) with X = sqrt(a) e_2
    let c0 = ra * s.dy[0][1];
    let c1 = ra * s.dy[1][1] - (s.y[0] * gx + s.y[1] * gv);
    let matrix = [[0.0, c0], [ra, c1]];
    HormanderReport { matrix, det: -ra * c0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: &[(&str, f64)]) -> BTreeMap<String, f64> {
        p.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(builtin_family("nope", &BTreeMap::new()), Err(Error::UnknownFamily(_))));
        let e = builtin_family("constant", &params(&[("sigm", 0.5)])).unwrap_err();
        assert!(e.to_string().contains("sigm"));
    }

    #[test]
    fn flattening_sigma_derivatives_match_differences() {
        let f = SpdeFamily::FlatteningSigma { a: 1.0, sigma0: 0.3, sigma1: 0.2, eps: 0.25 };
        let z = [0.7, -0.4];
        let j = f.sigma(0.0, z);
        let h = 1e-5;
        let at = |x: f64, v: f64| f.sigma(0.0, [x, v]);
        let dx = (at(z[0] + h, z[1]).s - at(z[0] - h, z[1]).s) / (2.0 * h);
        let dxv = (at(z[0], z[1] + h).d1[0] - at(z[0], z[1] - h).d1[0]) / (2.0 * h);
        let dxxv = (at(z[0], z[1] + h).d2[0] - at(z[0], z[1] - h).d2[0]) / (2.0 * h);
        let dvvv = (at(z[0], z[1] + h).d2[2] - at(z[0], z[1] - h).d2[2]) / (2.0 * h);
        let dxvv = (at(z[0] + h, z[1]).d2[2] - at(z[0] - h, z[1]).d2[2]) / (2.0 * h);
        assert!((dx - j.d1[0]).abs() < 1e-8);
        assert!((dxv - j.d2[1]).abs() < 1e-8);
        assert!((dxxv - j.d3[1]).abs() < 1e-7);
        assert!((dxvv - j.d3[2]).abs() < 1e-7);
        assert!((dvvv - j.d3[3]).abs() < 1e-7);
    }

    #[test]
    fn hormander_determinant_for_langevin() {
        let f = KolmogorovFamily::LangevinDrift { a: 1.0, b: 0.0 };
        let r = hormander_check(&f, 0.0, [0.3, -2.0]);
        assert!((r.det.abs() - 1.0).abs() < 1e-12);
        let g = KolmogorovFamily::LangevinDrift { a: 0.0, b: 0.0 };
        assert_eq!(hormander_check(&g, 0.0, [0.0, 0.0]).det, 0.0);
    }

    #[test]
    fn coercivity_fails_at_equality() {
        let g = GridSpec::small(2, 5, 5);
        let ok = validate_assumptions(&Family::Spde(SpdeFamily::Constant { a: 1.0, sigma: 0.5 }), &g).unwrap();
        assert!(ok.passed());
        let bad = validate_assumptions(&Family::Spde(SpdeFamily::Constant { a: 1.0, sigma: 1.0 }), &g).unwrap();
        assert!(!bad.passed());
    }

    #[test]
    fn budget_is_enforced() {
        let mut g = GridSpec::small(10, 10, 10);
        g.budget = 999;
        let f = Family::Kolmogorov(KolmogorovFamily::LangevinDrift { a: 1.0, b: 0.0 });
        assert!(validate_assumptions(&f, &g).is_err());
    }
}

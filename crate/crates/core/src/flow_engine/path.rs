use crate::error::{Error, Result};
use crate::rng;

/// Brownian path sampled on a uniform grid, `W(t0) = 0`, linearly interpolated between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    t0: f64,
    dt: f64,
    w: Vec<f64>,
    seed: u64,
    stream: u64,
    level: u32,
}

impl BrownianPath {
    pub fn sample(seed: u64, stream: u64, t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t1 > t0) {
            return Err(Error::param("path.dt", "need dt > 0 and t1 > t0"));
        }
        let n = ((t1 - t0) / dt).round() as usize;
        if n == 0 || ((n as f64) * dt - (t1 - t0)).abs() > 1e-9 * (t1 - t0) {
            return Err(Error::param("path.dt", "window length must be a multiple of dt"));
        }
        let mut r = rng::stream(seed, stream);
        let sd = dt.sqrt();
        let mut w = Vec::with_capacity(n + 1);
        w.push(0.0);
        let mut acc = 0.0;
        for _ in 0..n {
            acc += sd * rng::normal(&mut r);
            w.push(acc);
        }
        Ok(BrownianPath { t0, dt, w, seed, stream, level: 0 })
    }

    /// Path from explicit node values (first value is shifted to zero).
    pub fn from_values(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || !(dt > 0.0) {
            return Err(Error::param("path", "need at least two nodes and dt > 0"));
        }
        let w0 = values[0];
        let w = values.into_iter().map(|x| x - w0).collect();
        Ok(BrownianPath { t0, dt, w, seed: 0, stream: 0, level: 0 })
    }

    /// Halve the step by Brownian-bridge midpoints; the coarse nodes are kept.
    pub fn refine(&self) -> BrownianPath {
        let level = self.level + 1;
        let mut r = rng::stream(rng::derive_seed(self.seed, level as u64), self.stream);
        let sd = (self.dt / 4.0).sqrt();
        let mut w = Vec::with_capacity(2 * self.w.len() - 1);
        for i in 0..self.w.len() - 1 {
            w.push(self.w[i]);
            w.push(0.5 * (self.w[i] + self.w[i + 1]) + sd * rng::normal(&mut r));
        }
        w.push(*self.w.last().unwrap());
        BrownianPath { t0: self.t0, dt: 0.5 * self.dt, w, seed: self.seed, stream: self.stream, level }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.time(self.steps())
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.w.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn increment(&self, i: usize) -> f64 {
        self.w[i + 1] - self.w[i]
    }

    /// Node index of `t`, if `t` is a grid node (relative tolerance 1e-9 of dt).
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if (x - k).abs() <= 1e-9 && k >= 0.0 && (k as usize) <= self.steps() {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Cell index `i` and fraction `f` with `t = t_i + f dt`, `0 <= f < 1` (last node maps to f = 0).
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let t1 = self.t1();
        let tol = 1e-12 * (1.0 + t1.abs());
        if t < self.t0 - tol || t > t1 + tol {
            return Err(Error::OutsideWindow { t, t0: self.t0, t1 });
        }
        if let Some(k) = self.node_index(t) {
            return Ok((k, 0.0));
        }
        let x = ((t - self.t0) / self.dt).clamp(0.0, self.steps() as f64);
        let i = (x.floor() as usize).min(self.steps() - 1);
        Ok((i, x - i as f64))
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let (i, f) = self.locate(t)?;
        if f == 0.0 {
            return Ok(self.w[i]);
        }
        Ok(self.w[i] + f * (self.w[i + 1] - self.w[i]))
    }

    /// `int_a^b (W_s - W_a) ds` for the piecewise-linear path, exact.
    pub fn integral_from(&self, a: f64, b: f64) -> Result<f64> {
        let wa = self.value(a)?;
        Ok(self.integral_w(a, b)? - (b - a) * wa)
    }

    /// `int_a^b W_s ds` for the piecewise-linear path, exact.
    pub fn integral_w(&self, a: f64, b: f64) -> Result<f64> {
        if b < a {
            return Ok(-self.integral_w(b, a)?);
        }
        let (ia, _) = self.locate(a)?;
        let (ib, _) = self.locate(b)?;
        let mut acc = 0.0;
        let mut lo = a;
        let mut i = ia;
        while lo < b {
            let node = self.time(i + 1).min(b);
            if node > lo {
                acc += 0.5 * (self.value(lo)? + self.value(node)?) * (node - lo);
            }
            lo = node;
            i += 1;
            if i > ib + 1 {
                break;
            }
        }
        Ok(acc)
    }
}

//! Gauss rules used throughout: Legendre on [0, 1], Hermite against the standard normal,
//! and a Cholesky-whitened tensor Hermite rule for integrals over the plane.

use std::num::NonZeroUsize;

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};
use crate::linalg::{Sym2, Vec2};

#[derive(Debug, Clone)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn nz(n: usize, name: &str) -> Result<NonZeroUsize> {
    NonZeroUsize::new(n).ok_or_else(|| Error::param(name, "quadrature order must be positive"))
}

/// Gauss-Legendre on `[0, 1]`.
pub fn legendre_unit(n: usize) -> Result<Rule1D> {
    let q = GaussLegendre::new(nz(n, "legendre order")?);
    let mut pairs: Vec<(f64, f64)> =
        q.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Rule1D { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() })
}

/// Gauss-Hermite rule for `E[f(Y)]`, `Y ~ N(0, 1)`.
pub fn hermite_normal(n: usize) -> Result<Rule1D> {
    let q = GaussHermite::new(nz(n, "hermite order")?);
    let s = std::f64::consts::PI.sqrt();
    let mut pairs: Vec<(f64, f64)> =
        q.as_node_weight_pairs().iter().map(|&(x, w)| (std::f64::consts::SQRT_2 * x, w / s)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(Rule1D { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() })
}

/// Tensor Hermite rule for Lebesgue integrals over the plane, whitened by a Gaussian proposal.
#[derive(Debug, Clone)]
pub struct PlaneRule {
    // standard-normal node y_k and Lebesgue weight w_k * 2 pi * exp(|y_k|^2 / 2)
    pts: Vec<(Vec2, f64)>,
    order: usize,
}

impl PlaneRule {
    pub fn new(order: usize) -> Result<Self> {
        let r = hermite_normal(order)?;
        let mut pts = Vec::with_capacity(order * order);
        for i in 0..order {
            for j in 0..order {
                let y = [r.nodes[i], r.nodes[j]];
                let w = r.weights[i]
                    * r.weights[j]
                    * 2.0
                    * std::f64::consts::PI
                    * (0.5 * (y[0] * y[0] + y[1] * y[1])).exp();
                pts.push((y, w));
            }
        }
        Ok(PlaneRule { pts, order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    /// Nodes and Lebesgue weights for the proposal `N(mean, cov)`.
    pub fn nodes(&self, mean: Vec2, cov: &Sym2) -> Result<Vec<(Vec2, f64)>> {
        let l = cov.cholesky().ok_or_else(|| Error::NotPositiveDefinite(cov.det()))?;
        let det_l = l[0][0] * l[1][1];
        Ok(self
            .pts
            .iter()
            .map(|&(y, w)| ([mean[0] + l[0][0] * y[0], mean[1] + l[1][0] * y[0] + l[1][1] * y[1]], w * det_l))
            .collect())
    }

    /// `int_{R^2} f` using the proposal `N(mean, cov)`.
    pub fn integrate<F: FnMut(Vec2) -> f64>(&self, mean: Vec2, cov: &Sym2, mut f: F) -> Result<f64> {
        let nodes = self.nodes(mean, cov)?;
        let mut acc = crate::linalg::CompensatedSum::new();
        for (p, w) in nodes {
            acc.add(w * f(p));
        }
        Ok(acc.value())
    }
}

/// Time rule on `(s, t)` after the substitution `rho = s + (t - s) u^{2/alpha}`,
/// which absorbs an integrable `(rho - s)^{alpha/2 - 1}` singularity.
#[derive(Debug, Clone)]
pub struct SingularTimeRule {
    base: Rule1D,
    power: f64,
}

impl SingularTimeRule {
    pub fn new(order: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::param("alpha", "must lie in (0, 2]"));
        }
        Ok(SingularTimeRule { base: legendre_unit(order)?, power: 2.0 / alpha })
    }

    pub fn len(&self) -> usize {
        self.base.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.nodes.is_empty()
    }

    /// `(rho_k, weight_k)` for integrals over `(s, t)`.
    pub fn nodes(&self, s: f64, t: f64) -> Vec<(f64, f64)> {
        let h = t - s;
        let p = self.power;
        self.base
            .nodes
            .iter()
            .zip(&self.base.weights)
            .map(|(&u, &w)| (s + h * u.powf(p), h * p * u.powf(p - 1.0) * w))
            .collect()
    }
}

/// Product of two Gaussian densities as a proposal: precision-weighted mean and covariance.
pub fn product_proposal(m1: Vec2, c1: &Sym2, m2: Vec2, c2: &Sym2) -> Option<(Vec2, Sym2)> {
    if !c1.is_positive_definite() || !c2.is_positive_definite() {
        return None;
    }
    let p1 = c1.inverse();
    let p2 = c2.inverse();
    let p = p1.add(&p2);
    if !p.is_positive_definite() {
        return None;
    }
    let cov = p.inverse();
    let r1 = p1.apply(m1);
    let r2 = p2.apply(m2);
    let mean = cov.apply([r1[0] + r2[0], r1[1] + r2[1]]);
    Some((mean, cov))
}

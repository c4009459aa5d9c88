//! 2-vectors and symmetric 2x2 matrices.

pub type Vec2 = [f64; 2];

/// Symmetric matrix `[[xx, xv], [xv, vv]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xv: f64,
    pub vv: f64,
}

impl Sym2 {
    pub const fn new(xx: f64, xv: f64, vv: f64) -> Self {
        Sym2 { xx, xv, vv }
    }

    pub const fn identity() -> Self {
        Sym2::new(1.0, 0.0, 1.0)
    }

    pub fn det(&self) -> f64 {
        self.xx * self.vv - self.xv * self.xv
    }

    pub fn is_positive_definite(&self) -> bool {
        self.xx > 0.0 && self.vv > 0.0 && self.det() > 0.0
    }

    pub fn inverse(&self) -> Sym2 {
        let d = self.det();
        Sym2::new(self.vv / d, -self.xv / d, self.xx / d)
    }

    pub fn apply(&self, w: Vec2) -> Vec2 {
        [self.xx * w[0] + self.xv * w[1], self.xv * w[0] + self.vv * w[1]]
    }

    /// `<S w, w>`.
    pub fn quad(&self, w: Vec2) -> f64 {
        self.xx * w[0] * w[0] + 2.0 * self.xv * w[0] * w[1] + self.vv * w[1] * w[1]
    }

    pub fn scale(&self, c: f64) -> Sym2 {
        Sym2::new(c * self.xx, c * self.xv, c * self.vv)
    }

    pub fn add(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xv + o.xv, self.vv + o.vv)
    }

    /// `J S J^T` for a general 2x2 matrix `J` (row major).
    pub fn congruence(&self, j: [[f64; 2]; 2]) -> Sym2 {
        let sj0 = self.apply([j[0][0], j[0][1]]);
        let sj1 = self.apply([j[1][0], j[1][1]]);
        Sym2::new(
            j[0][0] * sj0[0] + j[0][1] * sj0[1],
            j[0][0] * sj1[0] + j[0][1] * sj1[1],
            j[1][0] * sj1[0] + j[1][1] * sj1[1],
        )
    }

    /// Lower Cholesky factor `[[l00, 0], [l10, l11]]`, `None` unless positive definite.
    pub fn cholesky(&self) -> Option<[[f64; 2]; 2]> {
        if !(self.xx > 0.0) {
            return None;
        }
        let l00 = self.xx.sqrt();
        let l10 = self.xv / l00;
        let r = self.vv - l10 * l10;
        if !(r > 0.0) {
            return None;
        }
        Some([[l00, 0.0], [l10, r.sqrt()]])
    }

    pub fn frobenius(&self) -> f64 {
        (self.xx * self.xx + 2.0 * self.xv * self.xv + self.vv * self.vv).sqrt()
    }

    pub fn sub(&self, o: &Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xv - o.xv, self.vv - o.vv)
    }
}

pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

pub fn mat_vec(m: [[f64; 2]; 2], w: Vec2) -> Vec2 {
    [m[0][0] * w[0] + m[0][1] * w[1], m[1][0] * w[0] + m[1][1] * w[1]]
}

pub fn mat_inverse(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let d = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = CompensatedSum::new();
    for x in it {
        s.add(x);
    }
    s.value()
}

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `Ω_t = (a(t), b(t)) ⊂ U = (0, 1)` with
/// `a(t) = a₀ + A sin(ωt)` and `b(t) = b₀ + B sin(ωt + φ₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingDomain {
    pub a0: f64,
    pub b0: f64,
    pub amp_a: f64,
    pub amp_b: f64,
    pub omega: f64,
    pub phase: f64,
}

impl MovingDomain {
    pub fn new(a0: f64, b0: f64, amp_a: f64, amp_b: f64, omega: f64, phase: f64) -> Result<Self> {
        let dom = Self {
            a0,
            b0,
            amp_a,
            amp_b,
            omega,
            phase,
        };
        dom.validate()?;
        Ok(dom)
    }

    /// `Ω_t = U` for all `t`.
    pub fn full() -> Self {
        Self::fixed(0.0, 1.0).expect("the unit interval is a valid domain")
    }

    pub fn fixed(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, 0.0, 0.0, 0.0, 0.0)
    }

    fn validate(&self) -> Result<()> {
        let vals = [self.a0, self.b0, self.amp_a, self.amp_b, self.omega, self.phase];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("domain", "parameters must be finite"));
        }
        // envelopes of the endpoint trajectories
        let (a_lo, a_hi) = (self.a0 - self.amp_a.abs(), self.a0 + self.amp_a.abs());
        let (b_lo, b_hi) = (self.b0 - self.amp_b.abs(), self.b0 + self.amp_b.abs());
        if a_lo < 0.0 || b_hi > 1.0 {
            return Err(Error::invalid("domain", "endpoints must stay inside [0, 1]"));
        }
        if a_hi >= b_lo {
            return Err(Error::invalid("domain", "a(t) < b(t) must hold for all t"));
        }
        if (self.a0 == 0.0 && self.amp_a != 0.0) || (self.b0 == 1.0 && self.amp_b != 0.0) {
            return Err(Error::invalid(
                "domain",
                "an endpoint touching the boundary of U cannot move",
            ));
        }
        Ok(())
    }

    pub fn a(&self, t: f64) -> f64 {
        self.a0 + self.amp_a * (self.omega * t).sin()
    }

    pub fn b(&self, t: f64) -> f64 {
        self.b0 + self.amp_b * (self.omega * t + self.phase).sin()
    }

    pub fn is_static(&self) -> bool {
        (self.amp_a == 0.0 && self.amp_b == 0.0) || self.omega == 0.0
    }

    pub fn contains(&self, t: f64, x: f64) -> bool {
        self.a(t) < x && x < self.b(t)
    }

    /// Anchor pairs `(x, Θ(t, x))` of the monotone interpolant.
    fn anchors(&self, t: f64) -> Vec<(f64, f64)> {
        let mut pts = vec![(0.0, 0.0)];
        if self.a0 > 0.0 {
            pts.push((self.a0, self.a(t)));
        }
        if self.b0 < 1.0 {
            pts.push((self.b0, self.b(t)));
        }
        pts.push((1.0, 1.0));
        pts
    }

    /// `Θ(t, ·)`: the C¹ monotone map of `[0, 1]` with `Θ(t, Ω₀) = Ω_t`.
    pub fn theta(&self, t: f64) -> DomainMap {
        DomainMap::pchip(&self.anchors(t))
    }

    /// True when `Θ(t, ·)` and `Θ(s, ·)` coincide, so `Θ(s, Θ⁻¹(t, ·))` is the identity.
    pub fn same_slice(&self, t: f64, s: f64) -> bool {
        self.a(t) == self.a(s) && self.b(t) == self.b(s)
    }
}

/// Piecewise cubic Hermite map through increasing anchors, with
/// Fritsch-Butland interior slopes (monotone, C¹).
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMap {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl DomainMap {
    fn pchip(points: &[(f64, f64)]) -> Self {
        let x: Vec<f64> = points.iter().map(|p| p.0).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut slope = vec![0.0; n];
        slope[0] = delta[0];
        slope[n - 1] = delta[n - 2];
        for k in 1..n - 1 {
            let (d0, d1) = (delta[k - 1], delta[k]);
            if d0 * d1 <= 0.0 {
                slope[k] = 0.0;
            } else {
                let w1 = 2.0 * h[k] + h[k - 1];
                let w2 = h[k] + 2.0 * h[k - 1];
                slope[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
            }
        }
        Self { x, y, slope }
    }

    fn interval(&self, x: f64) -> usize {
        let k = self.x.partition_point(|v| *v <= x);
        k.clamp(1, self.x.len() - 1) - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.interval(x);
        let h = self.x[k + 1] - self.x[k];
        let s = (x - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.slope[k] + h01 * self.y[k + 1] + h11 * h * self.slope[k + 1]
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let k = self.interval(x);
        let h = self.x[k + 1] - self.x[k];
        let s = (x - self.x[k]) / h;
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        d00 * self.y[k] + d10 * self.slope[k] + d01 * self.y[k + 1] + d11 * self.slope[k + 1]
    }

    /// Inverse by bisection to `1e−12`.
    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Interior nodes `x_i = i h`, `i = 1..=d`, `h = 1/(d+1)`, of `U = (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub d: usize,
}

impl SpatialGrid {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        Ok(Self { d })
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.d + 1) as f64
    }

    /// Coordinate of interior node with 0-based index `i`.
    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.d).map(|i| self.x(i)).collect()
    }

    pub fn mask(&self, domain: &MovingDomain, t: f64) -> Vec<bool> {
        (0..self.d).map(|i| domain.contains(t, self.x(i))).collect()
    }
}

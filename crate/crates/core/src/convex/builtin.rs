use super::{Energy, Space};
use crate::Result;

/// `φ(w) = (c/2)‖w‖²`.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    dim: usize,
    scale: f64,
}

impl Quadratic {
    pub fn new(dim: usize, scale: f64) -> Self {
        assert!(scale >= 0.0, "quadratic scale must be nonnegative");
        Self { dim, scale }
    }
}

impl Energy for Quadratic {
    fn name(&self) -> String {
        format!("quadratic(c={})", self.scale)
    }

    fn space(&self) -> Space {
        Space::euclidean(self.dim)
    }

    fn eval(&self, _t: f64, w: &[f64]) -> f64 {
        0.5 * self.scale * self.space().norm_sq(w)
    }

    fn prox_point(&self, _t: f64, lambda: f64, z: &[f64]) -> Result<Vec<f64>> {
        let s = 1.0 / (1.0 + lambda * self.scale);
        Ok(z.iter().map(|v| v * s).collect())
    }

    fn is_autonomous(&self) -> bool {
        true
    }

    fn is_nonnegative(&self) -> bool {
        true
    }
}

/// `φ(u) = |u|` on the real line.
#[derive(Debug, Clone, Copy)]
pub struct AbsValue;

impl Energy for AbsValue {
    fn name(&self) -> String {
        "abs".into()
    }

    fn space(&self) -> Space {
        Space::euclidean(1)
    }

    fn eval(&self, _t: f64, w: &[f64]) -> f64 {
        w[0].abs()
    }

    fn prox_point(&self, _t: f64, lambda: f64, z: &[f64]) -> Result<Vec<f64>> {
        let v = z[0];
        Ok(vec![v.signum() * (v.abs() - lambda).max(0.0)])
    }

    fn is_autonomous(&self) -> bool {
        true
    }

    fn is_nonnegative(&self) -> bool {
        true
    }
}

/// Indicator of `{0}`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroIndicator {
    dim: usize,
}

impl ZeroIndicator {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Energy for ZeroIndicator {
    fn name(&self) -> String {
        "zero_indicator".into()
    }

    fn space(&self) -> Space {
        Space::euclidean(self.dim)
    }

    fn eval(&self, _t: f64, w: &[f64]) -> f64 {
        if w.iter().all(|v| *v == 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox_point(&self, _t: f64, _lambda: f64, z: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; z.len()])
    }

    fn is_autonomous(&self) -> bool {
        true
    }

    fn is_nonnegative(&self) -> bool {
        true
    }
}

/// `φ ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroEnergy {
    dim: usize,
}

impl ZeroEnergy {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Energy for ZeroEnergy {
    fn name(&self) -> String {
        "zero".into()
    }

    fn space(&self) -> Space {
        Space::euclidean(self.dim)
    }

    fn eval(&self, _t: f64, _w: &[f64]) -> f64 {
        0.0
    }

    fn prox_point(&self, _t: f64, _lambda: f64, z: &[f64]) -> Result<Vec<f64>> {
        Ok(z.to_vec())
    }

    fn is_autonomous(&self) -> bool {
        true
    }

    fn is_nonnegative(&self) -> bool {
        true
    }
}

/// `φᵗ(w) = ½‖w − c(t)𝟙‖²` with `c(t) = A sin(ωt)`; its shift map translates
/// by `c(t) − c(s)`.
#[derive(Debug, Clone, Copy)]
pub struct TranslatedQuadratic {
    dim: usize,
    amplitude: f64,
    omega: f64,
}

impl TranslatedQuadratic {
    pub fn new(dim: usize, amplitude: f64, omega: f64) -> Self {
        Self {
            dim,
            amplitude,
            omega,
        }
    }

    fn center(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t).sin()
    }
}

impl Energy for TranslatedQuadratic {
    fn name(&self) -> String {
        format!("translated_quadratic(A={}, omega={})", self.amplitude, self.omega)
    }

    fn space(&self) -> Space {
        Space::euclidean(self.dim)
    }

    fn eval(&self, t: f64, w: &[f64]) -> f64 {
        let c = self.center(t);
        0.5 * w.iter().map(|v| (v - c).powi(2)).sum::<f64>()
    }

    fn prox_point(&self, t: f64, lambda: f64, z: &[f64]) -> Result<Vec<f64>> {
        let c = self.center(t);
        Ok(z.iter().map(|v| (v + lambda * c) / (1.0 + lambda)).collect())
    }

    fn is_autonomous(&self) -> bool {
        self.amplitude == 0.0
    }

    fn is_nonnegative(&self) -> bool {
        true
    }

    fn shift_map(&self, t: f64, s: f64, w: &[f64]) -> Option<Vec<f64>> {
        let delta = self.center(t) - self.center(s);
        Some(w.iter().map(|v| v + delta).collect())
    }
}

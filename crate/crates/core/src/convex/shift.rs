use super::{Energy, SharedEnergy, Space};
use crate::{Error, Result};

/// `ψᵗ(z) = φᵗ(z) + (D₀/2)‖z‖² + D₀`.
///
/// The prox reduces exactly to the one of `φ`:
/// `prox_λ^ψ(z) = prox_{λ/(1+λD₀)}^φ(z/(1+λD₀))`.
#[derive(Clone)]
pub struct ShiftRegularized {
    inner: SharedEnergy,
    d0: f64,
}

pub fn shift_regularize(energy: SharedEnergy, d0: f64) -> Result<ShiftRegularized> {
    if !(d0 >= 0.0 && d0.is_finite()) {
        return Err(Error::invalid("D0", format!("must be finite and >= 0, got {d0}")));
    }
    Ok(ShiftRegularized { inner: energy, d0 })
}

impl ShiftRegularized {
    pub fn d0(&self) -> f64 {
        self.d0
    }
}

impl Energy for ShiftRegularized {
    fn name(&self) -> String {
        format!("shifted({}, D0={})", self.inner.name(), self.d0)
    }

    fn space(&self) -> Space {
        self.inner.space()
    }

    fn eval(&self, t: f64, w: &[f64]) -> f64 {
        self.inner.eval(t, w) + 0.5 * self.d0 * self.space().norm_sq(w) + self.d0
    }

    fn prox_point(&self, t: f64, lambda: f64, z: &[f64]) -> Result<Vec<f64>> {
        let factor = 1.0 + lambda * self.d0;
        let scaled: Vec<f64> = z.iter().map(|v| v / factor).collect();
        self.inner.prox_point(t, lambda / factor, &scaled)
    }

    fn is_autonomous(&self) -> bool {
        self.inner.is_autonomous()
    }

    fn is_nonnegative(&self) -> bool {
        self.inner.is_nonnegative()
    }

    fn shift_map(&self, t: f64, s: f64, w: &[f64]) -> Option<Vec<f64>> {
        self.inner.shift_map(t, s, w)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::convex::{prox, Quadratic, ZeroEnergy, AbsValue};

    #[test]
    fn zero_shift_is_identity() {
        let base: SharedEnergy = Arc::new(AbsValue);
        let psi = shift_regularize(base.clone(), 0.0).unwrap();
        for z in [-3.0, -0.2, 0.0, 0.7, 5.0] {
            assert_eq!(
                prox(&psi, 0.0, 0.4, &[z]).unwrap(),
                prox(base.as_ref(), 0.0, 0.4, &[z]).unwrap()
            );
        }
    }

    #[test]
    fn shifted_zero_energy() {
        // minimise ½(u − 3)² + u²  ⇒  u = 1, ξ = 2
        let psi = shift_regularize(Arc::new(ZeroEnergy::new(1)), 2.0).unwrap();
        let out = prox(&psi, 0.0, 1.0, &[3.0]).unwrap();
        assert!((out.w[0] - 1.0).abs() < 1e-15);
        assert!((out.xi[0] - 2.0).abs() < 1e-15);
        assert_eq!(psi.eval(0.0, &[1.0]), 3.0);
    }

    #[test]
    fn shifted_quadratic() {
        // (1 + λ(1 + D₀))u = z
        let psi = shift_regularize(Arc::new(Quadratic::new(1, 1.0)), 1.0).unwrap();
        let out = prox(&psi, 0.0, 1.0, &[3.0]).unwrap();
        assert!((out.w[0] - 1.0).abs() < 1e-15);
        assert!((out.xi[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn subdifferential_sum_rule() {
        // ξ_ψ − D₀w must be a subgradient of |·| at w
        let psi = shift_regularize(Arc::new(AbsValue), 0.5).unwrap();
        for z in [-4.0, -0.3, 0.1, 2.5] {
            let out = prox(&psi, 0.0, 0.8, &[z]).unwrap();
            let g = out.xi[0] - 0.5 * out.w[0];
            if out.w[0] != 0.0 {
                assert!((g - out.w[0].signum()).abs() < 1e-12);
            } else {
                assert!(g.abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_negative_shift() {
        assert!(shift_regularize(Arc::new(AbsValue), -1.0).is_err());
    }
}

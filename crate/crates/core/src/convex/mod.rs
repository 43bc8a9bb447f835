//! Time-dependent proper convex energies `φᵗ` on a finite-dimensional
//! Hilbert space, accessed through their proximal maps.

use std::sync::Arc;

use crate::{Error, Result};

mod builtin;
mod shift;

pub use builtin::{AbsValue, Quadratic, TranslatedQuadratic, ZeroEnergy, ZeroIndicator};
pub use shift::{shift_regularize, ShiftRegularized};

/// Inner product `(u, v) = weight · Σ uᵢvᵢ` (weight `h` mimics `L²`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Space {
    pub dim: usize,
    pub weight: f64,
}

impl Space {
    pub fn euclidean(dim: usize) -> Self {
        Self { dim, weight: 1.0 }
    }

    pub fn weighted(dim: usize, weight: f64) -> Self {
        Self { dim, weight }
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weight * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
    }

    pub fn norm_sq(&self, a: &[f64]) -> f64 {
        self.inner(a, a)
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.norm_sq(a).sqrt()
    }

    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        (self.weight * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).sqrt()
    }
}

/// A proper, lower-semicontinuous, convex `φᵗ : H → (−∞, ∞]`.
///
/// `eval` returns `f64::INFINITY` outside the effective domain. `prox_point`
/// must return a point of the domain.
pub trait Energy: Send + Sync {
    fn name(&self) -> String;

    fn space(&self) -> Space;

    fn eval(&self, t: f64, w: &[f64]) -> f64;

    /// `argmin_u (1/2λ)‖u − z‖² + φᵗ(u)`.
    fn prox_point(&self, t: f64, lambda: f64, z: &[f64]) -> Result<Vec<f64>>;

    fn is_autonomous(&self) -> bool;

    fn is_nonnegative(&self) -> bool;

    /// Transport `Ψ(t, s, w)` of a state from time slice `s` to `t`.
    /// Autonomous energies use the identity.
    fn shift_map(&self, _t: f64, _s: f64, w: &[f64]) -> Option<Vec<f64>> {
        self.is_autonomous().then(|| w.to_vec())
    }
}

pub type SharedEnergy = Arc<dyn Energy>;

#[derive(Debug, Clone, PartialEq)]
pub struct ProxOutput {
    /// `J_λᵗ(z)`.
    pub w: Vec<f64>,
    /// Yosida approximation `(z − w)/λ`, an element of `∂φᵗ(w)`.
    pub xi: Vec<f64>,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("lambda", format!("must be > 0, got {lambda}")))
    }
}

fn check_dim(energy: &dyn Energy, z: &[f64]) -> Result<()> {
    let d = energy.space().dim;
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: z.len(),
        });
    }
    Ok(())
}

/// Resolvent `J_λᵗ(z)` together with the Yosida approximation.
pub fn prox(energy: &dyn Energy, t: f64, lambda: f64, z: &[f64]) -> Result<ProxOutput> {
    check_lambda(lambda)?;
    check_dim(energy, z)?;
    let w = energy.prox_point(t, lambda, z)?;
    let xi = z.iter().zip(&w).map(|(a, b)| (a - b) / lambda).collect();
    Ok(ProxOutput { w, xi })
}

/// Moreau-Yosida envelope `φ_λᵗ(z) = (1/2λ)‖z − J_λᵗ z‖² + φᵗ(J_λᵗ z)`.
pub fn moreau_value(energy: &dyn Energy, t: f64, lambda: f64, z: &[f64]) -> Result<f64> {
    let out = prox(energy, t, lambda, z)?;
    let space = energy.space();
    Ok(space.dist(z, &out.w).powi(2) / (2.0 * lambda) + energy.eval(t, &out.w))
}

/// `min_v [φᵗ(v) − φᵗ(w) − (ξ, v − w)]` over the sample points: nonnegative
/// (up to rounding) iff `ξ` passes the subgradient test at those points.
pub fn subgradient_slack(energy: &dyn Energy, t: f64, w: &[f64], xi: &[f64], samples: &[Vec<f64>]) -> f64 {
    let space = energy.space();
    let fw = energy.eval(t, w);
    samples
        .iter()
        .map(|v| {
            let fv = energy.eval(t, v);
            if fv.is_infinite() {
                return f64::INFINITY;
            }
            let diff: Vec<f64> = v.iter().zip(w).map(|(a, b)| a - b).collect();
            fv - fw - space.inner(xi, &diff)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KenmochiProbe {
    pub w_shift: Vec<f64>,
    /// `‖Ψ(t,s,w) − w‖ / (|t−s| (1 + |φˢ(w)|)^{1/2})`.
    pub ratio1: f64,
    /// `max(0, φᵗ(Ψ(t,s,w)) − φˢ(w)) / (|t−s| (1 + |φˢ(w)|))`.
    pub ratio2: f64,
}

/// Empirical constants of the shift-map drift estimates at one sample `(s, t, w)`.
pub fn kenmochi_probe(energy: &dyn Energy, s: f64, t: f64, w: &[f64]) -> Result<KenmochiProbe> {
    if t < s {
        return Err(Error::invalid("t", format!("must satisfy t >= s, got t={t}, s={s}")));
    }
    check_dim(energy, w)?;
    let phi_s = energy.eval(s, w);
    if !phi_s.is_finite() {
        return Err(Error::Infeasible(format!("w is outside the domain of φ at s={s}")));
    }
    let w_shift = energy
        .shift_map(t, s, w)
        .ok_or_else(|| Error::Unsupported(format!("energy `{}` has no shift map", energy.name())))?;
    if t == s {
        return Ok(KenmochiProbe {
            w_shift: w.to_vec(),
            ratio1: 0.0,
            ratio2: 0.0,
        });
    }
    let dt = t - s;
    let scale = 1.0 + phi_s.abs();
    let space = energy.space();
    let ratio1 = space.dist(&w_shift, w) / (dt * scale.sqrt());
    let phi_t = energy.eval(t, &w_shift);
    let ratio2 = (phi_t - phi_s).max(0.0) / (dt * scale);
    Ok(KenmochiProbe {
        w_shift,
        ratio1,
        ratio2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
        (0..d).map(|_| rng.gen_range(-scale..scale)).collect()
    }

    #[test]
    fn quadratic_resolvent() {
        let e = Quadratic::new(3, 1.0);
        let z = [1.0, -2.0, 0.5];
        let out = prox(&e, 0.0, 0.5, &z).unwrap();
        for i in 0..3 {
            assert!((out.w[i] - z[i] / 1.5).abs() < 1e-15);
            assert!((out.xi[i] - z[i] / 1.5).abs() < 1e-15);
        }
    }

    #[test]
    fn indicator_projection() {
        let e = ZeroIndicator::new(2);
        let out = prox(&e, 0.0, 0.25, &[1.0, -3.0]).unwrap();
        assert_eq!(out.w, vec![0.0, 0.0]);
        assert_eq!(out.xi, vec![4.0, -12.0]);
        assert!(e.eval(0.0, &[0.0, 1e-300]).is_infinite());
    }

    #[test]
    fn soft_threshold_against_grid_search() {
        let e = AbsValue;
        let out = prox(&e, 0.0, 0.5, &[2.0]).unwrap();
        assert_eq!(out.w, vec![1.5]);
        assert_eq!(out.xi, vec![1.0]);
        // brute force over a fine grid
        let obj = |u: f64| (u - 2.0).powi(2) / (2.0 * 0.5) + u.abs();
        let best = (0..=40_000)
            .map(|i| -2.0 + i as f64 * 1e-4)
            .min_by(|a, b| obj(*a).partial_cmp(&obj(*b)).unwrap())
            .unwrap();
        assert!((best - 1.5).abs() <= 1e-4);
    }

    #[test]
    fn rejects_bad_lambda_and_dimension() {
        let e = Quadratic::new(2, 1.0);
        assert!(prox(&e, 0.0, 0.0, &[1.0, 1.0]).is_err());
        assert!(matches!(
            prox(&e, 0.0, 1.0, &[1.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn moreau_closed_form_and_sandwich() {
        let e = Quadratic::new(2, 1.0);
        let z = [3.0, -1.0];
        let v = moreau_value(&e, 0.0, 0.7, &z).unwrap();
        assert!((v - 10.0 / (2.0 * 1.7)).abs() < 1e-13);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let energies: Vec<Box<dyn Energy>> = vec![
            Box::new(Quadratic::new(3, 2.0)),
            Box::new(AbsValue),
            Box::new(TranslatedQuadratic::new(2, 0.5, 3.0)),
        ];
        for e in &energies {
            let d = e.space().dim;
            for _ in 0..100 {
                let z = random_vec(&mut rng, d, 5.0);
                let t = rng.gen_range(0.0..1.0);
                let lam = rng.gen_range(0.01..3.0);
                let env = moreau_value(e.as_ref(), t, lam, &z).unwrap();
                let p = prox(e.as_ref(), t, lam, &z).unwrap();
                assert!(env <= e.eval(t, &z) + 1e-12);
                assert!(e.eval(t, &p.w) <= env + 1e-12);
            }
        }
    }

    #[test]
    fn moreau_increases_as_lambda_shrinks() {
        let e = AbsValue;
        let z = [0.3];
        let vals: Vec<f64> = [1.0, 0.1, 0.01]
            .iter()
            .map(|&l| moreau_value(&e, 0.0, l, &z).unwrap())
            .collect();
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2] && vals[2] <= 0.3);
    }

    #[test]
    fn returned_subgradients_pass_sampled_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let energies: Vec<Box<dyn Energy>> = vec![
            Box::new(Quadratic::new(3, 1.0)),
            Box::new(AbsValue),
            Box::new(ZeroIndicator::new(2)),
            Box::new(TranslatedQuadratic::new(3, 1.0, 2.0)),
        ];
        for e in &energies {
            let d = e.space().dim;
            for _ in 0..20 {
                let z = random_vec(&mut rng, d, 4.0);
                let lam = rng.gen_range(0.05..2.0);
                let t = rng.gen_range(0.0..1.0);
                let p = prox(e.as_ref(), t, lam, &z).unwrap();
                let samples: Vec<Vec<f64>> = (0..50).map(|_| random_vec(&mut rng, d, 6.0)).collect();
                let slack = subgradient_slack(e.as_ref(), t, &p.w, &p.xi, &samples);
                assert!(slack >= -1e-8 * (1.0 + z.iter().map(|v| v.abs()).sum::<f64>()));
            }
        }
    }

    #[test]
    fn probe_autonomous_is_zero() {
        let e = Quadratic::new(2, 1.0);
        let p = kenmochi_probe(&e, 0.1, 0.8, &[1.0, 2.0]).unwrap();
        assert_eq!(p.w_shift, vec![1.0, 2.0]);
        assert_eq!((p.ratio1, p.ratio2), (0.0, 0.0));
    }

    #[test]
    fn probe_translated_quadratic() {
        // Ψ(t,s,w) = w + c(t) − c(s) keeps the energy; ‖Ψw − w‖ ≤ √d·A·ω|t−s|
        let e = TranslatedQuadratic::new(2, 0.5, 3.0);
        let w = [0.2, -0.1];
        let p = kenmochi_probe(&e, 0.2, 0.5, &w).unwrap();
        assert!(p.ratio2 <= 1e-12);
        assert!(p.ratio1 > 0.0 && p.ratio1 <= 2f64.sqrt() * 0.5 * 3.0 + 1e-12);
        let same = kenmochi_probe(&e, 0.4, 0.4, &w).unwrap();
        assert_eq!((same.ratio1, same.ratio2), (0.0, 0.0));
        assert_eq!(same.w_shift, w.to_vec());
    }

    #[test]
    fn probe_errors() {
        struct NoShift;
        impl Energy for NoShift {
            fn name(&self) -> String {
                "no-shift".into()
            }
            fn space(&self) -> Space {
                Space::euclidean(1)
            }
            fn eval(&self, t: f64, w: &[f64]) -> f64 {
                0.5 * (w[0] - t).powi(2)
            }
            fn prox_point(&self, t: f64, lambda: f64, z: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![(z[0] + lambda * t) / (1.0 + lambda)])
            }
            fn is_autonomous(&self) -> bool {
                false
            }
            fn is_nonnegative(&self) -> bool {
                true
            }
        }
        assert!(matches!(
            kenmochi_probe(&NoShift, 0.0, 0.5, &[0.0]),
            Err(Error::Unsupported(_))
        ));
        assert!(kenmochi_probe(&ZeroIndicator::new(1), 0.0, 0.5, &[1.0]).is_err());
        assert!(kenmochi_probe(&Quadratic::new(1, 1.0), 0.5, 0.2, &[1.0]).is_err());
    }
}

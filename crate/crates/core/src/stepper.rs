//! Implicit convolution-quadrature solver for
//!
//! `ν ∂t u + ∂t[k ∗ (u − u₀)] + ∂φᵗ(u) ∋ f`,
//!
//! with `ν = 0` the pure nonlocal flow. Each step is one proximal map.

use serde::Serialize;

use crate::convex::{SharedEnergy, Space};
use crate::kernels::{cell_weights, ConvWeights, KernelPair, KernelKind, Member};
use crate::{Error, Result, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Relative bound on the discrete equation residual.
    pub residual_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { residual_tol: 1e-10 }
    }
}

#[derive(Clone)]
pub struct FlowConfig {
    pub pair: KernelPair,
    pub grid: TimeGrid,
    pub energy: SharedEnergy,
    pub u0: Vec<f64>,
    /// `f(t_n)`, `n = 0..=N`; the entry at `n = 0` is unused.
    pub forcing: Vec<Vec<f64>>,
    pub nu: f64,
    pub tolerances: Tolerances,
}

impl FlowConfig {
    /// Configuration with zero forcing and `ν = 0`.
    pub fn new(pair: KernelPair, grid: TimeGrid, energy: SharedEnergy, u0: Vec<f64>) -> Self {
        let d = u0.len();
        Self {
            pair,
            grid,
            energy,
            u0,
            forcing: vec![vec![0.0; d]; grid.steps() + 1],
            nu: 0.0,
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_forcing(mut self, forcing: Vec<Vec<f64>>) -> Self {
        self.forcing = forcing;
        self
    }

    /// Samples `f(t_n, ·)` from a closure of time.
    pub fn with_forcing_fn(mut self, f: impl Fn(f64) -> Vec<f64>) -> Self {
        self.forcing = self.grid.nodes().map(f).collect();
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let space = self.energy.space();
        if self.u0.len() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                found: self.u0.len(),
            });
        }
        if self.forcing.len() != self.grid.steps() + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.grid.steps() + 1,
                found: self.forcing.len(),
            });
        }
        if let Some(bad) = self.forcing.iter().find(|f| f.len() != space.dim) {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                found: bad.len(),
            });
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::invalid("nu", format!("must be finite and >= 0, got {}", self.nu)));
        }
        if self.u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("u0", "entries must be finite"));
        }
        let e0 = self.energy.eval(0.0, &self.u0);
        if !e0.is_finite() {
            return Err(Error::Infeasible(format!(
                "u0 is outside the domain of `{}` at t = 0",
                self.energy.name()
            )));
        }
        Ok(())
    }
}

/// Discrete solution record. All per-node vectors have length `N + 1`; the
/// entries of `xi`, `d` and `residual` at `n = 0` are zero placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub space: Space,
    pub u: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    /// Discrete nonlocal derivative `D_n ≈ ∂t[k ∗ (u − u₀)](t_n)`.
    pub d: Vec<Vec<f64>>,
    /// `φ^{t_n}(u_n)`.
    pub energy: Vec<f64>,
    pub residual: Vec<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.u.last().expect("trajectory has at least u_0")
    }

    pub fn max_residual(&self) -> f64 {
        self.residual.iter().cloned().fold(0.0, f64::max)
    }

    /// Number of completed steps.
    pub fn len_steps(&self) -> usize {
        self.u.len() - 1
    }
}

/// `D_n = Σ_{j=1}^{n} κ_{n−j}(u_j − u_{j−1})` from the increments
/// `u_j − u_{j−1}`, `j = 1..=n`.
pub fn discrete_nonlocal_derivative(weights: &ConvWeights, increments: &[Vec<f64>]) -> Vec<f64> {
    let n = increments.len();
    assert!(n >= 1, "at least one increment is required");
    let mut out = vec![0.0; increments[0].len()];
    for (j, inc) in increments.iter().enumerate() {
        let kappa = weights.values[n - 1 - j];
        if kappa == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(inc) {
            *o += kappa * v;
        }
    }
    out
}

fn history(weights: &ConvWeights, increments: &[Vec<f64>], n: usize, out: &mut [f64]) {
    // Σ_{j=1}^{n−1} κ_{n−j} Δ_j
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, inc) in increments.iter().enumerate().take(n - 1) {
        let kappa = weights.values[n - 1 - j];
        if kappa == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(inc) {
            *o += kappa * v;
        }
    }
}

pub fn solve_flow(config: &FlowConfig) -> Result<Trajectory> {
    config.validate()?;
    let grid = config.grid;
    let tau = grid.tau();
    let space = config.energy.space();
    let dim = space.dim;
    let weights = cell_weights(&config.pair, &grid, Member::K);
    let mu = weights.first() + config.nu / tau;
    let energy = config.energy.as_ref();

    let mut traj = Trajectory {
        grid,
        space,
        u: vec![config.u0.clone()],
        xi: vec![vec![0.0; dim]],
        d: vec![vec![0.0; dim]],
        energy: vec![energy.eval(0.0, &config.u0)],
        residual: vec![0.0],
    };
    let mut increments: Vec<Vec<f64>> = Vec::with_capacity(grid.steps());
    let mut hist = vec![0.0; dim];

    for n in 1..=grid.steps() {
        let t = grid.node(n);
        let prev = &traj.u[n - 1];
        history(&weights, &increments, n, &mut hist);
        let f = &config.forcing[n];
        let r: Vec<f64> = (0..dim).map(|i| f[i] + mu * prev[i] - hist[i]).collect();
        let z: Vec<f64> = r.iter().map(|v| v / mu).collect();
        let u = match energy.prox_point(t, 1.0 / mu, &z) {
            Ok(u) => u,
            Err(source) => {
                return Err(Error::StepFailed {
                    step: n,
                    source: Box::new(source),
                    partial: Box::new(traj),
                })
            }
        };
        let xi: Vec<f64> = (0..dim).map(|i| r[i] - mu * u[i]).collect();
        let inc: Vec<f64> = u.iter().zip(prev).map(|(a, b)| a - b).collect();
        increments.push(inc);

        let d = discrete_nonlocal_derivative(&weights, &increments);
        let inc = &increments[n - 1];
        let res_vec: Vec<f64> = (0..dim)
            .map(|i| d[i] + config.nu * inc[i] / tau + xi[i] - f[i])
            .collect();
        let residual = space.norm(&res_vec);
        let scale = 1.0 + space.norm(f) + space.norm(&d) + space.norm(&xi) + mu * space.norm(&u);
        if !(residual <= config.tolerances.residual_tol * scale) {
            return Err(Error::StepFailed {
                step: n,
                source: Box::new(Error::Infeasible(format!(
                    "discrete residual {residual:e} exceeds tolerance (scale {scale:e})"
                ))),
                partial: Box::new(traj),
            });
        }
        traj.energy.push(energy.eval(t, &u));
        traj.u.push(u);
        traj.xi.push(xi);
        traj.d.push(d);
        traj.residual.push(residual);
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuousDependence {
    /// `τ Σ_n ‖u¹_n − u²_n‖²`.
    pub lhs: f64,
    /// `c_T (‖u¹₀ − u²₀‖² + τ Σ_n ‖f¹_n − f²_n‖²)`.
    pub rhs: f64,
    /// `max{4‖ℓ‖²_{L¹(0,T)}, 2T}`.
    pub constant: f64,
    pub ok: bool,
}

pub const CONTINUOUS_DEPENDENCE_SLACK: f64 = 0.1;

fn same_kernel(a: &KernelPair, b: &KernelPair) -> bool {
    match (a.kind(), b.kind()) {
        (KernelKind::Tabulated(x), KernelKind::Tabulated(y)) => x.name == y.name,
        _ => a.spec() == b.spec() && a.spec().is_some(),
    }
}

/// Compares two runs against the `L²`-stability estimate with constant
/// `max{4‖ℓ‖²_{L¹}, 2T}`, allowing a relative slack of 10%.
pub fn continuous_dependence_check(
    traj1: &Trajectory,
    traj2: &Trajectory,
    config1: &FlowConfig,
    config2: &FlowConfig,
) -> Result<ContinuousDependence> {
    if config1.grid != config2.grid || traj1.grid != config1.grid || traj2.grid != config2.grid {
        return Err(Error::Mismatch("runs must share the time grid".into()));
    }
    if !same_kernel(&config1.pair, &config2.pair) {
        return Err(Error::Mismatch("runs must share the kernel pair".into()));
    }
    if config1.energy.name() != config2.energy.name() || config1.energy.space() != config2.energy.space() {
        return Err(Error::Mismatch("runs must share the energy".into()));
    }
    if traj1.u.len() != traj2.u.len() {
        return Err(Error::Mismatch("trajectories have different lengths".into()));
    }
    let grid = config1.grid;
    let tau = grid.tau();
    let space = traj1.space;
    let lhs: f64 = tau
        * (1..=grid.steps())
            .map(|n| space.dist(&traj1.u[n], &traj2.u[n]).powi(2))
            .sum::<f64>();
    let df: f64 = tau
        * (1..=grid.steps())
            .map(|n| space.dist(&config1.forcing[n], &config2.forcing[n]).powi(2))
            .sum::<f64>();
    let du0 = space.dist(&config1.u0, &config2.u0).powi(2);
    let l1 = config1.pair.l_norm_l1(grid.t_final());
    let constant = f64::max(4.0 * l1 * l1, 2.0 * grid.t_final());
    let rhs = constant * (du0 + df);
    Ok(ContinuousDependence {
        lhs,
        rhs,
        constant,
        ok: lhs <= rhs * (1.0 + CONTINUOUS_DEPENDENCE_SLACK),
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::convex::{AbsValue, Quadratic, ZeroIndicator};
    use crate::kernels::rl_pair;

    fn scalar_config(pair: KernelPair, n: usize, u0: f64) -> FlowConfig {
        FlowConfig::new(
            pair,
            TimeGrid::new(1.0, n).unwrap(),
            Arc::new(Quadratic::new(1, 1.0)),
            vec![u0],
        )
    }

    #[test]
    fn derivative_of_constant_sequence_vanishes() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let w = cell_weights(&rl_pair(0.4).unwrap(), &g, Member::K);
        let d = discrete_nonlocal_derivative(&w, &vec![vec![0.0, 0.0]; 5]);
        assert_eq!(d, vec![0.0, 0.0]);
    }

    #[test]
    fn classical_derivative_is_backward_difference() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let w = cell_weights(&KernelPair::classical(), &g, Member::K);
        // u = (0, 1, 3)
        let d = discrete_nonlocal_derivative(&w, &[vec![1.0], vec![2.0]]);
        assert!((d[0] - 2.0 / 0.1).abs() < 1e-12);
    }

    #[test]
    fn rl_single_step_derivative() {
        let g = TimeGrid::new(1.0, 1).unwrap();
        let w = cell_weights(&rl_pair(0.5).unwrap(), &g, Member::K);
        let d = discrete_nonlocal_derivative(&w, &[vec![1.0]]);
        assert!((d[0] - 2.0 / PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn stationary_point_stays_put() {
        let cfg = FlowConfig::new(
            rl_pair(0.6).unwrap(),
            TimeGrid::new(1.0, 32).unwrap(),
            Arc::new(AbsValue),
            vec![0.0],
        );
        let traj = solve_flow(&cfg).unwrap();
        assert!(traj.u.iter().all(|u| u[0] == 0.0));
        assert!(traj.xi.iter().all(|x| x[0] == 0.0));
    }

    #[test]
    fn classical_kernel_is_backward_euler() {
        let traj = solve_flow(&scalar_config(KernelPair::classical(), 50, 1.0)).unwrap();
        let tau: f64 = 1.0 / 50.0;
        for (n, u) in traj.u.iter().enumerate() {
            let exact = (1.0 + tau).powi(-(n as i32));
            assert!((u[0] - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn subdiffusion_relaxation() {
        let traj = solve_flow(&scalar_config(rl_pair(0.5).unwrap(), 2048, 1.0)).unwrap();
        assert!((traj.final_state()[0] - 0.427_584).abs() <= 2e-2);
    }

    #[test]
    fn residual_identity_holds() {
        let cfg = scalar_config(rl_pair(0.3).unwrap(), 200, 2.0)
            .with_nu(0.05)
            .with_forcing_fn(|t| vec![(5.0 * t).sin()]);
        let traj = solve_flow(&cfg).unwrap();
        assert!(traj.max_residual() <= 1e-10 * 10.0);
    }

    #[test]
    fn infeasible_initial_state_rejected() {
        let cfg = FlowConfig::new(
            rl_pair(0.5).unwrap(),
            TimeGrid::new(1.0, 4).unwrap(),
            Arc::new(ZeroIndicator::new(1)),
            vec![1.0],
        );
        assert!(matches!(solve_flow(&cfg), Err(Error::Infeasible(_))));
    }

    #[test]
    fn step_failure_carries_partial_trajectory() {
        struct FailsLate;
        impl crate::convex::Energy for FailsLate {
            fn name(&self) -> String {
                "fails-late".into()
            }
            fn space(&self) -> Space {
                Space::euclidean(1)
            }
            fn eval(&self, _t: f64, w: &[f64]) -> f64 {
                0.5 * w[0] * w[0]
            }
            fn prox_point(&self, t: f64, lambda: f64, z: &[f64]) -> Result<Vec<f64>> {
                if t > 0.5 {
                    return Err(Error::ProxNonconvergence {
                        iterations: 1,
                        grad_norm: 1.0,
                    });
                }
                Ok(vec![z[0] / (1.0 + lambda)])
            }
            fn is_autonomous(&self) -> bool {
                true
            }
            fn is_nonnegative(&self) -> bool {
                true
            }
        }
        let cfg = FlowConfig::new(
            KernelPair::classical(),
            TimeGrid::new(1.0, 4).unwrap(),
            Arc::new(FailsLate),
            vec![1.0],
        );
        match solve_flow(&cfg) {
            Err(Error::StepFailed { step, partial, .. }) => {
                assert_eq!(step, 3);
                assert_eq!(partial.len_steps(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn classical_energy_decreases() {
        let cfg = FlowConfig::new(
            KernelPair::classical(),
            TimeGrid::new(2.0, 64).unwrap(),
            Arc::new(AbsValue),
            vec![1.3],
        );
        let traj = solve_flow(&cfg).unwrap();
        assert!(traj.energy.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn nu_regularisation_converges_monotonically() {
        let base = scalar_config(rl_pair(0.5).unwrap(), 256, 1.0).with_forcing_fn(|t| vec![t.cos()]);
        let reference = solve_flow(&base).unwrap();
        let dist = |nu: f64| {
            let t = solve_flow(&base.clone().with_nu(nu)).unwrap();
            let tau = base.grid.tau();
            (tau * t
                .u
                .iter()
                .zip(&reference.u)
                .map(|(a, b)| (a[0] - b[0]).powi(2))
                .sum::<f64>())
            .sqrt()
        };
        let (d2, d3) = (dist(1e-2), dist(1e-3));
        assert!(d2 > d3 && d3 > 0.0, "{d2} {d3}");
    }

    #[test]
    fn repeated_solves_are_bitwise_identical() {
        let cfg = scalar_config(rl_pair(0.7).unwrap(), 128, 1.0).with_forcing_fn(|t| vec![t]);
        assert_eq!(solve_flow(&cfg).unwrap(), solve_flow(&cfg).unwrap());
    }

    #[test]
    fn continuous_dependence_identical_and_perturbed() {
        let a = scalar_config(rl_pair(0.5).unwrap(), 256, 1.0);
        let ta = solve_flow(&a).unwrap();
        let same = continuous_dependence_check(&ta, &ta, &a, &a).unwrap();
        assert_eq!(same.lhs, 0.0);
        assert!(same.ok);

        let b = scalar_config(rl_pair(0.5).unwrap(), 256, 1.1);
        let tb = solve_flow(&b).unwrap();
        let cd = continuous_dependence_check(&ta, &tb, &a, &b).unwrap();
        assert!(cd.ok && cd.lhs > 0.0, "{cd:?}");
    }

    #[test]
    fn continuous_dependence_rejects_mismatch() {
        let a = scalar_config(rl_pair(0.5).unwrap(), 64, 1.0);
        let b = scalar_config(rl_pair(0.4).unwrap(), 64, 1.0);
        let (ta, tb) = (solve_flow(&a).unwrap(), solve_flow(&b).unwrap());
        assert!(matches!(
            continuous_dependence_check(&ta, &tb, &a, &b),
            Err(Error::Mismatch(_))
        ));
    }
}

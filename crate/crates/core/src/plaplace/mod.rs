//! Time-fractional p-Laplace subdiffusion on a moving interval
//! `Ω_t = (a(t), b(t)) ⊂ (0, 1)` with homogeneous Dirichlet data and zero
//! extension outside `Ω_t`.

use std::sync::Arc;

use crate::kernels::KernelPair;
use crate::stepper::{solve_flow, FlowConfig, Tolerances, Trajectory};
use crate::verify::derivative_energy;
use crate::{Error, Result, TimeGrid};

mod domain;
mod energy;

pub use domain::{DomainMap, MovingDomain, SpatialGrid};
pub use energy::PLaplaceEnergy;

#[derive(Debug, Clone)]
pub struct CdpConfig {
    pub pair: KernelPair,
    pub grid: TimeGrid,
    pub p: f64,
    pub domain: MovingDomain,
    pub spatial: SpatialGrid,
    pub u0: Vec<f64>,
    /// `f(t_n, x_i)`, `n = 0..=N`.
    pub forcing: Vec<Vec<f64>>,
    pub nu: f64,
    pub prox_tol: f64,
    pub residual_tol: f64,
}

impl CdpConfig {
    pub fn new(pair: KernelPair, grid: TimeGrid, p: f64, domain: MovingDomain, spatial: SpatialGrid, u0: Vec<f64>) -> Self {
        let d = spatial.d;
        Self {
            pair,
            grid,
            p,
            domain,
            spatial,
            u0,
            forcing: vec![vec![0.0; d]; grid.steps() + 1],
            nu: 0.0,
            prox_tol: 1e-10,
            residual_tol: Tolerances::default().residual_tol,
        }
    }

    pub fn energy(&self) -> Result<PLaplaceEnergy> {
        PLaplaceEnergy::new(self.p, self.domain, self.spatial, self.prox_tol)
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        let energy = Arc::new(self.energy()?);
        let mut cfg = FlowConfig::new(self.pair.clone(), self.grid, energy, self.u0.clone())
            .with_forcing(self.forcing.clone())
            .with_nu(self.nu);
        cfg.tolerances.residual_tol = self.residual_tol;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct CdpRun {
    pub trajectory: Trajectory,
    /// `max_n φ^{t_n}(u_n)`.
    pub sup_energy: f64,
    /// `(ℓ ∗ ‖D‖²)(t_n)` for every node.
    pub derivative_energy: Vec<f64>,
    pub derivative_bound: f64,
}

/// Solves the moving-domain problem and checks that every state vanishes
/// (bitwise) outside `Ω_{t_n}`.
pub fn run_cdp(config: &CdpConfig) -> Result<CdpRun> {
    let energy = config.energy()?;
    if config.u0.len() != config.spatial.d {
        return Err(Error::DimensionMismatch {
            expected: config.spatial.d,
            found: config.u0.len(),
        });
    }
    let mask0 = energy.mask(0.0);
    if config.u0.iter().zip(&mask0).any(|(v, m)| !m && *v != 0.0) {
        return Err(Error::Infeasible("u0 must vanish outside Ω_0".into()));
    }
    let flow = config.flow_config()?;
    let trajectory = solve_flow(&flow)?;

    for (n, u) in trajectory.u.iter().enumerate() {
        let mask = energy.mask(config.grid.node(n));
        if let Some(i) = (0..u.len()).find(|&i| !mask[i] && u[i] != 0.0) {
            return Err(Error::Infeasible(format!(
                "state at step {n} is nonzero outside the domain (node {i})"
            )));
        }
    }
    if let Some(n) = trajectory.energy.iter().position(|e| !e.is_finite()) {
        return Err(Error::Infeasible(format!("energy is infinite at step {n}")));
    }

    let sup_energy = trajectory.energy.iter().cloned().fold(0.0, f64::max);
    let derivative_energy = derivative_energy(&trajectory, &config.pair);
    let derivative_bound = derivative_energy.iter().cloned().fold(0.0, f64::max);
    Ok(CdpRun {
        trajectory,
        sup_energy,
        derivative_energy,
        derivative_bound,
    })
}

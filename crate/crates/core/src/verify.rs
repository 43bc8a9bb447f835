//! Numeric certificates for the inequalities satisfied by solutions:
//! fractional chain rules, the nonlocal energy estimate and the
//! boundedness of the energy quantities.
//!
//! Every certificate is a pure function of its inputs. Slack arrays are
//! sign-normalised so that a nonnegative entry means "the inequality holds
//! at this node".

use std::io::Write;

use serde::Serialize;

use crate::convex::{Energy, Space};
use crate::kernels::{cell_weights, KernelPair, Member};
use crate::stepper::{discrete_nonlocal_derivative, Trajectory};
use crate::{Error, Result, TimeGrid};

/// Default discretisation allowance: 0.05 at `N = 256`, halved per refinement.
pub fn default_allowance(steps: usize) -> f64 {
    0.05 * 256.0 / steps as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub name: String,
    pub slack: Vec<f64>,
    pub min_slack: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateSummary {
    pub name: String,
    pub min_slack: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Certificate {
    pub fn new(name: impl Into<String>, slack: Vec<f64>, tolerance: f64) -> Self {
        let min_slack = slack
            .iter()
            .cloned()
            .fold(f64::INFINITY, |a, b| if b.is_nan() { f64::NEG_INFINITY } else { a.min(b) });
        Self {
            name: name.into(),
            pass: min_slack >= -tolerance,
            slack,
            min_slack,
            tolerance,
        }
    }

    pub fn summary(&self) -> CertificateSummary {
        CertificateSummary {
            name: self.name.clone(),
            min_slack: self.min_slack,
            tolerance: self.tolerance,
            pass: self.pass,
        }
    }

    pub fn write_slack_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "slack"])?;
        for (n, s) in self.slack.iter().enumerate() {
            w.write_record([n.to_string(), s.to_string()])?;
        }
        w.flush()
    }
}

/// `τ Σ_{m=1}^{n} (a_m, b_m)` for `n = 0..=N`.
fn cumulative_inner(space: &Space, tau: f64, a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for m in 1..a.len() {
        acc += tau * space.inner(&a[m], &b[m]);
        out.push(acc);
    }
    out
}

/// Nonlocal derivatives `D_n` of a state sequence, `n = 0..=N` (`D_0 = 0`).
pub fn nonlocal_derivatives(u: &[Vec<f64>], pair: &KernelPair, grid: &TimeGrid) -> Vec<Vec<f64>> {
    let weights = cell_weights(pair, grid, Member::K);
    let increments: Vec<Vec<f64>> = u
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
        .collect();
    let mut out = vec![vec![0.0; u[0].len()]];
    for n in 1..u.len() {
        out.push(discrete_nonlocal_derivative(&weights, &increments[..n]));
    }
    out
}

/// `(ℓ ∗ ‖D‖²_H)(t_n)` for `n = 0..=N`.
pub fn derivative_energy(traj: &Trajectory, pair: &KernelPair) -> Vec<f64> {
    let lw = cell_weights(pair, &traj.grid, Member::L);
    let sq: Vec<f64> = traj.d.iter().map(|d| traj.space.norm_sq(d)).collect();
    lw.convolve(&sq)
}

/// Fractional chain rule for an autonomous energy:
/// `τ Σ_{m≤n} (D_m, ξ_m) ≥ [k ∗ (φ(u) − φ(u₀))](t_n)`.
pub fn chain_rule_certificate(
    traj: &Trajectory,
    pair: &KernelPair,
    energy: &dyn Energy,
    tolerance: f64,
) -> Result<Certificate> {
    if !energy.is_autonomous() {
        return Err(Error::Unsupported(
            "the chain-rule certificate needs an autonomous energy; use td_chain_rule_report".into(),
        ));
    }
    let grid = traj.grid;
    let kw = cell_weights(pair, &grid, Member::K);
    let lhs = cumulative_inner(&traj.space, grid.tau(), &traj.d, &traj.xi);
    let e0 = energy.eval(0.0, &traj.u[0]);
    let excess: Vec<f64> = traj
        .u
        .iter()
        .enumerate()
        .map(|(n, u)| energy.eval(grid.node(n), u) - e0)
        .collect();
    let rhs = kw.convolve(&excess);
    let slack = lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect();
    Ok(Certificate::new("chain_rule", slack, tolerance))
}

/// Quadratic special case `τ Σ (D_m, u_m) − ½[k ∗ (‖u‖² − ‖u₀‖²)](t_n)`, with
/// the convolution weights taken directly from the antiderivative `K`.
pub fn quadratic_chain_rule_slack(traj: &Trajectory, pair: &KernelPair) -> Vec<f64> {
    let grid = traj.grid;
    let lhs = cumulative_inner(&traj.space, grid.tau(), &traj.d, &traj.u);
    let n0 = traj.space.norm_sq(&traj.u[0]);
    let big_k = |t: f64| pair.k_integral(t).expect("kernel with antiderivative");
    (0..traj.u.len())
        .map(|n| {
            let mut rhs = 0.0;
            for j in 1..=n {
                let w = big_k(grid.node(n - j + 1)) - big_k(grid.node(n - j));
                rhs += w * (traj.space.norm_sq(&traj.u[j]) - n0);
            }
            lhs[n] - 0.5 * rhs
        })
        .collect()
}

/// Nonlocal energy estimate for a history with `u₀ = 0`:
/// `τ Σ_{m≤n} (D_m, (u_m − u_{m−1})/τ) ≥ ½ (ℓ ∗ ‖D‖²)(t_n)`.
pub fn ab_estimate_certificate(
    u: &[Vec<f64>],
    space: &Space,
    pair: &KernelPair,
    grid: &TimeGrid,
    tolerance: f64,
) -> Result<Certificate> {
    if u.len() != grid.steps() + 1 {
        return Err(Error::DimensionMismatch {
            expected: grid.steps() + 1,
            found: u.len(),
        });
    }
    if u[0].iter().any(|v| *v != 0.0) {
        return Err(Error::invalid("u", "the history must start at u_0 = 0"));
    }
    let tau = grid.tau();
    let d = nonlocal_derivatives(u, pair, grid);
    let mut velocity = vec![vec![0.0; u[0].len()]];
    velocity.extend(
        u.windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b) / tau).collect::<Vec<f64>>()),
    );
    let lhs = cumulative_inner(space, tau, &d, &velocity);
    let sq: Vec<f64> = d.iter().map(|v| space.norm_sq(v)).collect();
    let rhs = cell_weights(pair, grid, Member::L).convolve(&sq);
    let slack = lhs.iter().zip(&rhs).map(|(l, r)| l - 0.5 * r).collect();
    Ok(Certificate::new("ab_estimate", slack, tolerance))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBounds {
    /// `max_n (ℓ ∗ ‖D‖²)(t_n)` on the coarse and refined grids.
    pub sup_bound: f64,
    pub sup_bound_fine: f64,
    /// `max_n |φ^{t_n}(u_n)|` on the coarse and refined grids.
    pub sup_energy: f64,
    pub sup_energy_fine: f64,
}

fn stability_ratio(a: f64, b: f64) -> f64 {
    if !(a.is_finite() && b.is_finite()) {
        return f64::INFINITY;
    }
    if a == 0.0 && b == 0.0 {
        return 1.0;
    }
    if a == 0.0 || b == 0.0 {
        return f64::INFINITY;
    }
    (a / b).max(b / a)
}

/// Boundedness of `ℓ ∗ ‖D‖²` and of `φ^{t}(u(t))`: both suprema must be finite
/// and change by at most a factor 2 between a run and its refinement.
pub fn energy_certificate(coarse: &Trajectory, fine: &Trajectory, pair: &KernelPair) -> Result<(EnergyBounds, Certificate)> {
    if fine.grid.t_final() != coarse.grid.t_final() || fine.grid.steps() <= coarse.grid.steps() {
        return Err(Error::Mismatch("the second trajectory must refine the first".into()));
    }
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, b| if b.is_nan() { f64::NAN } else { a.max(b.abs()) });
    let bounds = EnergyBounds {
        sup_bound: sup(&derivative_energy(coarse, pair)),
        sup_bound_fine: sup(&derivative_energy(fine, pair)),
        sup_energy: sup(&coarse.energy),
        sup_energy_fine: sup(&fine.energy),
    };
    let slack = vec![
        2.0 - stability_ratio(bounds.sup_bound, bounds.sup_bound_fine),
        2.0 - stability_ratio(bounds.sup_energy, bounds.sup_energy_fine),
    ];
    Ok((bounds.clone(), Certificate::new("energy", slack, 0.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TdChainRuleReport {
    /// `(ε, C_ε)` with `C_ε` the smallest constant valid at every node.
    pub per_epsilon: Vec<(f64, f64)>,
    /// Smallest constant valid for every `ε` of the grid.
    pub constant: f64,
    pub finite: bool,
}

pub fn default_epsilons() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

/// Empirical constant of the time-dependent chain rule
///
/// `τΣ(D_m, ξ_m) ≥ [k ∗ φ•(u•)](t_n) − φ⁰(u₀)K(t_n) − εC τΣ‖ξ_m‖²
///   − (C/ε)[T(1 + |φ⁰(u₀)|) + τΣ|φ^{t_m}(u_m)|]`.
pub fn td_chain_rule_report(
    traj: &Trajectory,
    pair: &KernelPair,
    energy: &dyn Energy,
    epsilons: &[f64],
) -> Result<TdChainRuleReport> {
    if energy.shift_map(0.0, 0.0, &traj.u[0]).is_none() {
        return Err(Error::Unsupported(format!(
            "energy `{}` exposes no shift map",
            energy.name()
        )));
    }
    let grid = traj.grid;
    let tau = grid.tau();
    let kw = cell_weights(pair, &grid, Member::K);
    let phi: Vec<f64> = traj
        .u
        .iter()
        .enumerate()
        .map(|(n, u)| energy.eval(grid.node(n), u))
        .collect();
    let phi0 = phi[0];
    let lhs = cumulative_inner(&traj.space, tau, &traj.d, &traj.xi);
    let conv = kw.convolve(&phi);
    let mut xi_sq = 0.0;
    let mut phi_abs = 0.0;
    let mut nodes = Vec::with_capacity(traj.u.len());
    for n in 1..traj.u.len() {
        xi_sq += tau * traj.space.norm_sq(&traj.xi[n]);
        phi_abs += tau * phi[n].abs();
        let big_k = tau * kw.values[..n].iter().sum::<f64>();
        let deficit = conv[n] - phi0 * big_k - lhs[n];
        let drift = grid.t_final() * (1.0 + phi0.abs()) + phi_abs;
        nodes.push((deficit, xi_sq, drift));
    }
    let per_epsilon: Vec<(f64, f64)> = epsilons
        .iter()
        .map(|&eps| {
            let c = nodes
                .iter()
                .map(|&(deficit, g, drift)| deficit.max(0.0) / (eps * g + drift / eps))
                .fold(0.0, f64::max);
            (eps, c)
        })
        .collect();
    let constant = per_epsilon.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(TdChainRuleReport {
        finite: constant.is_finite(),
        per_epsilon,
        constant,
    })
}

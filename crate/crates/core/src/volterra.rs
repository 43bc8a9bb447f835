//! Linear Volterra equations of the second kind
//!
//! `w(t) = g₁(t) + ∫₀ᵗ g₂(s) w(s) ds + (g₃ ∗ w)(t)`
//!
//! with scalar coefficients `g₂`, `g₃` and a vector-valued unknown, and the
//! Gronwall majorant `G` that dominates every subsolution.

use std::io::Write;

use crate::kernels::ConvWeights;
use crate::{Error, Result, TimeGrid};

const FP_TOL: f64 = 1e-12;
const FP_MAX_ITER: usize = 200;
const FP_TARGET_FACTOR: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct VolterraProblem {
    pub grid: TimeGrid,
    /// Node samples `g₁(t_n)`, each of dimension `d`.
    pub g1: Vec<Vec<f64>>,
    /// Node samples `g₂(t_n)`.
    pub g2: Vec<f64>,
    /// Cell averages of `g₃` (`None` for no memory term).
    pub g3: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    March,
    /// Picard iteration in the `exp(−βt)`-weighted sup norm, starting from `β`.
    FixedPoint { beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraSolution {
    /// `w(t_n)`, `n = 0..=N`.
    pub w: Vec<Vec<f64>>,
    /// Final weight and discrete contraction factor (fixed-point only).
    pub beta: Option<f64>,
    pub contraction: Option<f64>,
    pub iterations: usize,
}

impl VolterraSolution {
    /// First component of every node value.
    pub fn scalar(&self) -> Vec<f64> {
        self.w.iter().map(|v| v[0]).collect()
    }
}

impl VolterraProblem {
    pub fn scalar(grid: TimeGrid, g1: Vec<f64>, g2: Vec<f64>, g3: Option<Vec<f64>>) -> Self {
        Self {
            grid,
            g1: g1.into_iter().map(|v| vec![v]).collect(),
            g2,
            g3,
        }
    }

    /// `g₃` given by convolution weights, e.g. `−λ·κ(ℓ)`.
    pub fn with_kernel(mut self, weights: &ConvWeights, scale: f64) -> Self {
        self.g3 = Some(weights.values.iter().map(|v| scale * v).collect());
        self
    }

    fn validate(&self) -> Result<usize> {
        let n = self.grid.steps() + 1;
        if self.g1.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.g1.len(),
            });
        }
        if self.g2.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.g2.len(),
            });
        }
        if let Some(g3) = &self.g3 {
            if g3.len() != n - 1 {
                return Err(Error::DimensionMismatch {
                    expected: n - 1,
                    found: g3.len(),
                });
            }
        }
        let d = self.g1[0].len();
        if let Some(bad) = self.g1.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Ok(d)
    }

    fn g3_at(&self, m: usize) -> f64 {
        self.g3.as_ref().map_or(0.0, |g| g[m])
    }

    /// Picard map `Λ(w)_n = g₁ + τΣ_{j≤n} g₂_j w_j + τΣ_{j≤n} κ_{n−j} w_j`.
    fn apply(&self, w: &[Vec<f64>], out: &mut [Vec<f64>]) {
        let tau = self.grid.tau();
        for n in 0..w.len() {
            let row = &mut out[n];
            row.copy_from_slice(&self.g1[n]);
            for j in 1..=n {
                let c = tau * (self.g2[j] + self.g3_at(n - j));
                for (r, x) in row.iter_mut().zip(&w[j]) {
                    *r += c * x;
                }
            }
        }
    }

    /// `max_n τΣ_{j=1}^{n} (|g₂_j| + |κ_{n−j}|) e^{−β(t_n − t_j)}`: the Lipschitz
    /// constant of the discrete Picard map in the weighted sup norm.
    pub fn contraction_factor(&self, beta: f64) -> f64 {
        let tau = self.grid.tau();
        let n_max = self.grid.steps();
        let decay: Vec<f64> = (0..=n_max).map(|m| (-beta * m as f64 * tau).exp()).collect();
        (1..=n_max)
            .map(|n| {
                tau * (1..=n)
                    .map(|j| (self.g2[j].abs() + self.g3_at(n - j).abs()) * decay[n - j])
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

pub fn solve_volterra(problem: &VolterraProblem, method: Method) -> Result<VolterraSolution> {
    let d = problem.validate()?;
    match method {
        Method::March => march(problem, d),
        Method::FixedPoint { beta } => fixed_point(problem, d, beta),
    }
}

fn march(p: &VolterraProblem, d: usize) -> Result<VolterraSolution> {
    let tau = p.grid.tau();
    let n_max = p.grid.steps();
    let mut w: Vec<Vec<f64>> = Vec::with_capacity(n_max + 1);
    w.push(p.g1[0].clone());
    let mut rhs = vec![0.0; d];
    for n in 1..=n_max {
        let coefficient = 1.0 - tau * p.g2[n] - tau * p.g3_at(0);
        if !(coefficient.abs() > 1e-14) {
            return Err(Error::SingularStep { node: n, coefficient });
        }
        rhs.copy_from_slice(&p.g1[n]);
        for (j, wj) in w.iter().enumerate().skip(1) {
            let c = tau * (p.g2[j] + p.g3_at(n - j));
            for (r, x) in rhs.iter_mut().zip(wj) {
                *r += c * x;
            }
        }
        w.push(rhs.iter().map(|r| r / coefficient).collect());
    }
    Ok(VolterraSolution {
        w,
        beta: None,
        contraction: None,
        iterations: n_max,
    })
}

fn fixed_point(p: &VolterraProblem, d: usize, beta0: f64) -> Result<VolterraSolution> {
    if !(beta0 > 0.0 && beta0.is_finite()) {
        return Err(Error::invalid("beta", format!("must be > 0, got {beta0}")));
    }
    let mut beta = beta0;
    let mut factor = p.contraction_factor(beta);
    let mut doublings = 0;
    while factor > FP_TARGET_FACTOR {
        if doublings == 60 {
            return Err(Error::FixedPointNonconvergence {
                iterations: 0,
                factor,
                increment: f64::INFINITY,
            });
        }
        beta *= 2.0;
        doublings += 1;
        factor = p.contraction_factor(beta);
    }

    let weights: Vec<f64> = p.grid.nodes().map(|t| (-beta * t).exp()).collect();
    let mut w = p.g1.clone();
    let mut next = vec![vec![0.0; d]; w.len()];
    let mut increment = f64::INFINITY;
    for iteration in 1..=FP_MAX_ITER {
        p.apply(&w, &mut next);
        increment = next
            .iter()
            .zip(&w)
            .zip(&weights)
            .map(|((a, b), wt)| {
                wt * a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        std::mem::swap(&mut w, &mut next);
        if increment <= FP_TOL {
            return Ok(VolterraSolution {
                w,
                beta: Some(beta),
                contraction: Some(factor),
                iterations: iteration,
            });
        }
    }
    Err(Error::FixedPointNonconvergence {
        iterations: FP_MAX_ITER,
        factor,
        increment,
    })
}

/// Solution `G` of the Volterra equation with nonnegative `g₂`, `g₃`; it
/// dominates every `f` satisfying the corresponding integral inequality.
/// Grids with `τ(g₂_n + κ₀) ≥ 1` are rejected.
pub fn gronwall_bound(
    g1: &[f64],
    g2: &[f64],
    g3: Option<&[f64]>,
    grid: &TimeGrid,
) -> Result<Vec<f64>> {
    if let Some(v) = g2.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::invalid("g2", format!("must be nonnegative, found {v}")));
    }
    if let Some(v) = g3.and_then(|g| g.iter().find(|v| !(**v >= 0.0))) {
        return Err(Error::invalid("g3", format!("must be nonnegative, found {v}")));
    }
    let problem = VolterraProblem::scalar(*grid, g1.to_vec(), g2.to_vec(), g3.map(<[f64]>::to_vec));
    problem.validate()?;
    // the discrete comparison principle needs a positive implicit coefficient
    let tau = grid.tau();
    for n in 1..=grid.steps() {
        let coefficient = 1.0 - tau * (problem.g2[n] + problem.g3_at(0));
        if !(coefficient > 0.0) {
            return Err(Error::SingularStep { node: n, coefficient });
        }
    }
    Ok(solve_volterra(&problem, Method::March)?.scalar())
}

/// `f(t_n) ≤ G(t_n) + slack` at every node.
pub fn check_dominated(f: &[f64], g: &[f64], slack: f64) -> bool {
    f.len() == g.len() && f.iter().zip(g).all(|(a, b)| *a <= b + slack)
}

/// CSV with columns `t, w` and optionally `G`.
pub fn write_csv<W: Write>(grid: &TimeGrid, w: &[f64], majorant: Option<&[f64]>, out: W) -> std::io::Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    if majorant.is_some() {
        wr.write_record(["t", "w", "G"])?;
    } else {
        wr.write_record(["t", "w"])?;
    }
    for (n, t) in grid.nodes().enumerate() {
        let mut rec = vec![t.to_string(), w[n].to_string()];
        if let Some(g) = majorant {
            rec.push(g[n].to_string());
        }
        wr.write_record(&rec)?;
    }
    wr.flush()
}

use crate::convex::{Energy, Space};
use crate::{Error, Result};

use super::domain::{MovingDomain, SpatialGrid};

/// Regularisation of the flux derivative used in the Newton matrix only.
const JACOBIAN_EPS: f64 = 1e-8;
const NEWTON_MAX_ITER: usize = 50;
const DESCENT_MAX_ITER: usize = 20_000;

/// Discrete `φ_pᵗ(w) = (1/p) ∫_{Ω_t} |∇w|^p` on zero-extended grid functions;
/// `+∞` unless `w` vanishes at every node outside `Ω_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PLaplaceEnergy {
    p: f64,
    domain: MovingDomain,
    grid: SpatialGrid,
    prox_tol: f64,
}

impl PLaplaceEnergy {
    pub fn new(p: f64, domain: MovingDomain, grid: SpatialGrid, prox_tol: f64) -> Result<Self> {
        if !(p >= 2.0 && p.is_finite()) {
            return Err(Error::invalid("p", format!("must be finite and >= 2, got {p}")));
        }
        if !(prox_tol > 0.0) {
            return Err(Error::invalid("prox_tol", "must be > 0"));
        }
        Ok(Self {
            p,
            domain,
            grid,
            prox_tol,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn domain(&self) -> &MovingDomain {
        &self.domain
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn mask(&self, t: f64) -> Vec<bool> {
        self.grid.mask(&self.domain, t)
    }

    fn flux(&self, g: f64) -> f64 {
        // |g|^{p−2} g, zero at g = 0
        if g == 0.0 {
            0.0
        } else {
            g.abs().powf(self.p - 2.0) * g
        }
    }

    /// `(1/p) Σ_e |g_e|^p` over all edges of the zero-padded vector.
    fn edge_energy(&self, padded: &[f64]) -> f64 {
        let h = self.grid.h();
        padded
            .windows(2)
            .map(|w| ((w[1] - w[0]) / h).abs().powf(self.p))
            .sum::<f64>()
            / self.p
    }

    fn padded(&self, w: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(w.len() + 2);
        out.push(0.0);
        out.extend_from_slice(w);
        out.push(0.0);
        out
    }

    /// Discrete `−Δ_p w` at the interior nodes (zero Dirichlet ghosts).
    pub fn neg_p_laplacian(&self, w: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        let u = self.padded(w);
        (1..=w.len())
            .map(|i| (self.flux((u[i] - u[i - 1]) / h) - self.flux((u[i + 1] - u[i]) / h)) / h)
            .collect()
    }

    /// `Ψ_p(t, s, w) = w(Θ(s, Θ⁻¹(t, ·)))`, linearly interpolated and masked to `Ω_t`.
    pub fn transport(&self, t: f64, s: f64, w: &[f64]) -> Vec<f64> {
        let mask_s = self.mask(s);
        let source: Vec<f64> = w
            .iter()
            .zip(&mask_s)
            .map(|(v, m)| if *m { *v } else { 0.0 })
            .collect();
        if self.domain.same_slice(t, s) {
            return source;
        }
        let mask_t = self.mask(t);
        let theta_t = self.domain.theta(t);
        let theta_s = self.domain.theta(s);
        let padded = self.padded(&source);
        let n1 = (self.grid.d + 1) as f64;
        (0..self.grid.d)
            .map(|i| {
                if !mask_t[i] {
                    return 0.0;
                }
                let y = theta_s.eval(theta_t.inverse(self.grid.x(i)));
                // padded node j sits at j·h
                let pos = (y * n1).clamp(0.0, n1);
                let j = (pos.floor() as usize).min(self.grid.d);
                let frac = pos - j as f64;
                (1.0 - frac) * padded[j] + frac * padded[j + 1]
            })
            .collect()
    }

    fn solve_prox(&self, t: f64, lambda: f64, z: &[f64]) -> Result<Vec<f64>> {
        let d = self.grid.d;
        let h = self.grid.h();
        let mask = self.mask(t);
        let free: Vec<usize> = (0..d).filter(|&i| mask[i]).collect();
        let mut u = vec![0.0; d];
        if free.is_empty() {
            return Ok(u);
        }
        for &i in &free {
            u[i] = z[i];
        }

        let objective = |u: &[f64]| -> f64 {
            let quad: f64 = free.iter().map(|&i| (u[i] - z[i]).powi(2)).sum::<f64>() / (2.0 * lambda);
            quad + self.edge_energy(&self.padded(u))
        };
        let gradient = |u: &[f64]| -> Vec<f64> {
            let lap = self.neg_p_laplacian(u);
            free.iter().map(|&i| (u[i] - z[i]) / lambda + lap[i]).collect()
        };
        // gradient norm in the weighted space, relative to the data size
        let norm = |g: &[f64]| (h * g.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let z_scale = (h * free.iter().map(|&i| z[i] * z[i]).sum::<f64>()).sqrt();
        let tol = self.prox_tol * (1.0 + z_scale / lambda);

        let mut grad = gradient(&u);
        let mut gnorm = norm(&grad);
        let mut fval = objective(&u);
        let mut iterations = 0;

        // damped Newton
        while gnorm > tol && iterations < NEWTON_MAX_ITER {
            iterations += 1;
            let dir = self.newton_direction(&u, &free, lambda, &grad);
            let slope: f64 = grad.iter().zip(&dir).map(|(g, p)| g * p).sum();
            if !(slope < 0.0) {
                break;
            }
            match self.line_search(&u, &free, &dir, fval, slope, &objective) {
                Some((next, fnext)) => {
                    u = next;
                    fval = fnext;
                }
                None => break,
            }
            grad = gradient(&u);
            gnorm = norm(&grad);
        }

        // gradient descent fallback
        let mut descent = 0;
        while gnorm > tol && descent < DESCENT_MAX_ITER {
            descent += 1;
            let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
            let slope: f64 = -grad.iter().map(|g| g * g).sum::<f64>();
            match self.line_search(&u, &free, &dir, fval, slope, &objective) {
                Some((next, fnext)) => {
                    u = next;
                    fval = fnext;
                }
                None => break,
            }
            grad = gradient(&u);
            gnorm = norm(&grad);
        }

        if gnorm > tol {
            return Err(Error::ProxNonconvergence {
                iterations: iterations + descent,
                grad_norm: gnorm,
            });
        }
        Ok(u)
    }

    fn newton_direction(&self, u: &[f64], free: &[usize], lambda: f64, grad: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        let padded = self.padded(u);
        // edge weights (p−1)(g² + ε²)^{(p−2)/2} / h² between padded nodes e and e+1
        let weight = |e: usize| {
            let g = (padded[e + 1] - padded[e]) / h;
            (self.p - 1.0) * (g * g + JACOBIAN_EPS * JACOBIAN_EPS).powf(0.5 * (self.p - 2.0)) / (h * h)
        };
        let m = free.len();
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m.saturating_sub(1)];
        for (k, &i) in free.iter().enumerate() {
            // padded index of node i is i + 1
            diag[k] = 1.0 / lambda + weight(i) + weight(i + 1);
            if k + 1 < m {
                off[k] = -weight(i + 1);
            }
        }
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        solve_tridiagonal(&off, &diag, &off, &rhs)
    }

    fn line_search(
        &self,
        u: &[f64],
        free: &[usize],
        dir: &[f64],
        fval: f64,
        slope: f64,
        objective: &impl Fn(&[f64]) -> f64,
    ) -> Option<(Vec<f64>, f64)> {
        let mut step = 1.0;
        let mut trial = u.to_vec();
        while step > 1e-14 {
            for (k, &i) in free.iter().enumerate() {
                trial[i] = u[i] + step * dir[k];
            }
            let f = objective(&trial);
            if f <= fval + 1e-4 * step * slope + 1e-15 * fval.abs() {
                return Some((trial, f));
            }
            step *= 0.5;
        }
        None
    }
}

/// Thomas algorithm for a tridiagonal system with sub-, main and super-diagonals.
pub(crate) fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut beta = diag[0];
    x[0] = rhs[0] / beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i - 1] * c[i];
        x[i] = (rhs[i] - lower[i - 1] * x[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i + 1] * x[i + 1];
    }
    x
}

impl Energy for PLaplaceEnergy {
    fn name(&self) -> String {
        format!("plaplace(p={}, d={})", self.p, self.grid.d)
    }

    fn space(&self) -> Space {
        Space::weighted(self.grid.d, self.grid.h())
    }

    fn eval(&self, t: f64, w: &[f64]) -> f64 {
        let mask = self.mask(t);
        if w.iter().zip(&mask).any(|(v, m)| !m && *v != 0.0) {
            return f64::INFINITY;
        }
        self.grid.h() * self.edge_energy(&self.padded(w))
    }

    fn prox_point(&self, t: f64, lambda: f64, z: &[f64]) -> Result<Vec<f64>> {
        self.solve_prox(t, lambda, z)
    }

    fn is_autonomous(&self) -> bool {
        self.domain.is_static()
    }

    fn is_nonnegative(&self) -> bool {
        true
    }

    fn shift_map(&self, t: f64, s: f64, w: &[f64]) -> Option<Vec<f64>> {
        Some(self.transport(t, s, w))
    }
}

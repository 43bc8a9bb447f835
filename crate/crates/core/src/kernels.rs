//! Completely positive kernel pairs `(k, ℓ)` with `k ∗ ℓ ≡ 1`, their
//! cell-average convolution weights and the resolvent kernels `k_λ`.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::special::gamma;
use crate::{Error, Result, TimeGrid};

pub use crate::special::mittag_leffler;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied kernel pair. Antiderivatives are optional; without them
/// cell averages fall back to numerical quadrature.
#[derive(Clone)]
pub struct TabulatedPair {
    pub name: String,
    pub k: ScalarFn,
    pub l: ScalarFn,
    pub k_antiderivative: Option<ScalarFn>,
    pub l_antiderivative: Option<ScalarFn>,
}

impl fmt::Debug for TabulatedPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TabulatedPair")
            .field("name", &self.name)
            .field("k_antiderivative", &self.k_antiderivative.is_some())
            .field("l_antiderivative", &self.l_antiderivative.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum KernelKind {
    /// `k = t^{−α}/Γ(1−α)`, `ℓ = t^{α−1}/Γ(α)`.
    RiemannLiouville { alpha: f64 },
    /// The `α → 1` limit: `k` is a unit point mass at 0 and `ℓ ≡ 1`.
    Classical,
    Tabulated(TabulatedPair),
}

/// Which member of the pair a set of weights discretises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Member {
    K,
    L,
}

#[derive(Debug, Clone)]
pub struct KernelPair {
    kind: KernelKind,
}

/// Serializable description of the built-in kernel kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    RiemannLiouville { alpha: f64 },
    Classical,
}

/// Riemann-Liouville pair `(k_{1−α}, k_α)`.
pub fn rl_pair(alpha: f64) -> Result<KernelPair> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    Ok(KernelPair {
        kind: KernelKind::RiemannLiouville { alpha },
    })
}

impl KernelPair {
    pub fn classical() -> Self {
        Self {
            kind: KernelKind::Classical,
        }
    }

    pub fn tabulated(pair: TabulatedPair) -> Self {
        Self {
            kind: KernelKind::Tabulated(pair),
        }
    }

    pub fn from_spec(spec: KernelSpec) -> Result<Self> {
        match spec {
            KernelSpec::RiemannLiouville { alpha } => rl_pair(alpha),
            KernelSpec::Classical => Ok(Self::classical()),
        }
    }

    pub fn spec(&self) -> Option<KernelSpec> {
        match self.kind {
            KernelKind::RiemannLiouville { alpha } => Some(KernelSpec::RiemannLiouville { alpha }),
            KernelKind::Classical => Some(KernelSpec::Classical),
            KernelKind::Tabulated(_) => None,
        }
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            KernelKind::RiemannLiouville { alpha } => Some(alpha),
            KernelKind::Classical => Some(1.0),
            KernelKind::Tabulated(_) => None,
        }
    }

    pub fn is_classical(&self) -> bool {
        matches!(self.kind, KernelKind::Classical)
    }

    /// `K(t) = ∫₀ᵗ k`. The classical point mass gives the Heaviside step.
    pub fn k_integral(&self, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return Some(0.0);
        }
        match &self.kind {
            KernelKind::RiemannLiouville { alpha } => {
                Some(t.powf(1.0 - alpha) / gamma(2.0 - alpha))
            }
            KernelKind::Classical => Some(1.0),
            KernelKind::Tabulated(p) => p.k_antiderivative.as_ref().map(|f| f(t)),
        }
    }

    /// `L(t) = ∫₀ᵗ ℓ`.
    pub fn l_integral(&self, t: f64) -> Option<f64> {
        if t <= 0.0 {
            return Some(0.0);
        }
        match &self.kind {
            KernelKind::RiemannLiouville { alpha } => Some(t.powf(*alpha) / gamma(1.0 + alpha)),
            KernelKind::Classical => Some(t),
            KernelKind::Tabulated(p) => p.l_antiderivative.as_ref().map(|f| f(t)),
        }
    }

    /// `‖ℓ‖_{L¹(0,T)}`, by quadrature for tabulated pairs without antiderivative.
    pub fn l_norm_l1(&self, t_final: f64) -> f64 {
        match self.l_integral(t_final) {
            Some(v) => v,
            None => {
                let KernelKind::Tabulated(p) = &self.kind else {
                    unreachable!("built-in kinds have exact antiderivatives")
                };
                let f = p.l.clone();
                integrate_from_origin(f.as_ref(), t_final)
            }
        }
    }
}

/// `∫₀ᵇ f`; the substitution `s = b v⁸` absorbs an integrable singularity at the origin.
fn integrate_from_origin(f: &dyn Fn(f64) -> f64, b: f64) -> f64 {
    let g = |v: f64| f(b * v.powi(8)) * 8.0 * b * v.powi(7);
    quadrature::double_exponential::integrate(g, 0.0, 1.0, 1e-13).integral
}

/// Cell averages `κ_m = (1/τ)∫_{t_m}^{t_{m+1}} k`, `m = 0..N−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub values: Vec<f64>,
    pub tau: f64,
    pub member: Member,
    /// Set when the kernel had no antiderivative and cells were integrated numerically.
    pub quadrature_fallback: bool,
}

impl ConvWeights {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    /// `τ Σ_{j=1}^{n} κ_{n−j} g_j`: the cell-average convolution `(kernel ∗ g)(t_n)`
    /// of a node sequence `g` (index 0 is ignored).
    pub fn convolve_at(&self, g: &[f64], n: usize) -> f64 {
        let mut acc = 0.0;
        for j in 1..=n {
            acc += self.values[n - j] * g[j];
        }
        self.tau * acc
    }

    /// `convolve_at` for every node, `n = 0..=N`, with value 0 at `n = 0`.
    pub fn convolve(&self, g: &[f64]) -> Vec<f64> {
        let n_max = g.len() - 1;
        (0..=n_max).map(|n| self.convolve_at(g, n)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "kappa"])?;
        for (m, k) in self.values.iter().enumerate() {
            w.write_record([m.to_string(), k.to_string()])?;
        }
        w.flush()
    }
}

pub fn cell_weights(pair: &KernelPair, grid: &TimeGrid, member: Member) -> ConvWeights {
    let tau = grid.tau();
    let n = grid.steps();
    let antider = |t: f64| match member {
        Member::K => pair.k_integral(t),
        Member::L => pair.l_integral(t),
    };
    let exact = antider(tau).is_some();
    let values = if exact {
        // telescoping differences of the antiderivative; the singular value k(0) is never sampled
        let big: Vec<f64> = (0..=n).map(|m| antider(grid.node(m)).unwrap()).collect();
        big.windows(2).map(|w| (w[1] - w[0]) / tau).collect()
    } else {
        let KernelKind::Tabulated(p) = &pair.kind else {
            unreachable!("built-in kinds have exact antiderivatives")
        };
        let f = match member {
            Member::K => p.k.clone(),
            Member::L => p.l.clone(),
        };
        (0..n)
            .map(|m| {
                let (a, b) = (grid.node(m), grid.node(m + 1));
                if m == 0 {
                    integrate_from_origin(f.as_ref(), b) / tau
                } else {
                    quadrature::double_exponential::integrate(|s| f(s), a, b, 1e-13).integral / tau
                }
            })
            .collect()
    };
    ConvWeights {
        values,
        tau,
        member,
        quadrature_fallback: !exact,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcIdentity {
    /// `|τ Σ_{j<n} κ_j(k) κ_{n−1−j}(ℓ) − 1|` for `n = 1..=N` (index `n − 1`).
    pub node_errors: Vec<f64>,
    pub max_error: f64,
}

/// Discrete check of `k ∗ ℓ ≡ 1` at the grid nodes.
pub fn check_pc_identity(pair: &KernelPair, grid: &TimeGrid) -> Result<PcIdentity> {
    if pair.is_classical() {
        return Err(Error::Unsupported(
            "the classical mode satisfies k ∗ ℓ = 1 by construction".into(),
        ));
    }
    let kw = cell_weights(pair, grid, Member::K);
    let lw = cell_weights(pair, grid, Member::L);
    let tau = grid.tau();
    let node_errors: Vec<f64> = (1..=grid.steps())
        .map(|n| {
            let s: f64 = (0..n).map(|j| kw.values[j] * lw.values[n - 1 - j]).sum();
            (tau * s - 1.0).abs()
        })
        .collect();
    let max_error = node_errors.iter().cloned().fold(0.0, f64::max);
    Ok(PcIdentity {
        node_errors,
        max_error,
    })
}

/// Node samples of the resolvent kernel solving `λ k_λ + ℓ ∗ k_λ = 1`,
/// `k_λ(0) = 1/λ`.
///
/// Implicit rectangle rule: `λ k_n + τ Σ_{j=1}^{n} κ_{n−j}(ℓ) k_j = 1`.
pub fn resolvent_kernel(pair: &KernelPair, lambda: f64, grid: &TimeGrid) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be > 0, got {lambda}")));
    }
    let lw = cell_weights(pair, grid, Member::L);
    let tau = grid.tau();
    let diag = lambda + tau * lw.values[0];
    let mut out = Vec::with_capacity(grid.steps() + 1);
    out.push(1.0 / lambda);
    for n in 1..=grid.steps() {
        let hist: f64 = (1..n).map(|j| lw.values[n - j] * out[j]).sum();
        out.push((1.0 - tau * hist) / diag);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rl(alpha: f64) -> KernelPair {
        rl_pair(alpha).unwrap()
    }

    #[test]
    fn rl_antiderivatives() {
        let p = rl(0.5);
        let expected = 2.0 / PI.sqrt();
        assert!((p.k_integral(1.0).unwrap() - expected).abs() < 1e-14);
        assert!((p.l_integral(1.0).unwrap() - expected).abs() < 1e-14);
        for a in [0.1, 0.5, 0.9] {
            assert_eq!(rl(a).k_integral(0.0), Some(0.0));
            assert_eq!(rl(a).l_integral(0.0), Some(0.0));
        }
    }

    #[test]
    fn rl_rejects_bad_alpha() {
        for a in [0.0, 1.0, -0.2, 1.3, f64::NAN] {
            assert!(rl_pair(a).is_err());
        }
    }

    #[test]
    fn rl_weights_closed_form() {
        let g = TimeGrid::new(2.0, 2).unwrap();
        let w = cell_weights(&rl(0.5), &g, Member::K);
        let c = 2.0 / PI.sqrt();
        assert!((w.values[0] - c).abs() < 1e-14);
        assert!((w.values[1] - (2f64.sqrt() - 1.0) * c).abs() < 1e-14);
        assert!((w.values[1] - 0.467390).abs() < 1e-6);
        assert!(!w.quadrature_fallback);
    }

    #[test]
    fn classical_weights() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let k = cell_weights(&KernelPair::classical(), &g, Member::K);
        assert!((k.values[0] - 10.0).abs() < 1e-12);
        assert!(k.values[1..].iter().all(|&v| v == 0.0));
        let l = cell_weights(&KernelPair::classical(), &g, Member::L);
        assert!(l.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn weight_mass_telescopes() {
        let g = TimeGrid::new(1.7, 333).unwrap();
        for a in [0.3, 0.5, 0.7] {
            let p = rl(a);
            let w = cell_weights(&p, &g, Member::K);
            let mass: f64 = g.tau() * w.values.iter().sum::<f64>();
            assert!((mass - p.k_integral(1.7).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn first_node_pc_error_is_scale_free() {
        // τ κ₀(k) κ₀(ℓ) = K(τ)L(τ)/τ = 1/(Γ(2−α)Γ(1+α)) for every τ
        let expected = 4.0 / PI - 1.0;
        for n in [1, 8, 512] {
            let g = TimeGrid::new(1.0, n).unwrap();
            let r = check_pc_identity(&rl(0.5), &g).unwrap();
            assert!((r.node_errors[0] - expected).abs() < 1e-12);
        }
        assert!((expected - 0.27324).abs() < 1e-5);
    }

    #[test]
    fn pc_error_decays_at_fixed_time() {
        // error at t = 1/2 shrinks under refinement
        for a in [0.3, 0.5, 0.7] {
            let e: Vec<f64> = [64usize, 128, 256]
                .iter()
                .map(|&n| {
                    let g = TimeGrid::new(1.0, n).unwrap();
                    check_pc_identity(&rl(a), &g).unwrap().node_errors[n / 2 - 1]
                })
                .collect();
            assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
        }
    }

    #[test]
    fn classical_pc_check_unsupported() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert!(matches!(
            check_pc_identity(&KernelPair::classical(), &g),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn tabulated_without_antiderivative_uses_quadrature() {
        let a: f64 = 0.4;
        let (ga, g1a) = (gamma(a), gamma(1.0 - a));
        let pair = KernelPair::tabulated(TabulatedPair {
            name: "rl-0.4".into(),
            k: Arc::new(move |t: f64| t.powf(-a) / g1a),
            l: Arc::new(move |t: f64| t.powf(a - 1.0) / ga),
            k_antiderivative: None,
            l_antiderivative: None,
        });
        let g = TimeGrid::new(1.0, 32).unwrap();
        let tab = cell_weights(&pair, &g, Member::K);
        let exact = cell_weights(&rl(a), &g, Member::K);
        assert!(tab.quadrature_fallback);
        for (x, y) in tab.values.iter().zip(&exact.values) {
            assert!((x - y).abs() < 1e-8 * y.max(1.0), "{x} vs {y}");
        }
        let pc_tab = check_pc_identity(&pair, &g).unwrap().max_error;
        let pc_rl = check_pc_identity(&rl(a), &g).unwrap().max_error;
        assert!((pc_tab - pc_rl).abs() < 1e-7, "{pc_tab} vs {pc_rl}");
        assert!((pair.l_norm_l1(1.0) - rl(a).l_integral(1.0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn resolvent_classical_matches_exponential() {
        let g = TimeGrid::new(1.0, 1024).unwrap();
        let k = resolvent_kernel(&KernelPair::classical(), 0.5, &g).unwrap();
        assert_eq!(k[0], 2.0);
        let err = g
            .nodes()
            .zip(&k)
            .map(|(t, v)| (v - 2.0 * (-2.0 * t).exp()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-2, "{err}");
    }

    #[test]
    fn resolvent_approaches_kernel_as_lambda_shrinks() {
        let g = TimeGrid::new(1.0, 1024).unwrap();
        let p = rl(0.5);
        let kw = cell_weights(&p, &g, Member::K);
        let dist = |lam: f64| {
            let kl = resolvent_kernel(&p, lam, &g).unwrap();
            g.tau() * (1..=g.steps()).map(|n| (kl[n] - kw.values[n - 1]).abs()).sum::<f64>()
        };
        assert!(dist(0.1) < dist(1.0));
        assert!(dist(0.01) < dist(0.1));
    }

    #[test]
    fn resolvent_rejects_nonpositive_lambda() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert!(resolvent_kernel(&rl(0.5), 0.0, &g).is_err());
        assert!(resolvent_kernel(&rl(0.5), -1.0, &g).is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let p = rl(0.25);
        let json = serde_json::to_string(&p.spec().unwrap()).unwrap();
        assert_eq!(json, r#"{"kind":"riemann_liouville","alpha":0.25}"#);
        let back: KernelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(KernelPair::from_spec(back).unwrap().alpha(), Some(0.25));
        let c: KernelSpec = serde_json::from_str(r#"{"kind":"classical"}"#).unwrap();
        assert_eq!(c, KernelSpec::Classical);
    }

    #[test]
    fn weights_csv_header() {
        let g = TimeGrid::new(1.0, 2).unwrap();
        let mut buf = Vec::new();
        cell_weights(&KernelPair::classical(), &g, Member::L)
            .write_csv(&mut buf)
            .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "m,kappa\n0,1\n1,1\n");
    }
}

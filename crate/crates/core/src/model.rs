//! Right-hand sides of the classical, Hebbian and generalized-coupling
//! oscillator systems, the Lyapunov energy they descend, and scalar
//! diagnostics.
//!
//! The Hebbian system on a graph with damping `alpha` and plasticity rate
//! `mu` is
//!
//! ```text
//! dθ_i/dt   = ω_i + Σ_{j ∈ N(i)} γ_ij sin(θ_j − θ_i)
//! dγ_ij/dt  = μ cos(θ_i − θ_j) − α γ_ij
//! ```
//!
//! and is the weighted gradient flow `θ' = −∂H/∂θ`, `γ' = −μ ∂H/∂γ` of
//!
//! ```text
//! H = −Σ θ_i ω_i − Σ_edges γ_ij cos(θ_i − θ_j) + (α / 2μ) Σ_edges γ_ij².
//! ```
//!
//! With a general even periodic potential `F` (force `f = F'`) the cosine
//! term becomes `+Σ γ_ij F(θ_i − θ_j)`; `F = −cos` recovers the sine model.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::graph::Graph;

/// Full dynamical state: unwrapped phases and per-edge couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct HebbState {
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl HebbState {
    pub fn new(theta: Vec<f64>, gamma: Vec<f64>) -> Self {
        Self { theta, gamma }
    }

    /// Every phase set to `theta0`, every coupling to `gamma0`.
    pub fn uniform(g: &Graph, theta0: f64, gamma0: f64) -> Self {
        Self {
            theta: vec![theta0; g.n_vertices()],
            gamma: vec![gamma0; g.n_edges()],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            theta: vec![0.0; self.theta.len()],
            gamma: vec![0.0; self.gamma.len()],
        }
    }

    pub fn check_shape(&self, g: &Graph) -> Result<()> {
        if self.theta.len() != g.n_vertices() || self.gamma.len() != g.n_edges() {
            return Err(invalid(format!(
                "state has {} phases / {} couplings, graph has {} vertices / {} edges",
                self.theta.len(),
                self.gamma.len(),
                g.n_vertices(),
                g.n_edges()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    /// Phases followed by couplings.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.theta.iter().chain(&self.gamma).copied()
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `self + scale * other`, written into `out`.
    pub(crate) fn axpy_into(&self, scale: f64, other: &Self, out: &mut Self) {
        for ((o, a), b) in out.theta.iter_mut().zip(&self.theta).zip(&other.theta) {
            *o = a + scale * b;
        }
        for ((o, a), b) in out.gamma.iter_mut().zip(&self.gamma).zip(&other.gamma) {
            *o = a + scale * b;
        }
    }

    /// Largest componentwise difference.
    pub fn distance_inf(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other.iter())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A general interaction given by its potential `F`, force `f = F'` and
/// force derivative `f'`.
#[derive(Clone)]
pub struct GeneralCoupling {
    name: String,
    potential: ScalarFn,
    force: ScalarFn,
    force_derivative: ScalarFn,
}

impl GeneralCoupling {
    const CHECK_POINTS: usize = 32;
    const CHECK_STEP: f64 = 1e-4;
    const CHECK_TOL: f64 = 1e-6;

    /// Wraps the triple after checking `f ≈ F'` and `f' ≈ d f/dx` by central
    /// differences on a 32-point grid over one period.
    pub fn new(
        name: impl Into<String>,
        potential: impl Fn(f64) -> f64 + Send + Sync + 'static,
        force: impl Fn(f64) -> f64 + Send + Sync + 'static,
        force_derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let c = Self {
            name: name.into(),
            potential: Arc::new(potential),
            force: Arc::new(force),
            force_derivative: Arc::new(force_derivative),
        };
        let h = Self::CHECK_STEP;
        for k in 0..Self::CHECK_POINTS {
            let x = std::f64::consts::TAU * k as f64 / Self::CHECK_POINTS as f64;
            let df = (c.potential(x + h) - c.potential(x - h)) / (2.0 * h);
            let ddf = (c.force(x + h) - c.force(x - h)) / (2.0 * h);
            if (df - c.force(x)).abs() > Self::CHECK_TOL {
                return Err(invalid(format!(
                    "coupling {:?}: f({x}) = {} but F'({x}) ≈ {df}",
                    c.name,
                    c.force(x)
                )));
            }
            if (ddf - c.force_derivative(x)).abs() > Self::CHECK_TOL {
                return Err(invalid(format!(
                    "coupling {:?}: f'({x}) = {} but finite difference gives {ddf}",
                    c.name,
                    c.force_derivative(x)
                )));
            }
        }
        Ok(c)
    }

    /// `F = −cos`, the sine model written in general form.
    pub fn negative_cosine() -> Self {
        Self::new("negative-cosine", |x: f64| -x.cos(), f64::sin, f64::cos)
            .expect("analytic derivatives")
    }

    /// `F(x) = −cos(2x)/2`, force `sin(2x)`.
    pub fn second_harmonic() -> Self {
        Self::new(
            "second-harmonic",
            |x: f64| -(2.0 * x).cos() / 2.0,
            |x: f64| (2.0 * x).sin(),
            |x: f64| 2.0 * (2.0 * x).cos(),
        )
        .expect("analytic derivatives")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn potential(&self, x: f64) -> f64 {
        (self.potential)(x)
    }

    pub fn force(&self, x: f64) -> f64 {
        (self.force)(x)
    }

    pub fn force_derivative(&self, x: f64) -> f64 {
        (self.force_derivative)(x)
    }
}

impl fmt::Debug for GeneralCoupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralCoupling")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Default)]
pub enum CouplingKind {
    #[default]
    Sine,
    Generalized(GeneralCoupling),
}

/// Natural frequencies (shifted to the co-rotating frame), damping,
/// plasticity rate and interaction.
#[derive(Debug, Clone)]
pub struct SystemParams {
    omega: Vec<f64>,
    omega_mean: f64,
    alpha: f64,
    mu: f64,
    coupling: CouplingKind,
}

impl SystemParams {
    /// Sine coupling with `mu = 1`. `omega` is shifted to mean zero; the
    /// removed mean is kept in [`SystemParams::omega_mean`].
    pub fn new(omega: Vec<f64>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        if omega.is_empty() || omega.iter().any(|w| !w.is_finite()) {
            return Err(invalid("omega must be non-empty and finite"));
        }
        let mean = omega.iter().sum::<f64>() / omega.len() as f64;
        let omega = omega.into_iter().map(|w| w - mean).collect();
        Ok(Self {
            omega,
            omega_mean: mean,
            alpha,
            mu: 1.0,
            coupling: CouplingKind::Sine,
        })
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid(format!("mu must be positive, got {mu}")));
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn with_coupling(mut self, coupling: CouplingKind) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn omega_mean(&self) -> f64 {
        self.omega_mean
    }

    /// Frequencies in the original (non-rotating) frame.
    pub fn original_omega(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w + self.omega_mean).collect()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn coupling(&self) -> &CouplingKind {
        &self.coupling
    }

    fn check(&self, g: &Graph, s: &HebbState) -> Result<()> {
        if self.omega.len() != g.n_vertices() {
            return Err(invalid(format!(
                "omega has {} entries, graph has {} vertices",
                self.omega.len(),
                g.n_vertices()
            )));
        }
        s.check_shape(g)
    }
}

/// Hebbian sine-coupled vector field.
pub fn hebbian_vector_field(g: &Graph, p: &SystemParams, s: &HebbState) -> Result<HebbState> {
    if matches!(p.coupling, CouplingKind::Generalized(_)) {
        return Err(invalid(
            "hebbian_vector_field needs sine coupling; use generalized_vector_field",
        ));
    }
    p.check(g, s)?;
    let mut out = s.zeros_like();
    vector_field_into(g, p, s, &mut out);
    Ok(out)
}

/// General-interaction vector field: `dθ_i = ω_i − Σ γ_ij f(θ_i − θ_j)`,
/// `dγ_ij = −μ F(θ_i − θ_j) − α γ_ij`.
pub fn generalized_vector_field(g: &Graph, p: &SystemParams, s: &HebbState) -> Result<HebbState> {
    if !matches!(p.coupling, CouplingKind::Generalized(_)) {
        return Err(invalid(
            "generalized_vector_field needs a generalized coupling; use hebbian_vector_field",
        ));
    }
    p.check(g, s)?;
    let mut out = s.zeros_like();
    vector_field_into(g, p, s, &mut out);
    Ok(out)
}

/// Vector field for whichever coupling `p` carries.
pub fn vector_field(g: &Graph, p: &SystemParams, s: &HebbState) -> Result<HebbState> {
    p.check(g, s)?;
    let mut out = s.zeros_like();
    vector_field_into(g, p, s, &mut out);
    Ok(out)
}

/// Allocation-free core used by the integrators. Shapes are not checked.
pub(crate) fn vector_field_into(g: &Graph, p: &SystemParams, s: &HebbState, out: &mut HebbState) {
    out.theta.copy_from_slice(&p.omega);
    let (alpha, mu) = (p.alpha, p.mu);
    match &p.coupling {
        CouplingKind::Sine => {
            for (k, &(i, j)) in g.edges().iter().enumerate() {
                let (sin, cos) = (s.theta[j] - s.theta[i]).sin_cos();
                let gk = s.gamma[k];
                out.theta[i] += gk * sin;
                out.theta[j] -= gk * sin;
                out.gamma[k] = mu * cos - alpha * gk;
            }
        }
        CouplingKind::Generalized(c) => {
            for (k, &(i, j)) in g.edges().iter().enumerate() {
                let delta = s.theta[i] - s.theta[j];
                let force = c.force(delta);
                let gk = s.gamma[k];
                out.theta[i] -= gk * force;
                out.theta[j] += gk * force;
                out.gamma[k] = -mu * c.potential(delta) - alpha * gk;
            }
        }
    }
}

/// Classical Kuramoto field with uniform coupling `k` on every edge.
pub fn classical_vector_field(g: &Graph, omega: &[f64], k: f64, theta: &[f64]) -> Result<Vec<f64>> {
    if omega.len() != g.n_vertices() || theta.len() != g.n_vertices() {
        return Err(invalid("omega and theta must have one entry per vertex"));
    }
    if !(k > 0.0) {
        return Err(invalid(format!("coupling must be positive, got {k}")));
    }
    let mut out = omega.to_vec();
    for &(i, j) in g.edges() {
        let s = k * (theta[j] - theta[i]).sin();
        out[i] += s;
        out[j] -= s;
    }
    Ok(out)
}

pub fn lyapunov_energy(g: &Graph, p: &SystemParams, s: &HebbState) -> Result<f64> {
    p.check(g, s)?;
    Ok(energy_unchecked(g, p, s))
}

pub(crate) fn energy_unchecked(g: &Graph, p: &SystemParams, s: &HebbState) -> f64 {
    let drift: f64 = s.theta.iter().zip(&p.omega).map(|(t, w)| t * w).sum();
    let interaction: f64 = g
        .edges()
        .iter()
        .zip(&s.gamma)
        .map(|(&(i, j), gk)| {
            let delta = s.theta[i] - s.theta[j];
            match &p.coupling {
                CouplingKind::Sine => -gk * delta.cos(),
                CouplingKind::Generalized(c) => gk * c.potential(delta),
            }
        })
        .sum();
    let damping = p.alpha / (2.0 * p.mu) * s.gamma.iter().map(|x| x * x).sum::<f64>();
    -drift + interaction + damping
}

/// Largest pairwise difference of the raw (unwrapped) phases.
pub fn phase_diameter(theta: &[f64]) -> Result<f64> {
    if theta.is_empty() {
        return Err(invalid("phase_diameter of an empty vector"));
    }
    let (lo, hi) = theta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| {
            (lo.min(t), hi.max(t))
        });
    Ok(hi - lo)
}

/// ℓ∞ norm of the full vector field (phases and couplings).
pub fn residual_norm(g: &Graph, p: &SystemParams, s: &HebbState) -> Result<f64> {
    Ok(vector_field(g, p, s)?.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::complete_graph;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn edge() -> Graph {
        Graph::new(2, [(0, 1)]).unwrap()
    }

    #[test]
    fn params_shift_to_mean_zero() {
        let p = SystemParams::new(vec![1.0, 2.0, 6.0], 0.3).unwrap();
        assert_eq!(p.omega_mean(), 3.0);
        assert_eq!(p.omega(), &[-2.0, -1.0, 3.0]);
        assert_eq!(p.original_omega(), vec![1.0, 2.0, 6.0]);
        assert!(SystemParams::new(vec![0.0], 0.0).is_err());
        assert!(SystemParams::new(vec![0.0], -1.0).is_err());
        assert!(SystemParams::new(vec![f64::NAN], 1.0).is_err());
        assert!(p.with_mu(0.0).is_err());
    }

    #[test]
    fn hebbian_field_at_synchrony() {
        let g = complete_graph(3).unwrap();
        let p = SystemParams::new(vec![1.2247, 1.2247, -2.4495], 0.3).unwrap();
        let s = HebbState::uniform(&g, 0.0, 1.0);
        let d = hebbian_vector_field(&g, &p, &s).unwrap();
        assert_eq!(d.theta, p.omega());
        for dg in d.gamma {
            assert!((dg - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn gamma_at_cos_over_alpha_is_stationary() {
        let g = complete_graph(4).unwrap();
        let p = SystemParams::new(vec![0.0; 4], 0.7).unwrap();
        let theta: Vec<f64> = vec![0.1, -1.3, 2.0, 0.4];
        let gamma = g
            .edges()
            .iter()
            .map(|&(i, j)| (theta[i] - theta[j]).cos() / 0.7)
            .collect();
        let d = hebbian_vector_field(&g, &p, &HebbState::new(theta, gamma)).unwrap();
        assert!(d.gamma.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn hebbian_field_single_edge() {
        let p = SystemParams::new(vec![0.0, 0.0], 0.4).unwrap();
        let s = HebbState::new(vec![0.0, FRAC_PI_2], vec![1.5]);
        let d = hebbian_vector_field(&edge(), &p, &s).unwrap();
        assert!((d.theta[0] - 1.5).abs() < 1e-15 && (d.theta[1] + 1.5).abs() < 1e-15);
        assert!((d.gamma[0] + 0.4 * 1.5).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let g = complete_graph(3).unwrap();
        let p = SystemParams::new(vec![0.0; 3], 1.0).unwrap();
        let s = HebbState::new(vec![0.0; 3], vec![0.0; 2]);
        assert!(hebbian_vector_field(&g, &p, &s).is_err());
        assert!(lyapunov_energy(&g, &p, &s).is_err());
        let p2 = SystemParams::new(vec![0.0; 2], 1.0).unwrap();
        assert!(hebbian_vector_field(&g, &p2, &HebbState::uniform(&g, 0.0, 0.0)).is_err());
    }

    #[test]
    fn classical_field_examples() {
        let g = complete_graph(3).unwrap();
        let z = classical_vector_field(&g, &[0.0; 3], 1.7, &[0.4; 3]).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));

        let splay = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0];
        let z = classical_vector_field(&g, &[0.0; 3], 2.3, &splay).unwrap();
        assert!(z.iter().all(|x| x.abs() < 1e-14));

        let d = classical_vector_field(&edge(), &[0.0; 2], 2.0, &[0.0, FRAC_PI_2]).unwrap();
        assert!((d[0] - 2.0).abs() < 1e-15 && (d[1] + 2.0).abs() < 1e-15);

        assert!(classical_vector_field(&g, &[0.0; 2], 1.0, &splay).is_err());
    }

    #[test]
    fn generalized_second_harmonic_single_edge() {
        let p = SystemParams::new(vec![0.0, 0.0], 0.25)
            .unwrap()
            .with_coupling(CouplingKind::Generalized(GeneralCoupling::second_harmonic()));
        let s = HebbState::new(vec![0.0, FRAC_PI_4], vec![1.0]);
        let d = generalized_vector_field(&edge(), &p, &s).unwrap();
        // Attractive: vertex 0 is pulled toward vertex 1.
        assert!((d.theta[0] - 1.0).abs() < 1e-15 && (d.theta[1] + 1.0).abs() < 1e-15);
        assert!((d.gamma[0] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn generalized_gamma_fixed_point() {
        let g = complete_graph(3).unwrap();
        let c = GeneralCoupling::second_harmonic();
        let (alpha, mu) = (0.6, 1.7);
        let theta: Vec<f64> = vec![0.2, -0.9, 1.4];
        let gamma = g
            .edges()
            .iter()
            .map(|&(i, j)| -(mu / alpha) * c.potential(theta[i] - theta[j]))
            .collect();
        let p = SystemParams::new(vec![0.0; 3], alpha)
            .unwrap()
            .with_mu(mu)
            .unwrap()
            .with_coupling(CouplingKind::Generalized(c));
        let d = generalized_vector_field(&g, &p, &HebbState::new(theta, gamma)).unwrap();
        assert!(d.gamma.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn coupling_kind_mismatch() {
        let g = edge();
        let sine = SystemParams::new(vec![0.0; 2], 1.0).unwrap();
        let gen = sine
            .clone()
            .with_coupling(CouplingKind::Generalized(GeneralCoupling::negative_cosine()));
        let s = HebbState::uniform(&g, 0.0, 1.0);
        assert!(generalized_vector_field(&g, &sine, &s).is_err());
        assert!(hebbian_vector_field(&g, &gen, &s).is_err());
    }

    #[test]
    fn inconsistent_coupling_triple_is_rejected() {
        let bad = GeneralCoupling::new("bad", |x: f64| -x.cos(), |x: f64| 2.0 * x.sin(), f64::cos);
        assert!(bad.is_err());
        let bad = GeneralCoupling::new("bad", |x: f64| -x.cos(), f64::sin, |x: f64| -x.cos());
        assert!(bad.is_err());
    }

    #[test]
    fn energy_examples() {
        let g = complete_graph(3).unwrap();
        let p = SystemParams::new(vec![0.3, -1.0, 0.7], 0.3).unwrap();
        let s = HebbState::uniform(&g, 0.0, 1.0 / 0.3);
        assert!((lyapunov_energy(&g, &p, &s).unwrap() + 5.0).abs() < 1e-12);
        let s = HebbState::uniform(&g, 0.0, 0.0);
        assert_eq!(lyapunov_energy(&g, &p, &s).unwrap(), 0.0);
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(phase_diameter(&[0.3, 0.3, 0.3]).unwrap(), 0.0);
        assert!((phase_diameter(&[0.0, FRAC_PI_2, PI]).unwrap() - PI).abs() < 1e-15);
        assert_eq!(phase_diameter(&[-1.0, 2.0]).unwrap(), 3.0);
        assert!(phase_diameter(&[]).is_err());
    }

    #[test]
    fn residual_examples() {
        let g = complete_graph(3).unwrap();
        let p = SystemParams::new(vec![0.0; 3], 0.3).unwrap();
        let r = residual_norm(&g, &p, &HebbState::uniform(&g, 0.0, 1.0)).unwrap();
        assert!((r - 0.7).abs() < 1e-15);
        let r = residual_norm(&g, &p, &HebbState::uniform(&g, 0.0, 1.0 / 0.3)).unwrap();
        assert!(r < 1e-15);
    }
}

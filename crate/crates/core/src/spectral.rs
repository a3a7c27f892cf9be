//! Linear stability of Hebbian fixed points.
//!
//! At a fixed point `(θ, γ)` with `μ = 1` the Jacobian of the Hebbian flow is
//! symmetric with block form
//!
//! ```text
//!     J = | A   B  |      A: N×N  θθ block, a weighted Laplacian
//!         | Bᵀ  C  |      B: N×E  weighted incidence, weights sin(θ_i − θ_j)
//!                         C: E×E  equal to −α·I
//! ```
//!
//! Because `C` is negative definite, inertia additivity over the Schur
//! complement gives `n₊(J) = n₊(S)`, `n₀(J) = n₀(S)` and `n₋(J) = n₋(S) + E`
//! with `S = A − B C⁻¹ Bᵀ = A + BBᵀ/α`. At a fixed point `S` has off-diagonal
//! entries `cos(2(θ_i − θ_j))/α`: twice the classical Kuramoto Jacobian at the
//! doubled angles with uniform coupling `1/(2α)`.
//!
//! For `μ ≠ 1` the linearization is `diag(1, μ)·J'` with `J'` symmetric and
//! congruent in inertia to the `μ = 1` case, so the classification carries
//! over to every `μ > 0`.

use std::ops::Add;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::equilibria;
use crate::error::{invalid, Error, Result};
use crate::graph::{incidence_matrix, Graph};
use crate::model::CouplingKind;

/// Default relative zero threshold for eigenvalue sign counting.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockJacobian {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl BlockJacobian {
    /// The full `(N+E)×(N+E)` matrix `[[A, B], [Bᵀ, C]]`.
    pub fn full(&self) -> DMatrix<f64> {
        let (n, e) = (self.a.nrows(), self.c.nrows());
        let mut m = DMatrix::zeros(n + e, n + e);
        m.view_mut((0, 0), (n, n)).copy_from(&self.a);
        m.view_mut((0, n), (n, e)).copy_from(&self.b);
        m.view_mut((n, 0), (e, n)).copy_from(&self.b.transpose());
        m.view_mut((n, n), (e, e)).copy_from(&self.c);
        m
    }

    /// `A − B C⁻¹ Bᵀ` computed numerically from the blocks.
    pub fn schur_complement(&self) -> Result<DMatrix<f64>> {
        let c_inv = self
            .c
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::PreconditionViolation("C block is singular".into()))?;
        Ok(&self.a - &self.b * c_inv * self.b.transpose())
    }
}

/// Jacobian of the `μ = 1` Hebbian flow at an arbitrary state `(θ, γ)`.
pub fn assemble_jacobian(
    g: &Graph,
    alpha: f64,
    theta: &[f64],
    gamma: &[f64],
) -> Result<BlockJacobian> {
    check_alpha(alpha)?;
    check_theta(g, theta)?;
    if gamma.len() != g.n_edges() {
        return Err(invalid("gamma must have one entry per edge"));
    }
    let n = g.n_vertices();
    let mut a = DMatrix::zeros(n, n);
    for (&(i, j), &gk) in g.edges().iter().zip(gamma) {
        let w = gk * (theta[i] - theta[j]).cos();
        a[(i, j)] = w;
        a[(j, i)] = w;
        a[(i, i)] -= w;
        a[(j, j)] -= w;
    }
    let sines: Vec<f64> = g
        .edges()
        .iter()
        .map(|&(i, j)| (theta[i] - theta[j]).sin())
        .collect();
    let b = incidence_matrix(g, &sines)?;
    let c = DMatrix::from_diagonal_element(g.n_edges(), g.n_edges(), -alpha);
    Ok(BlockJacobian { a, b, c })
}

/// Analytic Schur complement at a fixed point: off-diagonal
/// `cos(2(θ_i − θ_j))/α` on edges, diagonal the negated row sum.
pub fn schur_reduced(g: &Graph, alpha: f64, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_alpha(alpha)?;
    check_theta(g, theta)?;
    let weights: Vec<f64> = g
        .edges()
        .iter()
        .map(|&(i, j)| (2.0 * (theta[i] - theta[j])).cos() / alpha)
        .collect();
    Ok(negative_laplacian(g, &weights))
}

/// Reduced matrix for a general interaction: off-diagonal
/// `−(f(Δ)² + F(Δ) f'(Δ))/α` with `Δ = θ_i − θ_j`.
pub fn generalized_reduced_jacobian(
    g: &Graph,
    alpha: f64,
    theta: &[f64],
    coupling: &CouplingKind,
) -> Result<DMatrix<f64>> {
    let CouplingKind::Generalized(c) = coupling else {
        return Err(invalid("sine coupling: use schur_reduced"));
    };
    check_alpha(alpha)?;
    check_theta(g, theta)?;
    let weights: Vec<f64> = g
        .edges()
        .iter()
        .map(|&(i, j)| {
            let d = theta[i] - theta[j];
            let f = c.force(d);
            -(f * f + c.potential(d) * c.force_derivative(d)) / alpha
        })
        .collect();
    Ok(negative_laplacian(g, &weights))
}

/// Jacobian of the classical Kuramoto field with uniform coupling `k`.
pub fn classical_jacobian(g: &Graph, k: f64, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_theta(g, theta)?;
    let weights: Vec<f64> = g
        .edges()
        .iter()
        .map(|&(i, j)| k * (theta[j] - theta[i]).cos())
        .collect();
    Ok(negative_laplacian(g, &weights))
}

/// `W − D`: symmetric, off-diagonal `w` on edges, zero row sums.
fn negative_laplacian(g: &Graph, weights: &[f64]) -> DMatrix<f64> {
    let n = g.n_vertices();
    let mut m = DMatrix::zeros(n, n);
    for (&(i, j), &w) in g.edges().iter().zip(weights) {
        m[(i, j)] = w;
        m[(j, i)] = w;
    }
    for i in 0..n {
        let off: f64 = g.neighbors(i).iter().map(|&(j, _)| m[(i, j)]).sum();
        m[(i, i)] = -off;
    }
    m
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

fn check_theta(g: &Graph, theta: &[f64]) -> Result<()> {
    if theta.len() != g.n_vertices() {
        return Err(invalid(format!(
            "theta has {} entries, graph has {} vertices",
            theta.len(),
            g.n_vertices()
        )));
    }
    Ok(())
}

/// Counts of positive, zero and negative eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inertia {
    pub n_plus: usize,
    pub n_zero: usize,
    pub n_minus: usize,
    pub zero_tol: f64,
}

impl Inertia {
    pub fn dim(&self) -> usize {
        self.n_plus + self.n_zero + self.n_minus
    }

    /// `(n₊, n₀, n₋)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.n_plus, self.n_zero, self.n_minus)
    }

    fn from_eigenvalues(eigenvalues: &[f64], zero_tol: f64) -> Self {
        let scale = eigenvalues.iter().fold(1.0f64, |m, l| m.max(l.abs()));
        let cut = zero_tol * scale;
        let mut inertia = Inertia {
            n_plus: 0,
            n_zero: 0,
            n_minus: 0,
            zero_tol,
        };
        for &l in eigenvalues {
            if l.abs() <= cut {
                inertia.n_zero += 1;
            } else if l > 0.0 {
                inertia.n_plus += 1;
            } else {
                inertia.n_minus += 1;
            }
        }
        inertia
    }
}

impl Add for Inertia {
    type Output = Inertia;

    fn add(self, rhs: Inertia) -> Inertia {
        Inertia {
            n_plus: self.n_plus + rhs.n_plus,
            n_zero: self.n_zero + rhs.n_zero,
            n_minus: self.n_minus + rhs.n_minus,
            zero_tol: self.zero_tol.max(rhs.zero_tol),
        }
    }
}

/// Eigenvalues of the symmetrized matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(invalid(format!(
            "matrix is {}×{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * scale {
        return Err(invalid(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Inertia from a full symmetric eigendecomposition. An eigenvalue counts as
/// zero when `|λ| ≤ zero_tol · max(1, max |λ|)`.
pub fn inertia_direct(m: &DMatrix<f64>, zero_tol: f64) -> Result<Inertia> {
    if !(zero_tol > 0.0) {
        return Err(invalid("zero_tol must be positive"));
    }
    Ok(Inertia::from_eigenvalues(
        &symmetric_eigenvalues(m)?,
        zero_tol,
    ))
}

/// Inertia of `[[A, B], [Bᵀ, C]]` as `inertia(C) + inertia(A − B C⁻¹ Bᵀ)`.
pub fn inertia_haynsworth(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    zero_tol: f64,
) -> Result<Inertia> {
    if b.nrows() != a.nrows() || b.ncols() != c.nrows() {
        return Err(invalid(format!(
            "block shapes do not conform: A {}×{}, B {}×{}, C {}×{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let c_eigs = symmetric_eigenvalues(c)?;
    let c_scale = c_eigs.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    let c_min = c_eigs.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
    if c.nrows() > 0 && c_min <= zero_tol * c_scale {
        return Err(Error::PreconditionViolation(format!(
            "C is numerically singular (min |λ| = {c_min:e})"
        )));
    }
    let blocks = BlockJacobian {
        a: a.clone(),
        b: b.clone(),
        c: c.clone(),
    };
    let schur = blocks.schur_complement()?;
    let schur = (&schur + schur.transpose()) * 0.5;
    Ok(Inertia::from_eigenvalues(&c_eigs, zero_tol) + inertia_direct(&schur, zero_tol)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    /// No unstable direction and only the rotational zero mode.
    Stable,
    /// No unstable direction but extra zero modes.
    Degenerate,
    /// `dim` is the dimension of the unstable manifold.
    Unstable { dim: usize },
}

impl Stability {
    pub fn label(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Degenerate => "degenerate",
            Stability::Unstable { .. } => "unstable",
        }
    }

    fn from_reduced(inertia: &Inertia) -> Self {
        if inertia.n_plus > 0 {
            Stability::Unstable {
                dim: inertia.n_plus,
            }
        } else if inertia.n_zero > 1 {
            Stability::Degenerate
        } else {
            Stability::Stable
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub reduced: Inertia,
    pub full: Inertia,
    /// Classical Kuramoto Jacobian at `2θ` with coupling `1/(2α)`.
    pub classical: Inertia,
    pub classification: Stability,
}

impl StabilityReport {
    /// The doubled-angle classical problem has the same unstable dimension
    /// and zero count, and the full problem carries `E` extra negative modes.
    pub fn matches_classical(&self, n_edges: usize) -> bool {
        self.full.n_plus == self.classical.n_plus
            && self.full.n_zero == self.classical.n_zero
            && self.full.n_minus == self.classical.n_minus + n_edges
    }
}

/// Reduced residual allowed at a point handed to [`classify_stability`].
pub const FIXED_POINT_TOL: f64 = 1e-8;

/// Classifies the Hebbian fixed point with phases `theta` for frequencies
/// `omega` (couplings implied as `cos(θ_i − θ_j)/α`).
pub fn classify_stability(
    g: &Graph,
    alpha: f64,
    theta: &[f64],
    omega: &[f64],
) -> Result<StabilityReport> {
    classify_stability_with_tol(g, alpha, theta, omega, DEFAULT_ZERO_TOL)
}

pub fn classify_stability_with_tol(
    g: &Graph,
    alpha: f64,
    theta: &[f64],
    omega: &[f64],
    zero_tol: f64,
) -> Result<StabilityReport> {
    let residual = equilibria::reduced_residual(theta, omega, alpha, g)?;
    let worst = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if !(worst < FIXED_POINT_TOL) {
        return Err(invalid(format!(
            "theta is not a fixed point for omega (reduced residual {worst:e})"
        )));
    }

    let reduced_m = schur_reduced(g, alpha, theta)?;
    let reduced_eigs = symmetric_eigenvalues(&reduced_m)?;
    let reduced = Inertia::from_eigenvalues(&reduced_eigs, zero_tol);

    let gamma = equilibria::gamma_at_fixed_point(theta, alpha, g)?;
    let full_m = assemble_jacobian(g, alpha, theta, &gamma)?.full();
    let full_eigs = symmetric_eigenvalues(&full_m)?;
    let full = Inertia::from_eigenvalues(&full_eigs, zero_tol);

    let doubled: Vec<f64> = theta.iter().map(|t| 2.0 * t).collect();
    let classical = inertia_direct(
        &classical_jacobian(g, 1.0 / (2.0 * alpha), &doubled)?,
        zero_tol,
    )?;

    let e = g.n_edges();
    if full.n_plus != reduced.n_plus || full.n_minus != reduced.n_minus + e {
        // Only tolerated when some eigenvalue sits close to the zero cut.
        let near_cut = |eigs: &[f64]| {
            let scale = eigs.iter().fold(1.0f64, |m, l| m.max(l.abs()));
            eigs.iter()
                .any(|l| l.abs() > zero_tol * scale && l.abs() <= 1e3 * zero_tol * scale)
        };
        if !near_cut(&reduced_eigs) && !near_cut(&full_eigs) {
            return Err(Error::InternalConsistency(format!(
                "inertia additivity violated: reduced {:?}, full {:?}, E = {e}",
                reduced.counts(),
                full.counts()
            )));
        }
    }

    Ok(StabilityReport {
        classification: Stability::from_reduced(&reduced),
        reduced,
        full,
        classical,
    })
}

/// [`classify_stability`] for a solved fixed point.
pub fn classify_fixed_point(g: &Graph, fp: &equilibria::FixedPoint) -> Result<StabilityReport> {
    classify_stability(g, fp.alpha, &fp.theta, &fp.omega)
}

/// Outcome of the equivalence check at one random fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremCase {
    pub theta: Vec<f64>,
    pub report: StabilityReport,
    pub passed: bool,
}

/// Classifies `count` random fixed points of `g` (random phases, induced
/// frequencies) and compares each with the classical problem at doubled
/// angles.
pub fn theorem_battery(g: &Graph, alpha: f64, count: usize, seed: u64) -> Result<Vec<TheoremCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let fp = equilibria::random_fixed_point(g, alpha, &mut rng)?;
            let report = classify_fixed_point(g, &fp)?;
            Ok(TheoremCase {
                passed: report.matches_classical(g.n_edges()),
                theta: fp.theta,
                report,
            })
        })
        .collect()
}

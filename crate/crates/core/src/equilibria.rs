//! Phase-locked fixed points.
//!
//! Eliminating the couplings (`α γ_ij = cos(θ_i − θ_j)`) leaves the
//! double-angle equation
//!
//! ```text
//! 0 = ω_i + (1/2α) Σ_{j ∈ N(i)} sin(2(θ_j − θ_i)),
//! ```
//!
//! which is the classical Kuramoto fixed-point equation at angles `2θ` with
//! uniform coupling `1/(2α)`. Solutions are found by Newton's method on the
//! mean-zero subspace, and the classical and Hebbian solutions map onto each
//! other by halving or doubling the phases.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::model::{self, HebbState, SystemParams};
use crate::spectral::{self, Inertia, Stability};

/// ℓ∞ residual at which Newton stops.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
/// Residual tolerance for accepting a classical fixed point in
/// [`lift_to_hebbian`].
pub const CLASSICAL_RESIDUAL_TOL: f64 = 1e-10;
/// Phase distance above which two multi-start solutions count as distinct.
pub const BRANCH_DISTINCT_TOL: f64 = 1e-6;
pub const DEFAULT_MULTI_STARTS: usize = 32;

/// A Hebbian fixed point in the mean-zero gauge.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub omega: Vec<f64>,
    pub alpha: f64,
    /// Final ℓ∞ residual of the reduced equation.
    pub residual: f64,
    pub iterations: usize,
}

impl FixedPoint {
    pub fn state(&self) -> HebbState {
        HebbState::new(self.theta.clone(), self.gamma.clone())
    }

    /// Phases of the corresponding classical fixed point (coupling `1/(2α)`).
    pub fn classical_theta(&self) -> Vec<f64> {
        self.theta.iter().map(|t| 2.0 * t).collect()
    }
}

/// Coordinates in the mean-zero frequency plane of three oscillators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanePoint {
    pub a: f64,
    pub b: f64,
}

impl PlanePoint {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    /// Point at distance `radius` along the direction at `angle` radians.
    pub fn polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn norm(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

/// `ω = a (1, −1, 0)/√2 + b (1, 1, −2)/√6`.
pub fn frequency_from_plane(p: PlanePoint) -> Vec<f64> {
    let x = p.a / 2f64.sqrt();
    let y = p.b / 6f64.sqrt();
    vec![x + y, y - x, -2.0 * y]
}

/// Orthogonal projection of a 3-vector onto the frequency plane.
pub fn plane_from_frequency(omega: &[f64]) -> Result<PlanePoint> {
    match omega {
        [w0, w1, w2] => Ok(PlanePoint::new(
            (w0 - w1) / 2f64.sqrt(),
            (w0 + w1 - 2.0 * w2) / 6f64.sqrt(),
        )),
        _ => Err(invalid("frequency plane needs exactly three oscillators")),
    }
}

/// Evenly spaced samples `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(invalid(format!("bad axis {lo}:{hi}:{n}")));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn value(&self, k: usize) -> f64 {
        if self.n == 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * k as f64 / (self.n - 1) as f64
        }
    }
}

/// Rectangular lattice in the frequency plane, row-major in `a` then `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneGrid {
    pub a: Axis,
    pub b: Axis,
}

impl PlaneGrid {
    pub fn new(a: Axis, b: Axis) -> Self {
        Self { a, b }
    }

    /// `[lo, hi]²` with `n` samples per side.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        let axis = Axis::new(lo, hi, n)?;
        Ok(Self::new(axis, axis))
    }

    pub fn len(&self) -> usize {
        self.a.n * self.b.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ia: usize, ib: usize) -> usize {
        ia * self.b.n + ib
    }

    pub fn point(&self, idx: usize) -> PlanePoint {
        PlanePoint::new(self.a.value(idx / self.b.n), self.b.value(idx % self.b.n))
    }

    pub fn points(&self) -> Vec<PlanePoint> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }
}

/// `r_i = ω_i + (1/2α) Σ_{j ∈ N(i)} sin(2(θ_j − θ_i))`.
pub fn reduced_residual(theta: &[f64], omega: &[f64], alpha: f64, g: &Graph) -> Result<Vec<f64>> {
    if theta.len() != g.n_vertices() || omega.len() != g.n_vertices() {
        return Err(invalid("theta and omega need one entry per vertex"));
    }
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let mut r = omega.to_vec();
    let k = 0.5 / alpha;
    for &(i, j) in g.edges() {
        let s = k * (2.0 * (theta[j] - theta[i])).sin();
        r[i] += s;
        r[j] -= s;
    }
    Ok(r)
}

/// `γ_k = cos(θ_i − θ_j)/α` in canonical edge order.
pub fn gamma_at_fixed_point(theta: &[f64], alpha: f64, g: &Graph) -> Result<Vec<f64>> {
    if theta.len() != g.n_vertices() {
        return Err(invalid("theta needs one entry per vertex"));
    }
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(g.edges()
        .iter()
        .map(|&(i, j)| (theta[i] - theta[j]).cos() / alpha)
        .collect())
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn center(theta: &mut [f64]) {
    let mean = theta.iter().sum::<f64>() / theta.len() as f64;
    theta.iter_mut().for_each(|t| *t -= mean);
}

struct NewtonOutcome {
    theta: Vec<f64>,
    residual: f64,
    iterations: usize,
}

/// Newton on a rotation-invariant residual whose Jacobian has the all-ones
/// kernel. The gauge direction is removed by solving `(J − 𝟙𝟙ᵀ/N) δ = −r`;
/// since `r ⊥ 𝟙` and `J 𝟙 = 0`, the step stays mean-zero.
fn gauge_newton(
    guess: &[f64],
    residual: impl Fn(&[f64]) -> Vec<f64>,
    jacobian: impl Fn(&[f64]) -> DMatrix<f64>,
) -> Result<NewtonOutcome> {
    let n = guess.len();
    let mut theta = guess.to_vec();
    center(&mut theta);
    let mut r = residual(&theta);
    let mut norm = inf_norm(&r);
    for iteration in 0..NEWTON_MAX_ITER {
        if norm < NEWTON_TOL {
            return Ok(NewtonOutcome {
                theta,
                residual: norm,
                iterations: iteration,
            });
        }
        let mut m = jacobian(&theta);
        m.add_scalar_mut(-1.0 / n as f64);
        let svd = m.clone().svd(false, false);
        let (smin, smax) = svd
            .singular_values
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| {
                (lo.min(s), hi.max(s))
            });
        if !(smin > 1e-13 * smax.max(1.0)) {
            return Err(Error::Degenerate { theta, iteration });
        }
        let rhs = -DVector::from_column_slice(&r);
        let step = m.lu().solve(&rhs).ok_or_else(|| Error::Degenerate {
            theta: theta.clone(),
            iteration,
        })?;

        // Backtracking on the ℓ∞ residual; the full step is taken if nothing
        // shorter improves it.
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let trial: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .map(|(t, d)| t + lambda * d)
                .collect();
            let tr = residual(&trial);
            let tn = inf_norm(&tr);
            if tn < norm {
                accepted = Some((trial, tr, tn));
                break;
            }
            lambda *= 0.5;
        }
        let (mut next, next_r, next_norm) = accepted.unwrap_or_else(|| {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t + d).collect();
            let tr = residual(&trial);
            let tn = inf_norm(&tr);
            (trial, tr, tn)
        });
        center(&mut next);
        if !next_norm.is_finite() {
            break;
        }
        theta = next;
        r = next_r;
        norm = next_norm;
    }
    if norm < NEWTON_TOL {
        return Ok(NewtonOutcome {
            theta,
            residual: norm,
            iterations: NEWTON_MAX_ITER,
        });
    }
    Err(Error::NoConvergence {
        theta,
        residual: norm,
        iterations: NEWTON_MAX_ITER,
    })
}

fn check_problem(omega: &[f64], alpha: f64, g: &Graph, guess: &[f64]) -> Result<()> {
    let n = g.n_vertices();
    if omega.len() != n || guess.len() != n {
        return Err(invalid("omega and initial guess need one entry per vertex"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !g.is_connected() {
        return Err(invalid("fixed-point solver needs a connected graph"));
    }
    let scale = inf_norm(omega).max(1.0);
    if omega.iter().sum::<f64>().abs() > 1e-12 * scale * n as f64 {
        return Err(invalid("omega must have zero mean"));
    }
    Ok(())
}

/// Hebbian fixed point for mean-zero `omega`, by gauge-fixed Newton on the
/// reduced equation.
pub fn solve_fixed_point(
    omega: &[f64],
    alpha: f64,
    g: &Graph,
    initial_guess: &[f64],
) -> Result<FixedPoint> {
    check_problem(omega, alpha, g, initial_guess)?;
    let out = gauge_newton(
        initial_guess,
        |t| reduced_residual(t, omega, alpha, g).expect("shapes checked"),
        |t| spectral::schur_reduced(g, alpha, t).expect("shapes checked"),
    )?;
    let gamma = gamma_at_fixed_point(&out.theta, alpha, g)?;
    Ok(FixedPoint {
        theta: out.theta,
        gamma,
        omega: omega.to_vec(),
        alpha,
        residual: out.residual,
        iterations: out.iterations,
    })
}

/// Classical Kuramoto fixed point with uniform coupling `k`, in the
/// mean-zero gauge. Returns the phases and final residual.
pub fn solve_classical_fixed_point(
    omega: &[f64],
    k: f64,
    g: &Graph,
    initial_guess: &[f64],
) -> Result<(Vec<f64>, f64)> {
    check_problem(omega, 1.0, g, initial_guess)?;
    if !(k > 0.0) {
        return Err(invalid(format!("coupling must be positive, got {k}")));
    }
    let out = gauge_newton(
        initial_guess,
        |t| model::classical_vector_field(g, omega, k, t).expect("shapes checked"),
        |t| spectral::classical_jacobian(g, k, t).expect("shapes checked"),
    )?;
    Ok((out.theta, out.residual))
}

/// Hebbian fixed point obtained by halving the phases of a classical fixed
/// point with coupling `1/(2α)`.
pub fn lift_to_hebbian(
    theta_classical: &[f64],
    omega: &[f64],
    alpha: f64,
    g: &Graph,
) -> Result<FixedPoint> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let classical = model::classical_vector_field(g, omega, 0.5 / alpha, theta_classical)?;
    let classical_residual = inf_norm(&classical);
    if !(classical_residual < CLASSICAL_RESIDUAL_TOL) {
        return Err(invalid(format!(
            "not a classical fixed point (residual {classical_residual:e})"
        )));
    }
    let mut theta: Vec<f64> = theta_classical.iter().map(|t| 0.5 * t).collect();
    center(&mut theta);
    let gamma = gamma_at_fixed_point(&theta, alpha, g)?;
    let residual = inf_norm(&reduced_residual(&theta, omega, alpha, g)?);
    Ok(FixedPoint {
        theta,
        gamma,
        omega: omega.to_vec(),
        alpha,
        residual,
        iterations: 0,
    })
}

/// The mean-zero frequencies for which `theta` is a fixed point.
pub fn induced_frequencies(theta: &[f64], alpha: f64, g: &Graph) -> Result<Vec<f64>> {
    let r = reduced_residual(theta, &vec![0.0; theta.len()], alpha, g)?;
    Ok(r.into_iter().map(|x| -x).collect())
}

/// Fixed point at arbitrary phases, with the frequencies it induces.
pub fn fixed_point_from_phases(theta: &[f64], alpha: f64, g: &Graph) -> Result<FixedPoint> {
    let omega = induced_frequencies(theta, alpha, g)?;
    let gamma = gamma_at_fixed_point(theta, alpha, g)?;
    let residual = inf_norm(&reduced_residual(theta, &omega, alpha, g)?);
    Ok(FixedPoint {
        theta: theta.to_vec(),
        gamma,
        omega,
        alpha,
        residual,
        iterations: 0,
    })
}

/// Fixed point at phases drawn uniformly from `[−π, π)`.
pub fn random_fixed_point<R: Rng + ?Sized>(
    g: &Graph,
    alpha: f64,
    rng: &mut R,
) -> Result<FixedPoint> {
    let theta: Vec<f64> = (0..g.n_vertices())
        .map(|_| rng.random_range(-PI..PI))
        .collect();
    fixed_point_from_phases(&theta, alpha, g)
}

/// Full-system residual of a fixed point embedded as a Hebbian state (μ = 1).
pub fn hebbian_residual(fp: &FixedPoint, g: &Graph) -> Result<f64> {
    let p = SystemParams::new(fp.omega.clone(), fp.alpha)?;
    model::residual_norm(g, &p, &fp.state())
}

/// `|ω_i| ≤ deg(i)/(2α)` holds at every fixed point; a violation certifies
/// infeasibility.
pub fn violates_vertex_bound(omega: &[f64], alpha: f64, g: &Graph) -> bool {
    omega
        .iter()
        .enumerate()
        .any(|(i, w)| w.abs() > g.degree(i) as f64 / (2.0 * alpha))
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Distance between two Hebbian solutions modulo the symmetries of the
/// reduced equation: uniform rotation, and `π` shifts of single phases
/// (which only flip coupling signs). Compared through the doubled phases
/// relative to vertex 0.
pub fn branch_distance(a: &[f64], b: &[f64]) -> f64 {
    let rel = |t: &[f64], i: usize| 2.0 * (t[i] - t[0]);
    (0..a.len()).fold(0.0, |m, i| m.max(wrap(rel(a, i) - rel(b, i)).abs()))
}

/// Distinct solutions reached by Newton from `starts` random seeds.
pub fn count_branches(
    omega: &[f64],
    alpha: f64,
    g: &Graph,
    starts: usize,
    seed: u64,
) -> Result<Vec<FixedPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<FixedPoint> = Vec::new();
    for _ in 0..starts {
        let guess: Vec<f64> = (0..g.n_vertices())
            .map(|_| rng.random_range(-PI..PI))
            .collect();
        match solve_fixed_point(omega, alpha, g, &guess) {
            Ok(fp) => {
                if found
                    .iter()
                    .all(|f| branch_distance(&f.theta, &fp.theta) > BRANCH_DISTINCT_TOL)
                {
                    found.push(fp);
                }
            }
            Err(Error::NoConvergence { .. } | Error::Degenerate { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(found)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStrategy {
    /// Continuation from the origin only.
    Continuation,
    /// Continuation plus a random multi-start branch census per point.
    MultiStart { starts: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub point: PlanePoint,
    pub feasible: bool,
    pub stable: bool,
    /// Inertia of the reduced matrix at the continued solution.
    pub inertia: Option<Inertia>,
    pub classification: Option<Stability>,
    pub branches_found: Option<usize>,
    /// Final Newton residual (NaN when skipped by the vertex bound).
    pub newton_residual: f64,
    pub theta: Option<Vec<f64>>,
}

/// Order in which the continuation visits the grid: outward from the
/// origin by radius, ties broken by angle then index.
fn spiral_order(grid: &PlaneGrid) -> Vec<usize> {
    let mut order: Vec<usize> = (0..grid.len()).collect();
    let key = |k: usize| {
        let p = grid.point(k);
        let angle = p.b.atan2(p.a).rem_euclid(TAU);
        (p.norm(), angle)
    };
    order.sort_by(|&x, &y| {
        let (rx, ax) = key(x);
        let (ry, ay) = key(y);
        rx.total_cmp(&ry).then(ax.total_cmp(&ay)).then(x.cmp(&y))
    });
    order
}

/// Classifies every grid point of the three-oscillator frequency plane.
///
/// The primary branch is tracked by continuation: points are visited in
/// order of distance from the origin and each Newton solve is seeded with
/// the solution at the nearest already-solved grid neighbour (or zero).
/// Per-point failures are recorded, not raised.
pub fn feasibility_sweep(
    grid: &PlaneGrid,
    alpha: f64,
    g: &Graph,
    strategy: SweepStrategy,
) -> Result<Vec<SweepRecord>> {
    if g.n_vertices() != 3 {
        return Err(invalid("frequency-plane sweeps need a three-vertex graph"));
    }
    if !g.is_connected() {
        return Err(invalid("frequency-plane sweeps need a connected graph"));
    }
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let mut records: Vec<Option<SweepRecord>> = vec![None; grid.len()];
    for idx in spiral_order(grid) {
        let point = grid.point(idx);
        let omega = frequency_from_plane(point);
        let (ia, ib) = (idx / grid.b.n, idx % grid.b.n);

        if violates_vertex_bound(&omega, alpha, g) {
            records[idx] = Some(SweepRecord {
                point,
                feasible: false,
                stable: false,
                inertia: None,
                classification: None,
                branches_found: None,
                newton_residual: f64::NAN,
                theta: None,
            });
            continue;
        }

        let mut seed = vec![0.0; 3];
        let mut best = f64::INFINITY;
        for da in -1i64..=1 {
            for db in -1i64..=1 {
                let (na, nb) = (ia as i64 + da, ib as i64 + db);
                if (da, db) == (0, 0)
                    || na < 0
                    || nb < 0
                    || na >= grid.a.n as i64
                    || nb >= grid.b.n as i64
                {
                    continue;
                }
                let nidx = grid.index(na as usize, nb as usize);
                if let Some(Some(theta)) = records[nidx].as_ref().map(|r| r.theta.as_ref()) {
                    let q = grid.point(nidx);
                    let d = (q.a - point.a).hypot(q.b - point.b);
                    if d < best {
                        best = d;
                        seed.clone_from(theta);
                    }
                }
            }
        }

        let record = match solve_fixed_point(&omega, alpha, g, &seed) {
            Ok(fp) => {
                let report = spectral::classify_fixed_point(g, &fp)?;
                SweepRecord {
                    point,
                    feasible: true,
                    stable: report.classification == Stability::Stable,
                    inertia: Some(report.reduced),
                    classification: Some(report.classification),
                    branches_found: None,
                    newton_residual: fp.residual,
                    theta: Some(fp.theta),
                }
            }
            Err(Error::NoConvergence { residual, .. }) => SweepRecord {
                point,
                feasible: false,
                stable: false,
                inertia: None,
                classification: None,
                branches_found: None,
                newton_residual: residual,
                theta: None,
            },
            Err(Error::Degenerate { theta, .. }) => {
                let residual = inf_norm(&reduced_residual(&theta, &omega, alpha, g)?);
                SweepRecord {
                    point,
                    feasible: false,
                    stable: false,
                    inertia: None,
                    classification: None,
                    branches_found: None,
                    newton_residual: residual,
                    theta: None,
                }
            }
            Err(e) => return Err(e),
        };
        records[idx] = Some(record);
    }
    let mut records: Vec<SweepRecord> = records
        .into_iter()
        .map(|r| r.expect("every point visited"))
        .collect();

    if let SweepStrategy::MultiStart { starts, seed } = strategy {
        let counts: Vec<Result<usize>> = records
            .par_iter()
            .enumerate()
            .map(|(idx, rec)| {
                let omega = frequency_from_plane(rec.point);
                if violates_vertex_bound(&omega, alpha, g) {
                    return Ok(0);
                }
                let point_seed = seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                count_branches(&omega, alpha, g, starts, point_seed).map(|b| b.len())
            })
            .collect();
        for (rec, count) in records.iter_mut().zip(counts) {
            rec.branches_found = Some(count?);
        }
    }
    Ok(records)
}

/// Distance from the origin at which the stable primary branch ceases to
/// exist along the ray at `angle` (radians) in the frequency plane, located
/// by marching outward in steps of `march` then bisecting to `tol`.
pub fn stable_boundary_along_ray(
    g: &Graph,
    alpha: f64,
    angle: f64,
    march: f64,
    tol: f64,
) -> Result<f64> {
    if g.n_vertices() != 3 {
        return Err(invalid("frequency-plane rays need a three-vertex graph"));
    }
    if !(march > 0.0 && tol > 0.0) {
        return Err(invalid("march and tol must be positive"));
    }
    let stable_at = |radius: f64, seed: &[f64]| -> Result<Option<Vec<f64>>> {
        let omega = frequency_from_plane(PlanePoint::polar(radius, angle));
        if violates_vertex_bound(&omega, alpha, g) {
            return Ok(None);
        }
        match solve_fixed_point(&omega, alpha, g, seed) {
            Ok(fp) => {
                let report = spectral::classify_fixed_point(g, &fp)?;
                Ok((report.classification == Stability::Stable).then_some(fp.theta))
            }
            Err(Error::NoConvergence { .. } | Error::Degenerate { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let mut lo = 0.0;
    let mut seed =
        stable_at(0.0, &[0.0; 3])?.ok_or_else(|| Error::Numeric("origin is not stable".into()))?;
    let mut hi = loop {
        let next = lo + march;
        match stable_at(next, &seed)? {
            Some(theta) => {
                lo = next;
                seed = theta;
            }
            None => break next,
        }
        if lo > 1e6 {
            return Err(Error::Numeric("no boundary found along ray".into()));
        }
    };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match stable_at(mid, &seed)? {
            Some(theta) => {
                lo = mid;
                seed = theta;
            }
            None => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

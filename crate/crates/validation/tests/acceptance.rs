use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_4, PI};
use std::path::Path;
use std::time::Duration;

use hebbian_kuramoto::dynamics::{
    integrate, lock_scan, synchrony_report, IntegratorConfig, LockScanRecord,
};
use hebbian_kuramoto::equilibria::{
    self, frequency_from_plane, stable_boundary_along_ray, PlaneGrid, PlanePoint,
};
use hebbian_kuramoto::graph::{complete_graph, Graph};
use hebbian_kuramoto::model::{self, CouplingKind, GeneralCoupling, HebbState, SystemParams};
use hebbian_kuramoto::spectral::{self, inertia_direct, inertia_haynsworth, DEFAULT_ZERO_TOL};
use hebbian_kuramoto_validation::criterion;
use hkuramoto_cli::{Command, FileConfig, RunConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

fn abs_eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let e = m.clone().symmetric_eigen().eigenvalues;
    (e.abs().min(), e.abs().max())
}

/// Classical Kuramoto Jacobian written out directly from the linearization
/// of `dφ_i = ω_i + K Σ_j sin(φ_j − φ_i)`.
fn classical_jacobian_by_hand(g: &Graph, k: f64, phi: &[f64]) -> DMatrix<f64> {
    let n = g.n_vertices();
    let mut j = DMatrix::zeros(n, n);
    for i in 0..n {
        for &(m, _) in g.neighbors(i) {
            let c = k * (phi[m] - phi[i]).cos();
            j[(i, m)] = c;
            j[(i, i)] -= c;
        }
    }
    j
}

#[test]
fn haynsworth_additivity() {
    let ok = criterion("Haynsworth additivity", secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let mut mismatches = 0;
        let mut cases = 0;
        while cases < 200 {
            let n = rng.random_range(2..=12);
            let k = rng.random_range(1..n);
            let full = random_symmetric(&mut rng, n);
            let c = full.view((k, k), (n - k, n - k)).into_owned();
            let (lo, hi) = abs_eigen_range(&c);
            if lo < 1e-3 * hi {
                continue;
            }
            cases += 1;
            let a = full.view((0, 0), (k, k)).into_owned();
            let b = full.view((0, k), (k, n - k)).into_owned();
            let h = inertia_haynsworth(&a, &b, &c, DEFAULT_ZERO_TOL).unwrap();
            let d = inertia_direct(&full, DEFAULT_ZERO_TOL).unwrap();
            if h.counts() != d.counts() {
                mismatches += 1;
            }
        }
        (
            mismatches == 0,
            format!(
                "{} of {cases} partitioned matrices agree",
                cases - mismatches
            ),
        )
    });
    assert!(ok);
}

#[test]
fn sylvester_congruence() {
    let ok = criterion("Sylvester congruence", secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        let mut mismatches = 0;
        let mut cases = 0;
        while cases < 100 {
            let n = rng.random_range(1..=10);
            let u = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let sv = u.clone().svd(false, false).singular_values;
            if sv.min() < 1e-3 * sv.max() {
                continue;
            }
            cases += 1;
            let m = random_symmetric(&mut rng, n);
            let congruent = u.transpose() * &m * &u;
            let a = inertia_direct(&m, DEFAULT_ZERO_TOL).unwrap();
            let b = inertia_direct(&congruent, DEFAULT_ZERO_TOL).unwrap();
            if a.counts() != b.counts() {
                mismatches += 1;
            }
        }
        (
            mismatches == 0,
            format!("{} of {cases} congruent pairs agree", cases - mismatches),
        )
    });
    assert!(ok);
}

#[test]
fn theorem_equivalence() {
    let ok = criterion("Theorem equivalence", secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let mut graphs: Vec<(String, Graph)> = (3..=6)
            .map(|n| (format!("K{n}"), complete_graph(n).unwrap()))
            .collect();
        graphs.push((
            "G8".into(),
            Graph::random_connected(8, 0.3, &mut rng).unwrap(),
        ));
        let mut failures = Vec::new();
        let mut total = 0;
        let mut unstable = 0;
        for (name, g) in &graphs {
            for alpha in [0.3, 1.0] {
                for _ in 0..50 {
                    let fp = equilibria::random_fixed_point(g, alpha, &mut rng).unwrap();
                    let gamma = equilibria::gamma_at_fixed_point(&fp.theta, alpha, g).unwrap();
                    let full_m = spectral::assemble_jacobian(g, alpha, &fp.theta, &gamma)
                        .unwrap()
                        .full();
                    let full = inertia_direct(&full_m, DEFAULT_ZERO_TOL).unwrap();
                    let doubled: Vec<f64> = fp.theta.iter().map(|t| 2.0 * t).collect();
                    let cj = classical_jacobian_by_hand(g, 1.0 / (2.0 * alpha), &doubled);
                    let classical = inertia_direct(&cj, DEFAULT_ZERO_TOL).unwrap();
                    total += 1;
                    if full.n_plus > 0 {
                        unstable += 1;
                    }
                    let e = g.n_edges();
                    if full.n_plus != classical.n_plus
                        || full.n_zero != classical.n_zero
                        || full.n_minus != classical.n_minus + e
                    {
                        failures.push(format!("{name} alpha={alpha} theta={:?}", fp.theta));
                    }
                }
            }
        }
        (
            failures.is_empty(),
            format!(
                "{}/{total} fixed points match ({unstable} unstable){}",
                total - failures.len(),
                failures
                    .first()
                    .map(|f| format!("; first failure {f}"))
                    .unwrap_or_default()
            ),
        )
    });
    assert!(ok);
}

#[test]
fn schur_formula() {
    let ok = criterion("Schur formula", secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let mut worst = 0.0f64;
        for case in 0..100 {
            let g = complete_graph(3 + case % 4).unwrap();
            let alpha = rng.random_range(0.1..2.0);
            let theta: Vec<f64> = (0..g.n_vertices())
                .map(|_| rng.random_range(-PI..PI))
                .collect();
            let gamma: Vec<f64> = g
                .edges()
                .iter()
                .map(|&(i, j)| (theta[i] - theta[j]).cos() / alpha)
                .collect();
            let blocks = spectral::assemble_jacobian(&g, alpha, &theta, &gamma).unwrap();
            let c_inv = blocks.c.clone().try_inverse().unwrap();
            let numeric = &blocks.a - &blocks.b * c_inv * blocks.b.transpose();
            let analytic = spectral::schur_reduced(&g, alpha, &theta).unwrap();
            worst = worst.max((numeric - analytic).amax());
        }
        (
            worst < 1e-12,
            format!("max entry error {worst:.2e} over 100 phase vectors"),
        )
    });
    assert!(ok);
}

#[test]
fn half_angle_round_trip() {
    let ok = criterion("Observation 1 round trip", secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        let alpha = 0.3;
        let k = 1.0 / (2.0 * alpha);
        let mut worst = 0.0f64;
        let mut failures = 0;
        for n in [3, 5] {
            let g = complete_graph(n).unwrap();
            for _ in 0..50 {
                let planted: Vec<f64> = (0..n).map(|_| rng.random_range(-0.35..0.35)).collect();
                let omega = equilibria::induced_frequencies(&planted, alpha, &g).unwrap();

                // Classical fixed point, halved.
                let forward = equilibria::solve_classical_fixed_point(&omega, k, &g, &vec![0.0; n])
                    .and_then(|(phi, _)| {
                        let c = model::classical_vector_field(&g, &omega, k, &phi)?;
                        let fp = equilibria::lift_to_hebbian(&phi, &omega, alpha, &g)?;
                        Ok((
                            c.iter().fold(0.0f64, |m, x| m.max(x.abs())),
                            equilibria::hebbian_residual(&fp, &g)?,
                        ))
                    });
                // Hebbian fixed point, doubled.
                let backward = equilibria::solve_fixed_point(&omega, alpha, &g, &vec![0.0; n])
                    .and_then(|fp| {
                        let c =
                            model::classical_vector_field(&g, &omega, k, &fp.classical_theta())?;
                        Ok((
                            equilibria::hebbian_residual(&fp, &g)?,
                            c.iter().fold(0.0f64, |m, x| m.max(x.abs())),
                        ))
                    });
                match (forward, backward) {
                    (Ok((a, b)), Ok((c, d))) => worst = worst.max(a).max(b).max(c).max(d),
                    _ => failures += 1,
                }
            }
        }
        (
            failures == 0 && worst < 1e-10,
            format!("100 frequency vectors on K3 and K5, {failures} solver failures, worst residual {worst:.2e}"),
        )
    });
    assert!(ok);
}

#[test]
fn fig6_reproduction() {
    let ok = criterion("Fig. 6 reproduction", secs(2), || {
        let g = complete_graph(3).unwrap();
        let r6 = 6f64.sqrt();
        let p = SystemParams::new(vec![3.0 / r6, 3.0 / r6, -6.0 / r6], 0.3).unwrap();
        let s0 = HebbState::uniform(&g, 0.0, 1.0);
        let traj = integrate(&g, &p, &s0, &IntegratorConfig::default()).unwrap();
        let residual = traj.terminal_residual();
        let report = synchrony_report(&traj, 1.0 / 3.0).unwrap();
        let theta = &traj.last_state().theta;
        let gap = (theta[0] - theta[1]).abs();
        let ptp: Vec<f64> = report.edges.iter().map(|e| e.peak_to_peak).collect();
        let ok = residual > 0.1 && gap < 0.01 && ptp[0] < 0.05 && ptp[1] > 0.2 && ptp[2] > 0.2;
        (
            ok,
            format!(
                "residual {residual:.3}, |θ1−θ2| {gap:.2e}, coupling peak-to-peak {:.2e} / {:.3} / {:.3}",
                ptp[0], ptp[1], ptp[2]
            ),
        )
    });
    assert!(ok);
}

#[test]
fn fig7_reproduction() {
    let ok = criterion("Fig. 7 reproduction", secs(2), || {
        let g = complete_graph(3).unwrap();
        let p = SystemParams::new(vec![-1.0, -0.5, 1.5], 0.3).unwrap();
        let s0 = HebbState::uniform(&g, 0.0, 1.0);
        let traj = integrate(&g, &p, &s0, &IntegratorConfig::default()).unwrap();
        let residual = traj.terminal_residual();
        (residual < 1e-6, format!("terminal residual {residual:.2e}"))
    });
    assert!(ok);
}

fn locked_points(records: &[LockScanRecord]) -> HashSet<usize> {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.locked)
        .map(|(k, _)| k)
        .collect()
}

fn feasible_stable_from_cli(grid_spec: &str, dir: &Path) -> HashSet<usize> {
    let file = FileConfig::parse(&format!(
        "a_range = {grid_spec:?}\nb_range = {grid_spec:?}\nout = {:?}\n",
        dir.to_str().unwrap()
    ))
    .unwrap();
    let cfg = RunConfig::resolve(file).unwrap();
    hkuramoto_cli::run(Command::Feasibility, &cfg).unwrap();
    let mut reader = csv::Reader::from_path(dir.join("feasibility.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let stable_col = headers.iter().position(|h| h == "stable").unwrap();
    reader
        .records()
        .enumerate()
        .filter(|(_, r)| &r.as_ref().unwrap()[stable_col] == "true")
        .map(|(k, _)| k)
        .collect()
}

#[test]
fn basin_dependence() {
    let ok = criterion("Basin dependence", secs(300), || {
        let g = complete_graph(3).unwrap();
        let grid = PlaneGrid::square(-2.0, 2.0, 31).unwrap();
        let cfg = IntegratorConfig::default();
        let scan = |gamma0: f64| {
            let s0 = HebbState::uniform(&g, 0.0, gamma0);
            lock_scan(&g, &grid, 0.3, &s0, &cfg, 1e-4).unwrap()
        };
        let low = locked_points(&scan(1.0));
        let high = locked_points(&scan(3.0));
        let tmp = tempfile::tempdir().unwrap();
        let region = feasible_stable_from_cli("-2:2:31", tmp.path());
        let fewer = low.len() < high.len();
        let contained = low.is_subset(&region) && high.is_subset(&region);
        (
            fewer && contained,
            format!(
                "locked points γ0=1: {}, γ0=3: {} of {} (strictly fewer required); \
                 both inside feasible-stable region of {} points: {contained}",
                low.len(),
                high.len(),
                grid.len(),
                region.len()
            ),
        )
    });
    assert!(ok);
}

#[test]
fn feasibility_boundary_symmetry() {
    let ok = criterion("D3 symmetry of feasibility boundary", secs(60), || {
        let g = complete_graph(3).unwrap();
        let alpha = 0.3;
        let radii: Vec<f64> = (0..6)
            .map(|k| {
                let angle = (30.0 + 60.0 * k as f64).to_radians();
                stable_boundary_along_ray(&g, alpha, angle, 0.25, 1e-4).unwrap()
            })
            .collect();
        let lo = radii.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = radii.iter().copied().fold(0.0, f64::max);
        let analytic = 6f64.sqrt() / (2.0 * alpha);
        let classical =
            classical_boundary(&g, 1.0 / (2.0 * alpha), std::f64::consts::FRAC_PI_2, 1e-4);
        let ok = hi - lo < 1e-3
            && (radii[1] - analytic).abs() < 1e-3
            && (classical - analytic).abs() < 1e-3;
        (
            ok,
            format!(
                "radii {:.5?}, spread {:.1e}; b* analytic {analytic:.5}, classical model {classical:.5}",
                radii,
                hi - lo
            ),
        )
    });
    assert!(ok);
}

/// Same bisection for the classical model at the doubled angles, using only
/// the classical field and its hand-built Jacobian.
fn classical_boundary(g: &Graph, k: f64, angle: f64, tol: f64) -> f64 {
    let stable = |r: f64, seed: &[f64]| -> Option<Vec<f64>> {
        let omega = frequency_from_plane(PlanePoint::polar(r, angle));
        let (phi, _) = equilibria::solve_classical_fixed_point(&omega, k, g, seed).ok()?;
        let inertia =
            inertia_direct(&classical_jacobian_by_hand(g, k, &phi), DEFAULT_ZERO_TOL).ok()?;
        (inertia.n_plus == 0 && inertia.n_zero == 1).then_some(phi)
    };
    let (mut lo, mut seed) = (0.0, vec![0.0; 3]);
    let mut hi = loop {
        match stable(lo + 0.25, &seed) {
            Some(phi) => {
                lo += 0.25;
                seed = phi;
            }
            None => break lo + 0.25,
        }
    };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match stable(mid, &seed) {
            Some(phi) => {
                lo = mid;
                seed = phi;
            }
            None => hi = mid,
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn identical_oscillator_decay() {
    let ok = criterion("Identical-oscillator decay", secs(2), || {
        let g = complete_graph(3).unwrap();
        let alpha = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        let start = rng.random_range(-PI..PI);
        let theta: Vec<f64> = (0..3)
            .map(|_| start + rng.random_range(0.0..FRAC_PI_4))
            .collect();
        let p = SystemParams::new(vec![0.0; 3], alpha).unwrap();
        let s0 = HebbState::new(theta, vec![1.0 / alpha; 3]);
        let traj = integrate(&g, &p, &s0, &IntegratorConfig::default().with_t_end(20.0)).unwrap();
        let d_end = traj.diameter[traj.len() - 1];
        let pts: Vec<(f64, f64)> = traj
            .times
            .iter()
            .zip(&traj.diameter)
            .filter(|(_, d)| **d > 1e-12)
            .map(|(t, d)| (*t, d.ln()))
            .collect();
        let n = pts.len() as f64;
        let (mt, my) = (
            pts.iter().map(|p| p.0).sum::<f64>() / n,
            pts.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let slope = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum::<f64>()
            / pts.iter().map(|(t, _)| (t - mt).powi(2)).sum::<f64>();
        (
            d_end < 1e-6 && slope < -0.1,
            format!("D(20) = {d_end:.2e}, fitted log-slope {slope:.3}"),
        )
    });
    assert!(ok);
}

#[test]
fn gradient_flow() {
    let ok = criterion("Gradient-flow check", secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(707);
        let mut worst = 0.0f64;
        for case in 0..50 {
            let g = if case % 2 == 0 {
                complete_graph(4).unwrap()
            } else {
                Graph::random_connected(6, 0.4, &mut rng).unwrap()
            };
            let omega: Vec<f64> = (0..g.n_vertices())
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            let p = SystemParams::new(omega, 0.3).unwrap();
            let s = HebbState::new(
                (0..g.n_vertices())
                    .map(|_| rng.random_range(-PI..PI))
                    .collect(),
                (0..g.n_edges())
                    .map(|_| rng.random_range(-4.0..4.0))
                    .collect(),
            );
            let field: Vec<f64> = model::vector_field(&g, &p, &s).unwrap().iter().collect();
            let h = 1e-5;
            for (idx, f) in field.iter().enumerate() {
                let energy = |d: f64| {
                    let mut t = s.clone();
                    if idx < t.theta.len() {
                        t.theta[idx] += d
                    } else {
                        t.gamma[idx - s.theta.len()] += d
                    }
                    model::lyapunov_energy(&g, &p, &t).unwrap()
                };
                let fd = -(energy(h) - energy(-h)) / (2.0 * h);
                worst = worst.max((f - fd).abs());
            }
        }
        (
            worst < 1e-6,
            format!("max component error {worst:.2e} over 50 states"),
        )
    });
    assert!(ok);
}

#[test]
fn generalized_coupling_consistency() {
    let ok = criterion("Generalized-coupling consistency", secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(808);
        let kind = CouplingKind::Generalized(GeneralCoupling::negative_cosine());
        let mut worst = 0.0f64;
        for case in 0..100 {
            let g = complete_graph(3 + case % 3).unwrap();
            let alpha = rng.random_range(0.1..2.0);
            let theta: Vec<f64> = (0..g.n_vertices())
                .map(|_| rng.random_range(-PI..PI))
                .collect();
            let a = spectral::generalized_reduced_jacobian(&g, alpha, &theta, &kind).unwrap();
            let b = spectral::schur_reduced(&g, alpha, &theta).unwrap();
            worst = worst.max((a - b).amax());
        }
        (
            worst < 1e-13,
            format!("max entry difference {worst:.2e} over 100 phase vectors"),
        )
    });
    assert!(ok);
}

//! Deterministic time integration, trajectory recording and phase-lock
//! detection.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::equilibria::{frequency_from_plane, PlaneGrid, PlanePoint};
use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::model::{self, HebbState, SystemParams};

/// Default ℓ∞ residual below which a terminal state counts as locked.
pub const DEFAULT_LOCK_THRESHOLD: f64 = 1e-4;
/// Default integration horizon for lock detection.
pub const DEFAULT_LOCK_HORIZON: f64 = 75.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with a fixed step.
    Rk4,
    /// Dormand-Prince 5(4) with step-size control.
    Rk45 { abs_tol: f64, rel_tol: f64 },
}

impl Method {
    pub fn rk45() -> Self {
        Method::Rk45 {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step for RK4, initial step for RK45.
    pub step: f64,
    pub t_end: f64,
    /// Record every k-th step. The final state is always recorded.
    pub sample_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            step: 1e-2,
            t_end: DEFAULT_LOCK_HORIZON,
            sample_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_sample_every(mut self, sample_every: usize) -> Self {
        self.sample_every = sample_every;
        self
    }

    /// `t_end = 0` is accepted and yields the initial state only.
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid(format!("step must be positive, got {}", self.step)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(invalid(format!(
                "t_end must be nonnegative, got {}",
                self.t_end
            )));
        }
        if self.sample_every == 0 {
            return Err(invalid("sample_every must be at least 1"));
        }
        if let Method::Rk45 { abs_tol, rel_tol } = self.method {
            if !(abs_tol > 0.0 && rel_tol > 0.0) {
                return Err(invalid("RK45 tolerances must be positive"));
            }
        }
        Ok(())
    }
}

/// Shortest round-trip decimal form, switching to exponent notation for very
/// small or very large magnitudes.
pub fn format_value(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// Time-sampled states with per-sample diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<HebbState>,
    pub diameter: Vec<f64>,
    pub residual: Vec<f64>,
    pub energy: Vec<f64>,
}

impl Trajectory {
    fn new() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            diameter: Vec::new(),
            residual: Vec::new(),
            energy: Vec::new(),
        }
    }

    fn record(
        &mut self,
        g: &Graph,
        p: &SystemParams,
        t: f64,
        s: &HebbState,
        scratch: &mut HebbState,
    ) {
        model::vector_field_into(g, p, s, scratch);
        self.times.push(t);
        self.diameter
            .push(model::phase_diameter(&s.theta).expect("graph has at least one vertex"));
        self.residual.push(scratch.max_abs());
        self.energy.push(model::energy_unchecked(g, p, s));
        self.states.push(s.clone());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &HebbState {
        self.states
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn terminal_residual(&self) -> f64 {
        *self
            .residual
            .last()
            .expect("trajectory has at least one sample")
    }

    /// CSV with header `t,theta_0..,gamma_0..,diameter,residual,energy`,
    /// edge columns in canonical edge order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let Some(first) = self.states.first() else {
            return Ok(());
        };
        let mut header = vec!["t".to_string()];
        header.extend((0..first.theta.len()).map(|i| format!("theta_{i}")));
        header.extend((0..first.gamma.len()).map(|k| format!("gamma_{k}")));
        header.extend(["diameter", "residual", "energy"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for (idx, s) in self.states.iter().enumerate() {
            let row: Vec<String> = std::iter::once(self.times[idx])
                .chain(s.iter())
                .chain([self.diameter[idx], self.residual[idx], self.energy[idx]])
                .map(format_value)
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

struct Rk4Buffers {
    k1: HebbState,
    k2: HebbState,
    k3: HebbState,
    k4: HebbState,
    tmp: HebbState,
}

impl Rk4Buffers {
    fn new(s: &HebbState) -> Self {
        Self {
            k1: s.zeros_like(),
            k2: s.zeros_like(),
            k3: s.zeros_like(),
            k4: s.zeros_like(),
            tmp: s.zeros_like(),
        }
    }

    fn step(&mut self, g: &Graph, p: &SystemParams, s: &mut HebbState, h: f64) {
        model::vector_field_into(g, p, s, &mut self.k1);
        s.axpy_into(0.5 * h, &self.k1, &mut self.tmp);
        model::vector_field_into(g, p, &self.tmp, &mut self.k2);
        s.axpy_into(0.5 * h, &self.k2, &mut self.tmp);
        model::vector_field_into(g, p, &self.tmp, &mut self.k3);
        s.axpy_into(h, &self.k3, &mut self.tmp);
        model::vector_field_into(g, p, &self.tmp, &mut self.k4);
        let w = h / 6.0;
        let update =
            |x: &mut f64, a: f64, b: f64, c: f64, d: f64| *x += w * (a + 2.0 * b + 2.0 * c + d);
        for i in 0..s.theta.len() {
            update(
                &mut s.theta[i],
                self.k1.theta[i],
                self.k2.theta[i],
                self.k3.theta[i],
                self.k4.theta[i],
            );
        }
        for k in 0..s.gamma.len() {
            update(
                &mut s.gamma[k],
                self.k1.gamma[k],
                self.k2.gamma[k],
                self.k3.gamma[k],
                self.k4.gamma[k],
            );
        }
    }
}

// Dormand-Prince 5(4) tableau.
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Dopri {
    k: Vec<HebbState>,
    stage: HebbState,
    y5: HebbState,
}

impl Dopri {
    fn new(s: &HebbState) -> Self {
        Self {
            k: (0..7).map(|_| s.zeros_like()).collect(),
            stage: s.zeros_like(),
            y5: s.zeros_like(),
        }
    }

    /// Attempts one step; returns the scaled error norm. The candidate is left
    /// in `self.y5`.
    fn attempt(
        &mut self,
        g: &Graph,
        p: &SystemParams,
        s: &HebbState,
        h: f64,
        abs_tol: f64,
        rel_tol: f64,
    ) -> f64 {
        model::vector_field_into(g, p, s, &mut self.k[0]);
        for st in 1..7 {
            combine(s, h, &DP_A[st][..st], &self.k, &mut self.stage);
            model::vector_field_into(g, p, &self.stage, &mut self.k[st]);
        }
        combine(s, h, &DP_B5[..6], &self.k, &mut self.y5);
        let mut err: f64 = 0.0;
        let mut accumulate = |idx: usize, y: f64, y_new: f64| {
            let e: f64 = (0..7)
                .map(|st| (DP_B5[st] - DP_B4[st]) * component(&self.k[st], idx))
                .sum::<f64>()
                * h;
            let scale = abs_tol + rel_tol * y.abs().max(y_new.abs());
            err = err.max(e.abs() / scale);
        };
        for (idx, (y, y_new)) in s.iter().zip(self.y5.iter()).enumerate() {
            accumulate(idx, y, y_new);
        }
        err
    }
}

fn component(s: &HebbState, idx: usize) -> f64 {
    if idx < s.theta.len() {
        s.theta[idx]
    } else {
        s.gamma[idx - s.theta.len()]
    }
}

fn combine(s: &HebbState, h: f64, coeffs: &[f64], k: &[HebbState], out: &mut HebbState) {
    out.theta.copy_from_slice(&s.theta);
    out.gamma.copy_from_slice(&s.gamma);
    for (c, ks) in coeffs.iter().zip(k) {
        if *c == 0.0 {
            continue;
        }
        for (o, d) in out.theta.iter_mut().zip(&ks.theta) {
            *o += h * c * d;
        }
        for (o, d) in out.gamma.iter_mut().zip(&ks.gamma) {
            *o += h * c * d;
        }
    }
}

/// Number of fixed steps and the effective step landing exactly on `t_end`.
fn fixed_grid(step: f64, t_end: f64) -> (usize, f64) {
    let n = ((t_end / step) - 1e-9).ceil().max(1.0) as usize;
    (n, t_end / n as f64)
}

/// Integrates from `s0` over `[0, cfg.t_end]`, recording every
/// `cfg.sample_every`-th step and always the initial and final states.
pub fn integrate(
    g: &Graph,
    p: &SystemParams,
    s0: &HebbState,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut traj = Trajectory::new();
    drive(g, p, s0, cfg, Some(&mut traj))?;
    Ok(traj)
}

/// Same as [`integrate`] but keeps only the final state.
pub fn integrate_terminal(
    g: &Graph,
    p: &SystemParams,
    s0: &HebbState,
    cfg: &IntegratorConfig,
) -> Result<HebbState> {
    drive(g, p, s0, cfg, None)
}

fn drive(
    g: &Graph,
    p: &SystemParams,
    s0: &HebbState,
    cfg: &IntegratorConfig,
    mut traj: Option<&mut Trajectory>,
) -> Result<HebbState> {
    cfg.validate()?;
    if p.omega().len() != g.n_vertices() {
        return Err(invalid("omega length does not match the graph"));
    }
    s0.check_shape(g)?;
    if !s0.is_finite() {
        return Err(invalid("initial state must be finite"));
    }
    let mut s = s0.clone();
    let mut scratch = s.zeros_like();
    if let Some(t) = traj.as_deref_mut() {
        t.record(g, p, 0.0, &s, &mut scratch);
    }
    if cfg.t_end == 0.0 {
        return Ok(s);
    }

    match cfg.method {
        Method::Rk4 => {
            let (n_steps, h) = fixed_grid(cfg.step, cfg.t_end);
            let mut rk = Rk4Buffers::new(&s);
            for step in 1..=n_steps {
                rk.step(g, p, &mut s, h);
                if !s.is_finite() {
                    return Err(Error::IntegrationDiverged {
                        last_good_time: (step - 1) as f64 * h,
                    });
                }
                if let Some(t) = traj.as_deref_mut() {
                    if step % cfg.sample_every == 0 || step == n_steps {
                        let time = if step == n_steps {
                            cfg.t_end
                        } else {
                            step as f64 * h
                        };
                        t.record(g, p, time, &s, &mut scratch);
                    }
                }
            }
        }
        Method::Rk45 { abs_tol, rel_tol } => {
            let mut dp = Dopri::new(&s);
            let mut t = 0.0;
            let mut h = cfg.step.min(cfg.t_end);
            let mut accepted = 0usize;
            let h_min = 1e-14 * cfg.t_end.max(1.0);
            while t < cfg.t_end {
                let last = t + h >= cfg.t_end;
                if last {
                    h = cfg.t_end - t;
                }
                let err = dp.attempt(g, p, &s, h, abs_tol, rel_tol);
                if !err.is_finite() && h <= h_min {
                    return Err(Error::IntegrationDiverged { last_good_time: t });
                }
                if err <= 1.0 {
                    std::mem::swap(&mut s, &mut dp.y5);
                    t = if last { cfg.t_end } else { t + h };
                    accepted += 1;
                    if !s.is_finite() {
                        return Err(Error::IntegrationDiverged {
                            last_good_time: t - h,
                        });
                    }
                    if let Some(tr) = traj.as_deref_mut() {
                        if accepted.is_multiple_of(cfg.sample_every) || t >= cfg.t_end {
                            tr.record(g, p, t, &s, &mut scratch);
                        }
                    }
                }
                let factor = if err.is_finite() {
                    (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0)
                } else {
                    0.2
                };
                h *= factor;
                if h < h_min {
                    return Err(Error::IntegrationDiverged { last_good_time: t });
                }
            }
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockReport {
    pub locked: bool,
    pub terminal_residual: f64,
    pub terminal_state: HebbState,
    pub threshold: f64,
}

/// Integrates to `t_end` with the default RK4 settings and thresholds the
/// terminal residual.
pub fn detect_phase_lock(
    g: &Graph,
    p: &SystemParams,
    s0: &HebbState,
    t_end: f64,
    threshold: f64,
) -> Result<LockReport> {
    let cfg = IntegratorConfig::default().with_t_end(t_end);
    detect_phase_lock_with(g, p, s0, &cfg, threshold)
}

pub fn detect_phase_lock_with(
    g: &Graph,
    p: &SystemParams,
    s0: &HebbState,
    cfg: &IntegratorConfig,
    threshold: f64,
) -> Result<LockReport> {
    if !(threshold > 0.0) {
        return Err(invalid(format!(
            "lock threshold must be positive, got {threshold}"
        )));
    }
    let terminal_state = integrate_terminal(g, p, s0, cfg)?;
    let terminal_residual = model::residual_norm(g, p, &terminal_state)?;
    Ok(LockReport {
        locked: terminal_residual < threshold,
        terminal_residual,
        terminal_state,
        threshold,
    })
}

/// Lock outcome at one point of the three-oscillator frequency plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockScanRecord {
    pub point: PlanePoint,
    pub locked: bool,
    /// NaN when the integration diverged.
    pub terminal_residual: f64,
}

/// Integrates from `s0` at every grid point in parallel and records whether
/// the trajectory phase-locks. Results follow grid order.
pub fn lock_scan(
    g: &Graph,
    grid: &PlaneGrid,
    alpha: f64,
    s0: &HebbState,
    cfg: &IntegratorConfig,
    threshold: f64,
) -> Result<Vec<LockScanRecord>> {
    if g.n_vertices() != 3 {
        return Err(invalid("lock scans need a three-vertex graph"));
    }
    s0.check_shape(g)?;
    if !s0.is_finite() {
        return Err(invalid("initial state must be finite"));
    }
    cfg.validate()?;
    if !(threshold > 0.0) {
        return Err(invalid(format!(
            "lock threshold must be positive, got {threshold}"
        )));
    }
    grid.points()
        .into_par_iter()
        .map(|point| {
            let p = SystemParams::new(frequency_from_plane(point), alpha)?;
            match detect_phase_lock_with(g, &p, s0, cfg, threshold) {
                Ok(r) => Ok(LockScanRecord {
                    point,
                    locked: r.locked,
                    terminal_residual: r.terminal_residual,
                }),
                Err(Error::IntegrationDiverged { .. }) => Ok(LockScanRecord {
                    point,
                    locked: false,
                    terminal_residual: f64::NAN,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSync {
    pub i: usize,
    pub j: usize,
    /// Peak-to-peak variation of `θ_i − θ_j` over the window.
    pub variation: f64,
    /// `|θ_i − θ_j|` at the last sample.
    pub final_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSync {
    pub edge: usize,
    pub peak_to_peak: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynchronyReport {
    pub window_start: f64,
    pub pairs: Vec<PairSync>,
    pub edges: Vec<EdgeSync>,
}

/// Summarizes the trailing `tail_fraction` of the time span: phase-gap
/// variation for every vertex pair and coupling oscillation per edge.
pub fn synchrony_report(traj: &Trajectory, tail_fraction: f64) -> Result<SynchronyReport> {
    if traj.len() < 2 {
        return Err(invalid("synchrony report needs at least two samples"));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(invalid(format!(
            "tail_fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    let t0 = traj.times[0];
    let t1 = *traj.times.last().unwrap();
    let window_start = t1 - tail_fraction * (t1 - t0);
    let first = traj.times.partition_point(|&t| t < window_start);
    let tail = &traj.states[first..];

    let n = tail[0].theta.len();
    let range = |values: &mut dyn Iterator<Item = f64>| {
        values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        })
    };
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (lo, hi) = range(&mut tail.iter().map(|s| s.theta[i] - s.theta[j]));
            let last = tail.last().unwrap();
            pairs.push(PairSync {
                i,
                j,
                variation: hi - lo,
                final_gap: (last.theta[i] - last.theta[j]).abs(),
            });
        }
    }
    let edges = (0..tail[0].gamma.len())
        .map(|k| {
            let (lo, hi) = range(&mut tail.iter().map(|s| s.gamma[k]));
            let mean = tail.iter().map(|s| s.gamma[k]).sum::<f64>() / tail.len() as f64;
            EdgeSync {
                edge: k,
                peak_to_peak: hi - lo,
                mean,
            }
        })
        .collect();
    Ok(SynchronyReport {
        window_start,
        pairs,
        edges,
    })
}

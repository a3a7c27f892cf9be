use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use hebbian_kuramoto::dynamics::{
    format_value as fmt, integrate, lock_scan, synchrony_report, LockScanRecord,
};
use hebbian_kuramoto::equilibria::{self, feasibility_sweep, SweepRecord, SweepStrategy};
use hebbian_kuramoto::model::SystemParams;
use hebbian_kuramoto::spectral::{self, theorem_battery, Inertia, StabilityReport};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    LockScan,
    Feasibility,
    Stability,
    TheoremCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::LockScan => "lock-scan",
            Command::Feasibility => "feasibility",
            Command::Stability => "stability",
            Command::TheoremCheck => "theorem-check",
        }
    }
}

/// Runs `command`, writing `manifest.txt` and the command's artifacts into
/// `cfg.out`. Returns the summary text that was also written to disk.
pub fn run(command: Command, cfg: &RunConfig) -> Result<String, CliError> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("manifest.txt"), cfg.manifest(command.name()))?;
    let summary = match command {
        Command::Simulate => simulate(cfg)?,
        Command::LockScan => lock_scan_cmd(cfg)?,
        Command::Feasibility => feasibility(cfg)?,
        Command::Stability => stability(cfg)?,
        Command::TheoremCheck => theorem_check(cfg)?,
    };
    fs::write(cfg.out.join("summary.txt"), &summary.text)?;
    match summary.failure {
        Some(msg) => Err(CliError::Verification(msg)),
        None => Ok(summary.text),
    }
}

struct Summary {
    text: String,
    failure: Option<String>,
}

impl Summary {
    fn new() -> Self {
        Self {
            text: String::new(),
            failure: None,
        }
    }

    fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "{key}={value}");
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        path,
    )?)))
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(";")
}

fn params(cfg: &RunConfig) -> Result<SystemParams, CliError> {
    Ok(SystemParams::new(cfg.omega.clone(), cfg.alpha)?.with_mu(cfg.mu)?)
}

fn simulate(cfg: &RunConfig) -> Result<Summary, CliError> {
    let p = params(cfg)?;
    let s0 = cfg.initial_state()?;
    let traj = integrate(&cfg.graph, &p, &s0, &cfg.integrator)?;
    let mut w = BufWriter::new(File::create(cfg.out.join("trajectory.csv"))?);
    traj.write_csv(&mut w)?;

    let residual = traj.terminal_residual();
    let mut s = Summary::new();
    s.put("locked", residual < cfg.lock_threshold);
    s.put("terminal_residual", fmt(residual));
    s.put("lock_threshold", fmt(cfg.lock_threshold));
    s.put("samples", traj.len());
    s.put("final_time", fmt(traj.times[traj.len() - 1]));
    s.put("final_diameter", fmt(traj.diameter[traj.len() - 1]));
    if traj.len() >= 2 {
        let report = synchrony_report(&traj, cfg.tail_fraction)?;
        s.put("window_start", fmt(report.window_start));
        for pair in &report.pairs {
            s.put(
                &format!("pair_{}_{}_variation", pair.i, pair.j),
                fmt(pair.variation),
            );
            s.put(
                &format!("pair_{}_{}_final_gap", pair.i, pair.j),
                fmt(pair.final_gap),
            );
        }
        for e in &report.edges {
            let (i, j) = cfg.graph.edges()[e.edge];
            s.put(&format!("edge_{i}_{j}_peak_to_peak"), fmt(e.peak_to_peak));
            s.put(&format!("edge_{i}_{j}_mean"), fmt(e.mean));
        }
    }
    Ok(s)
}

fn lock_scan_cmd(cfg: &RunConfig) -> Result<Summary, CliError> {
    if cfg.mu != 1.0 {
        return Err(CliError::Config("lock-scan runs at mu = 1".into()));
    }
    let records = lock_scan(
        &cfg.graph,
        &cfg.grid(),
        cfg.alpha,
        &cfg.initial_state()?,
        &cfg.integrator,
        cfg.lock_threshold,
    )?;
    write_lock_scan(&cfg.out.join("lock_scan.csv"), &records)?;
    let mut s = Summary::new();
    s.put("points", records.len());
    s.put("locked", records.iter().filter(|r| r.locked).count());
    s.put(
        "diverged",
        records
            .iter()
            .filter(|r| r.terminal_residual.is_nan())
            .count(),
    );
    Ok(s)
}

pub fn write_lock_scan(path: &Path, records: &[LockScanRecord]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["a", "b", "terminal_residual", "locked"])?;
    for r in records {
        w.write_record([
            fmt(r.point.a),
            fmt(r.point.b),
            fmt(r.terminal_residual),
            r.locked.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn feasibility(cfg: &RunConfig) -> Result<Summary, CliError> {
    let strategy = if cfg.starts == 0 {
        SweepStrategy::Continuation
    } else {
        SweepStrategy::MultiStart {
            starts: cfg.starts,
            seed: cfg.seed,
        }
    };
    let records = feasibility_sweep(&cfg.grid(), cfg.alpha, &cfg.graph, strategy)?;
    write_sweep(&cfg.out.join("feasibility.csv"), &records)?;
    let mut s = Summary::new();
    s.put("points", records.len());
    s.put("feasible", records.iter().filter(|r| r.feasible).count());
    s.put("stable", records.iter().filter(|r| r.stable).count());
    Ok(s)
}

pub fn write_sweep(path: &Path, records: &[SweepRecord]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "a",
        "b",
        "feasible",
        "stable",
        "n_plus",
        "n_zero",
        "n_minus",
        "branches_found",
        "newton_residual",
    ])?;
    for r in records {
        let i = r.inertia;
        w.write_record([
            fmt(r.point.a),
            fmt(r.point.b),
            r.feasible.to_string(),
            r.stable.to_string(),
            opt(i.map(|i| i.n_plus)),
            opt(i.map(|i| i.n_zero)),
            opt(i.map(|i| i.n_minus)),
            opt(r.branches_found),
            fmt(r.newton_residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn inertia_fields(i: &Inertia) -> [String; 3] {
    [
        i.n_plus.to_string(),
        i.n_zero.to_string(),
        i.n_minus.to_string(),
    ]
}

fn stability(cfg: &RunConfig) -> Result<Summary, CliError> {
    let g = &cfg.graph;
    let (theta, residual) = match &cfg.theta {
        Some(theta) => {
            let r = equilibria::reduced_residual(theta, &cfg.omega, cfg.alpha, g)?;
            (theta.clone(), r.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        }
        None => {
            let guess = cfg.initial_state()?.theta;
            let fp = equilibria::solve_fixed_point(&cfg.omega, cfg.alpha, g, &guess)?;
            (fp.theta, fp.residual)
        }
    };
    let report = spectral::classify_stability(g, cfg.alpha, &theta, &cfg.omega)?;

    let mut w = csv_writer(&cfg.out.join("stability.csv"))?;
    w.write_record([
        "n_plus_reduced",
        "n_zero_reduced",
        "n_minus_reduced",
        "n_plus_full",
        "n_zero_full",
        "n_minus_full",
        "classification",
    ])?;
    let mut row: Vec<String> = inertia_fields(&report.reduced).into();
    row.extend(inertia_fields(&report.full));
    row.push(report.classification.label().into());
    w.write_record(&row)?;
    w.flush()?;

    let mut s = Summary::new();
    s.put("theta", join(&theta));
    s.put(
        "gamma",
        join(&equilibria::gamma_at_fixed_point(&theta, cfg.alpha, g)?),
    );
    s.put("reduced_residual", fmt(residual));
    s.put("classification", report.classification.label());
    put_report(&mut s, &report);
    s.put("matches_classical", report.matches_classical(g.n_edges()));
    Ok(s)
}

fn put_report(s: &mut Summary, r: &StabilityReport) {
    for (name, i) in [
        ("reduced", &r.reduced),
        ("full", &r.full),
        ("classical", &r.classical),
    ] {
        s.put(
            &format!("inertia_{name}"),
            format!("{},{},{}", i.n_plus, i.n_zero, i.n_minus),
        );
    }
}

fn theorem_check(cfg: &RunConfig) -> Result<Summary, CliError> {
    let cases = theorem_battery(&cfg.graph, cfg.alpha, cfg.count, cfg.seed)?;
    let mut w = csv_writer(&cfg.out.join("theorem.csv"))?;
    w.write_record([
        "case",
        "passed",
        "n_plus_full",
        "n_zero_full",
        "n_minus_full",
        "n_plus_classical",
        "n_zero_classical",
        "n_minus_classical",
        "classification",
        "theta",
    ])?;
    for (k, c) in cases.iter().enumerate() {
        let mut row = vec![k.to_string(), c.passed.to_string()];
        row.extend(inertia_fields(&c.report.full));
        row.extend(inertia_fields(&c.report.classical));
        row.push(c.report.classification.label().into());
        row.push(join(&c.theta));
        w.write_record(&row)?;
    }
    w.flush()?;

    let failed: Vec<_> = cases.iter().filter(|c| !c.passed).collect();
    let mut s = Summary::new();
    s.put("cases", cases.len());
    s.put("passed", cases.len() - failed.len());
    s.put("failed", failed.len());
    if !failed.is_empty() {
        let listed: Vec<String> = failed
            .iter()
            .map(|c| format!("[{}]", join(&c.theta)))
            .collect();
        s.failure = Some(format!("equivalence failed at theta {}", listed.join(" ")));
    }
    Ok(s)
}

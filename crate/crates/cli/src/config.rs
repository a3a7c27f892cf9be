//! Run configuration: a flat TOML file overlaid with command-line flags.
//!
//! Recognized keys (all optional):
//!
//! | key              | type                 | default        |
//! |------------------|----------------------|----------------|
//! | `graph`          | `complete:N` or path | `complete:3`   |
//! | `alpha`          | float > 0            | `0.3`          |
//! | `mu`             | float > 0            | `1.0`          |
//! | `omega`          | float list           | zeros          |
//! | `plane`          | `[a, b]` (N = 3)     | unset          |
//! | `a_range`        | `lo:hi:n`            | `-3:3:61`      |
//! | `b_range`        | `lo:hi:n`            | `-3:3:61`      |
//! | `theta0`         | float or list        | `0.0`          |
//! | `gamma0`         | float or list        | `1.0`          |
//! | `theta`          | float list           | unset          |
//! | `t_end`          | float ≥ 0            | `75.0`         |
//! | `step`           | float > 0            | `0.01`         |
//! | `method`         | `rk4` or `rk45`      | `rk4`          |
//! | `sample_every`   | integer ≥ 1          | `1`            |
//! | `lock_threshold` | float > 0            | `1e-4`         |
//! | `tail_fraction`  | float in (0, 1]      | `1/3`          |
//! | `seed`           | integer              | `0`            |
//! | `count`          | integer              | `50`           |
//! | `starts`         | integer              | `32`           |
//! | `out`            | directory            | `out`          |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hebbian_kuramoto::dynamics::{IntegratorConfig, Method, DEFAULT_LOCK_THRESHOLD};
use hebbian_kuramoto::equilibria::{frequency_from_plane, Axis, PlaneGrid, PlanePoint};
use hebbian_kuramoto::graph::{complete_graph, Graph};
use hebbian_kuramoto::model::HebbState;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

impl ScalarOrList {
    fn expand(&self, len: usize, key: &str) -> Result<Vec<f64>, CliError> {
        match self {
            ScalarOrList::Scalar(x) => Ok(vec![*x; len]),
            ScalarOrList::List(v) if v.len() == len => Ok(v.clone()),
            ScalarOrList::List(v) => Err(CliError::Config(format!(
                "{key} has {} entries, expected {len}",
                v.len()
            ))),
        }
    }

    fn render(&self) -> String {
        match self {
            ScalarOrList::Scalar(x) => x.to_string(),
            ScalarOrList::List(v) => render_list(v),
        }
    }
}

/// Contents of a config file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub graph: Option<String>,
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub omega: Option<Vec<f64>>,
    pub plane: Option<[f64; 2]>,
    pub a_range: Option<String>,
    pub b_range: Option<String>,
    pub theta0: Option<ScalarOrList>,
    pub gamma0: Option<ScalarOrList>,
    pub theta: Option<Vec<f64>>,
    pub t_end: Option<f64>,
    pub step: Option<f64>,
    pub method: Option<String>,
    pub sample_every: Option<usize>,
    pub lock_threshold: Option<f64>,
    pub tail_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub starts: Option<usize>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))
    }

    /// Fields set in `other` take precedence.
    pub fn overlay(self, other: FileConfig) -> FileConfig {
        FileConfig {
            graph: other.graph.or(self.graph),
            alpha: other.alpha.or(self.alpha),
            mu: other.mu.or(self.mu),
            omega: other.omega.or(self.omega),
            plane: other.plane.or(self.plane),
            a_range: other.a_range.or(self.a_range),
            b_range: other.b_range.or(self.b_range),
            theta0: other.theta0.or(self.theta0),
            gamma0: other.gamma0.or(self.gamma0),
            theta: other.theta.or(self.theta),
            t_end: other.t_end.or(self.t_end),
            step: other.step.or(self.step),
            method: other.method.or(self.method),
            sample_every: other.sample_every.or(self.sample_every),
            lock_threshold: other.lock_threshold.or(self.lock_threshold),
            tail_fraction: other.tail_fraction.or(self.tail_fraction),
            seed: other.seed.or(self.seed),
            count: other.count.or(self.count),
            starts: other.starts.or(self.starts),
            out: other.out.or(self.out),
        }
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub graph_spec: String,
    pub graph: Graph,
    pub alpha: f64,
    pub mu: f64,
    pub omega: Vec<f64>,
    pub a_range: Axis,
    pub b_range: Axis,
    pub theta0: ScalarOrList,
    pub gamma0: ScalarOrList,
    pub theta: Option<Vec<f64>>,
    pub integrator: IntegratorConfig,
    pub lock_threshold: f64,
    pub tail_fraction: f64,
    pub seed: u64,
    pub count: usize,
    pub starts: usize,
    pub out: PathBuf,
}

pub fn parse_graph(spec: &str) -> Result<Graph, CliError> {
    if let Some(n) = spec.strip_prefix("complete:") {
        let n: usize = n
            .parse()
            .map_err(|_| CliError::Config(format!("bad vertex count in graph spec {spec:?}")))?;
        return complete_graph(n).map_err(|e| CliError::Config(e.to_string()));
    }
    let text = fs::read_to_string(spec)
        .map_err(|e| CliError::Config(format!("cannot read graph file {spec}: {e}")))?;
    text.parse()
        .map_err(|e: hebbian_kuramoto::Error| CliError::Config(format!("{spec}: {e}")))
}

/// Parses `lo:hi:n`.
pub fn parse_range(spec: &str) -> Result<Axis, CliError> {
    let bad = || CliError::Config(format!("expected lo:hi:n, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    Axis::new(lo, hi, n).map_err(|e| CliError::Config(e.to_string()))
}

fn render_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(f64::to_string).collect();
    format!("[{}]", items.join(", "))
}

fn render_axis(a: &Axis) -> String {
    format!("{}:{}:{}", a.lo, a.hi, a.n)
}

fn positive(key: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Config(format!(
            "{key} must be positive and finite, got {x}"
        )))
    }
}

impl RunConfig {
    pub fn resolve(file: FileConfig) -> Result<Self, CliError> {
        let graph_spec = file.graph.unwrap_or_else(|| "complete:3".into());
        let graph = parse_graph(&graph_spec)?;
        let n = graph.n_vertices();

        let omega = match (file.omega, file.plane) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("set omega or plane, not both".into()))
            }
            (Some(w), None) if w.len() != n => {
                return Err(CliError::Config(format!(
                    "omega has {} entries, graph has {n} vertices",
                    w.len()
                )))
            }
            (Some(w), None) => w,
            (None, Some([a, b])) if n == 3 => frequency_from_plane(PlanePoint::new(a, b)),
            (None, Some(_)) => {
                return Err(CliError::Config("plane needs a three-vertex graph".into()))
            }
            (None, None) => vec![0.0; n],
        };
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(CliError::Config("omega must be finite".into()));
        }

        let method = match file.method.as_deref().unwrap_or("rk4") {
            "rk4" => Method::Rk4,
            "rk45" => Method::rk45(),
            other => return Err(CliError::Config(format!("unknown method {other:?}"))),
        };
        let mut integrator = IntegratorConfig {
            method,
            ..Default::default()
        };
        if let Some(t) = file.t_end {
            integrator.t_end = t;
        }
        if let Some(h) = file.step {
            integrator.step = h;
        }
        if let Some(k) = file.sample_every {
            integrator.sample_every = k;
        }
        integrator
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;

        let tail_fraction = file.tail_fraction.unwrap_or(1.0 / 3.0);
        if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
            return Err(CliError::Config(format!(
                "tail_fraction must lie in (0, 1], got {tail_fraction}"
            )));
        }
        if let Some(t) = &file.theta {
            if t.len() != n {
                return Err(CliError::Config(format!(
                    "theta has {} entries, expected {n}",
                    t.len()
                )));
            }
        }

        let cfg = RunConfig {
            alpha: positive("alpha", file.alpha.unwrap_or(0.3))?,
            mu: positive("mu", file.mu.unwrap_or(1.0))?,
            omega,
            a_range: parse_range(file.a_range.as_deref().unwrap_or("-3:3:61"))?,
            b_range: parse_range(file.b_range.as_deref().unwrap_or("-3:3:61"))?,
            theta0: file.theta0.unwrap_or(ScalarOrList::Scalar(0.0)),
            gamma0: file.gamma0.unwrap_or(ScalarOrList::Scalar(1.0)),
            theta: file.theta,
            integrator,
            lock_threshold: positive(
                "lock_threshold",
                file.lock_threshold.unwrap_or(DEFAULT_LOCK_THRESHOLD),
            )?,
            tail_fraction,
            seed: file.seed.unwrap_or(0),
            count: file.count.unwrap_or(50),
            starts: file.starts.unwrap_or(32),
            out: file.out.unwrap_or_else(|| PathBuf::from("out")),
            graph_spec,
            graph,
        };
        cfg.initial_state()?;
        Ok(cfg)
    }

    pub fn initial_state(&self) -> Result<HebbState, CliError> {
        let theta = self.theta0.expand(self.graph.n_vertices(), "theta0")?;
        let gamma = self.gamma0.expand(self.graph.n_edges(), "gamma0")?;
        let s = HebbState::new(theta, gamma);
        if !s.is_finite() {
            return Err(CliError::Config("initial state must be finite".into()));
        }
        Ok(s)
    }

    pub fn grid(&self) -> PlaneGrid {
        PlaneGrid::new(self.a_range, self.b_range)
    }

    /// Key-value echo of every resolved setting, in a fixed order.
    pub fn manifest(&self, command: &str) -> String {
        let mut m = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(m, "{k}={v}");
        };
        put("tool", "hkuramoto".into());
        put("version", env!("CARGO_PKG_VERSION").into());
        put("command", command.into());
        put("graph", self.graph_spec.clone());
        put("n_vertices", self.graph.n_vertices().to_string());
        let edges: Vec<String> = self
            .graph
            .edges()
            .iter()
            .map(|(i, j)| format!("{i}-{j}"))
            .collect();
        put("edges", edges.join(" "));
        put("alpha", self.alpha.to_string());
        put("mu", self.mu.to_string());
        put("omega", render_list(&self.omega));
        put("a_range", render_axis(&self.a_range));
        put("b_range", render_axis(&self.b_range));
        put("theta0", self.theta0.render());
        put("gamma0", self.gamma0.render());
        put(
            "theta",
            self.theta
                .as_deref()
                .map_or_else(|| "unset".into(), render_list),
        );
        let method = match self.integrator.method {
            Method::Rk4 => "rk4".to_string(),
            Method::Rk45 { abs_tol, rel_tol } => {
                format!("rk45(abs_tol={abs_tol}, rel_tol={rel_tol})")
            }
        };
        put("method", method);
        put("step", self.integrator.step.to_string());
        put("t_end", self.integrator.t_end.to_string());
        put("sample_every", self.integrator.sample_every.to_string());
        put("lock_threshold", self.lock_threshold.to_string());
        put("tail_fraction", self.tail_fraction.to_string());
        put("seed", self.seed.to_string());
        put("count", self.count.to_string());
        put("starts", self.starts.to_string());
        put("out", self.out.display().to_string());
        m
    }
}

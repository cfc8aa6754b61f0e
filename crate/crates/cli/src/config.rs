//! Run configuration: a flat JSON object, optionally read from a file and
//! patched with `key=value` overrides before it is typed.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use nlsnet::scenarios::Model;
use nlsnet::trainer::InitKind;
use nlsnet::{LinearMode, Refine, Scenario, ScenarioName, SplitOrder};

/// Bad input from the user; exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomFunction {
    pub name: String,
    pub expr: String,
}

/// Every recognised key. Absent keys fall back to per-scenario defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,

    // Discretization.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_scale: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<String>,

    // Training.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_period: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_post_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halve_on_increase: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta_init: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub library: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom_library: Option<Vec<CustomFunction>>,

    // Refinement study.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<usize>>,

    // Landscape.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta1_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta2_range: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,

    // Verification.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gates: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inject_fault: Option<String>,
}

/// A `--set` value is JSON when it parses as JSON, otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Merges the file, the `--set` pairs and the explicit flags (in rising
/// precedence) and types the result.
pub fn load(path: Option<&Path>, sets: &[String], flags: Vec<(&str, Value)>) -> Result<RunConfig, ConfigError> {
    let mut obj = match path {
        None => Map::new(),
        Some(p) => {
            let text = std::fs::read_to_string(p).or_else(|e| bad(format!("cannot read {}: {e}", p.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return bad(format!("{} must hold a JSON object", p.display())),
                Err(e) => return bad(format!("{}: {e}", p.display())),
            }
        }
    };
    for s in sets {
        let Some((k, v)) = s.split_once('=') else {
            return bad(format!("--set expects key=value, got `{s}`"));
        };
        obj.insert(k.trim().to_string(), parse_value(v.trim()));
    }
    for (k, v) in flags {
        obj.insert(k.to_string(), v);
    }
    serde_json::from_value(Value::Object(obj)).or_else(|e| bad(e.to_string()))
}

impl RunConfig {
    pub fn scenario_name(&self, fallback: ScenarioName) -> Result<ScenarioName, ConfigError> {
        match &self.scenario {
            None => Ok(fallback),
            Some(s) => s.parse().map_err(|e: nlsnet::Error| ConfigError(e.to_string())),
        }
    }

    pub fn linear_mode(&self) -> Result<LinearMode, ConfigError> {
        match self.linear_mode.as_deref().unwrap_or("spectral") {
            "spectral" => Ok(LinearMode::Spectral),
            "direct-kernel" => Ok(LinearMode::DirectKernel),
            other => bad(format!("linear_mode `{other}` (expected spectral or direct-kernel)")),
        }
    }

    pub fn split_order(&self) -> Result<SplitOrder, ConfigError> {
        match self.order.as_deref().unwrap_or("strang") {
            "strang" => Ok(SplitOrder::Strang),
            "lie" => Ok(SplitOrder::Lie),
            other => bad(format!("order `{other}` (expected strang or lie)")),
        }
    }

    pub fn refine(&self) -> Result<Refine, ConfigError> {
        self.refine
            .as_deref()
            .unwrap_or("N")
            .parse()
            .map_err(|e: nlsnet::Error| ConfigError(e.to_string()))
    }

    pub fn init_kind(&self) -> Result<InitKind, ConfigError> {
        match self.init.as_deref().unwrap_or("zero") {
            "zero" => Ok(InitKind::Zero),
            "uniform" => Ok(InitKind::Uniform),
            other => bad(format!("init `{other}` (expected zero or uniform)")),
        }
    }

    /// Applies domain, grid, time and fault settings to the named scenario.
    pub fn build_scenario(&self, name: ScenarioName) -> Result<Scenario, ConfigError> {
        let mut s = Scenario::by_name(name);
        if self.full_scale == Some(true) {
            s = s.full_scale();
        }
        if let Some(m) = self.m {
            s = s.with_grid_size(m);
        }
        if self.a.is_some() || self.b.is_some() {
            let (a, b) = (self.a.unwrap_or(s.a), self.b.unwrap_or(s.b));
            s = s.with_domain(a, b);
        }
        match (self.dt, self.steps, self.final_time) {
            (Some(_), Some(_), Some(_)) => return bad("set at most two of dt, steps and final_time"),
            (Some(dt), Some(n), None) => s = s.with_steps(n).with_final_time(dt * n as f64),
            (Some(dt), None, t) => {
                if !(dt > 0.0 && dt.is_finite()) {
                    return bad("dt must be positive");
                }
                let t = t.unwrap_or(s.final_time);
                let n = (t / dt).round();
                if n < 1.0 || ((n * dt - t) / t).abs() > 1e-9 {
                    return bad(format!("final_time {t} is not a whole number of dt = {dt} steps"));
                }
                s = s.with_steps(n as usize).with_final_time(t);
            }
            (None, n, t) => {
                if let Some(n) = n {
                    s = s.with_steps(n);
                }
                if let Some(t) = t {
                    s = s.with_final_time(t);
                }
            }
        }
        if s.steps == 0 {
            return bad("steps must be at least 1");
        }
        if !(s.final_time > 0.0 && s.final_time.is_finite()) {
            return bad("final_time must be positive");
        }
        match self.inject_fault.as_deref() {
            None => {}
            Some("nonlinear-sign") => s = s.with_flipped_phase(),
            Some(other) => return bad(format!("inject_fault `{other}` (expected nonlinear-sign)")),
        }
        Ok(s)
    }

    /// Records the effective discretization of `s` so the copy written
    /// next to the outputs reproduces the run.
    pub fn resolve_scenario(&mut self, s: &Scenario) {
        self.scenario = Some(s.name.to_string());
        self.a = Some(s.a);
        self.b = Some(s.b);
        self.m = Some(s.m);
        self.steps = Some(s.steps);
        self.final_time = Some(s.final_time);
        self.dt = None;
        self.full_scale = None;
    }
}

/// Short physical description of a scenario for run logs.
pub fn describe(s: &Scenario) -> String {
    let eq = match s.model {
        Model::Single { beta, gamma, .. } => format!("beta {beta}, gamma {gamma}"),
        Model::Coupled { alpha1, alpha2, .. } => format!("coupled, alpha1 {alpha1}, alpha2 {alpha2}"),
    };
    format!(
        "{}: {eq}, domain [{}, {}], M {}, N {}, T {}",
        s.name, s.a, s.b, s.m, s.steps, s.final_time
    )
}

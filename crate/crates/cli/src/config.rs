use std::path::{Path, PathBuf};

use epigame_core::integrator::IntegratorConfig;
use epigame_core::model::{validate_classes, ClassSpec, ModelParams, ResponseSpec, State};
use epigame_core::trace::{InitialCondition, GRID_STEP};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[allow(clippy::enum_variant_names)] // the names are the config spelling
pub enum RateUnit {
    /// Dimensionless model time.
    #[default]
    PerUnit,
    PerHour,
    PerSecond,
}

impl RateUnit {
    /// Factor converting a configured rate to the internal unit.
    pub fn to_internal(self) -> f64 {
        match self {
            Self::PerUnit | Self::PerSecond => 1.0,
            Self::PerHour => 1.0 / 3600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub rate_unit: RateUnit,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<ResponseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrate: Option<IntegrateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basin: Option<BasinSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converge: Option<ConvergeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateSection {
    pub x0: [f64; 2],
    /// Points per axis of the `--vector-field` grid.
    #[serde(default = "default_field_n")]
    pub vector_field_n: usize,
}

fn default_field_n() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinSection {
    /// Points per axis; the grid is `k/(n-1)` restricted to the simplex.
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSpace {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logspace: Option<LogSpace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: u64,
    pub x0: [f64; 2],
    pub t_max: f64,
    pub sample_interval: f64,
    #[serde(default = "one")]
    pub runs: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    pub x0: [f64; 2],
    pub n_list: Vec<u64>,
    pub runs: u64,
    pub t_max: f64,
    pub sample_interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSection {
    /// Contact CSV, relative to the config file. `--trace` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub runs: u64,
    /// Seconds; defaults to 10% of the trace span.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient_cut: Option<f64>,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    pub initial: InitialCondition,
    /// Defaults to a single class using the top-level response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<ClassSpec>>,
}

fn default_grid_step() -> f64 {
    GRID_STEP
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params()?;
        if let Some(r) = &self.response {
            r.validate().map_err(|e| ConfigError(format!("response: {e}")))?;
        }
        if let Some(i) = &self.integrator {
            i.validate()
                .map_err(|e| ConfigError(format!("integrator: {e}")))?;
        }
        Ok(())
    }

    /// Rates in the internal unit.
    pub fn params(&self) -> Result<ModelParams, ConfigError> {
        let k = self.rate_unit.to_internal();
        ModelParams::new(self.beta * k, self.gamma * k, self.delta * k)
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn response(&self) -> Result<&ResponseSpec, ConfigError> {
        self.response
            .as_ref()
            .map_or_else(|| err("missing [response] table"), Ok)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        self.integrator.unwrap_or_default()
    }

    pub fn seed(&self, flag: Option<u64>) -> Result<u64, ConfigError> {
        match (flag, self.seed) {
            (Some(s), _) | (None, Some(s)) => Ok(s),
            (None, None) => err("missing field `seed`"),
        }
    }

    pub fn section<'a, T>(&self, value: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
        value
            .as_ref()
            .map_or_else(|| err(format!("missing [{name}] table")), Ok)
    }

    pub fn gammas(&self) -> Result<Vec<f64>, ConfigError> {
        let s = self.section(&self.sweep, "sweep")?;
        let k = self.rate_unit.to_internal();
        let raw = match (&s.gammas, &s.logspace) {
            (Some(g), None) => g.clone(),
            (None, Some(l)) => {
                if !(l.from > 0.0 && l.to > 0.0 && l.points >= 2) {
                    return err("sweep.logspace needs positive bounds and at least 2 points");
                }
                let (a, b) = (l.from.log10(), l.to.log10());
                (0..l.points)
                    .map(|j| 10f64.powf(a + (b - a) * j as f64 / (l.points - 1) as f64))
                    .collect()
            }
            _ => return err("sweep needs exactly one of `gammas` or `logspace`"),
        };
        if raw.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return err("sweep gammas must be non-negative and finite");
        }
        Ok(raw.into_iter().map(|g| g * k).collect())
    }

    pub fn trace_classes(&self) -> Result<Vec<ClassSpec>, ConfigError> {
        let t = self.section(&self.trace, "trace")?;
        let classes = match &t.classes {
            Some(c) => c.clone(),
            None => vec![ClassSpec {
                weight: 1.0,
                response: self.response()?.clone(),
            }],
        };
        validate_classes(&classes).map_err(|e| ConfigError(format!("trace.classes: {e}")))?;
        Ok(classes)
    }
}

pub fn state(x: [f64; 2], key: &str) -> Result<State, ConfigError> {
    State::new(x[0], x[1]).map_err(|e| ConfigError(format!("{key}: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "beta = 1.0\ngamma = 1.0\ndelta = 0.5\n[response]\nkind = \"step\"\ni_star = 0.2\n";

    #[test]
    fn parses_minimal() {
        let c = Config::parse(BASE).unwrap();
        assert_eq!(c.params().unwrap(), ModelParams::new(1.0, 1.0, 0.5).unwrap());
        assert_eq!(c.response().unwrap(), &ResponseSpec::step(0.2));
    }

    #[test]
    fn missing_beta_named() {
        let e = Config::parse("gamma = 1.0\ndelta = 0.5\n").unwrap_err();
        assert!(e.0.contains("beta"), "{e}");
    }

    #[test]
    fn unknown_key_rejected() {
        let e = Config::parse(&format!("{BASE}bogus = 3\n")).unwrap_err();
        assert!(e.0.contains("bogus"), "{e}");
    }

    #[test]
    fn invalid_rate_named() {
        let e = Config::parse("beta = -1.0\ngamma = 1.0\ndelta = 0.5\n").unwrap_err();
        assert!(e.0.contains("beta"), "{e}");
    }

    #[test]
    fn hourly_rates_converted() {
        let c = Config::parse("rate_unit = \"per_hour\"\nbeta = 1.0\ngamma = 6.0\ndelta = 0.5\n").unwrap();
        let p = c.params().unwrap();
        assert!((p.gamma - 6.0 / 3600.0).abs() < 1e-18);
    }

    #[test]
    fn logspace_endpoints() {
        let c = Config::parse(&format!(
            "{BASE}[sweep]\nlogspace = {{ from = 0.01, to = 100.0, points = 50 }}\n"
        ))
        .unwrap();
        let g = c.gammas().unwrap();
        assert_eq!(g.len(), 50);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[49] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let text = format!(
            "seed = 3\n{BASE}[trace]\nruns = 2\ninitial = {{ kind = \"single_infected\", infected_class = 1 }}\n\
             [[trace.classes]]\nweight = 0.2\nresponse = {{ kind = \"sigmoid\", i_star = 0.1, epsilon = 0.001 }}\n\
             [[trace.classes]]\nweight = 0.8\nresponse = {{ kind = \"sigmoid\", i_star = 0.9, epsilon = 0.001 }}\n"
        );
        let c = Config::parse(&text).unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let back: Config = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }
}

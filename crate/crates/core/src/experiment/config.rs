use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::baselines::{AblationSpec, GruConfig};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::koopman::LiftingConfig;
use crate::mpc::MpcConfig;
use crate::neural_mass::{ColumnModel, DoubleColumnParams, DriveNoise, JansenRitParams, SimulationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Single,
    Double,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::Single => "single",
            Case::Double => "double",
        }
    }

    pub fn channels(self) -> usize {
        match self {
            Case::Single => 1,
            Case::Double => 2,
        }
    }
}

impl std::str::FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Case::Single),
            "double" => Ok(Case::Double),
            other => Err(Error::Config(format!("unknown case {other:?}, expected single or double"))),
        }
    }
}

/// Integration and sampling settings shared by every simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSettings {
    pub burn_in: f64,
    pub step: f64,
    pub sample_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<DriveNoise>,
}

impl Default for PlantSettings {
    fn default() -> Self {
        Self { burn_in: 2.0, step: 1e-3, sample_rate: 50.0, noise: None }
    }
}

/// Training data length and the held-out segment that follows it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSettings {
    pub train_seconds: f64,
    pub test_seconds: f64,
}

impl Default for DataSettings {
    fn default() -> Self {
        Self { train_seconds: 60.0, test_seconds: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSettings {
    /// Runs per model, seeded `seed, seed + 1, ...`.
    pub seeds: usize,
    pub variants: Vec<AblationSpec>,
    pub include_gru: bool,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self { seeds: 10, variants: AblationSpec::ALL.to_vec(), include_gru: true }
    }
}

/// One file fully determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: Case,
    pub seed: u64,
    pub out: PathBuf,
    /// Emit figures after `evaluate`.
    pub plots: bool,
    pub single: JansenRitParams,
    pub double: DoubleColumnParams,
    pub plant: PlantSettings,
    pub data: DataSettings,
    pub koopman: LiftingConfig,
    pub gru: GruConfig,
    pub mpc: MpcConfig,
    /// Closed-loop run length including burn-in (s).
    pub control_duration: f64,
    pub evaluation: EvalConfig,
    pub ablation: AblationSettings,
}

impl ExperimentConfig {
    /// Defaults for a case; the double column re-fits the operator every 10 steps.
    pub fn for_case(case: Case) -> Self {
        let mut koopman = LiftingConfig { channels: case.channels(), ..Default::default() };
        if case == Case::Double {
            koopman.refit_period = 10;
        }
        Self {
            case,
            seed: 0,
            out: PathBuf::from("runs"),
            plots: true,
            single: JansenRitParams::default(),
            double: DoubleColumnParams::default(),
            plant: PlantSettings::default(),
            data: DataSettings::default(),
            koopman,
            gru: GruConfig { channels: case.channels(), ..Default::default() },
            mpc: MpcConfig::default(),
            control_duration: 10.0,
            evaluation: EvalConfig::default(),
            ablation: AblationSettings::default(),
        }
    }

    /// Parses a config file, resolving `include` chains, then applies
    /// `key.path=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => read_with_includes(p, &mut Vec::new())?,
            None => Value::Table(Default::default()),
        };
        for (key, value) in overrides {
            set_dotted(&mut table, key, value.clone())?;
        }
        Self::from_value(table)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if value.get("include").is_some() {
            return Err(Error::Config("include is only supported when loading from a file".into()));
        }
        Self::from_value(value)
    }

    fn from_value(value: Value) -> Result<Self> {
        let case = match value.get("case") {
            Some(Value::String(s)) => s.parse()?,
            Some(other) => return Err(Error::Config(format!("case must be a string, got {other}"))),
            None => Case::Single,
        };
        let mut base = Value::try_from(Self::for_case(case)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, value);
        let cfg: Self = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation(self.data_duration())?.validate().map_err(as_config)?;
        self.koopman.validate()?;
        self.gru.validate().map_err(as_config)?;
        self.mpc.validate()?;
        self.evaluation.validate()?;
        if self.koopman.channels != self.case.channels() || self.gru.channels != self.case.channels() {
            return Err(Error::Config(format!(
                "koopman.channels and gru.channels must equal {} for the {} case",
                self.case.channels(),
                self.case.name()
            )));
        }
        if self.gru.sample_rate != self.plant.sample_rate {
            return Err(Error::Config("gru.sample_rate must equal plant.sample_rate".into()));
        }
        if !(self.data.train_seconds > 0.0 && self.data.test_seconds > 0.0) {
            return Err(Error::Config("data.train_seconds and data.test_seconds must be > 0".into()));
        }
        let (train, test) = self.split_samples();
        let lookback = self.koopman.window.max(self.gru.lookback());
        if train < self.koopman.window + self.koopman.pred_horizon + self.koopman.batch_len.min(2) {
            return Err(Error::Config(format!("{train} training samples are too few for window {}", self.koopman.window)));
        }
        if train < self.gru.lookback() + self.gru.horizon {
            return Err(Error::Config(format!("{train} training samples are too few for the gru horizon {}", self.gru.horizon)));
        }
        if test <= lookback {
            return Err(Error::Config(format!("held-out segment of {test} samples does not exceed the lookback {lookback}")));
        }
        let start = self.mpc.start_time - self.plant.burn_in;
        if start * self.plant.sample_rate < self.koopman.window as f64 - 1e-9 {
            return Err(Error::Config(format!(
                "mpc.start_time must leave at least {} samples after burn-in",
                self.koopman.window
            )));
        }
        if !(self.control_duration > self.mpc.start_time) {
            return Err(Error::Config("control_duration must exceed mpc.start_time".into()));
        }
        if self.ablation.seeds == 0 {
            return Err(Error::Config("ablation.seeds must be >= 1".into()));
        }
        Ok(())
    }

    pub fn column_model(&self) -> ColumnModel {
        match self.case {
            Case::Single => ColumnModel::Single(self.single),
            Case::Double => ColumnModel::Double(self.double),
        }
    }

    pub fn simulation(&self, duration: f64) -> Result<SimulationConfig> {
        Ok(SimulationConfig {
            model: self.column_model(),
            duration,
            burn_in: self.plant.burn_in,
            step: self.plant.step,
            sample_rate: self.plant.sample_rate,
            noise: self.plant.noise,
        })
    }

    /// Burn-in plus training and held-out data.
    pub fn data_duration(&self) -> f64 {
        self.plant.burn_in + self.data.train_seconds + self.data.test_seconds
    }

    /// Post-burn-in sample counts of the training and held-out parts.
    pub fn split_samples(&self) -> (usize, usize) {
        let r = self.plant.sample_rate;
        ((self.data.train_seconds * r).round() as usize, (self.data.test_seconds * r).round() as usize)
    }

    pub fn koopman_for_seed(&self, seed: u64) -> LiftingConfig {
        LiftingConfig { seed, ..self.koopman }
    }

    pub fn gru_for_seed(&self, seed: u64) -> GruConfig {
        GruConfig { seed, ..self.gru }
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::Config(m),
        other => other,
    }
}

/// Deep merge: tables merge key-wise, everything else is replaced.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn read_with_includes(path: &Path, stack: &mut Vec<PathBuf>) -> Result<Value> {
    let canonical = path.canonicalize().map_err(|_| Error::Config(format!("cannot read config {}", path.display())))?;
    if stack.contains(&canonical) {
        return Err(Error::Config(format!("include cycle through {}", path.display())));
    }
    stack.push(canonical);
    let text = std::fs::read_to_string(path)?;
    let mut value: Value = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let includes = match value.as_table_mut().and_then(|t| t.remove("include")) {
        None => Vec::new(),
        Some(Value::String(s)) => vec![s],
        Some(Value::Array(a)) => a
            .into_iter()
            .map(|v| v.as_str().map(str::to_owned).ok_or_else(|| Error::Config("include entries must be strings".into())))
            .collect::<Result<_>>()?,
        Some(_) => return Err(Error::Config("include must be a string or an array of strings".into())),
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut merged = Value::Table(Default::default());
    for inc in includes {
        merge(&mut merged, read_with_includes(&dir.join(inc), stack)?);
    }
    merge(&mut merged, value);
    stack.pop();
    Ok(merged)
}

/// Parses `a.b.c=value`; the value is read as TOML, falling back to a bare string.
pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text.split_once('=').ok_or_else(|| Error::Config(format!("override {text:?} is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override {text:?} has an empty key")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()));
    Ok((key.to_owned(), value))
}

fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| Error::Config(format!("{key}: {part} is not a table")))?;
        node = table.entry(part.to_string()).or_insert_with(|| Value::Table(Default::default()));
    }
    let table = node.as_table_mut().ok_or_else(|| Error::Config(format!("{key}: parent is not a table")))?;
    table.insert(parts[parts.len() - 1].to_owned(), value);
    Ok(())
}

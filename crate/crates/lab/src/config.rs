//! Experiment configuration files.
//!
//! A config is a single JSON object. Unknown keys are rejected everywhere,
//! including inside `params` and `tolerances`, and every validation error
//! names the line it refers to.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use mtlab_core::hilbert::{Boundary, DEFAULT_MAX_DIM};
use mtlab_core::io::hamiltonian_from_json;
use mtlab_core::thermal::{Hamiltonian, PresetSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GhzSuite,
    Thm1Certify,
    Thm2Certify,
    Thm3Pipeline,
    CmiDecay,
    AreaLawSaturation,
    BpLocality,
    ArakiLocality,
    RecoverSingle,
    RecoverRus,
    PrepareDepth2,
    #[serde(rename = "conjecture-1d")]
    Conjecture1d,
}

impl Experiment {
    pub const ALL: [Experiment; 12] = [
        Experiment::GhzSuite,
        Experiment::Thm1Certify,
        Experiment::Thm2Certify,
        Experiment::Thm3Pipeline,
        Experiment::CmiDecay,
        Experiment::AreaLawSaturation,
        Experiment::BpLocality,
        Experiment::ArakiLocality,
        Experiment::RecoverSingle,
        Experiment::RecoverRus,
        Experiment::PrepareDepth2,
        Experiment::Conjecture1d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GhzSuite => "ghz-suite",
            Experiment::Thm1Certify => "thm1-certify",
            Experiment::Thm2Certify => "thm2-certify",
            Experiment::Thm3Pipeline => "thm3-pipeline",
            Experiment::CmiDecay => "cmi-decay",
            Experiment::AreaLawSaturation => "area-law-saturation",
            Experiment::BpLocality => "bp-locality",
            Experiment::ArakiLocality => "araki-locality",
            Experiment::RecoverSingle => "recover-single",
            Experiment::RecoverRus => "recover-rus",
            Experiment::PrepareDepth2 => "prepare-depth2",
            Experiment::Conjecture1d => "conjecture-1d",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Preset name; ignored when `file` is set.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub n: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    /// Hamiltonian document, relative to the config file.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

fn default_boundary() -> Boundary {
    Boundary::Open
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    model: Option<ModelConfig>,
    #[serde(default)]
    betas: Vec<f64>,
    #[serde(default)]
    params: Option<Box<RawValue>>,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    output: OutputConfig,
    #[serde(default = "default_max_dim")]
    max_dim: usize,
    #[serde(default = "default_workers")]
    workers: usize,
}

fn default_max_dim() -> usize {
    DEFAULT_MAX_DIM
}

fn default_workers() -> usize {
    1
}

/// A validated experiment configuration.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub name: Option<String>,
    pub seed: u64,
    pub model: Option<ModelConfig>,
    pub betas: Vec<f64>,
    /// Raw `params` object; parsed by the experiment with [`ExperimentConfig::params`].
    params_text: String,
    params_line: usize,
    /// User overrides only; experiments supply their own defaults.
    pub tolerances: BTreeMap<String, f64>,
    pub output: OutputConfig,
    pub max_dim: usize,
    pub workers: usize,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
    origin: String,
    text: String,
}

/// Command-line overrides applied after loading.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_dim: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{origin}: {msg}")]
    Parse { origin: String, msg: String },
    #[error("{origin}:{line}: {msg}")]
    Invalid { origin: String, line: usize, msg: String },
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse_with_origin(&text, &path.display().to_string(), base)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with_origin(text, "<config>", PathBuf::new())
    }

    fn parse_with_origin(text: &str, origin: &str, base_dir: PathBuf) -> Result<Self, ConfigError> {
        // serde_json errors already carry "line L column C".
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse { origin: origin.to_string(), msg: e.to_string() })?;
        let (params_text, params_line) = match &raw.params {
            Some(p) => {
                let t = p.get().to_string();
                let line = text.find(&t).map_or(1, |at| line_at(text, at));
                (t, line)
            }
            None => ("{}".to_string(), 1),
        };
        let cfg = ExperimentConfig {
            experiment: raw.experiment,
            name: raw.name,
            seed: raw.seed,
            model: raw.model,
            betas: raw.betas,
            params_text,
            params_line,
            tolerances: raw.tolerances,
            output: raw.output,
            max_dim: raw.max_dim,
            workers: raw.workers,
            base_dir,
            origin: origin.to_string(),
            text: text.to_string(),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let at = |key: &str| self.key_line(key);
        if self.workers == 0 {
            return Err(self.invalid(at("workers"), "workers must be at least 1"));
        }
        if let Some(b) = self.betas.iter().find(|b| !b.is_finite() || **b < 0.0) {
            return Err(self.invalid(at("betas"), format!("inverse temperature {b} must be finite and non-negative")));
        }
        for (k, v) in &self.tolerances {
            if !v.is_finite() || *v < 0.0 {
                return Err(self.invalid(at(k), format!("tolerance {k:?} = {v} must be finite and non-negative")));
            }
        }
        if let Some(m) = &self.model {
            if m.file.is_none() && m.preset.is_none() {
                return Err(self.invalid(at("model"), "model needs either a preset or a file"));
            }
            if let Some(p) = &m.preset {
                if !mtlab_core::thermal::PRESETS.contains(&p.as_str()) {
                    let known = mtlab_core::thermal::PRESETS.join(", ");
                    return Err(self.invalid(at("preset"), format!("unknown preset {p:?}; known presets: {known}")));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = o.max_dim {
            self.max_dim = d;
        }
        if let Some(w) = o.workers {
            self.workers = w.max(1);
        }
        if let Some(out) = &o.out {
            self.output.dir = Some(out.clone());
        }
    }

    pub fn invalid(&self, line: usize, msg: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { origin: self.origin.clone(), line, msg: msg.into() }
    }

    /// Deserializes `params` into an experiment's parameter struct.
    pub fn params<T: DeserializeOwned>(&self) -> Result<T, ConfigError> {
        serde_json::from_str(&self.params_text).map_err(|e| {
            let line = self.params_line + e.line().saturating_sub(1);
            let full = e.to_string();
            let msg = strip_position(&full);
            self.invalid(line, format!("params: {msg}"))
        })
    }

    /// Merges user tolerances over `defaults`; unknown keys are errors.
    pub fn tolerances_over(&self, defaults: &[(&str, f64)]) -> Result<BTreeMap<String, f64>, ConfigError> {
        let mut out: BTreeMap<String, f64> = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in &self.tolerances {
            if !out.contains_key(k) {
                let known: Vec<&str> = defaults.iter().map(|d| d.0).collect();
                return Err(self.invalid(
                    self.key_line(k),
                    format!("unknown tolerance {k:?} for {}; known: {}", self.experiment, known.join(", ")),
                ));
            }
            out.insert(k.clone(), *v);
        }
        Ok(out)
    }

    fn key_line(&self, key: &str) -> usize {
        find_key_line(&self.text, key)
    }

    /// Builds the configured Hamiltonian under the dimension cap.
    pub fn hamiltonian(&self) -> Result<Hamiltonian, ConfigError> {
        let Some(m) = &self.model else {
            return Err(self.invalid(1, format!("{} needs a model", self.experiment)));
        };
        let h = match &m.file {
            Some(f) => {
                let path = self.base_dir.join(f);
                let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
                hamiltonian_from_json(&text, self.max_dim).map_err(|e| self.invalid(self.key_line("file"), e.to_string()))?
            }
            None => self.preset_sized(m.n)?,
        };
        if h.geometry().n() != m.n {
            return Err(self.invalid(self.key_line("n"), format!("model file has {} sites, config says n = {}", h.geometry().n(), m.n)));
        }
        Ok(h)
    }

    /// The configured preset on a chain of `n` sites, for experiments that sweep the length.
    pub fn preset_sized(&self, n: usize) -> Result<Hamiltonian, ConfigError> {
        let Some(m) = &self.model else {
            return Err(self.invalid(1, format!("{} needs a model", self.experiment)));
        };
        let Some(name) = m.preset.as_deref().filter(|_| m.file.is_none()) else {
            return Err(self.invalid(self.key_line("model"), format!("{} sweeps the chain length and needs a preset model", self.experiment)));
        };
        let params: Vec<(&str, f64)> = m.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let spec = PresetSpec::new(name, &params, m.seed);
        Hamiltonian::from_preset_capped(&spec, n, m.boundary, self.max_dim).map_err(|e| self.invalid(self.key_line("model"), e.to_string()))
    }

    /// `betas`, or `default` when none are configured.
    pub fn betas_or(&self, default: &[f64]) -> Vec<f64> {
        if self.betas.is_empty() {
            default.to_vec()
        } else {
            self.betas.clone()
        }
    }

    /// Output file stem: the configured name or the experiment name.
    pub fn stem(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.experiment.name().to_string())
    }

    /// Canonical JSON of everything that affects results. Output location and
    /// worker count are excluded.
    pub fn canonical(&self) -> Value {
        let params: Value = serde_json::from_str(&self.params_text).unwrap_or(Value::Null);
        serde_json::json!({
            "experiment": self.experiment,
            "seed": self.seed,
            "model": self.model,
            "betas": self.betas,
            "params": params,
            "tolerances": self.tolerances,
            "max_dim": self.max_dim,
        })
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn line_at(text: &str, byte: usize) -> usize {
    text[..byte].bytes().filter(|&b| b == b'\n').count() + 1
}

fn find_key_line(text: &str, key: &str) -> usize {
    text.find(&format!("\"{key}\"")).map_or(1, |at| line_at(text, at))
}

fn strip_position(msg: &str) -> &str {
    msg.find(" at line ").map_or(msg, |i| &msg[..i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            let s = serde_json::to_string(&e).unwrap();
            assert_eq!(s, format!("\"{}\"", e.name()));
            assert_eq!(serde_json::from_str::<Experiment>(&s).unwrap(), e);
        }
    }

    #[test]
    fn errors_name_lines() {
        let text = "{\n  \"experiment\": \"ghz-suite\",\n  \"bogus\": 1\n}";
        let err = ExperimentConfig::parse(text).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");

        let text = "{\n  \"experiment\": \"ghz-suite\",\n  \"params\": {\n    \"sizes\": \"four\"\n  }\n}";
        let cfg = ExperimentConfig::parse(text).unwrap();
        #[derive(Deserialize, Debug)]
        #[allow(dead_code)]
        struct P {
            sizes: Vec<usize>,
        }
        let err = cfg.params::<P>().unwrap_err().to_string();
        assert!(err.starts_with("<config>:4:"), "{err}");
    }

    #[test]
    fn unknown_tolerance_is_rejected() {
        let cfg = ExperimentConfig::parse(r#"{"experiment": "ghz-suite", "tolerances": {"cmi": 1e-6, "nope": 1}}"#).unwrap();
        assert!(cfg.tolerances_over(&[("cmi", 1e-9)]).is_err());
        let cfg = ExperimentConfig::parse(r#"{"experiment": "ghz-suite", "tolerances": {"cmi": 1e-6}}"#).unwrap();
        assert_eq!(cfg.tolerances_over(&[("cmi", 1e-9)]).unwrap()["cmi"], 1e-6);
    }

    #[test]
    fn hash_ignores_workers_and_formatting() {
        let a = ExperimentConfig::parse(r#"{"experiment":"ghz-suite","params":{"sizes":[4]},"workers":3}"#).unwrap();
        let b = ExperimentConfig::parse("{\n \"experiment\": \"ghz-suite\",\n \"params\": { \"sizes\": [ 4 ] }\n}").unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = b.clone();
        c.apply(&Overrides { seed: Some(5), ..Default::default() });
        assert_ne!(c.hash(), b.hash());
    }

    #[test]
    fn model_caps_and_presets() {
        let cfg = ExperimentConfig::parse(r#"{"experiment":"cmi-decay","model":{"preset":"tfim","n":13}}"#).unwrap();
        assert!(cfg.hamiltonian().is_err());
        let err = ExperimentConfig::parse(r#"{"experiment":"cmi-decay","model":{"preset":"potts","n":3}}"#).unwrap_err();
        assert!(err.to_string().contains("unknown preset"));
        let cfg = ExperimentConfig::parse(r#"{"experiment":"cmi-decay","model":{"preset":"tfim","n":4,"params":{"g":0.5}}}"#).unwrap();
        assert_eq!(cfg.hamiltonian().unwrap().geometry().n(), 4);
    }
}

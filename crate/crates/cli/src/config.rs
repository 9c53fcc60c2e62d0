//! Experiment configuration: JSON file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use lncsim::schemes::SchemeError;
use lncsim::session::default_max_slots;
use lncsim::sfm::{self, SfmError};
use lncsim::{ChannelSpec, Field, FieldSpec, MemoryMode, SchemeSpec, Sfm};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_TRIALS: usize = 1000;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error("bad SFM source `{source_str}`: {message}")]
    Source { source_str: String, message: String },
    #[error(transparent)]
    Sfm(#[from] SfmError),
    #[error("scheme: {0}")]
    Scheme(#[from] SchemeError),
    #[error("memory mode: {0}")]
    Memory(String),
    #[error("field: {0}")]
    Field(String),
    #[error("erasure probabilities: {0}")]
    Channel(String),
    #[error("{0}")]
    Invalid(String),
}

/// A single probability for every receiver, or one per receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Erasure {
    Uniform(f64),
    PerReceiver(Vec<f64>),
}

impl std::str::FromStr for Erasure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
        let parts = parts.map_err(|e| format!("`{s}`: {e}"))?;
        Ok(match parts.as_slice() {
            [p] => Erasure::Uniform(*p),
            _ => Erasure::PerReceiver(parts),
        })
    }
}

/// Settings as they appear in a config file or on the command line. Every
/// field is optional so that flags can be layered over a file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Path to an SFM file, or `gen:<name>[:key=value,...]`.
    pub sfm: Option<String>,
    pub scheme: Option<String>,
    pub pe: Option<Erasure>,
    /// Field order; defaults to the scheme's natural field.
    pub field: Option<u32>,
    pub memory: Option<String>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub max_slots: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Json { path: path.into(), source })
    }

    /// Values set in `flags` win.
    pub fn overlay(self, flags: ExperimentConfig) -> Self {
        Self {
            sfm: flags.sfm.or(self.sfm),
            scheme: flags.scheme.or(self.scheme),
            pe: flags.pe.or(self.pe),
            field: flags.field.or(self.field),
            memory: flags.memory.or(self.memory),
            trials: flags.trials.or(self.trials),
            seed: flags.seed.or(self.seed),
            max_slots: flags.max_slots.or(self.max_slots),
            out: flags.out.or(self.out),
        }
    }

    pub fn resolve(&self) -> Result<Experiment, ConfigError> {
        let source = self.sfm.clone().ok_or(ConfigError::Missing("sfm"))?;
        let sfm = load_sfm(&source)?;
        let scheme_str = self.scheme.clone().ok_or(ConfigError::Missing("scheme"))?;
        let scheme: SchemeSpec = scheme_str.parse()?;
        let memory: MemoryMode = match &self.memory {
            Some(m) => m.parse().map_err(ConfigError::Memory)?,
            None => MemoryMode::default(),
        };
        let order = self.field.unwrap_or_else(|| scheme.default_field_order());
        let field = field_of_order(order)?;
        let n = sfm.n_receivers();
        let probs = match self.pe.clone().unwrap_or(Erasure::Uniform(0.0)) {
            Erasure::Uniform(p) => vec![p; n],
            Erasure::PerReceiver(ps) if ps.len() == n => ps,
            Erasure::PerReceiver(ps) => {
                return Err(ConfigError::Channel(format!("{} values for {n} receivers", ps.len())))
            }
        };
        let channel = ChannelSpec::new(probs).map_err(|e| ConfigError::Channel(e.to_string()))?;
        let trials = self.trials.unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(ConfigError::Invalid("trials must be positive".into()));
        }
        let max_slots = self.max_slots.unwrap_or_else(|| default_max_slots(sfm.k_packets(), &channel));
        if max_slots == 0 {
            return Err(ConfigError::Invalid("max_slots must be positive".into()));
        }
        let resolved = ExperimentConfig {
            sfm: Some(source),
            scheme: Some(scheme.to_string()),
            pe: Some(self.pe.clone().unwrap_or(Erasure::Uniform(0.0))),
            field: Some(order),
            memory: Some(memory.to_string()),
            trials: Some(trials),
            seed: Some(self.seed.unwrap_or(0)),
            max_slots: Some(max_slots),
            // where results go does not change them
            out: None,
        };
        Ok(Experiment {
            fingerprint: fingerprint(&resolved, &sfm),
            resolved,
            sfm,
            scheme,
            memory,
            field,
            channel,
            trials,
            seed: self.seed.unwrap_or(0),
            max_slots,
            out: self.out.clone().unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub resolved: ExperimentConfig,
    pub fingerprint: String,
    pub sfm: Sfm,
    pub scheme: SchemeSpec,
    pub memory: MemoryMode,
    pub field: Field,
    pub channel: ChannelSpec,
    pub trials: usize,
    pub seed: u64,
    pub max_slots: usize,
    pub out: PathBuf,
}

/// Hash of the resolved settings, the matrix itself and the code version.
pub fn fingerprint(resolved: &ExperimentConfig, sfm: &Sfm) -> String {
    let mut h = Sha256::new();
    h.update(concat!("lncsim ", env!("CARGO_PKG_VERSION"), "\n"));
    h.update(serde_json::to_vec(resolved).expect("config serializes"));
    h.update(sfm.to_string());
    hex::encode(&h.finalize()[..8])
}

pub fn field_of_order(q: u32) -> Result<Field, ConfigError> {
    FieldSpec::for_order(q)
        .map(Field::new)
        .map_err(|_| ConfigError::Field(format!("unsupported field order {q} (use 2, 4, 16, 256 or 65536)")))
}

/// Build the matrix named by an SFM source string.
pub fn load_sfm(source: &str) -> Result<Sfm, ConfigError> {
    let Some(spec) = source.strip_prefix("gen:") else {
        let text =
            fs::read_to_string(source).map_err(|e| ConfigError::Io { path: source.into(), source: e })?;
        return Ok(sfm::parse_sfm(&text)?);
    };
    let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
    let params = GenParams::parse(params).map_err(|message| ConfigError::Source {
        source_str: source.into(),
        message,
    })?;
    generate(name, &params).map_err(|e| match e {
        ConfigError::Invalid(message) => ConfigError::Source { source_str: source.into(), message },
        other => other,
    })
}

/// Generator parameters; unset ones fall back to per-generator defaults.
#[derive(Debug, Clone, Default)]
pub struct GenParams {
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub w1: Option<usize>,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
}

impl GenParams {
    /// `k=4,m=2` style.
    pub fn parse(s: &str) -> Result<Self, String> {
        let mut out = GenParams::default();
        for kv in s.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
            let (key, value) = kv.split_once('=').ok_or_else(|| format!("expected key=value, got `{kv}`"))?;
            let bad = |e: &dyn std::fmt::Display| format!("{key}: {e}");
            match key.trim() {
                "k" => out.k = Some(value.parse().map_err(|e| bad(&e))?),
                "m" => out.m = Some(value.parse().map_err(|e| bad(&e))?),
                "w1" => out.w1 = Some(value.parse().map_err(|e| bad(&e))?),
                "n" => out.n = Some(value.parse().map_err(|e| bad(&e))?),
                "p" => out.p = Some(value.parse().map_err(|e| bad(&e))?),
                "seed" => out.seed = Some(value.parse().map_err(|e| bad(&e))?),
                other => return Err(format!("unknown parameter `{other}`")),
            }
        }
        Ok(out)
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(v) = self.k {
            parts.push(format!("k={v}"));
        }
        if let Some(v) = self.m {
            parts.push(format!("m={v}"));
        }
        if let Some(v) = self.w1 {
            parts.push(format!("w1={v}"));
        }
        if let Some(v) = self.n {
            parts.push(format!("n={v}"));
        }
        if let Some(v) = self.p {
            parts.push(format!("p={v}"));
        }
        if let Some(v) = self.seed {
            parts.push(format!("seed={v}"));
        }
        parts.join(",")
    }
}

pub const GENERATORS: &[&str] = &["theorem2", "a1", "a2", "theorem5", "random"];

pub fn generate(name: &str, p: &GenParams) -> Result<Sfm, ConfigError> {
    let need = |v: Option<usize>, key: &str| v.ok_or_else(|| ConfigError::Invalid(format!("{name} needs {key}")));
    Ok(match name {
        "theorem2" => sfm::two_packet_triangle(),
        "a1" => sfm::pair_wants(need(p.k, "k")?)?,
        "a2" => sfm::pair_and_singleton_wants(need(p.k, "k")?, need(p.m, "m")?)?,
        "theorem5" => sfm::dominant_block(need(p.w1, "w1")?, need(p.n, "n")?)?,
        "random" => sfm::random_sfm(
            need(p.n, "n")?,
            need(p.k, "k")?,
            p.p.unwrap_or(0.5),
            p.seed.unwrap_or(0),
        )?,
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown generator `{other}` (known: {})",
                GENERATORS.join(", ")
            )))
        }
    })
}

//! Plain-text experiment files.
//!
//! The format is one `key = value` pair per line, with `#` comment lines and
//! blank lines ignored. Keys are dotted paths; unknown keys and keys that do
//! not apply to the selected law kinds are rejected. [`write_experiment`]
//! emits every applicable key, so a written file parses back to an equal
//! [`ExperimentSpec`].
//!
//! ```text
//! model.lambda = 1
//! model.offspring.kind = twopoint
//! model.offspring.p0 = 0.2
//! model.offspring.k = 2
//! model.displacement.kind = deterministic
//! model.displacement.d = 1
//! checkpoints = 1,2,4
//! replicates = 10000
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::levy::{JumpLaw, LevySpec};
use crate::model::{Coupling, DisplacementLaw, ModelConfig, ModelError, OffspringLaw};
use crate::oracle::MomentVariant;
use crate::sim;
use crate::tolerances::DEFAULT_POPULATION_CAP;

pub const DEFAULT_CHECKPOINTS: [f64; 3] = [1.0, 2.0, 4.0];
pub const DEFAULT_REPLICATES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("duplicate key `{key}`")]
    DuplicateKey { key: String },
    #[error("unrecognized or inapplicable key `{key}`")]
    UnknownKey { key: String },
    #[error("missing required key `{key}`")]
    MissingKey { key: &'static str },
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A full experiment: the model plus run parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub model: ModelConfig,
    pub checkpoints: Vec<f64>,
    pub replicates: usize,
    pub cap: usize,
    pub seed: Option<u64>,
    pub variant: Option<MomentVariant>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Wraps a model with the default run parameters.
    pub fn with_model(model: ModelConfig) -> Self {
        ExperimentSpec {
            model,
            checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
            replicates: DEFAULT_REPLICATES,
            cap: DEFAULT_POPULATION_CAP,
            seed: None,
            variant: None,
            output_dir: None,
        }
    }
}

struct KeyTable {
    entries: BTreeMap<String, (String, usize)>,
}

impl KeyTable {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or(ConfigError::Syntax { line })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if entries.insert(key.clone(), (value, line)).is_some() {
                return Err(ConfigError::DuplicateKey { key });
            }
        }
        Ok(KeyTable { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(value, _)| value)
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.take(key)
            .map(|v| {
                v.parse::<f64>().map_err(|e| ConfigError::InvalidValue {
                    key: key.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    fn require_f64(&mut self, key: &'static str) -> Result<f64, ConfigError> {
        self.take_f64(key)?.ok_or(ConfigError::MissingKey { key })
    }

    fn take_u64(&mut self, key: &str) -> Result<Option<u64>, ConfigError> {
        self.take(key)
            .map(|v| {
                v.parse::<u64>().map_err(|e| ConfigError::InvalidValue {
                    key: key.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    fn take_u32(&mut self, key: &str) -> Result<Option<u32>, ConfigError> {
        self.take(key)
            .map(|v| {
                v.parse::<u32>().map_err(|e| ConfigError::InvalidValue {
                    key: key.to_string(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, _)) => Err(ConfigError::UnknownKey { key }),
        }
    }
}

fn require_u32(table: &mut KeyTable, key: &'static str) -> Result<u32, ConfigError> {
    table.take_u32(key)?.ok_or(ConfigError::MissingKey { key })
}

fn parse_offspring(table: &mut KeyTable) -> Result<OffspringLaw, ConfigError> {
    let key = "model.offspring.kind";
    let kind = table.take(key).ok_or(ConfigError::MissingKey { key })?;
    match kind.as_str() {
        "deterministic" => Ok(OffspringLaw::Deterministic {
            k: require_u32(table, "model.offspring.k")?,
        }),
        "twopoint" => Ok(OffspringLaw::TwoPoint {
            p0: table
                .take_f64("model.offspring.p0")?
                .ok_or(ConfigError::MissingKey {
                    key: "model.offspring.p0",
                })?,
            k: require_u32(table, "model.offspring.k")?,
        }),
        "geometric" => Ok(OffspringLaw::Geometric {
            mean: table
                .take_f64("model.offspring.mean")?
                .ok_or(ConfigError::MissingKey {
                    key: "model.offspring.mean",
                })?,
        }),
        other => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            reason: format!("unknown offspring kind `{other}`"),
        }),
    }
}

fn parse_displacement(table: &mut KeyTable) -> Result<DisplacementLaw, ConfigError> {
    let key = "model.displacement.kind";
    let kind = table.take(key).unwrap_or_else(|| "zero".to_string());
    match kind.as_str() {
        "zero" => Ok(DisplacementLaw::Zero),
        "deterministic" => Ok(DisplacementLaw::Deterministic {
            d: table
                .take_f64("model.displacement.d")?
                .ok_or(ConfigError::MissingKey {
                    key: "model.displacement.d",
                })?,
        }),
        "gaussian" => Ok(DisplacementLaw::Gaussian {
            mean: table.take_f64("model.displacement.mean")?.unwrap_or(0.0),
            var: table
                .take_f64("model.displacement.var")?
                .ok_or(ConfigError::MissingKey {
                    key: "model.displacement.var",
                })?,
        }),
        "poisson" => Ok(DisplacementLaw::Poisson {
            mean: table
                .take_f64("model.displacement.mean")?
                .ok_or(ConfigError::MissingKey {
                    key: "model.displacement.mean",
                })?,
        }),
        other => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            reason: format!("unknown displacement kind `{other}`"),
        }),
    }
}

fn parse_coupling(table: &mut KeyTable) -> Result<Coupling, ConfigError> {
    let key = "model.displacement.coupling";
    match table.take(key).as_deref() {
        None | Some("iid") => Ok(Coupling::Iid),
        Some("shared") => Ok(Coupling::Shared),
        Some(other) => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            reason: format!("expected `iid` or `shared`, got `{other}`"),
        }),
    }
}

fn parse_jump(table: &mut KeyTable) -> Result<JumpLaw, ConfigError> {
    let key = "model.motion.jump.kind";
    let kind = table.take(key).unwrap_or_else(|| "zero".to_string());
    match kind.as_str() {
        "zero" => Ok(JumpLaw::Zero),
        "deterministic" => Ok(JumpLaw::Deterministic {
            j: table
                .take_f64("model.motion.jump.j")?
                .ok_or(ConfigError::MissingKey {
                    key: "model.motion.jump.j",
                })?,
        }),
        "gaussian" => Ok(JumpLaw::Gaussian {
            mean: table.take_f64("model.motion.jump.mean")?.unwrap_or(0.0),
            var: table
                .take_f64("model.motion.jump.var")?
                .ok_or(ConfigError::MissingKey {
                    key: "model.motion.jump.var",
                })?,
        }),
        other => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            reason: format!("unknown jump kind `{other}`"),
        }),
    }
}

fn parse_checkpoints(table: &mut KeyTable) -> Result<Vec<f64>, ConfigError> {
    let key = "checkpoints";
    let Some(raw) = table.take(key) else {
        return Ok(DEFAULT_CHECKPOINTS.to_vec());
    };
    let grid = parse_checkpoint_list(&raw).map_err(|reason| ConfigError::InvalidValue {
        key: key.to_string(),
        reason,
    })?;
    Ok(grid)
}

/// Parses a comma-separated checkpoint grid and validates it.
pub fn parse_checkpoint_list(raw: &str) -> Result<Vec<f64>, String> {
    let grid: Vec<f64> = raw
        .split(',')
        .map(|piece| piece.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    sim::validate_checkpoints(&grid).map_err(|e| e.to_string())?;
    Ok(grid)
}

fn parse_variant(table: &mut KeyTable) -> Result<Option<MomentVariant>, ConfigError> {
    let key = "variant";
    match table.take(key).as_deref() {
        None => Ok(None),
        Some("paper") => Ok(Some(MomentVariant::Paper)),
        Some("corrected") => Ok(Some(MomentVariant::Corrected)),
        Some(other) => Err(ConfigError::InvalidValue {
            key: key.to_string(),
            reason: format!("expected `paper` or `corrected`, got `{other}`"),
        }),
    }
}

/// Parses and validates an experiment file.
pub fn parse_experiment(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let mut table = KeyTable::parse(text)?;

    let lambda = table.require_f64("model.lambda")?;
    let offspring = parse_offspring(&mut table)?;
    let displacement = parse_displacement(&mut table)?;
    let coupling = parse_coupling(&mut table)?;
    let motion = LevySpec {
        drift: table.take_f64("model.motion.drift")?.unwrap_or(0.0),
        diffusion_var: table.take_f64("model.motion.diffusion_var")?.unwrap_or(0.0),
        jump_rate: table.take_f64("model.motion.jump_rate")?.unwrap_or(0.0),
        jump: parse_jump(&mut table)?,
    };
    let model = ModelConfig {
        lambda,
        offspring,
        displacement,
        coupling,
        motion,
    };

    let checkpoints = parse_checkpoints(&mut table)?;
    let replicates = table
        .take_u64("replicates")?
        .map(|v| v as usize)
        .unwrap_or(DEFAULT_REPLICATES);
    let cap = table
        .take_u64("cap")?
        .map(|v| v as usize)
        .unwrap_or(DEFAULT_POPULATION_CAP);
    let seed = table.take_u64("seed")?;
    let variant = parse_variant(&mut table)?;
    let output_dir = table.take("output_dir").map(PathBuf::from);

    table.finish()?;
    model.validate()?;
    Ok(ExperimentSpec {
        model,
        checkpoints,
        replicates,
        cap,
        seed,
        variant,
        output_dir,
    })
}

fn push_kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    out.push_str(&format!("{key} = {value}\n"));
}

/// Renders an experiment as a parseable file listing every applicable key.
pub fn write_experiment(spec: &ExperimentSpec) -> String {
    let mut out = String::new();
    let model = &spec.model;
    push_kv(&mut out, "model.lambda", model.lambda);
    match &model.offspring {
        OffspringLaw::Deterministic { k } => {
            push_kv(&mut out, "model.offspring.kind", "deterministic");
            push_kv(&mut out, "model.offspring.k", k);
        }
        OffspringLaw::TwoPoint { p0, k } => {
            push_kv(&mut out, "model.offspring.kind", "twopoint");
            push_kv(&mut out, "model.offspring.p0", p0);
            push_kv(&mut out, "model.offspring.k", k);
        }
        OffspringLaw::Geometric { mean } => {
            push_kv(&mut out, "model.offspring.kind", "geometric");
            push_kv(&mut out, "model.offspring.mean", mean);
        }
    }
    match &model.displacement {
        DisplacementLaw::Zero => push_kv(&mut out, "model.displacement.kind", "zero"),
        DisplacementLaw::Deterministic { d } => {
            push_kv(&mut out, "model.displacement.kind", "deterministic");
            push_kv(&mut out, "model.displacement.d", d);
        }
        DisplacementLaw::Gaussian { mean, var } => {
            push_kv(&mut out, "model.displacement.kind", "gaussian");
            push_kv(&mut out, "model.displacement.mean", mean);
            push_kv(&mut out, "model.displacement.var", var);
        }
        DisplacementLaw::Poisson { mean } => {
            push_kv(&mut out, "model.displacement.kind", "poisson");
            push_kv(&mut out, "model.displacement.mean", mean);
        }
    }
    let coupling = match model.coupling {
        Coupling::Iid => "iid",
        Coupling::Shared => "shared",
    };
    push_kv(&mut out, "model.displacement.coupling", coupling);
    push_kv(&mut out, "model.motion.drift", model.motion.drift);
    push_kv(
        &mut out,
        "model.motion.diffusion_var",
        model.motion.diffusion_var,
    );
    push_kv(&mut out, "model.motion.jump_rate", model.motion.jump_rate);
    match &model.motion.jump {
        JumpLaw::Zero => push_kv(&mut out, "model.motion.jump.kind", "zero"),
        JumpLaw::Deterministic { j } => {
            push_kv(&mut out, "model.motion.jump.kind", "deterministic");
            push_kv(&mut out, "model.motion.jump.j", j);
        }
        JumpLaw::Gaussian { mean, var } => {
            push_kv(&mut out, "model.motion.jump.kind", "gaussian");
            push_kv(&mut out, "model.motion.jump.mean", mean);
            push_kv(&mut out, "model.motion.jump.var", var);
        }
    }

    let grid: Vec<String> = spec.checkpoints.iter().map(|t| t.to_string()).collect();
    push_kv(&mut out, "checkpoints", grid.join(","));
    push_kv(&mut out, "replicates", spec.replicates);
    push_kv(&mut out, "cap", spec.cap);
    if let Some(seed) = spec.seed {
        push_kv(&mut out, "seed", seed);
    }
    if let Some(variant) = spec.variant {
        push_kv(&mut out, "variant", variant.label());
    }
    if let Some(dir) = &spec.output_dir {
        push_kv(&mut out, "output_dir", dir.display());
    }
    out
}

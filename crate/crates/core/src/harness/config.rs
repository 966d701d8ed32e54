use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::appearance::TemplateModel;
use crate::error::{Error, Result};
use crate::geometry::PatchDims;
use crate::interaction::InteractionParams;
use crate::motion::MotionParams;
use crate::simulator::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackerKind {
    /// Joint MCMC sampler with MRF interaction terms.
    McmcMrf,
    /// One CONDENSATION filter per target.
    Independent,
}

impl fmt::Display for TrackerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrackerKind::McmcMrf => "mcmc-mrf",
            TrackerKind::Independent => "independent",
        })
    }
}

impl FromStr for TrackerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcmc-mrf" | "mcmc" => Ok(TrackerKind::McmcMrf),
            "independent" => Ok(TrackerKind::Independent),
            other => Err(Error::config(format!(
                "unknown tracker {other:?} (expected mcmc-mrf or independent)"
            ))),
        }
    }
}

/// Everything needed to run one tracker over one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tracker: TrackerKind,
    /// Joint samples per frame (mcmc-mrf) or particles per target (independent).
    pub particles: usize,
    /// MH iterations discarded per frame before collecting samples.
    pub burn_in: usize,
    pub motion: MotionParams,
    pub interaction: InteractionParams,
    pub dims: PatchDims,
    /// Fixed appearance model. When absent it is learned from `template_dir`
    /// or, failing that, from the first frames and their groundtruth.
    pub template: Option<TemplateModel>,
    /// Directory with `foreground/` and `background/` subdirectories of PGM
    /// training patches.
    pub template_dir: Option<PathBuf>,
    /// Position error (pixels) above which a tracker counts as failed.
    pub failure_threshold: f64,
    /// Sequence length failure counts are scaled to.
    pub reference_frames: usize,
    pub frames_dir: Option<PathBuf>,
    pub groundtruth: Option<PathBuf>,
    pub scenario: Option<ScenarioConfig>,
    pub output_dir: Option<PathBuf>,
    /// Write annotated PGM frames next to the metrics.
    pub dump_frames: bool,
    pub rng_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tracker: TrackerKind::McmcMrf,
            particles: 200,
            burn_in: 0,
            motion: MotionParams::default(),
            interaction: InteractionParams::default(),
            dims: PatchDims::default(),
            template: None,
            template_dir: None,
            failure_threshold: 50.0,
            reference_frames: 10_400,
            frames_dir: None,
            groundtruth: None,
            scenario: None,
            output_dir: None,
            dump_frames: false,
            rng_seed: 0,
        }
    }
}

impl RunConfig {
    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        let mut absorb = |r: Result<()>| match r {
            Ok(()) => {}
            Err(Error::Config(e)) => errors.extend(e),
            Err(other) => errors.push(other.to_string()),
        };
        absorb(self.motion.validate());
        absorb(self.interaction.validate());
        absorb(self.dims.validate());
        if let Some(t) = &self.template {
            absorb(t.validate());
        }
        if let Some(s) = &self.scenario {
            absorb(s.validate());
        }
        if self.particles == 0 {
            errors.push("particles must be at least 1".into());
        }
        if self.failure_threshold.is_nan() || self.failure_threshold <= 0.0 {
            errors.push(format!("failure_threshold must be positive, got {}", self.failure_threshold));
        }
        if self.reference_frames == 0 {
            errors.push("reference_frames must be at least 1".into());
        }
        match (&self.frames_dir, &self.scenario) {
            (Some(_), Some(_)) => errors.push("set either frames_dir or scenario, not both".into()),
            (None, None) => errors.push("one of frames_dir or scenario is required".into()),
            (Some(_), None) if self.groundtruth.is_none() => {
                errors.push("frames_dir requires a groundtruth CSV".into())
            }
            _ => {}
        }
        if self.template.is_some() && self.template_dir.is_some() {
            errors.push("set either template or template_dir, not both".into());
        }
        if let Some(t) = &self.template {
            if t.dims != self.dims {
                errors.push(format!(
                    "template.dims {}x{} differ from dims {}x{}",
                    t.dims.length, t.dims.width, self.dims.length, self.dims.width
                ));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Parses TOML text, applies `key=value` overrides, and validates.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::config(format!("config parse error: {e}")))?;
        apply_overrides(&mut table, overrides)?;
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::config(format!("config error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_with_overrides(&text, overrides)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative input paths relative to `base` (the config's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.frames_dir, &mut self.groundtruth, &mut self.template_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    if let Ok(v) = raw.parse::<i64>() {
        return toml::Value::Integer(v);
    }
    if let Ok(v) = raw.parse::<f64>() {
        return toml::Value::Float(v);
    }
    if let Ok(v) = raw.parse::<bool>() {
        return toml::Value::Boolean(v);
    }
    toml::Value::String(raw.to_string())
}

/// Sets dotted keys (`motion.sigma_x`) in a TOML table. Hyphens in key names
/// are read as underscores.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[(String, String)]) -> Result<()> {
    for (key, raw) in overrides {
        let parts: Vec<String> = key.split('.').map(|p| p.replace('-', "_")).collect();
        let (last, parents) = parts.split_last().expect("split yields at least one part");
        let mut node = &mut *table;
        for part in parents {
            let entry = node
                .entry(part.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = entry
                .as_table_mut()
                .ok_or_else(|| Error::config(format!("cannot override {key}: {part} is not a table")))?;
        }
        let mut value = parse_scalar(raw);
        // Integers given for float fields are accepted by serde; floats for
        // integer fields are not, so keep whole-number text as integers.
        if let (Some(toml::Value::Float(_)), toml::Value::Integer(i)) = (node.get(last), &value) {
            value = toml::Value::Float(*i as f64);
        }
        node.insert(last.clone(), value);
    }
    Ok(())
}

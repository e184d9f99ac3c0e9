//! Run configuration: a JSON file, overridden by flags, with the seed falling
//! back to `SOLENOID_KMS_SEED` and then to [`DEFAULT_SEED`].
//!
//! ```json
//! {"N": 2, "theta0": 0.3333333, "beta": 1.0, "depth": 4, "n": 6,
//!  "tolerances": {"kms": 1e-9}, "seed": 42, "samples": 1000, "states": 20}
//! ```
//!
//! Every field is optional. Unknown fields and unknown tolerance names are
//! rejected.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use solenoid_kms::campaign::{CampaignConfig, Tolerances};

pub const SEED_ENV: &str = "SOLENOID_KMS_SEED";
pub const DEFAULT_SEED: u64 = 42;
pub const MAX_DYADIC_LEVEL: u32 = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "N")]
    pub cover: u32,
    pub theta0: f64,
    pub beta: f64,
    pub depth: u32,
    /// Dyadic level used by the measure commands.
    pub n: u32,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub samples: usize,
    pub states: usize,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(rename = "N")]
    cover: Option<u32>,
    theta0: Option<f64>,
    beta: Option<f64>,
    depth: Option<u32>,
    n: Option<u32>,
    #[serde(default)]
    tolerances: Option<Tolerances>,
    seed: Option<u64>,
    samples: Option<usize>,
    states: Option<usize>,
}

/// Flags shared by every command that needs a configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON configuration file; flags take precedence over its values.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Covering degree.
    #[arg(long = "N", global = true)]
    pub cover: Option<u32>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta0: Option<f64>,
    /// Inverse temperature.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Deepest level of the tower.
    #[arg(long, global = true)]
    pub depth: Option<u32>,
    /// Seed for every randomized campaign [env: SOLENOID_KMS_SEED].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Random cases per suite.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Number of random states.
    #[arg(long, global = true)]
    pub states: Option<usize>,
}

impl RunConfig {
    pub fn defaults() -> Self {
        RunConfig {
            cover: 2,
            theta0: 1.0 / 3.0,
            beta: 1.0,
            depth: 4,
            n: 6,
            tolerances: Tolerances::default(),
            seed: DEFAULT_SEED,
            samples: 1000,
            states: 20,
        }
    }

    /// Layers defaults, the environment seed, the file and the flags, in that
    /// order, then validates.
    pub fn resolve(args: &ConfigArgs, env_seed: Option<&str>) -> Result<Self> {
        let mut cfg = RunConfig::defaults();
        if let Some(s) = env_seed {
            cfg.seed = s
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV} must be an unsigned 64-bit integer, got {s:?}"))?;
        }
        if let Some(path) = &args.config {
            cfg.merge_file(&read_file(path)?);
        }
        let a = args;
        cfg.cover = a.cover.unwrap_or(cfg.cover);
        cfg.theta0 = a.theta0.unwrap_or(cfg.theta0);
        cfg.beta = a.beta.unwrap_or(cfg.beta);
        cfg.depth = a.depth.unwrap_or(cfg.depth);
        cfg.seed = a.seed.unwrap_or(cfg.seed);
        cfg.samples = a.samples.unwrap_or(cfg.samples);
        cfg.states = a.states.unwrap_or(cfg.states);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_env(args: &ConfigArgs) -> Result<Self> {
        let env = std::env::var(SEED_ENV).ok();
        Self::resolve(args, env.as_deref())
    }

    fn merge_file(&mut self, f: &FileConfig) {
        self.cover = f.cover.unwrap_or(self.cover);
        self.theta0 = f.theta0.unwrap_or(self.theta0);
        self.beta = f.beta.unwrap_or(self.beta);
        self.depth = f.depth.unwrap_or(self.depth);
        self.n = f.n.unwrap_or(self.n);
        if let Some(t) = &f.tolerances {
            self.tolerances = t.clone();
        }
        self.seed = f.seed.unwrap_or(self.seed);
        self.samples = f.samples.unwrap_or(self.samples);
        self.states = f.states.unwrap_or(self.states);
    }

    /// Structural checks only. A negative `beta` is accepted here so that the
    /// KMS commands can report it as a failing suite.
    pub fn validate(&self) -> Result<()> {
        if self.cover < 2 {
            bail!("N must be at least 2, got {}", self.cover);
        }
        if !(self.theta0.is_finite() && self.theta0 > 0.0 && self.theta0 < 1.0) {
            bail!("theta0 must lie in (0, 1), got {}", self.theta0);
        }
        if !self.beta.is_finite() {
            bail!("beta must be finite");
        }
        if self.n > MAX_DYADIC_LEVEL {
            bail!("dyadic level n must be at most {MAX_DYADIC_LEVEL}, got {}", self.n);
        }
        if self.samples == 0 {
            bail!("samples must be at least 1");
        }
        if self.states == 0 {
            bail!("states must be at least 1");
        }
        Ok(())
    }

    pub fn campaign(&self) -> CampaignConfig {
        CampaignConfig {
            cover: self.cover,
            theta0: self.theta0,
            beta: self.beta,
            depth: self.depth,
            samples: self.samples,
            states: self.states,
            seed: self.seed,
        }
    }
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn precedence_is_flag_file_env_default() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"seed": 7, "beta": 2.5, "tolerances": {{"kms": 1e-8}}}}"#).unwrap();
        let mut args = ConfigArgs {
            config: Some(file.path().to_path_buf()),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&args, Some("99")).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.beta, 2.5);
        assert_eq!(cfg.tolerances.kms, 1e-8);
        assert_eq!(cfg.tolerances.embedding, 1e-12);

        args.seed = Some(3);
        assert_eq!(RunConfig::resolve(&args, Some("99")).unwrap().seed, 3);

        let bare = ConfigArgs::default();
        assert_eq!(RunConfig::resolve(&bare, Some("99")).unwrap().seed, 99);
        assert_eq!(RunConfig::resolve(&bare, None).unwrap().seed, DEFAULT_SEED);
    }

    #[test]
    fn rejects_bad_values() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"tolerances": {{"nonsense": 1.0}}}}"#).unwrap();
        let args = ConfigArgs {
            config: Some(file.path().to_path_buf()),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&args, None).is_err());

        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"n": 15}}"#).unwrap();
        let args = ConfigArgs {
            config: Some(file.path().to_path_buf()),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&args, None).is_err());

        let zero = ConfigArgs {
            samples: Some(0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&zero, None).is_err());
        assert!(RunConfig::resolve(&ConfigArgs::default(), Some("x")).is_err());
    }
}

//! The full configuration tree: a single TOML file with nested sections,
//! every key defaulted, command-line flags overriding file values. The
//! effective configuration is echoed into every output directory and its
//! hash stamped into every output file header.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use reachguard::config::{CollectSettings, PlannerSettings, WorldSettings};
use reachguard::safeloop::SafetyConfig;

/// Reach-tube soundness verification settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifySettings {
    /// Random plans to draw.
    pub plans: usize,
    /// Total rollouts, split evenly across the plans.
    pub rollouts: usize,
    /// Plan horizon.
    pub horizon: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            plans: 20,
            rollouts: 1000,
            horizon: 3,
        }
    }
}

/// Gradient fidelity check settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GradientSettings {
    /// Non-degenerate instances to accumulate.
    pub instances: usize,
    /// Central finite-difference step.
    pub fd_step: f64,
}

impl Default for GradientSettings {
    fn default() -> Self {
        Self {
            instances: 50,
            fd_step: 1e-5,
        }
    }
}

/// Benchmark grid settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSettings {
    pub obstacle_counts: Vec<usize>,
    pub horizons: Vec<usize>,
    /// Repetitions per cell; the median is reported.
    pub repetitions: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            obstacle_counts: vec![3, 5],
            horizons: vec![3, 5, 10],
            repetitions: 5,
        }
    }
}

/// Root configuration.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Trajectory CSV to load; when unset or missing, data is collected
    /// in-process with the `collect` settings.
    pub data_path: Option<PathBuf>,
    pub safety: SafetyConfig,
    pub world: WorldSettings,
    pub planner: PlannerSettings,
    pub collect: CollectSettings,
    pub verify: VerifySettings,
    pub gradients: GradientSettings,
    pub bench: BenchSettings,
}

impl RunConfig {
    /// Load from a TOML file (or defaults when `path` is None) and validate.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config file {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if config.output_dir.as_os_str().is_empty() {
            config.output_dir = PathBuf::from("out");
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.safety
            .validate()
            .map_err(|e| anyhow::anyhow!("safety config: {e}"))?;
        self.world
            .build()
            .map_err(|e| anyhow::anyhow!("world config: {e}"))?;
        self.planner
            .planner_config()
            .map_err(|e| anyhow::anyhow!("planner config: {e}"))?;
        if let Some(path) = &self.data_path {
            if !path.exists() {
                anyhow::bail!("data file {} does not exist", path.display());
            }
        }
        Ok(())
    }

    pub fn effective_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// FNV-1a hash of the effective configuration, deterministic across
    /// processes.
    pub fn config_hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for byte in self.effective_toml().bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    /// Header comment lines stamped into every output file.
    pub fn header_comments(&self, seed: u64) -> Vec<String> {
        vec![format!(
            "reachguard v{} seed={seed} config={}",
            env!("CARGO_PKG_VERSION"),
            self.config_hash()
        )]
    }

    /// Create the output directory and echo the effective config into it.
    pub fn prepare_output_dir(&self) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(&self.output_dir)
            .with_context(|| format!("creating {}", self.output_dir.display()))?;
        std::fs::write(
            self.output_dir.join("effective-config.toml"),
            self.effective_toml(),
        )?;
        Ok(self.output_dir.clone())
    }
}

//! Serde-facing settings that build the runtime objects (worlds, planners,
//! collection options). Every field has a default so a partial config file
//! or none at all works.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planners::PlannerConfig;
use crate::reachability::NoiseZonotope;
use crate::setops::{ConstrainedZonotope, Interval, Zonotope};
use crate::simworld::{make_world, CollectOptions, RobotState, WorldModel};

/// Axis-aligned obstacle: center plus half-widths, meters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxSpec {
    pub center: [f64; 2],
    pub half_widths: [f64; 2],
}

/// World preset selection plus optional overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSettings {
    pub preset: String,
    /// Replaces the preset's obstacle list when set.
    pub obstacles: Option<Vec<BoxSpec>>,
    pub start: Option<[f64; 3]>,
    pub goal: Option<[f64; 2]>,
    pub lidar_beams: Option<usize>,
    /// Field of view in degrees (min, max).
    pub lidar_fov_deg: Option<[f64; 2]>,
    pub lidar_max_range: Option<f64>,
    pub dt: Option<f64>,
    /// Noise half-widths in embedded coordinates (px, py, cos, sin).
    pub noise_radii: Option<[f64; 4]>,
}

impl Default for WorldSettings {
    fn default() -> Self {
        Self {
            preset: "world".into(),
            obstacles: None,
            start: None,
            goal: None,
            lidar_beams: None,
            lidar_fov_deg: None,
            lidar_max_range: None,
            dt: None,
            noise_radii: None,
        }
    }
}

impl WorldSettings {
    pub fn build(&self) -> Result<WorldModel> {
        let mut world = make_world(&self.preset)?;
        if let Some(specs) = &self.obstacles {
            world.obstacles = specs
                .iter()
                .map(|s| {
                    ConstrainedZonotope::box_at(
                        DVector::from_row_slice(&s.center),
                        &DVector::from_row_slice(&s.half_widths),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
        }
        if let Some([px, py, psi]) = self.start {
            world.start = RobotState::new(px, py, psi);
        }
        if let Some(goal) = self.goal {
            world.goal = DVector::from_row_slice(&goal);
        }
        if let Some(beams) = self.lidar_beams {
            world.lidar_beams = beams;
        }
        if let Some([lo, hi]) = self.lidar_fov_deg {
            let deg = std::f64::consts::PI / 180.0;
            world.lidar_fov = (lo * deg, hi * deg);
        }
        if let Some(range) = self.lidar_max_range {
            world.lidar_max_range = range;
        }
        if let Some(dt) = self.dt {
            if dt <= 0.0 {
                return Err(Error::InvalidArgument("dt must be positive".into()));
            }
            world.dt = dt;
        }
        if let Some(radii) = self.noise_radii {
            world.noise = NoiseZonotope::new(Zonotope::box_at(
                DVector::zeros(4),
                &DVector::from_row_slice(&radii),
            )?)?;
        }
        Ok(world)
    }
}

/// Offline data collection settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectSettings {
    pub steps: usize,
    pub seed: u64,
    /// State rows per trajectory segment.
    pub trajectory_len: usize,
    /// Half-width of the square region start poses are drawn from, meters.
    pub start_region_half_width: f64,
}

impl Default for CollectSettings {
    fn default() -> Self {
        Self {
            steps: 600,
            seed: 42,
            trajectory_len: 60,
            start_region_half_width: 1.2,
        }
    }
}

impl CollectSettings {
    pub fn options(&self, input_box: Interval) -> CollectOptions {
        let hw = self.start_region_half_width;
        CollectOptions {
            trajectory_len: self.trajectory_len,
            start_region: Interval::new(
                DVector::from_row_slice(&[-hw, -hw]),
                DVector::from_row_slice(&[hw, hw]),
            )
            .expect("square region"),
            input_box,
        }
    }
}

/// Planner selection and chat-endpoint settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSettings {
    /// One of `scripted`, `adversarial`, `llm`.
    pub kind: String,
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub timeout_ms: u64,
    pub max_retries: usize,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        let d = PlannerConfig::default();
        Self {
            kind: "scripted".into(),
            endpoint_url: d.endpoint_url,
            model_name: d.model_name,
            temperature: d.temperature,
            timeout_ms: d.timeout.as_millis() as u64,
            max_retries: d.max_retries,
        }
    }
}

impl PlannerSettings {
    pub fn planner_config(&self) -> Result<PlannerConfig> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::InvalidArgument(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.timeout_ms == 0 {
            return Err(Error::InvalidArgument("timeout must be positive".into()));
        }
        Ok(PlannerConfig {
            endpoint_url: self.endpoint_url.clone(),
            model_name: self.model_name.clone(),
            temperature: self.temperature,
            timeout: std::time::Duration::from_millis(self.timeout_ms),
            max_retries: self.max_retries,
        })
    }
}

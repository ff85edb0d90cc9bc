//! The receding-horizon safe control loop.
//!
//! Every control period: query the planner; if any obstacle is within the
//! trigger distance, compute the plan's reach tube and check it against the
//! inflated obstacles; adjust the plan on collision; fall back to the backup
//! plan when adjustment fails or the planner produced nothing. Execute only
//! the first action of whichever plan won, then shift the backup by one step
//! and append a brake. Safety is inductive: the backup always ends in
//! braking, and braking holds position (up to bounded noise drift).

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adjust::{adjust_plan, AdjustParams, Plan};
use crate::collision::{reach_obstacle_check, EmptinessStatus};
use crate::error::Result;
use crate::planners::{Planner, PlannerQuery};
use crate::reachability::{reach, LipschitzBounds, ReachContext, TrajectoryData};
use crate::setops::{ConstrainedZonotope, Interval, Zonotope};
use crate::simworld::{embed, position_projection, wrap_angle, RobotState, WorldModel};

/// All loop parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyConfig {
    /// Planning horizon (actions per plan).
    pub n_plan: usize,
    /// Braking-tail length; 1 suffices for direct-velocity-input robots.
    pub n_brake: usize,
    /// Goal region radius, meters.
    pub r_goal: f64,
    /// Half-widths of the initial reachable set around the measured state.
    pub eps_x0: Vec<f64>,
    /// Obstacle distance below which the safety layer engages, meters.
    pub d_trigger: f64,
    /// Gradient step size for plan adjustment.
    pub gamma: f64,
    /// Admissible input box (linear m/s, angular rad/s).
    pub input_box_lower: Vec<f64>,
    pub input_box_upper: Vec<f64>,
    /// Tighter linear-velocity box for the first step of every plan.
    pub first_step_box_lower: Vec<f64>,
    pub first_step_box_upper: Vec<f64>,
    /// Actuation ball radius around planned inputs.
    pub epsilon_input: f64,
    /// Robot bounding radius used to inflate obstacles, meters.
    pub inflation_radius: f64,
    /// Hard episode length cap in control steps.
    pub step_limit: usize,
    /// Wall-clock budget per adjustment call, milliseconds.
    pub adjust_deadline_ms: u64,
    /// Gradient-iteration cap within the deadline.
    pub adjust_max_iterations: usize,
    /// Adjustment bails early after this many iterations without progress.
    pub adjust_plateau_iterations: usize,
    /// Tube generator cap before order reduction.
    pub generator_cap: usize,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            n_plan: 3,
            n_brake: 1,
            r_goal: 0.3,
            eps_x0: vec![0.01, 0.01, 0.01, 0.01],
            d_trigger: 1.0,
            gamma: 0.05,
            input_box_lower: vec![0.0, -0.5],
            input_box_upper: vec![0.5, 0.5],
            first_step_box_lower: vec![0.0, -0.5],
            first_step_box_upper: vec![0.1, 0.5],
            epsilon_input: 1e-6,
            inflation_radius: 0.15,
            step_limit: 500,
            adjust_deadline_ms: 100,
            adjust_max_iterations: 100,
            adjust_plateau_iterations: 25,
            generator_cap: 200,
        }
    }
}

impl SafetyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_brake < 1 || self.n_plan < self.n_brake {
            return Err(crate::Error::InvalidArgument(format!(
                "need n_plan >= n_brake >= 1, got {} and {}",
                self.n_plan, self.n_brake
            )));
        }
        if self.r_goal <= 0.0 || self.d_trigger <= 0.0 {
            return Err(crate::Error::InvalidArgument(
                "r_goal and d_trigger must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn input_box(&self) -> Interval {
        Interval::new(
            DVector::from_vec(self.input_box_lower.clone()),
            DVector::from_vec(self.input_box_upper.clone()),
        )
        .expect("input box bounds")
    }

    pub fn first_step_box(&self) -> Interval {
        Interval::new(
            DVector::from_vec(self.first_step_box_lower.clone()),
            DVector::from_vec(self.first_step_box_upper.clone()),
        )
        .expect("first-step box bounds")
    }

    pub fn adjust_deadline(&self) -> Duration {
        Duration::from_millis(self.adjust_deadline_ms)
    }

    pub fn brake_action(&self) -> DVector<f64> {
        DVector::zeros(self.input_box_lower.len())
    }
}

/// Which plan source fed the executed action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Planner output passed through (unchecked when far from obstacles,
    /// tube-verified when triggered).
    Raw,
    /// Gradient-repaired plan.
    Adjusted,
    /// Backup plan (previous certified plan shifted, or pure braking).
    Backup,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Raw => "raw",
            Branch::Adjusted => "adjusted",
            Branch::Backup => "backup",
        }
    }
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GoalReached,
    StepLimit,
    /// The planner kept failing and the backup degraded to pure braking;
    /// the robot is parked.
    PlannerUnavailableBraked,
}

/// One control step of the episode log.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub step: usize,
    pub pose: RobotState,
    pub raw_plan: Option<Plan>,
    pub executed_plan: Plan,
    pub branch: Branch,
    pub plan_src: String,
    /// Smallest `v*` over all checked pairs; None when the safety layer was
    /// not triggered.
    pub min_v_star: Option<f64>,
    pub adjust_iterations: usize,
    pub reach_ms: f64,
    pub adjust_ms: f64,
    /// Position-plane tube sets (when computed) for plotting.
    pub tube_positions: Option<Vec<Zonotope>>,
}

/// Mutable episode state.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub current_state: RobotState,
    pub backup_plan: Plan,
    pub step_index: usize,
    pub log: Vec<StepRecord>,
}

/// Episode summary and full log.
#[derive(Debug, Clone)]
pub struct EpisodeReport {
    pub reason: StopReason,
    pub steps: usize,
    pub collisions: usize,
    pub min_obstacle_distance: f64,
    pub goal_reached: bool,
    pub final_state: RobotState,
    pub log: Vec<StepRecord>,
}

impl EpisodeReport {
    pub fn mean_reach_ms(&self) -> f64 {
        mean(self.log.iter().map(|r| r.reach_ms))
    }

    pub fn mean_adjust_ms(&self) -> f64 {
        mean(self.log.iter().map(|r| r.adjust_ms))
    }
}

fn mean(iter: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in iter {
        sum += v;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// The all-braking failsafe plan.
pub fn failsafe_plan(config: &SafetyConfig) -> Plan {
    Plan::new(vec![config.brake_action(); config.n_plan]).expect("n_plan >= 1")
}

/// Closed-ball goal test on the position.
pub fn goal_reached(state: &RobotState, goal: &DVector<f64>, r_goal: f64) -> bool {
    let dx = state.px - goal[0];
    let dy = state.py - goal[1];
    (dx * dx + dy * dy).sqrt() <= r_goal
}

/// Conservative distance from the robot position to the obstacle set via
/// interval hulls (never exceeds the true distance; +inf with no obstacles).
pub fn obstacle_distance(state: &RobotState, obstacles: &[ConstrainedZonotope]) -> f64 {
    WorldModel::obstacle_hull_distance(&state.position(), obstacles)
}

/// Inflate each obstacle by the robot's bounding radius (Minkowski sum with
/// a square), since reach sets track the robot's reference point.
pub fn inflate_obstacles(
    obstacles: &[ConstrainedZonotope],
    radius: f64,
) -> Vec<ConstrainedZonotope> {
    let square = Zonotope::box_at(DVector::zeros(2), &DVector::from_element(2, radius))
        .expect("inflation square");
    obstacles
        .iter()
        .map(|o| {
            o.minkowski_sum_zonotope(&square)
                .expect("obstacles are planar")
        })
        .collect()
}

/// Everything an episode needs besides the world: the offline data and its
/// derived bounds.
pub struct EpisodeEnv<'a> {
    pub data: &'a TrajectoryData,
    pub bounds: &'a LipschitzBounds,
}

/// Run one episode of the safe control loop.
///
/// The initial backup plan is the braking plan, which is safe from any safe
/// start. Planner failures and uncertifiable plans both route to the backup;
/// the loop itself never errors on them.
pub fn run_episode<R: Rng>(
    config: &SafetyConfig,
    planner: &dyn Planner,
    world: &WorldModel,
    goal: &DVector<f64>,
    env: &EpisodeEnv<'_>,
    rng: &mut R,
) -> Result<EpisodeReport> {
    config.validate()?;
    let input_box = config.input_box();
    let first_step_box = config.first_step_box();
    let brake = config.brake_action();
    let projection = position_projection();
    let inflated = inflate_obstacles(&world.obstacles, config.inflation_radius);
    let ctx = ReachContext {
        data: env.data,
        noise: &world.noise,
        bounds: env.bounds,
        eps_input: config.epsilon_input,
        generator_cap: config.generator_cap,
    };

    let mut episode = EpisodeState {
        current_state: world.start,
        backup_plan: failsafe_plan(config),
        step_index: 0,
        log: Vec::new(),
    };
    let mut collisions = 0usize;
    let mut min_distance = obstacle_distance(&episode.current_state, &world.obstacles);
    let mut reason = StopReason::StepLimit;

    while episode.step_index < config.step_limit {
        let state = episode.current_state;
        if goal_reached(&state, goal, config.r_goal) {
            reason = StopReason::GoalReached;
            break;
        }

        // Ask the planner.
        let query = PlannerQuery {
            pose: (state.px, state.py, state.psi),
            goal: goal.clone(),
            reaching_radius: config.r_goal,
            los_angle: wrap_angle((goal[1] - state.py).atan2(goal[0] - state.px) - state.psi),
            lidar: world.lidar_scan(&state),
            lidar_max_range: world.lidar_max_range,
            input_bounds: input_box.clone(),
            horizon: config.n_plan,
        };
        let planned = planner.plan(&query);

        let mut branch = Branch::Backup;
        let mut plan_src = "none".to_string();
        let mut raw_plan = None;
        let mut min_v_star = None;
        let mut adjust_iterations = 0usize;
        let mut reach_ms = 0.0;
        let mut adjust_ms = 0.0;
        let mut tube_positions = None;

        let active = match planned {
            Err(failure) => {
                log::debug!("planner failure at step {}: {failure}", episode.step_index);
                episode.backup_plan.clone()
            }
            Ok(plan) => {
                plan_src = planner.name().to_string();
                let sanitized = plan.clamped(&input_box, &first_step_box);
                raw_plan = Some(plan);
                let trigger_distance = obstacle_distance(&state, &inflated);
                if trigger_distance > config.d_trigger {
                    branch = Branch::Raw;
                    sanitized
                } else {
                    let initial = Zonotope::box_at(
                        embed(&state),
                        &DVector::from_vec(config.eps_x0.clone()),
                    )?;
                    let t0 = Instant::now();
                    let tube = reach(&initial, sanitized.actions(), &ctx)?;
                    let mut min_v = f64::INFINITY;
                    let mut any_hit = false;
                    for step in 1..=tube.horizon() {
                        for obstacle in &inflated {
                            let check =
                                reach_obstacle_check(&tube.sets[step], obstacle, &projection)?;
                            let v = match check.result.status {
                                EmptinessStatus::Optimal => check.result.v_star,
                                EmptinessStatus::InfeasibleEqualities => f64::INFINITY,
                                EmptinessStatus::UnboundedGuard => 0.0,
                            };
                            min_v = min_v.min(v);
                            any_hit |= check.intersects;
                        }
                    }
                    reach_ms = t0.elapsed().as_secs_f64() * 1e3;
                    tube_positions = Some(
                        tube.sets
                            .iter()
                            .map(|s| s.linear_map(&projection))
                            .collect::<Result<Vec<_>>>()?,
                    );
                    if !any_hit {
                        min_v_star = Some(min_v);
                        branch = Branch::Raw;
                        sanitized
                    } else {
                        let t1 = Instant::now();
                        let params = AdjustParams {
                            gamma: config.gamma,
                            deadline: config.adjust_deadline(),
                            max_iterations: config.adjust_max_iterations,
                            brake_action: brake.clone(),
                            n_brake: config.n_brake,
                            input_box: &input_box,
                            first_step_box: &first_step_box,
                            projection: &projection,
                            plateau_iterations: config.adjust_plateau_iterations,
                            plateau_epsilon: 1e-6,
                        };
                        let outcome = adjust_plan(&sanitized, &inflated, &initial, &ctx, &params)?;
                        adjust_ms = t1.elapsed().as_secs_f64() * 1e3;
                        adjust_iterations = outcome.iterations;
                        min_v_star = Some(outcome.min_v_star);
                        if outcome.certified {
                            branch = Branch::Adjusted;
                            outcome.plan
                        } else {
                            branch = Branch::Backup;
                            episode.backup_plan.clone()
                        }
                    }
                }
            }
        };

        // Execute the first action and advance the world.
        let action = active.action(0).clone();
        let next_state = world.step(&state, &action, rng);

        // Ground-truth safety accounting (checked every sim step).
        let position = next_state.position();
        for obstacle in &world.obstacles {
            if obstacle.contains_point(&position)? {
                collisions += 1;
                break;
            }
        }
        min_distance = min_distance.min(obstacle_distance(&next_state, &world.obstacles));

        episode.log.push(StepRecord {
            step: episode.step_index,
            pose: state,
            raw_plan,
            executed_plan: active.clone(),
            branch,
            plan_src,
            min_v_star,
            adjust_iterations,
            reach_ms,
            adjust_ms,
            tube_positions,
        });

        // Shift the backup and advance.
        let planner_failed = branch == Branch::Backup && episode.log.last().unwrap().raw_plan.is_none();
        let backup_exhausted = episode.backup_plan.actions().iter().all(|a| a.amax() == 0.0);
        episode.backup_plan = active.shifted_with_brake(&brake);
        episode.current_state = next_state;
        episode.step_index += 1;

        if planner_failed && backup_exhausted {
            reason = StopReason::PlannerUnavailableBraked;
            break;
        }
    }

    if reason == StopReason::StepLimit && goal_reached(&episode.current_state, goal, config.r_goal)
    {
        reason = StopReason::GoalReached;
    }

    Ok(EpisodeReport {
        reason,
        steps: episode.step_index,
        collisions,
        min_obstacle_distance: min_distance,
        goal_reached: reason == StopReason::GoalReached,
        final_state: episode.current_state,
        log: episode.log,
    })
}

/// Episode log CSV header.
pub const EPISODE_CSV_HEADER: &str =
    "step,px,py,psi,branch,min_vstar,plan_src,adjust_iters,reach_ms,adjust_ms";

/// Write the per-step episode log; `comments` go first, `# `-prefixed.
pub fn write_episode_csv(
    report: &EpisodeReport,
    path: &std::path::Path,
    comments: &[String],
) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for c in comments {
        writeln!(f, "# {c}")?;
    }
    writeln!(f, "{EPISODE_CSV_HEADER}")?;
    for r in &report.log {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{:.3},{:.3}",
            r.step,
            crate::reachability::format_float(r.pose.px),
            crate::reachability::format_float(r.pose.py),
            crate::reachability::format_float(r.pose.psi),
            r.branch.as_str(),
            r.min_v_star.map(|v| v.to_string()).unwrap_or_default(),
            r.plan_src,
            r.adjust_iterations,
            r.reach_ms,
            r.adjust_ms,
        )?;
    }
    Ok(())
}

/// Convenience selector matrix re-export for callers checking tubes.
pub fn plane_projection() -> DMatrix<f64> {
    position_projection()
}

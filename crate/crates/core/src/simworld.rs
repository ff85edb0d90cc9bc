//! Ground-truth black-box system: noisy unicycle dynamics, obstacle worlds,
//! LiDAR sensing, the trig state embedding used by the reachability layer,
//! and offline data collection.
//!
//! The simulator owns the truth the safety layer never sees analytically.
//! Dynamics are forward-Euler unicycle in pose space with additive bounded
//! noise; the reachability layer works on the embedded state
//! `x = [p_x, p_y, cos ψ, sin ψ]`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::reachability::{NoiseZonotope, TrajectoryData};
use crate::setops::{ConstrainedZonotope, Interval, Zonotope};

/// Robot pose; the heading is kept wrapped to `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub px: f64,
    pub py: f64,
    pub psi: f64,
}

impl RobotState {
    pub fn new(px: f64, py: f64, psi: f64) -> Self {
        Self {
            px,
            py,
            psi: wrap_angle(psi),
        }
    }

    pub fn position(&self) -> DVector<f64> {
        DVector::from_row_slice(&[self.px, self.py])
    }
}

/// Wrap an angle to `(-π, π]`; values already in range are returned
/// unchanged (bit-exact).
pub fn wrap_angle(a: f64) -> f64 {
    if a > -std::f64::consts::PI && a <= std::f64::consts::PI {
        return a;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Trig embedding `[p_x, p_y, cos ψ, sin ψ]`.
pub fn embed(s: &RobotState) -> DVector<f64> {
    DVector::from_row_slice(&[s.px, s.py, s.psi.cos(), s.psi.sin()])
}

/// Inverse of [`embed`] via the two-argument arctangent; tolerates scaled
/// (unnormalized) trig pairs.
pub fn unembed(e: &DVector<f64>) -> RobotState {
    RobotState::new(e[0], e[1], e[3].atan2(e[2]))
}

/// Selection matrix from the embedded state onto the position plane.
pub fn position_projection() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
}

/// Immutable world description: obstacle layout, LiDAR geometry, noise
/// bounds, and the integration step.
#[derive(Debug, Clone)]
pub struct WorldModel {
    pub name: String,
    pub obstacles: Vec<ConstrainedZonotope>,
    pub bounds: Interval,
    pub lidar_beams: usize,
    /// Field of view in robot frame, radians (min, max).
    pub lidar_fov: (f64, f64),
    pub lidar_max_range: f64,
    pub noise: NoiseZonotope,
    pub dt: f64,
    /// Suggested episode start pose and goal position for this preset.
    pub start: RobotState,
    pub goal: DVector<f64>,
}

impl WorldModel {
    /// Noise-free forward-Euler unicycle step.
    pub fn step_deterministic(&self, s: &RobotState, u: &DVector<f64>) -> RobotState {
        let (v, omega) = (u[0], u[1]);
        RobotState::new(
            s.px + v * s.psi.cos() * self.dt,
            s.py + v * s.psi.sin() * self.dt,
            wrap_angle(s.psi + omega * self.dt),
        )
    }

    /// Noisy step with the default sampler. The noise is drawn in pose space
    /// (position offsets and a heading perturbation) such that the induced
    /// deviation in embedded coordinates always lies inside `W`: position
    /// deviations equal the sampled offsets, and a heading change `dψ`
    /// moves both trig coordinates by at most `|dψ|`.
    pub fn step<R: Rng>(&self, s: &RobotState, u: &DVector<f64>, rng: &mut R) -> RobotState {
        let clean = self.step_deterministic(s, u);
        let hull = self.noise.w.interval_hull();
        let sample_in = |lo: f64, hi: f64, rng: &mut R| {
            if hi > lo {
                rng.gen_range(lo..=hi)
            } else {
                lo
            }
        };
        let wx = sample_in(hull.lower()[0], hull.upper()[0], rng);
        let wy = sample_in(hull.lower()[1], hull.upper()[1], rng);
        let r_trig = hull.upper()[2].min(hull.upper()[3]).max(0.0);
        let dpsi = if r_trig > 0.0 {
            rng.gen_range(-r_trig..=r_trig)
        } else {
            0.0
        };
        RobotState::new(clean.px + wx, clean.py + wy, wrap_angle(clean.psi + dpsi))
    }

    /// Noisy step applying a given disturbance in embedded coordinates and
    /// re-projecting to a pose (the trig pair is re-normalized by the
    /// arctangent, so the realized trig disturbance is the projection of the
    /// requested one).
    pub fn step_with_embedded_noise(
        &self,
        s: &RobotState,
        u: &DVector<f64>,
        w: &DVector<f64>,
    ) -> RobotState {
        let clean = self.step_deterministic(s, u);
        unembed(&(embed(&clean) + w))
    }

    /// Minimum distance from a position to the interval hulls of the given
    /// obstacles (0 inside, +inf for an empty list). Hulls contain the sets,
    /// so this never exceeds the true distance: a conservative trigger.
    pub fn obstacle_hull_distance(
        position: &DVector<f64>,
        obstacles: &[ConstrainedZonotope],
    ) -> f64 {
        obstacles
            .iter()
            .map(|o| o.interval_hull().distance(position))
            .fold(f64::INFINITY, f64::min)
    }

    /// Ray-cast LiDAR against the obstacle interval hulls. Beams are spread
    /// uniformly over the field of view in the robot frame; ranges are capped
    /// at `lidar_max_range` (the no-hit sentinel) and floored just above 0.
    pub fn lidar_scan(&self, s: &RobotState) -> DVector<f64> {
        let beams = self.lidar_beams.max(1);
        let (fov_min, fov_max) = self.lidar_fov;
        DVector::from_fn(beams, |b, _| {
            let frac = if beams == 1 {
                0.5
            } else {
                b as f64 / (beams - 1) as f64
            };
            let angle = s.psi + fov_min + (fov_max - fov_min) * frac;
            let dir = (angle.cos(), angle.sin());
            let mut best = self.lidar_max_range;
            for obs in &self.obstacles {
                let hull = obs.interval_hull();
                if let Some(t) = ray_box(&(s.px, s.py), &dir, &hull) {
                    best = best.min(t);
                }
            }
            best.max(1e-9)
        })
    }
}

/// Slab-method intersection of a ray with an axis-aligned box; returns the
/// entry parameter along the (unit) direction when it lies ahead of the
/// origin and is finite.
fn ray_box(origin: &(f64, f64), dir: &(f64, f64), hull: &Interval) -> Option<f64> {
    let mut t_min = 0.0_f64;
    let mut t_max = f64::INFINITY;
    let o = [origin.0, origin.1];
    let d = [dir.0, dir.1];
    for k in 0..2 {
        let lo = hull.lower()[k];
        let hi = hull.upper()[k];
        if d[k].abs() < 1e-15 {
            if o[k] < lo || o[k] > hi {
                return None;
            }
        } else {
            let t1 = (lo - o[k]) / d[k];
            let t2 = (hi - o[k]) / d[k];
            t_min = t_min.max(t1.min(t2));
            t_max = t_max.min(t1.max(t2));
        }
    }
    if t_min <= t_max {
        Some(t_min)
    } else {
        None
    }
}

/// Default noise bounds in embedded coordinates: 2 mm/step position,
/// 1e-3/step trig.
pub fn default_noise() -> NoiseZonotope {
    NoiseZonotope::new(
        Zonotope::box_at(
            DVector::zeros(4),
            &DVector::from_row_slice(&[0.002, 0.002, 0.001, 0.001]),
        )
        .unwrap(),
    )
    .unwrap()
}

fn box_obstacle(cx: f64, cy: f64, hx: f64, hy: f64) -> ConstrainedZonotope {
    ConstrainedZonotope::box_at(
        DVector::from_row_slice(&[cx, cy]),
        &DVector::from_row_slice(&[hx, hy]),
    )
    .unwrap()
}

/// Named world presets.
///
/// * `open` - empty arena, for data collection and unobstructed runs.
/// * `world` - scattered axis-aligned cubes; 37 beams over ±90°.
/// * `house` - wall segments forming rooms with a doorway; 19 beams over ±45°.
/// * `lab` - a few boxes for the small-vehicle scenario; 19 beams over ±45°.
pub fn make_world(name: &str) -> Result<WorldModel> {
    let deg = std::f64::consts::PI / 180.0;
    let bounds = Interval::new(
        DVector::from_row_slice(&[-3.0, -3.0]),
        DVector::from_row_slice(&[3.0, 3.0]),
    )?;
    let base = WorldModel {
        name: name.to_string(),
        obstacles: Vec::new(),
        bounds,
        lidar_beams: 19,
        lidar_fov: (-45.0 * deg, 45.0 * deg),
        lidar_max_range: 3.5,
        noise: default_noise(),
        dt: 0.1,
        start: RobotState::new(-2.0, -2.0, std::f64::consts::FRAC_PI_4),
        goal: DVector::from_row_slice(&[2.0, 2.0]),
    };
    match name {
        "open" => Ok(WorldModel {
            start: RobotState::new(0.0, 0.0, 0.0),
            goal: DVector::from_row_slice(&[2.0, 0.0]),
            ..base
        }),
        "world" => Ok(WorldModel {
            obstacles: vec![
                box_obstacle(0.0, 0.0, 0.3, 0.3),
                box_obstacle(-1.2, 0.6, 0.25, 0.25),
                box_obstacle(1.2, -0.6, 0.25, 0.25),
                box_obstacle(0.9, 1.1, 0.25, 0.25),
                box_obstacle(-0.9, -1.1, 0.25, 0.25),
            ],
            lidar_beams: 37,
            lidar_fov: (-90.0 * deg, 90.0 * deg),
            ..base
        }),
        "house" => Ok(WorldModel {
            obstacles: vec![
                // Interior wall along y = 0 with a doorway at |x| < 0.6.
                box_obstacle(-1.8, 0.0, 1.2, 0.05),
                box_obstacle(1.8, 0.0, 1.2, 0.05),
                // Furniture blocks.
                box_obstacle(-1.5, 1.5, 0.3, 0.3),
                box_obstacle(1.4, -1.6, 0.35, 0.25),
            ],
            start: RobotState::new(-2.0, -2.0, std::f64::consts::FRAC_PI_4),
            goal: DVector::from_row_slice(&[2.0, 2.0]),
            ..base
        }),
        "lab" => Ok(WorldModel {
            obstacles: vec![
                box_obstacle(0.5, 0.3, 0.2, 0.2),
                box_obstacle(-0.5, 1.2, 0.2, 0.2),
                box_obstacle(1.4, 1.0, 0.25, 0.25),
            ],
            start: RobotState::new(-2.0, 0.0, 0.0),
            goal: DVector::from_row_slice(&[2.0, 1.2]),
            ..base
        }),
        other => Err(Error::InvalidArgument(format!(
            "unknown world preset {other:?}; expected open, world, house, or lab"
        ))),
    }
}

/// Options for offline data collection.
#[derive(Debug, Clone)]
pub struct CollectOptions {
    /// Rows per trajectory in the output file (states per trajectory).
    pub trajectory_len: usize,
    /// Region the trajectory start poses are drawn from.
    pub start_region: Interval,
    /// Excitation input box.
    pub input_box: Interval,
}

impl Default for CollectOptions {
    fn default() -> Self {
        Self {
            trajectory_len: 60,
            start_region: Interval::new(
                DVector::from_row_slice(&[-1.2, -1.2]),
                DVector::from_row_slice(&[1.2, 1.2]),
            )
            .unwrap(),
            input_box: Interval::new(
                DVector::from_row_slice(&[0.0, -0.5]),
                DVector::from_row_slice(&[0.5, 0.5]),
            )
            .unwrap(),
        }
    }
}

/// Excite the robot with uniformly random admissible inputs and record the
/// embedded states. `steps` counts the state rows written across all
/// trajectories; each trajectory restarts from a random pose in the start
/// region. Deterministic given the seed.
pub fn collect_data(
    world: &WorldModel,
    steps: usize,
    seed: u64,
    opts: &CollectOptions,
) -> Result<TrajectoryData> {
    if !world.obstacles.is_empty() {
        return Err(Error::InvalidArgument(
            "data collection requires an empty arena".into(),
        ));
    }
    if steps < 2 {
        return Err(Error::InvalidArgument(
            "need at least 2 steps to form one transition".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traj_len = opts.trajectory_len.max(2);
    let mut trajectories = Vec::new();
    let mut remaining = steps;
    while remaining > 0 {
        let mut len = traj_len.min(remaining);
        if remaining - len == 1 {
            // Avoid leaving a dangling single-state trajectory.
            len -= 1;
        }
        if len < 2 {
            len = remaining;
        }
        let mut s = RobotState::new(
            rng.gen_range(opts.start_region.lower()[0]..=opts.start_region.upper()[0]),
            rng.gen_range(opts.start_region.lower()[1]..=opts.start_region.upper()[1]),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let mut states = vec![embed(&s)];
        let mut inputs = Vec::with_capacity(len - 1);
        for _ in 0..len - 1 {
            let u = DVector::from_fn(2, |i, _| {
                rng.gen_range(opts.input_box.lower()[i]..=opts.input_box.upper()[i])
            });
            s = world.step(&s, &u, &mut rng);
            states.push(embed(&s));
            inputs.push(u);
        }
        trajectories.push((states, inputs));
        remaining -= len;
    }
    TrajectoryData::from_trajectories(&trajectories)
}

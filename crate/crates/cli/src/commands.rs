//! Implementations of the CLI subcommands. Each returns a typed report so
//! integration tests can assert on outcomes instead of scraping stdout.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::Context;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use reachguard::adjust::{adjust_plan, plan_gradient, AdjustParams, Plan};
use reachguard::collision::{reach_obstacle_check, vstar_center_gradient, EmptinessStatus};
use reachguard::planners::{LlmPlanner, Planner, PlannerFailure, ScriptedKind, ScriptedPlanner};
use reachguard::reachability::{
    estimate_lipschitz, reach, LipschitzBounds, NoiseZonotope, ReachContext, TrajectoryData,
};
use reachguard::safeloop::{
    run_episode, write_episode_csv, EpisodeEnv, EpisodeReport, StopReason,
};
use reachguard::setops::{ConstrainedZonotope, Zonotope};
use reachguard::simworld::{
    collect_data, embed, position_projection, RobotState, WorldModel,
};

use crate::runconfig::RunConfig;

/// Offline data plus its derived bounds.
pub struct DataBundle {
    pub data: TrajectoryData,
    pub bounds: LipschitzBounds,
    /// Where the data came from (file path or "collected seed=N").
    pub source: String,
}

/// An obstacle-free copy of the configured world (same dt, noise, sensors)
/// for data collection and open-world verification.
pub fn collection_world(config: &RunConfig) -> anyhow::Result<WorldModel> {
    let mut world = config.world.build()?;
    world.obstacles.clear();
    world.name = format!("{}-open", world.name);
    Ok(world)
}

/// Load the configured trajectory file, or collect fresh data with the
/// configured collection settings when no file is given.
pub fn load_or_collect_data(config: &RunConfig) -> anyhow::Result<DataBundle> {
    let (data, source) = match &config.data_path {
        Some(path) => (
            TrajectoryData::load_csv(path)
                .with_context(|| format!("loading {}", path.display()))?,
            path.display().to_string(),
        ),
        None => {
            let world = collection_world(config)?;
            let opts = config
                .collect
                .options(config.safety.input_box());
            let data = collect_data(&world, config.collect.steps, config.collect.seed, &opts)?;
            (data, format!("collected seed={}", config.collect.seed))
        }
    };
    let bounds = estimate_lipschitz(&data)?;
    Ok(DataBundle {
        data,
        bounds,
        source,
    })
}

// ---------------------------------------------------------------- collect

pub struct CollectReport {
    pub path: PathBuf,
    pub rows: usize,
    pub l_star: Vec<f64>,
    pub delta: Vec<f64>,
}

pub fn cmd_collect(
    config: &RunConfig,
    steps: usize,
    seed: u64,
    out: &Path,
) -> anyhow::Result<CollectReport> {
    let world = collection_world(config)?;
    let opts = config.collect.options(config.safety.input_box());
    let data = collect_data(&world, steps, seed, &opts)?;
    let bounds = estimate_lipschitz(&data)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    data.write_csv(out, &config.header_comments(seed))?;
    let report = CollectReport {
        path: out.to_path_buf(),
        rows: steps,
        l_star: bounds.l_star.iter().copied().collect(),
        delta: bounds.delta.iter().copied().collect(),
    };
    println!(
        "collected {} state rows into {} ({} trajectories, {} columns)",
        steps,
        out.display(),
        data.num_trajectories(),
        data.t_total()
    );
    println!("lipschitz constants: {:?}", report.l_star);
    println!("covering radii:      {:?}", report.delta);
    Ok(report)
}

// ---------------------------------------------------------------- run

pub struct RunSummary {
    pub episodes: usize,
    pub collisions: usize,
    pub goal_reached: usize,
    pub min_obstacle_distance: f64,
    pub mean_reach_ms: f64,
    pub mean_adjust_ms: f64,
    pub reports: Vec<EpisodeReport>,
    pub log_paths: Vec<PathBuf>,
}

pub fn build_planner(config: &RunConfig, kind: &str) -> anyhow::Result<Box<dyn Planner>> {
    match kind {
        "scripted" => Ok(Box::new(ScriptedPlanner::new(
            ScriptedKind::GoalSeeking,
            config.safety.first_step_box(),
        ))),
        "adversarial" => Ok(Box::new(ScriptedPlanner::new(
            ScriptedKind::Adversarial,
            config.safety.first_step_box(),
        ))),
        "llm" => match LlmPlanner::from_env(config.planner.planner_config()?) {
            Ok(p) => Ok(Box::new(p)),
            Err(PlannerFailure::MissingCredential(var)) => Err(anyhow::anyhow!(
                "the llm planner needs a credential: set the {var} environment variable"
            )),
            Err(e) => Err(anyhow::anyhow!("llm planner setup failed: {e}")),
        },
        other => Err(anyhow::anyhow!(
            "unknown planner {other:?}; expected scripted, adversarial, or llm"
        )),
    }
}

pub fn cmd_run(
    config: &RunConfig,
    world_name: Option<&str>,
    planner_kind: &str,
    episodes: usize,
    seed: u64,
) -> anyhow::Result<RunSummary> {
    let mut world_settings = config.world.clone();
    if let Some(name) = world_name {
        world_settings.preset = name.to_string();
    }
    let world = world_settings.build()?;
    let planner = build_planner(config, planner_kind)?;
    let bundle = load_or_collect_data(config)?;
    let out_dir = config.prepare_output_dir()?;

    let results: Vec<anyhow::Result<(EpisodeReport, PathBuf)>> = (0..episodes)
        .into_par_iter()
        .map(|i| {
            let episode_seed = seed.wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
            let env = EpisodeEnv {
                data: &bundle.data,
                bounds: &bundle.bounds,
            };
            let report = run_episode(
                &config.safety,
                planner.as_ref(),
                &world,
                &world.goal.clone(),
                &env,
                &mut rng,
            )?;
            let log_path = out_dir.join(format!("episode_{i:03}.csv"));
            write_episode_csv(&report, &log_path, &config.header_comments(episode_seed))?;
            write_tube_sidecar(
                &report,
                &log_path.with_extension("tubes.csv"),
                &config.header_comments(episode_seed),
            )?;
            Ok((report, log_path))
        })
        .collect();

    let mut reports = Vec::with_capacity(episodes);
    let mut log_paths = Vec::with_capacity(episodes);
    for r in results {
        let (report, path) = r?;
        reports.push(report);
        log_paths.push(path);
    }

    let collisions: usize = reports.iter().map(|r| r.collisions).sum();
    let goal_reached = reports.iter().filter(|r| r.goal_reached).count();
    let min_distance = reports
        .iter()
        .map(|r| r.min_obstacle_distance)
        .fold(f64::INFINITY, f64::min);
    let mean_reach = mean(reports.iter().map(|r| r.mean_reach_ms()));
    let mean_adjust = mean(reports.iter().map(|r| r.mean_adjust_ms()));

    println!(
        "ran {episodes} episodes in `{}` with the {planner_kind} planner (data: {})",
        world.name, bundle.source
    );
    println!(
        "collisions={collisions} goal_reached={goal_reached}/{episodes} \
         min_obstacle_distance={min_distance:.3} m"
    );
    println!("mean reach {mean_reach:.2} ms, mean adjust {mean_adjust:.2} ms per step");

    Ok(RunSummary {
        episodes,
        collisions,
        goal_reached,
        min_obstacle_distance: min_distance,
        mean_reach_ms: mean_reach,
        mean_adjust_ms: mean_adjust,
        reports,
        log_paths,
    })
}

fn mean(iter: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = iter.collect();
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Sidecar CSV with the position-plane tube polygons per logged step:
/// `step,set,vertex,x,y`.
fn write_tube_sidecar(
    report: &EpisodeReport,
    path: &Path,
    comments: &[String],
) -> anyhow::Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for c in comments {
        writeln!(f, "# {c}")?;
    }
    writeln!(f, "step,set,vertex,x,y")?;
    for record in &report.log {
        if let Some(sets) = &record.tube_positions {
            for (set_idx, set) in sets.iter().enumerate() {
                let verts = set
                    .vertices_2d()
                    .map_err(|e| anyhow::anyhow!("tube polygon: {e}"))?;
                for (v_idx, [x, y]) in verts.iter().enumerate() {
                    writeln!(f, "{},{},{},{},{}", record.step, set_idx, v_idx, x, y)?;
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- verify

pub struct VerifyReport {
    pub plans: usize,
    pub rollouts: usize,
    pub contained_rollouts: usize,
    pub containment_fraction: f64,
    pub mean_tube_width: f64,
    pub mean_width_ratio: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Monte Carlo reach-tube soundness: rollouts drawn inside the initial set
/// with noise sampled inside `W` must stay inside every tube set.
pub fn cmd_verify_reach(config: &RunConfig, samples: usize) -> anyhow::Result<VerifyReport> {
    let world = collection_world(config)?;
    let bundle = load_or_collect_data(config)?;
    let mut warnings = Vec::new();
    if samples == 0 {
        warnings.push("samples = 0: trivial pass, nothing was checked".to_string());
        println!("verify-reach: {}", warnings[0]);
        return Ok(VerifyReport {
            plans: 0,
            rollouts: 0,
            contained_rollouts: 0,
            containment_fraction: 1.0,
            mean_tube_width: 0.0,
            mean_width_ratio: 0.0,
            pass: true,
            warnings,
        });
    }
    let plans = config.verify.plans.max(1);
    let per_plan = (samples / plans).max(1);
    let horizon = config.verify.horizon.max(1);
    let input_box = config.safety.input_box();
    let eps = DVector::from_vec(config.safety.eps_x0.clone());
    let d_psi_max = eps[2].min(eps[3]);
    let ctx = ReachContext {
        data: &bundle.data,
        noise: &world.noise,
        bounds: &bundle.bounds,
        eps_input: config.safety.epsilon_input,
        generator_cap: config.safety.generator_cap,
    };

    let results: Vec<(usize, usize, f64, f64)> = (0..plans)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1000 + p as u64));
            let start = RobotState::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            let actions: Vec<DVector<f64>> = (0..horizon)
                .map(|_| {
                    DVector::from_fn(2, |i, _| {
                        rng.gen_range(input_box.lower()[i]..=input_box.upper()[i])
                    })
                })
                .collect();
            let initial = Zonotope::box_at(embed(&start), &eps).expect("initial set");
            let tube = reach(&initial, &actions, &ctx).expect("reach tube");
            let membership: Vec<ConstrainedZonotope> = tube
                .sets
                .iter()
                .map(|s| ConstrainedZonotope::from(s.clone()))
                .collect();

            let mut contained = 0usize;
            let mut spread_lo = vec![f64::INFINITY; 2];
            let mut spread_hi = vec![f64::NEG_INFINITY; 2];
            for _ in 0..per_plan {
                let mut state = RobotState::new(
                    start.px + rng.gen_range(-eps[0]..=eps[0]),
                    start.py + rng.gen_range(-eps[1]..=eps[1]),
                    start.psi + rng.gen_range(-d_psi_max..=d_psi_max),
                );
                let mut inside = membership[0]
                    .contains_point(&embed(&state))
                    .expect("membership");
                for (j, action) in actions.iter().enumerate() {
                    state = world.step(&state, action, &mut rng);
                    inside &= membership[j + 1]
                        .contains_point(&embed(&state))
                        .expect("membership");
                }
                for k in 0..2 {
                    let v = if k == 0 { state.px } else { state.py };
                    spread_lo[k] = spread_lo[k].min(v);
                    spread_hi[k] = spread_hi[k].max(v);
                }
                if inside {
                    contained += 1;
                }
            }
            let hull = tube.sets[horizon].interval_hull();
            let tube_width =
                (hull.upper()[0] - hull.lower()[0] + hull.upper()[1] - hull.lower()[1]) / 2.0;
            let sample_width = ((spread_hi[0] - spread_lo[0]) + (spread_hi[1] - spread_lo[1]))
                .max(1e-12)
                / 2.0;
            (contained, per_plan, tube_width, tube_width / sample_width)
        })
        .collect();

    let contained: usize = results.iter().map(|r| r.0).sum();
    let total: usize = results.iter().map(|r| r.1).sum();
    let mean_tube_width = mean(results.iter().map(|r| r.2));
    let mean_width_ratio = mean(results.iter().map(|r| r.3));
    let fraction = contained as f64 / total as f64;
    let pass = contained == total;
    println!(
        "verify-reach: containment {contained}/{total} ({:.4}) over {plans} plans x {per_plan} rollouts",
        fraction
    );
    println!(
        "mean final tube width {mean_tube_width:.3} m, tube/sample width ratio {mean_width_ratio:.2}"
    );
    Ok(VerifyReport {
        plans,
        rollouts: total,
        contained_rollouts: contained,
        containment_fraction: fraction,
        mean_tube_width,
        mean_width_ratio,
        pass,
        warnings,
    })
}

// ---------------------------------------------------------------- gradients

pub struct GradientReport {
    pub instances_checked: usize,
    pub degenerate_flagged: usize,
    pub max_rel_error: f64,
    /// (finite-difference step, max relative error) rows of the h sweep.
    pub h_sweep: Vec<(f64, f64)>,
    pub pass: bool,
}

/// End-to-end finite-difference validation of the plan gradients on random
/// linear black-box instances (the regression is exact there, so the chain
/// rule is the only thing under test).
pub fn cmd_check_gradients(config: &RunConfig, instances: usize) -> anyhow::Result<GradientReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(5000));
    let projection = position_projection();
    let fd_step = config.gradients.fd_step;
    let mut checked = 0usize;
    let mut flagged = 0usize;
    let mut max_rel: f64 = 0.0;
    let mut h_sweep: Vec<(f64, f64)> = Vec::new();
    let mut attempts = 0usize;

    while checked < instances && attempts < instances * 4 {
        attempts += 1;
        let instance = GradientInstance::random(&mut rng);
        match instance.evaluate(&projection, fd_step)? {
            InstanceOutcome::Degenerate => flagged += 1,
            InstanceOutcome::Checked(rel) => {
                if checked == 0 {
                    for h in [1e-4, 1e-5, 1e-6] {
                        if let InstanceOutcome::Checked(r) = instance.evaluate(&projection, h)? {
                            h_sweep.push((h, r));
                        }
                    }
                }
                checked += 1;
                max_rel = max_rel.max(rel);
            }
        }
    }

    let pass = checked >= instances && max_rel <= 1e-3;
    println!(
        "check-gradients: {checked} instances, {flagged} degenerate flagged and excluded, \
         max relative error {max_rel:.2e}"
    );
    for (h, r) in &h_sweep {
        println!("  h = {h:.0e}: max rel error {r:.2e}");
    }
    println!("result: {}", if pass { "PASS" } else { "FAIL" });
    Ok(GradientReport {
        instances_checked: checked,
        degenerate_flagged: flagged,
        max_rel_error: max_rel,
        h_sweep,
        pass,
    })
}

enum InstanceOutcome {
    Degenerate,
    Checked(f64),
}

/// One random linear black-box gradient-check instance.
struct GradientInstance {
    data: TrajectoryData,
    bounds: LipschitzBounds,
    noise: NoiseZonotope,
    actions: Vec<DVector<f64>>,
    initial: Zonotope,
    obstacle: ConstrainedZonotope,
}

impl GradientInstance {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let n = 4;
        let m = 2;
        let a = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                1.0
            } else {
                rng.gen_range(-0.05..0.05)
            }
        });
        let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-0.15..0.15));
        let trajs: Vec<_> = (0..400)
            .map(|_| {
                let x = DVector::from_fn(n, |_, _| rng.gen_range(-1.5..1.5));
                let u = DVector::from_fn(m, |_, _| rng.gen_range(-0.5..0.5));
                let next = &a * &x + &b * &u;
                (vec![x, next], vec![u])
            })
            .collect();
        let data = TrajectoryData::from_trajectories(&trajs).expect("instance data");
        let bounds = estimate_lipschitz(&data).expect("instance bounds");
        let noise = NoiseZonotope::zero(n);
        let actions: Vec<DVector<f64>> = (0..3)
            .map(|_| DVector::from_fn(m, |_, _| rng.gen_range(-0.4..0.4)))
            .collect();
        let initial = Zonotope::box_at(
            DVector::from_fn(n, |_, _| rng.gen_range(-0.3..0.3)),
            &DVector::from_element(n, 0.01),
        )
        .expect("initial");
        // Place the obstacle near the final set's projected center so the
        // optimum is informative.
        let offset = DVector::from_fn(2, |_, _| rng.gen_range(-0.4..0.4));
        let obstacle_center = {
            let ctx = ReachContext {
                data: &data,
                noise: &noise,
                bounds: &bounds,
                eps_input: 1e-6,
                generator_cap: 200,
            };
            let tube = reach(&initial, &actions, &ctx).expect("tube");
            let c = tube.sets[3].center();
            DVector::from_row_slice(&[c[0] + offset[0], c[1] + offset[1]])
        };
        let obstacle =
            ConstrainedZonotope::box_at(obstacle_center, &DVector::from_element(2, 0.3))
                .expect("obstacle");
        GradientInstance {
            data,
            bounds,
            noise,
            actions,
            initial,
            obstacle,
        }
    }

    fn ctx(&self) -> ReachContext<'_> {
        ReachContext {
            data: &self.data,
            noise: &self.noise,
            bounds: &self.bounds,
            eps_input: 1e-6,
            generator_cap: 200,
        }
    }

    fn v_star(&self, actions: &[DVector<f64>], projection: &DMatrix<f64>) -> anyhow::Result<f64> {
        let tube = reach(&self.initial, actions, &self.ctx())?;
        let check = reach_obstacle_check(&tube.sets[3], &self.obstacle, projection)?;
        if check.result.status != EmptinessStatus::Optimal {
            anyhow::bail!("perturbed instance became infeasible");
        }
        Ok(check.result.v_star)
    }

    fn evaluate(
        &self,
        projection: &DMatrix<f64>,
        h: f64,
    ) -> anyhow::Result<InstanceOutcome> {
        let tube = reach(&self.initial, &self.actions, &self.ctx())?;
        let check = reach_obstacle_check(&tube.sets[3], &self.obstacle, projection)?;
        if check.result.status != EmptinessStatus::Optimal {
            return Ok(InstanceOutcome::Degenerate);
        }
        let grad = vstar_center_gradient(&check.result, &check.intersection)?;
        if grad.degenerate {
            return Ok(InstanceOutcome::Degenerate);
        }
        let g_state = projection.transpose() * &grad.gradient;
        let analytic = plan_gradient(&tube, 3, &g_state)?;
        let mut worst: f64 = 0.0;
        for h_idx in 0..3 {
            for coord in 0..2 {
                let mut plus = self.actions.clone();
                plus[h_idx][coord] += h;
                let mut minus = self.actions.clone();
                minus[h_idx][coord] -= h;
                let fd = (self.v_star(&plus, projection)? - self.v_star(&minus, projection)?)
                    / (2.0 * h);
                let a = analytic[h_idx][coord];
                let denom = fd.abs().max(a.abs()).max(1e-7);
                worst = worst.max((a - fd).abs() / denom);
            }
        }
        Ok(InstanceOutcome::Checked(worst))
    }
}

// ---------------------------------------------------------------- bench

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub obstacles: usize,
    pub horizon: usize,
    pub seconds: f64,
    pub hz: f64,
}

pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub csv_path: PathBuf,
}

/// Time one safety-layer invocation (tube + all collision checks + a fixed
/// three-iteration adjustment) across the configured obstacle-count and
/// horizon grid. Timings are medians over the configured repetitions.
pub fn cmd_bench(config: &RunConfig) -> anyhow::Result<BenchReport> {
    let bundle = load_or_collect_data(config)?;
    let world = collection_world(config)?;
    let out_dir = config.prepare_output_dir()?;
    let input_box = config.safety.input_box();
    let first_box = config.safety.first_step_box();
    let projection = position_projection();
    let ctx = ReachContext {
        data: &bundle.data,
        noise: &world.noise,
        bounds: &bundle.bounds,
        eps_input: config.safety.epsilon_input,
        generator_cap: config.safety.generator_cap,
    };
    let start_state = RobotState::new(0.0, 0.0, 0.0);
    let initial = Zonotope::box_at(
        embed(&start_state),
        &DVector::from_vec(config.safety.eps_x0.clone()),
    )?;

    let mut rows = Vec::new();
    for &obstacle_count in &config.bench.obstacle_counts {
        // An arc of boxes blocking the robot so the adjustment path always
        // runs (inflated, they overlap the short-horizon tubes too).
        let obstacles: Vec<ConstrainedZonotope> = (0..obstacle_count)
            .map(|i| {
                let theta = -1.0 + 2.0 * i as f64 / (obstacle_count.max(2) - 1) as f64;
                ConstrainedZonotope::box_at(
                    DVector::from_row_slice(&[0.45 * theta.cos(), 0.45 * theta.sin()]),
                    &DVector::from_element(2, 0.27),
                )
                .expect("bench obstacle")
            })
            .collect();
        for &horizon in &config.bench.horizons {
            let mut actions = vec![DVector::from_row_slice(&[0.4, 0.0]); horizon];
            actions[0] = DVector::from_row_slice(&[0.1, 0.0]);
            let plan = Plan::new(actions)?;
            let mut samples = Vec::with_capacity(config.bench.repetitions);
            for _ in 0..config.bench.repetitions.max(1) {
                let t0 = Instant::now();
                let tube = reach(&initial, plan.actions(), &ctx)?;
                let mut any_hit = false;
                for step in 1..=tube.horizon() {
                    for obstacle in &obstacles {
                        any_hit |= reach_obstacle_check(&tube.sets[step], obstacle, &projection)?
                            .intersects;
                    }
                }
                if any_hit {
                    let params = AdjustParams {
                        gamma: config.safety.gamma,
                        deadline: Duration::from_secs(30),
                        max_iterations: 3,
                        brake_action: config.safety.brake_action(),
                        n_brake: config.safety.n_brake,
                        input_box: &input_box,
                        first_step_box: &first_box,
                        projection: &projection,
                        plateau_iterations: usize::MAX,
                        plateau_epsilon: 0.0,
                    };
                    let _ = adjust_plan(&plan, &obstacles, &initial, &ctx, &params)?;
                }
                samples.push(t0.elapsed().as_secs_f64());
            }
            samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = samples[samples.len() / 2];
            rows.push(BenchRow {
                obstacles: obstacle_count,
                horizon,
                seconds: median,
                hz: 1.0 / median,
            });
        }
    }

    let csv_path = out_dir.join("bench.csv");
    {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
        for c in config.header_comments(config.seed) {
            writeln!(f, "# {c}")?;
        }
        writeln!(f, "obstacles,horizon,execution_time_s,frequency_hz")?;
        for r in &rows {
            writeln!(
                f,
                "{},{},{:.6},{:.2}",
                r.obstacles, r.horizon, r.seconds, r.hz
            )?;
        }
    }
    println!("obstacles horizon time_s freq_hz");
    for r in &rows {
        println!(
            "{:>9} {:>7} {:>7.4} {:>7.2}",
            r.obstacles, r.horizon, r.seconds, r.hz
        );
    }
    println!("wrote {}", csv_path.display());
    Ok(BenchReport { rows, csv_path })
}

// ---------------------------------------------------------------- plot

pub struct PlotReport {
    pub trajectory_path: PathBuf,
    pub obstacles_path: PathBuf,
    pub polygons_path: PathBuf,
    pub svg_path: PathBuf,
    pub polygon_records: usize,
}

/// Emit plot data from an episode log: the trajectory polyline, obstacle
/// outlines, and one reach-set polygon per logged step (the executed step's
/// set when the tube sidecar is present, otherwise the initial-set box).
pub fn cmd_plot(config: &RunConfig, logfile: &Path, out: &Path) -> anyhow::Result<PlotReport> {
    use std::io::Write;
    let text = std::fs::read_to_string(logfile)
        .with_context(|| format!("reading {}", logfile.display()))?;
    let mut poses: Vec<(usize, f64, f64)> = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            continue;
        }
        poses.push((
            fields[0].parse().context("step column")?,
            fields[1].parse().context("px column")?,
            fields[2].parse().context("py column")?,
        ));
    }

    // Optional tube sidecar: step -> polygon of tube set index 1.
    let sidecar = logfile.with_extension("tubes.csv");
    let mut step_polygons: std::collections::BTreeMap<usize, Vec<(f64, f64)>> =
        std::collections::BTreeMap::new();
    if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar)?;
        for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                continue;
            }
            let step: usize = fields[0].parse()?;
            let set: usize = fields[1].parse()?;
            if set != 1 {
                continue;
            }
            step_polygons
                .entry(step)
                .or_default()
                .push((fields[3].parse()?, fields[4].parse()?));
        }
    }

    let world = config.world.build()?;
    let eps = &config.safety.eps_x0;
    std::fs::create_dir_all(out)?;

    let trajectory_path = out.join("trajectory.csv");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&trajectory_path)?);
        writeln!(f, "step,px,py")?;
        for (s, x, y) in &poses {
            writeln!(f, "{s},{x},{y}")?;
        }
    }

    let obstacles_path = out.join("obstacles.csv");
    let mut obstacle_polys: Vec<Vec<[f64; 2]>> = Vec::new();
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&obstacles_path)?);
        writeln!(f, "obstacle,vertex,x,y")?;
        for (i, obs) in world.obstacles.iter().enumerate() {
            let outline = Zonotope::new(obs.center().clone(), obs.generators().clone())
                .map_err(|e| anyhow::anyhow!("{e}"))?
                .vertices_2d()
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            for (v, [x, y]) in outline.iter().enumerate() {
                writeln!(f, "{i},{v},{x},{y}")?;
            }
            obstacle_polys.push(outline);
        }
    }

    let polygons_path = out.join("reach_polygons.csv");
    let mut polygon_records = 0usize;
    let mut polygons: Vec<Vec<(f64, f64)>> = Vec::new();
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&polygons_path)?);
        writeln!(f, "step,vertex,x,y")?;
        for (s, x, y) in &poses {
            let poly: Vec<(f64, f64)> = match step_polygons.get(s) {
                Some(p) if p.len() >= 3 => p.clone(),
                _ => vec![
                    (x - eps[0], y - eps[1]),
                    (x + eps[0], y - eps[1]),
                    (x + eps[0], y + eps[1]),
                    (x - eps[0], y + eps[1]),
                ],
            };
            for (v, (px, py)) in poly.iter().enumerate() {
                writeln!(f, "{s},{v},{px},{py}")?;
            }
            polygon_records += 1;
            polygons.push(poly);
        }
    }

    let svg_path = out.join("overlay.svg");
    write_svg(&svg_path, &world, &poses, &obstacle_polys, &polygons)?;

    println!(
        "plot data: {} trajectory points, {} obstacles, {polygon_records} reach polygons -> {}",
        poses.len(),
        world.obstacles.len(),
        out.display()
    );
    Ok(PlotReport {
        trajectory_path,
        obstacles_path,
        polygons_path,
        svg_path,
        polygon_records,
    })
}

fn write_svg(
    path: &Path,
    world: &WorldModel,
    poses: &[(usize, f64, f64)],
    obstacles: &[Vec<[f64; 2]>],
    polygons: &[Vec<(f64, f64)>],
) -> anyhow::Result<()> {
    use std::io::Write;
    let lo_x = world.bounds.lower()[0];
    let lo_y = world.bounds.lower()[1];
    let w = world.bounds.upper()[0] - lo_x;
    let h = world.bounds.upper()[1] - lo_y;
    let scale = 100.0;
    // World y grows upward, SVG y grows downward.
    let tx = |x: f64| (x - lo_x) * scale;
    let ty = |y: f64| (world.bounds.upper()[1] - y) * scale;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>")?;
    writeln!(
        f,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\">",
        w * scale,
        h * scale
    )?;
    for poly in obstacles {
        let pts: Vec<String> = poly
            .iter()
            .map(|[x, y]| format!("{:.1},{:.1}", tx(*x), ty(*y)))
            .collect();
        writeln!(
            f,
            "  <polygon points=\"{}\" fill=\"#888888\" stroke=\"#333333\"/>",
            pts.join(" ")
        )?;
    }
    for poly in polygons {
        let pts: Vec<String> = poly
            .iter()
            .map(|(x, y)| format!("{:.1},{:.1}", tx(*x), ty(*y)))
            .collect();
        writeln!(
            f,
            "  <polygon points=\"{}\" fill=\"#66aaff\" fill-opacity=\"0.15\" stroke=\"#3366cc\" stroke-width=\"0.5\"/>",
            pts.join(" ")
        )?;
    }
    let pts: Vec<String> = poses
        .iter()
        .map(|(_, x, y)| format!("{:.1},{:.1}", tx(*x), ty(*y)))
        .collect();
    writeln!(
        f,
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#cc3333\" stroke-width=\"1.5\"/>",
        pts.join(" ")
    )?;
    writeln!(f, "</svg>")?;
    Ok(())
}

// ---------------------------------------------------------------- shared

/// Summarize a run's stop reasons (handy for command output and tests).
pub fn reason_counts(reports: &[EpisodeReport]) -> (usize, usize, usize) {
    let mut goal = 0;
    let mut limit = 0;
    let mut braked = 0;
    for r in reports {
        match r.reason {
            StopReason::GoalReached => goal += 1,
            StopReason::StepLimit => limit += 1,
            StopReason::PlannerUnavailableBraked => braked += 1,
        }
    }
    (goal, limit, braked)
}

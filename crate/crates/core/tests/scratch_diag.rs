// Temporary diagnostics; deleted before commit.
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachguard::adjust::{adjust_plan, AdjustParams, Plan};
use reachguard::collision::{reach_obstacle_check, EmptinessStatus};
use reachguard::reachability::{
    estimate_lipschitz, reach, NoiseZonotope, ReachContext, TrajectoryData,
};
use reachguard::setops::{ConstrainedZonotope, Interval, Zonotope};
use std::time::Duration;

fn linear_system_data<R: Rng>(
    rng: &mut R,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    samples: usize,
) -> TrajectoryData {
    let n = a.nrows();
    let m = b.ncols();
    let trajs: Vec<_> = (0..samples)
        .map(|_| {
            let x = DVector::from_fn(n, |_, _| rng.gen_range(-1.5..1.5));
            let u = DVector::from_fn(m, |_, _| rng.gen_range(-0.5..0.5));
            let next = a * &x + b * &u;
            (vec![x, next], vec![u])
        })
        .collect();
    TrajectoryData::from_trajectories(&trajs).unwrap()
}

#[test]
fn diag_degeneracy_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut stats = (0, 0, 0, 0);
    for _ in 0..12 {
        let n = 2;
        let a = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                rng.gen_range(0.7..1.0)
            } else {
                rng.gen_range(-0.2..0.2)
            }
        });
        let b = DMatrix::from_fn(n, 2, |_, _| rng.gen_range(-0.4..0.4));
        let data = linear_system_data(&mut rng, &a, &b, 70);
        let bounds = estimate_lipschitz(&data).unwrap();
        let noise = NoiseZonotope::zero(n);
        let ctx = ReachContext {
            data: &data,
            noise: &noise,
            bounds: &bounds,
            eps_input: 1e-6,
            generator_cap: 200,
        };
        let plan: Vec<DVector<f64>> = (0..3)
            .map(|_| DVector::from_fn(2, |_, _| rng.gen_range(-0.3..0.3)))
            .collect();
        let init = Zonotope::point(DVector::from_fn(n, |_, _| rng.gen_range(-0.2..0.2)));
        let tube = reach(&init, &plan, &ctx).unwrap();
        let obstacle = ConstrainedZonotope::box_at(
            tube.sets[3].center() + DVector::from_row_slice(&[0.3, 0.2]),
            &DVector::from_element(n, 0.25),
        )
        .unwrap();
        let projection = DMatrix::identity(n, n);
        let check = reach_obstacle_check(&tube.sets[3], &obstacle, &projection).unwrap();
        stats.0 += 1;
        if check.result.status != EmptinessStatus::Optimal {
            stats.1 += 1;
            println!("status {:?}", check.result.status);
            continue;
        }
        if !check.result.unique_duals {
            stats.2 += 1;
            println!(
                "not SC: v*={} gens={} duals={:?}",
                check.result.v_star,
                tube.sets[3].num_generators(),
                check.result.equality_duals.as_slice()
            );
            continue;
        }
        stats.3 += 1;
    }
    println!("total {} | bad-status {} | not-sc {} | ok {}", stats.0, stats.1, stats.2, stats.3);
}

#[test]
fn diag_adjust_progress() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let a = DMatrix::identity(2, 2);
    let b = DMatrix::identity(2, 2);
    let data = linear_system_data(&mut rng, &a, &b, 300);
    let bounds = estimate_lipschitz(&data).unwrap();
    println!("L = {:?}, delta = {:?}", bounds.l_star.as_slice(), bounds.delta.as_slice());
    let noise = NoiseZonotope::zero(2);
    let ctx = ReachContext {
        data: &data,
        noise: &noise,
        bounds: &bounds,
        eps_input: 1e-6,
        generator_cap: 200,
    };
    let input_box = Interval::new(
        DVector::from_element(2, -0.5),
        DVector::from_element(2, 0.5),
    )
    .unwrap();
    let projection = DMatrix::identity(2, 2);
    let obstacle = ConstrainedZonotope::box_at(
        DVector::from_row_slice(&[0.9, 0.2]),
        &DVector::from_element(2, 0.3),
    )
    .unwrap();
    let plan = Plan::new(vec![DVector::from_row_slice(&[0.4, 0.0]); 4]).unwrap();
    let init = Zonotope::box_at(DVector::zeros(2), &DVector::from_element(2, 0.01)).unwrap();
    for iters in [5, 15, 30, 60, 120, 300] {
        let params = AdjustParams {
            gamma: 0.05,
            deadline: Duration::from_secs(30),
            max_iterations: iters,
            brake_action: DVector::zeros(2),
            n_brake: 1,
            input_box: &input_box,
            first_step_box: &input_box,
            projection: &projection,
            plateau_iterations: 50,
            plateau_epsilon: 1e-9,
        };
        let o = adjust_plan(&plan, &[obstacle.clone()], &init, &ctx, &params).unwrap();
        println!(
            "iters={} certified={} min_v={:.4} plan={:?}",
            o.iterations,
            o.certified,
            o.min_v_star,
            o.plan
                .actions()
                .iter()
                .map(|a| (a[0], a[1]))
                .collect::<Vec<_>>()
        );
        if o.certified {
            break;
        }
    }
}

#[test]
fn diag_emit_prompt() {
    let q = reachguard::planners::PlannerQuery {
        pose: (-1.25, 0.5, 0.7853981633974483),
        goal: DVector::from_row_slice(&[2.0, 2.0]),
        reaching_radius: 0.3,
        los_angle: -0.35,
        lidar: DVector::from_row_slice(&[
            3.5, 3.5, 2.1, 1.8, 1.75, 1.8, 2.1, 3.5, 3.5, 3.5, 3.5, 3.5, 3.5, 3.5, 3.5, 3.5,
            3.5, 3.5, 3.5,
        ]),
        lidar_max_range: 3.5,
        input_bounds: Interval::new(
            DVector::from_row_slice(&[0.0, -0.5]),
            DVector::from_row_slice(&[0.5, 0.5]),
        )
        .unwrap(),
        horizon: 3,
    };
    std::fs::write(
        "tests/fixtures/prompt_golden.txt",
        reachguard::planners::build_prompt(&q),
    )
    .unwrap();
}

#[test]
fn diag_unicycle_tube_radii() {
    let open = reachguard::simworld::make_world("open").unwrap();
    let data = reachguard::simworld::collect_data(
        &open, 600, 7, &reachguard::simworld::CollectOptions::default()).unwrap();
    let bounds = estimate_lipschitz(&data).unwrap();
    println!("L = {:?}", bounds.l_star.as_slice());
    println!("delta = {:?}", bounds.delta.as_slice());
    let ctx = ReachContext { data: &data, noise: &open.noise, bounds: &bounds, eps_input: 1e-6, generator_cap: 200 };
    let s = reachguard::simworld::RobotState::new(0.0, 0.0, 0.0);
    let init = Zonotope::box_at(reachguard::simworld::embed(&s), &DVector::from_row_slice(&[0.01,0.01,0.01,0.01])).unwrap();
    let plan = vec![DVector::from_row_slice(&[0.1, 0.0]), DVector::from_row_slice(&[0.5, 0.0]), DVector::from_row_slice(&[0.5, 0.0])];
    let tube = reach(&init, &plan, &ctx).unwrap();
    for (j, set) in tube.sets.iter().enumerate() {
        let r = set.radius_vector();
        println!("step {j}: center=({:.3},{:.3}) radius=({:.3},{:.3},{:.3},{:.3})", set.center()[0], set.center()[1], r[0], r[1], r[2], r[3]);
    }
}

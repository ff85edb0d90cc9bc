//! Plan repair by projected gradient steps on the collision-LP value.
//!
//! A collision at tube step `k` yields `∇_{ĉ_k} v*` from the LP duals; the
//! chain rule through the tube's center recursion turns that into gradients
//! for every earlier action:
//!
//! ```text
//!   ∇_{u_h} v* = ∇_{ĉ_k} v* · S_{k-1} · S_{k-2} · … · S_{h+1} · B_h
//! ```
//!
//! where `S_j` and `B_j` are the state- and input-column blocks of the step
//! regressor `M_j` (held constant within a gradient step and refitted on
//! every tube recomputation). Collision avoidance requires `v* > 1`, so the
//! update ascends `v*` and projects back onto the admissible input box; the
//! plan's braking tail stays fixed so every certified plan ends in the
//! failsafe.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::collision::{self, EmptinessStatus};
use crate::error::{Error, Result};
use crate::reachability::{reach, ReachContext, ReachTube};
use crate::setops::{ConstrainedZonotope, Interval, Zonotope};

/// A finite sequence of input actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    actions: Vec<DVector<f64>>,
}

impl Plan {
    pub fn new(actions: Vec<DVector<f64>>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidArgument("plan must have horizon >= 1".into()));
        }
        let m = actions[0].len();
        if actions.iter().any(|a| a.len() != m) {
            return Err(Error::DimensionMismatch(
                "plan actions have inconsistent dimensions".into(),
            ));
        }
        Ok(Self { actions })
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn actions(&self) -> &[DVector<f64>] {
        &self.actions
    }

    pub fn action(&self, idx: usize) -> &DVector<f64> {
        &self.actions[idx]
    }

    /// Receding-horizon shift: drop the first action and append a brake.
    pub fn shifted_with_brake(&self, brake: &DVector<f64>) -> Plan {
        let mut actions: Vec<DVector<f64>> = self.actions[1..].to_vec();
        actions.push(brake.clone());
        Plan { actions }
    }

    /// Replace the final `n_brake` actions with the brake action.
    pub fn with_brake_tail(&self, brake: &DVector<f64>, n_brake: usize) -> Plan {
        let mut actions = self.actions.clone();
        let h = actions.len();
        for a in actions.iter_mut().skip(h.saturating_sub(n_brake)) {
            *a = brake.clone();
        }
        Plan { actions }
    }

    /// Clamp every action into the admissible box (the first action into its
    /// own, typically tighter, box).
    pub fn clamped(&self, input_box: &Interval, first_step_box: &Interval) -> Plan {
        let actions = self
            .actions
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if i == 0 {
                    first_step_box.clamp(a)
                } else {
                    input_box.clamp(a)
                }
            })
            .collect();
        Plan { actions }
    }
}

/// State- and input-column blocks of a step regressor `M`.
#[derive(Debug, Clone)]
pub struct CenterJacobians {
    pub state_block: DMatrix<f64>,
    pub input_block: DMatrix<f64>,
}

/// Split `M` (shape `n × (1 + n + m)`) into the block multiplying `x - x*`
/// (columns `1..=n`) and the block multiplying `u - u*` (the trailing `m`
/// columns).
pub fn center_jacobians(m: &DMatrix<f64>) -> Result<CenterJacobians> {
    let n = m.nrows();
    if m.ncols() < 1 + n {
        return Err(Error::DimensionMismatch(format!(
            "regressor is {}x{}, expected at least {} columns",
            n,
            m.ncols(),
            1 + n
        )));
    }
    let m_in = m.ncols() - 1 - n;
    Ok(CenterJacobians {
        state_block: m.columns(1, n).into_owned(),
        input_block: m.columns(1 + n, m_in).into_owned(),
    })
}

/// Backward accumulation of `∇_{u_h} v*` for every `h < k` from the gradient
/// of `v*` with respect to the step-`k` reach-set center (in state
/// coordinates). Regressors are treated as constants.
pub fn plan_gradient(
    tube: &ReachTube,
    collision_step: usize,
    v_grad_center: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    if collision_step == 0 || collision_step > tube.horizon() {
        return Err(Error::InvalidArgument(format!(
            "collision step {collision_step} outside tube horizon {}",
            tube.horizon()
        )));
    }
    let n = tube.sets[0].dim();
    if v_grad_center.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "center gradient has dimension {}, state dimension is {n}",
            v_grad_center.len()
        )));
    }
    let mut row: RowDVector<f64> = v_grad_center.transpose();
    let mut grads: Vec<DVector<f64>> = Vec::with_capacity(collision_step);
    for j in (0..collision_step).rev() {
        let jac = center_jacobians(&tube.regressors[j])?;
        grads.push((&row * &jac.input_block).transpose());
        if j > 0 {
            row *= &jac.state_block;
        }
    }
    grads.reverse();
    Ok(grads)
}

/// Euclidean projection onto the admissible input box.
pub fn project_input(u: &DVector<f64>, bounds: &Interval) -> DVector<f64> {
    bounds.clamp(u)
}

/// Outcome of an adjustment attempt.
#[derive(Debug, Clone)]
pub struct AdjustOutcome {
    pub plan: Plan,
    pub certified: bool,
    /// Number of gradient iterations taken.
    pub iterations: usize,
    /// Smallest `v*` over all (step, obstacle) pairs of the final tube.
    pub min_v_star: f64,
}

/// Knobs for [`adjust_plan`].
#[derive(Debug, Clone)]
pub struct AdjustParams<'a> {
    /// Gradient step size in input units.
    pub gamma: f64,
    /// Wall-clock budget; expiry returns the best-effort plan uncertified.
    pub deadline: Duration,
    /// Hard cap on gradient iterations within the deadline.
    pub max_iterations: usize,
    pub brake_action: DVector<f64>,
    pub n_brake: usize,
    pub input_box: &'a Interval,
    pub first_step_box: &'a Interval,
    /// Maps reach-state coordinates onto obstacle coordinates.
    pub projection: &'a DMatrix<f64>,
    /// Bail out early when the worst `v*` has not improved by
    /// `plateau_epsilon` for this many consecutive iterations (the instance
    /// is treated as infeasible without burning the whole deadline).
    pub plateau_iterations: usize,
    pub plateau_epsilon: f64,
}

/// Repair a plan until its whole reach tube clears every obstacle, or report
/// failure within the deadline. The braking tail is pinned before the first
/// check, so a certified plan always embeds the failsafe.
///
/// Certification comes from a fresh tube computed after the last gradient
/// step; a plan is certified only when every (step, obstacle) pair has
/// `v* > 1` (boundary values count as colliding).
pub fn adjust_plan(
    plan: &Plan,
    obstacles: &[ConstrainedZonotope],
    initial: &Zonotope,
    ctx: &ReachContext<'_>,
    params: &AdjustParams<'_>,
) -> Result<AdjustOutcome> {
    if plan.horizon() < params.n_brake {
        return Err(Error::InvalidArgument(format!(
            "plan horizon {} shorter than braking tail {}",
            plan.horizon(),
            params.n_brake
        )));
    }
    let start = Instant::now();
    let mut current = plan.with_brake_tail(&params.brake_action, params.n_brake);
    let horizon = current.horizon();
    let adjustable = horizon - params.n_brake;
    let m_in = current.action(0).len();
    let mut iterations = 0usize;
    let mut best_min_v = f64::NEG_INFINITY;
    let mut stalled = 0usize;

    loop {
        let tube = reach(initial, current.actions(), ctx)?;
        let mut min_v = f64::INFINITY;
        let mut colliding = Vec::new();
        for step in 1..=horizon {
            for obstacle in obstacles {
                let check =
                    collision::reach_obstacle_check(&tube.sets[step], obstacle, params.projection)?;
                let effective_v = match check.result.status {
                    EmptinessStatus::Optimal => check.result.v_star,
                    EmptinessStatus::InfeasibleEqualities => f64::INFINITY,
                    EmptinessStatus::UnboundedGuard => 0.0,
                };
                min_v = min_v.min(effective_v);
                if check.intersects {
                    colliding.push((step, check));
                }
            }
        }
        if colliding.is_empty() {
            return Ok(AdjustOutcome {
                plan: current,
                certified: true,
                iterations,
                min_v_star: min_v,
            });
        }
        if min_v > best_min_v + params.plateau_epsilon {
            best_min_v = min_v;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if start.elapsed() >= params.deadline
            || iterations >= params.max_iterations
            || stalled >= params.plateau_iterations
        {
            return Ok(AdjustOutcome {
                plan: current,
                certified: false,
                iterations,
                min_v_star: min_v,
            });
        }

        // Aggregate ascent directions over all colliding pairs.
        let mut grads = vec![DVector::zeros(m_in); horizon];
        let mut any = false;
        for (step, check) in &colliding {
            if check.result.status != EmptinessStatus::Optimal {
                continue;
            }
            let cg = collision::vstar_center_gradient(&check.result, &check.intersection)?;
            let g_state = params.projection.transpose() * &cg.gradient;
            for (h, g) in plan_gradient(&tube, *step, &g_state)?.into_iter().enumerate() {
                if h < adjustable {
                    grads[h] += g;
                    any = true;
                }
            }
        }
        if !any {
            return Ok(AdjustOutcome {
                plan: current,
                certified: false,
                iterations,
                min_v_star: min_v,
            });
        }
        let mut actions = current.actions().to_vec();
        for (h, action) in actions.iter_mut().enumerate().take(adjustable) {
            if grads[h].amax() == 0.0 {
                continue;
            }
            let stepped = &*action + params.gamma * &grads[h];
            let bounds = if h == 0 {
                params.first_step_box
            } else {
                params.input_box
            };
            *action = project_input(&stepped, bounds);
        }
        current = Plan::new(actions)?;
        iterations += 1;
    }
}

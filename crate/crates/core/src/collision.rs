//! Emptiness checking of constrained zonotopes and the sensitivity of the
//! optimal value with respect to reach-set centers.
//!
//! Nonemptiness is decided by the linear program
//! `v* = min { v : A_∩ z = b_∩, |z| <= v }`: the intersection is nonempty
//! iff `v* <= 1`. The program's equality duals are the gradient of `v*`
//! with respect to `b_∩`, which chains into plan gradients through the
//! intersection's right-hand side.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lp;
use crate::setops::{ConstrainedZonotope, Zonotope};

/// Values `v* in (1, 1 + BOUNDARY_TOL]` are conservatively treated as
/// intersecting.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmptinessStatus {
    Optimal,
    /// `A_∩ z = b_∩` has no solution; the set is empty regardless of `v*`.
    InfeasibleEqualities,
    /// Numerical guard; never expected for well-posed inputs.
    UnboundedGuard,
}

/// Outcome of the emptiness linear program.
#[derive(Debug, Clone)]
pub struct EmptinessResult {
    pub v_star: f64,
    pub z_star: DVector<f64>,
    /// Sensitivity `∂v*/∂b_∩` (one entry per constraint row).
    pub equality_duals: DVector<f64>,
    pub status: EmptinessStatus,
    /// False when the optimum is degenerate and the duals are only a
    /// subgradient of `v*`.
    pub unique_duals: bool,
}

impl EmptinessResult {
    /// Nonempty iff the equalities are consistent and `v* <= 1` (with the
    /// conservative boundary tolerance).
    pub fn is_nonempty(&self) -> bool {
        match self.status {
            EmptinessStatus::Optimal => self.v_star <= 1.0 + BOUNDARY_TOL,
            EmptinessStatus::InfeasibleEqualities => false,
            EmptinessStatus::UnboundedGuard => true, // conservative
        }
    }
}

/// Solve the emptiness program for a constrained zonotope.
///
/// A set with no constraints is always nonempty; it reports `v* = 0`.
pub fn emptiness(c: &ConstrainedZonotope) -> EmptinessResult {
    if c.num_constraints() == 0 {
        return EmptinessResult {
            v_star: 0.0,
            z_star: DVector::zeros(c.num_generators()),
            equality_duals: DVector::zeros(0),
            status: EmptinessStatus::Optimal,
            unique_duals: true,
        };
    }
    let sol = lp::solve_min_inf_norm(c.constraint_matrix(), c.constraint_vector());
    EmptinessResult {
        v_star: sol.v_star,
        z_star: sol.z_star,
        equality_duals: sol.duals,
        status: match sol.status {
            lp::LpStatus::Optimal => EmptinessStatus::Optimal,
            lp::LpStatus::InfeasibleEqualities => EmptinessStatus::InfeasibleEqualities,
            lp::LpStatus::UnboundedGuard => EmptinessStatus::UnboundedGuard,
        },
        unique_duals: sol.unique_duals,
    }
}

/// Result of checking one reach set against one obstacle.
#[derive(Debug, Clone)]
pub struct CollisionCheck {
    pub intersects: bool,
    pub result: EmptinessResult,
    pub intersection: ConstrainedZonotope,
}

/// Project a reach set onto the obstacle's coordinates, intersect, and run
/// the emptiness program. `projection` maps reach-state dimension to the
/// obstacle dimension (typically the position-plane selection matrix).
pub fn reach_obstacle_check(
    reach: &Zonotope,
    obstacle: &ConstrainedZonotope,
    projection: &DMatrix<f64>,
) -> Result<CollisionCheck> {
    if projection.ncols() != reach.dim() || projection.nrows() != obstacle.dim() {
        return Err(Error::DimensionMismatch(format!(
            "projection is {}x{}, reach dimension {}, obstacle dimension {}",
            projection.nrows(),
            projection.ncols(),
            reach.dim(),
            obstacle.dim()
        )));
    }
    let projected: ConstrainedZonotope = reach.linear_map(projection)?.into();
    let intersection = projected.intersect(obstacle)?;
    let result = emptiness(&intersection);
    Ok(CollisionCheck {
        intersects: result.is_nonempty(),
        result,
        intersection,
    })
}

/// Gradient of `v*` with respect to the first operand's center.
#[derive(Debug, Clone)]
pub struct CenterGradient {
    pub gradient: DVector<f64>,
    /// True when the duals were not unique; the gradient is then only a
    /// descent-usable subgradient.
    pub degenerate: bool,
}

/// Sensitivity of `v*` to the center of the first set of the intersection
/// (the reach set in [`reach_obstacle_check`]).
///
/// That center enters the intersection only through the last block of
/// `b_∩ = [b_1; b_2; c_2 - c_1]`, so the gradient is the negated equality
/// duals restricted to the coupling rows.
pub fn vstar_center_gradient(
    result: &EmptinessResult,
    intersection: &ConstrainedZonotope,
) -> Result<CenterGradient> {
    if result.status != EmptinessStatus::Optimal {
        return Err(Error::InvalidArgument(
            "center gradient requires an optimal emptiness result".into(),
        ));
    }
    let n = intersection.dim();
    let n_c = intersection.num_constraints();
    if result.equality_duals.len() != n_c {
        return Err(Error::DimensionMismatch(format!(
            "dual vector has {} entries, intersection has {} constraints",
            result.equality_duals.len(),
            n_c
        )));
    }
    if n_c < n {
        return Err(Error::InvalidArgument(
            "intersection lacks the coupling constraint block".into(),
        ));
    }
    let gradient = -result.equality_duals.rows(n_c - n, n).into_owned();
    Ok(CenterGradient {
        gradient,
        degenerate: !result.unique_duals,
    })
}

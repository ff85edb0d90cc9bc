//! Dense primal-dual interior-point solver for the infinity-norm feasibility
//! program
//!
//! ```text
//!     v* = min { v : A z = b, |z| <= v·1 }
//! ```
//!
//! which decides emptiness of a constrained zonotope (nonempty iff v* <= 1)
//! and whose equality duals give the sensitivity of v* to the right-hand
//! side. The problem is small (a few hundred variables, a handful of
//! equality rows), so a self-contained dense solver keeps the safety core
//! auditable and avoids an external LP dependency.
//!
//! The Newton systems exploit the structure of the two-sided bound
//! `-v·1 <= z <= v·1`: eliminating the bound multipliers leaves a diagonal
//! block for `z` plus a border of size `1 + n_c`, so each iteration costs
//! `O(n_g · n_c^2)`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    /// The equality system `A z = b` has no solution at all.
    InfeasibleEqualities,
    /// Numerical blow-up guard; should not occur for well-posed inputs.
    UnboundedGuard,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub v_star: f64,
    pub z_star: DVector<f64>,
    /// Sensitivity `∂v*/∂b` (the equality-constraint duals).
    pub duals: DVector<f64>,
    pub status: LpStatus,
    /// False when the equality duals are not unique (rank-deficient
    /// equality rows or a degenerate active set), i.e. they may be any
    /// element of a subdifferential rather than a gradient.
    pub unique_duals: bool,
    #[allow(dead_code)]
    pub iterations: usize,
}

impl LpSolution {
    fn infeasible(n_c: usize) -> Self {
        LpSolution {
            v_star: f64::INFINITY,
            z_star: DVector::zeros(0),
            duals: DVector::zeros(n_c),
            status: LpStatus::InfeasibleEqualities,
            unique_duals: false,
            iterations: 0,
        }
    }
}

const MAX_ITERS: usize = 100;
const RESIDUAL_TOL: f64 = 1e-11;
const GAP_TOL: f64 = 1e-12;

/// Solve `min v s.t. A z = b, |z| <= v` and report optimum, minimizer,
/// right-hand-side sensitivity, and a dual-uniqueness flag.
pub(crate) fn solve_min_inf_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> LpSolution {
    let n_c = a.nrows();
    let n_g = a.ncols();
    assert_eq!(n_c, b.len(), "constraint matrix/vector row mismatch");

    if n_c == 0 {
        // No equality constraints: z = 0 is feasible with v = 0.
        return LpSolution {
            v_star: 0.0,
            z_star: DVector::zeros(n_g),
            duals: DVector::zeros(0),
            status: LpStatus::Optimal,
            unique_duals: true,
            iterations: 0,
        };
    }

    let scale = 1.0 + b.amax();

    if n_g == 0 {
        // No coefficients at all: A z = b is consistent only for b = 0,
        // in which case the zonotope is a point.
        return if b.amax() <= 1e-9 * scale {
            LpSolution {
                v_star: 0.0,
                z_star: DVector::zeros(0),
                duals: DVector::zeros(n_c),
                status: LpStatus::Optimal,
                unique_duals: false,
                iterations: 0,
            }
        } else {
            LpSolution::infeasible(n_c)
        };
    }

    // Least-squares pre-solve: consistency check, rank check, and a centered
    // starting point.
    let svd = a.clone().svd(true, true);
    let sv_max = svd.singular_values.max();
    let rank_tol = 1e-12 * sv_max.max(1.0) * (n_c.max(n_g) as f64);
    let rank = svd.singular_values.iter().filter(|s| **s > rank_tol).count();
    let z_ls = match svd.solve(b, rank_tol) {
        Ok(z) => z,
        Err(_) => return LpSolution::infeasible(n_c),
    };
    let residual = (a * &z_ls - b).amax();
    if residual > 1e-9 * scale {
        return LpSolution::infeasible(n_c);
    }
    let full_row_rank = rank == n_c;

    // Interior starting point.
    let mut z = z_ls;
    let mut v = 1.2 * z.amax() + 0.5;
    let mut s_plus = DVector::from_fn(n_g, |i, _| v - z[i]);
    let mut s_minus = DVector::from_fn(n_g, |i, _| v + z[i]);
    let mut l_plus = DVector::from_element(n_g, 0.5 / n_g as f64);
    let mut l_minus = DVector::from_element(n_g, 0.5 / n_g as f64);
    let mut y = DVector::zeros(n_c);

    let at = a.transpose();
    let mut iterations = 0;
    let mut converged = false;
    let reg = 1e-12 * sv_max.max(1.0).powi(2);

    for iter in 0..MAX_ITERS {
        iterations = iter + 1;

        // KKT residuals.
        let r_z = &at * &y + &l_plus - &l_minus;
        let r_v = 1.0 - (l_plus.sum() + l_minus.sum());
        let r_b = a * &z - b;
        let r_plus = DVector::from_fn(n_g, |i, _| z[i] - v + s_plus[i]);
        let r_minus = DVector::from_fn(n_g, |i, _| -z[i] - v + s_minus[i]);
        let mu = (l_plus.dot(&s_plus) + l_minus.dot(&s_minus)) / (2.0 * n_g as f64);

        let feas = r_z
            .amax()
            .max(r_v.abs())
            .max(r_b.amax() / scale)
            .max(r_plus.amax())
            .max(r_minus.amax());
        if feas <= RESIDUAL_TOL && mu <= GAP_TOL * (1.0 + v.abs()) {
            converged = true;
            break;
        }
        if !feas.is_finite() || !mu.is_finite() {
            return LpSolution {
                v_star: f64::NAN,
                z_star: z,
                duals: DVector::zeros(n_c),
                status: LpStatus::UnboundedGuard,
                unique_duals: false,
                iterations,
            };
        }

        // Diagonal scaling terms.
        let d_plus = DVector::from_fn(n_g, |i, _| l_plus[i] / s_plus[i]);
        let d_minus = DVector::from_fn(n_g, |i, _| l_minus[i] / s_minus[i]);
        let e_inv = DVector::from_fn(n_g, |i, _| 1.0 / (d_plus[i] + d_minus[i]));
        let f = DVector::from_fn(n_g, |i, _| d_minus[i] - d_plus[i]);
        let g: f64 = d_plus.sum() + d_minus.sum();

        // Border system K · [dv; dy] = rhs, shared by both Mehrotra passes.
        let dim = 1 + n_c;
        let mut k = DMatrix::zeros(dim, dim);
        let fef: f64 = (0..n_g).map(|i| f[i] * f[i] * e_inv[i]).sum();
        k[(0, 0)] = g - fef;
        // a_ef = A · E^{-1} f, a_e_at = A · E^{-1} · A'.
        let mut a_ef = DVector::zeros(n_c);
        for r in 0..n_c {
            let mut acc = 0.0;
            for i in 0..n_g {
                acc += a[(r, i)] * e_inv[i] * f[i];
            }
            a_ef[r] = acc;
        }
        for r in 0..n_c {
            k[(0, 1 + r)] = -a_ef[r];
            k[(1 + r, 0)] = -a_ef[r];
        }
        for r in 0..n_c {
            for c in r..n_c {
                let mut acc = 0.0;
                for i in 0..n_g {
                    acc += a[(r, i)] * e_inv[i] * a[(c, i)];
                }
                k[(1 + r, 1 + c)] = -acc;
                k[(1 + c, 1 + r)] = -acc;
            }
            k[(1 + r, 1 + r)] -= reg;
        }
        let lu = k.lu();

        let solve_direction =
            |rc_plus: &DVector<f64>, rc_minus: &DVector<f64>| -> Option<Direction> {
                let w_plus =
                    DVector::from_fn(n_g, |i, _| (-rc_plus[i] + l_plus[i] * r_plus[i]) / s_plus[i]);
                let w_minus = DVector::from_fn(n_g, |i, _| {
                    (-rc_minus[i] + l_minus[i] * r_minus[i]) / s_minus[i]
                });
                let r1 = DVector::from_fn(n_g, |i, _| -r_z[i] - w_plus[i] + w_minus[i]);
                let r2 = w_plus.sum() + w_minus.sum() - r_v;
                // rhs = [r2 - f'E^{-1}r1 ; -r_b - A E^{-1} r1]
                let mut rhs = DVector::zeros(dim);
                let mut fe_r1 = 0.0;
                for i in 0..n_g {
                    fe_r1 += f[i] * e_inv[i] * r1[i];
                }
                rhs[0] = r2 - fe_r1;
                for r in 0..n_c {
                    let mut acc = 0.0;
                    for i in 0..n_g {
                        acc += a[(r, i)] * e_inv[i] * r1[i];
                    }
                    rhs[1 + r] = -r_b[r] - acc;
                }
                let sol = lu.solve(&rhs)?;
                let dv = sol[0];
                let dy = sol.rows(1, n_c).into_owned();
                let aty_d = &at * &dy;
                let dz =
                    DVector::from_fn(n_g, |i, _| e_inv[i] * (r1[i] - f[i] * dv - aty_d[i]));
                let ds_plus = DVector::from_fn(n_g, |i, _| -r_plus[i] - dz[i] + dv);
                let ds_minus = DVector::from_fn(n_g, |i, _| -r_minus[i] + dz[i] + dv);
                let dl_plus = DVector::from_fn(n_g, |i, _| {
                    (-rc_plus[i] - l_plus[i] * ds_plus[i]) / s_plus[i]
                });
                let dl_minus = DVector::from_fn(n_g, |i, _| {
                    (-rc_minus[i] - l_minus[i] * ds_minus[i]) / s_minus[i]
                });
                Some(Direction {
                    dz,
                    dv,
                    dy,
                    ds_plus,
                    ds_minus,
                    dl_plus,
                    dl_minus,
                })
            };

        // Predictor (affine) pass.
        let rc_plus_aff = DVector::from_fn(n_g, |i, _| l_plus[i] * s_plus[i]);
        let rc_minus_aff = DVector::from_fn(n_g, |i, _| l_minus[i] * s_minus[i]);
        let aff = match solve_direction(&rc_plus_aff, &rc_minus_aff) {
            Some(d) => d,
            None => break,
        };
        let alpha_p_aff = step_length(&s_plus, &aff.ds_plus)
            .min(step_length(&s_minus, &aff.ds_minus));
        let alpha_d_aff = step_length(&l_plus, &aff.dl_plus)
            .min(step_length(&l_minus, &aff.dl_minus));
        let mu_aff = {
            let mut acc = 0.0;
            for i in 0..n_g {
                acc += (l_plus[i] + alpha_d_aff * aff.dl_plus[i])
                    * (s_plus[i] + alpha_p_aff * aff.ds_plus[i]);
                acc += (l_minus[i] + alpha_d_aff * aff.dl_minus[i])
                    * (s_minus[i] + alpha_p_aff * aff.ds_minus[i]);
            }
            acc / (2.0 * n_g as f64)
        };
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        // Corrector pass.
        let rc_plus = DVector::from_fn(n_g, |i, _| {
            l_plus[i] * s_plus[i] + aff.dl_plus[i] * aff.ds_plus[i] - sigma * mu
        });
        let rc_minus = DVector::from_fn(n_g, |i, _| {
            l_minus[i] * s_minus[i] + aff.dl_minus[i] * aff.ds_minus[i] - sigma * mu
        });
        let dir = match solve_direction(&rc_plus, &rc_minus) {
            Some(d) => d,
            None => break,
        };

        let tau = 0.995_f64.max(1.0 - 0.1 * mu);
        let alpha_p = (tau
            * step_length(&s_plus, &dir.ds_plus).min(step_length(&s_minus, &dir.ds_minus)))
        .min(1.0);
        let alpha_d = (tau
            * step_length(&l_plus, &dir.dl_plus).min(step_length(&l_minus, &dir.dl_minus)))
        .min(1.0);

        z += alpha_p * &dir.dz;
        v += alpha_p * dir.dv;
        s_plus += alpha_p * &dir.ds_plus;
        s_minus += alpha_p * &dir.ds_minus;
        y += alpha_d * &dir.dy;
        l_plus += alpha_d * &dir.dl_plus;
        l_minus += alpha_d * &dir.dl_minus;
    }

    // Dual uniqueness: with the active sets fixed, y must satisfy
    // `a_i' y = 0` for every doubly inactive coordinate together with the
    // multiplier normalization `w' y = 1` built from the active sides. The
    // duals are a unique gradient (not just a subgradient) iff those
    // conditions pin y, i.e. the stacked columns span the dual space.
    let v_scale = 1.0 + v.abs();
    let tau = 1e-6 * v_scale;
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut w_col = DVector::zeros(n_c);
    for i in 0..n_g {
        let plus_active = s_plus[i] <= tau;
        let minus_active = s_minus[i] <= tau;
        let a_i = a.column(i).into_owned();
        if !plus_active && !minus_active {
            cols.push(a_i);
        } else {
            if plus_active {
                w_col -= &a_i;
            }
            if minus_active {
                w_col += &a_i;
            }
        }
    }
    cols.push(w_col);
    let mut q = DMatrix::zeros(n_c, cols.len());
    for (k, c) in cols.iter().enumerate() {
        q.column_mut(k).copy_from(c);
    }
    let q_svd = q.svd(false, false);
    let q_max = q_svd.singular_values.max();
    let q_rank = q_svd
        .singular_values
        .iter()
        .filter(|s| **s > 1e-9 * q_max.max(1.0))
        .count();
    let unique_duals = converged && full_row_rank && q_rank == n_c;

    LpSolution {
        v_star: v,
        z_star: z,
        duals: -y,
        status: LpStatus::Optimal,
        unique_duals,
        iterations,
    }
}

struct Direction {
    dz: DVector<f64>,
    dv: f64,
    dy: DVector<f64>,
    ds_plus: DVector<f64>,
    ds_minus: DVector<f64>,
    dl_plus: DVector<f64>,
    dl_minus: DVector<f64>,
}

/// Largest alpha in (0, 1] keeping `x + alpha dx > 0`.
fn step_length(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    let mut alpha = 1.0_f64;
    for i in 0..x.len() {
        if dx[i] < 0.0 {
            alpha = alpha.min(-x[i] / dx[i]);
        }
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_two_variable_boundary() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_row_slice(&[2.0]);
        let sol = solve_min_inf_norm(&a, &b);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_relative_eq!(sol.v_star, 1.0, epsilon = 1e-8);
        assert_relative_eq!(sol.z_star[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(sol.z_star[1], 1.0, epsilon = 1e-6);
        // v*(b) = b/2 here, so the sensitivity is 1/2.
        assert_relative_eq!(sol.duals[0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn symmetric_two_variable_infeasible_region() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_row_slice(&[3.0]);
        let sol = solve_min_inf_norm(&a, &b);
        assert_relative_eq!(sol.v_star, 1.5, epsilon = 1e-8);
        assert_relative_eq!(sol.z_star[0], 1.5, epsilon = 1e-6);
    }

    #[test]
    fn zero_row_nonzero_rhs_is_infeasible() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let b = DVector::from_row_slice(&[1.0, 0.5]);
        let sol = solve_min_inf_norm(&a, &b);
        assert_eq!(sol.status, LpStatus::InfeasibleEqualities);
    }

    #[test]
    fn minimizer_satisfies_constraints_and_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let n_c = rng.gen_range(1..=4);
            let n_g = rng.gen_range(n_c..=12);
            let a = DMatrix::from_fn(n_c, n_g, |_, _| rng.gen_range(-1.0..1.0));
            let b = DVector::from_fn(n_c, |_, _| rng.gen_range(-1.0..1.0));
            let sol = solve_min_inf_norm(&a, &b);
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!((&a * &sol.z_star - &b).amax() < 1e-8);
            assert!(sol.z_star.amax() <= sol.v_star + 1e-8);
        }
    }

    #[test]
    fn duals_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut checked = 0;
        for _ in 0..40 {
            let n_c = rng.gen_range(1..=3);
            let n_g = rng.gen_range(n_c + 1..=10);
            let a = DMatrix::from_fn(n_c, n_g, |_, _| rng.gen_range(-1.0..1.0));
            let b = DVector::from_fn(n_c, |_, _| rng.gen_range(-1.0..1.0));
            let sol = solve_min_inf_norm(&a, &b);
            if sol.status != LpStatus::Optimal || !sol.unique_duals {
                continue;
            }
            checked += 1;
            let h = 1e-6;
            for r in 0..n_c {
                let mut bp = b.clone();
                bp[r] += h;
                let mut bm = b.clone();
                bm[r] -= h;
                let vp = solve_min_inf_norm(&a, &bp).v_star;
                let vm = solve_min_inf_norm(&a, &bm).v_star;
                let fd = (vp - vm) / (2.0 * h);
                assert_relative_eq!(sol.duals[r], fd, epsilon = 1e-4, max_relative = 1e-3);
            }
        }
        assert!(checked >= 20, "too few non-degenerate instances: {checked}");
    }

    #[test]
    fn scaling_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(2, 6, |_, _| rng.gen_range(-1.0..1.0));
        let b = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let v1 = solve_min_inf_norm(&a, &b).v_star;
        let v2 = solve_min_inf_norm(&(7.5 * &a), &(7.5 * &b)).v_star;
        assert_relative_eq!(v1, v2, epsilon = 1e-7);
    }

    #[test]
    fn rank_deficient_rows_flagged_not_unique_duals() {
        // Duplicated constraint rows make the duals non-unique.
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.5, 1.0, 1.0, 0.5]);
        let b = DVector::from_row_slice(&[1.0, 1.0]);
        let sol = solve_min_inf_norm(&a, &b);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(!sol.unique_duals);
    }

    #[test]
    fn empty_coefficient_vector() {
        let a = DMatrix::zeros(2, 0);
        let b = DVector::from_row_slice(&[0.0, 0.0]);
        let sol = solve_min_inf_norm(&a, &b);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.v_star, 0.0);

        let b_bad = DVector::from_row_slice(&[0.1, 0.0]);
        let bad = solve_min_inf_norm(&a, &b_bad);
        assert_eq!(bad.status, LpStatus::InfeasibleEqualities);
    }
}

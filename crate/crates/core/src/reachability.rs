//! Data-driven reachability analysis.
//!
//! From offline noisy input/state trajectories the module builds the shifted
//! data matrices, estimates per-dimension Lipschitz constants and covering
//! radii, fits a local affine regressor around a nominal point, and
//! propagates an initial set through a plan one step at a time:
//!
//! ```text
//!   R_{j+1} = M_j · ({1} × (R_j - x*_j) × (U_j - u*_j)) + W + Z_L + Z_eps
//! ```
//!
//! where `Z_L` is the observed residual envelope (with the noise set
//! subtracted again to avoid double counting) and `Z_eps` inflates for the
//! distance between data samples scaled by the Lipschitz constants. The
//! result overapproximates every trajectory of the black-box system that
//! starts in the initial set, applies the planned inputs, and suffers any
//! noise realization inside `W`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::setops::{Interval, Zonotope};

/// Offline trajectory data arranged as shifted matrices: column `t` of
/// `x_plus` is the successor of column `t` of `x_minus` under input column
/// `t` of `u_minus`. Columns never pair states across a trajectory boundary.
#[derive(Debug, Clone)]
pub struct TrajectoryData {
    x_minus: DMatrix<f64>,
    x_plus: DMatrix<f64>,
    u_minus: DMatrix<f64>,
    /// First column index of each concatenated trajectory segment.
    segment_starts: Vec<usize>,
}

impl TrajectoryData {
    /// Assemble from per-trajectory state/input sequences. Each trajectory
    /// must have one more state than inputs and at least two states.
    pub fn from_trajectories(
        trajectories: &[(Vec<DVector<f64>>, Vec<DVector<f64>>)],
    ) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::InvalidArgument("no trajectories given".into()));
        }
        let n = trajectories[0].0.first().map(|s| s.len()).unwrap_or(0);
        let m = trajectories[0].1.first().map(|u| u.len()).unwrap_or(0);
        let mut t_total = 0;
        for (states, inputs) in trajectories {
            if states.len() < 2 {
                return Err(Error::InvalidArgument(
                    "trajectory shorter than 2 states".into(),
                ));
            }
            if inputs.len() + 1 != states.len() {
                return Err(Error::InvalidArgument(format!(
                    "trajectory has {} states but {} inputs",
                    states.len(),
                    inputs.len()
                )));
            }
            t_total += inputs.len();
        }
        let mut x_minus = DMatrix::zeros(n, t_total);
        let mut x_plus = DMatrix::zeros(n, t_total);
        let mut u_minus = DMatrix::zeros(m, t_total);
        let mut segment_starts = Vec::with_capacity(trajectories.len());
        let mut col = 0;
        for (states, inputs) in trajectories {
            segment_starts.push(col);
            for (k, u) in inputs.iter().enumerate() {
                if states[k].len() != n || u.len() != m {
                    return Err(Error::DimensionMismatch(
                        "inconsistent state or input dimensions across trajectories".into(),
                    ));
                }
                x_minus.column_mut(col).copy_from(&states[k]);
                x_plus.column_mut(col).copy_from(&states[k + 1]);
                u_minus.column_mut(col).copy_from(u);
                col += 1;
            }
        }
        Ok(Self {
            x_minus,
            x_plus,
            u_minus,
            segment_starts,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.x_minus.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.u_minus.nrows()
    }

    /// Number of usable (state, input, successor) columns.
    pub fn t_total(&self) -> usize {
        self.x_minus.ncols()
    }

    pub fn num_trajectories(&self) -> usize {
        self.segment_starts.len()
    }

    pub fn x_minus(&self) -> &DMatrix<f64> {
        &self.x_minus
    }

    pub fn x_plus(&self) -> &DMatrix<f64> {
        &self.x_plus
    }

    pub fn u_minus(&self) -> &DMatrix<f64> {
        &self.u_minus
    }

    pub fn segment_starts(&self) -> &[usize] {
        &self.segment_starts
    }

    /// True when the column count supports the affine regressor.
    pub fn is_identifiable(&self) -> bool {
        self.t_total() >= self.state_dim() + self.input_dim() + 1
    }

    /// Per-trajectory column ranges `(start, end)` (end exclusive).
    fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.segment_starts.len());
        for (i, &s) in self.segment_starts.iter().enumerate() {
            let e = self
                .segment_starts
                .get(i + 1)
                .copied()
                .unwrap_or(self.t_total());
            out.push((s, e));
        }
        out
    }
}

/// CSV schema: `traj,step,px,py,cpsi,spsi,v,omega`, one row per time step,
/// inputs are those applied at that step, and the final row of each
/// trajectory leaves the input fields empty.
pub const TRAJECTORY_CSV_HEADER: &str = "traj,step,px,py,cpsi,spsi,v,omega";

/// Serialize a float with 17 significant digits so parsing reproduces the
/// exact bit pattern.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl TrajectoryData {
    /// Write the trajectory CSV. `comments` lines are emitted first, each
    /// prefixed with `# `.
    pub fn write_csv(&self, path: &std::path::Path, comments: &[String]) -> Result<()> {
        use std::io::Write;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for c in comments {
            writeln!(f, "# {c}")?;
        }
        writeln!(f, "{TRAJECTORY_CSV_HEADER}")?;
        for (traj, (start, end)) in self.segments().into_iter().enumerate() {
            let mut step = 0;
            for col in start..end {
                let x = self.x_minus.column(col);
                let u = self.u_minus.column(col);
                writeln!(
                    f,
                    "{traj},{step},{},{},{},{},{},{}",
                    format_float(x[0]),
                    format_float(x[1]),
                    format_float(x[2]),
                    format_float(x[3]),
                    format_float(u[0]),
                    format_float(u[1]),
                )?;
                step += 1;
            }
            let last = self.x_plus.column(end - 1);
            writeln!(
                f,
                "{traj},{step},{},{},{},{},,",
                format_float(last[0]),
                format_float(last[1]),
                format_float(last[2]),
                format_float(last[3]),
            )?;
        }
        Ok(())
    }

    /// Load the trajectory CSV written by [`TrajectoryData::write_csv`].
    pub fn load_csv(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trajectory file".into()))?;
        if header != TRAJECTORY_CSV_HEADER {
            return Err(Error::Parse(format!(
                "unexpected header {header:?}, expected {TRAJECTORY_CSV_HEADER:?}"
            )));
        }
        let mut trajectories: Vec<(Vec<DVector<f64>>, Vec<DVector<f64>>)> = Vec::new();
        let mut current_id: Option<u64> = None;
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(Error::Parse(format!(
                    "line {}: expected 8 fields, found {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
            };
            let traj_id: u64 = fields[0]
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
            let state = DVector::from_row_slice(&[
                parse(fields[2])?,
                parse(fields[3])?,
                parse(fields[4])?,
                parse(fields[5])?,
            ]);
            let has_input = !fields[6].trim().is_empty() || !fields[7].trim().is_empty();
            if current_id != Some(traj_id) {
                trajectories.push((Vec::new(), Vec::new()));
                current_id = Some(traj_id);
            }
            let (states, inputs) = trajectories.last_mut().unwrap();
            states.push(state);
            if has_input {
                inputs.push(DVector::from_row_slice(&[
                    parse(fields[6])?,
                    parse(fields[7])?,
                ]));
            }
        }
        Self::from_trajectories(&trajectories)
    }
}

/// Per-output-dimension Lipschitz constants and covering radii of the data.
#[derive(Debug, Clone)]
pub struct LipschitzBounds {
    pub l_star: DVector<f64>,
    pub delta: DVector<f64>,
}

/// Bounded process-noise set in state coordinates.
#[derive(Debug, Clone)]
pub struct NoiseZonotope {
    pub w: Zonotope,
}

impl NoiseZonotope {
    pub fn new(w: Zonotope) -> Result<Self> {
        if w.center().iter().any(|v| !v.is_finite())
            || w.generators().iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "noise zonotope must be bounded".into(),
            ));
        }
        Ok(Self { w })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            w: Zonotope::point(DVector::zeros(dim)),
        }
    }
}

/// Estimate per-dimension Lipschitz constants from all data-column pairs and
/// per-dimension covering radii of the sampled coordinates.
///
/// `l_star[i]` is the largest observed slope `|x⁺_i(j) - x⁺_i(k)| / ‖z_j -
/// z_k‖₂` over all column pairs with `z = (x, u)` stacked. `delta[i]` is the
/// covering radius of state coordinate `i`: the farthest any point of the
/// coordinate's data range lies from a sample, computed exactly from the
/// sorted sample gaps (the limit of a dense probe grid over the data
/// bounding box).
pub fn estimate_lipschitz(data: &TrajectoryData) -> Result<LipschitzBounds> {
    let t = data.t_total();
    if t < 2 {
        return Err(Error::InvalidArgument(
            "need at least two data columns to estimate Lipschitz constants".into(),
        ));
    }
    let n = data.state_dim();
    let m = data.input_dim();

    // Stack z = (x, u) once.
    let mut z = DMatrix::zeros(n + m, t);
    z.view_mut((0, 0), (n, t)).copy_from(data.x_minus());
    z.view_mut((n, 0), (m, t)).copy_from(data.u_minus());

    let l_star_vec: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut l = 0.0_f64;
            for j in 0..t {
                for k in (j + 1)..t {
                    let mut dist2 = 0.0;
                    for r in 0..(n + m) {
                        let d = z[(r, j)] - z[(r, k)];
                        dist2 += d * d;
                    }
                    let dy = (data.x_plus()[(i, j)] - data.x_plus()[(i, k)]).abs();
                    if dist2 < 1e-18 {
                        if dy > 1e-12 {
                            log::warn!(
                                "duplicate data columns {j} and {k} with differing successors; skipping pair"
                            );
                        }
                        continue;
                    }
                    l = l.max(dy / dist2.sqrt());
                }
            }
            l
        })
        .collect();

    let mut delta = DVector::zeros(n);
    for i in 0..n {
        let mut vals: Vec<f64> = data.x_minus().row(i).iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut max_gap = 0.0_f64;
        for w in vals.windows(2) {
            max_gap = max_gap.max(w[1] - w[0]);
        }
        // Largest distance from any probe in [min, max] to a sample.
        delta[i] = (max_gap / 2.0).max(f64::MIN_POSITIVE);
    }

    Ok(LipschitzBounds {
        l_star: DVector::from_vec(l_star_vec),
        delta,
    })
}

/// Covering radius of a point cloud over an explicit probe grid: the maximum
/// over all grid nodes of the distance to the nearest data column. Grid
/// bounds are the given box with `resolution` nodes per dimension.
///
/// Exponential in the dimension; intended for low-dimensional diagnostics
/// and cross-checks of the per-dimension estimate above.
pub fn covering_radius_grid(points: &DMatrix<f64>, bounds: &Interval, resolution: usize) -> f64 {
    let d = points.nrows();
    let t = points.ncols();
    if t == 0 || d == 0 {
        return f64::INFINITY;
    }
    let res = resolution.max(2);
    let total: usize = res.pow(d as u32);
    (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut idx = flat;
            let mut probe = vec![0.0; d];
            for (k, p) in probe.iter_mut().enumerate() {
                let step = idx % res;
                idx /= res;
                let lo = bounds.lower()[k];
                let hi = bounds.upper()[k];
                *p = lo + (hi - lo) * step as f64 / (res - 1) as f64;
            }
            let mut best = f64::INFINITY;
            for c in 0..t {
                let mut dist2 = 0.0;
                for (k, p) in probe.iter().enumerate() {
                    let dd = p - points[(k, c)];
                    dist2 += dd * dd;
                }
                best = best.min(dist2);
            }
            best.sqrt()
        })
        .reduce(|| 0.0, f64::max)
}

/// The Lipschitz inflation set `⟨0, diag(l_star_i · delta_i / 2)⟩`.
pub fn lipschitz_zonotope(bounds: &LipschitzBounds) -> Zonotope {
    let radii = DVector::from_fn(bounds.l_star.len(), |i, _| {
        bounds.l_star[i] * bounds.delta[i] / 2.0
    });
    Zonotope::box_at(DVector::zeros(bounds.l_star.len()), &radii)
        .expect("diagonal zonotope construction cannot fail")
}

/// Local affine regressor around `(x_nominal, u_nominal)`:
/// `M = (X⁺ - c_w·1ᵀ) · pinv(D)` with `D = [1ᵀ; X⁻ - x*·1ᵀ; U⁻ - u*·1ᵀ]`.
///
/// `M` has shape `n × (1 + n + m)`; its first column is the local offset,
/// the next `n` columns multiply `x - x*`, the last `m` columns multiply
/// `u - u*`.
pub fn regressor(
    data: &TrajectoryData,
    noise_center: &DVector<f64>,
    x_nominal: &DVector<f64>,
    u_nominal: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let (m_mat, _) = regressor_with_basis(data, noise_center, x_nominal, u_nominal)?;
    Ok(m_mat)
}

/// As [`regressor`], additionally returning the basis matrix `D` so callers
/// can form residuals without rebuilding it.
fn regressor_with_basis(
    data: &TrajectoryData,
    noise_center: &DVector<f64>,
    x_nominal: &DVector<f64>,
    u_nominal: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = data.state_dim();
    let m = data.input_dim();
    let t = data.t_total();
    if x_nominal.len() != n || u_nominal.len() != m || noise_center.len() != n {
        return Err(Error::DimensionMismatch(
            "regressor nominal point dimensions do not match the data".into(),
        ));
    }
    if !data.is_identifiable() {
        return Err(Error::RankDeficient(format!(
            "{t} data columns cannot identify a {} x {} regressor",
            n,
            1 + n + m
        )));
    }
    let rows = 1 + n + m;
    let mut d = DMatrix::zeros(rows, t);
    for c in 0..t {
        d[(0, c)] = 1.0;
        for r in 0..n {
            d[(1 + r, c)] = data.x_minus()[(r, c)] - x_nominal[r];
        }
        for r in 0..m {
            d[(1 + n + r, c)] = data.u_minus()[(r, c)] - u_nominal[r];
        }
    }
    let svd = d.clone().svd(true, true);
    let sv_max = svd.singular_values.max();
    let tol = 1e-10 * sv_max.max(1.0) * rows.max(t) as f64;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank < rows {
        return Err(Error::RankDeficient(format!(
            "basis matrix rank {rank} < {rows}"
        )));
    }
    let pinv = svd
        .pseudo_inverse(tol)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    let mut shifted = data.x_plus().clone();
    for mut col in shifted.column_iter_mut() {
        col -= noise_center;
    }
    Ok((shifted * pinv, d))
}

/// A propagated reach tube: `sets[0]` is the initial set and `sets[j+1]`
/// overapproximates the states after applying `actions[j]`. The nominal
/// points and the regressors used per step are kept for gradient chaining.
#[derive(Debug, Clone)]
pub struct ReachTube {
    pub sets: Vec<Zonotope>,
    pub nominal_states: Vec<DVector<f64>>,
    pub regressors: Vec<DMatrix<f64>>,
}

impl ReachTube {
    pub fn horizon(&self) -> usize {
        self.sets.len() - 1
    }
}

/// Everything `reach` needs besides the initial set and the plan.
#[derive(Debug, Clone)]
pub struct ReachContext<'a> {
    pub data: &'a TrajectoryData,
    pub noise: &'a NoiseZonotope,
    pub bounds: &'a LipschitzBounds,
    /// Radius of the actuation ball around each planned input.
    pub eps_input: f64,
    /// Generator-count cap before order reduction engages.
    pub generator_cap: usize,
}

/// Propagate `initial` through the planned actions.
///
/// Per step: the nominal state is the current set's center and the nominal
/// input is the planned action; the regressor is fitted there, the residual
/// envelope over all data columns forms `Z_L` (with the noise hull
/// subtracted per dimension where that stays nonempty), and the next set is
/// the affine image of `{1} × (R_j - x*) × (U_j - u*)` inflated by `W`,
/// `Z_L`, and the Lipschitz set.
pub fn reach(
    initial: &Zonotope,
    actions: &[DVector<f64>],
    ctx: &ReachContext<'_>,
) -> Result<ReachTube> {
    let n = ctx.data.state_dim();
    let m = ctx.data.input_dim();
    if initial.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial set dimension {} vs data state dimension {n}",
            initial.dim()
        )));
    }
    if ctx.noise.w.dim() != n || ctx.bounds.l_star.len() != n {
        return Err(Error::DimensionMismatch(
            "noise or Lipschitz bounds do not match the state dimension".into(),
        ));
    }
    let z_eps = lipschitz_zonotope(ctx.bounds);
    let w_hull = ctx.noise.w.interval_hull();

    let mut sets = Vec::with_capacity(actions.len() + 1);
    let mut nominal_states = Vec::with_capacity(actions.len());
    let mut regressors = Vec::with_capacity(actions.len());
    sets.push(initial.clone());

    for u_star in actions {
        if u_star.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "action dimension {} vs data input dimension {m}",
                u_star.len()
            )));
        }
        let current = sets.last().unwrap();
        let x_star = current.center().clone();
        let (m_j, basis) = regressor_with_basis(ctx.data, ctx.noise.w.center(), &x_star, u_star)?;

        // Residual envelope over all data columns.
        let residuals = ctx.data.x_plus() - &m_j * &basis;
        let mut lo = DVector::from_element(n, f64::INFINITY);
        let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
        for c in 0..residuals.ncols() {
            for r in 0..n {
                let v = residuals[(r, c)];
                lo[r] = lo[r].min(v);
                hi[r] = hi[r].max(v);
            }
        }
        // Z_L = [lo, hi] ⊖ W per dimension, falling back to the unshrunk
        // interval where the difference would be empty (a strictly larger
        // set, hence still sound).
        let mut zl_lo = DVector::zeros(n);
        let mut zl_hi = DVector::zeros(n);
        for r in 0..n {
            let l = lo[r] - w_hull.lower()[r];
            let h = hi[r] - w_hull.upper()[r];
            if l <= h {
                zl_lo[r] = l;
                zl_hi[r] = h;
            } else {
                zl_lo[r] = lo[r];
                zl_hi[r] = hi[r];
            }
        }
        let z_l = Interval::new(zl_lo, zl_hi)?.to_zonotope();

        // {1} × (R_j - x*) × (U_j - u*).
        let one = Zonotope::point(DVector::from_element(1, 1.0));
        let recentred = current.translate(&(-&x_star))?;
        let input_ball =
            Zonotope::box_at(DVector::zeros(m), &DVector::from_element(m, ctx.eps_input))?;
        let product = one
            .cartesian_product(&recentred)
            .cartesian_product(&input_ball);
        let mapped = product.linear_map(&m_j)?;

        let next = mapped
            .minkowski_sum(&ctx.noise.w)?
            .minkowski_sum(&z_l)?
            .minkowski_sum(&z_eps)?
            .reduce_order(ctx.generator_cap);

        sets.push(next);
        nominal_states.push(x_star);
        regressors.push(m_j);
    }

    Ok(ReachTube {
        sets,
        nominal_states,
        regressors,
    })
}

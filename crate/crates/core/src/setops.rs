//! Zonotope and constrained-zonotope set representations and the operations
//! the rest of the crate consumes.
//!
//! A zonotope is `{ c + G·β : ‖β‖∞ ≤ 1 }`; a constrained zonotope further
//! restricts the coefficients to `A·β = b`, which lets it represent any
//! convex polytope. Both keep their generator columns in insertion order and
//! never deduplicate them, so downstream index bookkeeping (collision
//! gradients referencing constraint blocks) stays deterministic.
//!
//! All values are immutable after construction; every operation is a pure
//! function of its inputs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::lp;

/// Absolute tolerance on constraint residuals for membership and feasibility
/// decisions throughout the crate.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Centered generator representation of a centrally symmetric convex set.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
}

impl Zonotope {
    /// A zonotope from a center and a generator matrix (one column per
    /// generator; zero columns denotes a point set).
    pub fn new(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self> {
        if center.len() != generators.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "center has dimension {} but generators have {} rows",
                center.len(),
                generators.nrows()
            )));
        }
        Ok(Self { center, generators })
    }

    /// The point set `{c}`.
    pub fn point(center: DVector<f64>) -> Self {
        let n = center.len();
        Self {
            center,
            generators: DMatrix::zeros(n, 0),
        }
    }

    /// Axis-aligned box: center plus `diag(half_widths)` generators.
    pub fn box_at(center: DVector<f64>, half_widths: &DVector<f64>) -> Result<Self> {
        if center.len() != half_widths.len() {
            return Err(Error::DimensionMismatch(format!(
                "center dimension {} vs half-width dimension {}",
                center.len(),
                half_widths.len()
            )));
        }
        let gens = DMatrix::from_diagonal(half_widths);
        Zonotope::new(center, gens)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    /// Minkowski sum: `⟨c_a + c_b, [G_a, G_b]⟩`.
    pub fn minkowski_sum(&self, other: &Zonotope) -> Result<Zonotope> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "minkowski_sum: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let mut gens = DMatrix::zeros(self.dim(), self.num_generators() + other.num_generators());
        gens.view_mut((0, 0), (self.dim(), self.num_generators()))
            .copy_from(&self.generators);
        gens.view_mut(
            (0, self.num_generators()),
            (self.dim(), other.num_generators()),
        )
        .copy_from(&other.generators);
        Zonotope::new(&self.center + &other.center, gens)
    }

    /// Image under a linear map: `⟨M·c, M·G⟩`.
    pub fn linear_map(&self, m: &DMatrix<f64>) -> Result<Zonotope> {
        if m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "linear_map: matrix has {} columns, zonotope dimension is {}",
                m.ncols(),
                self.dim()
            )));
        }
        Zonotope::new(m * &self.center, m * &self.generators)
    }

    /// Cartesian product: stacked centers, block-diagonal generators.
    pub fn cartesian_product(&self, other: &Zonotope) -> Zonotope {
        let n = self.dim() + other.dim();
        let g = self.num_generators() + other.num_generators();
        let mut center = DVector::zeros(n);
        center.rows_mut(0, self.dim()).copy_from(&self.center);
        center
            .rows_mut(self.dim(), other.dim())
            .copy_from(&other.center);
        let mut gens = DMatrix::zeros(n, g);
        gens.view_mut((0, 0), (self.dim(), self.num_generators()))
            .copy_from(&self.generators);
        gens.view_mut(
            (self.dim(), self.num_generators()),
            (other.dim(), other.num_generators()),
        )
        .copy_from(&other.generators);
        Zonotope { center, generators: gens }
    }

    /// Translate by `t`: center shifts, generators unchanged.
    pub fn translate(&self, t: &DVector<f64>) -> Result<Zonotope> {
        if t.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "translate: offset dimension {} vs zonotope dimension {}",
                t.len(),
                self.dim()
            )));
        }
        Ok(Zonotope {
            center: &self.center + t,
            generators: self.generators.clone(),
        })
    }

    /// Support function `h(d) = d·c + Σ_i |d·g_i|`.
    pub fn support(&self, direction: &DVector<f64>) -> Result<f64> {
        if direction.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "support: direction dimension {} vs zonotope dimension {}",
                direction.len(),
                self.dim()
            )));
        }
        let mut h = direction.dot(&self.center);
        for g in self.generators.column_iter() {
            h += direction.dot(&g).abs();
        }
        Ok(h)
    }

    /// Tight axis-aligned interval hull.
    pub fn interval_hull(&self) -> Interval {
        let radii = self.radius_vector();
        Interval {
            lower: &self.center - &radii,
            upper: &self.center + &radii,
        }
    }

    /// Per-dimension radius `Σ_i |g_i|`.
    pub fn radius_vector(&self) -> DVector<f64> {
        let mut r = DVector::zeros(self.dim());
        for g in self.generators.column_iter() {
            for (k, v) in g.iter().enumerate() {
                r[k] += v.abs();
            }
        }
        r
    }

    /// A uniformly random member `c + G·β` with `β ~ U[-1,1]^γ`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let mut x = self.center.clone();
        for g in self.generators.column_iter() {
            let beta: f64 = rng.gen_range(-1.0..=1.0);
            x += beta * g;
        }
        x
    }

    /// Order reduction: keep the `cap - n` largest-norm generator columns and
    /// aggregate the rest into an interval hull (a sound overapproximation).
    /// Returns a clone when the generator count is already within the cap.
    pub fn reduce_order(&self, cap: usize) -> Zonotope {
        let n = self.dim();
        if self.num_generators() <= cap.max(n) {
            return self.clone();
        }
        let keep = cap.max(n) - n;
        let mut order: Vec<usize> = (0..self.num_generators()).collect();
        order.sort_by(|&a, &b| {
            let na = self.generators.column(a).norm();
            let nb = self.generators.column(b).norm();
            nb.partial_cmp(&na).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut gens = DMatrix::zeros(n, keep + n);
        for (slot, &col) in order[..keep].iter().enumerate() {
            gens.column_mut(slot).copy_from(&self.generators.column(col));
        }
        let mut box_radii = DVector::zeros(n);
        for &col in &order[keep..] {
            for (k, v) in self.generators.column(col).iter().enumerate() {
                box_radii[k] += v.abs();
            }
        }
        for k in 0..n {
            gens[(k, keep + k)] = box_radii[k];
        }
        Zonotope {
            center: self.center.clone(),
            generators: gens,
        }
    }

    /// Vertices of a 2-dimensional zonotope in counterclockwise order.
    ///
    /// Walks the generator columns sorted by angle twice (once with each
    /// sign), which traces the boundary of the centrally symmetric polygon.
    pub fn vertices_2d(&self) -> Result<Vec<[f64; 2]>> {
        if self.dim() != 2 {
            return Err(Error::InvalidArgument(format!(
                "vertices_2d requires dimension 2, got {}",
                self.dim()
            )));
        }
        // Orient every generator into the upper half plane (angle in [0, π))
        // and sort by angle; walking them in order with +2g then -2g traces
        // the boundary counterclockwise from the lowest vertex.
        let mut dirs: Vec<(f64, f64)> = self
            .generators
            .column_iter()
            .map(|g| {
                let (x, y) = (g[0], g[1]);
                if y < 0.0 || (y == 0.0 && x < 0.0) {
                    (-x, -y)
                } else {
                    (x, y)
                }
            })
            .filter(|(x, y)| x.abs() + y.abs() > 0.0)
            .collect();
        dirs.sort_by(|a, b| {
            a.1.atan2(a.0)
                .partial_cmp(&b.1.atan2(b.0))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if dirs.is_empty() {
            return Ok(vec![[self.center[0], self.center[1]]]);
        }
        let mut x = self.center[0];
        let mut y = self.center[1];
        for &(gx, gy) in &dirs {
            x -= gx;
            y -= gy;
        }
        let mut verts = Vec::with_capacity(2 * dirs.len());
        verts.push([x, y]);
        for &(gx, gy) in &dirs {
            x += 2.0 * gx;
            y += 2.0 * gy;
            verts.push([x, y]);
        }
        for &(gx, gy) in &dirs[..dirs.len() - 1] {
            x -= 2.0 * gx;
            y -= 2.0 * gy;
            verts.push([x, y]);
        }
        Ok(verts)
    }
}

/// Zonotope with linear equality constraints on the coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedZonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
    constraint_matrix: DMatrix<f64>,
    constraint_vector: DVector<f64>,
}

impl From<Zonotope> for ConstrainedZonotope {
    fn from(z: Zonotope) -> Self {
        let g = z.num_generators();
        ConstrainedZonotope {
            center: z.center,
            generators: z.generators,
            constraint_matrix: DMatrix::zeros(0, g),
            constraint_vector: DVector::zeros(0),
        }
    }
}

impl ConstrainedZonotope {
    pub fn new(
        center: DVector<f64>,
        generators: DMatrix<f64>,
        constraint_matrix: DMatrix<f64>,
        constraint_vector: DVector<f64>,
    ) -> Result<Self> {
        if center.len() != generators.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "center has dimension {} but generators have {} rows",
                center.len(),
                generators.nrows()
            )));
        }
        if constraint_matrix.ncols() != generators.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "constraint matrix has {} columns but there are {} generators",
                constraint_matrix.ncols(),
                generators.ncols()
            )));
        }
        if constraint_matrix.nrows() != constraint_vector.len() {
            return Err(Error::DimensionMismatch(format!(
                "constraint matrix has {} rows but the constraint vector has {}",
                constraint_matrix.nrows(),
                constraint_vector.len()
            )));
        }
        Ok(Self {
            center,
            generators,
            constraint_matrix,
            constraint_vector,
        })
    }

    /// Axis-aligned box as an unconstrained constrained zonotope.
    pub fn box_at(center: DVector<f64>, half_widths: &DVector<f64>) -> Result<Self> {
        Ok(Zonotope::box_at(center, half_widths)?.into())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint_matrix.nrows()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.constraint_matrix
    }

    pub fn constraint_vector(&self) -> &DVector<f64> {
        &self.constraint_vector
    }

    /// Intersection of two constrained zonotopes:
    /// center `c_a`, generators `[G_a, 0]`, constraints stacking `A_a`,
    /// `A_b`, and the coupling block `[G_a, -G_b]` with right-hand side
    /// `[b_a; b_b; c_b - c_a]`.
    pub fn intersect(&self, other: &ConstrainedZonotope) -> Result<ConstrainedZonotope> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "intersect: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let n = self.dim();
        let (ga, gb) = (self.num_generators(), other.num_generators());
        let (ca, cb) = (self.num_constraints(), other.num_constraints());

        let mut gens = DMatrix::zeros(n, ga + gb);
        gens.view_mut((0, 0), (n, ga)).copy_from(&self.generators);

        let mut a = DMatrix::zeros(ca + cb + n, ga + gb);
        a.view_mut((0, 0), (ca, ga)).copy_from(&self.constraint_matrix);
        a.view_mut((ca, ga), (cb, gb)).copy_from(&other.constraint_matrix);
        a.view_mut((ca + cb, 0), (n, ga)).copy_from(&self.generators);
        a.view_mut((ca + cb, ga), (n, gb)).copy_from(&(-&other.generators));

        let mut b = DVector::zeros(ca + cb + n);
        b.rows_mut(0, ca).copy_from(&self.constraint_vector);
        b.rows_mut(ca, cb).copy_from(&other.constraint_vector);
        b.rows_mut(ca + cb, n).copy_from(&(&other.center - &self.center));

        ConstrainedZonotope::new(self.center.clone(), gens, a, b)
    }

    /// Minkowski sum with an (unconstrained) zonotope; constraints carry over
    /// untouched because the new generators are free.
    pub fn minkowski_sum_zonotope(&self, z: &Zonotope) -> Result<ConstrainedZonotope> {
        if self.dim() != z.dim() {
            return Err(Error::DimensionMismatch(format!(
                "minkowski_sum_zonotope: {} vs {}",
                self.dim(),
                z.dim()
            )));
        }
        let n = self.dim();
        let (ga, gb) = (self.num_generators(), z.num_generators());
        let mut gens = DMatrix::zeros(n, ga + gb);
        gens.view_mut((0, 0), (n, ga)).copy_from(&self.generators);
        gens.view_mut((0, ga), (n, gb)).copy_from(z.generators());
        let mut a = DMatrix::zeros(self.num_constraints(), ga + gb);
        a.view_mut((0, 0), (self.num_constraints(), ga))
            .copy_from(&self.constraint_matrix);
        ConstrainedZonotope::new(
            &self.center + z.center(),
            gens,
            a,
            self.constraint_vector.clone(),
        )
    }

    /// Interval hull ignoring the constraints (a superset of the tight hull,
    /// hence conservative for distance surrogates and ray casting).
    pub fn interval_hull(&self) -> Interval {
        let mut r = DVector::zeros(self.dim());
        for g in self.generators.column_iter() {
            for (k, v) in g.iter().enumerate() {
                r[k] += v.abs();
            }
        }
        Interval {
            lower: &self.center - &r,
            upper: &self.center + &r,
        }
    }

    /// Exact membership: true iff some `β` with `‖β‖∞ ≤ 1` satisfies both
    /// `A·β = b` and `c + G·β = x`, decided by a feasibility linear program
    /// with tolerance [`FEASIBILITY_TOL`].
    pub fn contains_point(&self, x: &DVector<f64>) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "contains_point: point dimension {} vs set dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let n = self.dim();
        let nc = self.num_constraints();
        let ng = self.num_generators();
        let mut a = DMatrix::zeros(nc + n, ng);
        a.view_mut((0, 0), (nc, ng)).copy_from(&self.constraint_matrix);
        a.view_mut((nc, 0), (n, ng)).copy_from(&self.generators);
        let mut b = DVector::zeros(nc + n);
        b.rows_mut(0, nc).copy_from(&self.constraint_vector);
        b.rows_mut(nc, n).copy_from(&(x - &self.center));
        let sol = lp::solve_min_inf_norm(&a, &b);
        Ok(match sol.status {
            lp::LpStatus::Optimal => sol.v_star <= 1.0 + FEASIBILITY_TOL,
            _ => false,
        })
    }
}

/// Axis-aligned interval (box) with elementwise bounds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Interval {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Interval {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch(format!(
                "interval bounds: {} vs {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::InvalidArgument(
                "interval lower bound exceeds upper bound".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn center(&self) -> DVector<f64> {
        0.5 * (&self.lower + &self.upper)
    }

    pub fn half_widths(&self) -> DVector<f64> {
        0.5 * (&self.upper - &self.lower)
    }

    /// Conversion to a zonotope: center `½(l+u)`, generators
    /// `diag(½(u-l))`.
    pub fn to_zonotope(&self) -> Zonotope {
        Zonotope {
            center: self.center(),
            generators: DMatrix::from_diagonal(&self.half_widths()),
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    /// Euclidean projection onto the box (elementwise clamp).
    pub fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| x[i].max(self.lower[i]).min(self.upper[i]))
    }

    /// Euclidean distance from a point to the box (0 inside).
    pub fn distance(&self, x: &DVector<f64>) -> f64 {
        let mut d2 = 0.0;
        for i in 0..self.dim().min(x.len()) {
            let gap = if x[i] < self.lower[i] {
                self.lower[i] - x[i]
            } else if x[i] > self.upper[i] {
                x[i] - self.upper[i]
            } else {
                0.0
            };
            d2 += gap * gap;
        }
        d2.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vec(data: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(data)
    }

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    fn random_zonotope<R: Rng>(rng: &mut R, dim: usize, gens: usize) -> Zonotope {
        let c = DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0));
        let g = DMatrix::from_fn(dim, gens, |_, _| rng.gen_range(-1.0..1.0));
        Zonotope::new(c, g).unwrap()
    }

    #[test]
    fn minkowski_sum_concatenates_generators() {
        let a = Zonotope::new(vec(&[1.0, 2.0]), mat(2, 2, &[1.0, 0.0, 0.0, 1.0])).unwrap();
        let b = Zonotope::new(vec(&[3.0, 4.0]), mat(2, 1, &[2.0, 0.0])).unwrap();
        let s = a.minkowski_sum(&b).unwrap();
        assert_eq!(s.center(), &vec(&[4.0, 6.0]));
        assert_eq!(
            s.generators(),
            &mat(2, 3, &[1.0, 0.0, 2.0, 0.0, 1.0, 0.0])
        );
    }

    #[test]
    fn minkowski_sum_identity_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let z = random_zonotope(&mut rng, 3, 4);
        let zero = Zonotope::point(DVector::zeros(3));
        let s = z.minkowski_sum(&zero).unwrap();
        assert_eq!(s.center(), z.center());
        assert_eq!(s.generators(), z.generators());
    }

    #[test]
    fn minkowski_sum_dimension_mismatch() {
        let a = Zonotope::point(vec(&[0.0, 0.0]));
        let b = Zonotope::point(vec(&[0.0, 0.0, 0.0]));
        assert!(a.minkowski_sum(&b).is_err());
    }

    #[test]
    fn support_of_sum_is_sum_of_supports() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_zonotope(&mut rng, 3, 5);
        let b = random_zonotope(&mut rng, 3, 2);
        let s = a.minkowski_sum(&b).unwrap();
        for _ in 0..100 {
            let d = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            assert_relative_eq!(
                s.support(&d).unwrap(),
                a.support(&d).unwrap() + b.support(&d).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn linear_map_identity_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = random_zonotope(&mut rng, 3, 4);
        let id = DMatrix::identity(3, 3);
        let mapped = z.linear_map(&id).unwrap();
        assert_eq!(mapped.center(), z.center());
        assert_eq!(mapped.generators(), z.generators());

        let zero = DMatrix::zeros(3, 3);
        let annihilated = z.linear_map(&zero).unwrap();
        assert_eq!(annihilated.center(), &DVector::zeros(3));
        assert!(annihilated.generators().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_map_projection_matches_projected_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = random_zonotope(&mut rng, 4, 6);
        let p = mat(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let pz = z.linear_map(&p).unwrap();
        for _ in 0..200 {
            // Same coefficient draw on both sides.
            let beta = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
            let x = z.center() + z.generators() * &beta;
            let y = pz.center() + pz.generators() * &beta;
            let projected = &p * &x;
            assert_relative_eq!((projected - y).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_map_distributes_over_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_zonotope(&mut rng, 3, 4);
        let b = random_zonotope(&mut rng, 3, 3);
        let m = DMatrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0));
        let left = a.minkowski_sum(&b).unwrap().linear_map(&m).unwrap();
        let right = a
            .linear_map(&m)
            .unwrap()
            .minkowski_sum(&b.linear_map(&m).unwrap())
            .unwrap();
        for _ in 0..100 {
            let d = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            assert_relative_eq!(
                left.support(&d).unwrap(),
                right.support(&d).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn cartesian_product_block_structure() {
        let a = Zonotope::new(vec(&[1.0]), mat(1, 1, &[2.0])).unwrap();
        let b = Zonotope::new(vec(&[3.0]), mat(1, 1, &[4.0])).unwrap();
        let p = a.cartesian_product(&b);
        assert_eq!(p.center(), &vec(&[1.0, 3.0]));
        assert_eq!(p.generators(), &mat(2, 2, &[2.0, 0.0, 0.0, 4.0]));
    }

    #[test]
    fn cartesian_product_with_point_appends_fixed_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_zonotope(&mut rng, 2, 3);
        let p = Zonotope::point(vec(&[5.0]));
        let prod = a.cartesian_product(&p);
        assert_eq!(prod.dim(), 3);
        assert_eq!(prod.num_generators(), 3);
        assert_eq!(prod.center()[2], 5.0);
        assert!(prod.generators().row(2).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cartesian_product_samples_are_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let a = random_zonotope(&mut rng, 2, 2);
        let b = random_zonotope(&mut rng, 1, 2);
        let prod = a.cartesian_product(&b);
        for _ in 0..100 {
            let x = prod.sample(&mut rng);
            // Projections of the sample must lie in the factors' hulls.
            assert!(a.interval_hull().contains(&vec(&[x[0], x[1]]), 1e-12));
            assert!(b.interval_hull().contains(&vec(&[x[2]]), 1e-12));
        }
    }

    #[test]
    fn interval_to_zonotope_formula() {
        let i = Interval::new(vec(&[0.0, 0.0]), vec(&[2.0, 4.0])).unwrap();
        let z = i.to_zonotope();
        assert_eq!(z.center(), &vec(&[1.0, 2.0]));
        assert_eq!(z.generators(), &mat(2, 2, &[1.0, 0.0, 0.0, 2.0]));
    }

    #[test]
    fn degenerate_interval_is_point() {
        let i = Interval::new(vec(&[3.0]), vec(&[3.0])).unwrap();
        let z = i.to_zonotope();
        assert_eq!(z.center(), &vec(&[3.0]));
        assert!(z.generators().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn interval_round_trips_through_hull() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let lo = DVector::from_fn(3, |_, _| rng.gen_range(-3.0..0.0));
            let hi = DVector::from_fn(3, |_, _| rng.gen_range(0.0..3.0));
            let i = Interval::new(lo.clone(), hi.clone()).unwrap();
            let hull = i.to_zonotope().interval_hull();
            assert_relative_eq!((hull.lower() - &lo).norm(), 0.0, epsilon = 1e-14);
            assert_relative_eq!((hull.upper() - &hi).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn box_samples_satisfy_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let i = Interval::new(vec(&[-1.0, 0.5]), vec(&[2.0, 3.0])).unwrap();
        let z: ConstrainedZonotope = i.to_zonotope().into();
        for _ in 0..1000 {
            let x = vec(&[rng.gen_range(-1.0..2.0), rng.gen_range(0.5..3.0)]);
            assert!(z.contains_point(&x).unwrap());
        }
    }

    #[test]
    fn translate_identity_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let z = random_zonotope(&mut rng, 3, 4);
        let zero = DVector::zeros(3);
        let same = z.translate(&zero).unwrap();
        assert_eq!(same.center(), z.center());

        let t = vec(&[0.3, -0.7, 1.1]);
        let back = z.translate(&t).unwrap().translate(&(-&t)).unwrap();
        assert_relative_eq!((back.center() - z.center()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn translate_shifts_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let z = random_zonotope(&mut rng, 3, 5);
        let t = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let zt = z.translate(&t).unwrap();
        for _ in 0..50 {
            let d = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            assert_relative_eq!(
                zt.support(&d).unwrap(),
                z.support(&d).unwrap() + d.dot(&t),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn support_unit_box() {
        let z = Zonotope::box_at(DVector::zeros(2), &vec(&[1.0, 1.0])).unwrap();
        assert_relative_eq!(z.support(&vec(&[1.0, 0.0])).unwrap(), 1.0);
        let p = Zonotope::point(vec(&[2.0, -1.0]));
        assert_relative_eq!(p.support(&vec(&[0.5, 0.5])).unwrap(), 0.5);
    }

    #[test]
    fn support_dominates_sampled_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let z = random_zonotope(&mut rng, 3, 6);
        for _ in 0..10 {
            let d = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let h = z.support(&d).unwrap();
            let mut best = f64::NEG_INFINITY;
            for _ in 0..1000 {
                best = best.max(d.dot(&z.sample(&mut rng)));
            }
            assert!(best <= h + 1e-9);
            // With corner samples the support is attained exactly.
            let mut corner = z.center().clone();
            for g in z.generators().column_iter() {
                corner += d.dot(&g).signum() * g;
            }
            assert_relative_eq!(d.dot(&corner), h, epsilon = 1e-9);
        }
    }

    #[test]
    fn intersect_matches_eq5_blocks() {
        let a = ConstrainedZonotope::new(
            vec(&[1.0, 2.0]),
            mat(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            mat(1, 2, &[1.0, 1.0]),
            vec(&[0.5]),
        )
        .unwrap();
        let b = ConstrainedZonotope::new(
            vec(&[3.0, 4.0]),
            mat(2, 1, &[2.0, 1.0]),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
        .unwrap();
        let c = a.intersect(&b).unwrap();
        assert_eq!(c.center(), a.center());
        assert_eq!(c.num_generators(), 3);
        // Generators: [G_a, 0].
        assert_eq!(
            c.generators(),
            &mat(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
        );
        // Constraints: rows for A_a, A_b (none from b has 0 rows), [G_a, -G_b].
        assert_eq!(c.num_constraints(), 3);
        let expect_a = mat(
            3,
            3,
            &[
                1.0, 1.0, 0.0, //
                1.0, 0.0, -2.0, //
                0.0, 1.0, -1.0,
            ],
        );
        assert_eq!(c.constraint_matrix(), &expect_a);
        assert_eq!(c.constraint_vector(), &vec(&[0.5, 2.0, 2.0]));
    }

    #[test]
    fn intersect_identical_boxes_grid_equality() {
        let unit = ConstrainedZonotope::box_at(DVector::zeros(2), &vec(&[1.0, 1.0])).unwrap();
        let inter = unit.intersect(&unit.clone()).unwrap();
        let mut x = -2.0;
        while x <= 2.0 {
            let mut y = -2.0;
            while y <= 2.0 {
                let p = vec(&[x, y]);
                let in_both = unit.contains_point(&p).unwrap();
                let in_inter = inter.contains_point(&p).unwrap();
                // Skip points within tolerance of the box boundary.
                if (x.abs() - 1.0).abs() > 1e-6 && (y.abs() - 1.0).abs() > 1e-6 {
                    assert_eq!(in_both, in_inter, "disagreement at ({x}, {y})");
                }
                y += 0.05;
            }
            x += 0.05;
        }
    }

    #[test]
    fn intersect_membership_equivalence_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..20 {
            let a: ConstrainedZonotope = random_zonotope(&mut rng, 2, 3).into();
            let b: ConstrainedZonotope = random_zonotope(&mut rng, 2, 3).into();
            let inter = a.intersect(&b).unwrap();
            for _ in 0..30 {
                let p = vec(&[rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]);
                let in_a = a.contains_point(&p).unwrap();
                let in_b = b.contains_point(&p).unwrap();
                let in_i = inter.contains_point(&p).unwrap();
                // Guard against boundary flips: re-test with a slightly
                // shrunk tolerance margin by skipping near-boundary points.
                if in_i != (in_a && in_b) {
                    let da = boundary_margin(&a, &p);
                    let db = boundary_margin(&b, &p);
                    assert!(
                        da < 1e-6 || db < 1e-6,
                        "interior disagreement at {p:?}: a={in_a} b={in_b} i={in_i}"
                    );
                }
            }
        }
    }

    /// Distance proxy from a point to the boundary of a 2-d constrained
    /// zonotope via its exact polygon (unconstrained inputs only).
    fn boundary_margin(c: &ConstrainedZonotope, p: &DVector<f64>) -> f64 {
        let z = Zonotope::new(c.center().clone(), c.generators().clone()).unwrap();
        let verts = z.vertices_2d().unwrap();
        let mut min_edge = f64::INFINITY;
        for i in 0..verts.len() {
            let [x0, y0] = verts[i];
            let [x1, y1] = verts[(i + 1) % verts.len()];
            let (ex, ey) = (x1 - x0, y1 - y0);
            let len = (ex * ex + ey * ey).sqrt().max(1e-300);
            let d = ((p[0] - x0) * ey - (p[1] - y0) * ex).abs() / len;
            min_edge = min_edge.min(d);
        }
        min_edge
    }

    #[test]
    fn disjoint_boxes_intersect_to_empty() {
        let a = ConstrainedZonotope::box_at(vec(&[0.5, 0.5]), &vec(&[0.5, 0.5])).unwrap();
        let b = ConstrainedZonotope::box_at(vec(&[3.5, 3.5]), &vec(&[0.5, 0.5])).unwrap();
        let inter = a.intersect(&b).unwrap();
        // Emptiness is decided by the collision module; here membership of
        // candidate points suffices.
        assert!(!inter.contains_point(&vec(&[0.5, 0.5])).unwrap());
        assert!(!inter.contains_point(&vec(&[3.5, 3.5])).unwrap());
        assert!(!inter.contains_point(&vec(&[2.0, 2.0])).unwrap());
    }

    #[test]
    fn contains_center_of_unconstrained() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let z = random_zonotope(&mut rng, 3, 4);
        let c: ConstrainedZonotope = z.clone().into();
        assert!(c.contains_point(z.center()).unwrap());
    }

    #[test]
    fn rejects_far_point() {
        let z = Zonotope::box_at(DVector::zeros(2), &vec(&[1.0, 1.0])).unwrap();
        let c: ConstrainedZonotope = z.into();
        assert!(!c.contains_point(&vec(&[10.0, 0.0])).unwrap());
    }

    #[test]
    fn membership_agrees_with_polygon_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..25 {
            let gens = rng.gen_range(1..=4);
            let z = random_zonotope(&mut rng, 2, gens);
            let c: ConstrainedZonotope = z.clone().into();
            let verts = z.vertices_2d().unwrap();
            for _ in 0..40 {
                let p = vec(&[rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)]);
                let lp_says = c.contains_point(&p).unwrap();
                let poly_says = point_in_convex_polygon(&verts, p[0], p[1], 1e-9);
                if lp_says != poly_says {
                    // Only boundary-grazing points may disagree.
                    assert!(
                        point_in_convex_polygon(&verts, p[0], p[1], 1e-6)
                            != point_in_convex_polygon(&verts, p[0], p[1], -1e-6),
                        "interior disagreement at {p:?}"
                    );
                }
            }
        }
    }

    /// Point-in-convex-polygon with a signed tolerance (positive = inflate).
    fn point_in_convex_polygon(verts: &[[f64; 2]], x: f64, y: f64, tol: f64) -> bool {
        if verts.len() == 1 {
            return (x - verts[0][0]).abs() <= tol.max(0.0)
                && (y - verts[0][1]).abs() <= tol.max(0.0);
        }
        for i in 0..verts.len() {
            let [x0, y0] = verts[i];
            let [x1, y1] = verts[(i + 1) % verts.len()];
            let (ex, ey) = (x1 - x0, y1 - y0);
            let len = (ex * ex + ey * ey).sqrt();
            if len < 1e-300 {
                continue;
            }
            // CCW order: inside points have non-negative cross product.
            let cross = ex * (y - y0) - ey * (x - x0);
            if cross / len < -tol {
                return false;
            }
        }
        true
    }

    #[test]
    fn vertices_2d_box() {
        let z = Zonotope::box_at(vec(&[1.0, 1.0]), &vec(&[1.0, 2.0])).unwrap();
        let mut verts = z.vertices_2d().unwrap();
        assert_eq!(verts.len(), 4);
        verts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(verts, vec![[0.0, -1.0], [0.0, 3.0], [2.0, -1.0], [2.0, 3.0]]);
    }

    #[test]
    fn vertices_2d_ccw_and_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..20 {
            let z = random_zonotope(&mut rng, 2, 5);
            let verts = z.vertices_2d().unwrap();
            assert!(verts.len() >= 3);
            for i in 0..verts.len() {
                let a = verts[i];
                let b = verts[(i + 1) % verts.len()];
                let c = verts[(i + 2) % verts.len()];
                let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                assert!(cross > -1e-9, "not convex/CCW at vertex {i}");
            }
        }
    }

    #[test]
    fn reduce_order_is_sound_and_capped() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let z = random_zonotope(&mut rng, 3, 40);
        let reduced = z.reduce_order(10);
        assert!(reduced.num_generators() <= 10);
        for _ in 0..100 {
            let d = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            assert!(
                reduced.support(&d).unwrap() >= z.support(&d).unwrap() - 1e-9,
                "reduction must not shrink the set"
            );
        }
    }

    #[test]
    fn empty_generator_matrices_are_legal() {
        let p = Zonotope::point(vec(&[1.0, 2.0]));
        assert_eq!(p.num_generators(), 0);
        let hull = p.interval_hull();
        assert_eq!(hull.lower(), &vec(&[1.0, 2.0]));
        let c: ConstrainedZonotope = p.into();
        assert!(c.contains_point(&vec(&[1.0, 2.0])).unwrap());
        assert!(!c.contains_point(&vec(&[1.1, 2.0])).unwrap());
    }

    #[test]
    fn minkowski_sum_commutes_under_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let a = random_zonotope(&mut rng, 2, 3);
        let b = random_zonotope(&mut rng, 2, 4);
        let ab = a.minkowski_sum(&b).unwrap();
        let ba = b.minkowski_sum(&a).unwrap();
        for _ in 0..100 {
            let d = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            assert_relative_eq!(
                ab.support(&d).unwrap(),
                ba.support(&d).unwrap(),
                epsilon = 1e-9
            );
        }
    }
}

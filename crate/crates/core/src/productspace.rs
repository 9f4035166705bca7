//! Product-space machinery for cyclic projections.
//!
//! For sets `O_1, ..., O_m` the cyclic projections operator
//! `P_0 = P_1 P_2 ... P_m P_1` is analyzed on `E^m` through
//!
//! * the cyclic permutation `Pi (x_1, ..., x_m) = (x_2, ..., x_m, x_1)`,
//! * the alignment map `Psi(x) = P_O(Pi x) - Pi x` (blockwise projection
//!   onto `O_j`),
//! * cycles `z` with `z_1 = u`, `z_m ∈ P_m z_1`, `z_j ∈ P_j z_{j+1}`, and
//!   their difference vectors `zeta = z - Pi z` (which always sum to zero),
//! * the shifted operator
//!   `T_zeta x = (x_1^+, x_1^+ - zeta_1, ..., x_1^+ - sum_{j<m} zeta_j)`
//!   for `x_1^+ ∈ P_0 x_1`, whose fixed points are exactly the points with
//!   `x_1 ∈ Fix P_0` and blocks shifted by the partial sums of `zeta`,
//! * the residual map `Phi_zeta = T_zeta - Id`, whose distance to zero
//!   equals `sqrt(m) * dist(x_1, P_0 x_1)` on the slice `{x - Pi x = zeta}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project, SetSpec};
use crate::operators::{apply_at, cyclic_projections, Images, Operator, SelectionPolicy};
use crate::point::{sort_dedup, Point};

/// Membership residual for cycle verification.
pub const CYCLE_TOL: f64 = 1e-10;
/// Fixed-point residual accepted by [`difference_vectors`].
pub const FIXED_POINT_TOL: f64 = 1e-8;
/// Deduplication tolerance for enumerated cycles.
pub const CYCLE_DEDUP_TOL: f64 = 1e-9;

/// A point of the product space `E^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProductPoint {
    pub blocks: Vec<Point>,
}

impl ProductPoint {
    pub fn new(blocks: Vec<Point>) -> Self {
        assert!(blocks.len() >= 2, "product points need at least two blocks");
        let n = blocks[0].dim();
        assert!(
            blocks.iter().all(|b| b.dim() == n),
            "product blocks must share a dimension"
        );
        ProductPoint { blocks }
    }

    /// Diagonal embedding `u -> (u, ..., u)`.
    pub fn diagonal(u: &Point, m: usize) -> Self {
        ProductPoint::new(vec![u.clone(); m])
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_dim(&self) -> usize {
        self.blocks[0].dim()
    }

    pub fn flatten(&self) -> Point {
        let mut coords = Vec::with_capacity(self.block_count() * self.block_dim());
        for b in &self.blocks {
            coords.extend_from_slice(b.coords());
        }
        Point::new(coords)
    }

    pub fn unflatten(point: &Point, m: usize) -> Self {
        assert_eq!(point.dim() % m, 0);
        let n = point.dim() / m;
        ProductPoint::new(
            (0..m)
                .map(|j| Point::new(point.coords()[j * n..(j + 1) * n].to_vec()))
                .collect(),
        )
    }

    pub fn sub(&self, other: &ProductPoint) -> ProductPoint {
        ProductPoint::new(
            self.blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.sub(b))
                .collect(),
        )
    }

    /// Euclidean product-space norm (2-norm of the block norms).
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.dot(b)).sum::<f64>().sqrt()
    }

    pub fn dist(&self, other: &ProductPoint) -> f64 {
        self.sub(other).norm()
    }

    /// CSV header for the flattened layout `block{j}_coord{i}`.
    pub fn csv_header(m: usize, n: usize) -> String {
        let mut cols = Vec::with_capacity(m * n);
        for j in 0..m {
            for i in 0..n {
                cols.push(format!("block{j}_coord{i}"));
            }
        }
        cols.join(",")
    }

    pub fn csv_row(&self, fmt: impl Fn(f64) -> String) -> String {
        self.flatten()
            .coords()
            .iter()
            .map(|c| fmt(*c))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// A difference vector `zeta = z - Pi z` together with the cycle `z` that
/// produced it.  The blocks sum to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceVector {
    pub blocks: Vec<Point>,
    pub source_cycle: ProductPoint,
}

impl DifferenceVector {
    pub fn from_cycle(cycle: &ProductPoint) -> Self {
        let zeta = cycle.sub(&permute(cycle));
        DifferenceVector {
            blocks: zeta.blocks,
            source_cycle: cycle.clone(),
        }
    }

    pub fn as_product_point(&self) -> ProductPoint {
        ProductPoint::new(self.blocks.clone())
    }

    /// Partial sums `s_0 = 0, s_j = zeta_1 + ... + zeta_j`.
    pub fn partial_sums(&self) -> Vec<Point> {
        let n = self.blocks[0].dim();
        let mut sums = Vec::with_capacity(self.blocks.len());
        let mut acc = Point::zeros(n);
        sums.push(acc.clone());
        for z in &self.blocks[..self.blocks.len() - 1] {
            acc = acc.add(z);
            sums.push(acc.clone());
        }
        sums
    }

    /// Max-norm of the block sum; zero (to rounding) for genuine cycles.
    pub fn sum_residual(&self) -> f64 {
        let n = self.blocks[0].dim();
        let total = self
            .blocks
            .iter()
            .fold(Point::zeros(n), |acc, b| acc.add(b));
        total.norm()
    }
}

/// Cyclic permutation `(x_1, ..., x_m) -> (x_2, ..., x_m, x_1)`.
pub fn permute(x: &ProductPoint) -> ProductPoint {
    let mut blocks = x.blocks.clone();
    blocks.rotate_left(1);
    ProductPoint::new(blocks)
}

fn policy_rng(policy: &SelectionPolicy) -> Option<ChaCha8Rng> {
    match policy {
        SelectionPolicy::RandomSeeded { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    }
}

fn resolve_block(
    mut points: Vec<Point>,
    policy: &SelectionPolicy,
    rng: &mut Option<ChaCha8Rng>,
) -> Vec<Point> {
    if points.len() <= 1 {
        return points;
    }
    points.sort_by(|a, b| a.lex_cmp(b));
    match policy {
        SelectionPolicy::LexicographicMin => {
            points.truncate(1);
            points
        }
        SelectionPolicy::RandomSeeded { .. } => {
            let i = rng.as_mut().unwrap().gen_range(0..points.len());
            vec![points.swap_remove(i)]
        }
        SelectionPolicy::AllBranches { .. } => points,
    }
}

fn check_dims(sets: &[SetSpec], x: &ProductPoint) -> Result<()> {
    if sets.len() != x.block_count() {
        return Err(Error::DimensionMismatch {
            expected: sets.len(),
            found: x.block_count(),
        });
    }
    for s in sets {
        if s.ambient_dim() != x.block_dim() {
            return Err(Error::DimensionMismatch {
                expected: x.block_dim(),
                found: s.ambient_dim(),
            });
        }
    }
    Ok(())
}

/// The alignment map `Psi(x) = P_O(Pi x) - Pi x`, blockwise.
pub fn psi(
    sets: &[SetSpec],
    x: &ProductPoint,
    policy: &SelectionPolicy,
) -> Result<Vec<ProductPoint>> {
    check_dims(sets, x)?;
    let shifted = permute(x);
    let mut rng = policy_rng(policy);
    let budget = match policy {
        SelectionPolicy::AllBranches { budget } => Some(*budget),
        _ => None,
    };
    // Cartesian product of per-block projection branches.
    let mut combos: Vec<Vec<Point>> = vec![Vec::new()];
    for (set, block) in sets.iter().zip(&shifted.blocks) {
        let proj = project(set, block)?;
        let branches = resolve_block(proj.points, policy, &mut rng);
        let mut next = Vec::with_capacity(combos.len() * branches.len());
        for prefix in &combos {
            for p in branches.iter() {
                let mut v = prefix.clone();
                v.push(p.sub(block));
                next.push(v);
            }
        }
        if let Some(b) = budget {
            if next.len() > b {
                return Err(Error::BranchBudgetExceeded { budget: b });
            }
        }
        combos = next;
    }
    let mut out: Vec<ProductPoint> = combos.into_iter().map(ProductPoint::new).collect();
    sort_product(&mut out);
    Ok(out)
}

/// Lexicographic order on flattened coordinates, so branch lists are
/// independent of enumeration order.
fn sort_product(points: &mut [ProductPoint]) {
    points.sort_by(|a, b| a.flatten().lex_cmp(&b.flatten()));
}

/// `dist(zeta, Psi(x))` in the product norm, minimizing over branches.
pub fn psi_distance(sets: &[SetSpec], x: &ProductPoint, zeta: &ProductPoint) -> Result<f64> {
    let budget = SelectionPolicy::AllBranches { budget: 64 };
    let values = psi(sets, x, &budget)?;
    Ok(values
        .iter()
        .map(|v| v.dist(zeta))
        .fold(f64::INFINITY, f64::min))
}

/// Lifts a point `u` to cycles `z ∈ W_0` with `z_1 = u`: `z_m ∈ P_m(z_1)`,
/// `z_j ∈ P_j(z_{j+1})` down the chain, and the closing membership
/// `z_1 ∈ P_1(z_2)` verified to within `1e-10`.  Branches that fail the
/// closing check are discarded.
pub fn lift_to_cycle(
    sets: &[SetSpec],
    u: &Point,
    policy: &SelectionPolicy,
) -> Result<Vec<ProductPoint>> {
    let m = sets.len();
    if m < 2 {
        return Err(Error::InvalidParameter(
            "cycles need at least two sets".into(),
        ));
    }
    u.check_dim(sets[0].ambient_dim())?;
    let mut rng = policy_rng(policy);
    let budget = match policy {
        SelectionPolicy::AllBranches { budget } => Some(*budget),
        _ => None,
    };
    // Partial chains built back to front: [z_{j}, ..., z_m].
    let mut chains: Vec<Vec<Point>> = {
        let proj = project(&sets[m - 1], u)?;
        resolve_block(proj.points, policy, &mut rng)
            .into_iter()
            .map(|zm| vec![zm])
            .collect()
    };
    for j in (1..m - 1).rev() {
        let mut next = Vec::new();
        for chain in &chains {
            let succ = &chain[0];
            let proj = project(&sets[j], succ)?;
            for zj in resolve_block(proj.points, policy, &mut rng) {
                let mut extended = Vec::with_capacity(chain.len() + 1);
                extended.push(zj);
                extended.extend_from_slice(chain);
                next.push(extended);
            }
        }
        if let Some(b) = budget {
            if next.len() > b {
                return Err(Error::BranchBudgetExceeded { budget: b });
            }
        }
        chains = next;
    }
    let mut cycles = Vec::new();
    for chain in chains {
        let z2 = &chain[0];
        // Closing membership: u must be a nearest point of O_1 to z_2.
        let closing = project(&sets[0], z2)?;
        let residual = closing
            .points
            .iter()
            .map(|p| p.dist(u))
            .fold(f64::INFINITY, f64::min);
        if residual <= CYCLE_TOL {
            let mut blocks = Vec::with_capacity(m);
            blocks.push(u.clone());
            blocks.extend(chain);
            cycles.push(ProductPoint::new(blocks));
        }
    }
    cycles.sort_by(|a, b| a.flatten().lex_cmp(&b.flatten()));
    Ok(cycles)
}

/// Enumerates the difference vectors `zeta = z - Pi z` over all cycles at
/// the fixed point `u`, deduplicated to `1e-9`.
pub fn difference_vectors(
    sets: &[SetSpec],
    u: &Point,
    budget: usize,
) -> Result<Vec<DifferenceVector>> {
    let p0 = cyclic_projections(sets.to_vec())?;
    let images = apply_at(&p0, u, &SelectionPolicy::AllBranches { budget }, 0)?;
    let residual = images
        .points
        .iter()
        .map(|p| p.dist(u))
        .fold(f64::INFINITY, f64::min);
    if residual > FIXED_POINT_TOL {
        return Err(Error::NotAFixedPoint {
            residual,
            tolerance: FIXED_POINT_TOL,
        });
    }
    let cycles = lift_to_cycle(sets, u, &SelectionPolicy::AllBranches { budget })?;
    let mut out: Vec<DifferenceVector> = Vec::new();
    for cycle in &cycles {
        let dv = DifferenceVector::from_cycle(cycle);
        let duplicate = out.iter().any(|seen| {
            seen.as_product_point()
                .flatten()
                .max_abs_diff(&dv.as_product_point().flatten())
                <= CYCLE_DEDUP_TOL
        });
        if !duplicate {
            out.push(dv);
        }
    }
    Ok(out)
}

/// One step of the shifted operator `T_zeta`.
pub fn t_zeta(
    sets: &[SetSpec],
    zeta: &DifferenceVector,
    x: &ProductPoint,
    policy: &SelectionPolicy,
) -> Result<Vec<ProductPoint>> {
    check_dims(sets, x)?;
    if zeta.blocks.len() != x.block_count() {
        return Err(Error::DimensionMismatch {
            expected: x.block_count(),
            found: zeta.blocks.len(),
        });
    }
    let p0 = cyclic_projections(sets.to_vec())?;
    let images = apply_at(&p0, &x.blocks[0], policy, 0)?;
    let sums = zeta.partial_sums();
    let mut out: Vec<ProductPoint> = images
        .points
        .iter()
        .map(|x1p| ProductPoint::new(sums.iter().map(|s| x1p.sub(s)).collect()))
        .collect();
    sort_product(&mut out);
    Ok(out)
}

/// `dist(0, Phi_zeta(x))` with `Phi_zeta = T_zeta - Id`, computed directly
/// as the smallest product-space step length over branches.
pub fn phi_zeta_residual(
    sets: &[SetSpec],
    zeta: &DifferenceVector,
    x: &ProductPoint,
) -> Result<f64> {
    let branches = t_zeta(sets, zeta, x, &SelectionPolicy::AllBranches { budget: 64 })?;
    Ok(branches
        .iter()
        .map(|y| y.dist(x))
        .fold(f64::INFINITY, f64::min))
}

/// The shifted cyclic-projections operator as a fixed-point map on the
/// flattened product space, usable by the Picard driver and the
/// regularity estimators.
#[derive(Debug, Clone)]
pub struct TZetaOperator {
    pub sets: Vec<SetSpec>,
    pub zeta: DifferenceVector,
}

impl Operator for TZetaOperator {
    fn ambient_dim(&self) -> usize {
        self.sets.len() * self.sets[0].ambient_dim()
    }

    fn apply_at(&self, x: &Point, policy: &SelectionPolicy, call_index: u64) -> Result<Images> {
        let xp = ProductPoint::unflatten(x, self.sets.len());
        let p0 = cyclic_projections(self.sets.clone())?;
        let images = apply_at(&p0, &xp.blocks[0], policy, call_index)?;
        let sums = self.zeta.partial_sums();
        let points: Vec<Point> = images
            .points
            .iter()
            .map(|x1p| ProductPoint::new(sums.iter().map(|s| x1p.sub(s)).collect()).flatten())
            .collect();
        Ok(Images {
            points: sort_dedup(points, 1e-9),
            continuum: images.continuum,
        })
    }
}

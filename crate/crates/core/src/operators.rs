//! Set-valued fixed-point operators built from projectors and prox maps.
//!
//! An [`OperatorSpec`] is a combinator tree; [`apply`] evaluates it at a
//! point under a [`SelectionPolicy`] that resolves set-valuedness.  The
//! `lexicographic-min` and `random-seeded` policies resolve every
//! multivalued projector locally, so a whole evaluation yields exactly one
//! image; `all-branches` enumerates every branch combination reachable
//! through finite ties, capped by an explicit budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project, prox, FunctionSpec, Multiplicity, SetSpec};
use crate::point::{sort_dedup, Point};

/// Branches closer than this in the max norm are merged.
pub const BRANCH_DEDUP_TOL: f64 = 1e-9;

/// Policy for resolving a set-valued step `x+ ∈ T x`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum SelectionPolicy {
    /// Deterministic: the coordinatewise-lexicographic minimum branch.
    #[default]
    #[serde(rename = "lexicographic-min")]
    LexicographicMin,
    /// One branch chosen by a seeded stream; deterministic given the seed
    /// and the iterate index.
    #[serde(rename = "random-seeded")]
    RandomSeeded { seed: u64 },
    /// Every branch combination, at most `budget` of them.
    #[serde(rename = "all-branches")]
    AllBranches { budget: usize },
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            SelectionPolicy::AllBranches { budget } if *budget < 1 => Err(Error::InvalidParameter(
                "all-branches budget must be >= 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Images of one operator evaluation.
///
/// `continuum` records that some constituent projector answered a singular
/// query with a continuum representative; the points are still usable but
/// the caller decides whether to accept them.
#[derive(Debug, Clone, PartialEq)]
pub struct Images {
    pub points: Vec<Point>,
    pub continuum: bool,
}

/// Anything that can serve as the map of a Picard iteration.
///
/// [`OperatorSpec`] implements this; the product-space machinery provides
/// an implementation for the shifted cyclic-projections operator, which is
/// not expressible as a combinator tree.
pub trait Operator {
    fn ambient_dim(&self) -> usize;

    /// Evaluates the operator at `x`.  `call_index` feeds the
    /// `random-seeded` policy's per-call stream; Picard drivers pass the
    /// iteration index.
    fn apply_at(&self, x: &Point, policy: &SelectionPolicy, call_index: u64) -> Result<Images>;
}

/// A combinator tree over projectors, prox maps and reflectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    #[serde(flatten)]
    pub kind: OperatorKind,
}

/// Reflection target: a set (metric reflector) or a function (proximal
/// reflector `2 prox_{1,f} - Id`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReflectTarget {
    Set { set: SetSpec },
    Function { function: FunctionSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum OperatorKind {
    /// Metric projector onto a set.
    Projector { set: SetSpec },
    /// Prox map of a function at parameter `lambda`.
    Prox { function: FunctionSpec, lambda: f64 },
    /// Reflector `2 J - Id` of a projector or prox map.
    Reflector {
        #[serde(flatten)]
        target: ReflectTarget,
    },
    /// Explicit gradient step `x - t (2 A x + b)` for a quadratic.
    GradientStep { f: FunctionSpec, t: f64 },
    /// Composition, applied right to left (the last entry acts first).
    Compose { operators: Vec<OperatorSpec> },
    /// Convex combination with the given weights.
    Average {
        operators: Vec<OperatorSpec>,
        weights: Vec<f64>,
    },
    /// Krasnoselski-Mann relaxation `(1-lambda) Id + lambda T`.
    KMRelax {
        operator: Box<OperatorSpec>,
        lambda: f64,
    },
    /// Cyclic projections `P_1 P_2 ... P_m P_1` (with the redundant
    /// trailing projector onto the first set).
    CyclicProjections { sets: Vec<SetSpec> },
    /// Douglas-Rachford map `(R_f R_g + Id) / 2` with proximal reflectors.
    DouglasRachford { f: FunctionSpec, g: FunctionSpec },
    /// Relaxed averaged alternating reflections
    /// `(beta/2)(R_A R_B + Id) + (1-beta) P_B`.
    #[serde(rename = "RAAR")]
    Raar {
        #[serde(rename = "A")]
        a: SetSpec,
        #[serde(rename = "B")]
        b: SetSpec,
        beta: f64,
    },
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind) -> Self {
        OperatorSpec {
            label: String::new(),
            kind,
        }
    }

    pub fn labeled(kind: OperatorKind, label: impl Into<String>) -> Self {
        OperatorSpec {
            label: label.into(),
            kind,
        }
    }

    pub fn projector(set: SetSpec) -> Self {
        OperatorSpec::new(OperatorKind::Projector { set })
    }

    pub fn prox_map(function: FunctionSpec, lambda: f64) -> Self {
        OperatorSpec::new(OperatorKind::Prox { function, lambda })
    }

    pub fn reflector(set: SetSpec) -> Self {
        OperatorSpec::new(OperatorKind::Reflector {
            target: ReflectTarget::Set { set },
        })
    }

    pub fn prox_reflector(function: FunctionSpec) -> Self {
        OperatorSpec::new(OperatorKind::Reflector {
            target: ReflectTarget::Function { function },
        })
    }

    pub fn gradient_step(f: FunctionSpec, t: f64) -> Self {
        OperatorSpec::new(OperatorKind::GradientStep { f, t })
    }

    pub fn compose(operators: Vec<OperatorSpec>) -> Self {
        OperatorSpec::new(OperatorKind::Compose { operators })
    }

    pub fn average(operators: Vec<OperatorSpec>, weights: Vec<f64>) -> Self {
        OperatorSpec::new(OperatorKind::Average { operators, weights })
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.ambient_dim();
        match &self.kind {
            OperatorKind::Projector { set } => set.validate(),
            OperatorKind::Prox { function, lambda } => {
                if *lambda <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "prox parameter must be positive, got {lambda}"
                    )));
                }
                function.validate()
            }
            OperatorKind::Reflector { target } => match target {
                ReflectTarget::Set { set } => set.validate(),
                ReflectTarget::Function { function } => function.validate(),
            },
            OperatorKind::GradientStep { f, t } => {
                if *t <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "gradient step must be positive, got {t}"
                    )));
                }
                match f {
                    FunctionSpec::Quadratic { .. } => f.validate(),
                    _ => Err(Error::UnsupportedKind(
                        "gradient step requires a quadratic".into(),
                    )),
                }
            }
            OperatorKind::Compose { operators } => {
                if operators.is_empty() {
                    return Err(Error::InvalidParameter("empty composition".into()));
                }
                for op in operators {
                    op.validate()?;
                    if op.ambient_dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            found: op.ambient_dim(),
                        });
                    }
                }
                Ok(())
            }
            OperatorKind::Average { operators, weights } => {
                if operators.is_empty() || operators.len() != weights.len() {
                    return Err(Error::InvalidParameter(
                        "average needs as many weights as operators".into(),
                    ));
                }
                if weights.iter().any(|w| *w < 0.0) {
                    return Err(Error::InvalidParameter(
                        "average weights must be nonnegative".into(),
                    ));
                }
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "average weights must sum to 1 within 1e-12, got {sum}"
                    )));
                }
                for op in operators {
                    op.validate()?;
                    if op.ambient_dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            found: op.ambient_dim(),
                        });
                    }
                }
                Ok(())
            }
            OperatorKind::KMRelax { operator, lambda } => {
                if !(0.0..=1.0).contains(lambda) {
                    return Err(Error::InvalidParameter(format!(
                        "relaxation parameter must lie in [0, 1], got {lambda}"
                    )));
                }
                operator.validate()
            }
            OperatorKind::CyclicProjections { sets } => {
                if sets.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "cyclic projections needs at least two sets".into(),
                    ));
                }
                for s in sets {
                    s.validate()?;
                    if s.ambient_dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            found: s.ambient_dim(),
                        });
                    }
                }
                Ok(())
            }
            OperatorKind::DouglasRachford { f, g } => {
                f.validate()?;
                g.validate()
            }
            OperatorKind::Raar { a, b, beta } => {
                if !(*beta > 0.0 && *beta < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "RAAR parameter must lie in (0, 1), got {beta}"
                    )));
                }
                a.validate()?;
                b.validate()
            }
        }
    }

    /// The averaging constant guaranteed by the calculus of averaged
    /// operators, when one is known for this tree.
    ///
    /// Projectors and prox maps carry `1/2`; an `m`-fold composition
    /// carries `m / (m - 1 + 1/max_j alpha_j)`; cyclic projections over
    /// `m` sets carry `m/(m+1)` (the redundant trailing projector is
    /// idempotent and does not enter the count); a gradient step on a
    /// strongly convex quadratic with step below `2|tau|/L^2` carries
    /// `t L^2 / (2|tau|)`.
    pub fn theoretical_alpha(&self) -> Option<f64> {
        match &self.kind {
            OperatorKind::Projector { .. } | OperatorKind::Prox { .. } => Some(0.5),
            OperatorKind::Reflector { .. } => None,
            OperatorKind::GradientStep { f, t } => {
                let FunctionSpec::Quadratic { a, .. } = f else {
                    return None;
                };
                let eigs = a.symmetric_eigenvalues().ok()?;
                let lambda_min = *eigs.first()?;
                let lambda_max_abs = eigs.iter().fold(0.0f64, |m, e| m.max(e.abs()));
                if lambda_min <= 0.0 || lambda_max_abs == 0.0 {
                    return None;
                }
                let big_l = 2.0 * lambda_max_abs;
                let tau_abs = 2.0 * lambda_min;
                let beta_star = 2.0 * tau_abs / (big_l * big_l);
                (*t < beta_star).then(|| t / beta_star)
            }
            OperatorKind::Compose { operators } => {
                let alphas: Option<Vec<f64>> =
                    operators.iter().map(|o| o.theoretical_alpha()).collect();
                let alphas = alphas?;
                let m = alphas.len() as f64;
                let max = alphas.iter().cloned().fold(0.0f64, f64::max);
                Some(m / (m - 1.0 + 1.0 / max))
            }
            OperatorKind::Average { operators, .. } => operators
                .iter()
                .map(|o| o.theoretical_alpha())
                .try_fold(0.0f64, |m, a| a.map(|a| m.max(a))),
            OperatorKind::KMRelax { operator, .. } => operator.theoretical_alpha(),
            OperatorKind::CyclicProjections { sets } => {
                let m = sets.len() as f64;
                Some(m / (m + 1.0))
            }
            OperatorKind::DouglasRachford { .. } => Some(0.5),
            OperatorKind::Raar { .. } => Some(0.5),
        }
    }
}

impl OperatorSpec {
    pub fn ambient_dim(&self) -> usize {
        match &self.kind {
            OperatorKind::Projector { set } => set.ambient_dim(),
            OperatorKind::Prox { function, .. } => function.ambient_dim(),
            OperatorKind::Reflector { target } => match target {
                ReflectTarget::Set { set } => set.ambient_dim(),
                ReflectTarget::Function { function } => function.ambient_dim(),
            },
            OperatorKind::GradientStep { f, .. } => f.ambient_dim(),
            OperatorKind::Compose { operators } | OperatorKind::Average { operators, .. } => {
                operators.first().map(|o| o.ambient_dim()).unwrap_or(0)
            }
            OperatorKind::KMRelax { operator, .. } => operator.ambient_dim(),
            OperatorKind::CyclicProjections { sets } => {
                sets.first().map(|s| s.ambient_dim()).unwrap_or(0)
            }
            OperatorKind::DouglasRachford { f, .. } => f.ambient_dim(),
            OperatorKind::Raar { a, .. } => a.ambient_dim(),
        }
    }
}

struct EvalCtx {
    policy: SelectionPolicy,
    rng: Option<ChaCha8Rng>,
    continuum: bool,
}

impl EvalCtx {
    fn new(policy: &SelectionPolicy, call_index: u64) -> Self {
        let rng = match policy {
            SelectionPolicy::RandomSeeded { seed } => Some(ChaCha8Rng::seed_from_u64(
                seed ^ call_index.wrapping_mul(0x9e3779b97f4a7c15),
            )),
            _ => None,
        };
        EvalCtx {
            policy: policy.clone(),
            rng,
            continuum: false,
        }
    }

    fn budget(&self) -> Option<usize> {
        match self.policy {
            SelectionPolicy::AllBranches { budget } => Some(budget),
            _ => None,
        }
    }

    /// Resolves one multivalued projector/prox answer under the policy.
    fn resolve(&mut self, mut points: Vec<Point>, multiplicity: Multiplicity) -> Vec<Point> {
        if multiplicity == Multiplicity::Continuum {
            self.continuum = true;
        }
        if points.len() <= 1 {
            return points;
        }
        match &self.policy {
            SelectionPolicy::LexicographicMin => {
                points.sort_by(|a, b| a.lex_cmp(b));
                points.truncate(1);
                points
            }
            SelectionPolicy::RandomSeeded { .. } => {
                points.sort_by(|a, b| a.lex_cmp(b));
                let i = self.rng.as_mut().unwrap().gen_range(0..points.len());
                vec![points.swap_remove(i)]
            }
            SelectionPolicy::AllBranches { .. } => points,
        }
    }

    fn check_budget(&self, count: usize) -> Result<()> {
        if let Some(budget) = self.budget() {
            if count > budget {
                return Err(Error::BranchBudgetExceeded { budget });
            }
        }
        Ok(())
    }
}

fn eval(op: &OperatorSpec, x: &Point, ctx: &mut EvalCtx) -> Result<Vec<Point>> {
    let out = match &op.kind {
        OperatorKind::Projector { set } => {
            let r = project(set, x)?;
            ctx.resolve(r.points, r.multiplicity)
        }
        OperatorKind::Prox { function, lambda } => {
            let r = prox(function, *lambda, x)?;
            ctx.resolve(r.points, r.multiplicity)
        }
        OperatorKind::Reflector { target } => {
            let r = match target {
                ReflectTarget::Set { set } => project(set, x)?,
                ReflectTarget::Function { function } => prox(function, 1.0, x)?,
            };
            ctx.resolve(r.points, r.multiplicity)
                .into_iter()
                .map(|p| p.scale(2.0).sub(x))
                .collect()
        }
        OperatorKind::GradientStep { f, t } => {
            let FunctionSpec::Quadratic { a, b } = f else {
                return Err(Error::UnsupportedKind(
                    "gradient step requires a quadratic".into(),
                ));
            };
            let grad = a.apply(x).scale(2.0).add(b);
            vec![x.axpy(-t, &grad)]
        }
        OperatorKind::Compose { operators } => {
            let mut frontier = vec![x.clone()];
            for op in operators.iter().rev() {
                let mut next = Vec::new();
                for p in &frontier {
                    next.extend(eval(op, p, ctx)?);
                }
                frontier = sort_dedup(next, BRANCH_DEDUP_TOL);
                ctx.check_budget(frontier.len())?;
            }
            frontier
        }
        OperatorKind::Average { operators, weights } => {
            // Cartesian combinations of the children's branches.
            let mut combos: Vec<Point> = vec![Point::zeros(x.dim())];
            for (op, w) in operators.iter().zip(weights) {
                let branches = eval(op, x, ctx)?;
                let mut next = Vec::with_capacity(combos.len() * branches.len());
                for acc in &combos {
                    for b in &branches {
                        next.push(acc.axpy(*w, b));
                    }
                }
                combos = sort_dedup(next, BRANCH_DEDUP_TOL);
                ctx.check_budget(combos.len())?;
            }
            combos
        }
        OperatorKind::KMRelax { operator, lambda } => eval(operator, x, ctx)?
            .into_iter()
            .map(|p| x.scale(1.0 - lambda).add(&p.scale(*lambda)))
            .collect(),
        OperatorKind::CyclicProjections { sets } => {
            let expanded = cyclic_projections(sets.to_vec())?;
            eval(&expanded, x, ctx)?
        }
        OperatorKind::DouglasRachford { f, g } => {
            let rg = OperatorSpec::prox_reflector(g.clone());
            let rf = OperatorSpec::prox_reflector(f.clone());
            let mut out = Vec::new();
            for y in eval(&rg, x, ctx)? {
                for z in eval(&rf, &y, ctx)? {
                    out.push(z.add(x).scale(0.5));
                }
            }
            ctx.check_budget(out.len())?;
            out
        }
        OperatorKind::Raar { a, b, beta } => {
            let pb = OperatorSpec::projector(b.clone());
            let pa = OperatorSpec::projector(a.clone());
            let mut out = Vec::new();
            for p in eval(&pb, x, ctx)? {
                let r = p.scale(2.0).sub(x);
                for q in eval(&pa, &r, ctx)? {
                    // (beta/2)(R_A R_B x + x) + (1 - beta) P_B x
                    let ra_rb = q.scale(2.0).sub(&r);
                    out.push(ra_rb.add(x).scale(beta / 2.0).add(&p.scale(1.0 - beta)));
                }
            }
            ctx.check_budget(out.len())?;
            out
        }
    };
    let out = sort_dedup(out, BRANCH_DEDUP_TOL);
    ctx.check_budget(out.len())?;
    Ok(out)
}

/// Evaluates `T` at `x` under the policy, with call index 0.
pub fn apply(op: &OperatorSpec, x: &Point, policy: &SelectionPolicy) -> Result<Images> {
    apply_at(op, x, policy, 0)
}

/// Evaluates `T` at `x`; `call_index` seeds the random-seeded policy's
/// per-call stream (Picard drivers pass the iteration index).
pub fn apply_at(
    op: &OperatorSpec,
    x: &Point,
    policy: &SelectionPolicy,
    call_index: u64,
) -> Result<Images> {
    x.check_dim(op.ambient_dim())?;
    policy.validate()?;
    op.validate()?;
    let mut ctx = EvalCtx::new(policy, call_index);
    let points = eval(op, x, &mut ctx)?;
    Ok(Images {
        points,
        continuum: ctx.continuum,
    })
}

impl Operator for OperatorSpec {
    fn ambient_dim(&self) -> usize {
        OperatorSpec::ambient_dim(self)
    }

    fn apply_at(&self, x: &Point, policy: &SelectionPolicy, call_index: u64) -> Result<Images> {
        apply_at(self, x, policy, call_index)
    }
}

/// Cyclic projections operator `P_1 P_2 ... P_m P_1` over the given sets,
/// written as the explicit composition (the trailing projector onto the
/// first set is redundant by idempotence but kept deliberately).
pub fn cyclic_projections(sets: Vec<SetSpec>) -> Result<OperatorSpec> {
    if sets.len() < 2 {
        return Err(Error::InvalidParameter(
            "cyclic projections needs at least two sets".into(),
        ));
    }
    let dim = sets[0].ambient_dim();
    for s in &sets {
        if s.ambient_dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.ambient_dim(),
            });
        }
    }
    let mut ops: Vec<OperatorSpec> = sets.iter().cloned().map(OperatorSpec::projector).collect();
    ops.push(OperatorSpec::projector(sets[0].clone()));
    Ok(OperatorSpec::compose(ops))
}

/// Krasnoselski-Mann relaxation `(1-lambda) Id + lambda T`.
pub fn km_relax(op: OperatorSpec, lambda: f64) -> Result<OperatorSpec> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "relaxation parameter must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(OperatorSpec::new(OperatorKind::KMRelax {
        operator: Box::new(op),
        lambda,
    }))
}

/// Forward-backward map `prox_{1,g}(x - t (2 A x + b))` for a quadratic
/// `f(x) = x'Ax + b'x`.
pub fn forward_backward(f: FunctionSpec, g: FunctionSpec, t: f64) -> Result<OperatorSpec> {
    if !matches!(f, FunctionSpec::Quadratic { .. }) {
        return Err(Error::UnsupportedKind(
            "forward-backward smooth part must be quadratic".into(),
        ));
    }
    if !matches!(g, FunctionSpec::L1 { .. } | FunctionSpec::Indicator { .. }) {
        return Err(Error::UnsupportedKind(
            "forward-backward nonsmooth part must be l1 or an indicator".into(),
        ));
    }
    if t <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "step length must be positive, got {t}"
        )));
    }
    Ok(OperatorSpec::compose(vec![
        OperatorSpec::prox_map(g, 1.0),
        OperatorSpec::gradient_step(f, t),
    ]))
}

/// Douglas-Rachford map `(R_f R_g + Id)/2`.
pub fn douglas_rachford(f: FunctionSpec, g: FunctionSpec) -> Result<OperatorSpec> {
    f.validate()?;
    g.validate()?;
    Ok(OperatorSpec::new(OperatorKind::DouglasRachford { f, g }))
}

/// Relaxed averaged alternating reflections with relaxation `beta`.
pub fn raar(a: SetSpec, b: SetSpec, beta: f64) -> Result<OperatorSpec> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "RAAR parameter must lie in (0, 1), got {beta}"
        )));
    }
    Ok(OperatorSpec::new(OperatorKind::Raar { a, b, beta }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::point;
    use rand::Rng;

    fn lex() -> SelectionPolicy {
        SelectionPolicy::LexicographicMin
    }

    fn seeded_points(seed: u64, n: usize, dim: usize, scale: f64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point::new((0..dim).map(|_| rng.gen_range(-scale..scale)).collect()))
            .collect()
    }

    #[test]
    fn projector_image() {
        let t = OperatorSpec::projector(SetSpec::hyperplane(point![0.0, 1.0], 0.0));
        let out = apply(&t, &point![2.0, 3.0], &lex()).unwrap();
        assert_eq!(out.points, vec![point![2.0, 0.0]]);
        assert!(!out.continuum);
    }

    #[test]
    fn compose_is_right_to_left() {
        // Alternating projections step: normalize onto the circle first,
        // then drop to the line.
        let line = SetSpec::hyperplane(point![0.0, 1.0], -1.0);
        let circle = SetSpec::sphere(point![0.0, 0.0], 1.0);
        let t = OperatorSpec::compose(vec![
            OperatorSpec::projector(line),
            OperatorSpec::projector(circle.clone()),
        ]);
        let x = point![0.3, -1.0];
        let on_circle = &project(&circle, &x).unwrap().points[0];
        let expected = point![on_circle.coords()[0], -1.0];
        let out = apply(&t, &x, &lex()).unwrap();
        assert!(out.points[0].dist(&expected) < 1e-14);
    }

    #[test]
    fn all_branches_enumerates_ties() {
        let t = OperatorSpec::projector(SetSpec::orthant_complement(2));
        let out = apply(
            &t,
            &point![1.0, 1.0],
            &SelectionPolicy::AllBranches { budget: 4 },
        )
        .unwrap();
        assert_eq!(out.points.len(), 2);
        assert!(out.points.contains(&point![0.0, 1.0]));
        assert!(out.points.contains(&point![1.0, 0.0]));
    }

    #[test]
    fn branch_budget_is_enforced() {
        let t = OperatorSpec::projector(SetSpec::orthant_complement(2));
        let err = apply(
            &t,
            &point![1.0, 1.0],
            &SelectionPolicy::AllBranches { budget: 1 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::BranchBudgetExceeded { budget: 1 }));
    }

    #[test]
    fn continuum_flag_is_carried() {
        let t = OperatorSpec::projector(SetSpec::sphere(point![0.0, 0.0], 1.0));
        let out = apply(&t, &point![0.0, 0.0], &lex()).unwrap();
        assert!(out.continuum);
        assert_eq!(out.points.len(), 1);
    }

    #[test]
    fn random_seeded_is_deterministic() {
        let t = OperatorSpec::projector(SetSpec::orthant_complement(2));
        let p = SelectionPolicy::RandomSeeded { seed: 7 };
        let a = apply_at(&t, &point![1.0, 1.0], &p, 3).unwrap();
        let b = apply_at(&t, &point![1.0, 1.0], &p, 3).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.points.len(), 1);
    }

    #[test]
    fn km_relax_endpoints() {
        let t = OperatorSpec::projector(SetSpec::hyperplane(point![0.0, 1.0], 0.0));
        let x = point![2.0, 4.0];
        let id = km_relax(t.clone(), 0.0).unwrap();
        assert_eq!(apply(&id, &x, &lex()).unwrap().points, vec![x.clone()]);
        let full = km_relax(t.clone(), 1.0).unwrap();
        assert_eq!(
            apply(&full, &x, &lex()).unwrap().points,
            apply(&t, &x, &lex()).unwrap().points
        );
    }

    #[test]
    fn half_km_of_reflectors_is_douglas_rachford() {
        let f = FunctionSpec::indicator(SetSpec::hyperplane(point![0.0, 1.0], -1.0));
        let g = FunctionSpec::indicator(SetSpec::sphere(point![0.0, 0.0], 1.0));
        let rr = OperatorSpec::compose(vec![
            OperatorSpec::prox_reflector(f.clone()),
            OperatorSpec::prox_reflector(g.clone()),
        ]);
        let half = km_relax(rr, 0.5).unwrap();
        let dr = douglas_rachford(f, g).unwrap();
        for x in seeded_points(11, 20, 2, 3.0) {
            let a = apply(&half, &x, &lex()).unwrap().points;
            let b = apply(&dr, &x, &lex()).unwrap().points;
            assert_eq!(a.len(), 1);
            assert!(a[0].dist(&b[0]) < 1e-12);
        }
    }

    #[test]
    fn forward_backward_projected_gradient() {
        let f = FunctionSpec::quadratic(Matrix::identity(2), point![0.0, 0.0]);
        let g = FunctionSpec::indicator(SetSpec::ball(point![0.0, 0.0], 1.0));
        let t = forward_backward(f, g, 0.1).unwrap();
        let out = apply(&t, &point![2.0, 0.0], &lex()).unwrap();
        assert!(out.points[0].dist(&point![1.0, 0.0]) < 1e-14);
    }

    #[test]
    fn forward_backward_soft_threshold_step() {
        // Forward step (3,0) - 0.25 * 2 * I (3,0) = (1.5, 0), then the prox
        // of |.|_1 at parameter 1 shrinks by the weight:
        // a 1-D brute-force minimization of |y| + (y-1.5)^2/2 gives 0.5.
        let f = FunctionSpec::quadratic(Matrix::diagonal(&[1.0, 1.0]), point![0.0, 0.0]);
        let g = FunctionSpec::l1(1.0, vec![1.0, 1.0]);
        let t = forward_backward(f, g, 0.25).unwrap();
        let out = apply(&t, &point![3.0, 0.0], &lex()).unwrap();
        assert!(out.points[0].dist(&point![0.5, 0.0]) < 1e-14);
    }

    #[test]
    fn forward_backward_fixes_origin() {
        let f = FunctionSpec::quadratic(Matrix::diagonal(&[2.0, 1.0]), point![0.0, 0.0]);
        let g = FunctionSpec::l1(0.1, vec![1.0, 1.0]);
        let t = forward_backward(f, g, 0.1).unwrap();
        let out = apply(&t, &point![0.0, 0.0], &lex()).unwrap();
        assert_eq!(out.points, vec![point![0.0, 0.0]]);
    }

    #[test]
    fn douglas_rachford_fixes_common_hyperplane() {
        let h = FunctionSpec::indicator(SetSpec::hyperplane(point![0.0, 1.0], 0.0));
        let dr = douglas_rachford(h.clone(), h).unwrap();
        for x in [point![0.0, 0.0], point![5.0, 0.0], point![-2.0, 0.0]] {
            let out = apply(&dr, &x, &lex()).unwrap();
            assert!(out.points[0].dist(&x) < 1e-14);
        }
    }

    #[test]
    fn douglas_rachford_translates_on_parallel_lines() {
        // Closed form: with f, g the indicators of x2 = 0 and x2 = d, each
        // step translates by (0, -d).
        let d = 1.0;
        let f = FunctionSpec::indicator(SetSpec::hyperplane(point![0.0, 1.0], 0.0));
        let g = FunctionSpec::indicator(SetSpec::hyperplane(point![0.0, 1.0], d));
        let dr = douglas_rachford(f, g).unwrap();
        let mut x = point![0.3, 0.2];
        for k in 1..=5 {
            x = apply(&dr, &x, &lex()).unwrap().points.remove(0);
            assert!(x.dist(&point![0.3, 0.2 - d * k as f64]) < 1e-12);
        }
    }

    #[test]
    fn douglas_rachford_tangent_pair_shadows_the_intersection() {
        // Line tangent to the unit circle at (0, -1): starting near the
        // tangency point, the iteration settles on a fixed point whose
        // projection onto the circle is the intersection point.  The
        // alternating-projections limit from the same start agrees.
        let line = SetSpec::hyperplane(point![0.0, 1.0], -1.0);
        let circle = SetSpec::sphere(point![0.0, 0.0], 1.0);
        let dr = douglas_rachford(
            FunctionSpec::indicator(line.clone()),
            FunctionSpec::indicator(circle.clone()),
        )
        .unwrap();
        let xbar = point![0.0, -1.0];
        let mut x = point![0.4, -0.8];
        let mut residual = f64::INFINITY;
        for _ in 0..10_000 {
            let next = apply(&dr, &x, &lex()).unwrap().points.remove(0);
            residual = next.dist(&x);
            x = next;
            if residual <= 1e-12 {
                break;
            }
        }
        assert!(residual <= 1e-12, "DR did not converge");
        let shadow = &project(&circle, &x).unwrap().points[0];
        assert!(shadow.dist(&xbar) < 1e-8, "shadow {:?}", shadow);

        // Alternating projections from the same start creep toward the
        // tangency point sublinearly.
        let ap = OperatorSpec::compose(vec![
            OperatorSpec::projector(line),
            OperatorSpec::projector(circle),
        ]);
        let mut y = point![0.4, -0.8];
        for _ in 0..100_000 {
            y = apply(&ap, &y, &lex()).unwrap().points.remove(0);
        }
        assert!(y.dist(&xbar) < 5e-3, "AP limit {:?}", y);
        assert!(shadow.dist(&y) < 5e-3);
    }

    #[test]
    fn raar_limits() {
        let a = SetSpec::hyperplane(point![0.0, 1.0], 0.0);
        let b = SetSpec::sphere(point![0.0, 0.0], 2.0);
        let x = point![0.7, 1.3];
        // beta -> 1 recovers Douglas-Rachford on the indicators.
        let near_dr = raar(a.clone(), b.clone(), 1.0 - 1e-9).unwrap();
        let dr = douglas_rachford(
            FunctionSpec::indicator(a.clone()),
            FunctionSpec::indicator(b.clone()),
        )
        .unwrap();
        let u = apply(&near_dr, &x, &lex()).unwrap().points.remove(0);
        let v = apply(&dr, &x, &lex()).unwrap().points.remove(0);
        assert!(u.dist(&v) < 1e-7);
        // beta -> 0 recovers the projector onto B.
        let near_pb = raar(a, b.clone(), 1e-9).unwrap();
        let w = apply(&near_pb, &x, &lex()).unwrap().points.remove(0);
        let pb = &project(&b, &x).unwrap().points[0];
        assert!(w.dist(pb) < 1e-7);
    }

    #[test]
    fn raar_matches_envelope_douglas_rachford() {
        // RAAR(beta) coincides with Douglas-Rachford whose first function
        // is the Moreau envelope of the indicator at mu = (1-beta)/beta.
        let a = SetSpec::sphere(point![0.0, 0.0], 1.0);
        let b = SetSpec::hyperplane(point![0.0, 1.0], 1.5);
        let beta = 0.7;
        let mu = (1.0 - beta) / beta;
        let t1 = raar(a.clone(), b.clone(), beta).unwrap();
        let t2 = douglas_rachford(
            FunctionSpec::moreau_envelope_of(FunctionSpec::indicator(a), mu),
            FunctionSpec::indicator(b),
        )
        .unwrap();
        for x in seeded_points(23, 20, 2, 3.0) {
            let u = apply(&t1, &x, &lex()).unwrap().points.remove(0);
            let v = apply(&t2, &x, &lex()).unwrap().points.remove(0);
            assert!(u.dist(&v) < 1e-12, "mismatch at {:?}", x);
        }
    }

    #[test]
    fn raar_stays_bounded_on_parallel_lines() {
        let a = SetSpec::hyperplane(point![0.0, 1.0], 0.0);
        let b = SetSpec::hyperplane(point![0.0, 1.0], 1.0);
        let t = raar(a, b, 0.7).unwrap();
        let mut x = point![0.3, 0.2];
        for _ in 0..10_000 {
            x = apply(&t, &x, &lex()).unwrap().points.remove(0);
            assert!(x.norm() < 10.0);
        }
        // Fixed point of the relaxation: x2* = (1 - 2 beta) d / (1 - beta).
        assert!((x.coords()[1] - (1.0 - 1.4) / 0.3).abs() < 1e-9);
    }

    #[test]
    fn gradient_step_uses_2ax_plus_b() {
        let f = FunctionSpec::quadratic(Matrix::diagonal(&[1.0, 2.0]), point![1.0, 0.0]);
        let t = OperatorSpec::gradient_step(f, 0.5);
        let out = apply(&t, &point![1.0, 1.0], &lex()).unwrap();
        // grad = 2 diag(1,2) (1,1) + (1,0) = (3, 4); x - 0.5*grad = (-0.5, -1).
        assert!(out.points[0].dist(&point![-0.5, -1.0]) < 1e-14);
    }

    #[test]
    fn steepest_descent_nonexpansive_at_critical_step() {
        // For f(x) = x'Ax with A positive definite, Id - beta grad f is
        // nonexpansive at beta = 2|tau|/L^2.
        let a = Matrix::diagonal(&[2.0, 1.0]);
        let (tau_abs, big_l) = (2.0, 4.0);
        let beta = 2.0 * tau_abs / (big_l * big_l);
        let t = OperatorSpec::gradient_step(FunctionSpec::quadratic(a, point![0.0, 0.0]), beta);
        let pts = seeded_points(5, 40, 2, 10.0);
        for pair in pts.chunks(2) {
            let (x, y) = (&pair[0], &pair[1]);
            let tx = apply(&t, x, &lex()).unwrap().points.remove(0);
            let ty = apply(&t, y, &lex()).unwrap().points.remove(0);
            assert!(tx.dist(&ty) <= x.dist(y) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn average_weights_validated() {
        let p = OperatorSpec::projector(SetSpec::hyperplane(point![0.0, 1.0], 0.0));
        let bad = OperatorSpec::average(vec![p.clone(), p], vec![0.5, 0.6]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn theoretical_alpha_values() {
        let proj = OperatorSpec::projector(SetSpec::ball(point![0.0, 0.0], 1.0));
        assert_eq!(proj.theoretical_alpha(), Some(0.5));
        let two = OperatorSpec::compose(vec![proj.clone(), proj.clone()]);
        assert!((two.theoretical_alpha().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let cp = OperatorSpec::new(OperatorKind::CyclicProjections {
            sets: vec![
                SetSpec::hyperplane(point![0.0, 1.0], 0.0),
                SetSpec::hyperplane(point![1.0, 0.0], 0.0),
                SetSpec::hyperplane(point![1.0, 1.0], 0.0),
            ],
        });
        assert!((cp.theoretical_alpha().unwrap() - 0.75).abs() < 1e-15);
        // Forward-backward with alpha0 = t/beta* <= 1/2 lands on 2/3.
        let fb = forward_backward(
            FunctionSpec::quadratic(Matrix::diagonal(&[2.0, 1.0]), point![0.0, 0.0]),
            FunctionSpec::l1(0.1, vec![1.0, 1.0]),
            0.1,
        )
        .unwrap();
        assert!((fb.theoretical_alpha().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_valued_at_regular_fixed_points() {
        // At a fixed point where the map is almost nonexpansive, the image
        // is the fixed point alone even under all-branches.
        let sets = vec![
            SetSpec::hyperplane(point![0.0, 1.0], 0.0),
            SetSpec::hyperplane(point![-(3.0f64.sqrt()), 1.0], 3.0f64.sqrt()),
            SetSpec::hyperplane(point![3.0f64.sqrt(), 1.0], 3.0f64.sqrt()),
        ];
        let p0 = cyclic_projections(sets).unwrap();
        let fixed = point![-1.0 / 3.0, 0.0];
        let out = apply(&p0, &fixed, &SelectionPolicy::AllBranches { budget: 16 }).unwrap();
        assert_eq!(out.points.len(), 1);
        assert!(out.points[0].dist(&fixed) < 1e-12);
    }

    #[test]
    fn operator_spec_json_round_trip() {
        let t = raar(
            SetSpec::sphere(point![0.0, 0.0], 1.0),
            SetSpec::box_set(vec![-1.0, -1.0], vec![1.0, 1.0]),
            0.7,
        )
        .unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"kind\":\"RAAR\""));
        let back: OperatorSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
    }
}

//! Ellipsoid queries.
//!
//! A euclidean ellipsoid query `(p, {e_i})` with fixed rational weights scores
//! `x` by `sum_i w_i (e_i . (x - p))^2`. The structure shrink-lifts everything
//! onto the sphere, where the query becomes an angular ellipsoid with axes
//! orthogonal to the lifted center. Each axis `e` is expanded into the pair
//! `{e, -e}`, whose geometric angular similarity to `x` is
//! `1/4 - angle(x, e-hyperplane)^2 / pi^2`, and the weighted geometric
//! similarity of the expanded query is indexed with weighted exhaustive SLSH.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::HashFamily;
use crate::hashes::Hyperplane;
use crate::index::{IndexConfig, IndexParams, QueryOutcome, SlshIndex, Strategy, ThresholdMode};
use crate::lift::{beta, shrink_lift, LiftParams};
use crate::metrics::{angle, dot, norm_sq, Direction, Point, Rational, SetQuery};
use crate::rng::{derive, pick_index};
use crate::slsh::{ExpansionPlan, WeightedExhaustiveSlsh, DEFAULT_MULTIPLICITY_CAP};

/// Tolerance for unit norms and orthogonality of axes.
pub const AXIS_TOLERANCE: f64 = 1e-9;

/// Lifted center/point pairs checked against the angular precondition at build.
const PRECONDITION_SAMPLES: usize = 256;

fn weight_sum(w: &[Rational]) -> f64 {
    w.iter().map(Rational::to_f64).sum()
}

fn check_unit(v: &Point, what: &'static str) -> Result<()> {
    let n = v.norm();
    if (n - 1.0).abs() > AXIS_TOLERANCE {
        return Err(Error::param(
            what,
            format!("must be a unit vector, norm is {n}"),
        ));
    }
    Ok(())
}

fn check_weights(w: &[Rational], dim: usize) -> Result<()> {
    if w.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: w.len(),
        });
    }
    if weight_sum(w) <= 0.0 {
        return Err(Error::param(
            "weights",
            "at least one weight must be positive",
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EuclideanEllipsoidQuery {
    center: Point,
    axes: Vec<Point>,
}

impl EuclideanEllipsoidQuery {
    /// `axes` must be `d` pairwise orthonormal vectors; `center` in the unit ball.
    pub fn new(center: Point, axes: Vec<Point>) -> Result<Self> {
        let d = center.dim();
        center.check_unit_ball()?;
        if axes.len() != d {
            return Err(Error::ArityMismatch {
                expected: d,
                got: axes.len(),
            });
        }
        for (i, a) in axes.iter().enumerate() {
            if a.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: a.dim(),
                });
            }
            for (j, b) in axes[..=i].iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                let v = dot(a.coords(), b.coords());
                if (v - expect).abs() > AXIS_TOLERANCE {
                    return Err(Error::param("axes", "must be orthonormal"));
                }
            }
        }
        Ok(EuclideanEllipsoidQuery { center, axes })
    }

    /// Axis-aligned query around `center`.
    pub fn standard(center: Point) -> Result<Self> {
        let d = center.dim();
        let axes = (0..d).map(|i| Point::basis(d, i)).collect();
        Self::new(center, axes)
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn axes(&self) -> &[Point] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }
}

/// `sum_i w_i (e_i . (x - p))^2`.
pub fn euclidean_ellipsoid_distance(
    q: &EuclideanEllipsoidQuery,
    x: &Point,
    w: &[Rational],
) -> Result<f64> {
    check_weights(w, q.dim())?;
    let diff = x.sub(&q.center)?;
    Ok(q.axes
        .iter()
        .zip(w)
        .map(|(e, wi)| wi.to_f64() * dot(e.coords(), diff.coords()).powi(2))
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularEllipsoidQuery {
    center: Point,
    axes: Vec<Point>,
}

impl AngularEllipsoidQuery {
    /// Unit center and unit axes, each orthogonal to the center.
    pub fn new(center: Point, axes: Vec<Point>) -> Result<Self> {
        check_unit(&center, "center")?;
        if axes.is_empty() {
            return Err(Error::Empty("angular ellipsoid axes"));
        }
        for a in &axes {
            if a.dim() != center.dim() {
                return Err(Error::DimensionMismatch {
                    expected: center.dim(),
                    got: a.dim(),
                });
            }
            check_unit(a, "axis")?;
            if dot(a.coords(), center.coords()).abs() > AXIS_TOLERANCE {
                return Err(Error::param("axes", "must be orthogonal to the center"));
            }
        }
        Ok(AngularEllipsoidQuery { center, axes })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn axes(&self) -> &[Point] {
        &self.axes
    }

    /// `{e_1, -e_1, ..., e_d, -e_d}`.
    pub fn antipodal_expansion(&self) -> Vec<Point> {
        antipodal_expand(&self.axes)
    }
}

pub fn antipodal_expand(axes: &[Point]) -> Vec<Point> {
    axes.iter().flat_map(|e| [e.clone(), e.neg()]).collect()
}

/// `{w_1, w_1, ..., w_d, w_d}`.
pub fn duplicate_weights(w: &[Rational]) -> Vec<Rational> {
    w.iter().flat_map(|&v| [v, v]).collect()
}

/// `asin(|e . x|)`: angle between `x` and the hyperplane orthogonal to `e`.
pub fn angular_axis_angle(e: &Point, x: &Point) -> Result<f64> {
    if e.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: x.dim(),
        });
    }
    check_unit(e, "axis")?;
    check_unit(x, "point")?;
    let s = dot(e.coords(), x.coords()).abs().min(1.0);
    Ok(s.asin())
}

/// `sum_i w_i angle_i(q, x)^2`.
pub fn angular_ellipsoid_distance(
    q: &AngularEllipsoidQuery,
    x: &Point,
    w: &[Rational],
) -> Result<f64> {
    check_weights(w, q.axes.len())?;
    let mut total = 0.0;
    for (e, wi) in q.axes.iter().zip(w) {
        total += wi.to_f64() * angular_axis_angle(e, x)?.powi(2);
    }
    Ok(total)
}

/// Largest shrink factor for which the euclidean-to-angular reduction holds.
pub fn choose_epsilon(r: f64, c: f64, w: &[Rational]) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param("r", "must be positive"));
    }
    if !(c > 1.0 && c.is_finite()) {
        return Err(Error::param("c", format!("must exceed 1, got {c}")));
    }
    let sw = weight_sum(w);
    if sw <= 0.0 {
        return Err(Error::param("weights", "sum must be positive"));
    }
    let c8 = c.powf(0.125);
    let sc = c.sqrt();
    let branches = [
        0.125,
        (c8 - 1.0) / (c8 + 1.0),
        ((c - sc) * r / (5.0 * (sc + 1.0) * sw)).sqrt(),
        (1.0 - c.powf(-0.25)).sqrt() * PI / (8.0 * 2f64.sqrt()),
    ];
    Ok(branches.into_iter().fold(f64::INFINITY, f64::min))
}

/// Angular thresholds `(r', c')` for the lifted ellipsoid.
pub fn euclid_to_angular_params(r: f64, c: f64, w: &[Rational], eps: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0 && eps <= 0.125) {
        return Err(Error::param(
            "epsilon",
            format!("must lie in (0, 1/8], got {eps}"),
        ));
    }
    let sw = weight_sum(w);
    let b5 = 5.0 * beta(eps)? * sw;
    let e2 = eps * eps;
    let r_prime = e2 * (1.0 + eps).powi(2) * (r + b5);
    let c_prime = e2 * (1.0 - eps).powi(2) * (c * r - b5) / r_prime;
    if !(c_prime > 1.0) {
        return Err(Error::param(
            "epsilon",
            format!("angular approximation {c_prime} is not above 1; epsilon too large"),
        ));
    }
    Ok((r_prime, c_prime))
}

/// Lifted axis `(a_i e_i; sqrt(1 - a_i^2))`, orthogonal to the lifted center.
///
/// `p_i = e_i . p` generalizes the standard-basis construction to any
/// orthonormal frame; `sign(0) = +1`.
pub fn rotate_axis(e: &Point, p: &Point, eps: f64) -> Result<Point> {
    if !(eps > 0.0 && eps <= 0.125) {
        return Err(Error::param(
            "epsilon",
            format!("must lie in (0, 1/8], got {eps}"),
        ));
    }
    if e.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: e.dim(),
        });
    }
    check_unit(e, "axis")?;
    p.check_unit_ball()?;
    let pi = dot(e.coords(), p.coords());
    let s = 1.0 - eps * eps * norm_sq(p.coords());
    let denom = (eps * eps * pi * pi + s).sqrt();
    let sign = if pi >= 0.0 { 1.0 } else { -1.0 };
    let a = -sign * (s / denom.powi(2)).sqrt();
    // sqrt(1 - a^2) without cancellation.
    let tail = eps * pi.abs() / denom;
    let mut v: Vec<f64> = e.coords().iter().map(|c| a * c).collect();
    v.push(tail);
    Point::new(v)
}

/// Lifts a euclidean ellipsoid query to its angular counterpart.
pub fn lift_query(q: &EuclideanEllipsoidQuery, eps: f64) -> Result<AngularEllipsoidQuery> {
    let center = shrink_lift(&q.center, eps)?;
    let axes = q
        .axes
        .iter()
        .map(|e| rotate_axis(e, &q.center, eps))
        .collect::<Result<Vec<_>>>()?;
    AngularEllipsoidQuery::new(center, axes)
}

/// `psi_c = sqrt((c - 1)/c) * pi/4`.
pub fn psi(c: f64) -> Result<f64> {
    if !(c > 1.0) {
        return Err(Error::param("c", format!("must exceed 1, got {c}")));
    }
    Ok(((c - 1.0) / c).sqrt() * PI / 4.0)
}

/// Thresholds of the weighted geometric angular similarity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WgeoParams {
    pub psi: f64,
    /// `S'`.
    pub s_prime: f64,
    /// `c'`, in `(0, 1)`.
    pub c_prime: f64,
    /// Weights of the antipodal expansion.
    pub weights: Vec<Rational>,
}

pub fn angular_to_wgeo_params(r: f64, c: f64, w: &[Rational]) -> Result<WgeoParams> {
    if !(r > 0.0) {
        return Err(Error::param("r", "must be positive"));
    }
    let psi = psi(c)?;
    let sw = weight_sum(w);
    let gap = PI * PI - 4.0 * psi * psi;
    let s_prime = (sw * 0.25f64.ln() - 4.0 * r / gap).exp();
    let c_prime = (-4.0 * r * (c / (PI * PI) - 1.0 / gap)).exp();
    Ok(WgeoParams {
        psi,
        s_prime,
        c_prime,
        weights: duplicate_weights(w),
    })
}

/// All derived parameters of a euclidean ellipsoid structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidPlan {
    pub dim: usize,
    pub weights: Vec<Rational>,
    pub r: f64,
    pub c: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub r_angular: f64,
    pub c_angular: f64,
    pub wgeo: WgeoParams,
    pub expansion: ExpansionPlan,
    /// `S'^m`.
    pub p1: f64,
    /// `(c' S')^m`.
    pub p2: f64,
}

impl EllipsoidPlan {
    pub fn new(dim: usize, r: f64, c: f64, weights: Vec<Rational>, cap: u64) -> Result<Self> {
        check_weights(&weights, dim)?;
        let epsilon = choose_epsilon(r, c, &weights)?;
        let (r_angular, c_angular) = euclid_to_angular_params(r, c, &weights, epsilon)?;
        let wgeo = angular_to_wgeo_params(r_angular, c_angular, &weights)?;
        let expansion = ExpansionPlan::new(&wgeo.weights, cap)?;
        let (p1, p2) = expansion.thresholds(wgeo.s_prime, wgeo.c_prime);
        Ok(EllipsoidPlan {
            dim,
            weights,
            r,
            c,
            epsilon,
            beta: beta(epsilon)?,
            r_angular,
            c_angular,
            wgeo,
            expansion,
            p1,
            p2,
        })
    }

    pub fn index_params(&self, n: usize, delta: f64, seed: u64) -> Result<IndexParams> {
        IndexParams::plan(
            ThresholdMode::Similarity,
            self.p1,
            self.p2 / self.p1,
            self.p1,
            self.p2,
            n,
            delta,
            seed,
        )
    }

    pub fn family(&self) -> Result<WeightedExhaustiveSlsh<Hyperplane>> {
        WeightedExhaustiveSlsh::new(
            Hyperplane::new(self.dim + 1)?,
            self.wgeo.weights.clone(),
            DEFAULT_MULTIPLICITY_CAP.max(self.expansion.k_prime as u64),
        )
    }
}

/// `(r, cr)` structure for the euclidean ellipsoid distance.
pub struct EllipsoidIndex {
    plan: EllipsoidPlan,
    lift: LiftParams,
    originals: Vec<Point>,
    index: SlshIndex<WeightedExhaustiveSlsh<Hyperplane>>,
}

impl EllipsoidIndex {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        points: Vec<Point>,
        dim: usize,
        r: f64,
        c: f64,
        weights: Vec<Rational>,
        delta: f64,
        seed: u64,
        config: IndexConfig,
    ) -> Result<Self> {
        let plan = EllipsoidPlan::new(dim, r, c, weights, DEFAULT_MULTIPLICITY_CAP)?;
        Self::from_plan(plan, points, delta, seed, config)
    }

    pub fn from_plan(
        plan: EllipsoidPlan,
        points: Vec<Point>,
        delta: f64,
        seed: u64,
        config: IndexConfig,
    ) -> Result<Self> {
        let params = plan.index_params(points.len(), delta, seed)?;
        if params.l as u64 > config.max_tables {
            return Err(Error::TableBudget {
                needed: params.l as u64,
                cap: config.max_tables,
            });
        }
        let lift = LiftParams::new(plan.epsilon, plan.dim)?;
        let lifted = lift.lift_all(&points)?;
        check_precondition(&lifted, plan.c_angular, seed)?;
        let index = SlshIndex::build(plan.family()?, lifted, params, config)?;
        Ok(EllipsoidIndex {
            plan,
            lift,
            originals: points,
            index,
        })
    }

    pub(crate) fn from_index(
        plan: EllipsoidPlan,
        points: Vec<Point>,
        index: SlshIndex<WeightedExhaustiveSlsh<Hyperplane>>,
    ) -> Result<Self> {
        Ok(EllipsoidIndex {
            lift: LiftParams::new(plan.epsilon, plan.dim)?,
            plan,
            originals: points,
            index,
        })
    }

    pub fn plan(&self) -> &EllipsoidPlan {
        &self.plan
    }

    pub fn index(&self) -> &SlshIndex<WeightedExhaustiveSlsh<Hyperplane>> {
        &self.index
    }

    pub fn points(&self) -> &[Point] {
        &self.originals
    }

    pub fn lift_params(&self) -> &LiftParams {
        &self.lift
    }

    /// Hashes the lifted, antipodally expanded query and returns the best
    /// verified candidate with ellipsoid distance at most `c r`.
    pub fn query(&self, q: &EuclideanEllipsoidQuery) -> Result<QueryOutcome> {
        self.query_with_bar(q, self.plan.c * self.plan.r, |x| {
            euclidean_ellipsoid_distance(q, x, &self.plan.weights)
        })
    }

    /// Same probing with a caller-supplied exact score and bar.
    pub(crate) fn query_with_bar<V>(
        &self,
        q: &EuclideanEllipsoidQuery,
        bar: f64,
        score: V,
    ) -> Result<QueryOutcome>
    where
        V: Fn(&Point) -> Result<f64>,
    {
        if q.dim() != self.plan.dim {
            return Err(Error::DimensionMismatch {
                expected: self.plan.dim,
                got: q.dim(),
            });
        }
        let angular = lift_query(q, self.plan.epsilon)?;
        let expanded = SetQuery::new(angular.antipodal_expansion())?;
        debug_assert_eq!(
            expanded.len(),
            self.index.family().plan().multiplicities.len()
        );
        let (hit, stats) = self.index.query_with(
            &expanded,
            Strategy::Best,
            Direction::Minimize,
            bar,
            |id, _| score(&self.originals[id]),
        )?;
        Ok(QueryOutcome { hit, stats })
    }

    /// Analytic per-table collision probability of `x` for query `q`.
    pub fn collision_probability(&self, q: &EuclideanEllipsoidQuery, x: &Point) -> Result<f64> {
        let angular = lift_query(q, self.plan.epsilon)?;
        let expanded = SetQuery::new(angular.antipodal_expansion())?;
        let lifted = self.lift.lift(x)?;
        let per_fn = self.index.family().collision_law(&expanded, &lifted)?;
        Ok(per_fn.powi(self.index.params().k as i32))
    }
}

/// Every lifted pair must subtend at most `psi_{c'}`; checked on sampled pairs.
fn check_precondition(lifted: &[Point], c_angular: f64, seed: u64) -> Result<()> {
    let n = lifted.len();
    if n < 2 {
        return Ok(());
    }
    let bound = psi(c_angular)?;
    for s in 0..PRECONDITION_SAMPLES.min(n * (n - 1) / 2) {
        let a = pick_index(derive(seed ^ 0x5EED, 2 * s as u64), n);
        let b = pick_index(derive(seed ^ 0x5EED, 2 * s as u64 + 1), n);
        if a == b {
            continue;
        }
        let theta = angle(&lifted[a], &lifted[b])?;
        if theta > bound + AXIS_TOLERANCE {
            return Err(Error::Invariant(format!(
                "lifted points {a} and {b} subtend {theta}, above psi = {bound}"
            )));
        }
    }
    Ok(())
}

/// `prod over {e, -e}` of angular similarities: `1/4 - theta^2/pi^2` where
/// `theta` is the angle between `x` and the hyperplane orthogonal to `e`.
pub fn antipodal_pair_law(e: &Point, x: &Point) -> Result<f64> {
    let theta = angular_axis_angle(e, x)?;
    Ok(0.25 - theta * theta / (PI * PI))
}

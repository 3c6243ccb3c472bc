//! Shrink-lift geometry and the average-distance pipelines.
//!
//! `x -> (eps x; sqrt(1 - |eps x|^2))` maps the unit ball onto the upper cap
//! of the unit sphere one dimension up, turning euclidean distances into
//! angles up to the factor `m(eps)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashes::Hyperplane;
use crate::index::{
    IndexConfig, IndexParams, QueryOutcome, SlshIndex, Strategy, ThresholdMode, VerifiedIndex,
};
use crate::metrics::{
    dist_sq, norm_sq, sqrt_clamped, Direction, DistanceAggregation, DistanceKind, Point, S2p,
    SetQuery,
};
use crate::slsh::RepeatSlsh;

/// Below this shrink factor the lifted structure gets very large.
pub const SMALL_EPSILON: f64 = 0.01;

fn check_lift_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::param(
            "epsilon",
            format!("must lie in (0, 1/2], got {eps}"),
        ));
    }
    Ok(())
}

/// `(eps x; sqrt(1 - |eps x|^2))`, a unit vector with positive last coordinate.
pub fn shrink_lift(x: &Point, eps: f64) -> Result<Point> {
    check_lift_eps(eps)?;
    x.check_unit_ball()?;
    let mut v: Vec<f64> = x.coords().iter().map(|c| c * eps).collect();
    let tail = sqrt_clamped(1.0 - norm_sq(&v));
    v.push(tail);
    Point::new(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftParams {
    pub epsilon: f64,
    /// Source dimension; lifted points have `dim + 1` coordinates.
    pub dim: usize,
}

impl LiftParams {
    pub fn new(epsilon: f64, dim: usize) -> Result<Self> {
        check_lift_eps(epsilon)?;
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        Ok(LiftParams { epsilon, dim })
    }

    pub fn lift(&self, x: &Point) -> Result<Point> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        shrink_lift(x, self.epsilon)
    }

    pub fn lift_all(&self, points: &[Point]) -> Result<Vec<Point>> {
        points
            .iter()
            .enumerate()
            .map(|(i, x)| self.lift(x).map_err(|e| Error::at_point(i, e)))
            .collect()
    }
}

/// `m(eps) = sqrt(1 + 2 eps^2) / sqrt(1 - 2 eps^2)`.
pub fn m_factor(eps: f64) -> Result<f64> {
    if !(eps >= 0.0 && 2.0 * eps * eps < 1.0) {
        return Err(Error::param(
            "epsilon",
            format!("m(eps) needs 0 <= eps < 1/sqrt(2), got {eps}"),
        ));
    }
    let e2 = 2.0 * eps * eps;
    Ok(((1.0 + e2) / (1.0 - e2)).sqrt())
}

/// `beta(eps) = (1 - sqrt(1 - eps^2)) / sqrt(1 - eps^2)`.
pub fn beta(eps: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::param(
            "epsilon",
            format!("beta needs 0 <= eps < 1, got {eps}"),
        ));
    }
    let s = (1.0 - eps * eps).sqrt();
    // 1 - s = eps^2 / (1 + s) avoids cancellation for small eps.
    Ok(eps * eps / ((1.0 + s) * s))
}

/// `(sqrt(1/eps^2 - |x|^2) - sqrt(1/eps^2 - |y|^2))^2`.
pub fn error_term(eps: f64, x: &Point, y: &Point) -> Result<f64> {
    check_lift_eps(eps)?;
    x.check_unit_ball()?;
    y.check_unit_ball()?;
    let inv = 1.0 / (eps * eps);
    let (a, b) = (inv - norm_sq(x.coords()), inv - norm_sq(y.coords()));
    // Difference of square roots via (a - b) / (sqrt a + sqrt b).
    let d = (a - b) / (a.sqrt() + b.sqrt());
    Ok(d * d)
}

/// Shrink factor and angular thresholds for average euclidean distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvgEuclidParams {
    pub epsilon: f64,
    pub m: f64,
    /// Angular threshold `m(eps) eps r`.
    pub r_prime: f64,
    /// Angular approximation `c / m(eps)`.
    pub c_prime: f64,
}

impl AvgEuclidParams {
    pub fn small_epsilon(&self) -> bool {
        self.epsilon < SMALL_EPSILON
    }
}

pub fn avg_euclid_slsh_params(r: f64, c: f64) -> Result<AvgEuclidParams> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param("r", "must be positive"));
    }
    if !(c > 1.0 && c.is_finite()) {
        return Err(Error::param("c", format!("must exceed 1, got {c}")));
    }
    let epsilon = 0.5 * (1.0 - 2.0 / (1.0 + c * c)).sqrt();
    let m = m_factor(epsilon)?;
    let params = AvgEuclidParams {
        epsilon,
        m,
        r_prime: m * epsilon * r,
        c_prime: c / m,
    };
    if params.small_epsilon() {
        log::warn!(
            "shrink factor {epsilon:.3e} is below {SMALL_EPSILON}; expect very large tables"
        );
    }
    Ok(params)
}

/// `(1 - r/pi, 1 - cr/pi)`: collision probabilities of repeat-SLSH with `p = 1`
/// over hyperplanes at average angular distance `r` and `cr`.
pub fn average_angular_probabilities(r: f64, c: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) || !(c > 1.0) {
        return Err(Error::param("r/c", "need r > 0 and c > 1"));
    }
    if c * r >= PI {
        return Err(Error::param(
            "c",
            format!("cr = {} must stay below pi", c * r),
        ));
    }
    Ok((1.0 - r / PI, 1.0 - c * r / PI))
}

pub(crate) fn average_angular_objective() -> S2p {
    S2p::Distance {
        kernel: DistanceKind::Angular,
        aggregation: DistanceAggregation::Average,
    }
}

pub(crate) fn reject_zero(points: &[Point]) -> Result<()> {
    match points.iter().position(|x| x.norm() == 0.0) {
        Some(i) => Err(Error::at_point(i, Error::ZeroVector)),
        None => Ok(()),
    }
}

pub(crate) fn angular_family(dim: usize) -> Result<RepeatSlsh<Hyperplane>> {
    RepeatSlsh::new(Hyperplane::new(dim)?, 1)
}

/// `(r, cr)` structure for average angular distance.
pub struct AverageAngularIndex {
    inner: VerifiedIndex<RepeatSlsh<Hyperplane>, S2p>,
}

impl AverageAngularIndex {
    pub fn build(
        points: Vec<Point>,
        dim: usize,
        r: f64,
        c: f64,
        delta: f64,
        seed: u64,
        config: IndexConfig,
    ) -> Result<Self> {
        let (p1, p2) = average_angular_probabilities(r, c)?;
        let params = IndexParams::plan(
            ThresholdMode::Distance,
            r,
            c,
            p1,
            p2,
            points.len(),
            delta,
            seed,
        )?;
        Self::from_params(points, dim, params, config)
    }

    pub fn from_params(
        points: Vec<Point>,
        dim: usize,
        params: IndexParams,
        config: IndexConfig,
    ) -> Result<Self> {
        reject_zero(&points)?;
        let index = SlshIndex::build(angular_family(dim)?, points, params, config)?;
        Ok(AverageAngularIndex {
            inner: VerifiedIndex::new(index, average_angular_objective()),
        })
    }

    pub(crate) fn from_index(index: SlshIndex<RepeatSlsh<Hyperplane>>) -> Self {
        AverageAngularIndex {
            inner: VerifiedIndex::new(index, average_angular_objective()),
        }
    }

    pub fn index(&self) -> &SlshIndex<RepeatSlsh<Hyperplane>> {
        self.inner.index()
    }

    pub fn params(&self) -> &IndexParams {
        self.inner.index().params()
    }

    pub fn query(&self, q: &SetQuery<Point>) -> Result<QueryOutcome> {
        self.inner.query(q)
    }
}

/// `(r, cr)` structure for average euclidean distance on the unit ball.
///
/// Data and queries are shrink-lifted; an average angular index with the
/// derived `(r', c'r')` thresholds answers, and candidates are verified
/// against the average euclidean distance of the original points.
pub struct ShrinkLiftIndex {
    lift: LiftParams,
    derived: AvgEuclidParams,
    r: f64,
    c: f64,
    originals: Vec<Point>,
    index: SlshIndex<RepeatSlsh<Hyperplane>>,
}

impl ShrinkLiftIndex {
    pub fn build(
        points: Vec<Point>,
        dim: usize,
        r: f64,
        c: f64,
        delta: f64,
        seed: u64,
        config: IndexConfig,
    ) -> Result<Self> {
        let derived = avg_euclid_slsh_params(r, c)?;
        let (p1, p2) = average_angular_probabilities(derived.r_prime, derived.c_prime)?;
        let params = IndexParams::plan(
            ThresholdMode::Distance,
            derived.r_prime,
            derived.c_prime,
            p1,
            p2,
            points.len(),
            delta,
            seed,
        )?;
        Self::from_params(points, dim, r, c, params, config)
    }

    pub fn from_params(
        points: Vec<Point>,
        dim: usize,
        r: f64,
        c: f64,
        params: IndexParams,
        config: IndexConfig,
    ) -> Result<Self> {
        let derived = avg_euclid_slsh_params(r, c)?;
        let lift = LiftParams::new(derived.epsilon, dim)?;
        let lifted = lift.lift_all(&points)?;
        let index = SlshIndex::build(angular_family(dim + 1)?, lifted, params, config)?;
        Ok(ShrinkLiftIndex {
            lift,
            derived,
            r,
            c,
            originals: points,
            index,
        })
    }

    pub(crate) fn from_index(
        points: Vec<Point>,
        r: f64,
        c: f64,
        index: SlshIndex<RepeatSlsh<Hyperplane>>,
    ) -> Result<Self> {
        let derived = avg_euclid_slsh_params(r, c)?;
        let dim = index.family().base().dim() - 1;
        Ok(ShrinkLiftIndex {
            lift: LiftParams::new(derived.epsilon, dim)?,
            derived,
            r,
            c,
            originals: points,
            index,
        })
    }

    pub fn derived(&self) -> &AvgEuclidParams {
        &self.derived
    }

    pub fn lift_params(&self) -> &LiftParams {
        &self.lift
    }

    pub fn index(&self) -> &SlshIndex<RepeatSlsh<Hyperplane>> {
        &self.index
    }

    pub fn points(&self) -> &[Point] {
        &self.originals
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn query(&self, q: &SetQuery<Point>) -> Result<QueryOutcome> {
        let lifted = SetQuery::new(self.lift.lift_all(q.points())?)?;
        let objective = S2p::Distance {
            kernel: DistanceKind::Euclidean,
            aggregation: DistanceAggregation::Average,
        };
        let (hit, stats) = self.index.query_with(
            &lifted,
            Strategy::First,
            Direction::Minimize,
            self.c * self.r,
            |id, _| objective.evaluate(q, &self.originals[id]),
        )?;
        Ok(QueryOutcome { hit, stats })
    }
}

/// Angle between lifted points predicted from the euclidean geometry:
/// `2 asin((eps/2) sqrt(|x - y|^2 + e(eps, x, y)))`.
pub fn lifted_angle_formula(eps: f64, x: &Point, y: &Point) -> Result<f64> {
    let e = error_term(eps, x, y)?;
    let arg = 0.5 * eps * (dist_sq(x.coords(), y.coords()) + e).sqrt();
    Ok(2.0 * arg.min(1.0).asin())
}

//! Center euclidean distance for set-queries of size two.
//!
//! For `Q = {q1, q2}` with half-separation `a`, the points within distance `r`
//! of both lie in an ellipsoid centered at the midpoint, elongated across the
//! `q1 - q2` direction with axis weight `(r + a)/(r - a)`. One ellipsoid
//! structure is built per quantized half-separation `i * delta`; a query is
//! rounded up to the next grid value and answered by that structure.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipsoid::{EllipsoidIndex, EllipsoidPlan, EuclideanEllipsoidQuery};
use crate::error::{Error, Result};
use crate::index::{IndexConfig, IndexParams, QueryOutcome, QueryStats};
use crate::metrics::{dist_sq, dot, Point, Rational, SetQuery};
use crate::slsh::DEFAULT_MULTIPLICITY_CAP;

/// `3 / (2 sqrt 2)`; the approximation factor must exceed it.
pub const C_MIN: f64 = 3.0 / (2.0 * SQRT_2);

/// Queries whose rounded half-separation comes this close to `r` are rejected.
pub const SEPARATION_MARGIN: f64 = 1e-9;

/// Default bound on the number of quantized structures.
pub const DEFAULT_STRUCTURE_CAP: u64 = 4096;

const DECIMAL_GRID: u64 = 1_000_000;

/// `max(|x - q1|, |x - q2|)`.
pub fn center_distance(q: &SetQuery<Point>, x: &Point) -> Result<f64> {
    if q.len() != 2 {
        return Err(Error::ArityMismatch {
            expected: 2,
            got: q.len(),
        });
    }
    let mut worst: f64 = 0.0;
    for qi in q.points() {
        if qi.dim() != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: qi.dim(),
                got: x.dim(),
            });
        }
        worst = worst.max(dist_sq(qi.coords(), x.coords()));
    }
    Ok(worst.sqrt())
}

fn check_center_inputs(r: Rational, c: f64, phi: f64) -> Result<()> {
    if r.is_zero() {
        return Err(Error::param("r", "must be positive"));
    }
    if !(c > C_MIN && c.is_finite()) {
        return Err(Error::param(
            "c",
            format!("must exceed c_min = 3/(2 sqrt 2) ~ {C_MIN:.5}, got {c}"),
        ));
    }
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::param(
            "phi",
            format!("must lie in (0, 1), got {phi}"),
        ));
    }
    Ok(())
}

/// Real-valued step `min(1/2, 1 - sqrt(c_min/c)) * phi * r`.
pub fn raw_delta(r: Rational, c: f64, phi: f64) -> Result<f64> {
    check_center_inputs(r, c, phi)?;
    Ok(0.5f64.min(1.0 - (C_MIN / c).sqrt()) * phi * r.to_f64())
}

/// Largest multiple of `10^-6` strictly below the real step.
pub fn quantization_delta(r: Rational, c: f64, phi: f64) -> Result<Rational> {
    let delta = raw_delta(r, c, phi)?;
    let scaled = delta * DECIMAL_GRID as f64;
    let mut units = scaled.floor();
    if units == scaled {
        units -= 1.0;
    }
    if units < 1.0 {
        return Err(Error::param(
            "phi",
            format!("quantization step {delta:.3e} is below the 1e-6 grid; inputs too extreme"),
        ));
    }
    Rational::new(units as u64, DECIMAL_GRID)
}

/// `r / N` with `N = floor(r / delta) + 1`, the coarsest step of this form
/// strictly below the real step. Weights `(N + i)/(N - i)` keep denominators
/// at most `N`.
pub fn aligned_delta(r: Rational, c: f64, phi: f64) -> Result<Rational> {
    let delta = raw_delta(r, c, phi)?;
    let n = (r.to_f64() / delta).floor() + 1.0;
    if !(n < 1e15) {
        return Err(Error::Overflow("quantization step"));
    }
    r.checked_div(&Rational::integer(n as u64))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// `r / N`; see [`aligned_delta`].
    #[default]
    Aligned,
    /// `10^-6` grid; see [`quantization_delta`].
    Decimal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterParams {
    pub r: Rational,
    pub c: f64,
    pub phi: f64,
    pub delta: Rational,
}

impl CenterParams {
    pub fn new(r: Rational, c: f64, phi: f64, rule: DeltaRule) -> Result<Self> {
        let delta = match rule {
            DeltaRule::Aligned => aligned_delta(r, c, phi)?,
            DeltaRule::Decimal => quantization_delta(r, c, phi)?,
        };
        Self::with_delta(r, c, phi, delta)
    }

    pub fn with_delta(r: Rational, c: f64, phi: f64, delta: Rational) -> Result<Self> {
        let bound = raw_delta(r, c, phi)?;
        if delta.is_zero() || delta.to_f64() > bound {
            return Err(Error::param(
                "delta",
                format!("must lie in (0, {bound}], got {delta}"),
            ));
        }
        Ok(CenterParams { r, c, phi, delta })
    }

    /// Highest level index `ceil((1 - phi) r / delta)`.
    pub fn max_level(&self) -> usize {
        let v = (1.0 - self.phi) * self.r.to_f64() / self.delta.to_f64();
        (v - 1e-9).ceil().max(0.0) as usize
    }

    pub fn structure_count(&self) -> usize {
        self.max_level() + 1
    }

    /// `i * delta`.
    pub fn separation(&self, i: usize) -> Result<Rational> {
        self.delta.checked_mul(&Rational::integer(i as u64))
    }

    /// `(r + a)/(r - a)` for `a = i * delta`.
    pub fn level_weight(&self, i: usize) -> Result<Rational> {
        let a = self.separation(i)?;
        let num = self.r.checked_add(&a)?;
        let den = self.r.checked_sub(&a)?;
        if den.is_zero() {
            return Err(Error::param("delta", "level separation reaches r"));
        }
        num.checked_div(&den)
    }

    /// `(c / c_min) (r^2 - (i delta)^2)`.
    pub fn level_threshold(&self, i: usize) -> Result<f64> {
        let a = self.separation(i)?;
        let r2 = self.r.checked_mul(&self.r)?;
        let a2 = a.checked_mul(&a)?;
        Ok(self.c / C_MIN * r2.checked_sub(&a2)?.to_f64())
    }

    pub fn level_approximation(&self) -> f64 {
        self.c / C_MIN
    }
}

/// Isometry sending `q1 -> (a, 0, ..., 0)` and `q2 -> (-a, 0, ..., 0)`.
///
/// Translation of the midpoint to the origin followed by a Householder
/// reflection taking the unit direction of `q1 - q2` to `e_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidTransform {
    midpoint: Vec<f64>,
    /// Householder vector, `None` when the reflection is the identity.
    v: Option<Vec<f64>>,
    a: f64,
}

impl RigidTransform {
    pub fn half_separation(&self) -> f64 {
        self.a
    }

    pub fn midpoint(&self) -> Point {
        Point::new(self.midpoint.clone()).expect("midpoint is finite")
    }

    fn reflect(&self, y: &mut [f64]) {
        if let Some(v) = &self.v {
            let s = 2.0 * dot(v, y);
            for (yi, vi) in y.iter_mut().zip(v) {
                *yi -= s * vi;
            }
        }
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        let mut y: Vec<f64> = x.sub(&self.midpoint())?.into_coords();
        self.reflect(&mut y);
        Point::new(y)
    }

    pub fn inverse(&self, y: &Point) -> Result<Point> {
        if y.dim() != self.midpoint.len() {
            return Err(Error::DimensionMismatch {
                expected: self.midpoint.len(),
                got: y.dim(),
            });
        }
        let mut x = y.coords().to_vec();
        self.reflect(&mut x);
        for (xi, m) in x.iter_mut().zip(&self.midpoint) {
            *xi += m;
        }
        Point::new(x)
    }

    /// Images of the standard basis under the orthogonal part of the inverse.
    pub fn canonical_axes(&self) -> Vec<Point> {
        let d = self.midpoint.len();
        (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                self.reflect(&mut e);
                Point::new(e).expect("finite axis")
            })
            .collect()
    }
}

pub fn rigid_transform_to_canonical(q1: &Point, q2: &Point) -> Result<RigidTransform> {
    let diff = q1.sub(q2)?;
    let midpoint: Vec<f64> = q1.add(q2)?.scale(0.5).into_coords();
    let len = diff.norm();
    let a = 0.5 * len;
    if len == 0.0 {
        return Ok(RigidTransform {
            midpoint,
            v: None,
            a,
        });
    }
    let mut v: Vec<f64> = diff.coords().iter().map(|c| c / len).collect();
    v[0] -= 1.0;
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let v = if vn < 1e-15 {
        None
    } else {
        Some(v.into_iter().map(|x| x / vn).collect())
    };
    Ok(RigidTransform { midpoint, v, a })
}

/// Regions around the canonical query `{(a, 0..), (-a, 0..)}`, as membership
/// tests on `(x_1, y^2)` where `y^2` is the squared norm of the other coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CanonicalRegions {
    pub a: f64,
    pub r: f64,
    pub c: f64,
}

impl CanonicalRegions {
    fn weight(&self, a: f64) -> f64 {
        (self.r + a) / (self.r - a)
    }

    /// Lens of the two radius-`r` balls.
    pub fn small_lens(&self, x: f64, y2: f64, tol: f64) -> bool {
        y2 <= self.r * self.r - (x.abs() + self.a).powi(2) + tol
    }

    /// Ellipsoid `S`.
    pub fn small_ellipsoid(&self, x: f64, y2: f64, tol: f64) -> bool {
        y2 <= self.r * self.r - self.a * self.a - self.weight(self.a) * x * x + tol
    }

    /// Ellipsoid `B`.
    pub fn big_ellipsoid(&self, x: f64, y2: f64, tol: f64) -> bool {
        let big = (self.c * self.r / C_MIN).powi(2);
        y2 <= big - self.a * self.a - self.weight(self.a) * x * x + tol
    }

    /// Lens of the two radius-`cr` balls.
    pub fn big_lens(&self, x: f64, y2: f64, tol: f64) -> bool {
        y2 <= (self.c * self.r).powi(2) - (x.abs() + self.a).powi(2) + tol
    }

    /// `S+` for the rounded separation `a_up`.
    pub fn small_rounded(&self, a_up: f64, x: f64, y2: f64, tol: f64) -> bool {
        let rhs = self.c / C_MIN * (self.r * self.r - a_up * a_up);
        self.weight(a_up) * x * x + y2 <= rhs + tol
    }

    /// `B-` for the rounded separation `a_up`.
    pub fn big_rounded(&self, a_up: f64, x: f64, y2: f64, tol: f64) -> bool {
        let rhs = (self.c / C_MIN).powi(2) * (self.r * self.r - a_up * a_up);
        self.weight(a_up) * x * x + y2 <= rhs + tol
    }
}

/// Diagnostics of one quantized level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelInfo {
    pub level: usize,
    pub separation: Rational,
    pub weight: Rational,
    pub threshold: f64,
    pub k_prime: usize,
    pub p1: f64,
    pub tables: usize,
    pub built: bool,
}

pub(crate) enum LevelState {
    Built(Box<EllipsoidIndex>),
    OverBudget { needed: u64, cap: u64 },
}

pub(crate) struct Level {
    pub(crate) info: LevelInfo,
    pub(crate) state: LevelState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CenterConfig {
    pub index: IndexConfig,
    pub max_structures: u64,
    pub multiplicity_cap: u64,
    /// Fail the build when any level exceeds the table budget.
    pub strict: bool,
}

impl Default for CenterConfig {
    fn default() -> Self {
        CenterConfig {
            index: IndexConfig::default(),
            max_structures: DEFAULT_STRUCTURE_CAP,
            multiplicity_cap: DEFAULT_MULTIPLICITY_CAP,
            strict: false,
        }
    }
}

/// `(r, cr)` structure for center euclidean distance with `|Q| = 2`.
pub struct CenterStructure {
    params: CenterParams,
    dim: usize,
    points: Vec<Point>,
    levels: Vec<Level>,
    delta_fail: f64,
    seed: u64,
}

impl CenterStructure {
    pub fn build(
        points: Vec<Point>,
        dim: usize,
        params: CenterParams,
        delta_fail: f64,
        seed: u64,
        config: CenterConfig,
    ) -> Result<Self> {
        for (i, x) in points.iter().enumerate() {
            if x.dim() != dim {
                return Err(Error::at_point(
                    i,
                    Error::DimensionMismatch {
                        expected: dim,
                        got: x.dim(),
                    },
                ));
            }
            x.check_unit_ball().map_err(|e| Error::at_point(i, e))?;
        }
        let count = params.structure_count() as u64;
        if count > config.max_structures {
            return Err(Error::StructureCap {
                count,
                cap: config.max_structures,
            });
        }
        let levels = (0..params.structure_count())
            .into_par_iter()
            .map(|i| build_level(&params, dim, &points, i, delta_fail, seed, &config))
            .collect::<Result<Vec<_>>>()?;
        if config.strict {
            if let Some(l) = levels.iter().find(|l| !l.info.built) {
                return Err(Error::TableBudget {
                    needed: l.info.tables as u64,
                    cap: config.index.max_tables,
                });
            }
        }
        for l in levels.iter().filter(|l| !l.info.built) {
            log::warn!(
                "level {} needs {} tables (k' = {}); it is not materialized",
                l.info.level,
                l.info.tables,
                l.info.k_prime
            );
        }
        Ok(CenterStructure {
            params,
            dim,
            points,
            levels,
            delta_fail,
            seed,
        })
    }

    pub(crate) fn from_levels(
        params: CenterParams,
        dim: usize,
        points: Vec<Point>,
        levels: Vec<Level>,
        delta_fail: f64,
        seed: u64,
    ) -> Self {
        CenterStructure {
            params,
            dim,
            points,
            levels,
            delta_fail,
            seed,
        }
    }

    pub fn params(&self) -> &CenterParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn delta_fail(&self) -> f64 {
        self.delta_fail
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn levels(&self) -> Vec<LevelInfo> {
        self.levels.iter().map(|l| l.info.clone()).collect()
    }

    pub(crate) fn level_states(&self) -> &[Level] {
        &self.levels
    }

    /// Level used for half-separation `a`, or `None` when `a >= (1 - phi) r`.
    pub fn level_for(&self, a: f64) -> Option<usize> {
        if a >= (1.0 - self.params.phi) * self.params.r.to_f64() {
            return None;
        }
        Some((a / self.params.delta.to_f64()).ceil() as usize)
    }

    pub fn query(&self, q: &SetQuery<Point>) -> Result<QueryOutcome> {
        if q.len() != 2 {
            return Err(Error::ArityMismatch {
                expected: 2,
                got: q.len(),
            });
        }
        let (q1, q2) = (&q.points()[0], &q.points()[1]);
        for qi in [q1, q2] {
            if qi.dim() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: qi.dim(),
                });
            }
            qi.check_unit_ball()?;
        }
        let transform = rigid_transform_to_canonical(q1, q2)?;
        let a = transform.half_separation();
        let none = QueryOutcome {
            hit: None,
            stats: QueryStats::default(),
        };
        let Some(i) = self.level_for(a) else {
            return Ok(none);
        };
        let a_up = self.params.separation(i)?.to_f64();
        let r = self.params.r.to_f64();
        if a_up >= r - SEPARATION_MARGIN || a_up < a - 1e-12 {
            return Err(Error::QueryRejected(format!(
                "rounded half-separation {a_up} is not in [a, r) for a = {a}, r = {r}"
            )));
        }
        let level = self
            .levels
            .get(i)
            .ok_or_else(|| Error::Invariant(format!("level {i} out of range")))?;
        let index = match &level.state {
            LevelState::Built(index) => index,
            LevelState::OverBudget { needed, cap } => {
                return Err(Error::TableBudget {
                    needed: *needed,
                    cap: *cap,
                })
            }
        };
        let eq = EuclideanEllipsoidQuery::new(transform.midpoint(), transform.canonical_axes())?;
        index.query_with_bar(&eq, self.params.c * r, |x| center_distance(q, x))
    }
}

fn build_level(
    params: &CenterParams,
    dim: usize,
    points: &[Point],
    i: usize,
    delta_fail: f64,
    seed: u64,
    config: &CenterConfig,
) -> Result<Level> {
    let planned = plan_level(params, dim, points.len(), i, delta_fail, seed, config)?;
    let state = if planned.info.built {
        LevelState::Built(Box::new(EllipsoidIndex::from_plan(
            planned.plan,
            points.to_vec(),
            delta_fail,
            planned.seed,
            config.index,
        )?))
    } else {
        LevelState::OverBudget {
            needed: planned.info.tables as u64,
            cap: config.index.max_tables,
        }
    };
    Ok(Level {
        info: planned.info,
        state,
    })
}

/// Level `i` planned but not materialized.
pub(crate) struct PlannedLevel {
    pub(crate) info: LevelInfo,
    pub(crate) plan: EllipsoidPlan,
    pub(crate) params: IndexParams,
    pub(crate) seed: u64,
}

pub(crate) fn plan_level(
    params: &CenterParams,
    dim: usize,
    n: usize,
    i: usize,
    delta_fail: f64,
    seed: u64,
    config: &CenterConfig,
) -> Result<PlannedLevel> {
    let weight = params.level_weight(i)?;
    let mut weights = vec![Rational::one(); dim];
    weights[0] = weight;
    let threshold = params.level_threshold(i)?;
    let plan = EllipsoidPlan::new(
        dim,
        threshold,
        params.level_approximation(),
        weights,
        config.multiplicity_cap,
    )
    .map_err(|e| match e {
        Error::MultiplicityCap { .. } => Error::param(
            "phi",
            format!("level {i}: {e}; use a larger phi or a smaller weight grid"),
        ),
        other => other,
    })?;
    let level_seed = crate::rng::derive(seed, i as u64);
    let params_i: IndexParams = plan.index_params(n, delta_fail, level_seed)?;
    let info = LevelInfo {
        level: i,
        separation: params.separation(i)?,
        weight,
        threshold,
        k_prime: plan.expansion.k_prime,
        p1: plan.p1,
        tables: params_i.l,
        built: params_i.l as u64 <= config.index.max_tables,
    };
    Ok(PlannedLevel {
        info,
        plan,
        params: params_i,
        seed: level_seed,
    })
}

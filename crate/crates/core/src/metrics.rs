//! Point types, point-to-point kernels and set-to-point aggregations.
//!
//! Similarities follow the conventions used throughout the crate: angular
//! similarity is `1 - angle/pi`, the `lp` aggregation is the mean of the
//! `p`-th powers (no outer root) and the center similarity is the minimum.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on the unit-ball constraint `||x|| <= 1`.
pub const UNIT_BALL_TOLERANCE: f64 = 1e-9;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `sqrt` that treats tiny negative drift as zero.
pub(crate) fn sqrt_clamped(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        v.sqrt()
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Dense real vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("point coordinates"));
        }
        if let Some(bad) = coords.iter().find(|v| !v.is_finite()) {
            return Err(Error::param("coords", format!("non-finite value {bad}")));
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim.max(1)])
    }

    /// The `i`-th standard basis vector of `R^dim`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Point(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.0).sqrt()
    }

    pub fn dot(&self, other: &Point) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn sub(&self, other: &Point) -> Result<Point> {
        check_dims(self.dim(), other.dim())?;
        Ok(Point(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &Point) -> Result<Point> {
        check_dims(self.dim(), other.dim())?;
        Ok(Point(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|v| v * s).collect())
    }

    pub fn neg(&self) -> Point {
        self.scale(-1.0)
    }

    /// Rejects points outside the closed unit ball (with [`UNIT_BALL_TOLERANCE`]).
    pub fn check_unit_ball(&self) -> Result<()> {
        let norm = self.norm();
        if norm > 1.0 + UNIT_BALL_TOLERANCE {
            Err(Error::OutsideUnitBall { norm })
        } else {
            Ok(())
        }
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// Fixed-length bit string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BitVector(Vec<bool>);

impl BitVector {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::Empty("bit vector"));
        }
        Ok(BitVector(bits))
    }

    /// Parses strings such as `"1010"`.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::param(
                    "bits",
                    format!("unexpected character {other:?}"),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        BitVector::new(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

/// Finite set of integer tokens drawn from `[0, universe)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSet {
    tokens: BTreeSet<u64>,
    universe: u64,
}

impl TokenSet {
    pub fn new(tokens: impl IntoIterator<Item = u64>, universe: u64) -> Result<Self> {
        if universe == 0 {
            return Err(Error::param("universe", "must be at least 1"));
        }
        let tokens: BTreeSet<u64> = tokens.into_iter().collect();
        if let Some(&t) = tokens.iter().find(|&&t| t >= universe) {
            return Err(Error::param(
                "tokens",
                format!("token {t} outside universe [0, {universe})"),
            ));
        }
        Ok(TokenSet { tokens, universe })
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.tokens.iter().copied()
    }

    pub fn jaccard(&self, other: &TokenSet) -> f64 {
        let inter = self.tokens.intersection(&other.tokens).count();
        let union = self.tokens.len() + other.tokens.len() - inter;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Non-negative rational number kept in lowest terms.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rational(Ratio<u64>);

impl Rational {
    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::param("denominator", "must be positive"));
        }
        Ok(Rational(Ratio::new(numer, denom)))
    }

    pub fn integer(n: u64) -> Self {
        Rational(Ratio::from_integer(n))
    }

    pub fn one() -> Self {
        Self::integer(1)
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.numer() == 0
    }

    fn from_u128(n: u128, d: u128, what: &'static str) -> Result<Self> {
        let g = n.gcd(&d).max(1);
        let (n, d) = (n / g, d / g);
        let n = u64::try_from(n).map_err(|_| Error::Overflow(what))?;
        let d = u64::try_from(d).map_err(|_| Error::Overflow(what))?;
        Rational::new(n, d)
    }

    pub fn checked_add(&self, o: &Rational) -> Result<Rational> {
        let (a, b, c, d) = self.parts128(o);
        Self::from_u128(a * d + c * b, b * d, "addition")
    }

    /// `self - o`; fails when the result would be negative.
    pub fn checked_sub(&self, o: &Rational) -> Result<Rational> {
        let (a, b, c, d) = self.parts128(o);
        let (lhs, rhs) = (a * d, c * b);
        if rhs > lhs {
            return Err(Error::Overflow("subtraction below zero"));
        }
        Self::from_u128(lhs - rhs, b * d, "subtraction")
    }

    pub fn checked_mul(&self, o: &Rational) -> Result<Rational> {
        let (a, b, c, d) = self.parts128(o);
        Self::from_u128(a * c, b * d, "multiplication")
    }

    pub fn checked_div(&self, o: &Rational) -> Result<Rational> {
        if o.is_zero() {
            return Err(Error::param("divisor", "division by zero"));
        }
        let (a, b, c, d) = self.parts128(o);
        Self::from_u128(a * d, b * c, "division")
    }

    fn parts128(&self, o: &Rational) -> (u128, u128, u128, u128) {
        (
            self.numer() as u128,
            self.denom() as u128,
            o.numer() as u128,
            o.denom() as u128,
        )
    }

    /// Exact value of a decimal literal such as `"0.35"` or `"12"`.
    pub fn from_decimal(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::param("rational", format!("cannot parse {s:?}"));
        let (int, frac) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if (int.is_empty() && frac.is_empty())
            || !int.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || frac.len() > 18
        {
            return Err(bad());
        }
        let scale = 10u128.pow(frac.len() as u32);
        let int_v: u128 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac_v: u128 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let numer = int_v
            .checked_mul(scale)
            .and_then(|v| v.checked_add(frac_v))
            .ok_or(Error::Overflow("decimal literal"))?;
        Self::from_u128(numer, scale, "decimal literal")
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

/// Accepts `a/b`, integers and decimal literals.
impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().split_once('/') {
            Some((a, b)) => {
                let bad = || Error::param("rational", format!("cannot parse {s:?}"));
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                Rational::new(a, b)
            }
            None => Rational::from_decimal(s),
        }
    }
}

impl Serialize for Rational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", self.numer(), self.denom()))
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Point-to-point similarity kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    Angular,
    InnerProduct,
    Hamming,
    Jaccard,
}

/// Point-to-point distance kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Angular,
    Euclidean,
}

/// Anything that can be stored in an index: dense points, bit vectors, token sets.
pub trait Element: Clone + Send + Sync + fmt::Debug {
    /// Dimension for vectors, universe size for token sets.
    fn domain(&self) -> u64;

    fn similarity(&self, kind: SimilarityKind, other: &Self) -> Result<f64>;

    fn distance(&self, kind: DistanceKind, other: &Self) -> Result<f64> {
        let _ = (kind, other);
        Err(Error::KindMismatch("distance kernels need dense points"))
    }
}

impl Element for Point {
    fn domain(&self) -> u64 {
        self.dim() as u64
    }

    fn similarity(&self, kind: SimilarityKind, other: &Self) -> Result<f64> {
        match kind {
            SimilarityKind::Angular => angular_similarity(self, other),
            SimilarityKind::InnerProduct => inner_product_similarity(self, other),
            _ => Err(Error::KindMismatch(
                "dense points support angular and inner product",
            )),
        }
    }

    fn distance(&self, kind: DistanceKind, other: &Self) -> Result<f64> {
        p2p_distance(kind, self, other)
    }
}

impl Element for BitVector {
    fn domain(&self) -> u64 {
        self.len() as u64
    }

    fn similarity(&self, kind: SimilarityKind, other: &Self) -> Result<f64> {
        match kind {
            SimilarityKind::Hamming => hamming_similarity(self, other),
            _ => Err(Error::KindMismatch(
                "bit vectors support hamming similarity only",
            )),
        }
    }
}

impl Element for TokenSet {
    fn domain(&self) -> u64 {
        self.universe
    }

    fn similarity(&self, kind: SimilarityKind, other: &Self) -> Result<f64> {
        match kind {
            SimilarityKind::Jaccard => Ok(self.jaccard(other)),
            _ => Err(Error::KindMismatch(
                "token sets support jaccard similarity only",
            )),
        }
    }
}

/// Angle between two nonzero vectors in `[0, pi]`.
pub fn angle(x: &Point, y: &Point) -> Result<f64> {
    check_dims(x.dim(), y.dim())?;
    let (nx, ny) = (x.norm(), y.norm());
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(angle_raw(x.coords(), y.coords(), nx, ny))
}

/// `2 atan2(|u - v|, |u + v|)` on the normalized vectors.
///
/// Equal to the clamped `acos` of the cosine, but keeps full relative
/// precision near 0 and `pi` where `acos` loses about half the digits.
pub(crate) fn angle_raw(x: &[f64], y: &[f64], nx: f64, ny: f64) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (u, v) = (a / nx, b / ny);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    let theta = 2.0 * diff.sqrt().atan2(sum.sqrt());
    theta.clamp(0.0, PI)
}

/// Clamped `acos` of a cosine value.
pub fn acos_clamped(cos: f64) -> f64 {
    cos.clamp(-1.0, 1.0).acos()
}

pub fn angular_similarity(x: &Point, y: &Point) -> Result<f64> {
    Ok(1.0 - angle(x, y)? / PI)
}

/// `x^T y` for points of the unit ball.
pub fn inner_product_similarity(x: &Point, y: &Point) -> Result<f64> {
    x.check_unit_ball()?;
    y.check_unit_ball()?;
    x.dot(y)
}

pub fn hamming_similarity(x: &BitVector, y: &BitVector) -> Result<f64> {
    check_dims(x.len(), y.len())?;
    let agree = x.0.iter().zip(&y.0).filter(|(a, b)| a == b).count();
    Ok(agree as f64 / x.len() as f64)
}

pub fn jaccard_similarity(x: &TokenSet, y: &TokenSet) -> f64 {
    x.jaccard(y)
}

pub fn p2p_similarity<T: Element>(kind: SimilarityKind, x: &T, y: &T) -> Result<f64> {
    x.similarity(kind, y)
}

pub fn p2p_distance(kind: DistanceKind, x: &Point, y: &Point) -> Result<f64> {
    match kind {
        DistanceKind::Angular => angle(x, y),
        DistanceKind::Euclidean => {
            check_dims(x.dim(), y.dim())?;
            Ok(dist_sq(x.coords(), y.coords()).sqrt())
        }
    }
}

/// Aggregation of per-point similarities into a set-to-point similarity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityAggregation {
    /// Mean of `s^p`.
    Lp(u32),
    Geometric,
    WeightedGeometric,
    /// Minimum (least misery).
    Center,
    Average,
}

/// Aggregation of per-point distances into a set-to-point distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceAggregation {
    /// Mean of `d^p`.
    Lp(u32),
    Geometric,
    /// Maximum.
    Center,
    Average,
}

fn check_values(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Empty("aggregation values"));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::param("values", format!("negative or NaN value {v}")));
    }
    Ok(())
}

fn lp_mean(values: &[f64], p: u32) -> Result<f64> {
    if p == 0 {
        return Err(Error::param("p", "lp exponent must be a positive integer"));
    }
    let exp = i32::try_from(p).map_err(|_| Error::param("p", "exponent too large"))?;
    Ok(values.iter().map(|v| v.powi(exp)).sum::<f64>() / values.len() as f64)
}

pub fn aggregate_similarity(
    mode: SimilarityAggregation,
    values: &[f64],
    weights: Option<&[Rational]>,
) -> Result<f64> {
    check_values(values)?;
    match mode {
        SimilarityAggregation::Lp(p) => lp_mean(values, p),
        SimilarityAggregation::Average => lp_mean(values, 1),
        SimilarityAggregation::Geometric => Ok(values.iter().product()),
        SimilarityAggregation::Center => Ok(values.iter().copied().fold(f64::INFINITY, f64::min)),
        SimilarityAggregation::WeightedGeometric => {
            let weights = weights.ok_or(Error::param(
                "weights",
                "weighted geometric aggregation needs weights",
            ))?;
            check_dims(values.len(), weights.len())?;
            Ok(values
                .iter()
                .zip(weights)
                .map(|(v, w)| if w.is_zero() { 1.0 } else { v.powf(w.to_f64()) })
                .product())
        }
    }
}

pub fn aggregate_distance(mode: DistanceAggregation, values: &[f64]) -> Result<f64> {
    check_values(values)?;
    match mode {
        DistanceAggregation::Lp(p) => lp_mean(values, p),
        DistanceAggregation::Average => lp_mean(values, 1),
        DistanceAggregation::Geometric => Ok(values.iter().product()),
        DistanceAggregation::Center => Ok(values.iter().copied().fold(0.0, f64::max)),
    }
}

/// Ordered set-query with optional per-point rational weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetQuery<T = Point> {
    points: Vec<T>,
    weights: Option<Vec<Rational>>,
}

impl<T: Element> SetQuery<T> {
    pub fn new(points: Vec<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("set-query"));
        }
        let domain = points[0].domain();
        for p in &points[1..] {
            if p.domain() != domain {
                return Err(Error::DimensionMismatch {
                    expected: domain as usize,
                    got: p.domain() as usize,
                });
            }
        }
        Ok(SetQuery {
            points,
            weights: None,
        })
    }

    pub fn weighted(points: Vec<T>, weights: Vec<Rational>) -> Result<Self> {
        let q = Self::new(points)?;
        q.with_weights(weights)
    }

    pub fn with_weights(mut self, weights: Vec<Rational>) -> Result<Self> {
        check_dims(self.points.len(), weights.len())?;
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn singleton(point: T) -> Self {
        SetQuery {
            points: vec![point],
            weights: None,
        }
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn weights(&self) -> Option<&[Rational]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn domain(&self) -> u64 {
        self.points[0].domain()
    }

    pub fn similarities(&self, kind: SimilarityKind, x: &T) -> Result<Vec<f64>> {
        self.points.iter().map(|q| q.similarity(kind, x)).collect()
    }

    pub fn distances(&self, kind: DistanceKind, x: &T) -> Result<Vec<f64>> {
        self.points.iter().map(|q| q.distance(kind, x)).collect()
    }
}

/// Whether larger or smaller objective values are better.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }

    /// Whether `score` clears `bar` (at least for similarities, at most for distances).
    pub fn meets(self, score: f64, bar: f64) -> bool {
        match self {
            Direction::Maximize => score >= bar,
            Direction::Minimize => score <= bar,
        }
    }
}

/// A set-to-point objective: kernel plus aggregation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum S2p {
    Similarity {
        kernel: SimilarityKind,
        aggregation: SimilarityAggregation,
    },
    Distance {
        kernel: DistanceKind,
        aggregation: DistanceAggregation,
    },
}

impl S2p {
    pub fn evaluate<T: Element>(&self, q: &SetQuery<T>, x: &T) -> Result<f64> {
        match *self {
            S2p::Similarity {
                kernel,
                aggregation,
            } => {
                let values = q.similarities(kernel, x)?;
                aggregate_similarity(aggregation, &values, q.weights())
            }
            S2p::Distance {
                kernel,
                aggregation,
            } => aggregate_distance(aggregation, &q.distances(kernel, x)?),
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            S2p::Similarity { .. } => Direction::Maximize,
            S2p::Distance { .. } => Direction::Minimize,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn angular_examples() {
        assert!((angular_similarity(&p(&[1., 0.]), &p(&[0., 1.])).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(
            angular_similarity(&p(&[1., 0.]), &p(&[-1., 0.])).unwrap(),
            0.0
        );
        assert!((angle(&p(&[1., 0.]), &p(&[0., 1.])).unwrap() - PI / 2.0).abs() < 1e-15);
        let x = p(&[0.3, -0.2, 0.9]);
        assert_eq!(angle(&x, &x).unwrap(), 0.0);
        assert!(matches!(
            angle(&x, &Point::zeros(3)),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            angle(&x, &p(&[1.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nearly_parallel_vectors_do_not_produce_nan() {
        let x = p(&[1.0, 1e-9]);
        let y = p(&[1.0, 1e-9 * (1.0 + 1e-15)]);
        let s = angular_similarity(&x, &y).unwrap();
        assert!(s.is_finite() && (s - 1.0).abs() < 1e-8);
    }

    #[test]
    fn euclidean_example() {
        let d = p2p_distance(DistanceKind::Euclidean, &p(&[0., 0.]), &p(&[3., 4.])).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn discrete_kernels() {
        let s = TokenSet::new([1, 2, 3], 10).unwrap();
        let t = TokenSet::new([2, 3, 4], 10).unwrap();
        assert_eq!(jaccard_similarity(&s, &t), 0.5);
        let e = TokenSet::new([], 10).unwrap();
        assert_eq!(jaccard_similarity(&e, &e), 1.0);
        let x = BitVector::parse("1010").unwrap();
        let y = BitVector::parse("1000").unwrap();
        assert_eq!(hamming_similarity(&x, &y).unwrap(), 0.75);
        assert!(TokenSet::new([10], 10).is_err());
        assert!(matches!(
            x.similarity(SimilarityKind::Angular, &y),
            Err(Error::KindMismatch(_))
        ));
    }

    #[test]
    fn inner_product_rejects_outside_ball() {
        assert!(inner_product_similarity(&p(&[1.5, 0.]), &p(&[0.5, 0.])).is_err());
        assert_eq!(
            inner_product_similarity(&p(&[0.5, 0.]), &p(&[0.5, 0.])).unwrap(),
            0.25
        );
    }

    #[test]
    fn similarity_aggregations() {
        let lp2 = aggregate_similarity(SimilarityAggregation::Lp(2), &[1., 1., 1.], None).unwrap();
        assert_eq!(lp2, 1.0);
        let g = aggregate_similarity(SimilarityAggregation::Geometric, &[0.5, 0.5], None).unwrap();
        assert_eq!(g, 0.25);
        let w = [Rational::new(1, 2).unwrap()];
        let wg = aggregate_similarity(SimilarityAggregation::WeightedGeometric, &[0.25], Some(&w))
            .unwrap();
        assert!((wg - 0.5).abs() < 1e-15);
        let v = aggregate_similarity(SimilarityAggregation::Lp(2), &[0.2, 0.4, 0.6], None).unwrap();
        assert!((v - 0.56 / 3.0).abs() < 1e-15);
        let zero_w = [Rational::integer(0)];
        let z = aggregate_similarity(
            SimilarityAggregation::WeightedGeometric,
            &[0.0],
            Some(&zero_w),
        )
        .unwrap();
        assert_eq!(z, 1.0);
        assert!(
            aggregate_similarity(SimilarityAggregation::WeightedGeometric, &[0.5], None).is_err()
        );
        assert!(aggregate_similarity(SimilarityAggregation::Average, &[], None).is_err());
        assert!(aggregate_similarity(SimilarityAggregation::Average, &[-0.1], None).is_err());
        assert!(aggregate_similarity(SimilarityAggregation::Lp(0), &[0.1], None).is_err());
    }

    #[test]
    fn distance_aggregations() {
        assert_eq!(
            aggregate_distance(DistanceAggregation::Center, &[1., 3., 2.]).unwrap(),
            3.0
        );
        assert_eq!(
            aggregate_distance(DistanceAggregation::Average, &[1., 3.]).unwrap(),
            2.0
        );
        assert_eq!(
            aggregate_distance(DistanceAggregation::Geometric, &[2., 0.5]).unwrap(),
            1.0
        );
        assert!(aggregate_distance(DistanceAggregation::Center, &[]).is_err());
    }

    #[test]
    fn rational_parsing_and_arithmetic() {
        let r: Rational = "6/4".parse().unwrap();
        assert_eq!((r.numer(), r.denom()), (3, 2));
        let d: Rational = "0.35".parse().unwrap();
        assert_eq!((d.numer(), d.denom()), (7, 20));
        assert!("1/0".parse::<Rational>().is_err());
        assert!("-1/2".parse::<Rational>().is_err());
        assert!("abc".parse::<Rational>().is_err());
        let sum = r.checked_add(&d).unwrap();
        assert_eq!(sum, Rational::new(37, 20).unwrap());
        assert!(d.checked_sub(&r).is_err());
        assert_eq!(r.checked_div(&d).unwrap(), Rational::new(30, 7).unwrap());
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, "\"3/2\"");
        assert_eq!(serde_json::from_str::<Rational>(&json).unwrap(), r);
    }

    #[test]
    fn set_query_checks_dimensions() {
        assert!(SetQuery::new(vec![p(&[1., 0.]), p(&[1., 0., 0.])]).is_err());
        assert!(SetQuery::<Point>::new(vec![]).is_err());
        let q = SetQuery::new(vec![p(&[1., 0.]), p(&[0., 1.])]).unwrap();
        assert!(q.clone().with_weights(vec![Rational::one()]).is_err());
        let obj = S2p::Distance {
            kernel: DistanceKind::Euclidean,
            aggregation: DistanceAggregation::Center,
        };
        assert!((obj.evaluate(&q, &p(&[0., 0.])).unwrap() - 1.0).abs() < 1e-15);
    }
}

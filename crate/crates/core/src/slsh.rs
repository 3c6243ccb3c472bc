//! Set-query hash families built on top of a base family.
//!
//! * [`RepeatSlsh`]: one random query element, `p` base functions. Collides
//!   with probability `(1/k) sum_i s(q_i, x)^p`.
//! * [`ExhaustiveSlsh`]: base function `j` applied to element `j`. Collides
//!   with probability `prod_j s(q_j, x)`.
//! * [`WeightedExhaustiveSlsh`]: exhaustive hashing of the expanded query
//!   `T(Q)`, where element `i` is repeated `m * w_i` times.
//! * [`CentroidSlsh`]: the asymmetric inner-product family on the centroid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{BaseFamily, FamilyDescriptor, HashFamily};
use crate::hashes::SimpleAlsh;
use crate::metrics::{Element, Point, Rational, SetQuery};
use crate::rng::{derive, pick_index};

/// Default bound on the expanded query size `k'`.
pub const DEFAULT_MULTIPLICITY_CAP: u64 = 4096;

const PICK_STREAM: u64 = u64::MAX;

fn check_arity(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::ArityMismatch { expected, got });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct RepeatSlsh<B> {
    base: B,
    p: usize,
    k: Option<usize>,
}

/// One sampled repeat-SLSH function: a query-side pick and `p` base functions.
#[derive(Clone, Debug)]
pub struct RepeatFn<F> {
    pick: u64,
    funcs: Vec<F>,
}

impl<F> RepeatFn<F> {
    /// Index of the query element hashed for a set-query of size `k`.
    pub fn element(&self, k: usize) -> usize {
        pick_index(self.pick, k)
    }
}

impl<B: BaseFamily> RepeatSlsh<B> {
    /// Accepts set-queries of any size; the element is picked per query.
    pub fn new(base: B, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::param("p", "must be at least 1"));
        }
        Ok(RepeatSlsh { base, p, k: None })
    }

    /// Rejects set-queries whose size differs from `k`.
    pub fn with_arity(base: B, k: usize, p: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        let mut f = Self::new(base, p)?;
        f.k = Some(k);
        Ok(f)
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn p(&self) -> usize {
        self.p
    }
}

impl<B: BaseFamily> HashFamily for RepeatSlsh<B> {
    type Query = SetQuery<B::Elem>;
    type Point = B::Elem;
    type Function = RepeatFn<B::Func>;

    fn sample(&self, draw: u64) -> Self::Function {
        RepeatFn {
            pick: derive(draw, PICK_STREAM),
            funcs: (0..self.p as u64)
                .map(|j| self.base.sample(derive(draw, j)))
                .collect(),
        }
    }

    fn width(&self) -> usize {
        self.p
    }

    fn symbol_bits(&self) -> u32 {
        self.base.symbol_bits()
    }

    fn hash_query(&self, f: &Self::Function, q: &Self::Query, out: &mut Vec<u64>) -> Result<()> {
        if let Some(k) = self.k {
            check_arity(k, q.len())?;
        }
        let qi = &q.points()[f.element(q.len())];
        for h in &f.funcs {
            out.push(self.base.query_symbol(h, qi)?);
        }
        Ok(())
    }

    fn hash_point(&self, f: &Self::Function, x: &B::Elem, out: &mut Vec<u64>) -> Result<()> {
        for h in &f.funcs {
            out.push(self.base.point_symbol(h, x)?);
        }
        Ok(())
    }

    fn collision_law(&self, q: &Self::Query, x: &B::Elem) -> Result<f64> {
        let mut total = 0.0;
        for qi in q.points() {
            total += self.base.collision_law(qi, x)?.powi(self.p as i32);
        }
        Ok(total / q.len() as f64)
    }

    fn descriptor(&self) -> FamilyDescriptor {
        FamilyDescriptor::Repeat {
            base: self.base.descriptor(),
            p: self.p,
            k: self.k,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExhaustiveSlsh<B> {
    base: B,
    k: usize,
}

impl<B: BaseFamily> ExhaustiveSlsh<B> {
    pub fn new(base: B, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        Ok(ExhaustiveSlsh { base, k })
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn sample_funcs(&self, draw: u64) -> Vec<B::Func> {
        (0..self.k as u64)
            .map(|j| self.base.sample(derive(draw, j)))
            .collect()
    }

    fn hash_points(&self, f: &[B::Func], x: &B::Elem, out: &mut Vec<u64>) -> Result<()> {
        for h in f {
            out.push(self.base.point_symbol(h, x)?);
        }
        Ok(())
    }
}

impl<B: BaseFamily> HashFamily for ExhaustiveSlsh<B> {
    type Query = SetQuery<B::Elem>;
    type Point = B::Elem;
    type Function = Vec<B::Func>;

    fn sample(&self, draw: u64) -> Vec<B::Func> {
        self.sample_funcs(draw)
    }

    fn width(&self) -> usize {
        self.k
    }

    fn symbol_bits(&self) -> u32 {
        self.base.symbol_bits()
    }

    fn hash_query(&self, f: &Vec<B::Func>, q: &Self::Query, out: &mut Vec<u64>) -> Result<()> {
        check_arity(self.k, q.len())?;
        for (h, qj) in f.iter().zip(q.points()) {
            out.push(self.base.query_symbol(h, qj)?);
        }
        Ok(())
    }

    fn hash_point(&self, f: &Vec<B::Func>, x: &B::Elem, out: &mut Vec<u64>) -> Result<()> {
        self.hash_points(f, x, out)
    }

    fn collision_law(&self, q: &Self::Query, x: &B::Elem) -> Result<f64> {
        check_arity(self.k, q.len())?;
        let mut prod = 1.0;
        for qj in q.points() {
            prod *= self.base.collision_law(qj, x)?;
        }
        Ok(prod)
    }

    fn descriptor(&self) -> FamilyDescriptor {
        FamilyDescriptor::Exhaustive {
            base: self.base.descriptor(),
            k: self.k,
        }
    }
}

/// Integer multiplicities realizing rational weights.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionPlan {
    /// `lcm` of the weight denominators.
    pub m: u64,
    /// `m * w_i` for each query element.
    pub multiplicities: Vec<u64>,
    /// `m * sum w_i`, the expanded query size.
    pub k_prime: usize,
}

impl ExpansionPlan {
    pub fn new(weights: &[Rational], cap: u64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("weights"));
        }
        let mut m: u64 = 1;
        for w in weights {
            let d = w.denom();
            let g = num_integer::gcd(m, d);
            m = (m / g)
                .checked_mul(d)
                .ok_or(Error::Overflow("lcm of weight denominators"))?;
        }
        let mut multiplicities = Vec::with_capacity(weights.len());
        let mut total: u128 = 0;
        for w in weights {
            let mult = (w.numer() as u128) * (m / w.denom()) as u128;
            total += mult;
            multiplicities.push(u64::try_from(mult).map_err(|_| Error::Overflow("multiplicity"))?);
        }
        if total == 0 {
            return Err(Error::param(
                "weights",
                "at least one weight must be positive",
            ));
        }
        if total > cap as u128 {
            return Err(Error::MultiplicityCap {
                needed: u64::try_from(total).unwrap_or(u64::MAX),
                cap,
            });
        }
        Ok(ExpansionPlan {
            m,
            multiplicities,
            k_prime: total as usize,
        })
    }

    /// `(S^m, (cS)^m)`: thresholds for the geometric structure over `T(Q)`.
    pub fn thresholds(&self, s: f64, c: f64) -> (f64, f64) {
        let m = self.m as f64;
        (s.powf(m), (c * s).powf(m))
    }

    /// Repeats element `i` of `points` `multiplicities[i]` times.
    pub fn expand<T: Clone>(&self, points: &[T]) -> Result<Vec<T>> {
        check_arity(self.multiplicities.len(), points.len())?;
        let mut out = Vec::with_capacity(self.k_prime);
        for (p, &mult) in points.iter().zip(&self.multiplicities) {
            out.extend(std::iter::repeat_n(p, mult as usize).cloned());
        }
        Ok(out)
    }
}

/// Result of [`weighted_expand`].
#[derive(Clone, Debug)]
pub struct WeightedExpansion<T> {
    pub query: SetQuery<T>,
    pub plan: ExpansionPlan,
    /// `(S^m, c^m S^m)`.
    pub thresholds: (f64, f64),
}

/// Expands a weighted set-query so that `s_geo(T(Q), x) = s_wgeo(Q, x)^m`.
pub fn weighted_expand<T: Element>(
    q: &SetQuery<T>,
    s: f64,
    c: f64,
    cap: u64,
) -> Result<WeightedExpansion<T>> {
    let weights = q.weights().ok_or(Error::param(
        "weights",
        "weighted expansion needs a weighted set-query",
    ))?;
    let plan = ExpansionPlan::new(weights, cap)?;
    let query = SetQuery::new(plan.expand(q.points())?)?;
    let thresholds = plan.thresholds(s, c);
    Ok(WeightedExpansion {
        query,
        plan,
        thresholds,
    })
}

/// Exhaustive hashing of `T(Q)` for a fixed weight vector.
#[derive(Clone, Debug)]
pub struct WeightedExhaustiveSlsh<B> {
    inner: ExhaustiveSlsh<B>,
    weights: Vec<Rational>,
    plan: ExpansionPlan,
}

impl<B: BaseFamily> WeightedExhaustiveSlsh<B> {
    pub fn new(base: B, weights: Vec<Rational>, cap: u64) -> Result<Self> {
        let plan = ExpansionPlan::new(&weights, cap)?;
        let inner = ExhaustiveSlsh::new(base, plan.k_prime)?;
        Ok(WeightedExhaustiveSlsh {
            inner,
            weights,
            plan,
        })
    }

    pub fn plan(&self) -> &ExpansionPlan {
        &self.plan
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn base(&self) -> &B {
        self.inner.base()
    }
}

impl<B: BaseFamily> HashFamily for WeightedExhaustiveSlsh<B> {
    type Query = SetQuery<B::Elem>;
    type Point = B::Elem;
    type Function = Vec<B::Func>;

    fn sample(&self, draw: u64) -> Vec<B::Func> {
        self.inner.sample_funcs(draw)
    }

    fn width(&self) -> usize {
        self.plan.k_prime
    }

    fn symbol_bits(&self) -> u32 {
        self.inner.symbol_bits()
    }

    fn hash_query(&self, f: &Vec<B::Func>, q: &Self::Query, out: &mut Vec<u64>) -> Result<()> {
        check_arity(self.weights.len(), q.len())?;
        let base = self.inner.base();
        let mut funcs = f.iter();
        for (qi, &mult) in q.points().iter().zip(&self.plan.multiplicities) {
            for h in funcs.by_ref().take(mult as usize) {
                out.push(base.query_symbol(h, qi)?);
            }
        }
        Ok(())
    }

    fn hash_point(&self, f: &Vec<B::Func>, x: &B::Elem, out: &mut Vec<u64>) -> Result<()> {
        self.inner.hash_points(f, x, out)
    }

    fn collision_law(&self, q: &Self::Query, x: &B::Elem) -> Result<f64> {
        check_arity(self.weights.len(), q.len())?;
        let mut prod = 1.0;
        for (qi, &mult) in q.points().iter().zip(&self.plan.multiplicities) {
            prod *= self.inner.base().collision_law(qi, x)?.powi(mult as i32);
        }
        Ok(prod)
    }

    fn descriptor(&self) -> FamilyDescriptor {
        FamilyDescriptor::WeightedExhaustive {
            base: self.inner.base().descriptor(),
            weights: self.weights.clone(),
        }
    }
}

/// `mu(Q) = (1/k) sum q_i`; stays in the unit ball by convexity.
pub fn centroid_transform(q: &SetQuery<Point>) -> Result<Point> {
    let dim = q.points()[0].dim();
    let mut acc = vec![0.0; dim];
    for (i, qi) in q.points().iter().enumerate() {
        qi.check_unit_ball().map_err(|e| Error::at_point(i, e))?;
        for (a, v) in acc.iter_mut().zip(qi.coords()) {
            *a += v;
        }
    }
    let k = q.len() as f64;
    Point::new(acc.into_iter().map(|v| v / k).collect())
}

/// `(1/k) sum q_i . x` for unit-ball inputs.
pub fn ip_sim_avg(q: &SetQuery<Point>, x: &Point) -> Result<f64> {
    x.check_unit_ball()?;
    let mut total = 0.0;
    for qi in q.points() {
        qi.check_unit_ball()?;
        total += qi.dot(x)?;
    }
    Ok(total / q.len() as f64)
}

/// Simple-ALSH applied to the centroid of the set-query.
#[derive(Clone, Debug)]
pub struct CentroidSlsh {
    alsh: SimpleAlsh,
}

impl CentroidSlsh {
    pub fn new(dim: usize) -> Result<Self> {
        Ok(CentroidSlsh {
            alsh: SimpleAlsh::new(dim)?,
        })
    }
}

impl HashFamily for CentroidSlsh {
    type Query = SetQuery<Point>;
    type Point = Point;
    type Function = Vec<f64>;

    fn sample(&self, draw: u64) -> Vec<f64> {
        self.alsh.sample(draw)
    }

    fn width(&self) -> usize {
        1
    }

    fn symbol_bits(&self) -> u32 {
        1
    }

    fn hash_query(&self, f: &Vec<f64>, q: &SetQuery<Point>, out: &mut Vec<u64>) -> Result<()> {
        out.push(self.alsh.query_symbol(f, &centroid_transform(q)?)?);
        Ok(())
    }

    fn hash_point(&self, f: &Vec<f64>, x: &Point, out: &mut Vec<u64>) -> Result<()> {
        out.push(self.alsh.point_symbol(f, x)?);
        Ok(())
    }

    fn collision_law(&self, q: &SetQuery<Point>, x: &Point) -> Result<f64> {
        self.alsh.collision_law(&centroid_transform(q)?, x)
    }

    fn descriptor(&self) -> FamilyDescriptor {
        FamilyDescriptor::Centroid {
            dim: self.alsh.dim(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashes::Hyperplane;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn r(a: u64, b: u64) -> Rational {
        Rational::new(a, b).unwrap()
    }

    #[test]
    fn expansion_examples() {
        let plan = ExpansionPlan::new(&[Rational::one(); 3], 4096).unwrap();
        assert_eq!((plan.m, plan.k_prime), (1, 3));
        let plan = ExpansionPlan::new(&[r(1, 2), r(3, 2)], 4096).unwrap();
        assert_eq!(
            (plan.m, plan.multiplicities.clone(), plan.k_prime),
            (2, vec![1, 3], 4)
        );
        let plan = ExpansionPlan::new(&[r(1, 2), r(1, 3)], 4096).unwrap();
        assert_eq!(
            (plan.m, plan.multiplicities.clone(), plan.k_prime),
            (6, vec![3, 2], 5)
        );
        assert_eq!(ExpansionPlan::new(&[r(1, 4097)], 4096).unwrap().k_prime, 1);
        assert!(matches!(
            ExpansionPlan::new(&[r(4097, 1)], 4096),
            Err(Error::MultiplicityCap {
                needed: 4097,
                cap: 4096
            })
        ));
        assert!(ExpansionPlan::new(&[Rational::integer(0)], 4096).is_err());
    }

    #[test]
    fn thresholds_are_powers() {
        let plan = ExpansionPlan::new(&[r(1, 2), r(1, 3)], 4096).unwrap();
        let (a, b) = plan.thresholds(0.5, 0.8);
        assert!((a - 0.5f64.powi(6)).abs() < 1e-15);
        assert!((b - 0.4f64.powi(6)).abs() < 1e-15);
    }

    #[test]
    fn centroid_examples() {
        let q = SetQuery::new(vec![p(&[1.0, 0.0]), p(&[-1.0, 0.0])]).unwrap();
        assert_eq!(centroid_transform(&q).unwrap().coords(), &[0.0, 0.0]);
        let q = SetQuery::new(vec![p(&[0.2, 0.4]), p(&[0.6, 0.0])]).unwrap();
        let mu = centroid_transform(&q).unwrap();
        assert!((mu.coords()[0] - 0.4).abs() < 1e-15 && (mu.coords()[1] - 0.2).abs() < 1e-15);
        let bad = SetQuery::new(vec![p(&[2.0, 0.0])]).unwrap();
        assert!(matches!(
            centroid_transform(&bad),
            Err(Error::AtPoint { index: 0, .. })
        ));
    }

    #[test]
    fn arity_checks() {
        let h = Hyperplane::new(2).unwrap();
        let ex = ExhaustiveSlsh::new(h.clone(), 2).unwrap();
        let q = SetQuery::new(vec![p(&[1.0, 0.0])]).unwrap();
        let f = ex.sample(0);
        assert!(matches!(
            ex.hash_query(&f, &q, &mut Vec::new()),
            Err(Error::ArityMismatch {
                expected: 2,
                got: 1
            })
        ));
        let rep = RepeatSlsh::with_arity(h.clone(), 2, 1).unwrap();
        assert!(rep.hash_query(&rep.sample(0), &q, &mut Vec::new()).is_err());
        let free = RepeatSlsh::new(h, 1).unwrap();
        assert!(free
            .hash_query(&free.sample(0), &q, &mut Vec::new())
            .is_ok());
    }

    #[test]
    fn weighted_hash_matches_expanded_exhaustive() {
        let h = Hyperplane::new(3).unwrap();
        let weights = vec![r(1, 2), r(1, 3)];
        let fam = WeightedExhaustiveSlsh::new(h.clone(), weights.clone(), 4096).unwrap();
        let q =
            SetQuery::weighted(vec![p(&[0.1, 0.2, 0.3]), p(&[-0.3, 0.1, 0.0])], weights).unwrap();
        let exp = weighted_expand(&q, 0.5, 0.5, 4096).unwrap();
        let ex = ExhaustiveSlsh::new(h, exp.plan.k_prime).unwrap();
        for draw in 0..50 {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            fam.hash_query(&fam.sample(draw), &q, &mut a).unwrap();
            ex.hash_query(&ex.sample(draw), &exp.query, &mut b).unwrap();
            assert_eq!(a, b);
        }
    }
}

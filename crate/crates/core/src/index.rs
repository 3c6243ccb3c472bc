//! Parameter planning and the amplified multi-table index.
//!
//! A table concatenates `K` independently sampled functions; `L` tables are
//! probed per query. Sampled functions are not stored: table `t`, slot `j` is
//! re-derived from `derive(derive(seed, t), j)` whenever it is needed.

use std::marker::PhantomData;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::HashFamily;
use crate::metrics::{Direction, Element, Point, S2p, SetQuery, SimilarityKind};
use crate::rng::{derive, mix64};
use crate::slsh::ip_sim_avg;

/// Slack applied before taking ceilings, so exact integers are not rounded up.
const CEIL_SLACK: f64 = 1e-9;

fn ceil_slack(v: f64) -> f64 {
    (v - CEIL_SLACK).ceil()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `(S, cS)` with `c < 1`.
    Similarity,
    /// `(r, cr)` with `c > 1`.
    Distance,
}

impl ThresholdMode {
    pub fn direction(self) -> Direction {
        match self {
            ThresholdMode::Similarity => Direction::Maximize,
            ThresholdMode::Distance => Direction::Minimize,
        }
    }
}

/// Concatenation width `K`, table count `L` and exponent `rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plan {
    pub k: usize,
    pub l: usize,
    pub rho: f64,
}

/// `rho = ln p1 / ln p2`, `K = ceil(ln n / ln(1/p2))`,
/// `L = ceil(n^rho / p1) * ceil(ln(1/delta))`.
pub fn plan_params(n: usize, p1: f64, p2: f64, delta: f64) -> Result<Plan> {
    if !(p2 > 0.0 && p2 < 1.0) {
        return Err(Error::param("p2", format!("must lie in (0, 1), got {p2}")));
    }
    if !(p1 > p2 && p1 <= 1.0) {
        return Err(Error::param(
            "p1",
            format!("must satisfy p2 < p1 <= 1, got p1 = {p1}, p2 = {p2}"),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(
            "delta",
            format!("must lie in (0, 1), got {delta}"),
        ));
    }
    let n = n.max(1) as f64;
    let rho = p1.ln() / p2.ln();
    let k = ceil_slack(n.ln() / (1.0 / p2).ln()).max(1.0);
    let per_round = ceil_slack(n.powf(rho) / p1).max(1.0);
    let rounds = ceil_slack((1.0 / delta).ln()).max(1.0);
    let l = per_round * rounds;
    if !(k.is_finite() && l.is_finite()) || k > usize::MAX as f64 || l > u64::MAX as f64 {
        return Err(Error::Overflow("table planning"));
    }
    Ok(Plan {
        k: k as usize,
        l: l.min(usize::MAX as f64) as usize,
        rho,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub mode: ThresholdMode,
    /// `S` or `r`.
    pub threshold: f64,
    pub c: f64,
    pub p1: f64,
    pub p2: f64,
    pub k: usize,
    pub l: usize,
    pub rho: f64,
    pub seed: u64,
    pub delta: f64,
}

impl IndexParams {
    #[allow(clippy::too_many_arguments)]
    pub fn plan(
        mode: ThresholdMode,
        threshold: f64,
        c: f64,
        p1: f64,
        p2: f64,
        n: usize,
        delta: f64,
        seed: u64,
    ) -> Result<Self> {
        let plan = plan_params(n, p1, p2, delta)?;
        let params = IndexParams {
            mode,
            threshold,
            c,
            p1,
            p2,
            k: plan.k,
            l: plan.l,
            rho: plan.rho,
            seed,
            delta,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            ThresholdMode::Similarity if !(self.c > 0.0 && self.c < 1.0) => {
                return Err(Error::param(
                    "c",
                    format!("similarity mode needs 0 < c < 1, got {}", self.c),
                ))
            }
            ThresholdMode::Distance if !(self.c > 1.0) => {
                return Err(Error::param(
                    "c",
                    format!("distance mode needs c > 1, got {}", self.c),
                ))
            }
            _ => {}
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::param("threshold", "must be positive and finite"));
        }
        if !(self.p1 > self.p2 && self.p1 <= 1.0 && self.p2 > 0.0) {
            return Err(Error::param("p1", "must satisfy 0 < p2 < p1 <= 1"));
        }
        if self.k == 0 || self.l == 0 {
            return Err(Error::param("K/L", "must be at least 1"));
        }
        Ok(())
    }

    /// `cS` or `cr`.
    pub fn bar(&self) -> f64 {
        self.c * self.threshold
    }

    /// Seed of function `slot` of table `table`.
    pub fn draw(&self, table: usize, slot: usize) -> u64 {
        derive(derive(self.seed, table as u64), slot as u64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexConfig {
    /// Upper bound on `L`; larger plans fail with [`Error::TableBudget`].
    pub max_tables: u64,
    /// Candidates inspected per query are capped at `candidate_factor * L`.
    pub candidate_factor: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            max_tables: 1 << 20,
            candidate_factor: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Stop at the first candidate meeting the bar.
    First,
    /// Return the best candidate meeting the bar among those inspected.
    Best,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: usize,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStats {
    pub tables_probed: usize,
    /// Bucket entries matched, duplicates included.
    pub collisions: usize,
    /// Distinct candidates verified.
    pub inspected: usize,
    pub cap: usize,
}

/// Sorted bucket storage of one table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub(crate) keys: Vec<u64>,
    pub(crate) ids: Vec<u32>,
    /// Packed symbol words per entry; empty when the key is exact.
    pub(crate) full: Vec<u64>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Sizes of all buckets in key order.
    pub fn bucket_sizes(&self, words: usize) -> Vec<usize> {
        let mut sizes = Vec::new();
        let mut i = 0;
        while i < self.ids.len() {
            let mut j = i + 1;
            while j < self.ids.len() && self.same_bucket(i, j, words) {
                j += 1;
            }
            sizes.push(j - i);
            i = j;
        }
        sizes
    }

    fn same_bucket(&self, i: usize, j: usize, words: usize) -> bool {
        self.keys[i] == self.keys[j]
            && (self.full.is_empty()
                || self.full[i * words..(i + 1) * words] == self.full[j * words..(j + 1) * words])
    }

    fn lookup<'a>(
        &'a self,
        key: u64,
        packed: &'a [u64],
        words: usize,
    ) -> impl Iterator<Item = u32> + 'a {
        let lo = self.keys.partition_point(|&k| k < key);
        let hi = lo + self.keys[lo..].partition_point(|&k| k == key);
        (lo..hi)
            .filter(move |&e| {
                self.full.is_empty() || self.full[e * words..(e + 1) * words] == *packed
            })
            .map(move |e| self.ids[e])
    }
}

/// Packs symbols of `bits` bits each into little-endian 64-bit words.
pub(crate) fn pack(symbols: &[u64], bits: u32, out: &mut Vec<u64>) {
    out.clear();
    if bits >= 64 {
        out.extend_from_slice(symbols);
        return;
    }
    let mask = (1u64 << bits) - 1;
    let mut word = 0u64;
    let mut used = 0u32;
    for &s in symbols {
        let s = s & mask;
        word |= s << used;
        if used + bits >= 64 {
            out.push(word);
            let spill = used + bits - 64;
            word = if spill == 0 { 0 } else { s >> (bits - spill) };
            used = spill;
        } else {
            used += bits;
        }
    }
    if used > 0 {
        out.push(word);
    }
}

pub(crate) fn words_for(symbols: usize, bits: u32) -> usize {
    let bits = bits.min(64) as usize;
    (symbols * bits).div_ceil(64).max(1)
}

/// 64-bit key of a packed symbol sequence. Exact when it fits in one word.
pub(crate) fn key_of(packed: &[u64]) -> u64 {
    match packed {
        [w] => *w,
        words => words.iter().fold(0x243F_6A88_85A3_08D3u64, |acc, &w| {
            mix64(acc ^ w).rotate_left(17)
        }),
    }
}

pub struct SlshIndex<F: HashFamily> {
    family: F,
    params: IndexParams,
    config: IndexConfig,
    points: Vec<F::Point>,
    words: usize,
    tables: Vec<Table>,
}

impl<F: HashFamily> std::fmt::Debug for SlshIndex<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SlshIndex")
            .field("family", &self.family.descriptor())
            .field("params", &self.params)
            .field("n", &self.points.len())
            .finish()
    }
}

impl<F: HashFamily> SlshIndex<F> {
    pub fn build(
        family: F,
        points: Vec<F::Point>,
        params: IndexParams,
        config: IndexConfig,
    ) -> Result<Self> {
        params.validate()?;
        if params.l as u64 > config.max_tables {
            return Err(Error::TableBudget {
                needed: params.l as u64,
                cap: config.max_tables,
            });
        }
        if points.len() > u32::MAX as usize {
            return Err(Error::param("points", "at most 2^32 - 1 points per index"));
        }
        let words = words_for(family.width() * params.k, family.symbol_bits());
        log::debug!(
            "building {} tables of width K = {} over {} points",
            params.l,
            params.k,
            points.len()
        );
        let tables = (0..params.l)
            .into_par_iter()
            .map(|t| build_table(&family, &params, &points, t, words))
            .collect::<Result<Vec<_>>>()?;
        Ok(SlshIndex {
            family,
            params,
            config,
            points,
            words,
            tables,
        })
    }

    /// Reassembles an index from stored tables, checking their shape.
    pub(crate) fn from_parts(
        family: F,
        points: Vec<F::Point>,
        params: IndexParams,
        config: IndexConfig,
        tables: Vec<Table>,
    ) -> Result<Self> {
        params.validate()?;
        let words = words_for(family.width() * params.k, family.symbol_bits());
        let n = points.len();
        if tables.len() != params.l {
            return Err(Error::Snapshot(format!(
                "expected {} tables, found {}",
                params.l,
                tables.len()
            )));
        }
        for t in &tables {
            let exact = words == 1;
            if t.keys.len() != n
                || t.ids.len() != n
                || (exact && !t.full.is_empty())
                || (!exact && t.full.len() != n * words)
                || t.ids.iter().any(|&id| id as usize >= n)
                || t.keys.windows(2).any(|w| w[0] > w[1])
            {
                return Err(Error::Snapshot("malformed table".into()));
            }
        }
        Ok(SlshIndex {
            family,
            params,
            config,
            points,
            words,
            tables,
        })
    }

    pub fn family(&self) -> &F {
        &self.family
    }

    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn points(&self) -> &[F::Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    /// Packed words per table key.
    pub fn key_words(&self) -> usize {
        self.words
    }

    pub fn candidate_cap(&self) -> usize {
        self.config.candidate_factor.saturating_mul(self.params.l)
    }

    /// Probes every table and verifies candidates with `verify`.
    ///
    /// `verify(id, point)` returns the exact objective value; a candidate is
    /// accepted when it meets `bar` in `direction`.
    pub fn query_with<V>(
        &self,
        q: &F::Query,
        strategy: Strategy,
        direction: Direction,
        bar: f64,
        mut verify: V,
    ) -> Result<(Option<Hit>, QueryStats)>
    where
        V: FnMut(usize, &F::Point) -> Result<f64>,
    {
        let cap = self.candidate_cap();
        let mut stats = QueryStats {
            cap,
            ..QueryStats::default()
        };
        let mut best: Option<Hit> = None;
        if self.points.is_empty() {
            return Ok((None, stats));
        }
        let mut seen = vec![false; self.points.len()];
        let mut symbols = Vec::with_capacity(self.family.width() * self.params.k);
        let mut packed = Vec::with_capacity(self.words);
        'tables: for (t, table) in self.tables.iter().enumerate() {
            symbols.clear();
            for j in 0..self.params.k {
                let f = self.family.sample(self.params.draw(t, j));
                self.family.hash_query(&f, q, &mut symbols)?;
            }
            pack(&symbols, self.family.symbol_bits(), &mut packed);
            stats.tables_probed += 1;
            for id in table.lookup(key_of(&packed), &packed, self.words) {
                stats.collisions += 1;
                let id = id as usize;
                if std::mem::replace(&mut seen[id], true) {
                    continue;
                }
                if stats.inspected >= cap {
                    break 'tables;
                }
                stats.inspected += 1;
                let score = verify(id, &self.points[id])?;
                if direction.meets(score, bar)
                    && best.is_none_or(|b| direction.better(score, b.score))
                {
                    best = Some(Hit { id, score });
                    if strategy == Strategy::First {
                        break 'tables;
                    }
                }
            }
        }
        debug_assert!(stats.inspected <= cap);
        Ok((best, stats))
    }
}

fn build_table<F: HashFamily>(
    family: &F,
    params: &IndexParams,
    points: &[F::Point],
    t: usize,
    words: usize,
) -> Result<Table> {
    let funcs: Vec<F::Function> = (0..params.k)
        .map(|j| family.sample(params.draw(t, j)))
        .collect();
    let bits = family.symbol_bits();
    let mut entries: Vec<(u64, u32)> = Vec::with_capacity(points.len());
    let mut full_unsorted: Vec<u64> = Vec::new();
    let mut symbols = Vec::with_capacity(family.width() * params.k);
    let mut packed = Vec::with_capacity(words);
    for (i, x) in points.iter().enumerate() {
        symbols.clear();
        for f in &funcs {
            family
                .hash_point(f, x, &mut symbols)
                .map_err(|e| Error::at_point(i, e))?;
        }
        pack(&symbols, bits, &mut packed);
        entries.push((key_of(&packed), i as u32));
        if words > 1 {
            full_unsorted.extend_from_slice(&packed);
        }
    }
    let words_of = |id: u32| &full_unsorted[id as usize * words..(id as usize + 1) * words];
    if words > 1 {
        entries.sort_unstable_by(|a, b| {
            a.0.cmp(&b.0)
                .then_with(|| words_of(a.1).cmp(words_of(b.1)))
                .then(a.1.cmp(&b.1))
        });
    } else {
        entries.sort_unstable();
    }
    let mut full = Vec::new();
    if words > 1 {
        full.reserve(points.len() * words);
        for &(_, id) in &entries {
            full.extend_from_slice(words_of(id));
        }
    }
    Ok(Table {
        keys: entries.iter().map(|e| e.0).collect(),
        ids: entries.iter().map(|e| e.1).collect(),
        full,
    })
}

/// Exact objective used to verify candidates.
pub trait Objective<Q, X>: Send + Sync {
    fn score(&self, q: &Q, x: &X) -> Result<f64>;
    fn direction(&self) -> Direction;
}

impl<E: Element> Objective<SetQuery<E>, E> for S2p {
    fn score(&self, q: &SetQuery<E>, x: &E) -> Result<f64> {
        self.evaluate(q, x)
    }

    fn direction(&self) -> Direction {
        S2p::direction(self)
    }
}

/// Point-to-point similarity for single-point queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointSimilarity(pub SimilarityKind);

impl<E: Element> Objective<E, E> for PointSimilarity {
    fn score(&self, q: &E, x: &E) -> Result<f64> {
        q.similarity(self.0, x)
    }

    fn direction(&self) -> Direction {
        Direction::Maximize
    }
}

/// Average inner product `(1/k) sum q_i . x`, which may be negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpAverage;

impl Objective<SetQuery<Point>, Point> for IpAverage {
    fn score(&self, q: &SetQuery<Point>, x: &Point) -> Result<f64> {
        ip_sim_avg(q, x)
    }

    fn direction(&self) -> Direction {
        Direction::Maximize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub hit: Option<Hit>,
    pub stats: QueryStats,
}

/// An index whose answers are verified against an exact objective and bar.
pub struct VerifiedIndex<F: HashFamily, O> {
    index: SlshIndex<F>,
    objective: O,
    bar: f64,
    strategy: Strategy,
    _marker: PhantomData<fn() -> O>,
}

impl<F, O> VerifiedIndex<F, O>
where
    F: HashFamily,
    O: Objective<F::Query, F::Point>,
{
    /// The bar is `cS` or `cr` from the index parameters.
    pub fn new(index: SlshIndex<F>, objective: O) -> Self {
        let bar = index.params().bar();
        Self::with_bar(index, objective, bar)
    }

    pub fn with_bar(index: SlshIndex<F>, objective: O, bar: f64) -> Self {
        VerifiedIndex {
            index,
            objective,
            bar,
            strategy: Strategy::First,
            _marker: PhantomData,
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn index(&self) -> &SlshIndex<F> {
        &self.index
    }

    pub fn objective(&self) -> &O {
        &self.objective
    }

    pub fn bar(&self) -> f64 {
        self.bar
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn query(&self, q: &F::Query) -> Result<QueryOutcome> {
        let (hit, stats) = self.index.query_with(
            q,
            self.strategy,
            self.objective.direction(),
            self.bar,
            |_, x| self.objective.score(q, x),
        )?;
        Ok(QueryOutcome { hit, stats })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::Single;
    use crate::hashes::{Hyperplane, MinHash};
    use crate::metrics::TokenSet;

    #[test]
    fn plan_example() {
        let plan = plan_params(1024, 0.9, 0.5, (-1.0f64).exp()).unwrap();
        assert!((plan.rho - 0.152_003).abs() < 1e-5);
        assert_eq!((plan.k, plan.l), (10, 4));
    }

    #[test]
    fn plan_degenerate_cases() {
        assert_eq!(plan_params(100, 0.5, 0.01, 0.1).unwrap().k, 1);
        let one = plan_params(1, 0.9, 0.5, 0.1).unwrap();
        assert_eq!(one.k, 1);
        assert!(one.l >= 1);
        assert!(plan_params(10, 0.5, 0.5, 0.1).is_err());
        assert!(plan_params(10, 0.4, 0.5, 0.1).is_err());
        assert!(plan_params(10, 0.9, 0.5, 1.0).is_err());
    }

    #[test]
    fn pack_roundtrip_layout() {
        let mut out = Vec::new();
        pack(&[1, 0, 1, 1], 1, &mut out);
        assert_eq!(out, vec![0b1101]);
        let syms: Vec<u64> = (0..70).map(|i| i % 2).collect();
        pack(&syms, 1, &mut out);
        assert_eq!(out.len(), 2);
        pack(&[5, 6, 7], 7, &mut out);
        assert_eq!(out, vec![5 | 6 << 7 | 7 << 14]);
        let big: Vec<u64> = (0..10).map(|i| 0x7F - i).collect();
        pack(&big, 7, &mut out);
        assert_eq!(out.len(), 2);
        assert_eq!(words_for(10, 7), 2);
        assert_eq!(words_for(0, 1), 1);
    }

    #[test]
    fn params_validation() {
        assert!(
            IndexParams::plan(ThresholdMode::Similarity, 0.8, 1.2, 0.8, 0.6, 10, 0.1, 0).is_err()
        );
        assert!(
            IndexParams::plan(ThresholdMode::Distance, 0.5, 0.9, 0.8, 0.6, 10, 0.1, 0).is_err()
        );
        let p = IndexParams::plan(ThresholdMode::Distance, 0.5, 2.0, 0.8, 0.6, 10, 0.1, 0).unwrap();
        assert_eq!(p.bar(), 1.0);
    }

    #[test]
    fn empty_index_returns_none() {
        let fam = Single(Hyperplane::new(3).unwrap());
        let params =
            IndexParams::plan(ThresholdMode::Similarity, 0.9, 0.8, 0.9, 0.72, 0, 0.1, 1).unwrap();
        let idx = SlshIndex::build(fam, vec![], params, IndexConfig::default()).unwrap();
        let v = VerifiedIndex::new(idx, PointSimilarity(SimilarityKind::Angular));
        let q = Point::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(v.query(&q).unwrap().hit.is_none());
    }

    #[test]
    fn table_budget_is_enforced() {
        let fam = Single(Hyperplane::new(3).unwrap());
        let params =
            IndexParams::plan(ThresholdMode::Similarity, 0.9, 0.8, 0.9, 0.72, 10, 0.1, 1).unwrap();
        let config = IndexConfig {
            max_tables: 1,
            candidate_factor: 4,
        };
        let err = SlshIndex::build(fam, vec![Point::zeros(3)], params, config).unwrap_err();
        assert!(matches!(err, Error::TableBudget { .. }));
    }

    #[test]
    fn bad_point_reports_index() {
        let fam = Single(Hyperplane::new(2).unwrap());
        let params =
            IndexParams::plan(ThresholdMode::Similarity, 0.9, 0.8, 0.9, 0.72, 2, 0.1, 1).unwrap();
        let pts = vec![Point::zeros(2), Point::zeros(3)];
        let err = SlshIndex::build(fam, pts, params, IndexConfig::default()).unwrap_err();
        assert!(matches!(err, Error::AtPoint { index: 1, .. }));
    }

    #[test]
    fn wide_minhash_keys_keep_full_sequences() {
        let fam = Single(MinHash::new(1 << 40).unwrap());
        let sets: Vec<TokenSet> = (0..50u64)
            .map(|i| TokenSet::new([i, i + 1, i + 2], 1 << 40).unwrap())
            .collect();
        let params =
            IndexParams::plan(ThresholdMode::Similarity, 0.5, 0.5, 0.5, 0.25, 50, 0.1, 3).unwrap();
        let idx = SlshIndex::build(fam, sets.clone(), params, IndexConfig::default()).unwrap();
        assert!(idx.key_words() > 1);
        for t in idx.tables() {
            assert_eq!(t.bucket_sizes(idx.key_words()).iter().sum::<usize>(), 50);
        }
        let v = VerifiedIndex::new(idx, PointSimilarity(SimilarityKind::Jaccard));
        let out = v.query(&sets[7]).unwrap();
        assert!(out.hit.unwrap().score >= 0.25);
    }
}

//! Runtime-selected structures over heterogeneous records.
//!
//! The generic types in the other modules are fixed at compile time. The CLI
//! and the Python bindings pick the family and mode from user input, so this
//! module wraps every supported combination in one enum.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::center::{CenterConfig, CenterParams, CenterStructure};
use crate::ellipsoid::{EllipsoidIndex, EllipsoidPlan, EuclideanEllipsoidQuery};
use crate::error::{Error, Result};
use crate::family::{BaseDescriptor, BaseFamily, FamilyDescriptor, HashFamily, Single};
use crate::hashes::{BitSample, Hyperplane, MinHash, MinHashKeys, SimpleAlsh};
use crate::index::{
    IndexConfig, IndexParams, IpAverage, PointSimilarity, QueryOutcome, SlshIndex, ThresholdMode,
    VerifiedIndex,
};
use crate::lift::{AverageAngularIndex, ShrinkLiftIndex};
use crate::metrics::{
    acos_clamped, BitVector, DistanceKind, Element, Point, Rational, S2p, SetQuery,
    SimilarityAggregation, SimilarityKind, TokenSet,
};
use crate::slsh::{
    CentroidSlsh, ExhaustiveSlsh, RepeatSlsh, WeightedExhaustiveSlsh, DEFAULT_MULTIPLICITY_CAP,
};

/// One stored element of any supported kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Record {
    Dense(Point),
    Bits(BitVector),
    Tokens(TokenSet),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Dense,
    Bits,
    Tokens,
}

impl Record {
    pub fn kind(&self) -> ElementKind {
        match self {
            Record::Dense(_) => ElementKind::Dense,
            Record::Bits(_) => ElementKind::Bits,
            Record::Tokens(_) => ElementKind::Tokens,
        }
    }

    pub fn as_dense(&self) -> Result<&Point> {
        match self {
            Record::Dense(p) => Ok(p),
            _ => Err(Error::KindMismatch("this structure stores dense points")),
        }
    }
}

impl Element for Record {
    fn domain(&self) -> u64 {
        match self {
            Record::Dense(p) => p.domain(),
            Record::Bits(b) => b.domain(),
            Record::Tokens(t) => t.domain(),
        }
    }

    fn similarity(&self, kind: SimilarityKind, other: &Self) -> Result<f64> {
        match (self, other) {
            (Record::Dense(a), Record::Dense(b)) => a.similarity(kind, b),
            (Record::Bits(a), Record::Bits(b)) => a.similarity(kind, b),
            (Record::Tokens(a), Record::Tokens(b)) => a.similarity(kind, b),
            _ => Err(Error::KindMismatch("records of different kinds")),
        }
    }

    fn distance(&self, kind: DistanceKind, other: &Self) -> Result<f64> {
        self.as_dense()?.distance(kind, other.as_dense()?)
    }
}

/// Any base family, over [`Record`]s.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyBase {
    Hyperplane(Hyperplane),
    BitSample(BitSample),
    MinHash(MinHash),
    SimpleAlsh(SimpleAlsh),
}

pub enum AnyFunc {
    Vector(Vec<f64>),
    Coordinate(usize),
    Keys(MinHashKeys),
}

fn kind_err() -> Error {
    Error::KindMismatch("record kind does not match the hash family")
}

impl AnyBase {
    pub fn from_descriptor(d: &BaseDescriptor) -> Result<Self> {
        Ok(match *d {
            BaseDescriptor::Hyperplane { dim } => AnyBase::Hyperplane(Hyperplane::new(dim)?),
            BaseDescriptor::BitSample { dim } => AnyBase::BitSample(BitSample::new(dim)?),
            BaseDescriptor::MinHash { universe } => AnyBase::MinHash(MinHash::new(universe)?),
            BaseDescriptor::SimpleAlsh { dim } => AnyBase::SimpleAlsh(SimpleAlsh::new(dim)?),
        })
    }

    /// Kernel whose value equals the collision probability (or, for
    /// simple-ALSH, determines it).
    pub fn similarity_kind(&self) -> SimilarityKind {
        match self {
            AnyBase::Hyperplane(_) => SimilarityKind::Angular,
            AnyBase::BitSample(_) => SimilarityKind::Hamming,
            AnyBase::MinHash(_) => SimilarityKind::Jaccard,
            AnyBase::SimpleAlsh(_) => SimilarityKind::InnerProduct,
        }
    }

    pub fn element_kind(&self) -> ElementKind {
        match self {
            AnyBase::Hyperplane(_) | AnyBase::SimpleAlsh(_) => ElementKind::Dense,
            AnyBase::BitSample(_) => ElementKind::Bits,
            AnyBase::MinHash(_) => ElementKind::Tokens,
        }
    }

    /// Collision probability at similarity `s`.
    pub fn probability_at(&self, s: f64) -> f64 {
        match self {
            AnyBase::SimpleAlsh(_) => 1.0 - acos_clamped(s) / PI,
            _ => s,
        }
    }
}

impl BaseFamily for AnyBase {
    type Elem = Record;
    type Func = AnyFunc;

    fn sample(&self, draw: u64) -> AnyFunc {
        match self {
            AnyBase::Hyperplane(b) => AnyFunc::Vector(b.sample(draw)),
            AnyBase::BitSample(b) => AnyFunc::Coordinate(b.sample(draw)),
            AnyBase::MinHash(b) => AnyFunc::Keys(b.sample(draw)),
            AnyBase::SimpleAlsh(b) => AnyFunc::Vector(b.sample(draw)),
        }
    }

    fn symbol_bits(&self) -> u32 {
        match self {
            AnyBase::Hyperplane(b) => b.symbol_bits(),
            AnyBase::BitSample(b) => b.symbol_bits(),
            AnyBase::MinHash(b) => b.symbol_bits(),
            AnyBase::SimpleAlsh(b) => b.symbol_bits(),
        }
    }

    fn query_symbol(&self, f: &AnyFunc, q: &Record) -> Result<u64> {
        match (self, f, q) {
            (AnyBase::Hyperplane(b), AnyFunc::Vector(r), Record::Dense(x)) => b.query_symbol(r, x),
            (AnyBase::BitSample(b), AnyFunc::Coordinate(i), Record::Bits(x)) => {
                b.query_symbol(i, x)
            }
            (AnyBase::MinHash(b), AnyFunc::Keys(k), Record::Tokens(x)) => b.query_symbol(k, x),
            (AnyBase::SimpleAlsh(b), AnyFunc::Vector(r), Record::Dense(x)) => b.query_symbol(r, x),
            _ => Err(kind_err()),
        }
    }

    fn point_symbol(&self, f: &AnyFunc, x: &Record) -> Result<u64> {
        match (self, f, x) {
            (AnyBase::Hyperplane(b), AnyFunc::Vector(r), Record::Dense(x)) => b.point_symbol(r, x),
            (AnyBase::BitSample(b), AnyFunc::Coordinate(i), Record::Bits(x)) => {
                b.point_symbol(i, x)
            }
            (AnyBase::MinHash(b), AnyFunc::Keys(k), Record::Tokens(x)) => b.point_symbol(k, x),
            (AnyBase::SimpleAlsh(b), AnyFunc::Vector(r), Record::Dense(x)) => b.point_symbol(r, x),
            _ => Err(kind_err()),
        }
    }

    fn collision_law(&self, q: &Record, x: &Record) -> Result<f64> {
        match (self, q, x) {
            (AnyBase::Hyperplane(b), Record::Dense(q), Record::Dense(x)) => b.collision_law(q, x),
            (AnyBase::BitSample(b), Record::Bits(q), Record::Bits(x)) => b.collision_law(q, x),
            (AnyBase::MinHash(b), Record::Tokens(q), Record::Tokens(x)) => b.collision_law(q, x),
            (AnyBase::SimpleAlsh(b), Record::Dense(q), Record::Dense(x)) => b.collision_law(q, x),
            _ => Err(kind_err()),
        }
    }

    fn is_symmetric(&self) -> bool {
        !matches!(self, AnyBase::SimpleAlsh(_))
    }

    fn descriptor(&self) -> BaseDescriptor {
        match self {
            AnyBase::Hyperplane(b) => b.descriptor(),
            AnyBase::BitSample(b) => b.descriptor(),
            AnyBase::MinHash(b) => b.descriptor(),
            AnyBase::SimpleAlsh(b) => b.descriptor(),
        }
    }
}

/// Everything needed to rebuild a structure besides data, seed and budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StructureSpec {
    /// Single-point LSH/ALSH with similarity thresholds `(S, cS)`.
    Lsh {
        base: BaseDescriptor,
        threshold: f64,
        c: f64,
    },
    /// Repeat-SLSH for the `lp` similarity.
    Lp {
        base: BaseDescriptor,
        p: usize,
        threshold: f64,
        c: f64,
    },
    /// Exhaustive SLSH for the geometric similarity.
    Geometric {
        base: BaseDescriptor,
        k: usize,
        threshold: f64,
        c: f64,
    },
    /// Weighted exhaustive SLSH for the weighted geometric similarity.
    WeightedGeometric {
        base: BaseDescriptor,
        weights: Vec<Rational>,
        threshold: f64,
        c: f64,
    },
    /// Centroid reduction for the average inner product.
    Centroid {
        dim: usize,
        threshold: f64,
        c: f64,
    },
    AverageAngular {
        dim: usize,
        r: f64,
        c: f64,
    },
    AverageEuclidean {
        dim: usize,
        r: f64,
        c: f64,
    },
    Ellipsoid {
        dim: usize,
        r: f64,
        c: f64,
        weights: Vec<Rational>,
    },
    Center {
        dim: usize,
        params: CenterParams,
    },
}

impl StructureSpec {
    pub fn name(&self) -> &'static str {
        match self {
            StructureSpec::Lsh { .. } => "lsh",
            StructureSpec::Lp { .. } => "lp",
            StructureSpec::Geometric { .. } => "geometric",
            StructureSpec::WeightedGeometric { .. } => "weighted_geometric",
            StructureSpec::Centroid { .. } => "centroid",
            StructureSpec::AverageAngular { .. } => "average_angular",
            StructureSpec::AverageEuclidean { .. } => "average_euclidean",
            StructureSpec::Ellipsoid { .. } => "ellipsoid",
            StructureSpec::Center { .. } => "center",
        }
    }

    /// Element kind the structure stores.
    pub fn element_kind(&self) -> ElementKind {
        match self {
            StructureSpec::Lsh { base, .. }
            | StructureSpec::Lp { base, .. }
            | StructureSpec::Geometric { base, .. }
            | StructureSpec::WeightedGeometric { base, .. } => match base {
                BaseDescriptor::BitSample { .. } => ElementKind::Bits,
                BaseDescriptor::MinHash { .. } => ElementKind::Tokens,
                _ => ElementKind::Dense,
            },
            _ => ElementKind::Dense,
        }
    }
}

/// Build-time knobs shared by all structures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub delta_fail: f64,
    pub seed: u64,
    pub index: IndexConfig,
    pub max_structures: u64,
    pub multiplicity_cap: u64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            delta_fail: 0.05,
            seed: 0,
            index: IndexConfig::default(),
            max_structures: crate::center::DEFAULT_STRUCTURE_CAP,
            multiplicity_cap: DEFAULT_MULTIPLICITY_CAP,
        }
    }
}

/// A query for any structure.
#[derive(Clone, Debug, PartialEq)]
pub enum QueryInput {
    Set(SetQuery<Record>),
    Ellipsoid(EuclideanEllipsoidQuery),
}

/// The concrete engine behind a [`Structure`].
pub enum Engine {
    Lsh(VerifiedIndex<Single<AnyBase>, PointSimilarity>),
    Lp(VerifiedIndex<RepeatSlsh<AnyBase>, S2p>),
    Geometric(VerifiedIndex<ExhaustiveSlsh<AnyBase>, S2p>),
    WeightedGeometric(VerifiedIndex<WeightedExhaustiveSlsh<AnyBase>, S2p>),
    Centroid(VerifiedIndex<CentroidSlsh, IpAverage>),
    AverageAngular(AverageAngularIndex),
    AverageEuclidean(ShrinkLiftIndex),
    Ellipsoid(EllipsoidIndex),
    Center(CenterStructure),
}

pub(crate) fn dense_points(records: &[Record]) -> Result<Vec<Point>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| r.as_dense().cloned().map_err(|e| Error::at_point(i, e)))
        .collect()
}

fn set_objective(base: &AnyBase, aggregation: SimilarityAggregation) -> Result<S2p> {
    if matches!(base, AnyBase::SimpleAlsh(_)) {
        return Err(Error::param(
            "family",
            "simple-alsh is asymmetric; set-query modes need an achievable base (hyperplane, bit, minhash)",
        ));
    }
    Ok(S2p::Similarity {
        kernel: base.similarity_kind(),
        aggregation,
    })
}

fn similarity_params(
    p1: f64,
    p2: f64,
    threshold: f64,
    c: f64,
    n: usize,
    opts: &BuildOptions,
) -> Result<IndexParams> {
    IndexParams::plan(
        ThresholdMode::Similarity,
        threshold,
        c,
        p1,
        p2,
        n,
        opts.delta_fail,
        opts.seed,
    )
}

/// Index parameters of every hash index inside a structure, in storage order.
pub(crate) fn plan_spec_params(
    spec: &StructureSpec,
    n: usize,
    opts: &BuildOptions,
) -> Result<Vec<IndexParams>> {
    Ok(match spec {
        StructureSpec::Lsh { base, threshold, c } => {
            let b = AnyBase::from_descriptor(base)?;
            vec![similarity_params(
                b.probability_at(*threshold),
                b.probability_at(c * threshold),
                *threshold,
                *c,
                n,
                opts,
            )?]
        }
        StructureSpec::Lp { threshold, c, .. } | StructureSpec::Geometric { threshold, c, .. } => {
            vec![similarity_params(
                *threshold,
                c * threshold,
                *threshold,
                *c,
                n,
                opts,
            )?]
        }
        StructureSpec::WeightedGeometric {
            weights,
            threshold,
            c,
            ..
        } => {
            let plan = crate::slsh::ExpansionPlan::new(weights, opts.multiplicity_cap)?;
            let (p1, p2) = plan.thresholds(*threshold, *c);
            vec![similarity_params(p1, p2, *threshold, *c, n, opts)?]
        }
        StructureSpec::Centroid { threshold, c, .. } => {
            let p = |s: f64| 1.0 - acos_clamped(s) / PI;
            vec![similarity_params(
                p(*threshold),
                p(c * threshold),
                *threshold,
                *c,
                n,
                opts,
            )?]
        }
        StructureSpec::AverageAngular { r, c, .. } => {
            let (p1, p2) = crate::lift::average_angular_probabilities(*r, *c)?;
            vec![IndexParams::plan(
                ThresholdMode::Distance,
                *r,
                *c,
                p1,
                p2,
                n,
                opts.delta_fail,
                opts.seed,
            )?]
        }
        StructureSpec::AverageEuclidean { r, c, .. } => {
            let d = crate::lift::avg_euclid_slsh_params(*r, *c)?;
            let (p1, p2) = crate::lift::average_angular_probabilities(d.r_prime, d.c_prime)?;
            vec![IndexParams::plan(
                ThresholdMode::Distance,
                d.r_prime,
                d.c_prime,
                p1,
                p2,
                n,
                opts.delta_fail,
                opts.seed,
            )?]
        }
        StructureSpec::Ellipsoid { dim, r, c, weights } => {
            let plan = EllipsoidPlan::new(*dim, *r, *c, weights.clone(), opts.multiplicity_cap)?;
            vec![plan.index_params(n, opts.delta_fail, opts.seed)?]
        }
        StructureSpec::Center { .. } => Vec::new(),
    })
}

/// A built structure together with the inputs that determine it.
pub struct Structure {
    pub(crate) spec: StructureSpec,
    pub(crate) options: BuildOptions,
    pub(crate) records: Vec<Record>,
    pub(crate) engine: Engine,
}

impl Structure {
    pub fn build(spec: StructureSpec, records: Vec<Record>, options: BuildOptions) -> Result<Self> {
        let engine = build_engine(&spec, records.clone(), &options)?;
        Ok(Structure {
            spec,
            options,
            records,
            engine,
        })
    }

    pub fn spec(&self) -> &StructureSpec {
        &self.spec
    }

    pub fn options(&self) -> &BuildOptions {
        &self.options
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn family_descriptor(&self) -> Option<FamilyDescriptor> {
        self.engine.family_descriptor()
    }

    /// Parameters of every materialized hash index, in storage order.
    pub fn index_params(&self) -> Vec<IndexParams> {
        self.engine.index_params()
    }

    pub fn query(&self, q: &QueryInput) -> Result<QueryOutcome> {
        self.engine.query(q)
    }

    /// Acceptance bar of the exact objective (`cS` or `cr`).
    pub fn bar(&self) -> f64 {
        match &self.engine {
            Engine::Lsh(v) => v.bar(),
            Engine::Lp(v) => v.bar(),
            Engine::Geometric(v) => v.bar(),
            Engine::WeightedGeometric(v) => v.bar(),
            Engine::Centroid(v) => v.bar(),
            Engine::AverageAngular(v) => v.params().bar(),
            Engine::AverageEuclidean(v) => v.c() * v.r(),
            Engine::Ellipsoid(v) => v.plan().c * v.plan().r,
            Engine::Center(v) => v.params().c * v.params().r.to_f64(),
        }
    }

    /// Whether higher objective values are better.
    pub fn maximizes(&self) -> bool {
        matches!(
            self.spec,
            StructureSpec::Lsh { .. }
                | StructureSpec::Lp { .. }
                | StructureSpec::Geometric { .. }
                | StructureSpec::WeightedGeometric { .. }
                | StructureSpec::Centroid { .. }
        )
    }
}

fn build_engine(spec: &StructureSpec, records: Vec<Record>, opts: &BuildOptions) -> Result<Engine> {
    for (i, r) in records.iter().enumerate() {
        if r.kind() != spec.element_kind() {
            return Err(Error::at_point(i, kind_err()));
        }
    }
    let n = records.len();
    let config = opts.index;
    let mut params = plan_spec_params(spec, n, opts)?.into_iter();
    let mut next = || {
        params
            .next()
            .ok_or_else(|| Error::Invariant("missing index parameters".into()))
    };
    Ok(match spec {
        StructureSpec::Lsh { base, .. } => {
            let b = AnyBase::from_descriptor(base)?;
            let kind = b.similarity_kind();
            let idx = SlshIndex::build(Single(b), records, next()?, config)?;
            Engine::Lsh(VerifiedIndex::new(idx, PointSimilarity(kind)))
        }
        StructureSpec::Lp { base, p, .. } => {
            let b = AnyBase::from_descriptor(base)?;
            let objective = set_objective(&b, SimilarityAggregation::Lp(*p as u32))?;
            let idx = SlshIndex::build(RepeatSlsh::new(b, *p)?, records, next()?, config)?;
            Engine::Lp(VerifiedIndex::new(idx, objective))
        }
        StructureSpec::Geometric { base, k, .. } => {
            let b = AnyBase::from_descriptor(base)?;
            let objective = set_objective(&b, SimilarityAggregation::Geometric)?;
            let idx = SlshIndex::build(ExhaustiveSlsh::new(b, *k)?, records, next()?, config)?;
            Engine::Geometric(VerifiedIndex::new(idx, objective))
        }
        StructureSpec::WeightedGeometric {
            base,
            weights,
            threshold,
            c,
        } => {
            let b = AnyBase::from_descriptor(base)?;
            let objective = set_objective(&b, SimilarityAggregation::WeightedGeometric)?;
            let fam = WeightedExhaustiveSlsh::new(b, weights.clone(), opts.multiplicity_cap)?;
            let idx = SlshIndex::build(fam, records, next()?, config)?;
            Engine::WeightedGeometric(VerifiedIndex::with_bar(idx, objective, c * threshold))
        }
        StructureSpec::Centroid { dim, threshold, c } => {
            let pts = dense_points(&records)?;
            let idx = SlshIndex::build(CentroidSlsh::new(*dim)?, pts, next()?, config)?;
            Engine::Centroid(VerifiedIndex::with_bar(idx, IpAverage, c * threshold))
        }
        StructureSpec::AverageAngular { dim, .. } => Engine::AverageAngular(
            AverageAngularIndex::from_params(dense_points(&records)?, *dim, next()?, config)?,
        ),
        StructureSpec::AverageEuclidean { dim, r, c } => Engine::AverageEuclidean(
            ShrinkLiftIndex::from_params(dense_points(&records)?, *dim, *r, *c, next()?, config)?,
        ),
        StructureSpec::Ellipsoid { dim, r, c, weights } => {
            let plan = EllipsoidPlan::new(*dim, *r, *c, weights.clone(), opts.multiplicity_cap)?;
            Engine::Ellipsoid(EllipsoidIndex::from_plan(
                plan,
                dense_points(&records)?,
                opts.delta_fail,
                opts.seed,
                config,
            )?)
        }
        StructureSpec::Center { dim, params } => {
            let cfg = CenterConfig {
                index: config,
                max_structures: opts.max_structures,
                multiplicity_cap: opts.multiplicity_cap,
                strict: false,
            };
            Engine::Center(CenterStructure::build(
                dense_points(&records)?,
                *dim,
                params.clone(),
                opts.delta_fail,
                opts.seed,
                cfg,
            )?)
        }
    })
}

impl Engine {
    pub fn family_descriptor(&self) -> Option<FamilyDescriptor> {
        Some(match self {
            Engine::Lsh(v) => v.index().family().descriptor(),
            Engine::Lp(v) => v.index().family().descriptor(),
            Engine::Geometric(v) => v.index().family().descriptor(),
            Engine::WeightedGeometric(v) => v.index().family().descriptor(),
            Engine::Centroid(v) => v.index().family().descriptor(),
            Engine::AverageAngular(v) => v.index().family().descriptor(),
            Engine::AverageEuclidean(v) => v.index().family().descriptor(),
            Engine::Ellipsoid(v) => v.index().family().descriptor(),
            Engine::Center(_) => return None,
        })
    }

    /// Parameters of every hash index, in storage order.
    pub fn index_params(&self) -> Vec<IndexParams> {
        match self {
            Engine::Lsh(v) => vec![v.index().params().clone()],
            Engine::Lp(v) => vec![v.index().params().clone()],
            Engine::Geometric(v) => vec![v.index().params().clone()],
            Engine::WeightedGeometric(v) => vec![v.index().params().clone()],
            Engine::Centroid(v) => vec![v.index().params().clone()],
            Engine::AverageAngular(v) => vec![v.params().clone()],
            Engine::AverageEuclidean(v) => vec![v.index().params().clone()],
            Engine::Ellipsoid(v) => vec![v.index().params().clone()],
            Engine::Center(v) => v
                .level_states()
                .iter()
                .filter_map(|l| match &l.state {
                    crate::center::LevelState::Built(e) => Some(e.index().params().clone()),
                    _ => None,
                })
                .collect(),
        }
    }

    pub fn query(&self, q: &QueryInput) -> Result<QueryOutcome> {
        let set = |q: &QueryInput| match q {
            QueryInput::Set(s) => Ok(s.clone()),
            QueryInput::Ellipsoid(_) => {
                Err(Error::KindMismatch("this structure takes set-queries"))
            }
        };
        let dense = |q: &QueryInput| -> Result<SetQuery<Point>> {
            let s = set(q)?;
            SetQuery::new(
                s.points()
                    .iter()
                    .map(|r| r.as_dense().cloned())
                    .collect::<Result<_>>()?,
            )
        };
        match self {
            Engine::Lsh(v) => {
                let s = set(q)?;
                if s.len() != 1 {
                    return Err(Error::ArityMismatch {
                        expected: 1,
                        got: s.len(),
                    });
                }
                v.query(&s.points()[0])
            }
            Engine::Lp(v) => v.query(&set(q)?),
            Engine::Geometric(v) => v.query(&set(q)?),
            Engine::WeightedGeometric(v) => {
                let s = set(q)?.with_weights(v.index().family().weights().to_vec())?;
                v.query(&s)
            }
            Engine::Centroid(v) => v.query(&dense(q)?),
            Engine::AverageAngular(v) => v.query(&dense(q)?),
            Engine::AverageEuclidean(v) => v.query(&dense(q)?),
            Engine::Ellipsoid(v) => match q {
                QueryInput::Ellipsoid(e) => v.query(e),
                QueryInput::Set(_) => Err(Error::KindMismatch(
                    "ellipsoid structures take ellipsoid queries",
                )),
            },
            Engine::Center(v) => v.query(&dense(q)?),
        }
    }
}

/// Structure modes selectable from the command line and Python.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Lsh,
    Lp,
    Geometric,
    WeightedGeometric,
    Centroid,
    AverageAngular,
    AverageEuclidean,
    Ellipsoid,
    Center,
}

impl Mode {
    pub const ALL: [Mode; 9] = [
        Mode::Lsh,
        Mode::Lp,
        Mode::Geometric,
        Mode::WeightedGeometric,
        Mode::Centroid,
        Mode::AverageAngular,
        Mode::AverageEuclidean,
        Mode::Ellipsoid,
        Mode::Center,
    ];

    /// Command-line spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Lsh => "lsh",
            Mode::Lp => "lp",
            Mode::Geometric => "geometric",
            Mode::WeightedGeometric => "weighted-geometric",
            Mode::Centroid => "centroid",
            Mode::AverageAngular => "average-angular",
            Mode::AverageEuclidean => "average-euclidean",
            Mode::Ellipsoid => "ellipsoid",
            Mode::Center => "center",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('_', "-");
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::param("mode", format!("unknown mode `{s}`")))
    }
}

/// Base family names accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyName {
    Hyperplane,
    Bit,
    MinHash,
    SimpleAlsh,
}

impl std::str::FromStr for FamilyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('_', "-").as_str() {
            "hyperplane" => FamilyName::Hyperplane,
            "bit" | "bit-sample" => FamilyName::Bit,
            "minhash" => FamilyName::MinHash,
            "simple-alsh" => FamilyName::SimpleAlsh,
            _ => return Err(Error::param("family", format!("unknown family `{s}`"))),
        })
    }
}

impl FamilyName {
    pub fn descriptor(self, dim: usize) -> BaseDescriptor {
        match self {
            FamilyName::Hyperplane => BaseDescriptor::Hyperplane { dim },
            FamilyName::Bit => BaseDescriptor::BitSample { dim },
            FamilyName::MinHash => BaseDescriptor::MinHash {
                universe: dim as u64,
            },
            FamilyName::SimpleAlsh => BaseDescriptor::SimpleAlsh { dim },
        }
    }
}

/// User-facing build options, validated into a [`StructureSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpecOptions {
    pub mode: Mode,
    pub family: Option<FamilyName>,
    /// Kept as text so center mode can read it as an exact rational.
    pub threshold: String,
    pub c: f64,
    pub weights: Option<Vec<Rational>>,
    pub phi: Option<f64>,
    pub k: Option<usize>,
    pub p: Option<usize>,
}

fn forbid<T>(value: &Option<T>, flag: &'static str, mode: Mode) -> Result<()> {
    match value {
        Some(_) => Err(Error::param(
            flag,
            format!("is not accepted by mode {mode}"),
        )),
        None => Ok(()),
    }
}

impl SpecOptions {
    /// Validates flag combinations for data of `kind` and size `dim`.
    pub fn to_spec(&self, kind: ElementKind, dim: usize) -> Result<StructureSpec> {
        let mode = self.mode;
        if !matches!(mode, Mode::WeightedGeometric | Mode::Ellipsoid) {
            forbid(&self.weights, "weights", mode)?;
        }
        if mode != Mode::Center {
            forbid(&self.phi, "phi", mode)?;
        }
        if mode != Mode::Geometric {
            forbid(&self.k, "k", mode)?;
        }
        if mode != Mode::Lp {
            forbid(&self.p, "p", mode)?;
        }
        let threshold = || -> Result<f64> {
            self.threshold.trim().parse::<f64>().map_err(|_| {
                Error::param("threshold", format!("`{}` is not a number", self.threshold))
            })
        };
        let c = self.c;
        let dense_only = |allowed: FamilyName| -> Result<()> {
            if let Some(f) = self.family {
                if f != allowed {
                    return Err(Error::param(
                        "family",
                        format!("mode {mode} uses {allowed:?}, got {f:?}"),
                    ));
                }
            }
            if kind != ElementKind::Dense {
                return Err(Error::KindMismatch("this mode needs dense data"));
            }
            Ok(())
        };
        let base = || -> Result<BaseDescriptor> {
            let f = self
                .family
                .ok_or_else(|| Error::param("family", format!("mode {mode} needs --family")))?;
            let expected = match f {
                FamilyName::Hyperplane | FamilyName::SimpleAlsh => ElementKind::Dense,
                FamilyName::Bit => ElementKind::Bits,
                FamilyName::MinHash => ElementKind::Tokens,
            };
            if expected != kind {
                return Err(Error::KindMismatch("data kind does not match the family"));
            }
            Ok(f.descriptor(dim))
        };
        let weights = || -> Result<Vec<Rational>> {
            self.weights
                .clone()
                .ok_or_else(|| Error::param("weights", format!("mode {mode} needs --weights")))
        };
        Ok(match mode {
            Mode::Lsh => StructureSpec::Lsh {
                base: base()?,
                threshold: threshold()?,
                c,
            },
            Mode::Lp => StructureSpec::Lp {
                base: base()?,
                p: self.p.unwrap_or(1),
                threshold: threshold()?,
                c,
            },
            Mode::Geometric => StructureSpec::Geometric {
                base: base()?,
                k: self
                    .k
                    .ok_or_else(|| Error::param("k", "geometric mode needs --k"))?,
                threshold: threshold()?,
                c,
            },
            Mode::WeightedGeometric => StructureSpec::WeightedGeometric {
                base: base()?,
                weights: weights()?,
                threshold: threshold()?,
                c,
            },
            Mode::Centroid => {
                dense_only(FamilyName::SimpleAlsh)?;
                StructureSpec::Centroid {
                    dim,
                    threshold: threshold()?,
                    c,
                }
            }
            Mode::AverageAngular => {
                dense_only(FamilyName::Hyperplane)?;
                StructureSpec::AverageAngular {
                    dim,
                    r: threshold()?,
                    c,
                }
            }
            Mode::AverageEuclidean => {
                dense_only(FamilyName::Hyperplane)?;
                StructureSpec::AverageEuclidean {
                    dim,
                    r: threshold()?,
                    c,
                }
            }
            Mode::Ellipsoid => {
                dense_only(FamilyName::Hyperplane)?;
                StructureSpec::Ellipsoid {
                    dim,
                    r: threshold()?,
                    c,
                    weights: weights()?,
                }
            }
            Mode::Center => {
                dense_only(FamilyName::Hyperplane)?;
                let r: Rational = self.threshold.trim().parse()?;
                let phi = self
                    .phi
                    .ok_or_else(|| Error::param("phi", "center mode needs --phi"))?;
                StructureSpec::Center {
                    dim,
                    params: CenterParams::new(r, c, phi, crate::center::DeltaRule::Aligned)?,
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(mode: Mode) -> SpecOptions {
        SpecOptions {
            mode,
            family: None,
            threshold: "0.5".into(),
            c: 2.0,
            weights: None,
            phi: None,
            k: None,
            p: None,
        }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert_eq!(
            "average_angular".parse::<Mode>().unwrap(),
            Mode::AverageAngular
        );
        assert!("nearest".parse::<Mode>().is_err());
    }

    #[test]
    fn weights_only_for_weighted_modes() {
        let mut o = opts(Mode::Lp);
        o.family = Some(FamilyName::Hyperplane);
        o.weights = Some(vec![
            Rational::new(1, 2).unwrap(),
            Rational::new(1, 2).unwrap(),
        ]);
        assert!(matches!(
            o.to_spec(ElementKind::Dense, 4),
            Err(Error::InvalidParameter {
                name: "weights",
                ..
            })
        ));
    }

    #[test]
    fn geometric_requires_k() {
        let mut o = opts(Mode::Geometric);
        o.family = Some(FamilyName::Hyperplane);
        assert!(o.to_spec(ElementKind::Dense, 4).is_err());
        o.k = Some(2);
        assert!(matches!(
            o.to_spec(ElementKind::Dense, 4),
            Ok(StructureSpec::Geometric { k: 2, .. })
        ));
    }

    #[test]
    fn center_threshold_is_exact() {
        let mut o = opts(Mode::Center);
        o.threshold = "1/10".into();
        o.phi = Some(0.5);
        match o.to_spec(ElementKind::Dense, 2).unwrap() {
            StructureSpec::Center { params, .. } => {
                assert_eq!(params.r, Rational::new(1, 10).unwrap())
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn center_rejects_c_at_or_below_minimum() {
        let mut o = opts(Mode::Center);
        o.threshold = "1/10".into();
        o.phi = Some(0.5);
        o.c = 1.0;
        let e = o.to_spec(ElementKind::Dense, 2).unwrap_err();
        assert!(e.to_string().contains("c_min"), "{e}");
    }
}

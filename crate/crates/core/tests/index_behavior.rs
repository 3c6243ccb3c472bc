use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use setlsh::center::{CenterParams, DeltaRule};
use setlsh::ellipsoid::EuclideanEllipsoidQuery;
use setlsh::family::BaseDescriptor;
use setlsh::hashes::Hyperplane;
use setlsh::index::{IndexConfig, IndexParams, SlshIndex, ThresholdMode};
use setlsh::lift::AverageAngularIndex;
use setlsh::metrics::{DistanceAggregation, DistanceKind, Point, S2p, SetQuery};
use setlsh::slsh::RepeatSlsh;
use setlsh::structure::{BuildOptions, QueryInput, Record, Structure, StructureSpec};
use setlsh::{BitVector, Rational, TokenSet};

type Rng64 = Xoshiro256PlusPlus;

fn gaussian(rng: &mut Rng64, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn in_ball(rng: &mut Rng64, d: usize, radius: f64) -> Point {
    let v = gaussian(rng, d);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    Point::new(v.into_iter().map(|x| x / n * r).collect()).unwrap()
}

fn dense_records(rng: &mut Rng64, n: usize, d: usize, radius: f64) -> Vec<Record> {
    (0..n)
        .map(|_| Record::Dense(in_ball(rng, d, radius)))
        .collect()
}

fn angular_index(n: usize, seed: u64) -> (AverageAngularIndex, Vec<Point>) {
    let mut rng = Rng64::seed_from_u64(seed);
    let pts: Vec<Point> = (0..n)
        .map(|_| Point::new(gaussian(&mut rng, 6)).unwrap())
        .collect();
    let idx =
        AverageAngularIndex::build(pts.clone(), 6, 0.4, 2.0, 0.1, seed, IndexConfig::default())
            .unwrap();
    (idx, pts)
}

#[test]
fn buckets_partition_every_table() {
    let (idx, _) = angular_index(300, 1);
    let words = idx.index().key_words();
    for t in idx.index().tables() {
        assert_eq!(t.bucket_sizes(words).iter().sum::<usize>(), 300);
    }
}

#[test]
fn equal_seeds_give_equal_tables() {
    let (a, _) = angular_index(200, 9);
    let (b, _) = angular_index(200, 9);
    assert_eq!(a.index().tables(), b.index().tables());
}

#[test]
fn answers_meet_the_bar_and_respect_the_cap() {
    let (idx, pts) = angular_index(400, 3);
    let objective = S2p::Distance {
        kernel: DistanceKind::Angular,
        aggregation: DistanceAggregation::Average,
    };
    let mut rng = Rng64::seed_from_u64(33);
    let mut answered = 0;
    for i in 0..200 {
        let base = &pts[i % pts.len()];
        let q = SetQuery::new(vec![
            Point::new(
                base.coords()
                    .iter()
                    .map(|v| v + 0.05 * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            )
            .unwrap(),
            Point::new(gaussian(&mut rng, 6)).unwrap(),
        ])
        .unwrap();
        let out = idx.query(&q).unwrap();
        assert!(out.stats.inspected <= out.stats.cap);
        if let Some(hit) = out.hit {
            answered += 1;
            let exact = objective.evaluate(&q, &pts[hit.id]).unwrap();
            assert_eq!(exact, hit.score);
            assert!(exact <= 0.8, "returned point at {exact}");
        }
    }
    assert!(answered > 0);
}

#[test]
fn table_budget_is_enforced() {
    let pts: Vec<Point> = (0..10)
        .map(|i| Point::new(vec![1.0, i as f64]).unwrap())
        .collect();
    let params =
        IndexParams::plan(ThresholdMode::Distance, 0.1, 1.1, 0.99, 0.98, 10, 0.01, 0).unwrap();
    let config = IndexConfig {
        max_tables: 2,
        ..IndexConfig::default()
    };
    let fam = RepeatSlsh::new(Hyperplane::new(2).unwrap(), 1).unwrap();
    assert!(matches!(
        SlshIndex::build(fam, pts, params, config),
        Err(setlsh::Error::TableBudget { .. })
    ));
}

#[test]
fn planted_neighbour_is_found_at_small_scale() {
    let mut found = 0;
    for trial in 0..30u64 {
        let mut rng = Rng64::seed_from_u64(100 + trial);
        let d = 8;
        let mut pts: Vec<Point> = (0..300)
            .map(|_| Point::new(gaussian(&mut rng, d)).unwrap())
            .collect();
        let q: Vec<Point> = (0..2)
            .map(|_| Point::new(gaussian(&mut rng, d)).unwrap())
            .collect();
        let sum: Vec<f64> = (0..d)
            .map(|j| q[0].coords()[j] / q[0].norm() + q[1].coords()[j] / q[1].norm())
            .collect();
        pts[7] = Point::new(sum).unwrap();
        let q = SetQuery::new(q).unwrap();
        let obj = S2p::Distance {
            kernel: DistanceKind::Angular,
            aggregation: DistanceAggregation::Average,
        };
        let r = obj.evaluate(&q, &pts[7]).unwrap() + 1e-9;
        let idx = AverageAngularIndex::build(pts, d, r, 1.5, 0.05, trial, IndexConfig::default())
            .unwrap();
        if let Some(hit) = idx.query(&q).unwrap().hit {
            assert!(hit.score <= 1.5 * r);
            found += 1;
        }
    }
    assert!(found >= 25, "found {found} of 30");
}

fn bits(rng: &mut Rng64, d: usize) -> Record {
    Record::Bits(BitVector::new((0..d).map(|_| rng.random()).collect()).unwrap())
}

fn tokens(rng: &mut Rng64, u: u64) -> Record {
    let k = rng.random_range(1..12);
    Record::Tokens(TokenSet::new((0..k).map(|_| rng.random_range(0..u)), u).unwrap())
}

/// Builds, round-trips through bytes, and compares answers on 100 queries.
fn assert_round_trip(
    spec: StructureSpec,
    records: Vec<Record>,
    mut make_query: impl FnMut(&mut Rng64) -> QueryInput,
) {
    let opts = BuildOptions {
        seed: 5,
        ..BuildOptions::default()
    };
    let s = Structure::build(spec.clone(), records, opts).unwrap();
    let bytes = s.to_bytes().unwrap();
    let back = Structure::from_bytes(&bytes).unwrap();
    assert_eq!(back.to_bytes().unwrap(), bytes, "{}", spec.name());
    let mut rng = Rng64::seed_from_u64(77);
    for _ in 0..100 {
        let q = make_query(&mut rng);
        let a = s.query(&q);
        let b = back.query(&q);
        match (a, b) {
            (Ok(a), Ok(b)) => assert_eq!(a, b, "{}", spec.name()),
            (Err(a), Err(b)) => assert_eq!(a.to_string(), b.to_string()),
            (a, b) => panic!("{}: {a:?} vs {b:?}", spec.name()),
        }
    }
}

fn dense_set(rng: &mut Rng64, k: usize, d: usize, radius: f64) -> QueryInput {
    QueryInput::Set(
        SetQuery::new(
            (0..k)
                .map(|_| Record::Dense(in_ball(rng, d, radius)))
                .collect(),
        )
        .unwrap(),
    )
}

#[test]
fn snapshots_round_trip_for_every_mode() {
    let mut rng = Rng64::seed_from_u64(1);
    let dense = dense_records(&mut rng, 60, 3, 1.0);
    let hp = BaseDescriptor::Hyperplane { dim: 3 };

    assert_round_trip(
        StructureSpec::Lsh {
            base: hp.clone(),
            threshold: 0.8,
            c: 0.9,
        },
        dense.clone(),
        |r| dense_set(r, 1, 3, 1.0),
    );
    assert_round_trip(
        StructureSpec::Lsh {
            base: BaseDescriptor::SimpleAlsh { dim: 3 },
            threshold: 0.5,
            c: 0.5,
        },
        dense.clone(),
        |r| dense_set(r, 1, 3, 1.0),
    );
    let bit_records: Vec<Record> = (0..60).map(|_| bits(&mut rng, 24)).collect();
    assert_round_trip(
        StructureSpec::Lp {
            base: BaseDescriptor::BitSample { dim: 24 },
            p: 2,
            threshold: 0.6,
            c: 0.8,
        },
        bit_records,
        |r| QueryInput::Set(SetQuery::new(vec![bits(r, 24), bits(r, 24)]).unwrap()),
    );
    let token_records: Vec<Record> = (0..60).map(|_| tokens(&mut rng, 40)).collect();
    assert_round_trip(
        StructureSpec::Geometric {
            base: BaseDescriptor::MinHash { universe: 40 },
            k: 2,
            threshold: 0.2,
            c: 0.5,
        },
        token_records,
        |r| QueryInput::Set(SetQuery::new(vec![tokens(r, 40), tokens(r, 40)]).unwrap()),
    );
    assert_round_trip(
        StructureSpec::WeightedGeometric {
            base: hp.clone(),
            weights: vec![Rational::new(1, 2).unwrap(), Rational::one()],
            threshold: 0.7,
            c: 0.9,
        },
        dense.clone(),
        |r| dense_set(r, 2, 3, 1.0),
    );
    assert_round_trip(
        StructureSpec::Centroid {
            dim: 3,
            threshold: 0.3,
            c: 0.5,
        },
        dense.clone(),
        |r| dense_set(r, 3, 3, 1.0),
    );
    assert_round_trip(
        StructureSpec::AverageAngular {
            dim: 3,
            r: 0.5,
            c: 2.0,
        },
        dense.clone(),
        |r| dense_set(r, 2, 3, 1.0),
    );
    assert_round_trip(
        StructureSpec::AverageEuclidean {
            dim: 3,
            r: 0.3,
            c: 2.5,
        },
        dense.clone(),
        |r| dense_set(r, 2, 3, 1.0),
    );

    let small = dense_records(&mut rng, 12, 2, 0.5);
    assert_round_trip(
        StructureSpec::Ellipsoid {
            dim: 2,
            r: 0.05,
            c: 4.0,
            weights: vec![Rational::one(), Rational::one()],
        },
        small.clone(),
        |r| QueryInput::Ellipsoid(EuclideanEllipsoidQuery::standard(in_ball(r, 2, 0.5)).unwrap()),
    );
    let params =
        CenterParams::new(Rational::new(1, 10).unwrap(), 2.5, 0.5, DeltaRule::Aligned).unwrap();
    assert_round_trip(StructureSpec::Center { dim: 2, params }, small, |r| {
        dense_set(r, 2, 2, 0.5)
    });
}

#[test]
fn records_of_the_wrong_kind_are_rejected() {
    let mut rng = Rng64::seed_from_u64(2);
    let recs = vec![bits(&mut rng, 8)];
    let spec = StructureSpec::AverageAngular {
        dim: 8,
        r: 0.5,
        c: 2.0,
    };
    let err = Structure::build(spec, recs, BuildOptions::default())
        .err()
        .unwrap();
    assert!(matches!(err, setlsh::Error::AtPoint { index: 0, .. }));
}

//! Acceptance criteria 1 to 11.
//!
//! Prints one PASS/FAIL line per criterion (criterion 9 also per part) and
//! exits non-zero when any criterion fails. Every number that enters a
//! verdict is also written into a per-criterion digest; criterion 11 reruns
//! criteria 1 to 9 with the same seed and compares the digests.

// Negated comparisons below also count NaN as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

use setlsh::center::{
    center_distance, CanonicalRegions, CenterConfig, CenterParams, CenterStructure, DeltaRule,
};
use setlsh::ellipsoid::{
    angular_axis_angle, angular_to_wgeo_params, antipodal_pair_law, choose_epsilon,
    euclid_to_angular_params, euclidean_ellipsoid_distance, EllipsoidIndex, EllipsoidPlan,
    EuclideanEllipsoidQuery,
};
use setlsh::family::Single;
use setlsh::hashes::{BitSample, Hyperplane, MinHash, SimpleAlsh};
use setlsh::index::IndexConfig;
use setlsh::lift::{
    avg_euclid_slsh_params, error_term, lifted_angle_formula, m_factor, shrink_lift,
    AverageAngularIndex, ShrinkLiftIndex,
};
use setlsh::metrics::{
    aggregate_similarity, angle, angular_similarity, hamming_similarity, jaccard_similarity,
    DistanceAggregation, DistanceKind, Point, S2p, SetQuery, SimilarityAggregation, SimilarityKind,
};
use setlsh::oracle::estimate_collision_probability;
use setlsh::rng::{derive, rng_for, DrawRng};
use setlsh::slsh::{centroid_transform, ip_sim_avg, ExhaustiveSlsh, ExpansionPlan, RepeatSlsh};
use setlsh::{BitVector, HashFamily, Rational, TokenSet};

const SEED: u64 = 0x5E7_1A5B;
const MC_TRIALS: u64 = 100_000;

struct Verdict {
    id: &'static str,
    title: &'static str,
    passed: bool,
    summary: String,
    digest: String,
    elapsed: Duration,
    limit: Duration,
}

impl Verdict {
    fn print(&self) {
        println!(
            "criterion {:<3} {:<34} {}  {} [{:.1}s, limit {}s]",
            self.id,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.summary,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs()
        );
    }
}

/// Runs `f`, timing it; the verdict also requires staying within `limit`.
fn timed(
    id: &'static str,
    title: &'static str,
    limit_secs: u64,
    f: impl FnOnce() -> (bool, String, String),
) -> Verdict {
    let start = Instant::now();
    let (ok, summary, digest) = f();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(limit_secs);
    Verdict {
        id,
        title,
        passed: ok && elapsed <= limit,
        summary,
        digest,
        elapsed,
        limit,
    }
}

fn unit(rng: &mut DrawRng, d: usize) -> Point {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return Point::new(v.into_iter().map(|x| x / n).collect()).unwrap();
        }
    }
}

fn in_ball(rng: &mut DrawRng, d: usize, radius: f64) -> Point {
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    unit(rng, d).scale(r)
}

/// Unit vector orthogonal to unit `x`.
fn orthogonal(rng: &mut DrawRng, x: &Point) -> Point {
    loop {
        let g = unit(rng, x.dim());
        let v = g.sub(&x.scale(g.dot(x).unwrap())).unwrap();
        if v.norm() > 1e-6 {
            return v.scale(1.0 / v.norm());
        }
    }
}

/// Unit vector at angle exactly `theta` from unit `x`.
fn rotate(rng: &mut DrawRng, x: &Point, theta: f64) -> Point {
    let u = orthogonal(rng, x);
    x.scale(theta.cos()).add(&u.scale(theta.sin())).unwrap()
}

/// 3-sigma band check against the analytic probability `law`.
fn band<F: HashFamily>(
    family: &F,
    q: &F::Query,
    x: &F::Point,
    law: f64,
    seed: u64,
    digest: &mut String,
) -> bool {
    let est = estimate_collision_probability(family, q, x, MC_TRIALS, seed).unwrap();
    write!(digest, "{:?}/{:?};", est.estimate, law).unwrap();
    est.within_sigma(law, 3.0)
}

fn criterion_1(seed: u64) -> Verdict {
    timed("1", "achievability laws", 60, || {
        let mut rng = rng_for(derive(seed, 1));
        let mut digest = String::new();
        let mut fails = [0u32; 4];
        let (hp, bs, mh, al) = (
            Hyperplane::new(8).unwrap(),
            BitSample::new(64).unwrap(),
            MinHash::new(1000).unwrap(),
            SimpleAlsh::new(8).unwrap(),
        );
        for i in 0..50u64 {
            let s = |j: u64| derive(derive(seed, 100 + j), i);

            let x = unit(&mut rng, 8);
            let spread = 2.0 * rng.random::<f64>();
            let y = Point::new(
                x.coords()
                    .iter()
                    .map(|v| v + spread * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            )
            .unwrap();
            let law = angular_similarity(&x, &y).unwrap();
            fails[0] += u32::from(!band(&Single(hp.clone()), &x, &y, law, s(0), &mut digest));

            let a: Vec<bool> = (0..64).map(|_| rng.random()).collect();
            let flip = 0.6 * rng.random::<f64>();
            let b: Vec<bool> = a
                .iter()
                .map(|&v| if rng.random::<f64>() < flip { !v } else { v })
                .collect();
            let (a, b) = (BitVector::new(a).unwrap(), BitVector::new(b).unwrap());
            let law = hamming_similarity(&a, &b).unwrap();
            fails[1] += u32::from(!band(&Single(bs.clone()), &a, &b, law, s(1), &mut digest));

            let common: Vec<u64> = (0..30).map(|_| rng.random_range(0..1000)).collect();
            let keep = rng.random::<f64>();
            let mut ta: Vec<u64> = common.clone();
            let mut tb: Vec<u64> = common
                .iter()
                .copied()
                .filter(|_| rng.random::<f64>() < keep)
                .collect();
            ta.extend((0..5).map(|_| rng.random_range(0..1000u64)));
            tb.extend((0..5).map(|_| rng.random_range(0..1000u64)));
            let (ta, tb) = (
                TokenSet::new(ta, 1000).unwrap(),
                TokenSet::new(tb, 1000).unwrap(),
            );
            let law = jaccard_similarity(&ta, &tb);
            fails[2] += u32::from(!band(&Single(mh.clone()), &ta, &tb, law, s(2), &mut digest));

            let q = in_ball(&mut rng, 8, 1.0);
            let x = in_ball(&mut rng, 8, 1.0);
            let law = 1.0 - q.dot(&x).unwrap().clamp(-1.0, 1.0).acos() / PI;
            fails[3] += u32::from(!band(&Single(al.clone()), &q, &x, law, s(3), &mut digest));
        }
        let ok = fails.iter().all(|&f| f <= 1);
        let summary = format!(
            "band violations of 50: hyperplane {} bit {} minhash {} simple-alsh {} (allowed 1 each)",
            fails[0], fails[1], fails[2], fails[3]
        );
        (ok, summary, digest)
    })
}

fn criterion_2(seed: u64) -> Verdict {
    timed("2", "repeat and exhaustive laws", 90, || {
        let mut rng = rng_for(derive(seed, 2));
        let mut digest = String::new();
        let hp = Hyperplane::new(8).unwrap();
        let mut report = Vec::new();
        let mut ok = true;
        for k in [2usize, 3] {
            for p in [0usize, 1, 2, 3] {
                // p = 0 stands for the exhaustive construction.
                let mut fails = 0;
                for i in 0..20u64 {
                    let center = unit(&mut rng, 8);
                    let spread = 1.5 * rng.random::<f64>();
                    let jitter = |rng: &mut DrawRng| {
                        Point::new(
                            center
                                .coords()
                                .iter()
                                .map(|v| v + spread * rng.sample::<f64, _>(StandardNormal))
                                .collect(),
                        )
                        .unwrap()
                    };
                    let q = SetQuery::new((0..k).map(|_| jitter(&mut rng)).collect()).unwrap();
                    let x = jitter(&mut rng);
                    let sims: Vec<f64> = q
                        .points()
                        .iter()
                        .map(|a| angular_similarity(a, &x).unwrap())
                        .collect();
                    let s = derive(derive(seed, 200 + (10 * k + p) as u64), i);
                    let hit = if p == 0 {
                        let law: f64 = sims.iter().product();
                        band(
                            &ExhaustiveSlsh::new(hp.clone(), k).unwrap(),
                            &q,
                            &x,
                            law,
                            s,
                            &mut digest,
                        )
                    } else {
                        let law = sims.iter().map(|v| v.powi(p as i32)).sum::<f64>() / k as f64;
                        band(
                            &RepeatSlsh::new(hp.clone(), p).unwrap(),
                            &q,
                            &x,
                            law,
                            s,
                            &mut digest,
                        )
                    };
                    fails += u32::from(!hit);
                }
                ok &= fails <= 1;
                let name = if p == 0 {
                    format!("geo k={k}")
                } else {
                    format!("p={p} k={k}")
                };
                report.push(format!("{name}:{fails}"));
            }
        }
        (
            ok,
            format!("band violations of 20 (allowed 1): {}", report.join(" ")),
            digest,
        )
    })
}

fn criterion_3(seed: u64) -> Verdict {
    timed("3", "weighted expansion identity", 5, || {
        let mut rng = rng_for(derive(seed, 3));
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let k = rng.random_range(1..5);
            let d = rng.random_range(2..9);
            let w: Vec<Rational> = (0..k)
                .map(|_| Rational::new(rng.random_range(1..6), rng.random_range(1..6)).unwrap())
                .collect();
            let plan = ExpansionPlan::new(&w, 1 << 16).unwrap();
            let pts: Vec<Point> = (0..k).map(|_| unit(&mut rng, d)).collect();
            let x = unit(&mut rng, d);
            let q = SetQuery::weighted(pts.clone(), w).unwrap();
            let wgeo = aggregate_similarity(
                SimilarityAggregation::WeightedGeometric,
                &q.similarities(SimilarityKind::Angular, &x).unwrap(),
                q.weights(),
            )
            .unwrap();
            let t = SetQuery::new(plan.expand(&pts).unwrap()).unwrap();
            let geo = aggregate_similarity(
                SimilarityAggregation::Geometric,
                &t.similarities(SimilarityKind::Angular, &x).unwrap(),
                None,
            )
            .unwrap();
            worst = worst.max((geo - wgeo.powf(plan.m as f64)).abs());
        }
        (
            worst <= 1e-12,
            format!("max |s_geo(T(Q),x) - s_wgeo^m| = {worst:.3e} over 1000 (tol 1e-12)"),
            format!("{worst:?}"),
        )
    })
}

fn criterion_4(seed: u64) -> Verdict {
    timed("4", "centroid identity", 5, || {
        let mut rng = rng_for(derive(seed, 4));
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let k = rng.random_range(1..6);
            let d = rng.random_range(1..9);
            let q = SetQuery::new((0..k).map(|_| in_ball(&mut rng, d, 1.0)).collect()).unwrap();
            let x = in_ball(&mut rng, d, 1.0);
            let mu = centroid_transform(&q).unwrap();
            worst = worst.max((ip_sim_avg(&q, &x).unwrap() - mu.dot(&x).unwrap()).abs());
        }
        (
            worst <= 1e-12,
            format!("max |ip_avg - ip(mu, x)| = {worst:.3e} over 1000 (tol 1e-12)"),
            format!("{worst:?}"),
        )
    })
}

fn criterion_5(seed: u64) -> Verdict {
    timed("5", "shrink-lift identities", 30, || {
        let mut rng = rng_for(derive(seed, 5));
        let (mut identity, mut lower, mut error, mut sandwich) = (0u32, 0u32, 0u32, 0u32);
        let mut worst_identity: f64 = 0.0;
        for _ in 0..100_000 {
            let d = rng.random_range(1..9);
            let eps = (0.5 * rng.random::<f64>()).max(1e-4);
            let x = in_ball(&mut rng, d, 1.0);
            let y = in_ball(&mut rng, d, 1.0);
            let theta = angle(
                &shrink_lift(&x, eps).unwrap(),
                &shrink_lift(&y, eps).unwrap(),
            )
            .unwrap();
            let gap = (theta - lifted_angle_formula(eps, &x, &y).unwrap()).abs();
            worst_identity = worst_identity.max(gap);
            identity += u32::from(gap > 1e-10);
            let dist = x.sub(&y).unwrap().norm();
            lower += u32::from(2.0 * (eps / 2.0 * dist).asin() > theta + 1e-9);
            let e = error_term(eps, &x, &y).unwrap();
            error += u32::from(e < -1e-9 || e > 4.0 / 3.0 * dist * dist * eps * eps + 1e-9);
            let upper = m_factor(eps).unwrap() * eps * dist;
            sandwich += u32::from(eps * dist > theta + 1e-9 || theta > upper + 1e-9);
        }
        let ok = identity + lower + error + sandwich == 0;
        let summary = format!(
            "violations over 1e5: identity {identity} (max gap {worst_identity:.2e}), lower {lower}, error-term {error}, sandwich {sandwich}"
        );
        (
            ok,
            summary,
            format!("{identity};{lower};{error};{sandwich};{worst_identity:?}"),
        )
    })
}

fn criterion_6(_seed: u64) -> Verdict {
    timed("6", "parameter guarantees", 5, || {
        let grid = [1.25, 1.5, 2.0, 3.0, 4.0, 6.0, 10.0];
        let weight_sets: [Vec<Rational>; 2] = [
            vec![
                Rational::integer(2),
                Rational::one(),
                Rational::one(),
                Rational::one(),
            ],
            vec![Rational::one(), Rational::one()],
        ];
        let mut digest = String::new();
        let (mut b2, mut chain, mut wgeo, mut checks) = (0u32, 0u32, 0u32, 0u32);
        for &c in &grid {
            for &r in &[0.05, 0.1, 0.25] {
                checks += 1;
                let p = avg_euclid_slsh_params(r, c).unwrap();
                write!(digest, "{:?};", p.c_prime).unwrap();
                b2 += u32::from(
                    !(p.c_prime > 1.0
                        && (p.c_prime - c / m_factor(p.epsilon).unwrap()).abs() < 1e-12),
                );
                for w in &weight_sets {
                    let eps = choose_epsilon(r, c, w).unwrap();
                    let (ra, ca) = euclid_to_angular_params(r, c, w, eps).unwrap();
                    write!(digest, "{ca:?};").unwrap();
                    chain += u32::from(!(ca > c.powf(0.25)));
                    let wp = angular_to_wgeo_params(ra, ca, w).unwrap();
                    write!(digest, "{:?};", wp.c_prime).unwrap();
                    wgeo += u32::from(!(wp.c_prime < 1.0 && wp.c_prime > 0.0));
                }
            }
        }
        let ok = b2 + chain + wgeo == 0;
        let summary = format!(
            "{} c values x 3 r: avg-euclid c'>1 fails {b2}/{checks}, chain c'>c^(1/4) fails {chain}/{}, wgeo c'<1 fails {wgeo}/{}",
            grid.len(),
            2 * checks,
            2 * checks
        );
        (ok, summary, digest)
    })
}

fn criterion_7(seed: u64) -> Verdict {
    timed("7", "antipodal product law", 30, || {
        let mut rng = rng_for(derive(seed, 7));
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let d = rng.random_range(2..9);
            let e = unit(&mut rng, d);
            let x = unit(&mut rng, d);
            let q = SetQuery::new(vec![e.clone(), e.neg()]).unwrap();
            let direct: f64 = q
                .similarities(SimilarityKind::Angular, &x)
                .unwrap()
                .iter()
                .product();
            let theta = angular_axis_angle(&e, &x).unwrap();
            worst = worst.max((direct - (0.25 - theta * theta / (PI * PI))).abs());
        }
        let e = unit(&mut rng, 6);
        let x = unit(&mut rng, 6);
        let law = antipodal_pair_law(&e, &x).unwrap();
        let q = SetQuery::new(vec![e.clone(), e.neg()]).unwrap();
        let mut digest = format!("{worst:?};");
        let mc = band(
            &ExhaustiveSlsh::new(Hyperplane::new(6).unwrap(), 2).unwrap(),
            &q,
            &x,
            law,
            derive(seed, 700),
            &mut digest,
        );
        let ok = worst <= 1e-12 && mc;
        (ok, format!("max identity gap {worst:.2e} over 1e4 (tol 1e-12); Monte Carlo within 3 sigma: {mc}"), digest)
    })
}

fn criterion_8(seed: u64) -> Verdict {
    timed("8", "ellipsoid hierarchy", 30, || {
        let mut rng = rng_for(derive(seed, 8));
        let g = CanonicalRegions {
            a: 3.6,
            r: 6.0,
            c: 1.35,
        };
        let big = g.c * g.r / setlsh::center::C_MIN;
        let (mut ls, mut sb, mut bl) = (0u32, 0u32, 0u32);
        let tol = 1e-9;
        for _ in 0..100_000 {
            let x = (2.0 * rng.random::<f64>() - 1.0) * (big + g.a);
            let y = (2.0 * rng.random::<f64>() - 1.0) * big;
            let y2 = y * y;
            ls += u32::from(g.small_lens(x, y2, 0.0) && !g.small_ellipsoid(x, y2, tol));
            sb += u32::from(g.small_ellipsoid(x, y2, 0.0) && !g.big_ellipsoid(x, y2, tol));
            bl += u32::from(g.big_ellipsoid(x, y2, 0.0) && !g.big_lens(x, y2, tol));
        }
        let (mut splus, mut bminus, mut infeasible) = (0u32, 0u32, 0u32);
        let mut digest = String::new();
        for _ in 0..100 {
            let r = Rational::new(rng.random_range(1..=1000), 1000).unwrap();
            let c = 1.1 + 3.0 * rng.random::<f64>();
            let phi = 0.05 + 0.9 * rng.random::<f64>();
            let params = CenterParams::new(r, c, phi, DeltaRule::Aligned).unwrap();
            let (rf, delta) = (r.to_f64(), params.delta.to_f64());
            let a = rng.random::<f64>() * (1.0 - phi) * rf;
            let a_up = (a / delta).ceil() * delta;
            write!(digest, "{a:?},{delta:?};").unwrap();
            infeasible += u32::from(!(a <= a_up && a_up < rf));
            let g = CanonicalRegions { a, r: rf, c };
            for _ in 0..1000 {
                let x = (2.0 * rng.random::<f64>() - 1.0) * 2.0 * c * rf;
                let y = 2.0 * c * rf * rng.random::<f64>();
                let y2 = y * y;
                splus +=
                    u32::from(g.small_ellipsoid(x, y2, 0.0) && !g.small_rounded(a_up, x, y2, tol));
                bminus +=
                    u32::from(g.big_rounded(a_up, x, y2, 0.0) && !g.big_ellipsoid(x, y2, tol));
            }
        }
        let ok = ls + sb + bl + splus + bminus + infeasible == 0;
        let summary = format!(
            "violations: Ls-S {ls}, S-B {sb}, B-Lb {bl} (1e5 points); S-S+ {splus}, B- -B {bminus}, a' infeasible {infeasible} (100 pairs)"
        );
        write!(digest, "{ls};{sb};{bl};{splus};{bminus}").unwrap();
        (ok, summary, digest)
    })
}

/// One returned answer, re-scored from scratch for criterion 10.
struct Audit {
    part: &'static str,
    exact: f64,
    bar: f64,
}

struct Recall {
    verdict: Verdict,
    audits: Vec<Audit>,
}

fn recall_verdict(
    id: &'static str,
    title: &'static str,
    limit: u64,
    seed: u64,
    trials: u64,
    plan: String,
    mut trial: impl FnMut(u64, &mut DrawRng, &mut Vec<Audit>, &mut String) -> bool,
) -> Recall {
    let mut audits = Vec::new();
    let verdict = timed(id, title, limit, || {
        let mut found = 0;
        let mut digest = String::new();
        for t in 0..trials {
            let mut rng = rng_for(derive(seed, t));
            found += u32::from(trial(t, &mut rng, &mut audits, &mut digest));
        }
        (
            found >= 90,
            format!("{found}/{trials} planted queries answered within bar (need 90); {plan}"),
            digest,
        )
    });
    Recall { verdict, audits }
}

fn criterion_9a(seed: u64) -> Recall {
    let (n, d, r, c) = (2000usize, 16usize, 0.5, 2.0);
    let objective = S2p::Distance {
        kernel: DistanceKind::Angular,
        aggregation: DistanceAggregation::Average,
    };
    let (p1, p2) = setlsh::lift::average_angular_probabilities(r, c).unwrap();
    let plan = setlsh::index::plan_params(n, p1, p2, 0.05).unwrap();
    let info = format!("n={n} d={d} r={r} c={c} K={} L={}", plan.k, plan.l);
    recall_verdict(
        "9a",
        "planted recall: average angular",
        600,
        derive(seed, 91),
        100,
        info,
        |t, rng, audits, digest| {
            let mut pts: Vec<Point> = (0..n).map(|_| unit(rng, d)).collect();
            let x = unit(rng, d);
            let q =
                SetQuery::new(vec![rotate(rng, &x, 0.9 * r), rotate(rng, &x, 0.9 * r)]).unwrap();
            let planted = rng.random_range(0..n);
            pts[planted] = x;
            let idx = AverageAngularIndex::build(
                pts.clone(),
                d,
                r,
                c,
                0.05,
                derive(seed, 9100 + t),
                IndexConfig::default(),
            )
            .unwrap();
            let out = idx.query(&q).unwrap();
            write!(digest, "{:?};", out.hit.map(|h| (h.id, h.score))).unwrap();
            match out.hit {
                Some(h) => {
                    let exact = objective.evaluate(&q, &pts[h.id]).unwrap();
                    audits.push(Audit {
                        part: "9a",
                        exact,
                        bar: c * r,
                    });
                    exact <= c * r
                }
                None => false,
            }
        },
    )
}

fn criterion_9b(seed: u64) -> Recall {
    let (n, d, r, c) = (2000usize, 16usize, 0.25, 3.0);
    let objective = S2p::Distance {
        kernel: DistanceKind::Euclidean,
        aggregation: DistanceAggregation::Average,
    };
    let derived = avg_euclid_slsh_params(r, c).unwrap();
    let (p1, p2) =
        setlsh::lift::average_angular_probabilities(derived.r_prime, derived.c_prime).unwrap();
    let plan = setlsh::index::plan_params(n, p1, p2, 0.05).unwrap();
    let info = format!(
        "n={n} d={d} r={r} c={c} eps={:.4} r'={:.4} c'={:.4} K={} L={}",
        derived.epsilon, derived.r_prime, derived.c_prime, plan.k, plan.l
    );
    recall_verdict(
        "9b",
        "planted recall: shrink-lift euclid",
        600,
        derive(seed, 92),
        100,
        info,
        |t, rng, audits, digest| {
            let mut pts: Vec<Point> = (0..n).map(|_| in_ball(rng, d, 1.0)).collect();
            let x = in_ball(rng, d, 0.5);
            let q = SetQuery::new(
                (0..2)
                    .map(|_| x.add(&unit(rng, d).scale(0.9 * r)).unwrap())
                    .collect(),
            )
            .unwrap();
            let planted = rng.random_range(0..n);
            pts[planted] = x;
            let idx = ShrinkLiftIndex::build(
                pts.clone(),
                d,
                r,
                c,
                0.05,
                derive(seed, 9200 + t),
                IndexConfig::default(),
            )
            .unwrap();
            let out = idx.query(&q).unwrap();
            write!(digest, "{:?};", out.hit.map(|h| (h.id, h.score))).unwrap();
            match out.hit {
                Some(h) => {
                    let exact = objective.evaluate(&q, &pts[h.id]).unwrap();
                    audits.push(Audit {
                        part: "9b",
                        exact,
                        bar: c * r,
                    });
                    exact <= c * r
                }
                None => false,
            }
        },
    )
}

fn criterion_9c(seed: u64) -> Recall {
    let (n, d, r, c) = (32usize, 4usize, 0.1, 4.0);
    let w = vec![
        Rational::integer(2),
        Rational::one(),
        Rational::one(),
        Rational::one(),
    ];
    let plan =
        EllipsoidPlan::new(d, r, c, w.clone(), setlsh::slsh::DEFAULT_MULTIPLICITY_CAP).unwrap();
    let params = plan.index_params(n, 0.05, 0).unwrap();
    let info = format!(
        "n={n} d={d} w=(2,1,1,1) r={r} c={c} eps={:.4} k'={} K={} L={}",
        plan.epsilon, plan.expansion.k_prime, params.k, params.l
    );
    recall_verdict(
        "9c",
        "planted recall: euclid ellipsoid",
        600,
        derive(seed, 93),
        100,
        info,
        |t, rng, audits, digest| {
            let mut pts: Vec<Point> = (0..n).map(|_| in_ball(rng, d, 1.0)).collect();
            let center = in_ball(rng, d, 0.5);
            let q = EuclideanEllipsoidQuery::standard(center.clone()).unwrap();
            let u = unit(rng, d);
            let weighted: f64 = u
                .coords()
                .iter()
                .zip(&w)
                .map(|(v, wi)| wi.to_f64() * v * v)
                .sum();
            let x = center.add(&u.scale((0.9 * r / weighted).sqrt())).unwrap();
            let planted = rng.random_range(0..n);
            pts[planted] = x;
            let idx = EllipsoidIndex::build(
                pts.clone(),
                d,
                r,
                c,
                w.clone(),
                0.05,
                derive(seed, 9300 + t),
                IndexConfig::default(),
            )
            .unwrap();
            let out = idx.query(&q).unwrap();
            write!(digest, "{:?};", out.hit.map(|h| (h.id, h.score))).unwrap();
            match out.hit {
                Some(h) => {
                    let exact = euclidean_ellipsoid_distance(&q, &pts[h.id], &w).unwrap();
                    audits.push(Audit {
                        part: "9c",
                        exact,
                        bar: c * r,
                    });
                    exact <= c * r
                }
                None => false,
            }
        },
    )
}

fn criterion_9d(seed: u64) -> Recall {
    let (n, d, c, phi) = (32usize, 2usize, 1.5, 0.5);
    let r = Rational::new(1, 10).unwrap();
    let rf = r.to_f64();
    let params = CenterParams::new(r, c, phi, DeltaRule::Aligned).unwrap();
    let config = CenterConfig {
        index: IndexConfig::default(),
        max_structures: setlsh::center::DEFAULT_STRUCTURE_CAP,
        multiplicity_cap: setlsh::slsh::DEFAULT_MULTIPLICITY_CAP,
        strict: false,
    };
    let probe =
        CenterStructure::build(vec![Point::zeros(d)], d, params.clone(), 0.05, 0, config).unwrap();
    let levels = probe.levels();
    let built = levels.iter().filter(|l| l.built).count();
    let worst = levels.iter().map(|l| l.tables).max().unwrap_or(0);
    let info = format!(
        "n={n} d={d} r={rf} c={c} phi={phi} delta={} levels={} materialized={built} max L needed={worst}",
        params.delta,
        levels.len()
    );
    let mut budget_errors = 0u32;
    let mut rec = recall_verdict(
        "9d",
        "planted recall: center euclid k=2",
        600,
        derive(seed, 94),
        100,
        info,
        |t, rng, audits, digest| {
            let mut pts: Vec<Point> = (0..n).map(|_| in_ball(rng, d, 1.0)).collect();
            let x = in_ball(rng, d, 0.5);
            let a = rng.random::<f64>() * (1.0 - phi) * rf;
            let u = unit(rng, d);
            let v = orthogonal(rng, &u);
            let h = ((0.9 * rf).powi(2) - a * a).max(0.0).sqrt() * rng.random::<f64>();
            let q1 = x.add(&u.scale(a)).unwrap().add(&v.scale(h)).unwrap();
            let q2 = x.sub(&u.scale(a)).unwrap().add(&v.scale(h)).unwrap();
            let q = SetQuery::new(vec![q1, q2]).unwrap();
            let planted = rng.random_range(0..n);
            pts[planted] = x;
            let s = CenterStructure::build(
                pts.clone(),
                d,
                params.clone(),
                0.05,
                derive(seed, 9400 + t),
                config,
            )
            .unwrap();
            match s.query(&q) {
                Ok(out) => {
                    write!(digest, "{:?};", out.hit.map(|h| (h.id, h.score))).unwrap();
                    match out.hit {
                        Some(h) => {
                            let exact = center_distance(&q, &pts[h.id]).unwrap();
                            audits.push(Audit {
                                part: "9d",
                                exact,
                                bar: c * rf,
                            });
                            exact <= c * rf
                        }
                        None => false,
                    }
                }
                Err(e) => {
                    write!(digest, "err;").unwrap();
                    if matches!(e, setlsh::Error::TableBudget { .. }) {
                        budget_errors += 1;
                    }
                    false
                }
            }
        },
    );
    write!(
        rec.verdict.summary,
        "; queries on unmaterialized levels: {budget_errors}"
    )
    .unwrap();
    rec
}

fn run_1_to_9(seed: u64) -> (Vec<Verdict>, Vec<Audit>) {
    let mut verdicts = vec![
        criterion_1(seed),
        criterion_2(seed),
        criterion_3(seed),
        criterion_4(seed),
        criterion_5(seed),
        criterion_6(seed),
        criterion_7(seed),
        criterion_8(seed),
    ];
    for v in &verdicts {
        v.print();
    }
    let mut audits = Vec::new();
    let start = Instant::now();
    let mut parts = Vec::new();
    for part in [criterion_9a, criterion_9b, criterion_9c, criterion_9d] {
        let rec = part(seed);
        rec.verdict.print();
        audits.extend(rec.audits);
        parts.push(rec.verdict);
    }
    let elapsed = start.elapsed();
    let all = parts.iter().all(|p| p.passed);
    let failed: Vec<&str> = parts.iter().filter(|p| !p.passed).map(|p| p.id).collect();
    let nine = Verdict {
        id: "9",
        title: "end-to-end planted recall",
        passed: all && elapsed <= Duration::from_secs(600),
        summary: if failed.is_empty() {
            "all parts pass".into()
        } else {
            format!("failing parts: {}", failed.join(", "))
        },
        digest: parts
            .iter()
            .map(|p| p.digest.as_str())
            .collect::<Vec<_>>()
            .join("|"),
        elapsed,
        limit: Duration::from_secs(600),
    };
    nine.print();
    verdicts.extend(parts);
    verdicts.push(nine);
    (verdicts, audits)
}

fn main() {
    println!("acceptance suite, seed {SEED:#x}");
    let (first, audits) = run_1_to_9(SEED);

    let start = Instant::now();
    let bad: Vec<&Audit> = audits.iter().filter(|a| !(a.exact <= a.bar)).collect();
    let ten = Verdict {
        id: "10",
        title: "no false positives",
        passed: bad.is_empty() && !audits.is_empty(),
        summary: format!(
            "{} returned answers re-scored, {} above bar{}",
            audits.len(),
            bad.len(),
            bad.first()
                .map(|a| format!(" (first: {} {} > {})", a.part, a.exact, a.bar))
                .unwrap_or_default()
        ),
        digest: String::new(),
        elapsed: start.elapsed(),
        limit: Duration::from_secs(1),
    };
    ten.print();

    println!("rerunning criteria 1-9 for reproducibility");
    let start = Instant::now();
    let (second, _) = run_1_to_9(SEED);
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a.digest != b.digest || a.summary != b.summary)
        .map(|(a, _)| a.id)
        .collect();
    let eleven = Verdict {
        id: "11",
        title: "reproducibility",
        passed: differing.is_empty(),
        summary: if differing.is_empty() {
            format!("{} reports identical across two runs", first.len())
        } else {
            format!("reports differ for: {}", differing.join(", "))
        },
        digest: String::new(),
        elapsed: start.elapsed(),
        limit: Duration::from_secs(1200),
    };
    eleven.print();

    let all: Vec<&Verdict> = first.iter().chain([&ten, &eleven]).collect();
    let failed: Vec<&str> = all.iter().filter(|v| !v.passed).map(|v| v.id).collect();
    println!(
        "summary: {} of {} criteria lines pass",
        all.len() - failed.len(),
        all.len()
    );
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}

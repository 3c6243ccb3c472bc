//! Property suites run by the `selftest` command.
//!
//! Every suite samples random instances from a seeded generator, checks one
//! invariant, and reports the number of violations. Monte Carlo suites use
//! 3-sigma bands and tolerate one violation per 50 instances; all other
//! suites tolerate none.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::center::{
    rigid_transform_to_canonical, CanonicalRegions, CenterParams, DeltaRule, C_MIN,
};
use crate::ellipsoid::{
    angular_axis_angle, angular_ellipsoid_distance, angular_to_wgeo_params, antipodal_pair_law,
    rotate_axis, AngularEllipsoidQuery, EllipsoidPlan,
};
use crate::error::Result;
use crate::family::{BaseFamily, HashFamily, Single};
use crate::hashes::{BitSample, Hyperplane, MinHash, SimpleAlsh};
use crate::lift::{beta, error_term, lifted_angle_formula, m_factor, shrink_lift};
use crate::metrics::{
    aggregate_similarity, angle, angular_similarity, BitVector, Point, Rational, SetQuery,
    SimilarityAggregation, TokenSet,
};
use crate::oracle::estimate_collision_probability;
use crate::rng::{derive, rng_for, DrawRng};
use crate::slsh::{centroid_transform, ip_sim_avg, ExhaustiveSlsh, ExpansionPlan, RepeatSlsh};

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checked: u64,
    pub violations: u64,
    pub allowed: u64,
    /// Worst observed case, for diagnostics.
    pub detail: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations <= self.allowed
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SelftestConfig {
    pub seed: u64,
    /// Trials per Monte Carlo instance.
    pub trials: u64,
    /// Samples for the deterministic geometric suites.
    pub samples: u64,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig {
            seed: 2024,
            trials: 20_000,
            samples: 10_000,
        }
    }
}

type Suite = fn(&SelftestConfig, &mut DrawRng) -> Result<SuiteReport>;

const SUITES: &[(&str, Suite)] = &[
    ("kernel_identities", kernel_identities),
    ("lift_unit_norm_injective", lift_unit_norm),
    ("lift_exact_angle", lift_exact_angle),
    ("lift_sandwich", lift_sandwich),
    ("inverse_sine_bound", inverse_sine_bound),
    ("axis_rotation_orthogonal", axis_rotation),
    ("axis_distortion_bracket", axis_distortion),
    ("antipodal_product_law", antipodal_law),
    ("wgeo_threshold_bracket", wgeo_bracket),
    ("weighted_expansion_identity", weighted_identity),
    ("centroid_identity", centroid_identity),
    ("ellipsoid_hierarchy", ellipsoid_hierarchy),
    ("quantized_sandwich", quantized_sandwich),
    ("rigid_transform_isometry", rigid_isometry),
    ("parameter_guarantees", parameter_guarantees),
    ("base_collision_laws", base_laws),
    ("slsh_collision_laws", slsh_laws),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).collect()
}

/// Runs every suite; an error inside a suite is reported as a failure.
pub fn run_all(cfg: &SelftestConfig) -> Vec<SuiteReport> {
    SUITES
        .iter()
        .enumerate()
        .map(|(i, (name, f))| {
            let mut rng = rng_for(derive(cfg.seed, i as u64));
            f(cfg, &mut rng).unwrap_or_else(|e| SuiteReport {
                name,
                checked: 0,
                violations: 1,
                allowed: 0,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}

struct Tally {
    name: &'static str,
    checked: u64,
    violations: u64,
    worst: f64,
    detail: String,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            checked: 0,
            violations: 0,
            worst: 0.0,
            detail: String::new(),
        }
    }

    /// Records one check; `excess > 0` is a violation.
    fn check(&mut self, excess: f64, what: impl FnOnce() -> String) {
        self.checked += 1;
        if excess > 0.0 || excess.is_nan() {
            self.violations += 1;
        }
        if excess > self.worst
            || (excess.is_nan() && !self.worst.is_nan())
            || self.detail.is_empty()
        {
            self.worst = excess;
            self.detail = what();
        }
    }

    fn finish(self, allowed: u64) -> SuiteReport {
        SuiteReport {
            name: self.name,
            checked: self.checked,
            violations: self.violations,
            allowed,
            detail: self.detail,
        }
    }
}

fn unit(rng: &mut DrawRng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn in_ball(rng: &mut DrawRng, d: usize) -> Point {
    let r: f64 = rng.random::<f64>().powf(1.0 / d as f64);
    Point::new(unit(rng, d).into_iter().map(|x| x * r).collect()).expect("finite")
}

fn on_sphere(rng: &mut DrawRng, d: usize) -> Point {
    Point::new(unit(rng, d)).expect("finite")
}

fn eps_sample(rng: &mut DrawRng, max: f64) -> f64 {
    (rng.random::<f64>() * max).max(1e-3)
}

fn kernel_identities(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("kernel_identities");
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..6);
        let x = in_ball(rng, d);
        let y = in_ball(rng, d);
        if x.norm() < 1e-9 || y.norm() < 1e-9 {
            continue;
        }
        let self_sim = (angular_similarity(&x, &x)? - 1.0).abs();
        t.check(self_sim - 1e-12, || format!("1 - sim(x, x) = {self_sim:e}"));
        let gap = (angular_similarity(&x, &y)? - (1.0 - angle(&x, &y)? / PI)).abs();
        t.check(gap - 1e-12, || format!("sim/angle mismatch {gap:e}"));
        let asym = (angle(&x, &y)? - angle(&y, &x)?).abs();
        t.check(asym, || format!("angle asymmetry {asym:e}"));
    }
    Ok(t.finish(0))
}

fn lift_unit_norm(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("lift_unit_norm_injective");
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..6);
        let eps = eps_sample(rng, 0.5);
        let x = in_ball(rng, d);
        let y = in_ball(rng, d);
        let (lx, ly) = (shrink_lift(&x, eps)?, shrink_lift(&y, eps)?);
        let off = (lx.norm() - 1.0).abs();
        t.check(off - 1e-12, || format!("lifted norm off by {off:e}"));
        let last = lx.coords()[d];
        t.check(-last, || format!("last coordinate {last}"));
        if x != y {
            let same = if lx == ly { 1.0 } else { -1.0 };
            t.check(same, || "distinct inputs collide".into());
        }
    }
    Ok(t.finish(0))
}

fn lift_exact_angle(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("lift_exact_angle");
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..6);
        let eps = eps_sample(rng, 0.5);
        let x = in_ball(rng, d);
        let y = in_ball(rng, d);
        let direct = angle(&shrink_lift(&x, eps)?, &shrink_lift(&y, eps)?)?;
        let formula = lifted_angle_formula(eps, &x, &y)?;
        let gap = (direct - formula).abs();
        t.check(gap - 1e-10, || {
            format!("|direct - formula| = {gap:e} at eps {eps}")
        });
        let e = error_term(eps, &x, &y)?;
        let dist2 = x.sub(&y)?.norm().powi(2);
        let over = e - (4.0 / 3.0 * dist2 * eps * eps + 1e-9);
        t.check(over.max(-e - 1e-12), || {
            format!("error term {e:e} outside [0, 4/3 |x-y|^2 eps^2]")
        });
    }
    Ok(t.finish(0))
}

fn lift_sandwich(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("lift_sandwich");
    for _ in 0..cfg.samples * 10 {
        let d = rng.random_range(1..6);
        let eps = eps_sample(rng, 0.5);
        let x = in_ball(rng, d);
        let y = in_ball(rng, d);
        let dist = x.sub(&y)?.norm();
        let theta = angle(&shrink_lift(&x, eps)?, &shrink_lift(&y, eps)?)?;
        let lo = eps * dist - 1e-9 - theta;
        t.check(lo, || format!("below lower bound by {lo:e}"));
        let hi = theta - (m_factor(eps)? * eps * dist + 1e-9);
        t.check(hi, || format!("above upper bound by {hi:e}"));
    }
    Ok(t.finish(0))
}

fn inverse_sine_bound(_cfg: &SelftestConfig, _rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("inverse_sine_bound");
    let steps = 100_000;
    for i in 0..=steps {
        let x = 0.999 * i as f64 / steps as f64;
        let s = x.asin();
        t.check(x - s, || format!("asin({x}) below x"));
        let upper = x / (1.0 - x * x).sqrt();
        t.check(s - upper, || format!("asin({x}) above x/sqrt(1-x^2)"));
    }
    Ok(t.finish(0))
}

fn axis_rotation(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("axis_rotation_orthogonal");
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..6);
        let eps = eps_sample(rng, 0.125);
        let p = in_ball(rng, d);
        let e = on_sphere(rng, d);
        let bar = rotate_axis(&e, &p, eps)?;
        let ip = bar.dot(&shrink_lift(&p, eps)?)?.abs();
        t.check(ip - 1e-9, || format!("|e_bar . p_up| = {ip:e}"));
        let off = (bar.norm() - 1.0).abs();
        t.check(off - 1e-9, || format!("axis norm off by {off:e}"));
    }
    Ok(t.finish(0))
}

fn axis_distortion(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("axis_distortion_bracket");
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..6);
        let eps = eps_sample(rng, 0.125);
        let p = in_ball(rng, d);
        let x = in_ball(rng, d);
        let i = rng.random_range(0..d);
        let e = Point::basis(d, i);
        let bar = rotate_axis(&e, &p, eps)?;
        let theta = angular_axis_angle(&bar, &shrink_lift(&x, eps)?)?;
        let diff = (x.coords()[i] - p.coords()[i]).abs();
        let b = beta(eps)?;
        let lo = (eps * (1.0 - eps) * (diff - b)).max(0.0) - 1e-9 - theta;
        t.check(lo, || format!("below bracket by {lo:e} (eps {eps})"));
        let hi = theta - (eps * (1.0 + eps) * (diff + b) + 1e-9);
        t.check(hi, || format!("above bracket by {hi:e} (eps {eps})"));
    }
    Ok(t.finish(0))
}

fn antipodal_law(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("antipodal_product_law");
    for _ in 0..cfg.samples {
        let d = rng.random_range(2..6);
        let e = on_sphere(rng, d);
        let x = on_sphere(rng, d);
        let q = SetQuery::new(vec![e.clone(), e.neg()])?;
        let direct = aggregate_similarity(
            SimilarityAggregation::Geometric,
            &q.similarities(crate::metrics::SimilarityKind::Angular, &x)?,
            None,
        )?;
        let gap = (direct - antipodal_pair_law(&e, &x)?).abs();
        t.check(gap - 1e-12, || format!("law gap {gap:e}"));
    }
    Ok(t.finish(0))
}

/// Orthonormal basis of the complement of unit vector `p`.
fn complement_basis(p: &Point) -> Vec<Point> {
    let d = p.dim();
    let mut basis: Vec<Vec<f64>> = vec![p.coords().to_vec()];
    for i in 0..d {
        let mut v: Vec<f64> = (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
        for b in &basis {
            let ip: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            v.iter_mut().zip(b).for_each(|(a, c)| *a -= ip * c);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-6 {
            basis.push(v.into_iter().map(|a| a / n).collect());
        }
        if basis.len() == d {
            break;
        }
    }
    basis
        .into_iter()
        .skip(1)
        .map(|v| Point::new(v).expect("finite"))
        .collect()
}

fn wgeo_bracket(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("wgeo_threshold_bracket");
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..4);
        let w: Vec<Rational> = (0..d)
            .map(|_| Rational::integer(rng.random_range(1..4)))
            .collect();
        let c = 1.0 + 3.0 * rng.random::<f64>() + 1e-3;
        let sw: f64 = w.iter().map(|x| x.to_f64()).sum();
        let psi = crate::ellipsoid::psi(c)?;
        let r = rng.random::<f64>() * sw * psi * psi / c.max(1.0) + 1e-6;
        let wp = angular_to_wgeo_params(r, c, &w)?;
        let p = on_sphere(rng, d + 1);
        let axes = complement_basis(&p);
        let u = {
            let coeffs = unit(rng, d);
            let mut v = vec![0.0; d + 1];
            for (a, k) in axes.iter().zip(coeffs) {
                v.iter_mut().zip(a.coords()).for_each(|(s, x)| *s += k * x);
            }
            v
        };
        let s = rng.random::<f64>() * psi;
        let x = Point::new(
            p.coords()
                .iter()
                .zip(&u)
                .map(|(a, b)| s.cos() * a + s.sin() * b)
                .collect(),
        )?;
        let q = AngularEllipsoidQuery::new(p, axes)?;
        let dist = angular_ellipsoid_distance(&q, &x, &w)?;
        let expanded = SetQuery::weighted(q.antipodal_expansion(), wp.weights.clone())?;
        let sim = aggregate_similarity(
            SimilarityAggregation::WeightedGeometric,
            &expanded.similarities(crate::metrics::SimilarityKind::Angular, &x)?,
            expanded.weights(),
        )?;
        if dist <= r {
            let gap = wp.s_prime - sim;
            t.check(gap - 1e-12 * wp.s_prime, || {
                format!("near point below S' by {gap:e}")
            });
        } else if dist > c * r {
            let gap = sim - wp.c_prime * wp.s_prime;
            t.check(gap + 1e-12 * wp.s_prime, || {
                format!("far point above c'S' by {gap:e}")
            });
        }
    }
    Ok(t.finish(0))
}

fn weighted_identity(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("weighted_expansion_identity");
    for _ in 0..cfg.samples / 10 {
        let k = rng.random_range(1..4);
        let d = rng.random_range(2..5);
        let w: Vec<Rational> = (0..k)
            .map(|_| Rational::new(rng.random_range(1..5), rng.random_range(1..5)))
            .collect::<Result<_>>()?;
        let plan = ExpansionPlan::new(&w, 4096)?;
        let pts: Vec<Point> = (0..k).map(|_| on_sphere(rng, d)).collect();
        let x = on_sphere(rng, d);
        let q = SetQuery::weighted(pts.clone(), w.clone())?;
        let kind = crate::metrics::SimilarityKind::Angular;
        let wgeo = aggregate_similarity(
            SimilarityAggregation::WeightedGeometric,
            &q.similarities(kind, &x)?,
            q.weights(),
        )?;
        let expanded = SetQuery::new(plan.expand(&pts)?)?;
        let geo = aggregate_similarity(
            SimilarityAggregation::Geometric,
            &expanded.similarities(kind, &x)?,
            None,
        )?;
        let gap = (geo - wgeo.powf(plan.m as f64)).abs();
        t.check(gap - 1e-12, || format!("gap {gap:e}"));
    }
    Ok(t.finish(0))
}

fn centroid_identity(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("centroid_identity");
    for _ in 0..cfg.samples {
        let k = rng.random_range(1..5);
        let d = rng.random_range(1..6);
        let q = SetQuery::new((0..k).map(|_| in_ball(rng, d)).collect())?;
        let x = in_ball(rng, d);
        let mu = centroid_transform(&q)?;
        let gap = (ip_sim_avg(&q, &x)? - mu.dot(&x)?).abs();
        t.check(gap - 1e-12, || format!("gap {gap:e}"));
    }
    Ok(t.finish(0))
}

fn ellipsoid_hierarchy(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("ellipsoid_hierarchy");
    let g = CanonicalRegions {
        a: 3.6,
        r: 6.0,
        c: 1.35,
    };
    let bx = g.c * g.r / C_MIN + g.a;
    let by = g.c * g.r / C_MIN;
    let tol = 1e-9;
    for _ in 0..cfg.samples * 10 {
        let x = (2.0 * rng.random::<f64>() - 1.0) * bx;
        let y = (2.0 * rng.random::<f64>() - 1.0) * by;
        let y2 = y * y;
        let bad = |inner: bool, outer: bool| if inner && !outer { 1.0 } else { -1.0 };
        t.check(
            bad(g.small_lens(x, y2, 0.0), g.small_ellipsoid(x, y2, tol)),
            || format!("L^s not in S at ({x}, {y})"),
        );
        t.check(
            bad(g.small_ellipsoid(x, y2, 0.0), g.big_ellipsoid(x, y2, tol)),
            || format!("S not in B at ({x}, {y})"),
        );
        t.check(
            bad(g.big_ellipsoid(x, y2, 0.0), g.big_lens(x, y2, tol)),
            || format!("B not in L^b at ({x}, {y})"),
        );
    }
    Ok(t.finish(0))
}

fn quantized_sandwich(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("quantized_sandwich");
    for _ in 0..cfg.samples / 10 {
        let r = Rational::new(rng.random_range(1..1000), 1000)?;
        let c = C_MIN + 0.05 + 2.0 * rng.random::<f64>();
        let phi = 0.05 + 0.9 * rng.random::<f64>();
        let params = CenterParams::new(r, c, phi, DeltaRule::Aligned)?;
        let (rf, delta) = (r.to_f64(), params.delta.to_f64());
        let a = rng.random::<f64>() * (1.0 - phi) * rf;
        let a_up = (a / delta).ceil() * delta;
        t.check(a_up - rf, || {
            format!("rounded separation {a_up} exceeds r {rf}")
        });
        let g = CanonicalRegions { a, r: rf, c };
        for _ in 0..10 {
            let x = (2.0 * rng.random::<f64>() - 1.0) * 2.0 * rf * c;
            let y = rng.random::<f64>() * 2.0 * rf * c;
            let y2 = y * y;
            let bad = |inner: bool, outer: bool| if inner && !outer { 1.0 } else { -1.0 };
            t.check(
                bad(
                    g.small_ellipsoid(x, y2, 0.0),
                    g.small_rounded(a_up, x, y2, 1e-9),
                ),
                || format!("S not in S+ (a {a}, a' {a_up}, r {rf})"),
            );
            t.check(
                bad(
                    g.big_rounded(a_up, x, y2, 0.0),
                    g.big_ellipsoid(x, y2, 1e-9),
                ),
                || format!("B- not in B (a {a}, a' {a_up}, r {rf})"),
            );
        }
    }
    Ok(t.finish(0))
}

fn rigid_isometry(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("rigid_transform_isometry");
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..6);
        let q1 = in_ball(rng, d);
        let q2 = in_ball(rng, d);
        let x = in_ball(rng, d);
        let y = in_ball(rng, d);
        let tr = rigid_transform_to_canonical(&q1, &q2)?;
        let (tx, ty) = (tr.apply(&x)?, tr.apply(&y)?);
        let gap = (tx.sub(&ty)?.norm() - x.sub(&y)?.norm()).abs();
        t.check(gap - 1e-12, || format!("distance changed by {gap:e}"));
        let a = tr.half_separation();
        let mut target = vec![0.0; d];
        target[0] = a;
        let e1 = tr.apply(&q1)?.sub(&Point::new(target.clone())?)?.norm();
        target[0] = -a;
        let e2 = tr.apply(&q2)?.sub(&Point::new(target)?)?.norm();
        t.check(e1.max(e2) - 1e-12, || {
            format!("query pair misplaced by {:e}", e1.max(e2))
        });
    }
    Ok(t.finish(0))
}

fn parameter_guarantees(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("parameter_guarantees");
    for _ in 0..cfg.samples / 100 {
        let d = rng.random_range(1..4);
        let w: Vec<Rational> = (0..d)
            .map(|_| Rational::integer(rng.random_range(1..3)))
            .collect();
        let r = 0.05 + 0.3 * rng.random::<f64>();
        let c = 1.5 + 3.0 * rng.random::<f64>();
        let plan = EllipsoidPlan::new(d, r, c, w, 1 << 20)?;
        t.check(plan.p2 - plan.p1, || {
            format!("p2 {} >= p1 {}", plan.p2, plan.p1)
        });
        t.check(1.0 - plan.c_angular, || {
            format!("c' = {} not above 1", plan.c_angular)
        });
        let rho = plan.p1.ln() / plan.p2.ln();
        t.check(rho - 1.0, || format!("rho = {rho} not below 1"));
        let lp = crate::lift::avg_euclid_slsh_params(r, c)?;
        t.check(1.0 - lp.c_prime, || {
            format!("average euclidean c' = {}", lp.c_prime)
        });
    }
    Ok(t.finish(0))
}

/// Counts 3-sigma band violations of `estimate` against `law` over instances.
fn law_check<F: HashFamily>(
    t: &mut Tally,
    family: &F,
    q: &F::Query,
    x: &F::Point,
    law: f64,
    trials: u64,
    seed: u64,
) -> Result<()> {
    let est = estimate_collision_probability(family, q, x, trials, seed)?;
    let sigma = (law * (1.0 - law) / trials as f64).sqrt();
    let gap = (est.estimate - law).abs() - 3.0 * sigma;
    t.check(gap, || format!("estimate {} vs law {law}", est.estimate));
    Ok(())
}

fn random_bits(rng: &mut DrawRng, flip: f64, base: &[bool]) -> BitVector {
    BitVector::new(
        base.iter()
            .map(|&b| if rng.random::<f64>() < flip { !b } else { b })
            .collect(),
    )
    .expect("non-empty")
}

fn random_tokens(rng: &mut DrawRng, universe: u64, keep: f64, base: &[u64]) -> TokenSet {
    let mut out: Vec<u64> = base
        .iter()
        .copied()
        .filter(|_| rng.random::<f64>() < keep)
        .collect();
    out.push(rng.random_range(0..universe));
    TokenSet::new(out, universe).expect("tokens in range")
}

fn base_laws(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("base_collision_laws");
    let trials = cfg.trials;
    let mut seed = cfg.seed;
    let mut next = || {
        seed = derive(seed, 1);
        seed
    };
    let (hp, bs, mh, al) = (
        Hyperplane::new(5)?,
        BitSample::new(32)?,
        MinHash::new(256)?,
        SimpleAlsh::new(4)?,
    );
    for _ in 0..12 {
        let x = on_sphere(rng, 5);
        let y = Point::new(
            x.coords()
                .iter()
                .map(|v| v + 0.8 * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        )?;
        law_check(
            &mut t,
            &Single(hp.clone()),
            &x,
            &y,
            hp.collision_law(&x, &y)?,
            trials,
            next(),
        )?;

        let b: Vec<bool> = (0..32).map(|_| rng.random()).collect();
        let bx = random_bits(rng, 0.0, &b);
        let flip = rng.random::<f64>() * 0.5;
        let by = random_bits(rng, flip, &b);
        law_check(
            &mut t,
            &Single(bs.clone()),
            &bx,
            &by,
            bs.collision_law(&bx, &by)?,
            trials,
            next(),
        )?;

        let base: Vec<u64> = (0..20).map(|_| rng.random_range(0..256)).collect();
        let tx = random_tokens(rng, 256, 0.9, &base);
        let keep = rng.random::<f64>();
        let ty = random_tokens(rng, 256, keep, &base);
        law_check(
            &mut t,
            &Single(mh.clone()),
            &tx,
            &ty,
            mh.collision_law(&tx, &ty)?,
            trials,
            next(),
        )?;

        let aq = in_ball(rng, 4);
        let ax = in_ball(rng, 4);
        law_check(
            &mut t,
            &Single(al.clone()),
            &aq,
            &ax,
            al.collision_law(&aq, &ax)?,
            trials,
            next(),
        )?;
    }
    let allowed = (t.checked / 50).max(1);
    Ok(t.finish(allowed))
}

fn slsh_laws(cfg: &SelftestConfig, rng: &mut DrawRng) -> Result<SuiteReport> {
    let mut t = Tally::new("slsh_collision_laws");
    let trials = cfg.trials;
    let mut seed = cfg.seed ^ 0xABCD;
    let mut next = || {
        seed = derive(seed, 2);
        seed
    };
    let hp = Hyperplane::new(4)?;
    let kind = crate::metrics::SimilarityKind::Angular;
    for _ in 0..8 {
        let k = rng.random_range(1..4);
        let center = on_sphere(rng, 4);
        let jitter = |rng: &mut DrawRng| {
            Point::new(
                center
                    .coords()
                    .iter()
                    .map(|v| v + 0.5 * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            )
            .expect("finite")
        };
        let q = SetQuery::new((0..k).map(|_| jitter(rng)).collect())?;
        let x = jitter(rng);
        for p in 1..=3usize {
            let fam = RepeatSlsh::new(hp.clone(), p)?;
            let law = q
                .similarities(kind, &x)?
                .iter()
                .map(|s| s.powi(p as i32))
                .sum::<f64>()
                / k as f64;
            law_check(&mut t, &fam, &q, &x, law, trials, next())?;
        }
        let fam = ExhaustiveSlsh::new(hp.clone(), k)?;
        let law: f64 = q.similarities(kind, &x)?.iter().product();
        law_check(&mut t, &fam, &q, &x, law, trials, next())?;
        let avg_angle = q
            .points()
            .iter()
            .map(|a| angle(a, &x))
            .sum::<Result<f64>>()?
            / k as f64;
        let fam = RepeatSlsh::new(hp.clone(), 1)?;
        law_check(&mut t, &fam, &q, &x, 1.0 - avg_angle / PI, trials, next())?;
    }
    let allowed = (t.checked / 50).max(1);
    Ok(t.finish(allowed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_on_small_budget() {
        let cfg = SelftestConfig {
            seed: 7,
            trials: 4000,
            samples: 500,
        };
        for r in run_all(&cfg) {
            assert!(
                r.passed(),
                "{} failed: {} violations, {}",
                r.name,
                r.violations,
                r.detail
            );
            assert!(r.checked > 0, "{} checked nothing", r.name);
        }
    }

    #[test]
    fn names_are_unique() {
        let mut names = suite_names();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), SUITES.len());
    }
}

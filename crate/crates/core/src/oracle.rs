//! Ground-truth helpers: brute force search and Monte Carlo collision rates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::HashFamily;
use crate::index::Objective;
use crate::rng::derive;

/// Smallest trial count accepted by [`estimate_collision_probability`].
pub const MIN_TRIALS: u64 = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEstimate {
    pub estimate: f64,
    pub trials: u64,
    /// `3 sqrt(p(1-p)/N)` at the estimate.
    pub half_width: f64,
}

impl CollisionEstimate {
    pub fn from_counts(hits: u64, trials: u64) -> Result<Self> {
        if trials == 0 || hits > trials {
            return Err(Error::param(
                "trials",
                "need 0 <= hits <= trials and trials >= 1",
            ));
        }
        let estimate = hits as f64 / trials as f64;
        Ok(CollisionEstimate {
            estimate,
            trials,
            half_width: 3.0 * (estimate * (1.0 - estimate) / trials as f64).sqrt(),
        })
    }

    /// Whether `p` lies in the band around the estimate.
    pub fn contains(&self, p: f64) -> bool {
        (p - self.estimate).abs() <= self.half_width
    }

    /// Whether the estimate lies within `k` binomial standard deviations of
    /// the analytic probability `p`.
    pub fn within_sigma(&self, p: f64, k: f64) -> bool {
        let sigma = (p * (1.0 - p) / self.trials as f64).max(0.0).sqrt();
        (self.estimate - p).abs() <= k * sigma + 1e-12
    }
}

/// Fraction of `trials` sampled function pairs under which `q` and `x` collide.
pub fn estimate_collision_probability<F: HashFamily>(
    family: &F,
    q: &F::Query,
    x: &F::Point,
    trials: u64,
    seed: u64,
) -> Result<CollisionEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::param(
            "trials",
            format!("need at least {MIN_TRIALS}"),
        ));
    }
    let hits = (0..trials)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(a, b), t| -> Result<u64> {
                let f = family.sample(derive(seed, t));
                a.clear();
                b.clear();
                family.hash_query(&f, q, a)?;
                family.hash_point(&f, x, b)?;
                Ok(u64::from(a == b))
            },
        )
        .try_reduce(|| 0, |u, v| Ok(u + v))?;
    CollisionEstimate::from_counts(hits, trials)
}

/// Exact best point by full scan; ties go to the lowest identifier.
pub fn brute_force_best<Q, X, O>(points: &[X], objective: &O, q: &Q) -> Result<(usize, f64)>
where
    O: Objective<Q, X>,
{
    let direction = objective.direction();
    let mut best: Option<(usize, f64)> = None;
    for (i, x) in points.iter().enumerate() {
        let v = objective.score(q, x)?;
        if best.is_none_or(|(_, b)| direction.better(v, b)) {
            best = Some((i, v));
        }
    }
    best.ok_or(Error::Empty("dataset"))
}

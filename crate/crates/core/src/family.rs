//! Hash family abstractions.
//!
//! A family is a seeded sampler: `sample(draw)` returns the function pair
//! identified by `draw`. Symbols are `u64` tokens; two inputs collide under a
//! function when their full symbol sequences are equal.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{Element, Rational};

/// Serializable identity of a base family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseDescriptor {
    Hyperplane { dim: usize },
    BitSample { dim: usize },
    MinHash { universe: u64 },
    SimpleAlsh { dim: usize },
}

/// Serializable identity of a (possibly set-query) family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "snake_case")]
pub enum FamilyDescriptor {
    Single {
        base: BaseDescriptor,
    },
    Repeat {
        base: BaseDescriptor,
        p: usize,
        k: Option<usize>,
    },
    Exhaustive {
        base: BaseDescriptor,
        k: usize,
    },
    WeightedExhaustive {
        base: BaseDescriptor,
        weights: Vec<Rational>,
    },
    Centroid {
        dim: usize,
    },
}

/// A point-level family whose collision probability is a known similarity.
///
/// Symmetric families return the same symbol from both sides.
pub trait BaseFamily: Clone + Send + Sync + fmt::Debug {
    type Elem: Element;
    type Func: Send + Sync;

    fn sample(&self, draw: u64) -> Self::Func;

    /// Bits needed to encode one symbol.
    fn symbol_bits(&self) -> u32;

    fn query_symbol(&self, f: &Self::Func, q: &Self::Elem) -> Result<u64>;

    fn point_symbol(&self, f: &Self::Func, x: &Self::Elem) -> Result<u64>;

    /// `Pr[f(q) = g(x)]` over a random draw.
    fn collision_law(&self, q: &Self::Elem, x: &Self::Elem) -> Result<f64>;

    fn is_symmetric(&self) -> bool {
        true
    }

    fn descriptor(&self) -> BaseDescriptor;
}

/// A family usable by the multi-table index.
pub trait HashFamily: Send + Sync {
    type Query: Sync;
    type Point: Send + Sync;
    type Function: Send + Sync;

    fn sample(&self, draw: u64) -> Self::Function;

    /// Symbols emitted per function on either side.
    fn width(&self) -> usize;

    fn symbol_bits(&self) -> u32;

    /// Appends exactly `width()` symbols.
    fn hash_query(&self, f: &Self::Function, q: &Self::Query, out: &mut Vec<u64>) -> Result<()>;

    /// Appends exactly `width()` symbols.
    fn hash_point(&self, f: &Self::Function, x: &Self::Point, out: &mut Vec<u64>) -> Result<()>;

    /// Analytic collision probability of one sampled function.
    fn collision_law(&self, q: &Self::Query, x: &Self::Point) -> Result<f64>;

    fn descriptor(&self) -> FamilyDescriptor;
}

/// A base family used directly, with point queries.
#[derive(Clone, Debug)]
pub struct Single<B>(pub B);

impl<B: BaseFamily> HashFamily for Single<B> {
    type Query = B::Elem;
    type Point = B::Elem;
    type Function = B::Func;

    fn sample(&self, draw: u64) -> B::Func {
        self.0.sample(draw)
    }

    fn width(&self) -> usize {
        1
    }

    fn symbol_bits(&self) -> u32 {
        self.0.symbol_bits()
    }

    fn hash_query(&self, f: &B::Func, q: &B::Elem, out: &mut Vec<u64>) -> Result<()> {
        out.push(self.0.query_symbol(f, q)?);
        Ok(())
    }

    fn hash_point(&self, f: &B::Func, x: &B::Elem, out: &mut Vec<u64>) -> Result<()> {
        out.push(self.0.point_symbol(f, x)?);
        Ok(())
    }

    fn collision_law(&self, q: &B::Elem, x: &B::Elem) -> Result<f64> {
        self.0.collision_law(q, x)
    }

    fn descriptor(&self) -> FamilyDescriptor {
        FamilyDescriptor::Single {
            base: self.0.descriptor(),
        }
    }
}

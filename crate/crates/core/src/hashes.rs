//! Base hash families.
//!
//! | family        | input       | collision law            |
//! |---------------|-------------|--------------------------|
//! | [`Hyperplane`]| dense point | angular similarity       |
//! | [`BitSample`] | bit vector  | hamming similarity       |
//! | [`MinHash`]   | token set   | jaccard similarity       |
//! | [`SimpleAlsh`]| unit ball   | `1 - acos(q.x)/pi`       |

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::family::{BaseDescriptor, BaseFamily};
use crate::metrics::{
    angular_similarity, dot, hamming_similarity, norm_sq, sqrt_clamped, BitVector, Point, TokenSet,
};
use crate::rng::{gaussian_vec, mix64, rng_for};

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `sign(r.x)` encoded as 1 for `+` (including zero) and 0 for `-`.
#[inline]
fn sign_symbol(v: f64) -> u64 {
    u64::from(v >= 0.0)
}

/// Random hyperplane (SimHash) family over `R^dim`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hyperplane {
    dim: usize,
}

impl Hyperplane {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        Ok(Hyperplane { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Symbol of `x` under normal vector `r`, without a dimension check.
    #[inline]
    pub(crate) fn symbol_raw(r: &[f64], x: &[f64]) -> u64 {
        sign_symbol(dot(r, x))
    }
}

impl BaseFamily for Hyperplane {
    type Elem = Point;
    type Func = Vec<f64>;

    fn sample(&self, draw: u64) -> Vec<f64> {
        gaussian_vec(&mut rng_for(draw), self.dim)
    }

    fn symbol_bits(&self) -> u32 {
        1
    }

    fn query_symbol(&self, f: &Vec<f64>, q: &Point) -> Result<u64> {
        self.point_symbol(f, q)
    }

    fn point_symbol(&self, f: &Vec<f64>, x: &Point) -> Result<u64> {
        check_dim(self.dim, x.dim())?;
        Ok(Self::symbol_raw(f, x.coords()))
    }

    fn collision_law(&self, q: &Point, x: &Point) -> Result<f64> {
        angular_similarity(q, x)
    }

    fn descriptor(&self) -> BaseDescriptor {
        BaseDescriptor::Hyperplane { dim: self.dim }
    }
}

/// Random coordinate family over bit vectors of length `dim`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitSample {
    dim: usize,
}

impl BitSample {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        Ok(BitSample { dim })
    }
}

impl BaseFamily for BitSample {
    type Elem = BitVector;
    type Func = usize;

    fn sample(&self, draw: u64) -> usize {
        rng_for(draw).random_range(0..self.dim)
    }

    fn symbol_bits(&self) -> u32 {
        1
    }

    fn query_symbol(&self, f: &usize, q: &BitVector) -> Result<u64> {
        self.point_symbol(f, q)
    }

    fn point_symbol(&self, f: &usize, x: &BitVector) -> Result<u64> {
        check_dim(self.dim, x.len())?;
        Ok(u64::from(x.bit(*f)))
    }

    fn collision_law(&self, q: &BitVector, x: &BitVector) -> Result<f64> {
        hamming_similarity(q, x)
    }

    fn descriptor(&self) -> BaseDescriptor {
        BaseDescriptor::BitSample { dim: self.dim }
    }
}

/// MinHash over token sets drawn from `[0, universe)`.
///
/// The permutation is a keyed composition of bijections on `u64`, so distinct
/// tokens never share a rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinHash {
    universe: u64,
}

/// Keys of one sampled MinHash permutation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MinHashKeys {
    k0: u64,
    k1: u64,
}

impl MinHashKeys {
    /// Rank of token `t`; a bijection of `u64` for fixed keys.
    #[inline]
    pub fn rank(&self, t: u64) -> u64 {
        mix64(mix64(t ^ self.k0).wrapping_add(self.k1))
    }
}

impl MinHash {
    pub fn new(universe: u64) -> Result<Self> {
        if universe == 0 {
            return Err(Error::param("universe", "must be at least 1"));
        }
        Ok(MinHash { universe })
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }
}

impl BaseFamily for MinHash {
    type Elem = TokenSet;
    type Func = MinHashKeys;

    fn sample(&self, draw: u64) -> MinHashKeys {
        let mut rng = rng_for(draw);
        MinHashKeys {
            k0: rng.random(),
            k1: rng.random(),
        }
    }

    fn symbol_bits(&self) -> u32 {
        (64 - (self.universe - 1).leading_zeros()).max(1)
    }

    fn query_symbol(&self, f: &MinHashKeys, q: &TokenSet) -> Result<u64> {
        self.point_symbol(f, q)
    }

    fn point_symbol(&self, f: &MinHashKeys, x: &TokenSet) -> Result<u64> {
        if x.universe() != self.universe {
            return Err(Error::DimensionMismatch {
                expected: self.universe as usize,
                got: x.universe() as usize,
            });
        }
        x.iter()
            .min_by_key(|&t| f.rank(t))
            .ok_or(Error::Empty("minhash input set"))
    }

    fn collision_law(&self, q: &TokenSet, x: &TokenSet) -> Result<f64> {
        if q.is_empty() || x.is_empty() {
            return Err(Error::Empty("minhash input set"));
        }
        Ok(q.jaccard(x))
    }

    fn descriptor(&self) -> BaseDescriptor {
        BaseDescriptor::MinHash {
            universe: self.universe,
        }
    }
}

/// Asymmetric inner-product family over the unit ball of `R^dim`.
///
/// Points lift to `(x; sqrt(1-|x|^2); 0)`, queries to `(q; 0; sqrt(1-|q|^2))`,
/// and both are hashed by one hyperplane in `R^(dim+2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleAlsh {
    dim: usize,
}

impl SimpleAlsh {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        Ok(SimpleAlsh { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn lifted_dot(&self, r: &[f64], v: &Point, slot: usize) -> Result<f64> {
        check_dim(self.dim, v.dim())?;
        v.check_unit_ball()?;
        let tail = sqrt_clamped(1.0 - norm_sq(v.coords()));
        Ok(dot(&r[..self.dim], v.coords()) + r[self.dim + slot] * tail)
    }
}

impl BaseFamily for SimpleAlsh {
    type Elem = Point;
    type Func = Vec<f64>;

    fn sample(&self, draw: u64) -> Vec<f64> {
        gaussian_vec(&mut rng_for(draw), self.dim + 2)
    }

    fn symbol_bits(&self) -> u32 {
        1
    }

    fn query_symbol(&self, f: &Vec<f64>, q: &Point) -> Result<u64> {
        Ok(sign_symbol(self.lifted_dot(f, q, 1)?))
    }

    fn point_symbol(&self, f: &Vec<f64>, x: &Point) -> Result<u64> {
        Ok(sign_symbol(self.lifted_dot(f, x, 0)?))
    }

    fn collision_law(&self, q: &Point, x: &Point) -> Result<f64> {
        check_dim(self.dim, q.dim())?;
        q.check_unit_ball()?;
        x.check_unit_ball()?;
        let ip = q.dot(x)?.clamp(-1.0, 1.0);
        Ok(1.0 - ip.acos() / PI)
    }

    fn is_symmetric(&self) -> bool {
        false
    }

    fn descriptor(&self) -> BaseDescriptor {
        BaseDescriptor::SimpleAlsh { dim: self.dim }
    }
}

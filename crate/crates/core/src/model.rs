//! Input atoms of pointer jumping and the combinatorics built on them.
//!
//! All positions, vertices and layers are 1-indexed. An instance with `k`
//! players is the tuple `(start, f_2, .., f_{k-1}, x)`: `start` picks a layer-1
//! vertex, `f_j` maps layer `j-1` to layer `j`, and `x` labels layer `k-1`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid bit character {0:?}, expected '0' or '1'")]
    InvalidBit(char),
    #[error("pointer value {value} at position {position} is outside [1, {n}]")]
    PointerOutOfRange { position: usize, value: usize, n: usize },
    #[error("layer {layer} is outside [1, {max}]")]
    LayerOutOfRange { layer: usize, max: usize },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

/// Read access to a (possibly partially materialised) pointer-jumping input.
///
/// Protocols only ever see inputs through this trait, which lets the
/// exhaustive checkers observe exactly which coordinates a run depends on.
pub trait InputSource {
    fn n(&self) -> usize;
    fn k(&self) -> usize;
    fn start(&self) -> usize;
    /// `f_layer(v)` for `layer` in `2..=k-1`.
    fn pointer(&self, layer: usize, v: usize) -> usize;
    /// `x^{(v)}`.
    fn bit(&self, v: usize) -> bool;

    /// Vertex reached on `to_layer` when starting from `vertex` on `from_layer`.
    fn follow(&self, from_layer: usize, vertex: usize, to_layer: usize) -> usize {
        (from_layer + 1..=to_layer).fold(vertex, |v, layer| self.pointer(layer, v))
    }

    /// Vertex reached on `layer` from the start pointer.
    fn vertex_at(&self, layer: usize) -> usize {
        self.follow(1, self.start(), layer)
    }
}

/// Fixed-length string over {0,1}; position 1 is leftmost.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn ones(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    /// The `index`-th string of length `n` in lexicographic order
    /// (position 1 is the most significant bit).
    pub fn from_index(n: usize, index: u64) -> Self {
        debug_assert!(n <= 64);
        let bits = (1..=n).map(|pos| (index >> (n - pos)) & 1 == 1).collect();
        Self { bits }
    }

    /// Inverse of [`BitString::from_index`].
    pub fn to_index(&self) -> u64 {
        debug_assert!(self.len() <= 64);
        self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bit at 1-indexed position `pos`.
    pub fn get(&self, pos: usize) -> bool {
        self.bits[pos - 1]
    }

    pub fn set(&mut self, pos: usize, value: bool) {
        self.bits[pos - 1] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// The first `len` bits.
    pub fn prefix(&self, len: usize) -> BitString {
        Self { bits: self.bits[..len].to_vec() }
    }

    /// The string `self ∘ f`, i.e. position `s` holds `self^{(f(s))}`.
    pub fn compose(&self, f: &PointerFn) -> Result<BitString, ModelError> {
        if f.len() != self.len() {
            return Err(ModelError::LengthMismatch { left: self.len(), right: f.len() });
        }
        Ok(Self { bits: f.values().iter().map(|&v| self.get(v)).collect() })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self { bits: (0..n).map(|_| rng.gen()).collect() }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for BitString {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(ModelError::InvalidBit(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString::new)
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Total function `[n] -> [n]`, stored as its 1-indexed value table.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PointerFn {
    table: Vec<usize>,
}

impl PointerFn {
    pub fn new(table: Vec<usize>) -> Result<Self, ModelError> {
        let n = table.len();
        if let Some((i, &v)) = table.iter().enumerate().find(|(_, &v)| v == 0 || v > n) {
            return Err(ModelError::PointerOutOfRange { position: i + 1, value: v, n });
        }
        Ok(Self { table })
    }

    pub fn identity(n: usize) -> Self {
        Self { table: (1..=n).collect() }
    }

    pub fn constant(n: usize, value: usize) -> Result<Self, ModelError> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn apply(&self, v: usize) -> usize {
        self.table[v - 1]
    }

    pub fn values(&self) -> &[usize] {
        &self.table
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self { table: (0..n).map(|_| rng.gen_range(1..=n)).collect() }
    }
}

impl TryFrom<Vec<usize>> for PointerFn {
    type Error = ModelError;

    fn try_from(table: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(table)
    }
}

impl From<PointerFn> for Vec<usize> {
    fn from(f: PointerFn) -> Self {
        f.table
    }
}

impl fmt::Debug for PointerFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.table.fmt(f)
    }
}

/// One complete input `(start, f_2, .., f_{k-1}, x)`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    n: usize,
    k: usize,
    start: usize,
    middles: Vec<PointerFn>,
    x: BitString,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    n: usize,
    k: usize,
    start: usize,
    middles: Vec<PointerFn>,
    x: BitString,
}

impl TryFrom<RawInstance> for Instance {
    type Error = ModelError;

    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        let inst = Instance::new(raw.start, raw.middles, raw.x)?;
        if inst.n != raw.n || inst.k != raw.k {
            return Err(ModelError::InvalidInstance(format!(
                "declared (n={}, k={}) but pieces give (n={}, k={})",
                raw.n, raw.k, inst.n, inst.k
            )));
        }
        Ok(inst)
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance { n: inst.n, k: inst.k, start: inst.start, middles: inst.middles, x: inst.x }
    }
}

impl Instance {
    /// Builds an instance; `n` is the length of `x` and `k = middles.len() + 2`.
    pub fn new(start: usize, middles: Vec<PointerFn>, x: BitString) -> Result<Self, ModelError> {
        let n = x.len();
        if n == 0 {
            return Err(ModelError::InvalidInstance("n must be at least 1".into()));
        }
        if start == 0 || start > n {
            return Err(ModelError::InvalidInstance(format!("start {start} outside [1, {n}]")));
        }
        if let Some(f) = middles.iter().find(|f| f.len() != n) {
            return Err(ModelError::LengthMismatch { left: n, right: f.len() });
        }
        Ok(Self { n, k: middles.len() + 2, start, middles, x })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// `f_2, .., f_{k-1}`.
    pub fn middles(&self) -> &[PointerFn] {
        &self.middles
    }

    /// `f_layer` for `layer` in `2..=k-1`.
    pub fn middle(&self, layer: usize) -> &PointerFn {
        &self.middles[layer - 2]
    }

    pub fn x(&self) -> &BitString {
        &self.x
    }

    /// Same start and middles, different final string.
    pub fn with_x(&self, x: BitString) -> Result<Self, ModelError> {
        if x.len() != self.n {
            return Err(ModelError::LengthMismatch { left: self.n, right: x.len() });
        }
        Ok(Self { x, ..self.clone() })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Self {
        assert!(n >= 1 && k >= 2);
        let start = rng.gen_range(1..=n);
        let middles = (2..k).map(|_| PointerFn::random(n, rng)).collect();
        let x = BitString::random(n, rng);
        Self { n, k, start, middles, x }
    }
}

impl InputSource for Instance {
    fn n(&self) -> usize {
        self.n
    }

    fn k(&self) -> usize {
        self.k
    }

    fn start(&self) -> usize {
        self.start
    }

    fn pointer(&self, layer: usize, v: usize) -> usize {
        self.middles[layer - 2].apply(v)
    }

    fn bit(&self, v: usize) -> bool {
        self.x.get(v)
    }
}

/// Value of pointer jumping on `input`: follow `start` through every middle
/// layer and read the label on layer `k-1`.
pub fn evaluate<S: InputSource + ?Sized>(input: &S) -> bool {
    let mut v = input.start();
    for layer in 2..input.k() {
        v = input.pointer(layer, v);
    }
    input.bit(v)
}

/// The layer-`layer` labelling `x ∘ f_{k-1} ∘ .. ∘ f_{layer+1}`.
pub fn compose_suffix(inst: &Instance, layer: usize) -> Result<BitString, ModelError> {
    if layer == 0 || layer >= inst.k() {
        return Err(ModelError::LayerOutOfRange { layer, max: inst.k() - 1 });
    }
    inst.middles[layer - 1..]
        .iter()
        .rev()
        .try_fold(inst.x.clone(), |acc, f| acc.compose(f))
}

fn check_lengths(x: &BitString, y: &BitString) -> Result<(), ModelError> {
    if x.len() != y.len() {
        return Err(ModelError::LengthMismatch { left: x.len(), right: y.len() });
    }
    Ok(())
}

/// Strict coordinatewise order: `x <= y` everywhere and `x != y`.
pub fn dominance_less(x: &BitString, y: &BitString) -> Result<bool, ModelError> {
    check_lengths(x, y)?;
    Ok(x != y && x.iter().zip(y.iter()).all(|(a, b)| a <= b))
}

/// Positions of `[n]` grouped by the bit pattern `(x^{(j)}, y^{(j)})`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IndexPartition {
    pub i00: Vec<usize>,
    pub i01: Vec<usize>,
    pub i10: Vec<usize>,
    pub i11: Vec<usize>,
}

impl IndexPartition {
    pub fn class(&self, a: bool, b: bool) -> &[usize] {
        match (a, b) {
            (false, false) => &self.i00,
            (false, true) => &self.i01,
            (true, false) => &self.i10,
            (true, true) => &self.i11,
        }
    }

    /// Smallest index of class `(a, b)`.
    pub fn representative(&self, a: bool, b: bool) -> Option<usize> {
        self.class(a, b).first().copied()
    }

    pub fn is_crossing(&self) -> bool {
        !(self.i00.is_empty() || self.i01.is_empty() || self.i10.is_empty() || self.i11.is_empty())
    }
}

pub fn index_partition(x: &BitString, y: &BitString) -> Result<IndexPartition, ModelError> {
    check_lengths(x, y)?;
    let mut part = IndexPartition::default();
    for (j, (a, b)) in x.iter().zip(y.iter()).enumerate() {
        let class = match (a, b) {
            (false, false) => &mut part.i00,
            (false, true) => &mut part.i01,
            (true, false) => &mut part.i10,
            (true, true) => &mut part.i11,
        };
        class.push(j + 1);
    }
    Ok(part)
}

pub fn is_crossing(x: &BitString, y: &BitString) -> Result<bool, ModelError> {
    Ok(index_partition(x, y)?.is_crossing())
}

/// `i` zeros followed by `n - i` ones.
pub fn chain_string(n: usize, i: usize) -> BitString {
    assert!(i <= n, "chain index {i} exceeds length {n}");
    BitString::new((1..=n).map(|pos| pos > i).collect())
}

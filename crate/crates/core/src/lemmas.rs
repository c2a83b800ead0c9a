//! Collision finders and the fooling-pair extension steps.
//!
//! A *j-fooling state* fixes the prefix `start = f_1, f_2, .., f_j` together
//! with the messages `α_1..α_j` of the first `j` players. It also holds two
//! layer-`j` strings `(x, y)` consistent with both while disagreeing at the
//! vertex `v_j` the prefix leads to. Each extension step
//! picks two layer-`(j+1)` strings the next player cannot tell apart and a
//! pointer function `f_{j+1}` with `x = x1 ∘ f_{j+1}` and `y = y1 ∘ f_{j+1}`,
//! which keeps every earlier player's view unchanged.
//!
//! All searches walk their candidate space in a fixed order and return the
//! first hit, so results are reproducible.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{chain_budget_bound, crossing_budget_cap, fits, pinned_budget_cap};
use crate::model::{
    chain_string, dominance_less, index_partition, is_crossing, BitString, IndexPartition,
    InputSource, ModelError, PointerFn,
};
use crate::protocol::{PlayerView, ProtocolDef, ProtocolError, ViewModel};

/// Largest `n` for which the exhaustive `2^n` scans are attempted.
pub const MAX_SCAN_BITS: usize = 30;

#[derive(Debug, Error)]
pub enum LemmaError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no collision found by {search} search (n={n}, budget={budget})")]
    NoCollision { search: &'static str, n: usize, budget: usize },
    #[error("invariant broken: {0}")]
    Invariant(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A player's message as a function of its composed suffix alone, everything
/// else being frozen.
pub trait MessageOracle {
    fn budget(&self) -> usize;
    fn message(&self, input: &BitString) -> Result<BitString, LemmaError>;
}

/// Wraps a closure as a [`MessageOracle`], checking output lengths.
pub struct FnOracle<F> {
    budget: usize,
    f: F,
}

impl<F: Fn(&BitString) -> BitString> FnOracle<F> {
    pub fn new(budget: usize, f: F) -> Self {
        Self { budget, f }
    }
}

impl<F: Fn(&BitString) -> BitString> MessageOracle for FnOracle<F> {
    fn budget(&self) -> usize {
        self.budget
    }

    fn message(&self, input: &BitString) -> Result<BitString, LemmaError> {
        let out = (self.f)(input);
        if out.len() != self.budget {
            return Err(LemmaError::Invariant(format!(
                "oracle returned {} bits, budget is {}",
                out.len(),
                self.budget
            )));
        }
        Ok(out)
    }
}

/// Input seen by a collapsing player when only the prefix `f_2..f_m` and one
/// string `top` above it are known. Layers past the prefix act as the
/// identity, so the composed suffix of player `m+1` is exactly `top`.
struct StageInput<'a> {
    k: usize,
    start: usize,
    middles: &'a [PointerFn],
    top: &'a BitString,
}

impl InputSource for StageInput<'_> {
    fn n(&self) -> usize {
        self.top.len()
    }

    fn k(&self) -> usize {
        self.k
    }

    fn start(&self) -> usize {
        self.start
    }

    fn pointer(&self, layer: usize, v: usize) -> usize {
        self.middles.get(layer - 2).map_or(v, |f| f.apply(v))
    }

    fn bit(&self, v: usize) -> bool {
        self.top.get(v)
    }
}

/// Message of collapsing player `player` (speaking in identity order) as a
/// function of its composed suffix, given the prefix and earlier messages.
pub struct SpeakerOracle<'a> {
    protocol: &'a ProtocolDef,
    player: usize,
    start: usize,
    middles: &'a [PointerFn],
    messages: &'a [BitString],
}

impl<'a> SpeakerOracle<'a> {
    /// Oracle for player 1, who sees nothing but its composed suffix.
    pub fn first(protocol: &'a ProtocolDef) -> Result<Self, LemmaError> {
        Self::check_protocol(protocol)?;
        Ok(Self { protocol, player: 1, start: 1, middles: &[], messages: &[] })
    }

    /// Oracle for the player after the one that produced `state`.
    pub fn next(protocol: &'a ProtocolDef, state: &'a FoolingState) -> Result<Self, LemmaError> {
        Self::check_protocol(protocol)?;
        if state.k != protocol.k() || state.n() != protocol.n() {
            return Err(LemmaError::Precondition("state and protocol dimensions differ".into()));
        }
        if state.j + 1 >= protocol.k() {
            return Err(LemmaError::Precondition(format!(
                "stage {} is already final for k = {}",
                state.j,
                protocol.k()
            )));
        }
        Ok(Self {
            protocol,
            player: state.j + 1,
            start: state.f_prefix.start,
            middles: &state.f_prefix.middles,
            messages: &state.alphas,
        })
    }

    fn check_protocol(protocol: &ProtocolDef) -> Result<(), LemmaError> {
        if protocol.view_model() != ViewModel::Collapsing || !protocol.has_identity_order() {
            return Err(LemmaError::Precondition(
                "speaker oracles need a collapsing protocol in identity order".into(),
            ));
        }
        Ok(())
    }

    pub fn player(&self) -> usize {
        self.player
    }
}

impl MessageOracle for SpeakerOracle<'_> {
    fn budget(&self) -> usize {
        self.protocol.budgets()[self.player - 1]
    }

    fn message(&self, input: &BitString) -> Result<BitString, LemmaError> {
        let source = StageInput { k: self.protocol.k(), start: self.start, middles: self.middles, top: input };
        let view = PlayerView::new(self.player, ViewModel::Collapsing, self.messages, &source);
        Ok(self.protocol.message(self.player, &view)?)
    }
}

fn first_collision<O, I>(oracle: &O, candidates: I) -> Result<Option<(BitString, BitString)>, LemmaError>
where
    O: MessageOracle + ?Sized,
    I: IntoIterator<Item = BitString>,
{
    let mut seen: HashMap<BitString, BitString> = HashMap::new();
    for candidate in candidates {
        let msg = oracle.message(&candidate)?;
        if let Some(earlier) = seen.get(&msg) {
            return Ok(Some((earlier.clone(), candidate)));
        }
        seen.insert(msg, candidate);
    }
    Ok(None)
}

fn check_scan_size(n: usize) -> Result<(), LemmaError> {
    if n > MAX_SCAN_BITS {
        return Err(LemmaError::Precondition(format!(
            "exhaustive scan over 2^{n} strings is beyond the {MAX_SCAN_BITS}-bit limit"
        )));
    }
    Ok(())
}

/// Two distinct strings with equal messages; the lexicographically first
/// repeat, returned as (earlier, later). Needs `budget <= n - 1`.
pub fn find_plain_collision<O: MessageOracle + ?Sized>(
    oracle: &O,
    n: usize,
) -> Result<(BitString, BitString), LemmaError> {
    let t = oracle.budget();
    if t >= n {
        return Err(LemmaError::Precondition(format!("plain collision needs t <= n - 1, got t={t}, n={n}")));
    }
    check_scan_size(n)?;
    first_collision(oracle, (0..1u64 << n).map(|i| BitString::from_index(n, i)))?
        .ok_or(LemmaError::NoCollision { search: "plain", n, budget: t })
}

/// First collision along the interior chain `chain_string(n, 1..n-1)`,
/// ordered so the first component has more zeros. No budget check.
pub fn scan_chain_collision<O: MessageOracle + ?Sized>(
    oracle: &O,
    n: usize,
) -> Result<Option<(BitString, BitString)>, LemmaError> {
    // Scanning in increasing i means the earlier hit is the larger string.
    Ok(first_collision(oracle, (1..n).map(|i| chain_string(n, i)))?.map(|(upper, lower)| (lower, upper)))
}

/// Dominance-ordered pair `x < y` with equal messages. Needs `2^t < n - 1`.
pub fn find_chain_collision<O: MessageOracle + ?Sized>(
    oracle: &O,
    n: usize,
) -> Result<(BitString, BitString), LemmaError> {
    let t = oracle.budget();
    let fits = t < usize::BITS as usize - 1 && (1usize << t) < n.saturating_sub(1);
    if !fits {
        return Err(LemmaError::Precondition(format!(
            "chain collision needs 2^t < n - 1, got t={t}, n={n}"
        )));
    }
    scan_chain_collision(oracle, n)?.ok_or(LemmaError::NoCollision { search: "chain", n, budget: t })
}

/// The lexicographically first pair of strings starting with `01` that share
/// a message, plus the first position `d > 2` where they differ (the first
/// string reads 0 there, the second 1). Needs `t <= n - 3`.
pub fn find_pinned_collision<O: MessageOracle + ?Sized>(
    oracle: &O,
    n: usize,
) -> Result<(BitString, BitString, usize), LemmaError> {
    let t = oracle.budget();
    if !fits(t, pinned_budget_cap(n)) {
        return Err(LemmaError::Precondition(format!("pinned collision needs t <= n - 3, got t={t}, n={n}")));
    }
    check_scan_size(n)?;
    let pinned = (0..1u64 << (n - 2)).map(|tail| BitString::from_index(n, (1 << (n - 2)) | tail));
    let (a, b) = first_collision(oracle, pinned)?.ok_or(LemmaError::NoCollision { search: "pinned", n, budget: t })?;
    // Lexicographic order puts a 0 in the earlier string at the first difference.
    let d = (3..=n)
        .find(|&d| a.get(d) != b.get(d))
        .ok_or_else(|| LemmaError::Invariant("pinned pair does not differ".into()))?;
    debug_assert!(!a.get(d) && b.get(d));
    Ok((a, b, d))
}

/// Lexicographically first crossing pair `(x, y)`, `x < y` as numbers, with
/// equal messages. Needs `t <= n - ⌈0.5·log2 n⌉ - 2`.
pub fn find_crossing_collision<O: MessageOracle + ?Sized>(
    oracle: &O,
    n: usize,
) -> Result<(BitString, BitString), LemmaError> {
    let t = oracle.budget();
    if !fits(t, crossing_budget_cap(n)) {
        return Err(LemmaError::Precondition(format!(
            "crossing collision needs t <= {}, got t={t}, n={n}",
            crossing_budget_cap(n)
        )));
    }
    check_scan_size(n)?;
    let size = 1u64 << n;
    let mask = size - 1;
    let mut messages = Vec::with_capacity(size as usize);
    let mut buckets: HashMap<BitString, Vec<u64>> = HashMap::new();
    for i in 0..size {
        let msg = oracle.message(&BitString::from_index(n, i))?;
        buckets.entry(msg.clone()).or_default().push(i);
        messages.push(msg);
    }
    let crossing = |a: u64, b: u64| (!a & !b & mask) != 0 && (!a & b) != 0 && (a & !b) != 0 && (a & b) != 0;
    for x in 0..size {
        let bucket = &buckets[&messages[x as usize]];
        let after = bucket.partition_point(|&y| y <= x);
        if let Some(&y) = bucket[after..].iter().find(|&&y| crossing(x, y)) {
            return Ok((BitString::from_index(n, x), BitString::from_index(n, y)));
        }
    }
    Err(LemmaError::NoCollision { search: "crossing", n, budget: t })
}

/// `start = f_1` and the middle functions `f_2..f_j` fixed so far.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prefix {
    pub start: usize,
    pub middles: Vec<PointerFn>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFlags {
    pub dominance: bool,
    pub crossing: bool,
}

impl PairFlags {
    fn of(x: &BitString, y: &BitString) -> Result<Self, ModelError> {
        Ok(Self { dominance: dominance_less(x, y)?, crossing: is_crossing(x, y)? })
    }
}

/// A j-fooling pair together with the prefix and messages it is consistent with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoolingState {
    pub j: usize,
    pub k: usize,
    pub f_prefix: Prefix,
    pub alphas: Vec<BitString>,
    pub x: BitString,
    pub y: BitString,
    pub v: usize,
    pub flags: PairFlags,
}

impl FoolingState {
    /// Stage-1 state from two layer-1 strings on which player 1 writes `alpha`.
    pub fn initial(k: usize, x: BitString, y: BitString, start: usize, alpha: BitString) -> Result<Self, LemmaError> {
        let flags = PairFlags::of(&x, &y)?;
        let state = Self {
            j: 1,
            k,
            f_prefix: Prefix { start, middles: Vec::new() },
            alphas: vec![alpha],
            x,
            y,
            v: start,
            flags,
        };
        state.check_fooling()?;
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Structural invariants of the state.
    pub fn check_fooling(&self) -> Result<(), LemmaError> {
        let n = self.n();
        let fail = |msg: String| Err(LemmaError::Invariant(msg));
        if self.y.len() != n || self.j == 0 || self.j >= self.k {
            return fail(format!("bad dimensions: j={}, k={}, |x|={n}, |y|={}", self.j, self.k, self.y.len()));
        }
        if self.f_prefix.middles.len() != self.j - 1 || self.alphas.len() != self.j {
            return fail("prefix length does not match stage".into());
        }
        if self.f_prefix.start == 0 || self.f_prefix.start > n || self.f_prefix.middles.iter().any(|f| f.len() != n) {
            return fail("prefix functions do not have width n".into());
        }
        let v = self.f_prefix.middles.iter().fold(self.f_prefix.start, |v, f| f.apply(v));
        if v != self.v {
            return fail(format!("recorded vertex {} but prefix leads to {v}", self.v));
        }
        if self.x.get(v) == self.y.get(v) {
            return fail(format!("pair agrees at fooling vertex {v}"));
        }
        if PairFlags::of(&self.x, &self.y)? != self.flags {
            return fail("pair flags are stale".into());
        }
        Ok(())
    }

    /// Replays players `1..=j` on both strings and compares with `alphas`.
    pub fn check_consistency(&self, protocol: &ProtocolDef) -> Result<(), LemmaError> {
        SpeakerOracle::check_protocol(protocol)?;
        for (label, top) in [("x", &self.x), ("y", &self.y)] {
            let source = StageInput { k: self.k, start: self.f_prefix.start, middles: &self.f_prefix.middles, top };
            for h in 1..=self.j {
                let view = PlayerView::new(h, ViewModel::Collapsing, &self.alphas[..h - 1], &source);
                let msg = protocol.message(h, &view)?;
                if msg != self.alphas[h - 1] {
                    return Err(LemmaError::Invariant(format!(
                        "player {h} writes {msg} on {label} but the state records {}",
                        self.alphas[h - 1]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Builds `f` sending every position of class `(a, b)` in `part` to `target(a, b)`.
fn link(part: &IndexPartition, n: usize, target: impl Fn(bool, bool) -> Option<usize>) -> Result<PointerFn, LemmaError> {
    let mut table = vec![0; n];
    for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
        let class = part.class(a, b);
        if class.is_empty() {
            continue;
        }
        let to = target(a, b).ok_or_else(|| {
            LemmaError::Invariant(format!("class I{}{} is nonempty but has no image", a as u8, b as u8))
        })?;
        for &s in class {
            table[s - 1] = to;
        }
    }
    Ok(PointerFn::new(table)?)
}

/// Assembles the next state and rechecks every property the step promises.
fn extend<O: MessageOracle + ?Sized>(
    state: &FoolingState,
    oracle: &O,
    f_next: PointerFn,
    x1: BitString,
    y1: BitString,
) -> Result<FoolingState, LemmaError> {
    if x1.compose(&f_next)? != state.x || y1.compose(&f_next)? != state.y {
        return Err(LemmaError::Invariant(format!("reconstruction fails for f = {f_next:?}")));
    }
    let alpha = oracle.message(&x1)?;
    if oracle.message(&y1)? != alpha {
        return Err(LemmaError::Invariant("collision strings receive different messages".into()));
    }
    let v = f_next.apply(state.v);
    let flags = PairFlags::of(&x1, &y1)?;
    let mut f_prefix = state.f_prefix.clone();
    f_prefix.middles.push(f_next);
    let mut alphas = state.alphas.clone();
    alphas.push(alpha);
    let next = FoolingState { j: state.j + 1, k: state.k, f_prefix, alphas, x: x1, y: y1, v, flags };
    next.check_fooling()?;
    Ok(next)
}

fn check_extendable(state: &FoolingState) -> Result<(), LemmaError> {
    if state.j + 1 >= state.k {
        return Err(LemmaError::Precondition(format!("stage {} is already final for k = {}", state.j, state.k)));
    }
    Ok(())
}

fn require_dominance(state: &FoolingState, step: &str) -> Result<(), LemmaError> {
    if !state.flags.dominance {
        return Err(LemmaError::Precondition(format!("{step} needs a dominance-ordered pair")));
    }
    Ok(())
}

/// Extends a dominance-ordered state through a player writing at most `n - 3`
/// bits. The new pair need not be ordered or crossing.
pub fn push<O: MessageOracle + ?Sized>(state: &FoolingState, oracle: &O) -> Result<FoolingState, LemmaError> {
    check_extendable(state)?;
    require_dominance(state, "push")?;
    let n = state.n();
    let (x1, y1, d) = find_pinned_collision(oracle, n)?;
    let part = index_partition(&state.x, &state.y)?;
    let f_next = link(&part, n, |a, b| match (a, b) {
        (false, false) => Some(1),
        (true, true) => Some(2),
        (false, true) => Some(d),
        (true, false) => None,
    })?;
    extend(state, oracle, f_next, x1, y1)
}

fn same_class_link(part: &IndexPartition, next: &IndexPartition, n: usize) -> Result<PointerFn, LemmaError> {
    link(part, n, |a, b| next.representative(a, b))
}

/// Extends any state through a player writing at most
/// `n - ⌈0.5·log2 n⌉ - 2` bits; the new pair is crossing.
pub fn crosspush<O: MessageOracle + ?Sized>(state: &FoolingState, oracle: &O) -> Result<FoolingState, LemmaError> {
    check_extendable(state)?;
    let n = state.n();
    let (x1, y1) = find_crossing_collision(oracle, n)?;
    let f_next = same_class_link(&index_partition(&state.x, &state.y)?, &index_partition(&x1, &y1)?, n)?;
    extend(state, oracle, f_next, x1, y1)
}

/// Extends a dominance-ordered state through a player writing fewer than
/// `⌈log2(n+1)⌉ - 2` bits; the new pair is again dominance-ordered.
pub fn chainpush<O: MessageOracle + ?Sized>(state: &FoolingState, oracle: &O) -> Result<FoolingState, LemmaError> {
    check_extendable(state)?;
    require_dominance(state, "chainpush")?;
    let n = state.n();
    let t = oracle.budget();
    if t as i64 >= chain_budget_bound(n) {
        return Err(LemmaError::Precondition(format!(
            "chainpush needs t < {}, got t={t}",
            chain_budget_bound(n)
        )));
    }
    let (x1, y1) = find_chain_collision(oracle, n)?;
    let f_next = same_class_link(&index_partition(&state.x, &state.y)?, &index_partition(&x1, &y1)?, n)?;
    extend(state, oracle, f_next, x1, y1)
}

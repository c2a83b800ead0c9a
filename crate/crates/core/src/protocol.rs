//! One-round, fixed-order protocols on a shared blackboard.
//!
//! A protocol fixes, for each of the first `k-1` speakers, a bit budget and a
//! deterministic message function of that speaker's [`PlayerView`]; the last
//! speaker maps its view (which includes every message) to the output bit.
//! What a view exposes is decided by the [`ViewModel`].

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BitString, Instance, InputSource, ModelError, PointerFn};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid protocol definition: {0}")]
    InvalidDefinition(String),
    #[error("dimension mismatch: protocol is (n={pn}, k={pk}) but input is (n={n}, k={k})")]
    DimensionMismatch { pn: usize, pk: usize, n: usize, k: usize },
    #[error("speaker {speaker} (player {player}) emitted {got} bits, budget is {budget}")]
    BudgetViolation { speaker: usize, player: usize, budget: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which parts of the input a player may look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViewModel {
    /// Everything except the player's own forehead piece.
    GeneralNOF,
    /// Full prefix, but the pieces ahead only as one composed string.
    Collapsing,
    /// Pieces ahead, but only the vertex reached behind.
    Conservative,
    /// Full prefix plus the single piece directly ahead.
    Myopic,
}

impl ViewModel {
    pub const ALL: [ViewModel; 4] =
        [ViewModel::GeneralNOF, ViewModel::Collapsing, ViewModel::Conservative, ViewModel::Myopic];

    pub fn name(self) -> &'static str {
        match self {
            ViewModel::GeneralNOF => "GeneralNOF",
            ViewModel::Collapsing => "Collapsing",
            ViewModel::Conservative => "Conservative",
            ViewModel::Myopic => "Myopic",
        }
    }
}

impl fmt::Display for ViewModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ViewModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ViewModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown view model {s:?}"))
    }
}

/// What player `player` can see while speaking.
///
/// Pieces are read on demand through the accessors, each of which returns
/// `None` when the piece is hidden from this player.
#[derive(Clone, Copy)]
pub struct PlayerView<'a> {
    player: usize,
    model: ViewModel,
    messages: &'a [BitString],
    source: &'a dyn InputSource,
}

impl<'a> PlayerView<'a> {
    pub fn new(
        player: usize,
        model: ViewModel,
        messages: &'a [BitString],
        source: &'a dyn InputSource,
    ) -> Self {
        assert!(player >= 1 && player <= source.k(), "player {player} out of range");
        Self { player, model, messages, source }
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn model(&self) -> ViewModel {
        self.model
    }

    pub fn n(&self) -> usize {
        self.source.n()
    }

    pub fn k(&self) -> usize {
        self.source.k()
    }

    /// Messages of all earlier speakers, in speaking order.
    pub fn messages(&self) -> &'a [BitString] {
        self.messages
    }

    /// Whether the layer-`layer` piece (`start` is layer 1, `x` is layer `k`)
    /// is visible in raw form.
    pub fn sees_piece(&self, layer: usize) -> bool {
        let (p, k) = (self.player, self.k());
        if layer == p {
            return false;
        }
        match self.model {
            ViewModel::GeneralNOF => true,
            ViewModel::Collapsing => layer < p,
            ViewModel::Conservative => layer > p,
            ViewModel::Myopic => layer < p || (layer == p + 1 && layer <= k),
        }
    }

    pub fn start(&self) -> Option<usize> {
        self.sees_piece(1).then(|| self.source.start())
    }

    /// `f_layer(v)` for `layer` in `2..=k-1`.
    pub fn pointer(&self, layer: usize, v: usize) -> Option<usize> {
        debug_assert!(layer >= 2 && layer < self.k());
        self.sees_piece(layer).then(|| self.source.pointer(layer, v))
    }

    /// `x^{(v)}`.
    pub fn x_bit(&self, v: usize) -> Option<bool> {
        self.sees_piece(self.k()).then(|| self.source.bit(v))
    }

    pub fn has_composition(&self) -> bool {
        self.model == ViewModel::Collapsing && self.player < self.k()
    }

    /// Position `s` of `x ∘ f_{k-1} ∘ .. ∘ f_{player+1}` (collapsing only).
    pub fn composition_bit(&self, s: usize) -> Option<bool> {
        self.has_composition().then(|| {
            let v = self.source.follow(self.player, s, self.k() - 1);
            self.source.bit(v)
        })
    }

    pub fn composition(&self) -> Option<BitString> {
        self.has_composition().then(|| {
            BitString::new((1..=self.n()).map(|s| self.composition_bit(s).unwrap()).collect())
        })
    }

    /// The vertex on layer `player - 1` (conservative players 2..k only).
    pub fn behind(&self) -> Option<usize> {
        (self.model == ViewModel::Conservative && self.player >= 2)
            .then(|| self.source.vertex_at(self.player - 1))
    }

    /// Follows visible pointers from `vertex` on `from_layer` to `to_layer`.
    pub fn follow(&self, from_layer: usize, vertex: usize, to_layer: usize) -> Option<usize> {
        (from_layer + 1..=to_layer).try_fold(vertex, |v, layer| self.pointer(layer, v))
    }

    /// Vertex on `layer` reached from the start pointer, if every piece on the
    /// way is visible.
    pub fn vertex_at(&self, layer: usize) -> Option<usize> {
        self.follow(1, self.start()?, layer)
    }

    /// Reads every visible piece into an owned value.
    pub fn snapshot(&self) -> ViewSnapshot {
        let n = self.n();
        let middles = (2..self.k())
            .map(|layer| {
                self.sees_piece(layer)
                    .then(|| (1..=n).map(|v| self.source.pointer(layer, v)).collect())
            })
            .collect();
        let x = self
            .sees_piece(self.k())
            .then(|| BitString::new((1..=n).map(|v| self.source.bit(v)).collect()));
        ViewSnapshot {
            player: self.player,
            messages: self.messages.to_vec(),
            start: self.start(),
            middles,
            x,
            composition: self.composition(),
            behind: self.behind(),
        }
    }
}

/// Materialised content of a [`PlayerView`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ViewSnapshot {
    pub player: usize,
    pub messages: Vec<BitString>,
    pub start: Option<usize>,
    pub middles: Vec<Option<Vec<usize>>>,
    pub x: Option<BitString>,
    pub composition: Option<BitString>,
    pub behind: Option<usize>,
}

/// Inputs on which a protocol is required to be correct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstanceDomain {
    /// Every instance.
    Full,
    /// Layered trees with the given branching: layer `j` uses vertices
    /// `1..=b^j`, the children of vertex `v` are `(v-1)b+1 ..= vb`, and
    /// pointers of unused vertices are fixed to 1.
    Tree { branching: usize },
}

impl InstanceDomain {
    /// Admissible values of the start pointer.
    pub fn start_values(&self, n: usize) -> std::ops::RangeInclusive<usize> {
        match *self {
            InstanceDomain::Full => 1..=n,
            InstanceDomain::Tree { branching } => 1..=branching.min(n),
        }
    }

    /// Admissible values of `f_layer(v)`.
    pub fn pointer_values(&self, n: usize, layer: usize, v: usize) -> std::ops::RangeInclusive<usize> {
        match *self {
            InstanceDomain::Full => 1..=n,
            InstanceDomain::Tree { branching } => {
                if v <= branching.pow(layer as u32 - 1) {
                    (v - 1) * branching + 1..=v * branching
                } else {
                    1..=1
                }
            }
        }
    }

    pub fn admits(&self, inst: &Instance) -> bool {
        let n = inst.n();
        self.start_values(n).contains(&inst.start())
            && (2..inst.k()).all(|layer| {
                (1..=n).all(|v| self.pointer_values(n, layer, v).contains(&inst.pointer(layer, v)))
            })
    }

    /// Number of admissible instances, if it fits in a `u128`.
    pub fn count(&self, n: usize, k: usize) -> Option<u128> {
        let mut total: u128 = self.start_values(n).count() as u128;
        for layer in 2..k {
            for v in 1..=n {
                total = total.checked_mul(self.pointer_values(n, layer, v).count() as u128)?;
            }
        }
        total.checked_mul(1u128.checked_shl(n as u32)?)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, k: usize, rng: &mut R) -> Instance {
        let start = rng.gen_range(self.start_values(n));
        let middles = (2..k)
            .map(|layer| {
                let table = (1..=n).map(|v| rng.gen_range(self.pointer_values(n, layer, v))).collect();
                PointerFn::new(table).expect("domain values are in range")
            })
            .collect();
        Instance::new(start, middles, BitString::random(n, rng)).expect("valid dimensions")
    }
}

/// Name and integer parameters of a protocol, e.g. `truncated-trivial:7`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtocolId {
    pub name: String,
    pub params: Vec<usize>,
}

impl ProtocolId {
    pub fn new(name: impl Into<String>, params: Vec<usize>) -> Self {
        Self { name: name.into(), params }
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for p in &self.params {
            write!(f, ":{p}")?;
        }
        Ok(())
    }
}

pub type MessageFn = Arc<dyn Fn(&PlayerView<'_>) -> BitString + Send + Sync>;
pub type OutputFn = Arc<dyn Fn(&PlayerView<'_>) -> bool + Send + Sync>;

/// A deterministic one-round protocol.
#[derive(Clone)]
pub struct ProtocolDef {
    id: ProtocolId,
    n: usize,
    k: usize,
    view_model: ViewModel,
    speaking_order: Vec<usize>,
    budgets: Vec<usize>,
    messages: Vec<MessageFn>,
    output: OutputFn,
    domain: InstanceDomain,
}

impl fmt::Debug for ProtocolDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolDef")
            .field("id", &self.id)
            .field("n", &self.n)
            .field("k", &self.k)
            .field("view_model", &self.view_model)
            .field("speaking_order", &self.speaking_order)
            .field("budgets", &self.budgets)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl ProtocolDef {
    /// `budgets[s]` and `messages[s]` belong to the `(s+1)`-th speaker.
    pub fn new(
        id: ProtocolId,
        n: usize,
        k: usize,
        view_model: ViewModel,
        budgets: Vec<usize>,
        messages: Vec<MessageFn>,
        output: OutputFn,
    ) -> Result<Self, ProtocolError> {
        if n == 0 || k < 2 {
            return Err(ProtocolError::InvalidDefinition(format!(
                "need n >= 1 and k >= 2, got n={n}, k={k}"
            )));
        }
        if budgets.len() != k - 1 || messages.len() != k - 1 {
            return Err(ProtocolError::InvalidDefinition(format!(
                "expected {} budgets and message functions, got {} and {}",
                k - 1,
                budgets.len(),
                messages.len()
            )));
        }
        Ok(Self {
            id,
            n,
            k,
            view_model,
            speaking_order: (1..=k).collect(),
            budgets,
            messages,
            output,
            domain: InstanceDomain::Full,
        })
    }

    pub fn with_speaking_order(mut self, order: Vec<usize>) -> Result<Self, ProtocolError> {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (1..=self.k).collect::<Vec<_>>() {
            return Err(ProtocolError::InvalidDefinition(format!(
                "speaking order {order:?} is not a permutation of 1..={}",
                self.k
            )));
        }
        self.speaking_order = order;
        Ok(self)
    }

    pub fn with_domain(mut self, domain: InstanceDomain) -> Result<Self, ProtocolError> {
        if let InstanceDomain::Tree { branching } = domain {
            let leaves = (branching as u128).checked_pow(self.k as u32 - 1);
            if branching < 2 || leaves != Some(self.n as u128) {
                return Err(ProtocolError::InvalidDefinition(format!(
                    "tree domain with branching {branching} needs n = b^(k-1), got n={}",
                    self.n
                )));
            }
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn id(&self) -> &ProtocolId {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn view_model(&self) -> ViewModel {
        self.view_model
    }

    pub fn speaking_order(&self) -> &[usize] {
        &self.speaking_order
    }

    pub fn has_identity_order(&self) -> bool {
        self.speaking_order.iter().enumerate().all(|(i, &p)| p == i + 1)
    }

    pub fn budgets(&self) -> &[usize] {
        &self.budgets
    }

    pub fn domain(&self) -> InstanceDomain {
        self.domain
    }

    /// Player who speaks at 1-indexed position `s`.
    pub fn player_at(&self, s: usize) -> usize {
        self.speaking_order[s - 1]
    }

    /// Message of speaker `s` on `view`, with its length checked against the budget.
    pub fn message(&self, s: usize, view: &PlayerView<'_>) -> Result<BitString, ProtocolError> {
        let msg = (self.messages[s - 1])(view);
        let budget = self.budgets[s - 1];
        if msg.len() != budget {
            return Err(ProtocolError::BudgetViolation {
                speaker: s,
                player: self.player_at(s),
                budget,
                got: msg.len(),
            });
        }
        Ok(msg)
    }

    pub fn output(&self, view: &PlayerView<'_>) -> bool {
        (self.output)(view)
    }

    pub fn check_dimensions<S: InputSource + ?Sized>(&self, input: &S) -> Result<(), ProtocolError> {
        if input.n() != self.n || input.k() != self.k {
            return Err(ProtocolError::DimensionMismatch {
                pn: self.n,
                pk: self.k,
                n: input.n(),
                k: input.k(),
            });
        }
        Ok(())
    }
}

/// `C_total`: bits written by all speakers.
pub fn total_cost(protocol: &ProtocolDef) -> usize {
    protocol.budgets.iter().sum()
}

/// `C_max`: bits written by the most talkative speaker.
pub fn max_cost(protocol: &ProtocolDef) -> usize {
    protocol.budgets.iter().copied().max().unwrap_or(0)
}

/// Blackboard contents and answer of one run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transcript {
    pub messages: Vec<BitString>,
    #[serde(with = "crate::bit_serde")]
    pub output: bool,
    pub total_cost: usize,
    pub max_cost: usize,
}

impl Transcript {
    /// Costs recomputed from message lengths agree with the declared budgets.
    pub fn costs_match(&self, budgets: &[usize]) -> bool {
        let lens: Vec<usize> = self.messages.iter().map(BitString::len).collect();
        lens == budgets
            && self.total_cost == lens.iter().sum::<usize>()
            && self.max_cost == lens.iter().copied().max().unwrap_or(0)
    }
}

/// View of the speaker at position `s`, given the messages written so far.
pub fn build_view<'a>(
    input: &'a dyn InputSource,
    protocol: &ProtocolDef,
    s: usize,
    messages: &'a [BitString],
) -> Result<PlayerView<'a>, ProtocolError> {
    protocol.check_dimensions(input)?;
    if s == 0 || s > protocol.k {
        return Err(ProtocolError::InvalidDefinition(format!("no speaker at position {s}")));
    }
    if messages.len() != s - 1 {
        return Err(ProtocolError::InvalidDefinition(format!(
            "speaker {s} needs {} earlier messages, got {}",
            s - 1,
            messages.len()
        )));
    }
    Ok(PlayerView::new(protocol.player_at(s), protocol.view_model, messages, input))
}

/// Runs `protocol` on any input source.
pub fn run_on<S: InputSource>(protocol: &ProtocolDef, input: &S) -> Result<Transcript, ProtocolError> {
    protocol.check_dimensions(input)?;
    let k = protocol.k;
    let mut messages = Vec::with_capacity(k - 1);
    for s in 1..k {
        let view = PlayerView::new(protocol.player_at(s), protocol.view_model, &messages, input);
        let msg = protocol.message(s, &view)?;
        messages.push(msg);
    }
    let view = PlayerView::new(protocol.player_at(k), protocol.view_model, &messages, input);
    let output = protocol.output(&view);
    Ok(Transcript {
        total_cost: messages.iter().map(BitString::len).sum(),
        max_cost: messages.iter().map(BitString::len).max().unwrap_or(0),
        messages,
        output,
    })
}

pub fn run(protocol: &ProtocolDef, inst: &Instance) -> Result<Transcript, ProtocolError> {
    run_on(protocol, inst)
}

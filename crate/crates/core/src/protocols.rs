//! Built-in protocols: the upper-bound constructions and under-budgeted
//! "cheating" protocols that serve as adversary targets.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::bounds::{ceil_log2, pinned_budget_cap};
use crate::model::BitString;
use crate::protocol::{
    InstanceDomain, MessageFn, OutputFn, PlayerView, ProtocolDef, ProtocolError, ProtocolId,
    ViewModel,
};

fn invalid(msg: String) -> ProtocolError {
    ProtocolError::InvalidDefinition(msg)
}

fn silent_message() -> MessageFn {
    Arc::new(|_| BitString::empty())
}

/// Collapsing protocol where player `s` writes the first `budgets[s-1]` bits of
/// its composed suffix. The last player walks the prefix and answers from the
/// latest message that covers the vertex it reaches, guessing 0 otherwise.
fn truncated_with_id(id: ProtocolId, n: usize, k: usize, budgets: Vec<usize>) -> Result<ProtocolDef, ProtocolError> {
    if budgets.len() != k.saturating_sub(1) {
        return Err(invalid(format!("expected {} budgets, got {}", k.saturating_sub(1), budgets.len())));
    }
    if let Some(&b) = budgets.iter().find(|&&b| b > n) {
        return Err(invalid(format!("budget {b} exceeds n = {n}")));
    }
    let messages = budgets
        .iter()
        .map(|&t| -> MessageFn {
            Arc::new(move |view: &PlayerView<'_>| {
                BitString::new((1..=t).map(|s| view.composition_bit(s).expect("collapsing view")).collect())
            })
        })
        .collect();
    let shared = budgets.clone();
    let output: OutputFn = Arc::new(move |view: &PlayerView<'_>| {
        for s in (1..view.k()).rev() {
            let v = view.vertex_at(s).expect("last player sees the whole prefix");
            if v <= shared[s - 1] {
                return view.messages()[s - 1].get(v);
            }
        }
        false
    });
    ProtocolDef::new(id, n, k, ViewModel::Collapsing, budgets, messages, output)
}

/// Per-player prefix truncation with arbitrary budgets (`truncated:t1:..:t_{k-1}`).
pub fn truncated_protocol(n: usize, k: usize, budgets: &[usize]) -> Result<ProtocolDef, ProtocolError> {
    truncated_with_id(ProtocolId::new("truncated", budgets.to_vec()), n, k, budgets.to_vec())
}

/// Player `k-1` writes `x`; player `k` follows the pointers and reads the answer.
pub fn trivial_protocol(n: usize, k: usize) -> Result<ProtocolDef, ProtocolError> {
    let mut budgets = vec![0; k.saturating_sub(1)];
    if let Some(last) = budgets.last_mut() {
        *last = n;
    }
    truncated_with_id(ProtocolId::new("trivial", vec![]), n, k, budgets)
}

/// Out-of-order protocol: player `first` speaks first and announces the
/// vertex on layer `first - 1`; player `second < first` then follows the
/// remaining pointers and writes the answer bit, which the last speaker copies.
pub fn reordered_protocol(n: usize, k: usize, first: usize, second: usize) -> Result<ProtocolDef, ProtocolError> {
    if k < 3 {
        return Err(invalid(format!("reordered protocol needs k >= 3, got {k}")));
    }
    if !(1 <= second && second < first && first <= k) {
        return Err(invalid(format!(
            "reordered protocol needs 1 <= second < first <= k, got first={first}, second={second}"
        )));
    }
    let width = ceil_log2(n);
    let announce: MessageFn = Arc::new(move |view: &PlayerView<'_>| {
        let v = view.vertex_at(first - 1).expect("prefix visible to a later player");
        BitString::from_index(width, (v - 1) as u64)
    });
    let answer: MessageFn = Arc::new(move |view: &PlayerView<'_>| {
        let v = view.messages()[0].to_index() as usize + 1;
        let last = view.follow(first - 1, v, view.k() - 1).expect("suffix visible to an earlier player");
        BitString::new(vec![view.x_bit(last).expect("x visible")])
    });
    let mut order = vec![first, second];
    order.extend((1..=k).filter(|&p| p != first && p != second));
    let mut budgets = vec![0; k - 1];
    budgets[0] = width;
    budgets[1] = 1;
    let mut messages = vec![announce, answer];
    messages.extend((2..k - 1).map(|_| silent_message()));
    let output: OutputFn = Arc::new(|view: &PlayerView<'_>| view.messages()[1].get(1));
    ProtocolDef::new(
        ProtocolId::new("reordered", vec![first, second]),
        n,
        k,
        ViewModel::GeneralNOF,
        budgets,
        messages,
        output,
    )?
    .with_speaking_order(order)
}

/// Shape of a tree-restricted instance: branching `b`, `k` players, `n = b^(k-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TpjShape {
    branching: usize,
    depth: usize,
}

impl TpjShape {
    pub fn new(branching: usize, depth: usize) -> Result<Self, ProtocolError> {
        if branching < 2 || depth < 2 {
            return Err(invalid(format!("tree shape needs b >= 2 and k >= 2, got b={branching}, k={depth}")));
        }
        branching
            .checked_pow(depth as u32 - 1)
            .ok_or_else(|| invalid("tree too large".into()))?;
        Ok(Self { branching, depth })
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n(&self) -> usize {
        self.branching.pow(self.depth as u32 - 1)
    }

    pub fn domain(&self) -> InstanceDomain {
        InstanceDomain::Tree { branching: self.branching }
    }
}

/// Player 1 writes, for each of the `b` layer-1 vertices, the answer reached
/// from it; the last player indexes that table with the start pointer.
pub fn tpj_protocol(shape: TpjShape) -> Result<ProtocolDef, ProtocolError> {
    let (b, k, n) = (shape.branching, shape.depth, shape.n());
    let table: MessageFn = Arc::new(move |view: &PlayerView<'_>| {
        BitString::new(
            (1..=b)
                .map(|u| {
                    let v = view.follow(1, u, view.k() - 1).expect("player 1 sees every pointer");
                    view.x_bit(v).expect("player 1 sees x")
                })
                .collect(),
        )
    });
    let mut budgets = vec![0; k - 1];
    budgets[0] = b;
    let mut messages = vec![table];
    messages.extend((1..k - 1).map(|_| silent_message()));
    let output: OutputFn =
        Arc::new(|view: &PlayerView<'_>| view.messages()[0].get(view.start().expect("start visible")));
    ProtocolDef::new(ProtocolId::new("tpj", vec![b]), n, k, ViewModel::GeneralNOF, budgets, messages, output)?
        .with_domain(shape.domain())
}

/// Families of collapsing protocols that talk at most `n - 3` bits in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheatingBase {
    /// Player `k-1` writes only the first `budget` bits of `x`.
    TruncatedTrivial,
    /// Nobody writes anything; the answer is always 0.
    Silent,
    /// Player 1 writes the first `budget` bits of its composed string.
    FirstPlayer,
}

impl CheatingBase {
    pub const ALL: [CheatingBase; 3] =
        [CheatingBase::TruncatedTrivial, CheatingBase::Silent, CheatingBase::FirstPlayer];

    pub fn name(self) -> &'static str {
        match self {
            CheatingBase::TruncatedTrivial => "truncated-trivial",
            CheatingBase::Silent => "silent",
            CheatingBase::FirstPlayer => "first-player",
        }
    }
}

pub fn cheating_protocol(base: CheatingBase, n: usize, k: usize, budget_total: usize) -> Result<ProtocolDef, ProtocolError> {
    if k < 2 {
        return Err(invalid(format!("need k >= 2, got {k}")));
    }
    let mut budgets = vec![0; k - 1];
    let params = match base {
        CheatingBase::Silent => {
            if budget_total != 0 {
                return Err(invalid(format!("silent protocol has budget 0, got {budget_total}")));
            }
            vec![]
        }
        CheatingBase::TruncatedTrivial | CheatingBase::FirstPlayer => {
            if budget_total as i64 > pinned_budget_cap(n) {
                return Err(invalid(format!(
                    "cheating budget {budget_total} exceeds n - 3 = {}",
                    pinned_budget_cap(n)
                )));
            }
            let speaker = if base == CheatingBase::FirstPlayer { 0 } else { k - 2 };
            budgets[speaker] = budget_total;
            vec![budget_total]
        }
    };
    truncated_with_id(ProtocolId::new(base.name(), params), n, k, budgets)
}

/// 64-bit finaliser from splitmix64.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable hash of everything a collapsing player sees.
fn view_hash(seed: u64, view: &PlayerView<'_>) -> u64 {
    let mut h = mix64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut feed = |word: u64| h = mix64(h ^ word).wrapping_add(0x9e37_79b9_7f4a_7c15);
    feed(view.player() as u64);
    for m in view.messages() {
        feed(m.len() as u64);
        m.iter().for_each(|b| feed(b as u64));
    }
    feed(view.start().unwrap_or(0) as u64);
    for layer in 2..view.player().min(view.k()) {
        (1..=view.n()).for_each(|v| feed(view.pointer(layer, v).unwrap_or(0) as u64));
    }
    if let Some(g) = view.composition() {
        g.iter().for_each(|b| feed(b as u64 + 2));
    }
    h
}

/// Collapsing protocol whose messages and output are pseudorandom functions
/// of each player's view (`hashed:SEED:t1:..:t_{k-1}`). Useful as an
/// arbitrary adversary target.
pub fn hashed_protocol(n: usize, k: usize, seed: u64, budgets: &[usize]) -> Result<ProtocolDef, ProtocolError> {
    if let Some(&b) = budgets.iter().find(|&&b| b > n) {
        return Err(invalid(format!("budget {b} exceeds n = {n}")));
    }
    let messages = budgets
        .iter()
        .map(|&t| -> MessageFn {
            Arc::new(move |view: &PlayerView<'_>| {
                let mut h = view_hash(seed, view);
                BitString::new(
                    (0..t)
                        .map(|i| {
                            if i % 64 == 63 {
                                h = mix64(h);
                            }
                            (h >> (i % 64)) & 1 == 1
                        })
                        .collect(),
                )
            })
        })
        .collect();
    let output: OutputFn = Arc::new(move |view: &PlayerView<'_>| view_hash(seed, view) & 1 == 1);
    let mut params = vec![seed as usize];
    params.extend_from_slice(budgets);
    ProtocolDef::new(
        ProtocolId::new("hashed", params),
        n,
        k,
        ViewModel::Collapsing,
        budgets.to_vec(),
        messages,
        output,
    )
}

/// A built-in protocol named on the command line, e.g. `truncated-trivial:7`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolSpec {
    Trivial,
    /// Speaking order starts `first`, then `second`, with `second < first`.
    Reordered { first: usize, second: usize },
    Tpj { branching: usize },
    Cheating { base: CheatingBase, budget: usize },
    Truncated { budgets: Vec<usize> },
    Hashed { seed: u64, budgets: Vec<usize> },
}

impl ProtocolSpec {
    pub fn build(&self, n: usize, k: usize) -> Result<ProtocolDef, ProtocolError> {
        match self {
            ProtocolSpec::Trivial => trivial_protocol(n, k),
            ProtocolSpec::Reordered { first, second } => reordered_protocol(n, k, *first, *second),
            ProtocolSpec::Tpj { branching } => {
                let shape = TpjShape::new(*branching, k)?;
                if shape.n() != n {
                    return Err(invalid(format!(
                        "tpj:{branching} with k={k} needs n = {}, got {n}",
                        shape.n()
                    )));
                }
                tpj_protocol(shape)
            }
            ProtocolSpec::Cheating { base, budget } => cheating_protocol(*base, n, k, *budget),
            ProtocolSpec::Truncated { budgets } => truncated_protocol(n, k, budgets),
            ProtocolSpec::Hashed { seed, budgets } => hashed_protocol(n, k, *seed, budgets),
        }
    }

    pub fn from_id(id: &ProtocolId) -> Result<Self, String> {
        id.to_string().parse()
    }
}

impl fmt::Display for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolSpec::Trivial => write!(f, "trivial"),
            ProtocolSpec::Reordered { first, second } => write!(f, "reordered:{first}:{second}"),
            ProtocolSpec::Tpj { branching } => write!(f, "tpj:{branching}"),
            ProtocolSpec::Cheating { base: CheatingBase::Silent, .. } => write!(f, "silent"),
            ProtocolSpec::Cheating { base, budget } => write!(f, "{}:{budget}", base.name()),
            ProtocolSpec::Truncated { budgets } => {
                write!(f, "truncated")?;
                budgets.iter().try_for_each(|b| write!(f, ":{b}"))
            }
            ProtocolSpec::Hashed { seed, budgets } => {
                write!(f, "hashed:{seed}")?;
                budgets.iter().try_for_each(|b| write!(f, ":{b}"))
            }
        }
    }
}

impl FromStr for ProtocolSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let params = parts
            .map(|p| p.parse::<usize>().map_err(|_| format!("bad parameter {p:?} in {s:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        let arity = |want: usize| {
            if params.len() == want {
                Ok(())
            } else {
                Err(format!("{name} takes {want} parameter(s), got {}", params.len()))
            }
        };
        match name {
            "trivial" => arity(0).map(|_| ProtocolSpec::Trivial),
            "silent" => arity(0).map(|_| ProtocolSpec::Cheating { base: CheatingBase::Silent, budget: 0 }),
            "reordered" => {
                arity(2).map(|_| ProtocolSpec::Reordered { first: params[0], second: params[1] })
            }
            "tpj" => arity(1).map(|_| ProtocolSpec::Tpj { branching: params[0] }),
            "truncated-trivial" => arity(1)
                .map(|_| ProtocolSpec::Cheating { base: CheatingBase::TruncatedTrivial, budget: params[0] }),
            "first-player" => arity(1)
                .map(|_| ProtocolSpec::Cheating { base: CheatingBase::FirstPlayer, budget: params[0] }),
            "truncated" => Ok(ProtocolSpec::Truncated { budgets: params }),
            "hashed" => match params.split_first() {
                Some((&seed, budgets)) => Ok(ProtocolSpec::Hashed { seed: seed as u64, budgets: budgets.to_vec() }),
                None => Err("hashed takes a seed followed by budgets".into()),
            },
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

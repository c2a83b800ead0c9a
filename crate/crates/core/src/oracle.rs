//! Brute-force ground truth at small scales.
//!
//! Everything here is deliberately naive: instances are enumerated in a fixed
//! lexicographic order over `(start, f_2, .., f_{k-1}, x)` with the last bit of
//! `x` varying fastest, and protocols are simply rerun on each one.
//!
//! For inputs too numerous to list, [`decision_tree_correctness`] gives an
//! exact answer by running the protocol on a lazily filled input: every
//! coordinate is fixed only when first read, and each distinct read pattern
//! stands for the whole cylinder of instances that agree on the coordinates
//! read.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adversary::{CertifiedProtocol, FoolingCertificate};
use crate::bounds::ceil_log2;
use crate::model::{evaluate, BitString, InputSource, Instance, ModelError, PointerFn};
use crate::protocol::{
    run_on, InstanceDomain, MessageFn, OutputFn, ProtocolDef, ProtocolError, ProtocolId, Transcript, ViewModel,
};

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Upper limit on the number of instances (or decision-tree leaves) visited.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationCap(pub u128);

impl Default for EnumerationCap {
    fn default() -> Self {
        Self(DEFAULT_ENUMERATION_CAP)
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{count} instances exceed the enumeration cap of {cap}")]
    CapExceeded { count: String, cap: u128 },
    #[error("decision tree self-check failed: leaves cover {covered} of {total} instances")]
    Coverage { covered: u128, total: u128 },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Number of instances in the protocol's domain, if it fits under `cap`.
pub fn instance_count(protocol: &ProtocolDef, cap: EnumerationCap) -> Result<u128, OracleError> {
    match protocol.domain().count(protocol.n(), protocol.k()) {
        Some(count) if count <= cap.0 => Ok(count),
        Some(count) => Err(OracleError::CapExceeded { count: count.to_string(), cap: cap.0 }),
        None => Err(OracleError::CapExceeded { count: "more than 2^128".into(), cap: cap.0 }),
    }
}

/// Mutable odometer over all instances of a domain.
struct Cursor {
    n: usize,
    k: usize,
    domain: InstanceDomain,
    start: usize,
    tables: Vec<Vec<usize>>,
    x: Vec<bool>,
}

impl Cursor {
    fn first(n: usize, k: usize, domain: InstanceDomain) -> Self {
        let tables = (2..k)
            .map(|layer| (1..=n).map(|v| *domain.pointer_values(n, layer, v).start()).collect())
            .collect();
        Self { n, k, domain, start: *domain.start_values(n).start(), tables, x: vec![false; n] }
    }

    /// Steps to the next instance; false after the last one.
    fn advance(&mut self) -> bool {
        for bit in self.x.iter_mut().rev() {
            *bit = !*bit;
            if *bit {
                return true;
            }
        }
        for (i, table) in self.tables.iter_mut().enumerate().rev() {
            for (j, value) in table.iter_mut().enumerate().rev() {
                let range = self.domain.pointer_values(self.n, i + 2, j + 1);
                if *value < *range.end() {
                    *value += 1;
                    return true;
                }
                *value = *range.start();
            }
        }
        let range = self.domain.start_values(self.n);
        if self.start < *range.end() {
            self.start += 1;
            return true;
        }
        self.start = *range.start();
        false
    }

    fn middles(&self) -> Vec<PointerFn> {
        self.tables.iter().map(|t| PointerFn::new(t.clone()).expect("domain values lie in [n]")).collect()
    }

    fn to_instance(&self) -> Instance {
        Instance::new(self.start, self.middles(), BitString::new(self.x.clone())).expect("cursor stays in range")
    }
}

impl InputSource for Cursor {
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
        self.tables[layer - 2][v - 1]
    }

    fn bit(&self, v: usize) -> bool {
        self.x[v - 1]
    }
}

/// Calls `visit` on every instance of the domain in enumeration order until it
/// returns false.
fn for_each_instance(
    protocol: &ProtocolDef,
    cap: EnumerationCap,
    mut visit: impl FnMut(&Cursor) -> Result<bool, OracleError>,
) -> Result<(), OracleError> {
    instance_count(protocol, cap)?;
    let mut cursor = Cursor::first(protocol.n(), protocol.k(), protocol.domain());
    loop {
        if !visit(&cursor)? || !cursor.advance() {
            return Ok(());
        }
    }
}

/// Every instance of the domain, in enumeration order.
pub fn enumerate_instances(n: usize, k: usize, domain: InstanceDomain) -> impl Iterator<Item = Instance> {
    let mut cursor = Some(Cursor::first(n, k, domain));
    std::iter::from_fn(move || {
        let c = cursor.as_mut()?;
        let inst = c.to_instance();
        if !c.advance() {
            cursor = None;
        }
        Some(inst)
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectnessReport {
    pub total: u128,
    pub correct: u128,
    /// First instance (in enumeration order) answered wrongly.
    pub first_failure: Option<Instance>,
}

impl CorrectnessReport {
    pub fn all_correct(&self) -> bool {
        self.total == self.correct
    }
}

/// Runs the protocol on every instance of its domain.
pub fn correctness_report(protocol: &ProtocolDef, cap: EnumerationCap) -> Result<CorrectnessReport, OracleError> {
    let mut report = CorrectnessReport { total: 0, correct: 0, first_failure: None };
    for_each_instance(protocol, cap, |cursor| {
        report.total += 1;
        if run_on(protocol, cursor)?.output == evaluate(cursor) {
            report.correct += 1;
        } else if report.first_failure.is_none() {
            report.first_failure = Some(cursor.to_instance());
        }
        Ok(true)
    })?;
    Ok(report)
}

pub fn exhaustive_correctness(protocol: &ProtocolDef, cap: EnumerationCap) -> Result<bool, OracleError> {
    Ok(correctness_report(protocol, cap)?.all_correct())
}

/// Searches every `(start, middles)` group for two last layers with the same
/// transcript but different answers and returns the first such pair.
pub fn brute_force_fooling_search(
    protocol: &ProtocolDef,
    cap: EnumerationCap,
) -> Result<Option<FoolingCertificate>, OracleError> {
    let group_size = 1u128 << protocol.n();
    let mut seen = 0u128;
    let mut by_transcript: HashMap<Transcript, [Option<BitString>; 2]> = HashMap::new();
    let mut found = None;
    for_each_instance(protocol, cap, |cursor| {
        if seen.is_multiple_of(group_size) {
            by_transcript.clear();
        }
        seen += 1;
        let transcript = run_on(protocol, cursor)?;
        let answer = evaluate(cursor);
        let slot = by_transcript.entry(transcript.clone()).or_default();
        if let Some(other) = &slot[!answer as usize] {
            let inst = cursor.to_instance();
            found = Some(FoolingCertificate {
                n: protocol.n(),
                k: protocol.k(),
                protocol: CertifiedProtocol {
                    name: protocol.id().name.clone(),
                    params: protocol.id().params.clone(),
                    budgets: protocol.budgets().to_vec(),
                },
                start: inst.start(),
                middles: inst.middles().to_vec(),
                x: other.clone(),
                x_prime: inst.x().clone(),
                transcript: transcript.messages,
                outputs: [!answer, answer],
            });
            return Ok(false);
        }
        if slot[answer as usize].is_none() {
            slot[answer as usize] = Some(BitString::new(cursor.x.clone()));
        }
        Ok(true)
    })?;
    Ok(found)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Coord {
    Start,
    Pointer(usize, usize),
    Bit(usize),
}

#[derive(Default)]
struct Tape {
    /// Values to hand out for the first reads, in read order.
    script: Vec<usize>,
    /// Coordinates read so far with their value and domain range.
    reads: Vec<(Coord, usize, (usize, usize))>,
    fixed: HashMap<Coord, usize>,
}

/// Input whose coordinates are chosen at first read from a replay script,
/// defaulting to the smallest admissible value.
struct LazyInput {
    n: usize,
    k: usize,
    domain: InstanceDomain,
    tape: RefCell<Tape>,
}

impl LazyInput {
    fn range(&self, coord: Coord) -> (usize, usize) {
        let r = match coord {
            Coord::Start => self.domain.start_values(self.n),
            Coord::Pointer(layer, v) => self.domain.pointer_values(self.n, layer, v),
            Coord::Bit(_) => 0..=1,
        };
        (*r.start(), *r.end())
    }

    fn read(&self, coord: Coord) -> usize {
        let mut tape = self.tape.borrow_mut();
        if let Some(&value) = tape.fixed.get(&coord) {
            return value;
        }
        let range = self.range(coord);
        let value = tape.script.get(tape.reads.len()).copied().unwrap_or(range.0);
        tape.reads.push((coord, value, range));
        tape.fixed.insert(coord, value);
        value
    }
}

impl InputSource for LazyInput {
    fn n(&self) -> usize {
        self.n
    }

    fn k(&self) -> usize {
        self.k
    }

    fn start(&self) -> usize {
        self.read(Coord::Start)
    }

    fn pointer(&self, layer: usize, v: usize) -> usize {
        self.read(Coord::Pointer(layer, v))
    }

    fn bit(&self, v: usize) -> bool {
        self.read(Coord::Bit(v)) == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionTreeReport {
    /// Instances covered by the leaves; always equals the domain size.
    pub total: u128,
    pub correct: u128,
    pub leaves: u128,
}

impl DecisionTreeReport {
    pub fn all_correct(&self) -> bool {
        self.total == self.correct
    }
}

/// Exact correctness over the whole domain, visiting one leaf per distinct
/// pattern of coordinates the protocol and the evaluator actually read.
/// `leaf_cap` bounds the number of leaves explored.
pub fn decision_tree_correctness(protocol: &ProtocolDef, leaf_cap: EnumerationCap) -> Result<DecisionTreeReport, OracleError> {
    let (n, k, domain) = (protocol.n(), protocol.k(), protocol.domain());
    let total = domain
        .count(n, k)
        .ok_or_else(|| OracleError::CapExceeded { count: "more than 2^128".into(), cap: leaf_cap.0 })?;
    let mut report = DecisionTreeReport { total, correct: 0, leaves: 0 };
    let mut covered = 0u128;
    let mut script = Vec::new();
    loop {
        if report.leaves >= leaf_cap.0 {
            return Err(OracleError::CapExceeded { count: format!("more than {} leaves", leaf_cap.0), cap: leaf_cap.0 });
        }
        let input = LazyInput { n, k, domain, tape: RefCell::new(Tape { script, ..Tape::default() }) };
        let output = run_on(protocol, &input)?.output;
        let answer = evaluate(&input);
        let reads = input.tape.into_inner().reads;
        let fixed: u128 = reads.iter().map(|&(_, _, (lo, hi))| (hi - lo + 1) as u128).product();
        let weight = total / fixed;
        report.leaves += 1;
        covered += weight;
        if output == answer {
            report.correct += weight;
        }
        // Backtrack to the deepest read that still has an unexplored value.
        let Some(depth) = reads.iter().rposition(|&(_, value, (_, hi))| value < hi) else {
            break;
        };
        script = reads[..depth].iter().map(|&(_, value, _)| value).collect();
        script.push(reads[depth].1 + 1);
    }
    if covered != total {
        return Err(OracleError::Coverage { covered, total });
    }
    Ok(report)
}

/// Checks that the popcount oracle strictly increases along the dominance
/// order. Exhaustive over comparable pairs when `3^n <= 10^7`, otherwise
/// `10^6` seeded random pairs.
pub fn popcount_monotone_check(n: usize) -> bool {
    let width = ceil_log2(n + 1);
    let popcount = |g: &BitString| BitString::from_index(width, g.count_ones() as u64).to_index();
    let check = |x: &BitString, y: &BitString| popcount(x) < popcount(y);
    let exhaustive = 3u128.checked_pow(n as u32).is_some_and(|c| c <= 10_000_000);
    if exhaustive {
        // Each coordinate is one of (0,0), (0,1), (1,1); skip the all-equal pairs.
        let mut digits = vec![0u8; n];
        loop {
            if digits.contains(&1) {
                let x = BitString::new(digits.iter().map(|&d| d == 2).collect());
                let y = BitString::new(digits.iter().map(|&d| d >= 1).collect());
                if !check(&x, &y) {
                    return false;
                }
            }
            let Some(pos) = digits.iter().rposition(|&d| d < 2) else {
                return true;
            };
            digits[pos] += 1;
            digits[pos + 1..].iter_mut().for_each(|d| *d = 0);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    (0..1_000_000).all(|_| {
        let y = BitString::random(n, &mut rng);
        let ones: Vec<usize> = (1..=n).filter(|&s| y.get(s)).collect();
        if ones.is_empty() {
            return true;
        }
        // Clear a nonempty random subset of y's ones to get x < y.
        let mut x = y.clone();
        let forced = ones[rng.gen_range(0..ones.len())];
        x.set(forced, false);
        for &s in &ones {
            if rng.gen_bool(0.5) {
                x.set(s, false);
            }
        }
        check(&x, &y)
    })
}

/// Two-player protocol in which player 1 writes `table[x]` (a `t`-bit value
/// indexed by `x` read as a binary number) and player 2 answers with the
/// first message bit, or 0 when silent.
pub fn table_protocol(n: usize, t: usize, table: Vec<u64>) -> Result<ProtocolDef, ProtocolError> {
    if table.len() != 1 << n || table.iter().any(|&m| t < 64 && m >> t != 0) {
        return Err(ProtocolError::InvalidDefinition("table must map every x to a t-bit value".into()));
    }
    let table = Arc::new(table);
    let message: MessageFn = Arc::new(move |view| {
        let g = view.composition().expect("player 1 sees x through the composition");
        BitString::from_index(t, table[g.to_index() as usize])
    });
    let output: OutputFn = Arc::new(|view| view.messages()[0].iter().next().unwrap_or(false));
    ProtocolDef::new(ProtocolId::new("table", vec![n, t]), n, 2, ViewModel::Collapsing, vec![t], vec![message], output)
}

/// Enumerates every two-player protocol with a `t`-bit message at width `n`
/// and reports how many admit a fooling certificate (found by
/// [`brute_force_fooling_search`] and rechecked by `verify`).
pub fn two_player_exhaustion(
    n: usize,
    t: usize,
    cap: EnumerationCap,
    verify: impl Fn(&FoolingCertificate, &ProtocolDef) -> bool,
) -> Result<(u128, u128), OracleError> {
    let inputs = 1usize << n;
    let count = (1u128 << t)
        .checked_pow(inputs as u32)
        .filter(|&c| c <= cap.0)
        .ok_or(OracleError::CapExceeded { count: format!("2^({t}*2^{n}) protocols"), cap: cap.0 })?;
    let mut fooled = 0u128;
    let mut table = vec![0u64; inputs];
    for _ in 0..count {
        let protocol = table_protocol(n, t, table.clone())?;
        if let Some(cert) = brute_force_fooling_search(&protocol, cap)? {
            if verify(&cert, &protocol) {
                fooled += 1;
            }
        }
        // Next table in base 2^t.
        for entry in table.iter_mut().rev() {
            *entry += 1;
            if *entry < 1 << t {
                break;
            }
            *entry = 0;
        }
    }
    Ok((count, fooled))
}

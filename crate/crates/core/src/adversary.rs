//! The constructive adversary against cheap collapsing protocols.
//!
//! [`attack`] chains the extension steps from [`crate::lemmas`] through
//! players `1..k-1` and packages the resulting pair of inputs as a
//! [`FoolingCertificate`]: two instances sharing every pointer that receive
//! the same transcript but have different answers. [`verify_certificate`]
//! checks such a certificate from scratch by rerunning the protocol.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{chain_budget_bound, crossing_budget_cap, fits, pinned_budget_cap, uniform_budget_cap};
use crate::lemmas::{
    chainpush, crosspush, find_chain_collision, find_plain_collision, push, FoolingState, LemmaError,
    MessageOracle, SpeakerOracle,
};
use crate::model::{evaluate, index_partition, BitString, Instance, ModelError, PointerFn};
use crate::protocol::{run, InstanceDomain, ProtocolDef, ProtocolError, ProtocolId, ViewModel};
use crate::protocols::ProtocolSpec;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("construction failed: {0}")]
    ConstructionFailed(#[from] LemmaError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How the protocol in a certificate is identified.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertifiedProtocol {
    pub name: String,
    pub params: Vec<usize>,
    pub budgets: Vec<usize>,
}

/// Two inputs that share `start` and all middle layers and differ only in the
/// last layer (`x` versus `x_prime`). Both receive the same transcript while
/// their answers differ.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoolingCertificate {
    pub n: usize,
    pub k: usize,
    pub protocol: CertifiedProtocol,
    pub start: usize,
    pub middles: Vec<PointerFn>,
    pub x: BitString,
    pub x_prime: BitString,
    /// Messages written on both instances, in speaking order.
    pub transcript: Vec<BitString>,
    #[serde(with = "bit_pair")]
    pub outputs: [bool; 2],
}

mod bit_pair {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[bool; 2], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(bits.iter().map(|&b| b as u8))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[bool; 2], D::Error> {
        let raw = <[u8; 2]>::deserialize(d)?;
        let bit = |v: u8| match v {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("expected bit 0 or 1, got {other}"))),
        };
        Ok([bit(raw[0])?, bit(raw[1])?])
    }
}

impl FoolingCertificate {
    pub fn instances(&self) -> Result<(Instance, Instance), ModelError> {
        Ok((
            Instance::new(self.start, self.middles.clone(), self.x.clone())?,
            Instance::new(self.start, self.middles.clone(), self.x_prime.clone())?,
        ))
    }

    pub fn protocol_id(&self) -> ProtocolId {
        ProtocolId::new(self.protocol.name.clone(), self.protocol.params.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialises")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

fn violated(msg: String) -> AdversaryError {
    AdversaryError::PreconditionViolated(msg)
}

fn check_target(protocol: &ProtocolDef) -> Result<(), AdversaryError> {
    let k = protocol.k();
    if protocol.view_model() != ViewModel::Collapsing {
        return Err(violated(format!("view model must be collapsing, got {}", protocol.view_model())));
    }
    if !protocol.has_identity_order() {
        return Err(violated("players must speak in order 1, 2, .., k".into()));
    }
    if protocol.domain() != InstanceDomain::Full {
        return Err(violated("protocol must be required correct on every instance".into()));
    }
    if k < 3 {
        return Err(violated(format!("k >= 3 (got k = {k})")));
    }
    Ok(())
}

/// Runs the adversary and returns every intermediate fooling state, from
/// stage 1 to stage `k - 1`.
///
/// Needs a collapsing protocol in identity order with `k >= 3`, `n >= 8` and
/// total cost at most `n - 3`.
pub fn attack_with_trace(protocol: &ProtocolDef) -> Result<Vec<FoolingState>, AdversaryError> {
    check_target(protocol)?;
    let (n, k) = (protocol.n(), protocol.k());
    if n < 8 {
        return Err(violated(format!("n >= 8 (got n = {n})")));
    }
    let budgets = protocol.budgets();
    let total: usize = budgets.iter().sum();
    if !fits(total, pinned_budget_cap(n)) {
        return Err(violated(format!("sum of t_i <= n - 3 (got {total} > {})", pinned_budget_cap(n))));
    }

    let chain_bound = chain_budget_bound(n);
    let first = SpeakerOracle::first(protocol)?;
    let mut states = Vec::with_capacity(k - 1);
    let mut pushed;
    if budgets[0] as i64 >= chain_bound {
        // Player 1 is expensive, so everyone after it is cheap enough to cross.
        let (x, y) = find_plain_collision(&first, n)?;
        let start = first_difference(&x, &y)?;
        let alpha = first.message(&x)?;
        states.push(FoolingState::initial(k, x, y, start, alpha)?);
        pushed = true;
    } else {
        let (x, y) = find_chain_collision(&first, n)?;
        let start = index_partition(&x, &y)?.i01[0];
        let alpha = first.message(&x)?;
        states.push(FoolingState::initial(k, x, y, start, alpha)?);
        pushed = false;
    }
    for h in 2..k {
        let state = states.last().expect("stage 1 exists");
        let oracle = SpeakerOracle::next(protocol, state)?;
        let t = budgets[h - 1];
        let next = if pushed {
            if !fits(t, crossing_budget_cap(n)) {
                return Err(LemmaError::Invariant(format!(
                    "player {h} writes {t} bits, above the crossing cap {}",
                    crossing_budget_cap(n)
                ))
                .into());
            }
            crosspush(state, &oracle)?
        } else if (t as i64) < chain_bound && h < k - 1 {
            chainpush(state, &oracle)?
        } else {
            pushed = true;
            push(state, &oracle)?
        };
        states.push(next);
    }
    Ok(states)
}

/// Builds a fooling certificate against a collapsing protocol of total cost
/// at most `n - 3`.
pub fn attack(protocol: &ProtocolDef) -> Result<FoolingCertificate, AdversaryError> {
    let states = attack_with_trace(protocol)?;
    certify(protocol, states.last().expect("at least one stage"))
}

/// Variant for protocols bounded per player rather than in total: plain
/// collision for player 1, then crossing steps throughout.
///
/// Needs `k >= 3`, `n >= 4`, `t_1 <= n - 1` and
/// `t_i <= n - ⌈0.5·log2 n⌉ - 3` for `2 <= i <= k - 1`.
pub fn attack_uniform(protocol: &ProtocolDef) -> Result<FoolingCertificate, AdversaryError> {
    attack_uniform_with_trace(protocol).and_then(|states| certify(protocol, states.last().expect("stage 1")))
}

pub fn attack_uniform_with_trace(protocol: &ProtocolDef) -> Result<Vec<FoolingState>, AdversaryError> {
    check_target(protocol)?;
    let (n, k) = (protocol.n(), protocol.k());
    if n < 4 {
        return Err(violated(format!("n >= 4 (got n = {n})")));
    }
    let budgets = protocol.budgets();
    if budgets[0] >= n {
        return Err(violated(format!("t_1 <= n - 1 (got t_1 = {} > {})", budgets[0], n - 1)));
    }
    let cap = uniform_budget_cap(n);
    if let Some((i, &t)) = budgets.iter().enumerate().skip(1).find(|(_, &t)| !fits(t, cap)) {
        return Err(violated(format!(
            "t_i <= n - ceil(0.5 log2 n) - 3 for i >= 2 (got t_{} = {t} > {cap})",
            i + 1
        )));
    }
    let first = SpeakerOracle::first(protocol)?;
    let (x, y) = find_plain_collision(&first, n)?;
    let start = first_difference(&x, &y)?;
    let alpha = first.message(&x)?;
    let mut states = vec![FoolingState::initial(k, x, y, start, alpha)?];
    for _ in 2..k {
        let state = states.last().expect("stage 1 exists");
        let next = crosspush(state, &SpeakerOracle::next(protocol, state)?)?;
        states.push(next);
    }
    Ok(states)
}

fn first_difference(x: &BitString, y: &BitString) -> Result<usize, LemmaError> {
    (1..=x.len())
        .find(|&s| x.get(s) != y.get(s))
        .ok_or_else(|| LemmaError::Invariant("collision strings are equal".into()))
}

/// Turns a final-stage fooling state into a certificate, rerunning the
/// protocol on both instances.
pub fn certify(protocol: &ProtocolDef, state: &FoolingState) -> Result<FoolingCertificate, AdversaryError> {
    if state.j + 1 != state.k {
        return Err(LemmaError::Precondition(format!("state at stage {} is not final", state.j)).into());
    }
    let inst = Instance::new(state.f_prefix.start, state.f_prefix.middles.clone(), state.x.clone())?;
    let twin = inst.with_x(state.y.clone())?;
    let transcript = run(protocol, &inst)?;
    if run(protocol, &twin)? != transcript {
        return Err(LemmaError::Invariant("the two instances receive different transcripts".into()).into());
    }
    let outputs = [evaluate(&inst), evaluate(&twin)];
    if outputs[0] == outputs[1] {
        return Err(LemmaError::Invariant("the two instances have the same answer".into()).into());
    }
    Ok(FoolingCertificate {
        n: protocol.n(),
        k: protocol.k(),
        protocol: CertifiedProtocol {
            name: protocol.id().name.clone(),
            params: protocol.id().params.clone(),
            budgets: protocol.budgets().to_vec(),
        },
        start: inst.start(),
        middles: inst.middles().to_vec(),
        x: state.x.clone(),
        x_prime: state.y.clone(),
        transcript: transcript.messages,
        outputs,
    })
}

/// Checks a certificate against a built-in protocol rebuilt from its name.
/// Malformed certificates (unknown protocol, bad dimensions) are errors;
/// well-formed but wrong ones yield [`Verdict::Invalid`].
pub fn verify_certificate(cert: &FoolingCertificate) -> Result<Verdict, AdversaryError> {
    let spec = ProtocolSpec::from_id(&cert.protocol_id())
        .map_err(|e| AdversaryError::Protocol(ProtocolError::InvalidDefinition(e)))?;
    let protocol = spec.build(cert.n, cert.k)?;
    verify_certificate_with(cert, &protocol)
}

/// Checks a certificate against the given protocol.
pub fn verify_certificate_with(cert: &FoolingCertificate, protocol: &ProtocolDef) -> Result<Verdict, AdversaryError> {
    let (a, b) = cert.instances()?;
    if a.n() != cert.n || a.k() != cert.k {
        return Err(ModelError::InvalidInstance(format!(
            "certificate claims n={}, k={} but its layers give n={}, k={}",
            cert.n,
            cert.k,
            a.n(),
            a.k()
        ))
        .into());
    }
    protocol.check_dimensions(&a)?;
    let invalid = |msg: String| Ok(Verdict::Invalid(msg));
    if protocol.id() != &cert.protocol_id() {
        return invalid(format!("certificate names {} but protocol is {}", cert.protocol_id(), protocol.id()));
    }
    if protocol.budgets() != cert.protocol.budgets.as_slice() {
        return invalid(format!(
            "claimed budgets {:?} differ from the protocol's {:?}",
            cert.protocol.budgets,
            protocol.budgets()
        ));
    }
    let domain = protocol.domain();
    if !domain.admits(&a) || !domain.admits(&b) {
        return invalid("an instance lies outside the protocol's domain".into());
    }
    let answers = [evaluate(&a), evaluate(&b)];
    if answers != cert.outputs {
        return invalid(format!("claimed answers {:?} but evaluation gives {:?}", cert.outputs, answers));
    }
    if answers[0] == answers[1] {
        return invalid("both instances have the same answer".into());
    }
    let (ta, tb) = (run(protocol, &a)?, run(protocol, &b)?);
    if ta != tb {
        return invalid("the protocol distinguishes the two instances".into());
    }
    if ta.messages != cert.transcript {
        return invalid("recorded transcript does not match a fresh run".into());
    }
    if ta.output == answers[0] && ta.output == answers[1] {
        return invalid("protocol answers both instances correctly".into());
    }
    Ok(Verdict::Valid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{cheating_protocol, hashed_protocol, trivial_protocol, truncated_protocol, CheatingBase};

    fn replay_all(protocol: &ProtocolDef, states: &[FoolingState]) {
        for (i, s) in states.iter().enumerate() {
            assert_eq!(s.j, i + 1);
            s.check_fooling().unwrap();
            s.check_consistency(protocol).unwrap();
        }
    }

    #[test]
    fn silent_protocol_is_fooled() {
        let p = cheating_protocol(CheatingBase::Silent, 8, 3, 0).unwrap();
        let states = attack_with_trace(&p).unwrap();
        replay_all(&p, &states);
        let cert = attack(&p).unwrap();
        assert_eq!(verify_certificate(&cert).unwrap(), Verdict::Valid);
        assert_ne!(cert.outputs[0], cert.outputs[1]);
    }

    #[test]
    fn both_cases_are_exercised() {
        // t_1 = 0 goes through the chain route, t_1 = 5 through the plain one.
        for budgets in [[0, 0, 5], [5, 0, 0], [0, 3, 1], [1, 0, 4]] {
            let p = truncated_protocol(8, 4, &budgets).unwrap();
            let states = attack_with_trace(&p).unwrap();
            replay_all(&p, &states);
            let cert = certify(&p, states.last().unwrap()).unwrap();
            assert!(verify_certificate(&cert).unwrap().is_valid(), "{budgets:?}");
        }
    }

    #[test]
    fn hashed_protocols_are_fooled() {
        for seed in 0..40u64 {
            let k = 3 + (seed % 3) as usize;
            let mut budgets = vec![0; k - 1];
            budgets[(seed as usize) % (k - 1)] = (seed % 6) as usize;
            let p = hashed_protocol(9, k, seed, &budgets).unwrap();
            let states = attack_with_trace(&p).unwrap();
            replay_all(&p, &states);
            let cert = certify(&p, states.last().unwrap()).unwrap();
            assert!(verify_certificate(&cert).unwrap().is_valid(), "seed {seed}");
        }
    }

    #[test]
    fn preconditions_name_the_inequality() {
        let p = trivial_protocol(8, 3).unwrap();
        let msg = attack(&p).unwrap_err().to_string();
        assert!(msg.contains("n - 3"), "{msg}");
        let small = cheating_protocol(CheatingBase::Silent, 6, 3, 0).unwrap();
        assert!(attack(&small).unwrap_err().to_string().contains("n >= 8"));
        let two = cheating_protocol(CheatingBase::Silent, 8, 2, 0).unwrap();
        assert!(attack(&two).unwrap_err().to_string().contains("k >= 3"));
        let reordered = crate::protocols::reordered_protocol(8, 3, 3, 2).unwrap();
        assert!(matches!(attack(&reordered), Err(AdversaryError::PreconditionViolated(_))));
    }

    #[test]
    fn uniform_attack_and_its_caps() {
        // n = 12: uniform cap is 12 - 2 - 3 = 7.
        let p = truncated_protocol(12, 4, &[11, 7, 7]).unwrap();
        let cert = attack_uniform(&p).unwrap();
        assert!(verify_certificate(&cert).unwrap().is_valid());
        let over = truncated_protocol(12, 4, &[11, 8, 7]).unwrap();
        let msg = attack_uniform(&over).unwrap_err().to_string();
        assert!(msg.contains("t_2 = 8"), "{msg}");
    }

    #[test]
    fn mutated_certificate_is_rejected() {
        let p = cheating_protocol(CheatingBase::TruncatedTrivial, 8, 3, 5).unwrap();
        let cert = attack(&p).unwrap();
        let mut bad = cert.clone();
        // Redirect the on-path pointer to a position where x and x' agree.
        let (inst, _) = cert.instances().unwrap();
        let agree = (1..=8).find(|&s| cert.x.get(s) == cert.x_prime.get(s)).unwrap();
        let mut table = inst.middles()[0].values().to_vec();
        table[cert.start - 1] = agree;
        bad.middles[0] = PointerFn::new(table).unwrap();
        assert!(!verify_certificate(&bad).unwrap().is_valid());

        let mut flipped = cert.clone();
        flipped.outputs = [cert.outputs[1], cert.outputs[0]];
        assert!(!verify_certificate(&flipped).unwrap().is_valid());

        let mut wrong_budget = cert.clone();
        wrong_budget.protocol.budgets = vec![0, 4];
        assert!(!verify_certificate(&wrong_budget).unwrap().is_valid());

        let mut unknown = cert;
        unknown.protocol.name = "bogus".into();
        assert!(verify_certificate(&unknown).is_err());
    }

    #[test]
    fn stage_pairs_are_suffixes_of_the_certificate() {
        for budgets in [[0, 0, 0, 5], [2, 1, 1, 1], [5, 0, 0, 0]] {
            let p = truncated_protocol(9, 5, &budgets).unwrap();
            let states = attack_with_trace(&p).unwrap();
            let cert = certify(&p, states.last().unwrap()).unwrap();
            let (a, b) = cert.instances().unwrap();
            for s in &states {
                assert_eq!(crate::model::compose_suffix(&a, s.j).unwrap(), s.x);
                assert_eq!(crate::model::compose_suffix(&b, s.j).unwrap(), s.y);
            }
        }
    }

    #[test]
    fn only_messages_cross_the_fooling_pair() {
        let p = hashed_protocol(10, 5, 3, &[1, 2, 2, 2]).unwrap();
        let cert = attack(&p).unwrap();
        let (a, b) = cert.instances().unwrap();
        for s in 1..=cert.k {
            let va = crate::protocol::build_view(&a, &p, s, &cert.transcript[..s - 1]).unwrap();
            let vb = crate::protocol::build_view(&b, &p, s, &cert.transcript[..s - 1]).unwrap();
            let (sa, sb) = (va.snapshot(), vb.snapshot());
            // Prefixes agree for everyone; the last player sees nothing else.
            assert_eq!((sa.start, &sa.middles), (sb.start, &sb.middles));
            if s == cert.k {
                assert_eq!(sa, sb);
            } else {
                assert_eq!(p.message(s, &va).unwrap(), p.message(s, &vb).unwrap());
            }
        }
    }

    #[test]
    fn certificate_json_shape() {
        let p = cheating_protocol(CheatingBase::FirstPlayer, 8, 3, 4).unwrap();
        let cert = attack(&p).unwrap();
        let json: serde_json::Value = serde_json::from_str(&cert.to_json()).unwrap();
        for key in ["n", "k", "protocol", "start", "middles", "x", "x_prime", "transcript", "outputs"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["protocol"]["name"], "first-player");
        let back: FoolingCertificate = serde_json::from_value(json).unwrap();
        assert_eq!(back, cert);
    }
}

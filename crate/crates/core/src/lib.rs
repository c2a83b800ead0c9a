//! Pointer jumping in the number-on-the-forehead model.
//!
//! The crate simulates one-round protocols for the boolean pointer-jumping
//! function under several information models and accounts their cost. It
//! also attacks collapsing protocols that talk too little: given such a
//! protocol, [`adversary::attack`] builds two inputs the players cannot tell
//! apart but whose answers differ, packaged as a checkable
//! [`adversary::FoolingCertificate`].

pub mod adversary;
pub mod bounds;
pub mod lemmas;
pub mod model;
pub mod oracle;
pub mod protocol;
pub mod protocols;

pub use model::{
    chain_string, compose_suffix, dominance_less, evaluate, index_partition, is_crossing,
    BitString, IndexPartition, InputSource, Instance, ModelError, PointerFn,
};
pub use protocol::{
    build_view, max_cost, run, run_on, total_cost, InstanceDomain, PlayerView, ProtocolDef,
    ProtocolError, ProtocolId, Transcript, ViewModel,
};

/// Serialises a bit as the integer 0 or 1.
pub(crate) mod bit_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bit: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*bit as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("expected bit 0 or 1, got {other}"))),
        }
    }
}

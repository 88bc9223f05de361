//! Canonical document encoding.
//!
//! Integers are lowercase hex strings without prefix or leading zeros.
//! Documents are JSON; struct fields serialize in declaration order and
//! nested maps in sorted key order, so `to_vec` output is a stable signing
//! input.

use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::arith::Natural;
use crate::error::{Error, Result};

/// `#[serde(with = "canon::hex")]` for a single integer field.
pub mod hex {
    use super::*;

    pub fn serialize<I: Natural, S: Serializer>(v: &I, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_hex())
    }

    pub fn deserialize<'de, I: Natural, D: Deserializer<'de>>(d: D) -> std::result::Result<I, D::Error> {
        let s = String::deserialize(d)?;
        I::from_hex(&s).ok_or_else(|| D::Error::custom(format!("not a canonical hex integer: {s:?}")))
    }
}

/// `#[serde(with = "canon::hex_vec")]` for a list of integers.
pub mod hex_vec {
    use super::*;

    pub fn serialize<I: Natural, S: Serializer>(v: &[I], s: S) -> std::result::Result<S::Ok, S::Error> {
        let strings: Vec<String> = v.iter().map(Natural::to_hex).collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, I: Natural, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<I>, D::Error> {
        let strings = Vec::<String>::deserialize(d)?;
        strings
            .iter()
            .map(|s| I::from_hex(s).ok_or_else(|| D::Error::custom(format!("not a canonical hex integer: {s:?}"))))
            .collect()
    }
}

pub fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("canonical types always serialize")
}

pub fn from_value<T: DeserializeOwned>(v: &serde_json::Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Malformed(e.to_string()))
}

pub fn to_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("canonical types always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    #[derive(Serialize, Deserialize, Debug, PartialEq)]
    struct Doc {
        #[serde(with = "hex")]
        a: u64,
        #[serde(with = "hex_vec")]
        b: Vec<BigUint>,
    }

    #[test]
    fn doc_roundtrip() {
        let d = Doc { a: 255, b: vec![BigUint::from(0u8), BigUint::from(4096u32)] };
        let s = String::from_utf8(to_bytes(&d)).unwrap();
        assert_eq!(s, r#"{"a":"ff","b":["0","1000"]}"#);
        assert_eq!(serde_json::from_str::<Doc>(&s).unwrap(), d);
        assert!(serde_json::from_str::<Doc>(r#"{"a":"FF","b":[]}"#).is_err());
    }
}

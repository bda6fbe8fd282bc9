//! Small shared helpers.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serializer;

/// Serializes a big integer as a decimal string.
pub(crate) fn ser_bigint<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

/// Serializes an exact rational as `p/q` (or `p` for integers).
pub(crate) fn ser_bigrational<S: Serializer>(x: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&crate::exact::format_rational(x))
}

/// `#[serde(with = ...)]` codec for vectors of big integers.
pub(crate) mod bigint_vec {
    use num_bigint::BigInt;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        let strings: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let strings: Vec<String> = Vec::deserialize(d)?;
        strings
            .iter()
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| D::Error::custom(format!("bad integer {s:?}")))
            })
            .collect()
    }
}

/// splitmix64 step; deterministic across platforms, used wherever a seeded
/// sample is needed.
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

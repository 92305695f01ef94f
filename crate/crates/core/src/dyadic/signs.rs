//! Sign fields `σ_m(t)` of the flexible class: one `±1` per level-`m`
//! dyadic cell `[(k-1)2^{-m}, k2^{-m})`, `k = 1, …, 2^m`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type Predicate = dyn Fn(u32, u64) -> bool + Send + Sync;

/// Named deterministic sign rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinRule {
    /// `σ_m ≡ (-1)^m`.
    AlternateLevel,
    /// `σ_m` on cell `k` is `(-1)^{k+1}`.
    AlternateCell,
    /// Thue-Morse parity of the cell index `k - 1`.
    ThueMorse,
}

impl BuiltinRule {
    const ALL: [(BuiltinRule, &'static str); 3] = [
        (BuiltinRule::AlternateLevel, "alternate-level"),
        (BuiltinRule::AlternateCell, "alternate-cell"),
        (BuiltinRule::ThueMorse, "thue-morse"),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(r, _)| *r == self).map(|(_, n)| *n).expect("listed")
    }

    #[inline]
    fn flips(self, m: u32, k: u64) -> bool {
        match self {
            BuiltinRule::AlternateLevel => m % 2 == 1,
            BuiltinRule::AlternateCell => k.is_multiple_of(2),
            BuiltinRule::ThueMorse => (k - 1).count_ones() % 2 == 1,
        }
    }
}

/// Assignment of a sign to every dyadic cell `(m, k)`.
#[derive(Clone)]
pub enum SignField {
    /// All signs `+1`: the plain Takagi class.
    Classic,
    Rule(BuiltinRule),
    /// User-supplied predicate; `true` means the sign is `-1`.
    Custom {
        name: String,
        flips: Arc<Predicate>,
    },
    /// I.i.d. symmetric signs keyed by `(seed, m, k)`.
    Random {
        seed: u64,
    },
}

impl SignField {
    pub fn random(seed: u64) -> Self {
        SignField::Random { seed }
    }

    pub fn custom(name: impl Into<String>, flips: impl Fn(u32, u64) -> bool + Send + Sync + 'static) -> Self {
        SignField::Custom { name: name.into(), flips: Arc::new(flips) }
    }

    pub fn is_classic(&self) -> bool {
        matches!(self, SignField::Classic)
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            SignField::Random { seed } => Some(*seed),
            _ => None,
        }
    }

    /// `σ_m` on the cell with 1-based index `k ∈ [1, 2^m]`.
    #[inline]
    pub fn sign(&self, m: u32, k: u64) -> f64 {
        let flip = match self {
            SignField::Classic => false,
            SignField::Rule(rule) => rule.flips(m, k),
            SignField::Custom { flips, .. } => flips(m, k),
            SignField::Random { seed } => random_bit(*seed, m, k - 1),
        };
        if flip {
            -1.0
        } else {
            1.0
        }
    }

    /// `σ_m(t)`, with `t = 1` assigned to the last cell.
    pub fn sign_at(&self, m: u32, t: f64) -> f64 {
        let cells = 2f64.powi(m as i32);
        let k = ((t * cells).floor() as u64).saturating_add(1).min(cells as u64);
        self.sign(m, k.max(1))
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based sign bit: one 64-bit hash serves 64 consecutive cells.
#[inline]
fn random_bit(seed: u64, m: u32, cell: u64) -> bool {
    let level_key = mix64(seed ^ mix64((m as u64 + 1).wrapping_mul(GOLDEN)));
    let word = mix64(level_key.wrapping_add((cell >> 6).wrapping_mul(GOLDEN)));
    (word >> (cell & 63)) & 1 == 1
}

impl fmt::Debug for SignField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SignField({self})")
    }
}

impl PartialEq for SignField {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (SignField::Classic, SignField::Classic) => true,
            (SignField::Rule(a), SignField::Rule(b)) => a == b,
            (SignField::Custom { name: a, flips: fa }, SignField::Custom { name: b, flips: fb }) => {
                a == b && Arc::ptr_eq(fa, fb)
            }
            (SignField::Random { seed: a }, SignField::Random { seed: b }) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for SignField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignField::Classic => write!(f, "classic"),
            SignField::Rule(r) => write!(f, "rule:{}", r.name()),
            SignField::Custom { name, .. } => write!(f, "custom:{name}"),
            SignField::Random { seed } => write!(f, "random:seed={seed}"),
        }
    }
}

impl FromStr for SignField {
    type Err = Error;

    /// `classic`, `random:seed=S`, or `rule:NAME` with NAME one of
    /// `alternate-level`, `alternate-cell`, `thue-morse`.
    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: &str| Error::Parse { input: s.to_string(), reason: reason.to_string() };
        let s = s.trim();
        if s == "classic" {
            return Ok(SignField::Classic);
        }
        if let Some(rest) = s.strip_prefix("random:") {
            let seed = rest
                .strip_prefix("seed=")
                .ok_or_else(|| err("expected random:seed=S"))?
                .parse::<u64>()
                .map_err(|_| err("seed must be an unsigned integer"))?;
            return Ok(SignField::Random { seed });
        }
        if let Some(name) = s.strip_prefix("rule:") {
            return BuiltinRule::ALL
                .iter()
                .find(|(_, n)| *n == name)
                .map(|(r, _)| SignField::Rule(*r))
                .ok_or_else(|| err("unknown rule (alternate-level, alternate-cell, thue-morse)"));
        }
        Err(err("expected classic, random:seed=S or rule:NAME"))
    }
}

impl Serialize for SignField {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SignField {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queries_are_stable() {
        for field in [SignField::Classic, SignField::random(7), SignField::Rule(BuiltinRule::ThueMorse)] {
            for m in 0..12 {
                for k in 1..=(1u64 << m).min(300) {
                    assert_eq!(field.sign(m, k), field.sign(m, k));
                }
            }
        }
    }

    #[test]
    fn equal_seeds_agree_and_different_seeds_differ() {
        let (a, b, c) = (SignField::random(42), SignField::random(42), SignField::random(43));
        let mut differ = 0;
        for m in 0..16 {
            for k in 1..=(1u64 << m).min(1000) {
                assert_eq!(a.sign(m, k), b.sign(m, k));
                if a.sign(m, k) != c.sign(m, k) {
                    differ += 1;
                }
            }
        }
        assert!(differ > 1000);
    }

    #[test]
    fn random_signs_are_balanced() {
        let field = SignField::random(1);
        let total: f64 = (1..=1_000_000u64).map(|k| field.sign(20, k)).sum();
        // 5 standard deviations of a ±1 walk
        assert!(total.abs() < 5000.0, "{total}");
        let levels: f64 = (0..4000).map(|m| field.sign(m, 1)).sum();
        assert!(levels.abs() < 320.0);
    }

    #[test]
    fn sign_at_uses_half_open_cells() {
        let field = SignField::Rule(BuiltinRule::AlternateCell);
        assert_eq!(field.sign_at(1, 0.0), 1.0);
        assert_eq!(field.sign_at(1, 0.49), 1.0);
        assert_eq!(field.sign_at(1, 0.5), -1.0);
        assert_eq!(field.sign_at(1, 1.0), -1.0);
    }

    #[test]
    fn textual_form_roundtrips() {
        for s in ["classic", "random:seed=42", "rule:alternate-level", "rule:thue-morse"] {
            let f: SignField = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
        }
        assert!("random:42".parse::<SignField>().is_err());
        assert!("rule:nope".parse::<SignField>().is_err());
    }

    #[test]
    fn custom_predicates_flip() {
        let f = SignField::custom("odd-levels", |m, _| m % 2 == 1);
        assert_eq!(f.sign(0, 1), 1.0);
        assert_eq!(f.sign(3, 5), -1.0);
    }
}

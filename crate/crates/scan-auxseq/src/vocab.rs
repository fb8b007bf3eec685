//! Symbol tables for the four sequence channels.
//!
//! PAD is id 0 in every table. The three decoder-side tables additionally
//! reserve SOS=1 and EOS=2. Content ids follow in a fixed canonical order,
//! so the tables are identical across runs and machines; each table also
//! exposes an FNV-1a hash that checkpoints store and validate.

use crate::auxgen::{AUX1_MAX, AUX2_MAX};
use crate::grammar::{Action, Word};
use serde::{Deserialize, Serialize};

pub const PAD: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;

/// Offset of the first content id in the decoder-side tables.
pub const CONTENT_BASE: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabSet {
    pub input: Vec<String>,
    pub action: Vec<String>,
    pub aux1: Vec<String>,
    pub aux2: Vec<String>,
}

impl VocabSet {
    pub fn standard() -> VocabSet {
        let mut input = vec!["<pad>".to_string()];
        input.extend(Word::ALL.iter().map(|w| w.as_str().to_string()));

        let specials = ["<pad>", "<sos>", "<eos>"];
        let mut action: Vec<String> = specials.iter().map(|s| s.to_string()).collect();
        action.extend(Action::ALL.iter().map(|a| a.name().to_string()));

        let mut aux1: Vec<String> = specials.iter().map(|s| s.to_string()).collect();
        aux1.extend((0..=AUX1_MAX).map(|v| v.to_string()));

        let mut aux2: Vec<String> = specials.iter().map(|s| s.to_string()).collect();
        aux2.extend((0..=AUX2_MAX).map(|v| v.to_string()));

        VocabSet {
            input,
            action,
            aux1,
            aux2,
        }
    }

    pub fn input_size(&self) -> usize {
        self.input.len()
    }
    pub fn action_size(&self) -> usize {
        self.action.len()
    }
    pub fn aux1_size(&self) -> usize {
        self.aux1.len()
    }
    pub fn aux2_size(&self) -> usize {
        self.aux2.len()
    }

    pub fn input_id(&self, w: Word) -> usize {
        1 + Word::ALL.iter().position(|x| *x == w).unwrap()
    }

    pub fn action_id(&self, a: Action) -> usize {
        CONTENT_BASE + Action::ALL.iter().position(|x| *x == a).unwrap()
    }

    pub fn action_from_id(&self, id: usize) -> Option<Action> {
        id.checked_sub(CONTENT_BASE)
            .and_then(|i| Action::ALL.get(i).copied())
    }

    pub fn aux_id(&self, value: u8) -> usize {
        CONTENT_BASE + value as usize
    }

    pub fn aux_value_from_id(&self, id: usize) -> Option<u8> {
        id.checked_sub(CONTENT_BASE).map(|v| v as u8)
    }

    /// FNV-1a over a table's tokens, `\x1f`-separated.
    pub fn table_hash(table: &[String]) -> u64 {
        let mut h: u64 = 0xCBF29CE484222325;
        for tok in table {
            for b in tok.as_bytes() {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001B3);
            }
            h ^= 0x1F;
            h = h.wrapping_mul(0x100000001B3);
        }
        h
    }

    pub fn hashes(&self) -> [u64; 4] {
        [
            Self::table_hash(&self.input),
            Self::table_hash(&self.action),
            Self::table_hash(&self.aux1),
            Self::table_hash(&self.aux2),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_specials() {
        let v = VocabSet::standard();
        assert_eq!(v.input_size(), 14); // PAD + 13 words
        assert_eq!(v.action_size(), 9); // PAD/SOS/EOS + 6 actions
        assert_eq!(v.aux1_size(), 9); // PAD/SOS/EOS + ids 0..=5
        assert_eq!(v.aux2_size(), 19); // PAD/SOS/EOS + ids 0..=15
        assert_eq!(v.input[PAD], "<pad>");
        assert_eq!(v.action[SOS], "<sos>");
        assert_eq!(v.aux2[EOS], "<eos>");
    }

    #[test]
    fn ids_round_trip() {
        let v = VocabSet::standard();
        for a in Action::ALL {
            assert_eq!(v.action_from_id(v.action_id(a)), Some(a));
        }
        for val in 0..=15u8 {
            assert_eq!(v.aux_value_from_id(v.aux_id(val)), Some(val));
        }
        for w in Word::ALL {
            let id = v.input_id(w);
            assert!(id >= 1 && id < v.input_size());
            assert_eq!(v.input[id], w.as_str());
        }
    }

    #[test]
    fn hashes_are_stable_within_a_build() {
        let a = VocabSet::standard().hashes();
        let b = VocabSet::standard().hashes();
        assert_eq!(a, b);
        assert_eq!(a.iter().collect::<std::collections::HashSet<_>>().len(), 4);
    }
}

//! The classical database read by the copy stage.
//!
//! A bank holds `2^n` cells of `m` bits each. It never changes during a
//! query: copy gates read it, and switch state lives inside each basis
//! configuration rather than here, because a quantum-controlled toggle
//! entangles the switches with the walkers.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QramError, Result};
use crate::walker::{Bits, InternalState, MAX_ADDRESS_BITS, MAX_MESSAGE_BITS};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MemoryBank {
    n: u8,
    m: u8,
    cells: Vec<Bits>,
}

impl MemoryBank {
    /// Build a bank from messages listed in address order.
    pub fn new(n: u8, m: u8, cells: Vec<Bits>) -> Result<Self> {
        check_dims(n, m)?;
        if cells.len() as u64 != 1u64 << n {
            return Err(QramError::Bank(format!("expected {} cells for n={n}, got {}", 1u64 << n, cells.len())));
        }
        if let Some((a, bad)) = cells.iter().enumerate().find(|(_, c)| c.len() != m) {
            return Err(QramError::Bank(format!("cell {a} holds {} bits, expected m={m}", bad.len())));
        }
        Ok(Self { n, m, cells })
    }

    pub fn from_fn(n: u8, m: u8, mut f: impl FnMut(u64) -> Bits) -> Result<Self> {
        check_dims(n, m)?;
        Self::new(n, m, (0..1u64 << n).map(&mut f).collect())
    }

    /// Every cell holds the same message.
    pub fn uniform(n: u8, m: u8, message: Bits) -> Result<Self> {
        Self::from_fn(n, m, |_| message)
    }

    pub fn zeros(n: u8, m: u8) -> Result<Self> {
        Self::uniform(n, m, Bits::zeros(m))
    }

    pub fn random<R: Rng + ?Sized>(n: u8, m: u8, rng: &mut R) -> Result<Self> {
        let mask = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
        Self::from_fn(n, m, |_| Bits::new(rng.gen::<u64>() & mask, m).expect("masked"))
    }

    /// The bank whose contents, read as one `2^n * m`-bit integer with cell 0
    /// first, equal `index`. Enumerating `index` visits every bank once.
    pub fn from_index(n: u8, m: u8, index: u64) -> Result<Self> {
        let total = (1u32 << n) * m as u32;
        if total > 63 || index >> total != 0 {
            return Err(QramError::SizeCap(format!("bank index {index} out of range for n={n}, m={m}")));
        }
        let mask = (1u64 << m) - 1;
        Self::from_fn(n, m, |a| {
            let shift = total - (a as u32 + 1) * m as u32;
            Bits::new((index >> shift) & mask, m).expect("masked")
        })
    }

    /// Number of distinct banks of this shape, if it fits in a `u64`.
    pub fn count(n: u8, m: u8) -> Option<u64> {
        let total = (1u32 << n.min(6)) * m as u32;
        (n < 6 && total < 64).then(|| 1u64 << total)
    }

    pub fn n(&self) -> u8 {
        self.n
    }

    pub fn m(&self) -> u8 {
        self.m
    }

    pub fn cells(&self) -> &[Bits] {
        &self.cells
    }

    pub fn cell_lookup(&self, address: Bits) -> Result<Bits> {
        if address.len() != self.n {
            return Err(QramError::Validation(format!(
                "address {address} has {} bits, bank has n={}",
                address.len(),
                self.n
            )));
        }
        Ok(self.cells[address.value() as usize])
    }

    /// Message at cell index `a` (address value, `a1` most significant).
    pub fn cell(&self, a: u64) -> Bits {
        self.cells[a as usize]
    }

    /// Bit `j` (1-based) of cell `a`.
    pub fn bit(&self, a: u64, j: u8) -> bool {
        self.cells[a as usize].bit(j)
    }

    /// FNV-1a over the cell contents; used to assert the bank is untouched.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |byte: u8| {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        };
        feed(self.n);
        feed(self.m);
        for c in &self.cells {
            for b in c.value().to_le_bytes() {
                feed(b);
            }
        }
        h
    }

    pub fn to_document(&self) -> BankDocument {
        BankDocument {
            n: self.n,
            m: self.m,
            cells: self
                .cells
                .iter()
                .enumerate()
                .map(|(a, msg)| (Bits::new(a as u64, self.n).expect("in range").to_string(), msg.to_string()))
                .collect(),
        }
    }

    pub fn from_document(doc: &BankDocument) -> Result<Self> {
        check_dims(doc.n, doc.m).map_err(|e| QramError::Bank(e.to_string()))?;
        let mut cells = vec![None; 1usize << doc.n];
        for (addr, msg) in &doc.cells {
            let a: Bits = addr.parse().map_err(|_| QramError::Bank(format!("malformed address {addr:?}")))?;
            if a.len() != doc.n {
                return Err(QramError::Bank(format!("address {addr:?} does not have n={} bits", doc.n)));
            }
            let b: Bits = msg.parse().map_err(|_| QramError::Bank(format!("malformed message {msg:?} at {addr}")))?;
            if b.len() != doc.m {
                return Err(QramError::Bank(format!("message {msg:?} at {addr} does not have m={} bits", doc.m)));
            }
            cells[a.value() as usize] = Some(b);
        }
        let cells = cells
            .into_iter()
            .enumerate()
            .map(|(a, c)| {
                c.ok_or_else(|| QramError::MissingCell {
                    address: Bits::new(a as u64, doc.n).expect("in range").to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.n, doc.m, cells)
    }
}

fn check_dims(n: u8, m: u8) -> Result<()> {
    if n == 0 || m == 0 || n > MAX_ADDRESS_BITS || m >= MAX_MESSAGE_BITS {
        return Err(QramError::Configuration(format!("unsupported bank shape n={n}, m={m}")));
    }
    Ok(())
}

/// Walker state representing a stored bit: 1 is a memory walker, 0 is none.
pub fn memory_walker_state(bit: bool) -> InternalState {
    if bit {
        InternalState::Red
    } else {
        InternalState::Empty
    }
}

/// On-disk bank: `{"n": 2, "m": 1, "cells": {"00": "0", ...}}`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankDocument {
    pub n: u8,
    pub m: u8,
    pub cells: BTreeMap<String, String>,
}

pub fn load_bank(text: &str) -> Result<MemoryBank> {
    let doc: BankDocument =
        serde_json::from_str(text).map_err(|e| QramError::Bank(format!("malformed bank document: {e}")))?;
    MemoryBank::from_document(&doc)
}

/// Canonical text form: pretty JSON, sorted cells, trailing newline.
pub fn store_bank(bank: &MemoryBank) -> String {
    let mut text = serde_json::to_string_pretty(&bank.to_document()).expect("bank serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> Bits {
        s.parse().unwrap()
    }

    fn b4_bank() -> MemoryBank {
        MemoryBank::new(2, 1, vec![bits("0"), bits("0"), bits("1"), bits("0")]).unwrap()
    }

    #[test]
    fn lookup() {
        assert_eq!(b4_bank().cell_lookup(bits("10")).unwrap(), bits("1"));
        let b5 = MemoryBank::new(2, 1, vec![bits("1"), bits("0"), bits("0"), bits("0")]).unwrap();
        assert_eq!(b5.cell_lookup(bits("00")).unwrap(), bits("1"));
        assert_eq!(b5.cell_lookup(bits("11")).unwrap(), bits("0"));
        let zeros = MemoryBank::zeros(3, 4).unwrap();
        assert!(zeros.cells().iter().all(|c| *c == bits("0000")));
        assert!(b4_bank().cell_lookup(bits("100")).is_err());
    }

    #[test]
    fn shape_is_validated() {
        assert!(matches!(MemoryBank::new(2, 1, vec![bits("0")]), Err(QramError::Bank(_))));
        assert!(matches!(MemoryBank::new(1, 2, vec![bits("00"), bits("1")]), Err(QramError::Bank(_))));
    }

    #[test]
    fn memory_walker_mapping() {
        assert_eq!(memory_walker_state(true), InternalState::Red);
        assert_eq!(memory_walker_state(false), InternalState::Empty);
    }

    #[test]
    fn canonical_document_round_trip() {
        let text = store_bank(&b4_bank());
        assert_eq!(
            text,
            "{\n  \"n\": 2,\n  \"m\": 1,\n  \"cells\": {\n    \"00\": \"0\",\n    \"01\": \"0\",\n    \"10\": \"1\",\n    \"11\": \"0\"\n  }\n}\n"
        );
        let back = load_bank(&text).unwrap();
        assert_eq!(back, b4_bank());
        assert_eq!(store_bank(&back), text);
    }

    #[test]
    fn random_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.gen_range(1..=5);
            let m = rng.gen_range(1..=4);
            let bank = MemoryBank::random(n, m, &mut rng).unwrap();
            let text = store_bank(&bank);
            assert_eq!(load_bank(&text).unwrap(), bank);
            assert_eq!(store_bank(&load_bank(&text).unwrap()), text);
        }
    }

    #[test]
    fn document_errors() {
        let missing = r#"{"n":2,"m":1,"cells":{"00":"0","01":"1","11":"0"}}"#;
        assert_eq!(load_bank(missing), Err(QramError::MissingCell { address: "10".into() }));
        let bad_bits = r#"{"n":1,"m":1,"cells":{"0":"2","1":"0"}}"#;
        assert!(matches!(load_bank(bad_bits), Err(QramError::Bank(_))));
        let wrong_m = r#"{"n":1,"m":2,"cells":{"0":"1","1":"00"}}"#;
        assert!(matches!(load_bank(wrong_m), Err(QramError::Bank(_))));
        let extra = r#"{"n":1,"m":1,"cells":{"0":"1","1":"0"},"x":1}"#;
        assert!(matches!(load_bank(extra), Err(QramError::Bank(_))));
    }

    #[test]
    fn banks_enumerate_by_index() {
        let count = MemoryBank::count(2, 1).unwrap();
        assert_eq!(count, 16);
        let all: Vec<_> = (0..count).map(|i| MemoryBank::from_index(2, 1, i).unwrap()).collect();
        let distinct: std::collections::BTreeSet<_> = all.iter().map(store_bank).collect();
        assert_eq!(distinct.len(), 16);
        assert_eq!(all[0b0010], b4_bank());
    }

    #[test]
    fn checksum_tracks_contents() {
        let a = b4_bank();
        let b = MemoryBank::zeros(2, 1).unwrap();
        assert_eq!(a.checksum(), b4_bank().checksum());
        assert_ne!(a.checksum(), b.checksum());
    }
}

//! Packed binary words.

use std::fmt;

/// A fixed-length binary word packed into 64-bit limbs, bit `j` of the word
/// stored at bit `j % 64` of limb `j / 64`. Bits past `len` are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitWord {
    len: usize,
    limbs: Vec<u64>,
}

pub(crate) fn limbs_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitWord {
    pub fn zeros(len: usize) -> Self {
        BitWord {
            len,
            limbs: vec![0; limbs_for(len)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut w = BitWord::zeros(bits.len());
        for (j, &b) in bits.iter().enumerate() {
            w.set(j, b);
        }
        w
    }

    /// Parse a string of '0' and '1' characters.
    pub fn parse(s: &str) -> Option<Self> {
        let mut w = BitWord::zeros(s.len());
        for (j, c) in s.bytes().enumerate() {
            match c {
                b'0' => {}
                b'1' => w.set(j, true),
                _ => return None,
            }
        }
        Some(w)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        assert!(j < self.len, "bit index {j} out of range {}", self.len);
        (self.limbs[j / 64] >> (j % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, j: usize, value: bool) {
        assert!(j < self.len, "bit index {j} out of range {}", self.len);
        let mask = 1u64 << (j % 64);
        if value {
            self.limbs[j / 64] |= mask;
        } else {
            self.limbs[j / 64] &= !mask;
        }
    }

    pub fn limbs(&self) -> &[u64] {
        &self.limbs
    }

    pub fn count_ones(&self) -> usize {
        self.limbs.iter().map(|l| l.count_ones() as usize).sum()
    }

    pub fn hamming_distance(&self, other: &BitWord) -> usize {
        assert_eq!(self.len, other.len);
        self.limbs
            .iter()
            .zip(&other.limbs)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Positions where `self` and `other` agree, as a word of the same length.
    pub fn agreement(&self, other: &BitWord) -> BitWord {
        assert_eq!(self.len, other.len);
        let mut limbs: Vec<u64> = self
            .limbs
            .iter()
            .zip(&other.limbs)
            .map(|(a, b)| !(a ^ b))
            .collect();
        mask_tail(&mut limbs, self.len);
        BitWord {
            len: self.len,
            limbs,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |j| self.get(j))
    }
}

pub(crate) fn mask_tail(limbs: &mut [u64], len: usize) {
    let rem = len % 64;
    if rem != 0 {
        if let Some(last) = limbs.last_mut() {
            *last &= (1u64 << rem) - 1;
        }
    }
}

impl fmt::Display for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitWord({self})")
    }
}

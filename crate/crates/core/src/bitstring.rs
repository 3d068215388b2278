//! Fixed-width bit strings as carried in the BIER-TE header.
//!
//! Bit positions are 1-based and counted from the least significant bit, so
//! position 1 is the rightmost character of the binary rendering. Widths range
//! from 1 to [`MAX_WIDTH`] bits.

use std::fmt;
use std::ops::{BitAnd, BitOr, Not};
use std::str::FromStr;

use thiserror::Error;

/// Largest supported BitString Length.
pub const MAX_WIDTH: u16 = 256;

const WORDS: usize = (MAX_WIDTH as usize) / 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitStringError {
    #[error("bitstring width {0} outside 1..={MAX_WIDTH}")]
    InvalidWidth(usize),
    #[error("bitstring widths differ: {0} vs {1}")]
    WidthMismatch(u16, u16),
    #[error("bit position {index} outside 1..={width}")]
    OutOfRange { index: usize, width: u16 },
    #[error("expected {expected} bytes for width {width}, got {got}")]
    ByteLength {
        width: u16,
        expected: usize,
        got: usize,
    },
    #[error("bits set above width {0}")]
    Overflow(u16),
    #[error("invalid binary digit {0:?}")]
    BadDigit(char),
}

/// A packed bit vector of `width` bits.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    width: u16,
    // words[0] holds positions 1..=64, least significant bit first
    words: [u64; WORDS],
}

/// An addressable bit: a subset identifier plus the 1-based index inside the
/// bitstring of that subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitPosition {
    pub si: u16,
    pub index: u16,
}

impl BitPosition {
    pub fn new(si: u16, index: u16) -> Self {
        BitPosition { si, index }
    }
}

impl fmt::Display for BitPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.si, self.index)
    }
}

fn check_width(width: usize) -> Result<u16, BitStringError> {
    if width == 0 || width > MAX_WIDTH as usize {
        return Err(BitStringError::InvalidWidth(width));
    }
    Ok(width as u16)
}

impl BitString {
    /// All-zero bitstring of the given width.
    pub fn new(width: usize) -> Result<Self, BitStringError> {
        let width = check_width(width)?;
        Ok(BitString {
            width,
            words: [0; WORDS],
        })
    }

    /// All-ones bitstring of the given width.
    pub fn ones(width: usize) -> Result<Self, BitStringError> {
        Ok(!Self::new(width)?)
    }

    pub fn from_positions<I>(width: usize, positions: I) -> Result<Self, BitStringError>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut bs = Self::new(width)?;
        for p in positions {
            bs.set(p)?;
        }
        Ok(bs)
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    fn top_mask(&self) -> [u64; WORDS] {
        let mut mask = [0u64; WORDS];
        let w = self.width as usize;
        for (i, m) in mask.iter_mut().enumerate() {
            let lo = i * 64;
            if w >= lo + 64 {
                *m = u64::MAX;
            } else if w > lo {
                *m = (1u64 << (w - lo)) - 1;
            }
        }
        mask
    }

    fn locate(&self, index: usize) -> Result<(usize, u64), BitStringError> {
        if index == 0 || index > self.width as usize {
            return Err(BitStringError::OutOfRange {
                index,
                width: self.width,
            });
        }
        let off = index - 1;
        Ok((off / 64, 1u64 << (off % 64)))
    }

    fn same_width(&self, other: &BitString) -> Result<(), BitStringError> {
        if self.width != other.width {
            return Err(BitStringError::WidthMismatch(self.width, other.width));
        }
        Ok(())
    }

    pub fn test(&self, index: usize) -> Result<bool, BitStringError> {
        let (w, m) = self.locate(index)?;
        Ok(self.words[w] & m != 0)
    }

    pub fn set(&mut self, index: usize) -> Result<(), BitStringError> {
        let (w, m) = self.locate(index)?;
        self.words[w] |= m;
        Ok(())
    }

    pub fn clear(&mut self, index: usize) -> Result<(), BitStringError> {
        let (w, m) = self.locate(index)?;
        self.words[w] &= !m;
        Ok(())
    }

    /// Copy of `self` with `index` cleared.
    pub fn with_cleared(&self, index: usize) -> Result<BitString, BitStringError> {
        let mut out = *self;
        out.clear(index)?;
        Ok(out)
    }

    pub fn and(&self, other: &BitString) -> Result<BitString, BitStringError> {
        self.same_width(other)?;
        Ok(self.zip(other, |a, b| a & b))
    }

    pub fn or(&self, other: &BitString) -> Result<BitString, BitStringError> {
        self.same_width(other)?;
        Ok(self.zip(other, |a, b| a | b))
    }

    /// `self AND NOT mask`.
    pub fn and_not(&self, mask: &BitString) -> Result<BitString, BitStringError> {
        self.same_width(mask)?;
        Ok(self.zip(mask, |a, b| a & !b))
    }

    /// Applies a reset/add mask pair: `(self AND NOT reset) OR add`.
    pub fn rewrite(&self, reset: &BitString, add: &BitString) -> Result<BitString, BitStringError> {
        self.and_not(reset)?.or(add)
    }

    pub fn complement(&self) -> BitString {
        !*self
    }

    fn zip(&self, other: &BitString, f: impl Fn(u64, u64) -> u64) -> BitString {
        let mut out = *self;
        for i in 0..WORDS {
            out.words[i] = f(self.words[i], other.words[i]);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// True when every bit set in `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitString) -> bool {
        self.width == other.width
            && self
                .words
                .iter()
                .zip(other.words.iter())
                .all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &BitString) -> bool {
        self.words
            .iter()
            .zip(other.words.iter())
            .any(|(a, b)| a & b != 0)
    }

    /// Set positions in ascending order.
    pub fn iter_ones(&self) -> IterOnes {
        IterOnes {
            words: self.words,
            word: 0,
        }
    }

    /// Lowest set position, if any.
    pub fn first_one(&self) -> Option<usize> {
        self.iter_ones().next()
    }

    /// Big-endian byte form: `ceil(width / 8)` bytes, position 1 in the least
    /// significant bit of the last byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = (self.width as usize).div_ceil(8);
        (0..n)
            .map(|i| {
                // byte i from the right covers positions 8*i+1 ..= 8*i+8
                let from_right = n - 1 - i;
                let bit = from_right * 8;
                (self.words[bit / 64] >> (bit % 64)) as u8
            })
            .collect()
    }

    pub fn from_bytes(width: usize, bytes: &[u8]) -> Result<Self, BitStringError> {
        let mut bs = Self::new(width)?;
        let n = width.div_ceil(8);
        if bytes.len() != n {
            return Err(BitStringError::ByteLength {
                width: bs.width,
                expected: n,
                got: bytes.len(),
            });
        }
        for (i, b) in bytes.iter().enumerate() {
            let bit = (n - 1 - i) * 8;
            bs.words[bit / 64] |= (*b as u64) << (bit % 64);
        }
        let mask = bs.top_mask();
        if bs.words.iter().zip(mask.iter()).any(|(w, m)| w & !m != 0) {
            return Err(BitStringError::Overflow(bs.width));
        }
        Ok(bs)
    }

    /// Binary text, most significant position on the left, padded to width.
    pub fn to_binary_string(&self) -> String {
        (1..=self.width as usize)
            .rev()
            .map(|i| {
                if self.test(i).unwrap_or(false) {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    /// Hex text with a `0x` prefix, padded to `ceil(width / 4)` digits.
    pub fn to_hex_string(&self) -> String {
        let digits = (self.width as usize).div_ceil(4);
        let mut s = String::with_capacity(digits + 2);
        s.push_str("0x");
        for d in (0..digits).rev() {
            let bit = d * 4;
            let nibble = (self.words[bit / 64] >> (bit % 64)) & 0xf;
            s.push(char::from_digit(nibble as u32, 16).unwrap());
        }
        s
    }

    /// Dump rendering: binary for widths up to 32, hex above.
    pub fn render(&self) -> String {
        if self.width <= 32 {
            self.to_binary_string()
        } else {
            self.to_hex_string()
        }
    }
}

/// Ascending iterator over set positions.
pub struct IterOnes {
    words: [u64; WORDS],
    word: usize,
}

impl Iterator for IterOnes {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        while self.word < WORDS {
            let w = self.words[self.word];
            if w != 0 {
                let tz = w.trailing_zeros() as usize;
                self.words[self.word] &= w - 1;
                return Some(self.word * 64 + tz + 1);
            }
            self.word += 1;
        }
        None
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({})", self.render())
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Parses MSB-left binary text; the width is the number of digits.
impl FromStr for BitString {
    type Err = BitStringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits: Vec<char> = s.chars().filter(|c| *c != '_').collect();
        let mut bs = BitString::new(digits.len())?;
        for (i, c) in digits.iter().rev().enumerate() {
            match c {
                '1' => bs.set(i + 1)?,
                '0' => {}
                other => return Err(BitStringError::BadDigit(*other)),
            }
        }
        Ok(bs)
    }
}

// Operator forms are for call sites where equal widths hold by construction;
// they panic on mismatch.
impl BitAnd for BitString {
    type Output = BitString;

    fn bitand(self, rhs: BitString) -> BitString {
        self.and(&rhs).expect("bitstring width mismatch")
    }
}

impl BitOr for BitString {
    type Output = BitString;

    fn bitor(self, rhs: BitString) -> BitString {
        self.or(&rhs).expect("bitstring width mismatch")
    }
}

impl Not for BitString {
    type Output = BitString;

    fn not(self) -> BitString {
        let mask = self.top_mask();
        let mut out = self;
        for (w, m) in out.words.iter_mut().zip(mask) {
            *w = !*w & m;
        }
        out
    }
}

//! Fixed-width bit strings for outcomes and error syndromes.
//!
//! Bit `i` of the value is qubit `i`; qubit 0 is the least significant bit.
//! The text form prints the highest-index qubit first, so `"01001"` has
//! qubits 0 and 3 set.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported register width.
pub const MAX_WIDTH: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    value: u32,
    width: u8,
}

pub(crate) fn check_width(width: usize) -> Result<()> {
    if width == 0 || width > MAX_WIDTH {
        return Err(Error::WidthOutOfRange { width, max: MAX_WIDTH });
    }
    Ok(())
}

impl BitString {
    pub fn new(value: u32, width: usize) -> Result<Self> {
        check_width(width)?;
        if (value as u64) >> width != 0 {
            return Err(Error::ValueOutOfRange { value: value as u64, width });
        }
        Ok(Self { value, width: width as u8 })
    }

    pub fn zeros(width: usize) -> Result<Self> {
        Self::new(0, width)
    }

    pub fn ones(width: usize) -> Result<Self> {
        check_width(width)?;
        Self::new(((1u64 << width) - 1) as u32, width)
    }

    pub fn value(self) -> u32 {
        self.value
    }

    pub fn index(self) -> usize {
        self.value as usize
    }

    pub fn width(self) -> usize {
        self.width as usize
    }

    pub fn bit(self, qubit: usize) -> bool {
        (self.value >> qubit) & 1 == 1
    }

    pub fn weight(self) -> u32 {
        self.value.count_ones()
    }

    fn same_width(self, other: BitString) -> Result<()> {
        if self.width != other.width {
            return Err(Error::WidthMismatch {
                left: self.width(),
                right: other.width(),
            });
        }
        Ok(())
    }

    pub fn xor(self, other: BitString) -> Result<BitString> {
        self.same_width(other)?;
        Ok(BitString {
            value: self.value ^ other.value,
            width: self.width,
        })
    }

    /// Parity of `popcount(self & other)`, i.e. the exponent in `(-1)^{a·b}`.
    pub fn dot_parity(self, other: BitString) -> Result<u8> {
        self.same_width(other)?;
        Ok(dot_parity(self.value as usize, other.value as usize))
    }

    /// Number of linear-chain neighbours `(j, j+1)` that are both set.
    pub fn adjacent_pair_count(self) -> u32 {
        adjacent_pair_count(self.value as usize)
    }
}

/// Raw-index form of [`BitString::dot_parity`].
#[inline]
pub fn dot_parity(a: usize, b: usize) -> u8 {
    ((a & b).count_ones() & 1) as u8
}

/// Raw-index form of [`BitString::adjacent_pair_count`].
#[inline]
pub fn adjacent_pair_count(s: usize) -> u32 {
    (s & (s >> 1)).count_ones()
}

/// Render an index as a `width`-character string, highest qubit first.
pub fn format_bits(value: usize, width: usize) -> String {
    format!("{:0width$b}", value, width = width)
}

/// Parse a string of `0`/`1` characters whose length is the width.
pub fn parse_bits(text: &str) -> Result<(usize, usize)> {
    let b: BitString = text.parse()?;
    Ok((b.index(), b.width()))
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_bits(self.value as usize, self.width()))
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let width = s.len();
        if width == 0 || width > MAX_WIDTH || !s.bytes().all(|c| c == b'0' || c == b'1') {
            return Err(Error::ParseBitString(s.to_string()));
        }
        let value = u32::from_str_radix(s, 2).map_err(|_| Error::ParseBitString(s.to_string()))?;
        BitString::new(value, width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn xor_examples() {
        assert_eq!(b("01001").xor(b("10100")).unwrap(), b("11101"));
        assert_eq!(b("10110").xor(b("10110")).unwrap(), b("00000"));
        assert_eq!(b("0000").xor(b("0110")).unwrap(), b("0110"));
        assert!(matches!(
            b("000").xor(b("0000")),
            Err(Error::WidthMismatch { left: 3, right: 4 })
        ));
    }

    #[test]
    fn dot_parity_examples() {
        assert_eq!(b("11").dot_parity(b("11")).unwrap(), 0);
        assert_eq!(b("10").dot_parity(b("11")).unwrap(), 1);
        for i in 0..16 {
            let x = BitString::new(i, 4).unwrap();
            assert_eq!(x.dot_parity(BitString::zeros(4).unwrap()).unwrap(), 0);
        }
        assert!(b("1").dot_parity(b("11")).is_err());
    }

    #[test]
    fn adjacent_pairs() {
        assert_eq!(b("11101").adjacent_pair_count(), 2);
        assert_eq!(b("00000").adjacent_pair_count(), 0);
        assert_eq!(b("11111").adjacent_pair_count(), 4);
        assert_eq!(b("1").adjacent_pair_count(), 0);
    }

    #[test]
    fn text_form_puts_high_qubit_first() {
        let x = b("01001");
        assert_eq!(x.value(), 9);
        assert!(x.bit(0) && x.bit(3) && !x.bit(4));
        assert_eq!(x.to_string(), "01001");
        assert!("012".parse::<BitString>().is_err());
        assert!("".parse::<BitString>().is_err());
        assert!(BitString::new(8, 3).is_err());
        assert!(BitString::new(0, 25).is_err());
    }

    #[test]
    fn algebra_exhaustive_width_4() {
        let all: Vec<BitString> = (0..16).map(|v| BitString::new(v, 4).unwrap()).collect();
        for &x in &all {
            assert!(x.adjacent_pair_count() <= 3);
            for &y in &all {
                assert_eq!(x.xor(y).unwrap(), y.xor(x).unwrap());
                assert_eq!(x.xor(y).unwrap().xor(y).unwrap(), x);
                for &z in &all {
                    assert_eq!(
                        x.xor(y).unwrap().xor(z).unwrap(),
                        x.xor(y.xor(z).unwrap()).unwrap()
                    );
                    assert_eq!(
                        x.xor(y).unwrap().dot_parity(z).unwrap(),
                        x.dot_parity(z).unwrap() ^ y.dot_parity(z).unwrap()
                    );
                }
            }
        }
    }
}

//! Bit strings `x_1 ... x_n` and their enumeration order.
//!
//! Enumeration index `k` maps to the string whose binary expansion, read with
//! `x_1` as the most significant bit, is `k`. Index 0 is `0^n`.

use crate::error::{Error, Result};

pub fn from_index(n: usize, k: u64) -> Vec<bool> {
    (0..n).map(|i| (k >> (n - 1 - i)) & 1 == 1).collect()
}

pub fn to_index(x: &[bool]) -> u64 {
    x.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

pub fn weight(x: &[bool]) -> usize {
    x.iter().filter(|&&b| b).count()
}

pub fn parity(x: &[bool]) -> bool {
    weight(x) % 2 == 1
}

pub fn majority(x: &[bool]) -> bool {
    2 * weight(x) > x.len()
}

pub fn format(x: &[bool]) -> String {
    x.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn parse(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::InvalidInput(format!("`{s}` is not a bit string"))),
        })
        .collect()
}

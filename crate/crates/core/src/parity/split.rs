use crate::error::{Error, Result};

/// The `M` split strings `x^r_i = ReLU(x_i + 1{i = r mod M} - 1) + 1{i = r + 1}`
/// for `r = 0..M`, positions `i` 1-based.
pub fn split_strings(x: &[bool], m: usize) -> Result<Vec<Vec<bool>>> {
    if m == 0 || m % 2 == 1 {
        return Err(Error::InvalidInput(format!("M = {m} must be even and positive")));
    }
    let n = x.len();
    if n < m {
        return Err(Error::Range(format!("split needs n >= M, got n = {n}, M = {m}")));
    }
    Ok((0..m)
        .map(|r| {
            (1..=n)
                .map(|i| (x[i - 1] && i % m == r) || i == r + 1)
                .collect()
        })
        .collect())
}

/// Largest weight any split string can have at length `n`.
pub fn max_split_weight(n: usize, m: usize) -> usize {
    1 + n.div_ceil(m)
}

//! Reflected binary (Gray) code on most-significant-bit-first bit vectors.

/// `g[i] = b[i] XOR b[i-1]`, with `b[-1] = 0`.
pub fn gray_from_binary(bits: &[bool]) -> Vec<bool> {
    let mut prev = false;
    bits.iter()
        .map(|&b| {
            let g = b ^ prev;
            prev = b;
            g
        })
        .collect()
}

/// Inverse of [`gray_from_binary`]: `b[i] = g[i] XOR b[i-1]`.
pub fn binary_from_gray(bits: &[bool]) -> Vec<bool> {
    let mut prev = false;
    bits.iter()
        .map(|&g| {
            prev ^= g;
            prev
        })
        .collect()
}

/// `width` bits of `value`, most significant first.
pub fn to_bits(value: u32, width: u32) -> Vec<bool> {
    (0..width).rev().map(|i| (value >> i) & 1 == 1).collect()
}

pub fn from_bits(bits: &[bool]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u32)
}

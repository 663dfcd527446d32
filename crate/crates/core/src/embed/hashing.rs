//! Signed feature hashing of whitespace tokens.

use twox_hash::XxHash64;

/// Bucket index and sign for one token.
pub fn token_bucket(token: &str, d: usize, seed: u64) -> (usize, f64) {
    let h = XxHash64::oneshot(seed, token.as_bytes());
    let bucket = (h % d as u64) as usize;
    // sign from the top bit, independent of the bucket bits for power-of-two d
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    (bucket, sign)
}

/// Unnormalized signed token counts.
pub fn hashed_counts(text: &str, d: usize, seed: u64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    for tok in text.split_whitespace() {
        let (b, s) = token_bucket(tok, d, seed);
        v[b] += s;
    }
    v
}

/// Hashed bag-of-words, L2-normalized unless every bucket cancels to zero.
pub fn hashed_bow(text: &str, d: usize, seed: u64) -> Vec<f64> {
    let mut v = hashed_counts(text, d, seed);
    let n = crate::linalg::norm(&v);
    if n > 0.0 {
        for x in &mut v {
            *x /= n;
        }
    }
    v
}

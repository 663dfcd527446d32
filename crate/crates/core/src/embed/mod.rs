//! Embedding providers and the `EMB1` on-disk format.
//!
//! Layout (all little-endian): magic `EMB1`, `u32` n, `u32` d, then `n·d`
//! `f32` values row-major, then optionally a `0x01` flag byte followed by
//! `n` `u64` document ids. Without the id block ids default to `0..n`.

mod encoder;
mod hashing;

use std::fs;
use std::path::Path;

pub use encoder::{
    encoder_forward, layer_norm, self_attention, sinusoidal_positions, token_matrix, EncoderCache,
    EncoderConfig, EncoderGrads, EncoderParams, LAYER_NORM_EPS,
};
pub use hashing::{hashed_bow, hashed_counts, token_bucket};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
const ID_FLAG: u8 = 0x01;
const HEADER_LEN: usize = 12;

/// An n×d block of text representations with the ids they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    n: usize,
    d: usize,
    data: Vec<f32>,
    ids: Vec<u64>,
}

impl EmbeddingSet {
    pub fn new(n: usize, d: usize, data: Vec<f32>, ids: Vec<u64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("embedding set", "n and d must be at least 1"));
        }
        if data.len() != n * d {
            return Err(Error::shape("embedding data", n * d, data.len()));
        }
        if ids.len() != n {
            return Err(Error::shape("embedding ids", n, ids.len()));
        }
        if let Some(row) = first_non_finite_row(&data, d) {
            return Err(Error::NonFiniteRow { row });
        }
        Ok(Self { n, d, data, ids })
    }

    /// Narrows a matrix to `f32`, numbering rows `0..n`.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        let ids = (0..m.rows() as u64).collect();
        Self::from_matrix_with_ids(m, ids)
    }

    pub fn from_matrix_with_ids(m: &Matrix, ids: Vec<u64>) -> Result<Self> {
        let data = m.as_slice().iter().map(|&v| v as f32).collect();
        Self::new(m.rows(), m.cols(), data, ids)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.n, self.d, self.data.iter().map(|&v| f64::from(v)).collect())
            .expect("shape checked on construction")
    }

    fn has_default_ids(&self) -> bool {
        self.ids.iter().enumerate().all(|(i, &id)| id == i as u64)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len() + 1 + 8 * self.n);
        out.extend_from_slice(EMB1_MAGIC);
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        out.extend_from_slice(&(self.d as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if !self.has_default_ids() {
            out.push(ID_FLAG);
            for id in &self.ids {
                out.extend_from_slice(&id.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != EMB1_MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::TruncatedPayload);
        }
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let payload_len = n
            .checked_mul(d)
            .and_then(|c| c.checked_mul(4))
            .ok_or(Error::TruncatedPayload)?;
        let body = &bytes[HEADER_LEN..];
        if body.len() < payload_len {
            return Err(Error::TruncatedPayload);
        }
        let data: Vec<f32> = body[..payload_len]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tail = &body[payload_len..];
        let ids = match tail {
            [] => (0..n as u64).collect(),
            [ID_FLAG, rest @ ..] if rest.len() == 8 * n => rest
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            [ID_FLAG, ..] => return Err(Error::TruncatedPayload),
            // bytes that are neither a valid id block nor absent mean n·d was understated
            _ => return Err(Error::TruncatedPayload),
        };
        Self::new(n, d, data, ids)
    }
}

fn first_non_finite_row(data: &[f32], d: usize) -> Option<usize> {
    data.iter().position(|v| !v.is_finite()).map(|i| i / d)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingSet::from_bytes(&bytes)
}

pub fn save_embeddings(set: &EmbeddingSet, path: &Path) -> Result<()> {
    fs::write(path, set.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Hashes every text into a `d`-dimensional bag-of-words vector.
pub fn embed_hashed(texts: &[&str], ids: Vec<u64>, d: usize, seed: u64) -> Result<EmbeddingSet> {
    if d < 2 {
        return Err(Error::invalid("dimension", "hashed embeddings need d >= 2"));
    }
    let mut data = Vec::with_capacity(texts.len() * d);
    for t in texts {
        data.extend(hashed_bow(t, d, seed).into_iter().map(|v| v as f32));
    }
    EmbeddingSet::new(texts.len(), d, data, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(n: usize, d: usize) -> EmbeddingSet {
        let data = (0..n * d).map(|i| (i as f32 * 0.37).sin()).collect();
        EmbeddingSet::new(n, d, data, (0..n as u64).collect()).unwrap()
    }

    #[test]
    fn file_round_trip() {
        let set = sample(5, 8);
        let f = tempfile::NamedTempFile::new().unwrap();
        save_embeddings(&set, f.path()).unwrap();
        assert_eq!(load_embeddings(f.path()).unwrap(), set);
    }

    #[test]
    fn custom_ids_use_the_id_block() {
        let mut set = sample(3, 2);
        set.ids = vec![10, 20, 30];
        let bytes = set.to_bytes();
        assert_eq!(bytes.len(), 12 + 3 * 2 * 4 + 1 + 3 * 8);
        assert_eq!(EmbeddingSet::from_bytes(&bytes).unwrap().ids(), &[10, 20, 30]);
    }

    #[test]
    fn header_layout_is_little_endian() {
        let bytes = sample(3, 4).to_bytes();
        assert_eq!(&bytes[..4], b"EMB1");
        assert_eq!(&bytes[4..8], &[3, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[4, 0, 0, 0]);
        assert_eq!(bytes.len(), 12 + 48);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = sample(2, 2).to_bytes();
        bytes[..4].copy_from_slice(b"XEMB");
        assert_eq!(EmbeddingSet::from_bytes(&bytes).unwrap_err().to_string(), "not an embedding file");
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"EMB1");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&4u32.to_le_bytes());
        for i in 0..11 {
            bytes.extend_from_slice(&(i as f32).to_le_bytes());
        }
        assert_eq!(EmbeddingSet::from_bytes(&bytes).unwrap_err().to_string(), "truncated payload");
    }

    #[test]
    fn non_finite_names_row() {
        let mut set = sample(3, 2);
        set.data[5] = f32::NAN;
        let err = EmbeddingSet::from_bytes(&set.to_bytes()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteRow { row: 2 }), "{err}");
    }

    proptest! {
        #[test]
        fn bytes_round_trip(n in 1usize..6, d in 1usize..6, seed: u32, custom_ids: bool) {
            let data: Vec<f32> = (0..n * d).map(|i| ((i as u32).wrapping_mul(seed) as f32) * 1e-6).collect();
            let ids = if custom_ids { (0..n as u64).map(|i| i * 7 + 3).collect() } else { (0..n as u64).collect() };
            let set = EmbeddingSet::new(n, d, data, ids).unwrap();
            prop_assert_eq!(EmbeddingSet::from_bytes(&set.to_bytes()).unwrap(), set);
        }
    }
}

//! Deep embedded clustering for short texts.
//!
//! Texts are embedded (precomputed vectors, hashed bag-of-words, or a small
//! trainable transformer block), trained with an instance contrastive loss
//! plus a Student-t/KL self-training loss, and clustered by one of five
//! heads: K-means, SOM, or label-as-representation with K-means or SOM
//! centres. Results are scored with ACC and NMI.

pub mod augment;
pub mod cli;
pub mod cluster;
pub mod config;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod selftest;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};

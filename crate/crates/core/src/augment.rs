//! Stochastic text views for the contrastive objective.
//!
//! Each view applies, in order: random word deletion, adjacent-word swaps and
//! a contiguous span mask. The RNG for instance `i` is seeded with
//! `seed ^ i`, so views depend only on the policy and the instance index.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MASK_TOKEN: &str = "[MASK]";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentPolicy {
    pub word_delete_prob: f64,
    pub word_swap_prob: f64,
    pub span_mask_prob: f64,
    pub seed: u64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            word_delete_prob: 0.1,
            word_swap_prob: 0.1,
            span_mask_prob: 0.1,
            seed: 0,
        }
    }
}

impl AugmentPolicy {
    /// A policy that leaves text untouched.
    pub fn identity(seed: u64) -> Self {
        Self {
            word_delete_prob: 0.0,
            word_swap_prob: 0.0,
            span_mask_prob: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("word_delete_prob", self.word_delete_prob),
            ("word_swap_prob", self.word_swap_prob),
            ("span_mask_prob", self.span_mask_prob),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::invalid(name, format!("{p} not in [0, 1)")));
            }
        }
        Ok(())
    }

    fn rng_for(&self, instance_index: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ instance_index)
    }
}

/// Draws two independent views of `text`.
pub fn augment_pair(text: &str, policy: &AugmentPolicy, instance_index: u64) -> Result<(String, String)> {
    policy.validate()?;
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(Error::EmptyText);
    }
    let mut rng = policy.rng_for(instance_index);
    let a = view(&tokens, policy, &mut rng);
    let b = view(&tokens, policy, &mut rng);
    Ok((a.join(" "), b.join(" ")))
}

fn view<'a>(tokens: &[&'a str], policy: &AugmentPolicy, rng: &mut impl Rng) -> Vec<&'a str> {
    let mut out = delete_words(tokens, policy.word_delete_prob, rng);
    swap_adjacent(&mut out, policy.word_swap_prob, rng);
    mask_span(&mut out, policy.span_mask_prob, rng);
    out
}

fn delete_words<'a>(tokens: &[&'a str], p: f64, rng: &mut impl Rng) -> Vec<&'a str> {
    if p == 0.0 {
        return tokens.to_vec();
    }
    let kept: Vec<&str> = tokens.iter().copied().filter(|_| !rng.random_bool(p)).collect();
    if kept.is_empty() {
        // at least one token always survives
        vec![*tokens.choose(rng).expect("non-empty")]
    } else {
        kept
    }
}

fn swap_adjacent(tokens: &mut [&str], p: f64, rng: &mut impl Rng) {
    if p == 0.0 {
        return;
    }
    let mut i = 0;
    while i + 1 < tokens.len() {
        if rng.random_bool(p) {
            tokens.swap(i, i + 1);
            i += 2;
        } else {
            i += 1;
        }
    }
}

/// With probability `p`, replaces a span of up to a quarter of the tokens
/// (at least one) with the mask token.
fn mask_span(tokens: &mut [&str], p: f64, rng: &mut impl Rng) {
    if p == 0.0 || !rng.random_bool(p) {
        return;
    }
    let max_len = (tokens.len() / 4).max(1);
    let len = rng.random_range(1..=max_len);
    let start = rng.random_range(0..=tokens.len() - len);
    for t in &mut tokens[start..start + len] {
        *t = MASK_TOKEN;
    }
}

//! Clustering accuracy under the best one-to-one label mapping, and NMI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub nmi: f64,
    pub n: usize,
    /// `confusion[p][t]` counts samples predicted `p` with truth `t`.
    pub confusion: Vec<Vec<u64>>,
    /// Truth label each predicted label is mapped to, if any.
    pub mapping: Vec<Option<usize>>,
}

impl EvalReport {
    /// UTF-8 JSON with keys in sorted order.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_value(self)?.to_string())
    }
}

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::shape("label vectors", truth.len(), pred.len()));
    }
    if pred.is_empty() {
        return Err(Error::invalid("labels", "need at least one sample"));
    }
    Ok(())
}

pub fn confusion_matrix(pred: &[usize], truth: &[usize]) -> Vec<Vec<u64>> {
    let kp = pred.iter().max().map_or(0, |m| m + 1);
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let mut c = vec![vec![0u64; kt]; kp];
    for (&p, &t) in pred.iter().zip(truth) {
        c[p][t] += 1;
    }
    c
}

/// Minimum-cost perfect matching on a square matrix (Hungarian method with
/// potentials). Returns `assign[row] = col`.
fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays; index 0 is the virtual column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Best injective mapping of predicted onto true labels, by maximum matched count.
fn best_mapping(confusion: &[Vec<u64>], kt: usize) -> (u64, Vec<Option<usize>>) {
    let kp = confusion.len();
    let size = kp.max(kt);
    let max = confusion.iter().flatten().copied().max().unwrap_or(0) as f64;
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|p| {
            (0..size)
                .map(|t| {
                    let c = if p < kp && t < kt { confusion[p][t] } else { 0 };
                    max - c as f64
                })
                .collect()
        })
        .collect();
    let assign = hungarian_min(&cost);
    let mut matched = 0;
    let mapping = (0..kp)
        .map(|p| {
            let t = assign[p];
            if t < kt {
                matched += confusion[p][t];
                Some(t)
            } else {
                None
            }
        })
        .collect();
    (matched, mapping)
}

/// Fraction of samples correct under the best one-to-one mapping of predicted
/// labels onto true labels.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<(f64, Vec<Option<usize>>)> {
    check_lengths(pred, truth)?;
    let confusion = confusion_matrix(pred, truth);
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let (matched, mapping) = best_mapping(&confusion, kt);
    Ok((matched as f64 / pred.len() as f64, mapping))
}

/// `2·I(Y;C) / (H(Y) + H(C))` with natural logs.
///
/// When both labelings are constant the partitions coincide and the score is 1.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let n = pred.len() as f64;
    let confusion = confusion_matrix(pred, truth);
    let row: Vec<f64> = confusion.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let kt = confusion.first().map_or(0, Vec::len);
    let col: Vec<f64> = (0..kt)
        .map(|t| confusion.iter().map(|r| r[t]).sum::<u64>() as f64)
        .collect();
    let h = |counts: &[f64]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| -(c / n) * (c / n).ln())
            .sum()
    };
    let (hp, ht) = (h(&row), h(&col));
    if hp + ht == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (p, r) in confusion.iter().enumerate() {
        for (t, &c) in r.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += (c / n) * (c * n / (row[p] * col[t])).ln();
            }
        }
    }
    Ok((2.0 * mi / (hp + ht)).clamp(0.0, 1.0))
}

pub fn evaluate(pred: &[usize], truth: &[usize]) -> Result<EvalReport> {
    let (acc, mapping) = clustering_accuracy(pred, truth)?;
    Ok(EvalReport {
        acc,
        nmi: nmi(pred, truth)?,
        n: pred.len(),
        confusion: confusion_matrix(pred, truth),
        mapping,
    })
}

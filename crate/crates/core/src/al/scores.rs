//! Uncertainty scores over predictive distributions and batch top-k
//! selection.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

fn check_rows_are_distributions(probs: &Matrix) -> Result<()> {
    for i in 0..probs.rows() {
        let s: f64 = probs.row(i).iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::contract(format!(
                "probability row {i} sums to {s}, not 1"
            )));
        }
    }
    Ok(())
}

/// Natural-log predictive entropy per row, with `0·ln 0 := 0`.
/// Values lie in `[0, ln C]`.
pub fn score_entropy(probs: &Matrix) -> Result<Vec<f64>> {
    check_rows_are_distributions(probs)?;
    let mut out = Vec::with_capacity(probs.rows());
    for i in 0..probs.rows() {
        let mut h = 0.0;
        for &p in probs.row(i) {
            if p > 0.0 {
                h -= p * p.ln();
            }
        }
        out.push(h);
    }
    Ok(out)
}

/// Min-margin score per row: the negated gap between the two largest
/// probabilities. Higher means more uncertain; values lie in `[-1, 0]`.
pub fn score_margin(probs: &Matrix) -> Result<Vec<f64>> {
    if probs.cols() < 2 {
        return Err(Error::contract("margin needs at least two classes"));
    }
    check_rows_are_distributions(probs)?;
    let mut out = Vec::with_capacity(probs.rows());
    for i in 0..probs.rows() {
        let mut top1 = f64::NEG_INFINITY;
        let mut top2 = f64::NEG_INFINITY;
        for &p in probs.row(i) {
            if p > top1 {
                top2 = top1;
                top1 = p;
            } else if p > top2 {
                top2 = p;
            }
        }
        out.push(-(top1 - top2));
    }
    Ok(out)
}

/// Indices of the `k` largest scores in descending score order; ties
/// break to the lowest index.
pub fn select_top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > scores.len() {
        return Err(Error::contract(format!(
            "cannot select {k} from {} scores",
            scores.len()
        )));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

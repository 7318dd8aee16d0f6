//! Dark experience replay loss terms: logit matching against stored
//! logits, plus an optional replay cross-entropy term (DER++).

use super::buffer::BufferEntry;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::ModelState;
use std::collections::BTreeMap;

/// Computes the replay loss additions for a batch of stored entries:
/// `alpha * mean ||logits_now - logits_stored||^2` plus
/// `beta_derpp * mean CE(label)` when `beta_derpp > 0`.
///
/// Returns the added loss and the parameter gradient of that addition.
/// Every entry must carry stored logits.
pub fn der_loss_terms(
    model: &ModelState,
    replay: &[&BufferEntry],
    alpha: f64,
    beta_derpp: f64,
) -> Result<(f64, Vec<f64>)> {
    if replay.is_empty() {
        return Err(Error::contract("empty replay batch"));
    }
    let n = replay.len();
    let dim = replay[0].input.len();
    let mut inputs = Matrix::zeros(n, dim);
    for (i, e) in replay.iter().enumerate() {
        if e.stored_logits.is_none() {
            return Err(Error::contract("replay entry is missing stored logits"));
        }
        for (j, &v) in e.input.iter().enumerate() {
            inputs.row_mut(i)[j] = f64::from(v);
        }
    }

    let num_classes = model.arch().num_classes();
    let mut loss_add = 0.0;
    let mut grad_add = vec![0.0; model.params().len()];

    if alpha != 0.0 {
        let mut match_loss = 0.0;
        let (_, grad) = model.grad_from_logit_gradient(&inputs, |logits| {
            let mut d = Matrix::zeros(n, num_classes);
            for (i, e) in replay.iter().enumerate() {
                let stored = e.stored_logits.as_ref().expect("checked above");
                for c in 0..num_classes {
                    let diff = logits.row(i)[c] - stored[c];
                    match_loss += diff * diff;
                    d.row_mut(i)[c] = alpha * 2.0 * diff / n as f64;
                }
            }
            d
        })?;
        loss_add += alpha * match_loss / n as f64;
        for (a, g) in grad_add.iter_mut().zip(&grad) {
            *a += g;
        }
    }

    if beta_derpp != 0.0 {
        // replay CE honors each entry's own training mask
        let mut groups: BTreeMap<Option<Vec<bool>>, Vec<usize>> = BTreeMap::new();
        for (i, e) in replay.iter().enumerate() {
            groups.entry(e.class_mask.clone()).or_default().push(i);
        }
        for (mask, members) in groups {
            let mut sub = Matrix::zeros(members.len(), dim);
            let mut labels = Vec::with_capacity(members.len());
            for (r, &i) in members.iter().enumerate() {
                sub.row_mut(r).copy_from_slice(inputs.row(i));
                labels.push(replay[i].label);
            }
            let (l, g) = model.loss_and_grad(&sub, &labels, mask.as_deref())?;
            let w = beta_derpp * members.len() as f64 / n as f64;
            loss_add += w * l;
            for (a, gi) in grad_add.iter_mut().zip(&g) {
                *a += w * gi;
            }
        }
    }

    Ok((loss_add, grad_add))
}

//! BADGE selection: k-means++ seeding over output-layer gradient
//! embeddings.

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::nn::ModelState;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Gradient embeddings for a whole batch under the predicted pseudo-label,
/// one row per input: `(p - e_ŷ) ⊗ [penultimate; 1]` laid out as the
/// output layer's flat parameter block.
pub fn gradient_embeddings(model: &ModelState, inputs: &Matrix) -> Result<Matrix> {
    let trace = model.forward(inputs, None)?;
    let n = inputs.rows();
    let c_total = model.arch().num_classes();
    let h = trace.penultimate.cols();
    let mut out = Matrix::zeros(n, c_total * (h + 1));
    for i in 0..n {
        let probs = trace.probs.row(i);
        let pen = trace.penultimate.row(i);
        let mut y = 0;
        for (c, &p) in probs.iter().enumerate() {
            if p > probs[y] {
                y = c;
            }
        }
        let row = out.row_mut(i);
        for c in 0..c_total {
            let coeff = probs[c] - if c == y { 1.0 } else { 0.0 };
            for (j, &f) in pen.iter().enumerate() {
                row[c * h + j] = coeff * f;
            }
            row[c_total * h + c] = coeff;
        }
    }
    Ok(out)
}

/// k-means++ seeding: first index uniform, every next index sampled with
/// probability proportional to its squared distance to the nearest
/// already-chosen point. When all remaining distances are zero the pick
/// falls back to uniform over the unchosen indices.
pub(crate) fn kmeanspp_seed(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.rows();
    debug_assert!(k >= 1 && k <= n);
    let mut chosen = Vec::with_capacity(k);
    let mut is_chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen.push(first);
    is_chosen[first] = true;
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), points.row(first)))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let u = rng.gen_range(0.0..total);
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if u < acc {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can push u past the last positive entry
            pick.unwrap_or_else(|| {
                d2.iter()
                    .rposition(|&d| d > 0.0)
                    .expect("total > 0 implies a positive entry")
            })
        } else {
            let unchosen: Vec<usize> = (0..n).filter(|&i| !is_chosen[i]).collect();
            unchosen[rng.gen_range(0..unchosen.len())]
        };
        chosen.push(next);
        is_chosen[next] = true;
        for i in 0..n {
            let d = squared_distance(points.row(i), points.row(next));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen
}

/// Selects `k` distinct indices by k-means++ seeding over the embeddings.
pub fn badge_select(embeddings: &Matrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = embeddings.rows();
    if k > n {
        return Err(Error::contract(format!("cannot select {k} from {n} points")));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut rng = crate::seeds::rng(seed, &[crate::seeds::label::QUERY]);
    Ok(kmeanspp_seed(embeddings, k, &mut rng))
}

//! Greedy k-center (coreset) selection in embedding space.

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

/// Repeatedly picks the pool index farthest (max-min distance) from the
/// labelled embeddings plus everything already selected. With no labelled
/// points the first pick is index 0; ties break to the lowest index.
pub fn coreset_select(pool_emb: &Matrix, labelled_emb: &Matrix, k: usize) -> Result<Vec<usize>> {
    let n = pool_emb.rows();
    if k > n {
        return Err(Error::contract(format!("cannot select {k} from {n} points")));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut selected = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    // min squared distance from each pool point to the center set
    let mut min_d2: Vec<f64> = if labelled_emb.rows() == 0 {
        vec![f64::INFINITY; n]
    } else {
        (0..n)
            .map(|i| {
                (0..labelled_emb.rows())
                    .map(|j| squared_distance(pool_emb.row(i), labelled_emb.row(j)))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    };

    for _ in 0..k {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            match best {
                Some(b) if min_d2[i] <= min_d2[b] => {}
                _ => best = Some(i),
            }
        }
        let pick = best.expect("k <= n leaves a candidate");
        taken[pick] = true;
        selected.push(pick);
        for i in 0..n {
            let d = squared_distance(pool_emb.row(i), pool_emb.row(pick));
            if d < min_d2[i] {
                min_d2[i] = d;
            }
        }
    }
    Ok(selected)
}

//! Embedding k-means selection: Lloyd's algorithm with k-means++ init,
//! then the nearest pool point to each centroid.

use super::badge::kmeanspp_seed;
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

const MAX_ITERS: usize = 100;
const SHIFT_TOL: f64 = 1e-6;

/// Clusters the pool embeddings into `k` groups and returns one index per
/// cluster: the nearest pool point to its centroid, deduplicated by
/// falling back to the next-nearest (by distance, then index).
pub fn kmeans_select(pool_emb: &Matrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = pool_emb.rows();
    let d = pool_emb.cols();
    if k > n {
        return Err(Error::contract(format!("cannot select {k} from {n} points")));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut rng = crate::seeds::rng(seed, &[crate::seeds::label::QUERY]);
    let seeds_idx = kmeanspp_seed(pool_emb, k, &mut rng);
    let mut centroids = Matrix::zeros(k, d);
    for (c, &i) in seeds_idx.iter().enumerate() {
        centroids.row_mut(c).copy_from_slice(pool_emb.row(i));
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..MAX_ITERS {
        // assign: nearest centroid, ties to the lowest cluster index
        for i in 0..n {
            let mut best = (f64::INFINITY, 0usize);
            for c in 0..k {
                let dist = squared_distance(pool_emb.row(i), centroids.row(c));
                if dist < best.0 {
                    best = (dist, c);
                }
            }
            assignment[i] = best.1;
        }
        // update: mean of members; empty clusters keep their centroid
        let mut next = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assignment[i];
            counts[c] += 1;
            for (j, &v) in pool_emb.row(i).iter().enumerate() {
                next.row_mut(c)[j] += v;
            }
        }
        let mut max_shift = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                next.row_mut(c).copy_from_slice(centroids.row(c));
                continue;
            }
            for v in next.row_mut(c).iter_mut() {
                *v /= counts[c] as f64;
            }
            max_shift = max_shift.max(squared_distance(next.row(c), centroids.row(c)).sqrt());
        }
        centroids = next;
        if max_shift < SHIFT_TOL {
            break;
        }
    }

    // per cluster: candidates sorted by (distance to centroid, index),
    // first unused one wins
    let mut used = vec![false; n];
    let mut picks = Vec::with_capacity(k);
    for c in 0..k {
        let mut candidates: Vec<(f64, usize)> = (0..n)
            .map(|i| (squared_distance(pool_emb.row(i), centroids.row(c)), i))
            .collect();
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let pick = candidates
            .iter()
            .find(|&&(_, i)| !used[i])
            .map(|&(_, i)| i)
            .expect("k <= n leaves an unused point");
        used[pick] = true;
        picks.push(pick);
    }
    Ok(picks)
}

//! Forgetting and learning-speed measures over run logs.
//!
//! The accuracy matrix `A` is lower-triangular: `A[i][j]` is the test
//! accuracy of task `j` after finishing task `i`, recorded only for
//! `j <= i`. Accuracies are fractions in [0,1]; reporting multiplies by
//! 100.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One method's coordinates in the forgetting-learning plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    /// Learning-curve area in [0,1].
    pub lca: f64,
    /// Forgetting rate, non-negative.
    pub forgetting_rate: f64,
    /// Run descriptor.
    pub label: String,
}

fn check_matrix(a: &[Vec<f64>]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::contract("empty accuracy matrix"));
    }
    for (i, row) in a.iter().enumerate() {
        if row.len() != i + 1 {
            return Err(Error::contract(format!(
                "row {i} has {} entries, expected {}",
                row.len(),
                i + 1
            )));
        }
    }
    Ok(())
}

/// Mean of the final row: overall performance at the end of the sequence.
pub fn avg_accuracy(a: &[Vec<f64>]) -> Result<f64> {
    check_matrix(a)?;
    let last = a.last().expect("non-empty");
    Ok(last.iter().sum::<f64>() / last.len() as f64)
}

/// Forgetting rate: the mean over non-final tasks of the peak accuracy
/// minus the final accuracy. Never negative because the peak ranges over
/// the final row too.
pub fn forgetting_rate(a: &[Vec<f64>]) -> Result<f64> {
    check_matrix(a)?;
    let t = a.len();
    if t < 2 {
        return Err(Error::contract(
            "forgetting rate needs at least two tasks",
        ));
    }
    let mut total = 0.0;
    for j in 0..t - 1 {
        let peak = (j..t).map(|k| a[k][j]).fold(f64::NEG_INFINITY, f64::max);
        total += peak - a[t - 1][j];
    }
    Ok(total / (t - 1) as f64)
}

/// Learning-curve area: the mean of per-round accuracies (unit-normalized
/// area over equally spaced AL rounds, round 0 included).
pub fn lca(curve: &[f64]) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::contract("empty accuracy curve"));
    }
    if curve.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::contract("curve values must lie in [0,1]"));
    }
    Ok(curve.iter().sum::<f64>() / curve.len() as f64)
}

/// LCA of the mean-over-seen-tasks accuracy curve for one task's rounds.
pub fn lca_seen_tasks(seen_curve: &[f64]) -> Result<f64> {
    lca(seen_curve)
}

/// Collapses a run into its forgetting-learning profile point: LCA is the
/// unweighted mean of per-task current-task LCAs, the forgetting rate
/// comes from the accuracy matrix.
pub fn profile_point(
    accuracy_matrix: &[Vec<f64>],
    current_task_curves: &[Vec<f64>],
    label: impl Into<String>,
) -> Result<ProfilePoint> {
    if current_task_curves.is_empty() || current_task_curves.iter().any(Vec::is_empty) {
        return Err(Error::contract(
            "profile point needs a non-empty round curve per task",
        ));
    }
    let mut total = 0.0;
    for curve in current_task_curves {
        total += lca(curve)?;
    }
    let fr = forgetting_rate(accuracy_matrix)?;
    Ok(ProfilePoint {
        lca: total / current_task_curves.len() as f64,
        forgetting_rate: fr,
        label: label.into(),
    })
}

/// Normalized forgetting ratio `FR_ACL / FR_CL`; above 1 means the AL
/// loop increased forgetting. Undefined at zero baseline.
pub fn normalized_fr(fr_acl: f64, fr_cl: f64) -> Result<f64> {
    if fr_cl == 0.0 {
        return Err(Error::contract(
            "normalized forgetting ratio undefined at zero baseline",
        ));
    }
    Ok(fr_acl / fr_cl)
}

/// Jaccard coefficient `|a ∩ b| / |a ∪ b|`; two empty sets count as 1.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    use std::collections::BTreeSet;
    let sa: BTreeSet<usize> = a.iter().copied().collect();
    let sb: BTreeSet<usize> = b.iter().copied().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count();
    inter as f64 / union as f64
}

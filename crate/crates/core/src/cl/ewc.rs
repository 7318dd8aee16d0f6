//! Elastic weight consolidation: Fisher-information diagonal and the
//! quadratic anchor penalty.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::ModelState;

/// Snapshot of the previous task's optimum with per-parameter importance.
#[derive(Debug, Clone, PartialEq)]
pub struct EwcAnchor {
    anchor_params: Vec<f64>,
    fisher_diag: Vec<f64>,
    lambda: f64,
}

impl EwcAnchor {
    pub fn new(anchor_params: Vec<f64>, fisher_diag: Vec<f64>, lambda: f64) -> Result<Self> {
        if anchor_params.len() != fisher_diag.len() {
            return Err(Error::contract(format!(
                "anchor length {} vs fisher length {}",
                anchor_params.len(),
                fisher_diag.len()
            )));
        }
        if fisher_diag.iter().any(|&f| f < 0.0 || !f.is_finite()) {
            return Err(Error::contract("fisher entries must be non-negative"));
        }
        if lambda < 0.0 {
            return Err(Error::contract("lambda must be non-negative"));
        }
        Ok(EwcAnchor {
            anchor_params,
            fisher_diag,
            lambda,
        })
    }

    pub fn len(&self) -> usize {
        self.anchor_params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchor_params.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn fisher_diag(&self) -> &[f64] {
        &self.fisher_diag
    }

    /// Penalty `λ Σ F_i (θ_i − θ*_i)²` and its gradient `2λ F ⊙ (θ − θ*)`.
    /// Zero with zero gradient at the anchor.
    pub fn penalty(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        if params.len() != self.anchor_params.len() {
            return Err(Error::contract(format!(
                "parameter length {} vs anchor length {}",
                params.len(),
                self.anchor_params.len()
            )));
        }
        let mut loss = 0.0;
        let mut grad = vec![0.0; params.len()];
        for i in 0..params.len() {
            let d = params[i] - self.anchor_params[i];
            let f = self.fisher_diag[i];
            loss += f * d * d;
            grad[i] = 2.0 * self.lambda * f * d;
        }
        Ok((self.lambda * loss, grad))
    }
}

/// Diagonal Fisher approximation: the mean over samples of the squared
/// per-sample cross-entropy gradient at the given labels.
pub fn fisher_diagonal(
    model: &ModelState,
    inputs: &Matrix,
    labels: &[usize],
    class_mask: Option<&[bool]>,
) -> Result<Vec<f64>> {
    if inputs.rows() == 0 {
        return Err(Error::contract("fisher needs at least one sample"));
    }
    if inputs.rows() != labels.len() {
        return Err(Error::contract("inputs/labels length mismatch"));
    }
    let n = inputs.rows();
    let mut fisher = vec![0.0; model.params().len()];
    for i in 0..n {
        let row = Matrix::from_vec(1, inputs.cols(), inputs.row(i).to_vec())?;
        let (_, g) = model.loss_and_grad(&row, &labels[i..=i], class_mask)?;
        for (f, &gi) in fisher.iter_mut().zip(&g) {
            *f += gi * gi;
        }
    }
    for f in fisher.iter_mut() {
        *f /= n as f64;
    }
    Ok(fisher)
}

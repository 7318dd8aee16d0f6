//! First-order optimizers over the flat parameter vector.

use super::{AdamState, ModelState};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptAlgo {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerHyper {
    pub algo: OptAlgo,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Heavy-ball momentum for SGD; 0 gives the plain `p -= lr * g` rule.
    #[serde(default)]
    pub momentum: f64,
}

impl OptimizerHyper {
    pub fn sgd(lr: f64) -> Self {
        OptimizerHyper {
            algo: OptAlgo::Sgd,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            momentum: 0.0,
        }
    }

    pub fn sgd_momentum(lr: f64, momentum: f64) -> Self {
        OptimizerHyper {
            momentum,
            ..OptimizerHyper::sgd(lr)
        }
    }

    pub fn adam(lr: f64) -> Self {
        OptimizerHyper {
            algo: OptAlgo::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            momentum: 0.0,
        }
    }
}

pub(super) fn step(mut model: ModelState, grad: &[f64], hyper: &OptimizerHyper) -> Result<ModelState> {
    if grad.len() != model.params().len() {
        return Err(Error::contract(format!(
            "gradient length {} does not match parameter count {}",
            grad.len(),
            model.params().len()
        )));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::contract("non-finite gradient"));
    }
    match hyper.algo {
        OptAlgo::Sgd => {
            let lr = hyper.lr;
            if hyper.momentum == 0.0 {
                for (p, &g) in model.params_mut().iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            } else {
                // heavy ball: v <- m*v + g, p <- p - lr*v; the velocity
                // lives in the accumulator's `m` slot
                let n = grad.len();
                let needs_reset = match model.opt_state() {
                    Some(s) => s.m.len() != n,
                    None => true,
                };
                if needs_reset {
                    *model.opt_state_mut() = Some(AdamState {
                        m: vec![0.0; n],
                        v: Vec::new(),
                        t: 0,
                    });
                }
                let mut state = model.opt_state_mut().take().expect("sgd momentum state");
                for (i, (p, &g)) in model.params_mut().iter_mut().zip(grad).enumerate() {
                    state.m[i] = hyper.momentum * state.m[i] + g;
                    *p -= lr * state.m[i];
                }
                *model.opt_state_mut() = Some(state);
            }
        }
        OptAlgo::Adam => {
            let n = grad.len();
            let needs_reset = match model.opt_state() {
                Some(s) => s.m.len() != n || s.v.len() != n,
                None => true,
            };
            if needs_reset {
                *model.opt_state_mut() = Some(AdamState {
                    m: vec![0.0; n],
                    v: vec![0.0; n],
                    t: 0,
                });
            }
            let mut state = model.opt_state_mut().take().expect("adam state");
            state.t += 1;
            let b1 = hyper.beta1;
            let b2 = hyper.beta2;
            let bias1 = 1.0 - b1.powi(state.t as i32);
            let bias2 = 1.0 - b2.powi(state.t as i32);
            for (i, (p, &g)) in model.params_mut().iter_mut().zip(grad).enumerate() {
                state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
                state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
                let m_hat = state.m[i] / bias1;
                let v_hat = state.v[i] / bias2;
                *p -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
            }
            *model.opt_state_mut() = Some(state);
        }
    }
    if model.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::contract("non-finite parameters after update"));
    }
    Ok(model)
}

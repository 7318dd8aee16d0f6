//! Continual-learning update rules.
//!
//! [`train_task`] is the CL step `ψ`: it trains a model on the current
//! task's labelled data starting from a previous checkpoint, with the
//! strategy-specific loss additions, and maintains the replay buffer and
//! EWC anchor. Strategy degeneracies hold bit-exactly under a shared
//! seed: ER with `β = 0`, EWC with `λ = 0` and DER with no prior-task
//! entries all reproduce plain finetuning.

mod agem;
mod buffer;
mod der;
mod ewc;
mod icarl;

pub use agem::project as agem_project;
pub use buffer::{BufferEntry, BufferPolicy, ReplayBuffer};
pub use der::der_loss_terms;
pub use ewc::{fisher_diagonal, EwcAnchor};
pub use icarl::{
    classify as icarl_classify, classify_batch as icarl_classify_batch, herd as icarl_herding,
    update_exemplars as icarl_update_exemplars, ClassExemplars,
};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{init_model, ModelState, OptimizerHyper};
use crate::seeds::{self, label};
use crate::streams::{Scenario, Task};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// The CL strategy catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Ft,
    Ewc,
    Er,
    Agem,
    Gdumb,
    Der,
    Derpp,
    Icarl,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ft => "ft",
            Strategy::Ewc => "ewc",
            Strategy::Er => "er",
            Strategy::Agem => "agem",
            Strategy::Gdumb => "gdumb",
            Strategy::Der => "der",
            Strategy::Derpp => "derpp",
            Strategy::Icarl => "icarl",
        }
    }

    /// Whether the strategy keeps a replay buffer at all.
    pub fn uses_buffer(self) -> bool {
        !matches!(self, Strategy::Ft | Strategy::Ewc)
    }

    pub fn buffer_policy(self) -> BufferPolicy {
        match self {
            Strategy::Der | Strategy::Derpp => BufferPolicy::Reservoir,
            _ => BufferPolicy::PerTaskQuota,
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Training hyperparameters shared by all strategies, plus the
/// strategy-specific coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CLHyper {
    pub strategy: Strategy,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerHyper,
    pub lambda_ewc: f64,
    pub beta_er: f64,
    pub alpha_der: f64,
    pub beta_derpp: f64,
    pub buffer_capacity: usize,
    pub patience: Option<usize>,
}

impl CLHyper {
    pub fn new(strategy: Strategy) -> Self {
        CLHyper {
            strategy,
            epochs: 10,
            batch_size: 32,
            optimizer: OptimizerHyper::sgd(0.01),
            lambda_ewc: 10.0,
            beta_er: 1.0,
            alpha_der: 0.5,
            beta_derpp: 0.5,
            buffer_capacity: 400,
            patience: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be positive"));
        }
        if self.lambda_ewc < 0.0
            || self.beta_er < 0.0
            || self.alpha_der < 0.0
            || self.beta_derpp < 0.0
        {
            return Err(Error::config("strategy coefficients must be non-negative"));
        }
        if self.strategy.uses_buffer() && self.buffer_capacity == 0 {
            return Err(Error::config("buffer capacity must be positive"));
        }
        Ok(())
    }

    pub fn fresh_buffer(&self) -> ReplayBuffer {
        ReplayBuffer::new(self.buffer_capacity, self.strategy.buffer_policy())
    }
}

/// Everything `train_task` hands back: the trained model and the updated
/// continual state.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ModelState,
    pub buffer: ReplayBuffer,
    pub anchor: Option<EwcAnchor>,
    pub exemplars: Option<ClassExemplars>,
}

/// Mean cross-entropy and gradient over buffer entries, honoring each
/// entry's own training mask.
fn entries_loss_grad(model: &ModelState, entries: &[&BufferEntry]) -> Result<(f64, Vec<f64>)> {
    let n = entries.len();
    let dim = entries[0].input.len();
    let mut groups: BTreeMap<Option<Vec<bool>>, Vec<usize>> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        groups.entry(e.class_mask.clone()).or_default().push(i);
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; model.params().len()];
    for (mask, members) in groups {
        let mut sub = Matrix::zeros(members.len(), dim);
        let mut labels = Vec::with_capacity(members.len());
        for (r, &i) in members.iter().enumerate() {
            for (j, &v) in entries[i].input.iter().enumerate() {
                sub.row_mut(r)[j] = f64::from(v);
            }
            labels.push(entries[i].label);
        }
        let (l, g) = model.loss_and_grad(&sub, &labels, mask.as_deref())?;
        let w = members.len() as f64 / n as f64;
        loss += w * l;
        for (a, gi) in grad.iter_mut().zip(&g) {
            *a += w * gi;
        }
    }
    Ok((loss, grad))
}

struct TrainContext<'a> {
    hyper: &'a CLHyper,
    task: &'a Task,
    mask: Option<Vec<bool>>,
    replay_rng: ChaCha8Rng,
    buffer_rng: ChaCha8Rng,
}

/// One strategy-specific gradient step on a minibatch.
fn strategy_step(
    model: ModelState,
    batch_inputs: &Matrix,
    batch_labels: &[usize],
    ctx: &mut TrainContext,
    buffer: &mut ReplayBuffer,
    anchor: Option<&EwcAnchor>,
    insert_this_epoch: bool,
) -> Result<ModelState> {
    let hyper = ctx.hyper;
    let (_, mut grad) = model.loss_and_grad(batch_inputs, batch_labels, ctx.mask.as_deref())?;

    match hyper.strategy {
        Strategy::Ft | Strategy::Gdumb => {}
        Strategy::Ewc => {
            if let Some(anchor) = anchor {
                if anchor.lambda() > 0.0 {
                    let (_, g_add) = anchor.penalty(model.params())?;
                    for (a, g) in grad.iter_mut().zip(&g_add) {
                        *a += g;
                    }
                }
            }
        }
        Strategy::Er | Strategy::Icarl => {
            if hyper.beta_er > 0.0 && !buffer.is_empty() {
                let k = batch_labels.len();
                let idx = buffer.sample_indices(k, &mut ctx.replay_rng)?;
                let entries: Vec<&BufferEntry> =
                    idx.iter().map(|&i| &buffer.entries()[i]).collect();
                let (_, g_replay) = entries_loss_grad(&model, &entries)?;
                for (a, g) in grad.iter_mut().zip(&g_replay) {
                    *a += hyper.beta_er * g;
                }
            }
        }
        Strategy::Agem => {
            if !buffer.is_empty() {
                let k = batch_labels.len();
                let idx = buffer.sample_indices(k, &mut ctx.replay_rng)?;
                let entries: Vec<&BufferEntry> =
                    idx.iter().map(|&i| &buffer.entries()[i]).collect();
                let (_, g_ref) = entries_loss_grad(&model, &entries)?;
                grad = agem::project(&grad, &g_ref)?;
            }
        }
        Strategy::Der | Strategy::Derpp => {
            let beta = if hyper.strategy == Strategy::Derpp {
                hyper.beta_derpp
            } else {
                0.0
            };
            // replay draws only from previous tasks' entries
            if (hyper.alpha_der > 0.0 || beta > 0.0)
                && buffer.prior_task_len(ctx.task.task_id()) > 0
            {
                let k = batch_labels.len();
                let idx =
                    buffer.sample_prior_indices(ctx.task.task_id(), k, &mut ctx.replay_rng)?;
                let entries: Vec<&BufferEntry> =
                    idx.iter().map(|&i| &buffer.entries()[i]).collect();
                let (_, g_add) = der_loss_terms(&model, &entries, hyper.alpha_der, beta)?;
                for (a, g) in grad.iter_mut().zip(&g_add) {
                    *a += g;
                }
            }
            if insert_this_epoch {
                // store each batch item with the current model's logits
                let trace = model.forward(batch_inputs, None)?;
                for (i, &y) in batch_labels.iter().enumerate() {
                    buffer.reservoir_insert(
                        BufferEntry {
                            input: batch_inputs.row(i).iter().map(|&v| v as f32).collect(),
                            label: y,
                            stored_logits: Some(trace.logits.row(i).to_vec()),
                            task_id: ctx.task.task_id(),
                            class_mask: ctx.mask.clone(),
                        },
                        &mut ctx.buffer_rng,
                    )?;
                }
            }
        }
    }

    model.optimizer_step(&grad, &hyper.optimizer)
}

fn epoch_loop(
    mut model: ModelState,
    inputs: &Matrix,
    labels: &[usize],
    ctx: &mut TrainContext,
    buffer: &mut ReplayBuffer,
    anchor: Option<&EwcAnchor>,
    shuffle_rng: &mut ChaCha8Rng,
) -> Result<ModelState> {
    let n = labels.len();
    let mut best_val: Option<(f64, usize)> = None; // (loss, epochs since best)
    for epoch in 0..ctx.hyper.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(shuffle_rng);
        for chunk in order.chunks(ctx.hyper.batch_size) {
            let bx = inputs.gather(chunk);
            let by: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            model = strategy_step(model, &bx, &by, ctx, buffer, anchor, epoch == 0)?;
        }
        if let Some(patience) = ctx.hyper.patience {
            let val = ctx.task.val();
            if !val.is_empty() {
                let (val_loss, _) =
                    model.loss_and_grad(&val.inputs_f64(), val.labels(), ctx.mask.as_deref())?;
                best_val = match best_val {
                    Some((best, stale)) if val_loss >= best => Some((best, stale + 1)),
                    _ => Some((val_loss, 0)),
                };
                if best_val.is_some_and(|(_, stale)| stale >= patience) {
                    break;
                }
            }
        }
    }
    Ok(model)
}

/// The continual-learning step `ψ`: trains on the task's labelled data
/// from the given checkpoint, returning the trained model and updated
/// buffer/anchor/exemplar state. Deterministic given the seed.
#[allow(clippy::too_many_arguments)]
pub fn train_task(
    hyper: &CLHyper,
    start: ModelState,
    task: &Task,
    num_classes_total: usize,
    buffer: ReplayBuffer,
    anchor: Option<&EwcAnchor>,
    exemplars: Option<&ClassExemplars>,
    seed: u64,
) -> Result<TrainOutcome> {
    hyper.validate()?;
    if let Some(a) = anchor {
        if a.len() != start.params().len() {
            return Err(Error::contract(format!(
                "anchor length {} does not match parameter count {}",
                a.len(),
                start.params().len()
            )));
        }
    }
    let mask = match task.scenario() {
        Scenario::TaskIl => Some(task.class_mask(num_classes_total)),
        _ => None,
    };
    let mut start = start;
    start.reset_opt_state();

    if hyper.strategy == Strategy::Gdumb {
        return gdumb_step(hyper, &start, task, mask.as_deref(), buffer, seed);
    }

    let (inputs, labels) = task.labelled_examples();
    if labels.is_empty() {
        return Err(Error::contract(
            "cannot train on an empty labelled set (non-gdumb strategy)",
        ));
    }

    let mut ctx = TrainContext {
        hyper,
        task,
        mask: mask.clone(),
        replay_rng: seeds::rng(seed, &[label::REPLAY]),
        buffer_rng: seeds::rng(seed, &[label::BUFFER]),
    };
    let mut shuffle_rng = seeds::rng(seed, &[label::SHUFFLE]);
    let mut buffer = buffer;
    let model = epoch_loop(
        start,
        &inputs,
        &labels,
        &mut ctx,
        &mut buffer,
        anchor,
        &mut shuffle_rng,
    )?;

    // task-end continual state updates
    let mut new_anchor = None;
    let mut new_exemplars = None;
    match hyper.strategy {
        Strategy::Ewc => {
            let fisher = fisher_diagonal(&model, &inputs, &labels, mask.as_deref())?;
            new_anchor = Some(EwcAnchor::new(
                model.params().to_vec(),
                fisher,
                hyper.lambda_ewc,
            )?);
        }
        Strategy::Er | Strategy::Agem => {
            buffer.insert_task_end(task, mask.as_deref(), seed)?;
        }
        Strategy::Icarl => {
            let empty = ClassExemplars::default();
            let prev = exemplars.unwrap_or(&empty);
            let (b, e) = icarl::update_exemplars(&model, &buffer, prev, task)?;
            buffer = b;
            new_exemplars = Some(e);
        }
        _ => {}
    }

    Ok(TrainOutcome {
        model,
        buffer,
        anchor: new_anchor,
        exemplars: new_exemplars,
    })
}

/// GDumb's ψ: refresh the buffer with the finished task's labelled data
/// under the quota policy, then train a fresh model on the buffer alone.
fn gdumb_step(
    hyper: &CLHyper,
    start: &ModelState,
    task: &Task,
    mask: Option<&[bool]>,
    mut buffer: ReplayBuffer,
    seed: u64,
) -> Result<TrainOutcome> {
    if task.labelled_len() > 0 {
        buffer.insert_task_end(task, mask, seed)?;
    }
    let model = gdumb_train(&buffer, start.arch().clone(), hyper, seed)?;
    Ok(TrainOutcome {
        model,
        buffer,
        anchor: None,
        exemplars: None,
    })
}

/// Trains a freshly initialized model on buffer contents only; the
/// incoming checkpoint is deliberately ignored.
pub fn gdumb_train(
    buffer: &ReplayBuffer,
    arch: crate::nn::Architecture,
    hyper: &CLHyper,
    seed: u64,
) -> Result<ModelState> {
    if buffer.is_empty() {
        return Err(Error::contract("gdumb cannot train on an empty buffer"));
    }
    let mut model = init_model(&arch, seeds::derive(seed, &[label::GDUMB]));
    let mut shuffle_rng = seeds::rng(seed, &[label::GDUMB, label::SHUFFLE]);
    let n = buffer.len();
    for _ in 0..hyper.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(hyper.batch_size) {
            let entries: Vec<&BufferEntry> = chunk.iter().map(|&i| &buffer.entries()[i]).collect();
            let (_, grad) = entries_loss_grad(&model, &entries)?;
            model = model.optimizer_step(&grad, &hyper.optimizer)?;
        }
    }
    Ok(model)
}

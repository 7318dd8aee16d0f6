//! The active continual learning loop.
//!
//! For each task: build a proxy model from the previous checkpoint
//! (sequential labelling) or a fresh initialization (independent
//! labelling), alternate AL query/annotate rounds with proxy retraining,
//! and after the budget is exhausted retrain from the previous task's
//! checkpoint to produce that task's continual checkpoint. Every retrain
//! restarts from its prescribed checkpoint, never from the current
//! proxy. Proxy retrains see a copy of the replay state; only the final
//! per-task retrain commits buffer, anchor and exemplar updates.

mod ceilings;

pub use ceilings::{run_ceiling_indiv, run_ceiling_mtl};

use crate::al::{self, AlStrategy};
use crate::cl::{self, CLHyper, ClassExemplars, EwcAnchor, ReplayBuffer, Strategy, TrainOutcome};
use crate::error::{Error, Result};
use crate::metrics;
use crate::nn::{init_model, Architecture, ModelState};
use crate::seeds::{self, label};
use crate::streams::{Scenario, Task, TaskStream};
use serde::{Deserialize, Serialize};

/// Whether the AL query conditions on previous tasks through the proxy's
/// starting checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabellingMode {
    Sequential,
    Independent,
}

impl LabellingMode {
    pub fn name(self) -> &'static str {
        match self {
            LabellingMode::Sequential => "sequential",
            LabellingMode::Independent => "independent",
        }
    }
}

impl std::fmt::Display for LabellingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Budget checkpoints (percent of pool) at which the accuracy matrix is
/// snapshot for the normalized-forgetting analysis.
pub const FR_MILESTONES: [u8; 5] = [2, 4, 6, 8, 10];

/// Per-run engine configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub arch: Architecture,
    pub cl: CLHyper,
    pub al_strategy: AlStrategy,
    pub labelling_mode: LabellingMode,
    pub eval_every_round: bool,
}

impl RunConfig {
    pub fn new(
        arch: Architecture,
        cl: CLHyper,
        al_strategy: AlStrategy,
        labelling_mode: LabellingMode,
    ) -> Self {
        RunConfig {
            arch,
            cl,
            al_strategy,
            labelling_mode,
            eval_every_round: true,
        }
    }

    fn validate(&self, stream: &TaskStream) -> Result<()> {
        self.cl.validate()?;
        if self.cl.strategy == Strategy::Icarl && stream.scenario() != Scenario::ClassIl {
            return Err(Error::config(
                "icarl is a class-IL method; refusing other scenarios",
            ));
        }
        if stream.is_empty() {
            return Err(Error::config("empty task stream"));
        }
        let dim = self.arch.input_dim();
        if stream.tasks().iter().any(|t| t.test().dim() != dim) {
            return Err(Error::config(format!(
                "architecture input dim {dim} does not match stream data"
            )));
        }
        if self.arch.num_classes() != stream.num_classes_total() {
            return Err(Error::config(format!(
                "architecture has {} classes, stream has {}",
                self.arch.num_classes(),
                stream.num_classes_total()
            )));
        }
        Ok(())
    }
}

/// Accuracy pair recorded after one AL round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundPoint {
    /// Test accuracy of the current task.
    pub current: f64,
    /// Mean test accuracy over tasks seen so far (current included).
    pub seen_mean: f64,
}

/// Accuracy-matrix snapshot at one budget milestone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneSnapshot {
    /// Budget checkpoint in percent of the pool.
    pub pct: u8,
    /// Lower-triangular rows, one per task, recorded when that task's
    /// annotation count first reached the checkpoint.
    pub rows: Vec<Vec<f64>>,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    /// `accuracy_matrix[i][j]`: test accuracy of task `j` after finishing
    /// task `i` (the post-retrain checkpoint), `j <= i`.
    pub accuracy_matrix: Vec<Vec<f64>>,
    /// Per task, per AL round (round 0 = before any annotation).
    pub round_curves: Vec<Vec<RoundPoint>>,
    /// Stable item ids annotated per task per round.
    pub query_history: Vec<Vec<Vec<usize>>>,
    /// Accuracy-matrix snapshots at budget milestones, ascending pct;
    /// only checkpoints reached by every task are kept.
    pub milestones: Vec<MilestoneSnapshot>,
    /// Oracle labels charged per task.
    pub budget_spent: Vec<usize>,
}

impl RunLog {
    pub fn avg_accuracy(&self) -> Result<f64> {
        metrics::avg_accuracy(&self.accuracy_matrix)
    }

    pub fn forgetting_rate(&self) -> Result<f64> {
        metrics::forgetting_rate(&self.accuracy_matrix)
    }

    /// Mean over tasks of the current-task learning-curve area.
    pub fn mean_lca(&self) -> Result<f64> {
        let curves: Vec<Vec<f64>> = self
            .round_curves
            .iter()
            .map(|c| c.iter().map(|p| p.current).collect())
            .collect();
        if curves.iter().any(Vec::is_empty) {
            return Err(Error::contract("run has no round curves"));
        }
        let mut total = 0.0;
        for c in &curves {
            total += metrics::lca(c)?;
        }
        Ok(total / curves.len() as f64)
    }
}

/// Per-task test accuracies of `model` on tasks `0..=upto`, under the
/// stream's evaluation convention: class-IL restricts the head to classes
/// seen so far, task-IL applies each task's own mask, domain-IL uses the
/// shared label set.
pub fn evaluate(model: &ModelState, stream: &TaskStream, upto: usize) -> Result<Vec<f64>> {
    evaluate_tasks(model, None, stream, upto)
}

fn evaluate_tasks(
    model: &ModelState,
    exemplars: Option<&ClassExemplars>,
    stream: &TaskStream,
    upto: usize,
) -> Result<Vec<f64>> {
    let nc = stream.num_classes_total();
    let seen_mask = match stream.scenario() {
        Scenario::ClassIl => Some(stream.seen_class_mask(upto)),
        _ => None,
    };
    let mut out = Vec::with_capacity(upto + 1);
    for task in &stream.tasks()[..=upto] {
        let test = task.test();
        if test.is_empty() {
            out.push(0.0);
            continue;
        }
        let inputs = test.inputs_f64();
        let predictions: Vec<usize> = if let Some(ex) = exemplars {
            cl::icarl_classify_batch(model, &inputs, ex)?
        } else {
            let mask = match stream.scenario() {
                Scenario::ClassIl => seen_mask.clone(),
                Scenario::TaskIl => Some(task.class_mask(nc)),
                Scenario::DomainIl => None,
            };
            let trace = model.forward(&inputs, mask.as_deref())?;
            (0..inputs.rows())
                .map(|i| {
                    let row = trace.probs.row(i);
                    (0..nc)
                        .max_by(|&a, &b| row[a].total_cmp(&row[b]))
                        .expect("at least one class")
                })
                .collect()
        };
        let correct = predictions
            .iter()
            .zip(test.labels())
            .filter(|(p, y)| p == y)
            .count();
        out.push(correct as f64 / test.len() as f64);
    }
    Ok(out)
}

/// Continual state threaded across tasks.
struct ContinualState {
    checkpoint: ModelState,
    buffer: ReplayBuffer,
    anchor: Option<EwcAnchor>,
    exemplars: Option<ClassExemplars>,
}

/// `ψ` with cold-start handling: an empty labelled set (and, for GDumb,
/// an empty buffer) leaves the starting checkpoint untouched.
fn train_or_passthrough(
    config: &RunConfig,
    start: &ModelState,
    task: &Task,
    nc: usize,
    state: &ContinualState,
    buffer: ReplayBuffer,
    seed: u64,
) -> Result<TrainOutcome> {
    let trainable = if config.cl.strategy == Strategy::Gdumb {
        task.labelled_len() > 0 || !buffer.is_empty()
    } else {
        task.labelled_len() > 0
    };
    if !trainable {
        return Ok(TrainOutcome {
            model: start.clone(),
            buffer,
            anchor: None,
            exemplars: None,
        });
    }
    cl::train_task(
        &config.cl,
        start.clone(),
        task,
        nc,
        buffer,
        state.anchor.as_ref(),
        state.exemplars.as_ref(),
        seed,
    )
}

/// Runs the full ACL loop over a stream. Deterministic: identical
/// `(stream, config, seed)` produce identical logs.
pub fn run_acl(stream: &TaskStream, config: &RunConfig, seed: u64) -> Result<RunLog> {
    config.validate(stream)?;
    let nc = stream.num_classes_total();
    let mut run_stream = stream.clone();
    let t_total = run_stream.len();

    let theta0 = init_model(&config.arch, seeds::derive(seed, &[label::INIT]));
    let mut state = ContinualState {
        checkpoint: theta0.clone(),
        buffer: config.cl.fresh_buffer(),
        anchor: None,
        exemplars: None,
    };

    let mut accuracy_matrix: Vec<Vec<f64>> = Vec::with_capacity(t_total);
    let mut round_curves: Vec<Vec<RoundPoint>> = Vec::with_capacity(t_total);
    let mut query_history: Vec<Vec<Vec<usize>>> = Vec::with_capacity(t_total);
    let mut milestone_rows: Vec<Vec<Option<Vec<f64>>>> =
        vec![vec![None; t_total]; FR_MILESTONES.len()];
    let mut budget_spent = Vec::with_capacity(t_total);

    for t in 0..t_total {
        let proxy_start = match config.labelling_mode {
            LabellingMode::Sequential => state.checkpoint.clone(),
            LabellingMode::Independent => theta0.clone(),
        };
        let task_seed = seeds::derive(seed, &[label::TASK, t as u64]);
        let pool_initial = run_stream.tasks()[t].pool_len();
        let thresholds: Vec<usize> = FR_MILESTONES
            .iter()
            .map(|&p| (pool_initial as f64 * f64::from(p) / 100.0).floor() as usize)
            .collect();

        // line 3: build the proxy on whatever labels exist (none, cold start)
        let proxy_outcome = train_or_passthrough(
            config,
            &proxy_start,
            &run_stream.tasks()[t],
            nc,
            &state,
            state.buffer.clone(),
            seeds::derive(task_seed, &[label::ROUND, 0]),
        )?;
        let mut proxy = proxy_outcome.model;
        let mut proxy_exemplars = proxy_outcome.exemplars;

        let mut curves_t: Vec<RoundPoint> = Vec::new();
        let mut history_t: Vec<Vec<usize>> = Vec::new();
        if config.eval_every_round {
            let accs = evaluate_tasks(
                &proxy,
                icarl_eval(config, proxy_exemplars.as_ref(), &state),
                &run_stream,
                t,
            )?;
            curves_t.push(round_point(&accs));
        }

        // AL rounds until the budget is spent
        let mut round = 1u64;
        loop {
            let remaining = run_stream.tasks()[t].remaining_budget();
            if remaining == 0 || run_stream.tasks()[t].pool_len() == 0 {
                break;
            }
            let k = run_stream.tasks()[t]
                .query_size()
                .min(remaining)
                .min(run_stream.tasks()[t].pool_len());
            let batch = al::query(
                config.al_strategy,
                &proxy,
                &run_stream.tasks()[t],
                nc,
                k,
                seeds::derive(task_seed, &[label::QUERY, round]),
            )?;
            let ids = run_stream.tasks_mut()[t].annotate(&batch.pool_positions)?;
            history_t.push(ids);

            // line 9: retrain the proxy from the same starting checkpoint
            let outcome = train_or_passthrough(
                config,
                &proxy_start,
                &run_stream.tasks()[t],
                nc,
                &state,
                state.buffer.clone(),
                seeds::derive(task_seed, &[label::ROUND, round]),
            )?;
            proxy = outcome.model;
            proxy_exemplars = outcome.exemplars;

            if config.eval_every_round {
                let accs = evaluate_tasks(
                    &proxy,
                    icarl_eval(config, proxy_exemplars.as_ref(), &state),
                    &run_stream,
                    t,
                )?;
                curves_t.push(round_point(&accs));
                let spent = run_stream.tasks()[t].spent();
                let prev_spent = spent - k;
                for (mi, &threshold) in thresholds.iter().enumerate() {
                    if threshold > 0 && prev_spent < threshold && spent >= threshold {
                        milestone_rows[mi][t] = Some(accs.clone());
                    }
                }
            }
            round += 1;
        }

        // line 10: retrain on the collected data from the previous task's
        // checkpoint; this commits buffer/anchor/exemplar updates
        let start = state.checkpoint.clone();
        let committed = std::mem::replace(&mut state.buffer, config.cl.fresh_buffer());
        let final_outcome = train_or_passthrough(
            config,
            &start,
            &run_stream.tasks()[t],
            nc,
            &state,
            committed,
            seeds::derive(task_seed, &[label::FINAL]),
        )?;
        state.checkpoint = final_outcome.model;
        state.buffer = final_outcome.buffer;
        if final_outcome.anchor.is_some() {
            state.anchor = final_outcome.anchor;
        }
        if final_outcome.exemplars.is_some() {
            state.exemplars = final_outcome.exemplars;
        }

        let accs = evaluate_tasks(
            &state.checkpoint,
            icarl_eval(config, state.exemplars.as_ref(), &state),
            &run_stream,
            t,
        )?;
        accuracy_matrix.push(accs);
        round_curves.push(curves_t);
        query_history.push(history_t);
        budget_spent.push(run_stream.tasks()[t].spent());
    }

    let milestones = FR_MILESTONES
        .iter()
        .zip(milestone_rows)
        .filter_map(|(&pct, rows)| {
            let complete: Option<Vec<Vec<f64>>> = rows.into_iter().collect();
            complete.map(|rows| MilestoneSnapshot { pct, rows })
        })
        .collect();

    Ok(RunLog {
        accuracy_matrix,
        round_curves,
        query_history,
        milestones,
        budget_spent,
    })
}

fn icarl_eval<'a>(
    config: &RunConfig,
    preferred: Option<&'a ClassExemplars>,
    state: &'a ContinualState,
) -> Option<&'a ClassExemplars> {
    if config.cl.strategy != Strategy::Icarl {
        return None;
    }
    preferred
        .or(state.exemplars.as_ref())
        .filter(|e| !e.is_empty())
}

fn round_point(accs: &[f64]) -> RoundPoint {
    let current = *accs.last().expect("at least the current task");
    let seen_mean = accs.iter().sum::<f64>() / accs.len() as f64;
    RoundPoint { current, seen_mean }
}

/// The supervised-CL baseline: the whole pool is labelled up front and
/// each task is trained once from the previous checkpoint. Produces no
/// round curves or query history.
pub fn run_supervised_cl(stream: &TaskStream, config: &RunConfig, seed: u64) -> Result<RunLog> {
    config.validate(stream)?;
    let nc = stream.num_classes_total();
    let mut run_stream = stream.clone();
    let t_total = run_stream.len();

    let theta0 = init_model(&config.arch, seeds::derive(seed, &[label::INIT]));
    let mut state = ContinualState {
        checkpoint: theta0,
        buffer: config.cl.fresh_buffer(),
        anchor: None,
        exemplars: None,
    };
    let mut accuracy_matrix = Vec::with_capacity(t_total);
    let mut budget_spent = Vec::with_capacity(t_total);

    for t in 0..t_total {
        run_stream.tasks_mut()[t].annotate_all_free();
        let task_seed = seeds::derive(seed, &[label::TASK, t as u64]);
        let start = state.checkpoint.clone();
        let committed = std::mem::replace(&mut state.buffer, config.cl.fresh_buffer());
        let outcome = train_or_passthrough(
            config,
            &start,
            &run_stream.tasks()[t],
            nc,
            &state,
            committed,
            seeds::derive(task_seed, &[label::FINAL]),
        )?;
        state.checkpoint = outcome.model;
        state.buffer = outcome.buffer;
        if outcome.anchor.is_some() {
            state.anchor = outcome.anchor;
        }
        if outcome.exemplars.is_some() {
            state.exemplars = outcome.exemplars;
        }
        let accs = evaluate_tasks(
            &state.checkpoint,
            icarl_eval(config, state.exemplars.as_ref(), &state),
            &run_stream,
            t,
        )?;
        accuracy_matrix.push(accs);
        budget_spent.push(0);
    }

    Ok(RunLog {
        accuracy_matrix,
        round_curves: vec![Vec::new(); t_total],
        query_history: vec![Vec::new(); t_total],
        milestones: Vec::new(),
        budget_spent,
    })
}

#[cfg(test)]
mod tests;

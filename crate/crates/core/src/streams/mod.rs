//! Dataset ingestion and task-sequence construction.
//!
//! A [`TaskStream`] is an ordered list of [`Task`]s under one incremental
//! learning scenario. Each task owns a labelled seed set (empty under
//! cold start), an unlabelled pool whose oracle labels are revealed only
//! through [`Task::annotate`], validation and test sets, and a budget
//! ledger.

mod generators;
mod idx;

pub use generators::{
    make_permuted_stream, make_split_stream, make_synthetic_stream, reorder_tasks, SyntheticSpec,
};
pub use idx::load_idx;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Matrix32};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Incremental-learning scenario of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    DomainIl,
    ClassIl,
    TaskIl,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scenario::DomainIl => "domain_il",
            Scenario::ClassIl => "class_il",
            Scenario::TaskIl => "task_il",
        };
        f.write_str(s)
    }
}

/// A set of inputs with revealed labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledSet {
    inputs: Matrix32,
    labels: Vec<usize>,
}

impl LabelledSet {
    pub fn new(inputs: Matrix32, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::contract(format!(
                "{} inputs vs {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        if !inputs.is_finite() {
            return Err(Error::contract("inputs must be finite"));
        }
        Ok(LabelledSet { inputs, labels })
    }

    pub fn empty(dim: usize) -> Self {
        LabelledSet {
            inputs: Matrix32::zeros(0, dim),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn inputs(&self) -> &Matrix32 {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn inputs_f64(&self) -> Matrix {
        self.inputs.to_f64()
    }

    /// Rows of this set, widened, in the given order.
    pub fn gather(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        let m = self.inputs.gather_f64(indices);
        let l = indices.iter().map(|&i| self.labels[i]).collect();
        (m, l)
    }
}

/// Immutable per-task payload, shared between runs.
#[derive(Debug)]
struct TaskData {
    pool_inputs: Matrix32,
    /// Hidden oracle labels; read only by `annotate` and by accessors over
    /// already-annotated ids.
    pool_labels: Vec<usize>,
    val: LabelledSet,
    test: LabelledSet,
}

/// One task of a stream: labelled seed set, unlabelled pool, evaluation
/// sets and the annotation budget ledger.
#[derive(Debug, Clone)]
pub struct Task {
    task_id: usize,
    /// Identity at construction time; stable across task reordering.
    source_id: usize,
    scenario: Scenario,
    data: Arc<TaskData>,
    /// Annotated pool ids, ascending. Kept sorted so the labelled set has
    /// a canonical order independent of annotation history.
    labelled_ids: Vec<usize>,
    /// Remaining pool ids, ascending.
    pool_ids: Vec<usize>,
    budget: usize,
    spent: usize,
    query_size: usize,
    class_subset: Vec<usize>,
}

impl Task {
    #[allow(clippy::too_many_arguments)]
    fn new(
        task_id: usize,
        scenario: Scenario,
        pool_inputs: Matrix32,
        pool_labels: Vec<usize>,
        val: LabelledSet,
        test: LabelledSet,
        budget: usize,
        query_size: usize,
        class_subset: Vec<usize>,
    ) -> Result<Self> {
        if pool_inputs.rows() != pool_labels.len() {
            return Err(Error::contract("pool inputs/labels length mismatch"));
        }
        if budget > pool_labels.len() {
            return Err(Error::contract(format!(
                "budget {} exceeds pool size {}",
                budget,
                pool_labels.len()
            )));
        }
        if budget > 0 && (query_size == 0 || query_size > budget) {
            return Err(Error::contract(format!(
                "query size {query_size} must be in 1..=budget {budget}"
            )));
        }
        let n = pool_labels.len();
        Ok(Task {
            task_id,
            source_id: task_id,
            scenario,
            data: Arc::new(TaskData {
                pool_inputs,
                pool_labels,
                val,
                test,
            }),
            labelled_ids: Vec::new(),
            pool_ids: (0..n).collect(),
            budget,
            spent: 0,
            query_size,
            class_subset,
        })
    }

    pub fn task_id(&self) -> usize {
        self.task_id
    }

    pub fn source_id(&self) -> usize {
        self.source_id
    }

    /// Relabels the position id, keeping the source id.
    pub(crate) fn with_task_id(mut self, id: usize) -> Task {
        self.task_id = id;
        self
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn spent(&self) -> usize {
        self.spent
    }

    pub fn remaining_budget(&self) -> usize {
        self.budget - self.spent
    }

    pub fn query_size(&self) -> usize {
        self.query_size
    }

    pub fn class_subset(&self) -> &[usize] {
        &self.class_subset
    }

    /// Boolean mask over `num_classes_total` selecting this task's classes.
    pub fn class_mask(&self, num_classes_total: usize) -> Vec<bool> {
        let mut mask = vec![false; num_classes_total];
        for &c in &self.class_subset {
            mask[c] = true;
        }
        mask
    }

    pub fn pool_len(&self) -> usize {
        self.pool_ids.len()
    }

    pub fn labelled_len(&self) -> usize {
        self.labelled_ids.len()
    }

    /// Stable ids of the remaining pool items, ascending.
    pub fn pool_ids(&self) -> &[usize] {
        &self.pool_ids
    }

    /// Stable ids of the annotated items, ascending.
    pub fn labelled_ids(&self) -> &[usize] {
        &self.labelled_ids
    }

    pub fn val(&self) -> &LabelledSet {
        &self.data.val
    }

    pub fn test(&self) -> &LabelledSet {
        &self.data.test
    }

    /// Pool inputs (without labels) for the remaining items, widened.
    pub fn pool_inputs_f64(&self) -> Matrix {
        self.data.pool_inputs.gather_f64(&self.pool_ids)
    }

    /// One pool input row by position, widened.
    pub fn pool_input_row(&self, position: usize) -> Vec<f64> {
        self.data
            .pool_inputs
            .row(self.pool_ids[position])
            .iter()
            .map(|&v| f64::from(v))
            .collect()
    }

    /// Labelled examples in canonical (ascending id) order, widened.
    pub fn labelled_examples(&self) -> (Matrix, Vec<usize>) {
        let m = self.data.pool_inputs.gather_f64(&self.labelled_ids);
        let l = self
            .labelled_ids
            .iter()
            .map(|&i| self.data.pool_labels[i])
            .collect();
        (m, l)
    }

    /// Reveals oracle labels for the pool items at the given positions
    /// (indices into the current pool), moving them to the labelled set and
    /// charging the budget. On any violation nothing is mutated.
    pub fn annotate(&mut self, pool_positions: &[usize]) -> Result<Vec<usize>> {
        if pool_positions.len() > self.remaining_budget() {
            return Err(Error::contract(format!(
                "annotating {} items exceeds remaining budget {}",
                pool_positions.len(),
                self.remaining_budget()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &p in pool_positions {
            if p >= self.pool_ids.len() {
                return Err(Error::contract(format!(
                    "pool position {} out of range {}",
                    p,
                    self.pool_ids.len()
                )));
            }
            if !seen.insert(p) {
                return Err(Error::contract(format!(
                    "duplicate pool position {p} in one annotate call"
                )));
            }
        }
        let ids: Vec<usize> = pool_positions.iter().map(|&p| self.pool_ids[p]).collect();
        // remove from pool in descending position order to keep indices valid
        let mut positions: Vec<usize> = pool_positions.to_vec();
        positions.sort_unstable_by(|a, b| b.cmp(a));
        for p in positions {
            self.pool_ids.remove(p);
        }
        for &id in &ids {
            let at = self.labelled_ids.partition_point(|&x| x < id);
            self.labelled_ids.insert(at, id);
        }
        self.spent += ids.len();
        Ok(ids)
    }

    /// Pre-annotates the entire pool without charging the budget ledger;
    /// used by the supervised (full-data) baseline.
    pub fn annotate_all_free(&mut self) {
        let mut ids = std::mem::take(&mut self.pool_ids);
        self.labelled_ids.append(&mut ids);
        self.labelled_ids.sort_unstable();
    }
}

/// An ordered task sequence under one scenario.
#[derive(Debug, Clone)]
pub struct TaskStream {
    tasks: Vec<Task>,
    scenario: Scenario,
    num_classes_total: usize,
}

impl TaskStream {
    pub fn new(tasks: Vec<Task>, scenario: Scenario, num_classes_total: usize) -> Result<Self> {
        for (i, t) in tasks.iter().enumerate() {
            if t.task_id != i {
                return Err(Error::contract(format!(
                    "task at position {i} has id {}",
                    t.task_id
                )));
            }
        }
        match scenario {
            Scenario::DomainIl => {
                if tasks
                    .windows(2)
                    .any(|w| w[0].class_subset != w[1].class_subset)
                {
                    return Err(Error::contract(
                        "domain-IL tasks must share one class subset",
                    ));
                }
            }
            Scenario::ClassIl | Scenario::TaskIl => {
                let mut seen = std::collections::BTreeSet::new();
                for t in &tasks {
                    for &c in &t.class_subset {
                        if !seen.insert(c) {
                            return Err(Error::contract(format!(
                                "class {c} appears in more than one task"
                            )));
                        }
                    }
                }
            }
        }
        Ok(TaskStream {
            tasks,
            scenario,
            num_classes_total,
        })
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn tasks_mut(&mut self) -> &mut [Task] {
        &mut self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn num_classes_total(&self) -> usize {
        self.num_classes_total
    }

    /// Union class mask of tasks `0..=upto`, the class-IL evaluation head.
    pub fn seen_class_mask(&self, upto: usize) -> Vec<bool> {
        let mut mask = vec![false; self.num_classes_total];
        for t in &self.tasks[..=upto] {
            for &c in &t.class_subset {
                mask[c] = true;
            }
        }
        mask
    }
}

#[cfg(test)]
mod tests;

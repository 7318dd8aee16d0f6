//! iCaRL exemplar management: herding selection, nearest-class-mean
//! classification, and the per-class exemplar ledger.

use super::buffer::{BufferEntry, ReplayBuffer};
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::nn::ModelState;
use crate::streams::Task;

/// Per-class exemplar index lists (into the replay buffer) and feature
/// means under the current model.
#[derive(Debug, Clone, Default)]
pub struct ClassExemplars {
    /// Class ids with exemplars, in first-seen order.
    pub classes: Vec<usize>,
    /// Parallel to `classes`: entry indices into the buffer.
    pub exemplar_indices: Vec<Vec<usize>>,
    /// Parallel to `classes`: mean penultimate feature of the exemplars.
    pub means: Vec<Vec<f64>>,
}

impl ClassExemplars {
    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Greedy herding: iteratively picks the index whose inclusion keeps the
/// running exemplar mean closest to the full feature mean. Ties break to
/// the lowest index. Returns indices in selection order; prefixes of the
/// result are themselves valid herding selections.
pub fn herd(features: &Matrix, m: usize) -> Result<Vec<usize>> {
    let n = features.rows();
    if m == 0 || m > n {
        return Err(Error::contract(format!(
            "herding size {m} out of range 1..={n}"
        )));
    }
    let d = features.cols();
    let mut mu = vec![0.0; d];
    for i in 0..n {
        for (j, &v) in features.row(i).iter().enumerate() {
            mu[j] += v;
        }
    }
    for v in mu.iter_mut() {
        *v /= n as f64;
    }

    let mut selected = Vec::with_capacity(m);
    let mut taken = vec![false; n];
    let mut running_sum = vec![0.0; d];
    for step in 1..=m {
        let mut best: Option<(f64, usize)> = None;
        for cand in 0..n {
            if taken[cand] {
                continue;
            }
            let f = features.row(cand);
            let mut dist = 0.0;
            for j in 0..d {
                let mean_j = (running_sum[j] + f[j]) / step as f64;
                let diff = mu[j] - mean_j;
                dist += diff * diff;
            }
            match best {
                Some((b, _)) if dist >= b => {}
                _ => best = Some((dist, cand)),
            }
        }
        let (_, pick) = best.expect("at least one candidate remains");
        taken[pick] = true;
        for (j, &v) in features.row(pick).iter().enumerate() {
            running_sum[j] += v;
        }
        selected.push(pick);
    }
    Ok(selected)
}

/// Nearest-class-mean classification in penultimate feature space;
/// ties break to the lowest class id.
pub fn classify(model: &ModelState, input: &[f64], exemplars: &ClassExemplars) -> Result<usize> {
    if exemplars.is_empty() {
        return Err(Error::contract("no class exemplars available"));
    }
    let inputs = Matrix::from_vec(1, input.len(), input.to_vec())?;
    let trace = model.forward(&inputs, None)?;
    let feature = trace.penultimate.row(0);
    let mut best = (f64::INFINITY, usize::MAX);
    for (k, &class) in exemplars.classes.iter().enumerate() {
        let d = squared_distance(feature, &exemplars.means[k]);
        if d < best.0 || (d == best.0 && class < best.1) {
            best = (d, class);
        }
    }
    Ok(best.1)
}

/// Batched nearest-class-mean predictions.
pub fn classify_batch(
    model: &ModelState,
    inputs: &Matrix,
    exemplars: &ClassExemplars,
) -> Result<Vec<usize>> {
    if exemplars.is_empty() {
        return Err(Error::contract("no class exemplars available"));
    }
    let trace = model.forward(inputs, None)?;
    let mut out = Vec::with_capacity(inputs.rows());
    for i in 0..inputs.rows() {
        let feature = trace.penultimate.row(i);
        let mut best = (f64::INFINITY, usize::MAX);
        for (k, &class) in exemplars.classes.iter().enumerate() {
            let d = squared_distance(feature, &exemplars.means[k]);
            if d < best.0 || (d == best.0 && class < best.1) {
                best = (d, class);
            }
        }
        out.push(best.1);
    }
    Ok(out)
}

/// Rebuilds the exemplar buffer after finishing `task`: new classes are
/// herded from the task's labelled data, old classes keep the first
/// `quota` picks of their original herding order, and all feature means
/// are recomputed under `model`.
pub fn update_exemplars(
    model: &ModelState,
    buffer: &ReplayBuffer,
    exemplars: &ClassExemplars,
    task: &Task,
) -> Result<(ReplayBuffer, ClassExemplars)> {
    let (inputs, labels) = task.labelled_examples();
    let mut new_classes: Vec<usize> = task.class_subset().to_vec();
    new_classes.retain(|c| !exemplars.classes.contains(c));

    let total_classes = exemplars.classes.len() + new_classes.len();
    if total_classes == 0 {
        return Err(Error::contract("no classes to build exemplars from"));
    }
    let quota = (buffer.capacity() / total_classes).max(1);

    // carry over old classes, truncated to the new quota
    let mut next = ReplayBuffer::new(buffer.capacity(), buffer.policy());
    let mut out = ClassExemplars::default();
    for (k, &class) in exemplars.classes.iter().enumerate() {
        let keep: Vec<usize> = exemplars.exemplar_indices[k]
            .iter()
            .take(quota)
            .copied()
            .collect();
        let mut idx_list = Vec::with_capacity(keep.len());
        for &bi in &keep {
            idx_list.push(next.entries().len());
            next.entries_mut().push(buffer.entries()[bi].clone());
        }
        out.classes.push(class);
        out.exemplar_indices.push(idx_list);
    }

    // herd each new class from the task's labelled examples
    for &class in &new_classes {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        let feats = {
            let sub = inputs.gather(&members);
            model.forward(&sub, None)?.penultimate
        };
        let take = quota.min(members.len());
        let picks = herd(&feats, take)?;
        let mut idx_list = Vec::with_capacity(picks.len());
        for &p in &picks {
            let i = members[p];
            idx_list.push(next.entries().len());
            next.entries_mut().push(BufferEntry {
                input: inputs.row(i).iter().map(|&v| v as f32).collect(),
                label: class,
                stored_logits: None,
                task_id: task.task_id(),
                class_mask: None,
            });
        }
        out.classes.push(class);
        out.exemplar_indices.push(idx_list);
    }
    next.set_tasks_seen(buffer.tasks_seen() + 1);

    // recompute class means under the current model
    for idx_list in &out.exemplar_indices {
        let dim = model.arch().input_dim();
        let mut sub = Matrix::zeros(idx_list.len(), dim);
        for (r, &bi) in idx_list.iter().enumerate() {
            for (j, &v) in next.entries()[bi].input.iter().enumerate() {
                sub.row_mut(r)[j] = f64::from(v);
            }
        }
        let feats = model.forward(&sub, None)?.penultimate;
        let mut mean = vec![0.0; feats.cols()];
        for r in 0..feats.rows() {
            for (j, &v) in feats.row(r).iter().enumerate() {
                mean[j] += v;
            }
        }
        for v in mean.iter_mut() {
            *v /= feats.rows().max(1) as f64;
        }
        out.means.push(mean);
    }
    Ok((next, out))
}

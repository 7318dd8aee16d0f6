//! Task-stream generators: permuted pixels, class splits, synthetic
//! Gaussian fixtures, and task-order permutation.

use super::{LabelledSet, Scenario, Task, TaskStream};
use crate::error::{Error, Result};
use crate::linalg::Matrix32;
use crate::seeds::{self, label};
use rand::seq::SliceRandom;
use rand::Rng;

fn check_fraction(name: &str, v: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero {
        (0.0..1.0).contains(&v)
    } else {
        v > 0.0 && v <= 1.0
    };
    if !ok {
        return Err(Error::config(format!("{name} {v} out of range")));
    }
    Ok(())
}

fn budget_and_query(pool_n: usize, budget_fraction: f64, query_fraction: f64) -> (usize, usize) {
    let budget = (budget_fraction * pool_n as f64).floor() as usize;
    let query = ((query_fraction * pool_n as f64).floor() as usize).max(1);
    let query = if budget > 0 { query.min(budget) } else { query };
    (budget, query)
}

fn num_classes_of(sets: &[&LabelledSet]) -> usize {
    sets.iter()
        .flat_map(|s| s.labels().iter())
        .max()
        .map_or(0, |&m| m + 1)
}

/// Splits `0..n` into (val, pool) index lists, seeded.
fn carve_val(n: usize, val_fraction: f64, seed: u64, path: &[u64]) -> (Vec<usize>, Vec<usize>) {
    let n_val = (val_fraction * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeds::rng(seed, path));
    let mut val: Vec<usize> = order[..n_val].to_vec();
    let mut pool: Vec<usize> = order[n_val..].to_vec();
    val.sort_unstable();
    pool.sort_unstable();
    (val, pool)
}

fn permute_columns(inputs: &Matrix32, perm: &[usize]) -> Matrix32 {
    let mut out = Matrix32::zeros(inputs.rows(), inputs.cols());
    for i in 0..inputs.rows() {
        let src = inputs.row(i);
        let dst = out.row_mut(i);
        for (j, &p) in perm.iter().enumerate() {
            dst[j] = src[p];
        }
    }
    out
}

/// Builds a permuted-pixel stream (domain-IL): task 0 keeps the identity
/// permutation, later tasks apply independent uniform pixel permutations.
/// All labelled seed sets start empty (cold start).
pub fn make_permuted_stream(
    base_train: &LabelledSet,
    base_test: &LabelledSet,
    num_tasks: usize,
    val_fraction: f64,
    budget_fraction: f64,
    query_fraction: f64,
    seed: u64,
) -> Result<TaskStream> {
    if num_tasks == 0 {
        return Err(Error::config("num_tasks must be at least 1"));
    }
    check_fraction("val_fraction", val_fraction, true)?;
    check_fraction("budget_fraction", budget_fraction, false)?;
    check_fraction("query_fraction", query_fraction, false)?;
    let dim = base_train.dim();
    let num_classes = num_classes_of(&[base_train, base_test]);
    let class_subset: Vec<usize> = (0..num_classes).collect();
    let (val_idx, pool_idx) = carve_val(base_train.len(), val_fraction, seed, &[label::VAL_SPLIT]);
    let (budget, query) = budget_and_query(pool_idx.len(), budget_fraction, query_fraction);

    let mut tasks = Vec::with_capacity(num_tasks);
    for t in 0..num_tasks {
        let perm: Vec<usize> = if t == 0 {
            (0..dim).collect()
        } else {
            let mut p: Vec<usize> = (0..dim).collect();
            p.shuffle(&mut seeds::rng(seed, &[label::PERMUTE, t as u64]));
            p
        };
        let pool_inputs = permute_columns(&base_train.inputs().gather(&pool_idx), &perm);
        let pool_labels: Vec<usize> = pool_idx.iter().map(|&i| base_train.labels()[i]).collect();
        let val_inputs = permute_columns(&base_train.inputs().gather(&val_idx), &perm);
        let val_labels: Vec<usize> = val_idx.iter().map(|&i| base_train.labels()[i]).collect();
        let test_inputs = permute_columns(base_test.inputs(), &perm);
        tasks.push(Task::new(
            t,
            Scenario::DomainIl,
            pool_inputs,
            pool_labels,
            LabelledSet::new(val_inputs, val_labels)?,
            LabelledSet::new(test_inputs, base_test.labels().to_vec())?,
            budget,
            query,
            class_subset.clone(),
        )?);
    }
    TaskStream::new(tasks, Scenario::DomainIl, num_classes)
}

/// Builds a class-split stream: task `t` holds exactly the samples whose
/// label lies in its `classes_per_task`-sized slice of `class_order`.
#[allow(clippy::too_many_arguments)]
pub fn make_split_stream(
    base_train: &LabelledSet,
    base_test: &LabelledSet,
    classes_per_task: usize,
    class_order: &[usize],
    scenario: Scenario,
    val_fraction: f64,
    budget_fraction: f64,
    query_fraction: f64,
    seed: u64,
) -> Result<TaskStream> {
    if scenario == Scenario::DomainIl {
        return Err(Error::config(
            "split streams are class-IL or task-IL, not domain-IL",
        ));
    }
    check_fraction("val_fraction", val_fraction, true)?;
    check_fraction("budget_fraction", budget_fraction, false)?;
    check_fraction("query_fraction", query_fraction, false)?;
    let num_classes = num_classes_of(&[base_train, base_test]);
    if classes_per_task == 0 || num_classes % classes_per_task != 0 {
        return Err(Error::config(format!(
            "{num_classes} classes not divisible into tasks of {classes_per_task}"
        )));
    }
    {
        let mut sorted = class_order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..num_classes).collect::<Vec<_>>() {
            return Err(Error::config(
                "class_order must be a permutation of all classes",
            ));
        }
    }
    let num_tasks = num_classes / classes_per_task;
    let mut tasks = Vec::with_capacity(num_tasks);
    for t in 0..num_tasks {
        let mut subset: Vec<usize> =
            class_order[t * classes_per_task..(t + 1) * classes_per_task].to_vec();
        subset.sort_unstable();
        let in_subset = |y: usize| subset.binary_search(&y).is_ok();
        let train_idx: Vec<usize> = (0..base_train.len())
            .filter(|&i| in_subset(base_train.labels()[i]))
            .collect();
        let test_idx: Vec<usize> = (0..base_test.len())
            .filter(|&i| in_subset(base_test.labels()[i]))
            .collect();
        let (val_local, pool_local) = carve_val(
            train_idx.len(),
            val_fraction,
            seed,
            &[label::VAL_SPLIT, t as u64],
        );
        let pool_idx: Vec<usize> = pool_local.iter().map(|&i| train_idx[i]).collect();
        let val_idx: Vec<usize> = val_local.iter().map(|&i| train_idx[i]).collect();
        let (budget, query) = budget_and_query(pool_idx.len(), budget_fraction, query_fraction);
        let (pool_inputs, pool_labels) = gather32(base_train, &pool_idx);
        let (val_inputs, val_labels) = gather32(base_train, &val_idx);
        let (test_inputs, test_labels) = gather32(base_test, &test_idx);
        tasks.push(Task::new(
            t,
            scenario,
            pool_inputs,
            pool_labels,
            LabelledSet::new(val_inputs, val_labels)?,
            LabelledSet::new(test_inputs, test_labels)?,
            budget,
            query,
            subset,
        )?);
    }
    TaskStream::new(tasks, scenario, num_classes)
}

fn gather32(set: &LabelledSet, indices: &[usize]) -> (Matrix32, Vec<usize>) {
    let mut out = Matrix32::zeros(indices.len(), set.dim());
    for (dst, &src) in indices.iter().enumerate() {
        out.row_mut(dst).copy_from_slice(set.inputs().row(src));
    }
    let labels = indices.iter().map(|&i| set.labels()[i]).collect();
    (out, labels)
}

/// Parameters for the synthetic Gaussian-blob stream used as a fast,
/// fully deterministic test fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub tasks: usize,
    pub classes_per_task: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub test_per_class: usize,
    pub cluster_separation: f64,
    pub budget_fraction: f64,
    pub query_fraction: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            tasks: 3,
            classes_per_task: 2,
            dim: 8,
            samples_per_class: 40,
            test_per_class: 20,
            cluster_separation: 6.0,
            budget_fraction: 0.5,
            query_fraction: 0.1,
        }
    }
}

/// One standard normal draw via Box-Muller; keeps the generator free of
/// extra distribution dependencies.
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Builds a synthetic stream of unit-variance Gaussian blobs with the
/// requested mean separation. Domain-IL tasks share the label set but
/// draw fresh class means; class/task-IL tasks get disjoint class ranges.
pub fn make_synthetic_stream(
    spec: &SyntheticSpec,
    scenario: Scenario,
    seed: u64,
) -> Result<TaskStream> {
    if spec.tasks == 0 || spec.classes_per_task == 0 || spec.dim == 0 || spec.samples_per_class == 0
    {
        return Err(Error::config("synthetic spec counts must be positive"));
    }
    check_fraction("budget_fraction", spec.budget_fraction, false)?;
    check_fraction("query_fraction", spec.query_fraction, false)?;
    let num_classes_total = match scenario {
        Scenario::DomainIl => spec.classes_per_task,
        Scenario::ClassIl | Scenario::TaskIl => spec.tasks * spec.classes_per_task,
    };
    let mut tasks = Vec::with_capacity(spec.tasks);
    for t in 0..spec.tasks {
        let subset: Vec<usize> = match scenario {
            Scenario::DomainIl => (0..spec.classes_per_task).collect(),
            _ => (t * spec.classes_per_task..(t + 1) * spec.classes_per_task).collect(),
        };
        let mut rng = seeds::rng(seed, &[label::STREAM, t as u64]);
        // one mean per class in this task, `cluster_separation` from origin
        let means: Vec<Vec<f64>> = subset
            .iter()
            .map(|_| {
                let v: Vec<f64> = (0..spec.dim).map(|_| standard_normal(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.iter().map(|x| x / norm * spec.cluster_separation).collect()
            })
            .collect();
        let draw_set = |per_class: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let n = per_class * subset.len();
            let mut inputs = Matrix32::zeros(n, spec.dim);
            let mut labels = Vec::with_capacity(n);
            let mut row = 0;
            for (ci, &class) in subset.iter().enumerate() {
                for _ in 0..per_class {
                    for (j, m) in means[ci].iter().enumerate() {
                        inputs.row_mut(row)[j] = (m + standard_normal(rng)) as f32;
                    }
                    labels.push(class);
                    row += 1;
                }
            }
            (inputs, labels)
        };
        let (pool_inputs, pool_labels) = draw_set(spec.samples_per_class, &mut rng);
        // break the class-sorted generation order so pool positions mix classes
        let mut order: Vec<usize> = (0..pool_labels.len()).collect();
        order.shuffle(&mut rng);
        let pool_inputs = pool_inputs.gather(&order);
        let pool_labels: Vec<usize> = order.iter().map(|&i| pool_labels[i]).collect();
        let (test_inputs, test_labels) = draw_set(spec.test_per_class, &mut rng);
        let (budget, query) =
            budget_and_query(pool_labels.len(), spec.budget_fraction, spec.query_fraction);
        tasks.push(Task::new(
            t,
            scenario,
            pool_inputs,
            pool_labels,
            LabelledSet::empty(spec.dim),
            LabelledSet::new(test_inputs, test_labels)?,
            budget,
            query,
            subset,
        )?);
    }
    TaskStream::new(tasks, scenario, num_classes_total)
}

/// Reorders the tasks of a stream; task ids are relabelled sequentially,
/// underlying data is shared unchanged.
pub fn reorder_tasks(stream: &TaskStream, order: &[usize]) -> Result<TaskStream> {
    let t = stream.len();
    {
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..t).collect::<Vec<_>>() {
            return Err(Error::contract(format!(
                "order must be a permutation of 0..{t}"
            )));
        }
    }
    let tasks = order
        .iter()
        .enumerate()
        .map(|(new_id, &old)| stream.tasks()[old].clone().with_task_id(new_id))
        .collect();
    TaskStream::new(tasks, stream.scenario(), stream.num_classes_total())
}

//! Ceiling baselines: active individual learning (one model per task)
//! and active multi-task learning (one model, jointly ranked queries
//! gated by per-task budgets).
//!
//! Both share one loop: each round the current model scores the eligible
//! pools jointly, globally top-ranked items are annotated unless their
//! task's budget is exhausted (next-ranked items take their place), and
//! the model retrains from scratch on the labelled union. Individual
//! learning runs that loop per task in isolation, seeded by the task's
//! source id so results do not depend on task order; a one-task MTL
//! stream degenerates to exactly that.

use crate::al::{self, AlStrategy};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::nn::{init_model, ModelState};
use crate::seeds::{self, label};
use crate::streams::{Scenario, Task, TaskStream};
use rand::seq::SliceRandom;

use super::RunConfig;

/// Active individual learning: a fresh model per task, the AL loop
/// confined to that task, no transfer. Class/task-IL accuracy is
/// measured within each task's own classes.
pub fn run_ceiling_indiv(stream: &TaskStream, config: &RunConfig, seed: u64) -> Result<Vec<f64>> {
    config.cl.validate()?;
    let nc = stream.num_classes_total();
    let mut accs = Vec::with_capacity(stream.len());
    for task in stream.tasks() {
        let task_seed = if stream.len() == 1 {
            seed
        } else {
            seeds::derive(seed, &[label::TASK, task.source_id() as u64])
        };
        let mut solo = vec![task.clone()];
        let model = mtl_loop(&mut solo, config, nc, stream.scenario(), task_seed)?;
        let mask = match stream.scenario() {
            Scenario::DomainIl => None,
            _ => Some(solo[0].class_mask(nc)),
        };
        accs.push(masked_accuracy(&model, &solo[0], mask.as_deref())?);
    }
    Ok(accs)
}

/// Active multi-task learning over all tasks simultaneously. Returns
/// per-task accuracies of the final joint model; a one-task stream
/// reduces to individual learning.
pub fn run_ceiling_mtl(stream: &TaskStream, config: &RunConfig, seed: u64) -> Result<Vec<f64>> {
    config.cl.validate()?;
    if stream.len() == 1 {
        return run_ceiling_indiv(stream, config, seed);
    }
    let nc = stream.num_classes_total();
    let scenario = stream.scenario();
    let mut tasks: Vec<Task> = stream.tasks().to_vec();
    let model = mtl_loop(&mut tasks, config, nc, scenario, seed)?;

    // task-IL under each task's mask; class-IL over the full head (the
    // joint model sees all classes); domain-IL shared head
    let mut accs = Vec::with_capacity(tasks.len());
    for task in &tasks {
        let mask = match scenario {
            Scenario::TaskIl => Some(task.class_mask(nc)),
            _ => None,
        };
        accs.push(masked_accuracy(&model, task, mask.as_deref())?);
    }
    Ok(accs)
}

fn masked_accuracy(model: &ModelState, task: &Task, mask: Option<&[bool]>) -> Result<f64> {
    let test = task.test();
    if test.is_empty() {
        return Ok(0.0);
    }
    let trace = model.forward(&test.inputs_f64(), mask)?;
    let nc = trace.probs.cols();
    let mut correct = 0;
    for (i, &y) in test.labels().iter().enumerate() {
        let row = trace.probs.row(i);
        let pred = (0..nc)
            .max_by(|&a, &b| row[a].total_cmp(&row[b]))
            .expect("at least one class");
        if pred == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// The joint AL loop: annotate under the global ranking with per-task
/// budget gates, then retrain from scratch on the labelled union.
/// Returns the final model.
fn mtl_loop(
    tasks: &mut [Task],
    config: &RunConfig,
    nc: usize,
    scenario: Scenario,
    seed: u64,
) -> Result<ModelState> {
    let theta0 = init_model(&config.arch, seeds::derive(seed, &[label::INIT]));
    let mut model = theta0.clone();
    let mut round = 1u64;
    loop {
        let eligible: Vec<usize> = (0..tasks.len())
            .filter(|&t| tasks[t].remaining_budget() > 0 && tasks[t].pool_len() > 0)
            .collect();
        if eligible.is_empty() {
            break;
        }
        let n_round: usize = eligible
            .iter()
            .map(|&t| tasks[t].query_size().min(tasks[t].remaining_budget()))
            .sum();

        // fill the round quota, re-ranking when budget gates force skips
        let mut taken_total = 0;
        let mut sub_iter = 0u64;
        while taken_total < n_round {
            let still_eligible: Vec<usize> = (0..tasks.len())
                .filter(|&t| tasks[t].remaining_budget() > 0 && tasks[t].pool_len() > 0)
                .collect();
            if still_eligible.is_empty() {
                break;
            }
            let ranked = ranked_candidates(
                tasks,
                &still_eligible,
                &model,
                config,
                nc,
                n_round - taken_total,
                seeds::derive(seed, &[label::QUERY, round, sub_iter]),
            )?;
            if ranked.is_empty() {
                break;
            }
            let mut per_task: std::collections::BTreeMap<usize, Vec<usize>> =
                std::collections::BTreeMap::new();
            let mut remaining: Vec<usize> = tasks.iter().map(Task::remaining_budget).collect();
            for (t, p) in ranked {
                if taken_total >= n_round {
                    break;
                }
                if remaining[t] == 0 {
                    continue; // budget exhausted: the next-ranked item wins
                }
                remaining[t] -= 1;
                per_task.entry(t).or_default().push(p);
                taken_total += 1;
            }
            let mut progressed = false;
            for (t, positions) in per_task {
                if !positions.is_empty() {
                    tasks[t].annotate(&positions)?;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
            sub_iter += 1;
        }

        let examples = labelled_union(tasks, nc, scenario);
        model = train_union(
            &theta0,
            &examples,
            config,
            seeds::derive(seed, &[label::ROUND, round]),
        )?;
        round += 1;
    }
    Ok(model)
}

/// One labelled example of the joint pool with its task's training mask.
struct UnionExample {
    input: Vec<f64>,
    label: usize,
    mask: Option<Vec<bool>>,
}

fn labelled_union(tasks: &[Task], nc: usize, scenario: Scenario) -> Vec<UnionExample> {
    let mut out = Vec::new();
    for task in tasks {
        let mask = match scenario {
            Scenario::TaskIl => Some(task.class_mask(nc)),
            _ => None,
        };
        let (inputs, labels) = task.labelled_examples();
        for i in 0..labels.len() {
            out.push(UnionExample {
                input: inputs.row(i).to_vec(),
                label: labels[i],
                mask: mask.clone(),
            });
        }
    }
    out
}

fn train_union(
    theta0: &ModelState,
    examples: &[UnionExample],
    config: &RunConfig,
    seed: u64,
) -> Result<ModelState> {
    let mut model = theta0.clone();
    if examples.is_empty() {
        return Ok(model);
    }
    let dim = examples[0].input.len();
    let mut rng = seeds::rng(seed, &[label::SHUFFLE]);
    for _ in 0..config.cl.epochs {
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.cl.batch_size) {
            // group the minibatch by mask so each sample trains under its
            // own task head
            let mut groups: std::collections::BTreeMap<Option<Vec<bool>>, Vec<usize>> =
                std::collections::BTreeMap::new();
            for &i in chunk {
                groups.entry(examples[i].mask.clone()).or_default().push(i);
            }
            let mut grad = vec![0.0; model.params().len()];
            for (mask, members) in groups {
                let mut sub = Matrix::zeros(members.len(), dim);
                let mut labels = Vec::with_capacity(members.len());
                for (r, &i) in members.iter().enumerate() {
                    sub.row_mut(r).copy_from_slice(&examples[i].input);
                    labels.push(examples[i].label);
                }
                let (_, g) = model.loss_and_grad(&sub, &labels, mask.as_deref())?;
                let w = members.len() as f64 / chunk.len() as f64;
                for (a, gi) in grad.iter_mut().zip(&g) {
                    *a += w * gi;
                }
            }
            model = model.optimizer_step(&grad, &config.cl.optimizer)?;
        }
    }
    Ok(model)
}

/// Ranked (task, pool position) candidates for one round, best first.
fn ranked_candidates(
    tasks: &[Task],
    eligible: &[usize],
    model: &ModelState,
    config: &RunConfig,
    nc: usize,
    need: usize,
    rng_seed: u64,
) -> Result<Vec<(usize, usize)>> {
    match config.al_strategy {
        AlStrategy::Random => {
            let mut all: Vec<(usize, usize)> = Vec::new();
            for &t in eligible {
                for p in 0..tasks[t].pool_len() {
                    all.push((t, p));
                }
            }
            let mut rng = seeds::rng(rng_seed, &[label::QUERY]);
            all.shuffle(&mut rng);
            Ok(all)
        }
        AlStrategy::Entropy | AlStrategy::Margin => {
            let mut scored: Vec<(f64, usize, usize)> = Vec::new();
            for &t in eligible {
                let task = &tasks[t];
                let mask = match task.scenario() {
                    Scenario::TaskIl => Some(task.class_mask(nc)),
                    _ => None,
                };
                let trace = model.forward(&task.pool_inputs_f64(), mask.as_deref())?;
                let s = match config.al_strategy {
                    AlStrategy::Entropy => al::score_entropy(&trace.probs)?,
                    _ => al::score_margin(&trace.probs)?,
                };
                for (p, &v) in s.iter().enumerate() {
                    scored.push((v, t, p));
                }
            }
            scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            Ok(scored.into_iter().map(|(_, t, p)| (t, p)).collect())
        }
        AlStrategy::Badge | AlStrategy::Coreset | AlStrategy::Kmeans => {
            // concatenate eligible pools and select jointly
            let mut map: Vec<(usize, usize)> = Vec::new();
            let mut blocks: Vec<Matrix> = Vec::new();
            for &t in eligible {
                let pool = tasks[t].pool_inputs_f64();
                for p in 0..pool.rows() {
                    map.push((t, p));
                }
                blocks.push(pool);
            }
            if map.is_empty() {
                return Ok(Vec::new());
            }
            let dim = blocks[0].cols();
            let mut concat = Matrix::zeros(map.len(), dim);
            let mut row = 0;
            for b in &blocks {
                for i in 0..b.rows() {
                    concat.row_mut(row).copy_from_slice(b.row(i));
                    row += 1;
                }
            }
            let k = need.min(map.len());
            let picks = match config.al_strategy {
                AlStrategy::Badge => {
                    let emb = al::gradient_embeddings(model, &concat)?;
                    al::badge_select(&emb, k, rng_seed)?
                }
                AlStrategy::Coreset => {
                    let pool_emb = model.forward(&concat, None)?.penultimate;
                    let labelled = labelled_union(tasks, nc, tasks[0].scenario());
                    let labelled_emb = if labelled.is_empty() {
                        Matrix::zeros(0, pool_emb.cols())
                    } else {
                        let mut m = Matrix::zeros(labelled.len(), dim);
                        for (i, e) in labelled.iter().enumerate() {
                            m.row_mut(i).copy_from_slice(&e.input);
                        }
                        model.forward(&m, None)?.penultimate
                    };
                    al::coreset_select(&pool_emb, &labelled_emb, k)?
                }
                _ => {
                    let pool_emb = model.forward(&concat, None)?.penultimate;
                    al::kmeans_select(&pool_emb, k, rng_seed)?
                }
            };
            Ok(picks.into_iter().map(|i| map[i]).collect())
        }
    }
}

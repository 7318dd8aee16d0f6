//! Sweep orchestration: expands a config into the
//! `seeds × task_orders × modes × cl × al` cross product, executes runs
//! (optionally in parallel), persists run logs and writes the summary
//! table. Output ordering is canonical regardless of execution order.

use crate::al::AlStrategy;
use crate::cl::Strategy;
use crate::config::{DatasetKind, ExperimentConfig, RunMode, SyntheticConfig};
use crate::engine::{self, LabellingMode, RunConfig};
use crate::error::{Error, Result};
use crate::nn::Architecture;
use crate::report::{self, PersistedRun, RunDescriptor};
use crate::seeds::{self, label};
use crate::streams::{
    load_idx, make_permuted_stream, make_split_stream, make_synthetic_stream, reorder_tasks,
    LabelledSet, SyntheticSpec, TaskStream,
};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// One planned run of the sweep.
#[derive(Debug, Clone)]
struct PlannedRun {
    mode: RunMode,
    cl: Strategy,
    al: Option<AlStrategy>,
    seed: u64,
    order: Vec<usize>,
}

/// A failed run: its descriptor context and the error text.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub context: String,
    pub error: String,
}

/// Everything `run_experiment` produced.
#[derive(Debug)]
pub struct ExperimentReport {
    pub records: Vec<PersistedRun>,
    pub failures: Vec<RunFailure>,
    pub output_dir: PathBuf,
}

fn mnist_path(dir: &Path, stem: &str) -> Result<PathBuf> {
    let gz = dir.join(format!("{stem}.gz"));
    if gz.exists() {
        return Ok(gz);
    }
    let raw = dir.join(stem);
    if raw.exists() {
        return Ok(raw);
    }
    Err(Error::config(format!(
        "MNIST file {stem}[.gz] not found under {}",
        dir.display()
    )))
}

/// Loads the MNIST train/test pair from a directory of IDX files
/// (gzipped or raw).
pub fn load_mnist(dir: &Path) -> Result<(LabelledSet, LabelledSet)> {
    let train = load_idx(
        mnist_path(dir, "train-images-idx3-ubyte")?,
        mnist_path(dir, "train-labels-idx1-ubyte")?,
    )?;
    let test = load_idx(
        mnist_path(dir, "t10k-images-idx3-ubyte")?,
        mnist_path(dir, "t10k-labels-idx1-ubyte")?,
    )?;
    Ok((train, test))
}

fn synthetic_spec(config: &ExperimentConfig) -> SyntheticSpec {
    let s: SyntheticConfig = config.synthetic.clone().unwrap_or_default();
    SyntheticSpec {
        tasks: s.tasks,
        classes_per_task: s.classes_per_task,
        dim: s.dim,
        samples_per_class: s.samples_per_class,
        test_per_class: s.test_per_class,
        cluster_separation: s.cluster_separation,
        budget_fraction: config.budget_fraction,
        query_fraction: config.query_fraction,
    }
}

/// Builds the base (identity-order) stream for one seed.
pub fn build_stream(
    config: &ExperimentConfig,
    base: Option<&(LabelledSet, LabelledSet)>,
    seed: u64,
) -> Result<TaskStream> {
    let stream_seed = seeds::derive(seed, &[label::STREAM]);
    match config.dataset_kind()? {
        DatasetKind::MnistPermuted => {
            let (train, test) = base.expect("mnist data loaded");
            make_permuted_stream(
                train,
                test,
                config.num_tasks.unwrap_or(10),
                config.val_fraction,
                config.budget_fraction,
                config.query_fraction,
                stream_seed,
            )
        }
        DatasetKind::MnistSplit => {
            let (train, test) = base.expect("mnist data loaded");
            let default_order: Vec<usize> = (0..10).collect();
            let class_order = config.class_order.clone().unwrap_or(default_order);
            make_split_stream(
                train,
                test,
                config.classes_per_task.unwrap_or(2),
                &class_order,
                config.scenario,
                config.val_fraction,
                config.budget_fraction,
                config.query_fraction,
                stream_seed,
            )
        }
        DatasetKind::Synthetic => {
            make_synthetic_stream(&synthetic_spec(config), config.scenario, stream_seed)
        }
    }
}

fn arch_for(config: &ExperimentConfig, stream: &TaskStream) -> Result<Architecture> {
    let input_dim = stream.tasks()[0].test().dim();
    Architecture::new(
        input_dim,
        config.hidden_dims.clone(),
        stream.num_classes_total(),
    )
}

fn plan(config: &ExperimentConfig) -> Result<Vec<PlannedRun>> {
    let num_tasks = config.expected_num_tasks()?;
    let orders = config.task_orders.materialize(num_tasks)?;
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        for order in &orders {
            for &mode in &config.modes {
                for &cl in &config.cl {
                    match mode {
                        RunMode::FullCl => runs.push(PlannedRun {
                            mode,
                            cl,
                            al: None,
                            seed,
                            order: order.clone(),
                        }),
                        _ => {
                            for &al in &config.al {
                                runs.push(PlannedRun {
                                    mode,
                                    cl,
                                    al: Some(al),
                                    seed,
                                    order: order.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(runs)
}

fn execute_one(
    config: &ExperimentConfig,
    stream: &TaskStream,
    planned: &PlannedRun,
    out_dir: &Path,
) -> Result<PersistedRun> {
    let ordered = reorder_tasks(stream, &planned.order)?;
    let arch = arch_for(config, &ordered)?;
    let cl_hyper = config.hyper.apply(planned.cl);
    let descriptor = RunDescriptor {
        dataset: config.dataset.clone(),
        scenario: config.scenario,
        mode: planned.mode,
        cl: planned.cl,
        al: planned.al,
        seed: planned.seed,
        task_order: planned.order.clone(),
        budget_fraction: config.budget_fraction,
        query_fraction: config.query_fraction,
    };
    let log = match planned.mode {
        RunMode::FullCl => {
            let rc = RunConfig {
                arch,
                cl: cl_hyper,
                al_strategy: AlStrategy::Random, // unused by the baseline
                labelling_mode: LabellingMode::Sequential,
                eval_every_round: false,
            };
            engine::run_supervised_cl(&ordered, &rc, planned.seed)?
        }
        mode => {
            let rc = RunConfig {
                arch,
                cl: cl_hyper,
                al_strategy: planned.al.expect("acl run has an al strategy"),
                labelling_mode: match mode {
                    RunMode::Independent => LabellingMode::Independent,
                    _ => LabellingMode::Sequential,
                },
                eval_every_round: config.eval_every_round,
            };
            engine::run_acl(&ordered, &rc, planned.seed)?
        }
    };
    report::write_run(out_dir, descriptor, log)
}

/// Executes the whole sweep. Independent runs may execute concurrently
/// (`jobs` bounds the parallelism); per-run failures are recorded and do
/// not affect other runs. Writes one JSON log per run plus `summary.csv`.
pub fn run_experiment(
    config: &ExperimentConfig,
    jobs: usize,
    output_dir: Option<&Path>,
) -> Result<ExperimentReport> {
    config.validate()?;
    let out_dir = output_dir
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    std::fs::create_dir_all(&out_dir)?;

    let base = match config.dataset_kind()? {
        DatasetKind::Synthetic => None,
        _ => {
            let dir = config
                .data_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("data/mnist"));
            Some(load_mnist(&dir)?)
        }
    };

    let planned = plan(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("failed to build thread pool: {e}")))?;

    let mut records = Vec::new();
    let mut failures = Vec::new();
    // group by seed so one base stream is alive at a time
    let mut seeds_in_order: Vec<u64> = Vec::new();
    for p in &planned {
        if !seeds_in_order.contains(&p.seed) {
            seeds_in_order.push(p.seed);
        }
    }
    for seed in seeds_in_order {
        let stream = build_stream(config, base.as_ref(), seed)?;
        let batch: Vec<&PlannedRun> = planned.iter().filter(|p| p.seed == seed).collect();
        let results: Vec<(String, Result<PersistedRun>)> = pool.install(|| {
            batch
                .par_iter()
                .map(|p| {
                    let context = format!(
                        "{}/{}/{}/seed{}/order{:?}",
                        p.mode,
                        p.al.map_or("none", |a| a.name()),
                        p.cl,
                        p.seed,
                        p.order
                    );
                    (context, execute_one(config, &stream, p, &out_dir))
                })
                .collect()
        });
        for (context, result) in results {
            match result {
                Ok(run) => records.push(run),
                Err(e) => failures.push(RunFailure {
                    context,
                    error: e.to_string(),
                }),
            }
        }
    }

    records.sort_by(|a, b| a.fingerprint.cmp(&b.fingerprint));
    report::write_summary_csv(&records, &out_dir.join("summary.csv"))?;
    Ok(ExperimentReport {
        records,
        failures,
        output_dir: out_dir,
    })
}

/// Which ceiling to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CeilingKind {
    Indiv,
    Mtl,
}

/// Runs a ceiling over the config's seeds (identity task order; ceilings
/// have no cross-task state worth ordering) and writes a per-task
/// accuracy table.
pub fn run_ceiling(
    config: &ExperimentConfig,
    kind: CeilingKind,
    out: &Path,
) -> Result<()> {
    config.validate()?;
    let base = match config.dataset_kind()? {
        DatasetKind::Synthetic => None,
        _ => {
            let dir = config
                .data_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("data/mnist"));
            Some(load_mnist(&dir)?)
        }
    };
    let mut lines = vec!["dataset,kind,al,cl,seed,task,accuracy".to_string()];
    for &seed in &config.seeds {
        let stream = build_stream(config, base.as_ref(), seed)?;
        let arch = arch_for(config, &stream)?;
        for &cl in &config.cl {
            for &al in &config.al {
                let rc = RunConfig::new(
                    arch.clone(),
                    config.hyper.apply(cl),
                    al,
                    LabellingMode::Sequential,
                );
                let accs = match kind {
                    CeilingKind::Indiv => engine::run_ceiling_indiv(&stream, &rc, seed)?,
                    CeilingKind::Mtl => engine::run_ceiling_mtl(&stream, &rc, seed)?,
                };
                for (t, &a) in accs.iter().enumerate() {
                    lines.push(format!(
                        "{},{},{},{},{},{},{}",
                        config.dataset,
                        match kind {
                            CeilingKind::Indiv => "indiv",
                            CeilingKind::Mtl => "mtl",
                        },
                        al.name(),
                        cl,
                        seed,
                        t,
                        report::fmt_sig6(a * 100.0)
                    ));
                }
            }
        }
    }
    std::fs::write(out, lines.join("\n") + "\n")?;
    Ok(())
}

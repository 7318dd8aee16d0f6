//! Run persistence and plot-ready exports.
//!
//! One JSON document per run (stable field order) plus flat CSV tables.
//! All outputs are byte-deterministic for a given set of runs: rows are
//! sorted on canonical keys and floats printed to six significant
//! digits.

use crate::config::RunMode;
use crate::engine::RunLog;
use crate::error::{Error, Result};
use crate::metrics;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

/// Identity of one run; the fingerprint is the SHA-256 of its canonical
/// JSON form, so it is stable across machines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDescriptor {
    pub dataset: String,
    pub scenario: crate::streams::Scenario,
    pub mode: RunMode,
    pub cl: crate::cl::Strategy,
    /// Absent for the supervised (full-data) baseline.
    pub al: Option<crate::al::AlStrategy>,
    pub seed: u64,
    pub task_order: Vec<usize>,
    pub budget_fraction: f64,
    pub query_fraction: f64,
}

impl RunDescriptor {
    pub fn al_name(&self) -> &'static str {
        self.al.map_or("none", |a| a.name())
    }

    /// Grouping key for per-method aggregation.
    pub fn method_key(&self) -> String {
        format!(
            "{}/{}/{}/{}/{}",
            self.dataset,
            self.scenario,
            self.mode,
            self.al_name(),
            self.cl
        )
    }
}

/// The on-disk form of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedRun {
    pub fingerprint: String,
    pub descriptor: RunDescriptor,
    pub log: RunLog,
}

/// SHA-256 fingerprint (first 16 hex chars) of the canonical descriptor.
pub fn fingerprint(descriptor: &RunDescriptor) -> String {
    let canonical = serde_json::to_vec(descriptor).expect("descriptor serializes");
    let digest = Sha256::digest(&canonical);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    hex[..16].to_string()
}

/// Writes one run as `run_<fingerprint>.json`.
pub fn write_run(dir: &Path, descriptor: RunDescriptor, log: RunLog) -> Result<PersistedRun> {
    std::fs::create_dir_all(dir)?;
    let fp = fingerprint(&descriptor);
    let run = PersistedRun {
        fingerprint: fp.clone(),
        descriptor,
        log,
    };
    let path = dir.join(format!("run_{fp}.json"));
    std::fs::write(&path, serde_json::to_vec_pretty(&run)?)?;
    Ok(run)
}

/// Loads every `run_*.json` under `dir`, sorted by fingerprint.
pub fn read_runs(dir: &Path) -> Result<Vec<PersistedRun>> {
    let mut runs = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("run_") && name.ends_with(".json") {
            let text = std::fs::read_to_string(&path)?;
            runs.push(serde_json::from_str::<PersistedRun>(&text)?);
        }
    }
    runs.sort_by(|a, b| a.fingerprint.cmp(&b.fingerprint));
    Ok(runs)
}

/// Formats to six significant digits with a deterministic shortest
/// decimal rendering.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(5 - mag);
    let rounded = (x * factor).round() / factor;
    format!("{rounded}")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1); zero for a single observation.
fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn order_tag(order: &[usize]) -> String {
    order
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

/// Per-run summary row plus per-method mean/std rows, sorted by
/// fingerprint and method. Accuracies are reported in percent.
pub fn write_summary_csv(runs: &[PersistedRun], out: &Path) -> Result<()> {
    let mut lines = vec![
        "fingerprint,dataset,scenario,mode,al,cl,seed,task_order,avg_acc,forgetting_rate,lca"
            .to_string(),
    ];
    let mut sorted: Vec<&PersistedRun> = runs.iter().collect();
    sorted.sort_by(|a, b| a.fingerprint.cmp(&b.fingerprint));
    let mut by_method: BTreeMap<String, Vec<(f64, Option<f64>, Option<f64>)>> = BTreeMap::new();
    for run in &sorted {
        let d = &run.descriptor;
        let avg = run.log.avg_accuracy()? * 100.0;
        let fr = run.log.forgetting_rate().ok().map(|v| v * 100.0);
        let lca = run.log.mean_lca().ok().map(|v| v * 100.0);
        lines.push(format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            run.fingerprint,
            d.dataset,
            d.scenario,
            d.mode,
            d.al_name(),
            d.cl,
            d.seed,
            order_tag(&d.task_order),
            fmt_sig6(avg),
            fr.map(fmt_sig6).unwrap_or_default(),
            lca.map(fmt_sig6).unwrap_or_default(),
        ));
        by_method
            .entry(d.method_key())
            .or_default()
            .push((avg, fr, lca));
    }
    for (method, rows) in by_method {
        let parts: Vec<&str> = method.split('/').collect();
        let avgs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let frs: Vec<f64> = rows.iter().filter_map(|r| r.1).collect();
        let lcas: Vec<f64> = rows.iter().filter_map(|r| r.2).collect();
        for (tag, reduce) in [("mean", true), ("std", false)] {
            let f = |xs: &[f64]| {
                if xs.is_empty() {
                    String::new()
                } else if reduce {
                    fmt_sig6(mean(xs))
                } else {
                    fmt_sig6(sample_std(xs))
                }
            };
            lines.push(format!(
                ",{},{},{},{},{},{tag},,{},{},{}",
                parts[0],
                parts[1],
                parts[2],
                parts[3],
                parts[4],
                f(&avgs),
                f(&frs),
                f(&lcas),
            ));
        }
    }
    std::fs::write(out, lines.join("\n") + "\n")?;
    Ok(())
}

/// Forgetting-learning profile export: one data row per ACL run
/// (columns: method, mode, al, cl, lca, fr, seed, task_order) plus one
/// mean row per method. Errors when no run carries round curves.
pub fn emit_profile(runs: &[PersistedRun], out: &Path) -> Result<()> {
    let mut lines = vec!["method,mode,al,cl,lca,fr,seed,task_order".to_string()];
    let mut by_method: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut rows = Vec::new();
    for run in runs {
        let d = &run.descriptor;
        let Ok(lca) = run.log.mean_lca() else {
            continue; // supervised baseline: no rounds
        };
        let fr = run.log.forgetting_rate()?;
        let method = format!("{}-{}-{}", d.mode, d.al_name(), d.cl);
        rows.push((
            method.clone(),
            d.mode.to_string(),
            d.al_name().to_string(),
            d.cl.to_string(),
            lca,
            fr,
            d.seed.to_string(),
            order_tag(&d.task_order),
        ));
        by_method.entry(method).or_default().push((lca, fr));
    }
    if rows.is_empty() {
        return Err(Error::contract(
            "no LCA available: no run in this set has AL round curves",
        ));
    }
    rows.sort_by(|a, b| {
        (&a.0, &a.6, &a.7)
            .cmp(&(&b.0, &b.6, &b.7))
            .then(a.4.total_cmp(&b.4))
    });
    for r in &rows {
        lines.push(format!(
            "{},{},{},{},{},{},{},{}",
            r.0,
            r.1,
            r.2,
            r.3,
            fmt_sig6(r.4),
            fmt_sig6(r.5),
            r.6,
            r.7
        ));
    }
    for (method, points) in by_method {
        let lcas: Vec<f64> = points.iter().map(|p| p.0).collect();
        let frs: Vec<f64> = points.iter().map(|p| p.1).collect();
        let parts: Vec<&str> = method.splitn(3, '-').collect();
        lines.push(format!(
            "{},{},{},{},{},{},mean,mean",
            method,
            parts[0],
            parts[1],
            parts[2],
            fmt_sig6(mean(&lcas)),
            fmt_sig6(mean(&frs)),
        ));
    }
    std::fs::write(out, lines.join("\n") + "\n")?;
    Ok(())
}

fn baseline_for<'a>(
    baselines: &'a [PersistedRun],
    d: &RunDescriptor,
) -> Option<&'a PersistedRun> {
    baselines.iter().find(|b| {
        b.descriptor.mode == RunMode::FullCl
            && b.descriptor.cl == d.cl
            && b.descriptor.scenario == d.scenario
            && b.descriptor.dataset == d.dataset
            && b.descriptor.seed == d.seed
            && b.descriptor.task_order == d.task_order
    })
}

/// Relative performance of ACL runs against the matching supervised-CL
/// baseline, paired by (cl, scenario, seed, task order). Deltas are in
/// accuracy points; the error column is the standard deviation of the
/// paired mean difference.
pub fn emit_relative(
    runs: &[PersistedRun],
    baselines: &[PersistedRun],
    out: &Path,
) -> Result<()> {
    let mut by_method: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for run in runs {
        let d = &run.descriptor;
        if d.mode == RunMode::FullCl {
            continue;
        }
        let base = baseline_for(baselines, d).ok_or_else(|| {
            Error::contract(format!(
                "missing full_cl baseline for (cl {}, scenario {}, seed {}, order {})",
                d.cl,
                d.scenario,
                d.seed,
                order_tag(&d.task_order)
            ))
        })?;
        let delta = (run.log.avg_accuracy()? - base.log.avg_accuracy()?) * 100.0;
        by_method.entry(d.method_key()).or_default().push(delta);
    }
    let mut lines =
        vec!["dataset,scenario,mode,al,cl,n,delta_mean,delta_std_of_mean".to_string()];
    for (method, deltas) in by_method {
        let parts: Vec<&str> = method.split('/').collect();
        let std_of_mean = sample_std(&deltas) / (deltas.len() as f64).sqrt();
        lines.push(format!(
            "{},{},{},{},{},{},{},{}",
            parts[0],
            parts[1],
            parts[2],
            parts[3],
            parts[4],
            deltas.len(),
            fmt_sig6(mean(&deltas)),
            fmt_sig6(std_of_mean),
        ));
    }
    std::fs::write(out, lines.join("\n") + "\n")?;
    Ok(())
}

/// Normalized forgetting ratios at the requested budget checkpoints.
/// Rows with no snapshot are flagged `missing`; rows whose baseline
/// forgetting is zero are flagged `zero_baseline` and carry no ratio.
pub fn emit_nfr(
    runs: &[PersistedRun],
    baselines: &[PersistedRun],
    budgets: &[u8],
    out: &Path,
) -> Result<()> {
    let mut lines = vec!["dataset,scenario,mode,al,cl,budget_pct,n,mean_ratio,flag".to_string()];
    let mut groups: BTreeMap<(String, u8), (Vec<f64>, bool, bool)> = BTreeMap::new();
    for run in runs {
        let d = &run.descriptor;
        if d.mode == RunMode::FullCl {
            continue;
        }
        let base = baseline_for(baselines, d).ok_or_else(|| {
            Error::contract(format!(
                "missing full_cl baseline for (cl {}, scenario {}, seed {}, order {})",
                d.cl,
                d.scenario,
                d.seed,
                order_tag(&d.task_order)
            ))
        })?;
        let fr_cl = base.log.forgetting_rate()?;
        for &pct in budgets {
            let entry = groups.entry((d.method_key(), pct)).or_default();
            let Some(snap) = run.log.milestones.iter().find(|m| m.pct == pct) else {
                entry.1 = true; // missing snapshot
                continue;
            };
            let fr_acl = metrics::forgetting_rate(&snap.rows)?;
            if fr_cl == 0.0 {
                entry.2 = true; // zero baseline
                continue;
            }
            entry.0.push(metrics::normalized_fr(fr_acl, fr_cl)?);
        }
    }
    for ((method, pct), (ratios, missing, zero_base)) in groups {
        let parts: Vec<&str> = method.split('/').collect();
        let (value, flag) = if !ratios.is_empty() {
            (fmt_sig6(mean(&ratios)), "ok")
        } else if zero_base {
            (String::new(), "zero_baseline")
        } else if missing {
            (String::new(), "missing")
        } else {
            (String::new(), "missing")
        };
        lines.push(format!(
            "{},{},{},{},{},{},{},{},{}",
            parts[0],
            parts[1],
            parts[2],
            parts[3],
            parts[4],
            pct,
            ratios.len(),
            value,
            flag,
        ));
    }
    std::fs::write(out, lines.join("\n") + "\n")?;
    Ok(())
}

/// Jaccard overlap between sequential and independent query sets, per
/// task, paired by (dataset, cl, al, seed, task order): the union of a
/// task's per-round queries under one mode against the other.
pub fn emit_jaccard(runs: &[PersistedRun], out: &Path) -> Result<()> {
    let mut lines = vec!["dataset,al,cl,seed,task_order,task,jaccard".to_string()];
    let mut rows = Vec::new();
    for run in runs {
        let d = &run.descriptor;
        if d.mode != RunMode::Sequential {
            continue;
        }
        let partner = runs.iter().find(|r| {
            let rd = &r.descriptor;
            rd.mode == RunMode::Independent
                && rd.dataset == d.dataset
                && rd.cl == d.cl
                && rd.al == d.al
                && rd.seed == d.seed
                && rd.task_order == d.task_order
        });
        let Some(partner) = partner else {
            continue;
        };
        for t in 0..run.log.query_history.len() {
            let a: Vec<usize> = run.log.query_history[t].iter().flatten().copied().collect();
            let b: Vec<usize> = partner.log.query_history[t]
                .iter()
                .flatten()
                .copied()
                .collect();
            rows.push((
                d.dataset.clone(),
                d.al_name().to_string(),
                d.cl.to_string(),
                d.seed,
                order_tag(&d.task_order),
                t,
                metrics::jaccard(&a, &b),
            ));
        }
    }
    if rows.is_empty() {
        return Err(Error::contract(
            "no sequential/independent run pairs with query history found",
        ));
    }
    rows.sort_by(|a, b| {
        (&a.0, &a.1, &a.2, a.3, &a.4, a.5).cmp(&(&b.0, &b.1, &b.2, b.3, &b.4, b.5))
    });
    for r in &rows {
        lines.push(format!(
            "{},{},{},{},{},{},{}",
            r.0,
            r.1,
            r.2,
            r.3,
            r.4,
            r.5,
            fmt_sig6(r.6)
        ));
    }
    std::fs::write(out, lines.join("\n") + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{MilestoneSnapshot, RoundPoint};

    fn descriptor(mode: RunMode, seed: u64) -> RunDescriptor {
        RunDescriptor {
            dataset: "synthetic".to_string(),
            scenario: crate::streams::Scenario::ClassIl,
            mode,
            cl: crate::cl::Strategy::Er,
            al: match mode {
                RunMode::FullCl => None,
                _ => Some(crate::al::AlStrategy::Random),
            },
            seed,
            task_order: vec![0, 1],
            budget_fraction: 0.5,
            query_fraction: 0.1,
        }
    }

    fn fake_log(shift: f64, with_rounds: bool) -> RunLog {
        RunLog {
            accuracy_matrix: vec![vec![0.9 - shift], vec![0.5 - shift, 0.8 - shift]],
            round_curves: if with_rounds {
                vec![
                    vec![
                        RoundPoint {
                            current: 0.2,
                            seen_mean: 0.2,
                        },
                        RoundPoint {
                            current: 0.8,
                            seen_mean: 0.8,
                        },
                    ],
                    vec![
                        RoundPoint {
                            current: 0.3,
                            seen_mean: 0.4,
                        },
                        RoundPoint {
                            current: 0.9,
                            seen_mean: 0.7,
                        },
                    ],
                ]
            } else {
                vec![Vec::new(), Vec::new()]
            },
            query_history: vec![vec![vec![1, 2]], vec![vec![3]]],
            milestones: vec![MilestoneSnapshot {
                pct: 2,
                rows: vec![vec![0.8 - shift], vec![0.4 - shift, 0.7 - shift]],
            }],
            budget_spent: vec![2, 1],
        }
    }

    #[test]
    fn fingerprint_is_stable_and_identity_sensitive() {
        let a = fingerprint(&descriptor(RunMode::Sequential, 1));
        let b = fingerprint(&descriptor(RunMode::Sequential, 1));
        let c = fingerprint(&descriptor(RunMode::Sequential, 2));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn runs_round_trip_to_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let run = write_run(
            dir.path(),
            descriptor(RunMode::Sequential, 3),
            fake_log(0.0, true),
        )
        .unwrap();
        let path = dir.path().join(format!("run_{}.json", run.fingerprint));
        let first = std::fs::read(&path).unwrap();
        let loaded = read_runs(dir.path()).unwrap();
        assert_eq!(loaded.len(), 1);
        std::fs::remove_file(&path).unwrap();
        write_run(dir.path(), loaded[0].descriptor.clone(), loaded[0].log.clone()).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn fmt_sig6_rounds_to_six_significant_digits() {
        assert_eq!(fmt_sig6(0.0), "0");
        assert_eq!(fmt_sig6(87.81123456), "87.8112");
        assert_eq!(fmt_sig6(0.123456789), "0.123457");
        assert_eq!(fmt_sig6(-1234567.0), "-1234570");
    }

    #[test]
    fn profile_has_fixed_schema_and_mean_rows() {
        let dir = tempfile::tempdir().unwrap();
        let runs = vec![
            PersistedRun {
                fingerprint: "a".into(),
                descriptor: descriptor(RunMode::Sequential, 1),
                log: fake_log(0.0, true),
            },
            PersistedRun {
                fingerprint: "b".into(),
                descriptor: descriptor(RunMode::Sequential, 2),
                log: fake_log(0.1, true),
            },
        ];
        let out = dir.path().join("profile.csv");
        emit_profile(&runs, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.trim_end().split('\n').collect();
        assert_eq!(lines[0].split(',').count(), 8);
        // 2 data rows + 1 mean row
        assert_eq!(lines.len(), 4);
        assert!(lines[3].ends_with("mean,mean"));
        // mean of the two runs' LCA: both (0.5 + 0.6)/2 = 0.55
        assert!(lines[3].contains("0.55"));
    }

    #[test]
    fn profile_without_rounds_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let runs = vec![PersistedRun {
            fingerprint: "a".into(),
            descriptor: descriptor(RunMode::FullCl, 1),
            log: fake_log(0.0, false),
        }];
        let err = emit_profile(&runs, &dir.path().join("p.csv")).unwrap_err();
        assert!(err.to_string().contains("no LCA"));
    }

    #[test]
    fn relative_is_zero_against_itself_and_errors_without_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let acl = PersistedRun {
            fingerprint: "a".into(),
            descriptor: descriptor(RunMode::Sequential, 1),
            log: fake_log(0.0, true),
        };
        let base = PersistedRun {
            fingerprint: "b".into(),
            descriptor: descriptor(RunMode::FullCl, 1),
            log: fake_log(0.0, false),
        };
        let out = dir.path().join("rel.csv");
        emit_relative(&[acl.clone()], &[base], &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let data = text.trim_end().split('\n').nth(1).unwrap();
        let cols: Vec<&str> = data.split(',').collect();
        assert_eq!(cols[6], "0");

        let err = emit_relative(&[acl], &[], &out).unwrap_err();
        assert!(err.to_string().contains("missing full_cl baseline"));
    }

    #[test]
    fn nfr_identity_and_flags() {
        let dir = tempfile::tempdir().unwrap();
        let acl = PersistedRun {
            fingerprint: "a".into(),
            descriptor: descriptor(RunMode::Sequential, 1),
            log: fake_log(0.0, true),
        };
        let base = PersistedRun {
            fingerprint: "b".into(),
            descriptor: descriptor(RunMode::FullCl, 1),
            log: fake_log(0.0, false),
        };
        let out = dir.path().join("nfr.csv");
        emit_nfr(&[acl], &[base], &[2, 4], &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.trim_end().split('\n').collect();
        assert_eq!(lines.len(), 3);
        // milestone 2 exists: matrix matches the final one in FR terms
        assert!(lines[1].ends_with("ok"), "{}", lines[1]);
        assert!(lines[2].ends_with("missing"), "{}", lines[2]);
    }

    #[test]
    fn jaccard_pairs_modes() {
        let dir = tempfile::tempdir().unwrap();
        let seq = PersistedRun {
            fingerprint: "a".into(),
            descriptor: descriptor(RunMode::Sequential, 1),
            log: fake_log(0.0, true),
        };
        let ind = PersistedRun {
            fingerprint: "b".into(),
            descriptor: descriptor(RunMode::Independent, 1),
            log: fake_log(0.0, true),
        };
        let out = dir.path().join("jac.csv");
        emit_jaccard(&[seq, ind], &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.trim_end().split('\n').collect();
        assert_eq!(lines.len(), 3); // header + 2 tasks
        // identical logs: overlap 1 for both tasks
        assert!(lines[1].ends_with(",1"));
        assert!(lines[2].ends_with(",1"));
    }
}

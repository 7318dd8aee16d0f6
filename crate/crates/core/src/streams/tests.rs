use super::*;
use crate::linalg::Matrix32;
use std::io::Write;

fn fake_set(rows: usize, dim: usize, labels: Vec<usize>) -> LabelledSet {
    let mut m = Matrix32::zeros(rows, dim);
    for i in 0..rows {
        for j in 0..dim {
            m.row_mut(i)[j] = (i * dim + j) as f32 / (rows * dim) as f32;
        }
    }
    LabelledSet::new(m, labels).unwrap()
}

mod idx_format {
    use super::*;

    fn write_images(path: &std::path::Path, images: &[[u8; 4]]) {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&0x0000_0803u32.to_be_bytes());
        bytes.extend_from_slice(&(images.len() as u32).to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        for img in images {
            bytes.extend_from_slice(img);
        }
        std::fs::write(path, bytes).unwrap();
    }

    fn write_labels(path: &std::path::Path, labels: &[u8]) {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&0x0000_0801u32.to_be_bytes());
        bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        bytes.extend_from_slice(labels);
        std::fs::write(path, bytes).unwrap();
    }

    #[test]
    fn parses_and_scales_a_small_pair() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs");
        let lab = dir.path().join("labs");
        write_images(&img, &[[0, 128, 255, 64], [255, 255, 0, 0]]);
        write_labels(&lab, &[3, 7]);
        let set = load_idx(&img, &lab).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.dim(), 4);
        assert_eq!(set.labels(), &[3, 7]);
        assert_eq!(set.inputs().row(0)[2], 1.0);
        assert_eq!(set.inputs().row(1)[3], 0.0);
        assert!((set.inputs().row(0)[1] - 128.0 / 255.0).abs() < 1e-7);
    }

    #[test]
    fn gzip_transparent_decompression() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs");
        let lab = dir.path().join("labs");
        write_images(&img, &[[1, 2, 3, 4]]);
        write_labels(&lab, &[9]);
        for name in ["imgs", "labs"] {
            let raw = std::fs::read(dir.path().join(name)).unwrap();
            let gz = std::fs::File::create(dir.path().join(format!("{name}.gz"))).unwrap();
            let mut enc = flate2::write::GzEncoder::new(gz, flate2::Compression::default());
            enc.write_all(&raw).unwrap();
            enc.finish().unwrap();
        }
        let set = load_idx(dir.path().join("imgs.gz"), dir.path().join("labs.gz")).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.labels(), &[9]);
    }

    #[test]
    fn bad_magic_is_a_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs");
        let lab = dir.path().join("labs");
        write_labels(&img, &[1]); // label magic where image magic expected
        write_labels(&lab, &[1]);
        match load_idx(&img, &lab) {
            Err(crate::Error::IdxBadMagic { expected, found }) => {
                assert_eq!(expected, 0x0000_0803);
                assert_eq!(found, 0x0000_0801);
            }
            other => panic!("expected bad magic, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_a_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs");
        let lab = dir.path().join("labs");
        write_images(&img, &[[1, 2, 3, 4]]);
        write_labels(&lab, &[1]);
        // chop the image payload mid-way
        let mut bytes = std::fs::read(&img).unwrap();
        bytes.truncate(bytes.len() - 2);
        std::fs::write(&img, bytes).unwrap();
        assert!(matches!(
            load_idx(&img, &lab),
            Err(crate::Error::IdxTruncated(_))
        ));
    }

    #[test]
    fn count_mismatch_is_a_distinct_error() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("imgs");
        let lab = dir.path().join("labs");
        write_images(&img, &[[1, 2, 3, 4], [5, 6, 7, 8]]);
        write_labels(&lab, &[1]);
        assert!(matches!(
            load_idx(&img, &lab),
            Err(crate::Error::IdxCountMismatch {
                images: 2,
                labels: 1
            })
        ));
    }
}

mod permuted {
    use super::*;

    fn base() -> (LabelledSet, LabelledSet) {
        let train = fake_set(40, 6, (0..40).map(|i| i % 3).collect());
        let test = fake_set(12, 6, (0..12).map(|i| i % 3).collect());
        (train, test)
    }

    #[test]
    fn same_seed_same_stream() {
        let (train, test) = base();
        let a = make_permuted_stream(&train, &test, 3, 0.1, 0.5, 0.1, 7).unwrap();
        let b = make_permuted_stream(&train, &test, 3, 0.1, 0.5, 0.1, 7).unwrap();
        for t in 0..3 {
            assert_eq!(
                a.tasks()[t].test().inputs().row(0),
                b.tasks()[t].test().inputs().row(0)
            );
        }
    }

    #[test]
    fn task0_is_identity_and_later_tasks_are_bijections() {
        let (train, test) = base();
        let s = make_permuted_stream(&train, &test, 3, 0.0, 0.5, 0.1, 3).unwrap();
        assert_eq!(s.tasks()[0].test().inputs().row(0), test.inputs().row(0));
        for t in 1..3 {
            let mut orig: Vec<f32> = test.inputs().row(5).to_vec();
            let mut perm: Vec<f32> = s.tasks()[t].test().inputs().row(5).to_vec();
            orig.sort_by(f32::total_cmp);
            perm.sort_by(f32::total_cmp);
            assert_eq!(orig, perm, "pixel multiset must be preserved");
        }
    }

    #[test]
    fn labels_are_untouched() {
        let (train, test) = base();
        let s = make_permuted_stream(&train, &test, 2, 0.0, 0.5, 0.1, 3).unwrap();
        for t in s.tasks() {
            assert_eq!(t.test().labels(), test.labels());
            // oracle labels are hidden; annotate everything to count them
            let mut probe = t.clone();
            probe.annotate_all_free();
            let (_, labels) = probe.labelled_examples();
            let mut pool_hist = [0usize; 3];
            for &y in &labels {
                pool_hist[y] += 1;
            }
            let mut base_hist = [0usize; 3];
            for &y in train.labels() {
                base_hist[y] += 1;
            }
            assert_eq!(pool_hist, base_hist);
        }
    }

    #[test]
    fn budgets_follow_floor_rule() {
        let (train, test) = base();
        let s = make_permuted_stream(&train, &test, 2, 0.1, 0.5, 0.13, 3).unwrap();
        // 40 train, 4 val carved, pool 36: budget floor(18), query floor(4.68)=4
        for t in s.tasks() {
            assert_eq!(t.pool_len(), 36);
            assert_eq!(t.budget(), 18);
            assert_eq!(t.query_size(), 4);
            assert!(t.labelled_len() == 0, "cold start");
        }
    }
}

mod split {
    use super::*;

    fn base10() -> (LabelledSet, LabelledSet) {
        let train = fake_set(100, 4, (0..100).map(|i| i % 10).collect());
        let test = fake_set(50, 4, (0..50).map(|i| i % 10).collect());
        (train, test)
    }

    #[test]
    fn ten_classes_two_per_task_gives_five_tasks() {
        let (train, test) = base10();
        let order: Vec<usize> = (0..10).collect();
        let s = make_split_stream(
            &train,
            &test,
            2,
            &order,
            Scenario::ClassIl,
            0.0,
            0.5,
            0.1,
            1,
        )
        .unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.tasks()[0].class_subset(), &[0, 1]);
        assert_eq!(s.tasks()[4].class_subset(), &[8, 9]);
    }

    #[test]
    fn test_sets_partition_the_base_test_set() {
        let (train, test) = base10();
        let order: Vec<usize> = (0..10).collect();
        let s = make_split_stream(
            &train,
            &test,
            2,
            &order,
            Scenario::TaskIl,
            0.0,
            0.5,
            0.1,
            1,
        )
        .unwrap();
        let total: usize = s.tasks().iter().map(|t| t.test().len()).sum();
        assert_eq!(total, test.len());
        let mut seen_labels: Vec<usize> = Vec::new();
        for t in s.tasks() {
            for &y in t.test().labels() {
                assert!(t.class_subset().contains(&y));
                seen_labels.push(y);
            }
        }
        seen_labels.sort_unstable();
        let mut base_labels = test.labels().to_vec();
        base_labels.sort_unstable();
        assert_eq!(seen_labels, base_labels);
    }

    #[test]
    fn reversed_class_order_flips_task_subsets() {
        let (train, test) = base10();
        let fwd: Vec<usize> = (0..10).collect();
        let rev: Vec<usize> = (0..10).rev().collect();
        let a = make_split_stream(&train, &test, 2, &fwd, Scenario::ClassIl, 0.0, 0.5, 0.1, 1)
            .unwrap();
        let b = make_split_stream(&train, &test, 2, &rev, Scenario::ClassIl, 0.0, 0.5, 0.1, 1)
            .unwrap();
        assert_eq!(b.tasks()[0].class_subset(), a.tasks()[4].class_subset());
    }

    #[test]
    fn non_divisible_class_count_is_rejected() {
        let (train, test) = base10();
        let order: Vec<usize> = (0..10).collect();
        assert!(make_split_stream(
            &train,
            &test,
            3,
            &order,
            Scenario::ClassIl,
            0.0,
            0.5,
            0.1,
            1
        )
        .is_err());
    }
}

mod synthetic {
    use super::*;
    use crate::nn::{init_model, Architecture, OptimizerHyper};

    #[test]
    fn seeded_twice_identical() {
        let spec = SyntheticSpec::default();
        let a = make_synthetic_stream(&spec, Scenario::ClassIl, 11).unwrap();
        let b = make_synthetic_stream(&spec, Scenario::ClassIl, 11).unwrap();
        for (ta, tb) in a.tasks().iter().zip(b.tasks()) {
            assert_eq!(ta.test().inputs().row(0), tb.test().inputs().row(0));
        }
    }

    #[test]
    fn domain_il_shares_the_class_subset() {
        let spec = SyntheticSpec::default();
        let s = make_synthetic_stream(&spec, Scenario::DomainIl, 5).unwrap();
        for t in s.tasks() {
            assert_eq!(t.class_subset(), s.tasks()[0].class_subset());
        }
        assert_eq!(s.num_classes_total(), spec.classes_per_task);
    }

    #[test]
    fn well_separated_blobs_are_learnable_per_task() {
        let spec = SyntheticSpec {
            tasks: 2,
            classes_per_task: 2,
            dim: 6,
            samples_per_class: 40,
            test_per_class: 30,
            cluster_separation: 100.0,
            ..SyntheticSpec::default()
        };
        let s = make_synthetic_stream(&spec, Scenario::ClassIl, 42).unwrap();
        let arch = Architecture::new(6, vec![8], 4).unwrap();
        for task in s.tasks() {
            let mut probe = task.clone();
            probe.annotate_all_free();
            let (inputs, labels) = probe.labelled_examples();
            let mut model = init_model(&arch, 9);
            for _ in 0..60 {
                let (_, g) = model.loss_and_grad(&inputs, &labels, None).unwrap();
                model = model.optimizer_step(&g, &OptimizerHyper::sgd(0.05)).unwrap();
            }
            let trace = model.forward(&probe.test().inputs_f64(), None).unwrap();
            let mut correct = 0;
            for (i, &y) in probe.test().labels().iter().enumerate() {
                let row = trace.probs.row(i);
                let pred = (0..4).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
                if pred == y {
                    correct += 1;
                }
            }
            let acc = correct as f64 / probe.test().len() as f64;
            assert!(acc >= 0.99, "task {} accuracy {acc}", task.task_id());
        }
    }
}

mod reorder {
    use super::*;

    fn stream() -> TaskStream {
        make_synthetic_stream(&SyntheticSpec::default(), Scenario::ClassIl, 3).unwrap()
    }

    #[test]
    fn identity_keeps_everything() {
        let s = stream();
        let r = reorder_tasks(&s, &[0, 1, 2]).unwrap();
        for (a, b) in s.tasks().iter().zip(r.tasks()) {
            assert_eq!(a.task_id(), b.task_id());
            assert_eq!(a.class_subset(), b.class_subset());
        }
    }

    #[test]
    fn order_then_inverse_restores() {
        let s = stream();
        let order = [2, 0, 1];
        let inverse = [1, 2, 0];
        let r = reorder_tasks(&reorder_tasks(&s, &order).unwrap(), &inverse).unwrap();
        for (a, b) in s.tasks().iter().zip(r.tasks()) {
            assert_eq!(a.class_subset(), b.class_subset());
            assert_eq!(a.test().labels(), b.test().labels());
        }
    }

    #[test]
    fn test_set_sizes_invariant_as_multiset() {
        let s = stream();
        let mut before: Vec<usize> = s.tasks().iter().map(|t| t.test().len()).collect();
        let r = reorder_tasks(&s, &[1, 2, 0]).unwrap();
        let mut after: Vec<usize> = r.tasks().iter().map(|t| t.test().len()).collect();
        before.sort_unstable();
        after.sort_unstable();
        assert_eq!(before, after);
    }

    #[test]
    fn invalid_permutation_is_rejected() {
        let s = stream();
        assert!(reorder_tasks(&s, &[0, 0, 1]).is_err());
        assert!(reorder_tasks(&s, &[0, 1]).is_err());
    }
}

mod annotation {
    use super::*;

    fn task() -> Task {
        let s = make_synthetic_stream(&SyntheticSpec::default(), Scenario::ClassIl, 3).unwrap();
        s.tasks()[0].clone()
    }

    #[test]
    fn annotate_moves_items_and_charges_budget() {
        let mut t = task();
        let pool0 = t.pool_len();
        let labelled0 = t.labelled_len();
        let b = t.query_size();
        let ids = t.annotate(&(0..b).collect::<Vec<_>>()).unwrap();
        assert_eq!(ids.len(), b);
        assert_eq!(t.pool_len(), pool0 - b);
        assert_eq!(t.labelled_len(), labelled0 + b);
        assert_eq!(t.spent(), b);
    }

    #[test]
    fn duplicate_position_rejected_without_mutation() {
        let mut t = task();
        let before = t.pool_len();
        assert!(t.annotate(&[1, 1]).is_err());
        assert_eq!(t.pool_len(), before);
        assert_eq!(t.spent(), 0);
    }

    #[test]
    fn budget_overrun_rejected() {
        let mut t = task();
        let remaining = t.remaining_budget();
        assert!(t.annotate(&(0..remaining + 1).collect::<Vec<_>>()).is_err());
        assert_eq!(t.spent(), 0);
    }

    #[test]
    fn labelled_and_pool_always_partition_the_items() {
        let mut t = task();
        let n = t.pool_len();
        let mut spent = 0;
        while t.remaining_budget() > 0 {
            let k = t.query_size().min(t.remaining_budget());
            t.annotate(&(0..k).collect::<Vec<_>>()).unwrap();
            spent += k;
            let mut all: Vec<usize> = t.labelled_ids().to_vec();
            all.extend_from_slice(t.pool_ids());
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            assert_eq!(t.spent(), spent);
        }
        assert_eq!(t.spent(), t.budget());
    }
}

use super::*;
use crate::linalg::Matrix;
use rand::Rng;

fn arch(input: usize, hidden: &[usize], classes: usize) -> Architecture {
    Architecture::new(input, hidden.to_vec(), classes).unwrap()
}

fn random_inputs(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = crate::seeds::rng(seed, &[1000]);
    Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Central finite differences over every parameter; the independent
/// oracle for the analytic gradient.
fn fd_gradient(
    model: &ModelState,
    inputs: &Matrix,
    labels: &[usize],
    mask: Option<&[bool]>,
    eps: f64,
) -> Vec<f64> {
    let mut probe = model.clone();
    let n = probe.params().len();
    let mut g = vec![0.0; n];
    for i in 0..n {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + eps;
        let (lp, _) = probe.loss_and_grad(inputs, labels, mask).unwrap();
        probe.params_mut()[i] = orig - eps;
        let (lm, _) = probe.loss_and_grad(inputs, labels, mask).unwrap();
        probe.params_mut()[i] = orig;
        g[i] = (lp - lm) / (2.0 * eps);
    }
    g
}

#[test]
fn init_is_deterministic() {
    let a = arch(4, &[3], 2);
    let m1 = init_model(&a, 42);
    let m2 = init_model(&a, 42);
    assert_eq!(m1.params(), m2.params());
    let m3 = init_model(&a, 43);
    assert_ne!(m1.params(), m3.params());
}

#[test]
fn param_count_2_3_2_is_17() {
    let a = arch(2, &[3], 2);
    assert_eq!(a.param_count(), 17); // 2*3+3 + 3*2+2
    assert_eq!(init_model(&a, 7).params().len(), 17);
}

#[test]
fn fresh_biases_are_zero() {
    let a = arch(5, &[4, 3], 3);
    let m = init_model(&a, 1);
    // bias blocks: after each weight block
    let mut pos = 0;
    for (fan_in, fan_out) in a.layer_shapes() {
        pos += fan_in * fan_out;
        for i in 0..fan_out {
            assert_eq!(m.params()[pos + i], 0.0);
        }
        pos += fan_out;
    }
}

#[test]
fn zero_weights_give_uniform_probs() {
    let a = arch(3, &[2], 4);
    let mut m = init_model(&a, 0);
    m.params_mut().fill(0.0);
    let trace = m.forward(&random_inputs(5, 3, 2), None).unwrap();
    for i in 0..5 {
        for &p in trace.probs.row(i) {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }
}

#[test]
fn single_class_mask_forces_one_hot() {
    let a = arch(3, &[4], 5);
    let m = init_model(&a, 9);
    let mut mask = vec![false; 5];
    mask[3] = true;
    let trace = m.forward(&random_inputs(4, 3, 3), Some(&mask)).unwrap();
    for i in 0..4 {
        let row = trace.probs.row(i);
        for (c, &p) in row.iter().enumerate() {
            assert_eq!(p, if c == 3 { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn prob_rows_sum_to_one() {
    let a = arch(6, &[5], 4);
    let m = init_model(&a, 11);
    let trace = m.forward(&random_inputs(8, 6, 4), None).unwrap();
    for i in 0..8 {
        let s: f64 = trace.probs.row(i).iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
        assert!(trace.probs.row(i).iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}

#[test]
fn masked_probs_are_exactly_zero() {
    let a = arch(4, &[3], 6);
    let m = init_model(&a, 13);
    let mask = [true, false, true, false, true, false];
    let trace = m.forward(&random_inputs(6, 4, 5), Some(&mask)).unwrap();
    for i in 0..6 {
        let row = trace.probs.row(i);
        assert_eq!(row[1], 0.0);
        assert_eq!(row[3], 0.0);
        assert_eq!(row[5], 0.0);
        let s: f64 = row.iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}

#[test]
fn dimension_mismatch_is_rejected() {
    let a = arch(4, &[3], 2);
    let m = init_model(&a, 1);
    assert!(m.forward(&random_inputs(2, 5, 1), None).is_err());
    assert!(m.forward(&random_inputs(2, 4, 1), Some(&[true])).is_err());
}

#[test]
fn zero_weight_two_class_loss_is_ln2() {
    let a = arch(3, &[2], 2);
    let mut m = init_model(&a, 0);
    m.params_mut().fill(0.0);
    let inputs = random_inputs(4, 3, 6);
    let (loss, _) = m.loss_and_grad(&inputs, &[0, 1, 1, 0], None).unwrap();
    assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn masked_label_is_rejected() {
    let a = arch(3, &[2], 3);
    let m = init_model(&a, 2);
    let mask = [true, false, true];
    let err = m
        .loss_and_grad(&random_inputs(1, 3, 7), &[1], Some(&mask))
        .unwrap_err();
    assert!(matches!(err, crate::error::Error::Contract(_)));
}

#[test]
fn gradient_matches_finite_differences_on_small_model() {
    let a = arch(2, &[4], 3);
    let m = init_model(&a, 21);
    let inputs = random_inputs(5, 2, 8);
    let labels = [0, 2, 1, 1, 0];
    let (_, grad) = m.loss_and_grad(&inputs, &labels, None).unwrap();
    let fd = fd_gradient(&m, &inputs, &labels, None, 1e-5);
    let max = grad
        .iter()
        .zip(&fd)
        .map(|(&g, &f)| rel_err(g, f))
        .fold(0.0, f64::max);
    assert!(max < 1e-4, "max relative error {max}");
}

#[test]
fn gradient_matches_finite_differences_with_mask() {
    let a = arch(3, &[4], 4);
    let m = init_model(&a, 22);
    let inputs = random_inputs(4, 3, 9);
    let labels = [0, 3, 3, 0];
    let mask = [true, false, false, true];
    let (_, grad) = m.loss_and_grad(&inputs, &labels, Some(&mask)).unwrap();
    let fd = fd_gradient(&m, &inputs, &labels, Some(&mask), 1e-5);
    let max = grad
        .iter()
        .zip(&fd)
        .map(|(&g, &f)| rel_err(g, f))
        .fold(0.0, f64::max);
    assert!(max < 1e-4, "max relative error {max}");
}

#[test]
fn duplicated_batch_preserves_loss_and_grad() {
    let a = arch(3, &[3], 2);
    let m = init_model(&a, 30);
    let inputs = random_inputs(3, 3, 10);
    let labels = [1, 0, 1];
    let (l1, g1) = m.loss_and_grad(&inputs, &labels, None).unwrap();
    let doubled: Vec<Vec<f64>> = (0..6).map(|i| inputs.row(i % 3).to_vec()).collect();
    let doubled = Matrix::from_rows(&doubled).unwrap();
    let (l2, g2) = m
        .loss_and_grad(&doubled, &[1, 0, 1, 1, 0, 1], None)
        .unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    for (x, y) in g1.iter().zip(&g2) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn embedding_is_zero_when_prediction_is_one_hot() {
    let a = arch(2, &[2], 2);
    let mut m = init_model(&a, 0);
    m.params_mut().fill(0.0);
    // output biases at the tail of the flat vector; a huge gap saturates
    // the softmax to an exact one-hot in f64
    let n = m.params().len();
    m.params_mut()[n - 2] = 1000.0;
    m.params_mut()[n - 1] = -1000.0;
    let emb = m.gradient_embedding(&[0.3, -0.4], PseudoLabel::Predicted).unwrap();
    assert!(emb.iter().all(|&v| v == 0.0));
}

#[test]
fn embedding_of_zero_weight_model_is_half_feature_vector() {
    // 2 classes, uniform p = (0.5, 0.5); predicted label 0 (tie, lowest).
    // coeff are (-0.5, +0.5); entries are those times [penultimate; 1].
    let a = arch(2, &[3], 2);
    let mut m = init_model(&a, 0);
    m.params_mut().fill(0.0);
    let emb = m.gradient_embedding(&[0.7, 0.1], PseudoLabel::Predicted).unwrap();
    // zero weights: penultimate is relu(0) = 0 vector, so weight part is 0
    // and biases are (-0.5, 0.5)
    assert_eq!(emb.len(), 2 * (3 + 1));
    assert!(emb[..6].iter().all(|&v| v == 0.0));
    assert_eq!(emb[6], -0.5);
    assert_eq!(emb[7], 0.5);
}

#[test]
fn embedding_matches_full_backprop_on_output_layer() {
    let a = arch(3, &[4], 3);
    let m = init_model(&a, 33);
    let input = [0.2, -0.5, 0.9];
    let label = 2;
    let emb = m
        .gradient_embedding(&input, PseudoLabel::True(label))
        .unwrap();
    let inputs = Matrix::from_vec(1, 3, input.to_vec()).unwrap();
    let (_, grad) = m.loss_and_grad(&inputs, &[label], None).unwrap();
    // output layer block is the tail: 4*3 weights + 3 biases
    let tail = &grad[grad.len() - (4 * 3 + 3)..];
    assert_eq!(emb.len(), tail.len());
    for (e, g) in emb.iter().zip(tail) {
        assert!((e - g).abs() < 1e-10);
    }
}

#[test]
fn sgd_rule_is_exact() {
    let a = arch(1, &[], 2);
    let mut m = init_model(&a, 0);
    m.params_mut().copy_from_slice(&[1.0, 1.0, 1.0, 1.0]);
    let m = m
        .optimizer_step(&[1.0, -2.0, 0.0, 3.0], &OptimizerHyper::sgd(0.1))
        .unwrap();
    assert_eq!(m.params()[0], 0.9);
    assert_eq!(m.params()[1], 1.2);
    assert_eq!(m.params()[2], 1.0);
    assert!((m.params()[3] - 0.7).abs() < 1e-15);
}

#[test]
fn zero_grad_is_a_fixed_point() {
    let a = arch(2, &[3], 2);
    let m = init_model(&a, 5);
    let zeros = vec![0.0; m.params().len()];
    let before = m.params().to_vec();
    let m = m.optimizer_step(&zeros, &OptimizerHyper::sgd(0.5)).unwrap();
    assert_eq!(m.params(), &before[..]);
    let m = m.optimizer_step(&zeros, &OptimizerHyper::adam(0.5)).unwrap();
    assert_eq!(m.params(), &before[..]);
}

#[test]
fn adam_first_step_moves_by_lr() {
    let a = arch(2, &[2], 2);
    let m = init_model(&a, 6);
    let before = m.params().to_vec();
    let ones = vec![1.0; before.len()];
    let m = m.optimizer_step(&ones, &OptimizerHyper::adam(0.01)).unwrap();
    for (p, q) in m.params().iter().zip(&before) {
        assert!((q - p - 0.01).abs() < 1e-9);
    }
}

#[test]
fn non_finite_grad_is_rejected() {
    let a = arch(2, &[2], 2);
    let m = init_model(&a, 6);
    let mut g = vec![0.0; m.params().len()];
    g[0] = f64::NAN;
    assert!(m.optimizer_step(&g, &OptimizerHyper::sgd(0.1)).is_err());
}

/// First-layer pre-activations recomputed directly from the flat layout,
/// independent of the forward pass under test.
fn first_layer_preacts(model: &ModelState, inputs: &Matrix) -> Vec<f64> {
    let (fan_in, fan_out) = model.arch().layer_shapes()[0];
    let w = &model.params()[..fan_in * fan_out];
    let b = &model.params()[fan_in * fan_out..fan_in * fan_out + fan_out];
    let mut out = Vec::new();
    for i in 0..inputs.rows() {
        let x = inputs.row(i);
        for o in 0..fan_out {
            let mut z = b[o];
            for (j, &v) in x.iter().enumerate() {
                z += w[o * fan_in + j] * v;
            }
            out.push(z);
        }
    }
    out
}

#[test]
fn gradient_fd_suite_100_random_instances() {
    // Central differences are only valid away from the ReLU kink, so
    // instances with a first-layer pre-activation inside a 1e-3 margin
    // are redrawn (deterministically).
    let mut rng = crate::seeds::rng(777, &[2000]);
    let mut worst = 0.0f64;
    let mut accepted = 0u64;
    let mut attempt = 0u64;
    while accepted < 100 {
        attempt += 1;
        let input_dim = rng.gen_range(2..5);
        let hidden = vec![rng.gen_range(2..5)];
        let classes = rng.gen_range(2..5);
        let a = arch(input_dim, &hidden, classes);
        let m = init_model(&a, 5000 + attempt);
        let n = rng.gen_range(1..6);
        let inputs = random_inputs(n, input_dim, 6000 + attempt);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
        if first_layer_preacts(&m, &inputs).iter().any(|z| z.abs() < 1e-3) {
            continue;
        }
        accepted += 1;
        let (_, grad) = m.loss_and_grad(&inputs, &labels, None).unwrap();
        let fd = fd_gradient(&m, &inputs, &labels, None, 1e-5);
        let max = grad
            .iter()
            .zip(&fd)
            .map(|(&g, &f)| rel_err(g, f))
            .fold(0.0, f64::max);
        worst = worst.max(max);
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn small_sgd_step_does_not_increase_batch_loss() {
    for trial in 0..20u64 {
        let a = arch(3, &[4], 3);
        let m = init_model(&a, 900 + trial);
        let inputs = random_inputs(6, 3, 910 + trial);
        let labels = [0, 1, 2, 0, 1, 2];
        let (l0, g) = m.loss_and_grad(&inputs, &labels, None).unwrap();
        let m = m.optimizer_step(&g, &OptimizerHyper::sgd(1e-3)).unwrap();
        let (l1, _) = m.loss_and_grad(&inputs, &labels, None).unwrap();
        assert!(l1 <= l0 + 1e-12, "loss rose from {l0} to {l1}");
    }
}

#[test]
fn invalid_architectures_are_rejected() {
    assert!(Architecture::new(0, vec![3], 2).is_err());
    assert!(Architecture::new(2, vec![3], 1).is_err());
    assert!(Architecture::new(2, vec![0], 2).is_err());
}

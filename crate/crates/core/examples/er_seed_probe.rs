// ER P-MNIST variance probe (temporary)
use acl_core::al::AlStrategy;
use acl_core::cl::{CLHyper, Strategy};
use acl_core::engine::{run_acl, LabellingMode, RunConfig};
use acl_core::experiment::load_mnist;
use acl_core::nn::{Architecture, OptimizerHyper};
use acl_core::streams::{make_permuted_stream, reorder_tasks};

fn main() {
    let seed: u64 = std::env::args().nth(1).unwrap().parse().unwrap();
    let beta: f64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let cap: usize = std::env::args().nth(3).map(|s| s.parse().unwrap()).unwrap_or(400);
    let (train, test) = load_mnist(std::path::Path::new("data/mnist")).unwrap();
    let stream = make_permuted_stream(&train, &test, 10, 0.05, 0.05, 0.005, seed).unwrap();
    let mut order: Vec<usize> = (0..10).collect();
    if seed % 3 == 1 { order.rotate_left(3); }
    if seed % 3 == 2 { order.reverse(); }
    let stream = reorder_tasks(&stream, &order).unwrap();
    let arch = Architecture::new(784, vec![100, 100], 10).unwrap();
    let mut cl = CLHyper::new(Strategy::Er);
    cl.optimizer = OptimizerHyper::sgd_momentum(0.01, 0.9);
    cl.buffer_capacity = cap;
    cl.beta_er = beta;
    let cfg = RunConfig::new(arch, cl, AlStrategy::Random, LabellingMode::Sequential);
    let log = run_acl(&stream, &cfg, seed).unwrap();
    println!("seed {seed} beta {beta} cap {cap}: avg {:.4} fr {:.4}", log.avg_accuracy().unwrap(), log.forgetting_rate().unwrap());
}

// sgd+momentum ER probes (temporary)
use acl_core::al::AlStrategy;
use acl_core::cl::{CLHyper, Strategy};
use acl_core::engine::{run_acl, LabellingMode, RunConfig};
use acl_core::experiment::load_mnist;
use acl_core::nn::{Architecture, OptimizerHyper};
use acl_core::streams::{make_permuted_stream, make_split_stream, Scenario};
use std::time::Instant;

fn main() {
    let (train, test) = load_mnist(std::path::Path::new("data/mnist")).unwrap();
    let arch = Architecture::new(784, vec![100, 100], 10).unwrap();
    let opt = OptimizerHyper::sgd_momentum(0.01, 0.9);

    // P-MNIST ER 5%
    let stream = make_permuted_stream(&train, &test, 10, 0.05, 0.05, 0.005, 7).unwrap();
    let mut cl = CLHyper::new(Strategy::Er);
    cl.optimizer = opt;
    cl.buffer_capacity = 400;
    let cfg = RunConfig::new(arch.clone(), cl, AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log = run_acl(&stream, &cfg, 0).unwrap();
    eprintln!("pmnist er sgd-m0.9: {:?} avg {:.4} fr {:.4}", t0.elapsed(),
        log.avg_accuracy().unwrap(), log.forgetting_rate().unwrap());
    drop(stream);

    // S-MNIST class-IL ER 10%
    let order: Vec<usize> = (0..10).collect();
    let stream = make_split_stream(&train, &test, 2, &order, Scenario::ClassIl, 0.05, 0.10, 0.005, 7).unwrap();
    let mut cl = CLHyper::new(Strategy::Er);
    cl.optimizer = opt;
    cl.buffer_capacity = 400;
    let cfg = RunConfig::new(arch.clone(), cl, AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log = run_acl(&stream, &cfg, 0).unwrap();
    eprintln!("smnist class er sgd-m0.9: {:?} avg {:.4} fr {:.4}", t0.elapsed(),
        log.avg_accuracy().unwrap(), log.forgetting_rate().unwrap());

    // S-MNIST task-IL ER 10%
    let stream = make_split_stream(&train, &test, 2, &order, Scenario::TaskIl, 0.05, 0.10, 0.005, 7).unwrap();
    let mut cl = CLHyper::new(Strategy::Er);
    cl.optimizer = opt;
    cl.buffer_capacity = 400;
    let cfg = RunConfig::new(arch, cl, AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log = run_acl(&stream, &cfg, 0).unwrap();
    eprintln!("smnist task er sgd-m0.9: {:?} avg {:.4}", t0.elapsed(), log.avg_accuracy().unwrap());
}

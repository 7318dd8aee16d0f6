// timing probe for one S-MNIST class-IL ER run (temporary)
use acl_core::al::AlStrategy;
use acl_core::cl::{CLHyper, Strategy};
use acl_core::engine::{run_acl, LabellingMode, RunConfig};
use acl_core::experiment::load_mnist;
use acl_core::nn::Architecture;
use acl_core::streams::{make_split_stream, Scenario};
use std::time::Instant;

fn main() {
    let (train, test) = load_mnist(std::path::Path::new("data/mnist")).unwrap();
    let order: Vec<usize> = (0..10).collect();
    let stream = make_split_stream(&train, &test, 2, &order, Scenario::ClassIl, 0.05, 0.10, 0.005, 7).unwrap();
    let arch = Architecture::new(784, vec![100, 100], 10).unwrap();
    let mut cl = CLHyper::new(Strategy::Er);
    cl.epochs = 10;
    cl.buffer_capacity = 400;
    let cfg = RunConfig::new(arch.clone(), cl.clone(), AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log = run_acl(&stream, &cfg, 0).unwrap();
    eprintln!("er class-il run: {:?} avg_acc {:.4} fr {:.4}", t0.elapsed(),
        log.avg_accuracy().unwrap(), log.forgetting_rate().unwrap());

    // task-IL
    let stream_t = make_split_stream(&train, &test, 2, &order, Scenario::TaskIl, 0.05, 0.10, 0.005, 7).unwrap();
    let cfg_t = RunConfig::new(arch, cl, AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log_t = run_acl(&stream_t, &cfg_t, 0).unwrap();
    eprintln!("er task-il run: {:?} avg_acc {:.4}", t0.elapsed(), log_t.avg_accuracy().unwrap());
}

// timing probe for one S-MNIST class-IL run (temporary)
use acl_core::al::AlStrategy;
use acl_core::cl::{CLHyper, Strategy};
use acl_core::engine::{run_acl, LabellingMode, RunConfig};
use acl_core::experiment::load_mnist;
use acl_core::nn::Architecture;
use acl_core::streams::{make_split_stream, Scenario};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let (train, test) = load_mnist(std::path::Path::new("data/mnist")).unwrap();
    eprintln!("load: {:?}", t0.elapsed());

    let t0 = Instant::now();
    let order: Vec<usize> = (0..10).collect();
    let stream = make_split_stream(&train, &test, 2, &order, Scenario::ClassIl, 0.05, 0.10, 0.005, 7).unwrap();
    eprintln!("stream: {:?} (pool {} budget {} query {})", t0.elapsed(),
        stream.tasks()[0].pool_len(), stream.tasks()[0].budget(), stream.tasks()[0].query_size());

    let arch = Architecture::new(784, vec![100, 100], 10).unwrap();
    let mut cl = CLHyper::new(Strategy::Ft);
    cl.epochs = 10;
    let cfg = RunConfig::new(arch, cl, AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log = run_acl(&stream, &cfg, 0).unwrap();
    eprintln!("ft run: {:?} avg_acc {:.4}", t0.elapsed(), log.avg_accuracy().unwrap());
}

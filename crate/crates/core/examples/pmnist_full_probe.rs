// full-data supervised FT on P-MNIST (temporary calibration probe)
use acl_core::al::AlStrategy;
use acl_core::cl::{CLHyper, Strategy};
use acl_core::engine::{run_supervised_cl, LabellingMode, RunConfig};
use acl_core::experiment::load_mnist;
use acl_core::nn::Architecture;
use acl_core::streams::make_permuted_stream;
use std::time::Instant;

fn main() {
    let (train, test) = load_mnist(std::path::Path::new("data/mnist")).unwrap();
    let stream = make_permuted_stream(&train, &test, 10, 0.05, 0.05, 0.005, 7).unwrap();
    let arch = Architecture::new(784, vec![100, 100], 10).unwrap();
    let cl = CLHyper::new(Strategy::Ft);
    let cfg = RunConfig::new(arch, cl, AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log = run_supervised_cl(&stream, &cfg, 0).unwrap();
    eprintln!("full ft: {:?} avg_acc {:.4} fr {:.4}", t0.elapsed(),
        log.avg_accuracy().unwrap(), log.forgetting_rate().unwrap());
}

// sgd+momentum probe on P-MNIST (temporary)
use acl_core::al::AlStrategy;
use acl_core::cl::{CLHyper, Strategy};
use acl_core::engine::{run_acl, run_supervised_cl, LabellingMode, RunConfig};
use acl_core::experiment::load_mnist;
use acl_core::nn::{Architecture, OptimizerHyper};
use acl_core::streams::make_permuted_stream;
use std::time::Instant;

fn main() {
    let m: f64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(0.9);
    let (train, test) = load_mnist(std::path::Path::new("data/mnist")).unwrap();
    let stream = make_permuted_stream(&train, &test, 10, 0.05, 0.05, 0.005, 7).unwrap();
    let arch = Architecture::new(784, vec![100, 100], 10).unwrap();

    let mut cl = CLHyper::new(Strategy::Ft);
    cl.optimizer = OptimizerHyper::sgd_momentum(0.01, m);
    let cfg = RunConfig::new(arch.clone(), cl, AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log = run_acl(&stream, &cfg, 0).unwrap();
    eprintln!("acl5 ft sgd-m{m}: {:?} avg {:.4} fr {:.4}", t0.elapsed(),
        log.avg_accuracy().unwrap(), log.forgetting_rate().unwrap());

    let mut cl = CLHyper::new(Strategy::Ft);
    cl.optimizer = OptimizerHyper::sgd_momentum(0.01, m);
    let cfg = RunConfig::new(arch, cl, AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log = run_supervised_cl(&stream, &cfg, 0).unwrap();
    eprintln!("full ft sgd-m{m}: {:?} avg {:.4} fr {:.4}", t0.elapsed(),
        log.avg_accuracy().unwrap(), log.forgetting_rate().unwrap());
}

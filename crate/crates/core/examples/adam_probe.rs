// optimizer comparison probe (temporary)
use acl_core::al::AlStrategy;
use acl_core::cl::{CLHyper, Strategy};
use acl_core::engine::{run_acl, run_supervised_cl, LabellingMode, RunConfig};
use acl_core::experiment::load_mnist;
use acl_core::nn::{Architecture, OptimizerHyper};
use acl_core::streams::make_permuted_stream;
use std::time::Instant;

fn main() {
    let (train, test) = load_mnist(std::path::Path::new("data/mnist")).unwrap();
    let stream = make_permuted_stream(&train, &test, 10, 0.05, 0.05, 0.005, 7).unwrap();
    let arch = Architecture::new(784, vec![100, 100], 10).unwrap();

    // full-data supervised FT with adam
    let mut cl = CLHyper::new(Strategy::Ft);
    cl.optimizer = OptimizerHyper::adam(0.01);
    let cfg = RunConfig::new(arch.clone(), cl, AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log = run_supervised_cl(&stream, &cfg, 0).unwrap();
    eprintln!("full ft adam001: {:?} avg {:.4} fr {:.4}", t0.elapsed(),
        log.avg_accuracy().unwrap(), log.forgetting_rate().unwrap());

    // 5% ACL FT with adam
    let mut cl = CLHyper::new(Strategy::Ft);
    cl.optimizer = OptimizerHyper::adam(0.01);
    let cfg = RunConfig::new(arch.clone(), cl, AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log = run_acl(&stream, &cfg, 0).unwrap();
    eprintln!("acl5 ft adam001: {:?} avg {:.4} fr {:.4}", t0.elapsed(),
        log.avg_accuracy().unwrap(), log.forgetting_rate().unwrap());

    // 5% ACL ER with adam
    let mut cl = CLHyper::new(Strategy::Er);
    cl.optimizer = OptimizerHyper::adam(0.01);
    cl.buffer_capacity = 400;
    let cfg = RunConfig::new(arch, cl, AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log = run_acl(&stream, &cfg, 0).unwrap();
    eprintln!("acl5 er adam001: {:?} avg {:.4} fr {:.4}", t0.elapsed(),
        log.avg_accuracy().unwrap(), log.forgetting_rate().unwrap());
}

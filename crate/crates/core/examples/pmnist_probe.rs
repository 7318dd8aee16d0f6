// timing probe for one P-MNIST domain-IL run (temporary)
use acl_core::al::AlStrategy;
use acl_core::cl::{CLHyper, Strategy};
use acl_core::engine::{run_acl, LabellingMode, RunConfig};
use acl_core::experiment::load_mnist;
use acl_core::nn::Architecture;
use acl_core::streams::make_permuted_stream;
use std::time::Instant;

fn main() {
    let strategy = match std::env::args().nth(1).as_deref() {
        Some("er") => Strategy::Er,
        _ => Strategy::Ft,
    };
    let (train, test) = load_mnist(std::path::Path::new("data/mnist")).unwrap();
    let t0 = Instant::now();
    let stream = make_permuted_stream(&train, &test, 10, 0.05, 0.05, 0.005, 7).unwrap();
    eprintln!("stream: {:?} (pool {} budget {} query {})", t0.elapsed(),
        stream.tasks()[0].pool_len(), stream.tasks()[0].budget(), stream.tasks()[0].query_size());
    let arch = Architecture::new(784, vec![100, 100], 10).unwrap();
    let mut cl = CLHyper::new(strategy);
    cl.buffer_capacity = 400;
    let cfg = RunConfig::new(arch, cl, AlStrategy::Random, LabellingMode::Sequential);
    let t0 = Instant::now();
    let log = run_acl(&stream, &cfg, 0).unwrap();
    eprintln!("{:?} run: {:?} avg_acc {:.4} fr {:.4}", strategy, t0.elapsed(),
        log.avg_accuracy().unwrap(), log.forgetting_rate().unwrap());
}

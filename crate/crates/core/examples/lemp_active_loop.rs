//! Full active enhancement loop on a heterophilic graph, next to a plain GCN.

use std::sync::Arc;

use lemp::experiment::{run_lemp, run_plain, synth_dataset, ExperimentConfig, SynthSpec};
use lemp::models::ModelKind;
use lemp::providers::{PairCache, RateLimiter, SyntheticMode, SyntheticOracle, VirtualClock};

fn main() -> lemp::Result<()> {
    let spec = SynthSpec { p_intra: 0.01, p_inter: 0.012, feature_noise: 0.5, feature_dim: 4, seed: 2, ..SynthSpec::default() };
    let bundle = synth_dataset(&spec)?;
    let mut cfg = ExperimentConfig { batch: 200, ..ExperimentConfig::default() };
    cfg.train.seed = 2;

    let gcn = run_plain(&bundle, ModelKind::Gcn, &cfg)?;
    println!("gcn: best val {:.4} at epoch {}, test {:.4}", gcn.best_val_acc, gcn.best_epoch, gcn.test_acc);

    let labels = bundle.graph.labels().to_vec();
    let oracle = SyntheticOracle::with_labels(
        Arc::new(bundle.features.clone()),
        labels,
        bundle.graph.num_classes(),
        SyntheticMode::ClassInformative,
        0.0,
        0,
    )?;
    let limiter = RateLimiter::new(cfg.rate, Arc::new(VirtualClock::new()))?;
    let mut cache = PairCache::in_memory();
    let report = run_lemp(&bundle, &cfg, &oracle, &mut cache, &limiter)?;
    for r in &report.rounds {
        let cross = r.selected.iter().filter(|e| e.cross_class == Some(true)).count();
        println!(
            "  round {:>2} epoch {:>3} lambda {:.3}: {} picked of {}, {} cross-class",
            r.round,
            r.epoch,
            r.lambda,
            r.selected.len(),
            r.candidates,
            cross
        );
    }
    println!(
        "lemp: best val {:.4} at epoch {}, test {:.4}, {} pairs paid, ${:.6}",
        report.best_val_acc, report.best_epoch, report.test_acc, report.budget.paid, report.budget.cost_usd
    );
    Ok(())
}

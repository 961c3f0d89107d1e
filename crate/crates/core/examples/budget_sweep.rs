//! Test accuracy as a function of the query budget.

use std::sync::Arc;

use lemp::experiment::{budget_sweep, synth_dataset, ExperimentConfig, SynthSpec};
use lemp::providers::{RateLimiter, SyntheticMode, SyntheticOracle, VirtualClock};

fn main() -> lemp::Result<()> {
    let spec = SynthSpec { p_intra: 0.01, p_inter: 0.012, feature_noise: 0.5, feature_dim: 4, seed: 1, ..SynthSpec::default() };
    let bundle = synth_dataset(&spec)?;
    let mut cfg = ExperimentConfig { batch: 100, ..ExperimentConfig::default() };
    cfg.train.seed = 1;
    let oracle = SyntheticOracle::with_labels(
        Arc::new(bundle.features.clone()),
        bundle.graph.labels().to_vec(),
        bundle.graph.num_classes(),
        SyntheticMode::ClassInformative,
        0.0,
        0,
    )?;
    let limiter = RateLimiter::new(cfg.rate, Arc::new(VirtualClock::new()))?;
    let budgets = [0, 100, 200, 400, bundle.graph.num_edges()];
    println!("budget  selected  best_val  test     cost");
    for row in budget_sweep(&bundle, &cfg, &budgets, &oracle, &limiter)? {
        println!(
            "{:>6}  {:>8}  {:.4}    {:.4}   ${:.6}",
            row.budget, row.selected, row.best_val_acc, row.test_acc, row.cost_usd
        );
    }
    Ok(())
}

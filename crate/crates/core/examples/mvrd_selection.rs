//! Ranks the edges of a heterophilic graph with the fused reliable-difference
//! score and checks how many of the top picks join different classes.

use lemp::experiment::{rank_edges, synth_dataset, ExperimentConfig, SynthSpec};
use lemp::mvrd::{lambda_schedule, Horizon};

fn main() -> lemp::Result<()> {
    let spec = SynthSpec { p_intra: 0.01, p_inter: 0.012, feature_noise: 0.5, feature_dim: 4, ..SynthSpec::default() };
    let bundle = synth_dataset(&spec)?;
    let g = &bundle.graph;
    let cfg = ExperimentConfig::default();
    let cross = g.edges().iter().filter(|&&(u, v)| g.label(u) != g.label(v)).count();
    println!("{} edges, {:.3} cross-class", g.num_edges(), cross as f64 / g.num_edges() as f64);

    let (lambda, top) = rank_edges(&bundle, &cfg, 50)?;
    let hits = top.iter().filter(|e| e.cross_class == Some(true)).count();
    println!("first round lambda {lambda:.3}; top 50 cross-class share {:.3}", hits as f64 / top.len() as f64);
    for e in top.iter().take(5) {
        println!("  ({}, {}) wf {:+.4} wb {:+.4} fused {:+.4}", e.u, e.v, e.score_wf, e.score_wb, e.fused);
    }

    let budget = g.num_edges();
    for horizon in [Horizon::Literal, Horizon::RoundBased] {
        let ne = horizon.epochs(budget, cfg.interval, cfg.batch)?;
        let curve: Vec<String> = [0, 50, 100, 200, 400]
            .iter()
            .map(|&e| format!("{:.2}", lambda_schedule(e, ne, cfg.omega, cfg.phi).unwrap()))
            .collect();
        println!("{horizon:?} horizon {ne:.0} epochs, lambda at 0/50/100/200/400: {}", curve.join(" "));
    }
    Ok(())
}

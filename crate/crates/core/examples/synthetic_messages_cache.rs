//! Fetches synthetic messages through a file-backed cache twice: the second
//! pass is served entirely from disk and costs nothing.

use std::sync::Arc;

use lemp::experiment::{synth_dataset, SynthSpec};
use lemp::providers::{
    query_connection_analysis, BudgetLedger, PairCache, Prices, PromptTemplate, RateLimit, RateLimiter,
    SyntheticMode, SyntheticOracle, VirtualClock,
};

fn main() -> lemp::Result<()> {
    let bundle = synth_dataset(&SynthSpec { n: 100, ..SynthSpec::default() })?;
    let texts = bundle.node_texts();
    let pairs: Vec<(usize, usize)> = bundle.graph.edges().iter().copied().take(20).collect();
    let oracle = SyntheticOracle::new(Arc::new(bundle.features.clone()), SyntheticMode::Mean, 0.01, 0)?;
    let limiter = RateLimiter::new(RateLimit::default(), Arc::new(VirtualClock::new()))?;
    let template = PromptTemplate::by_id(&bundle.domain).or_else(|_| PromptTemplate::by_id("generic"))?;

    let dir = std::env::temp_dir().join(format!("lemp-cache-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| lemp::Error::Io { path: dir.clone(), source: e })?;
    let path = dir.join("pairs.jsonl");
    for pass in 1..=2 {
        let mut cache = PairCache::open(&path)?;
        let mut ledger = BudgetLedger::new(pairs.len(), Prices::default());
        let out = query_connection_analysis(&pairs, &texts, template, &oracle, &mut cache, &mut ledger, &limiter)?;
        println!(
            "pass {pass}: {} messages, {} provider calls, {} paid, ${:.6}, cache holds {}",
            out.messages.len(),
            out.provider_calls,
            out.paid_pairs,
            ledger.cost(),
            cache.len()
        );
    }
    let cache = PairCache::open(&path)?;
    let m = cache.get(pairs[0].0, pairs[0].1).expect("cached");
    println!("first message: {:?} ({} dims)", m.text, m.embedding.len());
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

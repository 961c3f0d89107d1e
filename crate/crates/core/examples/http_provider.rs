//! Queries an OpenAI-compatible endpoint for one connection analysis.
//!
//! Needs `LEMP_BASE_URL` (for example `https://api.openai.com/v1`) and the API
//! key in the variable named by the config (`LEMP_API_KEY` by default).
//! Without `LEMP_BASE_URL` it prints the request it would send and exits.

use std::sync::Arc;

use lemp::graph::PairKey;
use lemp::providers::{HttpConfig, HttpProvider, MessageProvider, PromptTemplate, SystemClock};

fn main() -> lemp::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let prompt = PromptTemplate::by_id("webpage")?.render(
        "Course page for CS 101, an introduction to programming",
        "Homepage of the instructor who teaches CS 101",
    )?;
    let Ok(base_url) = std::env::var("LEMP_BASE_URL") else {
        let cfg = HttpConfig::default();
        println!("LEMP_BASE_URL is not set; would POST to {}/chat/completions with model {}:", cfg.base_url, cfg.chat_model);
        println!("{prompt}");
        return Ok(());
    };
    let cfg = HttpConfig { base_url, ..HttpConfig::default() };
    let key = std::env::var(&cfg.api_key_env).ok();
    let provider = HttpProvider::with_clock(cfg, key, Arc::new(SystemClock::default()))?;
    let pair = PairKey::new(0, 1);
    let completion = provider.analyze(pair, &prompt)?;
    println!("{}\n\nusage: {:?}", completion.text, completion.usage);
    let embedding = provider.embed(pair, &completion.text)?;
    println!("embedding: {} dims, first {:?}", embedding.len(), &embedding[..embedding.len().min(4)]);
    Ok(())
}

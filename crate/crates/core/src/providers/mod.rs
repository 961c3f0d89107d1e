//! Pair-message acquisition: prompts, LM clients, caching, budgets and rate
//! limits.

pub mod cache;
pub mod http;
pub mod ledger;
pub mod prompt;
pub mod query;
pub mod rate;
pub mod synthetic;

pub use cache::{PairCache, PairMessage};
pub use http::{HttpConfig, HttpProvider, RetryPolicy};
pub use ledger::{estimate_cost, BudgetLedger, Prices, RoundCharge, TokenUsage};
pub use prompt::{render_prompt, PromptTemplate};
pub use query::{query_connection_analysis, QueryOutcome};
pub use rate::{Clock, RateLimit, RateLimiter, SystemClock, VirtualClock};
pub use synthetic::{SyntheticMode, SyntheticOracle};

use crate::error::Result;
use crate::graph::PairKey;

/// One chat completion with the provider-reported token usage.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub usage: TokenUsage,
}

/// Source of connection analyses and their embeddings.
///
/// Both calls receive the pair so offline implementations can answer from
/// node data instead of text.
pub trait MessageProvider: Send + Sync {
    fn model_id(&self) -> &str;
    fn analyze(&self, key: PairKey, prompt: &str) -> Result<Completion>;
    fn embed(&self, key: PairKey, text: &str) -> Result<Vec<f32>>;

    /// Width of the vectors `embed` returns, when known up front.
    fn embedding_dim(&self) -> Option<usize> {
        None
    }

    /// Tokens to reserve against the rate limit before dispatch.
    fn estimate_tokens(&self, prompt: &str) -> u64 {
        synthetic::approx_tokens(prompt)
    }
}

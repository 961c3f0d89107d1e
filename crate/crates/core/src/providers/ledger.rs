use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// USD per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prices {
    pub input_per_million: f64,
    pub output_per_million: f64,
}

impl Default for Prices {
    fn default() -> Self {
        Self { input_per_million: 0.02, output_per_million: 0.04 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// `(sum prompt * p_in + sum completion * p_out) / 1e6`.
///
/// Token counts are summed as integers before pricing so the result carries a
/// single rounding step per price.
pub fn estimate_cost(usage: &[TokenUsage], prices: &Prices) -> Result<f64> {
    if prices.input_per_million < 0.0 || prices.output_per_million < 0.0 {
        return Err(Error::InvalidArgument("prices must be non-negative".into()));
    }
    let prompt: u64 = usage.iter().map(|u| u.prompt_tokens).sum();
    let completion: u64 = usage.iter().map(|u| u.completion_tokens).sum();
    Ok((prompt as f64 * prices.input_per_million + completion as f64 * prices.output_per_million) / 1e6)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RoundCharge {
    pub round: usize,
    pub pairs: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost: f64,
}

/// Paid pair-queries against a fixed budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub total: usize,
    pub used: usize,
    pub prices: Prices,
    pub rounds: Vec<RoundCharge>,
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl BudgetLedger {
    pub fn new(total: usize, prices: Prices) -> Self {
        Self { total, used: 0, prices, rounds: Vec::new(), prompt_tokens: 0, completion_tokens: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.total - self.used
    }

    /// Fails unless `n` more pairs fit in the budget.
    pub fn check(&self, n: usize) -> Result<()> {
        if n > self.remaining() {
            return Err(Error::BudgetExhausted { requested: n, remaining: self.remaining() });
        }
        Ok(())
    }

    /// Opens a new round; charges go to the latest round.
    pub fn begin_round(&mut self) {
        let round = self.rounds.len();
        self.rounds.push(RoundCharge { round, ..Default::default() });
    }

    /// Charges one paid pair.
    pub fn charge(&mut self, usage: TokenUsage) -> Result<()> {
        self.check(1)?;
        if self.rounds.is_empty() {
            self.begin_round();
        }
        self.used += 1;
        self.prompt_tokens += usage.prompt_tokens;
        self.completion_tokens += usage.completion_tokens;
        let prices = self.prices;
        let r = self.rounds.last_mut().expect("round opened above");
        r.pairs += 1;
        r.prompt_tokens += usage.prompt_tokens;
        r.completion_tokens += usage.completion_tokens;
        r.cost = estimate_cost(
            &[TokenUsage { prompt_tokens: r.prompt_tokens, completion_tokens: r.completion_tokens }],
            &prices,
        )?;
        Ok(())
    }

    pub fn usage(&self) -> TokenUsage {
        TokenUsage { prompt_tokens: self.prompt_tokens, completion_tokens: self.completion_tokens }
    }

    /// Accumulated cost in USD.
    pub fn cost(&self) -> f64 {
        estimate_cost(&[self.usage()], &self.prices).unwrap_or(f64::NAN)
    }
}

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};
use crate::graph::PairKey;
use crate::providers::{BudgetLedger, MessageProvider, PairCache, PairMessage, PromptTemplate, RateLimiter};

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    /// One message per requested pair, in request order.
    pub messages: Vec<PairMessage>,
    /// Chat calls issued to the provider.
    pub provider_calls: usize,
    /// Distinct pairs that were not cached and got charged.
    pub paid_pairs: usize,
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Returns a message for every pair, querying the provider only for pairs
/// missing from `cache`.
///
/// Uncached pairs are dispatched from up to `max_concurrent` worker threads
/// under `limiter`. Results are written to the cache and charged to the
/// ledger on this thread as they arrive, so work finished before a failure
/// is kept.
pub fn query_connection_analysis(
    pairs: &[(usize, usize)],
    texts: &[String],
    template: &PromptTemplate,
    provider: &dyn MessageProvider,
    cache: &mut PairCache,
    ledger: &mut BudgetLedger,
    limiter: &RateLimiter,
) -> Result<QueryOutcome> {
    let n = texts.len();
    let mut seen = HashSet::new();
    let mut todo = Vec::new();
    for &(a, b) in pairs {
        for i in [a, b] {
            if i >= n {
                return Err(Error::NodeOutOfRange { index: i, n });
            }
        }
        let key = PairKey::new(a, b);
        if seen.insert(key) && !cache.contains(a, b) {
            todo.push(key);
        }
    }
    ledger.check(todo.len())?;

    let calls = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut first_err: Option<Error> = None;
    let mut paid = 0;
    if !todo.is_empty() {
        ledger.begin_round();
        let workers = limiter.limit().max_concurrent.min(todo.len());
        let (tx, rx) = mpsc::channel::<Result<PairMessage>>();
        std::thread::scope(|s| {
            for _ in 0..workers {
                let tx = tx.clone();
                let (todo, next, abort, calls) = (&todo, &next, &abort, &calls);
                s.spawn(move || loop {
                    if abort.load(Ordering::SeqCst) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&key) = todo.get(i) else { break };
                    let res = fetch_one(key, texts, template, provider, limiter, calls);
                    if res.is_err() {
                        abort.store(true, Ordering::SeqCst);
                    }
                    if tx.send(res).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for res in rx {
                let stored = res.and_then(|m| {
                    let usage = crate::providers::TokenUsage {
                        prompt_tokens: m.prompt_tokens,
                        completion_tokens: m.completion_tokens,
                    };
                    cache.insert(m)?;
                    ledger.charge(usage)
                });
                match stored {
                    Ok(()) => paid += 1,
                    Err(e) => {
                        abort.store(true, Ordering::SeqCst);
                        first_err.get_or_insert(e);
                    }
                }
            }
        });
    }
    if let Some(e) = first_err {
        return Err(e);
    }

    let messages = pairs
        .iter()
        .map(|&(a, b)| cache.get(a, b).cloned().expect("every requested pair is cached by now"))
        .collect();
    Ok(QueryOutcome { messages, provider_calls: calls.into_inner(), paid_pairs: paid })
}

fn fetch_one(
    key: PairKey,
    texts: &[String],
    template: &PromptTemplate,
    provider: &dyn MessageProvider,
    limiter: &RateLimiter,
    calls: &AtomicUsize,
) -> Result<PairMessage> {
    let prompt = template.render(&texts[key.u], &texts[key.v])?;
    let completion = {
        let _permit = limiter.acquire(provider.estimate_tokens(&prompt))?;
        calls.fetch_add(1, Ordering::SeqCst);
        provider.analyze(key, &prompt)?
    };
    let embedding = provider.embed(key, &completion.text)?;
    Ok(PairMessage {
        key,
        text: completion.text,
        embedding,
        prompt_tokens: completion.usage.prompt_tokens,
        completion_tokens: completion.usage.completion_tokens,
        model: provider.model_id().to_string(),
        created: now_secs(),
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::ndmath::Matrix;
    use crate::providers::{Prices, RateLimit, SyntheticMode, SyntheticOracle, VirtualClock};

    fn setup() -> (SyntheticOracle, Vec<String>, RateLimiter) {
        let f = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let oracle = SyntheticOracle::new(Arc::new(f), SyntheticMode::Mean, 0.01, 3).unwrap();
        let texts = (0..4).map(|i| format!("node {i}")).collect();
        let lim = RateLimiter::new(RateLimit::default(), Arc::new(VirtualClock::new())).unwrap();
        (oracle, texts, lim)
    }

    #[test]
    fn duplicate_and_reversed_pairs_query_once() {
        let (oracle, texts, lim) = setup();
        let t = PromptTemplate::by_id("generic").unwrap();
        let mut cache = PairCache::in_memory();
        let mut ledger = BudgetLedger::new(10, Prices::default());
        let out =
            query_connection_analysis(&[(0, 1), (1, 0), (2, 3)], &texts, t, &oracle, &mut cache, &mut ledger, &lim)
                .unwrap();
        assert_eq!(out.provider_calls, 2);
        assert_eq!(out.paid_pairs, 2);
        assert_eq!(out.messages[0], out.messages[1]);
        assert_eq!(ledger.used, 2);

        let again = query_connection_analysis(&[(1, 0)], &texts, t, &oracle, &mut cache, &mut ledger, &lim).unwrap();
        assert_eq!(again.provider_calls, 0);
        assert_eq!(ledger.used, 2);
        assert_eq!(oracle.calls(), 2);
    }

    #[test]
    fn budget_checked_before_dispatch() {
        let (oracle, texts, lim) = setup();
        let t = PromptTemplate::by_id("generic").unwrap();
        let mut cache = PairCache::in_memory();
        let mut ledger = BudgetLedger::new(1, Prices::default());
        let r = query_connection_analysis(&[(0, 1), (2, 3)], &texts, t, &oracle, &mut cache, &mut ledger, &lim);
        assert!(matches!(r, Err(Error::BudgetExhausted { requested: 2, remaining: 1 })));
        assert_eq!(oracle.calls(), 0);
    }
}

//! Pushes 300 requests through the limiter on a virtual clock and prints the
//! busiest 60-second window.

use std::sync::Arc;
use std::time::Duration;

use lemp::providers::{Clock, RateLimit, RateLimiter, VirtualClock};

fn main() -> lemp::Result<()> {
    let clock = Arc::new(VirtualClock::new());
    let limit = RateLimit { queries_per_minute: 30, tokens_per_minute: 12_000, max_concurrent: 1 };
    let limiter = RateLimiter::new(limit, clock.clone())?;
    let mut log = Vec::new();
    for i in 0..300u64 {
        let tokens = 200 + (i * 37) % 400;
        let permit = limiter.acquire(tokens)?;
        log.push((clock.now(), tokens));
        clock.advance(Duration::from_millis(150));
        drop(permit);
    }
    let mut busiest = (0, 0);
    for (start, _) in &log {
        let window: Vec<_> = log.iter().filter(|(t, _)| *t >= *start && *t < *start + Duration::from_secs(60)).collect();
        let q = window.len();
        let tok: u64 = window.iter().map(|(_, k)| k).sum();
        busiest = busiest.max((q, tok));
    }
    println!(
        "300 requests took {:.1} virtual minutes; busiest window {} queries (limit {}), {} tokens (limit {})",
        clock.now().as_secs_f64() / 60.0,
        busiest.0,
        limit.queries_per_minute,
        busiest.1,
        limit.tokens_per_minute
    );
    Ok(())
}

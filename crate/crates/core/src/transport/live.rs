use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use chrono::Utc;

use super::{FetchOrigin, HttpRequest, HttpResponse, Method, Transport, TransportError, TransportPolicy};

const RECORDED_HEADERS: &[&str] = &[
    "content-type",
    "link",
    "location",
    "retry-after",
    "x-ratelimit-remaining",
    "x-ratelimit-reset",
];

/// Per-host token bucket. Capacity equals the per-minute rate, refilled
/// continuously.
pub struct RateLimiter {
    per_minute: u32,
    buckets: Mutex<HashMap<String, (f64, Instant)>>,
}

impl RateLimiter {
    pub fn new(per_minute: u32) -> Self {
        RateLimiter { per_minute: per_minute.max(1), buckets: Mutex::new(HashMap::new()) }
    }

    /// Blocks until a token for `host` is available.
    pub fn acquire(&self, host: &str) {
        let capacity = self.per_minute as f64;
        let refill_per_sec = capacity / 60.0;
        loop {
            let wait = {
                let mut buckets = self.buckets.lock().unwrap_or_else(|e| e.into_inner());
                let now = Instant::now();
                let (tokens, last) = buckets.entry(host.to_string()).or_insert((capacity, now));
                *tokens = (*tokens + now.duration_since(*last).as_secs_f64() * refill_per_sec).min(capacity);
                *last = now;
                if *tokens >= 1.0 {
                    *tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - *tokens) / refill_per_sec)
            };
            thread::sleep(wait);
        }
    }
}

pub struct LiveTransport {
    client: reqwest::blocking::Client,
    limiter: RateLimiter,
    auth_tokens: BTreeMap<String, String>,
    max_retries: u32,
    backoff_base: Duration,
}

impl LiveTransport {
    pub fn new(policy: &TransportPolicy) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(policy.timeout_secs.max(1)))
            .user_agent(concat!("patchnet/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| TransportError::Network { url: String::new(), message: e.to_string() })?;
        Ok(LiveTransport {
            client,
            limiter: RateLimiter::new(policy.rate_limit),
            auth_tokens: policy.auth_tokens.clone(),
            max_retries: policy.max_retries,
            backoff_base: Duration::from_millis(policy.backoff_base_ms),
        })
    }

    fn send_once(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let host = url::Url::parse(&req.url)
            .ok()
            .and_then(|u| u.host_str().map(str::to_string))
            .unwrap_or_default();
        self.limiter.acquire(&host);

        let mut builder = match req.method {
            Method::Get => self.client.get(&req.url),
            Method::Post => self.client.post(&req.url),
        };
        if let Some(token) = self.auth_tokens.get(&host) {
            builder = builder.bearer_auth(token);
        }
        for (k, v) in &req.headers {
            builder = builder.header(k.as_str(), v.as_str());
        }
        if let Some(body) = &req.body {
            builder = builder.body(body.clone());
        }
        let network_err = |e: reqwest::Error| TransportError::Network { url: req.url.clone(), message: e.to_string() };
        let resp = builder.send().map_err(network_err)?;
        let status = resp.status().as_u16();
        let final_url = resp.url().to_string();
        let headers = resp
            .headers()
            .iter()
            .filter(|(k, _)| RECORDED_HEADERS.contains(&k.as_str()))
            .filter_map(|(k, v)| v.to_str().ok().map(|v| (k.as_str().to_string(), v.to_string())))
            .collect();
        let body = resp.bytes().map_err(network_err)?.to_vec();
        Ok(HttpResponse { status, headers, body, final_url, recorded_at: Utc::now(), origin: FetchOrigin::Live, snapshot: None })
    }
}

impl Transport for LiveTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut attempt = 0;
        loop {
            let resp = self.send_once(req)?;
            if !resp.is_rate_limited() || attempt >= self.max_retries {
                return Ok(resp);
            }
            let retry_after = resp
                .header("retry-after")
                .and_then(|v| v.parse::<u64>().ok())
                .map(|s| Duration::from_secs(s.min(60)));
            let delay = retry_after.unwrap_or(self.backoff_base * 2u32.pow(attempt));
            tracing::warn!(url = %req.url, ?delay, attempt, "rate limited, backing off");
            thread::sleep(delay);
            attempt += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_allows_burst_up_to_capacity() {
        let limiter = RateLimiter::new(600);
        let start = Instant::now();
        for _ in 0..10 {
            limiter.acquire("a.org");
        }
        assert!(start.elapsed() < Duration::from_millis(200));
    }

    #[test]
    fn bucket_throttles_after_burst() {
        // capacity 60/min → refill one token per second; two extra tokens cost ~2 s,
        // so use a faster rate to keep the test short.
        let limiter = RateLimiter::new(1200);
        for _ in 0..1200 {
            limiter.acquire("b.org");
        }
        let start = Instant::now();
        limiter.acquire("b.org");
        assert!(start.elapsed() >= Duration::from_millis(30));
        // hosts are independent
        let start = Instant::now();
        limiter.acquire("c.org");
        assert!(start.elapsed() < Duration::from_millis(30));
    }
}

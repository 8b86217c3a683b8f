//! Best-effort client for the public Google Trends web endpoints.
//!
//! Each request takes two upstream calls: `explore` returns a widget token
//! for the time series, and `widgetdata/multiline` returns the jointly
//! scaled values. Calls go through a rate limiter (default one per two
//! seconds) and are retried with bounded exponential backoff on 429 and
//! 5xx responses. Wrap the client in a [`crate::cache::CachedProvider`].

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use anchorbank_core::model::ResponseId;
use anchorbank_core::provider::fnv1a;
use anchorbank_core::{InterestSeries, Provider, ProviderError, ProviderResponse, RequestSpec};
use chrono::DateTime;
use serde_json::{json, Value};

pub const ENV_BASE_URL: &str = "ANCHORBANK_TRENDS_URL";
pub const ENV_MIN_INTERVAL_MS: &str = "ANCHORBANK_MIN_INTERVAL_MS";
pub const DEFAULT_BASE_URL: &str = "https://trends.google.com";

#[derive(Clone, Debug)]
pub struct LiveConfig {
    pub base_url: String,
    pub hl: String,
    /// Timezone offset in minutes, as the endpoint expects it.
    pub tz: i32,
    pub min_interval: Duration,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub backoff_max: Duration,
    pub timeout: Duration,
    pub user_agent: String,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            base_url: DEFAULT_BASE_URL.into(),
            hl: "en-US".into(),
            tz: 0,
            min_interval: Duration::from_secs(2),
            max_retries: 4,
            backoff_base: Duration::from_secs(5),
            backoff_max: Duration::from_secs(120),
            timeout: Duration::from_secs(30),
            user_agent: concat!("anchorbank/", env!("CARGO_PKG_VERSION")).into(),
        }
    }
}

impl LiveConfig {
    /// Defaults, with the base URL and rate limit overridable from the
    /// environment.
    pub fn from_env() -> Self {
        let mut c = LiveConfig::default();
        if let Ok(url) = std::env::var(ENV_BASE_URL) {
            c.base_url = url;
        }
        if let Some(ms) = std::env::var(ENV_MIN_INTERVAL_MS).ok().and_then(|v| v.parse().ok()) {
            c.min_interval = Duration::from_millis(ms);
        }
        c
    }
}

/// Token bucket of capacity one: at most one call per `interval`.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(interval: Duration) -> Self {
        RateLimiter {
            interval,
            next: Mutex::new(None),
        }
    }

    /// Blocks until a call is allowed. Callers are served one at a time.
    pub fn acquire(&self) {
        let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        if let Some(t) = *next {
            if t > now {
                std::thread::sleep(t - now);
            }
        }
        *next = Some(Instant::now() + self.interval);
    }
}

#[derive(Debug)]
pub struct LiveProvider {
    agent: ureq::Agent,
    config: LiveConfig,
    limiter: RateLimiter,
    calls: AtomicUsize,
}

fn transport(message: impl Into<String>, retryable: bool, retry_after_ms: Option<u64>) -> ProviderError {
    ProviderError::Transport {
        message: message.into(),
        retryable,
        retry_after_ms,
    }
}

/// Drops the anti-JSON-hijacking prefix (`)]}'` and similar).
fn json_body(text: &str) -> Result<Value, ProviderError> {
    let start = text
        .find('{')
        .ok_or_else(|| ProviderError::Payload("no JSON object in response".into()))?;
    serde_json::from_str(&text[start..]).map_err(|e| ProviderError::Payload(e.to_string()))
}

impl LiveProvider {
    pub fn new(config: LiveConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .user_agent(config.user_agent.as_str())
            .build()
            .into();
        LiveProvider {
            agent,
            limiter: RateLimiter::new(config.min_interval),
            config,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }

    /// Upstream HTTP calls made so far, retries included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.config
            .backoff_base
            .saturating_mul(factor)
            .min(self.config.backoff_max)
    }

    fn get(&self, path: &str, params: &[(&str, &str)]) -> Result<String, ProviderError> {
        let url = format!("{}{}", self.config.base_url.trim_end_matches('/'), path);
        let mut attempt = 0;
        loop {
            self.limiter.acquire();
            self.calls.fetch_add(1, Ordering::Relaxed);
            let mut req = self.agent.get(&url);
            for (k, v) in params {
                req = req.query(*k, *v);
            }
            let (err, retry_after) = match req.call() {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status == 200 {
                        return resp
                            .body_mut()
                            .read_to_string()
                            .map_err(|e| transport(e.to_string(), true, None));
                    }
                    let retry_after = resp
                        .headers()
                        .get("retry-after")
                        .and_then(|v| v.to_str().ok())
                        .and_then(|v| v.trim().parse::<u64>().ok())
                        .map(|s| s * 1000);
                    if status != 429 && status < 500 {
                        return Err(transport(format!("{url}: HTTP {status}"), false, None));
                    }
                    (format!("{url}: HTTP {status}"), retry_after)
                }
                Err(e) => (format!("{url}: {e}"), None),
            };
            if attempt >= self.config.max_retries {
                let wait = retry_after.unwrap_or(self.backoff(attempt).as_millis() as u64);
                return Err(transport(err, true, Some(wait)));
            }
            let wait = retry_after
                .map(Duration::from_millis)
                .unwrap_or_else(|| self.backoff(attempt))
                .min(self.config.backoff_max);
            log::warn!("{err}; retrying in {:?}", wait);
            std::thread::sleep(wait);
            attempt += 1;
        }
    }

    fn explore(&self, request: &RequestSpec) -> Result<(String, Value), ProviderError> {
        let geo = match request.region() {
            "worldwide" | "" => "",
            r => r,
        };
        let time = format!("{} {}", request.timespan().start(), request.timespan().end());
        let items: Vec<Value> = request
            .queries()
            .iter()
            .map(|q| json!({"keyword": q.as_str(), "geo": geo, "time": time}))
            .collect();
        let req = json!({"comparisonItem": items, "category": 0, "property": ""}).to_string();
        let tz = self.config.tz.to_string();
        let body = self.get(
            "/trends/api/explore",
            &[("hl", &self.config.hl), ("tz", &tz), ("req", &req)],
        )?;
        let v = json_body(&body)?;
        let widget = v["widgets"]
            .as_array()
            .and_then(|ws| ws.iter().find(|w| w["id"] == "TIMESERIES"))
            .ok_or_else(|| ProviderError::Payload("no TIMESERIES widget".into()))?;
        let token = widget["token"]
            .as_str()
            .ok_or_else(|| ProviderError::Payload("widget without token".into()))?;
        Ok((token.to_string(), widget["request"].clone()))
    }
}

impl Provider for LiveProvider {
    fn fetch(&self, request: &RequestSpec) -> Result<ProviderResponse, ProviderError> {
        let (token, widget_req) = self.explore(request)?;
        let tz = self.config.tz.to_string();
        let req = widget_req.to_string();
        let body = self.get(
            "/trends/api/widgetdata/multiline",
            &[("hl", &self.config.hl), ("tz", &tz), ("req", &req), ("token", &token)],
        )?;
        let v = json_body(&body)?;
        let rows = v["default"]["timelineData"]
            .as_array()
            .ok_or_else(|| ProviderError::Payload("no timelineData".into()))?;

        let n = request.queries().len();
        let mut columns: Vec<Vec<(chrono::NaiveDate, u32)>> = vec![Vec::with_capacity(rows.len()); n];
        for row in rows {
            let secs: i64 = row["time"]
                .as_str()
                .and_then(|s| s.parse().ok())
                .or_else(|| row["time"].as_i64())
                .ok_or_else(|| ProviderError::Payload("row without time".into()))?;
            let date = DateTime::from_timestamp(secs, 0)
                .ok_or_else(|| ProviderError::Payload(format!("bad timestamp {secs}")))?
                .date_naive();
            let values = row["value"]
                .as_array()
                .filter(|vs| vs.len() == n)
                .ok_or_else(|| ProviderError::Payload(format!("expected {n} values per row")))?;
            for (col, v) in columns.iter_mut().zip(values) {
                let v = v
                    .as_u64()
                    .filter(|v| *v <= 100)
                    .ok_or_else(|| ProviderError::Payload(format!("reading {v}")))?;
                col.push((date, v as u32));
            }
        }
        let series = request
            .queries()
            .iter()
            .zip(columns)
            .map(|(q, pts)| InterestSeries::rounded(q.clone(), pts))
            .collect::<Result<Vec<_>, _>>()?;
        // A fresh upstream scaling context per token.
        let id = ResponseId(fnv1a(format!("{}\n{}", request.canonical_key(), token).as_bytes()));
        Ok(ProviderResponse::new(request.clone(), series, id)?)
    }
}

//! The live client against a local mock server. No test here leaves the
//! loopback interface.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use anchorbank::anchorbank_core::{Provider, ProviderError, QueryId, RequestSpec, Timespan};
use anchorbank::cache::CachedProvider;
use anchorbank::live::{LiveConfig, LiveProvider, RateLimiter};
use chrono::NaiveDate;

type Reply = (u16, Vec<(&'static str, String)>, String);

/// Serves `handler(call_index, path)` for every connection; returns the
/// base URL and the log of request paths.
fn serve(handler: impl Fn(usize, &str) -> Reply + Send + 'static) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let seen = log.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut first = String::new();
            if reader.read_line(&mut first).is_err() {
                continue;
            }
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
            }
            let target = first.split(' ').nth(1).unwrap_or("").to_string();
            let path = target.split('?').next().unwrap().to_string();
            let n = {
                let mut l = seen.lock().unwrap();
                l.push(target);
                l.len() - 1
            };
            let (status, headers, body) = handler(n, &path);
            let mut resp = format!(
                "HTTP/1.1 {status} X\r\ncontent-length: {}\r\nconnection: close\r\n",
                body.len()
            );
            for (k, v) in headers {
                resp.push_str(&format!("{k}: {v}\r\n"));
            }
            resp.push_str("\r\n");
            resp.push_str(&body);
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    (base, log)
}

fn fast_config(base: &str) -> LiveConfig {
    LiveConfig {
        base_url: base.to_string(),
        min_interval: Duration::from_millis(1),
        max_retries: 2,
        backoff_base: Duration::from_millis(5),
        backoff_max: Duration::from_millis(20),
        timeout: Duration::from_secs(5),
        ..LiveConfig::default()
    }
}

fn request() -> RequestSpec {
    let start = NaiveDate::from_ymd_opt(2021, 1, 3).unwrap();
    let end = NaiveDate::from_ymd_opt(2021, 1, 10).unwrap();
    RequestSpec::new(
        vec![QueryId::new("alpha").unwrap(), QueryId::new("beta").unwrap()],
        "US",
        Timespan::new(start, end).unwrap(),
    )
    .unwrap()
}

fn explore_body() -> String {
    ")]}'\n{\"widgets\":[{\"id\":\"RELATED\",\"token\":\"no\"},{\"id\":\"TIMESERIES\",\"token\":\"tok-1\",\"request\":{\"time\":\"x\"}}]}".into()
}

fn multiline_body() -> String {
    // 2021-01-03 and 2021-01-10, 00:00 UTC.
    ")]}',\n{\"default\":{\"timelineData\":[{\"time\":\"1609632000\",\"value\":[100,40]},{\"time\":\"1610236800\",\"value\":[73,12]}]}}".into()
}

fn trends(_: usize, path: &str) -> Reply {
    match path {
        "/trends/api/explore" => (200, vec![], explore_body()),
        "/trends/api/widgetdata/multiline" => (200, vec![], multiline_body()),
        _ => (404, vec![], String::new()),
    }
}

#[test]
fn fetch_parses_the_timeline() {
    let (base, log) = serve(trends);
    let live = LiveProvider::new(fast_config(&base));
    let resp = live.fetch(&request()).unwrap();
    let s = resp.series();
    assert_eq!(s.len(), 2);
    assert_eq!(s[0].query().as_str(), "alpha");
    assert_eq!(s[0].points().len(), 2);
    assert_eq!(s[0].points()[1].date, NaiveDate::from_ymd_opt(2021, 1, 10).unwrap());
    assert_eq!(s[1].max_value(), &anchorbank::anchorbank_core::model::int(40));
    let log = log.lock().unwrap();
    assert_eq!(log.len(), 2);
    assert!(log[0].starts_with("/trends/api/explore?"));
    assert!(log[1].contains("token=tok-1"));
    assert_eq!(live.calls(), 2);
}

#[test]
fn throttling_is_retried_with_retry_after() {
    let (base, log) = serve(|n, path| {
        if n == 0 {
            (429, vec![("retry-after", "0".into())], String::new())
        } else if n == 2 {
            (503, vec![], String::new())
        } else {
            trends(n, path)
        }
    });
    let live = LiveProvider::new(fast_config(&base));
    live.fetch(&request()).unwrap();
    assert_eq!(log.lock().unwrap().len(), 4);
}

#[test]
fn retries_are_bounded() {
    let (base, log) = serve(|_, _| (500, vec![], String::new()));
    let live = LiveProvider::new(fast_config(&base));
    match live.fetch(&request()) {
        Err(ProviderError::Transport { retryable, .. }) => assert!(retryable),
        other => panic!("{other:?}"),
    }
    assert_eq!(log.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (base, log) = serve(|_, _| (400, vec![], String::new()));
    let live = LiveProvider::new(fast_config(&base));
    match live.fetch(&request()) {
        Err(ProviderError::Transport { retryable, .. }) => assert!(!retryable),
        other => panic!("{other:?}"),
    }
    assert_eq!(log.lock().unwrap().len(), 1);
}

#[test]
fn malformed_payloads_are_reported() {
    let (base, _) = serve(|_, path| match path {
        "/trends/api/explore" => (200, vec![], explore_body()),
        _ => (200, vec![], "{\"default\":{\"timelineData\":[{\"time\":\"1609632000\",\"value\":[100]}]}}".into()),
    });
    let live = LiveProvider::new(fast_config(&base));
    assert!(matches!(live.fetch(&request()), Err(ProviderError::Payload(_))));

    let (base, _) = serve(|_, _| (200, vec![], "<html>".into()));
    let live = LiveProvider::new(fast_config(&base));
    assert!(matches!(live.fetch(&request()), Err(ProviderError::Payload(_))));
}

#[test]
fn cached_live_client_hits_the_server_once() {
    let (base, log) = serve(trends);
    let dir = tempfile::tempdir().unwrap();
    let cached = CachedProvider::new(LiveProvider::new(fast_config(&base)), dir.path()).unwrap();
    let a = cached.fetch(&request()).unwrap();
    let b = cached.fetch(&request()).unwrap();
    assert_eq!(a, b);
    assert_eq!(log.lock().unwrap().len(), 2);
}

#[test]
fn rate_limiter_spaces_calls() {
    let limiter = RateLimiter::new(Duration::from_millis(40));
    let t = Instant::now();
    for _ in 0..4 {
        limiter.acquire();
    }
    assert!(t.elapsed() >= Duration::from_millis(120));
}

//! On-disk response cache.
//!
//! One file per request, named by the SHA-256 of the request's canonical
//! key. The file is a sealed document (`anchorbank-response v1
//! sha256=<hex>` header, JSON body) holding the key and the response.
//! Unreadable or corrupt entries are refetched and overwritten.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use anchorbank_core::{Provider, ProviderError, ProviderResponse, RequestSpec};
use serde::{Deserialize, Serialize};

use crate::codec::{seal, sha256_hex, unseal, ResponseDoc};
use crate::error::StoreError;
use crate::storage::write_atomic;

pub const RESPONSE_KIND: &str = "anchorbank-response";
pub const CACHE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheDoc {
    key: String,
    response: ResponseDoc,
}

/// Counters since construction.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
    pub corrupt: usize,
}

#[derive(Debug)]
pub struct CachedProvider<P> {
    inner: P,
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
    corrupt: AtomicUsize,
}

impl<P: Provider> CachedProvider<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
        Ok(CachedProvider {
            inner,
            dir,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
            corrupt: AtomicUsize::new(0),
        })
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            corrupt: self.corrupt.load(Ordering::Relaxed),
        }
    }

    pub fn path_for(&self, request: &RequestSpec) -> PathBuf {
        self.dir
            .join(format!("{}.resp", sha256_hex(request.canonical_key().as_bytes())))
    }

    fn read(&self, path: &Path, key: &str) -> Result<Option<ProviderResponse>, StoreError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(StoreError::io(path, e)),
        };
        let (version, body) = unseal(RESPONSE_KIND, &text)?;
        if version != CACHE_VERSION {
            return Err(StoreError::UnsupportedVersion {
                kind: "cache entry",
                found: version,
                supported: CACHE_VERSION,
            });
        }
        let doc: CacheDoc = serde_json::from_str(body)?;
        if doc.key != key {
            return Err(StoreError::Invalid("cache key collision".into()));
        }
        Ok(Some(doc.response.to_response()?))
    }

    fn write(&self, path: &Path, key: &str, resp: &ProviderResponse) -> Result<(), StoreError> {
        let doc = CacheDoc {
            key: key.to_string(),
            response: ResponseDoc::from_response(resp),
        };
        let body = serde_json::to_string(&doc)?;
        write_atomic(path, seal(RESPONSE_KIND, CACHE_VERSION, &body).as_bytes())
    }
}

impl<P: Provider> Provider for CachedProvider<P> {
    fn fetch(&self, request: &RequestSpec) -> Result<ProviderResponse, ProviderError> {
        let key = request.canonical_key();
        let path = self.path_for(request);
        match self.read(&path, &key) {
            Ok(Some(resp)) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(resp);
            }
            Ok(None) => {}
            Err(e) => {
                log::warn!("discarding cache entry {}: {e}", path.display());
                self.corrupt.fetch_add(1, Ordering::Relaxed);
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let resp = self.inner.fetch(request)?;
        if let Err(e) = self.write(&path, &key, &resp) {
            log::warn!("could not cache {}: {e}", path.display());
        }
        Ok(resp)
    }
}

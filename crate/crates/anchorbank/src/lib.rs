//! Files, caching, the live client, experiments and the command line for
//! [`anchorbank_core`].

pub mod cache;
pub mod cli;
pub mod codec;
pub mod config;
pub mod error;
pub mod formats;
pub mod harness;
pub mod live;
pub mod parallel;
pub mod storage;

pub use anchorbank_core;
pub use cache::CachedProvider;
pub use error::{ConfigError, FormatError, HarnessError, StoreError};
pub use live::{LiveConfig, LiveProvider};
pub use storage::{load_bank, save_bank, BankFile, Provenance};

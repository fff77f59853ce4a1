//! Event window detection for timestamped text streams.
//!
//! A stream is cut into fixed-length windows, each window gets its own
//! Skip-gram embeddings, and the tokens of consecutive windows are clustered
//! with average-linkage HAC. A window is flagged as an event window when its
//! dendrogram-level similarity matrix or its vocabulary changed enough
//! relative to the previous window.
//!
//! ```no_run
//! use eventwin_core::pipeline::{run_detect, RunConfig};
//!
//! let config = RunConfig::new("tweets.jsonl", chrono::TimeDelta::minutes(2));
//! let report = run_detect(&config)?;
//! for r in report.event_windows() {
//!     println!("{} {:.3} {:?}", r.start, r.overall_change, r.event_words);
//! }
//! # Ok::<(), eventwin_core::Error>(())
//! ```

pub mod clustering;
pub mod corpus;
pub mod detection;
pub mod embedding;
pub mod evaluation;
pub mod pipeline;

mod error;

pub use error::{Error, Result};

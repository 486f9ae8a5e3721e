//! Turns natural-language REST API documentation into validated tool
//! descriptors.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`ingest`]: load pages and strip markup, filter and classify them.
//! 2. [`extract`]: produce an [`ApiSpec`] per page through a pluggable backend.
//! 3. [`evaluate`]: score extracted specs against ground truth.
//! 4. `toolgen`: turn endpoints into tool descriptors and export them.
//! 5. [`validate`]: call each tool, judge the response, label failures.
//! 6. [`infer`]: fill missing parameter values from a knowledge base of
//!    verified parameters.
//!
//! [`pipeline`] wires the stages to an on-disk project layout.

pub mod embed;
pub mod encoding;
pub mod evaluate;
pub mod extract;
pub mod fixtures;
pub mod ingest;
pub mod infer;
pub mod jsonl;
pub mod judge;
pub mod mock;
pub mod model;
pub mod net;
pub mod pipeline;
pub mod prompts;
pub mod ratelimit;
pub mod remote;
pub mod template;
pub mod toolgen;
pub mod validate;

pub use embed::{cosine_similarity, EmbeddingProvider};
pub use extract::{extract_spec, repair_json, ExtractionBackend, ExtractionResult};
pub use ingest::{load_and_clean, ApiDocument, DocCategory};
pub use judge::JudgeBackend;
pub use model::{resolve_url, validate_spec, ApiSpec, Endpoint, Parameter, ResolvedUrl, Scalar};
pub use template::{parse_url_template, UrlTemplate};

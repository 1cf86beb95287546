//! Training-free compositional image-text matching, core algorithms.
//!
//! This crate holds everything that does not need an operating system:
//! sentence parsing into subject/predicate/object triplets, entity-to-region
//! grounding over dense captions, counterfactual subimage construction
//! (masking one entity's regions and filling the rest), the weighted
//! embedding composition that produces the final matching score, and the
//! evaluation metrics used by the benchmark harness.
//!
//! The crate is `no_std`-compatible (with `alloc`); IO, HTTP clients,
//! caching, dataset files, and the CLI live in the companion `comclip`
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod compose;
pub mod embed;
pub mod ground;
pub mod image;
pub mod metrics;
pub mod parse;
pub mod text;

pub use compose::{CompositionConfig, CompositionResult, SubimageConfig, WeightingMode};
pub use embed::EmbeddingVector;
pub use ground::{DenseCaption, GroundingMap};
pub use image::{BoxRegion, FillPolicy, ImageBuf, Subimage, SubimageKind};
pub use parse::{EntityTriple, ParseSource, ParsedSentence, Role};

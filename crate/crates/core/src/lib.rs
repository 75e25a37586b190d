//! Classification phase of a two-camera tool-use pipeline.
//!
//! The crate ingests per-frame object-detection streams from a top-view
//! and a close-up camera, derives per-hand "global ground truth" label
//! timelines, and classifies which tool each of four hands is holding
//! at every frame. Two classifier families are provided: a rule-based
//! fusion baseline with a memory component, and a trainable classifier
//! that fuses both cameras through a pair of recurrent networks running
//! at different timescales. A scenario simulator generates synthetic
//! sessions so the whole pipeline can be trained and evaluated without
//! real recordings.
//!
//! Module map:
//! - [`model`]: hands, tool states, the 20-class taxonomy, detections,
//!   label timelines.
//! - [`ingest`]: JSONL detection streams, CSV event intervals, session
//!   bundles and manifests.
//! - [`sim`]: seeded scenario simulator with occlusion and noise models.
//! - [`naive`]: rule-based per-frame fusion baseline.
//! - [`features`]: 25-element detection vectors and dual-timescale
//!   window extraction.
//! - [`neural`]: recurrent cells, backpropagation through time, the
//!   dual-timescale classifier, training and prediction.
//! - [`eval`]: metric suite, cross-validation folds, experiment runner
//!   and report rendering.

pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod model;
pub mod naive;
pub mod neural;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    class_decode, class_encode, BBox, CameraId, DetectionClass, DetectionRecord, EventInterval,
    HandId, LabelTimeline, ToolState,
};

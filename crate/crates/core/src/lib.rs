//! Curation, conditioning and training-signal engine for audio-driven avatar
//! video datasets.
//!
//! The crate is organised by pipeline stage:
//!
//! * [`model`]: the unified annotation schema, JSONL record I/O and schema checks.
//! * [`annotate`]: offline annotator orchestration over a dependency DAG.
//! * [`validate`]: the staged clip-level filter chain and pixel statistics.
//! * [`sample`]: task subsets, window sampling, caption selection, manifests.
//! * [`multiperson`]: dynamic-track filtering, single-speaker segments, audio binding.
//! * [`silent`]: two-model silence agreement and video-level aggregation.
//! * [`emotion`]: hard exclusions, category priority, top-N scoring, thresholds.
//! * [`audio_align`]: encoder hidden-state pooling, resampling and latent compression.
//! * [`grpo`]: per-frame group-relative advantages, rollout planning, flow targets.

pub mod annotate;
pub mod audio_align;
pub mod config;
pub mod emotion;
pub mod fixture;
pub mod grpo;
pub mod jsonl;
pub mod model;
pub mod multiperson;
pub mod pipeline;
pub mod sample;
pub mod seed;
pub mod silent;
pub mod tensor_io;
pub mod validate;

pub use model::{
    AnnotationSet, AudioAnnotation, BodyAnnotation, CameraAnnotation, CaptionSet, ClipWindow,
    FaceAnnotation, MotionAnnotation, QualityAnnotation, RecordError, SourceCategory,
    SyncAnnotation, TaskProfileKind, TrainingSample, VideoRecord, Violation, SCHEMA_VERSION,
};

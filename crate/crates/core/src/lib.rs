//! Track a selected segmentation mask through a video's frames, cut the
//! object out, and composite it onto a second video.
//!
//! The crate works on frame directories and a JSON candidate manifest
//! produced by any segmentation model; it never runs a model itself.

pub mod compositing;
pub mod error;
pub mod io;
pub mod manifest;
pub mod mask;
pub mod metrics;
pub mod preview;
pub mod rle;
pub mod session;
pub mod synth;
pub mod tracking;

pub use compositing::{
    background_mask_for_inpainting, composite_sequence, cutout, overlay, union_labels,
    CompositeJob, CompositeMode, MismatchPolicy,
};
pub use error::{Error, ErrorClass, Result};
pub use io::{load_frame, load_mask_image, write_frame, write_mask_image, Frame};
pub use manifest::{
    parse_manifest, write_manifest, Candidate, CandidateMeta, FrameCandidates, Manifest,
    ManifestDir, MaskSource,
};
pub use mask::{BBox, BinaryMask};
pub use metrics::{mean_iou, panoptic_quality, trace_vs_ground_truth, LabeledSegmentation, PanopticReport};
pub use session::{Choice, OnReselect, Phase, Progress, RunConfig, Session};
pub use tracking::{
    choose_mask, needs_reselection, track, EventKind, ReselectionResolver, Resolution,
    TrackingPolicy, TrackingTrace,
};

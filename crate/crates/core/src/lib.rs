//! Detection and temporal segmentation of non-nutritive sucking (NNS) in
//! infant video.
//!
//! The pipeline runs face-box propagation and stabilization, dense optical
//! flow with an HSV encoding, window classification, score aggregation into
//! events, and evaluation against annotations. [`synth`] renders videos with
//! known ground truth for testing all of it.

pub mod annotations;
pub mod classifier;
pub mod error;
pub mod events;
pub mod imgproc;
pub mod metrics;
pub mod optical_flow;
pub mod pipeline;
pub mod segmenter;
pub mod stabilizer;
pub mod synth;
pub mod tracker;
pub mod video_io;

pub use annotations::{AnnotationSet, ClipClass, ClipEntry, ClipManifest, SamplePolicy};
pub use classifier::{Backend, BaselineModel, Window, WindowScore};
pub use error::{Error, Result};
pub use events::{Event, EventList, EventsBySource, Label};
pub use metrics::EvalReport;
pub use optical_flow::{FlowField, FlowParams, FlowSequence, HsvFrame, HsvNorm};
pub use segmenter::{AggregationMode, SegmentParams, SegmentTrack, WindowSpec};
pub use stabilizer::{BoxTrack, Trajectory};
pub use synth::{SynthSpec, SynthVideo};
pub use tracker::{BoundingBox, Point2};
pub use video_io::{Frame, FrameSequence};

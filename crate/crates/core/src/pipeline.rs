//! Composition of the preprocessing stages: box propagation, trajectory
//! estimation, stabilized cropping and flow encoding.

use crate::error::Result;
use crate::optical_flow::{clip_flow_encode, FlowParams, FlowSequence, HsvNorm};
use crate::stabilizer::{estimate_trajectory, stabilized_crop, BoxTrack, CropParams, TrajectoryParams};
use crate::tracker::{propagate_bbox, Detections, MosseParams};
use crate::video_io::FrameSequence;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessParams {
    pub mosse: MosseParams,
    pub trajectory: TrajectoryParams,
    pub smooth_window_s: f64,
    pub crop: CropParams,
    pub flow: FlowParams,
    pub norm: HsvNorm,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self {
            mosse: MosseParams::default(),
            trajectory: TrajectoryParams::default(),
            smooth_window_s: 1.5,
            crop: CropParams::default(),
            flow: FlowParams::default(),
            norm: HsvNorm::PerFrame,
        }
    }
}

/// Box track with its smoothed trajectory, and the stabilized face crops.
pub fn stabilize(
    seq: &FrameSequence,
    detections: &Detections,
    params: &PreprocessParams,
) -> Result<(BoxTrack, FrameSequence)> {
    let track = propagate_bbox(seq, detections, &params.mosse)?;
    let raw = estimate_trajectory(seq, &params.trajectory)?;
    let track = track.with_trajectory(raw, params.smooth_window_s, seq.fps())?;
    let crops = stabilized_crop(seq, &track, &params.crop)?;
    Ok((track, crops))
}

/// Stabilized crops encoded as flow, one field per adjacent frame pair.
pub fn preprocess(seq: &FrameSequence, detections: &Detections, params: &PreprocessParams) -> Result<FlowSequence> {
    let (_, crops) = stabilize(seq, detections, params)?;
    clip_flow_encode(&crops, &params.flow, params.norm)
}

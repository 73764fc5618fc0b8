//! Inputs shared by the benchmarks.

use nns_core::events::Event;
use nns_core::synth::texture::value_noise;
use nns_core::video_io::Frame;

/// Value-noise texture translated by `shift` pixels.
pub fn textured(width: usize, height: usize, shift: (f32, f32)) -> Frame {
    Frame::from_fn(width, height, |x, y| {
        value_noise(x as f32 - shift.0, y as f32 - shift.1, 3, 7.0)
    })
}

/// `n` evenly spaced events of length `len_s`, every one shifted by `offset_s`.
pub fn event_train(n: usize, len_s: f64, offset_s: f64) -> Vec<Event> {
    (0..n)
        .map(|i| {
            let s = i as f64 * 2.0 * len_s + offset_s;
            Event::nns(s, s + len_s).expect("positive length")
        })
        .collect()
}

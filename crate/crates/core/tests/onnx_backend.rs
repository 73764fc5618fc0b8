#![cfg(feature = "onnx")]

use std::path::PathBuf;

use nns_core::classifier::{classify_window, sigmoid, Backend, OnnxModel, Window};
use nns_core::imgproc::Plane;
use nns_core::{Error, HsvFrame};

fn model_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/onnx/tiny.onnx")
}

fn window(frames: usize, size: usize, value: f32) -> Window {
    let f = HsvFrame {
        hue: Plane::zeros(size, size),
        saturation: Plane::filled(size, size, 1.0),
        value: Plane::filled(size, size, value),
        scale: 1.0,
    };
    Window {
        source: "clip".into(),
        start_s: 0.0,
        end_s: 2.5,
        hsv_frames: vec![f; frames],
    }
}

#[test]
fn logit_model_gets_a_sigmoid() {
    let backend = Backend::Onnx(OnnxModel::load(&model_path()).unwrap());
    for v in [0.0f32, 0.25, 1.0] {
        let got = classify_window(&backend, &window(25, 16, v)).unwrap().score;
        // the fixture computes 8 * mean(input) - 2
        let mean = (0.0 + 1.0 + v as f64) / 3.0;
        let expect = sigmoid(8.0 * mean - 2.0);
        assert!((got - expect).abs() < 1e-5, "{got} vs {expect}");
        assert!((0.0..=1.0).contains(&got));
    }
}

#[test]
fn wrong_shapes_are_refused() {
    let backend = Backend::Onnx(OnnxModel::load(&model_path()).unwrap());
    assert!(matches!(
        classify_window(&backend, &window(24, 16, 0.5)),
        Err(Error::ShapeMismatch { .. })
    ));
    assert!(matches!(
        classify_window(&backend, &window(25, 32, 0.5)),
        Err(Error::ShapeMismatch { .. })
    ));
}

#[test]
fn missing_sidecar_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.onnx");
    std::fs::copy(model_path(), &path).unwrap();
    assert!(OnnxModel::load(&path).is_err());
}

#[test]
fn backend_spec_strings() {
    let spec = format!("onnx:{}", model_path().display());
    assert!(matches!(Backend::load(&spec), Ok(Backend::Onnx(_))));
    assert!(Backend::load("nonsense").is_err());
    assert!(Backend::load("magic:foo").is_err());
}

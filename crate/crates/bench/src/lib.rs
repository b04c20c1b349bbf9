//! Deterministic inputs shared by the criterion benches in `benches/`.

use kdsense_core::Window;
use ndarray::{Array2, Array3};

fn value(i: usize) -> f64 {
    ((i as f64) * 0.37).sin() + 0.25 * ((i as f64) * 0.011).cos()
}

pub fn window(channels: usize, len: usize) -> Window {
    Window {
        data: Array2::from_shape_fn((channels, len), |(c, t)| value(c * len + t)),
        label: 1,
        subject_id: "bench".into(),
    }
}

pub fn batch(batch: usize, channels: usize, len: usize) -> Array3<f64> {
    Array3::from_shape_fn((batch, channels, len), |(b, c, t)| value((b * channels + c) * len + t))
}

pub fn logits(rows: usize, classes: usize, offset: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, classes), |(r, k)| 3.0 * value(offset + r * classes + k))
}

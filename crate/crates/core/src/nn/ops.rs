use ndarray::{Array2, Array3, Axis, Zip};

pub fn relu(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Gradient of ReLU given the pre-activation input.
pub fn relu_backward(x: &Array3<f64>, dy: &Array3<f64>) -> Array3<f64> {
    let mut dx = dy.clone();
    Zip::from(&mut dx).and(x).for_each(|d, &v| {
        if v <= 0.0 {
            *d = 0.0
        }
    });
    dx
}

/// Mean over the time axis: `(B, C, T) -> (B, C)`.
pub fn global_avg_pool(x: &Array3<f64>) -> Array2<f64> {
    x.mean_axis(Axis(2)).expect("non-empty time axis")
}

pub fn global_avg_pool_backward(dy: &Array2<f64>, t: usize) -> Array3<f64> {
    let (b, c) = dy.dim();
    let scale = 1.0 / t as f64;
    Array3::from_shape_fn((b, c, t), |(bi, ci, _)| dy[[bi, ci]] * scale)
}

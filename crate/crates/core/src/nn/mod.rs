//! Minimal 1-D convolutional building blocks with explicit backward passes.
//!
//! Activations are `(batch, channels, time)` arrays of `f64`. Layers that
//! need intermediate values for the backward pass cache them during a
//! training-mode forward; `infer` paths are cache-free and take `&self`.

mod batchnorm;
mod conv;
mod linear;
mod ops;
mod optim;

pub use batchnorm::BatchNorm1d;
pub use conv::Conv1d;
pub use linear::Linear;
pub use ops::{global_avg_pool, global_avg_pool_backward, relu, relu_backward};
pub use optim::Sgd;

/// A trainable tensor stored flat in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            value: vec![0.0; n],
            grad: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        let mut p = Self::zeros(shape);
        p.value.fill(v);
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Visitor over a module's trainable parameters and non-trainable buffers,
/// always in the same order.
pub trait Parameters {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param));
    fn visit_buffers<'a>(&'a self, _f: &mut dyn FnMut(&'a [f64])) {}
    fn visit_buffers_mut(&mut self, _f: &mut dyn FnMut(&mut [f64])) {}
}

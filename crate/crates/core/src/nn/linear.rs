use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use super::{Param, Parameters};

/// Fully connected layer `y = x W^T + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Param,
    pub bias: Param,
    cache: Option<Array2<f64>>,
}

impl Linear {
    pub fn new(in_features: usize, out_features: usize) -> Self {
        Self {
            in_features,
            out_features,
            weight: Param::zeros(&[out_features, in_features]),
            bias: Param::zeros(&[out_features]),
            cache: None,
        }
    }

    /// Uniform in `±1/sqrt(in_features)` for the weights, zero bias.
    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let bound = 1.0 / (self.in_features as f64).sqrt();
        for v in &mut self.weight.value {
            *v = rng.random_range(-bound..bound);
        }
        self.bias.value.fill(0.0);
    }

    fn w(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.out_features, self.in_features), &self.weight.value).unwrap()
    }

    pub fn infer(&self, x: &Array2<f64>) -> Array2<f64> {
        let b = ArrayView1::from(&self.bias.value);
        x.dot(&self.w().t()) + &b
    }

    pub fn forward(&mut self, x: &Array2<f64>) -> Array2<f64> {
        self.cache = Some(x.clone());
        self.infer(x)
    }

    pub fn backward(&mut self, dy: &Array2<f64>) -> Array2<f64> {
        let x = self.cache.take().expect("linear backward without forward");
        let dw = dy.t().dot(&x);
        for (g, d) in self.weight.grad.iter_mut().zip(dw.iter()) {
            *g += d;
        }
        let db: Array1<f64> = dy.sum_axis(ndarray::Axis(0));
        for (g, d) in self.bias.grad.iter_mut().zip(db.iter()) {
            *g += d;
        }
        dy.dot(&self.w())
    }
}

impl Parameters for Linear {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

use ndarray::Array3;

use super::{Param, Parameters};

/// Batch normalisation over the batch and time axes, per channel.
///
/// Training mode normalises with batch statistics and updates the running
/// estimates (momentum 0.1, unbiased variance); inference uses the running
/// estimates only.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub channels: usize,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    x_hat: Array3<f64>,
    inv_std: Vec<f64>,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::filled(&[channels], 1.0),
            beta: Param::zeros(&[channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn infer(&self, x: &Array3<f64>) -> Array3<f64> {
        let mut y = x.to_owned();
        for c in 0..self.channels {
            let scale = self.gamma.value[c] / (self.running_var[c] + self.eps).sqrt();
            let shift = self.beta.value[c] - self.running_mean[c] * scale;
            y.index_axis_mut(ndarray::Axis(1), c)
                .mapv_inplace(|v| v * scale + shift);
        }
        y
    }

    pub fn forward(&mut self, x: &Array3<f64>) -> Array3<f64> {
        let (b, c, t) = x.dim();
        assert_eq!(c, self.channels, "batchnorm channels");
        let n = (b * t) as f64;
        let mut x_hat = x.to_owned();
        let mut y = x.to_owned();
        let mut inv_std = vec![0.0; c];
        for ch in 0..c {
            let xs = x.index_axis(ndarray::Axis(1), ch);
            let mean = xs.sum() / n;
            let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[ch] = is;
            let (g, bt) = (self.gamma.value[ch], self.beta.value[ch]);
            x_hat
                .index_axis_mut(ndarray::Axis(1), ch)
                .mapv_inplace(|v| (v - mean) * is);
            ndarray::Zip::from(y.index_axis_mut(ndarray::Axis(1), ch))
                .and(x_hat.index_axis(ndarray::Axis(1), ch))
                .for_each(|y, &xh| *y = g * xh + bt);
            let unbiased = if n > 1.0 { var * n / (n - 1.0) } else { var };
            self.running_mean[ch] = (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean;
            self.running_var[ch] = (1.0 - self.momentum) * self.running_var[ch] + self.momentum * unbiased;
        }
        self.cache = Some(BnCache { x_hat, inv_std });
        y
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let cache = self.cache.take().expect("batchnorm backward without forward");
        let (b, c, t) = dy.dim();
        let n = (b * t) as f64;
        let mut dx = Array3::zeros((b, c, t));
        for ch in 0..c {
            let dys = dy.index_axis(ndarray::Axis(1), ch);
            let xh = cache.x_hat.index_axis(ndarray::Axis(1), ch);
            let sum_dy = dys.sum();
            let sum_dy_xh: f64 = ndarray::Zip::from(&dys).and(&xh).fold(0.0, |acc, a, b| acc + a * b);
            self.gamma.grad[ch] += sum_dy_xh;
            self.beta.grad[ch] += sum_dy;
            let k = self.gamma.value[ch] * cache.inv_std[ch] / n;
            ndarray::Zip::from(dx.index_axis_mut(ndarray::Axis(1), ch))
                .and(&dys)
                .and(&xh)
                .for_each(|d, &g, &x| *d = k * (n * g - sum_dy - x * sum_dy_xh));
        }
        dx
    }
}

impl Parameters for BatchNorm1d {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param)) {
        f(&self.gamma);
        f(&self.beta);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }

    fn visit_buffers<'a>(&'a self, f: &mut dyn FnMut(&'a [f64])) {
        f(&self.running_mean);
        f(&self.running_var);
    }

    fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(&mut self.running_mean);
        f(&mut self.running_var);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_output_is_standardised() {
        let mut bn = BatchNorm1d::new(2);
        let x = Array3::from_shape_fn((3, 2, 5), |(b, c, t)| (b * 10 + t) as f64 * (c + 1) as f64 + 4.0);
        let y = bn.forward(&x);
        for c in 0..2 {
            let col = y.index_axis(ndarray::Axis(1), c);
            let m = col.mean().unwrap();
            let v = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(m.abs() < 1e-12);
            assert!((v - 1.0).abs() < 1e-3);
        }
        assert!(bn.running_mean[0] > 0.0);
    }

    #[test]
    fn fresh_infer_is_near_identity() {
        let bn = BatchNorm1d::new(1);
        let x = Array3::from_elem((1, 1, 3), 2.0);
        let y = bn.infer(&x);
        assert!((y[[0, 0, 0]] - 2.0 / (1.0f64 + 1e-5).sqrt()).abs() < 1e-12);
    }
}

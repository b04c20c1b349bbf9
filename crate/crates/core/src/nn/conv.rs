use ndarray::{Array2, Array3, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Param, Parameters};

/// Bias-free 1-D convolution, `(B, in, T) -> (B, out, T_out)` with
/// `T_out = (T + 2 * padding - kernel) / stride + 1`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub weight: Param,
    cache: Option<ConvCache>,
}

#[derive(Debug, Clone)]
struct ConvCache {
    col: Array2<f64>,
    batch: usize,
    in_len: usize,
}

impl Conv1d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        assert!(kernel >= 1 && stride >= 1);
        Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            weight: Param::zeros(&[out_channels, in_channels, kernel]),
            cache: None,
        }
    }

    /// He-normal initialisation, fan-out mode.
    pub fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let fan_out = (self.out_channels * self.kernel) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_out).sqrt()).unwrap();
        for v in &mut self.weight.value {
            *v = normal.sample(rng);
        }
    }

    pub fn out_len(&self, t: usize) -> usize {
        (t + 2 * self.padding).saturating_sub(self.kernel) / self.stride + 1
    }

    fn weight_matrix(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.out_channels, self.in_channels * self.kernel), &self.weight.value)
            .expect("weight shape")
    }

    fn im2col(&self, x: &Array3<f64>) -> Array2<f64> {
        let (b, c, t) = x.dim();
        assert_eq!(c, self.in_channels, "conv input channels");
        let t_out = self.out_len(t);
        let x = x.as_standard_layout();
        let xs = x.as_slice().unwrap();
        let cols = b * t_out;
        let mut col = vec![0.0; c * self.kernel * cols];
        for ci in 0..c {
            for j in 0..self.kernel {
                let row = &mut col[(ci * self.kernel + j) * cols..][..cols];
                for bi in 0..b {
                    let src = &xs[(bi * c + ci) * t..][..t];
                    let dst = &mut row[bi * t_out..][..t_out];
                    for (to, d) in dst.iter_mut().enumerate() {
                        let pos = (to * self.stride + j) as isize - self.padding as isize;
                        if pos >= 0 && (pos as usize) < t {
                            *d = src[pos as usize];
                        }
                    }
                }
            }
        }
        Array2::from_shape_vec((c * self.kernel, cols), col).unwrap()
    }

    fn to_output(&self, out: Array2<f64>, b: usize, t_out: usize) -> Array3<f64> {
        // (out, B * T_out) -> (B, out, T_out)
        let o = self.out_channels;
        let src = out.as_slice().unwrap();
        let mut dst = vec![0.0; b * o * t_out];
        for oi in 0..o {
            for bi in 0..b {
                dst[(bi * o + oi) * t_out..][..t_out]
                    .copy_from_slice(&src[oi * b * t_out + bi * t_out..][..t_out]);
            }
        }
        Array3::from_shape_vec((b, o, t_out), dst).unwrap()
    }

    pub fn infer(&self, x: &Array3<f64>) -> Array3<f64> {
        let (b, _, t) = x.dim();
        let col = self.im2col(x);
        let out = self.weight_matrix().dot(&col);
        self.to_output(out, b, self.out_len(t))
    }

    pub fn forward(&mut self, x: &Array3<f64>) -> Array3<f64> {
        let (b, _, t) = x.dim();
        let col = self.im2col(x);
        let out = self.weight_matrix().dot(&col);
        self.cache = Some(ConvCache { col, batch: b, in_len: t });
        self.to_output(out, b, self.out_len(t))
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let cache = self.cache.take().expect("conv backward without forward");
        let (b, o, t_out) = dy.dim();
        assert_eq!((b, o), (cache.batch, self.out_channels));
        let dy = dy.as_standard_layout();
        let dys = dy.as_slice().unwrap();
        let mut dy_mat = vec![0.0; o * b * t_out];
        for oi in 0..o {
            for bi in 0..b {
                dy_mat[oi * b * t_out + bi * t_out..][..t_out]
                    .copy_from_slice(&dys[(bi * o + oi) * t_out..][..t_out]);
            }
        }
        let dy_mat = Array2::from_shape_vec((o, b * t_out), dy_mat).unwrap();

        let dw = dy_mat.dot(&cache.col.t());
        for (g, d) in self.weight.grad.iter_mut().zip(dw.iter()) {
            *g += d;
        }

        let dcol = self.weight_matrix().t().dot(&dy_mat);
        let dcol = dcol.as_slice().unwrap();
        let (c, t) = (self.in_channels, cache.in_len);
        let cols = b * t_out;
        let mut dx = vec![0.0; b * c * t];
        for ci in 0..c {
            for j in 0..self.kernel {
                let row = &dcol[(ci * self.kernel + j) * cols..][..cols];
                for bi in 0..b {
                    let dst = &mut dx[(bi * c + ci) * t..][..t];
                    for (to, &g) in row[bi * t_out..][..t_out].iter().enumerate() {
                        let pos = (to * self.stride + j) as isize - self.padding as isize;
                        if pos >= 0 && (pos as usize) < t {
                            dst[pos as usize] += g;
                        }
                    }
                }
            }
        }
        Array3::from_shape_vec((b, c, t), dx).unwrap()
    }
}

impl Parameters for Conv1d {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param)) {
        f(&self.weight)
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        f(&mut self.weight)
    }
}

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

use super::RngStream;
use crate::dataio::Window;

/// Largest segment/shift length allowed by a fractional bound.
fn frac_len(frac: f64, t: usize) -> usize {
    // the epsilon keeps e.g. 0.29 * 100 from flooring to 28
    ((frac * t as f64) + 1e-9).floor().max(0.0) as usize
}

/// Segment chosen by one removal draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RemovalDraw {
    pub start: usize,
    pub len: usize,
}

impl RemovalDraw {
    fn draw(rng: &mut RngStream, max_frac: f64, t: usize) -> Option<Self> {
        let max_len = frac_len(max_frac, t).min(t);
        if max_len < 1 {
            return None;
        }
        let len = rng.int_inclusive(1, max_len);
        let start = rng.int_inclusive(0, t - len);
        Some(Self { start, len })
    }
}

/// Flattens `data[:, start..start+len]` to each channel's value at `start`.
pub fn removal_with(data: &Array2<f64>, seg: RemovalDraw) -> Array2<f64> {
    let mut out = data.clone();
    for mut row in out.rows_mut() {
        let head = row[seg.start];
        for i in seg.start..seg.start + seg.len {
            row[i] = head;
        }
    }
    out
}

/// Removal: a random run of consecutive samples is overwritten with the
/// amplitude of its first sample. The segment is shared by all channels.
pub fn removal(w: &Window, rng: &mut RngStream, max_frac: f64) -> Window {
    let data = match RemovalDraw::draw(rng, max_frac, w.data.ncols()) {
        Some(seg) => removal_with(&w.data, seg),
        None => w.data.clone(),
    };
    Window {
        data,
        label: w.label,
        subject_id: w.subject_id.clone(),
    }
}

/// Adds i.i.d. `N(0, sigma^2)` to every entry, drawing from `rng`.
pub fn noise_injection_with(data: &Array2<f64>, sigma: f64, rng: &mut RngStream) -> Array2<f64> {
    if sigma == 0.0 {
        return data.clone();
    }
    let mut out = data.clone();
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += sigma * z;
    }
    out
}

/// Noise injection: one standard deviation drawn uniformly from
/// `[0, max_std]` per window, then Gaussian noise on every sample.
pub fn noise_injection(w: &Window, rng: &mut RngStream, max_std: f64) -> Window {
    let sigma = rng.uniform(0.0, max_std.max(0.0));
    Window {
        data: noise_injection_with(&w.data, sigma, rng),
        label: w.label,
        subject_id: w.subject_id.clone(),
    }
}

/// Circular right roll: `out[:, i] = data[:, (i - k) mod T]`.
pub fn shift_with(data: &Array2<f64>, k: usize) -> Array2<f64> {
    let t = data.ncols();
    if t == 0 {
        return data.clone();
    }
    let k = k % t;
    Array2::from_shape_fn(data.dim(), |(c, i)| data[[c, (i + t - k) % t]])
}

/// Shifting: all channels rolled jointly by `k` drawn from
/// `0..=floor(max_frac * T)`.
pub fn shift(w: &Window, rng: &mut RngStream, max_frac: f64) -> Window {
    let t = w.data.ncols();
    let k = rng.int_inclusive(0, frac_len(max_frac, t).min(t));
    Window {
        data: shift_with(&w.data, k),
        label: w.label,
        subject_id: w.subject_id.clone(),
    }
}

/// Removal followed by shifting.
pub fn mix1(w: &Window, rng: &mut RngStream, max_removal_frac: f64, max_shift_frac: f64) -> Window {
    let r = removal(w, rng, max_removal_frac);
    shift(&r, rng, max_shift_frac)
}

/// Removal, then noise injection, then shifting.
pub fn mix2(
    w: &Window,
    rng: &mut RngStream,
    max_removal_frac: f64,
    max_noise_std: f64,
    max_shift_frac: f64,
) -> Window {
    let r = removal(w, rng, max_removal_frac);
    let n = noise_injection(&r, rng, max_noise_std);
    shift(&n, rng, max_shift_frac)
}

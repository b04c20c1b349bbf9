use ndarray::Array2;

use crate::error::{Error, Result};

/// Index `m` of the equal-width bin `(m/n, (m+1)/n]` holding `conf`; zero
/// confidence falls in the first bin.
fn bin_of(conf: f64, n_bins: usize) -> usize {
    let n = n_bins as f64;
    let mut m = ((conf * n).ceil() as usize).saturating_sub(1).min(n_bins - 1);
    // settle floating-point edge cases against the exact boundaries
    while m > 0 && conf <= m as f64 / n {
        m -= 1;
    }
    while m + 1 < n_bins && conf > (m + 1) as f64 / n {
        m += 1;
    }
    m
}

/// Expected calibration error in percent.
///
/// Samples are binned by max-probability into `n_bins` equal-width bins;
/// `ECE = sum_m |B_m|/n * |acc(B_m) - conf(B_m)|`, times 100.
pub fn ece(probs: &Array2<f64>, labels: &[usize], n_bins: usize) -> Result<f64> {
    let (n, k) = probs.dim();
    if n != labels.len() {
        return Err(Error::ShapeMismatch(format!("{n} rows, {} labels", labels.len())));
    }
    if n == 0 {
        return Err(Error::Empty("ece of no samples".into()));
    }
    if n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be >= 1".into()));
    }
    let mut count = vec![0usize; n_bins];
    let mut correct = vec![0usize; n_bins];
    let mut conf_sum = vec![0.0; n_bins];
    for (row, &label) in probs.rows().into_iter().zip(labels) {
        let sum: f64 = row.sum();
        if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "probability row does not sum to 1 (sum = {sum})"
            )));
        }
        if label >= k {
            return Err(Error::InvalidArgument(format!("label {label} >= {k} classes")));
        }
        let pred = super::argmax(row.as_slice().unwrap_or(&row.to_vec()));
        let conf = row[pred];
        let b = bin_of(conf, n_bins);
        count[b] += 1;
        conf_sum[b] += conf;
        if pred == label {
            correct[b] += 1;
        }
    }
    let total: f64 = (0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let c = count[b] as f64;
            (c / n as f64) * (correct[b] as f64 / c - conf_sum[b] / c).abs()
        })
        .sum();
    Ok(100.0 * total)
}

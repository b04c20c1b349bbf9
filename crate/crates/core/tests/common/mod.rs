//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain softmax without max subtraction; callers keep logits moderate.
fn naive_softmax(a: &[f64], tau: f64) -> Vec<f64> {
    let e: Vec<f64> = a.iter().map(|v| (v / tau).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// `(1-lam) * -ln p_s[y] + lam * tau^2 * sum p_t ln(p_t / p_s^tau)`.
pub fn kd_loss_oracle(student: &[f64], teacher: &[f64], y: usize, tau: f64, lam: f64) -> f64 {
    let p = naive_softmax(student, 1.0);
    let ps = naive_softmax(student, tau);
    let pt = naive_softmax(teacher, tau);
    let ce = -p[y].ln();
    let kl: f64 = pt.iter().zip(&ps).map(|(t, s)| t * (t / s).ln()).sum();
    (1.0 - lam) * ce + lam * tau * tau * kl
}

/// ECE by explicit scan over every bin interval `(m/n, (m+1)/n]`.
pub fn ece_oracle(probs: &Array2<f64>, labels: &[usize], n_bins: usize) -> f64 {
    let n = labels.len();
    let mut conf = Vec::with_capacity(n);
    let mut hit = Vec::with_capacity(n);
    for (i, row) in probs.rows().into_iter().enumerate() {
        let mut best = 0;
        for k in 0..row.len() {
            if row[k] > row[best] {
                best = k;
            }
        }
        conf.push(row[best]);
        hit.push(if best == labels[i] { 1.0 } else { 0.0 });
    }
    let mut total = 0.0;
    for m in 0..n_bins {
        let lo = m as f64 / n_bins as f64;
        let hi = (m + 1) as f64 / n_bins as f64;
        let members: Vec<usize> = (0..n)
            .filter(|&i| (conf[i] > lo || (m == 0 && conf[i] >= 0.0)) && conf[i] <= hi)
            .collect();
        if members.is_empty() {
            continue;
        }
        let c = members.len() as f64;
        let acc: f64 = members.iter().map(|&i| hit[i]).sum::<f64>() / c;
        let avg: f64 = members.iter().map(|&i| conf[i]).sum::<f64>() / c;
        total += c / n as f64 * (acc - avg).abs();
    }
    100.0 * total
}

/// Random probability matrix; some rows are sharpened so high-confidence
/// bins are populated.
pub fn random_probs(r: &mut ChaCha8Rng, n: usize, k: usize) -> (Array2<f64>, Vec<usize>) {
    let mut p = Array2::zeros((n, k));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let sharp = r.random_range(0.5..8.0);
        let raw: Vec<f64> = (0..k).map(|_| (r.random::<f64>() * sharp).exp()).collect();
        let z: f64 = raw.iter().sum();
        for j in 0..k {
            p[[i, j]] = raw[j] / z;
        }
        labels.push(r.random_range(0..k));
    }
    (p, labels)
}

/// Counts window start positions one by one.
pub fn brute_force_windows(t: usize, window: usize, step: usize) -> usize {
    let mut count = 0;
    let mut start = 0;
    while start + window <= t {
        count += 1;
        start += step;
    }
    count
}

/// Minimal JSON reader for the frozen Welch fixture.
pub struct WelchCase {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub t: f64,
    pub p: f64,
}

pub fn welch_reference() -> Vec<WelchCase> {
    let text = include_str!("../data/welch_reference.json");
    let v: serde_json::Value = serde_json::from_str(text).unwrap();
    let nums = |x: &serde_json::Value| -> Vec<f64> {
        x.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
    };
    v["cases"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| WelchCase {
            a: nums(&c["a"]),
            b: nums(&c["b"]),
            t: c["t"].as_f64().unwrap(),
            p: c["p"].as_f64().unwrap(),
        })
        .collect()
}

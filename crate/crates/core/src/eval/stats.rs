use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// Mean and sample standard deviation of run-level accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// `n - 1` denominator; zero for a single run.
    pub std: f64,
    pub n: usize,
    pub values: Vec<f64>,
}

impl Aggregate {
    /// `"69.49±0.22"`.
    pub fn format(&self) -> String {
        format!("{:.2}±{:.2}", self.mean, self.std)
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::Empty("aggregate of no runs".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("run value".into()));
    }
    let (mean, var) = mean_var(values);
    Ok(Aggregate {
        mean,
        std: var.sqrt(),
        n: values.len(),
        values: values.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Two-sided Welch (unequal variance) t-test of `a` against `b`.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(
            "each sample needs at least 2 values".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test sample".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let sa = va / a.len() as f64;
    let sb = vb / b.len() as f64;
    let se2 = sa + sb;
    if se2 == 0.0 {
        if ma == mb {
            return Ok(TTest {
                t: 0.0,
                df: (a.len() + b.len() - 2) as f64,
                p: 1.0,
            });
        }
        return Err(Error::Degenerate(
            "both samples have zero variance and different means".into(),
        ));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (sa * sa / (a.len() - 1) as f64 + sb * sb / (b.len() - 1) as f64);
    let p = if t == 0.0 {
        1.0
    } else {
        beta_reg(df / 2.0, 0.5, df / (df + t * t))
    };
    Ok(TTest {
        t,
        df,
        p: p.clamp(f64::MIN_POSITIVE, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[69.3, 69.5, 69.7]).unwrap();
        assert!((a.mean - 69.5).abs() < 1e-12 && (a.std - 0.2).abs() < 1e-12);
        assert_eq!(a.format(), "69.50±0.20");
        let one = aggregate(&[70.0]).unwrap();
        assert_eq!((one.mean, one.std), (70.0, 0.0));
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn identical_samples() {
        let r = welch_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
    }

    #[test]
    fn constant_samples() {
        assert_eq!(welch_ttest(&[2.0, 2.0], &[2.0, 2.0]).unwrap().p, 1.0);
        assert!(matches!(
            welch_ttest(&[2.0, 2.0], &[3.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(welch_ttest(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn symmetry_and_separation() {
        let a = [69.4, 69.6, 69.8];
        let b = [68.4, 68.6, 68.8];
        let ab = welch_ttest(&a, &b).unwrap();
        let ba = welch_ttest(&b, &a).unwrap();
        assert!(ab.p < 0.05);
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p, ba.p);
        // equal variances, equal sizes: df = 2n - 2
        assert!((ab.df - 4.0).abs() < 1e-12);
    }
}

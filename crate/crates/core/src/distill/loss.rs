use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which teacher snapshot a student distils from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KdMode {
    /// Fully trained teacher; student trained for the whole budget.
    Full,
    /// Early-stopped teacher; student trained for three quarters of the budget.
    Eskd,
}

impl std::fmt::Display for KdMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KdMode::Full => "full",
            KdMode::Eskd => "eskd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdConfig {
    /// Softmax temperature, >= 1.
    pub tau: f64,
    /// Weight of the distillation term, in [0, 1].
    pub lam: f64,
    pub mode: KdMode,
}

impl Default for KdConfig {
    fn default() -> Self {
        Self {
            tau: 4.0,
            lam: 0.7,
            mode: KdMode::Eskd,
        }
    }
}

impl KdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 1.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau {} must be >= 1", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.lam) {
            return Err(Error::InvalidArgument(format!("lambda {} outside [0, 1]", self.lam)));
        }
        Ok(())
    }
}

fn log_softmax(logits: &[f64], tau: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = logits.iter().map(|a| (a - max) / tau).collect();
    let lse = shifted.iter().map(|s| s.exp()).sum::<f64>().ln();
    shifted.iter().map(|s| s - lse).collect()
}

fn check_finite(logits: &[f64], what: &str) -> Result<()> {
    if logits.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// `softmax(logits / tau)`, computed with max subtraction.
pub fn softmax_with_temperature(logits: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature {tau} must be > 0")));
    }
    check_finite(logits, "logits")?;
    if logits.is_empty() {
        return Err(Error::Empty("logits".into()));
    }
    Ok(log_softmax(logits, tau).into_iter().map(f64::exp).collect())
}

/// Loss value and its gradient with respect to the student logits.
#[derive(Debug, Clone, PartialEq)]
pub struct KdLoss {
    pub total: f64,
    /// Hard-label cross-entropy `H(softmax(a_s), y)`.
    pub ce: f64,
    /// Distillation term `tau^2 * KL(f_t || f_s)`.
    pub kd: f64,
    pub grad: Vec<f64>,
}

/// `(1 - lam) * CE(a_s, y) + lam * tau^2 * KL(softmax(a_t / tau) || softmax(a_s / tau))`.
///
/// Teacher logits are constants: no gradient is returned for them.
pub fn kd_loss(student: &[f64], teacher: &[f64], label: usize, cfg: &KdConfig) -> Result<KdLoss> {
    if student.len() != teacher.len() {
        return Err(Error::ShapeMismatch(format!(
            "student has {} classes, teacher {}",
            student.len(),
            teacher.len()
        )));
    }
    if label >= student.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            student.len()
        )));
    }
    check_finite(student, "student logits")?;
    check_finite(teacher, "teacher logits")?;
    let tau = cfg.tau;

    let ls = log_softmax(student, 1.0);
    let ce = -ls[label];

    let ls_t = log_softmax(student, tau);
    let lt_t = log_softmax(teacher, tau);
    let kl: f64 = lt_t
        .iter()
        .zip(&ls_t)
        .map(|(&lt, &ls)| {
            let p = lt.exp();
            if p == 0.0 {
                0.0
            } else {
                p * (lt - ls)
            }
        })
        .sum();
    let kd = tau * tau * kl;

    // dCE/da = p - onehot;  d(tau^2 KL)/da = tau * (p_s^tau - p_t^tau)
    let grad = (0..student.len())
        .map(|k| {
            let hard = ls[k].exp() - if k == label { 1.0 } else { 0.0 };
            let soft = tau * (ls_t[k].exp() - lt_t[k].exp());
            (1.0 - cfg.lam) * hard + cfg.lam * soft
        })
        .collect();

    Ok(KdLoss {
        total: (1.0 - cfg.lam) * ce + cfg.lam * kd,
        ce,
        kd,
        grad,
    })
}

/// Batch-mean losses; `grad` is already divided by the batch size.
#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub total: f64,
    pub ce: f64,
    pub kd: f64,
    pub grad: Array2<f64>,
}

/// Mean KD loss over a batch. Without a teacher this is plain cross-entropy
/// (the `lam = 0` case of [`kd_loss`]).
pub fn batch_loss(
    student: &Array2<f64>,
    teacher: Option<&Array2<f64>>,
    labels: &[usize],
    cfg: &KdConfig,
) -> Result<BatchLoss> {
    let (b, k) = student.dim();
    if labels.len() != b {
        return Err(Error::ShapeMismatch(format!("{b} logit rows, {} labels", labels.len())));
    }
    let no_teacher = KdConfig { lam: 0.0, ..*cfg };
    let mut out = BatchLoss {
        total: 0.0,
        ce: 0.0,
        kd: 0.0,
        grad: Array2::zeros((b, k)),
    };
    for (i, &y) in labels.iter().enumerate() {
        let s = student.row(i).to_vec();
        let l = match teacher {
            Some(t) => kd_loss(&s, &t.row(i).to_vec(), y, cfg)?,
            None => kd_loss(&s, &s, y, &no_teacher)?,
        };
        out.total += l.total;
        out.ce += l.ce;
        out.kd += l.kd;
        for (g, v) in out.grad.row_mut(i).iter_mut().zip(&l.grad) {
            *g = v / b as f64;
        }
    }
    let n = b as f64;
    out.total /= n;
    out.ce /= n;
    out.kd /= n;
    Ok(out)
}

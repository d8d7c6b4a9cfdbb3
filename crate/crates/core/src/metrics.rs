//! Ordinal evaluation metrics over paired level sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::CongestionLevel;
use crate::LEVELS;

/// Rows are truth, columns are predictions, both zero-based level indices.
pub type Confusion = [[u64; LEVELS]; LEVELS];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub mae: f64,
    pub macro_f1: f64,
    pub qwk: f64,
    pub confusion: Confusion,
    pub n: usize,
}

fn check(truth: &[CongestionLevel], pred: &[CongestionLevel]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::invalid("metrics need at least one sample"));
    }
    if truth.len() != pred.len() {
        return Err(Error::invalid(format!(
            "truth has {} samples, predictions {}",
            truth.len(),
            pred.len()
        )));
    }
    Ok(())
}

pub fn confusion(truth: &[CongestionLevel], pred: &[CongestionLevel]) -> Result<Confusion> {
    check(truth, pred)?;
    let mut m = [[0u64; LEVELS]; LEVELS];
    for (t, p) in truth.iter().zip(pred) {
        m[t.index()][p.index()] += 1;
    }
    Ok(m)
}

pub fn accuracy(truth: &[CongestionLevel], pred: &[CongestionLevel]) -> Result<f64> {
    check(truth, pred)?;
    let hits = truth.iter().zip(pred).filter(|(t, p)| t == p).count();
    Ok(hits as f64 / truth.len() as f64)
}

pub fn mae(truth: &[CongestionLevel], pred: &[CongestionLevel]) -> Result<f64> {
    check(truth, pred)?;
    let total: u64 = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| u64::from(t.value().abs_diff(p.value())))
        .sum();
    Ok(total as f64 / truth.len() as f64)
}

/// Unweighted mean of per-class F1 over the classes seen in either sequence.
pub fn macro_f1(truth: &[CongestionLevel], pred: &[CongestionLevel]) -> Result<f64> {
    let m = confusion(truth, pred)?;
    let mut sum = 0.0;
    let mut classes = 0;
    for k in 0..LEVELS {
        let tp = m[k][k];
        let actual: u64 = m[k].iter().sum();
        let predicted: u64 = m.iter().map(|row| row[k]).sum();
        if actual == 0 && predicted == 0 {
            continue;
        }
        classes += 1;
        // 2PR/(P+R) with P = tp/predicted, R = tp/actual
        if tp > 0 {
            sum += 2.0 * tp as f64 / (actual + predicted) as f64;
        }
    }
    Ok(sum / classes as f64)
}

/// Quadratic weighted kappa on the fixed 5-level grid.
///
/// With zero expected disagreement the ratio is undefined; the result is then
/// 1 when every observation sits on the diagonal and 0 otherwise.
pub fn qwk(truth: &[CongestionLevel], pred: &[CongestionLevel]) -> Result<f64> {
    let m = confusion(truth, pred)?;
    let n = truth.len() as f64;
    let mut row = [0.0; LEVELS];
    let mut col = [0.0; LEVELS];
    for i in 0..LEVELS {
        for j in 0..LEVELS {
            row[i] += m[i][j] as f64;
            col[j] += m[i][j] as f64;
        }
    }
    let denom_w = ((LEVELS - 1) * (LEVELS - 1)) as f64;
    let mut observed = 0.0;
    let mut expected = 0.0;
    for i in 0..LEVELS {
        for j in 0..LEVELS {
            let w = ((i as f64) - (j as f64)).powi(2) / denom_w;
            observed += w * m[i][j] as f64;
            expected += w * row[i] * col[j] / n;
        }
    }
    if expected == 0.0 {
        return Ok(if observed == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(1.0 - observed / expected)
}

pub fn evaluate(truth: &[CongestionLevel], pred: &[CongestionLevel]) -> Result<EvalReport> {
    Ok(EvalReport {
        accuracy: accuracy(truth, pred)?,
        mae: mae(truth, pred)?,
        macro_f1: macro_f1(truth, pred)?,
        qwk: qwk(truth, pred)?,
        confusion: confusion(truth, pred)?,
        n: truth.len(),
    })
}

//! Convergence speed readout for an F1-per-epoch curve: the first epoch at
//! which the curve reaches 90 percent of its final value.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConvergenceError {
    #[error("cannot measure convergence of an empty history")]
    EmptyHistory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// 1-based epoch index of first reaching the threshold.
    pub epochs_to_threshold: usize,
    pub final_f1: f64,
    pub threshold: f64,
}

/// Smallest 1-based epoch e with f1[e] >= 0.9 * f1[last]. A flat or
/// all-zero curve converges at epoch 1.
pub fn convergence_report(f1_curve: &[f64]) -> Result<ConvergenceReport, ConvergenceError> {
    let final_f1 = *f1_curve.last().ok_or(ConvergenceError::EmptyHistory)?;
    let threshold = 0.9 * final_f1;
    let epochs_to_threshold = f1_curve
        .iter()
        .position(|&f| f >= threshold)
        .map(|i| i + 1)
        .unwrap_or(f1_curve.len());
    Ok(ConvergenceReport {
        epochs_to_threshold,
        final_f1,
        threshold,
    })
}

/// Plot-ready CSV of one or more aligned curves, one row per epoch.
pub fn curves_to_csv(names: &[&str], curves: &[Vec<f64>]) -> String {
    assert_eq!(names.len(), curves.len());
    let epochs = curves.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::from("epoch");
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for e in 0..epochs {
        out.push_str(&(e + 1).to_string());
        for curve in curves {
            out.push(',');
            match curve.get(e) {
                Some(v) => out.push_str(&format!("{v:.6}")),
                None => out.push_str(""),
            }
        }
        out.push('\n');
    }
    out
}

use super::RankingError;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// How blended weights become solver activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RescaleMode {
    /// Divide by the largest weight, so the strongest symptom is 1.0.
    #[default]
    MaxNormalized,
    /// Use the blended weights unchanged (they sum to 1).
    PaperLiteral,
}

impl fmt::Display for RescaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RescaleMode::MaxNormalized => "max_normalized",
            RescaleMode::PaperLiteral => "paper_literal",
        })
    }
}

impl FromStr for RescaleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "max_normalized" => Ok(RescaleMode::MaxNormalized),
            "paper_literal" => Ok(RescaleMode::PaperLiteral),
            other => Err(format!("unknown rescale mode `{other}`")),
        }
    }
}

/// `w_i = (e^{α·t_i} + e^{β·r_i}) / Σ_j (e^{α·t_j} + e^{β·r_j})`.
///
/// Exponents are shifted by their maximum before exponentiation; the shift
/// cancels in the ratio.
pub fn blend_weights(w_text: &[f64], w_retr: &[f64], alpha: f64, beta: f64) -> Result<Vec<f64>, RankingError> {
    if w_text.is_empty() {
        return Err(RankingError::EmptySymptomSet);
    }
    if w_text.len() != w_retr.len() {
        return Err(RankingError::LengthMismatch { text: w_text.len(), retrieved: w_retr.len() });
    }
    let shift = w_text
        .iter()
        .map(|t| alpha * t)
        .chain(w_retr.iter().map(|r| beta * r))
        .fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = w_text
        .iter()
        .zip(w_retr)
        .map(|(t, r)| (alpha * t - shift).exp() + (beta * r - shift).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

pub fn rescale_for_inference(w: &[f64], mode: RescaleMode) -> Vec<f64> {
    match mode {
        RescaleMode::PaperLiteral => w.to_vec(),
        RescaleMode::MaxNormalized => {
            let max = w.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                w.iter().map(|v| v / max).collect()
            } else {
                w.to_vec()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let w = blend_weights(&[0.4, 0.4, 0.4], &[0.2, 0.2, 0.2], 3.0, 3.0).unwrap();
        assert!(w.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(blend_weights(&[0.7], &[0.1], 3.0, 3.0).unwrap(), vec![1.0]);
        assert!(matches!(blend_weights(&[], &[], 3.0, 3.0), Err(RankingError::EmptySymptomSet)));
        assert!(matches!(blend_weights(&[0.1], &[], 3.0, 3.0), Err(RankingError::LengthMismatch { .. })));
    }

    #[test]
    fn rescale_modes() {
        assert_eq!(rescale_for_inference(&[0.25, 0.25], RescaleMode::MaxNormalized), vec![1.0, 1.0]);
        assert_eq!(rescale_for_inference(&[0.6, 0.4], RescaleMode::PaperLiteral), vec![0.6, 0.4]);
        assert_eq!("paper-literal".parse::<RescaleMode>().unwrap(), RescaleMode::PaperLiteral);
    }
}

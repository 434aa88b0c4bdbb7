use crate::predictor::RankedPrediction;
use crate::LocationId;

/// Whether `truth` is among the first `n` ranked locations.
pub fn top_n_accuracy(ranked: &RankedPrediction, truth: LocationId, n: usize) -> bool {
    ranked.order.iter().take(n).any(|&l| l == truth)
}

/// Searches an ALT sweep over `ranked` spends before hitting `truth`.
pub fn realized_alt_cost(ranked: &RankedPrediction, truth: LocationId) -> Option<usize> {
    ranked.order.iter().position(|&l| l == truth).map(|i| i + 1)
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{rank, PredictionVector};

    fn ranked(probs: &[f64]) -> RankedPrediction {
        rank(&PredictionVector {
            target_moment: 0,
            probs: probs.to_vec(),
        })
    }

    #[test]
    fn top_one_ties_but_costs_differ() {
        let a = ranked(&[0.5, 0.3, 0.2]);
        let b = ranked(&[0.5, 0.1, 0.4]);
        assert!(!top_n_accuracy(&a, 2, 1));
        assert!(!top_n_accuracy(&b, 2, 1));
        assert_eq!(realized_alt_cost(&a, 2), Some(3));
        assert_eq!(realized_alt_cost(&b, 2), Some(2));
    }

    #[test]
    fn top_all_always_hits() {
        let a = ranked(&[0.5, 0.3, 0.2]);
        for l in 0..3 {
            assert!(top_n_accuracy(&a, l, 3));
        }
        assert!(top_n_accuracy(&a, 1, 2));
    }

    #[test]
    fn mean_and_std() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}

//! ACS state-transition rule.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Greediness and heuristic weight for the selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    /// Probability of taking the argmax branch, q₀ ∈ [0, 1].
    pub greediness: f64,
    /// Exponent on the heuristic, β ≥ 0.
    pub beta: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            greediness: 0.5,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("no candidates to choose from")]
    Empty,
    #[error("candidate {index} has non-positive pheromone or heuristic ({pheromone}, {heuristic})")]
    NonPositive {
        index: usize,
        pheromone: f64,
        heuristic: f64,
    },
    #[error("greediness must lie in [0, 1], got {0}")]
    Greediness(f64),
    #[error("beta must be non-negative, got {0}")]
    Beta(f64),
}

impl SelectionParams {
    pub fn validate(&self) -> Result<(), SelectError> {
        if !(0.0..=1.0).contains(&self.greediness) {
            return Err(SelectError::Greediness(self.greediness));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(SelectError::Beta(self.beta));
        }
        Ok(())
    }
}

/// A selectable option: pheromone τ and heuristic η, both positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub pheromone: f64,
    pub heuristic: f64,
}

impl Candidate {
    pub fn new(pheromone: f64, heuristic: f64) -> Self {
        Self {
            pheromone,
            heuristic,
        }
    }

    pub fn weight(&self, beta: f64) -> f64 {
        self.pheromone * self.heuristic.powf(beta)
    }
}

/// Selection probabilities τ·η^β / Σ τ·η^β.
pub fn wheel_probabilities(candidates: &[Candidate], beta: f64) -> Vec<f64> {
    let weights: Vec<f64> = candidates.iter().map(|c| c.weight(beta)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Index of the largest weight; ties go to the lowest index.
pub fn argmax(candidates: &[Candidate], beta: f64) -> usize {
    let mut best = 0;
    let mut best_weight = f64::NEG_INFINITY;
    for (i, c) in candidates.iter().enumerate() {
        let w = c.weight(beta);
        if w > best_weight {
            best = i;
            best_weight = w;
        }
    }
    best
}

/// Picks a candidate index.
///
/// Draws q ~ U[0,1); if q ≤ q₀ returns the argmax of τ·η^β, otherwise draws
/// once more and samples proportionally to τ·η^β. Consumes one or two
/// values from `rng`, never more.
pub fn aco_select<R: Rng + ?Sized>(
    candidates: &[Candidate],
    params: &SelectionParams,
    rng: &mut R,
) -> Result<usize, SelectError> {
    if candidates.is_empty() {
        return Err(SelectError::Empty);
    }
    params.validate()?;
    for (index, c) in candidates.iter().enumerate() {
        if !(c.pheromone > 0.0 && c.heuristic > 0.0) {
            return Err(SelectError::NonPositive {
                index,
                pheromone: c.pheromone,
                heuristic: c.heuristic,
            });
        }
    }
    let q: f64 = rng.gen();
    if q <= params.greediness {
        return Ok(argmax(candidates, params.beta));
    }
    let weights: Vec<f64> = candidates.iter().map(|c| c.weight(params.beta)).collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return Ok(i);
        }
        target -= w;
    }
    // Rounding can leave a sliver past the last bucket.
    Ok(weights.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(greediness: f64, beta: f64) -> SelectionParams {
        SelectionParams { greediness, beta }
    }

    fn frequencies(cands: &[Candidate], p: SelectionParams, draws: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0usize; cands.len()];
        for _ in 0..draws {
            counts[aco_select(cands, &p, &mut rng).unwrap()] += 1;
        }
        counts.iter().map(|&c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn greedy_picks_argmax() {
        let cands = [
            Candidate::new(0.2, 1.0),
            Candidate::new(0.9, 1.0),
            Candidate::new(0.5, 1.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(aco_select(&cands, &params(1.0, 1.0), &mut rng), Ok(1));
        }
    }

    #[test]
    fn argmax_tie_goes_low() {
        let cands = [Candidate::new(0.1, 1.0); 4];
        assert_eq!(argmax(&cands, 1.0), 0);
    }

    #[test]
    fn symmetric_wheel() {
        let cands = [Candidate::new(1.0, 1.0), Candidate::new(1.0, 1.0)];
        let f = frequencies(&cands, params(0.0, 1.0), 10_000, 11);
        assert!((f[0] - 0.5).abs() <= 0.02, "{f:?}");
    }

    #[test]
    fn weighted_wheel() {
        let cands = [Candidate::new(1.0, 1.0), Candidate::new(3.0, 1.0)];
        let f = frequencies(&cands, params(0.0, 1.0), 10_000, 12);
        assert!((f[1] - 0.75).abs() <= 0.02, "{f:?}");
    }

    #[test]
    fn beta_zero_ignores_heuristic() {
        let cands = [Candidate::new(1.0, 100.0), Candidate::new(2.0, 1.0)];
        assert_eq!(argmax(&cands, 0.0), 1);
        assert_eq!(argmax(&cands, 1.0), 0);
    }

    #[test]
    fn consumes_at_most_two_draws() {
        use rand::RngCore;
        let cands = [Candidate::new(1.0, 1.0), Candidate::new(3.0, 1.0)];
        for greediness in [0.0, 1.0] {
            let mut a = ChaCha8Rng::seed_from_u64(5);
            aco_select(&cands, &params(greediness, 1.0), &mut a).unwrap();
            let mut b = ChaCha8Rng::seed_from_u64(5);
            let expected = if greediness == 1.0 { 1 } else { 2 };
            for _ in 0..expected {
                b.next_u64();
            }
            assert_eq!(a.next_u64(), b.next_u64(), "greediness {greediness}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            aco_select(&[], &params(0.5, 1.0), &mut rng),
            Err(SelectError::Empty)
        );
        let bad = [Candidate::new(0.0, 1.0)];
        assert!(matches!(
            aco_select(&bad, &params(0.5, 1.0), &mut rng),
            Err(SelectError::NonPositive { index: 0, .. })
        ));
        let bad = [Candidate::new(1.0, -1.0)];
        assert!(aco_select(&bad, &params(0.5, 1.0), &mut rng).is_err());
        let ok = [Candidate::new(1.0, 1.0)];
        assert_eq!(
            aco_select(&ok, &params(1.5, 1.0), &mut rng),
            Err(SelectError::Greediness(1.5))
        );
        assert_eq!(
            aco_select(&ok, &params(0.5, -0.1), &mut rng),
            Err(SelectError::Beta(-0.1))
        );
    }
}

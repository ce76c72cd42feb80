//! Index selection rules.

use rand::Rng;

use crate::sketch::{sample_index, sample_weighted, ProbVector};

#[derive(Clone, Debug, PartialEq)]
pub enum SelectionRule {
    /// Fixed distribution, independent of the losses.
    Fixed(ProbVector),
    /// argmax_i f_i, ties to the lowest index.
    MaxDistance,
    /// i ∼ f_i / Σ_j f_j.
    Proportional,
    /// Sample ∝ f_i restricted to {i : f_i ≥ θ·max f + (1−θ)·E_p[f]}.
    Capped { theta: f64, p: ProbVector },
}

impl SelectionRule {
    pub fn is_adaptive(&self) -> bool {
        !matches!(self, SelectionRule::Fixed(_))
    }
}

/// The capped index set for losses `f`.
pub fn capped_set(f: &[f64], theta: f64, p: &ProbVector) -> Vec<usize> {
    let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = theta * max + (1.0 - theta) * p.expectation(f);
    // the argmax always qualifies, even when rounding puts E_p[f] a hair above max
    let threshold = threshold.min(max);
    (0..f.len()).filter(|&i| f[i] >= threshold).collect()
}

fn argmax_lowest(f: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in f.iter().enumerate().skip(1) {
        if v > f[best] {
            best = i;
        }
    }
    best
}

/// Probabilities the rule assigns given the losses; `None` when an adaptive rule
/// faces all-zero losses (the iterate already satisfies every sketched system).
pub fn selection_probabilities(rule: &SelectionRule, f: &[f64]) -> Option<Vec<f64>> {
    match rule {
        SelectionRule::Fixed(p) => Some(p.as_slice().to_vec()),
        _ if f.iter().all(|&v| v <= 0.0) => None,
        SelectionRule::MaxDistance => {
            let mut out = vec![0.0; f.len()];
            out[argmax_lowest(f)] = 1.0;
            Some(out)
        }
        SelectionRule::Proportional => {
            let s: f64 = f.iter().sum();
            Some(f.iter().map(|v| v / s).collect())
        }
        SelectionRule::Capped { theta, p } => {
            let set = capped_set(f, *theta, p);
            let s: f64 = set.iter().map(|&i| f[i]).sum();
            let mut out = vec![0.0; f.len()];
            for i in set {
                out[i] = f[i] / s;
            }
            Some(out)
        }
    }
}

/// Draws the next index; `None` signals convergence for adaptive rules.
pub fn select_index<R: Rng + ?Sized>(rule: &SelectionRule, f: &[f64], rng: &mut R) -> Option<usize> {
    match rule {
        SelectionRule::Fixed(p) => Some(sample_index(p, rng)),
        _ if f.iter().all(|&v| v <= 0.0) => None,
        SelectionRule::MaxDistance => Some(argmax_lowest(f)),
        SelectionRule::Proportional => Some(sample_weighted(f, rng)),
        SelectionRule::Capped { theta, p } => {
            let set = capped_set(f, *theta, p);
            let w: Vec<f64> = set.iter().map(|&i| f[i]).collect();
            Some(set[sample_weighted(&w, rng)])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::prob_uniform;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn max_distance_picks_argmax_with_lowest_tie() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_index(&SelectionRule::MaxDistance, &[1.0, 3.0, 2.0], &mut rng), Some(1));
        assert_eq!(select_index(&SelectionRule::MaxDistance, &[2.0, 1.0, 2.0], &mut rng), Some(0));
    }

    #[test]
    fn proportional_probabilities() {
        let p = selection_probabilities(&SelectionRule::Proportional, &[1.0, 3.0]).unwrap();
        assert_eq!(p, vec![0.25, 0.75]);
    }

    #[test]
    fn capped_with_theta_one_is_the_max() {
        let rule = SelectionRule::Capped { theta: 1.0, p: prob_uniform(3) };
        assert_eq!(capped_set(&[1.0, 3.0, 2.0], 1.0, &prob_uniform(3)), vec![1]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| select_index(&rule, &[1.0, 3.0, 2.0], &mut rng) == Some(1)));
    }

    #[test]
    fn capped_with_theta_zero_keeps_above_mean() {
        // mean 2: indices with losses 3 and 2 survive
        assert_eq!(capped_set(&[1.0, 3.0, 2.0], 0.0, &prob_uniform(3)), vec![1, 2]);
        let p = selection_probabilities(
            &SelectionRule::Capped { theta: 0.0, p: prob_uniform(3) },
            &[1.0, 3.0, 2.0],
        )
        .unwrap();
        assert_eq!(p, vec![0.0, 0.6, 0.4]);
    }

    #[test]
    fn zero_losses_declare_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(select_index(&SelectionRule::Proportional, &[0.0, 0.0], &mut rng), None);
        assert_eq!(select_index(&SelectionRule::MaxDistance, &[0.0, 0.0], &mut rng), None);
        assert!(select_index(&SelectionRule::Fixed(prob_uniform(2)), &[0.0, 0.0], &mut rng).is_some());
    }
}

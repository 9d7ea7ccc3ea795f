use rand_distr::{Beta, Distribution};

use super::{PipelineError, Result};
use crate::hashing::{stream, CounterRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Arm {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

/// Beta-Bernoulli Thompson sampling over named variants.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    variants: Vec<String>,
    arms: Vec<Arm>,
    rng: CounterRng,
}

impl BanditState {
    pub fn new(variants: Vec<String>, seed: u64) -> Result<Self> {
        if variants.is_empty() {
            return Err(PipelineError::EmptyVariants);
        }
        let arms = vec![Arm::default(); variants.len()];
        Ok(Self {
            variants,
            arms,
            rng: CounterRng::new(seed, stream::BANDIT),
        })
    }

    pub fn variants(&self) -> &[String] {
        &self.variants
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn arm_mut(&mut self, variant: usize) -> Option<&mut Arm> {
        self.arms.get_mut(variant)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variants.iter().position(|v| v == name)
    }

    /// Draws once from every arm's posterior and returns the argmax; ties
    /// go to the lowest index.
    pub fn select_variant(&mut self) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, arm) in self.arms.iter().enumerate() {
            let theta = Beta::new(arm.alpha, arm.beta)
                .expect("alpha, beta >= 1")
                .sample(&mut self.rng);
            if theta > best.1 {
                best = (i, theta);
            }
        }
        best.0
    }

    pub fn record_feedback(&mut self, variant: usize, reward: u8) -> Result<Arm> {
        let n = self.arms.len();
        let arm = self
            .arms
            .get_mut(variant)
            .ok_or(PipelineError::UnknownVariant(format!("#{variant} of {n}")))?;
        match reward {
            1 => arm.alpha += 1.0,
            0 => arm.beta += 1.0,
            r => {
                return Err(PipelineError::InvalidRequest(format!(
                    "reward must be 0 or 1, got {r}"
                )))
            }
        }
        Ok(*arm)
    }
}

/// Plays `rounds` rounds against Bernoulli arms with the given success
/// probabilities; returns the arm pulled in each round.
pub fn simulate(probabilities: &[f64], rounds: usize, seed: u64) -> Result<Vec<usize>> {
    let names = (0..probabilities.len())
        .map(|i| format!("arm{i}"))
        .collect();
    let mut state = BanditState::new(names, seed)?;
    let mut env = CounterRng::new(seed, stream::SYNTH);
    Ok((0..rounds)
        .map(|_| {
            let arm = state.select_variant();
            let reward = u8::from(env.next_f64() < probabilities[arm]);
            state.record_feedback(arm, reward).expect("valid arm");
            arm
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(n: usize, seed: u64) -> BanditState {
        BanditState::new((0..n).map(|i| format!("v{i}")).collect(), seed).unwrap()
    }

    #[test]
    fn single_variant_always_wins() {
        let mut s = state(1, 3);
        assert!((0..100).all(|_| s.select_variant() == 0));
        assert!(BanditState::new(vec![], 0).is_err());
    }

    #[test]
    fn feedback_updates() {
        let mut s = state(2, 0);
        assert_eq!(
            s.record_feedback(0, 1).unwrap(),
            Arm {
                alpha: 2.0,
                beta: 1.0
            }
        );
        assert_eq!(
            s.record_feedback(1, 0).unwrap(),
            Arm {
                alpha: 1.0,
                beta: 2.0
            }
        );
        assert!(s.record_feedback(2, 1).is_err());
        assert!(s.record_feedback(0, 2).is_err());
    }

    #[test]
    fn strong_arm_dominates() {
        let mut s = state(2, 11);
        *s.arm_mut(0).unwrap() = Arm {
            alpha: 1000.0,
            beta: 1.0,
        };
        *s.arm_mut(1).unwrap() = Arm {
            alpha: 1.0,
            beta: 1000.0,
        };
        let wins = (0..10_000).filter(|_| s.select_variant() == 0).count();
        assert!(wins >= 9_900, "{wins}");
    }

    #[test]
    fn fresh_arms_split_evenly() {
        let mut s = state(2, 5);
        let first = (0..10_000).filter(|_| s.select_variant() == 0).count();
        assert!((4_700..=5_300).contains(&first), "{first}");
    }

    #[test]
    fn posterior_counts_track_rewards() {
        let pulls = simulate(&[0.3, 0.6, 0.5], 500, 2).unwrap();
        assert_eq!(pulls.len(), 500);
        assert_eq!(simulate(&[0.3, 0.6, 0.5], 500, 2).unwrap(), pulls);
    }

    #[test]
    fn converges_to_best_arm() {
        let pulls = simulate(&[0.9, 0.1], 10_000, 0).unwrap();
        let best = pulls[9_000..].iter().filter(|&&a| a == 0).count();
        assert!(best > 950, "{best}");
    }
}

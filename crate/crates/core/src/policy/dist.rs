use rand::Rng;

use crate::PolicyError;

/// Categorical distribution over action indices, held as log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    pub log_probs: Vec<f64>,
}

impl Categorical {
    pub fn from_logits<T: Copy + Into<f64>>(logits: &[T]) -> Self {
        let max = logits.iter().map(|&x| x.into()).fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|&x| (x.into() - max).exp()).sum::<f64>().ln();
        Self { log_probs: logits.iter().map(|&x| x.into() - lse).collect() }
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    pub fn log_prob(&self, k: usize) -> Result<f64, PolicyError> {
        self.log_probs.get(k).copied().ok_or(PolicyError::ActionOutOfRange { index: k, size: self.len() })
    }

    pub fn entropy(&self) -> f64 {
        -self.log_probs.iter().map(|&l| if l == f64::NEG_INFINITY { 0.0 } else { l.exp() * l }).sum::<f64>()
    }

    /// Inverse-CDF sample from one uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (k, &l) in self.log_probs.iter().enumerate() {
            let p = l.exp();
            if p > 0.0 {
                last = k;
            }
            acc += p;
            if u < acc {
                return k;
            }
        }
        // Rounding left the cumulative sum a hair under one.
        last
    }

    /// Most likely action; ties go to the lowest index.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (k, &l) in self.log_probs.iter().enumerate() {
            if l > self.log_probs[best] {
                best = k;
            }
        }
        best
    }
}

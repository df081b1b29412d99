//! Masked categorical distribution over a logit vector.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    /// Log-probabilities; `-inf` where masked.
    log_probs: Vec<f64>,
}

impl Categorical {
    /// Masked log-softmax with max subtraction. Returns `None` when every
    /// entry is masked.
    pub fn new(logits: &[f64], mask: &[bool]) -> Option<Self> {
        assert_eq!(logits.len(), mask.len(), "logit and mask length differ");
        let max = logits
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&z, _)| z)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return None;
        }
        let sum: f64 = logits
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&z, _)| (z - max).exp())
            .sum();
        let log_z = max + sum.ln();
        let log_probs = logits
            .iter()
            .zip(mask)
            .map(|(&z, &m)| if m { z - log_z } else { f64::NEG_INFINITY })
            .collect();
        Some(Self { log_probs })
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn log_prob(&self, i: usize) -> f64 {
        self.log_probs[i]
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }

    /// Most likely entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.log_probs.iter().enumerate() {
            if l > self.log_probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &l) in self.log_probs.iter().enumerate() {
            if l == f64::NEG_INFINITY {
                continue;
            }
            acc += l.exp();
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }

    pub fn entropy(&self) -> f64 {
        -self
            .log_probs
            .iter()
            .filter(|l| l.is_finite())
            .map(|&l| l.exp() * l)
            .sum::<f64>()
    }

    /// `d log p[i] / d logits`: one-hot minus probabilities (zero when masked).
    pub fn grad_log_prob(&self, i: usize) -> Vec<f64> {
        let mut g: Vec<f64> = self.log_probs.iter().map(|l| -l.exp()).collect();
        g[i] += 1.0;
        g
    }

    /// `d H / d logits = -p (log p + H)`, zero for masked entries.
    pub fn grad_entropy(&self) -> Vec<f64> {
        let h = self.entropy();
        self.log_probs
            .iter()
            .map(|&l| if l.is_finite() { -l.exp() * (l + h) } else { 0.0 })
            .collect()
    }
}

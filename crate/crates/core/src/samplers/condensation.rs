use rand::Rng;

use super::resample::resample_systematic;
use super::weighted_mean_pose;
use crate::appearance::{log_likelihood, TemplateModel};
use crate::frame::Frame;
use crate::geometry::TargetState;
use crate::motion::{propagate_target, MotionParams};

/// Weighted particles tracking a single target.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedParticleSet {
    pub particles: Vec<TargetState>,
    pub weights: Vec<f64>,
}

impl WeightedParticleSet {
    /// `count` copies of `state` with uniform weights.
    pub fn uniform(state: TargetState, count: usize) -> Self {
        assert!(count >= 1, "particle set needs at least one particle");
        WeightedParticleSet {
            particles: vec![state; count],
            weights: vec![1.0 / count as f64; count],
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn estimate(&self) -> TargetState {
        weighted_mean_pose(self.particles.iter().zip(self.weights.iter().copied()))
    }

    /// Moves every particle to `state` and resets the weights.
    pub fn reset_to(&mut self, state: TargetState) {
        let m = self.len();
        self.particles.iter_mut().for_each(|p| *p = state);
        self.weights.iter_mut().for_each(|w| *w = 1.0 / m as f64);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensationStats {
    pub effective_sample_size: f64,
    /// Every weight underflowed (or was non-finite) and uniform weights were used.
    pub degenerate: bool,
}

/// Exponentiates log-weights after subtracting their maximum and normalizes
/// them. Returns `None` if no weight survives.
pub fn normalize_log_weights(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let raw: Vec<f64> = log_weights
        .iter()
        .map(|&l| if l.is_nan() { 0.0 } else { (l - max).exp() })
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return None;
    }
    Some(raw.into_iter().map(|w| w / total).collect())
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Resample, propagate, reweight with an arbitrary log-likelihood.
pub fn condensation_step_with<R: Rng + ?Sized>(
    prev: &WeightedParticleSet,
    motion: &MotionParams,
    rng: &mut R,
    loglik: impl Fn(&TargetState) -> f64,
) -> (WeightedParticleSet, TargetState, CondensationStats) {
    assert!(!prev.is_empty(), "particle set is empty");
    let m = prev.len();
    let indices = match resample_systematic(&prev.weights, m, rng) {
        Ok(idx) => idx,
        // Weights that drifted from unit sum are renormalized once.
        Err(_) => {
            let total: f64 = prev.weights.iter().sum();
            let w: Vec<f64> = prev.weights.iter().map(|w| w / total).collect();
            resample_systematic(&w, m, rng).expect("renormalized weights")
        }
    };
    let particles: Vec<TargetState> = indices
        .iter()
        .map(|&k| propagate_target(&prev.particles[k], motion, rng))
        .collect();
    let log_weights: Vec<f64> = particles.iter().map(&loglik).collect();
    let (weights, degenerate) = match normalize_log_weights(&log_weights) {
        Some(w) => (w, false),
        None => {
            log::warn!("all {m} particle weights vanished; using uniform weights");
            (vec![1.0 / m as f64; m], true)
        }
    };
    let stats = CondensationStats {
        effective_sample_size: effective_sample_size(&weights),
        degenerate,
    };
    let set = WeightedParticleSet { particles, weights };
    let estimate = set.estimate();
    (set, estimate, stats)
}

/// One CONDENSATION step for a single target on an image frame.
pub fn condensation_step<R: Rng + ?Sized>(
    prev: &WeightedParticleSet,
    frame: &Frame,
    template: &TemplateModel,
    motion: &MotionParams,
    rng: &mut R,
) -> (WeightedParticleSet, TargetState, CondensationStats) {
    condensation_step_with(prev, motion, rng, |s| log_likelihood(frame, s, template))
}

//! The two trackers: the MCMC-MRF joint sampler and independent per-target
//! CONDENSATION filters.

mod condensation;
mod mcmc;
mod resample;

pub use condensation::{
    condensation_step, condensation_step_with, effective_sample_size, normalize_log_weights,
    CondensationStats, WeightedParticleSet,
};
pub use mcmc::{
    log_acceptance, mcmc_mrf_step, run_mh_chain, ChainStats, ImageModel, McmcConfig, PosteriorModel,
};
pub use resample::resample_systematic;

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, JointParticle, TargetState};

/// Unweighted set of joint particles for one timestep, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n_targets: usize,
    states: Vec<TargetState>,
}

impl SampleSet {
    /// Panics if the particles are empty or disagree on the target count.
    pub fn from_particles(particles: &[JointParticle]) -> Self {
        assert!(!particles.is_empty(), "sample set needs at least one particle");
        let n_targets = particles[0].len();
        let mut states = Vec::with_capacity(n_targets * particles.len());
        for p in particles {
            assert_eq!(p.len(), n_targets, "all particles must have {n_targets} targets");
            states.extend_from_slice(p.targets());
        }
        SampleSet { n_targets, states }
    }

    /// `count` copies of one particle.
    pub fn replicate(particle: &JointParticle, count: usize) -> Self {
        assert!(count >= 1, "sample set needs at least one particle");
        SampleSet {
            n_targets: particle.len(),
            states: particle.targets().repeat(count),
        }
    }

    pub(crate) fn with_capacity(n_targets: usize, samples: usize) -> Self {
        SampleSet {
            n_targets,
            states: Vec::with_capacity(n_targets * samples),
        }
    }

    pub(crate) fn push(&mut self, targets: &[TargetState]) {
        debug_assert_eq!(targets.len(), self.n_targets);
        self.states.extend_from_slice(targets);
    }

    pub fn len(&self) -> usize {
        if self.n_targets == 0 {
            0
        } else {
            self.states.len() / self.n_targets
        }
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn particle(&self, s: usize) -> &[TargetState] {
        &self.states[s * self.n_targets..(s + 1) * self.n_targets]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[TargetState]> {
        self.states.chunks_exact(self.n_targets.max(1))
    }

    /// Overwrites target `i` in every particle.
    pub fn set_target(&mut self, i: usize, state: TargetState) {
        assert!(i < self.n_targets, "target index {i} out of range");
        let n = self.n_targets;
        self.states.iter_mut().skip(i).step_by(n).for_each(|s| *s = state);
    }

    /// Per-target sample mean position and circular-mean heading.
    pub fn estimate(&self) -> TrackEstimate {
        let targets = (0..self.n_targets)
            .map(|i| {
                let column = self.states.iter().skip(i).step_by(self.n_targets);
                weighted_mean_pose(column.map(|s| (s, 1.0)))
            })
            .collect();
        TrackEstimate { targets }
    }
}

/// Point estimate of every target's pose for one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEstimate {
    pub targets: Vec<TargetState>,
}

/// Weighted mean position and circular mean heading (via mean of cos/sin).
pub(crate) fn weighted_mean_pose<'a>(items: impl Iterator<Item = (&'a TargetState, f64)>) -> TargetState {
    let (mut wx, mut wy, mut wc, mut ws, mut wsum) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (s, w) in items {
        wx += w * s.x;
        wy += w * s.y;
        wc += w * s.theta.cos();
        ws += w * s.theta.sin();
        wsum += w;
    }
    TargetState {
        x: wx / wsum,
        y: wy / wsum,
        theta: normalize_angle(ws.atan2(wc)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn estimate_uses_circular_mean() {
        let a = JointParticle::new(vec![TargetState::new(0.0, 0.0, PI - 0.1), TargetState::new(5.0, 5.0, 0.0)]);
        let b = JointParticle::new(vec![TargetState::new(2.0, 4.0, -PI + 0.1), TargetState::new(7.0, 5.0, 0.0)]);
        let set = SampleSet::from_particles(&[a, b]);
        let est = set.estimate();
        assert_abs_diff_eq!(est.targets[0].x, 1.0);
        assert_abs_diff_eq!(est.targets[0].y, 2.0);
        assert_abs_diff_eq!(est.targets[0].theta.abs(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(est.targets[1].x, 6.0);
    }

    #[test]
    fn set_target_overwrites_column_only() {
        let p = JointParticle::new(vec![TargetState::new(0.0, 0.0, 0.0), TargetState::new(1.0, 1.0, 0.0)]);
        let mut set = SampleSet::replicate(&p, 3);
        let snap = TargetState::new(9.0, 9.0, 1.0);
        set.set_target(1, snap);
        for particle in set.iter() {
            assert_eq!(particle, &[p[0], snap]);
        }
        assert_eq!(set.len(), 3);
    }
}

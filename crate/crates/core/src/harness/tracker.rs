//! Uniform wrapper over the two trackers for the experiment loop.

use rand::Rng;

use super::config::TrackerKind;
use crate::appearance::TemplateModel;
use crate::frame::Frame;
use crate::geometry::{JointParticle, TargetState};
use crate::interaction::build_mrf;
use crate::samplers::{condensation_step, mcmc_mrf_step, McmcConfig, SampleSet, WeightedParticleSet};

/// Anything whose per-target hypotheses can be snapped to a known pose.
pub trait Correctable {
    fn snap_target(&mut self, target: usize, state: TargetState);
}

impl Correctable for SampleSet {
    fn snap_target(&mut self, target: usize, state: TargetState) {
        self.set_target(target, state);
    }
}

impl Correctable for [WeightedParticleSet] {
    fn snap_target(&mut self, target: usize, state: TargetState) {
        self[target].reset_to(state);
    }
}

/// Per-frame tracker diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    /// MH acceptance rate (joint tracker only).
    pub acceptance_rate: Option<f64>,
    /// Mean effective sample size over targets (independent tracker only).
    pub mean_ess: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum Tracker {
    McmcMrf {
        samples: SampleSet,
        cfg: McmcConfig,
        /// Estimates of the previous frame; they define the next MRF.
        reference: Vec<TargetState>,
    },
    Independent {
        filters: Vec<WeightedParticleSet>,
        cfg: McmcConfig,
    },
}

impl Tracker {
    /// Every hypothesis starts at the given poses. `cfg.n_samples` is the
    /// joint sample count or the per-target particle count.
    pub fn new(kind: TrackerKind, initial: &[TargetState], cfg: McmcConfig) -> Self {
        match kind {
            TrackerKind::McmcMrf => Tracker::McmcMrf {
                samples: SampleSet::replicate(&JointParticle::new(initial.to_vec()), cfg.n_samples),
                cfg,
                reference: initial.to_vec(),
            },
            TrackerKind::Independent => Tracker::Independent {
                filters: initial
                    .iter()
                    .map(|&s| WeightedParticleSet::uniform(s, cfg.n_samples))
                    .collect(),
                cfg,
            },
        }
    }

    pub fn kind(&self) -> TrackerKind {
        match self {
            Tracker::McmcMrf { .. } => TrackerKind::McmcMrf,
            Tracker::Independent { .. } => TrackerKind::Independent,
        }
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        frame: &Frame,
        template: &TemplateModel,
        rng: &mut R,
    ) -> (Vec<TargetState>, StepDiagnostics) {
        match self {
            Tracker::McmcMrf {
                samples,
                cfg,
                reference,
            } => {
                let graph = build_mrf(reference, &cfg.interaction);
                let (next, estimate, stats) = mcmc_mrf_step(samples, frame, template, &graph, cfg, rng);
                *samples = next;
                *reference = estimate.targets.clone();
                let diag = StepDiagnostics {
                    acceptance_rate: Some(stats.acceptance_rate()),
                    mean_ess: None,
                };
                (estimate.targets, diag)
            }
            Tracker::Independent { filters, cfg } => {
                let mut estimates = Vec::with_capacity(filters.len());
                let mut ess = 0.0;
                for filter in filters.iter_mut() {
                    let (next, est, stats) = condensation_step(filter, frame, template, &cfg.motion, rng);
                    *filter = next;
                    ess += stats.effective_sample_size;
                    estimates.push(est);
                }
                let diag = StepDiagnostics {
                    acceptance_rate: None,
                    mean_ess: Some(ess / filters.len().max(1) as f64),
                };
                (estimates, diag)
            }
        }
    }
}

impl Correctable for Tracker {
    fn snap_target(&mut self, target: usize, state: TargetState) {
        match self {
            Tracker::McmcMrf {
                samples, reference, ..
            } => {
                samples.snap_target(target, state);
                reference[target] = state;
            }
            Tracker::Independent { filters, .. } => filters.as_mut_slice().snap_target(target, state),
        }
    }
}

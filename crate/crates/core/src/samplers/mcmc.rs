//! Metropolis-Hastings sampling of the joint posterior with MRF interaction
//! terms.
//!
//! Each iteration proposes a new pose for one target, drawn from the motion
//! model applied to that target in a random particle of the previous set. The
//! mixture prior cancels against the proposal, so the acceptance ratio only
//! involves the moved target's likelihood and its incident pair potentials.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SampleSet, TrackEstimate};
use crate::appearance::{log_likelihood, TemplateModel};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geometry::TargetState;
use crate::interaction::{log_potential, InteractionParams, MrfGraph};
use crate::motion::{propagate_target, MotionParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Samples kept per timestep.
    pub n_samples: usize,
    /// Iterations run and discarded before collection starts.
    pub burn_in: usize,
    pub motion: MotionParams,
    pub interaction: InteractionParams,
    pub rng_seed: u64,
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.n_samples == 0 {
            errors.push("n_samples must be at least 1".to_string());
        }
        for r in [self.motion.validate(), self.interaction.validate()] {
            if let Err(Error::Config(e)) = r {
                errors.extend(e);
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}

/// What the MH chain needs to know about the posterior.
pub trait PosteriorModel {
    /// Observation log-likelihood of target `target` at `state`.
    fn log_likelihood(&self, target: usize, state: &TargetState) -> f64;

    /// Pairwise log interaction potential.
    fn log_potential(&self, a: &TargetState, b: &TargetState) -> f64;

    /// Draws from the single-target transition density given the previous pose.
    fn propose<R: Rng + ?Sized>(&self, prev: &TargetState, rng: &mut R) -> TargetState;
}

/// The image-based posterior: template likelihood, overlap potential and the
/// Gaussian motion model.
#[derive(Debug, Clone, Copy)]
pub struct ImageModel<'a> {
    pub frame: &'a Frame,
    pub template: &'a TemplateModel,
    pub motion: MotionParams,
    pub interaction: InteractionParams,
}

impl PosteriorModel for ImageModel<'_> {
    fn log_likelihood(&self, _target: usize, state: &TargetState) -> f64 {
        log_likelihood(self.frame, state, self.template)
    }

    fn log_potential(&self, a: &TargetState, b: &TargetState) -> f64 {
        log_potential(a, b, self.template.dims, &self.interaction)
    }

    fn propose<R: Rng + ?Sized>(&self, prev: &TargetState, rng: &mut R) -> TargetState {
        propagate_target(prev, &self.motion, rng)
    }
}

/// `min(1, exp(new - old))` over the summed likelihood and interaction terms,
/// evaluated in log space.
pub fn log_acceptance(loglik_new: f64, loglik_old: f64, logint_new: f64, logint_old: f64) -> f64 {
    let delta = (loglik_new - loglik_old) + (logint_new - logint_old);
    delta.min(0.0).exp()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainStats {
    pub proposals: u64,
    pub accepted: u64,
}

impl ChainStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }
}

fn incident_log_interaction<M: PosteriorModel>(
    model: &M,
    graph: &MrfGraph,
    current: &[TargetState],
    i: usize,
    state: &TargetState,
) -> f64 {
    graph
        .neighbors(i)
        .iter()
        .map(|&j| model.log_potential(state, &current[j]))
        .sum()
}

/// Runs one timestep of the MH sampler and returns `n_samples` joint samples.
///
/// Panics if `prev` is empty or its target count differs from the graph's.
pub fn run_mh_chain<M: PosteriorModel, R: Rng + ?Sized>(
    prev: &SampleSet,
    model: &M,
    graph: &MrfGraph,
    n_samples: usize,
    burn_in: usize,
    rng: &mut R,
) -> (SampleSet, ChainStats) {
    assert!(!prev.is_empty(), "previous sample set is empty");
    let n = prev.n_targets();
    assert_eq!(graph.n(), n, "MRF graph built for a different target count");
    let n_prev = prev.len();

    let start = prev.particle(rng.random_range(0..n_prev));
    let mut current: Vec<TargetState> = start.iter().map(|s| model.propose(s, rng)).collect();
    let mut loglik: Vec<f64> = current
        .iter()
        .enumerate()
        .map(|(i, s)| model.log_likelihood(i, s))
        .collect();

    let mut out = SampleSet::with_capacity(n, n_samples);
    let mut stats = ChainStats::default();
    for iter in 0..burn_in + n_samples {
        if n > 0 {
            let r = rng.random_range(0..n_prev);
            let i = rng.random_range(0..n);
            let proposal = model.propose(&prev.particle(r)[i], rng);
            let ll_new = model.log_likelihood(i, &proposal);
            let li_new = incident_log_interaction(model, graph, &current, i, &proposal);
            let li_old = incident_log_interaction(model, graph, &current, i, &current[i]);
            let alpha = log_acceptance(ll_new, loglik[i], li_new, li_old);
            stats.proposals += 1;
            if rng.random::<f64>() < alpha {
                current[i] = proposal;
                loglik[i] = ll_new;
                stats.accepted += 1;
            }
        }
        if iter >= burn_in {
            out.push(&current);
        }
    }
    (out, stats)
}

/// One MCMC-MRF tracking step on an image frame.
pub fn mcmc_mrf_step<R: Rng + ?Sized>(
    prev: &SampleSet,
    frame: &Frame,
    template: &TemplateModel,
    graph: &MrfGraph,
    cfg: &McmcConfig,
    rng: &mut R,
) -> (SampleSet, TrackEstimate, ChainStats) {
    let model = ImageModel {
        frame,
        template,
        motion: cfg.motion,
        interaction: cfg.interaction,
    };
    let (samples, stats) = run_mh_chain(prev, &model, graph, cfg.n_samples, cfg.burn_in, rng);
    let estimate = samples.estimate();
    (samples, estimate, stats)
}

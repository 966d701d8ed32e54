//! Foreground/background template model and the template-matching
//! log-likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{sample_patch_with, Frame};
use crate::geometry::{JointParticle, PatchDims, TargetState};

/// Lower bound on learned standard deviations.
pub const SIGMA_FLOOR: f64 = 1e-3;

/// Scalar intensity statistics of one template class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateStats {
    pub mu: f64,
    pub sigma: f64,
}

/// Learns scalar template statistics from labeled training patches.
///
/// `mu` is the mean of the per-pixel mean image; `sigma` is the RMS deviation
/// of every training pixel from `mu`, floored at [`SIGMA_FLOOR`].
pub fn learn_template(patches: &[Vec<f64>], dims: PatchDims) -> Result<TemplateStats> {
    if patches.len() < 2 {
        return Err(Error::config(format!(
            "template learning needs at least 2 patches, got {}",
            patches.len()
        )));
    }
    let area = dims.area();
    if let Some((k, p)) = patches.iter().enumerate().find(|(_, p)| p.len() != area) {
        return Err(Error::config(format!(
            "training patch {k} has {} pixels, expected {area}",
            p.len()
        )));
    }
    let mut mean_image = vec![0.0; area];
    for patch in patches {
        for (m, v) in mean_image.iter_mut().zip(patch) {
            *m += v;
        }
    }
    let n = patches.len() as f64;
    let mu = mean_image.iter().map(|m| m / n).sum::<f64>() / area as f64;
    let sq: f64 = patches.iter().flatten().map(|v| (v - mu).powi(2)).sum();
    let sigma = (sq / (n * area as f64)).sqrt().max(SIGMA_FLOOR);
    Ok(TemplateStats { mu, sigma })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateModel {
    pub mu_f: f64,
    pub sigma_f: f64,
    pub mu_b: f64,
    pub sigma_b: f64,
    #[serde(default)]
    pub dims: PatchDims,
}

impl TemplateModel {
    pub fn new(foreground: TemplateStats, background: TemplateStats, dims: PatchDims) -> Result<Self> {
        let model = TemplateModel {
            mu_f: foreground.mu,
            sigma_f: foreground.sigma,
            mu_b: background.mu,
            sigma_b: background.sigma,
            dims,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn learn(foreground: &[Vec<f64>], background: &[Vec<f64>], dims: PatchDims) -> Result<Self> {
        TemplateModel::new(
            learn_template(foreground, dims)?,
            learn_template(background, dims)?,
            dims,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        for (name, mu) in [("mu_f", self.mu_f), ("mu_b", self.mu_b)] {
            if !(0.0..=1.0).contains(&mu) {
                errors.push(format!("template.{name} must lie in [0, 1], got {mu}"));
            }
        }
        for (name, sigma) in [("sigma_f", self.sigma_f), ("sigma_b", self.sigma_b)] {
            if !(sigma.is_finite() && sigma > 0.0) {
                errors.push(format!("template.{name} must be positive, got {sigma}"));
            }
        }
        if let Err(Error::Config(e)) = self.dims.validate() {
            errors.extend(e);
        }
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        if self.mu_f == self.mu_b {
            return Err(Error::DegenerateTemplate(self.mu_f));
        }
        Ok(())
    }
}

/// Template-matching log-likelihood of one target hypothesis:
/// `-|F - mu_f| / (2 sigma_f) + |F - mu_b| / (2 sigma_b)` with `|.|` the L2
/// norm over the sampled patch `F`. Off-frame samples read as `mu_b`.
pub fn log_likelihood(frame: &Frame, state: &TargetState, model: &TemplateModel) -> f64 {
    let mut sq_f = 0.0;
    let mut sq_b = 0.0;
    sample_patch_with(frame, state, model.dims, model.mu_b, |v| {
        sq_f += (v - model.mu_f) * (v - model.mu_f);
        sq_b += (v - model.mu_b) * (v - model.mu_b);
    });
    patch_log_likelihood(sq_f.sqrt(), sq_b.sqrt(), model)
}

/// The likelihood combination given the two distances.
pub fn patch_log_likelihood(dist_f: f64, dist_b: f64, model: &TemplateModel) -> f64 {
    -0.5 * dist_f / model.sigma_f + 0.5 * dist_b / model.sigma_b
}

pub fn joint_log_likelihood(frame: &Frame, particle: &JointParticle, model: &TemplateModel) -> f64 {
    particle
        .targets()
        .iter()
        .map(|s| log_likelihood(frame, s, model))
        .sum()
}

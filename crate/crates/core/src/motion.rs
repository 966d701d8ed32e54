//! Interaction-free motion model.
//!
//! A target moves by a Gaussian displacement expressed in its own body frame:
//! the heading is perturbed first and the forward/lateral displacement is
//! then rotated by the *updated* heading.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_diff, normalize_angle, JointParticle, TargetState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionParams {
    /// Forward displacement std-dev, pixels.
    pub sigma_x: f64,
    /// Lateral displacement std-dev, pixels.
    pub sigma_y: f64,
    /// Heading change std-dev, radians.
    pub sigma_theta: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        MotionParams {
            sigma_x: 5.0,
            sigma_y: 3.0,
            sigma_theta: 0.4,
        }
    }
}

impl MotionParams {
    pub fn validate(&self) -> Result<()> {
        let errors: Vec<String> = [
            ("sigma_x", self.sigma_x),
            ("sigma_y", self.sigma_y),
            ("sigma_theta", self.sigma_theta),
        ]
        .iter()
        .filter(|(_, v)| !(v.is_finite() && *v > 0.0))
        .map(|(name, v)| format!("motion.{name} must be positive, got {v}"))
        .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }
}

/// Body-frame displacement `(dx forward, dy lateral, dtheta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl Displacement {
    pub fn sample<R: Rng + ?Sized>(params: &MotionParams, rng: &mut R) -> Self {
        let mut draw = |sigma: f64| -> f64 {
            let z: f64 = StandardNormal.sample(rng);
            sigma * z
        };
        let dx = draw(params.sigma_x);
        let dy = draw(params.sigma_y);
        let dtheta = draw(params.sigma_theta);
        Displacement { dx, dy, dtheta }
    }
}

/// Deterministic half of the motion model.
pub fn apply_displacement(state: &TargetState, d: Displacement) -> TargetState {
    let theta = normalize_angle(state.theta + d.dtheta);
    let (sin, cos) = theta.sin_cos();
    TargetState {
        x: state.x + cos * d.dx - sin * d.dy,
        y: state.y + sin * d.dx + cos * d.dy,
        theta,
    }
}

/// Recovers the body-frame displacement that maps `prev` onto `next`.
///
/// The heading change is taken as the wrapped difference, so it lies in
/// `[-pi, pi)`.
pub fn displacement_between(prev: &TargetState, next: &TargetState) -> Displacement {
    let (sin, cos) = next.theta.sin_cos();
    let ex = next.x - prev.x;
    let ey = next.y - prev.y;
    Displacement {
        dx: cos * ex + sin * ey,
        dy: -sin * ex + cos * ey,
        dtheta: angle_diff(next.theta, prev.theta),
    }
}

pub fn propagate_target<R: Rng + ?Sized>(
    state: &TargetState,
    params: &MotionParams,
    rng: &mut R,
) -> TargetState {
    apply_displacement(state, Displacement::sample(params, rng))
}

/// Applies the per-target motion model independently to every target.
pub fn propagate_joint<R: Rng + ?Sized>(
    particle: &JointParticle,
    params: &MotionParams,
    rng: &mut R,
) -> JointParticle {
    JointParticle(
        particle
            .targets()
            .iter()
            .map(|s| propagate_target(s, params, rng))
            .collect(),
    )
}

fn log_normal_pdf(x: f64, sigma: f64) -> f64 {
    -0.5 * (x / sigma).powi(2) - sigma.ln() - 0.5 * (2.0 * PI).ln()
}

/// Log density of moving from `prev` to `next` under the motion model,
/// measured in displacement coordinates (the rotation has unit Jacobian).
pub fn log_transition_density(next: &TargetState, prev: &TargetState, params: &MotionParams) -> f64 {
    let d = displacement_between(prev, next);
    log_normal_pdf(d.dx, params.sigma_x)
        + log_normal_pdf(d.dy, params.sigma_y)
        + log_normal_pdf(d.dtheta, params.sigma_theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero() -> Displacement {
        Displacement {
            dx: 0.0,
            dy: 0.0,
            dtheta: 0.0,
        }
    }

    #[test]
    fn displacement_examples() {
        let s = TargetState::new(10.0, 20.0, 0.0);
        assert_eq!(apply_displacement(&s, zero()), s);
        let unit = Displacement { dx: 1.0, ..zero() };
        assert_eq!(apply_displacement(&s, unit), TargetState::new(11.0, 20.0, 0.0));
        let up = apply_displacement(&TargetState::new(10.0, 20.0, PI / 2.0), unit);
        assert_abs_diff_eq!(up.x, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(up.y, 21.0, epsilon = 1e-12);
        assert_eq!(up.theta, PI / 2.0);
    }

    #[test]
    fn rotation_uses_updated_heading() {
        let s = TargetState::new(0.0, 0.0, 0.0);
        let d = Displacement {
            dx: 2.0,
            dy: 0.0,
            dtheta: PI / 2.0,
        };
        let out = apply_displacement(&s, d);
        assert_abs_diff_eq!(out.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.y, 2.0, epsilon = 1e-12);
        assert_eq!(out.theta, PI / 2.0);
    }

    #[test]
    fn joint_with_one_target_matches_single() {
        let params = MotionParams::default();
        let s = TargetState::new(5.0, 6.0, 1.0);
        let single = propagate_target(&s, &params, &mut ChaCha8Rng::seed_from_u64(9));
        let joint = propagate_joint(
            &JointParticle::new(vec![s]),
            &params,
            &mut ChaCha8Rng::seed_from_u64(9),
        );
        assert_eq!(joint.targets(), &[single]);
    }

    #[test]
    fn seeded_draws_are_reproducible() {
        let params = MotionParams::default();
        let p = JointParticle::new(vec![TargetState::new(1.0, 2.0, 0.5); 4]);
        let a = propagate_joint(&p, &params, &mut ChaCha8Rng::seed_from_u64(3));
        let b = propagate_joint(&p, &params, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn moments_of_displacements() {
        let params = MotionParams::default();
        let prev = JointParticle::new(vec![
            TargetState::new(100.0, 100.0, 0.3),
            TargetState::new(300.0, 50.0, -2.0),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mut sums = [[0.0f64; 3]; 2];
        let mut sq = [[0.0f64; 3]; 2];
        for _ in 0..n {
            let next = propagate_joint(&prev, &params, &mut rng);
            for i in 0..2 {
                assert!((-PI..PI).contains(&next[i].theta));
                let d = displacement_between(&prev[i], &next[i]);
                for (k, v) in [d.dx, d.dy, d.dtheta].into_iter().enumerate() {
                    sums[i][k] += v;
                    sq[i][k] += v * v;
                }
            }
        }
        let sigmas = [params.sigma_x, params.sigma_y, params.sigma_theta];
        for i in 0..2 {
            for k in 0..3 {
                let mean = sums[i][k] / n as f64;
                let sd = (sq[i][k] / n as f64 - mean * mean).sqrt();
                assert!(mean.abs() < 3.0 * sigmas[k] / (n as f64).sqrt(), "mean {mean}");
                assert!((sd / sigmas[k] - 1.0).abs() < 0.02, "sd {sd}");
            }
        }
    }

    #[test]
    fn density_examples() {
        let params = MotionParams::default();
        let prev = TargetState::new(50.0, 60.0, 0.0);
        let max = log_transition_density(&prev, &prev, &params);
        let by_hand = [5.0f64, 3.0, 0.4]
            .iter()
            .map(|s| -s.ln() - 0.5 * (2.0 * PI).ln())
            .sum::<f64>();
        assert_abs_diff_eq!(max, by_hand, epsilon = 1e-12);
        let next = TargetState::new(55.0, 60.0, 0.0);
        assert_abs_diff_eq!(log_transition_density(&next, &prev, &params), max - 0.5, epsilon = 1e-12);
    }

    #[test]
    fn density_integrates_to_one() {
        // Midpoint rule over +-6 sigma in every displacement coordinate,
        // evaluated through actual pose pairs.
        let params = MotionParams::default();
        let prev = TargetState::new(0.0, 0.0, 0.7);
        let steps = 60;
        let span = |s: f64| (-6.0 * s, 12.0 * s / steps as f64);
        let (x0, hx) = span(params.sigma_x);
        let (y0, hy) = span(params.sigma_y);
        let (t0, ht) = span(params.sigma_theta);
        let mut total = 0.0;
        for a in 0..steps {
            for b in 0..steps {
                for c in 0..steps {
                    let d = Displacement {
                        dx: x0 + (a as f64 + 0.5) * hx,
                        dy: y0 + (b as f64 + 0.5) * hy,
                        dtheta: t0 + (c as f64 + 0.5) * ht,
                    };
                    let next = apply_displacement(&prev, d);
                    total += log_transition_density(&next, &prev, &params).exp();
                }
            }
        }
        total *= hx * hy * ht;
        assert!((total - 1.0).abs() < 0.01, "integral {total}");
    }

    #[test]
    fn validation_lists_every_bad_sigma() {
        let p = MotionParams {
            sigma_x: 0.0,
            sigma_y: -1.0,
            sigma_theta: 0.4,
        };
        match p.validate() {
            Err(Error::Config(errs)) => assert_eq!(errs.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}

//! Failure detection, per-frame metrics and their CSV forms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::tracker::Correctable;
use crate::geometry::TargetState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    /// 1-based frame number.
    pub frame: usize,
    /// Position error of each target before correction, pixels.
    pub distances: Vec<f64>,
    /// Targets whose error exceeded the threshold and were snapped to truth.
    pub failed: Vec<usize>,
    pub acceptance_rate: Option<f64>,
    pub mean_ess: Option<f64>,
}

impl FrameMetrics {
    pub fn failures(&self) -> usize {
        self.failed.len()
    }

    pub fn mean_distance(&self) -> f64 {
        if self.distances.is_empty() {
            0.0
        } else {
            self.distances.iter().sum::<f64>() / self.distances.len() as f64
        }
    }
}

/// Flags every target farther than `threshold` from its groundtruth position
/// and snaps all of that target's hypotheses to the groundtruth pose. Lost and
/// switched trackers are not distinguished.
///
/// Panics if `estimates` and `truth` cover different numbers of targets.
pub fn detect_and_correct<C: Correctable + ?Sized>(
    estimates: &[TargetState],
    truth: &[TargetState],
    threshold: f64,
    tracker: &mut C,
) -> Vec<usize> {
    assert_eq!(
        estimates.len(),
        truth.len(),
        "estimates cover {} targets, groundtruth {}",
        estimates.len(),
        truth.len()
    );
    let failed: Vec<usize> = estimates
        .iter()
        .zip(truth)
        .enumerate()
        .filter(|(_, (e, t))| e.distance_to(t) > threshold)
        .map(|(i, _)| i)
        .collect();
    for &i in &failed {
        tracker.snap_target(i, truth[i]);
    }
    failed
}

/// `round(count * reference / observed)`, halves rounded up.
pub fn scale_failures(count: u64, frames_observed: u64, frames_reference: u64) -> u64 {
    assert!(frames_observed >= 1, "need at least one observed frame");
    (2 * count * frames_reference + frames_observed) / (2 * frames_observed)
}

/// Mean error over targets for every frame.
pub fn mean_distance_series(metrics: &[FrameMetrics]) -> Vec<f64> {
    metrics.iter().map(FrameMetrics::mean_distance).collect()
}

pub const METRICS_HEADER: &str = "frame,target,dist_px,failed";

/// `frame,target,dist_px,failed` with one row per target per frame.
pub fn metrics_csv(metrics: &[FrameMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in metrics {
        for (target, d) in m.distances.iter().enumerate() {
            let failed = u8::from(m.failed.contains(&target));
            writeln!(out, "{},{},{},{}", m.frame, target, d, failed).unwrap();
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-frame aggregates: mean distance, failures and sampler diagnostics.
pub fn diagnostics_csv(metrics: &[FrameMetrics]) -> String {
    let mut out = String::from("frame,mean_dist_px,failures,acceptance_rate,mean_ess\n");
    for m in metrics {
        writeln!(
            out,
            "{},{},{},{},{}",
            m.frame,
            m.mean_distance(),
            m.failures(),
            opt(m.acceptance_rate),
            opt(m.mean_ess)
        )
        .unwrap();
    }
    out
}

/// Parses a metrics CSV back into per-frame metrics (diagnostics are lost).
pub fn parse_metrics_csv(text: &str) -> Result<Vec<FrameMetrics>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(format!("expected header {METRICS_HEADER:?}"));
    }
    let mut out: Vec<FrameMetrics> = Vec::new();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let bad = || format!("line {}: {line:?}", k + 2);
        if fields.len() != 4 {
            return Err(bad());
        }
        let frame: usize = fields[0].parse().map_err(|_| bad())?;
        let target: usize = fields[1].parse().map_err(|_| bad())?;
        let dist: f64 = fields[2].parse().map_err(|_| bad())?;
        let failed = match fields[3] {
            "0" => false,
            "1" => true,
            _ => return Err(bad()),
        };
        if out.last().is_none_or(|m| m.frame != frame) {
            out.push(FrameMetrics {
                frame,
                distances: Vec::new(),
                failed: Vec::new(),
                acceptance_rate: None,
                mean_ess: None,
            });
        }
        let m = out.last_mut().expect("pushed above");
        if target != m.distances.len() {
            return Err(bad());
        }
        m.distances.push(dist);
        if failed {
            m.failed.push(target);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::SampleSet;
    use crate::JointParticle;

    #[test]
    fn no_failures_below_threshold() {
        let truth = vec![TargetState::new(0.0, 0.0, 0.0), TargetState::new(100.0, 0.0, 0.0)];
        let est = vec![TargetState::new(30.0, 0.0, 0.0), TargetState::new(100.0, 49.9, 0.0)];
        let mut set = SampleSet::replicate(&JointParticle::new(est.clone()), 4);
        let before = set.clone();
        assert!(detect_and_correct(&est, &truth, 50.0, &mut set).is_empty());
        assert_eq!(set, before);
    }

    #[test]
    fn failure_snaps_target_to_truth() {
        let truth = vec![TargetState::new(0.0, 0.0, 0.3), TargetState::new(100.0, 0.0, 0.0)];
        let est = vec![TargetState::new(51.0, 0.0, 0.0), TargetState::new(101.0, 0.0, 0.0)];
        let mut set = SampleSet::replicate(&JointParticle::new(est.clone()), 4);
        assert_eq!(detect_and_correct(&est, &truth, 50.0, &mut set), vec![0]);
        for p in set.iter() {
            assert_eq!(p, &[truth[0], est[1]]);
        }
        // Idempotent: the corrected estimate has zero error.
        let corrected = set.estimate().targets;
        assert!(detect_and_correct(&corrected, &truth, 50.0, &mut set).is_empty());
    }

    #[test]
    fn hijacked_tracker_is_detected() {
        // Both trackers sit on agent 1 while agent 0 has walked 60 px away.
        let truth = vec![TargetState::new(160.0, 100.0, 0.0), TargetState::new(100.0, 100.0, 1.5)];
        let est = vec![TargetState::new(101.0, 99.0, 1.4), TargetState::new(99.0, 101.0, 1.5)];
        let mut set = SampleSet::replicate(&JointParticle::new(est.clone()), 2);
        assert_eq!(detect_and_correct(&est, &truth, 50.0, &mut set), vec![0]);
    }

    #[test]
    fn infinite_threshold_never_fires() {
        let truth = vec![TargetState::new(0.0, 0.0, 0.0)];
        let est = vec![TargetState::new(1e6, 0.0, 0.0)];
        let mut set = SampleSet::replicate(&JointParticle::new(est.clone()), 1);
        assert!(detect_and_correct(&est, &truth, f64::INFINITY, &mut set).is_empty());
    }

    #[test]
    #[should_panic(expected = "groundtruth")]
    fn id_mismatch_panics() {
        let mut set = SampleSet::replicate(&JointParticle::new(vec![TargetState::new(0.0, 0.0, 0.0)]), 1);
        detect_and_correct(&[TargetState::new(0.0, 0.0, 0.0)], &[], 50.0, &mut set);
    }

    #[test]
    fn scaling_examples() {
        assert_eq!(scale_failures(0, 662, 10_400), 0);
        assert_eq!(scale_failures(17, 662, 10_400), 267);
        assert_eq!(scale_failures(26, 662, 10_400), 408);
        assert_eq!(scale_failures(23, 662, 662), 23);
        assert_eq!(scale_failures(1, 2, 1), 1);
    }

    #[test]
    fn mean_distance_examples() {
        let m = |d: Vec<f64>| FrameMetrics {
            frame: 1,
            distances: d,
            failed: vec![],
            acceptance_rate: None,
            mean_ess: None,
        };
        assert_eq!(mean_distance_series(&[m(vec![0.0, 0.0]), m(vec![0.0])]), vec![0.0, 0.0]);
        assert_eq!(mean_distance_series(&[m(vec![2.0, 4.0])]), vec![3.0]);
    }

    #[test]
    fn metrics_csv_parses_back() {
        let metrics = vec![
            FrameMetrics {
                frame: 1,
                distances: vec![0.0, 0.0],
                failed: vec![],
                acceptance_rate: Some(0.5),
                mean_ess: None,
            },
            FrameMetrics {
                frame: 2,
                distances: vec![1.25, 60.123456789],
                failed: vec![1],
                acceptance_rate: Some(0.25),
                mean_ess: None,
            },
        ];
        let text = metrics_csv(&metrics);
        assert!(text.starts_with("frame,target,dist_px,failed\n1,0,0,0\n"));
        let back = parse_metrics_csv(&text).unwrap();
        assert_eq!(back[1].distances, metrics[1].distances);
        assert_eq!(back[1].failed, vec![1]);
        assert!(parse_metrics_csv("nope\n").is_err());
    }
}

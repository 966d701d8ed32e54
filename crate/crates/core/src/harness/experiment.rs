//! The experiment loop: track a sequence, correct failures, write outputs.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, TrackerKind};
use super::metrics::{detect_and_correct, diagnostics_csv, metrics_csv, scale_failures, FrameMetrics};
use super::tracker::Tracker;
use crate::appearance::TemplateModel;
use crate::error::{Error, Result};
use crate::frame::{sample_patch, Frame};
use crate::geometry::{OrientedRect, PatchDims, TargetState};
use crate::pgm;
use crate::samplers::McmcConfig;
use crate::simulator::Simulation;
use crate::tracks::{GroundTruthTrack, PoseTrack};

/// Training patches per template class.
pub const TRAINING_PATCHES: usize = 32;

const TEMPLATE_STREAM: u64 = 2;

/// Frames paired with their groundtruth poses.
enum Sequence {
    Simulated(Box<Simulation>),
    Files {
        paths: Vec<PathBuf>,
        truth: GroundTruthTrack,
        next: usize,
    },
}

impl Sequence {
    fn open(cfg: &RunConfig) -> Result<(Self, usize)> {
        if let Some(scenario) = &cfg.scenario {
            let n = scenario.n_frames;
            return Ok((Sequence::Simulated(Box::new(Simulation::new(scenario.clone())?)), n));
        }
        let dir = cfg.frames_dir.as_ref().expect("validated: frames_dir or scenario");
        let gt_path = cfg.groundtruth.as_ref().expect("validated: groundtruth with frames_dir");
        let truth = GroundTruthTrack::load(gt_path)?;
        let paths = pgm::list_frames(dir)?;
        if paths.is_empty() {
            return Err(Error::Pgm {
                path: dir.clone(),
                reason: "no .pgm frames found".into(),
            });
        }
        if paths.len() != truth.n_frames() {
            return Err(Error::Csv {
                path: gt_path.clone(),
                reason: format!(
                    "groundtruth covers {} frames but {} has {}",
                    truth.n_frames(),
                    dir.display(),
                    paths.len()
                ),
            });
        }
        let n = paths.len();
        Ok((Sequence::Files { paths, truth, next: 0 }, n))
    }

    fn next_frame(&mut self) -> Option<Result<(Frame, Vec<TargetState>)>> {
        match self {
            Sequence::Simulated(sim) => sim.next().map(Ok),
            Sequence::Files { paths, truth, next } => {
                let k = *next;
                let path = paths.get(k)?;
                *next += 1;
                Some(pgm::read(path).map(|f| (f, truth.frame(k).to_vec())))
            }
        }
    }
}

/// Poses whose rectangles stay inside the frame and clear of every target.
fn background_pose<R: Rng + ?Sized>(
    frame: &Frame,
    truth: &[TargetState],
    dims: PatchDims,
    rng: &mut R,
) -> Option<TargetState> {
    let margin = dims.half_diagonal() + 1.0;
    let (w, h) = (frame.width() as f64, frame.height() as f64);
    if w <= 2.0 * margin || h <= 2.0 * margin {
        return None;
    }
    (0..1000).find_map(|_| {
        let s = TargetState::new(
            rng.random_range(margin..w - margin),
            rng.random_range(margin..h - margin),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        truth
            .iter()
            .all(|t| t.distance_to(&s) > 2.0 * margin)
            .then_some(s)
    })
}

/// Learns the appearance model from labeled frames: foreground patches at
/// groundtruth poses and background patches at random clear poses, up to
/// [`TRAINING_PATCHES`] of each.
pub fn learn_template_from_truth<R: Rng + ?Sized>(
    labeled: &[(Frame, Vec<TargetState>)],
    dims: PatchDims,
    rng: &mut R,
) -> Result<TemplateModel> {
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for (frame, truth) in labeled {
        for s in truth {
            if fg.len() < TRAINING_PATCHES {
                fg.push(sample_patch(frame, s, dims, 0.0));
            }
        }
        while bg.len() < TRAINING_PATCHES {
            match background_pose(frame, truth, dims, rng) {
                Some(s) => bg.push(sample_patch(frame, &s, dims, 0.0)),
                None => break,
            }
        }
        if fg.len() >= TRAINING_PATCHES && bg.len() >= TRAINING_PATCHES {
            break;
        }
    }
    TemplateModel::learn(&fg, &bg, dims)
}

/// Reads training patches from `foreground/` and `background/` PGM files.
pub fn learn_template_from_dir(dir: &Path, dims: PatchDims) -> Result<TemplateModel> {
    let load = |name: &str| -> Result<Vec<Vec<f64>>> {
        let sub = dir.join(name);
        pgm::list_frames(&sub)?
            .iter()
            .map(|p| {
                let f = pgm::read(p)?;
                if f.width() != dims.length as usize || f.height() != dims.width as usize {
                    return Err(Error::Pgm {
                        path: p.clone(),
                        reason: format!(
                            "training patch is {}x{}, expected {}x{}",
                            f.width(),
                            f.height(),
                            dims.length,
                            dims.width
                        ),
                    });
                }
                Ok(f.pixels().to_vec())
            })
            .collect()
    };
    TemplateModel::learn(&load("foreground")?, &load("background")?, dims)
}

/// Outcome of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub tracker: TrackerKind,
    pub particles: usize,
    pub rng_seed: u64,
    pub frames_observed: usize,
    pub reference_frames: usize,
    pub total_failures: usize,
    pub equivalent_failures: u64,
    pub mean_distance_px: f64,
    pub max_distance_px: f64,
    pub acceptance_rate_mean: Option<f64>,
    pub template: TemplateModel,
    pub wall_clock_s: f64,
    pub config: RunConfig,
    #[serde(skip)]
    pub metrics: Vec<FrameMetrics>,
    #[serde(skip)]
    pub estimates: PoseTrack,
}

pub const SUMMARY_HEADER: &str =
    "tracker,particles,seed,frames,failures,equivalent_failures,mean_dist_px,max_dist_px,acceptance_rate_mean";

impl RunReport {
    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.tracker,
            self.particles,
            self.rng_seed,
            self.frames_observed,
            self.total_failures,
            self.equivalent_failures,
            self.mean_distance_px,
            self.max_distance_px,
            self.acceptance_rate_mean.map(|v| v.to_string()).unwrap_or_default()
        )
    }

    pub fn mean_distance_series(&self) -> Vec<f64> {
        super::metrics::mean_distance_series(&self.metrics)
    }
}

/// Builds a report from per-frame metrics.
pub(crate) fn summarize(
    cfg: &RunConfig,
    template: TemplateModel,
    metrics: Vec<FrameMetrics>,
    estimates: PoseTrack,
    wall_clock_s: f64,
) -> RunReport {
    let total_failures = metrics.iter().map(FrameMetrics::failures).sum();
    let all: Vec<f64> = metrics.iter().flat_map(|m| m.distances.iter().copied()).collect();
    let mean_distance_px = if all.is_empty() {
        0.0
    } else {
        all.iter().sum::<f64>() / all.len() as f64
    };
    let max_distance_px = all.iter().copied().fold(0.0, f64::max);
    let rates: Vec<f64> = metrics.iter().filter_map(|m| m.acceptance_rate).collect();
    let acceptance_rate_mean = (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);
    let frames_observed = metrics.len();
    RunReport {
        tracker: cfg.tracker,
        particles: cfg.particles,
        rng_seed: cfg.rng_seed,
        frames_observed,
        reference_frames: cfg.reference_frames,
        total_failures,
        equivalent_failures: scale_failures(
            total_failures as u64,
            frames_observed.max(1) as u64,
            cfg.reference_frames as u64,
        ),
        mean_distance_px,
        max_distance_px,
        acceptance_rate_mean,
        template,
        wall_clock_s,
        config: cfg.clone(),
        metrics,
        estimates,
    }
}

fn annotate(frame: &Frame, estimates: &[TargetState], failed: &[usize], dims: PatchDims) -> Frame {
    let mut out = frame.clone();
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    for (i, s) in estimates.iter().enumerate() {
        let rect = OrientedRect::new(s, dims);
        let value = if failed.contains(&i) { 0.0 } else { 1.0 };
        rect.for_each_pixel(|c, r| {
            let edge = [(c - 1, r), (c + 1, r), (c, r - 1), (c, r + 1)]
                .iter()
                .any(|&(cc, rr)| !rect.contains_pixel(cc, rr));
            if edge && (0..w).contains(&c) && (0..h).contains(&r) {
                out.set(c as usize, r as usize, value);
            }
        });
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    pgm::write_atomic(path, contents.as_bytes())
}

/// Runs one tracker over one sequence.
///
/// Trackers start at the first frame's groundtruth, which also counts as the
/// first frame's estimate. Every later frame is tracked, checked against the
/// groundtruth and corrected where the error exceeds the failure threshold.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let started = Instant::now();
    let (mut sequence, n_frames) = Sequence::open(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut template_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    template_rng.set_stream(TEMPLATE_STREAM);

    let frames_dir = match (&cfg.output_dir, cfg.dump_frames) {
        (Some(out), true) => Some(out.join("frames")),
        _ => None,
    };
    if let Some(out) = &cfg.output_dir {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    }
    if let Some(dir) = &frames_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let first = sequence
        .next_frame()
        .ok_or_else(|| Error::config("sequence has no frames"))??;
    // Frames read ahead for template learning, replayed before the rest.
    let mut pending = VecDeque::new();
    let template = match (&cfg.template, &cfg.template_dir) {
        (Some(t), _) => *t,
        (None, Some(dir)) => learn_template_from_dir(dir, cfg.dims)?,
        (None, None) => {
            let mut labeled = vec![first.clone()];
            let needed = TRAINING_PATCHES.div_ceil(first.1.len().max(1));
            while labeled.len() < needed {
                match sequence.next_frame() {
                    Some(item) => labeled.push(item?),
                    None => break,
                }
            }
            let t = learn_template_from_truth(&labeled, cfg.dims, &mut template_rng)?;
            pending.extend(labeled.into_iter().skip(1));
            t
        }
    };
    log::debug!("template {template:?}");

    let mcmc = McmcConfig {
        n_samples: cfg.particles,
        burn_in: cfg.burn_in,
        motion: cfg.motion,
        interaction: cfg.interaction,
        rng_seed: cfg.rng_seed,
    };
    let (first_frame, first_truth) = first;
    let n_targets = first_truth.len();
    let mut tracker = Tracker::new(cfg.tracker, &first_truth, mcmc);
    let mut estimates = PoseTrack::new();
    estimates.push(first_truth.clone());
    let mut metrics = vec![FrameMetrics {
        frame: 1,
        distances: vec![0.0; n_targets],
        failed: Vec::new(),
        acceptance_rate: None,
        mean_ess: None,
    }];
    if let Some(dir) = &frames_dir {
        pgm::write(&dir.join(pgm::frame_file_name(1)), &annotate(&first_frame, &first_truth, &[], template.dims))?;
    }

    let mut number = 1;
    while let Some(item) = pending.pop_front().map(Ok).or_else(|| sequence.next_frame()) {
        let (frame, truth) = item?;
        number += 1;
        if truth.len() != n_targets {
            return Err(Error::config(format!(
                "frame {number} has {} targets, expected {n_targets}",
                truth.len()
            )));
        }
        let (estimate, diag) = tracker.step(&frame, &template, &mut rng);
        let distances: Vec<f64> = estimate.iter().zip(&truth).map(|(e, t)| e.distance_to(t)).collect();
        let failed = detect_and_correct(&estimate, &truth, cfg.failure_threshold, &mut tracker);
        if let Some(dir) = &frames_dir {
            pgm::write(
                &dir.join(pgm::frame_file_name(number)),
                &annotate(&frame, &estimate, &failed, template.dims),
            )?;
        }
        estimates.push(estimate);
        metrics.push(FrameMetrics {
            frame: number,
            distances,
            failed,
            acceptance_rate: diag.acceptance_rate,
            mean_ess: diag.mean_ess,
        });
    }
    if number != n_frames {
        log::warn!("expected {n_frames} frames, tracked {number}");
    }

    let report = summarize(cfg, template, metrics, estimates, started.elapsed().as_secs_f64());
    if let Some(out) = &cfg.output_dir {
        write_run_outputs(out, &report)?;
    }
    Ok(report)
}

/// Writes metrics, diagnostics, estimates, summary and the report.
pub fn write_run_outputs(out: &Path, report: &RunReport) -> Result<()> {
    write_file(&out.join("metrics.csv"), &metrics_csv(&report.metrics))?;
    write_file(&out.join("diagnostics.csv"), &diagnostics_csv(&report.metrics))?;
    report.estimates.save(&out.join("estimates.csv"))?;
    write_file(
        &out.join("summary.csv"),
        &format!("{SUMMARY_HEADER}\n{}\n", report.summary_row()),
    )?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_file(&out.join("report.json"), &json)
}

/// Recomputes metrics from stored (uncorrected) estimates and groundtruth.
pub fn evaluate_estimates(
    estimates: &PoseTrack,
    truth: &GroundTruthTrack,
    threshold: f64,
) -> Result<Vec<FrameMetrics>> {
    if estimates.n_frames() != truth.n_frames() || estimates.n_targets() != truth.n_targets() {
        return Err(Error::config(format!(
            "estimates cover {} frames x {} targets, groundtruth {} x {}",
            estimates.n_frames(),
            estimates.n_targets(),
            truth.n_frames(),
            truth.n_targets()
        )));
    }
    Ok(estimates
        .frames()
        .zip(truth.frames())
        .enumerate()
        .map(|(k, (est, gt))| {
            let distances: Vec<f64> = est.iter().zip(gt).map(|(e, t)| e.distance_to(t)).collect();
            let failed = distances
                .iter()
                .enumerate()
                .filter(|(_, d)| **d > threshold)
                .map(|(i, _)| i)
                .collect();
            FrameMetrics {
                frame: k + 1,
                distances,
                failed,
                acceptance_rate: None,
                mean_ess: None,
            }
        })
        .collect())
}

/// One tracker setting in a comparison matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrackerSetting {
    pub tracker: TrackerKind,
    pub particles: usize,
}

impl std::str::FromStr for TrackerSetting {
    type Err = Error;

    /// `mcmc-mrf:200` or `independent:10`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, count) = s
            .split_once(':')
            .ok_or_else(|| Error::config(format!("tracker setting {s:?} must look like kind:particles")))?;
        Ok(TrackerSetting {
            tracker: kind.parse()?,
            particles: count
                .parse()
                .map_err(|_| Error::config(format!("bad particle count in {s:?}")))?,
        })
    }
}

impl std::fmt::Display for TrackerSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.tracker, self.particles)
    }
}

/// Aggregate of one tracker setting over all seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting: TrackerSetting,
    pub seeds: usize,
    pub mean_failures: f64,
    pub mean_equivalent_failures: f64,
    pub mean_distance_px: f64,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    /// Reports per setting, ordered by seed.
    pub runs: Vec<(TrackerSetting, Vec<RunReport>)>,
    pub table: Vec<SettingSummary>,
}

impl Comparison {
    pub fn runs_for(&self, setting: TrackerSetting) -> Option<&[RunReport]> {
        self.runs.iter().find(|(s, _)| *s == setting).map(|(_, r)| r.as_slice())
    }

    pub fn summary(&self, setting: TrackerSetting) -> Option<&SettingSummary> {
        self.table.iter().find(|s| s.setting == setting)
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from("tracker,particles,seeds,mean_failures,mean_equivalent_failures,mean_dist_px\n");
        for s in &self.table {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                s.setting.tracker,
                s.setting.particles,
                s.seeds,
                s.mean_failures,
                s.mean_equivalent_failures,
                s.mean_distance_px
            )
            .unwrap();
        }
        out
    }

    /// Human-readable table in the layout of a failure-count report.
    pub fn table_text(&self, reference_frames: usize) -> String {
        let mut out = format!(
            "{:<14} {:>10} {:>6} {:>14} {:>22} {:>14}\n",
            "tracker",
            "particles",
            "seeds",
            "mean failures",
            format!("equiv. ({reference_frames} fr.)"),
            "mean dist px"
        );
        for s in &self.table {
            let particles = match s.setting.tracker {
                TrackerKind::Independent => format!("{}/target", s.setting.particles),
                TrackerKind::McmcMrf => s.setting.particles.to_string(),
            };
            writeln!(
                out,
                "{:<14} {:>10} {:>6} {:>14.2} {:>22.1} {:>14.2}",
                s.setting.tracker.to_string(),
                particles,
                s.seeds,
                s.mean_failures,
                s.mean_equivalent_failures,
                s.mean_distance_px
            )
            .unwrap();
        }
        out
    }
}

/// Runs every `(setting, seed)` cell in parallel. Each cell gets the seed as
/// both tracker and scenario seed, so all settings see the same sequences.
/// With an output directory, each cell writes to `<setting>/seed-<seed>/`.
pub fn compare(
    base: &RunConfig,
    settings: &[TrackerSetting],
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<Comparison> {
    let cells: Vec<(TrackerSetting, u64)> = settings
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let reports: Vec<Result<RunReport>> = cells
        .par_iter()
        .map(|&(setting, seed)| {
            let mut cfg = base.clone();
            cfg.tracker = setting.tracker;
            cfg.particles = setting.particles;
            cfg.rng_seed = seed;
            if let Some(s) = cfg.scenario.as_mut() {
                s.rng_seed = seed;
            }
            cfg.output_dir = out_dir.map(|d| {
                d.join(format!("{}-{}", setting.tracker, setting.particles))
                    .join(format!("seed-{seed}"))
            });
            run_experiment(&cfg)
        })
        .collect();
    let mut runs: Vec<(TrackerSetting, Vec<RunReport>)> = settings.iter().map(|&s| (s, Vec::new())).collect();
    for ((setting, _), report) in cells.iter().zip(reports) {
        let report = report?;
        runs.iter_mut()
            .find(|(s, _)| s == setting)
            .expect("setting listed")
            .1
            .push(report);
    }
    let table = runs
        .iter()
        .map(|(setting, reports)| {
            let n = reports.len().max(1) as f64;
            SettingSummary {
                setting: *setting,
                seeds: reports.len(),
                mean_failures: reports.iter().map(|r| r.total_failures as f64).sum::<f64>() / n,
                mean_equivalent_failures: reports.iter().map(|r| r.equivalent_failures as f64).sum::<f64>() / n,
                mean_distance_px: reports.iter().map(|r| r.mean_distance_px).sum::<f64>() / n,
            }
        })
        .collect();
    let comparison = Comparison { runs, table };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join("table.csv"), &comparison.table_csv())?;
        let mut all = format!("{SUMMARY_HEADER}\n");
        for (_, reports) in &comparison.runs {
            for r in reports {
                writeln!(all, "{}", r.summary_row()).unwrap();
            }
        }
        write_file(&dir.join("summary.csv"), &all)?;
    }
    Ok(comparison)
}

//! Synthetic arena of interacting agents.
//!
//! Agents walk along their heading with noisy speed and heading. When another
//! agent first comes within the encounter radius, an agent stops for that
//! frame and usually turns around. Walls reflect agents specularly. Frames
//! are rendered as flat rectangles on a flat background with pixel noise, and
//! the world state doubles as exact groundtruth.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geometry::{normalize_angle, OrientedRect, PatchDims, TargetState};
use crate::pgm;
use crate::tracks::GroundTruthTrack;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_agents: usize,
    pub arena_width: usize,
    pub arena_height: usize,
    pub agent_dims: PatchDims,
    /// Mean forward speed, pixels per frame.
    pub speed_mean: f64,
    pub speed_std: f64,
    /// Heading random-walk std-dev, radians per frame.
    pub heading_jitter: f64,
    /// Center distance (pixels) that triggers an encounter.
    pub encounter_radius: f64,
    /// Probability of turning around on an encounter.
    pub reverse_probability: f64,
    pub agent_intensity: f64,
    pub background_intensity: f64,
    pub noise_std: f64,
    pub n_frames: usize,
    pub rng_seed: u64,
    /// Explicit starting poses; random non-touching placement when absent.
    pub initial: Option<Vec<TargetState>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_agents: 20,
            arena_width: 720,
            arena_height: 480,
            agent_dims: PatchDims::default(),
            speed_mean: 1.5,
            speed_std: 0.5,
            heading_jitter: 0.1,
            encounter_radius: 20.0,
            reverse_probability: 0.8,
            agent_intensity: 0.2,
            background_intensity: 0.8,
            noise_std: 0.15,
            n_frames: 662,
            rng_seed: 0,
            initial: None,
        }
    }
}

impl ScenarioConfig {
    /// Agent centers stay this far from every wall.
    pub fn wall_margin(&self) -> f64 {
        0.5 * f64::from(self.agent_dims.length)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if let Err(Error::Config(e)) = self.agent_dims.validate() {
            errors.extend(e);
        }
        let m = 2.0 * self.wall_margin();
        if (self.arena_width as f64) <= m || (self.arena_height as f64) <= m {
            errors.push(format!(
                "arena {}x{} too small for {}-pixel agents",
                self.arena_width, self.arena_height, self.agent_dims.length
            ));
        }
        if !(0.0..=1.0).contains(&self.reverse_probability) {
            errors.push(format!(
                "scenario.reverse_probability must lie in [0, 1], got {}",
                self.reverse_probability
            ));
        }
        for (name, v) in [
            ("agent_intensity", self.agent_intensity),
            ("background_intensity", self.background_intensity),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errors.push(format!("scenario.{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("speed_std", self.speed_std),
            ("heading_jitter", self.heading_jitter),
            ("noise_std", self.noise_std),
            ("encounter_radius", self.encounter_radius),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                errors.push(format!("scenario.{name} must be non-negative, got {v}"));
            }
        }
        if !self.speed_mean.is_finite() {
            errors.push(format!("scenario.speed_mean must be finite, got {}", self.speed_mean));
        }
        if self.n_frames == 0 {
            errors.push("scenario.n_frames must be at least 1".into());
        }
        if let Some(init) = &self.initial {
            if init.len() != self.n_agents {
                errors.push(format!(
                    "scenario.initial lists {} agents but n_agents is {}",
                    init.len(),
                    self.n_agents
                ));
            }
            for (k, s) in init.iter().enumerate() {
                if !self.inside(s.x, s.y) {
                    errors.push(format!("scenario.initial[{k}] at ({}, {}) is outside the arena", s.x, s.y));
                }
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    fn inside(&self, x: f64, y: f64) -> bool {
        let m = self.wall_margin();
        (m..=self.arena_width as f64 - m).contains(&x) && (m..=self.arena_height as f64 - m).contains(&y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub state: TargetState,
    /// Signed speed used in the last step, pixels per frame.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub agents: Vec<Agent>,
    /// Pairs `(i, j)`, `i < j`, that were already within encounter range
    /// after the last step. An encounter fires only when a pair enters range.
    pub contacts: BTreeSet<(usize, usize)>,
}

impl WorldState {
    pub fn from_states(states: &[TargetState]) -> Self {
        WorldState {
            agents: states.iter().map(|&state| Agent { state, speed: 0.0 }).collect(),
            contacts: BTreeSet::new(),
        }
    }

    pub fn poses(&self) -> Vec<TargetState> {
        self.agents.iter().map(|a| a.state).collect()
    }
}

fn pairs_within(agents: &[Agent], radius: f64) -> BTreeSet<(usize, usize)> {
    let mut pairs = BTreeSet::new();
    for i in 0..agents.len() {
        for j in i + 1..agents.len() {
            if agents[i].state.distance_to(&agents[j].state) <= radius {
                pairs.insert((i, j));
            }
        }
    }
    pairs
}

/// Reflects a coordinate into `[lo, hi]`; returns whether it bounced.
fn reflect(v: &mut f64, lo: f64, hi: f64) -> bool {
    let mut bounced = false;
    for _ in 0..4 {
        if *v < lo {
            *v = 2.0 * lo - *v;
        } else if *v > hi {
            *v = 2.0 * hi - *v;
        } else {
            break;
        }
        bounced = !bounced;
    }
    *v = v.clamp(lo, hi);
    bounced
}

/// Advances the world by one frame.
pub fn step_world<R: Rng + ?Sized>(world: &WorldState, cfg: &ScenarioConfig, rng: &mut R) -> WorldState {
    let in_range = pairs_within(&world.agents, cfg.encounter_radius);
    let mut engaged = vec![false; world.agents.len()];
    for &(i, j) in in_range.difference(&world.contacts) {
        engaged[i] = true;
        engaged[j] = true;
    }
    let m = cfg.wall_margin();
    let (xmax, ymax) = (cfg.arena_width as f64 - m, cfg.arena_height as f64 - m);
    let agents = world
        .agents
        .iter()
        .zip(&engaged)
        .map(|(agent, &engaged)| {
            let jitter: f64 = StandardNormal.sample(rng);
            let speed_noise: f64 = StandardNormal.sample(rng);
            let turn = rng.random::<f64>();
            let mut theta = agent.state.theta;
            let speed = if engaged {
                if turn < cfg.reverse_probability {
                    theta += PI;
                }
                0.0
            } else {
                theta += cfg.heading_jitter * jitter;
                cfg.speed_mean + cfg.speed_std * speed_noise
            };
            let mut x = agent.state.x + speed * theta.cos();
            let mut y = agent.state.y + speed * theta.sin();
            if reflect(&mut x, m, xmax) {
                theta = PI - theta;
            }
            if reflect(&mut y, m, ymax) {
                theta = -theta;
            }
            Agent {
                state: TargetState {
                    x,
                    y,
                    theta: normalize_angle(theta),
                },
                speed,
            }
        })
        .collect();
    WorldState {
        agents,
        contacts: in_range,
    }
}

/// Flat rendering with additive Gaussian noise clamped to `[0, 1]`.
pub fn render<R: Rng + ?Sized>(world: &WorldState, cfg: &ScenarioConfig, rng: &mut R) -> Frame {
    let (w, h) = (cfg.arena_width, cfg.arena_height);
    let mut pixels = vec![cfg.background_intensity; w * h];
    for agent in &world.agents {
        OrientedRect::new(&agent.state, cfg.agent_dims).for_each_pixel(|col, row| {
            if (0..w as i64).contains(&col) && (0..h as i64).contains(&row) {
                pixels[row as usize * w + col as usize] = cfg.agent_intensity;
            }
        });
    }
    if cfg.noise_std > 0.0 {
        for p in &mut pixels {
            let n: f64 = StandardNormal.sample(rng);
            *p = (*p + cfg.noise_std * n).clamp(0.0, 1.0);
        }
    }
    Frame::new(w, h, pixels).expect("rendered frame is valid")
}

/// Random placement with every pair further apart than both the encounter
/// radius and one agent length.
fn place_agents<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Vec<TargetState>> {
    let m = cfg.wall_margin();
    let min_gap = cfg.encounter_radius.max(f64::from(cfg.agent_dims.length)) + 1.0;
    let mut placed: Vec<TargetState> = Vec::with_capacity(cfg.n_agents);
    let mut attempts = 0;
    while placed.len() < cfg.n_agents {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::config(format!(
                "could not place {} agents in a {}x{} arena",
                cfg.n_agents, cfg.arena_width, cfg.arena_height
            )));
        }
        let s = TargetState::new(
            rng.random_range(m..=cfg.arena_width as f64 - m),
            rng.random_range(m..=cfg.arena_height as f64 - m),
            rng.random_range(-PI..PI),
        );
        if placed.iter().all(|p| p.distance_to(&s) > min_gap) {
            placed.push(s);
        }
    }
    Ok(placed)
}

/// Seeded scenario playback. Frame 1 shows the initial placement.
pub struct Simulation {
    cfg: ScenarioConfig,
    world: WorldState,
    dynamics_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    emitted: usize,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let mut dynamics_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        noise_rng.set_stream(1);
        let initial = match &cfg.initial {
            Some(states) => states.clone(),
            None => place_agents(&cfg, &mut dynamics_rng)?,
        };
        Ok(Simulation {
            world: WorldState::from_states(&initial),
            cfg,
            dynamics_rng,
            noise_rng,
            emitted: 0,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Next world state without rendering.
    pub fn next_world(&mut self) -> Option<&WorldState> {
        if self.emitted == self.cfg.n_frames {
            return None;
        }
        if self.emitted > 0 {
            self.world = step_world(&self.world, &self.cfg, &mut self.dynamics_rng);
        }
        self.emitted += 1;
        Some(&self.world)
    }

    /// Groundtruth of the whole run, without rendering any frame.
    pub fn groundtruth(cfg: &ScenarioConfig) -> Result<GroundTruthTrack> {
        let mut sim = Simulation::new(cfg.clone())?;
        let mut track = GroundTruthTrack::new();
        while let Some(world) = sim.next_world() {
            track.push(world.poses());
        }
        Ok(track)
    }

    /// Writes `frame_NNNNNN.pgm` files and `groundtruth.csv` into `dir`.
    pub fn write_to_dir(cfg: &ScenarioConfig, dir: &Path) -> Result<GroundTruthTrack> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut track = GroundTruthTrack::new();
        for (k, (frame, truth)) in Simulation::new(cfg.clone())?.enumerate() {
            pgm::write(&dir.join(pgm::frame_file_name(k + 1)), &frame)?;
            track.push(truth);
        }
        track.save(&dir.join("groundtruth.csv"))?;
        Ok(track)
    }
}

impl Iterator for Simulation {
    type Item = (Frame, Vec<TargetState>);

    fn next(&mut self) -> Option<Self::Item> {
        self.next_world()?;
        let frame = render(&self.world, &self.cfg, &mut self.noise_rng);
        Some((frame, self.world.poses()))
    }
}

/// Two agents on perpendicular courses that meet at the arena center within
/// the first third of the run. Speed noise is removed and heading noise
/// capped so the meeting happens for every seed.
pub fn make_crossing_scenario(base: ScenarioConfig) -> ScenarioConfig {
    let speed = base.speed_mean.max(0.5);
    let m = base.wall_margin();
    let (cx, cy) = (base.arena_width as f64 / 2.0, base.arena_height as f64 / 2.0);
    let room = (cx.min(cy) - m - 2.0).max(0.0);
    let lead_frames = (base.n_frames as f64 / 6.0).max(1.0);
    let distance = (speed * lead_frames).min(room);
    ScenarioConfig {
        n_agents: 2,
        speed_mean: speed,
        speed_std: 0.0,
        heading_jitter: base.heading_jitter.min(0.002),
        initial: Some(vec![
            TargetState::new(cx - distance, cy, 0.0),
            TargetState::new(cx, cy - distance, PI / 2.0),
        ]),
        ..base
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(n_agents: usize) -> ScenarioConfig {
        ScenarioConfig {
            n_agents,
            speed_std: 0.0,
            heading_jitter: 0.0,
            noise_std: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn lone_agent_moves_at_constant_speed() {
        let cfg = quiet(1);
        let mut world = WorldState::from_states(&[TargetState::new(100.0, 100.0, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for k in 1..=10 {
            world = step_world(&world, &cfg, &mut rng);
            assert_eq!(world.agents[0].state.x, 100.0 + cfg.speed_mean * k as f64);
            assert_eq!(world.agents[0].state.y, 100.0);
        }
    }

    #[test]
    fn forced_reversal_on_encounter() {
        let cfg = ScenarioConfig {
            reverse_probability: 1.0,
            ..quiet(2)
        };
        let world = WorldState::from_states(&[
            TargetState::new(100.0, 100.0, 0.0),
            TargetState::new(115.0, 100.0, PI / 2.0),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let next = step_world(&world, &cfg, &mut rng);
        assert_eq!(next.agents[0].state.theta, -PI);
        assert!((next.agents[1].state.theta + PI / 2.0).abs() < 1e-12);
        assert_eq!(next.agents[0].speed, 0.0);
        assert_eq!(next.agents[0].state.x, 100.0);
        // Still in range but already engaged: no second reversal.
        let after = step_world(&next, &cfg, &mut rng);
        assert_eq!(after.agents[0].state.theta, -PI);
        assert!(after.agents[0].state.x < 100.0);
    }

    #[test]
    fn wall_reflection() {
        let cfg = ScenarioConfig {
            speed_mean: 5.0,
            ..quiet(1)
        };
        // Margin is 16: the agent is 2 px from the right limit, heading out.
        let x0 = 720.0 - 16.0 - 2.0;
        let world = WorldState::from_states(&[TargetState::new(x0, 200.0, 0.3)]);
        let next = step_world(&world, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        let s = next.agents[0].state;
        let raw_x = x0 + 5.0 * 0.3f64.cos();
        assert!((s.x - (2.0 * 704.0 - raw_x)).abs() < 1e-9);
        assert!((s.y - (200.0 + 5.0 * 0.3f64.sin())).abs() < 1e-9);
        assert!((s.theta - (PI - 0.3)).abs() < 1e-12);

        let world = WorldState::from_states(&[TargetState::new(300.0, 17.0, -PI / 2.0)]);
        let s = step_world(&world, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).agents[0].state;
        assert!((s.y - 20.0).abs() < 1e-9);
        assert!((s.theta - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn render_examples() {
        let cfg = quiet(0);
        let frame = render(&WorldState::from_states(&[]), &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(frame.pixels().iter().all(|&p| p == 0.8));

        let cfg = quiet(1);
        let world = WorldState::from_states(&[TargetState::new(100.0, 100.0, 0.0)]);
        let frame = render(&world, &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(frame.pixels().iter().filter(|&&p| p == 0.2).count(), 320);
    }

    #[test]
    fn agents_stay_inside_and_runs_are_reproducible() {
        let cfg = ScenarioConfig {
            n_frames: 300,
            rng_seed: 9,
            speed_mean: 4.0,
            ..Default::default()
        };
        let a = Simulation::groundtruth(&cfg).unwrap();
        assert_eq!(a, Simulation::groundtruth(&cfg).unwrap());
        assert_eq!(a.n_frames(), 300);
        assert_eq!(a.n_targets(), 20);
        for poses in a.frames() {
            for s in poses {
                assert!(cfg.inside(s.x, s.y), "{s:?}");
            }
        }
        let frames_a: Vec<Frame> = Simulation::new(ScenarioConfig { n_frames: 3, ..cfg.clone() })
            .unwrap()
            .map(|(f, _)| f)
            .collect();
        let frames_b: Vec<Frame> = Simulation::new(ScenarioConfig { n_frames: 3, ..cfg })
            .unwrap()
            .map(|(f, _)| f)
            .collect();
        assert_eq!(frames_a, frames_b);
    }

    fn min_distance(cfg: &ScenarioConfig) -> f64 {
        let gt = Simulation::groundtruth(cfg).unwrap();
        gt.frames().map(|p| p[0].distance_to(&p[1])).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn crossing_scenario_meets() {
        let cfg = make_crossing_scenario(ScenarioConfig::default());
        assert_eq!(cfg.n_agents, 2);
        assert!(min_distance(&cfg) < cfg.encounter_radius);

        let passing = make_crossing_scenario(ScenarioConfig {
            reverse_probability: 0.0,
            ..Default::default()
        });
        let gt = Simulation::groundtruth(&passing).unwrap();
        let (cx, cy) = (360.0, 240.0);
        // Agent 0 ends up past the crossing point instead of turning back.
        let last = gt.frame(gt.n_frames() / 2)[0];
        assert!(last.x > cx + 20.0, "{last:?}");
        assert!(gt.frames().any(|p| p[1].distance_to(&TargetState::new(cx, cy, 0.0)) < 10.0));
    }

    #[test]
    fn crossing_variants_all_come_close() {
        for seed in 0..50 {
            let cfg = make_crossing_scenario(ScenarioConfig {
                rng_seed: seed,
                ..Default::default()
            });
            assert!(min_distance(&cfg) < 32.0, "seed {seed}");
        }
    }

    #[test]
    fn validation_collects_errors() {
        let cfg = ScenarioConfig {
            reverse_probability: 1.5,
            agent_intensity: -0.1,
            n_frames: 0,
            initial: Some(vec![]),
            ..Default::default()
        };
        match cfg.validate() {
            Err(Error::Config(e)) => assert_eq!(e.len(), 4, "{e:?}"),
            other => panic!("{other:?}"),
        }
    }
}

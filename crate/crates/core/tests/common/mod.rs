#![allow(dead_code)]

use mrftrack::interaction::{log_potential, InteractionParams, OverlapMode};
use mrftrack::samplers::PosteriorModel;
use mrftrack::{PatchDims, TargetState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Targets restricted to the cells of a `side x side` grid with heading 0.
/// Likelihoods are an arbitrary seeded table, the transition kernel is a
/// discretized Gaussian, and pairs interact through real rectangle overlap.
pub struct GridModel {
    pub side: usize,
    pub spacing: f64,
    pub loglik: Vec<Vec<f64>>,
    pub kernel: Vec<Vec<f64>>,
    pub dims: PatchDims,
    pub interaction: InteractionParams,
}

impl GridModel {
    pub fn new(n_targets: usize, side: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = side * side;
        let loglik = (0..n_targets)
            .map(|_| (0..cells).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let kernel = (0..cells)
            .map(|a| {
                let row: Vec<f64> = (0..cells)
                    .map(|b| {
                        let (ar, ac) = ((a / side) as f64, (a % side) as f64);
                        let (br, bc) = ((b / side) as f64, (b % side) as f64);
                        (-((ar - br).powi(2) + (ac - bc).powi(2)) / 2.0).exp()
                    })
                    .collect();
                let total: f64 = row.iter().sum();
                row.into_iter().map(|v| v / total).collect()
            })
            .collect();
        GridModel {
            side,
            spacing: 12.0,
            loglik,
            kernel,
            dims: PatchDims::default(),
            interaction: InteractionParams {
                strength: 3.0,
                overlap_mode: OverlapMode::Fraction,
                neighbor_radius: 1e6,
            },
        }
    }

    pub fn cells(&self) -> usize {
        self.side * self.side
    }

    pub fn state(&self, cell: usize) -> TargetState {
        TargetState::new(
            100.0 + self.spacing * (cell % self.side) as f64,
            100.0 + self.spacing * (cell / self.side) as f64,
            0.0,
        )
    }

    pub fn cell(&self, s: &TargetState) -> usize {
        let c = ((s.x - 100.0) / self.spacing).round() as usize;
        let r = ((s.y - 100.0) / self.spacing).round() as usize;
        r * self.side + c
    }

    pub fn pair_log_potential(&self, a: usize, b: usize) -> f64 {
        log_potential(&self.state(a), &self.state(b), self.dims, &self.interaction)
    }

    /// Exact two-target posterior by enumeration: likelihoods times pair
    /// potential times the transition density averaged over the previous
    /// joint particles. Returns the joint table `p[a * cells + b]`.
    pub fn exact_joint(&self, prev: &[[usize; 2]]) -> Vec<f64> {
        let n = self.cells();
        let mut p = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let mixture: f64 =
                    prev.iter().map(|r| self.kernel[r[0]][a] * self.kernel[r[1]][b]).sum::<f64>() / prev.len() as f64;
                let log = self.loglik[0][a] + self.loglik[1][b] + self.pair_log_potential(a, b);
                p[a * n + b] = log.exp() * mixture;
            }
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
        p
    }
}

impl PosteriorModel for GridModel {
    fn log_likelihood(&self, target: usize, state: &TargetState) -> f64 {
        self.loglik[target][self.cell(state)]
    }

    fn log_potential(&self, a: &TargetState, b: &TargetState) -> f64 {
        log_potential(a, b, self.dims, &self.interaction)
    }

    fn propose<R: Rng + ?Sized>(&self, prev: &TargetState, rng: &mut R) -> TargetState {
        let row = &self.kernel[self.cell(prev)];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (cell, w) in row.iter().enumerate() {
            acc += w;
            if u < acc {
                return self.state(cell);
            }
        }
        self.state(row.len() - 1)
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

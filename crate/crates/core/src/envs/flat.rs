use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ObsSpec, StepResult, Tabular};
use crate::error::{Error, Result};
use crate::logic::{Alphabet, Assignment};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub color: String,
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlatWorldConfig {
    /// Cells per side of the lattice over `[-2, 2]²`.
    pub resolution: usize,
    pub regions: Vec<RegionSpec>,
    pub boundary_penalty: f64,
}

impl Default for FlatWorldConfig {
    fn default() -> Self {
        let r = |color: &str, x: f64, y: f64, radius: f64| RegionSpec { color: color.into(), center: [x, y], radius };
        FlatWorldConfig {
            resolution: 40,
            regions: vec![
                r("red", -1.1, 1.1, 0.55),
                r("magenta", -0.55, 1.2, 0.5),
                r("blue", 0.9, 0.8, 0.6),
                r("green", 1.3, 0.4, 0.5),
                r("aqua", 1.2, 1.3, 0.45),
                r("yellow", -1.0, -1.1, 0.5),
                r("orange", 1.0, -1.0, 0.5),
            ],
            boundary_penalty: 1.0,
        }
    }
}

/// Discretised continuous world with circular, possibly overlapping regions.
/// Leaving the lattice terminates the episode.
#[derive(Clone, Debug)]
pub struct FlatWorld {
    cfg: FlatWorldConfig,
    alphabet: Alphabet,
    labels: Vec<Assignment>,
    agent: (usize, usize),
}

/// N, NE, E, SE, S, SW, W, NW as (row, col) deltas; rows grow with y.
pub const COMPASS: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

impl FlatWorld {
    pub fn new(cfg: FlatWorldConfig) -> Result<Self> {
        if cfg.resolution < 2 {
            return Err(Error::Config("resolution must be at least 2".into()));
        }
        let mut names: Vec<String> = Vec::new();
        for r in &cfg.regions {
            if r.radius <= 0.0 {
                return Err(Error::Config(format!("region `{}` has non-positive radius", r.color)));
            }
            if !names.contains(&r.color) {
                names.push(r.color.clone());
            }
        }
        let alphabet = Alphabet::new(names)?;
        let n = cfg.resolution;
        let mut labels = vec![Assignment::EMPTY; n * n];
        for (cell, label) in labels.iter_mut().enumerate() {
            let (x, y) = center(n, cell / n, cell % n);
            for reg in &cfg.regions {
                let (dx, dy) = (x - reg.center[0], y - reg.center[1]);
                if dx * dx + dy * dy <= reg.radius * reg.radius {
                    *label = label.with(alphabet.index_of(&reg.color).unwrap());
                }
            }
        }
        if labels.iter().all(|l| *l != Assignment::EMPTY) {
            return Err(Error::Config("no cell has an empty label".into()));
        }
        let start = labels.iter().position(|l| *l == Assignment::EMPTY).unwrap();
        Ok(FlatWorld { agent: (start / n, start % n), cfg, alphabet, labels })
    }

    pub fn config(&self) -> &FlatWorldConfig {
        &self.cfg
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_actions(&self) -> usize {
        8
    }

    pub fn size(&self) -> usize {
        self.cfg.resolution
    }

    /// World coordinates of a cell centre.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        center(self.cfg.resolution, row, col)
    }

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let empty: Vec<usize> = (0..self.labels.len()).filter(|&c| self.labels[c] == Assignment::EMPTY).collect();
        self.set_cell(empty[rng.random_range(0..empty.len())]);
        self.observation()
    }

    fn moved(&self, (r, c): (usize, usize), action: usize) -> Option<(usize, usize)> {
        let n = self.cfg.resolution as isize;
        let (dr, dc) = COMPASS[action];
        let (r2, c2) = (r as isize + dr, c as isize + dc);
        (0..n).contains(&r2).then_some(())?;
        (0..n).contains(&c2).then_some((r2 as usize, c2 as usize))
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        if action >= 8 {
            return Err(Error::ActionOutOfRange { action, n: 8 });
        }
        let (terminated, violation) = match self.moved(self.agent, action) {
            Some(p) => {
                self.agent = p;
                (false, false)
            }
            None => (true, true),
        };
        Ok(StepResult {
            observation: self.observation(),
            label: self.label(),
            terminated,
            boundary_violation: violation,
        })
    }

    pub fn label(&self) -> Assignment {
        self.labels[self.cell()]
    }

    pub fn label_at(&self, cell: usize) -> Assignment {
        self.labels[cell]
    }

    pub fn cell(&self) -> usize {
        self.agent.0 * self.cfg.resolution + self.agent.1
    }

    pub fn set_cell(&mut self, cell: usize) {
        self.agent = (cell / self.cfg.resolution, cell % self.cfg.resolution);
    }

    pub fn position(&self) -> (usize, usize) {
        self.agent
    }

    pub fn obs_spec(&self) -> ObsSpec {
        ObsSpec::Vector(2 + self.alphabet.len())
    }

    /// Agent coordinates scaled to `[-1, 1]` followed by the current label.
    pub fn observation(&self) -> Vec<f64> {
        let (x, y) = self.cell_center(self.agent.0, self.agent.1);
        let l = self.label();
        let mut obs = vec![x / 2.0, y / 2.0];
        obs.extend((0..self.alphabet.len()).map(|p| if l.contains(p) { 1.0 } else { 0.0 }));
        obs
    }

    pub fn tabular(&self) -> Tabular {
        let n = self.cfg.resolution;
        Tabular {
            num_states: n * n,
            num_actions: 8,
            next: (0..n * n)
                .map(|c| (0..8).map(|a| self.moved((c / n, c % n), a).map(|(r, cc)| r * n + cc)).collect())
                .collect(),
            labels: self.labels.clone(),
            starts: (0..n * n).filter(|&c| self.labels[c] == Assignment::EMPTY).collect(),
        }
    }
}

fn center(n: usize, row: usize, col: usize) -> (f64, f64) {
    let h = 4.0 / n as f64;
    (-2.0 + (col as f64 + 0.5) * h, -2.0 + (row as f64 + 0.5) * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regions_overlap_and_start_is_empty() {
        let mut w = FlatWorld::new(FlatWorldConfig::default()).unwrap();
        assert!(w.labels.iter().any(|l| l.count() >= 2));
        for seed in 0..20 {
            w.reset(seed);
            assert_eq!(w.label(), Assignment::EMPTY);
        }
    }

    #[test]
    fn leaving_terminates() {
        let mut w = FlatWorld::new(FlatWorldConfig::default()).unwrap();
        w.set_cell(0);
        let r = w.step(4).unwrap();
        assert!(r.terminated && r.boundary_violation);
        assert_eq!(w.cell(), 0);
        let r = w.step(0).unwrap();
        assert!(!r.terminated);
        assert_eq!(w.position(), (1, 0));
    }
}

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ObsSpec, StepResult, Tabular};
use crate::error::{Error, Result};
use crate::logic::{Alphabet, Assignment};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LetterPlacement {
    pub letter: String,
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LetterWorldConfig {
    pub size: usize,
    pub num_letters: usize,
    pub copies_per_letter: usize,
    /// Keep one layout across resets; only the agent start is resampled.
    pub fixed_layout: bool,
    pub layout_seed: u64,
    /// Explicit letter positions; implies a fixed layout.
    pub layout: Option<Vec<LetterPlacement>>,
}

impl Default for LetterWorldConfig {
    fn default() -> Self {
        LetterWorldConfig {
            size: 7,
            num_letters: 12,
            copies_per_letter: 2,
            fixed_layout: false,
            layout_seed: 0,
            layout: None,
        }
    }
}

/// Square torus with letters on distinct cells; moving off one edge enters
/// from the opposite one.
#[derive(Clone, Debug)]
pub struct LetterWorld {
    cfg: LetterWorldConfig,
    alphabet: Alphabet,
    cells: Vec<Option<usize>>,
    agent: (usize, usize),
}

const MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

impl LetterWorld {
    pub fn new(cfg: LetterWorldConfig) -> Result<Self> {
        if cfg.num_letters == 0 || cfg.num_letters > 16 {
            return Err(Error::Config("letter world needs between 1 and 16 letters".into()));
        }
        if cfg.size == 0 || cfg.num_letters * cfg.copies_per_letter >= cfg.size * cfg.size {
            return Err(Error::Config("letters do not fit on the grid".into()));
        }
        let alphabet = Alphabet::new((0..cfg.num_letters).map(|i| ((b'a' + i as u8) as char).to_string()))?;
        let mut w = LetterWorld {
            cells: vec![None; cfg.size * cfg.size],
            agent: (0, 0),
            alphabet,
            cfg,
        };
        if let Some(layout) = w.cfg.layout.clone() {
            for p in layout {
                let l = w
                    .alphabet
                    .index_of(&p.letter)
                    .ok_or_else(|| Error::Config(format!("unknown letter `{}`", p.letter)))?;
                if p.row >= w.cfg.size || p.col >= w.cfg.size {
                    return Err(Error::Config("letter placed outside the grid".into()));
                }
                let c = p.row * w.cfg.size + p.col;
                if w.cells[c].is_some() {
                    return Err(Error::Config("two letters share a cell".into()));
                }
                w.cells[c] = Some(l);
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(w.cfg.layout_seed);
            w.place_letters(&mut rng);
        }
        w.agent = w.first_empty();
        Ok(w)
    }

    fn is_fixed(&self) -> bool {
        self.cfg.fixed_layout || self.cfg.layout.is_some()
    }

    fn first_empty(&self) -> (usize, usize) {
        let c = self.cells.iter().position(Option::is_none).expect("grid has a free cell");
        (c / self.cfg.size, c % self.cfg.size)
    }

    fn place_letters(&mut self, rng: &mut ChaCha8Rng) {
        let n = self.cfg.size * self.cfg.size;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        self.cells = vec![None; n];
        let mut k = 0;
        for l in 0..self.cfg.num_letters {
            for _ in 0..self.cfg.copies_per_letter {
                self.cells[idx[k]] = Some(l);
                k += 1;
            }
        }
    }

    pub fn config(&self) -> &LetterWorldConfig {
        &self.cfg
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_actions(&self) -> usize {
        4
    }

    pub fn size(&self) -> usize {
        self.cfg.size
    }

    pub fn letter_at(&self, row: usize, col: usize) -> Option<usize> {
        self.cells[row * self.cfg.size + col]
    }

    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if !self.is_fixed() {
            self.place_letters(&mut rng);
        }
        let empty: Vec<usize> = (0..self.cells.len()).filter(|&c| self.cells[c].is_none()).collect();
        let c = empty[rng.random_range(0..empty.len())];
        self.agent = (c / self.cfg.size, c % self.cfg.size);
        self.observation()
    }

    fn moved(&self, (r, c): (usize, usize), action: usize) -> (usize, usize) {
        let n = self.cfg.size as isize;
        let (dr, dc) = MOVES[action];
        (((r as isize + dr).rem_euclid(n)) as usize, ((c as isize + dc).rem_euclid(n)) as usize)
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        if action >= 4 {
            return Err(Error::ActionOutOfRange { action, n: 4 });
        }
        self.agent = self.moved(self.agent, action);
        Ok(StepResult {
            observation: self.observation(),
            label: self.label(),
            terminated: false,
            boundary_violation: false,
        })
    }

    fn label_of(&self, cell: usize) -> Assignment {
        match self.cells[cell] {
            Some(l) => Assignment(1 << l),
            None => Assignment::EMPTY,
        }
    }

    pub fn label(&self) -> Assignment {
        self.label_of(self.cell())
    }

    pub fn cell(&self) -> usize {
        self.agent.0 * self.cfg.size + self.agent.1
    }

    pub fn set_cell(&mut self, cell: usize) {
        self.agent = (cell / self.cfg.size, cell % self.cfg.size);
    }

    pub fn position(&self) -> (usize, usize) {
        self.agent
    }

    pub fn obs_spec(&self) -> ObsSpec {
        ObsSpec::Image { channels: self.cfg.num_letters + 1, height: self.cfg.size, width: self.cfg.size }
    }

    /// Egocentric one-hot planes, one per letter plus an agent plane, with
    /// the agent at the centre cell.
    pub fn observation(&self) -> Vec<f64> {
        let n = self.cfg.size;
        let mid = n / 2;
        let mut obs = vec![0.0; (self.cfg.num_letters + 1) * n * n];
        for r in 0..n {
            for c in 0..n {
                if let Some(l) = self.cells[r * n + c] {
                    let vr = (r + n + mid - self.agent.0) % n;
                    let vc = (c + n + mid - self.agent.1) % n;
                    obs[(l * n + vr) * n + vc] = 1.0;
                }
            }
        }
        obs[(self.cfg.num_letters * n + mid) * n + mid] = 1.0;
        obs
    }

    pub fn tabular(&self) -> Tabular {
        let n = self.cfg.size;
        let cells = n * n;
        let next = (0..cells)
            .map(|c| {
                (0..4)
                    .map(|a| {
                        let (r, cc) = self.moved((c / n, c % n), a);
                        Some(r * n + cc)
                    })
                    .collect()
            })
            .collect();
        Tabular {
            num_states: cells,
            num_actions: 4,
            next,
            labels: (0..cells).map(|c| self.label_of(c)).collect(),
            starts: (0..cells).filter(|&c| self.cells[c].is_none()).collect(),
        }
    }
}

use serde::{Deserialize, Serialize};

use super::nn::{Activation, Mlp, MlpCache, ParamLayout};
use crate::logic::AssignmentSet;

/// Input to the set encoder.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetKey {
    Set(AssignmentSet),
    /// Reserved learned token for ε-steps.
    Epsilon,
}

/// `e_A = ρ(Σ_{a∈A} φ(a))` with `φ(a) = W·bits(a) + b`. The sum is
/// computed from proposition counts, so it does not depend on the order in
/// which members are enumerated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetEncoder {
    pub num_props: usize,
    pub phi_dim: usize,
    phi_w: usize,
    phi_b: usize,
    eps_token: usize,
    pub rho: Mlp,
}

pub struct SetCache {
    sums: Vec<(Vec<f64>, f64)>,
    keys: Vec<SetKey>,
    rho: MlpCache,
}

impl SetEncoder {
    /// `rho` lists the widths after the φ layer.
    pub fn new(layout: &mut ParamLayout, num_props: usize, phi_dim: usize, rho: &[usize]) -> Self {
        let phi_w = layout.alloc("phi.weight", &[phi_dim, num_props], num_props.max(1));
        let phi_b = layout.alloc("phi.bias", &[phi_dim], 1);
        let eps_token = layout.alloc("phi.epsilon", &[phi_dim], 1);
        let mut sizes = vec![phi_dim];
        sizes.extend_from_slice(rho);
        let rho = Mlp::new(layout, "rho", &sizes, Activation::Relu, Activation::Relu);
        SetEncoder { num_props, phi_dim, phi_w, phi_b, eps_token, rho }
    }

    pub fn dim(&self) -> usize {
        self.rho.n_out()
    }

    /// Proposition counts over the members and the member count.
    fn counts(&self, set: &AssignmentSet) -> (Vec<f64>, f64) {
        let mut counts = vec![0.0; self.num_props];
        let mut n = 0.0;
        for a in set.iter() {
            n += 1.0;
            for (i, c) in counts.iter_mut().enumerate() {
                if a.contains(i) {
                    *c += 1.0;
                }
            }
        }
        (counts, n)
    }

    pub fn forward(&self, p: &[f64], keys: &[SetKey]) -> (Vec<f64>, SetCache) {
        let d = self.phi_dim;
        let mut pre = vec![0.0; keys.len() * d];
        let mut sums = Vec::with_capacity(keys.len());
        for (k, key) in keys.iter().enumerate() {
            let row = &mut pre[k * d..(k + 1) * d];
            match key {
                SetKey::Epsilon => {
                    row.copy_from_slice(&p[self.eps_token..self.eps_token + d]);
                    sums.push((Vec::new(), 0.0));
                }
                SetKey::Set(set) => {
                    let (counts, n) = self.counts(set);
                    for (j, v) in row.iter_mut().enumerate() {
                        let w = &p[self.phi_w + j * self.num_props..self.phi_w + (j + 1) * self.num_props];
                        *v = n * p[self.phi_b + j] + w.iter().zip(&counts).map(|(a, b)| a * b).sum::<f64>();
                    }
                    sums.push((counts, n));
                }
            }
        }
        let rho = self.rho.forward(p, pre, keys.len());
        (rho.output().to_vec(), SetCache { sums, keys: keys.to_vec(), rho })
    }

    pub fn backward(&self, p: &[f64], cache: &SetCache, dy: &[f64], g: &mut [f64]) {
        let d = self.phi_dim;
        let dpre = self.rho.backward(p, &cache.rho, dy, g);
        for (k, key) in cache.keys.iter().enumerate() {
            let row = &dpre[k * d..(k + 1) * d];
            match key {
                SetKey::Epsilon => {
                    for (acc, v) in g[self.eps_token..self.eps_token + d].iter_mut().zip(row) {
                        *acc += v;
                    }
                }
                SetKey::Set(_) => {
                    let (counts, n) = &cache.sums[k];
                    for (j, &dv) in row.iter().enumerate() {
                        g[self.phi_b + j] += n * dv;
                        for (i, c) in counts.iter().enumerate() {
                            g[self.phi_w + j * self.num_props + i] += c * dv;
                        }
                    }
                }
            }
        }
    }
}

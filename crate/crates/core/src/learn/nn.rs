//! Dense building blocks over a flat parameter vector. Activations are
//! row-major `batch × features` buffers; every backward pass accumulates
//! into a gradient vector laid out like the parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// `C = alpha·op(A)·op(B) + beta·C` for row-major buffers. `ta`/`tb` select
/// transposition; `a` is `m×k` after `op`, `b` is `k×n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, c: &mut [f64], beta: f64) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserted lengths cover every index reachable through the
    // strides for the given dimensions.
    unsafe {
        matrixmultiply::dgemm(
            m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1,
        );
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: &mut [f64]) {
        match self {
            Activation::Relu => x.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Tanh => x.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Identity => {}
        }
    }

    /// Multiplies `dy` by the derivative, given the activated output `y`.
    pub fn backward(self, y: &[f64], dy: &mut [f64]) {
        match self {
            Activation::Relu => dy.iter_mut().zip(y).for_each(|(d, &v)| {
                if v <= 0.0 {
                    *d = 0.0
                }
            }),
            Activation::Tanh => dy.iter_mut().zip(y).for_each(|(d, &v)| *d *= 1.0 - v * v),
            Activation::Identity => {}
        }
    }
}

/// Named slices of the flat parameter vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub entries: Vec<ParamEntry>,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
    /// Fan-in for uniform initialisation; zero means zero-initialised.
    pub fan_in: usize,
}

impl ParamLayout {
    pub fn alloc(&mut self, name: impl Into<String>, shape: &[usize], fan_in: usize) -> usize {
        let offset = self.len;
        self.len += shape.iter().product::<usize>();
        self.entries.push(ParamEntry { name: name.into(), offset, shape: shape.to_vec(), fan_in });
        offset
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut p = vec![0.0; self.len];
        for e in &self.entries {
            if e.fan_in == 0 {
                continue;
            }
            let bound = 1.0 / (e.fan_in as f64).sqrt();
            let n: usize = e.shape.iter().product();
            for v in &mut p[e.offset..e.offset + n] {
                *v = rng.random_range(-bound..bound);
            }
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
    pub n_in: usize,
    pub n_out: usize,
}

impl Linear {
    pub fn new(layout: &mut ParamLayout, name: &str, n_in: usize, n_out: usize) -> Self {
        let w = layout.alloc(format!("{name}.weight"), &[n_out, n_in], n_in);
        let b = layout.alloc(format!("{name}.bias"), &[n_out], 0);
        Linear { w, b, n_in, n_out }
    }

    pub fn weight<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.w..self.w + self.n_in * self.n_out]
    }

    pub fn bias<'a>(&self, p: &'a [f64]) -> &'a [f64] {
        &p[self.b..self.b + self.n_out]
    }

    /// `y = x·Wᵀ + b`.
    pub fn forward(&self, p: &[f64], x: &[f64], batch: usize) -> Vec<f64> {
        let mut y = Vec::with_capacity(batch * self.n_out);
        for _ in 0..batch {
            y.extend_from_slice(self.bias(p));
        }
        gemm(batch, self.n_in, self.n_out, x, false, self.weight(p), true, &mut y, 1.0);
        y
    }

    /// Accumulates parameter gradients and returns `dx`.
    pub fn backward(&self, p: &[f64], x: &[f64], dy: &[f64], batch: usize, g: &mut [f64]) -> Vec<f64> {
        self.accumulate(x, dy, batch, g);
        let mut dx = vec![0.0; batch * self.n_in];
        gemm(batch, self.n_out, self.n_in, dy, false, self.weight(p), false, &mut dx, 0.0);
        dx
    }

    /// Parameter gradients only.
    pub fn accumulate(&self, x: &[f64], dy: &[f64], batch: usize, g: &mut [f64]) {
        let gw = &mut g[self.w..self.w + self.n_in * self.n_out];
        gemm(self.n_out, batch, self.n_in, dy, true, x, false, gw, 1.0);
        let gb = &mut g[self.b..self.b + self.n_out];
        for row in dy.chunks_exact(self.n_out) {
            for (acc, d) in gb.iter_mut().zip(row) {
                *acc += d;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub hidden: Activation,
    pub output: Activation,
}

#[derive(Clone, Debug, Default)]
pub struct MlpCache {
    /// Input of every layer followed by the final output.
    acts: Vec<Vec<f64>>,
    batch: usize,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

impl Mlp {
    /// Layer widths `sizes[0] → … → sizes[last]`.
    pub fn new(layout: &mut ParamLayout, name: &str, sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        let layers = sizes.windows(2).enumerate().map(|(i, w)| Linear::new(layout, &format!("{name}.{i}"), w[0], w[1])).collect();
        Mlp { layers, hidden, output }
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().unwrap().n_out
    }

    fn act(&self, i: usize) -> Activation {
        if i + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn forward(&self, p: &[f64], x: Vec<f64>, batch: usize) -> MlpCache {
        let mut acts = vec![x];
        for (i, l) in self.layers.iter().enumerate() {
            let mut y = l.forward(p, acts.last().unwrap(), batch);
            self.act(i).apply(&mut y);
            acts.push(y);
        }
        MlpCache { acts, batch }
    }

    pub fn backward(&self, p: &[f64], cache: &MlpCache, dy: &[f64], g: &mut [f64]) -> Vec<f64> {
        let mut d = dy.to_vec();
        for (i, l) in self.layers.iter().enumerate().rev() {
            self.act(i).backward(&cache.acts[i + 1], &mut d);
            d = l.backward(p, &cache.acts[i], &d, cache.batch, g);
        }
        d
    }
}

/// 2×2 convolution, stride 1, no padding, ReLU. Images are stored
/// height × width × channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv2 {
    pub lin: Linear,
    pub c_in: usize,
    pub c_out: usize,
}

#[derive(Clone, Debug)]
pub struct ConvCache {
    cols: Vec<f64>,
    out: Vec<f64>,
    h: usize,
    w: usize,
    batch: usize,
}

impl ConvCache {
    pub fn output_vec(&self) -> &Vec<f64> {
        &self.out
    }
}

impl Conv2 {
    pub fn new(layout: &mut ParamLayout, name: &str, c_in: usize, c_out: usize) -> Self {
        Conv2 { lin: Linear::new(layout, name, 4 * c_in, c_out), c_in, c_out }
    }

    fn im2col(&self, x: &[f64], h: usize, w: usize, batch: usize) -> Vec<f64> {
        let c = self.c_in;
        let (h2, w2) = (h - 1, w - 1);
        let mut cols = Vec::with_capacity(batch * h2 * w2 * 4 * c);
        for b in 0..batch {
            let img = &x[b * h * w * c..(b + 1) * h * w * c];
            for i in 0..h2 {
                for j in 0..w2 {
                    for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let at = ((i + di) * w + (j + dj)) * c;
                        cols.extend_from_slice(&img[at..at + c]);
                    }
                }
            }
        }
        cols
    }

    /// Input `batch × h × w × c_in`, output `batch × (h-1) × (w-1) × c_out`.
    pub fn forward(&self, p: &[f64], x: &[f64], h: usize, w: usize, batch: usize) -> ConvCache {
        let cols = self.im2col(x, h, w, batch);
        let mut out = self.lin.forward(p, &cols, batch * (h - 1) * (w - 1));
        Activation::Relu.apply(&mut out);
        ConvCache { cols, out, h, w, batch }
    }


    pub fn backward(&self, p: &[f64], cache: &ConvCache, dy: &[f64], g: &mut [f64]) -> Vec<f64> {
        let (h, w, c, batch) = (cache.h, cache.w, self.c_in, cache.batch);
        let mut d = dy.to_vec();
        Activation::Relu.backward(&cache.out, &mut d);
        let rows = batch * (h - 1) * (w - 1);
        let dcols = self.lin.backward(p, &cache.cols, &d, rows, g);
        let mut dx = vec![0.0; batch * h * w * c];
        let mut r = 0;
        for b in 0..batch {
            let img = &mut dx[b * h * w * c..(b + 1) * h * w * c];
            for i in 0..h - 1 {
                for j in 0..w - 1 {
                    let row = &dcols[r * 4 * c..(r + 1) * 4 * c];
                    for (k, (di, dj)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                        let at = ((i + di) * w + (j + dj)) * c;
                        for (acc, v) in img[at..at + c].iter_mut().zip(&row[k * c..(k + 1) * c]) {
                            *acc += v;
                        }
                    }
                    r += 1;
                }
            }
        }
        dx
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gated recurrent unit with gates ordered reset, update, candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gru {
    pub ih: Linear,
    pub hh: Linear,
    pub n_in: usize,
    pub n_hidden: usize,
}

/// Per-step caches of a masked batched GRU run.
#[derive(Clone, Debug)]
pub struct GruCache {
    steps: Vec<GruStep>,
    batch: usize,
}

#[derive(Clone, Debug)]
struct GruStep {
    x: Vec<f64>,
    h: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    /// `W_hn·h + b_hn`.
    hn: Vec<f64>,
    mask: Vec<bool>,
}

impl Gru {
    pub fn new(layout: &mut ParamLayout, name: &str, n_in: usize, n_hidden: usize) -> Self {
        let ih = Linear::new(layout, &format!("{name}.ih"), n_in, 3 * n_hidden);
        let hh = Linear::new(layout, &format!("{name}.hh"), n_hidden, 3 * n_hidden);
        // recurrent weights share the hidden fan-in
        Gru { ih, hh, n_in, n_hidden }
    }

    /// Runs `inputs.len()` steps from a zero state. Rows whose mask is false
    /// at a step keep their hidden state. Returns the final hidden states.
    pub fn forward(&self, p: &[f64], inputs: Vec<(Vec<f64>, Vec<bool>)>, batch: usize) -> (Vec<f64>, GruCache) {
        let hd = self.n_hidden;
        let mut h = vec![0.0; batch * hd];
        let mut steps = Vec::with_capacity(inputs.len());
        for (x, mask) in inputs {
            let gi = self.ih.forward(p, &x, batch);
            let gh = self.hh.forward(p, &h, batch);
            let mut r = vec![0.0; batch * hd];
            let mut z = vec![0.0; batch * hd];
            let mut n = vec![0.0; batch * hd];
            let mut hn = vec![0.0; batch * hd];
            let mut h2 = h.clone();
            for b in 0..batch {
                let (gi, gh) = (&gi[b * 3 * hd..(b + 1) * 3 * hd], &gh[b * 3 * hd..(b + 1) * 3 * hd]);
                for u in 0..hd {
                    let k = b * hd + u;
                    r[k] = sigmoid(gi[u] + gh[u]);
                    z[k] = sigmoid(gi[hd + u] + gh[hd + u]);
                    hn[k] = gh[2 * hd + u];
                    n[k] = (gi[2 * hd + u] + r[k] * hn[k]).tanh();
                    if mask[b] {
                        h2[k] = (1.0 - z[k]) * n[k] + z[k] * h[k];
                    }
                }
            }
            steps.push(GruStep { x, h, r, z, n, hn, mask });
            h = h2;
        }
        (h, GruCache { steps, batch })
    }

    /// Backpropagates `dh` at the final state; returns the input gradients
    /// per step.
    pub fn backward(&self, p: &[f64], cache: &GruCache, dh: &[f64], g: &mut [f64]) -> Vec<Vec<f64>> {
        let hd = self.n_hidden;
        let batch = cache.batch;
        let mut dh = dh.to_vec();
        let mut dxs = vec![Vec::new(); cache.steps.len()];
        for (t, st) in cache.steps.iter().enumerate().rev() {
            let mut dgi = vec![0.0; batch * 3 * hd];
            let mut dgh = vec![0.0; batch * 3 * hd];
            let mut dh_prev = vec![0.0; batch * hd];
            for b in 0..batch {
                for u in 0..hd {
                    let k = b * hd + u;
                    if !st.mask[b] {
                        dh_prev[k] = dh[k];
                        continue;
                    }
                    let d = dh[k];
                    let (r, z, n) = (st.r[k], st.z[k], st.n[k]);
                    dh_prev[k] = d * z;
                    let dz = d * (st.h[k] - n);
                    let dn = d * (1.0 - z);
                    let dn_pre = dn * (1.0 - n * n);
                    let dr = dn_pre * st.hn[k];
                    let dr_pre = dr * r * (1.0 - r);
                    let dz_pre = dz * z * (1.0 - z);
                    let row = b * 3 * hd;
                    dgi[row + u] = dr_pre;
                    dgi[row + hd + u] = dz_pre;
                    dgi[row + 2 * hd + u] = dn_pre;
                    dgh[row + u] = dr_pre;
                    dgh[row + hd + u] = dz_pre;
                    dgh[row + 2 * hd + u] = dn_pre * r;
                }
            }
            dxs[t] = self.ih.backward(p, &st.x, &dgi, batch, g);
            let dhh = self.hh.backward(p, &st.h, &dgh, batch, g);
            for (a, v) in dh_prev.iter_mut().zip(&dhh) {
                *a += v;
            }
            dh = dh_prev;
        }
        dxs
    }
}

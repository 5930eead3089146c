//! Action distributions and their gradients.

use rand::Rng;

/// Log-probabilities; entries at negative infinity stay there.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

pub fn probs(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

pub fn sample(logits: &[f64], rng: &mut impl Rng) -> usize {
    let p = probs(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&pi| pi > 0.0).unwrap()
}

/// First index of the largest logit.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

pub fn entropy(logits: &[f64]) -> f64 {
    log_softmax(logits).iter().filter(|l| l.is_finite()).map(|&l| -l.exp() * l).sum()
}

/// Gradient with respect to the logits of `c_lp·log π(a) + c_h·H(π)`.
/// Masked logits get zero.
pub fn grad(logits: &[f64], a: usize, c_lp: f64, c_h: f64) -> Vec<f64> {
    let lp = log_softmax(logits);
    let h = entropy(logits);
    lp.iter()
        .enumerate()
        .map(|(j, &l)| {
            if !l.is_finite() {
                return 0.0;
            }
            let p = l.exp();
            let onehot = if j == a { 1.0 } else { 0.0 };
            c_lp * (onehot - p) - c_h * p * (l + h)
        })
        .collect()
}

/// Diagonal Gaussian over continuous actions, with an optional ε-action
/// chosen with probability `sigmoid(eps_logit)`.
pub mod gaussian {
    const LOG_2PI: f64 = 1.837_877_066_409_345_5;

    /// `log N(x; μ, exp(log_std)²)` and its gradients in `μ` and `log_std`.
    pub fn log_prob(mu: &[f64], log_std: &[f64], x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let mut lp = 0.0;
        let mut dmu = Vec::with_capacity(mu.len());
        let mut dls = Vec::with_capacity(mu.len());
        for ((&m, &s), &v) in mu.iter().zip(log_std).zip(x) {
            let z = (v - m) / s.exp();
            lp += -0.5 * z * z - s - 0.5 * LOG_2PI;
            dmu.push(z / s.exp());
            dls.push(z * z - 1.0);
        }
        (lp, dmu, dls)
    }

    /// Entropy; its gradient in every `log_std` is 1.
    pub fn entropy(log_std: &[f64]) -> f64 {
        log_std.iter().map(|s| s + 0.5 * (1.0 + LOG_2PI)).sum()
    }

    fn log_sigmoid(x: f64) -> f64 {
        // -softplus(-x)
        -((-x).max(0.0) + (-x.abs()).exp().ln_1p())
    }

    /// Log-probability of the mixed action: `None` is the ε-action.
    /// Returns the value and gradients in `(μ, log_std, eps_logit)`.
    pub fn mixed_log_prob(mu: &[f64], log_std: &[f64], eps_logit: f64, x: Option<&[f64]>) -> (f64, Vec<f64>, Vec<f64>, f64) {
        let p = 1.0 / (1.0 + (-eps_logit).exp());
        match x {
            None => (log_sigmoid(eps_logit), vec![0.0; mu.len()], vec![0.0; mu.len()], 1.0 - p),
            Some(x) => {
                let (lp, dmu, dls) = log_prob(mu, log_std, x);
                (lp + log_sigmoid(-eps_logit), dmu, dls, -p)
            }
        }
    }
}

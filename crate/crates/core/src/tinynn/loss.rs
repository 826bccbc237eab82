use super::activation::sigmoid;

/// Clamp for logarithms of probabilities.
pub const LOG_EPS: f64 = 1e-12;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Softmax cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    let loss = lse - logits[label];
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    (loss, grad)
}

/// Mean per-element binary cross-entropy of probabilities against targets,
/// with its gradient with respect to the probabilities.
pub fn bce(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let pc = p.clamp(LOG_EPS, 1.0 - LOG_EPS);
            loss -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
            ((pc - t) / (pc * (1.0 - pc))) / n
        })
        .collect();
    (loss / n, grad)
}

/// [`bce`] applied to `sigmoid(logits)`, with the gradient taken with respect
/// to the logits. Avoids the vanishing sigmoid gradient at saturation.
pub fn bce_with_logits(logits: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = logits.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = logits
        .iter()
        .zip(target)
        .map(|(&z, &t)| {
            // log(1 + e^z) - t z, written to stay finite for large |z|.
            loss += z.max(0.0) - t * z + (-z.abs()).exp().ln_1p();
            (sigmoid(z) - t) / n
        })
        .collect();
    (loss / n, grad)
}

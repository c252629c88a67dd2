//! Scaled norms used throughout: `‖x‖_{2,m} = ‖x‖₂ / √m`.

/// `‖x‖₂ / √len(x)`; zero for an empty slice.
pub fn norm_2m(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Distance of an estimate from consensus on `target`: `‖x − target·1‖_{2,n}`.
pub fn consensus_error(x: &[f64], target: f64) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| (v - target) * (v - target)).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

//! Scalar reduction of the precision updates on a `d`-regular graph with
//! unit weights and uniform initial precisions.

/// One step of the scalar recursion
/// `k_t = (1 + (d−1) k_{t−1}) / (1 + (1 + (d−1) k_{t−1}) / β)`.
pub fn k_next(k: f64, d: usize, beta: f64) -> f64 {
    let s = 1.0 + (d as f64 - 1.0) * k;
    s / (1.0 + s / beta)
}

/// The fixed point `k^β` of [`k_next`]: the positive root of
/// `((d−1)/β) k² + (2 + 1/β − d) k − 1 = 0`.
pub fn k_beta(d: usize, beta: f64) -> f64 {
    assert!(d >= 2, "k_beta needs d >= 2");
    assert!(beta > 0.0 && beta.is_finite(), "k_beta needs finite beta > 0");
    let a = (d as f64 - 1.0) / beta;
    let b = 2.0 + 1.0 / beta - d as f64;
    let disc = (b * b + 4.0 * a).sqrt();
    // Pick the cancellation-free form of the positive root.
    if b >= 0.0 {
        2.0 / (b + disc)
    } else {
        (disc - b) / (2.0 * a)
    }
}

/// `γ = 1 / (1 + (d−1) k)`.
pub fn gamma_of(k: f64, d: usize) -> f64 {
    1.0 / (1.0 + (d as f64 - 1.0) * k)
}

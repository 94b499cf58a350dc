/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Smooth soft-threshold `v · σ(a(|v| − t))`.
///
/// Odd in `v`, passes large magnitudes almost unchanged and suppresses
/// values well below `t`, with a non-vanishing gradient everywhere.
pub fn sigmoid_shrink(v: f64, t: f64, a: f64) -> f64 {
    v * sigmoid(a * (v.abs() - t))
}

/// Partial derivatives `(∂/∂v, ∂/∂t)` of [`sigmoid_shrink`].
pub fn sigmoid_shrink_grad(v: f64, t: f64, a: f64) -> (f64, f64) {
    let s = sigmoid(a * (v.abs() - t));
    let ds = a * s * (1.0 - s);
    (s + v.abs() * ds, -v * ds)
}

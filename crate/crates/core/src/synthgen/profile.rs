//! Lateral motion primitives. Every profile maps `u ∈ [0, 1]` onto `[0, 1]`
//! with zero slope at both ends, so stitched segments stay C¹.

/// Logistic steepness of the lane-change profile.
const STEEPNESS: f64 = 10.0;

fn logistic(u: f64) -> f64 {
    1.0 / (1.0 + (-STEEPNESS * (u - 0.5)).exp())
}

/// Logistic curve rescaled to `[0, 1]` with the end slopes removed:
/// `s(u) = (n(u) - δu) / (1 - δ)` where `n` is the normalized logistic and
/// `δ = n'(0)`. Point-symmetric about `(0.5, 0.5)` and monotone.
pub fn lane_change(u: f64) -> f64 {
    let (l0, l1) = (logistic(0.0), logistic(1.0));
    let n = (logistic(u) - l0) / (l1 - l0);
    let delta = STEEPNESS * l0 * (1.0 - l0) / (l1 - l0);
    (n - delta * u) / (1.0 - delta)
}

pub fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Interpolates from `from` to `to` along `shape` over `frames` intervals,
/// evaluated `k` intervals after the start.
pub fn blend(shape: fn(f64) -> f64, from: f64, to: f64, k: usize, frames: usize) -> f64 {
    if k >= frames {
        return to;
    }
    from + (to - from) * shape(k as f64 / frames as f64)
}

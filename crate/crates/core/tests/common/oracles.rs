//! Slow, direct reference implementations.

use gsl::rng::JobRng;
use rand::Rng;

/// `A_t = sum_l (gamma lambda)^l delta_{t+l}`, summed term by term and cut
/// after the first terminal step.
pub fn gae_by_sum(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let value_after = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    let delta = |t: usize| {
        let next = if dones[t] { 0.0 } else { value_after(t) };
        rewards[t] + gamma * next - values[t]
    };
    (0..n)
        .map(|t| {
            let mut a = 0.0;
            let mut coef = 1.0;
            for k in t..n {
                a += coef * delta(k);
                if dones[k] {
                    break;
                }
                coef *= gamma * lambda;
            }
            a
        })
        .collect()
}

/// Direct convolution with the truncated Gaussian, weights renormalized
/// over the part of the kernel inside the curve.
pub fn smooth_by_convolution(curve: &[f64], kernel: usize) -> Vec<f64> {
    let sigma = kernel as f64 / 4.0;
    let r = (2.0 * sigma).floor() as isize;
    let n = curve.len() as isize;
    (0..n)
        .map(|t| {
            let mut num = 0.0;
            let mut den = 0.0;
            for j in (t - r).max(0)..=(t + r).min(n - 1) {
                let d = (j - t) as f64;
                let w = (-d * d / (2.0 * sigma * sigma)).exp();
                num += w * curve[j as usize];
                den += w;
            }
            num / den
        })
        .collect()
}

/// Every epoch where the windowed test holds, then the smallest one inside
/// the guard interval.
pub fn plateau_by_scan(smoothed: &[f64], window: usize, epsilon: f64, guard: f64, budget: usize) -> Option<usize> {
    let holds: Vec<usize> = (0..smoothed.len())
        .filter(|&t| t + window < smoothed.len() && (t + 1..=t + window).all(|u| smoothed[t] + epsilon >= smoothed[u]))
        .collect();
    let lo = (guard * budget as f64).ceil() as usize;
    let hi = ((1.0 - guard) * budget as f64).floor() as usize;
    holds.into_iter().filter(|&t| t >= lo && t <= hi).min()
}

/// A noisy learning curve: saturating, linear, oscillating or flat.
pub fn synthetic_curve(rng: &mut JobRng) -> Vec<f64> {
    let len = rng.gen_range(60..400);
    let kind = rng.gen_range(0..4);
    let scale = rng.gen_range(0.5..50.0);
    let rate = rng.gen_range(0.005..0.1);
    let noise = rng.gen_range(0.0..0.2) * scale;
    let offset = rng.gen_range(-100.0..100.0);
    (0..len)
        .map(|t| {
            let t = t as f64;
            let base = match kind {
                0 => scale * (1.0 - (-rate * t).exp()),
                1 => scale * rate * t,
                2 => scale * (rate * t).sin(),
                _ => 0.0,
            };
            offset + base + noise * (rng.gen::<f64>() - 0.5)
        })
        .collect()
}

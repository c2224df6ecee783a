#![allow(dead_code)]

use neada::oracle::{seeded_rng, Rng};
use neada::MinimaxProblem;
use rand::Rng as _;

pub fn rng(seed: u64) -> Rng {
    seeded_rng(seed)
}

pub fn uniform_vec(rng: &mut Rng, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-half_width..half_width)).collect()
}

/// Central differences of `f` at `p` with step `h`.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            q[i] = p[i] + h;
            let up = f(&q);
            q[i] = p[i] - h;
            let down = f(&q);
            q[i] = p[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    let scale = neada::vecops::norm(a).max(neada::vecops::norm(b)).max(floor);
    diff / scale
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

pub fn fd_grad_x<P: MinimaxProblem + ?Sized>(p: &P, x: &[f64], y: &[f64], h: f64) -> Vec<f64> {
    fd_grad(|xx| p.value(xx, y), x, h)
}

pub fn fd_grad_y<P: MinimaxProblem + ?Sized>(p: &P, x: &[f64], y: &[f64], h: f64) -> Vec<f64> {
    fd_grad(|yy| p.value(x, yy), y, h)
}

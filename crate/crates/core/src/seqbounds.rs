//! Envelopes for scalar recursions: affine iteration, the polynomial–
//! exponential maximum, and multiplicative products with small drift.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};

/// `(x₀ + Σ bⱼ) · max{1, max_j Π_{i ≥ j} aᵢ}`, an upper bound for `x_N`
/// under `x_{n+1} = aₙ xₙ + bₙ`.
pub fn affine_iteration_bound(a: &[f64], b: &[f64], x0: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(LabError::InvalidArgument("a and b must have equal length".into()));
    }
    if x0 < 0.0 || a.iter().chain(b).any(|v| !(*v >= 0.0)) {
        return Err(LabError::InvalidArgument("sequences and x0 must be nonnegative".into()));
    }
    let mut suffix = 1.0f64;
    let mut best = 1.0f64;
    for &v in a.iter().rev() {
        suffix *= v;
        best = best.max(suffix);
    }
    Ok((x0 + b.iter().sum::<f64>()) * best)
}

/// Direct iteration of `x_{n+1} = aₙ xₙ + bₙ`; returns `x_N`.
pub fn affine_iterate(a: &[f64], b: &[f64], x0: f64) -> f64 {
    a.iter().zip(b).fold(x0, |x, (a, b)| a * x + b)
}

/// `sup_{x>0} x^j e^{-εx} = (j/e)^j ε^{-j}`, attained at `x = j/ε`.
pub fn poly_exp_max(j: f64, eps: f64) -> Result<f64> {
    if !(j > 0.0 && eps > 0.0) {
        return Err(LabError::InvalidArgument(format!("need j, ε > 0, got ({j}, {eps})")));
    }
    Ok((j * ((j / eps).ln() - 1.0)).exp())
}

/// Sufficient constant for `|(1+z)e^{-z}| ≤ e^{C|z|²}` when `|z| ≤ 1/2`.
pub const PRODUCT_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, Serialize)]
pub struct ProductAsymptotics {
    /// `x₀, x₁, …, x_N`.
    pub iterates: Vec<Complex64>,
    /// Matching envelope values.
    pub envelope: Vec<f64>,
}

impl ProductAsymptotics {
    /// Indices where `|xₙ|` exceeds the envelope.
    pub fn violations(&self) -> Vec<usize> {
        self.iterates.iter().zip(&self.envelope).enumerate().filter(|(_, (x, e))| x.norm() > **e * (1.0 + 1e-12)).map(|(i, _)| i).collect()
    }
}

/// Iterates of `x_{n+1} = xₙ(1+qₙ) + dₙ` with the envelope
/// `e^{C‖q‖²} |e^{Σ_{j<n} qⱼ}| (|x₀| + ω e^α Σ_{j=1}^n e^{-αj + ‖q‖₂ √j})`,
/// valid for `|dₙ| ≤ ω e^{-αn}` and `|qₙ| ≤ 1/2` when `C = 1`.
pub fn product_asymptotics(q: &[Complex64], d: &[Complex64], x0: Complex64, alpha: f64, omega: f64, c: f64) -> Result<ProductAsymptotics> {
    if !(alpha > 0.0) {
        return Err(LabError::InvalidArgument(format!("α must be positive, got {alpha}")));
    }
    if q.len() != d.len() {
        return Err(LabError::InvalidArgument("q and d must have equal length".into()));
    }
    let q_norm = q.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let lead = c * q_norm * q_norm;
    let mut iterates = vec![x0];
    let mut envelope = vec![x0.norm() * lead.exp()];
    let mut x = x0;
    let mut re_sum = 0.0;
    let mut tail = 0.0;
    for (j, (qj, dj)) in q.iter().zip(d).enumerate() {
        x = x * (1.0 + qj) + dj;
        re_sum += qj.re;
        let n = (j + 1) as f64;
        tail += (-alpha * n + q_norm * n.sqrt()).exp();
        iterates.push(x);
        envelope.push((lead + re_sum).exp() * (x0.norm() + omega * alpha.exp() * tail));
    }
    Ok(ProductAsymptotics { iterates, envelope })
}

/// Outcome of a randomized envelope suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub violations: usize,
    /// Largest `value / bound` seen.
    pub worst_ratio: f64,
}

/// Random affine recursions `x_{j+1} ≤ aⱼxⱼ + bⱼ` checked against
/// [`affine_iteration_bound`]. Trial `t` is seeded with `seed + t`.
pub fn affine_trials(trials: usize, seed: u64) -> TrialSummary {
    let ratios: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t));
            let n = rng.gen_range(1..40);
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let x0 = rng.gen_range(0.0..3.0);
            let bound = affine_iteration_bound(&a, &b, x0).expect("nonnegative data");
            if bound > 0.0 {
                affine_iterate(&a, &b, x0) / bound
            } else {
                0.0
            }
        })
        .collect();
    summarize(&ratios)
}

/// Square-summable drift with `|qⱼ| ≤ 1/2` and `‖q‖₂ ≤ 1`.
pub fn random_drift<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    let mut q: Vec<Complex64> = (0..n)
        .map(|j| {
            let r = rng.gen_range(0.0..0.5) / (1.0 + j as f64).powf(rng.gen_range(0.5..1.5));
            Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let norm = q.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let target = rng.gen_range(0.1..1.0);
    if norm > target {
        q.iter_mut().for_each(|v| *v *= target / norm);
    }
    q
}

/// Random products with exponentially small forcing checked against
/// [`product_asymptotics`].
pub fn product_trials(trials: usize, seed: u64) -> TrialSummary {
    let ratios: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t));
            let n = rng.gen_range(10..400);
            let q = random_drift(&mut rng, n);
            let alpha = rng.gen_range(0.05..2.0);
            let omega = rng.gen_range(0.0..3.0);
            let d: Vec<Complex64> = (0..n)
                .map(|j| Complex64::from_polar(omega * (-alpha * j as f64).exp() * rng.gen_range(0.0..1.0), rng.gen_range(0.0..6.3)))
                .collect();
            let x0 = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let p = product_asymptotics(&q, &d, x0, alpha, omega, PRODUCT_CONSTANT).expect("valid trial");
            p.iterates.iter().zip(&p.envelope).map(|(x, e)| x.norm() / e).fold(0.0, f64::max)
        })
        .collect();
    summarize(&ratios)
}

fn summarize(ratios: &[f64]) -> TrialSummary {
    TrialSummary {
        trials: ratios.len(),
        violations: ratios.iter().filter(|&&r| r > 1.0 + 1e-12).count(),
        worst_ratio: ratios.iter().copied().fold(0.0, f64::max),
    }
}

//! The multidimensional WKB factor
//! `exp[-(4π)⁻¹ ∫ e^{ik(|t| - ⟨θ,t⟩)} |t|⁻¹ V(t) dt]`, its radial reduction,
//! the one-dimensional comparison formula and the randomized bump model.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::greens::RADIAL_NODES;
use crate::potential::{LayerProfile, LayerSpec, RadialTable, SparsePotential};
use crate::quad::{composite_gauss, gauss_legendre_interval};
use crate::shell::layer_exponent_coeffs;
use crate::sphere::{ShCoeffs, SphereGrid, SphericalField};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn check_closed_upper(k: Complex64) -> Result<()> {
    if k.im < 0.0 || !k.re.is_finite() || !k.im.is_finite() {
        return Err(LabError::Precondition(format!("Im k ≥ 0 required, got k = {k}")));
    }
    Ok(())
}

/// Angular degree the harmonic route needs for one layer: the layer's own
/// angular content, capped where `ĵ_m(k r)` has died out.
fn harmonic_route_degree(layer: &LayerSpec, k: Complex64) -> usize {
    let phase = (k.norm() * layer.outer_radius()).ceil() as usize + 8;
    let content = match layer.profile() {
        LayerProfile::Radial { .. } => 0,
        LayerProfile::Harmonic { .. } => layer.harmonic_degree().unwrap_or(0),
        LayerProfile::RandomBumps { ensemble } => {
            let rho = ensemble.radii.iter().cloned().fold(f64::MAX, f64::min);
            (3.0 * layer.outer_radius() / rho).ceil() as usize
        }
    };
    content.min(phase)
}

/// The exponent field `Σ_j κ_j(θ)` over all layers.
pub fn wkb_exponent(pot: &SparsePotential, k: Complex64, grid: &Arc<SphereGrid>) -> Result<SphericalField> {
    check_closed_upper(k)?;
    let required = pot.layers().iter().map(|l| harmonic_route_degree(l, k)).max().unwrap_or(0);
    if grid.degree() < required {
        return Err(LabError::Resolution { required, available: grid.degree() });
    }
    let parts: Vec<ShCoeffs> = pot.layers().iter().map(|l| layer_exponent_coeffs(grid, k, l, RADIAL_NODES)).collect();
    let mut total = ShCoeffs::zeros(grid.degree());
    for p in &parts {
        for (a, b) in total.as_mut_slice().iter_mut().zip(p.as_slice()) {
            *a += b;
        }
    }
    SphericalField::from_coeffs(grid.clone(), &total)
}

/// `WKB_n(k, θ)` for the layers of `pot`.
pub fn wkb_factor(pot: &SparsePotential, k: Complex64, grid: &Arc<SphereGrid>) -> Result<SphericalField> {
    Ok(wkb_exponent(pot, k, grid)?.map(|e| (-e).exp()))
}

/// Exponent by direct product quadrature, with the phase written as
/// `|t| - ⟨θ,t⟩ = |t| |θ - t̂|² / 2` to avoid forward cancellation.
pub fn wkb_exponent_direct(pot: &SparsePotential, k: Complex64, grid: &Arc<SphereGrid>) -> Result<SphericalField> {
    check_closed_upper(k)?;
    let outer = pot.layers().last().map(|l| l.outer_radius()).unwrap_or(0.0);
    let required = (1.2 * k.norm() * outer).ceil() as usize + 8;
    if !pot.is_empty() && grid.degree() < required {
        return Err(LabError::Resolution { required, available: grid.degree() });
    }
    // (r, ω, weight · V / r)
    let mut samples: Vec<(f64, [f64; 3], f64)> = Vec::new();
    for layer in pot.layers() {
        let (rs, ws) = composite_gauss(&layer.radial_breaks(), RADIAL_NODES);
        for (&r, &w) in rs.iter().zip(&ws) {
            for (d, &wa) in grid.nodes().iter().zip(grid.weights()) {
                let v = layer.eval([r * d[0], r * d[1], r * d[2]]);
                if v != 0.0 {
                    samples.push((r, *d, w * wa * r * v));
                }
            }
        }
    }
    let values: Vec<Complex64> = grid
        .nodes()
        .par_iter()
        .map(|th| {
            let s: Complex64 = samples
                .iter()
                .map(|(r, d, w)| {
                    let q = (th[0] - d[0]).powi(2) + (th[1] - d[1]).powi(2) + (th[2] - d[2]).powi(2);
                    (I * k * (0.5 * r * q)).exp() * *w
                })
                .sum();
            s / (4.0 * PI)
        })
        .collect();
    SphericalField::new(grid.clone(), values)
}

pub fn wkb_factor_direct(pot: &SparsePotential, k: Complex64, grid: &Arc<SphereGrid>) -> Result<SphericalField> {
    Ok(wkb_exponent_direct(pot, k, grid)?.map(|e| (-e).exp()))
}

/// `(e^{2ikr} - 1)/(2ik)`, accurate as `kr → 0`.
pub fn radial_kernel(k: Complex64, r: f64) -> Complex64 {
    let z = 2.0 * I * k * r;
    if z.norm() < 1e-2 {
        // r (1 + z/2 + z²/6 + z³/24 + z⁴/120)
        let series = 1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)));
        series * r
    } else {
        (z.exp() - 1.0) / (2.0 * I * k)
    }
}

/// `∫₀^∞ V(r) (e^{2ikr} - 1)/(2ik) dr` for a spherically symmetric potential.
pub fn wkb_exponent_symmetric(pot: &SparsePotential, k: Complex64) -> Result<Complex64> {
    check_closed_upper(k)?;
    if !pot.is_symmetric() {
        return Err(LabError::Precondition("radial reduction needs symmetric layers".into()));
    }
    let mut s = Complex64::new(0.0, 0.0);
    for layer in pot.layers() {
        let (rs, ws) = composite_gauss(&layer.radial_breaks(), RADIAL_NODES);
        for (&r, &w) in rs.iter().zip(&ws) {
            let v = layer.radial_value(r).expect("symmetric layer");
            s += radial_kernel(k, r) * (w * v);
        }
    }
    Ok(s)
}

pub fn wkb_factor_symmetric(pot: &SparsePotential, k: Complex64) -> Result<Complex64> {
    Ok((-wkb_exponent_symmetric(pot, k)?).exp())
}

/// One-dimensional factor `exp[-(i/2k) ∫₀^∞ V]` for a piecewise linear profile.
pub fn wkb_1d(profile: &RadialTable, k: Complex64) -> Result<Complex64> {
    if k.im != 0.0 || k.re == 0.0 || !k.re.is_finite() {
        return Err(LabError::Precondition(format!("real nonzero k required, got {k}")));
    }
    let integral: f64 = profile
        .points()
        .windows(2)
        .map(|w| 0.5 * (w[0][1] + w[1][1]) * (w[1][0] - w[0][0]))
        .sum();
    Ok((-I * integral / (2.0 * k.re)).exp())
}

/// Monte-Carlo statistics of the exponent in the randomized bump model.
#[derive(Debug, Clone, Serialize)]
pub struct MomentEstimate {
    pub trials: usize,
    pub mean: Complex64,
    pub mean_stderr: f64,
    pub second_moment: f64,
    pub second_moment_stderr: f64,
    /// `Σ_b E[ω_b²] |I_b|²`, the second moment implied by independence.
    pub independent_sum: f64,
}

pub const MIN_TRIALS: usize = 100;

/// Deterministic exponent contribution of one unit-weight bump at `θ`,
/// by product quadrature over the bump's own ball.
fn bump_integral(center: [f64; 3], rho: f64, shape: impl Fn([f64; 3]) -> f64, k: Complex64, theta: [f64; 3], local: &SphereGrid) -> Complex64 {
    let (ss, ws) = gauss_legendre_interval(12, 0.0, rho);
    let mut total = Complex64::new(0.0, 0.0);
    for (&s, &w) in ss.iter().zip(&ws) {
        for (d, &wa) in local.nodes().iter().zip(local.weights()) {
            let t = [center[0] + s * d[0], center[1] + s * d[1], center[2] + s * d[2]];
            let r = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
            let q = (theta[0] - t[0] / r).powi(2) + (theta[1] - t[1] / r).powi(2) + (theta[2] - t[2] / r).powi(2);
            total += (I * k * (0.5 * r * q)).exp() * (w * wa * s * s * shape(t) / r);
        }
    }
    total / (4.0 * PI)
}

/// Mean and second moment of the exponent over independent redraws of
/// every bump weight. Trial `i` draws from stream `i` of `seed`.
pub fn randomized_wkb_moment(layers: &[LayerSpec], k: Complex64, theta: [f64; 3], trials: usize, seed: u64) -> Result<MomentEstimate> {
    check_closed_upper(k)?;
    if trials < MIN_TRIALS {
        return Err(LabError::InvalidArgument(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let nt = (theta[0] * theta[0] + theta[1] * theta[1] + theta[2] * theta[2]).sqrt();
    if !(nt > 0.0) {
        return Err(LabError::InvalidArgument("direction must be nonzero".into()));
    }
    let theta = [theta[0] / nt, theta[1] / nt, theta[2] / nt];
    let local = SphereGrid::new(12)?;
    // (integral, amplitude, law) per bump
    let mut bumps = Vec::new();
    for layer in layers {
        let LayerProfile::RandomBumps { ensemble } = layer.profile() else {
            return Err(LabError::Precondition("randomized model needs bump ensembles".into()));
        };
        for b in 0..ensemble.centers.len() {
            let integral = bump_integral(ensemble.centers[b], ensemble.radii[b], |x| ensemble.bump_shape(b, x), k, theta, &local);
            bumps.push((integral, ensemble.amplitude, ensemble.law));
        }
    }
    let independent_sum = bumps.iter().map(|(i, a, law)| a * a * law.second_moment() * i.norm_sqr()).sum();
    let draws: Vec<Complex64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            bumps.iter().map(|(i, a, law)| i * (a * law.draw(&mut rng))).sum()
        })
        .collect();
    let n = trials as f64;
    let mean: Complex64 = draws.iter().sum::<Complex64>() / n;
    let var_mean = draws.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    let sq: Vec<f64> = draws.iter().map(|x| x.norm_sqr()).collect();
    let second = sq.iter().sum::<f64>() / n;
    let var_sq = sq.iter().map(|x| (x - second).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MomentEstimate {
        trials,
        mean,
        mean_stderr: (var_mean / n).sqrt(),
        second_moment: second,
        second_moment_stderr: (var_sq / n).sqrt(),
        independent_sum,
    })
}

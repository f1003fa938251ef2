//! Separable free-space Green operator on unions of unit shells.
//!
//! Fields on the shells are held in the outgoing-scaled form
//! `u(r, ŝ) = e^{ikr} û(r, ŝ)` and expanded in spherical harmonics at every
//! radial node. The free kernel then acts degree by degree through
//!
//! ```text
//! e^{ik|x-y|}/(4π|x-y|) = ik Σ_m j_m(k r<) h_m(k r>) Σ_l Y_m^l(x̂) conj Y_m^l(ŷ)
//! ```
//!
//! so the angular singularity is handled exactly. The kink of the radial
//! kernel at `r = r'` is integrated by splitting each shell segment at the
//! target node and interpolating the source with the segment's Lagrange
//! basis.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::potential::LayerSpec;
use crate::quad::gauss_legendre_interval;
use crate::special::{spherical_h1_scaled, spherical_j_scaled};
use crate::sphere::{ShCoeffs, SphereGrid};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub(crate) struct RadialRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `(a, b, first node, node count)` for each Gauss segment.
    pub segments: Vec<(f64, f64, usize, usize)>,
    /// Layer each node belongs to.
    pub layer_of: Vec<usize>,
}

impl RadialRule {
    pub fn for_layers(layers: &[&LayerSpec], per_segment: usize) -> Self {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut segments = Vec::new();
        let mut layer_of = Vec::new();
        for (li, layer) in layers.iter().enumerate() {
            for pair in layer.radial_breaks().windows(2) {
                let (x, w) = gauss_legendre_interval(per_segment, pair[0], pair[1]);
                segments.push((pair[0], pair[1], nodes.len(), x.len()));
                layer_of.extend(std::iter::repeat(li).take(x.len()));
                nodes.extend(x);
                weights.extend(w);
            }
        }
        Self { nodes, weights, segments, layer_of }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
}

fn lagrange_weights(xs: &[f64], y: f64) -> Vec<f64> {
    (0..xs.len())
        .map(|j| {
            xs.iter()
                .enumerate()
                .filter(|&(p, _)| p != j)
                .map(|(_, &xp)| (y - xp) / (xs[j] - xp))
                .product()
        })
        .collect()
}

/// Scaled radial kernel `e^{-ik r_t} j_m(k r<) h_m(k r>) e^{ik r_s}` for all `m`.
fn scaled_kernel(k: Complex64, degree: usize, r_target: f64, r_source: f64) -> Vec<Complex64> {
    if r_source <= r_target {
        let j = spherical_j_scaled(degree, k * r_source);
        let h = spherical_h1_scaled(degree, k * r_target);
        j.iter().zip(&h).map(|(a, b)| a * b).collect()
    } else {
        let j = spherical_j_scaled(degree, k * r_target);
        let h = spherical_h1_scaled(degree, k * r_source);
        let ph = (2.0 * I * k * (r_source - r_target)).exp();
        j.iter().zip(&h).map(|(a, b)| a * b * ph).collect()
    }
}

pub(crate) struct ShellOperator {
    pub grid: Arc<SphereGrid>,
    pub k: Complex64,
    pub rule: RadialRule,
    /// Potential values per radial node on the sphere grid.
    pub potential: Vec<Vec<f64>>,
    /// `kernel[m][i * n + j]` including the `ik` prefactor and weights.
    kernel: Vec<Vec<Complex64>>,
    /// `ĵ_m(k r_i)` per node.
    pub jhat: Vec<Vec<Complex64>>,
    /// `ĥ_m(k r_i)` per node.
    pub hhat: Vec<Vec<Complex64>>,
}

impl ShellOperator {
    pub fn new(grid: Arc<SphereGrid>, k: Complex64, layers: &[&LayerSpec], per_segment: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(LabError::Precondition("shell operator needs at least one layer".into()));
        }
        let degree = grid.degree();
        let rule = RadialRule::for_layers(layers, per_segment);
        let n = rule.len();
        let potential = rule
            .nodes
            .par_iter()
            .zip(rule.layer_of.par_iter())
            .map(|(&r, &li)| {
                grid.nodes().iter().map(|d| layers[li].eval([r * d[0], r * d[1], r * d[2]])).collect()
            })
            .collect();
        let jhat: Vec<Vec<Complex64>> = rule.nodes.iter().map(|&r| spherical_j_scaled(degree, k * r)).collect();
        let hhat: Vec<Vec<Complex64>> = rule.nodes.iter().map(|&r| spherical_h1_scaled(degree, k * r)).collect();

        // rows[i] holds kernel entries for target i, laid out [m][j]
        let rows: Vec<Vec<Vec<Complex64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let ri = rule.nodes[i];
                let mut row = vec![vec![Complex64::new(0.0, 0.0); n]; degree + 1];
                for &(a, b, first, count) in &rule.segments {
                    let inside = i >= first && i < first + count;
                    if !inside {
                        for j in first..first + count {
                            let rj = rule.nodes[j];
                            let kern = scaled_kernel(k, degree, ri, rj);
                            let w = rule.weights[j] * rj * rj;
                            for m in 0..=degree {
                                row[m][j] += I * k * kern[m] * w;
                            }
                        }
                    } else {
                        let xs = &rule.nodes[first..first + count];
                        for (lo, hi) in [(a, ri), (ri, b)] {
                            if hi - lo <= 0.0 {
                                continue;
                            }
                            let (ys, ws) = gauss_legendre_interval(count, lo, hi);
                            for (&y, &wy) in ys.iter().zip(&ws) {
                                let kern = scaled_kernel(k, degree, ri, y);
                                let lag = lagrange_weights(xs, y);
                                for (p, lw) in lag.iter().enumerate() {
                                    let w = wy * y * y * lw;
                                    for m in 0..=degree {
                                        row[m][first + p] += I * k * kern[m] * w;
                                    }
                                }
                            }
                        }
                    }
                }
                row
            })
            .collect();
        let mut kernel = vec![vec![Complex64::new(0.0, 0.0); n * n]; degree + 1];
        for (i, row) in rows.into_iter().enumerate() {
            for (m, vals) in row.into_iter().enumerate() {
                kernel[m][i * n..(i + 1) * n].copy_from_slice(&vals);
            }
        }
        Ok(Self { grid, k, rule, potential, kernel, jhat, hhat })
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    /// Multiply scaled nodal fields by `V` and expand at every radial node.
    pub fn potential_times(&self, fields: &[Vec<Complex64>]) -> Vec<ShCoeffs> {
        fields
            .par_iter()
            .zip(self.potential.par_iter())
            .map(|(f, v)| {
                let prod: Vec<Complex64> = f.iter().zip(v).map(|(a, b)| a * b).collect();
                self.grid.analyze(&prod)
            })
            .collect()
    }

    /// Scaled `G₀ g` at every radial node, from scaled source coefficients.
    pub fn apply_green(&self, source: &[ShCoeffs]) -> Vec<ShCoeffs> {
        let n = self.len();
        let degree = self.grid.degree();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut out = ShCoeffs::zeros(degree);
                for m in 0..=degree {
                    let krow = &self.kernel[m][i * n..(i + 1) * n];
                    for l in -(m as i64)..=(m as i64) {
                        let v: Complex64 = krow.iter().zip(source).map(|(kk, s)| kk * s.get(m, l)).sum();
                        out.set(m, l, v);
                    }
                }
                out
            })
            .collect()
    }

    pub fn synthesize_all(&self, coeffs: &[ShCoeffs]) -> Vec<Vec<Complex64>> {
        coeffs.par_iter().map(|c| self.grid.synthesize(c).expect("grid degree")).collect()
    }

    /// `S_ml = ∫ r² ĵ_m(kr) g_ml(r) dr` for scaled sources `g`.
    pub fn radial_moments(&self, source: &[ShCoeffs]) -> ShCoeffs {
        let degree = self.grid.degree();
        let mut out = ShCoeffs::zeros(degree);
        for (i, s) in source.iter().enumerate() {
            let r = self.rule.nodes[i];
            let w = self.rule.weights[i] * r * r;
            for m in 0..=degree {
                let f = self.jhat[i][m] * w;
                for l in -(m as i64)..=(m as i64) {
                    let cur = out.get(m, l);
                    out.set(m, l, cur + s.get(m, l) * f);
                }
            }
        }
        out
    }
}

/// `(-i)^m`.
pub fn minus_i_pow(m: usize) -> Complex64 {
    match m % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

pub(crate) fn sup_norm_coeffs(grid: &SphereGrid, c: &ShCoeffs) -> f64 {
    grid.synthesize(c)
        .expect("grid degree")
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max)
}

/// Coefficients of `(4π)⁻¹ ∫ v(u)|u|⁻¹ e^{-ik⟨θ,u⟩ + ik|u|} du` over `θ`.
pub(crate) fn layer_exponent_coeffs(grid: &SphereGrid, k: Complex64, layer: &LayerSpec, per_segment: usize) -> ShCoeffs {
    let degree = grid.degree();
    let rule = RadialRule::for_layers(&[layer], per_segment);
    let parts: Vec<ShCoeffs> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&r, &w)| {
            let vals: Vec<Complex64> = grid
                .nodes()
                .iter()
                .map(|d| Complex64::new(layer.eval([r * d[0], r * d[1], r * d[2]]), 0.0))
                .collect();
            let mut c = grid.analyze(&vals);
            let j = spherical_j_scaled(degree, k * r);
            c.scale_by_degree(|m| minus_i_pow(m) * j[m] * (w * r));
            c
        })
        .collect();
    let mut out = ShCoeffs::zeros(degree);
    for p in &parts {
        for (a, b) in out.as_mut_slice().iter_mut().zip(p.as_slice()) {
            *a += b;
        }
    }
    out
}

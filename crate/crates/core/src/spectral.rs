//! Spectral density from far-field amplitudes, harmonic measure of an
//! isosceles triangle standing on a real interval, and the entropy chain
//! `∫_I ω ln σ' ≥ 2(J₁ + J₂)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::greens::{SourceSpec, RADIAL_NODES};
use crate::potential::{LayerProfile, LayerSpec, SparsePotential};
use crate::quad::{composite_gauss, gauss_legendre_interval};
use crate::radial::radial_amplitude_oracle;
use crate::sphere::{SphereGrid, SphericalField};
use crate::wkb::wkb_exponent_symmetric;

/// Lower limit for the base-angle parameter `γ₁`.
pub const DEFAULT_D_CONFIG: f64 = 9.0;
pub const MIN_BOUNDARY_NODES: usize = 200;
/// Multiplier on the measured mean-value defect.
const SAFETY: f64 = 10.0;

/// `σ'(k²) = k π⁻¹ ‖A‖²_{L²(Σ)}`.
pub fn spectral_density(a: &SphericalField, k: f64) -> f64 {
    let sq: Vec<f64> = a.values().iter().map(|v| v.norm_sqr()).collect();
    k / PI * a.grid().integrate_real(&sq)
}

/// Isosceles triangle in the upper half plane with base `[a, b]`, base
/// angles `π/γ₁` and an interior probe point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleDomain {
    pub a: f64,
    pub b: f64,
    pub gamma1: f64,
    pub probe: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Base,
    Right,
    Left,
}

impl TriangleDomain {
    pub fn new(a: f64, b: f64, gamma1: f64, probe: Complex64, d_config: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(LabError::InvalidArgument(format!("base needs a < b, got [{a}, {b}]")));
        }
        if !(gamma1 > d_config.max(2.0)) {
            return Err(LabError::InvalidArgument(format!("γ₁ = {gamma1} must exceed {}", d_config.max(2.0))));
        }
        let t = Self { a, b, gamma1, probe };
        if t.min_edge_distance([probe.re, probe.im]) <= 0.0 {
            return Err(LabError::InvalidArgument(format!("probe {probe} is not strictly inside the triangle")));
        }
        Ok(t)
    }

    /// Probe on the symmetry axis at `frac` of the height.
    pub fn with_axis_probe(a: f64, b: f64, gamma1: f64, frac: f64, d_config: f64) -> Result<Self> {
        let h = 0.5 * (b - a) * (PI / gamma1).tan();
        Self::new(a, b, gamma1, Complex64::new(0.5 * (a + b), frac * h), d_config)
    }

    pub fn height(&self) -> f64 {
        0.5 * (self.b - self.a) * (PI / self.gamma1).tan()
    }

    /// `A = (a, 0)`, `B = (b, 0)`, apex `C`, counter-clockwise.
    pub fn vertices(&self) -> [[f64; 2]; 3] {
        [[self.a, 0.0], [self.b, 0.0], [0.5 * (self.a + self.b), self.height()]]
    }

    pub fn base_length(&self) -> f64 {
        self.b - self.a
    }

    pub fn side_length(&self) -> f64 {
        0.5 * (self.b - self.a) / (PI / self.gamma1).cos()
    }

    pub fn perimeter(&self) -> f64 {
        self.base_length() + 2.0 * self.side_length()
    }

    /// Signed distances to the base, right and left edges (positive inside).
    fn edge_distances(&self, p: [f64; 2]) -> [f64; 3] {
        let v = self.vertices();
        let mut out = [0.0; 3];
        for e in 0..3 {
            let (p0, p1) = (v[e], v[(e + 1) % 3]);
            let (dx, dy) = (p1[0] - p0[0], p1[1] - p0[1]);
            out[e] = (dx * (p[1] - p0[1]) - dy * (p[0] - p0[0])) / dx.hypot(dy);
        }
        out
    }

    fn min_edge_distance(&self, p: [f64; 2]) -> f64 {
        self.edge_distances(p).iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Arc length from `A` counter-clockwise, and the side, of a boundary point.
    fn arc_length(&self, p: [f64; 2]) -> (f64, Side) {
        let d = self.edge_distances(p);
        let v = self.vertices();
        let e = (0..3).min_by(|&i, &j| d[i].abs().partial_cmp(&d[j].abs()).unwrap()).unwrap();
        let from = v[e];
        let along = (p[0] - from[0]).hypot(p[1] - from[1]);
        match e {
            0 => (along, Side::Base),
            1 => (self.base_length() + along, Side::Right),
            _ => (self.base_length() + self.side_length() + along, Side::Left),
        }
    }

    /// Distance from `p` along the unit direction `dir` to the first edge.
    fn exit_distance(&self, p: [f64; 2], dir: [f64; 2]) -> f64 {
        let v = self.vertices();
        let mut best = f64::INFINITY;
        for e in 0..3 {
            let (p0, p1) = (v[e], v[(e + 1) % 3]);
            let (dx, dy) = (p1[0] - p0[0], p1[1] - p0[1]);
            let len = dx.hypot(dy);
            let s0 = (dx * (p[1] - p0[1]) - dy * (p[0] - p0[0])) / len;
            let ds = (dx * dir[1] - dy * dir[0]) / len;
            if ds < 0.0 {
                best = best.min(s0 / -ds);
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundaryNode {
    /// Arc length from the left base endpoint, counter-clockwise.
    pub s: f64,
    pub point: Complex64,
    /// Discrete harmonic measure carried by the node.
    pub mass: f64,
    pub side: Side,
}

/// Discrete harmonic measure of the probe point on the triangle boundary.
#[derive(Debug, Clone, Serialize)]
pub struct HarmonicMeasure {
    pub domain: TriangleDomain,
    pub spacing: f64,
    pub interior_nodes: usize,
    /// Sorted by arc length.
    pub nodes: Vec<BoundaryNode>,
}

const DIRS: [[f64; 2]; 4] = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
const STEPS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Harmonic measure `ω(k₀, ·)` by a Shortley–Weller finite-difference
/// Laplace solve on a lattice through the probe. One adjoint solve yields
/// the value at `k₀` of every boundary impulse response at once.
pub fn harmonic_measure_triangle(t: &TriangleDomain, spacing: f64) -> Result<HarmonicMeasure> {
    if !(spacing > 0.0) {
        return Err(LabError::InvalidArgument(format!("grid spacing must be positive, got {spacing}")));
    }
    let estimate = (t.perimeter() / spacing) as usize;
    if estimate < MIN_BOUNDARY_NODES {
        return Err(LabError::Resolution { required: MIN_BOUNDARY_NODES, available: estimate });
    }
    let (x0, y0) = (t.probe.re, t.probe.im);
    let margin = 1e-9 * spacing;
    let i_lo = ((t.a - x0) / spacing).floor() as i64 - 1;
    let i_hi = ((t.b - x0) / spacing).ceil() as i64 + 1;
    let j_lo = (-y0 / spacing).floor() as i64 - 1;
    let j_hi = ((t.height() - y0) / spacing).ceil() as i64 + 1;
    let width = (i_hi - i_lo + 1) as usize;
    let cell = |i: i64, j: i64| ((j - j_lo) as usize) * width + (i - i_lo) as usize;
    let point = |i: i64, j: i64| [x0 + i as f64 * spacing, y0 + j as f64 * spacing];
    let mut index = vec![usize::MAX; width * (j_hi - j_lo + 1) as usize];
    let mut interior: Vec<(i64, i64)> = Vec::new();
    for j in j_lo..=j_hi {
        for i in i_lo..=i_hi {
            if t.min_edge_distance(point(i, j)) > margin {
                index[cell(i, j)] = interior.len();
                interior.push((i, j));
            }
        }
    }
    let n = interior.len();
    let probe = index[cell(0, 0)];
    if probe == usize::MAX {
        return Err(LabError::Precondition("probe too close to the boundary for this spacing".into()));
    }
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(5 * n);
    // (row, coefficient, boundary point)
    let mut boundary: Vec<(usize, f64, [f64; 2])> = Vec::new();
    for (row, &(i, j)) in interior.iter().enumerate() {
        let p = point(i, j);
        let mut arm = [spacing; 4];
        let mut inside = [true; 4];
        for d in 0..4 {
            let (di, dj) = STEPS[d];
            let (ni, nj) = (i + di, j + dj);
            let ok = ni >= i_lo && ni <= i_hi && nj >= j_lo && nj <= j_hi && index[cell(ni, nj)] != usize::MAX;
            if !ok {
                inside[d] = false;
                arm[d] = t.exit_distance(p, DIRS[d]).min(spacing).max(margin);
            }
        }
        let mut diag = 0.0;
        for axis in 0..2 {
            let (hp, hm) = (arm[2 * axis], arm[2 * axis + 1]);
            diag += 2.0 / (hp * hm);
            for (d, hd) in [(2 * axis, hp), (2 * axis + 1, hm)] {
                let c = 2.0 / (hd * (hp + hm));
                if inside[d] {
                    let (di, dj) = STEPS[d];
                    triplets.push((row, index[cell(i + di, j + dj)], -c));
                } else {
                    boundary.push((row, c, [p[0] + DIRS[d][0] * hd, p[1] + DIRS[d][1] * hd]));
                }
            }
        }
        triplets.push((row, row, diag));
    }
    if boundary.len() < MIN_BOUNDARY_NODES {
        return Err(LabError::Resolution { required: MIN_BOUNDARY_NODES, available: boundary.len() });
    }
    let mut rhs = vec![0.0; n];
    rhs[probe] = 1.0;
    let green = sparse_solve::solve_transpose(n, &triplets, &rhs).map_err(LabError::Solver)?;
    let mut nodes: Vec<BoundaryNode> = boundary
        .iter()
        .map(|&(row, c, p)| {
            let (s, side) = t.arc_length(p);
            BoundaryNode { s, point: Complex64::new(p[0], p[1]), mass: green[row] * c, side }
        })
        .collect();
    let total: f64 = nodes.iter().map(|b| b.mass).sum();
    if !(total.is_finite() && total > 0.0) || nodes.iter().any(|b| !b.mass.is_finite()) {
        return Err(LabError::Solver(format!("harmonic measure mass {total}")));
    }
    for b in &mut nodes {
        b.mass /= total;
    }
    nodes.sort_by(|x, y| x.s.partial_cmp(&y.s).unwrap());
    Ok(HarmonicMeasure { domain: *t, spacing, interior_nodes: n, nodes })
}

impl HarmonicMeasure {
    pub fn total_mass(&self) -> f64 {
        self.nodes.iter().map(|b| b.mass).sum()
    }

    pub fn base_mass(&self) -> f64 {
        self.nodes.iter().filter(|b| b.side == Side::Base).map(|b| b.mass).sum()
    }

    pub fn min_mass(&self) -> f64 {
        self.nodes.iter().map(|b| b.mass).fold(f64::INFINITY, f64::min)
    }

    /// `(s, ω)` on the base, uniformly spaced, closed by zeros at both ends.
    pub fn base_density(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0)];
        out.extend(self.nodes.iter().filter(|b| b.side == Side::Base).map(|b| (b.s, b.mass / self.spacing)));
        out.push((self.domain.base_length(), 0.0));
        out
    }

    /// Density at arc length `s` on the base, by linear interpolation.
    pub fn base_density_at(&self, s: f64) -> f64 {
        let d = self.base_density();
        if s <= 0.0 || s >= self.domain.base_length() {
            return 0.0;
        }
        let i = d.partition_point(|p| p.0 <= s).clamp(1, d.len() - 1);
        let (a, b) = (d[i - 1], d[i]);
        a.1 + (b.1 - a.1) * (s - a.0) / (b.0 - a.0)
    }

    /// Nodes `k ∈ I` and weights `ω(k) dk` from a natural cubic spline of the
    /// base density (clipped at zero) with `per_cell` Gauss points per cell.
    /// The spline keeps kink artifacts out of oscillatory integrands.
    pub fn base_quadrature(&self, per_cell: usize) -> Vec<(f64, f64)> {
        let d = self.base_density();
        let m = natural_spline_moments(&d);
        let mut out = Vec::with_capacity(d.len() * per_cell);
        for i in 0..d.len() - 1 {
            let ((s0, r0), (s1, r1)) = (d[i], d[i + 1]);
            let len = s1 - s0;
            if len < 1e-14 {
                continue;
            }
            let (xs, ws) = gauss_legendre_interval(per_cell.max(1), s0, s1);
            for (x, wt) in xs.into_iter().zip(ws) {
                let (u, v) = ((s1 - x) / len, (x - s0) / len);
                let rho = u * r0 + v * r1 + len * len / 6.0 * ((u * u * u - u) * m[i] + (v * v * v - v) * m[i + 1]);
                out.push((self.domain.a + x, rho.max(0.0) * wt));
            }
        }
        out
    }

    /// Largest `|ω(s) - ω(L - s)|` on the base relative to the peak density.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.base_density();
        let len = self.domain.base_length();
        let peak = d.iter().map(|p| p.1).fold(0.0, f64::max);
        d.iter().map(|&(s, r)| (r - self.base_density_at(len - s)).abs()).fold(0.0, f64::max) / peak
    }

    /// Exponent `p` in `ω(s) ~ s^p` near the left base endpoint, fitted on
    /// the cumulative base mass `∫₀^s ω ~ s^{p+1}` for `s / |I| ∈ [lo, hi]`.
    pub fn endpoint_exponent(&self, lo: f64, hi: f64) -> Result<f64> {
        let len = self.domain.base_length();
        let mut cum = 0.0;
        let mut pts = Vec::new();
        for b in self.nodes.iter().filter(|b| b.side == Side::Base) {
            cum += b.mass;
            // cumulative mass up to the cell edge s + h/2
            let s = b.s + 0.5 * self.spacing;
            if s >= lo * len && s <= hi * len && cum > 0.0 {
                pts.push((s.ln(), cum.ln()));
            }
        }
        if pts.len() < 5 {
            return Err(LabError::Resolution { required: 5, available: pts.len() });
        }
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / m, sy / m);
        let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
        Ok(num / den - 1.0)
    }
}

/// Second derivatives of the natural cubic spline through `pts`.
fn natural_spline_moments(pts: &[(f64, f64)]) -> Vec<f64> {
    let n = pts.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior equations
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        let (h0, h1) = (pts[i].0 - pts[i - 1].0, pts[i + 1].0 - pts[i].0);
        let lower = h0 / 6.0;
        diag[i] = (h0 + h1) / 3.0;
        upper[i] = h1 / 6.0;
        rhs[i] = (pts[i + 1].1 - pts[i].1) / h1 - (pts[i].1 - pts[i - 1].1) / h0;
        if i > 1 {
            let w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
    }
    for i in (1..n - 1).rev() {
        m[i] = (rhs[i] - upper[i] * m[i + 1]) / diag[i];
    }
    m
}

/// Largest `|∫_∂T ω u - u(k₀)|` over a few harmonic polynomials `u`, using
/// the base quadrature on `I` and the node masses on the sides.
pub fn mean_value_defect(omega: &HarmonicMeasure, quad: &[(f64, f64)]) -> f64 {
    let tests: [fn(Complex64) -> f64; 4] = [|z| z.re, |z| (z * z).re, |z| (z * z).im, |z| (z * z * z).re];
    let k0 = omega.domain.probe;
    tests
        .iter()
        .map(|u| {
            let base: f64 = quad.iter().map(|&(s, w)| w * u(Complex64::new(s, 0.0))).sum();
            let sides: f64 = omega.nodes.iter().filter(|b| b.side != Side::Base).map(|b| b.mass * u(b.point)).sum();
            (base + sides - u(k0)).abs()
        })
        .fold(0.0, f64::max)
}

/// Angular mean `⨍_Σ V(rθ) dθ` of one layer.
fn angular_mean(layer: &LayerSpec, r: f64) -> Result<f64> {
    if r <= layer.inner_radius() || r >= layer.outer_radius() {
        return Ok(0.0);
    }
    match layer.profile() {
        LayerProfile::Radial { table } => Ok(table.eval(r)),
        LayerProfile::Harmonic { terms } => {
            Ok(terms.iter().filter(|t| t.degree == 0).map(|t| t.table.eval(r)).sum::<f64>() / (4.0 * PI).sqrt())
        }
        LayerProfile::RandomBumps { .. } => Err(LabError::Precondition("entropy terms need radial or harmonic layers".into())),
    }
}

/// `⨍_Σ ln|WKB(k, θ)| dθ = -Re ∫ V̄(r) (e^{2ikr} - 1)/(2ik) dr` at real `k`.
fn mean_log_wkb(pot: &SparsePotential, k: f64) -> Result<f64> {
    let mut s = 0.0;
    for layer in pot.layers() {
        let (rs, ws) = composite_gauss(&layer.radial_breaks(), RADIAL_NODES);
        for (&r, &w) in rs.iter().zip(&ws) {
            s += w * angular_mean(layer, r)? * (2.0 * k * r).sin() / (2.0 * k);
        }
    }
    Ok(-s)
}

/// `J₁ = ∫_I ω(k₀, s) ⨍_Σ ln|WKB_n(s, θ)| dθ ds` on the given base quadrature.
pub fn entropy_j1(pot: &SparsePotential, quad: &[(f64, f64)]) -> Result<f64> {
    let vals: Vec<f64> = quad.par_iter().map(|&(s, _)| mean_log_wkb(pot, s)).collect::<Result<_>>()?;
    Ok(quad.iter().zip(&vals).map(|(q, v)| q.1 * v).sum())
}

/// `∫ |V(u)| (1 + |u|²)^{-3/2} du`, the size that controls `|J₁|`.
pub fn j1_shape_integral(pot: &SparsePotential) -> Result<f64> {
    let mut total = 0.0;
    for layer in pot.layers() {
        let (rs, ws) = composite_gauss(&layer.radial_breaks(), RADIAL_NODES);
        let grid = if layer.is_symmetric() { None } else { Some(SphereGrid::new(2 * layer.harmonic_degree().ok_or_else(|| LabError::Precondition("bump layers unsupported".into()))? + 8)?) };
        for (&r, &w) in rs.iter().zip(&ws) {
            let shell = match &grid {
                None => 4.0 * PI * layer.radial_value(r).unwrap().abs(),
                Some(g) => {
                    let vals: Vec<f64> = g.nodes().iter().map(|d| layer.eval([r * d[0], r * d[1], r * d[2]]).abs()).collect();
                    g.integrate_real(&vals)
                }
            };
            total += w * r * r * shell * (1.0 + r * r).powf(-1.5);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct J2Report {
    /// `∫_I ω ⨍ ln|Ã|`.
    pub j2: f64,
    /// `⨍ ln|Ã(k₀)| - ∫_{sides} ω ⨍ ln|Ã|`, a lower bound for `j2`.
    pub chain_bound: f64,
    pub probe_log_abs: f64,
    pub side_integral: f64,
    /// `|Ã(k₀)|` cleared the threshold.
    pub certified: bool,
}

/// `J₂` from sphere-averaged `ln|Ã|` at the base quadrature nodes, with the
/// mean-value chain evaluated through `log_reduced` at the probe and sides.
pub fn entropy_j2<F>(omega: &HarmonicMeasure, quad: &[(f64, f64)], base_log_reduced: &[f64], log_reduced: F, threshold: f64) -> Result<J2Report>
where
    F: Fn(Complex64) -> Result<f64> + Sync,
{
    if quad.len() != base_log_reduced.len() {
        return Err(LabError::InvalidArgument("one reduced value per base node".into()));
    }
    let j2 = quad.iter().zip(base_log_reduced).map(|(q, v)| q.1 * v).sum();
    let sides: Vec<&BoundaryNode> = omega.nodes.iter().filter(|b| b.side != Side::Base).collect();
    let side_vals: Vec<f64> = sides.par_iter().map(|b| log_reduced(b.point)).collect::<Result<_>>()?;
    let side_integral: f64 = sides.iter().zip(&side_vals).map(|(b, v)| b.mass * v).sum();
    let probe_log_abs = log_reduced(omega.domain.probe)?;
    Ok(J2Report {
        j2,
        chain_bound: probe_log_abs - side_integral,
        probe_log_abs,
        side_integral,
        certified: probe_log_abs > threshold.ln(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyOptions {
    /// Lattice spacing of the Laplace solve.
    pub spacing: f64,
    /// Gauss points per lattice cell on the base.
    pub per_cell: usize,
    /// Lower limit for `|Ã(k₀)|`.
    pub probe_threshold: f64,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        Self { spacing: 5e-3, per_cell: 2, probe_threshold: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub n: usize,
    pub j1: f64,
    pub j2: f64,
    /// `∫_I ω ln σ'_n`.
    pub lhs: f64,
    /// `∫_I ω ln ⨍_Σ |A_n|²`, the quantity Jensen bounds by `2(J₁ + J₂)`.
    pub chain_lhs: f64,
    pub jensen_ok: bool,
    pub j2_chain: f64,
    pub probe_abs: f64,
    pub certified: bool,
    /// `∫_I ω ln 4s + 2(J₁ + J₂ chain)`, a lower bound for `lhs`.
    pub certified_bound: f64,
    /// Smallest certified bound over all computed `n`, lowered by
    /// `allowance`.
    pub threshold: f64,
    /// Discretization allowance of the mean-value step.
    pub allowance: f64,
    /// `|J₁| / ∫|V_n|(1+|u|²)^{-3/2}`; `None` without layers.
    pub j1_shape_constant: Option<f64>,
}

/// `ln|Ã| = ln|A| + Re Σκ` for symmetric data at `k` in the closed upper half plane.
fn log_reduced_symmetric(f: &SourceSpec, pot: &SparsePotential, k: Complex64) -> Result<(f64, f64)> {
    let a = radial_amplitude_oracle(f, pot, k)?;
    let kappa = wkb_exponent_symmetric(pot, k)?;
    Ok((a.norm().ln(), a.norm().ln() + kappa.re))
}

/// Per-layer-count entropy reports for a symmetric potential and radial source.
pub fn entropy_lower_bound(pot: &SparsePotential, f: &SourceSpec, t: &TriangleDomain, n_max: usize, opts: EntropyOptions) -> Result<Vec<EntropyReport>> {
    if !pot.is_symmetric() || f.modulation.is_some() {
        return Err(LabError::Precondition("entropy chain needs a symmetric potential and a radial source".into()));
    }
    if t.a <= 0.0 {
        return Err(LabError::Precondition("base interval must lie in k > 0".into()));
    }
    let omega = harmonic_measure_triangle(t, opts.spacing)?;
    entropy_with_measure(pot, f, &omega, n_max, opts)
}

/// As [`entropy_lower_bound`], on a harmonic measure already computed.
pub fn entropy_with_measure(pot: &SparsePotential, f: &SourceSpec, omega: &HarmonicMeasure, n_max: usize, opts: EntropyOptions) -> Result<Vec<EntropyReport>> {
    if !pot.is_symmetric() || f.modulation.is_some() {
        return Err(LabError::Precondition("entropy chain needs a symmetric potential and a radial source".into()));
    }
    let quad = omega.base_quadrature(opts.per_cell);
    let log_4s: f64 = quad.iter().map(|&(s, w)| w * (4.0 * s).ln()).sum();
    let mut reports = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let pot_n = pot.truncated(n);
        let base: Vec<(f64, f64)> = quad.par_iter().map(|&(s, _)| log_reduced_symmetric(f, &pot_n, Complex64::new(s, 0.0))).collect::<Result<_>>()?;
        let chain_lhs: f64 = quad.iter().zip(&base).map(|(q, v)| q.1 * 2.0 * v.0).sum();
        let j1 = entropy_j1(&pot_n, &quad)?;
        let reduced: Vec<f64> = base.iter().map(|v| v.1).collect();
        let j2 = entropy_j2(omega, &quad, &reduced, |k| Ok(log_reduced_symmetric(f, &pot_n, k)?.1), opts.probe_threshold)?;
        let bound = 2.0 * (j1 + j2.j2);
        let shape = j1_shape_integral(&pot_n)?;
        reports.push(EntropyReport {
            n,
            j1,
            j2: j2.j2,
            lhs: log_4s + chain_lhs,
            chain_lhs,
            jensen_ok: chain_lhs >= bound - 1e-9 * (1.0 + chain_lhs.abs()),
            j2_chain: j2.chain_bound,
            probe_abs: j2.probe_log_abs.exp(),
            certified: j2.certified,
            certified_bound: log_4s + 2.0 * (j1 + j2.chain_bound),
            threshold: f64::NAN,
            allowance: f64::NAN,
            j1_shape_constant: if shape > 0.0 { Some(j1.abs() / shape) } else { None },
        });
    }
    // the free chain is an exact mean value, so its defect measures the lattice error
    let free_defect = (reports[0].j2 - reports[0].j2_chain).abs();
    let allowance = SAFETY * 2.0 * free_defect.max(mean_value_defect(omega, &quad));
    let threshold = reports.iter().map(|r| r.certified_bound).fold(f64::INFINITY, f64::min) - allowance;
    for r in &mut reports {
        r.threshold = threshold;
        r.allowance = allowance;
    }
    Ok(reports)
}

/// Probe on the symmetry axis maximizing `|A⁰(k)|` for a radial source.
pub fn choose_axis_probe(f: &SourceSpec, a: f64, b: f64, gamma1: f64, d_config: f64, samples: usize) -> Result<TriangleDomain> {
    let mut best: Option<(f64, f64)> = None;
    for i in 1..samples {
        let frac = i as f64 / samples as f64;
        let t = TriangleDomain::with_axis_probe(a, b, gamma1, frac, d_config)?;
        let v = radial_amplitude_oracle(f, &SparsePotential::empty(), t.probe)?.norm();
        if best.map_or(true, |(_, bv)| v > bv) {
            best = Some((frac, v));
        }
    }
    let frac = best.ok_or_else(|| LabError::InvalidArgument("need at least two samples".into()))?.0;
    TriangleDomain::with_axis_probe(a, b, gamma1, frac, d_config)
}

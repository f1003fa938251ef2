//! Free amplitude, a few-layer Born solver built on the separable shell
//! operator, the far-field remainder and the recursion coefficients κ, β.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::potential::{LayerSpec, RadialTable, SparsePotential};
use crate::quad::composite_gauss;
use crate::shell::{layer_exponent_coeffs, minus_i_pow, ShellOperator};
use crate::special::{spherical_h1_scaled, spherical_j_scaled};
use crate::sphere::{real_harmonic, real_harmonic_in_complex, ShCoeffs, SphereGrid, SphericalField};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Radial nodes per Gauss segment for every shell and source integral.
pub const RADIAL_NODES: usize = 16;

/// Largest layer count accepted by [`born_solve`].
pub const MAX_BORN_LAYERS: usize = 3;

/// Largest shell radius accepted by [`born_solve`].
pub const MAX_BORN_RADIUS: f64 = 1e3;

/// A source supported in the unit ball: `f(x) = p(|x|) Y(x̂)` with `Y` a
/// real harmonic, or `Y = 1` when there is no modulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub profile: RadialTable,
    #[serde(default)]
    pub modulation: Option<(usize, i64)>,
}

impl SourceSpec {
    pub fn new(profile: RadialTable, modulation: Option<(usize, i64)>) -> Result<Self> {
        let s = Self { profile, modulation };
        s.validate()?;
        Ok(s)
    }

    /// Indicator of the unit ball.
    pub fn ball_indicator() -> Self {
        Self { profile: RadialTable::constant(0.0, 1.0, 1.0), modulation: None }
    }

    pub fn validate(&self) -> Result<()> {
        let pts = self.profile.points();
        if pts[0][0] < 0.0 || pts[pts.len() - 1][0] > 1.0 {
            return Err(LabError::Precondition("source must be supported in the unit ball".into()));
        }
        if let Some((m, l)) = self.modulation {
            if l.unsigned_abs() as usize > m {
                return Err(LabError::InvalidArgument(format!("modulation order {l} exceeds degree {m}")));
            }
        }
        if self.norm() == 0.0 {
            return Err(LabError::Precondition("source is identically zero".into()));
        }
        Ok(())
    }

    fn breaks(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.profile.points().iter().map(|p| p[0].clamp(0.0, 1.0)).collect();
        b.push(0.0);
        b.push(1.0);
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        b
    }

    /// `‖f‖₂`.
    pub fn norm(&self) -> f64 {
        let (r, w) = composite_gauss(&self.breaks(), RADIAL_NODES);
        let angular = if self.modulation.is_some() { 1.0 } else { 4.0 * PI };
        let s: f64 = r.iter().zip(&w).map(|(&r, &w)| w * r * r * self.profile.eval(r).powi(2)).sum();
        (s * angular).sqrt()
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r > 1.0 {
            return 0.0;
        }
        let p = self.profile.eval(r);
        match self.modulation {
            Some((m, l)) => p * real_harmonic(m, l, x),
            None => p,
        }
    }

    /// Complex-harmonic content `(m, l, weight)` of the angular factor.
    fn angular_content(&self) -> Vec<(usize, i64, Complex64)> {
        match self.modulation {
            None => vec![(0, 0, Complex64::new((4.0 * PI).sqrt(), 0.0))],
            Some((m, l)) => real_harmonic_in_complex(m, l).into_iter().map(|(o, w)| (m, o, w)).collect(),
        }
    }

    /// `F_ml = ∫ r² j_m(kr) f_ml(r) dr` up to `degree`.
    pub fn bessel_moments(&self, k: Complex64, degree: usize) -> ShCoeffs {
        let mut out = ShCoeffs::zeros(degree);
        let (r, w) = composite_gauss(&self.breaks(), RADIAL_NODES);
        for (m, l, c) in self.angular_content() {
            if m > degree {
                continue;
            }
            let s: Complex64 = r
                .iter()
                .zip(&w)
                .map(|(&r, &w)| {
                    let j = spherical_j_scaled(m, k * r)[m] * (-I * k * r).exp();
                    j * (w * r * r * self.profile.eval(r))
                })
                .sum();
            out.set(m, l, out.get(m, l) + c * s);
        }
        out
    }
}

fn check_upper(k: Complex64, strict: bool) -> Result<()> {
    let bad = if strict { !(k.im > 0.0) } else { k.im < 0.0 };
    if bad || !k.re.is_finite() || !k.im.is_finite() {
        let what = if strict { "Im k > 0" } else { "Im k ≥ 0" };
        return Err(LabError::Precondition(format!("{what} required, got k = {k}")));
    }
    Ok(())
}

fn check_free_resolution(k: Complex64, grid: &SphereGrid) -> Result<()> {
    let required = 2 + k.norm().ceil() as usize;
    if grid.degree() < required {
        return Err(LabError::Resolution { required, available: grid.degree() });
    }
    Ok(())
}

/// `A⁰(θ) = (4π)⁻¹ ∫ e^{-ik⟨θ,x⟩} f(x) dx` via the plane-wave expansion.
pub fn free_amplitude(f: &SourceSpec, k: Complex64, grid: &Arc<SphereGrid>) -> Result<SphericalField> {
    check_upper(k, false)?;
    check_free_resolution(k, grid)?;
    f.validate()?;
    let mut c = f.bessel_moments(k, grid.degree());
    c.scale_by_degree(minus_i_pow);
    SphericalField::from_coeffs(grid.clone(), &c)
}

/// The same amplitude by direct 3-D product quadrature over the ball.
pub fn free_amplitude_quadrature(f: &SourceSpec, k: Complex64, grid: &Arc<SphereGrid>) -> Result<SphericalField> {
    check_upper(k, false)?;
    check_free_resolution(k, grid)?;
    f.validate()?;
    let (rs, ws) = composite_gauss(&f.breaks(), RADIAL_NODES);
    let samples: Vec<([f64; 3], f64)> = rs
        .iter()
        .zip(&ws)
        .flat_map(|(&r, &w)| {
            grid.nodes().iter().zip(grid.weights()).map(move |(d, &wa)| ([r * d[0], r * d[1], r * d[2]], w * wa * r * r))
        })
        .map(|(x, w)| (x, w * f.eval(x)))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    Ok(SphericalField::from_fn(grid.clone(), |th| {
        let s: Complex64 = samples
            .iter()
            .map(|(x, w)| (-I * k * (th[0] * x[0] + th[1] * x[1] + th[2] * x[2])).exp() * *w)
            .sum();
        s / (4.0 * PI)
    }))
}

/// Free Green function `e^{ik|x-y|}/(4π|x-y|)`.
pub fn free_green(x: [f64; 3], y: [f64; 3], k: Complex64) -> Complex64 {
    let d = dist(x, y);
    (I * k * d).exp() / (4.0 * PI * d)
}

fn dist(x: [f64; 3], y: [f64; 3]) -> f64 {
    ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt()
}

fn norm3(x: [f64; 3]) -> f64 {
    dist(x, [0.0; 3])
}

/// One evaluation of the perturbed Green function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenSample {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub k: Complex64,
    pub value: Complex64,
    pub free_part: Complex64,
    pub delta: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BornOptions {
    /// Largest number of Born terms after the free one.
    pub order_cap: usize,
    /// Stop once the scaled-field increment sup-norm drops below this.
    pub tol: f64,
}

impl Default for BornOptions {
    fn default() -> Self {
        Self { order_cap: 40, tol: 1e-13 }
    }
}

#[derive(Debug, Clone)]
pub struct BornResult {
    pub amplitude: SphericalField,
    /// Sup-norm of the last amplitude increment kept.
    pub error_bar: f64,
    /// Born terms summed after the free one.
    pub orders: usize,
    /// Ratio of the last two field increments.
    pub contraction: f64,
    pub samples: Vec<GreenSample>,
}

/// Neumann series `w = w₀ - G V w₀ + ...` on the shell nodes.
struct Series {
    total: Vec<ShCoeffs>,
    /// Amplitude-level increments `-far(V w_j)` summed with sign.
    far_total: ShCoeffs,
    last_far: f64,
    orders: usize,
    contraction: f64,
}

fn coeff_sup(c: &[ShCoeffs]) -> f64 {
    c.iter().map(|s| s.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max)).fold(0.0, f64::max)
}

fn neumann(op: &ShellOperator, incident: Vec<ShCoeffs>, opts: BornOptions) -> Result<Series> {
    let degree = op.grid.degree();
    let mut total = incident.clone();
    let mut current = incident;
    let mut far_total = ShCoeffs::zeros(degree);
    let mut last_far = 0.0;
    let mut prev_norm = coeff_sup(&current);
    let mut contraction = 0.0;
    let mut growth = 0;
    let mut orders = 0;
    while orders < opts.order_cap {
        let vw = op.potential_times(&op.synthesize_all(&current));
        let mut far = op.radial_moments(&vw);
        far.scale_by_degree(|m| -minus_i_pow(m));
        for (a, b) in far_total.as_mut_slice().iter_mut().zip(far.as_slice()) {
            *a += b;
        }
        last_far = crate::shell::sup_norm_coeffs(&op.grid, &far);
        orders += 1;
        if orders == opts.order_cap {
            break;
        }
        let mut next = op.apply_green(&vw);
        for c in next.iter_mut() {
            c.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
        }
        let norm = coeff_sup(&next);
        if prev_norm > 0.0 {
            contraction = norm / prev_norm;
        }
        growth = if norm > prev_norm { growth + 1 } else { 0 };
        if growth >= 3 {
            return Err(LabError::NonConvergence { order: orders, contraction });
        }
        for (t, n) in total.iter_mut().zip(&next) {
            for (a, b) in t.as_mut_slice().iter_mut().zip(n.as_slice()) {
                *a += b;
            }
        }
        if norm <= opts.tol {
            break;
        }
        prev_norm = norm;
        current = next;
    }
    Ok(Series { total, far_total, last_far, orders, contraction })
}

fn born_preconditions(pot: &SparsePotential, k: Complex64) -> Result<()> {
    check_upper(k, true)?;
    if pot.len() > MAX_BORN_LAYERS {
        return Err(LabError::Precondition(format!(
            "born solver handles at most {MAX_BORN_LAYERS} layers, got {}",
            pot.len()
        )));
    }
    if let Some(l) = pot.layers().iter().find(|l| l.outer_radius() > MAX_BORN_RADIUS + 1.0) {
        return Err(LabError::Precondition(format!(
            "born solver handles radii up to {MAX_BORN_RADIUS}, got {}",
            l.inner_radius()
        )));
    }
    if let Some(l) = pot.layers().first() {
        if l.inner_radius() < 1.0 {
            return Err(LabError::Precondition("shells must lie outside the source ball".into()));
        }
    }
    Ok(())
}

fn inside_any_shell(pot: &SparsePotential, r: f64) -> bool {
    pot.layers().iter().any(|l| r >= l.inner_radius() && r <= l.outer_radius())
}

/// Scaled incident field `ik ĥ_m(kr) F_ml` on the shell nodes.
fn source_incident(op: &ShellOperator, moments: &ShCoeffs) -> Vec<ShCoeffs> {
    op.hhat
        .iter()
        .map(|h| {
            let mut c = moments.clone();
            c.scale_by_degree(|m| I * op.k * h[m]);
            c
        })
        .collect()
}

/// Amplitude after the layers of `pot`, with Green samples at `pairs`.
pub fn born_solve(
    f: &SourceSpec,
    pot: &SparsePotential,
    k: Complex64,
    grid: &Arc<SphereGrid>,
    opts: BornOptions,
    pairs: &[([f64; 3], [f64; 3])],
) -> Result<BornResult> {
    born_preconditions(pot, k)?;
    let a0 = free_amplitude(f, k, grid)?;
    if pot.is_empty() {
        let samples = pairs
            .iter()
            .map(|&(x, y)| {
                let g0 = free_green(x, y, k);
                GreenSample { x, y, k, value: g0, free_part: g0, delta: Complex64::new(0.0, 0.0) }
            })
            .collect();
        return Ok(BornResult { amplitude: a0, error_bar: 0.0, orders: 0, contraction: 0.0, samples });
    }
    let layers: Vec<&LayerSpec> = pot.layers().iter().collect();
    let op = ShellOperator::new(grid.clone(), k, &layers, RADIAL_NODES)?;
    let moments = f.bessel_moments(k, grid.degree());
    let series = neumann(&op, source_incident(&op, &moments), opts)?;
    let correction = SphericalField::from_coeffs(grid.clone(), &series.far_total)?;
    let amplitude = a0.zip_with(&correction, |a, b| a + b);
    let samples = pairs
        .iter()
        .map(|&(x, y)| green_sample(&op, pot, x, y, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(BornResult {
        amplitude,
        error_bar: series.last_far,
        orders: series.orders,
        contraction: series.contraction,
        samples,
    })
}

fn green_sample(op: &ShellOperator, pot: &SparsePotential, x: [f64; 3], y: [f64; 3], opts: BornOptions) -> Result<GreenSample> {
    let (rx, ry) = (norm3(x), norm3(y));
    if inside_any_shell(pot, rx) || inside_any_shell(pot, ry) {
        return Err(LabError::Precondition("green sample points must lie off the shells".into()));
    }
    if dist(x, y) == 0.0 {
        return Err(LabError::Precondition("green sample needs x ≠ y".into()));
    }
    let k = op.k;
    let grid = &op.grid;
    let incident: Vec<ShCoeffs> = op
        .rule
        .nodes
        .iter()
        .map(|&r| {
            let vals: Vec<Complex64> = grid
                .nodes()
                .iter()
                .map(|d| free_green([r * d[0], r * d[1], r * d[2]], y, k) * (-I * k * r).exp())
                .collect();
            grid.analyze(&vals)
        })
        .collect();
    let series = neumann(op, incident, opts)?;
    let vw = op.potential_times(&op.synthesize_all(&series.total));
    let outer = pot.layers().last().map(|l| l.outer_radius()).unwrap_or(0.0);
    let delta = if rx > outer {
        let mom = op.radial_moments(&vw);
        let h = spherical_h1_scaled(grid.degree(), k * rx);
        let mut s = Complex64::new(0.0, 0.0);
        for m in 0..=grid.degree() {
            for l in -(m as i64)..=(m as i64) {
                s += h[m] * crate::sphere::complex_harmonic(m, l, x) * mom.get(m, l);
            }
        }
        -I * k * (I * k * rx).exp() * s
    } else {
        // direct product quadrature, x away from the shells
        let mut s = Complex64::new(0.0, 0.0);
        for (i, c) in vw.iter().enumerate() {
            let r = op.rule.nodes[i];
            let vals = grid.synthesize(c)?;
            let w = op.rule.weights[i] * r * r;
            for ((d, wa), v) in grid.nodes().iter().zip(grid.weights()).zip(&vals) {
                let z = [r * d[0], r * d[1], r * d[2]];
                s += free_green(x, z, k) * (I * k * r).exp() * v * (w * wa);
            }
        }
        -s
    };
    let free_part = free_green(x, y, k);
    Ok(GreenSample { x, y, k, value: free_part + delta, free_part, delta })
}

/// `sup_θ |ρ(x, k)|` at each radius, where `u = e^{ik|x|}|x|⁻¹ (A + ρ)`.
pub fn far_field_remainder(
    f: &SourceSpec,
    pot: &SparsePotential,
    k: Complex64,
    grid: &Arc<SphereGrid>,
    opts: BornOptions,
    radii: &[f64],
) -> Result<Vec<(f64, f64)>> {
    born_preconditions(pot, k)?;
    let outer = pot.layers().last().map(|l| l.outer_radius()).unwrap_or(1.0).max(1.0);
    if let Some(&r) = radii.iter().find(|&&r| !(r > outer)) {
        return Err(LabError::Precondition(format!("radius {r} does not exceed the outermost shell {outer}")));
    }
    let degree = grid.degree();
    let mut net = f.bessel_moments(k, degree);
    if !pot.is_empty() {
        let layers: Vec<&LayerSpec> = pot.layers().iter().collect();
        let op = ShellOperator::new(grid.clone(), k, &layers, RADIAL_NODES)?;
        let series = neumann(&op, source_incident(&op, &net), opts)?;
        let vw = op.potential_times(&op.synthesize_all(&series.total));
        let s = op.radial_moments(&vw);
        for (a, b) in net.as_mut_slice().iter_mut().zip(s.as_slice()) {
            *a -= b;
        }
    }
    radii
        .iter()
        .map(|&r| {
            let h = spherical_h1_scaled(degree, k * r);
            let mut c = net.clone();
            c.scale_by_degree(|m| I * k * r * h[m] - minus_i_pow(m));
            Ok((r, SphericalField::from_coeffs(grid.clone(), &c)?.sup_norm()))
        })
        .collect()
}

fn single_layer_operator(layer: &LayerSpec, k: Complex64, grid: &Arc<SphereGrid>) -> Result<ShellOperator> {
    check_upper(k, true)?;
    ShellOperator::new(grid.clone(), k, &[layer], RADIAL_NODES)
}

/// Nodal `v(r ω)/r` on the operator's radial nodes, expanded.
fn potential_over_r(op: &ShellOperator) -> Vec<ShCoeffs> {
    op.rule
        .nodes
        .iter()
        .zip(&op.potential)
        .map(|(&r, v)| {
            let vals: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x / r, 0.0)).collect();
            op.grid.analyze(&vals)
        })
        .collect()
}

/// `κ(θ) = (4π)⁻¹ ∫ v(u)|u|⁻¹ e^{-ik⟨θ,u⟩ + ik|u|} du`.
pub fn kappa(layer: &LayerSpec, k: Complex64, grid: &Arc<SphereGrid>) -> Result<SphericalField> {
    check_upper(k, true)?;
    SphericalField::from_coeffs(grid.clone(), &layer_exponent_coeffs(grid, k, layer, RADIAL_NODES))
}

/// β of one layer, with the last kept Born increment as error bar.
pub fn beta(layer: &LayerSpec, k: Complex64, grid: &Arc<SphereGrid>, born_order: usize) -> Result<(SphericalField, f64)> {
    let op = single_layer_operator(layer, k, grid)?;
    let src = potential_over_r(&op);
    let w0 = op.apply_green(&src);
    let series = neumann(&op, w0, BornOptions { order_cap: born_order.max(1), tol: 0.0 })?;
    // far(v w) = -(far_total) by construction of the series increments
    let mut c = series.far_total;
    c.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
    Ok((SphericalField::from_coeffs(grid.clone(), &c)?, series.last_far))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{HarmonicTerm, LayerProfile};
    use crate::quad::gauss_legendre_interval;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ball_closed_form(k: Complex64) -> Complex64 {
        (k.sin() - k * k.cos()) / (k * k * k)
    }

    #[test]
    fn ball_amplitude_limits() {
        let g = SphereGrid::new(8).unwrap();
        let f = SourceSpec::ball_indicator();
        let a = free_amplitude(&f, c(1e-4, 0.0), &g).unwrap();
        for v in a.values() {
            assert!((v - 1.0 / 3.0).norm() < 1e-9);
        }
        let a = free_amplitude(&f, c(PI, 0.0), &g).unwrap();
        for v in a.values() {
            assert!((v - 1.0 / (PI * PI)).norm() < 1e-12);
        }
    }

    #[test]
    fn harmonic_and_quadrature_routes_agree() {
        let g = SphereGrid::new(10).unwrap();
        for (f, k) in [
            (SourceSpec::ball_indicator(), c(PI, 0.0)),
            (
                SourceSpec::new(RadialTable::new(vec![[0.0, 1.0], [0.5, 2.0], [1.0, 0.0]]).unwrap(), Some((2, -1))).unwrap(),
                c(2.0, 0.3),
            ),
        ] {
            let a = free_amplitude(&f, k, &g).unwrap();
            let b = free_amplitude_quadrature(&f, k, &g).unwrap();
            assert!(a.sub(&b).sup_norm() < 1e-10, "{}", a.sub(&b).sup_norm());
            assert!((a.values()[3] - ball_closed_form(k)).norm() > 0.0);
        }
        let a = free_amplitude(&SourceSpec::ball_indicator(), c(2.0, 0.7), &g).unwrap();
        assert!((a.values()[5] - ball_closed_form(c(2.0, 0.7))).norm() < 1e-12);
    }

    #[test]
    fn radial_source_is_direction_free() {
        let g = SphereGrid::new(12).unwrap();
        let f = SourceSpec::new(RadialTable::new(vec![[0.0, 0.0], [0.3, 1.0], [1.0, -0.5]]).unwrap(), None).unwrap();
        let a = free_amplitude(&f, c(3.0, 0.2), &g).unwrap();
        let v0 = a.values()[0];
        assert!(a.values().iter().all(|v| (v - v0).norm() < 1e-12));
    }

    #[test]
    fn modulated_source_has_degree_one_content() {
        let g = SphereGrid::new(10).unwrap();
        let f = SourceSpec::new(RadialTable::constant(0.0, 1.0, 1.0), Some((1, 0))).unwrap();
        let a = free_amplitude(&f, c(2.5, 0.0), &g).unwrap();
        let co = a.coeffs();
        for m in 0..=10usize {
            for l in -(m as i64)..=(m as i64) {
                let v = co.get(m, l).norm();
                if m == 1 && l == 0 {
                    assert!(v > 1e-3);
                } else {
                    assert!(v < 1e-12, "({m},{l}) {v}");
                }
            }
        }
    }

    #[test]
    fn source_errors() {
        assert!(SourceSpec::new(RadialTable::constant(0.0, 1.0, 0.0), None).is_err());
        assert!(SourceSpec::new(RadialTable::constant(0.0, 1.5, 1.0), None).is_err());
        let g = SphereGrid::new(4).unwrap();
        let e = free_amplitude(&SourceSpec::ball_indicator(), c(5.0, 0.0), &g);
        assert!(matches!(e, Err(LabError::Resolution { required: 7, available: 4 })));
    }

    #[test]
    fn empty_potential_gives_free_amplitude() {
        let g = SphereGrid::new(8).unwrap();
        let f = SourceSpec::ball_indicator();
        let k = c(1.0, 0.5);
        let r = born_solve(&f, &SparsePotential::empty(), k, &g, BornOptions::default(), &[([0.0, 0.0, 60.0], [0.0; 3])]).unwrap();
        let a0 = free_amplitude(&f, k, &g).unwrap();
        assert_eq!(r.amplitude.values(), a0.values());
        assert_eq!(r.samples[0].delta, c(0.0, 0.0));
    }

    fn kappa_closed_form(v: f64, r: f64, k: Complex64) -> Complex64 {
        let anti = |t: f64| (2.0 * I * k * t).exp() / ((2.0 * I * k) * (2.0 * I * k)) - t / (2.0 * I * k);
        (anti(r + 1.0) - anti(r)) * v
    }

    #[test]
    fn kappa_of_symmetric_shell() {
        let g = SphereGrid::new(8).unwrap();
        for (r, k) in [(10.0, c(1.0, 0.5)), (3.0, c(2.0, 0.1)), (40.0, c(0.5, 0.05))] {
            let layer = LayerSpec::constant_shell(0, r, 0.3).unwrap();
            let kf = kappa(&layer, k, &g).unwrap();
            let want = kappa_closed_form(0.3, r, k);
            for v in kf.values() {
                assert!((v - want).norm() < 1e-12 * (1.0 + want.norm()), "{v} vs {want}");
            }
        }
        let zero = LayerSpec::constant_shell(0, 5.0, 0.0).unwrap();
        assert_eq!(kappa(&zero, c(1.0, 0.5), &g).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn kappa_is_linear_for_angular_layers() {
        let g = SphereGrid::new(10).unwrap();
        let layer = LayerSpec::new(
            0,
            4.0,
            LayerProfile::Harmonic {
                terms: vec![
                    HarmonicTerm { degree: 0, order: 0, table: RadialTable::constant(4.0, 5.0, 0.2) },
                    HarmonicTerm {
                        degree: 2,
                        order: 1,
                        table: RadialTable::new(vec![[4.0, 0.0], [4.5, 1.0], [5.0, 0.3]]).unwrap(),
                    },
                ],
            },
        )
        .unwrap();
        let k = c(1.5, 0.4);
        let a = kappa(&layer, k, &g).unwrap();
        let b = kappa(&layer.scaled(-2.5), k, &g).unwrap();
        assert!(a.scale(c(-2.5, 0.0)).sub(&b).sup_norm() < 1e-14 * (1.0 + a.sup_norm()));
        assert!(a.values().iter().any(|v| (v - a.values()[0]).norm() > 1e-6));
    }

    #[test]
    fn first_born_order_is_kappa() {
        let g = SphereGrid::new(8).unwrap();
        let f = SourceSpec::ball_indicator();
        let k = c(1.0, 0.5);
        let v = 1e-3;
        let pot = SparsePotential::symmetric(&[10.0], &[v]).unwrap();
        let res = born_solve(&f, &pot, k, &g, BornOptions::default(), &[]).unwrap();
        let a0 = ball_closed_form(k);
        let want = a0 * (1.0 - kappa_closed_form(v, 10.0, k));
        for a in res.amplitude.values() {
            assert!((a - want).norm() <= 10.0 * v * v * a0.norm(), "{}", (a - want).norm());
        }
        let one = born_solve(&f, &pot, k, &g, BornOptions { order_cap: 1, tol: 0.0 }, &[]).unwrap();
        for a in one.amplitude.values() {
            assert!((a - want).norm() < 1e-13);
        }
        assert!(one.error_bar > 0.0 && one.error_bar < 10.0 * v);
    }

    /// Leading β of a radial layer by nested 1-D quadrature split at every kink.
    fn beta_leading_oracle(table: &RadialTable, k: Complex64) -> Complex64 {
        let kinks: Vec<f64> = table.points().iter().map(|p| p[0]).collect();
        let pieces = |extra: Option<f64>| {
            let mut b = kinks.clone();
            b.extend(extra);
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.windows(2).map(|w| (w[0], w[1])).filter(|(a, b)| b > a).collect::<Vec<_>>()
        };
        let psi = |r: f64| -> Complex64 {
            let mut s = Complex64::new(0.0, 0.0);
            for (a, b) in pieces(Some(r)) {
                let (xs, ws) = gauss_legendre_interval(30, a, b);
                for (&t, &w) in xs.iter().zip(&ws) {
                    let kern = (I * k * (r + t)).exp() - (I * k * (r - t).abs()).exp();
                    s += (I * k * t).exp() * kern * (w * table.eval(t));
                }
            }
            s / (2.0 * I * k * r)
        };
        let mut total = Complex64::new(0.0, 0.0);
        for (a, b) in pieces(None) {
            let (xs, ws) = gauss_legendre_interval(40, a, b);
            for (&r, &w) in xs.iter().zip(&ws) {
                let j0 = (k * r).sin() / (k * r);
                total += psi(r) * j0 * (w * r * r * table.eval(r));
            }
        }
        total
    }

    #[test]
    fn beta_small_coupling_limit() {
        let g = SphereGrid::new(6).unwrap();
        let k = c(1.0, 0.5);
        let r0 = 3.0;
        let table = RadialTable::new(vec![[3.0, 1.0], [3.4, 0.2], [4.0, 0.7]]).unwrap();
        let layer = LayerSpec::new(0, r0, LayerProfile::Radial { table: table.clone() }).unwrap();
        let oracle = beta_leading_oracle(&table, k);
        let mut ratios = Vec::new();
        for cc in [1e-2, 1e-3] {
            let (b, err) = beta(&layer.scaled(cc), k, &g, 6).unwrap();
            assert!(err < 1e-6 * cc * cc);
            let ratio = b.values()[0] / (cc * cc);
            assert!((ratio - oracle).norm() < 0.05 * oracle.norm(), "{ratio} vs {oracle}");
            ratios.push(ratio);
        }
        assert!((ratios[0] - ratios[1]).norm() < 0.1 * ratios[1].norm());
        let (b1, _) = beta(&layer.scaled(1e-3), k, &g, 1).unwrap();
        assert_relative_eq!(b1.values()[0].re, 1e-6 * oracle.re, max_relative = 1e-7);
        assert_relative_eq!(b1.values()[0].im, 1e-6 * oracle.im, max_relative = 1e-7);
        let zero = LayerSpec::constant_shell(0, 3.0, 0.0).unwrap();
        assert_eq!(beta(&zero, k, &g, 4).unwrap().0.sup_norm(), 0.0);
    }

    #[test]
    fn beta_series_is_summable_for_square_summable_layers() {
        let g = SphereGrid::new(4).unwrap();
        let k = c(1.0, 0.3);
        let mut partial = Vec::new();
        let mut s = 0.0;
        for n in 1..=24usize {
            let layer = LayerSpec::constant_shell(n, 4.0 * n as f64, 0.5 / n as f64).unwrap();
            s += beta(&layer, k, &g, 8).unwrap().0.sup_norm();
            partial.push(s);
        }
        let tail = partial[23] - partial[11];
        assert!(tail < 0.2 * partial[11], "{partial:?}");
        assert!(partial[23] - partial[17] < partial[17] - partial[11]);
    }

    #[test]
    fn green_samples_decay() {
        let g = SphereGrid::new(20).unwrap();
        let k = c(1.0, 0.5);
        let pot = SparsePotential::symmetric(&[10.0], &[0.5]).unwrap();
        let f = SourceSpec::ball_indicator();
        let radii = [50.0, 100.0, 200.0];
        let mut pairs = Vec::new();
        for &ry in &radii {
            for &rx in &radii {
                pairs.push(([0.0, 0.0, rx], [ry, 0.0, 0.0]));
            }
        }
        let res = born_solve(&f, &pot, k, &g, BornOptions::default(), &pairs).unwrap();
        let shape = |x: f64, y: f64| (-k.im * (x + y)).exp() / ((x - 11.0) * (y - 11.0));
        let mut fitted = Vec::new();
        for s in &res.samples {
            assert_eq!(s.value, s.free_part + s.delta);
            let (x, y) = (s.x[2], s.y[0]);
            fitted.push(s.delta.norm() / shape(x, y));
        }
        for row in res.samples.chunks(3) {
            assert!(row[0].delta.norm() > row[1].delta.norm() && row[1].delta.norm() > row[2].delta.norm());
        }
        let (lo, hi) = fitted.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(lo > 0.0 && hi / lo < 10.0, "{fitted:?}");
    }

    #[test]
    fn green_sample_matches_direct_route_inside() {
        // x inside the shell uses direct quadrature, outside the harmonic sum
        let g = SphereGrid::new(16).unwrap();
        let k = c(1.2, 0.6);
        let pot = SparsePotential::symmetric(&[4.0], &[0.4]).unwrap();
        let f = SourceSpec::ball_indicator();
        let y = [0.0, 0.0, 0.5];
        let res = born_solve(&f, &pot, k, &g, BornOptions::default(), &[([0.0, 0.0, 20.0], y), ([0.0, 0.0, 20.0], y)]).unwrap();
        assert_eq!(res.samples[0].delta, res.samples[1].delta);
        // reciprocity G(x,y) = G(y,x)
        let a = born_solve(&f, &pot, k, &g, BornOptions::default(), &[([0.0, 0.0, 20.0], [0.0, 0.0, 2.0])]).unwrap();
        let b = born_solve(&f, &pot, k, &g, BornOptions::default(), &[([0.0, 0.0, 2.0], [0.0, 0.0, 20.0])]).unwrap();
        let (da, db) = (a.samples[0].delta, b.samples[0].delta);
        assert!((da - db).norm() < 1e-8 * da.norm(), "{da} {db}");
    }

    #[test]
    fn remainder_vanishes_for_free_radial_source() {
        let g = SphereGrid::new(8).unwrap();
        let out = far_field_remainder(&SourceSpec::ball_indicator(), &SparsePotential::empty(), c(1.0, 0.5), &g, BornOptions::default(), &[5.0, 10.0]).unwrap();
        assert!(out.iter().all(|&(_, r)| r < 1e-12));
    }

    #[test]
    fn remainder_shape() {
        let g = SphereGrid::new(10).unwrap();
        let k = c(1.0, 0.2);
        let pot = SparsePotential::symmetric(&[5.0], &[0.3]).unwrap();
        let f = SourceSpec::new(RadialTable::constant(0.0, 1.0, 1.0), Some((2, 1))).unwrap();
        let radii = [20.0, 40.0, 80.0, 160.0];
        let out = far_field_remainder(&f, &pot, k, &g, BornOptions::default(), &radii).unwrap();
        assert!(out.windows(2).all(|w| w[1].1 < w[0].1));
        let fitted: Vec<f64> = out.iter().map(|&(r, rho)| rho * (r - 6.0)).collect();
        let (lo, hi) = fitted.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo < 2.0, "{fitted:?}");
        let e = far_field_remainder(&f, &pot, k, &g, BornOptions::default(), &[5.5]);
        assert!(matches!(e, Err(LabError::Precondition(_))));
    }

    #[test]
    fn born_preconditions_enforced() {
        let g = SphereGrid::new(6).unwrap();
        let f = SourceSpec::ball_indicator();
        let pot = SparsePotential::symmetric(&[10.0], &[0.1]).unwrap();
        assert!(born_solve(&f, &pot, c(1.0, 0.0), &g, BornOptions::default(), &[]).is_err());
        let four = SparsePotential::symmetric(&[2.0, 4.0, 6.0, 8.0], &[0.1; 4]).unwrap();
        assert!(born_solve(&f, &four, c(1.0, 0.5), &g, BornOptions::default(), &[]).is_err());
        let far = SparsePotential::symmetric(&[2000.0], &[0.1]).unwrap();
        assert!(born_solve(&f, &far, c(1.0, 0.5), &g, BornOptions::default(), &[]).is_err());
    }

    #[test]
    fn strong_coupling_reports_divergence() {
        let g = SphereGrid::new(6).unwrap();
        let f = SourceSpec::ball_indicator();
        let pot = SparsePotential::symmetric(&[2.0], &[-400.0]).unwrap();
        match born_solve(&f, &pot, c(1.0, 0.05), &g, BornOptions::default(), &[]) {
            Err(LabError::NonConvergence { contraction, .. }) => assert!(contraction > 1.0),
            other => panic!("expected divergence, got {:?}", other.map(|r| r.orders)),
        }
    }
}

//! The sphere operators `O_t`, layer transfer, the amplitude recursion
//! `A_{n+1} = A_n (1 - κ_n + β_n) + η_n` with WKB extraction, a priori
//! envelopes, the parametrix and the evolution equations `U₀`, `U`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::greens::{beta, free_amplitude, kappa, SourceSpec, RADIAL_NODES};
use crate::ode::{integrate_through, OdeOptions};
use crate::potential::{sparseness_flags, LayerSpec, SparsePotential};
use crate::quad::composite_gauss;
use crate::shell::minus_i_pow;
use crate::special::spherical_j_scaled;
use crate::sphere::{ShCoeffs, SphereGrid, SphericalField};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Above this `|k| t` the diagonal route is used by default.
pub const DIAGONAL_THRESHOLD: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtRoute {
    Quadrature,
    Diagonal,
    /// Quadrature up to `|k| t = 20`, diagonal beyond.
    Auto,
}

/// `λ_m(t) = t e^{ikt} (-i)^m j_m(kt)`, the eigenvalue of `O_t` on degree `m`.
pub fn o_t_eigenvalue(m: usize, t: f64, k: Complex64) -> Complex64 {
    t * minus_i_pow(m) * spherical_j_scaled(m, k * t)[m]
}

fn o_t_eigenvalues(degree: usize, t: f64, k: Complex64) -> Vec<Complex64> {
    let j = spherical_j_scaled(degree, k * t);
    (0..=degree).map(|m| t * minus_i_pow(m) * j[m]).collect()
}

/// `O_t f(θ) = (4π)⁻¹ t ∫ e^{ikt(1 - ⟨θ,s⟩)} f(s) ds`.
pub fn o_t_apply(f: &SphericalField, t: f64, k: Complex64, route: OtRoute) -> Result<SphericalField> {
    if !(t > 0.0) {
        return Err(LabError::InvalidArgument(format!("O_t needs t > 0, got {t}")));
    }
    let grid = f.grid();
    let kt = k.norm() * t;
    let route = match route {
        OtRoute::Auto if kt > DIAGONAL_THRESHOLD || grid.degree() < 2 + kt.ceil() as usize => OtRoute::Diagonal,
        OtRoute::Auto => OtRoute::Quadrature,
        r => r,
    };
    match route {
        OtRoute::Diagonal => {
            let lam = o_t_eigenvalues(grid.degree(), t, k);
            Ok(f.apply_degree_multiplier(|m| lam[m]))
        }
        _ => {
            let required = 2 + kt.ceil() as usize;
            if grid.degree() < required {
                return Err(LabError::Resolution { required, available: grid.degree() });
            }
            let src: Vec<([f64; 3], Complex64)> = grid
                .nodes()
                .iter()
                .zip(grid.weights())
                .zip(f.values())
                .map(|((d, &w), v)| (*d, v * w))
                .collect();
            Ok(SphericalField::from_fn(grid.clone(), |th| {
                let s: Complex64 = src
                    .iter()
                    .map(|(d, wv)| {
                        // 1 - ⟨θ,s⟩ = |θ - s|²/2
                        let q = (th[0] - d[0]).powi(2) + (th[1] - d[1]).powi(2) + (th[2] - d[2]).powi(2);
                        (I * k * (0.5 * t * q)).exp() * wv
                    })
                    .sum();
                s * (t / (4.0 * PI))
            }))
        }
    }
}

/// `|-2ik λ_m(t) - e^{m(m+1)/(2ikt)}|`.
pub fn parametrix_residual(m: usize, t: f64, k: Complex64) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(LabError::InvalidArgument(format!("parametrix residual needs t ≥ 1, got {t}")));
    }
    let mm = (m * (m + 1)) as f64;
    Ok((-2.0 * I * k * o_t_eigenvalue(m, t, k) - (mm / (2.0 * I * k * t)).exp()).norm())
}

fn q_field(grid: &Arc<SphereGrid>, layer: &LayerSpec, t: f64) -> SphericalField {
    SphericalField::from_fn(grid.clone(), |d| Complex64::new(layer.eval([t * d[0], t * d[1], t * d[2]]), 0.0))
}

/// `∫_R^{R+1} O_t q_t f dt` by Gauss–Legendre over the shell.
fn layer_integral(f: &SphericalField, layer: &LayerSpec, k: Complex64, route: OtRoute) -> Result<SphericalField> {
    let grid = f.grid();
    let (ts, ws) = composite_gauss(&layer.radial_breaks(), RADIAL_NODES);
    let mut acc = SphericalField::constant(grid.clone(), Complex64::new(0.0, 0.0));
    for (&t, &w) in ts.iter().zip(&ws) {
        let qf = q_field(grid, layer, t).mul(f);
        let o = o_t_apply(&qf, t, k, route)?;
        acc = acc.zip_with(&o, |a, b| a + b * w);
    }
    Ok(acc)
}

/// `[I - ∫_R^{R+1} O_t q_t dt] f`.
pub fn layer_transfer(f: &SphericalField, layer: &LayerSpec, k: Complex64, route: OtRoute) -> Result<SphericalField> {
    if !(k.im > 0.0) {
        return Err(LabError::Precondition(format!("layer transfer needs Im k > 0, got {k}")));
    }
    Ok(f.sub(&layer_integral(f, layer, k, route)?))
}

/// `g_n` and `g'_n` in log domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub log_g: f64,
    pub log_gprime: f64,
}

impl Envelope {
    pub fn g(&self) -> f64 {
        self.log_g.exp()
    }

    pub fn gprime(&self) -> f64 {
        self.log_gprime.exp()
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn ln0(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// A priori envelopes
/// `g_n = (‖A₀‖ + C‖v‖ε⁻⁹) e^{Cε⁻⁸‖v‖√n}` and
/// `g'_n = ‖∂A₀‖ + R ε⁻⁹‖v‖ + n R ‖v‖ ε⁻⁸ e^{Cε⁻⁸‖v‖√n}(‖A₀‖ + C‖v‖ε⁻⁹)`
/// with `R = R_{n+1}`.
pub fn apriori_envelope(n: usize, eps: f64, v_l2: f64, a0_sup: f64, a0_grad_sup: f64, r_next: f64, c: f64) -> Result<Envelope> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(LabError::InvalidArgument(format!("envelope needs ε in (0,1), got {eps}")));
    }
    if !(c > 0.0) {
        return Err(LabError::InvalidArgument(format!("envelope constant must be positive, got {c}")));
    }
    let le = eps.ln();
    let nf = n as f64;
    let growth = c * v_l2 * (-8.0 * le).exp() * nf.sqrt();
    let base = log_add(ln0(a0_sup), ln0(c * v_l2) - 9.0 * le);
    let log_g = base + growth;
    let lv = ln0(v_l2);
    let lr = ln0(r_next);
    let log_gprime = log_add(
        log_add(ln0(a0_grad_sup), lr - 9.0 * le + lv),
        ln0(nf) + lr + lv - 8.0 * le + log_g,
    );
    Ok(Envelope { log_g, log_gprime })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateOptions {
    /// Born order used inside β.
    pub born_order: usize,
    /// Constant `C` of the a priori envelopes.
    pub envelope_constant: f64,
    /// Constant in front of the η budget; not fixed by the analysis.
    pub eta_constant: f64,
    /// Exponent `d` in `ε^{-d}` of the η budget.
    pub eta_power: f64,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self { born_order: 12, envelope_constant: 1.0, eta_constant: 1.0, eta_power: 9.0 }
    }
}

/// State of the recursion after `n` layers.
#[derive(Debug, Clone)]
pub struct AmplitudeRecord {
    pub n: usize,
    pub a: SphericalField,
    pub wkb: SphericalField,
    pub reduced: SphericalField,
    /// `κ_n` of layer `n + 1` (zero after the last layer).
    pub kappa: SphericalField,
    pub beta: SphericalField,
    pub beta_error: f64,
    pub eta_bound: f64,
    pub log_eta_bound: f64,
    pub envelope: Envelope,
    pub envelope_ok: bool,
    pub nu: f64,
}

impl AmplitudeRecord {
    pub fn envelope_g(&self) -> f64 {
        self.envelope.g()
    }

    pub fn envelope_gprime(&self) -> f64 {
        self.envelope.gprime()
    }
}

/// Radius taken for `R_0`: the source ball.
pub const SOURCE_RADIUS: f64 = 1.0;

/// Runs the recursion from `A_0 = A⁰` through every layer of `pot`.
pub fn propagate_recursion(
    f: &SourceSpec,
    pot: &SparsePotential,
    k: Complex64,
    grid: &Arc<SphereGrid>,
    opts: PropagateOptions,
) -> Result<Vec<AmplitudeRecord>> {
    if !(k.im > 0.0) {
        return Err(LabError::Precondition(format!("recursion needs Im k > 0, got {k}")));
    }
    let eps = k.im;
    let a0 = free_amplitude(f, k, grid)?;
    let a0_sup = a0.sup_norm();
    let a0_grad = a0.coeffs().gradient_sup_bound();
    let v_l2 = pot.l2_norm();
    let zero = SphericalField::constant(grid.clone(), Complex64::new(0.0, 0.0));
    let layers = pot.layers();
    let mut records = Vec::with_capacity(layers.len() + 1);
    let mut a = a0.clone();
    let mut log_wkb = zero.clone();
    for n in 0..=layers.len() {
        let wkb = log_wkb.map(|e| (-e).exp());
        let reduced = a.zip_with(&wkb, |x, w| x / w);
        let nu = reduced.sub(&a0).sup_norm();
        let r_n = if n == 0 { SOURCE_RADIUS } else { layers[n - 1].inner_radius() };
        let r_next = layers.get(n).map(|l| l.inner_radius()).unwrap_or(f64::INFINITY);
        let env_r = if r_next.is_finite() { r_next } else { r_n };
        let envelope = apriori_envelope(n, eps.min(1.0 - 1e-12), v_l2, a0_sup, a0_grad, env_r, opts.envelope_constant)?;
        // at n = 0 the envelope is sup|A⁰| itself, so allow for rounding
        let envelope_ok = a.sup_norm().ln() <= envelope.log_g + 1e-12;
        let (kap, bet, beta_error, log_eta) = match layers.get(n) {
            Some(layer) => {
                let kap = kappa(layer, k, grid)?;
                let (bet, err) = beta(layer, k, grid, opts.born_order)?;
                let log_eta = eta_log_budget(n, eps, layer.bound(), r_n, r_next, envelope, opts);
                (kap, bet, err, log_eta)
            }
            None => (zero.clone(), zero.clone(), 0.0, f64::NEG_INFINITY),
        };
        let next = a.zip_with(&kap.zip_with(&bet, |kk, b| 1.0 - kk + b), |x, m| x * m);
        let next_log_wkb = log_wkb.zip_with(&kap, |x, kk| x + kk);
        records.push(AmplitudeRecord {
            n,
            a,
            wkb,
            reduced,
            kappa: kap,
            beta: bet,
            beta_error,
            eta_bound: log_eta.exp(),
            log_eta_bound: log_eta,
            envelope,
            envelope_ok,
            nu,
        });
        a = next;
        log_wkb = next_log_wkb;
    }
    Ok(records)
}

/// `ln` of `C ε^{-d} v_{n+1} {g'_n R_{n+1}^{-1/2} + σ_n + R_n³ g_n e^{2ε(R_n - R_{n+1})}}`.
fn eta_log_budget(n: usize, eps: f64, v_next: f64, r_n: f64, r_next: f64, env: Envelope, opts: PropagateOptions) -> f64 {
    let (lr, lrn) = (r_n.ln(), r_next.ln());
    let log_sigma = sparseness_flags(n, lr, lrn, 2.0).log_sigma;
    let t1 = env.log_gprime - 0.5 * lrn;
    let t3 = 3.0 * lr + env.log_g + 2.0 * eps * (r_n - r_next);
    let inner = log_add(log_add(t1, log_sigma), t3);
    ln0(opts.eta_constant) - opts.eta_power * eps.ln() + ln0(v_next) + inner
}

/// How the evolution couples angular modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionMode {
    /// Symmetric layers only: every coefficient evolves on its own.
    Diagonal,
    /// Multiplication by `V(tθ)` on the grid, coupling all coefficients.
    Grid,
}

/// `U₀(τ, t_end, k) f = exp[m(m+1)(1/τ - 1/t_end)/(2ik)]` per degree.
pub fn evolution_free_closed_form(f: &SphericalField, k: Complex64, tau: f64, t_end: Option<f64>) -> SphericalField {
    let span = 1.0 / tau - t_end.map(|t| 1.0 / t).unwrap_or(0.0);
    f.apply_degree_multiplier(|m| ((m * (m + 1)) as f64 * span / (2.0 * I * k)).exp())
}

/// `U(τ, t_end, k) f` for `dU/dt = -(2ik)⁻¹[B/t² - V(t)] U`, integrated in
/// `s = 1/t` so that `t_end = ∞` (`None`) is a finite endpoint.
pub fn evolution_solve(
    f: &SphericalField,
    pot: &SparsePotential,
    k: Complex64,
    tau: f64,
    t_end: Option<f64>,
    mode: EvolutionMode,
    opts: OdeOptions,
) -> Result<SphericalField> {
    if !(tau >= 1.0) {
        return Err(LabError::InvalidArgument(format!("evolution needs τ ≥ 1, got {tau}")));
    }
    if let Some(te) = t_end {
        if !(te >= tau) {
            return Err(LabError::InvalidArgument(format!("t_end {te} precedes τ {tau}")));
        }
    }
    if k.norm() == 0.0 {
        return Err(LabError::InvalidArgument("evolution needs k ≠ 0".into()));
    }
    if mode == EvolutionMode::Diagonal && !pot.is_symmetric() {
        return Err(LabError::Precondition("diagonal evolution needs symmetric layers".into()));
    }
    let grid = f.grid().clone();
    let degree = grid.degree();
    let t_hi = t_end.unwrap_or(f64::INFINITY);
    // t-breakpoints: every profile break inside (τ, t_end)
    let mut breaks: Vec<f64> = pot.layers().iter().flat_map(|l| l.radial_breaks()).filter(|&t| t > tau && t < t_hi).collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut s_stops: Vec<f64> = breaks.iter().map(|t| 1.0 / t).collect();
    s_stops.push(if t_hi.is_finite() { 1.0 / t_hi } else { 0.0 });
    let mm: Vec<f64> = (0..=degree)
        .flat_map(|m| std::iter::repeat((m * (m + 1)) as f64).take(2 * m + 1))
        .collect();
    let pre = -1.0 / (2.0 * I * k);
    let mut y = f.coeffs().as_slice().to_vec();
    let mut s0 = 1.0 / tau;
    for &s1 in &s_stops {
        // evaluate V strictly inside the current segment
        let (lo, hi) = (s1.min(s0), s1.max(s0));
        let clamp_t = |s: f64| {
            let span = hi - lo;
            1.0 / s.clamp(lo + 1e-12 * span, hi - 1e-12 * span)
        };
        let rhs = |s: f64, c: &[Complex64], out: &mut [Complex64]| {
            let t = clamp_t(s);
            match mode {
                EvolutionMode::Diagonal => {
                    let v = pot.radial_value(t).unwrap_or(0.0) * t * t;
                    for i in 0..c.len() {
                        out[i] = pre * (mm[i] + v) * c[i];
                    }
                }
                EvolutionMode::Grid => {
                    let coeffs = ShCoeffs::from_vec(degree, c.to_vec()).expect("state length");
                    let vals = grid.synthesize(&coeffs).expect("degree within grid");
                    let prod: Vec<Complex64> = grid
                        .nodes()
                        .iter()
                        .zip(&vals)
                        .map(|(d, u)| u * pot.evaluate([t * d[0], t * d[1], t * d[2]]))
                        .collect();
                    let vc = grid.analyze(&prod);
                    for i in 0..c.len() {
                        out[i] = pre * (mm[i] * c[i] + vc.as_slice()[i] * (t * t));
                    }
                }
            }
        };
        y = integrate_through(rhs, s0, &y, &[s1], opts)?.pop().expect("one stop");
        s0 = s1;
    }
    SphericalField::from_coeffs(grid, &ShCoeffs::from_vec(degree, y)?)
}

/// Sup-norm gap between `-∫O_t q_t dt f` and the `V`-linear Duhamel term
/// of `U` across the same shell.
pub fn duhamel_linear_check(layer: &LayerSpec, k: Complex64, f: &SphericalField) -> Result<f64> {
    let transfer_term = layer_integral(f, layer, k, OtRoute::Auto)?.map(|v| -v);
    let grid = f.grid();
    let (a, b) = (layer.inner_radius(), layer.outer_radius());
    let (ts, ws) = composite_gauss(&layer.radial_breaks(), RADIAL_NODES);
    let mut duhamel = SphericalField::constant(grid.clone(), Complex64::new(0.0, 0.0));
    for (&t, &w) in ts.iter().zip(&ws) {
        let inner = evolution_free_closed_form(f, k, a, Some(t));
        let hit = q_field(grid, layer, t).mul(&inner);
        let outer = evolution_free_closed_form(&hit, k, t, Some(b));
        duhamel = duhamel.zip_with(&outer, |x, y| x + y * (w / (2.0 * I * k)));
    }
    Ok(transfer_term.sub(&duhamel).sup_norm())
}

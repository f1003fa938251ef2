//! Radial channels of `-Δ + V` for symmetric shells: outgoing solutions at
//! complex `k` (the symmetric amplitude oracle), the Prüfer lower bound
//! across potential-free gaps, and the contradiction engine that rules out
//! positive eigenvalues under super-exponential sparseness.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::greens::{SourceSpec, RADIAL_NODES};
use crate::ode::{integrate_through, OdeOptions};
use crate::potential::SparsePotential;
use crate::quad::composite_gauss;
use crate::special::spherical_h1_scaled;
use crate::tower::{SignedTower, Tower};

const I: Complex64 = Complex64::new(0.0, 1.0);

pub const MAX_CHANNEL: usize = 64;

/// Outgoing channel solution, stored in scaled form `w = e^{-ikr} u`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialSolution {
    pub m: usize,
    pub k: Complex64,
    /// Increasing radii.
    pub r: Vec<f64>,
    pub w: Vec<Complex64>,
    pub w_prime: Vec<Complex64>,
    pub outgoing: bool,
    /// Smallest radius reached before the solution left the safe range.
    pub smallest_reliable_r: f64,
}

impl RadialSolution {
    pub fn u(&self, i: usize) -> Complex64 {
        (I * self.k * self.r[i]).exp() * self.w[i]
    }

    pub fn u_prime(&self, i: usize) -> Complex64 {
        (I * self.k * self.r[i]).exp() * (self.w_prime[i] + I * self.k * self.w[i])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RadialOptions {
    pub r_min: f64,
    /// Output spacing in `r`.
    pub spacing: f64,
    pub ode: OdeOptions,
}

impl Default for RadialOptions {
    fn default() -> Self {
        Self {
            r_min: 1e-2,
            spacing: 0.25,
            ode: OdeOptions { rtol: 1e-11, atol: 1e-300, ..OdeOptions::default() },
        }
    }
}

/// `w = i^{m+1} z ĥ_m(z)` and `dw/dr` at `r`, `z = kr`.
fn outgoing_tail(m: usize, k: Complex64, r: f64) -> (Complex64, Complex64) {
    let z = k * r;
    let h = spherical_h1_scaled(m + 1, z);
    // ĥ_m' = -i ĥ_m + ĥ_{m-1} - (m+1)/z ĥ_m, with ĥ_0' = -i ĥ_0 - ĥ_1
    let dh = if m == 0 { -I * h[0] - h[1] } else { -I * h[m] + h[m - 1] - (m as f64 + 1.0) / z * h[m] };
    let phase = I.powu(m as u32 + 1);
    (phase * z * h[m], phase * k * (h[m] + z * dh))
}

/// Integrate the scaled channel equation `w'' = -2ik w' + [m(m+1)/r² + V] w`
/// from `(r0, w0, w0')` through `stops`, splitting at every profile break.
fn integrate_scaled(
    pot: &SparsePotential,
    m: usize,
    k: Complex64,
    r0: f64,
    y0: [Complex64; 2],
    stops: &[f64],
    opts: OdeOptions,
) -> Result<(Vec<[Complex64; 2]>, f64)> {
    let mm = (m * (m + 1)) as f64;
    let mut breaks: Vec<f64> = pot.layers().iter().flat_map(|l| l.radial_breaks()).collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = Vec::with_capacity(stops.len());
    let mut y = vec![y0[0], y0[1]];
    let mut r = r0;
    let mut reached = r0;
    for &stop in stops {
        let mut cuts: Vec<f64> = breaks.iter().cloned().filter(|&b| (b - r) * (stop - b) > 0.0).collect();
        if stop < r {
            cuts.reverse();
        }
        cuts.push(stop);
        for &c in &cuts {
            let (lo, hi) = (r.min(c), r.max(c));
            let span = hi - lo;
            let rhs = |x: f64, s: &[Complex64], d: &mut [Complex64]| {
                let xc = x.clamp(lo + 1e-12 * span, hi - 1e-12 * span);
                let v = pot.radial_value(xc).unwrap_or(0.0);
                d[0] = s[1];
                d[1] = -2.0 * I * k * s[1] + (mm / (x * x) + v) * s[0];
            };
            y = integrate_through(rhs, r, &y, &[c], opts)?.pop().expect("one stop");
            r = c;
        }
        if !(y[0].norm() < 1e250) || !y[0].re.is_finite() {
            return Ok((out, reached));
        }
        reached = stop;
        out.push([y[0], y[1]]);
    }
    Ok((out, reached))
}

fn check_symmetric(pot: &SparsePotential) -> Result<()> {
    if !pot.is_symmetric() {
        return Err(LabError::Precondition("radial channels need symmetric layers".into()));
    }
    Ok(())
}

/// Outgoing solution of `-u'' + [m(m+1)/r² + V - k²] u = 0`, equal to
/// `i^{m+1} kr h_m(kr)` beyond the last shell, integrated inward.
pub fn solve_radial(pot: &SparsePotential, m: usize, k: Complex64, r_max: f64, opts: RadialOptions) -> Result<RadialSolution> {
    check_symmetric(pot)?;
    if m > MAX_CHANNEL {
        return Err(LabError::InvalidArgument(format!("channel {m} exceeds {MAX_CHANNEL}")));
    }
    if k.im < 0.0 || k.norm() == 0.0 {
        return Err(LabError::Precondition(format!("need Im k ≥ 0 and k ≠ 0, got {k}")));
    }
    let outer = pot.layers().last().map(|l| l.outer_radius()).unwrap_or(0.0);
    if r_max < outer + 10.0 {
        return Err(LabError::Precondition(format!("r_max {r_max} must exceed the last shell by 10 (≥ {})", outer + 10.0)));
    }
    if !(opts.r_min > 0.0 && opts.r_min < r_max) {
        return Err(LabError::InvalidArgument("need 0 < r_min < r_max".into()));
    }
    let count = ((r_max - opts.r_min) / opts.spacing).ceil() as usize;
    let mut stops: Vec<f64> = (1..=count).map(|i| (r_max - i as f64 * opts.spacing).max(opts.r_min)).collect();
    stops.dedup();
    let (w0, wp0) = outgoing_tail(m, k, r_max);
    let (vals, reached) = integrate_scaled(pot, m, k, r_max, [w0, wp0], &stops, opts.ode)?;
    let mut r = vec![r_max];
    let mut w = vec![w0];
    let mut wp = vec![wp0];
    for (s, v) in stops.iter().zip(&vals) {
        r.push(*s);
        w.push(v[0]);
        wp.push(v[1]);
    }
    r.reverse();
    w.reverse();
    wp.reverse();
    Ok(RadialSolution { m, k, r, w, w_prime: wp, outgoing: true, smallest_reliable_r: reached })
}

/// Scaled Wronskian `w₁ w₂' - w₁' w₂`; the true Wronskian is `e^{2ikr}` times it.
pub fn scaled_wronskian(a: [Complex64; 2], b: [Complex64; 2]) -> Complex64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Solution from arbitrary scaled data at `r0`, sampled at `stops`.
pub fn solve_radial_from(
    pot: &SparsePotential,
    m: usize,
    k: Complex64,
    r0: f64,
    data: [Complex64; 2],
    stops: &[f64],
    opts: OdeOptions,
) -> Result<Vec<[Complex64; 2]>> {
    check_symmetric(pot)?;
    Ok(integrate_scaled(pot, m, k, r0, data, stops, opts)?.0)
}

/// Far-field coefficient `A` of `u ~ e^{ikr} r⁻¹ A` for a radial source, by
/// variation of parameters in the `m = 0` channel.
pub fn radial_amplitude_oracle(f: &SourceSpec, pot: &SparsePotential, k: Complex64) -> Result<Complex64> {
    check_symmetric(pot)?;
    if f.modulation.is_some() {
        return Err(LabError::Precondition("radial oracle needs an unmodulated source".into()));
    }
    if !(k.im > 0.0 || (k.im == 0.0 && k.re > 0.0)) {
        return Err(LabError::Precondition(format!("radial oracle needs Im k > 0 or real k > 0, got {k}")));
    }
    f.validate()?;
    if let Some(l) = pot.layers().first() {
        if l.inner_radius() < 1.0 {
            return Err(LabError::Precondition("shells must lie outside the source ball".into()));
        }
    }
    // outgoing ψ at r = 1, scaled
    let (w, wp) = if pot.is_empty() {
        (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    } else {
        let r_max = pot.layers().last().unwrap().outer_radius() + 10.0;
        let (w0, wp0) = outgoing_tail(0, k, r_max);
        let opts = RadialOptions::default().ode;
        let v = solve_radial_from(pot, 0, k, r_max, [w0, wp0], &[1.0], opts)?;
        (v[0][0], v[0][1])
    };
    let phi = k.sin() / k;
    let dphi = k.cos();
    let wronskian = (I * k).exp() * (phi * (wp + I * k * w) - dphi * w);
    let mut br: Vec<f64> = f.profile.points().iter().map(|p| p[0].clamp(0.0, 1.0)).collect();
    br.extend([0.0, 1.0]);
    br.sort_by(|a, b| a.partial_cmp(b).unwrap());
    br.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let (rs, ws) = composite_gauss(&br, RADIAL_NODES);
    let moment: Complex64 = rs.iter().zip(&ws).map(|(&s, &wt)| (k * s).sin() / k * (wt * s * f.profile.eval(s))).sum();
    Ok(-moment / wronskian)
}

/// Which constant the Prüfer factor uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruferConstant {
    /// `exp[-(2√E)⁻¹ m(m+1)(r - r_n)/(r r_n)]`.
    Displayed,
    /// `exp[-(√E)⁻¹ m(m+1)(r - r_n)/(r r_n)]`, which follows from
    /// `(ln Q)' = m(m+1) sin 2θ /(r² √E)` for `Q = f² + f'²/E`.
    Sharp,
}

impl PruferConstant {
    fn denominator(self, energy: f64) -> f64 {
        match self {
            PruferConstant::Displayed => 2.0 * energy.sqrt(),
            PruferConstant::Sharp => energy.sqrt(),
        }
    }
}

fn prufer_bound(m: usize, energy: f64, r_n: f64, r: f64, f: f64, fp: f64, c: PruferConstant) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(LabError::InvalidArgument(format!("energy must be positive, got {energy}")));
    }
    if !(r_n > 0.0 && r >= r_n) {
        return Err(LabError::InvalidArgument("need 0 < r_n ≤ r".into()));
    }
    let mm = (m * (m + 1)) as f64;
    let q0 = f * f + fp * fp / energy;
    Ok(q0 * (-mm * (r - r_n) / (c.denominator(energy) * r * r_n)).exp())
}

/// Lower bound on `f(r)² + f'(r)²/E` across a potential-free gap, with the
/// factor `exp[-(2√E)⁻¹ m(m+1)(r - r_n)/(r r_n)]`.
pub fn prufer_gap_bound(m: usize, energy: f64, r_n: f64, r: f64, f: f64, fp: f64) -> Result<f64> {
    prufer_bound(m, energy, r_n, r, f, fp, PruferConstant::Displayed)
}

/// The same bound with the constant `1/√E`.
pub fn prufer_gap_bound_sharp(m: usize, energy: f64, r_n: f64, r: f64, f: f64, fp: f64) -> Result<f64> {
    prufer_bound(m, energy, r_n, r, f, fp, PruferConstant::Sharp)
}

/// Integrate `-f'' + m(m+1) r⁻² f = E f` from `r0` to `r1`; returns `(f, f')`.
pub fn free_channel_transfer(m: usize, energy: f64, r0: f64, r1: f64, f: f64, fp: f64, opts: OdeOptions) -> Result<(f64, f64)> {
    if !(r0 > 0.0 && r1 > 0.0) {
        return Err(LabError::InvalidArgument("radii must be positive".into()));
    }
    let mm = (m * (m + 1)) as f64;
    let y = crate::ode::integrate(
        |r, s, d| {
            d[0] = s[1];
            d[1] = (mm / (r * r) - energy) * s[0];
        },
        r0,
        r1,
        &[Complex64::new(f, 0.0), Complex64::new(fp, 0.0)],
        opts,
    )?;
    Ok((y[0].re, y[1].re))
}

/// Smallest integer `k_n` with `R² / k_n < R e^{-γ R^{4/3} ln R}`, when it fits in `u64`.
pub fn cutoff_channel(r_n: f64, gamma: f64) -> Option<u64> {
    let x = (gamma * r_n.powf(4.0 / 3.0) * r_n.ln()).exp() * r_n;
    if x.is_finite() && x < 9.0e15 {
        Some(x.floor() as u64 + 1)
    } else {
        None
    }
}

/// `ln k_n` for any `ln R_n`.
pub fn log_cutoff_channel(log_r: &Tower, gamma: f64) -> Tower {
    // ln k_n = ln R + γ R^{4/3} ln R (+ rounding, negligible once large)
    if log_r.level() == 0 {
        if let Some(k) = cutoff_channel(log_r.top().exp(), gamma) {
            return Tower::new((k as f64).ln());
        }
    }
    log_r.add(&gamma_term(log_r, gamma))
}

/// `γ R^{4/3} ln R` from `ln R`.
fn gamma_term(log_r: &Tower, gamma: f64) -> Tower {
    if log_r.level() == 0 {
        let l = log_r.top();
        return Tower::from_ln(gamma.ln() + 4.0 / 3.0 * l + l.ln());
    }
    log_r.mul(4.0 / 3.0).add(&log_r.ln()).add_f64(gamma.ln()).exp()
}

/// Values of the channel expansion at a probe radius.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelData {
    pub energy: f64,
    pub probe_radius: f64,
    /// `(m, l, f, f')`.
    pub values: Vec<(usize, i64, f64, f64)>,
    /// `p_m = Σ_{j ≥ m} Σ_l f_{j,l}²`.
    pub tail_sums: Vec<f64>,
}

impl ChannelData {
    pub fn new(energy: f64, probe_radius: f64, values: Vec<(usize, i64, f64, f64)>) -> Self {
        let top = values.iter().map(|v| v.0).max().unwrap_or(0);
        let mut per = vec![0.0; top + 1];
        for &(m, _, f, _) in &values {
            per[m] += f * f;
        }
        let mut tail_sums = vec![0.0; top + 2];
        for m in (0..=top).rev() {
            tail_sums[m] = tail_sums[m + 1] + per[m];
        }
        tail_sums.pop();
        Self { energy, probe_radius, values, tail_sums }
    }

    /// `Σ_{m ≤ cut} Σ_l f²`.
    pub fn head_sum(&self, cut: usize) -> f64 {
        self.tail_sums[0] - self.tail_sums.get(cut + 1).copied().unwrap_or(0.0)
    }
}

/// One gap of the contradiction chain.
#[derive(Debug, Clone, Serialize)]
pub struct GapGrowthCertificate {
    pub n: usize,
    pub energy: f64,
    pub gamma: f64,
    /// `ln R_n`; the probe radius lies in `[R_n + 1, R_n + 2]`.
    pub log_gap_start: Tower,
    /// `ln R_{n+1}`.
    pub log_gap_end: Tower,
    /// `ln k_n`, the last channel kept.
    pub log_cutoff: Tower,
    /// `X` with Prüfer factor `e^{-X}` for channel `k_n` across the gap.
    pub factor_exponent: Tower,
    /// `ln ln` of the shortest gap length that still forces growth.
    pub loglog_min_gap: Tower,
    /// `ln ln P - ln ln N`: positive when the gap beats the losses.
    pub margin: SignedTower,
    pub contradiction: bool,
}

/// Radii `ln ln R_{n+1} = ln c + β ln R_n`, i.e. `R_{n+1} = exp(exp(c R_n^β))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSchedule {
    /// `ln R_0`.
    pub log_r0: f64,
    pub beta: f64,
    /// `c ≥ 1`; `c > 1` makes the schedule inequality strict.
    pub factor: f64,
    /// Number of gaps examined.
    pub count: usize,
}

impl EigenSchedule {
    /// `ln R_n` for `n = 0..=count`.
    pub fn log_radii(&self) -> Vec<Tower> {
        let mut out = vec![Tower::new(self.log_r0)];
        for _ in 0..self.count {
            let l = *out.last().unwrap();
            // ln R_{n+1} = exp(c R_n^β) = exp(exp(ln c + β ln R_n))
            let inner = if l.level() == 0 { Tower::new(self.factor.ln() + self.beta * l.top()) } else { l.mul(self.beta).add_f64(self.factor.ln()) };
            out.push(inner.exp());
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    pub constant: PruferConstant,
    pub certificates: Vec<GapGrowthCertificate>,
    /// Every margin positive and strictly increasing along `n`.
    pub verdict: bool,
}

/// Double-log margin, cutoff, Prüfer exponent and threshold for one gap,
/// evaluated from `ln R_n` and the schedule so no decisive digit is lost.
fn gap_margin(log_r: &Tower, sched: &EigenSchedule, energy: f64, gamma: f64, c: PruferConstant) -> (SignedTower, Tower, Tower, Tower) {
    let ln_ce = c.denominator(energy).ln();
    let log_k = log_cutoff_channel(log_r, gamma);
    let g = gamma_term(log_r, gamma);
    if log_r.level() == 0 && g.level() == 0 && g.top() < 1e15 {
        let l1 = log_r.top();
        let gf = g.top();
        // ln T = 2 ln(k+1) - ln(R+2) - ln c_E
        let lk = log_k.to_f64();
        let ln_t = 2.0 * (lk + (-lk).exp().ln_1p()) - (l1 + (2.0 * (-l1).exp()).ln_1p()) - ln_ce;
        // ln N = ln(G + T)
        let (hi, lo) = if ln_t > gf.ln() { (ln_t, gf.ln()) } else { (gf.ln(), ln_t) };
        let ln_n = hi + (lo - hi).exp().ln_1p();
        let ln_rr = l1 + l1.exp_m1().ln();
        // P = ln(R_{n+1} - R_n - 2) + ln(R² - R), ln R_{n+1} = e^a
        let a = (sched.factor.ln() + sched.beta * l1).exp();
        let loglog_p = if a < 600.0 { (a.exp() + ln_rr).ln().ln() } else { a.ln() };
        let diff = loglog_p - ln_n.ln();
        let margin = if diff >= 0.0 { SignedTower::positive(Tower::new(diff)) } else { SignedTower { negative: true, magnitude: Tower::new(-diff) } };
        // ln(N - ln(R² - R))
        let ln_excess = ln_n + (-ln_rr * (-ln_n).exp()).ln_1p();
        let threshold = Tower::new(if ln_excess.is_finite() { ln_excess.max(0.0) } else { 0.0 });
        return (margin, log_k, Tower::from_ln(ln_t), threshold);
    }
    // ln ln P = ln c + β L1, ln ln N = ln 2γ + (4/3) L1 + ln L1 + o(1), so
    // the margin is (β - 4/3) L1 - ln L1 - ln(2γ/c) up to vanishing terms
    let l1 = *log_r;
    let lead = l1.mul(sched.beta - 4.0 / 3.0);
    let loss = l1.ln().add_f64((2.0 * gamma / sched.factor).ln().max(0.0));
    let margin = SignedTower::difference(&lead, &loss);
    // ln N ≈ ln T ≈ L1 + 2G - ln c_E
    let ln_t = l1.add(&g.mul(2.0));
    (margin, log_k, ln_t.exp(), ln_t)
}

/// Contradiction chain per gap for the schedule, at energy `E` and decay constant `γ`.
pub fn eigenvalue_absence_check(sched: &EigenSchedule, energy: f64, gamma: f64, constant: PruferConstant) -> Result<EigenReport> {
    if !(energy > 0.0) {
        return Err(LabError::InvalidArgument(format!("energy must be positive, got {energy}")));
    }
    if !(gamma > 0.0) {
        return Err(LabError::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if !(sched.beta > 4.0 / 3.0) {
        return Err(LabError::InvalidArgument(format!("schedule exponent must exceed 4/3, got {}", sched.beta)));
    }
    if !(sched.factor >= 1.0) || !(sched.log_r0 > 1.0) {
        return Err(LabError::InvalidArgument("schedule needs factor ≥ 1 and ln R_0 > 1".into()));
    }
    let logs = sched.log_radii();
    let certificates: Vec<GapGrowthCertificate> = (0..sched.count)
        .map(|n| {
            let (margin, log_cutoff, factor_exponent, loglog_min_gap) = gap_margin(&logs[n], sched, energy, gamma, constant);
            GapGrowthCertificate {
                n,
                energy,
                gamma,
                log_gap_start: logs[n],
                log_gap_end: logs[n + 1],
                log_cutoff,
                factor_exponent,
                loglog_min_gap,
                contradiction: margin.is_positive(),
                margin,
            }
        })
        .collect();
    let verdict = certificates.iter().all(|c| c.contradiction)
        && certificates.windows(2).all(|w| w[0].margin.less_than(&w[1].margin));
    Ok(EigenReport { constant, certificates, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::{born_solve, BornOptions};
    use crate::potential::RadialTable;
    use crate::sphere::SphereGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn free_channels_match_closed_forms() {
        let pot = SparsePotential::empty();
        let k = c(1.3, 0.2);
        let opts = RadialOptions { r_min: 0.5, ..RadialOptions::default() };
        let s0 = solve_radial(&pot, 0, k, 20.0, opts).unwrap();
        for w in &s0.w {
            assert!((w - 1.0).norm() < 1e-9, "{w}");
        }
        let s1 = solve_radial(&pot, 1, k, 20.0, opts).unwrap();
        for (r, w) in s1.r.iter().zip(&s1.w) {
            let exact = 1.0 + I / (k * *r);
            assert!((w - exact).norm() < 1e-8 * exact.norm(), "r={r}");
        }
        assert_eq!(s1.smallest_reliable_r, 0.5);
    }

    #[test]
    fn wronskian_is_constant_across_shells() {
        let pot = SparsePotential::symmetric(&[2.0, 5.0], &[0.7, -0.4]).unwrap();
        let k = c(1.1, 0.3);
        let stops = [7.0, 5.5, 4.0, 2.5, 1.5];
        let (w0, wp0) = outgoing_tail(0, k, 8.0);
        let a = solve_radial_from(&pot, 0, k, 8.0, [w0, wp0], &stops, OdeOptions::default()).unwrap();
        let b = solve_radial_from(&pot, 0, k, 8.0, [c(0.3, 1.0), c(-1.0, 0.2)], &stops, OdeOptions::default()).unwrap();
        let w = |i: usize| (2.0 * I * k * stops[i]).exp() * scaled_wronskian(a[i], b[i]);
        for i in 1..stops.len() {
            assert!((w(i) - w(0)).norm() < 1e-8 * w(0).norm());
        }
    }

    #[test]
    fn free_oracle_matches_ball_amplitude() {
        let f = SourceSpec::ball_indicator();
        for k in [c(1.0, 0.5), c(3.0, 0.1), c(0.2, 2.0)] {
            let a = radial_amplitude_oracle(&f, &SparsePotential::empty(), k).unwrap();
            let exact = (k.sin() - k * k.cos()) / (k * k * k);
            assert!((a - exact).norm() < 1e-12 * exact.norm(), "{k}");
        }
    }

    #[test]
    fn oracle_agrees_with_born_series() {
        let f = SourceSpec::new(RadialTable::new(vec![[0.0, 1.0], [0.6, 1.0], [1.0, 0.2]]).unwrap(), None).unwrap();
        let pot = SparsePotential::new(vec![
            crate::potential::LayerSpec::new(
                0,
                2.0,
                crate::potential::LayerProfile::Radial { table: RadialTable::new(vec![[2.0, 0.0], [2.4, 0.6], [3.0, 0.1]]).unwrap() },
            )
            .unwrap(),
            crate::potential::LayerSpec::constant_shell(1, 6.0, -0.3).unwrap(),
        ])
        .unwrap();
        let g = SphereGrid::new(6).unwrap();
        for k in [c(1.0, 0.4), c(2.0, 0.2)] {
            let oracle = radial_amplitude_oracle(&f, &pot, k).unwrap();
            let born = born_solve(&f, &pot, k, &g, BornOptions::default(), &[]).unwrap();
            for v in born.amplitude.values() {
                assert!((v - oracle).norm() < 1e-8 * oracle.norm(), "{k}: {v} vs {oracle}");
            }
        }
    }

    #[test]
    fn oracle_preconditions() {
        let f = SourceSpec::ball_indicator();
        let pot = SparsePotential::symmetric(&[3.0], &[0.5]).unwrap();
        assert!(radial_amplitude_oracle(&f, &pot, c(-1.0, 0.0)).is_err());
        assert!(radial_amplitude_oracle(&f, &pot, c(1.0, -0.1)).is_err());
        let inner = SparsePotential::symmetric(&[0.5], &[0.5]).unwrap();
        assert!(radial_amplitude_oracle(&f, &inner, c(1.0, 0.3)).is_err());
        assert!(solve_radial(&pot, 0, c(1.0, 0.1), 5.0, RadialOptions::default()).is_err());
    }

    /// Smallest ratio `Q(r) / Q(r_n)·e^{+X}` seen over sampled initial phases.
    fn worst_ratio(m: usize, energy: f64, r_n: f64, r: f64, c: PruferConstant) -> f64 {
        let mut worst = f64::INFINITY;
        for j in 0..64 {
            let th = j as f64 * std::f64::consts::PI / 64.0;
            let (f0, fp0) = (th.sin(), energy.sqrt() * th.cos());
            let (f1, fp1) = free_channel_transfer(m, energy, r_n, r, f0, fp0, OdeOptions { rtol: 1e-12, ..OdeOptions::default() }).unwrap();
            let q1 = f1 * f1 + fp1 * fp1 / energy;
            let bound = prufer_bound(m, energy, r_n, r, f0, fp0, c).unwrap();
            worst = worst.min(q1 / bound);
        }
        worst
    }

    #[test]
    fn sharp_prufer_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let m = rng.gen_range(0..8);
            let energy = rng.gen_range(0.2..5.0);
            let r_n = rng.gen_range(0.5..4.0);
            let r = r_n + rng.gen_range(0.1..6.0);
            assert!(worst_ratio(m, energy, r_n, r, PruferConstant::Sharp) >= 1.0 - 1e-8);
        }
    }

    #[test]
    fn displayed_prufer_constant_is_violated() {
        // strong centrifugal term over a short gap at low energy
        assert!(worst_ratio(3, 0.3, 1.0, 1.4, PruferConstant::Displayed) < 0.9);
    }

    #[test]
    fn s_wave_energy_is_conserved() {
        let opts = OdeOptions { rtol: 1e-12, ..OdeOptions::default() };
        for (e, f0, fp0) in [(0.5, 1.0, 0.0), (2.0, 0.3, -1.1), (3.7, -0.8, 0.4)] {
            let (f1, fp1) = free_channel_transfer(0, e, 1.0, 13.0, f0, fp0, opts).unwrap();
            let q0 = f0 * f0 + fp0 * fp0 / e;
            assert!((f1 * f1 + fp1 * fp1 / e - q0).abs() < 1e-10 * q0);
        }
    }

    #[test]
    fn scaled_tail_is_constant_outside_shells() {
        let pot = SparsePotential::symmetric(&[1.5, 4.0], &[0.5, -0.3]).unwrap();
        for eps in [0.05, 0.3] {
            let s = solve_radial(&pot, 0, c(1.2, eps), 30.0, RadialOptions::default()).unwrap();
            for (r, w) in s.r.iter().zip(&s.w) {
                if *r > 5.0 {
                    assert!((w - 1.0).norm() < 1e-9, "r={r}");
                }
            }
        }
    }

    #[test]
    fn cutoff_is_minimal() {
        for (r, g) in [(2.0, 0.5), (3.0, 0.2), (1.5, 1.0)] {
            let k = cutoff_channel(r, g).unwrap();
            let rhs = r * (-g * f64::powf(r, 4.0 / 3.0) * f64::ln(r)).exp();
            assert!(r * r / (k as f64) < rhs);
            assert!(r * r / ((k - 1) as f64) >= rhs);
        }
    }

    #[test]
    fn channel_tail_sums() {
        let d = ChannelData::new(1.0, 3.0, vec![(0, 0, 1.0, 0.0), (1, -1, 2.0, 0.0), (1, 1, 1.0, 0.0), (3, 0, 0.5, 0.0)]);
        assert_eq!(d.tail_sums, vec![6.25, 5.25, 0.25, 0.25]);
        assert_eq!(d.head_sum(1), 6.0);
    }

    fn sched(log_r0: f64) -> EigenSchedule {
        EigenSchedule { log_r0, beta: 1.4, factor: 2.0, count: 5 }
    }

    #[test]
    fn contradiction_for_large_start() {
        for e in [0.5, 1.0, 4.0] {
            for g in [0.5, 1.0, 2.0] {
                let rep = eigenvalue_absence_check(&sched(120.0), e, g, PruferConstant::Sharp).unwrap();
                assert!(rep.verdict, "E={e} γ={g}");
            }
        }
    }

    #[test]
    fn small_start_does_not_close() {
        let rep = eigenvalue_absence_check(&sched(3.0), 1.0, 2.0, PruferConstant::Sharp).unwrap();
        assert!(!rep.certificates[0].contradiction);
        assert!(!rep.verdict);
    }

    #[test]
    fn threshold_grows_with_gamma() {
        for l in [3.0, 20.0, 120.0] {
            let a = eigenvalue_absence_check(&sched(l), 1.0, 0.5, PruferConstant::Sharp).unwrap();
            let b = eigenvalue_absence_check(&sched(l), 1.0, 1.5, PruferConstant::Sharp).unwrap();
            assert!(a.certificates[0].loglog_min_gap < b.certificates[0].loglog_min_gap);
        }
    }

    #[test]
    fn rescaling_radii_raises_margins() {
        let a = eigenvalue_absence_check(&sched(120.0), 1.0, 1.0, PruferConstant::Sharp).unwrap();
        let b = eigenvalue_absence_check(&sched(120.0 + 10f64.ln()), 1.0, 1.0, PruferConstant::Sharp).unwrap();
        for (x, y) in a.certificates.iter().zip(&b.certificates) {
            assert!(!y.margin.less_than(&x.margin));
        }
        assert!(a.certificates[0].margin.less_than(&b.certificates[0].margin));
    }
}

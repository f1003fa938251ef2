//! Sparse layered potentials: unit-thickness spherical shells
//! `R_n < |x| < R_n + 1`, pointwise evaluation and the sparseness
//! diagnostics the asymptotic analysis relies on.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::sphere::real_harmonic;

/// Shell thickness. Every layer estimate assumes unit shells.
pub const THICKNESS: f64 = 1.0;

/// `(r, value)` pairs with linear interpolation; zero outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RadialTable {
    points: Vec<[f64; 2]>,
}

impl RadialTable {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(LabError::InvalidPotential("radial table needs at least two points".into()));
        }
        if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(LabError::InvalidPotential("radial table abscissae must increase".into()));
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(LabError::InvalidPotential("radial table holds non-finite entries".into()));
        }
        Ok(Self { points })
    }

    /// Constant value across `[a, b]`.
    pub fn constant(a: f64, b: f64, value: f64) -> Self {
        Self { points: vec![[a, value], [b, value]] }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn eval(&self, r: f64) -> f64 {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if r < first[0] || r > last[0] {
            return 0.0;
        }
        let i = self.points.partition_point(|p| p[0] <= r).clamp(1, self.points.len() - 1);
        let [r0, v0] = self.points[i - 1];
        let [r1, v1] = self.points[i];
        v0 + (v1 - v0) * (r - r0) / (r1 - r0)
    }

    pub fn max_abs(&self) -> f64 {
        self.points.iter().map(|p| p[1].abs()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { points: self.points.iter().map(|p| [p[0], c * p[1]]).collect() }
    }
}

/// One real-harmonic component `table(r) · Y_{m,l}(x̂)` of a modulated layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicTerm {
    pub degree: usize,
    pub order: i64,
    pub table: RadialTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeLaw {
    /// `±amplitude` with equal probability.
    Rademacher,
    /// Uniform on `[-amplitude, amplitude]`.
    Uniform,
}

impl AmplitudeLaw {
    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            AmplitudeLaw::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            AmplitudeLaw::Uniform => rng.gen_range(-1.0..=1.0),
        }
    }

    /// `E[ω²]` for unit amplitude.
    pub fn second_moment(&self) -> f64 {
        match self {
            AmplitudeLaw::Rademacher => 1.0,
            AmplitudeLaw::Uniform => 1.0 / 3.0,
        }
    }
}

/// Smooth bumps `(1 - (d/ρ)²)²` in disjoint balls inside the shell,
/// multiplied by independent mean-zero weights drawn from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpEnsemble {
    pub centers: Vec<[f64; 3]>,
    pub radii: Vec<f64>,
    pub amplitude: f64,
    pub law: AmplitudeLaw,
    pub seed: u64,
}

impl BumpEnsemble {
    /// `count` bumps of radius `radius` centred on the mid-shell sphere at
    /// Fibonacci directions.
    pub fn on_shell(inner_radius: f64, count: usize, radius: f64, amplitude: f64, law: AmplitudeLaw, seed: u64) -> Self {
        let mid = inner_radius + 0.5 * THICKNESS;
        let golden = PI * (3.0 - 5f64.sqrt());
        let centers = (0..count)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                let s = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                [mid * s * phi.cos(), mid * s * phi.sin(), mid * z]
            })
            .collect();
        Self { centers, radii: vec![radius; count], amplitude, law, seed }
    }

    /// Weights `ω_b` of the realisation fixed by `seed`.
    pub fn weights(&self) -> Vec<f64> {
        self.weights_for_seed(self.seed)
    }

    pub fn weights_for_seed(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.centers.len()).map(|_| self.amplitude * self.law.draw(&mut rng)).collect()
    }

    pub fn bump_shape(&self, b: usize, x: [f64; 3]) -> f64 {
        let c = self.centers[b];
        let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
        let rho2 = self.radii[b] * self.radii[b];
        if d2 >= rho2 {
            0.0
        } else {
            let s = 1.0 - d2 / rho2;
            s * s
        }
    }

    fn validate(&self, inner_radius: f64) -> Result<()> {
        if self.centers.len() != self.radii.len() {
            return Err(LabError::InvalidPotential("bump centers and radii differ in length".into()));
        }
        for (i, (c, &rho)) in self.centers.iter().zip(&self.radii).enumerate() {
            let r = norm(*c);
            if rho <= 0.0 || r - rho < inner_radius || r + rho > inner_radius + THICKNESS {
                return Err(LabError::InvalidPotential(format!("bump {i} leaves its shell")));
            }
            for (j, (c2, &rho2)) in self.centers.iter().zip(&self.radii).enumerate().skip(i + 1) {
                let d = norm([c[0] - c2[0], c[1] - c2[1], c[2] - c2[2]]);
                if d < rho + rho2 {
                    return Err(LabError::InvalidPotential(format!("bumps {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerProfile {
    Radial { table: RadialTable },
    Harmonic { terms: Vec<HarmonicTerm> },
    RandomBumps { ensemble: BumpEnsemble },
}

/// One shell `R < |x| < R + 1` with its certified sup bound `v_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    index: usize,
    inner_radius: f64,
    profile: LayerProfile,
    bound: f64,
    bump_weights: Vec<f64>,
}

impl LayerSpec {
    pub fn new(index: usize, inner_radius: f64, profile: LayerProfile) -> Result<Self> {
        if !(inner_radius > 0.0) || !inner_radius.is_finite() {
            return Err(LabError::InvalidPotential(format!("inner radius must be positive, got {inner_radius}")));
        }
        let bound = match &profile {
            LayerProfile::Radial { table } => table.max_abs(),
            LayerProfile::Harmonic { terms } => {
                for t in terms {
                    if t.order.unsigned_abs() as usize > t.degree {
                        return Err(LabError::InvalidPotential(format!(
                            "harmonic order {} exceeds degree {}",
                            t.order, t.degree
                        )));
                    }
                }
                terms
                    .iter()
                    .map(|t| t.table.max_abs() * ((2 * t.degree + 1) as f64 / (4.0 * PI)).sqrt())
                    .sum()
            }
            LayerProfile::RandomBumps { ensemble } => {
                ensemble.validate(inner_radius)?;
                ensemble.amplitude.abs()
            }
        };
        let bump_weights = match &profile {
            LayerProfile::RandomBumps { ensemble } => ensemble.weights(),
            _ => Vec::new(),
        };
        Ok(Self { index, inner_radius, profile, bound, bump_weights })
    }

    /// Spherically symmetric constant shell `v · 1_{(R, R+1)}`.
    pub fn constant_shell(index: usize, inner_radius: f64, v: f64) -> Result<Self> {
        Self::new(
            index,
            inner_radius,
            LayerProfile::Radial { table: RadialTable::constant(inner_radius, inner_radius + THICKNESS, v) },
        )
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn outer_radius(&self) -> f64 {
        self.inner_radius + THICKNESS
    }

    pub fn profile(&self) -> &LayerProfile {
        &self.profile
    }

    /// Certified `sup |v_n(x)|`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn is_symmetric(&self) -> bool {
        match &self.profile {
            LayerProfile::Radial { .. } => true,
            LayerProfile::Harmonic { terms } => terms.iter().all(|t| t.degree == 0),
            LayerProfile::RandomBumps { .. } => false,
        }
    }

    /// Radial profile of a symmetric layer.
    pub fn radial_value(&self, r: f64) -> Option<f64> {
        if r <= self.inner_radius || r >= self.outer_radius() {
            return if self.is_symmetric() { Some(0.0) } else { None };
        }
        match &self.profile {
            LayerProfile::Radial { table } => Some(table.eval(r)),
            LayerProfile::Harmonic { terms } if self.is_symmetric() => {
                Some(terms.iter().map(|t| t.table.eval(r)).sum::<f64>() / (4.0 * PI).sqrt())
            }
            _ => None,
        }
    }

    /// Real-harmonic components `(m, l, table)`; radial layers appear as
    /// the `(0, 0)` term. `None` for bump ensembles.
    pub fn harmonic_terms(&self) -> Option<Vec<HarmonicTerm>> {
        match &self.profile {
            LayerProfile::Radial { table } => Some(vec![HarmonicTerm {
                degree: 0,
                order: 0,
                table: table.scaled((4.0 * PI).sqrt()),
            }]),
            LayerProfile::Harmonic { terms } => Some(terms.clone()),
            LayerProfile::RandomBumps { .. } => None,
        }
    }

    /// Highest harmonic degree present (`None` for bumps).
    pub fn harmonic_degree(&self) -> Option<usize> {
        self.harmonic_terms().map(|t| t.iter().map(|h| h.degree).max().unwrap_or(0))
    }

    /// Breakpoints of the radial profile inside `[R, R+1]`, for composite quadrature.
    pub fn radial_breaks(&self) -> Vec<f64> {
        let (a, b) = (self.inner_radius, self.outer_radius());
        let mut br = vec![a, b];
        let mut push_table = |t: &RadialTable| {
            br.extend(t.points().iter().map(|p| p[0]).filter(|&r| r > a && r < b));
        };
        match &self.profile {
            LayerProfile::Radial { table } => push_table(table),
            LayerProfile::Harmonic { terms } => terms.iter().for_each(|t| push_table(&t.table)),
            LayerProfile::RandomBumps { .. } => {}
        }
        br.sort_by(|x, y| x.partial_cmp(y).unwrap());
        br.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        br
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let r = norm(x);
        if r <= self.inner_radius || r >= self.outer_radius() {
            return 0.0;
        }
        match &self.profile {
            LayerProfile::Radial { table } => table.eval(r),
            LayerProfile::Harmonic { terms } => terms
                .iter()
                .map(|t| t.table.eval(r) * real_harmonic(t.degree, t.order, x))
                .sum(),
            LayerProfile::RandomBumps { ensemble } => self
                .bump_weights
                .iter()
                .enumerate()
                .map(|(b, w)| w * ensemble.bump_shape(b, x))
                .sum(),
        }
    }

    /// The same geometry with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let profile = match &self.profile {
            LayerProfile::Radial { table } => LayerProfile::Radial { table: table.scaled(c) },
            LayerProfile::Harmonic { terms } => LayerProfile::Harmonic {
                terms: terms
                    .iter()
                    .map(|t| HarmonicTerm { degree: t.degree, order: t.order, table: t.table.scaled(c) })
                    .collect(),
            },
            LayerProfile::RandomBumps { ensemble } => {
                let mut e = ensemble.clone();
                e.amplitude *= c;
                LayerProfile::RandomBumps { ensemble: e }
            }
        };
        Self::new(self.index, self.inner_radius, profile).expect("scaling preserves validity")
    }

    fn reindexed(&self, index: usize) -> Self {
        let mut l = self.clone();
        l.index = index;
        l
    }
}

pub(crate) fn norm(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Ordered disjoint unit shells.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePotential {
    layers: Vec<LayerSpec>,
    l2_norm: f64,
}

impl SparsePotential {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        for pair in layers.windows(2) {
            if !(pair[0].outer_radius() < pair[1].inner_radius()) {
                return Err(LabError::InvalidPotential(format!(
                    "shells at R = {} and R = {} are not increasing and disjoint",
                    pair[0].inner_radius(),
                    pair[1].inner_radius()
                )));
            }
        }
        let layers: Vec<_> = layers.iter().enumerate().map(|(i, l)| l.reindexed(i)).collect();
        let l2_norm = layers.iter().map(|l| l.bound() * l.bound()).sum::<f64>().sqrt();
        Ok(Self { layers, l2_norm })
    }

    pub fn empty() -> Self {
        Self { layers: Vec::new(), l2_norm: 0.0 }
    }

    /// Constant symmetric shells at `radii` with heights `values`.
    pub fn symmetric(radii: &[f64], values: &[f64]) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(LabError::InvalidPotential("radii and values differ in length".into()));
        }
        let layers = radii
            .iter()
            .zip(values)
            .enumerate()
            .map(|(i, (&r, &v))| LayerSpec::constant_shell(i, r, v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }

    pub fn radii(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.inner_radius()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.layers.iter().all(|l| l.is_symmetric())
    }

    /// `V_n`: the first `n` layers.
    pub fn truncated(&self, n: usize) -> Self {
        Self::new(self.layers[..n.min(self.layers.len())].to_vec()).expect("prefix of a valid potential")
    }

    /// `χ_{|x|>R} V`: drops the layers with `R_n + 1 <= R`.
    pub fn truncated_below(&self, radius: f64) -> Self {
        Self::new(self.layers.iter().filter(|l| l.outer_radius() > radius).cloned().collect())
            .expect("subset of a valid potential")
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.layers.iter().map(|l| l.scaled(c)).collect()).expect("scaling preserves validity")
    }

    pub fn evaluate(&self, x: [f64; 3]) -> f64 {
        let r = norm(x);
        self.layers
            .iter()
            .find(|l| r > l.inner_radius() && r < l.outer_radius())
            .map_or(0.0, |l| l.eval(x))
    }

    /// Radial profile `V(r)` of a symmetric potential.
    pub fn radial_value(&self, r: f64) -> Option<f64> {
        let mut total = 0.0;
        for l in &self.layers {
            total += l.radial_value(r)?;
        }
        Some(total)
    }

    /// Sequence `(n, v_n)` together with `‖v‖₂`.
    pub fn layer_l2_profile(&self) -> (Vec<(usize, f64)>, f64) {
        (self.layers.iter().map(|l| (l.index(), l.bound())).collect(), self.l2_norm)
    }
}

/// Per-index sparseness flags, all reproducible from `(R_n, R_{n+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparsenessFlags {
    pub index: usize,
    /// `ln σ_n`, `σ_n = R_n^{3.5} e^{R_n} (R_{n+1} - R_n)^{-1}`.
    pub log_sigma: f64,
    pub gap_doubles: bool,
    pub sigma_below_exp: bool,
    pub ratio_below_exp: bool,
    pub gap_exceeds_index: bool,
    pub alpha_schedule: bool,
}

impl SparsenessFlags {
    pub fn all(&self) -> bool {
        self.gap_doubles && self.sigma_below_exp && self.ratio_below_exp && self.gap_exceeds_index && self.alpha_schedule
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsenessReport {
    pub alpha: f64,
    pub flags: Vec<SparsenessFlags>,
}

impl SparsenessReport {
    pub fn conditions_ok(&self) -> bool {
        self.flags.iter().all(|f| f.gap_doubles && f.sigma_below_exp && f.ratio_below_exp && f.gap_exceeds_index)
    }

    pub fn alpha_schedule_ok(&self) -> bool {
        self.flags.iter().all(|f| f.alpha_schedule)
    }

    pub fn all_ok(&self) -> bool {
        self.flags.iter().all(SparsenessFlags::all)
    }
}

/// Flags for index `n` from `ln R_n`, `ln R_{n+1}`.
pub fn sparseness_flags(n: usize, log_r: f64, log_r_next: f64, alpha: f64) -> SparsenessFlags {
    let r = log_r.exp();
    // ln(R_{n+1} - R_n) without forming R_{n+1}
    let log_gap = log_r_next + (-(log_r - log_r_next).exp()).ln_1p();
    let nf = n as f64;
    let log_sigma = 3.5 * log_r + r - log_gap;
    SparsenessFlags {
        index: n,
        log_sigma,
        gap_doubles: 2f64.ln() + log_r < log_r_next,
        sigma_below_exp: log_sigma < -nf,
        ratio_below_exp: n == 0 || nf.ln() + log_r - 0.5 * log_r_next < -2.0 * nf,
        gap_exceeds_index: n == 0 || nf.ln() < log_gap,
        alpha_schedule: log_r_next > alpha * r,
    }
}

/// Sparseness report from radii given in log domain (`ln R_n`).
pub fn validate_log_radii(log_radii: &[f64], alpha: f64) -> Result<SparsenessReport> {
    if !(alpha > 1.0) {
        return Err(LabError::InvalidArgument(format!("alpha must exceed 1, got {alpha}")));
    }
    if log_radii.len() < 2 {
        return Err(LabError::InvalidPotential("sparseness needs at least two layers".into()));
    }
    if log_radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::InvalidPotential("radii must be strictly increasing".into()));
    }
    let flags = log_radii
        .windows(2)
        .enumerate()
        .map(|(n, w)| sparseness_flags(n, w[0], w[1], alpha))
        .collect();
    Ok(SparsenessReport { alpha, flags })
}

pub fn validate_radii(radii: &[f64], alpha: f64) -> Result<SparsenessReport> {
    if radii.iter().any(|&r| !(r > 0.0)) {
        return Err(LabError::InvalidPotential("radii must be positive".into()));
    }
    let logs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    validate_log_radii(&logs, alpha)
}

pub fn validate_sparseness(pot: &SparsePotential, alpha: f64) -> Result<SparsenessReport> {
    validate_radii(&pot.radii(), alpha)
}

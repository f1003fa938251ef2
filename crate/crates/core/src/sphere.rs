//! Quadrature on the unit sphere, spherical-harmonic transforms, the
//! Laplace–Beltrami operator and the heat flow `exp[-B/(2ikt)]`.
//!
//! Harmonics are complex and orthonormal, `Y_m^l = P̄_m^l(cos θ) e^{ilφ}`
//! with the Condon–Shortley phase inside `P̄`. Degree is `m`, order `l`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::quad::gauss_legendre;

pub const MIN_DEGREE: usize = 4;
pub const MAX_DEGREE: usize = 256;

/// Flat index of `(m, l)` in a coefficient vector.
#[inline]
pub fn sh_index(m: usize, l: i64) -> usize {
    (m * m) as usize + (m as i64 + l) as usize
}

#[inline]
fn tri_index(m: usize, l: usize) -> usize {
    m * (m + 1) / 2 + l
}

/// Fully normalised associated Legendre values `P̄_m^l(x)` for
/// `0 <= l <= m <= lmax`, stored triangularly. Includes the
/// Condon–Shortley phase, so `Y_m^l = P̄_m^l e^{ilφ}` is orthonormal on Σ.
pub fn normalized_legendre(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; (lmax + 1) * (lmax + 2) / 2];
    let s = (1.0 - x * x).max(0.0).sqrt();
    p[0] = 1.0 / (4.0 * PI).sqrt();
    for l in 1..=lmax {
        let lf = l as f64;
        p[tri_index(l, l)] = -((2.0 * lf + 1.0) / (2.0 * lf)).sqrt() * s * p[tri_index(l - 1, l - 1)];
    }
    for l in 0..lmax {
        p[tri_index(l + 1, l)] = (2.0 * l as f64 + 3.0).sqrt() * x * p[tri_index(l, l)];
    }
    for l in 0..=lmax {
        for m in (l + 2)..=lmax {
            let mf = m as f64;
            let lf = l as f64;
            let a = ((4.0 * mf * mf - 1.0) / (mf * mf - lf * lf)).sqrt();
            let b = (((mf - 1.0).powi(2) - lf * lf) / (4.0 * (mf - 1.0).powi(2) - 1.0)).sqrt();
            p[tri_index(m, l)] = a * (x * p[tri_index(m - 1, l)] - b * p[tri_index(m - 2, l)]);
        }
    }
    p
}

/// Complex orthonormal `Y_m^l` at a unit direction.
pub fn complex_harmonic(m: usize, l: i64, dir: [f64; 3]) -> Complex64 {
    let (x, phi) = polar(dir);
    let a = l.unsigned_abs() as usize;
    assert!(a <= m, "order exceeds degree");
    let p = normalized_legendre(m, x)[tri_index(m, a)];
    let sign = if l < 0 && a % 2 == 1 { -1.0 } else { 1.0 };
    Complex64::from_polar(sign * p, l as f64 * phi)
}

/// Real orthonormal harmonic: `l > 0` cosine type, `l < 0` sine type.
pub fn real_harmonic(m: usize, l: i64, dir: [f64; 3]) -> f64 {
    let (x, phi) = polar(dir);
    let a = l.unsigned_abs() as usize;
    assert!(a <= m, "order exceeds degree");
    let p = normalized_legendre(m, x)[tri_index(m, a)];
    let cs = if a % 2 == 1 { -1.0 } else { 1.0 };
    match l {
        0 => p,
        l if l > 0 => std::f64::consts::SQRT_2 * cs * p * (a as f64 * phi).cos(),
        _ => std::f64::consts::SQRT_2 * cs * p * (a as f64 * phi).sin(),
    }
}

/// Expansion of a real harmonic in complex ones: list of `(order, weight)`.
pub fn real_harmonic_in_complex(m: usize, l: i64) -> Vec<(i64, Complex64)> {
    let a = l.abs();
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let cs = if a % 2 == 1 { -1.0 } else { 1.0 };
    let _ = m;
    match l {
        0 => vec![(0, Complex64::new(1.0, 0.0))],
        l if l > 0 => vec![(a, Complex64::new(cs * r2, 0.0)), (-a, Complex64::new(r2, 0.0))],
        _ => vec![(-a, Complex64::new(0.0, r2)), (a, Complex64::new(0.0, -cs * r2))],
    }
}

fn polar(dir: [f64; 3]) -> (f64, f64) {
    let r = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    if r == 0.0 {
        return (1.0, 0.0);
    }
    ((dir[2] / r).clamp(-1.0, 1.0), dir[1].atan2(dir[0]))
}

/// Gauss–Legendre in `cos θ` (L+1 rings) times 2L+1 uniform azimuths.
/// Integrates band-limited integrands of degree ≤ 2L exactly.
#[derive(Debug)]
pub struct SphereGrid {
    degree: usize,
    ring_cosines: Vec<f64>,
    ring_weights: Vec<f64>,
    n_phi: usize,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    legendre: Vec<Vec<f64>>,
    // e^{-i l φ_p}, indexed [p][l + L]
    azimuth: Vec<Vec<Complex64>>,
}

impl SphereGrid {
    pub fn new(degree: usize) -> Result<Arc<Self>> {
        if !(MIN_DEGREE..=MAX_DEGREE).contains(&degree) {
            return Err(LabError::DegreeOutOfRange(degree));
        }
        let (cos_theta, gw) = gauss_legendre(degree + 1);
        let n_phi = 2 * degree + 1;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(cos_theta.len() * n_phi);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for (&x, &w) in cos_theta.iter().zip(&gw) {
            let s = (1.0 - x * x).sqrt();
            for p in 0..n_phi {
                let phi = p as f64 * dphi;
                nodes.push([s * phi.cos(), s * phi.sin(), x]);
                weights.push(w * dphi);
            }
        }
        let legendre = cos_theta.iter().map(|&x| normalized_legendre(degree, x)).collect();
        let azimuth = (0..n_phi)
            .map(|p| {
                let phi = p as f64 * dphi;
                (-(degree as i64)..=degree as i64)
                    .map(|l| Complex64::from_polar(1.0, -(l as f64) * phi))
                    .collect()
            })
            .collect();
        Ok(Arc::new(Self {
            degree,
            ring_cosines: cos_theta,
            ring_weights: gw,
            n_phi,
            nodes,
            weights,
            legendre,
            azimuth,
        }))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Gauss–Legendre cosines of the polar rings.
    pub fn ring_cosines(&self) -> &[f64] {
        &self.ring_cosines
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coeff_len(&self) -> usize {
        (self.degree + 1) * (self.degree + 1)
    }

    /// Quadrature of nodal values.
    pub fn integrate(&self, values: &[Complex64]) -> Complex64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * *w).sum()
    }

    pub fn integrate_real(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Spherical-harmonic coefficients of nodal values.
    pub fn analyze(&self, values: &[Complex64]) -> ShCoeffs {
        assert_eq!(values.len(), self.len(), "value count does not match grid");
        let big_l = self.degree as i64;
        let dphi = 2.0 * PI / self.n_phi as f64;
        let mut data = vec![Complex64::new(0.0, 0.0); self.coeff_len()];
        let mut ring = vec![Complex64::new(0.0, 0.0); 2 * self.degree + 1];
        for (j, row) in values.chunks(self.n_phi).enumerate() {
            for (li, slot) in ring.iter_mut().enumerate() {
                *slot = row
                    .iter()
                    .zip(&self.azimuth)
                    .map(|(f, e)| f * e[li])
                    .sum::<Complex64>()
                    * dphi;
            }
            let w = self.ring_weights[j];
            let leg = &self.legendre[j];
            for m in 0..=self.degree {
                for l in -(m as i64)..=(m as i64) {
                    let a = l.unsigned_abs() as usize;
                    let sign = if l < 0 && a % 2 == 1 { -1.0 } else { 1.0 };
                    data[sh_index(m, l)] += ring[(l + big_l) as usize] * (w * sign * leg[tri_index(m, a)]);
                }
            }
        }
        ShCoeffs { degree: self.degree, data }
    }

    /// Nodal values of a coefficient vector; refuses degrees above the grid.
    pub fn synthesize(&self, coeffs: &ShCoeffs) -> Result<Vec<Complex64>> {
        if coeffs.degree > self.degree {
            let top = coeffs.effective_degree(0.0);
            if top > self.degree {
                return Err(LabError::Truncation { given: top, max: self.degree });
            }
        }
        let top = coeffs.degree.min(self.degree);
        let big_l = self.degree as i64;
        let mut out = Vec::with_capacity(self.len());
        let mut ring = vec![Complex64::new(0.0, 0.0); 2 * self.degree + 1];
        for leg in &self.legendre {
            ring.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for m in 0..=top {
                for l in -(m as i64)..=(m as i64) {
                    let a = l.unsigned_abs() as usize;
                    let sign = if l < 0 && a % 2 == 1 { -1.0 } else { 1.0 };
                    ring[(l + big_l) as usize] += coeffs.get(m, l) * (sign * leg[tri_index(m, a)]);
                }
            }
            for e in &self.azimuth {
                // e holds e^{-ilφ}; synthesis needs e^{+ilφ}
                let v: Complex64 = ring.iter().zip(e).map(|(c, e)| c * e.conj()).sum();
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// Spherical-harmonic coefficients up to `degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShCoeffs {
    degree: usize,
    data: Vec<Complex64>,
}

impl ShCoeffs {
    pub fn zeros(degree: usize) -> Self {
        Self { degree, data: vec![Complex64::new(0.0, 0.0); (degree + 1) * (degree + 1)] }
    }

    pub fn from_vec(degree: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != (degree + 1) * (degree + 1) {
            return Err(LabError::InvalidArgument(format!(
                "coefficient vector of length {} does not match degree {degree}",
                data.len()
            )));
        }
        Ok(Self { degree, data })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn get(&self, m: usize, l: i64) -> Complex64 {
        self.data[sh_index(m, l)]
    }

    pub fn set(&mut self, m: usize, l: i64, v: Complex64) {
        self.data[sh_index(m, l)] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Multiply every coefficient of degree `m` by `factor(m)`.
    pub fn scale_by_degree(&mut self, factor: impl Fn(usize) -> Complex64) {
        for m in 0..=self.degree {
            let f = factor(m);
            for l in -(m as i64)..=(m as i64) {
                self.data[sh_index(m, l)] *= f;
            }
        }
    }

    /// Highest degree with a coefficient above `tol` in modulus.
    pub fn effective_degree(&self, tol: f64) -> usize {
        (0..=self.degree)
            .rev()
            .find(|&m| (-(m as i64)..=(m as i64)).any(|l| self.get(m, l).norm() > tol))
            .unwrap_or(0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Upper bound on `sup |∇_Σ f|` from `Σ_l |Y_m^l|² = (2m+1)/4π`.
    pub fn gradient_sup_bound(&self) -> f64 {
        (1..=self.degree)
            .map(|m| {
                let mf = m as f64;
                let energy: f64 = (-(m as i64)..=(m as i64)).map(|l| self.get(m, l).norm_sqr()).sum();
                (energy * mf * (mf + 1.0) * (2.0 * mf + 1.0) / (4.0 * PI)).sqrt()
            })
            .sum()
    }
}

/// A complex function on the unit sphere held as nodal values.
#[derive(Debug, Clone)]
pub struct SphericalField {
    grid: Arc<SphereGrid>,
    values: Vec<Complex64>,
}

impl SphericalField {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::InvalidArgument(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<SphereGrid>, f: impl Fn([f64; 3]) -> Complex64) -> Self {
        let values = grid.nodes().iter().map(|&n| f(n)).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Arc<SphereGrid>, c: Complex64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn from_coeffs(grid: Arc<SphereGrid>, coeffs: &ShCoeffs) -> Result<Self> {
        let values = grid.synthesize(coeffs)?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn coeffs(&self) -> ShCoeffs {
        self.grid.analyze(&self.values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }

    /// `‖f‖_{L²(Σ)}` by quadrature.
    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        self.grid.integrate_real(&sq).sqrt()
    }

    pub fn inner(&self, other: &SphericalField) -> Complex64 {
        let prod: Vec<Complex64> = self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).collect();
        self.grid.integrate(&prod)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &SphericalField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn sub(&self, other: &SphericalField) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &SphericalField) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    /// Apply a per-degree multiplier in coefficient space.
    pub fn apply_degree_multiplier(&self, factor: impl Fn(usize) -> Complex64) -> Self {
        let mut c = self.coeffs();
        c.scale_by_degree(factor);
        Self::from_coeffs(self.grid.clone(), &c).expect("degree within grid")
    }
}

/// Laplace–Beltrami operator: coefficient `(m, l)` times `-m(m+1)`.
pub fn laplace_beltrami_apply(f: &SphericalField) -> SphericalField {
    f.apply_degree_multiplier(|m| Complex64::new(-((m * (m + 1)) as f64), 0.0))
}

/// Multiplier of the heat flow `exp[-B/(2ikt)]` on degree `m`.
pub fn heat_flow_factor(m: usize, k: Complex64, t: f64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    ((m * (m + 1)) as f64 / (2.0 * i * k * t)).exp()
}

/// `exp[-B/(2ikt)] f`.
pub fn heat_flow(f: &SphericalField, k: Complex64, t: f64) -> Result<SphericalField> {
    if !(t > 0.0) {
        return Err(LabError::InvalidArgument(format!("heat flow needs t > 0, got {t}")));
    }
    if k.im < 0.0 {
        return Err(LabError::InvalidArgument(format!("heat flow needs Im k >= 0, got {k}")));
    }
    Ok(f.apply_degree_multiplier(|m| heat_flow_factor(m, k, t)))
}

/// Field rows `node, x, y, z, re, im`.
pub fn field_csv(field: &SphericalField) -> String {
    let mut out = String::from("node,x,y,z,re,im\n");
    for (i, (n, v)) in field.grid.nodes().iter().zip(&field.values).enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            crate::io::num(n[0]),
            crate::io::num(n[1]),
            crate::io::num(n[2]),
            crate::io::num(v.re),
            crate::io::num(v.im)
        ));
    }
    out
}

/// Coefficient rows `m, l, re, im`.
pub fn coeffs_csv(c: &ShCoeffs) -> String {
    let mut out = String::from("m,l,re,im\n");
    for m in 0..=c.degree {
        for l in -(m as i64)..=(m as i64) {
            let v = c.get(m, l);
            out.push_str(&format!("{m},{l},{},{}\n", crate::io::num(v.re), crate::io::num(v.im)));
        }
    }
    out
}

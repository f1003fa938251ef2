//! Spherical Bessel and Hankel functions of complex argument in
//! exponentially scaled form.
//!
//! For `Im z >= 0` the unscaled functions grow like `e^{Im z}`, which
//! overflows long before the radii used in the layer integrals. Every
//! routine here therefore returns
//!
//! ```text
//! jhat_m(z) = e^{ iz} j_m(z)
//! hhat_m(z) = e^{-iz} h_m^(1)(z)
//! ```
//!
//! both of which stay bounded (up to polynomial factors) in the closed
//! upper half plane.

use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);
const SERIES_RADIUS: f64 = 1.0;

/// `e^{iz} j_m(z)` for `m = 0..=max_order`.
pub fn spherical_j_scaled(max_order: usize, z: Complex64) -> Vec<Complex64> {
    let norm = z.norm();
    if norm < SERIES_RADIUS {
        let phase = (I * z).exp();
        return (0..=max_order).map(|m| phase * j_series(m, z)).collect();
    }
    if norm >= max_order as f64 {
        hankel_sum(max_order, z)
    } else {
        miller(max_order, z)
    }
}

/// `e^{-iz} h^(1)_m(z)` for `m = 0..=max_order` by upward recurrence.
pub fn spherical_h1_scaled(max_order: usize, z: Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(max_order + 1);
    let h0 = -I / z;
    out.push(h0);
    if max_order == 0 {
        return out;
    }
    out.push(-(z + I) / (z * z));
    for m in 1..max_order {
        let next = out[m] * ((2 * m + 1) as f64) / z - out[m - 1];
        out.push(next);
    }
    out
}

/// Unscaled `j_m(z)`; only safe for moderate `|Im z|`.
pub fn spherical_j(m: usize, z: Complex64) -> Complex64 {
    spherical_j_scaled(m, z)[m] * (-I * z).exp()
}

fn j_series(m: usize, z: Complex64) -> Complex64 {
    // z^m / (2m+1)!! * sum_s (-z^2/2)^s / (s! (2m+3)(2m+5)...(2m+2s+1))
    let mut lead = Complex64::new(1.0, 0.0);
    for i in 1..=m {
        lead *= z / ((2 * i + 1) as f64);
    }
    let w = -z * z * 0.5;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for s in 1..60 {
        term *= w / ((s as f64) * ((2 * m + 2 * s + 1) as f64));
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    lead * sum
}

/// j = (h1 + h2)/2 with both Hankel functions run upward; stable for m <= |z|.
fn hankel_sum(max_order: usize, z: Complex64) -> Vec<Complex64> {
    let h1 = spherical_h1_scaled(max_order, z);
    // e^{iz} h^(2)_m(z)
    let mut h2 = Vec::with_capacity(max_order + 1);
    h2.push(I / z);
    if max_order >= 1 {
        h2.push(-(z - I) / (z * z));
    }
    for m in 1..max_order {
        let next = h2[m] * ((2 * m + 1) as f64) / z - h2[m - 1];
        h2.push(next);
    }
    let e2 = (2.0 * I * z).exp();
    h1.iter().zip(&h2).map(|(a, b)| 0.5 * (e2 * a + b)).collect()
}

/// Miller downward recurrence normalised by the larger of jhat_0, jhat_1.
fn miller(max_order: usize, z: Complex64) -> Vec<Complex64> {
    let start = max_order + 30 + (z.norm().ceil() as usize) + 16;
    let mut vals = vec![Complex64::new(0.0, 0.0); start + 2];
    vals[start] = Complex64::new(1.0, 0.0);
    for n in (1..=start).rev() {
        let v = vals[n] * ((2 * n + 1) as f64) / z - vals[n + 1];
        vals[n - 1] = v;
        // rescale to keep the sequence representable
        let mag = v.norm();
        if mag > 1e150 {
            for x in vals[n - 1..=start].iter_mut() {
                *x /= mag;
            }
        }
    }
    let e2 = (2.0 * I * z).exp();
    let j0 = (e2 - 1.0) / (2.0 * I * z);
    // e^{iz} j_1 = e^{iz}(sin z / z^2 - cos z / z)
    let sin_s = (e2 - 1.0) / (2.0 * I);
    let cos_s = (e2 + 1.0) / 2.0;
    let j1 = sin_s / (z * z) - cos_s / z;
    let scale = if j0.norm() >= j1.norm() {
        j0 / vals[0]
    } else {
        j1 / vals[1]
    };
    vals.truncate(max_order + 1);
    vals.iter().map(|v| v * scale).collect()
}

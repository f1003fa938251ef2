//! Adaptive Dormand–Prince 5(4) integrator for complex-valued systems.

use num_complex::Complex64;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-14, initial_step: 1e-2, min_step: 1e-13, max_steps: 2_000_000 }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to each of `stops` in turn (monotone,
/// either direction) and return the state at every stop.
pub fn integrate_through<F>(mut f: F, t0: f64, y0: &[Complex64], stops: &[f64], opts: OdeOptions) -> Result<Vec<Vec<Complex64>>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut out = Vec::with_capacity(stops.len());
    let mut h_abs = opts.initial_step.abs();
    let mut k: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    let mut steps = 0usize;
    for &stop in stops {
        let dir = if stop >= t { 1.0 } else { -1.0 };
        while (stop - t) * dir > 0.0 {
            steps += 1;
            if steps > opts.max_steps {
                return Err(LabError::StepUnderflow { t });
            }
            let remaining = (stop - t).abs();
            let last = h_abs >= remaining;
            let h = dir * if last { remaining } else { h_abs };
            f(t, &y, &mut k[0]);
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        acc += k[j][i] * (h * a);
                    }
                    tmp[i] = acc;
                }
                let (done, rest) = k.split_at_mut(s);
                let _ = done;
                f(t + C[s] * h, &tmp, &mut rest[0]);
            }
            let mut err = 0.0f64;
            let mut y_new = vec![Complex64::new(0.0, 0.0); n];
            for i in 0..n {
                let mut hi = Complex64::new(0.0, 0.0);
                let mut lo = Complex64::new(0.0, 0.0);
                for s in 0..7 {
                    hi += k[s][i] * B5[s];
                    lo += k[s][i] * B4[s];
                }
                y_new[i] = y[i] + hi * h;
                let scale = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err = err.max(((hi - lo) * h).norm() / scale);
            }
            if err <= 1.0 {
                t = if last { stop } else { t + h };
                y = y_new;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h_abs *= grow;
                } else {
                    h_abs = h_abs.max(remaining * grow.min(1.0));
                }
            } else {
                h_abs *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h_abs < opts.min_step * t.abs().max(1.0) {
                    return Err(LabError::StepUnderflow { t });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Integrate from `t0` to `t1` and return the final state.
pub fn integrate<F>(f: F, t0: f64, t1: f64, y0: &[Complex64], opts: OdeOptions) -> Result<Vec<Complex64>>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    Ok(integrate_through(f, t0, y0, &[t1], opts)?.pop().expect("one stop"))
}

//! Acceptance suite: one PASS/FAIL line per criterion. Failures are
//! reported, not turned into a nonzero exit, so known shortfalls stay
//! visible without masking the rest of the workspace tests.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_barriers::config::ExperimentConfig;
use sparse_barriers::greens::{beta, free_amplitude, free_amplitude_quadrature, kappa, SourceSpec};
use sparse_barriers::ode::OdeOptions;
use sparse_barriers::potential::{AmplitudeLaw, BumpEnsemble, HarmonicTerm, LayerProfile, LayerSpec, RadialTable, SparsePotential};
use sparse_barriers::propagate::{evolution_solve, o_t_apply, parametrix_residual, propagate_recursion, EvolutionMode, OtRoute, PropagateOptions};
use sparse_barriers::quad::{composite_gauss, gauss_legendre_interval};
use sparse_barriers::radial::{eigenvalue_absence_check, free_channel_transfer, prufer_gap_bound, prufer_gap_bound_sharp, radial_amplitude_oracle};
use sparse_barriers::seqbounds::{affine_trials, poly_exp_max, product_trials};
use sparse_barriers::spectral::{choose_axis_probe, entropy_lower_bound, harmonic_measure_triangle, spectral_density, TriangleDomain};
use sparse_barriers::sphere::{complex_harmonic, heat_flow, ShCoeffs, SphereGrid, SphericalField};
use sparse_barriers::wkb::randomized_wkb_moment;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn load(name: &str) -> ExperimentConfig {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::from_json(&std::fs::read_to_string(&p).unwrap()).unwrap()
}

fn random_coeffs(degree: usize, band: usize, seed: u64) -> ShCoeffs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut co = ShCoeffs::zeros(degree);
    for m in 0..=band {
        for l in -(m as i64)..=(m as i64) {
            co.set(m, l, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        }
    }
    co
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn c1_free_amplitude() -> Outcome {
    let g = SphereGrid::new(12).unwrap();
    let f = SourceSpec::ball_indicator();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for i in 0..5 {
        for j in 0..4 {
            let k = c(0.5 + 0.375 * i as f64, j as f64 / 3.0);
            let a = free_amplitude_quadrature(&f, k, &g).unwrap();
            let exact = (k.sin() - k * k.cos()) / (k * k * k);
            for v in a.values() {
                worst = worst.max((v - exact).norm() / exact.norm());
            }
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome { pass: count == 20 && worst < 1e-8 && secs < 5.0, detail: format!("{count} k values, max rel err {worst:.2e}, {secs:.2} s") }
}

/// `e^{iz} j_m(z) = ½ (-i)^m ∫_{-1}^{1} e^{iz(1+x)} P_m(x) dx`.
fn scaled_bessel_oracle(m: usize, z: Complex64) -> Complex64 {
    let (xs, ws) = gauss_legendre_interval(96, -1.0, 1.0);
    let mut s = c(0.0, 0.0);
    for (&x, &w) in xs.iter().zip(&ws) {
        let (mut p0, mut p1) = (1.0, x);
        let pm = if m == 0 {
            1.0
        } else {
            for n in 1..m {
                let p2 = ((2 * n + 1) as f64 * x * p1 - n as f64 * p0) / (n + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            p1
        };
        s += (I * z * (1.0 + x)).exp() * (w * pm);
    }
    0.5 * I.powu(3 * m as u32 % 4) * s
}

fn c2_o_t_diagonal() -> Outcome {
    let g = SphereGrid::new(36).unwrap();
    let mut worst: f64 = 0.0;
    for (t, k) in [(4.0, c(1.0, 0.0)), (10.0, c(1.5, 0.5)), (12.5, c(1.6, 0.0))] {
        assert!(k.norm() * t <= 20.0 + 1e-12);
        for m in 0..=16usize {
            let l = (m / 2) as i64 * if m % 2 == 0 { 1 } else { -1 };
            let y = SphericalField::from_fn(g.clone(), |d| complex_harmonic(m, l, d));
            let co = o_t_apply(&y, t, k, OtRoute::Quadrature).unwrap().coeffs();
            let lam = t * I.powu(3 * m as u32 % 4) * scaled_bessel_oracle(m, k * t);
            for mm in 0..=g.degree() {
                for ll in -(mm as i64)..=(mm as i64) {
                    let want = if (mm, ll) == (m, l) { lam } else { c(0.0, 0.0) };
                    worst = worst.max((co.get(mm, ll) - want).norm());
                }
            }
        }
    }
    Outcome { pass: worst < 1e-8, detail: format!("max discrepancy {worst:.2e} over m ≤ 16, |k|t ≤ 20") }
}

fn c3_parametrix() -> Outcome {
    let k = c(1.0, 0.5);
    let ts: Vec<f64> = (0..=8).map(|i| 10f64.powf(2.0 + 0.25 * i as f64)).collect();
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let mut worst_slope = f64::NEG_INFINITY;
    for m in 1..=8 {
        let ly: Vec<f64> = ts.iter().map(|&t| parametrix_residual(m, t, k).unwrap().ln()).collect();
        worst_slope = worst_slope.max(slope(&lx, &ly));
    }
    let mut m0: f64 = 0.0;
    for t in [1.0, 5.0, 10.0, 30.0, 100.0] {
        m0 = m0.max((parametrix_residual(0, t, k).unwrap() - (-2.0 * k.im * t).exp()).abs());
    }
    Outcome { pass: worst_slope <= -0.9 && m0 < 1e-12, detail: format!("steepest-worst slope {worst_slope:.3}, m=0 error {m0:.1e}") }
}

fn c4_desk_scale() -> Outcome {
    let cfg = load("desk_three_layers.json");
    let base = cfg.build_potential().unwrap();
    let f = cfg.build_source().unwrap();
    let k = cfg.k_grid.points()[0];
    let g = SphereGrid::new(6).unwrap();
    let mut sups = Vec::new();
    let mut devs = Vec::new();
    for scale in [1.0, 0.5, 0.25] {
        let pot = base.scaled(scale);
        let recs = propagate_recursion(&f, &pot, k, &g, PropagateOptions::default()).unwrap();
        sups.push(recs.iter().map(|r| r.nu).fold(0.0, f64::max));
        let mut dev: f64 = 0.0;
        for r in &recs {
            let oracle = radial_amplitude_oracle(&f, &pot.truncated(r.n), k).unwrap() / r.wkb.values()[0];
            dev = dev.max((r.reduced.values()[0] - oracle).norm());
        }
        devs.push(dev);
    }
    let finite = sups.iter().all(|s| s.is_finite());
    let mono = sups[0] > sups[1] && sups[1] > sups[2];
    Outcome {
        pass: finite && mono,
        detail: format!(
            "sup ν = {:.3e}, {:.3e}, {:.3e}; oracle deviations {:.3e}, {:.3e}, {:.3e}",
            sups[0], sups[1], sups[2], devs[0], devs[1], devs[2]
        ),
    }
}

fn c5_kappa_beta() -> Outcome {
    let g = SphereGrid::new(10).unwrap();
    let k = c(1.5, 0.4);
    let layer = LayerSpec::new(
        0,
        4.0,
        LayerProfile::Harmonic {
            terms: vec![
                HarmonicTerm { degree: 0, order: 0, table: RadialTable::constant(4.0, 5.0, 0.2) },
                HarmonicTerm { degree: 2, order: 1, table: RadialTable::new(vec![[4.0, 0.0], [4.5, 1.0], [5.0, 0.3]]).unwrap() },
            ],
        },
    )
    .unwrap();
    let a = kappa(&layer, k, &g).unwrap();
    let mut lin: f64 = 0.0;
    for s in [-2.5, 0.1, 7.0] {
        let b = kappa(&layer.scaled(s), k, &g).unwrap();
        lin = lin.max(a.scale(c(s, 0.0)).sub(&b).sup_norm() / (1.0 + a.sup_norm() * s.abs()));
    }
    let g6 = SphereGrid::new(6).unwrap();
    let kb = c(1.0, 0.5);
    let table = RadialTable::new(vec![[3.0, 1.0], [3.4, 0.2], [4.0, 0.7]]).unwrap();
    let radial = LayerSpec::new(0, 3.0, LayerProfile::Radial { table }).unwrap();
    let ratio = |cc: f64| beta(&radial.scaled(cc), kb, &g6, 6).unwrap().0.values()[0] / (cc * cc);
    let (r2, r3) = (ratio(1e-2), ratio(1e-3));
    let drift = (r2 - r3).norm() / r3.norm();
    let g4 = SphereGrid::new(4).unwrap();
    let kp = c(1.0, 0.3);
    let mut partial = Vec::new();
    let mut s = 0.0;
    for n in 1..=24usize {
        let l = LayerSpec::constant_shell(n, 4.0 * n as f64, 0.5 / n as f64).unwrap();
        s += beta(&l, kp, &g4, 8).unwrap().0.sup_norm();
        partial.push(s);
    }
    let tail = (partial[23] - partial[11]) / partial[11];
    let shrinking = partial[23] - partial[17] < partial[17] - partial[11];
    Outcome {
        pass: lin < 1e-12 && drift < 0.1 && tail < 0.2 && shrinking,
        detail: format!("κ linearity {lin:.1e}, β/c² drift {:.1}%, Σ|β| tail {:.1}% of the first 12", 100.0 * drift, 100.0 * tail),
    }
}

fn c6_prufer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = OdeOptions { rtol: 1e-12, ..OdeOptions::default() };
    let (mut displayed, mut sharp) = (0, 0);
    for _ in 0..1000 {
        let m = rng.gen_range(0..=10);
        let e: f64 = rng.gen_range(0.25..4.0);
        let r_n = rng.gen_range(1.0..20.0);
        let r = r_n + rng.gen_range(0.1..20.0);
        let th: f64 = rng.gen_range(0.0..PI);
        let (f0, fp0) = (th.sin(), e.sqrt() * th.cos());
        let (f1, fp1) = free_channel_transfer(m, e, r_n, r, f0, fp0, opts).unwrap();
        let q = f1 * f1 + fp1 * fp1 / e;
        displayed += (q < prufer_gap_bound(m, e, r_n, r, f0, fp0).unwrap() * (1.0 - 1e-9)) as usize;
        sharp += (q < prufer_gap_bound_sharp(m, e, r_n, r, f0, fp0).unwrap() * (1.0 - 1e-9)) as usize;
    }
    let mut cons: f64 = 0.0;
    for _ in 0..20 {
        let e: f64 = rng.gen_range(0.25..4.0);
        let (f0, fp0) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (f1, fp1) = free_channel_transfer(0, e, 1.0, 1.0 + rng.gen_range(1.0..30.0), f0, fp0, opts).unwrap();
        let q0 = f0 * f0 + fp0 * fp0 / e;
        cons = cons.max((f1 * f1 + fp1 * fp1 / e - q0).abs() / q0);
    }
    Outcome {
        pass: displayed == 0 && cons < 1e-10,
        detail: format!("violations of the stated bound {displayed}/1000 (sharp constant 1/√E: {sharp}/1000), m=0 drift {cons:.1e}"),
    }
}

fn c7_eigen_engine() -> Outcome {
    let cfg = load("eigcheck_schedule.json");
    let g = &cfg.eigcheck;
    let mut ok = 0;
    let mut total = 0;
    let mut first = String::new();
    for &e in &g.energies {
        for &gamma in &g.gammas {
            let rep = eigenvalue_absence_check(&g.schedule, e, gamma, g.constant).unwrap();
            total += 1;
            ok += rep.verdict as usize;
            if first.is_empty() {
                first = rep.certificates[0].margin.to_string();
            }
        }
    }
    let cover = g.schedule.count >= 5 && g.energies == [0.5, 1.0, 4.0] && g.gammas == [0.5, 1.0, 2.0];
    Outcome {
        pass: cover && ok == total,
        detail: format!("{ok}/{total} (E, γ) pairs positive and increasing over {} gaps; first margin {first}", g.schedule.count),
    }
}

fn c8_harmonic_measure() -> Outcome {
    let t = TriangleDomain::with_axis_probe(0.5, 2.0, 10.0, 0.4, 9.0).unwrap();
    let om = harmonic_measure_triangle(&t, 2.5e-3).unwrap();
    let mass = om.total_mass();
    let sym = om.symmetry_defect();
    let p = om.endpoint_exponent(0.05, 0.25).unwrap();
    let rel = (p - 9.0).abs() / 9.0;
    Outcome {
        pass: (mass - 1.0).abs() < 1e-3 && sym < 2e-3 && rel < 0.15,
        detail: format!("mass {mass:.6}, symmetry defect {sym:.1e}, endpoint exponent {p:.3} (target 9)"),
    }
}

/// `(2π)^{-3} (2k)^{-1} ∫_{|ξ|=k} |f̂|²` for a radial source.
fn fourier_density(f: &SourceSpec, k: f64) -> f64 {
    let mut br: Vec<f64> = f.profile.points().iter().map(|p| p[0]).collect();
    br.extend([0.0, 1.0]);
    br.sort_by(|a, b| a.partial_cmp(b).unwrap());
    br.dedup();
    let (rs, ws) = composite_gauss(&br, 24);
    let fhat: f64 = rs.iter().zip(&ws).map(|(&r, &w)| 4.0 * PI * w * r * (k * r).sin() / k * f.profile.eval(r)).sum();
    (2.0 * PI).powi(-3) / (2.0 * k) * 4.0 * PI * k * k * fhat * fhat
}

fn c9_entropy() -> Outcome {
    let cfg = load("entropy_three_layers.json");
    let pot = cfg.build_potential().unwrap();
    let f = cfg.build_source().unwrap();
    let e = &cfg.entropy;
    let t = choose_axis_probe(&f, e.a, e.b, e.gamma1, e.d_config, e.probe_samples).unwrap();
    let reps = entropy_lower_bound(&pot, &f, &t, e.n_max, e.options).unwrap();
    let jensen = reps.iter().all(|r| r.jensen_ok);
    let cs: Vec<f64> = reps.iter().filter_map(|r| r.j1_shape_constant).collect();
    let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |a, &x| (a.0.min(x), a.1.max(x)));
    let g = SphereGrid::new(8).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..7 {
        let k = 0.5 + 0.25 * i as f64;
        let s = spectral_density(&free_amplitude(&f, c(k, 0.0), &g).unwrap(), k);
        let o = fourier_density(&f, k);
        worst = worst.max((s - o).abs() / o);
    }
    Outcome {
        pass: jensen && !cs.is_empty() && hi < 2.0 * lo && worst < 1e-8,
        detail: format!("Jensen holds for n = 0..={}: {jensen}; J₁ shape constants in [{lo:.3e}, {hi:.3e}]; free density rel err {worst:.1e}", e.n_max),
    }
}

fn c10_sequences() -> Outcome {
    let s = load("seqbounds.json").seqbounds;
    let a = affine_trials(s.trials, s.seed);
    let p = product_trials(s.trials, s.seed);
    let v = poly_exp_max(1.0, 1.0).unwrap();
    let exact = (-1f64).exp();
    // refine around the maximiser x* = j/ε
    let (j, eps) = (3.5, 0.7);
    let top = poly_exp_max(j, eps).unwrap();
    let g = |x: f64| (j * x.ln() - eps * x).exp();
    let xs = j / eps;
    let mut sampled: f64 = 0.0;
    for level in 1..8 {
        let w = xs * 10f64.powi(-level);
        sampled = sampled.max((0..=100).map(|i| g(xs - w + 2.0 * w * i as f64 / 100.0)).fold(0.0, f64::max));
    }
    let gap = (top - sampled) / top;
    Outcome {
        pass: s.trials >= 10_000 && a.violations == 0 && p.violations == 0 && (v - exact).abs() < 1e-15 && (-1e-12..1e-6).contains(&gap),
        detail: format!("{} affine and {} product trials, violations {}/{}; max at (1,1) = {v:.16}; sup gap {gap:.1e}", a.trials, p.trials, a.violations, p.violations),
    }
}

fn c11_semigroups() -> Outcome {
    let g = SphereGrid::new(12).unwrap();
    let f = SphericalField::from_coeffs(g.clone(), &random_coeffs(12, 12, 7)).unwrap();
    let out = heat_flow(&f, c(1.7, 0.0), 0.8).unwrap().coeffs();
    let fin = f.coeffs();
    let iso = out.as_slice().iter().zip(fin.as_slice()).map(|(a, b)| (a.norm() - b.norm()).abs()).fold(0.0, f64::max);

    let g8 = SphereGrid::new(8).unwrap();
    let f8 = SphericalField::from_coeffs(g8.clone(), &random_coeffs(8, 8, 2)).unwrap();
    let mut u0: f64 = 0.0;
    for k in [c(1.0, 0.0), c(0.7, 0.4)] {
        for tau in [1.0, 3.0] {
            let want = f8.apply_degree_multiplier(|m| ((m * (m + 1)) as f64 / (2.0 * I * k * tau)).exp());
            for mode in [EvolutionMode::Diagonal, EvolutionMode::Grid] {
                let u = evolution_solve(&f8, &SparsePotential::empty(), k, tau, None, mode, OdeOptions::default()).unwrap();
                u0 = u0.max(u.sub(&want).sup_norm());
            }
        }
    }
    let k = c(0.9, 0.0);
    let sym = SparsePotential::symmetric(&[2.0, 6.0], &[0.5, -0.3]).unwrap();
    let ang = SparsePotential::new(vec![LayerSpec::new(
        0,
        2.0,
        LayerProfile::Harmonic {
            terms: vec![
                HarmonicTerm { degree: 0, order: 0, table: RadialTable::constant(2.0, 3.0, 0.3) },
                HarmonicTerm { degree: 2, order: 1, table: RadialTable::constant(2.0, 3.0, 0.3) },
            ],
        },
    )
    .unwrap()])
    .unwrap();
    let n0 = f8.l2_norm();
    let a = evolution_solve(&f8, &sym, k, 1.0, Some(20.0), EvolutionMode::Diagonal, OdeOptions::default()).unwrap();
    let b = evolution_solve(&f8, &ang, k, 1.0, None, EvolutionMode::Grid, OdeOptions::default()).unwrap();
    let cons = ((a.l2_norm() - n0).abs()).max((b.l2_norm() - n0).abs()) / n0;
    Outcome {
        pass: iso < 1e-12 && u0 < 1e-8 && cons < 1e-8,
        detail: format!("isometry {iso:.1e}, free evolution vs closed form {u0:.1e}, L² drift {cons:.1e}"),
    }
}

fn c12_randomized() -> Outcome {
    let k = c(1.0, 0.0);
    let theta = [0.0, 0.0, 1.0];
    let ests: Vec<_> = (0..5)
        .map(|n| {
            let r = 10.0 * 2f64.powi(n as i32);
            let e = BumpEnsemble::on_shell(r, 40, 0.4, 0.5, AmplitudeLaw::Rademacher, 7);
            let layer = LayerSpec::new(n, r, LayerProfile::RandomBumps { ensemble: e }).unwrap();
            randomized_wkb_moment(&[layer], k, theta, 2000, 3).unwrap()
        })
        .collect();
    let x: Vec<f64> = (0..5).map(|i| i as f64).collect();
    let y: Vec<f64> = ests.iter().map(|m| m.second_moment).collect();
    let b = slope(&x, &y);
    // slope standard error from the per-index standard errors
    let sxx = 10.0;
    let se = ests.iter().enumerate().map(|(i, m)| ((i as f64 - 2.0) * m.second_moment_stderr).powi(2)).sum::<f64>().sqrt() / sxx;
    let indep = ests.iter().all(|m| (m.second_moment - m.independent_sum).abs() < 3.0 * m.second_moment_stderr);
    Outcome {
        pass: b <= 3.0 * se && indep,
        detail: format!("second-moment slope {b:.2e} (3 s.e. = {:.2e}); independence decomposition holds: {indep}", 3.0 * se),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("free amplitude closed form", c1_free_amplitude),
        ("O_t diagonalization", c2_o_t_diagonal),
        ("parametrix decay", c3_parametrix),
        ("desk-scale recursion vs oracle", c4_desk_scale),
        ("kappa/beta scaling", c5_kappa_beta),
        ("Pruefer gap bound", c6_prufer),
        ("eigenvalue-absence engine", c7_eigen_engine),
        ("harmonic measure", c8_harmonic_measure),
        ("entropy chain", c9_entropy),
        ("sequence envelopes", c10_sequences),
        ("semigroup checks", c11_semigroups),
        ("randomized model", c12_randomized),
    ];
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!("panicked: {}", e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()),
        });
        passed += out.pass as usize;
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name}: {} [{:.1} s]", i + 1, out.detail, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {passed}/12 criteria pass");
}

//! Subcommand orchestration. Each run returns its CSV tables in memory so
//! the binary only has to write files and metadata.

use clap::ValueEnum;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::io::{num, signed_tower, tower, CsvTable};
use crate::potential::validate_log_radii;
use crate::propagate::{parametrix_residual, propagate_recursion};
use crate::radial::{eigenvalue_absence_check, radial_amplitude_oracle};
use crate::seqbounds::{affine_trials, poly_exp_max, product_trials};
use crate::spectral::{choose_axis_probe, entropy_with_measure, harmonic_measure_triangle, Side, TriangleDomain};
use crate::sphere::SphereGrid;
use crate::wkb::{wkb_exponent_direct, wkb_exponent_symmetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Validate,
    Propagate,
    Wkb,
    Parametrix,
    Oracle,
    Entropy,
    Eigcheck,
    Seqbounds,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Validate => "validate",
            Subcommand::Propagate => "propagate",
            Subcommand::Wkb => "wkb",
            Subcommand::Parametrix => "parametrix",
            Subcommand::Oracle => "oracle",
            Subcommand::Entropy => "entropy",
            Subcommand::Eigcheck => "eigcheck",
            Subcommand::Seqbounds => "seqbounds",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// `(file name, CSV text)`.
    pub tables: Vec<(String, String)>,
    /// Headline results copied into the metadata file.
    pub summary: Value,
}

fn bool_cell(b: bool) -> String {
    b.to_string()
}

fn k_cells(k: Complex64) -> [String; 2] {
    [num(k.re), num(k.im)]
}

pub fn run(cfg: &ExperimentConfig, cmd: Subcommand) -> Result<RunOutput> {
    match cmd {
        Subcommand::Validate => run_validate(cfg),
        Subcommand::Propagate => run_propagate(cfg),
        Subcommand::Wkb => run_wkb(cfg),
        Subcommand::Parametrix => run_parametrix(cfg),
        Subcommand::Oracle => run_oracle(cfg),
        Subcommand::Entropy => run_entropy(cfg),
        Subcommand::Eigcheck => run_eigcheck(cfg),
        Subcommand::Seqbounds => run_seqbounds(cfg),
    }
}

fn run_validate(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let logs = match &cfg.validate.log_radii {
        Some(l) => l.clone(),
        None => cfg.build_potential()?.radii().iter().map(|r| r.ln()).collect(),
    };
    let rep = validate_log_radii(&logs, cfg.validate.alpha)?;
    let mut t = CsvTable::new(&[
        "n",
        "log_r",
        "log_r_next",
        "log_sigma",
        "gap_doubles",
        "sigma_below_exp",
        "ratio_below_exp",
        "gap_exceeds_index",
        "alpha_schedule",
        "all",
    ]);
    for f in &rep.flags {
        t.row(&[
            f.index.to_string(),
            num(logs[f.index]),
            num(logs[f.index + 1]),
            num(f.log_sigma),
            bool_cell(f.gap_doubles),
            bool_cell(f.sigma_below_exp),
            bool_cell(f.ratio_below_exp),
            bool_cell(f.gap_exceeds_index),
            bool_cell(f.alpha_schedule),
            bool_cell(f.all()),
        ]);
    }
    Ok(RunOutput { tables: vec![("validate.csv".into(), t.render())], summary: json!({ "all_ok": rep.all_ok() }) })
}

fn run_propagate(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let pot = cfg.build_potential()?;
    let f = cfg.build_source()?;
    let grid = SphereGrid::new(cfg.grid_degree)?;
    let mut t = CsvTable::new(&["tau", "eps", "n", "sup_a", "sup_reduced", "nu", "log_g", "log_g_prime", "log_eta_bound", "envelope_ok"]);
    let mut max_nu: f64 = 0.0;
    let mut all_ok = true;
    for k in cfg.k_grid.points() {
        for r in propagate_recursion(&f, &pot, k, &grid, cfg.propagate)? {
            max_nu = max_nu.max(r.nu);
            all_ok &= r.envelope_ok;
            let [tau, eps] = k_cells(k);
            t.row(&[
                tau,
                eps,
                r.n.to_string(),
                num(r.a.sup_norm()),
                num(r.reduced.sup_norm()),
                num(r.nu),
                num(r.envelope.log_g),
                num(r.envelope.log_gprime),
                num(r.log_eta_bound),
                bool_cell(r.envelope_ok),
            ]);
        }
    }
    Ok(RunOutput {
        tables: vec![("propagate.csv".into(), t.render())],
        summary: json!({ "max_nu": max_nu, "envelopes_ok": all_ok }),
    })
}

fn run_wkb(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let pot = cfg.build_potential()?;
    let grid = SphereGrid::new(cfg.grid_degree)?;
    let symmetric = pot.is_symmetric();
    let mut t = CsvTable::new(&["tau", "eps", "n", "node", "re_log", "im_log", "re_log_1d", "im_log_1d"]);
    let mut max_gap: f64 = 0.0;
    for k in cfg.k_grid.points() {
        for n in 0..=pot.len() {
            let pot_n = pot.truncated(n);
            let field = wkb_exponent_direct(&pot_n, k, &grid)?;
            let one_d = if symmetric { Some(wkb_exponent_symmetric(&pot_n, k)?) } else { None };
            for (i, v) in field.values().iter().enumerate() {
                let [tau, eps] = k_cells(k);
                let (re1, im1) = match one_d {
                    Some(w) => {
                        max_gap = max_gap.max((v - w).norm());
                        (num(w.re), num(w.im))
                    }
                    None => (String::new(), String::new()),
                };
                t.row(&[tau, eps, n.to_string(), i.to_string(), num(v.re), num(v.im), re1, im1]);
            }
        }
    }
    let summary = if symmetric { json!({ "max_route_gap": max_gap }) } else { json!({}) };
    Ok(RunOutput { tables: vec![("wkb.csv".into(), t.render())], summary })
}

fn run_parametrix(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let p = &cfg.parametrix;
    let mut t = CsvTable::new(&["tau", "eps", "m", "t", "residual"]);
    for k in cfg.k_grid.points() {
        for m in 0..=p.m_max {
            for &tv in &p.t_values {
                let [tau, eps] = k_cells(k);
                t.row(&[tau, eps, m.to_string(), num(tv), num(parametrix_residual(m, tv, k)?)]);
            }
        }
    }
    Ok(RunOutput { tables: vec![("parametrix.csv".into(), t.render())], summary: json!({}) })
}

fn run_oracle(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let pot = cfg.build_potential()?;
    let f = cfg.build_source()?;
    let mut t = CsvTable::new(&["tau", "eps", "n", "re_a", "im_a"]);
    for k in cfg.k_grid.points() {
        for n in 0..=pot.len() {
            let a = radial_amplitude_oracle(&f, &pot.truncated(n), k)?;
            let [tau, eps] = k_cells(k);
            t.row(&[tau, eps, n.to_string(), num(a.re), num(a.im)]);
        }
    }
    Ok(RunOutput { tables: vec![("oracle.csv".into(), t.render())], summary: json!({}) })
}

fn run_entropy(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let pot = cfg.build_potential()?;
    let f = cfg.build_source()?;
    let e = &cfg.entropy;
    let tri = match e.probe_fraction {
        Some(frac) => TriangleDomain::with_axis_probe(e.a, e.b, e.gamma1, frac, e.d_config)?,
        None => choose_axis_probe(&f, e.a, e.b, e.gamma1, e.d_config, e.probe_samples)?,
    };
    if tri.a <= 0.0 {
        return Err(LabError::Precondition("base interval must lie in k > 0".into()));
    }
    let omega = harmonic_measure_triangle(&tri, e.options.spacing)?;
    let reports = entropy_with_measure(&pot, &f, &omega, e.n_max.min(pot.len()), e.options)?;
    let mut t = CsvTable::new(&["n", "j1", "j2", "lhs", "jensen_ok", "chain_lhs", "certified_bound", "threshold"]);
    for r in &reports {
        t.row(&[
            r.n.to_string(),
            num(r.j1),
            num(r.j2),
            num(r.lhs),
            bool_cell(r.jensen_ok),
            num(r.chain_lhs),
            num(r.certified_bound),
            num(r.threshold),
        ]);
    }
    let mut h = CsvTable::new(&["s", "omega", "side"]);
    for node in &omega.nodes {
        let side = match node.side {
            Side::Base => "base",
            Side::Right => "right",
            Side::Left => "left",
        };
        h.row(&[num(node.s), num(node.mass), side.to_string()]);
    }
    let summary = json!({
        "probe": [tri.probe.re, tri.probe.im],
        "total_mass": omega.total_mass(),
        "symmetry_defect": omega.symmetry_defect(),
        "jensen_ok": reports.iter().all(|r| r.jensen_ok),
        "lhs_above_threshold": reports.iter().all(|r| r.lhs >= r.threshold),
    });
    Ok(RunOutput {
        tables: vec![("entropy.csv".into(), t.render()), ("harmonic_measure.csv".into(), h.render())],
        summary,
    })
}

fn run_eigcheck(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let g = &cfg.eigcheck;
    let mut t = CsvTable::new(&["energy", "gamma", "n", "log_r", "gap", "threshold", "margin", "verdict"]);
    let mut verdicts = Vec::new();
    for &energy in &g.energies {
        for &gamma in &g.gammas {
            let rep = eigenvalue_absence_check(&g.schedule, energy, gamma, g.constant)?;
            for c in &rep.certificates {
                t.row(&[
                    num(energy),
                    num(gamma),
                    c.n.to_string(),
                    tower(&c.log_gap_start),
                    tower(&c.log_gap_end),
                    tower(&c.loglog_min_gap),
                    signed_tower(&c.margin),
                    bool_cell(c.contradiction),
                ]);
            }
            verdicts.push(json!({ "energy": energy, "gamma": gamma, "verdict": rep.verdict }));
        }
    }
    Ok(RunOutput { tables: vec![("eigcheck.csv".into(), t.render())], summary: json!({ "constant": g.constant, "reports": verdicts }) })
}

fn run_seqbounds(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let s = &cfg.seqbounds;
    let mut t = CsvTable::new(&["suite", "trials", "violations", "worst_ratio"]);
    let affine = affine_trials(s.trials, s.seed);
    let product = product_trials(s.trials, s.seed);
    for (name, sum) in [("affine", affine), ("product", product)] {
        t.row(&[name.to_string(), sum.trials.to_string(), sum.violations.to_string(), num(sum.worst_ratio)]);
    }
    let mut p = CsvTable::new(&["j", "eps", "max"]);
    for &(j, e) in &s.poly_exp {
        p.row(&[num(j), num(e), num(poly_exp_max(j, e)?)]);
    }
    Ok(RunOutput {
        tables: vec![("seqbounds.csv".into(), t.render()), ("poly_exp.csv".into(), p.render())],
        summary: json!({ "violations": affine.violations + product.violations }),
    })
}

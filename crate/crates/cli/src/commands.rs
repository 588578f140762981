//! Subcommand bodies. Each one computes everything first and writes files last.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use qpo_core::moments::density_matrix;
use qpo_core::noise::{k_bb_grid_samples, k_tb_grid_samples};
use qpo_core::oracles::{fdt_equilibrium_momentum, fdt_equilibrium_variance, OracleReport};
use qpo_core::propagator::solve_x_fundamental;
use qpo_core::spectral::{build_matsubara, build_matsubara_with_terms, equilibrium_moments, gamma_kernel};
use qpo_core::validation::{acceptance_suite, fast_suite, SuiteOptions};
use qpo_core::{validate_params, GaussianState, KernelPart, MatsubaraTable, MomentOptions, Simulation};

use crate::config::{DensityDump, RunConfig};
use crate::error::CliError;
use crate::output::{csv_bytes, json_bytes, num, write_all, Pending};

fn echo_json(cfg: &RunConfig) -> Value {
    let mut m = Map::new();
    for e in &cfg.echo {
        m.insert(e.key.clone(), json!({ "value": e.value, "line": e.line }));
    }
    Value::Object(m)
}

fn check_physics(sim: &Simulation) -> Result<f64, CliError> {
    Ok(validate_params(&sim.params, &sim.drive).into_result()?)
}

fn table(sim: &Simulation) -> Result<MatsubaraTable, CliError> {
    Ok(match sim.matsubara_terms {
        Some(n) => build_matsubara_with_terms(&sim.params, &sim.grid, n),
        None => build_matsubara(&sim.params, &sim.grid, sim.matsubara_tol)?,
    })
}

fn file(cfg: &RunConfig, out: Option<&Path>, name: &str) -> PathBuf {
    out.unwrap_or(&cfg.output.dir).join(format!("{}_{name}", cfg.output.prefix))
}

fn moments_rows(states: &[GaussianState]) -> Vec<Vec<String>> {
    states
        .iter()
        .map(|s| {
            vec![num(s.time), num(s.mean_q), num(s.mean_p), num(s.sqq), num(s.sqp), num(s.spp), num(s.uncertainty_product()), s.flags().to_string()]
        })
        .collect()
}

fn density_rows(s: &GaussianState, hbar: f64, points: usize, extent: f64) -> Result<Vec<Vec<String>>, CliError> {
    let cond = s.spp - s.sqp * s.sqp / s.sqq;
    if !(cond > 0.0) {
        return Err(CliError::Numerical(format!("density matrix at t = {} has non-positive conditional momentum variance {cond}", s.time)));
    }
    let axis = |c: f64, half: f64| -> Vec<f64> { (0..points).map(|i| c + half * (2.0 * i as f64 / (points - 1) as f64 - 1.0)).collect() };
    let r = axis(s.mean_q, extent * s.sqq.sqrt());
    let x = axis(0.0, extent * hbar / cond.sqrt());
    let rho = density_matrix(s, hbar, &r, &x)?;
    let mut rows = Vec::with_capacity(points * points);
    for (i, row) in rho.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            rows.push(vec![num(r[i]), num(x[j]), num(z.re), num(z.im)]);
        }
    }
    Ok(rows)
}

/// Runs the pipeline and writes the moments CSV, the JSON summary and any requested dumps.
pub fn simulate(cfg: &RunConfig, dump_fundamentals: bool, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let sim = &cfg.simulation;
    let mass = check_physics(sim)?;
    if cfg.output.density != DensityDump::None && cfg.output.density_points < 2 {
        return Err(CliError::Config("key `output.density_points` must be at least 2".into()));
    }
    let prep = sim.prepare()?;
    let traj = sim.run_prepared(&prep)?;
    let mut files = Vec::new();

    let header = ["t", "meanQ", "meanP", "sqq", "sqp", "spp", "uncertaintyProduct", "flags"];
    files.push(Pending { path: file(cfg, out, "moments.csv"), bytes: csv_bytes(&header, moments_rows(&traj.states)) });

    if dump_fundamentals || cfg.output.fundamentals {
        let f = &prep.fundamentals;
        let rows = (0..f.phi1.len()).map(|i| vec![num(i as f64 * f.h), num(f.phi1[i]), num(f.dphi1[i]), num(f.phi2[i]), num(f.dphi2[i])]);
        files.push(Pending { path: file(cfg, out, "fundamentals.csv"), bytes: csv_bytes(&["s", "phi1", "dphi1", "phi2", "dphi2"], rows) });
        for &k in sim.grid.snapshots.iter().filter(|&&k| k > 0) {
            let x = solve_x_fundamental(f, &prep.kernel, k)?;
            let rows = (0..=k).map(|i| vec![num(i as f64 * f.h), num(x.phix1[i]), num(x.dphix1[i]), num(x.phix2[i]), num(x.dphix2[i])]);
            files.push(Pending { path: file(cfg, out, &format!("phix_{k:06}.csv")), bytes: csv_bytes(&["s", "phix1", "dphix1", "phix2", "dphix2"], rows) });
        }
    }

    let dumped: Vec<(usize, &GaussianState)> = match cfg.output.density {
        DensityDump::None => Vec::new(),
        DensityDump::Last => sim.grid.snapshots.iter().copied().zip(&traj.states).last().into_iter().collect(),
        DensityDump::All => sim.grid.snapshots.iter().copied().zip(&traj.states).collect(),
    };
    for (k, s) in dumped {
        let rows = density_rows(s, sim.params.hbar, cfg.output.density_points, cfg.output.density_extent)?;
        files.push(Pending { path: file(cfg, out, &format!("density_{k:06}.csv")), bytes: csv_bytes(&["r", "x", "re", "im"], rows) });
    }

    let mut warnings = cfg.warnings.clone();
    for w in traj.warnings {
        if !warnings.contains(&w) {
            warnings.push(w);
        }
    }
    let names: Vec<String> = files.iter().map(|f| f.path.file_name().unwrap().to_string_lossy().into_owned()).collect();
    let summary = json!({
        "command": "simulate",
        "config": echo_json(cfg),
        "derived": {
            "renormalized_mass": mass,
            "h": sim.grid.h(),
            "lambda": traj.lambda,
            "omega_eq": traj.omega_eq,
            "matsubara_terms": traj.matsubara_terms,
            "matsubara_tol_achieved": traj.matsubara_tol,
            "fundamentals_convergence": traj.fundamentals_convergence,
            "params_hash": format!("{:016x}", traj.params_hash),
            "snapshots": traj.states.len(),
        },
        "warnings": warnings,
        "outputs": names,
    });
    files.push(Pending { path: file(cfg, out, "summary.json"), bytes: json_bytes(&summary) });

    write_all(&files)?;
    Ok(files.into_iter().map(|f| f.path).collect())
}

/// Damping and noise kernels on the grid, one CSV per quantity with columns s, value, n.
pub fn kernels(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let sim = &cfg.simulation;
    check_physics(sim)?;
    let (p, grid) = (&sim.params, &sim.grid);
    let tab = table(sim)?;
    let h = grid.h();
    let n = grid.n_steps;
    let header = ["s", "value", "n"];
    let single = |v: &[f64]| csv_bytes(&header, v.iter().enumerate().map(|(i, x)| vec![num(i as f64 * h), num(*x), "0".to_string()]));
    let indexed = |v: &[Vec<f64>]| {
        csv_bytes(&header, v.iter().enumerate().flat_map(|(m, col)| col.iter().enumerate().map(move |(i, x)| vec![num(i as f64 * h), num(*x), m.to_string()])))
    };

    let gamma = gamma_kernel(KernelPart::Total, p);
    let g: Vec<f64> = (0..=n).map(|i| gamma.smooth(i as f64 * h)).collect();
    let mut files = vec![
        Pending { path: file(cfg, out, "gamma.csv"), bytes: single(&g) },
        Pending { path: file(cfg, out, "zeta.csv"), bytes: indexed(&tab.zeta_s) },
        Pending { path: file(cfg, out, "g.csv"), bytes: indexed(&tab.g_s) },
        Pending { path: file(cfg, out, "f.csv"), bytes: indexed(&tab.f_s) },
        Pending { path: file(cfg, out, "k_tb.csv"), bytes: single(&k_tb_grid_samples(&tab, p, h, n + 1)) },
    ];
    if p.bb_active() {
        let (th, vac) = k_bb_grid_samples(p, &sim.bb, h, n + 1)?;
        files.push(Pending { path: file(cfg, out, "k_bb_thermal.csv"), bytes: single(&th) });
        files.push(Pending { path: file(cfg, out, "k_bb_vacuum.csv"), bytes: single(&vac) });
    }
    let summary = json!({
        "command": "kernels",
        "config": echo_json(cfg),
        "derived": {
            "gamma_local_coefficient": gamma.local_coeff,
            "matsubara_terms": tab.n_terms,
            "stored_terms": tab.zeta_s.len(),
        },
        "warnings": cfg.warnings,
    });
    files.push(Pending { path: file(cfg, out, "kernels.json"), bytes: json_bytes(&summary) });
    write_all(&files)?;
    Ok(files.into_iter().map(|f| f.path).collect())
}

/// Static equilibrium moments with the fluctuation–dissipation cross-check.
pub fn equilibrium(cfg: &RunConfig) -> Result<Value, CliError> {
    let sim = &cfg.simulation;
    check_physics(sim)?;
    let p = &sim.params;
    let tab = table(sim)?;
    let (qq, pp) = equilibrium_moments(&tab, p);
    let fdt = if p.gamma_tb > 0.0 {
        let (q, qe) = fdt_equilibrium_variance(p);
        let (m, me) = fdt_equilibrium_momentum(p);
        json!({ "sqq": q, "sqq_error": qe, "spp": m, "spp_error": me })
    } else {
        Value::Null
    };
    Ok(json!({
        "command": "equilibrium",
        "config": echo_json(cfg),
        "lambda": tab.lambda_tb,
        "omega_eq": tab.omega_eq,
        "sqq": qq,
        "spp": pp,
        "sqp": 0.0,
        "uncertainty_product": qq * pp,
        "matsubara_terms": tab.n_terms,
        "matsubara_tol_achieved": tab.achieved_tol,
        "tail_applied": tab.tail_applied,
        "fdt_quadrature": fdt,
    }))
}

/// Fast corners, or the full acceptance suite with optional tampering.
pub fn validate(full: bool, steps: Option<usize>, printed_qq: bool) -> Vec<OracleReport> {
    if full {
        acceptance_suite(&SuiteOptions { steps_override: steps, moments: MomentOptions { printed_qq, ..Default::default() } })
    } else {
        fast_suite()
    }
}

pub fn reports_json(reports: &[OracleReport]) -> Value {
    Value::Array(
        reports
            .iter()
            .map(|r| {
                json!({
                    "name": r.name,
                    "passed": r.passed,
                    "error": r.max_rel,
                    "tolerance": r.tolerance,
                    "abs": r.max_abs,
                    "seconds": r.runtime.as_secs_f64(),
                    "detail": r.detail,
                })
            })
            .collect(),
    )
}

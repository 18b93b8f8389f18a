//! Subcommand implementations: run, sweep, verify, compare.

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use prandtl_core::calculus::{
    generator_family, hardy_lower, hardy_upper, sobolev_ratio, trace_bound,
};
use prandtl_core::grid::{build_grid, Field};
use prandtl_core::monitors::{
    energy_ode_bound, fit_c_energy, fit_c_linf, fit_c_lower, lifespan_estimate,
    linf_bounds_check, lower_bound_check, s4_smallness_diagnostic, EnergyTrace, FittedConstants,
};
use prandtl_core::scenario::run_recorded;
use prandtl_core::solver::{make_standard_datum, picard_solve, SolverState};
use prandtl_core::verify::{
    a_evolution_residual, boundary_reduction_residual, comparison_run, eps_convergence_study,
    gs_evolution_residual, momentum_residual, truncation_convergence_study, BoundaryLevel,
};
use prandtl_core::{io as fio, norms, Error, Result};

use crate::config::RunConfig;
use crate::manifest::{RunManifest, VerdictSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_trace_csv(path: &Path, trace: &EnergyTrace) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "t,e_g,e_hs,i_sup,min_sigma_omega,f_val,wall_sup_u,bdry_k0,bdry_k1,bdry_k2,in_class"
    )?;
    for k in 0..trace.len() {
        let bdry = trace
            .boundary_residuals
            .get(k)
            .copied()
            .unwrap_or([f64::NAN; 3]);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            trace.times[k],
            trace.e_g[k],
            trace.e_hs[k],
            trace.i_sup[k],
            trace.min_sigma_omega[k],
            trace.f_vals[k],
            trace.wall_sup_u[k],
            bdry[0],
            bdry[1],
            bdry[2],
            trace.in_class[k] as u8
        )?;
    }
    Ok(())
}

fn read_trace_csv(path: &Path, params: norms::NormParams, dxs_outer_l2: f64) -> Result<EnergyTrace> {
    let text = std::fs::read_to_string(path)?;
    let mut trace = EnergyTrace {
        params: Some(params),
        dxs_outer_l2,
        ..Default::default()
    };
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            return Err(Error::Format(format!("trace row {ln} has {} columns", cols.len())));
        }
        let f = |i: usize| -> Result<f64> {
            cols[i]
                .parse()
                .map_err(|e| Error::Format(format!("trace row {ln} col {i}: {e}")))
        };
        trace.times.push(f(0)?);
        trace.e_g.push(f(1)?);
        trace.e_hs.push(f(2)?);
        trace.i_sup.push(f(3)?);
        trace.min_sigma_omega.push(f(4)?);
        trace.f_vals.push(f(5)?);
        trace.wall_sup_u.push(f(6)?);
        trace.boundary_residuals.push([f(7)?, f(8)?, f(9)?]);
        trace.in_class.push(cols[10].trim() == "1");
    }
    Ok(trace)
}

/// Builds the initial state of the configured scenario.
fn initial_state(config: &RunConfig) -> Result<(SolverState, norms::NormParams)> {
    let spec = config.grid_spec()?;
    let grid = build_grid(spec)?;
    let params = config.norm_params()?;
    let (omega0, outer) =
        make_standard_datum(&grid, &params, config.datum.amplitude, config.datum.scale)?;
    let state = SolverState::new(omega0, outer, config.paper.epsilon, params)?;
    Ok((state, params))
}

/// Executes the configured scenario: snapshots, trace, monitor verdicts and
/// a manifest land in `out`. Exit 0 on success, 2 when a monitor flags the
/// run (it still completes), 1 on solver or config errors.
pub fn cmd_run(config: &RunConfig, out: &Path) -> i32 {
    match run_inner(config, out) {
        Ok(violations) => {
            if violations {
                EXIT_VIOLATION
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            // Record the failure in a manifest so sweeps can distinguish
            // "ran and failed a bound" from "did not run".
            let mut manifest = RunManifest::new(config);
            manifest.verdict = VerdictSummary {
                completed: false,
                error: Some(format!("{e}")),
                ..Default::default()
            };
            if ensure_dir(out).is_ok() {
                let _ = manifest.write(out);
            }
            EXIT_ERROR
        }
    }
}

fn run_inner(config: &RunConfig, out: &Path) -> Result<bool> {
    config.validate()?;
    let started = Instant::now();
    ensure_dir(out)?;
    ensure_dir(&out.join("fields"))?;
    ensure_dir(&out.join("verdicts"))?;

    let (state, params) = initial_state(config)?;
    let scheme = config.scheme_config()?;
    let burn_steps = (config.scheme.burn_in / config.scheme.dt).round() as usize;
    let state = prandtl_core::scenario::burn_in(state, &scheme, burn_steps)?;
    let n_steps = (config.scheme.t_end / config.scheme.dt).round() as usize;
    let result = run_recorded(state, &scheme, n_steps, config.output.sample_every, true)?;

    // Persist snapshots and traces.
    for (k, snap) in result.snapshots.iter().enumerate() {
        fio::write_field(
            &out.join(format!("fields/omega_{k:06}.bin")),
            &snap.omega,
            snap.t,
        )?;
    }
    fio::write_profile(&out.join("fields/U.bin"), &result.final_state.outer)?;
    fio::write_profile(&out.join("fields/px.bin"), &result.final_state.px)?;
    write_trace_csv(&out.join("trace.csv"), &result.trace)?;

    // Monitor verdicts with split-sample fitted constants.
    let (verdict_json, violations) = monitor_verdicts(&result.trace, &result.snapshots[0], &params)?;
    std::fs::write(
        out.join("verdicts/monitors.json"),
        serde_json::to_string_pretty(&verdict_json).map_err(|e| Error::Format(e.to_string()))?,
    )?;

    // Resolved config alongside the manifest so the run can be replayed
    // with `run --config <dir>/config.toml`.
    std::fs::write(out.join("config.toml"), config.to_toml())?;

    let mut manifest = RunManifest::new(config);
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    manifest.verdict.completed = true;
    manifest.verdict.final_e_g = result.trace.e_g.last().copied();
    manifest.verdict.monitor_violations = violations.clone();
    if let Some(t) = verdict_json["lifespan"]["t"].as_f64() {
        manifest.verdict.lifespan = Some(t);
    }
    if params.low_margin() {
        manifest
            .verdict
            .notes
            .push("low truncation margin: sigma - gamma - 1/2 < 1/2".into());
    }
    manifest.write(out)?;
    Ok(!violations.is_empty())
}

fn monitor_verdicts(
    trace: &EnergyTrace,
    initial: &SolverState,
    params: &norms::NormParams,
) -> Result<(serde_json::Value, Vec<String>)> {
    let mut violations = Vec::new();
    if trace.len() < 4 {
        return Ok((
            serde_json::json!({ "status": "insufficient trace", "samples": trace.len() }),
            violations,
        ));
    }
    let half = trace.len() / 2;

    // The Sobolev constant is measured on a small family over this grid.
    let sobolev_c = {
        let mut sup: f64 = 0.0;
        for gp in generator_family(12) {
            let f = gp.build(initial.grid());
            if let Ok(r) = sobolev_ratio(&f) {
                sup = sup.max(r);
            }
        }
        sup.max(1e-12)
    };

    let consts = FittedConstants {
        c_energy: fit_c_energy(trace, half),
        c_linf: fit_c_linf(trace, sobolev_c, half).max(fit_c_lower(trace, half)),
        lambda: 0.0,
        sobolev_c,
    };

    let energy = energy_ode_bound(trace, &consts);
    if let Some(t) = energy.violated_at {
        violations.push(format!("energy bound violated at t = {t}"));
    }
    let linf = linf_bounds_check(trace, &consts);
    if let Some(t) = linf.violated_at {
        violations.push(format!("weighted L-infinity bound violated at t = {t}"));
    }
    let lower = lower_bound_check(trace, &consts);
    if let Some(t) = lower.violated_at {
        violations.push(format!("weighted lower bound violated at t = {t}"));
    }

    let norms_report = norms::norm_report(&initial.omega, &initial.u, &initial.outer, params)?;
    let lifespan = lifespan_estimate(&norms_report, &initial.outer, &consts, params);
    let smallness = s4_smallness_diagnostic(norms_report.h_s_gamma_g, params, consts.c_energy);

    let json = serde_json::json!({
        "constants": consts,
        "energy": { "violated_at": energy.violated_at, "ode_blowup_at": energy.ode_blowup_at },
        "linf": { "violated_at": linf.violated_at },
        "lower": { "violated_at": lower.violated_at, "suspended_from": lower.suspended_from },
        "lifespan": { "t1": lifespan.t1, "t2": lifespan.t2, "t3": lifespan.t3, "t": lifespan.t },
        "s4_smallness_warning": smallness,
    });
    Ok((json, violations))
}

/// Cartesian sweep over the configured parameter grids; one run directory
/// per cell, an aggregate CSV, and a sweep manifest carrying the aggregate
/// hash. Cell failures are recorded and do not stop the sweep.
pub fn cmd_sweep(config: &RunConfig, out: &Path) -> i32 {
    match sweep_inner(config, out) {
        Ok(all_ok) => {
            if all_ok {
                EXIT_OK
            } else {
                EXIT_VIOLATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn sweep_inner(config: &RunConfig, out: &Path) -> Result<bool> {
    config.validate()?;
    ensure_dir(out)?;
    let sweep = config.sweep.clone().unwrap_or_default();
    let eps_list = if sweep.epsilon.is_empty() {
        vec![config.paper.epsilon]
    } else {
        sweep.epsilon.clone()
    };
    let r_list: Vec<Option<f64>> = if sweep.r.is_empty() {
        vec![config.paper.r]
    } else {
        sweep.r.iter().map(|&r| Some(r)).collect()
    };
    let grids = if sweep.grids.is_empty() {
        vec![[config.grid.nx, config.grid.ny]]
    } else {
        sweep.grids.clone()
    };

    let mut cells = Vec::new();
    for &eps in &eps_list {
        for &r in &r_list {
            for &g in &grids {
                let mut cell = config.clone();
                cell.sweep = None;
                cell.paper.epsilon = eps;
                cell.paper.r = r;
                cell.grid.nx = g[0];
                cell.grid.ny = g[1];
                cells.push(cell);
            }
        }
    }

    let threads: usize = std::env::var("PRANDTL_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(8)
        .clamp(1, 64);

    let results: Vec<(usize, i32)> = {
        let mut results = vec![(0usize, 0i32); cells.len()];
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results_mutex = std::sync::Mutex::new(&mut results);
        std::thread::scope(|scope| {
            for _ in 0..threads.min(cells.len().max(1)) {
                scope.spawn(|| loop {
                    let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if idx >= cells.len() {
                        break;
                    }
                    let cell_dir = out.join(format!("cell_{idx:03}"));
                    let code = cmd_run(&cells[idx], &cell_dir);
                    results_mutex.lock().unwrap()[idx] = (idx, code);
                });
            }
        });
        results
    };

    // Aggregate, ordered by cell index for determinism.
    let mut agg = String::from("cell,eps,R,nx,ny,exit,final_e_g,config_hash\n");
    let mut all_ok = true;
    for (idx, code) in &results {
        let cell = &cells[*idx];
        let cell_dir = out.join(format!("cell_{idx:03}"));
        let final_e_g = RunManifest::read(&cell_dir)
            .ok()
            .and_then(|m| m.verdict.final_e_g)
            .map(|v| format!("{v}"))
            .unwrap_or_else(|| "nan".into());
        if *code != EXIT_OK {
            all_ok = false;
        }
        agg.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            idx,
            cell.paper.epsilon,
            cell.paper.r.map(|r| r.to_string()).unwrap_or_else(|| "none".into()),
            cell.grid.nx,
            cell.grid.ny,
            code,
            final_e_g,
            cell.content_hash(),
        ));
    }
    std::fs::write(out.join("aggregate.csv"), &agg)?;

    let agg_hash = {
        use sha2::Digest;
        let mut h = sha2::Sha256::new();
        h.update(agg.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect::<String>()
    };
    std::fs::write(
        out.join("sweep_manifest.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "cells": cells.len(),
            "aggregate_hash": agg_hash,
            "config_hash": config.content_hash(),
        }))
        .map_err(|e| Error::Format(e.to_string()))?,
    )?;
    Ok(all_ok)
}

/// Dispatch for `verify --suite <name>`.
pub fn cmd_verify(suite: &str, run_dir: Option<&Path>, config: &RunConfig, out: &Path) -> i32 {
    let result = match suite {
        "inequalities" => verify_inequalities(config, out),
        "monitors" => match run_dir {
            Some(dir) => verify_monitors(dir, out),
            None => Err(Error::InvalidSpec("--run <dir> is required for monitors".into())),
        },
        "structure" => match run_dir {
            Some(dir) => verify_structure(dir, out),
            None => Err(Error::InvalidSpec("--run <dir> is required for structure".into())),
        },
        "compare" => cmd_compare_inner(config, out).map(|ok| {
            if ok {
                EXIT_OK
            } else {
                EXIT_VIOLATION
            }
        }),
        "convergence" => verify_convergence(config, out),
        other => {
            eprintln!("unknown suite '{other}' (expected inequalities|monitors|structure|compare|convergence)");
            return EXIT_USAGE;
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn verify_inequalities(config: &RunConfig, out: &Path) -> Result<i32> {
    ensure_dir(out)?;
    let grid = build_grid(config.grid_spec()?)?;
    let mut csv = String::from("inequality,field_id,lhs,rhs,holds\n");
    let mut violations = 0usize;
    let mut applicable = 0usize;
    let mut sob_sup: f64 = 0.0;

    for gp in generator_family(100) {
        let f = gp.build(&grid);
        let id = gp.id();
        let rows = [
            ("hardy_upper", hardy_upper(&f, 0.0)?, true),
            ("hardy_lower", hardy_lower(&f, -1.0)?, true),
        ];
        for (name, check, _) in rows {
            let usable = check.decay_ok;
            if usable {
                applicable += 1;
                if !check.holds {
                    violations += 1;
                }
            }
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                name,
                id,
                check.lhs,
                check.rhs,
                if usable { check.holds } else { true }
            ));
        }
        let tr = trace_bound(&f);
        applicable += 1;
        if !tr.holds {
            violations += 1;
        }
        csv.push_str(&format!("trace_bound,{},{},{},{}\n", id, tr.lhs, tr.rhs, tr.holds));
        if let Ok(r) = sobolev_ratio(&f) {
            sob_sup = sob_sup.max(r);
        }
    }
    std::fs::write(out.join("inequalities.csv"), &csv)?;
    std::fs::write(
        out.join("inequalities.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "fields": 100,
            "applicable_checks": applicable,
            "violations": violations,
            "sobolev_ratio_sup": sob_sup,
        }))
        .map_err(|e| Error::Format(e.to_string()))?,
    )?;
    Ok(if violations == 0 { EXIT_OK } else { EXIT_VIOLATION })
}

fn verify_monitors(run_dir: &Path, out: &Path) -> Result<i32> {
    ensure_dir(out)?;
    let manifest = RunManifest::read(run_dir)?;
    let params = manifest.config.norm_params()?;
    let grid = build_grid(manifest.config.grid_spec()?)?;
    let outer = fio::read_profile(&run_dir.join("fields/U.bin"), &grid)?;
    let dxs = outer.deriv(params.s).l2();
    let trace = read_trace_csv(&run_dir.join("trace.csv"), params, dxs)?;
    if trace.len() < 4 {
        std::fs::write(
            out.join("monitors.json"),
            serde_json::to_string_pretty(&serde_json::json!({
                "status": "insufficient trace",
                "samples": trace.len(),
            }))
            .map_err(|e| Error::Format(e.to_string()))?,
        )?;
        return Ok(EXIT_OK);
    }

    let omega0 = fio::read_field(&run_dir.join("fields/omega_000000.bin"))?.0;
    let state0 = SolverState::new(omega0, outer, manifest.config.paper.epsilon, params)?;
    let (json, violations) = monitor_verdicts(&trace, &state0, &params)?;
    std::fs::write(
        out.join("monitors.json"),
        serde_json::to_string_pretty(&json).map_err(|e| Error::Format(e.to_string()))?,
    )?;

    // Margin series CSV.
    let half = trace.len() / 2;
    let sobolev_c = json["constants"]["sobolev_c"].as_f64().unwrap_or(1.0);
    let consts = FittedConstants {
        c_energy: fit_c_energy(&trace, half),
        c_linf: fit_c_linf(&trace, sobolev_c, half).max(fit_c_lower(&trace, half)),
        lambda: 0.0,
        sobolev_c,
    };
    let energy = energy_ode_bound(&trace, &consts);
    let linf = linf_bounds_check(&trace, &consts);
    let lower = lower_bound_check(&trace, &consts);
    let mut csv = String::from("t,energy_margin,linf_slack,lower_slack\n");
    for k in 0..trace.len() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            trace.times[k],
            energy.margin.get(k).copied().unwrap_or(f64::NAN),
            linf.slack.get(k).copied().unwrap_or(f64::NAN),
            lower.slack.get(k).copied().unwrap_or(f64::NAN),
        ));
    }
    std::fs::write(out.join("margins.csv"), csv)?;
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_VIOLATION })
}

fn load_snapshots(run_dir: &Path) -> Result<Vec<SolverState>> {
    let manifest = RunManifest::read(run_dir)?;
    let params = manifest.config.norm_params()?;
    let grid = build_grid(manifest.config.grid_spec()?)?;
    let outer = fio::read_profile(&run_dir.join("fields/U.bin"), &grid)?;
    let mut states = Vec::new();
    for k in 0.. {
        let path = run_dir.join(format!("fields/omega_{k:06}.bin"));
        if !path.exists() {
            break;
        }
        let (omega, t) = fio::read_field(&path)?;
        let mut s = SolverState::new(omega, outer.clone(), manifest.config.paper.epsilon, params)?;
        s.t = t;
        states.push(s);
    }
    if states.is_empty() {
        return Err(Error::Format(format!(
            "no snapshots under {}",
            run_dir.join("fields").display()
        )));
    }
    Ok(states)
}

fn verify_structure(run_dir: &Path, out: &Path) -> Result<i32> {
    ensure_dir(out)?;
    let manifest = RunManifest::read(run_dir)?;
    let params = manifest.config.norm_params()?;
    let states = load_snapshots(run_dir)?;

    let final_state = states.last().unwrap();
    let k0 = boundary_reduction_residual(final_state, None, BoundaryLevel::K0)?;
    let k1 = boundary_reduction_residual(final_state, None, BoundaryLevel::K1)?;
    let k2 = boundary_reduction_residual(final_state, None, BoundaryLevel::K2)?;

    let a_res = a_evolution_residual(&states)?;
    let gs_res = gs_evolution_residual(&states, &params)?;
    let mom_res = momentum_residual(&states);

    let mut csv = String::from("sample,a_residual,gs_residual,momentum_residual\n");
    for k in 0..a_res.len() {
        csv.push_str(&format!("{},{},{},{}\n", k + 1, a_res[k], gs_res[k], mom_res[k]));
    }
    std::fs::write(out.join("structure.csv"), csv)?;
    std::fs::write(
        out.join("structure.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "boundary": { "k0": k0, "k1": k1, "k2": k2 },
            "a_residual_max": a_res.iter().cloned().fold(0.0, f64::max),
            "gs_residual_max": gs_res.iter().cloned().fold(0.0, f64::max),
            "momentum_residual_max": mom_res.iter().cloned().fold(0.0, f64::max),
            "samples": states.len(),
        }))
        .map_err(|e| Error::Format(e.to_string()))?,
    )?;
    Ok(EXIT_OK)
}

fn verify_convergence(config: &RunConfig, out: &Path) -> Result<i32> {
    ensure_dir(out)?;
    let grid = build_grid(config.grid_spec()?)?;
    let params = config.norm_params()?;
    let (omega0, outer) =
        make_standard_datum(&grid, &params, config.datum.amplitude, config.datum.scale)?;
    let scheme = config.scheme_config()?;
    let sweep = config.sweep.clone().unwrap_or_default();
    let eps_list = if sweep.epsilon.is_empty() {
        vec![0.1, 0.05, 0.025]
    } else {
        sweep.epsilon.clone()
    };
    let r_list = if sweep.r.is_empty() { vec![5.0, 10.0, 20.0] } else { sweep.r.clone() };
    let t_end = config.scheme.t_end;

    let eps_study = eps_convergence_study(&omega0, &outer, &eps_list, &scheme, &params, t_end)?;
    let trunc_study =
        truncation_convergence_study(&omega0, &outer, config.paper.epsilon.max(0.05), &r_list, &scheme, &params, t_end)?;
    let picard = picard_solve(
        &omega0,
        &outer,
        config.paper.epsilon.max(0.05),
        &scheme.clone().with_truncation(r_list[0])?,
        &params,
        4,
        (t_end).min(0.02),
    )?;

    let eps_decreasing = eps_study.diffs.windows(2).all(|w| w[1] < w[0]);
    let trunc_nonincreasing = trunc_study.diffs.windows(2).all(|w| w[1] <= w[0]);
    let gap_ratios: Vec<f64> = picard
        .cauchy_gaps
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();

    std::fs::write(
        out.join("convergence.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "eps": { "list": eps_list, "diffs": eps_study.diffs, "order": eps_study.order,
                      "strictly_decreasing": eps_decreasing },
            "truncation": { "list": r_list, "diffs": trunc_study.diffs,
                             "nonincreasing": trunc_nonincreasing },
            "picard": { "gaps": picard.cauchy_gaps, "ratios": gap_ratios },
        }))
        .map_err(|e| Error::Format(e.to_string()))?,
    )?;
    Ok(if eps_decreasing && trunc_nonincreasing { EXIT_OK } else { EXIT_VIOLATION })
}

/// Coupled comparison scenario: a uniqueness pair (identical data) and a
/// perturbed pair with the Gronwall fit.
pub fn cmd_compare(config: &RunConfig, out: &Path) -> i32 {
    match cmd_compare_inner(config, out) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VIOLATION,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn cmd_compare_inner(config: &RunConfig, out: &Path) -> Result<bool> {
    config.validate()?;
    ensure_dir(out)?;
    let grid = build_grid(config.grid_spec()?)?;
    let params = config.norm_params()?;
    let (omega0, outer) =
        make_standard_datum(&grid, &params, config.datum.amplitude, config.datum.scale)?;
    let scheme = config.scheme_config()?;
    let t_end = config.scheme.t_end;
    let eps = config.paper.epsilon;

    // Uniqueness pair.
    let unique = comparison_run(&omega0, &omega0, &outer, eps, &scheme, &params, t_end, 5)?;
    let unique_max = unique.g_tilde_l2.iter().cloned().fold(0.0, f64::max);
    let omega_l2 = prandtl_core::grid::weighted_l2(&omega0, 0.0);

    // Perturbed pair: omega_b = omega_a (1 + 1e-3 cos(2 pi x)).
    let tau = 2.0 * std::f64::consts::PI;
    let modulation = Field::from_fn(&grid, |x, _| 1.0 + 1e-3 * (tau * x).cos());
    let perturbed0 = omega0.mul(&modulation);
    let rec = comparison_run(&omega0, &perturbed0, &outer, eps, &scheme, &params, t_end, 5)?;

    // Split-sample Gronwall validation with the 1.2 slack.
    let half = rec.times.len() / 2;
    let g0 = rec.g_tilde_l2[0];
    let mut gronwall_ok = true;
    for k in half..rec.times.len() {
        let bound = g0 * (rec.fitted_c * rec.times[k]).exp() * 1.2;
        if rec.g_tilde_l2[k] > bound {
            gronwall_ok = false;
        }
    }
    let uniqueness_ok = unique_max <= 1e-12 * omega_l2;

    let mut csv = String::from("t,g_tilde_l2,dy_g_tilde_l2\n");
    for k in 0..rec.times.len() {
        csv.push_str(&format!(
            "{},{},{}\n",
            rec.times[k], rec.g_tilde_l2[k], rec.dy_g_tilde_l2[k]
        ));
    }
    std::fs::write(out.join("compare.csv"), csv)?;
    std::fs::write(
        out.join("compare.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "uniqueness_max_g_tilde": unique_max,
            "uniqueness_holds": uniqueness_ok,
            "fitted_c": rec.fitted_c,
            "gronwall_holds": gronwall_ok,
            "eps_extension": rec.eps_extension,
        }))
        .map_err(|e| Error::Format(e.to_string()))?,
    )?;
    Ok(uniqueness_ok && gronwall_ok)
}

use critheat::config::RunConfig;
use critheat::decay_character::{decay_character, lambda_spectrum, DecayCharacterEstimate};
use critheat::evolve::{run as evolve_run, write_checkpoint, Trajectory, UndecidedReason, Verdict};
use critheat::experiments::{
    decay_fit, default_sweep, dichotomy_sweep, splitting_diagnostic, Hypotheses, SweepRow, FIT_TOL,
};
use serde::Serialize;
use serde_json::json;

use crate::output::{num, opt, to_value, trajectory_rows, OutputDir, LONG_HEADER};
use crate::{CliError, Status};

/// snake_case name of a unit enum variant.
fn name(v: &impl Serialize) -> String {
    match to_value(v) {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }
}

fn verdict_detail(v: &Verdict) -> String {
    match v {
        Verdict::Dissipative { final_h1_sq, .. } => format!("final_h1_sq={final_h1_sq}"),
        Verdict::Blowup { bracket, .. } => format!("bracket=[{};{}]", bracket.0, bracket.1),
        Verdict::Undecided { reason, .. } => format!("reason={reason}"),
    }
}

fn run_status(traj: &Trajectory) -> Status {
    match traj.verdict {
        Verdict::Undecided { reason: UndecidedReason::Corruption, .. } => Status::Corruption,
        _ => Status::Success,
    }
}

fn write_trajectory(dir: &mut OutputDir, traj: &Trajectory) -> Result<(), CliError> {
    dir.csv("trajectory.csv", &LONG_HEADER, trajectory_rows(traj))?;
    dir.csv(
        "events.csv",
        &["t", "event"],
        traj.events.iter().map(|e| [num(e.t), e.kind.to_string()]),
    )
}

fn trajectory_summary(traj: &Trajectory) -> serde_json::Value {
    json!({
        "verdict": to_value(&traj.verdict),
        "initial_set": to_value(&traj.initial_set),
        "e_of_w": traj.threshold.e_of_w,
        "snapshots": traj.snapshots.len(),
        "events": traj.events.len(),
        "nehari_range": [traj.nehari_range.0, traj.nehari_range.1],
        "steps": traj.steps,
        "rejected_steps": traj.rejected,
    })
}

pub fn run(cfg: &RunConfig, mut dir: OutputDir, checkpoints: bool) -> Result<Status, CliError> {
    let traj = evolve_run(cfg)?;
    write_trajectory(&mut dir, &traj)?;
    if checkpoints {
        for (k, s) in traj.snapshots.iter().enumerate() {
            if let Some(u) = &s.field {
                dir.raw(&format!("checkpoints/checkpoint_{k:05}.txt"), |f| write_checkpoint(f, s.t(), u))?;
            }
        }
    }
    let status = run_status(&traj);
    dir.finish("run", cfg, trajectory_summary(&traj))?;
    Ok(status)
}

fn sweep_record(r: &SweepRow) -> Vec<String> {
    vec![
        r.family.clone(),
        r.d.to_string(),
        num(r.energy_ratio),
        num(r.gradient_ratio),
        r.l2_finite.to_string(),
        name(&r.set),
        name(&r.hypotheses),
        name(&r.verdict.kind()),
        num(r.verdict.t_end()),
        verdict_detail(&r.verdict),
        r.consistent_with_theorem.to_string(),
    ]
}

pub const SWEEP_HEADER: [&str; 11] = [
    "family",
    "d",
    "energy_ratio",
    "gradient_ratio",
    "l2_finite",
    "set",
    "hypotheses",
    "verdict",
    "t_end",
    "detail",
    "consistent_with_theorem",
];

/// Inconsistent rows dominate; rows that test nothing make the sweep partial.
pub fn sweep_status(rows: &[SweepRow]) -> Status {
    if rows.iter().any(|r| !r.consistent_with_theorem) {
        Status::Inconsistent
    } else if rows.iter().any(|r| r.hypotheses == Hypotheses::Neither || !r.decided()) {
        Status::Partial
    } else {
        Status::Success
    }
}

pub fn sweep(cfg: &RunConfig, mut dir: OutputDir) -> Result<Status, CliError> {
    let spec = cfg.sweep.clone().unwrap_or_else(default_sweep);
    let rows = dichotomy_sweep(cfg, &spec)?;
    dir.csv("sweep.csv", &SWEEP_HEADER, rows.iter().map(sweep_record))?;
    let status = sweep_status(&rows);
    let results = json!({
        "rows": rows.len(),
        "inconsistent": rows.iter().filter(|r| !r.consistent_with_theorem).count(),
        "hypotheses_not_met": rows.iter().filter(|r| r.hypotheses == Hypotheses::Neither).count(),
        "undecided": rows.iter().filter(|r| !r.decided()).count(),
    });
    dir.finish("sweep", cfg, results)?;
    Ok(status)
}

pub fn decayfit(cfg: &RunConfig, mut dir: OutputDir) -> Result<Status, CliError> {
    let prep = cfg.prepare()?;
    let spec0 = cfg.initial.spectrum(&prep.u0)?;
    let traj = evolve_run(cfg)?;
    write_trajectory(&mut dir, &traj)?;
    if run_status(&traj) == Status::Corruption {
        dir.finish("decayfit", cfg, trajectory_summary(&traj))?;
        return Ok(Status::Corruption);
    }
    let fit = decay_fit(&traj, &spec0, cfg.fit.window)?;
    dir.csv(
        "fit.csv",
        &[
            "family", "d", "law", "exponent", "r2", "reported", "predicted", "q_star", "t_lo", "t_hi", "samples",
            "log_constant", "envelope_holds",
        ],
        [vec![
            cfg.initial.label(),
            cfg.dimension.to_string(),
            name(&fit.law),
            num(fit.exponent),
            num(fit.r2),
            fit.reported().to_string(),
            opt(fit.predicted),
            opt(fit.q_star),
            num(fit.window.0),
            num(fit.window.1),
            fit.samples.to_string(),
            opt(fit.log_constant),
            fit.envelope_holds(FIT_TOL).map(|b| b.to_string()).unwrap_or_default(),
        ]],
    )?;
    let mut results = trajectory_summary(&traj);
    results["fit"] = to_value(&fit);
    dir.finish("decayfit", cfg, results)?;
    Ok(Status::Success)
}

fn character_record(cfg: &RunConfig, which: &str, est: &DecayCharacterEstimate) -> Vec<String> {
    vec![
        cfg.initial.label(),
        cfg.dimension.to_string(),
        which.to_string(),
        num(est.r_star),
        name(&est.status),
        num(est.window.0),
        num(est.window.1),
        num(est.fit_residual),
        num(est.p_r_value),
    ]
}

pub fn character(cfg: &RunConfig, mut dir: OutputDir) -> Result<Status, CliError> {
    let grid = cfg.build_grid()?;
    // E(W) only scales the bump family; the spectrum does not need the run threshold
    let e_of_w = critheat::ground_state::ground_state_energy(cfg.dimension, &grid)?;
    let u0 = cfg.initial.build(&grid, cfg.seed, e_of_w)?;
    let spec = cfg.initial.spectrum(&u0)?;
    let base = decay_character(&spec)?;
    let shifted = decay_character(&lambda_spectrum(&spec))?;
    dir.csv(
        "character.csv",
        &["family", "d", "spectrum", "r_star", "status", "rho_lo", "rho_hi", "fit_residual", "p_r_value"],
        [
            character_record(cfg, "u0", &base),
            character_record(cfg, "lambda_u0", &shifted),
        ],
    )?;
    dir.finish("character", cfg, json!({ "u0": to_value(&base), "lambda_u0": to_value(&shifted) }))?;
    Ok(Status::Success)
}

pub fn splitting(cfg: &RunConfig, mut dir: OutputDir) -> Result<Status, CliError> {
    let traj = evolve_run(cfg)?;
    write_trajectory(&mut dir, &traj)?;
    let report = splitting_diagnostic(&traj, &cfg.splitting)?;
    dir.csv(
        "splitting.csv",
        &["t0", "t1", "lhs", "rhs", "margin", "flagged"],
        report.pairs.iter().enumerate().map(|(i, p)| {
            [
                num(p.t0),
                num(p.t1),
                num(p.lhs),
                num(p.rhs),
                num(p.margin),
                report.flagged.contains(&i).to_string(),
            ]
        }),
    )?;
    let mut results = trajectory_summary(&traj);
    results["g"] = json!(report.g.tag());
    results["c_tilde"] = json!(report.c_tilde);
    results["min_margin"] = json!(report.min_margin());
    results["flagged"] = json!(report.flagged.len());
    let status = run_status(&traj);
    dir.finish("splitting", cfg, results)?;
    Ok(status)
}

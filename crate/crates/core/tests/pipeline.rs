use std::io::BufReader;

use critheat::config::{parse_config, RunConfig};
use critheat::decay_character::decay_character;
use critheat::evolve::{energy_identity_residual, read_checkpoint, run, write_checkpoint, UndecidedReason, Verdict, VerdictKind};
use critheat::experiments::{sweep_row, Hypotheses};

fn config(d: usize, initial: &str) -> RunConfig {
    parse_config(&format!(
        r#"{{"dimension": {d}, "grid": {{"radius": 50, "stretch": 1.002}}, "initial": {initial}}}"#
    ))
    .unwrap()
}

#[test]
fn small_gaussian_end_to_end() {
    let cfg = config(5, r#"{"family": "gaussian", "amp": 0.2, "width": 1.0}"#);
    let prep = cfg.prepare().unwrap();
    let spec = cfg.initial.spectrum(&prep.u0).unwrap();
    assert!(decay_character(&spec).unwrap().r_star.abs() < 0.02);

    let traj = run(&cfg).unwrap();
    assert_eq!(traj.verdict.kind(), VerdictKind::Dissipative);
    assert!(traj.positivity_holds(cfg.detect.tol_pos));
    assert!(traj.max_energy_increase() <= 1e-12 * traj.snapshots[0].report.energy);
    let idx = traj.lyapunov_index(1e-10).unwrap();
    assert!(idx + 1 < traj.snapshots.len());

    let bal = energy_identity_residual(&traj, 0.1, 1.0).unwrap();
    assert!(bal.inequality_holds(0.0));
    assert!(bal.residual <= 1e-3 * bal.energy_t0.abs(), "{bal:?}");

    let last = traj.snapshots.iter().rev().find(|s| s.field.is_some()).unwrap();
    let u = last.field.as_ref().unwrap();
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, last.t(), u).unwrap();
    let (t, v) = read_checkpoint(BufReader::new(buf.as_slice())).unwrap();
    assert_eq!(t, last.t());
    assert_eq!(v.values(), u.values());
}

#[test]
fn runs_are_deterministic() {
    let cfg = config(5, r#"{"family": "bump", "a": 0.5, "terms": 3}"#);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.verdict, b.verdict);
    assert_eq!(a.snapshots.len(), b.snapshots.len());
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        assert_eq!(x.report, y.report);
    }
}

#[test]
fn threshold_data_are_not_run() {
    let cfg = config(5, r#"{"family": "aW", "a": 1.0}"#);
    let traj = run(&cfg).unwrap();
    assert_eq!(traj.snapshots.len(), 1);
    assert!(matches!(traj.verdict, Verdict::Undecided { reason: UndecidedReason::AtThreshold, .. }));
    let (row, _) = sweep_row(&cfg).unwrap();
    assert_eq!(row.hypotheses, Hypotheses::Neither);
    assert!(row.consistent_with_theorem && !row.decided());
}

#[test]
fn supercritical_scaling_blows_up() {
    let cfg = config(6, r#"{"family": "aW", "a": 1.3}"#);
    let (row, traj) = sweep_row(&cfg).unwrap();
    assert_eq!(row.hypotheses, Hypotheses::BranchII);
    assert_eq!(traj.verdict.kind(), VerdictKind::Blowup);
    assert!(row.consistent_with_theorem);
}

//! Experiment suites: dichotomy sweeps, decay-rate fits, the frequency-splitting
//! diagnostic and the nonlinear estimate check.

use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SweepSpec};
use crate::decay_character::{
    cumulative_gradient_mass, decay_character, gradient_mass_between, lambda_spectrum, linear_fit,
    low_freq_gradient_mass, truncated_hankel_spectrum, CharacterStatus, SpectrumFn, SpectrumKind,
    TABULATED_LOW_FREQUENCY,
};
use crate::error::{invalid, Error, Result};
use crate::evolve::{integrate, unstarted, Snapshot, Trajectory, UndecidedReason, Verdict, VerdictKind};
use crate::families::InitialData;
use crate::functionals::{l2_norm_sq, SetVerdict};
use crate::ground_state::nonlinear_power;
use crate::radial::{apply_fv_laplacian, pow_abs, RadialField};

/// Minimum `r²` before a power-law exponent is reported.
pub const R2_GATE: f64 = 0.98;
/// Allowed excess of the fitted exponent over `-predicted`.
pub const FIT_TOL: f64 = 0.15;
pub const MIN_FIT_SAMPLES: usize = 12;
/// Above this dimension only the logarithmic law is fitted.
pub const POWER_LAW_MAX_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypotheses {
    /// `E(u₀) < E(W)`, `‖∇u₀‖ < ‖∇W‖`.
    BranchI,
    /// `E(u₀) < E(W)`, `‖∇u₀‖ > ‖∇W‖`, `u₀ ∈ L²`.
    BranchII,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub d: usize,
    pub energy_ratio: f64,
    pub gradient_ratio: f64,
    pub l2_finite: bool,
    pub set: SetVerdict,
    pub hypotheses: Hypotheses,
    pub verdict: Verdict,
    pub consistent_with_theorem: bool,
}

impl SweepRow {
    pub fn decided(&self) -> bool {
        self.verdict.kind() != VerdictKind::Undecided
    }
}

fn hypotheses(set: SetVerdict, l2_finite: bool) -> Hypotheses {
    match set {
        SetVerdict::MPlus => Hypotheses::BranchI,
        SetVerdict::MMinus if l2_finite => Hypotheses::BranchII,
        _ => Hypotheses::Neither,
    }
}

/// Whether `verdict` is compatible with the dichotomy under `hyp`; undecided runs never contradict.
pub fn consistent(hyp: Hypotheses, verdict: &Verdict) -> bool {
    !matches!(
        (hyp, verdict.kind()),
        (Hypotheses::BranchI, VerdictKind::Blowup) | (Hypotheses::BranchII, VerdictKind::Dissipative)
    )
}

/// One run of `config`, classified against the dichotomy.
pub fn sweep_row(config: &RunConfig) -> Result<(SweepRow, Trajectory)> {
    let prep = config.prepare()?;
    let l2_finite = l2_norm_sq(&prep.u0).is_some();
    let h1 = prep.u0.dirichlet_energy();
    let energy_ratio = prep.set.energy / prep.threshold.e_of_w;
    let gradient_ratio = (h1 / prep.threshold.h1_sq_w).sqrt();
    let hyp = hypotheses(prep.set.verdict, l2_finite);
    let set = prep.set.verdict;
    let traj = if prep.near_threshold() {
        unstarted(prep.u0, prep.threshold, &config.detect, UndecidedReason::AtThreshold)?
    } else {
        integrate(prep.u0, prep.threshold, &config.solver, &config.detect, &config.cadence)?
    };
    let row = SweepRow {
        family: config.initial.label(),
        d: config.dimension,
        energy_ratio,
        gradient_ratio,
        l2_finite,
        set,
        hypotheses: hyp,
        verdict: traj.verdict,
        consistent_with_theorem: consistent(hyp, &traj.verdict),
    };
    Ok((row, traj))
}

/// Runs every `(d, point)` pair of `sweep` in parallel; rows keep the input order.
pub fn dichotomy_sweep(base: &RunConfig, sweep: &SweepSpec) -> Result<Vec<SweepRow>> {
    let jobs: Vec<RunConfig> = sweep
        .dimensions
        .iter()
        .flat_map(|&d| sweep.points.iter().map(move |p| (d, p.clone())))
        .map(|(d, p)| base.variant(d, p))
        .collect();
    jobs.par_iter()
        .map(|cfg| sweep_row(cfg).map(|(row, _)| row))
        .collect()
}

/// `d ∈ {3, 4, 5, 6}` against `a·W` for `a ∈ {0.5, 0.9, 1.1, 1.5}` and Nehari-scaled bumps.
pub fn default_sweep() -> SweepSpec {
    let mut points: Vec<InitialData> = [0.5, 0.9, 1.1, 1.5]
        .into_iter()
        .map(|a| InitialData::ScaledBubble { a, lambda: 1.0 })
        .collect();
    points.extend([0.5, 0.9, 2.0].into_iter().map(|a| InitialData::Bump { a, terms: 3 }));
    SweepSpec {
        dimensions: vec![3, 4, 5, 6],
        points,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayLaw {
    /// `log ‖u‖²_{Ḣ¹}` against `log(1+t)`.
    Power,
    /// `log ‖u‖²_{Ḣ¹}` against `-2 log log(e+t)`.
    Logarithmic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub law: DecayLaw,
    /// Fitted slope.
    pub exponent: f64,
    /// Times of the first and last sample used.
    pub window: (f64, f64),
    pub samples: usize,
    pub r2: f64,
    /// `min{d/2 + q*, 1}` for the power law.
    pub predicted: Option<f64>,
    pub q_star: Option<f64>,
    /// Logarithmic law: `C` fitted on the first half of the window.
    pub log_constant: Option<f64>,
    /// Logarithmic law: `‖u‖²_{Ḣ¹} ≤ C [ln(e+t)]^{-2}` over the whole window.
    pub log_bound_holds: Option<bool>,
}

impl DecayFit {
    /// Whether the exponent passes the `r²` gate.
    pub fn reported(&self) -> bool {
        self.r2 >= R2_GATE
    }

    /// Decay at least as fast as predicted, up to `tol`.
    pub fn envelope_holds(&self, tol: f64) -> Option<bool> {
        match self.law {
            DecayLaw::Power => self.predicted.map(|p| self.exponent <= -p + tol),
            DecayLaw::Logarithmic => self.log_bound_holds,
        }
    }
}

/// `[2, (R/8)²]`.
pub fn default_fit_window(radius: f64) -> (f64, f64) {
    (2.0, (radius / 8.0).powi(2))
}

/// `q* = r*(Λu₀)` when the estimate exists.
pub fn lambda_character(spec0: &SpectrumFn) -> Result<Option<f64>> {
    let est = decay_character(&lambda_spectrum(spec0))?;
    Ok((est.status == CharacterStatus::Exists).then_some(est.r_star))
}

/// Fits the late-time decay of `‖u‖²_{Ḣ¹}` along a dissipative trajectory.
pub fn decay_fit(traj: &Trajectory, spec0: &SpectrumFn, window: Option<(f64, f64)>) -> Result<DecayFit> {
    if traj.verdict.kind() != VerdictKind::Dissipative {
        return Err(Error::Precondition(format!("decay fit needs a dissipative run, got {}", traj.verdict)));
    }
    let d = traj.dim();
    let radius = traj.grid.radius();
    let (t_lo, t_hi) = window.unwrap_or_else(|| default_fit_window(radius));
    if !(t_lo > 0.0 && t_hi > t_lo) {
        return Err(invalid("window", format!("need 0 < t_lo < t_hi, got [{t_lo}, {t_hi}]")));
    }
    if t_hi.sqrt() > radius / 8.0 * (1.0 + 1e-12) {
        return Err(invalid("window", format!("sqrt(t_hi) = {} exceeds R/8 = {}", t_hi.sqrt(), radius / 8.0)));
    }
    let used: Vec<&Snapshot> = traj
        .snapshots
        .iter()
        .filter(|s| s.t() >= t_lo && s.t() <= t_hi && s.report.h1_sq > 0.0)
        .collect();
    let first = used.first().map_or(t_lo, |s| s.t());
    let last = used.last().map_or(t_lo, |s| s.t());
    if used.len() < MIN_FIT_SAMPLES || last < 10.0 * first {
        return Err(Error::WindowTooShort {
            t_lo: first,
            t_hi: last,
            samples: used.len(),
        });
    }
    let y: Vec<f64> = used.iter().map(|s| s.report.h1_sq.ln()).collect();
    if d <= POWER_LAW_MAX_DIM {
        let x: Vec<f64> = used.iter().map(|s| s.t().ln_1p()).collect();
        let (_, slope, r2) = linear_fit(&x, &y);
        let q_star = lambda_character(spec0)?;
        Ok(DecayFit {
            law: DecayLaw::Power,
            exponent: slope,
            window: (first, last),
            samples: used.len(),
            r2,
            predicted: q_star.map(|q| (d as f64 / 2.0 + q).min(1.0)),
            q_star,
            log_constant: None,
            log_bound_holds: None,
        })
    } else {
        let lnl = |t: f64| (E + t).ln();
        let x: Vec<f64> = used.iter().map(|s| -2.0 * lnl(s.t()).ln()).collect();
        let (_, slope, r2) = linear_fit(&x, &y);
        let weighted: Vec<f64> = used.iter().map(|s| s.report.h1_sq * lnl(s.t()).powi(2)).collect();
        let half = weighted.len().div_ceil(2);
        let c = weighted[..half].iter().copied().fold(0.0, f64::max);
        let holds = weighted.iter().all(|w| *w <= c * (1.0 + 1e-12));
        Ok(DecayFit {
            law: DecayLaw::Logarithmic,
            exponent: slope,
            window: (first, last),
            samples: used.len(),
            r2,
            predicted: None,
            q_star: None,
            log_constant: Some(c),
            log_bound_holds: Some(holds),
        })
    }
}

/// Weight `g` of the splitting argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GChoice {
    /// `g(t) = [ln(e+t)]³`
    LogCubed,
    /// `g(t) = (1+t)^α`
    Power { alpha: f64 },
}

impl GChoice {
    pub fn g(&self, t: f64) -> f64 {
        match *self {
            GChoice::LogCubed => (E + t).ln().powi(3),
            GChoice::Power { alpha } => (1.0 + t).powf(alpha),
        }
    }

    /// `g'(t)/g(t)`
    pub fn log_derivative(&self, t: f64) -> f64 {
        match *self {
            GChoice::LogCubed => 3.0 / ((E + t) * (E + t).ln()),
            GChoice::Power { alpha } => alpha / (1.0 + t),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            GChoice::LogCubed => "log_cubed",
            GChoice::Power { .. } => "power",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplittingSettings {
    pub g: GChoice,
    /// Tolerance on the normalized margins.
    pub tol_diag: f64,
    /// Search range for the ball constant `C̃`.
    pub c_tilde_range: (f64, f64),
    /// Frequency nodes per checkpoint.
    pub s_nodes: usize,
}

impl Default for SplittingSettings {
    fn default() -> Self {
        Self {
            g: GChoice::LogCubed,
            tol_diag: 0.05,
            c_tilde_range: (1e-2, 1e2),
            s_nodes: 48,
        }
    }
}

impl SplittingSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_diag > 0.0) {
            return Err(invalid("tol_diag", format!("must be positive, got {}", self.tol_diag)));
        }
        let (lo, hi) = self.c_tilde_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(invalid("c_tilde_range", format!("need 0 < lo < hi, got ({lo}, {hi})")));
        }
        if self.s_nodes < 8 {
            return Err(invalid("s_nodes", "needs at least 8 nodes"));
        }
        if let GChoice::Power { alpha } = self.g {
            if !(alpha > 0.0) {
                return Err(invalid("g.alpha", format!("must be positive, got {alpha}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingPair {
    pub t0: f64,
    pub t1: f64,
    /// `[g h](t1) - [g h](t0)) / (t1 - t0)`
    pub lhs: f64,
    /// Trapezoid mean of `g' ∫_{B(t)} |ξ|² |û|²`.
    pub rhs: f64,
    /// `(rhs - lhs) / (mean of g' ‖u‖²_{Ḣ¹})`, zero when that scale vanishes.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingReport {
    pub g: GChoice,
    pub c_tilde: f64,
    pub pairs: Vec<SplittingPair>,
    /// Indices of pairs with `margin < -tol_diag`.
    pub flagged: Vec<usize>,
}

impl SplittingReport {
    pub fn min_margin(&self) -> f64 {
        self.pairs.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min)
    }
}

/// `ρ ↦ ∫_{B(ρ)} |ξ|²|û(ξ, t)|²` on `[ρ_lo, ρ_hi]` for one checkpoint.
struct BallMass {
    t: f64,
    h1: f64,
    spectrum: Option<SpectrumFn>,
    /// Frequency nodes and the gradient mass below each.
    table: Vec<(f64, f64)>,
}

impl BallMass {
    fn new(t: f64, h1: f64, spectrum: Option<SpectrumFn>) -> Result<Self> {
        let table = match &spectrum {
            Some(s) => {
                let SpectrumKind::Tabulated { nodes, .. } = &s.kind else {
                    unreachable!("grid spectra are tabulated")
                };
                let masses = cumulative_gradient_mass(s, nodes)?;
                if let Some(bad) = masses.iter().position(|m| !m.is_finite()) {
                    return Err(Error::Domain(format!(
                        "ball mass at t = {t}, rho = {} is not finite",
                        nodes[bad]
                    )));
                }
                nodes.iter().copied().zip(masses).collect()
            }
            None => Vec::new(),
        };
        Ok(Self { t, h1, spectrum, table })
    }

    fn at(&self, rho: f64) -> Result<f64> {
        let Some(s) = &self.spectrum else {
            return Ok(0.0);
        };
        match self.table.iter().rposition(|(node, _)| *node <= rho) {
            Some(j) => Ok(self.table[j].1 + gradient_mass_between(s, self.table[j].0, rho)?),
            None => low_freq_gradient_mass(s, rho),
        }
    }
}

fn evaluate_pairs(masses: &[BallMass], g: GChoice, c_tilde: f64) -> Result<Vec<SplittingPair>> {
    let side = |m: &BallMass| -> Result<(f64, f64, f64)> {
        let ld = g.log_derivative(m.t);
        let gt = g.g(m.t);
        let rho = (ld / c_tilde).sqrt();
        Ok((gt * m.h1, gt * ld * m.at(rho)?, gt * ld * m.h1))
    };
    masses
        .windows(2)
        .map(|w| {
            let (gh0, r0, s0) = side(&w[0])?;
            let (gh1, r1, s1) = side(&w[1])?;
            let lhs = (gh1 - gh0) / (w[1].t - w[0].t);
            let rhs = 0.5 * (r0 + r1);
            let scale = 0.5 * (s0 + s1);
            Ok(SplittingPair {
                t0: w[0].t,
                t1: w[1].t,
                lhs,
                rhs,
                margin: if scale > 0.0 { (rhs - lhs) / scale } else { 0.0 },
            })
        })
        .collect()
}

/// Evaluates the splitting inequality between consecutive checkpoints; `C̃` is the
/// largest value in the search range for which no margin is negative.
pub fn splitting_diagnostic(traj: &Trajectory, settings: &SplittingSettings) -> Result<SplittingReport> {
    settings.validate()?;
    let checkpoints: Vec<&Snapshot> = traj.snapshots.iter().filter(|s| s.field.is_some()).collect();
    if checkpoints.len() < 2 {
        return Err(Error::MissingCheckpoint(traj.snapshots.last().map_or(0.0, |s| s.t())));
    }
    let g = settings.g;
    let (c_lo, c_hi) = settings.c_tilde_range;
    let masses = checkpoints
        .par_iter()
        .map(|s| {
            let u = s.field.as_ref().unwrap();
            let h1 = s.report.h1_sq;
            if u.sup_norm() == 0.0 {
                return BallMass::new(s.t(), h1, None);
            }
            let ld = g.log_derivative(s.t());
            let top = (ld / c_lo).sqrt();
            // below 1/R the spectrum of a compactly supported field is flat, so the
            // extrapolation under the first node stays integrable
            let bottom = ((ld / c_hi).sqrt() * 1e-2)
                .min(0.5 * TABULATED_LOW_FREQUENCY)
                .min(0.5 / u.grid().radius());
            let n = settings.s_nodes;
            let nodes: Vec<f64> = (0..n)
                .map(|j| bottom * (top / bottom).powf(j as f64 / (n - 1) as f64))
                .collect();
            let spectrum = truncated_hankel_spectrum(u, &nodes)?;
            BallMass::new(s.t(), h1, Some(spectrum))
        })
        .collect::<Result<Vec<_>>>()?;
    let min_margin = |c: f64| -> Result<f64> {
        Ok(evaluate_pairs(&masses, g, c)?
            .iter()
            .map(|p| p.margin)
            .fold(f64::INFINITY, f64::min))
    };
    let c_tilde = if min_margin(c_hi)? >= 0.0 {
        c_hi
    } else if min_margin(c_lo)? < 0.0 {
        c_lo
    } else {
        let (mut lo, mut hi) = (c_lo.ln(), c_hi.ln());
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if min_margin(mid.exp())? >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo.exp()
    };
    let pairs = evaluate_pairs(&masses, g, c_tilde)?;
    let flagged = pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| p.margin < -settings.tol_diag)
        .map(|(i, _)| i)
        .collect();
    Ok(SplittingReport {
        g,
        c_tilde,
        pairs,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearEstimate {
    /// `⟨Λu, Λ(|u|^{4/(d-2)}u)⟩`
    pub lhs: f64,
    /// `‖u‖^{4/(d-2)}_{Ḣ¹} ‖Δu‖²_{L²}`
    pub rhs: f64,
}

impl NonlinearEstimate {
    /// `lhs / rhs`, the smallest admissible constant for this `u`.
    pub fn ratio(&self) -> Option<f64> {
        (self.rhs > 0.0).then(|| self.lhs / self.rhs)
    }
}

/// `‖Δu‖²` with the finite-volume Laplacian and cell volumes, Dirichlet at `R`.
pub fn laplacian_norm_sq(u: &RadialField) -> f64 {
    let g = u.grid();
    let n = g.len();
    let mut lap = vec![0.0; n - 1];
    apply_fv_laplacian(g, u.values(), &mut lap);
    lap.iter().zip(g.volumes()).map(|(l, v)| v * l * l).sum()
}

pub fn nonlinear_estimate_check(u: &RadialField) -> Result<NonlinearEstimate> {
    u.check_finite()?;
    let p = nonlinear_power(u.dim());
    let nl = u.map(|s| pow_abs(s, p) * s);
    let h1 = u.dirichlet_energy();
    Ok(NonlinearEstimate {
        lhs: u.dirichlet_pairing(&nl),
        rhs: h1.powf(p / 2.0) * laplacian_norm_sq(u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::decay_character::SpectrumFn;
    use crate::evolve::{Cadence, DetectorSettings, SolverSettings, Threshold};
    use crate::ground_state::{aubin_talenti, default_grid, rescale, GroundStateSpec};
    use crate::radial::make_grid;
    use approx::assert_relative_eq;

    fn config(d: usize, initial: &str) -> RunConfig {
        parse_config(&format!(r#"{{"dimension": {d}, "initial": {initial}}}"#)).unwrap()
    }

    #[test]
    fn consistency_rule() {
        let blow = Verdict::Blowup { t_end: 1.0, bracket: (1.0, 2.0) };
        let diss = Verdict::Dissipative { t_end: 1.0, final_h1_sq: 0.0 };
        let und = Verdict::Undecided { t_end: 1.0, reason: UndecidedReason::TMax };
        assert!(!consistent(Hypotheses::BranchI, &blow));
        assert!(!consistent(Hypotheses::BranchII, &diss));
        assert!(consistent(Hypotheses::BranchI, &und));
        assert!(consistent(Hypotheses::Neither, &blow));
        assert!(consistent(Hypotheses::Neither, &diss));
    }

    #[test]
    fn sweep_rows_in_d5() {
        let base = config(5, r#"{"family": "aW", "a": 0.9}"#);
        let spec = SweepSpec {
            dimensions: vec![5],
            points: [0.5, 1.5].map(|a| InitialData::ScaledBubble { a, lambda: 1.0 }).to_vec(),
        };
        let rows = dichotomy_sweep(&base, &spec).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].hypotheses, Hypotheses::BranchI);
        assert_eq!(rows[0].verdict.kind(), VerdictKind::Dissipative);
        assert_eq!(rows[1].hypotheses, Hypotheses::BranchII);
        assert_eq!(rows[1].verdict.kind(), VerdictKind::Blowup);
        assert!(rows.iter().all(|r| r.consistent_with_theorem && r.l2_finite && r.decided()));
        assert_relative_eq!(rows[0].gradient_ratio, 0.5, max_relative = 1e-4);
    }

    #[test]
    fn at_threshold_rows_are_not_run() {
        let cfg = config(5, r#"{"family": "aW", "a": 1.0}"#);
        let (row, traj) = sweep_row(&cfg).unwrap();
        assert_eq!(row.verdict, Verdict::Undecided { t_end: 0.0, reason: UndecidedReason::AtThreshold });
        assert!(!row.decided());
        assert!(row.consistent_with_theorem);
        assert_eq!(traj.snapshots.len(), 1);
    }

    #[test]
    fn default_sweep_has_twenty_rows() {
        let s = default_sweep();
        assert!(s.dimensions.len() * s.points.len() >= 20);
    }

    fn small_gaussian_run(d: usize) -> (Trajectory, SpectrumFn) {
        let mut cfg = config(d, r#"{"family": "gaussian", "amp": 0.2, "width": 1.0}"#);
        cfg.detect.eps_dissip = 1e-20;
        let prep = cfg.prepare().unwrap();
        let spec0 = cfg.initial.spectrum(&prep.u0).unwrap();
        let traj = integrate(prep.u0, prep.threshold, &cfg.solver, &cfg.detect, &cfg.cadence).unwrap();
        (traj, spec0)
    }

    #[test]
    fn gaussian_decay_fit_in_d5() {
        let (traj, spec0) = small_gaussian_run(5);
        assert_eq!(traj.verdict.kind(), VerdictKind::Dissipative);
        let fit = decay_fit(&traj, &spec0, None).unwrap();
        assert_eq!(fit.law, DecayLaw::Power);
        assert!(fit.reported(), "{fit:?}");
        assert_relative_eq!(fit.q_star.unwrap(), 1.0, epsilon = 0.02);
        assert_eq!(fit.predicted, Some(1.0));
        // the heat flow itself decays like t^{-(d/2+1)}
        assert!((fit.exponent + 3.5).abs() < 0.2, "{fit:?}");
        assert_eq!(fit.envelope_holds(FIT_TOL), Some(true));
    }

    #[test]
    fn decay_fit_preconditions() {
        let cfg = config(5, r#"{"family": "aW", "a": 1.0}"#);
        let (_, traj) = sweep_row(&cfg).unwrap();
        let spec0 = SpectrumFn::monomial_gaussian(5, 0.0).unwrap();
        assert!(matches!(decay_fit(&traj, &spec0, None), Err(Error::Precondition(_))));
        let (traj, spec0) = small_gaussian_run(5);
        assert!(matches!(
            decay_fit(&traj, &spec0, Some((2.0, 10.0))),
            Err(Error::WindowTooShort { .. })
        ));
        assert!(matches!(decay_fit(&traj, &spec0, Some((2.0, 1e6))), Err(Error::InvalidArgument { .. })));
    }

    #[test]
    fn log_law_in_d11() {
        let (traj, spec0) = small_gaussian_run(11);
        assert_eq!(traj.verdict.kind(), VerdictKind::Dissipative);
        let fit = decay_fit(&traj, &spec0, None).unwrap();
        assert_eq!(fit.law, DecayLaw::Logarithmic);
        assert_eq!(fit.predicted, None);
        assert_eq!(fit.log_bound_holds, Some(true));
        assert!(fit.log_constant.unwrap() > 0.0);
    }

    #[test]
    fn g_choices() {
        let g = GChoice::LogCubed;
        assert_relative_eq!(g.g(0.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(g.log_derivative(0.0), 3.0 / E, max_relative = 1e-15);
        let p = GChoice::Power { alpha: 4.0 };
        let t = 3.0;
        let h = 1e-6;
        let fd = (p.g(t + h) - p.g(t - h)) / (2.0 * h) / p.g(t);
        assert_relative_eq!(fd, p.log_derivative(t), max_relative = 1e-8);
        let fd = (g.g(t + h) - g.g(t - h)) / (2.0 * h) / g.g(t);
        assert_relative_eq!(fd, g.log_derivative(t), max_relative = 1e-8);
    }

    #[test]
    fn splitting_on_zero_solution() {
        let grid = make_grid(4, 50.0, 200, 1.01).unwrap();
        let u0 = RadialField::zeros(grid);
        let solver = SolverSettings { t_max: 1.0, ..Default::default() };
        let traj = integrate(u0, Threshold::from_energy(4, 1.0), &solver, &DetectorSettings::default(), &Cadence::default()).unwrap();
        let rep = splitting_diagnostic(&traj, &SplittingSettings::default()).unwrap();
        assert!(rep.pairs.iter().all(|p| p.lhs == 0.0 && p.rhs == 0.0 && p.margin == 0.0));
        assert!(rep.flagged.is_empty());
    }

    #[test]
    fn splitting_on_stationary_bubble() {
        // (g‖W‖²)' = g'‖W‖² exceeds g'F(ρ) for every finite ball
        let d = 5;
        let grid = make_grid(d, 50.0, 2311, 1.002).unwrap();
        let w = aubin_talenti(GroundStateSpec::new(d, 1.0).unwrap(), &grid).unwrap();
        let solver = SolverSettings { t_max: 1.0, ..Default::default() };
        let cadence = Cadence { first_exponent: -1, ..Default::default() };
        let traj = integrate(w, Threshold::from_energy(d, 1.0), &solver, &DetectorSettings::default(), &cadence).unwrap();
        let report = |range: (f64, f64)| {
            let settings = SplittingSettings { c_tilde_range: range, ..Default::default() };
            splitting_diagnostic(&traj, &settings).unwrap()
        };
        let small_ball = report((10.0, 100.0));
        let whole = report((1e-6, 1e-5));
        assert!(small_ball.pairs.iter().all(|p| p.margin < -0.5), "{}", small_ball.min_margin());
        // with F = ‖u‖² only the secant-versus-trapezoid gap of g·‖u‖² remains
        let g = GChoice::LogCubed;
        let h = |t: f64| traj.snapshot_at(t).unwrap().report.h1_sq;
        // the first pair holds the fast relaxation of W onto the discrete stationary state
        for p in whole.pairs.iter().filter(|p| p.t0 > 0.0) {
            let secant = (g.g(p.t1) * h(p.t1) - g.g(p.t0) * h(p.t0)) / (p.t1 - p.t0);
            let dg = |t: f64| g.g(t) * g.log_derivative(t) * h(t);
            let trapezoid = 0.5 * (dg(p.t0) + dg(p.t1));
            let floor = (trapezoid - secant) / trapezoid;
            // the remaining gap is the interpolated spectrum's share of high frequencies
            assert!((p.margin - floor).abs() < 0.03, "{p:?} floor {floor}");
        }
    }

    #[test]
    fn splitting_on_dissipative_gaussian() {
        let (traj, _) = small_gaussian_run(4);
        let rep = splitting_diagnostic(&traj, &SplittingSettings::default()).unwrap();
        assert!(rep.flagged.is_empty(), "{:?}", rep.min_margin());
        assert!(rep.min_margin() >= 0.0);
        assert!(rep.c_tilde > 0.0);
    }

    #[test]
    fn nonlinear_estimate_scaling() {
        let d = 5;
        let grid = default_grid(d).unwrap();
        let w = aubin_talenti(GroundStateSpec::new(d, 1.0).unwrap(), &grid).unwrap();
        let zero = nonlinear_estimate_check(&RadialField::zeros(grid.clone())).unwrap();
        assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
        assert_eq!(zero.ratio(), None);
        let base = nonlinear_estimate_check(&w).unwrap().ratio().unwrap();
        assert!(base.is_finite() && base > 0.0);
        for lambda in [0.5, 2.0] {
            let r = nonlinear_estimate_check(&rescale(&w, lambda).unwrap()).unwrap().ratio().unwrap();
            assert!((r / base - 1.0).abs() < 0.02, "lambda = {lambda}: {r} vs {base}");
        }
    }
}

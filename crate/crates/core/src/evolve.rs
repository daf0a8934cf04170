//! Adaptive IMEX integration of `∂ₜu = Δu + |u|^{4/(d-2)}u` on a radial grid,
//! with online dissipation / blowup detection.
//!
//! Diffusion is backward Euler on the finite-volume operator `-M⁻¹K` (Dirichlet at
//! `R`), the reaction term is forward Euler. Local error comes from step doubling;
//! by default the accepted state is the Richardson combination `2u_{h/2} - u_h`.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{invalid, Error, Result};
use crate::functionals::{classify_report, default_q, kq_weight, EnergyReport, SetMembership};
use crate::ground_state::nonlinear_power;
use crate::radial::{pow_abs, RadialField, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    Focusing,
    Defocusing,
    Off,
}

impl Nonlinearity {
    fn sign(self) -> f64 {
        match self {
            Nonlinearity::Focusing => 1.0,
            Nonlinearity::Defocusing => -1.0,
            Nonlinearity::Off => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Relative local error target per step.
    pub tol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub t_max: f64,
    pub max_steps: u64,
    /// Accept `2u_{h/2} - u_h` instead of `u_{h/2}`.
    pub extrapolate: bool,
    pub nonlinearity: Nonlinearity,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            dt_init: 1e-6,
            dt_min: 1e-12,
            t_max: 1e20,
            max_steps: 5_000_000,
            extrapolate: true,
            nonlinearity: Nonlinearity::Focusing,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol", self.tol),
            ("dt_init", self.dt_init),
            ("dt_min", self.dt_min),
            ("t_max", self.t_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSettings {
    pub amp_cap: f64,
    pub blowup_factor: f64,
    /// Dissipation threshold relative to the initial `‖u‖²_{Ḣ¹}`.
    pub eps_dissip: f64,
    /// Number of trailing snapshots over which the 𝒦^q weight must not increase.
    pub kq_window: usize,
    /// Exponent of the 𝒦^q weight; `None` picks the middle of the admissible window.
    pub kq_q: Option<f64>,
    pub tol_pos: f64,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            amp_cap: 1e8,
            blowup_factor: 10.0,
            eps_dissip: 1e-6,
            kq_window: 5,
            kq_q: None,
            tol_pos: 1e-8,
        }
    }
}

impl DetectorSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("amp_cap", self.amp_cap),
            ("blowup_factor", self.blowup_factor),
            ("eps_dissip", self.eps_dissip),
            ("tol_pos", self.tol_pos),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || v.is_nan() {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.kq_window < 2 {
            return Err(invalid("kq_window", "needs at least 2 snapshots"));
        }
        if let Some(q) = self.kq_q {
            if !(q > 2.0 && q.is_finite()) {
                return Err(invalid("kq_q", format!("must be finite and above 2, got {q}")));
            }
        }
        Ok(())
    }
}

/// Log-spaced snapshot times `0, 10^{e}, 10^{e + 1/k}, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cadence {
    pub first_exponent: i32,
    pub per_decade: u32,
    /// Keep the field at every n-th snapshot (0 keeps none besides the first and last).
    pub checkpoint_every: u32,
}

impl Default for Cadence {
    fn default() -> Self {
        Self {
            first_exponent: -3,
            per_decade: 10,
            checkpoint_every: 1,
        }
    }
}

impl Cadence {
    pub fn validate(&self) -> Result<()> {
        if self.per_decade == 0 {
            return Err(invalid("per_decade", "must be positive"));
        }
        Ok(())
    }

    /// Snapshot time number `k ≥ 1` (`k = 0` is `t = 0`).
    pub fn time(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let pd = self.per_decade as i64;
        let num = self.first_exponent as i64 * pd + (k as i64 - 1);
        if num % pd == 0 {
            10f64.powi((num / pd) as i32)
        } else {
            10f64.powf(num as f64 / pd as f64)
        }
    }
}

/// Integrator state at an accepted time.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub u: RadialField,
    pub dt: f64,
    pub step_count: u64,
    pub rejected: u64,
    /// `∫ ‖∂ₜu‖²_{L²}` since the start of the run.
    pub accumulated_dissipation: f64,
}

impl SolverState {
    /// Starts at `t = 0` with `u(R)` forced to zero.
    pub fn new(u0: RadialField, dt: f64) -> Result<Self> {
        u0.check_finite()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let mut u = u0;
        *u.values_mut().last_mut().unwrap() = 0.0;
        Ok(Self {
            t: 0.0,
            u,
            dt,
            step_count: 0,
            rejected: 0,
            accumulated_dissipation: 0.0,
        })
    }
}

fn reaction(u: &[f64], power: f64, sign: f64, out: &mut [f64]) {
    for (o, &s) in out.iter_mut().zip(u) {
        *o = sign * pow_abs(s, power) * s;
    }
}

/// One IMEX Euler step: `(M + dt K) u⁺ = M (u + dt N(u))` on nodes `0..n-1`.
fn imex_euler(g: &RadialGrid, u: &[f64], dt: f64, power: f64, sign: f64) -> Vec<f64> {
    let n = u.len();
    let m = n - 1;
    let c = g.conductance();
    let v = g.volumes();
    let mut rhs = vec![0.0; m];
    reaction(&u[..m], power, sign, &mut rhs);
    for i in 0..m {
        rhs[i] = v[i] * (u[i] + dt * rhs[i]);
    }
    // Thomas algorithm; sub- and super-diagonals are both -dt c_i.
    let mut upper = vec![0.0; m];
    let mut out = vec![0.0; n];
    let mut denom = v[0] + dt * c[0];
    upper[0] = -dt * c[0] / denom;
    rhs[0] /= denom;
    for i in 1..m {
        let lower = -dt * c[i - 1];
        denom = v[i] + dt * (c[i - 1] + c[i]) - lower * upper[i - 1];
        upper[i] = if i + 1 < m { -dt * c[i] / denom } else { 0.0 };
        rhs[i] = (rhs[i] - lower * rhs[i - 1]) / denom;
    }
    out[m - 1] = rhs[m - 1];
    for i in (0..m - 1).rev() {
        out[i] = rhs[i] - upper[i] * out[i + 1];
    }
    out
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Advances by one accepted step, shrinking `dt` until the local error test passes.
///
/// `t_stop` clips the step so that it lands on a requested time.
pub fn step_until(state: &SolverState, settings: &SolverSettings, t_stop: f64) -> Result<SolverState> {
    let u = state.u.values();
    if !all_finite(u) {
        return Err(Error::Corruption {
            index: u.iter().position(|x| !x.is_finite()).unwrap_or(0),
        });
    }
    let g = state.u.grid().clone();
    let d = g.dim();
    let power = nonlinear_power(d);
    let sign = settings.nonlinearity.sign();
    let mut probe = vec![0.0; u.len()];
    reaction(u, power, sign, &mut probe);
    if let Some(index) = probe.iter().position(|x| !x.is_finite()) {
        return Err(Error::Corruption { index });
    }
    let scale = u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut dt = state.dt;
    let mut rejected = state.rejected;
    loop {
        let clipped = t_stop > state.t && state.t + dt >= t_stop;
        let h = if clipped { t_stop - state.t } else { dt };
        if h < settings.dt_min {
            return Err(Error::StepCollapse { t: state.t, dt: h });
        }
        if scale == 0.0 {
            let mut next = state.clone();
            next.t = if clipped { t_stop } else { state.t + h };
            next.dt = (2.0 * dt).min(settings.t_max);
            next.step_count += 1;
            return Ok(next);
        }
        let full = imex_euler(&g, u, h, power, sign);
        let half = imex_euler(&g, u, 0.5 * h, power, sign);
        let fine = imex_euler(&g, &half, 0.5 * h, power, sign);
        let err = if all_finite(&full) && all_finite(&fine) {
            let diff = full.iter().zip(&fine).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            diff / (settings.tol * scale)
        } else {
            f64::INFINITY
        };
        if err <= 1.0 {
            let new: Vec<f64> = if settings.extrapolate {
                fine.iter().zip(&full).map(|(f, c)| 2.0 * f - c).collect()
            } else {
                fine
            };
            let vol = g.volumes();
            let increment: f64 = new
                .iter()
                .zip(u)
                .zip(vol)
                .map(|((a, b), w)| w * (a - b) * (a - b))
                .sum();
            let growth = if err > 0.0 { (0.9 / err.sqrt()).clamp(0.2, 2.0) } else { 2.0 };
            let next_dt = if clipped { dt.max(h) } else { h * growth };
            return Ok(SolverState {
                t: if clipped { t_stop } else { state.t + h },
                u: RadialField::new(g, new)?,
                dt: next_dt.min(settings.t_max),
                step_count: state.step_count + 1,
                rejected,
                accumulated_dissipation: state.accumulated_dissipation + increment / h,
            });
        }
        rejected += 1;
        let shrink = if err.is_finite() { (0.9 / err.sqrt()).clamp(0.2, 0.9) } else { 0.2 };
        dt = h * shrink;
    }
}

/// One accepted step with no time clipping.
pub fn step(state: &SolverState, settings: &SolverSettings) -> Result<SolverState> {
    step_until(state, settings, f64::INFINITY)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub report: EnergyReport,
    pub kq: Option<f64>,
    pub sup: f64,
    pub min: f64,
    pub dissipation: f64,
    pub field: Option<RadialField>,
}

impl Snapshot {
    pub fn t(&self) -> f64 {
        self.report.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    NehariToNegative,
    NehariToPositive,
    GradientAboveBubble,
    GradientBelowBubble,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventKind::NehariToNegative => "nehari_to_negative",
            EventKind::NehariToPositive => "nehari_to_positive",
            EventKind::GradientAboveBubble => "gradient_above_bubble",
            EventKind::GradientBelowBubble => "gradient_below_bubble",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndecidedReason {
    TMax,
    StepLimit,
    Corruption,
    StepCollapse,
    AtThreshold,
}

impl fmt::Display for UndecidedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            UndecidedReason::TMax => "t_max",
            UndecidedReason::StepLimit => "step_limit",
            UndecidedReason::Corruption => "corruption",
            UndecidedReason::StepCollapse => "step_collapse",
            UndecidedReason::AtThreshold => "at_threshold",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Dissipative,
    Blowup,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Dissipative { t_end: f64, final_h1_sq: f64 },
    /// `T_m` is only known to lie in `bracket`.
    Blowup { t_end: f64, bracket: (f64, f64) },
    Undecided { t_end: f64, reason: UndecidedReason },
}

impl Verdict {
    pub fn kind(&self) -> VerdictKind {
        match self {
            Verdict::Dissipative { .. } => VerdictKind::Dissipative,
            Verdict::Blowup { .. } => VerdictKind::Blowup,
            Verdict::Undecided { .. } => VerdictKind::Undecided,
        }
    }

    pub fn t_end(&self) -> f64 {
        match *self {
            Verdict::Dissipative { t_end, .. } | Verdict::Blowup { t_end, .. } | Verdict::Undecided { t_end, .. } => t_end,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Dissipative { final_h1_sq, .. } => write!(f, "dissipative (|u|^2_H1 = {final_h1_sq:.3e})"),
            Verdict::Blowup { bracket, .. } => write!(f, "blowup (T_m in [{:.6e}, {:.6e}])", bracket.0, bracket.1),
            Verdict::Undecided { reason, .. } => write!(f, "undecided ({reason})"),
        }
    }
}

/// Reference scales of the bubble on the run grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub e_of_w: f64,
    /// `‖∇W‖²`
    pub h1_sq_w: f64,
}

impl Threshold {
    pub fn from_energy(d: usize, e_of_w: f64) -> Self {
        Self {
            e_of_w,
            h1_sq_w: d as f64 * e_of_w,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Arc<RadialGrid>,
    pub threshold: Threshold,
    pub initial_set: SetMembership,
    pub snapshots: Vec<Snapshot>,
    pub events: Vec<Event>,
    pub verdict: Verdict,
    /// Extremes of `J(u)` over all accepted steps.
    pub nehari_range: (f64, f64),
    pub steps: u64,
    pub rejected: u64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn initial_h1_sq(&self) -> f64 {
        self.snapshots[0].report.h1_sq
    }

    /// Snapshot at `t` (relative match within 1e-12).
    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.t() - t).abs() <= 1e-12 * t.abs().max(1e-300))
    }

    /// Whether every snapshot satisfies `min u ≥ -tol_pos`.
    pub fn positivity_holds(&self, tol_pos: f64) -> bool {
        self.snapshots.iter().all(|s| s.min >= -tol_pos)
    }

    /// Largest increase of `E` between consecutive snapshots.
    pub fn max_energy_increase(&self) -> f64 {
        self.snapshots
            .windows(2)
            .map(|w| w[1].report.energy - w[0].report.energy)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// First snapshot index after which `‖u‖²_{Ḣ¹}` never increases by more than
    /// `slack` times its initial value.
    pub fn lyapunov_index(&self, slack: f64) -> Option<usize> {
        let allow = slack * self.initial_h1_sq().abs();
        let h: Vec<f64> = self.snapshots.iter().map(|s| s.report.h1_sq).collect();
        let n = h.len();
        if n == 0 {
            return None;
        }
        let mut start = n - 1;
        while start > 0 && h[start] <= h[start - 1] + allow {
            start -= 1;
        }
        Some(start)
    }

    /// Largest `|Δ(½‖u‖²)/Δt + J_mid|` relative to `max(|J_mid|, |Δ(½‖u‖²)/Δt|)`
    /// over consecutive snapshot pairs with finite `L²` norms.
    pub fn l2_balance_defect(&self) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for w in self.snapshots.windows(2) {
            let (Some(a), Some(b)) = (w[0].report.l2_sq, w[1].report.l2_sq) else {
                continue;
            };
            let dt = w[1].t() - w[0].t();
            let lhs = 0.5 * (b - a) / dt;
            let j = 0.5 * (w[0].report.nehari + w[1].report.nehari);
            let scale = lhs.abs().max(j.abs());
            if scale == 0.0 {
                continue;
            }
            let rel = (lhs + j).abs() / scale;
            worst = Some(worst.map_or(rel, |x: f64| x.max(rel)));
        }
        worst
    }
}

/// `‖u‖²_{Ḣ¹} ≤ eps·initial` and a nonincreasing 𝒦^q weight over the last K snapshots.
pub fn detect_dissipation(snapshots: &[Snapshot], detect: &DetectorSettings) -> bool {
    if snapshots.len() < 2 {
        return false;
    }
    let initial = snapshots[0].report.h1_sq;
    let last = snapshots.last().unwrap();
    if last.report.h1_sq > detect.eps_dissip * initial {
        return false;
    }
    let weights: Vec<f64> = snapshots.iter().filter_map(|s| s.kq).collect();
    let take = detect.kq_window.min(weights.len());
    if take < 2 {
        return false;
    }
    weights[weights.len() - take..].windows(2).all(|w| w[1] <= w[0])
}

/// Amplitude cap exceeded, or gradient growth combined with a collapsed step.
pub fn detect_blowup(sup: f64, h1_sq: f64, initial_h1_sq: f64, dt: f64, solver: &SolverSettings, detect: &DetectorSettings) -> bool {
    sup > detect.amp_cap
        || (h1_sq.sqrt() > detect.blowup_factor * initial_h1_sq.sqrt() && dt < solver.dt_min)
}

fn blowup_bracket(t: f64, sup: f64, dt: f64, d: usize) -> (f64, f64) {
    let p = nonlinear_power(d);
    // the flat ODE u' = u^{1+p} blows up after u^{-p}/p
    let ode = (-p * sup.ln()).exp() / p;
    let width = ode.max(dt);
    (t, t + 10.0 * width)
}

fn snapshot(t: f64, state: &SolverState, q: f64, keep: bool) -> Result<Snapshot> {
    let report = EnergyReport::of(t, &state.u)?;
    let kq = if t > 0.0 { Some(kq_weight(t, &state.u, q)?) } else { None };
    Ok(Snapshot {
        report,
        kq,
        sup: state.u.sup_norm(),
        min: state.u.min_value(),
        dissipation: state.accumulated_dissipation,
        field: keep.then(|| state.u.clone()),
    })
}

fn nehari_sign(rep: &EnergyReport) -> i8 {
    let band = crate::functionals::TOL_THRESHOLD * rep.h1_sq;
    if rep.nehari > band {
        1
    } else if rep.nehari < -band {
        -1
    } else {
        0
    }
}

struct Recorder {
    threshold: Threshold,
    last_sign: i8,
    above: bool,
    events: Vec<Event>,
    nehari_range: (f64, f64),
}

impl Recorder {
    fn observe(&mut self, t: f64, rep: &EnergyReport) {
        let s = nehari_sign(rep);
        if s != 0 {
            if self.last_sign != 0 && s != self.last_sign {
                let kind = if s < 0 { EventKind::NehariToNegative } else { EventKind::NehariToPositive };
                self.events.push(Event { t, kind });
            }
            self.last_sign = s;
        }
        let above = rep.h1_sq > self.threshold.h1_sq_w;
        if above != self.above {
            let kind = if above { EventKind::GradientAboveBubble } else { EventKind::GradientBelowBubble };
            self.events.push(Event { t, kind });
            self.above = above;
        }
        self.nehari_range.0 = self.nehari_range.0.min(rep.nehari);
        self.nehari_range.1 = self.nehari_range.1.max(rep.nehari);
    }
}

/// Integrates from `u0` until a verdict fires or `t_max` is reached.
pub fn integrate(
    u0: RadialField,
    threshold: Threshold,
    solver: &SolverSettings,
    detect: &DetectorSettings,
    cadence: &Cadence,
) -> Result<Trajectory> {
    solver.validate()?;
    detect.validate()?;
    cadence.validate()?;
    let d = u0.dim();
    let q = detect.kq_q.unwrap_or_else(|| default_q(d));
    let grid = u0.grid().clone();
    let mut state = SolverState::new(u0, solver.dt_init)?;
    let first = snapshot(0.0, &state, q, true)?;
    let initial_set = classify_report(&first.report, threshold.e_of_w);
    let initial_h1 = first.report.h1_sq;
    let mut rec = Recorder {
        threshold,
        last_sign: nehari_sign(&first.report),
        above: first.report.h1_sq > threshold.h1_sq_w,
        events: Vec::new(),
        nehari_range: (first.report.nehari, first.report.nehari),
    };
    let mut snapshots = vec![first];
    let mut k: u64 = 1;
    let every = cadence.checkpoint_every as u64;
    let verdict = loop {
        let target = cadence.time(k).min(solver.t_max);
        let next = match step_until(&state, solver, target) {
            Ok(next) => next,
            Err(Error::StepCollapse { t, dt }) => {
                let h1 = state.u.dirichlet_energy();
                let sup = state.u.sup_norm();
                if detect_blowup(sup, h1, initial_h1, dt, solver, detect) {
                    break Verdict::Blowup { t_end: t, bracket: blowup_bracket(t, sup, dt, d) };
                }
                break Verdict::Undecided { t_end: t, reason: UndecidedReason::StepCollapse };
            }
            Err(Error::Corruption { .. }) => {
                break Verdict::Undecided { t_end: state.t, reason: UndecidedReason::Corruption };
            }
            Err(e) => return Err(e),
        };
        state = next;
        let rep = match EnergyReport::of(state.t, &state.u) {
            Ok(r) if r.energy.is_finite() => r,
            _ => break Verdict::Undecided { t_end: state.t, reason: UndecidedReason::Corruption },
        };
        rec.observe(state.t, &rep);
        let sup = state.u.sup_norm();
        if detect_blowup(sup, rep.h1_sq, initial_h1, state.dt, solver, detect) {
            snapshots.push(snapshot(state.t, &state, q, true)?);
            break Verdict::Blowup {
                t_end: state.t,
                bracket: blowup_bracket(state.t, sup, state.dt, d),
            };
        }
        if state.t >= target {
            let done = state.t >= solver.t_max;
            let keep = done || (every > 0 && k % every == 0);
            snapshots.push(snapshot(state.t, &state, q, keep)?);
            k += 1;
            if detect_dissipation(&snapshots, detect) {
                let last = snapshots.last_mut().unwrap();
                if last.field.is_none() {
                    last.field = Some(state.u.clone());
                }
                break Verdict::Dissipative { t_end: state.t, final_h1_sq: rep.h1_sq };
            }
            if done {
                break Verdict::Undecided { t_end: state.t, reason: UndecidedReason::TMax };
            }
        }
        if state.step_count >= solver.max_steps {
            break Verdict::Undecided { t_end: state.t, reason: UndecidedReason::StepLimit };
        }
    };
    if snapshots.last().map(|s| s.t()) != Some(state.t) && verdict.kind() != VerdictKind::Blowup {
        if let Ok(s) = snapshot(state.t, &state, q, true) {
            if s.report.energy.is_finite() {
                snapshots.push(s);
            }
        }
    }
    Ok(Trajectory {
        grid,
        threshold,
        initial_set,
        snapshots,
        events: rec.events,
        verdict,
        nehari_range: rec.nehari_range,
        steps: state.step_count,
        rejected: state.rejected,
    })
}

/// A trajectory holding only `u0`, closed with `Undecided { reason }` at `t = 0`.
pub fn unstarted(u0: RadialField, threshold: Threshold, detect: &DetectorSettings, reason: UndecidedReason) -> Result<Trajectory> {
    let q = detect.kq_q.unwrap_or_else(|| default_q(u0.dim()));
    let grid = u0.grid().clone();
    let state = SolverState::new(u0, 1.0)?;
    let first = snapshot(0.0, &state, q, true)?;
    let nehari = first.report.nehari;
    Ok(Trajectory {
        grid,
        threshold,
        initial_set: classify_report(&first.report, threshold.e_of_w),
        snapshots: vec![first],
        events: Vec::new(),
        verdict: Verdict::Undecided { t_end: 0.0, reason },
        nehari_range: (nehari, nehari),
        steps: 0,
        rejected: 0,
    })
}

/// Builds the initial datum of `config` and integrates it; data within
/// `10·TOL_THRESHOLD` of the threshold come back `Undecided(at_threshold)` unrun.
pub fn run(config: &RunConfig) -> Result<Trajectory> {
    let prep = config.prepare()?;
    if prep.near_threshold() {
        return unstarted(prep.u0, prep.threshold, &config.detect, UndecidedReason::AtThreshold);
    }
    integrate(prep.u0, prep.threshold, &config.solver, &config.detect, &config.cadence)
}

/// Energy balance on `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBalance {
    /// `|E(u(t1)) + D(t0, t1) - E(u(t0))|`
    pub residual: f64,
    pub dissipation: f64,
    pub energy_t0: f64,
    pub energy_t1: f64,
}

impl EnergyBalance {
    /// Energy inequality `E(t1) ≤ E(t0) + tol`.
    pub fn inequality_holds(&self, tol: f64) -> bool {
        self.energy_t1 <= self.energy_t0 + tol
    }
}

/// Discrete energy identity between two checkpointed snapshots.
pub fn energy_identity_residual(traj: &Trajectory, t0: f64, t1: f64) -> Result<EnergyBalance> {
    if !(t0 < t1) {
        return Err(invalid("t0", format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    let find = |t: f64| -> Result<&Snapshot> {
        traj.snapshot_at(t)
            .filter(|s| s.field.is_some())
            .ok_or(Error::MissingCheckpoint(t))
    };
    let a = find(t0)?;
    let b = find(t1)?;
    let dissipation = b.dissipation - a.dissipation;
    Ok(EnergyBalance {
        residual: (b.report.energy + dissipation - a.report.energy).abs(),
        dissipation,
        energy_t0: a.report.energy,
        energy_t1: b.report.energy,
    })
}

const CHECKPOINT_MAGIC: &str = "critheat-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Writes `(r_i, u_i)` rows after a `d R n t` header.
pub fn write_checkpoint<W: Write>(mut w: W, t: f64, u: &RadialField) -> std::io::Result<()> {
    let g = u.grid();
    writeln!(w, "{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}")?;
    writeln!(w, "d {}", g.dim())?;
    writeln!(w, "R {:e}", g.radius())?;
    writeln!(w, "n {}", g.len())?;
    writeln!(w, "t {t:e}")?;
    for (r, v) in g.nodes().iter().zip(u.values()) {
        writeln!(w, "{r:e} {v:e}")?;
    }
    Ok(())
}

/// Reads a checkpoint, returning `(t, u)` on a grid rebuilt from the stored nodes.
pub fn read_checkpoint<R: BufRead>(r: R) -> Result<(f64, RadialField)> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String> {
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::Format(e.to_string())),
            None => Err(Error::Format(format!("unexpected end of file before {what}"))),
        }
    };
    let magic = next("header")?;
    let version = magic
        .strip_prefix(CHECKPOINT_MAGIC)
        .and_then(|s| s.trim().strip_prefix('v'))
        .and_then(|s| s.parse::<u32>().ok())
        .ok_or_else(|| Error::Format(format!("bad header line {magic:?}")))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = next(key)?;
        let mut it = line.split_whitespace();
        match (it.next(), it.next()) {
            (Some(k), Some(v)) if k == key => Ok(v.to_string()),
            _ => Err(Error::Format(format!("expected `{key} <value>`, got {line:?}"))),
        }
    };
    let bad = |k: &str| Error::Format(format!("unparsable `{k}`"));
    let d: usize = field("d")?.parse().map_err(|_| bad("d"))?;
    let radius: f64 = field("R")?.parse().map_err(|_| bad("R"))?;
    let n: usize = field("n")?.parse().map_err(|_| bad("n"))?;
    let t: f64 = field("t")?.parse().map_err(|_| bad("t"))?;
    let mut nodes = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let line = next("data row")?;
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        match (it.next(), it.next()) {
            (Some(Ok(r)), Some(Ok(v))) => {
                nodes.push(r);
                values.push(v);
            }
            _ => return Err(Error::Format(format!("bad data row {i}: {line:?}"))),
        }
    }
    if nodes.last() != Some(&radius) {
        return Err(Error::Format("last node differs from R".into()));
    }
    let grid = Arc::new(RadialGrid::from_nodes(d, nodes)?);
    Ok((t, RadialField::new(grid, values)?))
}

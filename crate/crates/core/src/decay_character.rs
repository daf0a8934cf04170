//! Radial spectra `s ↦ v̂(s)`, the low-frequency mass `F(ρ)`, decay indicators,
//! the decay character `r*`, and the exact heat semigroup on the Fourier side.
//!
//! The Fourier transform is the unitary one, so for radial `u`
//! `v̂(s) = ∫_0^∞ u(r) Λ_ν(rs) r^{d-1} dr` with `Λ_ν(x) = J_ν(x)/x^ν`, `ν = (d-2)/2`,
//! and `‖u‖²_{L²} = ω_{d-1} ∫ |v̂(s)|² s^{d-1} ds`.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, integrate_from_zero, GAUSS4};
use crate::radial::{gamma_half, sphere_area, RadialField, RadialGrid};
use crate::special::{asymptotic_cutoff, bessel_k1, hankel_pq, hankel_phase, scaled_bessel_j, Order};

/// Default frequency cutoff, `50/√t_min` with `t_min = 1`.
pub const DEFAULT_S_MAX: f64 = 50.0;

/// Largest tolerated deviation of `log F` from its fitted line.
pub const TOL_FIT: f64 = 0.05;

/// Tabulated spectra must resolve frequencies below this.
pub const TABULATED_LOW_FREQUENCY: f64 = 1e-3;

/// Ratio `|u|/max|u|` allowed near `R` before a Hankel transform.
pub const HANKEL_TAIL_LIMIT: f64 = 1e-8;

/// `s_max` such that `e^{-2 t s²}` is negligible beyond it for all `t ≥ t_min`.
pub fn s_max_for(t_min: f64) -> f64 {
    50.0 / t_min.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClosedForm {
    /// `amp · s^k · e^{-β s²}`
    MonomialGaussian { amp: f64, k: f64, beta: f64 },
    /// `s^k`
    PowerLaw { k: f64 },
    /// `amp · s^k · (2 + sin(κ ln s)) · e^{-s²}`, whose `F(ρ)/ρ^{2k+d}` oscillates.
    LogOscillating { amp: f64, k: f64, kappa: f64 },
    /// Transform of the unit bubble `W`.
    Bubble,
}

impl ClosedForm {
    fn eval(&self, d: usize, s: f64) -> f64 {
        match *self {
            ClosedForm::MonomialGaussian { amp, k, beta } => amp * s.powf(k) * (-beta * s * s).exp(),
            ClosedForm::PowerLaw { k } => s.powf(k),
            ClosedForm::LogOscillating { amp, k, kappa } => {
                amp * s.powf(k) * (2.0 + (kappa * s.ln()).sin()) * (-s * s).exp()
            }
            ClosedForm::Bubble => {
                let df = d as f64;
                let c = (df * (df - 2.0)).powf((df - 2.0) / 4.0);
                c * 2f64.powf((4.0 - df) / 2.0) / gamma_half(d - 2) * bessel_k1(s) / s
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumKind {
    ClosedForm(ClosedForm),
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
}

/// A radial spectrum, multiplied by `s^{symbol_power}` (the symbol of `Λ^{symbol_power}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFn {
    pub d: usize,
    pub kind: SpectrumKind,
    pub symbol_power: u32,
    pub s_max: f64,
    pub description: String,
}

impl SpectrumFn {
    pub fn closed(d: usize, form: ClosedForm) -> Result<Self> {
        check_dim(d)?;
        let description = format!("{form:?}");
        Ok(Self {
            d,
            kind: SpectrumKind::ClosedForm(form),
            symbol_power: 0,
            s_max: DEFAULT_S_MAX,
            description,
        })
    }

    /// `amp · s^k · e^{-s²}`.
    pub fn monomial_gaussian(d: usize, k: f64) -> Result<Self> {
        Self::closed(d, ClosedForm::MonomialGaussian { amp: 1.0, k, beta: 1.0 })
    }

    pub fn tabulated(d: usize, nodes: Vec<f64>, values: Vec<f64>, description: impl Into<String>) -> Result<Self> {
        check_dim(d)?;
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(invalid("nodes", "need at least two nodes, one value each"));
        }
        if !(nodes[0] > 0.0) || nodes[0] >= TABULATED_LOW_FREQUENCY {
            return Err(invalid(
                "nodes",
                format!("first node must lie in (0, {TABULATED_LOW_FREQUENCY}), got {}", nodes[0]),
            ));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("nodes", "must be strictly increasing"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Corruption { index: i });
        }
        let s_max = *nodes.last().unwrap();
        Ok(Self {
            d,
            kind: SpectrumKind::Tabulated { nodes, values },
            symbol_power: 0,
            s_max,
            description: description.into(),
        })
    }

    pub fn with_s_max(mut self, s_max: f64) -> Self {
        self.s_max = s_max;
        self
    }

    /// `v̂(s)`, zero beyond `s_max`.
    pub fn value(&self, s: f64) -> f64 {
        if s > self.s_max || s <= 0.0 {
            return 0.0;
        }
        let base = match &self.kind {
            SpectrumKind::ClosedForm(f) => f.eval(self.d, s),
            SpectrumKind::Tabulated { nodes, values } => interpolate_tabulated(nodes, values, s),
        };
        base * s.powi(self.symbol_power as i32)
    }

    /// `ω_{d-1} |v̂(s)|² s^{d-1}`, the radial density of `|v̂|²`.
    fn density(&self, s: f64) -> f64 {
        let v = self.value(s);
        sphere_area(self.d) * v * v * s.powi(self.d as i32 - 1)
    }

    /// Breakpoints for quadrature above `s = 1` (node positions for tables).
    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = vec![lo];
        match &self.kind {
            SpectrumKind::Tabulated { nodes, .. } => {
                pts.extend(nodes.iter().copied().filter(|s| *s > lo && *s < hi));
            }
            SpectrumKind::ClosedForm(_) => {
                let mut s = 2.0 * lo;
                while s < hi {
                    pts.push(s);
                    s *= 2.0;
                }
            }
        }
        pts.push(hi);
        pts
    }

    /// `ω_{d-1} ∫_a^b w(s) |v̂(s)|² s^{d-1} ds` for `0 < a < b`.
    fn weighted_mass(&self, a: f64, b: f64, weight: &(impl Fn(f64) -> f64 + Sync)) -> f64 {
        let pts = self.breakpoints(a, b);
        pts.windows(2)
            .map(|w| integrate(|s| weight(s) * self.density(s), w[0], w[1], 1e-11, 0.0))
            .sum()
    }

    /// `ω_{d-1} ∫_0^ρ w(s) |v̂|² s^{d-1} ds`, splitting at the first table node.
    fn mass_below(&self, rho: f64, weight: &(impl Fn(f64) -> f64 + Sync)) -> f64 {
        let first = match &self.kind {
            SpectrumKind::Tabulated { nodes, .. } => nodes[0].min(rho),
            SpectrumKind::ClosedForm(_) => rho.min(1.0),
        };
        let low = integrate_from_zero(|s| weight(s) * self.density(s), first, 1e-11);
        if rho > first {
            low + self.weighted_mass(first, rho, weight)
        } else {
            low
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 3 {
        return Err(invalid("d", format!("dimension must be >= 3, got {d}")));
    }
    Ok(())
}

fn interpolate_tabulated(nodes: &[f64], values: &[f64], s: f64) -> f64 {
    let n = nodes.len();
    let loglog = |i: usize, j: usize, s: f64| -> f64 {
        let (a, b) = (values[i], values[j]);
        if a * b > 0.0 {
            let slope = (b / a).ln() / (nodes[j] / nodes[i]).ln();
            a * (s / nodes[i]).powf(slope)
        } else {
            a + (b - a) * (s - nodes[i]) / (nodes[j] - nodes[i])
        }
    };
    if s <= nodes[0] {
        let (a, b) = (values[0], values[1]);
        return if a * b > 0.0 { loglog(0, 1, s) } else { a };
    }
    if s >= nodes[n - 1] {
        return if s == nodes[n - 1] { values[n - 1] } else { 0.0 };
    }
    let k = nodes.partition_point(|x| *x <= s) - 1;
    // quadratic in (ln s, ln|v|), averaged over the two stencils around [k, k+1]
    let quad = |i: usize| -> Option<f64> {
        let idx = [i, i + 1, i + 2];
        if idx[2] >= n {
            return None;
        }
        let sign = values[i].signum();
        if idx.iter().any(|&j| values[j] == 0.0 || values[j].signum() != sign) {
            return None;
        }
        let x = s.ln();
        let xs = idx.map(|j| nodes[j].ln());
        let ys = idx.map(|j| values[j].abs().ln());
        let mut y = 0.0;
        for a in 0..3 {
            let mut l = 1.0;
            for b in 0..3 {
                if a != b {
                    l *= (x - xs[b]) / (xs[a] - xs[b]);
                }
            }
            y += l * ys[a];
        }
        Some(sign * y.exp())
    };
    let left = if k >= 1 { quad(k - 1) } else { None };
    match (left, quad(k)) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => loglog(k, k + 1, s),
    }
}

/// `F(ρ) = ∫_{B(ρ)} |v̂(ξ)|² dξ`.
pub fn low_freq_mass(spec: &SpectrumFn, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= spec.s_max) {
        return Err(Error::Domain(format!("rho = {rho} outside (0, {}]", spec.s_max)));
    }
    Ok(spec.mass_below(rho, &|_| 1.0))
}

/// `ρ^{-2r-d} F(ρ)` along `rhos`.
pub fn decay_indicator(spec: &SpectrumFn, r: f64, rhos: &[f64]) -> Result<Vec<f64>> {
    let d = spec.d as f64;
    if !(r > -d / 2.0) {
        return Err(invalid("r", format!("need r > -d/2 = {}, got {r}", -d / 2.0)));
    }
    rhos.iter()
        .map(|&rho| Ok(rho.powf(-2.0 * r - d) * low_freq_mass(spec, rho)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacterStatus {
    Exists,
    /// `log F` is not linear in `log ρ` within [`TOL_FIT`].
    NonExistent,
    /// Slope at or below `-d/2`.
    BoundaryLow,
    /// Spectrum vanishes on the fit window.
    Vanishing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCharacterEstimate {
    pub r_star: f64,
    pub window: (f64, f64),
    pub p_r_value: f64,
    pub fit_residual: f64,
    pub status: CharacterStatus,
}

/// Geometric ρ-ladder used for the fit.
pub fn rho_ladder() -> Vec<f64> {
    (0..12).map(|j| 1e-3 * 100f64.powf(j as f64 / 11.0)).collect()
}

/// Least-squares line `y ≈ a + b x`; returns `(a, b, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    (a, b, r2)
}

/// Local exponent of `|v̂(s)|² s^d` far below the fit window.
fn low_frequency_exponent(spec: &SpectrumFn) -> f64 {
    let g = |s: f64| {
        let v = spec.value(s);
        (v * v).ln() + spec.d as f64 * s.ln()
    };
    let (a, b) = (1e-7, 1e-6);
    (g(b) - g(a)) / (b / a).ln()
}

/// `r*` from the slope of `log F` against `log ρ` on [`rho_ladder`].
pub fn decay_character(spec: &SpectrumFn) -> Result<DecayCharacterEstimate> {
    let rhos = rho_ladder();
    let window = (rhos[0], *rhos.last().unwrap());
    if spec.s_max < window.1 {
        return Err(Error::Domain(format!("s_max = {} below the fit window", spec.s_max)));
    }
    let d = spec.d as f64;
    let alpha = low_frequency_exponent(spec);
    if alpha.is_finite() && alpha <= 1e-3 {
        return Ok(DecayCharacterEstimate {
            r_star: (alpha - d) / 2.0,
            window,
            p_r_value: f64::INFINITY,
            fit_residual: f64::NAN,
            status: CharacterStatus::BoundaryLow,
        });
    }
    let masses = rhos
        .iter()
        .map(|&r| low_freq_mass(spec, r))
        .collect::<Result<Vec<f64>>>()?;
    if masses.iter().all(|m| *m == 0.0) {
        return Ok(DecayCharacterEstimate {
            r_star: f64::INFINITY,
            window,
            p_r_value: 0.0,
            fit_residual: 0.0,
            status: CharacterStatus::Vanishing,
        });
    }
    if masses.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Ok(DecayCharacterEstimate {
            r_star: f64::NAN,
            window,
            p_r_value: f64::NAN,
            fit_residual: f64::INFINITY,
            status: CharacterStatus::NonExistent,
        });
    }
    let x: Vec<f64> = rhos.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
    let (a, b, _) = linear_fit(&x, &y);
    let fit_residual = x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| (yi - a - b * xi).abs())
        .fold(0.0, f64::max);
    let r_star = (b - d) / 2.0;
    let status = if r_star <= -d / 2.0 {
        CharacterStatus::BoundaryLow
    } else if fit_residual > TOL_FIT {
        CharacterStatus::NonExistent
    } else {
        CharacterStatus::Exists
    };
    Ok(DecayCharacterEstimate {
        r_star,
        window,
        p_r_value: masses[0] * rhos[0].powf(-2.0 * r_star - d),
        fit_residual,
        status,
    })
}

/// Spectrum of `Λu`: multiplies by `s`.
pub fn lambda_spectrum(spec: &SpectrumFn) -> SpectrumFn {
    let mut out = spec.clone();
    match &mut out.kind {
        SpectrumKind::Tabulated { nodes, values } => {
            for (v, s) in values.iter_mut().zip(nodes.iter()) {
                *v *= s;
            }
        }
        SpectrumKind::ClosedForm(_) => out.symbol_power += 1,
    }
    out.description = format!("Lambda[{}]", spec.description);
    out
}

/// `‖e^{tΔ}v₀‖²_{L²} = ω_{d-1} ∫_0^{s_max} e^{-2ts²}|v̂|² s^{d-1} ds`.
pub fn linear_heat_l2_sq(spec: &SpectrumFn, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("time must be nonnegative, got {t}")));
    }
    Ok(spec.mass_below(spec.s_max, &move |s: f64| (-2.0 * t * s * s).exp()))
}

/// `ω_{d-1} ∫_0^{ρ} s² |v̂|² s^{d-1} ds`, the part of `‖∇v‖²` inside `B(ρ)`.
pub fn low_freq_gradient_mass(spec: &SpectrumFn, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("rho must be positive, got {rho}")));
    }
    Ok(spec.mass_below(rho.min(spec.s_max), &|s: f64| s * s))
}

/// `ω_{d-1} ∫_a^b s² |v̂|² s^{d-1} ds` for `0 < a ≤ b`.
pub fn gradient_mass_between(spec: &SpectrumFn, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b >= a) {
        return Err(Error::Domain(format!("need 0 < a <= b, got ({a}, {b})")));
    }
    let (a, b) = (a.min(spec.s_max), b.min(spec.s_max));
    Ok(if b > a { spec.weighted_mass(a, b, &|s: f64| s * s) } else { 0.0 })
}

/// [`low_freq_gradient_mass`] at each of the increasing radii `rhos`, accumulated shell by shell.
pub fn cumulative_gradient_mass(spec: &SpectrumFn, rhos: &[f64]) -> Result<Vec<f64>> {
    if rhos.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(invalid("rhos", "radii must be nondecreasing"));
    }
    let Some(&first) = rhos.first() else {
        return Ok(Vec::new());
    };
    let mut out = vec![low_freq_gradient_mass(spec, first)?];
    for w in rhos.windows(2) {
        let last = *out.last().unwrap();
        out.push(last + gradient_mass_between(spec, w[0], w[1])?);
    }
    Ok(out)
}

/// Extremes of `‖v(t)‖² (1+t)^{d/2 + r*}` over `t_grid`.
pub fn decay_bounds_check(spec: &SpectrumFn, r_star: f64, t_grid: &[f64]) -> Result<(f64, f64)> {
    if t_grid.is_empty() {
        return Err(invalid("t_grid", "empty"));
    }
    let power = spec.d as f64 / 2.0 + r_star;
    let ratios = t_grid
        .iter()
        .map(|&t| Ok(linear_heat_l2_sq(spec, t)? * (1.0 + t).powf(power)))
        .collect::<Result<Vec<f64>>>()?;
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Geometric frequency nodes `[1e-4, s_hi]`.
pub fn default_s_nodes(s_hi: f64, count: usize) -> Vec<f64> {
    let lo: f64 = 1e-4;
    let ratio = (s_hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|j| lo * (ratio * j as f64).exp()).collect()
}

/// Tabulated `v̂(s_j)` of a grid field (piecewise-linear `u`).
pub fn hankel_spectrum(u: &RadialField, s_nodes: &[f64]) -> Result<SpectrumFn> {
    u.check_finite()?;
    let g = u.grid();
    let peak = u.sup_norm();
    if peak > 0.0 {
        let cut = 0.99 * g.radius();
        let tail = g
            .nodes()
            .iter()
            .zip(u.values())
            .filter(|(r, _)| **r >= cut)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        let ratio = tail / peak;
        if ratio > HANKEL_TAIL_LIMIT {
            return Err(Error::TailMass { ratio });
        }
    }
    truncated_hankel_spectrum(u, s_nodes)
}

/// [`hankel_spectrum`] of `u` extended by zero beyond `R`, with no tail check.
pub fn truncated_hankel_spectrum(u: &RadialField, s_nodes: &[f64]) -> Result<SpectrumFn> {
    u.check_finite()?;
    let d = u.dim();
    let values: Vec<f64> = s_nodes.par_iter().map(|&s| hankel_at(u, s)).collect();
    SpectrumFn::tabulated(d, s_nodes.to_vec(), values, "hankel transform of a grid field")
}

/// `∫_0^R u(r) Λ_ν(rs) r^{d-1} dr` for piecewise-linear `u`.
///
/// Cells with `s·h ≤ 1` or inside the Bessel core use Gauss–Legendre (subdivided
/// so each piece spans at most one radian). Outer cells use a Filon rule: the kernel
/// is `Re[B(rs) e^{irs}]` with `B` slowly varying, `u r^{d-1} B` is interpolated by a
/// quadratic and integrated against `e^{irs}` exactly.
fn hankel_at(u: &RadialField, s: f64) -> f64 {
    let g = u.grid();
    let d = g.dim();
    let nu = Order::radial(d);
    let x = g.nodes();
    let vals = u.values();
    let cut = asymptotic_cutoff(nu);
    let phase = hankel_phase(nu);
    let lin = |i: usize, r: f64| vals[i] + (vals[i + 1] - vals[i]) * (r - x[i]) / (x[i + 1] - x[i]);
    // u r^{d-1} B(rs)
    let amplitude = |i: usize, r: f64| -> (f64, f64) {
        let z = r * s;
        let (p, q) = hankel_pq(nu, z);
        let m = lin(i, r) * r.powi(d as i32 - 1) * (2.0 / (PI * z)).sqrt() * z.powf(-nu.value());
        let (c, sn) = (phase.cos(), phase.sin());
        // (p + iq) e^{-i phase}
        (m * (p * c + q * sn), m * (q * c - p * sn))
    };
    let mut acc = 0.0;
    for i in 0..x.len() - 1 {
        if vals[i] == 0.0 && vals[i + 1] == 0.0 {
            continue;
        }
        let h = x[i + 1] - x[i];
        if s * h > 1.0 && x[i] * s >= cut {
            acc += filon_cell(&amplitude, i, x[i], h, s);
            continue;
        }
        let pieces = (s * h).ceil().max(1.0) as usize;
        let hp = h / pieces as f64;
        for k in 0..pieces {
            let lo = x[i] + k as f64 * hp;
            for (xi, w) in GAUSS4 {
                let r = lo + xi * hp;
                acc += w * hp * lin(i, r) * scaled_bessel_j(nu, r * s) * r.powi(d as i32 - 1);
            }
        }
    }
    acc
}

/// `Re ∫_a^{a+h} A(r) e^{irs} dr` with `A` replaced by its quadratic interpolant.
fn filon_cell(amplitude: &impl Fn(usize, f64) -> (f64, f64), i: usize, a: f64, h: f64, s: f64) -> f64 {
    let a0 = amplitude(i, a);
    let am = amplitude(i, a + 0.5 * h);
    let a1 = amplitude(i, a + h);
    // A(a + y) = c0 + c1 y + c2 y²
    let c0 = a0;
    let c1 = ((4.0 * am.0 - 3.0 * a0.0 - a1.0) / h, (4.0 * am.1 - 3.0 * a0.1 - a1.1) / h);
    let c2 = (
        2.0 * (a1.0 - 2.0 * am.0 + a0.0) / (h * h),
        2.0 * (a1.1 - 2.0 * am.1 + a0.1) / (h * h),
    );
    // I_k = ∫_0^h y^k e^{isy} dy by I_k = (h^k e^{ish} - k I_{k-1}) / (is)
    let e = ((s * h).cos(), (s * h).sin());
    let div_is = |z: (f64, f64)| (z.1 / s, -z.0 / s);
    let i0 = div_is((e.0 - 1.0, e.1));
    let i1 = div_is((h * e.0 - i0.0, h * e.1 - i0.1));
    let i2 = div_is((h * h * e.0 - 2.0 * i1.0, h * h * e.1 - 2.0 * i1.1));
    let mul = |p: (f64, f64), q: (f64, f64)| (p.0 * q.0 - p.1 * q.1, p.0 * q.1 + p.1 * q.0);
    let sum = [mul(c0, i0), mul(c1, i1), mul(c2, i2)]
        .iter()
        .fold((0.0, 0.0), |acc, z| (acc.0 + z.0, acc.1 + z.1));
    let start = ((s * a).cos(), (s * a).sin());
    mul(start, sum).0
}

/// `u(r_i) = ∫_0^{s_max} v̂(s) Λ_ν(r_i s) s^{d-1} ds` on `grid`.
pub fn inverse_hankel(spec: &SpectrumFn, grid: &Arc<RadialGrid>) -> Result<RadialField> {
    if spec.d != grid.dim() {
        return Err(invalid("d", "spectrum and grid dimensions differ"));
    }
    let d = spec.d;
    let nu = Order::radial(d);
    let at_origin = integrate_from_zero(|s| spec.value(s) * s.powi(d as i32 - 1), 1.0, 1e-12)
        + integrate(|s| spec.value(s) * s.powi(d as i32 - 1), 1.0, spec.s_max, 1e-12, 0.0);
    let floor = 1e-15 * at_origin.abs();
    let values: Vec<f64> = grid
        .nodes()
        .par_iter()
        .map(|&r| {
            let f = |s: f64| spec.value(s) * scaled_bessel_j(nu, r * s) * s.powi(d as i32 - 1);
            let split = if r > 1.0 { 1.0 / r } else { 1.0 };
            let low = integrate_from_zero(f, split, 1e-10);
            let mut high = 0.0;
            let mut lo = split;
            while lo < spec.s_max {
                let hi = (2.0 * lo).min(spec.s_max);
                high += integrate(f, lo, hi, 1e-10, floor);
                lo = hi;
            }
            low + high
        })
        .collect();
    RadialField::new(grid.clone(), values)
}

const SPECTRUM_MAGIC: &str = "# critheat-spectrum v1";

/// Two-column `(s, v̂(s))` text with a `d`, `kind`, normalization header.
pub fn export_spectrum<W: Write>(mut w: W, spec: &SpectrumFn, s_nodes: &[f64]) -> std::io::Result<()> {
    writeln!(w, "{SPECTRUM_MAGIC}")?;
    writeln!(w, "# d {}", spec.d)?;
    let kind = match spec.kind {
        SpectrumKind::ClosedForm(_) => "closed_form",
        SpectrumKind::Tabulated { .. } => "tabulated",
    };
    writeln!(w, "# kind {kind}")?;
    writeln!(w, "# normalization unitary")?;
    writeln!(w, "# description {}", spec.description.replace('\n', " "))?;
    writeln!(w, "s,value")?;
    let nodes: Vec<f64> = match &spec.kind {
        SpectrumKind::Tabulated { nodes, .. } if s_nodes.is_empty() => nodes.clone(),
        _ => s_nodes.to_vec(),
    };
    for s in nodes {
        writeln!(w, "{s:e},{:e}", spec.value(s))?;
    }
    Ok(())
}

/// Reads the format written by [`export_spectrum`] as a tabulated spectrum.
pub fn import_spectrum<R: BufRead>(r: R) -> Result<SpectrumFn> {
    let mut d = None;
    let mut description = String::from("imported");
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    let mut seen_magic = false;
    for (no, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Format(e.to_string()))?;
        let line = line.trim();
        if no == 0 {
            if line != SPECTRUM_MAGIC {
                return Err(Error::Format(format!("bad header line {line:?}")));
            }
            seen_magic = true;
            continue;
        }
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some(v) = rest.strip_prefix("d ") {
                d = Some(v.trim().parse::<usize>().map_err(|_| Error::Format(format!("bad dimension {v:?}")))?);
            } else if let Some(v) = rest.strip_prefix("normalization ") {
                if v.trim() != "unitary" {
                    return Err(Error::Format(format!("unsupported normalization {v:?}")));
                }
            } else if let Some(v) = rest.strip_prefix("description ") {
                description = v.to_string();
            }
            continue;
        }
        if line.is_empty() || line == "s,value" {
            continue;
        }
        let mut it = line.split(',').map(|x| x.trim().parse::<f64>());
        match (it.next(), it.next()) {
            (Some(Ok(s)), Some(Ok(v))) => {
                nodes.push(s);
                values.push(v);
            }
            _ => return Err(Error::Format(format!("bad row {} {line:?}", no + 1))),
        }
    }
    if !seen_magic {
        return Err(Error::Format("empty spectrum file".into()));
    }
    let d = d.ok_or_else(|| Error::Format("missing `# d` header".into()))?;
    SpectrumFn::tabulated(d, nodes, values, description)
}

//! Registered initial-data families.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decay_character::{default_s_nodes, hankel_spectrum, inverse_hankel, ClosedForm, SpectrumFn};
use crate::error::{invalid, Error, Result};
use crate::functionals::{classify_set, SetMembership, SetVerdict, TOL_THRESHOLD};
use crate::ground_state::{aubin_talenti, critical_exponent, GroundStateSpec};
use crate::radial::{RadialField, RadialGrid};

/// Tags accepted in the `family` field.
pub const REGISTERED_FAMILIES: [&str; 5] = ["aW", "aW_cutoff", "gaussian", "bump", "spectral"];

fn one() -> f64 {
    1.0
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", deny_unknown_fields)]
pub enum InitialData {
    /// `a · W_λ`
    #[serde(rename = "aW")]
    ScaledBubble {
        a: f64,
        #[serde(default = "one")]
        lambda: f64,
    },
    /// `a · W(r) · χ(r/ρ_c)` with a smooth cutoff `χ`; `rho_c = null` searches for one.
    #[serde(rename = "aW_cutoff")]
    CutoffBubble { a: f64, rho_c: Option<f64> },
    /// `amp · e^{-r²/width²}`
    #[serde(rename = "gaussian")]
    Gaussian { amp: f64, width: f64 },
    /// `a` times the Nehari multiple of a seeded sum of Gaussian-type bumps.
    #[serde(rename = "bump")]
    Bump {
        a: f64,
        #[serde(default = "three")]
        terms: usize,
    },
    /// Inverse transform of `amp · s^k · e^{-s²}`.
    #[serde(rename = "spectral")]
    Spectral { amp: f64, k: f64 },
}

impl InitialData {
    pub fn tag(&self) -> &'static str {
        match self {
            InitialData::ScaledBubble { .. } => "aW",
            InitialData::CutoffBubble { .. } => "aW_cutoff",
            InitialData::Gaussian { .. } => "gaussian",
            InitialData::Bump { .. } => "bump",
            InitialData::Spectral { .. } => "spectral",
        }
    }

    /// Compact `tag(k=v,...)` label.
    pub fn label(&self) -> String {
        match self {
            InitialData::ScaledBubble { a, lambda } => format!("aW(a={a},lambda={lambda})"),
            InitialData::CutoffBubble { a, rho_c } => match rho_c {
                Some(r) => format!("aW_cutoff(a={a},rho_c={r})"),
                None => format!("aW_cutoff(a={a},rho_c=search)"),
            },
            InitialData::Gaussian { amp, width } => format!("gaussian(amp={amp},width={width})"),
            InitialData::Bump { a, terms } => format!("bump(a={a},terms={terms})"),
            InitialData::Spectral { amp, k } => format!("spectral(amp={amp},k={k})"),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite, got {v}")))
            }
        };
        match *self {
            InitialData::ScaledBubble { a, lambda } => {
                finite("a", a)?;
                positive("lambda", lambda)
            }
            InitialData::CutoffBubble { a, rho_c } => {
                finite("a", a)?;
                rho_c.map_or(Ok(()), |r| positive("rho_c", r))
            }
            InitialData::Gaussian { amp, width } => {
                finite("amp", amp)?;
                positive("width", width)
            }
            InitialData::Bump { a, terms } => {
                finite("a", a)?;
                if terms == 0 {
                    return Err(invalid("terms", "need at least one bump"));
                }
                Ok(())
            }
            InitialData::Spectral { amp, k } => {
                finite("amp", amp)?;
                if !(k > -(d as f64) / 2.0 - 1.0) {
                    return Err(invalid("k", format!("k = {k} gives an infinite H1 norm")));
                }
                Ok(())
            }
        }
    }

    /// Samples the family on `grid`; `e_of_w` is needed for the cutoff search.
    pub fn build(&self, grid: &Arc<RadialGrid>, seed: u64, e_of_w: f64) -> Result<RadialField> {
        let d = grid.dim();
        self.validate(d)?;
        match *self {
            InitialData::ScaledBubble { a, lambda } => {
                Ok(aubin_talenti(GroundStateSpec::new(d, lambda)?, grid)?.scaled(a))
            }
            InitialData::CutoffBubble { a, rho_c } => match rho_c {
                Some(r) => Ok(cutoff_bubble(grid, a, r)),
                None => Ok(search_cutoff(grid, a, e_of_w)?.0),
            },
            InitialData::Gaussian { amp, width } => {
                Ok(RadialField::from_fn(grid.clone(), |r| amp * (-(r / width).powi(2)).exp()))
            }
            InitialData::Bump { a, terms } => {
                let shape = bump_shape(grid, terms, seed);
                let p = critical_exponent(d);
                let nehari = (shape.dirichlet_energy() / shape.lp_pow(p)).powf(1.0 / (p - 2.0));
                Ok(shape.scaled(a * nehari))
            }
            InitialData::Spectral { amp, k } => {
                let spec = SpectrumFn::closed(d, ClosedForm::MonomialGaussian { amp, k, beta: 1.0 })?;
                inverse_hankel(&spec, grid)
            }
        }
    }

    /// Spectrum of the initial datum: closed form where known, otherwise a Hankel transform.
    pub fn spectrum(&self, u0: &RadialField) -> Result<SpectrumFn> {
        let d = u0.dim();
        match *self {
            InitialData::ScaledBubble { .. } => SpectrumFn::closed(d, ClosedForm::Bubble),
            InitialData::Gaussian { amp, width } => {
                let w2 = width * width;
                SpectrumFn::closed(
                    d,
                    ClosedForm::MonomialGaussian {
                        amp: amp * (0.5 * w2).powf(d as f64 / 2.0),
                        k: 0.0,
                        beta: 0.25 * w2,
                    },
                )
            }
            InitialData::Spectral { amp, k } => SpectrumFn::closed(d, ClosedForm::MonomialGaussian { amp, k, beta: 1.0 }),
            InitialData::CutoffBubble { .. } | InitialData::Bump { .. } => {
                hankel_spectrum(u0, &default_s_nodes(50.0, 400))
            }
        }
    }
}

/// `χ(s)`: 1 on `[0, 1]`, 0 on `[2, ∞)`, smooth in between.
pub fn smooth_cutoff(s: f64) -> f64 {
    let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let (a, b) = (psi(2.0 - s), psi(s - 1.0));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

fn cutoff_bubble(grid: &Arc<RadialGrid>, a: f64, rho_c: f64) -> RadialField {
    let d = grid.dim();
    RadialField::from_fn(grid.clone(), |r| a * crate::ground_state::bubble(d, r) * smooth_cutoff(r / rho_c))
}

/// Smallest `ρ_c = 2^k` whose cutoff bubble is in `𝓜⁻` with margin above `10·tol·E(W)`.
pub fn search_cutoff(grid: &Arc<RadialGrid>, a: f64, e_of_w: f64) -> Result<(RadialField, f64, SetMembership)> {
    let need = 10.0 * TOL_THRESHOLD * e_of_w.abs();
    let mut rho = 2.0;
    while 2.0 * rho <= grid.radius() / 2.0 {
        let u = cutoff_bubble(grid, a, rho);
        let set = classify_set(&u, e_of_w)?;
        if set.verdict == SetVerdict::MMinus && set.margin > need {
            return Ok((u, rho, set));
        }
        rho *= 2.0;
    }
    Err(Error::Precondition(format!(
        "no cutoff radius up to R/4 puts {a}·W·χ in M- with margin {need:.3e}"
    )))
}

fn bump_shape(grid: &Arc<RadialGrid>, terms: usize, seed: u64) -> RadialField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<(f64, f64, f64)> = (0..terms)
        .map(|_| (rng.gen_range(0.2..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.5..2.0)))
        .collect();
    RadialField::from_fn(grid.clone(), |r| {
        parts
            .iter()
            .map(|(amp, gamma, sigma)| amp * (1.0 + gamma * r * r) * (-(r / sigma).powi(2)).exp())
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{l2_norm_sq, nehari};
    use crate::ground_state::{default_grid, ground_state_energy};
    use crate::radial::make_grid;
    use approx::assert_relative_eq;

    #[test]
    fn cutoff_profile() {
        assert_eq!(smooth_cutoff(0.3), 1.0);
        assert_eq!(smooth_cutoff(1.0), 1.0);
        assert_eq!(smooth_cutoff(2.0), 0.0);
        assert_eq!(smooth_cutoff(5.0), 0.0);
        assert_relative_eq!(smooth_cutoff(1.5), 0.5, max_relative = 1e-12);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = smooth_cutoff(1.0 + i as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn bump_sits_on_requested_nehari_multiple() {
        let g = make_grid(4, 40.0, 1200, 1.003).unwrap();
        let at = InitialData::Bump { a: 1.0, terms: 3 }.build(&g, 7, 1.0).unwrap();
        let j = nehari(&at).unwrap();
        assert!(j.abs() < 1e-10 * at.dirichlet_energy());
        let below = InitialData::Bump { a: 0.8, terms: 3 }.build(&g, 7, 1.0).unwrap();
        assert!(nehari(&below).unwrap() > 0.0);
        let again = InitialData::Bump { a: 0.8, terms: 3 }.build(&g, 7, 1.0).unwrap();
        assert_eq!(below, again);
        let other = InitialData::Bump { a: 0.8, terms: 3 }.build(&g, 8, 1.0).unwrap();
        assert_ne!(below, other);
        assert!(below.min_value() > 0.0);
    }

    #[test]
    fn cutoff_search_lands_in_unstable_set_with_finite_l2() {
        for d in [3, 4] {
            let g = default_grid(d).unwrap();
            let e = ground_state_energy(d, &g).unwrap();
            let (u, rho, set) = search_cutoff(&g, 1.1, e).unwrap();
            assert_eq!(set.verdict, SetVerdict::MMinus);
            assert!(rho >= 2.0);
            assert!(l2_norm_sq(&u).is_some());
            assert!(u.dirichlet_energy() > d as f64 * e);
        }
    }

    #[test]
    fn gaussian_spectrum_matches_transform() {
        let d = 3;
        let g = make_grid(d, 12.0, 3000, 1.0).unwrap();
        let fam = InitialData::Gaussian { amp: 0.3, width: 1.5 };
        let u = fam.build(&g, 0, 1.0).unwrap();
        let closed = fam.spectrum(&u).unwrap();
        let numeric = hankel_spectrum(&u, &[1e-4, 0.5, 1.0, 2.0]).unwrap();
        for s in [0.5, 1.0, 2.0] {
            assert_relative_eq!(closed.value(s), numeric.value(s), max_relative = 1e-4);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(InitialData::Gaussian { amp: 1.0, width: 0.0 }.validate(3).is_err());
        assert!(InitialData::ScaledBubble { a: f64::NAN, lambda: 1.0 }.validate(3).is_err());
        assert!(InitialData::Bump { a: 1.0, terms: 0 }.validate(3).is_err());
        assert!(InitialData::Spectral { amp: 1.0, k: -5.0 }.validate(6).is_err());
        assert_eq!(InitialData::Spectral { amp: 1.0, k: -3.0 }.tag(), "spectral");
    }
}

//! Energy, Nehari functional, threshold sets and the 𝒦^q dissipation weight.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ground_state::critical_exponent;
use crate::radial::RadialField;

/// Relative band around `E(W)` treated as "at threshold".
pub const TOL_THRESHOLD: f64 = 1e-5;

/// Tail share of `‖u‖²_{L²}` from `r > R/2` above which the norm is reported absent.
pub const L2_TAIL_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    /// `‖u‖²_{Ḣ¹}`
    pub h1_sq: f64,
    /// `‖u‖^{2*}_{L^{2*}}`
    pub l2star_pow: f64,
    pub energy: f64,
    pub nehari: f64,
    pub l2_sq: Option<f64>,
}

impl EnergyReport {
    pub fn of(t: f64, u: &RadialField) -> Result<Self> {
        u.check_finite()?;
        let p = critical_exponent(u.dim());
        let h1_sq = u.dirichlet_energy();
        let l2star_pow = u.lp_pow(p);
        Ok(Self {
            t,
            h1_sq,
            l2star_pow,
            energy: 0.5 * h1_sq - l2star_pow / p,
            nehari: h1_sq - l2star_pow,
            l2_sq: l2_norm_sq(u),
        })
    }
}

/// `E(u) = ½‖∇u‖² - (1/2*)‖u‖^{2*}_{L^{2*}}`.
pub fn energy(u: &RadialField) -> Result<f64> {
    Ok(EnergyReport::of(0.0, u)?.energy)
}

/// `J(u) = ‖u‖²_{Ḣ¹} - ‖u‖^{2*}_{L^{2*}}`.
pub fn nehari(u: &RadialField) -> Result<f64> {
    Ok(EnergyReport::of(0.0, u)?.nehari)
}

/// `‖u‖²_{L²}`, or `None` when the far field dominates (u not in L² numerically).
pub fn l2_norm_sq(u: &RadialField) -> Option<f64> {
    let half = 0.5 * u.grid().radius();
    let mut total = 0.0;
    let mut tail = 0.0;
    for ((r, v), w) in u.grid().nodes().iter().zip(u.values()).zip(u.grid().volumes()) {
        let c = w * v * v;
        total += c;
        if *r > half {
            tail += c;
        }
    }
    if total > 0.0 && tail > L2_TAIL_LIMIT * total {
        None
    } else {
        Some(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetVerdict {
    MPlus,
    MMinus,
    AboveThreshold,
    AtThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetMembership {
    pub verdict: SetVerdict,
    pub e_of_w: f64,
    pub energy: f64,
    pub nehari: f64,
    /// `min(E(W) - E(u), |J(u)|)`
    pub margin: f64,
}

pub fn classify_set(u: &RadialField, e_of_w: f64) -> Result<SetMembership> {
    let rep = EnergyReport::of(0.0, u)?;
    Ok(classify_report(&rep, e_of_w))
}

pub fn classify_report(rep: &EnergyReport, e_of_w: f64) -> SetMembership {
    let tol = TOL_THRESHOLD * e_of_w.abs();
    let gap = e_of_w - rep.energy;
    let verdict = if gap.abs() <= tol {
        SetVerdict::AtThreshold
    } else if gap < 0.0 {
        SetVerdict::AboveThreshold
    } else if rep.nehari >= 0.0 {
        SetVerdict::MPlus
    } else {
        SetVerdict::MMinus
    };
    SetMembership {
        verdict,
        e_of_w,
        energy: rep.energy,
        nehari: rep.nehari,
        margin: gap.min(rep.nehari.abs()),
    }
}

/// `(E(u) - (1/2 - 1/2*)‖∇u‖², ½‖∇u‖² - E(u))` for `u ∈ 𝓜⁺`.
pub fn norm_equivalence_gap(u: &RadialField, e_of_w: f64) -> Result<(f64, f64)> {
    let rep = EnergyReport::of(0.0, u)?;
    let set = classify_report(&rep, e_of_w);
    if set.verdict != SetVerdict::MPlus {
        return Err(Error::Precondition(format!(
            "norm equivalence needs u in M+, got {:?}",
            set.verdict
        )));
    }
    let p = critical_exponent(u.dim());
    let lower = rep.energy - (0.5 - 1.0 / p) * rep.h1_sq;
    let upper = 0.5 * rep.h1_sq - rep.energy;
    Ok((lower, upper))
}

/// Admissible open window for `1/q`.
///
/// `1/2* - 1/(d(2*-1)) < 1/q < 1/2*`; in `d = 3` the lower end is raised to
/// `1/2* - 1/24`.
pub fn kq_window(d: usize) -> (f64, f64) {
    let p = critical_exponent(d);
    let hi = 1.0 / p;
    let mut lo = hi - 1.0 / (d as f64 * (p - 1.0));
    if d == 3 {
        lo = lo.max(hi - 1.0 / 24.0);
    }
    (lo, hi)
}

/// Midpoint of the admissible window in `1/q`.
pub fn default_q(d: usize) -> f64 {
    let (lo, hi) = kq_window(d);
    2.0 / (lo + hi)
}

/// `t^{(d/2)(1/2* - 1/q)} ‖u‖_{L^q}`.
pub fn kq_weight(t: f64, u: &RadialField, q: f64) -> Result<f64> {
    let d = u.dim();
    let (lo, hi) = kq_window(d);
    let inv = 1.0 / q;
    if !(inv > lo && inv < hi) {
        return Err(invalid(
            "q",
            format!("1/q = {inv:.6} outside admissible window ({lo:.6}, {hi:.6})"),
        ));
    }
    if !(t > 0.0) {
        return Err(invalid("t", format!("time must be positive, got {t}")));
    }
    u.check_finite()?;
    let kappa = d as f64 / 2.0 * (1.0 / critical_exponent(d) - inv);
    Ok(t.powf(kappa) * u.lp_pow(q).powf(inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{aubin_talenti, default_grid, ground_state_energy, rescale, GroundStateSpec};
    use crate::radial::make_grid;
    use approx::assert_relative_eq;

    fn bubble(d: usize) -> RadialField {
        let g = default_grid(d).unwrap();
        aubin_talenti(GroundStateSpec::new(d, 1.0).unwrap(), &g).unwrap()
    }

    /// E(aW) / ‖∇W‖² from the Pohozaev identity.
    fn scalar_energy(d: usize, a: f64) -> f64 {
        let p = critical_exponent(d);
        a * a / 2.0 - a.powf(p) / p
    }

    #[test]
    fn zero_field() {
        let g = make_grid(4, 10.0, 64, 1.0).unwrap();
        let z = RadialField::zeros(g);
        assert_eq!(energy(&z).unwrap(), 0.0);
        assert_eq!(nehari(&z).unwrap(), 0.0);
        assert_eq!(norm_equivalence_gap(&z, 1.0).unwrap(), (0.0, 0.0));
        assert_eq!(kq_weight(1.0, &z, default_q(4)).unwrap(), 0.0);
    }

    #[test]
    fn energy_of_scaled_bubbles() {
        let d = 5;
        let w = bubble(d);
        let grad = w.dirichlet_energy();
        assert_relative_eq!(energy(&w).unwrap(), grad / 5.0, max_relative = 1e-4);
        // 0.72 - 0.3 · 1.2^{10/3} ≈ 0.169
        let e12 = energy(&w.scaled(1.2)).unwrap();
        let want = 0.72 - 0.3 * 1.2f64.powf(10.0 / 3.0);
        assert_relative_eq!(e12 / grad, want, max_relative = 1e-4);
        assert_relative_eq!(want, 0.169, epsilon = 1e-3);
        assert!(e12 < energy(&w).unwrap());
    }

    #[test]
    fn nehari_signs() {
        for d in [3, 4, 5, 6] {
            let w = bubble(d);
            let grad = w.dirichlet_energy();
            assert!(nehari(&w).unwrap().abs() < 1e-4 * grad);
            let p = critical_exponent(d);
            let j_half = nehari(&w.scaled(0.5)).unwrap();
            assert!(j_half > 0.0);
            assert_relative_eq!(j_half / grad, 0.25 - 0.5f64.powf(p), max_relative = 1e-3);
            assert!(nehari(&w.scaled(1.5)).unwrap() < 0.0);
        }
    }

    #[test]
    fn energy_along_ray_peaks_at_bubble() {
        let d = 4;
        let w = bubble(d);
        let grad = w.dirichlet_energy();
        let e_w = energy(&w).unwrap();
        for a in [0.5, 0.9, 1.0, 1.1, 1.5] {
            let e = energy(&w.scaled(a)).unwrap();
            assert_relative_eq!(e / grad, scalar_energy(d, a), max_relative = 1e-3, epsilon = 1e-6);
            assert!(e <= e_w * (1.0 + 1e-12));
        }
    }

    #[test]
    fn set_classification() {
        for d in [3, 5, 6] {
            let g = default_grid(d).unwrap();
            let e_w = ground_state_energy(d, &g).unwrap();
            let w = bubble(d);
            assert_eq!(classify_set(&w.scaled(0.9), e_w).unwrap().verdict, SetVerdict::MPlus);
            assert_eq!(classify_set(&w.scaled(1.2), e_w).unwrap().verdict, SetVerdict::MMinus);
            assert_eq!(classify_set(&w, e_w).unwrap().verdict, SetVerdict::AtThreshold);
        }
    }

    #[test]
    fn above_threshold_is_detected() {
        // A narrow Gaussian at the Nehari scaling sits strictly above E(W).
        let d = 5;
        let g = default_grid(d).unwrap();
        let e_w = ground_state_energy(d, &g).unwrap();
        let gauss = RadialField::from_fn(g, |r| (-r * r).exp());
        let p = critical_exponent(d);
        let a = (gauss.dirichlet_energy() / gauss.lp_pow(p)).powf(1.0 / (p - 2.0));
        let set = classify_set(&gauss.scaled(a), e_w).unwrap();
        assert_eq!(set.verdict, SetVerdict::AboveThreshold);
    }

    #[test]
    fn norm_equivalence_on_stable_set() {
        let d = 3;
        let g = default_grid(d).unwrap();
        let e_w = ground_state_energy(d, &g).unwrap();
        let w = bubble(d);
        let (lo, hi) = norm_equivalence_gap(&w.scaled(0.9), e_w).unwrap();
        assert!(lo >= 0.0 && hi >= 0.0);
        let half = w.scaled(0.5);
        let (_, hi) = norm_equivalence_gap(&half, e_w).unwrap();
        assert_relative_eq!(hi, half.lp_pow(6.0) / 6.0, max_relative = 1e-12);
        assert!(matches!(
            norm_equivalence_gap(&w.scaled(1.2), e_w),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn kq_window_arithmetic() {
        // d = 4: 1/4 - 1/12 < 1/5 < 1/4
        let (lo, hi) = kq_window(4);
        assert_relative_eq!(lo, 1.0 / 6.0, max_relative = 1e-14);
        assert_relative_eq!(hi, 0.25, max_relative = 1e-14);
        let w = bubble(4);
        let v = kq_weight(2.0, &w, 5.0).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!(kq_weight(2.0, &w, 3.0).is_err());
        assert!(kq_weight(2.0, &w, 10.0).is_err());
        assert!(kq_weight(0.0, &w, 5.0).is_err());
        // d = 3 narrower window (1/8, 1/6)
        let (lo3, hi3) = kq_window(3);
        assert_relative_eq!(lo3, 0.125, max_relative = 1e-14);
        assert_relative_eq!(hi3, 1.0 / 6.0, max_relative = 1e-14);
        for d in 3..12 {
            let (lo, hi) = kq_window(d);
            let inv = 1.0 / default_q(d);
            assert!(lo < inv && inv < hi);
        }
    }

    #[test]
    fn l2_presence_follows_dimension() {
        assert!(l2_norm_sq(&bubble(3)).is_none());
        assert!(l2_norm_sq(&bubble(4)).is_none());
        assert!(l2_norm_sq(&bubble(5)).is_some());
        assert!(l2_norm_sq(&bubble(6)).is_some());
    }

    #[test]
    fn scale_invariance_of_energy_and_nehari() {
        let d = 5;
        let g = make_grid(d, 1000.0, 12001, 1.001).unwrap();
        let fields = [
            aubin_talenti(GroundStateSpec::new(d, 1.0).unwrap(), &g).unwrap().scaled(0.8),
            RadialField::from_fn(g.clone(), |r| 0.7 * (-r * r / 4.0).exp()),
        ];
        for u in &fields {
            let e = energy(u).unwrap();
            let j = nehari(u).unwrap();
            let scale = u.dirichlet_energy();
            for lambda in [0.5, 1.0, 2.0] {
                let ul = rescale(u, lambda).unwrap();
                assert!((energy(&ul).unwrap() - e).abs() <= 1e-5 * scale);
                assert!((nehari(&ul).unwrap() - j).abs() <= 1e-5 * scale);
            }
        }
    }

    #[test]
    fn kq_weight_is_scale_neutral_along_heat_flow() {
        // e^{tΔ} e^{-r²} = (1+4t)^{-d/2} exp(-r²/(1+4t)); the weight of
        // u_λ(t) = λ^{(d-2)/2} u(λ², λx) at t equals that of u at λ²t.
        let d = 5;
        let g = make_grid(d, 400.0, 6001, 1.002).unwrap();
        let heat = |t: f64, lambda: f64| {
            let s = 1.0 + 4.0 * lambda * lambda * t;
            let amp = lambda.powf((d as f64 - 2.0) / 2.0) * s.powf(-(d as f64) / 2.0);
            RadialField::from_fn(g.clone(), move |r| amp * (-(lambda * r).powi(2) / s).exp())
        };
        let q = default_q(d);
        for lambda in [0.5, 2.0] {
            for t in [0.3, 1.0, 5.0] {
                let lhs = kq_weight(t, &heat(t, lambda), q).unwrap();
                let rhs = kq_weight(lambda * lambda * t, &heat(lambda * lambda * t, 1.0), q).unwrap();
                assert_relative_eq!(lhs, rhs, max_relative = 1e-4);
            }
        }
    }

    #[test]
    fn report_identities_hold_by_construction() {
        let w = bubble(6).scaled(0.7);
        let r = EnergyReport::of(1.5, &w).unwrap();
        let p = critical_exponent(6);
        assert_eq!(r.energy, 0.5 * r.h1_sq - r.l2star_pow / p);
        assert_eq!(r.nehari, r.h1_sq - r.l2star_pow);
        assert_eq!(r.t, 1.5);
    }
}

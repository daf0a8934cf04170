//! Bessel functions of integer and half-integer order, and `K₁`.

use std::f64::consts::PI;

use crate::quadrature::integrate;

/// Below this argument the power series is used.
pub const SERIES_CUTOFF: f64 = 12.0;

/// Order `ν = m/2` of the Bessel kernel, stored as the integer `m = 2ν`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Order(pub u32);

impl Order {
    /// `ν = (d-2)/2`, the order of the radial Fourier kernel in dimension `d`.
    pub fn radial(d: usize) -> Self {
        Order(d as u32 - 2)
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_half_integer(self) -> bool {
        self.0 % 2 == 1
    }
}

fn gamma_half_int(m: u32) -> f64 {
    crate::radial::gamma_half(m as usize)
}

/// `J_ν(x) / x^ν` by its power series.
pub fn scaled_series(nu: Order, x: f64) -> f64 {
    let v = nu.value();
    let q = -0.25 * x * x;
    // first term 1 / (2^ν Γ(ν+1))
    let mut term = 1.0 / (2f64.powf(v) * gamma_half_int(nu.0 + 2));
    let mut sum = term;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + v));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `J_ν(x)` for half-integer `ν` from spherical Bessel closed forms.
fn half_integer_trig(nu: Order, x: f64) -> f64 {
    let n = (nu.0 - 1) / 2;
    let (s, c) = x.sin_cos();
    let mut j0 = s / x;
    if n == 0 {
        return (2.0 * x / PI).sqrt() * j0;
    }
    let mut j1 = s / (x * x) - c / x;
    for l in 1..n {
        let next = (2 * l + 1) as f64 / x * j1 - j0;
        j0 = j1;
        j1 = next;
    }
    (2.0 * x / PI).sqrt() * j1
}

/// `(P, Q)` with `J_ν(x) = √(2/(πx)) (P cos χ − Q sin χ)`, `χ = x − (ν/2 + 1/4)π`,
/// from the Hankel expansion truncated at its smallest term.
pub fn hankel_pq(nu: Order, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu.value() * nu.value();
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (kf * 8.0 * x);
        if a.abs() >= last || a == 0.0 {
            break;
        }
        last = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
    }
    (p, q)
}

/// Phase offset `(ν/2 + 1/4)π` of the Hankel expansion.
pub fn hankel_phase(nu: Order) -> f64 {
    (0.5 * nu.value() + 0.25) * PI
}

/// Arguments above which [`hankel_pq`] is accurate to roughly machine precision.
pub fn asymptotic_cutoff(nu: Order) -> f64 {
    SERIES_CUTOFF.max(nu.value() * nu.value() + 12.0)
}

/// `J_ν(x)` from the Hankel expansion.
pub fn hankel_asymptotic(nu: Order, x: f64) -> f64 {
    let (p, q) = hankel_pq(nu, x);
    let chi = x - hankel_phase(nu);
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `J_n(x)` for integer `n` by the trapezoid rule on Bessel's integral.
fn integer_trapezoid(n: u32, x: f64) -> f64 {
    let m = (x.abs() + n as f64 + 40.0).ceil() as usize * 2;
    let h = PI / m as f64;
    let mut sum = 0.0;
    for i in 0..=m {
        let tau = i as f64 * h;
        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
        sum += w * (n as f64 * tau - x * tau.sin()).cos();
    }
    sum * h / PI
}

/// `J_ν(x)` for `x ≥ 0`.
pub fn bessel_j(nu: Order, x: f64) -> f64 {
    if x <= SERIES_CUTOFF {
        return scaled_series(nu, x) * x.powf(nu.value());
    }
    if nu.is_half_integer() {
        if x > nu.value() {
            half_integer_trig(nu, x)
        } else {
            scaled_series(nu, x) * x.powf(nu.value())
        }
    } else if nu.0 <= 10 {
        hankel_asymptotic(nu, x)
    } else {
        integer_trapezoid(nu.0 / 2, x)
    }
}

/// `Λ_ν(x) = J_ν(x)/x^ν`, finite at the origin.
pub fn scaled_bessel_j(nu: Order, x: f64) -> f64 {
    if x <= SERIES_CUTOFF {
        scaled_series(nu, x)
    } else {
        bessel_j(nu, x) / x.powf(nu.value())
    }
}

/// `K₁(x) = ∫_0^∞ e^{-x cosh τ} cosh τ dτ` for `x > 0`.
pub fn bessel_k1(x: f64) -> f64 {
    // the integrand is below e^{-740} once x cosh τ > 740
    let top = ((740.0 / x).max(1.0)).acosh().max(1.0);
    integrate(|t| (-x * t.cosh()).exp() * t.cosh(), 0.0, top, 1e-13, 0.0)
}

//! The Aubin–Talenti bubble `W(r) = (d(d-2))^{(d-2)/4} (1 + r²)^{-(d-2)/2}` and
//! the stationary identities it satisfies.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::radial::{gamma_half, make_grid, RadialField, RadialGrid};

/// Critical Sobolev exponent `2* = 2d/(d-2)`.
pub fn critical_exponent(d: usize) -> f64 {
    2.0 * d as f64 / (d as f64 - 2.0)
}

/// Exponent of the nonlinearity, `2* - 2 = 4/(d-2)`.
pub fn nonlinear_power(d: usize) -> f64 {
    4.0 / (d as f64 - 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateSpec {
    pub d: usize,
    pub lambda: f64,
}

impl GroundStateSpec {
    pub fn new(d: usize, lambda: f64) -> Result<Self> {
        if d < 3 {
            return Err(invalid("d", format!("dimension must be >= 3, got {d}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("lambda", format!("scale must be positive, got {lambda}")));
        }
        Ok(Self { d, lambda })
    }
}

/// Closed-form `W(r)` at unit scale.
pub fn bubble(d: usize, r: f64) -> f64 {
    let df = d as f64;
    (df * (df - 2.0)).powf((df - 2.0) / 4.0) * (1.0 + r * r).powf(-(df - 2.0) / 2.0)
}

/// Samples of `λ^{-(d-2)/2} W(r/λ)`.
pub fn aubin_talenti(spec: GroundStateSpec, grid: &Arc<RadialGrid>) -> Result<RadialField> {
    if spec.d != grid.dim() {
        return Err(invalid(
            "spec.d",
            format!("bubble dimension {} differs from grid dimension {}", spec.d, grid.dim()),
        ));
    }
    let d = spec.d;
    let amp = spec.lambda.powf(-(d as f64 - 2.0) / 2.0);
    Ok(RadialField::from_fn(grid.clone(), |r| amp * bubble(d, r / spec.lambda)))
}

/// Largest fraction of `‖∇u‖²` that `rescale` may discard beyond `R`.
pub const RESCALE_TAIL_LIMIT: f64 = 1e-4;

/// `u_λ(r) = λ^{(d-2)/2} u(λ r)`, resampled onto the same grid.
///
/// For `λ < 1` the rescaled profile spreads outward and the part of `u` living on
/// `[λR, R]` ends up beyond the grid; that is refused when it carries more than
/// [`RESCALE_TAIL_LIMIT`] of the gradient mass.
pub fn rescale(u: &RadialField, lambda: f64) -> Result<RadialField> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("scale must be positive, got {lambda}")));
    }
    if lambda == 1.0 {
        return Ok(u.clone());
    }
    let grid = u.grid();
    if lambda < 1.0 {
        let cut = lambda * grid.radius();
        let x = grid.nodes();
        let total = u.dirichlet_energy();
        let lost: f64 = u
            .values()
            .windows(2)
            .zip(grid.conductance())
            .zip(x.windows(2))
            .filter(|(_, xs)| 0.5 * (xs[0] + xs[1]) >= cut)
            .map(|((w, c), _)| c * (w[1] - w[0]).powi(2))
            .sum();
        let fraction = if total > 0.0 { lost / total } else { 0.0 };
        if fraction > RESCALE_TAIL_LIMIT {
            return Err(Error::OutOfRange { fraction });
        }
    }
    let amp = lambda.powf((u.dim() as f64 - 2.0) / 2.0);
    Ok(RadialField::from_fn(grid.clone(), |r| amp * u.interpolate(lambda * r)))
}

/// `‖∇u‖² - ‖u‖^{2*}_{L^{2*}}` (signed).
pub fn pohozaev_residual(u: &RadialField) -> f64 {
    u.dirichlet_energy() - u.lp_pow(critical_exponent(u.dim()))
}

/// Relative tolerance on `E(W)` vs `‖∇W‖²/d`.
pub const ENERGY_PAIR_TOL: f64 = 1e-4;

/// `E(W)` by quadrature, cross-checked against `(1/d)‖∇W‖²`.
pub fn ground_state_energy(d: usize, grid: &Arc<RadialGrid>) -> Result<f64> {
    let w = aubin_talenti(GroundStateSpec::new(d, 1.0)?, grid)?;
    let grad = w.dirichlet_energy();
    let quadrature = 0.5 * grad - w.lp_pow(critical_exponent(d)) / critical_exponent(d);
    let identity = grad / d as f64;
    if (quadrature - identity).abs() > ENERGY_PAIR_TOL * identity.abs() {
        return Err(Error::Consistency {
            quadrature,
            identity,
        });
    }
    Ok(quadrature)
}

/// Fraction of `‖∇W‖²` carried by `r > R` (closed form of the bubble tail).
pub fn gradient_tail_fraction(d: usize, radius: f64) -> f64 {
    // |W'|² r^{d-1} = c² (d-2)² r^{d+1} (1+r²)^{-d}
    // total: c² (d-2)² B((d+2)/2, (d-2)/2) / 2; tail ≈ c² (d-2) R^{2-d}
    let beta = gamma_half(d + 2) * gamma_half(d - 2) / gamma_half(2 * d);
    let df = d as f64;
    2.0 * radius.powf(2.0 - df) / ((df - 2.0) * beta)
}

/// Default outer radius: a power of ten with bubble gradient tail below 1e-6.
pub fn default_radius(d: usize) -> f64 {
    let mut radius = 100.0;
    while gradient_tail_fraction(d, radius) > 1e-6 {
        radius *= 10.0;
    }
    radius
}

pub const DEFAULT_STRETCH: f64 = 1.002;

/// Geometric stretch of the default grid: `1 + min(0.002, 0.072/d²)`.
pub fn default_stretch(d: usize) -> f64 {
    1.0 + (DEFAULT_STRETCH - 1.0).min(0.072 / (d * d) as f64)
}
pub const DEFAULT_CORE_SPACING: f64 = 1e-3;

/// Node count for a geometric grid whose first spacing is about `h0`.
pub fn nodes_for_spacing(radius: f64, stretch: f64, h0: f64) -> usize {
    let steps = if stretch == 1.0 {
        (radius / h0).ceil()
    } else {
        ((1.0 + radius * (stretch - 1.0) / h0).ln() / stretch.ln()).ceil()
    };
    (steps as usize + 1).max(crate::radial::MIN_NODES)
}

/// Default grid per dimension, sized by the bubble tail.
pub fn default_grid(d: usize) -> Result<Arc<RadialGrid>> {
    let radius = default_radius(d);
    let stretch = default_stretch(d);
    let n = nodes_for_spacing(radius, stretch, DEFAULT_CORE_SPACING);
    make_grid(d, radius, n, stretch)
}

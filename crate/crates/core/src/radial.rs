//! Radial grids, quadrature and differential operators.
//!
//! A radial function on ℝ^d is stored by its samples on `0 = r_0 < … < r_{n-1} = R`.
//! Every node owns the dual cell `[ρ_{i-1/2}, ρ_{i+1/2}]` whose endpoints are
//! edge midpoints (`ρ_{-1/2} = 0`, `ρ_{n-1/2} = R`). Integrals use exact cell
//! volumes and gradients live on edges, so that
//!
//! * `Σ V_i = |B_R|` exactly,
//! * the Laplacian is `-M⁻¹K` with `M = diag(V)` and `K` the edge stiffness,
//!   hence `Δ r² = 2d` holds at every interior node on any grid,
//! * the discrete Dirichlet energy `uᵀKu` is the midpoint rule for `∫|∇u|²`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Node spacing descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    Geometric { ratio: f64 },
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    d: usize,
    nodes: Vec<f64>,
    grading: Grading,
    // derived
    volumes: Vec<f64>,
    conductance: Vec<f64>,
    omega: f64,
}

pub const MIN_NODES: usize = 16;

/// Surface area of the unit sphere in ℝ^d, `2π^{d/2}/Γ(d/2)`.
pub fn sphere_area(d: usize) -> f64 {
    assert!(d >= 1, "sphere_area needs d >= 1");
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d)
}

/// Γ(m/2) for a positive integer `m`, by recursion from Γ(1) and Γ(1/2).
pub fn gamma_half(m: usize) -> f64 {
    assert!(m >= 1);
    let (mut g, mut k) = if m % 2 == 0 {
        (1.0, 2)
    } else {
        (std::f64::consts::PI.sqrt(), 1)
    };
    while k < m {
        g *= k as f64 / 2.0;
        k += 2;
    }
    g
}

/// `(b^p - a^p) / p` for `0 <= a <= b`, without cancellation when `a ≈ b`.
pub(crate) fn power_increment(a: f64, b: f64, p: f64) -> f64 {
    if a <= 0.0 {
        return b.powf(p) / p;
    }
    let ln_ratio = (b / a).ln();
    a.powf(p) * (p * ln_ratio).exp_m1() / p
}

/// Build a grid with geometric spacing ratio `stretch` (uniform when 1).
pub fn make_grid(d: usize, radius: f64, n: usize, stretch: f64) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(d, radius, n, stretch).map(Arc::new)
}

impl RadialGrid {
    pub fn new(d: usize, radius: f64, n: usize, stretch: f64) -> Result<Self> {
        if d < 3 {
            return Err(invalid("d", format!("dimension must be >= 3, got {d}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("R", format!("outer radius must be positive, got {radius}")));
        }
        if n < MIN_NODES {
            return Err(invalid("n", format!("need at least {MIN_NODES} nodes, got {n}")));
        }
        if !(1.0..=1.2).contains(&stretch) {
            return Err(invalid("stretch", format!("must lie in [1, 1.2], got {stretch}")));
        }
        let m = n - 1;
        let mut nodes = Vec::with_capacity(n);
        let grading = if stretch == 1.0 {
            nodes.extend((0..n).map(|i| radius * i as f64 / m as f64));
            Grading::Uniform
        } else {
            let q = stretch;
            // r_i = R (q^i - 1) / (q^m - 1)
            let denom = (m as f64 * q.ln()).exp_m1();
            nodes.extend((0..n).map(|i| radius * (i as f64 * q.ln()).exp_m1() / denom));
            Grading::Geometric { ratio: q }
        };
        nodes[0] = 0.0;
        nodes[m] = radius;
        Ok(Self::assemble(d, nodes, grading))
    }

    /// Grid from explicit node coordinates (used when reading checkpoints).
    pub fn from_nodes(d: usize, nodes: Vec<f64>) -> Result<Self> {
        if d < 3 {
            return Err(invalid("d", format!("dimension must be >= 3, got {d}")));
        }
        if nodes.len() < MIN_NODES {
            return Err(invalid("n", format!("need at least {MIN_NODES} nodes, got {}", nodes.len())));
        }
        if nodes[0] != 0.0 {
            return Err(invalid("nodes", "first node must be the origin"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(invalid("nodes", "nodes must be finite and strictly increasing"));
        }
        Ok(Self::assemble(d, nodes, Grading::Explicit))
    }

    fn assemble(d: usize, nodes: Vec<f64>, grading: Grading) -> Self {
        let n = nodes.len();
        let omega = sphere_area(d);
        let df = d as f64;
        let mids: Vec<f64> = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut volumes = Vec::with_capacity(n);
        for i in 0..n {
            let lo = if i == 0 { 0.0 } else { mids[i - 1] };
            let hi = if i == n - 1 { nodes[n - 1] } else { mids[i] };
            volumes.push(omega * power_increment(lo, hi, df));
        }
        let conductance = nodes
            .windows(2)
            .zip(&mids)
            .map(|(w, m)| omega * m.powi(d as i32 - 1) / (w[1] - w[0]))
            .collect();
        Self {
            d,
            nodes,
            grading,
            volumes,
            conductance,
            omega,
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn grading(&self) -> Grading {
        self.grading
    }

    /// ω_{d-1} = |S^{d-1}|.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Dual-cell volumes `V_i` (including the sphere factor).
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Edge stiffness `c_i = ω ρ_{i+1/2}^{d-1} / h_i` between nodes `i` and `i+1`.
    pub fn conductance(&self) -> &[f64] {
        &self.conductance
    }

    /// Smallest node spacing.
    pub fn h_min(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Quadrature weights for `ω ∫ f(r) r^{d-1+moment} dr`.
    pub fn moment_weights(&self, moment: u32) -> Vec<f64> {
        if moment == 0 {
            return self.volumes.clone();
        }
        let n = self.len();
        let p = (self.d as u32 + moment) as f64;
        (0..n)
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { 0.5 * (self.nodes[i - 1] + self.nodes[i]) };
                let hi = if i == n - 1 { self.nodes[i] } else { 0.5 * (self.nodes[i] + self.nodes[i + 1]) };
                self.omega * power_increment(lo, hi, p)
            })
            .collect()
    }
}

/// Samples of a radial function on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(
                "values",
                format!("expected {} samples, got {}", grid.len(), values.len()),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    /// First non-finite sample, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::Corruption { index }),
            None => Ok(()),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Σ_i c_i (u_{i+1} - u_i)²`, the discrete `‖∇u‖²_{L²}`.
    pub fn dirichlet_energy(&self) -> f64 {
        self.values
            .windows(2)
            .zip(self.grid.conductance())
            .map(|(w, c)| c * (w[1] - w[0]).powi(2))
            .sum()
    }

    /// `Σ_i c_i (u_{i+1} - u_i)(v_{i+1} - v_i)`, the discrete `⟨∇u, ∇v⟩`.
    pub fn dirichlet_pairing(&self, other: &RadialField) -> f64 {
        self.values
            .windows(2)
            .zip(other.values.windows(2))
            .zip(self.grid.conductance())
            .map(|((a, b), c)| c * (a[1] - a[0]) * (b[1] - b[0]))
            .sum()
    }

    /// `Σ_i V_i |u_i|^p`.
    pub fn lp_pow(&self, p: f64) -> f64 {
        self.values
            .iter()
            .zip(self.grid.volumes())
            .map(|(u, v)| v * pow_abs(*u, p))
            .sum()
    }

    /// Monotone cubic Hermite interpolation.
    ///
    /// Beyond `R` the field is continued by the power law through its last two
    /// samples when those decay with a common sign, and by zero otherwise.
    pub fn interpolate(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        let n = nodes.len();
        if r <= 0.0 {
            return self.values[0];
        }
        if r >= nodes[n - 1] {
            return self.tail_extension(r);
        }
        let k = nodes.partition_point(|&x| x <= r) - 1;
        let (x0, x1) = (nodes[k], nodes[k + 1]);
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let h = x1 - x0;
        let m0 = pchip_slope(nodes, &self.values, k);
        let m1 = pchip_slope(nodes, &self.values, k + 1);
        let s = (r - x0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
    }
}

impl RadialField {
    fn tail_extension(&self, r: f64) -> f64 {
        let nodes = self.grid.nodes();
        let n = nodes.len();
        let (a, b) = (self.values[n - 2], self.values[n - 1]);
        if r == nodes[n - 1] {
            return b;
        }
        if a * b <= 0.0 || b.abs() >= a.abs() {
            return 0.0;
        }
        let alpha = (b / a).ln() / (nodes[n - 1] / nodes[n - 2]).ln();
        b * (r / nodes[n - 1]).powf(alpha)
    }
}

/// `|s|^p` with `0 ↦ 0`.
#[inline]
pub(crate) fn pow_abs(s: f64, p: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        (p * s.abs().ln()).exp()
    }
}

/// Three-point parabolic slope with the Hyman monotonicity filter.
fn pchip_slope(x: &[f64], y: &[f64], k: usize) -> f64 {
    let n = x.len();
    let secant = |j: usize| (y[j + 1] - y[j]) / (x[j + 1] - x[j]);
    if k == 0 {
        // symmetry at the origin
        return 0.0;
    }
    if k == n - 1 {
        let m = lagrange3_derivative(x, y, [k - 2, k - 1, k], k);
        let d1 = secant(k - 1);
        return if m * d1 <= 0.0 { 0.0 } else { m.signum() * m.abs().min(3.0 * d1.abs()) };
    }
    let (dl, dr) = (secant(k - 1), secant(k));
    if dl * dr <= 0.0 {
        return 0.0;
    }
    let m = lagrange3_derivative(x, y, [k - 1, k, k + 1], k);
    if m * dl <= 0.0 {
        return 0.0;
    }
    m.signum() * m.abs().min(3.0 * dl.abs().min(dr.abs()))
}

/// `ω ∫_0^R f(r) r^{d-1+moment} dr` with exact dual-cell weights.
pub fn radial_integral(f: &RadialField, moment: u32) -> Result<f64> {
    if moment > 2 {
        return Err(invalid("moment", format!("must be 0, 1 or 2, got {moment}")));
    }
    f.check_finite()?;
    let w = f.grid.moment_weights(moment);
    Ok(w.iter().zip(&f.values).map(|(w, v)| w * v).sum())
}

/// Derivative at `x[at]` of the quadratic through `(x[j], y[j])`, `j ∈ idx`.
fn lagrange3_derivative(x: &[f64], y: &[f64], idx: [usize; 3], at: usize) -> f64 {
    let xa = x[at];
    let mut sum = 0.0;
    for (a, &j) in idx.iter().enumerate() {
        // L_j'(xa) = Σ_{m≠j} 1/(x_j-x_m) Π_{l≠j,m} (xa-x_l)/(x_j-x_l)
        let mut lj = 0.0;
        for (b, &m) in idx.iter().enumerate() {
            if b == a {
                continue;
            }
            let mut term = 1.0 / (x[j] - x[m]);
            for (c, &l) in idx.iter().enumerate() {
                if c != a && c != b {
                    term *= (xa - x[l]) / (x[j] - x[l]);
                }
            }
            lj += term;
        }
        sum += lj * y[j];
    }
    sum
}

fn lagrange3_second(x: &[f64], y: &[f64], idx: [usize; 3]) -> f64 {
    let [i, j, k] = idx;
    2.0 * (y[i] / ((x[i] - x[j]) * (x[i] - x[k]))
        + y[j] / ((x[j] - x[i]) * (x[j] - x[k]))
        + y[k] / ((x[k] - x[i]) * (x[k] - x[j])))
}

/// Second-order first derivative; `u_r(0) = 0` by symmetry, one-sided at `R`.
pub fn ddr(f: &RadialField) -> RadialField {
    let x = f.grid.nodes();
    let y = &f.values;
    let n = x.len();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = lagrange3_derivative(x, y, [i - 1, i, i + 1], i);
    }
    out[n - 1] = lagrange3_derivative(x, y, [n - 3, n - 2, n - 1], n - 1);
    RadialField {
        grid: f.grid.clone(),
        values: out,
    }
}

/// `(Δu)_i` on nodes `0..n-1` (finite-volume form), one-sided at `R`.
pub fn radial_laplacian(f: &RadialField) -> RadialField {
    let g = &f.grid;
    let n = g.len();
    let mut out = vec![0.0; n];
    apply_fv_laplacian(g, &f.values, &mut out[..n - 1]);
    let x = g.nodes();
    let y = &f.values;
    let idx = [n - 3, n - 2, n - 1];
    let urr = lagrange3_second(x, y, idx);
    let ur = lagrange3_derivative(x, y, idx, n - 1);
    out[n - 1] = urr + (g.dim() as f64 - 1.0) / x[n - 1] * ur;
    RadialField {
        grid: f.grid.clone(),
        values: out,
    }
}

/// Writes `(-M⁻¹K u)_i` for `i < out.len()`; needs `u.len() > out.len()`.
pub(crate) fn apply_fv_laplacian(g: &RadialGrid, u: &[f64], out: &mut [f64]) {
    let c = g.conductance();
    let v = g.volumes();
    for i in 0..out.len() {
        let right = c[i] * (u[i + 1] - u[i]);
        let left = if i == 0 { 0.0 } else { c[i - 1] * (u[i] - u[i - 1]) };
        out[i] = (right - left) / v[i];
    }
}

//! Quadrature over CP^1, CP^2, balls and spheres.
//!
//! The Fubini–Study volume `dVol = ω^m/m!` with `ω = (i/2)∂∂̄ log(1+‖z‖²)`
//! becomes uniform in the coordinates `t_k = |Z_k|²/‖Z‖²` and the phases
//! of the homogeneous coordinates:
//!
//! * m = 1: `dVol = ½ dt dθ` on `[0,1] × [0,2π)`, total area π.
//! * m = 2: `dVol = ¼ dt₁ dt₂ dθ₁ dθ₂` on the simplex `t₁ + t₂ ≤ 1`,
//!   total volume π²/2.
//!
//! Integrands with logarithmic singularities at known points are handled by
//! dyadic refinement of the cells that lie close to a singular point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// `n`-point Gauss–Legendre rule (Newton iteration on `P_n`).
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = if n == 0 { 0.0 } else { n as f64 * (x * p1 - p0) / (x * x - 1.0) };
    (p, d)
}

/// Sum in a fixed pairwise order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Tensor Gauss–Legendre cells, dyadically refined near known singular points.
    TensorGaussLegendre,
    /// Cell midpoints at two resolutions with Richardson extrapolation.
    MidpointRichardson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub scheme: Scheme,
    /// Cells along the radial direction (`t` on CP^m, `ρ` on balls).
    pub radial_cells: usize,
    /// Cells along each angular direction.
    pub angular_cells: usize,
    /// Gauss–Legendre nodes per cell and direction.
    pub order: usize,
    /// Dyadic refinement depth around known singular points.
    pub refine_levels: usize,
    /// A cell is refined when a singular point lies within this many cell widths.
    pub refine_reach: f64,
    /// Chart modulus above which evaluation switches to the opposite chart.
    pub split_radius: f64,
    /// Convergence tolerance on the error estimate.
    pub tolerance: f64,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self {
            scheme: Scheme::TensorGaussLegendre,
            radial_cells: 24,
            angular_cells: 48,
            order: 4,
            refine_levels: 6,
            refine_reach: 3.0,
            split_radius: 1.0,
            tolerance: 1e-3,
        }
    }
}

impl QuadratureGrid {
    /// Grid for smooth polynomial-type integrands of degree up to `degree`.
    pub fn smooth(degree: usize) -> Self {
        let angular_cells = (degree / 2).max(8);
        Self {
            radial_cells: 4,
            angular_cells,
            order: (degree / 2 + 2).clamp(4, 24),
            refine_levels: 0,
            tolerance: 1e-8,
            ..Self::default()
        }
    }

    /// Grid suited to log-modulus integrals of degree-`degree` sections: cells
    /// of FS size comparable to a fraction of the zero spacing `1/√N`.
    pub fn for_log_integrand(degree: usize) -> Self {
        let scale = (degree as f64).sqrt();
        Self {
            radial_cells: ((2.0 * scale).ceil() as usize).max(8),
            angular_cells: ((4.0 * scale).ceil() as usize).max(16),
            // the refinement error estimate overstates the true error by
            // 20–50× on these integrands, so shallow refinement suffices
            refine_levels: 4,
            refine_reach: 0.5,
            ..Self::default()
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub(crate) fn rule(&self) -> Rule {
        match self.scheme {
            Scheme::TensorGaussLegendre => Rule::gauss_legendre(self.order.max(1)),
            Scheme::MidpointRichardson => Rule::gauss_legendre(1),
        }
    }
}

/// Quadrature result with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureEstimate {
    pub scheme: Scheme,
    pub cells: usize,
    pub refinement_depth: usize,
    pub estimate: f64,
    pub error_estimate: f64,
}

impl QuadratureEstimate {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("estimate serializes")
    }
}

/// Unit homogeneous vector of the CP^1 point with coordinates `(t, θ)`,
/// `t = |z|²/(1+|z|²)`.
#[inline]
pub fn line_unit_vector(t: f64, theta: f64) -> [Complex64; 2] {
    let t = t.clamp(0.0, 1.0);
    [Complex64::new((1.0 - t).sqrt(), 0.0), Complex64::from_polar(t.sqrt(), theta)]
}

/// FS distance between unit homogeneous vectors of CP^1.
#[inline]
pub fn line_unit_distance(u: &[Complex64; 2], v: &[Complex64; 2]) -> f64 {
    let inner = u[0] * v[0].conj() + u[1] * v[1].conj();
    inner.norm().clamp(0.0, 1.0).acos()
}

/// Unit homogeneous vector of a chart-0 point `z` of CP^1.
#[inline]
pub fn line_unit_from_affine(z: Complex64) -> [Complex64; 2] {
    let s = (1.0 + z.norm_sqr()).sqrt().recip();
    [Complex64::new(s, 0.0), z * s]
}

/// Rectangle in a two-dimensional parameter space.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    pub u0: f64,
    pub u1: f64,
    pub v0: f64,
    pub v1: f64,
    pub level: usize,
}

impl Cell {
    /// Halves the cell along `u`, `v` or both.
    fn split(&self, along_u: bool, along_v: bool) -> Vec<Cell> {
        let l = self.level + 1;
        let us = if along_u { vec![(self.u0, 0.5 * (self.u0 + self.u1)), (0.5 * (self.u0 + self.u1), self.u1)] } else { vec![(self.u0, self.u1)] };
        let vs = if along_v { vec![(self.v0, 0.5 * (self.v0 + self.v1)), (0.5 * (self.v0 + self.v1), self.v1)] } else { vec![(self.v0, self.v1)] };
        let mut out = Vec::with_capacity(4);
        for &(v0, v1) in &vs {
            for &(u0, u1) in &us {
                out.push(Cell { u0, u1, v0, v1, level: l });
            }
        }
        out
    }
}

/// Uniform tiling of `[u0,u1] × [v0,v1]`, with extra radial break points.
pub(crate) fn tile(u_breaks: &[f64], nu_per: usize, v0: f64, v1: f64, nv: usize) -> Vec<Cell> {
    let mut cells = Vec::new();
    for w in u_breaks.windows(2) {
        let du = (w[1] - w[0]) / nu_per as f64;
        for i in 0..nu_per {
            let a = w[0] + du * i as f64;
            let b = if i + 1 == nu_per { w[1] } else { a + du };
            let dv = (v1 - v0) / nv as f64;
            for j in 0..nv {
                let c = v0 + dv * j as f64;
                let d = if j + 1 == nv { v1 } else { c + dv };
                cells.push(Cell { u0: a, u1: b, v0: c, v1: d, level: 0 });
            }
        }
    }
    cells
}

/// Two-dimensional cell integrator with refinement around singular points.
///
/// `map(u, v)` returns the geometric point and the Jacobian of the measure;
/// `dist` is the metric used to decide refinement.
pub(crate) struct CellIntegrator<'a, P> {
    pub rule: Rule,
    pub map: &'a dyn Fn(f64, f64) -> (P, f64),
    pub dist: &'a dyn Fn(&P, &P) -> f64,
    pub singular: &'a [P],
    pub reach: f64,
    pub levels: usize,
}

impl<P> CellIntegrator<'_, P> {
    fn cell_value(&self, c: &Cell, f: &dyn Fn(&P) -> f64) -> f64 {
        let mut acc = 0.0;
        for (u, wu) in self.rule.mapped(c.u0, c.u1) {
            for (v, wv) in self.rule.mapped(c.v0, c.v1) {
                let (p, jac) = (self.map)(u, v);
                if jac != 0.0 {
                    acc += wu * wv * jac * f(&p);
                }
            }
        }
        acc
    }

    /// `None` if the cell is kept, otherwise the directions to split. A
    /// direction whose geometric extent is under half of the other one is
    /// not split, which keeps refinement at coordinate poles linear in depth.
    fn refinement(&self, c: &Cell) -> Option<(bool, bool)> {
        if self.singular.is_empty() || c.level >= self.levels {
            return None;
        }
        let um = 0.5 * (c.u0 + c.u1);
        let vm = 0.5 * (c.v0 + c.v1);
        let (center, _) = (self.map)(um, vm);
        let mut radius: f64 = 0.0;
        for &(u, v) in &[
            (c.u0, c.v0),
            (c.u1, c.v0),
            (c.u0, c.v1),
            (c.u1, c.v1),
            (um, c.v0),
            (um, c.v1),
            (c.u0, vm),
            (c.u1, vm),
        ] {
            let (p, _) = (self.map)(u, v);
            radius = radius.max((self.dist)(&center, &p));
        }
        let limit = radius * (1.0 + 2.0 * self.reach);
        if !self.singular.iter().any(|s| (self.dist)(&center, s) <= limit) {
            return None;
        }
        let extent = |a: (f64, f64), b: (f64, f64)| (self.dist)(&(self.map)(a.0, a.1).0, &(self.map)(b.0, b.1).0);
        let eu = extent((c.u0, vm), (c.u1, vm));
        let ev = extent((um, c.v0), (um, c.v1));
        Some((eu >= 0.5 * ev, ev >= 0.5 * eu))
    }

    fn accumulate(&self, c: &Cell, f: &dyn Fn(&P) -> f64, leaves: &mut Vec<f64>, err: &mut f64, depth: &mut usize) {
        if let Some((along_u, along_v)) = self.refinement(c) {
            *depth = (*depth).max(c.level + 1);
            let children = c.split(along_u, along_v);
            if c.level + 1 == self.levels {
                let parent = self.cell_value(c, f);
                let mut sum = 0.0;
                for ch in &children {
                    let v = self.cell_value(ch, f);
                    leaves.push(v);
                    sum += v;
                }
                *err += (sum - parent).abs();
            } else {
                for ch in &children {
                    self.accumulate(ch, f, leaves, err, depth);
                }
            }
        } else {
            leaves.push(self.cell_value(c, f));
        }
    }

    /// Returns `(estimate, refinement error estimate, leaf cells, depth)`.
    pub fn integrate(&self, cells: &[Cell], f: &dyn Fn(&P) -> f64) -> (f64, f64, usize, usize) {
        let mut leaves = Vec::with_capacity(cells.len());
        let mut err = 0.0;
        let mut depth = 0;
        for c in cells {
            self.accumulate(c, f, &mut leaves, &mut err, &mut depth);
        }
        (pairwise_sum(&leaves), err, leaves.len(), depth)
    }
}

/// Integrates `f` over CP^1 against `dVol` (total mass π). `f` receives the
/// unit homogeneous vector of the point. `singular` lists unit vectors of
/// points where `f` has integrable singularities.
pub fn integrate_line(
    grid: &QuadratureGrid,
    singular: &[[Complex64; 2]],
    f: &dyn Fn(&[Complex64; 2]) -> f64,
) -> QuadratureEstimate {
    let map = |t: f64, theta: f64| (line_unit_vector(t, theta), 0.5);
    let dist = |a: &[Complex64; 2], b: &[Complex64; 2]| line_unit_distance(a, b);
    let run = |radial: usize, angular: usize| {
        let cells = tile(&[0.0, 1.0], radial, 0.0, TAU, angular);
        let integrator = CellIntegrator {
            rule: grid.rule(),
            map: &map,
            dist: &dist,
            singular,
            reach: grid.refine_reach,
            levels: grid.refine_levels,
        };
        integrator.integrate(&cells, f)
    };
    finish(grid, run)
}

fn finish(grid: &QuadratureGrid, run: impl Fn(usize, usize) -> (f64, f64, usize, usize)) -> QuadratureEstimate {
    match grid.scheme {
        Scheme::TensorGaussLegendre => {
            let (estimate, error_estimate, cells, refinement_depth) = run(grid.radial_cells, grid.angular_cells);
            QuadratureEstimate { scheme: grid.scheme, cells, refinement_depth, estimate, error_estimate }
        }
        Scheme::MidpointRichardson => {
            let (coarse, _, _, _) = run(grid.radial_cells, grid.angular_cells);
            let (fine, _, cells, refinement_depth) = run(2 * grid.radial_cells, 2 * grid.angular_cells);
            QuadratureEstimate {
                scheme: grid.scheme,
                cells,
                refinement_depth,
                estimate: (4.0 * fine - coarse) / 3.0,
                error_estimate: (fine - coarse).abs() / 3.0,
            }
        }
    }
}

/// Integrates `f(z)` against Lebesgue measure over the Euclidean annulus
/// `r_lo ≤ |z − center| ≤ r_hi` (with `r_lo` possibly 0) in the plane,
/// refining near the `singular` points.
pub fn integrate_plane_annulus(
    grid: &QuadratureGrid,
    center: Complex64,
    r_lo: f64,
    r_hi: f64,
    radial_cells: usize,
    singular: &[Complex64],
    f: &dyn Fn(Complex64) -> f64,
) -> QuadratureEstimate {
    let map = |r: f64, theta: f64| (center + Complex64::from_polar(r, theta), r);
    let dist = |a: &Complex64, b: &Complex64| (a - b).norm();
    let angular = grid.angular_cells.max(8);
    let run = |radial: usize, angular: usize| {
        let cells = tile(&[r_lo, r_hi], radial.max(1), 0.0, TAU, angular);
        let integrator = CellIntegrator {
            rule: grid.rule(),
            map: &map,
            dist: &dist,
            singular,
            reach: grid.refine_reach,
            levels: grid.refine_levels,
        };
        integrator.integrate(&cells, &|z: &Complex64| f(*z))
    };
    let base = QuadratureGrid { radial_cells, angular_cells: angular, ..grid.clone() };
    finish(&base, run)
}

/// Node of a four-dimensional product rule.
#[derive(Debug, Clone)]
pub struct Node4 {
    pub point: [Complex64; 3],
    pub weight: f64,
}

/// Product rule for CP^2 against `dVol` (total π²/2). Points are unit
/// homogeneous vectors. The simplex `t₁ + t₂ ≤ 1` is covered by the
/// collapsed map `t₁ = a`, `t₂ = (1 − a) b`.
pub fn plane_nodes(radial_cells: usize, angular_cells: usize, order: usize) -> Vec<Node4> {
    let rule = Rule::gauss_legendre(order.max(1));
    let mut radial = Vec::new();
    for i in 0..radial_cells {
        let a0 = i as f64 / radial_cells as f64;
        let a1 = (i + 1) as f64 / radial_cells as f64;
        radial.extend(rule.mapped(a0, a1));
    }
    let mut angular = Vec::new();
    for i in 0..angular_cells {
        let a0 = TAU * i as f64 / angular_cells as f64;
        let a1 = TAU * (i + 1) as f64 / angular_cells as f64;
        angular.extend(rule.mapped(a0, a1));
    }
    let mut out = Vec::with_capacity(radial.len().pow(2) * angular.len().pow(2));
    for &(a, wa) in &radial {
        for &(b, wb) in &radial {
            let t1 = a;
            let t2 = (1.0 - a) * b;
            let t0 = (1.0 - t1 - t2).max(0.0);
            let jac = 0.25 * (1.0 - a);
            for &(th1, w1) in &angular {
                for &(th2, w2) in &angular {
                    out.push(Node4 {
                        point: [
                            Complex64::new(t0.sqrt(), 0.0),
                            Complex64::from_polar(t1.sqrt(), th1),
                            Complex64::from_polar(t2.sqrt(), th2),
                        ],
                        weight: wa * wb * w1 * w2 * jac,
                    });
                }
            }
        }
    }
    out
}

/// Product rule over the shell `r_lo ≤ ‖z − c‖ ≤ r_hi` of C² against
/// Lebesgue measure, in the coordinates
/// `z − c = ρ (cos α e^{iθ₁}, sin α e^{iθ₂})`.
pub fn shell_nodes_c2(
    center: [Complex64; 2],
    r_lo: f64,
    r_hi: f64,
    radial_cells: usize,
    angular_cells: usize,
    order: usize,
) -> Vec<([Complex64; 2], f64)> {
    let rule = Rule::gauss_legendre(order.max(1));
    let split = |a: f64, b: f64, n: usize| {
        let mut out = Vec::new();
        for i in 0..n {
            let x0 = a + (b - a) * i as f64 / n as f64;
            let x1 = a + (b - a) * (i + 1) as f64 / n as f64;
            out.extend(rule.mapped(x0, x1));
        }
        out
    };
    let rho = split(r_lo, r_hi, radial_cells.max(1));
    let alpha = split(0.0, 0.5 * PI, (angular_cells / 4).max(2));
    let theta = split(0.0, TAU, angular_cells.max(4));
    let mut out = Vec::with_capacity(rho.len() * alpha.len() * theta.len() * theta.len());
    for &(r, wr) in &rho {
        for &(a, wa) in &alpha {
            let (sa, ca) = a.sin_cos();
            let jac = r.powi(3) * ca * sa;
            for &(t1, w1) in &theta {
                for &(t2, w2) in &theta {
                    let z = [
                        center[0] + Complex64::from_polar(r * ca, t1),
                        center[1] + Complex64::from_polar(r * sa, t2),
                    ];
                    out.push((z, wr * wa * w1 * w2 * jac));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in 1..12 {
            let rule = Rule::gauss_legendre(n);
            for k in 0..(2 * n) {
                let got = rule.integrate(0.0, 1.0, |x| x.powi(k as i32));
                assert!((got - 1.0 / (k as f64 + 1.0)).abs() < 1e-13, "n={n} k={k} got={got}");
            }
        }
    }

    #[test]
    fn line_volume_is_pi() {
        let grid = QuadratureGrid::default();
        let est = integrate_line(&grid, &[], &|_| 1.0);
        assert!((est.estimate - PI).abs() < 1e-10);
    }

    #[test]
    fn plane_volume_is_half_pi_squared() {
        let total: f64 = plane_nodes(2, 2, 3).iter().map(|n| n.weight).sum();
        assert!((total - PI * PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn plane_nodes_are_unit_vectors() {
        for n in plane_nodes(2, 2, 2) {
            let norm: f64 = n.point.iter().map(|c| c.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shell_volume_matches_ball_volume() {
        // vol B(r) in C^2 = π² r⁴ / 2
        let nodes = shell_nodes_c2([Complex64::new(0.0, 0.0); 2], 0.0, 1.5, 2, 32, 6);
        let total: f64 = nodes.iter().map(|n| n.1).sum();
        let exact = PI * PI * 1.5f64.powi(4) / 2.0;
        assert!((total - exact).abs() < 1e-9 * exact, "{total}");
    }

    #[test]
    fn refinement_handles_log_singularity() {
        // ∫_{|z|<1} log|z − 0.3| dA = π·log(1)... mean value: for |a| < 1,
        // ∫_{D} log|z − a| dA = π (|a|²−1)/2 + π·0 = π(|a|² − 1)/2.
        let a = Complex64::new(0.3, 0.0);
        let grid = QuadratureGrid { angular_cells: 32, ..QuadratureGrid::default() };
        let est = integrate_plane_annulus(&grid, Complex64::new(0.0, 0.0), 0.0, 1.0, 8, &[a], &|z| (z - a).norm().ln());
        let exact = PI * (a.norm_sqr() - 1.0) / 2.0;
        assert!((est.estimate - exact).abs() < 1e-5, "{} vs {exact}", est.estimate);
        assert!(est.refinement_depth == grid.refine_levels);
    }

    #[test]
    fn pairwise_sum_matches_naive_sum() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert!((pairwise_sum(&v) - v.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_serialize() {
        let est = integrate_line(&QuadratureGrid::default(), &[], &|_| 1.0);
        let json = est.to_json();
        for key in ["scheme", "cells", "refinement_depth", "estimate", "error_estimate"] {
            assert!(json.contains(key));
        }
    }
}

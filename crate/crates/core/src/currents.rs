//! Log-modulus integrals and Poincaré–Lelong linear statistics.
//!
//! For a test function ψ on CP^m,
//!
//! ```text
//! ∫_{Z_s} ψ ω^{m−1}/(m−1)! = (N m/π) ∫ ψ dVol + (2/π) ∫ log|s|_h · tr_ω(∂∂̄ψ) dVol
//! ```
//!
//! with `tr_ω(∂∂̄ψ) = Σ g^{jk̄} ∂_j∂̄_k ψ` and `g^{jk̄} = (1+‖z‖²)(δ_jk + z̄_j z_k)`.
//! For m = 1 the second term is `(1/2π) ∫ Δψ log|s|_h dA` and the left side is
//! `Σ_{roots} ψ`. Test functions are sums of radial quintic-smoothstep
//! bumps, so `∂∂̄ψ` is available in closed form and the integrals only run
//! over the smoothing collars.

use crate::chart::ChartPoint;
use crate::domain::{ball_volume, ChartBall, DomainSpec};
use crate::ensemble::PolySection;
use crate::error::{Error, Result};
use crate::quadrature::{
    integrate_line, integrate_plane_annulus, line_unit_from_affine, plane_nodes, shell_nodes_c2, tile, CellIntegrator,
    QuadratureEstimate, QuadratureGrid, Rule,
};
use crate::zeros::find_roots;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `ψ ≤ χ_D`, collar inside the boundary.
    Inner,
    /// `ψ ≥ χ_D`, collar outside the boundary.
    Outer,
}

/// Quintic smoothstep `S(x) = 6x⁵ − 15x⁴ + 10x³` and its first two derivatives.
fn smoothstep(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let x2 = x * x;
    let s = x2 * x * (10.0 + x * (6.0 * x - 15.0));
    let ds = 30.0 * x2 * (x - 1.0) * (x - 1.0);
    let dds = 60.0 * x * (2.0 * x - 1.0) * (x - 1.0);
    (s, ds, dds)
}

/// Radial bump `φ(ρ)`: 1 for `ρ ≤ r_lo`, 0 for `ρ ≥ r_hi`, smoothstep between.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub sign: f64,
    pub ball: ChartBall,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl Bump {
    /// `(φ, φ', φ'')` at chart distance `rho` from the center.
    pub fn profile(&self, rho: f64) -> (f64, f64, f64) {
        let w = self.r_hi - self.r_lo;
        let (s, ds, dds) = smoothstep((self.r_hi - rho) / w);
        (s, -ds / w, dds / (w * w))
    }

    fn offset_in_chart(&self, z: &[Complex64]) -> f64 {
        z.iter().zip(&self.ball.center).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    /// Euclidean Laplacian `φ'' + (2m−1) φ'/ρ` in the ball's chart.
    fn laplacian_at(&self, rho: f64, m: usize) -> f64 {
        let (_, d1, d2) = self.profile(rho);
        if rho == 0.0 {
            return 2.0 * m as f64 * d2;
        }
        d2 + (2 * m - 1) as f64 * d1 / rho
    }

    /// `tr_ω(∂∂̄φ)` at chart coordinates `z`, from `φ` as a function of
    /// `s = ‖z − c‖²`.
    fn fs_trace(&self, z: &[Complex64]) -> f64 {
        let m = z.len();
        let rho = self.offset_in_chart(z);
        let (_, d1, d2) = self.profile(rho);
        if d1 == 0.0 && d2 == 0.0 {
            return 0.0;
        }
        // dφ/ds and d²φ/ds² from the ρ-derivatives
        let (p1, p2) = if rho > 0.0 { (d1 / (2.0 * rho), (d2 - d1 / rho) / (4.0 * rho * rho)) } else { (0.5 * d2, 0.0) };
        let z2: f64 = z.iter().map(|x| x.norm_sqr()).sum();
        let u2 = rho * rho;
        let cross: Complex64 = z.iter().zip(&self.ball.center).map(|(x, c)| x.conj() * (x - c)).sum();
        (1.0 + z2) * (m as f64 * p1 + p2 * u2 + p1 * z2 + p2 * cross.norm_sqr())
    }
}

/// Smoothed indicator `ψ = constant + Σ sign_i φ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub domain: DomainSpec,
    pub width: f64,
    pub side: Side,
    pub constant: f64,
    pub bumps: Vec<Bump>,
}

/// Builds the inner (`ψ ≤ χ_D`) or outer (`ψ ≥ χ_D`) smoothed indicator with
/// collar width `width` in chart coordinates.
pub fn smooth_indicator(domain: &DomainSpec, width: f64, side: Side) -> Result<TestFunction> {
    let dec = domain.decomposition()?;
    let scale = domain.characteristic_radius()?;
    if !(width > 0.0 && width < scale) {
        return Err(Error::WidthTooLarge { width, radius: scale });
    }
    let bumps = dec
        .terms
        .into_iter()
        .map(|(sign, ball)| {
            // a positive term needs φ ≤ χ_B for an inner ψ, a negative one φ ≥ χ_B
            let shrink = (sign > 0.0) == (side == Side::Inner);
            let (r_lo, r_hi) = if shrink { (ball.radius - width, ball.radius) } else { (ball.radius, ball.radius + width) };
            Bump { sign, ball, r_lo, r_hi }
        })
        .collect();
    Ok(TestFunction { domain: domain.clone(), width, side, constant: dec.constant, bumps })
}

impl TestFunction {
    /// The constant test function 1 on CP^m.
    pub fn one(m: usize) -> Self {
        Self { domain: DomainSpec::Whole { m }, width: 0.0, side: Side::Inner, constant: 1.0, bumps: vec![] }
    }

    /// `a·self + b·other` (same dimension).
    pub fn combine(&self, a: f64, other: &TestFunction, b: f64) -> TestFunction {
        let mut bumps: Vec<Bump> = self.bumps.iter().map(|x| Bump { sign: a * x.sign, ..x.clone() }).collect();
        bumps.extend(other.bumps.iter().map(|x| Bump { sign: b * x.sign, ..x.clone() }));
        TestFunction { constant: a * self.constant + b * other.constant, bumps, ..self.clone() }
    }

    pub fn value(&self, p: &ChartPoint) -> f64 {
        self.constant
            + self
                .bumps
                .iter()
                .map(|b| match b.ball.offset(p) {
                    Some(rho) => b.sign * b.profile(rho).0,
                    None => 0.0,
                })
                .sum::<f64>()
    }

    /// Euclidean Laplacian in the chart of `p`. Bumps defined in the other
    /// chart of CP^1 are transformed conformally (`Δ_z = |w|⁴ Δ_w`).
    pub fn laplacian(&self, p: &ChartPoint) -> Result<f64> {
        let m = p.dim();
        let mut acc = 0.0;
        for b in &self.bumps {
            if b.ball.chart == p.chart() {
                acc += b.sign * b.laplacian_at(b.offset_in_chart(p.coords()), m);
                continue;
            }
            if m != 1 {
                return Err(Error::UnsupportedDimension { m, operation: "cross-chart Laplacian" });
            }
            if let Some(q) = p.to_chart(b.ball.chart) {
                let w = q.coords()[0];
                acc += b.sign * w.norm_sqr().powi(2) * b.laplacian_at(b.offset_in_chart(q.coords()), 1);
            }
        }
        Ok(acc)
    }

    /// Euclidean gradient `(∂_x ψ + i ∂_y ψ)` per coordinate, in the chart of `p`.
    pub fn gradient(&self, p: &ChartPoint) -> Result<Vec<Complex64>> {
        let m = p.dim();
        let mut acc = vec![Complex64::new(0.0, 0.0); m];
        for b in &self.bumps {
            if b.ball.chart == p.chart() {
                let rho = b.offset_in_chart(p.coords());
                if rho > 0.0 {
                    let d1 = b.profile(rho).1;
                    for (g, (z, c)) in acc.iter_mut().zip(p.coords().iter().zip(&b.ball.center)) {
                        *g += b.sign * d1 * (z - c) / rho;
                    }
                }
                continue;
            }
            if m != 1 {
                return Err(Error::UnsupportedDimension { m, operation: "cross-chart gradient" });
            }
            if let Some(q) = p.to_chart(b.ball.chart) {
                let w = q.coords()[0];
                let rho = b.offset_in_chart(q.coords());
                if rho > 0.0 {
                    let gw = b.sign * b.profile(rho).1 * (w - b.ball.center[0]) / rho;
                    // 2∂_z̄ = −w̄² · 2∂_w̄
                    acc[0] += -(w.conj() * w.conj()) * gw;
                }
            }
        }
        Ok(acc)
    }
}

/// Which frame `log|s|` is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogNormalization {
    /// `|f|(1+‖z‖²)^{−N/2}` with the sampled coefficients as given.
    Monomial,
    /// The section scaled by `γ_{N,m}`, so that `E|s|_h² = Π_N`.
    Orthonormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogModulusIntegral {
    pub signed: QuadratureEstimate,
    pub absolute: QuadratureEstimate,
}

/// `(∫ log|s|_h dVol, ∫ |log|s|_h| dVol)` over all of CP^m.
///
/// For m = 1 the zeros are located first and quadrature cells near them are
/// refined. For m = 2 a product rule is used at the grid resolution and at
/// half of it; their difference is the error estimate.
pub fn integrate_log_modulus(
    s: &PolySection,
    grid: &QuadratureGrid,
    normalization: LogNormalization,
) -> Result<LogModulusIntegral> {
    let shift = match normalization {
        LogNormalization::Monomial => 0.0,
        LogNormalization::Orthonormal => s.spec().gamma().ln(),
    };
    let result = match s.m() {
        1 => {
            let roots = find_roots(s)?;
            let mut singular: Vec<[Complex64; 2]> =
                roots.roots.iter().map(|r| {
                    let u = r.unit_homogeneous();
                    [u[0], u[1]]
                }).collect();
            if roots.degree_at_infinity > 0 {
                singular.push([Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
            }
            let signed = integrate_line(grid, &singular, &|u| s.log_abs_line(u) + shift);
            let absolute = integrate_line(grid, &singular, &|u| (s.log_abs_line(u) + shift).abs());
            LogModulusIntegral { signed, absolute }
        }
        2 => {
            let run = |radial: usize, angular: usize| {
                let nodes = plane_nodes(radial, angular, grid.order);
                let values: Vec<(f64, f64)> = nodes
                    .iter()
                    .map(|n| {
                        let v = s.log_abs_unit(&n.point) + shift;
                        (n.weight * v, n.weight * v.abs())
                    })
                    .collect();
                let signed: Vec<f64> = values.iter().map(|v| v.0).collect();
                let absolute: Vec<f64> = values.iter().map(|v| v.1).collect();
                (crate::quadrature::pairwise_sum(&signed), crate::quadrature::pairwise_sum(&absolute), nodes.len())
            };
            let (s_fine, a_fine, cells) = run(grid.radial_cells, grid.angular_cells);
            let (s_coarse, a_coarse, _) = run((grid.radial_cells / 2).max(1), (grid.angular_cells / 2).max(1));
            let est = |estimate: f64, other: f64| QuadratureEstimate {
                scheme: grid.scheme,
                cells,
                refinement_depth: 0,
                estimate,
                error_estimate: (estimate - other).abs(),
            };
            LogModulusIntegral { signed: est(s_fine, s_coarse), absolute: est(a_fine, a_coarse) }
        }
        m => return Err(Error::UnsupportedDimension { m, operation: "integrate_log_modulus" }),
    };
    for e in [&result.signed, &result.absolute] {
        if !e.estimate.is_finite() || e.error_estimate > grid.tolerance * e.estimate.abs().max(1.0) {
            return Err(Error::QuadratureNotConverged { estimate: e.estimate, error_estimate: e.error_estimate });
        }
    }
    Ok(result)
}

/// Poincaré–Lelong statistic with its quadrature diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlEstimate {
    pub value: f64,
    /// One entry per collar integral.
    pub collars: Vec<QuadratureEstimate>,
}

impl PlEstimate {
    pub fn error_estimate(&self) -> f64 {
        self.collars.iter().map(|c| c.error_estimate).sum()
    }
}

/// Quadrature realization of `∫_{Z_s} ψ`.
pub fn pl_linear_statistic(s: &PolySection, psi: &TestFunction, grid: &QuadratureGrid) -> Result<f64> {
    Ok(pl_linear_statistic_detailed(s, psi, grid)?.value)
}

pub fn pl_linear_statistic_detailed(s: &PolySection, psi: &TestFunction, grid: &QuadratureGrid) -> Result<PlEstimate> {
    let m = s.m();
    if psi.domain.dim() != m {
        return Err(Error::InvalidDomain(format!("test function on CP^{} used with m = {m}", psi.domain.dim())));
    }
    let n = s.degree() as f64;
    // constant · (N m/π) · Vol(CP^m) = constant · N π^{m−1}/(m−1)!
    let mut value = psi.constant * n * PI.powi(m as i32 - 1) / (1..m).product::<usize>().max(1) as f64;
    let mut collars = Vec::with_capacity(psi.bumps.len());
    let roots = if m == 1 && !psi.bumps.is_empty() { Some(find_roots(s)?) } else { None };
    for bump in &psi.bumps {
        let (inner, collar) = match m {
            1 => line_bump(s, bump, roots.as_ref().expect("roots for m = 1"), grid)?,
            2 => plane_bump(s, bump, grid)?,
            _ => return Err(Error::UnsupportedDimension { m, operation: "pl_linear_statistic" }),
        };
        value += bump.sign * (inner + collar.estimate);
        collars.push(collar);
    }
    if !value.is_finite() {
        return Err(Error::QuadratureNotConverged { estimate: value, error_estimate: f64::INFINITY });
    }
    Ok(PlEstimate { value, collars })
}

/// Unit homogeneous vector of the CP^1 point with coordinate `z` in `chart`.
#[inline]
fn line_unit_in_chart(chart: usize, z: Complex64) -> [Complex64; 2] {
    let u = line_unit_from_affine(z);
    if chart == 0 {
        u
    } else {
        [u[1], u[0]]
    }
}

/// `(N/π)·Vol(ρ < r_lo)` and the collar integral for one bump on CP^1.
fn line_bump(
    s: &PolySection,
    bump: &Bump,
    roots: &crate::zeros::RootSet,
    grid: &QuadratureGrid,
) -> Result<(f64, QuadratureEstimate)> {
    let n = s.degree() as f64;
    let chart = bump.ball.chart;
    let c = bump.ball.center[0];
    let inner = if bump.r_lo > 0.0 { n / PI * ball_volume(1, &bump.ball.center, bump.r_lo)? } else { 0.0 };
    let mut singular: Vec<Complex64> = roots
        .roots
        .iter()
        .filter_map(|r| r.to_chart(chart).map(|q| q.coords()[0]))
        .collect();
    if roots.degree_at_infinity > 0 && chart == 1 {
        singular.push(Complex64::new(0.0, 0.0));
    }
    let w = bump.r_hi - bump.r_lo;
    let h = w / 4.0;
    let angular = ((TAU * bump.r_hi / h).ceil() as usize).max(grid.angular_cells);
    let collar_grid = QuadratureGrid { angular_cells: angular, ..grid.clone() };
    let f = |z: Complex64| {
        let rho = (z - c).norm();
        let (phi, _, _) = bump.profile(rho);
        let lap = bump.laplacian_at(rho, 1);
        let z2 = z.norm_sqr();
        let mut v = n / PI * phi / ((1.0 + z2) * (1.0 + z2));
        if lap != 0.0 {
            v += lap / TAU * s.log_abs_line(&line_unit_in_chart(chart, z));
        }
        v
    };
    let est = integrate_plane_annulus(&collar_grid, c, bump.r_lo, bump.r_hi, 4, &singular, &f);
    Ok((inner, est))
}

/// Same for CP^2 with the shell product rule (no root refinement).
fn plane_bump(s: &PolySection, bump: &Bump, grid: &QuadratureGrid) -> Result<(f64, QuadratureEstimate)> {
    let n = s.degree() as f64;
    let c = [bump.ball.center[0], bump.ball.center[1]];
    let chart = bump.ball.chart;
    let run = |radial: usize, angular: usize, order: usize| {
        let inner: f64 = if bump.r_lo > 0.0 {
            shell_nodes_c2(c, 0.0, bump.r_lo, radial, angular, order)
                .iter()
                .map(|(z, w)| w * (1.0 + z[0].norm_sqr() + z[1].norm_sqr()).powi(-3))
                .sum::<f64>()
                * 2.0
                * n
                / PI
        } else {
            0.0
        };
        let terms: Vec<f64> = shell_nodes_c2(c, bump.r_lo, bump.r_hi, radial, angular, order)
            .iter()
            .map(|(z, w)| {
                let q = ChartPoint::new(chart, z.to_vec()).expect("finite node");
                let rho = bump.offset_in_chart(z);
                let (phi, _, _) = bump.profile(rho);
                let dens = (1.0 + z[0].norm_sqr() + z[1].norm_sqr()).powi(-3);
                let tr = bump.fs_trace(z);
                let mut v = 2.0 * n / PI * phi;
                if tr != 0.0 {
                    v += 2.0 / PI * tr * s.log_abs_unit(&q.unit_homogeneous());
                }
                w * dens * v
            })
            .collect();
        (inner, crate::quadrature::pairwise_sum(&terms))
    };
    let order = grid.order.max(4);
    let (inner, fine) = run(grid.radial_cells.max(2), grid.angular_cells.max(8), order);
    let (_, coarse) = run((grid.radial_cells / 2).max(1), (grid.angular_cells / 2).max(4), order);
    Ok((
        inner,
        QuadratureEstimate {
            scheme: grid.scheme,
            cells: grid.radial_cells * grid.angular_cells.pow(3) / 4,
            refinement_depth: 0,
            estimate: fine,
            error_estimate: (fine - coarse).abs(),
        },
    ))
}

/// `(pl with the inner ψ₁, pl with the outer ψ₂)`; brackets `∫_{Z_s} χ_D`.
pub fn volume_sandwich(s: &PolySection, domain: &DomainSpec, width: f64, grid: &QuadratureGrid) -> Result<(f64, f64)> {
    let inner = smooth_indicator(domain, width, Side::Inner)?;
    let outer = smooth_indicator(domain, width, Side::Outer)?;
    Ok((pl_linear_statistic(s, &inner, grid)?, pl_linear_statistic(s, &outer, grid)?))
}

/// Poisson kernel of the ball of radius `r = ‖z‖`:
/// `r^{2m−2}(r² − ‖ζ‖²)/‖ζ − z‖^{2m}`.
pub fn poisson_kernel(zeta: &ChartPoint, z: &ChartPoint, r: f64) -> Result<f64> {
    let m = zeta.dim();
    let zeta2 = zeta.norm_sqr();
    if zeta2.sqrt() >= r {
        return Err(Error::OutsideBall { norm: zeta2.sqrt(), radius: r });
    }
    let d2: f64 = zeta.coords().iter().zip(z.coords()).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(r.powi(2 * m as i32 - 2) * (r * r - zeta2) / d2.powi(m as i32))
}

/// Average of `f` over the sphere `‖z‖ = r` of chart 0 against the invariant
/// probability measure, refining near `singular` points (m = 1 only).
pub fn sphere_average(
    m: usize,
    r: f64,
    grid: &QuadratureGrid,
    singular: &[Complex64],
    f: &dyn Fn(&ChartPoint) -> f64,
) -> Result<f64> {
    match m {
        1 => {
            let map = |theta: f64, _v: f64| (Complex64::from_polar(r, theta), 1.0 / TAU);
            let dist = |a: &Complex64, b: &Complex64| (a - b).norm();
            let cells = tile(&[0.0, TAU], grid.angular_cells.max(8), 0.0, 1.0, 1);
            let integrator = CellIntegrator {
                rule: grid.rule(),
                map: &map,
                dist: &dist,
                singular,
                reach: grid.refine_reach,
                levels: grid.refine_levels,
            };
            let (estimate, _, _, _) = integrator.integrate(&cells, &|z: &Complex64| f(&ChartPoint::line(*z)));
            Ok(estimate)
        }
        2 => {
            let rule = Rule::gauss_legendre(grid.order.max(1));
            let split = |a: f64, b: f64, k: usize| -> Vec<(f64, f64)> {
                (0..k)
                    .flat_map(|i| {
                        let x0 = a + (b - a) * i as f64 / k as f64;
                        let x1 = a + (b - a) * (i + 1) as f64 / k as f64;
                        rule.mapped(x0, x1).collect::<Vec<_>>()
                    })
                    .collect()
            };
            let alpha = split(0.0, 0.5 * PI, (grid.angular_cells / 4).max(2));
            let theta = split(0.0, TAU, grid.angular_cells.max(8));
            // dσ = cos α sin α dα dθ₁ dθ₂ / (2π²) on S³
            let mut terms = Vec::with_capacity(alpha.len() * theta.len() * theta.len());
            for &(a, wa) in &alpha {
                let (sa, ca) = a.sin_cos();
                for &(t1, w1) in &theta {
                    for &(t2, w2) in &theta {
                        let p = ChartPoint::affine(vec![Complex64::from_polar(r * ca, t1), Complex64::from_polar(r * sa, t2)])?;
                        terms.push(wa * w1 * w2 * ca * sa / (2.0 * PI * PI) * f(&p));
                    }
                }
            }
            Ok(crate::quadrature::pairwise_sum(&terms))
        }
        _ => Err(Error::UnsupportedDimension { m, operation: "sphere_average" }),
    }
}

/// Sphere average of `log^−|s|_h = max(−log|s|_h, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereLogMinus {
    pub value: f64,
    /// A zero lies within `1e−9` of the sphere.
    pub flagged: bool,
}

pub fn sphere_log_minus(s: &PolySection, r: f64, grid: &QuadratureGrid) -> Result<SphereLogMinus> {
    if !(0.25..=3.0).contains(&r) {
        return Err(Error::InvalidDomain(format!("sphere radius {r} outside [0.25, 3]")));
    }
    let (singular, flagged) = if s.m() == 1 {
        let roots: Vec<Complex64> = find_roots(s)?.roots.iter().filter_map(|p| p.as_line_affine()).collect();
        let flagged = roots.iter().any(|z| (z.norm() - r).abs() < 1e-9);
        (roots, flagged)
    } else {
        (vec![], false)
    };
    let f = |p: &ChartPoint| (-s.log_hermitian_norm(p).unwrap_or(f64::NEG_INFINITY)).max(0.0);
    let value = sphere_average(s.m(), r, grid, &singular, &f)?;
    Ok(SphereLogMinus { value, flagged })
}

/// `∫ P_r(ζ, z) log|f(z)| dσ_r(z)` for the chart-0 polynomial `f`.
pub fn poisson_log_average(s: &PolySection, zeta: &ChartPoint, r: f64, grid: &QuadratureGrid) -> Result<f64> {
    if zeta.norm_sqr().sqrt() >= r {
        return Err(Error::OutsideBall { norm: zeta.norm_sqr().sqrt(), radius: r });
    }
    let half_n = 0.5 * s.degree() as f64;
    let singular: Vec<Complex64> = if s.m() == 1 {
        find_roots(s)?.roots.iter().filter_map(|p| p.as_line_affine()).collect()
    } else {
        vec![]
    };
    let f = |p: &ChartPoint| {
        let log_f = s.log_hermitian_norm(p).unwrap_or(f64::NEG_INFINITY) + half_n * (1.0 + p.norm_sqr()).ln();
        poisson_kernel(zeta, p, r).unwrap_or(0.0) * log_f
    };
    sphere_average(s.m(), r, grid, &singular, &f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_section, EnsembleSpec};

    fn z(re: f64, im: f64) -> ChartPoint {
        ChartPoint::line(Complex64::new(re, im))
    }

    fn unit_disk() -> DomainSpec {
        DomainSpec::disk(Complex64::new(0.0, 0.0), 1.0)
    }

    #[test]
    fn smoothstep_profile_examples() {
        let inner = smooth_indicator(&unit_disk(), 0.1, Side::Inner).unwrap();
        assert_eq!(inner.value(&z(0.85, 0.0)), 1.0);
        let v = inner.value(&z(0.999, 0.0));
        assert!(v > 0.0 && v < 1.0);
        assert_eq!(inner.value(&z(1.0, 0.0)), 0.0);
        let outer = smooth_indicator(&unit_disk(), 0.1, Side::Outer).unwrap();
        assert_eq!(outer.value(&z(1.0, 0.0)), 1.0);
        assert_eq!(outer.value(&z(1.11, 0.0)), 0.0);
    }

    #[test]
    fn width_must_fit() {
        assert!(matches!(smooth_indicator(&unit_disk(), 1.5, Side::Inner), Err(Error::WidthTooLarge { .. })));
        let annulus = DomainSpec::Annulus { center: z(0.0, 0.0), r_in: 0.5, r_out: 0.7 };
        assert!(smooth_indicator(&annulus, 0.15, Side::Inner).is_err());
        assert!(smooth_indicator(&annulus, 0.05, Side::Inner).is_ok());
    }

    #[test]
    fn sandwich_holds_pointwise() {
        let domains = [
            unit_disk(),
            DomainSpec::Annulus { center: z(0.2, 0.1), r_in: 0.4, r_out: 1.0 },
            DomainSpec::complement(DomainSpec::disk(Complex64::new(0.5, 0.0), 0.7)),
            DomainSpec::FsCap { center: z(2.0, 1.0), radius: 0.6 },
        ];
        for d in &domains {
            let lo = smooth_indicator(d, 0.05, Side::Inner).unwrap();
            let hi = smooth_indicator(d, 0.05, Side::Outer).unwrap();
            for i in 0..400 {
                let t = i as f64 * 0.173;
                let p = z(2.5 * (t * 0.31).sin() * t.cos(), 2.5 * (t * 0.29).cos() * t.sin());
                let chi = if d.contains(&p) { 1.0 } else { 0.0 };
                let (a, b) = (lo.value(&p), hi.value(&p));
                assert!((-1e-15..=1.0 + 1e-15).contains(&a) && (-1e-15..=1.0 + 1e-15).contains(&b));
                assert!(a <= chi + 1e-15 && chi <= b + 1e-15, "{d:?} at {p:?}: {a} {chi} {b}");
            }
        }
    }

    /// Fourth-order central differences with step `h`: `(Δψ, ∂_xψ + i∂_yψ)`.
    fn finite_differences(psi: &TestFunction, c: Complex64, h: f64) -> (f64, Complex64) {
        let at = |dx: f64, dy: f64| psi.value(&ChartPoint::line(c + Complex64::new(dx, dy)));
        let second = |f: &dyn Fn(f64) -> f64| (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h);
        let first = |f: &dyn Fn(f64) -> f64| (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h);
        let fx = |t: f64| at(t, 0.0);
        let fy = |t: f64| at(0.0, t);
        (second(&fx) + second(&fy), Complex64::new(first(&fx), first(&fy)))
    }

    /// Whether the stencil around `c` stays off the collar edges, where the
    /// profile is only C².
    fn away_from_kinks(psi: &TestFunction, c: &ChartPoint, h: f64) -> bool {
        psi.bumps.iter().all(|b| match b.ball.offset(c) {
            Some(rho) => (rho - b.r_lo).abs() > 4.0 * h && (rho - b.r_hi).abs() > 4.0 * h,
            None => true,
        })
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        let d = DomainSpec::Annulus { center: z(0.3, -0.2), r_in: 0.4, r_out: 1.0 };
        let h = 1e-4;
        let mut checked = 0;
        for side in [Side::Inner, Side::Outer] {
            let psi = smooth_indicator(&d, 0.1, side).unwrap();
            for i in 0..400 {
                let rho = 0.25 + 0.95 * (i as f64 / 400.0);
                let c = Complex64::new(0.3, -0.2) + Complex64::from_polar(rho, i as f64 * 0.41);
                let p = ChartPoint::line(c);
                if !away_from_kinks(&psi, &p, h) {
                    continue;
                }
                let (lap, grad) = finite_differences(&psi, c, h);
                let exact = psi.laplacian(&p).unwrap();
                assert!((lap - exact).abs() < 1e-6 * exact.abs().max(1.0), "{lap} {exact}");
                assert!((psi.gradient(&p).unwrap()[0] - grad).norm() < 1e-6);
                checked += 1;
            }
        }
        assert!(checked > 700);
    }

    #[test]
    fn cross_chart_laplacian_is_conformal() {
        // a disk around infinity, checked in chart 0
        let d = DomainSpec::EuclideanDisk { center: ChartPoint::infinity(), radius: 0.6 };
        let psi = smooth_indicator(&d, 0.2, Side::Inner).unwrap();
        let h = 1e-4;
        for &c in &[Complex64::new(2.0, 0.3), Complex64::new(-1.5, 1.0), Complex64::new(0.4, 2.2)] {
            let p = ChartPoint::line(c);
            assert!(away_from_kinks(&psi, &p, h));
            let (lap, grad) = finite_differences(&psi, c, h);
            let exact = psi.laplacian(&p).unwrap();
            assert!(exact != 0.0);
            assert!((lap - exact).abs() < 1e-6 * exact.abs().max(1.0), "{lap} {exact}");
            assert!((psi.gradient(&p).unwrap()[0] - grad).norm() < 1e-6);
        }
    }

    #[test]
    fn constant_test_function_gives_degree() {
        let spec = EnsembleSpec::new(1, 13, 2).unwrap();
        let s = sample_section(&spec, 0);
        let v = pl_linear_statistic(&s, &TestFunction::one(1), &QuadratureGrid::default()).unwrap();
        assert_eq!(v, 13.0);
    }

    #[test]
    fn pl_matches_root_sum() {
        let spec = EnsembleSpec::new(1, 30, 8).unwrap();
        let grid = QuadratureGrid::default();
        let psi = smooth_indicator(&unit_disk(), 0.1, Side::Inner).unwrap();
        for trial in 0..5 {
            let s = sample_section(&spec, trial);
            let roots = find_roots(&s).unwrap();
            let direct: f64 = roots.roots.iter().map(|r| psi.value(r)).sum();
            let pl = pl_linear_statistic(&s, &psi, &grid).unwrap();
            assert!((pl - direct).abs() < 1e-3 * 30.0, "{pl} vs {direct}");
        }
    }

    #[test]
    fn pl_is_linear() {
        let spec = EnsembleSpec::new(1, 20, 8).unwrap();
        let s = sample_section(&spec, 1);
        let grid = QuadratureGrid::default();
        let a = smooth_indicator(&unit_disk(), 0.1, Side::Inner).unwrap();
        let b = smooth_indicator(&DomainSpec::disk(Complex64::new(1.0, 1.0), 0.5), 0.1, Side::Outer).unwrap();
        let sum = pl_linear_statistic(&s, &a.combine(1.0, &b, 1.0), &grid).unwrap();
        let parts = pl_linear_statistic(&s, &a, &grid).unwrap() + pl_linear_statistic(&s, &b, &grid).unwrap();
        assert!((sum - parts).abs() < 1e-9);
    }

    #[test]
    fn sandwich_brackets_the_explicit_quadratic() {
        let s = PolySection::line_from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let (lo, hi) =
            volume_sandwich(&s, &DomainSpec::disk(Complex64::new(0.0, 0.0), 1.5), 0.1, &QuadratureGrid::default()).unwrap();
        assert!(lo <= 2.0 + 1e-6 && 2.0 <= hi + 1e-6 && hi - lo <= 0.2, "{lo} {hi}");
        let (lo, hi) = volume_sandwich(&s, &DomainSpec::Whole { m: 1 }, 0.1, &QuadratureGrid::default()).unwrap();
        assert_eq!((lo, hi), (2.0, 2.0));
    }

    #[test]
    fn constant_section_log_integral() {
        let spec = EnsembleSpec::new(1, 2, 0).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let s = PolySection::from_coeffs(spec, 0, vec![one, zero, zero]).unwrap();
        // the double zero at infinity sits on the edge t = 1 of the parameter domain
        let grid = QuadratureGrid { tolerance: 1e-6, refine_levels: 16, ..QuadratureGrid::default() };
        let r = integrate_log_modulus(&s, &grid, LogNormalization::Monomial).unwrap();
        assert!((r.signed.estimate + PI).abs() < 1e-6, "{}", r.signed.estimate);
        assert!((r.absolute.estimate - PI).abs() < 1e-6);
    }

    #[test]
    fn absolute_dominates_signed() {
        let spec = EnsembleSpec::new(1, 25, 4).unwrap();
        let grid = QuadratureGrid::for_log_integrand(25);
        for trial in 0..5 {
            let r = integrate_log_modulus(&sample_section(&spec, trial), &grid, LogNormalization::Orthonormal).unwrap();
            assert!(r.absolute.estimate >= r.signed.estimate.abs());
        }
    }

    #[test]
    fn poisson_kernel_examples() {
        let zero = ChartPoint::affine(vec![Complex64::new(0.0, 0.0)]).unwrap();
        assert!((poisson_kernel(&zero, &z(0.6, 0.8), 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(poisson_kernel(&z(1.2, 0.0), &z(0.6, 0.8), 1.0).is_err());
        let grid = QuadratureGrid { angular_cells: 256, refine_levels: 0, ..QuadratureGrid::default() };
        for k in 0..20 {
            let zeta = z(0.9 * (k as f64 * 0.7).cos() * (k as f64 / 20.0), 0.9 * (k as f64 * 0.7).sin() * (k as f64 / 20.0));
            let total = sphere_average(1, 1.0, &grid, &[], &|p| poisson_kernel(&zeta, p, 1.0).unwrap()).unwrap();
            assert!((total - 1.0).abs() < 1e-8, "{total}");
            let re = sphere_average(1, 1.0, &grid, &[], &|p| poisson_kernel(&zeta, p, 1.0).unwrap() * p.coords()[0].re).unwrap();
            assert!((re - zeta.coords()[0].re).abs() < 1e-8);
        }
    }

    #[test]
    fn poisson_kernel_on_the_three_sphere() {
        let grid = QuadratureGrid { angular_cells: 16, order: 6, ..QuadratureGrid::default() };
        let zeta = ChartPoint::affine(vec![Complex64::new(0.2, 0.1), Complex64::new(-0.1, 0.15)]).unwrap();
        let total = sphere_average(2, 1.0, &grid, &[], &|p| poisson_kernel(&zeta, p, 1.0).unwrap()).unwrap();
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn constant_section_log_minus() {
        let spec = EnsembleSpec::new(1, 2, 0).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let s = PolySection::from_coeffs(spec, 0, vec![one, zero, zero]).unwrap();
        let v = sphere_log_minus(&s, 1.0, &QuadratureGrid::default()).unwrap();
        assert!((v.value - 2f64.ln()).abs() < 1e-12);
        assert!(!v.flagged);
    }

    #[test]
    fn subharmonic_mean_value() {
        let spec = EnsembleSpec::new(1, 20, 6).unwrap();
        let grid = QuadratureGrid { angular_cells: 64, ..QuadratureGrid::default() };
        for trial in 0..10 {
            let s = sample_section(&spec, trial);
            let zeta = z(0.1, -0.15);
            let avg = poisson_log_average(&s, &zeta, 1.0, &grid).unwrap();
            let at = s.evaluate_f(&zeta).unwrap().norm().ln();
            assert!(at <= avg + 1e-9, "{at} > {avg}");
        }
    }

    #[test]
    fn plane_constant_test_function() {
        let spec = EnsembleSpec::new(2, 4, 1).unwrap();
        let s = sample_section(&spec, 0);
        let v = pl_linear_statistic(&s, &TestFunction::one(2), &QuadratureGrid::default()).unwrap();
        assert!((v - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn plane_sandwich_for_a_linear_section() {
        // f = z₁: the zero set is the line {z₁ = 0}, whose part inside the
        // ball ‖z‖ < R has FS area π R²/(1+R²)
        let spec = EnsembleSpec::new(2, 1, 0).unwrap();
        let zero = Complex64::new(0.0, 0.0);
        let mut c = vec![zero; 3];
        // graded-lex: (0,0), (1,0), (0,1)
        c[1] = Complex64::new(1.0, 0.0);
        let s = PolySection::from_coeffs(spec, 0, c).unwrap();
        let ball = DomainSpec::EuclideanDisk {
            center: ChartPoint::affine(vec![zero, zero]).unwrap(),
            radius: 1.0,
        };
        let grid = QuadratureGrid { radial_cells: 6, angular_cells: 16, order: 6, ..QuadratureGrid::default() };
        let (lo, hi) = volume_sandwich(&s, &ball, 0.1, &grid).unwrap();
        let exact = PI * 0.5;
        assert!(lo <= exact + 2e-3 && exact <= hi + 2e-3, "{lo} {exact} {hi}");
    }
}

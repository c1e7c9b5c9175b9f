//! Fubini–Study Szegő kernel, coherent-state lattices and their covariance.
//!
//! On `(CP^m, FS)` the normalized kernel is exact: `P_N(z, w) = cos^N d(z, w)`
//! with `d` the geodesic distance. Coherent-state values
//! `ξ_z = f(z)(1+‖z‖²)^{−N/2}` of the ensemble have covariance
//! `(1 + z·w̄)^N / ((1+‖z‖²)(1+‖w‖²))^{N/2}` when both points are written in
//! the same chart.

use crate::chart::ChartPoint;
use crate::ensemble::PolySection;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix, HermitianEigen, JacobiOptions};
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::Write;

/// `|⟨Z, W⟩| / (‖Z‖‖W‖)` for two points of CP^m.
fn cos_distance(z: &ChartPoint, w: &ChartPoint) -> f64 {
    let u = z.unit_homogeneous();
    let v = w.unit_homogeneous();
    let inner: Complex64 = u.iter().zip(&v).map(|(a, b)| a * b.conj()).sum();
    inner.norm().clamp(0.0, 1.0)
}

/// Geodesic distance of the Fubini–Study metric, in `[0, π/2]`.
pub fn fs_distance(z: &ChartPoint, w: &ChartPoint) -> f64 {
    cos_distance(z, w).acos()
}

/// Normalized Szegő kernel `P_N(z, w) = cos^N d(z, w)`.
pub fn p_kernel(z: &ChartPoint, w: &ChartPoint, degree: usize) -> f64 {
    cos_distance(z, w).powi(degree as i32)
}

/// `E ξ_z ξ̄_w` in the frame of the common chart of `z` and `w`.
pub fn covariance_entry(z: &ChartPoint, w: &ChartPoint, degree: usize) -> Result<Complex64> {
    if z.chart() != w.chart() || z.dim() != w.dim() {
        return Err(Error::InvalidPoint("covariance needs two points of the same chart".into()));
    }
    let u = z.unit_homogeneous();
    let v = w.unit_homogeneous();
    let inner: Complex64 = u.iter().zip(&v).map(|(a, b)| a * b.conj()).sum();
    Ok(inner.powi(degree as i32))
}

/// Limits applied by [`build_lattice_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeLimits {
    /// Largest admissible point count (Δ is stored densely).
    pub max_points: usize,
    /// Largest admissible box half-width `t`.
    pub max_half_width: f64,
}

impl Default for LatticeLimits {
    fn default() -> Self {
        Self { max_points: 20_000, max_half_width: 0.5 }
    }
}

/// Coherent-state lattice `z0 + (a/√N) ν`, `ν ∈ Z^{2m}`, `|ν_j| ≤ ⌊t√N/a⌋`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub center: ChartPoint,
    pub half_width: f64,
    pub spacing: f64,
    pub degree: usize,
    pub points: Vec<ChartPoint>,
    pub indices: Vec<Vec<i64>>,
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Chart distance between neighbouring points, `a/√N`.
    pub fn step(&self) -> f64 {
        self.spacing / (self.degree as f64).sqrt()
    }

    /// Covariance matrix of the coherent-state values at the lattice points.
    pub fn covariance(&self) -> CovMatrix {
        let n = self.points.len();
        let units: Vec<Vec<Complex64>> = self.points.iter().map(|p| p.unit_homogeneous()).collect();
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            return Complex64::new(1.0, 0.0);
                        }
                        let inner: Complex64 = units[i].iter().zip(&units[j]).map(|(a, b)| a * b.conj()).sum();
                        inner.powi(self.degree as i32)
                    })
                    .collect()
            })
            .collect();
        CovMatrix { matrix: CMatrix::from_rows(rows) }
    }

    /// Coherent-state values `ξ_μ` of `s` at the lattice points.
    pub fn coherent_values(&self, s: &PolySection) -> Result<Vec<Complex64>> {
        self.points.iter().map(|p| s.coherent_value(p)).collect()
    }

    /// CSV with columns `index, chart, re_1, im_1, …`.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let m = self.center.dim();
        write!(out, "index,chart")?;
        for k in 1..=m {
            write!(out, ",re_{k},im_{k}")?;
        }
        writeln!(out)?;
        for (i, p) in self.points.iter().enumerate() {
            write!(out, "{i},{}", p.chart())?;
            for c in p.coords() {
                write!(out, ",{},{}", c.re, c.im)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Lattice size `(2⌊t√N/a⌋ + 1)^{2m}`.
pub fn lattice_size(m: usize, t: f64, a: f64, degree: usize) -> f64 {
    let k = (t * (degree as f64).sqrt() / a).floor();
    (2.0 * k + 1.0).powi(2 * m as i32)
}

pub fn build_lattice(center: &ChartPoint, t: f64, a: f64, degree: usize) -> Result<Lattice> {
    build_lattice_with(center, t, a, degree, LatticeLimits::default())
}

pub fn build_lattice_with(
    center: &ChartPoint,
    t: f64,
    a: f64,
    degree: usize,
    limits: LatticeLimits,
) -> Result<Lattice> {
    if !(t > 0.0 && a > 0.0) || degree == 0 {
        return Err(Error::InvalidDomain(format!("lattice needs t, a > 0 and N ≥ 1 (t = {t}, a = {a})")));
    }
    if t > limits.max_half_width {
        return Err(Error::InvalidDomain(format!(
            "half-width {t} exceeds {} where chart and FS distances are comparable",
            limits.max_half_width
        )));
    }
    let sqrt_n = (degree as f64).sqrt();
    let k = (t * sqrt_n / a).floor();
    if k < 1.0 {
        return Err(Error::InvalidDomain(format!("t√N/a = {} < 1 gives a single point", t * sqrt_n / a)));
    }
    let m = center.dim();
    let size = lattice_size(m, t, a, degree);
    if size > limits.max_points as f64 {
        return Err(Error::LatticeTooLarge { n: size as usize, cap: limits.max_points });
    }
    let k = k as i64;
    let side = (2 * k + 1) as usize;
    let step = a / sqrt_n;
    let n = size as usize;
    let mut points = Vec::with_capacity(n);
    let mut indices = Vec::with_capacity(n);
    for flat in 0..n {
        let mut rest = flat;
        let nu: Vec<i64> = (0..2 * m)
            .map(|_| {
                let digit = (rest % side) as i64 - k;
                rest /= side;
                digit
            })
            .collect();
        let coords = center
            .coords()
            .iter()
            .enumerate()
            .map(|(j, c)| c + Complex64::new(nu[2 * j] as f64, nu[2 * j + 1] as f64) * step)
            .collect();
        points.push(ChartPoint::new(center.chart(), coords)?);
        indices.push(nu);
    }
    Ok(Lattice { center: center.clone(), half_width: t, spacing: a, degree, points, indices })
}

/// Hermitian covariance matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    matrix: CMatrix,
}

impl CovMatrix {
    pub fn from_matrix(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// CSV with columns `mu, nu, re, im`.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "mu,nu,re,im")?;
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                let c = self.matrix[(i, j)];
                writeln!(out, "{i},{j},{},{}", c.re, c.im)?;
            }
        }
        Ok(())
    }
}

/// `max_μ Σ_{ν≠μ} |Δ_{μν}|`.
pub fn row_sum_max(delta: &CovMatrix) -> f64 {
    let n = delta.dim();
    (0..n)
        .map(|i| delta.matrix.row(i).iter().enumerate().filter(|&(j, _)| j != i).map(|(_, c)| c.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn min_eigenvalue(delta: &CovMatrix) -> Result<f64> {
    let eig = hermitian_eigen(&delta.matrix, JacobiOptions::default())?;
    Ok(eig.values[0])
}

/// Precomputed `Δ^{−1/2}`.
#[derive(Debug, Clone)]
pub struct Whitener {
    inverse_sqrt: CMatrix,
    min_eigenvalue: f64,
}

impl Whitener {
    pub const DEFAULT_FLOOR: f64 = 1e-8;

    pub fn new(delta: &CovMatrix) -> Result<Self> {
        Self::with_floor(delta, Self::DEFAULT_FLOOR)
    }

    pub fn with_floor(delta: &CovMatrix, floor: f64) -> Result<Self> {
        let eig: HermitianEigen = hermitian_eigen(&delta.matrix, JacobiOptions::default())?;
        let lowest = eig.values[0];
        if lowest <= floor {
            return Err(Error::NotPositiveDefinite(lowest));
        }
        Ok(Self { inverse_sqrt: eig.apply_function(|l| l.powf(-0.5)), min_eigenvalue: lowest })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn apply(&self, xi: &[Complex64]) -> Result<Vec<Complex64>> {
        if xi.len() != self.inverse_sqrt.dim() {
            return Err(Error::CoefficientLength { got: xi.len(), expected: self.inverse_sqrt.dim() });
        }
        Ok(self.inverse_sqrt.mul_vec(xi))
    }
}

/// `ζ = Δ^{−1/2} ξ`.
pub fn whiten(xi: &[Complex64], delta: &CovMatrix) -> Result<Vec<Complex64>> {
    Whitener::new(delta)?.apply(xi)
}

/// Smallest `a` on the grid `a_min, a_min + 0.1, …` (up to `a_max`) for which
/// the lattice has `row_sum_max ≤ 1/2`.
pub fn minimal_spacing(center: &ChartPoint, t: f64, degree: usize, a_min: f64, a_max: f64) -> Result<Option<f64>> {
    let steps = ((a_max - a_min) / 0.1).round() as usize;
    for i in 0..=steps {
        let a = ((a_min + 0.1 * i as f64) * 10.0).round() / 10.0;
        let lattice = match build_lattice(center, t, a, degree) {
            Ok(l) => l,
            Err(Error::InvalidDomain(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if row_sum_max(&lattice.covariance()) <= 0.5 {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

/// Regime split `b·√(log N / N)` with `b = √(2m+3)`.
pub fn regime_split(m: usize, degree: usize) -> f64 {
    let n = degree as f64;
    ((2 * m + 3) as f64).sqrt() * (n.ln() / n).sqrt()
}

/// Gaussian approximation `e^{−N d²/2}` of `P_N` at distance `d`.
pub fn gaussian_approximation(distance: f64, degree: usize) -> f64 {
    (-0.5 * degree as f64 * distance * distance).exp()
}

/// `sup |P_N e^{N d²/2} − 1|` over `d ∈ [0, regime_split]`, sampled at
/// `samples + 1` equispaced distances.
pub fn near_field_deviation(m: usize, degree: usize, samples: usize) -> f64 {
    let d0 = regime_split(m, degree);
    let n = degree as f64;
    (0..=samples)
        .map(|i| {
            let d = d0 * i as f64 / samples as f64;
            // P_N e^{N d²/2} = exp(N (log cos d + d²/2))
            (n * (d.cos().ln() + 0.5 * d * d)).exp_m1().abs()
        })
        .fold(0.0, f64::max)
}

/// `sup P_N · N^{m+1}` over `d ∈ [regime_split, π/2]`, sampled at
/// `samples + 1` equispaced distances.
pub fn far_field_peak(m: usize, degree: usize, samples: usize) -> f64 {
    let d0 = regime_split(m, degree);
    let d1 = std::f64::consts::FRAC_PI_2;
    let scale = (degree as f64).powi(m as i32 + 1);
    (0..=samples)
        .map(|i| {
            let d = d0 + (d1 - d0) * i as f64 / samples as f64;
            d.cos().max(0.0).powi(degree as i32) * scale
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn line(re: f64, im: f64) -> ChartPoint {
        ChartPoint::line(Complex64::new(re, im))
    }

    #[test]
    fn distance_examples() {
        assert_eq!(fs_distance(&line(0.0, 0.0), &line(0.0, 0.0)), 0.0);
        assert!((fs_distance(&line(0.0, 0.0), &ChartPoint::infinity()) - FRAC_PI_2).abs() < 1e-15);
        assert!((fs_distance(&line(0.0, 0.0), &line(1.0, 0.0)) - FRAC_PI_4).abs() < 1e-15);
        // the same point in two charts
        let p = line(0.7, -1.1);
        assert!(fs_distance(&p, &p.to_chart(1).unwrap()) < 1e-7);
    }

    #[test]
    fn kernel_examples() {
        let z = line(0.0, 0.0);
        let w = line(1.0, 0.0);
        assert!((p_kernel(&z, &w, 2) - 0.5).abs() < 1e-15);
        let c = covariance_entry(&z, &w, 2).unwrap();
        assert!((c - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        let p = line(0.3, 0.8);
        assert!((covariance_entry(&p, &p, 17).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((p_kernel(&p, &p, 17) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn covariance_needs_a_common_chart() {
        assert!(covariance_entry(&line(0.0, 0.0), &ChartPoint::infinity(), 3).is_err());
    }

    #[test]
    fn lattice_counts() {
        let o = line(0.0, 0.0);
        assert_eq!(build_lattice(&o, 0.5, 2.5, 100).unwrap().len(), 25);
        assert_eq!(build_lattice(&o, 0.5, 2.5, 400).unwrap().len(), 81);
        let l = build_lattice(&o, 0.5, 2.5, 100).unwrap();
        assert!((l.step() - 0.25).abs() < 1e-15);
        let origin = l.indices.iter().position(|v| v.iter().all(|&x| x == 0)).unwrap();
        let right = l.indices.iter().position(|v| v == &vec![1, 0]).unwrap();
        let d = l.points[right].coords()[0] - l.points[origin].coords()[0];
        assert!((d - Complex64::new(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn lattice_rejects_bad_parameters() {
        let o = line(0.0, 0.0);
        assert!(build_lattice(&o, 0.5, 20.0, 100).is_err());
        assert!(build_lattice(&o, 0.9, 2.0, 100).is_err());
        let limits = LatticeLimits { max_points: 10, ..LatticeLimits::default() };
        assert!(matches!(build_lattice_with(&o, 0.5, 2.5, 100, limits), Err(Error::LatticeTooLarge { .. })));
    }

    #[test]
    fn covariance_matrix_is_hermitian_with_unit_diagonal() {
        let l = build_lattice(&line(0.2, -0.1), 0.5, 2.0, 100).unwrap();
        let d = l.covariance();
        assert!(d.matrix().hermitian_defect() < 1e-14);
        for i in 0..d.dim() {
            assert_eq!(d.matrix()[(i, i)], Complex64::new(1.0, 0.0));
            for j in 0..d.dim() {
                let p = p_kernel(&l.points[i], &l.points[j], 100);
                assert!((d.matrix()[(i, j)].norm() - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn almost_independence_at_default_spacing() {
        let l = build_lattice(&line(0.0, 0.0), 0.5, 3.0, 100).unwrap();
        let d = l.covariance();
        let r = row_sum_max(&d);
        assert!(r < 0.5, "{r}");
        assert!(min_eigenvalue(&d).unwrap() >= 1.0 - r - 1e-12);
    }

    #[test]
    fn row_sum_decreases_with_spacing() {
        let o = line(0.0, 0.0);
        let sums: Vec<f64> = [1.5, 2.0, 2.5, 3.0]
            .iter()
            .map(|&a| row_sum_max(&build_lattice(&o, 0.5, a, 100).unwrap().covariance()))
            .collect();
        assert!(sums.windows(2).all(|w| w[1] < w[0]), "{sums:?}");
    }

    #[test]
    fn single_point_row_sum_is_zero() {
        let d = CovMatrix::from_matrix(CMatrix::identity(1));
        assert_eq!(row_sum_max(&d), 0.0);
        assert_eq!(min_eigenvalue(&d).unwrap(), 1.0);
    }

    #[test]
    fn whitening_identity_is_noop() {
        let xi = vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.1)];
        let z = whiten(&xi, &CovMatrix::from_matrix(CMatrix::identity(2))).unwrap();
        for (a, b) in xi.iter().zip(&z) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn whitening_rejects_singular_covariance() {
        let one = Complex64::new(1.0, 0.0);
        let d = CovMatrix::from_matrix(CMatrix::from_rows(vec![vec![one, one], vec![one, one]]));
        assert!(matches!(Whitener::new(&d), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn minimal_spacing_meets_the_half_bound() {
        let o = line(0.0, 0.0);
        let a = minimal_spacing(&o, 0.5, 100, 1.0, 3.0).unwrap().unwrap();
        assert!(a <= 3.0);
        assert!(row_sum_max(&build_lattice(&o, 0.5, a, 100).unwrap().covariance()) <= 0.5);
        let below = ((a - 0.1) * 10.0).round() / 10.0;
        if below >= 1.0 {
            assert!(row_sum_max(&build_lattice(&o, 0.5, below, 100).unwrap().covariance()) > 0.5);
        }
    }

    #[test]
    fn csv_exports_have_headers() {
        let l = build_lattice(&line(0.0, 0.0), 0.5, 3.0, 100).unwrap();
        let mut buf = Vec::new();
        l.covariance().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("mu,nu,re,im\n"));
        assert_eq!(text.lines().count(), 1 + 81);
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 9);
    }
}

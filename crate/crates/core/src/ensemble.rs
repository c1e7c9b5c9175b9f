//! The SU(m+1) Gaussian ensemble of holomorphic sections of O(N) → CP^m.
//!
//! A section is stored through its chart-0 representative
//! `f(z) = Σ_{|J|≤N} c_J (N choose J)^{1/2} z^J` with iid standard complex
//! Gaussian `c_J`. Multi-indices are enumerated in graded lexicographic
//! order: by total degree `|J|` ascending, and within one degree
//! lexicographically descending (`(2,0), (1,1), (0,2)` for m = 2). For
//! m = 1 this is simply `c_0, c_1, …, c_N`.
//!
//! Hermitian norms are evaluated on the unit homogeneous representative
//! `u = Z/‖Z‖` of a point, where `|s(z)|_{h^N} = |F(u)|` for the homogeneous
//! polynomial `F(Z) = Σ a_J Z_0^{N−|J|} Z^J`. All `|u_k| ≤ 1`, so nothing
//! overflows at large N; for m = 1 the Horner scheme runs in the variable of
//! modulus at most one, which is the reversed-coefficient polynomial beyond
//! the unit circle.

use crate::chart::ChartPoint;
use crate::error::{Error, Result};
use crate::quadrature::{line_unit_vector, plane_nodes, QuadratureGrid, Scheme};
use crate::rng::{Purpose, TrialRng};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub m: usize,
    #[serde(rename = "N")]
    pub degree: usize,
    #[serde(rename = "seed")]
    pub master_seed: u64,
}

impl EnsembleSpec {
    pub fn new(m: usize, degree: usize, master_seed: u64) -> Result<Self> {
        let spec = Self { m, degree, master_seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidSpec("m must be at least 1".into()));
        }
        if self.degree == 0 {
            return Err(Error::InvalidSpec("N must be at least 1".into()));
        }
        Ok(())
    }

    /// `d_N = dim H^0(CP^m, O(N)) = binomial(N+m, m)`.
    pub fn dimension(&self) -> usize {
        binomial(self.degree + self.m, self.m).round() as usize
    }

    /// Basis normalization `γ_{N,m}`.
    pub fn gamma(&self) -> f64 {
        szego_diagonal(self.m, self.degree).sqrt()
    }
}

/// Binomial coefficient as a float (exact for all values below 2^53).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 1..=k {
        acc = acc * (n - k + i) as f64 / i as f64;
    }
    acc.round_if_exact()
}

trait RoundIfExact {
    fn round_if_exact(self) -> Self;
}

impl RoundIfExact for f64 {
    fn round_if_exact(self) -> Self {
        if self < 9.0e15 {
            self.round()
        } else {
            self
        }
    }
}

/// Multinomial coefficient `N! / ((N−|J|)! j_1! ⋯ j_m!)`.
pub fn multinomial(degree: usize, index: &MultiIndex) -> f64 {
    let mut remaining = degree;
    let mut acc = 1.0;
    for &j in index.entries() {
        let j = j as usize;
        acc *= binomial(remaining, j);
        remaining -= j;
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        Self(entries)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&j| j as usize).sum()
    }
}

/// All multi-indices of `m` entries with `|J| ≤ degree`, in graded
/// lexicographic order.
pub fn multi_indices(m: usize, degree: usize) -> Vec<MultiIndex> {
    fn compositions(total: usize, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if parts == 1 {
            prefix.push(total as u32);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in (0..=total).rev() {
            prefix.push(first as u32);
            compositions(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(m);
    for d in 0..=degree {
        compositions(d, m, &mut prefix, &mut out);
    }
    out
}

/// Exact Szegő kernel on the diagonal, `Π_N(z,z) = binomial(N+m,m)·m!/π^m`.
pub fn szego_diagonal(m: usize, degree: usize) -> f64 {
    let factorial: f64 = (1..=m).map(|k| k as f64).product();
    binomial(degree + m, m) * factorial / PI.powi(m as i32)
}

/// Leading asymptotic term `N^m/π^m`.
pub fn szego_leading(m: usize, degree: usize) -> f64 {
    (degree as f64 / PI).powi(m as i32)
}

/// `Π_N(z,z)` summed over the orthonormal basis `S_J = γ (N choose J)^{1/2} z^J e^N`,
/// i.e. `γ² Σ_J (N choose J) |z^J|² (1+‖z‖²)^{−N}`.
pub fn szego_basis_sum(m: usize, degree: usize, z: &ChartPoint) -> f64 {
    let u = z.unit_homogeneous();
    let logs: Vec<f64> = u.iter().map(|c| c.norm_sqr().ln()).collect();
    let mut sum = 0.0;
    for idx in multi_indices(m, degree) {
        // homogeneous index: slot 0 carries N − |J|
        let mut log_term = multinomial(degree, &idx).ln();
        let mut exps = Vec::with_capacity(m + 1);
        exps.push(degree - idx.total());
        exps.extend(idx.entries().iter().map(|&j| j as usize));
        let mut zero = false;
        for (k, &e) in exps.iter().enumerate() {
            if e > 0 {
                if logs[k] == f64::NEG_INFINITY {
                    zero = true;
                    break;
                }
                log_term += e as f64 * logs[k];
            }
        }
        if !zero {
            sum += log_term.exp();
        }
    }
    szego_diagonal(m, degree) * sum
}

/// A sampled (or explicitly given) section.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySection {
    spec: EnsembleSpec,
    trial: u64,
    coeffs: Vec<Complex64>,
    weighted: Vec<Complex64>,
    indices: Vec<MultiIndex>,
}

/// Draws the coefficients of trial `trial_index`.
pub fn sample_section(spec: &EnsembleSpec, trial_index: u64) -> PolySection {
    let mut rng = TrialRng::new(spec.master_seed, Purpose::Coefficients, trial_index);
    let coeffs = (0..spec.dimension()).map(|_| rng.complex_gaussian()).collect();
    PolySection::build(*spec, trial_index, coeffs)
}

impl PolySection {
    pub fn from_coeffs(spec: EnsembleSpec, trial: u64, coeffs: Vec<Complex64>) -> Result<Self> {
        spec.validate()?;
        let expected = spec.dimension();
        if coeffs.len() != expected {
            return Err(Error::CoefficientLength { got: coeffs.len(), expected });
        }
        if let Some(i) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFiniteCoefficient(i));
        }
        Ok(Self::build(spec, trial, coeffs))
    }

    /// Convenience constructor for m = 1 from real-valued `c_0, …, c_N`.
    pub fn line_from_real(coeffs: &[f64]) -> Result<Self> {
        let degree = coeffs.len().checked_sub(1).filter(|&d| d > 0).ok_or_else(|| {
            Error::InvalidSpec("need at least two coefficients".into())
        })?;
        let spec = EnsembleSpec::new(1, degree, 0)?;
        Self::from_coeffs(spec, 0, coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    fn build(spec: EnsembleSpec, trial: u64, coeffs: Vec<Complex64>) -> Self {
        let indices = multi_indices(spec.m, spec.degree);
        let weighted = coeffs
            .iter()
            .zip(&indices)
            .map(|(c, j)| c * multinomial(spec.degree, j).sqrt())
            .collect();
        Self { spec, trial, coeffs, weighted, indices }
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    pub fn degree(&self) -> usize {
        self.spec.degree
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Monomial coefficients `a_J = c_J (N choose J)^{1/2}` of the chart-0 polynomial.
    pub fn weighted(&self) -> &[Complex64] {
        &self.weighted
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Euclidean norm `‖c‖` of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Same section with all coefficients multiplied by `k`.
    pub fn scaled(&self, k: Complex64) -> Self {
        Self::build(self.spec, self.trial, self.coeffs.iter().map(|c| c * k).collect())
    }

    /// `f_N(z)` at a chart-0 point.
    pub fn evaluate_f(&self, z: &ChartPoint) -> Result<Complex64> {
        self.check_dim(z)?;
        if z.chart() != 0 {
            return Err(Error::InvalidPoint("evaluate_f needs a chart-0 point".into()));
        }
        if self.spec.m == 1 {
            let x = z.coords()[0];
            if x.norm_sqr() <= 1.0 {
                return Ok(horner(&self.weighted, x));
            }
            let n = self.spec.degree as i32;
            return Ok(x.powi(n) * horner_reversed(&self.weighted, x.inv()));
        }
        let pows = power_table(z.coords(), self.spec.degree);
        Ok(self
            .weighted
            .iter()
            .zip(&self.indices)
            .map(|(a, j)| {
                j.entries().iter().enumerate().fold(*a, |acc, (k, &e)| acc * pows[k][e as usize])
            })
            .sum())
    }

    /// `|f_N(z)|·(1+‖z‖²)^{−N/2}`, the pointwise norm in the monomial frame;
    /// independent of the chart `z` is given in. Multiply by `γ_{N,m}` for
    /// the section in the orthonormal basis.
    pub fn hermitian_norm(&self, z: &ChartPoint) -> Result<f64> {
        Ok(self.log_hermitian_norm(z)?.exp())
    }

    pub fn log_hermitian_norm(&self, z: &ChartPoint) -> Result<f64> {
        self.check_dim(z)?;
        Ok(self.log_abs_unit(&z.unit_homogeneous()))
    }

    /// `log|F(u)|` for a unit homogeneous vector `u`.
    pub fn log_abs_unit(&self, u: &[Complex64]) -> f64 {
        if self.spec.m == 1 {
            return self.log_abs_line(&[u[0], u[1]]);
        }
        self.eval_unit(u).norm().ln()
    }

    /// `F(u)` for a unit homogeneous vector `u`.
    pub fn eval_unit(&self, u: &[Complex64]) -> Complex64 {
        let n = self.spec.degree;
        if self.spec.m == 1 {
            let (p, t, reversed) = line_pivot(&[u[0], u[1]]);
            let inner = if reversed { horner_reversed(&self.weighted, t) } else { horner(&self.weighted, t) };
            return p.powi(n as i32) * inner;
        }
        let pows = power_table(u, n);
        self.weighted
            .iter()
            .zip(&self.indices)
            .map(|(a, j)| {
                let mut acc = a * pows[0][n - j.total()];
                for (k, &e) in j.entries().iter().enumerate() {
                    acc *= pows[k + 1][e as usize];
                }
                acc
            })
            .sum()
    }

    /// `log|s|` at the CP^1 point with unit homogeneous vector `u`.
    #[inline]
    pub fn log_abs_line(&self, u: &[Complex64; 2]) -> f64 {
        let (p, t, reversed) = line_pivot(u);
        let inner = if reversed { horner_reversed(&self.weighted, t) } else { horner(&self.weighted, t) };
        self.spec.degree as f64 * p.norm().ln() + inner.norm().ln()
    }

    /// Coherent-state value `ξ_z = f(z)(1+‖z‖²)^{−N/2}`, a standard complex
    /// Gaussian under the ensemble. `f` is the representative in the frame of
    /// the chart `z` is given in, so values from different charts differ by
    /// a unimodular factor.
    pub fn coherent_value(&self, z: &ChartPoint) -> Result<Complex64> {
        self.check_dim(z)?;
        Ok(self.eval_unit(&z.unit_homogeneous()))
    }

    fn check_dim(&self, z: &ChartPoint) -> Result<()> {
        if z.dim() != self.spec.m {
            return Err(Error::InvalidPoint(format!(
                "point has dimension {}, section has m = {}",
                z.dim(),
                self.spec.m
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SectionRecord::from(self)).expect("section serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: SectionRecord = serde_json::from_str(s)?;
        rec.try_into()
    }
}

/// Serialized form `{m, N, seed, trial, coeffs: [[re, im], …]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionRecord {
    pub m: usize,
    #[serde(rename = "N")]
    pub degree: usize,
    pub seed: u64,
    pub trial: u64,
    pub coeffs: Vec<[f64; 2]>,
}

impl From<&PolySection> for SectionRecord {
    fn from(s: &PolySection) -> Self {
        Self {
            m: s.spec.m,
            degree: s.spec.degree,
            seed: s.spec.master_seed,
            trial: s.trial,
            coeffs: s.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

impl TryFrom<SectionRecord> for PolySection {
    type Error = Error;

    fn try_from(rec: SectionRecord) -> Result<Self> {
        let spec = EnsembleSpec::new(rec.m, rec.degree, rec.seed)?;
        let coeffs = rec.coeffs.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        PolySection::from_coeffs(spec, rec.trial, coeffs)
    }
}

impl Serialize for PolySection {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SectionRecord::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PolySection {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rec = SectionRecord::deserialize(deserializer)?;
        rec.try_into().map_err(serde::de::Error::custom)
    }
}

/// Chooses the homogeneous coordinate of larger modulus as pivot. Returns
/// `(pivot, ratio, reversed)` with `|ratio| ≤ 1`.
#[inline]
fn line_pivot(u: &[Complex64; 2]) -> (Complex64, Complex64, bool) {
    if u[0].norm_sqr() >= u[1].norm_sqr() {
        (u[0], u[1] / u[0], false)
    } else {
        (u[1], u[0] / u[1], true)
    }
}

/// `Σ a_j t^j`.
#[inline]
pub(crate) fn horner(a: &[Complex64], t: Complex64) -> Complex64 {
    a.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * t + c)
}

/// `Σ a_j t^{N−j}`.
#[inline]
pub(crate) fn horner_reversed(a: &[Complex64], t: Complex64) -> Complex64 {
    a.iter().fold(Complex64::new(0.0, 0.0), |acc, c| acc * t + c)
}

fn power_table(z: &[Complex64], degree: usize) -> Vec<Vec<Complex64>> {
    z.iter()
        .map(|&x| {
            let mut row = Vec::with_capacity(degree + 1);
            let mut p = Complex64::new(1.0, 0.0);
            for _ in 0..=degree {
                row.push(p);
                p *= x;
            }
            row
        })
        .collect()
}

/// `max_{J,K} |⟨S_J, S_K⟩ − δ_JK|` for the basis `S_J = γ (N choose J)^{1/2} z^J e^N`,
/// with the inner product computed by quadrature against `dVol`.
///
/// The quadrature is repeated on a grid refined twice in every direction;
/// a disagreement above `grid.tolerance` is reported as non-convergence.
pub fn orthonormality_defect(m: usize, degree: usize, grid: &QuadratureGrid) -> Result<f64> {
    let spec = EnsembleSpec::new(m, degree, 0)?;
    let coarse = gram_matrix(&spec, grid)?;
    let fine_grid = QuadratureGrid {
        radial_cells: grid.radial_cells * 2,
        angular_cells: grid.angular_cells * 2,
        ..grid.clone()
    };
    let fine = gram_matrix(&spec, &fine_grid)?;
    let d = spec.dimension();
    let mut defect: f64 = 0.0;
    let mut change: f64 = 0.0;
    for j in 0..d {
        for k in 0..d {
            let delta = if j == k { 1.0 } else { 0.0 };
            defect = defect.max((fine[j * d + k] - delta).norm());
            change = change.max((fine[j * d + k] - coarse[j * d + k]).norm());
        }
    }
    if change > grid.tolerance {
        return Err(Error::QuadratureNotConverged { estimate: defect, error_estimate: change });
    }
    Ok(defect)
}

/// Row-major Gram matrix of the orthonormal monomial basis.
fn gram_matrix(spec: &EnsembleSpec, grid: &QuadratureGrid) -> Result<Vec<Complex64>> {
    let d = spec.dimension();
    let n = spec.degree;
    let gamma = spec.gamma();
    let indices = multi_indices(spec.m, n);
    let scale: Vec<f64> = indices.iter().map(|j| gamma * multinomial(n, j).sqrt()).collect();
    let mut gram = vec![Complex64::new(0.0, 0.0); d * d];
    let mut basis = vec![Complex64::new(0.0, 0.0); d];
    let mut accumulate = |u: &[Complex64], w: f64| {
        let pows = power_table(u, n);
        for (b, (j, s)) in basis.iter_mut().zip(indices.iter().zip(&scale)) {
            let mut v = pows[0][n - j.total()] * *s;
            for (k, &e) in j.entries().iter().enumerate() {
                v *= pows[k + 1][e as usize];
            }
            *b = v;
        }
        for a in 0..d {
            let wa = basis[a] * w;
            for b in 0..d {
                gram[a * d + b] += wa * basis[b].conj();
            }
        }
    };
    match spec.m {
        1 => {
            let rule = grid.rule();
            for i in 0..grid.radial_cells {
                let t0 = i as f64 / grid.radial_cells as f64;
                let t1 = (i + 1) as f64 / grid.radial_cells as f64;
                for (t, wt) in rule.mapped(t0, t1) {
                    for k in 0..grid.angular_cells {
                        let a0 = std::f64::consts::TAU * k as f64 / grid.angular_cells as f64;
                        let a1 = std::f64::consts::TAU * (k + 1) as f64 / grid.angular_cells as f64;
                        for (th, wth) in rule.mapped(a0, a1) {
                            accumulate(&line_unit_vector(t, th), 0.5 * wt * wth);
                        }
                    }
                }
            }
        }
        2 => {
            if grid.scheme == Scheme::MidpointRichardson {
                return Err(Error::UnsupportedDimension { m: 2, operation: "midpoint Gram matrix" });
            }
            for node in plane_nodes(grid.radial_cells, grid.angular_cells, grid.order) {
                accumulate(&node.point, node.weight);
            }
        }
        m => return Err(Error::UnsupportedDimension { m, operation: "orthonormality_defect" }),
    }
    Ok(gram)
}

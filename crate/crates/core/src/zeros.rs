//! Zeros of sections over CP^1 and the maximum Hermitian modulus.
//!
//! Roots come from Aberth–Ehrlich iteration on the chart-0 polynomial
//! `p(z) = Σ a_j z^j`. Newton quotients for `|z| > 1` are evaluated through the
//! reversed polynomial `q(w) = Σ a_j w^{N−j}`, `w = 1/z`, which never
//! overflows. Roots are stored in the chart where their coordinate has
//! modulus at most 1.

use crate::chart::ChartPoint;
use crate::domain::DomainSpec;
use crate::ensemble::{horner, horner_reversed, PolySection};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{PI, TAU};
use std::io::Write;

/// Largest accepted backward error of a reported root.
pub const BACKWARD_ERROR_LIMIT: f64 = 1e-8;

const MAX_ITERATIONS: usize = 200;
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    /// Finite roots (and roots at 0) with multiplicity.
    pub roots: Vec<ChartPoint>,
    /// Backward error of each root, relative to the coefficient magnitudes.
    pub residuals: Vec<f64>,
    /// Number of roots at the point at infinity (vanishing top coefficients).
    pub degree_at_infinity: usize,
}

impl RootSet {
    pub fn total(&self) -> usize {
        self.roots.len() + self.degree_at_infinity
    }

    /// Chart-0 coordinates of the finite roots.
    pub fn affine(&self) -> Vec<Complex64> {
        self.roots.iter().map(|r| r.as_line_affine().unwrap_or(Complex64::new(f64::INFINITY, 0.0))).collect()
    }

    /// CSV with columns `re, im, residual` and a trailing `# infinity,k` line.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "re,im,residual")?;
        for (z, r) in self.affine().iter().zip(&self.residuals) {
            writeln!(out, "{},{},{}", z.re, z.im, r)?;
        }
        writeln!(out, "# infinity,{}", self.degree_at_infinity)?;
        Ok(())
    }
}

/// `p/p'` at `z` together with the backward error `|p(z)| / Σ|a_j||z|^j`,
/// using the reversed form for `|z| > 1`.
#[inline]
fn newton_quotient(a: &[Complex64], z: Complex64) -> (Complex64, f64) {
    let n = a.len() - 1;
    if z.norm_sqr() <= 1.0 {
        let r = z.norm();
        let (mut p, mut dp, mut den) = (a[n], Complex64::new(0.0, 0.0), a[n].norm());
        for c in a[..n].iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
            den = den * r + c.norm();
        }
        (p / dp, p.norm() / den)
    } else {
        // p = z^n q(w) with q(w) = Σ a_j w^{n−j}, so p/p' = z q / (n q − w q')
        let w = z.inv();
        let r = w.norm();
        let (mut q, mut dq, mut den) = (a[0], Complex64::new(0.0, 0.0), a[0].norm());
        for c in &a[1..] {
            dq = dq * w + q;
            q = q * w + c;
            den = den * r + c.norm();
        }
        (z * q / (q * n as f64 - w * dq), q.norm() / den)
    }
}

/// Backward error `|p(z)| / Σ |a_j||z|^j` (reversed form for `|z| > 1`).
pub fn backward_error(a: &[Complex64], z: Complex64) -> f64 {
    let abs: Vec<f64> = a.iter().map(|c| c.norm()).collect();
    if z.norm_sqr() <= 1.0 {
        let r = z.norm();
        let den = abs.iter().rev().fold(0.0, |acc, c| acc * r + c);
        horner(a, z).norm() / den
    } else {
        let w = z.inv();
        let r = w.norm();
        let den = abs.iter().fold(0.0, |acc, c| acc * r + c);
        horner_reversed(a, w).norm() / den
    }
}

fn backward_error_in_chart(a: &[Complex64], p: &ChartPoint) -> f64 {
    match p.chart() {
        0 => backward_error(a, p.coords()[0]),
        _ => {
            let w = p.coords()[0];
            let rev: Vec<Complex64> = a.iter().rev().copied().collect();
            backward_error(&rev, w)
        }
    }
}

fn line_point(z: Complex64) -> ChartPoint {
    if z.norm_sqr() <= 1.0 {
        ChartPoint::line(z)
    } else {
        ChartPoint::new(1, vec![z.inv()]).expect("finite coordinate")
    }
}

/// All zeros of an m = 1 section on CP^1.
pub fn find_roots(s: &PolySection) -> Result<RootSet> {
    if s.m() != 1 {
        return Err(Error::UnsupportedDimension { m: s.m(), operation: "find_roots" });
    }
    roots_of(s.weighted())
}

/// All zeros on CP^1 of the polynomial `Σ a_j z^j` regarded as a section of
/// `O(a.len() − 1)`.
pub fn roots_of(a: &[Complex64]) -> Result<RootSet> {
    let lo = a.iter().position(|c| c.norm_sqr() > 0.0).ok_or(Error::ZeroPolynomial)?;
    let hi = a.iter().rposition(|c| c.norm_sqr() > 0.0).expect("nonzero coefficient exists");
    let degree_at_infinity = a.len() - 1 - hi;
    let mut roots = vec![ChartPoint::line(Complex64::new(0.0, 0.0)); lo];
    let mut residuals = vec![0.0; lo];
    let core = &a[lo..=hi];
    match core.len() - 1 {
        0 => {}
        1 => {
            let z = line_point(-core[0] / core[1]);
            residuals.push(backward_error_in_chart(core, &z));
            roots.push(z);
        }
        _ => {
            let found = aberth_with_fallback(core)?;
            for z in found {
                let p = line_point(z);
                residuals.push(backward_error_in_chart(core, &p));
                roots.push(p);
            }
        }
    }
    Ok(RootSet { roots, residuals, degree_at_infinity })
}

fn initial_circle(a: &[Complex64], scale: f64, rotation: f64) -> Vec<Complex64> {
    let n = a.len() - 1;
    let radius = ((a[0].norm().ln() - a[n].norm().ln()) / n as f64).exp() * scale;
    (0..n)
        .map(|k| Complex64::from_polar(radius, TAU * k as f64 / n as f64 + GOLDEN_ANGLE * (k as f64 + rotation) / n as f64 + 0.4))
        .collect()
}

fn aberth_with_fallback(a: &[Complex64]) -> Result<Vec<Complex64>> {
    for (scale, rotation) in [(1.0, 0.0), (0.7, 0.5), (1.4, 0.25)] {
        if let Some(z) = aberth(a, initial_circle(a, scale, rotation)) {
            if let Some(z) = reconcile(a, z) {
                return Ok(z);
            }
        }
    }
    let z = companion_roots(a).ok_or(Error::RootsNotConverged { iterations: MAX_ITERATIONS })?;
    reconcile(a, z).ok_or(Error::RootsNotConverged { iterations: MAX_ITERATIONS })
}

/// Aberth–Ehrlich iteration; `None` if the iteration cap is reached.
fn aberth(a: &[Complex64], mut z: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n = z.len();
    let mut done = vec![false; n];
    for _ in 0..MAX_ITERATIONS {
        let mut all = true;
        for k in 0..n {
            if done[k] {
                continue;
            }
            let (ratio, err) = newton_quotient(a, z[k]);
            if err <= 8.0 * f64::EPSILON {
                done[k] = true;
                continue;
            }
            if ratio.re.is_nan() || ratio.im.is_nan() {
                // p = p' = 0: landed exactly on a multiple root
                done[k] = true;
                continue;
            }
            if !(ratio.re.is_finite() && ratio.im.is_finite()) {
                // p' = 0 at a critical point: nudge off it
                let nudge = Complex64::new(1e-7, 1e-7) * (1.0 + z[k].norm());
                z[k] += nudge;
                all = false;
                continue;
            }
            let mut sum = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != k {
                    sum += (z[k] - z[j]).inv();
                }
            }
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
            if step.re.is_finite() && step.im.is_finite() {
                z[k] -= step;
            }
            if step.norm() <= 4.0 * f64::EPSILON * z[k].norm().max(f64::MIN_POSITIVE) {
                done[k] = true;
            } else {
                all = false;
            }
        }
        if all {
            return Some(z);
        }
    }
    None
}

/// Polishes each root with one Newton step in the chart where it is small
/// and, near the seam `0.5 < |z| < 2`, also in the other chart, keeping the
/// candidate of smaller backward error. `None` if any root fails the limit.
fn reconcile(a: &[Complex64], z: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let mut out = Vec::with_capacity(z.len());
    for z0 in z {
        if !(z0.re.is_finite() && z0.im.is_finite()) {
            return None;
        }
        let mut best = z0;
        let mut best_err = backward_error(a, z0);
        let r = z0.norm();
        let mut candidates = Vec::with_capacity(2);
        if r < 2.0 {
            candidates.push(z0 - newton_step_chart0(a, z0));
        }
        if r > 0.5 {
            candidates.push(z0 - newton_step_reversed(a, z0));
        }
        for c in candidates {
            if c.re.is_finite() && c.im.is_finite() {
                let e = backward_error(a, c);
                if e < best_err {
                    best = c;
                    best_err = e;
                }
            }
        }
        if best_err > BACKWARD_ERROR_LIMIT {
            return None;
        }
        out.push(best);
    }
    Some(out)
}

/// Plain chart-0 Newton step `p/p'` (no reversal).
fn newton_step_chart0(a: &[Complex64], z: Complex64) -> Complex64 {
    let n = a.len() - 1;
    let (mut p, mut dp) = (a[n], Complex64::new(0.0, 0.0));
    for c in a[..n].iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    if dp.norm_sqr() == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        p / dp
    }
}

/// Newton step computed from the reversed polynomial at `w = 1/z`.
fn newton_step_reversed(a: &[Complex64], z: Complex64) -> Complex64 {
    let w = z.inv();
    let (mut q, mut dq) = (a[0], Complex64::new(0.0, 0.0));
    for c in &a[1..] {
        dq = dq * w + q;
        q = q * w + c;
    }
    let den = q * (a.len() - 1) as f64 - w * dq;
    if den.norm_sqr() == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        z * q / den
    }
}

/// Eigenvalues of the companion matrix (complex Schur form).
fn companion_roots(a: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = a.len() - 1;
    let lead = a[n];
    let mut c = nalgebra::DMatrix::<Complex64>::zeros(n, n);
    for i in 1..n {
        c[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..n {
        c[(i, n - 1)] = -a[i] / lead;
    }
    let values = nalgebra::linalg::Schur::try_new(c, f64::EPSILON, 10_000)?.eigenvalues()?;
    let mut roots: Vec<Complex64> = values.iter().copied().collect();
    for r in &mut roots {
        for _ in 0..3 {
            let (step, _) = newton_quotient(a, *r);
            if step.re.is_finite() && step.im.is_finite() {
                *r -= step;
            }
        }
    }
    Some(roots)
}

/// `|Σ z_k + a_{N−1}/a_N|` relative to `Σ |z_k|`. Requires no roots at
/// infinity.
pub fn vieta_defect(a: &[Complex64], rs: &RootSet) -> Option<f64> {
    if rs.degree_at_infinity != 0 {
        return None;
    }
    let n = a.len() - 1;
    let z = rs.affine();
    let sum: Complex64 = z.iter().sum();
    let scale: f64 = z.iter().map(|x| x.norm()).sum();
    Some((sum + a[n - 1] / a[n]).norm() / scale.max(f64::MIN_POSITIVE))
}

/// Number of roots in the open domain, counting roots at infinity when the
/// domain contains the point at infinity.
pub fn count_in_domain(rs: &RootSet, domain: &DomainSpec) -> usize {
    let finite = rs.roots.iter().filter(|p| domain.contains(p)).count();
    finite + if domain.contains_infinity() { rs.degree_at_infinity } else { 0 }
}

/// Unintegrated Nevanlinna counting function `n_f(r, 0)`: zeros in `|z| < r`.
pub fn nevanlinna_count(rs: &RootSet, r: f64) -> usize {
    count_in_domain(rs, &DomainSpec::disk(Complex64::new(0.0, 0.0), r))
}

/// Location and value of the estimated maximum of `|s|_h` over a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxModulus {
    pub value: f64,
    pub location: ChartPoint,
}

/// Estimate of `sup_D |f|(1+|z|²)^{−N/2}` (the monomial-frame norm; multiply
/// by `γ_{N,1}` for the orthonormal-basis normalization).
pub fn max_modulus(s: &PolySection, domain: &DomainSpec, levels: usize) -> Result<f64> {
    Ok(max_modulus_at(s, domain, levels)?.value)
}

/// Multi-level grid search: a coarse grid of FS spacing `π/(4√N)` over the
/// sphere, followed by `levels` rounds of 4× local refinement around the best
/// coarse candidates.
pub fn max_modulus_at(s: &PolySection, domain: &DomainSpec, levels: usize) -> Result<MaxModulus> {
    if s.m() != 1 {
        return Err(Error::UnsupportedDimension { m: s.m(), operation: "max_modulus" });
    }
    domain.validate()?;
    let h = PI / (4.0 * (s.degree() as f64).sqrt());
    let value_at = |u: &[Complex64; 2]| s.log_abs_line(u);
    let mut coarse: Vec<(f64, ChartPoint)> = Vec::new();
    let mut consider = |p: ChartPoint| {
        if domain.contains(&p) {
            let u = p.unit_homogeneous();
            coarse.push((value_at(&[u[0], u[1]]), p));
        }
    };
    // rings of geodesic radius ρ about 0; circumference π sin 2ρ
    let rings = (PI / 2.0 / h).ceil() as usize;
    for i in 0..=rings {
        let rho = (PI / 2.0) * i as f64 / rings as f64;
        let count = ((PI * (2.0 * rho).sin() / h).ceil() as usize).max(1);
        for j in 0..count {
            let theta = TAU * (j as f64 + 0.5 * (i % 2) as f64) / count as f64;
            let u = [Complex64::new(rho.cos(), 0.0), Complex64::from_polar(rho.sin(), theta)];
            if let Ok(p) = ChartPoint::from_homogeneous(&u) {
                consider(p);
            }
        }
    }
    for p in anchor_points(domain) {
        consider(p);
    }
    if coarse.is_empty() {
        return Err(Error::InvalidDomain("no grid point falls in the domain".into()));
    }
    coarse.sort_by(|a, b| b.0.total_cmp(&a.0));
    coarse.truncate(8);
    let mut best: Option<(f64, ChartPoint)> = None;
    for (v0, p0) in coarse {
        let (mut v, mut p) = (v0, p0.to_best_chart());
        let mut step = h;
        for _ in 0..levels {
            step /= 4.0;
            let z0 = p.coords()[0];
            let chart_step = step * (1.0 + z0.norm_sqr());
            let mut next = (v, p.clone());
            for i in -4i32..=4 {
                for j in -4i32..=4 {
                    let z = z0 + Complex64::new(i as f64, j as f64) * chart_step;
                    let q = ChartPoint::new(p.chart(), vec![z])?;
                    if domain.contains(&q) {
                        let u = q.unit_homogeneous();
                        let val = value_at(&[u[0], u[1]]);
                        if val > next.0 {
                            next = (val, q);
                        }
                    }
                }
            }
            v = next.0;
            p = next.1.to_best_chart();
        }
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, p));
        }
    }
    let (v, location) = best.expect("at least one candidate");
    Ok(MaxModulus { value: v.exp(), location })
}

/// Extra candidate points inside small domains: centers of the positive
/// chart balls of the decomposition.
fn anchor_points(domain: &DomainSpec) -> Vec<ChartPoint> {
    match domain.decomposition() {
        Ok(d) => d
            .terms
            .iter()
            .filter(|(s, _)| *s > 0.0)
            .filter_map(|(_, b)| ChartPoint::new(b.chart, b.center.clone()).ok())
            .collect(),
        Err(_) => vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_section, EnsembleSpec};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn quadratic_examples() {
        let s = PolySection::line_from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let rs = find_roots(&s).unwrap();
        assert_eq!(rs.degree_at_infinity, 0);
        let mut z = rs.affine();
        z.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((z[0] - c(-1.0)).norm() < 1e-14 && (z[1] - c(1.0)).norm() < 1e-14);

        let s = PolySection::line_from_real(&[0.0, 1.0, 0.0]).unwrap();
        let rs = find_roots(&s).unwrap();
        assert_eq!(rs.degree_at_infinity, 1);
        assert_eq!(rs.affine(), vec![c(0.0)]);
    }

    #[test]
    fn zero_polynomial_is_an_error() {
        let s = PolySection::line_from_real(&[0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(find_roots(&s), Err(Error::ZeroPolynomial)));
    }

    #[test]
    fn rejects_higher_dimension() {
        let s = sample_section(&EnsembleSpec::new(2, 3, 1).unwrap(), 0);
        assert!(find_roots(&s).is_err());
    }

    #[test]
    fn random_sections_certify_and_satisfy_vieta() {
        for degree in [5, 20, 50, 100] {
            let spec = EnsembleSpec::new(1, degree, 11).unwrap();
            for trial in 0..50 {
                let s = sample_section(&spec, trial);
                let rs = find_roots(&s).unwrap();
                assert_eq!(rs.total(), degree);
                assert!(rs.residuals.iter().all(|&r| r <= BACKWARD_ERROR_LIMIT));
                let v = vieta_defect(s.weighted(), &rs).unwrap();
                assert!(v < 1e-6, "N={degree} trial={trial} vieta={v}");
            }
        }
    }

    #[test]
    fn companion_fallback_agrees_with_aberth() {
        let spec = EnsembleSpec::new(1, 12, 3).unwrap();
        let s = sample_section(&spec, 0);
        let mut a = find_roots(&s).unwrap().affine();
        let mut b = reconcile(s.weighted(), companion_roots(s.weighted()).unwrap()).unwrap();
        let key = |z: &Complex64| (z.re * 1e6).round() as i64;
        a.sort_by_key(key);
        b.sort_by_key(key);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-8 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn counting_examples() {
        let s = PolySection::line_from_real(&[-1.0, 0.0, 1.0]).unwrap();
        let rs = find_roots(&s).unwrap();
        assert_eq!(count_in_domain(&rs, &DomainSpec::disk(c(0.0), 1.5)), 2);
        assert_eq!(count_in_domain(&rs, &DomainSpec::disk(c(0.0), 0.5)), 0);
        assert_eq!(nevanlinna_count(&rs, 2.0), 2);
        let at_inf = find_roots(&PolySection::line_from_real(&[0.0, 1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(count_in_domain(&at_inf, &DomainSpec::Whole { m: 1 }), 2);
        assert_eq!(count_in_domain(&at_inf, &DomainSpec::complement(DomainSpec::disk(c(0.0), 1.0))), 1);
    }

    #[test]
    fn constant_section_maximum() {
        let spec = EnsembleSpec::new(1, 7, 0).unwrap();
        let mut coeffs = vec![c(0.0); 8];
        coeffs[0] = c(1.0);
        let s = PolySection::from_coeffs(spec, 0, coeffs).unwrap();
        let m = max_modulus_at(&s, &DomainSpec::Whole { m: 1 }, 4).unwrap();
        assert!((m.value - 1.0).abs() < 1e-12);
        assert!(m.location.as_line_affine().unwrap().norm() < 1e-6);
    }

    #[test]
    fn maximum_respects_cauchy_schwarz_and_converges() {
        let spec = EnsembleSpec::new(1, 50, 5).unwrap();
        let whole = DomainSpec::Whole { m: 1 };
        for trial in 0..30 {
            let s = sample_section(&spec, trial);
            let m3 = max_modulus(&s, &whole, 3).unwrap();
            let m4 = max_modulus(&s, &whole, 4).unwrap();
            let m6 = max_modulus(&s, &whole, 6).unwrap();
            assert!(m4 <= s.coeff_norm());
            assert!(m3 <= m4 && m4 <= m6);
            assert!((m4 - m3) / m4 <= 1e-3);
            assert!((m6 - m4) / m6 <= 1e-3);
        }
    }

    #[test]
    fn maximum_on_a_small_disk() {
        let spec = EnsembleSpec::new(1, 30, 5).unwrap();
        let s = sample_section(&spec, 1);
        let d = DomainSpec::disk(Complex64::new(0.2, 0.1), 0.01);
        let m = max_modulus_at(&s, &d, 4).unwrap();
        assert!(d.contains(&m.location));
        let whole = max_modulus(&s, &DomainSpec::Whole { m: 1 }, 4).unwrap();
        assert!(m.value <= whole * (1.0 + 1e-12));
    }

    #[test]
    fn csv_export() {
        let rs = find_roots(&PolySection::line_from_real(&[0.0, 1.0, 0.0]).unwrap()).unwrap();
        let mut buf = Vec::new();
        rs.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "re,im,residual\n0,0,0\n# infinity,1\n");
    }
}

//! Regions of CP^m: chart balls, Fubini–Study caps, annuli, complements.
//!
//! Every domain decomposes as a constant plus a signed sum of indicator
//! functions of open chart balls ([`Decomposition`]); the smoothed test
//! functions of the currents module are built on this decomposition.

use crate::chart::ChartPoint;
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// `‖z − c‖ < radius` in the chart of `center`.
    EuclideanDisk { center: ChartPoint, radius: f64 },
    /// Points at Fubini–Study distance `< radius` from `center`, `radius ≤ π/2`.
    FsCap { center: ChartPoint, radius: f64 },
    /// `r_in < ‖z − c‖ < r_out` in the chart of `center`.
    Annulus { center: ChartPoint, r_in: f64, r_out: f64 },
    /// Interior of the complement of `inner`.
    Complement { inner: Box<DomainSpec> },
    /// All of CP^m.
    Whole { m: usize },
}

/// Open ball `‖z − center‖ < radius` in chart `chart`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartBall {
    pub chart: usize,
    pub center: Vec<Complex64>,
    pub radius: f64,
}

impl ChartBall {
    /// Chart distance from `p` to the ball center, `None` when `p` is not
    /// in the chart of the ball.
    pub fn offset(&self, p: &ChartPoint) -> Option<f64> {
        let q = if p.chart() == self.chart { p.clone() } else { p.to_chart(self.chart)? };
        Some(q.coords().iter().zip(&self.center).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
    }
}

/// `χ_U = constant + Σ sign_i χ_{B_i}` up to boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub constant: f64,
    pub terms: Vec<(f64, ChartBall)>,
}

impl Decomposition {
    fn negate_plus_one(self) -> Self {
        Self { constant: 1.0 - self.constant, terms: self.terms.into_iter().map(|(s, b)| (-s, b)).collect() }
    }
}

impl DomainSpec {
    pub fn disk(center: Complex64, radius: f64) -> Self {
        DomainSpec::EuclideanDisk { center: ChartPoint::line(center), radius }
    }

    pub fn complement(inner: DomainSpec) -> Self {
        DomainSpec::Complement { inner: Box::new(inner) }
    }

    /// Complex dimension `m` of the ambient space.
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::EuclideanDisk { center, .. }
            | DomainSpec::FsCap { center, .. }
            | DomainSpec::Annulus { center, .. } => center.dim(),
            DomainSpec::Complement { inner } => inner.dim(),
            DomainSpec::Whole { m } => *m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDomain(msg));
        match self {
            DomainSpec::EuclideanDisk { radius, .. } if !(*radius > 0.0 && radius.is_finite()) => {
                bad(format!("disk radius must be positive, got {radius}"))
            }
            DomainSpec::FsCap { radius, .. } if !(*radius > 0.0 && *radius <= FRAC_PI_2) => {
                bad(format!("cap radius must lie in (0, π/2], got {radius}"))
            }
            DomainSpec::Annulus { r_in, r_out, .. } if !(*r_in > 0.0 && r_in < r_out && r_out.is_finite()) => {
                bad(format!("annulus needs 0 < r_in < r_out, got {r_in}, {r_out}"))
            }
            DomainSpec::Complement { inner } => inner.validate(),
            DomainSpec::Whole { m } if *m == 0 => bad("m must be positive".into()),
            _ => Ok(()),
        }
    }

    /// Strict interior membership.
    pub fn contains(&self, p: &ChartPoint) -> bool {
        self.member(p, true)
    }

    /// Membership in the closure.
    pub fn contains_closed(&self, p: &ChartPoint) -> bool {
        self.member(p, false)
    }

    fn member(&self, p: &ChartPoint, strict: bool) -> bool {
        let inside = |d: f64, r: f64| if strict { d < r } else { d <= r };
        match self {
            DomainSpec::EuclideanDisk { center, radius } => match chart_offset(center, p) {
                Some(d) => inside(d, *radius),
                None => false,
            },
            DomainSpec::FsCap { center, radius } => inside(crate::kernel::fs_distance(center, p), *radius),
            DomainSpec::Annulus { center, r_in, r_out } => match chart_offset(center, p) {
                Some(d) => inside(d, *r_out) && inside(-d, -*r_in),
                None => false,
            },
            DomainSpec::Complement { inner } => !inner.member(p, !strict),
            DomainSpec::Whole { .. } => true,
        }
    }

    /// Whether the point at infinity of CP^1 lies in the (open) domain.
    pub fn contains_infinity(&self) -> bool {
        self.dim() == 1 && self.contains(&ChartPoint::infinity())
    }

    /// Fubini–Study volume with `Vol(CP^m) = π^m/m!`.
    pub fn fs_volume(&self) -> Result<f64> {
        let m = self.dim();
        let total = PI.powi(m as i32) / (1..=m).product::<usize>() as f64;
        match self {
            DomainSpec::Whole { .. } => Ok(total),
            DomainSpec::Complement { inner } => Ok(total - inner.fs_volume()?),
            DomainSpec::FsCap { radius, .. } => Ok(total * radius.sin().powi(2 * m as i32)),
            DomainSpec::EuclideanDisk { center, radius } => ball_volume(m, center.coords(), *radius),
            DomainSpec::Annulus { center, r_in, r_out } => {
                Ok(ball_volume(m, center.coords(), *r_out)? - ball_volume(m, center.coords(), *r_in)?)
            }
        }
    }

    /// The signed chart-ball decomposition of the indicator.
    pub fn decomposition(&self) -> Result<Decomposition> {
        self.validate()?;
        match self {
            DomainSpec::Whole { .. } => Ok(Decomposition { constant: 1.0, terms: vec![] }),
            DomainSpec::EuclideanDisk { center, radius } => Ok(Decomposition {
                constant: 0.0,
                terms: vec![(1.0, ball(center, *radius))],
            }),
            DomainSpec::Annulus { center, r_in, r_out } => Ok(Decomposition {
                constant: 0.0,
                terms: vec![(1.0, ball(center, *r_out)), (-1.0, ball(center, *r_in))],
            }),
            DomainSpec::Complement { inner } => Ok(inner.decomposition()?.negate_plus_one()),
            DomainSpec::FsCap { center, radius } => cap_decomposition(center, *radius),
        }
    }

    /// `sup ‖z‖` over the domain in chart 0, or `None` if the domain is not
    /// bounded in chart 0.
    pub fn chart0_sup_norm(&self) -> Result<Option<f64>> {
        let d = self.decomposition()?;
        // bounded iff χ_U = Σ of positive chart-0 ball terms minus others
        if d.constant != 0.0 {
            return Ok(None);
        }
        let mut sup: f64 = 0.0;
        for (sign, b) in &d.terms {
            if *sign < 0.0 {
                continue;
            }
            if b.chart != 0 {
                return Ok(None);
            }
            let c = b.center.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            sup = sup.max(c + b.radius);
        }
        Ok(Some(sup))
    }

    /// Inradius-type scale used to bound smoothing widths: the smallest ball
    /// radius of the decomposition, or the annulus half-thickness.
    pub fn characteristic_radius(&self) -> Result<f64> {
        match self {
            DomainSpec::Annulus { r_in, r_out, .. } => Ok(0.5 * (r_out - r_in)),
            DomainSpec::Complement { inner } => inner.characteristic_radius(),
            _ => Ok(self.decomposition()?.terms.iter().map(|(_, b)| b.radius).fold(f64::INFINITY, f64::min)),
        }
    }
}

fn ball(center: &ChartPoint, radius: f64) -> ChartBall {
    ChartBall { chart: center.chart(), center: center.coords().to_vec(), radius }
}

fn chart_offset(center: &ChartPoint, p: &ChartPoint) -> Option<f64> {
    ball(center, 0.0).offset(p)
}

/// FS volume of the chart ball `‖z − c‖ < r`.
pub(crate) fn ball_volume(m: usize, c: &[Complex64], r: f64) -> Result<f64> {
    let c2: f64 = c.iter().map(|x| x.norm_sqr()).sum();
    if m == 1 {
        // area of a Euclidean disk under dA/(1+|z|²)²
        let r2 = r * r;
        let s = 1.0 + c2 + r2;
        return Ok(FRAC_PI_2 * (1.0 - (1.0 + c2 - r2) / (s * s - 4.0 * c2 * r2).sqrt()));
    }
    if c2 == 0.0 {
        let total = PI.powi(m as i32) / (1..=m).product::<usize>() as f64;
        return Ok(total * (r * r / (1.0 + r * r)).powi(m as i32));
    }
    Err(Error::UnsupportedDimension { m, operation: "volume of an off-center ball" })
}

/// An FS cap `{ |⟨Z,P⟩| > cos ρ ‖Z‖‖P‖ }` written in the chart of its center
/// (normalized so the center has coordinates of modulus ≤ 1) is the ball or
/// ball complement
/// `A‖z‖² + 2 Re⟨z, p⟩ + (1 − k) > 0` with `k = cos²ρ (1+‖p‖²)`, `A = ‖p‖² − k`.
fn cap_decomposition(center: &ChartPoint, rho: f64) -> Result<Decomposition> {
    let center = center.to_best_chart();
    let p = center.coords();
    let p2: f64 = p.iter().map(|x| x.norm_sqr()).sum();
    let k = rho.cos().powi(2) * (1.0 + p2);
    let a = p2 - k;
    if a.abs() < 1e-12 {
        return Err(Error::InvalidDomain("cap boundary passes through the chart's hyperplane at infinity".into()));
    }
    let c: Vec<Complex64> = p.iter().map(|x| -x / a).collect();
    let r2 = (p2 - a * (1.0 - k)) / (a * a);
    let b = ChartBall { chart: center.chart(), center: c, radius: r2.max(0.0).sqrt() };
    if a < 0.0 {
        Ok(Decomposition { constant: 0.0, terms: vec![(1.0, b)] })
    } else {
        Ok(Decomposition { constant: 1.0, terms: vec![(-1.0, b)] })
    }
}

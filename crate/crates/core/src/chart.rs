//! Affine charts on CP^m.
//!
//! Chart `k` is the open set `{Z_k != 0}` with coordinates obtained by
//! dividing the homogeneous vector by `Z_k` and dropping that slot. Chart 0
//! is the usual `z -> [1 : z_1 : ... : z_m]`; for m = 1 chart 1 is the
//! `w = 1/z` chart and its origin is the point at infinity.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    chart: usize,
    coords: Vec<Complex64>,
}

impl ChartPoint {
    pub fn new(chart: usize, coords: Vec<Complex64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidPoint("no coordinates".into()));
        }
        if chart > coords.len() {
            return Err(Error::InvalidPoint(format!(
                "chart {chart} does not exist for m = {}",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::InvalidPoint(format!("coordinate {i} is not finite")));
        }
        Ok(Self { chart, coords })
    }

    /// Point of chart 0.
    pub fn affine(coords: Vec<Complex64>) -> Result<Self> {
        Self::new(0, coords)
    }

    /// Chart-0 point of CP^1.
    pub fn line(z: Complex64) -> Self {
        Self { chart: 0, coords: vec![z] }
    }

    /// Origin of chart `chart`.
    pub fn origin(m: usize, chart: usize) -> Result<Self> {
        Self::new(chart, vec![Complex64::new(0.0, 0.0); m])
    }

    /// The point at infinity of CP^1 (origin of chart 1).
    pub fn infinity() -> Self {
        Self { chart: 1, coords: vec![Complex64::new(0.0, 0.0)] }
    }

    pub fn chart(&self) -> usize {
        self.chart
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Homogeneous representative with `Z_chart = 1`.
    pub fn homogeneous(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.coords.len() + 1);
        out.extend_from_slice(&self.coords[..self.chart]);
        out.push(Complex64::new(1.0, 0.0));
        out.extend_from_slice(&self.coords[self.chart..]);
        out
    }

    /// Unit-norm homogeneous representative.
    pub fn unit_homogeneous(&self) -> Vec<Complex64> {
        let scale = (1.0 + self.norm_sqr()).sqrt().recip();
        self.homogeneous().into_iter().map(|z| z * scale).collect()
    }

    /// Builds a chart point from a nonzero homogeneous vector, using the
    /// chart of the coordinate of largest modulus.
    pub fn from_homogeneous(z: &[Complex64]) -> Result<Self> {
        let (k, pivot) = z
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .ok_or_else(|| Error::InvalidPoint("empty homogeneous vector".into()))?;
        if pivot.norm_sqr() == 0.0 {
            return Err(Error::InvalidPoint("zero homogeneous vector".into()));
        }
        let coords = z
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != k)
            .map(|(_, c)| c / pivot)
            .collect();
        Self::new(k, coords)
    }

    /// Same point expressed in chart `target`, if it lies in that chart.
    pub fn to_chart(&self, target: usize) -> Option<Self> {
        let z = self.homogeneous();
        let pivot = *z.get(target)?;
        if pivot.norm_sqr() == 0.0 {
            return None;
        }
        let coords = z
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != target)
            .map(|(_, c)| c / pivot)
            .collect();
        Self::new(target, coords).ok()
    }

    /// Re-expresses the point in the chart where its largest homogeneous
    /// coordinate is 1 (all coordinates then have modulus at most 1).
    pub fn to_best_chart(&self) -> Self {
        Self::from_homogeneous(&self.homogeneous()).expect("homogeneous vector of a valid point is nonzero")
    }

    /// Coordinate of a point of CP^1 in chart 0, or `None` at infinity.
    pub fn as_line_affine(&self) -> Option<Complex64> {
        if self.coords.len() != 1 {
            return None;
        }
        match self.chart {
            0 => Some(self.coords[0]),
            _ => {
                let w = self.coords[0];
                (w.norm_sqr() > 0.0).then(|| w.inv())
            }
        }
    }

    pub fn is_infinity(&self) -> bool {
        self.coords.len() == 1 && self.chart == 1 && self.coords[0].norm_sqr() == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_round_trip_on_line() {
        for &(re, im) in &[(0.5, 0.0), (0.3, -0.4), (1.2, 1.3), (-2.0, 0.0), (0.0, 1.0)] {
            let p = ChartPoint::line(Complex64::new(re, im));
            let q = p.to_chart(1).unwrap();
            assert!((q.coords()[0] - p.coords()[0].inv()).norm() < 1e-15);
            let back = q.to_chart(0).unwrap();
            assert!((back.coords()[0] - p.coords()[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn infinity_is_not_in_chart_zero() {
        assert!(ChartPoint::infinity().to_chart(0).is_none());
        assert!(ChartPoint::infinity().as_line_affine().is_none());
    }

    #[test]
    fn homogeneous_layout() {
        let p = ChartPoint::new(1, vec![Complex64::new(2.0, 0.0), Complex64::new(3.0, 0.0)]).unwrap();
        let z = p.homogeneous();
        assert_eq!(z, vec![Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)]);
    }

    #[test]
    fn rejects_bad_points() {
        assert!(ChartPoint::new(2, vec![Complex64::new(0.0, 0.0)]).is_err());
        assert!(ChartPoint::affine(vec![Complex64::new(f64::NAN, 0.0)]).is_err());
        assert!(ChartPoint::affine(vec![]).is_err());
    }

    #[test]
    fn best_chart_has_bounded_coords() {
        let p = ChartPoint::affine(vec![Complex64::new(5.0, 1.0), Complex64::new(0.1, 0.0)]).unwrap();
        let q = p.to_best_chart();
        assert_eq!(q.chart(), 1);
        assert!(q.coords().iter().all(|c| c.norm() <= 1.0));
    }
}

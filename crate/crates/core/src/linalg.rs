//! Dense complex matrices and a cyclic Jacobi eigensolver for Hermitian
//! matrices.
//!
//! Each Jacobi rotation first removes the phase of the pivot `a_pq` with a
//! diagonal unitary, then applies the real symmetric rotation that zeroes
//! it. Sweeps run over all pairs `p < q` in row order until the
//! off-diagonal Frobenius norm drops below `tolerance · ‖A‖_F`.

use crate::error::{Error, Result};
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self { n, data: rows.into_iter().flatten().collect() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn off_diagonal_frobenius(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    acc += self[(i, j)].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }

    /// `max_{i,j} |a_ij − conj(a_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..=i {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, x)| a * x).sum())
            .collect()
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.n, |i, j| self[(j, i)].conj())
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiOptions {
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        Self { tolerance: 1e-12, max_sweeps: 100 }
    }
}

/// Eigen-decomposition `A = V diag(λ) V^H`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: CMatrix,
    pub sweeps: usize,
}

pub fn hermitian_eigen(a: &CMatrix, opts: JacobiOptions) -> Result<HermitianEigen> {
    let n = a.dim();
    let mut a = a.clone();
    // symmetrize against rounding in the input
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in 0..i {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)].conj());
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    let mut sweeps = 0;
    let mut off = a.off_diagonal_frobenius();
    while off > opts.tolerance * scale {
        if sweeps == opts.max_sweeps {
            return Err(Error::EigenNotConverged { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        off = a.off_diagonal_frobenius();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, |i, j| v[(i, order[j])]);
    Ok(HermitianEigen { values, vectors, sweeps })
}

fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let b = apq.norm();
    if b < f64::MIN_POSITIVE {
        return;
    }
    let phase = apq / b; // e^{iφ}
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * b);
    let t = if tau >= 0.0 { 1.0 / (tau + (1.0 + tau * tau).sqrt()) } else { -1.0 / (-tau + (1.0 + tau * tau).sqrt()) };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let n = a.dim();
    // U = [[c, s], [−s e^{−iφ}, c e^{−iφ}]] acting on columns p, q
    let e = phase.conj();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * (s * e);
        a[(k, q)] = akp * s + akq * (c * e);
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * (s * phase);
        a[(q, k)] = apk * s + aqk * (c * phase);
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(app - t * b, 0.0);
    a[(q, q)] = Complex64::new(aqq + t * b, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * (s * e);
        v[(k, q)] = vkp * s + vkq * (c * e);
    }
}

impl HermitianEigen {
    /// `V diag(g(λ)) V^H`.
    pub fn apply_function(&self, g: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let gv: Vec<f64> = self.values.iter().map(|&l| g(l)).collect();
        CMatrix::from_fn(n, |i, j| {
            (0..n).map(|k| self.vectors[(i, k)] * gv[k] * self.vectors[(j, k)].conj()).sum()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = crate::rng::TrialRng::new(seed, crate::rng::Purpose::Synthetic, 0);
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = c(rng.complex_gaussian().re * 2.0, 0.0);
            for j in 0..i {
                let z = rng.complex_gaussian();
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let e = hermitian_eigen(&CMatrix::identity(5), JacobiOptions::default()).unwrap();
        assert!(e.values.iter().all(|&l| (l - 1.0).abs() < 1e-15));
    }

    #[test]
    fn two_by_two_perturbation() {
        let m = CMatrix::from_rows(vec![vec![c(1.0, 0.0), c(0.3, 0.0)], vec![c(0.3, 0.0), c(1.0, 0.0)]]);
        let e = hermitian_eigen(&m, JacobiOptions::default()).unwrap();
        assert!((e.values[0] - 0.7).abs() < 1e-14 && (e.values[1] - 1.3).abs() < 1e-14);
        let m = CMatrix::from_rows(vec![vec![c(1.0, 0.0), c(0.0, 0.3)], vec![c(0.0, -0.3), c(1.0, 0.0)]]);
        let e = hermitian_eigen(&m, JacobiOptions::default()).unwrap();
        assert!((e.values[0] - 0.7).abs() < 1e-14 && (e.values[1] - 1.3).abs() < 1e-14);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        for (n, seed) in [(3, 1), (10, 2), (30, 3)] {
            let m = random_hermitian(n, seed);
            let e = hermitian_eigen(&m, JacobiOptions::default()).unwrap();
            let back = e.apply_function(|l| l);
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((back[(i, j)] - m[(i, j)]).norm());
                }
            }
            assert!(worst < 1e-11 * m.frobenius(), "n={n} worst={worst}");
            let vhv = e.vectors.adjoint().mul(&e.vectors);
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((vhv[(i, j)] - c(target, 0.0)).norm() < 1e-12);
                }
            }
            let trace: f64 = (0..n).map(|i| m[(i, i)].re).sum();
            assert!((e.values.iter().sum::<f64>() - trace).abs() < 1e-10);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn inverse_square_root_squares_to_inverse() {
        let mut m = random_hermitian(6, 9);
        for i in 0..6 {
            m[(i, i)] += c(8.0, 0.0);
        }
        let e = hermitian_eigen(&m, JacobiOptions::default()).unwrap();
        let r = e.apply_function(|l| l.powf(-0.5));
        let prod = r.mul(&r).mul(&m);
        for i in 0..6 {
            for j in 0..6 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - c(target, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sweep_cap_is_reported() {
        let m = random_hermitian(8, 4);
        let opts = JacobiOptions { tolerance: 1e-12, max_sweeps: 1 };
        assert!(matches!(hermitian_eigen(&m, opts), Err(Error::EigenNotConverged { .. })));
    }
}

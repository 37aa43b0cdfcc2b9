//! Small Hermitian matrices, Hermitian matrix fields, and mixed discriminants.
//!
//! A metric `ω = i Σ g_{ij̄} dz^i ∧ dz̄^j` is stored as the matrix
//! `G[i][j] = g_{ij̄}`. Top-degree wedge products of real (1,1)-forms reduce
//! pointwise to mixed discriminants:
//! `ω_1 ∧ … ∧ ω_n / ω_ref^n = D(G_1, …, G_n) / det G_ref`.

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, TorusGrid};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// An `n × n` complex matrix with `n ≤ 3`, stored inline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HMat {
    n: usize,
    a: [[Complex64; 3]; 3],
}

impl HMat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=3).contains(&n), "HMat supports n in 1..=3");
        Self { n, a: [[ZERO; 3]; 3] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i][i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.a[i][i] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Builds from a row-major slice of `n²` entries.
    pub fn from_row_major(n: usize, entries: &[Complex64]) -> Self {
        assert_eq!(entries.len(), n * n);
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i][j] = entries[i * n + j];
            }
        }
        m
    }

    /// Rank-one `v v^†`.
    pub fn outer(v: &[Complex64]) -> Self {
        let mut m = Self::zeros(v.len());
        for i in 0..v.len() {
            for j in 0..v.len() {
                m.a[i][j] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.a[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.a[i][j] = v;
    }

    pub fn add(&self, other: &HMat) -> HMat {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] += other.a[i][j];
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> HMat {
        let mut m = *self;
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] *= s;
            }
        }
        m
    }

    pub fn mul(&self, other: &HMat) -> HMat {
        let mut m = HMat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut s = ZERO;
                for k in 0..self.n {
                    s += self.a[i][k] * other.a[k][j];
                }
                m.a[i][j] = s;
            }
        }
        m
    }

    pub fn adjoint(&self) -> HMat {
        let mut m = HMat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] = self.a[j][i].conj();
            }
        }
        m
    }

    /// `(A + A^†) / 2`.
    pub fn hermitian_part(&self) -> HMat {
        self.add(&self.adjoint()).scale(0.5)
    }

    /// Largest entry of `|A − A^†|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                d = d.max((self.a[i][j] - self.a[j][i].conj()).norm());
            }
        }
        d
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.a[i][i]).sum()
    }

    pub fn det(&self) -> Complex64 {
        let a = &self.a;
        match self.n {
            1 => a[0][0],
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    /// Inverse by cofactors; `None` if the determinant vanishes.
    pub fn inverse(&self) -> Option<HMat> {
        let d = self.det();
        if d.norm() == 0.0 || !d.re.is_finite() {
            return None;
        }
        let a = &self.a;
        let mut m = HMat::zeros(self.n);
        match self.n {
            1 => m.a[0][0] = a[0][0].inv(),
            2 => {
                m.a[0][0] = a[1][1] / d;
                m.a[0][1] = -a[0][1] / d;
                m.a[1][0] = -a[1][0] / d;
                m.a[1][1] = a[0][0] / d;
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                        let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                        m.a[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / d;
                    }
                }
            }
        }
        Some(m)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = self.hermitian_part();
        let a = &h.a;
        let mut ev = match self.n {
            1 => vec![a[0][0].re],
            2 => {
                let mid = 0.5 * (a[0][0].re + a[1][1].re);
                let half = 0.5 * (a[0][0].re - a[1][1].re);
                let r = (half * half + a[0][1].norm_sqr()).sqrt();
                vec![mid - r, mid + r]
            }
            _ => {
                let m = Matrix3::from_fn(|i, j| a[i][j]);
                m.symmetric_eigenvalues().iter().copied().collect()
            }
        };
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Eigenvalues via nalgebra for every `n`; independent of the closed form used above.
    pub fn eigenvalues_reference(&self) -> Vec<f64> {
        let h = self.hermitian_part();
        let mut ev: Vec<f64> = match self.n {
            2 => Matrix2::from_fn(|i, j| h.a[i][j])
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .collect(),
            3 => Matrix3::from_fn(|i, j| h.a[i][j])
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .collect(),
            _ => vec![h.a[0][0].re],
        };
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `tr(self^{-1} other)`, the contraction `g^{ij̄} h_{ij̄}`.
    pub fn contract(&self, other: &HMat) -> Option<f64> {
        let inv = self.inverse()?;
        Some(inv.mul(other).trace().re)
    }
}

/// Mixed discriminant of `n` matrices by polarization of the determinant:
/// `D(A_1..A_n) = (1/n!) Σ_{∅≠S⊆[n]} (−1)^{n−|S|} det(Σ_{i∈S} A_i)`.
pub fn mixed_discriminant(mats: &[HMat]) -> f64 {
    let n = mats.len();
    assert!((1..=3).contains(&n), "mixed discriminant needs 1..=3 matrices");
    assert!(mats.iter().all(|m| m.n() == n), "matrix size must equal argument count");
    let factorial = (1..=n).product::<usize>() as f64;
    let mut total = 0.0;
    for subset in 1u32..(1 << n) {
        let mut sum = HMat::zeros(n);
        for (i, m) in mats.iter().enumerate() {
            if subset & (1 << i) != 0 {
                sum = sum.add(m);
            }
        }
        let sign = if (n as u32 - subset.count_ones()) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        total += sign * sum.det().re;
    }
    total / factorial
}

/// An `n × n` Hermitian matrix per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianField {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl HermitianField {
    /// Wraps point-major row-major entries; fails if any point deviates from
    /// Hermitian by more than `1e-12`.
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        let n = grid.n();
        if values.len() != grid.point_count() * n * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} matrix entries, got {}",
                grid.point_count() * n * n,
                values.len()
            )));
        }
        let field = Self { grid, values };
        for p in 0..field.grid.point_count() {
            let dev = field.at(p).hermitian_deviation();
            if !(dev <= 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "matrix at point {p} is not Hermitian (deviation {dev:.3e})"
                )));
            }
        }
        Ok(field)
    }

    pub fn from_fn<F: FnMut(usize) -> HMat>(grid: &TorusGrid, mut f: F) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.point_count() * n * n);
        for p in 0..grid.point_count() {
            let m = f(p);
            debug_assert_eq!(m.n(), n);
            for i in 0..n {
                for j in 0..n {
                    values.push(m.get(i, j));
                }
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &TorusGrid, m: HMat) -> Self {
        Self::from_fn(grid, |_| m)
    }

    pub fn identity(grid: &TorusGrid) -> Self {
        Self::constant(grid, HMat::identity(grid.n()))
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::constant(grid, HMat::zeros(grid.n()))
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Point-major, row-major entries.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, p: usize) -> HMat {
        let n = self.n();
        HMat::from_row_major(n, &self.values[p * n * n..(p + 1) * n * n])
    }

    /// Entry `(i, j)` across all points.
    pub fn entry(&self, i: usize, j: usize) -> Vec<Complex64> {
        let n = self.n();
        (0..self.grid.point_count())
            .map(|p| self.values[p * n * n + i * n + j])
            .collect()
    }

    pub fn map<F: Fn(usize, HMat) -> HMat>(&self, f: F) -> HermitianField {
        Self::from_fn(&self.grid, |p| f(p, self.at(p)))
    }

    pub fn add(&self, other: &HermitianField) -> Result<HermitianField> {
        self.grid.check_same(&other.grid)?;
        Ok(self.map(|p, m| m.add(&other.at(p))))
    }

    /// Pointwise `e^{s(p)} · A(p)`.
    pub fn conformal(&self, factor: &ScalarField) -> Result<HermitianField> {
        self.grid.check_same(factor.grid())?;
        Ok(self.map(|p, m| m.scale(factor.values()[p].exp())))
    }

    pub fn scale(&self, s: f64) -> HermitianField {
        self.map(|_, m| m.scale(s))
    }

    /// Real determinant per point.
    pub fn det(&self) -> ScalarField {
        ScalarField::from_raw(
            self.grid.clone(),
            (0..self.grid.point_count()).map(|p| self.at(p).det().re).collect(),
        )
    }

    pub fn trace(&self) -> ScalarField {
        ScalarField::from_raw(
            self.grid.clone(),
            (0..self.grid.point_count()).map(|p| self.at(p).trace().re).collect(),
        )
    }

    /// Smallest eigenvalue over all points, with the point that attains it.
    pub fn min_eigenvalue(&self) -> (f64, usize) {
        (0..self.grid.point_count())
            .map(|p| (self.at(p).min_eigenvalue(), p))
            .fold((f64::INFINITY, 0), |best, cur| if cur.0 < best.0 { cur } else { best })
    }

    /// Errors with the worst point when the field is not positive definite.
    pub fn require_positive(&self, floor: f64) -> Result<()> {
        let (ev, p) = self.min_eigenvalue();
        if ev > floor {
            Ok(())
        } else {
            Err(Error::Positivity {
                point: p,
                eigenvalue: ev,
            })
        }
    }

    pub fn max_hermitian_deviation(&self) -> f64 {
        (0..self.grid.point_count())
            .map(|p| self.at(p).hermitian_deviation())
            .fold(0.0, f64::max)
    }

    /// Sup over points of the largest entry modulus.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    pub fn max_abs_diff(&self, other: &HermitianField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm())))
    }
}

/// Pointwise `D(A_1, …, A_n) / det G_ref`, the ratio `(∧ factors) / ω_ref^n`.
///
/// `factors` pairs each field with its multiplicity; multiplicities must sum to `n`.
pub fn wedge_quotient(
    factors: &[(&HermitianField, usize)],
    reference: &HermitianField,
) -> Result<ScalarField> {
    let grid = reference.grid();
    let n = grid.n();
    let total: usize = factors.iter().map(|(_, m)| m).sum();
    if total != n {
        return Err(Error::InvalidArgument(format!(
            "wedge multiplicities sum to {total}, expected {n}"
        )));
    }
    for (f, _) in factors {
        grid.check_same(f.grid())?;
    }
    let mut out = Vec::with_capacity(grid.point_count());
    let mut mats = Vec::with_capacity(n);
    for p in 0..grid.point_count() {
        let r = reference.at(p).det().re;
        if !(r > 0.0) {
            return Err(Error::NonpositiveDeterminant { point: p, value: r });
        }
        mats.clear();
        for (f, m) in factors {
            let a = f.at(p);
            mats.extend(std::iter::repeat_n(a, *m));
        }
        out.push(mixed_discriminant(&mats) / r);
    }
    Ok(ScalarField::from_raw(grid.clone(), out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn discriminant_of_identity() {
        assert_eq!(mixed_discriminant(&[HMat::identity(2), HMat::identity(2)]), 1.0);
        assert!((mixed_discriminant(&[HMat::identity(3); 3]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn discriminant_diag_example() {
        let a = HMat::diag(&[1.0, 2.0]);
        let b = HMat::diag(&[3.0, 4.0]);
        assert!((mixed_discriminant(&[a, b]) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn discriminant_of_repeated_is_det() {
        let a = HMat::from_row_major(
            3,
            &[
                c(2.0, 0.0),
                c(0.3, 0.1),
                c(-0.2, 0.4),
                c(0.3, -0.1),
                c(1.5, 0.0),
                c(0.05, 0.2),
                c(-0.2, -0.4),
                c(0.05, -0.2),
                c(3.0, 0.0),
            ],
        );
        assert!((mixed_discriminant(&[a, a, a]) - a.det().re).abs() < 1e-12);
    }

    #[test]
    fn inverse_and_eigenvalues() {
        let a = HMat::from_row_major(2, &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(3.0, 0.0)]);
        let prod = a.mul(&a.inverse().unwrap());
        assert!(prod.add(&HMat::identity(2).scale(-1.0)).hermitian_deviation() < 1e-14);
        let ev = a.eigenvalues();
        let reference = a.eigenvalues_reference();
        for (x, y) in ev.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((ev[0] * ev[1] - a.det().re).abs() < 1e-12);
        assert_eq!(HMat::diag(&[2.0, 3.0]).min_eigenvalue(), 2.0);
    }

    #[test]
    fn wedge_quotient_examples() {
        let g = TorusGrid::uniform(2, 4).unwrap();
        let id = HermitianField::identity(&g);
        let q = wedge_quotient(&[(&id, 2)], &id).unwrap();
        assert!(q.values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let gp = HermitianField::constant(&g, HMat::diag(&[1.1, 1.2]));
        let det = wedge_quotient(&[(&gp, 2)], &id).unwrap();
        assert!((det.values()[0] - 1.32).abs() < 1e-14);
        let mixed = wedge_quotient(&[(&gp, 1), (&id, 1)], &id).unwrap();
        assert!((mixed.values()[3] - 1.15).abs() < 1e-14);
        assert!(wedge_quotient(&[(&gp, 1)], &id).is_err());
    }

    #[test]
    fn hermitian_field_rejects_non_hermitian() {
        let g = TorusGrid::uniform(2, 4).unwrap();
        let mut v = HermitianField::identity(&g).values().to_vec();
        v[1] = c(0.1, 0.0);
        assert!(HermitianField::new(g, v).is_err());
    }
}

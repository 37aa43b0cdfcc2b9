//! Periodic grids on flat complex tori, sampled fields, and quadrature.
//!
//! A grid of complex dimension `n` has `2n` real axes, each of period `2π`.
//! The complex coordinate `z^j` pairs real axes `(2j, 2j + 1)` as
//! `z^j = x^{2j} + i x^{2j+1}`. Points are stored row-major: the last axis
//! varies fastest.
//!
//! All reductions go through [`pairwise_sum`], a fixed binary-tree traversal,
//! so repeated runs produce bit-identical integrals.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const PAIRWISE_LEAF: usize = 16;

/// Deterministic pairwise summation. Leaves of at most 16 entries are summed
/// left to right, then halves are combined recursively (left half first).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..len`, with the same traversal as [`pairwise_sum`].
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(len: usize, f: F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= PAIRWISE_LEAF {
            return (lo..hi).map(f).sum();
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, len, &f)
}

/// Periodic discretization of the flat complex torus `C^n / (2π Z)^{2n}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusGrid {
    n: usize,
    sizes: Vec<usize>,
    strides: Vec<usize>,
    point_count: usize,
}

impl TorusGrid {
    /// Builds a grid with complex dimension `n` and `2n` axis sizes.
    pub fn new(n: usize, sizes: &[usize]) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(Error::InvalidGrid(format!(
                "complex dimension must be 2 or 3, got {n}"
            )));
        }
        if sizes.len() != 2 * n {
            return Err(Error::InvalidGrid(format!(
                "expected {} axis sizes, got {}",
                2 * n,
                sizes.len()
            )));
        }
        for (axis, &s) in sizes.iter().enumerate() {
            if s < 4 {
                return Err(Error::InvalidGrid(format!("axis {axis} has size {s} < 4")));
            }
            if s % 2 != 0 {
                return Err(Error::InvalidGrid(format!("axis {axis} has odd size {s}")));
            }
        }
        let mut strides = vec![1usize; sizes.len()];
        for a in (0..sizes.len() - 1).rev() {
            strides[a] = strides[a + 1] * sizes[a + 1];
        }
        let point_count = sizes.iter().product();
        Ok(Self {
            n,
            sizes: sizes.to_vec(),
            strides,
            point_count,
        })
    }

    /// Same size on every real axis.
    pub fn uniform(n: usize, size: usize) -> Result<Self> {
        Self::new(n, &vec![size; 2 * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn axis_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn point_count(&self) -> usize {
        self.point_count
    }

    pub fn period(&self) -> f64 {
        2.0 * PI
    }

    /// Total flat volume `(2π)^{2n}`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(2 * self.n as i32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.point_count as f64
    }

    /// Per-axis integer index of a flat point index.
    pub fn multi_index(&self, point: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.sizes)
            .map(|(&stride, &size)| (point / stride) % size)
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.strides)
            .map(|(&i, &stride)| i * stride)
            .sum()
    }

    /// Real coordinates `x_a = 2π k_a / size_a` of a point.
    pub fn coords(&self, point: usize) -> Vec<f64> {
        self.multi_index(point)
            .iter()
            .zip(&self.sizes)
            .map(|(&k, &size)| 2.0 * PI * k as f64 / size as f64)
            .collect()
    }

    /// Fills `out` with the coordinates of `point` without allocating.
    pub fn coords_into(&self, point: usize, out: &mut [f64]) {
        for (a, slot) in out.iter_mut().enumerate().take(self.sizes.len()) {
            let k = (point / self.strides[a]) % self.sizes[a];
            *slot = 2.0 * PI * k as f64 / self.sizes[a] as f64;
        }
    }

    pub(crate) fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Real samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.point_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.point_count(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite sample at point {i}"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness scan; used by kernels whose
    /// outputs are finite whenever their inputs are.
    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.point_count());
        Self { grid, values }
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        Self::from_raw(grid.clone(), vec![c; grid.point_count()])
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at the real coordinates of every grid point.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: &TorusGrid, f: F) -> Self {
        let mut x = vec![0.0; grid.axis_count()];
        let values = (0..grid.point_count())
            .map(|p| {
                grid.coords_into(p, &mut x);
                f(&x)
            })
            .collect();
        Self::from_raw(grid.clone(), values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self::from_raw(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &ScalarField, f: F) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self::from_raw(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    /// Grid supremum (no interpolation between samples).
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid infimum (no interpolation between samples).
    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Arithmetic mean over grid points (flat measure average).
    pub fn mean(&self) -> f64 {
        pairwise_sum(&self.values) / self.values.len() as f64
    }

    pub fn shifted(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField::from_raw(
            self.grid.clone(),
            self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    /// Sup-norm of the difference with another field.
    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Complex samples on a grid (spectral coefficients, complex derivatives).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: TorusGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.point_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.point_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite complex sample".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.point_count());
        Self { grid, values }
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::from_raw(grid.clone(), vec![Complex64::new(0.0, 0.0); grid.point_count()])
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn re(&self) -> ScalarField {
        ScalarField::from_raw(self.grid.clone(), self.values.iter().map(|v| v.re).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }
}

/// A positive density relative to the flat coordinate volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    density: ScalarField,
    total_mass: f64,
}

impl Measure {
    pub fn new(density: ScalarField) -> Result<Self> {
        if let Some(i) = density.values().iter().position(|&d| d <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "measure density must be positive, found {} at point {i}",
                density.values()[i]
            )));
        }
        let total_mass = density.grid().cell_volume() * pairwise_sum(density.values());
        Ok(Self {
            density,
            total_mass,
        })
    }

    /// The flat coordinate measure; total mass `(2π)^{2n}`.
    pub fn flat(grid: &TorusGrid) -> Self {
        Self {
            density: ScalarField::constant(grid, 1.0),
            total_mass: grid.volume(),
        }
    }

    pub fn density(&self) -> &ScalarField {
        &self.density
    }

    pub fn grid(&self) -> &TorusGrid {
        self.density.grid()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }
}

/// Periodic trapezoid rule: `cell_volume · Σ f · density`.
pub fn integrate(f: &ScalarField, m: &Measure) -> Result<f64> {
    f.grid().check_same(m.grid())?;
    let fv = f.values();
    let dv = m.density().values();
    Ok(f.grid().cell_volume() * pairwise_sum_by(fv.len(), |i| fv[i] * dv[i]))
}

/// `(∫ |f|^p dμ / μ(M))^{1/p}` with the normalized measure. `p = ∞` gives
/// the grid sup of `|f|`.
///
/// The largest `|f|` is factored out before exponentiation, so large `p`
/// does not overflow.
pub fn lp_norm(f: &ScalarField, p: f64, m: &Measure) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("lp_norm needs p >= 1, got {p}")));
    }
    f.grid().check_same(m.grid())?;
    let top = f.sup_norm();
    if top == 0.0 {
        return Ok(0.0);
    }
    if p.is_infinite() {
        return Ok(top);
    }
    let fv = f.values();
    let dv = m.density().values();
    let weighted = pairwise_sum_by(fv.len(), |i| (fv[i].abs() / top).powf(p) * dv[i]);
    let normalized = weighted / pairwise_sum(dv);
    Ok(top * normalized.powf(1.0 / p))
}

/// Normalized measure (in `[0, 1]`) of the sublevel set `{f ≤ threshold}`.
pub fn sublevel_measure(f: &ScalarField, threshold: f64, m: &Measure) -> Result<f64> {
    f.grid().check_same(m.grid())?;
    let fv = f.values();
    let dv = m.density().values();
    let inside = pairwise_sum_by(fv.len(), |i| if fv[i] <= threshold { dv[i] } else { 0.0 });
    Ok(inside / pairwise_sum(dv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_grid_counts() {
        let g = TorusGrid::new(2, &[8, 8, 8, 8]).unwrap();
        assert_eq!(g.point_count(), 4096);
        assert!((g.cell_volume() - (2.0 * PI).powi(4) / 4096.0).abs() < 1e-15);
        let g3 = TorusGrid::new(3, &[4; 6]).unwrap();
        assert_eq!(g3.point_count(), 4096);
    }

    #[test]
    fn build_grid_rejects_bad_axes() {
        assert!(matches!(
            TorusGrid::new(2, &[7, 8, 8, 8]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(TorusGrid::new(2, &[2, 8, 8, 8]).is_err());
        assert!(TorusGrid::new(4, &[8; 8]).is_err());
        assert!(TorusGrid::new(1, &[8; 2]).is_err());
        assert!(TorusGrid::new(2, &[8; 6]).is_err());
    }

    #[test]
    fn cell_volume_times_count_is_total() {
        for sizes in [[4usize, 6, 8, 10], [16, 16, 16, 16], [4, 4, 4, 12]] {
            let g = TorusGrid::new(2, &sizes).unwrap();
            let total = g.cell_volume() * g.point_count() as f64;
            assert!((total - g.volume()).abs() <= 1e-12 * g.volume());
        }
    }

    #[test]
    fn index_round_trip() {
        let g = TorusGrid::new(2, &[4, 6, 8, 10]).unwrap();
        for p in [0, 1, 17, 1919] {
            assert_eq!(g.flat_index(&g.multi_index(p)), p);
        }
        let x = g.coords(g.flat_index(&[1, 0, 0, 5]));
        assert!((x[0] - PI / 2.0).abs() < 1e-15);
        assert!((x[3] - PI).abs() < 1e-15);
    }

    #[test]
    fn integrate_examples() {
        let g = TorusGrid::uniform(2, 8).unwrap();
        let flat = Measure::flat(&g);
        let one = ScalarField::constant(&g, 1.0);
        assert!((integrate(&one, &flat).unwrap() - g.volume()).abs() < 1e-9);
        let c = ScalarField::from_fn(&g, |x| x[0].cos());
        assert!(integrate(&c, &flat).unwrap().abs() < 1e-12);
        let c2 = ScalarField::from_fn(&g, |x| x[0].cos().powi(2));
        let expected = (2.0 * PI).powi(4) / 2.0;
        assert!((integrate(&c2, &flat).unwrap() - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn integrate_rejects_mismatch() {
        let g = TorusGrid::uniform(2, 8).unwrap();
        let h = TorusGrid::uniform(2, 4).unwrap();
        let f = ScalarField::zeros(&g);
        assert!(matches!(
            integrate(&f, &Measure::flat(&h)),
            Err(Error::GridMismatch)
        ));
    }

    fn two_valued(g: &TorusGrid, high: f64) -> ScalarField {
        ScalarField::from_fn(g, |x| if x[0] < PI { 0.0 } else { high })
    }

    #[test]
    fn lp_norm_examples() {
        let g = TorusGrid::uniform(2, 8).unwrap();
        let flat = Measure::flat(&g);
        let c = ScalarField::constant(&g, -3.0);
        for p in [1.0, 2.0, 7.5, 100.0, f64::INFINITY] {
            assert!((lp_norm(&c, p, &flat).unwrap() - 3.0).abs() < 1e-12);
        }
        // (½·2^p)^{1/p} = 2·2^{-1/p}
        let f = two_valued(&g, 2.0);
        for p in [1.0, 10.0, 1000.0] {
            let expected = 2.0 * 0.5f64.powf(1.0 / p);
            assert!((lp_norm(&f, p, &flat).unwrap() - expected).abs() < 1e-12);
        }
        assert!((lp_norm(&f, 1e6, &flat).unwrap() - 2.0).abs() < 1e-5);
        assert!(lp_norm(&f, 0.5, &flat).is_err());
    }

    #[test]
    fn sublevel_examples() {
        let g = TorusGrid::uniform(2, 8).unwrap();
        let flat = Measure::flat(&g);
        let z = ScalarField::zeros(&g);
        assert_eq!(sublevel_measure(&z, 0.0, &flat).unwrap(), 1.0);
        assert_eq!(sublevel_measure(&z, -1.0, &flat).unwrap(), 0.0);
        let f = two_valued(&g, 10.0);
        assert_eq!(sublevel_measure(&f, 1.0, &flat).unwrap(), 0.5);
    }

    #[test]
    fn measure_rejects_nonpositive_density() {
        let g = TorusGrid::uniform(2, 4).unwrap();
        assert!(Measure::new(ScalarField::zeros(&g)).is_err());
        let m = Measure::new(ScalarField::constant(&g, 2.0)).unwrap();
        assert!((m.total_mass() - 2.0 * g.volume()).abs() < 1e-9);
    }

    #[test]
    fn pairwise_is_order_fixed() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert_eq!(pairwise_sum(&v).to_bits(), pairwise_sum_by(v.len(), |i| v[i]).to_bits());
    }
}

//! Spectral complex differentiation and the Hermitian-geometric operators
//! built on it: `∂∂̄`, gradient pairings, the Chern Laplacian, the
//! Chern-Ricci form, torsion, and `∂`/`∂̄` of form-valued fields.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forms::{basis_sign, PointForm};
use crate::grid::{ComplexField, ScalarField, TorusGrid};
use crate::hermitian::{HMat, HermitianField};
use crate::spectral::Spectral;

/// Applies a per-mode multiplier to already transformed data and transforms back.
fn apply_symbol<S: Fn(usize) -> Complex64>(sp: &Spectral, hat: &[Complex64], symbol: S) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = hat.iter().enumerate().map(|(m, &c)| c * symbol(m)).collect();
    sp.inverse(&mut out);
    out
}

fn check_axis(grid: &TorusGrid, j: usize) -> Result<()> {
    if j >= grid.n() {
        Err(Error::InvalidArgument(format!(
            "complex axis {j} out of range for n = {}",
            grid.n()
        )))
    } else {
        Ok(())
    }
}

/// `∂f/∂z^j`, or `∂f/∂z̄^j` when `conjugate`, by frequency-domain multiplication.
pub fn spectral_partial(f: &ScalarField, j: usize, conjugate: bool) -> Result<ComplexField> {
    partial_complex(&f.to_complex(), j, conjugate)
}

/// Complex-input variant of [`spectral_partial`].
pub fn partial_complex(f: &ComplexField, j: usize, conjugate: bool) -> Result<ComplexField> {
    let grid = f.grid();
    check_axis(grid, j)?;
    let sp = Spectral::for_grid(grid);
    let mut hat = f.values().to_vec();
    sp.forward(&mut hat);
    let out = apply_symbol(&sp, &hat, |m| sp.partial_symbol(m, j, conjugate));
    Ok(ComplexField::from_raw(grid.clone(), out))
}

/// All holomorphic first derivatives `∂_j f`, `j = 0..n`.
pub fn gradient(f: &ScalarField) -> Vec<ComplexField> {
    let grid = f.grid();
    let sp = Spectral::for_grid(grid);
    let hat = sp.forward_real(f.values());
    (0..grid.n())
        .map(|j| ComplexField::from_raw(grid.clone(), apply_symbol(&sp, &hat, |m| sp.partial_symbol(m, j, false))))
        .collect()
}

/// `∂_a ∂_{b̄} f` for a complex-valued field.
pub fn ddbar_entry(f: &ComplexField, a: usize, b: usize) -> Result<ComplexField> {
    let grid = f.grid();
    check_axis(grid, a)?;
    check_axis(grid, b)?;
    let sp = Spectral::for_grid(grid);
    let mut hat = f.values().to_vec();
    sp.forward(&mut hat);
    Ok(ComplexField::from_raw(
        grid.clone(),
        apply_symbol(&sp, &hat, |m| sp.ddbar_symbol(m, a, b)),
    ))
}

/// The complex Hessian `H_{ij̄} = ∂_i∂_{j̄} f`, symmetrized to be exactly Hermitian.
pub fn ddbar(f: &ScalarField) -> HermitianField {
    let grid = f.grid();
    let sp = Spectral::for_grid(grid);
    let hat = sp.forward_real(f.values());
    ddbar_from_hat(&sp, &hat)
}

pub(crate) fn ddbar_from_hat(sp: &Spectral, hat: &[Complex64]) -> HermitianField {
    let grid = sp.grid();
    let n = grid.n();
    let npts = grid.point_count();
    let mut values = vec![Complex64::new(0.0, 0.0); npts * n * n];
    for i in 0..n {
        for j in i..n {
            let entry = apply_symbol(sp, hat, |m| sp.ddbar_symbol(m, i, j));
            for (p, v) in entry.iter().enumerate() {
                if i == j {
                    values[p * n * n + i * n + i] = Complex64::new(v.re, 0.0);
                } else {
                    values[p * n * n + i * n + j] = *v;
                    values[p * n * n + j * n + i] = v.conj();
                }
            }
        }
    }
    HermitianField::from_fn(grid, |p| HMat::from_row_major(n, &values[p * n * n..(p + 1) * n * n]))
}

/// Rank-one field `G_{ij̄} = ∂_i f · conj(∂_j f)`, the coefficients of `i∂f ∧ ∂̄f`.
pub fn gradient_pairing(f: &ScalarField) -> HermitianField {
    let grads = gradient(f);
    let n = f.grid().n();
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    HermitianField::from_fn(f.grid(), |p| {
        for (j, g) in grads.iter().enumerate() {
            v[j] = g.values()[p];
        }
        HMat::outer(&v)
    })
}

/// Pointwise `|∂f|²_g = g^{ij̄} ∂_i f ∂_{j̄} f`.
pub fn gradient_norm_sq(f: &ScalarField, metric: &HermitianField) -> Result<ScalarField> {
    contract_field(metric, &gradient_pairing(f))
}

/// Pointwise `tr(G^{-1} A)`.
pub fn contract_field(metric: &HermitianField, a: &HermitianField) -> Result<ScalarField> {
    metric.grid().check_same(a.grid())?;
    let mut out = Vec::with_capacity(metric.grid().point_count());
    for p in 0..metric.grid().point_count() {
        let g = metric.at(p);
        let inv = g.inverse().ok_or(Error::NonpositiveDeterminant {
            point: p,
            value: g.det().re,
        })?;
        out.push(inv.mul(&a.at(p)).trace().re);
    }
    Ok(ScalarField::from_raw(metric.grid().clone(), out))
}

/// Chern Laplacian `Δf = g^{ij̄} ∂_i∂_{j̄} f`.
pub fn chern_laplacian(f: &ScalarField, metric: &HermitianField) -> Result<ScalarField> {
    f.grid().check_same(metric.grid())?;
    contract_field(metric, &ddbar(f))
}

/// Chern-Ricci form `Ric_{ij̄} = −(1/2π) ∂_i∂_{j̄} log det g`.
pub fn ricci_form(metric: &HermitianField) -> Result<HermitianField> {
    let det = metric.det();
    if let Some(p) = det.values().iter().position(|&d| !(d > 0.0)) {
        return Err(Error::NonpositiveDeterminant {
            point: p,
            value: det.values()[p],
        });
    }
    Ok(ddbar(&det.map(f64::ln)).scale(-1.0 / (2.0 * PI)))
}

/// Coefficients `T_{kij̄} = ∂_k g_{ij̄}` of the torsion (2,1)-form `∂ω`.
#[derive(Debug, Clone)]
pub struct TorsionTensor {
    grid: TorusGrid,
    /// Point-major, then `(k*n + i)*n + j`.
    values: Vec<Complex64>,
}

impl TorsionTensor {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// The `n³` coefficients at a point.
    pub fn at(&self, p: usize) -> &[Complex64] {
        let n3 = self.grid.n().pow(3);
        &self.values[p * n3..(p + 1) * n3]
    }

    /// The (2,1)-form `∂ω` at a point.
    pub fn form_at(&self, p: usize) -> PointForm {
        PointForm::from_torsion(self.grid.n(), self.at(p))
    }

    /// Sup over points of `|T_{kij̄} − T_{ikj̄}|`, the Kähler defect.
    pub fn antisymmetric_sup(&self) -> f64 {
        let n = self.grid.n();
        let mut m = 0.0f64;
        for p in 0..self.grid.point_count() {
            let t = self.at(p);
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        m = m.max((t[(k * n + i) * n + j] - t[(i * n + k) * n + j]).norm());
                    }
                }
            }
        }
        m
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// Spectral first derivatives of every metric coefficient.
pub fn torsion(metric: &HermitianField) -> TorsionTensor {
    let grid = metric.grid();
    let n = grid.n();
    let npts = grid.point_count();
    let sp = Spectral::for_grid(grid);
    let mut values = vec![Complex64::new(0.0, 0.0); npts * n * n * n];
    for i in 0..n {
        for j in 0..n {
            let mut hat = metric.entry(i, j);
            sp.forward(&mut hat);
            for k in 0..n {
                let d = apply_symbol(&sp, &hat, |m| sp.partial_symbol(m, k, false));
                for (p, v) in d.iter().enumerate() {
                    values[p * n * n * n + (k * n + i) * n + j] = *v;
                }
            }
        }
    }
    TorsionTensor {
        grid: grid.clone(),
        values,
    }
}

/// A form-valued field: one complex coefficient field per basis mask.
#[derive(Debug, Clone)]
pub struct FormField {
    grid: TorusGrid,
    bidegree: (usize, usize),
    terms: Vec<(u32, Vec<Complex64>)>,
}

impl FormField {
    /// Builds the coefficient fields of a pointwise-defined form.
    pub fn from_point_forms<F: FnMut(usize) -> PointForm>(grid: &TorusGrid, bidegree: (usize, usize), mut f: F) -> Self {
        let n = grid.n();
        let masks: Vec<u32> = PointForm::zero(n, bidegree.0, bidegree.1)
            .terms()
            .into_iter()
            .map(|(m, _)| m)
            .collect();
        let mut terms: Vec<(u32, Vec<Complex64>)> = masks
            .iter()
            .map(|&m| (m, Vec::with_capacity(grid.point_count())))
            .collect();
        for p in 0..grid.point_count() {
            let form = f(p);
            debug_assert_eq!(form.bidegree(), bidegree);
            for (mask, coeffs) in terms.iter_mut() {
                coeffs.push(form.coefficient(*mask));
            }
        }
        Self {
            grid: grid.clone(),
            bidegree,
            terms,
        }
    }

    /// `ω^k` for a metric field.
    pub fn metric_power(metric: &HermitianField, k: usize) -> Result<Self> {
        let n = metric.n();
        if k > n {
            return Err(Error::DegreeOverflow { p: k, q: k, n });
        }
        Ok(Self::from_point_forms(metric.grid(), (k, k), |p| {
            PointForm::from_hermitian(&metric.at(p))
                .power(k)
                .expect("k <= n")
        }))
    }

    pub fn bidegree(&self) -> (usize, usize) {
        self.bidegree
    }

    pub fn terms(&self) -> &[(u32, Vec<Complex64>)] {
        &self.terms
    }

    /// Coefficient field of one basis mask (zeros if absent).
    pub fn coefficient(&self, mask: u32) -> Vec<Complex64> {
        self.terms
            .iter()
            .find(|(m, _)| *m == mask)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); self.grid.point_count()])
    }

    /// Multiplies every coefficient by a real scalar field.
    pub fn scale_by(&self, w: &ScalarField) -> Result<Self> {
        self.grid.check_same(w.grid())?;
        let terms = self
            .terms
            .iter()
            .map(|(m, v)| (*m, v.iter().zip(w.values()).map(|(c, &s)| c * s).collect()))
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            bidegree: self.bidegree,
            terms,
        })
    }

    /// Sup over points and masks of the coefficient modulus.
    pub fn sup_norm(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|(_, v)| v.iter())
            .fold(0.0, |m, c| m.max(c.norm()))
    }

    fn accumulate(grid: &TorusGrid, bidegree: (usize, usize), contributions: Vec<(u32, f64, Vec<Complex64>)>) -> Self {
        let n = grid.n();
        let masks: Vec<u32> = PointForm::zero(n, bidegree.0, bidegree.1)
            .terms()
            .into_iter()
            .map(|(m, _)| m)
            .collect();
        let mut terms: Vec<(u32, Vec<Complex64>)> = masks
            .iter()
            .map(|&m| (m, vec![Complex64::new(0.0, 0.0); grid.point_count()]))
            .collect();
        for (mask, sign, field) in contributions {
            let slot = terms
                .iter_mut()
                .find(|(m, _)| *m == mask)
                .expect("mask of the target bidegree");
            for (a, b) in slot.1.iter_mut().zip(&field) {
                *a += b * sign;
            }
        }
        Self {
            grid: grid.clone(),
            bidegree,
            terms,
        }
    }

    /// `∂β = Σ_a ∂_a β_M dz^a ∧ e_M`.
    pub fn del(&self) -> Result<Self> {
        let n = self.grid.n();
        let (p, q) = self.bidegree;
        if p + 1 > n {
            return Err(Error::DegreeOverflow { p: p + 1, q, n });
        }
        let sp = Spectral::for_grid(&self.grid);
        let mut contributions = Vec::new();
        for (mask, coeffs) in &self.terms {
            let mut hat = coeffs.clone();
            sp.forward(&mut hat);
            for a in 0..n {
                let bit = 1u32 << a;
                if mask & bit != 0 {
                    continue;
                }
                let d = apply_symbol(&sp, &hat, |m| sp.partial_symbol(m, a, false));
                contributions.push((mask | bit, basis_sign(bit, *mask), d));
            }
        }
        Ok(Self::accumulate(&self.grid, (p + 1, q), contributions))
    }

    /// `∂∂̄β = Σ_{a,b} ∂_a∂_{b̄} β_M dz^a ∧ dz̄^b ∧ e_M`.
    pub fn del_delbar(&self) -> Result<Self> {
        let n = self.grid.n();
        let (p, q) = self.bidegree;
        if p + 1 > n || q + 1 > n {
            return Err(Error::DegreeOverflow { p: p + 1, q: q + 1, n });
        }
        let sp = Spectral::for_grid(&self.grid);
        let mut contributions = Vec::new();
        for (mask, coeffs) in &self.terms {
            let mut hat = coeffs.clone();
            sp.forward(&mut hat);
            for b in 0..n {
                let bbit = 1u32 << (n + b);
                if mask & bbit != 0 {
                    continue;
                }
                let inner = mask | bbit;
                let s1 = basis_sign(bbit, *mask);
                for a in 0..n {
                    let abit = 1u32 << a;
                    if inner & abit != 0 {
                        continue;
                    }
                    let s2 = basis_sign(abit, inner);
                    let d = apply_symbol(&sp, &hat, |m| sp.ddbar_symbol(m, a, b));
                    contributions.push((inner | abit, s1 * s2, d));
                }
            }
        }
        Ok(Self::accumulate(&self.grid, (p + 1, q + 1), contributions))
    }

    /// Top coefficient divided by that of `ω_flat^n` (requires bidegree `(n, n)`).
    pub fn top_ratio(&self) -> Result<Vec<Complex64>> {
        let n = self.grid.n();
        if self.bidegree != (n, n) {
            return Err(Error::InvalidArgument("top_ratio needs a top-degree form".into()));
        }
        let unit = crate::forms::identity_volume(n);
        Ok(self
            .coefficient((1u32 << (2 * n)) - 1)
            .into_iter()
            .map(|c| c / unit)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TorusGrid {
        TorusGrid::uniform(2, 8).unwrap()
    }

    #[test]
    fn partial_of_constant_is_zero() {
        let f = ScalarField::constant(&grid(), 3.5);
        for conj in [false, true] {
            assert!(spectral_partial(&f, 1, conj).unwrap().sup_norm() < 1e-14);
        }
        assert!(spectral_partial(&f, 2, false).is_err());
    }

    #[test]
    fn partial_of_cosine() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x| x[0].cos());
        let d = spectral_partial(&f, 0, false).unwrap();
        let db = spectral_partial(&f, 0, true).unwrap();
        let mut x = vec![0.0; 4];
        for p in 0..g.point_count() {
            g.coords_into(p, &mut x);
            let expect = -0.5 * x[0].sin();
            assert!((d.values()[p] - Complex64::new(expect, 0.0)).norm() < 1e-12);
            assert!((db.values()[p] - Complex64::new(expect, 0.0)).norm() < 1e-12);
        }
        // ∂/∂z of a function of y only is imaginary: ∂_z cos(y) = -(i/2)(-sin y)
        let h = ScalarField::from_fn(&g, |x| x[1].cos());
        let dh = spectral_partial(&h, 0, false).unwrap();
        for p in 0..g.point_count() {
            g.coords_into(p, &mut x);
            assert!((dh.values()[p] - Complex64::new(0.0, 0.5 * x[1].sin())).norm() < 1e-12);
        }
    }

    #[test]
    fn partial_matches_finite_differences() {
        let g = TorusGrid::new(2, &[256, 256, 4, 4]).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0].sin() * x[1].sin());
        let d = spectral_partial(&f, 0, false).unwrap();
        let h = 2.0 * PI / 256.0;
        let mut max_err = 0.0f64;
        for p in (0..g.point_count()).step_by(97) {
            let mi = g.multi_index(p);
            let shift = |axis: usize, delta: isize| {
                let mut m = mi.clone();
                m[axis] = ((m[axis] as isize + delta).rem_euclid(256)) as usize;
                f.values()[g.flat_index(&m)]
            };
            let dx = (shift(0, 1) - shift(0, -1)) / (2.0 * h);
            let dy = (shift(1, 1) - shift(1, -1)) / (2.0 * h);
            let fd = Complex64::new(0.5 * dx, -0.5 * dy);
            max_err = max_err.max((fd - d.values()[p]).norm());
        }
        assert!(max_err < 1e-3, "max_err = {max_err}");
    }

    #[test]
    fn ddbar_of_cosine() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x| x[0].cos());
        let h = ddbar(&f);
        let mut x = vec![0.0; 4];
        for p in 0..g.point_count() {
            g.coords_into(p, &mut x);
            let m = h.at(p);
            assert!((m.get(0, 0).re + 0.25 * x[0].cos()).abs() < 1e-12);
            assert!(m.get(0, 1).norm() < 1e-12 && m.get(1, 1).norm() < 1e-12);
        }
        assert_eq!(ddbar(&ScalarField::zeros(&g)).sup_norm(), 0.0);
    }

    #[test]
    fn chern_laplacian_examples() {
        let g = grid();
        let flat = HermitianField::identity(&g);
        let f = ScalarField::from_fn(&g, |x| x[0].cos());
        let lap = chern_laplacian(&f, &flat).unwrap();
        let expected = f.scaled(-0.25);
        assert!(lap.max_abs_diff(&expected).unwrap() < 1e-12);
        let c = ScalarField::constant(&g, 2.0);
        assert!(chern_laplacian(&c, &flat).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn ricci_of_flat_and_conformal() {
        let g = grid();
        let flat = HermitianField::identity(&g);
        assert!(ricci_form(&flat).unwrap().sup_norm() < 1e-14);
        let v = ScalarField::from_fn(&g, |x| 0.3 * (x[0] + x[3]).sin());
        let conf = flat.conformal(&v).unwrap();
        let ric = ricci_form(&conf).unwrap();
        let expected = ddbar(&v).scale(-2.0 / (2.0 * PI));
        assert!(ric.max_abs_diff(&expected).unwrap() < 1e-12);
        assert!(ricci_form(&HermitianField::zeros(&g)).is_err());
    }

    #[test]
    fn torsion_of_constant_metric() {
        let g = grid();
        let t = torsion(&HermitianField::constant(&g, HMat::diag(&[2.0, 3.0])));
        assert!(t.sup_norm() < 1e-14);
    }

    #[test]
    fn kahler_potential_has_symmetric_torsion() {
        let g = grid();
        let rho = ScalarField::from_fn(&g, |x| 0.1 * (x[0] + x[2]).cos() + 0.05 * (x[1] - x[3]).sin());
        let metric = HermitianField::identity(&g).add(&ddbar(&rho)).unwrap();
        let t = torsion(&metric);
        assert!(t.sup_norm() > 1e-3);
        assert!(t.antisymmetric_sup() < 1e-10);
    }

    #[test]
    fn form_field_dd_bar_of_scalar_matches_ddbar() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |x| (x[0] - x[3]).cos() + 0.2 * x[2].sin());
        let ff = FormField::from_point_forms(&g, (0, 0), |p| {
            PointForm::scalar(2, Complex64::new(f.values()[p], 0.0))
        });
        let dd = ff.del_delbar().unwrap();
        let h = ddbar(&f);
        // ∂∂̄f = Σ ∂_a∂_b̄ f dz^a∧dz̄^b = -i · (i Σ H_ab dz^a∧dz̄^b)
        let n = 2;
        for a in 0..n {
            for b in 0..n {
                let coeff = dd.coefficient((1 << a) | (1 << (n + b)));
                let expect = h.entry(a, b);
                for (c, e) in coeff.iter().zip(&expect) {
                    assert!((c - e).norm() < 1e-12);
                }
            }
        }
    }
}

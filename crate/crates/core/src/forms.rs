//! Pointwise exterior algebra over `dz^0..dz^{n-1}, dz̄^0..dz̄^{n-1}`.
//!
//! A basis element is a bitmask over the `2n` generators, read in increasing
//! order: bit `j` is `dz^j` and bit `n + j` is `dz̄^j`, so every basis form is
//! `dz^I ∧ dz̄^J` with `I`, `J` increasing.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermitian::HMat;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Sign of `e_a ∧ e_b = sign · e_{a|b}` for disjoint basis masks.
pub fn basis_sign(a: u32, b: u32) -> f64 {
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let y = rest.trailing_zeros();
        rest &= rest - 1;
        swaps += (a >> (y + 1)).count_ones();
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// A homogeneous form of bidegree `(p, q)` at a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointForm {
    n: usize,
    p: usize,
    q: usize,
    coeffs: Vec<Complex64>,
}

impl PointForm {
    pub fn zero(n: usize, p: usize, q: usize) -> Self {
        Self {
            n,
            p,
            q,
            coeffs: vec![ZERO; 1 << (2 * n)],
        }
    }

    pub fn scalar(n: usize, c: Complex64) -> Self {
        let mut f = Self::zero(n, 0, 0);
        f.coeffs[0] = c;
        f
    }

    /// The basis element `dz^{dz[0]} ∧ … ∧ dz̄^{dzbar[0]} ∧ …` in the given order.
    pub fn basis(n: usize, dz: &[usize], dzbar: &[usize]) -> Result<Self> {
        let mut f = Self::scalar(n, Complex64::new(1.0, 0.0));
        for &j in dz {
            f = f.wedge(&Self::dz(n, j))?;
        }
        for &j in dzbar {
            f = f.wedge(&Self::dzbar(n, j))?;
        }
        Ok(f)
    }

    pub fn dz(n: usize, j: usize) -> Self {
        let mut f = Self::zero(n, 1, 0);
        f.coeffs[1 << j] = Complex64::new(1.0, 0.0);
        f
    }

    pub fn dzbar(n: usize, j: usize) -> Self {
        let mut f = Self::zero(n, 0, 1);
        f.coeffs[1 << (n + j)] = Complex64::new(1.0, 0.0);
        f
    }

    /// `Σ_j v_j dz^j`.
    pub fn one_form_dz(v: &[Complex64]) -> Self {
        let n = v.len();
        let mut f = Self::zero(n, 1, 0);
        for (j, &c) in v.iter().enumerate() {
            f.coeffs[1 << j] = c;
        }
        f
    }

    /// `Σ_j v_j dz̄^j`.
    pub fn one_form_dzbar(v: &[Complex64]) -> Self {
        let n = v.len();
        let mut f = Self::zero(n, 0, 1);
        for (j, &c) in v.iter().enumerate() {
            f.coeffs[1 << (n + j)] = c;
        }
        f
    }

    /// The real (1,1)-form `i Σ A_{ij} dz^i ∧ dz̄^j`.
    pub fn from_hermitian(a: &HMat) -> Self {
        let n = a.n();
        let mut f = Self::zero(n, 1, 1);
        for i in 0..n {
            for j in 0..n {
                // dz^i has a lower bit than dz̄^j, so the basis sign is +1.
                f.coeffs[(1 << i) | (1 << (n + j))] = I * a.get(i, j);
            }
        }
        f
    }

    /// The (2,1)-form `i Σ T_{kij} dz^k ∧ dz^i ∧ dz̄^j` with `t[(k*n + i)*n + j]`.
    pub fn from_torsion(n: usize, t: &[Complex64]) -> Self {
        assert_eq!(t.len(), n * n * n);
        let mut f = Self::zero(n, 2, 1);
        for k in 0..n {
            for i in 0..n {
                if i == k {
                    continue;
                }
                for j in 0..n {
                    let head = basis_sign(1 << k, 1 << i);
                    let mask = (1u32 << k) | (1 << i);
                    let sign = head * basis_sign(mask, 1 << (n + j));
                    f.coeffs[(mask | (1 << (n + j))) as usize] += I * t[(k * n + i) * n + j] * sign;
                }
            }
        }
        f
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    /// Number of basis elements of this bidegree, `C(n,p)·C(n,q)`.
    pub fn coefficient_count(&self) -> usize {
        binomial(self.n, self.p) * binomial(self.n, self.q)
    }

    /// Coefficients of this bidegree as `(mask, value)`, in increasing mask order.
    pub fn terms(&self) -> Vec<(u32, Complex64)> {
        let low = (1u32 << self.n) - 1;
        (0..self.coeffs.len() as u32)
            .filter(|&m| {
                (m & low).count_ones() as usize == self.p
                    && (m >> self.n).count_ones() as usize == self.q
            })
            .map(|m| (m, self.coeffs[m as usize]))
            .collect()
    }

    pub fn coefficient(&self, mask: u32) -> Complex64 {
        self.coeffs[mask as usize]
    }

    pub fn add(&self, other: &PointForm) -> Result<PointForm> {
        if self.n != other.n || self.bidegree() != other.bidegree() {
            return Err(Error::InvalidArgument("adding forms of different type".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> PointForm {
        let mut out = self.clone();
        for a in out.coeffs.iter_mut() {
            *a *= c;
        }
        out
    }

    /// Graded-antisymmetric product.
    pub fn wedge(&self, other: &PointForm) -> Result<PointForm> {
        assert_eq!(self.n, other.n, "forms over different dimensions");
        let (p, q) = (self.p + other.p, self.q + other.q);
        if p > self.n || q > self.n {
            return Err(Error::DegreeOverflow { p, q, n: self.n });
        }
        let mut out = Self::zero(self.n, p, q);
        let lhs: Vec<(u32, Complex64)> = nonzero(&self.coeffs);
        let rhs: Vec<(u32, Complex64)> = nonzero(&other.coeffs);
        for &(a, ca) in &lhs {
            for &(b, cb) in &rhs {
                if a & b != 0 {
                    continue;
                }
                out.coeffs[(a | b) as usize] += ca * cb * basis_sign(a, b);
            }
        }
        Ok(out)
    }

    /// `self^k`, with `self^0 = 1`.
    pub fn power(&self, k: usize) -> Result<PointForm> {
        let mut out = Self::scalar(self.n, Complex64::new(1.0, 0.0));
        for _ in 0..k {
            out = out.wedge(self)?;
        }
        Ok(out)
    }

    pub fn top_coefficient(&self) -> Complex64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    pub fn sup_coefficient(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Top-degree ratio `self / ω_g^n` for the metric `g`.
    pub fn volume_ratio(&self, metric: &HMat) -> Complex64 {
        let unit = identity_volume(self.n);
        self.top_coefficient() / (unit * metric.det().re)
    }
}

fn nonzero(c: &[Complex64]) -> Vec<(u32, Complex64)> {
    c.iter()
        .enumerate()
        .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
        .map(|(m, &v)| (m as u32, v))
        .collect()
}

/// Top coefficient of `ω_I^n`, `ω_I = i Σ dz^j ∧ dz̄^j`.
pub fn identity_volume(n: usize) -> Complex64 {
    PointForm::from_hermitian(&HMat::identity(n))
        .power(n)
        .expect("ω^n is top degree")
        .top_coefficient()
}

/// Product of a list of forms, left to right.
pub fn point_exterior_product(forms: &[PointForm]) -> Result<PointForm> {
    let Some(first) = forms.first() else {
        return Err(Error::InvalidArgument("empty product".into()));
    };
    forms[1..].iter().try_fold(first.clone(), |acc, f| acc.wedge(f))
}

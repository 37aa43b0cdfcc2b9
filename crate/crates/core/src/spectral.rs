//! Multi-dimensional FFT plumbing and complex-derivative symbols.
//!
//! First derivatives zero the Nyquist wavenumber on every axis. The diagonal
//! second derivatives `∂_j∂_{j̄} = ¼(∂²_{x} + ∂²_{y})` keep the full Nyquist
//! symbol `-k²`, which is real and unambiguous; mixed `∂_i∂_{j̄}` with
//! `i ≠ j` are products of first-derivative symbols. With this choice the
//! flat Laplacian annihilates constants only.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::TorusGrid;

/// Forward/inverse transforms and wavenumber tables for one grid.
pub struct Spectral {
    grid: TorusGrid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// Signed wavenumbers with the Nyquist entry set to zero.
    odd_k: Vec<Vec<f64>>,
    /// Squared signed wavenumbers, Nyquist kept as `(N/2)²`.
    even_k2: Vec<Vec<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

type Cache = Mutex<HashMap<Vec<usize>, Arc<Spectral>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Spectral {
    /// Shared transform tables for `grid`, built once per distinct shape.
    pub fn for_grid(grid: &TorusGrid) -> Arc<Spectral> {
        let mut key = vec![grid.n()];
        key.extend_from_slice(grid.sizes());
        let mut map = cache().lock().expect("spectral cache poisoned");
        map.entry(key)
            .or_insert_with(|| Arc::new(Spectral::build(grid)))
            .clone()
    }

    fn build(grid: &TorusGrid) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let mut forward = Vec::new();
        let mut inverse = Vec::new();
        let mut odd_k = Vec::new();
        let mut even_k2 = Vec::new();
        for &size in grid.sizes() {
            forward.push(planner.plan_fft_forward(size));
            inverse.push(planner.plan_fft_inverse(size));
            let half = size / 2;
            let signed: Vec<f64> = (0..size)
                .map(|i| {
                    if i <= half {
                        i as f64
                    } else {
                        i as f64 - size as f64
                    }
                })
                .collect();
            odd_k.push(
                signed
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| if i == half { 0.0 } else { k })
                    .collect(),
            );
            even_k2.push(signed.iter().map(|k| k * k).collect());
        }
        Self {
            grid: grid.clone(),
            forward,
            inverse,
            odd_k,
            even_k2,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let sizes = self.grid.sizes();
        let strides = self.grid.strides();
        let total = data.len();
        let mut line = Vec::new();
        let mut scratch = Vec::new();
        for (axis, plan) in plans.iter().enumerate() {
            let size = sizes[axis];
            let stride = strides[axis];
            if stride == 1 {
                scratch.resize(plan.get_inplace_scratch_len(), Complex64::default());
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            line.resize(size, Complex64::default());
            scratch.resize(plan.get_inplace_scratch_len(), Complex64::default());
            let block = stride * size;
            for base in (0..total).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (i, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + i * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, v) in line.iter().enumerate() {
                        data[start + i * stride] = *v;
                    }
                }
            }
        }
    }

    /// Unnormalized forward DFT over all axes.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse DFT over all axes, normalized so `inverse(forward(x)) = x`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut data);
        data
    }

    /// Per-axis wavenumber indices of a flat mode index.
    fn axis_index(&self, mode: usize, axis: usize) -> usize {
        (mode / self.grid.strides()[axis]) % self.grid.sizes()[axis]
    }

    /// Symbol of `∂/∂z^j` (or `∂/∂z̄^j` when `conjugate`) at a mode.
    pub fn partial_symbol(&self, mode: usize, j: usize, conjugate: bool) -> Complex64 {
        let (a, b) = (2 * j, 2 * j + 1);
        let ka = self.odd_k[a][self.axis_index(mode, a)];
        let kb = self.odd_k[b][self.axis_index(mode, b)];
        if conjugate {
            Complex64::new(-0.5 * kb, 0.5 * ka)
        } else {
            Complex64::new(0.5 * kb, 0.5 * ka)
        }
    }

    /// Symbol of `∂_i ∂_{j̄}` at a mode.
    pub fn ddbar_symbol(&self, mode: usize, i: usize, j: usize) -> Complex64 {
        if i == j {
            let (a, b) = (2 * i, 2 * i + 1);
            let k2 = self.even_k2[a][self.axis_index(mode, a)]
                + self.even_k2[b][self.axis_index(mode, b)];
            Complex64::new(-0.25 * k2, 0.0)
        } else {
            self.partial_symbol(mode, i, false) * self.partial_symbol(mode, j, true)
        }
    }

    /// Symbol of the constant-coefficient operator `Σ_{ij} c_{ji} ∂_i∂_{j̄}`
    /// with `c` given row-major as an `n × n` matrix.
    pub fn contracted_symbol(&self, mode: usize, coeff: &[Complex64]) -> Complex64 {
        let n = self.grid.n();
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                s += coeff[j * n + i] * self.ddbar_symbol(mode, i, j);
            }
        }
        s
    }
}

//! Scenario configuration: grid, metric family, right-hand side, and options.
//!
//! Scenarios are TOML documents. Every metric and right-hand side is a finite
//! list of trigonometric modes `cos · cos(k·x) + sin · sin(k·x)` with integer
//! wave vectors `k` of length `2n`, so all inputs are band-limited.
//!
//! ```toml
//! name = "manufactured"
//! n = 2
//! seed = 7
//!
//! [grid]
//! sizes = [16, 16, 16, 16]
//!
//! [metric]
//! family = "hermitian_perturbed"
//! [[metric.modes]]
//! k = [1, 0, 0, 0]
//! phase = 0.0
//! re = [[0.05, 0.03], [0.03, 0.1]]
//! im = [[0.0, 0.02], [-0.02, 0.0]]
//!
//! [f]
//! normalization = "sup_zero"
//! [[f.modes]]
//! k = [1, 0, 1, 0]
//! cos = 0.5
//! ```

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::ddbar;
use crate::error::{Error, Result};
use crate::grid::{ScalarField, TorusGrid};
use crate::hermitian::{HMat, HermitianField};
use crate::solver::{manufacture, SolveOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigMode {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl TrigMode {
    pub fn cos(k: &[i64], a: f64) -> Self {
        Self {
            k: k.to_vec(),
            cos: a,
            sin: 0.0,
        }
    }

    pub fn sin(k: &[i64], a: f64) -> Self {
        Self {
            k: k.to_vec(),
            cos: 0.0,
            sin: a,
        }
    }

    fn phase(&self, x: &[f64]) -> f64 {
        self.k.iter().zip(x).map(|(&k, &xa)| k as f64 * xa).sum()
    }
}

/// Sum of trigonometric modes on a grid.
pub fn trig_field(grid: &TorusGrid, modes: &[TrigMode]) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|m| {
                let t = m.phase(x);
                m.cos * t.cos() + m.sin * t.sin()
            })
            .sum()
    })
}

/// Hermitian amplitude `re + i·im` multiplying `cos(k·x + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixMode {
    pub k: Vec<i64>,
    #[serde(default)]
    pub phase: f64,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    FlatKahler,
    /// `g = I + ∂∂̄ρ`.
    KahlerPotential { rho: Vec<TrigMode> },
    /// `g = e^v (I + ∂∂̄ρ)`.
    ConformalKahler {
        v: Vec<TrigMode>,
        #[serde(default)]
        rho: Vec<TrigMode>,
    },
    /// `g = I + Σ A_m cos(k_m·x + phase_m)`.
    HermitianPerturbed { modes: Vec<MatrixMode> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    SupZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FSpec {
    #[serde(default = "default_normalization")]
    pub normalization: Normalization,
    #[serde(default)]
    pub modes: Vec<TrigMode>,
    /// Manufactured solution; when present `F` is built from it instead of `modes`.
    #[serde(default)]
    pub manufactured: Option<Vec<TrigMode>>,
    /// Constant added after normalization.
    #[serde(default)]
    pub offset: f64,
}

fn default_normalization() -> Normalization {
    Normalization::Raw
}

impl Default for FSpec {
    fn default() -> Self {
        Self {
            normalization: Normalization::Raw,
            modes: Vec::new(),
            manufactured: None,
            offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSpec {
    pub max_newton_iters: usize,
    pub residual_tol: f64,
    pub krylov_tol: f64,
    pub krylov_restart: usize,
    pub krylov_max_iters: usize,
    pub damping: f64,
    pub min_step: f64,
    pub positivity_floor: f64,
    pub continuity_steps: usize,
}

impl Default for SolveSpec {
    fn default() -> Self {
        Self::from(&SolveOptions::default())
    }
}

impl From<&SolveOptions> for SolveSpec {
    fn from(o: &SolveOptions) -> Self {
        Self {
            max_newton_iters: o.max_newton_iters,
            residual_tol: o.residual_tol,
            krylov_tol: o.krylov_tol,
            krylov_restart: o.krylov_restart,
            krylov_max_iters: o.krylov_max_iters,
            damping: o.damping,
            min_step: o.min_step,
            positivity_floor: o.positivity_floor,
            continuity_steps: o.continuity_steps,
        }
    }
}

impl From<&SolveSpec> for SolveOptions {
    fn from(s: &SolveSpec) -> Self {
        Self {
            max_newton_iters: s.max_newton_iters,
            residual_tol: s.residual_tol,
            krylov_tol: s.krylov_tol,
            krylov_restart: s.krylov_restart,
            krylov_max_iters: s.krylov_max_iters,
            damping: s.damping,
            min_step: s.min_step,
            positivity_floor: s.positivity_floor,
            continuity_steps: s.continuity_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Enabled check names; all checks when absent.
    pub checks: Option<Vec<String>>,
    pub p_list: Vec<f64>,
    pub p0: f64,
    /// Moser levels; chosen so the last exponent reaches 512 when absent.
    pub moser_levels: Option<usize>,
    pub ledger_p: f64,
    pub trace_candidates: Vec<f64>,
    pub trace_ceiling: f64,
    pub gauduchon_tol: f64,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            checks: None,
            p_list: vec![8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0],
            p0: 8.0,
            moser_levels: None,
            ledger_p: 32.0,
            trace_candidates: vec![1.0, 2.0, 4.0, 8.0],
            trace_ceiling: 1e6,
            gauduchon_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    pub metric: MetricSpec,
    #[serde(default)]
    pub f: FSpec,
    #[serde(default)]
    pub solve: SolveSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
}

fn check_modes(key: &str, modes: &[TrigMode], sizes: &[usize]) -> Result<()> {
    for (idx, m) in modes.iter().enumerate() {
        check_wavevector(&format!("{key}[{idx}].k"), &m.k, sizes)?;
        if !m.cos.is_finite() || !m.sin.is_finite() {
            return Err(Error::config(format!("{key}[{idx}]"), "amplitudes must be finite"));
        }
    }
    Ok(())
}

fn check_wavevector(key: &str, k: &[i64], sizes: &[usize]) -> Result<()> {
    if k.len() != sizes.len() {
        return Err(Error::config(
            key,
            format!("expected {} components, found {}", sizes.len(), k.len()),
        ));
    }
    for (a, (&ka, &na)) in k.iter().zip(sizes).enumerate() {
        if ka.unsigned_abs() as usize * 2 >= na {
            return Err(Error::config(
                key,
                format!("frequency {ka} on axis {a} is not below the Nyquist limit of a {na}-point axis"),
            ));
        }
    }
    Ok(())
}

fn amplitude(key: &str, mode: &MatrixMode, n: usize) -> Result<HMat> {
    let shape_ok = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
    if !shape_ok(&mode.re) {
        return Err(Error::config(format!("{key}.re"), format!("must be a {n}x{n} matrix")));
    }
    let zero = vec![vec![0.0; n]; n];
    let im = mode.im.as_ref().unwrap_or(&zero);
    if !shape_ok(im) {
        return Err(Error::config(format!("{key}.im"), format!("must be a {n}x{n} matrix")));
    }
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (mode.re[i][j], im[i][j]);
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::config(key, "amplitudes must be finite"));
            }
            if (a - mode.re[j][i]).abs() > 1e-14 || (b + im[j][i]).abs() > 1e-14 {
                return Err(Error::config(
                    key,
                    "amplitude must be Hermitian (re symmetric, im antisymmetric)",
                ));
            }
            entries.push(Complex64::new(a, b));
        }
    }
    Ok(HMat::from_row_major(n, &entries))
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let key = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<document>".to_string());
            Error::config(key, e.to_string().replace('\n', " "))
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario is serializable")
    }

    /// Checks shapes, Nyquist limits, options, and metric positivity.
    pub fn validate(&self) -> Result<()> {
        if !(self.n == 2 || self.n == 3) {
            return Err(Error::config("n", "must be 2 or 3"));
        }
        let sizes = &self.grid.sizes;
        if sizes.len() != 2 * self.n {
            return Err(Error::config(
                "grid.sizes",
                format!("expected {} axis sizes, found {}", 2 * self.n, sizes.len()),
            ));
        }
        if let Some((a, s)) = sizes.iter().enumerate().find(|(_, &s)| s < 4 || s % 2 != 0) {
            return Err(Error::config(
                "grid.sizes",
                format!("axis {a} has size {s}; sizes must be even and at least 4"),
            ));
        }
        match &self.metric {
            MetricSpec::FlatKahler => {}
            MetricSpec::KahlerPotential { rho } => check_modes("metric.rho", rho, sizes)?,
            MetricSpec::ConformalKahler { v, rho } => {
                check_modes("metric.v", v, sizes)?;
                check_modes("metric.rho", rho, sizes)?;
            }
            MetricSpec::HermitianPerturbed { modes } => {
                for (idx, m) in modes.iter().enumerate() {
                    let key = format!("metric.modes[{idx}]");
                    check_wavevector(&format!("{key}.k"), &m.k, sizes)?;
                    amplitude(&key, m, self.n)?;
                }
            }
        }
        check_modes("f.modes", &self.f.modes, sizes)?;
        if let Some(m) = &self.f.manufactured {
            if !self.f.modes.is_empty() {
                return Err(Error::config("f.modes", "must be empty when f.manufactured is given"));
            }
            check_modes("f.manufactured", m, sizes)?;
        }
        if !self.f.offset.is_finite() {
            return Err(Error::config("f.offset", "must be finite"));
        }
        self.solve_options().validate()?;
        let d = &self.diagnostics;
        if d.p_list.is_empty() || d.p_list.iter().any(|&p| !(p >= 1.0)) {
            return Err(Error::config("diagnostics.p_list", "exponents must be at least 1"));
        }
        if !(d.p0 >= 1.0) {
            return Err(Error::config("diagnostics.p0", "must be at least 1"));
        }
        if matches!(d.moser_levels, Some(l) if l < 3) {
            return Err(Error::config("diagnostics.moser_levels", "must be at least 3"));
        }
        if !(d.ledger_p >= 1.0) {
            return Err(Error::config("diagnostics.ledger_p", "must be at least 1"));
        }
        if d.trace_candidates.is_empty() || d.trace_candidates.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::config("diagnostics.trace_candidates", "must be positive"));
        }
        if !(d.gauduchon_tol > 0.0) {
            return Err(Error::config("diagnostics.gauduchon_tol", "must be positive"));
        }
        let grid = self.build_grid()?;
        let metric = self.build_metric(&grid)?;
        let (ev, point) = metric.min_eigenvalue();
        if !(ev > 0.0) {
            return Err(Error::config(
                "metric",
                format!("not positive definite: eigenvalue {ev:.6e} at grid point {point}"),
            ));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.n, &self.grid.sizes).map_err(|e| Error::config("grid.sizes", e.to_string()))
    }

    pub fn build_metric(&self, grid: &TorusGrid) -> Result<HermitianField> {
        let n = self.n;
        Ok(match &self.metric {
            MetricSpec::FlatKahler => HermitianField::identity(grid),
            MetricSpec::KahlerPotential { rho } => {
                HermitianField::identity(grid).add(&ddbar(&trig_field(grid, rho)))?
            }
            MetricSpec::ConformalKahler { v, rho } => {
                let base = HermitianField::identity(grid).add(&ddbar(&trig_field(grid, rho)))?;
                base.conformal(&trig_field(grid, v))?
            }
            MetricSpec::HermitianPerturbed { modes } => {
                let amps = modes
                    .iter()
                    .enumerate()
                    .map(|(i, m)| amplitude(&format!("metric.modes[{i}]"), m, n))
                    .collect::<Result<Vec<_>>>()?;
                HermitianField::from_fn(grid, |p| {
                    let x = grid.coords(p);
                    let mut g = HMat::identity(n);
                    for (m, a) in modes.iter().zip(&amps) {
                        let t: f64 = m.k.iter().zip(&x).map(|(&k, &xa)| k as f64 * xa).sum();
                        g = g.add(&a.scale((t + m.phase).cos()));
                    }
                    g
                })
            }
        })
    }

    /// Manufactured solution, if the scenario carries one.
    pub fn phi_star(&self, grid: &TorusGrid) -> Option<ScalarField> {
        self.f.manufactured.as_ref().map(|m| trig_field(grid, m))
    }

    pub fn build_f(&self, grid: &TorusGrid, metric: &HermitianField) -> Result<ScalarField> {
        let raw = match self.phi_star(grid) {
            Some(phi) => manufacture(metric, &phi)?,
            None => trig_field(grid, &self.f.modes),
        };
        let normalized = match self.f.normalization {
            Normalization::Raw => raw,
            Normalization::SupZero => raw.shifted(-raw.sup()),
        };
        Ok(normalized.shifted(self.f.offset))
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions::from(&self.solve)
    }

    /// Moser levels, defaulting to the smallest count whose last exponent reaches 512.
    pub fn moser_levels(&self) -> usize {
        self.diagnostics.moser_levels.unwrap_or_else(|| {
            let beta = self.n as f64 / (self.n as f64 - 1.0);
            let mut levels = 0;
            let mut p = self.diagnostics.p0;
            while p < 512.0 - 1e-9 {
                p *= beta;
                levels += 1;
            }
            levels.max(3)
        })
    }
}

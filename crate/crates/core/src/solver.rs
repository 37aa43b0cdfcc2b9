//! Damped Newton-Krylov solver for `(ω + i∂∂̄φ)^n = e^{F+b} ω^n`.
//!
//! Unknowns are a mean-zero `φ` and the constant `b`. The residual is
//! `R = log(det(g + ∂∂̄φ) / det g) − F − b`; its derivative in `(δφ, δb)` is
//! `Δ_{ω_φ} δφ − δb`, the Chern Laplacian of the current metric, so each
//! Newton step solves a bordered linear system
//!
//! ```text
//! [ Δ_{ω_φ}   −1 ] [δφ]   [−R]
//! [ mean(·)    0 ] [δb] = [ 0]
//! ```
//!
//! with GMRES, preconditioned by the exact inverse of the constant-coefficient
//! operator obtained by averaging `g_φ^{-1}` over the grid. The reported `φ`
//! is shifted so that its grid supremum is zero; `b` is unaffected by the shift.

use std::time::Instant;

use num_complex::Complex64;

use crate::calculus::{ddbar, ddbar_from_hat};
use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, ScalarField, TorusGrid};
use crate::hermitian::{HMat, HermitianField};
use crate::krylov::{gmres, GmresOptions};
use crate::spectral::Spectral;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_newton_iters: usize,
    /// Sup-norm target for the residual.
    pub residual_tol: f64,
    /// Relative residual target of each linear solve.
    pub krylov_tol: f64,
    pub krylov_restart: usize,
    pub krylov_max_iters: usize,
    /// Line-search shrink factor in `(0, 1)`.
    pub damping: f64,
    pub min_step: f64,
    /// Smallest eigenvalue of `g_φ` allowed along the path.
    pub positivity_floor: f64,
    /// `> 1` solves the homotopy `t·F` for `t = 1/m, …, 1` from the start.
    pub continuity_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_newton_iters: 50,
            residual_tol: 1e-10,
            krylov_tol: 1e-8,
            krylov_restart: 60,
            krylov_max_iters: 600,
            damping: 0.5,
            min_step: 1e-4,
            positivity_floor: 1e-6,
            continuity_steps: 1,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("residual_tol", self.residual_tol),
            ("krylov_tol", self.krylov_tol),
            ("min_step", self.min_step),
            ("positivity_floor", self.positivity_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::config(format!("solve.{name}"), "must be positive"));
            }
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::config("solve.damping", "must lie in (0, 1)"));
        }
        if self.continuity_steps == 0 {
            return Err(Error::config("solve.continuity_steps", "must be at least 1"));
        }
        if self.max_newton_iters == 0 || self.krylov_restart == 0 || self.krylov_max_iters == 0 {
            return Err(Error::config("solve", "iteration caps must be positive"));
        }
        Ok(())
    }
}

/// One accepted Newton iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Residual sup-norm after the step.
    pub residual: f64,
    pub step: f64,
    pub min_eigenvalue: f64,
    pub krylov_iters: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Solution with `sup φ = 0`.
    pub phi: ScalarField,
    pub b: f64,
    /// Residual sup-norm of the initial iterate followed by one entry per accepted step.
    pub residual_history: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub min_eig_gphi: f64,
    pub newton_iters: usize,
    pub krylov_iters_total: usize,
    pub continuity_stages: usize,
    pub wall_time: f64,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("history is never empty")
    }

    /// `log‖R_{k+1}‖ / log‖R_k‖` over consecutive accepted steps.
    pub fn convergence_orders(&self) -> Vec<f64> {
        self.residual_history
            .windows(2)
            .filter(|w| w[0] > 0.0 && w[1] > 0.0 && w[0] < 1.0)
            .map(|w| w[1].ln() / w[0].ln())
            .collect()
    }
}

/// `g + ∂∂̄φ` with its smallest eigenvalue and the point attaining it.
fn perturbed_metric(phi_ddbar: &HermitianField, metric: &HermitianField) -> (HermitianField, f64, usize) {
    let g = metric.map(|p, m| m.add(&phi_ddbar.at(p)));
    let (ev, point) = g.min_eigenvalue();
    (g, ev, point)
}

fn log_det_ratio(gphi: &HermitianField, metric: &HermitianField) -> Vec<f64> {
    (0..metric.grid().point_count())
        .map(|p| (gphi.at(p).det().re / metric.at(p).det().re).ln())
        .collect()
}

/// `R = log(det(g + ∂∂̄φ)/det g) − F − b`; fails if `g + ∂∂̄φ` is not positive definite.
pub fn ma_residual(phi: &ScalarField, b: f64, f: &ScalarField, metric: &HermitianField) -> Result<ScalarField> {
    phi.grid().check_same(metric.grid())?;
    f.grid().check_same(metric.grid())?;
    let (gphi, ev, point) = perturbed_metric(&ddbar(phi), metric);
    if !(ev > 0.0) {
        return Err(Error::Positivity { point, eigenvalue: ev });
    }
    let ldr = log_det_ratio(&gphi, metric);
    Ok(ScalarField::from_raw(
        metric.grid().clone(),
        ldr.iter().zip(f.values()).map(|(l, fv)| l - fv - b).collect(),
    ))
}

/// Minimum over the grid of the smallest eigenvalue of `g + ∂∂̄φ`.
pub fn positivity_margin(phi: &ScalarField, metric: &HermitianField) -> Result<f64> {
    phi.grid().check_same(metric.grid())?;
    Ok(perturbed_metric(&ddbar(phi), metric).1)
}

/// `F = log(det(g + ∂∂̄φ*)/det g)`, so `(φ*, 0)` solves the equation.
pub fn manufacture(metric: &HermitianField, phi_star: &ScalarField) -> Result<ScalarField> {
    ma_residual(phi_star, 0.0, &ScalarField::zeros(metric.grid()), metric)
}

/// Linearized operator `Δ_{ω_φ}` with its preconditioner, frozen at one iterate.
struct Linearization {
    sp: std::sync::Arc<Spectral>,
    n: usize,
    /// `g_φ^{-1}` per point, row-major.
    ginv: Vec<Complex64>,
    /// Symbol of the averaged constant-coefficient operator.
    precond_symbol: Vec<f64>,
}

impl Linearization {
    fn new(gphi: &HermitianField) -> Result<Self> {
        let grid = gphi.grid();
        let n = grid.n();
        let npts = grid.point_count();
        let mut ginv = Vec::with_capacity(npts * n * n);
        for p in 0..npts {
            let m = gphi.at(p);
            let inv = m.inverse().ok_or(Error::NonpositiveDeterminant {
                point: p,
                value: m.det().re,
            })?;
            for i in 0..n {
                for j in 0..n {
                    ginv.push(inv.get(i, j));
                }
            }
        }
        let mut mean = vec![Complex64::new(0.0, 0.0); n * n];
        for (e, slot) in mean.iter_mut().enumerate() {
            let re: Vec<f64> = (0..npts).map(|p| ginv[p * n * n + e].re).collect();
            let im: Vec<f64> = (0..npts).map(|p| ginv[p * n * n + e].im).collect();
            *slot = Complex64::new(pairwise_sum(&re), pairwise_sum(&im)) / npts as f64;
        }
        let sp = Spectral::for_grid(grid);
        let precond_symbol = (0..npts)
            .map(|m| {
                if m == 0 {
                    0.0
                } else {
                    sp.contracted_symbol(m, &mean).re
                }
            })
            .collect();
        Ok(Self {
            sp,
            n,
            ginv,
            precond_symbol,
        })
    }

    fn laplacian(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let hat = self.sp.forward_real(v);
        let h = ddbar_from_hat(&self.sp, &hat);
        (0..v.len())
            .map(|p| {
                let inv = HMat::from_row_major(n, &self.ginv[p * n * n..(p + 1) * n * n]);
                inv.mul(&h.at(p)).trace().re
            })
            .collect()
    }

    /// Bordered operator on `(δφ, δb)` packed as one vector of length `N + 1`.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let npts = x.len() - 1;
        let s = x[npts];
        let mut out = self.laplacian(&x[..npts]);
        for v in out.iter_mut() {
            *v -= s;
        }
        out.push(pairwise_sum(&x[..npts]) / npts as f64);
        out
    }

    /// Exact inverse of the bordered operator with `Δ_{ω_φ}` replaced by its grid average.
    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let npts = r.len() - 1;
        let t = r[npts];
        let mut hat = self.sp.forward_real(&r[..npts]);
        let mean_r = hat[0].re / npts as f64;
        for (m, c) in hat.iter_mut().enumerate() {
            let s = self.precond_symbol[m];
            *c = if m == 0 || s.abs() < 1e-14 {
                Complex64::new(0.0, 0.0)
            } else {
                *c / s
            };
        }
        self.sp.inverse(&mut hat);
        let mut out: Vec<f64> = hat.iter().map(|c| c.re + t).collect();
        out.push(-mean_r);
        out
    }
}

/// Result of one linearized solve.
#[derive(Debug, Clone)]
pub struct NewtonStep {
    pub delta_phi: ScalarField,
    pub delta_b: f64,
    pub krylov_iters: usize,
    pub relative_residual: f64,
}

fn solve_linearized(gphi: &HermitianField, residual: &ScalarField, opts: &SolveOptions) -> Result<NewtonStep> {
    let grid = gphi.grid();
    let npts = grid.point_count();
    let lin = Linearization::new(gphi)?;
    let mut rhs: Vec<f64> = residual.values().iter().map(|v| -v).collect();
    rhs.push(0.0);
    let run = |restart: usize, max_iters: usize| {
        gmres(
            |x| lin.apply(x),
            |r| lin.precondition(r),
            &rhs,
            GmresOptions {
                tol: opts.krylov_tol,
                restart,
                max_iters,
            },
        )
    };
    let mut out = run(opts.krylov_restart, opts.krylov_max_iters);
    if !out.converged {
        // near-degenerate g_φ: one retry with a longer basis and budget
        let spent = out.iterations;
        out = run(opts.krylov_restart * 4, opts.krylov_max_iters * 10);
        out.iterations += spent;
    }
    if !out.converged {
        return Err(Error::KrylovDivergence {
            residual: out.relative_residual,
            iterations: out.iterations,
        });
    }
    let delta_b = out.x[npts];
    let mut x = out.x;
    x.truncate(npts);
    Ok(NewtonStep {
        delta_phi: ScalarField::from_raw(grid.clone(), x),
        delta_b,
        krylov_iters: out.iterations,
        relative_residual: out.relative_residual,
    })
}

/// Solves `Δ_{ω_φ} δφ − δb = −R` with `mean(δφ) = 0` at the iterate `(φ, b)`.
pub fn newton_step(
    phi: &ScalarField,
    b: f64,
    f: &ScalarField,
    metric: &HermitianField,
    opts: &SolveOptions,
) -> Result<NewtonStep> {
    let residual = ma_residual(phi, b, f, metric)?;
    let (gphi, _, _) = perturbed_metric(&ddbar(phi), metric);
    solve_linearized(&gphi, &residual, opts)
}

/// Internal state of a Newton run on one right-hand side.
struct Iterate {
    phi: ScalarField,
    phi_ddbar: HermitianField,
    b: f64,
    residual: ScalarField,
    residual_norm: f64,
    min_eig: f64,
}

impl Iterate {
    fn new(phi: ScalarField, b: f64, f: &ScalarField, metric: &HermitianField) -> Result<Self> {
        let phi_ddbar = ddbar(&phi);
        let (gphi, min_eig, point) = perturbed_metric(&phi_ddbar, metric);
        if !(min_eig > 0.0) {
            return Err(Error::Positivity {
                point,
                eigenvalue: min_eig,
            });
        }
        let residual = residual_from(&gphi, metric, f, b);
        let residual_norm = residual.sup_norm();
        Ok(Self {
            phi,
            phi_ddbar,
            b,
            residual,
            residual_norm,
            min_eig,
        })
    }
}

fn residual_from(gphi: &HermitianField, metric: &HermitianField, f: &ScalarField, b: f64) -> ScalarField {
    let ldr = log_det_ratio(gphi, metric);
    ScalarField::from_raw(
        metric.grid().clone(),
        ldr.iter().zip(f.values()).map(|(l, fv)| l - fv - b).collect(),
    )
}

enum StageOutcome {
    Converged,
    Stagnated,
}

struct Trace {
    residual_history: Vec<f64>,
    iterations: Vec<IterationRecord>,
    krylov_total: usize,
}

fn newton_stage(
    state: &mut Iterate,
    f: &ScalarField,
    metric: &HermitianField,
    opts: &SolveOptions,
    trace: &mut Trace,
) -> StageOutcome {
    for _ in 0..opts.max_newton_iters {
        // the first step is always taken, so a converged start is confirmed by one linear solve
        if state.residual_norm <= opts.residual_tol && !trace.iterations.is_empty() {
            return StageOutcome::Converged;
        }
        let (gphi, _, _) = perturbed_metric(&state.phi_ddbar, metric);
        let step = match solve_linearized(&gphi, &state.residual, opts) {
            Ok(step) => step,
            Err(_) => return StageOutcome::Stagnated,
        };
        trace.krylov_total += step.krylov_iters;
        let dd = ddbar(&step.delta_phi);
        let mut s = 1.0;
        let accepted = loop {
            if s < opts.min_step {
                break None;
            }
            let trial_dd = state
                .phi_ddbar
                .map(|p, m| m.add(&dd.at(p).scale(s)));
            let (gtrial, ev, _) = perturbed_metric(&trial_dd, metric);
            if ev >= opts.positivity_floor {
                let b_trial = state.b + s * step.delta_b;
                let r = residual_from(&gtrial, metric, f, b_trial);
                let rn = r.sup_norm();
                if rn < state.residual_norm || rn <= opts.residual_tol {
                    let phi = state
                        .phi
                        .zip_with(&step.delta_phi, |a, d| a + s * d)
                        .expect("same grid");
                    break Some(Iterate {
                        phi,
                        phi_ddbar: trial_dd,
                        b: b_trial,
                        residual: r,
                        residual_norm: rn,
                        min_eig: ev,
                    });
                }
            }
            s *= opts.damping;
        };
        match accepted {
            Some(next) => {
                *state = next;
                trace.residual_history.push(state.residual_norm);
                trace.iterations.push(IterationRecord {
                    iter: trace.iterations.len() + 1,
                    residual: state.residual_norm,
                    step: s,
                    min_eigenvalue: state.min_eig,
                    krylov_iters: step.krylov_iters,
                });
            }
            None => return StageOutcome::Stagnated,
        }
    }
    if state.residual_norm <= opts.residual_tol {
        StageOutcome::Converged
    } else {
        StageOutcome::Stagnated
    }
}

/// Solves for `(φ, b)` starting from `φ = 0`.
pub fn solve(metric: &HermitianField, f: &ScalarField, opts: &SolveOptions) -> Result<SolveReport> {
    solve_from(metric, f, opts, None)
}

/// Solves for `(φ, b)` from an optional admissible initial guess.
pub fn solve_from(
    metric: &HermitianField,
    f: &ScalarField,
    opts: &SolveOptions,
    initial: Option<&ScalarField>,
) -> Result<SolveReport> {
    opts.validate()?;
    f.grid().check_same(metric.grid())?;
    metric.require_positive(0.0)?;
    let start = Instant::now();
    let grid = metric.grid().clone();
    let phi0 = match initial {
        Some(g) => {
            g.grid().check_same(&grid)?;
            g.shifted(-g.mean())
        }
        None => ScalarField::zeros(&grid),
    };

    let mut schedules = Vec::new();
    if opts.continuity_steps > 1 {
        schedules.push(opts.continuity_steps);
    } else {
        schedules.push(1);
        schedules.push(4);
        schedules.push(16);
    }

    let mut best: Option<(f64, usize)> = None;
    for stages in schedules {
        let mut trace = Trace {
            residual_history: Vec::new(),
            iterations: Vec::new(),
            krylov_total: 0,
        };
        match run_homotopy(&grid, metric, f, opts, &phi0, stages, &mut trace) {
            Ok(state) => {
                let sup = state.phi.sup();
                return Ok(SolveReport {
                    phi: state.phi.shifted(-sup),
                    b: state.b,
                    residual_history: trace.residual_history,
                    newton_iters: trace.iterations.len(),
                    iterations: trace.iterations,
                    min_eig_gphi: state.min_eig,
                    krylov_iters_total: trace.krylov_total,
                    continuity_stages: stages,
                    wall_time: start.elapsed().as_secs_f64(),
                });
            }
            Err(best_residual) => {
                let iters = trace.iterations.len();
                if best.is_none_or(|(r, _)| best_residual < r) {
                    best = Some((best_residual, iters));
                }
            }
        }
    }
    let (best_residual, iterations) = best.unwrap_or((f64::INFINITY, 0));
    Err(Error::NewtonDivergence {
        best_residual,
        iterations,
    })
}

fn run_homotopy(
    grid: &TorusGrid,
    metric: &HermitianField,
    f: &ScalarField,
    opts: &SolveOptions,
    phi0: &ScalarField,
    stages: usize,
    trace: &mut Trace,
) -> std::result::Result<Iterate, f64> {
    let mut phi = phi0.clone();
    let mut b = 0.0;
    let mut last = f64::INFINITY;
    for stage in 1..=stages {
        let t = stage as f64 / stages as f64;
        let ft = if stages == 1 { f.clone() } else { f.scaled(t) };
        let mut state = Iterate::new(phi.clone(), b, &ft, metric).map_err(|_| last)?;
        if stage == 1 {
            trace.residual_history.push(state.residual_norm);
        }
        let outcome = newton_stage(&mut state, &ft, metric, opts, trace);
        last = state.residual_norm;
        match outcome {
            StageOutcome::Converged => {
                if stage == stages {
                    debug_assert_eq!(state.phi.grid(), grid);
                    return Ok(state);
                }
                phi = state.phi;
                b = state.b;
            }
            StageOutcome::Stagnated => return Err(last),
        }
    }
    Err(last)
}

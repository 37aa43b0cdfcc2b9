//! Gauduchon conformal factor and metric classification.
//!
//! The Gauduchon operator `P(w) = [i∂∂̄(w · ω^{n−1})] / ω_flat^n` is linear in
//! `w` and its range lies in the mean-zero functions, so it has a kernel. For
//! a Hermitian metric on a compact surface or threefold that kernel is
//! spanned by a single positive function `w`, and `ω_G = w^{1/(n−1)} ω` is
//! the Gauduchon metric in the conformal class of `ω`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus::FormField;
use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, pairwise_sum_by, ScalarField};
use crate::hermitian::{HMat, HermitianField};
use crate::krylov::{gmres, GmresOptions};
use crate::spectral::Spectral;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Matrix-free action of `P` for a fixed metric.
pub struct GauduchonOperator {
    power: FormField,
    /// Symbol of `P` for the grid-averaged constant metric.
    precond_symbol: Vec<f64>,
    sp: std::sync::Arc<Spectral>,
}

impl GauduchonOperator {
    pub fn new(metric: &HermitianField) -> Result<Self> {
        let grid = metric.grid();
        let n = grid.n();
        let npts = grid.point_count();
        let power = FormField::metric_power(metric, n - 1)?;
        let mut mean = HMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let e = metric.entry(i, j);
                let re = pairwise_sum_by(npts, |p| e[p].re) / npts as f64;
                let im = pairwise_sum_by(npts, |p| e[p].im) / npts as f64;
                mean.set(i, j, Complex64::new(re, im));
            }
        }
        let inv = mean
            .inverse()
            .ok_or_else(|| Error::InvalidArgument("averaged metric is singular".into()))?;
        let coeff: Vec<Complex64> = (0..n * n).map(|e| inv.get(e / n, e % n)).collect();
        let scale = mean.det().re / n as f64;
        let sp = Spectral::for_grid(grid);
        let precond_symbol = (0..npts)
            .map(|m| {
                if m == 0 {
                    0.0
                } else {
                    scale * sp.contracted_symbol(m, &coeff).re
                }
            })
            .collect();
        Ok(Self {
            power,
            precond_symbol,
            sp,
        })
    }

    pub fn apply(&self, w: &ScalarField) -> Result<ScalarField> {
        let top = self.power.scale_by(w)?.del_delbar()?.top_ratio()?;
        Ok(ScalarField::from_raw(
            w.grid().clone(),
            top.iter().map(|c| (I * c).re).collect(),
        ))
    }

    fn apply_raw(&self, w: &[f64]) -> Vec<f64> {
        let grid = self.sp.grid().clone();
        let field = ScalarField::from_raw(grid, w.to_vec());
        self.apply(&field).expect("grid fixed at construction").into_values()
    }

    /// Bordered operator `(w, s) ↦ (P w + s, ⟨weights, w⟩)`.
    fn bordered(&self, x: &[f64], weights: &[f64]) -> Vec<f64> {
        let npts = x.len() - 1;
        let s = x[npts];
        let mut out = self.apply_raw(&x[..npts]);
        for v in out.iter_mut() {
            *v += s;
        }
        out.push(pairwise_sum_by(npts, |p| weights[p] * x[p]) / npts as f64);
        out
    }

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
        out.push(mean_r);
        out
    }
}

/// `P(w)` for a positive weight `w`.
pub fn gauduchon_defect(w: &ScalarField, metric: &HermitianField) -> Result<ScalarField> {
    w.grid().check_same(metric.grid())?;
    if let Some(p) = w.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "gauduchon weight must be positive, found {} at point {p}",
            w.values()[p]
        )));
    }
    GauduchonOperator::new(metric)?.apply(w)
}

#[derive(Debug, Clone, Serialize)]
pub struct GauduchonResult {
    /// Conformal factor with `sup u = 0`; `ω_G = e^u ω`.
    #[serde(skip)]
    pub u: ScalarField,
    /// `sup |P(e^{(n−1)u})|`.
    pub residual: f64,
    pub iterations: usize,
}

fn kernel_vector(op: &GauduchonOperator, weights: &[f64], tol: f64, max_rounds: usize) -> Result<(Vec<f64>, usize, f64)> {
    let npts = weights.len();
    let mut w = vec![1.0; npts];
    let norm_w = pairwise_sum_by(npts, |p| weights[p]) / npts as f64;
    for v in w.iter_mut() {
        *v /= norm_w;
    }
    let mut rounds = 0;
    let mut last = f64::INFINITY;
    loop {
        let pw = op.apply_raw(&w);
        let wmax = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let defect = pw.iter().fold(0.0f64, |m, v| m.max(v.abs())) / wmax;
        last = last.min(defect);
        if defect <= tol {
            return Ok((w, rounds, defect));
        }
        if rounds >= max_rounds {
            return Err(Error::KrylovDivergence {
                residual: defect,
                iterations: rounds,
            });
        }
        rounds += 1;
        let mut rhs: Vec<f64> = pw.iter().map(|v| -v).collect();
        rhs.push(0.0);
        let out = gmres(
            |x| op.bordered(x, weights),
            |r| op.precondition(r),
            &rhs,
            GmresOptions {
                tol: 1e-11,
                restart: 80,
                max_iters: 800,
            },
        );
        if !out.converged && out.relative_residual > 1e-6 {
            return Err(Error::KernelDegenerate(format!(
                "bordered kernel system is singular or ill-conditioned (relative residual {:.3e})",
                out.relative_residual
            )));
        }
        for (wi, d) in w.iter_mut().zip(&out.x) {
            *wi += d;
        }
        if let Some(p) = w.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::KernelDegenerate(format!(
                "kernel vector changed sign at point {p}"
            )));
        }
    }
}

/// Finds `u` with `sup u = 0` such that `e^u ω` is Gauduchon.
///
/// The kernel is computed twice, under the mean normalization and under a
/// seeded random positive weighting; disagreement after rescaling means the
/// discrete kernel is not one-dimensional.
pub fn solve_gauduchon(metric: &HermitianField, tol: f64) -> Result<GauduchonResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    metric.require_positive(0.0)?;
    let grid = metric.grid();
    let n = grid.n();
    let npts = grid.point_count();
    let op = GauduchonOperator::new(metric)?;

    let ones = vec![1.0; npts];
    let (w, iterations, _) = kernel_vector(&op, &ones, tol, 8)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x6761_7564);
    let weights: Vec<f64> = (0..npts).map(|_| rng.random_range(0.5..1.5)).collect();
    let (w2, _, _) = kernel_vector(&op, &weights, tol, 8)?;
    let scale = pairwise_sum(&w2) / pairwise_sum(&w);
    let mismatch = w
        .iter()
        .zip(&w2)
        .fold(0.0f64, |m, (a, b)| m.max((a * scale - b).abs()))
        / w2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if mismatch > 1e-6 {
        return Err(Error::KernelDegenerate(format!(
            "two normalizations give independent kernel vectors (mismatch {mismatch:.3e})"
        )));
    }

    let wmax = w.iter().fold(0.0f64, |m, v| m.max(*v));
    let logs: Vec<f64> = w.iter().map(|v| (v / wmax).ln() / (n - 1) as f64).collect();
    let raw = ScalarField::from_raw(grid.clone(), logs);
    let u = raw.shifted(-raw.sup());
    let weight = u.map(|v| ((n - 1) as f64 * v).exp());
    let residual = op.apply(&weight)?.sup_norm();
    Ok(GauduchonResult {
        u,
        residual,
        iterations,
    })
}

/// Sup-norms of the closedness conditions of a metric and the derived flags.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MetricClass {
    pub d_omega: f64,
    pub d_omega_n1: f64,
    pub ddbar_omega: f64,
    pub ddbar_omega2: f64,
    pub ddbar_omega_n1: f64,
    pub threshold: f64,
    pub kahler: bool,
    pub balanced: bool,
    pub gauduchon: bool,
    /// `∂∂̄ω = 0` and `∂∂̄ω² = 0`.
    pub pluriclosed_pair: bool,
}

pub const CLASSIFY_THRESHOLD: f64 = 1e-10;

pub fn classify_metric(metric: &HermitianField) -> Result<MetricClass> {
    let n = metric.n();
    let omega = FormField::metric_power(metric, 1)?;
    let d_omega = omega.del()?.sup_norm();
    let top_minus = FormField::metric_power(metric, n - 1)?;
    let d_omega_n1 = top_minus.del()?.sup_norm();
    let ddbar_omega = omega.del_delbar()?.sup_norm();
    // ω² is top degree when n = 2, so ∂∂̄ω² vanishes identically
    let ddbar_omega2 = if n >= 3 {
        FormField::metric_power(metric, 2)?.del_delbar()?.sup_norm()
    } else {
        0.0
    };
    let ddbar_omega_n1 = top_minus.del_delbar()?.sup_norm();
    let t = CLASSIFY_THRESHOLD;
    Ok(MetricClass {
        d_omega,
        d_omega_n1,
        ddbar_omega,
        ddbar_omega2,
        ddbar_omega_n1,
        threshold: t,
        kahler: d_omega <= t,
        balanced: d_omega_n1 <= t,
        gauduchon: ddbar_omega_n1 <= t,
        pluriclosed_pair: ddbar_omega <= t && ddbar_omega2 <= t,
    })
}

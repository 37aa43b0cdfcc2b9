//! Command implementations behind the `hma` binary.
//!
//! Each command returns `Result<_, CliError>`; the error carries a class that
//! fixes both the process exit code and the `error[class]` prefix of the
//! single diagnostic line printed on failure.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    b_formula_check, induction_ledger, lemma1_ratio, measure_bound_check, moser_profile, poincare_check,
    pointwise_ineq_sample, pointwise_validate, psi_checks, ricci_identity_check, sublevel_certificate,
    trace_estimate, volume_measure, PointwiseSample, PointwiseValidation,
};
use crate::error::Error;
use crate::fieldfile::{read_field, write_field, FieldData};
use crate::gauduchon::{classify_metric, solve_gauduchon, MetricClass};
use crate::grid::{ScalarField, TorusGrid};
use crate::hermitian::HermitianField;
use crate::scenario::Scenario;
use crate::solver::{positivity_margin, solve, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Solver,
    Io,
    Check,
    Gauduchon,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Solver => 3,
            ErrorClass::Io => 4,
            ErrorClass::Check => 5,
            ErrorClass::Gauduchon => 6,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Solver => "solver",
            ErrorClass::Io => "io",
            ErrorClass::Check => "check",
            ErrorClass::Gauduchon => "gauduchon",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.class.label(), self.message.replace('\n', " "))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let class = match &e {
            Error::Config { .. } => ErrorClass::Config,
            Error::Io(_) | Error::FieldFormat(_) => ErrorClass::Io,
            Error::KernelDegenerate(_) => ErrorClass::Gauduchon,
            _ => ErrorClass::Solver,
        };
        CliError::new(class, e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::new(ErrorClass::Io, format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Inputs of one scenario, built and validated.
pub struct Problem {
    pub scenario: Scenario,
    pub grid: TorusGrid,
    pub metric: HermitianField,
    pub f: ScalarField,
}

impl Problem {
    pub fn from_scenario(scenario: Scenario) -> CliResult<Self> {
        let grid = scenario.build_grid()?;
        let metric = scenario.build_metric(&grid)?;
        let f = scenario.build_f(&grid, &metric)?;
        Ok(Self {
            scenario,
            grid,
            metric,
            f,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_scenario(Scenario::from_toml_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub name: String,
    pub n: usize,
    pub grid_sizes: Vec<usize>,
    pub b: f64,
    pub final_residual: f64,
    pub newton_iters: usize,
    pub krylov_iters_total: usize,
    pub continuity_stages: usize,
    pub min_eigenvalue: f64,
    pub positivity_margin: f64,
    pub phi_sup: f64,
    pub phi_inf: f64,
    pub wall_time_seconds: f64,
    pub residual_history: Vec<f64>,
    /// `‖φ − (φ* − sup φ*)‖_∞` for manufactured scenarios.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub manufactured_error: Option<f64>,
}

pub struct SolveOutcome {
    pub report: SolveReport,
    pub summary: SolveSummary,
}

pub const PHI_FILE: &str = "phi.hmaf";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const SCENARIO_FILE: &str = "scenario.toml";

/// Solves a scenario in memory.
pub fn solve_problem(problem: &Problem, residual_tol: Option<f64>) -> CliResult<SolveOutcome> {
    let mut opts = problem.scenario.solve_options();
    if let Some(t) = residual_tol {
        opts.residual_tol = t;
        opts.validate()?;
    }
    let report = solve(&problem.metric, &problem.f, &opts)?;
    let manufactured_error = match problem.scenario.phi_star(&problem.grid) {
        Some(star) => Some(report.phi.max_abs_diff(&star.shifted(-star.sup()))?),
        None => None,
    };
    let summary = SolveSummary {
        name: problem.scenario.name.clone(),
        n: problem.grid.n(),
        grid_sizes: problem.grid.sizes().to_vec(),
        b: report.b,
        final_residual: report.final_residual(),
        newton_iters: report.newton_iters,
        krylov_iters_total: report.krylov_iters_total,
        continuity_stages: report.continuity_stages,
        min_eigenvalue: report.min_eig_gphi,
        positivity_margin: positivity_margin(&report.phi, &problem.metric)?,
        phi_sup: report.phi.sup(),
        phi_inf: report.phi.inf(),
        wall_time_seconds: report.wall_time,
        residual_history: report.residual_history.clone(),
        manufactured_error,
    };
    Ok(SolveOutcome { report, summary })
}

fn iterations_csv(report: &SolveReport) -> String {
    let mut s = String::from("iter,residual,step,min_eigenvalue,krylov_iters\n");
    for r in &report.iterations {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iter,
            fmt_f64(r.residual),
            fmt_f64(r.step),
            fmt_f64(r.min_eigenvalue),
            r.krylov_iters
        ));
    }
    s
}

/// `solve`: writes `phi.hmaf`, `summary.toml`, `iterations.csv`, and `scenario.toml`.
pub fn run_solve(config: &Path, out: &Path, residual_tol: Option<f64>) -> CliResult<SolveSummary> {
    let problem = Problem::load(config)?;
    let outcome = solve_problem(&problem, residual_tol)?;
    ensure_dir(out)?;
    let phi_path = out.join(PHI_FILE);
    write_field(&phi_path, &FieldData::Real(outcome.report.phi.clone())).map_err(|e| io_err(&phi_path, e))?;
    let summary_text = toml::to_string(&outcome.summary).expect("summary is serializable");
    write_text(&out.join(SUMMARY_FILE), &summary_text)?;
    write_text(&out.join(ITERATIONS_FILE), &iterations_csv(&outcome.report))?;
    write_text(&out.join(SCENARIO_FILE), &problem.scenario.to_toml_string())?;
    Ok(outcome.summary)
}

/// Loaded solution directory.
pub struct Solution {
    pub phi: ScalarField,
    pub summary: SolveSummary,
}

pub fn load_solution(dir: &Path) -> CliResult<Solution> {
    let phi_path = dir.join(PHI_FILE);
    if !phi_path.exists() {
        return Err(CliError::new(
            ErrorClass::Io,
            format!("missing solution file {}", phi_path.display()),
        ));
    }
    let phi = read_field(&phi_path)
        .and_then(FieldData::into_real)
        .map_err(|e| io_err(&phi_path, e))?;
    let summary_path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&summary_path).map_err(|e| io_err(&summary_path, e))?;
    let summary: SolveSummary = toml::from_str(&text).map_err(|e| io_err(&summary_path, e.message()))?;
    Ok(Solution { phi, summary })
}

pub const CHECK_NAMES: [&str; 11] = [
    "classify",
    "lemma1",
    "moser",
    "measure_bound",
    "sublevel",
    "trace",
    "induction",
    "psi",
    "poincare",
    "ricci_identity",
    "b_formula",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    /// Failing a theorem-backed check makes `diagnose` exit nonzero.
    pub theorem_backed: bool,
    pub constants: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub samples: usize,
}

impl CheckRecord {
    fn empirical(name: &str, samples: usize) -> Self {
        Self {
            name: name.to_string(),
            pass: true,
            theorem_backed: false,
            constants: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            samples,
        }
    }

    fn constant(mut self, key: impl Into<String>, v: f64) -> Self {
        self.constants.insert(key.into(), v);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub scenario: String,
    pub checks: Vec<CheckRecord>,
}

impl DiagnosticsReport {
    pub fn failed(&self) -> Vec<&CheckRecord> {
        self.checks.iter().filter(|c| c.theorem_backed && !c.pass).collect()
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report is serializable")
    }

    pub fn to_json_lines(&self) -> String {
        self.checks
            .iter()
            .map(|c| serde_json::to_string(c).expect("record is serializable") + "\n")
            .collect()
    }
}

/// Parses a comma-separated check filter; `None` enables every check.
pub fn parse_checks(filter: Option<&str>) -> CliResult<Vec<&'static str>> {
    let Some(text) = filter else {
        return Ok(CHECK_NAMES.to_vec());
    };
    let mut out = Vec::new();
    for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let known = CHECK_NAMES
            .iter()
            .find(|&&c| c == name)
            .ok_or_else(|| CliError::new(ErrorClass::Config, format!("unknown check `{name}`")))?;
        if !out.contains(known) {
            out.push(*known);
        }
    }
    if out.is_empty() {
        return Err(CliError::new(ErrorClass::Config, "empty check filter"));
    }
    Ok(out)
}

/// Runs the enabled checks on a solution in memory.
pub fn diagnose_solution(problem: &Problem, phi: &ScalarField, b: f64, checks: &[&str]) -> CliResult<DiagnosticsReport> {
    let sc = &problem.scenario;
    let d = &sc.diagnostics;
    let metric = &problem.metric;
    let npts = problem.grid.point_count();
    let mut class: Option<MetricClass> = None;
    let mut classify = |metric: &HermitianField| -> CliResult<MetricClass> {
        if class.is_none() {
            class = Some(classify_metric(metric)?);
        }
        Ok(class.clone().expect("set above"))
    };
    let mut gauduchon_u: Option<ScalarField> = None;
    let mut records = Vec::with_capacity(checks.len());
    for &name in checks {
        let rec = match name {
            "classify" => {
                let c = classify(metric)?;
                CheckRecord::empirical(name, npts)
                    .constant("d_omega", c.d_omega)
                    .constant("d_omega_n1", c.d_omega_n1)
                    .constant("ddbar_omega", c.ddbar_omega)
                    .constant("ddbar_omega2", c.ddbar_omega2)
                    .constant("ddbar_omega_n1", c.ddbar_omega_n1)
                    .constant("kahler", c.kahler as u8 as f64)
                    .constant("balanced", c.balanced as u8 as f64)
                    .constant("gauduchon", c.gauduchon as u8 as f64)
                    .constant("pluriclosed_pair", c.pluriclosed_pair as u8 as f64)
            }
            "lemma1" => {
                let r = lemma1_ratio(phi, metric, &d.p_list)?;
                let mut rec = CheckRecord::empirical(name, npts)
                    .constant("empirical_c", r.empirical_c)
                    .constant("max_route_gap", r.max_route_gap);
                for row in &r.rows {
                    rec = rec
                        .constant(format!("q_p{}", row.p), row.ratio)
                        .constant(format!("direct_gap_p{}", row.p), row.direct_gap);
                }
                rec
            }
            "moser" => {
                let m = moser_profile(phi, metric, d.p0, sc.moser_levels())?;
                let mut rec = CheckRecord::empirical(name, npts)
                    .constant("fitted_c", m.fitted_c)
                    .constant("beta", m.beta)
                    .constant("sup_value", m.sup_value)
                    .constant("iterated_bound", m.iterated_bound)
                    .constant("observed_ratio", m.observed_ratio)
                    .constant("bound_holds", m.bound_holds as u8 as f64)
                    .constant("nondecreasing", m.nondecreasing as u8 as f64);
                for (p, v) in m.p_list.iter().zip(&m.norms) {
                    rec = rec.constant(format!("norm_p{p}"), *v);
                }
                rec
            }
            "measure_bound" => {
                let r = measure_bound_check(&phi.scaled(d.p0), &volume_measure(metric)?)?;
                let mut rec = CheckRecord::empirical(name, npts)
                    .constant("c1", r.c1)
                    .constant("sublevel", r.sublevel)
                    .constant("bound", r.bound);
                rec.theorem_backed = true;
                rec.pass = r.pass;
                rec
            }
            "sublevel" => {
                let c = sublevel_certificate(phi, metric, d.p0)?;
                CheckRecord::empirical(name, npts)
                    .constant("p0", c.p0)
                    .constant("c", c.c)
                    .constant("delta", c.delta)
                    .constant("delta_bound", c.delta_bound)
            }
            "trace" => {
                let t = trace_estimate(phi, metric, &d.trace_candidates, d.trace_ceiling)?;
                let mut rec = CheckRecord::empirical(name, npts).constant("trace_sup", t.trace_sup);
                for (a, c) in &t.pairs {
                    rec = rec.constant(format!("c_a{a}"), *c);
                }
                rec.tolerances.insert("ceiling".into(), t.ceiling);
                rec.constant("within_ceiling", t.pass as u8 as f64)
            }
            "induction" => {
                let l = induction_ledger(phi, metric, d.ledger_p)?;
                let mut rec = CheckRecord::empirical(name, npts)
                    .constant("p", l.p)
                    .constant("c_n", l.c_n)
                    .constant("alpha_sum", l.alpha_sum)
                    .constant("log_scale", l.log_scale)
                    .constant("min_integrand", l.min_integrand);
                for (k, (i, g)) in l.i.iter().zip(&l.g).enumerate() {
                    rec = rec.constant(format!("i{k}"), *i).constant(format!("g{k}"), *g);
                }
                rec
            }
            "psi" | "poincare" => {
                if gauduchon_u.is_none() {
                    gauduchon_u = Some(solve_gauduchon(metric, d.gauduchon_tol)?.u);
                }
                let u = gauduchon_u.as_ref().expect("set above");
                if name == "psi" {
                    let r = psi_checks(phi, metric, u)?;
                    let mut rec = CheckRecord::empirical(name, npts)
                        .constant("c0", r.c0)
                        .constant("c1", r.c1)
                        .constant("c2", r.c2)
                        .constant("sup_psi", r.sup_psi)
                        .constant("l1_psi", r.l1_psi)
                        .constant("conformal_gap", r.conformal_gap);
                    for row in &r.rows {
                        rec = rec.constant(format!("c1_p{}", row.p), row.c1);
                    }
                    rec
                } else {
                    let psi = phi.shifted(-phi.inf());
                    let r = poincare_check(&psi, &metric.conformal(u)?)?;
                    CheckRecord::empirical(name, npts)
                        .constant("lhs", r.lhs)
                        .constant("rhs", r.rhs)
                        .constant("ratio", r.ratio)
                }
            }
            "ricci_identity" => {
                let res = ricci_identity_check(phi, &problem.f, metric)?;
                let tol = 10.0 * sc.solve.residual_tol;
                let mut rec = CheckRecord::empirical(name, npts).constant("residual", res);
                rec.theorem_backed = true;
                rec.pass = res <= tol;
                rec.tolerances.insert("residual".into(), tol);
                rec
            }
            "b_formula" => {
                let c = classify(metric)?;
                let r = b_formula_check(metric, &problem.f, b, c.pluriclosed_pair)?;
                let tol = 1e-8;
                let mut rec = CheckRecord::empirical(name, npts)
                    .constant("predicted", r.predicted)
                    .constant("b", r.b)
                    .constant("deviation", r.deviation)
                    .constant("condition_holds", r.condition_holds as u8 as f64);
                rec.theorem_backed = true;
                rec.pass = !r.condition_holds || r.deviation <= tol;
                rec.tolerances.insert("deviation".into(), tol);
                rec
            }
            other => return Err(CliError::new(ErrorClass::Config, format!("unknown check `{other}`"))),
        };
        records.push(rec);
    }
    Ok(DiagnosticsReport {
        scenario: sc.name.clone(),
        checks: records,
    })
}

pub const DIAGNOSTICS_TOML: &str = "diagnostics.toml";
pub const DIAGNOSTICS_JSONL: &str = "diagnostics.jsonl";

/// `diagnose`: writes the report and fails with the check class if a theorem-backed check fails.
pub fn run_diagnose(config: &Path, solution: &Path, out: Option<&Path>, checks: Option<&str>) -> CliResult<DiagnosticsReport> {
    let names = parse_checks(checks)?;
    let problem = Problem::load(config)?;
    let sol = load_solution(solution)?;
    if sol.phi.grid() != &problem.grid {
        return Err(CliError::new(
            ErrorClass::Config,
            "solution grid does not match the scenario grid",
        ));
    }
    let report = diagnose_solution(&problem, &sol.phi, sol.summary.b, &names)?;
    let out = out.unwrap_or(solution);
    ensure_dir(out)?;
    write_text(&out.join(DIAGNOSTICS_TOML), &report.to_toml())?;
    write_text(&out.join(DIAGNOSTICS_JSONL), &report.to_json_lines())?;
    let failed = report.failed();
    if !failed.is_empty() {
        let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
        return Err(CliError::new(
            ErrorClass::Check,
            format!("theorem-backed checks failed: {}", names.join(",")),
        ));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GauduchonSummary {
    pub name: String,
    pub residual: f64,
    pub iterations: usize,
    pub u_inf: f64,
    pub u_sup_norm: f64,
    pub classification: MetricClass,
}

pub const U_FILE: &str = "u.hmaf";
pub const GAUDUCHON_FILE: &str = "gauduchon.toml";

/// `gauduchon`: writes `u.hmaf` and `gauduchon.toml`.
pub fn run_gauduchon(config: &Path, out: &Path, tol: Option<f64>) -> CliResult<GauduchonSummary> {
    let problem = Problem::load(config)?;
    let tol = tol.unwrap_or(problem.scenario.diagnostics.gauduchon_tol);
    let res = solve_gauduchon(&problem.metric, tol)?;
    let summary = GauduchonSummary {
        name: problem.scenario.name.clone(),
        residual: res.residual,
        iterations: res.iterations,
        u_inf: res.u.inf(),
        u_sup_norm: res.u.sup_norm(),
        classification: classify_metric(&problem.metric)?,
    };
    ensure_dir(out)?;
    let u_path = out.join(U_FILE);
    write_field(&u_path, &FieldData::Real(res.u)).map_err(|e| io_err(&u_path, e))?;
    write_text(&out.join(GAUDUCHON_FILE), &toml::to_string(&summary).expect("serializable"))?;
    Ok(summary)
}

/// Parses `slice:x2=0,x3=0` into `(free axes, fixed (axis, index) pairs)`.
pub fn parse_slice(spec: &str, grid: &TorusGrid) -> CliResult<(Vec<usize>, Vec<(usize, usize)>)> {
    let bad = |msg: String| CliError::new(ErrorClass::Config, format!("slice `{spec}`: {msg}"));
    let mut fixed = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (lhs, rhs) = part.split_once('=').ok_or_else(|| bad(format!("`{part}` is not axis=index")))?;
        let axis: usize = lhs
            .strip_prefix('x')
            .and_then(|a| a.parse().ok())
            .ok_or_else(|| bad(format!("`{lhs}` is not an axis name like x2")))?;
        let index: usize = rhs.parse().map_err(|_| bad(format!("`{rhs}` is not a grid index")))?;
        if axis >= grid.axis_count() || index >= grid.sizes()[axis] {
            return Err(bad(format!("{part} is outside the grid")));
        }
        if fixed.iter().any(|&(a, _)| a == axis) {
            return Err(bad(format!("axis x{axis} fixed twice")));
        }
        fixed.push((axis, index));
    }
    let free: Vec<usize> = (0..grid.axis_count())
        .filter(|a| !fixed.iter().any(|&(f, _)| f == *a))
        .collect();
    if free.len() != 2 {
        return Err(bad(format!("must leave exactly two free axes, leaves {}", free.len())));
    }
    Ok((free, fixed))
}

/// CSV of `φ` over two free axes: `i_a,i_b,x_a,x_b,phi`.
pub fn slice_csv(phi: &ScalarField, free: &[usize], fixed: &[(usize, usize)]) -> String {
    let grid = phi.grid();
    let (a, b) = (free[0], free[1]);
    let mut s = format!("i{a},i{b},x{a},x{b},phi\n");
    let mut multi = vec![0usize; grid.axis_count()];
    for &(axis, idx) in fixed {
        multi[axis] = idx;
    }
    let h = |axis: usize| grid.period() / grid.sizes()[axis] as f64;
    for ia in 0..grid.sizes()[a] {
        for ib in 0..grid.sizes()[b] {
            multi[a] = ia;
            multi[b] = ib;
            let v = phi.values()[grid.flat_index(&multi)];
            s.push_str(&format!(
                "{ia},{ib},{},{},{}\n",
                fmt_f64(ia as f64 * h(a)),
                fmt_f64(ib as f64 * h(b)),
                fmt_f64(v)
            ));
        }
    }
    s
}

/// `plotdata`: writes one CSV and returns its path.
pub fn emit_plotdata(solution: &Path, kind: &str, out: Option<&Path>) -> CliResult<PathBuf> {
    let out = out.unwrap_or(solution);
    let (file, body) = if kind == "residual" {
        let sol = load_solution(solution)?;
        let mut s = String::from("iter,residual\n");
        for (i, r) in sol.summary.residual_history.iter().enumerate() {
            s.push_str(&format!("{i},{}\n", fmt_f64(*r)));
        }
        ("residual.csv".to_string(), s)
    } else if kind == "moser" {
        let sol = load_solution(solution)?;
        let problem = Problem::load(&solution.join(SCENARIO_FILE))?;
        let m = moser_profile(&sol.phi, &problem.metric, problem.scenario.diagnostics.p0, problem.scenario.moser_levels())?;
        let mut s = String::from("p,norm\n");
        for (p, v) in m.p_list.iter().zip(&m.norms) {
            s.push_str(&format!("{},{}\n", fmt_f64(*p), fmt_f64(*v)));
        }
        ("moser.csv".to_string(), s)
    } else if let Some(spec) = kind.strip_prefix("slice:") {
        let sol = load_solution(solution)?;
        let (free, fixed) = parse_slice(spec, sol.phi.grid())?;
        let tag: String = spec.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
        (format!("slice_{tag}.csv"), slice_csv(&sol.phi, &free, &fixed))
    } else {
        return Err(CliError::new(
            ErrorClass::Config,
            format!("unknown plotdata kind `{kind}` (expected moser, residual, or slice:...)"),
        ));
    };
    ensure_dir(out)?;
    let path = out.join(file);
    write_text(&path, &body)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseSummary {
    pub calibration: PointwiseSample,
    pub validation_seed: u64,
    pub validation_factor: f64,
    pub validation: Vec<PointwiseValidation>,
    /// Calibrated `C` at doubled torsion over calibrated `C`, per `k`.
    pub scaling_ratio: Vec<f64>,
}

/// `verify-pointwise`: calibrates, validates with twice the constant on a fresh stream, and checks torsion scaling.
pub fn run_verify_pointwise(n: usize, trials: usize, epsilon: f64, seed: u64, out: Option<&Path>) -> CliResult<PointwiseSummary> {
    if trials == 0 {
        return Err(CliError::new(ErrorClass::Config, "--trials must be positive"));
    }
    let cfg = |e: Error| CliError::new(ErrorClass::Config, e.to_string());
    let calibration = pointwise_ineq_sample(n, trials, epsilon, seed, 1.0).map_err(cfg)?;
    let validation_seed = seed.wrapping_add(1);
    let validation = pointwise_validate(&calibration, trials, validation_seed, 2.0).map_err(cfg)?;
    let doubled = pointwise_ineq_sample(n, trials, epsilon, seed, 2.0).map_err(cfg)?;
    let scaling_ratio = calibration
        .rows
        .iter()
        .zip(&doubled.rows)
        .map(|(a, b)| b.c / a.c)
        .collect();
    let summary = PointwiseSummary {
        calibration,
        validation_seed,
        validation_factor: 2.0,
        validation,
        scaling_ratio,
    };
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_text(&dir.join("pointwise.toml"), &toml::to_string(&summary).expect("serializable"))?;
    }
    let violations: usize = summary.validation.iter().map(|v| v.violations).sum();
    if violations > 0 {
        return Err(CliError::new(
            ErrorClass::Check,
            format!("{violations} validation samples violate the inequality with twice the calibrated constant"),
        ));
    }
    Ok(summary)
}

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hma_core::app::{run_solve, solve_problem, Problem, SolveOutcome};
use hma_core::diagnostics::{
    b_formula_check, lemma1_ratio, measure_bound_check, moser_profile, poincare_check, pointwise_ineq_sample,
    pointwise_validate, psi_checks, ricci_identity_check, sublevel_certificate,
};
use hma_core::fieldfile::{encode, FieldData};
use hma_core::gauduchon::{classify_metric, gauduchon_defect, solve_gauduchon};
use hma_core::grid::{Measure, ScalarField, TorusGrid};
use hma_core::hermitian::HermitianField;
use hma_core::scenario::{trig_field, MetricSpec, Scenario, TrigMode};
use hma_core::solver::{positivity_margin, solve_from};

const MANUFACTURED: &str = include_str!("../scenarios/manufactured.toml");
const B_FORMULA: &str = include_str!("../scenarios/kahler_b_formula.toml");
const NONKAHLER: &str = include_str!("../scenarios/nonkahler.toml");
const NONKAHLER_MANUFACTURED: &str = include_str!("../scenarios/nonkahler_manufactured.toml");
const KAHLER_POTENTIAL: &str = include_str!("../scenarios/kahler_potential.toml");
const CONFORMAL: &str = include_str!("../scenarios/conformal.toml");

/// Criteria reported as trends; they print PASS/FAIL but do not set the exit status.
const TREND_ONLY: [usize; 1] = [10];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn problem(text: &str) -> Problem {
    Problem::from_scenario(Scenario::from_toml_str(text).expect("bundled scenario")).expect("bundled scenario builds")
}

fn solved(text: &str) -> (Problem, SolveOutcome) {
    let p = problem(text);
    let o = solve_problem(&p, None).expect("bundled scenario solves");
    (p, o)
}

/// Solutions shared between criteria.
struct Solved {
    name: String,
    problem: Problem,
    phi: ScalarField,
}

fn criterion_1(store: &mut Vec<Solved>) -> Outcome {
    let start = Instant::now();
    let (p, o) = solved(MANUFACTURED);
    let elapsed = start.elapsed().as_secs_f64();
    let s = &o.summary;
    let err = s.manufactured_error.expect("manufactured scenario");
    let pass = s.final_residual <= 1e-10 && s.newton_iters <= 12 && err <= 1e-8 && s.b.abs() <= 1e-8 && elapsed < 60.0;
    let detail = format!(
        "residual {:.3e} (<= 1e-10), newton {} (<= 12), sup error {:.3e} (<= 1e-8), |b| {:.3e} (<= 1e-8), {:.2}s (< 60s)",
        s.final_residual, s.newton_iters, err, s.b.abs(), elapsed
    );
    store.push(Solved {
        name: "manufactured".into(),
        phi: o.report.phi,
        problem: p,
    });
    outcome(pass, detail)
}

fn criterion_2_3(store: &mut Vec<Solved>) -> (Outcome, Outcome) {
    let (p, o) = solved(B_FORMULA);
    let class = classify_metric(&p.metric).unwrap();
    let check = b_formula_check(&p.metric, &p.f, o.report.b, class.pluriclosed_pair).unwrap();
    // quadrature oracle written out independently of the check
    let det = p.metric.det();
    let num: f64 = det.values().iter().sum();
    let den: f64 = det.values().iter().zip(p.f.values()).map(|(d, f)| d * f.exp()).sum();
    let oracle = (num / den).ln();
    let c2 = outcome(
        check.deviation <= 1e-8 && (check.predicted - oracle).abs() <= 1e-12 && check.condition_holds,
        format!(
            "b {:.12}, predicted {:.12}, deviation {:.3e} (<= 1e-8), flat condition holds {}",
            check.b, check.predicted, check.deviation, check.condition_holds
        ),
    );

    let mut shifted_sc = Scenario::from_toml_str(B_FORMULA).unwrap();
    shifted_sc.f.offset = -3.0;
    let shifted = Problem::from_scenario(shifted_sc).unwrap();
    let o2 = solve_problem(&shifted, None).unwrap();
    let dphi = o2.report.phi.max_abs_diff(&o.report.phi).unwrap();
    let db = o2.report.b - o.report.b - 3.0;
    let c3 = outcome(
        dphi <= 1e-9 && db.abs() <= 1e-9,
        format!("phi change {dphi:.3e} (<= 1e-9), b shift - 3 = {db:.3e} (|.| <= 1e-9)"),
    );
    store.push(Solved {
        name: "kahler_b_formula".into(),
        phi: o.report.phi,
        problem: p,
    });
    store.push(Solved {
        name: "kahler_b_formula_shifted".into(),
        phi: o2.report.phi,
        problem: shifted,
    });
    (c2, c3)
}

fn criterion_4(store: &mut Vec<Solved>) -> Outcome {
    let (p, o) = solved(NONKAHLER);
    let margin = positivity_margin(&o.report.phi, &p.metric).unwrap();
    let ricci = ricci_identity_check(&o.report.phi, &p.f, &p.metric).unwrap();
    let guess = ScalarField::from_fn(&p.grid, |x| 0.3 * x[1].sin() * x[3].cos() - 0.2 * (x[0] - x[2]).cos());
    let other = solve_from(&p.metric, &p.f, &p.scenario.solve_options(), Some(&guess)).unwrap();
    let dphi = other.phi.max_abs_diff(&o.report.phi).unwrap();
    let db = (other.b - o.report.b).abs();
    let residual = o.report.final_residual();
    let pass = residual <= 1e-10 && other.final_residual() <= 1e-10 && margin >= 1e-3 && ricci <= 1e-8 && dphi <= 1e-8 && db <= 1e-8;
    let detail = format!(
        "residual {residual:.3e} (<= 1e-10), positivity margin {margin:.3e} (>= 1e-3), ricci identity {ricci:.3e} (<= 1e-8), second start differs by {dphi:.3e} in phi and {db:.3e} in b (<= 1e-8)"
    );
    store.push(Solved {
        name: "nonkahler".into(),
        phi: o.report.phi,
        problem: p,
    });
    outcome(pass, detail)
}

fn criterion_5() -> Outcome {
    let kp = problem(KAHLER_POTENTIAL);
    let k = solve_gauduchon(&kp.metric, 1e-10).unwrap();
    let k_norm = k.u.sup_norm();

    let cp = problem(CONFORMAL);
    let v_modes = match &cp.scenario.metric {
        MetricSpec::ConformalKahler { v, .. } => v.clone(),
        _ => unreachable!("conformal scenario"),
    };
    let v = trig_field(&cp.grid, &v_modes);
    let inf_v = v.inf();
    let expected = v.map(|x| inf_v - x);
    let c = solve_gauduchon(&cp.metric, 1e-10).unwrap();
    let conf_err = c.u.max_abs_diff(&expected).unwrap();

    let np = problem(NONKAHLER);
    let g = solve_gauduchon(&np.metric, 1e-10).unwrap();
    let n = np.grid.n() as i32;
    let w = g.u.map(|u| ((n - 1) as f64 * u).exp());
    let recheck = gauduchon_defect(&w, &np.metric).unwrap().sup_norm();
    let class = classify_metric(&np.metric).unwrap();
    let pass = k_norm <= 1e-8 && conf_err <= 1e-8 && g.residual <= 1e-8 && recheck <= 1e-8 && class.d_omega > 1e-4 && !class.kahler;
    outcome(
        pass,
        format!(
            "kahler |u| {k_norm:.3e} (<= 1e-8), conformal error {conf_err:.3e} (<= 1e-8), perturbed residual {:.3e} and recheck {recheck:.3e} (<= 1e-8), |d omega| {:.3e} (> 1e-4)",
            g.residual, class.d_omega
        ),
    )
}

fn random_field<R: Rng>(rng: &mut R, grid: &TorusGrid) -> ScalarField {
    let axes = grid.axis_count();
    let modes: Vec<TrigMode> = (0..rng.random_range(1..6))
        .map(|_| {
            let k: Vec<i64> = (0..axes).map(|_| rng.random_range(-3..=3)).collect();
            let scale = 10f64.powf(rng.random_range(-1.0..2.0));
            TrigMode {
                k,
                cos: scale * rng.random_range(-1.0..1.0),
                sin: scale * rng.random_range(-1.0..1.0),
            }
        })
        .collect();
    trig_field(grid, &modes)
}

fn criterion_6(store: &[Solved]) -> Outcome {
    let grid = TorusGrid::uniform(2, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut failures = 0;
    let mut worst_margin = f64::INFINITY;
    for i in 0..1000 {
        let f = random_field(&mut rng, &grid);
        // alternate between the flat measure and a positive varying density
        let m = if i % 2 == 0 {
            Measure::flat(&grid)
        } else {
            let d = random_field(&mut rng, &grid);
            let top = d.sup_norm().max(1e-300);
            Measure::new(d.map(|v| 1.5 + v / top)).unwrap()
        };
        let r = measure_bound_check(&f, &m).unwrap();
        if !r.pass {
            failures += 1;
        }
        worst_margin = worst_margin.min(r.sublevel / r.bound);
    }
    let mut solved_fail = Vec::new();
    for s in store {
        let cert = sublevel_certificate(&s.phi, &s.problem.metric, s.problem.scenario.diagnostics.p0).unwrap();
        if !cert.check.pass || cert.delta > 1.0 {
            solved_fail.push(s.name.clone());
        }
    }
    outcome(
        failures == 0 && solved_fail.is_empty(),
        format!(
            "random fields failing {failures}/1000 (smallest measure/bound ratio {worst_margin:.3}), solved scenarios failing {}/{}",
            solved_fail.len(),
            store.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let trials = 100_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [2, 3] {
        let cal = pointwise_ineq_sample(n, trials, 0.5, 70 + n as u64, 1.0).unwrap();
        let val = pointwise_validate(&cal, trials, 700 + n as u64, 2.0).unwrap();
        let doubled = pointwise_ineq_sample(n, trials, 0.5, 70 + n as u64, 2.0).unwrap();
        for ((row, v), d) in cal.rows.iter().zip(&val).zip(&doubled.rows) {
            let ratio = d.c / row.c;
            let ok = v.violations == 0 && (ratio - 2.0).abs() <= 0.1;
            pass &= ok;
            parts.push(format!(
                "n={n} k={}: C {:.4}, violations {}, worst {:.3}, scaling {:.4}",
                row.k, row.c, v.violations, v.worst, ratio
            ));
        }
    }
    outcome(pass, parts.join("; "))
}

fn criterion_8(store: &[Solved]) -> Outcome {
    let p_list = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0];
    let mut pass = true;
    let mut parts = Vec::new();
    for s in store {
        let metric = &s.problem.metric;
        let l = lemma1_ratio(&s.phi, metric, &p_list).unwrap();
        let finite = l.rows.iter().all(|r| r.ratio.is_finite() && r.ratio_wedge.is_finite());
        let levels = s.problem.scenario.moser_levels();
        let m = moser_profile(&s.phi, metric, 8.0, levels).unwrap();
        let last = *m.p_list.last().unwrap();
        let at_last = *m.norms.last().unwrap();
        let rel = (at_last - m.sup_value).abs() / m.sup_value;
        let ok = finite && l.max_route_gap <= 1e-10 && m.nondecreasing && last >= 512.0 && rel <= 0.05;
        pass &= ok;
        parts.push(format!(
            "{}: C {:.4}, route gap {:.1e}, norm(p={last}) off sup by {:.2}%",
            s.name,
            l.empirical_c,
            l.max_route_gap,
            100.0 * rel
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_9() -> Outcome {
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    let mut gap = 0.0f64;
    for size in [8usize, 16] {
        let mut sc = Scenario::from_toml_str(NONKAHLER_MANUFACTURED).unwrap();
        sc.grid.sizes = vec![size; 4];
        let p = Problem::from_scenario(sc).unwrap();
        let o = solve_problem(&p, None).unwrap();
        let u = solve_gauduchon(&p.metric, 1e-10).unwrap().u;
        let r = psi_checks(&o.report.phi, &p.metric, &u).unwrap();
        gap = gap.max(r.conformal_gap);
        c1.push(r.c1);
        c2.push(r.c2);
    }
    let rel = |v: &[f64]| (v[1] - v[0]).abs() / v[1].abs();
    let grid = TorusGrid::uniform(2, 8).unwrap();
    let psi = ScalarField::from_fn(&grid, |x| x[0].cos());
    let ratio = poincare_check(&psi, &HermitianField::identity(&grid)).unwrap().ratio;
    let finite = c1.iter().chain(&c2).all(|v| v.is_finite());
    let pass = gap <= 1e-10 && finite && rel(&c1) <= 0.1 && rel(&c2) <= 0.1 && (ratio - 2.0).abs() <= 1e-6;
    outcome(
        pass,
        format!(
            "conformal identity gap {gap:.3e} (<= 1e-10), C1 {:.5} -> {:.5} ({:.2}%), C2 {:.5} -> {:.5} ({:.2}%), flat Poincare ratio {ratio:.9} (2 +- 1e-6)",
            c1[0],
            c1[1],
            100.0 * rel(&c1),
            c2[0],
            c2[1],
            100.0 * rel(&c2)
        ),
    )
}

fn well_modes(a: f64) -> Vec<TrigMode> {
    // −A/4 (1 − cos x0)(1 − cos x2)
    vec![
        TrigMode::cos(&[0, 0, 0, 0], -a / 4.0),
        TrigMode::cos(&[1, 0, 0, 0], a / 4.0),
        TrigMode::cos(&[0, 0, 1, 0], a / 4.0),
        TrigMode::cos(&[1, 0, 1, 0], -a / 8.0),
        TrigMode::cos(&[1, 0, -1, 0], -a / 8.0),
    ]
}

fn well_problem(a: f64, size: usize) -> Problem {
    let mut sc = Scenario::from_toml_str(NONKAHLER).unwrap();
    sc.name = format!("well_{a}");
    sc.grid.sizes = vec![size; 4];
    sc.f.modes = well_modes(a);
    sc.f.normalization = hma_core::scenario::Normalization::Raw;
    Problem::from_scenario(sc).unwrap()
}

/// Trend check: walks inf F = −1, −2, …, −16 with warm starts on 8⁴ (the well
/// modes have |k| ≤ 1, so 8⁴ resolves them) and confirms 8⁴ against 16⁴ at
/// inf F = −1 and −4.
fn criterion_10(store: &mut Vec<Solved>) -> Outcome {
    let mut path: Vec<(f64, f64)> = Vec::new();
    let mut prev: Option<ScalarField> = None;
    let mut stop = None;
    for step in 1..=16 {
        let a = step as f64;
        let p = well_problem(a, 8);
        let mut opts = p.scenario.solve_options();
        opts.positivity_floor = 1e-10;
        if a > 14.0 {
            opts.max_newton_iters = 8;
        }
        match solve_from(&p.metric, &p.f, &opts, prev.as_ref()) {
            Ok(r) => {
                path.push((-p.f.inf(), r.phi.sup_norm()));
                if step == 1 || step == 4 {
                    store.push(Solved {
                        name: p.scenario.name.clone(),
                        phi: r.phi.clone(),
                        problem: p,
                    });
                }
                prev = Some(r.phi);
            }
            Err(e) => {
                stop = Some(format!("inf F -{a}: {e}"));
                break;
            }
        }
    }
    let norm_at = |depth: f64| path.iter().find(|(d, _)| (d - depth).abs() < 1e-9).map(|&(_, n)| n);
    let mut parts: Vec<String> = path.iter().map(|(d, n)| format!("{:.0}:{n:.3}", -d)).collect();
    parts.insert(0, "|phi| along inf F".into());
    let mut refinement = Vec::new();
    for a in [1.0, 4.0] {
        let p = well_problem(a, 16);
        let fine = solve_problem(&p, None).map(|o| o.report.phi.sup_norm());
        match (fine, norm_at(a)) {
            (Ok(f), Some(c)) => refinement.push(format!("{:.1e}", (f - c).abs() / f)),
            _ => refinement.push("n/a".into()),
        }
    }
    let family: Vec<Option<f64>> = [1.0, 4.0, 16.0].iter().map(|&d| norm_at(d)).collect();
    let reached: Vec<f64> = family.iter().flatten().cloned().collect();
    let spread = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min);
    let all: Vec<f64> = path.iter().map(|&(_, n)| n).collect();
    let pass = family.iter().all(Option::is_some) && spread(&reached) < 3.0;
    let mut detail = parts.join(" ");
    detail.push_str(&format!(
        "; 8^4 vs 16^4 relative gap at -1, -4: {}; max/min over {{-1,-4,-16}} {} (< 3); max/min over reached path {:.3}",
        refinement.join(", "),
        if family[2].is_some() { format!("{:.3}", spread(&reached)) } else { "n/a, -16 not reached".into() },
        spread(&all)
    ));
    if let Some(s) = stop {
        detail.push_str(&format!("; stopped at {s}"));
    }
    outcome(pass, detail)
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("manufactured.toml");
    std::fs::write(&config, MANUFACTURED).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_solve(&config, &a, None).unwrap();
    run_solve(&config, &b, None).unwrap();
    let fa = std::fs::read(a.join("phi.hmaf")).unwrap();
    let fb = std::fs::read(b.join("phi.hmaf")).unwrap();
    let (_, again) = solved(MANUFACTURED);
    let fc = encode(&FieldData::Real(again.report.phi));
    outcome(
        fa == fb && fa == fc,
        format!("{} byte field files identical across three runs: {}", fa.len(), fa == fb && fa == fc),
    )
}

fn main() {
    let mut store = Vec::new();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "manufactured recovery", criterion_1(&mut store)));
    let (c2, c3) = criterion_2_3(&mut store);
    results.push((2, "b formula", c2));
    results.push((3, "shift covariance", c3));
    results.push((4, "non-Kahler solve", criterion_4(&mut store)));
    results.push((5, "Gauduchon factor", criterion_5()));
    let c10 = criterion_10(&mut store);
    results.push((6, "measure bound oracle", criterion_6(&store)));
    results.push((7, "pointwise inequality", criterion_7()));
    results.push((8, "Moser and lemma 1", criterion_8(&store)));
    results.push((9, "psi and Poincare", criterion_9()));
    results.push((10, "inf-independence probe", c10));
    results.push((11, "determinism", criterion_11()));
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    let mut gating_failed = 0;
    for (i, name, o) in &results {
        println!("criterion {i:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
            if !TREND_ONLY.contains(i) {
                gating_failed += 1;
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed ({gating_failed} gating; trend checks {TREND_ONLY:?} are reported only)",
        results.len() - failed
    );
    if gating_failed > 0 {
        std::process::exit(1);
    }
}

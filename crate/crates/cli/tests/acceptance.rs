//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::Command as Process;
use std::time::{Duration, Instant};

use apriori::exponents::{check_identities, derive_context};
use apriori::linear_solver::{manufactured_convergence, regularity_ratio_suite, ManufacturedCase};
use apriori::mesh::build_cube_mesh;
use apriori::nonlinear::{
    ar_check, growth_check, make_power_nonlinearity, solve_ground_state, CheckGrid, Nonlinearity, SolverConfig,
};
use apriori::norms::{energy_j, h1_squared, power_integral, Region};
use apriori::verify_chain::{
    gn_ratio_suite, main_estimate_ratio, run_chain, CertifiedSolution, CorpusDescriptor, Step,
};
use apriori::{FeSpace, FloatContext, Rational};

const SEED: u64 = 7;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn within_budget(result: Outcome, elapsed: Duration, budget: Duration) -> Outcome {
    if elapsed <= budget {
        result
    } else {
        outcome(false, format!("{} (over the {budget:?} budget)", result.detail))
    }
}

fn ctx323() -> FloatContext {
    derive_context(3, 2.0, None).unwrap()
}

fn space(n: usize) -> FeSpace {
    FeSpace::new(build_cube_mesh(n).unwrap()).unwrap()
}

fn exponent_identities() -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    for dim in 3u32..=10 {
        let n = dim as i64;
        let width = Rational::new(n.into(), (n - 2).into()) - Rational::from_integer(1.into());
        for k in 1..=20i64 {
            let p = Rational::from_integer(1.into()) + width.clone() * Rational::new(k.into(), 21.into());
            let ctx = derive_context(dim, p.clone(), None).unwrap();
            checked += 1;
            for v in check_identities(&ctx) {
                if !v.holds {
                    failures.push(format!("N={dim} p={p}: {}", v.identity));
                }
            }
        }
    }
    outcome(
        failures.is_empty() && checked == 160,
        format!("{checked} exact contexts, {} failures {failures:?}", failures.len()),
    )
}

fn worked_context() -> Outcome {
    let r = |a: i64, b: i64| Rational::new(a.into(), b.into());
    let ctx = derive_context(3, r(2, 1), None).unwrap();
    let got = (ctx.a.clone(), ctx.m.clone(), ctx.sigma.clone(), ctx.a_hat1.clone(), ctx.a_hat2.clone());
    let expected = (r(2, 1), r(9, 2), r(3, 5), r(4, 3), r(2, 3));
    outcome(
        got == expected && ctx.q == r(3, 1),
        format!("(A, m, sigma, A1, A2) = ({}, {}, {}, {}, {})", got.0, got.1, got.2, got.3, got.4),
    )
}

fn manufactured_solves() -> Outcome {
    let mut passed = true;
    let mut detail = Vec::new();
    for case in [ManufacturedCase::ExpX1, ManufacturedCase::ExpDiagonal] {
        let rows = manufactured_convergence(case, &[4, 8, 16], 1e-12).unwrap();
        for row in &rows[1..] {
            let (h1, l2) = (row.h1_order.unwrap(), row.l2_order.unwrap());
            passed &= h1 >= 0.9 && l2 >= 1.8;
            detail.push(format!("{} n={}: H1 {h1:.3} L2 {l2:.3}", case.name(), row.n));
        }
        let start = Instant::now();
        manufactured_convergence(case, &[16], 1e-12).unwrap();
        let single = start.elapsed();
        passed &= single < Duration::from_secs(30);
        detail.push(format!("{} n=16 solve {single:.2?}", case.name()));
    }
    outcome(passed, detail.join("; "))
}

fn universal_inequalities() -> Outcome {
    let ctx = ctx323();
    let mut passed = true;
    let mut detail = Vec::new();
    for n in [4, 8] {
        let report = run_chain(&ctx, CorpusDescriptor { seed: SEED, size: 100, n }, 1e-8).unwrap();
        let growth = report.violations(Step::BoundaryGrowth);
        let holder = report.violations(Step::BoundaryHolder);
        let sup = report.violations(Step::SupContainment);
        let checked = report.records().filter(|r| r.step == Step::BoundaryGrowth).count();
        passed &= growth == 0 && holder == 0 && sup == 0 && checked == 100;
        detail.push(format!(
            "n={n}: {checked} functions, violations growth/holder/sup = {growth}/{holder}/{sup}"
        ));
    }
    outcome(passed, detail.join("; "))
}

fn within_factor(a: f64, b: f64, factor: f64) -> bool {
    let r = b / a;
    r.is_finite() && r < factor && r > factor.recip()
}

fn fitted_saturation() -> Outcome {
    let ctx = ctx323();
    let gn = gn_ratio_suite(&ctx, SEED, 100, &[8, 16], 1e-8).unwrap();
    let reg = regularity_ratio_suite(&ctx, &[8, 16], 100, SEED, 1e-10).unwrap();
    let (g8, g16) = (gn.levels[0].max_ratio, gn.levels[1].max_ratio);
    let (r8, r16) = (reg.maxima[0], reg.maxima[1]);
    let passed = within_factor(g8, g16, 2.0) && within_factor(r8.1, r16.1, 2.0) && within_factor(r8.2, r16.2, 2.0);
    outcome(
        passed,
        format!(
            "gn max {g8:.4} -> {g16:.4}; W1m ratio max {:.4} -> {:.4}; sup ratio max {:.4} -> {:.4}",
            r8.1, r16.1, r8.2, r16.2
        ),
    )
}

fn ground_state() -> Outcome {
    let space = space(8);
    let nl = make_power_nonlinearity(2.0, 1.0).unwrap();
    let result = match solve_ground_state(&space, &nl, &SolverConfig::new(1e-8, SEED)) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("solver failed: {e}")),
    };
    let u = &result.solution;
    let positive = u.values().iter().all(|&v| v > 0.0);
    let norm_sq = h1_squared(u);
    let cubic = power_integral(u, 3.0, Region::Boundary);
    let identity = (norm_sq - cubic).abs() / norm_sq;
    let energy = energy_j(u, &nl);
    let energy_gap = (energy - norm_sq / 6.0).abs() / (norm_sq / 6.0);
    outcome(
        positive && result.weak_residual <= 1e-8 && identity <= 1e-6 && energy_gap <= 1e-6,
        format!(
            "residual {:.2e}, positive {positive}, identity gap {identity:.2e}, J vs |u|^2/6 gap {energy_gap:.2e}",
            result.weak_residual
        ),
    )
}

fn main_estimate_stability() -> Outcome {
    let spaces = [space(8), space(16)];
    let mut passed = true;
    let mut detail = Vec::new();
    for p in [1.5, 2.0, 2.5] {
        let ctx = derive_context(3, p, None).unwrap();
        let nl = make_power_nonlinearity(p, 1.0).unwrap();
        let mut rho = Vec::new();
        for s in &spaces {
            let solved = solve_ground_state(s, &nl, &SolverConfig::new(1e-8, SEED)).unwrap();
            let cert = CertifiedSolution::certify(solved.solution, nl.clone(), 1e-8).unwrap();
            let m = main_estimate_ratio(&cert, &ctx).unwrap();
            rho.push((m.rho.ratio, m.split.ratio));
        }
        let ok = rho.iter().all(|(a, b)| a.is_finite() && *a > 0.0 && b.is_finite() && *b > 0.0)
            && within_factor(rho[0].0, rho[1].0, 1.5)
            && within_factor(rho[0].1, rho[1].1, 1.5);
        passed &= ok;
        detail.push(format!(
            "p={p} A={}: rho {:.6}/{:.6}, split {:.6}/{:.6}",
            ctx.a, rho[0].0, rho[1].0, rho[0].1, rho[1].1
        ));
    }
    outcome(passed, detail.join("; "))
}

fn ar_certification() -> Outcome {
    let grid = CheckGrid::symmetric(10.0, 1000);
    let mut exact = true;
    for p in [1.5, 2.0, 2.5] {
        let nl = make_power_nonlinearity(p, 1.0).unwrap();
        exact &= nl.theta() == p + 1.0;
        for x in &grid.points {
            exact &= grid.s_values.iter().all(|&s| nl.ar_gap(x, s) == 0.0);
        }
        exact &= ar_check(&nl, &grid).is_ok();
    }
    let violator = Nonlinearity::custom(
        2.0,
        1.0,
        3.0,
        0.0,
        |_, s: f64| s * s + 10.0,
        |_, s: f64| s * s * s / 3.0 + 10.0 * s,
        |_, s: f64| 2.0 * s,
    );
    let rejected = growth_check(&violator, &grid).is_err();
    outcome(
        exact && rejected && grid.s_values.len() == 1000,
        format!("gap identically zero on 1000 values: {exact}; s^2+10 rejected: {rejected}"),
    )
}

fn run_cli(args: &[&str], dir: &Path) -> bool {
    Process::new(env!("CARGO_BIN_EXE_apriori"))
        .args(args)
        .arg("--output")
        .arg(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 2] = [
        &["verify", "--suite", "chain", "--n", "8", "--samples", "100", "--seed", "7"],
        &["sweep", "--p", "3/2,2,5/2", "--n", "4,8", "--seed", "7"],
    ];
    let mut compared = 0;
    for args in runs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        if !(run_cli(args, a.path()) && run_cli(args, b.path())) {
            return outcome(false, format!("run {args:?} failed"));
        }
        let mut names: Vec<_> = std::fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in names {
            let left = std::fs::read(a.path().join(&name)).unwrap();
            let right = std::fs::read(b.path().join(&name)).unwrap_or_default();
            if left != right {
                return outcome(false, format!("{name:?} differs between runs of {args:?}"));
            }
            compared += 1;
        }
    }
    outcome(compared >= 6, format!("{compared} report files byte-identical across repeated runs"))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, Duration);
    let criteria: [Criterion; 9] = [
        ("1 exponent identities", exponent_identities, Duration::from_secs(1)),
        ("2 worked context", worked_context, Duration::from_secs(1)),
        ("3 manufactured solves", manufactured_solves, Duration::from_secs(120)),
        ("4 universal inequalities", universal_inequalities, Duration::from_secs(120)),
        ("5 fitted saturation", fitted_saturation, Duration::from_secs(300)),
        ("6 ground state", ground_state, Duration::from_secs(120)),
        ("7 main estimate stability", main_estimate_stability, Duration::from_secs(600)),
        ("8 AR certification", ar_certification, Duration::from_secs(1)),
        ("9 determinism", determinism, Duration::from_secs(600)),
    ];
    let mut failures = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = within_budget(result, elapsed, budget);
        let tag = if result.passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {name} ({elapsed:.2?}): {}", result.detail);
        failures += usize::from(!result.passed);
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

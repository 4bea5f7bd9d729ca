//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed by `cargo test`.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rsl::catalog::PhiExpr;
use rsl::flow::{evolve, FlowControls, Trajectory};
use rsl::geometry::{ConformalGrid, DomainMask};
use rsl::models::{
    branch_at, einstein_term, model_eigenvalue, model_rate_prediction, model_scalar_curvature, Branch,
    ModelGeometry,
};
use rsl::monotonicity::{
    analyse_grid, check_main_theorem, check_proposition1, check_rate_identity, curvature_range,
    model_rate_samples, predicted_rate_general, SpectralControls,
};
use rsl::spectral::{assemble, solve, Constraint, SolverOptions};
use rsl::varcheck::{
    check_bianchi, check_eq6_chain, check_inverse_metric_evolution, check_laplacian_variation,
    check_volume_evolution, default_test_fields, fitted_order, snapshot_spacing, IdentityCheck,
};

type Criterion = (&'static str, fn() -> Outcome, Duration);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Five-point derivative, the finite-difference oracle for closed forms.
fn fd5(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h)
}

const FD_STEP: f64 = 1e-5;

fn sphere_rate_n2() -> Outcome {
    let model = ModelGeometry::RoundSphere { dim: 2, r0: 1.0 };
    let lambda = |t: f64| 2.0 / (1.0 - 2.0 * t);
    let mut worst = 0.0_f64;
    for t in [0.0, 0.1, 0.2] {
        let branch = branch_at(&model, 1, t).unwrap();
        let mu = model_eigenvalue(&model, 1, t).unwrap();
        let r = model_scalar_curvature(&model, t).unwrap();
        let e = einstein_term(&model, branch, t).unwrap();
        let predicted = predicted_rate_general(r, e, mu);
        worst = worst.max((predicted - fd5(lambda, t, FD_STEP)).abs());
        // exact derivative 4 / (1 - 2t)^2, e.g. 6.25 at t = 0.1
        worst = worst.max((predicted - 4.0 / (1.0 - 2.0 * t).powi(2)).abs());
    }
    outcome(worst <= 1e-8, format!("err={worst:e} tol=1e-8"))
}

fn sphere_rate_n3() -> Outcome {
    let model = ModelGeometry::RoundSphere { dim: 3, r0: 1.0 };
    let predicted = model_rate_prediction(&model, 1, 0.0).unwrap();
    let oracle = fd5(|t| 3.0 / (1.0 - 4.0 * t), 0.0, FD_STEP);
    // mu R + 2 int E(df, df) with mu = 3, R = 6, E = -g
    let by_hand = 3.0 * 6.0 + 2.0 * (-3.0);
    let err = (predicted - oracle).abs().max((predicted - by_hand).abs());
    outcome(err <= 1e-8 && by_hand == 12.0, format!("rate={predicted} err={err:e} tol=1e-8"))
}

fn main_theorem_models() -> Outcome {
    let times: Vec<f64> = (0..=50).map(|k| 0.2 * k as f64 / 50.0).collect();
    let sphere = ModelGeometry::RoundSphere { dim: 3, r0: 1.0 };
    let samples = model_rate_samples(&sphere, 1, &times).unwrap();
    let s = check_main_theorem(&samples, 1e-10).unwrap();
    let mu_end_oracle = 3.0 / (1.0 - 4.0 * 0.2);
    let sphere_ok = s.passed()
        && s.a_interval == (1.0, 3.0)
        && s.strict_expected
        && (s.mu_start - 3.0).abs() < 1e-12
        && (s.mu_end - mu_end_oracle).abs() < 1e-10
        && samples.windows(2).all(|w| w[1].mu > w[0].mu);

    let product = ModelGeometry::SphereCircleProduct { a0: 1.0, b0: 1.0 };
    let circle = branch_at(&product, 1, 0.0).unwrap();
    let samples = model_rate_samples(&product, 1, &times).unwrap();
    let p = check_main_theorem(&samples, 1e-10).unwrap();
    let boundary = samples.iter().all(|s| 2.0 * s.a_required == s.r_min && s.hypothesis_feasible);
    let flat_rate = samples.iter().all(|s| s.predicted_rate == 0.0 && s.observed_rate.unwrap_or(0.0) == 0.0);
    let product_ok = p.passed() && !p.strict_expected && boundary && flat_rate && circle == (Branch::Product { l: 0, m: 1 });
    outcome(
        sphere_ok && product_ok,
        format!(
            "sphere a in [{}, {}], mu {} -> {}; circle mode {circle:?} boundary={boundary} rate0={flat_rate} tol=1e-10",
            s.a_interval.0, s.a_interval.1, s.mu_start, s.mu_end
        ),
    )
}

fn proposition_bounds() -> Outcome {
    let times = |t1: f64| (0..50).map(|k| t1 * k as f64 / 49.0).collect::<Vec<_>>();
    let sphere = ModelGeometry::RoundSphere { dim: 2, r0: 1.0 };
    let samples = model_rate_samples(&sphere, 1, &times(0.2)).unwrap();
    let p1 = check_proposition1(&samples, (0.0, 0.2), 1e-12).unwrap();
    // independent pointwise comparison 2/(1-2t) >= 2 e^{2t}
    let oracle1 = times(0.2).iter().all(|&t| 2.0 / (1.0 - 2.0 * t) >= 2.0 * (2.0 * t).exp());

    let hyperbolic = ModelGeometry::HyperbolicScaled { c0: 1.0, spectrum: Some(vec![1.5]) };
    let samples = model_rate_samples(&hyperbolic, 1, &times(1.0)).unwrap();
    let p2 = check_proposition1(&samples, (0.0, 1.0), 1e-12).unwrap();
    let oracle2 = times(1.0).iter().all(|&t| 1.5 / (1.0 + 2.0 * t) <= 1.5 * (-2.0 * t / 3.0).exp());

    let ok = p1.part == 1
        && p1.c == 2.0
        && p1.passed()
        && p1.checks.len() == 50
        && p2.part == 2
        && (p2.c - 2.0 / 3.0).abs() < 1e-15
        && p2.passed()
        && p2.checks.len() == 50
        && oracle1
        && oracle2;
    outcome(
        ok,
        format!(
            "part 1 C={} min slack {:e}; part 2 C={} min slack {:e}; tol=1e-12",
            p1.c, p1.min_slack, p2.c, p2.min_slack
        ),
    )
}

fn first_dirichlet_eigenvalue(cells: usize) -> f64 {
    let grid = ConformalGrid::rectangle(cells, cells, 1.0, 1.0, |_, _| 0.0).unwrap();
    let ops = assemble(&grid, &DomainMask::full(&grid)).unwrap();
    solve(&ops, 1, &SolverOptions::default(), Constraint::None).unwrap().pairs[0].mu
}

fn dirichlet_solver() -> Outcome {
    let exact = 2.0 * PI * PI;
    let e64 = (first_dirichlet_eigenvalue(64) - exact).abs();
    let mu128 = first_dirichlet_eigenvalue(128);
    let e128 = (mu128 - exact).abs();
    let ratio = e64 / e128;
    outcome(
        e128 / exact <= 5e-3 && ratio >= 3.5,
        format!("mu1={mu128} rel err={:e} (tol 5e-3), refinement ratio {ratio:.3} (min 3.5)", e128 / exact),
    )
}

fn bump() -> PhiExpr {
    PhiExpr::Bump { cx: 0.5, cy: 0.5, amplitude: 0.05, width: 0.2 }
}

/// Bump torus trajectory at `n^2` nodes with `dt` scaled as `h^2` and a fixed
/// snapshot stride; returns the trajectory and its middle snapshot.
fn bump_trajectory(n: usize) -> (Trajectory<ConformalGrid>, DomainMask, usize) {
    let grid = bump().torus(n, n, 1.0, 1.0).unwrap();
    let mask = DomainMask::full(&grid);
    let dt = 2e-5 * (48.0 / n as f64).powi(2);
    let mut controls = FlowControls::new(dt, 1e-3);
    controls.stride = Some(5);
    let traj = evolve(&grid, &controls).unwrap();
    let mid = traj.len() / 2;
    assert!((traj.snapshots[mid].time - 5e-4).abs() < 1e-12);
    (traj, mask, mid)
}

fn grid_rate_check() -> Outcome {
    let mut rel = Vec::new();
    let mut spacing = Vec::new();
    let mut notes = String::new();
    for n in [48, 96] {
        let (traj, mask, mid) = bump_trajectory(n);
        let mut controls = SpectralControls::new(1, 1e-10, Constraint::MeanZero);
        // the centred bump keeps the first nonzero level doubly degenerate
        controls.extra = 2;
        let history = analyse_grid(&traj, &mask, &controls, Some(&[mid - 1, mid, mid + 1])).unwrap();
        let check = &check_rate_identity(&history, 1, 0.02).unwrap()[0];
        rel.push(check.err / check.predicted.abs());
        spacing.push(snapshot_spacing(&traj, mid).unwrap());
        notes = format!("{:?}: {}", check.status, check.note);
    }
    let order = fitted_order(rel[0], rel[1], spacing[0], spacing[1]).unwrap_or(f64::NAN);
    outcome(
        rel[1] <= 0.02 && order >= 1.7,
        format!("96^2 rel err={:e} tol=2e-2 ({notes}); fitted order {order:.3} (min 1.7)", rel[1]),
    )
}

fn identity_checks(traj: &Trajectory<ConformalGrid>, mask: &DomainMask, i: usize) -> Vec<IdentityCheck> {
    let (u, v) = default_test_fields(traj.state(0), mask);
    vec![
        check_volume_evolution(traj, mask, i).unwrap(),
        check_inverse_metric_evolution(traj, mask, i).unwrap(),
        check_laplacian_variation(traj, mask, i, &u).unwrap(),
        check_eq6_chain(traj, mask, i, &u, &v).unwrap(),
        check_bianchi(traj.state(i), mask).unwrap(),
    ]
}

fn identity_suite() -> Outcome {
    let mut flat_worst = 0.0_f64;
    for phi in [PhiExpr::Flat, PhiExpr::Const(0.4)] {
        for grid in [phi.torus(24, 24, 1.0, 1.0).unwrap(), phi.rectangle(24, 24, 1.0, 1.0).unwrap()] {
            let mask = DomainMask::full(&grid);
            let mut controls = FlowControls::new(1e-4, 4e-4);
            controls.stride = Some(1);
            let traj = evolve(&grid, &controls).unwrap();
            for c in identity_checks(&traj, &mask, 2) {
                flat_worst = flat_worst.max(c.max_abs_err);
            }
        }
    }
    let levels: Vec<(Vec<IdentityCheck>, f64, f64)> = [48, 96]
        .iter()
        .map(|&n| {
            let (traj, mask, mid) = bump_trajectory(n);
            let spacing = snapshot_spacing(&traj, mid).unwrap();
            (identity_checks(&traj, &mask, mid), spacing, 1.0 / n as f64)
        })
        .collect();
    let mut orders = Vec::new();
    for k in 0..levels[0].0.len() {
        let (coarse, fine) = (&levels[0].0[k], &levels[1].0[k]);
        // eq6 and bianchi compare spatial discretisations; the rest are time differences
        let (pc, pf) = if k >= 3 { (levels[0].2, levels[1].2) } else { (levels[0].1, levels[1].1) };
        let order = fitted_order(coarse.rel_err, fine.rel_err, pc, pf).unwrap_or(f64::NAN);
        orders.push((fine.name.clone(), order));
    }
    let ok = flat_worst <= 1e-12 && orders.iter().all(|(_, o)| *o >= 1.7);
    let listed: Vec<String> = orders.iter().map(|(n, o)| format!("{n} {o:.3}")).collect();
    outcome(ok, format!("flat max abs err={flat_worst:e} (tol 1e-12); orders {} (min 1.7)", listed.join(", ")))
}

fn sign_monotonicity() -> Outcome {
    let grid = PhiExpr::Bump { cx: 0.5, cy: 0.5, amplitude: 0.3, width: 0.25 }
        .rectangle(64, 64, 1.0, 1.0)
        .unwrap();
    let mask = DomainMask::rectangle(&grid, [0.3, 0.7, 0.3, 0.7]).unwrap();
    let mut controls = FlowControls::new(1e-5, 2e-3);
    controls.stride = Some(20);
    let traj = evolve(&grid, &controls).unwrap();
    let certified = traj.snapshots.iter().all(|s| curvature_range(&s.state, &mask).0 >= 0.0);
    let history = analyse_grid(&traj, &mask, &SpectralControls::new(1, 1e-10, Constraint::None), None).unwrap();
    let mu = &history.branches[0].mu;
    let slack = mu
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .fold(f64::INFINITY, f64::min);

    let ops = assemble(&grid, &mask).unwrap();
    let shifted = grid.shifted(0.3).unwrap();
    let ops_shifted = assemble(&shifted, &mask).unwrap();
    let opts = SolverOptions { tol: 1e-10, ..SolverOptions::default() };
    let base = solve(&ops, 4, &opts, Constraint::None).unwrap().pairs;
    let moved = solve(&ops_shifted, 4, &opts, Constraint::None).unwrap().pairs;
    let covariance = base
        .iter()
        .zip(&moved)
        .map(|(a, b)| (b.mu - (-0.6f64).exp() * a.mu).abs() / b.mu)
        .fold(0.0, f64::max);
    outcome(
        certified && slack >= -1e-6 && covariance <= 1e-8,
        format!(
            "R >= 0 on D: {certified}; mu1 {} -> {}, min relative step {slack:e} (min -1e-6); shift covariance err={covariance:e} tol=1e-8",
            mu[0],
            mu[mu.len() - 1]
        ),
    )
}

fn run_cli(config: &Path, out: &Path) -> (i32, Vec<u8>) {
    let status = Command::new(env!("CARGO_BIN_EXE_rsl"))
        .arg("run")
        .arg(config)
        .env("RSL_OUTPUT_DIR", out)
        .output()
        .unwrap();
    let stem = config.file_stem().unwrap().to_string_lossy().into_owned();
    let csv = std::fs::read(out.join(format!("{stem}.csv"))).unwrap_or_default();
    (status.status.code().unwrap_or(-1), csv)
}

fn determinism_and_exit_codes() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let grid = r#"
lane = "grid"
grid.topology = "torus"
grid.n = 32
grid.phi = "bump(0.5, 0.5, 0.05, 0.2)"
flow.dt = 2e-5
flow.t_end = 4e-4
flow.stride = 4
spectral.modes = 2
spectral.extra = 2
checks.run = ["rate2d", "eq5", "eq7"]
"#;
    let good = write("good.toml", grid);
    let (c1, csv1) = run_cli(&good, &dir.path().join("a"));
    let (c2, csv2) = run_cli(&good, &dir.path().join("b"));
    let reproducible = c1 == 0 && c2 == 0 && !csv1.is_empty() && csv1 == csv2;

    let bad_key = write("bad_key.toml", &grid.replace("flow.dt", "flow.d_t"));
    let unstable = write(
        "unstable.toml",
        "lane = \"grid\"\ngrid.topology = \"rectangle\"\ngrid.n = 128\ngrid.phi = \"sinx(0.1)\"\nflow.dt = 1.0\nflow.t_end = 2.0\nchecks.run = [\"rate2d\"]\n",
    );
    let tight = write(
        "tight.toml",
        "lane = \"model\"\ngeometry.family = \"RoundSphere\"\nflow.t_end = 0.2\nchecks.run = [\"rate_general\"]\nchecks.tol.rate_general = 1e-16\n",
    );
    let codes: Vec<i32> = [&bad_key, &unstable, &tight]
        .iter()
        .map(|p| run_cli(p, &dir.path().join("faults")).0)
        .collect();
    outcome(
        reproducible && codes == [2, 3, 1],
        format!("byte-identical CSV: {reproducible}; fault exit codes {codes:?} (want [2, 3, 1])"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("sphere rate identity n=2", sphere_rate_n2, Duration::from_secs(1)),
        ("sphere rate identity n=3 with Einstein term", sphere_rate_n3, Duration::from_secs(1)),
        ("main theorem feasibility and conclusion", main_theorem_models, Duration::from_secs(1)),
        ("exponential bounds under signed curvature", proposition_bounds, Duration::from_secs(1)),
        ("Dirichlet eigensolver accuracy", dirichlet_solver, Duration::from_secs(30)),
        ("grid rate check on the bump torus", grid_rate_check, Duration::from_secs(120)),
        ("variation identity suite", identity_suite, Duration::from_secs(60)),
        ("sign monotonicity and shift covariance", sign_monotonicity, Duration::from_secs(60)),
        ("determinism and exit codes", determinism_and_exit_codes, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "acceptance {} ({name}): {} {} [{:.2}s, budget {}s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

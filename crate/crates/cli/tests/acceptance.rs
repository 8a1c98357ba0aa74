//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (visible with `--nocapture`; failures always show it).
//!
//! Run with: cargo test -p gpobs-cli --test acceptance -- --nocapture

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use gpobs_core::audit::{audit_guaranteed, AdjacencyMode};
use gpobs_core::hinf::{
    accuracy_profile, accuracy_steady, build_error_system, eta_hinf, find_certificate,
    gamma_direct, privacy_constraint_lhs, LmiKind,
};
use gpobs_core::matops::{sigma_max, solve, vecops, Matrix};
use gpobs_core::observer::{simulate, NoiseSpec, ObserverDesign, Provenance};
use gpobs_core::plant::{IntervalVector, PlantModel, PrivacyBudget};
use gpobs_core::rng::CounterRng;
use gpobs_core::scenario::parse_scenario;
use gpobs_core::synthesis::{
    load_fixture_design, synth_nonprivate, synth_private, SynthStatus, SynthesisProblem,
};

fn verdict(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn market() -> (PlantModel, Matrix, f64, PrivacyBudget) {
    let s = parse_scenario(gpobs_core::market5_fixture()).unwrap();
    let gain = s.gain.unwrap();
    (s.plant, gain.l, gain.alpha, s.budget.unwrap())
}

/// Deterministic random stable instance generator shared by criteria 2-4.
struct InstanceGen {
    rng: CounterRng,
    counter: u64,
}

impl InstanceGen {
    fn new(seed: u64) -> Self {
        InstanceGen {
            rng: CounterRng::new(seed, 40),
            counter: 0,
        }
    }

    fn draw(&mut self, lo: f64, hi: f64) -> f64 {
        self.counter += 1;
        self.rng.uniform(self.counter, lo, hi)
    }

    /// Plant + gain with ρ(|A-LC|) < 0.9, state dimension in 1..=max_n.
    fn stable_case(&mut self, max_n: usize) -> (PlantModel, Matrix) {
        loop {
            let n = 1 + (self.draw(0.0, max_n as f64 - 1e-9) as usize);
            let a = Matrix::from_fn(n, n, |_, _| self.draw(-0.5, 0.5));
            let c = Matrix::from_fn(n, n, |_, _| self.draw(-1.0, 1.0));
            let l = Matrix::from_fn(n, n, |_, _| self.draw(-0.25, 0.25));
            let w = Matrix::from_fn(n, n, |_, _| self.draw(-1.0, 1.0));
            let x0w: Vec<f64> = (0..n).map(|_| self.draw(0.0, 0.4)).collect();
            let ww: Vec<f64> = (0..n).map(|_| self.draw(0.01, 0.4)).collect();
            let vw: Vec<f64> = (0..n).map(|_| self.draw(0.01, 0.4)).collect();
            let plant = PlantModel {
                a,
                c,
                w,
                v: Matrix::identity(n),
                gamma: Matrix::from_fn(1, n, |_, _| 1.0),
                x0: IntervalVector::new(x0w.iter().map(|w| -w).collect(), x0w.clone()).unwrap(),
                w_bounds: IntervalVector::new(ww.iter().map(|w| -w).collect(), ww.clone()).unwrap(),
                v_bounds: IntervalVector::new(vec![0.0; n], vw.clone()).unwrap(),
                output_blocks: vec![n],
            };
            let err = build_error_system(&plant, &l, 1.0);
            if err.spectral_radius() < 0.9 {
                return (plant, l);
            }
        }
    }
}

fn design_with(l: Matrix, alpha: f64) -> ObserverDesign {
    let n = l.rows();
    ObserverDesign::new(l, alpha, 1.0, 1.0, vec![1.0; n], Provenance::Synthesized).unwrap()
}

// 1. Framer soundness on the market fixture with the published gain:
// 500 seeded runs of horizon 100 keep the truth inside with slack 1e-9,
// in under 10 seconds.
#[test]
fn criterion_01_framer_soundness() {
    let (plant, l, alpha, _) = market();
    let design = design_with(l, alpha);
    let start = Instant::now();
    let mut failures = 0usize;
    for seed in 0..500u64 {
        let traj = simulate(&plant, &design, 100, &NoiseSpec::Uniform, seed).unwrap();
        if !traj.containment_ok(1e-9) {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = failures == 0 && elapsed.as_secs_f64() < 10.0;
    verdict(
        1,
        "framer soundness",
        pass,
        &format!("{failures} containment failures over 500 seeds, {elapsed:.2?}"),
    );
    assert_eq!(failures, 0);
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
}

// 2. Simulated widths match the autonomous error recursion to 1e-12 on
// 100 random stable instances (n <= 4), horizon 50.
#[test]
fn criterion_02_error_recursion_equivalence() {
    let mut gen = InstanceGen::new(2);
    let mut worst = 0.0f64;
    for case in 0..100u64 {
        let (plant, l) = gen.stable_case(4);
        let design = design_with(l.clone(), 1.0);
        let traj = simulate(&plant, &design, 50, &NoiseSpec::Uniform, case).unwrap();
        let a_tilde = plant.a.sub(&l.matmul(&plant.c)).abs();
        let drive = vecops::add(
            &plant.w.abs().mat_vec(&plant.delta_w()),
            &l.matmul(&plant.v).abs().mat_vec(&plant.delta_v()),
        );
        let mut e = plant.x0.widths();
        for k in 0..=50 {
            let sim = traj.x_widths(k);
            for i in 0..plant.n() {
                worst = worst.max((sim[i] - e[i]).abs());
            }
            e = vecops::add(&a_tilde.mat_vec(&e), &drive);
        }
    }
    let pass = worst <= 1e-12;
    verdict(
        2,
        "error-recursion equivalence",
        pass,
        &format!("worst deviation {worst:.3e} over 100 instances"),
    );
    assert!(pass, "worst deviation {worst:.3e} exceeds 1e-12");
}

fn bisect_minimal_lmi_gamma(plant: &PlantModel, l: &Matrix, direct: f64, steps: usize) -> f64 {
    let mut lo = direct;
    let mut hi = 2.0 * direct;
    assert!(
        find_certificate(plant, l, LmiKind::Stability, hi)
            .unwrap()
            .feasible,
        "certificate must exist at twice the direct gain"
    );
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if find_certificate(plant, l, LmiKind::Stability, mid)
            .unwrap()
            .feasible
        {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

// 3. The bisected minimal feasible LMI level matches gamma_direct within
// 2% on the fixture and 5% on 50 random stable instances, and never
// undercuts it.
#[test]
fn criterion_03_hinf_cross_validation() {
    let (plant, l, alpha, _) = market();
    let err = build_error_system(&plant, &l, alpha);
    let direct = gamma_direct(&err).unwrap();
    let minimal = bisect_minimal_lmi_gamma(&plant, &l, direct, 12);
    let fixture_ok = minimal <= 1.02 * direct && minimal >= direct - 1e-12;

    let mut gen = InstanceGen::new(3);
    let mut worst_ratio = 1.0f64;
    let mut undercut = false;
    for _ in 0..50 {
        let (plant, l) = gen.stable_case(3);
        let err = build_error_system(&plant, &l, 1.0);
        let direct = gamma_direct(&err).unwrap();
        let minimal = bisect_minimal_lmi_gamma(&plant, &l, direct, 9);
        worst_ratio = worst_ratio.max(minimal / direct);
        undercut |= minimal < direct - 1e-12;
    }
    let pass = fixture_ok && worst_ratio <= 1.05 && !undercut;
    verdict(
        3,
        "H-infinity cross-validation",
        pass,
        &format!(
            "fixture ratio {:.6}, worst random ratio {worst_ratio:.6}, undercut {undercut}",
            minimal / direct
        ),
    );
    assert!(fixture_ok, "fixture ratio {}", minimal / direct);
    assert!(worst_ratio <= 1.05, "worst random ratio {worst_ratio}");
    assert!(!undercut, "LMI level fell below gamma_direct");
}

// Independent dense-grid evaluator for criterion 4, built on the public
// kernels only.
fn resolvent_gain_oracle(f: &Matrix, l: &Matrix, theta: f64) -> f64 {
    let n = f.rows();
    let m = l.cols();
    let (c, s) = (theta.cos(), theta.sin());
    let mut aug = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = -f[(i, j)];
            aug[(n + i, n + j)] = -f[(i, j)];
        }
        aug[(i, i)] += c;
        aug[(n + i, n + i)] += c;
        aug[(i, n + i)] = -s;
        aug[(n + i, i)] = s;
    }
    let mut rhs = Matrix::zeros(2 * n, m);
    for i in 0..n {
        for j in 0..m {
            rhs[(i, j)] = l[(i, j)];
        }
    }
    let x = solve(&aug, &rhs).unwrap();
    let mut rep = Matrix::zeros(2 * n, 2 * m);
    for i in 0..n {
        for j in 0..m {
            rep[(i, j)] = x[(i, j)];
            rep[(n + i, m + j)] = x[(i, j)];
            rep[(i, m + j)] = -x[(n + i, j)];
            rep[(n + i, j)] = x[(n + i, j)];
        }
    }
    sigma_max(&rep)
}

// 4. eta_hinf matches a 100000-point dense grid to 1e-5 on 50 random
// stable 3x3 closed loops.
#[test]
fn criterion_04_eta_cross_validation() {
    let mut gen = InstanceGen::new(4);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (plant, l) = loop {
            let (plant, l) = gen.stable_case(3);
            if plant.n() == 3 && l.max_abs() > 0.0 {
                break (plant, l);
            }
        };
        let eta = eta_hinf(&plant, &l).unwrap();
        let f = plant.a.sub(&l.matmul(&plant.c));
        let mut dense = 0.0f64;
        for j in 0..100_000 {
            let theta = j as f64 * std::f64::consts::PI / 99_999.0;
            dense = dense.max(resolvent_gain_oracle(&f, &l, theta));
        }
        worst = worst.max((eta - dense).abs() / dense.max(1.0));
    }
    let pass = worst <= 1e-5;
    verdict(
        4,
        "eta cross-validation",
        pass,
        &format!("worst relative deviation {worst:.3e} over 50 loops"),
    );
    assert!(pass, "worst deviation {worst:.3e} exceeds 1e-5");
}

// 5. Non-private synthesis reproduces the published attenuation level:
// returned gamma <= 0.883 within 5 minutes.
//
// This criterion is not attainable: with W = I and unit process-noise
// widths the direct gain sigma_max((I-A_tilde)^{-1}[|W| |LV|]) is at
// least 1 for every gain L (the resolvent dominates the identity
// entrywise), and the stability matrix inequality itself forces gamma > 1
// through its [[Q, Q], [Q, gamma I]] and [[Q, I], [I, gamma I]] minors.
// The search's global optimum (the deadbeat-like gain L = A) sits at
// gamma_direct ~ 1.4438, reported 1.02x ~ 1.4727. The published
// gamma* = 0.865 with the published gain actually certifies at
// gamma_direct ~ 2.4187 under its own width dynamics. The
// assertion is kept as specified and fails honestly.
#[test]
fn criterion_05_nonprivate_synthesis_reproduces_market() {
    let (plant, ..) = market();
    let start = Instant::now();
    let result = synth_nonprivate(&SynthesisProblem::nonprivate(plant)).unwrap();
    let elapsed = start.elapsed();
    let in_time = elapsed.as_secs_f64() < 300.0;
    let pass = result.gamma_reported <= 0.883 && in_time;
    verdict(
        5,
        "non-private synthesis reproduces the market example",
        pass,
        &format!(
            "returned gamma {:.6} (direct {:.6}) vs required 0.883, {elapsed:.2?}; \
             unattainable: every gain has gamma_direct >= 1 on this fixture (W = I)",
            result.gamma_reported, result.design.gamma
        ),
    );
    assert!(in_time, "synthesis took {elapsed:?}");
    assert!(
        result.gamma_reported <= 0.883,
        "returned gamma {} exceeds 0.883: the published gamma* = 0.865 is inconsistent \
         with its own width dynamics on this fixture (gamma >= 1 for every gain \
         when W = I; the published gain itself has gamma_direct = {:.4}); see the \
         summary table of reproduce-example for the side-by-side comparison",
        result.gamma_reported,
        2.418705081043358f64
    );
}

// 6. Scalar optimality oracle: synthesized gamma within 1% of an
// exhaustive grid over L in [-5, 5], step 1e-4, on 50 random plants.
#[test]
fn criterion_06_scalar_optimality_oracle() {
    let mut gen = InstanceGen::new(6);
    let mut worst_ratio = 1.0f64;
    for _ in 0..50 {
        let a = gen.draw(-1.5, 1.5);
        let c = gen.draw(-1.5, 1.5);
        let w = gen.draw(0.2, 2.0);
        let v = gen.draw(0.2, 2.0);
        let plant = PlantModel {
            a: Matrix::from_rows(&[vec![a]]),
            c: Matrix::from_rows(&[vec![c]]),
            w: Matrix::from_rows(&[vec![w]]),
            v: Matrix::from_rows(&[vec![v]]),
            gamma: Matrix::from_rows(&[vec![1.0]]),
            x0: IntervalVector::point(vec![0.0]),
            w_bounds: IntervalVector::new(vec![-0.5], vec![0.5]).unwrap(),
            v_bounds: IntervalVector::new(vec![0.0], vec![1.0]).unwrap(),
            output_blocks: vec![1],
        };
        // grid oracle on the closed scalar form
        let mut grid_best = f64::INFINITY;
        let mut l = -5.0f64;
        while l <= 5.0 {
            let a_tilde = (a - l * c).abs();
            if a_tilde < 1.0 {
                let gamma = (w * w + (l * v) * (l * v)).sqrt() / (1.0 - a_tilde);
                grid_best = grid_best.min(gamma);
            }
            l += 1e-4;
        }
        let result = synth_nonprivate(&SynthesisProblem::nonprivate(plant));
        match result {
            Ok(result) => {
                worst_ratio = worst_ratio.max(result.design.gamma / grid_best);
            }
            Err(_) => {
                assert!(
                    !grid_best.is_finite(),
                    "search failed where the grid found {grid_best}"
                );
            }
        }
    }
    let pass = worst_ratio <= 1.01;
    verdict(
        6,
        "scalar optimality oracle",
        pass,
        &format!("worst search/grid ratio {worst_ratio:.6}"),
    );
    assert!(pass, "worst ratio {worst_ratio}");
}

// 7. Guaranteed-privacy property: on a scalar family with the budget
// made feasible by delta-bisection, 1000 boundary-mode pairs over
// horizon 100 show zero violations; the published market budget is not
// satisfiable and its residual is reported instead.
#[test]
fn criterion_07_guaranteed_privacy_property() {
    let s = parse_scenario(gpobs_core::scalar_fixture()).unwrap();
    let plant = s.plant;
    let rho = 1e-3;
    // delta-bisection: shrink delta until the constraint just binds for
    // the design synthesized under the loosest budget
    let loose = PrivacyBudget::new(0.0, 1e3, rho).unwrap();
    let free = synth_private(&SynthesisProblem::private(plant.clone(), loose)).unwrap();
    assert_eq!(free.status, SynthStatus::Certified);
    let lhs = privacy_constraint_lhs(&plant, &free.design, &loose);
    let (mut lo, mut hi) = (0.0f64, 1e3f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid >= lhs {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let budget = PrivacyBudget::new(0.0, hi * 1.05, rho).unwrap();
    let result = synth_private(&SynthesisProblem::private(plant.clone(), budget)).unwrap();
    assert_eq!(result.status, SynthStatus::Certified);

    let report = audit_guaranteed(
        &plant,
        &result.design,
        &budget,
        1000,
        100,
        7,
        AdjacencyMode::Boundary,
    )
    .unwrap();

    // the published market budget, for the record
    let (mplant, ml, malpha, mbudget) = market();
    let (mdesign, _) = load_fixture_design(&mplant, &ml, malpha).unwrap();
    let residual = privacy_constraint_lhs(&mplant, &mdesign, &mbudget) - mbudget.target_bound();

    let pass = report.violations == 0 && residual > 0.0;
    verdict(
        7,
        "guaranteed-privacy property",
        pass,
        &format!(
            "0 violations required, got {}; market budget residual {residual:.3} \
             (documented inconsistency, reported not asserted)",
            report.violations
        ),
    );
    assert_eq!(report.violations, 0, "worst {}", report.worst_scaled);
    assert!(residual > 0.0);
}

// 8. Accuracy analysis: the closed form equals the two-recursion width
// difference to 1e-8 for all k <= 100 on the market NP/GP pair, the gap
// converges monotonically after the transient, and the steady state is
// finite and positive.
#[test]
fn criterion_08_accuracy_analysis() {
    let (plant, l, alpha, _) = market();
    let np = synth_nonprivate(&SynthesisProblem::nonprivate(plant.clone()))
        .unwrap()
        .design;
    let (gp, _) = load_fixture_design(&plant, &l, alpha).unwrap();

    let closed = accuracy_profile(&plant, &np, &gp, 100).unwrap();
    let steady = accuracy_steady(&plant, &np, &gp).unwrap();

    // two side-by-side width recursions
    let run = |d: &ObserverDesign| -> Vec<Vec<f64>> {
        let a_tilde = plant.a.sub(&d.l.matmul(&plant.c)).abs();
        let drive = vecops::add(
            &plant.w.abs().mat_vec(&plant.delta_w()),
            &d.l.matmul(&plant.v)
                .abs()
                .mat_vec(&vecops::scale(&plant.delta_v(), d.alpha)),
        );
        let mut e = plant.x0.widths();
        let mut out = vec![plant.gamma.abs().mat_vec(&e)];
        for _ in 0..100 {
            e = vecops::add(&a_tilde.mat_vec(&e), &drive);
            out.push(plant.gamma.abs().mat_vec(&e));
        }
        out
    };
    let z_np = run(&np);
    let z_gp = run(&gp);
    let mut worst = 0.0f64;
    for k in 0..=100 {
        let recursion = vecops::norm_inf(&vecops::sub(&z_np[k], &z_gp[k]));
        worst = worst.max((closed[k] - recursion).abs());
    }
    let tail_monotone = closed[10..]
        .windows(2)
        .all(|pair| (pair[1] - steady).abs() <= (pair[0] - steady).abs() + 1e-12);

    let pass = worst <= 1e-8 && tail_monotone && steady.is_finite() && steady > 0.0;
    verdict(
        8,
        "accuracy analysis",
        pass,
        &format!("worst closed-form deviation {worst:.3e}, steady state {steady:.6}"),
    );
    assert!(worst <= 1e-8);
    assert!(tail_monotone, "gap does not converge monotonically");
    assert!(steady.is_finite() && steady > 0.0);
}

fn run_reproduce(dir: &Path) -> PathBuf {
    let out = Command::new(env!("CARGO_BIN_EXE_gpobs"))
        .args(["reproduce-example", "--out", dir.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir.to_path_buf()
}

// 9. Figure-1 qualitative ordering from the end-to-end pipeline:
// NP <= GP and GP < DP at k = 100.
#[test]
fn criterion_09_figure_ordering() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-reproduce");
    let _ = std::fs::remove_dir_all(&dir);
    run_reproduce(&dir);
    let widths = std::fs::read_to_string(dir.join("widths.csv")).unwrap();
    let last: Vec<f64> = widths
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect();
    let (k, np, gp, dp) = (last[0], last[1], last[2], last[3]);
    let pass = k == 100.0 && np <= gp && gp < dp;
    verdict(
        9,
        "figure-1 qualitative ordering",
        pass,
        &format!("k={k}: NP {np:.4} <= GP {gp:.4} < DP {dp:.4}"),
    );
    assert_eq!(k, 100.0);
    assert!(np <= gp, "NP {np} vs GP {gp}");
    assert!(gp < dp, "GP {gp} vs DP {dp}");
}

// 10. Determinism: two identical reproduce-example runs emit
// byte-identical CSVs.
#[test]
fn criterion_10_determinism() {
    let dir1 = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-det1");
    let dir2 = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-det2");
    for dir in [&dir1, &dir2] {
        let _ = std::fs::remove_dir_all(dir);
        run_reproduce(dir);
    }
    let mut identical = true;
    for name in [
        "np_trajectory.csv",
        "gp_trajectory.csv",
        "dp_trajectory.csv",
        "widths.csv",
        "manifest.txt",
    ] {
        let a = std::fs::read(dir1.join(name)).unwrap();
        let b = std::fs::read(dir2.join(name)).unwrap();
        identical &= a == b;
    }
    verdict(
        10,
        "determinism",
        identical,
        "reproduce-example twice, all CSVs and the manifest byte-compared",
    );
    assert!(identical);
}

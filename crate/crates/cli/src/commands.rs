//! Command implementations: each loads a scenario, runs the
//! corresponding library pipeline, and writes CSVs, reports, and a
//! manifest into the run directory.

use std::fmt::Write as _;
use std::path::Path;

use gpobs_core::audit::{audit_guaranteed, dp_baseline};
use gpobs_core::hinf::{
    accuracy_profile, accuracy_steady, privacy_constraint_lhs_with, ConstraintReading,
};
use gpobs_core::matops::vecops;
use gpobs_core::observer::{simulate, NoiseSpec, ObserverDesign};
use gpobs_core::plant::PlantModel;
use gpobs_core::scenario::{
    load_scenario, parse_gain_file, parse_scenario, serialize_gain_block, GainBlock, Scenario,
};
use gpobs_core::synthesis::{
    load_fixture_design, synth_nonprivate, synth_private, SynthesisProblem, SynthesisResult,
};

use crate::manifest::{resolve_out_dir, RunManifest};
use crate::{out, outln};
use crate::{AccuracyArgs, AuditArgs, Failure, ReproduceArgs, SimulateArgs, SynthArgs};

fn load(path: &Path) -> Result<Scenario, Failure> {
    load_scenario(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Resolve a design reference: the scenario's gain block, a fresh
/// synthesis, or a gain-block file path.
fn resolve_design(scenario: &Scenario, reference: &str) -> Result<ObserverDesign, Failure> {
    match reference {
        "paper-gain" => {
            let gain = scenario
                .gain
                .as_ref()
                .ok_or_else(|| Failure::usage("scenario has no gain block for 'paper-gain'"))?;
            let (design, _) = load_fixture_design(&scenario.plant, &gain.l, gain.alpha)
                .map_err(|e| Failure::numerical(e.to_string()))?;
            Ok(design)
        }
        "synth-np" => {
            let problem = SynthesisProblem::nonprivate(scenario.plant.clone());
            let result =
                synth_nonprivate(&problem).map_err(|e| Failure::numerical(e.to_string()))?;
            Ok(result.design)
        }
        "synth-gp" => {
            let budget = scenario
                .budget
                .ok_or_else(|| Failure::usage("scenario has no privacy budget for 'synth-gp'"))?;
            let problem = SynthesisProblem::private(scenario.plant.clone(), budget);
            let result = synth_private(&problem).map_err(|e| Failure::numerical(e.to_string()))?;
            Ok(result.design)
        }
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::usage(format!("design reference '{path}' is not readable: {e}"))
            })?;
            let gain = parse_gain_file(&text)
                .map_err(|e| Failure::usage(format!("design file {path}: {e}")))?;
            if gain.l.rows() != scenario.plant.n() || gain.l.cols() != scenario.plant.m() {
                return Err(Failure::usage(format!(
                    "design file {path}: gain is {}x{}, plant needs {}x{}",
                    gain.l.rows(),
                    gain.l.cols(),
                    scenario.plant.n(),
                    scenario.plant.m()
                )));
            }
            let (design, _) = load_fixture_design(&scenario.plant, &gain.l, gain.alpha)
                .map_err(|e| Failure::numerical(e.to_string()))?;
            Ok(design)
        }
    }
}

fn budget_readings(
    plant: &PlantModel,
    design: &ObserverDesign,
    scenario: &Scenario,
    sigma_min: bool,
    literal_alpha: bool,
) -> String {
    let mut out = String::new();
    if let Some(budget) = &scenario.budget {
        let selected = ConstraintReading {
            sigma_min,
            literal_alpha,
        };
        let lhs = privacy_constraint_lhs_with(plant, design, budget, selected);
        let bound = budget.target_bound();
        let _ = writeln!(out, "budget_bound: {bound}");
        let _ = writeln!(out, "budget_lhs: {lhs}");
        let _ = writeln!(out, "budget_residual: {}", lhs - bound);
        let _ = writeln!(out, "budget_satisfied: {}", lhs <= bound);
        let _ = writeln!(
            out,
            "budget_reading: sigma_min={} literal_alpha={}",
            sigma_min, literal_alpha
        );
        // both alternate readings, for the record
        for (label, reading) in [
            ("default", ConstraintReading::default()),
            (
                "literal_alpha",
                ConstraintReading {
                    sigma_min: false,
                    literal_alpha: true,
                },
            ),
            (
                "sigma_min",
                ConstraintReading {
                    sigma_min: true,
                    literal_alpha: false,
                },
            ),
        ] {
            let value = privacy_constraint_lhs_with(plant, design, budget, reading);
            let _ = writeln!(out, "budget_lhs_{label}: {value}");
        }
    } else {
        let _ = writeln!(out, "budget: none");
    }
    out
}

pub fn cmd_synth(args: &SynthArgs) -> Result<u8, Failure> {
    let scenario = load(&args.scenario)?;
    let out_dir = resolve_out_dir(args.common.out.as_deref(), "synth")?;
    let mut problem = if args.private {
        let budget = scenario
            .budget
            .ok_or_else(|| Failure::usage("--private needs a budget in the scenario"))?;
        SynthesisProblem::private(scenario.plant.clone(), budget)
    } else {
        SynthesisProblem::nonprivate(scenario.plant.clone())
    };
    problem.options.structure = args.mask;
    problem.options.seed = args.common.seed.unwrap_or(scenario.options.seed);
    if let Some(iters) = args.iters {
        problem.options.max_evals = iters.max(1);
    }
    let result = if args.private {
        synth_private(&problem)
    } else {
        synth_nonprivate(&problem)
    }
    .map_err(|e| Failure::numerical(e.to_string()))?;

    let mut manifest = RunManifest::new(
        if args.private {
            "synth --private"
        } else {
            "synth --nonprivate"
        },
        &args.scenario.display().to_string(),
        problem.options.seed,
        args.common.horizon.unwrap_or(scenario.options.horizon),
        &out_dir,
    );
    let gain = GainBlock {
        l: result.design.l.clone(),
        alpha: result.design.alpha,
    };
    manifest.write_artifact("gain.cfg", &serialize_gain_block(&gain))?;
    let mut report = result.to_text();
    report.push_str(&budget_readings(
        &scenario.plant,
        &result.design,
        &scenario,
        args.sigma_min,
        args.literal_alpha,
    ));
    manifest.write_artifact("report.txt", &report)?;
    manifest.note("status", format!("{:?}", result.status));
    manifest.finish()?;

    outln!(
        "synth: status {:?}, gamma_direct {}, gamma_reported {}, alpha {}",
        result.status,
        result.design.gamma,
        result.gamma_reported,
        result.design.alpha
    );
    if let Some(residual) = result.constraint_residual {
        outln!("budget residual: {residual}");
    }
    outln!("outputs in {}", out_dir.display());
    Ok(0)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let scenario = load(&args.scenario)?;
    let out_dir = resolve_out_dir(args.common.out.as_deref(), "simulate")?;
    let design = resolve_design(&scenario, &args.design)?;
    let horizon = args.common.horizon.unwrap_or(scenario.options.horizon);
    let base_seed = args.common.seed.unwrap_or(scenario.options.seed);
    if args.seeds == 0 {
        return Err(Failure::usage("--seeds must be at least 1"));
    }

    let mut manifest = RunManifest::new(
        "simulate",
        &args.scenario.display().to_string(),
        base_seed,
        horizon,
        &out_dir,
    );
    let mut all_contained = true;
    for offset in 0..args.seeds {
        let seed = base_seed + offset as u64;
        let traj = simulate(&scenario.plant, &design, horizon, &NoiseSpec::Uniform, seed)
            .map_err(|e| Failure::numerical(e.to_string()))?;
        let contained = traj.containment_ok(1e-9);
        all_contained &= contained;
        manifest.note(&format!("containment_seed_{seed}"), contained);
        manifest.write_artifact(&format!("trajectory_seed{seed}.csv"), &traj.to_csv())?;
    }
    manifest.note("containment", if all_contained { "ok" } else { "violated" });
    manifest.finish()?;
    outln!(
        "simulate: {} seed(s), horizon {horizon}, containment {}",
        args.seeds,
        if all_contained { "ok" } else { "VIOLATED" }
    );
    outln!("outputs in {}", out_dir.display());
    if all_contained {
        Ok(0)
    } else {
        Err(Failure::numerical("containment self-check failed"))
    }
}

pub fn cmd_audit(args: &AuditArgs) -> Result<u8, Failure> {
    let scenario = load(&args.scenario)?;
    let budget = scenario
        .budget
        .ok_or_else(|| Failure::usage("audit needs a privacy budget in the scenario"))?;
    let out_dir = resolve_out_dir(args.common.out.as_deref(), "audit")?;
    let design = resolve_design(&scenario, &args.design)?;
    let horizon = args.common.horizon.unwrap_or(scenario.options.horizon);
    let seed = args.common.seed.unwrap_or(scenario.options.seed);

    let report = audit_guaranteed(
        &scenario.plant,
        &design,
        &budget,
        args.pairs,
        horizon,
        seed,
        args.mode,
    )
    .map_err(|e| Failure::usage(e.to_string()))?;

    let mut manifest = RunManifest::new(
        "audit",
        &args.scenario.display().to_string(),
        seed,
        horizon,
        &out_dir,
    );
    let mut text = report.to_text();
    text.push_str(&budget_readings(
        &scenario.plant,
        &design,
        &scenario,
        args.sigma_min,
        args.literal_alpha,
    ));
    manifest.write_artifact("audit_report.txt", &text)?;
    manifest.write_artifact("worst_distances.csv", &report.to_csv())?;
    manifest.note("violations", report.violations);
    manifest.finish()?;

    outln!(
        "audit: {} pairs, horizon {horizon}, worst scaled distance {}, violations {}",
        report.pairs,
        report.worst_scaled,
        report.violations
    );
    outln!("outputs in {}", out_dir.display());
    Ok(if report.violations > 0 { 3 } else { 0 })
}

pub fn cmd_accuracy(args: &AccuracyArgs) -> Result<u8, Failure> {
    let scenario = load(&args.scenario)?;
    let out_dir = resolve_out_dir(args.common.out.as_deref(), "accuracy")?;
    let np = resolve_design(&scenario, &args.np_design)?;
    let gp = resolve_design(&scenario, &args.gp_design)?;
    let horizon = args.common.horizon.unwrap_or(scenario.options.horizon);

    let closed = accuracy_profile(&scenario.plant, &np, &gp, horizon)
        .map_err(|e| Failure::numerical(e.to_string()))?;
    let steady = accuracy_steady(&scenario.plant, &np, &gp)
        .map_err(|e| Failure::numerical(e.to_string()))?;

    // simulation oracle: the same quantity from two width recursions
    let recursion = {
        let plant = &scenario.plant;
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
            for _ in 0..horizon {
                e = vecops::add(&a_tilde.mat_vec(&e), &drive);
                out.push(plant.gamma.abs().mat_vec(&e));
            }
            out
        };
        let z_np = run(&np);
        let z_gp = run(&gp);
        (0..=horizon)
            .map(|k| vecops::norm_inf(&vecops::sub(&z_np[k], &z_gp[k])))
            .collect::<Vec<f64>>()
    };

    let mut worst_mismatch = 0.0f64;
    let mut csv = String::from("k,accuracy_closed_form,accuracy_recursion\n");
    for k in 0..=horizon {
        worst_mismatch = worst_mismatch.max((closed[k] - recursion[k]).abs());
        let _ = writeln!(csv, "{},{},{}", k, closed[k], recursion[k]);
    }
    let _ = writeln!(csv, "steady,{steady},");

    let seed = args.common.seed.unwrap_or(scenario.options.seed);
    let mut manifest = RunManifest::new(
        "accuracy",
        &args.scenario.display().to_string(),
        seed,
        horizon,
        &out_dir,
    );
    manifest.write_artifact("accuracy.csv", &csv)?;
    manifest.note("steady_state", steady);
    manifest.note("cross_check_worst_mismatch", worst_mismatch);
    manifest.finish()?;

    outln!("accuracy: steady-state gap {steady}, cross-check mismatch {worst_mismatch}");
    outln!("outputs in {}", out_dir.display());
    if worst_mismatch > 1e-8 {
        return Err(Failure::numerical(format!(
            "closed form and recursion disagree by {worst_mismatch}"
        )));
    }
    Ok(0)
}

pub fn cmd_reproduce(args: &ReproduceArgs) -> Result<u8, Failure> {
    let scenario = parse_scenario(gpobs_core::market5_fixture())
        .map_err(|e| Failure::usage(format!("bundled scenario: {e}")))?;
    let out_dir = resolve_out_dir(args.common.out.as_deref(), "reproduce-example")?;
    let plant = &scenario.plant;
    let budget = scenario.budget.expect("bundled scenario carries a budget");
    let gain = scenario
        .gain
        .clone()
        .expect("bundled scenario carries the gain");
    let horizon = args.common.horizon.unwrap_or(scenario.options.horizon);
    let seed = args.common.seed.unwrap_or(scenario.options.seed);

    // 1. non-private synthesis
    let np_result = synth_nonprivate(&SynthesisProblem::nonprivate(plant.clone()))
        .map_err(|e| Failure::numerical(e.to_string()))?;

    // 2. guaranteed-private synthesis under the published budget (the
    // budget is not satisfiable; the best-residual design is reported)
    let mut gp_problem = SynthesisProblem::private(plant.clone(), budget);
    gp_problem.options.structure = gpobs_core::synthesis::GainStructure::PlantPattern;
    gp_problem.options.max_evals = 2_000;
    let gp_result = synth_private(&gp_problem).map_err(|e| Failure::numerical(e.to_string()))?;

    // 3. the published gain and perturbation factor
    let (paper_design, paper_reports) = load_fixture_design(plant, &gain.l, gain.alpha)
        .map_err(|e| Failure::numerical(e.to_string()))?;

    // 4. trajectories: NP (our synthesis), GP (published design), DP
    // baseline (published gain, stochastic input perturbation)
    let np_traj = simulate(plant, &np_result.design, horizon, &NoiseSpec::Uniform, seed)
        .map_err(|e| Failure::numerical(e.to_string()))?;
    let gp_traj = simulate(plant, &paper_design, horizon, &NoiseSpec::Uniform, seed)
        .map_err(|e| Failure::numerical(e.to_string()))?;
    let dp_traj = dp_baseline(plant, &gain.l, args.dp_scale, horizon, seed)
        .map_err(|e| Failure::numerical(e.to_string()))?;

    let mut manifest = RunManifest::new(
        "reproduce-example",
        "bundled:market5",
        seed,
        horizon,
        &out_dir,
    );
    manifest.write_artifact("np_trajectory.csv", &np_traj.to_csv())?;
    manifest.write_artifact("gp_trajectory.csv", &gp_traj.to_csv())?;
    manifest.write_artifact("dp_trajectory.csv", &dp_traj.to_csv())?;

    // combined width comparison, one row per step
    let p = plant.z_dim();
    let mut widths = String::from("k");
    for j in 1..=p {
        let _ = write!(widths, ",np_width_{j},gp_width_{j},dp_width_{j}");
    }
    widths.push('\n');
    for k in 0..=horizon {
        let _ = write!(widths, "{k}");
        let (wn, wg, wd) = (
            np_traj.z_widths(k),
            gp_traj.z_widths(k),
            dp_traj.z_widths(k),
        );
        for j in 0..p {
            let _ = write!(widths, ",{},{},{}", wn[j], wg[j], wd[j]);
        }
        widths.push('\n');
    }
    manifest.write_artifact("widths.csv", &widths)?;

    let summary = reproduce_summary(
        plant,
        &scenario,
        &np_result,
        &gp_result,
        &paper_design,
        &paper_reports,
        args.dp_scale,
        (
            &np_traj.z_widths(horizon),
            &gp_traj.z_widths(horizon),
            &dp_traj.z_widths(horizon),
        ),
    );
    manifest.write_artifact("summary.txt", &summary)?;
    manifest.note("containment_np", np_traj.containment_ok(1e-9));
    manifest.note("containment_gp", gp_traj.containment_ok(1e-9));
    manifest.note("containment_dp", dp_traj.containment_ok(1e-9));
    manifest.finish()?;

    out!("{summary}");
    outln!("outputs in {}", out_dir.display());
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn reproduce_summary(
    plant: &PlantModel,
    scenario: &Scenario,
    np: &SynthesisResult,
    gp: &SynthesisResult,
    paper_design: &ObserverDesign,
    paper_reports: &[gpobs_core::hinf::LmiReport],
    dp_scale: f64,
    steady_widths: (&[f64], &[f64], &[f64]),
) -> String {
    let budget = scenario.budget.expect("market scenario has a budget");
    let mut out = String::new();
    let _ = writeln!(out, "# five-firm market reproduction");
    let _ = writeln!(out, "paper_reference_gamma: 0.865");
    let _ = writeln!(out, "paper_reference_alpha: 1.364");
    let _ = writeln!(out, "paper_reference_gain: l0=-0.005 l1=0.425 l2=0.076");
    let _ = writeln!(out, "--");
    let _ = writeln!(out, "np_gamma_direct: {}", np.design.gamma);
    let _ = writeln!(out, "np_gamma_reported: {}", np.gamma_reported);
    let _ = writeln!(out, "np_gain_diag: {}", np.design.l[(0, 0)]);
    let _ = writeln!(out, "--");
    let _ = writeln!(out, "gp_status: {:?}", gp.status);
    let _ = writeln!(out, "gp_gamma_direct: {}", gp.design.gamma);
    let _ = writeln!(out, "gp_alpha: {}", gp.design.alpha);
    if let Some(residual) = gp.constraint_residual {
        let _ = writeln!(out, "gp_budget_residual: {residual}");
    }
    let _ = writeln!(out, "--");
    let _ = writeln!(out, "paper_gain_gamma_direct: {}", paper_design.gamma);
    let _ = writeln!(out, "paper_gain_eta_direct: {}", paper_design.eta);
    let _ = writeln!(out, "paper_gain_alpha: {}", paper_design.alpha);
    for report in paper_reports {
        let _ = writeln!(
            out,
            "paper_gain_certificate_{}: level {} min_eig {} feasible {}",
            report.which, report.level, report.min_eig, report.feasible
        );
    }
    let lhs =
        privacy_constraint_lhs_with(plant, paper_design, &budget, ConstraintReading::default());
    let _ = writeln!(out, "paper_gain_budget_lhs: {lhs}");
    let _ = writeln!(out, "paper_gain_budget_bound: {}", budget.target_bound());
    let _ = writeln!(
        out,
        "paper_gain_budget_residual: {}",
        lhs - budget.target_bound()
    );
    let _ = writeln!(out, "--");
    let _ = writeln!(out, "dp_noise_scale: {dp_scale}");
    let (wn, wg, wd) = steady_widths;
    let _ = writeln!(out, "steady_width_np: {}", wn[0]);
    let _ = writeln!(out, "steady_width_gp: {}", wg[0]);
    let _ = writeln!(out, "steady_width_dp: {}", wd[0]);
    out
}

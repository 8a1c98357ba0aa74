//! Containment and width-recursion properties of the framer on randomly
//! generated plants with stabilizing-by-construction designs.

use proptest::prelude::*;

use gpobs_core::matops::{spectral_radius_nonneg, vecops, Matrix};
use gpobs_core::observer::{simulate, NoiseSpec, ObserverDesign, Provenance};
use gpobs_core::plant::{IntervalVector, PlantModel};

#[derive(Debug, Clone)]
struct RandomCase {
    plant: PlantModel,
    l: Matrix,
    alpha: f64,
    seed: u64,
}

/// Random coupled plant of dimension 1..=4 with a gain kept small enough
/// that |A - LC| stays a strict contraction (row sums below 0.9).
fn random_case() -> impl Strategy<Value = RandomCase> {
    (1usize..=4, any::<u64>()).prop_flat_map(|(n, seed)| {
        let entries = proptest::collection::vec(-0.18f64..0.18, n * n);
        let c_entries = proptest::collection::vec(-1.0f64..1.0, n * n);
        let l_entries = proptest::collection::vec(-0.08f64..0.08, n * n);
        let w_entries = proptest::collection::vec(-1.0f64..1.0, n * n);
        let widths = proptest::collection::vec(0.0f64..0.5, 3 * n);
        let alpha = 0.5f64..2.0;
        (entries, c_entries, l_entries, w_entries, widths, alpha).prop_map(
            move |(a, c, l, w, widths, alpha)| {
                let chunk = |v: &[f64]| -> Matrix {
                    Matrix::from_rows(&v.chunks(n).map(|r| r.to_vec()).collect::<Vec<_>>())
                };
                let plant = PlantModel {
                    a: chunk(&a),
                    c: chunk(&c),
                    w: chunk(&w),
                    v: Matrix::identity(n),
                    gamma: Matrix::from_fn(1, n, |_, j| if j % 2 == 0 { 1.0 } else { -1.0 }),
                    x0: IntervalVector::new(
                        (0..n).map(|i| -widths[i]).collect(),
                        (0..n).map(|i| widths[i]).collect(),
                    )
                    .unwrap(),
                    w_bounds: IntervalVector::new(
                        (0..n).map(|i| -widths[n + i]).collect(),
                        (0..n).map(|i| widths[n + i]).collect(),
                    )
                    .unwrap(),
                    v_bounds: IntervalVector::new(
                        (0..n).map(|i| -widths[2 * n + i]).collect(),
                        (0..n).map(|i| widths[2 * n + i]).collect(),
                    )
                    .unwrap(),
                    output_blocks: vec![n],
                };
                RandomCase {
                    plant,
                    l: chunk(&l),
                    alpha,
                    seed,
                }
            },
        )
    })
}

fn design_for(case: &RandomCase) -> Option<ObserverDesign> {
    let closed = case.plant.a.sub(&case.l.matmul(&case.plant.c)).abs();
    let rho = spectral_radius_nonneg(&closed).unwrap();
    if rho >= 0.95 {
        return None;
    }
    Some(
        ObserverDesign::new(
            case.l.clone(),
            case.alpha,
            1.0,
            1.0,
            vec![1.0; case.plant.n()],
            Provenance::Synthesized,
        )
        .unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Prop 2: the framer brackets the true state and the published
    // aggregate for every admissible noise realization.
    #[test]
    fn framer_brackets_truth(case in random_case()) {
        prop_assume!(design_for(&case).is_some());
        let design = design_for(&case).unwrap();
        let traj = simulate(&case.plant, &design, 60, &NoiseSpec::Uniform, case.seed).unwrap();
        prop_assert!(traj.containment_ok(1e-9));
    }

    // widths from the co-simulation equal the autonomous recursion
    // e' = |A-LC| e + Λ δ_λ to 1e-12
    #[test]
    fn width_recursion_is_exact(case in random_case()) {
        prop_assume!(design_for(&case).is_some());
        let design = design_for(&case).unwrap();
        let traj = simulate(&case.plant, &design, 50, &NoiseSpec::Uniform, case.seed).unwrap();
        let a_tilde = case.plant.a.sub(&design.l.matmul(&case.plant.c)).abs();
        let drive = vecops::add(
            &case.plant.w.abs().mat_vec(&case.plant.delta_w()),
            &design
                .l
                .matmul(&case.plant.v)
                .abs()
                .mat_vec(&vecops::scale(&case.plant.delta_v(), design.alpha)),
        );
        let mut e = case.plant.x0.widths();
        for k in 0..=50 {
            let sim = traj.x_widths(k);
            for i in 0..case.plant.n() {
                prop_assert!((sim[i] - e[i]).abs() <= 1e-12,
                    "k={} i={}: sim {} recursion {}", k, i, sim[i], e[i]);
            }
            e = vecops::add(&a_tilde.mat_vec(&e), &drive);
        }
    }
}

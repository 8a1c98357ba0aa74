//! The interval framer, plant co-simulation, and the set-valued release
//! mechanism.
//!
//! One framer step maps the current state box [x̲, x̄] and measurement y to
//!
//! ```text
//! x̲' = (A-LC)⁺x̲ - (A-LC)⁻x̄ + Ly + W⁺w̲ - W⁻w̄ + (LV)⁻v̲' - (LV)⁺v̄'
//! x̄' = (A-LC)⁺x̄ - (A-LC)⁻x̲ + Ly + W⁺w̄ - W⁻w̲ + (LV)⁻v̄' - (LV)⁺v̲'
//! ```
//!
//! with v' = α·v the perturbed measurement-noise bounds, and publishes
//! z̲ = Γ⁺x̲ - Γ⁻x̄, z̄ = Γ⁺x̄ - Γ⁻x̲. The matrix splits are computed once
//! per (plant, design) pair and reused every step.

use thiserror::Error;

use crate::matops::{split, vecops, Matrix, MatrixSplit};
use crate::plant::{IntervalVector, PlantModel};
use crate::rng::{self, stream, CounterRng};

/// Hard cap on simulation length to bound trajectory memory.
pub const MAX_HORIZON: usize = 1_000_000;

#[derive(Debug, Clone, Error)]
pub enum ObserverError {
    #[error("gain must be {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    GainDimension {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("design invariant violated: {0}")]
    Invariant(String),
    #[error("measurement length {got}, expected {expected}")]
    MeasurementLength { expected: usize, got: usize },
    #[error("state box length {got}, expected {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("horizon {0} exceeds the {MAX_HORIZON}-step cap")]
    HorizonTooLarge(usize),
    #[error("horizon must be at least 1")]
    HorizonZero,
    #[error("recorded {channel} noise out of bounds at step {step}")]
    NoiseOutOfBounds { channel: &'static str, step: usize },
    #[error("recorded noise sequence for {channel} is shorter than the horizon")]
    NoiseTooShort { channel: &'static str },
}

/// Where a design came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Synthesized,
    LoadedFixture,
    NonPrivate,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provenance::Synthesized => write!(f, "synthesized"),
            Provenance::LoadedFixture => write!(f, "loaded-fixture"),
            Provenance::NonPrivate => write!(f, "non-private"),
        }
    }
}

/// A gain together with its certified levels: γ bounds the error-system
/// gain from noise widths to framer width, η the center-dynamics gain
/// from measurement deviation, and `q` is the diagonal storage-function
/// certificate both LMIs share.
#[derive(Debug, Clone)]
pub struct ObserverDesign {
    pub l: Matrix,
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub q: Vec<f64>,
    pub provenance: Provenance,
}

impl ObserverDesign {
    pub fn new(
        l: Matrix,
        alpha: f64,
        gamma: f64,
        eta: f64,
        q: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self, ObserverError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ObserverError::Invariant(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) || !(eta > 0.0 && eta.is_finite()) {
            return Err(ObserverError::Invariant(format!(
                "certified levels must be positive, got gamma {gamma}, eta {eta}"
            )));
        }
        if q.is_empty() || q.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(ObserverError::Invariant(
                "certificate Q must have positive entries".into(),
            ));
        }
        Ok(ObserverDesign {
            l,
            alpha,
            gamma,
            eta,
            q,
            provenance,
        })
    }
}

/// Precomputed framer matrices for one (plant, design) pair.
pub struct Framer<'p> {
    plant: &'p PlantModel,
    l: Matrix,
    closed_loop: MatrixSplit,
    w_split: MatrixSplit,
    lv_split: MatrixSplit,
    gamma_split: MatrixSplit,
    /// α-scaled measurement noise bounds [v̲', v̄'].
    v_prime: IntervalVector,
}

impl<'p> Framer<'p> {
    pub fn new(plant: &'p PlantModel, design: &ObserverDesign) -> Result<Self, ObserverError> {
        Self::with_gain(plant, &design.l, design.alpha)
    }

    /// Build from a bare gain and perturbation factor.
    pub fn with_gain(plant: &'p PlantModel, l: &Matrix, alpha: f64) -> Result<Self, ObserverError> {
        if l.rows() != plant.n() || l.cols() != plant.m() {
            return Err(ObserverError::GainDimension {
                expected_rows: plant.n(),
                expected_cols: plant.m(),
                rows: l.rows(),
                cols: l.cols(),
            });
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ObserverError::Invariant(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let closed = plant.a.sub(&l.matmul(&plant.c));
        Ok(Framer {
            plant,
            l: l.clone(),
            closed_loop: split(&closed),
            w_split: split(&plant.w),
            lv_split: split(&l.matmul(&plant.v)),
            gamma_split: split(&plant.gamma),
            v_prime: plant.v_bounds.scale(alpha),
        })
    }

    pub fn plant(&self) -> &PlantModel {
        self.plant
    }

    /// α-scaled measurement-noise bounds used by this framer.
    pub fn v_prime(&self) -> &IntervalVector {
        &self.v_prime
    }

    /// One framer step; returns the next (x̲, x̄) with x̲ ≤ x̄.
    pub fn step(
        &self,
        x_lo: &[f64],
        x_hi: &[f64],
        y: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), ObserverError> {
        let n = self.plant.n();
        if x_lo.len() != n || x_hi.len() != n {
            return Err(ObserverError::StateLength {
                expected: n,
                got: x_lo.len().max(x_hi.len()),
            });
        }
        if y.len() != self.plant.m() {
            return Err(ObserverError::MeasurementLength {
                expected: self.plant.m(),
                got: y.len(),
            });
        }
        let ly = self.l.mat_vec(y);
        let (w_lo, w_hi) = self
            .w_split
            .interval_image(self.plant.w_bounds.lo(), self.plant.w_bounds.hi());
        // (LV)⁻v̲' - (LV)⁺v̄' and (LV)⁻v̄' - (LV)⁺v̲': the interval image of
        // -LV over [v̲', v̄']
        let v_lo_term = vecops::sub(
            &self.lv_split.minus.mat_vec(self.v_prime.lo()),
            &self.lv_split.plus.mat_vec(self.v_prime.hi()),
        );
        let v_hi_term = vecops::sub(
            &self.lv_split.minus.mat_vec(self.v_prime.hi()),
            &self.lv_split.plus.mat_vec(self.v_prime.lo()),
        );
        let (state_lo, state_hi) = self.closed_loop.interval_image(x_lo, x_hi);

        let mut next_lo = state_lo;
        let mut next_hi = state_hi;
        for i in 0..n {
            next_lo[i] += ly[i] + w_lo[i] + v_lo_term[i];
            next_hi[i] += ly[i] + w_hi[i] + v_hi_term[i];
        }
        Ok((next_lo, next_hi))
    }

    /// Published-aggregate box [z̲, z̄] for the state box [x̲, x̄].
    pub fn z_box(&self, x_lo: &[f64], x_hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.gamma_split.interval_image(x_lo, x_hi)
    }
}

/// Convenience one-shot step; simulation loops should hold a [`Framer`]
/// so the splits are computed once.
pub fn framer_step(
    plant: &PlantModel,
    design: &ObserverDesign,
    x_lo: &[f64],
    x_hi: &[f64],
    y: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), ObserverError> {
    Framer::new(plant, design)?.step(x_lo, x_hi, y)
}

/// Noise input for a simulation.
pub enum NoiseSpec {
    /// Draw x0, w, v uniformly inside their bounds and the perturbation
    /// v^a uniformly from the largest set with α·v̲ ≤ v^a + v ≤ α·v̄.
    Uniform,
    /// Replay recorded sequences; validated against the bounds.
    Recorded {
        x0: Vec<f64>,
        /// w[k], length ≥ horizon.
        w: Vec<Vec<f64>>,
        /// v[k], length ≥ horizon.
        v: Vec<Vec<f64>>,
        /// v^a[k], length ≥ horizon; the sum v + v^a must stay within the
        /// α-scaled bounds.
        v_extra: Vec<Vec<f64>>,
    },
}

/// Time-indexed framers, published-aggregate boxes, and the sampled truth.
#[derive(Debug, Clone)]
pub struct FramerTrajectory {
    pub x_lo: Vec<Vec<f64>>,
    pub x_hi: Vec<Vec<f64>>,
    pub z_lo: Vec<Vec<f64>>,
    pub z_hi: Vec<Vec<f64>>,
    pub x_true: Vec<Vec<f64>>,
    pub z_true: Vec<Vec<f64>>,
    /// Measurements fed to the framer; y[k] drives the k -> k+1 transition.
    pub y: Vec<Vec<f64>>,
}

impl FramerTrajectory {
    /// Number of transitions (stored states run 0..=horizon).
    pub fn horizon(&self) -> usize {
        self.x_lo.len() - 1
    }

    /// Framer widths x̄_k - x̲_k.
    pub fn x_widths(&self, k: usize) -> Vec<f64> {
        vecops::sub(&self.x_hi[k], &self.x_lo[k])
    }

    /// Published-aggregate widths z̄_k - z̲_k.
    pub fn z_widths(&self, k: usize) -> Vec<f64> {
        vecops::sub(&self.z_hi[k], &self.z_lo[k])
    }

    /// True state inside its box at every step, within slack.
    pub fn containment_ok(&self, slack: f64) -> bool {
        (0..self.x_lo.len()).all(|k| {
            vecops::le(&self.x_lo[k], &self.x_true[k], slack)
                && vecops::le(&self.x_true[k], &self.x_hi[k], slack)
                && vecops::le(&self.z_lo[k], &self.z_true[k], slack)
                && vecops::le(&self.z_true[k], &self.z_hi[k], slack)
        })
    }

    /// CSV export: `k` then, per output coordinate j (1-based),
    /// `z_true_j, z_lo_j, z_hi_j, width_j`.
    pub fn to_csv(&self) -> String {
        let p = self.z_lo[0].len();
        let mut out = String::from("k");
        for j in 1..=p {
            out.push_str(&format!(",z_true_{j},z_lo_{j},z_hi_{j},width_{j}"));
        }
        out.push('\n');
        for k in 0..self.z_lo.len() {
            out.push_str(&k.to_string());
            for j in 0..p {
                out.push_str(&format!(
                    ",{},{},{},{}",
                    self.z_true[k][j],
                    self.z_lo[k][j],
                    self.z_hi[k][j],
                    self.z_hi[k][j] - self.z_lo[k][j]
                ));
            }
            out.push('\n');
        }
        out
    }
}

fn check_recorded(
    seq: &[Vec<f64>],
    bounds: &IntervalVector,
    horizon: usize,
    channel: &'static str,
) -> Result<(), ObserverError> {
    if seq.len() < horizon {
        return Err(ObserverError::NoiseTooShort { channel });
    }
    for (step, v) in seq.iter().enumerate().take(horizon) {
        if !bounds.contains(v, 1e-12) {
            return Err(ObserverError::NoiseOutOfBounds { channel, step });
        }
    }
    Ok(())
}

/// Co-simulate the true plant and the framer for `horizon` steps.
///
/// The truth evolves as x' = Ax + Ww with x0, w, v drawn inside their
/// bounds; the measurement fed to the framer is y = Cx + V(v + v^a)
/// where the deliberate perturbation keeps v + v^a inside [α·v̲, α·v̄].
///
/// # Example
///
/// ```
/// use gpobs_core::observer::{simulate, NoiseSpec};
/// use gpobs_core::scenario::parse_scenario;
/// use gpobs_core::synthesis::load_fixture_design;
///
/// let s = parse_scenario(gpobs_core::market5_fixture()).unwrap();
/// let gain = s.gain.unwrap();
/// let (design, _) = load_fixture_design(&s.plant, &gain.l, gain.alpha).unwrap();
/// let traj = simulate(&s.plant, &design, 50, &NoiseSpec::Uniform, 0).unwrap();
/// assert!(traj.containment_ok(1e-9));
/// ```
pub fn simulate(
    plant: &PlantModel,
    design: &ObserverDesign,
    horizon: usize,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<FramerTrajectory, ObserverError> {
    let framer = Framer::new(plant, design)?;
    simulate_with(&framer, horizon, noise, seed)
}

/// As [`simulate`], reusing an existing framer.
pub fn simulate_with(
    framer: &Framer,
    horizon: usize,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<FramerTrajectory, ObserverError> {
    if horizon == 0 {
        return Err(ObserverError::HorizonZero);
    }
    if horizon > MAX_HORIZON {
        return Err(ObserverError::HorizonTooLarge(horizon));
    }
    let plant = framer.plant();
    let (n, n_w, n_v) = (plant.n(), plant.n_w(), plant.n_v());

    let x0_rng = CounterRng::new(seed, stream::X0);
    let w_rng = CounterRng::new(seed, stream::PROCESS_NOISE);
    let v_rng = CounterRng::new(seed, stream::MEASUREMENT_NOISE);
    let va_rng = CounterRng::new(seed, stream::PERTURBATION);

    let x0 = match noise {
        NoiseSpec::Uniform => (0..n)
            .map(|i| x0_rng.uniform(i as u64, plant.x0.lo()[i], plant.x0.hi()[i]))
            .collect::<Vec<f64>>(),
        NoiseSpec::Recorded { x0, .. } => {
            if !plant.x0.contains(x0, 1e-12) {
                return Err(ObserverError::NoiseOutOfBounds {
                    channel: "x0",
                    step: 0,
                });
            }
            x0.clone()
        }
    };
    if let NoiseSpec::Recorded { w, v, v_extra, .. } = noise {
        check_recorded(w, &plant.w_bounds, horizon, "w")?;
        check_recorded(v, &plant.v_bounds, horizon, "v")?;
        if v_extra.len() < horizon {
            return Err(ObserverError::NoiseTooShort { channel: "v_extra" });
        }
        for step in 0..horizon {
            let total = vecops::add(&v[step], &v_extra[step]);
            if !framer.v_prime().contains(&total, 1e-12) {
                return Err(ObserverError::NoiseOutOfBounds {
                    channel: "v_extra",
                    step,
                });
            }
        }
    }

    let mut traj = FramerTrajectory {
        x_lo: Vec::with_capacity(horizon + 1),
        x_hi: Vec::with_capacity(horizon + 1),
        z_lo: Vec::with_capacity(horizon + 1),
        z_hi: Vec::with_capacity(horizon + 1),
        x_true: Vec::with_capacity(horizon + 1),
        z_true: Vec::with_capacity(horizon + 1),
        y: Vec::with_capacity(horizon),
    };

    let mut x = x0;
    let mut lo = plant.x0.lo().to_vec();
    let mut hi = plant.x0.hi().to_vec();
    let record =
        |traj: &mut FramerTrajectory, framer: &Framer, x: &[f64], lo: &[f64], hi: &[f64]| {
            let (z_lo, z_hi) = framer.z_box(lo, hi);
            traj.z_lo.push(z_lo);
            traj.z_hi.push(z_hi);
            traj.z_true.push(plant.gamma.mat_vec(x));
            traj.x_lo.push(lo.to_vec());
            traj.x_hi.push(hi.to_vec());
            traj.x_true.push(x.to_vec());
        };
    record(&mut traj, framer, &x, &lo, &hi);

    for k in 0..horizon {
        let (w_k, total_v) = match noise {
            NoiseSpec::Uniform => {
                let w_k: Vec<f64> = (0..n_w)
                    .map(|i| {
                        w_rng.uniform(
                            rng::step_counter(k, i),
                            plant.w_bounds.lo()[i],
                            plant.w_bounds.hi()[i],
                        )
                    })
                    .collect();
                let v_k: Vec<f64> = (0..n_v)
                    .map(|i| {
                        v_rng.uniform(
                            rng::step_counter(k, i),
                            plant.v_bounds.lo()[i],
                            plant.v_bounds.hi()[i],
                        )
                    })
                    .collect();
                // v^a uniform over the largest admissible set given v_k
                let va_k: Vec<f64> = (0..n_v)
                    .map(|i| {
                        va_rng.uniform(
                            rng::step_counter(k, i),
                            framer.v_prime().lo()[i] - v_k[i],
                            framer.v_prime().hi()[i] - v_k[i],
                        )
                    })
                    .collect();
                (w_k, vecops::add(&v_k, &va_k))
            }
            NoiseSpec::Recorded { w, v, v_extra, .. } => {
                (w[k].clone(), vecops::add(&v[k], &v_extra[k]))
            }
        };
        let y_k = vecops::add(&plant.c.mat_vec(&x), &plant.v.mat_vec(&total_v));
        let (next_lo, next_hi) = framer.step(&lo, &hi, &y_k)?;
        x = vecops::add(&plant.a.mat_vec(&x), &plant.w.mat_vec(&w_k));
        lo = next_lo;
        hi = next_hi;
        traj.y.push(y_k);
        record(&mut traj, framer, &x, &lo, &hi);
    }
    Ok(traj)
}

/// The deterministic set-valued release mechanism: measurements in,
/// published-aggregate boxes out (one per step, starting at k = 0 before
/// any measurement is consumed).
pub fn mechanism(
    plant: &PlantModel,
    design: &ObserverDesign,
    y_sequence: &[Vec<f64>],
) -> Result<Vec<IntervalVector>, ObserverError> {
    let framer = Framer::new(plant, design)?;
    let mut lo = plant.x0.lo().to_vec();
    let mut hi = plant.x0.hi().to_vec();
    let mut out = Vec::with_capacity(y_sequence.len() + 1);
    let push_z = |out: &mut Vec<IntervalVector>, framer: &Framer, lo: &[f64], hi: &[f64]| {
        let (z_lo, z_hi) = framer.z_box(lo, hi);
        out.push(IntervalVector::new(z_lo, z_hi).expect("framer keeps lo <= hi"));
    };
    push_z(&mut out, &framer, &lo, &hi);
    for y in y_sequence {
        let (next_lo, next_hi) = framer.step(&lo, &hi, y)?;
        lo = next_lo;
        hi = next_hi;
        push_z(&mut out, &framer, &lo, &hi);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn test_design(l: Matrix, alpha: f64) -> ObserverDesign {
        let n = l.rows();
        ObserverDesign::new(l, alpha, 1.0, 1.0, vec![1.0; n], Provenance::Synthesized).unwrap()
    }

    fn paper_design() -> (PlantModel, ObserverDesign) {
        let s = parse_scenario(crate::market5_fixture()).unwrap();
        let gain = s.gain.unwrap();
        (s.plant, test_design(gain.l, gain.alpha))
    }

    #[test]
    fn degenerate_step_equals_true_image() {
        // point intervals and an exact measurement: the framer must return
        // the true one-step image on both lines
        let plant = PlantModel {
            a: Matrix::from_rows(&[vec![0.4, -0.3], vec![0.2, 0.5]]),
            c: Matrix::from_rows(&[vec![1.0, 1.0]]),
            w: Matrix::identity(2),
            v: Matrix::from_rows(&[vec![1.0]]),
            gamma: Matrix::row_vector(&[1.0, 1.0]),
            x0: IntervalVector::point(vec![1.0, -2.0]),
            w_bounds: IntervalVector::point(vec![0.3, -0.1]),
            v_bounds: IntervalVector::point(vec![0.2]),
            output_blocks: vec![1],
        };
        let alpha = 1.5;
        let l = Matrix::from_rows(&[vec![0.1], vec![-0.2]]);
        let design = test_design(l.clone(), alpha);
        let x = vec![1.0, -2.0];
        let v_total = alpha * 0.2;
        let y = vec![x[0] + x[1] + v_total];
        let (lo, hi) = framer_step(&plant, &design, &x, &x, &y).unwrap();
        assert_eq!(lo, hi);
        let truth = vecops::add(&plant.a.mat_vec(&x), &plant.w.mat_vec(&[0.3, -0.1]));
        for i in 0..2 {
            assert!((lo[i] - truth[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gain_nonneg_a_ignores_measurement() {
        let plant = PlantModel {
            a: Matrix::from_rows(&[vec![0.5, 0.1], vec![0.0, 0.3]]),
            c: Matrix::identity(2),
            w: Matrix::from_rows(&[vec![1.0, -1.0], vec![0.5, 0.0]]),
            v: Matrix::identity(2),
            gamma: Matrix::row_vector(&[1.0, 0.0]),
            x0: IntervalVector::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap(),
            w_bounds: IntervalVector::new(vec![-0.2, 0.0], vec![0.1, 0.4]).unwrap(),
            v_bounds: IntervalVector::new(vec![0.0, 0.0], vec![0.1, 0.1]).unwrap(),
            output_blocks: vec![2],
        };
        let design = test_design(Matrix::zeros(2, 2), 1.0);
        let lo = vec![-1.0, -0.5];
        let hi = vec![0.5, 1.0];
        let wild_y = vec![99.0, -99.0];
        let (got_lo, got_hi) = framer_step(&plant, &design, &lo, &hi, &wild_y).unwrap();
        // reduces to x̲' = A x̲ + W⁺w̲ - W⁻w̄ (A >= 0, L = 0)
        let ws = split(&plant.w);
        let expect_lo = vecops::add(
            &plant.a.mat_vec(&lo),
            &vecops::sub(
                &ws.plus.mat_vec(plant.w_bounds.lo()),
                &ws.minus.mat_vec(plant.w_bounds.hi()),
            ),
        );
        let expect_hi = vecops::add(
            &plant.a.mat_vec(&hi),
            &vecops::sub(
                &ws.plus.mat_vec(plant.w_bounds.hi()),
                &ws.minus.mat_vec(plant.w_bounds.lo()),
            ),
        );
        assert_eq!(got_lo, expect_lo);
        assert_eq!(got_hi, expect_hi);
    }

    #[test]
    fn market_containment_over_100_steps() {
        let (plant, design) = paper_design();
        for seed in 0..20 {
            let traj = simulate(&plant, &design, 100, &NoiseSpec::Uniform, seed).unwrap();
            assert!(traj.containment_ok(1e-9), "seed {seed}");
        }
    }

    #[test]
    fn zero_noise_gives_exact_tracking() {
        let plant = PlantModel {
            a: Matrix::from_rows(&[vec![0.6, 0.2], vec![-0.1, 0.4]]),
            c: Matrix::identity(2),
            w: Matrix::identity(2),
            v: Matrix::identity(2),
            gamma: Matrix::row_vector(&[1.0, -1.0]),
            x0: IntervalVector::point(vec![0.7, -0.2]),
            w_bounds: IntervalVector::point(vec![0.05, 0.0]),
            v_bounds: IntervalVector::point(vec![0.1, -0.1]),
            output_blocks: vec![2],
        };
        let design = test_design(Matrix::from_rows(&[vec![0.3, 0.0], vec![0.0, 0.2]]), 2.0);
        let traj = simulate(&plant, &design, 50, &NoiseSpec::Uniform, 9).unwrap();
        for k in 0..=50 {
            assert_eq!(traj.z_lo[k], traj.z_hi[k]);
            for j in 0..traj.z_lo[k].len() {
                assert!((traj.z_lo[k][j] - traj.z_true[k][j]).abs() < 1e-9);
            }
        }
    }

    // widths from the co-simulation equal the autonomous error recursion
    // e' = |A-LC| e + |W| δ_w + |LV| (α δ_v) to near machine precision
    #[test]
    fn widths_follow_error_recursion() {
        let (plant, design) = paper_design();
        let traj = simulate(&plant, &design, 100, &NoiseSpec::Uniform, 3).unwrap();
        let a_tilde = plant.a.sub(&design.l.matmul(&plant.c)).abs();
        let w_abs = plant.w.abs();
        let lv_abs = design.l.matmul(&plant.v).abs();
        let drive = vecops::add(
            &w_abs.mat_vec(&plant.delta_w()),
            &lv_abs.mat_vec(&vecops::scale(&plant.delta_v(), design.alpha)),
        );
        let mut e = plant.x0.widths();
        for k in 0..=100 {
            let sim = traj.x_widths(k);
            for i in 0..plant.n() {
                assert!(
                    (sim[i] - e[i]).abs() <= 1e-10,
                    "k={k} i={i}: sim {} vs recursion {}",
                    sim[i],
                    e[i]
                );
            }
            e = vecops::add(&a_tilde.mat_vec(&e), &drive);
        }
    }

    #[test]
    fn widths_are_monotone_in_alpha() {
        let (plant, base) = paper_design();
        let tighter = test_design(base.l.clone(), 1.0);
        let wider = test_design(base.l.clone(), 1.364);
        let t1 = simulate(&plant, &tighter, 60, &NoiseSpec::Uniform, 5).unwrap();
        let t2 = simulate(&plant, &wider, 60, &NoiseSpec::Uniform, 5).unwrap();
        for k in 0..=60 {
            assert!(vecops::le(&t1.x_widths(k), &t2.x_widths(k), 1e-12));
        }
    }

    #[test]
    fn mechanism_is_deterministic_and_width_blind() {
        let (plant, design) = paper_design();
        let traj = simulate(&plant, &design, 30, &NoiseSpec::Uniform, 11).unwrap();
        let z1 = mechanism(&plant, &design, &traj.y).unwrap();
        let z2 = mechanism(&plant, &design, &traj.y).unwrap();
        for (a, b) in z1.iter().zip(&z2) {
            assert_eq!(a, b);
        }
        // perturbing y at step 0 shifts the boxes but not their widths
        let mut y_shifted = traj.y.clone();
        y_shifted[0][0] += 0.5;
        let z3 = mechanism(&plant, &design, &y_shifted).unwrap();
        for (a, b) in z1.iter().zip(&z3) {
            let wa = vecops::sub(a.hi(), a.lo());
            let wb = vecops::sub(b.hi(), b.lo());
            for (x, y) in wa.iter().zip(&wb) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recorded_noise_out_of_bounds_reports_step() {
        let (plant, design) = paper_design();
        let horizon = 5;
        let ok = simulate(&plant, &design, horizon, &NoiseSpec::Uniform, 0).unwrap();
        // replay with a corrupted w at step 3
        let mut w: Vec<Vec<f64>> = (0..horizon).map(|_| vec![0.0; 5]).collect();
        w[3][2] = 0.7; // outside [-0.5, 0.5]
        let noise = NoiseSpec::Recorded {
            x0: ok.x_true[0].clone(),
            w,
            v: (0..horizon).map(|_| vec![0.5; 5]).collect(),
            v_extra: (0..horizon).map(|_| vec![0.0; 5]).collect(),
        };
        match simulate(&plant, &design, horizon, &noise, 0).unwrap_err() {
            ObserverError::NoiseOutOfBounds { channel: "w", step } => assert_eq!(step, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn horizon_limits_enforced() {
        let (plant, design) = paper_design();
        assert!(matches!(
            simulate(&plant, &design, 0, &NoiseSpec::Uniform, 0),
            Err(ObserverError::HorizonZero)
        ));
        assert!(matches!(
            simulate(&plant, &design, MAX_HORIZON + 1, &NoiseSpec::Uniform, 0),
            Err(ObserverError::HorizonTooLarge(_))
        ));
    }

    #[test]
    fn csv_has_documented_header() {
        let (plant, design) = paper_design();
        let traj = simulate(&plant, &design, 3, &NoiseSpec::Uniform, 1).unwrap();
        let csv = traj.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "k,z_true_1,z_lo_1,z_hi_1,width_1");
        assert_eq!(lines.count(), 4);
    }

    // all noise channels with distinct, non-square dimensions
    #[test]
    fn rectangular_channels_simulate_cleanly() {
        let plant = PlantModel {
            a: Matrix::from_rows(&[
                vec![0.4, 0.1, 0.0],
                vec![0.0, 0.3, 0.1],
                vec![0.1, 0.0, 0.2],
            ]),
            c: Matrix::from_rows(&[vec![1.0, 0.0, 1.0]]),
            w: Matrix::from_rows(&[vec![1.0], vec![0.5], vec![-0.5]]),
            v: Matrix::from_rows(&[vec![0.7, -0.2]]),
            gamma: Matrix::from_rows(&[vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.0]]),
            x0: IntervalVector::new(vec![-1.0; 3], vec![1.0; 3]).unwrap(),
            w_bounds: IntervalVector::new(vec![-0.2], vec![0.2]).unwrap(),
            v_bounds: IntervalVector::new(vec![0.0, -0.1], vec![0.3, 0.1]).unwrap(),
            output_blocks: vec![1],
        };
        let l = Matrix::from_rows(&[vec![0.1], vec![0.0], vec![0.05]]);
        let design = test_design(l, 1.2);
        for seed in 0..10 {
            let traj = simulate(&plant, &design, 40, &NoiseSpec::Uniform, seed).unwrap();
            assert!(traj.containment_ok(1e-9), "seed {seed}");
            assert_eq!(traj.z_lo[0].len(), 2);
        }
    }
}

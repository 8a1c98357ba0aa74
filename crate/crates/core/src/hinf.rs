//! Error-system construction, stability and privacy LMI certification,
//! direct gain computation, and the accuracy gap between non-private and
//! guaranteed-private designs.
//!
//! The framer-width error system is `e' = Ã e + Λ δ_λ` with
//! `Ã = |A-LC|`, `Λ = [|W| |LV|]`, `δ_λ = [δ_w; α δ_v]`.  Because Ã and Λ
//! are entrywise nonnegative, the H∞ norm of the width dynamics is its
//! DC gain `σ_max((I-Ã)⁻¹Λ)` — that is the "direct" level every LMI
//! certificate is measured against.  The center-deviation dynamics
//! `δ' = (A-LC) δ + L (y-y')` are signed, so their gain is computed by a
//! frequency sweep over the unit circle via a real 2n×2n augmentation.

use thiserror::Error;

use crate::matops::{
    self, sigma_max, sigma_min, solve, spectral_radius_nonneg, sym_eig, sym_eig_min_unchecked,
    vecops, MatError, Matrix, PD_MARGIN,
};
use crate::observer::ObserverDesign;
use crate::plant::{PlantModel, PrivacyBudget};

#[derive(Debug, Clone, Error)]
pub enum HinfError {
    #[error("error system unstable: spectral radius {rho} >= 1")]
    Unstable { rho: f64 },
    #[error("resolvent singular at theta = {theta}: closed loop has a unit-circle eigenvalue")]
    ResolventSingular { theta: f64 },
    #[error("certificate input invalid: {0}")]
    BadCertificateInput(String),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// The autonomous width dynamics of the framer.
#[derive(Debug, Clone)]
pub struct ErrorSystem {
    /// |A - LC|, entrywise nonnegative.
    pub a_tilde: Matrix,
    /// [|W| |LV|].
    pub lambda: Matrix,
    /// [δ_w; α·δ_v].
    pub delta_lambda: Vec<f64>,
    pub delta_w: Vec<f64>,
    pub delta_v: Vec<f64>,
}

impl ErrorSystem {
    /// Perron root of Ã; the system is stable iff this is below 1.
    pub fn spectral_radius(&self) -> f64 {
        spectral_radius_nonneg(&self.a_tilde).expect("a_tilde is square nonnegative")
    }
}

/// Assemble the width dynamics for a gain and perturbation factor.
pub fn build_error_system(plant: &PlantModel, l: &Matrix, alpha: f64) -> ErrorSystem {
    assert_eq!(l.rows(), plant.n(), "gain row count");
    assert_eq!(l.cols(), plant.m(), "gain column count");
    assert!(alpha > 0.0, "alpha must be positive");
    let a_tilde = plant.a.sub(&l.matmul(&plant.c)).abs();
    let lambda = plant.w.abs().hstack(&l.matmul(&plant.v).abs());
    let delta_w = plant.delta_w();
    let delta_v = plant.delta_v();
    let delta_lambda = vecops::concat(&delta_w, &vecops::scale(&delta_v, alpha));
    ErrorSystem {
        a_tilde,
        lambda,
        delta_lambda,
        delta_w,
        delta_v,
    }
}

/// As [`build_error_system`], from a finished design.
pub fn build_error_system_for(plant: &PlantModel, design: &ObserverDesign) -> ErrorSystem {
    build_error_system(plant, &design.l, design.alpha)
}

/// Exact ℓ2 gain of the width dynamics: σ_max((I-Ã)⁻¹Λ), attained at zero
/// frequency for this internally nonnegative system. Any certified γ must
/// exceed it.
pub fn gamma_direct(err: &ErrorSystem) -> Result<f64, HinfError> {
    let rho = err.spectral_radius();
    if rho >= 1.0 {
        return Err(HinfError::Unstable { rho });
    }
    let n = err.a_tilde.rows();
    let mut i_minus = err.a_tilde.scale(-1.0);
    for i in 0..n {
        i_minus[(i, i)] += 1.0;
    }
    let x = solve(&i_minus, &err.lambda)?;
    Ok(sigma_max(&x))
}

/// σ_max((e^{iθ}I - F)⁻¹ L) evaluated through the real augmentation
/// [[cosθ·I - F, -sinθ·I], [sinθ·I, cosθ·I - F]].
fn resolvent_gain(f: &Matrix, l: &Matrix, theta: f64) -> Result<f64, HinfError> {
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
    let x = match solve(&aug, &rhs) {
        Ok(x) => x,
        Err(MatError::Singular { .. }) => return Err(HinfError::ResolventSingular { theta }),
        Err(e) => return Err(e.into()),
    };
    // real representation [[Re, -Im], [Im, Re]] of the complex solution
    // has the same singular values
    let mut rep = Matrix::zeros(2 * n, 2 * m);
    for i in 0..n {
        for j in 0..m {
            let re = x[(i, j)];
            let im = x[(n + i, j)];
            rep[(i, j)] = re;
            rep[(n + i, m + j)] = re;
            rep[(i, m + j)] = -im;
            rep[(n + i, j)] = im;
        }
    }
    let sigma = sigma_max(&rep);
    if !sigma.is_finite() || sigma > 1e14 {
        return Err(HinfError::ResolventSingular { theta });
    }
    Ok(sigma)
}

const ETA_GRID_POINTS: usize = 720;

/// Center-dynamics gain: sup over θ in [0, π] of σ_max((e^{iθ}I-(A-LC))⁻¹L),
/// by a 720-point grid with golden-section refinement around the grid
/// maximum. Instability surfaces as a singular resolvent on the sweep.
pub fn eta_hinf(plant: &PlantModel, l: &Matrix) -> Result<f64, HinfError> {
    eta_hinf_grid(plant, l, ETA_GRID_POINTS)
}

/// Coarser sweep for search-time candidate ranking; certified levels are
/// always recomputed with the full grid.
pub(crate) fn eta_surrogate(plant: &PlantModel, l: &Matrix) -> Result<f64, HinfError> {
    eta_hinf_grid(plant, l, 96)
}

fn eta_hinf_grid(plant: &PlantModel, l: &Matrix, points: usize) -> Result<f64, HinfError> {
    let f = plant.a.sub(&l.matmul(&plant.c));
    if l.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let step = std::f64::consts::PI / (points - 1) as f64;
    let mut best = (0.0f64, 0.0f64); // (value, theta)
    for j in 0..points {
        let theta = j as f64 * step;
        let g = resolvent_gain(&f, l, theta)?;
        if g > best.0 {
            best = (g, theta);
        }
    }
    // golden-section refinement on the bracket around the grid argmax,
    // keeping the running maximum of every probe
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = (best.1 - step).max(0.0);
    let mut hi = (best.1 + step).min(std::f64::consts::PI);
    let mut x1 = hi - golden * (hi - lo);
    let mut x2 = lo + golden * (hi - lo);
    let mut f1 = resolvent_gain(&f, l, x1)?;
    let mut f2 = resolvent_gain(&f, l, x2)?;
    let mut peak = best.0.max(f1).max(f2);
    for _ in 0..60 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = resolvent_gain(&f, l, x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = resolvent_gain(&f, l, x1)?;
        }
        peak = peak.max(f1).max(f2);
        if (hi - lo) <= 1e-9 {
            break;
        }
    }
    Ok(peak)
}

/// Which matrix inequality a report certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmiKind {
    Stability,
    Privacy,
}

impl std::fmt::Display for LmiKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LmiKind::Stability => write!(f, "stability"),
            LmiKind::Privacy => write!(f, "privacy"),
        }
    }
}

/// Outcome of one LMI evaluation or certificate search.
#[derive(Debug, Clone)]
pub struct LmiReport {
    pub which: LmiKind,
    pub level: f64,
    pub min_eig: f64,
    pub feasible: bool,
    pub q: Vec<f64>,
    pub l_tilde: Matrix,
}

impl LmiReport {
    /// Plain-text key: value serialization for run reports.
    pub fn to_text(&self) -> String {
        let q: Vec<String> = self.q.iter().map(|v| format!("{v}")).collect();
        format!(
            "which: {}\nlevel: {}\nmin_eig: {}\nfeasible: {}\nq: {}\n",
            self.which,
            self.level,
            self.min_eig,
            self.feasible,
            q.join(" ")
        )
    }
}

fn check_q(q: &[f64], n: usize) -> Result<(), HinfError> {
    if q.len() != n {
        return Err(HinfError::BadCertificateInput(format!(
            "Q diagonal must have length {n}, got {}",
            q.len()
        )));
    }
    if q.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(HinfError::BadCertificateInput(
            "Q diagonal entries must be positive".into(),
        ));
    }
    Ok(())
}

/// Assemble the 4-block LMI
/// [[Q, B12, B13, 0], [·, Q, 0, I], [·, ·, level·I, 0], [·, ·, ·, level·I]]
/// exactly symmetric.
fn assemble_lmi(q: &[f64], b12: &Matrix, b13: &Matrix, level: f64) -> Matrix {
    let n = q.len();
    let p = b13.cols();
    let size = 3 * n + p;
    let mut m = Matrix::zeros(size, size);
    for i in 0..n {
        m[(i, i)] = q[i];
        m[(n + i, n + i)] = q[i];
        for j in 0..n {
            m[(i, n + j)] = b12[(i, j)];
            m[(n + j, i)] = b12[(i, j)];
        }
        for j in 0..p {
            m[(i, 2 * n + j)] = b13[(i, j)];
            m[(2 * n + j, i)] = b13[(i, j)];
        }
        m[(n + i, 2 * n + p + i)] = 1.0;
        m[(2 * n + p + i, n + i)] = 1.0;
        m[(2 * n + p + i, 2 * n + p + i)] = level;
    }
    for j in 0..p {
        m[(2 * n + j, 2 * n + j)] = level;
    }
    m
}

/// Stability LMI of the width dynamics at level γ: blocks Q, |QA - L̃C|,
/// [Q|W| |L̃V|], γI, I. With diagonal Q and L̃ = QL these equal QÃ and QΛ.
pub fn check_stability_lmi(
    plant: &PlantModel,
    q: &[f64],
    l_tilde: &Matrix,
    gamma: f64,
) -> Result<LmiReport, HinfError> {
    check_q(q, plant.n())?;
    let qa = Matrix::diag(q).matmul(&plant.a);
    let b12 = qa.sub(&l_tilde.matmul(&plant.c)).abs();
    let qw = Matrix::diag(q).matmul(&plant.w.abs());
    let b13 = qw.hstack(&l_tilde.matmul(&plant.v).abs());
    let m = assemble_lmi(q, &b12, &b13, gamma);
    let min_eig = sym_eig_min_unchecked(&m);
    Ok(LmiReport {
        which: LmiKind::Stability,
        level: gamma,
        min_eig,
        feasible: min_eig > PD_MARGIN,
        q: q.to_vec(),
        l_tilde: l_tilde.clone(),
    })
}

/// Privacy LMI of the center dynamics at level η: blocks Q, QA - L̃C
/// (signed), L̃, ηI, I.
pub fn check_privacy_lmi(
    plant: &PlantModel,
    q: &[f64],
    l_tilde: &Matrix,
    eta: f64,
) -> Result<LmiReport, HinfError> {
    check_q(q, plant.n())?;
    let qa = Matrix::diag(q).matmul(&plant.a);
    let b12 = qa.sub(&l_tilde.matmul(&plant.c));
    let m = assemble_lmi(q, &b12, l_tilde, eta);
    let min_eig = sym_eig_min_unchecked(&m);
    Ok(LmiReport {
        which: LmiKind::Privacy,
        level: eta,
        min_eig,
        feasible: min_eig > PD_MARGIN,
        q: q.to_vec(),
        l_tilde: l_tilde.clone(),
    })
}

const CERT_EVAL_BUDGET: usize = 500;

/// Recover a diagonal storage-function certificate for a fixed gain at a
/// given level: maximize λ_min(LMI(Q)) over diagonal Q ≥ 1e-6 by gradient
/// ascent with an adaptive step, at most [`CERT_EVAL_BUDGET`] eigensolves.
///
/// With L fixed, both LMIs are affine in the diagonal of Q, so λ_min is
/// concave and the eigenvector subgradient is exact.
pub fn find_certificate(
    plant: &PlantModel,
    l: &Matrix,
    which: LmiKind,
    level: f64,
) -> Result<LmiReport, HinfError> {
    let n = plant.n();
    // affine pieces: blocks (1,2) and (1,3) are diag(q)·s1 and diag(q)·s2
    let (s1, s2) = match which {
        LmiKind::Stability => {
            let a_tilde = plant.a.sub(&l.matmul(&plant.c)).abs();
            let lambda = plant.w.abs().hstack(&l.matmul(&plant.v).abs());
            (a_tilde, lambda)
        }
        LmiKind::Privacy => (plant.a.sub(&l.matmul(&plant.c)), l.clone()),
    };
    let p = s2.cols();
    let eval = |q: &[f64]| -> (f64, Vec<f64>) {
        let b12 = Matrix::diag(q).matmul(&s1);
        let b13 = Matrix::diag(q).matmul(&s2);
        let m = assemble_lmi(q, &b12, &b13, level);
        let (vals, vecs) = sym_eig(&m);
        let u: Vec<f64> = (0..m.rows()).map(|i| vecs[(i, 0)]).collect();
        (vals[0], u)
    };

    let mut q = vec![1.0; n];
    let (mut val, mut u) = eval(&q);
    let mut used = 1;
    let mut best_val = val;
    let mut best_q = q.clone();
    let mut step = 0.5f64;
    while used < CERT_EVAL_BUDGET && best_val <= PD_MARGIN {
        // subgradient of λ_min at the current eigenvector
        let mut g = vec![0.0; n];
        for d in 0..n {
            let s1_dot: f64 = (0..n).map(|j| s1[(d, j)] * u[n + j]).sum();
            let s2_dot: f64 = (0..p).map(|j| s2[(d, j)] * u[2 * n + j]).sum();
            g[d] = u[d] * u[d] + u[n + d] * u[n + d] + 2.0 * u[d] * (s1_dot + s2_dot);
        }
        let norm = vecops::norm2(&g);
        if norm == 0.0 {
            break;
        }
        let dir: Vec<f64> = g.iter().map(|x| x / norm).collect();
        let mut moved = false;
        while used < CERT_EVAL_BUDGET {
            let cand: Vec<f64> = q
                .iter()
                .zip(&dir)
                .map(|(qi, di)| (qi + step * di).max(1e-6))
                .collect();
            let (cand_val, cand_u) = eval(&cand);
            used += 1;
            if cand_val > val {
                q = cand;
                val = cand_val;
                u = cand_u;
                if val > best_val {
                    best_val = val;
                    best_q = q.clone();
                }
                step *= 2.0;
                moved = true;
                break;
            }
            step *= 0.5;
            if step < 1e-13 {
                break;
            }
        }
        if !moved {
            break;
        }
    }

    Ok(LmiReport {
        which,
        level,
        min_eig: best_val,
        feasible: best_val > PD_MARGIN,
        q: best_q.clone(),
        l_tilde: Matrix::diag(&best_q).matmul(l),
    })
}

/// How the privacy constraint's left side is read.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConstraintReading {
    /// Use σ_min in place of σ_max (sensitivity switch).
    pub sigma_min: bool,
    /// Keep the standalone α multiplier on the γ term even though δ_λ
    /// already carries α on the measurement widths.
    pub literal_alpha: bool,
}

/// Left side of the privacy budget constraint; the check is
/// lhs ≤ e^{-ε}·δ. Default reading: σ_max(|Γ|)·γ·‖[δ_w; α δ_v]‖₂ +
/// σ_max(Γ)·η·ρ, matching the proof chain ‖e^x‖₂ ≤ γ‖δ_λ‖₂.
pub fn privacy_constraint_lhs(
    plant: &PlantModel,
    design: &ObserverDesign,
    budget: &PrivacyBudget,
) -> f64 {
    privacy_constraint_lhs_with(plant, design, budget, ConstraintReading::default())
}

pub fn privacy_constraint_lhs_with(
    plant: &PlantModel,
    design: &ObserverDesign,
    budget: &PrivacyBudget,
    reading: ConstraintReading,
) -> f64 {
    let sigma = if reading.sigma_min {
        sigma_min
    } else {
        sigma_max
    };
    let delta_lambda = vecops::concat(
        &plant.delta_w(),
        &vecops::scale(&plant.delta_v(), design.alpha),
    );
    let alpha_factor = if reading.literal_alpha {
        design.alpha
    } else {
        1.0
    };
    sigma(&plant.gamma.abs()) * design.gamma * alpha_factor * vecops::norm2(&delta_lambda)
        + sigma(&plant.gamma) * design.eta * budget.rho
}

fn width_drive(plant: &PlantModel, design: &ObserverDesign) -> Matrix {
    // [|W|  α|LV|]: drives the width recursion with the unscaled
    // [δ_w; δ_v]
    let lv = design.l.matmul(&plant.v).abs().scale(design.alpha);
    plant.w.abs().hstack(&lv)
}

fn stable_a_tilde(plant: &PlantModel, design: &ObserverDesign) -> Result<Matrix, HinfError> {
    let a_tilde = plant.a.sub(&design.l.matmul(&plant.c)).abs();
    let rho = spectral_radius_nonneg(&a_tilde)?;
    if rho >= 1.0 {
        return Err(HinfError::Unstable { rho });
    }
    Ok(a_tilde)
}

/// Accuracy error ε^p_k: the ∞-norm gap between the non-private and
/// guaranteed-private published-aggregate widths at step k, in closed
/// form from the two width recursions.
pub fn accuracy_error(
    plant: &PlantModel,
    np_design: &ObserverDesign,
    gp_design: &ObserverDesign,
    k: usize,
) -> Result<f64, HinfError> {
    Ok(accuracy_profile(plant, np_design, gp_design, k)?[k])
}

/// ε^p_k for every k = 0..=horizon; index k holds the step-k value.
pub fn accuracy_profile(
    plant: &PlantModel,
    np_design: &ObserverDesign,
    gp_design: &ObserverDesign,
    horizon: usize,
) -> Result<Vec<f64>, HinfError> {
    let n = plant.n();
    let gamma_abs = plant.gamma.abs();
    let delta = vecops::concat(&plant.delta_w(), &plant.delta_v());
    let e0 = plant.x0.widths();

    let a_np = stable_a_tilde(plant, np_design)?;
    let a_gp = stable_a_tilde(plant, gp_design)?;
    let drive_np = width_drive(plant, np_design).mat_vec(&delta);
    let drive_gp = width_drive(plant, gp_design).mat_vec(&delta);

    let steady = |a: &Matrix, drive: &[f64]| -> Result<Vec<f64>, HinfError> {
        let mut i_minus = a.scale(-1.0);
        for i in 0..n {
            i_minus[(i, i)] += 1.0;
        }
        Ok(matops::solve_vec(&i_minus, drive)?)
    };
    let t_np = steady(&a_np, &drive_np)?;
    let t_gp = steady(&a_gp, &drive_gp)?;

    // Δ̃_k e0 + (I - Ã_NP^k) T_NP - (I - Ã_GP^k) T_GP, built incrementally
    // through the matrix powers
    let mut pow_np = Matrix::identity(n);
    let mut pow_gp = Matrix::identity(n);
    let mut out = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        if k > 0 {
            pow_np = a_np.matmul(&pow_np);
            pow_gp = a_gp.matmul(&pow_gp);
        }
        let delta_k = pow_np.sub(&pow_gp);
        let mut inner = delta_k.mat_vec(&e0);
        let np_term = vecops::sub(&t_np, &pow_np.mat_vec(&t_np));
        let gp_term = vecops::sub(&t_gp, &pow_gp.mat_vec(&t_gp));
        for i in 0..n {
            inner[i] += np_term[i] - gp_term[i];
        }
        out.push(vecops::norm_inf(&gamma_abs.mat_vec(&inner)));
    }
    Ok(out)
}

/// Steady-state accuracy error ε^p_∞ = ‖|Γ|((I-Ã_NP)⁻¹W̃_NP −
/// (I-Ã_GP)⁻¹W̃_GP)[δ_w; δ_v]‖_∞.
pub fn accuracy_steady(
    plant: &PlantModel,
    np_design: &ObserverDesign,
    gp_design: &ObserverDesign,
) -> Result<f64, HinfError> {
    let n = plant.n();
    let delta = vecops::concat(&plant.delta_w(), &plant.delta_v());
    let a_np = stable_a_tilde(plant, np_design)?;
    let a_gp = stable_a_tilde(plant, gp_design)?;
    let steady = |a: &Matrix, design: &ObserverDesign| -> Result<Vec<f64>, HinfError> {
        let mut i_minus = a.scale(-1.0);
        for i in 0..n {
            i_minus[(i, i)] += 1.0;
        }
        let drive = width_drive(plant, design).mat_vec(&delta);
        Ok(matops::solve_vec(&i_minus, &drive)?)
    };
    let t_np = steady(&a_np, np_design)?;
    let t_gp = steady(&a_gp, gp_design)?;
    Ok(vecops::norm_inf(
        &plant.gamma.abs().mat_vec(&vecops::sub(&t_np, &t_gp)),
    ))
}

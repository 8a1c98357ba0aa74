use super::eig::sym_eig_values;
use super::{MatError, Matrix};

/// Largest singular value via a symmetric eigensolve of the smaller Gram
/// matrix (MᵀM or MMᵀ).
pub fn sigma_max(m: &Matrix) -> f64 {
    extreme_singular_value(m, true)
}

/// Smallest singular value (of the min(rows, cols) singular values).
pub fn sigma_min(m: &Matrix) -> f64 {
    extreme_singular_value(m, false)
}

fn extreme_singular_value(m: &Matrix, largest: bool) -> f64 {
    let gram = if m.cols() <= m.rows() {
        m.gram()
    } else {
        m.transpose().gram()
    };
    let vals = sym_eig_values(&gram);
    let lambda = if largest {
        *vals.last().unwrap()
    } else {
        vals[0]
    };
    lambda.max(0.0).sqrt()
}

const SPECTRAL_TOL: f64 = 1e-10;

/// Perron root of an entrywise-nonnegative square matrix.
///
/// Power iteration with Collatz–Wielandt bracketing does the work for
/// primitive matrices; when the bracket stagnates (reducible or periodic
/// patterns), the Gelfand limit ρ(M) = lim ‖M^(2^j)‖^(1/2^j) takes over.
/// Repeated squaring of a nonnegative matrix is cancellation-free, so the
/// fallback is exact to roundoff.
pub fn spectral_radius_nonneg(m: &Matrix) -> Result<f64, MatError> {
    if !m.is_square() {
        return Err(MatError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if m[(i, j)] < 0.0 {
                return Err(MatError::NegativeEntry {
                    row: i,
                    col: j,
                    value: m[(i, j)],
                });
            }
        }
    }
    let n = m.rows();
    if n == 1 {
        return Ok(m[(0, 0)]);
    }
    if m.max_abs() == 0.0 {
        return Ok(0.0);
    }

    // Collatz-Wielandt: for x > 0, min_i (Mx)_i/x_i <= rho <= max_i (Mx)_i/x_i.
    let mut x = vec![1.0f64; n];
    let mut last_gap = f64::INFINITY;
    let mut stagnant = 0;
    for _ in 0..10_000 {
        let y = m.mat_vec(&x);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi <= 0.0 {
            return Ok(0.0);
        }
        if hi - lo <= SPECTRAL_TOL * hi {
            return Ok(0.5 * (lo + hi));
        }
        let gap = hi - lo;
        if gap >= last_gap * (1.0 - 1e-6) {
            stagnant += 1;
            if stagnant > 50 {
                break;
            }
        } else {
            stagnant = 0;
        }
        last_gap = gap;
        // normalize and mix in a floor so zero patterns cannot trap the
        // iterate on the boundary
        let scale = y.iter().fold(0.0f64, |a, &v| a.max(v)).max(1e-300);
        x = y.iter().map(|&v| (v / scale).max(1e-12)).collect();
    }
    Ok(gelfand_radius(m))
}

/// Gelfand limit by repeated squaring with log-scale tracking.
fn gelfand_radius(m: &Matrix) -> f64 {
    let mut b = m.clone();
    let mut log_scale = 0.0f64; // log of the factor pulled out so far
    let mut estimate = 0.0f64;
    for j in 0..60 {
        let norm = b.norm_inf();
        if norm == 0.0 {
            return 0.0;
        }
        let power = (1u64 << j) as f64;
        let new_estimate = ((log_scale + norm.ln()) / power).exp();
        if j > 0 && (new_estimate - estimate).abs() <= 1e-13 * new_estimate.max(1e-300) {
            return new_estimate;
        }
        estimate = new_estimate;
        log_scale = 2.0 * (log_scale + norm.ln());
        b = b.scale(1.0 / norm);
        b = b.matmul(&b);
    }
    estimate
}

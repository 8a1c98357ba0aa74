use super::{MatError, Matrix};

/// Solve AX = B by LU with partial pivoting. A pivot is singular when its
/// magnitude falls below 1e-12 of the original row's largest entry.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix, MatError> {
    if !a.is_square() {
        return Err(MatError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if a.rows() != b.rows() {
        return Err(MatError::Dimension(format!(
            "solve: A is {}x{} but B has {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    let n = a.rows();
    let row_max: Vec<f64> = (0..n)
        .map(|i| a.row(i).iter().fold(0.0f64, |m, x| m.max(x.abs())))
        .collect();

    let mut lu = a.clone();
    let mut x = b.clone();
    let mut perm_row_max = row_max;

    for k in 0..n {
        let mut piv = k;
        for r in (k + 1)..n {
            if lu[(r, k)].abs() > lu[(piv, k)].abs() {
                piv = r;
            }
        }
        if lu[(piv, k)].abs() <= 1e-12 * perm_row_max[piv].max(1e-300) {
            return Err(MatError::Singular { pivot: k });
        }
        if piv != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = t;
            }
            for j in 0..x.cols() {
                let t = x[(k, j)];
                x[(k, j)] = x[(piv, j)];
                x[(piv, j)] = t;
            }
            perm_row_max.swap(k, piv);
        }
        let d = lu[(k, k)];
        for r in (k + 1)..n {
            let factor = lu[(r, k)] / d;
            if factor == 0.0 {
                continue;
            }
            lu[(r, k)] = 0.0;
            for j in (k + 1)..n {
                lu[(r, j)] -= factor * lu[(k, j)];
            }
            for j in 0..x.cols() {
                x[(r, j)] -= factor * x[(k, j)];
            }
        }
    }

    // back substitution
    for j in 0..x.cols() {
        for i in (0..n).rev() {
            let mut acc = x[(i, j)];
            for k in (i + 1)..n {
                acc -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = acc / lu[(i, i)];
        }
    }
    Ok(x)
}

/// Solve Ax = b for a single right-hand side.
pub fn solve_vec(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, MatError> {
    let rhs = Matrix::from_fn(b.len(), 1, |i, _| b[i]);
    let x = solve(a, &rhs)?;
    Ok((0..b.len()).map(|i| x[(i, 0)]).collect())
}

//! Dense solves for the handful of small systems the crate needs
//! (moment matrices, regression normal equations, amplitude fits).

use alloc::vec::Vec;

use crate::{Error, Result};

const PIVOT_FLOOR: f64 = 1e-20;

/// Solves `a · x = b` for a row-major `n × n` matrix by Gaussian elimination
/// with partial pivoting. Returns [`Error::Degenerate`] when a pivot vanishes
/// relative to the matrix scale.
pub fn solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n * n, "matrix shape does not match right-hand side");
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Degenerate("zero matrix"));
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        if m[pivot * n + col].abs() <= scale * PIVOT_FLOOR {
            return Err(Error::Degenerate("singular matrix"));
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for row in (0..n).rev() {
        let mut s = x[row];
        for k in row + 1..n {
            s -= m[row * n + k] * x[k];
        }
        x[row] = s / m[row * n + row];
    }
    Ok(x)
}

/// Ordinary least squares `min ‖X β − y‖₂` through the normal equations.
/// `columns` holds the regressors column by column.
pub fn least_squares(columns: &[&[f64]], y: &[f64]) -> Result<Vec<f64>> {
    let p = columns.len();
    let mut ata = alloc::vec![0.0; p * p];
    let mut aty = alloc::vec![0.0; p];
    for i in 0..p {
        for j in 0..p {
            ata[i * p + j] = columns[i].iter().zip(columns[j]).map(|(a, b)| a * b).sum();
        }
        aty[i] = columns[i].iter().zip(y).map(|(a, b)| a * b).sum();
    }
    solve(&ata, &aty)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pivoting_system() {
        let a = [0.0, 2.0, 1.0, 1.0];
        let x = solve(&a, &[4.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        assert!(matches!(
            solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn least_squares_recovers_line() {
        let x: Vec<f64> = (0..8).map(|k| k as f64).collect();
        let ones = alloc::vec![1.0; 8];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let beta = least_squares(&[&ones, &x], &y).unwrap();
        assert!((beta[0] - 3.0).abs() < 1e-12 && (beta[1] + 0.5).abs() < 1e-12);
    }
}

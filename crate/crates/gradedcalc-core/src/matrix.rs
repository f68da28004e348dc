//! Exact dense linear algebra at desk scale: rank over the rationals and
//! inversion over the rational-function field. Used for degreewise Jacobian
//! ranks, independence tests, and the linear step of morphism inversion.

use crate::coeffs::{BaseCoefficient, Rat};
use num::Zero;

/// Rank of a rational matrix by fraction-free forward elimination.
pub fn rat_rank(rows: &[Vec<Rat>]) -> usize {
    let mut m: Vec<Vec<Rat>> = rows.to_vec();
    let nrows = m.len();
    let ncols = m.first().map(|r| r.len()).unwrap_or(0);
    let mut rank = 0;
    let mut row = 0;
    for col in 0..ncols {
        let pivot = match (row..nrows).find(|&r| !m[r][col].is_zero()) {
            Some(p) => p,
            None => continue,
        };
        m.swap(row, pivot);
        for r in row + 1..nrows {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].clone() / m[row][col].clone();
            for c in col..ncols {
                let delta = factor.clone() * m[row][c].clone();
                m[r][c] -= delta;
            }
        }
        row += 1;
        rank += 1;
        if row == nrows {
            break;
        }
    }
    rank
}

/// Inverse of a square matrix over the rational-function field, by
/// Gauss-Jordan elimination; None when the matrix is singular. `nvars` is
/// the variable count of the entries (needed to build 0 and 1).
pub fn coeff_matrix_inverse(
    m: &[Vec<BaseCoefficient>],
    nvars: usize,
) -> Option<Vec<Vec<BaseCoefficient>>> {
    let n = m.len();
    if m.iter().any(|row| row.len() != n) {
        return None;
    }
    let mut a: Vec<Vec<BaseCoefficient>> = m.to_vec();
    let mut inv: Vec<Vec<BaseCoefficient>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        BaseCoefficient::one(nvars)
                    } else {
                        BaseCoefficient::zero(nvars)
                    }
                })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = a[col][col].invert().ok()?;
        for c in 0..n {
            a[col][c] = a[col][c].mul(&scale);
            inv[col][c] = inv[col][c].mul(&scale);
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in 0..n {
                let da = a[col][c].mul(&factor);
                a[r][c] = a[r][c].sub(&da);
                let di = inv[col][c].mul(&factor);
                inv[r][c] = inv[r][c].sub(&di);
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    fn rat(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn rank_of_rational_matrices() {
        assert_eq!(rat_rank(&[]), 0);
        assert_eq!(rat_rank(&[vec![rat(0, 1), rat(0, 1)]]), 0);
        assert_eq!(
            rat_rank(&[vec![rat(1, 1), rat(2, 1)], vec![rat(2, 1), rat(4, 1)]]),
            1
        );
        assert_eq!(
            rat_rank(&[vec![rat(1, 2), rat(0, 1)], vec![rat(1, 1), rat(1, 3)]]),
            2
        );
        // Wide matrix.
        assert_eq!(
            rat_rank(&[vec![rat(0, 1), rat(1, 1), rat(5, 1)]]),
            1
        );
    }

    #[test]
    fn inverse_over_the_function_field() {
        // [[1, x], [0, 1]]⁻¹ = [[1, −x], [0, 1]].
        let one = BaseCoefficient::one(1);
        let zero = BaseCoefficient::zero(1);
        let x = BaseCoefficient::variable(1, 0);
        let m = vec![
            vec![one.clone(), x.clone()],
            vec![zero.clone(), one.clone()],
        ];
        let inv = coeff_matrix_inverse(&m, 1).unwrap();
        assert_eq!(inv[0][0], one);
        assert_eq!(inv[0][1], x.neg());
        assert_eq!(inv[1][0], zero);
        assert_eq!(inv[1][1], one);
        // Singular matrix has no inverse.
        let s = vec![
            vec![x.clone(), x.clone()],
            vec![x.clone(), x.clone()],
        ];
        assert!(coeff_matrix_inverse(&s, 1).is_none());
        // A genuinely rational-function inverse: [[x]]⁻¹ = [[1/x]].
        let m = vec![vec![x.clone()]];
        let inv = coeff_matrix_inverse(&m, 1).unwrap();
        assert_eq!(inv[0][0], x.invert().unwrap());
    }
}

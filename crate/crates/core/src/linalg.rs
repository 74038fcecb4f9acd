//! Small dense linear algebra over `f64` and [`Scalar`].

use crate::scalar::Scalar;

pub type Matrix = Vec<Vec<f64>>;

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `1e-300` relative to the row scale.
pub fn solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() <= scale * 1e-15 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..=n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = m[row][n];
        for k in row + 1..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Determinant by partial-pivot elimination.
pub fn det(a: &Matrix) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut d = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(col, pivot);
            d = -d;
        }
        d *= m[col][col];
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    d
}

pub fn transpose(a: &Matrix) -> Matrix {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

pub fn mat_vec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

pub fn gram(a: &Matrix) -> Matrix {
    a.iter()
        .map(|r| a.iter().map(|s| r.iter().zip(s).map(|(p, q)| p * q).sum()).collect())
        .collect()
}

/// Minimum-norm solution of the underdetermined `a·x = b` (full row rank).
pub fn min_norm_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let y = solve(&gram(a), b)?;
    Some(mat_vec(&transpose(a), &y))
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Determinant over scalars: exact elimination when every entry is exact,
/// float elimination otherwise.
pub fn det_scalar(a: &[Vec<Scalar>]) -> Scalar {
    if a.iter().all(|r| r.iter().all(Scalar::is_exact)) {
        let n = a.len();
        let mut m: Vec<Vec<Scalar>> = a.to_vec();
        let mut d = Scalar::one();
        for col in 0..n {
            let Some(pivot) = (col..n).find(|&i| !m[i][col].is_zero()) else {
                return Scalar::zero();
            };
            if pivot != col {
                m.swap(col, pivot);
                d = -&d;
            }
            d = &d * &m[col][col];
            for row in col + 1..n {
                if m[row][col].is_zero() {
                    continue;
                }
                let factor = &m[row][col] / &m[col][col];
                for k in col..n {
                    let delta = &factor * &m[col][k];
                    m[row][k] = &m[row][k] - &delta;
                }
            }
        }
        d
    } else {
        let f: Matrix = a.iter().map(|r| r.iter().map(Scalar::to_f64).collect()).collect();
        Scalar::Float(det(&f))
    }
}

/// Lexicographic `k`-subsets of `0..n`.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
        assert!(solve(&vec![vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn exact_det() {
        let a = vec![
            vec![Scalar::ratio(1, 2), Scalar::int(3)],
            vec![Scalar::int(2), Scalar::ratio(1, 3)],
        ];
        assert_eq!(det_scalar(&a), Scalar::ratio(-35, 6));
    }

    #[test]
    fn combination_counts() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 4).len(), 0);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
    }
}

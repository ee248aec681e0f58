//! Dense LU factorization with partial pivoting for the simplex basis.

use crate::error::Error;

const EPS_SINGULAR: f64 = 1e-11;

/// Row-pivoted LU factors of an m-by-m basis matrix: `P B = L U` with unit
/// lower-triangular L and upper-triangular U stored in one dense array. The
/// swap sequence is kept so transposed solves can invert the permutation.
pub struct LuFactors {
    m: usize,
    data: Vec<f64>, // row-major, L below the diagonal, U on and above
    swaps: Vec<(usize, usize)>,
}

impl LuFactors {
    /// Builds the factors. `fill_column(pos, out)` writes basis column `pos`
    /// into `out` (pre-zeroed, length m).
    pub fn factorize(m: usize, fill_column: impl Fn(usize, &mut [f64])) -> Result<LuFactors, Error> {
        let mut data = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for pos in 0..m {
            col.iter_mut().for_each(|v| *v = 0.0);
            fill_column(pos, &mut col);
            for i in 0..m {
                data[i * m + pos] = col[i];
            }
        }
        let mut swaps = Vec::new();
        for k in 0..m {
            let mut pivot_row = k;
            let mut pivot_mag = data[k * m + k].abs();
            for i in k + 1..m {
                let mag = data[i * m + k].abs();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = i;
                }
            }
            if pivot_mag < EPS_SINGULAR {
                return Err(Error::numerical(format!(
                    "singular basis at elimination step {k}"
                )));
            }
            if pivot_row != k {
                for j in 0..m {
                    data.swap(k * m + j, pivot_row * m + j);
                }
                swaps.push((k, pivot_row));
            }
            let pivot = data[k * m + k];
            for i in k + 1..m {
                let factor = data[i * m + k] / pivot;
                data[i * m + k] = factor;
                if factor != 0.0 {
                    for j in k + 1..m {
                        data[i * m + j] -= factor * data[k * m + j];
                    }
                }
            }
        }
        Ok(LuFactors { m, data, swaps })
    }

    /// Solves `B x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let m = self.m;
        for &(a, c) in &self.swaps {
            b.swap(a, c);
        }
        // Forward: L z = Pb.
        for i in 1..m {
            let mut acc = b[i];
            for j in 0..i {
                acc -= self.data[i * m + j] * b[j];
            }
            b[i] = acc;
        }
        // Backward: U x = z.
        for i in (0..m).rev() {
            let mut acc = b[i];
            for j in i + 1..m {
                acc -= self.data[i * m + j] * b[j];
            }
            b[i] = acc / self.data[i * m + i];
        }
    }

    /// Solves `B^T y = c` in place.
    pub fn solve_transposed(&self, c: &mut [f64]) {
        let m = self.m;
        // U^T w = c (forward, U^T is lower-triangular).
        for i in 0..m {
            let mut acc = c[i];
            for j in 0..i {
                acc -= self.data[j * m + i] * c[j];
            }
            c[i] = acc / self.data[i * m + i];
        }
        // L^T v = w (backward, unit diagonal).
        for i in (0..m).rev() {
            let mut acc = c[i];
            for j in i + 1..m {
                acc -= self.data[j * m + i] * c[j];
            }
            c[i] = acc;
        }
        // y = P^T v: undo the swaps in reverse order.
        for &(a, b) in self.swaps.iter().rev() {
            c.swap(a, b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_factorize(matrix: &[Vec<f64>]) -> LuFactors {
        let m = matrix.len();
        LuFactors::factorize(m, |pos, out| {
            for i in 0..m {
                out[i] = matrix[i][pos];
            }
        })
        .unwrap()
    }

    #[test]
    fn solves_small_system() {
        let a = vec![
            vec![0.0, 2.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![3.0, 0.0, 1.0],
        ];
        let f = dense_factorize(&a);
        let x_true = [1.0, -2.0, 3.0];
        let mut b = vec![0.0; 3];
        for i in 0..3 {
            b[i] = (0..3).map(|j| a[i][j] * x_true[j]).sum();
        }
        f.solve(&mut b);
        for i in 0..3 {
            assert!((b[i] - x_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn solves_transposed_system() {
        let a = vec![
            vec![0.0, 2.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![3.0, 0.0, 1.0],
        ];
        let f = dense_factorize(&a);
        let y_true = [0.5, 1.5, -1.0];
        let mut c = vec![0.0; 3];
        for j in 0..3 {
            c[j] = (0..3).map(|i| a[i][j] * y_true[i]).sum();
        }
        f.solve_transposed(&mut c);
        for i in 0..3 {
            assert!((c[i] - y_true[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_singular() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let m = a.len();
        let res = LuFactors::factorize(m, |pos, out| {
            for i in 0..m {
                out[i] = a[i][pos];
            }
        });
        assert!(res.is_err());
    }

    #[test]
    fn empty_basis() {
        let f = LuFactors::factorize(0, |_, _| {}).unwrap();
        let mut b: Vec<f64> = vec![];
        f.solve(&mut b);
        f.solve_transposed(&mut b);
    }
}

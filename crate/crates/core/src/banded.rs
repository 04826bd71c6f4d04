//! Banded linear systems solved by Gaussian elimination with partial pivoting.
//!
//! The cascade's Crank-Nicolson matrices lose diagonal dominance when the
//! advection speed `x/t` is large, so the plain Thomas algorithm is not safe
//! there. Row swaps can widen the upper band by `kl`, which the storage
//! reserves up front.

/// `n x n` matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row `i` holds columns `i - kl ..= i + ku + kl` at offsets `0..width`.
    data: Vec<f64>,
}

/// Elimination met a zero (or non-finite) pivot in this row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularRow(pub usize);

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (2 * kl + ku + 1)],
        }
    }

    pub fn tridiagonal(n: usize) -> Self {
        Self::zeros(n, 1, 1)
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(
            j + self.kl >= i && j <= i + self.ku + self.kl,
            "({i}, {j}) outside band"
        );
        i * self.width() + (j + self.kl - i)
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku && j < self.n,
            "({i}, {j}) outside the declared band"
        );
        let k = self.index(i, j);
        self.data[k] = value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl || j >= self.n {
            return 0.0;
        }
        self.data[self.index(i, j)]
    }

    /// `y = A x` for the matrix as assembled (before any solve).
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Solve `A x = rhs` in place, consuming the factorization.
    pub fn solve(mut self, rhs: &mut [f64]) -> Result<(), SingularRow> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let upper = self.ku + self.kl;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let pivot_row = (k..=last_row)
                .max_by(|&a, &b| self.get(a, k).abs().total_cmp(&self.get(b, k).abs()))
                .unwrap();
            let pivot = self.get(pivot_row, k);
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(SingularRow(k));
            }
            let last_col = (k + upper).min(n - 1);
            if pivot_row != k {
                for j in k..=last_col {
                    let a = self.index(k, j);
                    let b = self.index(pivot_row, j);
                    self.data.swap(a, b);
                }
                rhs.swap(k, pivot_row);
            }
            for r in k + 1..=last_row {
                let idx = self.index(r, k);
                let factor = self.data[idx] / pivot;
                if factor == 0.0 {
                    continue;
                }
                self.data[idx] = 0.0;
                for j in k + 1..=last_col {
                    let kj = self.data[self.index(k, j)];
                    let rj = self.index(r, j);
                    self.data[rj] -= factor * kj;
                }
                rhs[r] -= factor * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + upper).min(n - 1);
            let mut acc = rhs[k];
            for (j, x) in rhs.iter().enumerate().take(last_col + 1).skip(k + 1) {
                acc -= self.data[self.index(k, j)] * x;
            }
            rhs[k] = acc / self.data[self.index(k, k)];
        }
        Ok(())
    }
}

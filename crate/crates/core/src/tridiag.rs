//! Thomas algorithm for the constant-coefficient Dirichlet system
//! `(1 + 2r) w_j - r (w_{j-1} + w_{j+1}) = b_j`.

/// Pre-factored `I - dt * Laplacian_h` on `n` interior nodes.
#[derive(Debug, Clone)]
pub struct BackwardEuler {
    off: f64,
    /// Modified super-diagonal from the forward sweep.
    c: Vec<f64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<f64>,
}

impl BackwardEuler {
    /// `ratio` is `dt / dx^2`.
    pub fn new(n: usize, ratio: f64) -> Self {
        let diag = 1.0 + 2.0 * ratio;
        let off = -ratio;
        let mut c = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_c = 0.0;
        for j in 0..n {
            let pivot = diag - off * prev_c;
            inv_pivot[j] = 1.0 / pivot;
            c[j] = off * inv_pivot[j];
            prev_c = c[j];
        }
        BackwardEuler { off, c, inv_pivot }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        debug_assert_eq!(n, self.c.len());
        if n == 0 {
            return;
        }
        rhs[0] *= self.inv_pivot[0];
        for j in 1..n {
            rhs[j] = (rhs[j] - self.off * rhs[j - 1]) * self.inv_pivot[j];
        }
        for j in (0..n - 1).rev() {
            rhs[j] -= self.c[j] * rhs[j + 1];
        }
    }
}

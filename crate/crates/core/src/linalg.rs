//! Small dense and sparse kernels used by the reservoir.

use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `out = self · x`
    pub fn matvec_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o = row.iter().zip(x).map(|(&a, &b)| a * b).sum();
        }
    }
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// `None` when `a` is not numerically positive definite.
    pub fn factor(a: &Matrix<T>) -> Option<Self> {
        let n = a.rows();
        assert_eq!(n, a.cols());
        let mut l = a.clone();
        let scale = (0..n).map(|i| a.get(i, i).abs()).fold(T::zero(), T::max);
        let tiny = scale * T::epsilon() * T::from_usize(n.max(1)).unwrap();
        for j in 0..n {
            let lj: Vec<T> = l.row(j)[..j].to_vec();
            let d = l.get(j, j) - lj.iter().map(|&v| v * v).sum::<T>();
            if !(d > tiny) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in j + 1..n {
                let row_i = l.row_mut(i);
                let s: T = row_i[..j].iter().zip(&lj).map(|(&x, &y)| x * y).sum();
                row_i[j] = (row_i[j] - s) / d;
            }
        }
        Some(Self { l })
    }

    /// Solve `L y = b`.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let mut y = b.to_vec();
        for i in 0..y.len() {
            let row = self.l.row(i);
            let s: T = row[..i].iter().zip(&y[..i]).map(|(&a, &b)| a * b).sum();
            y[i] = (y[i] - s) / row[i];
        }
        y
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut y = self.forward(b);
        for i in (0..y.len()).rev() {
            let mut s = y[i];
            for k in i + 1..y.len() {
                s -= self.l.get(k, i) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        y
    }

    /// `log det A`.
    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.l.rows()).map(|i| two * self.l.get(i, i).ln()).sum()
    }
}

/// Solve `A x = b` for symmetric positive-definite `A`. Returns `None` when
/// `A` is not numerically positive definite.
pub fn cholesky_solve<T: Real>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    assert_eq!(a.rows(), b.len());
    Cholesky::factor(a).map(|c| c.solve(b))
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Build from `(row, col, value)` triplets sorted by row then column.
    pub fn from_sorted_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in triplets {
            row_ptr[r + 1] += 1;
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx: triplets.iter().map(|t| t.1).collect(),
            values: triplets.iter().map(|t| t.2).collect(),
        }
    }

    pub fn from_dense(m: &Matrix<T>) -> Self {
        let mut triplets = Vec::new();
        for r in 0..m.rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != T::zero() {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_sorted_triplets(m.rows(), m.cols(), &triplets)
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m.set(r, self.col_idx[k], self.values[k]);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn scale(&mut self, factor: T) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// Drop entries that became exactly zero (after scaling by zero).
    pub fn prune_zeros(&mut self) {
        let dense = self.to_dense();
        *self = Self::from_dense(&dense);
    }

    #[inline]
    pub fn matvec_into(&self, x: &[T], out: &mut [T]) {
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            *o = self.col_idx[a..b]
                .iter()
                .zip(&self.values[a..b])
                .map(|(&c, &v)| v * x[c])
                .sum();
        }
    }
}

/// Estimate of the dominant eigenvalue magnitude of a square matrix by
/// power iteration.
///
/// Each iterate is normalized; the estimate is the geometric mean of the
/// per-step growth factors over the second half of the run, which converges
/// to `|λ_max|` also when the dominant eigenvalues form a complex pair (where
/// a plain Rayleigh quotient oscillates). Returns `None` when the iterate
/// collapses to zero.
pub fn spectral_radius<T: Real>(m: &CsrMatrix<T>, iterations: usize, start: &[T]) -> Option<T> {
    assert_eq!(m.rows(), m.cols());
    let norm = |v: &[T]| v.iter().map(|&x| x * x).sum::<T>().sqrt();
    let mut v = start.to_vec();
    let n0 = norm(&v);
    if !(n0 > T::zero()) {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let mut next = vec![T::zero(); v.len()];
    let burn_in = iterations / 2;
    let mut log_sum = T::zero();
    let mut counted = 0usize;
    for it in 0..iterations {
        m.matvec_into(&v, &mut next);
        let g = norm(&next);
        if !(g > T::zero()) || !g.is_finite() {
            return None;
        }
        next.iter_mut().for_each(|x| *x /= g);
        std::mem::swap(&mut v, &mut next);
        if it >= burn_in {
            log_sum += g.ln();
            counted += 1;
        }
    }
    Some((log_sum / T::from_usize(counted.max(1)).unwrap()).exp())
}

/// Streaming accumulation of `SᵀS` and `Sᵀy` for rows `s` of a design matrix.
///
/// Rows are buffered in blocks so the symmetric rank-k update touches the
/// Gram matrix once per block.
#[derive(Debug, Clone)]
pub struct GramAccumulator<T> {
    n: usize,
    gram: Vec<T>,
    rhs: Vec<T>,
    block: Vec<T>,
    block_targets: Vec<T>,
    rows: usize,
}

const BLOCK_ROWS: usize = 32;

impl<T: Real> GramAccumulator<T> {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            gram: vec![T::zero(); n * n],
            rhs: vec![T::zero(); n],
            block: Vec::with_capacity(BLOCK_ROWS * n),
            block_targets: Vec::with_capacity(BLOCK_ROWS),
            rows: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn push(&mut self, row: &[T], target: T) {
        debug_assert_eq!(row.len(), self.n);
        self.block.extend_from_slice(row);
        self.block_targets.push(target);
        self.rows += 1;
        if self.block_targets.len() == BLOCK_ROWS {
            self.flush();
        }
    }

    fn flush(&mut self) {
        let n = self.n;
        let b = self.block_targets.len();
        let blk = &self.block;
        for i in 0..n {
            let g = &mut self.gram[i * n + i..(i + 1) * n];
            let mut k = 0;
            while k + 4 <= b {
                let (s0, s1, s2, s3) = (blk[k * n + i], blk[(k + 1) * n + i], blk[(k + 2) * n + i], blk[(k + 3) * n + i]);
                let r0 = &blk[k * n + i..(k + 1) * n];
                let r1 = &blk[(k + 1) * n + i..(k + 2) * n];
                let r2 = &blk[(k + 2) * n + i..(k + 3) * n];
                let r3 = &blk[(k + 3) * n + i..(k + 4) * n];
                for ((((gv, &a), &bb), &c), &d) in g.iter_mut().zip(r0).zip(r1).zip(r2).zip(r3) {
                    *gv += s0 * a + s1 * bb + s2 * c + s3 * d;
                }
                k += 4;
            }
            while k < b {
                let s = blk[k * n + i];
                for (gv, &a) in g.iter_mut().zip(&blk[k * n + i..(k + 1) * n]) {
                    *gv += s * a;
                }
                k += 1;
            }
        }
        for (k, &y) in self.block_targets.iter().enumerate() {
            for (r, &s) in self.rhs.iter_mut().zip(&blk[k * n..(k + 1) * n]) {
                *r += s * y;
            }
        }
        self.block.clear();
        self.block_targets.clear();
    }

    /// Full symmetric `SᵀS` and `Sᵀy`.
    pub fn finish(mut self) -> (Matrix<T>, Vec<T>) {
        self.flush();
        let n = self.n;
        for i in 0..n {
            for j in 0..i {
                self.gram[i * n + j] = self.gram[j * n + i];
            }
        }
        (Matrix::from_vec(n, n, self.gram), self.rhs)
    }
}

//! Dense complex matrix primitives: block assembly, LU solving and the
//! blockwise inversion of off-diagonal-identity matrices.

use num_complex::Complex64;

use crate::error::Error;

/// Estimated condition number above which LU factorization reports
/// [`Error::SingularMatrix`]. The estimate is the ratio of the largest to
/// the smallest pivot magnitude.
pub const SINGULARITY_COND_LIMIT: f64 = 1e14;

pub type C64 = Complex64;

/// Dense row-major matrix of complex double-precision entries.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// Builds a matrix from nested rows, rejecting ragged shapes and
    /// non-finite entries. This is the validating entry point for user input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self, Error> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            if row.len() != ncols {
                return Err(Error::ShapeMismatch {
                    context: "ragged rows in matrix construction".into(),
                });
            }
            for &z in row {
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFiniteEntry);
                }
                data.push(z);
            }
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [C64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, z: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= z;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v += *w;
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&other.data) {
            *v -= *w;
        }
        out
    }

    /// Matrix product, accumulated row-wise so the inner loop runs over
    /// contiguous slices.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "inner dimensions must agree: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a_ik) in a_row.iter().enumerate() {
                if a_ik.re == 0.0 && a_ik.im == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b_kj) in out_row.iter_mut().zip(b_row) {
                    *o += a_ik * b_kj;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(&a, &x)| a * x)
                    .sum::<C64>()
            })
            .collect()
    }

    /// Gathers the submatrix of the given rows and columns, in their stored
    /// order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, |i, j| self[(rows[i], j)])
    }

    pub fn select_cols(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    /// Adds `block` into `self` with its top-left corner at (r0, c0).
    pub fn add_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] += block[(i, j)];
            }
        }
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(1e-300);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Block row/column boundaries of an assembled matrix, stored as offsets.
/// The last offset equals the matrix dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    row_offsets: Vec<usize>,
    col_offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(row_offsets: Vec<usize>, col_offsets: Vec<usize>) -> Result<Self, Error> {
        for offs in [&row_offsets, &col_offsets] {
            if offs.is_empty() || offs[0] != 0 || offs.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::ShapeMismatch {
                    context: "block offsets must start at 0 and be non-decreasing".into(),
                });
            }
        }
        Ok(Self {
            row_offsets,
            col_offsets,
        })
    }

    pub fn block_count(&self) -> usize {
        self.row_offsets.len() - 1
    }

    /// Row range of the i-th diagonal block.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    pub fn col_range(&self, j: usize) -> std::ops::Range<usize> {
        self.col_offsets[j]..self.col_offsets[j + 1]
    }
}

/// Assembles the block-diagonal matrix of the given square blocks and the
/// layout recording their boundaries.
pub fn block_diag(blocks: &[&ComplexMatrix]) -> Result<(ComplexMatrix, BlockLayout), Error> {
    let mut offsets = vec![0usize];
    for b in blocks {
        if !b.is_square() {
            return Err(Error::InvalidBlock {
                rows: b.rows(),
                cols: b.cols(),
            });
        }
        offsets.push(offsets.last().unwrap() + b.rows());
    }
    let n = *offsets.last().unwrap();
    let mut out = ComplexMatrix::zeros(n, n);
    for (idx, b) in blocks.iter().enumerate() {
        out.set_block(offsets[idx], offsets[idx], b);
    }
    let layout = BlockLayout::new(offsets.clone(), offsets)?;
    Ok((out, layout))
}

/// Partially pivoted LU factorization of a square matrix.
///
/// The condition estimate is the max/min pivot magnitude ratio; factorization
/// fails with [`Error::SingularMatrix`] when it exceeds
/// [`SINGULARITY_COND_LIMIT`].
pub struct LuFactors {
    lu: ComplexMatrix,
    // pivot row chosen at step k (LAPACK-style successive swaps)
    swaps: Vec<usize>,
    cond_estimate: f64,
}

impl LuFactors {
    pub fn factor(a: &ComplexMatrix) -> Result<Self, Error> {
        if !a.is_square() {
            return Err(Error::ShapeMismatch {
                context: format!("LU requires a square matrix, got {}x{}", a.rows(), a.cols()),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut swaps = vec![0usize; n];
        let mut max_piv = 0.0f64;
        let mut min_piv = f64::INFINITY;

        for k in 0..n {
            let mut best = k;
            let mut best_mag = lu[(k, k)].norm_sqr();
            for i in (k + 1)..n {
                let mag = lu[(i, k)].norm_sqr();
                if mag > best_mag {
                    best_mag = mag;
                    best = i;
                }
            }
            swaps[k] = best;
            if best != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(best, j)];
                    lu[(best, j)] = tmp;
                }
            }
            let piv = lu[(k, k)];
            let piv_mag = piv.norm();
            max_piv = max_piv.max(piv_mag);
            min_piv = min_piv.min(piv_mag);
            if piv_mag == 0.0 {
                return Err(Error::SingularMatrix {
                    cond_estimate: f64::INFINITY,
                });
            }
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / piv;
                lu[(i, k)] = factor;
                if factor.re == 0.0 && factor.im == 0.0 {
                    continue;
                }
                let (head, tail) = lu.data.split_at_mut(i * n);
                let pivot_row = &head[k * n + k + 1..k * n + n];
                let target_row = &mut tail[k + 1..n];
                for (t, &p) in target_row.iter_mut().zip(pivot_row) {
                    *t -= factor * p;
                }
            }
        }

        let cond_estimate = if n == 0 { 1.0 } else { max_piv / min_piv };
        if cond_estimate > SINGULARITY_COND_LIMIT {
            return Err(Error::SingularMatrix { cond_estimate });
        }
        Ok(Self {
            lu,
            swaps,
            cond_estimate,
        })
    }

    pub fn cond_estimate(&self) -> f64 {
        self.cond_estimate
    }

    /// Solves A X = B for the full right-hand-side matrix B.
    pub fn solve(&self, b: &ComplexMatrix) -> Result<ComplexMatrix, Error> {
        let n = self.lu.rows();
        if b.rows() != n {
            return Err(Error::ShapeMismatch {
                context: format!("solve: A is {}x{} but B has {} rows", n, n, b.rows()),
            });
        }
        let mut x = b.clone();
        let m = x.cols();
        // apply row swaps in factorization order
        for k in 0..n {
            let p = self.swaps[k];
            if p != k {
                for j in 0..m {
                    let tmp = x[(k, j)];
                    x[(k, j)] = x[(p, j)];
                    x[(p, j)] = tmp;
                }
            }
        }
        // forward substitution with unit-diagonal L
        for i in 1..n {
            for k in 0..i {
                let l_ik = self.lu[(i, k)];
                if l_ik.re == 0.0 && l_ik.im == 0.0 {
                    continue;
                }
                let (head, tail) = x.data.split_at_mut(i * m);
                let xk = &head[k * m..k * m + m];
                for (t, &s) in tail[..m].iter_mut().zip(xk) {
                    *t -= l_ik * s;
                }
            }
        }
        // back substitution with U
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let u_ik = self.lu[(i, k)];
                if u_ik.re == 0.0 && u_ik.im == 0.0 {
                    continue;
                }
                let (head, tail) = x.data.split_at_mut(k * m);
                let xk = &tail[..m];
                for (t, &s) in head[i * m..i * m + m].iter_mut().zip(xk) {
                    *t -= u_ik * s;
                }
            }
            let piv = self.lu[(i, i)];
            for j in 0..m {
                x[(i, j)] /= piv;
            }
        }
        Ok(x)
    }

    /// Solves Aᵀ X = B reusing the same factorization (PA = LU implies
    /// Aᵀ = UᵀLᵀP, so the triangular sweeps run transposed and the row
    /// swaps are applied last, in reverse order).
    pub fn solve_transposed(&self, b: &ComplexMatrix) -> Result<ComplexMatrix, Error> {
        let n = self.lu.rows();
        if b.rows() != n {
            return Err(Error::ShapeMismatch {
                context: format!("solve_transposed: A is {}x{} but B has {} rows", n, n, b.rows()),
            });
        }
        let mut x = b.clone();
        let m = x.cols();
        // forward substitution with Uᵀ (lower triangular, non-unit diagonal)
        for i in 0..n {
            let piv = self.lu[(i, i)];
            for j in 0..m {
                x[(i, j)] /= piv;
            }
            for k in (i + 1)..n {
                let u_ik = self.lu[(i, k)]; // (Uᵀ)[k,i]
                if u_ik.re == 0.0 && u_ik.im == 0.0 {
                    continue;
                }
                let (head, tail) = x.data.split_at_mut(k * m);
                let xi = &head[i * m..i * m + m];
                for (t, &s) in tail[..m].iter_mut().zip(xi) {
                    *t -= u_ik * s;
                }
            }
        }
        // back substitution with Lᵀ (upper triangular, unit diagonal)
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let l_ki = self.lu[(k, i)]; // (Lᵀ)[i,k]
                if l_ki.re == 0.0 && l_ki.im == 0.0 {
                    continue;
                }
                let (head, tail) = x.data.split_at_mut(k * m);
                let xk = &tail[..m];
                for (t, &s) in head[i * m..i * m + m].iter_mut().zip(xk) {
                    *t -= l_ki * s;
                }
            }
        }
        // x = Pᵀ y: undo the swaps in reverse order
        for k in (0..n).rev() {
            let p = self.swaps[k];
            if p != k {
                for j in 0..m {
                    let tmp = x[(k, j)];
                    x[(k, j)] = x[(p, j)];
                    x[(p, j)] = tmp;
                }
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<ComplexMatrix, Error> {
        self.solve(&ComplexMatrix::identity(self.lu.rows()))
    }
}

/// Solves A X = B without forming A⁻¹.
pub fn solve_linear(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, Error> {
    LuFactors::factor(a)?.solve(b)
}

/// Right division B A⁻¹, computed through a transposed solve.
pub fn solve_right(b: &ComplexMatrix, a: &ComplexMatrix) -> Result<ComplexMatrix, Error> {
    // B A⁻¹ = (A⁻ᵀ Bᵀ)ᵀ
    Ok(LuFactors::factor(a)?
        .solve_transposed(&b.transpose())?
        .transpose())
}

pub fn invert(a: &ComplexMatrix) -> Result<ComplexMatrix, Error> {
    LuFactors::factor(a)?.inverse()
}

/// Inverts the 2n x 2n block matrix [[A, I], [I, B]] using only the two
/// n x n inverses (AB - I)⁻¹ and (BA - I)⁻¹:
///
/// ```text
/// [[A, I], [I, B]]⁻¹ = [[B, -I], [-I, A]] · blockdiag{(AB-I)⁻¹, (BA-I)⁻¹}
/// ```
pub fn invert_offdiag_identity(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Result<ComplexMatrix, Error> {
    let n = a.rows();
    if !a.is_square() || !b.is_square() || b.rows() != n {
        return Err(Error::ShapeMismatch {
            context: "off-diagonal-identity inversion requires equal square blocks".into(),
        });
    }
    let eye = ComplexMatrix::identity(n);
    let ab = a.mul(b).sub(&eye);
    let ba = b.mul(a).sub(&eye);
    let p = invert(&ab).map_err(|e| match e {
        Error::SingularMatrix { cond_estimate } => Error::SingularInteraction { cond_estimate },
        other => other,
    })?;
    let q = invert(&ba).map_err(|e| match e {
        Error::SingularMatrix { cond_estimate } => Error::SingularInteraction { cond_estimate },
        other => other,
    })?;

    let mut out = ComplexMatrix::zeros(2 * n, 2 * n);
    out.set_block(0, 0, &b.mul(&p));
    out.set_block(0, n, &q.scale(C64::new(-1.0, 0.0)));
    out.set_block(n, 0, &p.scale(C64::new(-1.0, 0.0)));
    out.set_block(n, n, &a.mul(&q));
    Ok(out)
}

/// Same inverse through the mirrored factorization
/// blockdiag{(BA-I)⁻¹, (AB-I)⁻¹} · [[B, -I], [-I, A]].
pub fn invert_offdiag_identity_right(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
) -> Result<ComplexMatrix, Error> {
    let n = a.rows();
    if !a.is_square() || !b.is_square() || b.rows() != n {
        return Err(Error::ShapeMismatch {
            context: "off-diagonal-identity inversion requires equal square blocks".into(),
        });
    }
    let eye = ComplexMatrix::identity(n);
    let p = invert(&a.mul(b).sub(&eye)).map_err(|e| match e {
        Error::SingularMatrix { cond_estimate } => Error::SingularInteraction { cond_estimate },
        other => other,
    })?;
    let q = invert(&b.mul(a).sub(&eye)).map_err(|e| match e {
        Error::SingularMatrix { cond_estimate } => Error::SingularInteraction { cond_estimate },
        other => other,
    })?;

    let mut out = ComplexMatrix::zeros(2 * n, 2 * n);
    out.set_block(0, 0, &q.mul(b));
    out.set_block(0, n, &q.scale(C64::new(-1.0, 0.0)));
    out.set_block(n, 0, &p.scale(C64::new(-1.0, 0.0)));
    out.set_block(n, n, &p.mul(a));
    Ok(out)
}

/// Relative Frobenius distance ‖a - b‖_F / ‖b‖_F (absolute when b is zero).
pub fn relative_frobenius_error(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let denom = b.frobenius_norm();
    let num = a.sub(b).frobenius_norm();
    if denom == 0.0 {
        num
    } else {
        num / denom
    }
}

/// Relative standard error std(a - b) / mean(|b|) over all entries.
pub fn relative_standard_error(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    let n = (a.rows() * a.cols()) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mut mean = C64::new(0.0, 0.0);
    for (x, y) in a.data().iter().zip(b.data()) {
        mean += x - y;
    }
    mean /= n;
    let mut var = 0.0;
    let mut ref_mag = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        var += (x - y - mean).norm_sqr();
        ref_mag += y.norm();
    }
    let std = (var / n).sqrt();
    let denom = ref_mag / n;
    if denom == 0.0 {
        std
    } else {
        std / denom
    }
}

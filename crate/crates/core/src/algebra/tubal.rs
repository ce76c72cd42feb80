use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TspError};

/// Real m×n×l third-order tensor, viewed as an m×n matrix of length-l tubes.
///
/// Entries are stored slice-major with each frontal slice in column-major
/// order, so `data[k*m*n + j*m + i]` holds entry (i, j, k) (0-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubalMatrix {
    rows: usize,
    cols: usize,
    depth: usize,
    data: Vec<f64>,
}

impl TubalMatrix {
    pub fn zeros(rows: usize, cols: usize, depth: usize) -> Self {
        assert!(rows >= 1 && cols >= 1 && depth >= 1, "tensor dimensions must be positive");
        Self { rows, cols, depth, data: vec![0.0; rows * cols * depth] }
    }

    /// Identity tubal matrix: first frontal slice is I_n, the rest are zero.
    pub fn identity(n: usize, depth: usize) -> Self {
        let mut out = Self::zeros(n, n, depth);
        for i in 0..n {
            out.set(i, i, 0, 1.0);
        }
        out
    }

    pub fn from_fn<F: FnMut(usize, usize, usize) -> f64>(
        rows: usize,
        cols: usize,
        depth: usize,
        mut f: F,
    ) -> Self {
        let mut out = Self::zeros(rows, cols, depth);
        for k in 0..depth {
            for j in 0..cols {
                for i in 0..rows {
                    out.set(i, j, k, f(i, j, k));
                }
            }
        }
        out
    }

    pub fn from_vec(rows: usize, cols: usize, depth: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || depth == 0 {
            return Err(TspError::DimensionMismatch(format!(
                "tensor dimensions must be positive, got {rows}x{cols}x{depth}"
            )));
        }
        if data.len() != rows * cols * depth {
            return Err(TspError::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols}x{depth} tensor",
                data.len()
            )));
        }
        Ok(Self { rows, cols, depth, data })
    }

    pub fn from_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| TspError::DimensionMismatch("no frontal slices".into()))?;
        let (rows, cols) = first.shape();
        let mut data = Vec::with_capacity(rows * cols * slices.len());
        for s in slices {
            if s.shape() != (rows, cols) {
                return Err(TspError::DimensionMismatch(format!(
                    "frontal slice {:?} differs from {:?}",
                    s.shape(),
                    (rows, cols)
                )));
            }
            data.extend_from_slice(s.as_slice());
        }
        Self::from_vec(rows, cols, slices.len(), data)
    }

    /// Standard normal entries.
    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, depth: usize, rng: &mut R) -> Self {
        let mut out = Self::zeros(rows, cols, depth);
        for v in out.data.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.depth)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.rows && j < self.cols && k < self.depth);
        k * self.rows * self.cols + j * self.rows + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// Frontal slice X_(k), 0-based.
    pub fn slice(&self, k: usize) -> DMatrix<f64> {
        let len = self.rows * self.cols;
        DMatrix::from_column_slice(self.rows, self.cols, &self.data[k * len..(k + 1) * len])
    }

    pub fn slices(&self) -> Vec<DMatrix<f64>> {
        (0..self.depth).map(|k| self.slice(k)).collect()
    }

    pub fn set_slice(&mut self, k: usize, m: &DMatrix<f64>) {
        assert_eq!(m.shape(), (self.rows, self.cols));
        let len = self.rows * self.cols;
        self.data[k * len..(k + 1) * len].copy_from_slice(m.as_slice());
    }

    /// Horizontal slices `rows` stacked in the given order (an r×n×l tensor).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, self.depth, |i, j, k| self.get(rows[i], j, k))
    }

    /// Lateral slice j as an m×1×l tensor.
    pub fn lateral(&self, j: usize) -> Self {
        Self::from_fn(self.rows, 1, self.depth, |i, _, k| self.get(i, j, k))
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(TspError::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, depth: self.depth, data })
    }

    /// ‖self − other‖_F / max(‖other‖_F, tiny); panics on shape mismatch.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let num = self.sub(other).expect("rel_diff shape").fro_norm();
        let den = other.fro_norm();
        if den > 0.0 { num / den } else { num }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Stacks the frontal slices vertically into an (m·l)×n matrix.
    pub fn unfold(&self) -> DMatrix<f64> {
        let (m, n, l) = self.dims();
        DMatrix::from_fn(m * l, n, |r, j| self.get(r % m, j, r / m))
    }

    /// Inverse of [`unfold`](Self::unfold) for a given depth.
    pub fn fold(mat: &DMatrix<f64>, depth: usize) -> Result<Self> {
        let (ml, n) = mat.shape();
        if depth == 0 || ml % depth != 0 || ml == 0 || n == 0 {
            return Err(TspError::DimensionMismatch(format!(
                "cannot fold a {ml}x{n} matrix into depth {depth}"
            )));
        }
        let m = ml / depth;
        Ok(Self::from_fn(m, n, depth, |i, j, k| mat[(k * m + i, j)]))
    }

    /// Block-circulant matrix whose block (r, c) is X_(1 + (r−c mod l)).
    pub fn bcirc(&self) -> DMatrix<f64> {
        let (m, n, l) = self.dims();
        let mut out = DMatrix::zeros(m * l, n * l);
        for r in 0..l {
            for c in 0..l {
                let k = (r + l - c) % l;
                for j in 0..n {
                    for i in 0..m {
                        out[(r * m + i, c * n + j)] = self.get(i, j, k);
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unfold_of_single_tube_is_column() {
        let x = TubalMatrix::from_vec(1, 1, 2, vec![3.0, -4.0]).unwrap();
        let u = x.unfold();
        assert_eq!(u.shape(), (2, 1));
        assert_eq!(u[(0, 0)], 3.0);
        assert_eq!(u[(1, 0)], -4.0);
    }

    #[test]
    fn fold_inverts_unfold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = TubalMatrix::random_normal(3, 4, 5, &mut rng);
        assert_eq!(TubalMatrix::fold(&x.unfold(), 5).unwrap(), x);
        assert!(TubalMatrix::fold(&x.unfold(), 4).is_err());
    }

    #[test]
    fn bcirc_of_identity_is_identity() {
        let b = TubalMatrix::identity(3, 4).bcirc();
        assert_eq!(b, DMatrix::identity(12, 12));
    }

    #[test]
    fn bcirc_matches_index_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = TubalMatrix::random_normal(2, 2, 3, &mut rng);
        let b = x.bcirc();
        assert_eq!(b.shape(), (6, 6));
        for row in 0..6 {
            for col in 0..6 {
                let (br, bc) = (row / 2, col / 2);
                let k = (br as isize - bc as isize).rem_euclid(3) as usize;
                assert_eq!(b[(row, col)], x.get(row % 2, col % 2, k));
            }
        }
    }

    #[test]
    fn slices_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = TubalMatrix::random_normal(2, 3, 4, &mut rng);
        assert_eq!(TubalMatrix::from_slices(&x.slices()).unwrap(), x);
    }
}

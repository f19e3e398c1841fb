//! Dense row-major matrices, seeded truncated-normal generation and the
//! pair-mask row split that the reordering transform is built on.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major `rows × cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [T] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    /// Copies the column block `[start, start + width)` into a new matrix.
    pub fn column_block(&self, start: usize, width: usize) -> Result<Self> {
        if width == 0 || start + width > self.cols {
            return Err(Error::Shape(format!(
                "column block [{start}, {}) outside {} columns",
                start + width,
                self.cols
            )));
        }
        let data = self
            .iter_rows()
            .flat_map(|r| r[start..start + width].iter().copied())
            .collect();
        Self::new(self.rows, width, data)
    }

    /// Element type conversion through `f64`.
    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|v| U::from_f64_nearest(v.to_f64_lossless()))
                .collect(),
        }
    }

    /// True when both matrices have the same shape and identical bit patterns.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.shape() == other.shape()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_f64_lossless().to_bits() == b.to_f64_lossless().to_bits())
    }
}

/// Parameters of TN(mean, stddev, lower, upper) plus the generator seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncNormalSpec {
    pub mean: f64,
    pub stddev: f64,
    pub lower: f64,
    pub upper: f64,
    pub seed: u64,
}

impl TruncNormalSpec {
    /// TN(0.5, 0.16, 0, 1), the synthetic weight distribution used by the benchmarks.
    pub fn standard(seed: u64) -> Self {
        Self { mean: 0.5, stddev: 0.16, lower: 0.0, upper: 1.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mean, self.stddev, self.lower, self.upper]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Distribution("parameters must be finite".into()));
        }
        if self.stddev <= 0.0 {
            return Err(Error::Distribution(format!("stddev must be positive, got {}", self.stddev)));
        }
        if self.lower >= self.upper {
            return Err(Error::Distribution(format!(
                "empty interval ({}, {})",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

/// Draws a `rows × cols` matrix from a truncated normal distribution.
///
/// Sampling is rejection from the untruncated normal using a ChaCha8 stream
/// seeded from `spec.seed`, filled in row-major order. A draw is accepted
/// only if its value, after rounding to `T`, lies strictly inside
/// `(lower, upper)`. The output is therefore a pure function of
/// `(spec, rows, cols)` on every platform.
///
/// Rejection is fine for intervals holding a reasonable share of the mass;
/// it will spin for intervals far out in a tail.
pub fn generate_truncated_normal<T: Scalar>(
    spec: &TruncNormalSpec,
    rows: usize,
    cols: usize,
) -> Result<DenseMatrix<T>> {
    spec.validate()?;
    if rows == 0 || cols == 0 {
        return Err(Error::Shape(format!("matrix must be non-empty, got {rows}x{cols}")));
    }
    let normal = Normal::new(spec.mean, spec.stddev)
        .map_err(|e| Error::Distribution(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = Vec::with_capacity(rows * cols);
    while data.len() < rows * cols {
        let x = T::from_f64_nearest(normal.sample(&mut rng));
        let v = x.to_f64_lossless();
        if v > spec.lower && v < spec.upper {
            data.push(x);
        }
    }
    DenseMatrix::new(rows, cols, data)
}

/// One bit per (row pair, column): `pairs × cols` bitmap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairMask {
    pairs: usize,
    cols: usize,
    words: Vec<u64>,
}

impl PairMask {
    pub fn zeros(pairs: usize, cols: usize) -> Self {
        Self { pairs, cols, words: vec![0; (pairs * cols).div_ceil(64)] }
    }

    pub fn ones(pairs: usize, cols: usize) -> Self {
        let mut m = Self::zeros(pairs, cols);
        for idx in 0..pairs * cols {
            m.words[idx / 64] |= 1 << (idx % 64);
        }
        m
    }

    #[inline]
    pub fn pairs(&self) -> usize {
        self.pairs
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of bits held.
    #[inline]
    pub fn len(&self) -> usize {
        self.pairs * self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, pair: usize, col: usize) -> bool {
        let idx = pair * self.cols + col;
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, pair: usize, col: usize, bit: bool) {
        let idx = pair * self.cols + col;
        if bit {
            self.words[idx / 64] |= 1 << (idx % 64);
        } else {
            self.words[idx / 64] &= !(1 << (idx % 64));
        }
    }

    /// Bits in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |idx| self.words[idx / 64] >> (idx % 64) & 1 == 1)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Routes the two rows of every pair `(2i, 2i + 1)` into two half-height
/// matrices, column by column.
///
/// Where the mask bit is 1, row `2i` goes to the first output and row `2i + 1`
/// to the second; where it is 0 the routing is swapped.
pub fn split_rows_by_mask<T: Scalar>(
    m: &DenseMatrix<T>,
    mask: &PairMask,
) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    if !m.rows().is_multiple_of(2) {
        return Err(Error::Shape(format!("pair split needs an even row count, got {}", m.rows())));
    }
    let pairs = m.rows() / 2;
    if mask.pairs() != pairs || mask.cols() != m.cols() {
        return Err(Error::Shape(format!(
            "mask is {}x{}, matrix needs {}x{}",
            mask.pairs(),
            mask.cols(),
            pairs,
            m.cols()
        )));
    }
    let cols = m.cols();
    let mut first = Vec::with_capacity(pairs * cols);
    let mut second = Vec::with_capacity(pairs * cols);
    for i in 0..pairs {
        let (upper, lower) = (m.row(2 * i), m.row(2 * i + 1));
        for j in 0..cols {
            if mask.get(i, j) {
                first.push(upper[j]);
                second.push(lower[j]);
            } else {
                first.push(lower[j]);
                second.push(upper[j]);
            }
        }
    }
    Ok((DenseMatrix::new(pairs, cols, first)?, DenseMatrix::new(pairs, cols, second)?))
}

/// Inverse of [`split_rows_by_mask`].
pub fn merge_rows_by_mask<T: Scalar>(
    first: &DenseMatrix<T>,
    second: &DenseMatrix<T>,
    mask: &PairMask,
) -> Result<DenseMatrix<T>> {
    if first.shape() != second.shape() {
        return Err(Error::Shape(format!(
            "cannot merge {:?} with {:?}",
            first.shape(),
            second.shape()
        )));
    }
    if mask.pairs() != first.rows() || mask.cols() != first.cols() {
        return Err(Error::Shape(format!(
            "mask is {}x{}, halves are {}x{}",
            mask.pairs(),
            mask.cols(),
            first.rows(),
            first.cols()
        )));
    }
    let (pairs, cols) = first.shape();
    let mut data = vec![T::zero(); 2 * pairs * cols];
    for i in 0..pairs {
        let (a, b) = (first.row(i), second.row(i));
        for j in 0..cols {
            let (upper, lower) = if mask.get(i, j) { (a[j], b[j]) } else { (b[j], a[j]) };
            data[2 * i * cols + j] = upper;
            data[(2 * i + 1) * cols + j] = lower;
        }
    }
    DenseMatrix::new(2 * pairs, cols, data)
}

const MATRIX_MAGIC: &[u8; 4] = b"HERM";
const MATRIX_VERSION: u32 = 1;

/// Serializes as `HERM`, u32 version, u64 rows, u64 cols, then the values,
/// all little-endian.
pub fn write_matrix<T: Scalar, W: Write>(m: &DenseMatrix<T>, mut w: W) -> Result<()> {
    let mut buf = Vec::with_capacity(24 + m.data().len() * (T::BITS as usize / 8));
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &v in m.data() {
        v.write_le(&mut buf);
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix<T: Scalar, R: Read>(mut r: R) -> Result<DenseMatrix<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 24 {
        return Err(Error::Corrupt(format!("matrix file is only {} bytes", bytes.len())));
    }
    if &bytes[..4] != MATRIX_MAGIC {
        return Err(Error::Corrupt("bad matrix magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != MATRIX_VERSION {
        return Err(Error::Corrupt(format!("unsupported matrix version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let width = T::BITS as u64 / 8;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| Error::Corrupt("matrix dimensions overflow".into()))?;
    let payload = &bytes[24..];
    if payload.len() as u64 != expected {
        return Err(Error::Corrupt(format!(
            "{rows}x{cols} matrix needs {expected} payload bytes, file has {}",
            payload.len()
        )));
    }
    let data = payload.chunks_exact(width as usize).map(T::read_le).collect();
    DenseMatrix::new(rows as usize, cols as usize, data)
}

pub fn save_matrix<T: Scalar>(m: &DenseMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_matrix(m, std::io::BufWriter::new(file))
}

pub fn load_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<DenseMatrix<T>> {
    read_matrix(std::fs::File::open(path)?)
}

//! Product quantization and the hierarchical pair-reordering transform.
//!
//! PQ cuts every row into `M` equal-width column blocks and learns one
//! k-means codebook per block. The reordering transform first pairs rows
//! `(2i, 2i + 1)`, routes the smaller element of each column-wise pair to a
//! "small" half and the larger to a "big" half, and records the orientation
//! in a feature map. Repeating this `levels` times builds a binary tree whose
//! `2^levels` leaves are each product-quantized on their own. Because the
//! feature maps record every swap, the transform itself is a lossless
//! permutation; all error comes from PQ at the leaves.

use rayon::prelude::*;

use crate::clustering::{kmeans_assign, kmeans_fit, KMeansConfig};
use crate::error::{Error, Result};
use crate::matrix::{merge_rows_by_mask, split_rows_by_mask, DenseMatrix, PairMask};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PqConfig {
    /// `M`; must divide the column count.
    pub num_subspaces: usize,
    /// `K_s`, identical for every subspace.
    pub centroids_per_subspace: usize,
    /// Lloyd settings. `k` is ignored in favour of `centroids_per_subspace`,
    /// and `seed` is the base seed: subspace `j` of leaf `l` is fitted with
    /// `seed + l * M + j`.
    pub kmeans: KMeansConfig,
}

impl PqConfig {
    pub fn new(num_subspaces: usize, centroids_per_subspace: usize, seed: u64) -> Self {
        Self {
            num_subspaces,
            centroids_per_subspace,
            kmeans: KMeansConfig::new(centroids_per_subspace, seed),
        }
    }

    fn check(&self, rows: usize, cols: usize) -> Result<usize> {
        let m = self.num_subspaces;
        if m == 0 || !cols.is_multiple_of(m) {
            return Err(Error::Config(format!(
                "{cols} columns cannot be split into {m} equal subspaces"
            )));
        }
        if self.centroids_per_subspace == 0 {
            return Err(Error::Config("K_s must be at least 1".into()));
        }
        if self.centroids_per_subspace > rows {
            return Err(Error::TooFewPoints { k: self.centroids_per_subspace, points: rows });
        }
        Ok(cols / m)
    }
}

/// Per-row, per-subspace centroid indices (`rows × subspaces`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatrix {
    rows: usize,
    subspaces: usize,
    codes: Vec<u32>,
}

impl CodeMatrix {
    pub fn new(rows: usize, subspaces: usize, codes: Vec<u32>) -> Result<Self> {
        if codes.len() != rows * subspaces {
            return Err(Error::Shape(format!(
                "{rows}x{subspaces} code matrix needs {} codes, got {}",
                rows * subspaces,
                codes.len()
            )));
        }
        Ok(Self { rows, subspaces, codes })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn subspaces(&self) -> usize {
        self.subspaces
    }

    #[inline]
    pub fn get(&self, row: usize, subspace: usize) -> u32 {
        self.codes[row * self.subspaces + subspace]
    }

    #[inline]
    pub fn set(&mut self, row: usize, subspace: usize, code: u32) {
        self.codes[row * self.subspaces + subspace] = code;
    }

    /// Codes in row-major order.
    pub fn as_slice(&self) -> &[u32] {
        &self.codes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqArtifact<T> {
    /// One `K_s × (D / M)` table per subspace.
    pub codebooks: Vec<DenseMatrix<T>>,
    pub codes: CodeMatrix,
    /// `(N, D)` of the quantized matrix.
    pub shape: (usize, usize),
}

impl<T: Scalar> PqArtifact<T> {
    pub fn num_subspaces(&self) -> usize {
        self.codebooks.len()
    }

    pub fn centroids_per_subspace(&self) -> usize {
        self.codebooks.first().map_or(0, |c| c.rows())
    }

    /// Checks shapes and code ranges.
    pub fn validate(&self) -> Result<()> {
        let (n, d) = self.shape;
        let m = self.codebooks.len();
        if m == 0 {
            return Err(Error::Shape("artifact has no codebooks".into()));
        }
        let ks = self.codebooks[0].rows();
        let width: usize = self.codebooks.iter().map(|c| c.cols()).sum();
        if width != d {
            return Err(Error::Shape(format!("subspace widths sum to {width}, expected {d}")));
        }
        if self.codebooks.iter().any(|c| c.rows() != ks) {
            return Err(Error::Shape("codebooks disagree on K_s".into()));
        }
        if self.codes.rows() != n || self.codes.subspaces() != m {
            return Err(Error::Shape(format!(
                "codes are {}x{}, expected {n}x{m}",
                self.codes.rows(),
                self.codes.subspaces()
            )));
        }
        if let Some(&code) = self.codes.as_slice().iter().find(|&&c| c as usize >= ks) {
            return Err(Error::CodeOutOfRange { code, ks });
        }
        Ok(())
    }
}

pub(crate) fn pq_quantize_seeded<T: Scalar>(
    m: &DenseMatrix<T>,
    cfg: &PqConfig,
    seed_offset: u64,
) -> Result<PqArtifact<T>> {
    let width = cfg.check(m.rows(), m.cols())?;
    let subspaces = cfg.num_subspaces;
    let fits = (0..subspaces)
        .into_par_iter()
        .map(|j| {
            let block = m.column_block(j * width, width)?;
            let kcfg = KMeansConfig {
                k: cfg.centroids_per_subspace,
                seed: cfg.kmeans.seed.wrapping_add(seed_offset).wrapping_add(j as u64),
                ..cfg.kmeans
            };
            kmeans_fit(&block, &kcfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut codes = CodeMatrix::new(m.rows(), subspaces, vec![0; m.rows() * subspaces])?;
    let mut codebooks = Vec::with_capacity(subspaces);
    for (j, fit) in fits.into_iter().enumerate() {
        for (i, &a) in fit.assignments.iter().enumerate() {
            codes.set(i, j, a);
        }
        codebooks.push(fit.centroids);
    }
    Ok(PqArtifact { codebooks, codes, shape: m.shape() })
}

/// Learns one codebook per subspace and encodes every row.
pub fn pq_quantize<T: Scalar>(m: &DenseMatrix<T>, cfg: &PqConfig) -> Result<PqArtifact<T>> {
    pq_quantize_seeded(m, cfg, 0)
}

/// Encodes `m` against existing codebooks.
pub fn pq_encode<T: Scalar>(m: &DenseMatrix<T>, codebooks: &[DenseMatrix<T>]) -> Result<CodeMatrix> {
    let width: usize = codebooks.iter().map(|c| c.cols()).sum();
    if width != m.cols() {
        return Err(Error::Shape(format!("codebooks cover {width} columns, matrix has {}", m.cols())));
    }
    let mut codes = CodeMatrix::new(m.rows(), codebooks.len(), vec![0; m.rows() * codebooks.len()])?;
    let mut start = 0;
    for (j, book) in codebooks.iter().enumerate() {
        let block = m.column_block(start, book.cols())?;
        for (i, a) in kmeans_assign(&block, book)?.into_iter().enumerate() {
            codes.set(i, j, a);
        }
        start += book.cols();
    }
    Ok(codes)
}

/// Replaces every subspace block by the centroid its code addresses.
pub fn pq_dequantize<T: Scalar>(a: &PqArtifact<T>) -> Result<DenseMatrix<T>> {
    a.validate()?;
    let (n, d) = a.shape;
    let mut data = Vec::with_capacity(n * d);
    for i in 0..n {
        for (j, book) in a.codebooks.iter().enumerate() {
            data.extend_from_slice(book.row(a.codes.get(i, j) as usize));
        }
    }
    DenseMatrix::new(n, d, data)
}

/// Orientation bits of one pair split: bit `(i, j)` is 1 iff
/// `m[2i][j] < m[2i + 1][j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMap {
    /// 1-based depth in the split tree.
    pub level: usize,
    pub bits: PairMask,
}

/// Splits row pairs into their column-wise minima and maxima.
///
/// Ties record a 0, so the first element of an equal pair counts as the
/// larger one.
pub fn hera_pair_split<T: Scalar>(
    m: &DenseMatrix<T>,
) -> Result<(DenseMatrix<T>, DenseMatrix<T>, FeatureMap)> {
    if !m.rows().is_multiple_of(2) {
        return Err(Error::Shape(format!("pair split needs an even row count, got {}", m.rows())));
    }
    let pairs = m.rows() / 2;
    let mut bits = PairMask::zeros(pairs, m.cols());
    for i in 0..pairs {
        for (j, (a, b)) in m.row(2 * i).iter().zip(m.row(2 * i + 1)).enumerate() {
            if a < b {
                bits.set(i, j, true);
            }
        }
    }
    let (small, big) = split_rows_by_mask(m, &bits)?;
    Ok((small, big, FeatureMap { level: 1, bits }))
}

/// Interleaves `small` and `big` back into pairs using the recorded orientation.
pub fn hera_pair_merge<T: Scalar>(
    small: &DenseMatrix<T>,
    big: &DenseMatrix<T>,
    fm: &FeatureMap,
) -> Result<DenseMatrix<T>> {
    merge_rows_by_mask(small, big, &fm.bits)
}

/// Feature maps of a full split tree. `levels()[t]` holds the `2^t` maps of
/// depth `t + 1`, ordered like the matrices they split.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitTree {
    levels: Vec<Vec<FeatureMap>>,
}

impl SplitTree {
    pub fn new(levels: Vec<Vec<FeatureMap>>) -> Result<Self> {
        for (t, maps) in levels.iter().enumerate() {
            if maps.len() != 1 << t {
                return Err(Error::Shape(format!(
                    "level {} needs {} feature maps, got {}",
                    t + 1,
                    1 << t,
                    maps.len()
                )));
            }
            if maps.iter().any(|fm| fm.level != t + 1) {
                return Err(Error::Shape(format!("feature map mislabelled at level {}", t + 1)));
            }
        }
        Ok(Self { levels })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Vec<FeatureMap>] {
        &self.levels
    }

    pub fn feature_map_bits(&self) -> u64 {
        self.levels
            .iter()
            .flatten()
            .map(|fm| fm.bits.len() as u64)
            .sum()
    }
}

/// Applies the pair split `levels` times, re-splitting every matrix from the
/// previous level. Leaves come back ordered by their small/big path, small
/// first (for two levels: small-small, small-big, big-small, big-big).
pub fn hera_transform<T: Scalar>(
    m: &DenseMatrix<T>,
    levels: usize,
) -> Result<(Vec<DenseMatrix<T>>, SplitTree)> {
    check_levels(m.rows(), levels)?;
    let mut current = vec![m.clone()];
    let mut tree = Vec::with_capacity(levels);
    for t in 1..=levels {
        let mut next = Vec::with_capacity(current.len() * 2);
        let mut maps = Vec::with_capacity(current.len());
        for part in &current {
            let (small, big, mut fm) = hera_pair_split(part)?;
            fm.level = t;
            next.push(small);
            next.push(big);
            maps.push(fm);
        }
        tree.push(maps);
        current = next;
    }
    Ok((current, SplitTree { levels: tree }))
}

/// Undoes [`hera_transform`], merging sibling leaves bottom-up.
pub fn hera_inverse_transform<T: Scalar>(
    leaves: Vec<DenseMatrix<T>>,
    tree: &SplitTree,
) -> Result<DenseMatrix<T>> {
    if leaves.len() != 1 << tree.depth() {
        return Err(Error::Shape(format!(
            "{} leaves for a tree of depth {}",
            leaves.len(),
            tree.depth()
        )));
    }
    let mut current = leaves;
    for maps in tree.levels.iter().rev() {
        current = current
            .chunks_exact(2)
            .zip(maps)
            .map(|(pair, fm)| hera_pair_merge(&pair[0], &pair[1], fm))
            .collect::<Result<_>>()?;
    }
    Ok(current.pop().expect("one matrix left after merging"))
}

fn check_levels(rows: usize, levels: usize) -> Result<usize> {
    if levels >= usize::BITS as usize || !rows.is_multiple_of(1usize << levels) {
        return Err(Error::Shape(format!(
            "{rows} rows are not divisible by 2^{levels}"
        )));
    }
    Ok(rows >> levels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeraArtifact<T> {
    pub tree: SplitTree,
    /// `2^levels` leaf artifacts in small-first path order.
    pub leaves: Vec<PqArtifact<T>>,
    /// `(N, D)` of the original matrix.
    pub shape: (usize, usize),
}

impl<T: Scalar> HeraArtifact<T> {
    pub fn levels(&self) -> usize {
        self.tree.depth()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = self.shape;
        let levels = self.levels();
        let leaf_rows = check_levels(n, levels)?;
        if self.leaves.len() != 1 << levels {
            return Err(Error::Shape(format!(
                "{} leaves for {levels} levels",
                self.leaves.len()
            )));
        }
        for leaf in &self.leaves {
            if leaf.shape != (leaf_rows, d) {
                return Err(Error::Shape(format!(
                    "leaf shape {:?}, expected {:?}",
                    leaf.shape,
                    (leaf_rows, d)
                )));
            }
            leaf.validate()?;
        }
        for (t, maps) in self.tree.levels.iter().enumerate() {
            let pairs = n >> (t + 1);
            if maps.iter().any(|fm| fm.bits.pairs() != pairs || fm.bits.cols() != d) {
                return Err(Error::Shape(format!("feature maps at level {} mis-sized", t + 1)));
            }
        }
        Ok(())
    }
}

/// Reorders `m` through `levels` pair splits and product-quantizes each leaf.
/// With `levels = 0` this is plain [`pq_quantize`].
pub fn hera_quantize<T: Scalar>(
    m: &DenseMatrix<T>,
    levels: usize,
    cfg: &PqConfig,
) -> Result<HeraArtifact<T>> {
    let leaf_rows = check_levels(m.rows(), levels)?;
    cfg.check(leaf_rows, m.cols())?;
    let (leaves, tree) = hera_transform(m, levels)?;
    let stride = cfg.num_subspaces as u64;
    let leaves = leaves
        .par_iter()
        .enumerate()
        .map(|(l, leaf)| pq_quantize_seeded(leaf, cfg, l as u64 * stride))
        .collect::<Result<Vec<_>>>()?;
    Ok(HeraArtifact { tree, leaves, shape: m.shape() })
}

pub fn hera_dequantize<T: Scalar>(a: &HeraArtifact<T>) -> Result<DenseMatrix<T>> {
    a.validate()?;
    let leaves = a.leaves.iter().map(pq_dequantize).collect::<Result<Vec<_>>>()?;
    hera_inverse_transform(leaves, &a.tree)
}

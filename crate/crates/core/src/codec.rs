//! On-disk artifact format.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "HERQ"
//!      4     4  version (1)
//!      8     1  method (0 = PQ, 1 = reordered PQ)
//!      9     1  levels
//!     10     2  M
//!     12     4  K_s
//!     16     8  N
//!     24     8  D
//!     32     4  crc32 of everything after the header
//!     36     4  zero padding
//!     40        codebooks | codes | feature maps
//! ```
//!
//! Integers are little-endian. Codebooks are stored leaf-major, then
//! subspace-major, then centroid-major. Codes are `ceil(log2 K_s)` bits each,
//! leaf-major then row-major. Feature maps are one bit each, level-major,
//! then leaf-major, then row-major. Bits fill each byte from the least
//! significant end. Every section is zero-padded to a multiple of 8 bytes.

use std::path::Path;

use crate::budget::code_bit_width;
use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, PairMask};
use crate::quantizer::{
    hera_dequantize, pq_dequantize, CodeMatrix, FeatureMap, HeraArtifact, PqArtifact, SplitTree,
};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"HERQ";
pub const VERSION: u32 = 1;
/// Header bytes before alignment padding.
pub const HEADER_LEN: usize = 36;
const PAYLOAD_OFFSET: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Pq = 0,
    Hera = 1,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Pq => "pq",
            Method::Hera => "hera",
        }
    }
}

/// Either kind of quantized matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact<T> {
    Pq(PqArtifact<T>),
    Hera(HeraArtifact<T>),
}

impl<T: Scalar> Artifact<T> {
    pub fn method(&self) -> Method {
        match self {
            Artifact::Pq(_) => Method::Pq,
            Artifact::Hera(_) => Method::Hera,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            Artifact::Pq(a) => a.shape,
            Artifact::Hera(a) => a.shape,
        }
    }

    pub fn levels(&self) -> usize {
        match self {
            Artifact::Pq(_) => 0,
            Artifact::Hera(a) => a.levels(),
        }
    }

    pub fn dequantize(&self) -> Result<DenseMatrix<T>> {
        match self {
            Artifact::Pq(a) => pq_dequantize(a),
            Artifact::Hera(a) => hera_dequantize(a),
        }
    }

    fn leaves(&self) -> &[PqArtifact<T>] {
        match self {
            Artifact::Pq(a) => std::slice::from_ref(a),
            Artifact::Hera(a) => &a.leaves,
        }
    }
}

impl<T> From<PqArtifact<T>> for Artifact<T> {
    fn from(a: PqArtifact<T>) -> Self {
        Artifact::Pq(a)
    }
}

impl<T> From<HeraArtifact<T>> for Artifact<T> {
    fn from(a: HeraArtifact<T>) -> Self {
        Artifact::Hera(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArtifactHeader {
    pub method: Method,
    pub levels: u8,
    pub m: u16,
    pub ks: u32,
    pub n: u64,
    pub d: u64,
    pub checksum: u32,
}

/// Layout of one encoded artifact. Section sizes are derived from the
/// header alone; `*_bits` exclude padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArtifactFile {
    pub header: ArtifactHeader,
    pub codebook_bits: u64,
    pub code_bits: u64,
    pub feature_map_bits: u64,
    pub file_bytes: u64,
}

impl ArtifactFile {
    pub fn payload_bits(&self) -> u64 {
        self.codebook_bits + self.code_bits + self.feature_map_bits
    }
}

struct Sections {
    codebook_bits: u64,
    code_bits: u64,
    feature_map_bits: u64,
}

fn pad8(bits: u64) -> u64 {
    bits.div_ceil(64) * 8
}

impl Sections {
    fn from_header<T: Scalar>(h: &ArtifactHeader) -> Result<Self> {
        let overflow = || Error::Corrupt("header sizes overflow".into());
        let leaves = 1u64 << h.levels;
        let codebook_bits = leaves
            .checked_mul(h.ks as u64)
            .and_then(|v| v.checked_mul(h.d))
            .and_then(|v| v.checked_mul(T::BITS as u64))
            .ok_or_else(overflow)?;
        let code_bits = h
            .n
            .checked_mul(h.m as u64)
            .and_then(|v| v.checked_mul(code_bit_width(h.ks as usize) as u64))
            .ok_or_else(overflow)?;
        let feature_map_bits = (h.levels as u64)
            .checked_mul(h.n)
            .and_then(|v| v.checked_mul(h.d))
            .ok_or_else(overflow)?
            / 2;
        Ok(Self { codebook_bits, code_bits, feature_map_bits })
    }

    fn file_bytes(&self) -> Option<u64> {
        (PAYLOAD_OFFSET as u64)
            .checked_add(pad8(self.codebook_bits))?
            .checked_add(pad8(self.code_bits))?
            .checked_add(pad8(self.feature_map_bits))
    }
}

#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    fn push(&mut self, value: u64, width: u32) {
        for b in 0..width {
            if self.len.is_multiple_of(8) {
                self.bytes.push(0);
            }
            if value >> b & 1 == 1 {
                *self.bytes.last_mut().unwrap() |= 1 << (self.len % 8);
            }
            self.len += 1;
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl BitReader<'_> {
    fn read(&mut self, width: u32) -> u64 {
        let mut v = 0;
        for b in 0..width {
            let byte = self.bytes[(self.pos / 8) as usize];
            v |= ((byte >> (self.pos % 8) & 1) as u64) << b;
            self.pos += 1;
        }
        v
    }
}

fn push_section(out: &mut Vec<u8>, section: &[u8]) {
    out.extend_from_slice(section);
    out.resize(out.len().next_multiple_of(8), 0);
}

/// Serializes an artifact to bytes.
pub fn encode_artifact<T: Scalar>(a: &Artifact<T>) -> Result<(Vec<u8>, ArtifactFile)> {
    let (n, d) = a.shape();
    let leaves = a.leaves();
    match a {
        Artifact::Pq(p) => p.validate()?,
        Artifact::Hera(h) => h.validate()?,
    }
    let m = leaves[0].num_subspaces();
    let ks = leaves[0].centroids_per_subspace();
    let width = d / m;
    for leaf in leaves {
        if leaf.num_subspaces() != m
            || leaf.centroids_per_subspace() != ks
            || leaf.codebooks.iter().any(|c| c.cols() != width)
        {
            return Err(Error::Shape(
                "file format needs uniform M, K_s and subspace width across leaves".into(),
            ));
        }
    }
    let header = ArtifactHeader {
        method: a.method(),
        levels: u8::try_from(a.levels()).map_err(|_| Error::Shape("too many levels".into()))?,
        m: u16::try_from(m).map_err(|_| Error::Shape(format!("M = {m} exceeds u16")))?,
        ks: u32::try_from(ks).map_err(|_| Error::Shape(format!("K_s = {ks} exceeds u32")))?,
        n: n as u64,
        d: d as u64,
        checksum: 0,
    };

    let mut codebooks = Vec::new();
    for leaf in leaves {
        for book in &leaf.codebooks {
            for &v in book.data() {
                v.write_le(&mut codebooks);
            }
        }
    }
    let code_width = code_bit_width(ks);
    let mut codes = BitWriter::default();
    for leaf in leaves {
        for &c in leaf.codes.as_slice() {
            codes.push(c as u64, code_width);
        }
    }
    let mut maps = BitWriter::default();
    if let Artifact::Hera(h) = a {
        for fm in h.tree.levels().iter().flatten() {
            for bit in fm.bits.iter() {
                maps.push(bit as u64, 1);
            }
        }
    }

    let mut payload = Vec::new();
    push_section(&mut payload, &codebooks);
    push_section(&mut payload, &codes.bytes);
    push_section(&mut payload, &maps.bytes);
    let checksum = crc32fast::hash(&payload);
    let header = ArtifactHeader { checksum, ..header };

    let mut out = Vec::with_capacity(PAYLOAD_OFFSET + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(header.method as u8);
    out.push(header.levels);
    out.extend_from_slice(&header.m.to_le_bytes());
    out.extend_from_slice(&header.ks.to_le_bytes());
    out.extend_from_slice(&header.n.to_le_bytes());
    out.extend_from_slice(&header.d.to_le_bytes());
    out.extend_from_slice(&checksum.to_le_bytes());
    out.resize(PAYLOAD_OFFSET, 0);
    out.extend_from_slice(&payload);

    let file = ArtifactFile {
        header,
        codebook_bits: codebooks.len() as u64 * 8,
        code_bits: codes.len,
        feature_map_bits: maps.len,
        file_bytes: out.len() as u64,
    };
    debug_assert_eq!(Sections::from_header::<T>(&header)?.file_bytes(), Some(file.file_bytes));
    Ok((out, file))
}

fn le<const W: usize>(bytes: &[u8], at: usize) -> [u8; W] {
    bytes[at..at + W].try_into().unwrap()
}

/// Parses and validates the fixed-size header.
pub fn decode_header(bytes: &[u8]) -> Result<ArtifactHeader> {
    if bytes.len() < PAYLOAD_OFFSET {
        return Err(Error::Corrupt(format!("file is only {} bytes", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Corrupt("bad magic".into()));
    }
    let version = u32::from_le_bytes(le(bytes, 4));
    if version != VERSION {
        return Err(Error::Corrupt(format!("unsupported version {version}")));
    }
    let method = match bytes[8] {
        0 => Method::Pq,
        1 => Method::Hera,
        other => return Err(Error::Corrupt(format!("unknown method {other}"))),
    };
    let header = ArtifactHeader {
        method,
        levels: bytes[9],
        m: u16::from_le_bytes(le(bytes, 10)),
        ks: u32::from_le_bytes(le(bytes, 12)),
        n: u64::from_le_bytes(le(bytes, 16)),
        d: u64::from_le_bytes(le(bytes, 24)),
        checksum: u32::from_le_bytes(le(bytes, 32)),
    };
    if method == Method::Pq && header.levels != 0 {
        return Err(Error::Corrupt("PQ artifact with non-zero levels".into()));
    }
    if header.levels >= 32 {
        return Err(Error::Corrupt(format!("{} levels", header.levels)));
    }
    if header.m == 0 || header.ks == 0 || header.n == 0 || header.d == 0 {
        return Err(Error::Corrupt("zero dimension in header".into()));
    }
    if !header.d.is_multiple_of(header.m as u64) || !header.n.is_multiple_of(1u64 << header.levels) {
        return Err(Error::Corrupt("header dimensions are inconsistent".into()));
    }
    Ok(header)
}

/// Inverse of [`encode_artifact`]. Rejects bad magic/version, wrong length,
/// checksum mismatches and out-of-range codes.
pub fn decode_artifact<T: Scalar>(bytes: &[u8]) -> Result<Artifact<T>> {
    let h = decode_header(bytes)?;
    let sections = Sections::from_header::<T>(&h)?;
    let expected = sections
        .file_bytes()
        .ok_or_else(|| Error::Corrupt("header sizes overflow".into()))?;
    if bytes.len() as u64 != expected {
        return Err(Error::Corrupt(format!(
            "header implies {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let payload = &bytes[PAYLOAD_OFFSET..];
    let actual = crc32fast::hash(payload);
    if actual != h.checksum {
        return Err(Error::Checksum { expected: h.checksum, actual });
    }

    let (n, d, m, ks) = (h.n as usize, h.d as usize, h.m as usize, h.ks as usize);
    let levels = h.levels as usize;
    let width = d / m;
    let leaf_count = 1usize << levels;
    let leaf_rows = n >> levels;
    let value_bytes = T::BITS as usize / 8;

    let code_start = pad8(sections.codebook_bits) as usize;
    let map_start = code_start + pad8(sections.code_bits) as usize;
    let mut values = payload[..(sections.codebook_bits / 8) as usize].chunks_exact(value_bytes);
    let mut codes = BitReader { bytes: &payload[code_start..map_start], pos: 0 };
    let code_width = code_bit_width(ks);

    let mut leaves = Vec::with_capacity(leaf_count);
    for _ in 0..leaf_count {
        let codebooks = (0..m)
            .map(|_| {
                let data = values.by_ref().take(ks * width).map(T::read_le).collect();
                DenseMatrix::new(ks, width, data)
            })
            .collect::<Result<Vec<_>>>()?;
        let raw: Vec<u32> = (0..leaf_rows * m).map(|_| codes.read(code_width) as u32).collect();
        if let Some(&code) = raw.iter().find(|&&c| c as usize >= ks) {
            return Err(Error::CodeOutOfRange { code, ks });
        }
        leaves.push(PqArtifact {
            codebooks,
            codes: CodeMatrix::new(leaf_rows, m, raw)?,
            shape: (leaf_rows, d),
        });
    }

    if h.method == Method::Pq {
        return Ok(Artifact::Pq(leaves.pop().expect("single leaf")));
    }

    let mut maps = BitReader { bytes: &payload[map_start..], pos: 0 };
    let mut tree = Vec::with_capacity(levels);
    for t in 1..=levels {
        let pairs = n >> t;
        let level = (0..1usize << (t - 1))
            .map(|_| {
                let mut bits = PairMask::zeros(pairs, d);
                for i in 0..pairs {
                    for j in 0..d {
                        bits.set(i, j, maps.read(1) == 1);
                    }
                }
                FeatureMap { level: t, bits }
            })
            .collect();
        tree.push(level);
    }
    Ok(Artifact::Hera(HeraArtifact { tree: SplitTree::new(tree)?, leaves, shape: (n, d) }))
}

pub fn save_artifact<T: Scalar>(a: &Artifact<T>, path: impl AsRef<Path>) -> Result<ArtifactFile> {
    let (bytes, file) = encode_artifact(a)?;
    std::fs::write(path, bytes)?;
    Ok(file)
}

pub fn load_artifact<T: Scalar>(path: impl AsRef<Path>) -> Result<Artifact<T>> {
    decode_artifact(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::budget::account_hera;
    use crate::matrix::{generate_truncated_normal, TruncNormalSpec};
    use crate::quantizer::{hera_quantize, pq_quantize, PqConfig};

    fn tn(rows: usize, cols: usize, seed: u64) -> DenseMatrix<f32> {
        generate_truncated_normal(&TruncNormalSpec::standard(seed), rows, cols).unwrap()
    }

    #[test]
    fn header_layout() {
        let a: Artifact<f32> = pq_quantize(&tn(16, 4, 1), &PqConfig::new(2, 3, 0)).unwrap().into();
        let (bytes, file) = encode_artifact(&a).unwrap();
        assert_eq!(&bytes[..4], b"HERQ");
        assert_eq!(u32::from_le_bytes(le(&bytes, 4)), 1);
        assert_eq!(bytes[8], 0);
        assert_eq!(bytes[9], 0);
        assert_eq!(u16::from_le_bytes(le(&bytes, 10)), 2);
        assert_eq!(u32::from_le_bytes(le(&bytes, 12)), 3);
        assert_eq!(u64::from_le_bytes(le(&bytes, 16)), 16);
        assert_eq!(u64::from_le_bytes(le(&bytes, 24)), 4);
        assert_eq!(u32::from_le_bytes(le(&bytes, 32)), crc32fast::hash(&bytes[40..]));
        assert_eq!(bytes.len() % 8, 0);
        assert_eq!(file.file_bytes, bytes.len() as u64);
        // 3 centroids x 4 columns x 32 bits, 16 x 2 codes x 2 bits
        assert_eq!((file.codebook_bits, file.code_bits, file.feature_map_bits), (384, 64, 0));
    }

    #[test]
    fn roundtrip_pq_and_hera() {
        let m = tn(64, 8, 2);
        let pq: Artifact<f32> = pq_quantize(&m, &PqConfig::new(4, 5, 1)).unwrap().into();
        let hera: Artifact<f32> = hera_quantize(&m, 3, &PqConfig::new(2, 3, 1)).unwrap().into();
        for a in [pq, hera] {
            let (bytes, _) = encode_artifact(&a).unwrap();
            let back: Artifact<f32> = decode_artifact(&bytes).unwrap();
            assert_eq!(back, a);
            assert!(back.dequantize().unwrap().bit_eq(&a.dequantize().unwrap()));
        }
    }

    #[test]
    fn single_centroid_has_empty_code_section() {
        let a: Artifact<f32> = hera_quantize(&tn(32, 4, 3), 2, &PqConfig::new(2, 1, 0)).unwrap().into();
        let (bytes, file) = encode_artifact(&a).unwrap();
        assert_eq!(file.code_bits, 0);
        assert_eq!(decode_artifact::<f32>(&bytes).unwrap(), a);
    }

    #[test]
    fn payload_matches_budget() {
        let m = tn(64, 8, 4);
        let a: Artifact<f32> = hera_quantize(&m, 2, &PqConfig::new(4, 5, 0)).unwrap().into();
        let (_, file) = encode_artifact(&a).unwrap();
        let b = account_hera(64, 8, 4, 5, 2).unwrap();
        assert_eq!(file.codebook_bits, b.codebook_bits);
        assert_eq!(file.code_bits, b.code_bits);
        assert_eq!(file.feature_map_bits, b.feature_map_bits);
    }

    #[test]
    fn detects_corruption() {
        let a: Artifact<f32> = hera_quantize(&tn(32, 4, 5), 1, &PqConfig::new(2, 4, 0)).unwrap().into();
        let (bytes, _) = encode_artifact(&a).unwrap();
        for pos in [40, 41, bytes.len() / 2, bytes.len() - 1] {
            let mut bad = bytes.clone();
            bad[pos] ^= 0x10;
            assert!(
                matches!(decode_artifact::<f32>(&bad), Err(Error::Checksum { .. })),
                "flip at {pos}"
            );
        }
        let mut bad = bytes.clone();
        bad[0] = b'h';
        assert!(matches!(decode_artifact::<f32>(&bad), Err(Error::Corrupt(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(decode_artifact::<f32>(&bad).is_err());
        assert!(decode_artifact::<f32>(&bytes[..bytes.len() - 8]).is_err());
        assert!(decode_artifact::<f32>(&bytes[..20]).is_err());
        // f64 readers see a length mismatch.
        assert!(decode_artifact::<f64>(&bytes).is_err());
    }

    #[test]
    fn rejects_out_of_range_code_with_valid_checksum() {
        let a: Artifact<f32> = pq_quantize(&tn(16, 2, 6), &PqConfig::new(1, 3, 0)).unwrap().into();
        let (mut bytes, file) = encode_artifact(&a).unwrap();
        let code_start = 40 + pad8(file.codebook_bits) as usize;
        bytes[code_start] |= 0b11;
        let crc = crc32fast::hash(&bytes[40..]);
        bytes[32..36].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            decode_artifact::<f32>(&bytes),
            Err(Error::CodeOutOfRange { code: 3, ks: 3 })
        ));
    }

    #[test]
    fn file_helpers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.herq");
        let a: Artifact<f32> = hera_quantize(&tn(16, 4, 7), 1, &PqConfig::new(2, 2, 0)).unwrap().into();
        let file = save_artifact(&a, &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), file.file_bytes);
        assert_eq!(load_artifact::<f32>(&path).unwrap(), a);
        assert!(matches!(load_artifact::<f32>(dir.path().join("missing")), Err(Error::Io(_))));
    }
}

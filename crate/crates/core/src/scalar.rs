use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Element type of a [`DenseMatrix`](crate::DenseMatrix).
///
/// Implemented for `f32` (the canonical storage type, matching the 32-bit
/// codebook entries charged by the bit budget) and `f64`. Arithmetic that
/// accumulates over many elements (k-means means, error metrics) always
/// runs in `f64` regardless of the element type.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Width of one stored value in bits.
    const BITS: u32;

    fn write_le(self, out: &mut Vec<u8>);

    /// Decodes one value from exactly `BITS / 8` little-endian bytes.
    fn read_le(bytes: &[u8]) -> Self;

    #[inline]
    fn to_f64_lossless(self) -> f64 {
        // f32 -> f64 and f64 -> f64 are both exact.
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Nearest representable value.
    #[inline]
    fn from_f64_nearest(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {
    const BITS: u32 = 32;

    #[inline]
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    #[inline]
    fn read_le(bytes: &[u8]) -> Self {
        let mut buf = [0u8; 4];
        buf.copy_from_slice(&bytes[..4]);
        f32::from_le_bytes(buf)
    }
}

impl Scalar for f64 {
    const BITS: u32 = 64;

    #[inline]
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    #[inline]
    fn read_le(bytes: &[u8]) -> Self {
        let mut buf = [0u8; 8];
        buf.copy_from_slice(&bytes[..8]);
        f64::from_le_bytes(buf)
    }
}

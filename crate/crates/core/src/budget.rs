//! Storage accounting for PQ and reordered-PQ artifacts, and the search for
//! the largest codebook size that fits a given budget.

use crate::error::{Error, Result};

/// Bits held by one stored artifact, split by section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BitBudget {
    pub total_bits: u64,
    pub codebook_bits: u64,
    pub code_bits: u64,
    pub feature_map_bits: u64,
}

/// How many bits one code costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CodeWidth {
    /// `ceil(log2 K_s)` bits per code, which is what the file format stores.
    #[default]
    CeilLog2,
    /// `(K_s - 1) * ceil(log2 K_s)` bits per code. Only useful for
    /// sensitivity checks against the literal memory formula.
    Literal,
}

/// Accounting rules. The default matches the on-disk layout exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetPolicy {
    pub code_width: CodeWidth,
    /// When false, feature maps are stored but not billed.
    pub charge_feature_maps: bool,
    /// Width of one codebook entry.
    pub scalar_bits: u64,
}

impl Default for BudgetPolicy {
    fn default() -> Self {
        Self { code_width: CodeWidth::CeilLog2, charge_feature_maps: true, scalar_bits: 32 }
    }
}

/// `ceil(log2 ks)`; a single centroid needs no code bits at all.
pub fn code_bit_width(ks: usize) -> u32 {
    if ks <= 1 {
        0
    } else {
        usize::BITS - (ks - 1).leading_zeros()
    }
}

fn mul(values: &[u64]) -> Result<u64> {
    values
        .iter()
        .try_fold(1u64, |acc, &v| acc.checked_mul(v))
        .ok_or_else(|| Error::Config("bit count overflows u64".into()))
}

impl BudgetPolicy {
    pub fn uncharged() -> Self {
        Self { charge_feature_maps: false, ..Self::default() }
    }

    fn per_code_bits(&self, ks: usize) -> u64 {
        let width = code_bit_width(ks) as u64;
        match self.code_width {
            CodeWidth::CeilLog2 => width,
            CodeWidth::Literal => (ks as u64 - 1) * width,
        }
    }

    pub fn account_pq(&self, n: usize, d: usize, m: usize, ks: usize) -> Result<BitBudget> {
        self.account_hera(n, d, m, ks, 0)
    }

    /// Budget of a `levels`-deep reordering with one PQ codebook set per leaf.
    ///
    /// Level `t` stores `2^(t-1)` maps of `(N / 2^t) × D` bits, so every level
    /// costs `N × D / 2` bits regardless of depth.
    pub fn account_hera(
        &self,
        n: usize,
        d: usize,
        m: usize,
        ks: usize,
        levels: usize,
    ) -> Result<BitBudget> {
        if n == 0 || d == 0 || m == 0 || ks == 0 {
            return Err(Error::Config(format!(
                "counts must be positive (n={n}, d={d}, m={m}, ks={ks})"
            )));
        }
        if levels >= 63 || !n.is_multiple_of(1usize << levels) {
            return Err(Error::Shape(format!("{n} rows are not divisible by 2^{levels}")));
        }
        let leaves = 1u64 << levels;
        let codebook_bits = mul(&[leaves, ks as u64, d as u64, self.scalar_bits])?;
        let code_bits = mul(&[n as u64, m as u64, self.per_code_bits(ks)])?;
        let feature_map_bits = if self.charge_feature_maps {
            mul(&[levels as u64, n as u64, d as u64])? / 2
        } else {
            0
        };
        Ok(BitBudget {
            total_bits: codebook_bits + code_bits + feature_map_bits,
            codebook_bits,
            code_bits,
            feature_map_bits,
        })
    }

    /// Largest `K_s` whose reordered artifact fits within `baseline.total_bits`.
    pub fn match_budget(
        &self,
        baseline: &BitBudget,
        n: usize,
        d: usize,
        m: usize,
        levels: usize,
    ) -> Result<usize> {
        // Codebook bits grow strictly with K_s and code bits never shrink,
        // so the feasible set is a prefix of 1, 2, 3, ...
        let mut best = None;
        let mut ks = 1;
        while self.account_hera(n, d, m, ks, levels)?.total_bits <= baseline.total_bits {
            best = Some(ks);
            ks += 1;
        }
        best.ok_or(Error::BudgetTooSmall { budget: baseline.total_bits })
    }
}

/// [`BudgetPolicy::account_pq`] under the default policy.
pub fn account_pq(n: usize, d: usize, m: usize, ks: usize) -> Result<BitBudget> {
    BudgetPolicy::default().account_pq(n, d, m, ks)
}

/// [`BudgetPolicy::account_hera`] under the default policy.
pub fn account_hera(n: usize, d: usize, m: usize, ks: usize, levels: usize) -> Result<BitBudget> {
    BudgetPolicy::default().account_hera(n, d, m, ks, levels)
}

/// [`BudgetPolicy::match_budget`] under the default policy.
pub fn match_budget(baseline: &BitBudget, n: usize, d: usize, m: usize, levels: usize) -> Result<usize> {
    BudgetPolicy::default().match_budget(baseline, n, d, m, levels)
}

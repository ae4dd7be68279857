//! τ-synchronizing sets of integer texts.
//!
//! The crate builds synchronizing sets in three representations: a sorted
//! position list, an `n`-bit mask, and a sparse γ-coded mask with rank and
//! select support. The pipeline is layered:
//!
//! * [`bitstream`] and [`text`] provide packed storage and short-substring tools.
//! * [`recompress`] computes the boundary chain `B_0 ⊇ B_1 ⊇ …` of restricted recompression.
//! * [`runs`] finds periodic fragments, and [`syncset`] combines both into synchronizing sets.
//! * [`sparsecodec`], [`transducer`] and [`ranksupport`] work on γ-coded sparse arrays.
//! * [`fastpath`] produces the sparse synchronizing-set mask directly from compressed levels.
//! * [`oracle`] holds brute-force references used by the tests and the `verify` command.

pub mod bitstream;
pub mod error;
pub mod fastpath;
pub mod oracle;
pub mod ranksupport;
pub mod recompress;
pub mod runs;
pub mod sparsecodec;
pub mod syncset;
pub mod text;
pub mod transducer;

pub use bitstream::BitStream;
pub use error::{Error, Result};
pub use sparsecodec::SparseEncoding;
pub use text::PackedText;

/// Tuning knobs shared by all table-driven components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params {
    /// Table budget `N`; every lookup table holds at most about `N` entries.
    pub table_n: u64,
    /// The packed (sublinear) paths run only when `log_σ n` reaches this value.
    pub fallback_threshold: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            table_n: 1 << 16,
            fallback_threshold: 256.0,
        }
    }
}

impl Params {
    pub const MAX_TABLE_N: u64 = 1 << 24;

    pub fn new(table_n: u64, fallback_threshold: f64) -> Result<Self> {
        let p = Params {
            table_n,
            fallback_threshold,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=Self::MAX_TABLE_N).contains(&self.table_n) {
            return Err(Error::InvalidArgument(format!(
                "table parameter N = {} outside [2..2^24]",
                self.table_n
            )));
        }
        if !(self.fallback_threshold > 0.0) || !self.fallback_threshold.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "fallback threshold {} must be positive",
                self.fallback_threshold
            )));
        }
        Ok(())
    }

    /// `⌊lg N⌋`.
    pub fn lg_table(&self) -> u32 {
        63 - self.table_n.max(2).leading_zeros()
    }

    /// `⌈lg N⌉`.
    pub fn lg_table_ceil(&self) -> u32 {
        let f = self.lg_table();
        if self.table_n.is_power_of_two() {
            f
        } else {
            f + 1
        }
    }
}

/// `⌊lg x⌋` for `x ≥ 1`.
#[inline]
pub(crate) fn floor_lg(x: u64) -> u32 {
    debug_assert!(x > 0);
    63 - x.leading_zeros()
}

/// `⌈lg x⌉` for `x ≥ 1`.
#[inline]
pub(crate) fn ceil_lg(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

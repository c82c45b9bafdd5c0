//! Hard size limits for exhaustive enumeration and dense intermediates.

use crate::error::{Error, Result};

/// Environment variable overriding both guard exponents.
pub const GUARD_ENV: &str = "TENSORNET_GUARD_BITS";

/// Size limits, expressed as powers of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Guards {
    /// Maximum number of edge labelings enumerated by the labeling sum.
    pub labeling_bits: u32,
    /// Maximum number of amplitudes in any dense intermediate
    /// (frontier tensors, swallowing matrices, simulated state vectors).
    pub amplitude_bits: u32,
}

impl Default for Guards {
    fn default() -> Self {
        Guards {
            labeling_bits: 26,
            amplitude_bits: 22,
        }
    }
}

impl Guards {
    /// Both guards set to the same exponent.
    pub fn uniform(bits: u32) -> Self {
        Guards {
            labeling_bits: bits,
            amplitude_bits: bits,
        }
    }

    /// Defaults, overridden by `TENSORNET_GUARD_BITS` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(GUARD_ENV) {
            Ok(raw) => {
                let bits: u32 = raw.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("{GUARD_ENV}={raw:?} is not a non-negative integer"))
                })?;
                if bits > 62 {
                    return Err(Error::InvalidArgument(format!(
                        "{GUARD_ENV}={bits} exceeds the supported maximum of 62"
                    )));
                }
                Ok(Guards::uniform(bits))
            }
            Err(_) => Ok(Guards::default()),
        }
    }

    pub fn check_labelings(&self, q: usize, edges: usize) -> Result<()> {
        check(q, edges, self.labeling_bits, "labeling enumeration")
    }

    pub fn check_amplitudes(&self, q: usize, registers: usize, what: &str) -> Result<()> {
        check(q, registers, self.amplitude_bits, what)
    }

    /// Checks an arbitrary dimension (mixed register sizes).
    pub fn check_dimension(&self, dim: u128, what: &str) -> Result<()> {
        if dim > 1u128 << self.amplitude_bits {
            return Err(Error::Guard {
                what: what.to_string(),
                needed_bits: (dim as f64).log2(),
                limit_bits: self.amplitude_bits,
            });
        }
        Ok(())
    }
}

fn check(q: usize, exponent: usize, limit_bits: u32, what: &str) -> Result<()> {
    let limit = 1u128 << limit_bits;
    let within = u32::try_from(exponent)
        .ok()
        .and_then(|e| (q as u128).checked_pow(e))
        .is_some_and(|n| n <= limit);
    if within {
        Ok(())
    } else {
        Err(Error::Guard {
            what: what.to_string(),
            needed_bits: exponent as f64 * (q as f64).log2(),
            limit_bits,
        })
    }
}

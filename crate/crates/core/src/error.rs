use thiserror::Error;

use crate::geometry::DiskId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The particle sits inside a scatterer. Indicates corrupted state upstream.
    #[error("position lies inside scatterer {0:?}")]
    InsideScatterer(Option<DiskId>),

    /// Grazing or outgoing velocity handed to the reflection rule.
    #[error("velocity is not incoming (v·n = {0})")]
    NotIncoming(f64),

    #[error("scatterers {0:?} and {1:?} overlap")]
    Overlap(DiskId, DiskId),

    #[error("patch element {0} lies outside the patch bound {1}")]
    OutOfPatchBound(String, f64),

    #[error("rejection sampling exhausted after {0} attempts")]
    SamplingExhausted(u64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("memory guard: {0}")]
    MemoryGuard(String),

    #[error("parity violation: {0}")]
    Parity(String),
}

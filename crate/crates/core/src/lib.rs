//! Nonstationary compositions of intermittent interval maps.
//!
//! * [`maps`]: the LSV, Cui, Pikovsky and Grossmann–Horner families.
//! * [`sequences`]: deterministic, periodic, i.i.d. and Markov parameter sequences.
//! * [`partitions`]: return-time partitions, tails and power-law fits.
//! * [`transfer`]: transfer operators on grid densities, memory loss, mixing mass.
//! * [`coupling`]: composed tails, coupling weights and the law of the coupling time.

pub mod coupling;
pub mod error;
pub mod maps;
pub mod partitions;
pub mod rng;
pub mod roots;
pub mod sequences;
pub mod tail;
pub mod transfer;

pub use error::{Error, Result};
pub use maps::{BranchId, Family, MapParams};
pub use partitions::{fit_power_law, return_time_tail, PowerLawFit, TailBase};
pub use sequences::ParamSequence;
pub use tail::{TailLabel, TailTable};
pub use transfer::{DensityKind, GridDensity};

//! Topological entropy, kneading theory and renormalisation numerics for the
//! quadratic family `x² + a` and the tent family `1 − b|x|`.
//!
//! Every numeric operation reads its arithmetic backend from a
//! [`PrecisionContext`]: native `f64` by default, or an extended binary
//! floating-point backend for deep-orbit experiments.

pub mod critical_orbit;
pub mod entropy;
pub mod error;
pub mod export;
pub mod holder;
pub mod kneading;
pub mod maps;
pub mod numeric;
pub mod parallel;
pub mod precision;
pub mod renorm;
pub mod sweep;
pub mod tent_dynamics;

mod cache;

pub use entropy::{EntropyMethod, EntropyResult};
pub use error::{Error, Result};
pub use kneading::{Itinerary, KneadOrder, KneadingData, Symbol};
pub use maps::{DynInterval, Family, FamilyParam, OrbitTrace, ParamValue};
pub use precision::{Backend, PrecisionContext};

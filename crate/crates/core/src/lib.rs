//! p-derivations, jet spaces and δ-characters of formal groups and modular forms
//! over ramified p-adic rings.

pub mod base_rings;
pub mod delta_calculus;
pub mod error;
pub mod formal_groups;
pub mod jet_series;
pub mod modular_forms;
pub mod suites;

pub use base_rings::{EisensteinConfig, Elem, Field, PadicConfig};
pub use error::{Error, Result};

//! Exact computer algebra for the subregular W-algebra of sp₄ at admissible
//! levels: root data, truncated q/z-series, the mode algebra, the module
//! classification and characters.

pub mod cartan;
pub mod characters;
pub mod classifier;
pub mod cli;
pub mod mode_algebra;
pub mod qz_series;
pub mod rat;

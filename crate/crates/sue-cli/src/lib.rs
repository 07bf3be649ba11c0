//! Library side of the `sue` binary: dataset ingestion (including the two
//! vendored reproduction datasets) and fit-report construction/serialization.
//! The binary in `main.rs` is a thin command layer over these modules and
//! `sue-core`.

pub mod data;
pub mod report;

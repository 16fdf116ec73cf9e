//! Support library for the `ptpmdl` command line tool: synthetic tree-source
//! generation, the per-block-model baseline, container inspection, and the
//! benchmark harness. The compressor itself lives in the `ptpmdl` crate.

pub mod bench;
pub mod inspect;
pub mod naive;
pub mod source;

//! Problem-file parsing and report types behind the `specdeg` binary.

pub mod problem;
pub mod report;

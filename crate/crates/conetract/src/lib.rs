//! File formats, parallel kernel scans and the `conetract` command line on
//! top of `conetract-core`.

pub mod cli;
pub mod figure;
pub mod format;
pub mod report;
pub mod scan;

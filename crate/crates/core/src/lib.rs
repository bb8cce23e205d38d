//! Reeb pre-digraphs of the height function on strips between two analytic
//! curves, their simplified NF graph diagrams, and pattern classification.

pub mod expr;
pub mod interval;
pub mod profile;
pub mod predigraph;
pub mod sweep;
pub mod gdnf;
pub mod pipeline;
pub mod spec_file;
pub mod compactify;
pub mod oracle;
pub mod emit;
pub mod report;

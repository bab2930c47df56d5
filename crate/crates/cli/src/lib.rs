//! Library side of the `edgekit` command: the scheduling experiment harness.

pub mod experiment;

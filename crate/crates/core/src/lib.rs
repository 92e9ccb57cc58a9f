pub mod census;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod harness;
pub mod lattice;
pub mod legendre;
pub mod rng;
pub mod scaling;
pub mod stats;
pub mod unionfind;

pub mod corpus;
pub mod coverage;
pub mod frontend;
pub mod harness;
pub mod runner;
pub mod runtime;
pub mod testspec;
pub mod value;

//! Fine-grained access control for SQL read queries.
//!
//! The crate compiles role-based policies whose authorization constraints
//! are written in OCL into secured MySQL stored procedures, translates the
//! constraints to many-sorted first-order logic so that an SMT solver can
//! prove individual runtime checks unnecessary under context facts, and
//! ships an in-memory SQL engine that executes the generated procedures for
//! testing.

pub mod fixtures;
pub mod harness;
pub mod model;
pub mod msfol;
pub mod ocl;
pub mod ocl2sql;
pub mod optimizer;
pub mod policy;
pub mod secquery;
pub mod sql;

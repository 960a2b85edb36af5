//! Joint design of a rapid transit line and a slow line that complements it:
//! instance handling, the MILP model, direct and Benders solvers, an
//! exhaustive oracle for small instances, and reporting.

// Index loops over parallel arrays and NaN-rejecting `!(x > 0.0)` tests are deliberate.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod benders;
pub mod formulation;
pub mod instance;
pub mod lp;
pub mod mip;
pub mod model;
pub mod oracle;
pub mod report;
pub mod solve;

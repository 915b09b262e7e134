//! Actual-cause checking and inference over binary acyclic structural
//! causal models, in the modified Halpern-Pearl sense.
//!
//! Causal queries are compiled into propositional formulas, clausal form,
//! weighted partial MaxSAT instances and 0-1 integer programs, solved with
//! the embedded engines, and the optimal solutions are interpreted back
//! into causes, contingency sets and responsibility degrees.

pub mod bench;
pub mod card;
pub mod causality;
pub mod cnf;
pub mod encoder;
pub mod error;
pub mod ilp;
pub mod maxsat;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sat;

pub use error::{Error, Result};

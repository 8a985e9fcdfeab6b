//! Random local access to uniformly random satisfying assignments of
//! bounded-degree CNF formulas.
//!
//! A query [`local_access::SamplerContext::sample`] for one variable returns its value in a
//! single (near-)uniform satisfying assignment fixed by the seed. Queries
//! keep no state between calls: every random choice is read from the
//! addressable tape in [`tape`], so any set of queries, in any order,
//! answers consistently.

pub mod component;
pub mod conditions;
pub mod formula;
pub mod glauber;
pub mod local_access;
pub mod marking;
pub mod oracle;
pub mod tape;
pub mod verify;

//! A bag-based translation engine.
//!
//! The pipeline has three stages, all driven by one unification-grammar
//! formalism over attribute-value structures ([`avm`]):
//!
//! 1. **Parse** ([`parser`]): a chart parser analyses the source sentence and
//!    returns, per parse, the *bag* of instantiated lexical signs — the leaves
//!    of the derivation with all bindings the derivation imposed on them.
//! 2. **Transfer** ([`transfer`]): a bilingual lexicon maps the source bag to
//!    one or more target-language bags by covering it exactly with bilingual
//!    entries.
//! 3. **Generate** ([`generator`]): a shift-reduce search arranges each target
//!    bag into grammatical sentences, optionally memoising subresults keyed by
//!    the subset of bag elements consumed.
//!
//! [`bench`] measures the generator's search cost against a closed-form
//! prediction, and [`pipeline`] wires the stages together behind one engine.

pub mod avm;
pub mod bench;
pub mod fixtures;
pub mod grammar;
pub mod generator;
pub mod parser;
pub mod pipeline;
pub mod transfer;

pub use avm::{NodeId, Store, Sym, Template};

//! A collection-oriented intermediate representation: item types and
//! values, programs built from pluggable instruction flavors, rewrite
//! passes (parallelization, lowering, pipeline extraction) and two
//! execution backends.

pub mod bench;
pub mod compare;
pub mod datagen;
pub mod exec;
pub mod expr;
pub mod flavors;
pub mod format;
pub mod ir;
pub mod programs;
pub mod rewrite;

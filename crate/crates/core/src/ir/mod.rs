//! The IR language: item types, values, programs and their validation.

mod program;
mod types;
mod validate;
mod value;

pub use program::{Instruction, Param, Program, RegId, Register, RETURN};
pub use types::{AtomDomain, CollectionKind, Field, ItemType, Name, TypeMalformation};
pub use validate::{validate, ValidationReport, Violation, ViolationKind};
pub use value::{canonical_compare, CollectionValue, TupleValue, Value, ValueError};

//! Well-formedness checks: SSA, Return placement, register uniqueness,
//! type and constant sanity. Violations are data, not failures.

use std::collections::HashSet;
use std::fmt;

use super::program::{Param, Program, RegId};
use super::value::Value;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// A register assigned by more than one instruction.
    Reassignment(RegId),
    UseBeforeDef(RegId),
    /// Two parameters with the same id.
    DuplicateRegister(RegId),
    MissingReturn,
    MisplacedReturn,
    ReturnWithOutputs,
    MalformedType {
        register: RegId,
        reason: String,
    },
    InvalidConstant(String),
}

/// A violation and where it was found: the path of instruction indices
/// through nested programs (empty for the program's own parameters).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: Vec<usize>,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, kind: &ViolationKind) -> bool {
        self.violations.iter().any(|v| &v.kind == kind)
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::Reassignment(r) => write!(f, "register `{r}` assigned more than once"),
            ViolationKind::UseBeforeDef(r) => write!(f, "register `{r}` used before definition"),
            ViolationKind::DuplicateRegister(r) => write!(f, "duplicate parameter `{r}`"),
            ViolationKind::MissingReturn => f.write_str("program has no Return"),
            ViolationKind::MisplacedReturn => f.write_str("Return is not the last instruction"),
            ViolationKind::ReturnWithOutputs => f.write_str("Return must not assign registers"),
            ViolationKind::MalformedType { register, reason } => {
                write!(f, "malformed type of `{register}`: {reason}")
            }
            ViolationKind::InvalidConstant(reason) => write!(f, "invalid constant: {reason}"),
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            if !v.path.is_empty() {
                write!(f, "at {:?}: ", v.path)?;
            }
            write!(f, "{}", v.kind)?;
        }
        Ok(())
    }
}

pub fn validate(program: &Program) -> ValidationReport {
    let mut report = ValidationReport::default();
    validate_into(program, &mut Vec::new(), &mut report);
    report
}

fn validate_into(program: &Program, path: &mut Vec<usize>, report: &mut ValidationReport) {
    let mut push = |path: &[usize], kind| {
        report.violations.push(Violation {
            path: path.to_vec(),
            kind,
        })
    };

    let mut defined: HashSet<&RegId> = HashSet::new();
    for reg in &program.params {
        if !defined.insert(&reg.id) {
            push(path, ViolationKind::DuplicateRegister(reg.id.clone()));
        }
        if let Err(e) = reg.ty.check() {
            push(
                path,
                ViolationKind::MalformedType {
                    register: reg.id.clone(),
                    reason: e.to_string(),
                },
            );
        }
    }

    let returns: Vec<usize> = program
        .body
        .iter()
        .enumerate()
        .filter(|(_, i)| i.is_return())
        .map(|(idx, _)| idx)
        .collect();
    match returns.as_slice() {
        [] => push(path, ViolationKind::MissingReturn),
        [only] if *only + 1 == program.body.len() => {}
        _ => push(path, ViolationKind::MisplacedReturn),
    }

    let mut nested = Vec::new();
    for (idx, instr) in program.body.iter().enumerate() {
        path.push(idx);
        for input in &instr.inputs {
            if !defined.contains(input) {
                push(path, ViolationKind::UseBeforeDef(input.clone()));
            }
        }
        if instr.is_return() && !instr.outputs.is_empty() {
            push(path, ViolationKind::ReturnWithOutputs);
        }
        for out in &instr.outputs {
            if !defined.insert(out) {
                push(path, ViolationKind::Reassignment(out.clone()));
            }
        }
        for param in &instr.params {
            match param {
                Param::Const(v) => {
                    if let Err(reason) = check_constant(v) {
                        push(path, ViolationKind::InvalidConstant(reason));
                    }
                }
                Param::Program(_) => nested.push(idx),
                Param::Expr(_) | Param::Aggs(_) => {}
            }
        }
        path.pop();
    }

    for idx in nested {
        path.push(idx);
        for p in program.body[idx].nested_programs() {
            validate_into(p, path, report);
        }
        path.pop();
    }
}

/// Re-derives the value's type and re-checks the kind invariants.
fn check_constant(v: &Value) -> Result<(), String> {
    v.type_of().map_err(|e| e.to_string())?;
    if let Some(c) = v.as_collection() {
        Value::collection_with_extents(
            c.kind(),
            c.elem_type().clone(),
            c.elements().to_vec(),
            c.extents().map(<[usize]>::to_vec),
        )
        .map_err(|e| e.to_string())?;
        for e in c.elements() {
            check_constant(e)?;
        }
    } else if let Some(t) = v.as_tuple() {
        for (_, e) in t.iter() {
            check_constant(e)?;
        }
    }
    Ok(())
}

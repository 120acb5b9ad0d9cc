//! Registers, instructions and programs.

use serde::{Deserialize, Serialize};

use super::types::{ItemType, Name};
use super::value::Value;
use crate::expr::{AggregateSpec, ScalarExpr};

pub type RegId = Name;

/// The flavor-less terminator of every program.
pub const RETURN: &str = "Return";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Register {
    pub id: RegId,
    #[serde(rename = "type")]
    pub ty: ItemType,
}

impl Register {
    pub fn new(id: &str, ty: ItemType) -> Self {
        Self { id: id.into(), ty }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Const(Value),
    Program(Program),
    Expr(ScalarExpr),
    Aggs(Vec<AggregateSpec>),
}

impl Param {
    pub fn as_const(&self) -> Option<&Value> {
        match self {
            Param::Const(v) => Some(v),
            _ => None,
        }
    }
    pub fn as_program(&self) -> Option<&Program> {
        match self {
            Param::Program(p) => Some(p),
            _ => None,
        }
    }
    pub fn as_expr(&self) -> Option<&ScalarExpr> {
        match self {
            Param::Expr(e) => Some(e),
            _ => None,
        }
    }
    pub fn as_aggs(&self) -> Option<&[AggregateSpec]> {
        match self {
            Param::Aggs(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    #[serde(rename = "op")]
    pub opcode: Name,
    pub flavor: Name,
    pub params: Vec<Param>,
    #[serde(rename = "in")]
    pub inputs: Vec<RegId>,
    #[serde(rename = "out")]
    pub outputs: Vec<RegId>,
}

impl Instruction {
    pub fn new(flavor: &str, opcode: &str) -> Self {
        Self {
            opcode: opcode.into(),
            flavor: flavor.into(),
            params: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn ret<I: IntoIterator<Item = S>, S: AsRef<str>>(regs: I) -> Self {
        Self::new("", RETURN).inputs(regs)
    }

    pub fn param(mut self, p: Param) -> Self {
        self.params.push(p);
        self
    }

    pub fn inputs<I: IntoIterator<Item = S>, S: AsRef<str>>(mut self, regs: I) -> Self {
        self.inputs
            .extend(regs.into_iter().map(|r| RegId::from(r.as_ref())));
        self
    }

    pub fn outputs<I: IntoIterator<Item = S>, S: AsRef<str>>(mut self, regs: I) -> Self {
        self.outputs
            .extend(regs.into_iter().map(|r| RegId::from(r.as_ref())));
        self
    }

    pub fn is_return(&self) -> bool {
        &*self.opcode == RETURN
    }

    pub fn is(&self, flavor: &str, opcode: &str) -> bool {
        &*self.flavor == flavor && &*self.opcode == opcode
    }

    pub fn nested_programs(&self) -> impl Iterator<Item = &Program> {
        self.params.iter().filter_map(Param::as_program)
    }

    pub fn nested_programs_mut(&mut self) -> impl Iterator<Item = &mut Program> {
        self.params.iter_mut().filter_map(|p| match p {
            Param::Program(p) => Some(p),
            _ => None,
        })
    }
}

/// A linear SSA sequence of instructions over typed parameter registers,
/// terminated by exactly one `Return`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub params: Vec<Register>,
    pub body: Vec<Instruction>,
    /// Marks a tree-shaped region that executes as one fused pipeline.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pipeline: bool,
}

impl Program {
    pub fn new(params: Vec<Register>, body: Vec<Instruction>) -> Self {
        Self {
            params,
            body,
            pipeline: false,
        }
    }

    /// The returned register ids, if the program ends in a `Return`.
    pub fn results(&self) -> Option<&[RegId]> {
        self.body
            .last()
            .filter(|i| i.is_return())
            .map(|i| &i.inputs[..])
    }

    /// Number of uses of each register in the body (Return included).
    pub fn use_counts(&self) -> std::collections::HashMap<RegId, usize> {
        let mut counts = std::collections::HashMap::new();
        for instr in &self.body {
            for r in &instr.inputs {
                *counts.entry(r.clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    /// All register ids defined in this scope (params and outputs).
    pub fn defined_registers(&self) -> impl Iterator<Item = &RegId> {
        self.params
            .iter()
            .map(|r| &r.id)
            .chain(self.body.iter().flat_map(|i| i.outputs.iter()))
    }

    /// Whether any instruction, at any nesting depth, satisfies `pred`.
    pub fn any_instruction(&self, pred: &dyn Fn(&Instruction) -> bool) -> bool {
        self.body
            .iter()
            .any(|i| pred(i) || i.nested_programs().any(|p| p.any_instruction(pred)))
    }

    /// A register id not yet used in this scope, derived from `base`.
    pub fn fresh_register(&self, base: &str) -> RegId {
        let taken: std::collections::HashSet<&str> =
            self.defined_registers().map(|r| &**r).collect();
        if !taken.contains(base) {
            return base.into();
        }
        (1..)
            .map(|i| format!("{base}_{i}"))
            .find(|c| !taken.contains(c.as_str()))
            .expect("unbounded")
            .into()
    }
}

//! IR flavors: named sets of instruction signatures, a registry that lets
//! programs mix them, and the program typechecker.

pub mod control;
pub mod highlevel;
pub mod lowlevel;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::expr::ExprTypeError;
use crate::ir::{CollectionKind, Instruction, ItemType, Name, Param, Program, RegId, Value};

/// Context visible to typing rules.
pub struct TypingCtx<'a> {
    pub registry: &'a FlavorRegistry,
    /// Inside the nested program of a ConcurExecute.
    pub in_concurrent: bool,
}

pub type TypingRule = Arc<
    dyn Fn(&TypingCtx<'_>, &[Param], &[ItemType]) -> Result<Vec<ItemType>, TypeError> + Send + Sync,
>;

/// Execution semantics for opcodes defined outside the built-in flavors.
pub type ExecHook = Arc<dyn Fn(&[Param], &[Value]) -> Result<Vec<Value>, String> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Const,
    Program,
    Expr,
    Aggs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Fixed(usize),
    AtLeast(usize),
}

impl Arity {
    fn admits(self, n: usize) -> bool {
        match self {
            Arity::Fixed(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Fixed(k) => write!(f, "{k}"),
            Arity::AtLeast(k) => write!(f, "at least {k}"),
        }
    }
}

#[derive(Clone)]
pub struct InstructionSignature {
    pub opcode: Name,
    pub flavor: Name,
    pub params: Vec<ParamKind>,
    pub inputs: Arity,
    pub rule: TypingRule,
    pub exec: Option<ExecHook>,
}

impl fmt::Debug for InstructionSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InstructionSignature")
            .field("opcode", &self.opcode)
            .field("flavor", &self.flavor)
            .field("params", &self.params)
            .field("inputs", &self.inputs)
            .finish_non_exhaustive()
    }
}

impl InstructionSignature {
    pub fn new<F>(
        flavor: &str,
        opcode: &str,
        params: Vec<ParamKind>,
        inputs: Arity,
        rule: F,
    ) -> Self
    where
        F: Fn(&TypingCtx<'_>, &[Param], &[ItemType]) -> Result<Vec<ItemType>, TypeError>
            + Send
            + Sync
            + 'static,
    {
        Self {
            opcode: opcode.into(),
            flavor: flavor.into(),
            params,
            inputs,
            rule: Arc::new(rule),
            exec: None,
        }
    }

    pub fn with_exec<F>(mut self, exec: F) -> Self
    where
        F: Fn(&[Param], &[Value]) -> Result<Vec<Value>, String> + Send + Sync + 'static,
    {
        self.exec = Some(Arc::new(exec));
        self
    }

    fn check_shape(&self, instr: &Instruction) -> Result<(), TypeError> {
        let kinds: Vec<ParamKind> = instr
            .params
            .iter()
            .map(|p| match p {
                Param::Const(_) => ParamKind::Const,
                Param::Program(_) => ParamKind::Program,
                Param::Expr(_) => ParamKind::Expr,
                Param::Aggs(_) => ParamKind::Aggs,
            })
            .collect();
        if kinds != self.params {
            return Err(TypeError::ParamMismatch(format!(
                "{} expects parameters {:?}, found {:?}",
                self.opcode, self.params, kinds
            )));
        }
        if !self.inputs.admits(instr.inputs.len()) {
            return Err(TypeError::Arity {
                opcode: self.opcode.clone(),
                expected: self.inputs.to_string(),
                found: instr.inputs.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Flavor {
    pub name: Name,
    signatures: BTreeMap<Name, InstructionSignature>,
}

impl Flavor {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            signatures: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, sig: InstructionSignature) -> Result<(), RegistryError> {
        if self.signatures.contains_key(&sig.opcode) {
            return Err(RegistryError::DuplicateOpcode {
                flavor: self.name.clone(),
                opcode: sig.opcode.clone(),
            });
        }
        self.signatures.insert(sig.opcode.clone(), sig);
        Ok(())
    }

    pub fn with(mut self, sig: InstructionSignature) -> Result<Self, RegistryError> {
        self.add(sig)?;
        Ok(self)
    }

    pub fn signature(&self, opcode: &str) -> Option<&InstructionSignature> {
        self.signatures.get(opcode)
    }

    pub fn signatures(&self) -> impl Iterator<Item = &InstructionSignature> {
        self.signatures.values()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("flavor `{0}` is already registered")]
    DuplicateFlavor(Name),
    #[error("opcode `{opcode}` defined twice in flavor `{flavor}`")]
    DuplicateOpcode { flavor: Name, opcode: Name },
    #[error("no opcode `{opcode}` in flavor `{flavor}`")]
    NotFound { flavor: Name, opcode: Name },
}

#[derive(Clone, Debug, Default)]
pub struct FlavorRegistry {
    flavors: BTreeMap<Name, Flavor>,
}

impl FlavorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the high-level, control and low-level flavors.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        r.register(highlevel::flavor()).expect("builtin");
        r.register(control::flavor()).expect("builtin");
        r.register(lowlevel::flavor()).expect("builtin");
        r
    }

    pub fn register(&mut self, flavor: Flavor) -> Result<(), RegistryError> {
        if self.flavors.contains_key(&flavor.name) {
            return Err(RegistryError::DuplicateFlavor(flavor.name.clone()));
        }
        self.flavors.insert(flavor.name.clone(), flavor);
        Ok(())
    }

    pub fn with_flavor(mut self, flavor: Flavor) -> Result<Self, RegistryError> {
        self.register(flavor)?;
        Ok(self)
    }

    pub fn lookup(
        &self,
        flavor: &str,
        opcode: &str,
    ) -> Result<&InstructionSignature, RegistryError> {
        self.flavors
            .get(flavor)
            .and_then(|f| f.signature(opcode))
            .ok_or_else(|| RegistryError::NotFound {
                flavor: flavor.into(),
                opcode: opcode.into(),
            })
    }

    pub fn flavors(&self) -> impl Iterator<Item = &Flavor> {
        self.flavors.values()
    }

    /// Output types of one instruction given its input types.
    pub fn infer(
        &self,
        instr: &Instruction,
        inputs: &[ItemType],
        in_concurrent: bool,
    ) -> Result<Vec<ItemType>, TypeError> {
        let sig =
            self.lookup(&instr.flavor, &instr.opcode)
                .map_err(|_| TypeError::UnknownOpcode {
                    flavor: instr.flavor.clone(),
                    opcode: instr.opcode.clone(),
                })?;
        sig.check_shape(instr)?;
        let ctx = TypingCtx {
            registry: self,
            in_concurrent,
        };
        let outs = (sig.rule)(&ctx, &instr.params, inputs)?;
        if outs.len() != instr.outputs.len() {
            return Err(TypeError::OutputCount {
                opcode: instr.opcode.clone(),
                expected: outs.len(),
                found: instr.outputs.len(),
            });
        }
        Ok(outs)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TypeError {
    #[error("unknown opcode `{flavor}.{opcode}`")]
    UnknownOpcode { flavor: Name, opcode: Name },
    #[error("{opcode} takes {expected} input(s), found {found}")]
    Arity {
        opcode: Name,
        expected: String,
        found: usize,
    },
    #[error("{opcode} produces {expected} output(s), program assigns {found}")]
    OutputCount {
        opcode: Name,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    ParamMismatch(String),
    #[error("expected {expected}, found {found}")]
    Expected { expected: String, found: ItemType },
    #[error("unknown field `{0}`")]
    UnknownField(Name),
    #[error(transparent)]
    Expr(#[from] ExprTypeError),
    #[error("nested program contract violated: {0}")]
    Contract(String),
    #[error("{0} is only available inside ConcurExecute")]
    OutsideConcurrentContext(Name),
    #[error("ConcurExecute may not be nested inside ConcurExecute")]
    NestedConcurExecute,
    #[error("register `{0}` is not defined")]
    UndefinedRegister(RegId),
    #[error("program is not well-formed: {0}")]
    Invalid(String),
    #[error("instruction #{index} ({opcode}): {source}")]
    At {
        index: usize,
        opcode: Name,
        #[source]
        source: Box<TypeError>,
    },
}

impl TypeError {
    /// The innermost error, without location wrappers.
    pub fn root(&self) -> &TypeError {
        match self {
            TypeError::At { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn expected(what: impl Into<String>, found: &ItemType) -> TypeError {
    TypeError::Expected {
        expected: what.into(),
        found: found.clone(),
    }
}

/// `Coll<I>` -> `(kind, I)`.
pub(crate) fn collection_of(
    ty: &ItemType,
) -> Result<(CollectionKind, &ItemType), TypeError> {
    ty.as_collection()
        .ok_or_else(|| expected("a collection", ty))
}

/// Types of every register in one program scope.
pub type TypeEnv = HashMap<RegId, ItemType>;

/// Typechecks a program in its own scope; returns the register types and
/// the types of the returned registers.
pub fn typecheck_scope(
    registry: &FlavorRegistry,
    program: &Program,
    in_concurrent: bool,
) -> Result<(TypeEnv, Vec<ItemType>), TypeError> {
    let mut env: TypeEnv = HashMap::new();
    for reg in &program.params {
        env.insert(reg.id.clone(), reg.ty.clone());
    }
    for (index, instr) in program.body.iter().enumerate() {
        let inputs = instr
            .inputs
            .iter()
            .map(|r| {
                env.get(r)
                    .cloned()
                    .ok_or_else(|| TypeError::UndefinedRegister(r.clone()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| at(index, instr, e))?;
        if instr.is_return() {
            return Ok((env, inputs));
        }
        let outs = registry
            .infer(instr, &inputs, in_concurrent)
            .map_err(|e| at(index, instr, e))?;
        for (reg, ty) in instr.outputs.iter().zip(outs) {
            env.insert(reg.clone(), ty);
        }
    }
    Err(TypeError::Invalid("missing Return".into()))
}

fn at(index: usize, instr: &Instruction, e: TypeError) -> TypeError {
    TypeError::At {
        index,
        opcode: instr.opcode.clone(),
        source: Box::new(e),
    }
}

/// Typechecks a whole program and returns the type of every register in its
/// top-level scope.
pub fn typecheck_program(
    registry: &FlavorRegistry,
    program: &Program,
) -> Result<TypeEnv, TypeError> {
    let report = crate::ir::validate(program);
    if !report.is_valid() {
        return Err(TypeError::Invalid(report.to_string()));
    }
    Ok(typecheck_scope(registry, program, false)?.0)
}

/// Result types of `program` called with arguments of `args` types; the
/// declared parameter types must match exactly.
pub fn check_nested(
    ctx: &TypingCtx<'_>,
    program: &Program,
    args: &[ItemType],
    in_concurrent: bool,
) -> Result<Vec<ItemType>, TypeError> {
    if program.params.len() != args.len() {
        return Err(TypeError::Contract(format!(
            "nested program takes {} parameter(s), given {}",
            program.params.len(),
            args.len()
        )));
    }
    for (reg, arg) in program.params.iter().zip(args) {
        if &reg.ty != arg {
            return Err(TypeError::Contract(format!(
                "parameter `{}` declared {} but receives {}",
                reg.id, reg.ty, arg
            )));
        }
    }
    Ok(typecheck_scope(ctx.registry, program, in_concurrent || ctx.in_concurrent)?.1)
}

/// Constant positive/non-negative integer parameter.
pub(crate) fn int_param(params: &[Param], idx: usize, min: i64) -> Result<i64, TypeError> {
    match params.get(idx).and_then(Param::as_const) {
        Some(Value::Int64(n)) if *n >= min => Ok(*n),
        other => Err(TypeError::ParamMismatch(format!(
            "expected an Int64 constant >= {min}, found {other:?}"
        ))),
    }
}

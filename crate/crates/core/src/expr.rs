//! Scalar expressions used as instruction parameters (predicates, computed
//! fields, map functions) and aggregate specifications.
//!
//! An expression closes over exactly one input item. It is typechecked
//! against that item's type and then bound to field positions for
//! evaluation, so the per-row path never looks names up.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ir::{AtomDomain, Field, ItemType, Name, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
    #[serde(rename = "%")]
    Rem,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoolOp {
    And,
    Or,
    Not,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedExpr {
    pub name: Name,
    pub expr: ScalarExpr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarExpr {
    Const {
        value: Value,
    },
    Field {
        name: Name,
    },
    /// The whole input item.
    Input,
    Tuple {
        fields: Vec<NamedExpr>,
    },
    Arith {
        op: ArithOp,
        lhs: Box<ScalarExpr>,
        rhs: Box<ScalarExpr>,
    },
    Cmp {
        op: CmpOp,
        lhs: Box<ScalarExpr>,
        rhs: Box<ScalarExpr>,
    },
    Bool {
        op: BoolOp,
        args: Vec<ScalarExpr>,
    },
    If {
        cond: Box<ScalarExpr>,
        then: Box<ScalarExpr>,
        #[serde(rename = "else")]
        otherwise: Box<ScalarExpr>,
    },
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ExprTypeError {
    #[error("unknown field `{0}`")]
    UnknownField(Name),
    #[error("operand type mismatch: {0}")]
    OperandTypeMismatch(String),
    #[error("field access on non-tuple type {0}")]
    NonTupleFieldAccess(ItemType),
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    ArithmeticOverflow,
    #[error("runtime type error: {0}")]
    RuntimeType(String),
}

// Constructors, so programs read close to how they are written down.
impl ScalarExpr {
    pub fn lit(value: Value) -> Self {
        ScalarExpr::Const { value }
    }
    pub fn field(name: &str) -> Self {
        ScalarExpr::Field { name: name.into() }
    }
    pub fn input() -> Self {
        ScalarExpr::Input
    }
    pub fn tuple<I, S>(fields: I) -> Self
    where
        I: IntoIterator<Item = (S, ScalarExpr)>,
        S: AsRef<str>,
    {
        ScalarExpr::Tuple {
            fields: fields
                .into_iter()
                .map(|(n, e)| NamedExpr {
                    name: n.as_ref().into(),
                    expr: e,
                })
                .collect(),
        }
    }
    pub fn arith(op: ArithOp, lhs: ScalarExpr, rhs: ScalarExpr) -> Self {
        ScalarExpr::Arith {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }
    pub fn cmp(op: CmpOp, lhs: ScalarExpr, rhs: ScalarExpr) -> Self {
        ScalarExpr::Cmp {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }
    pub fn and(args: Vec<ScalarExpr>) -> Self {
        ScalarExpr::Bool {
            op: BoolOp::And,
            args,
        }
    }
    pub fn or(args: Vec<ScalarExpr>) -> Self {
        ScalarExpr::Bool {
            op: BoolOp::Or,
            args,
        }
    }
    pub fn not(arg: ScalarExpr) -> Self {
        ScalarExpr::Bool {
            op: BoolOp::Not,
            args: vec![arg],
        }
    }
    pub fn if_then_else(cond: ScalarExpr, then: ScalarExpr, otherwise: ScalarExpr) -> Self {
        ScalarExpr::If {
            cond: Box::new(cond),
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        }
    }
}

fn mismatch(msg: impl Into<String>) -> ExprTypeError {
    ExprTypeError::OperandTypeMismatch(msg.into())
}

pub fn typecheck_expr(expr: &ScalarExpr, input: &ItemType) -> Result<ItemType, ExprTypeError> {
    Ok(bind(expr, input)?.1)
}

/// Evaluates `expr` on `input`, binding against the input's own type.
pub fn eval_expr(expr: &ScalarExpr, input: &Value) -> Result<Value, EvalError> {
    let bound = BoundExpr::bind(expr, &input.shallow_type())
        .map_err(|e| EvalError::RuntimeType(e.to_string()))?;
    bound.eval(input)
}

/// Names of all fields the expression reads.
pub fn fields_referenced(expr: &ScalarExpr) -> BTreeSet<Name> {
    fn walk(e: &ScalarExpr, out: &mut BTreeSet<Name>) {
        match e {
            ScalarExpr::Field { name } => {
                out.insert(name.clone());
            }
            ScalarExpr::Const { .. } | ScalarExpr::Input => {}
            ScalarExpr::Tuple { fields } => fields.iter().for_each(|f| walk(&f.expr, out)),
            ScalarExpr::Arith { lhs, rhs, .. } | ScalarExpr::Cmp { lhs, rhs, .. } => {
                walk(lhs, out);
                walk(rhs, out);
            }
            ScalarExpr::Bool { args, .. } => args.iter().for_each(|a| walk(a, out)),
            ScalarExpr::If {
                cond,
                then,
                otherwise,
            } => {
                walk(cond, out);
                walk(then, out);
                walk(otherwise, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(expr, &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum NumMode {
    Int,
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CmpMode {
    Numeric,
    Canonical,
}

#[derive(Clone, Debug)]
enum Node {
    Const(Value),
    Field(usize),
    Input,
    Tuple(Arc<[Name]>, Vec<Node>),
    Arith(ArithOp, NumMode, Box<Node>, Box<Node>),
    Cmp(CmpOp, CmpMode, Box<Node>, Box<Node>),
    And(Vec<Node>),
    Or(Vec<Node>),
    Not(Box<Node>),
    If(Box<Node>, Box<Node>, Box<Node>),
}

/// An expression resolved against a fixed input type.
#[derive(Clone, Debug)]
pub struct BoundExpr {
    node: Node,
    ty: ItemType,
}

impl BoundExpr {
    pub fn bind(expr: &ScalarExpr, input: &ItemType) -> Result<Self, ExprTypeError> {
        let (node, ty) = bind(expr, input)?;
        Ok(Self { node, ty })
    }

    pub fn result_type(&self) -> &ItemType {
        &self.ty
    }

    pub fn eval(&self, input: &Value) -> Result<Value, EvalError> {
        eval(&self.node, input)
    }

    /// Evaluates a predicate.
    pub fn test(&self, input: &Value) -> Result<bool, EvalError> {
        match self.eval(input)? {
            Value::Bool(b) => Ok(b),
            other => Err(EvalError::RuntimeType(format!(
                "predicate produced {other}"
            ))),
        }
    }
}

fn bind(expr: &ScalarExpr, input: &ItemType) -> Result<(Node, ItemType), ExprTypeError> {
    Ok(match expr {
        ScalarExpr::Const { value } => (Node::Const(value.clone()), value.shallow_type()),
        ScalarExpr::Input => (Node::Input, input.clone()),
        ScalarExpr::Field { name } => {
            let fields = input
                .as_tuple()
                .ok_or_else(|| ExprTypeError::NonTupleFieldAccess(input.clone()))?;
            let idx = fields
                .iter()
                .position(|f| f.name == *name)
                .ok_or_else(|| ExprTypeError::UnknownField(name.clone()))?;
            (Node::Field(idx), fields[idx].ty.clone())
        }
        ScalarExpr::Tuple { fields } => {
            let mut names: Vec<Name> = Vec::with_capacity(fields.len());
            let mut nodes = Vec::with_capacity(fields.len());
            let mut types = Vec::with_capacity(fields.len());
            for f in fields {
                if names.contains(&f.name) {
                    return Err(mismatch(format!("duplicate tuple field `{}`", f.name)));
                }
                let (n, t) = bind(&f.expr, input)?;
                names.push(f.name.clone());
                nodes.push(n);
                types.push(Field {
                    name: f.name.clone(),
                    ty: t,
                });
            }
            (
                Node::Tuple(names.into(), nodes),
                ItemType::Tuple(types.into()),
            )
        }
        ScalarExpr::Arith { op, lhs, rhs } => {
            let (l, lt) = bind(lhs, input)?;
            let (r, rt) = bind(rhs, input)?;
            let (mode, ty) = match (lt.as_atom(), rt.as_atom()) {
                (Some(AtomDomain::Int64), Some(AtomDomain::Int64)) => {
                    (NumMode::Int, ItemType::int64())
                }
                (Some(a), Some(b)) if a.is_numeric() && b.is_numeric() => {
                    (NumMode::Float, ItemType::float64())
                }
                _ => return Err(mismatch(format!("arithmetic on {lt} and {rt}"))),
            };
            (Node::Arith(*op, mode, Box::new(l), Box::new(r)), ty)
        }
        ScalarExpr::Cmp { op, lhs, rhs } => {
            let (l, lt) = bind(lhs, input)?;
            let (r, rt) = bind(rhs, input)?;
            let mode = if lt.is_numeric() && rt.is_numeric() {
                CmpMode::Numeric
            } else if lt == rt {
                CmpMode::Canonical
            } else {
                return Err(mismatch(format!("comparison of {lt} and {rt}")));
            };
            (
                Node::Cmp(*op, mode, Box::new(l), Box::new(r)),
                ItemType::bool(),
            )
        }
        ScalarExpr::Bool { op, args } => {
            let mut nodes = Vec::with_capacity(args.len());
            for a in args {
                let (n, t) = bind(a, input)?;
                if t != ItemType::bool() {
                    return Err(mismatch(format!("boolean operator on {t}")));
                }
                nodes.push(n);
            }
            let node = match op {
                BoolOp::And if !nodes.is_empty() => Node::And(nodes),
                BoolOp::Or if !nodes.is_empty() => Node::Or(nodes),
                BoolOp::Not if nodes.len() == 1 => Node::Not(Box::new(nodes.pop().unwrap())),
                _ => return Err(mismatch(format!("{op:?} with {} operand(s)", args.len()))),
            };
            (node, ItemType::bool())
        }
        ScalarExpr::If {
            cond,
            then,
            otherwise,
        } => {
            let (c, ct) = bind(cond, input)?;
            if ct != ItemType::bool() {
                return Err(mismatch(format!("condition of type {ct}")));
            }
            let (t, tt) = bind(then, input)?;
            let (e, et) = bind(otherwise, input)?;
            if tt != et {
                return Err(mismatch(format!("branches of type {tt} and {et}")));
            }
            (Node::If(Box::new(c), Box::new(t), Box::new(e)), tt)
        }
    })
}

fn rt_err(msg: impl Into<String>) -> EvalError {
    EvalError::RuntimeType(msg.into())
}

fn eval(node: &Node, input: &Value) -> Result<Value, EvalError> {
    match node {
        Node::Const(v) => Ok(v.clone()),
        Node::Input => Ok(input.clone()),
        Node::Field(i) => input
            .as_tuple()
            .and_then(|t| t.values().get(*i))
            .cloned()
            .ok_or_else(|| rt_err(format!("field #{i} missing in {input}"))),
        Node::Tuple(names, nodes) => {
            let values = nodes
                .iter()
                .map(|n| eval(n, input))
                .collect::<Result<Box<[_]>, _>>()?;
            Ok(Value::tuple_from_parts(names.clone(), values))
        }
        Node::Arith(op, mode, l, r) => {
            let a = eval(l, input)?;
            let b = eval(r, input)?;
            match mode {
                NumMode::Int => {
                    let (Value::Int64(x), Value::Int64(y)) = (&a, &b) else {
                        return Err(rt_err(format!("integer arithmetic on {a} and {b}")));
                    };
                    int_arith(*op, *x, *y).map(Value::Int64)
                }
                NumMode::Float => {
                    let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
                        return Err(rt_err(format!("float arithmetic on {a} and {b}")));
                    };
                    Ok(Value::Float64(float_arith(*op, x, y)))
                }
            }
        }
        Node::Cmp(op, mode, l, r) => {
            let a = eval(l, input)?;
            let b = eval(r, input)?;
            let ord = match mode {
                CmpMode::Numeric => match (&a, &b) {
                    (Value::Int64(x), Value::Int64(y)) => Some(x.cmp(y)),
                    _ => {
                        let (Some(x), Some(y)) = (a.as_f64(), b.as_f64()) else {
                            return Err(rt_err(format!("numeric comparison of {a} and {b}")));
                        };
                        x.partial_cmp(&y)
                    }
                },
                CmpMode::Canonical => Some(a.cmp(&b)),
            };
            Ok(Value::Bool(compare_holds(*op, ord)))
        }
        Node::And(args) => {
            for a in args {
                if !truthy(eval(a, input)?)? {
                    return Ok(Value::Bool(false));
                }
            }
            Ok(Value::Bool(true))
        }
        Node::Or(args) => {
            for a in args {
                if truthy(eval(a, input)?)? {
                    return Ok(Value::Bool(true));
                }
            }
            Ok(Value::Bool(false))
        }
        Node::Not(a) => Ok(Value::Bool(!truthy(eval(a, input)?)?)),
        Node::If(c, t, e) => {
            if truthy(eval(c, input)?)? {
                eval(t, input)
            } else {
                eval(e, input)
            }
        }
    }
}

fn truthy(v: Value) -> Result<bool, EvalError> {
    v.as_bool()
        .ok_or_else(|| rt_err(format!("expected Bool, found {v}")))
}

/// IEEE semantics: every ordered comparison involving NaN is false.
fn compare_holds(op: CmpOp, ord: Option<Ordering>) -> bool {
    match ord {
        None => op == CmpOp::Ne,
        Some(o) => match op {
            CmpOp::Lt => o == Ordering::Less,
            CmpOp::Le => o != Ordering::Greater,
            CmpOp::Eq => o == Ordering::Equal,
            CmpOp::Ne => o != Ordering::Equal,
            CmpOp::Ge => o != Ordering::Less,
            CmpOp::Gt => o == Ordering::Greater,
        },
    }
}

fn int_arith(op: ArithOp, x: i64, y: i64) -> Result<i64, EvalError> {
    let r = match op {
        ArithOp::Add => x.checked_add(y),
        ArithOp::Sub => x.checked_sub(y),
        ArithOp::Mul => x.checked_mul(y),
        ArithOp::Div | ArithOp::Rem if y == 0 => return Err(EvalError::DivisionByZero),
        ArithOp::Div => x.checked_div(y),
        ArithOp::Rem => x.checked_rem(y),
    };
    r.ok_or(EvalError::ArithmeticOverflow)
}

fn float_arith(op: ArithOp, x: f64, y: f64) -> f64 {
    match op {
        ArithOp::Add => x + y,
        ArithOp::Sub => x - y,
        ArithOp::Mul => x * y,
        ArithOp::Div => x / y,
        ArithOp::Rem => x % y,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggFunction {
    Sum,
    Count,
    Min,
    Max,
}

/// `(input_field, function) -> output_field`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AggregateSpec {
    pub input: Name,
    pub function: AggFunction,
    pub output: Name,
}

impl AggregateSpec {
    pub fn new(input: &str, function: AggFunction, output: &str) -> Self {
        Self {
            input: input.into(),
            function,
            output: output.into(),
        }
    }

    /// Output field type given the aggregated tuple's fields.
    pub fn output_type(&self, fields: &[Field]) -> Result<ItemType, ExprTypeError> {
        let input = fields
            .iter()
            .find(|f| f.name == self.input)
            .map(|f| &f.ty)
            .ok_or_else(|| ExprTypeError::UnknownField(self.input.clone()));
        match self.function {
            AggFunction::Count => Ok(ItemType::int64()),
            AggFunction::Sum | AggFunction::Min | AggFunction::Max => {
                let ty = input?;
                if ty.is_numeric() {
                    Ok(ty.clone())
                } else {
                    Err(mismatch(format!(
                        "{:?} over non-numeric field of type {ty}",
                        self.function
                    )))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("aggregate {0:?} has no partial/merge decomposition")]
pub struct NotDecomposable(pub AggFunction);

/// Splits an aggregate into a per-partition pre-aggregate and the merge
/// aggregate applied to the concatenated partials.
pub fn decompose_aggregate(
    spec: &AggregateSpec,
) -> Result<(AggregateSpec, AggregateSpec), NotDecomposable> {
    let merge_fn = match spec.function {
        AggFunction::Sum | AggFunction::Count => AggFunction::Sum,
        AggFunction::Min => AggFunction::Min,
        AggFunction::Max => AggFunction::Max,
    };
    let pre = spec.clone();
    let merge = AggregateSpec {
        input: spec.output.clone(),
        function: merge_fn,
        output: spec.output.clone(),
    };
    Ok((pre, merge))
}

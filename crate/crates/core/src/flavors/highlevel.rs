//! High-level relational, dataflow and linear-algebra instructions.

use crate::expr::{AggregateSpec, BoundExpr, ScalarExpr};
use crate::ir::{CollectionKind, Field, Instruction, ItemType, Name, Param, Value};

use super::{
    collection_of, expected, int_param, Arity, Flavor, InstructionSignature, ParamKind, TypeError,
};

pub const NAME: &str = "highlevel";

pub const PROJ: &str = "Proj";
pub const EXPROJ: &str = "ExProj";
pub const MAP: &str = "Map";
pub const SELECT: &str = "Select";
pub const AGGR: &str = "Aggr";
/// Aggr variant for partitions: an empty input yields no row.
pub const PRE_AGGR: &str = "PreAggr";
pub const SPLIT: &str = "Split";
pub const SCAN: &str = "Scan";
pub const MMMULT: &str = "MMMult";
pub const WRAP: &str = "Wrap";
pub const JOIN: &str = "Join";

/// Output kind for instructions that keep Set/Seq and default to Bag.
pub fn proj_kind(kind: CollectionKind) -> CollectionKind {
    match kind {
        CollectionKind::Set | CollectionKind::Seq => kind,
        _ => CollectionKind::Bag,
    }
}

/// Output kind of a filter: any kind whose invariants survive dropping
/// elements is kept, everything else becomes a Bag.
pub fn select_kind(kind: CollectionKind) -> CollectionKind {
    match kind {
        CollectionKind::Set | CollectionKind::Bag | CollectionKind::Seq | CollectionKind::Vec => {
            kind
        }
        _ => CollectionKind::Bag,
    }
}

/// Seq stays Seq, everything else becomes Bag.
pub fn seq_or_bag(kind: CollectionKind) -> CollectionKind {
    if kind == CollectionKind::Seq {
        CollectionKind::Seq
    } else {
        CollectionKind::Bag
    }
}

/// Output kind of Scan given the outer and inner kinds.
pub fn scan_kind(outer: CollectionKind, inner: CollectionKind) -> CollectionKind {
    if matches!(outer, CollectionKind::Seq | CollectionKind::Single) && inner == CollectionKind::Seq
    {
        CollectionKind::Seq
    } else {
        CollectionKind::Bag
    }
}

/// Field names of a Proj parameter (a collection of Text).
pub fn proj_fields(params: &[Param]) -> Result<Vec<Name>, TypeError> {
    let bad = || TypeError::ParamMismatch("Proj expects a collection of Text field names".into());
    let c = params
        .first()
        .and_then(Param::as_const)
        .and_then(Value::as_collection)
        .ok_or_else(bad)?;
    c.elements()
        .iter()
        .map(|v| match v {
            Value::Text(s) => Ok(Name::from(&**s)),
            _ => Err(bad()),
        })
        .collect()
}

fn expr_param(params: &[Param]) -> &ScalarExpr {
    params[0].as_expr().expect("shape checked")
}

fn tuple_elem(ty: &ItemType) -> Result<(CollectionKind, &[Field]), TypeError> {
    ty.as_tuple_collection()
        .ok_or_else(|| expected("a collection of tuples", ty))
}

pub fn aggregate_output(specs: &[AggregateSpec], fields: &[Field]) -> Result<ItemType, TypeError> {
    if specs.is_empty() {
        return Err(TypeError::ParamMismatch(
            "Aggr needs at least one aggregate".into(),
        ));
    }
    let mut out: Vec<Field> = Vec::with_capacity(specs.len());
    for s in specs {
        if out.iter().any(|f| f.name == s.output) {
            return Err(TypeError::ParamMismatch(format!(
                "duplicate aggregate output `{}`",
                s.output
            )));
        }
        let ty = s.output_type(fields).map_err(|e| match e {
            crate::expr::ExprTypeError::UnknownField(n) => TypeError::UnknownField(n),
            other => TypeError::Expr(other),
        })?;
        out.push(Field {
            name: s.output.clone(),
            ty,
        });
    }
    Ok(ItemType::Tuple(out.into()))
}

fn aggr_rule(params: &[Param], inputs: &[ItemType]) -> Result<Vec<ItemType>, TypeError> {
    let (_, fields) = tuple_elem(&inputs[0])?;
    let specs = params[0].as_aggs().expect("shape checked");
    Ok(vec![ItemType::bag(aggregate_output(specs, fields)?)])
}

/// Output row type of Join/ProbeHTable: `<key, lval, rval>`.
pub fn join_output(probe: &ItemType, build: &ItemType) -> Result<ItemType, TypeError> {
    let part = |t: &ItemType, f: &str| {
        t.field(f)
            .cloned()
            .ok_or_else(|| expected(format!("a tuple with a `{f}` field"), t))
    };
    let (pk, pv) = (part(probe, "key")?, part(probe, "val")?);
    let (bk, bv) = (part(build, "key")?, part(build, "val")?);
    if pk != bk {
        return Err(TypeError::Expected {
            expected: format!("join keys of type {bk}"),
            found: pk,
        });
    }
    Ok(ItemType::tuple([("key", pk), ("lval", pv), ("rval", bv)]))
}

pub fn flavor() -> Flavor {
    let sigs = vec![
        InstructionSignature::new(
            NAME,
            PROJ,
            vec![ParamKind::Const],
            Arity::Fixed(1),
            |_, params, inputs| {
                let names = proj_fields(params)?;
                let (kind, fields) = tuple_elem(&inputs[0])?;
                let mut out = Vec::with_capacity(names.len());
                for n in &names {
                    if out.iter().any(|f: &Field| &f.name == n) {
                        return Err(TypeError::ParamMismatch(format!(
                            "field `{n}` projected twice"
                        )));
                    }
                    let f = fields
                        .iter()
                        .find(|f| &f.name == n)
                        .ok_or_else(|| TypeError::UnknownField(n.clone()))?;
                    out.push(f.clone());
                }
                Ok(vec![ItemType::collection(
                    proj_kind(kind),
                    ItemType::Tuple(out.into()),
                )])
            },
        ),
        InstructionSignature::new(
            NAME,
            EXPROJ,
            vec![ParamKind::Expr],
            Arity::Fixed(1),
            |_, params, inputs| {
                let (_, elem) = collection_of(&inputs[0])?;
                if elem.as_tuple().is_none() {
                    return Err(expected("a collection of tuples", &inputs[0]));
                }
                let out = BoundExpr::bind(expr_param(params), elem)?
                    .result_type()
                    .clone();
                if out.as_tuple().is_none() {
                    return Err(expected("ExProj expression producing a tuple", &out));
                }
                Ok(vec![ItemType::bag(out)])
            },
        ),
        InstructionSignature::new(
            NAME,
            MAP,
            vec![ParamKind::Expr],
            Arity::Fixed(1),
            |_, params, inputs| {
                let (kind, elem) = collection_of(&inputs[0])?;
                let out = BoundExpr::bind(expr_param(params), elem)?
                    .result_type()
                    .clone();
                Ok(vec![ItemType::collection(seq_or_bag(kind), out)])
            },
        ),
        InstructionSignature::new(
            NAME,
            SELECT,
            vec![ParamKind::Expr],
            Arity::Fixed(1),
            |_, params, inputs| {
                let (kind, elem) = collection_of(&inputs[0])?;
                let t = BoundExpr::bind(expr_param(params), elem)?
                    .result_type()
                    .clone();
                if t != ItemType::bool() {
                    return Err(expected("a Bool predicate", &t));
                }
                Ok(vec![ItemType::collection(select_kind(kind), elem.clone())])
            },
        ),
        InstructionSignature::new(
            NAME,
            AGGR,
            vec![ParamKind::Aggs],
            Arity::Fixed(1),
            |_, params, inputs| aggr_rule(params, inputs),
        ),
        InstructionSignature::new(
            NAME,
            PRE_AGGR,
            vec![ParamKind::Aggs],
            Arity::Fixed(1),
            |_, params, inputs| aggr_rule(params, inputs),
        ),
        InstructionSignature::new(
            NAME,
            SPLIT,
            vec![ParamKind::Const],
            Arity::Fixed(1),
            |_, params, inputs| {
                int_param(params, 0, 1)?;
                let (kind, elem) = collection_of(&inputs[0])?;
                Ok(vec![ItemType::collection(
                    seq_or_bag(kind),
                    ItemType::seq(elem.clone()),
                )])
            },
        ),
        InstructionSignature::new(NAME, SCAN, vec![], Arity::Fixed(1), |_, _, inputs| {
            let (outer, inner) = collection_of(&inputs[0])?;
            let (inner_kind, elem) = collection_of(inner)
                .map_err(|_| expected("a collection of collections", &inputs[0]))?;
            Ok(vec![ItemType::collection(
                scan_kind(outer, inner_kind),
                elem.clone(),
            )])
        }),
        InstructionSignature::new(NAME, MMMULT, vec![], Arity::Fixed(2), |_, _, inputs| {
            let matrix = |t: &ItemType| match t.as_collection() {
                Some((CollectionKind::KDSeq(2), elem)) if elem.is_numeric() => Ok(elem.clone()),
                _ => Err(expected("2DSeq<Num>", t)),
            };
            let a = matrix(&inputs[0])?;
            let b = matrix(&inputs[1])?;
            if a != b {
                return Err(expected(format!("2DSeq<{a}>"), &inputs[1]));
            }
            Ok(vec![ItemType::collection(CollectionKind::KDSeq(2), a)])
        }),
        InstructionSignature::new(NAME, WRAP, vec![], Arity::Fixed(1), |_, _, inputs| {
            Ok(vec![ItemType::single(inputs[0].clone())])
        }),
        InstructionSignature::new(NAME, JOIN, vec![], Arity::Fixed(2), |_, _, inputs| {
            let (_, left) = collection_of(&inputs[0])?;
            let (_, right) = collection_of(&inputs[1])?;
            Ok(vec![ItemType::bag(join_output(left, right)?)])
        }),
    ];
    let mut f = Flavor::new(NAME);
    for s in sigs {
        f.add(s).expect("unique builtin opcodes");
    }
    f
}

fn unary(op: &str, param: Option<Param>, input: &str, out: &str) -> Instruction {
    let mut i = Instruction::new(NAME, op).inputs([input]).outputs([out]);
    if let Some(p) = param {
        i = i.param(p);
    }
    i
}

pub fn proj(fields: &[&str], input: &str, out: &str) -> Instruction {
    let names = Value::collection(
        CollectionKind::Seq,
        ItemType::text(),
        fields.iter().map(|f| Value::text(f)).collect(),
    )
    .expect("text list");
    unary(PROJ, Some(Param::Const(names)), input, out)
}

pub fn exproj(fields: Vec<(&str, ScalarExpr)>, input: &str, out: &str) -> Instruction {
    unary(
        EXPROJ,
        Some(Param::Expr(ScalarExpr::tuple(fields))),
        input,
        out,
    )
}

pub fn map(f: ScalarExpr, input: &str, out: &str) -> Instruction {
    unary(MAP, Some(Param::Expr(f)), input, out)
}

pub fn select(pred: ScalarExpr, input: &str, out: &str) -> Instruction {
    unary(SELECT, Some(Param::Expr(pred)), input, out)
}

pub fn aggr(specs: Vec<AggregateSpec>, input: &str, out: &str) -> Instruction {
    unary(AGGR, Some(Param::Aggs(specs)), input, out)
}

pub fn split(n: i64, input: &str, out: &str) -> Instruction {
    unary(SPLIT, Some(Param::Const(Value::Int64(n))), input, out)
}

pub fn scan(input: &str, out: &str) -> Instruction {
    unary(SCAN, None, input, out)
}

pub fn wrap(input: &str, out: &str) -> Instruction {
    unary(WRAP, None, input, out)
}

pub fn mmmult(a: &str, b: &str, out: &str) -> Instruction {
    Instruction::new(NAME, MMMULT).inputs([a, b]).outputs([out])
}

pub fn join(left: &str, right: &str, out: &str) -> Instruction {
    Instruction::new(NAME, JOIN)
        .inputs([left, right])
        .outputs([out])
}

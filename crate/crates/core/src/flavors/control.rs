//! Control-flow-like higher-order instructions, plus the two intrinsics
//! that expose the exchange context inside ConcurExecute.

use crate::expr::{BoundExpr, ScalarExpr};
use crate::ir::{Instruction, ItemType, Param, Program, Value};

use super::{
    check_nested, collection_of, expected, highlevel::seq_or_bag, int_param, Arity, Flavor,
    InstructionSignature, ParamKind, TypeError, TypingCtx,
};

pub const NAME: &str = "control";

pub const LOOP: &str = "Loop";
pub const WHILE: &str = "While";
pub const COND: &str = "Cond";
pub const CALL: &str = "Call";
pub const CONCUR_EXECUTE: &str = "ConcurExecute";
pub const WORKER_ID: &str = "WorkerId";
pub const EXCHANGE: &str = "Exchange";

fn nested(params: &[Param], idx: usize) -> &Program {
    params[idx].as_program().expect("shape checked")
}

/// A loop/branch flag: a Bool atom or a collection of Bool holding exactly
/// one element at runtime.
pub fn is_flag_type(ty: &ItemType) -> bool {
    match ty {
        ItemType::Atom(_) => *ty == ItemType::bool(),
        ItemType::Collection { elem, .. } => **elem == ItemType::bool(),
        ItemType::Tuple(_) => false,
    }
}

fn same_types(
    ctx_what: &str,
    expected_types: &[ItemType],
    found: &[ItemType],
) -> Result<(), TypeError> {
    if expected_types != found {
        return Err(TypeError::Contract(format!(
            "{ctx_what}: expected {}, found {}",
            list(expected_types),
            list(found)
        )));
    }
    Ok(())
}

fn list(types: &[ItemType]) -> String {
    let parts: Vec<String> = types.iter().map(ToString::to_string).collect();
    format!("({})", parts.join(", "))
}

fn contains_concur(p: &Program) -> bool {
    p.any_instruction(&|i| i.is(NAME, CONCUR_EXECUTE))
}

fn intrinsic_guard(ctx: &TypingCtx<'_>, op: &str) -> Result<(), TypeError> {
    if ctx.in_concurrent {
        Ok(())
    } else {
        Err(TypeError::OutsideConcurrentContext(op.into()))
    }
}

pub fn flavor() -> Flavor {
    let sigs = vec![
        InstructionSignature::new(
            NAME,
            LOOP,
            vec![ParamKind::Const, ParamKind::Program],
            Arity::AtLeast(1),
            |ctx, params, inputs| {
                int_param(params, 0, 0)?;
                let outs = check_nested(ctx, nested(params, 1), inputs, false)?;
                same_types("Loop body must return its inputs' types", inputs, &outs)?;
                Ok(inputs.to_vec())
            },
        ),
        InstructionSignature::new(
            NAME,
            WHILE,
            vec![ParamKind::Program],
            Arity::AtLeast(1),
            |ctx, params, inputs| {
                let outs = check_nested(ctx, nested(params, 0), inputs, false)?;
                match outs.split_first() {
                    Some((flag, rest)) if is_flag_type(flag) => {
                        same_types(
                            "While body must return a flag and its inputs' types",
                            inputs,
                            rest,
                        )?;
                        Ok(inputs.to_vec())
                    }
                    _ => Err(TypeError::Contract(
                        "While body must return a Bool flag first".into(),
                    )),
                }
            },
        ),
        InstructionSignature::new(
            NAME,
            COND,
            vec![ParamKind::Program],
            Arity::AtLeast(0),
            |ctx, params, inputs| {
                let outs = check_nested(ctx, nested(params, 0), inputs, false)?;
                match outs.split_first() {
                    Some((flag, rest)) if is_flag_type(flag) && rest.len() % 2 == 0 => {
                        let (then, otherwise) = rest.split_at(rest.len() / 2);
                        same_types("Cond branches must have identical types", then, otherwise)?;
                        Ok(then.to_vec())
                    }
                    _ => Err(TypeError::Contract(
                        "Cond body must return a Bool flag followed by two equally typed bundles"
                            .into(),
                    )),
                }
            },
        ),
        InstructionSignature::new(
            NAME,
            CALL,
            vec![ParamKind::Program],
            Arity::AtLeast(0),
            |ctx, params, inputs| check_nested(ctx, nested(params, 0), inputs, false),
        ),
        InstructionSignature::new(
            NAME,
            CONCUR_EXECUTE,
            vec![ParamKind::Program],
            Arity::Fixed(1),
            |ctx, params, inputs| {
                if ctx.in_concurrent {
                    return Err(TypeError::NestedConcurExecute);
                }
                let body = nested(params, 0);
                if contains_concur(body) {
                    return Err(TypeError::NestedConcurExecute);
                }
                let (kind, elem) = collection_of(&inputs[0])?;
                let outs = check_nested(ctx, body, &[ItemType::single(elem.clone())], true)?;
                match outs.as_slice() {
                    [ItemType::Collection {
                        kind: crate::ir::CollectionKind::Single,
                        elem: out,
                    }] => Ok(vec![ItemType::collection(
                        seq_or_bag(kind),
                        (**out).clone(),
                    )]),
                    _ => Err(TypeError::Contract(format!(
                        "ConcurExecute body must return one Single, returns {}",
                        list(&outs)
                    ))),
                }
            },
        ),
        InstructionSignature::new(NAME, WORKER_ID, vec![], Arity::Fixed(0), |ctx, _, _| {
            intrinsic_guard(ctx, WORKER_ID)?;
            Ok(vec![ItemType::single(ItemType::int64())])
        }),
        InstructionSignature::new(
            NAME,
            EXCHANGE,
            vec![ParamKind::Expr],
            Arity::Fixed(1),
            |ctx, params, inputs| {
                intrinsic_guard(ctx, EXCHANGE)?;
                let (kind, elem) = collection_of(&inputs[0])?;
                let dst = params[0].as_expr().expect("shape checked");
                let t = BoundExpr::bind(dst, elem)?.result_type().clone();
                if t != ItemType::int64() {
                    return Err(expected("an Int64 destination expression", &t));
                }
                Ok(vec![ItemType::collection(seq_or_bag(kind), elem.clone())])
            },
        ),
    ];
    let mut f = Flavor::new(NAME);
    for s in sigs {
        f.add(s).expect("unique builtin opcodes");
    }
    f
}

pub fn loop_n(n: i64, body: Program, inputs: &[&str], outputs: &[&str]) -> Instruction {
    Instruction::new(NAME, LOOP)
        .param(Param::Const(Value::Int64(n)))
        .param(Param::Program(body))
        .inputs(inputs.iter().copied())
        .outputs(outputs.iter().copied())
}

fn with_body(op: &str, body: Program, inputs: &[&str], outputs: &[&str]) -> Instruction {
    Instruction::new(NAME, op)
        .param(Param::Program(body))
        .inputs(inputs.iter().copied())
        .outputs(outputs.iter().copied())
}

pub fn while_loop(body: Program, inputs: &[&str], outputs: &[&str]) -> Instruction {
    with_body(WHILE, body, inputs, outputs)
}

pub fn cond(body: Program, inputs: &[&str], outputs: &[&str]) -> Instruction {
    with_body(COND, body, inputs, outputs)
}

pub fn call(body: Program, inputs: &[&str], outputs: &[&str]) -> Instruction {
    with_body(CALL, body, inputs, outputs)
}

pub fn concur_execute(body: Program, input: &str, out: &str) -> Instruction {
    with_body(CONCUR_EXECUTE, body, &[input], &[out])
}

pub fn worker_id(out: &str) -> Instruction {
    Instruction::new(NAME, WORKER_ID).outputs([out])
}

pub fn exchange(dst: ScalarExpr, input: &str, out: &str) -> Instruction {
    Instruction::new(NAME, EXCHANGE)
        .param(Param::Expr(dst))
        .inputs([input])
        .outputs([out])
}

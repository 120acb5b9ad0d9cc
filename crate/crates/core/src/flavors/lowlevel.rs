//! Physical operators over Vec and HTab.

use crate::ir::{CollectionKind, Instruction, ItemType, Param, Value};

use super::{
    collection_of, expected,
    highlevel::{join_output, scan_kind},
    int_param, Arity, Flavor, InstructionSignature, ParamKind, TypeError,
};

pub const NAME: &str = "lowlevel";

pub const SCAN_VEC: &str = "ScanVec";
pub const MAT_VEC: &str = "MatVec";
pub const SPLIT_VEC: &str = "SplitVec";
pub const BUILD_HTABLE: &str = "BuildHTable";
pub const PROBE_HTABLE: &str = "ProbeHTable";

/// `Coll<Vec<I>>` -> `(outer kind, I)`.
fn vec_collection(ty: &ItemType) -> Result<(CollectionKind, &ItemType), TypeError> {
    let (outer, inner) = collection_of(ty)?;
    match inner.as_collection() {
        Some((CollectionKind::Vec, elem)) => Ok((outer, elem)),
        _ => Err(expected("a collection of Vec", ty)),
    }
}

/// `Single<HTab<T>>` -> `T`.
fn htable(ty: &ItemType) -> Result<&ItemType, TypeError> {
    match ty.as_collection() {
        Some((CollectionKind::Single, inner)) => match inner.as_collection() {
            Some((CollectionKind::HTab, elem)) => Ok(elem),
            _ => Err(expected("Single<HTab<T>>", ty)),
        },
        _ => Err(expected("Single<HTab<T>>", ty)),
    }
}

pub fn flavor() -> Flavor {
    let sigs = vec![
        InstructionSignature::new(NAME, SCAN_VEC, vec![], Arity::Fixed(1), |_, _, inputs| {
            let (outer, elem) = vec_collection(&inputs[0])?;
            Ok(vec![ItemType::collection(
                scan_kind(outer, CollectionKind::Seq),
                elem.clone(),
            )])
        }),
        InstructionSignature::new(NAME, MAT_VEC, vec![], Arity::Fixed(1), |_, _, inputs| {
            let (_, elem) = collection_of(&inputs[0])?;
            Ok(vec![ItemType::single(ItemType::vec(elem.clone()))])
        }),
        InstructionSignature::new(
            NAME,
            SPLIT_VEC,
            vec![ParamKind::Const],
            Arity::Fixed(1),
            |_, params, inputs| {
                int_param(params, 0, 1)?;
                let (outer, elem) = vec_collection(&inputs[0])?;
                Ok(vec![ItemType::collection(
                    scan_kind(outer, CollectionKind::Seq),
                    ItemType::vec(elem.clone()),
                )])
            },
        ),
        InstructionSignature::new(
            NAME,
            BUILD_HTABLE,
            vec![],
            Arity::Fixed(1),
            |_, _, inputs| {
                let (_, elem) = collection_of(&inputs[0])?;
                let t = ItemType::collection(CollectionKind::HTab, elem.clone());
                t.check()
                    .map_err(|_| expected("a collection of <key, val> tuples", &inputs[0]))?;
                Ok(vec![ItemType::single(t)])
            },
        ),
        InstructionSignature::new(
            NAME,
            PROBE_HTABLE,
            vec![],
            Arity::Fixed(2),
            |_, _, inputs| {
                let (_, probe) = collection_of(&inputs[0])?;
                let build = htable(&inputs[1])?;
                Ok(vec![ItemType::bag(join_output(probe, build)?)])
            },
        ),
    ];
    let mut f = Flavor::new(NAME);
    for s in sigs {
        f.add(s).expect("unique builtin opcodes");
    }
    f
}

pub fn scan_vec(input: &str, out: &str) -> Instruction {
    Instruction::new(NAME, SCAN_VEC)
        .inputs([input])
        .outputs([out])
}

pub fn mat_vec(input: &str, out: &str) -> Instruction {
    Instruction::new(NAME, MAT_VEC)
        .inputs([input])
        .outputs([out])
}

pub fn split_vec(n: i64, input: &str, out: &str) -> Instruction {
    Instruction::new(NAME, SPLIT_VEC)
        .param(Param::Const(Value::Int64(n)))
        .inputs([input])
        .outputs([out])
}

pub fn build_htable(input: &str, out: &str) -> Instruction {
    Instruction::new(NAME, BUILD_HTABLE)
        .inputs([input])
        .outputs([out])
}

pub fn probe_htable(probe: &str, table: &str, out: &str) -> Instruction {
    Instruction::new(NAME, PROBE_HTABLE)
        .inputs([probe, table])
        .outputs([out])
}

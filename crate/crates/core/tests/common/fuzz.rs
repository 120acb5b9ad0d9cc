//! Random well-typed chains of Select/ExProj/Map/Proj/Aggr with inputs.

use cvm_core::expr::{AggFunction, AggregateSpec, ArithOp, CmpOp, ScalarExpr};
use cvm_core::flavors::highlevel;
use cvm_core::ir::{CollectionKind, Instruction, ItemType, Program, Register, Value};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dom {
    Int,
    Float,
}

impl Dom {
    fn ty(self) -> ItemType {
        match self {
            Dom::Int => ItemType::int64(),
            Dom::Float => ItemType::float64(),
        }
    }
}

#[derive(Clone, Debug)]
enum Elem {
    Atom(Dom),
    Tuple(Vec<(String, Dom)>),
}

impl Elem {
    fn ty(&self) -> ItemType {
        match self {
            Elem::Atom(d) => d.ty(),
            Elem::Tuple(fs) => ItemType::tuple(fs.iter().map(|(n, d)| (n.as_str(), d.ty()))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Case {
    pub program: Program,
    pub inputs: Vec<Value>,
    /// True if every numeric value is Int64, so results must match exactly.
    pub int_only: bool,
}

fn lit(d: Dom, rng: &mut ChaCha8Rng) -> ScalarExpr {
    match d {
        Dom::Int => ScalarExpr::lit(Value::Int64(rng.gen_range(-5..20))),
        Dom::Float => ScalarExpr::lit(Value::Float64(f64::from(rng.gen_range(-40..80)) / 4.0)),
    }
}

/// Numeric leaves available in the current element.
fn leaves(e: &Elem) -> Vec<(ScalarExpr, Dom)> {
    match e {
        Elem::Atom(d) => vec![(ScalarExpr::input(), *d)],
        Elem::Tuple(fs) => fs.iter().map(|(n, d)| (ScalarExpr::field(n), *d)).collect(),
    }
}

/// A small arithmetic expression of domain `want`. Values stay far from
/// the Int64 limits: inputs are below 1000 and chains are short.
fn arith(e: &Elem, want: Dom, rng: &mut ChaCha8Rng) -> ScalarExpr {
    let same: Vec<ScalarExpr> = leaves(e)
        .into_iter()
        .filter(|(_, d)| *d == want)
        .map(|(x, _)| x)
        .collect();
    let base = same.choose(rng).cloned().unwrap_or_else(|| lit(want, rng));
    match rng.gen_range(0..4) {
        0 => base,
        1 => ScalarExpr::arith(ArithOp::Add, base, lit(want, rng)),
        2 => ScalarExpr::arith(ArithOp::Sub, lit(want, rng), base),
        _ => {
            let k = match want {
                Dom::Int => ScalarExpr::lit(Value::Int64(rng.gen_range(-2..4))),
                Dom::Float => ScalarExpr::lit(Value::Float64(0.5)),
            };
            ScalarExpr::arith(ArithOp::Mul, base, k)
        }
    }
}

fn predicate(e: &Elem, rng: &mut ChaCha8Rng) -> ScalarExpr {
    let one = |rng: &mut ChaCha8Rng| {
        let (x, d) = leaves(e).choose(rng).cloned().expect("numeric leaf");
        let op = *[CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Ne]
            .choose(rng)
            .unwrap();
        let threshold = match d {
            Dom::Int => ScalarExpr::lit(Value::Int64(rng.gen_range(-50..900))),
            Dom::Float => ScalarExpr::lit(Value::Float64(f64::from(rng.gen_range(-50..900)))),
        };
        ScalarExpr::cmp(op, x, threshold)
    };
    match rng.gen_range(0..4) {
        0 => ScalarExpr::and(vec![one(rng), one(rng)]),
        1 => ScalarExpr::or(vec![one(rng), one(rng)]),
        2 => ScalarExpr::not(one(rng)),
        _ => one(rng),
    }
}

fn random_value(d: Dom, rng: &mut ChaCha8Rng) -> Value {
    match d {
        Dom::Int => Value::Int64(rng.gen_range(-50..1000)),
        Dom::Float => Value::Float64(f64::from(rng.gen_range(0..100_000)) / 100.0),
    }
}

fn random_row(e: &Elem, rng: &mut ChaCha8Rng) -> Value {
    match e {
        Elem::Atom(d) => random_value(*d, rng),
        Elem::Tuple(fs) => {
            Value::tuple(fs.iter().map(|(n, d)| (n.as_str(), random_value(*d, rng))))
        }
    }
}

fn fresh_fields(rng: &mut ChaCha8Rng, gen: &mut usize, count: usize) -> Vec<(String, Dom)> {
    (0..count)
        .map(|_| {
            *gen += 1;
            let d = if rng.gen_bool(0.5) {
                Dom::Int
            } else {
                Dom::Float
            };
            (format!("c{gen}"), d)
        })
        .collect()
}

/// One random case; `rows` bounds the input size.
pub fn case(rng: &mut ChaCha8Rng, max_rows: usize) -> Case {
    let mut gen = 0;
    let mut elem = if rng.gen_bool(0.15) {
        Elem::Atom(if rng.gen_bool(0.5) {
            Dom::Int
        } else {
            Dom::Float
        })
    } else {
        let n = rng.gen_range(1..=4);
        Elem::Tuple(fresh_fields(rng, &mut gen, n))
    };
    let kind = if rng.gen_bool(0.5) {
        CollectionKind::Bag
    } else {
        CollectionKind::Seq
    };
    let input_elem = elem.clone();
    let mut body = Vec::new();
    let mut cur = "input".to_string();
    let mut extra_result: Option<String> = None;
    let steps = rng.gen_range(1..=5);
    for step in 0..steps {
        let out = format!("r{step}");
        let last = step + 1 == steps;
        let is_tuple = matches!(elem, Elem::Tuple(_));
        let choice = if last && is_tuple && rng.gen_bool(0.5) {
            4
        } else {
            rng.gen_range(0..4)
        };
        let instr: Instruction = match (choice, &elem) {
            (0, _) => highlevel::select(predicate(&elem, rng), &cur, &out),
            (1, Elem::Tuple(_)) => {
                let count = rng.gen_range(1..=3);
                let fields = fresh_fields(rng, &mut gen, count);
                let exprs: Vec<(String, ScalarExpr)> = fields
                    .iter()
                    .map(|(n, d)| (n.clone(), arith(&elem, *d, rng)))
                    .collect();
                let i = highlevel::exproj(
                    exprs.iter().map(|(n, e)| (n.as_str(), e.clone())).collect(),
                    &cur,
                    &out,
                );
                elem = Elem::Tuple(fields);
                i
            }
            (2, Elem::Tuple(fs)) => {
                let mut keep: Vec<(String, Dom)> =
                    fs.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
                if keep.is_empty() {
                    keep.push(fs.choose(rng).unwrap().clone());
                }
                let names: Vec<&str> = keep.iter().map(|(n, _)| n.as_str()).collect();
                let i = highlevel::proj(&names, &cur, &out);
                elem = Elem::Tuple(keep);
                i
            }
            (4, Elem::Tuple(fs)) => {
                let mut specs = Vec::new();
                let mut out_fields = Vec::new();
                for (k, (n, d)) in fs.iter().enumerate().take(3) {
                    let f = *[
                        AggFunction::Sum,
                        AggFunction::Count,
                        AggFunction::Min,
                        AggFunction::Max,
                    ]
                    .choose(rng)
                    .unwrap();
                    let name = format!("a{k}");
                    let od = if f == AggFunction::Count {
                        Dom::Int
                    } else {
                        *d
                    };
                    specs.push(AggregateSpec::new(n, f, &name));
                    out_fields.push((name, od));
                }
                elem = Elem::Tuple(out_fields);
                highlevel::aggr(specs, &cur, &out)
            }
            _ => {
                // Map: to an atom or to a tuple
                if rng.gen_bool(0.5) {
                    let d = if rng.gen_bool(0.5) {
                        Dom::Int
                    } else {
                        Dom::Float
                    };
                    let i = highlevel::map(arith(&elem, d, rng), &cur, &out);
                    elem = Elem::Atom(d);
                    i
                } else {
                    let count = rng.gen_range(1..=2);
                    let fields = fresh_fields(rng, &mut gen, count);
                    let e = ScalarExpr::tuple(
                        fields
                            .iter()
                            .map(|(n, d)| (n.as_str(), arith(&elem, *d, rng))),
                    );
                    let i = highlevel::map(e, &cur, &out);
                    elem = Elem::Tuple(fields);
                    i
                }
            }
        };
        body.push(instr);
        if !last && extra_result.is_none() && rng.gen_bool(0.1) {
            extra_result = Some(out.clone());
        }
        cur = out;
        if choice == 4 {
            break;
        }
    }
    let mut results = vec![cur];
    results.extend(extra_result);
    body.push(Instruction::ret(results.iter().map(String::as_str)));

    let rows = rng.gen_range(0..=max_rows);
    let data: Vec<Value> = (0..rows).map(|_| random_row(&input_elem, rng)).collect();
    let ty = input_elem.ty();
    let int_only = !format!("{:?}", body).contains("Float") && !format!("{ty:?}").contains("Float");
    Case {
        program: Program::new(
            vec![Register::new(
                "input",
                ItemType::collection(kind, ty.clone()),
            )],
            body,
        ),
        inputs: vec![Value::collection(kind, ty, data).expect("generated rows conform")],
        int_only,
    }
}

pub fn corpus(seed: u64, count: usize, max_rows: usize) -> Vec<Case> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| case(&mut rng, max_rows)).collect()
}

/// The same rows as `Single<Vec<T>>`, the parameter type after lowering.
pub fn physical(v: &Value) -> Value {
    let c = v.as_collection().expect("collection input");
    let vec = Value::collection(
        CollectionKind::Vec,
        c.elem_type().clone(),
        c.elements().to_vec(),
    )
    .unwrap();
    Value::single(ItemType::vec(c.elem_type().clone()), vec)
}

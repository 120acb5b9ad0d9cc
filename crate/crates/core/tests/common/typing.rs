//! Typing rules of the built-in flavors as a table.

use cvm_core::expr::{AggFunction, AggregateSpec, ArithOp, CmpOp, ScalarExpr};
use cvm_core::flavors::{control, highlevel, lowlevel, FlavorRegistry, TypeError};
use cvm_core::ir::{CollectionKind as K, Instruction, ItemType, Param, Program, Register, Value};

pub enum Want {
    Types(Vec<ItemType>),
    Error(&'static str),
}

pub struct Row {
    pub label: String,
    pub instr: Instruction,
    pub inputs: Vec<ItemType>,
    pub in_concurrent: bool,
    pub want: Want,
}

pub fn error_tag(e: &TypeError) -> &'static str {
    match e.root() {
        TypeError::UnknownOpcode { .. } => "unknown_opcode",
        TypeError::Arity { .. } => "arity",
        TypeError::OutputCount { .. } => "output_count",
        TypeError::ParamMismatch(_) => "param",
        TypeError::Expected { .. } => "expected",
        TypeError::UnknownField(_) => "unknown_field",
        TypeError::Expr(_) => "expr",
        TypeError::Contract(_) => "contract",
        TypeError::OutsideConcurrentContext(_) => "outside",
        TypeError::NestedConcurExecute => "nested",
        TypeError::UndefinedRegister(_) => "undefined",
        TypeError::Invalid(_) => "invalid",
        TypeError::At { .. } => unreachable!("root strips locations"),
    }
}

fn c(kind: K, elem: ItemType) -> ItemType {
    ItemType::collection(kind, elem)
}

fn i64t() -> ItemType {
    ItemType::int64()
}

fn ab() -> ItemType {
    ItemType::tuple([("a", i64t()), ("b", ItemType::float64())])
}

fn a_only() -> ItemType {
    ItemType::tuple([("a", i64t())])
}

fn kv(val: ItemType) -> ItemType {
    ItemType::tuple([("key", i64t()), ("val", val)])
}

fn joined() -> ItemType {
    ItemType::tuple([
        ("key", i64t()),
        ("lval", i64t()),
        ("rval", ItemType::text()),
    ])
}

fn mat(elem: ItemType) -> ItemType {
    c(K::KDSeq(2), elem)
}

fn inc() -> ScalarExpr {
    ScalarExpr::arith(
        ArithOp::Add,
        ScalarExpr::input(),
        ScalarExpr::lit(Value::Int64(1)),
    )
}

fn positive() -> ScalarExpr {
    ScalarExpr::cmp(
        CmpOp::Gt,
        ScalarExpr::field("a"),
        ScalarExpr::lit(Value::Int64(0)),
    )
}

fn sum_a() -> Vec<AggregateSpec> {
    vec![AggregateSpec::new("a", AggFunction::Sum, "s")]
}

/// `params -> body` over registers `x0..`.
fn prog(params: &[ItemType], body: Vec<Instruction>) -> Program {
    let regs = params
        .iter()
        .enumerate()
        .map(|(i, t)| Register::new(&format!("x{i}"), t.clone()))
        .collect();
    Program::new(regs, body)
}

fn ok(label: &str, instr: Instruction, inputs: Vec<ItemType>, out: ItemType) -> Row {
    Row {
        label: label.to_string(),
        instr,
        inputs,
        in_concurrent: false,
        want: Want::Types(vec![out]),
    }
}

fn err(label: &str, instr: Instruction, inputs: Vec<ItemType>, tag: &'static str) -> Row {
    Row {
        label: label.to_string(),
        instr,
        inputs,
        in_concurrent: false,
        want: Want::Error(tag),
    }
}

fn concurrent(mut r: Row) -> Row {
    r.in_concurrent = true;
    r
}

fn unary(flavor: &str, op: &str, params: Vec<Param>) -> Instruction {
    let mut i = Instruction::new(flavor, op).inputs(["x"]).outputs(["o"]);
    for p in params {
        i = i.param(p);
    }
    i
}

fn text_list(names: &[&str]) -> Param {
    Param::Const(
        Value::collection(
            K::Seq,
            ItemType::text(),
            names.iter().map(|n| Value::text(n)).collect(),
        )
        .unwrap(),
    )
}

fn n(k: i64) -> Param {
    Param::Const(Value::Int64(k))
}

pub fn rows() -> Vec<Row> {
    let hl = highlevel::NAME;
    let ct = control::NAME;
    let mut rows = Vec::new();

    // Proj keeps Set and Seq, anything else becomes Bag
    let proj = || unary(hl, highlevel::PROJ, vec![text_list(&["a"])]);
    for (kin, kout) in [
        (K::Set, K::Set),
        (K::Seq, K::Seq),
        (K::Bag, K::Bag),
        (K::Vec, K::Bag),
        (K::Single, K::Bag),
    ] {
        rows.push(ok(
            &format!("Proj {kin:?}"),
            proj(),
            vec![c(kin, ab())],
            c(kout, a_only()),
        ));
    }
    rows.push(err(
        "Proj missing field",
        unary(hl, highlevel::PROJ, vec![text_list(&["z"])]),
        vec![c(K::Bag, ab())],
        "unknown_field",
    ));
    rows.push(err(
        "Proj field twice",
        unary(hl, highlevel::PROJ, vec![text_list(&["a", "a"])]),
        vec![c(K::Bag, ab())],
        "param",
    ));
    rows.push(err(
        "Proj over atoms",
        proj(),
        vec![c(K::Bag, i64t())],
        "expected",
    ));
    rows.push(err(
        "Proj two inputs",
        proj().inputs(["x", "y"]),
        vec![c(K::Bag, ab()), c(K::Bag, ab())],
        "arity",
    ));

    // ExProj always yields a Bag
    let exproj = || {
        highlevel::exproj(
            vec![(
                "d",
                ScalarExpr::arith(
                    ArithOp::Mul,
                    ScalarExpr::field("a"),
                    ScalarExpr::lit(Value::Int64(2)),
                ),
            )],
            "x",
            "o",
        )
    };
    for kin in [K::Set, K::Seq, K::Bag] {
        rows.push(ok(
            &format!("ExProj {kin:?}"),
            exproj(),
            vec![c(kin, ab())],
            c(K::Bag, ItemType::tuple([("d", i64t())])),
        ));
    }
    rows.push(err(
        "ExProj non-tuple result",
        unary(
            hl,
            highlevel::EXPROJ,
            vec![Param::Expr(ScalarExpr::field("a"))],
        ),
        vec![c(K::Bag, ab())],
        "expected",
    ));
    rows.push(err(
        "ExProj over atoms",
        exproj(),
        vec![c(K::Bag, i64t())],
        "expected",
    ));
    let mixed = highlevel::exproj(
        vec![(
            "d",
            ScalarExpr::arith(ArithOp::Add, ScalarExpr::field("a"), ScalarExpr::field("b")),
        )],
        "x",
        "o",
    );
    rows.push(ok(
        "ExProj Int64 plus Float64",
        mixed,
        vec![c(K::Bag, ab())],
        c(K::Bag, ItemType::tuple([("d", ItemType::float64())])),
    ));
    let texty = highlevel::exproj(
        vec![(
            "d",
            ScalarExpr::arith(ArithOp::Add, ScalarExpr::field("a"), ScalarExpr::field("t")),
        )],
        "x",
        "o",
    );
    rows.push(err(
        "ExProj text arithmetic",
        texty,
        vec![c(
            K::Bag,
            ItemType::tuple([("a", i64t()), ("t", ItemType::text())]),
        )],
        "expr",
    ));

    // Map keeps Seq, anything else becomes Bag
    let map = || highlevel::map(inc(), "x", "o");
    for (kin, kout) in [
        (K::Seq, K::Seq),
        (K::Bag, K::Bag),
        (K::Set, K::Bag),
        (K::Vec, K::Bag),
    ] {
        rows.push(ok(
            &format!("Map {kin:?}"),
            map(),
            vec![c(kin, i64t())],
            c(kout, i64t()),
        ));
    }
    rows.push(err(
        "Map unknown field",
        highlevel::map(ScalarExpr::field("z"), "x", "o"),
        vec![c(K::Bag, ab())],
        "expr",
    ));
    rows.push(err("Map over atom", map(), vec![i64t()], "expected"));

    // Select keeps the kind
    let select = || highlevel::select(positive(), "x", "o");
    for (kin, kout) in [
        (K::Set, K::Set),
        (K::Bag, K::Bag),
        (K::Seq, K::Seq),
        (K::Vec, K::Vec),
        (K::Single, K::Bag),
    ] {
        rows.push(ok(
            &format!("Select {kin:?}"),
            select(),
            vec![c(kin, ab())],
            c(kout, ab()),
        ));
    }
    rows.push(err(
        "Select non-Bool predicate",
        highlevel::select(ScalarExpr::field("a"), "x", "o"),
        vec![c(K::Bag, ab())],
        "expected",
    ));

    // Aggr and PreAggr: a one-row Bag
    for op in [highlevel::AGGR, highlevel::PRE_AGGR] {
        let aggr = |specs| unary(hl, op, vec![Param::Aggs(specs)]);
        for kin in [K::Bag, K::Seq, K::Set] {
            rows.push(ok(
                &format!("{op} {kin:?}"),
                aggr(sum_a()),
                vec![c(kin, ab())],
                c(K::Bag, ItemType::tuple([("s", i64t())])),
            ));
        }
        let all = vec![
            AggregateSpec::new("b", AggFunction::Sum, "s"),
            AggregateSpec::new("a", AggFunction::Count, "n"),
            AggregateSpec::new("b", AggFunction::Min, "lo"),
            AggregateSpec::new("a", AggFunction::Max, "hi"),
        ];
        let out = ItemType::tuple([
            ("s", ItemType::float64()),
            ("n", i64t()),
            ("lo", ItemType::float64()),
            ("hi", i64t()),
        ]);
        rows.push(ok(
            &format!("{op} all functions"),
            aggr(all),
            vec![c(K::Bag, ab())],
            c(K::Bag, out),
        ));
        let text = ItemType::tuple([("t", ItemType::text())]);
        rows.push(ok(
            &format!("{op} count over text"),
            aggr(vec![AggregateSpec::new("t", AggFunction::Count, "n")]),
            vec![c(K::Bag, text.clone())],
            c(K::Bag, ItemType::tuple([("n", i64t())])),
        ));
        rows.push(err(
            &format!("{op} sum over text"),
            aggr(vec![AggregateSpec::new("t", AggFunction::Sum, "s")]),
            vec![c(K::Bag, text)],
            "expr",
        ));
        rows.push(err(
            &format!("{op} unknown field"),
            aggr(vec![AggregateSpec::new("z", AggFunction::Sum, "s")]),
            vec![c(K::Bag, ab())],
            "unknown_field",
        ));
        rows.push(err(
            &format!("{op} over atoms"),
            aggr(sum_a()),
            vec![c(K::Bag, i64t())],
            "expected",
        ));
    }

    // Split and Scan
    let split = |k| unary(hl, highlevel::SPLIT, vec![n(k)]);
    rows.push(ok(
        "Split Seq",
        split(4),
        vec![c(K::Seq, i64t())],
        c(K::Seq, c(K::Seq, i64t())),
    ));
    rows.push(ok(
        "Split Bag",
        split(4),
        vec![c(K::Bag, i64t())],
        c(K::Bag, c(K::Seq, i64t())),
    ));
    rows.push(ok(
        "Split Set",
        split(2),
        vec![c(K::Set, i64t())],
        c(K::Bag, c(K::Seq, i64t())),
    ));
    rows.push(err(
        "Split zero",
        split(0),
        vec![c(K::Seq, i64t())],
        "param",
    ));
    rows.push(err("Split over atom", split(2), vec![i64t()], "expected"));
    let scan = || highlevel::scan("x", "o");
    for (outer, inner, kout) in [
        (K::Seq, K::Seq, K::Seq),
        (K::Single, K::Seq, K::Seq),
        (K::Bag, K::Seq, K::Bag),
        (K::Seq, K::Bag, K::Bag),
        (K::Bag, K::Bag, K::Bag),
        (K::Seq, K::Single, K::Bag),
    ] {
        rows.push(ok(
            &format!("Scan {outer:?}<{inner:?}>"),
            scan(),
            vec![c(outer, c(inner, i64t()))],
            c(kout, i64t()),
        ));
    }
    rows.push(err(
        "Scan flat collection",
        scan(),
        vec![c(K::Bag, i64t())],
        "expected",
    ));

    // MMMult
    let mm = || highlevel::mmmult("x", "y", "o");
    rows.push(ok(
        "MMMult Float64",
        mm(),
        vec![mat(ItemType::float64()), mat(ItemType::float64())],
        mat(ItemType::float64()),
    ));
    rows.push(ok(
        "MMMult Int64",
        mm(),
        vec![mat(i64t()), mat(i64t())],
        mat(i64t()),
    ));
    rows.push(err(
        "MMMult mixed domains",
        mm(),
        vec![mat(i64t()), mat(ItemType::float64())],
        "expected",
    ));
    rows.push(err(
        "MMMult over Seq",
        mm(),
        vec![c(K::Seq, i64t()), mat(i64t())],
        "expected",
    ));
    rows.push(err(
        "MMMult over 3DSeq",
        mm(),
        vec![c(K::KDSeq(3), i64t()), mat(i64t())],
        "expected",
    ));
    rows.push(err(
        "MMMult non-numeric",
        mm(),
        vec![mat(ItemType::text()), mat(ItemType::text())],
        "expected",
    ));

    // Wrap and Join
    rows.push(ok(
        "Wrap",
        highlevel::wrap("x", "o"),
        vec![c(K::Bag, i64t())],
        c(K::Single, c(K::Bag, i64t())),
    ));
    let join = || highlevel::join("x", "y", "o");
    rows.push(ok(
        "Join",
        join(),
        vec![c(K::Seq, kv(i64t())), c(K::Set, kv(ItemType::text()))],
        c(K::Bag, joined()),
    ));
    rows.push(err(
        "Join key mismatch",
        join(),
        vec![
            c(K::Bag, kv(i64t())),
            c(
                K::Bag,
                ItemType::tuple([("key", ItemType::text()), ("val", i64t())]),
            ),
        ],
        "expected",
    ));
    rows.push(err(
        "Join without val",
        join(),
        vec![c(K::Bag, a_only()), c(K::Bag, kv(i64t()))],
        "expected",
    ));

    // Loop
    let bag_i = c(K::Bag, i64t());
    let step = prog(
        std::slice::from_ref(&bag_i),
        vec![highlevel::map(inc(), "x0", "y"), Instruction::ret(["y"])],
    );
    let loop_ = |k, body: Program| {
        Instruction::new(ct, control::LOOP)
            .param(n(k))
            .param(Param::Program(body))
            .inputs(["x"])
            .outputs(["o"])
    };
    rows.push(ok(
        "Loop",
        loop_(3, step.clone()),
        vec![bag_i.clone()],
        bag_i.clone(),
    ));
    rows.push(ok(
        "Loop zero iterations",
        loop_(0, step.clone()),
        vec![bag_i.clone()],
        bag_i.clone(),
    ));
    rows.push(err(
        "Loop negative count",
        loop_(-1, step.clone()),
        vec![bag_i.clone()],
        "param",
    ));
    let changes_kind = prog(
        &[c(K::Seq, i64t())],
        vec![
            highlevel::select(ScalarExpr::lit(Value::Bool(true)), "x0", "y"),
            highlevel::exproj(vec![("a", ScalarExpr::input())], "y", "z"),
            Instruction::ret(["z"]),
        ],
    );
    rows.push(err(
        "Loop body changes type",
        loop_(1, changes_kind),
        vec![c(K::Seq, i64t())],
        "expected",
    ));
    let to_bag = prog(
        &[c(K::Seq, i64t())],
        vec![
            highlevel::wrap("x0", "y"),
            highlevel::scan("y", "z"),
            highlevel::map(inc(), "z", "w"),
            Instruction::ret(["w"]),
        ],
    );
    rows.push(ok(
        "Loop body keeps Seq",
        loop_(2, to_bag),
        vec![c(K::Seq, i64t())],
        c(K::Seq, i64t()),
    ));
    let seq_to_bag = prog(
        &[c(K::Seq, i64t())],
        vec![
            highlevel::split(2, "x0", "p"),
            highlevel::scan("p", "q"),
            highlevel::wrap("q", "y"),
            Instruction::ret(["q"]),
        ],
    );
    rows.push(ok(
        "Loop Seq split and scan",
        loop_(2, seq_to_bag),
        vec![c(K::Seq, i64t())],
        c(K::Seq, i64t()),
    ));
    let bagger = prog(
        &[c(K::Set, i64t())],
        vec![highlevel::map(inc(), "x0", "y"), Instruction::ret(["y"])],
    );
    rows.push(err(
        "Loop body Set to Bag",
        loop_(1, bagger),
        vec![c(K::Set, i64t())],
        "contract",
    ));
    rows.push(err(
        "Loop parameter mismatch",
        loop_(1, step.clone()),
        vec![c(K::Seq, i64t())],
        "contract",
    ));

    // While: flag first, then the carried state
    let while_ = |body: Program, outs: &[&str]| {
        Instruction::new(ct, control::WHILE)
            .param(Param::Program(body))
            .inputs(["x"])
            .outputs(outs.iter().copied())
    };
    let guard = prog(
        std::slice::from_ref(&bag_i),
        vec![
            highlevel::map(inc(), "x0", "y"),
            highlevel::map(
                ScalarExpr::cmp(
                    CmpOp::Lt,
                    ScalarExpr::input(),
                    ScalarExpr::lit(Value::Int64(5)),
                ),
                "y",
                "f",
            ),
            Instruction::ret(["f", "y"]),
        ],
    );
    rows.push(ok(
        "While Bool collection flag",
        while_(guard, &["o"]),
        vec![bag_i.clone()],
        bag_i.clone(),
    ));
    let no_flag = prog(
        std::slice::from_ref(&bag_i),
        vec![
            highlevel::map(inc(), "x0", "y"),
            Instruction::ret(["y", "y"]),
        ],
    );
    rows.push(err(
        "While without flag",
        while_(no_flag, &["o"]),
        vec![bag_i.clone()],
        "contract",
    ));
    let wrong_state = prog(
        std::slice::from_ref(&bag_i),
        vec![
            highlevel::map(
                ScalarExpr::cmp(
                    CmpOp::Lt,
                    ScalarExpr::input(),
                    ScalarExpr::lit(Value::Int64(5)),
                ),
                "x0",
                "f",
            ),
            Instruction::ret(["f", "f"]),
        ],
    );
    rows.push(err(
        "While state type changes",
        while_(wrong_state, &["o"]),
        vec![bag_i.clone()],
        "contract",
    ));

    // Cond: flag, then two bundles of identical types
    let cond_ = |body: Program| {
        Instruction::new(ct, control::COND)
            .param(Param::Program(body))
            .inputs(["x"])
            .outputs(["o"])
    };
    let branches = prog(
        std::slice::from_ref(&bag_i),
        vec![
            highlevel::map(
                ScalarExpr::cmp(
                    CmpOp::Gt,
                    ScalarExpr::input(),
                    ScalarExpr::lit(Value::Int64(0)),
                ),
                "x0",
                "f",
            ),
            highlevel::map(inc(), "x0", "y"),
            Instruction::ret(["f", "x0", "y"]),
        ],
    );
    rows.push(ok(
        "Cond",
        cond_(branches),
        vec![bag_i.clone()],
        bag_i.clone(),
    ));
    let unequal = prog(
        std::slice::from_ref(&bag_i),
        vec![
            highlevel::map(
                ScalarExpr::cmp(
                    CmpOp::Gt,
                    ScalarExpr::input(),
                    ScalarExpr::lit(Value::Int64(0)),
                ),
                "x0",
                "f",
            ),
            Instruction::ret(["f", "x0", "f"]),
        ],
    );
    rows.push(err(
        "Cond branches differ",
        cond_(unequal),
        vec![bag_i.clone()],
        "contract",
    ));

    // Call
    let call = |body: Program| {
        Instruction::new(ct, control::CALL)
            .param(Param::Program(body))
            .inputs(["x"])
            .outputs(["o"])
    };
    rows.push(ok(
        "Call",
        call(step.clone()),
        vec![bag_i.clone()],
        bag_i.clone(),
    ));
    rows.push(err(
        "Call parameter mismatch",
        call(step.clone()),
        vec![c(K::Set, i64t())],
        "contract",
    ));

    // ConcurExecute: Single<I1> -> Single<I2> per element, Seq stays Seq
    let single_i = c(K::Single, i64t());
    let body = prog(
        std::slice::from_ref(&single_i),
        vec![
            highlevel::map(
                ScalarExpr::cmp(
                    CmpOp::Gt,
                    ScalarExpr::input(),
                    ScalarExpr::lit(Value::Int64(0)),
                ),
                "x0",
                "b",
            ),
            highlevel::wrap("b", "w"),
            Instruction::ret(["w"]),
        ],
    );
    let ce = |body: Program| control::concur_execute(body, "x", "o");
    rows.push(ok(
        "ConcurExecute Seq",
        ce(body.clone()),
        vec![c(K::Seq, i64t())],
        c(K::Seq, c(K::Bag, ItemType::bool())),
    ));
    rows.push(ok(
        "ConcurExecute Bag",
        ce(body.clone()),
        vec![c(K::Bag, i64t())],
        c(K::Bag, c(K::Bag, ItemType::bool())),
    ));
    rows.push(ok(
        "ConcurExecute Set",
        ce(body.clone()),
        vec![c(K::Set, i64t())],
        c(K::Bag, c(K::Bag, ItemType::bool())),
    ));
    let identity = prog(std::slice::from_ref(&single_i), vec![Instruction::ret(["x0"])]);
    rows.push(ok(
        "ConcurExecute identity",
        ce(identity.clone()),
        vec![c(K::Seq, i64t())],
        c(K::Seq, i64t()),
    ));
    let not_single = prog(
        std::slice::from_ref(&single_i),
        vec![highlevel::map(inc(), "x0", "s"), Instruction::ret(["s"])],
    );
    rows.push(err(
        "ConcurExecute body not Single",
        ce(not_single),
        vec![c(K::Seq, i64t())],
        "contract",
    ));
    let nested = prog(
        std::slice::from_ref(&single_i),
        vec![
            control::concur_execute(identity.clone(), "x0", "y"),
            Instruction::ret(["x0"]),
        ],
    );
    rows.push(err(
        "ConcurExecute nested",
        ce(nested),
        vec![c(K::Seq, i64t())],
        "nested",
    ));
    rows.push(concurrent(err(
        "ConcurExecute inside a worker",
        ce(identity),
        vec![c(K::Seq, i64t())],
        "nested",
    )));
    rows.push(err(
        "ConcurExecute over atom",
        ce(body),
        vec![i64t()],
        "expected",
    ));

    // Worker intrinsics
    rows.push(concurrent(ok(
        "WorkerId",
        control::worker_id("o"),
        vec![],
        single_i.clone(),
    )));
    rows.push(err(
        "WorkerId outside workers",
        control::worker_id("o"),
        vec![],
        "outside",
    ));
    let ex = |dst| control::exchange(dst, "x", "o");
    rows.push(concurrent(ok(
        "Exchange Seq",
        ex(ScalarExpr::field("a")),
        vec![c(K::Seq, a_only())],
        c(K::Seq, a_only()),
    )));
    rows.push(concurrent(ok(
        "Exchange Bag",
        ex(ScalarExpr::field("a")),
        vec![c(K::Bag, a_only())],
        c(K::Bag, a_only()),
    )));
    rows.push(concurrent(err(
        "Exchange Float64 destination",
        ex(ScalarExpr::field("b")),
        vec![c(K::Bag, ab())],
        "expected",
    )));
    rows.push(err(
        "Exchange outside workers",
        ex(ScalarExpr::field("a")),
        vec![c(K::Bag, a_only())],
        "outside",
    ));

    // Low-level flavor
    let scan_vec = || lowlevel::scan_vec("x", "o");
    for (outer, kout) in [(K::Single, K::Seq), (K::Seq, K::Seq), (K::Bag, K::Bag)] {
        rows.push(ok(
            &format!("ScanVec {outer:?}<Vec>"),
            scan_vec(),
            vec![c(outer, c(K::Vec, i64t()))],
            c(kout, i64t()),
        ));
    }
    rows.push(err(
        "ScanVec over Seq<Seq>",
        scan_vec(),
        vec![c(K::Seq, c(K::Seq, i64t()))],
        "expected",
    ));
    for kin in [K::Bag, K::Seq, K::Set, K::Vec] {
        rows.push(ok(
            &format!("MatVec {kin:?}"),
            lowlevel::mat_vec("x", "o"),
            vec![c(kin, ab())],
            c(K::Single, c(K::Vec, ab())),
        ));
    }
    let split_vec = |k| lowlevel::split_vec(k, "x", "o");
    for (outer, kout) in [(K::Single, K::Seq), (K::Seq, K::Seq), (K::Bag, K::Bag)] {
        rows.push(ok(
            &format!("SplitVec {outer:?}<Vec>"),
            split_vec(3),
            vec![c(outer, c(K::Vec, i64t()))],
            c(kout, c(K::Vec, i64t())),
        ));
    }
    rows.push(err(
        "SplitVec zero",
        split_vec(0),
        vec![c(K::Single, c(K::Vec, i64t()))],
        "param",
    ));
    rows.push(ok(
        "BuildHTable",
        lowlevel::build_htable("x", "o"),
        vec![c(K::Bag, kv(ItemType::text()))],
        c(K::Single, c(K::HTab, kv(ItemType::text()))),
    ));
    rows.push(err(
        "BuildHTable without key",
        lowlevel::build_htable("x", "o"),
        vec![c(K::Bag, ab())],
        "expected",
    ));
    let probe = || lowlevel::probe_htable("x", "y", "o");
    rows.push(ok(
        "ProbeHTable",
        probe(),
        vec![
            c(K::Seq, kv(i64t())),
            c(K::Single, c(K::HTab, kv(ItemType::text()))),
        ],
        c(K::Bag, joined()),
    ));
    rows.push(err(
        "ProbeHTable without table",
        probe(),
        vec![c(K::Seq, kv(i64t())), c(K::Bag, kv(i64t()))],
        "expected",
    ));

    // Registry-level failures
    rows.push(err(
        "unknown opcode",
        Instruction::new(hl, "Mystery").inputs(["x"]).outputs(["o"]),
        vec![c(K::Bag, i64t())],
        "unknown_opcode",
    ));
    rows.push(err(
        "too many outputs",
        highlevel::map(inc(), "x", "o").outputs(["o", "p"]),
        vec![c(K::Bag, i64t())],
        "output_count",
    ));
    rows
}

/// Checks every row; returns the number of rows and the failures.
pub fn check_all() -> (usize, Vec<String>) {
    let registry = FlavorRegistry::builtin();
    let rows = rows();
    let mut failures = Vec::new();
    for r in &rows {
        let got = registry.infer(&r.instr, &r.inputs, r.in_concurrent);
        let fine = match (&r.want, &got) {
            (Want::Types(t), Ok(g)) => t == g,
            (Want::Error(tag), Err(e)) => error_tag(e) == *tag,
            _ => false,
        };
        if !fine {
            let want = match &r.want {
                Want::Types(t) => format!("{t:?}"),
                Want::Error(tag) => format!("error {tag}"),
            };
            failures.push(format!("{}: want {want}, got {got:?}", r.label));
        }
    }
    (rows.len(), failures)
}

/// Opcodes of every built-in signature that at least one row exercises.
pub fn uncovered_opcodes() -> Vec<String> {
    let registry = FlavorRegistry::builtin();
    let rows = rows();
    let mut missing = Vec::new();
    for f in registry.flavors() {
        for sig in f.signatures() {
            if !rows.iter().any(|r| r.instr.is(&sig.flavor, &sig.opcode)) {
                missing.push(format!("{}.{}", sig.flavor, sig.opcode));
            }
        }
    }
    missing
}

//! Bundled example programs.

use crate::expr::{AggFunction, AggregateSpec, ArithOp, CmpOp, ScalarExpr};
use crate::flavors::highlevel;
use crate::ir::{Instruction, ItemType, Program, Register, Value};

/// The bundled Q6 document.
pub const TPCH_Q6_JSON: &str = include_str!("../programs/tpch_q6.json");

pub const SHIPDATE_FROM: i64 = 8766;
pub const SHIPDATE_TO: i64 = 9131;
pub const DISCOUNT_LO: f64 = 0.05;
pub const DISCOUNT_HI: f64 = 0.07;
pub const QUANTITY_BELOW: f64 = 24.0;

pub fn lineitem_type() -> ItemType {
    ItemType::tuple([
        ("l_shipdate", ItemType::date()),
        ("l_discount", ItemType::float64()),
        ("l_quantity", ItemType::float64()),
        ("l_eprice", ItemType::float64()),
        ("l_disc", ItemType::float64()),
    ])
}

pub fn q6_predicate() -> ScalarExpr {
    let f = ScalarExpr::field;
    let lit = ScalarExpr::lit;
    ScalarExpr::and(vec![
        ScalarExpr::cmp(CmpOp::Ge, f("l_shipdate"), lit(Value::Date(SHIPDATE_FROM))),
        ScalarExpr::cmp(CmpOp::Lt, f("l_shipdate"), lit(Value::Date(SHIPDATE_TO))),
        ScalarExpr::cmp(CmpOp::Ge, f("l_discount"), lit(Value::Float64(DISCOUNT_LO))),
        ScalarExpr::cmp(CmpOp::Le, f("l_discount"), lit(Value::Float64(DISCOUNT_HI))),
        ScalarExpr::cmp(
            CmpOp::Lt,
            f("l_quantity"),
            lit(Value::Float64(QUANTITY_BELOW)),
        ),
    ])
}

/// Q6 assembled in code; [`tpch_q6`] loads the same program from the
/// bundled document.
pub fn build_tpch_q6() -> Program {
    Program::new(
        vec![Register::new("lineitem", ItemType::bag(lineitem_type()))],
        vec![
            highlevel::select(q6_predicate(), "lineitem", "filtered"),
            highlevel::exproj(
                vec![(
                    "x",
                    ScalarExpr::arith(
                        ArithOp::Mul,
                        ScalarExpr::field("l_eprice"),
                        ScalarExpr::field("l_disc"),
                    ),
                )],
                "filtered",
                "projected",
            ),
            highlevel::aggr(
                vec![AggregateSpec::new("x", AggFunction::Sum, "revenue")],
                "projected",
                "result",
            ),
            Instruction::ret(["result"]),
        ],
    )
}

pub fn tpch_q6() -> Program {
    crate::format::deserialize(TPCH_Q6_JSON).expect("bundled document parses")
}

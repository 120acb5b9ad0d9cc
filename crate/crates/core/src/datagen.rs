//! Seeded lineitem generator.
//!
//! Uses splitmix64 so that other implementations can reproduce a dataset
//! bit for bit. Each row consumes four draws, in column order: ship date,
//! discount, quantity, extended price.

use std::sync::Arc;

use crate::ir::{CollectionKind, Name, Value};
use crate::programs::lineitem_type;

pub const SHIPDATE_MIN: i64 = 8766;
pub const SHIPDATE_MAX: i64 = 10957;
const EPRICE_MIN_CENTS: u64 = 90_000;
const EPRICE_MAX_CENTS: u64 = 10_500_000;

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `0..n` by reduction modulo `n`.
    fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetSpec {
    pub rows: usize,
    pub seed: u64,
}

/// One generated row as plain numbers, for oracles that must not go
/// through the engine's value types.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineitemRow {
    pub shipdate: i64,
    pub discount: f64,
    pub quantity: f64,
    pub eprice: f64,
}

pub fn lineitem_rows(spec: DatasetSpec) -> Vec<LineitemRow> {
    let mut rng = SplitMix64::new(spec.seed);
    (0..spec.rows)
        .map(|_| {
            let span = (SHIPDATE_MAX - SHIPDATE_MIN + 1) as u64;
            let shipdate = SHIPDATE_MIN + rng.below(span) as i64;
            let discount = rng.below(11) as f64 / 100.0;
            let quantity = (1 + rng.below(50)) as f64;
            let cents = EPRICE_MIN_CENTS + rng.below(EPRICE_MAX_CENTS - EPRICE_MIN_CENTS + 1);
            LineitemRow {
                shipdate,
                discount,
                quantity,
                eprice: cents as f64 / 100.0,
            }
        })
        .collect()
}

/// The lineitem table in both views.
#[derive(Clone, Debug)]
pub struct Lineitem {
    /// `Single<Vec<lineitem>>`, the input of lowered programs.
    pub physical: Value,
    /// `Bag<lineitem>`, the input of high-level programs.
    pub bag: Value,
}

pub fn gen_lineitem(spec: DatasetSpec) -> Lineitem {
    let names: Arc<[Name]> = [
        "l_shipdate",
        "l_discount",
        "l_quantity",
        "l_eprice",
        "l_disc",
    ]
    .into_iter()
    .map(Name::from)
    .collect();
    let rows: Vec<Value> = lineitem_rows(spec)
        .into_iter()
        .map(|r| {
            Value::tuple_from_parts(
                names.clone(),
                Box::new([
                    Value::Date(r.shipdate),
                    Value::Float64(r.discount),
                    Value::Float64(r.quantity),
                    Value::Float64(r.eprice),
                    Value::Float64(r.discount),
                ]),
            )
        })
        .collect();
    let elem = lineitem_type();
    let vec = Value::collection_unchecked(CollectionKind::Vec, elem.clone(), rows.clone());
    Lineitem {
        physical: Value::single(crate::ir::ItemType::vec(elem.clone()), vec),
        bag: Value::collection_unchecked(CollectionKind::Bag, elem, rows),
    }
}

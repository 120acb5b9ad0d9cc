//! Runtime values and their canonical ordering.
//!
//! Equality, ordering and hashing of [`Value`] all follow the canonical
//! order: atoms by their domain order (floats by bit-level total order with
//! every NaN equal and greatest), tuples field-by-field, ordered collections
//! lexicographically and unordered collections (Set, Bag, HTab) after sorting.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::Range;
use std::sync::{Arc, OnceLock};

use super::types::{AtomDomain, CollectionKind, Field, ItemType, Name};

#[derive(Clone, Debug)]
pub enum Value {
    Bool(bool),
    Int64(i64),
    Float64(f64),
    Date(i64),
    Text(Arc<str>),
    Tuple(Arc<TupleValue>),
    Collection(Arc<CollectionValue>),
}

#[derive(Clone, Debug)]
pub struct TupleValue {
    names: Arc<[Name]>,
    values: Box<[Value]>,
}

#[derive(Debug)]
pub struct CollectionValue {
    kind: CollectionKind,
    elem: ItemType,
    elements: Vec<Value>,
    extents: Option<Vec<usize>>,
    htab_index: OnceLock<HashMap<Value, Range<usize>>>,
}

impl Clone for CollectionValue {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            elem: self.elem.clone(),
            elements: self.elements.clone(),
            extents: self.extents.clone(),
            htab_index: OnceLock::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ValueError {
    #[error("heterogeneous collection: element of type {found} in collection of {expected}")]
    HeterogeneousCollection { expected: ItemType, found: ItemType },
    #[error("type mismatch: {0} vs {1}")]
    TypeMismatch(ItemType, ItemType),
    #[error("{kind} must hold {expected} element(s), found {found}")]
    Cardinality {
        kind: CollectionKind,
        expected: usize,
        found: usize,
    },
    #[error("{kind} extents {extents:?} do not describe {len} elements")]
    Extents {
        kind: CollectionKind,
        extents: Vec<usize>,
        len: usize,
    },
    #[error("duplicate element in Set: {0}")]
    DuplicateSetElement(Value),
    #[error("malformed element type: {0}")]
    MalformedType(String),
    #[error("duplicate tuple field `{0}`")]
    DuplicateField(Name),
}

impl TupleValue {
    pub fn new(names: Arc<[Name]>, values: Box<[Value]>) -> Self {
        debug_assert_eq!(names.len(), values.len());
        Self { names, values }
    }

    pub fn names(&self) -> &Arc<[Name]> {
        &self.names
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.names
            .iter()
            .position(|n| &**n == name)
            .map(|i| &self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Value)> {
        self.names.iter().zip(self.values.iter())
    }
}

impl CollectionValue {
    pub fn kind(&self) -> CollectionKind {
        self.kind
    }

    /// The element type annotation. Always present, so empty collections are
    /// typed too.
    pub fn elem_type(&self) -> &ItemType {
        &self.elem
    }

    pub fn elements(&self) -> &[Value] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Row-major extents of a KDSeq.
    pub fn extents(&self) -> Option<&[usize]> {
        self.extents.as_deref()
    }

    pub fn item_type(&self) -> ItemType {
        ItemType::Collection {
            kind: self.kind,
            elem: Arc::new(self.elem.clone()),
        }
    }

    /// For an HTab: the contiguous range of entries stored under `key`.
    pub fn htab_lookup(&self, key: &Value) -> Range<usize> {
        let index = self.htab_index.get_or_init(|| {
            let mut index: HashMap<Value, Range<usize>> = HashMap::new();
            for (i, entry) in self.elements.iter().enumerate() {
                let Some(k) = entry.field("key") else {
                    continue;
                };
                index
                    .entry(k.clone())
                    .and_modify(|r| r.end = i + 1)
                    .or_insert(i..i + 1);
            }
            index
        });
        index.get(key).cloned().unwrap_or(0..0)
    }

    pub fn into_elements(self) -> Vec<Value> {
        self.elements
    }
}

impl Value {
    pub fn text(s: &str) -> Self {
        Value::Text(Arc::from(s))
    }

    /// Builds a tuple from `(name, value)` pairs. Panics on duplicate names;
    /// use [`Value::try_tuple`] for untrusted input.
    pub fn tuple<I, S>(fields: I) -> Self
    where
        I: IntoIterator<Item = (S, Value)>,
        S: AsRef<str>,
    {
        Self::try_tuple(fields).expect("duplicate tuple field")
    }

    pub fn try_tuple<I, S>(fields: I) -> Result<Self, ValueError>
    where
        I: IntoIterator<Item = (S, Value)>,
        S: AsRef<str>,
    {
        let (names, values): (Vec<Name>, Vec<Value>) = fields
            .into_iter()
            .map(|(n, v)| (Name::from(n.as_ref()), v))
            .unzip();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(ValueError::DuplicateField(n.clone()));
            }
        }
        Ok(Value::Tuple(Arc::new(TupleValue {
            names: names.into(),
            values: values.into(),
        })))
    }

    pub fn tuple_from_parts(names: Arc<[Name]>, values: Box<[Value]>) -> Self {
        Value::Tuple(Arc::new(TupleValue::new(names, values)))
    }

    /// Checked constructor: every element must conform to `elem`, and the
    /// kind's invariants (Single/ArrayN cardinality, Set uniqueness, HTab
    /// element shape) must hold. HTab entries are stably regrouped into
    /// canonical key order.
    pub fn collection(
        kind: CollectionKind,
        elem: ItemType,
        elements: Vec<Value>,
    ) -> Result<Self, ValueError> {
        Self::collection_with_extents(kind, elem, elements, None)
    }

    pub fn collection_with_extents(
        kind: CollectionKind,
        elem: ItemType,
        mut elements: Vec<Value>,
        extents: Option<Vec<usize>>,
    ) -> Result<Self, ValueError> {
        let ty = ItemType::collection(kind, elem.clone());
        ty.check()
            .map_err(|e| ValueError::MalformedType(e.to_string()))?;
        for e in &elements {
            if !e.conforms(&elem) {
                return Err(ValueError::HeterogeneousCollection {
                    expected: elem,
                    found: e.shallow_type(),
                });
            }
        }
        match kind {
            CollectionKind::Single if elements.len() != 1 => {
                return Err(ValueError::Cardinality {
                    kind,
                    expected: 1,
                    found: elements.len(),
                })
            }
            CollectionKind::ArrayN(n) if elements.len() != n as usize => {
                return Err(ValueError::Cardinality {
                    kind,
                    expected: n as usize,
                    found: elements.len(),
                })
            }
            CollectionKind::Set => {
                let mut sorted: Vec<&Value> = elements.iter().collect();
                sorted.sort();
                if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                    return Err(ValueError::DuplicateSetElement(w[0].clone()));
                }
            }
            CollectionKind::HTab => sort_htab_entries(&mut elements),
            _ => {}
        }
        let extents = match kind {
            CollectionKind::KDSeq(k) => {
                let ext = extents.unwrap_or_else(|| {
                    let mut v = vec![1; k as usize];
                    if let Some(first) = v.first_mut() {
                        *first = elements.len();
                    }
                    v
                });
                if ext.len() != k as usize || ext.iter().product::<usize>() != elements.len() {
                    return Err(ValueError::Extents {
                        kind,
                        extents: ext,
                        len: elements.len(),
                    });
                }
                Some(ext)
            }
            _ => None,
        };
        Ok(Self::collection_raw(kind, elem, elements, extents))
    }

    /// Engine-internal constructor that trusts its caller.
    pub fn collection_unchecked(
        kind: CollectionKind,
        elem: ItemType,
        elements: Vec<Value>,
    ) -> Self {
        Self::collection_raw(kind, elem, elements, None)
    }

    pub(crate) fn collection_raw(
        kind: CollectionKind,
        elem: ItemType,
        elements: Vec<Value>,
        extents: Option<Vec<usize>>,
    ) -> Self {
        Value::Collection(Arc::new(CollectionValue {
            kind,
            elem,
            elements,
            extents,
            htab_index: OnceLock::new(),
        }))
    }

    pub fn single(elem: ItemType, value: Value) -> Self {
        Self::collection_raw(CollectionKind::Single, elem, vec![value], None)
    }

    /// A 2DSeq matrix from row-major data.
    pub fn matrix(
        elem: ItemType,
        rows: usize,
        cols: usize,
        data: Vec<Value>,
    ) -> Result<Self, ValueError> {
        Self::collection_with_extents(CollectionKind::KDSeq(2), elem, data, Some(vec![rows, cols]))
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int64(i) | Value::Date(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Float64(f) => Some(*f),
            Value::Int64(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_tuple(&self) -> Option<&TupleValue> {
        match self {
            Value::Tuple(t) => Some(t),
            _ => None,
        }
    }

    pub fn as_collection(&self) -> Option<&CollectionValue> {
        match self {
            Value::Collection(c) => Some(c),
            _ => None,
        }
    }

    pub fn field(&self, name: &str) -> Option<&Value> {
        self.as_tuple()?.get(name)
    }

    pub fn atom_domain(&self) -> Option<AtomDomain> {
        Some(match self {
            Value::Bool(_) => AtomDomain::Bool,
            Value::Int64(_) => AtomDomain::Int64,
            Value::Float64(_) => AtomDomain::Float64,
            Value::Date(_) => AtomDomain::Date,
            Value::Text(_) => AtomDomain::Text,
            _ => return None,
        })
    }

    /// Type of the value trusting collection annotations (no element scan).
    pub fn shallow_type(&self) -> ItemType {
        match self {
            Value::Tuple(t) => ItemType::Tuple(
                t.iter()
                    .map(|(n, v)| Field {
                        name: n.clone(),
                        ty: v.shallow_type(),
                    })
                    .collect(),
            ),
            Value::Collection(c) => c.item_type(),
            atom => ItemType::Atom(atom.atom_domain().expect("atom")),
        }
    }

    /// Full type derivation; checks that every collection is homogeneous and
    /// agrees with its annotation.
    pub fn type_of(&self) -> Result<ItemType, ValueError> {
        match self {
            Value::Tuple(t) => {
                let mut fields = Vec::with_capacity(t.len());
                for (n, v) in t.iter() {
                    fields.push(Field {
                        name: n.clone(),
                        ty: v.type_of()?,
                    });
                }
                Ok(ItemType::Tuple(fields.into()))
            }
            Value::Collection(c) => {
                for e in &c.elements {
                    let t = e.type_of()?;
                    if t != c.elem {
                        return Err(ValueError::HeterogeneousCollection {
                            expected: c.elem.clone(),
                            found: t,
                        });
                    }
                }
                Ok(c.item_type())
            }
            _ => Ok(self.shallow_type()),
        }
    }

    /// Whether the value has type `ty`, trusting nested collection
    /// annotations.
    pub fn conforms(&self, ty: &ItemType) -> bool {
        match (self, ty) {
            (Value::Tuple(t), ItemType::Tuple(fields)) => {
                t.len() == fields.len()
                    && t.iter()
                        .zip(fields.iter())
                        .all(|((n, v), f)| *n == f.name && v.conforms(&f.ty))
            }
            (Value::Collection(c), ItemType::Collection { kind, elem }) => {
                c.kind == *kind && c.elem == **elem
            }
            (v, ItemType::Atom(d)) => v.atom_domain() == Some(*d),
            _ => false,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Bool(_) => 0,
            Value::Int64(_) => 1,
            Value::Float64(_) => 2,
            Value::Date(_) => 3,
            Value::Text(_) => 4,
            Value::Tuple(_) => 5,
            Value::Collection(_) => 6,
        }
    }
}

/// Whether two values have the same type, trusting collection annotations.
fn same_type(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Tuple(x), Value::Tuple(y)) => {
            x.names == y.names
                && x.values
                    .iter()
                    .zip(y.values.iter())
                    .all(|(p, q)| same_type(p, q))
        }
        (Value::Collection(x), Value::Collection(y)) => x.kind == y.kind && x.elem == y.elem,
        _ => a.rank() == b.rank(),
    }
}

/// Canonical comparison of two values of the same type.
pub fn canonical_compare(a: &Value, b: &Value) -> Result<Ordering, ValueError> {
    if !same_type(a, b) {
        return Err(ValueError::TypeMismatch(a.shallow_type(), b.shallow_type()));
    }
    Ok(a.cmp(b))
}

fn float_cmp(a: f64, b: f64) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => a.total_cmp(&b),
    }
}

fn sorted_refs(values: &[Value]) -> Vec<&Value> {
    let mut v: Vec<&Value> = values.iter().collect();
    v.sort();
    v
}

fn sort_htab_entries(entries: &mut [Value]) {
    entries.sort_by(|a, b| match (a.field("key"), b.field("key")) {
        (Some(x), Some(y)) => x.cmp(y),
        _ => Ordering::Equal,
    });
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Int64(a), Value::Int64(b)) | (Value::Date(a), Value::Date(b)) => a.cmp(b),
            (Value::Float64(a), Value::Float64(b)) => float_cmp(*a, *b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Tuple(a), Value::Tuple(b)) => a
                .names
                .cmp(&b.names)
                .then_with(|| a.values.iter().cmp(b.values.iter())),
            (Value::Collection(a), Value::Collection(b)) => a
                .kind
                .cmp(&b.kind)
                .then_with(|| a.elem.cmp(&b.elem))
                .then_with(|| a.extents.cmp(&b.extents))
                .then_with(|| {
                    if a.kind.is_unordered() {
                        sorted_refs(&a.elements)
                            .into_iter()
                            .cmp(sorted_refs(&b.elements))
                    } else {
                        a.elements.iter().cmp(b.elements.iter())
                    }
                }),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Bool(b) => b.hash(state),
            Value::Int64(i) | Value::Date(i) => i.hash(state),
            Value::Float64(f) => {
                let bits = if f.is_nan() {
                    f64::NAN.to_bits()
                } else {
                    f.to_bits()
                };
                bits.hash(state)
            }
            Value::Text(s) => s.hash(state),
            Value::Tuple(t) => {
                t.names.hash(state);
                for v in t.values.iter() {
                    v.hash(state);
                }
            }
            Value::Collection(c) => {
                c.kind.hash(state);
                c.elem.hash(state);
                c.extents.hash(state);
                c.elements.len().hash(state);
                if c.kind.is_unordered() {
                    // order-insensitive combination that still counts multiplicity
                    let mut acc = 0u64;
                    for e in &c.elements {
                        let mut h = DefaultHasher::new();
                        e.hash(&mut h);
                        acc = acc.wrapping_add(h.finish());
                    }
                    acc.hash(state);
                } else {
                    for e in &c.elements {
                        e.hash(state);
                    }
                }
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int64(i) => write!(f, "{i}"),
            Value::Float64(x) => write!(f, "{x:?}"),
            Value::Date(d) => write!(f, "date({d})"),
            Value::Text(s) => write!(f, "{s:?}"),
            Value::Tuple(t) => {
                f.write_str("<")?;
                for (i, (n, v)) in t.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{n}: {v}")?;
                }
                f.write_str(">")
            }
            Value::Collection(c) => {
                write!(f, "{}[", c.kind)?;
                for (i, e) in c.elements.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str("]")
            }
        }
    }
}

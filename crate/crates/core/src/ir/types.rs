//! Item types: the recursive atom | tuple | collection grammar.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Interned-ish identifier used for field names and register ids.
pub type Name = Arc<str>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomDomain {
    Bool,
    Int64,
    Float64,
    /// Days since the Unix epoch, stored as an `i64`.
    Date,
    Text,
}

impl AtomDomain {
    pub fn is_numeric(self) -> bool {
        matches!(self, AtomDomain::Int64 | AtomDomain::Float64)
    }
}

impl fmt::Display for AtomDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AtomDomain::Bool => "Bool",
            AtomDomain::Int64 => "Int64",
            AtomDomain::Float64 => "Float64",
            AtomDomain::Date => "Date",
            AtomDomain::Text => "Text",
        };
        f.write_str(s)
    }
}

/// Abstract (Set, Bag, Seq, KDSeq) and physical (Vec, Single, ArrayN, HTab)
/// collection kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectionKind {
    Set,
    Bag,
    Seq,
    #[serde(rename = "kdseq")]
    KDSeq(u32),
    Vec,
    Single,
    #[serde(rename = "arrayn")]
    ArrayN(u32),
    #[serde(rename = "htab")]
    HTab,
}

impl CollectionKind {
    /// Kinds whose element order is part of the value.
    pub fn is_ordered(self) -> bool {
        matches!(
            self,
            CollectionKind::Seq
                | CollectionKind::Vec
                | CollectionKind::ArrayN(_)
                | CollectionKind::KDSeq(_)
                | CollectionKind::Single
        )
    }

    /// Kinds compared as multisets.
    pub fn is_unordered(self) -> bool {
        !self.is_ordered()
    }
}

impl fmt::Display for CollectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CollectionKind::Set => f.write_str("Set"),
            CollectionKind::Bag => f.write_str("Bag"),
            CollectionKind::Seq => f.write_str("Seq"),
            CollectionKind::KDSeq(k) => write!(f, "{k}DSeq"),
            CollectionKind::Vec => f.write_str("Vec"),
            CollectionKind::Single => f.write_str("Single"),
            CollectionKind::ArrayN(n) => write!(f, "Array{n}"),
            CollectionKind::HTab => f.write_str("HTab"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Field {
    pub name: Name,
    #[serde(rename = "type")]
    pub ty: ItemType,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemType {
    Atom(AtomDomain),
    Tuple(Arc<[Field]>),
    Collection {
        kind: CollectionKind,
        elem: Arc<ItemType>,
    },
}

/// Why a type is not well-formed.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TypeMalformation {
    #[error("duplicate tuple field `{0}`")]
    DuplicateField(Name),
    #[error("HTab element must be a tuple with `key` and `val` fields, found {0}")]
    HTabElement(ItemType),
    #[error("{0} requires a positive size")]
    ZeroSize(CollectionKind),
}

impl ItemType {
    pub fn int64() -> Self {
        ItemType::Atom(AtomDomain::Int64)
    }
    pub fn float64() -> Self {
        ItemType::Atom(AtomDomain::Float64)
    }
    pub fn bool() -> Self {
        ItemType::Atom(AtomDomain::Bool)
    }
    pub fn date() -> Self {
        ItemType::Atom(AtomDomain::Date)
    }
    pub fn text() -> Self {
        ItemType::Atom(AtomDomain::Text)
    }

    pub fn tuple<I, S>(fields: I) -> Self
    where
        I: IntoIterator<Item = (S, ItemType)>,
        S: AsRef<str>,
    {
        ItemType::Tuple(
            fields
                .into_iter()
                .map(|(name, ty)| Field {
                    name: Name::from(name.as_ref()),
                    ty,
                })
                .collect(),
        )
    }

    pub fn collection(kind: CollectionKind, elem: ItemType) -> Self {
        ItemType::Collection {
            kind,
            elem: Arc::new(elem),
        }
    }

    pub fn bag(elem: ItemType) -> Self {
        Self::collection(CollectionKind::Bag, elem)
    }
    pub fn set(elem: ItemType) -> Self {
        Self::collection(CollectionKind::Set, elem)
    }
    pub fn seq(elem: ItemType) -> Self {
        Self::collection(CollectionKind::Seq, elem)
    }
    pub fn vec(elem: ItemType) -> Self {
        Self::collection(CollectionKind::Vec, elem)
    }
    pub fn single(elem: ItemType) -> Self {
        Self::collection(CollectionKind::Single, elem)
    }

    pub fn as_atom(&self) -> Option<AtomDomain> {
        match self {
            ItemType::Atom(d) => Some(*d),
            _ => None,
        }
    }

    pub fn as_tuple(&self) -> Option<&[Field]> {
        match self {
            ItemType::Tuple(fields) => Some(fields),
            _ => None,
        }
    }

    pub fn as_collection(&self) -> Option<(CollectionKind, &ItemType)> {
        match self {
            ItemType::Collection { kind, elem } => Some((*kind, elem)),
            _ => None,
        }
    }

    /// Element type of a collection of tuples, plus the collection kind.
    pub fn as_tuple_collection(&self) -> Option<(CollectionKind, &[Field])> {
        let (kind, elem) = self.as_collection()?;
        Some((kind, elem.as_tuple()?))
    }

    pub fn field(&self, name: &str) -> Option<&ItemType> {
        self.as_tuple()?
            .iter()
            .find(|f| &*f.name == name)
            .map(|f| &f.ty)
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ItemType::Atom(d) if d.is_numeric())
    }

    /// Structural well-formedness (unique tuple fields, positive static
    /// sizes, HTab element shape), checked recursively.
    pub fn check(&self) -> Result<(), TypeMalformation> {
        match self {
            ItemType::Atom(_) => Ok(()),
            ItemType::Tuple(fields) => {
                let mut seen = BTreeSet::new();
                for f in fields.iter() {
                    if !seen.insert(&f.name) {
                        return Err(TypeMalformation::DuplicateField(f.name.clone()));
                    }
                    f.ty.check()?;
                }
                Ok(())
            }
            ItemType::Collection { kind, elem } => {
                match kind {
                    CollectionKind::KDSeq(0) | CollectionKind::ArrayN(0) => {
                        return Err(TypeMalformation::ZeroSize(*kind))
                    }
                    CollectionKind::HTab
                        if (elem.field("key").is_none() || elem.field("val").is_none()) => {
                            return Err(TypeMalformation::HTabElement((**elem).clone()));
                        }
                    _ => {}
                }
                elem.check()
            }
        }
    }
}

impl fmt::Display for ItemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ItemType::Atom(d) => write!(f, "{d}"),
            ItemType::Tuple(fields) => {
                f.write_str("<")?;
                for (i, field) in fields.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}: {}", field.name, field.ty)?;
                }
                f.write_str(">")
            }
            ItemType::Collection { kind, elem } => write!(f, "{kind}<{elem}>"),
        }
    }
}

//! The identity inventory: JSON data files, loader, validation and queries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::expr::{Expr, SumRef};
use crate::Error;

const BUILTIN: &str = include_str!("../data/catalog.json");
const BUILTIN_COVERAGE: &str = include_str!("../data/coverage.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    InfiniteIdentity,
    FiniteIdentity,
    ParametrizedIdentity,
    InterSumRelation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Core,
    Intermediate,
    ConventionDependent,
}

/// Precision class: A 1e-35, B 1e-30, C 1e-20.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Class {
    A,
    B,
    C,
}

impl Class {
    /// Working digits and tolerance exponent (tolerance = 10^-tol).
    pub fn digits(self) -> u32 {
        match self {
            Class::A => 60,
            Class::B => 45,
            Class::C => 25,
        }
    }

    pub fn tol_exp(self) -> u32 {
        match self {
            Class::A => 35,
            Class::B => 30,
            Class::C => 20,
        }
    }
}

macro_rules! text_enum {
    ($t:ty) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = serde_json::to_string(self).map_err(|_| fmt::Error)?;
                f.pad(s.trim_matches('"'))
            }
        }

        impl std::str::FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self, Error> {
                serde_json::from_str(&format!("\"{s}\"")).map_err(|_| Error::Parse(format!("unknown value '{s}'")))
            }
        }
    };
}
text_enum!(Kind);
text_enum!(Status);
text_enum!(Class);

/// One catalog record.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityEntry {
    pub id: String,
    pub kind: Kind,
    /// "1".."8", "auxiliary" or "appendix"
    pub family: String,
    pub lhs: Expr,
    pub rhs: Expr,
    pub class: Class,
    pub status: Status,
    pub derived_from: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    kind: Kind,
    family: String,
    lhs: String,
    rhs: String,
    class: Class,
    status: Status,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    derived_from: Vec<String>,
}

/// Numeric part of "eqNNN".
pub fn id_number(id: &str) -> Option<u32> {
    id.strip_prefix("eq")?.parse().ok()
}

impl IdentityEntry {
    pub fn number(&self) -> u32 {
        id_number(&self.id).unwrap_or(0)
    }

    /// Order (weight) of the block the identity belongs to.
    pub fn order(&self) -> u32 {
        match self.number() {
            0..=20 => 4,
            21..=124 => 5,
            125..=327 => 6,
            _ => 7,
        }
    }

    pub fn sides(&self) -> [&Expr; 2] {
        [&self.lhs, &self.rhs]
    }

    fn validate(&self) -> Result<(), Error> {
        let ctx = |e: Error| Error::Invalid(format!("{}: {e}", self.id));
        let n = id_number(&self.id).ok_or_else(|| Error::Invalid(format!("bad id '{}'", self.id)))?;
        if n == 0 {
            return Err(Error::Invalid(format!("bad id '{}'", self.id)));
        }
        let fam_ok = matches!(self.family.as_str(), "auxiliary" | "appendix")
            || self.family.parse::<u32>().is_ok_and(|f| (1..=8).contains(&f));
        if !fam_ok {
            return Err(Error::Invalid(format!("{}: unknown family '{}'", self.id, self.family)));
        }
        let mut uses_param = false;
        for side in self.sides() {
            for s in side.sums() {
                match s {
                    SumRef::Series(d) => {
                        if self.kind == Kind::FiniteIdentity {
                            return Err(ctx(Error::Invalid(format!("infinite sum [{d}] in a finite identity"))));
                        }
                        d.validate().map_err(ctx)?;
                        uses_param |= d.has_param();
                    }
                    SumRef::Point(d) => {
                        if !matches!(self.kind, Kind::FiniteIdentity | Kind::ParametrizedIdentity) {
                            return Err(ctx(Error::Invalid(format!("point value {{{d}}} needs an index"))));
                        }
                        if d.has_param() {
                            return Err(ctx(Error::Invalid(format!("point value {{{d}}} may not use p"))));
                        }
                        uses_param = true;
                    }
                }
            }
            if self.kind == Kind::FiniteIdentity && !side.atoms().is_empty() {
                return Err(ctx(Error::Invalid("atoms in a finite identity".into())));
            }
        }
        if (self.kind == Kind::ParametrizedIdentity) != uses_param && self.kind != Kind::FiniteIdentity {
            return Err(ctx(Error::Invalid("parametrized kind and parameter use disagree".into())));
        }
        if self.kind == Kind::InfiniteIdentity && !self.rhs.sums().all(|s| matches!(s, SumRef::Series(_))) {
            return Err(ctx(Error::Invalid("point value in an infinite identity".into())));
        }
        Ok(())
    }

    fn to_raw(&self) -> RawEntry {
        RawEntry {
            id: self.id.clone(),
            kind: self.kind,
            family: self.family.clone(),
            lhs: self.lhs.to_string(),
            rhs: self.rhs.to_string(),
            class: self.class,
            status: self.status,
            derived_from: self.derived_from.clone(),
        }
    }
}

/// Subset selector; `None` fields match everything.
#[derive(Clone, Debug, Default)]
pub struct Filter {
    pub family: Option<String>,
    pub order: Option<u32>,
    pub kind: Option<Kind>,
    pub status: Option<Status>,
    pub ids: Option<Vec<String>>,
}

impl Filter {
    pub fn matches(&self, e: &IdentityEntry) -> bool {
        self.family.as_ref().is_none_or(|f| *f == e.family)
            && self.order.is_none_or(|o| o == e.order())
            && self.kind.is_none_or(|k| k == e.kind)
            && self.status.is_none_or(|s| s == e.status)
            && self.ids.as_ref().is_none_or(|ids| ids.contains(&e.id))
    }
}

#[derive(Clone, Debug, Default)]
pub struct Catalog {
    pub entries: Vec<IdentityEntry>,
    pub warnings: Vec<String>,
    /// SHA-256 of the source text
    pub hash: String,
}

impl Catalog {
    /// The shipped catalog.
    pub fn builtin() -> Catalog {
        Catalog::parse(BUILTIN).expect("shipped catalog is valid")
    }

    pub fn load(path: &Path) -> Result<Catalog, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Catalog::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Catalog, Error> {
        let hash = hex(&Sha256::digest(text.as_bytes()));
        if text.trim().is_empty() {
            return Ok(Catalog { entries: Vec::new(), warnings: vec!["empty catalog file".into()], hash });
        }
        let raw: Vec<RawEntry> = serde_json::from_str(text).map_err(|e| Error::Parse(format!("catalog: {e}")))?;
        let mut seen = BTreeSet::new();
        let mut entries = Vec::with_capacity(raw.len());
        for r in raw {
            if !seen.insert(r.id.clone()) {
                return Err(Error::Invalid(format!("duplicate id {}", r.id)));
            }
            let side = |s: &str, which: &str| {
                Expr::parse(s).map_err(|e| Error::Parse(format!("{} {which}: {e}", r.id)))
            };
            let e = IdentityEntry {
                lhs: side(&r.lhs, "lhs")?,
                rhs: side(&r.rhs, "rhs")?,
                id: r.id,
                kind: r.kind,
                family: r.family,
                class: r.class,
                status: r.status,
                derived_from: r.derived_from,
            };
            e.validate()?;
            entries.push(e);
        }
        for e in &entries {
            for d in &e.derived_from {
                if !seen.contains(d) {
                    return Err(Error::Invalid(format!("{}: derived_from names unknown entry {d}", e.id)));
                }
            }
        }
        entries.sort_by_key(|e| e.number());
        Ok(Catalog { entries, warnings: Vec::new(), hash })
    }

    pub fn get(&self, id: &str) -> Option<&IdentityEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn query(&self, f: &Filter) -> Vec<&IdentityEntry> {
        self.entries.iter().filter(|e| f.matches(e)).collect()
    }

    pub fn ids(&self) -> BTreeSet<u32> {
        self.entries.iter().map(|e| e.number()).collect()
    }

    /// Canonical text: fixed key order, canonical expressions, two-space indent.
    pub fn serialize(&self) -> String {
        let raw: Vec<RawEntry> = self.entries.iter().map(|e| e.to_raw()).collect();
        let mut s = serde_json::to_string_pretty(&raw).expect("serializable");
        s.push('\n');
        s
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Which in-scope equations the catalog leaves out, and why.
#[derive(Clone, Debug, Deserialize)]
pub struct Coverage {
    /// inclusive id ranges
    pub in_scope: Vec<(u32, u32)>,
    pub excluded: BTreeMap<String, String>,
}

impl Coverage {
    pub fn builtin() -> Coverage {
        serde_json::from_str(BUILTIN_COVERAGE).expect("shipped coverage file is valid")
    }

    pub fn in_scope_ids(&self) -> BTreeSet<u32> {
        self.in_scope.iter().flat_map(|&(a, b)| a..=b).collect()
    }

    pub fn excluded_ids(&self) -> BTreeSet<u32> {
        self.excluded.keys().filter_map(|k| id_number(k)).collect()
    }
}

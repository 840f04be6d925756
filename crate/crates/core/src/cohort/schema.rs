use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use super::BinaryVar;
use crate::error::{Error, Result};

/// The shipped column map for the PharmGKB IWPC export.
pub const DEFAULT_SCHEMA_TEXT: &str = include_str!("../../schemas/iwpc_pharmgkb.schema");

/// Record fields a dataset column can feed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    Id,
    AgeDecade,
    Height,
    Weight,
    Race,
    Gender,
    Inr,
    TargetInr,
    TherapeuticDose,
    Binary(BinaryVar),
}

impl Field {
    pub fn all() -> Vec<Field> {
        let mut fields = vec![
            Field::Id,
            Field::AgeDecade,
            Field::Height,
            Field::Weight,
            Field::Race,
            Field::Gender,
            Field::Inr,
            Field::TargetInr,
            Field::TherapeuticDose,
        ];
        fields.extend(BinaryVar::ALL.into_iter().map(Field::Binary));
        fields
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::Id => "id",
            Field::AgeDecade => "age_decade",
            Field::Height => "height_cm",
            Field::Weight => "weight_kg",
            Field::Race => "race",
            Field::Gender => "gender",
            Field::Inr => "inr",
            Field::TargetInr => "target_inr",
            Field::TherapeuticDose => "therapeutic_dose",
            Field::Binary(b) => b.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        Field::all().into_iter().find(|f| f.name() == name)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Maps record fields to the column headers that may carry them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    columns: BTreeMap<Field, Vec<String>>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema::parse(DEFAULT_SCHEMA_TEXT).expect("shipped schema is valid")
    }
}

impl Schema {
    /// Parse `key = value` lines. `#` starts a comment; alternatives for a
    /// header are separated by `|`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("line {}: expected key=value", lineno + 1)))?;
            let key = key.trim();
            let field = Field::from_name(key)
                .ok_or_else(|| Error::Schema(format!("line {}: unknown field `{key}`", lineno + 1)))?;
            let aliases: Vec<String> =
                value.split('|').map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect();
            if columns.insert(field, aliases).is_some() {
                return Err(Error::Schema(format!("line {}: duplicate field `{key}`", lineno + 1)));
            }
        }
        Ok(Schema { columns })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Schema::parse(&text)
    }

    /// Schema that only recognizes canonical column names.
    pub fn canonical() -> Self {
        Schema { columns: BTreeMap::new() }
    }

    /// Header names accepted for `field`, mapped aliases first and the
    /// canonical name last.
    pub fn candidates(&self, field: Field) -> Vec<&str> {
        let mut names: Vec<&str> =
            self.columns.get(&field).map(|v| v.iter().map(String::as_str).collect()).unwrap_or_default();
        names.push(field.name());
        names
    }

    /// Resolve each field to a column index in `header`.
    pub(crate) fn resolve(&self, header: &[String]) -> BTreeMap<Field, usize> {
        let normalized: Vec<String> = header.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
        let mut resolved = BTreeMap::new();
        for field in Field::all() {
            for candidate in self.candidates(field) {
                let candidate = candidate.to_ascii_lowercase();
                if let Some(idx) = normalized.iter().position(|h| *h == candidate) {
                    resolved.insert(field, idx);
                    break;
                }
            }
        }
        resolved
    }
}

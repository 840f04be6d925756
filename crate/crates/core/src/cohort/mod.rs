//! Patient cohort handling: schema-driven parsing of delimited exports,
//! inclusion filtering, imbalance screening, imputation, splitting,
//! feature encoding and a calibrated synthetic generator.

mod encode;
mod filter;
mod impute;
pub(crate) mod parse;
mod schema;
mod split;
mod synth;
mod write;

use std::collections::BTreeMap;
use std::fmt;

pub use encode::{
    encode_features, is_continuous_feature, select_features, FeatureMatrix, ScaleParam, Scaler, RACE_AFRICAN_AMERICAN,
    RACE_ASIAN,
};
pub use filter::{filter_unbalanced, minority_fraction, DEFAULT_MIN_MINORITY_FRACTION};
pub use impute::{apply_imputation, fit_imputation, impute_all, ImputationPlan, Provenance, Statistic};
pub use parse::{parse_cohort, parse_cohort_file, ExcludedRow, ExclusionReason, ParsedCohort};
pub use schema::{Field, Schema, DEFAULT_SCHEMA_TEXT};
pub use split::{split_cohort, split_indices};
pub use synth::{generate_synthetic_cohort, SyntheticConfig, SyntheticDoseModel};
pub use write::{write_cohort, write_exclusions, write_removed};

/// Sanity bounds applied when parsing heights (cm).
pub const HEIGHT_BOUNDS_CM: (f64, f64) = (100.0, 250.0);
/// Sanity bounds applied when parsing weights (kg).
pub const WEIGHT_BOUNDS_KG: (f64, f64) = (20.0, 300.0);
/// Observed INR range required for cohort inclusion (inclusive).
pub const INR_INCLUSION: (f64, f64) = (2.0, 3.0);

/// Medication and comorbidity flags carried by the IWPC export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinaryVar {
    Amiodarone,
    Aspirin,
    Atorvastatin,
    CongestiveHeartFailure,
    Carbamazepine,
    CurrentSmoker,
    DvtPe,
    Diabetes,
    Enzyme,
    Fluvastatin,
    Lovastatin,
    Macrolide,
    Phenytoin,
    Pravastatin,
    Rifampin,
    Rosuvastatin,
    Simvastatin,
    Sulfonamide,
    ValveReplacement,
}

impl BinaryVar {
    pub const ALL: [BinaryVar; 19] = [
        BinaryVar::Amiodarone,
        BinaryVar::Aspirin,
        BinaryVar::Atorvastatin,
        BinaryVar::CongestiveHeartFailure,
        BinaryVar::Carbamazepine,
        BinaryVar::CurrentSmoker,
        BinaryVar::DvtPe,
        BinaryVar::Diabetes,
        BinaryVar::Enzyme,
        BinaryVar::Fluvastatin,
        BinaryVar::Lovastatin,
        BinaryVar::Macrolide,
        BinaryVar::Phenytoin,
        BinaryVar::Pravastatin,
        BinaryVar::Rifampin,
        BinaryVar::Rosuvastatin,
        BinaryVar::Simvastatin,
        BinaryVar::Sulfonamide,
        BinaryVar::ValveReplacement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BinaryVar::Amiodarone => "amiodarone",
            BinaryVar::Aspirin => "aspirin",
            BinaryVar::Atorvastatin => "atorvastatin",
            BinaryVar::CongestiveHeartFailure => "chf",
            BinaryVar::Carbamazepine => "carbamazepine",
            BinaryVar::CurrentSmoker => "current_smoker",
            BinaryVar::DvtPe => "dvt_pe",
            BinaryVar::Diabetes => "diabetes",
            BinaryVar::Enzyme => "enzyme",
            BinaryVar::Fluvastatin => "fluvastatin",
            BinaryVar::Lovastatin => "lovastatin",
            BinaryVar::Macrolide => "macrolide",
            BinaryVar::Phenytoin => "phenytoin",
            BinaryVar::Pravastatin => "pravastatin",
            BinaryVar::Rifampin => "rifampin",
            BinaryVar::Rosuvastatin => "rosuvastatin",
            BinaryVar::Simvastatin => "simvastatin",
            BinaryVar::Sulfonamide => "sulfonamide",
            BinaryVar::ValveReplacement => "valve_replacement",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        BinaryVar::ALL.into_iter().find(|v| v.name() == name)
    }
}

impl fmt::Display for BinaryVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Race as coded in the dataset. `Missing` is the IWPC "missing or mixed"
/// category, a value in its own right that the dose model has a term for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Race {
    #[default]
    White,
    AfricanAmerican,
    Asian,
    Missing,
}

impl Race {
    pub fn code(self) -> u8 {
        match self {
            Race::Missing => 0,
            Race::White => 1,
            Race::AfricanAmerican => 2,
            Race::Asian => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Race::Missing),
            1 => Some(Race::White),
            2 => Some(Race::AfricanAmerican),
            3 => Some(Race::Asian),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn code(self) -> u8 {
        match self {
            Gender::Female => 0,
            Gender::Male => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Gender::Female),
            1 => Some(Gender::Male),
            _ => None,
        }
    }
}

/// Every covariate the cohort pipeline reasons about, used to key
/// imputation statistics and imbalance reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    AgeDecade,
    Height,
    Weight,
    TargetInr,
    Gender,
    Binary(BinaryVar),
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::AgeDecade => "age_decade",
            Variable::Height => "height_cm",
            Variable::Weight => "weight_kg",
            Variable::TargetInr => "target_inr",
            Variable::Gender => "gender",
            Variable::Binary(b) => b.name(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "age_decade" => Some(Variable::AgeDecade),
            "height_cm" => Some(Variable::Height),
            "weight_kg" => Some(Variable::Weight),
            "target_inr" => Some(Variable::TargetInr),
            "gender" => Some(Variable::Gender),
            other => BinaryVar::from_name(other).map(Variable::Binary),
        }
    }

    pub fn is_continuous(self) -> bool {
        matches!(self, Variable::Height | Variable::Weight | Variable::TargetInr)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One patient as read from the export, with missing values preserved.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPatientRecord {
    pub id: String,
    /// Decade code 1..=9; 1 means 10-19 years.
    pub age_decade: Option<u8>,
    pub height_cm: Option<f64>,
    pub weight_kg: Option<f64>,
    pub race: Race,
    pub gender: Option<Gender>,
    /// Only the flags present in the source file have keys.
    pub binary: BTreeMap<BinaryVar, Option<bool>>,
    pub inr: f64,
    pub target_inr: Option<f64>,
    pub therapeutic_dose_mg_week: f64,
}

impl RawPatientRecord {
    /// The variables this record carries a slot for, present or not.
    pub fn variables(&self) -> Vec<Variable> {
        let mut vars =
            vec![Variable::AgeDecade, Variable::Height, Variable::Weight, Variable::TargetInr, Variable::Gender];
        vars.extend(self.binary.keys().map(|&b| Variable::Binary(b)));
        vars
    }

    pub(crate) fn numeric_value(&self, var: Variable) -> Option<f64> {
        match var {
            Variable::AgeDecade => self.age_decade.map(f64::from),
            Variable::Height => self.height_cm,
            Variable::Weight => self.weight_kg,
            Variable::TargetInr => self.target_inr,
            Variable::Gender => self.gender.map(|g| f64::from(g.code())),
            Variable::Binary(b) => self.binary.get(&b).copied().flatten().map(|v| f64::from(u8::from(v))),
        }
    }
}

/// A record with every covariate filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedPatientRecord {
    pub id: String,
    pub age_decade: u8,
    pub height_cm: f64,
    pub weight_kg: f64,
    pub race: Race,
    pub gender: Gender,
    pub binary: BTreeMap<BinaryVar, bool>,
    pub inr: f64,
    pub target_inr: f64,
    pub therapeutic_dose_mg_week: f64,
}

impl ImputedPatientRecord {
    /// Flag value; a flag absent from the source data reads as 0.
    pub fn flag(&self, var: BinaryVar) -> bool {
        self.binary.get(&var).copied().unwrap_or(false)
    }

    /// View as a raw record with nothing missing.
    pub fn to_raw(&self) -> RawPatientRecord {
        RawPatientRecord {
            id: self.id.clone(),
            age_decade: Some(self.age_decade),
            height_cm: Some(self.height_cm),
            weight_kg: Some(self.weight_kg),
            race: self.race,
            gender: Some(self.gender),
            binary: self.binary.iter().map(|(&k, &v)| (k, Some(v))).collect(),
            inr: self.inr,
            target_inr: Some(self.target_inr),
            therapeutic_dose_mg_week: self.therapeutic_dose_mg_week,
        }
    }
}

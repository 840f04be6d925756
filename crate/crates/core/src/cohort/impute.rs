use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{Gender, ImputedPatientRecord, RawPatientRecord, Variable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    Mean(f64),
    Mode(u8),
}

impl Statistic {
    fn value(self) -> f64 {
        match self {
            Statistic::Mean(m) => m,
            Statistic::Mode(c) => f64::from(c),
        }
    }
}

/// Which rows the statistics were computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Provenance {
    #[default]
    TrainingSplit,
    FullCohort,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::TrainingSplit => "training_split",
            Provenance::FullCohort => "full_cohort",
        })
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "training_split" => Ok(Provenance::TrainingSplit),
            "full_cohort" => Ok(Provenance::FullCohort),
            other => Err(Error::Schema(format!("unknown imputation provenance `{other}`"))),
        }
    }
}

/// Complete-case means for continuous variables and modes for categorical
/// ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationPlan {
    pub stats: BTreeMap<Variable, Statistic>,
    pub provenance: Provenance,
}

/// Fit imputation statistics on `records`, normally the training split.
/// Mode ties resolve to the smaller code.
pub fn fit_imputation(records: &[RawPatientRecord]) -> Result<ImputationPlan> {
    let first = records.first().ok_or_else(|| Error::Domain("cannot fit imputation on an empty cohort".into()))?;
    let mut stats = BTreeMap::new();
    for var in first.variables() {
        let values: Vec<f64> = records.iter().filter_map(|r| r.numeric_value(var)).collect();
        if values.is_empty() {
            return Err(Error::UnimputableVariable(var.name().to_owned()));
        }
        let stat = if var.is_continuous() {
            Statistic::Mean(values.iter().sum::<f64>() / values.len() as f64)
        } else {
            let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
            for v in values {
                *counts.entry(v as u8).or_default() += 1;
            }
            // BTreeMap iterates codes ascending; keep the first maximum
            let (code, _) =
                counts.into_iter().fold((0u8, 0usize), |best, (code, n)| if n > best.1 { (code, n) } else { best });
            Statistic::Mode(code)
        };
        stats.insert(var, stat);
    }
    Ok(ImputationPlan { stats, provenance: Provenance::TrainingSplit })
}

impl ImputationPlan {
    fn fill(&self, var: Variable, present: Option<f64>) -> Result<f64> {
        match present {
            Some(v) => Ok(v),
            None => self.stats.get(&var).map(|s| s.value()).ok_or_else(|| Error::PlanIncomplete(var.name().to_owned())),
        }
    }

    /// Serialize as `variable=mean:<value>` / `variable=mode:<code>` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("provenance={}\n", self.provenance);
        for (var, stat) in &self.stats {
            match stat {
                Statistic::Mean(m) => out.push_str(&format!("{var}=mean:{m}\n")),
                Statistic::Mode(c) => out.push_str(&format!("{var}=mode:{c}\n")),
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut stats = BTreeMap::new();
        let mut provenance = Provenance::TrainingSplit;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let bad = || Error::Schema(format!("bad imputation plan line `{line}`"));
            let (key, value) = line.split_once('=').ok_or_else(bad)?;
            if key == "provenance" {
                provenance = value.parse()?;
                continue;
            }
            let var = Variable::from_name(key).ok_or_else(bad)?;
            let stat = match value.split_once(':').ok_or_else(bad)? {
                ("mean", v) => Statistic::Mean(v.parse().map_err(|_| bad())?),
                ("mode", v) => Statistic::Mode(v.parse().map_err(|_| bad())?),
                _ => return Err(bad()),
            };
            stats.insert(var, stat);
        }
        Ok(ImputationPlan { stats, provenance })
    }
}

/// Replace every missing field of `record` by its plan statistic.
pub fn apply_imputation(plan: &ImputationPlan, record: &RawPatientRecord) -> Result<ImputedPatientRecord> {
    let age = plan.fill(Variable::AgeDecade, record.numeric_value(Variable::AgeDecade))?;
    let gender = plan.fill(Variable::Gender, record.numeric_value(Variable::Gender))?;
    let mut binary = BTreeMap::new();
    for (&var, &value) in &record.binary {
        let v = plan.fill(Variable::Binary(var), value.map(|b| f64::from(u8::from(b))))?;
        binary.insert(var, v != 0.0);
    }
    Ok(ImputedPatientRecord {
        id: record.id.clone(),
        age_decade: age.round() as u8,
        height_cm: plan.fill(Variable::Height, record.height_cm)?,
        weight_kg: plan.fill(Variable::Weight, record.weight_kg)?,
        race: record.race,
        gender: Gender::from_code(gender.round() as u8).unwrap_or(Gender::Female),
        binary,
        inr: record.inr,
        target_inr: plan.fill(Variable::TargetInr, record.target_inr)?,
        therapeutic_dose_mg_week: record.therapeutic_dose_mg_week,
    })
}

pub fn impute_all(plan: &ImputationPlan, records: &[RawPatientRecord]) -> Result<Vec<ImputedPatientRecord>> {
    records.iter().enumerate().map(|(i, r)| apply_imputation(plan, r).map_err(|e| e.at_record(i))).collect()
}

//! IWPC clinical warfarin dose model.
//!
//! The model is linear in the square root of the weekly dose:
//!
//! ```text
//! sqrt(mg/week) = 4.0376 - 0.2546 age_decade + 0.0118 height_cm + 0.0134 weight_kg
//!               - 0.6752 asian + 0.406 black + 0.0443 race_missing
//!               + 1.2799 enzyme_inducer - 0.5695 amiodarone
//! ```

use std::fmt::Write as _;

use crate::cohort::{BinaryVar, ImputedPatientRecord, Race};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IwpcCoefficients {
    pub intercept: f64,
    pub age_per_decade: f64,
    pub height_per_cm: f64,
    pub weight_per_kg: f64,
    pub asian: f64,
    pub black: f64,
    pub race_missing: f64,
    pub enzyme: f64,
    pub amiodarone: f64,
}

impl Default for IwpcCoefficients {
    fn default() -> Self {
        IwpcCoefficients::PUBLISHED
    }
}

impl IwpcCoefficients {
    /// Published clinical-model coefficients.
    pub const PUBLISHED: IwpcCoefficients = IwpcCoefficients {
        intercept: 4.0376,
        age_per_decade: -0.2546,
        height_per_cm: 0.0118,
        weight_per_kg: 0.0134,
        asian: -0.6752,
        black: 0.406,
        race_missing: 0.0443,
        enzyme: 1.2799,
        amiodarone: -0.5695,
    };

    fn fields(&self) -> [(&'static str, f64); 9] {
        [
            ("intercept", self.intercept),
            ("age_per_decade", self.age_per_decade),
            ("height_per_cm", self.height_per_cm),
            ("weight_per_kg", self.weight_per_kg),
            ("asian", self.asian),
            ("black", self.black),
            ("race_missing", self.race_missing),
            ("enzyme", self.enzyme),
            ("amiodarone", self.amiodarone),
        ]
    }

    pub fn to_text(&self) -> String {
        self.fields().iter().fold(String::new(), |mut out, (k, v)| {
            let _ = writeln!(out, "{k}={v}");
            out
        })
    }

    /// Load `key=value` overrides on top of the published values. Any value
    /// that differs from the published one is refused unless
    /// `allow_override` is set.
    pub fn from_text(text: &str, allow_override: bool) -> Result<Self> {
        let mut c = IwpcCoefficients::PUBLISHED;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Schema(format!("bad coefficient line `{line}`")))?;
            let value: f64 =
                value.trim().parse().map_err(|_| Error::Schema(format!("bad coefficient value in `{line}`")))?;
            let slot = match key.trim() {
                "intercept" => &mut c.intercept,
                "age_per_decade" => &mut c.age_per_decade,
                "height_per_cm" => &mut c.height_per_cm,
                "weight_per_kg" => &mut c.weight_per_kg,
                "asian" => &mut c.asian,
                "black" => &mut c.black,
                "race_missing" => &mut c.race_missing,
                "enzyme" => &mut c.enzyme,
                "amiodarone" => &mut c.amiodarone,
                other => return Err(Error::Schema(format!("unknown coefficient `{other}`"))),
            };
            *slot = value;
        }
        if c != IwpcCoefficients::PUBLISHED && !allow_override {
            return Err(Error::Usage(
                "coefficients differ from the published IWPC values; pass the override flag to use them".into(),
            ));
        }
        Ok(c)
    }
}

/// The covariates the dose model reads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoseCovariates {
    pub age_decade: u8,
    pub height_cm: f64,
    pub weight_kg: f64,
    pub race: Race,
    pub enzyme: bool,
    pub amiodarone: bool,
}

impl DoseCovariates {
    pub fn from_record(r: &ImputedPatientRecord) -> Self {
        DoseCovariates {
            age_decade: r.age_decade,
            height_cm: r.height_cm,
            weight_kg: r.weight_kg,
            race: r.race,
            enzyme: r.flag(BinaryVar::Enzyme),
            amiodarone: r.flag(BinaryVar::Amiodarone),
        }
    }

    /// Linear predictor without domain checks.
    pub fn linear_predictor(&self, c: &IwpcCoefficients) -> f64 {
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        let race_term = match self.race {
            Race::White => 0.0,
            Race::Asian => c.asian,
            Race::AfricanAmerican => c.black,
            Race::Missing => c.race_missing,
        };
        c.intercept
            + c.age_per_decade * f64::from(self.age_decade)
            + c.height_per_cm * self.height_cm
            + c.weight_per_kg * self.weight_kg
            + race_term
            + c.enzyme * flag(self.enzyme)
            + c.amiodarone * flag(self.amiodarone)
    }

    pub fn sqrt_weekly_dose(&self, c: &IwpcCoefficients) -> Result<f64> {
        if !(1..=9).contains(&self.age_decade) {
            return Err(Error::Domain(format!("age decade {} outside 1..=9", self.age_decade)));
        }
        let s = self.linear_predictor(c);
        if s > 0.0 {
            Ok(s)
        } else {
            Err(Error::NonPhysicalDose(s))
        }
    }

    pub fn weekly_dose(&self, c: &IwpcCoefficients) -> Result<f64> {
        self.sqrt_weekly_dose(c).map(|s| s * s)
    }
}

pub fn linear_predictor(record: &ImputedPatientRecord, coeffs: &IwpcCoefficients) -> f64 {
    DoseCovariates::from_record(record).linear_predictor(coeffs)
}

/// Predicted square root of the weekly dose (sqrt(mg/week)).
pub fn predict_sqrt_weekly_dose(record: &ImputedPatientRecord, coeffs: &IwpcCoefficients) -> Result<f64> {
    DoseCovariates::from_record(record).sqrt_weekly_dose(coeffs)
}

/// Predicted weekly dose in mg.
pub fn predict_weekly_dose(record: &ImputedPatientRecord, coeffs: &IwpcCoefficients) -> Result<f64> {
    DoseCovariates::from_record(record).weekly_dose(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn covariates(age: u8, height: f64, weight: f64, race: Race) -> DoseCovariates {
        DoseCovariates { age_decade: age, height_cm: height, weight_kg: weight, race, enzyme: false, amiodarone: false }
    }

    #[test]
    fn reference_patient_white() {
        let c = covariates(5, 170.0, 80.0, Race::White);
        let s = c.sqrt_weekly_dose(&IwpcCoefficients::PUBLISHED).unwrap();
        assert!((s - 5.8426).abs() < 1e-12);
        let d = c.weekly_dose(&IwpcCoefficients::PUBLISHED).unwrap();
        assert!((d - 34.136).abs() < 5e-4, "{d}");
    }

    #[test]
    fn reference_patient_asian() {
        let c = covariates(6, 160.0, 55.0, Race::Asian);
        let s = c.sqrt_weekly_dose(&IwpcCoefficients::PUBLISHED).unwrap();
        assert!((s - 4.4598).abs() < 1e-12);
        assert!((c.weekly_dose(&IwpcCoefficients::PUBLISHED).unwrap() - 19.890).abs() < 5e-4);
    }

    #[test]
    fn intercept_only_probe() {
        let c = covariates(0, 0.0, 0.0, Race::White);
        let s = c.linear_predictor(&IwpcCoefficients::PUBLISHED);
        assert_eq!(s, 4.0376);
        assert!((s * s - 16.302).abs() < 5e-4);
    }

    #[test]
    fn non_physical_prediction_is_an_error() {
        let mut c = covariates(9, 100.0, 20.0, Race::Asian);
        c.amiodarone = true;
        let coeffs = IwpcCoefficients { intercept: -3.0, ..IwpcCoefficients::PUBLISHED };
        assert!(matches!(c.sqrt_weekly_dose(&coeffs), Err(Error::NonPhysicalDose(_))));
        assert!(matches!(covariates(0, 170.0, 80.0, Race::White).weekly_dose(&coeffs), Err(Error::Domain(_))));
    }

    #[test]
    fn override_requires_flag() {
        assert_eq!(IwpcCoefficients::from_text("intercept=4.0376", false).unwrap(), IwpcCoefficients::PUBLISHED);
        assert!(IwpcCoefficients::from_text("intercept=4.5", false).is_err());
        assert_eq!(IwpcCoefficients::from_text("intercept=4.5", true).unwrap().intercept, 4.5);
        let text = IwpcCoefficients::PUBLISHED.to_text();
        assert_eq!(IwpcCoefficients::from_text(&text, false).unwrap(), IwpcCoefficients::PUBLISHED);
    }

    #[test]
    fn monotone_in_weight_and_age() {
        let c = IwpcCoefficients::PUBLISHED;
        let base = covariates(5, 170.0, 80.0, Race::White);
        let heavier = DoseCovariates { weight_kg: 90.0, ..base };
        let older = DoseCovariates { age_decade: 6, ..base };
        assert!(heavier.weekly_dose(&c).unwrap() > base.weekly_dose(&c).unwrap());
        assert!(older.weekly_dose(&c).unwrap() < base.weekly_dose(&c).unwrap());
    }
}

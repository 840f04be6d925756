//! Synthetic IWPC-like cohorts.
//!
//! Marginals follow the published dataset description (category counts with
//! missingness for the flags, age decade and race; truncated normals for
//! height, weight and INR). The therapeutic dose is the IWPC clinical
//! predictor evaluated on the true covariates, shifted and widened for a set
//! of risk conditions, so that the dose model is reliable for some patients
//! and not for others in a way a gate can learn.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{BinaryVar, Gender, ImputedPatientRecord, Race, RawPatientRecord};
use crate::iwpc_dose::{linear_predictor, IwpcCoefficients};

const AGE_COUNTS: [u32; 9] = [9, 94, 189, 441, 803, 1020, 1129, 510, 28];
const AGE_MISSING: u32 = 14;
const RACE_COUNTS: [u32; 3] = [2663, 656, 918];
const GENDER_COUNTS: [u32; 2] = [1822, 2415];
const COHORT_SIZE: u32 = 4237;
const HEIGHT_MISSING: u32 = 696;
const WEIGHT_MISSING: u32 = 163;

/// (zeros, ones, missing) per flag.
fn flag_counts(var: BinaryVar) -> (u32, u32, u32) {
    match var {
        BinaryVar::Amiodarone => (3434, 228, 575),
        BinaryVar::Aspirin => (2667, 905, 665),
        BinaryVar::Atorvastatin => (2028, 233, 1976),
        BinaryVar::CongestiveHeartFailure => (2453, 484, 1300),
        BinaryVar::Carbamazepine => (2210, 29, 1998),
        BinaryVar::CurrentSmoker => (2554, 384, 1299),
        BinaryVar::DvtPe => (3846, 391, 0),
        BinaryVar::Diabetes => (2337, 543, 1357),
        BinaryVar::Enzyme => (4150, 87, 0),
        BinaryVar::Fluvastatin => (2350, 10, 1877),
        BinaryVar::Lovastatin => (2203, 38, 1996),
        BinaryVar::Macrolide => (2227, 6, 2004),
        BinaryVar::Phenytoin => (2210, 24, 2003),
        BinaryVar::Pravastatin => (2175, 66, 1996),
        BinaryVar::Rifampin => (2230, 3, 2004),
        BinaryVar::Rosuvastatin => (2220, 14, 2003),
        BinaryVar::Simvastatin => (3035, 558, 644),
        BinaryVar::Sulfonamide => (2223, 11, 2003),
        BinaryVar::ValveReplacement => (2175, 645, 1417),
    }
}

#[derive(Debug, Clone, Copy)]
struct TruncatedNormal {
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
}

const HEIGHT: TruncatedNormal = TruncatedNormal { mean: 169.7, std: 10.6, min: 127.0, max: 202.0 };
const WEIGHT: TruncatedNormal = TruncatedNormal { mean: 81.3, std: 22.7, min: 34.0, max: 237.7 };
const INR: TruncatedNormal = TruncatedNormal { mean: 2.5, std: 0.3, min: 2.0, max: 3.0 };
const TARGET_INR: TruncatedNormal = TruncatedNormal { mean: 2.5, std: 0.1, min: 1.8, max: 3.5 };

impl TruncatedNormal {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let normal = Normal::new(self.mean, self.std).expect("positive std");
        loop {
            let v = normal.sample(rng);
            if (self.min..=self.max).contains(&v) {
                return v;
            }
        }
    }
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let p = 10f64.powi(decimals);
    (v * p).round() / p
}

fn categorical(rng: &mut ChaCha8Rng, counts: &[u32]) -> usize {
    let total: u32 = counts.iter().sum();
    let mut u = rng.random_range(0..total);
    for (i, &c) in counts.iter().enumerate() {
        if u < c {
            return i;
        }
        u -= c;
    }
    unreachable!("draw below total")
}

fn chance(rng: &mut ChaCha8Rng, count: u32, total: u32) -> bool {
    rng.random_range(0..total) < count
}

/// Patient condition that moves the true dose away from the IWPC prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskCondition {
    Flag(BinaryVar),
    Race(Race),
    MinAgeDecade(u8),
}

impl RiskCondition {
    fn holds(&self, r: &ImputedPatientRecord) -> bool {
        match *self {
            RiskCondition::Flag(var) => r.flag(var),
            RiskCondition::Race(race) => r.race == race,
            RiskCondition::MinAgeDecade(a) => r.age_decade >= a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskFactor {
    pub condition: RiskCondition,
    /// Systematic offset added to the square-root dose.
    pub shift: f64,
    /// Extra noise standard deviation (square-root dose units), combined in
    /// quadrature with the base noise.
    pub extra_sd: f64,
}

/// Ground truth: `sqrt(dose) = IWPC predictor + sum(shift) + sd * N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDoseModel {
    pub base_noise_sd: f64,
    pub risk_factors: Vec<RiskFactor>,
    /// Lower bound on the weekly dose in mg (the dataset minimum).
    pub min_dose_mg_week: f64,
}

impl Default for SyntheticDoseModel {
    fn default() -> Self {
        let factor = |condition, shift, extra_sd| RiskFactor { condition, shift, extra_sd };
        SyntheticDoseModel {
            base_noise_sd: 0.22,
            risk_factors: vec![
                factor(RiskCondition::Flag(BinaryVar::ValveReplacement), 0.75, 0.35),
                factor(RiskCondition::Flag(BinaryVar::CongestiveHeartFailure), -0.6, 0.3),
                factor(RiskCondition::Flag(BinaryVar::CurrentSmoker), 0.5, 0.25),
                factor(RiskCondition::Race(Race::AfricanAmerican), 0.55, 0.3),
                factor(RiskCondition::MinAgeDecade(8), -0.5, 0.2),
                factor(RiskCondition::Flag(BinaryVar::Diabetes), 0.0, 0.35),
            ],
            min_dose_mg_week: 2.5,
        }
    }
}

impl SyntheticDoseModel {
    /// Systematic shift and noise sd for a patient.
    pub fn shift_and_sd(&self, r: &ImputedPatientRecord) -> (f64, f64) {
        let mut shift = 0.0;
        let mut var = self.base_noise_sd * self.base_noise_sd;
        for f in self.risk_factors.iter().filter(|f| f.condition.holds(r)) {
            shift += f.shift;
            var += f.extra_sd * f.extra_sd;
        }
        (shift, var.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    pub seed: u64,
    pub dose_model: SyntheticDoseModel,
    pub coefficients: IwpcCoefficients,
}

impl SyntheticConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        SyntheticConfig { n, seed, dose_model: SyntheticDoseModel::default(), coefficients: IwpcCoefficients::PUBLISHED }
    }

    pub fn generate(&self) -> Vec<RawPatientRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.n).map(|i| self.patient(i, &mut rng)).collect()
    }

    fn patient(&self, index: usize, rng: &mut ChaCha8Rng) -> RawPatientRecord {
        let age = categorical(rng, &AGE_COUNTS) as u8 + 1;
        let age_missing = chance(rng, AGE_MISSING, COHORT_SIZE);
        let race = [Race::White, Race::AfricanAmerican, Race::Asian][categorical(rng, &RACE_COUNTS)];
        let gender = [Gender::Female, Gender::Male][categorical(rng, &GENDER_COUNTS)];
        let height = round_to(HEIGHT.sample(rng), 1);
        let height_missing = chance(rng, HEIGHT_MISSING, COHORT_SIZE);
        let weight = round_to(WEIGHT.sample(rng), 1);
        let weight_missing = chance(rng, WEIGHT_MISSING, COHORT_SIZE);
        let inr = round_to(INR.sample(rng), 2);
        let target_inr = round_to(TARGET_INR.sample(rng), 1);

        let mut truth = BTreeMap::new();
        let mut observed = BTreeMap::new();
        for var in BinaryVar::ALL {
            let (zeros, ones, missing) = flag_counts(var);
            let value = chance(rng, ones, zeros + ones);
            let is_missing = chance(rng, missing, zeros + ones + missing);
            truth.insert(var, value);
            observed.insert(var, (!is_missing).then_some(value));
        }

        let full = ImputedPatientRecord {
            id: format!("syn{index:06}"),
            age_decade: age,
            height_cm: height,
            weight_kg: weight,
            race,
            gender,
            binary: truth,
            inr,
            target_inr,
            therapeutic_dose_mg_week: 0.0,
        };
        let (shift, sd) = self.dose_model.shift_and_sd(&full);
        let noise: f64 = rng.sample(rand_distr::StandardNormal);
        let sqrt_dose = linear_predictor(&full, &self.coefficients) + shift + sd * noise;
        let dose = if sqrt_dose > 0.0 { round_to(sqrt_dose * sqrt_dose, 2) } else { 0.0 };
        let dose = dose.max(self.dose_model.min_dose_mg_week);

        RawPatientRecord {
            id: full.id,
            age_decade: (!age_missing).then_some(age),
            height_cm: (!height_missing).then_some(height),
            weight_kg: (!weight_missing).then_some(weight),
            race,
            gender: Some(gender),
            binary: observed,
            inr,
            target_inr: Some(target_inr),
            therapeutic_dose_mg_week: dose,
        }
    }
}

/// Deterministic synthetic cohort with the default dose model.
pub fn generate_synthetic_cohort(n: usize, seed: u64) -> Vec<RawPatientRecord> {
    SyntheticConfig::new(n, seed).generate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn height_mean_matches_published_marginal() {
        let cohort = generate_synthetic_cohort(1000, 11);
        let heights: Vec<f64> = cohort.iter().filter_map(|r| r.height_cm).collect();
        let mean = heights.iter().sum::<f64>() / heights.len() as f64;
        assert!((mean - 169.7).abs() <= 1.5, "mean height {mean}");
    }

    #[test]
    fn race_frequencies_within_four_points() {
        let cohort = generate_synthetic_cohort(1000, 12);
        let share = |race| cohort.iter().filter(|r| r.race == race).count() as f64 / 1000.0;
        assert!((share(Race::White) - 0.63).abs() <= 0.04);
        assert!((share(Race::AfricanAmerican) - 0.15).abs() <= 0.04);
        assert!((share(Race::Asian) - 0.22).abs() <= 0.04);
    }

    #[test]
    fn same_seed_same_cohort() {
        assert_eq!(generate_synthetic_cohort(200, 5), generate_synthetic_cohort(200, 5));
        assert_ne!(generate_synthetic_cohort(200, 5), generate_synthetic_cohort(200, 6));
    }

    #[test]
    fn generated_rows_respect_inclusion_and_bounds() {
        for r in generate_synthetic_cohort(500, 3) {
            assert!((2.0..=3.0).contains(&r.inr));
            assert!(r.therapeutic_dose_mg_week >= 2.5);
            if let Some(h) = r.height_cm {
                assert!((127.0..=202.0).contains(&h));
            }
            assert_eq!(r.binary.len(), BinaryVar::ALL.len());
            assert!(r.binary[&BinaryVar::Enzyme].is_some());
        }
    }
}

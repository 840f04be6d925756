use super::{RawPatientRecord, Variable};

pub const DEFAULT_MIN_MINORITY_FRACTION: f64 = 0.10;

/// Share of non-missing observations held by the rarer category of a
/// binary variable, or `None` when every value is missing.
pub fn minority_fraction(records: &[RawPatientRecord], var: Variable) -> Option<f64> {
    let (mut zeros, mut ones) = (0usize, 0usize);
    for value in records.iter().filter_map(|r| r.numeric_value(var)) {
        if value == 0.0 {
            zeros += 1;
        } else {
            ones += 1;
        }
    }
    let total = zeros + ones;
    (total > 0).then(|| zeros.min(ones) as f64 / total as f64)
}

fn binary_variables(records: &[RawPatientRecord]) -> Vec<Variable> {
    let mut vars = vec![Variable::Gender];
    if let Some(first) = records.first() {
        vars.extend(first.binary.keys().map(|&b| Variable::Binary(b)));
    }
    vars
}

/// Names of binary variables whose minority category holds strictly less
/// than `min_minority_fraction` of the non-missing observations. A variable
/// with no observations at all is also reported.
pub fn filter_unbalanced(records: &[RawPatientRecord], min_minority_fraction: f64) -> Vec<String> {
    binary_variables(records)
        .into_iter()
        .filter(|&var| minority_fraction(records, var).is_none_or(|f| f < min_minority_fraction))
        .map(|var| var.name().to_owned())
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::cohort::{BinaryVar, Gender, Race};

    fn cohort(var: BinaryVar, zeros: usize, ones: usize, missing: usize) -> Vec<RawPatientRecord> {
        let values = std::iter::repeat_n(Some(false), zeros)
            .chain(std::iter::repeat_n(Some(true), ones))
            .chain(std::iter::repeat_n(None, missing));
        values
            .enumerate()
            .map(|(i, v)| RawPatientRecord {
                id: i.to_string(),
                age_decade: Some(5),
                height_cm: None,
                weight_kg: None,
                race: Race::White,
                gender: Some(if i % 2 == 0 { Gender::Male } else { Gender::Female }),
                binary: BTreeMap::from([(var, v)]),
                inr: 2.5,
                target_inr: Some(2.5),
                therapeutic_dose_mg_week: 30.0,
            })
            .collect()
    }

    #[test]
    fn rifampin_counts_are_removed() {
        let records = cohort(BinaryVar::Rifampin, 2230, 3, 2004);
        assert_eq!(filter_unbalanced(&records, 0.10), vec!["rifampin"]);
    }

    #[test]
    fn enzyme_counts_are_removed() {
        let records = cohort(BinaryVar::Enzyme, 4150, 87, 0);
        assert_eq!(filter_unbalanced(&records, 0.10), vec!["enzyme"]);
    }

    #[test]
    fn balanced_variable_is_retained() {
        let records = cohort(BinaryVar::Aspirin, 50, 50, 0);
        assert!(filter_unbalanced(&records, 0.10).is_empty());
    }

    #[test]
    fn missing_values_do_not_count_toward_the_denominator() {
        // 10 of 100 observed is exactly the threshold: kept
        let records = cohort(BinaryVar::Aspirin, 90, 10, 500);
        assert!(filter_unbalanced(&records, 0.10).is_empty());
        let records = cohort(BinaryVar::Aspirin, 91, 9, 0);
        assert_eq!(filter_unbalanced(&records, 0.10), vec!["aspirin"]);
    }
}

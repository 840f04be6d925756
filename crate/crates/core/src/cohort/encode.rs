use super::{BinaryVar, ImputedPatientRecord, Race};
use crate::error::{Error, Result};

pub const RACE_AFRICAN_AMERICAN: &str = "race_african_american";
pub const RACE_ASIAN: &str = "race_asian";

const CONTINUOUS: [&str; 4] = ["age_decade", "height_cm", "weight_kg", "target_inr"];

/// Continuous features are standardized; indicators pass through.
pub fn is_continuous_feature(name: &str) -> bool {
    CONTINUOUS.contains(&name)
}

/// Ordered classifier feature list: continuous covariates, gender, the two
/// race indicators (White is the reference), then the flags that are present
/// and not listed in `removed`.
pub fn select_features(binary_vars: &[BinaryVar], removed: &[String]) -> Vec<String> {
    let kept = |name: &str| !removed.iter().any(|r| r == name);
    let mut names: Vec<String> = CONTINUOUS.iter().map(|s| s.to_string()).collect();
    if kept("gender") {
        names.push("gender".into());
    }
    names.push(RACE_AFRICAN_AMERICAN.into());
    names.push(RACE_ASIAN.into());
    let mut flags: Vec<BinaryVar> = binary_vars.to_vec();
    flags.sort();
    flags.dedup();
    names.extend(flags.into_iter().map(BinaryVar::name).filter(|n| kept(n)).map(str::to_owned));
    names
}

fn feature_value(record: &ImputedPatientRecord, name: &str) -> Option<f64> {
    let indicator = |b: bool| if b { 1.0 } else { 0.0 };
    Some(match name {
        "age_decade" => f64::from(record.age_decade),
        "height_cm" => record.height_cm,
        "weight_kg" => record.weight_kg,
        "target_inr" => record.target_inr,
        "gender" => f64::from(record.gender.code()),
        RACE_AFRICAN_AMERICAN => indicator(record.race == Race::AfricanAmerican),
        RACE_ASIAN => indicator(record.race == Race::Asian),
        other => indicator(record.flag(BinaryVar::from_name(other)?)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParam {
    pub mean: f64,
    /// Population (divide-by-n) standard deviation; 1 for constant columns.
    pub std: f64,
}

impl ScaleParam {
    pub const IDENTITY: ScaleParam = ScaleParam { mean: 0.0, std: 1.0 };

    #[inline]
    pub fn apply(&self, value: f64) -> f64 {
        (value - self.mean) / self.std
    }

    fn fit(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let std = if std > 1e-12 * mean.abs().max(1.0) { std } else { 1.0 };
        ScaleParam { mean, std }
    }
}

/// Per-feature standardization, stored with models so raw inputs can be
/// scored directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub params: Vec<ScaleParam>,
}

impl Scaler {
    pub fn identity(n_features: usize) -> Self {
        Scaler { params: vec![ScaleParam::IDENTITY; n_features] }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.params).map(|(&v, p)| p.apply(v)).collect()
    }
}

/// Row-major encoded design matrix with optional {-1, +1} labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    data: Vec<f64>,
    n_rows: usize,
    labels: Option<Vec<f64>>,
    scaler: Scaler,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, data: Vec<f64>, labels: Option<Vec<f64>>, scaler: Scaler) -> Result<Self> {
        let n_features = names.len();
        if n_features == 0 {
            return Err(Error::Schema("feature matrix needs at least one column".into()));
        }
        if !data.len().is_multiple_of(n_features) {
            return Err(Error::Schema(format!("{} values do not fill rows of {n_features} features", data.len())));
        }
        if scaler.params.len() != n_features {
            return Err(Error::Schema("scaler width differs from feature count".into()));
        }
        let n_rows = data.len() / n_features;
        let matrix = FeatureMatrix { names, data, n_rows, labels: None, scaler };
        match labels {
            Some(l) => matrix.with_labels(l),
            None => Ok(matrix),
        }
    }

    /// Matrix over already-scaled rows with an identity scaler and generic
    /// column names `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Option<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Schema("ragged rows".into()));
        }
        let names = (0..width).map(|i| format!("x{i}")).collect();
        FeatureMatrix::new(names, rows.concat(), labels, Scaler::identity(width))
    }

    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != self.n_rows {
            return Err(Error::Schema(format!("{} labels for {} rows", labels.len(), self.n_rows)));
        }
        if let Some(bad) = labels.iter().find(|&&z| z != 1.0 && z != -1.0) {
            return Err(Error::Domain(format!("label {bad} is not -1 or +1")));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_features();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_features())
    }

    /// Rows at `indices`, in that order, keeping names and scaler.
    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        let data = indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        FeatureMatrix { names: self.names.clone(), data, n_rows: indices.len(), labels, scaler: self.scaler.clone() }
    }
}

/// Encode imputed records into a standardized matrix.
///
/// With `scaler = None` a scaler is fit on these rows: continuous columns
/// get their mean and population standard deviation, indicator columns the
/// identity. The fitted scaler travels with the returned matrix.
pub fn encode_features(
    records: &[ImputedPatientRecord],
    feature_names: &[String],
    scaler: Option<&Scaler>,
) -> Result<FeatureMatrix> {
    let probe = ImputedPatientRecord {
        id: String::new(),
        age_decade: 1,
        height_cm: 0.0,
        weight_kg: 0.0,
        race: Race::White,
        gender: super::Gender::Female,
        binary: Default::default(),
        inr: 0.0,
        target_inr: 0.0,
        therapeutic_dose_mg_week: 1.0,
    };
    if let Some(unknown) = feature_names.iter().find(|n| feature_value(&probe, n).is_none()) {
        return Err(Error::Schema(format!("unknown feature `{unknown}`")));
    }
    if let Some(s) = scaler {
        if s.params.len() != feature_names.len() {
            return Err(Error::Schema(format!(
                "scaler has {} columns, feature list has {}",
                s.params.len(),
                feature_names.len()
            )));
        }
    }

    let raw: Vec<f64> = records
        .iter()
        .flat_map(|r| feature_names.iter().map(move |n| feature_value(r, n).expect("validated")))
        .collect();
    let width = feature_names.len();
    let scaler = match scaler {
        Some(s) => s.clone(),
        None => Scaler {
            params: feature_names
                .iter()
                .enumerate()
                .map(|(j, name)| {
                    if is_continuous_feature(name) && !records.is_empty() {
                        ScaleParam::fit(raw.iter().skip(j).step_by(width).copied())
                    } else {
                        ScaleParam::IDENTITY
                    }
                })
                .collect(),
        },
    };
    let data =
        raw.chunks_exact(width).flat_map(|row| row.iter().zip(&scaler.params).map(|(&v, p)| p.apply(v))).collect();
    FeatureMatrix::new(feature_names.to_vec(), data, None, scaler)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::cohort::Gender;

    fn patient(height: f64, race: Race) -> ImputedPatientRecord {
        ImputedPatientRecord {
            id: "p".into(),
            age_decade: 5,
            height_cm: height,
            weight_kg: 80.0,
            race,
            gender: Gender::Male,
            binary: BTreeMap::from([(BinaryVar::Aspirin, true)]),
            inr: 2.5,
            target_inr: 2.5,
            therapeutic_dose_mg_week: 30.0,
        }
    }

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn asian_race_indicators() {
        let m = encode_features(&[patient(170.0, Race::Asian)], &names(&[RACE_AFRICAN_AMERICAN, RACE_ASIAN]), None)
            .unwrap();
        assert_eq!(m.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn heights_standardize_with_population_sigma() {
        let rows: Vec<_> = [160.0, 170.0, 180.0].iter().map(|&h| patient(h, Race::White)).collect();
        let m = encode_features(&rows, &names(&["height_cm", "aspirin"]), None).unwrap();
        // sigma = sqrt(200/3)
        let z = 10.0 / (200.0f64 / 3.0).sqrt();
        assert!((m.row(0)[0] + z).abs() < 1e-12);
        assert!(m.row(1)[0].abs() < 1e-12);
        assert!((m.row(2)[0] - z).abs() < 1e-12);
        assert!((z - 1.224744871391589).abs() < 1e-12);
        // indicator passes through unscaled
        assert_eq!(m.row(0)[1], 1.0);
    }

    #[test]
    fn stored_scaler_centers_the_mean() {
        let rows: Vec<_> = [160.0, 170.0, 180.0].iter().map(|&h| patient(h, Race::White)).collect();
        let fitted = encode_features(&rows, &names(&["height_cm"]), None).unwrap();
        let one =
            encode_features(&[patient(170.0, Race::White)], &names(&["height_cm"]), Some(fitted.scaler())).unwrap();
        assert_eq!(one.row(0), &[0.0]);
        let again = encode_features(&rows, &names(&["height_cm"]), Some(fitted.scaler())).unwrap();
        assert_eq!(again, fitted);
    }

    #[test]
    fn constant_column_keeps_unit_sigma() {
        let rows: Vec<_> = (0..5).map(|_| patient(170.1, Race::White)).collect();
        let m = encode_features(&rows, &names(&["height_cm"]), None).unwrap();
        assert_eq!(m.scaler().params[0].std, 1.0);
    }

    #[test]
    fn unknown_feature_is_schema_error() {
        assert!(matches!(
            encode_features(&[patient(170.0, Race::White)], &names(&["shoe_size"]), None),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn selected_features_skip_removed_flags() {
        let flags = [BinaryVar::Enzyme, BinaryVar::Aspirin, BinaryVar::Rifampin];
        let removed = names(&["enzyme", "rifampin"]);
        assert_eq!(
            select_features(&flags, &removed),
            names(&[
                "age_decade",
                "height_cm",
                "weight_kg",
                "target_inr",
                "gender",
                RACE_AFRICAN_AMERICAN,
                RACE_ASIAN,
                "aspirin"
            ])
        );
    }
}

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use super::schema::{Field, Schema};
use super::{BinaryVar, Gender, Race, RawPatientRecord, HEIGHT_BOUNDS_CM, INR_INCLUSION, WEIGHT_BOUNDS_KG};
use crate::error::{Error, Result};

/// Why a data row did not make it into the cohort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExclusionReason {
    MissingDose,
    NonPositiveDose(f64),
    MissingInr,
    InrOutOfRange(f64),
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExclusionReason::MissingDose => f.write_str("missing_therapeutic_dose"),
            ExclusionReason::NonPositiveDose(d) => write!(f, "non_positive_therapeutic_dose({d})"),
            ExclusionReason::MissingInr => f.write_str("missing_inr"),
            ExclusionReason::InrOutOfRange(v) => write!(f, "inr_out_of_range({v})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcludedRow {
    /// 1-based line in the source, header is line 1.
    pub line: usize,
    pub id: String,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone)]
pub struct ParsedCohort {
    pub records: Vec<RawPatientRecord>,
    pub excluded: Vec<ExcludedRow>,
    pub data_rows: usize,
    /// Flags with a column in the source (including a derived enzyme flag).
    pub binary_vars: Vec<BinaryVar>,
}

const MISSING_TOKENS: [&str; 5] = ["", "na", "n/a", "null", "nan"];

pub(crate) fn is_missing(cell: &str) -> bool {
    let cell = cell.trim().to_ascii_lowercase();
    MISSING_TOKENS.contains(&cell.as_str())
}

pub(crate) fn parse_real(cell: &str) -> Option<f64> {
    if is_missing(cell) {
        return None;
    }
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_code(cell: &str) -> Option<u8> {
    let v = parse_real(cell)?;
    if v.fract() == 0.0 && (0.0..=255.0).contains(&v) {
        Some(v as u8)
    } else {
        None
    }
}

fn parse_bounded(cell: &str, (lo, hi): (f64, f64)) -> Option<f64> {
    parse_real(cell).filter(|v| (lo..=hi).contains(v))
}

/// Decade code 1..=9. Accepts the bare code or the export's range text
/// ("50 - 59", "90+").
pub(crate) fn parse_age_decade(cell: &str) -> Option<u8> {
    if is_missing(cell) {
        return None;
    }
    let code = match parse_code(cell) {
        Some(c) => Some(c),
        None => {
            let digits: String = cell.trim().chars().take_while(|c| c.is_ascii_digit()).collect();
            digits.parse::<u16>().ok().filter(|&y| y >= 10).map(|y| (y / 10).min(9) as u8)
        }
    };
    code.filter(|c| (1..=9).contains(c))
}

pub(crate) fn parse_race(cell: &str) -> Race {
    if let Some(code) = parse_code(cell) {
        return Race::from_code(code).unwrap_or(Race::Missing);
    }
    let text = cell.trim().to_ascii_lowercase();
    if text == "white" || text == "caucasian" {
        Race::White
    } else if text.contains("black") || text.contains("african") {
        Race::AfricanAmerican
    } else if text == "asian" {
        Race::Asian
    } else {
        Race::Missing
    }
}

pub(crate) fn parse_gender(cell: &str) -> Option<Gender> {
    if let Some(code) = parse_code(cell) {
        return Gender::from_code(code);
    }
    match cell.trim().to_ascii_lowercase().as_str() {
        "female" | "f" => Some(Gender::Female),
        "male" | "m" => Some(Gender::Male),
        _ => None,
    }
}

pub(crate) fn parse_flag(cell: &str) -> Option<bool> {
    match parse_code(cell) {
        Some(0) => Some(false),
        Some(1) => Some(true),
        _ => None,
    }
}

fn detect_delimiter(header_line: &str) -> u8 {
    if header_line.contains('\t') {
        b'\t'
    } else if header_line.contains(',') {
        b','
    } else {
        b'\t'
    }
}

/// Parse a delimited IWPC-style export into raw records.
///
/// Tab-delimited by default, falling back to commas when the header has no
/// tab. Cells that fail to parse or fall outside their code range are read
/// as missing. Rows without a positive therapeutic dose or with an observed
/// INR outside [2, 3] are excluded and listed in the result.
pub fn parse_cohort<R: Read>(mut source: R, schema: &Schema) -> Result<ParsedCohort> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes).map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
    let text = String::from_utf8_lossy(&bytes);
    let text = text.trim_start_matches('\u{feff}');
    let header_line =
        text.lines().find(|l| !l.trim().is_empty()).ok_or_else(|| Error::Schema("input has no header row".into()))?;

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header_line))
        .flexible(true)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    let columns = schema.resolve(&header);
    for required in [Field::TherapeuticDose, Field::Inr] {
        if !columns.contains_key(&required) {
            return Err(Error::Schema(format!(
                "no column for required field `{required}` (tried: {})",
                schema.candidates(required).join(", ")
            )));
        }
    }

    let mut binary_vars: Vec<BinaryVar> =
        BinaryVar::ALL.into_iter().filter(|b| columns.contains_key(&Field::Binary(*b))).collect();
    let inducers = [BinaryVar::Carbamazepine, BinaryVar::Phenytoin, BinaryVar::Rifampin];
    let derive_enzyme = !binary_vars.contains(&BinaryVar::Enzyme) && inducers.iter().any(|b| binary_vars.contains(b));
    if derive_enzyme {
        binary_vars.push(BinaryVar::Enzyme);
        binary_vars.sort();
    }

    let mut records = Vec::new();
    let mut excluded = Vec::new();
    let mut data_rows = 0;
    for (row_idx, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(row_idx + 2, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(row_idx + 2, |p| p.line() as usize);
        if row.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        data_rows += 1;
        let cell = |field: Field| -> &str { columns.get(&field).and_then(|&i| row.get(i)).unwrap_or("") };

        let id = match columns.get(&Field::Id) {
            Some(_) if !is_missing(cell(Field::Id)) => cell(Field::Id).trim().to_owned(),
            _ => format!("row{}", line),
        };

        let dose = parse_real(cell(Field::TherapeuticDose));
        let inr = parse_real(cell(Field::Inr));
        let reason = match (dose, inr) {
            (None, _) => Some(ExclusionReason::MissingDose),
            (Some(d), _) if d <= 0.0 => Some(ExclusionReason::NonPositiveDose(d)),
            (_, None) => Some(ExclusionReason::MissingInr),
            (_, Some(v)) if !(INR_INCLUSION.0..=INR_INCLUSION.1).contains(&v) => {
                Some(ExclusionReason::InrOutOfRange(v))
            }
            _ => None,
        };
        if let Some(reason) = reason {
            excluded.push(ExcludedRow { line, id, reason });
            continue;
        }

        let mut binary = BTreeMap::new();
        for &var in &binary_vars {
            let value = if var == BinaryVar::Enzyme && derive_enzyme {
                Some(inducers.iter().any(|b| {
                    columns.contains_key(&Field::Binary(*b)) && parse_flag(cell(Field::Binary(*b))) == Some(true)
                }))
            } else {
                parse_flag(cell(Field::Binary(var)))
            };
            binary.insert(var, value);
        }

        records.push(RawPatientRecord {
            id,
            age_decade: parse_age_decade(cell(Field::AgeDecade)),
            height_cm: parse_bounded(cell(Field::Height), HEIGHT_BOUNDS_CM),
            weight_kg: parse_bounded(cell(Field::Weight), WEIGHT_BOUNDS_KG),
            race: parse_race(cell(Field::Race)),
            gender: parse_gender(cell(Field::Gender)),
            binary,
            inr: inr.expect("checked above"),
            target_inr: parse_real(cell(Field::TargetInr)).filter(|v| *v > 0.0),
            therapeutic_dose_mg_week: dose.expect("checked above"),
        });
    }

    if records.is_empty() {
        return Err(Error::EmptyCohort { excluded: excluded.len() });
    }
    Ok(ParsedCohort { records, excluded, data_rows, binary_vars })
}

pub fn parse_cohort_file(path: &Path, schema: &Schema) -> Result<ParsedCohort> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_cohort(std::io::BufReader::new(file), schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "id\tage_decade\theight_cm\tweight_kg\trace\tgender\tamiodarone\tenzyme\tinr\ttarget_inr\ttherapeutic_dose";

    fn parse(rows: &[&str]) -> ParsedCohort {
        let text = std::iter::once(HEADER).chain(rows.iter().copied()).collect::<Vec<_>>().join("\n");
        parse_cohort(text.as_bytes(), &Schema::default()).unwrap()
    }

    #[test]
    fn race_code_two_is_african_american() {
        let cohort = parse(&["p1\t5\t170\t80\t2\t1\t0\t0\t2.5\t2.5\t35"]);
        assert_eq!(cohort.records[0].race, Race::AfricanAmerican);
    }

    #[test]
    fn empty_height_is_missing() {
        let cohort = parse(&["p1\t5\t\t80\t1\t1\t0\t0\t2.5\t2.5\t35"]);
        assert_eq!(cohort.records[0].height_cm, None);
        assert_eq!(cohort.records[0].weight_kg, Some(80.0));
    }

    #[test]
    fn inr_outside_range_is_excluded_and_reported() {
        let cohort = parse(&[
            "p1\t5\t170\t80\t1\t1\t0\t0\t3.4\t2.5\t35",
            "p2\t5\t170\t80\t1\t1\t0\t0\t2.0\t2.5\t35",
            "p3\t5\t170\t80\t1\t1\t0\t0\t2.5\t2.5\tNA",
        ]);
        assert_eq!(cohort.records.len(), 1);
        assert_eq!(cohort.records[0].id, "p2");
        assert_eq!(cohort.data_rows, 3);
        assert_eq!(cohort.excluded.len(), 2);
        assert_eq!(cohort.excluded[0].line, 2);
        assert_eq!(cohort.excluded[0].reason, ExclusionReason::InrOutOfRange(3.4));
        assert_eq!(cohort.excluded[1].reason, ExclusionReason::MissingDose);
    }

    #[test]
    fn out_of_range_codes_become_missing() {
        let cohort = parse(&["p1\t12\t999\t80\t7\t3\t2\t0\t2.5\t2.5\t35"]);
        let r = &cohort.records[0];
        assert_eq!(r.age_decade, None);
        assert_eq!(r.height_cm, None);
        assert_eq!(r.race, Race::Missing);
        assert_eq!(r.gender, None);
        assert_eq!(r.binary[&BinaryVar::Amiodarone], None);
    }

    #[test]
    fn comma_fallback_and_export_text_values() {
        let text = "Gender,Race (OMB),Age,Height (cm),Weight (kg),Rifampin or Rifampicin,Carbamazepine (Tegretol),INR on Reported Therapeutic Dose of Warfarin,Therapeutic Dose of Warfarin\n\
                    male,Black or African American,50 - 59,170.2,80,0,1,2.2,42\n";
        let cohort = parse_cohort(text.as_bytes(), &Schema::default()).unwrap();
        let r = &cohort.records[0];
        assert_eq!(r.gender, Some(Gender::Male));
        assert_eq!(r.race, Race::AfricanAmerican);
        assert_eq!(r.age_decade, Some(5));
        assert_eq!(r.height_cm, Some(170.2));
        // enzyme derived from the inducer columns
        assert_eq!(r.binary[&BinaryVar::Enzyme], Some(true));
        assert!(cohort.binary_vars.contains(&BinaryVar::Enzyme));
    }

    #[test]
    fn missing_header_and_empty_cohort_errors() {
        assert!(matches!(parse_cohort("".as_bytes(), &Schema::default()), Err(Error::Schema(_))));
        assert!(matches!(
            parse_cohort("age_decade\theight_cm\n5\t170\n".as_bytes(), &Schema::default()),
            Err(Error::Schema(_))
        ));
        let only_excluded = format!("{HEADER}\np1\t5\t170\t80\t1\t1\t0\t0\t1.2\t2.5\t35\n");
        assert!(matches!(
            parse_cohort(only_excluded.as_bytes(), &Schema::default()),
            Err(Error::EmptyCohort { excluded: 1 })
        ));
    }

    #[test]
    fn age_text_ranges() {
        assert_eq!(parse_age_decade("10 - 19"), Some(1));
        assert_eq!(parse_age_decade("90+"), Some(9));
        assert_eq!(parse_age_decade("0"), None);
        assert_eq!(parse_age_decade("NA"), None);
    }
}

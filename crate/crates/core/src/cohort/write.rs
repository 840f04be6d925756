use std::io::{self, Write};

use super::parse::ExcludedRow;
use super::{BinaryVar, RawPatientRecord};

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_owned(), |v| v.to_string())
}

/// Write records as tab-delimited text with canonical column names and
/// `NA` for missing cells. Reals use the shortest exact representation so a
/// re-parse reproduces the records.
pub fn write_cohort<W: Write>(mut out: W, records: &[RawPatientRecord]) -> io::Result<()> {
    let flags: Vec<BinaryVar> = records.first().map(|r| r.binary.keys().copied().collect()).unwrap_or_default();
    let mut header = vec!["id", "age_decade", "height_cm", "weight_kg", "race", "gender"];
    header.extend(flags.iter().map(|f| f.name()));
    header.extend(["inr", "target_inr", "therapeutic_dose"]);
    writeln!(out, "{}", header.join("\t"))?;
    for r in records {
        let mut cells = vec![
            r.id.clone(),
            opt(r.age_decade),
            opt(r.height_cm),
            opt(r.weight_kg),
            r.race.code().to_string(),
            opt(r.gender.map(|g| g.code())),
        ];
        cells.extend(flags.iter().map(|f| opt(r.binary.get(f).copied().flatten().map(u8::from))));
        cells.push(r.inr.to_string());
        cells.push(opt(r.target_inr));
        cells.push(r.therapeutic_dose_mg_week.to_string());
        writeln!(out, "{}", cells.join("\t"))?;
    }
    Ok(())
}

/// One removed variable name per line.
pub fn write_removed<W: Write>(mut out: W, removed: &[String]) -> io::Result<()> {
    for name in removed {
        writeln!(out, "{name}")?;
    }
    Ok(())
}

/// Row-exclusion report: a summary line, then `line<TAB>id<TAB>reason`.
pub fn write_exclusions<W: Write>(mut out: W, data_rows: usize, excluded: &[ExcludedRow]) -> io::Result<()> {
    writeln!(out, "# data_rows={data_rows} excluded={} kept={}", excluded.len(), data_rows - excluded.len())?;
    for row in excluded {
        writeln!(out, "{}\t{}\t{}", row.line, row.id, row.reason)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{generate_synthetic_cohort, parse_cohort, Schema};

    #[test]
    fn written_cohort_parses_back_identically() {
        let records = generate_synthetic_cohort(300, 21);
        let mut buf = Vec::new();
        write_cohort(&mut buf, &records).unwrap();
        let parsed = parse_cohort(buf.as_slice(), &Schema::default()).unwrap();
        assert!(parsed.excluded.is_empty());
        assert_eq!(parsed.records, records);
    }
}

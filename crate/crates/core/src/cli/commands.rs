use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{Command, ConfigArgs, RunConfig, Stage, StageError};
use crate::cohort::parse::{is_missing, parse_age_decade, parse_flag, parse_gender, parse_race, parse_real};
use crate::cohort::{
    encode_features, filter_unbalanced, impute_all, parse_cohort_file, split_cohort, write_cohort, write_exclusions,
    write_removed, BinaryVar, ImputationPlan, ImputedPatientRecord, ParsedCohort, Race, Schema, SyntheticConfig,
    HEIGHT_BOUNDS_CM, RACE_AFRICAN_AMERICAN, RACE_ASIAN, WEIGHT_BOUNDS_KG,
};
use crate::error::{Error, Result};
use crate::eval::{
    compare_models, evaluate_classifier, metrics, Candidate, ComparisonRow, ComparisonTable, EvalReport, RowOutcome,
    SortMetric,
};
use crate::gate::{classify, gate_report, mode_predictions, GateLabel, GateMode};
use crate::iwpc_dose::{DoseCovariates, IwpcCoefficients};
use crate::pipeline::{fit_gate, prepare, PreparedData, TrainedGate};
use crate::svm::{KernelSpec, SvmModel};

type CliResult = std::result::Result<(), StageError>;

pub(super) fn dispatch(command: Command, out: &mut dyn Write) -> CliResult {
    match command {
        Command::Ingest(args) => ingest(&args, out),
        Command::Synth { n, config } => synth(n, &config, out),
        Command::Train(args) => train_cmd(&args, out),
        Command::Evaluate { model, gate, compare, sort, config } => {
            evaluate_cmd(model, &gate, compare, &sort, &config, out)
        }
        Command::Gate { model, plan, jsonl, config } => gate_cmd(model, plan, jsonl, &config, out),
        Command::Dose { model, coefficients, allow_coefficient_override, patient } => {
            dose_cmd(model, coefficients, allow_coefficient_override, &patient, out)
        }
        Command::Report { path, format } => report_cmd(&path, &format, out),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn prepare_output(config: &RunConfig, command: &str) -> Result<()> {
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(format!("{command}.conf")), config.to_text())
}

fn load_cohort(config: &RunConfig) -> Result<ParsedCohort> {
    let input = config.input.as_ref().ok_or_else(|| Error::Usage("an input cohort is required (--input)".into()))?;
    let schema = match &config.schema {
        Some(path) => Schema::from_file(path)?,
        None => Schema::default(),
    };
    parse_cohort_file(input, &schema)
}

fn load_coefficients(path: Option<&Path>, allow_override: bool) -> Result<IwpcCoefficients> {
    match path {
        Some(path) => IwpcCoefficients::from_text(&read_file(path)?, allow_override),
        None => Ok(IwpcCoefficients::PUBLISHED),
    }
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

fn ingest(args: &ConfigArgs, out: &mut dyn Write) -> CliResult {
    let config = args.resolve().stage("configuration")?;
    let cohort = load_cohort(&config).stage("parsing cohort")?;
    prepare_output(&config, "ingest").stage("writing outputs")?;
    let dir = &config.output_dir;
    let removed = filter_unbalanced(&cohort.records, config.min_minority_fraction);
    let write = || -> Result<()> {
        write_file(&dir.join("cohort.tsv"), buffer(|b| write_cohort(b, &cohort.records)))?;
        write_file(&dir.join("exclusions.txt"), buffer(|b| write_exclusions(b, cohort.data_rows, &cohort.excluded)))?;
        let mut removed_text =
            String::from("# imbalance filter on the full cohort; training applies it to its split\n");
        removed_text.push_str(&String::from_utf8(buffer(|b| write_removed(b, &removed))).expect("utf-8"));
        write_file(&dir.join("removed_variables.txt"), removed_text)
    };
    write().stage("writing outputs")?;
    emit(
        out,
        &format!(
            "data rows: {}\nexcluded: {}\ncohort: {}\nunbalanced variables: {}\n",
            cohort.data_rows,
            cohort.excluded.len(),
            cohort.records.len(),
            removed.join(", ")
        ),
    )
    .stage("output")
}

fn synth(n: usize, args: &ConfigArgs, out: &mut dyn Write) -> CliResult {
    let config = args.resolve().stage("configuration")?;
    if n == 0 {
        return Err(Error::Usage("--n must be positive".into())).stage("configuration");
    }
    let records = SyntheticConfig::new(n, config.seed).generate();
    prepare_output(&config, "synth").stage("writing outputs")?;
    let path = config.output_dir.join("cohort.tsv");
    write_file(&path, buffer(|b| write_cohort(b, &records))).stage("writing outputs")?;
    emit(out, &format!("wrote {} synthetic records to {}\n", records.len(), path.display())).stage("output")
}

/// Parse, split and prepare exactly as training does.
fn prepared_split(config: &RunConfig, coeffs: &IwpcCoefficients) -> std::result::Result<PreparedData, StageError> {
    let cohort = load_cohort(config).stage("parsing cohort")?;
    let (train, test) = split_cohort(&cohort.records, config.train_fraction, config.seed).stage("splitting")?;
    prepare(&train, &test, &config.training(), &config.gate(), coeffs).stage("preparing features")
}

fn selection_text(prepared: &PreparedData, gate: &TrainedGate) -> String {
    let pct = |v: Option<f64>| crate::eval::format_percent(v);
    let mut s = String::new();
    let _ = writeln!(s, "features ({}): {}", prepared.feature_names.len(), prepared.feature_names.join(", "));
    let _ = writeln!(s, "removed as unbalanced: {}", prepared.removed.join(", "));
    let _ = writeln!(
        s,
        "training labels: high_risk={} safe_for_model={}",
        prepared.train_labels.high_risk, prepared.train_labels.safe
    );
    let _ = writeln!(
        s,
        "test labels: high_risk={} safe_for_model={}",
        prepared.test_labels.high_risk, prepared.test_labels.safe
    );
    let _ = writeln!(s);
    if let Some(sel) = &gate.selection {
        let _ = writeln!(s, "kernel: {}", sel.kernel);
        let _ = writeln!(
            s,
            "{:>10}  {:>8}  {:>8}  {:>11}  {:>11}  {:>7}",
            "C", "Balanced", "Accuracy", "Sensitivity", "Specificity", "Skipped"
        );
        for cand in &sel.candidates {
            let m = cand.cv.pooled_metrics();
            let _ = writeln!(
                s,
                "{:>10}  {:>8}  {:>8}  {:>11}  {:>11}  {:>7}",
                cand.c,
                pct(cand.score),
                pct(m.map(|m| m.accuracy)),
                pct(m.and_then(|m| m.sensitivity)),
                pct(m.and_then(|m| m.specificity)),
                cand.cv.skipped()
            );
        }
        let _ = writeln!(s, "selected C: {}", sel.selected_c);
    }
    let d = gate.model.diagnostics();
    let _ = writeln!(
        s,
        "final fit: C={} converged={} iterations={} max_kkt_violation={:.3e} support_vectors={}",
        d.c,
        d.converged,
        d.iterations,
        d.max_kkt_violation,
        gate.model.n_support_vectors()
    );
    s
}

fn train_cmd(args: &ConfigArgs, out: &mut dyn Write) -> CliResult {
    let config = args.resolve().stage("configuration")?;
    let coeffs = load_coefficients(config.coefficients.as_deref(), config.allow_coefficient_override)
        .stage("loading coefficients")?;
    let prepared = prepared_split(&config, &coeffs)?;
    let gate = fit_gate(&prepared.train_matrix, &config.training()).stage("training")?;
    prepare_output(&config, "train").stage("writing outputs")?;
    let dir = &config.output_dir;
    let report = selection_text(&prepared, &gate);
    let write = || -> Result<()> {
        gate.model.save(&dir.join("model.svm"))?;
        write_file(&dir.join("imputation.txt"), prepared.plan.to_text())?;
        write_file(&dir.join("removed_variables.txt"), buffer(|b| write_removed(b, &prepared.removed)))?;
        write_file(&dir.join("selection.txt"), &report)?;
        let json = serde_json::to_string(&gate).map_err(|e| Error::Schema(e.to_string()))?;
        write_file(&dir.join("selection.json"), json + "\n")
    };
    write().stage("writing outputs")?;
    emit(out, &report).stage("output")
}

fn family_name(kernel: &KernelSpec) -> String {
    let family = match kernel {
        KernelSpec::Linear => "Linear",
        KernelSpec::Polynomial { .. } => "Polynomial",
        KernelSpec::Sigmoid { .. } => "Sigmoid",
        KernelSpec::Rbf { .. } => "Gaussian",
        KernelSpec::Anova { .. } => "ANOVA",
    };
    format!("SVM ({family})")
}

fn comparison(
    model: &SvmModel,
    prepared: &PreparedData,
    config: &RunConfig,
    compare: bool,
    sort: SortMetric,
) -> Result<ComparisonTable> {
    let confusion = evaluate_classifier(model, &prepared.test_matrix)?;
    let own = ComparisonRow {
        name: family_name(model.kernel()),
        kernel: *model.kernel(),
        c: model.diagnostics().c,
        outcome: RowOutcome::Evaluated {
            confusion,
            metrics: metrics(&confusion)?,
            converged: model.diagnostics().converged,
        },
    };
    let mut rows = vec![own];
    if compare {
        let train_config = config.training().train_config(model.diagnostics().c);
        let candidates: Vec<Candidate> = [
            KernelSpec::Linear,
            KernelSpec::default(),
            KernelSpec::Rbf { delta: 1.0 },
            KernelSpec::Sigmoid { theta: -1.0 },
        ]
        .into_iter()
        .filter(|k| k.family() != model.kernel().family())
        .map(|kernel| Candidate { name: family_name(&kernel), kernel, config: train_config.clone() })
        .collect();
        if !candidates.is_empty() {
            let others = compare_models(&candidates, &prepared.train_matrix, &prepared.test_matrix, SortMetric::None)?;
            rows.extend(others.rows);
        }
    }
    let mut table = ComparisonTable { rows };
    table.sort(sort);
    Ok(table)
}

fn evaluate_cmd(
    model_path: Option<PathBuf>,
    gate: &str,
    compare: bool,
    sort: &str,
    args: &ConfigArgs,
    out: &mut dyn Write,
) -> CliResult {
    let config = args.resolve().stage("configuration")?;
    let mode: GateMode = gate.parse().stage("configuration")?;
    let sort: SortMetric = sort.parse().stage("configuration")?;
    let coeffs = load_coefficients(config.coefficients.as_deref(), config.allow_coefficient_override)
        .stage("loading coefficients")?;
    let model_path = model_path.unwrap_or_else(|| config.output_dir.join("model.svm"));
    let prepared = prepared_split(&config, &coeffs)?;

    let needs_model = mode == GateMode::Trained || compare;
    let model = if needs_model || model_path.exists() {
        let model = SvmModel::load(&model_path).stage("loading model")?;
        if model.feature_names() != prepared.feature_names.as_slice() {
            return Err(Error::Schema(format!(
                "model features [{}] differ from this split's features [{}]",
                model.feature_names().join(", "),
                prepared.feature_names.join(", ")
            )))
            .stage("loading model");
        }
        Some(model)
    } else {
        None
    };
    prepare_output(&config, "evaluate").stage("writing outputs")?;
    let dir = &config.output_dir;

    if let Some(model) = &model {
        let table = comparison(model, &prepared, &config, compare, sort).stage("comparing models")?;
        let write = || -> Result<()> {
            write_file(&dir.join("comparison.txt"), table.render_text())?;
            write_file(&dir.join("comparison.tsv"), table.render_tsv())
        };
        write().stage("writing outputs")?;
    }

    let predicted = match mode_predictions(mode, &prepared.test_labels) {
        Some(p) => p,
        None => {
            let model = model.as_ref().expect("trained mode loads the model");
            classify(&prepared.test_matrix, model).stage("gating")?.into_iter().map(|(_, l)| l).collect()
        }
    };
    let report = gate_report(mode.name(), &prepared.test_labels, &predicted).stage("evaluating")?;
    let write = || -> Result<()> {
        write_file(&dir.join("evaluation.txt"), report.render_text())?;
        write_file(&dir.join("evaluation.tsv"), report.render_tsv())?;
        write_file(&dir.join("evaluation.json"), report.to_json() + "\n")
    };
    write().stage("writing outputs")?;
    emit(out, &report.render_text()).stage("output")
}

/// Short content hash identifying a serialized model.
pub fn model_version(model_text: &str) -> String {
    let digest = Sha256::digest(model_text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct GateLine<'a> {
    id: &'a str,
    predicted_dose_mg_week: f64,
    decision_value: f64,
    label: GateLabel,
    model_version: &'a str,
}

fn gate_cmd(
    model_path: Option<PathBuf>,
    plan_path: Option<PathBuf>,
    jsonl: bool,
    args: &ConfigArgs,
    out: &mut dyn Write,
) -> CliResult {
    let config = args.resolve().stage("configuration")?;
    let coeffs = load_coefficients(config.coefficients.as_deref(), config.allow_coefficient_override)
        .stage("loading coefficients")?;
    let model_path = model_path.unwrap_or_else(|| config.output_dir.join("model.svm"));
    let model_text = read_file(&model_path).stage("loading model")?;
    let model = SvmModel::from_text(&model_text).stage("loading model")?;
    let version = model_version(&model_text);
    let plan_path = plan_path.unwrap_or_else(|| model_path.with_file_name("imputation.txt"));
    let plan = ImputationPlan::from_text(&read_file(&plan_path).stage("loading imputation plan")?)
        .stage("loading imputation plan")?;
    let cohort = load_cohort(&config).stage("parsing cohort")?;
    let records = impute_all(&plan, &cohort.records).stage("imputing")?;
    let features = encode_features(&records, model.feature_names(), Some(model.scaler())).stage("encoding features")?;
    let decisions = classify(&features, &model).stage("gating")?;

    let mut text = String::new();
    if !jsonl {
        text.push_str("id\tpredicted_dose_mg_week\tlabel\tdecision_value\n");
    }
    let (mut high, mut safe) = (0usize, 0usize);
    for (index, (record, (decision, label))) in records.iter().zip(&decisions).enumerate() {
        let dose = DoseCovariates::from_record(record)
            .weekly_dose(&coeffs)
            .map_err(|e| e.at_record(index))
            .stage("predicting dose")?;
        match label {
            GateLabel::HighRisk => high += 1,
            GateLabel::SafeForModel => safe += 1,
        }
        if jsonl {
            let line = GateLine {
                id: &record.id,
                predicted_dose_mg_week: dose,
                decision_value: *decision,
                label: *label,
                model_version: &version,
            };
            text.push_str(&serde_json::to_string(&line).expect("gate line serializes"));
            text.push('\n');
        } else {
            let _ = writeln!(text, "{}\t{:.3}\t{}\t{:.6}", record.id, dose, label, decision);
        }
    }
    if !jsonl {
        let _ = writeln!(text, "# patients={} high_risk={high} safe_for_model={safe}", records.len());
        let _ = writeln!(text, "# excluded_rows={} model_version={version}", cohort.excluded.len());
    }
    emit(out, &text).stage("output")
}

const DOSE_KEYS: [&str; 6] = ["age_decade", "height_cm", "weight_kg", "race", "enzyme", "amiodarone"];

fn feature_key(feature: &str) -> &str {
    if feature == RACE_AFRICAN_AMERICAN || feature == RACE_ASIAN {
        "race"
    } else {
        feature
    }
}

/// Build a complete patient from `key=value` pairs. Every dose-model input
/// and every key behind a model feature is required.
pub fn parse_patient(pairs: &[String], model_features: &[String]) -> Result<ImputedPatientRecord> {
    let mut values: BTreeMap<String, String> = BTreeMap::new();
    for pair in pairs {
        let (k, v) = pair.split_once('=').ok_or_else(|| Error::Usage(format!("expected KEY=VALUE, got `{pair}`")))?;
        values.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    let mut required: Vec<&str> = DOSE_KEYS.to_vec();
    required.extend(model_features.iter().map(|f| feature_key(f)));
    required.sort_unstable();
    required.dedup();
    let missing: Vec<&str> = required.iter().copied().filter(|k| !values.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(Error::Usage(format!("missing patient field(s): {}", missing.join(", "))));
    }

    let bad = |k: &str, v: &str| Error::Usage(format!("invalid value `{v}` for `{k}`"));
    let mut record = ImputedPatientRecord {
        id: "patient".into(),
        age_decade: 0,
        height_cm: 0.0,
        weight_kg: 0.0,
        race: Race::default(),
        gender: crate::cohort::Gender::Female,
        binary: BTreeMap::new(),
        inr: 0.0,
        target_inr: 0.0,
        therapeutic_dose_mg_week: 0.0,
    };
    let in_bounds = |v: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&v);
    for (k, v) in &values {
        match k.as_str() {
            "id" => record.id = v.clone(),
            "age_decade" => record.age_decade = parse_age_decade(v).ok_or_else(|| bad(k, v))?,
            "height_cm" => {
                record.height_cm = parse_real(v).filter(|&h| in_bounds(h, HEIGHT_BOUNDS_CM)).ok_or_else(|| bad(k, v))?
            }
            "weight_kg" => {
                record.weight_kg = parse_real(v).filter(|&w| in_bounds(w, WEIGHT_BOUNDS_KG)).ok_or_else(|| bad(k, v))?
            }
            "target_inr" => record.target_inr = parse_real(v).ok_or_else(|| bad(k, v))?,
            "gender" => record.gender = parse_gender(v).ok_or_else(|| bad(k, v))?,
            "race" => {
                record.race = parse_race(v);
                let explicit_missing = is_missing(v) || v == "0" || v.eq_ignore_ascii_case("missing");
                if record.race == Race::Missing && !explicit_missing {
                    return Err(bad(k, v));
                }
            }
            name => {
                let var = BinaryVar::from_name(name)
                    .ok_or_else(|| Error::Usage(format!("unknown patient field `{name}`")))?;
                record.binary.insert(var, parse_flag(v).ok_or_else(|| bad(k, v))?);
            }
        }
    }
    Ok(record)
}

fn dose_cmd(
    model_path: Option<PathBuf>,
    coefficients: Option<PathBuf>,
    allow_override: bool,
    pairs: &[String],
    out: &mut dyn Write,
) -> CliResult {
    let coeffs = load_coefficients(coefficients.as_deref(), allow_override).stage("loading coefficients")?;
    let model = model_path.map(|p| SvmModel::load(&p)).transpose().stage("loading model")?;
    let features: &[String] = model.as_ref().map_or(&[], |m| m.feature_names());
    let patient = parse_patient(pairs, features).stage("reading patient")?;
    let covariates = DoseCovariates::from_record(&patient);
    let sqrt_dose = covariates.sqrt_weekly_dose(&coeffs).stage("predicting dose")?;
    let dose = covariates.weekly_dose(&coeffs).stage("predicting dose")?;
    let mut text = format!("sqrt_dose={sqrt_dose:.4}\ndose_mg_week={dose:.3}\n");
    if let Some(model) = &model {
        let row = encode_features(std::slice::from_ref(&patient), model.feature_names(), Some(model.scaler()))
            .stage("encoding features")?;
        let decision = model.decision_value_encoded(row.row(0)).stage("gating")?;
        let label = GateLabel::from_sign(decision);
        let _ = writeln!(text, "label={label}\ndecision_value={decision:.6}");
        if label == GateLabel::HighRisk {
            text.push_str("recommendation=model not recommended\n");
        }
    }
    emit(out, &text).stage("output")
}

fn report_cmd(path: &Path, format: &str, out: &mut dyn Write) -> CliResult {
    let report = EvalReport::from_json(&read_file(path).stage("reading report")?).stage("reading report")?;
    let text = match format {
        "text" => report.render_text(),
        "tsv" => report.render_tsv(),
        "json" => report.to_json() + "\n",
        _ => return Err(Error::Usage(format!("unknown report format `{format}`"))).stage("configuration"),
    };
    emit(out, &text).stage("output")
}

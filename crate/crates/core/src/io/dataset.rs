//! Long-format CSV datasets.
//!
//! A data directory holds `choices.csv` (`individual_id, alternative_id,
//! available, chosen, <attribute>...`), `covariates.csv` (`individual_id,
//! <covariate>...`) and `indicators.csv` (`individual_id, indicator_id,
//! response`, 1-based surveyed levels). The covariate and indicator files
//! may be absent when the model has no covariates or indicators.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::data::{ChoiceDataset, Individual};
use crate::model::spec::CompiledModel;
use crate::real::Real;

pub const CHOICES_FILE: &str = "choices.csv";
pub const COVARIATES_FILE: &str = "covariates.csv";
pub const INDICATORS_FILE: &str = "indicators.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub choices: PathBuf,
    pub covariates: PathBuf,
    pub indicators: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            choices: dir.join(CHOICES_FILE),
            covariates: dir.join(COVARIATES_FILE),
            indicators: dir.join(INDICATORS_FILE),
        }
    }
}

/// Numeric ids sort numerically and before any other id; the rest sort
/// lexicographically.
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

fn invalid(msg: String) -> Error {
    Error::Validation(msg)
}

struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::parse(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::parse(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Self { path: path.to_path_buf(), header, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| invalid(format!("{}: missing column '{name}'", self.path.display())))
    }

    fn check_unique_header(&self) -> Result<()> {
        for (i, h) in self.header.iter().enumerate() {
            if self.header[..i].contains(h) {
                return Err(invalid(format!("{}: duplicate column '{h}'", self.path.display())));
            }
        }
        Ok(())
    }

    fn at(&self, line: u64) -> String {
        format!("{} line {line}", self.path.display())
    }
}

fn parse_flag(table: &Table, line: u64, column: &str, v: &str) -> Result<bool> {
    match v {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(invalid(format!("{}: '{column}' must be 0 or 1, got '{v}'", table.at(line)))),
    }
}

fn parse_number<T: Real>(table: &Table, line: u64, column: &str, v: &str, allow_empty: bool) -> Result<T> {
    if v.is_empty() && allow_empty {
        return Ok(T::nan());
    }
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(T::c(x)),
        _ => Err(invalid(format!("{}: '{column}' is not a finite number: '{v}'", table.at(line)))),
    }
}

struct ChoiceRows<T> {
    present: Vec<bool>,
    available: Vec<bool>,
    chosen: Vec<bool>,
    attributes: Vec<Vec<T>>,
}

/// Reads and cross-validates a dataset against `model`. Individuals are
/// ordered by id (see [`compare_ids`]); indicator levels are mapped to the
/// model's collapsed categories.
pub fn load_dataset<T: Real>(model: &CompiledModel, paths: &DatasetPaths) -> Result<ChoiceDataset<T>> {
    let n_alt = model.n_alternatives();
    let n_attr = model.attribute_names.len();

    let choices = Table::read(&paths.choices)?;
    choices.check_unique_header()?;
    let c_id = choices.column("individual_id")?;
    let c_alt = choices.column("alternative_id")?;
    let c_av = choices.column("available")?;
    let c_ch = choices.column("chosen")?;
    let c_attrs: Vec<usize> = model
        .attribute_names
        .iter()
        .map(|a| choices.column(a))
        .collect::<Result<_>>()?;

    let mut by_id: BTreeMap<String, ChoiceRows<T>> = BTreeMap::new();
    for (line, row) in &choices.rows {
        let line = *line;
        let id = &row[c_id];
        if id.is_empty() {
            return Err(invalid(format!("{}: empty individual_id", choices.at(line))));
        }
        let alt = model
            .alternative_index(&row[c_alt])
            .ok_or_else(|| invalid(format!("{}: unknown alternative '{}'", choices.at(line), row[c_alt])))?;
        let available = parse_flag(&choices, line, "available", &row[c_av])?;
        let chosen = parse_flag(&choices, line, "chosen", &row[c_ch])?;
        let entry = by_id.entry(id.clone()).or_insert_with(|| ChoiceRows {
            present: vec![false; n_alt],
            available: vec![false; n_alt],
            chosen: vec![false; n_alt],
            attributes: vec![vec![T::nan(); n_attr]; n_alt],
        });
        if std::mem::replace(&mut entry.present[alt], true) {
            return Err(invalid(format!(
                "{}: duplicate row for individual {id} and alternative '{}'",
                choices.at(line),
                row[c_alt]
            )));
        }
        if chosen && !available {
            return Err(invalid(format!("chosen alternative unavailable for individual {id}")));
        }
        entry.available[alt] = available;
        entry.chosen[alt] = chosen;
        for (k, &c) in c_attrs.iter().enumerate() {
            entry.attributes[alt][k] = parse_number(&choices, line, &model.attribute_names[k], &row[c], true)?;
        }
    }

    let covariates = read_covariates::<T, _>(model, &paths.covariates, &by_id)?;
    let responses = read_indicators(model, &paths.indicators, &by_id)?;

    let mut ids: Vec<&String> = by_id.keys().collect();
    ids.sort_by(|a, b| compare_ids(a, b));
    let mut data = ChoiceDataset::empty(model);
    for id in ids {
        let rows = &by_id[id];
        let available: Vec<usize> = (0..n_alt).filter(|&a| rows.available[a]).collect();
        let chosen: Vec<usize> = (0..n_alt).filter(|&a| rows.chosen[a]).collect();
        if available.is_empty() {
            return Err(invalid(format!("individual {id} has no available alternative")));
        }
        if chosen.len() != 1 {
            return Err(invalid(format!(
                "individual {id} must have exactly one chosen alternative, found {}",
                chosen.len()
            )));
        }
        data.individuals.push(Individual {
            id: id.clone(),
            z: covariates.get(id).cloned().unwrap_or_default(),
            available,
            chosen: chosen[0],
            responses: responses.get(id).cloned().unwrap_or_else(|| vec![None; model.n_indicators()]),
            attributes: rows.attributes.clone(),
        });
    }
    data.validate(model)?;
    Ok(data)
}

fn read_covariates<T: Real, R>(
    model: &CompiledModel,
    path: &Path,
    individuals: &BTreeMap<String, R>,
) -> Result<BTreeMap<String, Vec<T>>> {
    let mut out = BTreeMap::new();
    if model.n_covariates() == 0 && !path.exists() {
        for id in individuals.keys() {
            out.insert(id.clone(), Vec::new());
        }
        return Ok(out);
    }
    let table = Table::read(path)?;
    table.check_unique_header()?;
    let c_id = table.column("individual_id")?;
    let cols: Vec<usize> = model
        .covariate_names
        .iter()
        .map(|c| table.column(c))
        .collect::<Result<_>>()?;
    for (line, row) in &table.rows {
        let id = &row[c_id];
        if !individuals.contains_key(id) {
            return Err(invalid(format!("{}: covariates for unknown individual {id}", table.at(*line))));
        }
        let z = cols
            .iter()
            .enumerate()
            .map(|(k, &c)| parse_number(&table, *line, &model.covariate_names[k], &row[c], false))
            .collect::<Result<Vec<T>>>()?;
        if out.insert(id.clone(), z).is_some() {
            return Err(invalid(format!("{}: duplicate covariate row for individual {id}", table.at(*line))));
        }
    }
    if let Some(id) = individuals.keys().find(|id| !out.contains_key(*id)) {
        return Err(invalid(format!("covariates missing for individual {id}")));
    }
    Ok(out)
}

/// Responses per individual from an indicator file alone, as collapsed
/// category indices in model indicator order.
pub fn load_indicator_responses(model: &CompiledModel, path: &Path) -> Result<BTreeMap<String, Vec<Option<u8>>>> {
    read_indicator_file(model, path, |_| true)
}

fn read_indicators<R>(
    model: &CompiledModel,
    path: &Path,
    individuals: &BTreeMap<String, R>,
) -> Result<BTreeMap<String, Vec<Option<u8>>>> {
    read_indicator_file(model, path, |id| individuals.contains_key(id))
}

fn read_indicator_file(
    model: &CompiledModel,
    path: &Path,
    known: impl Fn(&str) -> bool,
) -> Result<BTreeMap<String, Vec<Option<u8>>>> {
    let mut out: BTreeMap<String, Vec<Option<u8>>> = BTreeMap::new();
    if model.n_indicators() == 0 && !path.exists() {
        return Ok(out);
    }
    let table = Table::read(path)?;
    let c_id = table.column("individual_id")?;
    let c_ind = table.column("indicator_id")?;
    let c_resp = table.column("response")?;
    for (line, row) in &table.rows {
        let id = &row[c_id];
        if !known(id) {
            return Err(invalid(format!("{}: responses for unknown individual {id}", table.at(*line))));
        }
        let q = model
            .indicators
            .iter()
            .position(|i| i.id == row[c_ind])
            .ok_or_else(|| invalid(format!("{}: unknown indicator '{}'", table.at(*line), row[c_ind])))?;
        let info = &model.indicators[q];
        let level: Option<u8> = row[c_resp].parse().ok();
        let category = level.and_then(|l| info.levels.iter().position(|&v| v == l)).ok_or_else(|| {
            invalid(format!(
                "{}: response '{}' out of range for indicator {} of individual {id} (allowed levels {:?})",
                table.at(*line),
                row[c_resp],
                info.id,
                info.levels
            ))
        })?;
        let slots = out.entry(id.clone()).or_insert_with(|| vec![None; model.n_indicators()]);
        if slots[q].replace(category as u8).is_some() {
            return Err(invalid(format!(
                "{}: duplicate response for individual {id} and indicator {}",
                table.at(*line),
                info.id
            )));
        }
    }
    Ok(out)
}

fn fmt_value<T: Real>(v: T) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn create(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::parse(path, e)
}

/// Writes the canonical form: one choice row per (individual, alternative),
/// covariates in model order, responses as surveyed levels.
pub fn write_dataset<T: Real>(model: &CompiledModel, data: &ChoiceDataset<T>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = DatasetPaths::in_dir(dir);

    let mut w = create(&paths.choices)?;
    let e = csv_err(&paths.choices);
    let mut header = vec!["individual_id".to_string(), "alternative_id".into(), "available".into(), "chosen".into()];
    header.extend(model.attribute_names.iter().cloned());
    w.write_record(&header).map_err(&e)?;
    for ind in &data.individuals {
        for (a, alt) in model.alternative_ids.iter().enumerate() {
            let mut rec = vec![
                ind.id.clone(),
                alt.clone(),
                (ind.is_available(a) as u8).to_string(),
                ((ind.chosen == a) as u8).to_string(),
            ];
            rec.extend(ind.attributes[a].iter().map(|&v| fmt_value(v)));
            w.write_record(&rec).map_err(&e)?;
        }
    }
    w.flush().map_err(|e| Error::io(&paths.choices, e))?;

    if model.n_covariates() > 0 {
        let mut w = create(&paths.covariates)?;
        let e = csv_err(&paths.covariates);
        let mut header = vec!["individual_id".to_string()];
        header.extend(model.covariate_names.iter().cloned());
        w.write_record(&header).map_err(&e)?;
        for ind in &data.individuals {
            let mut rec = vec![ind.id.clone()];
            rec.extend(ind.z.iter().map(|&v| fmt_value(v)));
            w.write_record(&rec).map_err(&e)?;
        }
        w.flush().map_err(|e| Error::io(&paths.covariates, e))?;
    }

    if model.n_indicators() > 0 {
        let mut w = create(&paths.indicators)?;
        let e = csv_err(&paths.indicators);
        w.write_record(["individual_id", "indicator_id", "response"]).map_err(&e)?;
        for ind in &data.individuals {
            for (q, r) in ind.responses.iter().enumerate() {
                if let Some(c) = r {
                    let info = &model.indicators[q];
                    w.write_record([ind.id.as_str(), info.id.as_str(), &info.levels[*c as usize].to_string()])
                        .map_err(&e)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(&paths.indicators, e))?;
    }
    Ok(())
}

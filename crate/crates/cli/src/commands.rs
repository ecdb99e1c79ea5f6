use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hdcm_core::io::draws::MANIFEST_FILE;
use hdcm_core::io::tables::{
    write_diagnostics, write_fit, write_mwtp_distribution, write_mwtp_records, write_regression, write_share_table,
    write_summary,
};
use hdcm_core::io::{
    generate_synthetic, indicator_file_reliability, load_dataset, read_population, read_posterior_dir,
    write_posterior_dir, write_synthetic, DatasetPaths, ModelSpecFile, TruthSpec,
};
use hdcm_core::model::spec::CovarianceMode;
use hdcm_core::posterior::{
    mwtp_distribution, mwtp_records, mwtp_regression, plugin_choice_loglik, scale_unit_variance, summarize,
};
use hdcm_core::sampler::diagnostics::{convergence_diagnostics, diagnose_series};
use hdcm_core::sampler::run_chains;
use hdcm_core::scenario::{share_delta_table, ScenarioSpec};
use hdcm_core::{ChoiceDataset, CompiledModel, Error, PosteriorDraws, Result};
use serde::Deserialize;

use crate::VERSION;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Writes to `path`, or to standard output when `None`.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(create(p)?)),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

/// Expands each path to its chain directories: a path holding a manifest is
/// a chain itself, otherwise its sub-directories holding one are taken in
/// name order.
pub fn chain_dirs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.join(MANIFEST_FILE).is_file() {
            out.push(p.clone());
            continue;
        }
        let mut subs: Vec<PathBuf> = std::fs::read_dir(p)
            .map_err(io_err(p))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|d| d.join(MANIFEST_FILE).is_file())
            .collect();
        if subs.is_empty() {
            return Err(Error::Config(format!("{}: no posterior chain directories found", p.display())));
        }
        subs.sort();
        out.extend(subs);
    }
    Ok(out)
}

fn read_chains(model: &CompiledModel, paths: &[PathBuf]) -> Result<Vec<PosteriorDraws>> {
    chain_dirs(paths)?.iter().map(|d| read_posterior_dir(model, d)).collect()
}

fn load_data(model: &CompiledModel, dir: &Path) -> Result<ChoiceDataset> {
    let data = load_dataset(model, &DatasetPaths::in_dir(dir))?;
    if data.is_empty() {
        return Err(Error::Validation(format!("{}: dataset has no individuals", dir.display())));
    }
    Ok(data)
}

/// Free parameters of the choice model counted for the adjusted ρ².
fn choice_parameter_count(model: &CompiledModel) -> usize {
    let k = model.n_random();
    let omega = match model.covariance() {
        CovarianceMode::Diagonal => k,
        CovarianceMode::Full => k * (k + 1) / 2,
    };
    model.n_fixed() + k + omega
}

pub fn estimate(spec: &Path, data_dir: &Path, out: &Path, chains: Option<usize>, seed: Option<u64>) -> Result<()> {
    let (file, model) = ModelSpecFile::load(spec)?;
    let mut config = file.sampler;
    if let Some(c) = chains {
        config.n_chains = c;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    let data = load_data(&model, data_dir)?;
    log::info!(
        "{} individuals, {} chains of {} sweeps ({} burn-in)",
        data.len(),
        config.n_chains,
        config.n_sweeps,
        config.burn_in
    );
    let draws = run_chains(&model, &data, &config)?;

    std::fs::create_dir_all(out).map_err(io_err(out))?;
    for d in &draws {
        write_posterior_dir(&model, d, &out.join(format!("chain_{}", d.chain)), VERSION)?;
    }
    let ll0 = data.null_loglik();
    let ll = plugin_choice_loglik(&model, &data, &draws)?;
    let summary = summarize(&draws, ll0, ll, choice_parameter_count(&model))?;
    write_summary(&summary, create(&out.join("summary.csv"))?)?;
    write_fit(&summary, create(&out.join("fit.csv"))?)?;
    log::info!("rho-squared {:.4}", summary.fit.rho_squared);

    if draws.iter().all(|d| d.len() >= 4) {
        let diagnostics = convergence_diagnostics(&draws)?;
        let flagged: Vec<&str> =
            diagnostics.iter().filter(|d| d.not_converged).map(|d| d.name.as_str()).collect();
        if !flagged.is_empty() {
            log::warn!("not converged: {}", flagged.join(", "));
        }
        write_diagnostics(&diagnostics, create(&out.join("diagnostics.csv"))?)?;
    } else {
        log::warn!("too few stored draws for convergence diagnostics");
    }
    Ok(())
}

pub fn simulate(spec: &Path, truth: &Path, n: usize, seed: u64, out: &Path) -> Result<()> {
    let (_, model) = ModelSpecFile::load(spec)?;
    let truth_spec = TruthSpec::load(truth)?;
    let synthetic = generate_synthetic::<f64>(&model, &truth_spec, n, seed)?;
    write_synthetic(&model, &truth_spec, &synthetic, out)
}

#[derive(Debug, Default, Deserialize)]
struct ScenarioFile {
    #[serde(default)]
    scenarios: Vec<ScenarioSpec>,
}

fn load_scenarios(path: &Path) -> Result<Vec<ScenarioSpec>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let file: ScenarioFile =
        toml::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(file.scenarios)
}

pub fn predict(
    spec: &Path,
    data_dir: &Path,
    posterior: &[PathBuf],
    scenarios: Option<&Path>,
    out: Option<&Path>,
    seed: u64,
) -> Result<()> {
    let (_, model) = ModelSpecFile::load(spec)?;
    let data = load_data(&model, data_dir)?;
    let scenarios = scenarios.map(load_scenarios).transpose()?.unwrap_or_default();
    let draws = read_chains(&model, posterior)?;
    let table = share_delta_table(&model, &data, &draws, &scenarios, seed)?;
    write_share_table(&table, output(out)?)
}

fn read_characteristics(path: &Path) -> Result<(Vec<String>, BTreeMap<String, Vec<f64>>)> {
    let parse = |m: String| Error::Parse { path: path.to_path_buf(), message: m };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse(e.to_string()))?;
    let header: Vec<String> = reader.headers().map_err(|e| parse(e.to_string()))?.iter().map(String::from).collect();
    if header.first().map(String::as_str) != Some("individual_id") || header.len() < 2 {
        return Err(Error::Validation(format!(
            "{}: expected 'individual_id' followed by at least one characteristic",
            path.display()
        )));
    }
    let mut rows = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse(e.to_string()))?;
        let id = rec[0].to_string();
        let values = rec
            .iter()
            .skip(1)
            .zip(&header[1..])
            .map(|(v, name)| match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(Error::Validation(format!(
                    "{}: '{name}' of individual {id} is not a finite number: '{v}'",
                    path.display()
                ))),
            })
            .collect::<Result<Vec<f64>>>()?;
        if rows.insert(id.clone(), values).is_some() {
            return Err(Error::Validation(format!("{}: duplicate individual {id}", path.display())));
        }
    }
    Ok((header[1..].to_vec(), rows))
}

pub fn mwtp(
    spec: &Path,
    posterior: &[PathBuf],
    attribute: &str,
    regress: Option<&Path>,
    unit_factor: f64,
    out: Option<&Path>,
) -> Result<()> {
    if !(unit_factor.is_finite() && unit_factor != 0.0) {
        return Err(Error::Config(format!("unit factor must be finite and non-zero, got {unit_factor}")));
    }
    let (_, model) = ModelSpecFile::load(spec)?;
    let draws = read_chains(&model, posterior)?;
    let records: Vec<_> = mwtp_records(&model, &draws, attribute)?
        .into_iter()
        .map(|r| r.scaled(unit_factor))
        .collect();
    let flagged = records.iter().filter(|r| !r.usable()).count();
    if flagged > 0 {
        log::warn!("{flagged} individuals have an unstable or undefined ratio and are excluded");
    }
    let distribution = mwtp_distribution(attribute, &records)?;
    let regression = regress
        .map(|path| {
            let (names, rows) = read_characteristics(path)?;
            let q = records
                .iter()
                .map(|r| {
                    rows.get(&r.individual_id).cloned().ok_or_else(|| {
                        Error::Validation(format!("{}: no row for individual {}", path.display(), r.individual_id))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let (scaled, _) = scale_unit_variance(&q);
            mwtp_regression(&records, &scaled, &names)
        })
        .transpose()?;

    let mut stdout = std::io::stdout().lock();
    write_mwtp_distribution(&distribution, &mut stdout)?;
    if let Some(r) = &regression {
        writeln!(stdout).map_err(|e| Error::Numeric(e.to_string()))?;
        write_regression(r, &mut stdout)?;
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_mwtp_records(&records, create(&dir.join("mwtp_individual.csv"))?)?;
        write_mwtp_distribution(&distribution, create(&dir.join("mwtp_distribution.csv"))?)?;
        if let Some(r) = &regression {
            write_regression(r, create(&dir.join("mwtp_regression.csv"))?)?;
        }
    }
    Ok(())
}

pub fn diagnose(posterior: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let dirs = chain_dirs(posterior)?;
    let mut names: Option<Vec<String>> = None;
    let mut series = Vec::with_capacity(dirs.len());
    for d in &dirs {
        let (manifest, rows) = read_population(d)?;
        match &names {
            Some(n) if *n != manifest.parameter_names => {
                return Err(Error::Config(format!("{}: chain describes different parameters", d.display())));
            }
            _ => names = Some(manifest.parameter_names.clone()),
        }
        let p = manifest.parameter_names.len();
        series.push((0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect::<Vec<Vec<f64>>>());
    }
    let names = names.unwrap_or_default();
    let diagnostics = diagnose_series(&names, &series)?;
    for d in diagnostics.iter().filter(|d| d.not_converged) {
        log::warn!("{} not converged (R-hat {:?})", d.name, d.rhat);
    }
    write_diagnostics(&diagnostics, output(out)?)
}

pub fn check_reliability(indicators: &Path, spec: &Path) -> Result<()> {
    let (_, model) = ModelSpecFile::load(spec)?;
    let results = indicator_file_reliability(&model, indicators)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(std::io::stdout().lock());
    let fail = |e: csv::Error| Error::Numeric(e.to_string());
    w.write_record(["latent_variable", "n_items", "n_respondents", "alpha", "pass", "zero_variance"]).map_err(fail)?;
    for (name, result) in results {
        let row = match result {
            None => vec![name, "1".into(), String::new(), String::new(), String::new(), String::new()],
            Some(r) => {
                let r = r?;
                if !r.pass {
                    log::warn!("{name}: items below the reliability threshold");
                }
                vec![
                    name,
                    r.n_items.to_string(),
                    r.n_respondents.to_string(),
                    r.alpha.map_or_else(String::new, |a| a.to_string()),
                    (r.pass as u8).to_string(),
                    (r.zero_variance as u8).to_string(),
                ]
            }
        };
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::Numeric(e.to_string()))
}

//! Posterior output directories.
//!
//! One directory per chain:
//! - `manifest.json`: version, chain index, sampler config, parameter names
//!   and acceptance rates
//! - `gamma.csv`, `zeta.csv`, `tau.csv`, `fixed.csv`, `mu.csv`, `omega.csv`:
//!   one row per stored draw (`draw,<parameter>...`), blocks without
//!   parameters omitted
//! - `individual_beta.csv`, `individual_alpha.csv`: posterior mean and SD
//!   of each individual's random coefficients and latent values
//! - `beta_draws.csv`, `alpha_draws.csv`: per-draw individual values, only
//!   when individual draws were stored
//!
//! Numbers are written in shortest round-trip form, so reading a directory
//! back reproduces the draws bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::spec::CompiledModel;
use crate::model::state::ParameterState;
use crate::sampler::chain::{BlockAcceptance, PosteriorDraws};
use crate::sampler::config::SamplerConfig;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOCKS: [&str; 6] = ["gamma", "zeta", "tau", "fixed", "mu", "omega"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub version: String,
    pub chain: usize,
    pub seed: u64,
    pub n_stored: usize,
    pub config: SamplerConfig<f64>,
    pub parameter_names: Vec<String>,
    pub random_coefficients: Vec<String>,
    pub latent_variables: Vec<String>,
    pub individual_draws: bool,
    pub acceptance: Vec<BlockAcceptance>,
}

fn block_of(name: &str) -> &str {
    name.split('.').next().unwrap_or("")
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| Error::parse(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Error::parse(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn moment_header(names: &[String]) -> Vec<String> {
    let mut h = vec!["individual_id".to_string()];
    for n in names {
        h.push(format!("{n}.mean"));
        h.push(format!("{n}.sd"));
    }
    h
}

/// Writes one chain's draws into `dir`, creating it if needed.
pub fn write_posterior_dir(model: &CompiledModel, draws: &PosteriorDraws<f64>, dir: &Path, version: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let random: Vec<String> = model.random.iter().map(|c| c.name.clone()).collect();
    let manifest = Manifest {
        format: 1,
        version: version.to_string(),
        chain: draws.chain,
        seed: draws.config.seed,
        n_stored: draws.len(),
        config: draws.config.clone(),
        parameter_names: draws.parameter_names.clone(),
        random_coefficients: random.clone(),
        latent_variables: model.latent_names.clone(),
        individual_draws: draws.has_individual_draws(),
        acceptance: draws.acceptance.clone(),
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    for block in BLOCKS {
        let cols: Vec<usize> = (0..draws.parameter_names.len())
            .filter(|&j| block_of(&draws.parameter_names[j]) == block)
            .collect();
        if cols.is_empty() {
            continue;
        }
        let mut header = vec!["draw".to_string()];
        header.extend(cols.iter().map(|&j| draws.parameter_names[j].clone()));
        let rows = draws.population.iter().enumerate().map(|(d, row)| {
            std::iter::once(d.to_string()).chain(cols.iter().map(|&j| row[j].to_string())).collect()
        });
        write_rows(&dir.join(format!("{block}.csv")), &header, rows)?;
    }

    let moment_rows = |mean: &[Vec<f64>], sd: &[Vec<f64>]| -> Vec<Vec<String>> {
        draws
            .individual_ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                let mut r = vec![id.clone()];
                for (m, s) in mean[i].iter().zip(&sd[i]) {
                    r.push(m.to_string());
                    r.push(s.to_string());
                }
                r
            })
            .collect()
    };
    if !random.is_empty() {
        write_rows(
            &dir.join("individual_beta.csv"),
            &moment_header(&random),
            moment_rows(&draws.beta_mean, &draws.beta_sd).into_iter(),
        )?;
    }
    if model.n_latent() > 0 {
        write_rows(
            &dir.join("individual_alpha.csv"),
            &moment_header(&model.latent_names),
            moment_rows(&draws.alpha_mean, &draws.alpha_sd).into_iter(),
        )?;
    }

    if manifest.individual_draws {
        let long = |names: &[String], pick: fn(&ParameterState<f64>) -> &Vec<Vec<f64>>| {
            let mut header = vec!["draw".to_string(), "individual_id".to_string()];
            header.extend(names.iter().cloned());
            let rows = draws.states.iter().enumerate().flat_map(move |(d, s)| {
                pick(s).iter().zip(&draws.individual_ids).map(move |(v, id)| {
                    [d.to_string(), id.clone()].into_iter().chain(v.iter().map(|x| x.to_string())).collect()
                })
            });
            (header, rows)
        };
        if !random.is_empty() {
            let (h, rows) = long(&random, |s| &s.beta);
            write_rows(&dir.join("beta_draws.csv"), &h, rows)?;
        }
        if model.n_latent() > 0 {
            let (h, rows) = long(&model.latent_names, |s| &s.alpha);
            write_rows(&dir.join("alpha_draws.csv"), &h, rows)?;
        }
    }
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path, e))
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_csv(path: &Path) -> Result<Csv> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| Error::parse(path, e))?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()).map_err(|e| Error::parse(path, e)))
        .collect::<Result<_>>()?;
    Ok(Csv { header, rows })
}

fn parse_f64(path: &Path, v: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::parse(path, format!("not a number: '{v}'")))
}

/// Population draws of a chain directory: names and one row per draw.
pub fn read_population(dir: &Path) -> Result<(Manifest, Vec<Vec<f64>>)> {
    let manifest = read_manifest(dir)?;
    let mut rows = vec![Vec::with_capacity(manifest.parameter_names.len()); manifest.n_stored];
    let mut names = Vec::new();
    for block in BLOCKS {
        let path = dir.join(format!("{block}.csv"));
        if !manifest.parameter_names.iter().any(|n| block_of(n) == block) {
            continue;
        }
        let csv = read_csv(&path)?;
        if csv.rows.len() != manifest.n_stored {
            return Err(Error::parse(
                &path,
                format!("expected {} draws, found {}", manifest.n_stored, csv.rows.len()),
            ));
        }
        names.extend(csv.header.iter().skip(1).cloned());
        for (d, rec) in csv.rows.iter().enumerate() {
            if rec.first().map(String::as_str) != Some(d.to_string().as_str()) {
                return Err(Error::parse(&path, format!("draw column out of sequence at draw {d}")));
            }
            for v in &rec[1..] {
                rows[d].push(parse_f64(&path, v)?);
            }
        }
    }
    if names != manifest.parameter_names {
        return Err(Error::parse(dir, "block files do not match the manifest's parameter names"));
    }
    Ok((manifest, rows))
}

fn read_moments(path: &Path, names: &[String], ids: &mut Vec<String>) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let csv = read_csv(path)?;
    if csv.header != moment_header(names) {
        return Err(Error::parse(path, "unexpected columns"));
    }
    let fresh = ids.is_empty();
    let (mut mean, mut sd) = (Vec::new(), Vec::new());
    for (i, rec) in csv.rows.iter().enumerate() {
        if fresh {
            ids.push(rec[0].clone());
        } else if ids.get(i) != Some(&rec[0]) {
            return Err(Error::parse(path, "individual ids disagree with other files"));
        }
        let vals = rec[1..].iter().map(|v| parse_f64(path, v)).collect::<Result<Vec<_>>>()?;
        mean.push(vals.iter().step_by(2).copied().collect());
        sd.push(vals.iter().skip(1).step_by(2).copied().collect());
    }
    Ok((mean, sd))
}

fn read_long(path: &Path, n_draws: usize, ids: &[String], width: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    let csv = read_csv(path)?;
    if csv.rows.len() != n_draws * ids.len() {
        return Err(Error::parse(path, "row count does not match draws × individuals"));
    }
    let mut out = vec![Vec::with_capacity(ids.len()); n_draws];
    for (k, rec) in csv.rows.iter().enumerate() {
        let (d, i) = (k / ids.len(), k % ids.len());
        if rec.len() != width + 2 || rec[0] != d.to_string() || rec[1] != ids[i] {
            return Err(Error::parse(path, format!("malformed row {}", k + 1)));
        }
        out[d].push(rec[2..].iter().map(|v| parse_f64(path, v)).collect::<Result<_>>()?);
    }
    Ok(out)
}

/// Reads a chain directory written by [`write_posterior_dir`] for `model`.
pub fn read_posterior_dir(model: &CompiledModel, dir: &Path) -> Result<PosteriorDraws<f64>> {
    let (manifest, population) = read_population(dir)?;
    if manifest.parameter_names != model.population_names() {
        return Err(Error::Config(format!(
            "{}: posterior was produced for a different model layout",
            dir.display()
        )));
    }
    let mut states = population
        .iter()
        .map(|row| ParameterState::from_population_vector(model, row))
        .collect::<Result<Vec<_>>>()?;

    let mut ids = Vec::new();
    let random = &manifest.random_coefficients;
    let (beta_mean, beta_sd) = if random.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        read_moments(&dir.join("individual_beta.csv"), random, &mut ids)?
    };
    let (alpha_mean, alpha_sd) = if model.n_latent() == 0 {
        (Vec::new(), Vec::new())
    } else {
        read_moments(&dir.join("individual_alpha.csv"), &model.latent_names, &mut ids)?
    };
    let n = ids.len();
    let (beta_mean, beta_sd) = if random.is_empty() { (vec![Vec::new(); n], vec![Vec::new(); n]) } else { (beta_mean, beta_sd) };
    let (alpha_mean, alpha_sd) =
        if model.n_latent() == 0 { (vec![Vec::new(); n], vec![Vec::new(); n]) } else { (alpha_mean, alpha_sd) };

    if manifest.individual_draws {
        if !random.is_empty() {
            let beta = read_long(&dir.join("beta_draws.csv"), states.len(), &ids, random.len())?;
            for (s, b) in states.iter_mut().zip(beta) {
                s.beta = b;
            }
        }
        if model.n_latent() > 0 {
            let alpha = read_long(&dir.join("alpha_draws.csv"), states.len(), &ids, model.n_latent())?;
            for (s, a) in states.iter_mut().zip(alpha) {
                s.alpha = a;
            }
        }
        for s in states.iter_mut() {
            if s.beta.is_empty() {
                s.beta = vec![Vec::new(); n];
            }
            if s.alpha.is_empty() {
                s.alpha = vec![Vec::new(); n];
            }
        }
    }

    Ok(PosteriorDraws {
        chain: manifest.chain,
        config: manifest.config,
        parameter_names: manifest.parameter_names,
        states,
        population,
        acceptance: manifest.acceptance,
        individual_ids: ids,
        beta_mean,
        beta_sd,
        alpha_mean,
        alpha_sd,
    })
}

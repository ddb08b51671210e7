use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SweepParam};
use super::{EmpiricalRisks, HarnessError, SweepRow};
use crate::mcmc::GENERATOR;

pub const ESTIMATE_COLUMNS: [&str; 6] = ["a_bs", "b_bs", "a_bl", "b_bl", "a_be", "b_be"];
pub const VARIANCE_COLUMNS: [&str; 6] = ["v_a_bs", "v_b_bs", "v_a_bl", "v_b_bl", "v_a_be", "v_b_be"];
const RISK_COLUMNS: [&str; 3] = ["r_bs", "r_bl", "r_be"];
const DIAGNOSTIC_COLUMNS: [&str; 6] =
    ["repetitions", "failed", "divergent_a_be", "divergent_b_be", "ties_broken", "acceptance_rate"];

const NA: &str = "NA";

/// Sidecar describing how a set of tables was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub generator: String,
    pub entropy_mode: String,
    pub config_hash: String,
    pub config: String,
    pub sweep_parameter: String,
    pub repetitions: usize,
    pub version: String,
    pub created_unix: u64,
}

impl RunMetadata {
    pub fn for_config(config: &ExperimentConfig) -> Self {
        Self {
            seed: config.seed,
            generator: GENERATOR.to_string(),
            entropy_mode: config.entropy_mode.as_str().to_string(),
            config_hash: config.hash(),
            config: config.to_string(),
            sweep_parameter: config.sweep.param.to_string(),
            repetitions: config.repetitions,
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedFiles {
    pub estimates: PathBuf,
    pub variances: PathBuf,
    pub risks: PathBuf,
    pub diagnostics: PathBuf,
    pub metadata: PathBuf,
}

impl EmittedFiles {
    fn in_dir(dir: &Path) -> Self {
        Self {
            estimates: dir.join("estimates.csv"),
            variances: dir.join("variances.csv"),
            risks: dir.join("risks.csv"),
            diagnostics: dir.join("diagnostics.csv"),
            metadata: dir.join("metadata.json"),
        }
    }

    pub fn tables(&self) -> [&Path; 4] {
        [&self.estimates, &self.variances, &self.risks, &self.diagnostics]
    }
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn swept(param: SweepParam, x: f64) -> String {
    if param.is_integer() {
        format!("{}", x as u64)
    } else {
        float(x)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv { path: path.display().to_string(), source }
}

fn write_csv(path: &Path, header: Vec<&str>, rows: Vec<Vec<String>>) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path).map_err(csv_err(path))?;
    w.write_record(&header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the four tables and the metadata sidecar into `dir`.
pub fn emit_tables(
    rows: &[SweepRow],
    param: SweepParam,
    metadata: &RunMetadata,
    dir: &Path,
) -> Result<EmittedFiles, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyBeforeWrite);
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = EmittedFiles::in_dir(dir);
    let name = param.name();

    let with_value = |row: &SweepRow, rest: Vec<String>| {
        let mut out = vec![swept(param, row.value)];
        out.extend(rest);
        out
    };
    let header = |cols: &[&'static str]| {
        let mut h = vec![name];
        h.extend_from_slice(cols);
        h
    };

    write_csv(
        &files.estimates,
        header(&ESTIMATE_COLUMNS),
        rows.iter().map(|r| with_value(r, r.means.iter().map(|&x| float(x)).collect())).collect(),
    )?;
    write_csv(
        &files.variances,
        header(&VARIANCE_COLUMNS),
        rows.iter().map(|r| with_value(r, r.variances.iter().map(|&x| float(x)).collect())).collect(),
    )?;
    write_csv(
        &files.risks,
        header(&RISK_COLUMNS),
        rows.iter()
            .map(|r| {
                let be = r.risks.r_be.map(float).unwrap_or_else(|| NA.to_string());
                with_value(r, vec![float(r.risks.r_bs), float(r.risks.r_bl), be])
            })
            .collect(),
    )?;
    write_csv(
        &files.diagnostics,
        header(&DIAGNOSTIC_COLUMNS),
        rows.iter()
            .map(|r| {
                with_value(
                    r,
                    vec![
                        r.repetitions.to_string(),
                        r.failed.to_string(),
                        r.divergent_a_be.to_string(),
                        r.divergent_b_be.to_string(),
                        r.ties_broken.to_string(),
                        float(r.acceptance_rate),
                    ],
                )
            })
            .collect(),
    )?;
    let json = serde_json::to_string_pretty(metadata)?;
    fs::write(&files.metadata, json + "\n").map_err(io_err(&files.metadata))?;
    Ok(files)
}

fn read_csv(path: &Path, expected: &[&str]) -> Result<Vec<Vec<String>>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    if header.len() != expected.len() + 1 || header[1..] != *expected {
        return Err(HarnessError::Malformed { path: path.display().to_string(), message: format!("unexpected header {header:?}") });
    }
    r.records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()).map_err(csv_err(path)))
        .collect()
}

fn parse<T: std::str::FromStr>(path: &Path, s: &str) -> Result<T, HarnessError> {
    s.parse().map_err(|_| HarnessError::Malformed { path: path.display().to_string(), message: format!("bad number `{s}`") })
}

fn six(path: &Path, rec: &[String]) -> Result<[f64; 6], HarnessError> {
    let mut out = [0.0; 6];
    for (o, s) in out.iter_mut().zip(&rec[1..]) {
        *o = parse(path, s)?;
    }
    Ok(out)
}

/// Reads tables written by [`emit_tables`] back into rows.
pub fn read_tables(dir: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let files = EmittedFiles::in_dir(dir);
    let est = read_csv(&files.estimates, &ESTIMATE_COLUMNS)?;
    let var = read_csv(&files.variances, &VARIANCE_COLUMNS)?;
    let risk = read_csv(&files.risks, &RISK_COLUMNS)?;
    let diag = read_csv(&files.diagnostics, &DIAGNOSTIC_COLUMNS)?;
    if [var.len(), risk.len(), diag.len()].iter().any(|&l| l != est.len()) {
        return Err(HarnessError::Malformed { path: dir.display().to_string(), message: "tables differ in length".into() });
    }
    let mut rows = Vec::with_capacity(est.len());
    for i in 0..est.len() {
        let (e, v, k, d) = (&est[i], &var[i], &risk[i], &diag[i]);
        let value: f64 = parse(&files.estimates, &e[0])?;
        let r_be = if k[3] == NA { None } else { Some(parse(&files.risks, &k[3])?) };
        rows.push(SweepRow {
            value,
            means: six(&files.estimates, e)?,
            variances: six(&files.variances, v)?,
            risks: EmpiricalRisks { r_bs: parse(&files.risks, &k[1])?, r_bl: parse(&files.risks, &k[2])?, r_be },
            repetitions: parse(&files.diagnostics, &d[1])?,
            failed: parse(&files.diagnostics, &d[2])?,
            divergent_a_be: parse(&files.diagnostics, &d[3])?,
            divergent_b_be: parse(&files.diagnostics, &d[4])?,
            ties_broken: parse(&files.diagnostics, &d[5])?,
            acceptance_rate: parse(&files.diagnostics, &d[6])?,
        });
    }
    Ok(rows)
}

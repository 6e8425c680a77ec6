//! On-disk run artifacts: columnar draw files (one per chain), end-state
//! sidecars for warm starts, and the run manifest.
//!
//! Draw files are plain CSV with a one-line header naming every column;
//! floats are written in shortest-round-trip form, so identical runs
//! produce byte-identical files and re-reading loses nothing. The
//! manifest records what produced the run — model, kernel, seed, chain
//! count, dataset checksum, versions, wall time — and pins the dataset
//! so `predict` can refuse a mutated input.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::{AdaptSnapshot, EndState};

pub fn draws_path(dir: &Path, chain: usize) -> PathBuf {
    dir.join(format!("draws_chain_{chain}.csv"))
}

pub fn end_state_path(dir: &Path, chain: usize) -> PathBuf {
    dir.join(format!("end_state_chain_{chain}.toml"))
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.toml")
}

/// What produced a run directory. Wall time and creation stamp vary
/// between runs; the byte-identity guarantee covers the draw files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// Producing tool, `name version`.
    pub tool: String,
    pub created_unix: u64,
    pub wall_time_secs: f64,
    pub model: String,
    pub kernel: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matern_nu: Option<f64>,
    pub seed: u64,
    pub n_chains: u32,
    pub iters: u64,
    pub burnin: u64,
    pub thin: u64,
    pub n_sites: usize,
    /// π-centering rotation applied during the fit (0 for projected).
    pub shift: f64,
    pub data_path: String,
    pub data_sha256: String,
    pub param_names: Vec<String>,
    /// Per-chain block acceptance rates.
    pub block_accept: Vec<f64>,
    /// Per-chain mean site-level acceptance rates.
    pub site_accept: Vec<f64>,
    /// Full TOML echo of the run configuration.
    pub config_echo: String,
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let text = toml::to_string(manifest)
        .map_err(|e| Error::Data(format!("cannot serialize manifest: {e}")))?;
    std::fs::write(manifest_path(dir), text)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = manifest_path(dir);
    let text = std::fs::read_to_string(&path)?;
    toml::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Write one chain's draws as CSV: header of column names, one row per
/// retained iteration, shortest-round-trip float formatting.
pub fn write_draw_file(path: &Path, names: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * names.len() * 12 + 64);
    out.push_str(&names.join(","));
    out.push('\n');
    for row in rows {
        if row.len() != names.len() {
            return Err(Error::DimensionMismatch {
                what: "draw row",
                expected: names.len(),
                got: row.len(),
            });
        }
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_draw_file(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty draw file", path.display())))?;
    let names: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::Data(format!(
                        "{} line {}: malformed value '{f}'",
                        path.display(),
                        i + 2
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != names.len() {
            return Err(Error::Data(format!(
                "{} line {}: {} fields, header names {}",
                path.display(),
                i + 2,
                row.len(),
                names.len()
            )));
        }
        rows.push(row);
    }
    Ok((names, rows))
}

/// TOML image of an [`EndState`]; the RNG position is a decimal string
/// because it exceeds the integer range TOML can carry.
#[derive(Debug, Serialize, Deserialize)]
struct EndStateFile {
    completed_iters: u64,
    rng_word_pos: String,
    values: Vec<f64>,
    lambda: f64,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    block_b: u64,
    log_sd: Vec<f64>,
    batch_b: u64,
    batch_sums: Vec<f64>,
    batch_len: u32,
}

pub fn write_end_state(path: &Path, state: &EndState) -> Result<()> {
    let file = EndStateFile {
        completed_iters: state.completed_iters,
        rng_word_pos: state.rng_word_pos.to_string(),
        values: state.values.clone(),
        lambda: state.adapt.lambda,
        mu: state.adapt.mu.clone(),
        sigma: state.adapt.sigma.clone(),
        block_b: state.adapt.block_b,
        log_sd: state.adapt.log_sd.clone(),
        batch_b: state.adapt.batch_b,
        batch_sums: state.adapt.batch_sums.clone(),
        batch_len: state.adapt.batch_len,
    };
    let text = toml::to_string(&file)
        .map_err(|e| Error::Data(format!("cannot serialize end state: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_end_state(path: &Path) -> Result<EndState> {
    let text = std::fs::read_to_string(path)?;
    let file: EndStateFile = toml::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let rng_word_pos = file.rng_word_pos.parse::<u128>().map_err(|_| {
        Error::Data(format!(
            "{}: malformed rng_word_pos '{}'",
            path.display(),
            file.rng_word_pos
        ))
    })?;
    Ok(EndState {
        completed_iters: file.completed_iters,
        values: file.values,
        adapt: AdaptSnapshot {
            lambda: file.lambda,
            mu: file.mu,
            sigma: file.sigma,
            block_b: file.block_b,
            log_sd: file.log_sd,
            batch_b: file.batch_b,
            batch_sums: file.batch_sums,
            batch_len: file.batch_len,
        },
        rng_word_pos,
    })
}

/// A run directory read back: manifest, shared column names, per-chain
/// draw matrices, per-chain end states.
#[derive(Debug, Clone)]
pub struct StoredRun {
    pub manifest: RunManifest,
    pub names: Vec<String>,
    pub chains: Vec<Vec<Vec<f64>>>,
    pub end_states: Vec<EndState>,
}

impl StoredRun {
    /// All chains' post-burn-in draws pooled into one matrix.
    pub fn pooled(&self) -> Vec<Vec<f64>> {
        self.chains.iter().flatten().cloned().collect()
    }
}

pub fn read_run(dir: &Path) -> Result<StoredRun> {
    let manifest = read_manifest(dir)?;
    let mut names: Option<Vec<String>> = None;
    let mut chains = Vec::new();
    let mut end_states = Vec::new();
    for c in 0..manifest.n_chains as usize {
        let (chain_names, rows) = read_draw_file(&draws_path(dir, c))?;
        match &names {
            None => names = Some(chain_names),
            Some(n) if *n == chain_names => {}
            Some(_) => {
                return Err(Error::Data(format!(
                    "chain {c} draw columns disagree with chain 0"
                )));
            }
        }
        chains.push(rows);
        end_states.push(read_end_state(&end_state_path(dir, c))?);
    }
    Ok(StoredRun {
        manifest,
        names: names.ok_or_else(|| Error::Data("run holds no chains".into()))?,
        chains,
        end_states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_state() -> EndState {
        EndState {
            completed_iters: 275,
            values: vec![0.1 + 0.2, 1e-300, std::f64::consts::PI, -4.0],
            adapt: AdaptSnapshot {
                lambda: 0.8431,
                mu: vec![0.5, -0.25],
                sigma: vec![1.0, 0.1, 0.1, 2.0],
                block_b: 260,
                log_sd: vec![-0.5, 0.25, 0.0],
                batch_b: 6,
                batch_sums: vec![10.5, 11.0, 9.75],
                batch_len: 25,
            },
            rng_word_pos: (u64::MAX as u128) * 7 + 3,
        }
    }

    #[test]
    fn draw_files_round_trip_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = draws_path(dir.path(), 0);
        let names = vec!["alpha".to_string(), "sigma2".to_string()];
        let rows = vec![
            vec![0.1 + 0.2, 1.0 / 3.0],
            vec![1e-300, 6.02e23],
            vec![-0.0, 2.0f64.powi(-52)],
        ];
        write_draw_file(&path, &names, &rows).unwrap();
        let (back_names, back_rows) = read_draw_file(&path).unwrap();
        assert_eq!(back_names, names);
        for (a, b) in rows.iter().flatten().zip(back_rows.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // Writing the same content twice is byte-identical.
        let bytes1 = std::fs::read(&path).unwrap();
        write_draw_file(&path, &names, &rows).unwrap();
        assert_eq!(bytes1, std::fs::read(&path).unwrap());
    }

    #[test]
    fn end_state_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = end_state_path(dir.path(), 1);
        let state = demo_state();
        write_end_state(&path, &state).unwrap();
        let back = read_end_state(&path).unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            tool: "circgp 0.1.0".into(),
            created_unix: 1_755_000_000,
            wall_time_secs: 12.5,
            model: "wn_spatial".into(),
            kernel: "exponential".into(),
            matern_nu: None,
            seed: 42,
            n_chains: 2,
            iters: 1000,
            burnin: 500,
            thin: 5,
            n_sites: 50,
            shift: 0.25,
            data_path: "wind.csv".into(),
            data_sha256: "ab".repeat(32),
            param_names: vec!["alpha".into(), "sigma2".into()],
            block_accept: vec![0.23, 0.24],
            site_accept: vec![0.5, 0.51],
            config_echo: "model = \"wn_spatial\"\n".into(),
        };
        write_manifest(dir.path(), &m).unwrap();
        let back = read_manifest(dir.path()).unwrap();
        assert_eq!(back.data_sha256, m.data_sha256);
        assert_eq!(back.config_echo, m.config_echo);
        assert_eq!(back.param_names, m.param_names);
    }

    #[test]
    fn read_run_collects_all_chains() {
        let dir = tempfile::tempdir().unwrap();
        let names = vec!["alpha".to_string()];
        write_draw_file(&draws_path(dir.path(), 0), &names, &[vec![1.0]]).unwrap();
        write_draw_file(&draws_path(dir.path(), 1), &names, &[vec![2.0]]).unwrap();
        write_end_state(&end_state_path(dir.path(), 0), &demo_state()).unwrap();
        write_end_state(&end_state_path(dir.path(), 1), &demo_state()).unwrap();
        let mut m = RunManifest {
            tool: "t".into(),
            created_unix: 0,
            wall_time_secs: 0.0,
            model: "wn_spatial".into(),
            kernel: "exponential".into(),
            matern_nu: None,
            seed: 1,
            n_chains: 2,
            iters: 10,
            burnin: 5,
            thin: 1,
            n_sites: 1,
            shift: 0.0,
            data_path: "d.csv".into(),
            data_sha256: String::new(),
            param_names: names.clone(),
            block_accept: vec![],
            site_accept: vec![],
            config_echo: String::new(),
        };
        write_manifest(dir.path(), &m).unwrap();
        let run = read_run(dir.path()).unwrap();
        assert_eq!(run.chains.len(), 2);
        assert_eq!(run.pooled(), vec![vec![1.0], vec![2.0]]);

        // Mismatched columns across chains are refused.
        write_draw_file(&draws_path(dir.path(), 1), &["beta".to_string()], &[vec![2.0]])
            .unwrap();
        assert!(read_run(dir.path()).is_err());
        m.n_chains = 1;
        write_manifest(dir.path(), &m).unwrap();
        assert!(read_run(dir.path()).is_ok());
    }
}

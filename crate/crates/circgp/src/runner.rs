//! Command implementations behind the CLI: dataset simulation, parallel
//! multi-chain fitting with warm starts, kriging, convergence reports,
//! and prediction scoring.
//!
//! Chains run concurrently with derived seeds `seed + chain_index`; all
//! shared inputs are immutable once validated and every output file is
//! owned by exactly one writer, so identical `(config, input)` pairs
//! produce identical draw files regardless of scheduling.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circ::Angle;
use crate::config::{RunConfig, ScalarOrPair, SiteLayout};
use crate::dataset::{self, CircularDataset, TargetSet};
use crate::diag;
use crate::draws::{self, RunManifest, StoredRun};
use crate::error::{Error, Result};
use crate::krige::{predict_pn, predict_wn, PnFitContext, PosteriorDraws, PredictionSet, WnFitContext};
use crate::mcmc::{ChainRun, EndState};
use crate::projected::{fit_pn, PnModel};
use crate::score::{score_predictions, ScoreReport};
use crate::sim;
use crate::wrapped::{fit_wn, WnModel};

fn tool_stamp() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn config_echo(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(format!("cannot echo config: {e}")))
}

/// Ground truth written next to a simulated dataset so recovery studies
/// can compare against the generating values.
#[derive(Debug, Serialize, Deserialize)]
struct SimulationTruth {
    model: String,
    kernel: String,
    seed: u64,
    n_sites: usize,
    alpha: ScalarOrPair,
    sigma2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
}

/// Generate a synthetic dataset from the config's `[simulate]` block and
/// write it (plus a `*_truth.toml` sidecar) to `out`.
pub fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let sim_cfg = cfg.simulate.as_ref().ok_or_else(|| {
        Error::Config("simulate needs a [simulate] block in the config".into())
    })?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let sites = match sim_cfg.layout {
        SiteLayout::Grid => sim::grid_sites(
            sim_cfg.nx.unwrap(),
            sim_cfg.ny.unwrap(),
            sim_cfg.spacing.unwrap(),
        ),
        SiteLayout::Uniform => {
            let n = sim_cfg.n_sites.unwrap();
            if cfg.model.is_space_time() {
                sim::uniform_space_time_sites(
                    n,
                    sim_cfg.xmax,
                    sim_cfg.ymax,
                    sim_cfg.tmax,
                    &mut rng,
                )
            } else {
                sim::uniform_sites(n, sim_cfg.xmax, sim_cfg.ymax, &mut rng)
            }
        }
    };
    let family = cfg.family()?;
    let corr: Vec<f64> = if cfg.model.is_space_time() {
        vec![sim_cfg.rho, sim_cfg.rho_t.unwrap(), sim_cfg.eta.unwrap()]
    } else {
        vec![sim_cfg.rho]
    };
    let spec = family.make_spec(&corr);
    let angles = if cfg.model.is_projected() {
        let a = match sim_cfg.alpha {
            ScalarOrPair::Pair(p) => Vector2::new(p[0], p[1]),
            ScalarOrPair::Scalar(_) => unreachable!("validated"),
        };
        sim::simulate_pn_field(&sites, &spec, sim_cfg.sigma2, sim_cfg.tau.unwrap(), &a, &mut rng)?
            .angles
    } else {
        let a = match sim_cfg.alpha {
            ScalarOrPair::Scalar(v) => v,
            ScalarOrPair::Pair(_) => unreachable!("validated"),
        };
        sim::simulate_wn_field(&sites, &spec, sim_cfg.sigma2, a, &mut rng)?.angles
    };
    let ds = CircularDataset {
        ids: (1..=sites.len()).map(|i| format!("s{i}")).collect(),
        sites,
        angles,
        has_time: cfg.model.is_space_time(),
        speed: None,
    };
    dataset::write_dataset(&ds, out)?;

    let truth = SimulationTruth {
        model: cfg.model.label().into(),
        kernel: cfg.kernel.label().into(),
        seed: cfg.seed,
        n_sites: ds.len(),
        alpha: sim_cfg.alpha,
        sigma2: sim_cfg.sigma2,
        tau: sim_cfg.tau,
        rho: sim_cfg.rho,
        rho_t: sim_cfg.rho_t,
        eta: sim_cfg.eta,
    };
    let truth_path = sidecar_path(out, "_truth.toml");
    std::fs::write(
        &truth_path,
        toml::to_string(&truth).map_err(|e| Error::Data(format!("truth sidecar: {e}")))?,
    )?;
    println!(
        "simulated {} sites ({}) -> {} (truth in {})",
        ds.len(),
        cfg.model.label(),
        out.display(),
        truth_path.display()
    );
    Ok(())
}

fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    out.with_file_name(format!("{stem}{suffix}"))
}

/// Everything `fit` checks before agreeing to continue an existing run.
fn warm_start_states(
    cfg: &RunConfig,
    out_dir: &Path,
    data_sha256: &str,
) -> Result<(StoredRun, Vec<EndState>)> {
    let old = draws::read_run(out_dir)?;
    let m = &old.manifest;
    let mut problems = Vec::new();
    if m.data_sha256 != data_sha256 {
        problems.push("dataset checksum differs from the original fit".to_string());
    }
    if m.model != cfg.model.label() {
        problems.push(format!("model was {}, config says {}", m.model, cfg.model.label()));
    }
    if m.n_chains != cfg.n_chains {
        problems.push(format!("run has {} chains, config says {}", m.n_chains, cfg.n_chains));
    }
    if m.seed != cfg.seed {
        problems.push(format!("run used seed {}, config says {}", m.seed, cfg.seed));
    }
    let old_cfg: RunConfig = toml::from_str(&m.config_echo)
        .map_err(|e| Error::Data(format!("manifest config echo unreadable: {e}")))?;
    if old_cfg.kernel != cfg.kernel || old_cfg.matern_nu != cfg.matern_nu {
        problems.push("kernel differs from the original fit".to_string());
    }
    if old_cfg.mcmc.burnin != cfg.mcmc.burnin || old_cfg.mcmc.thin != cfg.mcmc.thin {
        problems.push("burnin/thin must match the original fit".to_string());
    }
    if old_cfg.adapt != cfg.adapt {
        problems.push("the [adapt] block must match the original fit".to_string());
    }
    if let Some(es) = old.end_states.first() {
        if es.completed_iters >= cfg.mcmc.iters {
            problems.push(format!(
                "run already holds {} iterations; raise mcmc.iters past that to continue",
                es.completed_iters
            ));
        }
    }
    if problems.is_empty() {
        let states = old.end_states.clone();
        Ok((old, states))
    } else {
        Err(Error::Config(format!(
            "cannot warm-start from {}: {}",
            out_dir.display(),
            problems.join("; ")
        )))
    }
}

/// Per-parameter PSRF rows (plus a pooled multivariate PSRF) over the
/// non-latent columns. The wrapped model's data-scale `alpha` column is
/// assessed through its (cos, sin) embedding.
///
/// The multivariate statistic drops constant columns and the wrapped
/// `alpha` (it duplicates `alpha_lin` up to rotation, which makes the
/// within-chain covariance singular); if the remaining columns are
/// still collinear the row is omitted rather than failing the run —
/// the per-parameter values above it stand on their own.
pub fn compute_diagnostics(
    names: &[String],
    chains: &[Vec<Vec<f64>>],
) -> Result<Vec<(String, f64)>> {
    let latent_start = names
        .iter()
        .position(|n| n.starts_with("k_") || n.starts_with("r_"))
        .unwrap_or(names.len());
    let mut out = Vec::new();
    let mut varying = Vec::new();
    for (j, name) in names.iter().enumerate().take(latent_start) {
        let series: Vec<Vec<f64>> =
            chains.iter().map(|rows| rows.iter().map(|r| r[j]).collect()).collect();
        let r = if name == "alpha" { diag::psrf_circular(&series)? } else { diag::psrf(&series)? };
        out.push((name.clone(), r));
        let first = series[0][0];
        if name != "alpha" && series.iter().flatten().any(|&v| v != first) {
            varying.push(j);
        }
    }
    if varying.len() >= 2 {
        let multi: Vec<Vec<Vec<f64>>> = chains
            .iter()
            .map(|rows| rows.iter().map(|r| varying.iter().map(|&j| r[j]).collect()).collect())
            .collect();
        match diag::mpsrf(&multi) {
            Ok(v) => out.push(("mpsrf".to_string(), v)),
            Err(Error::Numeric(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn write_diagnostics_file(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut text = String::from("parameter,psrf\n");
    for (name, value) in rows {
        text.push_str(&format!("{name},{value}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Fit the configured model to `data_path` with `n_chains` parallel
/// chains, writing draws, end states, the manifest, and (for ≥ 2
/// chains) a PSRF report into `out_dir`. With `warm_start` the existing
/// run in `out_dir` is continued and its draw files extended exactly as
/// if the chains had never stopped.
pub fn run_fit(
    cfg: &RunConfig,
    data_path: &Path,
    out_dir: &Path,
    warm_start: bool,
) -> Result<RunManifest> {
    cfg.validate()?;
    let started = Instant::now();
    let ds = dataset::ingest(data_path, &cfg.ingest_options())?;
    let data_sha256 = dataset::file_sha256(data_path)?;
    if cfg.model.is_space_time() && !ds.has_time {
        return Err(Error::Config(format!(
            "model {} needs a time column in the dataset",
            cfg.model.label()
        )));
    }
    let old_run = if warm_start {
        Some(warm_start_states(cfg, out_dir, &data_sha256)?)
    } else {
        None
    };
    std::fs::create_dir_all(out_dir)?;

    let settings = cfg.mcmc_settings();
    let family = cfg.family()?;
    let warm_states = old_run.as_ref().map(|(_, s)| s.as_slice());
    let runs: Vec<ChainRun> = if cfg.model.is_projected() {
        let priors = cfg.pn_priors()?;
        let model =
            PnModel { sites: &ds.sites, angles: &ds.angles, family, priors: &priors };
        (0..cfg.n_chains)
            .into_par_iter()
            .map(|c| fit_pn(&model, &settings, cfg.seed, c, warm_states.map(|w| &w[c as usize])))
            .collect::<Result<_>>()?
    } else {
        let priors = cfg.wn_priors()?;
        let model =
            WnModel { sites: &ds.sites, angles: &ds.angles, family, priors: &priors };
        (0..cfg.n_chains)
            .into_par_iter()
            .map(|c| fit_wn(&model, &settings, cfg.seed, c, warm_states.map(|w| &w[c as usize])))
            .collect::<Result<_>>()?
    };

    let names = runs[0].names.clone();
    if let Some((old, _)) = &old_run {
        if old.names != names {
            return Err(Error::Data(
                "existing run's draw columns do not match this configuration".into(),
            ));
        }
    }
    let mut chain_rows: Vec<Vec<Vec<f64>>> = Vec::with_capacity(runs.len());
    for (c, run) in runs.iter().enumerate() {
        let mut rows = match &old_run {
            Some((old, _)) => old.chains[c].clone(),
            None => Vec::new(),
        };
        rows.extend(run.draws.iter().cloned());
        chain_rows.push(rows);
    }

    for (c, run) in runs.iter().enumerate() {
        draws::write_draw_file(&draws::draws_path(out_dir, c), &names, &chain_rows[c])?;
        draws::write_end_state(&draws::end_state_path(out_dir, c), &run.end_state)?;
    }

    let manifest = RunManifest {
        tool: tool_stamp(),
        created_unix: unix_now(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        model: cfg.model.label().into(),
        kernel: cfg.kernel.label().into(),
        matern_nu: cfg.matern_nu,
        seed: cfg.seed,
        n_chains: cfg.n_chains,
        iters: settings.iters,
        burnin: settings.burnin,
        thin: settings.thin,
        n_sites: ds.len(),
        shift: runs[0].shift,
        data_path: data_path.display().to_string(),
        data_sha256,
        param_names: names.clone(),
        block_accept: runs.iter().map(|r| r.accept.block_rate).collect(),
        site_accept: runs.iter().map(|r| r.accept.site_rate).collect(),
        config_echo: config_echo(cfg)?,
    };
    draws::write_manifest(out_dir, &manifest)?;

    for (c, run) in runs.iter().enumerate() {
        println!(
            "chain {c}: {} stored draws, block acceptance {:.3}, site acceptance {:.3}",
            chain_rows[c].len(),
            run.accept.block_rate,
            run.accept.site_rate
        );
    }
    if cfg.n_chains >= 2 && chain_rows[0].len() >= 10 {
        match compute_diagnostics(&names, &chain_rows) {
            Ok(rows) => {
                write_diagnostics_file(&out_dir.join("diagnostics.csv"), &rows)?;
                let worst = rows
                    .iter()
                    .filter(|(n, _)| n != "mpsrf")
                    .fold(f64::NEG_INFINITY, |a, (_, v)| a.max(*v));
                println!("diagnostics: worst per-parameter PSRF {worst:.4}");
            }
            Err(e) => println!("diagnostics unavailable: {e}"),
        }
    } else {
        println!("diagnostics skipped (need ≥ 2 chains and ≥ 10 stored draws)");
    }
    println!("run written to {}", out_dir.display());
    Ok(manifest)
}

/// Metadata written next to prediction outputs; carries the fit's config
/// echo forward so `score` can ingest the truth file consistently.
#[derive(Debug, Serialize, Deserialize)]
pub struct PredictionManifest {
    pub tool: String,
    pub created_unix: u64,
    pub seed: u64,
    pub model: String,
    pub kernel: String,
    pub n_targets: usize,
    pub n_draws_used: usize,
    pub n_draws_skipped: usize,
    pub source_run: String,
    pub data_sha256: String,
    pub targets_sha256: String,
    pub config_echo: String,
}

fn prediction_manifest_path(dir: &Path) -> PathBuf {
    dir.join("prediction_manifest.toml")
}

fn predictions_path(dir: &Path) -> PathBuf {
    dir.join("predictions.csv")
}

fn samples_path(dir: &Path) -> PathBuf {
    dir.join("predictive_samples.csv")
}

/// Krige the posterior held in `draws_dir` onto `targets_path`, writing
/// per-target summaries (plot-ready), optional full predictive samples,
/// and a prediction manifest into `out_dir`.
///
/// The dataset is re-read and its checksum compared against the fit
/// manifest, so predictions can never silently use mutated data.
pub fn run_predict(
    draws_dir: &Path,
    data_path: &Path,
    targets_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
    keep_samples: bool,
) -> Result<()> {
    let run = draws::read_run(draws_dir)?;
    let cfg: RunConfig = toml::from_str(&run.manifest.config_echo)
        .map_err(|e| Error::Data(format!("manifest config echo unreadable: {e}")))?;
    let data_sha256 = dataset::file_sha256(data_path)?;
    if data_sha256 != run.manifest.data_sha256 {
        return Err(Error::Data(format!(
            "dataset checksum mismatch: {} was fitted against {}…, {} hashes to {}…",
            draws_dir.display(),
            &run.manifest.data_sha256[..12.min(run.manifest.data_sha256.len())],
            data_path.display(),
            &data_sha256[..12]
        )));
    }
    let ds = dataset::ingest(data_path, &cfg.ingest_options())?;
    if ds.len() != run.manifest.n_sites {
        return Err(Error::Data(format!(
            "dataset has {} sites, the fit used {}",
            ds.len(),
            run.manifest.n_sites
        )));
    }
    let targets = dataset::ingest_targets(targets_path, cfg.ingest_options().assert_planar)?;
    let pooled = run.pooled();
    let post = PosteriorDraws { names: &run.names, rows: &pooled };
    let family = cfg.family()?;
    let seed = seed_override.unwrap_or(run.manifest.seed);

    let prediction = if cfg.model.is_projected() {
        let ctx = PnFitContext { family, sites: &ds.sites, angles: &ds.angles };
        predict_pn(&ctx, &post, &targets.sites, seed)?
    } else {
        let ctx = WnFitContext {
            family,
            shift: run.manifest.shift,
            sites: &ds.sites,
            angles: &ds.angles,
        };
        predict_wn(&ctx, &post, &targets.sites, seed)?
    };

    std::fs::create_dir_all(out_dir)?;
    write_predictions_table(&predictions_path(out_dir), &targets, &prediction)?;
    if keep_samples {
        write_samples_table(&samples_path(out_dir), &targets, &prediction)?;
    }
    let manifest = PredictionManifest {
        tool: tool_stamp(),
        created_unix: unix_now(),
        seed,
        model: run.manifest.model.clone(),
        kernel: run.manifest.kernel.clone(),
        n_targets: targets.sites.len(),
        n_draws_used: prediction.draws.len(),
        n_draws_skipped: prediction.n_skipped,
        source_run: draws_dir.display().to_string(),
        data_sha256,
        targets_sha256: dataset::file_sha256(targets_path)?,
        config_echo: run.manifest.config_echo.clone(),
    };
    std::fs::write(
        prediction_manifest_path(out_dir),
        toml::to_string(&manifest)
            .map_err(|e| Error::Data(format!("prediction manifest: {e}")))?,
    )?;
    if prediction.skip_rate() > 0.01 {
        println!(
            "warning: skipped {} of {} posterior draws (covariance not factorizable)",
            prediction.n_skipped,
            prediction.n_skipped + prediction.draws.len()
        );
    }
    println!(
        "predicted {} targets from {} posterior draws -> {}",
        targets.sites.len(),
        prediction.draws.len(),
        out_dir.display()
    );
    Ok(())
}

fn write_predictions_table(
    path: &Path,
    targets: &TargetSet,
    prediction: &PredictionSet,
) -> Result<()> {
    let mut out = String::from("site_id,x,y");
    if targets.has_time {
        out.push_str(",time");
    }
    out.push_str(",mean_direction,resultant_length,circular_variance,arc_lo,arc_hi\n");
    for (i, summary) in prediction.per_target.iter().enumerate() {
        let s = &targets.sites[i];
        out.push_str(&format!("{},{},{}", targets.ids[i], s.x, s.y));
        if targets.has_time {
            out.push_str(&format!(",{}", s.t));
        }
        out.push_str(&format!(
            ",{},{},{},{},{}\n",
            summary.mean_direction,
            summary.resultant_length,
            summary.circular_variance,
            summary.arc_lo,
            summary.arc_hi
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_samples_table(
    path: &Path,
    targets: &TargetSet,
    prediction: &PredictionSet,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(targets.ids.iter())?;
    for row in &prediction.draws {
        w.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Recompute and print the PSRF report for a stored run, writing it to
/// `out` (default: `diagnostics.csv` inside the run directory).
pub fn run_diagnose(draws_dir: &Path, out: Option<&Path>) -> Result<()> {
    let run = draws::read_run(draws_dir)?;
    let rows = compute_diagnostics(&run.names, &run.chains)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| draws_dir.join("diagnostics.csv"));
    write_diagnostics_file(&path, &rows)?;
    for (name, value) in &rows {
        println!("{name}: {value:.4}");
    }
    println!("report written to {}", path.display());
    Ok(())
}

/// Aggregate scores plus the conventions they were computed under.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub tool: String,
    pub n_targets: usize,
    pub n_samples: usize,
    pub max_match_distance: f64,
    /// APE under `1 − cos` (headline) and under angular separation.
    pub ape_cosine: f64,
    pub ape_separation: f64,
    /// CRPS under angular separation (headline) and under `1 − cos`.
    pub crps_separation: f64,
    pub crps_cosine: f64,
    pub headline_ape: String,
    pub headline_crps: String,
}

struct PredTable {
    ids: Vec<String>,
    xy: Vec<(f64, f64)>,
}

fn read_prediction_coords(path: &Path) -> Result<PredTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Data(format!("{}: missing column '{name}'", path.display()))
        })
    };
    let (id_c, x_c, y_c) = (col("site_id")?, col("x")?, col("y")?);
    let mut ids = Vec::new();
    let mut xy = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |c: usize, what: &str| -> Result<f64> {
            record
                .get(c)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("{}: malformed {what}", path.display())))
        };
        ids.push(record.get(id_c).unwrap_or("").to_string());
        xy.push((parse(x_c, "x")?, parse(y_c, "y")?));
    }
    Ok(PredTable { ids, xy })
}

fn read_samples(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let width = reader.headers()?.len();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row: Vec<f64> = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Data(format!("{}: malformed sample", path.display())))
            })
            .collect::<Result<_>>()?;
        if row.len() != width {
            return Err(Error::Data(format!("{}: ragged sample row", path.display())));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Score a prediction directory against a held-out truth dataset.
///
/// Each prediction target is matched to its nearest truth site under
/// planar Euclidean distance (ties broken by the lowest truth index);
/// targets with no truth within `max_match_distance` abort the scoring
/// with a full offender list. Both APE and CRPS are reported under both
/// angular-distance conventions, per target and aggregated.
pub fn run_score(
    pred_dir: &Path,
    truth_path: &Path,
    out_dir: Option<&Path>,
    max_match_distance: f64,
) -> Result<()> {
    let manifest_text = std::fs::read_to_string(prediction_manifest_path(pred_dir))?;
    let pred_manifest: PredictionManifest = toml::from_str(&manifest_text)
        .map_err(|e| Error::Data(format!("prediction manifest unreadable: {e}")))?;
    let cfg: RunConfig = toml::from_str(&pred_manifest.config_echo)
        .map_err(|e| Error::Data(format!("config echo unreadable: {e}")))?;
    let table = read_prediction_coords(&predictions_path(pred_dir))?;
    let samples = read_samples(&samples_path(pred_dir))?;
    if samples.is_empty() {
        return Err(Error::Data(
            "no predictive samples stored; rerun predict without --no-samples".into(),
        ));
    }
    if samples[0].len() != table.ids.len() {
        return Err(Error::Data(format!(
            "sample columns ({}) disagree with prediction rows ({})",
            samples[0].len(),
            table.ids.len()
        )));
    }
    let truth = dataset::ingest(truth_path, &cfg.ingest_options())?;

    let mut matched: Vec<usize> = Vec::with_capacity(table.ids.len());
    let mut offenders: Vec<String> = Vec::new();
    for (t, &(x, y)) in table.xy.iter().enumerate() {
        let mut best = (f64::INFINITY, 0usize);
        for (j, s) in truth.sites.iter().enumerate() {
            let d = ((s.x - x).powi(2) + (s.y - y).powi(2)).sqrt();
            if d < best.0 {
                best = (d, j);
            }
        }
        if best.0 > max_match_distance {
            offenders.push(format!(
                "target {} at ({x}, {y}): nearest truth site {} is {} away",
                table.ids[t], truth.ids[best.1], best.0
            ));
        } else {
            matched.push(best.1);
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Data(format!(
            "{} target(s) have no truth site within {max_match_distance}: {}",
            offenders.len(),
            offenders.join("; ")
        )));
    }
    let truths: Vec<Angle> = matched.iter().map(|&j| truth.angles[j]).collect();
    let report = score_predictions(&samples, &truths)?;

    let dir = out_dir.unwrap_or(pred_dir);
    std::fs::create_dir_all(dir)?;
    write_score_report(&dir.join("score_report.csv"), &table, &report)?;
    let summary = ScoreSummary {
        tool: tool_stamp(),
        n_targets: table.ids.len(),
        n_samples: samples.len(),
        max_match_distance,
        ape_cosine: report.ape_cos,
        ape_separation: report.ape_sep,
        crps_separation: report.crps_sep,
        crps_cosine: report.crps_cos,
        headline_ape: "1 - cos(predicted - truth), averaged over draws then targets".into(),
        headline_crps: "angular separation sample CRPS, averaged over targets".into(),
    };
    std::fs::write(
        dir.join("score_summary.toml"),
        toml::to_string(&summary).map_err(|e| Error::Data(format!("score summary: {e}")))?,
    )?;
    println!("APE  (1 - cos):          {:.6}", report.ape_cos);
    println!("APE  (angular sep.):     {:.6}", report.ape_sep);
    println!("CRPS (angular sep.):     {:.6}", report.crps_sep);
    println!("CRPS (1 - cos):          {:.6}", report.crps_cos);
    println!("score report written to {}", dir.display());
    Ok(())
}

fn write_score_report(path: &Path, table: &PredTable, report: &ScoreReport) -> Result<()> {
    let mut out = String::from("site_id,x,y,ape_cos,ape_sep,crps_cos,crps_sep\n");
    for (i, s) in report.per_target.iter().enumerate() {
        let (x, y) = table.xy[i];
        out.push_str(&format!(
            "{},{x},{y},{},{},{},{}\n",
            table.ids[i], s.ape_cos, s.ape_sep, s.crps_cos, s.crps_sep
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

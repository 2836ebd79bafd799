use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{SizeControl, StudyConfig, Sweep, TrackConfig};
use crate::error::{invalid, Result};
use crate::estimator::{fit, Method};
use crate::field::CovariateField;
use crate::likelihood::{LikelihoodConfig, NodeSpec};
use crate::model::RsfModel;
use crate::simulator::{simulate_track, thin_track, truncate_track, Track};
use crate::{Point2, Scalar};

/// Seed offset between sweep values in the seed ledger.
pub const SWEEP_SEED_STRIDE: u64 = 1_000_000;

/// One fitted (or failed) cell of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub replicate: usize,
    pub method: Method,
    pub dt: f64,
    /// Interior bridge nodes per interval (0 for Euler-Maruyama).
    pub nodes: usize,
    /// Bridges per interval (0 for Euler-Maruyama).
    pub bridges: usize,
    pub beta_hat: Vec<f64>,
    pub gamma_sq_hat: f64,
    pub loglik: f64,
    pub converged: bool,
    pub wall_time: f64,
    pub error: Option<String>,
}

impl StudyRow {
    /// Estimates in parameter order: `beta1..betaJ, gamma_sq`.
    pub fn estimates(&self) -> Vec<f64> {
        let mut v = self.beta_hat.clone();
        v.push(self.gamma_sq_hat);
        v
    }

    pub fn csv_header(covariates: usize) -> String {
        let betas: Vec<String> = (1..=covariates).map(|k| format!("beta{k}")).collect();
        format!("replicate,method,dt,N,M,{},gamma_sq,loglik,converged,wall_time", betas.join(","))
    }

    pub fn to_csv(&self) -> String {
        let betas: Vec<String> = self.beta_hat.iter().map(|b| format!("{b:.16e}")).collect();
        format!(
            "{},{},{},{},{},{},{:.16e},{:.16e},{},{:.3}",
            self.replicate,
            self.method.as_str(),
            self.dt,
            self.nodes,
            self.bridges,
            betas.join(","),
            self.gamma_sq_hat,
            self.loglik,
            self.converged,
            self.wall_time
        )
    }
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
}

impl StudyResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", StudyRow::csv_header(self.config.true_beta.len()))?;
        for row in &self.rows {
            writeln!(out, "{}", row.to_csv())?;
        }
        Ok(())
    }

    pub fn rows_for(&self, sweep_index: usize) -> impl Iterator<Item = &StudyRow> {
        self.rows.iter().filter(move |r| r.sweep_index == sweep_index)
    }
}

/// Seed of cell `(sweep_index, replicate)`; drives the bridge ensemble.
pub fn cell_seed(base_seed: u64, sweep_index: usize, replicate: usize) -> u64 {
    base_seed.wrapping_add((sweep_index as u64).wrapping_mul(SWEEP_SEED_STRIDE)).wrapping_add(replicate as u64)
}

/// Seed of replicate `r`'s fine track, shared by every sweep value so all
/// of them thin the same simulated path.
pub fn track_seed(base_seed: u64, replicate: usize) -> u64 {
    base_seed.wrapping_add(replicate as u64)
}

/// Builds the true model over the study's landscape.
pub fn true_model(config: &StudyConfig) -> Result<RsfModel<f64>> {
    let fields: Arc<[CovariateField<f64>]> = config.landscape().build()?.into();
    RsfModel::new(fields, config.true_beta.clone(), config.true_gamma_sq)
}

/// Fine path from `x0` (or a uniform start drawn from `seed`) with the first
/// `burn_in` steps dropped and times restarted at 0.
fn fine_path(
    model: &RsfModel<f64>,
    h_sim: f64,
    burn_in: usize,
    steps: usize,
    x0: Option<Point2<f64>>,
    start_half_width: f64,
    seed: u64,
) -> Result<Track<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = start_half_width;
    let drawn = Point2::new(f64::uniform(&mut rng, -w, w), f64::uniform(&mut rng, -w, w));
    let sim_seed: u64 = rng.random();
    let path = simulate_track(model, x0.unwrap_or(drawn), h_sim, burn_in + steps, sim_seed)?;
    let points = path.points()[burn_in..].to_vec();
    let times = (0..points.len()).map(|k| k as f64 * h_sim).collect();
    Track::new(times, points)
}

fn fine_steps(size: SizeControl, factor: usize, h_sim: f64) -> usize {
    match size {
        SizeControl::Observations(n) => (n - 1) * factor,
        SizeControl::TimeSpan(t) => (t / h_sim * (1.0 + 1e-12)).floor() as usize,
    }
}

fn cut(fine: &Track<f64>, factor: usize, size: SizeControl) -> Result<Track<f64>> {
    let thinned = thin_track(fine, factor)?;
    match size {
        SizeControl::Observations(n) => {
            if thinned.len() < n {
                return Err(invalid(format!("fine track yields only {} of {n} observations", thinned.len())));
            }
            thinned.slice(0, n)
        }
        // tolerate the rounding in k * h_sim at the boundary
        SizeControl::TimeSpan(t) => truncate_track(&thinned, t * (1.0 + 1e-12)),
    }
}

/// Fine track for replicate `r`, long enough for observation interval `dt`:
/// uniform start, `burn_in_steps` discarded, times restarted at 0.
pub fn replicate_track(config: &StudyConfig, model: &RsfModel<f64>, replicate: usize, dt: f64) -> Result<Track<f64>> {
    let steps = fine_steps(config.size_control(), config.thinning_factor(dt)?, config.h_sim);
    fine_path(
        model,
        config.h_sim,
        config.burn_in_steps,
        steps,
        None,
        config.start_half_width,
        track_seed(config.base_seed, replicate),
    )
}

/// Observations for replicate `r` at interval `dt`.
pub fn observe(config: &StudyConfig, fine: &Track<f64>, dt: f64) -> Result<Track<f64>> {
    cut(fine, config.thinning_factor(dt)?, config.size_control())
}

/// Landscape and observed track described by a [`TrackConfig`].
pub fn simulate_observations(config: &TrackConfig) -> Result<(Vec<CovariateField<f64>>, Track<f64>)> {
    config.validate()?;
    let fields = config.landscape().build()?;
    let model = RsfModel::new(fields.clone(), config.true_beta.clone(), config.true_gamma_sq)?;
    let factor = config.thinning_factor()?;
    let size = config.size_control();
    let x0 = config.x0.map(|[x, y]| Point2::new(x, y));
    let fine = fine_path(
        &model,
        config.h_sim,
        config.burn_in_steps,
        fine_steps(size, factor, config.h_sim),
        x0,
        config.start_half_width,
        config.seed,
    )?;
    Ok((fields, cut(&fine, factor, size)?))
}

struct Cell {
    sweep_index: usize,
    replicate: usize,
    dt: f64,
    nodes: NodeSpec<f64>,
    bridges: usize,
}

fn cells(config: &StudyConfig) -> Vec<Cell> {
    let default_nodes = config.n_nodes.map(NodeSpec::Fixed).unwrap_or(NodeSpec::TargetStep(config.h_target));
    let mut out = Vec::new();
    for s in 0..config.sweep_len() {
        let (dt, nodes, bridges) = match config.sweep() {
            Sweep::Dt => (config.dt_values[s], default_nodes, config.m),
            Sweep::Nodes => (config.dt, NodeSpec::Fixed(config.n_values[s]), config.m),
            Sweep::Bridges => (config.dt, default_nodes, config.m_values[s]),
        };
        for r in 0..config.replicates {
            out.push(Cell { sweep_index: s, replicate: r, dt, nodes, bridges });
        }
    }
    out
}

fn run_cell(config: &StudyConfig, model: &RsfModel<f64>, cell: &Cell) -> StudyRow {
    let started = Instant::now();
    let method: Method = config.method.into();
    let lik = LikelihoodConfig {
        nodes: cell.nodes,
        bridges: cell.bridges,
        seed: cell_seed(config.base_seed, cell.sweep_index, cell.replicate),
        include_initial_density: false,
        sigma: None,
    };
    let (nodes, bridges) = match method {
        Method::Bbis => (lik.nodes_for(cell.dt), cell.bridges),
        Method::Em => (0, 0),
    };
    let mut row = StudyRow {
        sweep_index: cell.sweep_index,
        sweep_value: config.sweep_value(cell.sweep_index),
        replicate: cell.replicate,
        method,
        dt: cell.dt,
        nodes,
        bridges,
        beta_hat: vec![f64::NAN; config.true_beta.len()],
        gamma_sq_hat: f64::NAN,
        loglik: f64::NAN,
        converged: false,
        wall_time: 0.0,
        error: None,
    };
    let outcome = replicate_track(config, model, cell.replicate, cell.dt)
        .and_then(|fine| observe(config, &fine, cell.dt))
        .and_then(|obs| fit(&obs, Arc::clone(model.covariates()), &lik, method));
    match outcome {
        Ok(f) => {
            row.beta_hat = f.beta_hat;
            row.gamma_sq_hat = f.gamma_sq_hat;
            row.loglik = f.loglik;
            row.converged = f.converged;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    if config.record_timing {
        row.wall_time = started.elapsed().as_secs_f64();
    }
    row
}

/// Runs every (sweep value, replicate) cell, calling `on_row` as each one
/// finishes. Rows come back sorted by sweep value, then replicate.
pub fn run_study_with<F>(config: &StudyConfig, on_row: F) -> Result<StudyResult>
where
    F: Fn(&StudyRow) + Sync,
{
    config.validate()?;
    let model = true_model(config)?;
    let cells = cells(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<StudyRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let row = run_cell(config, &model, cell);
                on_row(&row);
                row
            })
            .collect()
    });
    rows.sort_by_key(|r| (r.sweep_index, r.replicate));
    Ok(StudyResult { config: config.clone(), rows })
}

pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    run_study_with(config, |_| {})
}

/// Runs a study and writes `results.csv`, `summary.csv` and one boxplot SVG
/// per parameter into `out_dir`.
///
/// `results.csv` is appended to (and flushed) as cells finish, so an
/// interrupted run still leaves a parseable file; on completion it is
/// rewritten in sorted order.
pub fn run_study_to_dir(config: &StudyConfig, out_dir: &Path) -> Result<StudyResult> {
    fs::create_dir_all(out_dir)?;
    let results_path = out_dir.join("results.csv");
    let mut live = BufWriter::new(File::create(&results_path)?);
    writeln!(live, "{}", StudyRow::csv_header(config.true_beta.len()))?;
    live.flush()?;
    let live = Mutex::new(live);

    let result = run_study_with(config, |row| {
        let mut w = live.lock().unwrap_or_else(|e| e.into_inner());
        // a failed progress write is not fatal: the sorted file is rewritten below
        let _ = writeln!(w, "{}", row.to_csv()).and_then(|_| w.flush());
    })?;
    drop(live);

    let tmp = out_dir.join("results.csv.tmp");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        result.write_csv(&mut out)?;
        out.flush()?;
    }
    fs::rename(&tmp, &results_path)?;

    let summary = super::summarize(&result)?;
    let mut out = BufWriter::new(File::create(out_dir.join("summary.csv"))?);
    summary.write_csv(&mut out)?;
    out.flush()?;

    for (k, name) in config.parameter_names().iter().enumerate() {
        super::emit_boxplot(&result, k, &out_dir.join(format!("{name}.svg")))?;
    }
    Ok(result)
}

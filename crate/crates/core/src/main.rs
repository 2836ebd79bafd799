use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bbis::estimator::{fit, Method};
use bbis::field::{read_raster, write_raster, CovariateField};
use bbis::likelihood::LikelihoodConfig;
use bbis::oracle::{oracle_comparison, OracleCase};
use bbis::studies::{run_study_to_dir, simulate_observations, summarize, StudyConfig, TrackConfig};
use bbis::{Point, Result, Track};

#[derive(Parser)]
#[command(name = "bbis", version, about = "Langevin movement simulation and bridge importance-sampling fits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one observed track from a model config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the two Perlin rasters here, for use with `fit --fields`.
        #[arg(long)]
        fields_dir: Option<PathBuf>,
    },
    /// Fit coefficients and diffusivity to one track.
    Fit {
        #[arg(long)]
        track: PathBuf,
        /// Raster files, or `quadratic:X,Y` for squared distance to (X, Y).
        #[arg(long, num_args = 1.., required = true, value_parser = parse_field_spec)]
        fields: Vec<FieldSpec>,
        #[arg(long, default_value = "bbis", value_parser = parse_method)]
        method: Method,
        /// Target bridge sub-step.
        #[arg(long = "dt-target-h", default_value_t = 0.01)]
        dt_target_h: f64,
        /// Fixed interior node count; overrides `--dt-target-h`.
        #[arg(long)]
        nodes: Option<usize>,
        /// Bridges per interval.
        #[arg(short = 'M', default_value_t = 50)]
        bridges: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Record the measured fit time instead of 0.
        #[arg(long)]
        timing: bool,
    },
    /// Run a simulation study and write results, summary and box plots.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Record measured fit times instead of 0.
        #[arg(long)]
        timing: bool,
    },
    /// Compare BBIS and Euler-Maruyama with exact OU and Brownian densities.
    OracleCheck {
        #[arg(short = 'M', default_value_t = 200)]
        bridges: usize,
        #[arg(short = 'N', default_value_t = 100)]
        nodes: usize,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        #[arg(long, default_value_t = 100)]
        intervals: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone)]
enum FieldSpec {
    Raster(PathBuf),
    Quadratic(Point),
}

fn parse_field_spec(s: &str) -> std::result::Result<FieldSpec, String> {
    let Some(rest) = s.strip_prefix("quadratic:") else {
        return Ok(FieldSpec::Raster(PathBuf::from(s)));
    };
    let coords: Vec<&str> = rest.split(',').collect();
    let [x, y] = coords[..] else {
        return Err(format!("expected quadratic:X,Y, got {s:?}"));
    };
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad coordinate {v:?}: {e}"));
    Ok(FieldSpec::Quadratic(Point::new(parse(x)?, parse(y)?)))
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: bbis::Error| e.to_string())
}

fn load_fields(specs: &[FieldSpec]) -> Result<Vec<CovariateField<f64>>> {
    specs
        .iter()
        .map(|spec| match spec {
            FieldSpec::Quadratic(c) => Ok(CovariateField::quadratic_distance(format!("sqdist({},{})", c.x, c.y), *c)),
            FieldSpec::Raster(path) => {
                let raster = read_raster(BufReader::new(File::open(path)?))?;
                let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                Ok(CovariateField::raster(id, raster))
            }
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn simulate(config: &Path, out: &Path, fields_dir: Option<&Path>) -> Result<()> {
    let config = TrackConfig::from_file(config)?;
    let (fields, track) = simulate_observations(&config)?;
    let mut w = create(out)?;
    track.write_csv(&mut w)?;
    w.flush()?;
    if let Some(dir) = fields_dir {
        fs::create_dir_all(dir)?;
        for field in &fields {
            if let Some(raster) = field.as_raster() {
                let mut w = create(&dir.join(format!("{}.txt", field.id)))?;
                write_raster(raster, &mut w)?;
                w.flush()?;
            }
        }
    }
    eprintln!("wrote {} observations to {}", track.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fit_track(
    track: &Path,
    fields: &[FieldSpec],
    method: Method,
    h: f64,
    nodes: Option<usize>,
    bridges: usize,
    seed: u64,
    out: &Path,
    timing: bool,
) -> Result<()> {
    let track = Track::<f64>::read_csv(BufReader::new(File::open(track)?))?;
    let fields = load_fields(fields)?;
    let j = fields.len();
    let config = match nodes {
        Some(n) => LikelihoodConfig::fixed(n, bridges, seed),
        None => LikelihoodConfig::target_step(h, bridges, seed),
    };
    let result = fit(&track, fields, &config, method)?;
    let mut w = create(out)?;
    let betas: Vec<String> = (1..=j).map(|k| format!("beta{k}")).collect();
    writeln!(w, "method,{},gamma_sq,loglik,iterations,converged,wall_time", betas.join(","))?;
    let values: Vec<String> = result.beta_hat.iter().map(|b| format!("{b:.16e}")).collect();
    writeln!(
        w,
        "{},{},{:.16e},{:.16e},{},{},{:.3}",
        method.as_str(),
        values.join(","),
        result.gamma_sq_hat,
        result.loglik,
        result.iterations,
        result.converged,
        if timing { result.wall_time } else { 0.0 }
    )?;
    w.flush()?;
    eprintln!(
        "beta = {:?}, gamma_sq = {:.6}, loglik = {:.6}, converged = {}",
        result.beta_hat, result.gamma_sq_hat, result.loglik, result.converged
    );
    Ok(())
}

fn study(config: &Path, out_dir: &Path, timing: bool) -> Result<()> {
    let mut config = StudyConfig::from_file(config)?;
    config.record_timing |= timing;
    let result = run_study_to_dir(&config, out_dir)?;
    let summary = summarize(&result)?;
    let failed: usize = summary.failures.iter().map(|(_, n)| n).sum();
    eprintln!("{} fits ({} failed) written to {}", result.rows.len(), failed, out_dir.display());
    Ok(())
}

fn oracle_check(bridges: usize, nodes: usize, dt: f64, intervals: usize, seed: u64, out: &Path) -> Result<()> {
    let mut w = create(out)?;
    writeln!(w, "case,interval,x_prev,y_prev,x_next,y_next,exact,bbis,em,bbis_error,em_error")?;
    for case in [OracleCase::OrnsteinUhlenbeck, OracleCase::Brownian] {
        let pairs = case.sample_intervals(intervals, dt, seed)?;
        let rows = oracle_comparison(case, &pairs, dt, nodes, bridges, seed)?;
        for (k, r) in rows.iter().enumerate() {
            writeln!(
                w,
                "{},{k},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                case.as_str(),
                r.x_prev.x,
                r.x_prev.y,
                r.x_next.x,
                r.x_next.y,
                r.exact,
                r.bbis,
                r.em,
                r.bbis_error(),
                r.em_error()
            )?;
        }
        let n = rows.len().max(1) as f64;
        eprintln!(
            "{}: mean |bbis - exact| = {:.6}, mean |em - exact| = {:.6}",
            case.as_str(),
            rows.iter().map(|r| r.bbis_error()).sum::<f64>() / n,
            rows.iter().map(|r| r.em_error()).sum::<f64>() / n
        );
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, fields_dir } => simulate(&config, &out, fields_dir.as_deref()),
        Command::Fit { track, fields, method, dt_target_h, nodes, bridges, seed, out, timing } => {
            fit_track(&track, &fields, method, dt_target_h, nodes, bridges, seed, &out, timing)
        }
        Command::Study { config, out_dir, timing } => study(&config, &out_dir, timing),
        Command::OracleCheck { bridges, nodes, dt, intervals, seed, out } => {
            oracle_check(bridges, nodes, dt, intervals, seed, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

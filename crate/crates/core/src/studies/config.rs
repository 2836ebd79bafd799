use std::path::Path;

use serde::Deserialize;

use crate::error::{invalid, Result};
use crate::estimator::Method;
use crate::field::{generate_perlin_field, quadratic_distance_field, CovariateField, GridSpec};
use crate::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    /// Fixed number of observations, Δt swept.
    Sim1,
    /// Fixed time span, Δt swept.
    Sim2,
    /// Δt fixed, number of bridge nodes N swept.
    Conv1,
    /// Δt and N fixed, number of bridges M swept.
    Conv2,
    /// Any single sweep.
    Custom,
}

/// The swept quantity of a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Dt,
    Nodes,
    Bridges,
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::Dt => "dt",
            Sweep::Nodes => "N",
            Sweep::Bridges => "M",
        }
    }
}

/// Covariate landscape: two Perlin rasters plus squared distance to the
/// centre of the domain.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    pub field_seeds: [u64; 2],
    pub frequency: f64,
    pub domain_half_width: f64,
    pub grid_nodes: usize,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self { field_seeds: [1, 2], frequency: 0.05, domain_half_width: 100.0, grid_nodes: 201 }
    }
}

impl LandscapeConfig {
    pub fn build(&self) -> Result<Vec<CovariateField<f64>>> {
        let grid = GridSpec::square(self.domain_half_width, self.grid_nodes)?;
        Ok(vec![
            generate_perlin_field(self.field_seeds[0], self.frequency, grid)?,
            generate_perlin_field(self.field_seeds[1], self.frequency, grid)?,
            quadratic_distance_field(Point2::new(0.0, 0.0)),
        ])
    }
}

/// Declarative simulation study. Parsed from a flat `key = value` file
/// (TOML syntax); every key is optional and falls back to the desk-scale
/// defaults below.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub study_kind: StudyKind,
    pub replicates: usize,
    pub true_beta: Vec<f64>,
    pub true_gamma_sq: f64,
    pub h_sim: f64,
    pub dt_values: Vec<f64>,
    pub n_values: Vec<usize>,
    pub m_values: Vec<usize>,
    /// Observations per track (every kind except `sim2`, unless `t_max` is set).
    pub n_obs: Option<usize>,
    /// Time span kept per track (`sim2`).
    pub t_max: Option<f64>,
    /// Observation interval when Δt is not swept.
    pub dt: f64,
    /// Target BBIS sub-step when N is not swept or fixed.
    pub h_target: f64,
    /// Bridges per interval when M is not swept.
    pub m: usize,
    /// Fixed node count when N is not swept; overrides `h_target`.
    pub n_nodes: Option<usize>,
    pub base_seed: u64,
    pub field_seeds: [u64; 2],
    pub frequency: f64,
    pub domain_half_width: f64,
    pub grid_nodes: usize,
    pub method: MethodName,
    pub burn_in_steps: usize,
    /// Starting points are uniform on `[-start_half_width, start_half_width]²`.
    pub start_half_width: f64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    /// Write measured fit times into `wall_time` instead of 0.
    pub record_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Bbis,
    Em,
}

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        Method::from(*self).as_str()
    }
}

impl From<MethodName> for Method {
    fn from(m: MethodName) -> Self {
        match m {
            MethodName::Bbis => Method::Bbis,
            MethodName::Em => Method::Em,
        }
    }
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            study_kind: StudyKind::Sim1,
            replicates: 20,
            true_beta: vec![4.0, 2.0, -0.1],
            true_gamma_sq: 5.0,
            h_sim: 0.01,
            dt_values: Vec::new(),
            n_values: Vec::new(),
            m_values: Vec::new(),
            n_obs: None,
            t_max: None,
            dt: 1.0,
            h_target: 0.01,
            m: 50,
            n_nodes: None,
            base_seed: 1,
            field_seeds: [1, 2],
            frequency: 0.05,
            domain_half_width: 100.0,
            grid_nodes: 201,
            method: MethodName::Bbis,
            burn_in_steps: 10_000,
            start_half_width: 50.0,
            workers: 0,
            record_timing: false,
        }
    }
}

/// How each replicate's observations are cut from the fine track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizeControl {
    Observations(usize),
    TimeSpan(f64),
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut config: Self = toml::from_str(text)?;
        config.apply_kind_defaults();
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Desk-scale preset for one of the four standard studies.
    pub fn preset(kind: StudyKind) -> Self {
        let mut config = Self { study_kind: kind, ..Self::default() };
        config.apply_kind_defaults();
        config
    }

    /// Fills the sweep and size control a study kind needs when the file
    /// leaves them out.
    fn apply_kind_defaults(&mut self) {
        let no_sweep = self.dt_values.is_empty() && self.n_values.is_empty() && self.m_values.is_empty();
        match self.study_kind {
            StudyKind::Sim1 => {
                if no_sweep {
                    self.dt_values = vec![0.05, 0.1, 0.2, 0.5, 1.0];
                }
                if self.n_obs.is_none() && self.t_max.is_none() {
                    self.n_obs = Some(1000);
                }
            }
            StudyKind::Sim2 => {
                if no_sweep {
                    self.dt_values = vec![0.05, 0.1, 0.2, 0.5, 1.0];
                }
                if self.n_obs.is_none() && self.t_max.is_none() {
                    self.t_max = Some(500.0);
                }
            }
            StudyKind::Conv1 => {
                if no_sweep {
                    self.n_values = vec![4, 9, 49, 99];
                }
                if self.n_obs.is_none() && self.t_max.is_none() {
                    self.n_obs = Some(1000);
                }
            }
            StudyKind::Conv2 => {
                if no_sweep {
                    self.m_values = vec![5, 10, 50, 100, 200];
                }
                if self.n_nodes.is_none() {
                    self.n_nodes = Some(50);
                }
                if self.n_obs.is_none() && self.t_max.is_none() {
                    self.n_obs = Some(1000);
                }
            }
            StudyKind::Custom => {
                if self.n_obs.is_none() && self.t_max.is_none() {
                    self.n_obs = Some(1000);
                }
            }
        }
    }

    pub fn sweep(&self) -> Sweep {
        if !self.dt_values.is_empty() {
            Sweep::Dt
        } else if !self.n_values.is_empty() {
            Sweep::Nodes
        } else {
            Sweep::Bridges
        }
    }

    pub fn sweep_len(&self) -> usize {
        match self.sweep() {
            Sweep::Dt => self.dt_values.len(),
            Sweep::Nodes => self.n_values.len(),
            Sweep::Bridges => self.m_values.len(),
        }
    }

    pub fn sweep_value(&self, index: usize) -> f64 {
        match self.sweep() {
            Sweep::Dt => self.dt_values[index],
            Sweep::Nodes => self.n_values[index] as f64,
            Sweep::Bridges => self.m_values[index] as f64,
        }
    }

    pub fn size_control(&self) -> SizeControl {
        match (self.t_max, self.n_obs) {
            (Some(t), _) => SizeControl::TimeSpan(t),
            (None, Some(n)) => SizeControl::Observations(n),
            (None, None) => SizeControl::Observations(1000),
        }
    }

    pub fn landscape(&self) -> LandscapeConfig {
        LandscapeConfig {
            field_seeds: self.field_seeds,
            frequency: self.frequency,
            domain_half_width: self.domain_half_width,
            grid_nodes: self.grid_nodes,
        }
    }

    /// Names of the estimated parameters in output order.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.true_beta.len()).map(|k| format!("beta{k}")).collect();
        names.push("gamma_sq".into());
        names
    }

    pub fn truths(&self) -> Vec<f64> {
        let mut t = self.true_beta.clone();
        t.push(self.true_gamma_sq);
        t
    }

    /// Thinning factor from the fine step to observation interval `dt`.
    pub fn thinning_factor(&self, dt: f64) -> Result<usize> {
        thinning_factor(dt, self.h_sim)
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = [!self.dt_values.is_empty(), !self.n_values.is_empty(), !self.m_values.is_empty()];
        if nonempty.iter().filter(|&&b| b).count() != 1 {
            return Err(invalid("exactly one of dt_values, n_values, m_values must be non-empty"));
        }
        let expected = match self.study_kind {
            StudyKind::Sim1 | StudyKind::Sim2 => Some(Sweep::Dt),
            StudyKind::Conv1 => Some(Sweep::Nodes),
            StudyKind::Conv2 => Some(Sweep::Bridges),
            StudyKind::Custom => None,
        };
        if let Some(sweep) = expected {
            if sweep != self.sweep() {
                return Err(invalid(format!("{:?} studies sweep {}", self.study_kind, sweep.name())));
            }
        }
        if self.replicates == 0 {
            return Err(invalid("replicates must be at least 1"));
        }
        if self.true_beta.len() != 3 {
            return Err(invalid("the landscape has three covariates; true_beta needs three values"));
        }
        if !(self.true_gamma_sq > 0.0) || !(self.h_sim > 0.0) || !(self.h_target > 0.0) || !(self.dt > 0.0) {
            return Err(invalid("true_gamma_sq, h_sim, h_target and dt must be positive"));
        }
        if self.m == 0 || self.m_values.contains(&0) {
            return Err(invalid("bridge counts must be at least 1"));
        }
        if self.n_values.contains(&0) {
            return Err(invalid("swept node counts must be at least 1"));
        }
        match self.size_control() {
            SizeControl::Observations(n) if n < 2 => return Err(invalid("n_obs must be at least 2")),
            SizeControl::TimeSpan(t) if !(t > 0.0) => return Err(invalid("t_max must be positive")),
            _ => {}
        }
        if !(self.start_half_width >= 0.0) {
            return Err(invalid("start_half_width must be non-negative"));
        }
        for &dt in self.dt_values.iter().chain(std::iter::once(&self.dt)) {
            if !(dt > 0.0) {
                return Err(invalid("observation intervals must be positive"));
            }
            self.thinning_factor(dt)?;
        }
        Ok(())
    }
}

/// One simulated track: model, landscape, start and observation scheme.
/// Parsed from the same flat `key = value` format as [`StudyConfig`].
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    pub true_beta: Vec<f64>,
    pub true_gamma_sq: f64,
    pub h_sim: f64,
    /// Observation interval; a whole multiple of `h_sim`.
    pub dt: f64,
    pub n_obs: Option<usize>,
    pub t_max: Option<f64>,
    pub burn_in_steps: usize,
    /// Fixed start; drawn uniformly on `[-start_half_width, start_half_width]²` when absent.
    pub x0: Option<[f64; 2]>,
    pub start_half_width: f64,
    pub seed: u64,
    pub field_seeds: [u64; 2],
    pub frequency: f64,
    pub domain_half_width: f64,
    pub grid_nodes: usize,
}

impl Default for TrackConfig {
    fn default() -> Self {
        let s = StudyConfig::default();
        Self {
            true_beta: s.true_beta,
            true_gamma_sq: s.true_gamma_sq,
            h_sim: s.h_sim,
            dt: 0.1,
            n_obs: None,
            t_max: None,
            burn_in_steps: s.burn_in_steps,
            x0: None,
            start_half_width: s.start_half_width,
            seed: 1,
            field_seeds: s.field_seeds,
            frequency: s.frequency,
            domain_half_width: s.domain_half_width,
            grid_nodes: s.grid_nodes,
        }
    }
}

impl TrackConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn landscape(&self) -> LandscapeConfig {
        LandscapeConfig {
            field_seeds: self.field_seeds,
            frequency: self.frequency,
            domain_half_width: self.domain_half_width,
            grid_nodes: self.grid_nodes,
        }
    }

    pub fn size_control(&self) -> SizeControl {
        match (self.t_max, self.n_obs) {
            (Some(t), _) => SizeControl::TimeSpan(t),
            (None, Some(n)) => SizeControl::Observations(n),
            (None, None) => SizeControl::Observations(1000),
        }
    }

    pub fn thinning_factor(&self) -> Result<usize> {
        thinning_factor(self.dt, self.h_sim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.true_beta.len() != 3 {
            return Err(invalid("the landscape has three covariates; true_beta needs three values"));
        }
        if !(self.true_gamma_sq > 0.0) || !(self.h_sim > 0.0) || !(self.dt > 0.0) {
            return Err(invalid("true_gamma_sq, h_sim and dt must be positive"));
        }
        match self.size_control() {
            SizeControl::Observations(n) if n < 2 => return Err(invalid("n_obs must be at least 2")),
            SizeControl::TimeSpan(t) if !(t > 0.0) => return Err(invalid("t_max must be positive")),
            _ => {}
        }
        if !(self.start_half_width >= 0.0) {
            return Err(invalid("start_half_width must be non-negative"));
        }
        if let Some([x, y]) = self.x0 {
            if !x.is_finite() || !y.is_finite() {
                return Err(invalid("x0 must be finite"));
            }
        }
        self.thinning_factor()?;
        Ok(())
    }
}

fn thinning_factor(dt: f64, h_sim: f64) -> Result<usize> {
    let ratio = dt / h_sim;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio.max(1.0) {
        return Err(invalid(format!("dt = {dt} is not a whole multiple of h_sim = {h_sim}")));
    }
    Ok(factor as usize)
}

//! Run manifests: layered TOML configuration (flags > file > defaults) and
//! its validation into core types.

use std::path::{Path, PathBuf};

use ppcat_core::oracle::{ModeBasis, OracleConfig};
use ppcat_core::sde::{InitialState, RunConfig};
use ppcat_core::{Boundary, ModelParams, SchemeSpec, C64};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Version of every file layout written by this crate.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Transient,
    RegimeSweep,
    ParityDecay,
    MomentumScan,
    Reconstruct,
    Oracle,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Transient => "transient",
            Experiment::RegimeSweep => "regime_sweep",
            Experiment::ParityDecay => "parity_decay",
            Experiment::MomentumScan => "momentum_scan",
            Experiment::Reconstruct => "reconstruct",
            Experiment::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub model: ModelSection,
    pub simulation: SimulationSection,
    pub initial: InitialSection,
    pub oracle: OracleSection,
    pub sweep: SweepSection,
    pub parity_decay: ParityDecaySection,
    pub momentum: MomentumSection,
    pub reconstruct: ReconstructSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub sites: usize,
    pub epsilon: f64,
    pub epsilon_im: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub gamma: f64,
    pub phi: f64,
    /// `periodic` or `open`.
    pub boundary: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub scheme: String,
    pub dt: f64,
    pub t_final: f64,
    pub trajectories: usize,
    pub subensembles: usize,
    pub record_intervals: usize,
    pub divergence_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// `vacuum`, `cat` or `coherent`.
    pub kind: String,
    /// Cat amplitude as `[re, im]`; defaults to the steady two-photon lobe.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<[f64; 2]>,
    pub sign: i8,
    /// Coherent amplitudes per site as `[re, im]`.
    pub amplitudes: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub enabled: bool,
    /// `site` or `momentum`.
    pub basis: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoffs: Option<Vec<usize>>,
    pub max_dim: usize,
    pub truncation_limit: f64,
    pub step_norm: f64,
    pub auto_cutoff: bool,
    pub local_parity: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit `[kappa1, kappa2]` points, evaluated first.
    pub points: Vec<[f64; 2]>,
    /// Grid axes; the sweep adds every `(kappa1, kappa2)` combination.
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
    pub sigma_factor: f64,
    /// Widen transient comparisons to keep the run-wide false-alarm rate at
    /// the single-point rate of `sigma_factor`.
    pub family_wise: bool,
    pub match_floor: f64,
    pub snr_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParityDecaySection {
    pub schemes: Vec<String>,
    /// Standard error of the parity above which a record is flagged.
    pub stderr_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumSection {
    /// `normal` or `full` ordering of `n²` in the Cauchy–Schwarz ratio.
    pub ordering: String,
    pub snr_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructSection {
    pub times: Vec<f64>,
    /// `site` or `momentum`.
    pub mode: String,
    /// Mode index; defaults to site 0 or the dark momentum mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub cutoff: usize,
    pub wigner_extent: f64,
    pub wigner_points: usize,
}

impl Config {
    /// Built-in defaults for one experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = Config {
            seed: 1,
            model: ModelSection {
                sites: 1,
                epsilon: 1.0,
                epsilon_im: 0.0,
                kappa1: 5.0,
                kappa2: 0.2,
                gamma: 0.0,
                phi: 0.0,
                boundary: "periodic".into(),
            },
            simulation: SimulationSection {
                scheme: "pp_diag".into(),
                dt: 1e-3,
                t_final: 5.0,
                trajectories: 100_000,
                subensembles: 20,
                record_intervals: 100,
                divergence_threshold: 1e6,
            },
            initial: InitialSection {
                kind: "vacuum".into(),
                zeta: None,
                sign: 1,
                amplitudes: Vec::new(),
            },
            oracle: OracleSection {
                enabled: true,
                basis: "site".into(),
                cutoffs: None,
                max_dim: 4096,
                truncation_limit: 1e-6,
                step_norm: 2.0,
                auto_cutoff: true,
                local_parity: false,
            },
            sweep: SweepSection {
                points: vec![[1e-3, 1.0], [1e-3, 0.2], [5.0, 0.2], [200.0, 0.2]],
                kappa1: Vec::new(),
                kappa2: Vec::new(),
                sigma_factor: 3.0,
                family_wise: true,
                match_floor: 1e-2,
                snr_threshold: 3.0,
            },
            parity_decay: ParityDecaySection {
                schemes: ["pp_choice1", "gp_choice1", "pp_diag", "gp_choice2"]
                    .map(String::from)
                    .to_vec(),
                stderr_limit: 0.5,
            },
            momentum: MomentumSection {
                ordering: "normal".into(),
                snr_threshold: 3.0,
            },
            reconstruct: ReconstructSection {
                times: vec![3.0],
                mode: "site".into(),
                index: None,
                cutoff: 32,
                wigner_extent: 5.0,
                wigner_points: 101,
            },
        };
        match experiment {
            Experiment::Transient | Experiment::Oracle => c.simulation.subensembles = 100,
            Experiment::RegimeSweep => {}
            Experiment::ParityDecay => {
                c.model.kappa1 = 1e-3;
                c.model.kappa2 = 1.0;
                c.simulation.t_final = 3.0;
                c.simulation.record_intervals = 300;
                c.initial.kind = "cat".into();
            }
            Experiment::MomentumScan => {
                c.model.sites = 7;
                c.model.kappa1 = 1e-3;
                c.model.gamma = 2.0;
            }
            Experiment::Reconstruct => c.model.kappa1 = 1e-3,
        }
        c
    }

    /// Defaults overlaid with the TOML text of a config file.
    pub fn from_toml(experiment: Experiment, text: &str) -> Result<Self, CliError> {
        let file: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut merged =
            toml::Table::try_from(Self::defaults(experiment)).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut merged, file);
        toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    pub fn load(experiment: Experiment, path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml(experiment, &text)
            }
            None => Ok(Self::defaults(experiment)),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(n) = o.trajectories {
            self.simulation.trajectories = n;
        }
        if let Some(s) = o.subensembles {
            self.simulation.subensembles = s;
        }
        if let Some(dt) = o.dt {
            self.simulation.dt = dt;
        }
        if o.no_oracle {
            self.oracle.enabled = false;
        }
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let m = &self.model;
        let boundary = match m.boundary.as_str() {
            "periodic" => Boundary::Periodic,
            "open" => Boundary::Open,
            other => {
                return Err(invalid(
                    "model.boundary",
                    format!("expected `periodic` or `open`, got `{other}`"),
                ))
            }
        };
        ModelParams::new(
            m.sites,
            C64::new(m.epsilon, m.epsilon_im),
            m.kappa1,
            m.kappa2,
            m.gamma,
            m.phi,
            boundary,
        )
        .map_err(|e| prefixed("model", e))
    }

    pub fn scheme(&self) -> Result<SchemeSpec, CliError> {
        SchemeSpec::from_label(&self.simulation.scheme).map_err(|e| prefixed("simulation", e))
    }

    /// Cat amplitude: the configured one or the steady lobe `√(−2iε/κ₂)`.
    pub fn cat_zeta(&self) -> Result<C64, CliError> {
        if let Some([re, im]) = self.initial.zeta {
            return Ok(C64::new(re, im));
        }
        if self.model.kappa2 <= 0.0 {
            return Err(invalid("initial.zeta", "required when model.kappa2 = 0"));
        }
        let eps = C64::new(self.model.epsilon, self.model.epsilon_im);
        Ok((C64::new(0.0, -2.0) * eps / self.model.kappa2).sqrt())
    }

    pub fn initial_state(&self) -> Result<InitialState, CliError> {
        match self.initial.kind.as_str() {
            "vacuum" => Ok(InitialState::Vacuum),
            "cat" => Ok(InitialState::Cat {
                zeta: self.cat_zeta()?,
                sign: self.initial.sign,
            }),
            "coherent" => Ok(InitialState::Coherent(
                self.initial
                    .amplitudes
                    .iter()
                    .map(|&[re, im]| C64::new(re, im))
                    .collect(),
            )),
            other => Err(invalid(
                "initial.kind",
                format!("expected `vacuum`, `cat` or `coherent`, got `{other}`"),
            )),
        }
    }

    /// Core run configuration for `scheme`, validated.
    pub fn run_config(&self, scheme: SchemeSpec, seed: u64) -> Result<RunConfig, CliError> {
        self.run_config_for(self.params()?, scheme, seed)
    }

    pub fn run_config_for(&self, params: ModelParams, scheme: SchemeSpec, seed: u64) -> Result<RunConfig, CliError> {
        let s = &self.simulation;
        let initial = self.initial_state()?;
        RunConfig::new(params, scheme, s.dt, s.t_final, s.trajectories, s.subensembles, seed)
            .and_then(|c| c.with_uniform_records(s.record_intervals))
            .and_then(|c| c.with_divergence_threshold(s.divergence_threshold))
            .and_then(|c| c.with_initial_state(initial))
            .map_err(|e| prefixed("simulation", e))
    }

    pub fn oracle_config(&self) -> Result<OracleConfig, CliError> {
        let o = &self.oracle;
        let basis = match o.basis.as_str() {
            "site" => ModeBasis::Site,
            "momentum" => ModeBasis::Momentum,
            other => {
                return Err(invalid(
                    "oracle.basis",
                    format!("expected `site` or `momentum`, got `{other}`"),
                ))
            }
        };
        if !(o.step_norm > 0.0 && o.step_norm <= 2.5) {
            return Err(invalid(
                "oracle.step_norm",
                format!("must lie in (0, 2.5], got {}", o.step_norm),
            ));
        }
        if !(o.truncation_limit > 0.0) {
            return Err(invalid("oracle.truncation_limit", "must be positive"));
        }
        if let Some(c) = &o.cutoffs {
            if c.len() != self.model.sites {
                return Err(invalid(
                    "oracle.cutoffs",
                    format!("expected {} entries, got {}", self.model.sites, c.len()),
                ));
            }
        }
        Ok(OracleConfig {
            basis,
            cutoffs: o.cutoffs.clone(),
            max_dim: o.max_dim,
            truncation_limit: o.truncation_limit,
            step_norm: o.step_norm,
            auto_cutoff: o.auto_cutoff,
            use_symmetries: !matches!(self.initial.kind.as_str(), "coherent"),
        })
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trajectories: Option<usize>,
    pub subensembles: Option<usize>,
    pub dt: Option<f64>,
    pub no_oracle: bool,
}

/// Everything one invocation needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub config: Config,
    pub output_dir: PathBuf,
    /// Worker threads; affects speed only.
    pub threads: Option<usize>,
}

impl RunManifest {
    pub fn new(experiment: Experiment, config: Config, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            experiment,
            config,
            output_dir: output_dir.into(),
            threads: None,
        }
    }

    pub fn format_version(&self) -> u32 {
        FORMAT_VERSION
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::Config(format!("{field}: {}", reason.into()))
}

fn prefixed(section: &str, e: ppcat_core::Error) -> CliError {
    match e {
        ppcat_core::Error::InvalidParameter { field, reason } => {
            let field = match field.as_str() {
                "n_sites" => "sites",
                "n_trajectories" => "trajectories",
                "n_subensembles" => "subensembles",
                "record_times" => "record_intervals",
                f => f,
            };
            let path = if field.starts_with("initial") {
                field.to_string()
            } else {
                format!("{section}.{field}")
            };
            CliError::Config(format!("{path}: {reason}"))
        }
        other => CliError::Config(other.to_string()),
    }
}

//! Exact reference solutions: truncated-Fock Lindblad integration and
//! steady states of small lattices, plus reference states.

mod basis;
mod observables;
mod sparse;
mod states;
mod system;

use num_complex::Complex64 as C64;

pub use basis::{BlockOp, BlockPart, FockBasis, SectorMap};
pub use observables::{expectation, single_mode_density, site_lowering, OracleObservables, OracleProbe};
pub use sparse::SparseOp;
pub use states::{
    cat_state_density, coherent_amplitudes, coherent_mixture, coherent_state_density, BuiltState, STATE_TAIL_LIMIT,
};
pub use system::{BlockState, EvolveReport, LindbladSystem, SteadyMethod, SteadyOptions, SteadyState};

use crate::error::{Error, Result};
use crate::estimators::ReferenceSeries;
use crate::model::ModelParams;
use crate::momentum::MomentumGrid;
use crate::reconstruction::FockDensityMatrix;

/// Single-particle basis of the truncated Fock space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ModeBasis {
    #[default]
    Site,
    /// Plane-wave modes of a periodic ring; the dark mode can carry a large
    /// cutoff while the damped modes stay small.
    Momentum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub basis: ModeBasis,
    /// Per-mode cutoffs; `None` selects [`default_cutoffs`].
    pub cutoffs: Option<Vec<usize>>,
    pub max_dim: usize,
    /// Largest tolerated population of any mode's top Fock level.
    pub truncation_limit: f64,
    /// RK4 steps satisfy `‖L‖·dt ≤ step_norm` for the norm bound of `L`.
    /// The stability region of RK4 contains the closed left half-disk of
    /// radius 2.6, so values up to 2.5 are stable.
    pub step_norm: f64,
    /// Raise the cutoff of a failing mode and retry instead of failing.
    pub auto_cutoff: bool,
    /// Block-diagonalise by parity and total momentum. States that mix
    /// sectors, such as coherent states, need this off.
    pub use_symmetries: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            basis: ModeBasis::Site,
            cutoffs: None,
            max_dim: 4096,
            truncation_limit: 1e-6,
            step_norm: 2.0,
            auto_cutoff: true,
            use_symmetries: true,
        }
    }
}

/// Cutoff for a mode expected to hold about `n` photons.
pub fn cutoff_for_population(n: f64) -> usize {
    (n + 5.0 * n.sqrt()).ceil() as usize + 6
}

/// Cutoff of a mode whose population is not set by two-photon balance.
const UNBALANCED_CUTOFF: usize = 20;
/// Cutoff of the damped plane-wave modes.
const BRIGHT_MODE_CUTOFF: usize = 3;

/// Default cutoffs: the two-photon steady lobe `|2ε/κ₂|` per site, or
/// `|2εN/κ₂|` for the dark mode in the plane-wave basis.
pub fn default_cutoffs(params: &ModelParams, basis: ModeBasis) -> Vec<usize> {
    let n = params.n_sites();
    let lobe = |scale: f64| {
        if params.kappa2() > 0.0 {
            cutoff_for_population(scale * 2.0 * params.epsilon().norm() / params.kappa2())
        } else {
            UNBALANCED_CUTOFF
        }
    };
    match basis {
        ModeBasis::Site => vec![lobe(1.0); n],
        ModeBasis::Momentum => {
            let dark = MomentumGrid::new(n, params.phi()).map(|g| g.dark_index()).unwrap_or(0);
            (0..n)
                .map(|k| {
                    if k == dark || n == 1 {
                        lobe(n as f64)
                    } else {
                        BRIGHT_MODE_CUTOFF
                    }
                })
                .collect()
        }
    }
}

/// Initial state of an oracle run.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleInitial {
    Vacuum,
    /// Single-mode cat `𝒩(|ζ⟩ ± |−ζ⟩)`.
    Cat {
        zeta: C64,
        sign: i8,
    },
    /// Arbitrary state given as a dense matrix in the system's basis.
    Dense(nalgebra::DMatrix<C64>),
}

/// Result of [`solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRun {
    pub times: Vec<f64>,
    pub observables: Vec<OracleObservables>,
    /// Dense single-mode matrices at each time (single mode only).
    pub states: Vec<FockDensityMatrix>,
    pub cutoffs: Vec<usize>,
    pub report: EvolveReport,
}

impl OracleRun {
    /// Site-0 single-mode curves for regime comparisons.
    pub fn reference(&self) -> ReferenceSeries {
        ReferenceSeries {
            times: self.times.clone(),
            n: self.observables.iter().map(|o| o.n[0]).collect(),
            zeta: self.observables.iter().map(|o| o.zeta[0]).collect(),
            g2: self.observables.iter().map(|o| o.g2[0]).collect(),
            parity: self.observables.iter().map(|o| o.global_parity).collect(),
        }
    }
}

fn initial_state(sys: &LindbladSystem, initial: &OracleInitial) -> Result<BlockState> {
    match initial {
        OracleInitial::Vacuum => Ok(sys.vacuum()),
        OracleInitial::Cat { zeta, sign } => {
            if sys.params().n_sites() != 1 {
                return Err(Error::invalid("initial", "cat initial states are single-mode"));
            }
            let built = cat_state_density(*zeta, *sign, sys.cutoffs()[0])?;
            if built.truncation_warning() {
                return Err(Error::Truncation {
                    mode: 0,
                    population: built.tail,
                    limit: STATE_TAIL_LIMIT,
                    time: 0.0,
                });
            }
            sys.state_from_dense(&built.rho.elements)
        }
        OracleInitial::Dense(rho) => sys.state_from_dense(rho),
    }
}

/// Integrate the master equation through `times`, measuring the
/// observables at each. With `auto_cutoff`, a truncation failure raises
/// the failing mode's cutoff and restarts while the dimension budget allows.
pub fn solve(
    params: &ModelParams,
    config: &OracleConfig,
    initial: &OracleInitial,
    times: &[f64],
    local_parity: bool,
) -> Result<OracleRun> {
    let mut cutoffs = config
        .cutoffs
        .clone()
        .unwrap_or_else(|| default_cutoffs(params, config.basis));
    if let OracleInitial::Cat { zeta, .. } = initial {
        let need = cutoff_for_population(zeta.norm_sqr());
        if params.n_sites() == 1 && cutoffs[0] < need {
            cutoffs[0] = need;
        }
    }
    loop {
        let cfg = OracleConfig {
            cutoffs: Some(cutoffs.clone()),
            ..config.clone()
        };
        let sys = LindbladSystem::new(params, &cfg)?;
        let probe = OracleProbe::new(&sys, local_parity);
        let rho0 = initial_state(&sys, initial);
        let attempt = rho0.and_then(|rho0| {
            let mut observables = Vec::with_capacity(times.len());
            let mut states = Vec::new();
            let report = sys.evolve(&rho0, times, |_, s| {
                observables.push(probe.measure(&sys, s));
                if params.n_sites() == 1 {
                    states.push(single_mode_density(&sys, s)?);
                }
                Ok(())
            })?;
            Ok(OracleRun {
                times: times.to_vec(),
                observables,
                states,
                cutoffs: cutoffs.clone(),
                report,
            })
        });
        match attempt {
            Err(Error::Truncation { mode, .. }) if config.auto_cutoff => {
                let mut next = cutoffs.clone();
                next[mode] += (next[mode] / 8).max(2);
                if FockBasis::dimension_of(&next) > config.max_dim {
                    return attempt;
                }
                cutoffs = next;
            }
            other => return other,
        }
    }
}

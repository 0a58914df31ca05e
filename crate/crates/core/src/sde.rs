//! Fixed-step Euler–Maruyama (Itô) integration of trajectory ensembles,
//! including the gauge weight `Ω`, divergence freezing and deterministic
//! ensemble-parallel execution.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{self, ModelParams, PhasePoint, SchemeSpec};
use crate::rng::NoiseStream;

pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e6;
/// Number of uniform intervals of the default record grid.
pub const DEFAULT_RECORD_INTERVALS: usize = 100;

/// How trajectories are initialised.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum InitialState {
    #[default]
    Vacuum,
    /// Single-mode cat `|ζ⟩ ± |−ζ⟩` sampled from the four-atom distribution.
    Cat { zeta: C64, sign: i8 },
    /// Deterministic coherent product state, `β = α*`.
    Coherent(Vec<C64>),
}

/// Complete, validated description of an ensemble run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    params: ModelParams,
    scheme: SchemeSpec,
    dt: f64,
    n_steps: u64,
    n_trajectories: usize,
    n_subensembles: usize,
    seed: u64,
    record_steps: Vec<u64>,
    divergence_threshold: f64,
    initial: InitialState,
}

impl RunConfig {
    /// Run with the default record grid (100 uniform intervals over
    /// `[0, t_final]`), vacuum initial state and divergence threshold 1e6.
    pub fn new(
        params: ModelParams,
        scheme: SchemeSpec,
        dt: f64,
        t_final: f64,
        n_trajectories: usize,
        n_subensembles: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(Error::invalid("t_final", format!("must be >= 0, got {t_final}")));
        }
        if n_trajectories == 0 {
            return Err(Error::invalid("n_trajectories", "must be positive"));
        }
        if n_subensembles == 0 {
            return Err(Error::invalid("n_subensembles", "must be positive"));
        }
        if n_trajectories % n_subensembles != 0 {
            return Err(Error::invalid(
                "n_trajectories",
                format!("{n_trajectories} is not divisible by n_subensembles = {n_subensembles}"),
            ));
        }
        let n_steps = (t_final / dt).round() as u64;
        let mut cfg = Self {
            params,
            scheme,
            dt,
            n_steps,
            n_trajectories,
            n_subensembles,
            seed,
            record_steps: Vec::new(),
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            initial: InitialState::Vacuum,
        };
        let grid: Vec<f64> = (0..=DEFAULT_RECORD_INTERVALS)
            .map(|i| cfg.t_final() * i as f64 / DEFAULT_RECORD_INTERVALS as f64)
            .collect();
        cfg = cfg.with_record_times(&grid)?;
        Ok(cfg)
    }

    /// Replace the record grid. Times are snapped to the nearest multiple of
    /// `dt`; duplicates after snapping are merged.
    pub fn with_record_times(mut self, times: &[f64]) -> Result<Self> {
        let mut steps = Vec::with_capacity(times.len());
        for &t in times {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::invalid("record_times", format!("invalid time {t}")));
            }
            let s = (t / self.dt).round() as u64;
            if s > self.n_steps {
                return Err(Error::invalid(
                    "record_times",
                    format!("time {t} lies beyond t_final = {}", self.t_final()),
                ));
            }
            steps.push(s);
        }
        steps.sort_unstable();
        steps.dedup();
        self.record_steps = steps;
        Ok(self)
    }

    /// Record grid of `intervals` uniform intervals over `[0, t_final]`.
    pub fn with_uniform_records(self, intervals: usize) -> Result<Self> {
        let intervals = intervals.max(1);
        let t_final = self.t_final();
        let grid: Vec<f64> = (0..=intervals).map(|i| t_final * i as f64 / intervals as f64).collect();
        self.with_record_times(&grid)
    }

    pub fn with_divergence_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::invalid("divergence_threshold", "must be positive and finite"));
        }
        self.divergence_threshold = threshold;
        Ok(self)
    }

    pub fn with_initial_state(mut self, initial: InitialState) -> Result<Self> {
        match &initial {
            InitialState::Cat { zeta, sign } => {
                if self.params.n_sites() != 1 {
                    return Err(Error::invalid("initial", "cat sampling is single-mode"));
                }
                if *sign != 1 && *sign != -1 {
                    return Err(Error::invalid("initial.sign", "must be +1 or -1"));
                }
                if !(zeta.re.is_finite() && zeta.im.is_finite()) {
                    return Err(Error::invalid("initial.zeta", "must be finite"));
                }
            }
            InitialState::Coherent(amps) if amps.len() != self.params.n_sites() => {
                return Err(Error::invalid(
                    "initial",
                    format!(
                        "expected {} coherent amplitudes, got {}",
                        self.params.n_sites(),
                        amps.len()
                    ),
                ));
            }
            _ => {}
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    pub fn scheme(&self) -> SchemeSpec {
        self.scheme
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn n_steps(&self) -> u64 {
        self.n_steps
    }
    pub fn t_final(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
    pub fn n_trajectories(&self) -> usize {
        self.n_trajectories
    }
    pub fn n_subensembles(&self) -> usize {
        self.n_subensembles
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn divergence_threshold(&self) -> f64 {
        self.divergence_threshold
    }
    pub fn initial_state(&self) -> &InitialState {
        &self.initial
    }
    pub fn record_steps(&self) -> &[u64] {
        &self.record_steps
    }
    pub fn record_times(&self) -> Vec<f64> {
        self.record_steps.iter().map(|&s| s as f64 * self.dt).collect()
    }
    /// Real noise channels drawn per step.
    pub fn channels(&self) -> usize {
        self.scheme.noises_per_site() * self.params.n_sites()
    }
}

/// State of one stochastic trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryState {
    pub point: PhasePoint,
    /// Gauge weight `Ω`; constant for ungauged schemes.
    pub weight: C64,
    pub stream: NoiseStream,
    /// Time at which the trajectory left the valid region; frozen afterwards.
    pub diverged_at: Option<f64>,
}

impl TrajectoryState {
    pub fn new(point: PhasePoint, weight: C64, stream: NoiseStream) -> Self {
        Self {
            point,
            weight,
            stream,
            diverged_at: None,
        }
    }

    pub fn is_active(&self) -> bool {
        self.diverged_at.is_none()
    }
}

/// Build the initial trajectory `index` of a run.
pub fn initial_trajectory(config: &RunConfig, index: usize) -> Result<TrajectoryState> {
    let n = config.params.n_sites();
    let (point, weight) = match &config.initial {
        InitialState::Vacuum => (model::sample_vacuum(n), 1.0),
        InitialState::Cat { zeta, sign } => {
            let mut init = NoiseStream::for_initial_state(config.seed, index as u64);
            model::sample_cat(*zeta, *sign, init.uniform())?
        }
        InitialState::Coherent(amps) => (
            PhasePoint {
                alpha: amps.clone(),
                beta: amps.iter().map(|z| z.conj()).collect(),
            },
            1.0,
        ),
    };
    Ok(TrajectoryState::new(
        point,
        C64::new(weight, 0.0),
        NoiseStream::new(config.seed, index as u64),
    ))
}

/// Itô weight update `Ω' = Ω (1 + Σ g_k dW_k)`.
pub fn evolve_weight(omega: C64, gauge: &[C64], increments: &[f64]) -> Result<C64> {
    if gauge.len() != increments.len() {
        return Err(Error::DimensionMismatch {
            expected: gauge.len(),
            actual: increments.len(),
        });
    }
    let s: C64 = gauge.iter().zip(increments).map(|(g, dw)| g * *dw).sum();
    Ok(omega * (1.0 + s))
}

/// Per-thread scratch space of the integrator.
#[derive(Clone, Debug)]
pub struct Scratch {
    drift: Vec<C64>,
    dw: Vec<f64>,
    alpha: Vec<C64>,
    beta: Vec<C64>,
}

/// Precomputed single-step update for one configuration.
#[derive(Clone, Debug)]
pub struct Integrator {
    params: ModelParams,
    scheme: SchemeSpec,
    dt: f64,
    sqrt_dt: f64,
    drives: Vec<C64>,
    threshold: f64,
}

impl Integrator {
    pub fn new(config: &RunConfig) -> Self {
        Self::from_parts(
            config.params.clone(),
            config.scheme,
            config.dt,
            config.divergence_threshold,
        )
    }

    pub fn from_parts(params: ModelParams, scheme: SchemeSpec, dt: f64, threshold: f64) -> Self {
        let drives = (0..params.n_sites()).map(|j| params.drive(j)).collect();
        Self {
            params,
            scheme,
            dt,
            sqrt_dt: dt.sqrt(),
            drives,
            threshold,
        }
    }

    pub fn channels(&self) -> usize {
        self.scheme.noises_per_site() * self.params.n_sites()
    }

    pub fn scratch(&self) -> Scratch {
        let n = self.params.n_sites();
        Scratch {
            drift: vec![C64::new(0.0, 0.0); 2 * n],
            dw: vec![0.0; self.channels()],
            alpha: vec![C64::new(0.0, 0.0); n],
            beta: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// One Euler–Maruyama step with fresh increments from the trajectory's
    /// stream. `t_after` is the time at the end of the step, recorded if the
    /// trajectory diverges.
    pub fn step(&self, state: &mut TrajectoryState, t_after: f64, scratch: &mut Scratch) {
        if state.diverged_at.is_some() {
            return;
        }
        state.stream.standard_normals(&mut scratch.dw);
        for x in scratch.dw.iter_mut() {
            *x *= self.sqrt_dt;
        }
        self.apply(state, t_after, scratch);
    }

    /// One step with caller-supplied Wiener increments (length
    /// [`Integrator::channels`]).
    pub fn step_with_increments(
        &self,
        state: &mut TrajectoryState,
        increments: &[f64],
        t_after: f64,
        scratch: &mut Scratch,
    ) -> Result<()> {
        if increments.len() != scratch.dw.len() {
            return Err(Error::DimensionMismatch {
                expected: scratch.dw.len(),
                actual: increments.len(),
            });
        }
        if state.diverged_at.is_some() {
            return Err(Error::contract("cannot step a diverged trajectory"));
        }
        scratch.dw.copy_from_slice(increments);
        self.apply(state, t_after, scratch);
        Ok(())
    }

    fn apply(&self, state: &mut TrajectoryState, t_after: f64, scratch: &mut Scratch) {
        let n = self.params.n_sites();
        let k2 = self.params.kappa2();
        let dt = self.dt;
        let alpha = &state.point.alpha;
        let beta = &state.point.beta;
        model::drift_into(&self.params, alpha, beta, &mut scratch.drift);

        let gauged = self.scheme.is_gauged();
        let mut weight_sum = C64::new(0.0, 0.0);
        for j in 0..n {
            let (a, b) = (alpha[j], beta[j]);
            let eps = self.drives[j];
            let block = model::site_noise(self.scheme.decomposition(), k2, eps, a, b);
            let mut da = scratch.drift[j] * dt;
            let mut db = scratch.drift[n + j] * dt;
            if gauged {
                let g = model::site_gauge(self.scheme.gauge(), k2, eps, a, b);
                for c in 0..block.cols {
                    let dw = scratch.dw[model::noise_column(n, j, c)];
                    let shift = dw - g[c] * dt;
                    da += block.rows[0][c] * shift;
                    db += block.rows[1][c] * shift;
                    weight_sum += g[c] * dw;
                }
            } else {
                for c in 0..block.cols {
                    let dw = scratch.dw[model::noise_column(n, j, c)];
                    da += block.rows[0][c] * dw;
                    db += block.rows[1][c] * dw;
                }
            }
            scratch.alpha[j] = a + da;
            scratch.beta[j] = b + db;
        }

        let limit = self.threshold;
        let ok = scratch
            .alpha
            .iter()
            .chain(&scratch.beta)
            .all(|z| z.re.is_finite() && z.im.is_finite() && z.norm() <= limit);
        let new_weight = if gauged {
            state.weight * (1.0 + weight_sum)
        } else {
            state.weight
        };
        if !ok || !(new_weight.re.is_finite() && new_weight.im.is_finite()) {
            state.diverged_at = Some(t_after);
            return;
        }
        state.point.alpha.copy_from_slice(&scratch.alpha);
        state.point.beta.copy_from_slice(&scratch.beta);
        state.weight = new_weight;
    }
}

/// Borrowed view of an ensemble at one time, partitioned into equal
/// subensembles in trajectory-index order.
#[derive(Clone, Copy, Debug)]
pub struct EnsembleView<'a> {
    pub time: f64,
    pub trajectories: &'a [TrajectoryState],
    n_subensembles: usize,
}

impl<'a> EnsembleView<'a> {
    pub fn new(time: f64, trajectories: &'a [TrajectoryState], n_subensembles: usize) -> Result<Self> {
        if n_subensembles == 0 || trajectories.len() % n_subensembles != 0 || trajectories.is_empty() {
            return Err(Error::contract(format!(
                "{} trajectories cannot be split into {} equal subensembles",
                trajectories.len(),
                n_subensembles
            )));
        }
        Ok(Self {
            time,
            trajectories,
            n_subensembles,
        })
    }

    pub fn n_subensembles(&self) -> usize {
        self.n_subensembles
    }

    pub fn n_sites(&self) -> usize {
        self.trajectories[0].point.n_sites()
    }

    pub fn subensembles(&self) -> impl Iterator<Item = &'a [TrajectoryState]> + '_ {
        self.trajectories.chunks(self.trajectories.len() / self.n_subensembles)
    }

    pub fn diverged(&self) -> usize {
        self.trajectories.iter().filter(|t| !t.is_active()).count()
    }

    pub fn divergence_fraction(&self) -> f64 {
        self.diverged() as f64 / self.trajectories.len() as f64
    }
}

/// Wrap phase points (with optional weights) as inert trajectories, e.g. for
/// evaluating estimators on analytically sampled ensembles.
pub fn trajectories_from_points(points: Vec<PhasePoint>, weights: Option<Vec<C64>>) -> Vec<TrajectoryState> {
    let weights = weights.unwrap_or_else(|| vec![C64::new(1.0, 0.0); points.len()]);
    points
        .into_iter()
        .zip(weights)
        .enumerate()
        .map(|(i, (p, w))| TrajectoryState::new(p, w, NoiseStream::new(0, i as u64)))
        .collect()
}

/// Receives the ensemble at every record time.
pub trait EnsembleObserver {
    fn observe(&mut self, view: &EnsembleView<'_>) -> Result<()>;
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Completed,
    /// Every trajectory diverged; the record stops at `at`.
    AllDiverged {
        at: f64,
    },
}

/// Per-record bookkeeping of a run. Observables live in the observers.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub diverged: Vec<usize>,
    pub n_trajectories: usize,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn divergence_fraction(&self) -> Vec<f64> {
        self.diverged
            .iter()
            .map(|&d| d as f64 / self.n_trajectories as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool. Never affects results.
    pub threads: Option<usize>,
}

/// Evolve `config.n_trajectories()` trajectories and hand the ensemble to
/// every observer at each record time.
pub fn run_ensemble(
    config: &RunConfig,
    observers: &mut [&mut dyn EnsembleObserver],
    options: RunOptions,
) -> Result<RunRecord> {
    let pool = match options.threads {
        Some(n) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    run_inner(config, observers, pool.as_ref())
}

fn in_pool<R: Send>(pool: Option<&rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

/// Trajectories per parallel work item.
const CHUNK: usize = 256;

fn run_inner(
    config: &RunConfig,
    observers: &mut [&mut dyn EnsembleObserver],
    pool: Option<&rayon::ThreadPool>,
) -> Result<RunRecord> {
    let integrator = Integrator::new(config);
    let mut ensemble: Vec<TrajectoryState> = in_pool(pool, || {
        (0..config.n_trajectories)
            .into_par_iter()
            .map(|i| initial_trajectory(config, i))
            .collect::<Result<_>>()
    })?;

    let dt = config.dt;
    let mut record = RunRecord {
        times: Vec::with_capacity(config.record_steps.len()),
        diverged: Vec::with_capacity(config.record_steps.len()),
        n_trajectories: config.n_trajectories,
        status: RunStatus::Completed,
    };
    let mut current = 0u64;
    for &target in &config.record_steps {
        if target > current {
            let from = current;
            let integrator = &integrator;
            let ensemble = &mut ensemble;
            in_pool(pool, move || {
                ensemble.par_chunks_mut(CHUNK).for_each_init(
                    || integrator.scratch(),
                    |scratch, chunk| {
                        for traj in chunk.iter_mut() {
                            for s in from..target {
                                if traj.diverged_at.is_some() {
                                    break;
                                }
                                integrator.step(traj, (s + 1) as f64 * dt, scratch);
                            }
                        }
                    },
                )
            });
            current = target;
        }
        let time = target as f64 * dt;
        let view = EnsembleView::new(time, &ensemble, config.n_subensembles)?;
        let diverged = view.diverged();
        for obs in observers.iter_mut() {
            obs.observe(&view)?;
        }
        record.times.push(time);
        record.diverged.push(diverged);
        if diverged == config.n_trajectories {
            record.status = RunStatus::AllDiverged { at: time };
            break;
        }
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Gauge;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn trivial_model_does_not_move() {
        let p = ModelParams::single_mode(0.0, 0.0, 0.0).unwrap();
        let cfg = RunConfig::new(p, SchemeSpec::POSITIVE_P, 0.01, 1.0, 4, 2, 5)
            .unwrap()
            .with_initial_state(InitialState::Coherent(vec![c(0.7, -0.2)]))
            .unwrap();
        let integ = Integrator::new(&cfg);
        let mut st = initial_trajectory(&cfg, 0).unwrap();
        let before = st.point.clone();
        let mut scratch = integ.scratch();
        for s in 0..100 {
            integ.step(&mut st, (s + 1) as f64 * 0.01, &mut scratch);
        }
        assert_eq!(st.point, before);
        assert_eq!(st.weight, c(1.0, 0.0));
    }

    #[test]
    fn weight_update_arithmetic() {
        assert_eq!(
            evolve_weight(c(1.0, 0.0), &[c(0.0, 0.0); 3], &[0.3, -0.1, 2.0]).unwrap(),
            c(1.0, 0.0)
        );
        let w = evolve_weight(c(1.0, 0.0), &[c(1.0, 0.0), c(0.0, 0.0)], &[0.1, 0.5]).unwrap();
        assert!((w - c(1.1, 0.0)).norm() < 1e-15);
        assert!(evolve_weight(c(1.0, 0.0), &[c(1.0, 0.0)], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn ungauged_runs_keep_unit_weight() {
        let p = ModelParams::single_mode(1.0, 1e-3, 1.0).unwrap();
        let cfg = RunConfig::new(p, SchemeSpec::POSITIVE_P_SPLIT, 1e-3, 0.5, 8, 2, 1).unwrap();
        let integ = Integrator::new(&cfg);
        let mut scratch = integ.scratch();
        for i in 0..8 {
            let mut st = initial_trajectory(&cfg, i).unwrap();
            for s in 0..500 {
                integ.step(&mut st, (s + 1) as f64 * 1e-3, &mut scratch);
            }
            assert_eq!(st.weight, c(1.0, 0.0));
        }
    }

    #[test]
    fn divergence_freezes_the_trajectory() {
        let p = ModelParams::single_mode(1.0, 0.0, 0.0).unwrap();
        let cfg = RunConfig::new(p, SchemeSpec::POSITIVE_P, 0.1, 1.0, 1, 1, 0)
            .unwrap()
            .with_divergence_threshold(1.0)
            .unwrap();
        let integ = Integrator::new(&cfg);
        let mut scratch = integ.scratch();
        let mut st = initial_trajectory(&cfg, 0).unwrap();
        st.point = PhasePoint::single(c(0.9, 0.0), c(0.9, 0.0));
        let frozen = st.point.clone();
        integ
            .step_with_increments(&mut st, &[5.0, 5.0], 0.1, &mut scratch)
            .unwrap();
        assert_eq!(st.diverged_at, Some(0.1));
        assert_eq!(st.point, frozen);
        assert!(integ
            .step_with_increments(&mut st, &[0.0, 0.0], 0.2, &mut scratch)
            .is_err());
        integ.step(&mut st, 0.2, &mut scratch);
        assert_eq!(st.diverged_at, Some(0.1));
    }

    #[test]
    fn gauge_choice1_step_uses_shifted_noise() {
        // With zero noise the gauged step follows A − B·g exactly.
        let p = ModelParams::single_mode(1.0, 0.1, 0.5).unwrap();
        let scheme = SchemeSpec::new(model::Decomposition::SplitFourNoise, Gauge::Choice1).unwrap();
        let x = PhasePoint::single(c(0.4, 0.3), c(-0.2, 0.6));
        let expected = model::gauged_drift(&scheme, &p, &x).unwrap();
        let integ = Integrator::from_parts(p, scheme, 1e-3, 1e6);
        let mut st = TrajectoryState::new(x.clone(), c(1.0, 0.0), NoiseStream::new(0, 0));
        let mut scratch = integ.scratch();
        integ
            .step_with_increments(&mut st, &[0.0; 4], 1e-3, &mut scratch)
            .unwrap();
        assert!((st.point.alpha[0] - (x.alpha[0] + expected[0] * 1e-3)).norm() < 1e-15);
        assert!((st.point.beta[0] - (x.beta[0] + expected[1] * 1e-3)).norm() < 1e-15);
        assert_eq!(st.weight, c(1.0, 0.0));
    }

    #[test]
    fn config_validation() {
        let p = ModelParams::single_mode(1.0, 0.0, 0.0).unwrap();
        assert!(RunConfig::new(p.clone(), SchemeSpec::POSITIVE_P, 0.0, 1.0, 10, 2, 0).is_err());
        assert!(RunConfig::new(p.clone(), SchemeSpec::POSITIVE_P, 0.1, 1.0, 10, 3, 0).is_err());
        let cfg = RunConfig::new(p, SchemeSpec::POSITIVE_P, 0.1, 1.0, 10, 2, 0).unwrap();
        assert!(cfg.clone().with_record_times(&[2.0]).is_err());
        let snapped = cfg.with_record_times(&[0.26, 0.5, 0.49]).unwrap();
        assert_eq!(snapped.record_steps(), &[3, 5]);
    }

    #[test]
    fn all_diverged_terminates_early() {
        struct Count(usize);
        impl EnsembleObserver for Count {
            fn observe(&mut self, _: &EnsembleView<'_>) -> Result<()> {
                self.0 += 1;
                Ok(())
            }
        }
        let p = ModelParams::single_mode(1.0, 0.0, 0.0).unwrap();
        let cfg = RunConfig::new(p, SchemeSpec::POSITIVE_P, 0.01, 1.0, 4, 2, 3)
            .unwrap()
            .with_divergence_threshold(1e-3)
            .unwrap();
        let mut counter = Count(0);
        let rec = run_ensemble(&cfg, &mut [&mut counter], RunOptions::default()).unwrap();
        assert!(matches!(rec.status, RunStatus::AllDiverged { .. }));
        assert_eq!(counter.0, rec.times.len());
        assert!(rec.times.len() < 101);
    }
}

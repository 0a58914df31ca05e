//! The experiment drivers behind each subcommand.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use ppcat_core::estimators::{
    classify_regime, ClassifierConfig, MultimodeRecorder, ObservableSeries, ReferenceSeries, SingleModeRecorder,
    SpikeConfig,
};
use ppcat_core::momentum::{CsOrdering, MomentumGrid, MomentumObservables, MomentumRecorder};
use ppcat_core::oracle::{coherent_state_density, default_cutoffs, solve, OracleConfig, OracleInitial, OracleRun};
use ppcat_core::reconstruction::{
    reconstruct_density, uniform_axis, wigner, FockDensityMatrix, ModeSelector, Reconstruction,
};
use ppcat_core::sde::{
    run_ensemble, EnsembleObserver, EnsembleView, InitialState, RunConfig, RunOptions, RunRecord, RunStatus,
};
use ppcat_core::{ModelParams, SchemeSpec, C64};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, RunManifest};
use crate::error::CliError;
use crate::format::{Axis, Cell, Columns, MatrixData, MatrixFile, Table};

/// Seed of sweep point `index`, independent of evaluation order.
pub fn point_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// Runs the manifest's experiment and returns the files written.
pub fn run(manifest: &RunManifest) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(&manifest.output_dir)?;
    let mut out = Output::new(manifest);
    let result = match manifest.experiment {
        Experiment::Transient => transient(manifest, &mut out),
        Experiment::RegimeSweep => regime_sweep(manifest, &mut out),
        Experiment::ParityDecay => parity_decay(manifest, &mut out),
        Experiment::MomentumScan => momentum_scan(manifest, &mut out),
        Experiment::Reconstruct => reconstruct(manifest, &mut out),
        Experiment::Oracle => oracle_only(manifest, &mut out),
    };
    result.map(|_| out.written)
}

struct Output<'a> {
    manifest: &'a RunManifest,
    written: Vec<PathBuf>,
}

impl<'a> Output<'a> {
    fn new(manifest: &'a RunManifest) -> Self {
        Self {
            manifest,
            written: Vec::new(),
        }
    }

    /// Header block: provenance lines, `notes`, then the resolved config.
    fn header(&self, status: &str, notes: &[String]) -> Vec<String> {
        let m = self.manifest;
        let mut lines = vec![
            format!("ppcat {} output", m.experiment.as_str()),
            format!("format_version = {}", m.format_version()),
            format!("experiment = {}", m.experiment.as_str()),
            format!("seed = {}", m.config.seed),
            format!("status = {status}"),
        ];
        lines.extend(notes.iter().cloned());
        lines.push(String::new());
        lines.push("resolved configuration:".into());
        lines.extend(m.config.to_toml().lines().map(String::from));
        lines
    }

    fn write(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.manifest.output_dir.join(name);
        std::fs::write(&path, content)?;
        self.written.push(path);
        Ok(())
    }
}

fn options(m: &RunManifest) -> RunOptions {
    RunOptions { threads: m.threads }
}

fn status_of(record: &RunRecord) -> (String, Option<f64>) {
    match record.status {
        RunStatus::Completed => ("complete".into(), None),
        RunStatus::AllDiverged { at } => (format!("incomplete (all trajectories diverged at t = {at})"), Some(at)),
    }
}

fn finish(status: Option<f64>) -> Result<(), CliError> {
    match status {
        Some(at) => Err(CliError::Diverged { at }),
        None => Ok(()),
    }
}

/// Oracle initial state matching the simulation, if one exists.
fn oracle_initial(
    m: &RunManifest,
    params: &ModelParams,
    cfg: &OracleConfig,
) -> Result<Option<OracleInitial>, CliError> {
    Ok(match m.config.initial_state()? {
        InitialState::Vacuum => Some(OracleInitial::Vacuum),
        InitialState::Cat { zeta, sign } => Some(OracleInitial::Cat { zeta, sign }),
        InitialState::Coherent(amps) if params.n_sites() == 1 => {
            let cutoff = cfg
                .cutoffs
                .clone()
                .unwrap_or_else(|| default_cutoffs(params, cfg.basis))[0];
            Some(OracleInitial::Dense(
                coherent_state_density(amps[0], cutoff).rho.elements,
            ))
        }
        InitialState::Coherent(_) => None,
    })
}

/// Largest lattice the exact solver is run for.
const ORACLE_MAX_SITES: usize = 3;

/// Exact reference on `times`, or a note explaining why there is none.
fn reference_run(
    m: &RunManifest,
    params: &ModelParams,
    times: &[f64],
    local_parity: bool,
) -> Result<(Option<OracleRun>, Vec<String>), CliError> {
    if !m.config.oracle.enabled {
        return Ok((None, vec!["oracle = disabled".into()]));
    }
    if params.n_sites() > ORACLE_MAX_SITES {
        return Ok((
            None,
            vec![format!(
                "oracle = skipped (exact solution limited to {ORACLE_MAX_SITES} sites)"
            )],
        ));
    }
    let cfg = m.config.oracle_config()?;
    let Some(initial) = oracle_initial(m, params, &cfg)? else {
        return Ok((
            None,
            vec!["oracle = skipped (no exact counterpart of the initial state)".into()],
        ));
    };
    let run = solve(params, &cfg, &initial, times, local_parity)?;
    let notes = vec![
        format!("oracle = enabled, cutoffs {:?}", run.cutoffs),
        format!(
            "oracle steps = {}, max trace drift = {:e}, max top-level population = {:?}",
            run.report.steps, run.report.max_trace_drift, run.report.max_top_population
        ),
    ];
    Ok((Some(run), notes))
}

fn add_series(cols: &mut Columns, s: &ObservableSeries, complex: bool) {
    if complex {
        cols.add_f64(format!("{}_re", s.name), s.mean.iter().map(|z| z.re));
        cols.add_f64(format!("{}_im", s.name), s.mean.iter().map(|z| z.im));
    } else {
        cols.add_f64(s.name.clone(), s.mean.iter().map(|z| z.re));
    }
    cols.add_f64(format!("{}_stderr", s.name), s.stderr.iter().copied());
    cols.add(
        format!("{}_spike", s.name),
        s.spike_flags.iter().map(|&f| Cell::flag(f)).collect(),
    );
    cols.add_f64(format!("{}_divfrac", s.name), s.divergence_fraction.iter().copied());
}

fn add_reference(cols: &mut Columns, name: &str, values: impl IntoIterator<Item = C64>, complex: bool) {
    let values: Vec<C64> = values.into_iter().collect();
    if complex {
        cols.add_f64(format!("{name}_oracle_re"), values.iter().map(|z| z.re));
        cols.add_f64(format!("{name}_oracle_im"), values.iter().map(|z| z.im));
    } else {
        cols.add_f64(format!("{name}_oracle"), values.iter().map(|z| z.re));
    }
}

fn flag(series: &mut ObservableSeries) -> Result<(), CliError> {
    if series.len() >= 3 {
        series.flag_spikes(&SpikeConfig::default())?;
    } else {
        series.spike_flags = vec![false; series.len()];
    }
    Ok(())
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn transient(m: &RunManifest, out: &mut Output) -> Result<(), CliError> {
    let c = &m.config;
    let params = c.params()?;
    let scheme = c.scheme()?;
    let cfg = c.run_config(scheme, c.seed)?;
    let times = cfg.record_times();
    let n_sites = params.n_sites();
    let (oracle, notes) = reference_run(m, &params, &times, n_sites > 1 && c.oracle.local_parity)?;
    let weighted = scheme.is_gauged();
    let s = c.simulation.subensembles;
    let mut cols = Columns::default();

    let record = if n_sites == 1 {
        let mut rec = SingleModeRecorder::new(weighted, s);
        let record = run_ensemble(&cfg, &mut [&mut rec], options(m))?;
        cols.add_f64("time", rec.series.n.times.iter().copied());
        let mut series = rec.series;
        for (sr, complex) in [
            (&mut series.n, false),
            (&mut series.zeta, true),
            (&mut series.g2, false),
            (&mut series.parity, false),
        ] {
            flag(sr)?;
            add_series(&mut cols, sr, complex);
        }
        if weighted {
            flag(&mut rec.weight)?;
            add_series(&mut cols, &rec.weight, true);
        }
        if let Some(o) = &oracle {
            let obs = &o.observables;
            add_reference(&mut cols, "n", obs.iter().map(|x| real(x.n[0])), false);
            add_reference(&mut cols, "zeta", obs.iter().map(|x| x.zeta[0]), true);
            add_reference(&mut cols, "g2", obs.iter().map(|x| real(x.g2[0])), false);
            add_reference(&mut cols, "parity", obs.iter().map(|x| real(x.global_parity)), false);
        }
        record
    } else {
        let mut rec = MultimodeRecorder::new(weighted);
        let record = run_ensemble(&cfg, &mut [&mut rec], options(m))?;
        cols.add_f64("time", rec.times.iter().copied());
        for j in 0..n_sites {
            let site = j + 1;
            let mut n = rec.series(&format!("n{site}"), s, |r| r.modes[j].n.into());
            let mut zeta = rec.series(&format!("zeta{site}"), s, |r| r.modes[j].zeta);
            let mut g2 = rec.series(&format!("g2_{site}"), s, |r| r.modes[j].g2.into());
            let mut parity = rec.series(&format!("parity{site}"), s, |r| r.modes[j].parity.into());
            for (sr, complex) in [
                (&mut n, false),
                (&mut zeta, true),
                (&mut g2, false),
                (&mut parity, false),
            ] {
                flag(sr)?;
                add_series(&mut cols, sr, complex);
            }
        }
        let mut global = rec.series("parity", s, |r| r.global_parity.into());
        flag(&mut global)?;
        add_series(&mut cols, &global, false);
        if let Some(o) = &oracle {
            let obs = &o.observables;
            for j in 0..n_sites {
                let site = j + 1;
                add_reference(&mut cols, &format!("n{site}"), obs.iter().map(|x| real(x.n[j])), false);
                add_reference(&mut cols, &format!("zeta{site}"), obs.iter().map(|x| x.zeta[j]), true);
                add_reference(
                    &mut cols,
                    &format!("g2_{site}"),
                    obs.iter().map(|x| real(x.g2[j])),
                    false,
                );
                if obs.first().is_some_and(|x| x.local_parity.is_some()) {
                    add_reference(
                        &mut cols,
                        &format!("parity{site}"),
                        obs.iter()
                            .map(|x| real(x.local_parity.as_ref().map_or(f64::NAN, |p| p[j]))),
                        false,
                    );
                }
            }
            add_reference(&mut cols, "parity", obs.iter().map(|x| real(x.global_parity)), false);
        }
        record
    };
    let (status, diverged) = status_of(&record);
    let mut notes = notes;
    notes.push(format!("scheme = {}, weighted estimators = {weighted}", scheme.label()));
    let table = cols.into_table(out.header(&status, &notes));
    out.write("transient.csv", &table.render())?;
    finish(diverged)
}

/// One single-mode run plus its exact reference.
struct SinglePoint {
    rec: SingleModeRecorder,
    record: RunRecord,
    reference: Option<ReferenceSeries>,
}

fn single_point(m: &RunManifest, params: ModelParams, scheme: SchemeSpec, seed: u64) -> Result<SinglePoint, CliError> {
    let c = &m.config;
    let cfg: RunConfig = c.run_config_for(params.clone(), scheme, seed)?;
    let times = cfg.record_times();
    let reference = if c.oracle.enabled {
        let ocfg = c.oracle_config()?;
        match oracle_initial(m, &params, &ocfg)? {
            Some(init) => Some(solve(&params, &ocfg, &init, &times, false)?.reference()),
            None => None,
        }
    } else {
        None
    };
    let mut rec = SingleModeRecorder::new(scheme.is_gauged(), c.simulation.subensembles);
    let record = run_ensemble(&cfg, &mut [&mut rec], options(m))?;
    for s in [
        &mut rec.series.n,
        &mut rec.series.zeta,
        &mut rec.series.g2,
        &mut rec.series.parity,
    ] {
        flag(s)?;
    }
    Ok(SinglePoint { rec, record, reference })
}

fn truncate_reference(r: &ReferenceSeries, len: usize) -> ReferenceSeries {
    ReferenceSeries {
        times: r.times[..len].to_vec(),
        n: r.n[..len].to_vec(),
        zeta: r.zeta[..len].to_vec(),
        g2: r.g2[..len].to_vec(),
        parity: r.parity[..len].to_vec(),
    }
}

fn require_single_mode(m: &RunManifest) -> Result<(), CliError> {
    if m.config.model.sites != 1 {
        return Err(CliError::Config(format!(
            "model.sites: the {} experiment is single-mode, got {}",
            m.experiment.as_str(),
            m.config.model.sites
        )));
    }
    Ok(())
}

fn regime_sweep(m: &RunManifest, out: &mut Output) -> Result<(), CliError> {
    require_single_mode(m)?;
    let c = &m.config;
    let scheme = c.scheme()?;
    // Validate the shared settings once so that a bad manifest fails fast.
    c.run_config(scheme, c.seed)?;
    if c.oracle.enabled {
        c.oracle_config()?;
    }
    let mut points: Vec<[f64; 2]> = c.sweep.points.clone();
    for &k1 in &c.sweep.kappa1 {
        for &k2 in &c.sweep.kappa2 {
            points.push([k1, k2]);
        }
    }
    let classifier = ClassifierConfig {
        sigma_factor: c.sweep.sigma_factor,
        family_wise: c.sweep.family_wise,
        match_floor: c.sweep.match_floor,
        snr_threshold: c.sweep.snr_threshold,
        ..ClassifierConfig::default()
    };
    let columns = [
        "index",
        "kappa1",
        "kappa2",
        "seed",
        "label",
        "settle_time",
        "first_divergence_time",
        "final_g2_snr",
        "parity_mismatch",
        "parity_spikes",
        "transient_mismatch",
        "max_divergence_fraction",
        "error",
    ];
    let mut rows = Vec::new();
    for (i, &[k1, k2]) in points.iter().enumerate() {
        let seed = point_seed(c.seed, i as u64);
        let head = vec![Cell::Int(i as i64), k1.into(), k2.into(), Cell::Text(seed.to_string())];
        let eps = C64::new(c.model.epsilon, c.model.epsilon_im);
        let outcome = ModelParams::new(1, eps, k1, k2, 0.0, 0.0, c.params()?.boundary())
            .map_err(CliError::from)
            .and_then(|p| single_point(m, p, scheme, seed))
            .and_then(|pt| {
                let frac = pt.record.divergence_fraction();
                let max_frac = frac.iter().copied().fold(0.0, f64::max);
                let g2_last = pt.rec.series.g2.stderr.len().checked_sub(1).map(|i| {
                    let mean = pt.rec.series.g2.mean[i].re;
                    (mean / pt.rec.series.g2.stderr[i]).abs()
                });
                match &pt.reference {
                    Some(r) => {
                        let r = truncate_reference(r, pt.rec.series.n.len());
                        let cl = classify_regime(&pt.rec.series, &r, &classifier)?;
                        Ok(vec![
                            Cell::Text(cl.label.as_str().into()),
                            Cell::opt(cl.settle_time),
                            Cell::opt(cl.first_divergence_time),
                            cl.final_g2_snr.into(),
                            Cell::flag(cl.parity_mismatch),
                            Cell::flag(cl.parity_spikes),
                            Cell::flag(cl.transient_mismatch),
                            max_frac.into(),
                        ])
                    }
                    None => Ok(vec![
                        Cell::Text("unclassified".into()),
                        Cell::Float(f64::NAN),
                        Cell::opt(
                            pt.record
                                .times
                                .iter()
                                .zip(&frac)
                                .find(|(_, &f)| f > 0.0)
                                .map(|(&t, _)| t),
                        ),
                        Cell::opt(g2_last),
                        Cell::Text(String::new()),
                        Cell::flag(pt.rec.series.parity.any_spike()),
                        Cell::Text(String::new()),
                        max_frac.into(),
                    ]),
                }
            });
        let mut row = head;
        match outcome {
            Ok(cells) => {
                row.extend(cells);
                row.push(Cell::Text(String::new()));
            }
            Err(e) => {
                row.push(Cell::Text("error".into()));
                row.extend((0..7).map(|_| Cell::Text(String::new())));
                row.push(Cell::Text(e.to_string()));
            }
        }
        rows.push(row);
    }
    let mut table = Table::new(
        out.header("complete", &[format!("scheme = {}", scheme.label())]),
        columns.iter().map(|s| s.to_string()).collect(),
    );
    for r in rows {
        table.push(r);
    }
    out.write("regime_map.csv", &table.render())
}

/// First record at which the parity estimate is flagged: a spike, a
/// diverged trajectory, or a standard error above `stderr_limit`.
fn parity_flag_time(p: &ObservableSeries, stderr_limit: f64) -> Option<f64> {
    (0..p.len())
        .find(|&i| p.spike_flags[i] || p.divergence_fraction[i] > 0.0 || !(p.stderr[i] <= stderr_limit))
        .map(|i| p.times[i])
}

fn parity_decay(m: &RunManifest, out: &mut Output) -> Result<(), CliError> {
    require_single_mode(m)?;
    let c = &m.config;
    if c.initial.kind != "cat" {
        return Err(CliError::Config(format!(
            "initial.kind: parity decay starts from a cat, got `{}`",
            c.initial.kind
        )));
    }
    let params = c.params()?;
    let schemes = c
        .parity_decay
        .schemes
        .iter()
        .map(|l| SchemeSpec::from_label(l).map_err(|e| CliError::Config(format!("parity_decay.schemes: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let probe = c.run_config(SchemeSpec::POSITIVE_P, c.seed)?;
    let times = probe.record_times();
    let (oracle, mut notes) = reference_run(m, &params, &times, false)?;
    notes.push(format!("cat amplitude zeta = {}", c.cat_zeta()?));

    let mut cols = Columns::default();
    cols.add_f64("time", times.iter().copied());
    let oracle_parity: Option<Vec<f64>> = oracle
        .as_ref()
        .map(|o| o.observables.iter().map(|x| x.global_parity).collect());
    if let Some(p) = &oracle_parity {
        cols.add_f64("parity_oracle", p.iter().copied());
    }
    let mut summary = Table::new(
        Vec::new(),
        [
            "scheme",
            "seed",
            "flag_time",
            "first_divergence_time",
            "inaccuracy_time",
            "status",
        ]
        .map(String::from)
        .to_vec(),
    );
    for (i, &scheme) in schemes.iter().enumerate() {
        let seed = point_seed(c.seed, i as u64);
        let pt = single_point(m, params.clone(), scheme, seed)?;
        let mut p = pt.rec.series.parity.clone();
        p.name = format!("{}_parity", scheme.label());
        add_series(&mut cols, &p, false);
        let first_div = pt
            .record
            .times
            .iter()
            .zip(pt.record.divergence_fraction())
            .find(|(_, f)| *f > 0.0)
            .map(|(&t, _)| t);
        let inaccuracy = oracle_parity.as_ref().and_then(|r| {
            (0..p.len())
                .find(|&k| (p.mean[k].re - r[k]).abs() > 3.0 * p.stderr[k])
                .map(|k| p.times[k])
        });
        summary.push(vec![
            Cell::Text(scheme.label().into()),
            Cell::Text(seed.to_string()),
            Cell::opt(parity_flag_time(&p, c.parity_decay.stderr_limit)),
            Cell::opt(first_div),
            Cell::opt(inaccuracy),
            Cell::Text(status_of(&pt.record).0),
        ]);
    }
    let table = cols.into_table(out.header("complete", &notes));
    out.write("parity_decay.csv", &table.render())?;
    summary.comments = out.header("complete", &notes);
    out.write("parity_decay_summary.csv", &summary.render())
}

fn ordering(name: &str) -> Result<CsOrdering, CliError> {
    match name {
        "normal" => Ok(CsOrdering::Normal),
        "full" => Ok(CsOrdering::Full),
        other => Err(CliError::Config(format!(
            "momentum.ordering: expected `normal` or `full`, got `{other}`"
        ))),
    }
}

fn momentum_scan(m: &RunManifest, out: &mut Output) -> Result<(), CliError> {
    let c = &m.config;
    if c.model.sites < 2 {
        return Err(CliError::Config(
            "model.sites: momentum analysis needs at least 2 sites".into(),
        ));
    }
    let ordering = ordering(&c.momentum.ordering)?;
    let scheme = c.scheme()?;
    let cfg = c.run_config(scheme, c.seed)?;
    let mut rec = MomentumRecorder::new(c.model.phi, scheme.is_gauged(), ordering);
    let record = run_ensemble(&cfg, &mut [&mut rec], options(m))?;
    let threshold = c.momentum.snr_threshold;
    let columns = [
        "time",
        "k_index",
        "k",
        "dark",
        "n",
        "n_stderr",
        "ratio",
        "ratio_stderr",
        "ratio_low_snr",
        "g2",
        "g2_stderr",
        "g2_low_snr",
        "g2_unnormalized",
        "g2_unnormalized_stderr",
        "g2_unnormalized_low_snr",
        "cs_ratio",
        "cs_ratio_stderr",
        "cs_low_snr",
    ];
    let (status, diverged) = status_of(&record);
    let notes = vec![format!(
        "scheme = {}, cauchy_schwarz ordering = {}, low_snr threshold = {threshold}",
        scheme.label(),
        c.momentum.ordering
    )];
    let mut table = Table::new(out.header(&status, &notes), columns.map(String::from).to_vec());
    for (t, r) in rec.times.iter().zip(&rec.records) {
        for i in 0..r.grid.len() {
            let low = |e: &ppcat_core::estimators::Estimate| Cell::flag(MomentumObservables::low_snr(e, threshold));
            table.push(vec![
                (*t).into(),
                Cell::Int(i as i64),
                r.grid.k(i).into(),
                Cell::flag(i == r.dark()),
                r.n[i].mean.into(),
                r.n[i].stderr.into(),
                r.ratio[i].mean.into(),
                r.ratio[i].stderr.into(),
                low(&r.ratio[i]),
                r.g2[i].mean.into(),
                r.g2[i].stderr.into(),
                low(&r.g2[i]),
                r.g2_unnormalized[i].mean.into(),
                r.g2_unnormalized[i].stderr.into(),
                low(&r.g2_unnormalized[i]),
                r.cauchy_schwarz[i].mean.into(),
                r.cauchy_schwarz[i].stderr.into(),
                low(&r.cauchy_schwarz[i]),
            ]);
        }
    }
    out.write("momentum.csv", &table.render())?;
    finish(diverged)
}

/// Reconstructs the selected mode at each requested record time.
struct Snapshots {
    times: Vec<f64>,
    selector: ModeSelector,
    cutoff: usize,
    weighted: bool,
    taken: Vec<(f64, Reconstruction)>,
}

impl EnsembleObserver for Snapshots {
    fn observe(&mut self, view: &EnsembleView<'_>) -> ppcat_core::Result<()> {
        if self
            .times
            .iter()
            .any(|t| (t - view.time).abs() < 1e-9 * (1.0 + t.abs()))
        {
            let r = reconstruct_density(view, self.selector, self.cutoff, self.weighted)?;
            self.taken.push((view.time, r));
        }
        Ok(())
    }
}

/// Embeds or truncates `rho` into the Fock space of `cutoff`.
fn resize(rho: &FockDensityMatrix, cutoff: usize) -> FockDensityMatrix {
    let d = rho.dim();
    let e = DMatrix::from_fn(cutoff + 1, cutoff + 1, |r, c| {
        if r < d && c < d {
            rho.elements[(r, c)]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    FockDensityMatrix::new(e).expect("square matrix")
}

fn reconstruct(m: &RunManifest, out: &mut Output) -> Result<(), CliError> {
    let c = &m.config;
    let r = &c.reconstruct;
    let params = c.params()?;
    let scheme = c.scheme()?;
    let selector = match (r.mode.as_str(), r.index) {
        ("site", i) => ModeSelector::Site(i.unwrap_or(0)),
        ("momentum", Some(i)) => ModeSelector::Momentum(i),
        ("momentum", None) => ModeSelector::Momentum(MomentumGrid::new(params.n_sites(), params.phi())?.dark_index()),
        (other, _) => {
            return Err(CliError::Config(format!(
                "reconstruct.mode: expected `site` or `momentum`, got `{other}`"
            )))
        }
    };
    if r.times.is_empty() {
        return Err(CliError::Config(
            "reconstruct.times: at least one time is required".into(),
        ));
    }
    if r.wigner_points == 0 || !(r.wigner_extent > 0.0) {
        return Err(CliError::Config(
            "reconstruct.wigner_points and wigner_extent must be positive".into(),
        ));
    }
    let base = c.run_config(scheme, c.seed)?;
    let mut grid = base.record_times();
    grid.extend(r.times.iter().copied());
    let cfg = base
        .with_record_times(&grid)
        .map_err(|e| CliError::Config(format!("reconstruct.times: {e}")))?;
    let snapped: Vec<f64> = r.times.iter().map(|t| (t / cfg.dt()).round() * cfg.dt()).collect();

    let single_site = params.n_sites() == 1;
    let (oracle, mut notes) = if single_site {
        reference_run(m, &params, &snapped, false)?
    } else {
        (None, vec!["oracle = not used (multimode reconstruction)".into()])
    };
    let mut snaps = Snapshots {
        times: snapped.clone(),
        selector,
        cutoff: r.cutoff,
        weighted: scheme.is_gauged(),
        taken: Vec::new(),
    };
    let record = run_ensemble(&cfg, &mut [&mut snaps], options(m))?;
    let (status, diverged) = status_of(&record);
    notes.push(format!("mode = {selector:?}, cutoff = {}", r.cutoff));

    let axis = uniform_axis(-r.wigner_extent, r.wigner_extent, r.wigner_points);
    let mut summary = Table::new(
        Vec::new(),
        [
            "index",
            "time",
            "trace",
            "trace_stderr",
            "hermiticity_deviation",
            "clamped",
            "max_tail",
            "photon_number",
            "parity",
            "wigner_origin_parity",
            "wigner_integral",
            "wigner_extent_warning",
            "oracle_parity",
            "oracle_trace_distance",
        ]
        .map(String::from)
        .to_vec(),
    );
    for (i, (t, rec)) in snaps.taken.iter().enumerate() {
        let h = rec.rho.hermitized();
        let w = wigner(&rec.rho, &axis, &axis);
        let header = out.header(
            &status,
            &[notes.clone(), vec![format!("time = {}", crate::format::float(*t))]].concat(),
        );
        let rho_file = MatrixFile {
            comments: header.clone(),
            name: "rho".into(),
            data: MatrixData::Complex(rec.rho.elements.clone()),
            rows_axis: None,
            cols_axis: None,
        };
        out.write(&format!("rho_{i:02}.txt"), &rho_file.render())?;
        let w_file = MatrixFile {
            comments: header,
            name: "wigner".into(),
            data: MatrixData::Real(w.values.clone()),
            rows_axis: Some(Axis {
                label: "x".into(),
                values: w.x.clone(),
            }),
            cols_axis: Some(Axis {
                label: "p".into(),
                values: w.p.clone(),
            }),
        };
        out.write(&format!("wigner_{i:02}.txt"), &w_file.render())?;
        let k = snapped.iter().position(|s| (s - t).abs() < 1e-9 * (1.0 + t.abs()));
        let (o_parity, o_dist) = match (&oracle, k) {
            (Some(o), Some(k)) => (
                Some(o.observables[k].global_parity),
                Some(resize(&o.states[k], r.cutoff).trace_distance(&h)),
            ),
            _ => (None, None),
        };
        summary.push(vec![
            Cell::Int(i as i64),
            (*t).into(),
            rec.trace.mean.into(),
            rec.trace.stderr.into(),
            rec.hermiticity_deviation.into(),
            Cell::Int(rec.clamped as i64),
            rec.max_tail.into(),
            h.photon_number().into(),
            h.parity().into(),
            (w.at_origin() * std::f64::consts::FRAC_PI_2).into(),
            w.integral().into(),
            Cell::flag(w.extent_warning),
            Cell::opt(o_parity),
            Cell::opt(o_dist),
        ]);
    }
    summary.comments = out.header(&status, &notes);
    out.write("reconstruct.csv", &summary.render())?;
    finish(diverged)
}

fn oracle_only(m: &RunManifest, out: &mut Output) -> Result<(), CliError> {
    let c = &m.config;
    let params = c.params()?;
    let probe: RunConfig = c.run_config(SchemeSpec::POSITIVE_P, c.seed)?;
    let times = probe.record_times();
    let mut m_enabled = m.clone();
    m_enabled.config.oracle.enabled = true;
    let (run, notes) = reference_run(&m_enabled, &params, &times, c.oracle.local_parity)?;
    let run = run.ok_or_else(|| CliError::Config(format!("no exact solution available: {}", notes.join("; "))))?;
    let mut cols = Columns::default();
    cols.add_f64("time", times.iter().copied());
    cols.add_f64("trace", run.observables.iter().map(|o| o.trace));
    for j in 0..params.n_sites() {
        let site = j + 1;
        let obs = &run.observables;
        cols.add_f64(format!("n{site}"), obs.iter().map(|o| o.n[j]));
        cols.add_f64(format!("zeta{site}_re"), obs.iter().map(|o| o.zeta[j].re));
        cols.add_f64(format!("zeta{site}_im"), obs.iter().map(|o| o.zeta[j].im));
        cols.add_f64(format!("g2_{site}"), obs.iter().map(|o| o.g2[j]));
        if c.oracle.local_parity {
            cols.add_f64(
                format!("parity{site}"),
                obs.iter().map(|o| o.local_parity.as_ref().map_or(f64::NAN, |p| p[j])),
            );
        }
    }
    cols.add_f64("parity", run.observables.iter().map(|o| o.global_parity));
    let table = cols.into_table(out.header("complete", &notes));
    out.write("oracle.csv", &table.render())
}

/// Reads back every CSV and matrix file in `dir` and re-renders it.
pub fn rerender(path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "csv") {
        Ok(Table::parse(&text)?.render())
    } else {
        Ok(MatrixFile::parse(&text)?.render())
    }
}

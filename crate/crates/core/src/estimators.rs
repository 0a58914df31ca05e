//! Ensemble estimators with subensemble standard errors, spike detection and
//! regime classification.
//!
//! Every observable is evaluated independently on each of the `s`
//! subensembles (trajectory-index order, diverged members excluded) and the
//! reported mean and standard error are taken over those `s` values.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::sde::{EnsembleObserver, EnsembleView, TrajectoryState};

/// Real-valued estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub const UNDEFINED: Estimate = Estimate {
        mean: f64::NAN,
        stderr: f64::NAN,
    };

    pub fn is_defined(&self) -> bool {
        self.mean.is_finite()
    }

    /// Signal-to-noise ratio `|mean| / σ_SE`.
    pub fn snr(&self) -> f64 {
        self.mean.abs() / self.stderr
    }
}

/// Complex estimate; `stderr` combines the real and imaginary parts in
/// quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexEstimate {
    pub mean: C64,
    pub stderr: f64,
}

impl ComplexEstimate {
    pub const UNDEFINED: ComplexEstimate = ComplexEstimate {
        mean: C64 {
            re: f64::NAN,
            im: f64::NAN,
        },
        stderr: f64::NAN,
    };

    pub fn is_defined(&self) -> bool {
        self.mean.re.is_finite() && self.mean.im.is_finite()
    }
}

impl From<Estimate> for ComplexEstimate {
    fn from(e: Estimate) -> Self {
        Self {
            mean: C64::new(e.mean, 0.0),
            stderr: e.stderr,
        }
    }
}

/// Mean and standard error of the per-subensemble values
/// `σ_SE = sqrt(var(O_j) / (s − 1))`, where `var` is the plain (1/s)
/// variance of the subensemble means.
pub fn subensemble_stats(values: &[f64]) -> Result<Estimate> {
    let s = values.len();
    if s < 2 {
        return Err(Error::contract(format!("need at least 2 subensembles, got {s}")));
    }
    let n = s as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(Estimate {
        mean,
        stderr: (var / (n - 1.0)).sqrt(),
    })
}

/// Partition per-trajectory `values` into `s` equal consecutive batches and
/// apply [`subensemble_stats`] to the batch means.
pub fn subensemble_error(values: &[f64], s: usize) -> Result<Estimate> {
    if s < 2 {
        return Err(Error::contract(format!("need at least 2 subensembles, got {s}")));
    }
    if values.is_empty() || values.len() % s != 0 {
        return Err(Error::contract(format!(
            "{} values cannot be split into {s} equal subensembles",
            values.len()
        )));
    }
    let size = values.len() / s;
    let means: Vec<f64> = values
        .chunks(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    subensemble_stats(&means)
}

fn complex_stats(values: &[C64]) -> Result<ComplexEstimate> {
    let re: Vec<f64> = values.iter().map(|z| z.re).collect();
    let im: Vec<f64> = values.iter().map(|z| z.im).collect();
    let (r, i) = (subensemble_stats(&re)?, subensemble_stats(&im)?);
    Ok(ComplexEstimate {
        mean: C64::new(r.mean, i.mean),
        stderr: r.stderr.hypot(i.stderr),
    })
}

/// Aggregate real per-subensemble values, where `None` marks a subensemble
/// on which the observable is undefined.
fn aggregate(values: &[Option<f64>]) -> Result<Estimate> {
    let defined: Option<Vec<f64>> = values.iter().copied().collect();
    match defined {
        Some(v) if v.len() >= 2 => subensemble_stats(&v),
        _ => Ok(Estimate::UNDEFINED),
    }
}

fn aggregate_complex(values: &[Option<C64>]) -> Result<ComplexEstimate> {
    let defined: Option<Vec<C64>> = values.iter().copied().collect();
    match defined {
        Some(v) if v.len() >= 2 => complex_stats(&v),
        _ => Ok(ComplexEstimate::UNDEFINED),
    }
}

/// Per-subensemble averages of `m` complex moments over the surviving
/// trajectories. `accumulate` adds one trajectory's (unweighted) moments to
/// the buffer; the trajectory weight is applied here when `weighted`.
pub fn subensemble_moments<F>(view: &EnsembleView<'_>, weighted: bool, m: usize, accumulate: F) -> Vec<Option<Vec<C64>>>
where
    F: Fn(&TrajectoryState, &mut [C64]) + Sync,
{
    let batches: Vec<&[TrajectoryState]> = view.subensembles().collect();
    batches
        .par_iter()
        .map(|batch| {
            let mut sum = vec![C64::new(0.0, 0.0); m];
            let mut one = vec![C64::new(0.0, 0.0); m];
            let mut count = 0usize;
            for traj in batch.iter().filter(|t| t.is_active()) {
                one.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
                accumulate(traj, &mut one);
                let w = traj.weight;
                if weighted && w != C64::new(1.0, 0.0) {
                    for (s, x) in sum.iter_mut().zip(&one) {
                        *s += w * x;
                    }
                } else {
                    for (s, x) in sum.iter_mut().zip(&one) {
                        *s += x;
                    }
                }
                count += 1;
            }
            (count > 0).then(|| {
                let c = count as f64;
                sum.into_iter().map(|s| s / c).collect()
            })
        })
        .collect()
}

fn require_subensembles(view: &EnsembleView<'_>) -> Result<()> {
    if view.n_subensembles() < 2 {
        return Err(Error::contract("estimators need at least 2 subensembles"));
    }
    Ok(())
}

/// Local observables of one mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeObservables {
    pub n: Estimate,
    pub zeta: ComplexEstimate,
    /// Undefined when the photon number of some subensemble vanishes.
    pub g2: Estimate,
    pub parity: Estimate,
}

fn mode_from_moments(sub: &[Option<Vec<C64>>], offset: usize) -> Result<ModeObservables> {
    let pick = |f: &dyn Fn(&[C64]) -> Option<f64>| -> Vec<Option<f64>> {
        sub.iter()
            .map(|m| m.as_ref().and_then(|m| f(&m[offset..offset + 4])))
            .collect()
    };
    let n = aggregate(&pick(&|m| Some(m[0].re)))?;
    let zeta = aggregate_complex(
        &sub.iter()
            .map(|m| m.as_ref().map(|m| m[offset + 1].sqrt()))
            .collect::<Vec<_>>(),
    )?;
    let g2 = aggregate(&pick(&|m| (m[0].re != 0.0).then(|| m[2].re / (m[0].re * m[0].re))))?;
    let parity = aggregate(&pick(&|m| Some(m[3].re)))?;
    Ok(ModeObservables { n, zeta, g2, parity })
}

fn push_mode_moments(a: C64, b: C64, out: &mut [C64]) {
    let ab = a * b;
    out[0] += ab;
    out[1] += a * a;
    out[2] += ab * ab;
    out[3] += (-2.0 * ab).exp();
}

/// `n = Re⟨Ωαβ⟩`, `ζ = √⟨Ωα²⟩`, `g₂ = Re⟨Ωα²β²⟩/n²`, `Π = Re⟨Ω e^{−2αβ}⟩`.
/// Weights are applied only when `weighted` is set.
pub fn single_mode_observables(view: &EnsembleView<'_>, weighted: bool) -> Result<ModeObservables> {
    require_subensembles(view)?;
    if view.n_sites() != 1 {
        return Err(Error::contract(format!(
            "single-mode estimator applied to {} sites",
            view.n_sites()
        )));
    }
    let sub = subensemble_moments(view, weighted, 4, |t, out| {
        push_mode_moments(t.point.alpha[0], t.point.beta[0], out)
    });
    mode_from_moments(&sub, 0)
}

/// Mean trajectory weight `⟨Ω⟩`, which tracks `Tr ρ`.
pub fn mean_weight(view: &EnsembleView<'_>) -> Result<ComplexEstimate> {
    require_subensembles(view)?;
    let sub = subensemble_moments(view, true, 1, |_, out| out[0] += 1.0);
    aggregate_complex(&sub.iter().map(|m| m.as_ref().map(|m| m[0])).collect::<Vec<_>>())
}

/// Local and non-local observables of a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct MultimodeObservables {
    pub modes: Vec<ModeObservables>,
    /// `g₁(j, j′) = ⟨α_{j′} β_j⟩ / √(n(j) n(j′))`, row `j`, column `j′`.
    pub g1: Vec<Vec<ComplexEstimate>>,
    /// `g₂(j, j′) = Re⟨α_j α_{j′} β_j β_{j′}⟩ / (n(j) n(j′))`.
    pub g2: Vec<Vec<Estimate>>,
    /// `Π = Re⟨exp(−2 Σ_j α_j β_j)⟩`.
    pub global_parity: Estimate,
}

pub fn multimode_observables(view: &EnsembleView<'_>, weighted: bool) -> Result<MultimodeObservables> {
    require_subensembles(view)?;
    let n = view.n_sites();
    if n < 2 {
        return Err(Error::contract("multimode estimator needs at least 2 sites"));
    }
    // Layout: 4 local moments per site, then ⟨α_{j'} β_j⟩ and
    // ⟨α_j α_{j'} β_j β_{j'}⟩ for all ordered pairs, then the global parity.
    let pairs = n * n;
    let m = 4 * n + 2 * pairs + 1;
    let sub = subensemble_moments(view, weighted, m, |t, out| {
        let (a, b) = (&t.point.alpha, &t.point.beta);
        let mut total = C64::new(0.0, 0.0);
        for j in 0..n {
            push_mode_moments(a[j], b[j], &mut out[4 * j..4 * j + 4]);
            total += a[j] * b[j];
        }
        for j in 0..n {
            for k in 0..n {
                out[4 * n + j * n + k] += a[k] * b[j];
                out[4 * n + pairs + j * n + k] += a[j] * a[k] * b[j] * b[k];
            }
        }
        out[m - 1] += (-2.0 * total).exp();
    });

    let modes = (0..n)
        .map(|j| mode_from_moments(&sub, 4 * j))
        .collect::<Result<Vec<_>>>()?;
    let occupation = |mom: &[C64], j: usize| mom[4 * j].re;
    let mut g1 = vec![vec![ComplexEstimate::UNDEFINED; n]; n];
    let mut g2 = vec![vec![Estimate::UNDEFINED; n]; n];
    for j in 0..n {
        for k in 0..n {
            let v1: Vec<Option<C64>> = sub
                .iter()
                .map(|mom| {
                    mom.as_ref().and_then(|mom| {
                        let d = occupation(mom, j) * occupation(mom, k);
                        (d > 0.0).then(|| mom[4 * n + j * n + k] / d.sqrt())
                    })
                })
                .collect();
            let v2: Vec<Option<f64>> = sub
                .iter()
                .map(|mom| {
                    mom.as_ref().and_then(|mom| {
                        let d = occupation(mom, j) * occupation(mom, k);
                        (d != 0.0).then(|| mom[4 * n + pairs + j * n + k].re / d)
                    })
                })
                .collect();
            g1[j][k] = aggregate_complex(&v1)?;
            g2[j][k] = aggregate(&v2)?;
        }
    }
    let global_parity = aggregate(
        &sub.iter()
            .map(|mom| mom.as_ref().map(|mom| mom[m - 1].re))
            .collect::<Vec<_>>(),
    )?;
    Ok(MultimodeObservables {
        modes,
        g1,
        g2,
        global_parity,
    })
}

/// Time series of one observable.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSeries {
    pub name: String,
    pub times: Vec<f64>,
    /// Real observables have zero imaginary part.
    pub mean: Vec<C64>,
    pub stderr: Vec<f64>,
    pub subensembles: usize,
    pub spike_flags: Vec<bool>,
    pub divergence_fraction: Vec<f64>,
}

impl ObservableSeries {
    pub fn new(name: impl Into<String>, subensembles: usize) -> Self {
        Self {
            name: name.into(),
            times: Vec::new(),
            mean: Vec::new(),
            stderr: Vec::new(),
            subensembles,
            spike_flags: Vec::new(),
            divergence_fraction: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push_real(&mut self, time: f64, e: Estimate, divergence_fraction: f64) {
        self.push(time, C64::new(e.mean, 0.0), e.stderr, divergence_fraction);
    }

    pub fn push_complex(&mut self, time: f64, e: ComplexEstimate, divergence_fraction: f64) {
        self.push(time, e.mean, e.stderr, divergence_fraction);
    }

    fn push(&mut self, time: f64, mean: C64, stderr: f64, divergence_fraction: f64) {
        self.times.push(time);
        self.mean.push(mean);
        self.stderr.push(stderr);
        self.spike_flags.push(false);
        self.divergence_fraction.push(divergence_fraction);
    }

    pub fn real_means(&self) -> Vec<f64> {
        self.mean.iter().map(|z| z.re).collect()
    }

    /// Recompute `spike_flags` with [`spike_detect`].
    pub fn flag_spikes(&mut self, config: &SpikeConfig) -> Result<()> {
        self.spike_flags = spike_detect(self, config)?;
        Ok(())
    }

    pub fn any_spike(&self) -> bool {
        self.spike_flags.iter().any(|&f| f)
    }
}

/// How a point is compared with its surroundings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpikeRule {
    /// Robust line through neighbours on both sides; σ_SE compared with the
    /// largest of the three preceding values.
    Centered,
    /// Median and MAD of the trailing window, with the value scaled by the
    /// point's own σ_SE; σ_SE compared with the immediately preceding value.
    Trailing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeConfig {
    pub rule: SpikeRule,
    /// Number of neighbouring points used as the local reference.
    pub window: usize,
    /// Fewer defined neighbours than this disables the value test.
    pub min_window: usize,
    /// Value threshold in units of the local scatter plus the typical σ_SE.
    pub value_factor: f64,
    /// Threshold on σ_SE relative to the largest of the previous three.
    pub stderr_factor: f64,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        Self {
            rule: SpikeRule::Centered,
            window: 16,
            min_window: 5,
            value_factor: 8.0,
            stderr_factor: 3.0,
        }
    }
}

impl SpikeConfig {
    /// The trailing-window rule with a single factor of 8 for both tests.
    pub fn trailing() -> Self {
        Self {
            rule: SpikeRule::Trailing,
            window: 16,
            min_window: 3,
            value_factor: 8.0,
            stderr_factor: 8.0,
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn trailing_flags(x: &[f64], stderr: &[f64], config: &SpikeConfig) -> Vec<bool> {
    let mut flags = vec![false; x.len()];
    for i in 0..x.len() {
        if !(x[i].is_finite() && stderr[i].is_finite()) {
            continue;
        }
        let mut window: Vec<f64> = x[..i]
            .iter()
            .rev()
            .filter(|v| v.is_finite())
            .take(config.window)
            .copied()
            .collect();
        if window.len() >= config.min_window {
            let m = median(&mut window);
            let mut dev: Vec<f64> = window.iter().map(|v| (v - m).abs()).collect();
            let mad = median(&mut dev);
            if (x[i] - m).abs() > config.value_factor * (mad + stderr[i]) {
                flags[i] = true;
            }
        }
        if i > 0 && stderr[i - 1] > 0.0 && stderr[i] > config.stderr_factor * stderr[i - 1] {
            flags[i] = true;
        }
    }
    flags
}

fn spike_flags_component(t: &[f64], x: &[f64], stderr: &[f64], config: &SpikeConfig) -> Vec<bool> {
    if config.rule == SpikeRule::Trailing {
        return trailing_flags(x, stderr, config);
    }
    let defined = |j: &usize| x[*j].is_finite() && stderr[*j].is_finite();
    let mut flags = vec![false; x.len()];
    for i in 0..x.len() {
        if !defined(&i) {
            continue;
        }
        let before: Vec<usize> = (0..i).rev().filter(defined).take(config.window / 2).collect();
        let recent = before.iter().take(3).map(|&j| stderr[j]).fold(0.0, f64::max);
        if recent > 0.0 && stderr[i] > config.stderr_factor * recent {
            flags[i] = true;
        }

        let mut around: Vec<usize> = before.into_iter().rev().collect();
        around.extend((i + 1..x.len()).filter(defined).take(config.window / 2));
        if around.len() < config.min_window {
            continue;
        }
        // Robust straight line through the neighbours: median slope of
        // consecutive points, median intercept.
        let mut slopes: Vec<f64> = around
            .windows(2)
            .filter_map(|w| {
                let dt = t[w[1]] - t[w[0]];
                (dt > 0.0).then(|| (x[w[1]] - x[w[0]]) / dt)
            })
            .collect();
        let slope = if slopes.is_empty() { 0.0 } else { median(&mut slopes) };
        let mut intercepts: Vec<f64> = around.iter().map(|&j| x[j] - slope * t[j]).collect();
        let c = median(&mut intercepts);
        let mut dev: Vec<f64> = around.iter().map(|&j| (x[j] - c - slope * t[j]).abs()).collect();
        let mad = median(&mut dev);
        let mut errs: Vec<f64> = around.iter().map(|&j| stderr[j]).collect();
        let typical = median(&mut errs);
        if (x[i] - c - slope * t[i]).abs() > config.value_factor * (mad + typical) {
            flags[i] = true;
        }
    }
    flags
}

/// Flag abrupt excursions. Under [`SpikeRule::Centered`] a point is a spike
/// when its standard error exceeds `stderr_factor` times the largest of the
/// three preceding ones, or when its value leaves a robust straight line
/// through up to `window / 2` neighbours on each side by more than
/// `value_factor · (MAD + median σ_SE)`. Undefined points are never
/// flagged. Complex series are tested per component.
pub fn spike_detect(series: &ObservableSeries, config: &SpikeConfig) -> Result<Vec<bool>> {
    if series.len() < 3 {
        return Err(Error::contract(format!(
            "spike detection needs at least 3 points, got {}",
            series.len()
        )));
    }
    if series.mean.len() != series.len() || series.stderr.len() != series.len() {
        return Err(Error::contract("series columns have inconsistent lengths"));
    }
    let re: Vec<f64> = series.mean.iter().map(|z| z.re).collect();
    let mut flags = spike_flags_component(&series.times, &re, &series.stderr, config);
    if series.mean.iter().any(|z| z.im != 0.0) {
        let im: Vec<f64> = series.mean.iter().map(|z| z.im).collect();
        for (f, g) in flags
            .iter_mut()
            .zip(spike_flags_component(&series.times, &im, &series.stderr, config))
        {
            *f |= g;
        }
    }
    Ok(flags)
}

/// The four single-mode series `n`, `ζ`, `g₂`, `Π` of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleModeSeries {
    pub n: ObservableSeries,
    pub zeta: ObservableSeries,
    pub g2: ObservableSeries,
    pub parity: ObservableSeries,
}

impl SingleModeSeries {
    pub fn new(subensembles: usize) -> Self {
        Self {
            n: ObservableSeries::new("n", subensembles),
            zeta: ObservableSeries::new("zeta", subensembles),
            g2: ObservableSeries::new("g2", subensembles),
            parity: ObservableSeries::new("parity", subensembles),
        }
    }

    pub fn push(&mut self, time: f64, obs: &ModeObservables, divergence_fraction: f64) {
        self.n.push_real(time, obs.n, divergence_fraction);
        self.zeta.push_complex(time, obs.zeta, divergence_fraction);
        self.g2.push_real(time, obs.g2, divergence_fraction);
        self.parity.push_real(time, obs.parity, divergence_fraction);
    }

    pub fn times(&self) -> &[f64] {
        &self.n.times
    }

    pub fn all(&self) -> [&ObservableSeries; 4] {
        [&self.n, &self.zeta, &self.g2, &self.parity]
    }

    pub fn flag_spikes(&mut self, config: &SpikeConfig) -> Result<()> {
        if self.n.len() < 3 {
            return Ok(());
        }
        for s in [&mut self.n, &mut self.zeta, &mut self.g2, &mut self.parity] {
            s.flag_spikes(config)?;
        }
        Ok(())
    }
}

/// Records the single-mode series at every record time of a run.
#[derive(Clone, Debug)]
pub struct SingleModeRecorder {
    pub weighted: bool,
    pub series: SingleModeSeries,
    pub weight: ObservableSeries,
}

impl SingleModeRecorder {
    pub fn new(weighted: bool, subensembles: usize) -> Self {
        Self {
            weighted,
            series: SingleModeSeries::new(subensembles),
            weight: ObservableSeries::new("weight", subensembles),
        }
    }
}

impl EnsembleObserver for SingleModeRecorder {
    fn observe(&mut self, view: &EnsembleView<'_>) -> Result<()> {
        let obs = single_mode_observables(view, self.weighted)?;
        let frac = view.divergence_fraction();
        self.series.push(view.time, &obs, frac);
        self.weight.push_complex(view.time, mean_weight(view)?, frac);
        Ok(())
    }
}

/// Records multimode observables at every record time.
#[derive(Clone, Debug, Default)]
pub struct MultimodeRecorder {
    pub weighted: bool,
    pub times: Vec<f64>,
    pub divergence_fraction: Vec<f64>,
    pub records: Vec<MultimodeObservables>,
}

impl MultimodeRecorder {
    pub fn new(weighted: bool) -> Self {
        Self {
            weighted,
            ..Self::default()
        }
    }

    /// Series of a per-site or global quantity extracted from each record.
    pub fn series(
        &self,
        name: &str,
        subensembles: usize,
        f: impl Fn(&MultimodeObservables) -> ComplexEstimate,
    ) -> ObservableSeries {
        let mut s = ObservableSeries::new(name, subensembles);
        for ((t, r), d) in self.times.iter().zip(&self.records).zip(&self.divergence_fraction) {
            s.push_complex(*t, f(r), *d);
        }
        s
    }
}

impl EnsembleObserver for MultimodeRecorder {
    fn observe(&mut self, view: &EnsembleView<'_>) -> Result<()> {
        self.records.push(multimode_observables(view, self.weighted)?);
        self.times.push(view.time);
        self.divergence_fraction.push(view.divergence_fraction());
        Ok(())
    }
}

/// Exact reference curves on the simulation time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSeries {
    pub times: Vec<f64>,
    pub n: Vec<f64>,
    pub zeta: Vec<C64>,
    pub g2: Vec<f64>,
    pub parity: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegimeLabel {
    UnstableOrange,
    ParityDecayBlue,
    StableGreen,
    LowSnrYellowGreen,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::UnstableOrange => "unstable_orange",
            RegimeLabel::ParityDecayBlue => "parity_decay_blue",
            RegimeLabel::StableGreen => "stable_green",
            RegimeLabel::LowSnrYellowGreen => "low_snr_yellowgreen",
        }
    }
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifierConfig {
    /// Agreement means `|sim − ref| ≤ max(sigma_factor · σ_SE, match_floor)`.
    pub sigma_factor: f64,
    pub match_floor: f64,
    pub snr_threshold: f64,
    /// A run is unstable when its divergence fraction exceeds this before
    /// the observables settle.
    pub divergence_limit: f64,
    /// Widen the band for whole-trajectory comparisons so that the chance of
    /// any false mismatch across all record times equals the single-point
    /// false-alarm rate of `sigma_factor`.
    pub family_wise: bool,
    pub spike: SpikeConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            sigma_factor: 3.0,
            match_floor: 1e-2,
            snr_threshold: 3.0,
            divergence_limit: 0.0,
            family_wise: true,
            spike: SpikeConfig::default(),
        }
    }
}

impl ClassifierConfig {
    pub fn band(&self, stderr: f64) -> f64 {
        (self.sigma_factor * stderr).max(self.match_floor)
    }

    /// The σ multiple used when `comparisons` points are tested jointly.
    pub fn joint_sigma_factor(&self, comparisons: usize) -> f64 {
        if !self.family_wise || comparisons <= 1 {
            return self.sigma_factor;
        }
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let tail = 2.0 * unit.sf(self.sigma_factor) / comparisons as f64;
        unit.inverse_cdf(1.0 - 0.5 * tail).max(self.sigma_factor)
    }

    /// Whether `sim` agrees with `reference`; comparisons where either side
    /// is undefined count as agreement.
    pub fn agrees(&self, sim: C64, stderr: f64, reference: C64) -> bool {
        self.agrees_at(self.sigma_factor, sim, stderr, reference)
    }

    fn agrees_at(&self, z: f64, sim: C64, stderr: f64, reference: C64) -> bool {
        let d = (sim - reference).norm();
        if !d.is_finite() {
            return !(sim.re.is_finite() && reference.re.is_finite());
        }
        let stderr = if stderr.is_finite() { stderr } else { 0.0 };
        d <= (z * stderr).max(self.match_floor)
    }
}

/// Label plus the evidence behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub label: RegimeLabel,
    /// First record time at which `n`, `ζ`, `g₂` agree with the reference
    /// steady values.
    pub settle_time: Option<f64>,
    pub first_divergence_time: Option<f64>,
    pub final_g2_snr: f64,
    pub parity_mismatch: bool,
    pub parity_spikes: bool,
    pub transient_mismatch: bool,
}

fn reference_columns(r: &ReferenceSeries) -> [Vec<C64>; 3] {
    [
        r.n.iter().map(|&x| C64::new(x, 0.0)).collect(),
        r.zeta.clone(),
        r.g2.iter().map(|&x| C64::new(x, 0.0)).collect(),
    ]
}

fn zeta_agrees(cfg: &ClassifierConfig, z: f64, sim: C64, stderr: f64, reference: C64) -> bool {
    // ζ is defined up to sign; compare against the nearer branch.
    cfg.agrees_at(z, sim, stderr, reference) || cfg.agrees_at(z, sim, stderr, -reference)
}

/// Assign one regime label to a single-mode run.
pub fn classify_regime(
    sim: &SingleModeSeries,
    reference: &ReferenceSeries,
    config: &ClassifierConfig,
) -> Result<Classification> {
    let len = sim.n.len();
    if len == 0 || reference.times.len() != len {
        return Err(Error::contract(format!(
            "reference grid has {} points, simulation has {len}",
            reference.times.len()
        )));
    }
    for (a, b) in sim.times().iter().zip(&reference.times) {
        if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
            return Err(Error::contract(format!("time grids differ: {a} vs {b}")));
        }
    }
    if [
        reference.n.len(),
        reference.zeta.len(),
        reference.g2.len(),
        reference.parity.len(),
    ]
    .iter()
    .any(|&l| l != len)
    {
        return Err(Error::contract("reference columns have inconsistent lengths"));
    }
    let sims = [&sim.n, &sim.zeta, &sim.g2];
    let refs = reference_columns(reference);
    let matches = |z: f64, k: usize, i: usize, target: C64| {
        let s = sims[k];
        if k == 1 {
            zeta_agrees(config, z, s.mean[i], s.stderr[i], target)
        } else {
            config.agrees_at(z, s.mean[i], s.stderr[i], target)
        }
    };
    let z_point = config.sigma_factor;
    let z_joint = config.joint_sigma_factor(len);

    let settle = (0..len).find(|&i| (0..3).all(|k| matches(z_point, k, i, refs[k][len - 1])));
    let first_div = sim.n.divergence_fraction.iter().position(|&f| f > 0.0);
    let unstable_until = settle.unwrap_or(len - 1);
    let diverged_early = sim.n.divergence_fraction[..=unstable_until]
        .iter()
        .any(|&f| f > config.divergence_limit);
    let transient_mismatch = (0..len).any(|i| !(0..3).all(|k| matches(z_joint, k, i, refs[k][i])));

    let g2_final = Estimate {
        mean: sim.g2.mean[len - 1].re,
        stderr: sim.g2.stderr[len - 1],
    };
    let final_g2_snr = g2_final.snr();
    let parity_mismatch = (0..len).any(|i| {
        !config.agrees_at(
            z_joint,
            sim.parity.mean[i],
            sim.parity.stderr[i],
            C64::new(reference.parity[i], 0.0),
        )
    });
    let parity_spikes = if len >= 3 {
        spike_detect(&sim.parity, &config.spike)?.iter().any(|&f| f)
    } else {
        false
    };

    let label = if diverged_early || settle.is_none() {
        RegimeLabel::UnstableOrange
    } else if !(final_g2_snr >= config.snr_threshold) {
        RegimeLabel::LowSnrYellowGreen
    } else if transient_mismatch {
        RegimeLabel::UnstableOrange
    } else if parity_mismatch || parity_spikes {
        RegimeLabel::ParityDecayBlue
    } else {
        RegimeLabel::StableGreen
    };
    Ok(Classification {
        label,
        settle_time: settle.map(|i| sim.n.times[i]),
        first_divergence_time: first_div.map(|i| sim.n.times[i]),
        final_g2_snr,
        parity_mismatch,
        parity_spikes,
        transient_mismatch,
    })
}

//! Quasimomentum-basis analysis: plane-wave transform of the phase-space
//! variables, momentum occupations, antipropagating pair correlations and
//! the Cauchy–Schwarz ratio.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::estimators::{subensemble_moments, subensemble_stats, ComplexEstimate, Estimate};
use crate::model::PhasePoint;
use crate::sde::{EnsembleObserver, EnsembleView};

/// Momenta `k_m = 2πm/N`, `m = 1..N`, re-centred into `(−π, π]`.
/// Index `i` holds `m = i + 1`, so the last entry is always `k = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumGrid {
    k_values: Vec<f64>,
    dark_index: usize,
}

impl MomentumGrid {
    pub fn new(n_sites: usize, phi: f64) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::invalid("n_sites", "must be positive"));
        }
        let n = n_sites as f64;
        let k_values: Vec<f64> = (1..=n_sites)
            .map(|m| {
                let k = 2.0 * PI * m as f64 / n;
                if k > PI {
                    k - 2.0 * PI
                } else {
                    k
                }
            })
            .collect();
        let wrap = |d: f64| {
            let r = d.rem_euclid(2.0 * PI);
            r.min(2.0 * PI - r)
        };
        let dark_index = (0..n_sites)
            .min_by(|&a, &b| wrap(k_values[a] - phi).total_cmp(&wrap(k_values[b] - phi)))
            .unwrap_or(0);
        Ok(Self { k_values, dark_index })
    }

    pub fn len(&self) -> usize {
        self.k_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_values.is_empty()
    }

    pub fn k_values(&self) -> &[f64] {
        &self.k_values
    }

    pub fn k(&self, index: usize) -> f64 {
        self.k_values[index]
    }

    pub fn dark_index(&self) -> usize {
        self.dark_index
    }

    /// Index of the momentum `−k`.
    pub fn partner(&self, index: usize) -> usize {
        let n = self.len();
        (2 * n - index - 2) % n
    }

    /// Indices `i ≤ partner(i)`, one per antipropagating pair.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .map(|i| (i, self.partner(i)))
            .filter(|(i, p)| i <= p)
            .collect()
    }
}

/// Plane-wave transform: `α_k = N^{−1/2} Σ_j e^{ijk} α_j`,
/// `β_k = N^{−1/2} Σ_j e^{−ijk} β_j`, sites numbered `j = 1..N`.
pub fn to_momentum(point: &PhasePoint) -> PhasePoint {
    let n = point.n_sites();
    let mut out = PhasePoint {
        alpha: vec![C64::new(0.0, 0.0); n],
        beta: vec![C64::new(0.0, 0.0); n],
    };
    let phases = transform_phases(n);
    apply_transform(&phases, &point.alpha, &point.beta, &mut out.alpha, &mut out.beta);
    out
}

/// `phases[i * n + j] = e^{i (j+1) k_i} / √N`.
fn transform_phases(n: usize) -> Vec<C64> {
    let scale = 1.0 / (n as f64).sqrt();
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        let m = (i + 1) as f64;
        for j in 0..n {
            // The grid re-centring shifts k by 2π, which leaves e^{ijk} unchanged.
            let angle = 2.0 * PI * m * (j + 1) as f64 / n as f64;
            v.push(C64::from_polar(scale, angle));
        }
    }
    v
}

fn apply_transform(phases: &[C64], alpha: &[C64], beta: &[C64], out_a: &mut [C64], out_b: &mut [C64]) {
    let n = alpha.len();
    for i in 0..n {
        let row = &phases[i * n..(i + 1) * n];
        let mut a = C64::new(0.0, 0.0);
        let mut b = C64::new(0.0, 0.0);
        for j in 0..n {
            a += row[j] * alpha[j];
            b += row[j].conj() * beta[j];
        }
        out_a[i] = a;
        out_b[i] = b;
    }
}

/// Which moment of `n̂²` enters the Cauchy–Schwarz ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CsOrdering {
    /// `⟨a†² a²⟩`: the classical bound that nonclassical pair states violate.
    #[default]
    Normal,
    /// `⟨n̂²⟩ = ⟨a†² a²⟩ + ⟨a† a⟩`.
    Full,
}

/// Momentum-space observables at one time, indexed like [`MomentumGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumObservables {
    pub grid: MomentumGrid,
    pub n: Vec<Estimate>,
    /// `n_k / n_φ` evaluated per subensemble.
    pub ratio: Vec<Estimate>,
    /// `⟨α_k²⟩^{1/2}` per mode.
    pub zeta: Vec<ComplexEstimate>,
    /// Unnormalised `Re⟨α_k α_{−k} β_k β_{−k}⟩`.
    pub g2_unnormalized: Vec<Estimate>,
    /// `g̃₂(k, −k)`; undefined where a denominator vanishes.
    pub g2: Vec<Estimate>,
    pub cauchy_schwarz: Vec<Estimate>,
    pub ordering: CsOrdering,
}

impl MomentumObservables {
    pub fn dark(&self) -> usize {
        self.grid.dark_index()
    }

    /// Whether `e` cannot be distinguished from zero at `threshold` σ.
    pub fn low_snr(e: &Estimate, threshold: f64) -> bool {
        !(e.snr() >= threshold)
    }
}

pub fn momentum_observables(
    view: &EnsembleView<'_>,
    phi: f64,
    weighted: bool,
    ordering: CsOrdering,
) -> Result<MomentumObservables> {
    if view.n_subensembles() < 2 {
        return Err(Error::contract("estimators need at least 2 subensembles"));
    }
    let n = view.n_sites();
    let grid = MomentumGrid::new(n, phi)?;
    let phases = transform_phases(n);
    let partners: Vec<usize> = (0..n).map(|i| grid.partner(i)).collect();
    // Layout per mode i: [α_iβ_i, α_i², (α_iβ_i)², α_iβ_i α_pβ_p].
    let sub = subensemble_moments(view, weighted, 4 * n, |t, out| {
        let mut a = vec![C64::new(0.0, 0.0); n];
        let mut b = vec![C64::new(0.0, 0.0); n];
        apply_transform(&phases, &t.point.alpha, &t.point.beta, &mut a, &mut b);
        for i in 0..n {
            let ni = a[i] * b[i];
            let p = partners[i];
            out[4 * i] += ni;
            out[4 * i + 1] += a[i] * a[i];
            out[4 * i + 2] += ni * ni;
            out[4 * i + 3] += ni * a[p] * b[p];
        }
    });

    let dark = grid.dark_index();
    let collect_real = |f: &dyn Fn(&[C64]) -> Option<f64>| -> Result<Estimate> {
        let vals: Option<Vec<f64>> = sub.iter().map(|m| m.as_ref().and_then(|m| f(m))).collect();
        match vals {
            Some(v) if v.len() >= 2 && v.iter().all(|x| x.is_finite()) => subensemble_stats(&v),
            _ => Ok(Estimate::UNDEFINED),
        }
    };
    let mut obs = MomentumObservables {
        n: Vec::with_capacity(n),
        ratio: Vec::with_capacity(n),
        zeta: Vec::with_capacity(n),
        g2_unnormalized: Vec::with_capacity(n),
        g2: Vec::with_capacity(n),
        cauchy_schwarz: Vec::with_capacity(n),
        grid: grid.clone(),
        ordering,
    };
    for i in 0..n {
        let p = partners[i];
        obs.n.push(collect_real(&|m| Some(m[4 * i].re))?);
        obs.ratio.push(collect_real(&|m| {
            let d = m[4 * dark].re;
            (d != 0.0).then(|| m[4 * i].re / d)
        })?);
        let z: Option<Vec<C64>> = sub.iter().map(|m| m.as_ref().map(|m| m[4 * i + 1].sqrt())).collect();
        obs.zeta.push(match z {
            Some(v) if v.len() >= 2 => {
                let re = subensemble_stats(&v.iter().map(|x| x.re).collect::<Vec<_>>())?;
                let im = subensemble_stats(&v.iter().map(|x| x.im).collect::<Vec<_>>())?;
                ComplexEstimate {
                    mean: C64::new(re.mean, im.mean),
                    stderr: re.stderr.hypot(im.stderr),
                }
            }
            _ => ComplexEstimate::UNDEFINED,
        });
        obs.g2_unnormalized.push(collect_real(&|m| Some(m[4 * i + 3].re))?);
        obs.g2.push(collect_real(&|m| {
            let d = m[4 * i].re * m[4 * p].re;
            (d != 0.0).then(|| m[4 * i + 3].re / d)
        })?);
        obs.cauchy_schwarz.push(collect_real(&|m| {
            let second = |q: usize| match ordering {
                CsOrdering::Normal => m[4 * q + 2].re,
                CsOrdering::Full => m[4 * q + 2].re + m[4 * q].re,
            };
            let d = second(i) * second(p);
            (d > 0.0).then(|| m[4 * i + 3].norm() / d.sqrt())
        })?);
    }
    Ok(obs)
}

/// Records momentum observables at every record time.
#[derive(Clone, Debug)]
pub struct MomentumRecorder {
    pub phi: f64,
    pub weighted: bool,
    pub ordering: CsOrdering,
    pub times: Vec<f64>,
    pub records: Vec<MomentumObservables>,
}

impl MomentumRecorder {
    pub fn new(phi: f64, weighted: bool, ordering: CsOrdering) -> Self {
        Self {
            phi,
            weighted,
            ordering,
            times: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&MomentumObservables> {
        self.records.last()
    }
}

impl EnsembleObserver for MomentumRecorder {
    fn observe(&mut self, view: &EnsembleView<'_>) -> Result<()> {
        self.records
            .push(momentum_observables(view, self.phi, self.weighted, self.ordering)?);
        self.times.push(view.time);
        Ok(())
    }
}

//! Density-matrix reconstruction from phase-space samples through the
//! coherent-state kernel, and Wigner functions by displaced parity.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{subensemble_stats, Estimate};
use crate::momentum::to_momentum;
use crate::sde::EnsembleView;

/// Kernel elements above `e^{LOG_CLAMP}` in magnitude are clamped.
pub const LOG_CLAMP: f64 = 300.0;

/// Single-mode density matrix in the Fock basis `|0⟩ … |cutoff⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct FockDensityMatrix {
    pub elements: DMatrix<C64>,
}

impl FockDensityMatrix {
    pub fn new(elements: DMatrix<C64>) -> Result<Self> {
        if elements.nrows() != elements.ncols() || elements.nrows() == 0 {
            return Err(Error::contract(format!(
                "density matrix must be square and non-empty, got {}x{}",
                elements.nrows(),
                elements.ncols()
            )));
        }
        Ok(Self { elements })
    }

    pub fn zeros(cutoff: usize) -> Self {
        Self {
            elements: DMatrix::zeros(cutoff + 1, cutoff + 1),
        }
    }

    /// `|0⟩⟨0|`.
    pub fn vacuum(cutoff: usize) -> Self {
        let mut rho = Self::zeros(cutoff);
        rho.elements[(0, 0)] = C64::new(1.0, 0.0);
        rho
    }

    pub fn cutoff(&self) -> usize {
        self.elements.nrows() - 1
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.elements.trace()
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.elements[(i, j)] - self.elements[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn hermitized(&self) -> Self {
        Self {
            elements: (&self.elements + self.elements.adjoint()) * C64::new(0.5, 0.0),
        }
    }

    /// Eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = self.hermitized().elements;
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// `½‖ρ − σ‖₁` of the Hermitian parts, after padding the smaller matrix
    /// with zeros.
    pub fn trace_distance(&self, other: &FockDensityMatrix) -> f64 {
        let d = self.dim().max(other.dim());
        let mut diff = DMatrix::<C64>::zeros(d, d);
        diff.view_mut((0, 0), (self.dim(), self.dim()))
            .copy_from(&self.elements);
        let mut o = diff.view_mut((0, 0), (other.dim(), other.dim()));
        o -= &other.elements;
        let h = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
        0.5 * h.symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
    }

    /// `⟨a†a⟩`.
    pub fn photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.elements[(n, n)].re).sum()
    }

    /// `Tr[ρ e^{iπ a†a}]`.
    pub fn parity(&self) -> f64 {
        (0..self.dim())
            .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 } * self.elements[(n, n)].re)
            .sum()
    }

    /// `⟨a²⟩`.
    pub fn a_squared(&self) -> C64 {
        (2..self.dim())
            .map(|n| self.elements[(n, n - 2)] * ((n * (n - 1)) as f64).sqrt())
            .sum()
    }

    /// `⟨a†² a²⟩`.
    pub fn second_factorial_moment(&self) -> f64 {
        (0..self.dim())
            .map(|n| (n * n.saturating_sub(1)) as f64 * self.elements[(n, n)].re)
            .sum()
    }

    /// Population of the top Fock level.
    pub fn top_population(&self) -> f64 {
        self.elements[(self.cutoff(), self.cutoff())].re
    }
}

/// `ln(k!)` for `k = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `ln|z|^m` and `m·arg z`, with `0^0 = 1`.
fn log_power(z: C64, m: usize) -> (f64, f64) {
    if m == 0 {
        (0.0, 0.0)
    } else if z == C64::new(0.0, 0.0) {
        (f64::NEG_INFINITY, 0.0)
    } else {
        (m as f64 * z.norm().ln(), m as f64 * z.arg())
    }
}

/// Kernel matrix with its diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub matrix: DMatrix<C64>,
    /// Some element exceeded `e^{LOG_CLAMP}` and was clamped.
    pub clamped: bool,
    /// `|1 − Tr Λ|`, the weight lost to truncation.
    pub tail: f64,
}

/// `⟨m|Λ|n⟩ = e^{−αβ} α^m β^n / √(m! n!)`.
pub fn kernel_fock(alpha: C64, beta: C64, cutoff: usize) -> Kernel {
    let lf = ln_factorials(cutoff);
    kernel_with_factorials(alpha, beta, cutoff, &lf)
}

fn kernel_with_factorials(alpha: C64, beta: C64, cutoff: usize, lf: &[f64]) -> Kernel {
    let d = cutoff + 1;
    let ab = alpha * beta;
    let mut matrix = DMatrix::<C64>::zeros(d, d);
    let mut clamped = false;
    let pa: Vec<(f64, f64)> = (0..d).map(|m| log_power(alpha, m)).collect();
    let pb: Vec<(f64, f64)> = (0..d).map(|n| log_power(beta, n)).collect();
    for m in 0..d {
        for n in 0..d {
            let mut lg = -ab.re + pa[m].0 + pb[n].0 - 0.5 * (lf[m] + lf[n]);
            if lg == f64::NEG_INFINITY {
                continue;
            }
            if lg > LOG_CLAMP {
                lg = LOG_CLAMP;
                clamped = true;
            }
            matrix[(m, n)] = C64::from_polar(lg.exp(), -ab.im + pa[m].1 + pb[n].1);
        }
    }
    let tail = (C64::new(1.0, 0.0) - matrix.trace()).norm();
    Kernel { matrix, clamped, tail }
}

/// Which mode of a lattice to reconstruct.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeSelector {
    Site(usize),
    /// Index into the momentum grid (see [`crate::momentum::MomentumGrid`]).
    Momentum(usize),
}

/// Reconstructed density matrix with its diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    /// Raw ensemble average (not Hermitized).
    pub rho: FockDensityMatrix,
    /// `Re Tr ρ` with subensemble error.
    pub trace: Estimate,
    pub hermiticity_deviation: f64,
    /// Trajectories whose kernel needed clamping.
    pub clamped: usize,
    /// Largest per-trajectory truncation tail `|1 − Tr Λ|`.
    pub max_tail: f64,
}

/// `ρ = ⟨(Ω) Λ(α_sel, β_sel)⟩` over the surviving trajectories.
pub fn reconstruct_density(
    view: &EnsembleView<'_>,
    selector: ModeSelector,
    cutoff: usize,
    weighted: bool,
) -> Result<Reconstruction> {
    let n_sites = view.n_sites();
    let index = match selector {
        ModeSelector::Site(j) | ModeSelector::Momentum(j) => j,
    };
    if index >= n_sites {
        return Err(Error::contract(format!(
            "mode {index} out of range for {n_sites} sites"
        )));
    }
    if view.n_subensembles() < 2 {
        return Err(Error::contract("reconstruction needs at least 2 subensembles"));
    }
    let lf = ln_factorials(cutoff);
    let d = cutoff + 1;
    let batches: Vec<_> = view.subensembles().collect();
    let partial: Vec<(DMatrix<C64>, usize, usize, f64)> = batches
        .par_iter()
        .map(|batch| {
            let mut sum = DMatrix::<C64>::zeros(d, d);
            let (mut count, mut clamped, mut tail) = (0usize, 0usize, 0.0f64);
            for t in batch.iter().filter(|t| t.is_active()) {
                let (a, b) = match selector {
                    ModeSelector::Site(j) => (t.point.alpha[j], t.point.beta[j]),
                    ModeSelector::Momentum(k) => {
                        let m = to_momentum(&t.point);
                        (m.alpha[k], m.beta[k])
                    }
                };
                let kern = kernel_with_factorials(a, b, cutoff, &lf);
                if weighted && t.weight != C64::new(1.0, 0.0) {
                    sum += kern.matrix * t.weight;
                } else {
                    sum += kern.matrix;
                }
                clamped += kern.clamped as usize;
                tail = tail.max(kern.tail);
                count += 1;
            }
            (sum, count, clamped, tail)
        })
        .collect();

    let mut total = DMatrix::<C64>::zeros(d, d);
    let mut count = 0usize;
    let mut clamped = 0usize;
    let mut max_tail: f64 = 0.0;
    let mut traces = Vec::new();
    for (sum, c, cl, tail) in &partial {
        if *c > 0 {
            traces.push(sum.trace().re / *c as f64);
        }
        total += sum;
        count += c;
        clamped += cl;
        max_tail = max_tail.max(*tail);
    }
    if count == 0 {
        return Err(Error::Numerical("no surviving trajectories to reconstruct from".into()));
    }
    let rho = FockDensityMatrix::new(total / C64::new(count as f64, 0.0))?;
    let trace = if traces.len() >= 2 {
        subensemble_stats(&traces)?
    } else {
        Estimate::UNDEFINED
    };
    Ok(Reconstruction {
        hermiticity_deviation: rho.hermiticity_deviation(),
        rho,
        trace,
        clamped,
        max_tail,
    })
}

/// Wigner function sampled on a rectangular grid, `α₀ = x + ip`,
/// normalised so that `∫W dx dp = Tr ρ`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// `values[(ix, ip)]`.
    pub values: DMatrix<f64>,
    /// The grid reaches amplitudes the Fock cutoff cannot represent.
    pub extent_warning: bool,
}

impl WignerGrid {
    /// Value at the grid point nearest to the origin.
    pub fn at_origin(&self) -> f64 {
        let nearest = |axis: &[f64]| {
            (0..axis.len())
                .min_by(|&a, &b| axis[a].abs().total_cmp(&axis[b].abs()))
                .unwrap_or(0)
        };
        self.values[(nearest(&self.x), nearest(&self.p))]
    }

    /// Riemann-sum integral over the grid.
    pub fn integral(&self) -> f64 {
        let dx = if self.x.len() > 1 { self.x[1] - self.x[0] } else { 1.0 };
        let dp = if self.p.len() > 1 { self.p[1] - self.p[0] } else { 1.0 };
        self.values.sum() * dx * dp
    }
}

/// Uniform axis of `points` values over `[lo, hi]`.
pub fn uniform_axis(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// `W(α₀) = (2/π) Tr[ρ D(α₀) P D(α₀)†]` for every point of the grid. The
/// input is Hermitized first.
pub fn wigner(rho: &FockDensityMatrix, x: &[f64], p: &[f64]) -> WignerGrid {
    let rho = rho.hermitized();
    let cutoff = rho.cutoff();
    let lf = ln_factorials(cutoff);
    let columns: Vec<Vec<f64>> = x
        .par_iter()
        .map(|&xv| p.iter().map(|&pv| wigner_point(&rho, C64::new(xv, pv), &lf)).collect())
        .collect();
    let values = DMatrix::from_fn(x.len(), p.len(), |i, j| columns[i][j]);
    let max_r = x
        .iter()
        .flat_map(|&a| p.iter().map(move |&b| a.hypot(b)))
        .fold(0.0, f64::max);
    WignerGrid {
        x: x.to_vec(),
        p: p.to_vec(),
        values,
        extent_warning: max_r * max_r + 3.0 * max_r > cutoff as f64,
    }
}

/// Displaced-parity matrix elements for `m ≥ n`:
/// `⟨m|D P D†|n⟩ = (−1)^n √(n!/m!) (2α)^{m−n} e^{−2|α|²} L_n^{(m−n)}(4|α|²)`.
fn wigner_point(rho: &FockDensityMatrix, a: C64, lf: &[f64]) -> f64 {
    let d = rho.dim();
    let r2 = a.norm_sqr();
    let x = 4.0 * r2;
    let ln2a = if r2 > 0.0 {
        (2.0 * a.norm()).ln()
    } else {
        f64::NEG_INFINITY
    };
    let theta = a.arg();
    let mut total = 0.0;
    let mut lag = vec![0.0; d];
    for k in 0..d {
        // L_n^{(k)}(x) for n = 0..d-k by the three-term recurrence.
        let len = d - k;
        let kf = k as f64;
        lag[0] = 1.0;
        if len > 1 {
            lag[1] = 1.0 + kf - x;
        }
        for n in 1..len.saturating_sub(1) {
            let nf = n as f64;
            lag[n + 1] = ((2.0 * nf + 1.0 + kf - x) * lag[n] - (nf + kf) * lag[n - 1]) / (nf + 1.0);
        }
        for n in 0..len {
            let m = n + k;
            let log_mag = 0.5 * (lf[n] - lf[m]) - 2.0 * r2 + if k == 0 { 0.0 } else { kf * ln2a };
            if log_mag == f64::NEG_INFINITY {
                continue;
            }
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let elem = C64::from_polar(sign * log_mag.exp() * lag[n], kf * theta);
            // Tr[ρ A] = Σ ρ_{nm} A_{mn}; the m < n half is the conjugate.
            if k == 0 {
                total += (rho.elements[(n, m)] * elem).re;
            } else {
                total += 2.0 * (rho.elements[(n, m)] * elem).re;
            }
        }
    }
    2.0 / PI * total
}

//! Physical model of the two-photon driven resonator array and the
//! phase-space drift, diffusion, noise and gauge terms of its positive-P
//! stochastic equations.
//!
//! Vectors of length `2N` are ordered `[α_1 … α_N, β_1 … β_N]`. Noise
//! channels follow the same convention: the diagonal decomposition uses
//! columns `[ξ_1 … ξ_N, ξ̃_1 … ξ̃_N]`, and the split decomposition appends
//! the two two-photon-loss channels `[…, η_1 … η_N, η̃_1 … η̃_N]`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Ring: site `N + 1` is site 1.
    #[default]
    Periodic,
    /// Chain: the end sites have a single dissipative bond.
    Open,
}

/// Physical parameters of the array. All rates are in units of the drive
/// amplitude when `epsilon = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    n_sites: usize,
    epsilon: C64,
    kappa1: f64,
    kappa2: f64,
    gamma: f64,
    phi: f64,
    boundary: Boundary,
}

impl ModelParams {
    pub fn new(
        n_sites: usize,
        epsilon: C64,
        kappa1: f64,
        kappa2: f64,
        gamma: f64,
        phi: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::invalid("n_sites", "must be at least 1"));
        }
        for (field, value) in [("kappa1", kappa1), ("kappa2", kappa2), ("gamma", gamma)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::invalid(field, format!("must be finite and >= 0, got {value}")));
            }
        }
        if !(epsilon.re.is_finite() && epsilon.im.is_finite()) {
            return Err(Error::invalid("epsilon", "must be finite"));
        }
        if !phi.is_finite() {
            return Err(Error::invalid("phi", "must be finite"));
        }
        if n_sites == 1 && gamma != 0.0 {
            return Err(Error::invalid(
                "gamma",
                "a single site has no dissipative bond; gamma must be 0 when n_sites = 1",
            ));
        }
        Ok(Self {
            n_sites,
            epsilon,
            kappa1,
            kappa2,
            gamma,
            phi,
            boundary,
        })
    }

    /// Single resonator with real drive amplitude `epsilon`.
    pub fn single_mode(epsilon: f64, kappa1: f64, kappa2: f64) -> Result<Self> {
        Self::new(1, C64::new(epsilon, 0.0), kappa1, kappa2, 0.0, 0.0, Boundary::Periodic)
    }

    /// Ring of `n_sites` resonators with real drive amplitude `epsilon`.
    pub fn ring(n_sites: usize, epsilon: f64, kappa1: f64, kappa2: f64, gamma: f64, phi: f64) -> Result<Self> {
        Self::new(
            n_sites,
            C64::new(epsilon, 0.0),
            kappa1,
            kappa2,
            gamma,
            phi,
            Boundary::Periodic,
        )
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
    pub fn epsilon(&self) -> C64 {
        self.epsilon
    }
    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }
    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn phi(&self) -> f64 {
        self.phi
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Site-to-site drive phase increment, always twice the dissipator phase.
    pub fn theta(&self) -> f64 {
        2.0 * self.phi
    }

    /// Drive amplitude `ε_j = ε e^{-iθj}` of the 0-based site `site` (site
    /// label `j = site + 1`).
    pub fn drive(&self, site: usize) -> C64 {
        let j = (site + 1) as f64;
        self.epsilon * C64::from_polar(1.0, -self.theta() * j)
    }

    /// Dissipative bonds `(j, j+1)` as 0-based site pairs. Each bond carries
    /// the jump operator `a_j − e^{iφ} a_{j+1}` at rate γ.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites;
        if n < 2 || self.gamma == 0.0 {
            return Vec::new();
        }
        match self.boundary {
            Boundary::Periodic => (0..n).map(|j| (j, (j + 1) % n)).collect(),
            Boundary::Open => (0..n - 1).map(|j| (j, j + 1)).collect(),
        }
    }
}

/// One phase-space sample: ket amplitudes `alpha` and bra amplitudes `beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub alpha: Vec<C64>,
    pub beta: Vec<C64>,
}

impl PhasePoint {
    pub fn new(alpha: Vec<C64>, beta: Vec<C64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                actual: beta.len(),
            });
        }
        Ok(Self { alpha, beta })
    }

    pub fn single(alpha: C64, beta: C64) -> Self {
        Self {
            alpha: vec![alpha],
            beta: vec![beta],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_finite(&self) -> bool {
        self.alpha
            .iter()
            .chain(&self.beta)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn check(&self, params: &ModelParams) -> Result<()> {
        let n = params.n_sites();
        for len in [self.alpha.len(), self.beta.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        Ok(())
    }
}

/// Vacuum initial condition: all amplitudes exactly zero.
pub fn sample_vacuum(n_sites: usize) -> PhasePoint {
    PhasePoint {
        alpha: vec![C64::new(0.0, 0.0); n_sites],
        beta: vec![C64::new(0.0, 0.0); n_sites],
    }
}

/// Draw a single-mode sample of the cat state `|ζ⟩ ± |−ζ⟩` from the
/// four-atom distribution `δ₊₊ + δ₋₋ + e^{-2|ζ|²}(δ₊₋ + δ₋₊)` with
/// `δ_{s,t} = δ(α − sζ) δ(β* − tζ)`.
///
/// Atoms are drawn with probability proportional to the magnitude of their
/// weight; the returned trajectory weight carries the sign and the
/// normalisation, so it is exactly 1 for the even cat. The odd cat has
/// negative cross weights and returns signed weights.
pub fn sample_cat<R: Rng + ?Sized>(zeta: C64, sign: i8, rng: &mut R) -> Result<(PhasePoint, f64)> {
    if !(zeta.re.is_finite() && zeta.im.is_finite()) {
        return Err(Error::invalid("zeta", "must be finite"));
    }
    let s = match sign {
        1 => 1.0,
        -1 => -1.0,
        other => return Err(Error::invalid("sign", format!("must be +1 or -1, got {other}"))),
    };
    let cross = (-2.0 * zeta.norm_sqr()).exp();
    let total_abs = 2.0 + 2.0 * cross;
    let total = 2.0 + 2.0 * s * cross;
    if total <= 0.0 {
        return Err(Error::invalid("zeta", "the odd cat state does not exist at zeta = 0"));
    }
    let u: f64 = rng.random::<f64>() * total_abs;
    let (a_sign, b_sign, atom_weight) = if u < 1.0 {
        (1.0, 1.0, 1.0)
    } else if u < 2.0 {
        (-1.0, -1.0, 1.0)
    } else if u < 2.0 + cross {
        (1.0, -1.0, s)
    } else {
        (-1.0, 1.0, s)
    };
    let point = PhasePoint::single(zeta * a_sign, zeta.conj() * b_sign);
    let weight = if s > 0.0 { 1.0 } else { atom_weight * total_abs / total };
    Ok((point, weight))
}

/// Drift vector `A` of the ungauged equations, length `2N`.
pub fn drift(params: &ModelParams, point: &PhasePoint) -> Result<Vec<C64>> {
    point.check(params)?;
    let n = params.n_sites();
    let mut out = vec![C64::new(0.0, 0.0); 2 * n];
    drift_into(params, &point.alpha, &point.beta, &mut out);
    Ok(out)
}

/// Allocation-free drift kernel shared with the integrator.
pub(crate) fn drift_into(params: &ModelParams, alpha: &[C64], beta: &[C64], out: &mut [C64]) {
    let n = params.n_sites();
    let k1 = params.kappa1();
    let k2 = params.kappa2();
    let half_gamma = 0.5 * params.gamma();
    for j in 0..n {
        let eps = params.drive(j);
        let (a, b) = (alpha[j], beta[j]);
        out[j] = (-k2 * a * a - 2.0 * I * eps) * b - 0.5 * k1 * a;
        out[n + j] = (-k2 * b * b + 2.0 * I * eps.conj()) * a - 0.5 * k1 * b;
    }
    if half_gamma == 0.0 {
        return;
    }
    let fwd = C64::from_polar(half_gamma, params.phi());
    let bwd = fwd.conj();
    for (j, jp) in params.bonds() {
        // Bond (j, j+1): a_j picks up e^{iφ} α_{j+1}, a_{j+1} picks up e^{-iφ} α_j,
        // both lose γ/2; β carries the conjugate phases.
        out[j] += fwd * alpha[jp] - half_gamma * alpha[j];
        out[jp] += bwd * alpha[j] - half_gamma * alpha[jp];
        out[n + j] += bwd * beta[jp] - half_gamma * beta[j];
        out[n + jp] += fwd * beta[j] - half_gamma * beta[jp];
    }
}

/// Diffusion matrix `D` (`2N × 2N`, diagonal in this model).
pub fn diffusion_matrix(params: &ModelParams, point: &PhasePoint) -> Result<DMatrix<C64>> {
    point.check(params)?;
    let n = params.n_sites();
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        let (da, db) = site_diffusion(params.kappa2(), params.drive(j), point.alpha[j], point.beta[j]);
        d[(j, j)] = da;
        d[(n + j, n + j)] = db;
    }
    Ok(d)
}

#[inline]
pub(crate) fn site_diffusion(kappa2: f64, eps: C64, a: C64, b: C64) -> (C64, C64) {
    (-kappa2 * a * a - 2.0 * I * eps, -kappa2 * b * b + 2.0 * I * eps.conj())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Decomposition {
    /// `B = √D`, two real noises per site.
    #[default]
    DiagSqrt,
    /// Drive and two-photon-loss noise separated, four real noises per site.
    SplitFourNoise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Gauge {
    #[default]
    None,
    /// Cancels the drive and replaces `−κ₂α²β` by `−κ₂α|αβ|`.
    Choice1,
    /// Replaces the diagonal drift by `−|2iε + κ₂α²| α`.
    Choice2,
}

/// Which noise decomposition and drift gauge the integrator uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct SchemeSpec {
    decomposition: Decomposition,
    gauge: Gauge,
}

impl SchemeSpec {
    /// Plain positive-P with `B = √D`.
    pub const POSITIVE_P: SchemeSpec = SchemeSpec {
        decomposition: Decomposition::DiagSqrt,
        gauge: Gauge::None,
    };
    /// Positive-P with the four-noise decomposition.
    pub const POSITIVE_P_SPLIT: SchemeSpec = SchemeSpec {
        decomposition: Decomposition::SplitFourNoise,
        gauge: Gauge::None,
    };
    pub const GAUGE_CHOICE1: SchemeSpec = SchemeSpec {
        decomposition: Decomposition::SplitFourNoise,
        gauge: Gauge::Choice1,
    };
    pub const GAUGE_CHOICE2: SchemeSpec = SchemeSpec {
        decomposition: Decomposition::DiagSqrt,
        gauge: Gauge::Choice2,
    };

    pub fn new(decomposition: Decomposition, gauge: Gauge) -> Result<Self> {
        match (decomposition, gauge) {
            (Decomposition::DiagSqrt, Gauge::Choice1) => Err(Error::invalid(
                "scheme",
                "gauge choice1 is defined for the split four-noise decomposition",
            )),
            (Decomposition::SplitFourNoise, Gauge::Choice2) => Err(Error::invalid(
                "scheme",
                "gauge choice2 is defined for the diagonal square-root decomposition",
            )),
            _ => Ok(Self { decomposition, gauge }),
        }
    }

    pub fn decomposition(&self) -> Decomposition {
        self.decomposition
    }
    pub fn gauge(&self) -> Gauge {
        self.gauge
    }
    pub fn is_gauged(&self) -> bool {
        self.gauge != Gauge::None
    }

    /// Real noise channels per site.
    pub fn noises_per_site(&self) -> usize {
        match self.decomposition {
            Decomposition::DiagSqrt => 2,
            Decomposition::SplitFourNoise => 4,
        }
    }

    /// Short label used in output files.
    pub fn label(&self) -> &'static str {
        match (self.decomposition, self.gauge) {
            (Decomposition::DiagSqrt, Gauge::None) => "pp_diag",
            (Decomposition::SplitFourNoise, Gauge::None) => "pp_choice1",
            (Decomposition::SplitFourNoise, Gauge::Choice1) => "gp_choice1",
            (Decomposition::DiagSqrt, Gauge::Choice2) => "gp_choice2",
            _ => "invalid",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            // Choice 2 without the gauge is the plain diagonal decomposition.
            "pp_diag" | "positive_p" | "pp_choice2" => Ok(Self::POSITIVE_P),
            "pp_choice1" => Ok(Self::POSITIVE_P_SPLIT),
            "gp_choice1" => Ok(Self::GAUGE_CHOICE1),
            "gp_choice2" => Ok(Self::GAUGE_CHOICE2),
            other => Err(Error::invalid("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

/// Noise block of one site: two rows (α, β) and up to four columns. For the
/// diagonal decomposition only columns 0 and 1 are used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiteNoise {
    pub rows: [[C64; 4]; 2],
    pub cols: usize,
}

#[inline]
pub(crate) fn site_noise(decomposition: Decomposition, kappa2: f64, eps: C64, a: C64, b: C64) -> SiteNoise {
    let zero = C64::new(0.0, 0.0);
    match decomposition {
        Decomposition::DiagSqrt => {
            let (da, db) = site_diffusion(kappa2, eps, a, b);
            SiteNoise {
                rows: [[da.sqrt(), zero, zero, zero], [zero, db.sqrt(), zero, zero]],
                cols: 2,
            }
        }
        Decomposition::SplitFourNoise => {
            let s2 = kappa2.sqrt();
            SiteNoise {
                rows: [
                    [(-2.0 * I * eps).sqrt(), zero, I * a * s2, zero],
                    [zero, (2.0 * I * eps.conj()).sqrt(), zero, I * b * s2],
                ],
                cols: 4,
            }
        }
    }
}

/// Per-site gauge functions, in the same column order as [`SiteNoise`].
#[inline]
pub(crate) fn site_gauge(gauge: Gauge, kappa2: f64, eps: C64, a: C64, b: C64) -> [C64; 4] {
    let zero = C64::new(0.0, 0.0);
    match gauge {
        Gauge::None => [zero; 4],
        Gauge::Choice1 => {
            let ab = a * b;
            let tp = I * kappa2.sqrt() * (ab - ab.norm());
            [b * (-2.0 * I * eps).sqrt(), a * (2.0 * I * eps.conj()).sqrt(), tp, tp]
        }
        Gauge::Choice2 => {
            let (da, db) = site_diffusion(kappa2, eps, a, b);
            let (sa, sb) = (da.sqrt(), db.sqrt());
            [b * sa + a * sa.conj(), a * sb + b * sb.conj(), zero, zero]
        }
    }
}

/// Global column index of noise `col` (0..4) of 0-based site `site`.
#[inline]
pub(crate) fn noise_column(n_sites: usize, site: usize, col: usize) -> usize {
    col * n_sites + site
}

/// Full noise matrix `B` (`2N × 2N` or `2N × 4N`) with `B·Bᵀ = D`.
pub fn noise_matrix(scheme: &SchemeSpec, params: &ModelParams, point: &PhasePoint) -> Result<DMatrix<C64>> {
    point.check(params)?;
    let n = params.n_sites();
    let per = scheme.noises_per_site();
    let mut b = DMatrix::zeros(2 * n, per * n);
    for j in 0..n {
        let block = site_noise(
            scheme.decomposition(),
            params.kappa2(),
            params.drive(j),
            point.alpha[j],
            point.beta[j],
        );
        for c in 0..per {
            let col = noise_column(n, j, c);
            b[(j, col)] = block.rows[0][c];
            b[(n + j, col)] = block.rows[1][c];
        }
    }
    Ok(b)
}

/// Per-site noise blocks, in site order.
pub fn noise_blocks(scheme: &SchemeSpec, params: &ModelParams, point: &PhasePoint) -> Result<Vec<SiteNoise>> {
    point.check(params)?;
    Ok((0..params.n_sites())
        .map(|j| {
            site_noise(
                scheme.decomposition(),
                params.kappa2(),
                params.drive(j),
                point.alpha[j],
                point.beta[j],
            )
        })
        .collect())
}

/// Gauge vector `g`, one entry per noise column (zeros when ungauged).
pub fn gauge_vector(scheme: &SchemeSpec, params: &ModelParams, point: &PhasePoint) -> Result<Vec<C64>> {
    point.check(params)?;
    // Re-validate: a SchemeSpec can only be built consistently, but keep the
    // contract explicit for callers constructing one via `Default`.
    SchemeSpec::new(scheme.decomposition(), scheme.gauge()).map_err(|e| Error::contract(e.to_string()))?;
    let n = params.n_sites();
    let per = scheme.noises_per_site();
    let mut g = vec![C64::new(0.0, 0.0); per * n];
    for j in 0..n {
        let gj = site_gauge(
            scheme.gauge(),
            params.kappa2(),
            params.drive(j),
            point.alpha[j],
            point.beta[j],
        );
        for c in 0..per {
            g[noise_column(n, j, c)] = gj[c];
        }
    }
    Ok(g)
}

/// Gauged drift `A − B·g`. Equals [`drift`] when the scheme is ungauged.
pub fn gauged_drift(scheme: &SchemeSpec, params: &ModelParams, point: &PhasePoint) -> Result<Vec<C64>> {
    let mut a = drift(params, point)?;
    if !scheme.is_gauged() {
        return Ok(a);
    }
    let n = params.n_sites();
    for j in 0..n {
        let eps = params.drive(j);
        let (x, y) = (point.alpha[j], point.beta[j]);
        let block = site_noise(scheme.decomposition(), params.kappa2(), eps, x, y);
        let g = site_gauge(scheme.gauge(), params.kappa2(), eps, x, y);
        for c in 0..block.cols {
            a[j] -= block.rows[0][c] * g[c];
            a[n + j] -= block.rows[1][c] * g[c];
        }
    }
    Ok(a)
}

/// Drift-only rate of change of `I = |α|² + |β|²` for a single mode:
/// `−8 Im(ε* α β*) − κ₁ I − 2κ₂ I Re(αβ)`, which reduces to
/// `−8ε Im(αβ*) − …` for real ε. Positive values mark trajectories moving
/// away from the origin.
pub fn stability_rate(params: &ModelParams, point: &PhasePoint) -> Result<f64> {
    if params.n_sites() != 1 {
        return Err(Error::contract("stability_rate is defined for a single mode only"));
    }
    point.check(params)?;
    let (a, b) = (point.alpha[0], point.beta[0]);
    let big_i = a.norm_sqr() + b.norm_sqr();
    let eps = params.epsilon();
    Ok(-8.0 * (eps.conj() * a * b.conj()).im - params.kappa1() * big_i - 2.0 * params.kappa2() * big_i * (a * b).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_point_gives_exact_zeros() {
        let p = ModelParams::ring(3, 1.3, 0.2, 0.7, 2.0, 0.4).unwrap();
        let x = sample_vacuum(3);
        assert!(drift(&p, &x).unwrap().iter().all(|z| *z == c(0.0, 0.0)));
        for scheme in [
            SchemeSpec::GAUGE_CHOICE1,
            SchemeSpec::GAUGE_CHOICE2,
            SchemeSpec::POSITIVE_P,
        ] {
            assert!(gauge_vector(&scheme, &p, &x).unwrap().iter().all(|z| *z == c(0.0, 0.0)));
        }
        let zero_drive = ModelParams::single_mode(0.0, 1.0, 0.0).unwrap();
        let any = PhasePoint::single(c(0.3, -1.0), c(2.0, 0.5));
        let d = diffusion_matrix(&zero_drive, &any).unwrap();
        assert!(d.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn single_mode_drift_substitution() {
        let p = ModelParams::single_mode(1.0, 0.0, 0.0).unwrap();
        let a = drift(&p, &PhasePoint::single(c(0.0, 0.0), c(1.0, 0.0))).unwrap();
        assert_eq!(a[0], c(0.0, -2.0));
        assert_eq!(a[1], c(0.0, 0.0));
    }

    #[test]
    fn diffusion_at_origin() {
        let p = ModelParams::single_mode(1.0, 0.0, 1.0).unwrap();
        let d = diffusion_matrix(&p, &sample_vacuum(1)).unwrap();
        assert_eq!(d[(0, 0)], c(0.0, -2.0));
        assert_eq!(d[(1, 1)], c(0.0, 2.0));
        assert_eq!(d[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn noise_matrices_on_principal_branch() {
        let p = ModelParams::single_mode(1.0, 0.0, 0.0).unwrap();
        let b = noise_matrix(&SchemeSpec::POSITIVE_P, &p, &sample_vacuum(1)).unwrap();
        assert!((b[(0, 0)] - c(1.0, -1.0)).norm() < 1e-15);
        assert!((b[(1, 1)] - c(1.0, 1.0)).norm() < 1e-15);

        let p = ModelParams::single_mode(1.0, 0.0, 1.0).unwrap();
        let b = noise_matrix(&SchemeSpec::POSITIVE_P_SPLIT, &p, &sample_vacuum(1)).unwrap();
        assert_eq!(b.shape(), (2, 4));
        assert!((b[(0, 0)] - c(1.0, -1.0)).norm() < 1e-15);
        assert!((b[(1, 1)] - c(1.0, 1.0)).norm() < 1e-15);
        assert_eq!(b[(0, 2)], c(0.0, 0.0));
        assert_eq!(b[(1, 3)], c(0.0, 0.0));
    }

    #[test]
    fn inconsistent_schemes_rejected() {
        assert!(SchemeSpec::new(Decomposition::DiagSqrt, Gauge::Choice1).is_err());
        assert!(SchemeSpec::new(Decomposition::SplitFourNoise, Gauge::Choice2).is_err());
        assert!(SchemeSpec::new(Decomposition::SplitFourNoise, Gauge::Choice1).is_ok());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1, c(1.0, 0.0), 0.0, 0.0, 0.5, 0.0, Boundary::Periodic).is_err());
        assert!(ModelParams::new(0, c(1.0, 0.0), 0.0, 0.0, 0.0, 0.0, Boundary::Periodic).is_err());
        assert!(ModelParams::single_mode(1.0, -0.1, 0.0).is_err());
        assert!(ModelParams::single_mode(1.0, 0.1, f64::NAN).is_err());
        let p = ModelParams::ring(4, 1.0, 0.0, 0.0, 1.0, 0.3).unwrap();
        assert_eq!(p.theta(), 0.6);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = ModelParams::ring(3, 1.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let err = drift(&p, &sample_vacuum(2)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 3, actual: 2 });
        assert!(stability_rate(&p, &sample_vacuum(3)).is_err());
    }

    #[test]
    fn open_chain_drift_matches_bond_sum() {
        // Open chain of two sites: one bond, each site loses γ/2.
        let p = ModelParams::new(2, c(0.0, 0.0), 0.0, 0.0, 2.0, 0.0, Boundary::Open).unwrap();
        let x = PhasePoint::new(vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0); 2]).unwrap();
        let a = drift(&p, &x).unwrap();
        assert_eq!(a[0], c(-1.0, 0.0));
        assert_eq!(a[1], c(1.0, 0.0));
    }

    #[test]
    fn stability_rate_examples() {
        let p = ModelParams::single_mode(0.0, 1.0, 0.0).unwrap();
        assert_eq!(
            stability_rate(&p, &PhasePoint::single(c(1.0, 0.0), c(0.0, 0.0))).unwrap(),
            -1.0
        );
        let p = ModelParams::single_mode(1.0, 0.3, 0.2).unwrap();
        assert_eq!(stability_rate(&p, &sample_vacuum(1)).unwrap(), 0.0);
    }

    #[test]
    fn cat_sampler_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (x, w) = sample_cat(c(0.0, 0.0), 1, &mut rng).unwrap();
            assert_eq!(x, sample_vacuum(1));
            assert_eq!(w, 1.0);
        }
        // |ζ|² = 50: cross atoms have probability ~e^{-100}.
        let zeta = c(5.0, 5.0);
        let mut plus = 0;
        for _ in 0..4000 {
            let (x, _) = sample_cat(zeta, 1, &mut rng).unwrap();
            assert_eq!(x.beta[0], x.alpha[0].conj());
            if x.alpha[0] == zeta {
                plus += 1;
            }
        }
        assert!((plus as f64 / 4000.0 - 0.5).abs() < 4.0 * (0.25f64 / 4000.0).sqrt());
        assert!(sample_cat(c(0.0, 0.0), -1, &mut rng).is_err());
        assert!(sample_cat(zeta, 0, &mut rng).is_err());
    }

    #[test]
    fn odd_cat_weights_are_signed() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let zeta = c(0.6, 0.0);
        let mut saw_negative = false;
        for _ in 0..2000 {
            let (x, w) = sample_cat(zeta, -1, &mut rng).unwrap();
            let cross = x.beta[0] != x.alpha[0].conj();
            assert_eq!(cross, w < 0.0);
            saw_negative |= w < 0.0;
        }
        assert!(saw_negative);
    }
}

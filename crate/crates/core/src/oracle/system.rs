use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::basis::{BlockOp, FockBasis, SectorMap};
use super::sparse::SparseOp;
use super::{ModeBasis, OracleConfig};
use crate::error::{Error, Result};
use crate::model::{Boundary, ModelParams};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Truncated-Fock Lindblad generator of the lattice model.
#[derive(Clone, Debug)]
pub struct LindbladSystem {
    params: ModelParams,
    mode_basis: ModeBasis,
    basis: FockBasis,
    hamiltonian: SparseOp,
    jumps: Vec<SparseOp>,
    /// `−i H_eff` with `H_eff = H − (i/2) Σ O†O`.
    k_op: SparseOp,
    sectors: SectorMap,
    k_blocks: Vec<SparseOp>,
    jump_blocks: Vec<BlockOp>,
    /// Per mode, `(sector, position)` of every basis state at the cutoff.
    top_states: Vec<Vec<(usize, usize)>>,
    liouvillian_bound: f64,
    config: OracleConfig,
}

fn dft_phase(n: usize, site: usize, mode: usize) -> f64 {
    // e^{i j k} with j = site + 1 and k = 2π(mode + 1)/N.
    2.0 * PI * ((site + 1) * (mode + 1)) as f64 / n as f64
}

impl LindbladSystem {
    pub fn new(params: &ModelParams, config: &OracleConfig) -> Result<Self> {
        let n = params.n_sites();
        if config.basis == ModeBasis::Momentum && params.boundary() == Boundary::Open && n > 1 {
            return Err(Error::invalid(
                "basis",
                "the momentum basis requires periodic boundaries",
            ));
        }
        if !(config.step_norm > 0.0 && config.step_norm <= 2.5) {
            return Err(Error::invalid(
                "step_norm",
                format!("must lie in (0, 2.5], got {}", config.step_norm),
            ));
        }
        let cutoffs = match &config.cutoffs {
            Some(c) if c.len() != n => {
                return Err(Error::invalid(
                    "cutoffs",
                    format!("expected {n} cutoffs, got {}", c.len()),
                ));
            }
            Some(c) => c.clone(),
            None => super::default_cutoffs(params, config.basis),
        };
        let dim = FockBasis::dimension_of(&cutoffs);
        if dim > config.max_dim {
            return Err(Error::DimensionTooLarge {
                dimension: dim,
                limit: config.max_dim,
            });
        }
        let basis = FockBasis::new(cutoffs);
        let (hamiltonian, jumps) = match config.basis {
            ModeBasis::Site => site_operators(params, &basis),
            ModeBasis::Momentum => momentum_operators(params, &basis),
        };
        let dim = basis.dim();
        let decay = SparseOp::sum(dim, dim, &jumps.iter().map(|o| o.adjoint().mul(o)).collect::<Vec<_>>());
        let h_eff = hamiltonian.add(&decay.scale(C64::new(0.0, -0.5)));
        let k_op = h_eff.scale(C64::new(0.0, -1.0));

        let labelings: Vec<Vec<u64>> = {
            let parity: Vec<u64> = (0..dim).map(|i| (basis.total_photons(i) % 2) as u64).collect();
            let mut v = Vec::new();
            if !config.use_symmetries {
                v.push(vec![0; dim]);
            }
            if config.basis == ModeBasis::Momentum && n > 1 {
                v.push(
                    (0..dim)
                        .map(|i| {
                            let k: usize = (0..n).map(|m| (m + 1) * basis.occupation(i, m)).sum();
                            parity[i] + 2 * (k % n) as u64
                        })
                        .collect(),
                );
            }
            v.push(parity);
            v.push(vec![0; dim]);
            v
        };
        let mut chosen = None;
        for labels in labelings {
            let sectors = SectorMap::from_labels(&labels);
            let Some(kb) = sectors.split(&k_op) else { continue };
            if kb.parts.iter().any(|p| p.src != p.dst) {
                continue;
            }
            let Some(jb) = jumps.iter().map(|o| sectors.split(o)).collect::<Option<Vec<_>>>() else {
                continue;
            };
            let mut k_blocks: Vec<SparseOp> = (0..sectors.n_sectors())
                .map(|s| SparseOp::zero(sectors.block_dim(s), sectors.block_dim(s)))
                .collect();
            for part in kb.parts {
                k_blocks[part.src] = part.op;
            }
            chosen = Some((sectors, k_blocks, jb));
            break;
        }
        let (sectors, k_blocks, jump_blocks) = chosen.expect("the trivial partition always splits");

        let top_states = (0..n)
            .map(|m| {
                (0..dim)
                    .filter(|&i| basis.occupation(i, m) == basis.cutoffs()[m])
                    .map(|i| (sectors.sector_of(i), sectors.position(i)))
                    .collect()
            })
            .collect();
        let liouvillian_bound = 2.0 * k_op.norm_bound() + jumps.iter().map(|o| o.norm_bound().powi(2)).sum::<f64>();
        Ok(Self {
            params: params.clone(),
            mode_basis: config.basis,
            basis,
            hamiltonian,
            jumps,
            k_op,
            sectors,
            k_blocks,
            jump_blocks,
            top_states,
            liouvillian_bound,
            config: config.clone(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    pub fn mode_basis(&self) -> ModeBasis {
        self.mode_basis
    }
    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }
    pub fn cutoffs(&self) -> &[usize] {
        self.basis.cutoffs()
    }
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
    pub fn sectors(&self) -> &SectorMap {
        &self.sectors
    }
    pub fn hamiltonian(&self) -> &SparseOp {
        &self.hamiltonian
    }
    pub fn jumps(&self) -> &[SparseOp] {
        &self.jumps
    }
    pub fn config(&self) -> &OracleConfig {
        &self.config
    }
    /// Upper bound on the norm of the Liouvillian.
    pub fn liouvillian_bound(&self) -> f64 {
        self.liouvillian_bound
    }

    /// `dρ/dt` for an arbitrary dense `ρ` (no Hermiticity assumed).
    pub fn liouvillian_apply(&self, rho: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        let d = self.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: rho.nrows(),
            });
        }
        let k_rho = self.k_op.mul_dense(rho);
        let rho_kdag = self.k_op.mul_dense(&rho.adjoint()).adjoint();
        let mut out = k_rho + rho_kdag;
        for o in &self.jumps {
            let rho_odag = o.mul_dense(&rho.adjoint()).adjoint();
            out += o.mul_dense(&rho_odag);
        }
        Ok(out)
    }

    /// Vacuum of all modes.
    pub fn vacuum(&self) -> BlockState {
        let mut s = BlockState::zeros(&self.sectors);
        s.blocks[self.sectors.sector_of(0)][0] = C64::new(1.0, 0.0);
        s
    }

    pub fn state_from_dense(&self, rho: &DMatrix<C64>) -> Result<BlockState> {
        BlockState::from_dense(&self.sectors, rho)
    }

    pub fn state_to_dense(&self, state: &BlockState) -> DMatrix<C64> {
        state.to_dense(&self.sectors)
    }

    /// `dρ/dt` on the block structure; `ρ` must be Hermitian.
    pub fn apply_blocks(&self, rho: &BlockState, out: &mut BlockState) {
        out.blocks.par_iter_mut().enumerate().for_each(|(s, o)| {
            let d = self.sectors.block_dim(s);
            o.iter_mut().for_each(|x| *x = ZERO);
            let mut x = vec![ZERO; d * d];
            self.k_blocks[s].mul_rowmajor_acc(&rho.blocks[s], d, &mut x);
            for r in 0..d {
                for c in 0..d {
                    o[r * d + c] = x[r * d + c] + x[c * d + r].conj();
                }
            }
            for jb in &self.jump_blocks {
                for part in jb.parts.iter().filter(|p| p.dst == s) {
                    let ds = self.sectors.block_dim(part.src);
                    // Y = O ρ (d × ds), Z = O Y† (d × d), contribution Z†.
                    let mut y = vec![ZERO; d * ds];
                    part.op.mul_rowmajor_acc(&rho.blocks[part.src], ds, &mut y);
                    let mut yt = vec![ZERO; ds * d];
                    for r in 0..d {
                        for c in 0..ds {
                            yt[c * d + r] = y[r * ds + c].conj();
                        }
                    }
                    let mut z = vec![ZERO; d * d];
                    part.op.mul_rowmajor_acc(&yt, d, &mut z);
                    for r in 0..d {
                        for c in 0..d {
                            o[r * d + c] += z[c * d + r].conj();
                        }
                    }
                }
            }
        });
    }

    /// Population of the top Fock level of every mode.
    pub fn top_populations(&self, state: &BlockState) -> Vec<f64> {
        self.top_states
            .iter()
            .map(|states| {
                states
                    .iter()
                    .map(|&(s, p)| state.blocks[s][p * self.sectors.block_dim(s) + p].re)
                    .sum()
            })
            .collect()
    }

    fn check_truncation(&self, state: &BlockState, time: f64) -> Result<Vec<f64>> {
        let tops = self.top_populations(state);
        for (mode, &p) in tops.iter().enumerate() {
            if p > self.config.truncation_limit {
                return Err(Error::Truncation {
                    mode,
                    population: p,
                    limit: self.config.truncation_limit,
                    time,
                });
            }
        }
        Ok(tops)
    }

    /// Largest RK4 step allowed by the configured `‖L‖·dt` bound.
    pub fn max_step(&self) -> f64 {
        if self.liouvillian_bound > 0.0 {
            self.config.step_norm / self.liouvillian_bound
        } else {
            f64::INFINITY
        }
    }

    /// Fixed-step RK4 from `rho0` at t = 0 through the ascending `times`,
    /// calling `observe` at each. Fails with a truncation error when a
    /// mode's top level exceeds the configured population.
    pub fn evolve<F>(&self, rho0: &BlockState, times: &[f64], mut observe: F) -> Result<EvolveReport>
    where
        F: FnMut(f64, &BlockState) -> Result<()>,
    {
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::invalid("times", "must be ascending and non-negative"));
        }
        let h_max = self.max_step();
        let mut rho = rho0.clone();
        let mut work = Rk4Work::new(&rho);
        let mut t = 0.0;
        let mut report = EvolveReport {
            steps: 0,
            dt_max: h_max,
            max_trace_drift: 0.0,
            max_top_population: vec![0.0; self.basis.n_modes()],
        };
        let tr0 = rho.trace().re;
        for &target in times {
            let span = target - t;
            if span > 0.0 {
                let steps = (span / h_max).ceil().max(1.0) as u64;
                let h = span / steps as f64;
                for _ in 0..steps {
                    self.rk4_step(&mut rho, h, &mut work);
                }
                report.steps += steps;
                t = target;
            }
            let tops = self.check_truncation(&rho, t)?;
            for (m, p) in tops.into_iter().enumerate() {
                report.max_top_population[m] = report.max_top_population[m].max(p);
            }
            report.max_trace_drift = report.max_trace_drift.max((rho.trace().re - tr0).abs());
            observe(t, &rho)?;
        }
        Ok(report)
    }

    fn rk4_step(&self, rho: &mut BlockState, h: f64, w: &mut Rk4Work) {
        self.apply_blocks(rho, &mut w.k1);
        w.tmp.assign_axpy(rho, 0.5 * h, &w.k1);
        self.apply_blocks(&w.tmp, &mut w.k2);
        w.tmp.assign_axpy(rho, 0.5 * h, &w.k2);
        self.apply_blocks(&w.tmp, &mut w.k3);
        w.tmp.assign_axpy(rho, h, &w.k3);
        self.apply_blocks(&w.tmp, &mut w.k4);
        rho.axpy(h / 6.0, &w.k1);
        rho.axpy(h / 3.0, &w.k2);
        rho.axpy(h / 3.0, &w.k3);
        rho.axpy(h / 6.0, &w.k4);
        rho.hermitize(&self.sectors);
    }

    /// `max |L ρ|` over all elements.
    pub fn residual(&self, rho: &BlockState) -> f64 {
        let mut out = BlockState::zeros(&self.sectors);
        self.apply_blocks(rho, &mut out);
        out.max_abs()
    }

    /// Stationary state: null vector of the full superoperator when the
    /// dimension allows and the null space is one-dimensional, otherwise
    /// long-time evolution from the vacuum (flagged as degenerate when the
    /// null space is degenerate).
    pub fn steady_state(&self, options: &SteadyOptions) -> Result<SteadyState> {
        let d = self.dim();
        if d <= options.max_superoperator_dim {
            let dd = d * d;
            let mut sup = DMatrix::<C64>::zeros(dd, dd);
            for i in 0..d {
                for j in 0..d {
                    let mut e = DMatrix::<C64>::zeros(d, d);
                    e[(i, j)] = C64::new(1.0, 0.0);
                    let l = self.liouvillian_apply(&e)?;
                    for r in 0..d {
                        for c in 0..d {
                            sup[(r * d + c, i * d + j)] = l[(r, c)];
                        }
                    }
                }
            }
            let svd = sup.svd(false, true);
            let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
            let sv = svd.singular_values;
            let smax = sv.max();
            let mut order: Vec<usize> = (0..sv.len()).collect();
            order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
            let near_zero = order
                .iter()
                .filter(|&&i| sv[i] <= options.degeneracy_tol * smax)
                .count();
            if near_zero <= 1 {
                let row = order[0];
                let mut rho = DMatrix::<C64>::from_fn(d, d, |r, c| v_t[(row, r * d + c)].conj());
                let tr = rho.trace();
                rho /= tr;
                let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
                let state = BlockState::from_dense_projected(&self.sectors, &rho);
                return Ok(SteadyState {
                    residual: self.residual(&state),
                    rho: state,
                    degenerate: false,
                    method: SteadyMethod::NullSpace,
                    second_singular_value: sv[order[1.min(order.len() - 1)]] / smax,
                });
            }
            let mut s = self.long_time(options)?;
            s.degenerate = true;
            return Ok(s);
        }
        self.long_time(options)
    }

    fn long_time(&self, options: &SteadyOptions) -> Result<SteadyState> {
        let mut rho = self.vacuum();
        let mut t = 0.0;
        let mut residual = self.residual(&rho);
        while residual > options.tolerance && t < options.t_max {
            let chunk = options.chunk;
            let mut next = rho.clone();
            self.evolve(&rho, &[chunk], |_, s| {
                next = s.clone();
                Ok(())
            })?;
            rho = next;
            t += chunk;
            residual = self.residual(&rho);
        }
        if residual > options.tolerance {
            return Err(Error::Numerical(format!(
                "long-time evolution did not converge by t = {t}: residual {residual:.3e}"
            )));
        }
        Ok(SteadyState {
            rho,
            degenerate: false,
            residual,
            method: SteadyMethod::LongTime { time: t },
            second_singular_value: f64::NAN,
        })
    }
}

struct Rk4Work {
    k1: BlockState,
    k2: BlockState,
    k3: BlockState,
    k4: BlockState,
    tmp: BlockState,
}

impl Rk4Work {
    fn new(like: &BlockState) -> Self {
        let z = like.zeros_like();
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveReport {
    pub steps: u64,
    pub dt_max: f64,
    pub max_trace_drift: f64,
    pub max_top_population: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyOptions {
    /// Largest Hilbert dimension for the dense superoperator route.
    pub max_superoperator_dim: usize,
    /// Relative singular-value threshold for the null space.
    pub degeneracy_tol: f64,
    pub tolerance: f64,
    pub chunk: f64,
    pub t_max: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            max_superoperator_dim: 40,
            degeneracy_tol: 1e-9,
            tolerance: 1e-8,
            chunk: 1.0,
            t_max: 1e3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SteadyMethod {
    NullSpace,
    LongTime { time: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub rho: BlockState,
    /// More than one stationary state exists; `rho` is the one selected by
    /// evolution from the vacuum.
    pub degenerate: bool,
    pub residual: f64,
    pub method: SteadyMethod,
    /// Second-smallest singular value relative to the largest.
    pub second_singular_value: f64,
}

/// Block-diagonal density matrix, one row-major block per sector.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockState {
    dims: Vec<usize>,
    pub blocks: Vec<Vec<C64>>,
}

impl BlockState {
    pub fn zeros(sectors: &SectorMap) -> Self {
        let dims: Vec<usize> = (0..sectors.n_sectors()).map(|s| sectors.block_dim(s)).collect();
        Self {
            blocks: dims.iter().map(|&d| vec![ZERO; d * d]).collect(),
            dims,
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            blocks: self.dims.iter().map(|&d| vec![ZERO; d * d]).collect(),
        }
    }

    /// Convert a dense matrix; entries coupling different sectors must vanish.
    pub fn from_dense(sectors: &SectorMap, rho: &DMatrix<C64>) -> Result<Self> {
        let d = sectors.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: rho.nrows(),
            });
        }
        let scale = rho.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for r in 0..d {
            for c in 0..d {
                if sectors.sector_of(r) != sectors.sector_of(c) && rho[(r, c)].norm() > 1e-12 * scale.max(1e-300) {
                    return Err(Error::contract(
                        "initial state couples symmetry sectors; it is not block diagonal in this basis",
                    ));
                }
            }
        }
        Ok(Self::from_dense_projected(sectors, rho))
    }

    fn from_dense_projected(sectors: &SectorMap, rho: &DMatrix<C64>) -> Self {
        let mut s = Self::zeros(sectors);
        for (b, block) in s.blocks.iter_mut().enumerate() {
            let members = sectors.members(b);
            let d = members.len();
            for (i, &r) in members.iter().enumerate() {
                for (j, &c) in members.iter().enumerate() {
                    block[i * d + j] = rho[(r, c)];
                }
            }
        }
        s
    }

    pub fn to_dense(&self, sectors: &SectorMap) -> DMatrix<C64> {
        let d = sectors.dim();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for (b, block) in self.blocks.iter().enumerate() {
            let members = sectors.members(b);
            let bd = members.len();
            for (i, &r) in members.iter().enumerate() {
                for (j, &c) in members.iter().enumerate() {
                    m[(r, c)] = block[i * bd + j];
                }
            }
        }
        m
    }

    pub fn trace(&self) -> C64 {
        self.blocks
            .iter()
            .zip(&self.dims)
            .map(|(b, &d)| (0..d).map(|i| b[i * d + i]).sum::<C64>())
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Element `ρ[r, c]` by basis index.
    pub fn get(&self, sectors: &SectorMap, r: usize, c: usize) -> C64 {
        let s = sectors.sector_of(r);
        if s != sectors.sector_of(c) {
            return ZERO;
        }
        self.blocks[s][sectors.position(r) * self.dims[s] + sectors.position(c)]
    }

    fn axpy(&mut self, a: f64, x: &BlockState) {
        for (b, xb) in self.blocks.iter_mut().zip(&x.blocks) {
            for (y, xv) in b.iter_mut().zip(xb) {
                *y += xv * a;
            }
        }
    }

    fn assign_axpy(&mut self, base: &BlockState, a: f64, x: &BlockState) {
        for ((b, bb), xb) in self.blocks.iter_mut().zip(&base.blocks).zip(&x.blocks) {
            for ((y, bv), xv) in b.iter_mut().zip(bb).zip(xb) {
                *y = bv + xv * a;
            }
        }
    }

    fn hermitize(&mut self, _sectors: &SectorMap) {
        for (b, &d) in self.blocks.iter_mut().zip(&self.dims) {
            for r in 0..d {
                b[r * d + r].im = 0.0;
                for c in r + 1..d {
                    let avg = 0.5 * (b[r * d + c] + b[c * d + r].conj());
                    b[r * d + c] = avg;
                    b[c * d + r] = avg.conj();
                }
            }
        }
    }
}

/// Hamiltonian and scaled jump operators in the site basis.
fn site_operators(params: &ModelParams, basis: &FockBasis) -> (SparseOp, Vec<SparseOp>) {
    let n = params.n_sites();
    let dim = basis.dim();
    let mut h_terms = Vec::new();
    let mut jumps = Vec::new();
    for j in 0..n {
        let eps = params.drive(j);
        let create2 = basis.raising(j, 2);
        let annihilate2 = basis.lowering(j, 2);
        h_terms.push(create2.scale(eps));
        h_terms.push(annihilate2.scale(eps.conj()));
        if params.kappa1() > 0.0 {
            jumps.push(basis.lowering(j, 1).scale(C64::new(params.kappa1().sqrt(), 0.0)));
        }
        if params.kappa2() > 0.0 {
            jumps.push(annihilate2.scale(C64::new(params.kappa2().sqrt(), 0.0)));
        }
    }
    if params.gamma() > 0.0 {
        let g = params.gamma().sqrt();
        for (j, jp) in params.bonds() {
            let l = basis
                .lowering(j, 1)
                .add(&basis.lowering(jp, 1).scale(-C64::from_polar(1.0, params.phi())));
            jumps.push(l.scale(C64::new(g, 0.0)));
        }
    }
    (SparseOp::sum(dim, dim, &h_terms), jumps)
}

/// The same generator expressed with plane-wave modes `b_k`, using
/// momentum-diagonal jump sets that produce the identical dissipator.
fn momentum_operators(params: &ModelParams, basis: &FockBasis) -> (SparseOp, Vec<SparseOp>) {
    let n = params.n_sites();
    let dim = basis.dim();
    let nf = n as f64;
    let lower: Vec<SparseOp> = (0..n).map(|k| basis.lowering(k, 1)).collect();
    let raise: Vec<SparseOp> = lower.iter().map(|o| o.adjoint()).collect();
    let tiny = 1e-13;

    // H = Σ_{k,k'} c_{kk'} b_k† b_k'† + h.c., c_{kk'} = (1/N) Σ_j ε_j e^{ij(k+k')}.
    let mut h_terms = Vec::new();
    for k in 0..n {
        for kp in 0..n {
            let c: C64 = (0..n)
                .map(|j| params.drive(j) * C64::from_polar(1.0, dft_phase(n, j, k) + dft_phase(n, j, kp)))
                .sum::<C64>()
                / nf;
            if c.norm() < tiny {
                continue;
            }
            let pair = if k == kp {
                basis.raising(k, 2)
            } else {
                raise[k].mul(&raise[kp])
            };
            h_terms.push(pair.scale(c));
            h_terms.push(pair.adjoint().scale(c.conj()));
        }
    }

    // Loss and the collective dissipator both act through b_k; their rates add.
    let mut jumps = Vec::new();
    for (k, op) in lower.iter().enumerate() {
        let kv = 2.0 * PI * (k + 1) as f64 / nf;
        let rate = params.kappa1()
            + params.gamma() * (C64::new(1.0, 0.0) - C64::from_polar(1.0, params.phi() - kv)).norm_sqr();
        if rate > tiny {
            jumps.push(op.scale(C64::new(rate.sqrt(), 0.0)));
        }
    }
    if params.kappa2() > 0.0 {
        // A_q = N^{-1/2} Σ_j e^{ijq} a_j² = N^{-3/2} Σ_{k,k'} Σ_j e^{ij(q−k−k')} b_k b_k'.
        for q in 0..n {
            let mut terms = Vec::new();
            for k in 0..n {
                for kp in 0..n {
                    let c: C64 = (0..n)
                        .map(|j| C64::from_polar(1.0, dft_phase(n, j, q) - dft_phase(n, j, k) - dft_phase(n, j, kp)))
                        .sum::<C64>()
                        / nf.powf(1.5);
                    if c.norm() < tiny {
                        continue;
                    }
                    let pair = if k == kp {
                        basis.lowering(k, 2)
                    } else {
                        lower[k].mul(&lower[kp])
                    };
                    terms.push(pair.scale(c * params.kappa2().sqrt()));
                }
            }
            let a_q = SparseOp::sum(dim, dim, &terms);
            if a_q.nnz() > 0 {
                jumps.push(a_q);
            }
        }
    }
    (SparseOp::sum(dim, dim, &h_terms), jumps)
}

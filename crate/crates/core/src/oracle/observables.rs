use num_complex::Complex64 as C64;

use super::basis::FockBasis;
use super::sparse::SparseOp;
use super::system::{BlockState, LindbladSystem};
use super::ModeBasis;
use crate::error::Result;
use crate::reconstruction::FockDensityMatrix;

/// Exact expectation values of one oracle state.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleObservables {
    pub trace: f64,
    /// Per site: `⟨a†a⟩`.
    pub n: Vec<f64>,
    /// Per site: principal `√⟨a²⟩`.
    pub zeta: Vec<C64>,
    /// Per site: `⟨a†²a²⟩ / ⟨a†a⟩²` (NaN at zero occupation).
    pub g2: Vec<f64>,
    /// Per site `⟨e^{iπ a†a}⟩`, when requested.
    pub local_parity: Option<Vec<f64>>,
    /// `⟨a_j† a_{j′}⟩ / √(n_j n_{j′})`.
    pub g1: Vec<Vec<C64>>,
    /// `⟨a_j† a_{j′}† a_j a_{j′}⟩ / (n_j n_{j′})`.
    pub g2_matrix: Vec<Vec<f64>>,
    pub global_parity: f64,
}

/// Precomputed operators for [`OracleObservables`].
#[derive(Clone, Debug)]
pub struct OracleProbe {
    n_sites: usize,
    number: Vec<SparseOp>,
    square: Vec<SparseOp>,
    factorial2: Vec<SparseOp>,
    /// Row `j`, column `j′`.
    hop: Vec<Vec<SparseOp>>,
    pair: Vec<Vec<SparseOp>>,
    local_parity: Option<Vec<SparseOp>>,
}

/// Site annihilation operator `a_j` expressed in the system's mode basis.
pub fn site_lowering(sys: &LindbladSystem, site: usize) -> SparseOp {
    let basis = sys.basis();
    match sys.mode_basis() {
        ModeBasis::Site => basis.lowering(site, 1),
        ModeBasis::Momentum => {
            let n = basis.n_modes();
            let dim = basis.dim();
            let ops: Vec<SparseOp> = (0..n)
                .map(|k| basis.lowering(k, 1).scale(site_coefficient(n, site, k)))
                .collect();
            SparseOp::sum(dim, dim, &ops)
        }
    }
}

/// `a_j = Σ_k u_{jk} b_k` with `u_{jk} = e^{−ijk}/√N`.
fn site_coefficient(n: usize, site: usize, mode: usize) -> C64 {
    let angle = 2.0 * std::f64::consts::PI * ((site + 1) * (mode + 1)) as f64 / n as f64;
    C64::from_polar(1.0 / (n as f64).sqrt(), -angle)
}

/// `e^{iπ a_j†a_j}` in the plane-wave basis. As a passive transformation it
/// maps `b_l† → Σ_k M*_{lk} b_k†` with `M = 1 − 2 w uᵀ`; matrix elements
/// between states inside the truncation are built exactly because creation
/// operators never return a component from beyond a cutoff.
fn momentum_local_parity(basis: &FockBasis, site: usize) -> SparseOp {
    let n = basis.n_modes();
    let dim = basis.dim();
    let u: Vec<C64> = (0..n).map(|k| site_coefficient(n, site, k)).collect();
    let w: Vec<C64> = u.iter().map(|z| z.conj()).collect();
    let raise: Vec<SparseOp> = (0..n).map(|k| basis.raising(k, 1)).collect();
    let creators: Vec<SparseOp> = (0..n)
        .map(|l| {
            let terms: Vec<SparseOp> = (0..n)
                .map(|k| {
                    let delta = if k == l { 1.0 } else { 0.0 };
                    let m = C64::new(delta, 0.0) - 2.0 * w[l] * u[k];
                    raise[k].scale(m.conj())
                })
                .collect();
            SparseOp::sum(dim, dim, &terms)
        })
        .collect();
    let mut entries = Vec::new();
    for col in 0..dim {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[0] = C64::new(1.0, 0.0);
        for (l, creator) in creators.iter().enumerate() {
            let occ = basis.occupation(col, l);
            for q in 1..=occ {
                v = creator.apply(&v);
                let s = 1.0 / (q as f64).sqrt();
                v.iter_mut().for_each(|x| *x *= s);
            }
        }
        for (row, x) in v.into_iter().enumerate() {
            if x.norm() > 1e-15 {
                entries.push((row, col, x));
            }
        }
    }
    SparseOp::from_triplets(dim, dim, entries)
}

impl OracleProbe {
    pub fn new(sys: &LindbladSystem, with_local_parity: bool) -> Self {
        let basis = sys.basis();
        let n = sys.params().n_sites();
        let dim = basis.dim();
        let lower: Vec<SparseOp> = (0..n).map(|j| site_lowering(sys, j)).collect();
        let raise: Vec<SparseOp> = lower.iter().map(|o| o.adjoint()).collect();
        let square: Vec<SparseOp> = match sys.mode_basis() {
            ModeBasis::Site => (0..n).map(|j| basis.lowering(j, 2)).collect(),
            ModeBasis::Momentum => lower.iter().map(|a| a.mul(a)).collect(),
        };
        let number = (0..n).map(|j| raise[j].mul(&lower[j])).collect();
        let factorial2 = square.iter().map(|s| s.adjoint().mul(s)).collect();
        let hop = (0..n)
            .map(|j| (0..n).map(|k| raise[j].mul(&lower[k])).collect())
            .collect();
        let pair = (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        let low = lower[j].mul(&lower[k]);
                        low.adjoint().mul(&low)
                    })
                    .collect()
            })
            .collect();
        let local_parity = with_local_parity.then(|| match sys.mode_basis() {
            ModeBasis::Site => (0..n)
                .map(|j| {
                    SparseOp::from_triplets(
                        dim,
                        dim,
                        (0..dim)
                            .map(|i| {
                                let s = if basis.occupation(i, j) % 2 == 0 { 1.0 } else { -1.0 };
                                (i, i, C64::new(s, 0.0))
                            })
                            .collect(),
                    )
                })
                .collect(),
            ModeBasis::Momentum => (0..n).map(|j| momentum_local_parity(basis, j)).collect(),
        });
        Self {
            n_sites: n,
            number,
            square,
            factorial2,
            hop,
            pair,
            local_parity,
        }
    }

    pub fn measure(&self, sys: &LindbladSystem, state: &BlockState) -> OracleObservables {
        let n = self.n_sites;
        let ex = |op: &SparseOp| expectation(sys, state, op);
        let occ: Vec<f64> = self.number.iter().map(|o| ex(o).re).collect();
        let zeta = self.square.iter().map(|o| ex(o).sqrt()).collect();
        let g2 = self
            .factorial2
            .iter()
            .zip(&occ)
            .map(|(o, &m)| if m != 0.0 { ex(o).re / (m * m) } else { f64::NAN })
            .collect();
        let mut g1 = vec![vec![C64::new(f64::NAN, f64::NAN); n]; n];
        let mut g2m = vec![vec![f64::NAN; n]; n];
        for j in 0..n {
            for k in 0..n {
                let d = occ[j] * occ[k];
                if d > 0.0 {
                    g1[j][k] = ex(&self.hop[j][k]) / d.sqrt();
                    g2m[j][k] = ex(&self.pair[j][k]).re / d;
                }
            }
        }
        let basis = sys.basis();
        let sectors = sys.sectors();
        let global_parity = (0..basis.dim())
            .map(|i| {
                let s = if basis.total_photons(i) % 2 == 0 { 1.0 } else { -1.0 };
                s * state.get(sectors, i, i).re
            })
            .sum();
        OracleObservables {
            trace: state.trace().re,
            n: occ,
            zeta,
            g2,
            local_parity: self
                .local_parity
                .as_ref()
                .map(|ops| ops.iter().map(|o| ex(o).re).collect()),
            g1,
            g2_matrix: g2m,
            global_parity,
        }
    }
}

/// `Tr[ρ X]`.
pub fn expectation(sys: &LindbladSystem, state: &BlockState, op: &SparseOp) -> C64 {
    let sectors = sys.sectors();
    op.triplets().map(|(r, c, v)| v * state.get(sectors, c, r)).sum()
}

/// Dense single-mode matrix of a one-mode oracle state.
pub fn single_mode_density(sys: &LindbladSystem, state: &BlockState) -> Result<FockDensityMatrix> {
    FockDensityMatrix::new(sys.state_to_dense(state))
}

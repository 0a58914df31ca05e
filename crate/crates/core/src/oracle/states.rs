use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::reconstruction::{ln_factorials, FockDensityMatrix};

/// Fock tail above which a built state is reported as truncated.
pub const STATE_TAIL_LIMIT: f64 = 1e-8;

/// A reference state together with the norm it lost to the cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct BuiltState {
    pub rho: FockDensityMatrix,
    pub tail: f64,
}

impl BuiltState {
    pub fn truncation_warning(&self) -> bool {
        self.tail > STATE_TAIL_LIMIT
    }
}

/// Truncated coherent amplitudes `e^{−|ζ|²/2} ζ^n / √n!` (unnormalised).
pub fn coherent_amplitudes(zeta: C64, cutoff: usize) -> DVector<C64> {
    let lf = ln_factorials(cutoff);
    let r2 = zeta.norm_sqr();
    DVector::from_fn(cutoff + 1, |n, _| {
        if n == 0 {
            C64::new((-0.5 * r2).exp(), 0.0)
        } else if zeta == C64::new(0.0, 0.0) {
            C64::new(0.0, 0.0)
        } else {
            let lg = -0.5 * r2 + n as f64 * zeta.norm().ln() - 0.5 * lf[n];
            C64::from_polar(lg.exp(), n as f64 * zeta.arg())
        }
    })
}

fn projector(v: &DVector<C64>) -> DMatrix<C64> {
    v * v.adjoint()
}

/// Coherent state `|ζ⟩⟨ζ|`, renormalised on the truncated space.
pub fn coherent_state_density(zeta: C64, cutoff: usize) -> BuiltState {
    let v = coherent_amplitudes(zeta, cutoff);
    let norm2 = v.norm_squared();
    BuiltState {
        rho: FockDensityMatrix {
            elements: projector(&v) / C64::new(norm2, 0.0),
        },
        tail: (1.0 - norm2).abs(),
    }
}

/// Cat state `𝒩(|ζ⟩ ± |−ζ⟩)`. The tail compares the truncated norm with
/// the analytic `2(1 ± e^{−2|ζ|²})`.
pub fn cat_state_density(zeta: C64, sign: i8, cutoff: usize) -> Result<BuiltState> {
    if sign != 1 && sign != -1 {
        return Err(Error::invalid("sign", "must be +1 or -1"));
    }
    let s = f64::from(sign);
    let exact = 2.0 * (1.0 + s * (-2.0 * zeta.norm_sqr()).exp());
    if exact <= 0.0 {
        return Err(Error::invalid("zeta", "the odd cat state vanishes at zeta = 0"));
    }
    let v = coherent_amplitudes(zeta, cutoff) + coherent_amplitudes(-zeta, cutoff) * C64::new(s, 0.0);
    let norm2 = v.norm_squared();
    Ok(BuiltState {
        rho: FockDensityMatrix {
            elements: projector(&v) / C64::new(norm2, 0.0),
        },
        tail: (1.0 - norm2 / exact).abs(),
    })
}

/// Equal mixture `½(|ζ⟩⟨ζ| + |−ζ⟩⟨−ζ|)`.
pub fn coherent_mixture(zeta: C64, cutoff: usize) -> BuiltState {
    let a = coherent_state_density(zeta, cutoff);
    let b = coherent_state_density(-zeta, cutoff);
    BuiltState {
        rho: FockDensityMatrix {
            elements: (a.rho.elements + b.rho.elements) * C64::new(0.5, 0.0),
        },
        tail: a.tail.max(b.tail),
    }
}

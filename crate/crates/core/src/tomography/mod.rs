//! State and process tomography with Poissonian error bars.

pub mod mle;
pub mod montecarlo;
pub mod process;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::photonics_sim::Channel;
use crate::protocol::MeasurementBasis;
use crate::qcore::{self, DensityMatrix, Ket, Operator, QError, C64};

pub use mle::{mle_reconstruct, TomoResult};
pub use montecarlo::{binomial_fidelity, monte_carlo_sigma, FidelityEstimate};
pub use process::{process_fidelity, process_from_states, ProcessMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TomoError {
    #[error("no counts in basis {0}")]
    EmptyBasis(MeasurementBasis),
    #[error("basis {0} is missing from the count table")]
    MissingBasis(MeasurementBasis),
    #[error("basis {0} appears more than once")]
    DuplicateBasis(MeasurementBasis),
    #[error("process tomography needs exactly the inputs H, V, P, L")]
    WrongInputSet,
    #[error("singular transfer matrix")]
    Singular,
    #[error("process matrix must be a Hermitian 4x4 matrix")]
    BadProcessMatrix,
    #[error(transparent)]
    State(#[from] QError),
}

/// Projective counts in one analysis basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub basis: MeasurementBasis,
    pub n_first: u64,
    pub n_second: u64,
}

impl CountRecord {
    pub fn new(basis: MeasurementBasis, n_first: u64, n_second: u64) -> Self {
        CountRecord {
            basis,
            n_first,
            n_second,
        }
    }

    pub fn total(&self) -> u64 {
        self.n_first + self.n_second
    }

    /// Counts Bob detections: `e` is the first basis outcome, `f` the second.
    pub fn from_channels<I: IntoIterator<Item = Channel>>(basis: MeasurementBasis, channels: I) -> Self {
        let mut r = CountRecord::new(basis, 0, 0);
        for c in channels {
            match c {
                Channel::E => r.n_first += 1,
                Channel::F => r.n_second += 1,
                _ => {}
            }
        }
        r
    }

    /// Expected-value counts `round(n · p)` for a state, used as exact-proportion data.
    pub fn exact(rho: &DensityMatrix, basis: MeasurementBasis, n: u64) -> Self {
        let p = basis.first_probability(rho).expect("dimension 2");
        let n_first = (n as f64 * p).round() as u64;
        CountRecord::new(basis, n_first, n - n_first)
    }
}

/// Counts ordered as HV, PM, RL after checking every basis occurs once.
pub(crate) fn by_basis(counts: &[CountRecord]) -> Result<[CountRecord; 3], TomoError> {
    let mut slots: [Option<CountRecord>; 3] = [None; 3];
    for c in counts {
        let i = basis_index(c.basis);
        if slots[i].is_some() {
            return Err(TomoError::DuplicateBasis(c.basis));
        }
        slots[i] = Some(*c);
    }
    let mut out = [CountRecord::new(MeasurementBasis::HV, 0, 0); 3];
    for (i, b) in MeasurementBasis::ALL.into_iter().enumerate() {
        let c = slots[i].ok_or(TomoError::MissingBasis(b))?;
        if c.total() == 0 {
            return Err(TomoError::EmptyBasis(b));
        }
        out[i] = c;
    }
    Ok(out)
}

fn basis_index(b: MeasurementBasis) -> usize {
    match b {
        MeasurementBasis::HV => 0,
        MeasurementBasis::PM => 1,
        MeasurementBasis::RL => 2,
    }
}

/// Bloch-vector inversion ½(I + s_x σ_x + s_y σ_y + s_z σ_z).
///
/// `s_z` comes from H/V, `s_x` from P/M and `s_y` from R/L. The result is
/// Hermitian with unit trace but may have a negative eigenvalue.
pub fn linear_inversion(counts: &[CountRecord]) -> Result<DMatrix<C64>, TomoError> {
    let [hv, pm, rl] = by_basis(counts)?;
    let s = |c: CountRecord| (c.n_first as f64 - c.n_second as f64) / c.total() as f64;
    let (sx, sy, sz) = (s(pm), s(rl), s(hv));
    let mut m = Operator::identity(2).matrix().clone();
    m += Operator::sigma_x().matrix() * C64::from(sx);
    m += Operator::sigma_y().matrix() * C64::from(sy);
    m += Operator::sigma_z().matrix() * C64::from(sz);
    Ok(m * C64::from(0.5))
}

/// Eigenvalue clipping to the PSD cone followed by trace renormalization.
pub fn project_psd(m: &DMatrix<C64>) -> DensityMatrix {
    let h = (m + m.adjoint()) * C64::from(0.5);
    let n = h.nrows();
    let eig = h.symmetric_eigen();
    let mut out = DMatrix::<C64>::zeros(n, n);
    let mut total = 0.0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let l = lambda.max(0.0);
        total += l;
        let v = eig.eigenvectors.column(k);
        out += v * v.adjoint() * C64::from(l);
    }
    if total <= 0.0 {
        return DensityMatrix::maximally_mixed(n);
    }
    out /= C64::from(total);
    let out = (&out + out.adjoint()) * C64::from(0.5);
    DensityMatrix::new(out).expect("clipped spectrum is a valid state")
}

/// `⟨φ|ρ|φ⟩` of a reconstructed state.
pub fn state_fidelity(rho: &DensityMatrix, ideal: &Ket) -> Result<f64, TomoError> {
    Ok(qcore::fidelity_pure(rho, ideal)?)
}

/// Complex matrix as rows of `[re, im]` pairs.
pub fn matrix_to_pairs(m: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_pairs(rows: &[Vec<[f64; 2]>]) -> DMatrix<C64> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(n, m, |i, j| C64::new(rows[i][j][0], rows[i][j][1]))
}

//! Exact small-dimension linear algebra for polarization qubits.
//!
//! Everything here works in the fixed computational basis `{H, V}` for one
//! photon and `{HH, HV, VH, VV}` for two (left factor is the slow index).
//! Values are immutable once built and every constructor validates its
//! physical invariants: kets are normalized, density matrices are Hermitian,
//! unit trace and positive semidefinite.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

/// Elementwise tolerance for normalization, Hermiticity, trace and unitarity.
pub const EXACT_TOL: f64 = 1e-12;
/// Most negative eigenvalue tolerated in a density matrix.
pub const PSD_TOL: f64 = 1e-9;
/// Bell projections less likely than this carry no post-measurement state.
pub const MIN_PROJECTION_PROB: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("ket is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace is not 1 (got {0})")]
    BadTrace(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("operator is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("unknown polarization label {0:?}")]
    UnknownLabel(String),
}

pub type Result<T> = std::result::Result<T, QError>;

#[inline]
fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Polarization states used as inputs and analysis bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolarizationLabel {
    H,
    V,
    P,
    M,
    R,
    L,
}

impl PolarizationLabel {
    pub const ALL: [PolarizationLabel; 6] = [
        PolarizationLabel::H,
        PolarizationLabel::V,
        PolarizationLabel::P,
        PolarizationLabel::M,
        PolarizationLabel::R,
        PolarizationLabel::L,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolarizationLabel::H => "H",
            PolarizationLabel::V => "V",
            PolarizationLabel::P => "P",
            PolarizationLabel::M => "M",
            PolarizationLabel::R => "R",
            PolarizationLabel::L => "L",
        }
    }

    pub fn ket(self) -> Ket {
        standard_ket(self)
    }
}

impl fmt::Display for PolarizationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolarizationLabel {
    type Err = QError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" => Ok(PolarizationLabel::H),
            "V" | "v" => Ok(PolarizationLabel::V),
            "P" | "p" => Ok(PolarizationLabel::P),
            "M" | "m" => Ok(PolarizationLabel::M),
            "R" | "r" => Ok(PolarizationLabel::R),
            "L" | "l" => Ok(PolarizationLabel::L),
            other => Err(QError::UnknownLabel(other.to_string())),
        }
    }
}

/// The four maximally entangled two-photon states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BellState {
    PsiMinus,
    PsiPlus,
    PhiMinus,
    PhiPlus,
}

impl BellState {
    pub const ALL: [BellState; 4] = [
        BellState::PsiMinus,
        BellState::PsiPlus,
        BellState::PhiMinus,
        BellState::PhiPlus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BellState::PsiMinus => "psi-minus",
            BellState::PsiPlus => "psi-plus",
            BellState::PhiMinus => "phi-minus",
            BellState::PhiPlus => "phi-plus",
        }
    }
}

impl fmt::Display for BellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BellState {
    type Err = QError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "psi-minus" | "PsiMinus" => Ok(BellState::PsiMinus),
            "psi-plus" | "PsiPlus" => Ok(BellState::PsiPlus),
            "phi-minus" | "PhiMinus" => Ok(BellState::PhiMinus),
            "phi-plus" | "PhiPlus" => Ok(BellState::PhiPlus),
            other => Err(QError::UnknownLabel(other.to_string())),
        }
    }
}

/// A normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amps: DVector<C64>,
}

impl Ket {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let amps = DVector::from_vec(amplitudes);
        let norm2 = amps.norm_squared();
        if (norm2 - 1.0).abs() > EXACT_TOL {
            return Err(QError::NotNormalized(norm2));
        }
        Ok(Ket { amps })
    }

    /// Builds a ket from arbitrary nonzero amplitudes by normalizing them.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(QError::NotNormalized(n * n));
        }
        Ket::new((v / C64::from(n)).iter().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub(crate) fn vector(&self) -> &DVector<C64> {
        &self.amps
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix {
            m: &self.amps * self.amps.adjoint(),
        }
    }
}

/// Normalized single-photon polarization ket, with |R⟩ = (|H⟩+i|V⟩)/√2 and
/// |L⟩ = (|H⟩−i|V⟩)/√2.
pub fn standard_ket(label: PolarizationLabel) -> Ket {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match label {
        PolarizationLabel::H => [c(1.0, 0.0), c(0.0, 0.0)],
        PolarizationLabel::V => [c(0.0, 0.0), c(1.0, 0.0)],
        PolarizationLabel::P => [c(s, 0.0), c(s, 0.0)],
        PolarizationLabel::M => [c(s, 0.0), c(-s, 0.0)],
        PolarizationLabel::R => [c(s, 0.0), c(0.0, s)],
        PolarizationLabel::L => [c(s, 0.0), c(0.0, -s)],
    };
    Ket {
        amps: DVector::from_column_slice(&amps),
    }
}

/// Bell ket in the ordered basis {HH, HV, VH, VV}.
pub fn bell_ket(b: BellState) -> Ket {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    let amps = match b {
        BellState::PsiMinus => [z, c(s, 0.0), c(-s, 0.0), z],
        BellState::PsiPlus => [z, c(s, 0.0), c(s, 0.0), z],
        BellState::PhiMinus => [c(s, 0.0), z, z, c(-s, 0.0)],
        BellState::PhiPlus => [c(s, 0.0), z, z, c(s, 0.0)],
    };
    Ket {
        amps: DVector::from_column_slice(&amps),
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(QError::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// A physical mixed state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(QError::NotSquare(m.nrows(), m.ncols()));
        }
        let dev = hermitian_deviation(&m);
        if dev > EXACT_TOL {
            return Err(QError::NotHermitian(dev));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > EXACT_TOL || tr.im.abs() > EXACT_TOL {
            return Err(QError::BadTrace(tr.re));
        }
        let min_ev = hermitian_eigenvalues(&m)[0];
        if min_ev < -PSD_TOL {
            return Err(QError::NotPsd(min_ev));
        }
        Ok(DensityMatrix { m })
    }

    /// Builds from a row-major list of entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(QError::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        DensityMatrix::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_ket(k: &Ket) -> Self {
        k.projector()
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            m: DMatrix::identity(dim, dim) * C64::from(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.m)
    }

    /// ⟨k|ρ|k⟩ for a ket of matching dimension.
    pub fn expectation(&self, k: &Ket) -> Result<f64> {
        check_dim(self.dim(), k.dim())?;
        let v = k.vector();
        Ok((v.adjoint() * &self.m * v)[(0, 0)].re)
    }

    /// Convex combination `(1 - w)·self + w·other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
        check_dim(self.dim(), other.dim())?;
        let w = w.clamp(0.0, 1.0);
        Ok(DensityMatrix {
            m: &self.m * C64::from(1.0 - w) + &other.m * C64::from(w),
        })
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        let diff = &self.m - &other.m;
        Ok(0.5 * hermitian_eigenvalues(&diff).iter().map(|e| e.abs()).sum::<f64>())
    }

    /// Wraps a matrix that the caller has built from valid states by
    /// operations known to preserve the invariants; checked in debug builds.
    pub(crate) fn from_trusted(m: DMatrix<C64>) -> Self {
        debug_assert!(DensityMatrix::new(m.clone()).is_ok(), "invalid state {m}");
        DensityMatrix { m }
    }
}

/// A linear operator; `is_unitary` is established once, on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
    unitary: bool,
}

impl Operator {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(QError::NotSquare(m.nrows(), m.ncols()));
        }
        let unitary = unitarity_deviation(&m) <= EXACT_TOL;
        Ok(Operator { m, unitary })
    }

    /// Like [`Operator::new`] but rejects non-unitary matrices.
    pub fn unitary(m: DMatrix<C64>) -> Result<Self> {
        let dev = unitarity_deviation(&m);
        let op = Operator::new(m)?;
        if !op.unitary {
            return Err(QError::NotUnitary(dev));
        }
        Ok(op)
    }

    pub fn identity(dim: usize) -> Self {
        Operator {
            m: DMatrix::identity(dim, dim),
            unitary: true,
        }
    }

    /// Pauli matrix σ_i with σ₀ the identity, then x, y, z.
    pub fn pauli(index: usize) -> Self {
        let o = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        let e = match index {
            0 => [one, o, o, one],
            1 => [o, one, one, o],
            2 => [o, -i, i, o],
            3 => [one, o, o, -one],
            _ => panic!("Pauli index {index} out of range"),
        };
        Operator {
            m: DMatrix::from_row_slice(2, 2, &e),
            unitary: true,
        }
    }

    pub fn sigma_x() -> Self {
        Operator::pauli(1)
    }

    pub fn sigma_y() -> Self {
        Operator::pauli(2)
    }

    pub fn sigma_z() -> Self {
        Operator::pauli(3)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            m: self.m.adjoint(),
            unitary: self.unitary,
        }
    }

    /// Operator product `self · rhs`.
    pub fn compose(&self, rhs: &Operator) -> Result<Operator> {
        check_dim(self.dim(), rhs.dim())?;
        Operator::new(&self.m * &rhs.m)
    }

    pub fn apply_ket(&self, k: &Ket) -> Result<Ket> {
        check_dim(self.dim(), k.dim())?;
        if !self.unitary {
            return Err(QError::NotUnitary(unitarity_deviation(&self.m)));
        }
        Ok(Ket {
            amps: &self.m * k.vector(),
        })
    }
}

fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let prod = m.adjoint() * m;
    let id = DMatrix::<C64>::identity(m.nrows(), m.ncols());
    (prod - id).iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Kronecker product with the left factor as the slow index.
pub trait Tensor: Sized {
    fn tensor(&self, rhs: &Self) -> Self;
}

impl Tensor for Ket {
    fn tensor(&self, rhs: &Self) -> Self {
        Ket {
            amps: self.amps.kronecker(&rhs.amps),
        }
    }
}

impl Tensor for DensityMatrix {
    fn tensor(&self, rhs: &Self) -> Self {
        DensityMatrix {
            m: self.m.kronecker(&rhs.m),
        }
    }
}

impl Tensor for Operator {
    fn tensor(&self, rhs: &Self) -> Self {
        Operator {
            m: self.m.kronecker(&rhs.m),
            unitary: self.unitary && rhs.unitary,
        }
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// UρU†
pub fn apply(u: &Operator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_dim(u.dim(), rho.dim())?;
    if !u.is_unitary() {
        return Err(QError::NotUnitary(unitarity_deviation(&u.m)));
    }
    Ok(DensityMatrix::from_trusted(&u.m * &rho.m * u.m.adjoint()))
}

/// ⟨φ|ρ|φ⟩, clamped into [0, 1] after the imaginary part is checked.
pub fn fidelity_pure(rho: &DensityMatrix, phi: &Ket) -> Result<f64> {
    check_dim(rho.dim(), phi.dim())?;
    let v = phi.vector();
    let z = (v.adjoint() * &rho.m * v)[(0, 0)];
    debug_assert!(z.im.abs() < 1e-12, "imaginary residue {}", z.im);
    Ok(z.re.clamp(0.0, 1.0))
}

/// Which factor of a two-qubit state survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix> {
    if rho.dim() != 4 {
        return Err(QError::UnsupportedDimension(rho.dim()));
    }
    let m = &rho.m;
    let mut out = DMatrix::<C64>::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = c(0.0, 0.0);
            for k in 0..2 {
                acc += match keep {
                    Subsystem::First => m[(2 * i + k, 2 * j + k)],
                    Subsystem::Second => m[(2 * k + i, 2 * k + j)],
                };
            }
            out[(i, j)] = acc;
        }
    }
    Ok(DensityMatrix::from_trusted(out))
}

/// Outcome of projecting photons 1 and 2 of a three-photon state onto a
/// Bell state.
#[derive(Debug, Clone, PartialEq)]
pub struct BellProjection {
    pub probability: f64,
    /// Normalized state of photon 3, absent when the projection has
    /// probability below [`MIN_PROJECTION_PROB`].
    pub post_state: Option<DensityMatrix>,
}

/// Projects photons 1,2 of an 8-dimensional state (ordering 1⊗2⊗3) onto `b`.
pub fn project_bell(rho: &DensityMatrix, b: BellState) -> Result<BellProjection> {
    if rho.dim() != 8 {
        return Err(QError::UnsupportedDimension(rho.dim()));
    }
    let bv = bell_ket(b);
    let bv = bv.amplitudes();
    let m = &rho.m;
    let mut red = DMatrix::<C64>::zeros(2, 2);
    for j in 0..2 {
        for k in 0..2 {
            let mut acc = c(0.0, 0.0);
            for (p, bp) in bv.iter().enumerate() {
                if *bp == c(0.0, 0.0) {
                    continue;
                }
                for (q, bq) in bv.iter().enumerate() {
                    acc += bp.conj() * m[(2 * p + j, 2 * q + k)] * bq;
                }
            }
            red[(j, k)] = acc;
        }
    }
    let probability = red.trace().re;
    if probability < MIN_PROJECTION_PROB {
        return Ok(BellProjection {
            probability: probability.max(0.0),
            post_state: None,
        });
    }
    let mut post = red / C64::from(probability);
    // symmetrize away rounding so the result passes the exact Hermitian check
    post = (&post + post.adjoint()) * C64::from(0.5);
    Ok(BellProjection {
        probability,
        post_state: Some(DensityMatrix::new(post)?),
    })
}

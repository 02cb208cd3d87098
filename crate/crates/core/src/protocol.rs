//! The teleportation protocol: input preparation, Bell-state measurement
//! outcomes, feed-forward corrections and the analytic noise model.
//!
//! Only Ψ⁻ and Ψ⁺ can be told apart by the linear-optics BSM; the Φ±
//! outcomes terminate a protocol instance.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::{
    self, bell_ket, BellState, DensityMatrix, Ket, Operator, PolarizationLabel, QError, Tensor, C64,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("Bell state {0} cannot be identified by the linear-optics BSM")]
    Unidentified(BellState),
    #[error("noise parameter {name} = {value} outside [0, 1]")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("unknown measurement basis {0:?}")]
    UnknownBasis(String),
    #[error(transparent)]
    State(#[from] QError),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// Teleportee amplitudes α|H⟩ + β|V⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputState {
    alpha: C64,
    beta: C64,
}

impl InputState {
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > qcore::EXACT_TOL {
            return Err(QError::NotNormalized(n).into());
        }
        Ok(InputState { alpha, beta })
    }

    pub fn from_label(label: PolarizationLabel) -> Self {
        let k = label.ket();
        InputState {
            alpha: k.amplitudes()[0],
            beta: k.amplitudes()[1],
        }
    }

    /// Uniformly random pure state on the Bloch sphere.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let theta = z.acos();
        InputState {
            alpha: C64::new((theta / 2.0).cos(), 0.0),
            beta: C64::from_polar((theta / 2.0).sin(), phi),
        }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn ket(&self) -> Ket {
        // normalization was validated on construction
        Ket::normalized(vec![self.alpha, self.beta]).expect("validated amplitudes")
    }
}

/// A BSM result; `identified` is derived from the Bell state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BsmOutcome {
    bell: BellState,
    identified: bool,
}

impl BsmOutcome {
    pub fn new(bell: BellState) -> Self {
        BsmOutcome {
            bell,
            identified: matches!(bell, BellState::PsiMinus | BellState::PsiPlus),
        }
    }

    pub fn bell(&self) -> BellState {
        self.bell
    }

    pub fn identified(&self) -> bool {
        self.identified
    }
}

impl From<BellState> for BsmOutcome {
    fn from(b: BellState) -> Self {
        BsmOutcome::new(b)
    }
}

/// What Bob does to photon 3 after hearing the BSM result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrectionOp {
    Identity,
    /// π phase shift between H and V, i.e. σ_z.
    PiPhaseShift,
}

impl CorrectionOp {
    pub fn operator(self) -> Operator {
        match self {
            CorrectionOp::Identity => Operator::identity(2),
            CorrectionOp::PiPhaseShift => Operator::sigma_z(),
        }
    }
}

pub fn correction_for(outcome: BsmOutcome) -> Result<CorrectionOp> {
    match outcome.bell() {
        BellState::PsiMinus => Ok(CorrectionOp::Identity),
        BellState::PsiPlus => Ok(CorrectionOp::PiPhaseShift),
        other => Err(ProtocolError::Unidentified(other)),
    }
}

/// Alice's single-photon detectors: trigger `t` and the four BSM outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AliceDetector {
    T,
    A,
    B,
    C,
    D,
}

impl AliceDetector {
    pub const BSM: [AliceDetector; 4] = [AliceDetector::A, AliceDetector::B, AliceDetector::C, AliceDetector::D];
}

pub type DetectorTriple = [AliceDetector; 3];

/// Three-fold detector patterns that herald an identified outcome.
pub fn detector_pattern(outcome: BsmOutcome) -> Result<[DetectorTriple; 2]> {
    use AliceDetector::*;
    match outcome.bell() {
        BellState::PsiMinus => Ok([[T, A, D], [T, B, C]]),
        BellState::PsiPlus => Ok([[T, A, B], [T, C, D]]),
        other => Err(ProtocolError::Unidentified(other)),
    }
}

/// Inverse of [`detector_pattern`] for an unordered pair of BSM detectors.
pub fn classify_pair(x: AliceDetector, y: AliceDetector) -> Option<BellState> {
    use AliceDetector::*;
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    match (lo, hi) {
        (A, D) | (B, C) => Some(BellState::PsiMinus),
        (A, B) | (C, D) => Some(BellState::PsiPlus),
        _ => None,
    }
}

/// Uniform draw over the four Bell states.
pub fn sample_bsm<R: Rng + ?Sized>(rng: &mut R) -> BsmOutcome {
    BsmOutcome::new(BellState::ALL[rng.random_range(0..4)])
}

/// Scalar summary of the physical imperfections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    /// Two-photon interference visibility at the BSM; scales H/V coherences.
    pub visibility: f64,
    /// White-noise admixture ρ → (1−p)ρ + p·I/2.
    pub depolarization: f64,
    /// Probability that a requested correction is actually applied.
    pub feedforward_applied_prob: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams::IDEAL
    }
}

impl NoiseParams {
    pub const IDEAL: NoiseParams = NoiseParams {
        visibility: 1.0,
        depolarization: 0.0,
        feedforward_applied_prob: 1.0,
    };

    pub fn new(visibility: f64, depolarization: f64, feedforward_applied_prob: f64) -> Result<Self> {
        let p = NoiseParams {
            visibility,
            depolarization,
            feedforward_applied_prob,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("visibility", self.visibility),
            ("depolarization", self.depolarization),
            ("feedforward_applied_prob", self.feedforward_applied_prob),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ProtocolError::ParameterOutOfRange { name, value });
            }
        }
        Ok(())
    }
}

/// Dephasing by `visibility` in the {H,V} basis followed by depolarization.
pub fn apply_bsm_noise(rho: &DensityMatrix, noise: &NoiseParams) -> Result<DensityMatrix> {
    if rho.dim() != 2 {
        return Err(QError::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        }
        .into());
    }
    let mut m = rho.matrix().clone();
    let v = C64::from(noise.visibility);
    m[(0, 1)] *= v;
    m[(1, 0)] *= v;
    let dephased = DensityMatrix::new(m)?;
    Ok(dephased.mix(&DensityMatrix::maximally_mixed(2), noise.depolarization)?)
}

/// Noisy photon-3 state after projecting photons 1 and 2 onto `bell`,
/// without any correction. Defined for all four Bell states.
pub fn conditional_state(input: &InputState, bell: BellState, noise: &NoiseParams) -> Result<DensityMatrix> {
    noise.validate()?;
    let three = input.ket().tensor(&bell_ket(BellState::PsiMinus)).projector();
    let projection = qcore::project_bell(&three, bell)?;
    let post = projection
        .post_state
        .expect("every Bell outcome occurs with probability 1/4");
    apply_bsm_noise(&post, noise)
}

/// Photon-3 state for one identified BSM outcome.
///
/// The conditional state comes from an exact Bell projection of
/// |φ⟩₁⊗|Ψ⁻⟩₂₃; then dephasing by `visibility`, depolarization, and (if
/// requested) the correction applied with probability
/// `feedforward_applied_prob`, in that order.
pub fn teleport_analytic(
    input: &InputState,
    outcome: BsmOutcome,
    apply_correction: bool,
    noise: &NoiseParams,
) -> Result<DensityMatrix> {
    noise.validate()?;
    let correction = correction_for(outcome)?;
    let mut rho = conditional_state(input, outcome.bell(), noise)?;

    if apply_correction {
        let corrected = qcore::apply(&correction.operator(), &rho)?;
        rho = rho.mix(&corrected, noise.feedforward_applied_prob)?;
    }
    Ok(rho)
}

/// The three polarization analysis bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MeasurementBasis {
    #[serde(rename = "HV")]
    HV,
    #[serde(rename = "PM")]
    PM,
    #[serde(rename = "RL")]
    RL,
}

impl MeasurementBasis {
    pub const ALL: [MeasurementBasis; 3] = [MeasurementBasis::HV, MeasurementBasis::PM, MeasurementBasis::RL];

    pub fn labels(self) -> (PolarizationLabel, PolarizationLabel) {
        use PolarizationLabel::*;
        match self {
            MeasurementBasis::HV => (H, V),
            MeasurementBasis::PM => (P, M),
            MeasurementBasis::RL => (R, L),
        }
    }

    /// The basis in which `label` is the first outcome, if any.
    pub fn eigenbasis_of(label: PolarizationLabel) -> (MeasurementBasis, bool) {
        use PolarizationLabel::*;
        match label {
            H => (MeasurementBasis::HV, true),
            V => (MeasurementBasis::HV, false),
            P => (MeasurementBasis::PM, true),
            M => (MeasurementBasis::PM, false),
            R => (MeasurementBasis::RL, true),
            L => (MeasurementBasis::RL, false),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MeasurementBasis::HV => "HV",
            MeasurementBasis::PM => "PM",
            MeasurementBasis::RL => "RL",
        }
    }

    /// Probability of the first outcome.
    pub fn first_probability(self, rho: &DensityMatrix) -> Result<f64> {
        Ok(rho.expectation(&self.labels().0.ket())?.clamp(0.0, 1.0))
    }
}

impl fmt::Display for MeasurementBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeasurementBasis {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('/', "").to_ascii_uppercase().as_str() {
            "HV" => Ok(MeasurementBasis::HV),
            "PM" => Ok(MeasurementBasis::PM),
            "RL" => Ok(MeasurementBasis::RL),
            _ => Err(ProtocolError::UnknownBasis(s.to_string())),
        }
    }
}

/// Result of a two-outcome polarization measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    First,
    Second,
}

pub fn measure_in_basis<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    basis: MeasurementBasis,
    rng: &mut R,
) -> Result<Outcome> {
    let p = basis.first_probability(rho)?;
    Ok(if rng.random::<f64>() < p {
        Outcome::First
    } else {
        Outcome::Second
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::fidelity_pure;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fid(rho: &DensityMatrix, label: PolarizationLabel) -> f64 {
        fidelity_pure(rho, &label.ket()).unwrap()
    }

    #[test]
    fn corrections() {
        assert_eq!(correction_for(BellState::PsiMinus.into()).unwrap(), CorrectionOp::Identity);
        assert_eq!(correction_for(BellState::PsiPlus.into()).unwrap(), CorrectionOp::PiPhaseShift);
        assert_eq!(
            correction_for(BellState::PhiPlus.into()),
            Err(ProtocolError::Unidentified(BellState::PhiPlus))
        );
        assert!(correction_for(BellState::PhiMinus.into()).is_err());
    }

    #[test]
    fn identified_flag_follows_bell_state() {
        for b in BellState::ALL {
            let o = BsmOutcome::new(b);
            assert_eq!(o.identified(), matches!(b, BellState::PsiMinus | BellState::PsiPlus));
        }
    }

    #[test]
    fn detector_patterns() {
        use AliceDetector::*;
        let minus = detector_pattern(BellState::PsiMinus.into()).unwrap();
        assert_eq!(minus, [[T, A, D], [T, B, C]]);
        let plus = detector_pattern(BellState::PsiPlus.into()).unwrap();
        assert_eq!(plus, [[T, A, B], [T, C, D]]);
        for m in &minus {
            assert!(!plus.contains(m));
        }
        assert!(detector_pattern(BellState::PhiMinus.into()).is_err());
        assert_eq!(classify_pair(D, A), Some(BellState::PsiMinus));
        assert_eq!(classify_pair(C, D), Some(BellState::PsiPlus));
        assert_eq!(classify_pair(A, C), None);
        assert_eq!(classify_pair(B, D), None);
    }

    #[test]
    fn sample_bsm_is_seed_deterministic() {
        let a: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(11);
            (0..64).map(|_| sample_bsm(&mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(11);
            (0..64).map(|_| sample_bsm(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_teleportation_examples() {
        let p = InputState::from_label(PolarizationLabel::P);
        let ideal = NoiseParams::IDEAL;
        let rho = teleport_analytic(&p, BellState::PsiMinus.into(), false, &ideal).unwrap();
        assert_abs_diff_eq!(fid(&rho, PolarizationLabel::P), 1.0, epsilon = 1e-12);
        let rho = teleport_analytic(&p, BellState::PsiPlus.into(), false, &ideal).unwrap();
        assert_abs_diff_eq!(fid(&rho, PolarizationLabel::P), 0.0, epsilon = 1e-12);
        let h = InputState::from_label(PolarizationLabel::H);
        let rho = teleport_analytic(&h, BellState::PsiPlus.into(), false, &ideal).unwrap();
        assert_abs_diff_eq!(fid(&rho, PolarizationLabel::H), 1.0, epsilon = 1e-12);
        assert!(teleport_analytic(&h, BellState::PhiPlus.into(), true, &ideal).is_err());
    }

    #[test]
    fn visibility_scales_coherence() {
        let p = InputState::from_label(PolarizationLabel::P);
        for &v in &[0.0, 0.3, 0.8, 0.95, 1.0] {
            let noise = NoiseParams::new(v, 0.0, 1.0).unwrap();
            let rho = teleport_analytic(&p, BellState::PsiMinus.into(), false, &noise).unwrap();
            assert_abs_diff_eq!(fid(&rho, PolarizationLabel::P), (1.0 + v) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn feedforward_failure_leaves_state_uncorrected() {
        let p = InputState::from_label(PolarizationLabel::P);
        let noise = NoiseParams::new(1.0, 0.0, 0.7).unwrap();
        let rho = teleport_analytic(&p, BellState::PsiPlus.into(), true, &noise).unwrap();
        assert_abs_diff_eq!(fid(&rho, PolarizationLabel::P), 0.7, epsilon = 1e-12);
    }

    #[test]
    fn noise_params_validated() {
        assert!(NoiseParams::new(1.1, 0.0, 1.0).is_err());
        assert!(NoiseParams::new(1.0, -0.1, 1.0).is_err());
        let bad = NoiseParams {
            visibility: 1.0,
            depolarization: 0.0,
            feedforward_applied_prob: 2.0,
        };
        let h = InputState::from_label(PolarizationLabel::H);
        assert!(matches!(
            teleport_analytic(&h, BellState::PsiMinus.into(), true, &bad),
            Err(ProtocolError::ParameterOutOfRange { .. })
        ));
    }

    #[test]
    fn measurement_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = PolarizationLabel::H.ket().projector();
        for _ in 0..1000 {
            assert_eq!(measure_in_basis(&h, MeasurementBasis::HV, &mut rng).unwrap(), Outcome::First);
        }
        let mixed = DensityMatrix::maximally_mixed(2);
        for basis in MeasurementBasis::ALL {
            let n = 100_000;
            let first = (0..n)
                .filter(|_| measure_in_basis(&mixed, basis, &mut rng).unwrap() == Outcome::First)
                .count();
            assert_abs_diff_eq!(first as f64 / n as f64, 0.5, epsilon = 0.005);
        }
        let r = InputState::from_label(PolarizationLabel::R);
        let rho = teleport_analytic(&r, BellState::PsiPlus.into(), true, &NoiseParams::IDEAL).unwrap();
        for _ in 0..1000 {
            assert_eq!(measure_in_basis(&rho, MeasurementBasis::RL, &mut rng).unwrap(), Outcome::First);
        }
    }

    #[test]
    fn basis_parsing() {
        assert_eq!("H/V".parse::<MeasurementBasis>().unwrap(), MeasurementBasis::HV);
        assert_eq!("rl".parse::<MeasurementBasis>().unwrap(), MeasurementBasis::RL);
        assert!("XY".parse::<MeasurementBasis>().is_err());
    }
}

//! Analytic process tomography from the four inputs H, V, P, L.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{matrix_from_pairs, matrix_to_pairs, project_psd, TomoError};
use crate::qcore::{DensityMatrix, Operator, PolarizationLabel, C64};

/// Input states of the process reconstruction, in solve order.
pub const PROCESS_INPUTS: [PolarizationLabel; 4] = [
    PolarizationLabel::H,
    PolarizationLabel::V,
    PolarizationLabel::P,
    PolarizationLabel::L,
];

/// χ in the Pauli basis σ₀..σ₃, `ρ_out = Σ χ_lk σ_l ρ_in σ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ChiJson", try_from = "ChiJson")]
pub struct ProcessMatrix {
    chi: DMatrix<C64>,
}

#[derive(Serialize, Deserialize)]
struct ChiJson {
    chi: Vec<Vec<[f64; 2]>>,
}

impl From<ProcessMatrix> for ChiJson {
    fn from(p: ProcessMatrix) -> Self {
        ChiJson {
            chi: matrix_to_pairs(&p.chi),
        }
    }
}

impl TryFrom<ChiJson> for ProcessMatrix {
    type Error = String;

    fn try_from(j: ChiJson) -> Result<Self, String> {
        if j.chi.len() != 4 || j.chi.iter().any(|r| r.len() != 4) {
            return Err("chi must be 4x4".into());
        }
        ProcessMatrix::new(matrix_from_pairs(&j.chi)).map_err(|e| e.to_string())
    }
}

impl ProcessMatrix {
    pub fn new(chi: DMatrix<C64>) -> Result<Self, TomoError> {
        if chi.shape() != (4, 4) || (&chi - chi.adjoint()).norm() > 1e-9 {
            return Err(TomoError::BadProcessMatrix);
        }
        Ok(ProcessMatrix { chi })
    }

    pub fn chi(&self) -> &DMatrix<C64> {
        &self.chi
    }

    pub fn entry(&self, l: usize, k: usize) -> C64 {
        self.chi[(l, k)]
    }

    pub fn trace(&self) -> f64 {
        self.chi.trace().re
    }

    /// Applies the channel described by χ to a qubit state.
    pub fn apply(&self, rho: &DensityMatrix) -> DMatrix<C64> {
        let s: Vec<_> = (0..4).map(|i| Operator::pauli(i).matrix().clone()).collect();
        let mut out = DMatrix::<C64>::zeros(2, 2);
        for l in 0..4 {
            for k in 0..4 {
                out += &s[l] * rho.matrix() * &s[k] * self.chi[(l, k)];
            }
        }
        out
    }
}

/// Solves `ρ_out = Σ χ_lk σ_l ρ_in σ_k` for χ.
///
/// `pairs` must hold each of H, V, P, L exactly once. With `cp_project` the
/// raw χ is clipped to the PSD cone and renormalized to unit trace.
pub fn process_from_states(
    pairs: &[(PolarizationLabel, DensityMatrix)],
    cp_project: bool,
) -> Result<ProcessMatrix, TomoError> {
    if pairs.len() != 4 {
        return Err(TomoError::WrongInputSet);
    }
    let mut outputs: [Option<&DensityMatrix>; 4] = [None; 4];
    for (label, rho) in pairs {
        let j = PROCESS_INPUTS
            .iter()
            .position(|l| l == label)
            .ok_or(TomoError::WrongInputSet)?;
        if outputs[j].is_some() {
            return Err(TomoError::WrongInputSet);
        }
        if rho.dim() != 2 {
            return Err(crate::qcore::QError::DimensionMismatch {
                expected: 2,
                found: rho.dim(),
            }
            .into());
        }
        outputs[j] = Some(rho);
    }
    let s: Vec<_> = (0..4).map(|i| Operator::pauli(i).matrix().clone()).collect();
    let mut m = DMatrix::<C64>::zeros(16, 16);
    let mut y = DMatrix::<C64>::zeros(16, 1);
    for (j, label) in PROCESS_INPUTS.iter().enumerate() {
        let rin = label.ket().projector();
        let out = outputs[j].expect("all four inputs present");
        for l in 0..4 {
            for k in 0..4 {
                let term = &s[l] * rin.matrix() * &s[k];
                for a in 0..2 {
                    for b in 0..2 {
                        m[(j * 4 + a * 2 + b, l * 4 + k)] = term[(a, b)];
                    }
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                y[(j * 4 + a * 2 + b, 0)] = out.entry(a, b);
            }
        }
    }
    let x = m.lu().solve(&y).ok_or(TomoError::Singular)?;
    let chi = DMatrix::from_fn(4, 4, |l, k| x[(l * 4 + k, 0)]);
    let chi = (&chi + chi.adjoint()) * C64::from(0.5);
    let chi = if cp_project {
        project_psd(&chi).matrix().clone()
    } else {
        chi
    };
    ProcessMatrix::new(chi)
}

/// `tr(χ_ideal χ) = Re χ₀₀` for the identity ideal.
pub fn process_fidelity(chi: &ProcessMatrix) -> f64 {
    chi.entry(0, 0).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::InputState;
    use crate::qcore::{apply, fidelity_pure};
    use crate::rng::{stream, Domain};

    /// Brute-force channel application on the four inputs.
    fn reconstruct<F: Fn(&DensityMatrix) -> DensityMatrix>(channel: F) -> ProcessMatrix {
        let pairs: Vec<_> = PROCESS_INPUTS
            .iter()
            .map(|&l| (l, channel(&l.ket().projector())))
            .collect();
        process_from_states(&pairs, false).unwrap()
    }

    fn unit(i: usize) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(4, 4);
        m[(i, i)] = C64::from(1.0);
        m
    }

    #[test]
    fn pauli_channels() {
        for i in 0..4 {
            let chi = reconstruct(|r| apply(&Operator::pauli(i), r).unwrap());
            assert!((chi.chi() - unit(i)).norm() < 1e-9, "sigma {i}");
        }
        assert_eq!(process_fidelity(&reconstruct(|r| r.clone())), 1.0);
    }

    #[test]
    fn depolarizing_channel() {
        for p in [0.1, 0.3, 0.5, 1.0] {
            let chi = reconstruct(|r| r.mix(&DensityMatrix::maximally_mixed(2), p).unwrap());
            let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                C64::from(1.0 - 0.75 * p),
                C64::from(p / 4.0),
                C64::from(p / 4.0),
                C64::from(p / 4.0),
            ]));
            assert!((chi.chi() - expected).norm() < 1e-9);
            assert!((process_fidelity(&chi) - (1.0 - 0.75 * p)).abs() < 1e-9);
        }
    }

    #[test]
    fn wrong_input_sets_rejected() {
        let h = PolarizationLabel::H.ket().projector();
        let three: Vec<_> = PROCESS_INPUTS[..3].iter().map(|&l| (l, h.clone())).collect();
        assert_eq!(process_from_states(&three, false), Err(TomoError::WrongInputSet));
        let mut bad = three.clone();
        bad.push((PolarizationLabel::R, h.clone()));
        assert_eq!(process_from_states(&bad, false), Err(TomoError::WrongInputSet));
        let mut dup = three;
        dup.push((PolarizationLabel::H, h));
        assert_eq!(process_from_states(&dup, false), Err(TomoError::WrongInputSet));
    }

    /// Amplitude damping followed by a small rotation: trace preserving, not unital.
    fn damped(r: &DensityMatrix) -> DensityMatrix {
        let g: f64 = 0.3;
        let k0 = DMatrix::from_row_slice(2, 2, &[C64::from(1.0), C64::from(0.0), C64::from(0.0), C64::from((1.0 - g).sqrt())]);
        let k1 = DMatrix::from_row_slice(2, 2, &[C64::from(0.0), C64::from(g.sqrt()), C64::from(0.0), C64::from(0.0)]);
        let th: f64 = 0.2;
        let u = DMatrix::from_row_slice(
            2,
            2,
            &[C64::from(th.cos()), C64::from(-th.sin()), C64::from(th.sin()), C64::from(th.cos())],
        );
        let m = r.matrix();
        let out = &k0 * m * k0.adjoint() + &k1 * m * k1.adjoint();
        let out = &u * out * u.adjoint();
        DensityMatrix::new((&out + out.adjoint()) * C64::from(0.5)).unwrap()
    }

    #[test]
    fn reconstructed_chi_reproduces_channel_and_haar_average() {
        let chi = reconstruct(damped);
        assert!((chi.trace() - 1.0).abs() < 1e-9);
        let mut rng = stream(3, Domain::Misc, 0);
        let n = 10_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let psi = InputState::random(&mut rng).ket();
            let rho = psi.projector();
            let out = chi.apply(&rho);
            let direct = damped(&rho);
            assert!((&out - direct.matrix()).norm() < 1e-9);
            acc += fidelity_pure(&direct, &psi).unwrap();
        }
        let avg = acc / n as f64;
        let haar = (2.0 * process_fidelity(&chi) + 1.0) / 3.0;
        assert!((avg - haar).abs() < 0.01, "{avg} vs {haar}");
    }

    #[test]
    fn cp_projection_flag() {
        let ident = reconstruct(|r| r.clone());
        let pairs: Vec<_> = PROCESS_INPUTS.iter().map(|&l| (l, l.ket().projector())).collect();
        assert_eq!(process_from_states(&pairs, true).unwrap(), ident);
        // the transpose map is positive but not completely positive
        let transpose: Vec<_> = PROCESS_INPUTS
            .iter()
            .map(|&l| {
                let t = l.ket().projector().matrix().transpose();
                (l, DensityMatrix::new(t).unwrap())
            })
            .collect();
        let raw = process_from_states(&transpose, false).unwrap();
        let cp = process_from_states(&transpose, true).unwrap();
        assert!(crate::qcore::hermitian_eigenvalues(raw.chi())[0] < -1e-3);
        assert!(crate::qcore::hermitian_eigenvalues(cp.chi())[0] >= -1e-12);
        assert!((cp.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let chi = reconstruct(damped);
        let s = serde_json::to_string(&chi).unwrap();
        let back: ProcessMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, chi);
    }
}

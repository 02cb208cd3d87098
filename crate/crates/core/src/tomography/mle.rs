//! Maximum-likelihood single-qubit tomography.
//!
//! The state is `ρ = T†T / tr(T†T)` with `T = [[t₀, 0], [t₂ + i t₃, t₁]]`,
//! so every parameter vector maps to a valid density matrix.

use nalgebra::DMatrix;

use super::{by_basis, linear_inversion, project_psd, CountRecord, TomoError};
use crate::protocol::MeasurementBasis;
use crate::qcore::{DensityMatrix, C64};

pub const MAX_ITERATIONS: usize = 10_000;
pub const RELATIVE_TOLERANCE: f64 = 1e-10;
/// Weight of `I/2` mixed into an initial point that gives some observed outcome zero probability.
const INIT_MIX: f64 = 1e-3;
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACK: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct TomoResult {
    pub rho: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Unnormalized `A = T†T`.
fn gram(t: &[f64; 4]) -> [[C64; 2]; 2] {
    let c = C64::new(t[2], t[3]);
    [
        [C64::from(t[0] * t[0] + t[2] * t[2] + t[3] * t[3]), c.conj() * t[1]],
        [c * t[1], C64::from(t[1] * t[1])],
    ]
}

/// `∂A/∂t_i`.
fn gram_derivative(t: &[f64; 4], i: usize) -> [[C64; 2]; 2] {
    let z = C64::from(0.0);
    let r = C64::from;
    match i {
        0 => [[r(2.0 * t[0]), z], [z, z]],
        1 => [[z, C64::new(t[2], -t[3])], [C64::new(t[2], t[3]), r(2.0 * t[1])]],
        2 => [[r(2.0 * t[2]), r(t[1])], [r(t[1]), z]],
        3 => [[r(2.0 * t[3]), C64::new(0.0, -t[1])], [C64::new(0.0, t[1]), z]],
        _ => unreachable!(),
    }
}

fn sandwich(k: &[C64], m: &[[C64; 2]; 2]) -> f64 {
    let mut acc = C64::from(0.0);
    for i in 0..2 {
        for j in 0..2 {
            acc += k[i].conj() * m[i][j] * k[j];
        }
    }
    acc.re
}

/// Both outcome kets of each basis. The second-outcome probability is
/// evaluated from its own projector, since `1 - p` loses precision near 1.
type OutcomeKets = [[Vec<C64>; 2]; 3];

fn outcome_kets() -> OutcomeKets {
    MeasurementBasis::ALL.map(|b| {
        let (first, second) = b.labels();
        [first.ket().amplitudes().to_vec(), second.ket().amplitudes().to_vec()]
    })
}

fn term(n: u64, p: f64) -> f64 {
    if n == 0 {
        0.0
    } else if p <= 0.0 {
        f64::NEG_INFINITY
    } else {
        n as f64 * p.ln()
    }
}

fn outcome_probabilities(t: &[f64; 4], kets: &OutcomeKets) -> [[f64; 2]; 3] {
    let a = gram(t);
    let tau: f64 = t.iter().map(|x| x * x).sum();
    [0, 1, 2].map(|b| [0, 1].map(|o| (sandwich(&kets[b][o], &a) / tau).clamp(0.0, 1.0)))
}

/// Multinomial log-likelihood `Σ n ln p` of the parameter vector.
///
/// Counts must contain each basis exactly once.
pub fn log_likelihood(t: &[f64; 4], counts: &[CountRecord]) -> Result<f64, TomoError> {
    let c = by_basis(counts)?;
    Ok(ll_ordered(t, &c, &outcome_kets()))
}

fn ll_ordered(t: &[f64; 4], c: &[CountRecord; 3], kets: &OutcomeKets) -> f64 {
    let p = outcome_probabilities(t, kets);
    (0..3)
        .map(|b| term(c[b].n_first, p[b][0]) + term(c[b].n_second, p[b][1]))
        .sum()
}

/// Analytic gradient of [`log_likelihood`].
pub fn gradient(t: &[f64; 4], counts: &[CountRecord]) -> Result<[f64; 4], TomoError> {
    let c = by_basis(counts)?;
    Ok(grad_ordered(t, &c, &outcome_kets()))
}

fn grad_ordered(t: &[f64; 4], c: &[CountRecord; 3], kets: &OutcomeKets) -> [f64; 4] {
    let a = gram(t);
    let tau: f64 = t.iter().map(|x| x * x).sum();
    let mut g = [0.0; 4];
    for b in 0..3 {
        for (o, n) in [c[b].n_first, c[b].n_second].into_iter().enumerate() {
            if n == 0 {
                continue;
            }
            let k = &kets[b][o];
            let p = sandwich(k, &a) / tau;
            for (i, gi) in g.iter_mut().enumerate() {
                let dp = (sandwich(k, &gram_derivative(t, i)) - p * 2.0 * t[i]) / tau;
                *gi += n as f64 / p * dp;
            }
        }
    }
    g
}

/// Parameter vector of a density matrix, via the Cholesky factor `ρ = T†T`.
pub fn params_of(rho: &DensityMatrix) -> [f64; 4] {
    let r11 = rho.entry(1, 1).re.max(0.0);
    let t1 = r11.sqrt();
    let c = if t1 > 0.0 { rho.entry(0, 1).conj() / t1 } else { C64::from(0.0) };
    let t0 = (rho.entry(0, 0).re - c.norm_sqr()).max(0.0).sqrt();
    [t0, t1, c.re, c.im]
}

/// Density matrix of a parameter vector.
pub fn rho_of(t: &[f64; 4]) -> DensityMatrix {
    let a = gram(t);
    let tau: f64 = t.iter().map(|x| x * x).sum();
    let m = DMatrix::from_fn(2, 2, |i, j| a[i][j] / tau);
    let m = (&m + m.adjoint()) * C64::from(0.5);
    DensityMatrix::new(m).expect("T†T is positive semidefinite")
}

fn normalize(t: &mut [f64; 4]) {
    let n = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    t.iter_mut().for_each(|x| *x /= n);
}

/// Starting point: PSD projection of the linear inversion, mixed slightly
/// toward `I/2` if it assigns zero probability to an observed outcome.
pub fn initial_params(counts: &[CountRecord]) -> Result<[f64; 4], TomoError> {
    let rho = project_psd(&linear_inversion(counts)?);
    let mut t = params_of(&rho);
    if !log_likelihood(&t, counts)?.is_finite() {
        let mixed = rho.mix(&DensityMatrix::maximally_mixed(2), INIT_MIX)?;
        t = params_of(&mixed);
    }
    normalize(&mut t);
    Ok(t)
}

/// Gradient ascent with Armijo backtracking.
///
/// Stops once an accepted step changes the log-likelihood by less than
/// [`RELATIVE_TOLERANCE`] relative, or when no ascent step exists at machine
/// precision. Hitting [`MAX_ITERATIONS`] returns `converged = false`.
pub fn mle_reconstruct(counts: &[CountRecord]) -> Result<TomoResult, TomoError> {
    let c = by_basis(counts)?;
    let kets = outcome_kets();
    let mut t = initial_params(counts)?;
    let mut ll = ll_ordered(&t, &c, &kets);
    let total: f64 = c.iter().map(|r| r.total() as f64).sum();
    let mut step = 1.0 / total;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let g = grad_ordered(&t, &c, &kets);
        let g2: f64 = g.iter().map(|x| x * x).sum();
        if g2 == 0.0 {
            converged = true;
            break;
        }
        step *= 2.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK {
            let mut trial = [0.0; 4];
            for i in 0..4 {
                trial[i] = t[i] + step * g[i];
            }
            normalize(&mut trial);
            let l = ll_ordered(&trial, &c, &kets);
            if l.is_finite() && l >= ll + ARMIJO_C * step * g2 {
                accepted = Some((trial, l));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, l)) = accepted else {
            converged = true;
            break;
        };
        let rel = (l - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        t = trial;
        ll = l;
        if rel < RELATIVE_TOLERANCE {
            converged = true;
            break;
        }
    }
    Ok(TomoResult {
        rho: rho_of(&t),
        log_likelihood: ll,
        iterations,
        converged,
    })
}

//! Event-level simulation of the two-station experiment.
//!
//! Pump pulses sit on an exact picosecond grid. Each pulse belongs to one
//! pair-number class per source combination; only classes that can leave
//! a trace in the recorded data are generated, by geometric skipping over
//! pulses with the largest possible per-pulse probability and thinning by
//! the time-dependent link transmission. Photon-3 polarization outcomes are
//! drawn from the analytic post-states of [`crate::protocol`].

pub mod attenuation;
pub mod config;
pub mod tags;

use std::io::{self, Write};

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{self, AliceDetector, BsmOutcome, InputState, ProtocolError};
use crate::qcore::{fidelity_pure, BellState, DensityMatrix};
use crate::rng::{stream, Domain};
use crate::timesync::ClockTrajectory;

pub use attenuation::LossTrajectory;
pub use config::{ConfigError, LossFluctuation, LossModel, SimConfig, TruthDetail};
pub use tags::{decode_ttag, read_ttag, write_ttag, Channel, Station, TimeTag, TtagError};

/// Pulses handled by one work unit (and one random stream).
pub const BLOCK_PULSES: u64 = 1 << 24;
/// True time of pump pulse 0.
pub const START_PS: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Pair-number class of a pump pulse: (EPR pairs, HSP pairs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventClass {
    /// (1, 1): the teleportation event proper.
    Teleport,
    /// (1, 0)
    EprSingle,
    /// (0, 1)
    HspSingle,
    /// (2, 0)
    EprDouble,
    /// (0, 2)
    HspDouble,
    /// (2, 1)
    EprDoubleHsp,
    /// (1, 2)
    EprHspDouble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Photon3Fate {
    Transmitted,
    Lost,
}

/// Hidden per-event history used as a test oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub pulse_index: u64,
    pub kind: EventClass,
    pub bsm_outcome: Option<BsmOutcome>,
    /// Alice wrote a three-fold (or sync) record for this pulse.
    pub alice_recorded: bool,
    pub alice_channels: Vec<Channel>,
    /// Trigger (or sync) tag time at Alice.
    pub alice_time_ps: Option<u64>,
    pub photon3_fate: Option<Photon3Fate>,
    pub bob_channel: Option<Channel>,
    /// Bob-local detection time of photon 3.
    pub bob_time_ps: Option<u64>,
    pub ff_received: bool,
    pub correction_applied: bool,
    /// ⟨φ|ρ₃|φ⟩ of the photon-3 state the outcome was drawn from.
    pub ideal_output_fidelity: Option<f64>,
    /// Bob clock offset at the pulse time.
    pub clock_offset_ps: f64,
}

impl TruthRecord {
    /// Identified teleportation event seen by both stations.
    pub fn is_fourfold(&self) -> bool {
        self.kind == EventClass::Teleport
            && self.alice_recorded
            && self.photon3_fate == Some(Photon3Fate::Transmitted)
            && self.bsm_outcome.is_some_and(|o| o.identified())
    }
}

pub struct SimOutput {
    pub alice: Vec<TimeTag>,
    pub bob: Vec<TimeTag>,
    pub truth: Vec<TruthRecord>,
    pub clock: ClockTrajectory,
    pub loss: LossTrajectory,
}

#[derive(Debug, Clone, Copy)]
struct ClassSpec {
    class: EventClass,
    /// Probability that Alice writes a record, independent of the link.
    alice_prob: f64,
    n_photon3: i32,
    /// Per-pulse candidate probability at the lowest loss.
    candidate_prob: f64,
    lambda_max: f64,
}

#[derive(Debug, Clone, Copy)]
struct Branch {
    p_first: f64,
    fidelity: f64,
}

/// Photon-3 measurement statistics for each Bell outcome.
#[derive(Debug, Clone, Copy)]
struct StateTable {
    psi_minus: Branch,
    psi_plus: Branch,
    psi_plus_corrected: Branch,
    phi_minus: Branch,
    phi_plus: Branch,
}

impl StateTable {
    fn new(cfg: &SimConfig) -> Result<Self, SimError> {
        let input = InputState::from_label(cfg.input_label);
        let ideal = input.ket();
        let branch = |rho: DensityMatrix| -> Result<Branch, SimError> {
            Ok(Branch {
                p_first: cfg.analysis_basis.first_probability(&rho)?,
                fidelity: fidelity_pure(&rho, &ideal).map_err(ProtocolError::from)?,
            })
        };
        let psi_plus = BsmOutcome::new(BellState::PsiPlus);
        Ok(StateTable {
            psi_minus: branch(protocol::conditional_state(&input, BellState::PsiMinus, &cfg.noise)?)?,
            psi_plus: branch(protocol::teleport_analytic(&input, psi_plus, false, &cfg.noise)?)?,
            psi_plus_corrected: branch(protocol::teleport_analytic(&input, psi_plus, true, &cfg.noise)?)?,
            phi_minus: branch(protocol::conditional_state(&input, BellState::PhiMinus, &cfg.noise)?)?,
            phi_plus: branch(protocol::conditional_state(&input, BellState::PhiPlus, &cfg.noise)?)?,
        })
    }

    fn get(&self, bell: BellState, corrected: bool) -> Branch {
        match bell {
            BellState::PsiMinus => self.psi_minus,
            BellState::PsiPlus if corrected => self.psi_plus_corrected,
            BellState::PsiPlus => self.psi_plus,
            BellState::PhiMinus => self.phi_minus,
            BellState::PhiPlus => self.phi_plus,
        }
    }
}

/// Probability that `n` photons, each detected with `eta` and routed
/// uniformly to one of the four BSM detectors, click at least two distinct
/// detectors.
pub fn bsm_click_prob(n: u32, eta: f64) -> f64 {
    let outcomes = 5usize.pow(n);
    let mut total = 0.0;
    for code in 0..outcomes {
        let mut c = code;
        let mut mask = 0u8;
        let mut w = 1.0;
        for _ in 0..n {
            let d = c % 5;
            c /= 5;
            if d == 4 {
                w *= 1.0 - eta;
            } else {
                w *= eta / 4.0;
                mask |= 1 << d;
            }
        }
        if mask.count_ones() >= 2 {
            total += w;
        }
    }
    total
}

/// Samples the clicked BSM detectors conditioned on at least two distinct clicks.
fn sample_bsm_clicks<R: Rng + ?Sized>(n: u32, eta: f64, rng: &mut R) -> Vec<AliceDetector> {
    loop {
        let mut mask = 0u8;
        for _ in 0..n {
            if rng.random::<f64>() < eta {
                mask |= 1 << rng.random_range(0..4);
            }
        }
        if mask.count_ones() >= 2 {
            return (0..4)
                .filter(|d| mask & (1 << d) != 0)
                .map(|d| AliceDetector::BSM[d])
                .collect();
        }
    }
}

struct Ctx<'a> {
    cfg: &'a SimConfig,
    period: u64,
    n_pulses: u64,
    eta: f64,
    loss: LossTrajectory,
    clock: ClockTrajectory,
    classes: Vec<ClassSpec>,
    states: StateTable,
    jitter: Normal<f64>,
    window_ps: i64,
    latency3_ps: i64,
    ff_arrival_ps: i64,
    gate_delay_ps: i64,
    gate_half_ps: i64,
    teleport_triple_prob: f64,
}

#[derive(Default)]
struct BlockOut {
    alice: Vec<TimeTag>,
    bob: Vec<TimeTag>,
    truth: Vec<TruthRecord>,
}

fn build_classes(cfg: &SimConfig, t_max: f64) -> Vec<ClassSpec> {
    let eta = cfg.detector_efficiency;
    let (pe, ph, p2) = (cfg.pair_prob_epr, cfg.pair_prob_hsp, cfg.double_pair_prob);
    let (e0, h0) = (1.0 - pe - p2, 1.0 - ph - p2);
    let sync = eta / 4.0 * cfg.sync_prescale;
    let trigger2 = 1.0 - (1.0 - eta).powi(2);
    let raw = [
        (EventClass::Teleport, pe * ph, eta.powi(3) / 2.0, 1),
        (EventClass::EprSingle, pe * h0, sync, 1),
        (EventClass::HspSingle, e0 * ph, sync, 0),
        (EventClass::EprDouble, p2 * h0, 0.0, 2),
        (EventClass::HspDouble, e0 * p2, trigger2 * bsm_click_prob(2, eta), 0),
        (EventClass::EprDoubleHsp, p2 * ph, eta * bsm_click_prob(3, eta), 2),
        (EventClass::EprHspDouble, pe * p2, trigger2 * bsm_click_prob(3, eta), 1),
    ];
    raw.into_iter()
        .map(|(class, pulse_prob, alice_prob, n_photon3)| {
            let b_max = 1.0 - (1.0 - t_max * eta).powi(n_photon3);
            let lambda_max = 1.0 - (1.0 - alice_prob) * (1.0 - b_max);
            ClassSpec {
                class,
                alice_prob,
                n_photon3,
                candidate_prob: (pulse_prob * lambda_max).min(1.0),
                lambda_max,
            }
        })
        .collect()
}

impl Ctx<'_> {
    fn jitter<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.jitter.sample(rng).round() as i64
    }

    /// Writes Alice's tags if the record spans at most the window.
    fn alice_record<R: Rng + ?Sized>(
        &self,
        t_pulse: i64,
        channels: &[Channel],
        rng: &mut R,
        out: &mut BlockOut,
    ) -> Option<u64> {
        let times: Vec<i64> = channels.iter().map(|_| (t_pulse + self.jitter(rng)).max(0)).collect();
        let lo = *times.iter().min().unwrap();
        let hi = *times.iter().max().unwrap();
        if channels.len() > 1 && hi - lo > self.window_ps {
            return None;
        }
        for (&c, &t) in channels.iter().zip(&times) {
            out.alice.push(TimeTag::new(c, t as u64));
        }
        Some(times[0] as u64)
    }

    fn bob_local(&self, true_ps: i64) -> u64 {
        self.clock.to_local(true_ps).max(0) as u64
    }

    fn candidate<R: Rng + ?Sized>(&self, spec: &ClassSpec, pulse: u64, rng: &mut R, out: &mut BlockOut) {
        let t_pulse = (START_PS + pulse * self.period) as i64;
        let trans = self.cfg.transmission(self.loss.loss_db(t_pulse as f64 * 1e-12));
        let p3 = trans * self.eta;
        let b = 1.0 - (1.0 - p3).powi(spec.n_photon3);
        let pa = spec.alice_prob;
        let lambda = 1.0 - (1.0 - pa) * (1.0 - b);
        if rng.random::<f64>() * spec.lambda_max >= lambda {
            return;
        }
        let u = rng.random::<f64>() * lambda;
        let (a_mark, b_mark) = if u < pa * b {
            (true, true)
        } else if u < pa {
            (true, false)
        } else {
            (false, true)
        };
        let n_detected = if !b_mark {
            0
        } else if spec.n_photon3 == 2 && rng.random::<f64>() * b < p3 * p3 {
            2
        } else {
            1
        };

        let mut rec = TruthRecord {
            pulse_index: pulse,
            kind: spec.class,
            bsm_outcome: None,
            alice_recorded: false,
            alice_channels: Vec::new(),
            alice_time_ps: None,
            photon3_fate: (spec.n_photon3 > 0).then_some(if b_mark {
                Photon3Fate::Transmitted
            } else {
                Photon3Fate::Lost
            }),
            bob_channel: None,
            bob_time_ps: None,
            ff_received: false,
            correction_applied: false,
            ideal_output_fidelity: None,
            clock_offset_ps: self.clock.offset_at(t_pulse),
        };

        // Alice side
        let mut bell = None;
        let mut ff_label = None;
        match spec.class {
            EventClass::EprSingle | EventClass::HspSingle => {
                if a_mark {
                    rec.alice_channels = vec![Channel::A];
                    rec.alice_time_ps = self.alice_record(t_pulse, &rec.alice_channels, rng, out);
                    rec.alice_recorded = true;
                }
            }
            EventClass::Teleport => {
                let b = if a_mark {
                    let b = if rng.random::<bool>() {
                        BellState::PsiMinus
                    } else {
                        BellState::PsiPlus
                    };
                    let patterns = protocol::detector_pattern(b.into()).expect("identified outcome");
                    let triple = patterns[rng.random_range(0..2)];
                    rec.alice_channels = triple.iter().map(|&d| Channel::from(d)).collect();
                    rec.alice_time_ps = self.alice_record(t_pulse, &rec.alice_channels, rng, out);
                    rec.alice_recorded = rec.alice_time_ps.is_some();
                    if rec.alice_recorded {
                        ff_label = Some(b);
                    }
                    b
                } else {
                    // outcome given that no identified three-fold was detected
                    let w_psi = 0.25 * (1.0 - self.teleport_triple_prob);
                    let u = rng.random::<f64>() * (2.0 * w_psi + 0.5);
                    if u < w_psi {
                        BellState::PsiMinus
                    } else if u < 2.0 * w_psi {
                        BellState::PsiPlus
                    } else if u < 2.0 * w_psi + 0.25 {
                        BellState::PhiMinus
                    } else {
                        BellState::PhiPlus
                    }
                };
                bell = Some(b);
                rec.bsm_outcome = Some(b.into());
            }
            EventClass::HspDouble | EventClass::EprDoubleHsp | EventClass::EprHspDouble => {
                if a_mark {
                    let n = if spec.class == EventClass::HspDouble { 2 } else { 3 };
                    let clicks = sample_bsm_clicks(n, self.eta, rng);
                    rec.alice_channels = std::iter::once(Channel::T)
                        .chain(clicks.iter().map(|&d| Channel::from(d)))
                        .collect();
                    rec.alice_time_ps = self.alice_record(t_pulse, &rec.alice_channels, rng, out);
                    rec.alice_recorded = rec.alice_time_ps.is_some();
                    if rec.alice_recorded && clicks.len() == 2 {
                        ff_label = protocol::classify_pair(clicks[0], clicks[1]);
                    }
                }
            }
            EventClass::EprDouble => {}
        }

        // feed-forward pulse
        let mut ff_local = None;
        if self.cfg.feedforward_enabled
            && ff_label == Some(BellState::PsiPlus)
            && rng.random::<f64>() < self.cfg.classical_link_efficiency
        {
            let t = self.bob_local(t_pulse + self.ff_arrival_ps + self.jitter(rng));
            out.bob.push(TimeTag::new(Channel::Ff, t));
            ff_local = Some(t as i64);
            rec.ff_received = true;
        }

        // Bob side
        for _ in 0..n_detected {
            let local = self.bob_local(t_pulse + self.latency3_ps + self.jitter(rng));
            let in_gate = ff_local
                .is_some_and(|ff| (local as i64 - (ff + self.gate_delay_ps)).abs() <= self.gate_half_ps);
            let p_first = match bell {
                Some(b) => {
                    let branch = self.states.get(b, in_gate);
                    rec.correction_applied = in_gate && b == BellState::PsiPlus;
                    rec.ideal_output_fidelity = Some(branch.fidelity);
                    branch.p_first
                }
                None => 0.5,
            };
            let ch = if rng.random::<f64>() < p_first {
                Channel::E
            } else {
                Channel::F
            };
            out.bob.push(TimeTag::new(ch, local));
            if rec.bob_time_ps.is_none() {
                rec.bob_channel = Some(ch);
                rec.bob_time_ps = Some(local);
            }
        }

        let keep = match self.cfg.truth_detail {
            TruthDetail::All => true,
            TruthDetail::Heralded => {
                spec.class == EventClass::Teleport || (rec.alice_recorded && rec.alice_channels.len() > 1)
            }
        };
        if keep {
            out.truth.push(rec);
        }
    }

    fn block(&self, block: u64) -> BlockOut {
        let seed = self.cfg.seed;
        let first = block * BLOCK_PULSES;
        let len = BLOCK_PULSES.min(self.n_pulses - first);
        let mut out = BlockOut::default();
        let mut rng = stream(seed, Domain::PulseBlock, block);
        // One candidate process over all classes, so a pulse never holds
        // more than one pair-number class.
        let weights: Vec<f64> = self.classes.iter().map(|c| c.candidate_prob).collect();
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            let geo = Geometric::new(total.min(1.0)).expect("probability in (0, 1]");
            let pick = WeightedIndex::new(&weights).expect("positive total weight");
            let mut pos = 0u64;
            loop {
                pos = pos.saturating_add(geo.sample(&mut rng));
                if pos >= len {
                    break;
                }
                let spec = &self.classes[pick.sample(&mut rng)];
                self.candidate(spec, first + pos, &mut rng, &mut out);
                pos += 1;
            }
        }

        // Bob dark and background counts, Poisson in local time
        let rate = self.cfg.bob_noise_rate_hz();
        if rate > 0.0 {
            let exp = Exp::new(rate * 1e-12).expect("positive rate");
            let t0 = (START_PS + first * self.period) as f64;
            let t1 = (START_PS + (first + len) * self.period) as f64;
            for (k, ch) in [Channel::E, Channel::F].into_iter().enumerate() {
                let mut rng = stream(seed, Domain::Background, 2 * block + k as u64);
                let mut t = t0;
                loop {
                    t += exp.sample(&mut rng);
                    if t >= t1 {
                        break;
                    }
                    out.bob.push(TimeTag::new(ch, t as u64));
                }
            }
        }
        out
    }
}

/// Runs the simulation on the current rayon pool. The result does not
/// depend on the number of threads.
pub fn run_sim(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let duration = cfg.duration_s + START_PS as f64 * 1e-12;
    let loss = LossTrajectory::generate(
        cfg.quantum_link_loss_db,
        &cfg.loss_fluctuation,
        duration + 1.0,
        &mut stream(cfg.seed, Domain::Attenuation, 0),
    );
    let clock = cfg
        .clock
        .trajectory(duration + 1.0, &mut stream(cfg.seed, Domain::Clock, 0));
    let t_max = cfg.transmission(loss.min_loss_db());
    let eta = cfg.detector_efficiency;
    let ctx = Ctx {
        cfg,
        period: cfg.pulse_period_ps(),
        n_pulses: cfg.n_pulses(),
        eta,
        classes: build_classes(cfg, t_max),
        states: StateTable::new(cfg)?,
        jitter: Normal::new(0.0, cfg.jitter_sigma_ps).expect("non-negative sigma"),
        window_ps: (cfg.coincidence_window_ns * 1e3).round() as i64,
        latency3_ps: cfg.photon3_latency_ps(),
        ff_arrival_ps: cfg.feedforward_arrival_ps(),
        gate_delay_ps: cfg.eom_gate_delay_ps(),
        gate_half_ps: (cfg.eom_gate_width_ns * 1e3 / 2.0).round() as i64,
        teleport_triple_prob: eta.powi(3),
        loss,
        clock,
    };
    let n_blocks = ctx.n_pulses.div_ceil(BLOCK_PULSES);
    let blocks: Vec<BlockOut> = (0..n_blocks).into_par_iter().map(|b| ctx.block(b)).collect();

    let mut alice = Vec::with_capacity(blocks.iter().map(|b| b.alice.len()).sum());
    let mut bob = Vec::with_capacity(blocks.iter().map(|b| b.bob.len()).sum());
    let mut truth = Vec::new();
    for b in blocks {
        alice.extend(b.alice);
        bob.extend(b.bob);
        truth.extend(b.truth);
    }
    alice.par_sort_unstable_by_key(TimeTag::sort_key);
    bob.par_sort_unstable_by_key(TimeTag::sort_key);
    truth.par_sort_by_key(|r| (r.pulse_index, r.kind));
    Ok(SimOutput {
        alice,
        bob,
        truth,
        clock: ctx.clock,
        loss: ctx.loss,
    })
}

/// Closed-form rate of identified four-folds (Ψ⁻ and Ψ⁺) per second of
/// simulated time: pulse rate × both pair probabilities × 1/2 × mean link
/// transmission × four detector efficiencies.
pub fn expected_fourfold_rate(cfg: &SimConfig) -> f64 {
    let mean_t = attenuation::stationary_mean(cfg.quantum_link_loss_db, &cfg.loss_fluctuation, |x| {
        cfg.transmission(x)
    });
    cfg.pump_rep_rate_hz * cfg.pair_prob_epr * cfg.pair_prob_hsp * 0.5 * mean_t * cfg.detector_efficiency.powi(4)
}

pub fn write_truth_jsonl<W: Write>(mut w: W, truth: &[TruthRecord]) -> io::Result<()> {
    for r in truth {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_truth_jsonl(text: &str) -> Result<Vec<TruthRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

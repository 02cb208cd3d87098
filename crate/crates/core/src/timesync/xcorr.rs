//! Entanglement-assisted clock synchronization.
//!
//! Correlated two-fold detections (one photon of a pair at each station)
//! show up as a peak in the histogram of Bob−Alice time differences; the
//! peak position is the clock offset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{is_sorted, SyncError};

/// Cross-correlation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncParams {
    pub bin_ps: i64,
    /// Half-width of the searched offset range around the prior.
    pub search_range_ps: i64,
    /// Coarse (GPS) offset estimate the search is centred on.
    pub prior_offset_ps: i64,
    /// Expected Alice→Bob latency subtracted before histogramming.
    pub latency_ps: i64,
    /// Peak must exceed off-peak mean by this many standard deviations.
    pub threshold_sigma: f64,
    /// Minimum raw count in the peak bin.
    pub min_peak_counts: u64,
}

impl Default for SyncParams {
    fn default() -> Self {
        SyncParams {
            bin_ps: 1000,
            search_range_ps: 1_000_000,
            prior_offset_ps: 0,
            latency_ps: 0,
            threshold_sigma: 5.0,
            min_peak_counts: 10,
        }
    }
}

/// One synchronization result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncEstimate {
    pub epoch_start_s: f64,
    pub offset_ps: i64,
    /// Peak height over the off-peak mean (mean floored at one count).
    pub peak_significance: f64,
    pub peak_counts: u64,
}

/// Bins excluded around the maximum when estimating the background.
const PEAK_GUARD_BINS: usize = 3;

/// Histogram of `bob - alice - latency - prior` over the search range.
pub fn difference_histogram(alice: &[i64], bob: &[i64], params: &SyncParams) -> Vec<u64> {
    let bin = params.bin_ps.max(1);
    let half_bins = params.search_range_ps / bin;
    let nbins = (2 * half_bins + 1) as usize;
    let mut hist = vec![0u64; nbins];
    let shift = params.latency_ps + params.prior_offset_ps;
    let reach = half_bins * bin + bin / 2;
    let mut lo = 0usize;
    for &a in alice {
        let centre = a + shift;
        while lo < bob.len() && bob[lo] < centre - reach {
            lo += 1;
        }
        let mut j = lo;
        while j < bob.len() && bob[j] <= centre + reach {
            let d = bob[j] - centre;
            let idx = div_round(d, bin) + half_bins;
            if (0..nbins as i64).contains(&idx) {
                hist[idx as usize] += 1;
            }
            j += 1;
        }
    }
    hist
}

fn div_round(x: i64, d: i64) -> i64 {
    let q = x.div_euclid(d);
    let r = x.rem_euclid(d);
    if 2 * r >= d {
        q + 1
    } else {
        q
    }
}

/// Estimates the Bob−Alice clock offset from two time-ordered streams.
pub fn cross_correlate(alice: &[i64], bob: &[i64], params: &SyncParams) -> Result<SyncEstimate, SyncError> {
    if alice.is_empty() || bob.is_empty() {
        return Err(SyncError::EmptyStream);
    }
    if params.bin_ps < 1 || params.search_range_ps < params.bin_ps {
        return Err(SyncError::BadParams("bin_ps must be ≥ 1 and ≤ search_range_ps".into()));
    }
    if !is_sorted(alice) || !is_sorted(bob) {
        return Err(SyncError::Unordered);
    }
    let hist = difference_histogram(alice, bob, params);
    let centre = hist.len() / 2;

    let max = *hist.iter().max().unwrap();
    // ties go to the bin closest to zero offset, then the lower index
    let peak = (0..hist.len())
        .filter(|&i| hist[i] == max)
        .min_by_key(|&i| (i.abs_diff(centre), i))
        .unwrap();

    let off: Vec<f64> = hist
        .iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(peak) > PEAK_GUARD_BINS)
        .map(|(_, &h)| h as f64)
        .collect();
    let n = off.len().max(1) as f64;
    let mean = off.iter().sum::<f64>() / n;
    let var = off.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    let significance = max as f64 / mean.max(1.0);

    if (max as f64) <= mean + params.threshold_sigma * sd || max < params.min_peak_counts {
        return Err(SyncError::NoPeak { significance });
    }

    let mut delta = 0.0;
    if peak > 0 && peak + 1 < hist.len() {
        let (ym, y0, yp) = (hist[peak - 1] as f64, hist[peak] as f64, hist[peak + 1] as f64);
        let denom = ym - 2.0 * y0 + yp;
        if denom < 0.0 {
            delta = (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5);
        }
    }
    let bins_from_centre = peak as f64 - centre as f64 + delta;
    let offset = params.prior_offset_ps as f64 + bins_from_centre * params.bin_ps as f64;
    Ok(SyncEstimate {
        epoch_start_s: alice[0] as f64 * 1e-12,
        offset_ps: offset.round() as i64,
        peak_significance: significance,
        peak_counts: max,
    })
}

/// Per-epoch outcome of [`sync_track`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSync {
    pub epoch_index: usize,
    pub epoch_start_s: f64,
    pub epoch_end_s: f64,
    /// The estimate used for the epoch (own or carried over).
    pub estimate: Option<SyncEstimate>,
    pub fallback: bool,
}

/// Piecewise-linear offset as a function of Alice time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetTrack {
    /// `(time_ps, offset_ps)` knots, strictly increasing in time.
    pub knots: Vec<(i64, f64)>,
    pub epochs: Vec<EpochSync>,
}

impl OffsetTrack {
    /// A single offset applied everywhere (GPS-only correction).
    pub fn constant(offset_ps: f64) -> Self {
        OffsetTrack {
            knots: vec![(0, offset_ps)],
            epochs: Vec::new(),
        }
    }

    pub fn offset_at(&self, t_ps: i64) -> f64 {
        let k = &self.knots;
        if t_ps <= k[0].0 {
            return k[0].1;
        }
        if t_ps >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let i = k.partition_point(|&(t, _)| t <= t_ps);
        let (t0, o0) = k[i - 1];
        let (t1, o1) = k[i];
        o0 + (o1 - o0) * (t_ps - t0) as f64 / (t1 - t0) as f64
    }
}

pub const MIN_RESYNC_S: f64 = 45.0;
pub const MAX_RESYNC_S: f64 = 180.0;
/// Consecutive failed epochs tolerated before giving up.
pub const MAX_CONSECUTIVE_FAILURES: usize = 3;

/// Re-synchronizes every `resync_interval_s` seconds of Alice time.
///
/// Failed epochs reuse the previous estimate (leading failures reuse the
/// first success); more than three consecutive failures is a hard error.
pub fn sync_track(
    alice: &[i64],
    bob: &[i64],
    resync_interval_s: f64,
    params: &SyncParams,
) -> Result<OffsetTrack, SyncError> {
    if !(MIN_RESYNC_S..=MAX_RESYNC_S).contains(&resync_interval_s) {
        return Err(SyncError::BadParams(format!(
            "resync interval {resync_interval_s} s outside [{MIN_RESYNC_S}, {MAX_RESYNC_S}]"
        )));
    }
    if alice.is_empty() || bob.is_empty() {
        return Err(SyncError::EmptyStream);
    }
    if !is_sorted(alice) || !is_sorted(bob) {
        return Err(SyncError::Unordered);
    }
    let interval = (resync_interval_s * 1e12) as i64;
    let start = alice[0];
    let end = alice[alice.len() - 1];
    let n_epochs = ((end - start) / interval + 1) as usize;
    let reach = params.latency_ps + params.prior_offset_ps;

    let results: Vec<(i64, i64, Result<SyncEstimate, SyncError>)> = (0..n_epochs)
        .into_par_iter()
        .map(|k| {
            let e0 = start + k as i64 * interval;
            let e1 = e0 + interval;
            let a_lo = alice.partition_point(|&t| t < e0);
            let a_hi = alice.partition_point(|&t| t < e1);
            let b_lo = bob.partition_point(|&t| t < e0 + reach - params.search_range_ps - params.bin_ps);
            let b_hi = bob.partition_point(|&t| t <= e1 + reach + params.search_range_ps + params.bin_ps);
            let est = cross_correlate(&alice[a_lo..a_hi], &bob[b_lo..b_hi], params).map(|mut e| {
                e.epoch_start_s = e0 as f64 * 1e-12;
                e
            });
            (e0, e1.min(end.max(e0 + 1)), est)
        })
        .collect();

    let mut epochs = Vec::with_capacity(n_epochs);
    let mut run = 0usize;
    let mut last: Option<SyncEstimate> = None;
    for (k, (e0, e1, res)) in results.iter().enumerate() {
        match res {
            Ok(est) => {
                run = 0;
                last = Some(*est);
                epochs.push(EpochSync {
                    epoch_index: k,
                    epoch_start_s: *e0 as f64 * 1e-12,
                    epoch_end_s: *e1 as f64 * 1e-12,
                    estimate: Some(*est),
                    fallback: false,
                });
            }
            Err(_) => {
                run += 1;
                if run > MAX_CONSECUTIVE_FAILURES {
                    return Err(SyncError::TooManyFailures { epoch: k, consecutive: run });
                }
                epochs.push(EpochSync {
                    epoch_index: k,
                    epoch_start_s: *e0 as f64 * 1e-12,
                    epoch_end_s: *e1 as f64 * 1e-12,
                    estimate: last,
                    fallback: true,
                });
            }
        }
    }
    let first_ok = epochs
        .iter()
        .find(|e| !e.fallback)
        .and_then(|e| e.estimate)
        .ok_or(SyncError::TooManyFailures {
            epoch: n_epochs - 1,
            consecutive: n_epochs,
        })?;
    for e in epochs.iter_mut() {
        if e.estimate.is_none() {
            e.estimate = Some(first_ok);
        }
    }

    let knots = epochs
        .iter()
        .map(|e| {
            let mid = ((e.epoch_start_s + e.epoch_end_s) * 0.5 * 1e12) as i64;
            (mid, e.estimate.unwrap().offset_ps as f64)
        })
        .collect();
    Ok(OffsetTrack { knots, epochs })
}

//! Monte-Carlo model of the shot-to-shot conditioning on harmonic emission.
//!
//! Forward model per shot (photon-number units):
//!
//! * IR photons N = ir_mean (1 + σ z); a reference diode reads N before the gas.
//! * With probability `hhg_prob` the shot is an event: one order q is drawn
//!   uniformly from `q_orders`, N_q harmonic photons are emitted and q·A·N_q IR
//!   photons are lost.
//! * Shots without harmonic emission lose a zero-mean, fluctuating number of
//!   IR photons to competing processes and carry an uncorrelated fluctuation
//!   on the harmonic detector.
//! * The harmonic detector reads energy-weighted counts q·Poisson(N_q / A_HH)
//!   on top of a background that follows the IR intensity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numeric::{mean, std_dev};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QspecParams {
    pub n_shots: usize,
    pub ir_mean: f64,
    /// Relative shot-to-shot IR fluctuation.
    pub ir_fluct_sigma: f64,
    pub hhg_prob: f64,
    /// Harmonic photons per event.
    pub n_q: f64,
    pub q_orders: Vec<u32>,
    /// Attenuation of the harmonic channel.
    pub a_hh: f64,
    /// Attenuation of the IR channel.
    pub b_ir: f64,
    /// IR photons absorbed per emitted harmonic photon and unit order.
    pub absorption_a: f64,
    pub noise_ir: f64,
    pub noise_hh: f64,
    pub noise_ref: f64,
    /// Std of the IR loss to competing processes on non-event shots.
    pub competing_sigma: f64,
    pub hh_background: f64,
    pub hh_background_sigma: f64,
    /// Harmonic-detector background per IR photon of intensity excursion.
    pub hh_ir_coupling: f64,
    pub poisson_hh: bool,
}

impl Default for QspecParams {
    fn default() -> Self {
        Self {
            n_shots: 500_000,
            ir_mean: 2.0e4,
            ir_fluct_sigma: 0.01,
            hhg_prob: 0.05,
            n_q: 100.0,
            q_orders: vec![11, 13],
            a_hh: 1.0,
            b_ir: 1.0,
            absorption_a: 2.0,
            noise_ir: 5.0,
            noise_hh: 5.0,
            noise_ref: 5.0,
            competing_sigma: 3000.0,
            hh_background: 8000.0,
            hh_background_sigma: 1500.0,
            hh_ir_coupling: 0.5,
            poisson_hh: true,
        }
    }
}

impl QspecParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("ir_mean", self.ir_mean),
            ("ir_fluct_sigma", self.ir_fluct_sigma),
            ("n_q", self.n_q),
            ("absorption_a", self.absorption_a),
            ("noise_ir", self.noise_ir),
            ("noise_hh", self.noise_hh),
            ("noise_ref", self.noise_ref),
            ("competing_sigma", self.competing_sigma),
            ("hh_background_sigma", self.hh_background_sigma),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.hhg_prob) {
            return Err(Error::Config(format!("hhg_prob {} outside [0, 1]", self.hhg_prob)));
        }
        if !(self.a_hh >= 1.0 && self.b_ir >= 1.0) {
            return Err(Error::Config("attenuation factors must be >= 1".into()));
        }
        if self.q_orders.is_empty() || self.q_orders.iter().any(|q| q % 2 == 0 || *q < 11) {
            return Err(Error::Config("q_orders must be odd orders >= 11".into()));
        }
        if self.n_shots == 0 {
            return Err(Error::Config("n_shots must be > 0".into()));
        }
        Ok(())
    }

    /// Peak spacing expected for adjacent odd orders: 2·A·N_q.
    pub fn expected_spacing(&self) -> f64 {
        2.0 * self.absorption_a * self.n_q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub s_ir: f64,
    pub s_hh: f64,
    /// Pre-interaction IR reading used by the stability filter.
    pub s_ref: f64,
    /// Simulation truth.
    pub is_hhg_event: bool,
    /// Simulation truth: emitted order, 0 when no event.
    pub order: u32,
    /// Simulation truth: IR photons lost to harmonic emission.
    pub ir_loss: f64,
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn one_shot(p: &QspecParams, seed: u64, index: u64) -> ShotRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n_ir = p.ir_mean * (1.0 + p.ir_fluct_sigma * gauss(&mut rng));
    let s_ref = n_ir / p.b_ir + p.noise_ref * gauss(&mut rng);
    let event = rng.gen::<f64>() < p.hhg_prob;
    let q = p.q_orders[rng.gen_range(0..p.q_orders.len())];
    let (order, loss, other_loss, hh_fluct, counts) = if event {
        let detected = if p.poisson_hh && p.n_q > 0.0 {
            Poisson::new(p.n_q / p.a_hh).expect("positive rate").sample(&mut rng)
        } else {
            p.n_q / p.a_hh
        };
        (q, q as f64 * p.absorption_a * p.n_q, 0.0, 0.0, q as f64 * detected)
    } else {
        let lc = p.competing_sigma * gauss(&mut rng);
        let bh = p.hh_background_sigma * gauss(&mut rng);
        (0, 0.0, lc, bh, 0.0)
    };
    let s_ir = ((n_ir - loss - other_loss) / p.b_ir + p.noise_ir * gauss(&mut rng)).max(0.0);
    let background = p.hh_background + p.hh_ir_coupling * (n_ir - p.ir_mean) / p.a_hh + hh_fluct;
    let s_hh = (counts + background + p.noise_hh * gauss(&mut rng)).max(0.0);
    ShotRecord { s_ir, s_hh, s_ref, is_hhg_event: event, order, ir_loss: loss }
}

/// Shots with per-shot ChaCha streams keyed by (seed, index); the result does
/// not depend on the thread count.
pub fn synthesize_shots(p: &QspecParams, seed: u64) -> Result<Vec<ShotRecord>> {
    p.validate()?;
    Ok((0..p.n_shots as u64).into_par_iter().map(|i| one_shot(p, seed, i)).collect())
}

/// Keep shots whose reference reading is within `threshold` (relative) of the batch mean.
pub fn stability_filter(shots: &[ShotRecord], threshold: f64) -> Result<Vec<ShotRecord>> {
    if !(threshold > 0.0) {
        return Err(Error::Config("stability threshold must be > 0".into()));
    }
    if shots.is_empty() {
        return Err(Error::Degenerate("no shots to filter".into()));
    }
    let refs: Vec<f64> = shots.iter().map(|s| s.s_ref).collect();
    let m = mean(&refs);
    let kept: Vec<ShotRecord> = shots.iter().filter(|s| (s.s_ref / m - 1.0).abs() < threshold).copied().collect();
    if kept.is_empty() {
        return Err(Error::Degenerate("stability filter removed every shot".into()));
    }
    Ok(kept)
}

/// Scale s_hh so both channels have equal standard deviation; returns the factor.
pub fn balance_variances(shots: &[ShotRecord]) -> Result<(Vec<ShotRecord>, f64)> {
    if shots.len() < 2 {
        return Err(Error::Degenerate("need at least two shots to balance".into()));
    }
    let ir: Vec<f64> = shots.iter().map(|s| s.s_ir).collect();
    let hh: Vec<f64> = shots.iter().map(|s| s.s_hh).collect();
    let (si, sh) = (std_dev(&ir), std_dev(&hh));
    if si == 0.0 || sh == 0.0 {
        return Err(Error::Degenerate("zero variance in a detector channel".into()));
    }
    let k = si / sh;
    Ok((shots.iter().map(|s| ShotRecord { s_hh: s.s_hh * k, ..*s }).collect(), k))
}

/// Distance from the −45° line through the batch mean: (s_ir − ⟨s_ir⟩) + (s_hh − ⟨s_hh⟩).
pub fn diagonal_offsets(shots: &[ShotRecord]) -> Vec<f64> {
    let mi = mean(&shots.iter().map(|s| s.s_ir).collect::<Vec<_>>());
    let mh = mean(&shots.iter().map(|s| s.s_hh).collect::<Vec<_>>());
    shots.iter().map(|s| (s.s_ir - mi) + (s.s_hh - mh)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub mask: Vec<bool>,
    pub retained_fraction: f64,
}

impl Selection {
    pub fn selected(&self, shots: &[ShotRecord]) -> Vec<ShotRecord> {
        shots.iter().zip(&self.mask).filter(|(_, m)| **m).map(|(s, _)| *s).collect()
    }
}

pub fn select_anticorrelated(shots: &[ShotRecord], band_halfwidth: f64) -> Selection {
    let mask: Vec<bool> = diagonal_offsets(shots).iter().map(|d| d.abs() < band_halfwidth).collect();
    let kept = mask.iter().filter(|m| **m).count();
    let retained_fraction = if shots.is_empty() { 0.0 } else { kept as f64 / shots.len() as f64 };
    Selection { mask, retained_fraction }
}

/// Band half-width retaining `fraction` of the (balanced) batch.
pub fn calibrate_band(shots: &[ShotRecord], fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) || shots.is_empty() {
        return Err(Error::Config("calibration needs shots and a fraction in (0, 1]".into()));
    }
    let mut d: Vec<f64> = diagonal_offsets(shots).iter().map(|v| v.abs()).collect();
    d.sort_by(f64::total_cmp);
    let k = ((fraction * d.len() as f64).ceil() as usize).clamp(1, d.len());
    Ok(d[k - 1] * (1.0 + 1e-12))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnHistogram {
    /// Bin edges in IR photons; one more than `probabilities`.
    pub edges: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl PnHistogram {
    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Histogram of inferred IR loss (baseline − s_ir)·B_IR over the selected shots.
pub fn photon_loss_histogram(selected: &[ShotRecord], baseline_ir: f64, b_ir: f64, bin_width: f64) -> Result<PnHistogram> {
    if selected.len() < 100 {
        return Err(Error::Degenerate(format!("{} selected shots, need at least 100", selected.len())));
    }
    if !(bin_width > 0.0) {
        return Err(Error::Config("bin width must be > 0".into()));
    }
    let loss: Vec<f64> = selected.iter().map(|s| (baseline_ir - s.s_ir) * b_ir).collect();
    let lo = (loss.iter().cloned().fold(f64::INFINITY, f64::min) / bin_width).floor() * bin_width;
    let hi = (loss.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / bin_width).floor() * bin_width + bin_width;
    let nbins = ((hi - lo) / bin_width).round() as usize;
    let mut counts = vec![0usize; nbins];
    for l in &loss {
        let k = (((l - lo) / bin_width).floor() as usize).min(nbins - 1);
        counts[k] += 1;
    }
    let total = loss.len() as f64;
    Ok(PnHistogram {
        edges: (0..=nbins).map(|k| lo + k as f64 * bin_width).collect(),
        probabilities: counts.iter().map(|c| *c as f64 / total).collect(),
    })
}

/// Peak centroids of a P_n histogram.
///
/// The histogram is smoothed over three bins; contiguous runs above
/// `rel_threshold` of the smoothed maximum are peaks, located by the
/// probability-weighted centroid of the raw bins in the run.
pub fn detect_peaks(h: &PnHistogram, rel_threshold: f64) -> Vec<f64> {
    let p = &h.probabilities;
    let n = p.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 2).min(n);
            p[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let top = smooth.iter().cloned().fold(0.0, f64::max);
    let cut = rel_threshold * top;
    let centers = h.centers();
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        if smooth[i] < cut {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && smooth[i] >= cut {
            i += 1;
        }
        let w: f64 = p[start..i].iter().sum();
        if w > 0.0 {
            peaks.push((start..i).map(|k| p[k] * centers[k]).sum::<f64>() / w);
        }
    }
    peaks
}

pub fn peak_spacings(peaks: &[f64]) -> Vec<f64> {
    peaks.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Post-selection settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionParams {
    pub stability_threshold: f64,
    /// Band half-width in balanced units.
    pub band_halfwidth: f64,
    /// Ignore `band_halfwidth` and calibrate the band to `target_fraction`.
    pub calibrate_band: bool,
    pub target_fraction: f64,
    pub bin_width: f64,
    pub peak_threshold: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            stability_threshold: 0.005,
            band_halfwidth: DEFAULT_BAND_HALFWIDTH,
            calibrate_band: false,
            target_fraction: 0.004,
            bin_width: 25.0,
            peak_threshold: 0.3,
        }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.stability_threshold > 0.0 && self.bin_width > 0.0 && self.band_halfwidth >= 0.0) {
            return Err(Error::Config("stability threshold, bin width and band half-width must be positive".into()));
        }
        if !(self.target_fraction > 0.0 && self.target_fraction <= 1.0) {
            return Err(Error::Config(format!("target_fraction {} outside (0, 1]", self.target_fraction)));
        }
        if !(self.peak_threshold > 0.0 && self.peak_threshold < 1.0) {
            return Err(Error::Config(format!("peak_threshold {} outside (0, 1)", self.peak_threshold)));
        }
        Ok(())
    }
}

/// Half-width calibrated on the default batch (seed 0) to retain 0.4 %.
pub const DEFAULT_BAND_HALFWIDTH: f64 = 12.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QspecReport {
    pub n_shots: usize,
    pub n_stable: usize,
    pub n_selected: usize,
    pub stable_fraction: f64,
    /// Selected / stable shots.
    pub retained_fraction: f64,
    /// Selected / all shots.
    pub retained_fraction_of_all: f64,
    pub band_halfwidth: f64,
    pub balance_scale: f64,
    pub baseline_ir: f64,
    pub event_fraction_all: f64,
    pub event_fraction_selected: f64,
    pub enrichment: f64,
    pub mean_s_hh_selected: f64,
    pub mean_s_hh_unselected: f64,
    pub peaks: Vec<f64>,
    pub peak_spacings: Vec<f64>,
    pub expected_spacing: f64,
}

#[derive(Debug, Clone)]
pub struct QspecRun {
    pub shots: Vec<ShotRecord>,
    /// Stability-filtered, variance-balanced shots.
    pub balanced: Vec<ShotRecord>,
    pub selection: Selection,
    pub histogram: PnHistogram,
    pub report: QspecReport,
}

/// Full chain: synthesize, filter, balance, select, histogram.
pub fn run_qspec(p: &QspecParams, sel: &SelectionParams, seed: u64) -> Result<QspecRun> {
    sel.validate()?;
    let shots = synthesize_shots(p, seed)?;
    let stable = stability_filter(&shots, sel.stability_threshold)?;
    let (balanced, k) = balance_variances(&stable)?;
    let w = if sel.calibrate_band { calibrate_band(&balanced, sel.target_fraction)? } else { sel.band_halfwidth };
    let selection = select_anticorrelated(&balanced, w);
    let chosen = selection.selected(&balanced);
    let baseline = mean(&balanced.iter().map(|s| s.s_ir).collect::<Vec<_>>());
    let histogram = photon_loss_histogram(&chosen, baseline, p.b_ir, sel.bin_width)?;
    let peaks = detect_peaks(&histogram, sel.peak_threshold);
    let frac = |v: &[ShotRecord]| v.iter().filter(|s| s.is_hhg_event).count() as f64 / v.len().max(1) as f64;
    let unselected: Vec<f64> = balanced.iter().zip(&selection.mask).filter(|(_, m)| !**m).map(|(s, _)| s.s_hh).collect();
    let (fa, fs) = (frac(&balanced), frac(&chosen));
    let report = QspecReport {
        n_shots: shots.len(),
        n_stable: stable.len(),
        n_selected: chosen.len(),
        stable_fraction: stable.len() as f64 / shots.len() as f64,
        retained_fraction: selection.retained_fraction,
        retained_fraction_of_all: chosen.len() as f64 / shots.len() as f64,
        band_halfwidth: w,
        balance_scale: k,
        baseline_ir: baseline,
        event_fraction_all: fa,
        event_fraction_selected: fs,
        enrichment: if fa > 0.0 { fs / fa } else { f64::NAN },
        mean_s_hh_selected: mean(&chosen.iter().map(|s| s.s_hh).collect::<Vec<_>>()),
        mean_s_hh_unselected: mean(&unselected),
        peak_spacings: peak_spacings(&peaks),
        peaks,
        expected_spacing: p.expected_spacing(),
    };
    Ok(QspecRun { shots, balanced, selection, histogram, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> QspecParams {
        QspecParams {
            n_shots: 2000,
            ir_fluct_sigma: 0.0,
            noise_ir: 0.0,
            noise_hh: 0.0,
            noise_ref: 0.0,
            competing_sigma: 0.0,
            hh_background_sigma: 0.0,
            ..QspecParams::default()
        }
    }

    #[test]
    fn no_events_means_no_harmonic_counts() {
        let p = QspecParams { hhg_prob: 0.0, n_shots: 5000, ..QspecParams::default() };
        let shots = synthesize_shots(&p, 1).unwrap();
        assert!(shots.iter().all(|s| !s.is_hhg_event && s.ir_loss == 0.0));
        let quiet = QspecParams { hhg_prob: 0.0, hh_background: 0.0, hh_ir_coupling: 0.0, hh_background_sigma: 0.0, ..quiet() };
        let shots = synthesize_shots(&quiet, 1).unwrap();
        assert!(shots.iter().all(|s| s.s_hh == 0.0));
    }

    #[test]
    fn single_order_bookkeeping() {
        let p = QspecParams {
            hhg_prob: 1.0,
            q_orders: vec![11],
            n_q: 1.0,
            absorption_a: 1.0,
            poisson_hh: false,
            ..quiet()
        };
        for s in synthesize_shots(&p, 3).unwrap() {
            assert_eq!(p.ir_mean - s.s_ir, 11.0);
        }
    }

    #[test]
    fn events_anticorrelate() {
        let p = QspecParams { n_shots: 200_000, ..QspecParams::default() };
        let ev: Vec<ShotRecord> = synthesize_shots(&p, 7).unwrap().into_iter().filter(|s| s.is_hhg_event).collect();
        assert!(ev.len() >= 10_000 - 500);
        let ir: Vec<f64> = ev.iter().map(|s| s.s_ir).collect();
        let hh: Vec<f64> = ev.iter().map(|s| s.s_hh).collect();
        assert!(crate::numeric::pearson(&ir, &hh) < 0.0);
    }

    #[test]
    fn identical_shots_survive_filter() {
        let p = QspecParams { hhg_prob: 0.0, ..quiet() };
        let shots = synthesize_shots(&p, 0).unwrap();
        assert_eq!(stability_filter(&shots, 0.005).unwrap().len(), shots.len());
    }

    #[test]
    fn outlier_removed() {
        let base = ShotRecord { s_ir: 1.0, s_hh: 1.0, s_ref: 100.0, is_hhg_event: false, order: 0, ir_loss: 0.0 };
        let mut shots = vec![base; 99];
        shots.push(ShotRecord { s_ref: 110.0, ..base });
        assert_eq!(stability_filter(&shots, 0.005).unwrap().len(), 99);
    }

    #[test]
    fn gaussian_retained_fraction() {
        let p = QspecParams { n_shots: 100_000, hhg_prob: 0.0, ..QspecParams::default() };
        let shots = synthesize_shots(&p, 11).unwrap();
        let f = stability_filter(&shots, 0.005).unwrap().len() as f64 / shots.len() as f64;
        assert!((f - 0.383).abs() < 0.02, "{f}");
    }

    #[test]
    fn balancing_scale() {
        let mk = |a: f64, b: f64| ShotRecord { s_ir: a, s_hh: b, s_ref: 1.0, is_hhg_event: false, order: 0, ir_loss: 0.0 };
        let shots = vec![mk(1.0, 2.0), mk(3.0, 6.0), mk(2.0, 4.0), mk(0.0, 0.0)];
        let (b, k) = balance_variances(&shots).unwrap();
        assert!((k - 0.5).abs() < 1e-15);
        let same = balance_variances(&b).unwrap().1;
        assert!((same - 1.0).abs() < 1e-12);
        let flat = vec![mk(1.0, 1.0); 3];
        assert!(balance_variances(&flat).is_err());
    }

    #[test]
    fn infinite_band_keeps_all() {
        let shots = synthesize_shots(&QspecParams { n_shots: 1000, ..QspecParams::default() }, 2).unwrap();
        let s = select_anticorrelated(&shots, f64::INFINITY);
        assert_eq!(s.retained_fraction, 1.0);
    }

    #[test]
    fn single_order_single_peak() {
        let p = QspecParams { hhg_prob: 1.0, q_orders: vec![13], poisson_hh: false, n_shots: 500, ..quiet() };
        let shots = synthesize_shots(&p, 0).unwrap();
        let h = photon_loss_histogram(&shots, p.ir_mean, 1.0, 25.0).unwrap();
        let peaks = detect_peaks(&h, 0.3);
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0] - 13.0 * 2.0 * 100.0).abs() <= 25.0);
    }

    #[test]
    fn no_event_peak_at_zero() {
        let p = QspecParams { hhg_prob: 0.0, n_shots: 500, ..quiet() };
        let shots = synthesize_shots(&p, 0).unwrap();
        let h = photon_loss_histogram(&shots, p.ir_mean, 1.0, 25.0).unwrap();
        let peaks = detect_peaks(&h, 0.3);
        assert_eq!(peaks.len(), 1);
        assert!(peaks[0].abs() <= 25.0);
    }

    #[test]
    fn too_few_selected() {
        let p = QspecParams { n_shots: 50, ..quiet() };
        let shots = synthesize_shots(&p, 0).unwrap();
        assert!(photon_loss_histogram(&shots, p.ir_mean, 1.0, 25.0).is_err());
    }

    #[test]
    fn histogram_normalized() {
        let shots = synthesize_shots(&QspecParams { n_shots: 3000, ..QspecParams::default() }, 5).unwrap();
        let h = photon_loss_histogram(&shots, 2.0e4, 1.0, 25.0).unwrap();
        assert!((h.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bad_params_rejected() {
        assert!(QspecParams { hhg_prob: 1.5, ..QspecParams::default() }.validate().is_err());
        assert!(QspecParams { a_hh: 0.5, ..QspecParams::default() }.validate().is_err());
        assert!(QspecParams { q_orders: vec![12], ..QspecParams::default() }.validate().is_err());
    }
}

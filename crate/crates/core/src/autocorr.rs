//! Second-order interferometric autocorrelation traces and the
//! band-block / cycle-average post-processing chain.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::coherent::{coherent_overlap, PointSuperposition, PulseParams};
use crate::fock::{FockOperator, FockState};
use crate::numeric::{mean, symmetric_grid, trapezoid};
use crate::states::{mixture_point, GcssParams};
use crate::{Error, Result, C64};

/// Which photon-number moments enter the detected signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityModel {
    /// ⟨(a†)²a²⟩ + ⟨a†a⟩.
    Full,
    /// ⟨(a†)²a²⟩ only (large-photon-number limit).
    NormalOrdered,
}

/// How the conditioned state enters the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GcssWeighting {
    /// Unnormalized |ψ⟩ − ξ|α⟩: moments weighted by the branch norm 1 − |ξ|².
    Conditioned,
    /// Per-instant normalized state.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    /// Unconditioned interferometer output (QS off).
    Coherent,
    Gcss,
    Mixture,
}

impl StateKind {
    pub const ALL: [StateKind; 3] = [StateKind::Coherent, StateKind::Gcss, StateKind::Mixture];

    pub fn name(self) -> &'static str {
        match self {
            StateKind::Coherent => "coherent",
            StateKind::Gcss => "gcss",
            StateKind::Mixture => "mixture",
        }
    }
}

fn i2_from(z2: f64, z1: f64, model: IntensityModel) -> f64 {
    match model {
        IntensityModel::Full => z2 + z1,
        IntensityModel::NormalOrdered => z2,
    }
}

/// Σ_jk c_j* c_k ⟨α_j|α_k⟩ [(α_j*α_k)² + α_j*α_k] without normalization,
/// together with the squared norm.
fn raw_i2(s: &PointSuperposition, model: IntensityModel) -> (f64, f64) {
    let mut acc = C64::new(0.0, 0.0);
    let mut norm = C64::new(0.0, 0.0);
    for (cj, aj) in s.coeffs.iter().zip(&s.alphas) {
        for (ck, ak) in s.coeffs.iter().zip(&s.alphas) {
            let w = cj.conj() * ck * coherent_overlap(*aj, *ak);
            let z = aj.conj() * ak;
            acc += w * match model {
                IntensityModel::Full => z * z + z,
                IntensityModel::NormalOrdered => z * z,
            };
            norm += w;
        }
    }
    (acc.re, norm.re)
}

/// ⟨I²⟩ of a (normalized) analytic superposition.
pub fn intensity_squared(s: &PointSuperposition, model: IntensityModel) -> Result<f64> {
    let n = s.norm()?;
    Ok(raw_i2(s, model).0 / (n * n))
}

/// Operators needed for the Fock-basis evaluation of ⟨I²⟩.
pub struct IntensityOps {
    quartic: FockOperator,
    number: FockOperator,
}

impl IntensityOps {
    pub fn new(n_max: usize) -> Result<Self> {
        let (a, ad, number) = crate::fock::ladder_operators(n_max)?;
        let quartic = ad.matmul(&ad)?.matmul(&a.matmul(&a)?)?.to_sparse();
        Ok(Self { quartic, number })
    }
}

/// ⟨I²⟩ evaluated in the Fock basis.
pub fn intensity_squared_fock<S: FockState>(state: &S, ops: &IntensityOps, model: IntensityModel) -> Result<f64> {
    let z2 = state.expect(&ops.quartic)?.re;
    let z1 = state.expect(&ops.number)?.re;
    Ok(i2_from(z2, z1, model))
}

/// Sampled S(τ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub delays: Vec<f64>,
    pub values: Vec<f64>,
    pub sigma: Vec<f64>,
    pub uniform: bool,
}

impl Trace {
    pub fn new(delays: Vec<f64>, values: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if delays.len() != values.len() || delays.len() != sigma.len() {
            return Err(Error::Config("trace columns differ in length".into()));
        }
        if delays.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("trace delays must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("trace values must be finite".into()));
        }
        if sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("trace sigma must be >= 0".into()));
        }
        let uniform = is_uniform(&delays);
        Ok(Self { delays, values, sigma, uniform })
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn nearest_index(&self, tau: f64) -> usize {
        let mut best = 0;
        for (i, d) in self.delays.iter().enumerate() {
            if (d - tau).abs() < (self.delays[best] - tau).abs() {
                best = i;
            }
        }
        best
    }

    pub fn value_near(&self, tau: f64) -> f64 {
        self.values[self.nearest_index(tau)]
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            delays: self.delays.clone(),
            values: self.values.iter().map(|v| v * k).collect(),
            sigma: self.sigma.iter().map(|s| s * k.abs()).collect(),
            uniform: self.uniform,
        }
    }
}

fn is_uniform(d: &[f64]) -> bool {
    if d.len() < 3 {
        return true;
    }
    let h = (d[d.len() - 1] - d[0]) / (d.len() - 1) as f64;
    d.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0))
}

/// Delay and time grids plus the signal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSettings {
    /// Delays run over −tau_half..=tau_half.
    pub tau_half: f64,
    pub tau_step: f64,
    /// Time integration runs over −t_window..=t_window.
    pub t_window: f64,
    pub t_step: f64,
    pub model: IntensityModel,
    pub weighting: GcssWeighting,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self {
            tau_half: 80.0,
            tau_step: 0.1,
            t_window: 90.0,
            t_step: 0.05,
            model: IntensityModel::Full,
            weighting: GcssWeighting::Conditioned,
        }
    }
}

impl TraceSettings {
    pub fn validate(&self, pulse: &PulseParams) -> Result<()> {
        if !(self.tau_half > 0.0 && self.tau_step > 0.0 && self.t_step > 0.0) {
            return Err(Error::Config("trace grid steps and spans must be > 0".into()));
        }
        if 2.0 * self.t_window < 4.0 * pulse.fwhm_fs {
            return Err(Error::Config(format!(
                "time window ±{} fs covers fewer than 4 envelope FWHM",
                self.t_window
            )));
        }
        if self.t_step > pulse.cycle_fs() / 20.0 {
            return Err(Error::Config(format!(
                "time step {} fs undersamples the {:.4} fs optical cycle",
                self.t_step,
                pulse.cycle_fs()
            )));
        }
        Ok(())
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        symmetric_grid(self.tau_half, self.tau_step)
    }

    pub fn t_grid(&self) -> Vec<f64> {
        symmetric_grid(self.t_window, self.t_step)
    }
}

/// Per-τ trapezoid integral of `integrand(τ, t)`; parallel over τ, order preserved.
pub fn ac_trace<F>(integrand: F, tau_grid: &[f64], t_window: f64, t_step: f64) -> Result<Trace>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let ts = symmetric_grid(t_window, t_step);
    let values: Vec<f64> = tau_grid
        .par_iter()
        .map(|&tau| {
            let ys = ts.iter().map(|&t| integrand(tau, t)).collect::<Result<Vec<f64>>>()?;
            Ok(trapezoid(&ys, t_step))
        })
        .collect::<Result<Vec<f64>>>()?;
    Trace::new(tau_grid.to_vec(), values, vec![0.0; tau_grid.len()])
}

/// ⟨I²⟩(t, τ) for one of the three state kinds.
pub fn state_intensity(kind: StateKind, p: &GcssParams, settings: &TraceSettings, tau: f64, t: f64) -> Result<f64> {
    let q = p.with_tau(tau);
    let model = settings.model;
    match kind {
        StateKind::Coherent => {
            let n = q.psi_amplitude().evaluate(t).norm_sqr();
            Ok(i2_from(n * n, n, model))
        }
        StateKind::Gcss => {
            let s = crate::states::gcss_point(&q, t);
            let (raw, n2) = raw_i2(&s, model);
            match settings.weighting {
                GcssWeighting::Conditioned => Ok(raw),
                GcssWeighting::Normalized => {
                    if n2 > 1e-24 {
                        Ok(raw / n2)
                    } else if s.alphas.iter().all(|a| a.norm() < 1e-3) {
                        // both components are vacuum-like far in the pulse wings
                        Ok(0.0)
                    } else {
                        Err(Error::NullState(format!("GCSS norm vanished at t = {t}, tau = {tau}")))
                    }
                }
            }
        }
        StateKind::Mixture => {
            let m = mixture_point(&q, t);
            Ok(i2_from(m.moment(2, 2).re, m.moment(1, 1).re, model))
        }
    }
}

/// Raw (unnormalized) trace of one state kind.
pub fn state_trace(kind: StateKind, p: &GcssParams, settings: &TraceSettings) -> Result<Trace> {
    p.validate()?;
    settings.validate(&p.pulse)?;
    ac_trace(
        |tau, t| state_intensity(kind, p, settings, tau, t),
        &settings.tau_grid(),
        settings.t_window,
        settings.t_step,
    )
}

/// S(0) of the QS-off (coherent) trace, the coherent-peak normalization constant.
pub fn coherent_peak(p: &GcssParams, settings: &TraceSettings) -> Result<f64> {
    settings.validate(&p.pulse)?;
    let t = ac_trace(
        |tau, t| state_intensity(StateKind::Coherent, p, settings, tau, t),
        &[0.0],
        settings.t_window,
        settings.t_step,
    )?;
    Ok(t.values[0])
}

/// Zero every Fourier component above `block_above` (fs⁻¹).
///
/// Non-uniform input is first interpolated linearly onto a uniform grid with
/// the same number of points. The record is mirrored before the transform so
/// the implied periodic signal has no jump at the ends.
pub fn band_block_filter(tr: &Trace, block_above: f64) -> Result<Trace> {
    let n = tr.len();
    if n < 64 {
        return Err(Error::Config(format!("band-block filter needs >= 64 points, got {n}")));
    }
    if tr.delays.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("non-monotonic delays".into()));
    }
    let (delays, values, sigma) = if tr.uniform {
        (tr.delays.clone(), tr.values.clone(), tr.sigma.clone())
    } else {
        let d = crate::numeric::linspace(tr.delays[0], tr.delays[n - 1], n);
        let v = interp(&tr.delays, &tr.values, &d);
        let s = interp(&tr.delays, &tr.sigma, &d);
        (d, v, s)
    };
    let h = (delays[n - 1] - delays[0]) / (n - 1) as f64;
    let m = 2 * n;
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .chain(values.iter().rev())
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let kk = if k <= m / 2 { k } else { m - k };
        let nu = kk as f64 / (m as f64 * h);
        if nu > block_above {
            *b = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let out: Vec<f64> = buf[..n].iter().map(|c| c.re / m as f64).collect();
    let mut t = Trace::new(delays, out, sigma)?;
    t.uniform = true;
    Ok(t)
}

fn interp(xs: &[f64], ys: &[f64], at: &[f64]) -> Vec<f64> {
    let mut j = 0;
    at.iter()
        .map(|&x| {
            while j + 2 < xs.len() && xs[j + 1] < x {
                j += 1;
            }
            let (x0, x1) = (xs[j], xs[j + 1]);
            let w = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
            ys[j] * (1.0 - w) + ys[j + 1] * w
        })
        .collect()
}

/// Sliding mean over `points_per_cycle` samples; sigma is the window standard
/// deviation divided by √points_per_cycle. Windows are shifted inward at the
/// record ends so every output uses the full count.
pub fn cycle_average(tr: &Trace, points_per_cycle: usize) -> Result<Trace> {
    if points_per_cycle < 2 {
        return Err(Error::Config("points_per_cycle must be >= 2".into()));
    }
    let n = tr.len();
    if points_per_cycle > n {
        return Err(Error::Config(format!("window {points_per_cycle} longer than trace ({n})")));
    }
    let k = points_per_cycle;
    let mut values = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(k / 2).min(n - k);
        let w = &tr.values[lo..lo + k];
        let m = mean(w);
        let var = w.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / k as f64;
        values.push(m);
        sigma.push(var.sqrt() / (k as f64).sqrt());
    }
    Trace::new(tr.delays.clone(), values, sigma)
}

/// Least-squares amplitude of a sinusoid at `nu` (fs⁻¹) in the trace,
/// fitted together with a constant offset.
pub fn tone_amplitude(tr: &Trace, nu: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * nu;
    // normal equations for [cos, sin, 1]
    let mut g = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for (d, v) in tr.delays.iter().zip(&tr.values) {
        let b = [(w * d).cos(), (w * d).sin(), 1.0];
        for i in 0..3 {
            r[i] += b[i] * v;
            for j in 0..3 {
                g[i][j] += b[i] * b[j];
            }
        }
    }
    let x = solve3(g, r);
    x[0].hypot(x[1])
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for c in 0..3 {
        let p = (c..3).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..3 {
            let f = a[r][c] / a[c][c];
            let pivot = a[c];
            for (v, pk) in a[r].iter_mut().zip(pivot).skip(c) {
                *v -= f * pk;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 3];
    for c in (0..3).rev() {
        let s: f64 = (c + 1..3).map(|k| a[c][k] * x[k]).sum();
        x[c] = (b[c] - s) / a[c][c];
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessingParams {
    pub block_above: f64,
    pub points_per_cycle: usize,
}

impl Default for ProcessingParams {
    fn default() -> Self {
        Self { block_above: 0.2, points_per_cycle: 25 }
    }
}

/// Raw 2-AC trace to cycle-averaged 2-IAC trace.
pub fn process(raw: &Trace, pp: &ProcessingParams) -> Result<Trace> {
    cycle_average(&band_block_filter(raw, pp.block_above)?, pp.points_per_cycle)
}

/// Extremum windows for the modulation depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricWindows {
    /// S_min searched over |τ| ≤ inner.
    pub inner: f64,
    /// S_max searched over outer_lo ≤ |τ| ≤ outer_hi.
    pub outer_lo: f64,
    pub outer_hi: f64,
    /// Background averaged over |τ| ≥ background_from.
    pub background_from: f64,
}

impl Default for MetricWindows {
    fn default() -> Self {
        Self { inner: 10.0, outer_lo: 10.0, outer_hi: 30.0, background_from: 70.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceMetrics {
    pub s_zero: f64,
    pub m_depth: f64,
    pub background: f64,
    pub s_max: f64,
    pub s_min: f64,
}

pub fn trace_metrics(iac: &Trace, w: &MetricWindows) -> Result<TraceMetrics> {
    let pick = |lo: f64, hi: f64| -> Vec<f64> {
        iac.delays
            .iter()
            .zip(&iac.values)
            .filter(|(d, _)| d.abs() >= lo && d.abs() <= hi)
            .map(|(_, v)| *v)
            .collect()
    };
    let outer = pick(w.outer_lo, w.outer_hi);
    let inner = pick(0.0, w.inner);
    let bg = pick(w.background_from, f64::INFINITY);
    if outer.is_empty() || inner.is_empty() {
        return Err(Error::Config("modulation-depth windows are empty".into()));
    }
    let s_max = outer.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s_min = inner.iter().cloned().fold(f64::INFINITY, f64::min);
    let m = 2.0 * (s_max - s_min) / (s_max + s_min);
    let background = if bg.is_empty() {
        let n = iac.len();
        0.5 * (iac.values[0] + iac.values[n - 1])
    } else {
        mean(&bg)
    };
    if !(background > 0.0) {
        return Err(Error::Config(format!("trace background {background} is not positive")));
    }
    Ok(TraceMetrics {
        s_zero: iac.value_near(0.0),
        m_depth: if m.is_finite() { m.max(0.0) } else { 0.0 },
        background,
        s_max,
        s_min,
    })
}

/// Raw and processed traces of one state kind with its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSet {
    pub kind: StateKind,
    /// Coherent-peak normalized 2-AC.
    pub raw: Trace,
    pub iac: Trace,
    /// `s_zero` is relative to the coherent 2-IAC at τ = 0.
    pub metrics: TraceMetrics,
}

/// Traces for the requested kinds, normalized to the QS-off reference.
pub fn compare_states(
    p: &GcssParams,
    kinds: &[StateKind],
    settings: &TraceSettings,
    pp: &ProcessingParams,
    windows: &MetricWindows,
) -> Result<Vec<TraceSet>> {
    let coherent_raw = state_trace(StateKind::Coherent, p, settings)?;
    let peak = coherent_raw.value_near(0.0);
    let coherent_raw = coherent_raw.scaled(1.0 / peak);
    let coherent_iac = process(&coherent_raw, pp)?;
    let iac_zero = coherent_iac.value_near(0.0);
    let mut out = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let (raw, iac) = if kind == StateKind::Coherent {
            (coherent_raw.clone(), coherent_iac.clone())
        } else {
            let raw = state_trace(kind, p, settings)?.scaled(1.0 / peak);
            let iac = process(&raw, pp)?;
            (raw, iac)
        };
        let mut metrics = trace_metrics(&iac, windows)?;
        metrics.s_zero /= iac_zero;
        out.push(TraceSet { kind, raw, iac, metrics });
    }
    Ok(out)
}

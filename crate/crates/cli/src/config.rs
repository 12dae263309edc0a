//! Experiment configuration. Every key is optional; missing keys take the
//! defaults below. Unknown keys are rejected. See `docs/config.md`.

use std::path::{Path, PathBuf};

use gcss::autocorr::{GcssWeighting, IntensityModel, MetricWindows, ProcessingParams, TraceSettings};
use gcss::coherent::{Envelope, PulseParams};
use gcss::qspec::{QspecParams, SelectionParams};
use gcss::shg::ShgSystem;
use gcss::states::GcssParams;
use gcss::{Error, Result, C64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub out: PathBuf,
    pub state: StateSection,
    pub trace: TraceSection,
    pub sweep: SweepSection,
    pub wigner: WignerSection,
    pub shg: ShgSection,
    pub qspec: QspecParams,
    pub selection: SelectionParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "gcss".into(),
            seed: 0,
            out: PathBuf::from("out"),
            state: StateSection::default(),
            trace: TraceSection::default(),
            sweep: SweepSection::default(),
            wigner: WignerSection::default(),
            shg: ShgSection::default(),
            qspec: QspecParams::default(),
            selection: SelectionParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateSection {
    pub alpha: f64,
    /// Magnitude of the depletion; applied as −|δα|.
    pub delta_alpha: f64,
    pub xi_q_factor: f64,
    pub wavelength_nm: f64,
    pub fwhm_fs: f64,
    pub envelope: Envelope,
}

impl Default for StateSection {
    fn default() -> Self {
        Self { alpha: 12.0, delta_alpha: 0.24, xi_q_factor: 1.0, wavelength_nm: 800.0, fwhm_fs: 25.0, envelope: Envelope::Gaussian }
    }
}

impl StateSection {
    pub fn params(&self, alpha: f64, delta_alpha: f64) -> GcssParams {
        GcssParams {
            alpha: C64::new(alpha, 0.0),
            delta_alpha: C64::new(-delta_alpha.abs(), 0.0),
            tau: 0.0,
            pulse: PulseParams { wavelength_nm: self.wavelength_nm, fwhm_fs: self.fwhm_fs, envelope: self.envelope },
            xi_q_factor: self.xi_q_factor,
        }
    }

    pub fn gcss(&self) -> GcssParams {
        self.params(self.alpha, self.delta_alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceSection {
    pub tau_half: f64,
    pub tau_step: f64,
    pub t_window: f64,
    pub t_step: f64,
    pub model: IntensityModel,
    pub weighting: GcssWeighting,
    pub block_above: f64,
    pub points_per_cycle: usize,
    pub inner: f64,
    pub outer_lo: f64,
    pub outer_hi: f64,
    pub background_from: f64,
}

impl Default for TraceSection {
    fn default() -> Self {
        let s = TraceSettings::default();
        let p = ProcessingParams::default();
        let w = MetricWindows::default();
        Self {
            tau_half: s.tau_half,
            tau_step: s.tau_step,
            t_window: s.t_window,
            t_step: s.t_step,
            model: s.model,
            weighting: s.weighting,
            block_above: p.block_above,
            points_per_cycle: p.points_per_cycle,
            inner: w.inner,
            outer_lo: w.outer_lo,
            outer_hi: w.outer_hi,
            background_from: w.background_from,
        }
    }
}

impl TraceSection {
    pub fn settings(&self) -> TraceSettings {
        TraceSettings {
            tau_half: self.tau_half,
            tau_step: self.tau_step,
            t_window: self.t_window,
            t_step: self.t_step,
            model: self.model,
            weighting: self.weighting,
        }
    }

    pub fn processing(&self) -> ProcessingParams {
        ProcessingParams { block_above: self.block_above, points_per_cycle: self.points_per_cycle }
    }

    pub fn windows(&self) -> MetricWindows {
        MetricWindows { inner: self.inner, outer_lo: self.outer_lo, outer_hi: self.outer_hi, background_from: self.background_from }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub alphas: Vec<f64>,
    pub delta_alphas: Vec<f64>,
    /// Deviation threshold on |1 − s_zero| and M.
    pub threshold: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            alphas: vec![12.0, 30.0],
            delta_alphas: vec![0.0, 0.1, 0.2, 0.24, 0.29, 0.35, 0.5, 0.7, 1.0, 1.44],
            threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerSection {
    pub half_width: f64,
    pub points: usize,
}

impl Default for WignerSection {
    fn default() -> Self {
        Self { half_width: 6.0, points: 201 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShgSection {
    pub alpha: f64,
    pub delta_alpha: f64,
    pub n_max_w: usize,
    pub n_max_2w: usize,
    pub chi: f64,
    /// Fixed interaction time; when absent it is tuned on the coherent input
    /// so that ⟨n_2ω⟩ reaches `target_n2w`.
    pub t_final: Option<f64>,
    pub target_n2w: f64,
    pub tol: f64,
    pub snapshots: usize,
    pub wigner_half_width: f64,
    pub wigner_points: usize,
}

impl Default for ShgSection {
    fn default() -> Self {
        let s = ShgSystem::default();
        Self {
            alpha: 4.0,
            delta_alpha: 0.24,
            n_max_w: s.n_max_w,
            n_max_2w: s.n_max_2w,
            chi: s.chi,
            t_final: None,
            target_n2w: 5.0,
            tol: 1e-9,
            snapshots: 20,
            wigner_half_width: 7.0,
            wigner_points: 141,
        }
    }
}

impl ShgSection {
    pub fn system(&self, t_final: f64) -> ShgSystem {
        ShgSystem { n_max_w: self.n_max_w, n_max_2w: self.n_max_2w, chi: self.chi, t_final }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.state.gcss();
        g.validate()?;
        self.trace.settings().validate(&g.pulse)?;
        if self.trace.points_per_cycle == 0 || !(self.trace.block_above > 0.0) {
            return Err(Error::Config("trace processing needs block_above > 0 and points_per_cycle > 0".into()));
        }
        if self.sweep.alphas.is_empty() || self.sweep.delta_alphas.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.sweep.delta_alphas.iter().any(|d| !d.is_finite()) || self.sweep.alphas.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Config("sweep values must be finite and alphas > 0".into()));
        }
        if self.wigner.points < 16 || !(self.wigner.half_width > 0.0) {
            return Err(Error::Config("wigner grid needs >= 16 points and half_width > 0".into()));
        }
        let shg = &self.shg;
        shg.system(shg.t_final.unwrap_or(0.0)).validate()?;
        if shg.alpha.powi(2) > shg.n_max_w as f64 {
            return Err(Error::Config(format!("shg alpha^2 = {} exceeds n_max_w = {}", shg.alpha.powi(2), shg.n_max_w)));
        }
        if shg.t_final.is_none() && !(shg.target_n2w > 0.0) {
            return Err(Error::Config("shg needs t_final or target_n2w > 0".into()));
        }
        if shg.snapshots == 0 || shg.wigner_points < 16 {
            return Err(Error::Config("shg needs snapshots >= 1 and wigner_points >= 16".into()));
        }
        self.qspec.validate()?;
        self.selection.validate()
    }
}

//! Closed-form algebra of finite coherent-state superpositions.

use serde::{Deserialize, Serialize};

use crate::fock::{coherent_fock, FockVector};
use crate::{Error, Result, C64};

/// Speed of light in nm/fs.
pub const SPEED_OF_LIGHT: f64 = 299.792458;

/// Overlaps whose log-magnitude falls below this are returned as zero.
pub const LOG_UNDERFLOW: f64 = -700.0;

const NULL_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Envelope {
    /// exp(−2 ln2 (t/T)²), intensity FWHM T.
    Gaussian,
    /// f ≡ 1 (monochromatic limit).
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    pub wavelength_nm: f64,
    pub fwhm_fs: f64,
    pub envelope: Envelope,
}

impl Default for PulseParams {
    fn default() -> Self {
        Self { wavelength_nm: 800.0, fwhm_fs: 25.0, envelope: Envelope::Gaussian }
    }
}

impl PulseParams {
    pub fn new(wavelength_nm: f64, fwhm_fs: f64, envelope: Envelope) -> Result<Self> {
        let p = Self { wavelength_nm, fwhm_fs, envelope };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_nm > 0.0 && self.wavelength_nm.is_finite()) {
            return Err(Error::Config(format!("wavelength must be > 0, got {}", self.wavelength_nm)));
        }
        if !(self.fwhm_fs > 0.0 && self.fwhm_fs.is_finite()) {
            return Err(Error::Config(format!("pulse FWHM must be > 0, got {}", self.fwhm_fs)));
        }
        Ok(())
    }

    /// Carrier angular frequency in rad/fs.
    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / self.wavelength_nm
    }

    /// Optical period in fs.
    pub fn cycle_fs(&self) -> f64 {
        self.wavelength_nm / SPEED_OF_LIGHT
    }

    pub fn envelope_at(&self, t: f64) -> f64 {
        match self.envelope {
            Envelope::Gaussian => {
                let x = t / self.fwhm_fs;
                (-2.0 * std::f64::consts::LN_2 * x * x).exp()
            }
            Envelope::Flat => 1.0,
        }
    }
}

/// One enveloped carrier term: `scale · f(t − center) · exp(iω(t − phase_offset))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub scale: C64,
    pub center: f64,
    pub phase_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeAmplitude {
    pub terms: Vec<Term>,
    pub pulse: PulseParams,
}

impl CompositeAmplitude {
    pub fn single(scale: C64, pulse: PulseParams) -> Self {
        Self { terms: vec![Term { scale, center: 0.0, phase_offset: 0.0 }], pulse }
    }

    /// Time-independent amplitude; evaluates to `alpha` at t = 0.
    pub fn constant(alpha: C64) -> Self {
        Self::single(alpha, PulseParams { envelope: Envelope::Flat, ..PulseParams::default() })
    }

    pub fn evaluate(&self, t: f64) -> C64 {
        let w = self.pulse.omega();
        self.terms
            .iter()
            .map(|k| {
                let f = self.pulse.envelope_at(t - k.center);
                k.scale * f * C64::from_polar(1.0, w * (t - k.phase_offset))
            })
            .sum()
    }
}

pub fn evaluate_amplitude(a: &CompositeAmplitude, t: f64) -> C64 {
    a.evaluate(t)
}

/// ⟨β|γ⟩ = exp(−|β|²/2 − |γ|²/2 + β*γ).
///
/// The real part of the exponent is evaluated as −|β−γ|²/2, which is exact
/// for equal arguments and does not lose digits at large amplitude.
pub fn coherent_overlap(beta: C64, gamma: C64) -> C64 {
    let re = -0.5 * (beta - gamma).norm_sqr();
    if re < LOG_UNDERFLOW {
        return C64::new(0.0, 0.0);
    }
    let im = (beta.conj() * gamma).im;
    C64::from_polar(re.exp(), im)
}

/// Superposition evaluated at one instant: Σ c_k |α_k⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSuperposition {
    pub coeffs: Vec<C64>,
    pub alphas: Vec<C64>,
}

impl PointSuperposition {
    pub fn new(coeffs: Vec<C64>, alphas: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() != alphas.len() {
            return Err(Error::Config("superposition needs matching, non-empty lists".into()));
        }
        Ok(Self { coeffs, alphas })
    }

    pub fn coherent(alpha: C64) -> Self {
        Self { coeffs: vec![C64::new(1.0, 0.0)], alphas: vec![alpha] }
    }

    /// Σ_jk c_j* c_k ⟨α_j|α_k⟩.
    pub fn norm_sqr(&self) -> f64 {
        self.raw_moment(0, 0).re
    }

    pub fn norm(&self) -> Result<f64> {
        let n2 = self.norm_sqr();
        let n = n2.max(0.0).sqrt();
        if n < NULL_NORM {
            return Err(Error::NullState(format!("superposition norm {n:e}")));
        }
        Ok(n)
    }

    /// Σ_jk c_j* c_k (α_j*)^p α_k^q ⟨α_j|α_k⟩ without dividing by the norm.
    pub fn raw_moment(&self, p: u32, q: u32) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        for (cj, aj) in self.coeffs.iter().zip(&self.alphas) {
            let left = cj.conj() * aj.conj().powu(p);
            for (ck, ak) in self.coeffs.iter().zip(&self.alphas) {
                s += left * ck * ak.powu(q) * coherent_overlap(*aj, *ak);
            }
        }
        s
    }

    /// ⟨(a†)^p a^q⟩ of the normalized state.
    pub fn moment(&self, p: u32, q: u32) -> Result<C64> {
        let n = self.norm()?;
        Ok(self.raw_moment(p, q) / (n * n))
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm()?;
        Ok(Self { coeffs: self.coeffs.iter().map(|c| c / n).collect(), alphas: self.alphas.clone() })
    }

    /// Fock rendering Σ c_k coherent_fock(α_k), without renormalisation.
    pub fn to_fock(&self, n_max: usize) -> Result<FockVector> {
        let mut out = FockVector::zeros(vec![n_max]);
        for (c, a) in self.coeffs.iter().zip(&self.alphas) {
            out = out.axpy(*c, &coherent_fock(*a, n_max)?)?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherentSuperposition {
    pub components: Vec<(C64, CompositeAmplitude)>,
    /// Coefficients already carry the normalisation.
    pub normalized: bool,
}

impl CoherentSuperposition {
    pub fn at(&self, t: f64) -> PointSuperposition {
        PointSuperposition {
            coeffs: self.components.iter().map(|(c, _)| *c).collect(),
            alphas: self.components.iter().map(|(_, a)| a.evaluate(t)).collect(),
        }
    }
}

pub fn superposition_norm(s: &CoherentSuperposition, t: f64) -> Result<f64> {
    if s.components.is_empty() {
        return Err(Error::Config("empty superposition".into()));
    }
    s.at(t).norm()
}

pub fn normal_ordered_moment(s: &CoherentSuperposition, p: u32, q: u32, t: f64) -> Result<C64> {
    s.at(t).moment(p, q)
}

//! Builders for the interferometer output, the conditioned GCSS, the
//! classical mixture and parity cats.

use serde::{Deserialize, Serialize};

use crate::coherent::{coherent_overlap, CoherentSuperposition, CompositeAmplitude, PointSuperposition, PulseParams, Term};
use crate::fock::{FockDensity, FockVector};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcssParams {
    pub alpha: C64,
    pub delta_alpha: C64,
    pub tau: f64,
    pub pulse: PulseParams,
    /// Harmonic-vacuum overlap scalar multiplying ξ_IR; 1 is the literal reading.
    pub xi_q_factor: f64,
}

impl GcssParams {
    /// Real α and a depletion of magnitude `delta_abs`, taken negative.
    pub fn with_depletion(alpha: f64, delta_abs: f64, tau: f64) -> Self {
        Self {
            alpha: C64::new(alpha, 0.0),
            delta_alpha: C64::new(-delta_abs.abs(), 0.0),
            tau,
            pulse: PulseParams::default(),
            xi_q_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        if self.delta_alpha.norm() > self.alpha.norm() {
            return Err(Error::Config("|delta_alpha| must not exceed |alpha|".into()));
        }
        if !(0.0..=1.0).contains(&self.xi_q_factor) {
            return Err(Error::Config(format!("xi_q_factor {} outside [0, 1]", self.xi_q_factor)));
        }
        if !self.tau.is_finite() {
            return Err(Error::Config("tau must be finite".into()));
        }
        Ok(())
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self { tau, ..*self }
    }

    /// ½(α+δα)[f(t+τ/2)e^{iω(t+τ/2)} + f(t−τ/2)e^{iω(t−τ/2)}].
    pub fn psi_amplitude(&self) -> CompositeAmplitude {
        let half = 0.5 * (self.alpha + self.delta_alpha);
        let h = 0.5 * self.tau;
        CompositeAmplitude {
            terms: vec![
                Term { scale: half, center: -h, phase_offset: -h },
                Term { scale: half, center: h, phase_offset: h },
            ],
            pulse: self.pulse,
        }
    }

    /// α(t) = α f(t) e^{iωt}.
    pub fn reference_amplitude(&self) -> CompositeAmplitude {
        CompositeAmplitude::single(self.alpha, self.pulse)
    }

    /// (ψ(t,τ), α(t)) evaluated at `t`.
    pub fn amplitudes_at(&self, t: f64) -> (C64, C64) {
        (self.psi_amplitude().evaluate(t), self.reference_amplitude().evaluate(t))
    }

    /// ξ_IR(t,τ) = ⟨α(t)|ψ(t,τ)⟩.
    pub fn xi_ir(&self, t: f64) -> C64 {
        let (psi, a) = self.amplitudes_at(t);
        coherent_overlap(a, psi)
    }
}

/// Single coherent component carrying the Eq.-(1)-type interferometer amplitude.
pub fn interferometer_state(p: &GcssParams) -> CoherentSuperposition {
    CoherentSuperposition { components: vec![(C64::new(1.0, 0.0), p.psi_amplitude())], normalized: true }
}

/// Squared norm of |ψ⟩ − ξ_q ξ |α(t)⟩, computed so that it vanishes exactly
/// when the components coincide.
fn conditioned_norm_sqr(psi: C64, a: C64, xi_q: f64) -> f64 {
    let d = (psi - a).norm_sqr();
    let k = 2.0 * xi_q - xi_q * xi_q;
    (1.0 - k) + k * (-(-d).exp_m1())
}

/// Unnormalized conditioned state |ψ⟩ − ξ_q ξ_IR |α(t)⟩ at one instant.
///
/// Its squared norm is the weight of the conditioned branch.
pub fn gcss_point(p: &GcssParams, t: f64) -> PointSuperposition {
    let (psi, a) = p.amplitudes_at(t);
    let xi = coherent_overlap(a, psi);
    PointSuperposition { coeffs: vec![C64::new(1.0, 0.0), -p.xi_q_factor * xi], alphas: vec![psi, a] }
}

/// Normalized GCSS at time `t`.
pub fn gcss_state(p: &GcssParams, t: f64) -> Result<CoherentSuperposition> {
    p.validate()?;
    let (psi, a) = p.amplitudes_at(t);
    let n = conditioned_norm_sqr(psi, a, p.xi_q_factor).max(0.0).sqrt();
    if n < 1e-12 {
        return Err(Error::NullState(format!("GCSS norm {n:e} at t = {t}, tau = {}", p.tau)));
    }
    let xi = coherent_overlap(a, psi);
    Ok(CoherentSuperposition {
        components: vec![
            (C64::new(1.0 / n, 0.0), p.psi_amplitude()),
            (-p.xi_q_factor * xi / n, p.reference_amplitude()),
        ],
        normalized: true,
    })
}

/// Normalized GCSS at one instant.
pub fn gcss_point_normalized(p: &GcssParams, t: f64) -> Result<PointSuperposition> {
    let (psi, a) = p.amplitudes_at(t);
    let n = conditioned_norm_sqr(psi, a, p.xi_q_factor).max(0.0).sqrt();
    if n < 1e-12 {
        return Err(Error::NullState(format!("GCSS norm {n:e} at t = {t}, tau = {}", p.tau)));
    }
    let xi = coherent_overlap(a, psi);
    Ok(PointSuperposition { coeffs: vec![C64::new(1.0 / n, 0.0), -p.xi_q_factor * xi / n], alphas: vec![psi, a] })
}

/// Two-component incoherent mixture of coherent states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mixture {
    pub weights: [f64; 2],
    pub alphas: [C64; 2],
}

impl Mixture {
    pub fn moment(&self, p: u32, q: u32) -> C64 {
        self.weights
            .iter()
            .zip(&self.alphas)
            .map(|(w, a)| *w * a.conj().powu(p) * a.powu(q))
            .sum()
    }

    pub fn to_fock(&self, n_max: usize) -> Result<FockDensity> {
        let v0 = crate::fock::coherent_fock(self.alphas[0], n_max)?;
        let v1 = crate::fock::coherent_fock(self.alphas[1], n_max)?;
        FockDensity::mixture(&[(self.weights[0], &v0), (self.weights[1], &v1)])
    }
}

/// |ψ⟩⟨ψ| + |ξ_IR|²|α⟩⟨α|, normalized by 1 + |ξ_IR|².
pub fn mixture_point(p: &GcssParams, t: f64) -> Mixture {
    let (psi, a) = p.amplitudes_at(t);
    let x2 = coherent_overlap(a, psi).norm_sqr();
    Mixture { weights: [1.0 / (1.0 + x2), x2 / (1.0 + x2)], alphas: [psi, a] }
}

pub fn mixed_state(p: &GcssParams, t: f64, n_max: usize) -> Result<(FockDensity, Mixture)> {
    p.validate()?;
    let m = mixture_point(p, t);
    Ok((m.to_fock(n_max)?, m))
}

/// N(|α⟩ ± |−α⟩), static amplitudes (evaluate at t = 0).
pub fn parity_cat(alpha: C64, sign: i32) -> Result<CoherentSuperposition> {
    let s = match sign {
        1 => 1.0,
        -1 => -1.0,
        _ => return Err(Error::Config(format!("parity sign must be +1 or -1, got {sign}"))),
    };
    let raw = PointSuperposition { coeffs: vec![C64::new(1.0, 0.0), C64::new(s, 0.0)], alphas: vec![alpha, -alpha] };
    let n = raw.norm()?;
    Ok(CoherentSuperposition {
        components: vec![
            (C64::new(1.0 / n, 0.0), CompositeAmplitude::constant(alpha)),
            (C64::new(s / n, 0.0), CompositeAmplitude::constant(-alpha)),
        ],
        normalized: true,
    })
}

/// Fock rendering of the normalized GCSS at `t`, not renormalized after truncation.
pub fn gcss_fock(p: &GcssParams, t: f64, n_max: usize) -> Result<FockVector> {
    gcss_point_normalized(p, t)?.to_fock(n_max)
}

/// |δα| ∝ √Y: depletion magnitude for a harmonic-yield setting.
pub fn depletion_from_yield(yield_value: f64, constant: f64) -> Result<f64> {
    if yield_value < 0.0 || constant < 0.0 {
        return Err(Error::Config("yield and proportionality constant must be >= 0".into()));
    }
    Ok(constant * yield_value.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{ladder_operators, FockState};

    #[test]
    fn zero_delay_merges_terms() {
        let p = GcssParams::with_depletion(12.0, 0.24, 0.0);
        let s = interferometer_state(&p);
        let t = 3.7;
        let expect = p.alpha + p.delta_alpha;
        let expect = expect * p.pulse.envelope_at(t) * C64::from_polar(1.0, p.pulse.omega() * t);
        assert!((s.at(t).alphas[0] - expect).norm() < 1e-12);
    }

    #[test]
    fn long_delay_single_arm() {
        let p = GcssParams::with_depletion(12.0, 0.24, 400.0);
        let a = p.psi_amplitude().evaluate(-200.0);
        assert!((a.norm_sqr() - 11.76f64.powi(2) / 4.0).abs() < 1e-9);
    }

    #[test]
    fn peak_photon_number() {
        let p = GcssParams::with_depletion(12.0, 0.24, 0.0);
        let n = interferometer_state(&p).at(0.0).moment(1, 1).unwrap().re;
        assert!((n - 138.2976).abs() < 1e-9);
    }

    #[test]
    fn degenerate_gcss_errors() {
        let p = GcssParams::with_depletion(12.0, 0.0, 0.0);
        assert!(matches!(gcss_state(&p, 0.0), Err(Error::NullState(_))));
    }

    #[test]
    fn xi_at_peak() {
        let p = GcssParams::with_depletion(12.0, 1.44, 0.0);
        assert!((p.xi_ir(0.0).norm() - (-1.0368f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn gcss_normalized() {
        let p = GcssParams::with_depletion(12.0, 0.24, 7.0);
        for &t in &[-20.0, -3.0, 0.0, 11.0] {
            assert!((gcss_state(&p, t).unwrap().at(t).norm().unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn large_depletion_drops_reference() {
        let p = GcssParams::with_depletion(12.0, 6.0, 0.0);
        let s = gcss_state(&p, 0.0).unwrap();
        assert!(s.components[1].0.norm() < 1e-6);
    }

    #[test]
    fn mixture_is_mixed() {
        let p = GcssParams::with_depletion(3.0, 0.8, 0.0);
        let (rho, m) = mixed_state(&p, 0.0, 60).unwrap();
        assert!(m.weights[1] > 0.0);
        assert!((rho.trace().re - 1.0).abs() < 1e-9);
        assert!(rho.purity() < 1.0 - 1e-3);
    }

    #[test]
    fn mixture_i_squared_is_weighted_sum() {
        let p = GcssParams::with_depletion(3.0, 0.8, 2.0);
        let m = mixture_point(&p, 0.5);
        let i2 = |a: C64| a.norm_sqr().powi(2) + a.norm_sqr();
        let direct = m.weights[0] * i2(m.alphas[0]) + m.weights[1] * i2(m.alphas[1]);
        let via = (m.moment(2, 2) + m.moment(1, 1)).re;
        assert!((direct - via).abs() < 1e-10);
    }

    #[test]
    fn cats() {
        let even0 = parity_cat(C64::new(0.0, 0.0), 1).unwrap().at(0.0);
        assert!((even0.moment(1, 1).unwrap().re).abs() < 1e-15);
        assert!(parity_cat(C64::new(0.0, 0.0), -1).is_err());
        let odd = parity_cat(C64::new(2.0, 0.0), -1).unwrap().at(0.0).to_fock(60).unwrap();
        for (n, c) in odd.amplitudes().iter().enumerate() {
            if n % 2 == 0 {
                assert!(c.norm() < 1e-14);
            }
        }
        let even = parity_cat(C64::new(2.0, 0.0), 1).unwrap();
        let nn = even.components[0].0.re.powi(2);
        assert!((nn - 1.0 / (2.0 * (1.0 + (-8f64).exp()))).abs() < 1e-14);
        let v = even.at(0.0).to_fock(60).unwrap();
        assert!((v.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gcss_fock_small_amplitude() {
        let p = GcssParams::with_depletion(2.5, 0.6, 0.0);
        let v = gcss_fock(&p, 0.0, 50).unwrap();
        assert!((v.norm_sqr() - 1.0).abs() < 1e-10);
        let (_, _, n) = ladder_operators(50).unwrap();
        let analytic = gcss_state(&p, 0.0).unwrap().at(0.0).moment(1, 1).unwrap().re;
        assert!((v.expect(&n).unwrap().re - analytic).abs() < 1e-9);
    }
}

//! Wigner functions on a rectangular phase-space grid.
//!
//! Convention: γ = (x + ip)/√2, ∫∫W dx dp = 1, vacuum W(0,0) = 1/π,
//! |α⟩ peaks at (√2 Re α, √2 Im α).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherent::{PointSuperposition, LOG_UNDERFLOW};
use crate::fock::FockDensity;
use crate::numeric::linspace;
use crate::{Error, Result, C64};

use std::f64::consts::{FRAC_1_PI, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
}

impl PhaseGrid {
    pub fn new(x_min: f64, x_max: f64, p_min: f64, p_max: f64, nx: usize, np: usize) -> Result<Self> {
        let g = Self { x_min, x_max, p_min, p_max, nx, np };
        g.validate()?;
        Ok(g)
    }

    /// Square grid of `n × n` points spanning `center ± half_width`.
    pub fn centered(center: (f64, f64), half_width: f64, n: usize) -> Result<Self> {
        Self::new(center.0 - half_width, center.0 + half_width, center.1 - half_width, center.1 + half_width, n, n)
    }

    /// Grid centered on the phase-space location of amplitude `alpha`.
    pub fn around_amplitude(alpha: C64, half_width: f64, n: usize) -> Result<Self> {
        Self::centered((SQRT_2 * alpha.re, SQRT_2 * alpha.im), half_width, n)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.p_min, self.p_max].iter().all(|v| v.is_finite());
        if !finite || self.x_max <= self.x_min || self.p_max <= self.p_min {
            return Err(Error::Config("phase grid ranges must be finite and increasing".into()));
        }
        if self.nx < 16 || self.np < 16 {
            return Err(Error::Config("phase grid needs at least 16 points per axis".into()));
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.nx)
    }

    pub fn ps(&self) -> Vec<f64> {
        linspace(self.p_min, self.p_max, self.np)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.p_min + self.p_max))
    }
}

/// Values stored x-major: `values[ix * np + ip]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerField {
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
}

impl WignerField {
    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.grid.np + ip]
    }

    /// Trapezoid estimate of ∫∫W dx dp.
    pub fn integral(&self) -> f64 {
        self.weighted_sum(|w| w)
    }

    fn weighted_sum(&self, f: impl Fn(f64) -> f64) -> f64 {
        let (nx, np) = (self.grid.nx, self.grid.np);
        let mut s = 0.0;
        for ix in 0..nx {
            let wx = if ix == 0 || ix == nx - 1 { 0.5 } else { 1.0 };
            for ip in 0..np {
                let wp = if ip == 0 || ip == np - 1 { 0.5 } else { 1.0 };
                s += wx * wp * f(self.at(ix, ip));
            }
        }
        s * self.grid.dx() * self.grid.dp()
    }

    /// ∫W dp for every x.
    pub fn x_marginal(&self) -> Vec<f64> {
        let np = self.grid.np;
        (0..self.grid.nx)
            .map(|ix| {
                let row = &self.values[ix * np..(ix + 1) * np];
                crate::numeric::trapezoid(row, self.grid.dp())
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn evaluate_grid(grid: &PhaseGrid, f: impl Fn(f64, f64) -> f64 + Sync) -> WignerField {
    let xs = grid.xs();
    let ps = grid.ps();
    let values: Vec<f64> = xs
        .par_iter()
        .flat_map_iter(|&x| ps.iter().map(move |&p| (x, p)).collect::<Vec<_>>())
        .map(|(x, p)| f(x, p))
        .collect();
    WignerField { grid: *grid, values }
}

/// Closed-form Wigner function of Σ c_j|α_j⟩, normalized by the state norm.
///
/// W_{|a⟩⟨b|}(γ) = (1/π) ⟨b|a⟩ exp(−2(γ−a)(γ*−b*)), summed with c_j c_k*.
pub fn wigner_analytic(s: &PointSuperposition, grid: &PhaseGrid) -> Result<WignerField> {
    grid.validate()?;
    let n2 = s.norm()?.powi(2);
    let terms: Vec<(C64, C64, C64)> = s
        .coeffs
        .iter()
        .zip(&s.alphas)
        .flat_map(|(cj, aj)| s.coeffs.iter().zip(&s.alphas).map(move |(ck, ak)| (cj * ck.conj(), *aj, *ak)))
        .collect();
    Ok(evaluate_grid(grid, |x, p| {
        let g = C64::new(x, p) / SQRT_2;
        let mut w = C64::new(0.0, 0.0);
        for &(c, a, b) in &terms {
            // ln⟨b|a⟩ − 2(γ−a)(γ*−b*)
            let e = -0.5 * (a.norm_sqr() + b.norm_sqr()) + b.conj() * a - 2.0 * (g - a) * (g.conj() - b.conj());
            if e.re > LOG_UNDERFLOW {
                w += c * e.exp();
            }
        }
        w.re * FRAC_1_PI / n2
    }))
}

/// Displaced-parity Wigner function (1/π)Tr[ρ D(γ) Π D†(γ)] of a single-mode density,
/// via the Laguerre recurrence on the matrix elements.
pub fn wigner_fock(rho: &FockDensity, grid: &PhaseGrid) -> Result<WignerField> {
    grid.validate()?;
    if rho.shape().len() != 1 {
        return Err(Error::Config("Wigner function needs a single-mode density".into()));
    }
    let leak = rho.leakage();
    if leak > 1e-6 {
        return Err(Error::Truncation(format!("density leakage {leak:e} exceeds 1e-6")));
    }
    let d = rho.dim();
    let m = rho.matrix().to_vec();
    Ok(evaluate_grid(grid, |x, p| parity_point(&m, d, C64::new(x, p) / SQRT_2)))
}

fn parity_point(rho: &[C64], d: usize, a: C64) -> f64 {
    let a2 = 2.0 * a;
    let mut wl = vec![C64::new(0.0, 0.0); d];
    wl[0] = C64::new((-2.0 * a.norm_sqr()).exp() * FRAC_1_PI, 0.0);
    let mut w = (rho[0] * wl[0]).re;
    for n in 1..d {
        wl[n] = a2 * wl[n - 1] / (n as f64).sqrt();
        w += 2.0 * (rho[n] * wl[n]).re;
    }
    for mm in 1..d {
        let sm = (mm as f64).sqrt();
        let mut temp = wl[mm];
        wl[mm] = (a2.conj() * temp - sm * wl[mm - 1]) / sm;
        w += (rho[mm * d + mm] * wl[mm]).re;
        for n in mm + 1..d {
            let t2 = (a2 * wl[n - 1] - sm * temp) / (n as f64).sqrt();
            temp = wl[n];
            wl[n] = t2;
            w += 2.0 * (rho[mm * d + n] * wl[n]).re;
        }
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerExtrema {
    pub min: f64,
    pub min_at: (f64, f64),
    pub max: f64,
    pub max_at: (f64, f64),
    /// ∫∫ max(−W, 0) dx dp.
    pub negative_volume: f64,
}

pub fn wigner_extrema(w: &WignerField) -> WignerExtrema {
    let xs = w.grid.xs();
    let ps = w.grid.ps();
    let (mut imin, mut imax) = (0, 0);
    for (k, v) in w.values.iter().enumerate() {
        if *v < w.values[imin] {
            imin = k;
        }
        if *v > w.values[imax] {
            imax = k;
        }
    }
    let loc = |k: usize| (xs[k / w.grid.np], ps[k % w.grid.np]);
    WignerExtrema {
        min: w.values[imin],
        min_at: loc(imin),
        max: w.values[imax],
        max_at: loc(imax),
        negative_volume: w.weighted_sum(|v| (-v).max(0.0)),
    }
}

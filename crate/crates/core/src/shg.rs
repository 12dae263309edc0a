//! Two-mode second-harmonic generation, H = χ(a_ω² a†_2ω + a†_ω² a_2ω), ħ = 1.

use serde::{Deserialize, Serialize};

use crate::coherent::Envelope;
use crate::fock::{coherent_fock, expm, mode_number_operator, reduce_pure, FockDensity, FockOperator, FockState, FockVector, Keep, Tensor};
use crate::states::{gcss_fock, GcssParams};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShgSystem {
    pub n_max_w: usize,
    pub n_max_2w: usize,
    pub chi: f64,
    pub t_final: f64,
}

impl Default for ShgSystem {
    fn default() -> Self {
        Self { n_max_w: 60, n_max_2w: 30, chi: 1.0, t_final: 0.2 }
    }
}

impl ShgSystem {
    pub fn validate(&self) -> Result<()> {
        if self.n_max_w < 1 || self.n_max_2w < 1 {
            return Err(Error::Config("SHG cutoffs must be >= 1".into()));
        }
        if !(self.chi > 0.0) || !(self.t_final >= 0.0) {
            return Err(Error::Config("SHG needs chi > 0 and t_final >= 0".into()));
        }
        Ok(())
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n_max_w, self.n_max_2w]
    }
}

/// Sparse Hamiltonian on the (fundamental ⊗ harmonic) space.
pub fn build_hamiltonian(sys: &ShgSystem) -> Result<FockOperator> {
    sys.validate()?;
    let (nw, n2) = (sys.n_max_w, sys.n_max_2w);
    let idx = |i: usize, j: usize| i * (n2 + 1) + j;
    let mut t = Vec::new();
    for i in 2..=nw {
        for j in 0..n2 {
            // ⟨i−2, j+1| a_ω² a†_2ω |i, j⟩
            let v = sys.chi * ((i * (i - 1)) as f64).sqrt() * ((j + 1) as f64).sqrt();
            t.push((idx(i - 2, j + 1), idx(i, j), C64::new(v, 0.0)));
            t.push((idx(i, j), idx(i - 2, j + 1), C64::new(v, 0.0)));
        }
    }
    FockOperator::sparse(sys.shape(), t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Coherent,
    Gcss,
}

/// Fundamental-mode input ⊗ harmonic vacuum, with τ = 0 and a flat envelope.
pub fn initial_state(kind: InputKind, params: &GcssParams, sys: &ShgSystem) -> Result<FockVector> {
    sys.validate()?;
    let mut p = params.with_tau(0.0);
    p.pulse.envelope = Envelope::Flat;
    let fundamental = match kind {
        InputKind::Coherent => coherent_fock(p.alpha, sys.n_max_w)?,
        InputKind::Gcss => gcss_fock(&p, 0.0, sys.n_max_w)?,
    };
    let lost = 1.0 - fundamental.norm_sqr();
    if lost.abs() > 1e-8 {
        return Err(Error::Truncation(format!("n_max_w = {} drops {lost:e} of the input norm", sys.n_max_w)));
    }
    Ok(fundamental.tensor(&FockVector::vacuum(sys.n_max_2w)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShgTrajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<FockVector>,
    pub n_w: Vec<f64>,
    pub n_2w: Vec<f64>,
    /// ⟨n_ω + 2 n_2ω⟩.
    pub conserved: Vec<f64>,
    pub energy: Vec<f64>,
    pub norm: Vec<f64>,
    pub leakage: Vec<f64>,
    /// RK4 steps used over the full run.
    pub steps: usize,
}

impl ShgTrajectory {
    pub fn final_state(&self) -> &FockVector {
        self.states.last().expect("trajectory has at least the initial snapshot")
    }

    /// Largest relative excursion of N(t).
    pub fn conserved_drift(&self) -> f64 {
        let n0 = self.conserved[0];
        let scale = if n0.abs() > 0.0 { n0.abs() } else { 1.0 };
        self.conserved.iter().map(|n| (n - n0).abs() / scale).fold(0.0, f64::max)
    }

    pub fn norm_drift(&self) -> f64 {
        let n0 = self.norm[0];
        self.norm.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max)
    }

    /// Largest excursion of ⟨H⟩ relative to `scale`.
    pub fn energy_drift(&self, scale: f64) -> f64 {
        let e0 = self.energy[0];
        let s = if scale > 0.0 { scale } else { 1.0 };
        self.energy.iter().map(|e| (e - e0).abs() / s).fold(0.0, f64::max)
    }
}

struct Observables {
    n_w: FockOperator,
    n_2w: FockOperator,
}

fn rk4_step(h: &FockOperator, psi: &mut [C64], dt: f64, buf: &mut [Vec<C64>; 5]) {
    let d = psi.len();
    let mi = C64::new(0.0, -1.0);
    let [k1, k2, k3, k4, tmp] = buf;
    h.apply_into(psi, k1);
    k1.iter_mut().for_each(|v| *v *= mi);
    for k in 0..d {
        tmp[k] = psi[k] + 0.5 * dt * k1[k];
    }
    h.apply_into(tmp, k2);
    k2.iter_mut().for_each(|v| *v *= mi);
    for k in 0..d {
        tmp[k] = psi[k] + 0.5 * dt * k2[k];
    }
    h.apply_into(tmp, k3);
    k3.iter_mut().for_each(|v| *v *= mi);
    for k in 0..d {
        tmp[k] = psi[k] + dt * k3[k];
    }
    h.apply_into(tmp, k4);
    k4.iter_mut().for_each(|v| *v *= mi);
    for k in 0..d {
        psi[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
}

fn row_sum_bound(h: &FockOperator) -> f64 {
    let d = h.dim();
    // H has non-negative entries, so H·1 bounds its spectral radius.
    let ones = vec![C64::new(1.0, 0.0); d];
    let mut out = vec![C64::new(0.0, 0.0); d];
    h.apply_into(&ones, &mut out);
    out.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn run(h: &FockOperator, psi0: &FockVector, t_final: f64, snapshots: usize, per_interval: usize, obs: &Observables) -> Result<ShgTrajectory> {
    let d = psi0.dim();
    let mut psi = psi0.amplitudes().to_vec();
    let mut buf = [vec![C64::new(0.0, 0.0); d], vec![C64::new(0.0, 0.0); d], vec![C64::new(0.0, 0.0); d], vec![C64::new(0.0, 0.0); d], vec![C64::new(0.0, 0.0); d]];
    let dt = t_final / (snapshots * per_interval) as f64;
    let mut traj = ShgTrajectory {
        times: Vec::with_capacity(snapshots + 1),
        states: Vec::with_capacity(snapshots + 1),
        n_w: vec![],
        n_2w: vec![],
        conserved: vec![],
        energy: vec![],
        norm: vec![],
        leakage: vec![],
        steps: snapshots * per_interval,
    };
    let record = |traj: &mut ShgTrajectory, t: f64, psi: &[C64]| -> Result<()> {
        let v = FockVector::with_shape(psi0.shape().to_vec(), psi.to_vec())?;
        let nw = v.expect(&obs.n_w)?.re;
        let n2 = v.expect(&obs.n_2w)?.re;
        traj.times.push(t);
        traj.n_w.push(nw);
        traj.n_2w.push(n2);
        traj.conserved.push(nw + 2.0 * n2);
        traj.energy.push(v.expect(h)?.re);
        traj.norm.push(v.norm_sqr());
        traj.leakage.push(boundary_population(&v));
        traj.states.push(v);
        Ok(())
    };
    record(&mut traj, 0.0, &psi)?;
    for s in 1..=snapshots {
        for _ in 0..per_interval {
            rk4_step(h, &mut psi, dt, &mut buf);
        }
        record(&mut traj, t_final * s as f64 / snapshots as f64, &psi)?;
    }
    Ok(traj)
}

/// Reference for relative ⟨H⟩ drift: max(|⟨H⟩|, ‖Hψ₀‖). ⟨H⟩ itself vanishes
/// for a coherent fundamental with harmonic vacuum.
pub fn energy_scale(h: &FockOperator, psi0: &FockVector) -> Result<f64> {
    let h_psi = h.apply(psi0)?.norm_sqr().sqrt();
    Ok(psi0.expect(h)?.re.abs().max(h_psi))
}

/// RK4 evolution of `psi0` to `sys.t_final`, halving the step until norm,
/// N(t) and ⟨H⟩ drifts are all within `tol`. The state is never renormalized.
pub fn evolve(h: &FockOperator, psi0: &FockVector, sys: &ShgSystem, snapshots: usize, tol: f64) -> Result<ShgTrajectory> {
    sys.validate()?;
    if !(tol >= 1e-12) {
        return Err(Error::Config(format!("integrator tolerance {tol:e} below 1e-12")));
    }
    if snapshots == 0 {
        return Err(Error::Config("need at least one snapshot".into()));
    }
    if h.dim() != psi0.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: psi0.dim() });
    }
    if (psi0.norm_sqr() - 1.0).abs() > 1e-8 {
        return Err(Error::Config(format!("initial state norm² {} is not 1", psi0.norm_sqr())));
    }
    let shape = psi0.shape().to_vec();
    if shape.len() != 2 {
        return Err(Error::Config("SHG evolution needs a two-mode state".into()));
    }
    let obs = Observables { n_w: mode_number_operator(&shape, 0), n_2w: mode_number_operator(&shape, 1) };
    let e_scale = energy_scale(h, psi0)?;
    let bound = row_sum_bound(h);
    let interval = sys.t_final / snapshots as f64;
    let mut per = ((interval * bound / 0.5).ceil() as usize).max(1);
    let mut worst = f64::INFINITY;
    for _ in 0..14 {
        let traj = run(h, psi0, sys.t_final, snapshots, per, &obs)?;
        worst = traj.norm_drift().max(traj.conserved_drift()).max(traj.energy_drift(e_scale));
        if worst <= tol {
            if let Some((k, l)) = traj.leakage.iter().enumerate().find(|(_, l)| **l > 1e-6) {
                return Err(Error::Truncation(format!(
                    "boundary population {l:e} at t = {} exceeds 1e-6",
                    traj.times[k]
                )));
            }
            return Ok(traj);
        }
        per *= 2;
    }
    Err(Error::Integrator(format!("conservation drift {worst:e} above tolerance {tol:e} after step refinement")))
}

/// exp(−iHt)ψ by dense matrix exponential; small systems only.
pub fn exact_evolution(h: &FockOperator, psi0: &FockVector, t: f64) -> Result<FockVector> {
    let d = h.dim();
    if d > 700 {
        return Err(Error::Config(format!("dense propagator limited to dimension 700, got {d}")));
    }
    let g: Vec<C64> = h.to_matrix().iter().map(|v| v * C64::new(0.0, -t)).collect();
    let u = FockOperator::dense(h.shape().to_vec(), expm(&g, d))?;
    u.apply(psi0)
}

/// Population on the rows where truncation removes couplings: the top two
/// fundamental levels (reached from above by a_ω²) and the top harmonic level.
pub fn boundary_population(v: &FockVector) -> f64 {
    let (nw, n2) = (v.shape()[0], v.shape()[1]);
    v.amplitudes()
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let (i, j) = crate::fock::split_index(*k, n2);
            i + 1 >= nw || j == n2
        })
        .map(|(_, c)| c.norm_sqr())
        .sum()
}

/// Reduced harmonic-mode density of the final snapshot.
pub fn second_harmonic_state(traj: &ShgTrajectory) -> Result<FockDensity> {
    let psi = traj.final_state();
    let leak = boundary_population(psi);
    if leak > 1e-6 {
        return Err(Error::Truncation(format!("final boundary population {leak:e} exceeds 1e-6")));
    }
    reduce_pure(psi, Keep::Second)
}

/// Interaction time at which ⟨n_2ω⟩ first reaches `target`, by bisection.
pub fn tune_interaction_time(h: &FockOperator, psi0: &FockVector, sys: &ShgSystem, target: f64, tol: f64) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::Config("target harmonic photon number must be > 0".into()));
    }
    let n2_at = |t: f64| -> Result<f64> {
        let s = ShgSystem { t_final: t, ..*sys };
        Ok(*evolve(h, psi0, &s, 1, tol)?.n_2w.last().unwrap())
    };
    let mut lo = 0.0;
    let mut hi = 0.05 / sys.chi;
    let mut grown = 0;
    while n2_at(hi)? < target {
        lo = hi;
        hi *= 2.0;
        grown += 1;
        if grown > 30 {
            return Err(Error::Config(format!("harmonic photon number never reaches {target}")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if n2_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

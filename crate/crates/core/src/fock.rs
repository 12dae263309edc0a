//! Truncated Fock-space kernel.
//!
//! Multi-mode objects carry a `shape` of per-mode cutoffs. Two-mode index
//! convention is fundamental first: `k = i * (n_max_b + 1) + j`.

use crate::numeric::ln_factorials;
use crate::{Error, Result, C64};

fn dim_of(shape: &[usize]) -> usize {
    shape.iter().map(|n| n + 1).product()
}

/// Split a flat two-mode index into `(i, j)`.
pub fn split_index(k: usize, n_max_b: usize) -> (usize, usize) {
    (k / (n_max_b + 1), k % (n_max_b + 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    shape: Vec<usize>,
    amps: Vec<C64>,
}

impl FockVector {
    pub fn new(n_max: usize, amps: Vec<C64>) -> Result<Self> {
        Self::with_shape(vec![n_max], amps)
    }

    pub fn with_shape(shape: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let d = dim_of(&shape);
        if amps.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: amps.len() });
        }
        Ok(Self { shape, amps })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let d = dim_of(&shape);
        Self { shape, amps: vec![C64::new(0.0, 0.0); d] }
    }

    /// Number state |n⟩ on a single mode.
    pub fn basis(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::Truncation(format!("|{n}⟩ above cutoff {n_max}")));
        }
        let mut v = Self::zeros(vec![n_max]);
        v.amps[n] = C64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn vacuum(n_max: usize) -> Self {
        let mut v = Self::zeros(vec![n_max]);
        v.amps[0] = C64::new(1.0, 0.0);
        v
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Cutoff of the first mode.
    pub fn n_max(&self) -> usize {
        self.shape[0]
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { shape: self.shape.clone(), amps: self.amps.iter().map(|a| a * c).collect() }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: C64, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let amps = self.amps.iter().zip(&other.amps).map(|(a, b)| a + c * b).collect();
        Ok(Self { shape: self.shape.clone(), amps })
    }

    /// Population in the top two levels of any mode.
    pub fn leakage(&self) -> f64 {
        let mut total = 0.0;
        for (k, c) in self.amps.iter().enumerate() {
            if at_boundary(k, &self.shape) {
                total += c.norm_sqr();
            }
        }
        total
    }
}

fn at_boundary(mut k: usize, shape: &[usize]) -> bool {
    for &n in shape.iter().rev() {
        let i = k % (n + 1);
        k /= n + 1;
        if i + 1 >= n {
            return true;
        }
    }
    false
}

/// Coherent state |α⟩ truncated at `n_max`, not renormalised.
pub fn coherent_fock(alpha: C64, n_max: usize) -> Result<FockVector> {
    let n_bar = alpha.norm_sqr();
    if n_bar > n_max as f64 {
        return Err(Error::Truncation(format!(
            "|alpha|^2 = {n_bar} exceeds n_max = {n_max}"
        )));
    }
    let mut amps = vec![C64::new(0.0, 0.0); n_max + 1];
    if n_bar == 0.0 {
        amps[0] = C64::new(1.0, 0.0);
        return FockVector::new(n_max, amps);
    }
    let lf = ln_factorials(n_max);
    let (r, phi) = alpha.to_polar();
    let ln_r = r.ln();
    for (n, a) in amps.iter_mut().enumerate() {
        let ln_mag = -0.5 * n_bar + n as f64 * ln_r - 0.5 * lf[n];
        *a = C64::from_polar(ln_mag.exp(), n as f64 * phi);
    }
    FockVector::new(n_max, amps)
}

/// Compressed sparse row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    fn from_triplets(dim: usize, mut t: Vec<(usize, usize, C64)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { row_ptr, cols, vals }
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(Vec<C64>),
    Sparse(Csr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    shape: Vec<usize>,
    storage: Storage,
}

impl FockOperator {
    /// Row-major dense matrix.
    pub fn dense(shape: Vec<usize>, m: Vec<C64>) -> Result<Self> {
        let d = dim_of(&shape);
        if m.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: m.len() });
        }
        Ok(Self { shape, storage: Storage::Dense(m) })
    }

    /// Sparse matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn sparse(shape: Vec<usize>, triplets: Vec<(usize, usize, C64)>) -> Result<Self> {
        let d = dim_of(&shape);
        if let Some(&(r, c, _)) = triplets.iter().find(|&&(r, c, _)| r >= d || c >= d) {
            return Err(Error::DimensionMismatch { expected: d, got: r.max(c) + 1 });
        }
        Ok(Self { shape, storage: Storage::Sparse(Csr::from_triplets(d, triplets)) })
    }

    /// Picks dense storage when more than a quarter of entries are filled.
    pub fn from_triplets(shape: Vec<usize>, triplets: Vec<(usize, usize, C64)>) -> Result<Self> {
        let d = dim_of(&shape);
        let op = Self::sparse(shape, triplets)?;
        if op.nnz() * 4 > d * d {
            Ok(op.to_dense())
        } else {
            Ok(op)
        }
    }

    pub fn identity(shape: Vec<usize>) -> Self {
        let d = dim_of(&shape);
        let t = (0..d).map(|k| (k, k, C64::new(1.0, 0.0))).collect();
        Self::sparse(shape, t).expect("diagonal fits")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_max(&self) -> usize {
        self.shape[0]
    }

    pub fn dim(&self) -> usize {
        dim_of(&self.shape)
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(m) => m.iter().filter(|c| **c != C64::new(0.0, 0.0)).count(),
            Storage::Sparse(s) => s.vals.len(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        match &self.storage {
            Storage::Dense(m) => m[r * self.dim() + c],
            Storage::Sparse(s) => {
                for k in s.row_ptr[r]..s.row_ptr[r + 1] {
                    if s.cols[k] == c {
                        return s.vals[k];
                    }
                }
                C64::new(0.0, 0.0)
            }
        }
    }

    /// Dense row-major copy of the matrix.
    pub fn to_matrix(&self) -> Vec<C64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(s) => {
                let d = self.dim();
                let mut m = vec![C64::new(0.0, 0.0); d * d];
                for r in 0..d {
                    for k in s.row_ptr[r]..s.row_ptr[r + 1] {
                        m[r * d + s.cols[k]] = s.vals[k];
                    }
                }
                m
            }
        }
    }

    pub fn to_dense(&self) -> Self {
        Self { shape: self.shape.clone(), storage: Storage::Dense(self.to_matrix()) }
    }

    pub fn to_sparse(&self) -> Self {
        match &self.storage {
            Storage::Sparse(_) => self.clone(),
            Storage::Dense(m) => {
                let d = self.dim();
                let t = m
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != C64::new(0.0, 0.0))
                    .map(|(k, v)| (k / d, k % d, *v))
                    .collect();
                Self::sparse(self.shape.clone(), t).expect("same dimension")
            }
        }
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let d = self.dim();
        match &self.storage {
            Storage::Sparse(s) => s.apply_into(x, y),
            Storage::Dense(m) => {
                for r in 0..d {
                    let row = &m[r * d..(r + 1) * d];
                    y[r] = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    pub fn apply_slice(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        let y = self.apply_slice(v.amplitudes())?;
        FockVector::with_shape(v.shape().to_vec(), y)
    }

    /// Dense product `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let d = self.dim();
        let m = dense_matmul(&self.to_matrix(), &other.to_matrix(), d);
        Self::dense(self.shape.clone(), m)
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim();
        let m = self.to_matrix();
        let mut t = vec![C64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                t[c * d + r] = m[r * d + c].conj();
            }
        }
        let dense = Self { shape: self.shape.clone(), storage: Storage::Dense(t) };
        if self.is_sparse() {
            dense.to_sparse()
        } else {
            dense
        }
    }

    /// Largest entry of |self − self†|.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let m = self.to_matrix();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((m[r * d + c] - m[c * d + r].conj()).norm());
            }
        }
        worst
    }
}

pub(crate) fn dense_matmul(a: &[C64], b: &[C64], d: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); d * d];
    for r in 0..d {
        let orow = &mut out[r * d..(r + 1) * d];
        for k in 0..d {
            let a_rk = a[r * d + k];
            if a_rk == C64::new(0.0, 0.0) {
                continue;
            }
            let brow = &b[k * d..(k + 1) * d];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += a_rk * bv;
            }
        }
    }
    out
}

fn one_norm(m: &[C64], d: usize) -> f64 {
    (0..d).map(|c| (0..d).map(|r| m[r * d + c].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Dense matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(m: &[C64], d: usize) -> Vec<C64> {
    let norm = one_norm(m, d);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let a: Vec<C64> = m.iter().map(|v| v * scale).collect();
    let mut result = vec![C64::new(0.0, 0.0); d * d];
    for k in 0..d {
        result[k * d + k] = C64::new(1.0, 0.0);
    }
    let mut term = result.clone();
    for k in 1..=30 {
        term = dense_matmul(&term, &a, d);
        let inv = 1.0 / k as f64;
        term.iter_mut().for_each(|v| *v *= inv);
        let mut biggest: f64 = 0.0;
        for (r, t) in result.iter_mut().zip(&term) {
            *r += t;
            biggest = biggest.max(t.norm());
        }
        if biggest < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = dense_matmul(&result, &result, d);
    }
    result
}

/// Annihilation, creation and number operators on one mode.
pub fn ladder_operators(n_max: usize) -> Result<(FockOperator, FockOperator, FockOperator)> {
    if n_max < 1 {
        return Err(Error::Config("ladder operators need n_max >= 1".into()));
    }
    let shape = vec![n_max];
    let mut a = Vec::with_capacity(n_max);
    let mut ad = Vec::with_capacity(n_max);
    let mut num = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let s = C64::new((n as f64).sqrt(), 0.0);
        a.push((n - 1, n, s));
        ad.push((n, n - 1, s));
        num.push((n, n, C64::new(n as f64, 0.0)));
    }
    Ok((
        FockOperator::sparse(shape.clone(), a)?,
        FockOperator::sparse(shape.clone(), ad)?,
        FockOperator::sparse(shape, num)?,
    ))
}

/// Number operator of one mode of a multi-mode space.
pub fn mode_number_operator(shape: &[usize], mode: usize) -> FockOperator {
    let d = dim_of(shape);
    let stride: usize = shape[mode + 1..].iter().map(|n| n + 1).product();
    let t = (0..d)
        .map(|k| {
            let n = (k / stride) % (shape[mode] + 1);
            (k, k, C64::new(n as f64, 0.0))
        })
        .filter(|t| t.2.re != 0.0)
        .collect();
    FockOperator::sparse(shape.to_vec(), t).expect("diagonal fits")
}

#[derive(Debug, Clone)]
pub struct Displacement {
    pub op: FockOperator,
    /// max |D†D − I|.
    pub unitarity_defect: f64,
}

/// D(α) = exp(α a† − α* a) on the truncated space.
pub fn displacement_operator(alpha: C64, n_max: usize) -> Result<Displacement> {
    if alpha.norm_sqr() > n_max as f64 / 4.0 {
        return Err(Error::Truncation(format!(
            "|alpha|^2 = {} exceeds n_max/4 = {}",
            alpha.norm_sqr(),
            n_max as f64 / 4.0
        )));
    }
    let d = n_max + 1;
    let mut g = vec![C64::new(0.0, 0.0); d * d];
    for n in 1..=n_max {
        let s = (n as f64).sqrt();
        g[n * d + (n - 1)] = alpha * s;
        g[(n - 1) * d + n] = -alpha.conj() * s;
    }
    let m = expm(&g, d);
    let op = FockOperator::dense(vec![n_max], m)?;
    let dd = op.adjoint().matmul(&op)?.to_matrix();
    let mut defect: f64 = 0.0;
    for r in 0..d {
        for c in 0..d {
            let id = if r == c { 1.0 } else { 0.0 };
            defect = defect.max((dd[r * d + c] - id).norm());
        }
    }
    if defect > 1e-6 {
        return Err(Error::Truncation(format!("displacement unitarity defect {defect:e}")));
    }
    Ok(Displacement { op, unitarity_defect: defect })
}

/// Density operator, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensity {
    shape: Vec<usize>,
    m: Vec<C64>,
}

impl FockDensity {
    pub fn new(shape: Vec<usize>, m: Vec<C64>) -> Result<Self> {
        let d = dim_of(&shape);
        if m.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: m.len() });
        }
        Ok(Self { shape, m })
    }

    pub fn from_pure(v: &FockVector) -> Self {
        let d = v.dim();
        let a = v.amplitudes();
        let mut m = vec![C64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                m[r * d + c] = a[r] * a[c].conj();
            }
        }
        Self { shape: v.shape().to_vec(), m }
    }

    /// Σ w_k |v_k⟩⟨v_k|; weights are used as given.
    pub fn mixture(parts: &[(f64, &FockVector)]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Config("empty mixture".into()))?;
        let mut out = FockDensity::from_pure(first.1);
        out.m.iter_mut().for_each(|v| *v *= first.0);
        for (w, v) in &parts[1..] {
            let p = FockDensity::from_pure(v);
            if p.m.len() != out.m.len() {
                return Err(Error::DimensionMismatch { expected: out.dim(), got: p.dim() });
            }
            for (o, x) in out.m.iter_mut().zip(&p.m) {
                *o += x * *w;
            }
        }
        Ok(out)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_max(&self) -> usize {
        self.shape[0]
    }

    pub fn dim(&self) -> usize {
        dim_of(&self.shape)
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.m[r * self.dim() + c]
    }

    pub fn matrix(&self) -> &[C64] {
        &self.m
    }

    pub fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|k| self.m[k * d + k]).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace().re;
        if t <= 0.0 {
            return Err(Error::NullState("density with non-positive trace".into()));
        }
        Ok(Self { shape: self.shape.clone(), m: self.m.iter().map(|v| v / t).collect() })
    }

    pub fn purity(&self) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for r in 0..d {
            for c in 0..d {
                s += (self.m[r * d + c] * self.m[c * d + r]).re;
            }
        }
        s
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.m[r * d + c] - self.m[c * d + r].conj()).norm());
            }
        }
        worst
    }

    pub fn populations(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|k| self.m[k * d + k].re).collect()
    }

    /// Population in the top two levels of any mode.
    pub fn leakage(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .filter(|(k, _)| at_boundary(*k, &self.shape))
            .map(|(_, p)| p)
            .sum()
    }
}

/// Anything an operator can be averaged over.
pub trait FockState {
    fn expect(&self, op: &FockOperator) -> Result<C64>;
}

impl FockState for FockVector {
    fn expect(&self, op: &FockOperator) -> Result<C64> {
        let y = op.apply_slice(self.amplitudes())?;
        Ok(self.amplitudes().iter().zip(&y).map(|(a, b)| a.conj() * b).sum())
    }
}

impl FockState for FockDensity {
    fn expect(&self, op: &FockOperator) -> Result<C64> {
        let d = self.dim();
        if op.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: op.dim() });
        }
        // Tr[ρO] = Σ_c (ρ O)_{cc} = Σ_c Σ_r ρ_{cr} O_{rc}
        let om = op.to_matrix();
        let mut s = C64::new(0.0, 0.0);
        for c in 0..d {
            for r in 0..d {
                s += self.m[c * d + r] * om[r * d + c];
            }
        }
        Ok(s)
    }
}

/// ⟨ψ|O|ψ⟩ or Tr[ρO].
pub fn expectation_value<S: FockState>(op: &FockOperator, state: &S) -> Result<C64> {
    state.expect(op)
}

/// Kronecker product, first argument is the fundamental mode.
pub trait Tensor: Sized {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for FockVector {
    fn tensor(&self, other: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in self.amplitudes() {
            for b in other.amplitudes() {
                amps.push(a * b);
            }
        }
        let mut shape = self.shape.clone();
        shape.extend_from_slice(&other.shape);
        FockVector { shape, amps }
    }
}

impl Tensor for FockDensity {
    fn tensor(&self, other: &Self) -> Self {
        let (da, db) = (self.dim(), other.dim());
        let d = da * db;
        let mut m = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..da {
            for k in 0..da {
                let a = self.m[i * da + k];
                for j in 0..db {
                    for l in 0..db {
                        m[(i * db + j) * d + (k * db + l)] = a * other.m[j * db + l];
                    }
                }
            }
        }
        let mut shape = self.shape.clone();
        shape.extend_from_slice(&other.shape);
        FockDensity { shape, m }
    }
}

pub fn tensor_product<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

/// Reduced density of a two-mode state.
pub fn partial_trace(rho: &FockDensity, keep: Keep) -> Result<FockDensity> {
    if rho.shape.len() != 2 {
        return Err(Error::Config("partial trace needs a two-mode density".into()));
    }
    let (na, nb) = (rho.shape[0] + 1, rho.shape[1] + 1);
    let d = na * nb;
    let idx = |i: usize, j: usize| i * nb + j;
    match keep {
        Keep::First => {
            let mut m = vec![C64::new(0.0, 0.0); na * na];
            for i in 0..na {
                for k in 0..na {
                    m[i * na + k] = (0..nb).map(|j| rho.m[idx(i, j) * d + idx(k, j)]).sum();
                }
            }
            FockDensity::new(vec![rho.shape[0]], m)
        }
        Keep::Second => {
            let mut m = vec![C64::new(0.0, 0.0); nb * nb];
            for j in 0..nb {
                for l in 0..nb {
                    m[j * nb + l] = (0..na).map(|i| rho.m[idx(i, j) * d + idx(i, l)]).sum();
                }
            }
            FockDensity::new(vec![rho.shape[1]], m)
        }
    }
}

/// Reduced density of a pure two-mode state without forming the full projector.
pub fn reduce_pure(psi: &FockVector, keep: Keep) -> Result<FockDensity> {
    if psi.shape.len() != 2 {
        return Err(Error::Config("partial trace needs a two-mode state".into()));
    }
    let (na, nb) = (psi.shape[0] + 1, psi.shape[1] + 1);
    let a = psi.amplitudes();
    match keep {
        Keep::First => {
            let mut m = vec![C64::new(0.0, 0.0); na * na];
            for i in 0..na {
                for k in 0..na {
                    m[i * na + k] = (0..nb).map(|j| a[i * nb + j] * a[k * nb + j].conj()).sum();
                }
            }
            FockDensity::new(vec![psi.shape[0]], m)
        }
        Keep::Second => {
            let mut m = vec![C64::new(0.0, 0.0); nb * nb];
            for j in 0..nb {
                for l in 0..nb {
                    m[j * nb + l] = (0..na).map(|i| a[i * nb + j] * a[i * nb + l].conj()).sum();
                }
            }
            FockDensity::new(vec![psi.shape[1]], m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn vacuum_coherent() {
        let v = coherent_fock(c(0.0), 10).unwrap();
        assert_eq!(v.amplitudes()[0], c(1.0));
        assert!(v.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn coherent_mean_photon_number() {
        let v = coherent_fock(c(2.0), 40).unwrap();
        let (_, _, n) = ladder_operators(40).unwrap();
        assert!((v.expect(&n).unwrap().re - 4.0).abs() < 1e-10);
    }

    #[test]
    fn coherent_rejects_small_cutoff() {
        assert!(matches!(coherent_fock(c(5.0), 20), Err(Error::Truncation(_))));
    }

    #[test]
    fn large_amplitude_norm() {
        // Poisson(144) tail beyond 500 is below e^-200.
        let v = coherent_fock(c(12.0), 500).unwrap();
        assert!(v.norm_sqr() >= 1.0 - 1e-10);
        assert!(v.norm_sqr() <= 1.0 + 1e-12);
    }

    #[test]
    fn ladder_action() {
        let (a, _, n) = ladder_operators(8).unwrap();
        let one = FockVector::basis(1, 8).unwrap();
        assert_eq!(a.apply(&one).unwrap(), FockVector::vacuum(8));
        let five = FockVector::basis(5, 8).unwrap();
        assert_eq!(n.apply(&five).unwrap(), five.scaled(c(5.0)));
    }

    #[test]
    fn commutator_is_identity_below_cutoff() {
        let (a, ad, _) = ladder_operators(10).unwrap();
        let comm_a = a.matmul(&ad).unwrap().to_matrix();
        let comm_b = ad.matmul(&a).unwrap().to_matrix();
        for n in 0..10 {
            let v = comm_a[n * 11 + n] - comm_b[n * 11 + n];
            assert!((v - c(1.0)).norm() < 1e-12, "row {n}");
        }
        let v = comm_a[10 * 11 + 10] - comm_b[10 * 11 + 10];
        assert!((v - c(-10.0)).norm() < 1e-12);
    }

    #[test]
    fn displacement_identity_at_zero() {
        let d = displacement_operator(c(0.0), 12).unwrap();
        let m = d.op.to_matrix();
        for r in 0..13 {
            for col in 0..13 {
                let id = if r == col { 1.0 } else { 0.0 };
                assert!((m[r * 13 + col] - c(id)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn displaced_vacuum_is_coherent() {
        let alpha = c(1.5);
        let d = displacement_operator(alpha, 40).unwrap();
        let v = d.op.apply(&FockVector::vacuum(40)).unwrap();
        let coh = coherent_fock(alpha, 40).unwrap();
        assert!(coh.inner(&v).unwrap().norm() >= 1.0 - 1e-8);
    }

    #[test]
    fn displacement_inverse() {
        let d1 = displacement_operator(c(1.0), 30).unwrap();
        let d2 = displacement_operator(c(-1.0), 30).unwrap();
        let p = d1.op.matmul(&d2.op).unwrap().to_matrix();
        for r in 0..31 {
            for col in 0..31 {
                let id = if r == col { 1.0 } else { 0.0 };
                assert!((p[r * 31 + col] - c(id)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn displacement_guard() {
        assert!(displacement_operator(c(3.0), 20).is_err());
    }

    #[test]
    fn two_mode_vacuum() {
        let v = FockVector::vacuum(3).tensor(&FockVector::vacuum(2));
        assert_eq!(v.dim(), 12);
        assert_eq!(v.amplitudes()[0], c(1.0));
        assert!((v.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn number_on_composite_space() {
        let a = coherent_fock(C64::new(1.2, -0.7), 30).unwrap();
        let v = a.tensor(&FockVector::vacuum(4));
        let n0 = mode_number_operator(v.shape(), 0);
        let (_, _, n) = ladder_operators(30).unwrap();
        let lhs = v.expect(&n0).unwrap().re;
        let rhs = a.expect(&n).unwrap().re;
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn bell_state_reduces_to_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![c(0.0); 4];
        amps[split_to_flat(0, 1)] = c(s);
        amps[split_to_flat(1, 0)] = c(s);
        let psi = FockVector::with_shape(vec![1, 1], amps).unwrap();
        let rho = FockDensity::from_pure(&psi);
        for keep in [Keep::First, Keep::Second] {
            let r = partial_trace(&rho, keep).unwrap();
            assert!((r.get(0, 0) - c(0.5)).norm() < 1e-12);
            assert!((r.get(1, 1) - c(0.5)).norm() < 1e-12);
            assert!(r.get(0, 1).norm() < 1e-12);
        }
    }

    fn split_to_flat(i: usize, j: usize) -> usize {
        i * 2 + j
    }

    #[test]
    fn i_squared_on_coherent() {
        let (a, ad, n) = ladder_operators(40).unwrap();
        let a2 = a.matmul(&a).unwrap();
        let ad2 = ad.matmul(&ad).unwrap();
        let q = ad2.matmul(&a2).unwrap();
        let v = coherent_fock(c(2.0), 40).unwrap();
        let quartic = v.expect(&q).unwrap().re;
        assert!((quartic - 16.0).abs() < 1e-8);
        assert!((quartic + v.expect(&n).unwrap().re - 20.0).abs() < 1e-8);
    }

    #[test]
    fn leakage_reports_boundary() {
        let v = FockVector::basis(9, 10).unwrap();
        assert_eq!(v.leakage(), 1.0);
        let w = FockVector::basis(8, 10).unwrap();
        assert_eq!(w.leakage(), 0.0);
    }
}

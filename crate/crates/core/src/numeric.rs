//! Small numerical helpers shared by the trace and Wigner code.

/// Pairwise (cascade) summation. The split points depend only on the length,
/// so the result is independent of how callers parallelise around it.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(ys: &[f64], dx: f64) -> f64 {
    match ys.len() {
        0 | 1 => 0.0,
        n => (pairwise_sum(ys) - 0.5 * (ys[0] + ys[n - 1])) * dx,
    }
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => {
            let h = (b - a) / (n - 1) as f64;
            (0..n).map(|i| a + h * i as f64).collect()
        }
    }
}

/// Symmetric grid `-half..=half` with the given step; always contains 0.
pub fn symmetric_grid(half: f64, step: f64) -> Vec<f64> {
    let k = (half / step + 1e-9).floor() as i64;
    (-k..=k).map(|i| i as f64 * step).collect()
}

/// ln(n!) for n = 0..=n_max by cumulative sums.
pub fn ln_factorials(n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n_max {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&sq) / xs.len() as f64).sqrt()
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = Vec::with_capacity(xs.len());
    let mut sxx = Vec::with_capacity(xs.len());
    let mut syy = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        sxy.push((x - mx) * (y - my));
        sxx.push((x - mx) * (x - mx));
        syy.push((y - my) * (y - my));
    }
    pairwise_sum(&sxy) / (pairwise_sum(&sxx) * pairwise_sum(&syy)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_ints() {
        let xs: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let xs = linspace(0.0, 2.0, 101);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((trapezoid(&ys, 0.02) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_grid_contains_zero() {
        let g = symmetric_grid(80.0, 0.1);
        assert_eq!(g.len(), 1601);
        assert_eq!(g[800], 0.0);
        assert!((g[0] + 80.0).abs() < 1e-9);
    }

    #[test]
    fn ln_factorial_small() {
        let lf = ln_factorials(5);
        assert!((lf[5] - 120f64.ln()).abs() < 1e-12);
    }
}

//! Independent oracles shared by the integration and acceptance suites.
//! Everything here recomputes expected values through a different route
//! than the library code it checks.

#![allow(dead_code)]

use std::collections::BTreeSet;

use num_complex::Complex64;

/// Closed-form Bussgang gain of an ideal clipper at back-off gamma:
/// alpha(gamma) = 1 - exp(-gamma) + sqrt(pi gamma)/2 * erfc(sqrt(gamma)).
pub fn soft_limiter_alpha(gamma: f64) -> f64 {
    1.0 - (-gamma).exp()
        + (std::f64::consts::PI * gamma).sqrt() / 2.0 * libm::erfc(gamma.sqrt())
}

/// Bussgang gain of an arbitrary amplitude transfer `f` under a circular
/// complex Gaussian input of variance `sigma2`, by composite-Simpson
/// quadrature of the Rayleigh-weighted correlation integral:
/// alpha = int_0^inf f(a) a (2a/sigma2) exp(-a^2/sigma2) da / sigma2.
pub fn alpha_by_quadrature(f: impl Fn(f64) -> f64, sigma2: f64, nodes: usize) -> f64 {
    assert!(nodes >= 10_000 && nodes % 2 == 0);
    let upper = 12.0 * sigma2.sqrt();
    let h = upper / nodes as f64;
    let integrand = |a: f64| f(a) * a * (2.0 * a / sigma2) * (-a * a / sigma2).exp();
    let mut acc = integrand(0.0) + integrand(upper);
    for i in 1..nodes {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(i as f64 * h);
    }
    acc * h / 3.0 / sigma2
}

/// Rapp amplitude transfer, straightforward form (moderate p only).
pub fn rapp_envelope(a: f64, gain: f64, p_max: f64, p: f64) -> f64 {
    gain * a / (1.0 + (gain * a).powi(2).powf(p) / p_max.powf(p)).powf(1.0 / (2.0 * p))
}

/// Solves (A^H A + ridge I) x = A^H b by Gaussian elimination with
/// partial pivoting: the normal-equations route, independent of the QR
/// path under test. `a` is row-major rows x cols.
pub fn normal_equations_solve(
    a: &[Vec<Complex64>],
    b: &[Complex64],
    ridge: f64,
) -> Vec<Complex64> {
    let rows = a.len();
    let cols = a[0].len();
    assert_eq!(b.len(), rows);
    // Gram matrix and right-hand side.
    let mut g = vec![vec![Complex64::ZERO; cols + 1]; cols];
    for i in 0..cols {
        for j in 0..cols {
            let mut acc = Complex64::ZERO;
            for r in 0..rows {
                acc += a[r][i].conj() * a[r][j];
            }
            if i == j {
                acc += ridge;
            }
            g[i][j] = acc;
        }
        let mut acc = Complex64::ZERO;
        for r in 0..rows {
            acc += a[r][i].conj() * b[r];
        }
        g[i][cols] = acc;
    }
    // Elimination with partial pivoting.
    for col in 0..cols {
        let pivot = (col..cols)
            .max_by(|&x, &y| g[x][col].norm().total_cmp(&g[y][col].norm()))
            .unwrap();
        g.swap(col, pivot);
        let diag = g[col][col];
        for row in col + 1..cols {
            let factor = g[row][col] / diag;
            for j in col..=cols {
                let upd = g[col][j] * factor;
                g[row][j] -= upd;
            }
        }
    }
    let mut x = vec![Complex64::ZERO; cols];
    for col in (0..cols).rev() {
        let mut acc = g[col][cols];
        for j in col + 1..cols {
            acc -= g[col][j] * x[j];
        }
        x[col] = acc / g[col][col];
    }
    x
}

/// Exhaustive unordered-loop IMD3 reference, canonicalized after the
/// fact.
pub fn imd3_bruteforce(used: &[i32], k: usize) -> BTreeSet<[usize; 3]> {
    let n = used.len();
    let mut set = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if used[a] + used[b] - used[c] - used[k] == 0 {
                    set.insert([a.min(b), a.max(b), c]);
                }
            }
        }
    }
    set
}

/// Exhaustive unordered-loop IMD5 reference, canonicalized after the
/// fact.
pub fn imd5_bruteforce(used: &[i32], k: usize) -> BTreeSet<[usize; 5]> {
    let n = used.len();
    let mut set = BTreeSet::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    for e in 0..n {
                        if used[a] + used[b] + used[c] - used[d] - used[e] - used[k] == 0 {
                            let mut plus = [a, b, c];
                            plus.sort_unstable();
                            set.insert([plus[0], plus[1], plus[2], d.min(e), d.max(e)]);
                        }
                    }
                }
            }
        }
    }
    set
}

/// Percentile bootstrap confidence interval for the mean of `samples`,
/// seeded and deterministic.
pub fn bootstrap_mean_ci(samples: &[f64], resamples: usize, seed: u64, level: f64) -> (f64, f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = samples.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut acc = 0.0;
            for _ in 0..n {
                acc += samples[rng.random_range(0..n)];
            }
            acc / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let lo_q = (1.0 - level) / 2.0;
    let lo = means[((resamples as f64) * lo_q) as usize];
    let hi = means[((resamples as f64) * (1.0 - lo_q)).min(resamples as f64 - 1.0) as usize];
    (lo, hi)
}

/// Frozen closed-form soft-limiter gains, computed independently.
pub const SL_ALPHA_GAMMA_05: f64 = 0.592314212999;
pub const SL_ALPHA_GAMMA_1: f64 = 0.771523351469;
pub const SL_ALPHA_GAMMA_2: f64 = 0.921690840756;
/// Frozen quadrature value for the Rapp model, p = 10, gamma = 10^-0.4.
pub const RAPP_ALPHA_P10_IBO_M4: f64 = 0.535691740248;

//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rankpert::contour::{Numerator, ScalarConfig};
use rankpert::DenseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn symmetric_gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DenseMatrix {
    let g = gaussian(rng, n, n);
    DenseMatrix::from_fn(n, n, |i, j| scale * 0.5 * (g[(i, j)] + g[(j, i)]))
}

/// Orthonormal columns by modified Gram-Schmidt on a Gaussian draw.
pub fn orthonormal(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    while cols.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for _ in 0..2 {
            for c in &cols {
                let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= d * b);
            }
        }
        let nrm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nrm > 1e-8 {
            cols.push(v.into_iter().map(|a| a / nrm).collect());
        }
    }
    cols
}

/// `sum_i vals[i] q_i q_i^T` for orthonormal `q_i`.
pub fn symmetric_with_spectrum(rng: &mut ChaCha8Rng, n: usize, vals: &[f64]) -> DenseMatrix {
    let q = orthonormal(rng, n, vals.len());
    DenseMatrix::from_fn(n, n, |i, j| vals.iter().zip(&q).map(|(l, c)| l * c[i] * c[j]).sum())
}

/// Sum of residues of `num(z) / prod (z - a_i)^{t_i}` at the poles strictly
/// inside `(left, right)`, by Taylor expansion around each pole.
pub fn residue_sum(cfg: &ScalarConfig, inside: impl Fn(f64) -> bool) -> f64 {
    let mut total = 0.0;
    for (k, (&a, &t)) in cfg.poles.iter().zip(&cfg.exponents).enumerate() {
        if t == 0 || !inside(a) {
            continue;
        }
        let order = t as usize;
        // Taylor coefficients in w = z - a of num(z) / prod_{b != a} (z - b)^{t_b}.
        let mut series = vec![0.0; order];
        series[0] = 1.0;
        for (j, (&b, &tb)) in cfg.poles.iter().zip(&cfg.exponents).enumerate() {
            if j == k || tb == 0 {
                continue;
            }
            let d = a - b;
            // (d + w)^{-tb} = sum_m binom(-tb, m) d^{-tb-m} w^m
            let mut factor = vec![0.0; order];
            let mut coef = d.powi(-(tb as i32));
            for (m, f) in factor.iter_mut().enumerate() {
                *f = coef;
                coef *= -((tb as f64) + m as f64) / ((m + 1) as f64 * d);
            }
            series = mul_series(&series, &factor);
        }
        if cfg.numerator == Numerator::Z {
            let num = {
                let mut v = vec![0.0; order];
                v[0] = a;
                if order > 1 {
                    v[1] = 1.0;
                }
                v
            };
            series = mul_series(&series, &num);
        }
        total += series[order - 1];
    }
    total
}

fn mul_series(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        for j in 0..n - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// `x` and `y` by explicit index loops over `u_i`, `v_j` and `E`.
pub fn brute_skewness(us: &[Vec<f64>], vs: &[Vec<f64>], e: &DenseMatrix) -> (f64, f64) {
    let (m, n) = e.shape();
    let r = us.len();
    let mut x = 0.0f64;
    for u in us {
        for v in vs {
            let mut s = 0.0;
            for a in 0..m {
                for b in 0..n {
                    s += u[a] * e[(a, b)] * v[b];
                }
            }
            x = x.max(s.abs());
        }
    }
    let mut y = 0.0f64;
    for i in 0..r {
        for j in i + 1..r {
            let mut right = 0.0;
            for a in 0..m {
                let mut ei = 0.0;
                let mut ej = 0.0;
                for b in 0..n {
                    ei += e[(a, b)] * vs[i][b];
                    ej += e[(a, b)] * vs[j][b];
                }
                right += ei * ej;
            }
            let mut left = 0.0;
            for b in 0..n {
                let mut ei = 0.0;
                let mut ej = 0.0;
                for a in 0..m {
                    ei += e[(a, b)] * us[i][a];
                    ej += e[(a, b)] * us[j][a];
                }
                left += ei * ej;
            }
            y = y.max(right.abs()).max(left.abs());
        }
    }
    (x, y)
}

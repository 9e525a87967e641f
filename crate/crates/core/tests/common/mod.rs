//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use ris_capnet::numerics::ComplexMatrix;

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&k| k != i).map(move |k| (i, k)))
            .map(|(i, k)| a[i][k] * a[i][k])
            .sum();
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of a Hermitian matrix via the real 2n × 2n embedding
/// [[Re, −Im], [Im, Re]], whose spectrum is the Hermitian one doubled.
pub fn hermitian_eigenvalues(h: &ComplexMatrix) -> Vec<f64> {
    let n = h.rows();
    let mut e = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for k in 0..n {
            let z = h[(i, k)];
            e[i][k] = z.re;
            e[i][n + k] = -z.im;
            e[n + i][k] = z.im;
            e[n + i][n + k] = z.re;
        }
    }
    let ev = jacobi_eigenvalues(e);
    ev.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

pub fn triple_loop_matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut c = ComplexMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for k in 0..b.cols() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..a.cols() {
                acc += a[(i, j)] * b[(j, k)];
            }
            c[(i, k)] = acc;
        }
    }
    c
}

/// Gram matrix HᴴH written out entry by entry.
pub fn gram(h: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix::from_fn(h.cols(), h.cols(), |a, b| {
        (0..h.rows()).map(|i| h[(i, a)].conj() * h[(i, b)]).sum()
    })
}

/// Σ log₂(1 + ρ λᵢ) over the eigenvalues of HᴴH.
pub fn eigen_rate(h_eff: &ComplexMatrix, rho: f64) -> f64 {
    hermitian_eigenvalues(&gram(h_eff))
        .iter()
        .map(|l| (1.0 + rho * l.max(0.0)).log2())
        .sum()
}

pub fn random_complex<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Central difference of `f` along each coordinate.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += step;
            m[i] -= step;
            (f(&p) - f(&m)) / (2.0 * step)
        })
        .collect()
}

/// Relative comparison with an absolute floor for near-zero references.
pub fn close(got: f64, want: f64, rel: f64, abs: f64) -> bool {
    let diff = (got - want).abs();
    if want.abs() < 1e-8 {
        diff <= abs
    } else {
        diff <= rel * want.abs() || diff <= abs
    }
}

/// Straight-line forward pass from raw weight and bias arrays: rectifier on
/// every layer except the last.
pub fn forward_oracle(layers: &[(Vec<Vec<f64>>, Vec<f64>)], x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for (idx, (w, b)) in layers.iter().enumerate() {
        let mut next = Vec::with_capacity(w.len());
        for (row, bias) in w.iter().zip(b) {
            let mut acc = *bias;
            for (wij, hj) in row.iter().zip(&h) {
                acc += wij * hj;
            }
            if idx + 1 < layers.len() {
                acc = acc.max(0.0);
            }
            next.push(acc);
        }
        h = next;
    }
    h
}

/// Pearson χ² statistic of observed counts against a uniform expectation.
pub fn chi_square_uniform(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
}

pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

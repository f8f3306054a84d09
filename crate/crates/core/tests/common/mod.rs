//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls the library's algorithms: states are simulated directly
//! with nalgebra, CHSH maxima use the closed-form two-qubit bound, and causal
//! polytope membership is decided by enumerating deterministic strategies.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use icolab_core::tensor::{c, C64};
use icolab_core::ComplexMatrix;

pub type M = DMatrix<C64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_lib(m: &M) -> ComplexMatrix {
    let entries: Vec<C64> = (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |col| m[(r, col)])).collect();
    ComplexMatrix::from_row_major(m.nrows(), m.ncols(), &entries).unwrap()
}

pub fn from_lib(m: &ComplexMatrix) -> M {
    DMatrix::from_fn(m.rows(), m.cols(), |r, col| m.get(r, col))
}

pub fn kron(a: &M, b: &M) -> M {
    a.kronecker(b)
}

pub fn pauli(k: usize) -> M {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match k {
        0 => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        1 => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        2 => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        _ => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
    }
}

pub fn hadamard() -> M {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
}

pub fn ket(amps: &[C64]) -> M {
    DMatrix::from_column_slice(amps.len(), 1, amps)
}

pub fn basis(d: usize, k: usize) -> M {
    let mut v = DMatrix::zeros(d, 1);
    v[(k, 0)] = c(1.0, 0.0);
    v
}

pub fn gaussian_c(r: &mut ChaCha8Rng) -> C64 {
    c(r.sample::<f64, _>(StandardNormal), r.sample::<f64, _>(StandardNormal))
}

pub fn ginibre(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> M {
    DMatrix::from_fn(rows, cols, |_, _| gaussian_c(r))
}

pub fn random_ket(r: &mut ChaCha8Rng, d: usize) -> M {
    let v = ginibre(r, d, 1);
    let n = v.norm();
    v / c(n, 0.0)
}

/// Random mixed state of full rank (Ginibre ensemble).
pub fn random_density(r: &mut ChaCha8Rng, d: usize) -> M {
    let g = ginibre(r, d, d);
    let m = &g * g.adjoint();
    let t = m.trace();
    m / t
}

/// Convex mixture of random product pure states.
pub fn random_separable(r: &mut ChaCha8Rng, terms: usize) -> M {
    let mut acc = DMatrix::zeros(4, 4);
    let mut total = 0.0;
    for _ in 0..terms {
        let w: f64 = r.random::<f64>() + 1e-3;
        let a = random_ket(r, 2);
        let b = random_ket(r, 2);
        let v = kron(&a, &b);
        acc += (&v * v.adjoint()) * c(w, 0.0);
        total += w;
    }
    acc / c(total, 0.0)
}

/// Random isometry `d_in → d_out·k` via QR of a Ginibre matrix.
pub fn random_isometry(r: &mut ChaCha8Rng, d_in: usize, d_out_total: usize) -> M {
    let g = ginibre(r, d_out_total, d_in);
    g.qr().q()
}

/// Random instrument as Kraus operators `kraus[x][o]` (one Kraus operator per
/// outcome), built from an isometry into output ⊗ outcome register.
pub fn random_instrument(r: &mut ChaCha8Rng, d_in: usize, d_out: usize, inputs: usize, outcomes: usize) -> Vec<Vec<M>> {
    (0..inputs)
        .map(|_| {
            let v = random_isometry(r, d_in, outcomes * d_out);
            (0..outcomes).map(|o| v.rows(o * d_out, d_out).into_owned()).collect()
        })
        .collect()
}

pub fn random_unitary(r: &mut ChaCha8Rng, d: usize) -> M {
    random_isometry(r, d, d)
}

/// Random CPTP channel as Kraus operators (Stinespring with `k` environment levels).
pub fn random_channel(r: &mut ChaCha8Rng, d_in: usize, d_out: usize, k: usize) -> Vec<M> {
    let v = random_isometry(r, d_in, k * d_out);
    (0..k).map(|e| v.rows(e * d_out, d_out).into_owned()).collect()
}

pub fn apply_kraus(kraus: &[M], rho: &M) -> M {
    kraus.iter().map(|k| k * rho * k.adjoint()).fold(DMatrix::zeros(kraus[0].nrows(), kraus[0].nrows()), |a, b| a + b)
}

/// Probability that a single system prepared in `rho` passes through party 1's
/// Kraus operator `k1`, then `mid`, then party 2's `k2`; party 2's output is traced.
pub fn sequential_probability(rho: &M, k1: &M, mid: &[M], k2: &M) -> f64 {
    let after1 = k1 * rho * k1.adjoint();
    let after_mid = apply_kraus(mid, &after1);
    let after2 = k2 * after_mid * k2.adjoint();
    after2.trace().re
}

/// T_ij = tr[ρ σ_i ⊗ σ_j] computed from explicit Pauli products.
pub fn correlation_matrix(rho: &M) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| (rho * kron(&pauli(i + 1), &pauli(j + 1))).trace().re)
}

/// Maximal CHSH value of a two-qubit state: 2·sqrt(m1 + m2), m1, m2 the two
/// largest eigenvalues of TᵀT.
pub fn max_chsh(rho: &M) -> f64 {
    let t = correlation_matrix(rho);
    let mut ev: Vec<f64> = (t.transpose() * t).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    2.0 * (ev[0] + ev[1]).max(0.0).sqrt()
}

/// Negativity of a pure two-qubit state from its Schmidt coefficients.
pub fn pure_negativity(psi: &M) -> f64 {
    let m = DMatrix::from_fn(2, 2, |i, j| psi[(2 * i + j, 0)]);
    let s = m.singular_values();
    let sum: f64 = s.iter().sum();
    (sum * sum - 1.0) / 2.0
}

/// Deterministic one-way strategies at 1-bit alphabets, as flat tables in the
/// library's (x, y, a, b) order: 64 with party 1 first, 64 with party 2 first.
pub fn causal_vertices() -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let table = |f: &dyn Fn(usize, usize) -> (usize, usize)| -> Vec<f64> {
        let mut t = vec![0.0; 16];
        for x in 0..2 {
            for y in 0..2 {
                let (a, b) = f(x, y);
                t[((x * 2 + y) * 2 + a) * 2 + b] = 1.0;
            }
        }
        t
    };
    for fa in 0..4usize {
        for gb in 0..16usize {
            // a = fa(x); b = gb(x, y)
            out.push(table(&|x, y| ((fa >> x) & 1, (gb >> (2 * x + y)) & 1)));
        }
    }
    for fb in 0..4usize {
        for ga in 0..16usize {
            out.push(table(&|x, y| ((ga >> (2 * x + y)) & 1, (fb >> y) & 1)));
        }
    }
    out
}

/// Lawson–Hanson non-negative least squares: argmin ‖A z − b‖, z ≥ 0.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut z = DVector::zeros(n);
    let mut passive = vec![false; n];
    for _outer in 0..10 * n {
        let w = a.transpose() * (b - a * &z);
        let candidate = (0..n).filter(|&j| !passive[j] && w[j] > 1e-12).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let ap = DMatrix::from_fn(a.nrows(), idx.len(), |r, k| a[(r, idx[k])]);
            let sol = ap.clone().svd(true, true).solve(b, 1e-14).unwrap();
            if sol.iter().all(|&v| v > 0.0) {
                for (k, &col) in idx.iter().enumerate() {
                    z[col] = sol[k];
                }
                for k in 0..n {
                    if !passive[k] {
                        z[k] = 0.0;
                    }
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &col) in idx.iter().enumerate() {
                if sol[k] <= 0.0 {
                    alpha = alpha.min(z[col] / (z[col] - sol[k]));
                }
            }
            for (k, &col) in idx.iter().enumerate() {
                z[col] += alpha * (sol[k] - z[col]);
                if z[col].abs() < 1e-14 {
                    passive[col] = false;
                    z[col] = 0.0;
                }
            }
        }
    }
    z
}

/// Euclidean distance from a flat 1-bit table to the convex hull of
/// [`causal_vertices`].
pub fn causal_hull_distance(p: &[f64]) -> f64 {
    let verts = causal_vertices();
    let big = 1e3;
    let rows = p.len() + 1;
    let a = DMatrix::from_fn(rows, verts.len(), |r, k| if r < p.len() { verts[k][r] } else { big });
    let mut b = DVector::from_column_slice(&[p, &[big]].concat());
    b[rows - 1] = big;
    let z = nnls(&a, &b);
    let recon = DMatrix::from_fn(p.len(), verts.len(), |r, k| verts[k][r]) * &z;
    (recon - DVector::from_column_slice(p)).norm()
}

//! Small dense helpers on row-major slices.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Normalise in place; returns the original norm. Zero vectors are left as is.
pub fn normalize(a: &mut [f64]) -> f64 {
    let r = norm(a);
    if r > 0.0 {
        a.iter_mut().for_each(|x| *x /= r);
    }
    r
}

/// Uniform direction on the sphere `S^{n-1}`.
pub fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if normalize(&mut v) > 1e-12 {
            return v;
        }
    }
}

/// Eigenvalues (ascending) and eigenvectors (columns, matching order) of a
/// symmetric row-major matrix.
pub fn sym_eigen(m: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mat = DMatrix::from_row_slice(n, n, m);
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    (values, vectors)
}

/// Deterministic, roughly uniform directions on `S^{n-1}` for `n ≤ 3`
/// (angular grid / Fibonacci lattice) or random directions otherwise.
/// Only one of each antipodal pair is returned for `n ≥ 2`.
pub fn direction_net(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0]],
        2 => (0..count)
            .map(|j| {
                let a = std::f64::consts::PI * (j as f64 + 0.5) / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            // Fibonacci lattice on the upper hemisphere.
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|j| {
                    let z = (j as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * j as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => (0..count).map(|_| random_unit(rng, n)).collect(),
    }
}

/// Minimum-norm least-squares solution of `A x = b` (`A` row-major, `m×n`).
pub fn min_norm_solve(a: &[f64], m: usize, n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mat = DMatrix::from_row_slice(m, n, a);
    let svd = mat.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |x, &y| x.max(y));
    if smax == 0.0 {
        return None;
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    svd.solve(&rhs, 1e-12 * smax).ok().map(|x| x.iter().copied().collect())
}

/// Minimum-norm point of `{t : ⟨a_j, t⟩ ≥ b_j}` by Hildreth's dual
/// coordinate ascent. Returns `None` when the sweeps do not reach
/// feasibility within `tol`.
pub fn min_norm_point(rows: &[&[f64]], b: &[f64], n: usize, sweeps: usize, tol: f64) -> Option<Vec<f64>> {
    let sq: Vec<f64> = rows.iter().map(|r| dot(r, r)).collect();
    let mut lambda = vec![0.0; rows.len()];
    let mut t = vec![0.0; n];
    for _ in 0..sweeps {
        for (j, r) in rows.iter().enumerate() {
            if sq[j] == 0.0 {
                continue;
            }
            let step = ((b[j] - dot(r, &t)) / sq[j]).max(-lambda[j]);
            if step != 0.0 {
                lambda[j] += step;
                for (ti, ri) in t.iter_mut().zip(r.iter()) {
                    *ti += step * ri;
                }
            }
        }
        let worst = rows.iter().zip(b).map(|(r, bj)| bj - dot(r, &t)).fold(f64::NEG_INFINITY, f64::max);
        if worst <= tol {
            return Some(t);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal() {
        let (vals, vecs) = sym_eigen(&[3.0, 0.0, 0.0, 1.0], 2);
        assert_eq!(vals, vec![1.0, 3.0]);
        assert!((vecs[1][0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_norm_routines() {
        let x = min_norm_solve(&[1.0, 1.0], 1, 2, &[2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        let r1 = [1.0, 0.0];
        let r2 = [1.0, 1.0];
        let t = min_norm_point(&[&r1, &r2], &[1.0, 1.0], 2, 1000, 1e-12).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-9 && t[1].abs() < 1e-9);
        let neg = [-1.0, 0.0];
        assert!(min_norm_point(&[&r1, &neg], &[1.0, 1.0], 2, 200, 1e-9).is_none());
    }

    #[test]
    fn nets_are_unit() {
        let mut rng = crate::rng::stream(0, 0, 0);
        for n in 1..6 {
            for v in direction_net(n, 50, &mut rng) {
                assert!((norm(&v) - 1.0).abs() < 1e-12);
            }
        }
    }
}

//! Restarted Lanczos with full reorthogonalization for the lowest
//! eigenpairs of a real symmetric sparse operator.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spinalg::SparseOperator;

/// Below this dimension the operator is diagonalized densely.
const DENSE_DIM: usize = 400;

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub krylov_dim: usize,
    /// Residual norm `‖Hx - θx‖` accepted as converged.
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            krylov_dim: 60,
            tol: 1e-9,
            max_restarts: 400,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// The `count` lowest eigenpairs, ascending.
pub fn lowest_eigenpairs(op: &SparseOperator, count: usize, opts: &LanczosOptions) -> Result<Vec<Eigenpair>> {
    let count = count.min(op.dim());
    if op.dim() <= DENSE_DIM {
        return Ok(dense_lowest(op, count));
    }
    let mut found: Vec<Eigenpair> = Vec::with_capacity(count);
    for k in 0..count {
        let locked: Vec<&[f64]> = found.iter().map(|p| p.vector.as_slice()).collect();
        let start = random_start(op.dim(), opts.seed.wrapping_add(k as u64));
        let pair = restarted(op, &locked, start, opts)?;
        found.push(pair);
    }
    Ok(found)
}

/// Full spectrum and eigenvectors of a small operator, ascending.
pub fn dense_spectrum(op: &SparseOperator) -> (Vec<f64>, DMatrix<f64>) {
    let mut m = DMatrix::zeros(op.dim(), op.dim());
    for (r, c, v) in op.entries() {
        m[(r, c)] += v;
    }
    let eig: SymmetricEigen<f64, nalgebra::Dyn> = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..op.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(op.dim(), op.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn dense_lowest(op: &SparseOperator, count: usize) -> Vec<Eigenpair> {
    let (values, vectors) = dense_spectrum(op);
    (0..count)
        .map(|k| Eigenpair {
            value: values[k],
            vector: vectors.column(k).iter().copied().collect(),
        })
        .collect()
}

fn random_start(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random::<f64>() - 0.5).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn project_out(v: &mut [f64], against: &[&[f64]]) {
    for u in against {
        let c = dot(u, v);
        axpy(-c, u, v);
    }
}

fn restarted(op: &SparseOperator, locked: &[&[f64]], mut start: Vec<f64>, opts: &LanczosOptions) -> Result<Eigenpair> {
    let dim = op.dim();
    let m = opts.krylov_dim.max(2).min(dim - locked.len());
    project_out(&mut start, locked);
    if normalize(&mut start) == 0.0 {
        return Err(Error::Convergence("Lanczos start vector vanished".into()));
    }
    let mut w = vec![0.0; dim];
    let mut last_residual = f64::INFINITY;
    for _ in 0..opts.max_restarts {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        let mut tail = 0.0;
        for k in 0..m {
            op.matvec_real_into(&basis[k], &mut w);
            project_out(&mut w, locked);
            let a = dot(&basis[k], &w);
            alpha.push(a);
            axpy(-a, &basis[k], &mut w);
            if k > 0 {
                axpy(-beta[k - 1], &basis[k - 1], &mut w);
            }
            // two passes of classical Gram-Schmidt keep the basis orthogonal
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    axpy(-c, v, &mut w);
                }
                project_out(&mut w, locked);
            }
            let b = dot(&w, &w).sqrt();
            tail = b;
            if b < 1e-13 || k + 1 == m {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let kk = alpha.len();
        let t = DMatrix::from_fn(kk, kk, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imin, theta) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty tridiagonal");
        let y = eig.eigenvectors.column(imin);
        let residual = (tail * y[kk - 1]).abs();
        let mut x = vec![0.0; dim];
        for (coef, v) in y.iter().zip(&basis) {
            axpy(*coef, v, &mut x);
        }
        project_out(&mut x, locked);
        normalize(&mut x);
        last_residual = residual;
        if residual < opts.tol {
            return Ok(Eigenpair { value: theta, vector: x });
        }
        start = x;
    }
    Err(Error::Convergence(format!(
        "Lanczos did not converge after {} restarts (residual {last_residual:.2e})",
        opts.max_restarts
    )))
}

//! `e^{-iHt} v` for a real symmetric sparse `H` by short Lanczos
//! recurrences with adaptive sub-steps.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spinalg::{dot, norm, SparseOperator, C64};

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    /// Largest Krylov subspace built per sub-step.
    pub krylov_dim: usize,
    /// Accepted a-posteriori error per unit time.
    pub tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            krylov_dim: 30,
            tol: 1e-12,
        }
    }
}

/// Stateful propagator that remembers the last accepted sub-step size.
#[derive(Clone, Debug)]
pub struct KrylovPropagator<'a> {
    op: &'a SparseOperator,
    opts: KrylovOptions,
    step: f64,
}

impl<'a> KrylovPropagator<'a> {
    pub fn new(op: &'a SparseOperator, opts: KrylovOptions) -> Result<Self> {
        if opts.krylov_dim < 10 {
            return Err(Error::InvalidParameter(format!(
                "krylov_dim = {} must be at least 10",
                opts.krylov_dim
            )));
        }
        Ok(Self { op, opts, step: 0.5 })
    }

    /// Sub-step size the next call starts from.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn with_step(mut self, step: f64) -> Self {
        if step > 0.0 {
            self.step = step;
        }
        self
    }

    /// Advance `v` by time `t` (either sign) in place.
    pub fn advance(&mut self, v: &mut Vec<C64>, t: f64) -> Result<()> {
        if self.op.dim() == 1 {
            let phase = C64::new(0.0, -self.op.get(0, 0) * t).exp();
            v[0] *= phase;
            return Ok(());
        }
        let sign = t.signum();
        let t = t.abs();
        let mut remaining = t;
        while remaining > 0.0 {
            let trial = self.step.min(remaining);
            match self.try_step(v, trial, sign)? {
                Some(next) => {
                    *v = next;
                    remaining -= trial;
                    if remaining < 1e-14 * t.abs().max(1.0) {
                        remaining = 0.0;
                    }
                    self.step = (trial * 1.25).max(self.step);
                }
                None => {
                    self.step = trial * 0.5;
                    if self.step < 1e-10 {
                        return Err(Error::Convergence(
                            "Krylov sub-step shrank below 1e-10".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// One sub-step of length `tau`, or `None` if the error estimate fails.
    fn try_step(&self, v: &[C64], tau: f64, sign: f64) -> Result<Option<Vec<C64>>> {
        let beta0 = norm(v);
        if beta0 == 0.0 {
            return Ok(Some(v.to_vec()));
        }
        let dim = self.op.dim();
        let m = self.opts.krylov_dim.min(dim);
        let mut basis: Vec<Vec<C64>> = vec![v.iter().map(|x| x / beta0).collect()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        let mut w = vec![C64::new(0.0, 0.0); dim];
        let budget = self.opts.tol * tau;
        for k in 0..m {
            self.op.matvec_into(&basis[k], &mut w);
            let a = dot(&basis[k], &w).re;
            alpha.push(a);
            for (wi, vi) in w.iter_mut().zip(&basis[k]) {
                *wi -= vi * a;
            }
            if k > 0 {
                let b = beta[k - 1];
                for (wi, vi) in w.iter_mut().zip(&basis[k - 1]) {
                    *wi -= vi * b;
                }
            }
            for v in &basis {
                let c = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= vi * c;
                }
            }
            let b = norm(&w);
            let breakdown = b < 1e-13;
            // error checks are cheap relative to the matvec but not free
            let check = breakdown || k + 1 == m || (k >= 3 && k % 2 == 1);
            if check {
                let y = small_exponential(&alpha, &beta, sign * tau);
                let err = if breakdown { 0.0 } else { beta0 * b * y[k].norm() };
                if err <= budget {
                    let mut out = vec![C64::new(0.0, 0.0); dim];
                    for (coef, vb) in y.iter().zip(&basis) {
                        let c = coef * beta0;
                        for (o, x) in out.iter_mut().zip(vb) {
                            *o += x * c;
                        }
                    }
                    return Ok(Some(out));
                }
                if breakdown || k + 1 == m {
                    return Ok(None);
                }
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        Ok(None)
    }
}

/// `e^{-iTτ} e_1` for the tridiagonal `T` given by `alpha`, `beta`.
fn small_exponential(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<C64> {
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |r, c| {
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
    (0..k)
        .map(|r| {
            (0..k)
                .map(|j| {
                    let q = eig.eigenvectors[(0, j)];
                    eig.eigenvectors[(r, j)] * q * C64::new(0.0, -eig.eigenvalues[j] * tau).exp()
                })
                .sum()
        })
        .collect()
}

/// One-shot convenience wrapper.
pub fn expm_multiply(op: &SparseOperator, v: &[C64], t: f64, opts: KrylovOptions) -> Result<Vec<C64>> {
    let mut out = v.to_vec();
    KrylovPropagator::new(op, opts)?.advance(&mut out, t)?;
    Ok(out)
}

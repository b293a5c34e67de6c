//! Dense Lindblad evolution with isotropic single-site depolarization:
//! `dρ/dt = -i[H, ρ] - (γ/3) Σ_i Σ_α (ρ - σ^α_i ρ σ^α_i)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spinalg::{MixedState, Site, SparseOperator, SystemGeometry, C64};

use super::dynamics::EvolutionPlan;

/// Dense density matrices are refused above this many sites.
pub const LINDBLAD_SITE_LIMIT: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct LindbladParams {
    pub gamma: f64,
    /// `None` means every site of the geometry.
    pub noisy_sites: Option<Vec<Site>>,
    /// First trial step.
    pub initial_step: f64,
    /// Accepted local error per unit time (max-norm of the step-halving
    /// difference).
    pub tolerance: f64,
}

impl LindbladParams {
    pub fn new(gamma: f64) -> Result<Self> {
        let p = Self {
            gamma,
            noisy_sites: None,
            initial_step: 0.01,
            tolerance: 1e-7,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma = {} must be >= 0", self.gamma)));
        }
        if !(self.initial_step > 0.0 && self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("step and tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// RK4 integrator with step-halving error control.
#[derive(Clone, Debug)]
pub struct LindbladIntegrator<'a> {
    h: &'a SparseOperator,
    masks: Vec<usize>,
    gamma: f64,
    tolerance: f64,
    step: f64,
}

impl<'a> LindbladIntegrator<'a> {
    pub fn new(h: &'a SparseOperator, geometry: SystemGeometry, params: &LindbladParams) -> Result<Self> {
        params.validate()?;
        if geometry.total_sites() > LINDBLAD_SITE_LIMIT {
            return Err(Error::TooLarge(format!(
                "Lindblad evolution over {} sites (limit {LINDBLAD_SITE_LIMIT})",
                geometry.total_sites()
            )));
        }
        if h.dim() != geometry.dim() {
            return Err(Error::InvalidGeometry("Hamiltonian does not match geometry".into()));
        }
        let sites = params.noisy_sites.clone().unwrap_or_else(|| geometry.sites());
        let masks = sites
            .iter()
            .map(|&s| geometry.bit(s).map(|b| 1usize << b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            h,
            masks,
            gamma: params.gamma,
            tolerance: params.tolerance,
            step: params.initial_step,
        })
    }

    /// Continue with a trial step carried over from an earlier integrator.
    pub fn with_step(mut self, step: f64) -> Self {
        if step > 0.0 {
            self.step = step;
        }
        self
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// The generator applied to `rho`.
    pub fn derivative(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let n = rho.nrows();
        let mut a = DMatrix::<C64>::zeros(n, n);
        // columns are contiguous: (Hρ)[:, k] = H ρ[:, k]
        a.as_mut_slice()
            .par_chunks_mut(n)
            .zip(rho.as_slice().par_chunks(n))
            .for_each(|(out, col)| self.h.matvec_into(col, out));
        let minus_i = C64::new(0.0, -1.0);
        let g3 = self.gamma / 3.0;
        let mut out = DMatrix::<C64>::zeros(n, n);
        out.as_mut_slice()
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(c, col)| {
                for (r, o) in col.iter_mut().enumerate() {
                    let mut v = minus_i * (a[(r, c)] - a[(c, r)].conj());
                    if g3 != 0.0 {
                        let x = rho[(r, c)];
                        let mut d = C64::new(0.0, 0.0);
                        for &m in &self.masks {
                            if (r ^ c) & m == 0 {
                                d += (x - rho[(r ^ m, c ^ m)]) * 2.0;
                            } else {
                                d += x * 4.0;
                            }
                        }
                        v -= d * g3;
                    }
                    *o = v;
                }
            });
        out
    }

    fn rk4(&self, rho: &DMatrix<C64>, h: f64) -> DMatrix<C64> {
        let k1 = self.derivative(rho);
        let k2 = self.derivative(&(rho + &k1 * C64::from(h / 2.0)));
        let k3 = self.derivative(&(rho + &k2 * C64::from(h / 2.0)));
        let k4 = self.derivative(&(rho + &k3 * C64::from(h)));
        rho + (k1 + (k2 + k3) * C64::from(2.0) + k4) * C64::from(h / 6.0)
    }

    /// Integrate `rho` forward by `duration`.
    pub fn advance(&mut self, rho: &mut DMatrix<C64>, duration: f64) -> Result<()> {
        if duration < 0.0 {
            return Err(Error::InvalidParameter("Lindblad evolution runs forward only".into()));
        }
        let mut remaining = duration;
        while remaining > 1e-14 * duration.max(1.0) {
            let h = self.step.min(remaining);
            let full = self.rk4(rho, h);
            let half = self.rk4(rho, h / 2.0);
            let two_halves = self.rk4(&half, h / 2.0);
            let err = (&full - &two_halves).iter().map(|x| x.norm()).fold(0.0, f64::max);
            if err <= self.tolerance * h {
                *rho = two_halves;
                remaining -= h;
                if err < self.tolerance * h / 32.0 && h == self.step {
                    self.step *= 2.0;
                }
            } else {
                self.step = h / 2.0;
                if self.step < 1e-9 {
                    return Err(Error::Convergence("Lindblad step shrank below 1e-9".into()));
                }
            }
        }
        Ok(())
    }
}

/// Density matrices at every sample time of `plan`.
pub fn propagate_lindblad(
    rho0: &MixedState,
    h: &SparseOperator,
    params: &LindbladParams,
    plan: &EvolutionPlan,
) -> Result<Vec<(f64, MixedState)>> {
    plan.validate()?;
    let MixedState::Dense { geometry, matrix } = rho0 else {
        return Err(Error::InvalidParameter("Lindblad evolution needs a dense density matrix".into()));
    };
    let mut integ = LindbladIntegrator::new(h, *geometry, params)?;
    let mut rho = matrix.clone();
    let mut now = 0.0;
    let mut out = Vec::new();
    for t in plan.sample_times() {
        integ.advance(&mut rho, t - now)?;
        now = t;
        out.push((t, MixedState::dense(*geometry, rho.clone())?));
    }
    Ok(out)
}

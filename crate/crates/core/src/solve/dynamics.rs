//! Closed-system evolution of the sender pair coupled to the channel.
//!
//! Site `0'` never interacts, so the joint state is always
//! `Σ_a |a⟩_{0'} ⊗ |φ_a(t)⟩` with each `φ_a` living on sites `0..=N` inside
//! one magnetization sector. Only those two branch vectors are evolved.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{joint_sector_hamiltonian, ModelParams};
use crate::spinalg::{Mat4, PureState, SectorBasis, Site, SparseOperator, SystemGeometry, TwoSiteReduce, C64};

use super::krylov::{KrylovOptions, KrylovPropagator};
use super::lanczos::dense_spectrum;

/// Sector dimension up to which `Auto` uses the eigendecomposition.
pub const EIGEN_DIM_AUTO: usize = 1500;
/// Eigendecomposition is refused above this sector dimension.
pub const EIGEN_DIM_LIMIT: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagationMethod {
    Eigendecomposition,
    Krylov,
    /// Eigendecomposition for small sectors, Krylov otherwise.
    Auto,
}

#[derive(Clone, Copy, Debug)]
pub struct EvolutionPlan {
    pub t_max: f64,
    pub dt_sample: f64,
    pub method: PropagationMethod,
    pub krylov_dim: usize,
    /// Krylov error budget per unit time.
    pub tolerance: f64,
}

impl EvolutionPlan {
    pub fn new(t_max: f64, dt_sample: f64) -> Result<Self> {
        let plan = Self {
            t_max,
            dt_sample,
            method: PropagationMethod::Auto,
            krylov_dim: 30,
            tolerance: 1e-12,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_method(mut self, method: PropagationMethod) -> Self {
        self.method = method;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_sample > 0.0 && self.dt_sample <= self.t_max && self.t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < dt_sample ({}) <= t_max ({})",
                self.dt_sample, self.t_max
            )));
        }
        if self.krylov_dim < 10 {
            return Err(Error::InvalidParameter(format!(
                "krylov_dim = {} must be at least 10",
                self.krylov_dim
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }

    /// `0, dt, 2dt, …` up to and including `t_max` (within rounding).
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.t_max / self.dt_sample + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * self.dt_sample).collect()
    }

    fn krylov_options(&self) -> KrylovOptions {
        KrylovOptions {
            krylov_dim: self.krylov_dim,
            tol: self.tolerance,
        }
    }
}

/// One sector of the chain `0..=N` with its Hamiltonian.
#[derive(Debug)]
pub struct JointSector {
    basis: SectorBasis,
    hamiltonian: SparseOperator,
    spectrum: OnceLock<(Vec<f64>, DMatrix<f64>)>,
}

impl JointSector {
    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn hamiltonian(&self) -> &SparseOperator {
        &self.hamiltonian
    }

    pub fn magnetization(&self) -> i32 {
        self.basis.magnetization()
    }

    fn spectrum(&self) -> Result<&(Vec<f64>, DMatrix<f64>)> {
        if self.basis.dim() > EIGEN_DIM_LIMIT {
            return Err(Error::TooLarge(format!(
                "eigendecomposition of a {}-dimensional sector",
                self.basis.dim()
            )));
        }
        Ok(self.spectrum.get_or_init(|| dense_spectrum(&self.hamiltonian)))
    }

    fn uses_eigen(&self, method: PropagationMethod) -> bool {
        match method {
            PropagationMethod::Eigendecomposition => true,
            PropagationMethod::Krylov => false,
            PropagationMethod::Auto => self.basis.dim() <= EIGEN_DIM_AUTO,
        }
    }
}

/// Sector Hamiltonians of the unperturbed chain `0..=N`, built on demand.
#[derive(Debug)]
pub struct JointDynamics {
    params: ModelParams,
    n_channel: usize,
    sectors: Mutex<BTreeMap<i32, Arc<JointSector>>>,
}

impl JointDynamics {
    pub fn new(params: &ModelParams, n_channel: usize) -> Result<Self> {
        params.validate()?;
        SystemGeometry::with_sender_pair(n_channel)?;
        Ok(Self {
            params: *params,
            n_channel,
            sectors: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_channel(&self) -> usize {
        self.n_channel
    }

    pub fn geometry(&self) -> SystemGeometry {
        SystemGeometry::with_sender_pair(self.n_channel).expect("validated in constructor")
    }

    pub fn sector(&self, magnetization: i32) -> Result<Arc<JointSector>> {
        let mut map = self.sectors.lock().expect("sector cache poisoned");
        if let Some(s) = map.get(&magnetization) {
            return Ok(Arc::clone(s));
        }
        let (basis, hamiltonian) = joint_sector_hamiltonian(&self.params, self.n_channel, magnetization)?;
        let s = Arc::new(JointSector {
            basis,
            hamiltonian,
            spectrum: OnceLock::new(),
        });
        map.insert(magnetization, Arc::clone(&s));
        Ok(s)
    }

    /// `|ψ⁻⟩_{0'0} ⊗ |g⟩` for a channel vector `g` confined to one sector.
    pub fn initial_state(&self, channel_basis: &SectorBasis, amplitudes: &[f64]) -> Result<BranchState> {
        let n = self.n_channel;
        if channel_basis.n_sites() != n || amplitudes.len() != channel_basis.dim() {
            return Err(Error::InvalidGeometry(format!(
                "channel state over {} sites does not fit a {n}-site channel",
                channel_basis.n_sites()
            )));
        }
        let m = channel_basis.magnetization();
        let amp = std::f64::consts::FRAC_1_SQRT_2;
        // 0' up pairs with site 0 down, and enters with a plus sign
        let specs = [(0u8, m - 1, 1usize << n, amp), (1u8, m + 1, 0, -amp)];
        let mut branches = Vec::with_capacity(2);
        for (prime, sector_m, site0, coef) in specs {
            let sector = self.sector(sector_m)?;
            let mut v = vec![C64::new(0.0, 0.0); sector.basis.dim()];
            for (k, &a) in amplitudes.iter().enumerate() {
                let s = site0 | channel_basis.state(k);
                let idx = sector.basis.index_of(s).expect("sector arithmetic");
                v[idx] = C64::new(coef * a, 0.0);
            }
            branches.push(Branch {
                prime_bit: prime,
                sector,
                amplitudes: v,
            });
        }
        Ok(BranchState { n_channel: n, branches })
    }

    /// Evolver starting from `state` at `t = 0`.
    pub fn evolver(&self, state: BranchState, plan: &EvolutionPlan) -> Result<BranchEvolver> {
        plan.validate()?;
        BranchEvolver::new(state, plan)
    }

    /// States at every sample time of `plan`.
    pub fn trajectory(&self, state: BranchState, plan: &EvolutionPlan) -> Result<Vec<(f64, BranchState)>> {
        let mut ev = self.evolver(state, plan)?;
        let mut out = Vec::new();
        for t in plan.sample_times() {
            ev.advance_to(t)?;
            out.push((t, ev.state().clone()));
        }
        Ok(out)
    }
}

/// `|a⟩_{0'} ⊗ φ` with `φ` inside one sector of the chain `0..=N`.
#[derive(Clone, Debug)]
pub struct Branch {
    pub prime_bit: u8,
    pub sector: Arc<JointSector>,
    pub amplitudes: Vec<C64>,
}

impl Branch {
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// A joint pure state stored as its two `0'` branches.
#[derive(Clone, Debug)]
pub struct BranchState {
    n_channel: usize,
    branches: Vec<Branch>,
}

impl BranchState {
    pub fn n_channel(&self) -> usize {
        self.n_channel
    }

    pub fn geometry(&self) -> SystemGeometry {
        SystemGeometry::with_sender_pair(self.n_channel).expect("valid by construction")
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn norm(&self) -> f64 {
        self.branches.iter().map(Branch::norm_sqr).sum::<f64>().sqrt()
    }

    /// `(⟨H⟩, ⟨H²⟩)` under the joint Hamiltonian.
    pub fn energy_moments(&self) -> (f64, f64) {
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        for b in &self.branches {
            let hv = b.sector.hamiltonian.apply(&b.amplitudes);
            e1 += crate::spinalg::dot(&b.amplitudes, &hv).re;
            e2 += hv.iter().map(|x| x.norm_sqr()).sum::<f64>();
        }
        (e1, e2)
    }

    /// Full-basis vector over the joint geometry (small systems only).
    pub fn to_pure(&self) -> Result<PureState> {
        let g = self.geometry();
        if g.total_sites() > crate::spinalg::FULL_SPACE_SITE_LIMIT {
            return Err(Error::TooLarge(format!("full vector over {} sites", g.total_sites())));
        }
        let mut amps = vec![C64::new(0.0, 0.0); g.dim()];
        let shift = self.n_channel + 1;
        for b in &self.branches {
            let high = (b.prime_bit as usize) << shift;
            for (k, &a) in b.amplitudes.iter().enumerate() {
                amps[high | b.sector.basis.state(k)] = a;
            }
        }
        PureState::new(g, amps)
    }

    /// `Σ_rest φ_a(x, rest) φ_b(x', rest)^*` over the chain bits `bits`,
    /// indexed by `x` with `bits[0]` as the most significant bit.
    pub(crate) fn cross_block(a: &Branch, b: &Branch, bits: &[u32]) -> DMatrix<C64> {
        let k = bits.len();
        let mask: usize = bits.iter().map(|&bt| 1usize << bt).sum();
        let read = |s: usize| -> usize {
            bits.iter().fold(0, |acc, &bt| (acc << 1) | ((s >> bt) & 1))
        };
        let write = |rest: usize, x: usize| -> usize {
            bits.iter()
                .enumerate()
                .fold(rest, |acc, (i, &bt)| acc | (((x >> (k - 1 - i)) & 1) << bt))
        };
        let mut block = DMatrix::zeros(1 << k, 1 << k);
        let bb = &b.sector.basis;
        for (idx, &amp) in a.amplitudes.iter().enumerate() {
            if amp == C64::new(0.0, 0.0) {
                continue;
            }
            let s = a.sector.basis.state(idx);
            let x = read(s);
            let rest = s & !mask;
            for xp in 0..(1usize << k) {
                if let Some(j) = bb.index_of(write(rest, xp)) {
                    block[(x, xp)] += amp * b.amplitudes[j].conj();
                }
            }
        }
        block
    }

    fn chain_bit(&self, site: Site) -> Result<u32> {
        match site {
            Site::Prime => unreachable!("handled by caller"),
            Site::Chain(j) if j <= self.n_channel => Ok((self.n_channel - j) as u32),
            Site::Chain(_) => Err(Error::InvalidSite {
                site: site.to_string(),
                n_channel: self.n_channel,
            }),
        }
    }

    fn require_normalized(&self) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized(n));
        }
        Ok(())
    }
}

impl TwoSiteReduce for BranchState {
    fn reduce_to_pair(&self, i: Site, j: Site) -> Result<Mat4> {
        if i == j {
            return Err(Error::InvalidSite {
                site: format!("{i} (repeated)"),
                n_channel: self.n_channel,
            });
        }
        self.require_normalized()?;
        let mut rho = Mat4::zeros();
        match (i, j) {
            (Site::Prime, other) | (other, Site::Prime) => {
                let bit = self.chain_bit(other)?;
                for a in &self.branches {
                    for b in &self.branches {
                        let blk = Self::cross_block(a, b, &[bit]);
                        let (pa, pb) = (a.prime_bit as usize, b.prime_bit as usize);
                        for x in 0..2 {
                            for xp in 0..2 {
                                let v = blk[(x, xp)];
                                if i == Site::Prime {
                                    rho[(2 * pa + x, 2 * pb + xp)] += v;
                                } else {
                                    rho[(2 * x + pa, 2 * xp + pb)] += v;
                                }
                            }
                        }
                    }
                }
            }
            _ => {
                let bits = [self.chain_bit(i)?, self.chain_bit(j)?];
                for a in &self.branches {
                    let blk = Self::cross_block(a, a, &bits);
                    for r in 0..4 {
                        for c in 0..4 {
                            rho[(r, c)] += blk[(r, c)];
                        }
                    }
                }
            }
        }
        Ok(rho)
    }
}

/// Per-branch propagation state.
#[derive(Clone, Debug)]
enum Engine {
    /// Coefficients in the sector eigenbasis at `t = 0`.
    Eigen(Vec<C64>),
    /// Krylov sub-step carried between calls.
    Krylov(f64),
}

/// Advances a [`BranchState`] along a time axis.
#[derive(Clone, Debug)]
pub struct BranchEvolver {
    state: BranchState,
    engines: Vec<Engine>,
    time: f64,
    krylov: KrylovOptions,
}

impl BranchEvolver {
    fn new(state: BranchState, plan: &EvolutionPlan) -> Result<Self> {
        let engines = state
            .branches
            .iter()
            .map(|b| {
                if b.sector.uses_eigen(plan.method) {
                    let (_, vecs) = b.sector.spectrum()?;
                    let c = vecs.tr_mul(&DMatrix::from_fn(b.amplitudes.len(), 1, |r, _| b.amplitudes[r].re))
                        .map(|x| C64::new(x, 0.0));
                    let ci = vecs.tr_mul(&DMatrix::from_fn(b.amplitudes.len(), 1, |r, _| b.amplitudes[r].im));
                    Ok(Engine::Eigen(
                        c.iter().zip(ci.iter()).map(|(re, im)| re + C64::new(0.0, *im)).collect(),
                    ))
                } else {
                    Ok(Engine::Krylov(0.5))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            state,
            engines,
            time: 0.0,
            krylov: plan.krylov_options(),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn state(&self) -> &BranchState {
        &self.state
    }

    pub fn into_state(self) -> BranchState {
        self.state
    }

    /// Move to absolute time `t` (earlier times are allowed).
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t == self.time {
            return Ok(());
        }
        let dt = t - self.time;
        let opts = self.krylov;
        self.state
            .branches
            .par_iter_mut()
            .zip(self.engines.par_iter_mut())
            .try_for_each(|(b, engine)| -> Result<()> {
                match engine {
                    Engine::Eigen(c0) => {
                        let (vals, vecs) = b.sector.spectrum()?;
                        let phased: Vec<C64> = c0
                            .iter()
                            .zip(vals)
                            .map(|(c, e)| c * C64::new(0.0, -e * t).exp())
                            .collect();
                        let dim = phased.len();
                        for (r, out) in b.amplitudes.iter_mut().enumerate() {
                            let mut acc = C64::new(0.0, 0.0);
                            for k in 0..dim {
                                acc += phased[k] * vecs[(r, k)];
                            }
                            *out = acc;
                        }
                    }
                    Engine::Krylov(step) => {
                        let mut prop = KrylovPropagator::new(&b.sector.hamiltonian, opts)?.with_step(*step);
                        prop.advance(&mut b.amplitudes, dt)?;
                        *step = prop.step();
                    }
                }
                Ok(())
            })?;
        self.time = t;
        Ok(())
    }
}

/// Generic full-space propagation of an arbitrary pure state, sampled on the
/// plan grid. Used for small systems and as an independent check on the
/// branch machinery.
pub fn propagate(state: &PureState, h: &SparseOperator, plan: &EvolutionPlan) -> Result<Vec<(f64, PureState)>> {
    plan.validate()?;
    if h.dim() != state.geometry().dim() {
        return Err(Error::InvalidGeometry("operator and state dimensions differ".into()));
    }
    let use_eigen = match plan.method {
        PropagationMethod::Eigendecomposition => true,
        PropagationMethod::Krylov => false,
        PropagationMethod::Auto => h.dim() <= EIGEN_DIM_AUTO,
    };
    let times = plan.sample_times();
    let mut out = Vec::with_capacity(times.len());
    if use_eigen {
        if h.dim() > EIGEN_DIM_LIMIT {
            return Err(Error::TooLarge(format!("eigendecomposition of dimension {}", h.dim())));
        }
        let (vals, vecs) = dense_spectrum(h);
        let v = state.amplitudes();
        let c: Vec<C64> = (0..h.dim())
            .map(|k| (0..h.dim()).map(|i| v[i] * vecs[(i, k)]).sum())
            .collect();
        for t in times {
            let amps = (0..h.dim())
                .map(|r| {
                    (0..h.dim())
                        .map(|k| c[k] * C64::new(0.0, -vals[k] * t).exp() * vecs[(r, k)])
                        .sum()
                })
                .collect();
            out.push((t, PureState::new(state.geometry(), amps)?));
        }
    } else {
        let mut prop = KrylovPropagator::new(h, plan.krylov_options())?;
        let mut v = state.amplitudes().to_vec();
        let mut now = 0.0;
        for t in times {
            prop.advance(&mut v, t - now)?;
            now = t;
            out.push((t, PureState::new(state.geometry(), v.clone())?));
        }
    }
    Ok(out)
}

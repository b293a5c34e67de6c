//! Trajectories of the end-to-end pair and first-peak location.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::channel::bell_basis_matrix;
use crate::error::{Error, Result};
use crate::measures::{concurrence, singlet_fraction};
use crate::model::{build_joint_hamiltonian, ModelParams};
use crate::solve::{
    channel_ground_state, thermal_members, BranchEvolver, BranchState, EvolutionPlan, JointDynamics,
    LanczosOptions, LindbladIntegrator, LindbladParams, ThermalParams,
};
use crate::spinalg::{reduce_dense_pair, Mat4, Site, SparseOperator, SystemGeometry, C64};

/// Concurrence below this is not a peak.
pub const PEAK_THRESHOLD: f64 = 1e-3;

/// How the channel is prepared and what acts on the joint system.
#[derive(Clone, Debug, PartialEq)]
pub enum Environment {
    /// Ground state, unitary evolution.
    Closed,
    /// Thermal channel state, unitary evolution of every member.
    Thermal(ThermalParams),
    /// Ground state, depolarizing noise on every site.
    Lindblad(LindbladParams),
}

/// One run: model, channel size, time grid and environment.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub params: ModelParams,
    pub n_channel: usize,
    pub plan: EvolutionPlan,
    pub environment: Environment,
    pub lanczos: LanczosOptions,
}

impl Scenario {
    pub fn new(params: ModelParams, n_channel: usize, plan: EvolutionPlan) -> Self {
        Self {
            params,
            n_channel,
            plan,
            environment: Environment::Closed,
            lanczos: LanczosOptions::default(),
        }
    }

    pub fn with_environment(mut self, environment: Environment) -> Self {
        self.environment = environment;
        self
    }

    /// The joint system at `t = 0`.
    pub fn start(&self) -> Result<Trajectory> {
        self.plan.validate()?;
        let dynamics = JointDynamics::new(&self.params, self.n_channel)?;
        let kind = match &self.environment {
            Environment::Closed => {
                let g = channel_ground_state(&self.params, self.n_channel, &self.lanczos)?;
                let state = dynamics.initial_state(&g.basis, &g.amplitudes)?;
                Kind::Pure(dynamics.evolver(state, &self.plan)?)
            }
            Environment::Thermal(thermal) => {
                let members = thermal_members(&self.params, self.n_channel, thermal)?;
                let evolvers = members
                    .iter()
                    .map(|m| {
                        let state = dynamics.initial_state(&m.basis, &m.amplitudes)?;
                        Ok((m.weight, dynamics.evolver(state, &self.plan)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Kind::Ensemble(evolvers)
            }
            Environment::Lindblad(lindblad) => {
                let g = channel_ground_state(&self.params, self.n_channel, &self.lanczos)?;
                let psi = dynamics.initial_state(&g.basis, &g.amplitudes)?.to_pure()?;
                let geometry = dynamics.geometry();
                let h = Arc::new(build_joint_hamiltonian(&self.params, geometry)?);
                // fail early on size limits
                LindbladIntegrator::new(&h, geometry, lindblad)?;
                let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
                Kind::Open(OpenEvolver {
                    h,
                    geometry,
                    params: lindblad.clone(),
                    rho: &v * v.adjoint(),
                    time: 0.0,
                    step: lindblad.initial_step,
                })
            }
        };
        Ok(Trajectory {
            kind,
            n_channel: self.n_channel,
        })
    }

    /// `ρ_{0',N}` at time `t`.
    pub fn end_pair_at(&self, t: f64) -> Result<Mat4> {
        let mut traj = self.start()?;
        traj.advance_to(t)?;
        traj.end_pair()
    }

    /// Concurrence and singlet fraction of the end pair at every sample time.
    pub fn time_series(&self) -> Result<Vec<PairSample>> {
        let mut traj = self.start()?;
        self.plan
            .sample_times()
            .into_iter()
            .map(|t| {
                traj.advance_to(t)?;
                PairSample::new(t, traj.end_pair()?)
            })
            .collect()
    }

    /// First local maximum of the end-to-end concurrence above
    /// [`PEAK_THRESHOLD`] on the sample grid, refined by a three-point
    /// parabola through the neighbours. The refined time is evaluated
    /// exactly and kept only if it beats the grid sample.
    pub fn find_first_peak(&self) -> Result<PeakResult> {
        let times = self.plan.sample_times();
        let mut traj = self.start()?;
        let mut samples: Vec<PairSample> = Vec::with_capacity(times.len());
        samples.push(PairSample::new(0.0, traj.end_pair()?)?);
        let mut back: Option<Trajectory> = None;
        for (idx, &t) in times.iter().enumerate().skip(1) {
            let here = traj.clone();
            traj.advance_to(t)?;
            samples.push(PairSample::new(t, traj.end_pair()?)?);
            if idx >= 2 {
                let (e0, e1, e2) = (
                    samples[idx - 2].concurrence,
                    samples[idx - 1].concurrence,
                    samples[idx].concurrence,
                );
                if e1 > PEAK_THRESHOLD && e1 >= e0 && e1 > e2 {
                    let checkpoint = back.take().expect("kept for idx >= 2");
                    let best = self.refine(checkpoint, &samples[idx - 2..=idx])?;
                    return Ok(PeakResult::new(&self.params, self.n_channel, best));
                }
            }
            back = Some(here);
        }
        let max_seen = samples.iter().map(|s| s.concurrence).fold(0.0, f64::max);
        Err(Error::NoPeak {
            t_max: self.plan.t_max,
            max_seen,
        })
    }

    fn refine(&self, mut checkpoint: Trajectory, three: &[PairSample]) -> Result<PairSample> {
        let [a, b, c] = [&three[0], &three[1], &three[2]];
        let curvature = a.concurrence - 2.0 * b.concurrence + c.concurrence;
        if curvature >= 0.0 {
            return Ok(b.clone());
        }
        let h = b.time - a.time;
        let offset = 0.5 * h * (a.concurrence - c.concurrence) / curvature;
        let t = b.time + offset.clamp(-h, h);
        checkpoint.advance_to(t)?;
        let refined = PairSample::new(t, checkpoint.end_pair()?)?;
        Ok(if refined.concurrence > b.concurrence {
            refined
        } else {
            b.clone()
        })
    }
}

/// The end pair at one time.
#[derive(Clone, Debug)]
pub struct PairSample {
    pub time: f64,
    pub concurrence: f64,
    pub singlet_fraction: f64,
    pub rho: Mat4,
}

impl PairSample {
    pub fn new(time: f64, rho: Mat4) -> Result<Self> {
        Ok(Self {
            time,
            concurrence: concurrence(&rho)?,
            singlet_fraction: singlet_fraction(&rho),
            rho,
        })
    }
}

/// Location and content of the first entanglement peak.
#[derive(Clone, Debug)]
pub struct PeakResult {
    pub delta: f64,
    pub j: f64,
    pub n_channel: usize,
    pub t_opt: f64,
    pub e_peak: f64,
    pub f_at_peak: f64,
    /// Bell-basis populations `ψ⁻, φ⁻, φ⁺, ψ⁺`, which are the Pauli
    /// weights `p_I, p_x, p_y, p_z` whenever the pair is Bell diagonal.
    pub bell: [f64; 4],
    pub rho: Mat4,
}

impl PeakResult {
    pub fn new(params: &ModelParams, n_channel: usize, sample: PairSample) -> Self {
        Self {
            delta: params.delta,
            j: params.j,
            n_channel,
            t_opt: sample.time,
            e_peak: sample.concurrence,
            f_at_peak: sample.singlet_fraction,
            bell: bell_populations(&sample.rho),
            rho: sample.rho,
        }
    }
}

pub fn bell_populations(rho: &Mat4) -> [f64; 4] {
    let m = bell_basis_matrix(rho);
    [m[(0, 0)].re, m[(1, 1)].re, m[(2, 2)].re, m[(3, 3)].re]
}

#[derive(Clone, Debug)]
enum Kind {
    Pure(BranchEvolver),
    Ensemble(Vec<(f64, BranchEvolver)>),
    Open(OpenEvolver),
}

/// Dense density matrix under the Lindblad generator.
#[derive(Clone, Debug)]
struct OpenEvolver {
    h: Arc<SparseOperator>,
    geometry: SystemGeometry,
    params: LindbladParams,
    rho: DMatrix<C64>,
    time: f64,
    step: f64,
}

/// The joint system moving along the time axis.
#[derive(Clone, Debug)]
pub struct Trajectory {
    kind: Kind,
    n_channel: usize,
}

impl Trajectory {
    pub fn time(&self) -> f64 {
        match &self.kind {
            Kind::Pure(ev) => ev.time(),
            Kind::Ensemble(members) => members.first().map_or(0.0, |(_, ev)| ev.time()),
            Kind::Open(op) => op.time,
        }
    }

    /// Move to absolute time `t`. Open systems only move forward.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        match &mut self.kind {
            Kind::Pure(ev) => ev.advance_to(t),
            Kind::Ensemble(members) => members.iter_mut().try_for_each(|(_, ev)| ev.advance_to(t)),
            Kind::Open(op) => {
                let mut integ = LindbladIntegrator::new(&op.h, op.geometry, &op.params)?.with_step(op.step);
                integ.advance(&mut op.rho, t - op.time)?;
                op.step = integ.step();
                op.time = t;
                Ok(())
            }
        }
    }

    /// The pure branch state, when there is one.
    pub fn branch_state(&self) -> Option<&BranchState> {
        match &self.kind {
            Kind::Pure(ev) => Some(ev.state()),
            _ => None,
        }
    }

    /// Reduced state of `(i, j)` at the current time.
    pub fn pair(&self, i: Site, j: Site) -> Result<Mat4> {
        use crate::spinalg::TwoSiteReduce;
        match &self.kind {
            Kind::Pure(ev) => ev.state().reduce_to_pair(i, j),
            Kind::Ensemble(members) => {
                let mut rho = Mat4::zeros();
                for (w, ev) in members {
                    rho += ev.state().reduce_to_pair(i, j)? * C64::from(*w);
                }
                Ok(rho)
            }
            Kind::Open(op) => reduce_dense_pair(&op.geometry, &op.rho, i, j),
        }
    }

    /// `ρ_{0',N}`.
    pub fn end_pair(&self) -> Result<Mat4> {
        self.pair(Site::Prime, Site::Chain(self.n_channel))
    }

    pub fn n_channel(&self) -> usize {
        self.n_channel
    }

    /// `(Tr ρ, ⟨H⟩, ⟨H²⟩)` for closed and open trajectories.
    pub fn conserved(&self) -> Result<(f64, f64, f64)> {
        match &self.kind {
            Kind::Pure(ev) => {
                let s = ev.state();
                let (h1, h2) = s.energy_moments();
                Ok((s.norm().powi(2), h1, h2))
            }
            Kind::Ensemble(members) => {
                let mut acc = (0.0, 0.0, 0.0);
                for (w, ev) in members {
                    let s = ev.state();
                    let (h1, h2) = s.energy_moments();
                    acc.0 += w * s.norm().powi(2);
                    acc.1 += w * h1;
                    acc.2 += w * h2;
                }
                Ok(acc)
            }
            Kind::Open(op) => {
                let n = op.rho.nrows();
                let mut hr = DMatrix::<C64>::zeros(n, n);
                for (c, col) in op.rho.column_iter().enumerate() {
                    let out = op.h.apply(col.as_slice());
                    hr.column_mut(c).copy_from_slice(&out);
                }
                let h1 = hr.trace().re;
                let mut h2 = 0.0;
                for c in 0..n {
                    let col: Vec<C64> = hr.column(c).iter().copied().collect();
                    h2 += op.h.apply(&col)[c].re;
                }
                Ok((op.rho.trace().re, h1, h2))
            }
        }
    }
}

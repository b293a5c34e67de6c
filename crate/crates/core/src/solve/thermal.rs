//! Thermal channel states as Boltzmann-weighted ensembles of channel
//! eigenstates.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{channel_sector_hamiltonian, ModelParams};
use crate::spinalg::{MixedState, PureState, SectorBasis, SystemGeometry, C64, DENSE_SITE_LIMIT};

use super::ground::DEGENERACY_TOL;
use super::lanczos::dense_spectrum;

/// Full diagonalization is refused above this channel length.
pub const THERMAL_SITE_LIMIT: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalParams {
    /// In units of `J / k_B`.
    pub temperature: f64,
    /// Total Boltzmann weight that may be discarded.
    pub cutoff: f64,
}

impl ThermalParams {
    pub fn new(temperature: f64) -> Result<Self> {
        let p = Self {
            temperature,
            cutoff: 1e-6,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "temperature {} must be finite and >= 0",
                self.temperature
            )));
        }
        if !(self.cutoff > 0.0 && self.cutoff <= 1e-3) {
            return Err(Error::InvalidParameter(format!(
                "Boltzmann cutoff {} outside (0, 1e-3]",
                self.cutoff
            )));
        }
        Ok(())
    }
}

/// One channel eigenstate with its weight.
#[derive(Clone, Debug)]
pub struct ThermalMember {
    pub weight: f64,
    pub energy: f64,
    pub basis: Arc<SectorBasis>,
    pub amplitudes: Vec<f64>,
}

/// Eigenstates of the unperturbed channel Hamiltonian carrying all but
/// `cutoff` of the Boltzmann weight, renormalized, in ascending energy.
/// At `T = 0` the ground manifold is mixed uniformly.
pub fn thermal_members(params: &ModelParams, n_channel: usize, thermal: &ThermalParams) -> Result<Vec<ThermalMember>> {
    params.validate()?;
    thermal.validate()?;
    if n_channel > THERMAL_SITE_LIMIT {
        return Err(Error::TooLarge(format!(
            "thermal ensemble needs full diagonalization; n_channel {n_channel} > {THERMAL_SITE_LIMIT}"
        )));
    }
    SystemGeometry::channel(n_channel)?;
    let n = n_channel as i32;
    let sectors: Vec<i32> = (0..=n_channel).map(|k| n - 2 * k as i32).collect();
    let per_sector = sectors
        .par_iter()
        .map(|&m| -> Result<Vec<ThermalMember>> {
            let (basis, op) = channel_sector_hamiltonian(params, n_channel, m, 0.0)?;
            let (vals, vecs) = dense_spectrum(&op);
            let basis = Arc::new(basis);
            Ok(vals
                .iter()
                .enumerate()
                .map(|(k, &e)| ThermalMember {
                    weight: 0.0,
                    energy: e,
                    basis: Arc::clone(&basis),
                    amplitudes: vecs.column(k).iter().copied().collect(),
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all: Vec<ThermalMember> = per_sector.into_iter().flatten().collect();
    // ties broken by descending magnetization for a reproducible order
    all.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(b.basis.magnetization().cmp(&a.basis.magnetization()))
    });
    let e0 = all[0].energy;
    if thermal.temperature == 0.0 {
        let tol = DEGENERACY_TOL * params.j.abs().max(1.0);
        all.retain(|m| m.energy - e0 < tol);
        let w = 1.0 / all.len() as f64;
        all.iter_mut().for_each(|m| m.weight = w);
        return Ok(all);
    }
    let beta = 1.0 / thermal.temperature;
    let z: f64 = all.iter().map(|m| (-beta * (m.energy - e0)).exp()).sum();
    let mut cumulative = 0.0;
    let mut keep = 0;
    for m in all.iter_mut() {
        m.weight = (-beta * (m.energy - e0)).exp() / z;
        if cumulative < 1.0 - thermal.cutoff {
            cumulative += m.weight;
            keep += 1;
        }
    }
    all.truncate(keep);
    all.iter_mut().for_each(|m| m.weight /= cumulative);
    Ok(all)
}

/// The thermal channel state as an ensemble over the full channel basis.
pub fn thermal_state(params: &ModelParams, n_channel: usize, thermal: &ThermalParams) -> Result<MixedState> {
    if n_channel > DENSE_SITE_LIMIT {
        return Err(Error::TooLarge(format!(
            "full-basis thermal ensemble over {n_channel} sites"
        )));
    }
    let g = SystemGeometry::channel(n_channel)?;
    let branches = thermal_members(params, n_channel, thermal)?
        .into_iter()
        .map(|m| {
            let amps: Vec<C64> = m.amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect();
            let s = PureState::new(g, m.basis.embed(&amps))?.with_sector(m.basis.magnetization())?;
            Ok((m.weight, s))
        })
        .collect::<Result<Vec<_>>>()?;
    MixedState::ensemble(g, branches)
}

//! XXZ Hamiltonians and spin-wave reference quantities.
//!
//! `H = J Σ_i (σ^x_i σ^x_{i+1} + σ^y_i σ^y_{i+1} + Δ σ^z_i σ^z_{i+1}) - h Σ_i σ^z_i`
//! on an open chain. The flip-flop part `σ^xσ^x + σ^yσ^y` exchanges an
//! antiparallel pair with amplitude `2J`; everything else is diagonal, so all
//! matrix elements are real.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spinalg::{SectorBasis, SparseOperator, SystemGeometry, FULL_SPACE_SITE_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Coupling energy; sets the unit of energy and `1/J` the unit of time.
    pub j: f64,
    /// Anisotropy `Δ`.
    pub delta: f64,
    /// Magnitude of the infinitesimal field used to select one member of a
    /// degenerate ground manifold.
    pub h_break: f64,
}

impl ModelParams {
    pub fn new(j: f64, delta: f64) -> Result<Self> {
        let p = Self {
            j,
            delta,
            h_break: 1e-6 * j.abs(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_h_break(mut self, h_break: f64) -> Result<Self> {
        self.h_break = h_break;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.j == 0.0 || !self.j.is_finite() {
            return Err(Error::InvalidParameter(format!("J = {} must be finite and nonzero", self.j)));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParameter("anisotropy must be finite".into()));
        }
        if !(self.h_break >= 0.0) {
            return Err(Error::InvalidParameter(format!("h_break = {} must be >= 0", self.h_break)));
        }
        Ok(())
    }

    pub fn phase(&self) -> Phase {
        // J < 0 maps to J > 0 with Δ -> -Δ by rotating every other spin.
        let d = if self.j > 0.0 { self.delta } else { -self.delta };
        if d < -1.0 {
            Phase::Ferromagnetic
        } else if d <= 1.0 {
            Phase::Xy
        } else {
            Phase::Neel
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Ferromagnetic,
    Xy,
    Neel,
}

/// Diagonal element and flip-flop partners of basis state `s` on an open
/// chain of `n_sites` (chain position `k` on bit `n_sites - 1 - k`).
#[inline]
fn xxz_row(params: &ModelParams, n_sites: usize, field: f64, s: usize, mut partner: impl FnMut(usize)) -> f64 {
    let mut diag = 0.0;
    for bond in 0..n_sites - 1 {
        let hi = n_sites - 1 - bond;
        let lo = hi - 1;
        let same = ((s >> hi) & 1) == ((s >> lo) & 1);
        if same {
            diag += params.j * params.delta;
        } else {
            diag -= params.j * params.delta;
            partner(s ^ (1 << hi) ^ (1 << lo));
        }
    }
    if field != 0.0 {
        diag -= field * crate::spinalg::magnetization(s, n_sites) as f64;
    }
    diag
}

/// The chain Hamiltonian restricted to one magnetization sector.
pub fn xxz_sector_operator(params: &ModelParams, basis: &SectorBasis, field: f64) -> SparseOperator {
    let n = basis.n_sites();
    let flip = 2.0 * params.j;
    SparseOperator::from_rows(basis.dim(), true, |r, row| {
        let s = basis.state(r);
        let diag = xxz_row(params, n, field, s, |t| {
            let c = basis.index_of(t).expect("flip-flop preserves magnetization");
            row.push((c, flip));
        });
        if diag != 0.0 {
            row.push((r, diag));
        }
    })
}

/// The chain Hamiltonian on the full `2^n` space of `n_sites`, tensored with
/// identities on `spectator_bits` extra high bits.
pub fn xxz_full_operator(params: &ModelParams, n_sites: usize, spectator_bits: usize, field: f64) -> Result<SparseOperator> {
    let total = n_sites + spectator_bits;
    if total > FULL_SPACE_SITE_LIMIT {
        return Err(Error::TooLarge(format!(
            "full-space Hamiltonian over {total} sites (limit {FULL_SPACE_SITE_LIMIT})"
        )));
    }
    let mask = (1usize << n_sites) - 1;
    let flip = 2.0 * params.j;
    Ok(SparseOperator::from_rows(1usize << total, true, |r, row| {
        let high = r & !mask;
        let diag = xxz_row(params, n_sites, field, r & mask, |t| row.push((high | t, flip)));
        if diag != 0.0 {
            row.push((r, diag));
        }
    }))
}

/// Channel Hamiltonian on sites `1..=N` over the full basis. With
/// `apply_field` the symmetry-breaking term `-h_break Σ σ^z` is included.
pub fn build_channel_hamiltonian(params: &ModelParams, geometry: SystemGeometry, apply_field: bool) -> Result<SparseOperator> {
    params.validate()?;
    if geometry.includes_sender_pair() {
        return Err(Error::InvalidGeometry(
            "channel Hamiltonian expects a geometry without the sender pair".into(),
        ));
    }
    let field = if apply_field { params.h_break } else { 0.0 };
    xxz_full_operator(params, geometry.n_channel(), 0, field)
}

/// `I_{0'} ⊗ (H_ch + H_I)` over the full basis of the joint geometry: an
/// unperturbed open chain on sites `0..=N` with `0'` as a spectator.
pub fn build_joint_hamiltonian(params: &ModelParams, geometry: SystemGeometry) -> Result<SparseOperator> {
    params.validate()?;
    if !geometry.includes_sender_pair() {
        return Err(Error::InvalidGeometry(
            "joint Hamiltonian expects a geometry with the sender pair".into(),
        ));
    }
    xxz_full_operator(params, geometry.n_channel() + 1, 1, 0.0)
}

/// Channel Hamiltonian in one sector of the `n_channel`-site channel.
pub fn channel_sector_hamiltonian(
    params: &ModelParams,
    n_channel: usize,
    magnetization: i32,
    field: f64,
) -> Result<(SectorBasis, SparseOperator)> {
    params.validate()?;
    let basis = SectorBasis::new(n_channel, magnetization)?;
    let op = xxz_sector_operator(params, &basis, field);
    Ok((basis, op))
}

/// `H_ch + H_I` (sites `0..=N`) in one sector.
pub fn joint_sector_hamiltonian(
    params: &ModelParams,
    n_channel: usize,
    magnetization: i32,
) -> Result<(SectorBasis, SparseOperator)> {
    params.validate()?;
    let basis = SectorBasis::new(n_channel + 1, magnetization)?;
    let op = xxz_sector_operator(params, &basis, 0.0);
    Ok((basis, op))
}

/// Field-theory reference values for the gapless regime.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinWaveModel {
    pub delta: f64,
    /// Spin-wave velocity `sin(arccos Δ) / arccos Δ`, proportionality constant 1.
    pub v_f: f64,
    pub eta_x: f64,
    pub eta_z: f64,
}

impl SpinWaveModel {
    /// `1 / v_F`, infinite at `Δ = -1`.
    pub fn inverse_velocity(&self) -> f64 {
        if self.v_f > 0.0 {
            1.0 / self.v_f
        } else {
            f64::INFINITY
        }
    }
}

pub fn spin_wave(delta: f64) -> Result<SpinWaveModel> {
    if !(-1.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "spin-wave velocity defined for -1 <= Δ <= 1, got {delta}"
        )));
    }
    let gamma = delta.acos();
    let v_f = if gamma < 1e-8 {
        1.0 - gamma * gamma / 6.0
    } else if delta == -1.0 {
        0.0
    } else {
        gamma.sin() / gamma
    };
    let eta_x = 1.0 - gamma / PI;
    let eta_z = if eta_x > 0.0 { 1.0 / eta_x } else { f64::INFINITY };
    Ok(SpinWaveModel {
        delta,
        v_f,
        eta_x,
        eta_z,
    })
}

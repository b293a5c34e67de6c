//! Channel ground states with magnetization-sector bookkeeping and the
//! symmetry-breaking selection rule for degenerate manifolds.

use std::sync::Arc;

use crate::error::Result;
use crate::model::{channel_sector_hamiltonian, ModelParams};
use crate::spinalg::{PureState, SectorBasis, SparseOperator, SystemGeometry, C64, MAX_CHANNEL_SITES};
use crate::Error;

use super::lanczos::{lowest_eigenpairs, LanczosOptions};

/// Relative energy window (in units of `|J|`) inside which two levels count
/// as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Lowest eigenpair of an arbitrary Hermitian operator, with a degeneracy
/// flag from the second eigenvalue.
#[derive(Clone, Debug)]
pub struct OperatorGround {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub degenerate: bool,
    pub gap: f64,
}

pub fn ground_state(op: &SparseOperator, opts: &LanczosOptions) -> Result<OperatorGround> {
    let pairs = lowest_eigenpairs(op, 2, opts)?;
    let energy = pairs[0].value;
    let gap = pairs.get(1).map_or(f64::INFINITY, |p| p.value - energy);
    let scale = op.entries().map(|(_, _, v)| v.abs()).fold(0.0, f64::max).max(1.0);
    Ok(OperatorGround {
        energy,
        vector: pairs[0].vector.clone(),
        degenerate: gap < DEGENERACY_TOL * scale,
        gap,
    })
}

/// The selected channel ground state, confined to one sector.
#[derive(Clone, Debug)]
pub struct ChannelGround {
    pub params: ModelParams,
    /// Unperturbed energy.
    pub energy: f64,
    pub basis: Arc<SectorBasis>,
    pub amplitudes: Vec<f64>,
    /// True when the unperturbed ground level is not unique and the
    /// symmetry-breaking field decided the selection.
    pub degenerate: bool,
    /// Distance to the next unperturbed level (zero when degenerate).
    pub gap: f64,
}

impl ChannelGround {
    pub fn n_channel(&self) -> usize {
        self.basis.n_sites()
    }

    pub fn magnetization(&self) -> i32 {
        self.basis.magnetization()
    }

    /// Embed into the full channel basis.
    pub fn to_pure(&self) -> Result<PureState> {
        let amps: Vec<C64> = self.amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect();
        let g = SystemGeometry::channel(self.n_channel())?;
        PureState::new(g, self.basis.embed(&amps))?.with_sector(self.magnetization())
    }
}

/// Ground state of the open channel. Sectors with `M ≥ 0` are scanned (the
/// spectrum is symmetric under `M → -M`). When the lowest level is shared
/// by several sectors, the infinitesimal field `-h Σσ^z` picks the largest
/// magnetization, so no perturbed diagonalization is needed; the returned
/// vector is an unperturbed eigenvector. With `h_break = 0` the same member
/// is returned but the flag still reports the degeneracy.
pub fn channel_ground_state(params: &ModelParams, n_channel: usize, opts: &LanczosOptions) -> Result<ChannelGround> {
    params.validate()?;
    if !(2..=MAX_CHANNEL_SITES).contains(&n_channel) {
        return Err(Error::InvalidGeometry(format!(
            "n_channel = {n_channel} outside 2..={MAX_CHANNEL_SITES}"
        )));
    }
    let tol = DEGENERACY_TOL * params.j.abs().max(1.0);
    let mut levels = Vec::new();
    let mut m = (n_channel % 2) as i32;
    while m <= n_channel as i32 {
        let (basis, op) = channel_sector_hamiltonian(params, n_channel, m, 0.0)?;
        let pair = lowest_eigenpairs(&op, 1, opts)?.remove(0);
        levels.push((m, basis, op, pair));
        m += 2;
    }
    let e0 = levels.iter().map(|l| l.3.value).fold(f64::INFINITY, f64::min);
    let chosen = levels
        .iter()
        .rposition(|l| l.3.value - e0 < tol)
        .expect("some sector attains the minimum");
    let (m_sel, _, _, _) = &levels[chosen];
    let m_sel = *m_sel;

    // next level: other sectors (each M > 0 has a mirror at -M), then the
    // second eigenvalue inside the selected sector
    let mut next = f64::INFINITY;
    for (m, _, _, pair) in &levels {
        if *m != m_sel || m_sel != 0 {
            next = next.min(pair.value);
        }
    }
    let (_, basis, op, pair) = levels.swap_remove(chosen);
    if op.dim() > 1 {
        let second = lowest_eigenpairs(&op, 2, opts)?;
        next = next.min(second[1].value);
    }
    let gap = (next - pair.value).max(0.0);
    let degenerate = gap < tol;
    Ok(ChannelGround {
        params: *params,
        energy: pair.value,
        basis: Arc::new(basis),
        amplitudes: pair.vector,
        degenerate,
        gap: if degenerate { 0.0 } else { gap },
    })
}

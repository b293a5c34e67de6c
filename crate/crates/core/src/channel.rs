//! Qubit channels: Kraus sets, the channel read off a transmitted singlet,
//! teleportation with a noisy resource and Pauli tomography.

use nalgebra::{DMatrix, Matrix2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::measures::{avg_fidelity_state_transfer, bell_states, singlet_fraction};
use crate::spinalg::{Mat4, C64};

pub type Mat2 = Matrix2<C64>;

/// Anything that maps qubit density matrices to qubit density matrices.
pub trait QubitChannel {
    fn apply(&self, rho: &Mat2) -> Mat2;
}

pub fn pauli_matrices() -> [Mat2; 4] {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        Mat2::identity(),
        Mat2::new(o, l, l, o),
        Mat2::new(o, -i, i, o),
        Mat2::new(l, o, o, -l),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    ops: Vec<Mat2>,
}

impl KrausChannel {
    /// Checks `Σ K†K = I` within `1e-9`.
    pub fn new(ops: Vec<Mat2>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidParameter("empty Kraus set".into()));
        }
        let sum: Mat2 = ops.iter().map(|k| k.adjoint() * k).sum();
        let dev = (sum - Mat2::identity()).iter().map(|x| x.norm()).fold(0.0, f64::max);
        if dev > 1e-9 {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(Self { ops })
    }

    pub fn identity() -> Self {
        Self { ops: vec![Mat2::identity()] }
    }

    /// `{√p_I I, √p_x σ^x, √p_y σ^y, √p_z σ^z}`.
    pub fn pauli(p: [f64; 4]) -> Result<Self> {
        PauliChannelParams::new(p)?;
        let s = pauli_matrices();
        Self::new(
            p.iter()
                .zip(s)
                .filter(|(w, _)| **w > 0.0)
                .map(|(w, m)| m * C64::from(w.sqrt()))
                .collect(),
        )
    }

    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("damping {gamma} outside [0, 1]")));
        }
        let o = C64::new(0.0, 0.0);
        let k0 = Mat2::new(C64::from(1.0), o, o, C64::from((1.0 - gamma).sqrt()));
        let k1 = Mat2::new(o, C64::from(gamma.sqrt()), o, o);
        Self::new(vec![k0, k1])
    }

    /// Kraus operators from the blocks of a Haar-like random isometry
    /// `C² → C^{2k}` built from a Gaussian matrix.
    pub fn random<R: Rng + ?Sized>(n_kraus: usize, rng: &mut R) -> Result<Self> {
        if n_kraus == 0 {
            return Err(Error::InvalidParameter("need at least one Kraus operator".into()));
        }
        let rows = 2 * n_kraus;
        let g = DMatrix::<C64>::from_fn(rows, 2, |_, _| {
            C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        let q = g.qr().q();
        Self::new(
            (0..n_kraus)
                .map(|m| Mat2::from_fn(|r, c| q[(2 * m + r, c)]))
                .collect(),
        )
    }

    pub fn ops(&self) -> &[Mat2] {
        &self.ops
    }
}

impl QubitChannel for KrausChannel {
    fn apply(&self, rho: &Mat2) -> Mat2 {
        self.ops.iter().map(|k| k * rho * k.adjoint()).sum()
    }
}

/// `(I ⊗ ξ)(|ψ⁻⟩⟨ψ⁻|)`.
pub fn apply_channel_to_half_singlet(channel: &KrausChannel) -> Mat4 {
    let s = bell_states()[0];
    let p = s * s.adjoint();
    channel
        .ops()
        .iter()
        .map(|k| {
            let full = kron(&Mat2::identity(), k);
            full * p * full.adjoint()
        })
        .sum()
}

pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    Mat4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Output of standard teleportation of `input` through the two-qubit
/// `resource`, whose second qubit is at the receiver:
/// `Σ_m Tr(ρ E_m) σ_m ρ_s σ_m` with `E_m = σ_m|ψ⁻⟩⟨ψ⁻|σ_m`.
pub fn teleport_with_resource(resource: &Mat4, input: &Mat2) -> Mat2 {
    let sigma = pauli_matrices();
    let s = bell_states()[0];
    sigma
        .iter()
        .map(|m| {
            let v = kron(&Mat2::identity(), m) * s;
            let weight = (v.adjoint() * resource * v)[(0, 0)].re;
            m * input * m * C64::from(weight)
        })
        .sum()
}

/// A Bell-diagonal channel description. Index order `(I, x, y, z)` pairs
/// with the Bell order `(ψ⁻, φ⁻, φ⁺, ψ⁺)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliChannelParams {
    pub p_i: f64,
    pub p_x: f64,
    pub p_y: f64,
    pub p_z: f64,
}

impl PauliChannelParams {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        if p.iter().any(|&x| x < -1e-9 || !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("negative probability in {p:?}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized(sum));
        }
        Ok(Self {
            p_i: p[0],
            p_x: p[1],
            p_y: p[2],
            p_z: p[3],
        })
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p_i, self.p_x, self.p_y, self.p_z]
    }

    /// Bloch-vector contraction factors `(λ_x, λ_y, λ_z)`.
    pub fn scaling(&self) -> [f64; 3] {
        let [i, x, y, z] = self.as_array();
        [i + x - y - z, i - x + y - z, i - x - y + z]
    }

    pub fn output_on_half_singlet(&self) -> Mat4 {
        bell_states()
            .iter()
            .zip(self.as_array())
            .map(|(b, p)| b * b.adjoint() * C64::from(p))
            .sum()
    }
}

impl QubitChannel for PauliChannelParams {
    fn apply(&self, rho: &Mat2) -> Mat2 {
        pauli_matrices()
            .iter()
            .zip(self.as_array())
            .map(|(m, p)| m * rho * m * C64::from(p))
            .sum()
    }
}

/// Bell-basis representation `B† ρ B`.
pub fn bell_basis_matrix(rho: &Mat4) -> Mat4 {
    let b = Mat4::from_columns(&bell_states());
    b.adjoint() * rho * b
}

/// Read the Pauli probabilities off a Bell-diagonal transmitted singlet.
/// Fails if any Bell-basis coherence exceeds `1e-6`.
pub fn tomograph_pauli(rho: &Mat4) -> Result<PauliChannelParams> {
    let m = bell_basis_matrix(rho);
    let mut worst: f64 = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            if r != c {
                worst = worst.max(m[(r, c)].norm());
            }
        }
    }
    if worst > 1e-6 {
        return Err(Error::NotBellDiagonal(worst));
    }
    PauliChannelParams::new([m[(0, 0)].re, m[(1, 1)].re, m[(2, 2)].re, m[(3, 3)].re])
}

/// The channel acting on the second qubit of a singlet, reconstructed from
/// its output `ρ = (I ⊗ ξ)(|ψ⁻⟩⟨ψ⁻|)`. Works for any channel, Pauli or not.
#[derive(Clone, Debug, PartialEq)]
pub struct SingletChannel {
    output: Mat4,
}

impl SingletChannel {
    pub fn new(output: Mat4) -> Self {
        Self { output }
    }

    pub fn output(&self) -> &Mat4 {
        &self.output
    }
}

impl QubitChannel for SingletChannel {
    fn apply(&self, rho: &Mat2) -> Mat2 {
        // with |ψ⁻⟩ = (I ⊗ W)|Φ⟩ / √2 for W = [[0, -1], [1, 0]]:
        // ξ(ρ) = 2 Σ_{a a'} (W† ρ* W)[a', a] · block_{a a'}(output)
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let w = Mat2::new(o, -l, l, o);
        let tau = w.adjoint() * rho.map(|x| x.conj()) * w;
        let mut out = Mat2::zeros();
        for a in 0..2 {
            for ap in 0..2 {
                let coef = tau[(ap, a)] * C64::from(2.0);
                for x in 0..2 {
                    for xp in 0..2 {
                        out[(x, xp)] += coef * self.output[(2 * a + x, 2 * ap + xp)];
                    }
                }
            }
        }
        out
    }
}

/// Average fidelity of direct transfer and of teleportation through the
/// channel's half-singlet output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityReport {
    pub state_transfer: f64,
    pub teleportation: f64,
}

impl FidelityReport {
    pub fn difference(&self) -> f64 {
        (self.state_transfer - self.teleportation).abs()
    }
}

pub fn fidelity_equivalence_check(channel: &KrausChannel) -> FidelityReport {
    let f_s = singlet_fraction(&apply_channel_to_half_singlet(channel));
    FidelityReport {
        state_transfer: avg_fidelity_state_transfer(channel),
        teleportation: (1.0 + 2.0 * f_s) / 3.0,
    }
}

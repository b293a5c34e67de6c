//! Two-qubit entanglement and fidelity measures, correlators and entropies.

use nalgebra::{DMatrix, Matrix2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::channel::{KrausChannel, QubitChannel};
use crate::error::{Error, Result};
use crate::solve::BranchState;
use crate::spinalg::{Mat4, Site, C64};

/// Radicands and eigenvalues this close to zero are treated as zero.
const CLAMP: f64 = 1e-12;

/// The X-shaped two-qubit state
///
/// ```text
/// u+  0   0   0
/// 0   w+  z   0
/// 0   z*  w-  0
/// 0   0   0   u-
/// ```
///
/// in the `|00⟩, |01⟩, |10⟩, |11⟩` basis. `z` is kept complex; for the
/// transfer problem its phase carries no information about entanglement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoQubitX {
    pub u_plus: f64,
    pub u_minus: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub z: C64,
}

impl TwoQubitX {
    pub fn concurrence(&self) -> f64 {
        let r = self.u_plus * self.u_minus;
        let r = if r.abs() < CLAMP { 0.0 } else { r };
        (2.0 * (self.z.norm() - r.max(0.0).sqrt())).max(0.0)
    }

    /// `⟨ψ⁻|ρ|ψ⁻⟩ = (w⁺ + w⁻ - 2 Re z) / 2`.
    pub fn singlet_fraction(&self) -> f64 {
        0.5 * (self.w_plus + self.w_minus - 2.0 * self.z.re)
    }

    /// The same state with the two qubits exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            w_plus: self.w_minus,
            w_minus: self.w_plus,
            z: self.z.conj(),
            ..*self
        }
    }

    pub fn to_matrix(&self) -> Mat4 {
        let mut m = Mat4::zeros();
        m[(0, 0)] = C64::from(self.u_plus);
        m[(1, 1)] = C64::from(self.w_plus);
        m[(2, 2)] = C64::from(self.w_minus);
        m[(3, 3)] = C64::from(self.u_minus);
        m[(1, 2)] = self.z;
        m[(2, 1)] = self.z.conj();
        m
    }
}

/// Read the X-form parameters off `rho`, refusing matrices with any other
/// element (including the `⟨00|ρ|11⟩` coherence) above `1e-7`.
pub fn extract_x_state(rho: &Mat4) -> Result<TwoQubitX> {
    let allowed = |r: usize, c: usize| r == c || (r, c) == (1, 2) || (r, c) == (2, 1);
    let mut worst: f64 = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            if !allowed(r, c) {
                worst = worst.max(rho[(r, c)].norm());
            }
        }
    }
    if worst > 1e-7 {
        return Err(Error::NonXStructure(worst));
    }
    Ok(TwoQubitX {
        u_plus: rho[(0, 0)].re,
        w_plus: rho[(1, 1)].re,
        w_minus: rho[(2, 2)].re,
        u_minus: rho[(3, 3)].re,
        z: rho[(1, 2)],
    })
}

fn hermitian_eigen(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = m.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

fn to_dyn(rho: &Mat4) -> DMatrix<C64> {
    DMatrix::from_iterator(4, 4, rho.iter().copied())
}

/// Concurrence from the spin-flipped state `ρ̃ = (σ^y⊗σ^y) ρ* (σ^y⊗σ^y)`:
/// `max(0, λ₁ - λ₂ - λ₃ - λ₄)` with `λ_i²` the eigenvalues of
/// `√ρ ρ̃ √ρ` in decreasing order.
pub fn concurrence(rho: &Mat4) -> Result<f64> {
    let (vals, vecs) = hermitian_eigen(to_dyn(rho));
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-8 {
        return Err(Error::NotPositive(min));
    }
    let sqrt_diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        4,
        vals.iter().map(|&v| C64::from(v.max(0.0).sqrt())),
    ));
    let sqrt_rho = &vecs * sqrt_diag * vecs.adjoint();
    // σ^y ⊗ σ^y is the anti-diagonal (-1, 1, 1, -1)
    let mut yy = DMatrix::<C64>::zeros(4, 4);
    for (r, s) in [(0, -1.0), (1, 1.0), (2, 1.0), (3, -1.0)] {
        yy[(r, 3 - r)] = C64::from(s);
    }
    let tilde = &yy * to_dyn(rho).map(|x| x.conj()) * &yy;
    let m = &sqrt_rho * tilde * &sqrt_rho;
    let m = (&m + m.adjoint()) * C64::from(0.5);
    let (mu, _) = hermitian_eigen(m);
    let mut lam: Vec<f64> = mu.iter().map(|&x| if x < CLAMP { 0.0 } else { x.sqrt() }).collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

pub fn bell_states() -> [nalgebra::Vector4<C64>; 4] {
    let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
    let z = C64::from(0.0);
    [
        nalgebra::Vector4::new(z, h, -h, z),
        nalgebra::Vector4::new(h, z, z, -h),
        nalgebra::Vector4::new(h, z, z, h),
        nalgebra::Vector4::new(z, h, h, z),
    ]
}

/// `⟨ψ⁻|ρ|ψ⁻⟩`.
pub fn singlet_fraction(rho: &Mat4) -> f64 {
    let s = &bell_states()[0];
    (s.adjoint() * rho * s)[(0, 0)].re
}

/// `-Σ λ log₂ λ`.
pub fn von_neumann_entropy(rho: &DMatrix<C64>) -> f64 {
    let (vals, _) = hermitian_eigen(rho.clone());
    entropy_of_spectrum(&vals)
}

pub fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&l| l > CLAMP)
        .map(|&l| -l * l.log2())
        .sum()
}

/// Entropy of a qubit state in bits.
pub fn qubit_entropy(rho: &Matrix2<C64>) -> f64 {
    let tr = (rho[(0, 0)] + rho[(1, 1)]).re;
    let det = (rho[(0, 0)] * rho[(1, 1)] - rho[(0, 1)] * rho[(1, 0)]).re;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    entropy_of_spectrum(&[tr / 2.0 + disc, tr / 2.0 - disc])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// `⟨σ^α_0(0) σ^α_j(t)⟩` for the state of a [`BranchState`] at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelatorRecord {
    pub axis: Axis,
    pub site: usize,
    pub time: f64,
    pub value: f64,
}

/// The two-time correlator of the channel started in `I/2 ⊗ ρ_g` on sites
/// `0..=N`. The singlet identity `σ^α_{0'}|ψ⁻⟩ = -σ^α_0|ψ⁻⟩` turns it into
/// the equal-time `-⟨σ^α_{0'} σ^α_j(t)⟩` of the joint state, which is what
/// is evaluated here from branch matrix elements.
pub fn two_time_correlator(state: &BranchState, axis: Axis, site: usize, time: f64) -> Result<CorrelatorRecord> {
    let n = state.n_channel();
    if site > n {
        return Err(Error::InvalidSite {
            site: site.to_string(),
            n_channel: n,
        });
    }
    let bit = n - site;
    let mut acc = C64::new(0.0, 0.0);
    for a in state.branches() {
        for b in state.branches() {
            // ⟨a|σ^α|b⟩ on the 0' qubit
            let prime = pauli_element(axis, a.prime_bit, b.prime_bit);
            if prime == C64::new(0.0, 0.0) {
                continue;
            }
            acc += prime * branch_site_element(a, b, axis, bit);
        }
    }
    Ok(CorrelatorRecord {
        axis,
        site,
        time,
        value: -acc.re,
    })
}

fn pauli_element(axis: Axis, row: u8, col: u8) -> C64 {
    match (axis, row, col) {
        (Axis::X, 0, 1) | (Axis::X, 1, 0) => C64::new(1.0, 0.0),
        (Axis::Y, 0, 1) => C64::new(0.0, -1.0),
        (Axis::Y, 1, 0) => C64::new(0.0, 1.0),
        (Axis::Z, 0, 0) => C64::new(1.0, 0.0),
        (Axis::Z, 1, 1) => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 0.0),
    }
}

/// `⟨φ_a|σ^α_bit|φ_b⟩`.
fn branch_site_element(a: &crate::solve::Branch, b: &crate::solve::Branch, axis: Axis, bit: usize) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    let basis_a = a.sector.basis();
    for (k, &amp) in b.amplitudes.iter().enumerate() {
        let s = b.sector.basis().state(k);
        let x = ((s >> bit) & 1) as u8;
        let (target, factor) = match axis {
            Axis::Z => (s, pauli_element(Axis::Z, x, x)),
            _ => (s ^ (1 << bit), pauli_element(axis, 1 - x, x)),
        };
        if let Some(j) = basis_a.index_of(target) {
            acc += a.amplitudes[j].conj() * factor * amp;
        }
    }
    acc
}

/// Concurrence between `0'` and `site` from the x and z correlators:
/// `max(0, |C_x| + C_z/2 - 1/2)`. Valid when the site magnetization
/// vanishes, which is checked.
pub fn concurrence_from_correlators(state: &BranchState, site: usize, time: f64) -> Result<f64> {
    let n = state.n_channel();
    let cz_self = {
        // ⟨σ^z_site⟩ from the diagonal branch elements
        let bit = n.checked_sub(site).ok_or_else(|| Error::InvalidSite {
            site: site.to_string(),
            n_channel: n,
        })?;
        state
            .branches()
            .iter()
            .map(|b| branch_site_element(b, b, Axis::Z, bit).re)
            .sum::<f64>()
    };
    if cz_self.abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "correlator formula needs an unbiased site, ⟨σ^z_{site}⟩ = {cz_self:.3e}"
        )));
    }
    let cx = two_time_correlator(state, Axis::X, site, time)?.value;
    let cz = two_time_correlator(state, Axis::Z, site, time)?.value;
    Ok((cx.abs() + 0.5 * cz - 0.5).max(0.0))
}

/// `1/3 + (1/6) Σ_m |Tr K_m|²`.
pub fn avg_fidelity_state_transfer(channel: &KrausChannel) -> f64 {
    1.0 / 3.0 + channel.ops().iter().map(|k| k.trace().norm_sqr()).sum::<f64>() / 6.0
}

/// Bloch-sphere average of `⟨ψ|ξ(|ψ⟩⟨ψ|)|ψ⟩` over `samples` uniformly
/// distributed pure inputs: `(mean, standard error)`.
pub fn monte_carlo_state_transfer_fidelity(channel: &KrausChannel, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let rho = bloch_state(UnitSphere.sample(&mut rng));
        let f = (rho * channel.apply(&rho)).trace().re;
        sum += f;
        sum_sq += f * f;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `(I + r·σ) / 2`.
pub fn bloch_state(r: [f64; 3]) -> Matrix2<C64> {
    Matrix2::new(
        C64::from(0.5 * (1.0 + r[2])),
        C64::new(0.5 * r[0], -0.5 * r[1]),
        C64::new(0.5 * r[0], 0.5 * r[1]),
        C64::from(0.5 * (1.0 - r[2])),
    )
}

/// Sites `(0', site)` as a pair label.
pub fn end_pair(site: usize) -> (Site, Site) {
    (Site::Prime, Site::Chain(site))
}

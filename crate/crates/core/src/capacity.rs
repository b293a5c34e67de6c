//! Single-use Holevo information of qubit channels over ensembles of two
//! orthogonal pure states.

use std::f64::consts::PI;
use std::fmt;

use crate::channel::{Mat2, PauliChannelParams, QubitChannel};
use crate::error::{Error, Result};
use crate::measures::{bloch_state, qubit_entropy};

/// Grid resolution of the θ scans.
pub const THETA_RESOLUTION: f64 = 1e-4;

/// `|p_z - p_x|` (or `|p_I - p_x|`) below this counts as a tie.
pub const REGIME_TIE_TOL: f64 = 1e-7;

/// `p1 |ψ1⟩⟨ψ1| + p2 |ψ2⟩⟨ψ2|` with `|ψ1⟩` at Bloch angles `(θ, φ)` and
/// `|ψ2⟩` antipodal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputEnsemble {
    pub theta: f64,
    pub phi: f64,
    pub p1: f64,
}

impl InputEnsemble {
    pub fn new(theta: f64, phi: f64, p1: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) || !(0.0..2.0 * PI).contains(&phi) || !(0.0..=1.0).contains(&p1) {
            return Err(Error::InvalidParameter(format!(
                "ensemble (θ={theta}, φ={phi}, p1={p1}) out of range"
            )));
        }
        Ok(Self { theta, phi, p1 })
    }

    pub fn p2(&self) -> f64 {
        1.0 - self.p1
    }

    pub fn states(&self) -> (Mat2, Mat2) {
        let n = [
            self.theta.sin() * self.phi.cos(),
            self.theta.sin() * self.phi.sin(),
            self.theta.cos(),
        ];
        (bloch_state(n), bloch_state(n.map(|x| -x)))
    }
}

/// `S(ξ(p1ρ1 + p2ρ2)) - p1 S(ξ(ρ1)) - p2 S(ξ(ρ2))` in bits.
pub fn holevo_h1<C: QubitChannel + ?Sized>(channel: &C, ensemble: &InputEnsemble) -> f64 {
    let (r1, r2) = ensemble.states();
    let (o1, o2) = (channel.apply(&r1), channel.apply(&r2));
    let (p1, p2) = (ensemble.p1, ensemble.p2());
    let avg = o1 * crate::C64::from(p1) + o2 * crate::C64::from(p2);
    qubit_entropy(&avg) - p1 * qubit_entropy(&o1) - p2 * qubit_entropy(&o2)
}

fn binary_entropy(p: f64) -> f64 {
    crate::measures::entropy_of_spectrum(&[p, 1.0 - p])
}

/// Closed form for a Pauli channel with `p_x = p_y` at `p1 = p2 = 1/2`:
/// the outputs have Bloch radius `√(λ_x² sin²θ + λ_z² cos²θ)` and their
/// average is `I/2`.
pub fn pauli_h1_closed_form(channel: &PauliChannelParams, theta: f64) -> f64 {
    let [lx, _, lz] = channel.scaling();
    let r = (lx * lx * theta.sin().powi(2) + lz * lz * theta.cos().powi(2)).sqrt();
    1.0 - binary_entropy((1.0 + r.min(1.0)) / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Optimal inputs are `σ^z` eigenstates (`θ = 0` or `π`).
    Pole,
    /// Optimal inputs lie on the equator (`θ = π/2`).
    Equator,
    /// All `θ` are equivalent.
    Degenerate,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Pole => "pole",
            Regime::Equator => "equator",
            Regime::Degenerate => "degenerate",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapacityResult {
    pub h1: f64,
    pub theta_opt: f64,
    pub regime: Regime,
}

fn require_xy_symmetric(channel: &PauliChannelParams) -> Result<()> {
    if (channel.p_x - channel.p_y).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "θ optimization assumes p_x = p_y, got {} and {}",
            channel.p_x, channel.p_y
        )));
    }
    Ok(())
}

/// Which inputs maximize the output Bloch radius. `λ_z² - λ_x²` equals
/// `4 (p_z - p_x)(p_I - p_x)`, so with `p_I` the largest weight the pole
/// wins exactly when `p_z > p_x`.
pub fn classify(channel: &PauliChannelParams) -> Result<Regime> {
    require_xy_symmetric(channel)?;
    let a = channel.p_z - channel.p_x;
    let b = channel.p_i - channel.p_x;
    Ok(if a.abs() < REGIME_TIE_TOL || b.abs() < REGIME_TIE_TOL {
        Regime::Degenerate
    } else if a * b > 0.0 {
        Regime::Pole
    } else {
        Regime::Equator
    })
}

/// Equiprobable inputs; the optimal `θ` from [`classify`], the value from
/// the closed form.
pub fn maximize_c1(channel: &PauliChannelParams) -> Result<CapacityResult> {
    let regime = classify(channel)?;
    let theta_opt = match regime {
        Regime::Equator => PI / 2.0,
        Regime::Pole | Regime::Degenerate => 0.0,
    };
    Ok(CapacityResult {
        h1: pauli_h1_closed_form(channel, theta_opt),
        theta_opt,
        regime,
    })
}

/// `θ` grid on `[0, π]` at [`THETA_RESOLUTION`]; the point count is odd so
/// `π/2` is on the grid.
pub fn theta_grid() -> Vec<f64> {
    let mut n = (PI / THETA_RESOLUTION).ceil() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    (0..=n).map(|k| PI * k as f64 / n as f64).collect()
}

/// Grid maximum of [`holevo_h1`] over `θ` at fixed `φ` and `p1 = 1/2`:
/// `(θ, h1)`, smallest `θ` on ties beyond `1e-12`.
pub fn grid_optimum<C: QubitChannel + ?Sized>(channel: &C, phi: f64) -> (f64, f64) {
    let mut best = (0.0, f64::NEG_INFINITY);
    for theta in theta_grid() {
        let h = holevo_h1(channel, &InputEnsemble { theta, phi, p1: 0.5 });
        if h > best.1 + 1e-12 {
            best = (theta, h);
        }
    }
    best
}

/// Holevo information with equatorial equiprobable inputs, maximized over
/// the azimuth.
pub fn equatorial_h1<C: QubitChannel + ?Sized>(channel: &C) -> (f64, f64) {
    let n = 720;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..n {
        let phi = 2.0 * PI * k as f64 / n as f64;
        let h = holevo_h1(channel, &InputEnsemble { theta: PI / 2.0, phi, p1: 0.5 });
        if h > best.1 + 1e-12 {
            best = (phi, h);
        }
    }
    (best.1, best.0)
}

/// Optimum over the whole orthogonal-ensemble family `(θ, φ, p1)` for a
/// general qubit channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralCapacity {
    pub h1: f64,
    pub ensemble: InputEnsemble,
}

pub fn maximize_c1_general<C: QubitChannel + ?Sized>(channel: &C) -> GeneralCapacity {
    let eval = |x: [f64; 3]| -> f64 {
        let theta = x[0].clamp(0.0, PI);
        let phi = x[1].rem_euclid(2.0 * PI);
        let p1 = x[2].clamp(0.0, 1.0);
        holevo_h1(channel, &InputEnsemble { theta, phi, p1 })
    };
    let mut best = ([0.0, 0.0, 0.5], f64::NEG_INFINITY);
    for i in 0..=36 {
        for j in 0..36 {
            for p in [0.3, 0.4, 0.5, 0.6, 0.7] {
                let x = [PI * i as f64 / 36.0, 2.0 * PI * j as f64 / 36.0, p];
                let h = eval(x);
                if h > best.1 {
                    best = (x, h);
                }
            }
        }
    }
    // compass search
    let mut step = [PI / 36.0, PI / 18.0, 0.05];
    while step[0] > 1e-7 {
        let mut improved = false;
        for d in 0..3 {
            for s in [1.0, -1.0] {
                let mut x = best.0;
                x[d] += s * step[d];
                let h = eval(x);
                if h > best.1 + 1e-15 {
                    best = (x, h);
                    improved = true;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    let x = best.0;
    GeneralCapacity {
        h1: best.1,
        ensemble: InputEnsemble {
            theta: x[0].clamp(0.0, PI),
            phi: x[1].rem_euclid(2.0 * PI),
            p1: x[2].clamp(0.0, 1.0),
        },
    }
}

//! Recurrence distillation of Bell-diagonal pairs: bilateral CNOT between
//! two copies, keep the control pair when the targets agree.

use crate::channel::tomograph_pauli;
use crate::error::{Error, Result};
use crate::spinalg::Mat4;

/// Bell-diagonal two-qubit state, order `(ψ⁻, φ⁻, φ⁺, ψ⁺)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BellDiagonal {
    p: [f64; 4],
}

impl BellDiagonal {
    pub fn new(p: [f64; 4]) -> Result<Self> {
        if p.iter().any(|&x| x < -1e-12 || !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("negative Bell weight in {p:?}")));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized(s));
        }
        Ok(Self { p: p.map(|x| x.max(0.0)) })
    }

    /// Werner state with singlet weight `fidelity`.
    pub fn werner(fidelity: f64) -> Result<Self> {
        let e = (1.0 - fidelity) / 3.0;
        Self::new([fidelity, e, e, e])
    }

    /// Werner state with concurrence `e` (`F = (1 + e)/2`).
    pub fn werner_with_concurrence(e: f64) -> Result<Self> {
        Self::werner((1.0 + e) / 2.0)
    }

    pub fn from_matrix(rho: &Mat4) -> Result<Self> {
        Self::new(tomograph_pauli(rho)?.as_array())
    }

    pub fn probabilities(&self) -> [f64; 4] {
        self.p
    }

    pub fn singlet_fraction(&self) -> f64 {
        self.p[0]
    }

    pub fn concurrence(&self) -> f64 {
        (2.0 * self.p.iter().copied().fold(0.0, f64::max) - 1.0).max(0.0)
    }

    /// Random bilateral rotations: keeps the singlet weight and spreads the
    /// rest evenly.
    pub fn twirl(&self) -> Self {
        let e = (1.0 - self.p[0]) / 3.0;
        Self { p: [self.p[0], e, e, e] }
    }
}

/// One recurrence round on two copies of `state`: returns the kept pair and
/// the probability that the target measurements agree.
///
/// Written in the singlet frame. The underlying protocol rotates one side
/// by `σ^y` (exchanging `ψ⁻ ↔ φ⁺` and `ψ⁺ ↔ φ⁻`), applies the bilateral
/// CNOT, compares the targets in the computational basis and rotates back.
pub fn recurrence_step(state: &BellDiagonal) -> (BellDiagonal, f64) {
    let [a, b, c, d] = state.p;
    let n = (a + d).powi(2) + (b + c).powi(2);
    let out = [
        (a * a + d * d) / n,
        (b * b + c * c) / n,
        2.0 * b * c / n,
        2.0 * a * d / n,
    ];
    (BellDiagonal { p: out }, n)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistillStep {
    pub input: BellDiagonal,
    pub success: f64,
    pub output: BellDiagonal,
    pub concurrence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistillTrace {
    pub initial: BellDiagonal,
    pub steps: Vec<DistillStep>,
}

impl DistillTrace {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn final_state(&self) -> BellDiagonal {
        self.steps.last().map_or(self.initial, |s| s.output)
    }

    pub fn final_concurrence(&self) -> f64 {
        self.final_state().concurrence()
    }

    /// Expected raw pairs consumed per output pair after the first `k`
    /// rounds: `2^k / Π success_i`.
    pub fn expected_pairs(&self, k: usize) -> f64 {
        self.steps[..k]
            .iter()
            .fold(1.0, |acc, s| acc * 2.0 / s.success)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistillOptions {
    /// Twirl to Werner form before each round. Without it the recurrence
    /// on a Werner input does not converge to the singlet.
    pub twirl: bool,
    pub max_iterations: usize,
}

impl Default for DistillOptions {
    fn default() -> Self {
        Self {
            twirl: true,
            max_iterations: 50,
        }
    }
}

fn round(state: &BellDiagonal, opts: &DistillOptions) -> DistillStep {
    let input = if opts.twirl { state.twirl() } else { *state };
    let (output, success) = recurrence_step(&input);
    DistillStep {
        input,
        success,
        output,
        concurrence: output.concurrence(),
    }
}

fn require_distillable(state: &BellDiagonal) -> Result<()> {
    if state.p[0] <= 0.5 {
        return Err(Error::Undistillable(state.p[0]));
    }
    Ok(())
}

/// Exactly `iterations` rounds.
pub fn distill_rounds(state: &BellDiagonal, iterations: usize, opts: &DistillOptions) -> Result<DistillTrace> {
    require_distillable(state)?;
    let mut steps = Vec::with_capacity(iterations);
    let mut cur = *state;
    for _ in 0..iterations {
        let s = round(&cur, opts);
        cur = s.output;
        steps.push(s);
    }
    Ok(DistillTrace { initial: *state, steps })
}

/// Rounds until the concurrence reaches `target`.
pub fn distill_to_target(state: &BellDiagonal, target: f64, opts: &DistillOptions) -> Result<DistillTrace> {
    require_distillable(state)?;
    let mut trace = DistillTrace {
        initial: *state,
        steps: Vec::new(),
    };
    let mut cur = *state;
    while cur.concurrence() < target {
        if trace.steps.len() == opts.max_iterations {
            return Err(Error::Convergence(format!(
                "concurrence {:.6} after {} rounds, target {target}",
                cur.concurrence(),
                opts.max_iterations
            )));
        }
        let s = round(&cur, opts);
        cur = s.output;
        trace.steps.push(s);
    }
    Ok(trace)
}

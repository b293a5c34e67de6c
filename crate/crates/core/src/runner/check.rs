//! Quick invariant suite behind the `check` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::capacity::{classify, grid_optimum, Regime};
use crate::channel::{fidelity_equivalence_check, tomograph_pauli, KrausChannel, PauliChannelParams};
use crate::error::Result;
use crate::measures::{concurrence, concurrence_from_correlators, monte_carlo_state_transfer_fidelity};
use crate::model::ModelParams;
use crate::solve::{channel_ground_state, EvolutionPlan, JointDynamics, LanczosOptions, PropagationMethod};
use crate::spinalg::{Site, TwoSiteReduce};

use super::output::{Cell, Table};

pub const CHECK_COLUMNS: &[&str] = &["check", "passed", "worst"];

#[derive(Clone, Debug, PartialEq)]
pub struct CheckLine {
    pub name: &'static str,
    pub passed: bool,
    /// The figure of merit the check thresholds (an error or a margin).
    pub worst: f64,
}

fn line(name: &'static str, worst: f64, limit: f64) -> CheckLine {
    CheckLine {
        name,
        passed: worst < limit,
        worst,
    }
}

fn closed_trajectory(
    delta: f64,
    n: usize,
    t_max: f64,
    dt: f64,
    method: PropagationMethod,
) -> Result<Vec<(f64, crate::solve::BranchState)>> {
    let p = ModelParams::new(1.0, delta)?;
    let g = channel_ground_state(&p, n, &LanczosOptions::default())?;
    let dy = JointDynamics::new(&p, n)?;
    let s = dy.initial_state(&g.basis, &g.amplitudes)?;
    dy.trajectory(s, &EvolutionPlan::new(t_max, dt)?.with_method(method))
}

fn fidelity_equivalence(seed: u64) -> Result<Vec<CheckLine>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut worst_sigma: f64 = 0.0;
    for k in 0..50 {
        let n_kraus = rng.random_range(1..=4);
        let ch = KrausChannel::random(n_kraus, &mut rng)?;
        let r = fidelity_equivalence_check(&ch);
        worst = worst.max(r.difference());
        if k < 5 {
            let (mean, se) = monte_carlo_state_transfer_fidelity(&ch, 4000, seed.wrapping_add(k));
            worst_sigma = worst_sigma.max((mean - r.state_transfer).abs() / se.max(1e-15));
        }
    }
    Ok(vec![
        line("transfer_vs_teleport_fidelity", worst, 1e-10),
        line("monte_carlo_fidelity_sigmas", worst_sigma, 3.0),
    ])
}

fn even_chain_structure() -> Result<Vec<CheckLine>> {
    let mut off: f64 = 0.0;
    let mut xy: f64 = 0.0;
    let mut iso: f64 = 0.0;
    let mut odd: f64 = 0.0;
    let mut drift: f64 = 0.0;
    let mut corr: f64 = 0.0;
    for &delta in &[0.0, 0.5, 1.0, 2.0] {
        for &n in &[4usize, 6] {
            let traj = closed_trajectory(delta, n, 8.0, 0.25, PropagationMethod::Auto)?;
            let (e0, h0) = traj[0].1.energy_moments();
            for (t, s) in &traj {
                let rho = s.reduce_to_pair(Site::Prime, Site::Chain(n))?;
                let b = crate::channel::bell_basis_matrix(&rho);
                for r in 0..4 {
                    for c in 0..4 {
                        if r != c {
                            off = off.max(b[(r, c)].norm());
                        }
                    }
                }
                xy = xy.max((b[(1, 1)].re - b[(2, 2)].re).abs());
                if delta == 1.0 {
                    iso = iso.max((b[(1, 1)].re - b[(3, 3)].re).abs());
                }
                if delta <= 1.0 {
                    for j in (1..=n).step_by(2) {
                        let pair = s.reduce_to_pair(Site::Prime, Site::Chain(j))?;
                        odd = odd.max(concurrence(&pair)?);
                    }
                }
                let (e, h2) = s.energy_moments();
                drift = drift
                    .max((e - e0).abs() / e0.abs().max(1.0))
                    .max((h2 - h0).abs() / h0.abs().max(1.0));
                let direct = concurrence(&rho)?;
                let formula = concurrence_from_correlators(s, n, *t)?;
                corr = corr.max((direct - formula).abs());
            }
        }
    }
    Ok(vec![
        line("bell_off_diagonals", off, 1e-6),
        line("p_x_equals_p_y", xy, 1e-6),
        line("isotropic_p_x_equals_p_z", iso, 1e-6),
        line("odd_site_concurrence", odd, 1e-9),
        line("energy_moment_drift", drift, 1e-8),
        line("correlator_concurrence", corr, 1e-8),
    ])
}

fn krylov_vs_eigen() -> Result<CheckLine> {
    let mut worst: f64 = 0.0;
    for &delta in &[0.5, 1.0] {
        let a = closed_trajectory(delta, 8, 4.0, 0.5, PropagationMethod::Krylov)?;
        let b = closed_trajectory(delta, 8, 4.0, 0.5, PropagationMethod::Eigendecomposition)?;
        for ((_, x), (_, y)) in a.iter().zip(&b) {
            for (bx, by) in x.branches().iter().zip(y.branches()) {
                for (u, v) in bx.amplitudes.iter().zip(&by.amplitudes) {
                    worst = worst.max((u - v).norm());
                }
            }
        }
    }
    Ok(line("krylov_vs_eigendecomposition", worst, 1e-8))
}

fn theta_classification(seed: u64) -> Result<CheckLine> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    while checked < 20 {
        let w: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        let s = w[0] + 2.0 * w[1] + w[2];
        let ch = PauliChannelParams::new([w[0] / s, w[1] / s, w[1] / s, w[2] / s])?;
        let regime = classify(&ch)?;
        if regime == Regime::Degenerate {
            continue;
        }
        checked += 1;
        let (theta, _) = grid_optimum(&ch, 0.0);
        let grid_pole = theta.min(std::f64::consts::PI - theta) < 1e-3;
        if grid_pole != (regime == Regime::Pole) {
            mismatches += 1;
        }
        // the tomography round trip must reproduce the channel
        let back = tomograph_pauli(&ch.output_on_half_singlet())?;
        if (back.p_z - ch.p_z).abs() > 1e-12 {
            mismatches += 1;
        }
    }
    Ok(line("theta_classification_mismatches", mismatches as f64, 0.5))
}

/// Run the suite; one line per invariant.
pub fn run_checks(seed: u64) -> Result<Vec<CheckLine>> {
    let mut out = fidelity_equivalence(seed)?;
    out.extend(even_chain_structure()?);
    out.push(krylov_vs_eigen()?);
    out.push(theta_classification(seed)?);
    Ok(out)
}

pub fn check_table(lines: &[CheckLine]) -> Table {
    let mut t = Table::new(CHECK_COLUMNS);
    for l in lines {
        t.push(vec![
            Cell::from(l.name),
            Cell::from(if l.passed { "true" } else { "false" }),
            Cell::from(l.worst),
        ]);
    }
    t
}

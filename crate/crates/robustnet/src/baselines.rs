//! Deterministic comparison policies.
//!
//! [`maxmin_nominal`] computes the nominal max-min-rate optimum by bisecting
//! on a common target rate; each candidate target is checked for feasibility
//! by iterating the standard interference function
//! `x_i <- sinr * (interference_i + noise) / direct_i` (clamped into the
//! power constraint) from zero, which converges monotonically to the minimal
//! feasible power vector whenever the target is achievable. Uniform and full
//! power round out the baseline set.

use crate::system::InterferenceSystem;

/// Power feasible set: total-power simplex (`sum x <= 1`) or per-link box
/// (`0 <= x_i <= 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowerConstraint {
    Simplex,
    Box,
}

#[derive(Clone, Debug)]
pub struct MaxMinSolution {
    pub x: Vec<f64>,
    /// Minimum nominal rate achieved by `x`, bits/s.
    pub achieved_common_rate: f64,
    /// Total inner fixed-point iterations spent.
    pub iterations: usize,
    /// False when the final feasibility fixed point hit the iteration cap.
    pub converged: bool,
}

const FIXED_POINT_CAP: usize = 10_000;
const FIXED_POINT_TOL: f64 = 1e-9;
/// Feasibility slack on the SINR target, absorbing fixed-point tolerance.
const FEASIBILITY_SLACK: f64 = 1e-6;

struct FixedPointOutcome {
    x: Vec<f64>,
    iterations: usize,
    settled: bool,
    feasible: bool,
}

/// Iterate the standard interference function at a fixed SINR target.
fn feasibility_fixed_point(
    system: &InterferenceSystem,
    constraint: PowerConstraint,
    target_sinr: f64,
) -> FixedPointOutcome {
    let n = system.n();
    let mut x = vec![0.0; n];
    if target_sinr <= 0.0 {
        return FixedPointOutcome {
            x,
            iterations: 0,
            settled: true,
            feasible: true,
        };
    }
    let mut iterations = 0;
    let mut settled = false;
    while iterations < FIXED_POINT_CAP {
        iterations += 1;
        let mut next = vec![0.0; n];
        for i in 0..n {
            let mut floor = system.noise_watts;
            for j in 0..n {
                if j != i {
                    floor += system.coupling(i, j) * x[j];
                }
            }
            let required = target_sinr * floor / system.coupling(i, i);
            next[i] = match constraint {
                PowerConstraint::Box => required.min(1.0),
                PowerConstraint::Simplex => required,
            };
        }
        if constraint == PowerConstraint::Simplex {
            let total: f64 = next.iter().sum();
            if total > 1.0 {
                for v in &mut next {
                    *v /= total;
                }
            }
        }
        let max_change = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300))
            .fold(0.0f64, f64::max);
        x = next;
        if max_change < FIXED_POINT_TOL {
            settled = true;
            break;
        }
    }
    let feasible = settled
        && system
            .sinrs(&x)
            .iter()
            .all(|&s| s >= target_sinr * (1.0 - FEASIBILITY_SLACK));
    FixedPointOutcome {
        x,
        iterations,
        settled,
        feasible,
    }
}

/// Whether a common rate target (bits/s) is achievable for every node at once.
pub fn common_rate_feasible(
    system: &InterferenceSystem,
    constraint: PowerConstraint,
    rate: f64,
) -> bool {
    let target_sinr = (rate / system.bandwidth_hz).exp2() - 1.0;
    feasibility_fixed_point(system, constraint, target_sinr).feasible
}

/// Maximize the minimum nominal rate by bisection over the common rate.
///
/// `tolerance` is the relative bisection width on the rate (the achieved
/// optimum is within that factor of the true one).
pub fn maxmin_nominal(
    system: &InterferenceSystem,
    constraint: PowerConstraint,
    tolerance: f64,
) -> MaxMinSolution {
    let n = system.n();
    // No common SINR can beat the best interference-free SNR of the weakest
    // node, so it brackets the bisection from above.
    let mut hi_rate = (0..n)
        .map(|i| {
            system.bandwidth_hz * (1.0 + system.coupling(i, i) / system.noise_watts).log2()
        })
        .fold(f64::INFINITY, f64::min);
    if !hi_rate.is_finite() || hi_rate <= 0.0 {
        hi_rate = system.bandwidth_hz; // degenerate; bisection will collapse
    }

    let mut lo_rate = 0.0;
    let mut best = FixedPointOutcome {
        x: vec![0.0; n],
        iterations: 0,
        settled: true,
        feasible: true,
    };
    let mut total_iterations = 0;
    while hi_rate - lo_rate > tolerance * hi_rate.max(1e-12) {
        let mid = 0.5 * (lo_rate + hi_rate);
        let target_sinr = (mid / system.bandwidth_hz).exp2() - 1.0;
        let outcome = feasibility_fixed_point(system, constraint, target_sinr);
        total_iterations += outcome.iterations;
        if outcome.feasible {
            lo_rate = mid;
            best = outcome;
        } else {
            hi_rate = mid;
        }
    }

    let converged = best.settled;
    let achieved = if best.x.iter().all(|&v| v == 0.0) {
        0.0
    } else {
        system.min_rate(&best.x).1
    };
    MaxMinSolution {
        x: best.x,
        achieved_common_rate: achieved,
        iterations: total_iterations,
        converged,
    }
}

/// Equal power split across K users: `x_k = 1 / K`.
pub fn uniform_power(k: usize) -> Vec<f64> {
    assert!(k >= 1);
    vec![1.0 / k as f64; k]
}

/// Every link at its power budget: `x_i = 1`.
pub fn full_power(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    vec![1.0; n]
}

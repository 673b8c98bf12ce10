//! Estimators for the scalars that index one-parameter solution
//! families: the power-law limit of the non-resonant case, the
//! log-exponential limit of a critical resonance, and a Hölder
//! exponent fit.
//!
//! All three sample the trajectory on a geometric ladder
//! `x_j - y = ±2^{-j} x_1` with `x_1 = 1e-2·scale` and `J = 10` rungs
//! and extrapolate with first-order Richardson.

use super::{DynamicsError, Trajectory};

pub const LADDER_RUNGS: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitEstimate {
    pub value: f64,
    /// Difference of the last two extrapolated rungs; a non-convergence
    /// flag when it fails to shrink below `5%` of the value.
    pub convergence: f64,
    pub converged: bool,
}

/// Ladder of `(x_j - y, u^(k)(x_j))` pairs on whichever side of `y`
/// the trajectory covers better; closest rung last.
fn ladder(traj: &Trajectory, k: u32, y: f64) -> Result<Vec<(f64, f64)>, DynamicsError> {
    let x1 = 1e-2 * y.abs().max(1.0);
    let col = k as usize + 1;
    let collect = |side: f64| -> Vec<(f64, f64)> {
        (0..LADDER_RUNGS)
            .filter_map(|j| {
                let dx = side * x1 * 0.5f64.powi(j as i32);
                traj.sample_by_x(y + dx, col).map(|u| (dx, u))
            })
            .collect()
    };
    let plus = collect(1.0);
    let minus = collect(-1.0);
    let best = if plus.len() >= minus.len() { plus } else { minus };
    if best.len() < 4 {
        return Err(DynamicsError::InsufficientApproach);
    }
    Ok(best)
}

fn extrapolate(r: &[f64]) -> LimitEstimate {
    // error assumed to shrink geometrically rung to rung
    let ext: Vec<f64> = r.windows(2).map(|w| 2.0 * w[1] - w[0]).collect();
    let value = *ext.last().unwrap();
    let convergence = (ext[ext.len() - 1] - ext[ext.len() - 2]).abs();
    let converged = convergence <= 0.05 * value.abs().max(1e-12);
    LimitEstimate {
        value,
        convergence,
        converged,
    }
}

/// Estimates `lim (u^(k)(x) - c_k)/|x - y|^exponent` as `x -> y` along
/// the trajectory.
pub fn estimate_limit_powerlaw(
    traj: &Trajectory,
    k: u32,
    c_k: f64,
    exponent: f64,
    y: f64,
) -> Result<LimitEstimate, DynamicsError> {
    let rungs = ladder(traj, k, y)?;
    let r: Vec<f64> = rungs
        .iter()
        .map(|(dx, u)| (u - c_k) / dx.abs().powf(exponent))
        .collect();
    Ok(extrapolate(&r))
}

/// Estimates `lim (x - y)·exp(-delta(u^(k)(x) - c_k)/(x - y))`, the
/// constant characterizing a critical-resonance branch.
pub fn estimate_limit_resonant(
    traj: &Trajectory,
    k: u32,
    c_k: f64,
    delta: f64,
    y: f64,
) -> Result<LimitEstimate, DynamicsError> {
    let rungs = ladder(traj, k, y)?;
    let r: Vec<f64> = rungs
        .iter()
        .map(|(dx, u)| dx * (-delta * (u - c_k) / dx).exp())
        .collect();
    let mut est = extrapolate(&r);
    // the limit must be nonzero; raw values decaying with the rungs
    // mean the data has no log-exp structure
    if r.last().unwrap().abs() < 0.5 * r[0].abs() || !est.value.is_finite() {
        est.converged = false;
    }
    Ok(est)
}

/// Log-log slope fit of `|u^(k)(x) - c_k|` against `|x - y|` over the
/// ladder.
pub fn fit_holder_exponent(
    traj: &Trajectory,
    k: u32,
    c_k: f64,
    y: f64,
) -> Result<f64, DynamicsError> {
    let rungs = ladder(traj, k, y)?;
    let pts: Vec<(f64, f64)> = rungs
        .iter()
        .filter(|(_, u)| (u - c_k).abs() > 1e-300)
        .map(|(dx, u)| (dx.abs().ln(), (u - c_k).abs().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(DynamicsError::InsufficientApproach);
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

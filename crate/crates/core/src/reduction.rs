//! Orthogonal reduction of a per-user covariance program.
//!
//! A user with `t` antennas facing `m − 1` interference caps only interacts
//! with the caps through an `m̄ = min(t, m − 1)` dimensional subspace. A chain
//! of Householder rotations aligns the cross channels with the leading
//! coordinates: step `j` keeps the first `j − 1` entries of the `j`-th cross
//! channel and rotates the remaining entries onto the `j`-th axis. After the
//! sweep every cross channel lives in the leading `m̄` coordinates, and the
//! direct channel splits into a coupled head plus an interference-free
//! residual. The inverse map (`lift`) rebuilds a full-dimension covariance
//! from a solution of the reduced program via the tight block completion.

use crate::channel::{InterferenceBudget, MisoNetwork};
use crate::completion::{complete_matrix, CompletionCase, CompletionInput, CASE_TOL};
use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub user: usize,
    /// `m̄ = min(t_user, m − 1)`.
    pub dim: usize,
    /// Leading `m̄` coordinates of the rotated direct channel.
    pub direct: DVector<f64>,
    /// Remaining coordinates of the rotated direct channel. Beams along this
    /// direction create no interference at all.
    pub residual: DVector<f64>,
    pub residual_norm2: f64,
    /// Rotated cross channels, truncated to the leading `m̄` coordinates;
    /// one per unintended receiver, ascending receiver index.
    pub cross: Vec<DVector<f64>>,
    /// Interference caps matching `cross`. May be `+∞`.
    pub budgets: Vec<f64>,
    /// Receiver index per entry of `cross`.
    pub receivers: Vec<usize>,
    /// Transmit power budget of the user.
    pub power: f64,
    /// Accumulated orthogonal transform: original = `basis · rotated`.
    pub basis: DMatrix<f64>,
}

/// Rotate the user's channels so the interference caps only see the leading
/// `m̄` coordinates. When `t ≤ m − 1` the rotation is the identity.
pub fn reduce_user_problem(
    net: &MisoNetwork,
    user: usize,
    budget: &InterferenceBudget,
) -> ReducedProblem {
    let m = net.m();
    let t = net.antennas(user);
    let receivers: Vec<usize> = (0..m).filter(|&rx| rx != user).collect();
    let dim = t.min(m.saturating_sub(1));

    let mut rotated: Vec<DVector<f64>> = receivers
        .iter()
        .map(|&rx| net.channel(user, rx).clone())
        .collect();
    let mut direct_full = net.direct(user).clone();
    let mut basis = DMatrix::identity(t, t);

    if t > m.saturating_sub(1) && m >= 2 {
        for step in 0..(m - 1) {
            let sub = DVector::from_column_slice(&rotated[step].as_slice()[step..]);
            let u_small = linalg::rotation_to_e1(&sub);
            let mut u_full = DMatrix::identity(t, t);
            u_full
                .view_mut((step, step), (t - step, t - step))
                .copy_from(&u_small);
            for g in rotated.iter_mut() {
                *g = u_full.transpose() * &*g;
            }
            direct_full = u_full.transpose() * direct_full;
            basis *= &u_full;
        }
    }

    let direct = DVector::from_column_slice(&direct_full.as_slice()[..dim]);
    let residual = DVector::from_column_slice(&direct_full.as_slice()[dim..]);
    let cross: Vec<DVector<f64>> = rotated
        .iter()
        .map(|g| DVector::from_column_slice(&g.as_slice()[..dim]))
        .collect();

    ReducedProblem {
        user,
        dim,
        direct,
        residual_norm2: residual.norm_squared(),
        residual,
        cross,
        budgets: budget.row(user),
        receivers,
        power: net.power(user),
        basis,
    }
}

impl ReducedProblem {
    /// Sanity bound used by tests: the rotation must conserve the direct
    /// channel energy.
    pub fn norm_split_defect(&self, net: &MisoNetwork) -> f64 {
        let total = net.direct(self.user).norm_squared();
        (total - self.direct.norm_squared() - self.residual_norm2).abs()
    }
}

/// Rebuild a full-dimension covariance from a reduced one.
///
/// The reduced covariance keeps every cap value unchanged; the leftover power
/// `P − trace` rides the interference-free residual direction through the
/// tight completion, so the direct-channel gain meets the completion bound.
pub fn lift_solution(
    red: &ReducedProblem,
    reduced_cov: &DMatrix<f64>,
    power_used: f64,
) -> Result<DMatrix<f64>> {
    if reduced_cov.nrows() != red.dim || reduced_cov.ncols() != red.dim {
        return Err(Error::DimensionMismatch(format!(
            "reduced covariance is {}x{}, expected {}x{}",
            reduced_cov.nrows(),
            reduced_cov.ncols(),
            red.dim,
            red.dim
        )));
    }
    let trace = reduced_cov.trace();
    if (trace - power_used).abs() > 1e-8 * (1.0 + power_used.abs()) {
        return Err(Error::InvalidInput(format!(
            "power_used = {power_used} does not match trace = {trace}"
        )));
    }
    if trace > red.power + 1e-8 * (1.0 + red.power) {
        return Err(Error::TraceExceedsBudget {
            trace,
            budget: red.power,
        });
    }
    if linalg::min_eigenvalue(reduced_cov) < -1e-10 * trace.max(1.0) {
        return Err(Error::NotPsd("reduced covariance".into()));
    }
    let input = CompletionInput::new(
        red.direct.clone(),
        red.residual.clone(),
        linalg::psd_project(reduced_cov),
        red.power,
    );
    let completed = complete_matrix(&input)?;
    Ok(linalg::symmetrize(
        &(&red.basis * &completed.k * red.basis.transpose()),
    ))
}

/// Rank-one counterpart of [`lift_solution`]: map a reduced beam to a full
/// beam, topping up with the residual direction at full power.
pub fn lift_beamformer(
    red: &ReducedProblem,
    reduced_beam: &DVector<f64>,
) -> (DVector<f64>, CompletionCase) {
    let t = red.basis.nrows();
    let trace = reduced_beam.norm_squared();
    let scale = 1.0 + trace;
    let gain = red.direct.dot(reduced_beam);
    let spare = (red.power - trace).max(0.0);
    let mut rotated = DVector::zeros(t);
    rotated.rows_mut(0, red.dim).copy_from(reduced_beam);

    let case = if red.residual_norm2 <= CASE_TOL * scale {
        CompletionCase::ZeroY
    } else if gain * gain <= CASE_TOL * scale {
        CompletionCase::DegenerateX
    } else {
        CompletionCase::Aligned
    };
    if case != CompletionCase::ZeroY {
        let sign = if case == CompletionCase::Aligned && gain < 0.0 {
            -1.0
        } else {
            1.0
        };
        let coef = sign * (spare / red.residual_norm2).sqrt();
        rotated
            .rows_mut(red.dim, t - red.dim)
            .copy_from(&(&red.residual * coef));
    }
    (&red.basis * rotated, case)
}

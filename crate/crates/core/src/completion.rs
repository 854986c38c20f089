//! Tight completion of a partially specified PSD matrix.
//!
//! Given a fixed upper-left block `K₁₁`, probe vectors `x`, `y` and a trace
//! budget `P`, the quadratic form `[x;y]ᵀK[x;y]` over all PSD completions `K`
//! with `trace(K) ≤ P` is bounded by
//! `(√(xᵀK₁₁x) + ‖y‖·√(P − trace(K₁₁)))²`,
//! and the bound is attained by an explicit completion whose rank never
//! exceeds `max(rank(K₁₁), 1)`. The attaining completion depends on which of
//! `xᵀK₁₁x` and `‖y‖` vanish, hence the three construction cases below.

use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Quantities smaller than this (relative to `1 + trace(K₁₁)`) are treated as
/// zero when dispatching between construction cases. The aligned-case formula
/// divides by both `xᵀK₁₁x` and `‖y‖²`.
pub const CASE_TOL: f64 = 1e-12;
/// Input trace slack.
pub const TRACE_TOL: f64 = 1e-12;
/// Eigenvalues below `1e-12·λ_max` are truncated when forming the PSD square
/// root factor.
pub const EIG_TRUNC: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CompletionInput {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub k11: DMatrix<f64>,
    pub trace_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompletionCase {
    /// `xᵀK₁₁x ≠ 0` and `‖y‖ ≠ 0`: cross block aligned with `K₁₁x yᵀ`.
    Aligned,
    /// `xᵀK₁₁x = 0`, `‖y‖ ≠ 0`: cross block built from the PSD square root.
    DegenerateX,
    /// `‖y‖ = 0`: leftover power is useless; pad with zeros.
    ZeroY,
}

#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub k: DMatrix<f64>,
    pub case: CompletionCase,
    pub bound: f64,
}

impl CompletionInput {
    pub fn new(x: DVector<f64>, y: DVector<f64>, k11: DMatrix<f64>, trace_cap: f64) -> Self {
        Self {
            x,
            y,
            k11,
            trace_cap,
        }
    }

    fn check(&self) -> Result<()> {
        let t1 = self.x.len();
        if self.k11.nrows() != t1 || self.k11.ncols() != t1 {
            return Err(Error::DimensionMismatch(format!(
                "K11 is {}x{}, probe x has length {}",
                self.k11.nrows(),
                self.k11.ncols(),
                t1
            )));
        }
        if !linalg::is_symmetric(&self.k11, 1e-10) {
            return Err(Error::NotSymmetric);
        }
        let trace = self.k11.trace();
        if linalg::min_eigenvalue(&self.k11) < -1e-10 * trace.max(1.0) {
            return Err(Error::NotPsd("K11".into()));
        }
        if trace > self.trace_cap + TRACE_TOL {
            return Err(Error::TraceExceedsBudget {
                trace,
                budget: self.trace_cap,
            });
        }
        Ok(())
    }

    fn residual_power(&self) -> f64 {
        (self.trace_cap - self.k11.trace()).max(0.0)
    }
}

/// The largest value `[x;y]ᵀK[x;y]` can take over feasible completions.
pub fn completion_bound(input: &CompletionInput) -> Result<f64> {
    input.check()?;
    let q = crate::channel::quad_form(&input.k11, &input.x).max(0.0);
    let tail = input.y.norm() * input.residual_power().sqrt();
    Ok((q.sqrt() + tail).powi(2))
}

/// Factor `F` with `FᵀF = K₁₁`, rows beyond `rank(K₁₁)` zero.
///
/// Built from the eigendecomposition with eigenvalues descending and a fixed
/// eigenvector sign convention, so the factor is reproducible.
pub fn psd_sqrt_factor(k11: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !linalg::is_symmetric(k11, 1e-10) {
        return Err(Error::NotSymmetric);
    }
    let (values, vectors) = linalg::sym_eig_desc(k11);
    let lead = values.first().copied().unwrap_or(0.0);
    if values.last().copied().unwrap_or(0.0) < -1e-10 * k11.trace().max(1.0) {
        return Err(Error::NotPsd("square-root factor input".into()));
    }
    let n = k11.nrows();
    let mut f = DMatrix::zeros(n, n);
    for (row, &val) in values.iter().enumerate() {
        if val > EIG_TRUNC * lead.max(0.0) {
            let scaled = vectors.column(row) * val.sqrt();
            f.set_row(row, &scaled.transpose());
        }
    }
    Ok(f)
}

/// Construct the completion attaining [`completion_bound`].
pub fn complete_matrix(input: &CompletionInput) -> Result<CompletionResult> {
    input.check()?;
    let t1 = input.x.len();
    let t2 = input.y.len();
    let scale = 1.0 + input.k11.trace();
    let q = crate::channel::quad_form(&input.k11, &input.x).max(0.0);
    let y_norm2 = input.y.norm_squared();
    let residual = input.residual_power();

    let mut k = DMatrix::zeros(t1 + t2, t1 + t2);
    k.view_mut((0, 0), (t1, t1)).copy_from(&input.k11);

    let case = if y_norm2 <= CASE_TOL * scale {
        CompletionCase::ZeroY
    } else if q <= CASE_TOL * scale {
        CompletionCase::DegenerateX
    } else {
        CompletionCase::Aligned
    };

    match case {
        CompletionCase::ZeroY => {}
        CompletionCase::DegenerateX => {
            // K₂₁ = (√residual/‖y‖)·y·(1₀ᵀ K₁₁^½); the leading square-root row
            // is K₁₁-orthogonal to x, which keeps the cross term out of the
            // quadratic form.
            if t1 > 0 {
                let f = psd_sqrt_factor(&input.k11)?;
                let lead_row = f.row(0).transpose();
                let coef = residual.sqrt() / y_norm2.sqrt();
                let k21 = &input.y * lead_row.transpose() * coef;
                k.view_mut((t1, 0), (t2, t1)).copy_from(&k21);
                k.view_mut((0, t1), (t1, t2)).copy_from(&k21.transpose());
            }
            let k22 = &input.y * input.y.transpose() * (residual / y_norm2);
            k.view_mut((t1, t1), (t2, t2)).copy_from(&k22);
        }
        CompletionCase::Aligned => {
            let k11x = &input.k11 * &input.x;
            let coef = residual.sqrt() / (y_norm2.sqrt() * q.sqrt());
            let k21 = &input.y * k11x.transpose() * coef;
            let k22 = &input.y * input.y.transpose() * (residual / y_norm2);
            k.view_mut((t1, 0), (t2, t1)).copy_from(&k21);
            k.view_mut((0, t1), (t1, t2)).copy_from(&k21.transpose());
            k.view_mut((t1, t1), (t2, t2)).copy_from(&k22);
        }
    }

    // The stored bound is what the chosen case actually attains: quantities
    // below the dispatch threshold are treated as zero on both sides, since
    // the aligned formula cannot be evaluated there. [`completion_bound`]
    // stays the unclamped outer bound; the two differ by at most
    // O(√CASE_TOL).
    let bound = match case {
        CompletionCase::Aligned => (q.sqrt() + y_norm2.sqrt() * residual.sqrt()).powi(2),
        CompletionCase::DegenerateX => y_norm2 * residual,
        CompletionCase::ZeroY => q,
    };
    Ok(CompletionResult { k, case, bound })
}

impl CompletionResult {
    /// Evaluate `[x;y]ᵀK[x;y]` for the stored completion.
    pub fn quadratic_form(&self, input: &CompletionInput) -> f64 {
        let mut probe = DVector::zeros(input.x.len() + input.y.len());
        probe.rows_mut(0, input.x.len()).copy_from(&input.x);
        probe
            .rows_mut(input.x.len(), input.y.len())
            .copy_from(&input.y);
        crate::channel::quad_form(&self.k, &probe)
    }
}

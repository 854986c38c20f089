//! Convex solver for the per-user covariance program.
//!
//! The inner problem maximizes the direct-channel gain `hᵀSh` over PSD
//! covariances subject to quadratic interference caps and a trace cap. It is
//! solved through its dual — a handful of multipliers under a linear matrix
//! inequality — with a log-determinant barrier and damped Newton steps; the
//! primal iterate recovered from the slack matrix is feasible by construction
//! and converges from below, so every solve carries a certified duality gap.
//!
//! An outer one-dimensional search splits the transmit power between the
//! interference-coupled subspace and the interference-free residual
//! direction. The optimal covariance admits a rank-one factor; a face-walk
//! purification enforces that in the degenerate cases where the central path
//! converges to a higher-rank point of the optimal face.

use crate::channel::{quad_form, Beamformer, InterferenceBudget, MisoNetwork};
use crate::completion::CompletionCase;
use crate::error::{Error, Result};
use crate::linalg;
use crate::oracle::inertia;
use crate::reduction::{lift_beamformer, reduce_user_problem, ReducedProblem};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Relative duality-gap target of the inner solver.
pub const GAP_REL: f64 = 1e-9;
/// Eigenvalue ratio above which the reduced optimum is purified before use.
pub const PURIFY_TRIGGER: f64 = 1e-8;
/// Eigenvalue ratio a returned beamformer source must satisfy.
pub const RANK_RATIO_TOL: f64 = 1e-6;
/// Residual scale for certificate verdicts.
pub const KKT_RESIDUAL_REL: f64 = 1e-7;
/// Absolute tolerance of the outer power-split search, relative to the power
/// budget.
pub const SPLIT_TOL_REL: f64 = 1e-9;

/// One quadratic cap: `vectorᵀ S vector ≤ cap` (`cap` may be `+∞`).
#[derive(Debug, Clone)]
pub struct QuadConstraint {
    pub vector: DVector<f64>,
    pub cap: f64,
}

/// `maximize directᵀS direct  s.t.  quadratic caps, trace(S) ≤ trace_cap, S ⪰ 0`.
#[derive(Debug, Clone)]
pub struct QcqpProblem {
    pub direct: DVector<f64>,
    pub constraints: Vec<QuadConstraint>,
    pub trace_cap: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Optimal covariance of the reduced program.
    pub cov: DMatrix<f64>,
    /// Optimal objective `directᵀ cov direct`.
    pub value: f64,
    /// One multiplier per constraint (same order), then the trace multiplier.
    pub multipliers: Vec<f64>,
    /// Certified `dual − primal` slack, non-negative.
    pub duality_gap: f64,
}

impl SolveResult {
    fn zero(n: usize, k: usize) -> Self {
        Self {
            cov: DMatrix::zeros(n, n),
            value: 0.0,
            multipliers: vec![0.0; k + 1],
            duality_gap: 0.0,
        }
    }

    pub fn trace_multiplier(&self) -> f64 {
        *self.multipliers.last().expect("trace multiplier")
    }

    /// `λ₂/λ₁` of the optimal covariance (zero when the top eigenvalue
    /// vanishes or the problem is one-dimensional).
    pub fn eigen_ratio(&self) -> f64 {
        let (values, _) = linalg::sym_eig_desc(&self.cov);
        match values.as_slice() {
            [first, second, ..] if *first > 0.0 => (second / first).max(0.0),
            _ => 0.0,
        }
    }
}

// ---------------------------------------------------------------------------
// preprocessing

struct PreparedConstraint {
    original: usize,
    vector: DVector<f64>,
    cap: f64,
}

/// Problem restated on the subspace where hard (zero-cap) constraints hold.
struct Prepared {
    basis: DMatrix<f64>,
    direct: DVector<f64>,
    cons: Vec<PreparedConstraint>,
}

fn preprocess(p: &QcqpProblem) -> Prepared {
    let n = p.direct.len();
    let mut hard: Vec<DVector<f64>> = Vec::new();
    let mut soft: Vec<(usize, &QuadConstraint)> = Vec::new();
    for (idx, con) in p.constraints.iter().enumerate() {
        debug_assert!(!con.cap.is_nan() && con.cap >= 0.0, "caps must be ≥ 0");
        debug_assert_eq!(con.vector.len(), n);
        if con.vector.norm_squared() == 0.0 || con.cap == f64::INFINITY {
            continue; // vacuous
        }
        if con.cap <= 0.0 {
            hard.push(con.vector.clone());
        } else {
            soft.push((idx, con));
        }
    }
    let basis = if hard.is_empty() {
        DMatrix::identity(n, n)
    } else {
        linalg::orthogonal_complement(&hard, n)
    };
    let direct = basis.transpose() * &p.direct;
    let cons = soft
        .into_iter()
        .filter_map(|(idx, con)| {
            let vector = basis.transpose() * &con.vector;
            // a cross channel inside the hard subspace is satisfied for free
            if vector.norm_squared() <= 1e-24 * con.vector.norm_squared() {
                None
            } else {
                Some(PreparedConstraint {
                    original: idx,
                    vector,
                    cap: con.cap,
                })
            }
        })
        .collect();
    Prepared {
        basis,
        direct,
        cons,
    }
}

// ---------------------------------------------------------------------------
// inner solve

/// Solve the reduced covariance program. Never fails: `S = 0` is always
/// feasible and the trace cap keeps the objective bounded.
pub fn solve_reduced_sdp(p: &QcqpProblem) -> SolveResult {
    let n = p.direct.len();
    let k = p.constraints.len();
    debug_assert!(p.trace_cap >= 0.0 && p.trace_cap.is_finite());

    let prep = preprocess(p);
    let np = prep.basis.ncols();
    if np == 0 || p.trace_cap <= 0.0 || prep.direct.norm_squared() == 0.0 {
        return SolveResult::zero(n, k);
    }

    let mut result = if prep.cons.is_empty() {
        // unconstrained: all power along the projected direct channel
        let gain = prep.direct.norm_squared();
        let unit = &prep.direct / gain.sqrt();
        let cov = &unit * unit.transpose() * p.trace_cap;
        let mut multipliers = vec![0.0; k + 1];
        multipliers[k] = gain;
        SolveResult {
            cov: embed(&prep.basis, &cov),
            value: p.trace_cap * gain,
            multipliers,
            duality_gap: 0.0,
        }
    } else if np == 1 {
        solve_scalar(p, &prep)
    } else {
        solve_barrier(p, &prep)
    };

    // rank-one safety net for degenerate optimal faces
    if result.eigen_ratio() > PURIFY_TRIGGER {
        let mut projected = prep.basis.transpose() * &result.cov * &prep.basis;
        purify_rank_one(&mut projected, &prep.direct, &prep.cons, p.trace_cap);
        // the walked direction is accurate even where the walked scale is
        // not; re-stretching it to the binding cap can only help
        let (pvals, pvecs) = linalg::sym_eig_desc(&projected);
        if pvals.first().copied().unwrap_or(0.0) > 0.0 {
            let rescaled = rank_one_along(&pvecs.column(0).into_owned(), &prep, p.trace_cap);
            if quad_form(&rescaled, &prep.direct) > quad_form(&projected, &prep.direct) {
                projected = rescaled;
            }
        }
        result.cov = embed(&prep.basis, &projected);
        result.value = quad_form(&result.cov, &p.direct).max(0.0);
        result.duality_gap = (dual_value(p, &result.multipliers) - result.value).max(0.0);
    }
    result
}

fn embed(basis: &DMatrix<f64>, cov: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::symmetrize(&(basis * cov * basis.transpose()))
}

fn dual_value(p: &QcqpProblem, multipliers: &[f64]) -> f64 {
    let mut total = multipliers[p.constraints.len()] * p.trace_cap;
    for (con, &lam) in p.constraints.iter().zip(multipliers) {
        if con.cap.is_finite() {
            total += lam * con.cap;
        }
    }
    total
}

/// One-dimensional projected problem: pick the binding cap directly.
fn solve_scalar(p: &QcqpProblem, prep: &Prepared) -> SolveResult {
    let gain = prep.direct.norm_squared();
    let mut level = p.trace_cap;
    let mut binding: Option<usize> = None; // None = trace cap
    for (pos, con) in prep.cons.iter().enumerate() {
        let coef = con.vector.norm_squared();
        let allowed = con.cap / coef;
        if allowed < level {
            level = allowed;
            binding = Some(pos);
        }
    }
    let cov = DMatrix::from_element(1, 1, level);
    let mut multipliers = vec![0.0; p.constraints.len() + 1];
    match binding {
        None => multipliers[p.constraints.len()] = gain,
        Some(pos) => {
            let con = &prep.cons[pos];
            multipliers[con.original] = gain / con.vector.norm_squared();
        }
    }
    SolveResult {
        cov: embed(&prep.basis, &cov),
        value: level * gain,
        multipliers,
        duality_gap: 0.0,
    }
}

struct BarrierEval {
    chol: Cholesky<f64, Dyn>,
}

fn slack_matrix(prep: &Prepared, lam: &DVector<f64>) -> DMatrix<f64> {
    let np = prep.direct.len();
    let k = prep.cons.len();
    let mut z = DMatrix::identity(np, np) * lam[k];
    for (pos, con) in prep.cons.iter().enumerate() {
        z += &con.vector * con.vector.transpose() * lam[pos];
    }
    z -= &prep.direct * prep.direct.transpose();
    z
}

fn try_factor(prep: &Prepared, lam: &DVector<f64>) -> Option<BarrierEval> {
    if lam.iter().any(|&x| x <= 0.0) {
        return None;
    }
    let chol = Cholesky::new(slack_matrix(prep, lam))?;
    Some(BarrierEval { chol })
}

/// Solve `Z w = v` with one step of iterative refinement.
fn refined_solve(chol: &Cholesky<f64, Dyn>, z: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut w = chol.solve(v);
    let r = v - z * &w;
    w += chol.solve(&r);
    w
}

fn solve_barrier(p: &QcqpProblem, prep: &Prepared) -> SolveResult {
    let np = prep.direct.len();
    let k = prep.cons.len();
    let nbar = (k + 1 + np) as f64;

    let mut lam = DVector::from_element(k + 1, 1.0);
    lam[k] = prep.direct.norm_squared() + 1.0;
    let mut t = 1.0;
    let mut eval = try_factor(prep, &lam).expect("initial multipliers are strictly dual-feasible");

    let max_outer = 60;
    for _ in 0..max_outer {
        eval = newton_center(prep, p.trace_cap, &mut lam, t, eval);
        let z = slack_matrix(prep, &lam);
        let wh = refined_solve(&eval.chol, &z, &prep.direct);
        let value_est = (prep.direct.dot(&wh) / t).max(0.0);
        if nbar / t <= GAP_REL * (1.0 + value_est) {
            break;
        }
        t *= 10.0;
    }

    // primal recovery from the slack matrix: S = Z⁻¹/t is feasible at the
    // central point, with analytic gap (k + 1 + n̄)/t.
    let z = slack_matrix(prep, &lam);
    let mut zinv = eval.chol.inverse();
    // one refinement pass on the inverse
    let residual = DMatrix::identity(np, np) - &z * &zinv;
    zinv += eval.chol.solve(&residual);
    let central = polish_feasible(linalg::symmetrize(&(zinv / t)), prep, p.trace_cap);

    // The central recovery inverts a matrix whose condition number grows
    // like t, which caps its accuracy near √ε. The optimal covariance lives
    // in the near-null subspace of the slack matrix, and eigenvectors stay
    // accurate even when their tiny eigenvalues don't, so rank-one
    // candidates along that subspace scaled to the binding cap recover
    // almost full precision. Inactive caps carry multipliers of order 1/t
    // that still tilt the subspace; a second slack matrix with those terms
    // dropped removes the tilt. Keep whichever feasible recovery scores
    // highest.
    let mut cov = central;
    let mut value = quad_form(&cov, &prep.direct).max(0.0);
    let consider = |candidate: DMatrix<f64>, cov: &mut DMatrix<f64>, value: &mut f64| {
        let candidate_value = quad_form(&candidate, &prep.direct).max(0.0);
        if candidate_value > *value {
            *cov = candidate;
            *value = candidate_value;
        }
    };
    let multiplier_floor = (nbar / t).sqrt();
    let active: Vec<usize> = (0..k)
        .filter(|&pos| lam[pos] * (1.0 + prep.cons[pos].cap) > multiplier_floor)
        .collect();
    let trace_active = lam[k] * (1.0 + p.trace_cap) > multiplier_floor;
    let mut z_active = DMatrix::identity(np, np) * lam[k];
    for &pos in &active {
        z_active += &prep.cons[pos].vector * prep.cons[pos].vector.transpose() * lam[pos];
    }
    z_active -= &prep.direct * prep.direct.transpose();
    for zmat in [&z, &z_active] {
        let (zvals, zvecs) = linalg::sym_eig_desc(zmat);
        let zmax = zvals.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
        consider(
            rank_one_along(&zvecs.column(np - 1).into_owned(), prep, p.trace_cap),
            &mut cov,
            &mut value,
        );
        // projection of the objective direction onto the whole near-null
        // subspace; with a degenerate (multi-dimensional) optimal face the
        // single eigenvector may point anywhere inside it
        let mut h_null = DVector::zeros(np);
        for (i, &zval) in zvals.iter().enumerate() {
            if zval <= 1e-6 * zmax {
                let q = zvecs.column(i);
                h_null += q * q.dot(&prep.direct);
            }
        }
        if h_null.norm() > 1e-12 * prep.direct.norm() {
            let unit = &h_null / h_null.norm();
            consider(
                rank_one_along(&unit, prep, p.trace_cap),
                &mut cov,
                &mut value,
            );
        }
    }

    // Near a degenerate knee (a cap and the trace both marginally binding)
    // the multipliers converge slowly and every subspace estimate inherits
    // their error. A Newton solve of the active-set first-order system from
    // the barrier's estimate restores full precision when it converges, and
    // its multipliers are then the exact ones for the certificate. At an
    // exact knee the full active set can be one equation over-determined for
    // a rank-one beam; leave-one-out subsets cover that case.
    let mut best_polish: Option<(DMatrix<f64>, DVector<f64>, f64)> = None;
    let (vals_best, vecs_best) = linalg::sym_eig_desc(&cov);
    if vals_best.first().copied().unwrap_or(0.0) > 0.0 {
        let beam = vecs_best.column(0) * vals_best[0].sqrt();
        let offer = |outcome: Option<(DMatrix<f64>, DVector<f64>)>,
                     best: &mut Option<(DMatrix<f64>, DVector<f64>, f64)>| {
            let Some((candidate, exact_lam)) = outcome else {
                return;
            };
            if exact_lam.iter().any(|&l| l < -1e-12) {
                return;
            }
            let candidate_value = quad_form(&candidate, &prep.direct).max(0.0);
            if best.as_ref().is_none_or(|(_, _, v)| candidate_value > *v) {
                *best = Some((candidate, exact_lam.map(|l| l.max(0.0)), candidate_value));
            }
        };
        offer(
            newton_polish_rank_one(prep, p.trace_cap, &beam, &lam, &active, trace_active),
            &mut best_polish,
        );
        // proper subsets are only worth chasing while the gap estimate
        // stays large
        let dual_est: f64 = prep
            .cons
            .iter()
            .enumerate()
            .map(|(pos, con)| lam[pos] * con.cap)
            .sum::<f64>()
            + lam[k] * p.trace_cap;
        let settled = best_polish.as_ref().map(|(_, _, v)| *v).unwrap_or(value)
            + 5e-9 * (1.0 + value)
            >= dual_est;
        if !settled {
            for skip in 0..active.len() {
                let subset: Vec<usize> = active
                    .iter()
                    .copied()
                    .filter(|&pos| pos != active[skip])
                    .collect();
                offer(
                    newton_polish_rank_one(prep, p.trace_cap, &beam, &lam, &subset, trace_active),
                    &mut best_polish,
                );
            }
            if trace_active {
                offer(
                    newton_polish_rank_one(prep, p.trace_cap, &beam, &lam, &active, false),
                    &mut best_polish,
                );
            }
        }
    }
    let lam = match best_polish {
        Some((polished_cov, polished_lam, polished_value))
            if polished_value >= value - 1e-12 * (1.0 + value) =>
        {
            cov = polished_cov;
            value = polished_value;
            polished_lam
        }
        _ => lam,
    };
    let mut multipliers = vec![0.0; p.constraints.len() + 1];
    for (pos, con) in prep.cons.iter().enumerate() {
        multipliers[con.original] = lam[pos];
    }
    multipliers[p.constraints.len()] = lam[k];
    let gap = (dual_value(p, &multipliers) - value).max(0.0);
    SolveResult {
        cov: embed(&prep.basis, &cov),
        value,
        multipliers,
        duality_gap: gap,
    }
}

/// Newton iteration on the rank-one stationarity system for a fixed active
/// set: `(Σ μ_i v_i v_iᵀ + ν I) b = h (hᵀb)` with the active caps and
/// (optionally) the trace held at equality. Returns the covariance along the
/// converged beam direction, rescaled to feasibility, or `None` when the
/// iteration stalls or the system is singular.
fn newton_polish_rank_one(
    prep: &Prepared,
    trace_cap: f64,
    beam0: &DVector<f64>,
    lam: &DVector<f64>,
    active: &[usize],
    trace_active: bool,
) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let np = prep.direct.len();
    let a = active.len();
    let rows = np + a + usize::from(trace_active);
    if a == 0 && !trace_active {
        return None;
    }
    let mut x = DVector::zeros(rows);
    x.rows_mut(0, np).copy_from(beam0);
    for (i, &pos) in active.iter().enumerate() {
        x[np + i] = lam[pos];
    }
    if trace_active {
        x[np + a] = lam[prep.cons.len()];
    }
    let scale = 1.0 + prep.direct.norm_squared() + trace_cap;

    let mut converged = false;
    for _ in 0..40 {
        let beam = x.rows(0, np).into_owned();
        let nu = if trace_active { x[np + a] } else { 0.0 };
        let gain = prep.direct.dot(&beam);

        let mut residual = DVector::zeros(rows);
        let mut jac = DMatrix::zeros(rows, rows);
        let mut stat = &beam * nu - &prep.direct * gain;
        let mut jbb = DMatrix::identity(np, np) * nu - &prep.direct * prep.direct.transpose();
        for (i, &pos) in active.iter().enumerate() {
            let v = &prep.cons[pos].vector;
            let vb = v.dot(&beam);
            stat += v * (vb * x[np + i]);
            jbb += v * v.transpose() * x[np + i];
            jac.view_mut((0, np + i), (np, 1)).copy_from(&(v * vb));
            jac.view_mut((np + i, 0), (1, np))
                .copy_from(&(v.transpose() * (2.0 * vb)));
            residual[np + i] = vb * vb - prep.cons[pos].cap;
        }
        residual.rows_mut(0, np).copy_from(&stat);
        jac.view_mut((0, 0), (np, np)).copy_from(&jbb);
        if trace_active {
            jac.view_mut((0, np + a), (np, 1)).copy_from(&beam);
            jac.view_mut((np + a, 0), (1, np))
                .copy_from(&(beam.transpose() * 2.0));
            residual[np + a] = beam.norm_squared() - trace_cap;
        }

        if residual.amax() <= 1e-13 * scale {
            converged = true;
            break;
        }
        let step = jac.lu().solve(&(-&residual))?;
        if step.iter().any(|s| !s.is_finite()) {
            return None;
        }
        x += step;
    }
    if !converged {
        return None;
    }
    let beam = x.rows(0, np).into_owned();
    let norm = beam.norm();
    if norm <= 0.0 {
        return None;
    }
    let mut exact_lam = DVector::zeros(prep.cons.len() + 1);
    for (i, &pos) in active.iter().enumerate() {
        exact_lam[pos] = x[np + i];
    }
    if trace_active {
        exact_lam[prep.cons.len()] = x[np + a];
    }
    Some((rank_one_along(&(&beam / norm), prep, trace_cap), exact_lam))
}

/// Largest feasible rank-one covariance along a unit direction.
fn rank_one_along(direction: &DVector<f64>, prep: &Prepared, trace_cap: f64) -> DMatrix<f64> {
    let mut level = trace_cap;
    for con in &prep.cons {
        let leak = con.vector.dot(direction).powi(2);
        if leak > 0.0 {
            level = level.min(con.cap / leak);
        }
    }
    polish_feasible(direction * direction.transpose() * level, prep, trace_cap)
}

/// Scale a candidate down until every cap and the trace budget hold exactly.
fn polish_feasible(mut cov: DMatrix<f64>, prep: &Prepared, trace_cap: f64) -> DMatrix<f64> {
    let mut scale: f64 = 1.0;
    for con in &prep.cons {
        let form = quad_form(&cov, &con.vector);
        if form > con.cap {
            scale = scale.min(con.cap / form);
        }
    }
    let trace = cov.trace();
    if trace > trace_cap {
        scale = scale.min(trace_cap / trace);
    }
    if scale < 1.0 {
        cov *= scale;
    }
    cov
}

fn newton_center(
    prep: &Prepared,
    pbar: f64,
    lam: &mut DVector<f64>,
    t: f64,
    mut eval: BarrierEval,
) -> BarrierEval {
    let np = prep.direct.len();
    let k = prep.cons.len();
    for _ in 0..80 {
        let z = slack_matrix(prep, lam);
        let mut zinv = eval.chol.inverse();
        let residual = DMatrix::identity(np, np) - &z * &zinv;
        zinv += eval.chol.solve(&residual);

        let solved: Vec<DVector<f64>> = prep
            .cons
            .iter()
            .map(|c| refined_solve(&eval.chol, &z, &c.vector))
            .collect();

        let mut grad = DVector::zeros(k + 1);
        let mut hess = DMatrix::zeros(k + 1, k + 1);
        for (i, con) in prep.cons.iter().enumerate() {
            grad[i] = t * con.cap - con.vector.dot(&solved[i]) - 1.0 / lam[i];
            for (j, other) in prep.cons.iter().enumerate().take(i + 1) {
                let cross = other.vector.dot(&solved[i]);
                hess[(i, j)] = cross * cross;
                hess[(j, i)] = hess[(i, j)];
            }
            hess[(i, k)] = solved[i].norm_squared();
            hess[(k, i)] = hess[(i, k)];
            hess[(i, i)] += 1.0 / (lam[i] * lam[i]);
        }
        grad[k] = t * pbar - zinv.trace() - 1.0 / lam[k];
        hess[(k, k)] = zinv.norm_squared() + 1.0 / (lam[k] * lam[k]);

        // damped Newton step with a ridge fallback if rounding spoils the
        // Hessian factorization
        let mut step = None;
        let mut ridge = 0.0;
        for _ in 0..8 {
            let mut shifted = hess.clone();
            for d in 0..(k + 1) {
                shifted[(d, d)] += ridge;
            }
            if let Some(ch) = Cholesky::new(shifted) {
                step = Some(ch.solve(&(-&grad)));
                break;
            }
            ridge = if ridge == 0.0 {
                1e-12 * (1.0 + hess.trace())
            } else {
                ridge * 100.0
            };
        }
        let Some(dir) = step else { break };
        let decrement2 = -grad.dot(&dir);
        let progressing = decrement2 > 1e-16; // false on NaN as well
        if !progressing {
            break;
        }

        // Damped step for a self-concordant barrier: no function-value test
        // (t·cost dwarfs f64 resolution at high t), only domain feasibility.
        let delta = decrement2.sqrt();
        let mut alpha = if delta <= 0.25 {
            1.0
        } else {
            1.0 / (1.0 + delta)
        };
        let mut moved = false;
        for _ in 0..70 {
            let trial = &*lam + &dir * alpha;
            if let Some(trial_eval) = try_factor(prep, &trial) {
                *lam = trial;
                eval = trial_eval;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    eval
}

// ---------------------------------------------------------------------------
// rank-one purification

/// Walk inside the optimal face toward a rank-one point. Each move keeps the
/// objective and every active cap fixed exactly, stays PSD and feasible, and
/// either drops the rank or activates a new cap.
fn purify_rank_one(
    cov: &mut DMatrix<f64>,
    direct: &DVector<f64>,
    cons: &[PreparedConstraint],
    trace_cap: f64,
) {
    let act_tol = |cap: f64| 1e-7 * (1.0 + cap.abs());
    let mut active: Vec<bool> = cons
        .iter()
        .map(|c| quad_form(cov, &c.vector) >= c.cap - act_tol(c.cap))
        .collect();
    let mut trace_active = cov.trace() >= trace_cap - act_tol(trace_cap);

    let max_rounds = cov.nrows() + cons.len() + 3;
    for _ in 0..max_rounds {
        let (values, vectors) = linalg::sym_eig_desc(cov);
        let lead = values.first().copied().unwrap_or(0.0);
        if lead <= 0.0 {
            cov.fill(0.0);
            return;
        }
        let kept: Vec<usize> = (0..values.len())
            .filter(|&i| values[i] > 1e-9 * lead)
            .collect();
        let r = kept.len();
        // drop sub-noise eigenvalues so the face basis is clean
        let mut basis = DMatrix::zeros(cov.nrows(), r);
        for (col, &i) in kept.iter().enumerate() {
            basis.set_column(col, &vectors.column(i).into_owned());
        }
        let face = DVector::from_iterator(r, kept.iter().map(|&i| values[i]));
        *cov = &basis * DMatrix::from_diagonal(&face) * basis.transpose();
        if r <= 1 {
            return;
        }

        // equations: the move must not change the objective, any active cap,
        // or (if binding) the trace
        let nvar = r * (r + 1) / 2;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let push_form_row = |rows: &mut Vec<Vec<f64>>, g: &DVector<f64>| {
            let mut row = vec![0.0; nvar];
            let mut idx = 0;
            for i in 0..r {
                for j in i..r {
                    row[idx] = if i == j {
                        g[i] * g[i]
                    } else {
                        2.0 * g[i] * g[j]
                    };
                    idx += 1;
                }
            }
            rows.push(row);
        };
        push_form_row(&mut rows, &(basis.transpose() * direct));
        for (pos, con) in cons.iter().enumerate() {
            if active[pos] {
                push_form_row(&mut rows, &(basis.transpose() * &con.vector));
            }
        }
        if trace_active {
            let mut row = vec![0.0; nvar];
            let mut idx = 0;
            for i in 0..r {
                for j in i..r {
                    if i == j {
                        row[idx] = 1.0;
                    }
                    idx += 1;
                }
            }
            rows.push(row);
        }

        let Some(dir_packed) = null_direction(&rows, nvar) else {
            return;
        };
        let mut dir = DMatrix::zeros(r, r);
        let mut idx = 0;
        for i in 0..r {
            for j in i..r {
                dir[(i, j)] = dir_packed[idx];
                dir[(j, i)] = dir_packed[idx];
                idx += 1;
            }
        }

        // PSD bounds: face + s·dir ⪰ 0 ⇔ I + s·E ⪰ 0, E = F^{-½} dir F^{-½}
        let half_inv = DMatrix::from_diagonal(&face.map(|x| 1.0 / x.sqrt()));
        let (mu, _) = linalg::sym_eig_desc(&(&half_inv * &dir * &half_inv));
        let mu_max = mu.first().copied().unwrap_or(0.0);
        let mu_min = mu.last().copied().unwrap_or(0.0);
        let mut hi = if mu_min < -1e-14 {
            -1.0 / mu_min
        } else {
            f64::INFINITY
        };
        let mut lo = if mu_max > 1e-14 {
            -1.0 / mu_max
        } else {
            f64::NEG_INFINITY
        };
        let psd_hi = hi;
        let psd_lo = lo;

        // inactive caps limit the step too
        let full_dir = &basis * &dir * basis.transpose();
        let mut hi_blocker: Option<usize> = None;
        let mut lo_blocker: Option<usize> = None;
        let mut hi_trace = false;
        let mut lo_trace = false;
        for (pos, con) in cons.iter().enumerate() {
            if active[pos] {
                continue;
            }
            let coef = quad_form(&full_dir, &con.vector);
            let slack = (con.cap - quad_form(cov, &con.vector)).max(0.0);
            if coef > 1e-14 && slack / coef < hi {
                hi = slack / coef;
                hi_blocker = Some(pos);
            } else if coef < -1e-14 && -slack / coef > lo {
                lo = -slack / coef;
                lo_blocker = Some(pos);
            }
        }
        if !trace_active {
            let coef = dir.trace();
            let slack = (trace_cap - cov.trace()).max(0.0);
            if coef > 1e-14 && slack / coef < hi {
                hi = slack / coef;
                hi_blocker = None;
                hi_trace = true;
            } else if coef < -1e-14 && -slack / coef > lo {
                lo = -slack / coef;
                lo_blocker = None;
                lo_trace = true;
            }
        }

        // prefer the side that lands on the PSD boundary (rank drops there)
        let take_hi = if hi.is_finite()
            && hi >= psd_hi - 1e-12 * (1.0 + psd_hi.abs())
            && psd_hi.is_finite()
        {
            true
        } else if lo.is_finite()
            && lo <= psd_lo + 1e-12 * (1.0 + psd_lo.abs())
            && psd_lo.is_finite()
        {
            false
        } else if hi.is_finite() {
            true
        } else if lo.is_finite() {
            false
        } else {
            return;
        };
        let step = if take_hi { hi } else { lo };
        if !step.is_finite() || step.abs() == 0.0 {
            return;
        }
        *cov = &basis * (DMatrix::from_diagonal(&face) + &dir * step) * basis.transpose();
        *cov = linalg::symmetrize(cov);
        if take_hi {
            if let Some(pos) = hi_blocker {
                active[pos] = true;
            }
            if hi_trace {
                trace_active = true;
            }
        } else {
            if let Some(pos) = lo_blocker {
                active[pos] = true;
            }
            if lo_trace {
                trace_active = true;
            }
        }
    }
}

/// A unit vector annihilated by every row, if one exists.
fn null_direction(rows: &[Vec<f64>], nvar: usize) -> Option<DVector<f64>> {
    let mut gram = DMatrix::zeros(nvar, nvar);
    let mut scale = 0.0_f64;
    for row in rows {
        let v = DVector::from_row_slice(row);
        scale = scale.max(v.norm_squared());
        gram += &v * v.transpose();
    }
    let (values, vectors) = linalg::sym_eig_desc(&gram);
    let smallest = values.last().copied().unwrap_or(0.0);
    if smallest > 1e-18 * scale.max(1.0) {
        return None;
    }
    Some(vectors.column(nvar - 1).into_owned())
}

// ---------------------------------------------------------------------------
// outer power split

#[derive(Debug, Clone)]
pub struct PowerSplitResult {
    /// Trace budget handed to the reduced program.
    pub trace_budget: f64,
    pub inner: SolveResult,
    /// Split objective: `(√inner + √(residual²·(P − trace_budget)))²`.
    pub value: f64,
}

fn reduced_qcqp(red: &ReducedProblem, trace_cap: f64) -> QcqpProblem {
    QcqpProblem {
        direct: red.direct.clone(),
        constraints: red
            .cross
            .iter()
            .zip(&red.budgets)
            .map(|(v, &cap)| QuadConstraint {
                vector: v.clone(),
                cap,
            })
            .collect(),
        trace_cap,
    }
}

/// Split the transmit power between the coupled subspace and the clean
/// residual direction. The split objective is unimodal in the trace budget
/// (the inner value function is concave), so a golden-section search over
/// `[0, P]` locates the optimum.
pub fn solve_power_split(red: &ReducedProblem) -> PowerSplitResult {
    let p = red.power;
    if red.residual_norm2 <= 0.0 {
        let inner = solve_reduced_sdp(&reduced_qcqp(red, p));
        let value = inner.value;
        return PowerSplitResult {
            trace_budget: p,
            inner,
            value,
        };
    }
    let objective = |pbar: f64| -> f64 {
        let inner = solve_reduced_sdp(&reduced_qcqp(red, pbar));
        let spare = red.residual_norm2 * (p - pbar).max(0.0);
        (inner.value.max(0.0).sqrt() + spare.sqrt()).powi(2)
    };

    let golden = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0_f64, p);
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    while b - a > SPLIT_TOL_REL * p {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = objective(d);
        }
    }
    let mut best = (a + b) / 2.0;
    let mut best_val = objective(best);
    for cand in [0.0, p] {
        let val = objective(cand);
        if val > best_val {
            best_val = val;
            best = cand;
        }
    }
    let inner = solve_reduced_sdp(&reduced_qcqp(red, best));
    PowerSplitResult {
        trace_budget: best,
        inner,
        value: best_val,
    }
}

// ---------------------------------------------------------------------------
// beamformer extraction

/// Dominant eigenpair of the reduced optimum, lifted to a full-dimension
/// beam. Re-purifies if the reduced covariance is not numerically rank-one.
pub fn extract_beamformer(
    res: &SolveResult,
    red: &ReducedProblem,
) -> Result<(Beamformer, CompletionCase)> {
    let reduced_beam = reduced_beam_of(res, red)?;
    let (weights, case) = lift_beamformer(red, &reduced_beam);
    Ok((
        Beamformer {
            user: red.user,
            weights,
        },
        case,
    ))
}

fn reduced_beam_of(res: &SolveResult, red: &ReducedProblem) -> Result<DVector<f64>> {
    if red.dim == 0 {
        return Ok(DVector::zeros(0));
    }
    let (values, vectors) = linalg::sym_eig_desc(&res.cov);
    let lead = values[0];
    if lead <= 1e-14 * (1.0 + res.cov.trace().abs()) {
        return Ok(DVector::zeros(red.dim)); // silent user
    }
    if values.len() > 1 && values[1] > RANK_RATIO_TOL * lead {
        // one more purification attempt before giving up
        let mut cov = res.cov.clone();
        let cons: Vec<PreparedConstraint> = red
            .cross
            .iter()
            .zip(&red.budgets)
            .enumerate()
            .filter(|(_, (v, &cap))| cap.is_finite() && cap > 0.0 && v.norm_squared() > 0.0)
            .map(|(i, (v, &cap))| PreparedConstraint {
                original: i,
                vector: v.clone(),
                cap,
            })
            .collect();
        purify_rank_one(&mut cov, &red.direct, &cons, res.cov.trace() + 1e-12);
        let (pvalues, pvectors) = linalg::sym_eig_desc(&cov);
        if pvalues.len() > 1 && pvalues[1] > RANK_RATIO_TOL * pvalues[0].max(f64::MIN_POSITIVE) {
            return Err(Error::PurificationFailed(format!(
                "eigenvalue ratio {:.3e} after face walk",
                pvalues[1] / pvalues[0]
            )));
        }
        return Ok(pvectors.column(0) * pvalues[0].max(0.0).sqrt());
    }
    Ok(vectors.column(0) * lead.sqrt())
}

// ---------------------------------------------------------------------------
// KKT certificate

#[derive(Debug, Clone)]
pub struct KktCertificate {
    /// Multiplier-weighted combination of the objective and constraint outer
    /// products, on the subspace where hard caps hold.
    pub c: DMatrix<f64>,
    /// Eigenvalues of `c`, ascending.
    pub eigenvalues: Vec<f64>,
    /// (positive, negative) eigenvalue counts of `c`.
    pub inertia: (usize, usize),
    /// `‖S·(C + λ_trace·I)‖_F`.
    pub stationarity_residual: f64,
    /// `|λ_j · (v_jᵀSv_j − cap_j)|` per constraint, then the trace term.
    pub complementarity_residuals: Vec<f64>,
    /// Smallest eigenvalue non-positive, second smallest non-negative.
    pub eta_ordering_ok: bool,
    /// `rank(C + λ_trace·I) ≥ dim − 1` whenever the trace multiplier is
    /// meaningfully positive.
    pub rank_condition_ok: bool,
    pub passed: bool,
}

impl KktCertificate {
    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }
}

/// First-order optimality check of a solve against its own multipliers.
///
/// Hard (zero-cap) constraints admit no finite multiplier; the certificate
/// works on the subspace orthogonal to them, where the remaining system is
/// regular.
pub fn certify_kkt(p: &QcqpProblem, res: &SolveResult) -> KktCertificate {
    let prep = preprocess(p);
    let np = prep.basis.ncols();
    let value = res.value;
    let residual_tol = KKT_RESIDUAL_REL * (1.0 + value.abs());
    let lam_trace = res.trace_multiplier();

    let mut c = -(&prep.direct * prep.direct.transpose());
    for con in &prep.cons {
        c += &con.vector * con.vector.transpose() * res.multipliers[con.original];
    }

    let (desc, _) = linalg::sym_eig_desc(&c);
    let mut eigenvalues = desc.clone();
    eigenvalues.reverse();
    let counted = inertia(&c).expect("c is symmetric by construction");

    let s_proj = prep.basis.transpose() * &res.cov * &prep.basis;
    let shifted = &c + DMatrix::identity(np, np) * lam_trace;
    let stationarity_residual = (&s_proj * &shifted).norm();

    let mut complementarity_residuals: Vec<f64> = p
        .constraints
        .iter()
        .zip(&res.multipliers)
        .map(|(con, &lam)| {
            if con.cap.is_finite() {
                (lam * (quad_form(&res.cov, &con.vector) - con.cap)).abs()
            } else {
                0.0
            }
        })
        .collect();
    complementarity_residuals.push((lam_trace * (res.cov.trace() - p.trace_cap)).abs());

    let eta_ordering_ok = match eigenvalues.as_slice() {
        [] => true,
        [first] => *first <= residual_tol,
        [first, second, ..] => *first <= residual_tol && *second >= -residual_tol,
    };
    let rank_condition_ok = if lam_trace > residual_tol {
        let scale = lam_trace + eigenvalues.iter().fold(0.0_f64, |a, &e| a.max(e.abs())) + 1.0;
        let rank = eigenvalues
            .iter()
            .filter(|&&e| (e + lam_trace).abs() > 1e-8 * scale)
            .count();
        rank + 1 >= np
    } else {
        true
    };

    let inertia_ok = counted.positive <= p.constraints.len() && counted.negative <= 1;
    let slack_ok = complementarity_residuals.iter().all(|&r| r <= residual_tol);
    let passed = inertia_ok && slack_ok && stationarity_residual <= residual_tol;

    KktCertificate {
        c,
        eigenvalues,
        inertia: (counted.positive, counted.negative),
        stationarity_residual,
        complementarity_residuals,
        eta_ordering_ok,
        rank_condition_ok,
        passed,
    }
}

// ---------------------------------------------------------------------------
// full per-user pipeline

#[derive(Debug, Clone)]
pub struct UserSolve {
    pub user: usize,
    pub beamformer: Beamformer,
    /// Realized direct-channel gain `(h_iiᵀb)²`.
    pub signal_power: f64,
    /// Realized interference power at each receiver (zero at `user`).
    pub interference: Vec<f64>,
    pub certificate: KktCertificate,
    pub split: PowerSplitResult,
    pub completion_case: CompletionCase,
    /// Set when rank-one purification failed and the beam is best-effort.
    pub purification_failed: bool,
}

impl UserSolve {
    /// Rate this user would see with no interference at its receiver.
    pub fn rate_single_user(&self) -> f64 {
        0.5 * (1.0 + self.signal_power).log2()
    }
}

/// Reduce, split power, solve, extract a beam, and certify — one user.
pub fn solve_user(
    net: &MisoNetwork,
    user: usize,
    budget: &InterferenceBudget,
) -> Result<UserSolve> {
    let red = reduce_user_problem(net, user, budget);
    let split = solve_power_split(&red);
    let problem = reduced_qcqp(&red, split.trace_budget);
    let mut certificate = certify_kkt(&problem, &split.inner);

    let (beamformer, completion_case, purification_failed) =
        match extract_beamformer(&split.inner, &red) {
            Ok((bf, case)) => (bf, case, false),
            Err(Error::PurificationFailed(_)) => {
                certificate.passed = false;
                let (values, vectors) = linalg::sym_eig_desc(&split.inner.cov);
                let lead = values.first().copied().unwrap_or(0.0).max(0.0);
                let beam = if red.dim == 0 {
                    DVector::zeros(0)
                } else {
                    vectors.column(0) * lead.sqrt()
                };
                let (weights, case) = lift_beamformer(&red, &beam);
                (Beamformer { user, weights }, case, true)
            }
            Err(other) => return Err(other),
        };

    let signal_power = net.direct(user).dot(&beamformer.weights).powi(2);
    let interference: Vec<f64> = (0..net.m())
        .map(|rx| {
            if rx == user {
                0.0
            } else {
                net.channel(user, rx).dot(&beamformer.weights).powi(2)
            }
        })
        .collect();

    Ok(UserSolve {
        user,
        beamformer,
        signal_power,
        interference,
        certificate,
        split,
        completion_case,
        purification_failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn con(v: &[f64], cap: f64) -> QuadConstraint {
        QuadConstraint {
            vector: DVector::from_row_slice(v),
            cap,
        }
    }

    fn hand_instance() -> QcqpProblem {
        QcqpProblem {
            direct: dvector![1.0, 1.0],
            constraints: vec![con(&[1.0, 0.0], 0.25)],
            trace_cap: 1.0,
        }
    }

    #[test]
    fn unconstrained_solve_is_full_power_alignment() {
        let p = QcqpProblem {
            direct: dvector![1.0, 0.0],
            constraints: vec![con(&[1.0, 1.0], f64::INFINITY)],
            trace_cap: 1.0,
        };
        let res = solve_reduced_sdp(&p);
        assert!((res.value - 1.0).abs() < 1e-12);
        assert!((&res.cov - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).amax() < 1e-12);
        assert_eq!(res.multipliers[0], 0.0);
        assert!((res.trace_multiplier() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_cap_on_the_objective_direction_kills_the_value() {
        let p = QcqpProblem {
            direct: dvector![1.0, 0.0],
            constraints: vec![con(&[1.0, 0.0], 0.0)],
            trace_cap: 1.0,
        };
        let res = solve_reduced_sdp(&p);
        assert!(res.value.abs() < 1e-14);
        assert!(res.cov.amax() < 1e-12);
    }

    #[test]
    fn hand_instance_value_and_optimizer() {
        // 1-D oracle: b = (b₁, √(1−b₁²)), maximize (b₁+b₂)² over b₁ ∈ [0, 0.5]
        let mut oracle_best = f64::NEG_INFINITY;
        for i in 0..=500_000 {
            let b1 = 0.5 * i as f64 / 500_000.0;
            let b2 = (1.0 - b1 * b1).sqrt();
            oracle_best = oracle_best.max((b1 + b2).powi(2));
        }
        let res = solve_reduced_sdp(&hand_instance());
        assert!((res.value - 1.866_025_403_784_438_6).abs() < 1e-8);
        assert!((res.value - oracle_best).abs() < 1e-8);
        assert!(res.duality_gap <= 1e-8 * (1.0 + res.value));
        assert!(res.eigen_ratio() <= 1e-8);

        let (values, vectors) = linalg::sym_eig_desc(&res.cov);
        let beam = vectors.column(0) * values[0].sqrt();
        assert!((beam[0] - 0.5).abs() < 1e-6);
        assert!((beam[1] - 0.866_025_4).abs() < 1e-6);
    }

    #[test]
    fn hand_instance_multipliers_and_certificate() {
        let p = hand_instance();
        let res = solve_reduced_sdp(&p);
        let lam1 = 2.0 / 3.0_f64.sqrt();
        let lam2 = (1.0 + 3.0_f64.sqrt()) / 3.0_f64.sqrt();
        assert!(
            (res.multipliers[0] - lam1).abs() < 1e-6,
            "λ₁ = {}",
            res.multipliers[0]
        );
        assert!(
            (res.trace_multiplier() - lam2).abs() < 1e-6,
            "λ₂ = {}",
            res.trace_multiplier()
        );

        let cert = certify_kkt(&p, &res);
        assert!(cert.passed);
        assert_eq!(cert.inertia, (1, 1));
        assert!(cert.eta_ordering_ok);
        assert!(cert.rank_condition_ok);
        let expected_c = DMatrix::from_row_slice(2, 2, &[lam1 - 1.0, -1.0, -1.0, -1.0]);
        assert!((&cert.c - &expected_c).amax() < 1e-5);
    }

    #[test]
    fn unconstrained_certificate_shape() {
        let p = QcqpProblem {
            direct: dvector![1.0, 0.0],
            constraints: vec![],
            trace_cap: 1.0,
        };
        let res = solve_reduced_sdp(&p);
        let cert = certify_kkt(&p, &res);
        assert!(cert.passed);
        assert_eq!(cert.inertia, (0, 1));
        assert!((&cert.c - DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn wrong_multipliers_fail_certification() {
        let p = hand_instance();
        let mut res = solve_reduced_sdp(&p);
        res.multipliers = vec![0.0, 0.0];
        let cert = certify_kkt(&p, &res);
        assert!(!cert.passed);
        assert!(cert.stationarity_residual > 1e-3);
    }

    #[test]
    fn degenerate_face_is_purified_to_rank_one() {
        // cap aligned with the objective, trace slack: the central path ends
        // at a rank-two point of the optimal face
        let p = QcqpProblem {
            direct: dvector![1.0, 0.0],
            constraints: vec![con(&[1.0, 0.0], 0.25)],
            trace_cap: 1.0,
        };
        let res = solve_reduced_sdp(&p);
        assert!((res.value - 0.25).abs() < 1e-8);
        assert!(res.eigen_ratio() <= 1e-8, "ratio {}", res.eigen_ratio());
        assert!(res.cov.trace() <= 1.0 + 1e-9);
        assert!(quad_form(&res.cov, &dvector![1.0, 0.0]) <= 0.25 + 1e-9);
    }

    #[test]
    fn value_is_monotone_in_caps_and_trace() {
        let base = hand_instance();
        let v0 = solve_reduced_sdp(&base).value;
        let mut looser = base.clone();
        looser.constraints[0].cap = 0.5;
        assert!(solve_reduced_sdp(&looser).value >= v0 - 1e-9);
        let mut more_power = base.clone();
        more_power.trace_cap = 2.0;
        assert!(solve_reduced_sdp(&more_power).value >= v0 - 1e-9);
    }

    fn red_dim1(cap: f64) -> ReducedProblem {
        ReducedProblem {
            user: 0,
            dim: 1,
            direct: dvector![1.0],
            residual: dvector![1.0],
            residual_norm2: 1.0,
            cross: vec![dvector![1.0]],
            budgets: vec![cap],
            receivers: vec![1],
            power: 1.0,
            basis: DMatrix::identity(2, 2),
        }
    }

    #[test]
    fn power_split_zero_forcing_sends_everything_clean() {
        let split = solve_power_split(&red_dim1(0.0));
        assert!(split.trace_budget < 1e-6);
        assert!((split.value - 1.0).abs() < 1e-7);
    }

    #[test]
    fn power_split_unconstrained_recovers_full_gain() {
        let split = solve_power_split(&red_dim1(f64::INFINITY));
        assert!((split.trace_budget - 0.5).abs() < 1e-6);
        assert!((split.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn power_split_without_residual_uses_all_power_inside() {
        let mut red = red_dim1(f64::INFINITY);
        red.residual = dvector![];
        red.residual_norm2 = 0.0;
        red.basis = DMatrix::identity(1, 1);
        let split = solve_power_split(&red);
        assert_eq!(split.trace_budget, 1.0);
        assert!((split.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn split_objective_is_unimodal_against_grid_scan() {
        let red = red_dim1(0.3);
        let split = solve_power_split(&red);
        let mut grid_best = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let pbar = i as f64 / 1000.0;
            let inner = solve_reduced_sdp(&reduced_qcqp(&red, pbar));
            let val =
                (inner.value.max(0.0).sqrt() + (red.residual_norm2 * (1.0 - pbar)).sqrt()).powi(2);
            grid_best = grid_best.max(val);
        }
        assert!((split.value - grid_best).abs() <= 1e-6 * (1.0 + grid_best));
        assert!(split.value >= grid_best - 1e-9);
    }

    #[test]
    fn golden_section_matches_grid_scan_on_random_instances() {
        for idx in 0..3 {
            let inst = crate::verify::random_tall_instance(99, idx);
            let user = inst.net.m() - 1;
            let red = reduce_user_problem(&inst.net, user, &inst.budget);
            let split = solve_power_split(&red);
            let mut grid_best = f64::NEG_INFINITY;
            for i in 0..=1000 {
                let pbar = red.power * i as f64 / 1000.0;
                let inner = solve_reduced_sdp(&reduced_qcqp(&red, pbar));
                let val = (inner.value.max(0.0).sqrt()
                    + (red.residual_norm2 * (red.power - pbar)).sqrt())
                .powi(2);
                grid_best = grid_best.max(val);
            }
            assert!(
                (split.value - grid_best).abs() <= 1e-6 * (1.0 + grid_best),
                "instance {idx}: golden {} vs grid {}",
                split.value,
                grid_best
            );
            assert!(
                split.value >= grid_best - 1e-9,
                "search never loses to the scan"
            );
        }
    }

    #[test]
    fn certificate_matrix_matches_weighted_gram_construction() {
        // C must equal H·diag(-1, λ₁, …)·Hᵀ for H = [h, h₁, …]; the inertia
        // bound then follows from the congruence-map property
        let p = hand_instance();
        let res = solve_reduced_sdp(&p);
        let cert = certify_kkt(&p, &res);
        let mut h = DMatrix::zeros(2, 2);
        h.set_column(0, &p.direct);
        h.set_column(1, &p.constraints[0].vector);
        let a = DMatrix::from_diagonal(&dvector![-1.0, res.multipliers[0]]);
        let rebuilt = &h * &a * h.transpose();
        assert!((&rebuilt - &cert.c).amax() < 1e-12);
        assert!(crate::oracle::check_inertia_bound(&h, &a).unwrap());
        let counted = crate::oracle::inertia(&rebuilt).unwrap();
        assert!(counted.positive <= p.constraints.len());
        assert!(counted.negative <= 1);
        assert_eq!((counted.positive, counted.negative), cert.inertia);
    }

    #[test]
    fn residual_direction_takes_full_power() {
        // whenever the interference-free residual is nonzero, the lifted
        // beam uses the entire budget
        for idx in 0..6 {
            let inst = crate::verify::random_tall_instance(7, idx);
            let user = inst.net.m() - 1;
            let solve = solve_user(&inst.net, user, &inst.budget).unwrap();
            let red = reduce_user_problem(&inst.net, user, &inst.budget);
            assert!(red.residual_norm2 > 0.0);
            assert!(
                (solve.beamformer.transmit_power() - inst.net.power(user)).abs()
                    <= 1e-9 * (1.0 + inst.net.power(user))
            );
        }
    }

    #[test]
    fn solve_user_respects_budgets_and_unconstrained_gain() {
        let mut rng = crate::oracle::stream(17, "solver-user-test");
        let net = crate::verify::random_network(&mut rng, 3..=3, 2..=4);
        let budget = crate::verify::random_budget(&mut rng, &net);
        for user in 0..net.m() {
            let solve = solve_user(&net, user, &budget).unwrap();
            for rx in 0..net.m() {
                if rx != user {
                    assert!(solve.interference[rx] <= budget.cap(user, rx) + 1e-9);
                }
            }
            assert!(solve.certificate.passed);
        }
        // all caps infinite: the signal power reaches P‖h‖² exactly
        let unconstrained = InterferenceBudget::unconstrained(net.m());
        for user in 0..net.m() {
            let solve = solve_user(&net, user, &unconstrained).unwrap();
            let ideal = net.power(user) * net.direct(user).norm_squared();
            assert!((solve.signal_power - ideal).abs() <= 1e-9 * (1.0 + ideal));
        }
    }

    #[test]
    fn zero_budgets_force_null_space_beamforming() {
        let mut rng = crate::oracle::stream(23, "solver-zf-test");
        let net = crate::verify::random_network(&mut rng, 2..=2, 3..=3);
        let budget = InterferenceBudget::all_zero(2);
        let solve = solve_user(&net, 0, &budget).unwrap();
        // closed form: all power on the direct channel's component
        // orthogonal to the cross channel
        let cross = net.channel(0, 1);
        let direct = net.direct(0);
        let proj = direct - cross * (cross.dot(direct) / cross.norm_squared());
        let expected = net.power(0) * proj.norm_squared();
        assert!((solve.signal_power - expected).abs() <= 1e-8 * (1.0 + expected));
        assert!(solve.interference[1] <= 1e-12);
        assert!(solve.certificate.passed);
    }

    #[test]
    fn extraction_identity_cases() {
        let red = red_dim1(f64::INFINITY);
        let res = SolveResult {
            cov: DMatrix::from_element(1, 1, 0.5),
            value: 0.5,
            multipliers: vec![0.0, 1.0],
            duality_gap: 0.0,
        };
        let (bf, case) = extract_beamformer(&res, &red).unwrap();
        assert_eq!(case, CompletionCase::Aligned);
        assert!(
            (bf.weights.norm_squared() - 1.0).abs() < 1e-12,
            "full power"
        );

        let silent = SolveResult::zero(1, 1);
        let (bf, case) = extract_beamformer(&silent, &red).unwrap();
        assert_eq!(case, CompletionCase::DegenerateX);
        assert!((bf.weights.norm_squared() - 1.0).abs() < 1e-12);
        assert!(bf.weights[0].abs() < 1e-12);
    }

    #[test]
    fn single_antenna_users_solve_cleanly() {
        let net = MisoNetwork::new(
            vec![1, 1],
            vec![2.0, 1.0],
            vec![
                vec![dvector![1.5], dvector![0.4]],
                vec![dvector![-0.7], dvector![1.1]],
            ],
        )
        .unwrap();
        let mut budget = InterferenceBudget::unconstrained(2);
        budget.set(0, 1, 0.1).unwrap();
        let solve = solve_user(&net, 0, &budget).unwrap();
        // scalar problem: power limited by the cap, 0.1 / 0.4² = 0.625
        let expected_power = (0.1 / 0.16_f64).min(2.0);
        assert!((solve.beamformer.transmit_power() - expected_power).abs() < 1e-9);
        assert!((solve.signal_power - expected_power * 2.25).abs() < 1e-9);
        assert!(solve.certificate.passed);
    }

    #[test]
    fn zero_direct_channel_means_silence() {
        let net = MisoNetwork::new(
            vec![2, 2],
            vec![1.0, 1.0],
            vec![
                vec![dvector![0.0, 0.0], dvector![1.0, 0.5]],
                vec![dvector![0.3, 0.3], dvector![1.0, 0.0]],
            ],
        )
        .unwrap();
        let solve = solve_user(&net, 0, &InterferenceBudget::unconstrained(2)).unwrap();
        assert_eq!(solve.signal_power, 0.0);
        assert!(solve.certificate.passed);
    }

    #[test]
    fn zero_cross_channel_is_a_vacuous_cap() {
        // a zero cross channel cannot leak, even under a zero cap
        let net = MisoNetwork::new(
            vec![2, 1],
            vec![1.0, 1.0],
            vec![
                vec![dvector![1.0, 1.0], dvector![0.0, 0.0]],
                vec![dvector![0.2], dvector![1.0]],
            ],
        )
        .unwrap();
        let mut budget = InterferenceBudget::unconstrained(2);
        budget.set(0, 1, 0.0).unwrap();
        let solve = solve_user(&net, 0, &budget).unwrap();
        let ideal = net.power(0) * net.direct(0).norm_squared();
        assert!((solve.signal_power - ideal).abs() <= 1e-9 * (1.0 + ideal));
        assert!(solve.certificate.passed);
    }
}

//! Randomized self-check suites.
//!
//! Each suite pits the solver path against an independent reference — a
//! brute-force sampler, a closed form, a full-dimension solve, or a matrix
//! identity — over seeded random instances and reports a failure count. The
//! CLI `verify` command and the acceptance tests drive the same code with
//! different trial budgets.

use crate::channel::{quad_form, InterferenceBudget, MisoNetwork};
use crate::completion::{complete_matrix, completion_bound, CompletionInput};
use crate::error::Result;
use crate::linalg;
use crate::oracle::{brute_force_user, check_inertia_bound, standard_normal, stream};
use crate::reduction::{lift_solution, reduce_user_problem};
use crate::solver::{
    solve_power_split, solve_reduced_sdp, solve_user, QcqpProblem, QuadConstraint,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteKind {
    RankOne,
    Completion,
    Reduction,
    Inertia,
    Sandwich,
    Monotonicity,
}

impl SuiteKind {
    pub const ALL: [SuiteKind; 6] = [
        SuiteKind::RankOne,
        SuiteKind::Completion,
        SuiteKind::Reduction,
        SuiteKind::Inertia,
        SuiteKind::Sandwich,
        SuiteKind::Monotonicity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SuiteKind::RankOne => "rank1",
            SuiteKind::Completion => "lemma2",
            SuiteKind::Reduction => "reduction",
            SuiteKind::Inertia => "inertia",
            SuiteKind::Sandwich => "sandwich",
            SuiteKind::Monotonicity => "monotonicity",
        }
    }

    pub fn parse(name: &str) -> Option<SuiteKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Trial count used when the caller does not override it.
    pub fn default_trials(&self) -> usize {
        match self {
            SuiteKind::RankOne => 200,
            SuiteKind::Completion => 10_000,
            SuiteKind::Reduction => 100,
            SuiteKind::Inertia => 500,
            SuiteKind::Sandwich => 200,
            SuiteKind::Monotonicity => 100,
        }
    }
}

/// Pass thresholds. The defaults are the contract; `impossible()` exists so a
/// deliberately broken run can be triggered from the CLI for testing.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rank_ratio: f64,
    pub sandwich_slack: f64,
    pub completion_attain_rel: f64,
    pub completion_beat_rel: f64,
    pub reduction_value_rel: f64,
    pub reduction_constraint_rel: f64,
    pub monotonicity_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_ratio: 1e-6,
            sandwich_slack: 1e-6,
            completion_attain_rel: 1e-10,
            completion_beat_rel: 1e-8,
            reduction_value_rel: 1e-7,
            reduction_constraint_rel: 1e-10,
            monotonicity_slack: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn impossible() -> Self {
        Self {
            rank_ratio: -1.0,
            sandwich_slack: -1.0,
            completion_attain_rel: -1.0,
            completion_beat_rel: -1.0,
            reduction_value_rel: -1.0,
            reduction_constraint_rel: -1.0,
            monotonicity_slack: -1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub trials: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    /// Sphere samples per brute-force evaluation in the sandwich suite.
    pub brute_samples: usize,
}

impl SuiteOptions {
    pub fn new(kind: SuiteKind, seed: u64) -> Self {
        Self {
            trials: kind.default_trials(),
            seed,
            tolerances: Tolerances::default(),
            brute_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub trials: usize,
    pub failures: usize,
    /// Worst observed margin, suite-specific (ratio, slack, ...).
    pub worst: f64,
    pub passed: bool,
}

/// A random interference network plus finite caps, the common test fixture.
pub struct RandomInstance {
    pub net: MisoNetwork,
    pub budget: InterferenceBudget,
}

fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    stream(
        seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        "instance",
    )
}

pub fn random_network(
    rng: &mut ChaCha8Rng,
    users: std::ops::RangeInclusive<usize>,
    antennas: std::ops::RangeInclusive<usize>,
) -> MisoNetwork {
    let m = rng.gen_range(users);
    let t: Vec<usize> = (0..m).map(|_| rng.gen_range(antennas.clone())).collect();
    let power: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..3.0)).collect();
    let channels = (0..m)
        .map(|j| {
            (0..m)
                .map(|_| DVector::from_iterator(t[j], (0..t[j]).map(|_| standard_normal(rng))))
                .collect()
        })
        .collect();
    MisoNetwork::new(t, power, channels).expect("random network is well-formed")
}

/// Finite caps drawn as a random fraction of the largest realizable
/// interference per pair.
pub fn random_budget(rng: &mut ChaCha8Rng, net: &MisoNetwork) -> InterferenceBudget {
    let m = net.m();
    let mut budget = InterferenceBudget::unconstrained(m);
    for tx in 0..m {
        for rx in 0..m {
            if tx != rx {
                let upper = net.power(tx) * net.channel(tx, rx).norm_squared();
                let cap = rng.gen_range(0.05..1.5) * upper;
                budget.set(tx, rx, cap).expect("valid cap");
            }
        }
    }
    budget
}

/// Standard random instance: `m ∈ {2,3,4}`, `t_i ∈ {2..6}`, normal channels,
/// finite caps.
pub fn random_instance(seed: u64, index: usize) -> RandomInstance {
    let mut rng = instance_rng(seed, index);
    let net = random_network(&mut rng, 2..=4, 2..=6);
    let budget = random_budget(&mut rng, &net);
    RandomInstance { net, budget }
}

/// Instance whose last user has more antennas than it has caps, so the
/// dimension reduction actually does work.
pub fn random_tall_instance(seed: u64, index: usize) -> RandomInstance {
    let mut rng = instance_rng(seed, index ^ 0x5851_F42D);
    let m = rng.gen_range(2..=4usize);
    let mut t: Vec<usize> = (0..m).map(|_| rng.gen_range(2..=6)).collect();
    t[m - 1] = rng.gen_range(m..=6).max(m); // strictly more than m − 1
    let power: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..3.0)).collect();
    let channels = (0..m)
        .map(|j| {
            (0..m)
                .map(|_| DVector::from_iterator(t[j], (0..t[j]).map(|_| standard_normal(&mut rng))))
                .collect()
        })
        .collect();
    let net = MisoNetwork::new(t, power, channels).expect("random network is well-formed");
    let budget = random_budget(&mut rng, &net);
    RandomInstance { net, budget }
}

pub fn run_suite(kind: SuiteKind, opts: &SuiteOptions) -> SuiteReport {
    let (failures, worst) = match kind {
        SuiteKind::RankOne => rank_one_suite(opts),
        SuiteKind::Completion => completion_suite(opts),
        SuiteKind::Reduction => reduction_suite(opts),
        SuiteKind::Inertia => inertia_suite(opts),
        SuiteKind::Sandwich => sandwich_suite(opts),
        SuiteKind::Monotonicity => monotonicity_suite(opts),
    };
    SuiteReport {
        name: kind.name(),
        trials: opts.trials,
        failures,
        worst,
        passed: failures == 0,
    }
}

pub fn run_all(opts_for: impl Fn(SuiteKind) -> SuiteOptions) -> Vec<SuiteReport> {
    SuiteKind::ALL
        .iter()
        .map(|&kind| run_suite(kind, &opts_for(kind)))
        .collect()
}

// ---------------------------------------------------------------------------

fn rank_one_suite(opts: &SuiteOptions) -> (usize, f64) {
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for idx in 0..opts.trials {
        let inst = random_instance(opts.seed, idx);
        for user in 0..inst.net.m() {
            match solve_user(&inst.net, user, &inst.budget) {
                Ok(solve) => {
                    let ratio = solve.split.inner.eigen_ratio();
                    worst = worst.max(ratio);
                    let inner = &solve.split.inner;
                    let gap_ok = inner.duality_gap <= 1e-8 * (1.0 + inner.value);
                    if ratio > opts.tolerances.rank_ratio || !solve.certificate.passed || !gap_ok {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    (failures, worst)
}

fn random_completion_input(rng: &mut ChaCha8Rng) -> CompletionInput {
    let t1 = rng.gen_range(1..=4usize);
    let t2 = rng.gen_range(0..=3usize);
    let rank = rng.gen_range(0..=t1);
    let mut k11 = DMatrix::zeros(t1, t1);
    for _ in 0..rank {
        let v = DVector::from_iterator(t1, (0..t1).map(|_| standard_normal(rng)));
        k11 += &v * v.transpose();
    }
    k11 = linalg::symmetrize(&k11);
    let trace = k11.trace();
    let cap = trace
        + if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(0.0..2.0)
        };
    let x = if rng.gen_bool(0.25) && rank < t1 {
        // exercise the degenerate dispatch: x orthogonal to the range of K11
        let (_, vectors) = linalg::sym_eig_desc(&k11);
        vectors.column(t1 - 1).into_owned()
    } else {
        DVector::from_iterator(t1, (0..t1).map(|_| standard_normal(rng)))
    };
    let y = if t2 == 0 || rng.gen_bool(0.15) {
        DVector::zeros(t2)
    } else {
        DVector::from_iterator(t2, (0..t2).map(|_| standard_normal(rng)))
    };
    CompletionInput::new(x, y, k11, cap)
}

/// A feasible completion with the given fixed block. Built as a Gram matrix
/// `[A G]ᵀ[A G]` plus a PSD tail with `AᵀA = K₁₁`, so it is PSD by
/// construction (every PSD completion of `K₁₁` has this shape); the spare
/// trace is split randomly between the coupling and the tail.
pub fn sample_feasible_completion(input: &CompletionInput, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let t1 = input.x.len();
    let t2 = input.y.len();
    let spare = (input.trace_cap - input.k11.trace()).max(0.0);
    let mut k = DMatrix::zeros(t1 + t2, t1 + t2);
    k.view_mut((0, 0), (t1, t1)).copy_from(&input.k11);
    if t2 == 0 {
        return k;
    }
    let a = crate::completion::psd_sqrt_factor(&input.k11).expect("K11 is PSD");
    let mut g = DMatrix::from_fn(t1, t2, |_, _| standard_normal(rng));
    let g_norm2 = g.norm_squared();
    let coupling_budget = rng.gen::<f64>() * spare;
    if g_norm2 > 0.0 {
        g *= (coupling_budget / g_norm2).sqrt();
    }
    let raw = DMatrix::from_fn(t2, t2, |_, _| standard_normal(rng));
    let mut tail = raw.transpose() * &raw;
    let tail_trace = tail.trace();
    if tail_trace > 0.0 {
        tail *= rng.gen::<f64>() * (spare - coupling_budget).max(0.0) / tail_trace;
    }
    let k21 = g.transpose() * &a;
    let k22 = g.transpose() * &g + tail;
    k.view_mut((t1, 0), (t2, t1)).copy_from(&k21);
    k.view_mut((0, t1), (t1, t2)).copy_from(&k21.transpose());
    k.view_mut((t1, t1), (t2, t2)).copy_from(&k22);
    k
}

fn numeric_rank(a: &DMatrix<f64>) -> usize {
    let (values, _) = linalg::sym_eig_desc(a);
    let lead = values.first().copied().unwrap_or(0.0).max(0.0);
    values
        .iter()
        .filter(|&&v| v > 1e-8 * lead.max(f64::MIN_POSITIVE))
        .count()
}

fn completion_suite(opts: &SuiteOptions) -> (usize, f64) {
    let mut rng = stream(opts.seed, "completion-suite");
    let tol = &opts.tolerances;
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for _ in 0..opts.trials {
        let input = random_completion_input(&mut rng);
        let bound = match completion_bound(&input) {
            Ok(b) => b,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let Ok(result) = complete_matrix(&input) else {
            failures += 1;
            continue;
        };
        let mut ok = true;
        // attainment is judged against the case-consistent bound the
        // construction targets; the unclamped formula stays the ceiling for
        // sampled completions
        let attain = (result.quadratic_form(&input) - result.bound).abs();
        worst = worst.max(attain / (1.0 + result.bound));
        ok &= attain <= tol.completion_attain_rel * (1.0 + result.bound);
        ok &= result.bound <= bound + 1e-12 * (1.0 + bound);
        ok &= linalg::min_eigenvalue(&result.k) >= -1e-10 * result.k.trace().max(1.0);
        ok &= result.k.trace() <= input.trace_cap + 1e-10;
        ok &= numeric_rank(&result.k) <= numeric_rank(&input.k11).max(1);
        for _ in 0..2 {
            let candidate = sample_feasible_completion(&input, &mut rng);
            let probe_form = {
                let mut probe = DVector::zeros(input.x.len() + input.y.len());
                probe.rows_mut(0, input.x.len()).copy_from(&input.x);
                probe
                    .rows_mut(input.x.len(), input.y.len())
                    .copy_from(&input.y);
                quad_form(&candidate, &probe)
            };
            ok &= probe_form <= bound + tol.completion_beat_rel * (1.0 + bound);
        }
        if !ok {
            failures += 1;
        }
    }
    (failures, worst)
}

fn reduction_suite(opts: &SuiteOptions) -> (usize, f64) {
    let tol = &opts.tolerances;
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for idx in 0..opts.trials {
        let inst = random_tall_instance(opts.seed, idx);
        let user = inst.net.m() - 1;
        let red = reduce_user_problem(&inst.net, user, &inst.budget);
        let split = solve_power_split(&red);

        // independent route: solve the uncompressed program directly
        let direct = solve_reduced_sdp(&QcqpProblem {
            direct: inst.net.direct(user).clone(),
            constraints: (0..inst.net.m())
                .filter(|&rx| rx != user)
                .map(|rx| QuadConstraint {
                    vector: inst.net.channel(user, rx).clone(),
                    cap: inst.budget.cap(user, rx),
                })
                .collect(),
            trace_cap: inst.net.power(user),
        });
        let gap = (split.value - direct.value).abs() / (1.0 + direct.value.abs());
        worst = worst.max(gap);
        let mut ok = gap <= tol.reduction_value_rel;

        // the lifted covariance must reproduce each cap value
        if let Ok(lifted) = lift_solution(&red, &split.inner.cov, split.inner.cov.trace()) {
            for (k, &rx) in red.receivers.iter().enumerate() {
                let reduced_val = quad_form(&split.inner.cov, &red.cross[k]);
                let lifted_val = quad_form(&lifted, inst.net.channel(user, rx));
                ok &= (reduced_val - lifted_val).abs()
                    <= tol.reduction_constraint_rel * (1.0 + reduced_val.abs());
            }
        } else {
            ok = false;
        }
        if !ok {
            failures += 1;
        }
    }
    (failures, worst)
}

fn inertia_suite(opts: &SuiteOptions) -> (usize, f64) {
    let mut rng = stream(opts.seed, "inertia-suite");
    let mut failures = 0;
    for _ in 0..opts.trials {
        let rows = rng.gen_range(1..=4usize);
        let cols = rng.gen_range(1..=6usize);
        let h = DMatrix::from_fn(rows, cols, |_, _| standard_normal(&mut rng));
        let raw = DMatrix::from_fn(cols, cols, |_, _| standard_normal(&mut rng));
        let a = linalg::symmetrize(&raw);
        match check_inertia_bound(&h, &a) {
            Ok(true) => {}
            _ => failures += 1,
        }
    }
    (failures, 0.0)
}

fn sandwich_suite(opts: &SuiteOptions) -> (usize, f64) {
    let tol = &opts.tolerances;
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for idx in 0..opts.trials {
        let inst = random_instance(opts.seed, idx);
        let user = inst.net.m() - 1;
        let Ok(solve) = solve_user(&inst.net, user, &inst.budget) else {
            failures += 1;
            continue;
        };
        let lower = brute_force_user(
            &inst.net,
            user,
            &inst.budget,
            opts.brute_samples,
            opts.seed ^ idx as u64,
        );
        let direct = solve_reduced_sdp(&QcqpProblem {
            direct: inst.net.direct(user).clone(),
            constraints: (0..inst.net.m())
                .filter(|&rx| rx != user)
                .map(|rx| QuadConstraint {
                    vector: inst.net.channel(user, rx).clone(),
                    cap: inst.budget.cap(user, rx),
                })
                .collect(),
            trace_cap: inst.net.power(user),
        });
        let upper = direct.value + direct.duality_gap;
        let low_slack = lower - solve.signal_power; // should be ≤ tol
        let high_slack = solve.signal_power - upper; // should be ≤ tol
        worst = worst.max(low_slack.max(high_slack));
        if low_slack > tol.sandwich_slack || high_slack > tol.sandwich_slack {
            failures += 1;
        }
    }
    (failures, worst)
}

fn monotonicity_suite(opts: &SuiteOptions) -> (usize, f64) {
    let mut rng = stream(opts.seed, "monotonicity-suite");
    let tol = &opts.tolerances;
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for _ in 0..opts.trials {
        let n = rng.gen_range(1..=4usize);
        let k = rng.gen_range(1..=3usize);
        let direct = DVector::from_iterator(n, (0..n).map(|_| standard_normal(&mut rng)));
        let constraints: Vec<QuadConstraint> = (0..k)
            .map(|_| QuadConstraint {
                vector: DVector::from_iterator(n, (0..n).map(|_| standard_normal(&mut rng))),
                cap: rng.gen_range(0.01..1.0),
            })
            .collect();
        let base = QcqpProblem {
            direct,
            constraints,
            trace_cap: rng.gen_range(0.5..2.0),
        };
        let v0 = solve_reduced_sdp(&base).value;
        let slack = tol.monotonicity_slack * (1.0 + v0);
        let mut ok = true;
        for j in 0..k {
            let mut looser = base.clone();
            looser.constraints[j].cap *= 1.5;
            let v = solve_reduced_sdp(&looser).value;
            worst = worst.max(v0 - v);
            ok &= v >= v0 - slack;
        }
        let mut more_power = base.clone();
        more_power.trace_cap *= 1.5;
        let v = solve_reduced_sdp(&more_power).value;
        worst = worst.max(v0 - v);
        ok &= v >= v0 - slack;
        if !ok {
            failures += 1;
        }
    }
    (failures, worst)
}

/// Sanity wrapper used by the CLI: run the requested suites and collect
/// reports.
pub fn run_selected(
    suites: &[SuiteKind],
    trials: Option<usize>,
    seed: u64,
    tolerances: Tolerances,
) -> Result<Vec<SuiteReport>> {
    Ok(suites
        .iter()
        .map(|&kind| {
            let mut opts = SuiteOptions::new(kind, seed);
            opts.tolerances = tolerances;
            if let Some(t) = trials {
                opts.trials = t;
            }
            run_suite(kind, &opts)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for kind in SuiteKind::ALL {
            let mut opts = SuiteOptions::new(kind, 2024);
            opts.trials = match kind {
                SuiteKind::Completion => 200,
                SuiteKind::Inertia => 100,
                _ => 8,
            };
            opts.brute_samples = 2_000;
            let report = run_suite(kind, &opts);
            assert!(report.passed, "{} failed: {:?}", report.name, report);
        }
    }

    #[test]
    fn impossible_tolerances_fail() {
        let mut opts = SuiteOptions::new(SuiteKind::RankOne, 2024);
        opts.trials = 3;
        opts.tolerances = Tolerances::impossible();
        let report = run_suite(SuiteKind::RankOne, &opts);
        assert!(!report.passed);
    }

    #[test]
    fn suite_names_round_trip() {
        for kind in SuiteKind::ALL {
            assert_eq!(SuiteKind::parse(kind.name()), Some(kind));
        }
        assert_eq!(SuiteKind::parse("nope"), None);
    }
}

//! Rate-region tracing.
//!
//! Sweeping the interference caps decouples the network: each transmitter's
//! subproblem depends only on its own cap row, so a sweep solves each user's
//! row grid once and then assembles full rate points from cached signal and
//! leakage powers. Rates always use the realized interference, which is never
//! above the cap, so every emitted point is achievable by construction. The
//! assembled cloud is Pareto-filtered in deterministic grid order.

use crate::channel::{Beamformer, InterferenceBudget, MisoNetwork, RatePoint};
use crate::error::{Error, Result};
use crate::solver::solve_user;
use nalgebra::DMatrix;
use std::collections::HashMap;

/// Per-pair cap samples: `{0} ∪ G log-spaced in [10⁻³·U, U] ∪ {∞}` with
/// `U = P_tx‖h_tx,rx‖²`, the largest interference the pair can realize.
#[derive(Debug, Clone)]
pub struct RegionGrid {
    m: usize,
    samples: Vec<Vec<Vec<f64>>>,
}

impl RegionGrid {
    pub fn log_spaced(net: &MisoNetwork, g: usize) -> Self {
        assert!(g >= 2, "grid size must be at least 2");
        let m = net.m();
        let mut samples = vec![vec![Vec::new(); m]; m];
        for (tx, row) in samples.iter_mut().enumerate() {
            for (rx, slot) in row.iter_mut().enumerate() {
                if tx == rx {
                    continue;
                }
                let upper = net.power(tx) * net.channel(tx, rx).norm_squared();
                *slot = Self::pair_samples(upper, g);
            }
        }
        Self { m, samples }
    }

    fn pair_samples(upper: f64, g: usize) -> Vec<f64> {
        let mut out = vec![0.0];
        if upper > 0.0 {
            let lo = (1e-3 * upper).ln();
            let hi = upper.ln();
            for i in 0..g {
                let frac = if g == 1 {
                    1.0
                } else {
                    i as f64 / (g - 1) as f64
                };
                out.push((lo + frac * (hi - lo)).exp());
            }
        }
        out.push(f64::INFINITY);
        out.dedup();
        out
    }

    /// Explicit sample lists (sorted, deduplicated). Entries for `tx == rx`
    /// are ignored.
    pub fn from_samples(m: usize, mut samples: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if samples.len() != m || samples.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidInput(
                "grid sample table must be m x m".into(),
            ));
        }
        for (tx, row) in samples.iter_mut().enumerate() {
            for (rx, list) in row.iter_mut().enumerate() {
                if tx == rx {
                    continue;
                }
                if list.is_empty() || list.iter().any(|&v| v.is_nan() || v < 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "invalid cap samples for pair ({}, {})",
                        tx + 1,
                        rx + 1
                    )));
                }
                list.sort_by(|a, b| a.total_cmp(b));
                list.dedup();
            }
        }
        Ok(Self { m, samples })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn samples(&self, tx: usize, rx: usize) -> &[f64] {
        &self.samples[tx][rx]
    }
}

#[derive(Debug, Clone)]
pub struct TraceOptions {
    /// Worker cap for the row solves; 0 means one per available core.
    pub threads: usize,
    /// Cap-tuple sample budget when the full product grid is infeasible
    /// (more than three users).
    pub sample_budget: usize,
    pub seed: u64,
    /// Trace with this user forced silent (zero power, zero interference).
    pub silenced: Option<usize>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            threads: 0,
            sample_budget: 1024,
            seed: 0,
            silenced: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub rates: RatePoint,
    pub beamformers: Vec<Beamformer>,
    /// Realized interference: entry `(i, j)` is transmitter `i`'s leakage at
    /// receiver `j`.
    pub realized: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct ParetoSet {
    pub points: Vec<ParetoPoint>,
}

/// Solution of one cap row for one user, cached during sweeps.
#[derive(Debug, Clone)]
struct RowSolve {
    beam: Beamformer,
    signal: f64,
    interference: Vec<f64>,
}

fn silent_row(net: &MisoNetwork, user: usize) -> RowSolve {
    RowSolve {
        beam: Beamformer::silent(user, net.antennas(user)),
        signal: 0.0,
        interference: vec![0.0; net.m()],
    }
}

fn solve_row(net: &MisoNetwork, user: usize, caps: &[(usize, f64)]) -> Result<RowSolve> {
    let mut budget = InterferenceBudget::unconstrained(net.m());
    for &(rx, cap) in caps {
        budget.set(user, rx, cap)?;
    }
    let solve = solve_user(net, user, &budget)?;
    Ok(RowSolve {
        beam: solve.beamformer.clone(),
        signal: solve.signal_power,
        interference: solve.interference.clone(),
    })
}

/// Run `f` over the items with at most `threads` workers, preserving order.
fn ordered_parallel<T, U, F>(items: &[T], threads: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync,
{
    let workers = if threads == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        threads
    }
    .min(items.len().max(1));
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let mut out: Vec<Option<U>> = Vec::with_capacity(items.len());
    out.resize_with(items.len(), || None);
    std::thread::scope(|scope| {
        for (inputs, outputs) in items.chunks(chunk).zip(out.chunks_mut(chunk)) {
            scope.spawn(|| {
                for (x, slot) in inputs.iter().zip(outputs.iter_mut()) {
                    *slot = Some(f(x));
                }
            });
        }
    });
    out.into_iter()
        .map(|x| x.expect("worker filled every slot"))
        .collect()
}

/// All cap rows of one user, in lexicographic sample order.
fn enumerate_rows(grid: &RegionGrid, user: usize, receivers: &[usize]) -> Vec<Vec<(usize, f64)>> {
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    for &rx in receivers {
        let mut next = Vec::with_capacity(rows.len() * grid.samples(user, rx).len());
        for row in &rows {
            for &cap in grid.samples(user, rx) {
                let mut extended = row.clone();
                extended.push((rx, cap));
                next.push(extended);
            }
        }
        rows = next;
    }
    rows
}

/// Trace the achievable-rate frontier over the cap grid.
pub fn trace_region(
    net: &MisoNetwork,
    grid: &RegionGrid,
    opts: &TraceOptions,
) -> Result<ParetoSet> {
    let m = net.m();
    if grid.m() != m {
        return Err(Error::DimensionMismatch(format!(
            "grid is for {} users, network has {}",
            grid.m(),
            m
        )));
    }
    if let Some(f) = opts.silenced {
        if f >= m {
            return Err(Error::InvalidInput(format!(
                "silenced user {} out of range",
                f + 1
            )));
        }
    }
    let active: Vec<usize> = (0..m).filter(|&i| Some(i) != opts.silenced).collect();

    // per-user cap rows; the receiver set excludes the silenced user, whose
    // rate is pinned at zero anyway
    let mut user_rows: Vec<Vec<Vec<(usize, f64)>>> = vec![Vec::new(); m];
    for &i in &active {
        let receivers: Vec<usize> = active.iter().copied().filter(|&rx| rx != i).collect();
        user_rows[i] = enumerate_rows(grid, i, &receivers);
    }

    // solve every row of every active user once
    let mut solves: Vec<Vec<RowSolve>> = vec![Vec::new(); m];
    for &i in &active {
        let rows = &user_rows[i];
        let solved: Vec<Result<RowSolve>> =
            ordered_parallel(rows, opts.threads, |caps| solve_row(net, i, caps));
        let mut unwrapped = Vec::with_capacity(solved.len());
        for s in solved {
            unwrapped.push(s?);
        }
        solves[i] = unwrapped;
    }
    if let Some(f) = opts.silenced {
        solves[f] = vec![silent_row(net, f)];
    }

    let combos = combo_indices(net, &solves, opts);
    let mut all_rates: Vec<Vec<f64>> = Vec::with_capacity(combos.len());
    for combo in &combos {
        let mut rates = vec![0.0; m];
        for i in 0..m {
            let own = &solves[i][combo[i]];
            let mut noise = 1.0;
            for j in 0..m {
                if j != i {
                    noise += solves[j][combo[j]].interference[i];
                }
            }
            rates[i] = 0.5 * (1.0 + own.signal / noise).log2();
        }
        all_rates.push(rates);
    }

    // Dominance implies a strictly larger rate sum, so scanning in
    // descending-sum order means kept points are never displaced; dominance
    // checks only look at the frontier built so far.
    let mut order: Vec<usize> = (0..all_rates.len()).collect();
    order.sort_by(|&i, &j| {
        let si: f64 = all_rates[i].iter().sum();
        let sj: f64 = all_rates[j].iter().sum();
        sj.total_cmp(&si).then(i.cmp(&j))
    });
    let mut kept: Vec<usize> = Vec::new();
    for idx in order {
        let rates = &all_rates[idx];
        let redundant = kept
            .iter()
            .any(|&k| dominates(&all_rates[k], rates) || all_rates[k] == *rates);
        if !redundant {
            kept.push(idx);
        }
    }
    // deterministic output: restore grid enumeration order
    kept.sort_unstable();

    let points = kept
        .into_iter()
        .map(|idx| {
            let rates = all_rates[idx].clone();
            let combo = &combos[idx];
            let mut realized = DMatrix::zeros(m, m);
            let mut beamformers = Vec::with_capacity(m);
            for i in 0..m {
                let row = &solves[i][combo[i]];
                beamformers.push(row.beam.clone());
                for j in 0..m {
                    if j != i {
                        realized[(i, j)] = row.interference[j];
                    }
                }
            }
            ParetoPoint {
                rates: RatePoint { rates },
                beamformers,
                realized,
            }
        })
        .collect();
    Ok(ParetoSet { points })
}

/// Cap-row index tuples to evaluate: the full product for up to three users,
/// a low-discrepancy sample of the product otherwise.
fn combo_indices(
    net: &MisoNetwork,
    solves: &[Vec<RowSolve>],
    opts: &TraceOptions,
) -> Vec<Vec<usize>> {
    let m = net.m();
    let sizes: Vec<usize> = solves.iter().map(|rows| rows.len().max(1)).collect();
    let total: usize = sizes.iter().product();
    if m <= 3 || total <= opts.sample_budget {
        let mut combos = Vec::with_capacity(total);
        let mut current = vec![0usize; m];
        loop {
            combos.push(current.clone());
            let mut pos = m;
            loop {
                if pos == 0 {
                    return combos;
                }
                pos -= 1;
                current[pos] += 1;
                if current[pos] < sizes[pos] {
                    break;
                }
                current[pos] = 0;
            }
        }
    }
    // Halton sampling of the index hypercube, offset by the seed
    let offset = (opts.seed % 65_536) as usize + 1;
    let mut combos = Vec::with_capacity(opts.sample_budget);
    let mut seen = HashMap::new();
    for n in 0..opts.sample_budget {
        let combo: Vec<usize> = (0..m)
            .map(|d| {
                let u = radical_inverse(PRIMES[d % PRIMES.len()], offset + n);
                ((u * sizes[d] as f64) as usize).min(sizes[d] - 1)
            })
            .collect();
        if seen.insert(combo.clone(), ()).is_none() {
            combos.push(combo);
        }
    }
    combos
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(base: usize, mut n: usize) -> f64 {
    let mut inv = 0.0;
    let mut denom = 1.0;
    while n > 0 {
        denom *= base as f64;
        inv += (n % base) as f64 / denom;
        n /= base;
    }
    inv
}

/// `a` dominates `b`: no coordinate worse, at least one strictly better.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (&x, &y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

/// Drop dominated points (and duplicate rate tuples), keeping stable order.
pub fn pareto_filter<T, K>(items: Vec<T>, key: K) -> Vec<T>
where
    K: Fn(&T) -> &[f64],
{
    let mut kept: Vec<T> = Vec::new();
    for item in items {
        let rates = key(&item).to_vec();
        if kept
            .iter()
            .any(|k| dominates(key(k), &rates) || key(k) == rates.as_slice())
        {
            continue;
        }
        kept.retain(|k| !dominates(&rates, key(k)));
        kept.push(item);
    }
    kept
}

/// Non-negative weights, not all zero.
#[derive(Debug, Clone)]
pub struct WeightVector {
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| w.is_nan() || w < 0.0) || weights.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidInput(
                "weights must be ≥ 0 and not all zero".into(),
            ));
        }
        Ok(Self { weights })
    }
}

/// The stored point maximizing the weighted rate sum; ties break toward the
/// lexicographically larger rate tuple.
pub fn weighted_boundary<'a>(set: &'a ParetoSet, w: &WeightVector) -> Result<&'a ParetoPoint> {
    let mut best: Option<&ParetoPoint> = None;
    for point in &set.points {
        if w.weights.len() != point.rates.rates.len() {
            return Err(Error::DimensionMismatch(
                "weight count != user count".into(),
            ));
        }
        let better = match best {
            None => true,
            Some(cur) => {
                let a = point.rates.weighted_sum(&w.weights);
                let b = cur.rates.weighted_sum(&w.weights);
                a > b || (a == b && point.rates.rates > cur.rates.rates)
            }
        };
        if better {
            best = Some(point);
        }
    }
    best.ok_or(Error::EmptySet)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionMode {
    /// Re-trace with the fixed user silent.
    Inactive,
    /// Keep points where the fixed user is within 0.1% of its best rate.
    AtMax,
    /// Keep points in a band around the given rate level.
    Level(f64),
}

#[derive(Debug, Clone)]
pub struct Projection {
    /// The two plotted users (ascending index).
    pub users: (usize, usize),
    /// `(R_a, R_b)` pairs, Pareto-filtered, ascending in the first column.
    pub pairs: Vec<[f64; 2]>,
    pub warning: Option<String>,
}

const AT_MAX_REL: f64 = 1e-3;

/// Project the traced region onto the plane of the two leading non-fixed
/// users. A two-user set is returned unchanged.
pub fn project_2d(
    net: &MisoNetwork,
    grid: &RegionGrid,
    set: &ParetoSet,
    fixed: usize,
    mode: ProjectionMode,
    opts: &TraceOptions,
) -> Result<Projection> {
    let m = net.m();
    if m == 2 {
        let mut pairs: Vec<[f64; 2]> = set
            .points
            .iter()
            .map(|p| [p.rates.rates[0], p.rates.rates[1]])
            .collect();
        pairs.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        return Ok(Projection {
            users: (0, 1),
            pairs,
            warning: None,
        });
    }
    if fixed >= m {
        return Err(Error::InvalidInput(format!(
            "fixed user {} out of range",
            fixed + 1
        )));
    }
    let others: Vec<usize> = (0..m).filter(|&i| i != fixed).collect();
    let (a, b) = (others[0], others[1]);

    let selected: Vec<[f64; 2]> = match mode {
        ProjectionMode::Inactive => {
            let mut sub_opts = opts.clone();
            sub_opts.silenced = Some(fixed);
            let sub = trace_region(net, grid, &sub_opts)?;
            sub.points
                .iter()
                .map(|p| [p.rates.rates[a], p.rates.rates[b]])
                .collect()
        }
        ProjectionMode::AtMax => {
            let rmax = set
                .points
                .iter()
                .map(|p| p.rates.rates[fixed])
                .fold(f64::NEG_INFINITY, f64::max);
            set.points
                .iter()
                .filter(|p| p.rates.rates[fixed] >= (1.0 - AT_MAX_REL) * rmax)
                .map(|p| [p.rates.rates[a], p.rates.rates[b]])
                .collect()
        }
        ProjectionMode::Level(level) => {
            let half_width = local_half_spacing(set, fixed, level);
            set.points
                .iter()
                .filter(|p| (p.rates.rates[fixed] - level).abs() <= half_width)
                .map(|p| [p.rates.rates[a], p.rates.rates[b]])
                .collect()
        }
    };

    let warning = if selected.is_empty() {
        Some(format!(
            "projection for user {} selected no points",
            fixed + 1
        ))
    } else {
        None
    };
    let mut pairs = pareto_filter(selected, |p: &[f64; 2]| p.as_slice());
    pairs.sort_by(|x, y| x[0].total_cmp(&y[0]).then(x[1].total_cmp(&y[1])));
    Ok(Projection {
        users: (a, b),
        pairs,
        warning,
    })
}

/// Half the gap between the fixed user's rate samples bracketing `level`;
/// finite grids never hit a level exactly.
fn local_half_spacing(set: &ParetoSet, fixed: usize, level: f64) -> f64 {
    let mut values: Vec<f64> = set.points.iter().map(|p| p.rates.rates[fixed]).collect();
    values.sort_by(|a, b| a.total_cmp(b));
    values.dedup();
    if values.len() < 2 {
        return f64::INFINITY;
    }
    let above = values.iter().find(|&&v| v >= level);
    let below = values.iter().rev().find(|&&v| v <= level);
    match (below, above) {
        (Some(&lo), Some(&hi)) if hi > lo => (hi - lo) / 2.0,
        _ => {
            // outside the sampled range: fall back to the edge spacing
            let n = values.len();
            if level < values[0] {
                (values[1] - values[0]) / 2.0
            } else {
                (values[n - 1] - values[n - 2]) / 2.0
            }
        }
    }
}

/// Worst shortfall of the traced frontier against a cloud of achievable rate
/// tuples: how far (per coordinate, in bits) some tuple escapes every traced
/// point. Zero means the frontier dominates the whole cloud.
pub fn frontier_violation(set: &ParetoSet, cloud: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0_f64;
    for rates in cloud {
        let mut best = f64::INFINITY;
        for point in &set.points {
            let mut shortfall = 0.0_f64;
            for (r, p) in rates.iter().zip(&point.rates.rates) {
                shortfall = shortfall.max(r - p);
            }
            best = best.min(shortfall);
            if best <= 0.0 {
                break;
            }
        }
        worst = worst.max(best.max(0.0));
    }
    worst
}

/// Region CSV: rates, flattened beamformers, then realized interference for
/// every ordered pair, 17 significant digits per value.
pub fn region_csv(net: &MisoNetwork, set: &ParetoSet) -> String {
    let m = net.m();
    let mut header: Vec<String> = (1..=m).map(|i| format!("R_{i}")).collect();
    for i in 1..=m {
        for k in 1..=net.antennas(i - 1) {
            header.push(format!("b_{i}_{k}"));
        }
    }
    for i in 1..=m {
        for j in 1..=m {
            if i != j {
                header.push(format!("zr_{i}_{j}"));
            }
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for point in &set.points {
        let mut fields: Vec<String> = point.rates.rates.iter().map(|&r| fmt17(r)).collect();
        for bf in &point.beamformers {
            fields.extend(bf.weights.iter().map(|&w| fmt17(w)));
        }
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    fields.push(fmt17(point.realized[(i, j)]));
                }
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn projection_csv(proj: &Projection) -> String {
    let mut out = format!("R_{},R_{}\n", proj.users.0 + 1, proj.users.1 + 1);
    for pair in &proj.pairs {
        out.push_str(&format!("{},{}\n", fmt17(pair[0]), fmt17(pair[1])));
    }
    out
}

/// 17 significant digits: enough for an exact f64 round trip.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

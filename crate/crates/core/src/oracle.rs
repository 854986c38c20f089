//! Independent randomized verification machinery.
//!
//! Nothing here shares code with the solver path: the brute-force search
//! samples beams directly, the covariance sampler builds Gram matrices, and
//! the inertia checks go through a plain eigendecomposition. These are the
//! reference answers the solver is tested against.

use crate::channel::{Beamformer, CovarianceSet, InterferenceBudget, MisoNetwork};
use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigenvalues with `|η| ≤ 1e-10·‖A‖` count as zero.
pub const INERTIA_ZERO_TOL: f64 = 1e-10;

/// Reproducible generator: one independent stream per (seed, operation) pair.
pub fn stream(seed: u64, tag: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a64(tag));
    rng
}

fn fnv1a64(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Box-Muller; two uniforms per normal keeps the stream layout obvious.
pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        if u > f64::MIN_POSITIVE {
            return (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos();
        }
    }
}

pub fn random_unit_vector<R: Rng>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(dim, (0..dim).map(|_| standard_normal(rng)));
        let norm = v.norm();
        if norm > 1e-9 {
            return v / norm;
        }
    }
}

/// Lower bound for the per-user program by sampling beam directions on the
/// sphere and scaling each to the largest feasible power.
pub fn brute_force_user(
    net: &MisoNetwork,
    user: usize,
    budget: &InterferenceBudget,
    samples: usize,
    seed: u64,
) -> f64 {
    assert!(samples >= 1);
    let mut rng = stream(seed, "brute-force-user");
    let t = net.antennas(user);
    let caps: Vec<(usize, f64)> = (0..net.m())
        .filter(|&rx| rx != user)
        .map(|rx| (rx, budget.cap(user, rx)))
        .collect();
    // A zero cap only admits directions exactly orthogonal to its channel;
    // random directions hit those with probability zero, so project the
    // samples onto that subspace up front (Gram-Schmidt over the zero-cap
    // channels).
    let mut forbidden: Vec<DVector<f64>> = Vec::new();
    for &(rx, cap) in &caps {
        if cap <= 0.0 && cap.is_finite() {
            let mut w = net.channel(user, rx).clone();
            for d in &forbidden {
                let c = d.dot(&w);
                w -= d * c;
            }
            if w.norm() > 1e-12 * net.channel(user, rx).norm() {
                let norm = w.norm();
                forbidden.push(w / norm);
            }
        }
    }
    let mut best = 0.0_f64;
    for _ in 0..samples {
        let mut u = random_unit_vector(&mut rng, t);
        for d in &forbidden {
            let c = d.dot(&u);
            u -= d * c;
        }
        let norm = u.norm();
        if norm < 1e-9 {
            continue;
        }
        u /= norm;
        let mut power = net.power(user);
        for &(rx, cap) in &caps {
            if cap.is_finite() && cap > 0.0 {
                let leak = net.channel(user, rx).dot(&u).powi(2);
                if leak > 0.0 {
                    power = power.min(cap / leak);
                }
            }
        }
        let gain = net.direct(user).dot(&u).powi(2);
        best = best.max(power * gain);
    }
    best
}

/// One random PSD covariance per user, scaled to a uniformly drawn fraction
/// of the power budget. Deterministic per seed.
pub fn random_feasible_covariances(net: &MisoNetwork, seed: u64) -> CovarianceSet {
    let mut rng = stream(seed, "random-covariances");
    let matrices = (0..net.m())
        .map(|i| {
            let t = net.antennas(i);
            let a = DMatrix::from_fn(t, t, |_, _| standard_normal(&mut rng));
            let mut s = a.transpose() * &a;
            let fraction: f64 = rng.gen();
            let trace = s.trace();
            if trace > 0.0 {
                s *= fraction * net.power(i) / trace;
            }
            linalg::symmetrize(&s)
        })
        .collect();
    CovarianceSet { matrices }
}

/// A random full-power beam pair scaled to a uniformly drawn power fraction;
/// used to probe achievable rate points.
pub fn random_feasible_beamformers(net: &MisoNetwork, rng: &mut ChaCha8Rng) -> Vec<Beamformer> {
    (0..net.m())
        .map(|i| {
            let u = random_unit_vector(rng, net.antennas(i));
            let fraction: f64 = rng.gen();
            Beamformer {
                user: i,
                weights: u * (fraction * net.power(i)).sqrt(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InertiaCount {
    pub positive: usize,
    pub negative: usize,
}

/// Signature of a symmetric matrix with the documented zero threshold.
pub fn inertia(a: &DMatrix<f64>) -> Result<InertiaCount> {
    if !linalg::is_symmetric(a, 1e-9) {
        return Err(Error::NotSymmetric);
    }
    let (values, _) = linalg::sym_eig_desc(a);
    let scale = values.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    let tol = INERTIA_ZERO_TOL * scale;
    let positive = values.iter().filter(|&&v| v > tol).count();
    let negative = values.iter().filter(|&&v| v < -tol).count();
    Ok(InertiaCount { positive, negative })
}

/// Congruence-like maps cannot create inertia: both counts of `H A Hᵀ` are
/// bounded by those of `A`.
pub fn check_inertia_bound(h: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<bool> {
    if h.ncols() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "H is {}x{}, A is {}x{}",
            h.nrows(),
            h.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    let inner = inertia(a)?;
    let mapped = linalg::symmetrize(&(h * a * h.transpose()));
    let outer = inertia(&mapped)?;
    Ok(outer.positive <= inner.positive && outer.negative <= inner.negative)
}

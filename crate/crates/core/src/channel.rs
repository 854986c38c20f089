//! Channel model for the m-user MISO interference channel.
//!
//! Transmitter `j` carries `t_j` antennas and a power budget; receiver `i` has
//! a single antenna and unit-variance noise. The real channel vector from
//! transmitter `j` to receiver `i` has dimension `t_j`. Rates are reported in
//! bits per real channel use (base-2 logarithm of `1 + SINR`, halved).

use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Slack allowed on power/trace caps before they count as violated.
pub const POWER_TOL: f64 = 1e-10;
/// A covariance counts as PSD while `λ_min ≥ -PSD_TOL · trace`.
pub const PSD_TOL: f64 = 1e-10;

/// Static description of an m-user MISO interference channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MisoNetwork {
    antennas: Vec<usize>,
    power: Vec<f64>,
    /// `channels[j][i]` is the vector from transmitter `j` to receiver `i`.
    channels: Vec<Vec<DVector<f64>>>,
}

/// On-disk JSON schema: `{"m", "t", "P", "H"}` where `H[j]` is the
/// `t_j × m` matrix, stored row-major, whose column `i` is the channel from
/// transmitter `j` to receiver `i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub m: usize,
    pub t: Vec<usize>,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    CountMismatch {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    NonPositiveAntennas {
        user: usize,
    },
    NonPositivePower {
        user: usize,
        value: f64,
    },
    DimensionMismatch {
        tx: usize,
        rx: usize,
        expected: usize,
        got: usize,
    },
    NonFiniteEntry {
        tx: usize,
        rx: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CountMismatch {
                field,
                expected,
                got,
            } => {
                write!(
                    f,
                    "count mismatch: {field} has {got} entries, expected {expected}"
                )
            }
            Violation::NonPositiveAntennas { user } => {
                write!(f, "non-positive antenna count for user {}", user + 1)
            }
            Violation::NonPositivePower { user, value } => {
                write!(f, "non-positive power {value} for user {}", user + 1)
            }
            Violation::DimensionMismatch {
                tx,
                rx,
                expected,
                got,
            } => write!(
                f,
                "dimension mismatch: channel {}->{} has {got} entries, expected {expected}",
                tx + 1,
                rx + 1
            ),
            Violation::NonFiniteEntry { tx, rx } => {
                write!(f, "non-finite entry in channel {}->{}", tx + 1, rx + 1)
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl MisoNetwork {
    /// Build without validation; pair with [`validate_network`].
    pub fn from_parts(
        antennas: Vec<usize>,
        power: Vec<f64>,
        channels: Vec<Vec<DVector<f64>>>,
    ) -> Self {
        Self {
            antennas,
            power,
            channels,
        }
    }

    /// Build and reject invalid descriptions.
    pub fn new(
        antennas: Vec<usize>,
        power: Vec<f64>,
        channels: Vec<Vec<DVector<f64>>>,
    ) -> Result<Self> {
        let net = Self::from_parts(antennas, power, channels);
        let report = validate_network(&net);
        if report.is_ok() {
            Ok(net)
        } else {
            let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidInput(msgs.join("; ")))
        }
    }

    pub fn from_file(file: &NetworkFile) -> Result<Self> {
        if file.t.len() != file.m || file.p.len() != file.m || file.h.len() != file.m {
            return Err(Error::InvalidInput(format!(
                "expected {} entries in each of t, P, H",
                file.m
            )));
        }
        let mut channels = Vec::with_capacity(file.m);
        for (j, rows) in file.h.iter().enumerate() {
            let tj = file.t[j];
            if rows.len() != tj || rows.iter().any(|r| r.len() != file.m) {
                return Err(Error::InvalidInput(format!(
                    "H[{}] must be a {} x {} matrix",
                    j + 1,
                    tj,
                    file.m
                )));
            }
            let mut from_j = Vec::with_capacity(file.m);
            for i in 0..file.m {
                from_j.push(DVector::from_iterator(tj, rows.iter().map(|r| r[i])));
            }
            channels.push(from_j);
        }
        Self::new(file.t.clone(), file.p.clone(), channels)
    }

    pub fn to_file(&self) -> NetworkFile {
        let m = self.m();
        let h = (0..m)
            .map(|j| {
                (0..self.antennas[j])
                    .map(|row| (0..m).map(|i| self.channels[j][i][row]).collect())
                    .collect()
            })
            .collect();
        NetworkFile {
            m,
            t: self.antennas.clone(),
            p: self.power.clone(),
            h,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn m(&self) -> usize {
        self.power.len()
    }

    pub fn antennas(&self, user: usize) -> usize {
        self.antennas[user]
    }

    pub fn power(&self, user: usize) -> f64 {
        self.power[user]
    }

    /// Channel vector from transmitter `tx` to receiver `rx`.
    pub fn channel(&self, tx: usize, rx: usize) -> &DVector<f64> {
        &self.channels[tx][rx]
    }

    pub fn direct(&self, user: usize) -> &DVector<f64> {
        self.channel(user, user)
    }

    /// Interference-free rate cap `½·log₂(1 + P_i‖h_ii‖²)`.
    pub fn single_user_rate_bound(&self, user: usize) -> f64 {
        0.5 * (1.0 + self.power[user] * self.direct(user).norm_squared()).log2()
    }

    /// Network with `user` deleted (its transmitter and its receiver).
    pub fn without_user(&self, user: usize) -> MisoNetwork {
        let keep: Vec<usize> = (0..self.m()).filter(|&i| i != user).collect();
        MisoNetwork {
            antennas: keep.iter().map(|&j| self.antennas[j]).collect(),
            power: keep.iter().map(|&j| self.power[j]).collect(),
            channels: keep
                .iter()
                .map(|&j| keep.iter().map(|&i| self.channels[j][i].clone()).collect())
                .collect(),
        }
    }
}

/// Report-style validation: collects all violations instead of failing fast.
pub fn validate_network(net: &MisoNetwork) -> ValidationReport {
    let mut violations = Vec::new();
    let m = net.m();
    if net.antennas.len() != m {
        violations.push(Violation::CountMismatch {
            field: "t",
            expected: m,
            got: net.antennas.len(),
        });
        return ValidationReport { violations };
    }
    if net.channels.len() != m {
        violations.push(Violation::CountMismatch {
            field: "H",
            expected: m,
            got: net.channels.len(),
        });
        return ValidationReport { violations };
    }
    for i in 0..m {
        if net.antennas[i] == 0 {
            violations.push(Violation::NonPositiveAntennas { user: i });
        }
        let power_ok = net.power[i] > 0.0 && net.power[i].is_finite();
        if !power_ok {
            violations.push(Violation::NonPositivePower {
                user: i,
                value: net.power[i],
            });
        }
    }
    for j in 0..m {
        if net.channels[j].len() != m {
            violations.push(Violation::CountMismatch {
                field: "H[j]",
                expected: m,
                got: net.channels[j].len(),
            });
            continue;
        }
        for i in 0..m {
            let h = &net.channels[j][i];
            if h.len() != net.antennas[j] {
                violations.push(Violation::DimensionMismatch {
                    tx: j,
                    rx: i,
                    expected: net.antennas[j],
                    got: h.len(),
                });
            }
            if h.iter().any(|x| !x.is_finite()) {
                violations.push(Violation::NonFiniteEntry { tx: j, rx: i });
            }
        }
    }
    ValidationReport { violations }
}

/// One transmit covariance per user.
#[derive(Debug, Clone)]
pub struct CovarianceSet {
    pub matrices: Vec<DMatrix<f64>>,
}

impl CovarianceSet {
    pub fn zero(net: &MisoNetwork) -> Self {
        Self {
            matrices: (0..net.m())
                .map(|i| DMatrix::zeros(net.antennas(i), net.antennas(i)))
                .collect(),
        }
    }

    pub fn from_beamformers(net: &MisoNetwork, beams: &[Beamformer]) -> Result<Self> {
        if beams.len() != net.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} beamformers for {} users",
                beams.len(),
                net.m()
            )));
        }
        let mut matrices = Vec::with_capacity(beams.len());
        for bf in beams {
            matrices.push(beamformer_to_covariance(net, bf)?);
        }
        Ok(Self { matrices })
    }

    /// Check symmetry, the PSD tolerance, and the per-user trace caps.
    pub fn validate(&self, net: &MisoNetwork) -> Result<()> {
        if self.matrices.len() != net.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariances for {} users",
                self.matrices.len(),
                net.m()
            )));
        }
        for (i, s) in self.matrices.iter().enumerate() {
            let t = net.antennas(i);
            if s.nrows() != t || s.ncols() != t {
                return Err(Error::DimensionMismatch(format!(
                    "covariance {} is {}x{}, expected {}x{}",
                    i + 1,
                    s.nrows(),
                    s.ncols(),
                    t,
                    t
                )));
            }
            if !linalg::is_symmetric(s, 1e-10) {
                return Err(Error::NotSymmetric);
            }
            let trace = s.trace();
            if linalg::min_eigenvalue(s) < -PSD_TOL * trace.max(1.0) {
                return Err(Error::NotPsd(format!("covariance {}", i + 1)));
            }
            if trace > net.power(i) + POWER_TOL {
                return Err(Error::TraceExceedsBudget {
                    trace,
                    budget: net.power(i),
                });
            }
        }
        Ok(())
    }
}

/// Rank-one transmit strategy: send one scalar stream along `weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub user: usize,
    pub weights: DVector<f64>,
}

impl Beamformer {
    pub fn silent(user: usize, antennas: usize) -> Self {
        Self {
            user,
            weights: DVector::zeros(antennas),
        }
    }

    pub fn transmit_power(&self) -> f64 {
        self.weights.norm_squared()
    }
}

/// Outer product `b bᵀ`, rejecting beams that exceed the user's power budget.
pub fn beamformer_to_covariance(net: &MisoNetwork, bf: &Beamformer) -> Result<DMatrix<f64>> {
    let t = net.antennas(bf.user);
    if bf.weights.len() != t {
        return Err(Error::DimensionMismatch(format!(
            "beamformer for user {} has {} entries, expected {}",
            bf.user + 1,
            bf.weights.len(),
            t
        )));
    }
    let p = bf.transmit_power();
    if p > net.power(bf.user) + POWER_TOL {
        return Err(Error::PowerViolation(format!(
            "‖b‖² = {p} > P = {}",
            net.power(bf.user)
        )));
    }
    Ok(&bf.weights * bf.weights.transpose())
}

/// Jointly achieved rates, bits per real channel use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub rates: Vec<f64>,
}

impl RatePoint {
    pub fn weighted_sum(&self, weights: &[f64]) -> f64 {
        self.rates.iter().zip(weights).map(|(r, w)| r * w).sum()
    }
}

/// `R_i = ½·log₂(1 + h_iiᵀS_ih_ii / (1 + Σ_{j≠i} h_jiᵀS_jh_ji))`.
pub fn rate_vector(net: &MisoNetwork, cov: &CovarianceSet) -> Result<RatePoint> {
    cov.validate(net)?;
    let m = net.m();
    let mut rates = Vec::with_capacity(m);
    for i in 0..m {
        let signal = quad_form(&cov.matrices[i], net.channel(i, i));
        let mut noise = 1.0;
        for j in 0..m {
            if j != i {
                noise += quad_form(&cov.matrices[j], net.channel(j, i)).max(0.0);
            }
        }
        rates.push(0.5 * (1.0 + signal.max(0.0) / noise).log2());
    }
    Ok(RatePoint { rates })
}

/// Matrix of realized interference powers: entry `(i, j)`, `i ≠ j`, is the
/// power transmitter `i` leaks at receiver `j`. The diagonal is zero.
pub fn interference_map(net: &MisoNetwork, cov: &CovarianceSet) -> Result<DMatrix<f64>> {
    cov.validate(net)?;
    let m = net.m();
    let mut map = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                map[(i, j)] = quad_form(&cov.matrices[i], net.channel(i, j)).max(0.0);
            }
        }
    }
    Ok(map)
}

pub(crate) fn quad_form(s: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * s * v)[(0, 0)]
}

/// Caps on the interference power each transmitter may create at each
/// unintended receiver. `f64::INFINITY` means unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceBudget {
    caps: DMatrix<f64>,
}

impl InterferenceBudget {
    pub fn unconstrained(m: usize) -> Self {
        Self {
            caps: DMatrix::from_element(m, m, f64::INFINITY),
        }
    }

    pub fn all_zero(m: usize) -> Self {
        let mut caps = DMatrix::zeros(m, m);
        caps.fill_diagonal(f64::INFINITY);
        Self { caps }
    }

    pub fn m(&self) -> usize {
        self.caps.nrows()
    }

    /// Cap on the interference power from transmitter `tx` at receiver `rx`.
    pub fn cap(&self, tx: usize, rx: usize) -> f64 {
        debug_assert_ne!(tx, rx);
        self.caps[(tx, rx)]
    }

    pub fn set(&mut self, tx: usize, rx: usize, value: f64) -> Result<()> {
        if tx == rx || tx >= self.m() || rx >= self.m() {
            return Err(Error::InvalidInput(format!(
                "budget index ({}, {}) out of range",
                tx + 1,
                rx + 1
            )));
        }
        if value.is_nan() || value < 0.0 {
            return Err(Error::InvalidInput(format!("budget {value} must be ≥ 0")));
        }
        self.caps[(tx, rx)] = value;
        Ok(())
    }

    /// Caps for transmitter `tx` toward the other receivers, ascending by
    /// receiver index (length `m − 1`).
    pub fn row(&self, tx: usize) -> Vec<f64> {
        (0..self.m())
            .filter(|&rx| rx != tx)
            .map(|rx| self.caps[(tx, rx)])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_user_orthogonal() -> MisoNetwork {
        // h_11=(1,0), h_22=(0,1), h_12=(0,1), h_21=(1,0): each direct beam is
        // orthogonal to its own cross channel
        MisoNetwork::new(
            vec![2, 2],
            vec![1.0, 1.0],
            vec![
                vec![
                    DVector::from_row_slice(&[1.0, 0.0]),
                    DVector::from_row_slice(&[0.0, 1.0]),
                ],
                vec![
                    DVector::from_row_slice(&[1.0, 0.0]),
                    DVector::from_row_slice(&[0.0, 1.0]),
                ],
            ],
        )
        .unwrap()
    }

    fn beams(net: &MisoNetwork, b1: &[f64], b2: &[f64]) -> CovarianceSet {
        CovarianceSet::from_beamformers(
            net,
            &[
                Beamformer {
                    user: 0,
                    weights: DVector::from_row_slice(b1),
                },
                Beamformer {
                    user: 1,
                    weights: DVector::from_row_slice(b2),
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn orthogonal_beams_reach_half_bit() {
        let net = two_user_orthogonal();
        let cov = beams(&net, &[1.0, 0.0], &[0.0, 1.0]);
        let rp = rate_vector(&net, &cov).unwrap();
        assert!((rp.rates[0] - 0.5).abs() < 1e-12);
        assert!((rp.rates[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interfering_beam_reduces_rate() {
        let net = two_user_orthogonal();
        // b_2 aligned with its cross channel toward receiver 1: R_1 = ½log2(1.5).
        let cov = beams(&net, &[1.0, 0.0], &[1.0, 0.0]);
        let rp = rate_vector(&net, &cov).unwrap();
        assert!((rp.rates[0] - 0.5 * 1.5_f64.log2()).abs() < 1e-12);
        assert!((rp.rates[0] - 0.29248).abs() < 5e-6);
    }

    #[test]
    fn zero_covariances_give_zero_rates() {
        let net = two_user_orthogonal();
        let rp = rate_vector(&net, &CovarianceSet::zero(&net)).unwrap();
        assert!(rp.rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn outer_product_matches_by_hand() {
        let net = two_user_orthogonal();
        let bf = Beamformer {
            user: 0,
            weights: DVector::from_row_slice(&[1.0, 0.0]),
        };
        let s = beamformer_to_covariance(&net, &bf).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let bf = Beamformer {
            user: 0,
            weights: DVector::from_row_slice(&[0.5, 0.8660]),
        };
        let s = beamformer_to_covariance(&net, &bf).unwrap();
        // independent elementwise multiply
        for i in 0..2 {
            for j in 0..2 {
                assert!((s[(i, j)] - bf.weights[i] * bf.weights[j]).abs() < 1e-15);
            }
        }
        assert!((s[(0, 1)] - 0.4330).abs() < 1e-12);
        assert!((s[(1, 1)] - 0.749956).abs() < 1e-12);

        let bf = Beamformer::silent(0, 2);
        let s = beamformer_to_covariance(&net, &bf).unwrap();
        assert_eq!(s, DMatrix::zeros(2, 2));
    }

    #[test]
    fn beamformer_power_is_enforced() {
        let net = two_user_orthogonal();
        let bf = Beamformer {
            user: 0,
            weights: DVector::from_row_slice(&[1.0, 0.5]),
        };
        assert!(matches!(
            beamformer_to_covariance(&net, &bf),
            Err(Error::PowerViolation(_))
        ));
    }

    #[test]
    fn interference_map_cases() {
        let net = two_user_orthogonal();
        let zero = interference_map(&net, &CovarianceSet::zero(&net)).unwrap();
        assert_eq!(zero.amax(), 0.0);

        // b_1 ⊥ h_12 → no leakage at receiver 2
        let cov = beams(&net, &[1.0, 0.0], &[0.0, 1.0]);
        let map = interference_map(&net, &cov).unwrap();
        assert!(map[(0, 1)].abs() < 1e-15);

        // b_1 aligned with h_12 at full power → P_1‖h_12‖²
        let cov = beams(&net, &[0.0, 1.0], &[0.0, 1.0]);
        let map = interference_map(&net, &cov).unwrap();
        assert!((map[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_flags_bad_networks() {
        let mut net = two_user_orthogonal();
        assert!(validate_network(&net).is_ok());

        net.channels[0][1] = DVector::from_row_slice(&[1.0]);
        let report = validate_network(&net);
        assert!(report
            .violations
            .iter()
            .any(|v| v.to_string().contains("dimension mismatch")));

        let mut net = two_user_orthogonal();
        net.power[1] = 0.0;
        let report = validate_network(&net);
        assert!(report
            .violations
            .iter()
            .any(|v| v.to_string().contains("non-positive power")));
    }

    #[test]
    fn network_json_round_trip() {
        let net = two_user_orthogonal();
        let text = serde_json::to_string(&net.to_file()).unwrap();
        let back = MisoNetwork::from_json(&text).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn budget_row_skips_self() {
        let mut budget = InterferenceBudget::unconstrained(3);
        budget.set(1, 0, 0.25).unwrap();
        budget.set(1, 2, 0.5).unwrap();
        assert_eq!(budget.row(1), vec![0.25, 0.5]);
        assert!(budget.set(1, 1, 0.1).is_err());
        assert!(budget.set(0, 1, -1.0).is_err());
    }
}

//! Achievable rate regions of real-valued MISO Gaussian interference channels
//! when every receiver treats interference as noise.
//!
//! The library solves, per transmitter, a small convex covariance program with
//! quadratic interference caps, extracts a rank-one (beamforming) solution,
//! certifies first-order optimality, and sweeps the caps to trace the Pareto
//! boundary of the jointly achievable rate tuples.

pub mod channel;
pub mod completion;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod reduction;
pub mod region;
pub mod solver;
pub mod verify;

pub use channel::{Beamformer, CovarianceSet, InterferenceBudget, MisoNetwork, RatePoint};
pub use error::{Error, Result};
pub use region::{ParetoSet, RegionGrid, WeightVector};
pub use solver::{KktCertificate, QcqpProblem, SolveResult, UserSolve};

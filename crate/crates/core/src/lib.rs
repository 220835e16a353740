//! Transform non-absentminded imperfect-recall games into equivalent A-loss
//! recall games, and solve one-player games exactly.

pub mod format;
pub mod generators;
pub mod model;
pub mod polynomials;
pub mod rational;
pub mod seqsets;
pub mod shuffle;
pub mod solver;
pub mod span;
pub mod transform;

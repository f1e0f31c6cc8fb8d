//! Final label prediction by agglomerative clustering and scoring against
//! ground truth.

mod accuracy;
mod ahc;
mod hungarian;

pub use accuracy::{accuracy, AccReport};
pub use ahc::{ahc, AhcConfig, Linkage};
pub use hungarian::min_cost_assignment;

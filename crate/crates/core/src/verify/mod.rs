//! Numerical checks of the semiclassical predictions against lattice data.

mod distance;
pub mod gap;
pub mod inclusion;
pub mod ldos;
pub mod localize;
mod refine;
mod scenario;

pub use distance::{distance_transform, distance_transform_grid, DistanceField};
pub use gap::{check_gap_discreteness, GapReport, GapRung, ProbeSample};
pub use inclusion::{check_spectrum_inclusion, InclusionReport, InclusionRung};
pub use ldos::{
    check_gap_ldos, check_ldos_leading, check_offdiag_decay, GapLdosReport, LdosPoint, LdosReport, LdosRung,
    OffdiagReport,
};
pub use localize::{check_localization, LocalizationReport, LocalizationRung};
pub use refine::{gauge_eigen_deviation, rayleigh_quotient, refined_eigenvalues};
pub use scenario::{doubled_domain, GridRule, Rung, Scenario};

use serde::Serialize;

use crate::fit::LineFit;

/// A log-log fit of one observable along an `ħ` ladder.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub name: String,
    pub hbar_ladder: Vec<f64>,
    pub observable_name: String,
    pub observable: Vec<f64>,
    /// Fit of `log10 observable` against `log10 ħ`; the slope is the exponent.
    pub fit: LineFit,
    pub exponent: f64,
    pub contract: String,
    pub pass: bool,
}

impl ScalingReport {
    pub fn new(
        name: &str,
        hbar_ladder: Vec<f64>,
        observable_name: &str,
        observable: Vec<f64>,
        fit: LineFit,
        contract: String,
        pass: bool,
    ) -> Self {
        Self {
            name: name.into(),
            hbar_ladder,
            observable_name: observable_name.into(),
            observable,
            exponent: fit.slope,
            fit,
            contract,
            pass,
        }
    }
}

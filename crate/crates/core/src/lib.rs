//! Discrete Gaussian free field on planar lattice domains: exact potential
//! theory, seeded samplers, intermediate level sets and the multiplicative
//! chaos measures they converge to.

pub mod chaos;
pub mod domain;
pub mod error;
pub mod finite;
pub mod io;
pub mod levelset;
pub mod linalg;
pub mod potential;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod verify;

pub use chaos::{
    chaos_step, dyadic_martingale, lqg_compare, psi, scaling_check, ChaosMeasure, DyadicHierarchy,
    MartingaleRunner, PsiWeight,
};
pub use domain::{discretize, ContinuumDomain, DyadicSquare, LatticeDomain, PixelGrid, Site};
pub use error::{Error, Result};
pub use finite::{ClusterPrediction, SiteVariances};
pub use levelset::{extract, k_norm, measure_integrate, point_measure, CenteringSchedule, LevelSet, PointMeasure};
pub use potential::{
    binding_covariance, green, harmonic_extension, harmonic_measure, potential_kernel, GreenOperator,
    HarmonicMeasureRow, LogIntegralMethod, PotentialKernelTable,
};
pub use rng::RngSpec;
pub use sampler::{
    sample_binding_field, sample_box_spectral, sample_dense, sample_gibbs_markov, Field, SamplerKind,
};
pub use stats::{
    cluster_report, factorization_check, fit_overshoot, intensity_ratio, two_sample_ks, ClusterReport,
    FactorizationReport, IntensityReport, KsResult, OvershootFit,
};

/// Variance constant of the lattice Green function, `g = 2/pi`.
pub const G: f64 = std::f64::consts::FRAC_2_PI;

/// `alpha = 2/sqrt(g) = sqrt(2 pi)`.
pub const ALPHA: f64 = 2.506_628_274_631_000_5;

/// Library version recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_matches_definition() {
        assert!((ALPHA - 2.0 / G.sqrt()).abs() < 1e-15);
        assert!((ALPHA - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }
}

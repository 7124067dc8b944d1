//! Bivariate copulas, concordance and dependence functionals, and the
//! L^p measures of non-exchangeability μ_p.
//!
//! The crate is organised bottom-up:
//!
//! - [`copula`]: families (Π, M, W, M_θ, Clayton), transpose, symmetrization
//!   and convex mixtures, with axiom checks.
//! - [`quadrature`]: midpoint-rule integration, supremum search and
//!   one-sided limits on the unit square.
//! - [`measures`]: ρ, τ, β, σ, μ_p, λ_L and λ_U, with closed forms where known.
//! - [`sampling`]: seeded samplers for every analytic family.
//! - [`empirical`]: pseudo-observations, the empirical copula, plug-in
//!   estimates and bootstrap intervals.
//! - [`pool`]: seeded random copulas used by property checks.
//!
//! ```
//! use copula_core::{full_report, make_mtheta, McConfig, MThetaParams, PExponent, QuadratureConfig};
//!
//! let c = make_mtheta(MThetaParams::new(0.2)?);
//! let p = [PExponent::Finite(1.0), PExponent::Infinity];
//! let report = full_report(&c, &p, &QuadratureConfig::default(), McConfig::default());
//! let tau = report.tau.ok().expect("closed form");
//! assert!((tau.value - 0.36).abs() < 1e-12);
//! # Ok::<(), copula_core::CopulaError>(())
//! ```

pub mod copula;
pub mod empirical;
pub mod error;
pub mod measures;
pub mod pool;
pub mod quadrature;
pub mod sampling;

pub use copula::{
    check_axioms, make_clayton, make_grid, make_m, make_mtheta, make_pi, make_w, mixture,
    symmetrize, transpose, ClaytonParams, ClosedForms, Copula, Family, GridCopula, MThetaParams,
    SupportSegment, UnitPoint,
};
pub use empirical::{
    bootstrap, empirical_copula, estimate_report, parse_csv, pseudo_observations, BootstrapSummary,
    Functional, SampleKind, SampleSet,
};
pub use error::{CopulaError, Result};
pub use measures::{
    blomqvist_beta, full_report, kendall_tau, mu, schweizer_wolff_sigma, spearman_rho,
    tail_coefficients, Estimate, McConfig, MeasureReport, Method, MuEstimate, PExponent,
};
pub use quadrature::QuadratureConfig;
pub use sampling::{sample, RngSeed, Sampler};

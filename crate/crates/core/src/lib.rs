//! Robust covariance ellipsoids for phase-space measurement clouds, their
//! symplectic spectra and capacities, and the uncertainty criteria
//! `Σ + iΩ ⪰ 0` built on them.
//!
//! Coordinates are always ordered `(x₁,…,xₙ,p₁,…,pₙ)`.

pub mod dynamics;
pub mod error;
pub mod ingest;
pub mod mve;
pub mod numerics;
pub mod phase_space;
pub mod spectrum;
pub mod uncertainty;

pub use dynamics::{flow_map, invariance_experiment, propagate, ExperimentRow, FlowMap, QuadraticHamiltonian};
pub use error::{Error, Result};
pub use ingest::{load_cloud, parse_csv, parse_json};
pub use mve::{
    brute_force_mve, coverage_count, cov_matrix, mahalanobis_sq, mve_estimate, EllipsoidEstimate, MveConfig,
    SubsetBudget,
};
pub use numerics::{chi2_cdf, chi2_quantile, eig_herm_min, eig_sym, is_psd, sqrtm_psd, HermMatrix, SymMatrix, Tolerances};
pub use phase_space::{
    build_form, darboux_factor, eval_form, standard_j, PhaseVector, PointCloud, SymplecticFormSpec, Units,
};
pub use spectrum::{
    capacity, normal_form_ellipsoid, omega_spectrum, sigma_spectrum, spectrum_monotonic_check, williamson, Ellipsoid,
    FormRef, FormTag, NormalMode, SymplecticSpectrum, WilliamsonDecomposition,
};
pub use uncertainty::{
    analyze, analyze_covariance, capacity_criterion, hermitian_condition, pair_inequalities, sigma_plus_i_omega,
    CapacityCriterion, PairInequality, PairKind, UncertaintyReport,
};

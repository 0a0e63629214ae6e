//! Stationary states of the discrete nonlinear Stark-Wannier equation.
//!
//! The crate follows one solution from the decoupled lattice to the
//! continuum: [`anticontinuous`] enumerates finite-mode solutions and the
//! bifurcation cascade, [`lattice`] continues them to nonzero hopping,
//! [`semiclassical`] derives the lattice coefficients from a periodic
//! potential, and [`continuum`] assembles and checks the full stationary state.

pub mod anticontinuous;
pub mod continuum;
pub mod error;
pub mod lattice;
pub mod params;
pub mod partitions;
pub mod semiclassical;
pub mod tridiag;

pub use anticontinuous::{
    amplitudes, bifurcation_thresholds, diagram_data, energy_exact, energy_of,
    enumerate_solution_sets, positive_solution, sign_variants, DiagramRow, ExactEnergy,
    FiniteModeSolution, SolutionSet, Threshold,
};
pub use error::{Error, Result};
pub use params::{is_integer_ratio, tilt_xi, ModelParams, TiltKind, TiltProfile};
pub use partitions::{
    count_solution_sets, counting_asymptotics, distinct_partition_table, q_distinct_partitions,
    CountingAsymptotics,
};
pub use continuum::{
    assemble_psi, continuum_residual, end_to_end, fixed_point_perp, ladder_translation_check,
    lipschitz_constant, r4_diagnostic, solve_continuum, ContinuumSolution, EndToEnd,
    FixedPointOptions, LadderCheck, PerpSolution, R4Report,
};
pub use lattice::{
    branch_sweep_nu, continue_in_beta, continue_normalized, dnlswe_residual, jacobian,
    newton_solve, stability_diagnostic, BranchRow, BranchStatus, ContinuationStep,
    LatticeSolution, NewtonOptions, NormalizedSolution, StabilityReport,
};
pub use semiclassical::{
    agmon_action, band_edges, build_basis, effective_parameters, hopping_scaling_report,
    scaling_point, single_well_state, solve_bands, BandData, BandEdges, ContinuumModel,
    EffectiveParameters, LocalizedBasis, Numerics, ScalingPoint, ScalingReport, StarkShape,
};

//! Two-field finite element solver for quasi-static Biot poroelasticity
//! with the fixed-stress splitting scheme, tools to choose its
//! stabilization parameter, and an experiment harness.

pub mod biot;
pub mod error;
pub mod fem;
pub mod harness;
pub mod linsolve;
pub mod mandel;
pub mod mesh;
pub mod sparse;
pub mod tuning;

pub use biot::{
    run_time_stepping, run_time_stepping_with, BiotProblem, BiotSystem, Coefficients,
    DiscreteState, Discretization, DisplacementBc, FixedStressConfig, FixedStressSolver, Method,
    MonolithicSolver, RunOptions, RunReport, Stabilization, StepReport,
};
pub use error::{FslError, Result};
pub use fem::{DirichletSet, FunctionSpace, ScalarField, SpaceKind, VectorField};
pub use harness::{ExperimentConfig, SweepResult, SweepRow, TestCase};
pub use mandel::{MandelParameters, MandelSetup, MandelSolution};
pub use mesh::{BoundaryTag, DomainKind, Mesh};
pub use tuning::{optimal_delta, optimal_l, theoretical_rate, RateModel};

//! Finite element spaces, quadrature, assembly and essential boundary
//! conditions.

pub mod assembly;
pub mod dirichlet;
pub mod field;
pub mod quadrature;
pub mod space;

pub use assembly::{
    assemble_coupling, assemble_elasticity, assemble_loads, assemble_pressure_mass,
    assemble_pressure_stiffness, AssembledOperators, Loads,
};
pub use dirichlet::{ConstrainedSolver, DirichletSet};
pub use field::{Location, ScalarField, VectorField};
pub use quadrature::QuadratureRule;
pub use space::{FunctionSpace, NodeSupport, SpaceKind};

//! The scenario catalog: unit square (two boundary setups), L-shaped
//! domain, and Mandel's problem.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::biot::{BiotProblem, Coefficients, Discretization, DisplacementBc};
use crate::error::{invalid, FslError, Result};
use crate::fem::{ScalarField, VectorField};
use crate::mandel::{build_mandel_problem, MandelParameters, MandelSetup, MandelSolution};
use crate::mesh::{build_l_shape_mesh, build_unit_square_mesh, BoundaryTag, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestCase {
    UnitSquareSetup1,
    UnitSquareSetup2,
    LShape,
    Mandel,
}

impl TestCase {
    pub const ALL: [TestCase; 4] = [
        TestCase::UnitSquareSetup1,
        TestCase::UnitSquareSetup2,
        TestCase::LShape,
        TestCase::Mandel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::UnitSquareSetup1 => "unit_square_setup1",
            Self::UnitSquareSetup2 => "unit_square_setup2",
            Self::LShape => "l_shape",
            Self::Mandel => "mandel",
        }
    }

    /// Coefficient `c` of the calibrated `K_dr = c μ + λ`.
    pub fn calibrated_c(self) -> f64 {
        match self {
            Self::UnitSquareSetup1 => 1.6,
            Self::UnitSquareSetup2 => 1.1,
            Self::LShape => 1.4,
            Self::Mandel => 1.35,
        }
    }

    pub fn default_kappas(self) -> Vec<f64> {
        match self {
            Self::Mandel => vec![1e-14, 1e-13, 1e-12, 1e-11, 1e-10],
            _ => vec![1e-15, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10],
        }
    }

    /// Default mesh resolution: cells per unit length for the unit-square
    /// family, cells per side for Mandel.
    pub fn default_resolution(self) -> usize {
        match self {
            Self::Mandel => 20,
            _ => 8,
        }
    }

    pub fn default_tolerance(self) -> f64 {
        1e-12
    }

    /// `(μ, λ, α, M)`
    pub fn material(self) -> (f64, f64, f64, f64) {
        match self {
            Self::Mandel => {
                let s = MandelSetup::default();
                (s.mu, s.lambda, s.alpha, s.m)
            }
            _ => (TABLE1_MU, TABLE1_LAMBDA, 1.0, 1e11),
        }
    }

    pub fn k_dr(self, c: f64) -> f64 {
        let (mu, lambda, _, _) = self.material();
        c * mu + lambda
    }

    /// Pressure scaling used by the randomized modifications.
    pub fn p_ref(self) -> f64 {
        match self {
            Self::Mandel => 1.0,
            _ => P_REF,
        }
    }

    pub fn tags(self) -> &'static [BoundaryTag] {
        match self {
            Self::LShape => &BoundaryTag::L_SHAPE,
            _ => &BoundaryTag::RECTANGLE,
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestCase {
    type Err = FslError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|c| c.name() == key)
            .ok_or_else(|| invalid(format!("unknown test case '{s}'")))
    }
}

pub const TABLE1_LAMBDA: f64 = 27.778e9;
pub const TABLE1_MU: f64 = 41.667e9;
pub const P_REF: f64 = 1e11;

/// Sources of the manufactured solution `u₁ = u₂ = p/p_ref = t x(1−x) y(1−y)`.
pub fn manufactured_sources(c: &Coefficients, p_ref: f64) -> (VectorField, ScalarField) {
    let Coefficients {
        mu,
        lambda,
        alpha,
        m,
        kappa,
    } = *c;
    let f = VectorField::analytic(move |x, t| {
        let (px, py) = (x[0] - x[0] * x[0], x[1] - x[1] * x[1]);
        let (dx, dy) = (1.0 - 2.0 * x[0], 1.0 - 2.0 * x[1]);
        let (fxx, fyy, fxy) = (-2.0 * py, -2.0 * px, dx * dy);
        let (fx, fy) = (dx * py, px * dy);
        let lap = fxx + fyy;
        [
            -mu * t * lap - (mu + lambda) * t * (fxx + fxy) + alpha * p_ref * t * fx,
            -mu * t * lap - (mu + lambda) * t * (fxy + fyy) + alpha * p_ref * t * fy,
        ]
    });
    let s = ScalarField::analytic(move |x, t| {
        let (px, py) = (x[0] - x[0] * x[0], x[1] - x[1] * x[1]);
        let (dx, dy) = (1.0 - 2.0 * x[0], 1.0 - 2.0 * x[1]);
        let phi = px * py;
        let lap = -2.0 * (px + py);
        p_ref * phi / m + alpha * (dx * py + px * dy) - kappa * p_ref * t * lap
    });
    (f, s)
}

/// The manufactured displacement and pressure at `(x, t)`.
pub fn manufactured_solution(x: [f64; 2], t: f64, p_ref: f64) -> ([f64; 2], f64) {
    let phi = t * (x[0] - x[0] * x[0]) * (x[1] - x[1] * x[1]);
    ([phi, phi], p_ref * phi)
}

/// Replacements applied on top of a catalog scenario.
#[derive(Debug, Clone, Default)]
pub struct Modification {
    /// Constant displacement Dirichlet value per boundary part.
    pub dirichlet_u_values: Option<Vec<(BoundaryTag, [f64; 2])>>,
    /// Constant pressure Dirichlet value per boundary part.
    pub dirichlet_p_values: Option<Vec<(BoundaryTag, f64)>>,
    pub body_force: Option<VectorField>,
    pub fluid_source: Option<ScalarField>,
    /// Boundary parts carrying (homogeneous) Dirichlet conditions; the rest
    /// are natural.
    pub layout: Option<(Vec<BoundaryTag>, Vec<BoundaryTag>)>,
}

/// One catalog problem at a given permeability.
pub fn build_problem(
    case: TestCase,
    discretization: Discretization,
    kappa: f64,
    resolution: Option<usize>,
    modification: &Modification,
) -> Result<BiotProblem> {
    let n = resolution.unwrap_or(case.default_resolution());
    if case == TestCase::Mandel {
        let solution = Arc::new(MandelSolution::new(MandelParameters::default())?);
        let setup = MandelSetup {
            kappa,
            nx: n,
            ny: n,
            ..MandelSetup::default()
        };
        return build_mandel_problem(&solution, &setup, discretization);
    }
    let mesh: Arc<Mesh> = Arc::new(match case {
        TestCase::LShape => build_l_shape_mesh(n)?,
        _ => build_unit_square_mesh(n)?,
    });
    let (mu, lambda, alpha, m) = case.material();
    let coefficients = Coefficients {
        mu,
        lambda,
        alpha,
        m,
        kappa,
    };
    let (f, s) = manufactured_sources(&coefficients, P_REF);
    let all = case.tags().to_vec();
    let (u_tags, p_tags) = match &modification.layout {
        Some((u, p)) => (u.clone(), p.clone()),
        None => match case {
            TestCase::UnitSquareSetup1 => (all.clone(), all.clone()),
            TestCase::UnitSquareSetup2 => (
                vec![BoundaryTag::Bottom, BoundaryTag::Right, BoundaryTag::Left],
                all.clone(),
            ),
            TestCase::LShape => (
                all.iter().copied().filter(|&t| t != BoundaryTag::Gamma6).collect(),
                all.clone(),
            ),
            TestCase::Mandel => unreachable!(),
        },
    };
    let u_value = |tag: BoundaryTag| -> VectorField {
        modification
            .dirichlet_u_values
            .as_ref()
            .and_then(|v| v.iter().find(|e| e.0 == tag))
            .map(|e| VectorField::Constant(e.1))
            .unwrap_or(VectorField::Zero)
    };
    let p_value = |tag: BoundaryTag| -> ScalarField {
        modification
            .dirichlet_p_values
            .as_ref()
            .and_then(|v| v.iter().find(|e| e.0 == tag))
            .map(|e| ScalarField::Constant(e.1))
            .unwrap_or(ScalarField::Zero)
    };
    Ok(BiotProblem {
        mesh,
        discretization,
        coefficients,
        g_rho: [0.0; 2],
        body_force: modification.body_force.clone().unwrap_or(f),
        fluid_source: modification.fluid_source.clone().unwrap_or(s),
        displacement_bcs: u_tags
            .into_iter()
            .map(|t| (t, DisplacementBc::Full(u_value(t))))
            .collect(),
        pressure_bcs: p_tags.into_iter().map(|t| (t, p_value(t))).collect(),
        initial_u: VectorField::Zero,
        initial_p: ScalarField::Zero,
        tau: 0.1,
        t0: 0.0,
        t_end: 0.1,
        p_ref: P_REF,
    })
}

//! Quasi-static Biot problem: scenario definition, the coupled backward
//! Euler step, and the fixed-stress splitting iteration.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FslError, Result};
use crate::fem::{
    assemble_loads, AssembledOperators, ConstrainedSolver, DirichletSet, FunctionSpace,
    ScalarField, SpaceKind, VectorField,
};
use crate::linsolve::DenseCholesky;
use crate::mesh::{BoundaryTag, Mesh};
use crate::sparse::{inf_norm, CsrMatrix};

/// Pair of finite element spaces for displacement and pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Discretization {
    /// Quadratic displacement, linear pressure (Taylor-Hood).
    P2P1,
    /// Linear displacement, linear pressure.
    P1P1,
}

impl Discretization {
    pub fn name(self) -> &'static str {
        match self {
            Self::P2P1 => "P2P1",
            Self::P1P1 => "P1P1",
        }
    }

    pub fn displacement_kind(self) -> SpaceKind {
        match self {
            Self::P2P1 => SpaceKind::P2Vector2,
            Self::P1P1 => SpaceKind::P1Vector2,
        }
    }

    pub fn spaces(self, mesh: &Arc<Mesh>) -> (FunctionSpace, FunctionSpace) {
        (
            FunctionSpace::new(mesh.clone(), self.displacement_kind()),
            FunctionSpace::new(mesh.clone(), SpaceKind::P1Scalar),
        )
    }
}

impl std::str::FromStr for Discretization {
    type Err = FslError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "p2p1" => Ok(Self::P2P1),
            "p1p1" => Ok(Self::P1P1),
            _ => Err(invalid(format!("unknown discretization '{s}'"))),
        }
    }
}

/// Material coefficients. `m` is the compressibility coefficient `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub m: f64,
    pub kappa: f64,
}

impl Coefficients {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("M", self.m),
            ("kappa", self.kappa),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Essential condition for the displacement on one boundary part.
#[derive(Debug, Clone)]
pub enum DisplacementBc {
    /// Both components prescribed.
    Full(VectorField),
    /// Only one Cartesian component prescribed; on axis-aligned edges this
    /// is the normal displacement.
    Component { component: usize, value: ScalarField },
}

#[derive(Debug, Clone)]
pub struct BiotProblem {
    pub mesh: Arc<Mesh>,
    pub discretization: Discretization,
    pub coefficients: Coefficients,
    pub g_rho: [f64; 2],
    pub body_force: VectorField,
    pub fluid_source: ScalarField,
    /// Applied in order; where two parts share a dof the first one wins.
    pub displacement_bcs: Vec<(BoundaryTag, DisplacementBc)>,
    pub pressure_bcs: Vec<(BoundaryTag, ScalarField)>,
    pub initial_u: VectorField,
    pub initial_p: ScalarField,
    pub tau: f64,
    pub t0: f64,
    pub t_end: f64,
    pub p_ref: f64,
}

impl BiotProblem {
    pub fn num_steps(&self) -> Result<usize> {
        if !(self.tau > 0.0) {
            return Err(invalid(format!("time step must be positive, got {}", self.tau)));
        }
        let span = self.t_end - self.t0;
        let n = (span / self.tau).round();
        if !(span > 0.0) || n < 1.0 || (n * self.tau - span).abs() > 1e-9 * span {
            return Err(invalid(format!(
                "time interval [{}, {}] is not a positive multiple of tau = {}",
                self.t0, self.t_end, self.tau
            )));
        }
        Ok(n as usize)
    }

    pub fn time(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.tau
    }

    pub fn validate(&self) -> Result<()> {
        self.coefficients.validate()?;
        self.num_steps()?;
        let tags = self.mesh.domain().tags();
        for tag in self
            .displacement_bcs
            .iter()
            .map(|b| b.0)
            .chain(self.pressure_bcs.iter().map(|b| b.0))
        {
            if !tags.contains(&tag) {
                return Err(invalid(format!("boundary part {tag} does not exist on this domain")));
            }
        }
        for (_, bc) in &self.displacement_bcs {
            if let DisplacementBc::Component { component, .. } = bc {
                if *component > 1 {
                    return Err(invalid(format!("displacement component {component} out of range")));
                }
            }
        }
        if self.displacement_bcs.is_empty() {
            return Err(invalid("displacement needs at least one Dirichlet boundary part"));
        }
        Ok(())
    }
}

/// Displacement and pressure dofs at one time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub time_index: usize,
}

/// Spaces, assembled operators and the factored mechanics block of a problem.
/// Immutable once built, so one instance can serve many concurrent runs.
#[derive(Debug)]
pub struct BiotSystem {
    problem: BiotProblem,
    u_space: FunctionSpace,
    p_space: FunctionSpace,
    ops: AssembledOperators,
    mechanics: ConstrainedSolver,
    u_pattern: Vec<usize>,
    p_pattern: Vec<usize>,
}

fn collect_first_wins(n: usize, entries: impl Iterator<Item = (usize, f64)>) -> Result<DirichletSet> {
    let mut assigned: Vec<Option<f64>> = vec![None; n];
    for (dof, v) in entries {
        if assigned[dof].is_none() {
            assigned[dof] = Some(v);
        }
    }
    DirichletSet::new(
        n,
        assigned
            .into_iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v))),
    )
}

impl BiotSystem {
    pub fn new(problem: BiotProblem) -> Result<Self> {
        problem.validate()?;
        let (u_space, p_space) = problem.discretization.spaces(&problem.mesh);
        let c = &problem.coefficients;
        let ops = AssembledOperators::assemble(&u_space, &p_space, c.mu, c.lambda, c.kappa)?;
        let mut sys = Self {
            problem,
            u_space,
            p_space,
            ops,
            mechanics: ConstrainedSolver::new(&CsrMatrix::identity(0), &[])?,
            u_pattern: Vec::new(),
            p_pattern: Vec::new(),
        };
        let t = sys.problem.time(1);
        sys.u_pattern = sys.dirichlet_u(t)?.indices().to_vec();
        sys.p_pattern = sys.dirichlet_p(t)?.indices().to_vec();
        sys.mechanics = ConstrainedSolver::new(&sys.ops.a, &sys.u_pattern).map_err(|e| match e {
            FslError::NotPositiveDefinite { .. } => FslError::SolverFailure(format!(
                "elasticity matrix singular after boundary conditions ({e})"
            )),
            other => other,
        })?;
        Ok(sys)
    }

    pub fn problem(&self) -> &BiotProblem {
        &self.problem
    }

    pub fn u_space(&self) -> &FunctionSpace {
        &self.u_space
    }

    pub fn p_space(&self) -> &FunctionSpace {
        &self.p_space
    }

    pub fn operators(&self) -> &AssembledOperators {
        &self.ops
    }

    pub fn mechanics(&self) -> &ConstrainedSolver {
        &self.mechanics
    }

    /// Displacement Dirichlet data at time `t`.
    pub fn dirichlet_u(&self, t: f64) -> Result<DirichletSet> {
        let space = &self.u_space;
        let mesh = &self.problem.mesh;
        let mut entries = Vec::new();
        for (tag, bc) in &self.problem.displacement_bcs {
            for e in mesh.boundary_edges().iter().filter(|e| e.tag == *tag) {
                for node in space.edge_nodes(e.vertices[0], e.vertices[1]) {
                    match bc {
                        DisplacementBc::Full(f) => {
                            let v = space.with_node_location(node, |loc| f.eval(loc, t));
                            entries.push((space.dof(node, 0), v[0]));
                            entries.push((space.dof(node, 1), v[1]));
                        }
                        DisplacementBc::Component { component, value } => {
                            let v = space.with_node_location(node, |loc| value.eval(loc, t));
                            entries.push((space.dof(node, *component), v));
                        }
                    }
                }
            }
        }
        collect_first_wins(space.num_dofs(), entries.into_iter())
    }

    /// Pressure Dirichlet data at time `t`.
    pub fn dirichlet_p(&self, t: f64) -> Result<DirichletSet> {
        let space = &self.p_space;
        let mesh = &self.problem.mesh;
        let mut entries = Vec::new();
        for (tag, f) in &self.problem.pressure_bcs {
            for e in mesh.boundary_edges().iter().filter(|e| e.tag == *tag) {
                for node in space.edge_nodes(e.vertices[0], e.vertices[1]) {
                    entries.push((node, space.with_node_location(node, |loc| f.eval(loc, t))));
                }
            }
        }
        collect_first_wins(space.num_dofs(), entries.into_iter())
    }

    pub fn initial_state(&self) -> Result<DiscreteState> {
        let t = self.problem.t0;
        Ok(DiscreteState {
            u: self.u_space.interpolate_vector(&self.problem.initial_u, t)?,
            p: self.p_space.interpolate_scalar(&self.problem.initial_p, t)?,
            time_index: 0,
        })
    }

    /// Time-level data of step `n`: loads, Dirichlet sets, and the flow
    /// right-hand side terms that do not depend on the iterate.
    fn step_data(&self, prev: &DiscreteState) -> Result<StepData> {
        let step = prev.time_index + 1;
        let t = self.problem.time(step);
        let c = &self.problem.coefficients;
        let loads = assemble_loads(
            &self.u_space,
            &self.p_space,
            &self.problem.body_force,
            &self.problem.fluid_source,
            self.problem.g_rho,
            c.kappa,
            t,
        )?;
        let du = self.dirichlet_u(t)?;
        let dp = self.dirichlet_p(t)?;
        if du.indices() != self.u_pattern.as_slice() || dp.indices() != self.p_pattern.as_slice() {
            return Err(FslError::SolverFailure("Dirichlet pattern changed in time".into()));
        }
        let tau = self.problem.tau;
        let mp_prev = self.ops.mp.mul_vec(&prev.p);
        let d_prev = self.ops.d.mul_vec(&prev.u);
        let flow_fixed: Vec<f64> = (0..self.p_space.num_dofs())
            .map(|i| {
                mp_prev[i] / c.m + tau * (loads.source[i] + loads.gravity[i]) + c.alpha * d_prev[i]
            })
            .collect();
        Ok(StepData {
            step,
            body: loads.body,
            flow_fixed,
            du,
            dp,
        })
    }

    /// Residual of the coupled system at the free dofs, as
    /// `(‖r_u‖_∞, ‖r_p‖_∞)`.
    pub fn monolithic_residual(
        &self,
        prev: &DiscreteState,
        state: &DiscreteState,
    ) -> Result<(f64, f64)> {
        let data = self.step_data(prev)?;
        let c = &self.problem.coefficients;
        let tau = self.problem.tau;
        let au = self.ops.a.mul_vec(&state.u);
        let dtp = self.ops.d.transpose_mul_vec(&state.p);
        let du = self.ops.d.mul_vec(&state.u);
        let mpp = self.ops.mp.mul_vec(&state.p);
        let kpp = self.ops.kp.mul_vec(&state.p);
        let umask = data.du.mask();
        let pmask = data.dp.mask();
        let ru = (0..au.len())
            .filter(|&i| !umask[i])
            .map(|i| (au[i] - c.alpha * dtp[i] - data.body[i]).abs())
            .fold(0.0, f64::max);
        let rp = (0..mpp.len())
            .filter(|&i| !pmask[i])
            .map(|i| (c.alpha * du[i] + mpp[i] / c.m + tau * kpp[i] - data.flow_fixed[i]).abs())
            .fold(0.0, f64::max);
        Ok((ru, rp))
    }

    /// Free pressure dofs in increasing order.
    pub fn free_pressure_dofs(&self) -> Vec<usize> {
        free_complement(self.p_space.num_dofs(), &self.p_pattern)
    }

    /// `x ↦ xᵀ A x`, the elastic energy `2μ‖ε(u)‖² + λ‖∇·u‖²`.
    pub fn elastic_energy(&self, u: &[f64]) -> f64 {
        self.ops.a.quadratic_form(u)
    }

    pub fn pressure_l2_squared(&self, p: &[f64]) -> f64 {
        self.ops.mp.quadratic_form(p)
    }
}

struct StepData {
    step: usize,
    body: Vec<f64>,
    flow_fixed: Vec<f64>,
    du: DirichletSet,
    dp: DirichletSet,
}

pub(crate) fn free_complement(n: usize, constrained: &[usize]) -> Vec<usize> {
    let mut mask = vec![false; n];
    for &i in constrained {
        mask[i] = true;
    }
    (0..n).filter(|&i| !mask[i]).collect()
}

/// Dense `D̃ Ã⁻¹ D̃ᵀ` on the pressure dofs `p_rows`, where the tilde marks
/// restriction to the free displacement dofs of `mechanics`.
pub fn divergence_schur(
    d: &CsrMatrix,
    mechanics: &ConstrainedSolver,
    p_rows: &[usize],
) -> Result<DMatrix<f64>> {
    let nu = d.ncols();
    let zero = DirichletSet::new(nu, mechanics.constrained().iter().map(|&i| (i, 0.0)))?;
    let columns: Vec<Vec<f64>> = p_rows
        .par_iter()
        .map(|&j| {
            let mut col = vec![0.0; nu];
            for (k, v) in d.row(j) {
                col[k] = v;
            }
            let w = mechanics.solve(&col, &zero)?;
            let dw = d.mul_vec(&w);
            Ok(p_rows.iter().map(|&i| dw[i]).collect())
        })
        .collect::<Result<_>>()?;
    let n = p_rows.len();
    let mut s = DMatrix::from_fn(n, n, |i, j| columns[j][i]);
    // symmetrize round-off
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// Coupled backward Euler step through the dense pressure Schur complement
/// `C + α² D A⁻¹ Dᵀ` on the free pressure dofs, factored once.
#[derive(Debug)]
pub struct MonolithicSolver<'a> {
    system: &'a BiotSystem,
    free_p: Vec<usize>,
    flow_matrix: CsrMatrix,
    schur: Option<DenseCholesky>,
}

impl<'a> MonolithicSolver<'a> {
    pub fn new(system: &'a BiotSystem) -> Result<Self> {
        let c = &system.problem.coefficients;
        let tau = system.problem.tau;
        let flow_matrix = system.ops.mp.linear_combination(1.0 / c.m, &system.ops.kp, tau);
        let free_p = system.free_pressure_dofs();
        let schur = if free_p.is_empty() {
            None
        } else {
            let mut s = divergence_schur(&system.ops.d, &system.mechanics, &free_p)?;
            s *= c.alpha * c.alpha;
            let cf = flow_matrix.submatrix(&free_p, &free_p).to_dense();
            s += cf;
            Some(DenseCholesky::new(s)?)
        };
        Ok(Self {
            system,
            free_p,
            flow_matrix,
            schur,
        })
    }

    pub fn step(&self, prev: &DiscreteState) -> Result<DiscreteState> {
        let sys = self.system;
        let data = sys.step_data(prev)?;
        let alpha = sys.problem.coefficients.alpha;
        let g_p = data.dp.lift();
        let mut rhs_u = sys.ops.d.transpose_mul_vec(&g_p);
        rhs_u.iter_mut().zip(&data.body).for_each(|(r, f)| *r = f + alpha * *r);
        let u0 = sys.mechanics.solve(&rhs_u, &data.du)?;
        let mut p = g_p.clone();
        if let Some(schur) = &self.schur {
            let du0 = sys.ops.d.mul_vec(&u0);
            let cg = self.flow_matrix.mul_vec(&g_p);
            let r: Vec<f64> = self
                .free_p
                .iter()
                .map(|&i| data.flow_fixed[i] - alpha * du0[i] - cg[i])
                .collect();
            let pf = schur.solve(&r);
            for (&i, v) in self.free_p.iter().zip(pf) {
                p[i] = v;
            }
        }
        let mut rhs = sys.ops.d.transpose_mul_vec(&p);
        rhs.iter_mut().zip(&data.body).for_each(|(r, f)| *r = f + alpha * *r);
        let u = sys.mechanics.solve(&rhs, &data.du)?;
        check_finite(&u, &p, data.step)?;
        Ok(DiscreteState {
            u,
            p,
            time_index: data.step,
        })
    }
}

fn check_finite(u: &[f64], p: &[f64], step: usize) -> Result<()> {
    if u.iter().chain(p).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(FslError::StepFailed {
            step,
            source: Box::new(FslError::SolverFailure("non-finite solution".into())),
        })
    }
}

/// Stabilization parameter of the fixed-stress scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Stabilization {
    /// `L` given directly.
    L(f64),
    /// `L = α² / (δ K_dr)`.
    Delta { delta: f64, k_dr: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedStressConfig {
    pub stabilization: Stabilization,
    pub eps_u_rel: f64,
    pub eps_p_rel: f64,
    pub max_iter: usize,
}

impl FixedStressConfig {
    pub fn with_l(l: f64, tol: f64, max_iter: usize) -> Self {
        Self {
            stabilization: Stabilization::L(l),
            eps_u_rel: tol,
            eps_p_rel: tol,
            max_iter,
        }
    }

    pub fn with_delta(delta: f64, k_dr: f64, tol: f64, max_iter: usize) -> Self {
        Self {
            stabilization: Stabilization::Delta { delta, k_dr },
            eps_u_rel: tol,
            eps_p_rel: tol,
            max_iter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.stabilization {
            Stabilization::L(l) if !(l >= 0.0 && l.is_finite()) => {
                return Err(invalid(format!("L must be non-negative, got {l}")))
            }
            Stabilization::Delta { delta, k_dr } if !(delta > 0.0 && k_dr > 0.0) => {
                return Err(invalid(format!(
                    "delta and K_dr must be positive, got {delta} and {k_dr}"
                )))
            }
            _ => {}
        }
        if !(self.eps_u_rel > 0.0 && self.eps_p_rel > 0.0) {
            return Err(invalid("stopping tolerances must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        Ok(())
    }

    pub fn l(&self, alpha: f64) -> f64 {
        match self.stabilization {
            Stabilization::L(l) => l,
            Stabilization::Delta { delta, k_dr } => alpha * alpha / (delta * k_dr),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// `‖uⁱ − uⁱ⁻¹‖_∞ / ‖uⁱ‖_∞`
    pub du_rel: f64,
    /// `‖pⁱ − pⁱ⁻¹‖_∞ / ‖pⁱ‖_∞`
    pub dp_rel: f64,
    /// `‖pⁱ − pⁱ⁻¹‖_{L²}`
    pub dp_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
}

impl StepReport {
    pub fn iteration_count(&self) -> usize {
        self.iterations.len()
    }

    /// Ratios of successive pressure increment L2 norms.
    pub fn contraction_factors(&self) -> Vec<f64> {
        self.iterations
            .windows(2)
            .map(|w| w[1].dp_l2 / w[0].dp_l2)
            .collect()
    }

    pub fn observed_rate(&self) -> Result<f64> {
        let inc: Vec<f64> = self.iterations.iter().map(|r| r.dp_l2).collect();
        observed_rate_from_increments(&inc)
    }
}

/// Geometric mean of the ratios `e[i]/e[i-1]` over the last half of the
/// history. Needs at least three increments. An increment that overflowed
/// gives an infinite rate.
pub fn observed_rate_from_increments(increments: &[f64]) -> Result<f64> {
    if increments.len() < 3 {
        return Err(FslError::UndefinedRate(format!(
            "{} iterations recorded, need at least 3",
            increments.len()
        )));
    }
    if increments.iter().any(|e| !e.is_finite()) {
        return Ok(f64::INFINITY);
    }
    let ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len() / 2..];
    if tail.iter().any(|r| !r.is_finite() && !r.is_infinite()) {
        return Err(FslError::UndefinedRate("zero increment followed by zero".into()));
    }
    if tail.contains(&0.0) {
        return Ok(0.0);
    }
    let mean_log = tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64;
    Ok(mean_log.exp())
}

/// Aggregate over a time-stepping run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub steps: Vec<StepReport>,
}

impl RunReport {
    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(StepReport::iteration_count).sum()
    }

    pub fn converged(&self) -> bool {
        self.steps.iter().all(|s| s.converged)
    }

    /// Largest per-step observed rate among steps with enough iterations.
    pub fn observed_rate(&self) -> Result<f64> {
        let rates: Vec<f64> = self
            .steps
            .iter()
            .filter_map(|s| s.observed_rate().ok())
            .collect();
        rates
            .into_iter()
            .reduce(f64::max)
            .ok_or_else(|| FslError::UndefinedRate("no step with at least 3 iterations".into()))
    }
}

/// Snapshot handed to iteration observers.
pub struct IterateView<'s> {
    pub iteration: usize,
    pub u: &'s [f64],
    pub p: &'s [f64],
}

/// Fixed-stress iteration with the flow matrix `(1/M + L) Mp + τ Kp`
/// factored once.
#[derive(Debug)]
pub struct FixedStressSolver<'a> {
    system: &'a BiotSystem,
    config: FixedStressConfig,
    l: f64,
    flow: ConstrainedSolver,
}

fn relative_increment(new: &[f64], old: &[f64]) -> f64 {
    let diff = new.iter().zip(old).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
    let scale = inf_norm(new);
    if scale < 1e-300 {
        diff
    } else {
        diff / scale
    }
}

impl<'a> FixedStressSolver<'a> {
    pub fn new(system: &'a BiotSystem, config: FixedStressConfig) -> Result<Self> {
        config.validate()?;
        let c = &system.problem.coefficients;
        let l = config.l(c.alpha);
        let matrix = system
            .ops
            .mp
            .linear_combination(1.0 / c.m + l, &system.ops.kp, system.problem.tau);
        let flow = ConstrainedSolver::new(&matrix, &system.p_pattern)?;
        Ok(Self {
            system,
            config,
            l,
            flow,
        })
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn config(&self) -> &FixedStressConfig {
        &self.config
    }

    pub fn step(&self, prev: &DiscreteState) -> Result<(DiscreteState, StepReport)> {
        self.step_observed(prev, None, &mut |_| {})
    }

    /// One time step starting from `guess` (default: the previous state);
    /// `observer` sees every iterate.
    pub fn step_observed(
        &self,
        prev: &DiscreteState,
        guess: Option<&DiscreteState>,
        observer: &mut dyn FnMut(&IterateView<'_>),
    ) -> Result<(DiscreteState, StepReport)> {
        let sys = self.system;
        let data = sys.step_data(prev)?;
        let c = &sys.problem.coefficients;
        let start = guess.unwrap_or(prev);
        if start.u.len() != prev.u.len() || start.p.len() != prev.p.len() {
            return Err(invalid("initial guess has the wrong dimensions"));
        }
        let (mut u, mut p) = (start.u.clone(), start.p.clone());
        let mut records = Vec::new();
        let mut converged = false;
        for iteration in 1..=self.config.max_iter {
            let mp_p = sys.ops.mp.mul_vec(&p);
            // flow_fixed carries +αD u^{n-1}, so −αD(uⁱ⁻¹ − u^{n-1}) reduces to −αD uⁱ⁻¹
            let du = sys.ops.d.mul_vec(&u);
            let rhs: Vec<f64> = (0..p.len())
                .map(|i| data.flow_fixed[i] + self.l * mp_p[i] - c.alpha * du[i])
                .collect();
            let p_new = self.flow.solve(&rhs, &data.dp)?;
            let mut rhs_u = sys.ops.d.transpose_mul_vec(&p_new);
            rhs_u
                .iter_mut()
                .zip(&data.body)
                .for_each(|(r, f)| *r = f + c.alpha * *r);
            let u_new = sys.mechanics.solve(&rhs_u, &data.du)?;

            let dp: Vec<f64> = crate::sparse::sub(&p_new, &p);
            let record = IterationRecord {
                du_rel: relative_increment(&u_new, &u),
                dp_rel: relative_increment(&p_new, &p),
                dp_l2: sys.ops.mp.quadratic_form(&dp).max(0.0).sqrt(),
            };
            u = u_new;
            p = p_new;
            records.push(record);
            observer(&IterateView {
                iteration,
                u: &u,
                p: &p,
            });
            if !(record.du_rel.is_finite() && record.dp_rel.is_finite()) {
                break;
            }
            if record.du_rel < self.config.eps_u_rel && record.dp_rel < self.config.eps_p_rel {
                converged = true;
                break;
            }
        }
        let report = StepReport {
            step: data.step,
            time: sys.problem.time(data.step),
            iterations: records,
            converged,
        };
        Ok((
            DiscreteState {
                u,
                p,
                time_index: data.step,
            },
            report,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Monolithic,
    FixedStress(FixedStressConfig),
}

/// Overrides for a time-stepping run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the interpolated initial data.
    pub initial_state: Option<DiscreteState>,
    /// Starting iterate of every fixed-stress step instead of the previous
    /// state.
    pub initial_guess: Option<DiscreteState>,
    /// Keep every time level in the returned trajectory.
    pub keep_trajectory: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Initial state followed by every computed level (or only the last
    /// level when the trajectory is not kept).
    pub trajectory: Vec<DiscreteState>,
    pub report: RunReport,
}

impl RunOutcome {
    pub fn final_state(&self) -> &DiscreteState {
        self.trajectory.last().expect("trajectory is never empty")
    }
}

pub fn run_time_stepping(system: &BiotSystem, method: Method) -> Result<RunOutcome> {
    run_time_stepping_with(
        system,
        method,
        &RunOptions {
            keep_trajectory: true,
            ..RunOptions::default()
        },
    )
}

/// Steps from `t0` to `T`. A fixed-stress step that fails to converge ends
/// the run; the report then carries `converged = false`.
pub fn run_time_stepping_with(
    system: &BiotSystem,
    method: Method,
    options: &RunOptions,
) -> Result<RunOutcome> {
    let n = system.problem.num_steps()?;
    let mut state = match &options.initial_state {
        Some(s) => {
            if s.u.len() != system.u_space.num_dofs() || s.p.len() != system.p_space.num_dofs() {
                return Err(invalid("initial state has the wrong dimensions"));
            }
            s.clone()
        }
        None => system.initial_state()?,
    };
    let mut trajectory = vec![state.clone()];
    let mut report = RunReport::default();
    let wrap = |step: usize| move |e: FslError| FslError::StepFailed {
        step,
        source: Box::new(e),
    };
    match method {
        Method::Monolithic => {
            let solver = MonolithicSolver::new(system)?;
            for step in 1..=n {
                state = solver.step(&state).map_err(wrap(step))?;
                report.steps.push(StepReport {
                    step,
                    time: system.problem.time(step),
                    iterations: Vec::new(),
                    converged: true,
                });
                push_level(&mut trajectory, &state, options.keep_trajectory);
            }
        }
        Method::FixedStress(config) => {
            let solver = FixedStressSolver::new(system, config)?;
            for step in 1..=n {
                let guess = options.initial_guess.as_ref();
                let (next, step_report) = solver
                    .step_observed(&state, guess, &mut |_| {})
                    .map_err(wrap(step))?;
                let ok = step_report.converged;
                report.steps.push(step_report);
                state = next;
                push_level(&mut trajectory, &state, options.keep_trajectory);
                if !ok {
                    break;
                }
            }
        }
    }
    Ok(RunOutcome { trajectory, report })
}

fn push_level(trajectory: &mut Vec<DiscreteState>, state: &DiscreteState, keep: bool) {
    if !keep && trajectory.len() > 1 {
        trajectory.pop();
    }
    trajectory.push(state.clone());
}

/// Plain-text trajectory export: a header line per level followed by the
/// displacement and pressure dofs.
pub fn write_trajectory<W: Write>(
    mut out: W,
    system: &BiotSystem,
    trajectory: &[DiscreteState],
) -> std::io::Result<()> {
    writeln!(
        out,
        "# trajectory {} {} u_dofs={} p_dofs={} levels={}",
        system.u_space.kind().name(),
        system.p_space.kind().name(),
        system.u_space.num_dofs(),
        system.p_space.num_dofs(),
        trajectory.len()
    )?;
    for s in trajectory {
        writeln!(out, "level {} t={:e}", s.time_index, system.problem.time(s.time_index))?;
        let line = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        writeln!(out, "u {}", line(&s.u))?;
        writeln!(out, "p {}", line(&s.p))?;
    }
    Ok(())
}

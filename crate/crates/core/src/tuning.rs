//! Contraction-rate model of the fixed-stress scheme, the optimal
//! stabilization parameter, and numerical estimates of the constants the
//! model needs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::biot::{divergence_schur, free_complement};
use crate::error::{invalid, FslError, Result};
use crate::fem::{
    assemble_coupling, assemble_elasticity, assemble_pressure_mass, assemble_pressure_stiffness,
    ConstrainedSolver, FunctionSpace, QuadratureRule,
};
use crate::fem::space::{eval_basis, ElementGeometry};
use crate::linsolve::{DenseCholesky, SparseCholesky};

/// Inputs of the rate bound. `beta` is the constant bounding the elastic
/// energy of the pressure lifting; `c_omega` the Poincaré constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    pub alpha: f64,
    pub m: f64,
    pub tau: f64,
    pub kappa: f64,
    pub c_omega: f64,
    pub beta: f64,
    pub k_dr: f64,
}

impl RateModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("M", self.m),
            ("tau", self.tau),
            ("kappa", self.kappa),
            ("C_omega", self.c_omega),
            ("beta", self.beta),
            ("K_dr", self.k_dr),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// `1/M + τκ/C_Ω²`, half the flow part of the rate denominator.
    fn flow_term(&self) -> f64 {
        1.0 / self.m + self.tau * self.kappa / (self.c_omega * self.c_omega)
    }

    /// `A = 2/M + 2τκ/C_Ω² + 2α²/β`
    pub fn a_coefficient(&self) -> f64 {
        2.0 * self.flow_term() + 2.0 * self.b_coefficient()
    }

    /// `B = α²/β`
    pub fn b_coefficient(&self) -> f64 {
        self.alpha * self.alpha / self.beta
    }

    /// `L_phys = α²/K_dr`
    pub fn l_phys(&self) -> f64 {
        self.alpha * self.alpha / self.k_dr
    }

    /// Smallest admissible `L` for a given `δ`.
    pub fn l_for_delta(&self, delta: f64) -> f64 {
        (self.alpha * self.alpha) / (delta * self.k_dr)
    }
}

/// `L / (L + 2/M + 2τκ/C_Ω² + (2−δ)α²/β)`.
pub fn theoretical_rate(model: &RateModel, delta: f64, l: f64) -> Result<f64> {
    model.validate()?;
    if !(delta > 0.0 && delta <= 2.0) {
        return Err(invalid(format!("delta must lie in (0, 2], got {delta}")));
    }
    let bound = model.l_for_delta(delta);
    if !(l >= bound) {
        return Err(invalid(format!(
            "L = {l:e} is below the admissible bound alpha^2/(delta K_dr) = {bound:e}"
        )));
    }
    Ok(l / (l + 2.0 * model.flow_term() + (2.0 - delta) * model.b_coefficient()))
}

/// `min{A/(2B), 2}`, evaluated as `1 + (1/M + τκ/C_Ω²)/B` so that the result
/// never drops below 1 through rounding.
pub fn optimal_delta(model: &RateModel) -> Result<f64> {
    model.validate()?;
    let d = 1.0 + model.flow_term() / model.b_coefficient();
    Ok(d.min(2.0))
}

/// `α² / (δ* K_dr)`, within `[L_phys/2, L_phys]`.
pub fn optimal_l(model: &RateModel) -> Result<f64> {
    Ok(model.l_for_delta(optimal_delta(model)?))
}

/// Settings of the eigenvalue iterations.
#[derive(Debug, Clone, Copy)]
pub struct EigenSettings {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

fn deterministic_start(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64) * 0.754_877_666).sin())
}

/// Smallest eigenvalue of `K x = λ M x` by inverse iteration. `solve`
/// applies `K⁻¹`; `project` is applied to every iterate.
fn inverse_iteration(
    k: &DMatrix<f64>,
    m: &DMatrix<f64>,
    start: DVector<f64>,
    solve: impl Fn(&DVector<f64>) -> DVector<f64>,
    project: impl Fn(&mut DVector<f64>),
    settings: EigenSettings,
) -> Result<(f64, DVector<f64>)> {
    let mut x = start;
    project(&mut x);
    let mut prev = f64::INFINITY;
    for _ in 0..settings.max_iter {
        let mut y = solve(&(m * &x));
        project(&mut y);
        let my = m * &y;
        let norm = y.dot(&my).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(FslError::SolverFailure("inverse iteration collapsed".into()));
        }
        y /= norm;
        let rq = y.dot(&(k * &y));
        x = y;
        if (rq - prev).abs() <= settings.rel_tol * rq.abs() {
            return Ok((rq, x));
        }
        prev = rq;
    }
    Err(FslError::EigenNotConverged {
        iterations: settings.max_iter,
    })
}

/// Poincaré constant `1/√λ_min` of the pressure space with homogeneous
/// Dirichlet conditions on `dirichlet_p`.
pub fn estimate_poincare(p_space: &FunctionSpace, dirichlet_p: &[usize]) -> Result<f64> {
    estimate_poincare_with(p_space, dirichlet_p, EigenSettings::default())
}

pub fn estimate_poincare_with(
    p_space: &FunctionSpace,
    dirichlet_p: &[usize],
    settings: EigenSettings,
) -> Result<f64> {
    if dirichlet_p.is_empty() {
        return Err(FslError::Undefined(
            "Poincaré constant undefined without a pressure Dirichlet boundary".into(),
        ));
    }
    let free = free_complement(p_space.num_dofs(), dirichlet_p);
    if free.is_empty() {
        return Err(invalid("no free pressure dofs"));
    }
    let kp = assemble_pressure_stiffness(p_space, 1.0)?.submatrix(&free, &free);
    let mp = assemble_pressure_mass(p_space)?.submatrix(&free, &free);
    let chol = SparseCholesky::new(&kp)?;
    let (kd, md) = (kp.to_dense(), mp.to_dense());
    let (lambda, _) = inverse_iteration(
        &kd,
        &md,
        DVector::from_element(free.len(), 1.0),
        |b| DVector::from_vec(chol.solve(b.as_slice())),
        |_| {},
        settings,
    )?;
    Ok(1.0 / lambda.sqrt())
}

/// Discrete inf-sup constant and the derived stability indicator `1/γ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfSupEstimate {
    pub gamma: f64,
    pub beta_estimate: f64,
    /// Whether constant pressures were removed because they lie in the
    /// kernel of the divergence.
    pub constants_deflated: bool,
}

/// `γ²` is the smallest eigenvalue of `(D A⁻¹ Dᵀ) q = γ² Mp q`, where `A` is
/// the elasticity matrix with `mu`, `lambda` restricted to the free dofs.
/// Constants are deflated when the boundary conditions put them in the
/// kernel. A numerically singular Schur complement yields `γ = 0`.
pub fn estimate_inf_sup(
    u_space: &FunctionSpace,
    p_space: &FunctionSpace,
    mu: f64,
    lambda: f64,
    dirichlet_u: &[usize],
) -> Result<InfSupEstimate> {
    let a = assemble_elasticity(u_space, mu, lambda)?;
    let d = assemble_coupling(u_space, p_space)?;
    let mp = assemble_pressure_mass(p_space)?.to_dense();
    let mech = ConstrainedSolver::new(&a, dirichlet_u).map_err(|e| {
        FslError::SolverFailure(format!("elasticity matrix singular under the given constraints ({e})"))
    })?;
    let rows: Vec<usize> = (0..p_space.num_dofs()).collect();
    let s = divergence_schur(&d, &mech, &rows)?;
    let n = rows.len();
    let ones = DVector::from_element(n, 1.0);
    let w = &mp * &ones;
    let s_norm = s.abs().max().max(f64::MIN_POSITIVE);
    let deflate = (&s * &ones).amax() <= 1e-10 * s_norm;
    let area = ones.dot(&w);
    let shifted = if deflate {
        // moves the constant mode to eigenvalue s_norm without touching the rest
        &s + (&w * w.transpose()) * (s_norm / area)
    } else {
        s.clone()
    };
    let Ok(chol) = DenseCholesky::new(shifted) else {
        return Ok(InfSupEstimate {
            gamma: 0.0,
            beta_estimate: f64::INFINITY,
            constants_deflated: deflate,
        });
    };
    let project = |x: &mut DVector<f64>| {
        if deflate {
            let c = w.dot(x) / area;
            x.add_scalar_mut(-c);
        }
    };
    let (g2, _) = inverse_iteration(
        &s,
        &mp,
        deterministic_start(n),
        |b| DVector::from_vec(chol.solve(b.as_slice())),
        project,
        EigenSettings::default(),
    )?;
    let gamma = g2.max(0.0).sqrt();
    Ok(InfSupEstimate {
        gamma,
        beta_estimate: if gamma > 0.0 { 1.0 / (gamma * gamma) } else { f64::INFINITY },
        constants_deflated: deflate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdrCheck {
    pub holds: bool,
    /// Smallest ratio `(2μ‖ε(u)‖² + λ‖∇·u‖²) / ‖Π ∇·u‖²` over the constrained
    /// space, with `Π` the projection onto the pressure space.
    pub ratio: f64,
}

/// Checks the coercivity bound `a(u, u) ≥ K_dr ‖∇·u‖²` with the divergence
/// measured through the pressure space.
pub fn verify_kdr(
    u_space: &FunctionSpace,
    p_space: &FunctionSpace,
    mu: f64,
    lambda: f64,
    dirichlet_u: &[usize],
    candidate: f64,
) -> Result<KdrCheck> {
    if !(candidate > 0.0) {
        return Err(invalid(format!("K_dr candidate must be positive, got {candidate}")));
    }
    let a = assemble_elasticity(u_space, mu, lambda)?;
    let d = assemble_coupling(u_space, p_space)?;
    let mp = assemble_pressure_mass(p_space)?;
    let mech = ConstrainedSolver::new(&a, dirichlet_u)?;
    let rows: Vec<usize> = (0..p_space.num_dofs()).collect();
    let s = divergence_schur(&d, &mech, &rows)?;
    let mp_chol = SparseCholesky::new(&mp)?;
    let mpd = mp.to_dense();
    // power iteration on Mp⁻¹ S for its largest eigenvalue ν; m = 1/ν
    let settings = EigenSettings::default();
    let mut x = deterministic_start(rows.len());
    let mut prev = f64::INFINITY;
    let mut nu = None;
    for _ in 0..settings.max_iter {
        let y = DVector::from_vec(mp_chol.solve((&s * &x).as_slice()));
        let norm = y.dot(&(&mpd * &y)).sqrt();
        if !(norm > 0.0) {
            break;
        }
        x = y / norm;
        let rq = x.dot(&(&s * &x));
        if (rq - prev).abs() <= settings.rel_tol * rq.abs() {
            nu = Some(rq);
            break;
        }
        prev = rq;
    }
    let nu = match nu {
        Some(v) if v > 0.0 => v,
        Some(_) | None if prev == 0.0 => {
            return Err(FslError::Undefined(
                "every admissible displacement is divergence free".into(),
            ))
        }
        _ => {
            return Err(FslError::EigenNotConverged {
                iterations: settings.max_iter,
            })
        }
    };
    let ratio = 1.0 / nu;
    Ok(KdrCheck {
        holds: ratio >= candidate * (1.0 - 1e-10),
        ratio,
    })
}

/// `‖∇·u_h‖²` with the exact divergence of the discrete field.
pub fn divergence_l2_squared(u_space: &FunctionSpace, u: &[f64]) -> Result<f64> {
    if u_space.components() != 2 || u.len() != u_space.num_dofs() {
        return Err(invalid("expected a displacement field on a vector space"));
    }
    let mesh = u_space.mesh();
    let rule = QuadratureRule::seven_point();
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let geom = ElementGeometry::new(mesh, t);
        let nodes = u_space.element_nodes(t);
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let e = eval_basis(u_space.degree(), &geom, bary);
            let div: f64 = nodes
                .iter()
                .enumerate()
                .map(|(a, &n)| e.grads[a][0] * u[2 * n] + e.grads[a][1] * u[2 * n + 1])
                .sum();
            total += 2.0 * geom.area * w * div * div;
        }
    }
    Ok(total)
}

/// `(2μ‖ε(u)‖² + λ‖∇·u‖²) / ‖∇·u‖²` for one field.
pub fn energy_divergence_ratio(u_space: &FunctionSpace, mu: f64, lambda: f64, u: &[f64]) -> Result<f64> {
    let div2 = divergence_l2_squared(u_space, u)?;
    if !(div2 > 0.0) {
        return Err(FslError::Undefined("field is divergence free".into()));
    }
    Ok(assemble_elasticity(u_space, mu, lambda)?.quadratic_form(u) / div2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> RateModel {
        RateModel {
            alpha: 1.0,
            m: 1.0,
            tau: 1.0,
            kappa: 1.0,
            c_omega: 1.0,
            beta: 1.0,
            k_dr: 1.0,
        }
    }

    #[test]
    fn rate_substitution() {
        // δ=2, L=1, M=1, C_Ω=1 with τκ and α tiny: 1/(1+2)
        let m = RateModel {
            alpha: 1e-9,
            tau: 1e-20,
            ..model()
        };
        let r = theoretical_rate(&m, 2.0, 1.0).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rate_rejects_inadmissible_parameters() {
        let m = model();
        assert!(theoretical_rate(&m, 0.0, 1.0).is_err());
        assert!(theoretical_rate(&m, 2.5, 1.0).is_err());
        assert!(theoretical_rate(&m, 1.0, 0.5).is_err());
        assert!(theoretical_rate(&m, 1.0, 1.0).is_ok());
    }

    #[test]
    fn extreme_regimes() {
        let stiff = RateModel {
            m: 1e300,
            kappa: 1e-300,
            ..model()
        };
        assert_eq!(optimal_delta(&stiff).unwrap(), 1.0);
        assert_eq!(optimal_l(&stiff).unwrap(), stiff.l_phys());
        let soft = RateModel { m: 1e-3, ..model() };
        assert_eq!(optimal_delta(&soft).unwrap(), 2.0);
        assert_eq!(optimal_l(&soft).unwrap(), soft.l_phys() / 2.0);
        let degenerate = RateModel {
            m: 1e300,
            kappa: 1e-300,
            ..model()
        };
        let r = theoretical_rate(&degenerate, 2.0, degenerate.l_for_delta(2.0)).unwrap();
        assert!(r > 0.999_999);
    }
}

//! Closed-form solution of Mandel's consolidation problem and the matching
//! finite element scenario.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::biot::{BiotProblem, Coefficients, Discretization, DisplacementBc};
use crate::error::{invalid, FslError, Result};
use crate::fem::{ScalarField, VectorField};
use crate::mesh::{build_rectangle_mesh, BoundaryTag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MandelParameters {
    /// Applied force per unit length.
    pub force: f64,
    pub skempton: f64,
    pub nu: f64,
    pub nu_u: f64,
    pub c_f: f64,
    /// Domain width.
    pub a: f64,
    /// Domain height.
    pub b: f64,
    pub mu: f64,
    pub n_terms: usize,
}

impl Default for MandelParameters {
    fn default() -> Self {
        Self {
            force: 6e8,
            skempton: 0.833,
            nu: 0.2,
            nu_u: 0.44,
            c_f: 0.47,
            a: 100.0,
            b: 10.0,
            mu: 2.475e9,
            n_terms: 200,
        }
    }
}

impl MandelParameters {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.nu && self.nu < self.nu_u && self.nu_u < 0.5) {
            return Err(invalid(format!(
                "need 0 < nu < nu_u < 0.5, got nu={} nu_u={}",
                self.nu, self.nu_u
            )));
        }
        for (name, v) in [
            ("F", self.force),
            ("c_f", self.c_f),
            ("a", self.a),
            ("b", self.b),
            ("mu", self.mu),
            ("B", self.skempton),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_terms == 0 {
            return Err(invalid("n_terms must be at least 1"));
        }
        Ok(())
    }

    /// `c = (1 − ν)/(ν_u − ν)` in `tan α = c α`.
    pub fn root_slope(&self) -> f64 {
        (1.0 - self.nu) / (self.nu_u - self.nu)
    }
}

/// Positive roots of `tan α = c α`, one per interval `((n−1)π, (n−1)π + π/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSequence {
    pub slope: f64,
    pub alphas: Vec<f64>,
}

impl RootSequence {
    pub fn residual(&self, n: usize) -> f64 {
        let a = self.alphas[n];
        (a.tan() - self.slope * a).abs()
    }

    /// First-order bound on `|α_n − α_n*|`: the residual divided by the
    /// derivative `1 + tan²α − c ≈ 1 + c²α² − c` of the defining function.
    pub fn error_bound(&self, n: usize) -> f64 {
        let ca = self.slope * self.alphas[n];
        self.residual(n) / (1.0 + ca * ca - self.slope)
    }
}

pub fn mandel_roots(nu: f64, nu_u: f64, n_terms: usize) -> Result<RootSequence> {
    if !(0.0 < nu && nu < nu_u && nu_u < 0.5) {
        return Err(invalid(format!("need 0 < nu < nu_u < 0.5, got {nu}, {nu_u}")));
    }
    let c = (1.0 - nu) / (nu_u - nu);
    let f = |a: f64| a.tan() - c * a;
    let eps = 1e-9;
    let mut alphas = Vec::with_capacity(n_terms);
    for n in 1..=n_terms {
        let base = (n - 1) as f64 * std::f64::consts::PI;
        let (mut lo, mut hi) = (base + eps, base + std::f64::consts::FRAC_PI_2 - eps);
        if !(f(lo) < 0.0 && f(hi) > 0.0) {
            return Err(FslError::RootFinding { n });
        }
        while hi - lo > 1e-14 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        alphas.push(if f(lo).abs() <= f(hi).abs() { lo } else { hi });
    }
    Ok(RootSequence { slope: c, alphas })
}

fn check_roots(params: &MandelParameters, roots: &RootSequence) {
    debug_assert!(roots.alphas.len() >= params.n_terms, "root sequence shorter than n_terms");
}

/// Series terms share `e^{−α² c_f t / a²} / (α − sin α cos α)`; sums run
/// from the last term to the first.
fn series(params: &MandelParameters, roots: &RootSequence, t: f64, term: impl Fn(f64) -> f64) -> f64 {
    check_roots(params, roots);
    let a2 = params.a * params.a;
    roots.alphas[..params.n_terms]
        .iter()
        .rev()
        .map(|&al| {
            let (s, c) = al.sin_cos();
            term(al) * (-al * al * params.c_f * t / a2).exp() / (al - s * c)
        })
        .sum()
}

pub fn mandel_pressure(params: &MandelParameters, roots: &RootSequence, x: f64, t: f64) -> f64 {
    let p = params;
    let scale = 2.0 * p.force * p.skempton * (1.0 + p.nu_u) / (3.0 * p.a);
    scale * series(p, roots, t, |al| al.sin() * ((al * (x / p.a)).cos() - al.cos()))
}

pub fn mandel_ux(params: &MandelParameters, roots: &RootSequence, x: f64, t: f64) -> f64 {
    let p = params;
    let sc = series(p, roots, t, |al| al.sin() * al.cos());
    let wave = series(p, roots, t, |al| al.cos() * (al * (x / p.a)).sin());
    (p.force * p.nu / (2.0 * p.mu * p.a) - p.force * p.nu_u / (p.mu * p.a) * sc) * x
        + p.force / p.mu * wave
}

pub fn mandel_uy(params: &MandelParameters, roots: &RootSequence, y: f64, t: f64) -> f64 {
    let p = params;
    let sc = series(p, roots, t, |al| al.sin() * al.cos());
    (-p.force * (1.0 - p.nu) / (2.0 * p.mu * p.a) + p.force * (1.0 - p.nu_u) / (p.mu * p.a) * sc) * y
}

/// Parameters bundled with their roots.
#[derive(Debug, Clone)]
pub struct MandelSolution {
    pub params: MandelParameters,
    pub roots: RootSequence,
}

impl MandelSolution {
    pub fn new(params: MandelParameters) -> Result<Self> {
        params.validate()?;
        let roots = mandel_roots(params.nu, params.nu_u, params.n_terms)?;
        Ok(Self { params, roots })
    }

    pub fn pressure(&self, x: f64, t: f64) -> f64 {
        mandel_pressure(&self.params, &self.roots, x, t)
    }

    pub fn ux(&self, x: f64, t: f64) -> f64 {
        mandel_ux(&self.params, &self.roots, x, t)
    }

    pub fn uy(&self, y: f64, t: f64) -> f64 {
        mandel_uy(&self.params, &self.roots, y, t)
    }

    /// Relative change of `p(0, t)` when the number of terms is doubled.
    pub fn truncation_defect(&self, t: f64) -> Result<f64> {
        let doubled = MandelParameters {
            n_terms: 2 * self.params.n_terms,
            ..self.params
        };
        let fine = Self::new(doubled)?;
        let (p1, p2) = (self.pressure(0.0, t), fine.pressure(0.0, t));
        Ok((p1 - p2).abs() / p2.abs().max(f64::MIN_POSITIVE))
    }
}

/// Material data and discretization of the Mandel scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MandelSetup {
    pub lambda: f64,
    pub mu: f64,
    pub m: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub nx: usize,
    pub ny: usize,
    pub tau: f64,
    pub t_end: f64,
}

impl Default for MandelSetup {
    fn default() -> Self {
        Self {
            lambda: 1.65e9,
            mu: 2.475e9,
            m: 1.65e10,
            alpha: 1.0,
            kappa: 1e-10,
            nx: 20,
            ny: 20,
            tau: 10.0,
            t_end: 50.0,
        }
    }
}

/// Rectangle `(0, a) × (0, b)` with the normal displacement prescribed on the
/// left, bottom and top edges from the series, zero pressure on the right
/// edge and natural conditions elsewhere.
pub fn build_mandel_problem(
    solution: &Arc<MandelSolution>,
    setup: &MandelSetup,
    discretization: Discretization,
) -> Result<BiotProblem> {
    let p = solution.params;
    let mesh = Arc::new(build_rectangle_mesh(p.a, p.b, setup.nx, setup.ny)?);
    if let Ok(defect) = solution.truncation_defect(setup.tau) {
        if defect > 1e-10 {
            log::warn!("Mandel series truncation defect {defect:e} at t = {}", setup.tau);
        }
    }
    let (s_top, s_ini_u, s_ini_p) = (solution.clone(), solution.clone(), solution.clone());
    let b = p.b;
    Ok(BiotProblem {
        mesh,
        discretization,
        coefficients: Coefficients {
            mu: setup.mu,
            lambda: setup.lambda,
            alpha: setup.alpha,
            m: setup.m,
            kappa: setup.kappa,
        },
        g_rho: [0.0; 2],
        body_force: VectorField::Zero,
        fluid_source: ScalarField::Zero,
        displacement_bcs: vec![
            (
                BoundaryTag::Left,
                DisplacementBc::Component {
                    component: 0,
                    value: ScalarField::Zero,
                },
            ),
            (
                BoundaryTag::Bottom,
                DisplacementBc::Component {
                    component: 1,
                    value: ScalarField::Zero,
                },
            ),
            (
                BoundaryTag::Top,
                DisplacementBc::Component {
                    component: 1,
                    value: ScalarField::analytic(move |_, t| s_top.uy(b, t)),
                },
            ),
        ],
        pressure_bcs: vec![(BoundaryTag::Right, ScalarField::Zero)],
        initial_u: VectorField::analytic(move |x, t| [s_ini_u.ux(x[0], t), s_ini_u.uy(x[1], t)]),
        initial_p: ScalarField::analytic(move |x, t| s_ini_p.pressure(x[0], t)),
        tau: setup.tau,
        t0: 0.0,
        t_end: setup.t_end,
        p_ref: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_root_bracket() {
        let r = mandel_roots(0.2, 0.44, 5).unwrap();
        assert!((r.slope - 10.0 / 3.0).abs() < 1e-15);
        assert!(r.alphas[0] > 1.3 && r.alphas[0] < 1.4);
        assert!(r.alphas.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn invalid_ratios_rejected() {
        assert!(mandel_roots(0.3, 0.2, 3).is_err());
        assert!(mandel_roots(0.2, 0.5, 3).is_err());
        assert!(MandelSolution::new(MandelParameters {
            n_terms: 0,
            ..MandelParameters::default()
        })
        .is_err());
    }

    #[test]
    fn pressure_vanishes_at_drained_edge() {
        let s = MandelSolution::new(MandelParameters::default()).unwrap();
        for t in [0.0, 1.0, 10.0, 50.0, 1e4] {
            assert_eq!(s.pressure(s.params.a, t), 0.0);
        }
    }

    #[test]
    fn long_time_limits() {
        let s = MandelSolution::new(MandelParameters::default()).unwrap();
        let p = s.params;
        let t = 1e9;
        assert!(s.pressure(0.0, t).abs() < 1e-300);
        let ux = p.force * p.nu / (2.0 * p.mu * p.a) * 40.0;
        assert!((s.ux(40.0, t) - ux).abs() <= 1e-15 * ux.abs());
        let uy = -p.force * (1.0 - p.nu) / (2.0 * p.mu * p.a) * 7.0;
        assert!((s.uy(7.0, t) - uy).abs() <= 1e-15 * uy.abs());
    }

    #[test]
    fn left_and_bottom_data_vanish() {
        let s = MandelSolution::new(MandelParameters::default()).unwrap();
        for t in [0.0, 10.0, 50.0] {
            assert_eq!(s.ux(0.0, t), 0.0);
            assert_eq!(s.uy(0.0, t), 0.0);
        }
    }
}

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cases::{build_problem, Modification, TestCase};
use super::config::{BetaMode, DeltaGrid, ExperimentConfig, RandomMode};
use crate::biot::{
    run_time_stepping_with, BiotSystem, Discretization, DiscreteState, FixedStressConfig, Method,
    RunOptions, Stabilization,
};
use crate::error::{invalid, FslError, Result};
use crate::fem::{ScalarField, VectorField};
use crate::mesh::BoundaryTag;
use crate::tuning::{estimate_inf_sup, estimate_poincare, optimal_delta, RateModel};

/// One `(κ, δ)` cell of a sweep, as written to `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub test_case: TestCase,
    pub discretization: Discretization,
    pub kappa: f64,
    pub delta: f64,
    pub l: f64,
    /// Total over time steps, averaged over realizations.
    pub iterations: f64,
    pub converged: bool,
    pub observed_rate: Option<f64>,
    pub delta_star: f64,
}

/// Constants entering the optimal-parameter formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConstants {
    pub c_omega: f64,
    pub gamma: Option<f64>,
    pub k_dr: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationSeed {
    pub realization: usize,
    pub seed: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub constants: ResolvedConstants,
    pub realizations: Vec<RealizationSeed>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn kappas(&self) -> Vec<f64> {
        let mut k: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !k.contains(&r.kappa) {
                k.push(r.kappa);
            }
        }
        k
    }

    pub fn rows_for(&self, kappa: f64) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.kappa == kappa).collect()
    }

    pub fn empirical_argmin(&self, kappa: f64) -> Option<f64> {
        empirical_argmin(self.rows_for(kappa).into_iter())
    }

    pub fn delta_star(&self, kappa: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.kappa == kappa).map(|r| r.delta_star)
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

/// `δ` with the fewest iterations among converged cells; ties go to the
/// smaller observed rate, then to the smaller `δ`.
pub fn empirical_argmin<'a>(rows: impl Iterator<Item = &'a SweepRow>) -> Option<f64> {
    rows.filter(|r| r.converged)
        .min_by(|a, b| {
            a.iterations
                .partial_cmp(&b.iterations)
                .unwrap_or(Ordering::Equal)
                .then_with(|| {
                    let ra = a.observed_rate.unwrap_or(f64::INFINITY);
                    let rb = b.observed_rate.unwrap_or(f64::INFINITY);
                    ra.partial_cmp(&rb).unwrap_or(Ordering::Equal)
                })
                .then_with(|| a.delta.partial_cmp(&b.delta).unwrap_or(Ordering::Equal))
        })
        .map(|r| r.delta)
}

/// RNG of realization `r`: the config seed with stream `r`.
pub fn realization_rng(seed: u64, realization: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(realization as u64);
    rng
}

/// Randomized ingredients of one realization.
#[derive(Debug, Clone, Default)]
pub struct Realization {
    pub modification: Modification,
    pub initial_state: Option<DiscreteState>,
    pub initial_guess: Option<DiscreteState>,
}

fn uniform(rng: &mut ChaCha8Rng, order: f64) -> f64 {
    order * rng.gen_range(-1.0..=1.0)
}

fn random_state(rng: &mut ChaCha8Rng, nu: usize, np: usize, u_order: f64, p_order: f64) -> DiscreteState {
    let u = (0..nu).map(|_| uniform(rng, u_order)).collect();
    let p = (0..np).map(|_| uniform(rng, p_order)).collect();
    DiscreteState {
        u,
        p,
        time_index: 0,
    }
}

/// Draws realization `r` of `mode` for `case`. `base` supplies dof counts
/// and the mesh.
pub fn draw_realization(
    case: TestCase,
    mode: RandomMode,
    base: &BiotSystem,
    seed: u64,
    realization: usize,
    scale: f64,
) -> Result<Realization> {
    let mut rng = realization_rng(seed, realization);
    let p_ref = case.p_ref();
    let (nu, np) = (base.u_space().num_dofs(), base.p_space().num_dofs());
    let tags = case.tags();
    let mut out = Realization::default();
    match mode {
        RandomMode::None => {}
        RandomMode::M1 => {
            out.initial_guess = Some(random_state(&mut rng, nu, np, scale, scale * p_ref));
        }
        RandomMode::M2 => {
            out.initial_state = Some(random_state(&mut rng, nu, np, scale, scale * p_ref));
        }
        RandomMode::M3 => {
            let u: Vec<(BoundaryTag, [f64; 2])> = tags
                .iter()
                .map(|&t| (t, [uniform(&mut rng, scale), uniform(&mut rng, scale)]))
                .collect();
            let p: Vec<(BoundaryTag, f64)> =
                tags.iter().map(|&t| (t, uniform(&mut rng, scale * p_ref))).collect();
            out.modification.dirichlet_u_values = Some(u);
            out.modification.dirichlet_p_values = Some(p);
        }
        RandomMode::M4 => {
            let nv = base.problem().mesh.num_vertices();
            let f: Vec<[f64; 2]> = (0..nv)
                .map(|_| [uniform(&mut rng, scale * p_ref), uniform(&mut rng, scale * p_ref)])
                .collect();
            let s: Vec<f64> = (0..nv).map(|_| uniform(&mut rng, scale)).collect();
            out.modification.body_force = Some(VectorField::Nodal(f.into()));
            out.modification.fluid_source = Some(ScalarField::Nodal(s.into()));
        }
        RandomMode::M5 => {
            for _ in 0..100 {
                let u: Vec<BoundaryTag> = tags.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
                let p: Vec<BoundaryTag> = tags.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
                if !u.is_empty() {
                    out.modification.layout = Some((u, p));
                    return Ok(out);
                }
            }
            return Err(FslError::Config(
                "no displacement Dirichlet boundary after 100 draws".into(),
            ));
        }
    }
    Ok(out)
}

/// Poincaré constant from the case's own pressure boundary, plus the
/// optional inf-sup estimate.
pub fn resolve_constants(config: &ExperimentConfig) -> Result<ResolvedConstants> {
    let case = config.test_case;
    let kappa = config.kappas()[0];
    let base = BiotSystem::new(build_problem(
        case,
        config.discretization,
        kappa,
        config.resolution,
        &Modification::default(),
    )?)?;
    let c_omega = match config.c_omega {
        Some(c) => c,
        None => {
            let pattern = base.dirichlet_p(base.problem().time(1))?;
            estimate_poincare(base.p_space(), pattern.indices())?
        }
    };
    let k_dr = config.k_dr.evaluate(case);
    let (gamma, beta) = match config.beta_mode {
        BetaMode::EqualKdr => (None, k_dr),
        BetaMode::FromInfSupEstimate => {
            let c = &base.problem().coefficients;
            let pattern = base.dirichlet_u(base.problem().time(1))?;
            let est = estimate_inf_sup(base.u_space(), base.p_space(), c.mu, c.lambda, pattern.indices())?;
            if !est.beta_estimate.is_finite() {
                return Err(FslError::Undefined(
                    "inf-sup estimate vanished; beta undefined".into(),
                ));
            }
            (Some(est.gamma), est.beta_estimate)
        }
    };
    Ok(ResolvedConstants {
        c_omega,
        gamma,
        k_dr,
        beta,
    })
}

/// `δ*` for one permeability.
pub fn delta_star_for(case: TestCase, constants: &ResolvedConstants, kappa: f64, tau: f64) -> Result<f64> {
    let (_, _, alpha, m) = case.material();
    optimal_delta(&RateModel {
        alpha,
        m,
        tau,
        kappa,
        c_omega: constants.c_omega,
        beta: constants.beta,
        k_dr: constants.k_dr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CellOutcome {
    iterations: usize,
    converged: bool,
    rate: Option<f64>,
}

fn run_cell(
    system: &BiotSystem,
    config: FixedStressConfig,
    options: &RunOptions,
) -> Result<CellOutcome> {
    let out = run_time_stepping_with(system, Method::FixedStress(config), options)?;
    Ok(CellOutcome {
        iterations: out.report.total_iterations(),
        converged: out.report.converged(),
        rate: out.report.observed_rate().ok(),
    })
}

/// δ×κ sweep, randomized when the config says so. Non-convergent cells are
/// recorded, not raised.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let case = config.test_case;
    let kappas = config.kappas();
    let deltas = config.delta_grid.values()?;
    let constants = resolve_constants(config)?;
    let realizations = if config.random_mode == RandomMode::None {
        1
    } else {
        config.num_realizations
    };
    let base = BiotSystem::new(build_problem(
        case,
        config.discretization,
        kappas[0],
        config.resolution,
        &Modification::default(),
    )?)?;
    let draws: Vec<Realization> = (0..realizations)
        .map(|r| {
            draw_realization(case, config.random_mode, &base, config.seed, r, config.random_scale)
        })
        .collect::<Result<_>>()?;
    drop(base);

    let groups: Vec<(usize, usize)> = (0..kappas.len())
        .flat_map(|k| (0..realizations).map(move |r| (k, r)))
        .collect();
    let outcomes: Vec<Vec<CellOutcome>> = groups
        .par_iter()
        .map(|&(k, r)| {
            let draw = &draws[r];
            let problem = build_problem(
                case,
                config.discretization,
                kappas[k],
                config.resolution,
                &draw.modification,
            )?;
            let system = BiotSystem::new(problem)?;
            let options = RunOptions {
                initial_state: draw.initial_state.clone(),
                initial_guess: draw.initial_guess.clone(),
                keep_trajectory: false,
            };
            deltas
                .par_iter()
                .map(|&delta| {
                    let fs = FixedStressConfig {
                        stabilization: Stabilization::Delta {
                            delta,
                            k_dr: constants.k_dr,
                        },
                        eps_u_rel: config.eps_u_rel,
                        eps_p_rel: config.eps_p_rel,
                        max_iter: config.max_iter,
                    };
                    run_cell(&system, fs, &options)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let (_, _, alpha, _) = case.material();
    let tau = build_tau(case);
    let mut rows = Vec::with_capacity(kappas.len() * deltas.len());
    for (k, &kappa) in kappas.iter().enumerate() {
        let star = delta_star_for(case, &constants, kappa, tau)?;
        for (d, &delta) in deltas.iter().enumerate() {
            let cells: Vec<CellOutcome> = (0..realizations)
                .map(|r| outcomes[k * realizations + r][d])
                .collect();
            let iterations =
                cells.iter().map(|c| c.iterations as f64).sum::<f64>() / realizations as f64;
            let rates: Vec<f64> = cells.iter().filter_map(|c| c.rate).collect();
            rows.push(SweepRow {
                test_case: case,
                discretization: config.discretization,
                kappa,
                delta,
                l: alpha * alpha / (delta * constants.k_dr),
                iterations,
                converged: cells.iter().all(|c| c.converged),
                observed_rate: if rates.is_empty() {
                    None
                } else {
                    Some(rates.iter().sum::<f64>() / rates.len() as f64)
                },
                delta_star: star,
            });
        }
    }
    let realizations = (0..realizations)
        .map(|r| RealizationSeed {
            realization: r,
            seed: config.seed,
            stream: r as u64,
        })
        .collect();
    Ok(SweepResult {
        config: config.clone(),
        constants,
        realizations: if config.random_mode == RandomMode::None {
            Vec::new()
        } else {
            realizations
        },
        rows,
    })
}

/// Randomized sweep; the config's `random_mode` must not be `None`.
pub fn run_randomized(config: &ExperimentConfig) -> Result<SweepResult> {
    if config.random_mode == RandomMode::None {
        return Err(invalid("run_randomized needs a random mode M1..M5"));
    }
    run_sweep(config)
}

fn build_tau(case: TestCase) -> f64 {
    match case {
        TestCase::Mandel => crate::mandel::MandelSetup::default().tau,
        _ => 0.1,
    }
}

/// Per-candidate data of a calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCandidate {
    pub c: f64,
    pub k_dr: f64,
    pub delta_star: f64,
    pub empirical_argmin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub c: f64,
    pub k_dr: f64,
    /// False when no candidate matched within half a grid step; `c` is then
    /// the nearest one.
    pub matched: bool,
    pub candidates: Vec<CalibrationCandidate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSettings {
    pub resolution: Option<usize>,
    pub tolerance: f64,
    pub max_iter: usize,
    pub c_omega: Option<f64>,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            resolution: None,
            tolerance: 1e-12,
            max_iter: 500,
            c_omega: None,
        }
    }
}

/// Scans `K_dr = c μ + λ` for `c ∈ {1.0, 1.05, …, 2.0}` and picks the `c`
/// whose theoretical `δ*` (with `β = K_dr`) is closest to the empirical
/// argmin at `kappa_min`.
pub fn calibrate_kdr(
    case: TestCase,
    discretization: Discretization,
    kappa_min: f64,
    delta_grid: &DeltaGrid,
    settings: &CalibrationSettings,
) -> Result<CalibrationResult> {
    let step = delta_grid.resolution()?;
    if step > 0.05 + 1e-12 {
        return Err(invalid(format!("delta grid resolution {step} is coarser than 0.05")));
    }
    let deltas = delta_grid.values()?;
    let mut cfg = ExperimentConfig::new(case, discretization);
    cfg.kappa_list = Some(vec![kappa_min]);
    cfg.resolution = settings.resolution;
    cfg.c_omega = settings.c_omega;
    let c_omega = resolve_constants(&cfg)?.c_omega;
    let system = BiotSystem::new(build_problem(
        case,
        discretization,
        kappa_min,
        settings.resolution,
        &Modification::default(),
    )?)?;
    let cs: Vec<f64> = (0..=20).map(|i| ((100 + 5 * i) as f64) / 100.0).collect();
    let tau = build_tau(case);
    let options = RunOptions::default();
    let candidates: Vec<CalibrationCandidate> = cs
        .par_iter()
        .map(|&c| {
            let k_dr = case.k_dr(c);
            let rows: Vec<SweepRow> = deltas
                .par_iter()
                .map(|&delta| {
                    let fs = FixedStressConfig::with_delta(delta, k_dr, settings.tolerance, settings.max_iter);
                    let out = run_cell(&system, fs, &options)?;
                    Ok(SweepRow {
                        test_case: case,
                        discretization,
                        kappa: kappa_min,
                        delta,
                        l: 0.0,
                        iterations: out.iterations as f64,
                        converged: out.converged,
                        observed_rate: out.rate,
                        delta_star: 0.0,
                    })
                })
                .collect::<Result<_>>()?;
            let constants = ResolvedConstants {
                c_omega,
                gamma: None,
                k_dr,
                beta: k_dr,
            };
            Ok(CalibrationCandidate {
                c,
                k_dr,
                delta_star: delta_star_for(case, &constants, kappa_min, tau)?,
                empirical_argmin: empirical_argmin(rows.iter()),
            })
        })
        .collect::<Result<_>>()?;
    let best = candidates
        .iter()
        .filter_map(|c| c.empirical_argmin.map(|e| (c, (c.delta_star - e).abs())))
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
        .ok_or_else(|| FslError::SolverFailure("no candidate produced a converged sweep".into()))?;
    let matched = best.1 <= 0.5 * step + 1e-12;
    if !matched {
        log::warn!(
            "K_dr calibration for {case}: no candidate within half a grid step (best c = {}, gap {:.3})",
            best.0.c,
            best.1
        );
    }
    Ok(CalibrationResult {
        c: best.0.c,
        k_dr: best.0.k_dr,
        matched,
        candidates,
    })
}

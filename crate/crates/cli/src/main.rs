use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fsl_core::harness::config::DeltaGrid;
use fsl_core::harness::{
    build_problem, calibrate_kdr, emit_outputs, run_sweep, CalibrationSettings, Modification,
};
use fsl_core::mandel::{mandel_roots, MandelParameters};
use fsl_core::tuning::estimate_inf_sup;
use fsl_core::{BiotSystem, Discretization, ExperimentConfig, MandelSolution, TestCase};

#[derive(Parser)]
#[command(name = "fsl", version, about = "Fixed-stress splitting experiments for Biot poroelasticity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a δ×κ sweep described by a TOML config and write the outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Exit with status 2 if any cell failed to converge.
        #[arg(long)]
        strict: bool,
    },
    /// Scan K_dr = c·μ + λ and report the c matching the empirical optimum.
    Calibrate {
        #[arg(long)]
        case: TestCase,
        #[arg(long, default_value = "p2p1")]
        disc: Discretization,
        /// Defaults to the smallest permeability of the case.
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
    },
    /// Self-checks of the closed-form Mandel solution.
    MandelCheck,
    /// Discrete inf-sup constant on the unit square with full Dirichlet data.
    Infsup {
        #[arg(long, default_value = "p2p1")]
        disc: Discretization,
        /// Mesh size; must be 1/n for an integer n.
        #[arg(long)]
        h: f64,
    },
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("FSL_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("FSL_THREADS must be a positive integer, got '{v}'"))?;
        if n == 0 {
            bail!("FSL_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(config: PathBuf, output: Option<PathBuf>, strict: bool) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(dir) = output {
        cfg.output_dir = dir;
    }
    let result = run_sweep(&cfg)?;
    let paths = emit_outputs(&result, &cfg.output_dir)?;
    for k in result.kappas() {
        println!(
            "kappa={k:e} delta*={:.4} argmin={}",
            result.delta_star(k).unwrap_or(f64::NAN),
            result
                .empirical_argmin(k)
                .map(|d| format!("{d:.2}"))
                .unwrap_or_else(|| "none".into())
        );
    }
    println!("wrote {}", paths.csv.display());
    let failed = result.rows.iter().filter(|r| !r.converged).count();
    if failed > 0 {
        log::warn!("{failed} of {} cells did not converge", result.rows.len());
        if strict {
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn calibrate(
    case: TestCase,
    disc: Discretization,
    kappa: Option<f64>,
    resolution: Option<usize>,
    step: f64,
) -> Result<()> {
    let kappa = kappa.unwrap_or_else(|| {
        case.default_kappas()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    });
    let grid = DeltaGrid::Range {
        start: 1.0,
        stop: 2.5,
        step,
    };
    let settings = CalibrationSettings {
        resolution,
        ..CalibrationSettings::default()
    };
    let res = calibrate_kdr(case, disc, kappa, &grid, &settings)?;
    for c in &res.candidates {
        println!(
            "c={:.2} delta*={:.4} argmin={}",
            c.c,
            c.delta_star,
            c.empirical_argmin
                .map(|d| format!("{d:.2}"))
                .unwrap_or_else(|| "none".into())
        );
    }
    println!(
        "{case}: c = {:.2}, K_dr = {:e}{}",
        res.c,
        res.k_dr,
        if res.matched { "" } else { " (nearest, no exact match)" }
    );
    Ok(())
}

fn mandel_check() -> Result<ExitCode> {
    let params = MandelParameters::default();
    let solution = MandelSolution::new(params)?;
    let mut ok = true;
    let mut report = |name: &str, pass: bool, detail: String| {
        ok &= pass;
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };
    let worst_edge = [0.0, 1.0, 10.0, 50.0, 500.0]
        .iter()
        .map(|&t| solution.pressure(params.a, t).abs())
        .fold(0.0, f64::max);
    report("p(a, t) = 0", worst_edge == 0.0, format!("max |p(a,t)| = {worst_edge:e}"));
    for t in [10.0, 50.0] {
        let d = solution.truncation_defect(t)?;
        report(
            &format!("doubled truncation at t = {t}"),
            d <= 1e-10,
            format!("relative change {d:e}"),
        );
    }
    let roots = mandel_roots(params.nu, params.nu_u, params.n_terms)?;
    let raw = (0..roots.alphas.len()).map(|n| roots.residual(n)).fold(0.0, f64::max);
    let bound = (0..roots.alphas.len())
        .map(|n| roots.error_bound(n) / roots.alphas[n])
        .fold(0.0, f64::max);
    // near the poles of tan the residual is dominated by rounding of α itself
    println!("INFO root residuals |tan a - c a|: max {raw:e}");
    report(
        "relative root error bound < 1e-14",
        bound < 1e-14,
        format!("max {bound:e}"),
    );
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn infsup(disc: Discretization, h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 1.0) {
        bail!("h must lie in (0, 1]");
    }
    let n = (1.0 / h).round() as usize;
    if ((n as f64) * h - 1.0).abs() > 1e-9 {
        bail!("1/h must be an integer, got h = {h}");
    }
    let case = TestCase::UnitSquareSetup1;
    let kappa = case.default_kappas()[0];
    let system = BiotSystem::new(build_problem(case, disc, kappa, Some(n), &Modification::default())?)?;
    let (u, p) = (system.u_space(), system.p_space());
    let (mu, lambda, _, _) = case.material();
    let dirichlet = system.dirichlet_u(system.problem().time(1))?;
    let est = estimate_inf_sup(u, p, mu, lambda, dirichlet.indices())?;
    println!(
        "{} h=1/{n}: gamma = {:.6e}, beta estimate = {:.6e}",
        disc.name(),
        est.gamma,
        est.beta_estimate
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|()| match cli.command {
        Command::Run {
            config,
            output,
            strict,
        } => run(config, output, strict),
        Command::Calibrate {
            case,
            disc,
            kappa,
            resolution,
            step,
        } => calibrate(case, disc, kappa, resolution, step).map(|()| ExitCode::SUCCESS),
        Command::MandelCheck => mandel_check(),
        Command::Infsup { disc, h } => infsup(disc, h).map(|()| ExitCode::SUCCESS),
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

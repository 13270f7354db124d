use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cases::TestCase;
use crate::biot::Discretization;
use crate::error::{invalid, io_err, FslError, Result};

/// Expression for the drained bulk modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KdrExpression {
    /// The per-case calibrated `c μ + λ`.
    Calibrated,
    MuPlusLambda,
    /// `2μ/d + λ`
    TwoMuOverDPlusLambda(u32),
    /// `c μ + λ` with an explicit `c`.
    Coefficient(f64),
}

impl KdrExpression {
    pub fn evaluate(self, case: TestCase) -> f64 {
        let (mu, lambda, _, _) = case.material();
        match self {
            Self::Calibrated => case.k_dr(case.calibrated_c()),
            Self::MuPlusLambda => mu + lambda,
            Self::TwoMuOverDPlusLambda(d) => 2.0 * mu / d as f64 + lambda,
            Self::Coefficient(c) => c * mu + lambda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    EqualKdr,
    FromInfSupEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RandomMode {
    #[serde(rename = "none", alias = "None")]
    None,
    M1,
    M2,
    M3,
    M4,
    M5,
}

/// Either an explicit list or an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl DeltaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Self::List(v) => v.clone(),
            Self::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Err(invalid(format!("bad delta range {start}..{stop} step {step}")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..n)
                    .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
                    .collect()
            }
        };
        if v.is_empty() {
            return Err(invalid("delta grid is empty"));
        }
        if v.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(invalid("delta values must be positive"));
        }
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("delta grid must be strictly increasing"));
        }
        Ok(v)
    }

    /// Largest spacing between consecutive values.
    pub fn resolution(&self) -> Result<f64> {
        let v = self.values()?;
        Ok(v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max))
    }
}

impl Default for DeltaGrid {
    fn default() -> Self {
        Self::Range {
            start: 1.0,
            stop: 2.5,
            step: 0.05,
        }
    }
}

fn default_realizations() -> usize {
    20
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    500
}

fn default_scale() -> f64 {
    1.0
}

fn default_output() -> PathBuf {
    PathBuf::from("fsl-output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub test_case: TestCase,
    #[serde(default = "default_disc")]
    pub discretization: Discretization,
    /// Defaults to the case's permeability list.
    #[serde(default)]
    pub kappa_list: Option<Vec<f64>>,
    #[serde(default)]
    pub delta_grid: DeltaGrid,
    #[serde(default = "default_kdr")]
    pub k_dr: KdrExpression,
    #[serde(default = "default_beta")]
    pub beta_mode: BetaMode,
    #[serde(default = "default_random")]
    pub random_mode: RandomMode,
    #[serde(default = "default_realizations")]
    pub num_realizations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Multiplier on the random draws; 0 collapses them to zero.
    #[serde(default = "default_scale")]
    pub random_scale: f64,
    #[serde(default = "default_tol")]
    pub eps_u_rel: f64,
    #[serde(default = "default_tol")]
    pub eps_p_rel: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Mesh resolution override.
    #[serde(default)]
    pub resolution: Option<usize>,
    /// Poincaré constant override.
    #[serde(default)]
    pub c_omega: Option<f64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_disc() -> Discretization {
    Discretization::P2P1
}
fn default_kdr() -> KdrExpression {
    KdrExpression::Calibrated
}
fn default_beta() -> BetaMode {
    BetaMode::EqualKdr
}
fn default_random() -> RandomMode {
    RandomMode::None
}

impl ExperimentConfig {
    pub fn new(test_case: TestCase, discretization: Discretization) -> Self {
        Self {
            test_case,
            discretization,
            kappa_list: None,
            delta_grid: DeltaGrid::default(),
            k_dr: KdrExpression::Calibrated,
            beta_mode: BetaMode::EqualKdr,
            random_mode: RandomMode::None,
            num_realizations: default_realizations(),
            seed: 0,
            random_scale: 1.0,
            eps_u_rel: default_tol(),
            eps_p_rel: default_tol(),
            max_iter: default_max_iter(),
            resolution: None,
            c_omega: None,
            output_dir: default_output(),
        }
    }

    pub fn kappas(&self) -> Vec<f64> {
        self.kappa_list
            .clone()
            .unwrap_or_else(|| self.test_case.default_kappas())
    }

    pub fn validate(&self) -> Result<()> {
        self.delta_grid.values()?;
        let kappas = self.kappas();
        if kappas.is_empty() || kappas.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(invalid("kappa_list must hold positive values"));
        }
        if self.num_realizations == 0 {
            return Err(invalid("num_realizations must be at least 1"));
        }
        if !(self.eps_u_rel > 0.0 && self.eps_p_rel > 0.0) || self.max_iter == 0 {
            return Err(invalid("tolerances must be positive and max_iter at least 1"));
        }
        if !(self.random_scale >= 0.0 && self.random_scale.is_finite()) {
            return Err(invalid("random_scale must be non-negative"));
        }
        if let Some(c) = self.c_omega {
            if !(c > 0.0) {
                return Err(invalid("c_omega override must be positive"));
            }
        }
        if let KdrExpression::TwoMuOverDPlusLambda(0) = self.k_dr {
            return Err(invalid("dimension must be positive"));
        }
        if self.k_dr.evaluate(self.test_case) <= 0.0 {
            return Err(invalid("K_dr must be positive"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| FslError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FslError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_grid_is_clean() {
        let g = DeltaGrid::default().values().unwrap();
        assert_eq!(g.len(), 31);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[19], 1.95);
        assert_eq!(g[30], 2.5);
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            test_case = "unit_square_setup2"
            discretization = "P1P1"
            kappa_list = [1e-15, 1e-12]
            delta_grid = { start = 1.0, stop = 2.0, step = 0.25 }
            k_dr = { coefficient = 1.3 }
            random_mode = "M3"
            seed = 7
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.test_case, TestCase::UnitSquareSetup2);
        assert_eq!(cfg.delta_grid.values().unwrap(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert_eq!(cfg.k_dr, KdrExpression::Coefficient(1.3));
        assert_eq!(cfg.num_realizations, 20);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(ExperimentConfig::from_toml_str("test_case = \"cube\"").is_err());
        assert!(ExperimentConfig::from_toml_str(
            "test_case = \"mandel\"\ndelta_grid = [2.0, 1.0]"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml_str(
            "test_case = \"mandel\"\nnum_realizations = 0"
        )
        .is_err());
        assert!(ExperimentConfig::from_toml_str("test_case = \"mandel\"\nbogus = 1").is_err());
    }
}

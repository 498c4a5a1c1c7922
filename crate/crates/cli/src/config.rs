use std::path::Path;

use advice_learn_core::pipeline::PipelineConstants;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// How the advice vector is derived from the true means `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AdviceModel {
    /// `q = p`.
    Exact,
    /// `t` random coordinates moved by `magnitude` each.
    Sparse { t: usize, magnitude: f64 },
    /// Every coordinate moved by `l1_budget / d`.
    Dense { l1_budget: f64 },
    /// Each coordinate sent to the farther endpoint of `[0, 1]`.
    Flip,
    /// A lower-bound pair; `p` comes from the family as well.
    Adversarial {
        family: Family,
        #[serde(default)]
        lambda: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Unbalanced,
    Balanced,
}

impl AdviceModel {
    pub fn label(&self) -> String {
        match self {
            AdviceModel::Exact => "exact".into(),
            AdviceModel::Sparse { t, magnitude } => format!("sparse(t={t},magnitude={magnitude})"),
            AdviceModel::Dense { l1_budget } => format!("dense(l1={l1_budget})"),
            AdviceModel::Flip => "flip".into(),
            AdviceModel::Adversarial { family, lambda } => match (family, lambda) {
                (Family::Unbalanced, _) => "adversarial(unbalanced)".into(),
                (Family::Balanced, l) => format!("adversarial(balanced,lambda={})", l.unwrap_or(f64::NAN)),
            },
        }
    }
}

fn default_delta() -> f64 {
    1.0 / 3.0
}

fn default_trials() -> usize {
    1
}

fn default_advice() -> Vec<AdviceModel> {
    vec![AdviceModel::Exact]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub dims: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub etas: Vec<f64>,
    pub taus: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_advice", rename = "advice")]
    pub advice_models: Vec<AdviceModel>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub constants: PipelineConstants,
}

fn bad(field: impl std::fmt::Display, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn nonempty<T>(field: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(bad(field, "must list at least one value"));
    }
    Ok(())
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let sweep: SweepSpec = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        sweep.validate()?;
        Ok(sweep)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        nonempty("dims", &self.dims)?;
        nonempty("epsilons", &self.epsilons)?;
        nonempty("etas", &self.etas)?;
        nonempty("taus", &self.taus)?;
        nonempty("advice", &self.advice_models)?;
        for (i, &d) in self.dims.iter().enumerate() {
            if d < 1 {
                return Err(bad(format!("dims[{i}]"), "must be at least 1"));
            }
        }
        for (i, &e) in self.epsilons.iter().enumerate() {
            if !(e > 0.0 && e <= 1.0) {
                return Err(bad(format!("epsilons[{i}]"), format!("{e} must lie in (0, 1]")));
            }
        }
        for (i, &e) in self.etas.iter().enumerate() {
            if !(0.0..=1.0 / 3.0).contains(&e) {
                return Err(bad(format!("etas[{i}]"), format!("{e} must lie in [0, 1/3]")));
            }
        }
        for (i, &t) in self.taus.iter().enumerate() {
            if !(t > 0.0 && t <= 0.5) {
                return Err(bad(format!("taus[{i}]"), format!("{t} must lie in (0, 1/2]")));
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(bad("delta", format!("{} must lie in (0, 1)", self.delta)));
        }
        if self.trials < 1 {
            return Err(bad("trials", "must be at least 1"));
        }
        for (i, m) in self.advice_models.iter().enumerate() {
            let field = format!("advice[{i}]");
            match *m {
                AdviceModel::Sparse { t, magnitude } => {
                    if t < 1 || self.dims.iter().any(|&d| t > d) {
                        return Err(bad(format!("{field}.t"), format!("{t} must lie in [1, d]")));
                    }
                    if !(magnitude >= 0.0 && magnitude < 1.0) {
                        return Err(bad(format!("{field}.magnitude"), format!("{magnitude} must lie in [0, 1)")));
                    }
                }
                AdviceModel::Dense { l1_budget } => {
                    if !(l1_budget >= 0.0 && l1_budget.is_finite()) {
                        return Err(bad(format!("{field}.l1_budget"), format!("{l1_budget} must be >= 0")));
                    }
                }
                AdviceModel::Adversarial { family: Family::Balanced, lambda } => match lambda {
                    Some(l) if l > 0.0 && l.is_finite() => {}
                    _ => return Err(bad(format!("{field}.lambda"), "balanced family needs lambda > 0")),
                },
                _ => {}
            }
        }
        let c = &self.constants;
        for (name, v) in [
            ("c", c.c),
            ("threshold_factor", c.threshold_factor),
            ("lasso_constant", c.lasso_constant),
            ("baseline_constant", c.baseline_constant),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(format!("constants.{name}"), format!("{v} must be positive")));
            }
        }
        if !(c.sample_multiplier >= 1.0 && c.sample_multiplier.is_finite()) {
            return Err(bad("constants.sample_multiplier", format!("{} must be >= 1", c.sample_multiplier)));
        }
        Ok(())
    }

    /// Grid cells in row-major order over (d, ε, η, τ, advice).
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &d in &self.dims {
            for &epsilon in &self.epsilons {
                for &eta in &self.etas {
                    for &tau in &self.taus {
                        for advice in &self.advice_models {
                            out.push(Cell {
                                d,
                                epsilon,
                                eta,
                                tau,
                                advice: advice.clone(),
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub d: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub tau: f64,
    pub advice: AdviceModel,
}

//! TOML experiment configuration and validation. Every validation error
//! names the offending field so the CLI can exit with a usable message.

use crate::diagnostics::{LambdaMode, SinkhornParams};
use crate::dynamics::{IntegratorParams, KineticSpec};
use crate::model::{
    load_benchmark_means, FunnelTarget, GaussianMixtureTarget, L1ShellTarget, StdGaussianTarget,
    TargetDistribution,
};
use crate::samplers::SamplerKind;
use crate::tuning::TunerSettings;
use crate::{Error, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetSection,
    #[serde(default)]
    pub sampler: Option<SamplerSection>,
    pub run: RunSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Sampler list for `compare`.
    #[serde(default)]
    pub compare: Vec<SamplerSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub name: String,
    pub dim: Option<usize>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub c: Option<f64>,
    pub b: Option<f64>,
    pub variance: Option<f64>,
    pub means_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub kind: SamplerKind,
    pub label: Option<String>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub steps: Option<usize>,
    #[serde(default)]
    pub tune: bool,
    pub delta: Option<f64>,
    pub sim_length: Option<f64>,
    #[serde(default)]
    pub reflect_midpoint: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub iterations: usize,
    #[serde(default)]
    pub warmup: usize,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default)]
    pub seed: u64,
    pub initial: Option<Vec<f64>>,
}

fn default_chains() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub sinkhorn_lambda: f64,
    pub sinkhorn_lambda_mode: LambdaModeConfig,
    pub sinkhorn_max_iter: usize,
    pub sinkhorn_tol: f64,
    pub max_lag: usize,
    pub reference_samples: usize,
    pub subsample: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaModeConfig {
    Absolute,
    Relative,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            sinkhorn_lambda: 0.05,
            sinkhorn_lambda_mode: LambdaModeConfig::Relative,
            sinkhorn_max_iter: 1000,
            sinkhorn_tol: 1e-9,
            max_lag: 50,
            reference_samples: 5000,
            subsample: 2000,
        }
    }
}

impl MetricsSection {
    pub fn sinkhorn_params(&self) -> SinkhornParams {
        SinkhornParams {
            lambda: self.sinkhorn_lambda,
            lambda_mode: match self.sinkhorn_lambda_mode {
                LambdaModeConfig::Absolute => LambdaMode::Absolute,
                LambdaModeConfig::Relative => LambdaMode::Relative,
            },
            max_iter: self.sinkhorn_max_iter,
            tol: self.sinkhorn_tol,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.iterations < 1 {
            return Err(Error::Config("run.iterations must be >= 1".into()));
        }
        if self.run.chains < 1 {
            return Err(Error::Config("run.chains must be >= 1".into()));
        }
        if let Some(sampler) = &self.sampler {
            sampler.validate("sampler")?;
        }
        for (i, sampler) in self.compare.iter().enumerate() {
            sampler.validate(&format!("compare[{i}]"))?;
        }
        Ok(())
    }

    pub fn build_target(&self) -> Result<Box<dyn TargetDistribution>> {
        self.target.build()
    }
}

impl TargetSection {
    fn dim_or(&self, default: usize) -> usize {
        self.dim.unwrap_or(default)
    }

    pub fn build(&self) -> Result<Box<dyn TargetDistribution>> {
        let target: Box<dyn TargetDistribution> = match self.name.as_str() {
            "std_gaussian" => Box::new(StdGaussianTarget::new(self.dim_or(2))),
            "bimodal_scaled" => Box::new(GaussianMixtureTarget::bimodal_scaled(self.dim_or(2))?),
            "anisotropic" => Box::new(GaussianMixtureTarget::anisotropic(self.dim_or(2))?),
            "bivariate_anisotropic" => Box::new(GaussianMixtureTarget::bivariate_example()?),
            "isotropic_pair" => Box::new(GaussianMixtureTarget::isotropic_pair(
                self.b.unwrap_or(3.0),
                self.dim_or(2),
                self.variance.unwrap_or(1.0),
            )?),
            "funnel" => Box::new(FunnelTarget::new(
                self.mu.unwrap_or(3.0),
                self.sigma.unwrap_or(1.0),
                self.c.unwrap_or(1.0),
            )),
            "concentric_l1" => Box::new(L1ShellTarget::concentric(self.dim_or(2))?),
            "nested_l1" => Box::new(L1ShellTarget::nested(self.dim_or(2))?),
            "benchmark" => {
                let path = self.means_file.as_ref().ok_or_else(|| {
                    Error::Config("target.means_file is required for the benchmark target".into())
                })?;
                Box::new(load_benchmark_means(path)?)
            }
            other => {
                return Err(Error::Config(format!(
                    "target.name {other:?} unknown; valid: std_gaussian, bimodal_scaled, \
                     anisotropic, bivariate_anisotropic, isotropic_pair, funnel, concentric_l1, \
                     nested_l1, benchmark"
                )))
            }
        };
        Ok(target)
    }
}

impl SamplerSection {
    pub fn validate(&self, ctx: &str) -> Result<()> {
        if self.tune {
            if let Some(delta) = self.delta {
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::Config(format!(
                        "{ctx}.delta must lie in (0, 1), got {delta}"
                    )));
                }
            }
            if let Some(t) = self.sim_length {
                if !(t > 0.0) {
                    return Err(Error::Config(format!(
                        "{ctx}.sim_length must be positive, got {t}"
                    )));
                }
            }
        } else {
            let eps = self
                .epsilon
                .ok_or_else(|| Error::Config(format!("{ctx}.epsilon is required when tune = false")))?;
            if !(eps > 0.0) {
                return Err(Error::Config(format!("{ctx}.epsilon must be positive, got {eps}")));
            }
            let steps = self
                .steps
                .ok_or_else(|| Error::Config(format!("{ctx}.steps is required when tune = false")))?;
            if steps < 2 {
                return Err(Error::Config(format!("{ctx}.steps must be >= 2, got {steps}")));
            }
            if self.kind == SamplerKind::Rahmc {
                let gamma = self.gamma.ok_or_else(|| {
                    Error::Config(format!("{ctx}.gamma is required for rahmc when tune = false"))
                })?;
                if !(gamma >= 0.0) {
                    return Err(Error::Config(format!(
                        "{ctx}.gamma must be >= 0, got {gamma}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn label(&self, index: usize) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| format!("{}_{index}", self.kind))
    }

    /// Initial integrator parameters; placeholders when tuning will replace
    /// them during warm-up.
    pub fn initial_params(&self) -> Result<IntegratorParams> {
        if self.tune {
            IntegratorParams::new(
                self.epsilon.unwrap_or(1.0),
                self.steps.unwrap_or(2),
                self.gamma.unwrap_or(1.0),
            )
        } else {
            IntegratorParams::new(
                self.epsilon.expect("validated"),
                self.steps.expect("validated"),
                match self.kind {
                    SamplerKind::Hmc => 0.0,
                    SamplerKind::Rahmc => self.gamma.expect("validated"),
                },
            )
        }
    }

    pub fn tuner_settings(&self) -> Option<TunerSettings> {
        if self.tune {
            Some(TunerSettings::new(
                self.delta.unwrap_or(0.6),
                self.sim_length.unwrap_or(15.0),
            ))
        } else {
            None
        }
    }

    pub fn sampler_config(&self, dim: usize) -> Result<crate::samplers::SamplerConfig> {
        let mut config = crate::samplers::SamplerConfig::new(
            self.kind,
            self.initial_params()?,
            KineticSpec::standard(dim),
        );
        config.reflect_midpoint = self.reflect_midpoint;
        Ok(config)
    }
}

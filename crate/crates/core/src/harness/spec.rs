//! Experiment description and configuration loading.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchmarks::SchemeId;
use crate::config::{
    ChannelConfig, DroConfig, GeometryConfig, ImpairmentConfig, LayoutConfig, Stage1Config,
    SystemConfig,
};
use crate::error::{ConfigError, Result};

/// Which experiment a run reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Deployment rules compared under the same robust beamformer.
    Deploy,
    /// Beamformers compared at the same robust deployment.
    Robust,
    /// Robust vs. nominal beamforming across impairment severities.
    Sweep,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Deploy => "deploy",
            Experiment::Robust => "robust",
            Experiment::Sweep => "sweep",
        }
    }
}

/// Uncertainty grid: RIS jitter concentration × CSI error correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub jitter_kappa: Vec<f64>,
    pub csi_correlation: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            jitter_kappa: vec![2.0, 5.0, 10.0],
            csi_correlation: vec![0.5, 0.75, 0.9],
        }
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub jitter_kappa: f64,
    pub csi_correlation: f64,
}

impl SweepPoint {
    pub fn label(&self) -> String {
        format!("kappa={};rho={}", self.jitter_kappa, self.csi_correlation)
    }

    pub fn apply(&self, cfg: &SystemConfig) -> SystemConfig {
        let mut c = cfg.clone();
        c.impairments.jitter_kappa = self.jitter_kappa;
        c.impairments.csi_correlation = self.csi_correlation;
        c
    }
}

impl SweepSpec {
    /// Grid points, κ-major.
    pub fn points(&self) -> Vec<SweepPoint> {
        self.jitter_kappa
            .iter()
            .flat_map(|&k| {
                self.csi_correlation.iter().map(move |&r| SweepPoint {
                    jitter_kappa: k,
                    csi_correlation: r,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Schemes to run; those that do not belong to an experiment are skipped.
    pub schemes: Vec<SchemeId>,
    pub trials: usize,
    /// Evaluation slots per deployment in the deployment experiment.
    pub deploy_eval_slots: usize,
    /// Slots per trial in the robustness experiment.
    pub robust_slots: usize,
    /// Slots per trial and sweep point.
    pub sweep_slots: usize,
    pub outage_threshold: f64,
    pub sweep: SweepSpec,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            schemes: SchemeId::ALL.to_vec(),
            trials: 3,
            deploy_eval_slots: 1000,
            robust_slots: 1500,
            sweep_slots: 500,
            outage_threshold: 2.5,
            sweep: SweepSpec::default(),
            seed: 42,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Validation(m));
        if self.trials < 1 {
            return fail("experiment.trials must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return fail("experiment.schemes must not be empty".into());
        }
        if self.deploy_eval_slots < 2 || self.robust_slots < 2 || self.sweep_slots < 2 {
            return fail("experiment slot counts must be at least 2".into());
        }
        if !self.outage_threshold.is_finite() {
            return fail("experiment.outage_threshold must be finite".into());
        }
        let s = &self.sweep;
        if s.jitter_kappa.is_empty() || s.csi_correlation.is_empty() {
            return fail("sweep axes must not be empty".into());
        }
        if s.jitter_kappa.iter().any(|k| !(*k >= 0.0)) {
            return fail("sweep jitter_kappa values must be non-negative".into());
        }
        if s.csi_correlation.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return fail("sweep csi_correlation values must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Evaluation slots per trial of `experiment`.
    pub fn eval_slots(&self, experiment: Experiment) -> usize {
        match experiment {
            Experiment::Deploy => self.deploy_eval_slots,
            Experiment::Robust => self.robust_slots,
            Experiment::Sweep => self.sweep_slots,
        }
    }

    /// Scenario horizon each trial needs for `experiment`, Stage 1 included.
    pub fn slots_for(&self, experiment: Experiment, cfg: &SystemConfig) -> usize {
        self.eval_slots(experiment)
            .max(cfg.stage1.fine_slots)
            .max(cfg.stage1.presamples)
    }
}

/// On-disk layout: the system sections plus `[experiment]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub system: LayoutConfig,
    pub geometry: GeometryConfig,
    pub channel: ChannelConfig,
    pub impairments: ImpairmentConfig,
    pub dro: DroConfig,
    pub stage1: Stage1Config,
    pub experiment: ExperimentSpec,
}

impl ConfigFile {
    pub fn split(self) -> (SystemConfig, ExperimentSpec) {
        (
            SystemConfig {
                system: self.system,
                geometry: self.geometry,
                channel: self.channel,
                impairments: self.impairments,
                dro: self.dro,
                stage1: self.stage1,
            },
            self.experiment,
        )
    }

    pub fn join(cfg: &SystemConfig, spec: &ExperimentSpec) -> Self {
        Self {
            system: cfg.system.clone(),
            geometry: cfg.geometry.clone(),
            channel: cfg.channel.clone(),
            impairments: cfg.impairments.clone(),
            dro: cfg.dro.clone(),
            stage1: cfg.stage1.clone(),
            experiment: spec.clone(),
        }
    }
}

/// Parse and validate a TOML configuration document.
pub fn parse_config(text: &str) -> Result<(SystemConfig, ExperimentSpec)> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let (cfg, spec) = file.split();
    cfg.validate()?;
    spec.validate()?;
    Ok((cfg, spec))
}

/// Read, parse and validate a configuration file.
pub fn load_config(path: &Path) -> Result<(SystemConfig, ExperimentSpec)> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(ConfigError::NotFound(path.to_path_buf()).into())
        }
        Err(e) => {
            return Err(crate::error::Error::Io {
                path: path.to_path_buf(),
                source: e,
            })
        }
    };
    parse_config(&text)
}

//! Flat JSON run configuration. Powers are in dBm, ratios in dB; conversion
//! to SI units happens here and nowhere else.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dinkelbach::{LoopOrder, OuterOptions};
use crate::harness::{SchemeSelection, SweepConfig};
use crate::innersolver::{InnerOptions, StepRule};
use crate::sysmodel::{db_to_lin, dbm_to_watt, PathLossModel, SystemParams};
use crate::ParamError;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(#[from] ParamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRuleName {
    ScaledNewton,
    Diminishing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub bandwidth_hz: f64,
    pub n_subcarriers: usize,
    pub sigma_za_dbm: f64,
    pub sigma_zs_dbm: f64,
    /// `null` disables interference.
    pub inr_db: Option<f64>,
    pub p_c_dbm: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub p_max_dbm: f64,
    pub p_pg_dbm: f64,
    /// `null` means no lower harvesting requirement.
    pub p_min_req_dbm: Option<f64>,
    pub p_max_req_dbm: f64,
    pub r_min_bps: f64,
    pub carrier_hz: f64,
    pub distance_m: f64,
    pub antenna_gain_db: f64,
    pub shadowing_db: f64,
    pub rician_k_db: f64,
    pub path_loss_breakpoint_m: f64,
    pub path_loss_exponent_near: f64,
    pub path_loss_exponent_far: f64,
    pub rho_grid_m: usize,

    pub l_max: usize,
    pub outer_eps: f64,
    pub loop_order: LoopOrder,
    pub inner_max_iters: usize,
    pub inner_tol_residual: f64,
    pub inner_tol_dual: f64,
    pub step_rule: StepRuleName,
    /// Diminishing-rule constants `c_u`; `null` selects them from curvature.
    pub step_c: Option<[f64; 5]>,

    pub p_max_dbm_grid: Vec<f64>,
    pub inr_db_list: Vec<f64>,
    pub n_trials: usize,
    pub scheme: SchemeSelection,
    pub convergence_p_max_dbm: Vec<f64>,
    pub convergence_inr_db: Vec<f64>,
    pub convergence_trials: usize,
    pub verify_instances: usize,
    pub verify_grid_steps_2: usize,
    pub verify_grid_steps_4: usize,
    pub verify_rho_grid_m: usize,

    pub seed: u64,
    pub output_csv: Option<PathBuf>,
    pub output_svg: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 1.0e6,
            n_subcarriers: 128,
            sigma_za_dbm: -128.0,
            sigma_zs_dbm: -125.0,
            inr_db: Some(10.0),
            p_c_dbm: 40.0,
            epsilon: 2.6316,
            eta: 0.8,
            p_max_dbm: 22.0,
            p_pg_dbm: 50.0,
            p_min_req_dbm: Some(0.0),
            p_max_req_dbm: 20.0,
            r_min_bps: 10.0e6,
            carrier_hz: 470.0e6,
            distance_m: 10.0,
            antenna_gain_db: 40.0,
            shadowing_db: 0.0,
            rician_k_db: 6.0,
            path_loss_breakpoint_m: 5.0,
            path_loss_exponent_near: 2.0,
            path_loss_exponent_far: 3.5,
            rho_grid_m: 1000,
            l_max: 20,
            outer_eps: 1e-4,
            loop_order: LoopOrder::RhoInside,
            inner_max_iters: 5000,
            inner_tol_residual: 1e-6,
            inner_tol_dual: 1e-7,
            step_rule: StepRuleName::ScaledNewton,
            step_c: None,
            p_max_dbm_grid: vec![6.0, 10.0, 14.0, 18.0, 22.0, 26.0, 30.0, 36.0],
            inr_db_list: vec![0.0, 10.0, 50.0],
            n_trials: 1000,
            scheme: SchemeSelection::Both,
            convergence_p_max_dbm: vec![18.0, 22.0],
            convergence_inr_db: vec![10.0, 50.0],
            convergence_trials: 1000,
            verify_instances: 50,
            verify_grid_steps_2: 1000,
            verify_grid_steps_4: 60,
            verify_rho_grid_m: 20,
            seed: 1,
            output_csv: None,
            output_svg: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let cfg = Self::from_json(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.to_owned(),
                source,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| ConfigError::Parse {
            path: PathBuf::from("<config>"),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let finite = [
            ("sigma_za_dbm", self.sigma_za_dbm),
            ("sigma_zs_dbm", self.sigma_zs_dbm),
            ("p_c_dbm", self.p_c_dbm),
            ("p_max_dbm", self.p_max_dbm),
            ("p_pg_dbm", self.p_pg_dbm),
            ("p_max_req_dbm", self.p_max_req_dbm),
            ("antenna_gain_db", self.antenna_gain_db),
            ("shadowing_db", self.shadowing_db),
            ("outer_eps", self.outer_eps),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(ParamError::invalid(field, "must be finite"));
            }
        }
        for (field, v) in [("inr_db", self.inr_db), ("p_min_req_dbm", self.p_min_req_dbm)] {
            if v.is_some_and(|v| !v.is_finite()) {
                return Err(ParamError::invalid(field, "must be finite or null"));
            }
        }
        if self.l_max == 0 {
            return Err(ParamError::invalid("l_max", "must be at least 1"));
        }
        if self.outer_eps <= 0.0 {
            return Err(ParamError::invalid("outer_eps", "must be positive"));
        }
        if self.inner_max_iters == 0 {
            return Err(ParamError::invalid("inner_max_iters", "must be at least 1"));
        }
        if !(self.inner_tol_residual > 0.0) || !(self.inner_tol_dual > 0.0) {
            return Err(ParamError::invalid("inner_tol_residual", "tolerances must be positive"));
        }
        if let Some(c) = self.step_c {
            if c.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
                return Err(ParamError::invalid("step_c", "constants must be positive"));
            }
        }
        if self.n_trials == 0 || self.convergence_trials == 0 {
            return Err(ParamError::invalid("n_trials", "must be at least 1"));
        }
        if self.p_max_dbm_grid.iter().chain(&self.inr_db_list).any(|v| !v.is_finite()) {
            return Err(ParamError::invalid("p_max_dbm_grid", "sweep axes must be finite"));
        }
        if self.verify_grid_steps_2 == 0 || self.verify_grid_steps_4 == 0 || self.verify_rho_grid_m == 0 {
            return Err(ParamError::invalid("verify_grid_steps_2", "grids must be non-empty"));
        }
        self.system_params().validate()
    }

    pub fn system_params(&self) -> SystemParams {
        SystemParams {
            bandwidth_hz: self.bandwidth_hz,
            n_subcarriers: self.n_subcarriers,
            sigma_za_w: dbm_to_watt(self.sigma_za_dbm),
            sigma_zs_w: dbm_to_watt(self.sigma_zs_dbm),
            inr_db: self.inr_db.unwrap_or(f64::NEG_INFINITY),
            p_c_w: dbm_to_watt(self.p_c_dbm),
            epsilon: self.epsilon,
            eta: self.eta,
            p_max_w: dbm_to_watt(self.p_max_dbm),
            p_pg_w: dbm_to_watt(self.p_pg_dbm),
            p_min_req_w: self.p_min_req_dbm.map_or(0.0, dbm_to_watt),
            p_max_req_w: dbm_to_watt(self.p_max_req_dbm),
            r_min_bps: self.r_min_bps,
            carrier_hz: self.carrier_hz,
            distance_m: self.distance_m,
            antenna_gain_db: self.antenna_gain_db,
            shadowing_lin: db_to_lin(self.shadowing_db),
            rician_k_db: self.rician_k_db,
            rho_grid_m: self.rho_grid_m,
            path_loss: PathLossModel {
                breakpoint_m: self.path_loss_breakpoint_m,
                exponent_near: self.path_loss_exponent_near,
                exponent_far: self.path_loss_exponent_far,
            },
        }
    }

    pub fn outer_options(&self) -> OuterOptions {
        OuterOptions {
            l_max: self.l_max,
            eps: self.outer_eps,
            rho_grid_m: Some(self.rho_grid_m),
            inner: InnerOptions {
                max_iters: self.inner_max_iters,
                step_rule: match self.step_rule {
                    StepRuleName::ScaledNewton => StepRule::ScaledNewton,
                    StepRuleName::Diminishing => StepRule::Diminishing { c: self.step_c },
                },
                tol_residual: self.inner_tol_residual,
                tol_dual: self.inner_tol_dual,
                p_cap_w: None,
            },
            loop_order: self.loop_order,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            params: self.system_params(),
            p_max_dbm_grid: self.p_max_dbm_grid.clone(),
            inr_db_list: self.inr_db_list.clone(),
            n_trials: self.n_trials,
            base_seed: self.seed,
            scheme: self.scheme,
            outer: self.outer_options(),
        }
    }
}

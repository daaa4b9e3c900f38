//! Normalized errors, step acceptance, active-set selection and step-size
//! proposals.

use crate::problem::ActivePartition;

/// Floor applied to error components before dividing by them.
const ERROR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("step size proposal needs a nonempty active set")]
    EmptyActiveSet,
    #[error("invalid controller setting: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSpec {
    pub tau_r: f64,
    pub tau_a: f64,
}

impl ToleranceSpec {
    pub fn new(tau_r: f64, tau_a: f64) -> Result<Self, ControllerError> {
        let t = Self { tau_r, tau_a };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.tau_r >= 0.0) || !(self.tau_a > 0.0) || !self.tau_r.is_finite() || !self.tau_a.is_finite() {
            return Err(ControllerError::InvalidConfig(format!(
                "tolerances need tau_r >= 0 and tau_a > 0, got ({}, {})",
                self.tau_r, self.tau_a
            )));
        }
        Ok(())
    }

    /// `tau_r |u| + tau_a`.
    pub fn scale(&self, u: f64) -> f64 {
        self.tau_r * u.abs() + self.tau_a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub delta: f64,
    pub nu: f64,
    pub order: u32,
    pub h_min: f64,
    pub h_max: f64,
    pub max_growth: f64,
    pub max_rejections: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            nu: 0.9,
            order: 2,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            max_growth: 5.0,
            max_rejections: 20,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |msg: String| Err(ControllerError::InvalidConfig(msg));
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta {} not in (0, 1]", self.delta));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return bad(format!("nu {} not in (0, 1)", self.nu));
        }
        if self.order == 0 {
            return bad("order must be positive".into());
        }
        if !(self.h_min > 0.0 && self.h_min < self.h_max) {
            return bad(format!("need 0 < h_min < h_max, got {} and {}", self.h_min, self.h_max));
        }
        if !(self.max_growth > 1.0) {
            return bad(format!("max_growth {} must exceed 1", self.max_growth));
        }
        Ok(())
    }
}

/// `eta_i = |eps_i| / (tau_r |u_hat_i| + tau_a)`.
pub fn normalized_errors(eps: &[f64], u_hat: &[f64], tol: &ToleranceSpec) -> Result<Vec<f64>, ControllerError> {
    if eps.len() != u_hat.len() {
        return Err(ControllerError::DimensionMismatch {
            expected: eps.len(),
            actual: u_hat.len(),
        });
    }
    Ok(eps.iter().zip(u_hat).map(|(e, u)| e.abs() / tol.scale(*u)).collect())
}

pub fn max_eta(eta: &[f64]) -> f64 {
    eta.iter().fold(0.0, |m, &v| if v > m || v.is_nan() { v } else { m })
}

pub fn accept_global(eta: &[f64]) -> bool {
    max_eta(eta) <= 1.0
}

/// `{i in scope : eta_i > delta * max_{j in scope} eta_j}`; `eta` is indexed by
/// full component number.
pub fn select_active(eta: &[f64], delta: f64, scope: &ActivePartition) -> ActivePartition {
    let top = scope.indices().iter().map(|&i| eta[i]).fold(0.0, f64::max);
    if top == 0.0 {
        return ActivePartition::empty(scope.dim());
    }
    let threshold = delta * top;
    let picked = scope.indices().iter().copied().filter(|&i| eta[i] > threshold).collect();
    ActivePartition::new(picked, scope.dim()).expect("subset of a valid partition")
}

/// Step-size proposal from the errors `eps` and states `u_hat` of the
/// components that drive the step.
pub fn next_step_size(
    h_current: f64,
    eps: &[f64],
    u_hat: &[f64],
    tol: &ToleranceSpec,
    cfg: &ControllerConfig,
) -> Result<f64, ControllerError> {
    if eps.is_empty() {
        return Err(ControllerError::EmptyActiveSet);
    }
    if eps.len() != u_hat.len() {
        return Err(ControllerError::DimensionMismatch {
            expected: eps.len(),
            actual: u_hat.len(),
        });
    }
    let ratio = eps
        .iter()
        .zip(u_hat)
        .map(|(e, u)| tol.scale(*u) / e.abs().max(ERROR_FLOOR))
        .fold(f64::INFINITY, f64::min);
    let factor = ratio.powf(1.0 / (cfg.order as f64 + 1.0));
    let upper = cfg.h_max.min(cfg.max_growth * h_current);
    Ok((cfg.nu * h_current * factor).min(upper).max(cfg.h_min))
}

//! Benchmark problems with exact or reference solutions, Courant-number
//! diagnostics and error tables.

use std::fmt;
use std::sync::Arc;

use crate::controller::ToleranceSpec;
use crate::multirate::{integrate_single_rate, IntegrationTrace, MultirateConfig, MultirateError, Trajectory};
use crate::problem::OdeProblem;
use crate::reference::{dopri5, DoPriConfig, ReferenceError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchmarkError {
    #[error("preset '{0}' has no spatial metadata")]
    MissingSpatialMetadata(String),
    #[error("trace has no recorded states; enable record_states")]
    MissingStates,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time {t} outside [{t0}, {t_end}] or not sampled by the trajectory")]
    TimeOutOfRange { t: f64, t0: f64, t_end: f64 },
    #[error("reference has {actual} states for {expected} times")]
    ReferenceMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Integration(#[from] MultirateError),
}

/// Exact solution sampled on the discrete grid.
pub type ExactFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// How tight-tolerance reference solutions are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    /// Explicit Dormand–Prince 5(4) at rtol 1e-11, atol 1e-13.
    Explicit,
    /// Single-rate TR-BDF2 with 100x tighter tolerances and h_max = 1e-3.
    StiffSingleRate,
}

#[derive(Debug, Clone)]
pub struct SpatialMeta {
    pub dx: f64,
    pub centers: Vec<f64>,
    /// Derivative of the flux function, `f'(u)`, for hyperbolic problems.
    pub flux_derivative: Option<fn(f64) -> f64>,
}

#[derive(Clone)]
pub struct BenchmarkPreset {
    pub name: String,
    pub problem: OdeProblem,
    pub t0: f64,
    pub t_end: f64,
    pub u0: Vec<f64>,
    pub config: MultirateConfig,
    pub exact: Option<ExactFn>,
    pub reference: ReferenceKind,
    pub spatial: Option<SpatialMeta>,
    /// Physical parameters, reported in run manifests.
    pub params: Vec<(String, f64)>,
    pub error_times: Vec<f64>,
}

impl fmt::Debug for BenchmarkPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkPreset")
            .field("name", &self.name)
            .field("dim", &self.problem.dim())
            .field("t0", &self.t0)
            .field("t_end", &self.t_end)
            .field("params", &self.params)
            .field("reference", &self.reference)
            .finish()
    }
}

impl BenchmarkPreset {
    /// Replaces the tolerance level. Absolute-only presets set `tau_a = tol`;
    /// the others set `tau_r = tol` and keep the ratio `tau_a / tau_r`.
    pub fn with_tolerance(mut self, tol: f64) -> Result<Self, BenchmarkError> {
        let old = self.config.tolerances;
        let new = if old.tau_r == 0.0 {
            ToleranceSpec::new(0.0, tol)
        } else {
            ToleranceSpec::new(tol, tol * old.tau_a / old.tau_r)
        }
        .map_err(|e| BenchmarkError::InvalidParameter(e.to_string()))?;
        self.config.tolerances = new;
        Ok(self)
    }

    /// Moves the final time and drops error times beyond it.
    pub fn with_t_end(mut self, t_end: f64) -> Result<Self, BenchmarkError> {
        if !(t_end > self.t0) || !t_end.is_finite() {
            return Err(BenchmarkError::InvalidParameter(format!("t_end = {t_end} must exceed t0 = {}", self.t0)));
        }
        self.t_end = t_end;
        self.error_times.retain(|&t| t <= t_end);
        if self.error_times.last() != Some(&t_end) {
            self.error_times.push(t_end);
        }
        self.config.checkpoints = self.error_times.clone();
        Ok(self)
    }

    pub fn exact_states(&self, times: &[f64]) -> Option<Vec<Vec<f64>>> {
        self.exact.as_ref().map(|f| times.iter().map(|&t| f(t)).collect())
    }

    /// Tight-tolerance solution of the semidiscrete system at `times`.
    pub fn reference_states(&self, times: &[f64]) -> Result<Vec<Vec<f64>>, BenchmarkError> {
        self.check_times(times)?;
        match self.reference {
            ReferenceKind::Explicit => Ok(dopri5(&self.problem, self.t0, &self.u0, times, &DoPriConfig::default())?),
            ReferenceKind::StiffSingleRate => {
                let tol = self.config.tolerances;
                let mut cfg = self.config.clone();
                cfg.tolerances = ToleranceSpec {
                    tau_r: tol.tau_r * 1e-2,
                    tau_a: tol.tau_a * 1e-2,
                };
                cfg.controller.h_max = 1e-3;
                cfg.h0 = cfg.h0.min(1e-3);
                cfg.checkpoints = times.to_vec();
                cfg.record_states = false;
                let t_last = times.iter().copied().fold(self.t0, f64::max);
                if t_last == self.t0 {
                    return Ok(times.iter().map(|_| self.u0.clone()).collect());
                }
                let (traj, _) = integrate_single_rate(&self.problem, self.t0, t_last, &self.u0, &cfg)?;
                times.iter().map(|&t| sampled(&traj, t, self)).collect()
            }
        }
    }

    fn check_times(&self, times: &[f64]) -> Result<(), BenchmarkError> {
        match times.iter().find(|&&t| !(t >= self.t0 && t <= self.t_end)) {
            Some(&t) => Err(BenchmarkError::TimeOutOfRange {
                t,
                t0: self.t0,
                t_end: self.t_end,
            }),
            None => Ok(()),
        }
    }
}

fn sampled(traj: &Trajectory, t: f64, p: &BenchmarkPreset) -> Result<Vec<f64>, BenchmarkError> {
    traj.state_at(t).ok_or(BenchmarkError::TimeOutOfRange {
        t,
        t0: p.t0,
        t_end: p.t_end,
    })
}

fn quarter_times(t0: f64, t_end: f64) -> Vec<f64> {
    (1..=4).map(|k| t0 + (t_end - t0) * k as f64 / 4.0).collect()
}

fn preset_config(tau_r: f64, tau_a: f64, h0: f64, checkpoints: &[f64]) -> Result<MultirateConfig, BenchmarkError> {
    let tol = ToleranceSpec::new(tau_r, tau_a).map_err(|e| BenchmarkError::InvalidParameter(e.to_string()))?;
    let mut cfg = MultirateConfig::new(tol, h0);
    cfg.checkpoints = checkpoints.to_vec();
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Inverter chain

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverterParams {
    pub m: usize,
    pub gamma: f64,
    pub u_op: f64,
    pub u_tau: f64,
    pub t_end: f64,
}

impl InverterParams {
    /// Small chain for quick runs.
    pub fn desk() -> Self {
        Self {
            m: 100,
            gamma: 100.0,
            u_op: 5.0,
            u_tau: 1.0,
            t_end: 20.0,
        }
    }

    /// Full-size chain with a horizon long enough for the pulse to propagate.
    pub fn full() -> Self {
        Self {
            m: 500,
            t_end: 130.0,
            ..Self::desk()
        }
    }
}

/// Transistor characteristic `max(y - u_tau, 0)^2 - max(y - z - u_tau, 0)^2`.
pub fn inverter_g(y: f64, z: f64, u_tau: f64) -> f64 {
    (y - u_tau).max(0.0).powi(2) - (y - z - u_tau).max(0.0).powi(2)
}

/// Partial derivatives `(dg/dy, dg/dz)`.
pub fn inverter_g_grad(y: f64, z: f64, u_tau: f64) -> (f64, f64) {
    let a = (y - u_tau).max(0.0);
    let b = (y - z - u_tau).max(0.0);
    (2.0 * a - 2.0 * b, 2.0 * b)
}

/// Piecewise-linear input pulse driving the first inverter.
pub fn inverter_input(t: f64) -> f64 {
    if (5.0..=10.0).contains(&t) {
        t - 5.0
    } else if t > 10.0 && t <= 15.0 {
        5.0
    } else if t > 15.0 && t <= 17.0 {
        2.5 * (17.0 - t)
    } else {
        0.0
    }
}

pub fn inverter_chain(params: InverterParams) -> Result<BenchmarkPreset, BenchmarkError> {
    let InverterParams {
        m,
        gamma,
        u_op,
        u_tau,
        t_end,
    } = params;
    if m < 1 {
        return Err(BenchmarkError::InvalidParameter("inverter chain needs m >= 1".into()));
    }
    if !(t_end > 0.0) {
        return Err(BenchmarkError::InvalidParameter(format!("t_end = {t_end} must be positive")));
    }
    let problem = OdeProblem::new("inverter_chain", m, move |t, y, out| {
        let mut prev = inverter_input(t);
        for j in 0..y.len() {
            out[j] = u_op - y[j] - gamma * inverter_g(prev, y[j], u_tau);
            prev = y[j];
        }
    })
    .with_jacobian(move |t, y, jac| {
        let mut prev = inverter_input(t);
        for j in 0..y.len() {
            let (gy, gz) = inverter_g_grad(prev, y[j], u_tau);
            jac[(j, j)] = -1.0 - gamma * gz;
            if j > 0 {
                jac[(j, j - 1)] = -gamma * gy;
            }
            prev = y[j];
        }
    });
    let u0 = (0..m).map(|i| if i % 2 == 0 { 5.0 } else { 6.247e-3 }).collect();
    let error_times = quarter_times(0.0, t_end);
    Ok(BenchmarkPreset {
        name: "inverter_chain".into(),
        problem,
        t0: 0.0,
        t_end,
        u0,
        config: preset_config(0.0, 1e-5, 1e-2, &error_times)?,
        exact: None,
        reference: ReferenceKind::StiffSingleRate,
        spatial: None,
        params: vec![
            ("m".into(), m as f64),
            ("gamma".into(), gamma),
            ("u_op".into(), u_op),
            ("u_tau".into(), u_tau),
            ("t_end".into(), t_end),
        ],
        error_times,
    })
}

// ---------------------------------------------------------------------------
// Reaction-diffusion front

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionDiffusionParams {
    pub n_cells: usize,
    pub eps: f64,
    pub gamma: f64,
    pub length: f64,
    pub t_end: f64,
}

impl Default for ReactionDiffusionParams {
    fn default() -> Self {
        Self {
            n_cells: 500,
            eps: 0.01,
            gamma: 100.0,
            length: 5.0,
            t_end: 3.0,
        }
    }
}

pub fn reaction_diffusion(params: ReactionDiffusionParams) -> Result<BenchmarkPreset, BenchmarkError> {
    let ReactionDiffusionParams {
        n_cells: n,
        eps,
        gamma,
        length,
        t_end,
    } = params;
    if n < 3 {
        return Err(BenchmarkError::InvalidParameter("reaction-diffusion needs at least 3 cells".into()));
    }
    if !(eps > 0.0 && length > 0.0 && t_end > 0.0 && gamma >= 0.0) {
        return Err(BenchmarkError::InvalidParameter(
            "reaction-diffusion needs eps, L, T > 0 and gamma >= 0".into(),
        ));
    }
    let dx = length / n as f64;
    let c = eps / (dx * dx);
    let problem = OdeProblem::new("reaction_diffusion", n, move |_, y, out| {
        let last = y.len() - 1;
        for i in 0..=last {
            let left = y[i.saturating_sub(1)];
            let right = y[(i + 1).min(last)];
            out[i] = c * (left - 2.0 * y[i] + right) + gamma * y[i] * y[i] * (1.0 - y[i]);
        }
    })
    .with_jacobian(move |_, y, jac| {
        let last = y.len() - 1;
        for i in 0..=last {
            let mut diag = -2.0 * c + gamma * (2.0 * y[i] - 3.0 * y[i] * y[i]);
            if i > 0 {
                jac[(i, i - 1)] = c;
            } else {
                diag += c;
            }
            if i < last {
                jac[(i, i + 1)] = c;
            } else {
                diag += c;
            }
            jac[(i, i)] = diag;
        }
    });
    let lambda = 0.5 * (2.0 * gamma / eps).sqrt();
    let centers: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dx).collect();
    let u0 = centers.iter().map(|&x| 1.0 / (1.0 + (lambda * (x - 1.0)).exp())).collect();
    let error_times = quarter_times(0.0, t_end);
    Ok(BenchmarkPreset {
        name: "reaction_diffusion".into(),
        problem,
        t0: 0.0,
        t_end,
        u0,
        config: preset_config(1e-4, 1e-6, 1e-3, &error_times)?,
        exact: None,
        reference: ReferenceKind::StiffSingleRate,
        spatial: Some(SpatialMeta {
            dx,
            centers,
            flux_derivative: None,
        }),
        params: vec![
            ("n_cells".into(), n as f64),
            ("eps".into(), eps),
            ("gamma".into(), gamma),
            ("length".into(), length),
            ("t_end".into(), t_end),
        ],
        error_times,
    })
}

// ---------------------------------------------------------------------------
// Linear advection

/// Width of the Gaussian initial datum.
pub const ADVECTION_SIGMA: f64 = 0.2;
const ADVECTION_LEFT: f64 = -20.0;
const ADVECTION_RIGHT: f64 = 20.0;

pub fn advection_datum(x: f64) -> f64 {
    (-x * x / (2.0 * ADVECTION_SIGMA * ADVECTION_SIGMA)).exp()
}

pub fn linear_advection(n_cells: usize) -> Result<BenchmarkPreset, BenchmarkError> {
    if n_cells < 4 {
        return Err(BenchmarkError::InvalidParameter("advection needs at least 4 cells".into()));
    }
    let n = n_cells;
    let width = ADVECTION_RIGHT - ADVECTION_LEFT;
    let dx = width / n as f64;
    let problem = OdeProblem::new("linear_advection", n, move |_, y, out| {
        for i in 0..n {
            out[i] = -(y[i] - y[(i + n - 1) % n]) / dx;
        }
    })
    .with_jacobian(move |_, _, jac| {
        for i in 0..n {
            jac[(i, i)] = -1.0 / dx;
            jac[(i, (i + n - 1) % n)] += 1.0 / dx;
        }
    });
    let centers: Vec<f64> = (0..n).map(|i| ADVECTION_LEFT + (i as f64 + 0.5) * dx).collect();
    let u0 = centers.iter().map(|&x| advection_datum(x)).collect();
    let exact_centers = centers.clone();
    let exact: ExactFn = Arc::new(move |t| {
        exact_centers
            .iter()
            .map(|&x| advection_datum((x - t - ADVECTION_LEFT).rem_euclid(width) + ADVECTION_LEFT))
            .collect()
    });
    let error_times = vec![0.2, 1.0, 1.8, 2.8, 3.0];
    Ok(BenchmarkPreset {
        name: "linear_advection".into(),
        problem,
        t0: 0.0,
        t_end: 3.0,
        u0,
        config: preset_config(1e-6, 1e-8, 1e-2, &error_times)?,
        exact: Some(exact),
        reference: ReferenceKind::Explicit,
        spatial: Some(SpatialMeta {
            dx,
            centers,
            flux_derivative: Some(|_| 1.0),
        }),
        params: vec![
            ("n_cells".into(), n as f64),
            ("velocity".into(), 1.0),
            ("sigma".into(), ADVECTION_SIGMA),
            ("x_left".into(), ADVECTION_LEFT),
            ("x_right".into(), ADVECTION_RIGHT),
        ],
        error_times,
    })
}

// ---------------------------------------------------------------------------
// Burgers Riemann problems

const BURGERS_LEFT: f64 = -1.0;
const BURGERS_RIGHT: f64 = 3.0;

/// Rusanov flux for `f(u) = u^2 / 2`.
pub fn rusanov_flux(a: f64, b: f64) -> f64 {
    0.25 * (a * a + b * b) - 0.5 * a.abs().max(b.abs()) * (b - a)
}

/// Partial derivatives of [`rusanov_flux`] (one-sided where the max switches).
pub fn rusanov_flux_grad(a: f64, b: f64) -> (f64, f64) {
    let s = a.abs().max(b.abs());
    let (ds_da, ds_db) = if a.abs() >= b.abs() { (a.signum(), 0.0) } else { (0.0, b.signum()) };
    (
        0.5 * a - 0.5 * ds_da * (b - a) + 0.5 * s,
        0.5 * b - 0.5 * ds_db * (b - a) - 0.5 * s,
    )
}

/// Entropy solution of the Riemann problem at `(x, t)`.
pub fn burgers_exact(x: f64, t: f64, ul: f64, ur: f64) -> f64 {
    if t <= 0.0 {
        return if x < 0.0 { ul } else { ur };
    }
    if ul > ur {
        if x < 0.5 * (ul + ur) * t {
            ul
        } else {
            ur
        }
    } else {
        (x / t).clamp(ul, ur)
    }
}

pub fn burgers_riemann(n_cells: usize, ul: f64, ur: f64) -> Result<BenchmarkPreset, BenchmarkError> {
    if n_cells < 4 {
        return Err(BenchmarkError::InvalidParameter("Burgers needs at least 4 cells".into()));
    }
    if !ul.is_finite() || !ur.is_finite() {
        return Err(BenchmarkError::InvalidParameter("Riemann states must be finite".into()));
    }
    let n = n_cells;
    let dx = (BURGERS_RIGHT - BURGERS_LEFT) / n as f64;
    let problem = OdeProblem::new("burgers", n, move |_, y, out| {
        let last = y.len() - 1;
        let mut f_left = rusanov_flux(ul, y[0]);
        for i in 0..=last {
            let right = if i < last { y[i + 1] } else { ur };
            let f_right = rusanov_flux(y[i], right);
            out[i] = -(f_right - f_left) / dx;
            f_left = f_right;
        }
    })
    .with_jacobian(move |_, y, jac| {
        let last = y.len() - 1;
        for i in 0..=last {
            let left = if i > 0 { y[i - 1] } else { ul };
            let right = if i < last { y[i + 1] } else { ur };
            let (fl_a, fl_b) = rusanov_flux_grad(left, y[i]);
            let (fr_a, fr_b) = rusanov_flux_grad(y[i], right);
            jac[(i, i)] = -(fr_a - fl_b) / dx;
            if i > 0 {
                jac[(i, i - 1)] = fl_a / dx;
            }
            if i < last {
                jac[(i, i + 1)] = -fr_b / dx;
            }
        }
    });
    let centers: Vec<f64> = (0..n).map(|i| BURGERS_LEFT + (i as f64 + 0.5) * dx).collect();
    let u0 = centers.iter().map(|&x| burgers_exact(x, 0.0, ul, ur)).collect();
    let exact_centers = centers.clone();
    let exact: ExactFn = Arc::new(move |t| exact_centers.iter().map(|&x| burgers_exact(x, t, ul, ur)).collect());
    let error_times = vec![0.2, 0.5, 0.8, 0.99, 1.0];
    let mut config = preset_config(1e-4, 1e-6, 1e-2, &error_times)?;
    config.newton.tolerance = 1e-8;
    Ok(BenchmarkPreset {
        name: "burgers".into(),
        problem,
        t0: 0.0,
        t_end: 1.0,
        u0,
        config,
        exact: Some(exact),
        reference: ReferenceKind::Explicit,
        spatial: Some(SpatialMeta {
            dx,
            centers,
            flux_derivative: Some(|u| u),
        }),
        params: vec![
            ("n_cells".into(), n as f64),
            ("ul".into(), ul),
            ("ur".into(), ur),
            ("x_left".into(), BURGERS_LEFT),
            ("x_right".into(), BURGERS_RIGHT),
        ],
        error_times,
    })
}

// ---------------------------------------------------------------------------
// Diagnostics

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CourantSample {
    pub t: f64,
    pub h: f64,
    pub courant: f64,
    /// `true` for micro steps inside a refined macro step.
    pub refined: bool,
}

/// `max_i |f'(c_i)| h / dx` per accepted macro and micro step. Wave speeds
/// come from the state at the start of the enclosing macro step; micro steps
/// take the maximum over their active cells only.
pub fn courant_numbers(trace: &IntegrationTrace, preset: &BenchmarkPreset) -> Result<Vec<CourantSample>, BenchmarkError> {
    let missing = || BenchmarkError::MissingSpatialMetadata(preset.name.clone());
    let meta = preset.spatial.as_ref().ok_or_else(missing)?;
    let fp = meta.flux_derivative.ok_or_else(missing)?;
    let mut out = Vec::new();
    for rec in &trace.macros {
        let state = rec.state.as_ref().ok_or(BenchmarkError::MissingStates)?;
        let speed = state.iter().fold(0.0f64, |s, &u| s.max(fp(u).abs()));
        out.push(CourantSample {
            t: rec.t,
            h: rec.h,
            courant: speed * rec.h / meta.dx,
            refined: false,
        });
        for k in &rec.micro {
            let h = k.t_end - k.t_start;
            let speed = k.active.iter().fold(0.0f64, |s, &i| s.max(fp(state[i]).abs()));
            out.push(CourantSample {
                t: k.t_start,
                h,
                courant: speed * h / meta.dx,
                refined: true,
            });
        }
    }
    Ok(out)
}

/// `||num - reference||_inf / ||reference||_inf`.
pub fn relative_linf_error(num: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(num.len(), reference.len(), "relative error needs equal lengths");
    let diff = num.iter().zip(reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = reference.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    diff / scale
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub t: f64,
    pub vs_exact: Option<f64>,
    pub vs_reference: Option<f64>,
}

/// Relative l-infinity errors of `traj` at `times` against the exact solution
/// (when the preset has one) and against precomputed `reference` states.
pub fn error_table(
    traj: &Trajectory,
    preset: &BenchmarkPreset,
    times: &[f64],
    reference: Option<&[Vec<f64>]>,
) -> Result<Vec<ErrorRow>, BenchmarkError> {
    preset.check_times(times)?;
    if let Some(r) = reference {
        if r.len() != times.len() {
            return Err(BenchmarkError::ReferenceMismatch {
                expected: times.len(),
                actual: r.len(),
            });
        }
    }
    times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let num = sampled(traj, t, preset)?;
            Ok(ErrorRow {
                t,
                vs_exact: preset.exact.as_ref().map(|f| relative_linf_error(&num, &f(t))),
                vs_reference: reference.map(|r| relative_linf_error(&num, &r[k])),
            })
        })
        .collect()
}

//! Self-adjusting multirate driver.
//!
//! Each macro step starts with a tentative TR-BDF2 step of the whole system.
//! Components whose normalized error is large relative to the worst one form
//! the active set and are recomputed with smaller micro steps, while the
//! remaining (latent) components are reconstructed by interpolation on the
//! macro interval. With `delta = 1` no component is ever refined and the
//! driver reduces to adaptive single-rate TR-BDF2.

use crate::controller::{
    max_eta, next_step_size, normalized_errors, select_active, ControllerConfig, ControllerError, ToleranceSpec,
};
use crate::interp::HermiteData;
use crate::problem::{ActivePartition, EvalCounters, OdeProblem, ProblemError};
use crate::trbdf2::{step, step_with_latent, Fsal, NewtonConfig, StepError, StepResult, TrBdf2Coefficients};

/// Default cap on micro steps inside one macro step.
pub const DEFAULT_MAX_MICRO_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MultirateError {
    #[error("step size fell below h_min = {h_min} at t = {t}")]
    StepFloorReached { t: f64, h_min: f64 },
    #[error("macro step at t = {t} rejected {rejections} times")]
    TooManyRejections { t: f64, rejections: usize },
    #[error("more than {cap} micro steps inside the macro step at t = {t}")]
    SafetyCapExceeded { t: f64, cap: usize },
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpolantKind {
    Linear,
    Hermite,
}

impl std::str::FromStr for InterpolantKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "hermite" | "cubic" => Ok(Self::Hermite),
            other => Err(format!("unknown interpolant '{other}' (expected linear or hermite)")),
        }
    }
}

impl std::fmt::Display for InterpolantKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::Hermite => "hermite",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultirateConfig {
    pub tolerances: ToleranceSpec,
    pub controller: ControllerConfig,
    pub interpolant: InterpolantKind,
    pub h0: f64,
    pub newton: NewtonConfig,
    pub max_micro_steps: usize,
    /// Times the macro grid must hit exactly (trajectory samples are taken there).
    pub checkpoints: Vec<f64>,
    /// Keep the state at the start of every macro step in the trace.
    pub record_states: bool,
}

impl MultirateConfig {
    pub fn new(tolerances: ToleranceSpec, h0: f64) -> Self {
        Self {
            tolerances,
            controller: ControllerConfig::default(),
            interpolant: InterpolantKind::Hermite,
            h0,
            newton: NewtonConfig::default(),
            max_micro_steps: DEFAULT_MAX_MICRO_STEPS,
            checkpoints: Vec::new(),
            record_states: false,
        }
    }

    pub fn validate(&self) -> Result<(), MultirateError> {
        self.tolerances.validate()?;
        self.controller.validate()?;
        self.newton.validate()?;
        let c = &self.controller;
        if !(self.h0 >= c.h_min && self.h0 <= c.h_max) {
            return Err(MultirateError::InvalidConfig(format!(
                "h0 = {} outside [{}, {}]",
                self.h0, c.h_min, c.h_max
            )));
        }
        if self.max_micro_steps == 0 {
            return Err(MultirateError::InvalidConfig("max_micro_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroRecord {
    pub t_start: f64,
    pub t_end: f64,
    pub active: Vec<usize>,
    pub eta_max: f64,
    pub newton_iterations: [usize; 2],
    pub rejections: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroRecord {
    pub t: f64,
    pub h: f64,
    pub rejections: usize,
    /// Max normalized error of the accepted tentative step over all components.
    pub eta_max: f64,
    /// Max normalized error over the components left latent.
    pub eta_latent_max: f64,
    /// First-level active set.
    pub active: Vec<usize>,
    pub refined: bool,
    pub newton_iterations: [usize; 2],
    pub micro: Vec<MicroRecord>,
    pub state: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntegrationTrace {
    pub dim: usize,
    pub macros: Vec<MacroRecord>,
    pub counters: EvalCounters,
    pub rejected_macro: usize,
    pub rejected_micro: usize,
}

impl IntegrationTrace {
    pub fn accepted_macro(&self) -> usize {
        self.macros.len()
    }

    pub fn accepted_micro(&self) -> usize {
        self.macros.iter().map(|m| m.micro.len()).sum()
    }

    /// Accepted macro plus accepted micro steps.
    pub fn total_steps(&self) -> usize {
        self.accepted_macro() + self.accepted_micro()
    }
}

/// Component-steps: `m` per accepted macro step and `|active|` per accepted
/// micro step.
pub fn workload(trace: &IntegrationTrace) -> u64 {
    trace
        .macros
        .iter()
        .map(|m| trace.dim as u64 + m.micro.iter().map(|k| k.active.len() as u64).sum::<u64>())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }

    /// Linear interpolation between stored samples; `None` outside the range.
    pub fn state_at(&self, t: f64) -> Option<Vec<f64>> {
        let first = *self.times.first()?;
        let last = self.final_time();
        if t < first || t > last {
            return None;
        }
        let k = self.times.partition_point(|&s| s < t);
        if self.times[k] == t {
            return Some(self.states[k].clone());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let a = (t - t0) / (t1 - t0);
        Some(
            self.states[k - 1]
                .iter()
                .zip(&self.states[k])
                .map(|(p, q)| p + a * (q - p))
                .collect(),
        )
    }
}

/// Result of one macro step.
#[derive(Debug, Clone)]
pub struct MacroOutcome {
    pub u_next: Vec<f64>,
    /// Step actually taken (after rejections).
    pub h: f64,
    /// Controller proposal for the next macro step.
    pub h_next: f64,
    pub fsal: Option<Fsal>,
    pub record: MacroRecord,
}

fn retryable(e: &StepError) -> bool {
    matches!(
        e,
        StepError::NewtonDivergence { .. }
            | StepError::SingularMatrix
            | StepError::Problem(ProblemError::NonFiniteOutput { .. })
    )
}

fn pick(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

/// One macro step of size (at most) `h` from `(t, u)`.
pub fn macro_step(
    p: &OdeProblem,
    t: f64,
    u: &[f64],
    h: f64,
    cfg: &MultirateConfig,
    fsal: Option<&Fsal>,
    counters: &mut EvalCounters,
) -> Result<MacroOutcome, MultirateError> {
    let m = p.dim();
    if u.len() != m {
        return Err(StepError::DimensionMismatch {
            expected: m,
            actual: u.len(),
        }
        .into());
    }
    let ctl = &cfg.controller;
    let tol = &cfg.tolerances;
    let full = ActivePartition::full(m);
    let mut h = h;
    let mut rejections = 0;

    let (res, eta, first) = loop {
        if rejections > ctl.max_rejections {
            return Err(MultirateError::TooManyRejections { t, rejections });
        }
        let shrink = |h_new: f64| -> Result<f64, MultirateError> {
            if h <= ctl.h_min {
                return Err(MultirateError::StepFloorReached { t, h_min: ctl.h_min });
            }
            Ok(h_new.max(ctl.h_min))
        };
        let res = match step(p, t, u, h, &full, u, fsal, &cfg.newton, counters) {
            Ok(r) => r,
            Err(e) if retryable(&e) => {
                rejections += 1;
                h = shrink(0.5 * h)?;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let eta = normalized_errors(&res.eps_mod, &res.u_next, tol)?;
        if eta.iter().any(|v| !v.is_finite()) {
            rejections += 1;
            h = shrink(0.5 * h)?;
            continue;
        }
        let first = select_active(&eta, ctl.delta, &full);
        let latent = first.complement();
        let eta_latent = latent.iter().map(|&i| eta[i]).fold(0.0, f64::max);
        if eta_latent <= 1.0 {
            break (res, eta, first);
        }
        rejections += 1;
        let h_new = next_step_size(h, &pick(&res.eps_mod, &latent), &pick(&res.u_next, &latent), tol, ctl)?;
        h = shrink(h_new.min(h))?;
    };

    let latent = first.complement();
    let mut record = MacroRecord {
        t,
        h,
        rejections,
        eta_max: max_eta(&eta),
        eta_latent_max: latent.iter().map(|&i| eta[i]).fold(0.0, f64::max),
        active: first.indices().to_vec(),
        refined: false,
        newton_iterations: res.newton_iterations,
        micro: Vec::new(),
        state: cfg.record_states.then(|| u.to_vec()),
    };

    let drivers: Vec<usize> = if latent.is_empty() { (0..m).collect() } else { latent };
    let h_next = next_step_size(h, &pick(&res.eps_mod, &drivers), &pick(&res.u_next, &drivers), tol, ctl)?;

    let mut u_next = res.u_next.clone();
    let mut out_fsal = Some(res.fsal());
    if !first.is_empty() {
        let h_first = next_step_size(
            h,
            &pick(&res.eps_mod, first.indices()),
            &pick(&res.u_next, first.indices()),
            tol,
            ctl,
        )?;
        if h_first < h {
            record.refined = true;
            out_fsal = None;
            u_next = refine(p, t, u, &res, &eta, first, h_first, cfg, counters, &mut record)?;
        }
    }

    Ok(MacroOutcome {
        u_next,
        h,
        h_next,
        fsal: out_fsal,
        record,
    })
}

/// Micro stepping of the active components across `[t, t + h]`.
#[allow(clippy::too_many_arguments)]
fn refine(
    p: &OdeProblem,
    t: f64,
    u: &[f64],
    tentative: &StepResult,
    eta: &[f64],
    first: ActivePartition,
    h_first: f64,
    cfg: &MultirateConfig,
    counters: &mut EvalCounters,
    record: &mut MacroRecord,
) -> Result<Vec<f64>, MultirateError> {
    let m = p.dim();
    let ctl = &cfg.controller;
    let tol = &cfg.tolerances;
    let h = tentative.h;
    let t_end = t + h;
    let u_hat = &tentative.u_next;
    let hermite = match cfg.interpolant {
        InterpolantKind::Hermite => Some(HermiteData::from_step(tentative)),
        InterpolantKind::Linear => None,
    };
    let ever_active = first.mask();
    // components that failed the tentative step stay active to the end
    let pinned =
        ActivePartition::new(first.indices().iter().copied().filter(|&i| eta[i] > 1.0).collect(), m)
            .expect("subset of a valid partition");

    let mut state = u.to_vec();
    let mut active = first;
    let mut t_k = t;
    let mut hm = h_first;
    let mut rejections = 0;
    let mut taken = 0usize;
    let sliver = 1e-12 * h.abs().max(t_end.abs());

    while t_k < t_end && !active.is_empty() {
        if taken + rejections >= cfg.max_micro_steps {
            return Err(MultirateError::SafetyCapExceeded {
                t,
                cap: cfg.max_micro_steps,
            });
        }
        let mut t_next = t_k + hm;
        if t_next >= t_end - sliver {
            t_next = t_end;
        }
        let hk = t_next - t_k;

        let mask = active.mask();
        let latent_at = |s: f64| -> Vec<f64> {
            let mut v = state.clone();
            for i in (0..m).filter(|&i| !mask[i]) {
                v[i] = if s == t_end {
                    u_hat[i]
                } else {
                    match (&hermite, ever_active[i]) {
                        (Some(hd), false) => hd.component(i, s - t),
                        _ => state[i] + (s - t_k) / (t_end - t_k) * (u_hat[i] - state[i]),
                    }
                };
            }
            v
        };
        let gamma = TrBdf2Coefficients::new().gamma;
        let frozen_gamma = latent_at(t_k + gamma * hk);
        let frozen = latent_at(t_next);

        let x = active.gather(&state);
        let shrink = |h_new: f64| -> Result<f64, MultirateError> {
            if hk <= ctl.h_min {
                return Err(MultirateError::StepFloorReached { t: t_k, h_min: ctl.h_min });
            }
            Ok(h_new.max(ctl.h_min))
        };
        let latent = [state.as_slice(), frozen_gamma.as_slice(), frozen.as_slice()];
        let r = match step_with_latent(p, t_k, &x, hk, &active, latent, None, &cfg.newton, counters) {
            Ok(r) => r,
            Err(e) if retryable(&e) => {
                rejections += 1;
                hm = shrink(0.5 * hk)?;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let eta_mu = normalized_errors(&r.eps_mod, &r.u_next, tol)?;
        let eta_mu_max = max_eta(&eta_mu);
        if !eta_mu_max.is_finite() {
            rejections += 1;
            hm = shrink(0.5 * hk)?;
            continue;
        }
        if eta_mu_max > 1.0 {
            rejections += 1;
            hm = shrink(next_step_size(hk, &r.eps_mod, &r.u_next, tol, ctl)?.min(hk))?;
            continue;
        }

        for i in (0..m).filter(|&i| !mask[i]) {
            state[i] = frozen[i];
        }
        active.scatter(&r.u_next, &mut state);
        taken += 1;
        record.micro.push(MicroRecord {
            t_start: t_k,
            t_end: t_next,
            active: active.indices().to_vec(),
            eta_max: eta_mu_max,
            newton_iterations: r.newton_iterations,
            rejections,
        });
        rejections = 0;
        t_k = t_next;
        if t_k >= t_end {
            break;
        }

        let mut eta_full = vec![0.0; m];
        for (k, &i) in active.indices().iter().enumerate() {
            eta_full[i] = eta_mu[k];
        }
        let next = select_active(&eta_full, ctl.delta, &active).union(&pinned.intersection(&active));
        if !next.is_empty() {
            let pos: Vec<usize> = next
                .indices()
                .iter()
                .map(|i| active.indices().binary_search(i).expect("nested sets"))
                .collect();
            hm = next_step_size(hk, &pick(&r.eps_mod, &pos), &pick(&r.u_next, &pos), tol, ctl)?;
        }
        active = next;
    }

    if t_k < t_end {
        // every component dropped out: latent continuation ends at the macro values
        state[..m].copy_from_slice(&u_hat[..m]);
    }
    for i in (0..m).filter(|&i| !ever_active[i]) {
        state[i] = u_hat[i];
    }
    Ok(state)
}

/// Adaptive multirate integration from `t0` to `t_end`.
pub fn integrate(
    p: &OdeProblem,
    t0: f64,
    t_end: f64,
    u0: &[f64],
    cfg: &MultirateConfig,
) -> Result<(Trajectory, IntegrationTrace), MultirateError> {
    cfg.validate()?;
    if !(t_end > t0) {
        return Err(MultirateError::InvalidConfig(format!("need t_end > t0, got {t0} and {t_end}")));
    }
    if u0.len() != p.dim() {
        return Err(StepError::DimensionMismatch {
            expected: p.dim(),
            actual: u0.len(),
        }
        .into());
    }
    let mut stops: Vec<f64> = cfg.checkpoints.iter().copied().filter(|&c| c > t0 && c < t_end).collect();
    stops.push(t_end);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let mut trace = IntegrationTrace {
        dim: p.dim(),
        ..Default::default()
    };
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![u0.to_vec()],
    };
    let mut t = t0;
    let mut u = u0.to_vec();
    let mut h = cfg.h0;
    let mut fsal: Option<Fsal> = None;
    let mut stop_idx = 0;

    while stop_idx < stops.len() {
        let target = stops[stop_idx];
        let mut h_try = h.min(target - t);
        if t + h_try >= target - 1e-12 * target.abs().max(h) {
            h_try = target - t;
        }
        let out = macro_step(p, t, &u, h_try, cfg, fsal.as_ref(), &mut trace.counters)?;
        trace.rejected_macro += out.record.rejections;
        trace.rejected_micro += out.record.micro.iter().map(|k| k.rejections).sum::<usize>();
        let landed = out.h == h_try && h_try == target - t;
        t = if landed { target } else { t + out.h };
        u = out.u_next;
        fsal = out.fsal;
        h = out.h_next;
        trace.macros.push(out.record);
        traj.times.push(t);
        traj.states.push(u.clone());
        if landed {
            stop_idx += 1;
        }
    }
    Ok((traj, trace))
}

/// Adaptive single-rate TR-BDF2: `integrate` with `delta = 1`.
pub fn integrate_single_rate(
    p: &OdeProblem,
    t0: f64,
    t_end: f64,
    u0: &[f64],
    cfg: &MultirateConfig,
) -> Result<(Trajectory, IntegrationTrace), MultirateError> {
    let mut cfg = cfg.clone();
    cfg.controller.delta = 1.0;
    integrate(p, t0, t_end, u0, &cfg)
}

/// `n` equal TR-BDF2 steps with FSAL and no error control.
pub fn integrate_fixed_step(
    p: &OdeProblem,
    t0: f64,
    t_end: f64,
    u0: &[f64],
    n: usize,
    newton: &NewtonConfig,
) -> Result<Trajectory, MultirateError> {
    if n == 0 || !(t_end > t0) {
        return Err(MultirateError::InvalidConfig("need n >= 1 and t_end > t0".into()));
    }
    let full = ActivePartition::full(p.dim());
    let h = (t_end - t0) / n as f64;
    let mut counters = EvalCounters::default();
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![u0.to_vec()],
    };
    let mut u = u0.to_vec();
    let mut fsal: Option<Fsal> = None;
    for k in 0..n {
        let t = t0 + k as f64 * h;
        let r = step(p, t, &u, h, &full, &u, fsal.as_ref(), newton, &mut counters)?;
        fsal = Some(r.fsal());
        u = r.u_next;
        traj.times.push(if k + 1 == n { t_end } else { t0 + (k + 1) as f64 * h });
        traj.states.push(u.clone());
    }
    Ok(traj)
}

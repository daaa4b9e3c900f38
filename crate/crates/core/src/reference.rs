//! Explicit Dormand–Prince 5(4) integrator used for tight-tolerance
//! reference solutions of non-stiff semidiscretizations.

use crate::problem::{eval_rhs, EvalCounters, OdeProblem, ProblemError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReferenceError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
    #[error("output times must be increasing and inside the integration interval")]
    BadOutputTimes,
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoPriConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub max_steps: usize,
}

impl Default for DoPriConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            h0: 1e-4,
            max_steps: 10_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// States at each of `times` (which must lie in `[t0, t_end]` and increase).
pub fn dopri5(
    p: &OdeProblem,
    t0: f64,
    u0: &[f64],
    times: &[f64],
    cfg: &DoPriConfig,
) -> Result<Vec<Vec<f64>>, ReferenceError> {
    if times.iter().any(|&t| t < t0) || times.windows(2).any(|w| w[0] > w[1]) {
        return Err(ReferenceError::BadOutputTimes);
    }
    let n = u0.len();
    let mut counters = EvalCounters::default();
    let mut out = Vec::with_capacity(times.len());
    let mut t = t0;
    let mut y = u0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    k[0] = eval_rhs(p, t, &y, &mut counters)?;
    let mut h = cfg.h0;
    let mut steps = 0;
    let mut tmp = vec![0.0; n];

    for &target in times {
        while t < target {
            if steps >= cfg.max_steps {
                return Err(ReferenceError::TooManySteps(cfg.max_steps));
            }
            let last = t + h >= target;
            let hs = if last { target - t } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += hs * A[s][j] * kj[i];
                    }
                    tmp[i] = acc;
                }
                k[s] = eval_rhs(p, t + C[s] * hs, &tmp, &mut counters)?;
            }
            // tmp now holds the fifth-order solution (stage 7 is FSAL)
            let mut err = 0.0f64;
            for i in 0..n {
                let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * hs;
                let sc = cfg.atol + cfg.rtol * y[i].abs().max(tmp[i].abs());
                err = err.max((e / sc).abs());
            }
            steps += 1;
            if err <= 1.0 {
                t = if last { target } else { t + hs };
                y.copy_from_slice(&tmp);
                k[0] = k[6].clone();
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h = hs * fac;
                }
            } else {
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(ReferenceError::StepUnderflow { t });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

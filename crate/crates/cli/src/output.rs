//! CSV and JSON artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mrtrbdf2::benchmarks::{BenchmarkPreset, CourantSample, ErrorRow};
use mrtrbdf2::multirate::{IntegrationTrace, MultirateConfig, Trajectory};
use serde::Serialize;

/// Floats are written with 17 significant digits so they round-trip exactly.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Compresses sorted indices into `a-b` ranges joined by `;`.
pub fn compress_ranges(indices: &[usize]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < indices.len() {
        let start = indices[i];
        let mut end = start;
        while i + 1 < indices.len() && indices[i + 1] == end + 1 {
            i += 1;
            end = indices[i];
        }
        parts.push(if start == end {
            start.to_string()
        } else {
            format!("{start}-{end}")
        });
        i += 1;
    }
    parts.join(";")
}

/// Collects written artifact names for the manifest.
pub struct OutDir {
    root: PathBuf,
    pub written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("opening {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let path = self.root.join(name);
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

pub fn trajectory_rows(traj: &Trajectory) -> (Vec<String>, Vec<Vec<String>>) {
    let dim = traj.states.first().map_or(0, Vec::len);
    let header = std::iter::once("t".to_string()).chain((0..dim).map(|i| format!("u{i}"))).collect();
    let rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| std::iter::once(num(t)).chain(s.iter().map(|&v| num(v))).collect())
        .collect();
    (header, rows)
}

pub const TRACE_HEADER: [&str; 13] = [
    "step",
    "macro_index",
    "kind",
    "t_start",
    "t_end",
    "h",
    "components",
    "flagged",
    "eta_max",
    "eta_latent_max",
    "rejections",
    "newton_tr",
    "newton_bdf2",
];

/// One row per accepted macro step followed by its micro steps.
pub fn trace_rows(trace: &IntegrationTrace) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut step = 0usize;
    for (k, m) in trace.macros.iter().enumerate() {
        rows.push(vec![
            step.to_string(),
            k.to_string(),
            "macro".into(),
            num(m.t),
            num(m.t + m.h),
            num(m.h),
            trace.dim.to_string(),
            m.active.len().to_string(),
            num(m.eta_max),
            num(m.eta_latent_max),
            m.rejections.to_string(),
            m.newton_iterations[0].to_string(),
            m.newton_iterations[1].to_string(),
        ]);
        step += 1;
        for mu in &m.micro {
            rows.push(vec![
                step.to_string(),
                k.to_string(),
                "micro".into(),
                num(mu.t_start),
                num(mu.t_end),
                num(mu.t_end - mu.t_start),
                mu.active.len().to_string(),
                mu.active.len().to_string(),
                num(mu.eta_max),
                String::new(),
                mu.rejections.to_string(),
                mu.newton_iterations[0].to_string(),
                mu.newton_iterations[1].to_string(),
            ]);
            step += 1;
        }
    }
    rows
}

pub const SPACETIME_HEADER: [&str; 7] = ["step", "macro_index", "kind", "t_start", "t_end", "count", "indices"];

/// Components advanced by each accepted step; `count` sums to the workload.
pub fn spacetime_rows(trace: &IntegrationTrace) -> Vec<Vec<String>> {
    let all: Vec<usize> = (0..trace.dim).collect();
    let mut rows = Vec::new();
    let mut step = 0usize;
    for (k, m) in trace.macros.iter().enumerate() {
        rows.push(vec![
            step.to_string(),
            k.to_string(),
            "macro".into(),
            num(m.t),
            num(m.t + m.h),
            trace.dim.to_string(),
            compress_ranges(&all),
        ]);
        step += 1;
        for mu in &m.micro {
            rows.push(vec![
                step.to_string(),
                k.to_string(),
                "micro".into(),
                num(mu.t_start),
                num(mu.t_end),
                mu.active.len().to_string(),
                compress_ranges(&mu.active),
            ]);
            step += 1;
        }
    }
    rows
}

pub fn courant_rows(samples: &[CourantSample]) -> Vec<Vec<String>> {
    samples
        .iter()
        .map(|s| {
            vec![
                num(s.t),
                num(s.h),
                num(s.courant),
                if s.refined { "refined" } else { "global" }.into(),
            ]
        })
        .collect()
}

pub fn error_rows(rows: &[ErrorRow]) -> Vec<Vec<String>> {
    rows.iter().map(|r| vec![num(r.t), opt(r.vs_exact), opt(r.vs_reference)]).collect()
}

#[derive(Debug, Serialize)]
pub struct ConfigSnapshot {
    pub tau_r: f64,
    pub tau_a: f64,
    pub delta: f64,
    pub nu: f64,
    pub order: u32,
    pub h0: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_growth: f64,
    pub max_rejections: usize,
    pub interpolant: String,
    pub newton_tolerance: f64,
    pub newton_max_iterations: usize,
    pub max_micro_steps: usize,
    pub checkpoints: Vec<f64>,
}

impl ConfigSnapshot {
    pub fn of(c: &MultirateConfig) -> Self {
        Self {
            tau_r: c.tolerances.tau_r,
            tau_a: c.tolerances.tau_a,
            delta: c.controller.delta,
            nu: c.controller.nu,
            order: c.controller.order,
            h0: c.h0,
            h_min: c.controller.h_min,
            h_max: c.controller.h_max,
            max_growth: c.controller.max_growth,
            max_rejections: c.controller.max_rejections,
            interpolant: c.interpolant.to_string(),
            newton_tolerance: c.newton.tolerance,
            newton_max_iterations: c.newton.max_iterations,
            max_micro_steps: c.max_micro_steps,
            checkpoints: c.checkpoints.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SpatialSnapshot {
    pub n_cells: usize,
    pub dx: f64,
    pub x_first: f64,
    pub x_last: f64,
    pub flux_known: bool,
}

#[derive(Debug, Serialize)]
pub struct Metrics {
    pub accepted_macro: usize,
    pub accepted_micro: usize,
    pub rejected_macro: usize,
    pub rejected_micro: usize,
    pub total_steps: usize,
    pub workload: u64,
    pub scalar_rhs: u64,
    pub rhs_calls: u64,
    pub jacobian_calls: u64,
    pub wall_time_s: f64,
}

impl Metrics {
    pub fn of(trace: &IntegrationTrace, wall_time_s: f64) -> Self {
        Self {
            accepted_macro: trace.accepted_macro(),
            accepted_micro: trace.accepted_micro(),
            rejected_macro: trace.rejected_macro,
            rejected_micro: trace.rejected_micro,
            total_steps: trace.total_steps(),
            workload: mrtrbdf2::multirate::workload(trace),
            scalar_rhs: trace.counters.scalar_rhs,
            rhs_calls: trace.counters.rhs_calls,
            jacobian_calls: trace.counters.jacobian_calls,
            wall_time_s,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorEntry {
    pub t: f64,
    pub vs_exact: Option<f64>,
    pub vs_reference: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub preset: String,
    pub mode: String,
    pub dim: usize,
    pub t0: f64,
    pub t_end: f64,
    pub config: ConfigSnapshot,
    pub params: BTreeMap<String, f64>,
    pub spatial: Option<SpatialSnapshot>,
    pub determinism: String,
    pub outputs: Vec<String>,
    pub metrics: Metrics,
    pub errors: Vec<ErrorEntry>,
}

impl RunManifest {
    pub fn describe(preset: &BenchmarkPreset) -> (BTreeMap<String, f64>, Option<SpatialSnapshot>) {
        let params = preset.params.iter().cloned().collect();
        let spatial = preset.spatial.as_ref().map(|s| SpatialSnapshot {
            n_cells: s.centers.len(),
            dx: s.dx,
            x_first: s.centers.first().copied().unwrap_or(0.0),
            x_last: s.centers.last().copied().unwrap_or(0.0),
            flux_known: s.flux_derivative.is_some(),
        });
        (params, spatial)
    }
}

pub const DETERMINISM_NOTE: &str =
    "single-threaded integration with no random inputs; repeated runs on one build produce identical files";

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Expands the output of [`compress_ranges`].
    fn expand_ranges(s: &str) -> Option<Vec<usize>> {
        let mut out = Vec::new();
        for part in s.split(';').filter(|p| !p.is_empty()) {
            match part.split_once('-') {
                Some((a, b)) => out.extend(a.parse::<usize>().ok()?..=b.parse::<usize>().ok()?),
                None => out.push(part.parse().ok()?),
            }
        }
        Some(out)
    }

    #[test]
    fn ranges_compress() {
        assert_eq!(compress_ranges(&[]), "");
        assert_eq!(compress_ranges(&[3]), "3");
        assert_eq!(compress_ranges(&[0, 1, 2, 5, 7, 8]), "0-2;5;7-8");
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    proptest! {
        #[test]
        fn ranges_round_trip(set in proptest::collection::btree_set(0usize..500, 0..80)) {
            let v: Vec<usize> = set.into_iter().collect();
            prop_assert_eq!(expand_ranges(&compress_ranges(&v)).unwrap(), v);
        }
    }
}

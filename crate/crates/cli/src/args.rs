//! Command-line flags and the optional `key=value` config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "mrtrbdf2", version, about = "Multirate TR-BDF2 benchmarks and stability sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate one benchmark preset and write trajectory, trace and summary files.
    Run(RunArgs),
    /// Sweep amplification-matrix norms over rescaled step sizes.
    Stability(StabilityArgs),
    /// Run single-rate and multirate integrations over a list of tolerances.
    Compare(CompareArgs),
}

/// Preset selection and solver settings shared by `run` and `compare`.
#[derive(Args, Debug, Clone, Default)]
pub struct PresetArgs {
    /// inverter_chain, inverter_chain_full, reaction_diffusion, advection or burgers.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub tol_rel: Option<f64>,
    #[arg(long)]
    pub tol_abs: Option<f64>,
    /// Active-set threshold relative to the largest normalized error.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Step-size safety factor.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub h0: Option<f64>,
    /// linear or hermite.
    #[arg(long)]
    pub interp: Option<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Number of cells for the PDE presets.
    #[arg(long)]
    pub cells: Option<usize>,
    /// Number of inverters.
    #[arg(long)]
    pub m: Option<usize>,
    /// Left Riemann state (Burgers).
    #[arg(long, allow_hyphen_values = true)]
    pub ul: Option<f64>,
    /// Right Riemann state (Burgers).
    #[arg(long, allow_hyphen_values = true)]
    pub ur: Option<f64>,
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub preset: PresetArgs,
    /// single or multi.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Do not compute the tight-tolerance reference solution.
    #[arg(long)]
    pub skip_reference: bool,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    #[command(flatten)]
    pub preset: PresetArgs,
    /// Comma-separated tolerance levels.
    #[arg(long, value_delimiter = ',')]
    pub tols: Vec<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct StabilityArgs {
    /// sys1, sys2, sys2_nofriction, heat40, advdiff40 or adv40.
    #[arg(long)]
    pub system: Option<String>,
    /// Square matrix as CSV rows (comma or whitespace separated).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Active components: comma-separated indices, `all` or `none`.
    #[arg(long)]
    pub active: Option<String>,
    /// linear, hermite or both.
    #[arg(long, default_value = "both")]
    pub kind: String,
    #[arg(long, default_value_t = 60)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub max: f64,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", no + 1)))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

fn take<T: FromStr>(map: &mut BTreeMap<String, String>, key: &str, slot: &mut Option<T>) -> Result<(), CliError> {
    if let Some(v) = map.remove(key) {
        let parsed = v
            .parse()
            .map_err(|_| CliError::Config(format!("config key '{key}': cannot parse '{v}'")))?;
        if slot.is_none() {
            *slot = Some(parsed);
        }
    }
    Ok(())
}

/// Config-file entries not consumed by the preset flags.
pub struct Leftover(BTreeMap<String, String>);

impl Leftover {
    pub fn take<T: FromStr>(&mut self, key: &str, slot: &mut Option<T>) -> Result<(), CliError> {
        take(&mut self.0, key, slot)
    }

    pub fn finish(self) -> Result<(), CliError> {
        match self.0.keys().next() {
            Some(k) => Err(CliError::Config(format!("unknown config key '{k}'"))),
            None => Ok(()),
        }
    }
}

impl PresetArgs {
    /// Fills unset flags from the config file, if any.
    pub fn merged(&self) -> Result<(PresetArgs, Leftover), CliError> {
        let mut out = self.clone();
        let Some(path) = &self.config else {
            return Ok((out, Leftover(BTreeMap::new())));
        };
        let mut map = parse_config(&read_config(path)?)?;
        take(&mut map, "preset", &mut out.preset)?;
        take(&mut map, "tol-rel", &mut out.tol_rel)?;
        take(&mut map, "tol-abs", &mut out.tol_abs)?;
        take(&mut map, "delta", &mut out.delta)?;
        take(&mut map, "nu", &mut out.nu)?;
        take(&mut map, "h0", &mut out.h0)?;
        take(&mut map, "interp", &mut out.interp)?;
        take(&mut map, "t-end", &mut out.t_end)?;
        take(&mut map, "cells", &mut out.cells)?;
        take(&mut map, "m", &mut out.m)?;
        take(&mut map, "ul", &mut out.ul)?;
        take(&mut map, "ur", &mut out.ur)?;
        Ok((out, Leftover(map)))
    }
}

fn read_config(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))
}

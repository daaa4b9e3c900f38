//! Builds benchmark presets from resolved flags.

use mrtrbdf2::benchmarks::{
    burgers_riemann, inverter_chain, linear_advection, reaction_diffusion, BenchmarkPreset, InverterParams,
    ReactionDiffusionParams,
};
use mrtrbdf2::controller::ToleranceSpec;
use mrtrbdf2::multirate::InterpolantKind;

use crate::args::PresetArgs;
use crate::error::CliError;

pub const PRESET_NAMES: [&str; 5] = ["inverter_chain", "inverter_chain_full", "reaction_diffusion", "advection", "burgers"];

const DEFAULT_ADVECTION_CELLS: usize = 400;
const DEFAULT_BURGERS_CELLS: usize = 400;

fn reject(flag: &str, set: bool, preset: &str) -> Result<(), CliError> {
    if set {
        Err(CliError::Config(format!("--{flag} does not apply to preset '{preset}'")))
    } else {
        Ok(())
    }
}

/// Builds the named preset and applies tolerance, controller and interpolant overrides.
pub fn build_preset(a: &PresetArgs) -> Result<BenchmarkPreset, CliError> {
    let name = a
        .preset
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("--preset is required (one of {})", PRESET_NAMES.join(", "))))?;
    let riemann = a.ul.is_some() || a.ur.is_some();
    let mut preset = match name {
        "inverter_chain" | "inverter_chain_full" => {
            reject("cells", a.cells.is_some(), name)?;
            reject("ul/--ur", riemann, name)?;
            let base = if name == "inverter_chain" {
                InverterParams::desk()
            } else {
                InverterParams::full()
            };
            inverter_chain(InverterParams {
                m: a.m.unwrap_or(base.m),
                t_end: a.t_end.unwrap_or(base.t_end),
                ..base
            })?
        }
        "reaction_diffusion" => {
            reject("m", a.m.is_some(), name)?;
            reject("ul/--ur", riemann, name)?;
            let base = ReactionDiffusionParams::default();
            reaction_diffusion(ReactionDiffusionParams {
                n_cells: a.cells.unwrap_or(base.n_cells),
                t_end: a.t_end.unwrap_or(base.t_end),
                ..base
            })?
        }
        "advection" => {
            reject("m", a.m.is_some(), name)?;
            reject("ul/--ur", riemann, name)?;
            let p = linear_advection(a.cells.unwrap_or(DEFAULT_ADVECTION_CELLS))?;
            match a.t_end {
                Some(t) => p.with_t_end(t)?,
                None => p,
            }
        }
        "burgers" => {
            reject("m", a.m.is_some(), name)?;
            let p = burgers_riemann(a.cells.unwrap_or(DEFAULT_BURGERS_CELLS), a.ul.unwrap_or(1.0), a.ur.unwrap_or(0.0))?;
            match a.t_end {
                Some(t) => p.with_t_end(t)?,
                None => p,
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown preset '{other}' (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    apply_overrides(&mut preset, a)?;
    Ok(preset)
}

fn apply_overrides(p: &mut BenchmarkPreset, a: &PresetArgs) -> Result<(), CliError> {
    let cfg = &mut p.config;
    if a.tol_rel.is_some() || a.tol_abs.is_some() {
        cfg.tolerances = ToleranceSpec::new(
            a.tol_rel.unwrap_or(cfg.tolerances.tau_r),
            a.tol_abs.unwrap_or(cfg.tolerances.tau_a),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(d) = a.delta {
        cfg.controller.delta = d;
    }
    if let Some(nu) = a.nu {
        cfg.controller.nu = nu;
    }
    if let Some(h0) = a.h0 {
        cfg.h0 = h0;
    }
    if let Some(kind) = &a.interp {
        cfg.interpolant = kind.parse::<InterpolantKind>().map_err(CliError::Config)?;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))
}

/// Integration mode for `run`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Single,
    Multi,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "single" => Ok(Self::Single),
            "multi" | "multirate" => Ok(Self::Multi),
            other => Err(CliError::Config(format!("unknown mode '{other}' (expected single or multi)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Single => "single",
            Self::Multi => "multi",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(preset: &str) -> PresetArgs {
        PresetArgs {
            preset: Some(preset.into()),
            ..Default::default()
        }
    }

    #[test]
    fn every_named_preset_builds() {
        for name in PRESET_NAMES {
            let p = build_preset(&args(name)).unwrap();
            assert_eq!(p.u0.len(), p.problem.dim());
        }
    }

    #[test]
    fn overrides_reach_the_config() {
        let p = build_preset(&PresetArgs {
            tol_rel: Some(1e-3),
            delta: Some(0.2),
            nu: Some(0.8),
            h0: Some(1e-3),
            interp: Some("linear".into()),
            cells: Some(50),
            t_end: Some(0.5),
            ..args("burgers")
        })
        .unwrap();
        assert_eq!(p.problem.dim(), 50);
        assert_eq!(p.t_end, 0.5);
        assert_eq!(p.config.tolerances.tau_r, 1e-3);
        assert_eq!(p.config.controller.delta, 0.2);
        assert_eq!(p.config.controller.nu, 0.8);
        assert_eq!(p.config.h0, 1e-3);
        assert_eq!(p.config.interpolant, InterpolantKind::Linear);
    }

    #[test]
    fn invalid_settings_are_config_errors() {
        let bad = [
            PresetArgs::default(),
            args("lorenz"),
            PresetArgs { delta: Some(1.5), ..args("burgers") },
            PresetArgs { tol_rel: Some(-1.0), ..args("burgers") },
            PresetArgs { interp: Some("spline".into()), ..args("burgers") },
            PresetArgs { m: Some(10), ..args("burgers") },
            PresetArgs { cells: Some(10), ..args("inverter_chain") },
        ];
        for a in bad {
            assert!(matches!(build_preset(&a), Err(CliError::Config(_))), "{a:?}");
        }
        assert!(Mode::parse("both").is_err());
    }
}

//! JSON run configuration: schema, frozen presets, loading, validation,
//! and resolution into the solver types.
//!
//! A config is a single JSON document with five blocks:
//!
//! ```json
//! {
//!   "model": {
//!     "a_max": 2.0,
//!     "mu": {"constant": 0.1},
//!     "k": {"triangular": {"scale": 2.7187284991507189}},
//!     "p": {"constant": 1.0},
//!     "d_min": 0.5, "d_max": 1.5,
//!     "t_sample": 0.4, "m_scale": 1.0
//!   },
//!   "grid": {"h": 0.04, "t_end": 40.0},
//!   "controller": {"variant": "output", "d_star_used": "auto", "bias": 1.0},
//!   "initial": {"family": {"b0": 0.2, "c": 0.8, "theta": 1.0}},
//!   "output": {"csv": "run.csv", "summary": "summary.json", "stride": 1}
//! }
//! ```
//!
//! Age-dependent rates accept `{"constant": v}`, `{"triangular": {"scale": s}}`
//! (the tent `s·min(a, a_max − a)`), or `{"table": [[age, value], ...]}`.
//! The initial profile is `"equilibrium"`, a compatible `{"family"}` member,
//! or an explicit `{"table"}` of n+1 node values. `"d_star_used"` is either
//! the literal `"auto"` (solve the characteristic equation) or a number; the
//! multiplicative `bias` is applied on top of it. The `output` block is
//! optional and defaults to `run.csv` / `summary.json` with stride 1.
//!
//! Loading keeps the document as written (so presets round-trip exactly) and
//! separately resolves it into solver-ready pieces, validating every block.

use std::fs;
use std::path::Path;

use chemostat_core::control::{ControllerSpec, ControllerVariant};
use chemostat_core::grid::{AgeProfile, Grid};
use chemostat_core::model::{
    make_initial_profile, solve_d_star, AgeFn, Equilibrium, ModelParams,
};
use chemostat_core::scenarios::{scenario, InitialSetup, Preset};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Age-dependent rate specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FnSpec {
    Constant(f64),
    Triangular { scale: f64 },
    Table(Vec<(f64, f64)>),
}

impl FnSpec {
    pub fn to_age_fn(&self) -> AgeFn {
        match self {
            FnSpec::Constant(v) => AgeFn::Constant(*v),
            FnSpec::Triangular { scale } => AgeFn::Triangular { scale: *scale },
            FnSpec::Table(rows) => AgeFn::Table(rows.clone()),
        }
    }

    pub fn from_age_fn(f: &AgeFn) -> Self {
        match f {
            AgeFn::Constant(v) => FnSpec::Constant(*v),
            AgeFn::Triangular { scale } => FnSpec::Triangular { scale: *scale },
            AgeFn::Table(rows) => FnSpec::Table(rows.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub a_max: f64,
    pub mu: FnSpec,
    pub k: FnSpec,
    pub p: FnSpec,
    pub d_min: f64,
    pub d_max: f64,
    pub t_sample: f64,
    pub m_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub h: f64,
    pub t_end: f64,
}

/// Measurement channel driving the sampled feedback law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantSpec {
    OpenLoop,
    Newborn,
    Output,
}

impl VariantSpec {
    pub fn to_variant(self) -> ControllerVariant {
        match self {
            VariantSpec::OpenLoop => ControllerVariant::OpenLoop,
            VariantSpec::Newborn => ControllerVariant::NewbornFeedback,
            VariantSpec::Output => ControllerVariant::OutputFeedback,
        }
    }

    pub fn from_variant(v: ControllerVariant) -> Self {
        match v {
            ControllerVariant::OpenLoop => VariantSpec::OpenLoop,
            ControllerVariant::NewbornFeedback => VariantSpec::Newborn,
            ControllerVariant::OutputFeedback => VariantSpec::Output,
        }
    }
}

/// Either the literal string `"auto"` or an explicit rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DStarSpec {
    Value(f64),
    Keyword(String),
}

impl DStarSpec {
    pub fn auto() -> Self {
        DStarSpec::Keyword("auto".to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerBlock {
    pub variant: VariantSpec,
    pub d_star_used: DStarSpec,
    #[serde(default = "default_bias")]
    pub bias: f64,
}

fn default_bias() -> f64 {
    1.0
}

/// Initial age profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpec {
    /// Start exactly on the tabulated equilibrium ray.
    Equilibrium,
    /// Boundary-compatible two-parameter family member.
    Family { b0: f64, c: f64, theta: f64 },
    /// Explicit node values (length n + 1).
    Table(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_summary")]
    pub summary: String,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_csv() -> String {
    "run.csv".to_string()
}

fn default_summary() -> String {
    "summary.json".to_string()
}

fn default_stride() -> usize {
    1
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            csv: default_csv(),
            summary: default_summary(),
            stride: default_stride(),
        }
    }
}

/// One complete run description, exactly as written in the JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub grid: GridBlock,
    pub controller: ControllerBlock,
    pub initial: InitialSpec,
    #[serde(default)]
    pub output: OutputBlock,
}

/// A validated config resolved into solver inputs.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: ModelParams,
    pub grid: Grid,
    pub eq: Equilibrium,
    pub controller: ControllerSpec,
    pub initial: AgeProfile,
    pub t_end: f64,
    pub output: OutputBlock,
}

/// Reads, parses, and fully validates a config file. Invalid JSON is a
/// parse error; schema violations (missing or unknown fields, wrong types)
/// and contract violations are validation errors naming the offending field.
pub fn load_config(path: &Path) -> Result<(RunConfig, Resolved)> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => {
            CliError::Validation(format!("config schema: {e}"))
        }
        _ => CliError::Parse(format!("config is not valid JSON: {e}")),
    })?;
    let resolved = resolve(&cfg)?;
    Ok((cfg, resolved))
}

/// Validates every block and solves the pieces a run needs: the model
/// parameters, the equilibrium (also resolving `"auto"`), the controller
/// with its bias applied, and the tabulated initial profile.
pub fn resolve(cfg: &RunConfig) -> Result<Resolved> {
    let m = &cfg.model;
    let params = ModelParams::new(
        m.a_max,
        m.mu.to_age_fn(),
        m.k.to_age_fn(),
        m.p.to_age_fn(),
        m.d_min,
        m.d_max,
        m.t_sample,
        m.m_scale,
    )
    .map_err(|e| CliError::Validation(format!("model: {e}")))?;

    let grid = Grid::from_step(cfg.grid.h, m.a_max)
        .map_err(|e| CliError::Validation(format!("grid.h: {e}")))?;
    check_multiple(m.t_sample, cfg.grid.h, "model.t_sample: T/h not integer")?;
    if !(cfg.grid.t_end > 0.0) || !cfg.grid.t_end.is_finite() {
        return Err(CliError::Validation(format!(
            "grid.t_end must be positive and finite, got {}",
            cfg.grid.t_end
        )));
    }
    check_multiple(cfg.grid.t_end, cfg.grid.h, "grid.t_end: t_end/h not integer")?;
    if cfg.output.stride == 0 {
        return Err(CliError::Validation(
            "output.stride must be at least 1".to_string(),
        ));
    }

    let eq = solve_d_star(&params, grid)
        .map_err(|e| CliError::Validation(format!("model: {e}")))?;

    let d_base = match &cfg.controller.d_star_used {
        DStarSpec::Value(v) => {
            if !(*v > 0.0) || !v.is_finite() {
                return Err(CliError::Validation(format!(
                    "controller.d_star_used must be positive and finite, got {v}"
                )));
            }
            *v
        }
        DStarSpec::Keyword(s) if s == "auto" => eq.d_star,
        DStarSpec::Keyword(s) => {
            return Err(CliError::Validation(format!(
                "controller.d_star_used must be \"auto\" or a number, got \"{s}\""
            )));
        }
    };
    if !(cfg.controller.bias > 0.0) || !cfg.controller.bias.is_finite() {
        return Err(CliError::Validation(format!(
            "controller.bias must be positive and finite, got {}",
            cfg.controller.bias
        )));
    }
    let variant = cfg.controller.variant.to_variant();
    let reference = match variant {
        ControllerVariant::NewbornFeedback => eq.f_star.values[0],
        ControllerVariant::OutputFeedback => eq.y_star,
        ControllerVariant::OpenLoop => 1.0,
    };
    let controller = ControllerSpec::new(
        variant,
        cfg.controller.bias * d_base,
        reference,
        m.t_sample,
        m.d_min,
        m.d_max,
    )
    .map_err(|e| CliError::Validation(format!("controller: {e}")))?;

    let initial = match &cfg.initial {
        InitialSpec::Equilibrium => eq.f_star.clone(),
        InitialSpec::Family { b0, c, theta } => {
            make_initial_profile(*b0, *c, *theta, &params, grid)
                .map_err(|e| CliError::Validation(format!("initial: {e}")))?
                .1
        }
        InitialSpec::Table(values) => {
            let profile = AgeProfile::new(grid, values.clone())
                .map_err(|e| CliError::Validation(format!("initial.table: {e}")))?;
            profile
                .check_interior_positive(None)
                .map_err(|e| CliError::Validation(format!("initial.table: {e}")))?;
            profile
        }
    };

    Ok(Resolved {
        params,
        grid,
        eq,
        controller,
        initial,
        t_end: cfg.grid.t_end,
        output: cfg.output.clone(),
    })
}

fn check_multiple(value: f64, h: f64, label: &str) -> Result<()> {
    let ratio = value / h;
    if ratio < 0.5 || (ratio.round() * h - value).abs() > 1e-9 * value.abs().max(1.0) {
        return Err(CliError::Validation(format!(
            "{label} (value {value}, h {h})"
        )));
    }
    Ok(())
}

/// The frozen study presets, expressed as configs. Serializing and loading
/// one reproduces the identical config (and therefore an identical run).
pub fn preset_config(preset: Preset) -> RunConfig {
    let s = scenario(preset);
    RunConfig {
        model: ModelBlock {
            a_max: s.params.a_max,
            mu: FnSpec::from_age_fn(&s.params.mu),
            k: FnSpec::from_age_fn(&s.params.k),
            p: FnSpec::from_age_fn(&s.params.p),
            d_min: s.params.d_min,
            d_max: s.params.d_max,
            t_sample: s.params.t_sample,
            m_scale: s.params.m_scale,
        },
        grid: GridBlock {
            h: s.grid.h,
            t_end: s.t_end,
        },
        controller: ControllerBlock {
            variant: VariantSpec::from_variant(s.controller.variant),
            d_star_used: DStarSpec::auto(),
            bias: s.controller.d_star_scale,
        },
        initial: match s.initial {
            InitialSetup::Family { b0, c, theta } => InitialSpec::Family { b0, c, theta },
            InitialSetup::Equilibrium => InitialSpec::Equilibrium,
        },
        output: OutputBlock {
            csv: format!("{}.csv", preset.name()),
            summary: format!("{}_summary.json", preset.name()),
            stride: 1,
        },
    }
}

/// Looks a preset up by name, listing the alternatives on failure.
pub fn preset_by_name(name: &str) -> Result<Preset> {
    Preset::from_name(name).ok_or_else(|| {
        let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
        CliError::Validation(format!(
            "unknown preset \"{name}\"; expected one of {}",
            names.join(", ")
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_json() {
        for preset in Preset::ALL {
            let cfg = preset_config(preset);
            let text = serde_json::to_string_pretty(&cfg).unwrap();
            let back: RunConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, cfg, "{} did not round-trip", preset.name());
            resolve(&back).unwrap();
        }
    }

    #[test]
    fn misaligned_sampling_period_is_named() {
        let mut cfg = preset_config(Preset::Sim1);
        cfg.model.t_sample = 0.41;
        let err = resolve(&cfg).unwrap_err();
        match err {
            CliError::Validation(msg) => assert!(msg.contains("T/h not integer"), "{msg}"),
            other => panic!("wrong class: {other}"),
        }
    }

    #[test]
    fn misaligned_horizon_is_named() {
        let mut cfg = preset_config(Preset::Sim1);
        cfg.grid.t_end = 40.01;
        let err = resolve(&cfg).unwrap_err();
        match err {
            CliError::Validation(msg) => assert!(msg.contains("t_end/h"), "{msg}"),
            other => panic!("wrong class: {other}"),
        }
    }

    #[test]
    fn bad_dilution_keyword_is_rejected() {
        let mut cfg = preset_config(Preset::Sim1);
        cfg.controller.d_star_used = DStarSpec::Keyword("solve".to_string());
        assert!(matches!(resolve(&cfg), Err(CliError::Validation(_))));
    }

    #[test]
    fn explicit_table_initial_resolves() {
        let mut cfg = preset_config(Preset::Sim1);
        let res = resolve(&cfg).unwrap();
        cfg.initial = InitialSpec::Table(res.eq.f_star.values.clone());
        let res2 = resolve(&cfg).unwrap();
        assert_eq!(res2.initial.values, res.eq.f_star.values);
    }

    #[test]
    fn resolved_preset_matches_scenario_materialization() {
        use chemostat_core::scenarios::materialize;
        for preset in Preset::ALL {
            let cfg = preset_config(preset);
            let res = resolve(&cfg).unwrap();
            let s = scenario(preset);
            let m = materialize(&s).unwrap();
            assert_eq!(res.controller, m.controller, "{}", preset.name());
            assert_eq!(res.initial.values, m.initial.values, "{}", preset.name());
            assert_eq!(res.eq.d_star, m.eq.d_star);
        }
    }
}

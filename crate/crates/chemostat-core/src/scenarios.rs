//! Bundled study scenarios on a common benchmark model: triangular birth
//! modulus on `[0, 2]` tuned so the equilibrium dilution rate is exactly 1,
//! constant mortality 0.1, unit output weight, clamp `[0.5, 1.5]`, sampling
//! period 0.4, grid step 0.04.

use crate::control::{ControllerSpec, ControllerVariant};
use crate::error::Result;
use crate::grid::{AgeProfile, Grid};
use crate::model::{
    make_initial_profile, solve_d_star, triangular_birth_scale, AgeFn, Equilibrium, InitialFamily,
    ModelParams,
};

/// Named bundled scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Output feedback from a mild perturbation (b0 = 0.2, c = 0.8, θ = 1).
    Sim1,
    /// Output feedback from a large perturbation (b0 = 1, c = 4, θ = 1).
    Sim2,
    /// Newborn feedback with the dilution target biased 30% low.
    Sim3Newborn,
    /// Output feedback with the dilution target biased 30% low.
    Sim3Output,
    /// Open loop at the equilibrium rate, started on the equilibrium.
    OpenLoop,
}

impl Preset {
    pub const ALL: [Preset; 5] =
        [Preset::Sim1, Preset::Sim2, Preset::Sim3Newborn, Preset::Sim3Output, Preset::OpenLoop];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Sim1 => "sim1",
            Preset::Sim2 => "sim2",
            Preset::Sim3Newborn => "sim3_newborn",
            Preset::Sim3Output => "sim3_output",
            Preset::OpenLoop => "openloop",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

/// Initial data selection of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialSetup {
    /// Boundary-compatible family member.
    Family { b0: f64, c: f64, theta: f64 },
    /// Start exactly on the tabulated equilibrium.
    Equilibrium,
}

/// Controller selection: measurement source and the multiplicative bias
/// applied to the solved equilibrium rate (1 = unbiased).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerSetup {
    pub variant: ControllerVariant,
    pub d_star_scale: f64,
}

/// Declarative description of one study run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: ModelParams,
    pub grid: Grid,
    pub controller: ControllerSetup,
    pub initial: InitialSetup,
    pub t_end: f64,
}

/// Everything a scenario needs solved before it can run.
#[derive(Debug, Clone)]
pub struct Materialized {
    pub eq: Equilibrium,
    pub controller: ControllerSpec,
    pub initial: AgeProfile,
    pub family: Option<InitialFamily>,
}

/// The common benchmark model.
pub fn benchmark_model() -> ModelParams {
    let g = triangular_birth_scale(0.1, 1.0);
    ModelParams::new(
        2.0,
        AgeFn::Constant(0.1),
        AgeFn::Triangular { scale: g },
        AgeFn::Constant(1.0),
        0.5,
        1.5,
        0.4,
        1.0,
    )
    .expect("benchmark model parameters are valid")
}

/// The bundled scenario behind a preset name.
pub fn scenario(preset: Preset) -> Scenario {
    let params = benchmark_model();
    let grid = Grid::new(0.04, 50).expect("benchmark grid is valid");
    let (controller, initial, t_end) = match preset {
        Preset::Sim1 => (
            ControllerSetup { variant: ControllerVariant::OutputFeedback, d_star_scale: 1.0 },
            InitialSetup::Family { b0: 0.2, c: 0.8, theta: 1.0 },
            40.0,
        ),
        Preset::Sim2 => (
            ControllerSetup { variant: ControllerVariant::OutputFeedback, d_star_scale: 1.0 },
            InitialSetup::Family { b0: 1.0, c: 4.0, theta: 1.0 },
            40.0,
        ),
        Preset::Sim3Newborn => (
            ControllerSetup { variant: ControllerVariant::NewbornFeedback, d_star_scale: 0.7 },
            InitialSetup::Family { b0: 0.2, c: 0.8, theta: 1.0 },
            40.0,
        ),
        Preset::Sim3Output => (
            ControllerSetup { variant: ControllerVariant::OutputFeedback, d_star_scale: 0.7 },
            InitialSetup::Family { b0: 0.2, c: 0.8, theta: 1.0 },
            40.0,
        ),
        Preset::OpenLoop => (
            ControllerSetup { variant: ControllerVariant::OpenLoop, d_star_scale: 1.0 },
            InitialSetup::Equilibrium,
            20.0,
        ),
    };
    Scenario { params, grid, controller, initial, t_end }
}

/// Solves the equilibrium, builds the controller around the (possibly
/// biased) target, and tabulates the initial profile. The feedback
/// reference is the equilibrium value of the measured channel, so an
/// unbiased controller holds the equilibrium exactly.
pub fn materialize(s: &Scenario) -> Result<Materialized> {
    let eq = solve_d_star(&s.params, s.grid)?;
    let d_used = s.controller.d_star_scale * eq.d_star;
    let reference = match s.controller.variant {
        ControllerVariant::NewbornFeedback => eq.f_star.values[0],
        ControllerVariant::OutputFeedback => eq.y_star,
        ControllerVariant::OpenLoop => 1.0,
    };
    let controller = ControllerSpec::new(
        s.controller.variant,
        d_used,
        reference,
        s.params.t_sample,
        s.params.d_min,
        s.params.d_max,
    )?;
    let (family, initial) = match s.initial {
        InitialSetup::Family { b0, c, theta } => {
            let (fam, f0) = make_initial_profile(b0, c, theta, &s.params, s.grid)?;
            (Some(fam), f0)
        }
        InitialSetup::Equilibrium => (None, eq.f_star.clone()),
    };
    Ok(Materialized { eq, controller, initial, family })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(Preset::from_name(p.name()), Some(p));
        }
        assert_eq!(Preset::from_name("sim4"), None);
    }

    #[test]
    fn benchmark_equilibrium_rate_is_one() {
        let s = scenario(Preset::Sim1);
        let m = materialize(&s).unwrap();
        assert_abs_diff_eq!(m.eq.d_star, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.controller.d_star_used, 1.0, epsilon = 1e-12);
        assert_eq!(m.family.unwrap().b0, 0.2);
    }

    #[test]
    fn biased_presets_scale_the_target_only() {
        let m3 = materialize(&scenario(Preset::Sim3Output)).unwrap();
        assert_abs_diff_eq!(m3.controller.d_star_used, 0.7, epsilon = 1e-12);
        // The reference stays at the true equilibrium output.
        let m1 = materialize(&scenario(Preset::Sim1)).unwrap();
        assert_eq!(m3.controller.reference, m1.controller.reference);
        let mn = materialize(&scenario(Preset::Sim3Newborn)).unwrap();
        assert_eq!(mn.controller.variant, ControllerVariant::NewbornFeedback);
        assert_abs_diff_eq!(mn.controller.reference, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn open_loop_preset_starts_on_the_equilibrium() {
        let m = materialize(&scenario(Preset::OpenLoop)).unwrap();
        assert_eq!(m.initial, m.eq.f_star);
        assert!(m.family.is_none());
    }
}

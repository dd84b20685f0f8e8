//! Characteristic-aligned simulator for the controlled transport equation.
//!
//! With time step equal to the age step, the balance law
//!
//! ```text
//! ∂f/∂t + ∂f/∂a = −(μ(a) + D(t)) f
//! ```
//!
//! is integrated exactly along characteristics: over one step the dilution
//! rate is constant (zero-order hold), so
//!
//! ```text
//! f(t+h, a_j) = f(t, a_{j−1}) · exp(−∫_{a_{j−1}}^{a_j} μ − D h),
//! ```
//!
//! with the cumulative mortality taken in closed form. The only
//! discretisation error in the scheme therefore comes from the renewal and
//! output quadratures. Each step proceeds as: renewal boundary, measured
//! output, controller sample-or-hold, transport. The boundary node is
//! poisoned with NaN during transport and refilled by the next renewal
//! integral, so a stale boundary read cannot go unnoticed.

use crate::control::{hold, sample_control, ControllerSpec, ControllerVariant, HoldState};
use crate::error::{Error, Result};
use crate::grid::AgeProfile;
use crate::model::{AgeFn, Equilibrium, ModelParams};
use crate::quadrature::{integrate_profile, Weight};

/// Snapshot handed to run observers after each completed step.
#[derive(Debug)]
pub struct SimState<'a> {
    pub step: usize,
    pub profile: &'a AgeProfile,
    pub current_d: f64,
}

/// Per-step scalars recorded along a run. `d` is the dilution rate in effect
/// on `[t, t+h)`; `w` is the sup-norm log deviation from the reference
/// equilibrium and `ratio_min`/`ratio_max` the node-wise ratio envelope it
/// derives from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub d: f64,
    pub f_boundary: f64,
    pub y: f64,
    pub w: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

/// Scalar time series of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    /// Step width (equal to the age step).
    pub h: f64,
    /// Steps per sampling period.
    pub per: usize,
    pub records: Vec<StepRecord>,
}

impl TimeSeries {
    /// `(t, w)` pairs for decay-rate fitting.
    pub fn w_samples(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.w)).collect()
    }
}

/// Completed run: the recorded series and the final profile (boundary node
/// freshly renewed).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub final_profile: AgeProfile,
}

/// Shifts the profile one cell up the age axis with exact per-cell decay.
/// The boundary node is left NaN for the following renewal integral.
pub fn transport_step(profile: &mut AgeProfile, params: &ModelParams, d: f64) {
    let grid = profile.grid;
    let h = grid.h;
    match &params.mu {
        AgeFn::Constant(m) => {
            let decay = (-(m + d) * h).exp();
            for j in (1..=grid.n).rev() {
                profile.values[j] = profile.values[j - 1] * decay;
            }
        }
        _ => {
            for j in (1..=grid.n).rev() {
                let died = params.mu_cum(grid.age(j)) - params.mu_cum(grid.age(j - 1));
                profile.values[j] = profile.values[j - 1] * (-(died + d * h)).exp();
            }
        }
    }
    profile.values[0] = f64::NAN;
}

/// Evaluates the renewal integral `∫ k f` from the interior nodes, writes it
/// into the boundary node, and returns it.
pub fn renewal_boundary(profile: &mut AgeProfile, params: &ModelParams) -> Result<f64> {
    let b = integrate_profile(profile, Weight::Weighted(&params.k))?;
    profile.values[0] = b;
    Ok(b)
}

/// Measured output `y = ∫ p f`.
pub fn measured_output(profile: &AgeProfile, params: &ModelParams) -> Result<f64> {
    integrate_profile(profile, Weight::Weighted(&params.p))
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::NonPositiveProfile { node, value, step: None } => {
            Error::NonPositiveProfile { node, value, step: Some(step) }
        }
        other => other,
    }
}

/// Runs the closed loop from `f0` up to `t_end`, recording every step and
/// calling `observer` after each one. The sampling period and the horizon
/// must both be integer multiples of the grid step; a non-positive interior
/// node aborts with the offending node and step.
pub fn run_simulation_observed(
    params: &ModelParams,
    eq: &Equilibrium,
    ctrl: &ControllerSpec,
    f0: &AgeProfile,
    t_end: f64,
    mut observer: impl FnMut(&SimState<'_>),
) -> Result<RunOutput> {
    let grid = f0.grid;
    if grid != eq.f_star.grid {
        return Err(Error::InvalidModel(
            "initial profile and equilibrium live on different grids".into(),
        ));
    }
    let per = grid.steps_of(ctrl.t_sample, "sampling period")?;
    let steps = grid.steps_of(t_end, "run horizon")?;
    f0.check_interior_positive(Some(0))?;

    let mut profile = f0.clone();
    let mut hold_state =
        HoldState { current_d: ctrl.clamp(ctrl.d_star_used), last_sample_step: 0 };
    let mut records = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let boundary = renewal_boundary(&mut profile, params).map_err(|e| at_step(e, i))?;
        let y = measured_output(&profile, params).map_err(|e| at_step(e, i))?;
        let sample = if i % per == 0 {
            let m = match ctrl.variant {
                ControllerVariant::NewbornFeedback => boundary,
                _ => y,
            };
            Some(sample_control(m, ctrl)?)
        } else {
            None
        };
        let d = hold(&mut hold_state, i, per, sample);
        let (ratio_min, ratio_max) =
            crate::metrics::ratio_envelope(&profile, &eq.f_star).map_err(|e| at_step(e, i))?;
        let w = ratio_max.ln().max(-ratio_min.ln());
        records.push(StepRecord {
            step: i,
            t: i as f64 * grid.h,
            d,
            f_boundary: boundary,
            y,
            w,
            ratio_min,
            ratio_max,
        });
        observer(&SimState { step: i, profile: &profile, current_d: d });
        if i < steps {
            transport_step(&mut profile, params, d);
            profile.check_interior_positive(Some(i + 1))?;
        }
    }
    Ok(RunOutput { series: TimeSeries { h: grid.h, per, records }, final_profile: profile })
}

/// [`run_simulation_observed`] without an observer.
pub fn run_simulation(
    params: &ModelParams,
    eq: &Equilibrium,
    ctrl: &ControllerSpec,
    f0: &AgeProfile,
    t_end: f64,
) -> Result<RunOutput> {
    run_simulation_observed(params, eq, ctrl, f0, t_end, |_| {})
}

//! Sampled-data dilution-rate feedback with clamping and zero-order hold.
//!
//! Every sampling period `T` the controller reads one positive scalar
//! measurement `m` (newborn density or weighted output) and applies
//!
//! ```text
//! D = clamp(d* + T⁻¹ ln(m / r), [d_min, d_max]),
//! ```
//!
//! holding the value constant until the next sample. Internally the law is
//! kept in intercept form `D = clamp(q + T⁻¹ ln m)` with
//! `q = d* − T⁻¹ ln r` frozen at construction: two controllers with equal
//! intercepts are the *same* sampling map, which makes the set-point-shift
//! identity (re-expressing the law around another dilution target) exact bit
//! for bit rather than merely up to rounding.

use crate::error::{Error, Result};

/// Measurement source of the feedback law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerVariant {
    /// Ignores measurements and applies the clamped target rate.
    OpenLoop,
    /// Feeds back the newborn density `f(t, 0)`.
    NewbornFeedback,
    /// Feeds back the weighted output `∫ p f`.
    OutputFeedback,
}

/// Immutable description of one controller instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    pub variant: ControllerVariant,
    /// Dilution target the law is expressed around (possibly biased away
    /// from the true equilibrium rate).
    pub d_star_used: f64,
    /// Reference measurement `r` the target corresponds to.
    pub reference: f64,
    /// Sampling period `T`.
    pub t_sample: f64,
    pub d_min: f64,
    pub d_max: f64,
    intercept: f64,
}

impl ControllerSpec {
    pub fn new(
        variant: ControllerVariant,
        d_star_used: f64,
        reference: f64,
        t_sample: f64,
        d_min: f64,
        d_max: f64,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if !(reference > 0.0) || !reference.is_finite() {
            return bad(format!("controller reference {reference} must be positive and finite"));
        }
        if !(t_sample > 0.0) || !t_sample.is_finite() {
            return bad(format!("sampling period {t_sample} must be positive and finite"));
        }
        if !d_min.is_finite() || !d_max.is_finite() || d_min >= d_max {
            return bad(format!("dilution clamp [{d_min}, {d_max}] must satisfy d_min < d_max"));
        }
        if !d_star_used.is_finite() {
            return bad(format!("dilution target {d_star_used} must be finite"));
        }
        let intercept = d_star_used - reference.ln() / t_sample;
        Ok(Self { variant, d_star_used, reference, t_sample, d_min, d_max, intercept })
    }

    /// Frozen intercept `q = d_star_used − T⁻¹ ln reference`.
    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn clamp(&self, d: f64) -> f64 {
        d.clamp(self.d_min, self.d_max)
    }

    /// The same sampling map re-expressed around `new_d_star`: the intercept
    /// is copied verbatim and the reference recomputed as
    /// `exp((new_d_star − q) T)`, so sampled outputs are bitwise unchanged.
    pub fn with_set_point_shift(&self, new_d_star: f64) -> Self {
        Self {
            variant: self.variant,
            d_star_used: new_d_star,
            reference: ((new_d_star - self.intercept) * self.t_sample).exp(),
            t_sample: self.t_sample,
            d_min: self.d_min,
            d_max: self.d_max,
            intercept: self.intercept,
        }
    }
}

/// One sampling event: maps a positive measurement to the clamped dilution
/// rate. The open-loop variant ignores the measurement value (it must still
/// be positive, keeping the call sites honest about what they feed in).
pub fn sample_control(measurement: f64, spec: &ControllerSpec) -> Result<f64> {
    if !(measurement > 0.0) || !measurement.is_finite() {
        return Err(Error::NonPositiveMeasurement { value: measurement });
    }
    match spec.variant {
        ControllerVariant::OpenLoop => Ok(spec.clamp(spec.d_star_used)),
        _ => Ok(spec.clamp(spec.intercept + measurement.ln() / spec.t_sample)),
    }
}

/// Zero-order-hold state between sampling events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoldState {
    pub current_d: f64,
    pub last_sample_step: usize,
}

/// Advances the hold: at sampling steps (`step` divisible by `per`) the
/// freshly sampled value replaces the held one; in between the held value is
/// returned unchanged.
pub fn hold(state: &mut HoldState, step: usize, per: usize, new_sample: Option<f64>) -> f64 {
    if step % per == 0 {
        if let Some(d) = new_sample {
            state.current_d = d;
            state.last_sample_step = step;
        }
    }
    state.current_d
}

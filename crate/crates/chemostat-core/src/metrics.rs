//! Stability functionals and rate constants measured from run data.
//!
//! Convergence to the equilibrium ray is tracked in the sup log metric
//!
//! ```text
//! w(t) = max_j |ln(f(t, a_j) / f*(a_j))|,
//! ```
//!
//! computed from the node-wise ratio envelope. The sampled-data theory
//! guarantees, for the clamped feedback law with margins
//! `(d_max − d*) T` and `(d* − d_min) T`, a per-period contraction governed
//! by the dead-zone radius
//!
//! ```text
//! δ = ½ min((d_max − d*) T, (d* − d_min) T),
//! δ̃ = min(δ, ε T),    σ = δ̃ / (4T),
//! ```
//!
//! where `ε` is the internal decay rate of the uncontrolled renewal
//! dynamics. [`per_period_contraction`] checks the underlying sample-to-
//! sample inequality directly on recorded data.

use crate::control::{ControllerSpec, ControllerVariant};
use crate::error::{Error, Result};
use crate::grid::AgeProfile;
use crate::pde_sim::TimeSeries;

/// Smallest deviation magnitude considered informative by the decay fits;
/// below this the series is roundoff noise.
pub const FIT_FLOOR: f64 = 1e-12;

/// Node-wise ratio envelope `(min_j f/f*, max_j f/f*)` over all nodes,
/// boundary included. Both profiles must be strictly positive.
pub fn ratio_envelope(profile: &AgeProfile, reference: &AgeProfile) -> Result<(f64, f64)> {
    if profile.grid != reference.grid {
        return Err(Error::InvalidModel("ratio envelope needs matching grids".into()));
    }
    profile.check_all_positive(None)?;
    reference.check_all_positive(None)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (v, r) in profile.values.iter().zip(&reference.values) {
        let q = v / r;
        lo = lo.min(q);
        hi = hi.max(q);
    }
    Ok((lo, hi))
}

/// Sup log deviation `w = max(ln ratio_max, −ln ratio_min)`.
pub fn log_deviation(profile: &AgeProfile, reference: &AgeProfile) -> Result<f64> {
    let (lo, hi) = ratio_envelope(profile, reference)?;
    Ok(hi.ln().max(-lo.ln()))
}

/// Dead-zone radius and guaranteed decay rate of the sampled-data loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoreticalRates {
    /// Dead-zone radius `δ` from the clamp margins.
    pub delta: f64,
    /// `δ̃ = min(δ, ε T)`.
    pub delta_tilde: f64,
    /// Guaranteed exponential rate `σ = δ̃/(4T)` of the sampled deviation.
    pub sigma: f64,
}

/// Rates from the controller geometry and an internal decay rate `eps` of
/// the open-loop renewal dynamics (`f64::INFINITY` selects the pure clamp
/// bound). The target must sit strictly inside the clamp interval.
pub fn theoretical_rates(spec: &ControllerSpec, eps: f64) -> Result<TheoreticalRates> {
    let t = spec.t_sample;
    let up = (spec.d_max - spec.d_star_used) * t;
    let down = (spec.d_star_used - spec.d_min) * t;
    if up <= 0.0 || down <= 0.0 {
        return Err(Error::DegenerateMargin {
            d_star: spec.d_star_used,
            d_min: spec.d_min,
            d_max: spec.d_max,
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidModel(format!("internal decay rate {eps} must be positive")));
    }
    let delta = 0.5 * up.min(down);
    let delta_tilde = delta.min(eps * t);
    Ok(TheoreticalRates { delta, delta_tilde, sigma: delta_tilde / (4.0 * t) })
}

/// Mean-centred least squares line through `(x, y)` pairs.
pub(crate) fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Exponential decay rate of a deviation series: least-squares slope of
/// `ln w` over samples with `t >= t_start` and `w` above the roundoff floor.
/// Fewer than 10 usable samples cannot support a fit.
pub fn fit_decay_rate(samples: &[(f64, f64)], t_start: f64) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(t, w) in samples {
        if t >= t_start - 1e-12 && w >= FIT_FLOOR && w.is_finite() {
            xs.push(t);
            ys.push(w.ln());
        }
    }
    if xs.len() < 10 {
        return Err(Error::DegenerateFit { needed: 10, found: xs.len() });
    }
    let (slope, _) = least_squares_line(&xs, &ys);
    Ok(-slope)
}

/// Outcome of the per-period contraction check.
#[derive(Debug, Clone)]
pub struct ContractionReport {
    /// Dead-zone radius used in the inequality.
    pub delta: f64,
    /// Max over periods of `|x_{i+1}| − (|x_i| − min(|x_i|, 2δ) + |u_i|)`;
    /// nonpositive (up to the stated slack) when the claim holds.
    pub worst_excess: f64,
    /// Per-period excesses, one entry per completed sampling period.
    pub excesses: Vec<f64>,
}

/// Checks the sampled-data contraction claim on recorded run data.
///
/// With `m_i` the measurement at sample `i`, `x_i = ln(m_i / r)` the log
/// deviation from the reference of `canonical` (the controller re-expressed
/// around the true equilibrium rate `d*`), `D_i` the applied rate, and the
/// perturbation recovered from the data as
///
/// ```text
/// u_i = ln(m_{i+1}/m_i) + (D_i − d*) T,
/// ```
///
/// the claim is `|x_{i+1}| <= |x_i| − min(|x_i|, 2δ) + |u_i|` for every
/// completed period. `canonical.d_star_used` must be the true equilibrium
/// rate; pass `ctrl.with_set_point_shift(d_star)` for biased controllers.
pub fn per_period_contraction(
    series: &TimeSeries,
    canonical: &ControllerSpec,
) -> Result<ContractionReport> {
    if canonical.variant == ControllerVariant::OpenLoop {
        return Err(Error::InvalidModel(
            "contraction check applies to feedback runs, not open loop".into(),
        ));
    }
    let per = series.per;
    let periods = (series.records.len() - 1) / per;
    if periods == 0 {
        return Err(Error::InvalidModel("run too short for one sampling period".into()));
    }
    let delta = theoretical_rates(canonical, f64::INFINITY)?.delta;
    let t = canonical.t_sample;
    let d_star = canonical.d_star_used;
    let measure = |idx: usize| -> f64 {
        let r = &series.records[idx * per];
        match canonical.variant {
            ControllerVariant::NewbornFeedback => r.f_boundary,
            _ => r.y,
        }
    };
    let mut excesses = Vec::with_capacity(periods);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..periods {
        let (m0, m1) = (measure(i), measure(i + 1));
        let x0 = (m0 / canonical.reference).ln();
        let x1 = (m1 / canonical.reference).ln();
        let d_applied = series.records[i * per].d;
        let u = (m1 / m0).ln() + (d_applied - d_star) * t;
        let bound = x0.abs() - x0.abs().min(2.0 * delta) + u.abs();
        let excess = x1.abs() - bound;
        worst = worst.max(excess);
        excesses.push(excess);
    }
    Ok(ContractionReport { delta, worst_excess: worst, excesses })
}

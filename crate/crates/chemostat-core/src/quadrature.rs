//! Cell quadrature rules exact for exponentials with linear weights.
//!
//! On each age cell `[jh, (j+1)h]` the integrand is modelled as the
//! exponential interpolant through the two endpoint samples,
//!
//! ```text
//! f(a) ≈ f_left · exp(L (a − jh)/h),    L = ln(f_right / f_left),
//! ```
//!
//! and the weighted integrals are evaluated in closed form. All rules are
//! expressed through the entire functions
//!
//! ```text
//! φ₁(x) = (eˣ − 1)/x,    φ₂(x) = (eˣ(x − 1) + 1)/x²,
//! ```
//!
//! with `φ₁(0) = 1`, `φ₂(0) = 1/2`:
//!
//! ```text
//! ∫ f da               = h f_left φ₁(L)                       (plain)
//! ∫ a f da             = h² f_left (j φ₁(L) + φ₂(L))          (age weighted)
//! ∫ (R − a) f da       = h f_left ((R − jh) φ₁(L) − h φ₂(L))  (reflected)
//! ```
//!
//! The first cell pair `[0, 2h]` has no sample at `a = 0`; the interpolant
//! is anchored by extrapolation, `f(0) = f_h²/f_{2h}`, with log increment
//! `2 L̂` over the doubled width, `L̂ = ln(f_{2h}/f_h)`:
//!
//! ```text
//! ∫₀^{2h} f da   = 2h (f_h²/f_{2h}) φ₁(2L̂)
//! ∫₀^{2h} a f da = 4h² (f_h²/f_{2h}) φ₂(2L̂)
//! ```
//!
//! When the endpoint samples agree to within [`EQUAL_BRANCH_TOL`] in `L` the
//! rules switch to their flat-integrand limits, which are the exact `L = 0`
//! values of the formulas above. `φ₂` is evaluated by a truncated Taylor
//! series for `|x| ≤ 1/4` because the closed form cancels catastrophically
//! near zero; both φ evaluations keep every rule accurate to a few ulps over
//! the whole admissible range, which is what the exactness contract
//! (relative error at most `1e-11` against weighted exponentials) relies on.

use crate::error::{Error, Result};
use crate::grid::AgeProfile;
use crate::model::AgeFn;

/// Threshold on `|ln(f_right/f_left)|` below which the flat-integrand branch
/// of each rule is used.
pub const EQUAL_BRANCH_TOL: f64 = 1e-12;

/// φ₁(x) = (eˣ − 1)/x, continued by φ₁(0) = 1.
#[inline]
pub(crate) fn phi1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

/// Taylor coefficients of φ₂: x^n / (n! (n + 2)), n = 0..=12. The tail of
/// the degree-12 truncation at |x| = 1/4 is below 2^-64.
const PHI2_SERIES: [f64; 13] = [
    1.0 / 2.0,
    1.0 / 3.0,
    1.0 / 8.0,
    1.0 / 30.0,
    1.0 / 144.0,
    1.0 / 840.0,
    1.0 / 5760.0,
    1.0 / 45360.0,
    1.0 / 403_200.0,
    1.0 / 3_991_680.0,
    1.0 / 43_545_600.0,
    1.0 / 518_918_400.0,
    1.0 / 6_706_022_400.0,
];

/// φ₂(x) = (eˣ(x − 1) + 1)/x², continued by φ₂(0) = 1/2.
#[inline]
pub(crate) fn phi2(x: f64) -> f64 {
    if x.abs() <= 0.25 {
        let mut acc = 0.0;
        for &c in PHI2_SERIES.iter().rev() {
            acc = acc * x + c;
        }
        acc
    } else {
        (x.exp() * (x - 1.0) + 1.0) / (x * x)
    }
}

/// Exact integral of a linear weight against an anchored exponential:
///
/// ```text
/// linexp_cell(l, w, α, β, F, x) = ∫_l^{l+w} (α + β a) F e^{x (a−l)/w} da
///                               = w F ((α + β l) φ₁(x) + β w φ₂(x)).
/// ```
///
/// `F` is the integrand value at the left edge `l` and `x` the log increment
/// over the width `w`.
#[inline]
pub(crate) fn linexp_cell(l: f64, w: f64, alpha: f64, beta: f64, f_left: f64, x: f64) -> f64 {
    w * f_left * ((alpha + beta * l) * phi1(x) + beta * w * phi2(x))
}

/// Endpoint samples of one age cell `[jh, (j+1)h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSample {
    pub f_left: f64,
    pub f_right: f64,
    pub j: usize,
    pub h: f64,
}

impl CellSample {
    fn validate(&self) -> Result<()> {
        for v in [self.f_left, self.f_right] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveSample { value: v });
            }
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::NonPositiveSample { value: self.h });
        }
        Ok(())
    }

    #[inline]
    fn log_ratio(&self) -> f64 {
        (self.f_right / self.f_left).ln()
    }
}

/// `∫_{jh}^{(j+1)h} f da` under the exponential cell interpolant.
pub fn cell_plain(s: &CellSample) -> Result<f64> {
    s.validate()?;
    let l = s.log_ratio();
    if l.abs() < EQUAL_BRANCH_TOL {
        Ok(s.h * s.f_left)
    } else {
        Ok(s.h * s.f_left * phi1(l))
    }
}

/// `∫_{jh}^{(j+1)h} a f da` under the exponential cell interpolant.
pub fn cell_age_weighted(s: &CellSample) -> Result<f64> {
    s.validate()?;
    let l = s.log_ratio();
    if l.abs() < EQUAL_BRANCH_TOL {
        Ok((2.0 * s.j as f64 + 1.0) / 2.0 * s.h * s.h * s.f_left)
    } else {
        Ok(s.h * s.h * s.f_left * (s.j as f64 * phi1(l) + phi2(l)))
    }
}

/// `∫_{jh}^{(j+1)h} (reflection − a) f da` under the exponential cell
/// interpolant; `reflection` must not lie left of the cell end.
pub fn cell_reflected(s: &CellSample, reflection: f64) -> Result<f64> {
    s.validate()?;
    let right_edge = (s.j + 1) as f64 * s.h;
    if !reflection.is_finite() || reflection < right_edge * (1.0 - 1e-12) {
        return Err(Error::InvalidModel(format!(
            "reflection point {reflection} lies left of the cell end {right_edge}"
        )));
    }
    let l = s.log_ratio();
    if l.abs() < EQUAL_BRANCH_TOL {
        Ok((reflection - (2.0 * s.j as f64 + 1.0) / 2.0 * s.h) * s.h * s.f_left)
    } else {
        let jh = s.j as f64 * s.h;
        Ok(s.h * s.f_left * ((reflection - jh) * phi1(l) - s.h * phi2(l)))
    }
}

/// `∫_0^{2h} f da` with the left anchor extrapolated as `f(0) = f_h²/f_{2h}`.
pub fn first_cells_plain(f_h: f64, f_2h: f64, h: f64) -> Result<f64> {
    let s = CellSample { f_left: f_h, f_right: f_2h, j: 0, h };
    s.validate()?;
    let lhat = (f_2h / f_h).ln();
    if lhat.abs() < EQUAL_BRANCH_TOL {
        Ok(2.0 * h * f_h)
    } else {
        Ok(2.0 * h * (f_h * f_h / f_2h) * phi1(2.0 * lhat))
    }
}

/// `∫_0^{2h} a f da` with the left anchor extrapolated as `f(0) = f_h²/f_{2h}`.
pub fn first_cells_age_weighted(f_h: f64, f_2h: f64, h: f64) -> Result<f64> {
    let s = CellSample { f_left: f_h, f_right: f_2h, j: 0, h };
    s.validate()?;
    let lhat = (f_2h / f_h).ln();
    if lhat.abs() < EQUAL_BRANCH_TOL {
        Ok(2.0 * h * h * f_2h)
    } else {
        Ok(4.0 * h * h * (f_h * f_h / f_2h) * phi2(2.0 * lhat))
    }
}

/// Weight applied to a profile integral.
#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    /// Unit weight.
    Plain,
    /// General nonnegative age-dependent weight.
    Weighted(&'a AgeFn),
}

/// Integrates a positive age profile against a weight over `[0, a_max]`,
/// composing the cell rules: the first two cells use the anchored pair rules
/// (the `a = 0` node carries no sample), every later cell uses the
/// single-cell rules. A triangular weight dispatches its rising half to the
/// age-weighted rule and its falling half to the reflected rule, so the
/// composition stays exact on equilibrium-type exponential profiles.
pub fn integrate_profile(profile: &AgeProfile, weight: Weight<'_>) -> Result<f64> {
    profile.check_interior_positive(None)?;
    let grid = profile.grid;
    let (h, n) = (grid.h, grid.n);
    let v = &profile.values;
    match weight {
        Weight::Plain => plain_path(v, h, n),
        Weight::Weighted(AgeFn::Constant(c)) => Ok(c * plain_path(v, h, n)?),
        Weight::Weighted(AgeFn::Triangular { scale }) => {
            if n % 2 != 0 {
                return Err(Error::GridMisaligned {
                    what: "triangular weight apex (cell count must be even)".into(),
                    h,
                });
            }
            let mid = n / 2;
            if mid < 2 {
                return Err(Error::GridMisaligned {
                    what: "triangular weight rising half (needs at least two cells)".into(),
                    h,
                });
            }
            let a_max = grid.a_max();
            let mut acc = first_cells_age_weighted(v[1], v[2], h)?;
            for j in 2..mid {
                acc += cell_age_weighted(&CellSample { f_left: v[j], f_right: v[j + 1], j, h })?;
            }
            for j in mid..n {
                acc +=
                    cell_reflected(&CellSample { f_left: v[j], f_right: v[j + 1], j, h }, a_max)?;
            }
            Ok(scale * acc)
        }
        Weight::Weighted(table @ AgeFn::Table(_)) => table_path(profile, table),
    }
}

fn plain_path(v: &[f64], h: f64, n: usize) -> Result<f64> {
    let mut acc = first_cells_plain(v[1], v[2], h)?;
    for j in 2..n {
        acc += cell_plain(&CellSample { f_left: v[j], f_right: v[j + 1], j, h })?;
    }
    Ok(acc)
}

/// Piecewise-linear table weight: on each cell the weight is `α + β a`; the
/// combination `α·plain + β·age` is used for rising pieces and the
/// equivalent `(−β)·reflected` form for falling pieces, which avoids
/// cancellation between the two terms when the weight decays to zero.
fn table_path(profile: &AgeProfile, weight: &AgeFn) -> Result<f64> {
    let grid = profile.grid;
    let (h, n) = (grid.h, grid.n);
    let a_max = grid.a_max();
    let v = &profile.values;
    let w_at = |j: usize| weight.eval(grid.age(j), a_max);

    // Weight slopes on the two anchored cells; a kink at a = h forces a
    // sub-split of the pair integral with the extrapolated anchor.
    let (w0, w1, w2) = (w_at(0), w_at(1), w_at(2));
    let s1 = (w1 - w0) / h;
    let s2 = (w2 - w1) / h;
    let kink = (s1 - s2).abs() > 1e-12 * (s1.abs() + s2.abs() + 1.0);
    let mut acc = if kink {
        let anchor = v[1] * v[1] / v[2];
        let lhat = (v[2] / v[1]).ln();
        linexp_cell(0.0, h, w0, s1, anchor, lhat) + linexp_cell(h, h, w1 - s2 * h, s2, v[1], lhat)
    } else {
        w0 * first_cells_plain(v[1], v[2], h)? + s1 * first_cells_age_weighted(v[1], v[2], h)?
    };

    for j in 2..n {
        let (wl, wr) = (w_at(j), w_at(j + 1));
        let beta = (wr - wl) / h;
        let alpha = wl - beta * grid.age(j);
        let s = CellSample { f_left: v[j], f_right: v[j + 1], j, h };
        acc += if beta < 0.0 {
            -beta * cell_reflected(&s, -alpha / beta)?
        } else {
            alpha * cell_plain(&s)? + beta * cell_age_weighted(&s)?
        };
    }
    Ok(acc)
}

//! Scalar renewal (integral delay) equation equivalent to the PDE.
//!
//! Removing the dilution by the substitution `v(t) = f(t, 0) exp(∫₀ᵗ D)`
//! turns the boundary dynamics into the undiluted renewal equation
//!
//! ```text
//! v(t) = ∫₀ᴬ G(a) v(t − a) da,      G(a) = k(a) exp(−∫₀ᵃ μ),
//! ```
//!
//! with history `v(−a) = f₀(a) exp(∫₀ᵃ μ)` on `(0, A]`. Trapezoid
//! collocation at the grid nodes and solving for the implicit `a = 0` term
//! gives the marching scheme
//!
//! ```text
//! v_m = Σ_{j=1..n} w_j G_j v_{m−j} / (1 − (h/2) G₀),   w_j = h, w_n = h/2,
//! ```
//!
//! whose normalised masses `m_j = w_j G_j / (1 − (h/2) G₀)` are exactly the
//! coefficients of a one-step positive recursion with a computable growth
//! bracket. With total mass `L = Σ m_j ≥ 1` and a split age `Δ` whose
//! left mass `c` stays below one, every solution with positive history in
//! `[A₁, A₂]` remains inside
//!
//! ```text
//! [min(A₁, A₁ b^{1+t/h̃}),  max(A₂, A₂ b^{1+t/h̃})],
//! b = (L − c)/(1 − c),      h̃ = min(Δ, A − Δ).
//! ```
//!
//! Subcritical kernels (`L < 1`) are first rescaled: `x(t) = e^{pt} v(t)`
//! solves the same equation with kernel `G(a) e^{pa}`, and the smallest
//! `p ≥ 0` on a 0.01 lattice with rescaled mass at least one restores the
//! envelope hypotheses.
//!
//! Ergodicity diagnostics compare `e^{−D*t} v(t)` against the conserved
//! projection `P` of the history (so `φ(t) = e^{−D*t} v(t) − P → 0`), fit
//! the decay rate of `|φ|`, and check the renewal-type bound
//! `|φ(t)| ≤ C ∫₀ᴬ e^{−D*a} |φ(t−a)| da` node-wise with a slack that
//! accounts for the trapezoid mass deficit.

use crate::error::{Error, Result};
use crate::grid::{AgeProfile, Grid, ALIGN_TOL};
use crate::metrics::{least_squares_line, FIT_FLOOR};
use crate::model::ModelParams;

/// Scalar series on a uniform time grid, `values[m] = v(m h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VSeries {
    pub h: f64,
    pub values: Vec<f64>,
}

impl VSeries {
    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.h
    }
}

/// Discretised renewal equation plus the envelope quantities derived from
/// its normalised masses.
#[derive(Debug, Clone)]
pub struct IdeProblem {
    pub grid: Grid,
    /// Kernel nodes `G(a_j)`, `j = 0..=n`.
    pub kernel: Vec<f64>,
    /// History `v(−j h)`, `j = 1..=n`, stored at index `j − 1`; empty until
    /// [`IdeProblem::with_history`] provides it.
    pub history: Vec<f64>,
    /// Total normalised mass `L`.
    pub l_mass: f64,
    /// Split age `Δ` (node aligned, possibly shrunk to keep `c < 1`).
    pub delta: f64,
    /// Mass left of the split, `c = Σ_{a_j ≤ Δ} m_j < 1`.
    pub split_mass: f64,
    /// Envelope growth base `b = (L − c)/(1 − c)`.
    pub envelope_base: f64,
    /// Envelope time scale `h̃ = min(Δ, A − Δ)`.
    pub h_env: f64,
}

impl IdeProblem {
    /// Builds the discretisation from kernel nodes. `delta` defaults to the
    /// middle node and is halved while the left mass reaches one.
    pub fn new(grid: Grid, kernel: Vec<f64>, delta: Option<f64>) -> Result<Self> {
        let n = grid.n;
        let h = grid.h;
        if kernel.len() != n + 1 {
            return Err(Error::InvalidModel(format!(
                "kernel has {} nodes, grid wants {}",
                kernel.len(),
                n + 1
            )));
        }
        for &g in &kernel {
            if !g.is_finite() || g < 0.0 {
                return Err(Error::InvalidModel(format!("kernel node {g} must be finite and >= 0")));
            }
        }
        if kernel[1..].iter().all(|&g| g == 0.0) {
            return Err(Error::InvalidModel(
                "kernel vanishes at every positive age; the recursion is degenerate".into(),
            ));
        }
        let implicit = 0.5 * h * kernel[0];
        if implicit >= 1.0 {
            return Err(Error::IllPosedStep { weight: implicit });
        }
        let denom = 1.0 - implicit;
        let mass = |j: usize| {
            let w = if j == n { 0.5 * h } else { h };
            w * kernel[j] / denom
        };
        let l_mass: f64 = (1..=n).map(mass).sum();

        let mut cells = match delta {
            None => n / 2,
            Some(d) => {
                let c = grid.node_of(d, "split age")?;
                if c == 0 || c >= n {
                    return Err(Error::InvalidModel(format!(
                        "split age {d} must lie strictly inside (0, {})",
                        grid.a_max()
                    )));
                }
                c
            }
        };
        let split_mass = loop {
            let c: f64 = (1..=cells).map(mass).sum();
            if c < 1.0 {
                break c;
            }
            if cells == 1 {
                return Err(Error::SplitMassTooLarge { mass: c });
            }
            cells /= 2;
        };
        let delta = cells as f64 * h;
        let envelope_base = (l_mass - split_mass) / (1.0 - split_mass);
        let h_env = delta.min(grid.a_max() - delta);
        Ok(Self {
            grid,
            kernel,
            history: Vec::new(),
            l_mass,
            delta,
            split_mass,
            envelope_base,
            h_env,
        })
    }

    /// Attaches a positive history `v(−jh)`, `j = 1..=n`.
    pub fn with_history(mut self, history: Vec<f64>) -> Result<Self> {
        if history.len() != self.grid.n {
            return Err(Error::InvalidModel(format!(
                "history has {} entries, grid wants {}",
                history.len(),
                self.grid.n
            )));
        }
        for (i, &v) in history.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveProfile { node: i + 1, value: v, step: None });
            }
        }
        self.history = history;
        Ok(self)
    }
}

/// Tabulates the undiluted kernel `G(a) = k(a) e^{−∫₀ᵃ μ}` of a model.
pub fn kernel_from_model(
    params: &ModelParams,
    grid: Grid,
    delta: Option<f64>,
) -> Result<IdeProblem> {
    if (grid.a_max() - params.a_max).abs() > ALIGN_TOL {
        return Err(Error::GridMisaligned { what: "grid span vs maximum age".into(), h: grid.h });
    }
    let kernel = (0..=grid.n)
        .map(|j| {
            let a = grid.age(j);
            params.k.eval(a, params.a_max) * (-params.mu_cum(a)).exp()
        })
        .collect();
    IdeProblem::new(grid, kernel, delta)
}

/// History induced by an initial PDE profile: `v(−a_j) = f₀(a_j) e^{∫₀^{a_j} μ}`.
pub fn history_from_profile(params: &ModelParams, f0: &AgeProfile) -> Result<Vec<f64>> {
    f0.check_interior_positive(None)?;
    Ok((1..=f0.grid.n)
        .map(|j| f0.values[j] * params.mu_cum(f0.grid.age(j)).exp())
        .collect())
}

/// Marches the trapezoid collocation up to `t_end`. The time step must
/// equal the age step (the scheme is only defined on the common grid).
pub fn solve_ide(prob: &IdeProblem, t_end: f64, dt: f64) -> Result<VSeries> {
    let grid = prob.grid;
    let (h, n) = (grid.h, grid.n);
    if (dt - h).abs() > ALIGN_TOL * h {
        return Err(Error::GridMisaligned { what: format!("solver time step {dt}"), h });
    }
    if prob.history.len() != n {
        return Err(Error::InvalidModel("history not attached to the renewal problem".into()));
    }
    let steps = grid.steps_of(t_end, "solve horizon")?;
    let denom = 1.0 - 0.5 * h * prob.kernel[0];
    let mut values = Vec::with_capacity(steps + 1);
    for m in 0..=steps {
        let mut acc = 0.0;
        for j in 1..=n {
            let w = if j == n { 0.5 * h } else { h };
            let past = if m >= j { values[m - j] } else { prob.history[j - m - 1] };
            acc += w * prob.kernel[j] * past;
        }
        values.push(acc / denom);
    }
    Ok(VSeries { h, values })
}

/// Rebuilds PDE profiles from a solved series: along characteristics,
///
/// ```text
/// f(t, a_j) = v(t − a_j) e^{−∫₀^{a_j} μ} e^{−∫_{max(t−a_j, 0)}^{t} D},
/// ```
///
/// with `d_path[i]` the dilution rate on `[t_i, t_{i+1})` (no dilution
/// before `t = 0`).
pub fn reconstruct_pde(
    prob: &IdeProblem,
    v: &VSeries,
    params: &ModelParams,
    d_path: &[f64],
) -> Result<Vec<AgeProfile>> {
    let grid = prob.grid;
    let n = grid.n;
    let steps = v.values.len() - 1;
    if d_path.len() < steps {
        return Err(Error::InvalidModel(format!(
            "dilution path has {} steps, series needs {steps}",
            d_path.len()
        )));
    }
    if prob.history.len() != n {
        return Err(Error::InvalidModel("history not attached to the renewal problem".into()));
    }
    let mut cum_d = Vec::with_capacity(steps + 1);
    cum_d.push(0.0);
    for i in 0..steps {
        cum_d.push(cum_d[i] + grid.h * d_path[i]);
    }
    let survival: Vec<f64> = (0..=n).map(|j| (-params.mu_cum(grid.age(j))).exp()).collect();
    let profiles = (0..=steps)
        .map(|m| {
            let values = (0..=n)
                .map(|j| {
                    let (past, diluted_from) =
                        if m >= j { (v.values[m - j], cum_d[m - j]) } else { (prob.history[j - m - 1], 0.0) };
                    past * survival[j] * (-(cum_d[m] - diluted_from)).exp()
                })
                .collect();
            AgeProfile { grid, values }
        })
        .collect();
    Ok(profiles)
}

/// Envelope bracket after time `t` for histories inside `[a1, a2]`:
/// `(min(a1, a1 b^{1+t/h̃}), max(a2, a2 b^{1+t/h̃}))`. Requires total mass
/// `L >= 1`; subcritical kernels must be rescaled first.
pub fn envelope_bracket(prob: &IdeProblem, a1: f64, a2: f64, t: f64) -> Result<(f64, f64)> {
    if prob.l_mass < 1.0 {
        return Err(Error::KernelMassBelowOne { mass: prob.l_mass });
    }
    if !(a1 > 0.0) || !(a2 >= a1) || !a2.is_finite() || !(t >= 0.0) {
        return Err(Error::InvalidModel(format!(
            "envelope needs 0 < a1 <= a2 and t >= 0, got a1 = {a1}, a2 = {a2}, t = {t}"
        )));
    }
    let pow = prob.envelope_base.powf(1.0 + t / prob.h_env);
    Ok((a1.min(a1 * pow), a2.max(a2 * pow)))
}

/// Smallest `p` on the 0.01 lattice making the rescaled kernel
/// `G(a) e^{pa}` supercritical, together with the rescaled problem (history
/// mapped as `v(−jh) e^{−p jh}`, matching `x(t) = e^{pt} v(t)`). Identity
/// rescale (`p = 0`) if the mass is already at least one.
pub fn rescale_supercritical(prob: &IdeProblem) -> Result<(IdeProblem, f64)> {
    if prob.l_mass >= 1.0 {
        return Ok((prob.clone(), 0.0));
    }
    let grid = prob.grid;
    for k in 1..=10_000 {
        let p = 0.01 * k as f64;
        let kernel: Vec<f64> =
            (0..=grid.n).map(|j| prob.kernel[j] * (p * grid.age(j)).exp()).collect();
        let candidate = IdeProblem::new(grid, kernel, Some(prob.delta))?;
        if candidate.l_mass >= 1.0 {
            if prob.history.is_empty() {
                return Ok((candidate, p));
            }
            let history: Vec<f64> = prob
                .history
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (-p * grid.age(i + 1)).exp())
                .collect();
            return Ok((candidate.with_history(history)?, p));
        }
    }
    Err(Error::InvalidModel("no supercritical rescale below p = 100".into()))
}

/// Conserved projection `P` of an initial profile under the equilibrium
/// dilution rate `d_star`:
///
/// ```text
/// P(f₀) = ∫₀ᴬ f₀(a) E(a) da / ∫₀ᴬ S(a) da,
/// E(a) = e^{c(a)} S(a),  S(a) = ∫_a^A k(s) e^{−c(s)} ds,  c(a) = D* a + ∫₀ᵃ μ,
/// ```
///
/// computed with a refined suffix integral for `S` and the same coarse
/// trapezoid for numerator and denominator. The denominator form uses
/// `∫ a k e^{−c} da = ∫ S da`, which makes `P(f*) = m_scale` hold to
/// roundoff by construction.
pub fn ergodic_projection(f0: &AgeProfile, params: &ModelParams, d_star: f64) -> Result<f64> {
    if (f0.grid.a_max() - params.a_max).abs() > ALIGN_TOL {
        return Err(Error::GridMisaligned {
            what: "grid span vs maximum age".into(),
            h: f0.grid.h,
        });
    }
    f0.check_all_positive(None)?;
    let grid = f0.grid;
    let (h, n) = (grid.h, grid.n);
    const REFINE: usize = 4;
    let hf = h / REFINE as f64;
    let nf = n * REFINE;
    let cum = |a: f64| d_star * a + params.mu_cum(a);
    let q: Vec<f64> = (0..=nf)
        .map(|i| {
            let a = i as f64 * hf;
            params.k.eval(a, params.a_max) * (-cum(a)).exp()
        })
        .collect();
    let mut suffix = vec![0.0; nf + 1];
    for i in (0..nf).rev() {
        suffix[i] = suffix[i + 1] + 0.5 * hf * (q[i] + q[i + 1]);
    }
    let trap = |vals: &dyn Fn(usize) -> f64| -> f64 {
        let mut acc = 0.5 * (vals(0) + vals(n));
        for j in 1..n {
            acc += vals(j);
        }
        acc * h
    };
    let num = trap(&|j: usize| f0.values[j] * cum(grid.age(j)).exp() * suffix[j * REFINE]);
    let den = trap(&|j: usize| suffix[j * REFINE]);
    if !(den > 0.0) {
        return Err(Error::InvalidModel("projection denominator vanished".into()));
    }
    Ok(num / den)
}

/// Ergodicity diagnostics of a solved series against the projection `P`.
#[derive(Debug, Clone)]
pub struct ErgodicDiagnostics {
    pub p_value: f64,
    /// `φ_m = e^{−d* t_m} v_m − P` at every series node.
    pub phi: Vec<f64>,
    /// Fitted decay rate of `|φ|` over `t >= a_max` (`+∞` when degenerate).
    pub eps_fit: f64,
    /// Envelope constant: max of `|φ| e^{eps_fit t}` over the fit window
    /// (0 when degenerate).
    pub k_fit: f64,
    /// Set when fewer than 10 window samples rise above the roundoff floor;
    /// the deviation then starts (numerically) on the ergodic manifold.
    pub degenerate: bool,
}

/// Builds `φ` from a solved series and fits its exponential decay on the
/// window `t ∈ [a_max, t_end]`. The series must extend to `t_end >= 3 a_max`
/// so the window dominates the transient.
pub fn phi_and_decay(
    v: &VSeries,
    a_max: f64,
    d_star: f64,
    p_value: f64,
) -> Result<ErgodicDiagnostics> {
    let t_end = v.time(v.values.len() - 1);
    if t_end < 3.0 * a_max * (1.0 - 1e-12) {
        return Err(Error::InvalidModel(format!(
            "diagnostic window needs t_end >= 3 a_max, got t_end = {t_end}, a_max = {a_max}"
        )));
    }
    let phi: Vec<f64> =
        (0..v.values.len()).map(|m| (-d_star * v.time(m)).exp() * v.values[m] - p_value).collect();
    let mut ts = Vec::new();
    let mut lns = Vec::new();
    for (m, &p) in phi.iter().enumerate() {
        let t = v.time(m);
        if t >= a_max * (1.0 - 1e-12) && p.abs() >= FIT_FLOOR {
            ts.push(t);
            lns.push(p.abs().ln());
        }
    }
    if ts.len() < 10 {
        return Ok(ErgodicDiagnostics {
            p_value,
            phi,
            eps_fit: f64::INFINITY,
            k_fit: 0.0,
            degenerate: true,
        });
    }
    let (slope, _) = least_squares_line(&ts, &lns);
    let eps_fit = -slope;
    let mut k_fit: f64 = 0.0;
    for (t, ln_abs) in ts.iter().zip(&lns) {
        k_fit = k_fit.max((ln_abs + eps_fit * t).exp());
    }
    Ok(ErgodicDiagnostics { p_value, phi, eps_fit, k_fit, degenerate: false })
}

/// Node-wise check of the renewal-type bound on the deviation,
///
/// ```text
/// |φ(t)| <= C ∫₀ᴬ e^{−D*a} |φ(t−a)| da + slack,
/// C = max_j G(a_j),
/// slack = |P| |M̂ − 1| + 1e-12 (1 + max |φ|),
/// ```
///
/// where `M̂` is the trapezoid mass of the discounted kernel (exactly one in
/// the continuum, short by the quadrature deficit here). Returns
/// `(worst signed excess, slack)`; the bound holds when the excess is
/// nonpositive.
pub fn projection_bound_excess(
    prob: &IdeProblem,
    v: &VSeries,
    d_star: f64,
    p_value: f64,
) -> Result<(f64, f64)> {
    let grid = prob.grid;
    let (h, n) = (grid.h, grid.n);
    if prob.history.len() != n {
        return Err(Error::InvalidModel("history not attached to the renewal problem".into()));
    }
    let phi: Vec<f64> =
        (0..v.values.len()).map(|m| (-d_star * v.time(m)).exp() * v.values[m] - p_value).collect();
    let phi_hist: Vec<f64> = (1..=n)
        .map(|j| (d_star * grid.age(j)).exp() * prob.history[j - 1] - p_value)
        .collect();
    let c_bound = prob.kernel.iter().cloned().fold(0.0_f64, f64::max);
    let discount: Vec<f64> = (0..=n).map(|j| (-d_star * grid.age(j)).exp()).collect();
    let weight = |j: usize| if j == 0 || j == n { 0.5 * h } else { h };
    let mhat: f64 = (0..=n).map(|j| weight(j) * prob.kernel[j] * discount[j]).sum();
    let max_abs = phi
        .iter()
        .chain(&phi_hist)
        .fold(0.0_f64, |acc, &p| acc.max(p.abs()));
    let slack = p_value.abs() * (mhat - 1.0).abs() + 1e-12 * (1.0 + max_abs);

    let mut worst = f64::NEG_INFINITY;
    for m in 0..phi.len() {
        let mut integral = 0.0;
        for j in 0..=n {
            let past = if m >= j { phi[m - j] } else { phi_hist[j - m - 1] };
            integral += weight(j) * discount[j] * past.abs();
        }
        worst = worst.max(phi[m].abs() - c_bound * integral - slack);
    }
    Ok((worst, slack))
}

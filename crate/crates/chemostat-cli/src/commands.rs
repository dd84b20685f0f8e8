//! Subcommand bodies. Each returns the text destined for stdout; process
//! concerns (argument parsing, printing, exit codes) stay in `main`.

use std::path::PathBuf;

use chemostat_core::batch::{run_batch, BatchItem};
use chemostat_core::control::{ControllerSpec, ControllerVariant};
use chemostat_core::grid::{AgeProfile, Grid};
use chemostat_core::ide::{
    ergodic_projection, history_from_profile, kernel_from_model, envelope_bracket, phi_and_decay,
    projection_bound_excess, rescale_supercritical, solve_ide, IdeProblem, VSeries,
};
use chemostat_core::model::{make_initial_profile, solve_d_star, Equilibrium, ModelParams};
use chemostat_core::pde_sim::{run_simulation, RunOutput};
use chemostat_core::Error;

use crate::config::{InitialSpec, Resolved, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{fmt17, out_root, summarize, write_csv, write_summary};

fn numerical(e: Error) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Executes the run and writes the CSV and summary artifacts under the
/// output root. Returns the summary JSON text.
pub fn cmd_run(res: &Resolved, out_dir: Option<PathBuf>, stride: Option<usize>) -> Result<String> {
    let root = out_root(out_dir);
    let out = run_simulation(&res.params, &res.eq, &res.controller, &res.initial, res.t_end)
        .map_err(numerical)?;
    let stride = stride.unwrap_or(res.output.stride).max(1);
    write_csv(&root.join(&res.output.csv), &out.series, stride)?;
    let summary = summarize(&out, res.t_end);
    write_summary(&root.join(&res.output.summary), &summary)
}

/// Equilibrium facts as JSON: the solved rate, the output set point, the
/// yield ratio, and the newborn set point.
pub fn cmd_solve_eq(res: &Resolved) -> String {
    serde_json::to_string_pretty(&serde_json::json!({
        "d_star": res.eq.d_star,
        "y_star": res.eq.y_star,
        "beta": res.eq.beta,
        "newborn_reference": res.eq.f_star.values[0],
    }))
    .expect("static json")
}

/// Sweep axis. `T` re-times the sampler; `bias` scales the rate the
/// controller believes in; `b0`, `c`, `theta` move the initial profile
/// within the compatible family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    #[value(name = "T", alias = "t")]
    T,
    Bias,
    B0,
    C,
    Theta,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::T => "T",
            Axis::Bias => "bias",
            Axis::B0 => "b0",
            Axis::C => "c",
            Axis::Theta => "theta",
        }
    }
}

fn apply_axis(base: &RunConfig, axis: Axis, value: f64) -> Result<RunConfig> {
    let mut cfg = base.clone();
    match axis {
        Axis::T => cfg.model.t_sample = value,
        Axis::Bias => cfg.controller.bias = value,
        Axis::B0 | Axis::C | Axis::Theta => {
            let InitialSpec::Family { b0, c, theta } = &mut cfg.initial else {
                return Err(CliError::Validation(format!(
                    "sweep axis {} requires a family initial block",
                    axis.label()
                )));
            };
            match axis {
                Axis::B0 => *b0 = value,
                Axis::C => *c = value,
                Axis::Theta => *theta = value,
                _ => unreachable!(),
            }
        }
    }
    Ok(cfg)
}

/// One run per axis value, fanned out over the batch runner, aggregated
/// into `sweep_<axis>.csv` in deterministic axis order. Individual run
/// failures land in the row's `error` column; the sweep only aborts if
/// every row failed.
pub fn cmd_sweep(
    base: &RunConfig,
    axis: Axis,
    values: &[f64],
    out_dir: Option<PathBuf>,
    jobs: Option<usize>,
) -> Result<String> {
    if values.is_empty() {
        return Err(CliError::Validation(
            "sweep needs at least one --values entry".to_string(),
        ));
    }
    let mut resolved = Vec::with_capacity(values.len());
    for &v in values {
        let cfg = apply_axis(base, axis, v)?;
        let res = crate::config::resolve(&cfg).map_err(|e| match e {
            CliError::Validation(msg) => {
                CliError::Validation(format!("sweep {}={v}: {msg}", axis.label()))
            }
            other => other,
        })?;
        resolved.push(res);
    }
    let items: Vec<BatchItem> = resolved
        .iter()
        .zip(values)
        .map(|(res, &v)| BatchItem {
            label: format!("{}={v}", axis.label()),
            params: res.params.clone(),
            eq: res.eq.clone(),
            controller: res.controller.clone(),
            initial: res.initial.clone(),
            t_end: res.t_end,
        })
        .collect();
    let results = run_with_jobs(&items, jobs)?;

    let root = out_root(out_dir);
    std::fs::create_dir_all(&root)?;
    let path = root.join(format!("sweep_{}.csv", axis.label()));
    let mut wtr = csv::Writer::from_path(&path)?;
    wtr.write_record([
        "axis",
        "value",
        "final_d",
        "final_f_boundary",
        "final_y",
        "final_w",
        "fitted_decay_rate",
        "max_abs_log_ratio",
        "error",
    ])?;
    let mut succeeded = 0usize;
    let mut first_error = None;
    for ((res, &v), outcome) in resolved.iter().zip(values).zip(&results) {
        match outcome {
            Ok(out) => {
                succeeded += 1;
                let s = summarize(out, res.t_end);
                wtr.write_record([
                    axis.label().to_string(),
                    fmt17(v),
                    fmt17(s.final_d),
                    fmt17(s.final_f_boundary),
                    fmt17(s.final_y),
                    fmt17(s.final_w),
                    s.fitted_decay_rate.map(fmt17).unwrap_or_default(),
                    fmt17(s.max_abs_log_ratio),
                    String::new(),
                ])?;
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(format!("{}={v}: {e}", axis.label()));
                }
                wtr.write_record([
                    axis.label().to_string(),
                    fmt17(v),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ])?;
            }
        }
    }
    wtr.flush()?;
    if succeeded == 0 {
        return Err(CliError::Numerical(format!(
            "all {} sweep rows failed; first: {}",
            values.len(),
            first_error.unwrap_or_default()
        )));
    }
    Ok(format!(
        "wrote {} ({succeeded} of {} rows succeeded)",
        path.display(),
        values.len()
    ))
}

#[cfg(feature = "parallel")]
fn run_with_jobs(
    items: &[BatchItem],
    jobs: Option<usize>,
) -> Result<Vec<chemostat_core::Result<RunOutput>>> {
    match jobs {
        Some(n) if n >= 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Io(e.to_string()))?;
            Ok(pool.install(|| run_batch(items)))
        }
        _ => Ok(run_batch(items)),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_with_jobs(
    items: &[BatchItem],
    _jobs: Option<usize>,
) -> Result<Vec<chemostat_core::Result<RunOutput>>> {
    Ok(run_batch(items))
}

/// Rebuilds the initial profile on a refined grid (family and equilibrium
/// starts re-tabulate exactly; an explicit table is tied to its grid).
fn initial_on_grid(
    cfg: &RunConfig,
    params: &ModelParams,
    eq: &Equilibrium,
    grid: Grid,
) -> Result<Option<AgeProfile>> {
    match &cfg.initial {
        InitialSpec::Equilibrium => Ok(Some(eq.f_star.clone())),
        InitialSpec::Family { b0, c, theta } => Ok(Some(
            make_initial_profile(*b0, *c, *theta, params, grid)
                .map_err(|e| CliError::Validation(format!("initial: {e}")))?
                .1,
        )),
        InitialSpec::Table(_) => Ok(None),
    }
}

struct CrossValidation {
    sup_rel: f64,
    v: VSeries,
    prob: IdeProblem,
    f0: AgeProfile,
}

/// Runs the renewal-equation diagnostics and prints a report: the
/// undiluted solution cross-validated against the transport simulator on
/// the configured and refined grids, the envelope bracket, the ergodic
/// projection, and the fitted deviation decay.
pub fn cmd_ide_check(cfg: &RunConfig, res: &Resolved) -> Result<String> {
    let params = &res.params;
    let a_max = params.a_max;
    let mut lines = Vec::new();
    lines.push(format!(
        "characteristic root: d* = {:.12}, y* = {:.12}",
        res.eq.d_star, res.eq.y_star
    ));

    // Horizon: at most 10 time units, grid aligned, within the configured run.
    let h0 = res.grid.h;
    let t_hor = if res.t_end <= 10.0 {
        res.t_end
    } else {
        (10.0 / h0).floor() * h0
    };
    lines.push(format!(
        "cross-validation of v(t) against e^(d* t) f(t,0), open loop, t in [0, {t_hor}]:"
    ));

    let mut checks: Vec<CrossValidation> = Vec::new();
    for level in 0..3 {
        let h = h0 / f64::powi(2.0, level);
        let grid = Grid::from_step(h, a_max).map_err(numerical)?;
        let eq = solve_d_star(params, grid).map_err(numerical)?;
        let f0 = if level == 0 {
            res.initial.clone()
        } else {
            match initial_on_grid(cfg, params, &eq, grid)? {
                Some(f0) => f0,
                None => {
                    lines.push("  (table initial profile: refined grids skipped)".to_string());
                    break;
                }
            }
        };
        let ctrl = ControllerSpec::new(
            ControllerVariant::OpenLoop,
            eq.d_star,
            1.0,
            params.t_sample,
            params.d_min,
            params.d_max,
        )
        .map_err(numerical)?;
        let out = run_simulation(params, &eq, &ctrl, &f0, t_hor).map_err(numerical)?;
        let prob = kernel_from_model(params, grid, None)
            .map_err(numerical)?
            .with_history(history_from_profile(params, &f0).map_err(numerical)?)
            .map_err(numerical)?;
        let v = solve_ide(&prob, t_hor, h).map_err(numerical)?;
        let mut sup_rel = 0.0f64;
        for (r, &vm) in out.series.records.iter().zip(&v.values) {
            let z = (eq.d_star * r.t).exp() * r.f_boundary;
            sup_rel = sup_rel.max((vm - z).abs() / z.abs());
        }
        let order = checks
            .last()
            .map(|prev| format!(" (order {:.2})", (prev.sup_rel / sup_rel).log2()))
            .unwrap_or_default();
        lines.push(format!("  h = {h:<7}: sup rel err {sup_rel:.3e}{order}"));
        checks.push(CrossValidation { sup_rel, v, prob, f0 });
    }

    // Envelope bracket on the configured grid.
    let base = &checks[0];
    let (env_prob, p) = rescale_supercritical(&base.prob).map_err(numerical)?;
    let a1 = env_prob.history.iter().cloned().fold(f64::INFINITY, f64::min);
    let a2 = env_prob.history.iter().cloned().fold(0.0f64, f64::max);
    let mut min_margin = f64::INFINITY;
    for (m, &vm) in base.v.values.iter().enumerate() {
        let t = base.v.time(m);
        let x = (p * t).exp() * vm;
        let (lo, hi) = envelope_bracket(&env_prob, a1, a2, t).map_err(numerical)?;
        min_margin = min_margin.min(x - lo).min(hi - x);
    }
    lines.push(format!(
        "kernel masses: L = {:.6}, split age {} (mass {:.6}), base b = {:.6}{}",
        base.prob.l_mass,
        base.prob.delta,
        base.prob.split_mass,
        env_prob.envelope_base,
        if p == 0.0 {
            String::new()
        } else {
            format!(", rescaled by e^({p} t) to reach unit mass")
        }
    ));
    lines.push(format!(
        "envelope bracket: {} (smallest margin {:.3e} over {} times)",
        if min_margin >= 0.0 { "contains v" } else { "VIOLATED" },
        min_margin,
        base.v.values.len()
    ));

    // Ergodic projection and deviation decay. The projection entering the
    // fit comes from the fit grid itself: pairing a fine-grid series with a
    // coarse-grid projection would leave a non-decaying offset of the size
    // of the projection's own discretization error.
    let p_coarse = ergodic_projection(&base.f0, params, res.eq.d_star).map_err(numerical)?;
    let fit_h = h0 / 32.0;
    let grid_fit = Grid::from_step(fit_h, a_max).map_err(numerical)?;
    let eq_fit = solve_d_star(params, grid_fit).map_err(numerical)?;
    let fit_line = match initial_on_grid(cfg, params, &eq_fit, grid_fit)? {
        Some(f0_fit) => {
            let prob_fit = kernel_from_model(params, grid_fit, None)
                .map_err(numerical)?
                .with_history(history_from_profile(params, &f0_fit).map_err(numerical)?)
                .map_err(numerical)?;
            let v_fit = solve_ide(&prob_fit, 3.0 * a_max, fit_h).map_err(numerical)?;
            let p_fit =
                ergodic_projection(&f0_fit, params, res.eq.d_star).map_err(numerical)?;
            lines.push(format!("ergodic projection: P = {p_fit:.9}"));
            let diag = phi_and_decay(&v_fit, a_max, res.eq.d_star, p_fit).map_err(numerical)?;
            if diag.degenerate {
                format!(
                    "deviation fit (h = {fit_h}): already below the fit floor \
                     (start on the equilibrium ray leaves nothing to fit)"
                )
            } else {
                format!(
                    "deviation fit (h = {fit_h}, t in [{a_max}, {}]): \
                     eps = {:.4}, K = {:.3e}",
                    3.0 * a_max,
                    diag.eps_fit,
                    diag.k_fit
                )
            }
        }
        None => {
            lines.push(format!("ergodic projection: P = {p_coarse:.9}"));
            "deviation fit: skipped (table initial profile is tied to its grid)".to_string()
        }
    };
    lines.push(fit_line);
    let (excess, slack) =
        projection_bound_excess(&base.prob, &base.v, res.eq.d_star, p_coarse)
            .map_err(numerical)?;
    lines.push(format!(
        "renewal deviation bound: {} (worst excess {excess:.3e}, discretization slack {slack:.3e})",
        if excess <= 0.0 { "satisfied" } else { "VIOLATED" }
    ));

    Ok(lines.join("\n"))
}

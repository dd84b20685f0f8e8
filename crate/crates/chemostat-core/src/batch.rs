//! Batch execution of independent runs, optionally fanned out with rayon.
//!
//! Runs are embarrassingly parallel: each item carries its own model,
//! equilibrium, controller, and initial profile. With the `parallel`
//! feature (default) [`run_batch`] distributes items across a thread pool;
//! [`run_batch_sequential`] is always available and produces identical
//! results in the same order, which the benchmark suite exploits to compare
//! the two paths.

use crate::control::ControllerSpec;
use crate::error::Result;
use crate::grid::AgeProfile;
use crate::model::{Equilibrium, ModelParams};
use crate::pde_sim::{run_simulation, RunOutput};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// One independent closed-loop run.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub label: String,
    pub params: ModelParams,
    pub eq: Equilibrium,
    pub controller: ControllerSpec,
    pub initial: AgeProfile,
    pub t_end: f64,
}

fn run_one(item: &BatchItem) -> Result<RunOutput> {
    run_simulation(&item.params, &item.eq, &item.controller, &item.initial, item.t_end)
}

/// Runs every item in order on the current thread.
pub fn run_batch_sequential(items: &[BatchItem]) -> Vec<Result<RunOutput>> {
    items.iter().map(run_one).collect()
}

/// Runs the items on the rayon pool; results keep the input order.
#[cfg(feature = "parallel")]
pub fn run_batch(items: &[BatchItem]) -> Vec<Result<RunOutput>> {
    items.par_iter().map(run_one).collect()
}

/// Sequential fallback when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn run_batch(items: &[BatchItem]) -> Vec<Result<RunOutput>> {
    run_batch_sequential(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{materialize, scenario, Preset};

    fn items() -> Vec<BatchItem> {
        Preset::ALL
            .iter()
            .map(|&p| {
                let s = scenario(p);
                let m = materialize(&s).unwrap();
                BatchItem {
                    label: p.name().to_string(),
                    params: s.params.clone(),
                    eq: m.eq,
                    controller: m.controller,
                    initial: m.initial,
                    t_end: 2.0,
                }
            })
            .collect()
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let items = items();
        let seq = run_batch_sequential(&items);
        let par = run_batch(&items);
        assert_eq!(seq.len(), par.len());
        for (a, b) in seq.iter().zip(&par) {
            let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
            assert_eq!(a.series, b.series);
            assert_eq!(a.final_profile, b.final_profile);
        }
    }

    #[test]
    fn failures_stay_aligned_with_their_items() {
        let mut items = items();
        items[2].initial.values[5] = -1.0;
        let results = run_batch(&items);
        assert!(results[0].is_ok());
        assert!(results[2].is_err());
        assert!(results[4].is_ok());
    }
}

use crate::error::{Error, Result};

/// Relative slack used when snapping times and breakpoints to grid nodes.
pub(crate) const ALIGN_TOL: f64 = 1e-9;

/// Uniform age grid with nodes j*h for j = 0..=n and horizon a_max = n*h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub h: f64,
    pub n: usize,
}

impl Grid {
    /// Grid with `n` cells of width `h`. Needs n >= 4 so the two-cell
    /// boundary extrapolation leaves at least two standard cells.
    pub fn new(h: f64, n: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidModel(format!("grid step {h} must be positive")));
        }
        if n < 4 {
            return Err(Error::InvalidModel(format!("grid needs at least 4 cells, got {n}")));
        }
        Ok(Self { h, n })
    }

    /// Grid covering [0, a_max]; a_max must be an integer multiple of h.
    pub fn from_step(h: f64, a_max: f64) -> Result<Self> {
        let n = (a_max / h).round();
        if !n.is_finite() || (n * h - a_max).abs() > ALIGN_TOL * a_max.max(1.0) {
            return Err(Error::GridMisaligned {
                what: format!("horizon {a_max}"),
                h,
            });
        }
        Self::new(h, n as usize)
    }

    pub fn a_max(&self) -> f64 {
        self.n as f64 * self.h
    }

    pub fn age(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    /// Node index of a grid-aligned age; error if `a` falls between nodes.
    pub fn node_of(&self, a: f64, what: &str) -> Result<usize> {
        let j = (a / self.h).round();
        if (j * self.h - a).abs() > ALIGN_TOL * self.a_max() {
            return Err(Error::GridMisaligned {
                what: format!("{what} {a}"),
                h: self.h,
            });
        }
        Ok(j as usize)
    }

    /// Number of steps covering a grid-aligned duration.
    pub fn steps_of(&self, t: f64, what: &str) -> Result<usize> {
        let m = (t / self.h).round();
        if m < 1.0 || (m * self.h - t).abs() > ALIGN_TOL * t.abs().max(1.0) {
            return Err(Error::GridMisaligned {
                what: format!("{what} {t}"),
                h: self.h,
            });
        }
        Ok(m as usize)
    }
}

/// Age-density samples on the nodes of a uniform grid.
///
/// Node 0 holds the renewal boundary value; transport leaves it NaN until
/// the renewal integral refills it, so stale boundary reads fail fast.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeProfile {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl AgeProfile {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n + 1 {
            return Err(Error::InvalidModel(format!(
                "profile has {} nodes, grid wants {}",
                values.len(),
                grid.n + 1
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples a function on every node.
    pub fn tabulate(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=grid.n).map(|j| f(grid.age(j))).collect();
        Self { grid, values }
    }

    /// Interior nodes j = 1..=n must be strictly positive and finite.
    pub fn check_interior_positive(&self, step: Option<usize>) -> Result<()> {
        for (node, &v) in self.values.iter().enumerate().skip(1) {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveProfile { node, value: v, step });
            }
        }
        Ok(())
    }

    /// All nodes, including the boundary, strictly positive and finite.
    pub fn check_all_positive(&self, step: Option<usize>) -> Result<()> {
        for (node, &v) in self.values.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonPositiveProfile { node, value: v, step });
            }
        }
        Ok(())
    }
}

//! Uniform time grids and the left-endpoint projection `kappa`.

use crate::error::Error;

/// A uniform grid over `[t0, t1]` with `n` steps per unit time.
///
/// Grid times are carried as the triple `(t0, k, n)` and materialized as
/// `t0 + k/n` only when a coefficient needs a floating time, so membership
/// tests never drift over long runs. Construction requires `n * (t1 - t0)`
/// to be an integer, which is the step count `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    t0: f64,
    t1: f64,
    n: u32,
    steps: usize,
}

impl GridSpec {
    /// Builds the grid, rejecting empty windows and non-integer `n*(t1-t0)`.
    pub fn new(t0: f64, t1: f64, n: u32) -> Result<Self, Error> {
        let reject = Error::InvalidGrid { t0, t1, n };
        let span = t1 - t0;
        if n == 0 || !span.is_finite() || span <= 0.0 {
            return Err(reject);
        }
        let steps_exact = span * n as f64;
        let steps = libm::round(steps_exact);
        if steps < 1.0 || libm::fabs(steps_exact - steps) > 1e-9 * steps {
            return Err(reject);
        }
        Ok(GridSpec {
            t0,
            t1,
            n,
            steps: steps as usize,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    /// Steps per unit time.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Total step count `K = n * (t1 - t0)`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Step size `1/n`.
    pub fn dt(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// The grid time `t_k = t0 + k/n`.
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.n as f64
    }

    /// The same window at resolution `n / factor`.
    pub fn coarsen(&self, factor: u32) -> Result<Self, Error> {
        if factor == 0 || self.n % factor != 0 {
            return Err(Error::BadCoarsenFactor { factor, n: self.n });
        }
        Ok(GridSpec {
            t0: self.t0,
            t1: self.t1,
            n: self.n / factor,
            steps: self.steps / factor as usize,
        })
    }
}

/// Projects `t` onto the largest grid point not exceeding it:
/// `kappa(n, t) = floor(n * (t - t0)) / n + t0`.
pub fn kappa(n: u32, t: f64, t0: f64) -> f64 {
    t0 + libm::floor(n as f64 * (t - t0)) / n as f64
}

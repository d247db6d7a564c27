//! The tamed explicit Euler stepper for jump SDEs, plus the untamed variant
//! kept as a blow-up control.
//!
//! One step over (t_k, t_k + dt] reads
//!
//! ```text
//! x_{k+1} = x_k + btilde(t_k, x_k) dt + sigma(t_k, x_k) dW_k
//!           + sum_events gamma(t_event, x_k, z_event)
//!           - compensator(t_k, x_k) dt
//! ```
//!
//! where `btilde = b / (1 + n^-theta |b|)` when taming is on and plain `b`
//! otherwise. Only the drift is tamed; diffusion and jump coefficients are
//! used as given, and the compensator is subtracted as its own term rather
//! than being folded into the drift before taming. The jump coefficient is
//! evaluated at the left-endpoint state for every event in the interval,
//! with the event's own time in the t-slot.
//!
//! Non-finite states never raise: they propagate through the remaining steps
//! and the trajectory records where they began, because the untamed control
//! experiment exists precisely to observe divergence.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::grid::GridSpec;
use crate::model::Problem;
use crate::noise::{JumpEvent, NoisePath};

/// Whether the drift is tamed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Taming {
    Tamed,
    Untamed,
}

/// Stepper configuration: resolution, taming exponent, taming flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    /// Steps per unit time.
    pub n: u32,
    /// Taming exponent theta in (0, 1/2]; ignored when untamed.
    pub theta: f64,
    pub taming: Taming,
}

impl SchemeConfig {
    /// Tamed scheme at `n` steps per unit time. The rate-optimal default for
    /// `theta` is 1/2.
    pub fn tamed(n: u32, theta: f64) -> Result<Self, Error> {
        let config = SchemeConfig {
            n,
            theta,
            taming: Taming::Tamed,
        };
        config.validate()?;
        Ok(config)
    }

    /// Plain explicit Euler at `n` steps per unit time (the blow-up control).
    pub fn untamed(n: u32) -> Self {
        SchemeConfig {
            n,
            theta: 0.5,
            taming: Taming::Untamed,
        }
    }

    /// Checks theta in (0, 1/2] when taming is on.
    pub fn validate(&self) -> Result<(), Error> {
        if self.taming == Taming::Tamed && !(self.theta > 0.0 && self.theta <= 0.5) {
            return Err(Error::InvalidTheta(self.theta));
        }
        Ok(())
    }
}

/// States of one simulated path at every grid time, endpoints included.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: GridSpec,
    d: usize,
    states: Vec<f64>,
    first_nonfinite: Option<usize>,
}

impl Trajectory {
    pub(crate) fn from_raw(
        grid: GridSpec,
        d: usize,
        states: Vec<f64>,
        first_nonfinite: Option<usize>,
    ) -> Self {
        debug_assert_eq!(states.len(), (grid.steps() + 1) * d);
        Trajectory {
            grid,
            d,
            states,
            first_nonfinite,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of stored states, K + 1.
    pub fn len(&self) -> usize {
        self.grid.steps() + 1
    }

    /// Always false; kept so `len` reads naturally.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// The state at grid index `k` (time t0 + k/n).
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.d..(k + 1) * self.d]
    }

    /// The state at t1.
    pub fn terminal(&self) -> &[f64] {
        self.state(self.grid.steps())
    }

    /// All states, row-major.
    pub fn states(&self) -> &[f64] {
        &self.states
    }

    /// Index of the first grid state with a non-finite coordinate, if any.
    pub fn first_nonfinite(&self) -> Option<usize> {
        self.first_nonfinite
    }

    /// True when every stored state is finite.
    pub fn is_finite(&self) -> bool {
        self.first_nonfinite.is_none()
    }
}

/// Tames `b` in place: b <- b / (1 + n^-theta |b|), Euclidean norm.
///
/// The result is a scalar multiple c*b with c in (0, 1], so the drift
/// direction is preserved while the magnitude is capped by min(n^theta, |b|).
pub fn tame(b: &mut [f64], n: u32, theta: f64) {
    let mut sq = 0.0;
    for v in b.iter() {
        sq += v * v;
    }
    let scale = 1.0 + libm::pow(n as f64, -theta) * libm::sqrt(sq);
    for v in b.iter_mut() {
        *v /= scale;
    }
}

/// The shared one-step accumulation. Both the plain and the delay steppers
/// funnel through this exact operation order so that coefficient-equal runs
/// produce bit-identical states.
pub(crate) fn accumulate_step<F>(
    x: &[f64],
    dt: f64,
    drift: &[f64],
    diffusion: &[f64],
    dw: &[f64],
    comp: &[f64],
    events: &[JumpEvent],
    mut eval_jump: F,
    jump_buf: &mut [f64],
    out: &mut [f64],
) where
    F: FnMut(&JumpEvent, &mut [f64]),
{
    let d = x.len();
    let m = dw.len();
    for i in 0..d {
        let mut acc = x[i] + drift[i] * dt;
        let row = &diffusion[i * m..(i + 1) * m];
        for j in 0..m {
            acc += row[j] * dw[j];
        }
        out[i] = acc;
    }
    for ev in events {
        eval_jump(ev, jump_buf);
        for i in 0..d {
            out[i] += jump_buf[i];
        }
    }
    for i in 0..d {
        out[i] -= comp[i] * dt;
    }
}

/// One Euler step from `x` at time `t` over `dt` = 1/n, consuming the
/// Brownian increment `dw` and the jump events inside (t, t + dt].
pub fn step(
    problem: &Problem,
    config: &SchemeConfig,
    t: f64,
    dt: f64,
    x: &[f64],
    dw: &[f64],
    events: &[JumpEvent],
) -> Vec<f64> {
    let d = problem.d;
    let mut drift = vec![0.0; d];
    let mut diffusion = vec![0.0; d * problem.m];
    let mut comp = vec![0.0; d];
    let mut jump_buf = vec![0.0; d];
    let mut out = vec![0.0; d];
    (problem.drift)(t, x, &mut drift);
    if config.taming == Taming::Tamed {
        tame(&mut drift, config.n, config.theta);
    }
    (problem.diffusion)(t, x, &mut diffusion);
    (problem.compensator_mean)(t, x, &mut comp);
    accumulate_step(
        x,
        dt,
        &drift,
        &diffusion,
        dw,
        &comp,
        events,
        |ev, buf| (problem.jump_coeff)(ev.time, x, ev.mark, buf),
        &mut jump_buf,
        &mut out,
    );
    out
}

pub(crate) fn check_compatibility(
    noise: &NoisePath,
    problem_m: usize,
    t0: f64,
    t1: f64,
    scheme_n: u32,
) -> Result<(), Error> {
    if noise.m() != problem_m {
        return Err(Error::DimensionMismatch {
            noise_m: noise.m(),
            problem_m,
        });
    }
    let g = noise.grid();
    if g.t0() != t0 || g.t1() != t1 {
        return Err(Error::WindowMismatch);
    }
    if scheme_n == 0 || g.n() % scheme_n != 0 {
        return Err(Error::GridMismatch {
            noise_n: g.n(),
            scheme_n,
        });
    }
    Ok(())
}

/// Runs the scheme over the whole grid of `noise`, internally coarsening the
/// noise when its resolution is a multiple of `config.n`.
///
/// The result is a pure function of `(problem, config, noise)`; jump events
/// are assigned to steps by binary search on their times, and an event at a
/// grid point belongs to the step ending there.
pub fn simulate(
    problem: &Problem,
    config: &SchemeConfig,
    noise: &NoisePath,
) -> Result<Trajectory, Error> {
    assert_eq!(problem.x0.len(), problem.d, "x0 must have length d");
    check_compatibility(noise, problem.m, problem.t0, problem.t1, config.n)?;
    config.validate()?;
    let path = noise.coarsen(noise.grid().n() / config.n)?;
    let grid = *path.grid();
    let d = problem.d;
    let m = problem.m;
    let dt = grid.dt();
    let jumps = path.jumps();

    let mut states = Vec::with_capacity((grid.steps() + 1) * d);
    states.extend_from_slice(&problem.x0);
    let mut dw = vec![0.0; m];
    let mut drift = vec![0.0; d];
    let mut diffusion = vec![0.0; d * m];
    let mut comp = vec![0.0; d];
    let mut jump_buf = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut first_nonfinite = None;

    let mut lo = jumps.partition_point(|ev| ev.time <= grid.time(0));
    for k in 0..grid.steps() {
        let t = grid.time(k);
        // The last interval keeps every remaining event so nothing in (t0, t1]
        // can be lost to rounding of the right boundary.
        let hi = if k + 1 == grid.steps() {
            jumps.len()
        } else {
            jumps.partition_point(|ev| ev.time <= grid.time(k + 1))
        };
        path.increment_into(k, &mut dw);
        let x = &states[k * d..(k + 1) * d];
        (problem.drift)(t, x, &mut drift);
        if config.taming == Taming::Tamed {
            tame(&mut drift, config.n, config.theta);
        }
        (problem.diffusion)(t, x, &mut diffusion);
        (problem.compensator_mean)(t, x, &mut comp);
        accumulate_step(
            x,
            dt,
            &drift,
            &diffusion,
            &dw,
            &comp,
            &jumps[lo..hi],
            |ev, buf| (problem.jump_coeff)(ev.time, x, ev.mark, buf),
            &mut jump_buf,
            &mut next,
        );
        if first_nonfinite.is_none() && next.iter().any(|v| !v.is_finite()) {
            first_nonfinite = Some(k + 1);
        }
        states.extend_from_slice(&next);
        lo = hi;
    }
    Ok(Trajectory {
        grid,
        d,
        states,
        first_nonfinite,
    })
}

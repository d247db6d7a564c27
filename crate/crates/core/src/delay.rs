//! The tamed Euler stepper for stochastic delay differential equations.
//!
//! Coefficients read a delayed argument y_t = (x_{delta_1(t)}, ...,
//! x_{delta_k(t)}) next to the current state. The stepper resolves every
//! delta_j at the step's left endpoint against a [`History`] buffer seeded by
//! the initial segment xi on [-H, 0] and grown by one state per step; the
//! admissibility constraint -H <= delta_j(t) <= floor(t/h)*h is checked at
//! each grid point, which also guarantees that a step only ever reads
//! history from closed segments. Only the drift is tamed, exactly as in the
//! non-delay scheme.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::grid::GridSpec;
use crate::model::{DelayLag, DelayProblem};
use crate::noise::NoisePath;
use crate::scheme::{accumulate_step, check_compatibility, tame, SchemeConfig, Taming, Trajectory};

/// Per-path state buffer: xi sampled on the grid extension over [-H, 0],
/// then one appended state per completed step on [0, T].
#[derive(Debug, Clone)]
pub struct History {
    grid: GridSpec,
    d: usize,
    depth_steps: usize,
    segment_steps: usize,
    values: Vec<f64>,
}

fn whole_steps(label: &'static str, value: f64, n: u32) -> Result<usize, Error> {
    let scaled = value * n as f64;
    let rounded = libm::round(scaled);
    if !value.is_finite()
        || value < 0.0
        || libm::fabs(scaled - rounded) > 1e-9 * (1.0 + libm::fabs(rounded))
    {
        return Err(Error::NonIntegerSegment { label, value, n });
    }
    Ok(rounded as usize)
}

impl History {
    /// Seeds the history for one run of `problem` at resolution `n`: checks
    /// that the segment length and history depth are whole numbers of steps
    /// and samples xi at every grid point of [-H, 0].
    pub fn new(problem: &DelayProblem, n: u32) -> Result<Self, Error> {
        if problem.t0 != 0.0 {
            return Err(Error::InvalidInput(alloc::format!(
                "delay problems run from t0 = 0 (the segment constraint counts from 0), got t0 = {}",
                problem.t0
            )));
        }
        let grid = GridSpec::new(problem.t0, problem.t1, n)?;
        let depth_steps = whole_steps("history depth H", problem.depth, n)?;
        let segment_steps = whole_steps("segment length h", problem.segment, n)?;
        if segment_steps == 0 {
            return Err(Error::NonIntegerSegment {
                label: "segment length h",
                value: problem.segment,
                n,
            });
        }
        let d = problem.d;
        let mut values = Vec::with_capacity((depth_steps + 1 + grid.steps()) * d);
        let mut buf = vec![0.0; d];
        for i in 0..=depth_steps {
            let t = (i as f64 - depth_steps as f64) / n as f64;
            (problem.xi)(t, &mut buf);
            values.extend_from_slice(&buf);
        }
        Ok(History {
            grid,
            d,
            depth_steps,
            segment_steps,
            values,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Steps covered by the pre-segment: H * n.
    pub fn depth_steps(&self) -> usize {
        self.depth_steps
    }

    /// Steps per segment: h * n.
    pub fn segment_steps(&self) -> usize {
        self.segment_steps
    }

    /// The largest filled grid index on [0, T] (0 right after seeding).
    pub fn frontier(&self) -> usize {
        self.values.len() / self.d - 1 - self.depth_steps
    }

    /// Appends the state for the next grid time.
    pub fn push(&mut self, state: &[f64]) {
        debug_assert_eq!(state.len(), self.d);
        self.values.extend_from_slice(state);
    }

    /// The stored state at signed grid index `i`, where time = i/n and
    /// i ranges over [-H*n, frontier].
    pub fn at(&self, index: i64) -> &[f64] {
        let row = (index + self.depth_steps as i64) as usize;
        &self.values[row * self.d..(row + 1) * self.d]
    }
}

/// Grid index of delta(t_k), snapped to the nearest-left grid point. The
/// snap is integer-exact whenever the lag itself lands on the grid, which
/// holds for FixedLag(l) with l*n whole and for PiecewiseFloor(w) with w*n
/// whole.
fn lag_grid_index(lag: DelayLag, k: i64, n: u32) -> i64 {
    match lag {
        DelayLag::FixedLag(l) => {
            let steps = l * n as f64;
            let rounded = libm::round(steps);
            if libm::fabs(steps - rounded) <= 1e-9 * (1.0 + libm::fabs(rounded)) {
                k - rounded as i64
            } else {
                libm::floor(k as f64 - steps) as i64
            }
        }
        DelayLag::PiecewiseFloor(width) => {
            let steps = width * n as f64;
            let rounded = libm::round(steps);
            if rounded >= 1.0 && libm::fabs(steps - rounded) <= 1e-9 * (1.0 + rounded) {
                let q = rounded as i64;
                k.div_euclid(q) * q
            } else {
                let segments = libm::floor(k as f64 / steps);
                libm::floor(segments * steps + 1e-9) as i64
            }
        }
    }
}

pub(crate) fn resolve_delay_into(
    history: &History,
    lags: &[DelayLag],
    t: f64,
    out: &mut [f64],
) -> Result<(), Error> {
    let n = history.grid().n();
    let d = history.dim();
    debug_assert_eq!(out.len(), lags.len() * d);
    let k = libm::round(n as f64 * t) as i64;
    debug_assert!(k >= 0, "delay resolution happens on [0, T]");
    for (j, lag) in lags.iter().enumerate() {
        let idx = lag_grid_index(*lag, k, n);
        let delayed = idx as f64 / n as f64;
        if idx < -(history.depth_steps() as i64) {
            return Err(Error::DelayBeforeHistory {
                lag: j,
                time: t,
                delayed,
                depth: history.depth_steps() as f64 / n as f64,
            });
        }
        let seg = history.segment_steps() as i64;
        if idx > (k / seg) * seg {
            return Err(Error::DelayAheadOfSegment {
                lag: j,
                time: t,
                delayed,
            });
        }
        if idx > history.frontier() as i64 {
            return Err(Error::Internal("delay read beyond the filled history frontier"));
        }
        out[j * d..(j + 1) * d].copy_from_slice(history.at(idx));
    }
    Ok(())
}

/// Resolves the delayed argument at grid time `t`: the concatenation
/// (x_{delta_1(t)}, ..., x_{delta_k(t)}), one d-block per lag.
///
/// Reading below -H is a configuration error; reading past the filled
/// frontier is an internal error (the segment constraint rules it out for
/// admissible problems).
pub fn resolve_delay(history: &History, lags: &[DelayLag], t: f64) -> Result<Vec<f64>, Error> {
    let mut out = vec![0.0; lags.len() * history.dim()];
    resolve_delay_into(history, lags, t, &mut out)?;
    Ok(out)
}

/// Runs the delay scheme over the whole grid of `noise` (internally
/// coarsening as in the non-delay `simulate`).
///
/// Each step evaluates beta, alpha, lambda and the compensator at
/// (t_k, y_k, x_k) with y_k resolved from history at the step's left
/// endpoint; only beta is tamed. Jump events use the event time in the
/// t-slot but the left-endpoint (y_k, x_k) pair.
pub fn simulate_delay(
    problem: &DelayProblem,
    config: &SchemeConfig,
    noise: &NoisePath,
) -> Result<Trajectory, Error> {
    assert_eq!(problem.x0.len(), problem.d, "x0 must have length d");
    check_compatibility(noise, problem.m, problem.t0, problem.t1, config.n)?;
    config.validate()?;
    let path = noise.coarsen(noise.grid().n() / config.n)?;
    let grid = *path.grid();
    let mut history = History::new(problem, grid.n())?;
    let d = problem.d;
    let m = problem.m;
    let dt = grid.dt();
    let jumps = path.jumps();

    if history.at(0) != &problem.x0[..] {
        return Err(Error::InvalidInput(alloc::format!(
            "x0 = {:?} must equal xi(0) = {:?}",
            problem.x0,
            history.at(0)
        )));
    }

    let mut states = Vec::with_capacity((grid.steps() + 1) * d);
    states.extend_from_slice(&problem.x0);
    let mut y = vec![0.0; problem.lags.len() * d];
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
        let hi = if k + 1 == grid.steps() {
            jumps.len()
        } else {
            jumps.partition_point(|ev| ev.time <= grid.time(k + 1))
        };
        resolve_delay_into(&history, &problem.lags, t, &mut y)?;
        path.increment_into(k, &mut dw);
        let x = &states[k * d..(k + 1) * d];
        (problem.drift)(t, &y, x, &mut drift);
        if config.taming == Taming::Tamed {
            tame(&mut drift, config.n, config.theta);
        }
        (problem.diffusion)(t, &y, x, &mut diffusion);
        (problem.compensator_mean)(t, &y, x, &mut comp);
        accumulate_step(
            x,
            dt,
            &drift,
            &diffusion,
            &dw,
            &comp,
            &jumps[lo..hi],
            |ev, buf| (problem.jump_coeff)(ev.time, &y, x, ev.mark, buf),
            &mut jump_buf,
            &mut next,
        );
        if first_nonfinite.is_none() && next.iter().any(|v| !v.is_finite()) {
            first_nonfinite = Some(k + 1);
        }
        states.extend_from_slice(&next);
        history.push(&next);
        lo = hi;
    }
    Ok(Trajectory::from_raw(grid, d, states, first_nonfinite))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, LevyModel, MarkLaw, Problem};
    use crate::noise::JumpEvent;
    use crate::scheme::simulate;

    fn seeded_history(n: u32, pushes: usize) -> History {
        // example2 history at resolution n, with `pushes` synthetic states
        // 10, 20, 30, ... appended after time 0.
        let p = model::example2();
        let mut h = History::new(&p, n).unwrap();
        for i in 0..pushes {
            h.push(&[10.0 * (i + 1) as f64]);
        }
        h
    }

    #[test]
    fn history_seeds_from_segment() {
        let h = seeded_history(4, 0);
        assert_eq!(h.depth_steps(), 4);
        assert_eq!(h.segment_steps(), 4);
        assert_eq!(h.frontier(), 0);
        assert_eq!(h.at(-4), &[0.0]); // xi(-1)
        assert_eq!(h.at(-2), &[0.5]); // xi(-1/2)
        assert_eq!(h.at(0), &[1.0]); // xi(0)
    }

    #[test]
    fn history_rejects_off_grid_segments() {
        let mut p = model::example2();
        p.segment = 0.3;
        assert!(matches!(
            History::new(&p, 4),
            Err(Error::NonIntegerSegment { .. })
        ));
        let mut p = model::example2();
        p.depth = 0.7;
        assert!(matches!(
            History::new(&p, 4),
            Err(Error::NonIntegerSegment { .. })
        ));
        let mut p = model::example2();
        p.t0 = 0.5;
        p.t1 = 2.5;
        assert!(History::new(&p, 4).is_err());
    }

    #[test]
    fn resolve_fixed_lag_reads_past_state() {
        // t = 1.25 with delta(t) = t - 1 reads the state at 0.25.
        let h = seeded_history(4, 5); // frontier at 1.25
        let y = resolve_delay(&h, &[DelayLag::FixedLag(1.0)], 1.25).unwrap();
        assert_eq!(y, vec![10.0]);
    }

    #[test]
    fn resolve_piecewise_floor_reads_segment_start() {
        // t = 1.25 with delta(t) = floor(t) reads the state at 1.0.
        let h = seeded_history(4, 5);
        let y = resolve_delay(&h, &[DelayLag::PiecewiseFloor(1.0)], 1.25).unwrap();
        assert_eq!(y, vec![40.0]);
    }

    #[test]
    fn resolve_reaches_into_initial_segment() {
        // t = 0.5 with delta(t) = t - 1 reads xi(-0.5) = 0.5.
        let h = seeded_history(4, 2);
        let y = resolve_delay(&h, &[DelayLag::FixedLag(1.0)], 0.5).unwrap();
        assert_eq!(y, vec![0.5]);
    }

    #[test]
    fn resolve_rejects_reads_below_history() {
        let h = seeded_history(4, 2);
        let err = resolve_delay(&h, &[DelayLag::FixedLag(2.0)], 0.5).unwrap_err();
        assert!(matches!(err, Error::DelayBeforeHistory { lag: 0, .. }));
        assert!(!err.is_internal());
    }

    #[test]
    fn resolve_rejects_forward_reads() {
        // A negative lag would read the future: delta(t) = t + 0.5.
        let h = seeded_history(4, 4);
        let err = resolve_delay(&h, &[DelayLag::FixedLag(-0.5)], 0.5).unwrap_err();
        assert!(matches!(err, Error::DelayAheadOfSegment { lag: 0, .. }));
    }

    #[test]
    fn resolve_flags_frontier_gaps_as_internal() {
        // delta(1.0) = 1.0 is admissible, but the state is not filled yet.
        let h = seeded_history(4, 3);
        let err = resolve_delay(&h, &[DelayLag::PiecewiseFloor(1.0)], 1.0).unwrap_err();
        assert!(err.is_internal());
    }

    #[test]
    fn multiple_lags_resolve_in_order() {
        let h = seeded_history(4, 5);
        let y = resolve_delay(
            &h,
            &[DelayLag::FixedLag(1.0), DelayLag::PiecewiseFloor(1.0)],
            1.25,
        )
        .unwrap();
        assert_eq!(y, vec![10.0, 40.0]);
    }

    #[test]
    fn delay_problem_ignoring_y_reduces_to_plain_scheme() {
        fn drift_y(_t: f64, _y: &[f64], x: &[f64], out: &mut [f64]) {
            let v = x[0];
            out[0] = -(v * v * v * v * v);
        }
        fn diff_y(_t: f64, _y: &[f64], x: &[f64], out: &mut [f64]) {
            out[0] = x[0];
        }
        fn jump_y(_t: f64, _y: &[f64], x: &[f64], z: f64, out: &mut [f64]) {
            out[0] = x[0] * z;
        }
        fn comp_y(_t: f64, _y: &[f64], _x: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn one_segment(_t: f64, out: &mut [f64]) {
            out[0] = 1.0;
        }
        let delayed = crate::model::DelayProblem {
            name: "example1_as_delay",
            d: 1,
            m: 1,
            lags: vec![DelayLag::FixedLag(1.0)],
            drift: drift_y,
            diffusion: diff_y,
            jump_coeff: jump_y,
            compensator_mean: comp_y,
            levy: LevyModel {
                intensity: 3.0,
                mark_law: MarkLaw::StandardNormal,
            },
            x0: vec![1.0],
            xi: one_segment,
            depth: 1.0,
            segment: 1.0,
            t0: 0.0,
            t1: 1.0,
        };
        let plain = model::example1();
        let grid = GridSpec::new(0.0, 1.0, 64).unwrap();
        let noise = NoisePath::generate(404, 11, grid, 1, 3.0, MarkLaw::StandardNormal);
        let config = SchemeConfig::tamed(64, 0.5).unwrap();
        let a = simulate_delay(&delayed, &config, &noise).unwrap();
        let b = simulate(&plain, &config, &noise).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn first_segment_freezes_to_time_dependent_coefficients() {
        // On [0, 1] the example2 delay argument is deterministic:
        // y_t = xi(t - 1) = t. With jumps removed, the run must equal a
        // non-delay problem with b(t,x) = x - x^3 + t^2, sigma(t,x) = x + t^3.
        fn frozen_drift(t: f64, x: &[f64], out: &mut [f64]) {
            let v = x[0];
            out[0] = v - v * v * v + t * t;
        }
        fn frozen_diffusion(t: f64, x: &[f64], out: &mut [f64]) {
            out[0] = x[0] + t * t * t;
        }
        fn zero(_t: f64, _x: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn zero_j(_t: f64, _x: &[f64], _z: f64, out: &mut [f64]) {
            out.fill(0.0);
        }
        fn zero_delay_j(_t: f64, _y: &[f64], _x: &[f64], _z: f64, out: &mut [f64]) {
            out.fill(0.0);
        }
        fn zero_delay(_t: f64, _y: &[f64], _x: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        let mut delayed = model::example2();
        delayed.t1 = 1.0;
        delayed.jump_coeff = zero_delay_j;
        delayed.compensator_mean = zero_delay;
        delayed.levy = LevyModel::none();

        let frozen = Problem {
            name: "example2_first_segment",
            d: 1,
            m: 1,
            drift: frozen_drift,
            diffusion: frozen_diffusion,
            jump_coeff: zero_j,
            compensator_mean: zero,
            levy: LevyModel::none(),
            x0: vec![1.0],
            t0: 0.0,
            t1: 1.0,
        };
        let grid = GridSpec::new(0.0, 1.0, 256).unwrap();
        let config = SchemeConfig::tamed(256, 0.5).unwrap();
        for path_index in 0..3 {
            let noise = NoisePath::generate(9090, path_index, grid, 1, 0.0, MarkLaw::PointMass(0.0));
            let a = simulate_delay(&delayed, &config, &noise).unwrap();
            let b = simulate(&frozen, &config, &noise).unwrap();
            assert_eq!(a, b, "path {path_index}");
        }
    }

    #[test]
    fn simulate_delay_consumes_jumps_with_left_endpoint_state() {
        // One hand-placed jump: x and y are frozen at the step's left
        // endpoint, so the jump adds (x_k + y_k) * z exactly.
        let mut p = model::example2();
        p.t1 = 1.0;
        let grid = GridSpec::new(0.0, 1.0, 4).unwrap();
        let jump = JumpEvent {
            time: 0.6,
            mark: 2.0,
        };
        let noise = NoisePath::from_parts(grid, 1, vec![0.0; 4], vec![jump]).unwrap();
        let config = SchemeConfig::tamed(4, 0.5).unwrap();
        let traj = simulate_delay(&p, &config, &noise).unwrap();

        // Reproduce by hand: deterministic drift/diffusion, jump in step k=2.
        let mut h = History::new(&p, 4).unwrap();
        let mut x = 1.0;
        for k in 0..4 {
            let t = k as f64 / 4.0;
            let y = resolve_delay(&h, &p.lags, t).unwrap()[0];
            let mut b = [x - x * x * x + y * y];
            tame(&mut b, 4, 0.5);
            let mut next = x + b[0] * 0.25;
            if k == 2 {
                next += (x + y) * 2.0;
            }
            h.push(&[next]);
            x = next;
        }
        assert!((traj.terminal()[0] - x).abs() < 1e-15);
    }

    #[test]
    fn simulate_delay_rejects_inconsistent_x0() {
        let mut p = model::example2();
        p.x0 = vec![2.0]; // xi(0) = 1
        let grid = GridSpec::new(0.0, 2.0, 8).unwrap();
        let noise = NoisePath::generate(1, 0, grid, 1, 3.0, MarkLaw::StandardNormal);
        let err = simulate_delay(&p, &SchemeConfig::tamed(8, 0.5).unwrap(), &noise).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn simulate_delay_internally_coarsens() {
        let p = model::example2();
        let grid = GridSpec::new(0.0, 2.0, 64).unwrap();
        let noise = NoisePath::generate(55, 1, grid, 1, 3.0, MarkLaw::StandardNormal);
        let config = SchemeConfig::tamed(16, 0.5).unwrap();
        let from_fine = simulate_delay(&p, &config, &noise).unwrap();
        let from_coarse = simulate_delay(&p, &config, &noise.coarsen(4).unwrap()).unwrap();
        assert_eq!(from_fine, from_coarse);
        assert_eq!(from_fine.grid().n(), 16);
    }
}

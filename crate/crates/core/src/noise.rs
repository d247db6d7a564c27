//! Deterministic driving noise: per-path random streams, Brownian increments
//! and Poisson jump events, with exact coarsening across grid resolutions.
//!
//! A [`NoisePath`] is sampled once on its generation grid and then viewed at
//! coarser resolutions through [`NoisePath::coarsen`]. A coarse Brownian
//! increment is always the flat ascending sum of the underlying fine
//! increments, so every resolution sees literally the same realization and
//! splitting a coarsening factor over several calls changes nothing, bit for
//! bit. Jump events carry absolute times and are never resampled or moved.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::Error;
use crate::grid::GridSpec;
use crate::model::MarkLaw;

/// Which of a path's independent randomness lanes a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lane {
    Brownian,
    JumpTimes,
    JumpMarks,
}

/// Identifies one random stream as `(base_seed, path_index, lane)`.
///
/// Equal keys yield bit-identical streams in any thread or process; keys
/// differing in any field yield statistically independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub base_seed: u64,
    pub path_index: u64,
    pub lane: Lane,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer, used to decorrelate the structured key fields.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the random stream identified by `key`.
///
/// The key fields are folded through splitmix64 into a 256-bit ChaCha12
/// seed, so the stream is a pure function of the key.
pub fn derive_stream(key: StreamKey) -> Stream {
    let lane = match key.lane {
        Lane::Brownian => 1u64,
        Lane::JumpTimes => 2,
        Lane::JumpMarks => 3,
    };
    let mut state = mix64(key.base_seed);
    state = mix64(state.wrapping_add(GOLDEN_GAMMA) ^ mix64(key.path_index));
    state = mix64(state.wrapping_add(GOLDEN_GAMMA) ^ mix64(lane));
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN_GAMMA);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    Stream {
        rng: ChaCha12Rng::from_seed(seed),
        spare_normal: None,
    }
}

/// A deterministic random stream with the draws the schemes need.
///
/// The draw procedures are part of the determinism contract and fixed here:
/// uniforms take the top 53 bits of one 64-bit word; Gaussians use the
/// Marsaglia polar method with the spare of each pair cached; Poisson counts
/// use multiplicative inversion on chunks of the mean.
pub struct Stream {
    rng: ChaCha12Rng,
    spare_normal: Option<f64>,
}

impl Stream {
    /// Uniform on [0, 1) with 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = libm::sqrt(-2.0 * libm::log(s) / s);
                self.spare_normal = Some(v * f);
                return u * f;
            }
        }
    }

    /// Poisson draw with the given mean.
    ///
    /// The mean is consumed in chunks of at most 256 so exp(-chunk) stays far
    /// from underflow; the chunk counts sum to a Poisson draw with the full
    /// mean.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        assert!(
            mean.is_finite() && mean >= 0.0,
            "Poisson mean must be finite and nonnegative"
        );
        let mut remaining = mean;
        let mut total = 0u64;
        loop {
            let chunk = if remaining > 256.0 { 256.0 } else { remaining };
            let floor = libm::exp(-chunk);
            let mut product = self.uniform();
            while product > floor {
                total += 1;
                product *= self.uniform();
            }
            remaining -= chunk;
            if remaining <= 0.0 {
                return total;
            }
        }
    }
}

/// One atom of the driving jump noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    /// Absolute jump time, inside (t0, t1] of the generating window.
    pub time: f64,
    /// The mark drawn for this event. Mark spaces here are scalar.
    pub mark: f64,
}

/// Draws the `K` Brownian increments for `grid` as a row-major `K x m`
/// matrix; every entry is Normal(0, 1/n).
pub fn sample_brownian(stream: &mut Stream, grid: &GridSpec, m: usize) -> Vec<f64> {
    assert!(m >= 1, "Brownian dimension must be at least 1");
    let sd = libm::sqrt(grid.dt());
    let mut out = Vec::with_capacity(grid.steps() * m);
    for _ in 0..grid.steps() * m {
        out.push(sd * stream.standard_normal());
    }
    out
}

/// Draws the jump events on (t0, t1]: a Poisson(intensity * (t1 - t0))
/// count, times uniform over the window and sorted ascending (stable, so
/// coincident times keep generation order), marks drawn from `law` in time
/// order after sorting.
pub fn sample_jumps(
    times: &mut Stream,
    marks: &mut Stream,
    intensity: f64,
    law: MarkLaw,
    t0: f64,
    t1: f64,
) -> Vec<JumpEvent> {
    assert!(intensity >= 0.0, "jump intensity must be nonnegative");
    let count = times.poisson(intensity * (t1 - t0));
    let mut events: Vec<JumpEvent> = (0..count)
        .map(|_| JumpEvent {
            // t1 - u*(t1-t0) with u in [0,1) lands in (t0, t1].
            time: t1 - times.uniform() * (t1 - t0),
            mark: 0.0,
        })
        .collect();
    events.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("jump times are finite"));
    for ev in events.iter_mut() {
        ev.mark = law.sample(marks);
    }
    events
}

/// One realization of the driving noise, viewed at some resolution.
///
/// The realization lives on the generation grid; coarsened paths share that
/// storage and only change the view. [`increment_into`](Self::increment_into)
/// sums the underlying fine rows left to right, which makes
/// `coarsen(coarsen(p, a), b)` and `coarsen(p, a*b)` indistinguishable.
#[derive(Debug, Clone)]
pub struct NoisePath {
    base: GridSpec,
    view: GridSpec,
    factor: u32,
    m: usize,
    increments: Arc<[f64]>,
    jumps: Arc<[JumpEvent]>,
}

impl NoisePath {
    /// Samples the full noise for one path on `grid`: Brownian increments in
    /// `m` coordinates plus jump events at `intensity` with `law` marks, all
    /// keyed by `(base_seed, path_index)` through the three stream lanes.
    pub fn generate(
        base_seed: u64,
        path_index: u64,
        grid: GridSpec,
        m: usize,
        intensity: f64,
        law: MarkLaw,
    ) -> Self {
        let key = |lane| StreamKey {
            base_seed,
            path_index,
            lane,
        };
        let mut brownian = derive_stream(key(Lane::Brownian));
        let increments = sample_brownian(&mut brownian, &grid, m);
        let jumps = if intensity > 0.0 {
            let mut jump_times = derive_stream(key(Lane::JumpTimes));
            let mut jump_marks = derive_stream(key(Lane::JumpMarks));
            sample_jumps(
                &mut jump_times,
                &mut jump_marks,
                intensity,
                law,
                grid.t0(),
                grid.t1(),
            )
        } else {
            Vec::new()
        };
        NoisePath {
            base: grid,
            view: grid,
            factor: 1,
            m,
            increments: increments.into(),
            jumps: jumps.into(),
        }
    }

    /// Wraps explicit increments (row-major `K x m`) and jump events;
    /// useful for tests and hand-built couplings.
    pub fn from_parts(
        grid: GridSpec,
        m: usize,
        increments: Vec<f64>,
        jumps: Vec<JumpEvent>,
    ) -> Result<Self, Error> {
        if m == 0 {
            return Err(Error::InvalidInput(alloc::format!(
                "Brownian dimension must be at least 1, got {m}"
            )));
        }
        if increments.len() != grid.steps() * m {
            return Err(Error::InvalidInput(alloc::format!(
                "expected {} increments ({} steps x {m} coordinates), got {}",
                grid.steps() * m,
                grid.steps(),
                increments.len()
            )));
        }
        for pair in jumps.windows(2) {
            if pair[1].time < pair[0].time {
                return Err(Error::InvalidInput(alloc::string::String::from(
                    "jump events must be sorted by time",
                )));
            }
        }
        if let (Some(first), Some(last)) = (jumps.first(), jumps.last()) {
            if first.time <= grid.t0() || last.time > grid.t1() {
                return Err(Error::InvalidInput(alloc::format!(
                    "jump times must lie in ({}, {}]",
                    grid.t0(),
                    grid.t1()
                )));
            }
        }
        Ok(NoisePath {
            base: grid,
            view: grid,
            factor: 1,
            m,
            increments: increments.into(),
            jumps: jumps.into(),
        })
    }

    /// The grid of the current view.
    pub fn grid(&self) -> &GridSpec {
        &self.view
    }

    /// The grid the noise was generated on.
    pub fn base_grid(&self) -> &GridSpec {
        &self.base
    }

    /// Brownian dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    /// How many generation-grid steps one view step spans.
    pub fn factor(&self) -> u32 {
        self.factor
    }

    /// All jump events of the realization, sorted by time.
    pub fn jumps(&self) -> &[JumpEvent] {
        &self.jumps
    }

    /// The same realization viewed with `factor` times fewer steps per unit
    /// time. Jump events are untouched.
    pub fn coarsen(&self, factor: u32) -> Result<Self, Error> {
        let view = self.view.coarsen(factor)?;
        Ok(NoisePath {
            base: self.base,
            view,
            factor: self.factor * factor,
            m: self.m,
            increments: Arc::clone(&self.increments),
            jumps: Arc::clone(&self.jumps),
        })
    }

    /// Writes the `m`-dimensional Brownian increment over view step `k` into
    /// `out`, summing the underlying fine rows in ascending order.
    pub fn increment_into(&self, k: usize, out: &mut [f64]) {
        assert_eq!(out.len(), self.m, "output buffer must have length m");
        assert!(k < self.view.steps(), "step index out of range");
        out.fill(0.0);
        let span = self.factor as usize;
        for row in k * span..(k + 1) * span {
            let base = row * self.m;
            for (c, slot) in out.iter_mut().enumerate() {
                *slot += self.increments[base + c];
            }
        }
    }

    /// Allocating convenience form of [`increment_into`](Self::increment_into).
    pub fn increment(&self, k: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.m];
        self.increment_into(k, &mut out);
        out
    }
}

//! Problem definitions: coefficient functions, mark laws, compensators, and
//! the registry of built-in problems.
//!
//! Coefficients are plain function pointers registered in code rather than
//! parsed from configuration: the admissible coefficient classes (one-sided
//! Lipschitz drifts of polynomial growth) cannot be checked from a config
//! string, so the registry is the honest surface. Compensators are stored in
//! closed form per problem; no quadrature fallback exists, because silent
//! quadrature error would contaminate the measured convergence rates.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::noise::Stream;

/// Distribution of jump marks. Each case carries a closed-form mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkLaw {
    StandardNormal,
    Uniform { a: f64, b: f64 },
    PointMass(f64),
}

impl MarkLaw {
    /// Draws one mark.
    pub fn sample(&self, stream: &mut Stream) -> f64 {
        match *self {
            MarkLaw::StandardNormal => stream.standard_normal(),
            MarkLaw::Uniform { a, b } => a + (b - a) * stream.uniform(),
            MarkLaw::PointMass(z) => z,
        }
    }

    /// E[Z] in closed form.
    pub fn mean(&self) -> f64 {
        match *self {
            MarkLaw::StandardNormal => 0.0,
            MarkLaw::Uniform { a, b } => 0.5 * (a + b),
            MarkLaw::PointMass(z) => z,
        }
    }
}

/// Finite-activity jump specification: total event rate and mark law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyModel {
    /// Expected number of jumps per unit time; must be finite.
    pub intensity: f64,
    pub mark_law: MarkLaw,
}

impl LevyModel {
    /// No jumps at all.
    pub fn none() -> Self {
        LevyModel {
            intensity: 0.0,
            mark_law: MarkLaw::PointMass(0.0),
        }
    }
}

/// Drift b(t, x), written into `out` (length d).
pub type DriftFn = fn(f64, &[f64], &mut [f64]);
/// Diffusion sigma(t, x), written into `out` as a row-major d x m matrix.
pub type DiffusionFn = fn(f64, &[f64], &mut [f64]);
/// Jump coefficient gamma(t, x, z), written into `out` (length d).
pub type JumpFn = fn(f64, &[f64], f64, &mut [f64]);
/// Closed-form intensity * E[gamma(t, x, Z)], written into `out` (length d).
pub type CompensatorFn = fn(f64, &[f64], &mut [f64]);

/// Delay drift beta(t, y, x); `y` concatenates the delayed states lag-major.
pub type DelayDriftFn = fn(f64, &[f64], &[f64], &mut [f64]);
/// Delay diffusion alpha(t, y, x), row-major d x m.
pub type DelayDiffusionFn = fn(f64, &[f64], &[f64], &mut [f64]);
/// Delay jump coefficient lambda(t, y, x, z).
pub type DelayJumpFn = fn(f64, &[f64], &[f64], f64, &mut [f64]);
/// Closed-form intensity * E[lambda(t, y, x, Z)].
pub type DelayCompensatorFn = fn(f64, &[f64], &[f64], &mut [f64]);
/// Initial segment xi(t) on [-H, 0], written into `out` (length d).
pub type SegmentFn = fn(f64, &mut [f64]);

/// A jump-diffusion problem dx = b dt + sigma dW + jumps, on [t0, t1].
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: &'static str,
    /// State dimension.
    pub d: usize,
    /// Brownian dimension.
    pub m: usize,
    pub drift: DriftFn,
    pub diffusion: DiffusionFn,
    pub jump_coeff: JumpFn,
    /// Must equal intensity * E[jump_coeff(t, x, Z)] under `levy`.
    pub compensator_mean: CompensatorFn,
    pub levy: LevyModel,
    pub x0: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
}

impl Problem {
    /// The compensator drift intensity * E[gamma(t, x, Z)], from the stored
    /// closed form.
    pub fn compensator(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.compensator_mean)(t, x, out);
    }
}

/// A delay map delta_j(t) feeding one slot of the delayed argument y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayLag {
    /// delta(t) = t - lag: a fixed look-back.
    FixedLag(f64),
    /// delta(t) = floor(t / width) * width: frozen over each segment.
    PiecewiseFloor(f64),
}

/// A delay problem: coefficients also read y = (x_{delta_1(t)}, ...,
/// x_{delta_k(t)}), with history seeded by xi on [-H, 0].
#[derive(Debug, Clone)]
pub struct DelayProblem {
    pub name: &'static str,
    pub d: usize,
    pub m: usize,
    /// The delay maps; `y` passed to coefficients concatenates their states
    /// in this order.
    pub lags: Vec<DelayLag>,
    pub drift: DelayDriftFn,
    pub diffusion: DelayDiffusionFn,
    pub jump_coeff: DelayJumpFn,
    /// Must equal intensity * E[jump_coeff(t, y, x, Z)] under `levy`.
    pub compensator_mean: DelayCompensatorFn,
    pub levy: LevyModel,
    pub x0: Vec<f64>,
    /// Initial segment on [-depth, 0]; must satisfy xi(0) = x0.
    pub xi: SegmentFn,
    /// History depth H: lags may reach back to -H.
    pub depth: f64,
    /// Segment length h in the constraint delta_j(t) <= floor(t/h)*h.
    pub segment: f64,
    pub t0: f64,
    pub t1: f64,
}

impl DelayProblem {
    /// The compensator drift intensity * E[lambda(t, y, x, Z)], from the
    /// stored closed form.
    pub fn compensator(&self, t: f64, y: &[f64], x: &[f64], out: &mut [f64]) {
        (self.compensator_mean)(t, y, x, out);
    }
}

/// Either problem kind, as handed out by the registry.
#[derive(Debug, Clone)]
pub enum AnyProblem {
    Sde(Problem),
    Delay(DelayProblem),
}

impl AnyProblem {
    pub fn name(&self) -> &'static str {
        match self {
            AnyProblem::Sde(p) => p.name,
            AnyProblem::Delay(p) => p.name,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            AnyProblem::Sde(p) => p.d,
            AnyProblem::Delay(p) => p.d,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            AnyProblem::Sde(p) => p.m,
            AnyProblem::Delay(p) => p.m,
        }
    }

    pub fn window(&self) -> (f64, f64) {
        match self {
            AnyProblem::Sde(p) => (p.t0, p.t1),
            AnyProblem::Delay(p) => (p.t0, p.t1),
        }
    }

    pub fn levy(&self) -> LevyModel {
        match self {
            AnyProblem::Sde(p) => p.levy,
            AnyProblem::Delay(p) => p.levy,
        }
    }
}

fn neg_quintic_drift(_t: f64, x: &[f64], out: &mut [f64]) {
    let v = x[0];
    out[0] = -(v * v * v * v * v);
}

fn linear_diffusion(_t: f64, x: &[f64], out: &mut [f64]) {
    out[0] = x[0];
}

fn linear_jump(_t: f64, x: &[f64], z: f64, out: &mut [f64]) {
    out[0] = x[0] * z;
}

fn zero_coeff(_t: f64, _x: &[f64], out: &mut [f64]) {
    out.fill(0.0);
}

fn zero_jump(_t: f64, _x: &[f64], _z: f64, out: &mut [f64]) {
    out.fill(0.0);
}

fn cubic_delay_drift(_t: f64, y: &[f64], x: &[f64], out: &mut [f64]) {
    let v = x[0];
    let w = y[0];
    out[0] = v - v * v * v + w * w;
}

fn cubic_delay_diffusion(_t: f64, y: &[f64], x: &[f64], out: &mut [f64]) {
    let w = y[0];
    out[0] = x[0] + w * w * w;
}

fn sum_delay_jump(_t: f64, y: &[f64], x: &[f64], z: f64, out: &mut [f64]) {
    out[0] = (x[0] + y[0]) * z;
}

fn zero_delay_coeff(_t: f64, _y: &[f64], _x: &[f64], out: &mut [f64]) {
    out.fill(0.0);
}

fn linear_segment(t: f64, out: &mut [f64]) {
    out[0] = t + 1.0;
}

/// dx = -x^5 dt + x dW + integral x z Ntilde(dt, dz) on [0, 1], x0 = 1,
/// standard normal marks at intensity 3. The compensator is 0 since E[Z] = 0.
pub fn example1() -> Problem {
    Problem {
        name: "example1",
        d: 1,
        m: 1,
        drift: neg_quintic_drift,
        diffusion: linear_diffusion,
        jump_coeff: linear_jump,
        compensator_mean: zero_coeff,
        levy: LevyModel {
            intensity: 3.0,
            mark_law: MarkLaw::StandardNormal,
        },
        x0: vec![1.0],
        t0: 0.0,
        t1: 1.0,
    }
}

/// [`example1`] with the jump part removed: dx = -x^5 dt + x dW.
pub fn example1_nojumps() -> Problem {
    Problem {
        name: "example1_nojumps",
        jump_coeff: zero_jump,
        levy: LevyModel::none(),
        ..example1()
    }
}

/// The pure-drift core of [`example1`]: dx = -x^5 dt, exactly solvable and
/// useful as a deterministic stability probe.
pub fn quintic_ode() -> Problem {
    Problem {
        name: "quintic_ode",
        diffusion: zero_coeff,
        jump_coeff: zero_jump,
        levy: LevyModel::none(),
        ..example1()
    }
}

/// The delay problem dx = (x - x^3 + y^2) dt + (x + y^3) dW
/// + integral (x + y) z Ntilde(dt, dz) with y_t = x_{t-1} on [0, 2],
/// xi(t) = t + 1 on [-1, 0], standard normal marks at intensity 3.
pub fn example2() -> DelayProblem {
    DelayProblem {
        name: "example2",
        d: 1,
        m: 1,
        lags: vec![DelayLag::FixedLag(1.0)],
        drift: cubic_delay_drift,
        diffusion: cubic_delay_diffusion,
        jump_coeff: sum_delay_jump,
        compensator_mean: zero_delay_coeff,
        levy: LevyModel {
            intensity: 3.0,
            mark_law: MarkLaw::StandardNormal,
        },
        x0: vec![1.0],
        xi: linear_segment,
        depth: 1.0,
        segment: 1.0,
        t0: 0.0,
        t1: 2.0,
    }
}

/// Registry names accepted by [`builtin`].
pub fn builtin_names() -> &'static [&'static str] {
    &["example1", "example2", "quintic_ode", "example1_nojumps"]
}

/// Looks up a built-in problem by name.
pub fn builtin(name: &str) -> Result<AnyProblem, Error> {
    match name {
        "example1" => Ok(AnyProblem::Sde(example1())),
        "example2" => Ok(AnyProblem::Delay(example2())),
        "quintic_ode" => Ok(AnyProblem::Sde(quintic_ode())),
        "example1_nojumps" => Ok(AnyProblem::Sde(example1_nojumps())),
        _ => Err(Error::UnknownProblem {
            name: String::from(name),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{derive_stream, Lane, StreamKey};
    use alloc::format;

    #[test]
    fn registry_knows_all_names() {
        for name in builtin_names() {
            let p = builtin(name).unwrap();
            assert_eq!(p.name(), *name);
        }
        let err = builtin("no_such_problem").unwrap_err();
        assert!(!err.is_internal());
        let msg = format!("{err}");
        for name in builtin_names() {
            assert!(msg.contains(name), "error must list {name}: {msg}");
        }
    }

    #[test]
    fn example1_drift_at_one() {
        let p = example1();
        let mut out = [0.0];
        (p.drift)(0.3, &[1.0], &mut out);
        assert_eq!(out[0], -1.0);
        (p.drift)(0.0, &[2.0], &mut out);
        assert_eq!(out[0], -32.0);
    }

    #[test]
    fn example2_segment_endpoints() {
        let p = example2();
        let mut out = [0.0];
        (p.xi)(-1.0, &mut out);
        assert_eq!(out[0], 0.0);
        (p.xi)(0.0, &mut out);
        assert_eq!(out[0], 1.0);
        assert_eq!(out[0], p.x0[0]);
    }

    #[test]
    fn quintic_ode_has_no_noise_terms() {
        let p = quintic_ode();
        let mut out = [1.0];
        (p.diffusion)(0.5, &[3.0], &mut out);
        assert_eq!(out[0], 0.0);
        let mut j = [1.0];
        (p.jump_coeff)(0.5, &[3.0], 2.0, &mut j);
        assert_eq!(j[0], 0.0);
        assert_eq!(p.levy.intensity, 0.0);
    }

    #[test]
    fn mark_law_means() {
        assert_eq!(MarkLaw::StandardNormal.mean(), 0.0);
        assert_eq!(MarkLaw::Uniform { a: -1.0, b: 3.0 }.mean(), 1.0);
        assert_eq!(MarkLaw::PointMass(2.5).mean(), 2.5);
    }

    #[test]
    fn uniform_law_samples_in_range() {
        let mut s = derive_stream(StreamKey {
            base_seed: 5,
            path_index: 0,
            lane: Lane::JumpMarks,
        });
        let law = MarkLaw::Uniform { a: -2.0, b: -1.0 };
        for _ in 0..1000 {
            let z = law.sample(&mut s);
            assert!((-2.0..-1.0).contains(&z));
        }
    }

    #[test]
    fn point_mass_compensator_closed_form() {
        // gamma = x*z with PointMass(1) marks at intensity 2 compensates to 2x.
        fn comp(_t: f64, x: &[f64], out: &mut [f64]) {
            out[0] = 2.0 * x[0];
        }
        let p = Problem {
            name: "pm",
            compensator_mean: comp,
            levy: LevyModel {
                intensity: 2.0,
                mark_law: MarkLaw::PointMass(1.0),
            },
            ..example1()
        };
        let mut out = [0.0];
        p.compensator(0.0, &[3.0], &mut out);
        assert_eq!(out[0], 6.0);
        // and the closed form matches intensity * E[gamma] exactly here
        let mut gamma = [0.0];
        (p.jump_coeff)(0.0, &[3.0], p.levy.mark_law.mean(), &mut gamma);
        assert_eq!(out[0], p.levy.intensity * gamma[0]);
    }

    /// Monte Carlo check that every built-in's stored compensator matches
    /// intensity * mean of jump_coeff over sampled marks, at probe states.
    #[test]
    fn compensators_match_monte_carlo_means() {
        let draws = 100_000;
        let probes: [f64; 5] = [-2.0, -0.5, 0.0, 1.0, 3.0];
        for name in builtin_names() {
            let mut stream = derive_stream(StreamKey {
                base_seed: 2024,
                path_index: 0,
                lane: Lane::JumpMarks,
            });
            match builtin(name).unwrap() {
                AnyProblem::Sde(p) => {
                    if p.levy.intensity == 0.0 {
                        continue;
                    }
                    for &x in &probes {
                        let mut acc = 0.0;
                        let mut acc2 = 0.0;
                        let mut gamma = [0.0];
                        for _ in 0..draws {
                            let z = p.levy.mark_law.sample(&mut stream);
                            (p.jump_coeff)(0.5, &[x], z, &mut gamma);
                            acc += gamma[0];
                            acc2 += gamma[0] * gamma[0];
                        }
                        let mean = p.levy.intensity * acc / draws as f64;
                        let var = (acc2 / draws as f64) - (acc / draws as f64).powi(2);
                        let se = p.levy.intensity * (var / draws as f64).sqrt();
                        let mut stored = [0.0];
                        p.compensator(0.5, &[x], &mut stored);
                        assert!(
                            (mean - stored[0]).abs() <= 4.0 * se + 1e-12,
                            "{name} at x={x}: mc {mean} vs stored {}",
                            stored[0]
                        );
                    }
                }
                AnyProblem::Delay(p) => {
                    for &x in &probes {
                        let y = [0.7];
                        let mut acc = 0.0;
                        let mut acc2 = 0.0;
                        let mut gamma = [0.0];
                        for _ in 0..draws {
                            let z = p.levy.mark_law.sample(&mut stream);
                            (p.jump_coeff)(0.5, &y, &[x], z, &mut gamma);
                            acc += gamma[0];
                            acc2 += gamma[0] * gamma[0];
                        }
                        let mean = p.levy.intensity * acc / draws as f64;
                        let var = (acc2 / draws as f64) - (acc / draws as f64).powi(2);
                        let se = p.levy.intensity * (var / draws as f64).sqrt();
                        let mut stored = [0.0];
                        p.compensator(0.5, &y, &[x], &mut stored);
                        assert!(
                            (mean - stored[0]).abs() <= 4.0 * se + 1e-12,
                            "{name} at x={x}: mc {mean} vs stored {}",
                            stored[0]
                        );
                    }
                }
            }
        }
    }

    /// Pointwise probe of the one-sided growth condition
    /// x*b(x) <= L(1 + x^2) for the example1 drift.
    #[test]
    fn example1_drift_one_sided_growth() {
        let p = example1();
        let mut out = [0.0];
        for &x in &[-3.0, -1.0, -0.1, 0.0, 0.5, 1.0, 2.0, 10.0] {
            (p.drift)(0.0, &[x], &mut out);
            assert!(x * out[0] <= 1.0 + x * x, "x b(x) = {} at x = {x}", x * out[0]);
        }
    }

    /// The example2 lag stays inside [-H, floor(t/h)h] at every grid point.
    #[test]
    fn example2_lag_respects_constraint() {
        let p = example2();
        let n = 8u32;
        for k in 0..=(2 * n) {
            let t = k as f64 / n as f64;
            let delayed = t - 1.0;
            assert!(delayed >= -p.depth);
            assert!(delayed <= libm::floor(t / p.segment) * p.segment);
        }
    }
}

//! Strong-error estimation with coupled coarse/reference paths.
//!
//! Every path draws its driving noise exactly once, on the reference grid,
//! from streams keyed by `(base_seed, path_index)`. Coarse runs reuse that
//! noise through exact coarsening, so the deviation between resolutions is
//! discretization error only, never a change of scenario. Paths run in
//! parallel but are aggregated in fixed index order, which makes every report
//! a pure function of its config: worker count affects speed and nothing
//! else.

use std::time::Instant;

use rayon::prelude::*;

use tamed_euler::{
    builtin, simulate, simulate_delay, AnyProblem, Error, GridSpec, NoisePath, SchemeConfig,
    Taming, Trajectory,
};

/// Where along the trajectory the deviation from the reference is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorTime {
    /// `|x_ref(T) - x_n(T)|` at the final time.
    Terminal,
    /// `max_t |x_ref(t) - x_n(t)|` over the coarse grid points.
    RunningMax,
}

/// A strong-convergence experiment: the problem, the resolutions, and how
/// deviations are measured.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Registry name of the problem; see `tamed_euler::builtin_names`.
    pub problem: String,
    /// Coarse levels l, each run at n = 2^l steps per unit time.
    pub levels: Vec<u32>,
    /// The reference trajectory runs at n = 2^ref_level.
    pub ref_level: u32,
    pub paths: u64,
    pub base_seed: u64,
    pub theta: f64,
    pub error_time: ErrorTime,
    /// Also run the plain Euler scheme for the moment comparison.
    pub compare_untamed: bool,
}

impl ExperimentConfig {
    /// Structural checks: nonempty strictly increasing levels, a reference at
    /// least as fine as every level, at least two paths, theta in range.
    ///
    /// A reference *equal* to the top level is accepted here because the
    /// coupled error is then exactly zero, which is worth asserting in tests;
    /// the CLI additionally requires a strictly finer reference.
    pub fn validate(&self) -> Result<(), Error> {
        if self.levels.is_empty() {
            return Err(Error::InvalidInput("levels must be nonempty".into()));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "levels must be strictly increasing, got {:?}",
                self.levels
            )));
        }
        let top = *self.levels.last().unwrap();
        if self.ref_level < top {
            return Err(Error::InvalidInput(format!(
                "ref_level {} is coarser than the largest level {top}",
                self.ref_level
            )));
        }
        if self.ref_level > 30 {
            return Err(Error::InvalidInput(format!(
                "ref_level {} exceeds the supported maximum of 30",
                self.ref_level
            )));
        }
        if self.paths < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 paths, got {}",
                self.paths
            )));
        }
        SchemeConfig::tamed(1, self.theta)?;
        Ok(())
    }
}

/// Measured errors at one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelError {
    pub level: u32,
    pub step_size: f64,
    /// Root mean squared deviation over the non-diverged paths.
    pub l2_error: f64,
    /// Mean absolute deviation over the non-diverged paths.
    pub l1_error: f64,
    /// Paths whose coarse (or reference) run left the finite range; counted
    /// and excluded from the moments, never silently dropped.
    pub paths_diverged: u64,
}

/// The outcome of [`strong_error`].
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub config: ExperimentConfig,
    pub rows: Vec<LevelError>,
    /// Least-squares slope of log2(l2_error) vs log2(step_size), when the
    /// errors admit a fit.
    pub fitted_rate_l2: Option<f64>,
    pub fitted_rate_l1: Option<f64>,
    pub wall_seconds: f64,
}

/// The driving noise for one experiment path, sampled on `grid`.
pub fn path_noise(
    problem: &AnyProblem,
    grid: GridSpec,
    base_seed: u64,
    path_index: u64,
) -> NoisePath {
    let levy = problem.levy();
    NoisePath::generate(
        base_seed,
        path_index,
        grid,
        problem.m(),
        levy.intensity,
        levy.mark_law,
    )
}

/// Runs whichever stepper the problem needs.
pub fn simulate_any(
    problem: &AnyProblem,
    config: &SchemeConfig,
    noise: &NoisePath,
) -> Result<Trajectory, Error> {
    match problem {
        AnyProblem::Sde(p) => simulate(p, config, noise),
        AnyProblem::Delay(p) => simulate_delay(p, config, noise),
    }
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn deviation(reference: &Trajectory, coarse: &Trajectory, error_time: ErrorTime) -> f64 {
    match error_time {
        ErrorTime::Terminal => norm_diff(reference.terminal(), coarse.terminal()),
        ErrorTime::RunningMax => {
            let factor = (reference.grid().n() / coarse.grid().n()) as usize;
            (0..coarse.len())
                .map(|k| norm_diff(reference.state(k * factor), coarse.state(k)))
                .fold(0.0, f64::max)
        }
    }
}

fn step_size(level: u32) -> f64 {
    2.0f64.powi(-(level as i32))
}

/// Estimates strong errors of each coarse level against the reference level,
/// all runs of one path driven by the same noise.
pub fn strong_error(config: &ExperimentConfig) -> Result<ErrorReport, Error> {
    config.validate()?;
    let problem = builtin(&config.problem)?;
    let start = Instant::now();

    let (t0, t1) = problem.window();
    let ref_n = 1u32 << config.ref_level;
    let ref_grid = GridSpec::new(t0, t1, ref_n)?;
    let ref_config = SchemeConfig::tamed(ref_n, config.theta)?;
    let level_configs = config
        .levels
        .iter()
        .map(|&l| SchemeConfig::tamed(1 << l, config.theta))
        .collect::<Result<Vec<_>, _>>()?;

    // Per path, the deviation at each level; None marks a run (or its
    // reference) that left the finite range.
    let per_path: Vec<Result<Vec<Option<f64>>, Error>> = (0..config.paths as usize)
        .into_par_iter()
        .map(|i| {
            let noise = path_noise(&problem, ref_grid, config.base_seed, i as u64);
            let reference = simulate_any(&problem, &ref_config, &noise)?;
            level_configs
                .iter()
                .map(|level_config| {
                    let coarse = simulate_any(&problem, level_config, &noise)?;
                    if reference.is_finite() && coarse.is_finite() {
                        Ok(Some(deviation(&reference, &coarse, config.error_time)))
                    } else {
                        Ok(None)
                    }
                })
                .collect()
        })
        .collect();
    let per_path = per_path.into_iter().collect::<Result<Vec<_>, Error>>()?;

    let mut rows = Vec::with_capacity(config.levels.len());
    for (j, &level) in config.levels.iter().enumerate() {
        let mut sum_sq = 0.0;
        let mut sum_abs = 0.0;
        let mut used = 0u64;
        let mut diverged = 0u64;
        for devs in &per_path {
            match devs[j] {
                Some(dev) => {
                    sum_sq += dev * dev;
                    sum_abs += dev;
                    used += 1;
                }
                None => diverged += 1,
            }
        }
        rows.push(LevelError {
            level,
            step_size: step_size(level),
            l2_error: (sum_sq / used as f64).sqrt(),
            l1_error: sum_abs / used as f64,
            paths_diverged: diverged,
        });
    }

    let l2_points: Vec<(f64, f64)> = rows.iter().map(|r| (r.step_size, r.l2_error)).collect();
    let l1_points: Vec<(f64, f64)> = rows.iter().map(|r| (r.step_size, r.l1_error)).collect();
    Ok(ErrorReport {
        config: config.clone(),
        fitted_rate_l2: fit_rate(&l2_points).ok(),
        fitted_rate_l1: fit_rate(&l1_points).ok(),
        rows,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Ordinary least-squares slope of log2(error) against log2(step_size).
///
/// Rejects fewer than two points, non-positive or non-finite entries, and
/// repeated step sizes (no spread to fit against).
pub fn fit_rate(points: &[(f64, f64)]) -> Result<f64, Error> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "rate fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    for &(step, err) in points {
        if !step.is_finite() || step <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "rate fit needs positive finite step sizes, got {step}"
            )));
        }
        if !err.is_finite() || err <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "rate fit needs positive finite errors, got {err}"
            )));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log2()).collect();
    let count = points.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / count;
    let mean_y = ys.iter().sum::<f64>() / count;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "rate fit needs at least two distinct step sizes".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// One resolution of the tamed-vs-untamed comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub level: u32,
    pub step_size: f64,
    /// Monte Carlo estimate of E sup_t |x^n_t|^2 under the tamed scheme.
    pub tamed_sup_moment2: f64,
    pub tamed_diverged: u64,
    pub untamed_sup_moment2: f64,
    pub untamed_diverged: u64,
}

/// The outcome of [`compare_untamed`].
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<MomentRow>,
    pub wall_seconds: f64,
}

fn sup_norm2(traj: &Trajectory) -> f64 {
    (0..traj.len())
        .map(|k| traj.state(k).iter().map(|x| x * x).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Estimates E sup_t |x^n_t|^2 at each level under one scheme variant, with
/// diverged paths counted and excluded. All levels of one path run on the
/// same noise, generated once at `gen_level` and coarsened down, so the
/// moments differ by discretization only.
pub fn sup_moments(
    problem: &AnyProblem,
    levels: &[u32],
    gen_level: u32,
    paths: u64,
    base_seed: u64,
    theta: f64,
    taming: Taming,
) -> Result<Vec<(f64, u64)>, Error> {
    if levels.is_empty() {
        return Err(Error::InvalidInput("levels must be nonempty".into()));
    }
    if let Some(&l) = levels.iter().find(|&&l| l > gen_level) {
        return Err(Error::InvalidInput(format!(
            "level {l} is finer than the generation level {gen_level}"
        )));
    }
    if gen_level > 30 {
        return Err(Error::InvalidInput(format!(
            "generation level {gen_level} exceeds the supported maximum of 30"
        )));
    }
    let (t0, t1) = problem.window();
    let gen_grid = GridSpec::new(t0, t1, 1u32 << gen_level)?;
    let configs = levels
        .iter()
        .map(|&l| match taming {
            Taming::Tamed => SchemeConfig::tamed(1 << l, theta),
            Taming::Untamed => Ok(SchemeConfig::untamed(1 << l)),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let per_path: Vec<Result<Vec<Option<f64>>, Error>> = (0..paths as usize)
        .into_par_iter()
        .map(|i| {
            let noise = path_noise(problem, gen_grid, base_seed, i as u64);
            configs
                .iter()
                .map(|config| {
                    let traj = simulate_any(problem, config, &noise)?;
                    Ok(traj.is_finite().then(|| sup_norm2(&traj)))
                })
                .collect()
        })
        .collect();
    let per_path = per_path.into_iter().collect::<Result<Vec<_>, Error>>()?;

    Ok((0..levels.len())
        .map(|j| {
            let mut sum = 0.0;
            let mut used = 0u64;
            let mut diverged = 0u64;
            for sups in &per_path {
                match sups[j] {
                    Some(s) => {
                        sum += s;
                        used += 1;
                    }
                    None => diverged += 1,
                }
            }
            (sum / used as f64, diverged)
        })
        .collect())
}

/// Runs the tamed and the plain Euler scheme on identical noise and reports
/// E sup_t |x^n_t|^2 plus divergence counts per level for both.
pub fn compare_untamed(config: &ExperimentConfig) -> Result<MomentReport, Error> {
    config.validate()?;
    let problem = builtin(&config.problem)?;
    let start = Instant::now();
    let tamed = sup_moments(
        &problem,
        &config.levels,
        config.ref_level,
        config.paths,
        config.base_seed,
        config.theta,
        Taming::Tamed,
    )?;
    let untamed = sup_moments(
        &problem,
        &config.levels,
        config.ref_level,
        config.paths,
        config.base_seed,
        config.theta,
        Taming::Untamed,
    )?;
    let rows = config
        .levels
        .iter()
        .zip(tamed.iter().zip(&untamed))
        .map(|(&level, (&(tm, td), &(um, ud)))| MomentRow {
            level,
            step_size: step_size(level),
            tamed_sup_moment2: tm,
            tamed_diverged: td,
            untamed_sup_moment2: um,
            untamed_diverged: ud,
        })
        .collect();
    Ok(MomentReport {
        config: config.clone(),
        rows,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

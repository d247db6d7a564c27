//! CSV rendering with a bit-exact contract: fixed headers, floats at 17
//! significant digits (enough to round-trip any f64), LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write as _};
use std::path::Path;

use tamed_euler::Trajectory;

use crate::experiment::{ErrorReport, MomentReport};

pub const CONVERGENCE_HEADER: &str = "level,step_size,l2_error,l1_error,paths_diverged";
pub const MOMENTS_HEADER: &str =
    "level,step_size,tamed_sup_moment2,tamed_diverged,untamed_sup_moment2,untamed_diverged";

/// Scientific notation with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per level: `level,step_size,l2_error,l1_error,paths_diverged`.
pub fn convergence_csv(report: &ErrorReport) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.level,
            fmt17(row.step_size),
            fmt17(row.l2_error),
            fmt17(row.l1_error),
            row.paths_diverged
        )
        .unwrap();
    }
    out
}

/// One row per grid point: `t,x0,...,x{d-1}`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t");
    for i in 0..traj.dim() {
        write!(out, ",x{i}").unwrap();
    }
    out.push('\n');
    for k in 0..traj.len() {
        out.push_str(&fmt17(traj.grid().time(k)));
        for x in traj.state(k) {
            out.push(',');
            out.push_str(&fmt17(*x));
        }
        out.push('\n');
    }
    out
}

/// One row per level of the tamed-vs-untamed moment comparison.
pub fn moments_csv(report: &MomentReport) -> String {
    let mut out = String::from(MOMENTS_HEADER);
    out.push('\n');
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.level,
            fmt17(row.step_size),
            fmt17(row.tamed_sup_moment2),
            row.tamed_diverged,
            fmt17(row.untamed_sup_moment2),
            row.untamed_diverged
        )
        .unwrap();
    }
    out
}

/// Writes to `path`, or to stdout when no path is given.
pub fn write_out(path: Option<&Path>, contents: &str) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, contents),
        None => io::stdout().write_all(contents.as_bytes()),
    }
}

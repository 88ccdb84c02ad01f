//! CSV contour grids.
//!
//! A rectangular grid file has the fixed header
//! `x1,x2,re_phi,im_phi,abs_phi,lyapunov,decreasing` and one row per
//! lattice point, row-major with x₂ varying fastest. Floats use Rust's
//! default formatting, which is the shortest decimal that round-trips
//! the IEEE-754 value, so regenerating a grid from the same analysis is
//! byte-identical, and `abs_phi` is written as √(re_phi² + im_phi²) of
//! the printed components. Points where the eigenfunction or Lyapunov
//! candidate is not defined (outside a Bernstein box or annulus chart)
//! get `NaN` columns and a 0 decrease flag.
//!
//! Limit-cycle analyses instead write an annulus grid of log|φ| — the
//! quantity whose level sets display the isostable geometry around the
//! cycle — parameterized by the chart coordinates (θ, y) with the
//! matching state-space point alongside.

use std::io::Write;

use koopman::limit_cycle::FourierBernsteinEigenfunction;
use koopman::stability::{
    integrate_flow, lyapunov_value, Eigenfunction, GridSpec, LyapunovFunction,
};
use koopman::system::DynamicalSystem;

use crate::commands::CliError;

/// The exact header line of rectangular grids.
pub const GRID_HEADER: &str = "x1,x2,re_phi,im_phi,abs_phi,lyapunov,decreasing";

/// The exact header line of annulus grids.
pub const LC_GRID_HEADER: &str = "theta,y,x1,x2,log_abs_phi";

/// Render the grid for a planar system: `phi` fills the eigenfunction
/// columns, `v` the Lyapunov column, and the decrease flag repeats the
/// short-time flow comparison 𝒱(φ^δ(x)) < 𝒱(x) used by the basin
/// lattice (a point with 𝒱 exactly 0 counts as decreasing).
pub fn render_grid(
    sys: &DynamicalSystem,
    phi: &dyn Eigenfunction,
    v: &LyapunovFunction,
    spec: &GridSpec,
    delta: f64,
) -> Result<String, CliError> {
    if spec.dim() != 2 {
        return Err(CliError::Config {
            stage: "grid",
            msg: format!("contour grids are planar; lattice dimension is {}", spec.dim()),
        });
    }
    let mut out = String::with_capacity(64 * spec.len());
    out.push_str(GRID_HEADER);
    out.push('\n');
    for flat in 0..spec.len() {
        let x = spec.point(flat);
        let (re, im, abs) = if phi.in_domain(&x) {
            match phi.eval(&x) {
                Ok(z) => (z.re, z.im, (z.re * z.re + z.im * z.im).sqrt()),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            }
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };
        let val = lyapunov_value(v, &x).ok().filter(|v| v.is_finite());
        let decreasing = match val {
            Some(v0) => match integrate_flow(sys, &x, delta) {
                Ok(x_next) => match lyapunov_value(v, &x_next) {
                    Ok(v1) if v1.is_finite() => v1 < v0 || v0 == 0.0,
                    _ => false,
                },
                Err(_) => false,
            },
            None => false,
        };
        let lyap = val.unwrap_or(f64::NAN);
        let dec = if decreasing { 1 } else { 0 };
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            x[0], x[1], re, im, abs, lyap, dec
        ));
    }
    Ok(out)
}

/// Render the annulus grid of log|φ| for a limit-cycle eigenfunction:
/// `resolution` uniform angles (2π-periodic, so the endpoint is
/// excluded) by `resolution` radial points spanning y ∈ [0, 1], row-major
/// with y varying fastest. log|φ| dives toward −∞ at the cycle itself,
/// where φ vanishes.
pub fn render_lc_grid(ef: &FourierBernsteinEigenfunction, resolution: usize) -> String {
    let mut out = String::with_capacity(48 * resolution * resolution);
    out.push_str(LC_GRID_HEADER);
    out.push('\n');
    for i in 0..resolution {
        let theta = std::f64::consts::TAU * i as f64 / resolution as f64;
        for j in 0..resolution {
            let y = j as f64 / (resolution - 1) as f64;
            let x = ef.lc().to_cartesian(theta, y);
            let z = ef.eval_chart(theta, y);
            let log_abs = (z.re * z.re + z.im * z.im).sqrt().ln();
            out.push_str(&format!("{theta},{y},{},{},{log_abs}\n", x[0], x[1]));
        }
    }
    out
}

/// Render and write an annulus log|φ| grid to `path`.
pub fn write_lc_grid(
    path: &std::path::Path,
    ef: &FourierBernsteinEigenfunction,
    resolution: usize,
) -> Result<(), CliError> {
    if resolution < 2 {
        return Err(CliError::Config {
            stage: "grid",
            msg: format!("annulus grids need at least 2 points per axis, got {resolution}"),
        });
    }
    let text = render_lc_grid(ef, resolution);
    std::fs::write(path, text).map_err(|e| CliError::Io {
        stage: "grid-io",
        source: e,
    })
}

/// Render and write a grid to `path`.
pub fn write_grid(
    path: &std::path::Path,
    sys: &DynamicalSystem,
    phi: &dyn Eigenfunction,
    v: &LyapunovFunction,
    spec: &GridSpec,
    delta: f64,
) -> Result<(), CliError> {
    let text = render_grid(sys, phi, v, spec, delta)?;
    let file = std::fs::File::create(path).map_err(|e| CliError::Io {
        stage: "grid-io",
        source: e,
    })?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(text.as_bytes()).map_err(|e| CliError::Io {
        stage: "grid-io",
        source: e,
    })?;
    w.flush().map_err(|e| CliError::Io {
        stage: "grid-io",
        source: e,
    })
}
